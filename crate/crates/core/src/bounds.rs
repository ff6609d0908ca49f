//! Closed-form convergence bounds for truncated stochastic approximation.
//!
//! All quantities bound E‖h(θ_N)‖² under the randomized stopping rule
//! P(N = k) ∝ ρ_{k+1}. The inputs are theory constants that are rarely
//! known in practice; these functions exist to tabulate how the bound moves
//! with γ, ρ, α and U, and to cross-check the constant-step rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sa::{corollary1_rho, StepSchedule};
use crate::special::erfc;

/// ∫_γ^∞ exp(−z²/M²) dz = (M√π/2)·erfc(γ/M).
pub fn gaussian_tail(gamma: f64, m: f64) -> f64 {
    if gamma == f64::INFINITY {
        return 0.0;
    }
    0.5 * m * std::f64::consts::PI.sqrt() * erfc(gamma / m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub d1: f64,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub l: f64,
    /// Inlier probability.
    pub alpha: f64,
    /// Half-width of the uniform noise box.
    pub u: f64,
    pub d: u32,
    /// Lyapunov decrement E[V(θ₀) − V(θ_{n+1})].
    pub v0n: f64,
    pub n: u64,
    pub schedule: StepSchedule,
    #[serde(with = "crate::serde_float")]
    pub gamma: f64,
    pub m: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.c0 >= 0.0, "c0 >= 0"),
            (self.c1 > 0.0, "c1 > 0"),
            (self.d0 > 0.0, "d0 > 0"),
            (self.d1 > 0.0, "d1 > 0"),
            (self.sigma0_sq >= 0.0, "sigma0_sq >= 0"),
            (self.sigma1_sq >= 0.0, "sigma1_sq >= 0"),
            (self.l > 0.0, "L > 0"),
            (self.alpha > 0.0 && self.alpha <= 1.0, "alpha in (0, 1]"),
            (self.u >= 0.0 && self.u.is_finite(), "U >= 0"),
            (self.d >= 1, "d >= 1"),
            (self.v0n.is_finite(), "V0n finite"),
            (self.gamma > 0.0, "gamma > 0"),
            (self.m > 0.0 && self.m.is_finite(), "M > 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidConfig(format!("bound inputs violate {what}")));
            }
        }
        self.schedule.validate()
    }

    fn box_sq(&self) -> f64 {
        self.d as f64 * self.u * self.u
    }

    fn tail(&self) -> f64 {
        gaussian_tail(self.gamma, self.m)
    }

    fn rho_sums(&self) -> Result<(f64, f64)> {
        let (s1, s2) = self.schedule.sums(self.n);
        if !(s1 > 0.0) {
            return Err(Error::InvalidConfig("sum of step sizes must be positive".into()));
        }
        Ok((s1, s2))
    }

    /// Largest admissible step size for the truncated bound.
    pub fn rho_limit(&self) -> f64 {
        (1.0 - 2.0 * self.c1 * self.d1 * self.tail())
            / (2.0 * self.c1 * self.l * (self.sigma1_sq + 2.0))
    }

    /// β = (d₀+1)/(L(1−α)); infinite for α = 1.
    pub fn beta(&self) -> f64 {
        (self.d0 + 1.0) / (self.l * (1.0 - self.alpha))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub warning: Option<String>,
}

/// Bound on E‖h(θ_N)‖² for the truncated scheme:
/// 2(c₀ + c₁(d₀+1)·tail) + 2c₁(V₀,ₙ + L(ασ₀² + (1−α)min(dU², γ²))Σρ²)/Σρ.
pub fn theorem2_bound(inputs: &BoundInputs) -> Result<BoundValue> {
    inputs.validate()?;
    let (s1, s2) = inputs.rho_sums()?;
    let noise = inputs.alpha * inputs.sigma0_sq
        + (1.0 - inputs.alpha) * inputs.box_sq().min(inputs.gamma * inputs.gamma);
    let value = 2.0 * (inputs.c0 + inputs.c1 * (inputs.d0 + 1.0) * inputs.tail())
        + 2.0 * inputs.c1 * (inputs.v0n + inputs.l * noise * s2) / s1;
    let limit = inputs.rho_limit();
    let max_rho = inputs.schedule.max_rho();
    let warning = (max_rho >= limit)
        .then(|| format!("max step size {max_rho} violates the admissibility limit {limit}"));
    Ok(BoundValue { value, warning })
}

/// Untruncated, noiseless reference: 2c₁(V₀,ₙ + σ₀²LΣρ²)/Σρ + 2c₀.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (s1, s2) = inputs.rho_sums()?;
    Ok(2.0 * inputs.c1 * (inputs.v0n + inputs.sigma0_sq * inputs.l * s2) / s1 + 2.0 * inputs.c0)
}

/// Constant-ρ specialization, evaluated for the ρ given (the schedule in
/// `inputs` is ignored).
pub fn const_rho_bound(inputs: &BoundInputs, rho: f64) -> f64 {
    let noise = inputs.alpha * inputs.sigma0_sq
        + (1.0 - inputs.alpha) * inputs.box_sq().min(inputs.gamma * inputs.gamma);
    2.0 * inputs.c0
        + 2.0 * inputs.c1 * (inputs.d0 + 1.0) * inputs.tail()
        + 2.0 * inputs.c1 * inputs.v0n / (rho * (inputs.n + 1) as f64)
        + 2.0 * inputs.c1 * rho * inputs.l * noise
}

/// γ → ∞ limit: 2c₀ + 2c₁(V₀,ₙ + L(ασ₀² + (1−α)dU²)Σρ²)/Σρ.
pub fn corollary2_limit(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (s1, s2) = inputs.rho_sums()?;
    let noise = inputs.alpha * inputs.sigma0_sq + (1.0 - inputs.alpha) * inputs.box_sq();
    Ok(2.0 * inputs.c0 + 2.0 * inputs.c1 * (inputs.v0n + inputs.l * noise * s2) / s1)
}

/// g(γ): how much truncation at γ lowers the bound relative to γ = ∞.
pub fn corollary3_gap(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (s1, s2) = inputs.rho_sums()?;
    let excess = (inputs.box_sq() - inputs.gamma * inputs.gamma).max(0.0);
    Ok(2.0 * inputs.c1 * inputs.l * (1.0 - inputs.alpha) * excess * s2 / s1
        - 2.0 * inputs.c1 * (inputs.d0 + 1.0) * inputs.tail())
}

/// g(γ) when ‖H‖ ≤ γ* almost surely: the tail integral becomes
/// ∫_γ^{γ*} exp(−z²/(γ*−γ)²) dz and vanishes for γ ≥ γ*.
pub fn bounded_update_gap(inputs: &BoundInputs, gamma_star: f64) -> Result<f64> {
    inputs.validate()?;
    if !(gamma_star > 0.0) {
        return Err(Error::InvalidConfig("gamma_star must be positive".into()));
    }
    let (s1, s2) = inputs.rho_sums()?;
    let gamma = inputs.gamma;
    let excess = (inputs.box_sq() - gamma * gamma).max(0.0);
    let gain = 2.0 * inputs.c1 * inputs.l * (1.0 - inputs.alpha) * excess * s2 / s1;
    if gamma >= gamma_star {
        return Ok(gain);
    }
    let w = gamma_star - gamma;
    let integral = 0.5 * w * std::f64::consts::PI.sqrt() * (erfc(gamma / w) - erfc(gamma_star / w));
    Ok(gain - 2.0 * inputs.c1 * (inputs.d0 + 1.0) * integral)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
    /// The coarse scan saw more than one local minimum and a dense grid was used.
    pub used_grid: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..500 {
        if (hi - lo).abs() <= rel_tol * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn count_interior_minima(values: &[f64]) -> usize {
    values
        .windows(3)
        .filter(|w| w[1] < w[0] && w[1] <= w[2])
        .count()
}

/// Minimize `f` over [lo, hi] (lo > 0) in log coordinates. A coarse scan
/// checks for unimodality; if it fails the minimum of a dense grid refined
/// by golden section on the neighbouring cells is returned.
pub fn minimize_unimodal(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Minimum {
    let (a, b) = (lo.ln(), hi.ln());
    let g = |x: f64| f(x.exp());
    let coarse: Vec<f64> = (0..=64).map(|i| g(a + (b - a) * i as f64 / 64.0)).collect();
    let used_grid = count_interior_minima(&coarse) > 1;
    let x = if used_grid {
        let n = 20_000;
        let step = (b - a) / n as f64;
        let best: usize = (0..=n)
            .map(|i| (i, g(a + step * i as f64)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .map(|p| p.0)
            .unwrap_or(0);
        let lo_i = best.saturating_sub(1) as f64;
        let hi_i = (best + 1).min(n) as f64;
        golden_section(&g, a + step * lo_i, a + step * hi_i, 1e-14)
    } else {
        golden_section(&g, a, b, 1e-14)
    };
    let argmin = x.exp();
    Minimum { argmin, value: f(argmin), used_grid }
}

/// Numerically minimize the constant-step bound over ρ ∈ (0, ρ_max].
/// Requires γ < √d·U, the regime where the outlier variance term is γ².
pub fn minimize_const_rho_bound(inputs: &BoundInputs, rho_max: f64) -> Result<Minimum> {
    inputs.validate()?;
    if inputs.gamma * inputs.gamma >= inputs.box_sq() {
        return Err(Error::InvalidConfig("step-size minimization needs gamma < sqrt(d)*U".into()));
    }
    if !(rho_max > 0.0) {
        return Err(Error::InvalidConfig("rho_max must be positive".into()));
    }
    let f = |rho: f64| const_rho_bound(inputs, rho);
    Ok(minimize_unimodal(&f, rho_max * 1e-12, rho_max))
}

/// Copy of `inputs` whose V₀,ₙ puts the ρ-stationary point of the constant
/// bound exactly at the step-size rule ρ = β·exp(−γ²/M²)/(2γ).
pub fn with_stationary_decrement(inputs: &BoundInputs) -> BoundInputs {
    let rho = corollary1_rho(inputs.gamma, inputs.beta(), inputs.m);
    let noise =
        inputs.alpha * inputs.sigma0_sq + (1.0 - inputs.alpha) * inputs.gamma * inputs.gamma;
    BoundInputs {
        v0n: (inputs.n + 1) as f64 * inputs.l * noise * rho * rho,
        ..inputs.clone()
    }
}

/// Comparison of the two published forms of the constant step-size rule,
/// with and without a leading c₁, against direct numerical minimization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRuleCrossCheck {
    pub gamma: f64,
    pub beta: f64,
    pub m: f64,
    pub c1: f64,
    /// β·exp(−γ²/M²)/(2γ)
    pub rho_rule: f64,
    /// c₁·β·exp(−γ²/M²)/(2γ)
    pub rho_rule_c1: f64,
    /// argmin over ρ of the constant-step bound at the given V₀,ₙ.
    pub rho_numeric: f64,
    /// argmin over γ ∈ (0, √d·U) of the bound with ρ = rho_rule.
    pub gamma_at_rule: f64,
    /// argmin over γ of the bound with ρ = rho_rule_c1.
    pub gamma_at_rule_c1: f64,
    pub rule_consistent: bool,
    pub rule_c1_consistent: bool,
}

pub fn step_rule_cross_check(inputs: &BoundInputs, rho_max: f64) -> Result<StepRuleCrossCheck> {
    inputs.validate()?;
    if inputs.alpha >= 1.0 {
        return Err(Error::InvalidConfig("step-size rule needs alpha < 1".into()));
    }
    let beta = inputs.beta();
    let rho_rule = corollary1_rho(inputs.gamma, beta, inputs.m);
    let rho_rule_c1 = inputs.c1 * rho_rule;
    let rho_numeric = minimize_const_rho_bound(inputs, rho_max)?.argmin;
    let gamma_hi = inputs.box_sq().sqrt();
    let gamma_argmin = |rho: f64| {
        let f = |g: f64| const_rho_bound(&BoundInputs { gamma: g, ..inputs.clone() }, rho);
        minimize_unimodal(&f, gamma_hi * 1e-9, gamma_hi).argmin
    };
    let gamma_at_rule = gamma_argmin(rho_rule);
    let gamma_at_rule_c1 = gamma_argmin(rho_rule_c1);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-12);
    Ok(StepRuleCrossCheck {
        gamma: inputs.gamma,
        beta,
        m: inputs.m,
        c1: inputs.c1,
        rho_rule,
        rho_rule_c1,
        rho_numeric,
        gamma_at_rule,
        gamma_at_rule_c1,
        rule_consistent: close(gamma_at_rule, inputs.gamma),
        rule_c1_consistent: close(gamma_at_rule_c1, inputs.gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn base() -> BoundInputs {
        BoundInputs {
            c0: 0.1,
            c1: 1.5,
            d0: 2.0,
            d1: 0.5,
            sigma0_sq: 0.3,
            sigma1_sq: 0.2,
            l: 2.0,
            alpha: 0.99,
            u: 20.0,
            d: 1,
            v0n: 4.0,
            n: 9999,
            schedule: StepSchedule::Constant { rho: 0.01 },
            gamma: 3.0,
            m: 5.0,
        }
    }

    // Composite Gauss–Legendre (5 points) on [γ/M, γ/M + 12], scaled by M.
    fn tail_quadrature(gamma: f64, m: f64) -> f64 {
        const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        let a = gamma / m;
        let panels = 4000;
        let h = 12.0 / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            for (x, w) in X.iter().zip(W) {
                let z = mid + 0.5 * h * x;
                s += w * 0.5 * h * (-z * z).exp();
            }
        }
        m * s
    }

    #[test]
    fn tail_examples() {
        assert!((gaussian_tail(0.0, 2.0) - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let q = tail_quadrature(3.0, 5.0);
        assert!((gaussian_tail(3.0, 5.0) - q).abs() < 1e-8);
        assert!((gaussian_tail(3.0, 5.0) - q).abs() / q < 1e-12);
        assert_eq!(gaussian_tail(f64::INFINITY, 1.0), 0.0);
        assert!(gaussian_tail(60.0, 1.0) < 1e-300);
    }

    #[test]
    fn tail_monotone() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let g = i as f64 * 0.1;
            let v = gaussian_tail(g, 3.0);
            assert!(v < prev);
            prev = v;
        }
        assert!(gaussian_tail(2.0, 3.0) > gaussian_tail(2.0, 2.5));
    }

    #[test]
    fn noiseless_limit_recovers_reference() {
        let inp = BoundInputs { alpha: 1.0, gamma: f64::INFINITY, ..base() };
        let a = theorem2_bound(&inp).unwrap().value;
        let b = theorem1_bound(&inp).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn constant_form_matches() {
        let inp = base();
        let a = theorem2_bound(&inp).unwrap().value;
        let b = const_rho_bound(&inp, 0.01);
        assert!((a - b).abs() <= 1e-12 * b);
    }

    // Moving mass from outliers to inliers helps only when the outlier
    // variance term γ² exceeds the inlier one σ₀².
    #[test]
    fn alpha_monotone_when_gamma_inside_box() {
        let mut rng = StreamRng::new(8, 0);
        for _ in 0..100 {
            let mut inp = base();
            inp.sigma0_sq = rng.uniform_range(0.0, 1.0);
            inp.alpha = rng.uniform_range(0.5, 0.95);
            inp.gamma = rng.uniform_range(1.1, 15.0);
            let lo = theorem2_bound(&inp).unwrap().value;
            inp.alpha += 0.04;
            let hi = theorem2_bound(&inp).unwrap().value;
            assert!(hi < lo);
        }
    }

    #[test]
    fn bias_floor() {
        let inp = base();
        assert!(theorem2_bound(&inp).unwrap().value >= 2.0 * inp.c0);
    }

    #[test]
    fn gamma_beyond_box_only_moves_tail() {
        let a = BoundInputs { gamma: 25.0, ..base() };
        let b = BoundInputs { gamma: 30.0, ..base() };
        let diff = theorem2_bound(&a).unwrap().value - theorem2_bound(&b).unwrap().value;
        let tail_diff = 2.0 * a.c1 * (a.d0 + 1.0) * (gaussian_tail(25.0, 5.0) - gaussian_tail(30.0, 5.0));
        assert!((diff - tail_diff).abs() < 1e-12);
    }

    #[test]
    fn large_gamma_limit() {
        let inp = BoundInputs { gamma: 1e6, ..base() };
        let a = theorem2_bound(&inp).unwrap().value;
        let b = corollary2_limit(&inp).unwrap();
        assert!((a - b).abs() <= 1e-9 * b);
        let g = corollary3_gap(&BoundInputs { gamma: 1e6, ..base() }).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn gap_bounded_regime() {
        let inp = base();
        let (s1, s2) = inp.schedule.sums(inp.n);
        let exact = 2.0 * inp.c1 * inp.l * (1.0 - inp.alpha) * (400.0 - 9.0) * s2 / s1;
        assert_eq!(bounded_update_gap(&inp, 2.0).unwrap(), exact);
        assert!(bounded_update_gap(&inp, 6.0).unwrap() < exact);
    }

    #[test]
    fn admissibility_warning_attached() {
        let inp = BoundInputs { schedule: StepSchedule::Constant { rho: 0.9 }, ..base() };
        assert!(theorem2_bound(&inp).unwrap().warning.is_some());
    }

    #[test]
    fn minimizer_matches_rule_at_reference_config() {
        // β = (d0+1)/(L(1−α)) = 0.1 with α = 0.99, d0 = 1, L = 2000.
        let inp = BoundInputs { d0: 1.0, l: 2000.0, ..base() };
        assert!((inp.beta() - 0.1).abs() < 1e-12);
        let inp = with_stationary_decrement(&inp);
        let min = minimize_const_rho_bound(&inp, 1.0).unwrap();
        assert!((min.argmin - 0.0116).abs() < 1e-4);
        assert!((min.argmin - corollary1_rho(3.0, 0.1, 5.0)).abs() < 1e-6);
        assert!(min.value <= const_rho_bound(&inp, 0.5 * min.argmin));
        assert!(min.value <= const_rho_bound(&inp, 2.0 * min.argmin));
    }

    #[test]
    fn minimizer_requires_gamma_inside_box() {
        let inp = BoundInputs { gamma: 21.0, ..base() };
        assert!(minimize_const_rho_bound(&inp, 1.0).is_err());
    }

    #[test]
    fn grid_fallback_on_multimodal() {
        let f = |x: f64| (x.ln() * 3.0).sin() + 0.01 * x.ln().powi(2);
        let m = minimize_unimodal(&f, 1e-3, 1e3);
        assert!(m.used_grid);
        let brute = (0..200_000)
            .map(|i| {
                let x = (1e-3f64.ln() + (1e6f64).ln() * i as f64 / 200_000.0).exp();
                f(x)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(m.value <= brute + 1e-9);
    }

    #[test]
    fn cross_check_flags_c1_form() {
        let inp = with_stationary_decrement(&BoundInputs { d0: 1.0, l: 2000.0, c1: 1.5, ..base() });
        let report = step_rule_cross_check(&inp, 1.0).unwrap();
        assert!(report.rule_consistent);
        assert!(!report.rule_c1_consistent);
        assert!((report.rho_numeric - report.rho_rule).abs() < 1e-6);
    }
}
