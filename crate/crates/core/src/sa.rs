//! Truncated stochastic approximation.
//!
//! One step is `θ ← θ − ρ_{t+1} · G(H)` where `G(H) = H` if `‖H‖₂ ≤ γ` and
//! zero otherwise. With `γ = ∞` this is the plain SA recursion.

use serde::{Deserialize, Serialize};

use crate::bounds::gaussian_tail;
use crate::error::{Error, Result};

/// Step-size sequence ρ_t, t = 1, 2, ...
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { rho: f64 },
    /// ρ_t = c / √t
    InvSqrt { c: f64 },
    /// ρ_t = 1 / t
    Harmonic,
    /// ρ_t = r / (1 − (1 − r)^t): the weight of the newest sample in an
    /// exponentially discounted average normalized by its discounted count.
    /// r = 0 is the running mean.
    Discounted { r: f64 },
}

impl StepSchedule {
    pub fn rho(&self, t: u64) -> f64 {
        let tf = t.max(1) as f64;
        match *self {
            StepSchedule::Constant { rho } => rho,
            StepSchedule::InvSqrt { c } => c / tf.sqrt(),
            StepSchedule::Harmonic => 1.0 / tf,
            StepSchedule::Discounted { r } => {
                if r == 0.0 {
                    1.0 / tf
                } else {
                    r / -(tf * (-r).ln_1p()).exp_m1()
                }
            }
        }
    }

    /// Largest ρ_t over t ≥ 1.
    pub fn max_rho(&self) -> f64 {
        match *self {
            StepSchedule::Constant { rho } => rho,
            StepSchedule::InvSqrt { c } => c,
            StepSchedule::Harmonic | StepSchedule::Discounted { .. } => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant { rho } => rho > 0.0 && rho <= 1.0,
            StepSchedule::InvSqrt { c } => c > 0.0 && c.is_finite(),
            StepSchedule::Harmonic => true,
            StepSchedule::Discounted { r } => (0.0..1.0).contains(&r),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid step schedule {self:?}")))
        }
    }

    /// Σ_{k=0}^{n} ρ_{k+1} and Σ_{k=0}^{n} ρ_{k+1}².
    ///
    /// Closed forms for the constant and harmonic schedules; compensated
    /// summation otherwise.
    pub fn sums(&self, n: u64) -> (f64, f64) {
        let count = n + 1;
        match *self {
            StepSchedule::Constant { rho } => (rho * count as f64, rho * rho * count as f64),
            StepSchedule::Harmonic => (harmonic_number(count), harmonic_squares(count)),
            _ => {
                let mut s1 = KahanSum::default();
                let mut s2 = KahanSum::default();
                for t in 1..=count {
                    let r = self.rho(t);
                    s1.add(r);
                    s2.add(r * r);
                }
                (s1.value(), s2.value())
            }
        }
    }
}

#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const DIRECT_SUM_LIMIT: u64 = 64;

/// H_m = Σ_{t=1}^{m} 1/t.
pub fn harmonic_number(m: u64) -> f64 {
    if m <= DIRECT_SUM_LIMIT {
        let mut s = KahanSum::default();
        for t in (1..=m).rev() {
            s.add(1.0 / t as f64);
        }
        return s.value();
    }
    let x = m as f64;
    let x2 = x * x;
    x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
        - 1.0 / (252.0 * x2 * x2 * x2)
}

/// Σ_{t=1}^{m} 1/t² = π²/6 − ψ′(m+1).
pub fn harmonic_squares(m: u64) -> f64 {
    if m <= DIRECT_SUM_LIMIT {
        let mut s = KahanSum::default();
        for t in (1..=m).rev() {
            let tf = t as f64;
            s.add(1.0 / (tf * tf));
        }
        return s.value();
    }
    let x = (m + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let trigamma = inv + 0.5 * inv2 + inv2 * inv / 6.0 - inv2 * inv2 * inv / 30.0
        + inv2 * inv2 * inv2 * inv / 42.0
        - inv2 * inv2 * inv2 * inv2 * inv / 30.0;
    std::f64::consts::PI * std::f64::consts::PI / 6.0 - trigamma
}

/// Hyperparameters of the truncated update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SraConfig {
    /// Truncation threshold γ on ‖H‖₂; `f64::INFINITY` disables truncation.
    #[serde(with = "crate::serde_float")]
    pub gamma: f64,
    pub schedule: StepSchedule,
    /// β = (d₀+1)/(L(1−α)), when ρ was derived from the step-size rule.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Tail scale M of the same rule.
    #[serde(default)]
    pub m: Option<f64>,
}

impl SraConfig {
    pub fn new(gamma: f64, schedule: StepSchedule) -> Result<Self> {
        let cfg = Self { gamma, schedule, beta: None, m: None };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Constant ρ chosen by [`corollary1_rho`].
    pub fn from_gamma_beta_m(gamma: f64, beta: f64, m: f64) -> Result<Self> {
        if !(beta > 0.0 && m > 0.0) {
            return Err(Error::InvalidConfig("beta and M must be positive".into()));
        }
        let rho = corollary1_rho(gamma, beta, m);
        let cfg = Self {
            gamma,
            schedule: StepSchedule::Constant { rho },
            beta: Some(beta),
            m: Some(m),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn untruncated(schedule: StepSchedule) -> Self {
        Self { gamma: f64::INFINITY, schedule, beta: None, m: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be > 0, got {}", self.gamma)));
        }
        self.schedule.validate()
    }

    /// Warns when ρ breaks the admissibility condition of the truncated
    /// convergence bound. The constants are rarely known, so this never
    /// rejects a configuration.
    pub fn admissibility_warning(&self, consts: &AdmissibilityConstants) -> Option<String> {
        let limit = consts.rho_limit(self.gamma);
        let rho = self.schedule.max_rho();
        (rho >= limit).then(|| format!("step size {rho} is not below the admissible limit {limit}"))
    }
}

/// Constants entering the admissible step-size limit
/// ρ < (1 − 2c₁d₁·tail(γ, M)) / (2c₁L(σ₁² + 2)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConstants {
    pub c1: f64,
    pub d1: f64,
    pub l: f64,
    pub sigma1_sq: f64,
    pub m: f64,
}

impl AdmissibilityConstants {
    pub fn rho_limit(&self, gamma: f64) -> f64 {
        (1.0 - 2.0 * self.c1 * self.d1 * gaussian_tail(gamma, self.m))
            / (2.0 * self.c1 * self.l * (self.sigma1_sq + 2.0))
    }
}

/// Iterate of the recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct SaState {
    pub theta: Vec<f64>,
    /// Number of steps taken (including any offset the caller started from).
    pub t: u64,
    pub dropped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub rho: f64,
    pub truncated: bool,
}

impl SaState {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta, t: 0, dropped: 0 }
    }

    /// In-place step. On error the state is left untouched.
    pub fn advance(&mut self, update: &[f64], config: &SraConfig) -> Result<StepOutcome> {
        if update.len() != self.theta.len() {
            return Err(Error::DimensionMismatch { expected: self.theta.len(), got: update.len() });
        }
        let rho = config.schedule.rho(self.t + 1);
        let truncated = !keeps(update, config.gamma);
        if !truncated {
            let next: Vec<f64> = self.theta.iter().zip(update).map(|(th, h)| th - rho * h).collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: self.t + 1 });
            }
            self.theta = next;
        } else {
            self.dropped += 1;
        }
        self.t += 1;
        Ok(StepOutcome { rho, truncated })
    }
}

fn keeps(update: &[f64], gamma: f64) -> bool {
    euclidean_norm(update) <= gamma
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// G(H): `H` if ‖H‖₂ ≤ γ, else zeros. The flag reports truncation.
pub fn truncate(update: &[f64], gamma: f64) -> (Vec<f64>, bool) {
    if keeps(update, gamma) {
        (update.to_vec(), false)
    } else {
        (vec![0.0; update.len()], true)
    }
}

/// Pure form of [`SaState::advance`].
pub fn sa_step(state: &SaState, update: &[f64], config: &SraConfig) -> Result<SaState> {
    let mut next = state.clone();
    next.advance(update, config)?;
    Ok(next)
}

/// Constant step size balancing truncation bias against outlier variance:
/// ρ = β · exp(−γ²/M²) / (2γ).
pub fn corollary1_rho(gamma: f64, beta: f64, m: f64) -> f64 {
    beta * (-(gamma * gamma) / (m * m)).exp() / (2.0 * gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truncation_boundary() {
        assert_eq!(truncate(&[3.0, 4.0], 5.0), (vec![3.0, 4.0], false));
        assert_eq!(truncate(&[3.0, 4.0], 4.9), (vec![0.0, 0.0], true));
        assert_eq!(truncate(&[1e300, -1e300], f64::INFINITY).1, false);
    }

    #[test]
    fn step_examples() {
        let cfg = SraConfig::new(10.0, StepSchedule::Constant { rho: 0.5 }).unwrap();
        let s = sa_step(&SaState::new(vec![1.0]), &[1.0], &cfg).unwrap();
        assert_eq!(s.theta, vec![0.5]);
        assert_eq!((s.t, s.dropped), (1, 0));

        let theta = vec![0.123456789, -3.3];
        let s = sa_step(&SaState::new(theta.clone()), &[100.0, 0.0], &cfg).unwrap();
        assert_eq!(s.theta, theta);
        assert_eq!(s.dropped, 1);

        let iem = SraConfig::untruncated(StepSchedule::Harmonic);
        let mut st = SaState::new(vec![1.0]);
        st.t = 3;
        let s = sa_step(&st, &[0.4], &iem).unwrap();
        assert!((s.theta[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = SraConfig::untruncated(StepSchedule::Constant { rho: 1.0 });
        let mut st = SaState::new(vec![f64::MAX]);
        let err = st.advance(&[-f64::MAX], &cfg).unwrap_err();
        assert_eq!(err, Error::Divergence { step: 1 });
        assert_eq!(st.theta, vec![f64::MAX]);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn rho_rule_values() {
        assert!((corollary1_rho(3.0, 0.1, 5.0) - 0.0116).abs() < 1e-4);
        assert!((corollary1_rho(3.0, 0.1, 5.0) - 0.011627938767850517).abs() < 1e-15);
        assert!((corollary1_rho(1.0, 2.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(corollary1_rho(f64::INFINITY, 1.0, 1.0), 0.0);
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::Harmonic.rho(4), 0.25);
        assert_eq!(StepSchedule::InvSqrt { c: 2.0 }.rho(4), 1.0);
        assert_eq!(StepSchedule::Discounted { r: 0.0 }.rho(5), 0.2);
        assert!((StepSchedule::Discounted { r: 0.1 }.rho(1) - 1.0).abs() < 1e-15);
        let r = 0.01;
        let want = r / (1.0 - (1.0f64 - r).powi(50));
        assert!((StepSchedule::Discounted { r }.rho(50) - want).abs() < 1e-15);
        assert!((StepSchedule::Discounted { r }.rho(100_000) - r).abs() < 1e-15);
    }

    #[test]
    fn schedule_sums_match_direct() {
        for n in [0u64, 10, 63, 64, 65, 1000, 123_456] {
            let (s1, s2) = StepSchedule::Harmonic.sums(n);
            let (mut d1, mut d2) = (0.0f64, 0.0f64);
            for t in (1..=n + 1).rev() {
                d1 += 1.0 / t as f64;
                d2 += 1.0 / (t as f64 * t as f64);
            }
            assert!((s1 - d1).abs() < 1e-12 * d1, "n={n}: {s1} vs {d1}");
            assert!((s2 - d2).abs() < 1e-12 * d2, "n={n}: {s2} vs {d2}");
        }
        let (s1, s2) = StepSchedule::Constant { rho: 0.25 }.sums(9);
        assert_eq!((s1, s2), (2.5, 0.625));
        let (s1, _) = StepSchedule::InvSqrt { c: 1.0 }.sums(3);
        let want = 1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5;
        assert!((s1 - want).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SraConfig::new(0.0, StepSchedule::Harmonic).is_err());
        assert!(SraConfig::new(1.0, StepSchedule::Constant { rho: 1.5 }).is_err());
        assert!(SraConfig::from_gamma_beta_m(3.0, -1.0, 5.0).is_err());
        let c = SraConfig::from_gamma_beta_m(3.0, 0.1, 5.0).unwrap();
        let consts = AdmissibilityConstants { c1: 1.0, d1: 1.0, l: 1.0, sigma1_sq: 0.0, m: 5.0 };
        // limit is (1 − 2·tail(3,5))/4 < 0, nothing is admissible
        assert!(c.admissibility_warning(&consts).is_some());
        let consts = AdmissibilityConstants { c1: 0.1, d1: 0.1, l: 1.0, sigma1_sq: 0.0, m: 1.0 };
        assert!(c.admissibility_warning(&consts).is_none());
    }

    proptest! {
        #[test]
        fn truncation_idempotent(h in proptest::collection::vec(-10.0f64..10.0, 1..8), g in 0.01f64..20.0) {
            let (once, _) = truncate(&h, g);
            let (twice, _) = truncate(&once, g);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn kept_branch_scales(h in proptest::collection::vec(-10.0f64..10.0, 1..8), c in 0.1f64..10.0) {
            let g = euclidean_norm(&h) * 1.5 + 1e-9;
            let (base, t0) = truncate(&h, g);
            let scaled: Vec<f64> = h.iter().map(|v| c * v).collect();
            let (out, t1) = truncate(&scaled, c * g);
            prop_assert!(!t0 && !t1);
            for (o, b) in out.iter().zip(&base) {
                prop_assert!((o - c * b).abs() <= 1e-12 * (1.0 + o.abs()));
            }
        }

        #[test]
        fn infinite_gamma_is_plain_sa(theta in proptest::collection::vec(-5.0f64..5.0, 3), h in proptest::collection::vec(-1e3f64..1e3, 3), rho in 0.001f64..1.0) {
            let cfg = SraConfig::untruncated(StepSchedule::Constant { rho });
            let s = sa_step(&SaState::new(theta.clone()), &h, &cfg).unwrap();
            let plain: Vec<f64> = theta.iter().zip(&h).map(|(a, b)| a - rho * b).collect();
            prop_assert_eq!(s.theta, plain);
        }

        #[test]
        fn motion_bounded_by_rho_gamma(theta in proptest::collection::vec(-5.0f64..5.0, 4), h in proptest::collection::vec(-10.0f64..10.0, 4), rho in 0.001f64..1.0, g in 0.1f64..15.0) {
            let cfg = SraConfig::new(g, StepSchedule::Constant { rho }).unwrap();
            let s = sa_step(&SaState::new(theta.clone()), &h, &cfg).unwrap();
            let delta: Vec<f64> = s.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
            prop_assert!(euclidean_norm(&delta) <= rho * g * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn rho_rule_decreasing(beta in 0.01f64..10.0, m in 0.1f64..20.0, g0 in 0.01f64..10.0, dg in 0.001f64..5.0) {
            prop_assume!((g0 + dg) / m < 25.0);
            prop_assert!(corollary1_rho(g0 + dg, beta, m) < corollary1_rho(g0, beta, m));
        }
    }
}
