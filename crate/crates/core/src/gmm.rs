//! Gaussian mixtures in curved-exponential-family form.
//!
//! The parameter object [`GmmParams`] validates itself on construction and
//! caches the Cholesky factor of every covariance, so density evaluation can
//! not fail on a well-formed point. [`SuffStats`] carries the per-component
//! occupancy, first and second moments that online EM averages, and
//! [`m_step`] maps them back to parameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// s0_k below this is a degenerate component.
pub const OCCUPANCY_FLOOR: f64 = 1e-8;
/// The M-step adds `scale · trace(Σ)/d · I` to every covariance.
pub const COVARIANCE_FLOOR_SCALE: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const WEIGHT_SUM_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    factors: Vec<Cholesky<f64, Dyn>>,
    // log ω_k − (d/2) log 2π − ½ log|Σ_k|
    log_norms: Vec<f64>,
}

impl GmmParams {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidParams("mixture needs at least one component".into()));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::InvalidParams(format!(
                "{} weights, {} means, {} covariances",
                k,
                means.len(),
                covariances.len()
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidParams("zero-dimensional component".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParams(format!("weights sum to {total}, not 1")));
        }
        let mut factors = Vec::with_capacity(k);
        let mut log_norms = Vec::with_capacity(k);
        for (idx, (mean, cov)) in means.iter().zip(&covariances).enumerate() {
            if mean.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
            }
            if cov.nrows() != d || cov.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
            }
            if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mixture component"));
            }
            if max_asymmetry(cov) > SYMMETRY_TOL * (1.0 + max_abs(cov)) {
                return Err(Error::InvalidParams(format!("covariance {idx} is not symmetric")));
            }
            let chol = cov
                .clone()
                .cholesky()
                .ok_or(Error::SingularCovariance { k: idx })?;
            let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            if !log_det.is_finite() {
                return Err(Error::SingularCovariance { k: idx });
            }
            log_norms.push(weights[idx].ln() - 0.5 * d as f64 * LN_2PI - 0.5 * log_det);
            factors.push(chol);
        }
        Ok(Self { weights, means, covariances, factors, log_norms })
    }

    /// Univariate mixture from means and variances.
    pub fn univariate(weights: &[f64], means: &[f64], variances: &[f64]) -> Result<Self> {
        Self::new(
            weights.to_vec(),
            means.iter().map(|m| DVector::from_element(1, *m)).collect(),
            variances.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        Ok(())
    }

    /// log(ω_k N(y; μ_k, Σ_k)) for every component.
    pub fn component_log_terms(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(y)?;
        let y = DVector::from_column_slice(y);
        Ok(self
            .means
            .iter()
            .zip(&self.factors)
            .zip(&self.log_norms)
            .map(|((mean, chol), log_norm)| {
                let z = chol
                    .l_dirty()
                    .solve_lower_triangular(&(&y - mean))
                    .expect("cholesky factor has a positive diagonal");
                log_norm - 0.5 * z.norm_squared()
            })
            .collect())
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.component_log_terms(y)?))
    }

    /// Log density and posterior responsibilities from one pass.
    pub fn posterior(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let terms = self.component_log_terms(y)?;
        let lse = log_sum_exp(&terms);
        let mut resp: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
        let total: f64 = resp.iter().sum();
        resp.iter_mut().for_each(|r| *r /= total);
        Ok((lse, resp))
    }

    pub fn responsibilities(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.posterior(y)?.1)
    }

    /// Exact population sufficient statistics of this mixture.
    pub fn moments(&self) -> SuffStats {
        let s1 = self.weights.iter().zip(&self.means).map(|(w, m)| m * *w).collect();
        let s2 = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.covariances)
            .map(|((w, m), c)| (c + m * m.transpose()) * *w)
            .collect();
        SuffStats { s0: self.weights.clone(), s1, s2 }
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Per-component zeroth, first and second moments.
#[derive(Clone, Debug, PartialEq)]
pub struct SuffStats {
    pub s0: Vec<f64>,
    pub s1: Vec<DVector<f64>>,
    pub s2: Vec<DMatrix<f64>>,
}

impl SuffStats {
    /// Validating constructor: s0 nonnegative and summing to one.
    pub fn new(s0: Vec<f64>, s1: Vec<DVector<f64>>, s2: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = s0.len();
        if k == 0 || s1.len() != k || s2.len() != k {
            return Err(Error::InvalidParams("inconsistent component counts".into()));
        }
        let d = s1[0].len();
        if s1.iter().any(|v| v.len() != d) || s2.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::InvalidParams("inconsistent dimensions".into()));
        }
        if s0.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParams("occupancies must be finite and nonnegative".into()));
        }
        let total: f64 = s0.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParams(format!("occupancies sum to {total}, not 1")));
        }
        Ok(Self { s0, s1, s2 })
    }

    pub fn k(&self) -> usize {
        self.s0.len()
    }

    pub fn dim(&self) -> usize {
        self.s1[0].len()
    }

    pub fn flat_len(k: usize, d: usize) -> usize {
        k + k * d + k * d * (d + 1) / 2
    }

    /// `[s0 | s1_1 .. s1_K | upper(s2_1) .. upper(s2_K)]`, upper triangles
    /// row-major including the diagonal.
    pub fn to_flat(&self) -> Vec<f64> {
        let (k, d) = (self.k(), self.dim());
        let mut out = Vec::with_capacity(Self::flat_len(k, d));
        out.extend_from_slice(&self.s0);
        for v in &self.s1 {
            out.extend(v.iter());
        }
        for m in &self.s2 {
            for i in 0..d {
                for j in i..d {
                    out.push(m[(i, j)]);
                }
            }
        }
        out
    }

    pub fn from_flat(k: usize, d: usize, flat: &[f64]) -> Result<Self> {
        let want = Self::flat_len(k, d);
        if flat.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: flat.len() });
        }
        let s0 = flat[..k].to_vec();
        let s1 = (0..k)
            .map(|c| DVector::from_column_slice(&flat[k + c * d..k + (c + 1) * d]))
            .collect();
        let tri = d * (d + 1) / 2;
        let base = k + k * d;
        let s2 = (0..k)
            .map(|c| {
                let mut m = DMatrix::zeros(d, d);
                let mut idx = base + c * tri;
                for i in 0..d {
                    for j in i..d {
                        m[(i, j)] = flat[idx];
                        m[(j, i)] = flat[idx];
                        idx += 1;
                    }
                }
                m
            })
            .collect();
        Ok(Self { s0, s1, s2 })
    }

    /// Components whose occupancy is below the floor or whose conditional
    /// scatter `s2 − s1 s1ᵀ/s0` is not positive semidefinite.
    pub fn degenerate_components(&self) -> Vec<usize> {
        (0..self.k())
            .filter(|&c| {
                let s0 = self.s0[c];
                if s0 <= OCCUPANCY_FLOOR {
                    return true;
                }
                let scatter = &self.s2[c] - &self.s1[c] * self.s1[c].transpose() / s0;
                let scale = max_abs(&self.s2[c]).max(1e-300);
                scatter
                    .symmetric_eigenvalues()
                    .iter()
                    .any(|ev| *ev < -1e-10 * scale)
            })
            .collect()
    }
}

pub fn log_density(params: &GmmParams, y: &[f64]) -> Result<f64> {
    params.log_density(y)
}

pub fn responsibilities(params: &GmmParams, y: &[f64]) -> Result<Vec<f64>> {
    params.responsibilities(y)
}

/// s̄(y; θ): responsibility-weighted (1, y, y yᵀ).
pub fn expected_suffstats(params: &GmmParams, y: &[f64]) -> Result<SuffStats> {
    let resp = params.responsibilities(y)?;
    Ok(suffstats_from_weights(&resp, y))
}

pub(crate) fn suffstats_from_weights(weights: &[f64], y: &[f64]) -> SuffStats {
    let y = DVector::from_column_slice(y);
    let outer = &y * y.transpose();
    SuffStats {
        s0: weights.to_vec(),
        s1: weights.iter().map(|r| &y * *r).collect(),
        s2: weights.iter().map(|r| &outer * *r).collect(),
    }
}

/// Optional penalty R(θ) in the complete-data loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum CovariancePenalty {
    #[default]
    None,
    /// Σ_k [ (dof/2) log|Σ_k| + ½ tr(scale·I · Σ_k⁻¹) ]; keeps the M-step closed form.
    InverseWishart { scale: f64, dof: f64 },
}

impl CovariancePenalty {
    fn value(&self, params: &GmmParams) -> f64 {
        match *self {
            CovariancePenalty::None => 0.0,
            CovariancePenalty::InverseWishart { scale, dof } => params
                .factors
                .iter()
                .map(|chol| {
                    let log_det: f64 =
                        2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                    0.5 * dof * log_det + 0.5 * scale * chol.inverse().trace()
                })
                .sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MStepOptions {
    pub occupancy_floor: f64,
    pub covariance_floor_scale: f64,
    pub penalty: CovariancePenalty,
}

impl Default for MStepOptions {
    fn default() -> Self {
        Self {
            occupancy_floor: OCCUPANCY_FLOOR,
            covariance_floor_scale: COVARIANCE_FLOOR_SCALE,
            penalty: CovariancePenalty::None,
        }
    }
}

/// θ̄(s) with the default floors and no penalty.
pub fn m_step(stats: &SuffStats) -> Result<GmmParams> {
    m_step_with(stats, &MStepOptions::default())
}

pub fn m_step_with(stats: &SuffStats, opts: &MStepOptions) -> Result<GmmParams> {
    let d = stats.dim();
    let total: f64 = stats.s0.iter().sum();
    let mut weights = Vec::with_capacity(stats.k());
    let mut means = Vec::with_capacity(stats.k());
    let mut covs = Vec::with_capacity(stats.k());
    for c in 0..stats.k() {
        let s0 = stats.s0[c];
        if !(s0 >= opts.occupancy_floor) {
            return Err(Error::DegenerateComponent { k: c, occupancy: s0 });
        }
        let mean = &stats.s1[c] / s0;
        let scatter = &stats.s2[c] - &mean * stats.s1[c].transpose();
        let mut cov = match opts.penalty {
            CovariancePenalty::None => scatter / s0,
            CovariancePenalty::InverseWishart { scale, dof } => {
                (scatter + DMatrix::identity(d, d) * scale) / (s0 + dof)
            }
        };
        cov = (&cov + cov.transpose()) * 0.5;
        let mut eps = opts.covariance_floor_scale * cov.trace() / d as f64;
        if !(eps > 0.0) {
            // Zero scatter (e.g. a single point): scale by the second moment.
            let second = stats.s2[c].trace() / (s0 * d as f64);
            eps = opts.covariance_floor_scale * second.max(1.0);
        }
        if eps > 0.0 {
            for i in 0..d {
                cov[(i, i)] += eps;
            }
        }
        weights.push(s0 / total);
        means.push(mean);
        covs.push(cov);
    }
    GmmParams::new(weights, means, covs).map_err(|e| match e {
        Error::InvalidParams(_) | Error::NonFinite(_) => Error::NonFinite("m-step result"),
        other => other,
    })
}

/// Negated complete-data log-likelihood ℓ(s; θ) with R ≡ 0.
pub fn loss(stats: &SuffStats, params: &GmmParams) -> Result<f64> {
    loss_with(stats, params, &CovariancePenalty::None)
}

pub fn loss_with(stats: &SuffStats, params: &GmmParams, penalty: &CovariancePenalty) -> Result<f64> {
    if stats.k() != params.k() {
        return Err(Error::DimensionMismatch { expected: params.k(), got: stats.k() });
    }
    if stats.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: stats.dim() });
    }
    let d = params.dim() as f64;
    let mut total = 0.0;
    for c in 0..params.k() {
        let s0 = stats.s0[c];
        let mu = &params.means[c];
        let chol = &params.factors[c];
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        // s2 − s1 μᵀ − μ s1ᵀ + s0 μ μᵀ
        let cross = &stats.s1[c] * mu.transpose();
        let centered = &stats.s2[c] - &cross - cross.transpose() + mu * mu.transpose() * s0;
        let quad = chol.solve(&centered).trace();
        let weight_term = if s0 == 0.0 { 0.0 } else { -s0 * params.weights[c].ln() };
        total += weight_term + s0 * 0.5 * (d * LN_2PI + log_det) + 0.5 * quad;
    }
    Ok(total + penalty.value(params))
}
