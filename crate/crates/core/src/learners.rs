//! Streaming learners.
//!
//! SRA, sEM, iEM and SDEM are one recursion on the flattened sufficient
//! statistics, `ŝ ← ŝ − ρ·G(ŝ − s̄(y; θ̄(ŝ)))`, differing only in the
//! threshold, the step schedule and (for SDEM) responsibility smoothing.
//! Because they share one code path, SRA with γ = ∞ reproduces sEM and iEM
//! bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{m_step_with, suffstats_from_weights, GmmParams, MStepOptions, SuffStats};
use crate::rng::StreamRng;
use crate::sa::{euclidean_norm, SaState, SraConfig, StepSchedule};

/// Mixing constant of the SDEM responsibility smoothing toward uniform.
pub const SDEM_SMOOTHING: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Sra(SraConfig),
    /// Stepwise EM with constant step r.
    Sem { r: f64 },
    /// Incremental EM: running average, ρ_t = 1/t.
    Iem,
    /// Sequentially discounting EM with forgetting factor r.
    Sdem { r: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sra(_) => "sra",
            Algorithm::Sem { .. } => "sem",
            Algorithm::Iem => "iem",
            Algorithm::Sdem { .. } => "sdem",
        }
    }

    /// The SA configuration this algorithm runs.
    pub fn sa_config(&self) -> SraConfig {
        match self {
            Algorithm::Sra(cfg) => cfg.clone(),
            Algorithm::Sem { r } => SraConfig::untruncated(StepSchedule::Constant { rho: *r }),
            Algorithm::Iem => SraConfig::untruncated(StepSchedule::Harmonic),
            Algorithm::Sdem { r } => SraConfig::untruncated(StepSchedule::Discounted { r: *r }),
        }
    }

    fn smoothing(&self) -> f64 {
        match self {
            Algorithm::Sdem { .. } => SDEM_SMOOTHING,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sa_config().validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    /// −log f(y; θ̂) under the model before this step.
    pub score: f64,
    pub truncated: bool,
    /// ‖ŝ_{t+1} − ŝ_t‖₂ (or ‖θ_{t+1} − θ_t‖₂ for SGD).
    pub theta_delta_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamsSummary {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major covariance matrices.
    pub covariances: Vec<Vec<f64>>,
}

impl From<&GmmParams> for ParamsSummary {
    fn from(p: &GmmParams) -> Self {
        Self {
            weights: p.weights().to_vec(),
            means: p.means().iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: p
                .covariances()
                .iter()
                .map(|c| c.transpose().iter().copied().collect())
                .collect(),
        }
    }
}

/// EM-family learner state. `model` always equals `m_step(stats)`.
#[derive(Clone, Debug)]
pub struct EmLearner {
    algorithm: Algorithm,
    config: SraConfig,
    smoothing: f64,
    k: usize,
    d: usize,
    model: GmmParams,
    sa: SaState,
    mstep: MStepOptions,
}

impl EmLearner {
    /// Starts from `stats` as if `steps_seen` observations had already been
    /// absorbed; the step schedule continues from there.
    pub fn new(algorithm: Algorithm, stats: &SuffStats, steps_seen: u64) -> Result<Self> {
        Self::with_options(algorithm, stats, steps_seen, MStepOptions::default())
    }

    pub fn with_options(
        algorithm: Algorithm,
        stats: &SuffStats,
        steps_seen: u64,
        mstep: MStepOptions,
    ) -> Result<Self> {
        algorithm.validate()?;
        let model = m_step_with(stats, &mstep)?;
        let mut sa = SaState::new(stats.to_flat());
        sa.t = steps_seen;
        Ok(Self {
            config: algorithm.sa_config(),
            smoothing: algorithm.smoothing(),
            algorithm,
            k: stats.k(),
            d: stats.dim(),
            model,
            sa,
            mstep,
        })
    }

    pub fn from_params(algorithm: Algorithm, params: &GmmParams, steps_seen: u64) -> Result<Self> {
        Self::new(algorithm, &params.moments(), steps_seen)
    }

    pub fn algorithm(&self) -> &Algorithm {
        &self.algorithm
    }

    pub fn config(&self) -> &SraConfig {
        &self.config
    }

    pub fn model(&self) -> &GmmParams {
        &self.model
    }

    pub fn stats(&self) -> SuffStats {
        SuffStats::from_flat(self.k, self.d, &self.sa.theta).expect("layout fixed at construction")
    }

    pub fn flat_stats(&self) -> &[f64] {
        &self.sa.theta
    }

    pub fn sa_state(&self) -> &SaState {
        &self.sa
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Score `y` under the current model, then update. On error the learner
    /// is unchanged.
    pub fn step(&mut self, y: &[f64]) -> Result<StepReport> {
        let (log_f, mut resp) = self.model.posterior(y)?;
        if self.smoothing > 0.0 {
            let uniform = self.smoothing / self.k as f64;
            resp.iter_mut().for_each(|p| *p = (1.0 - self.smoothing) * *p + uniform);
        }
        let target = suffstats_from_weights(&resp, y).to_flat();
        let update: Vec<f64> = self.sa.theta.iter().zip(&target).map(|(s, t)| s - t).collect();

        let mut next = self.sa.clone();
        let outcome = next.advance(&update, &self.config)?;
        let mut delta = 0.0;
        if !outcome.truncated {
            let stats = SuffStats::from_flat(self.k, self.d, &next.theta)?;
            self.model = m_step_with(&stats, &self.mstep)?;
            delta = next
                .theta
                .iter()
                .zip(&self.sa.theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
        self.sa = next;
        Ok(StepReport { score: -log_f, truncated: outcome.truncated, theta_delta_norm: delta })
    }

    /// H at the current state for observation `y`, without updating.
    pub fn drift(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut resp = self.model.responsibilities(y)?;
        if self.smoothing > 0.0 {
            let uniform = self.smoothing / self.k as f64;
            resp.iter_mut().for_each(|p| *p = (1.0 - self.smoothing) * *p + uniform);
        }
        let target = suffstats_from_weights(&resp, y).to_flat();
        Ok(self.sa.theta.iter().zip(&target).map(|(s, t)| s - t).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Moment matching on the window itself.
    MomentMatch,
    /// Moment matching on `n_points` uniform draws over the window's
    /// per-coordinate range.
    Uniform { n_points: usize, seed: u64 },
}

fn check_window(window: &[Vec<f64>]) -> Result<usize> {
    let first = window.first().ok_or(Error::EmptyWindow)?;
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidParams("zero-dimensional observations".into()));
    }
    for y in window {
        if y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initialization window"));
        }
    }
    Ok(d)
}

/// `n` points drawn uniformly over the per-coordinate [min, max] of `window`.
pub fn uniform_init_points(window: &[Vec<f64>], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = check_window(window)?;
    let lo: Vec<f64> = (0..d).map(|j| window.iter().map(|y| y[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> =
        (0..d).map(|j| window.iter().map(|y| y[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut rng = StreamRng::new(seed, 0);
    Ok((0..n)
        .map(|_| (0..d).map(|j| rng.uniform_range(lo[j], hi[j])).collect())
        .collect())
}

fn sample_moments(points: &[&Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = points.len() as f64;
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += DVector::from_column_slice(p);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = DVector::from_column_slice(p) - &mean;
        cov += &c * c.transpose();
    }
    (mean, cov / n)
}

fn is_usable_covariance(c: &DMatrix<f64>) -> bool {
    c.iter().all(|v| v.is_finite()) && c.trace() > 0.0 && c.clone().cholesky().is_some()
}

/// Mixture fitted by moment matching: points are sorted by their first
/// coordinate and split into K contiguous chunks of near-equal size. A chunk
/// whose covariance is singular takes the window covariance divided by K².
pub fn moment_match(points: &[Vec<f64>], k: usize) -> Result<GmmParams> {
    let d = check_window(points)?;
    if k == 0 {
        return Err(Error::InvalidParams("K must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::WindowTooShort { len: points.len(), k });
    }
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let (_, window_cov) = sample_moments(&sorted, d);
    let mut fallback = &window_cov / (k * k) as f64;
    if !is_usable_covariance(&fallback) {
        let scale = sorted.iter().flat_map(|p| p.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        let var = (window_cov.trace() / d as f64).max(1e-6 * (1.0 + scale * scale));
        fallback = DMatrix::identity(d, d) * (var / (k * k) as f64);
    }
    let n = sorted.len();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let chunk = &sorted[c * n / k..(c + 1) * n / k];
        let (mean, cov) = sample_moments(chunk, d);
        weights.push(chunk.len() as f64 / n as f64);
        means.push(mean);
        covs.push(if chunk.len() > 1 && is_usable_covariance(&cov) { cov } else { fallback.clone() });
    }
    GmmParams::new(weights, means, covs)
}

/// Points of `window` within `TRIM_MADS` scaled median absolute deviations
/// of the per-coordinate median. Coordinates with zero spread are not used
/// for trimming.
pub fn trim_outliers(window: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = check_window(window)?;
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
    };
    let mut center = Vec::with_capacity(d);
    let mut spread = Vec::with_capacity(d);
    for j in 0..d {
        let med = median(window.iter().map(|y| y[j]).collect());
        let mad = median(window.iter().map(|y| (y[j] - med).abs()).collect());
        center.push(med);
        spread.push(MAD_TO_SD * mad);
    }
    Ok(window
        .iter()
        .filter(|y| {
            (0..d).all(|j| spread[j] == 0.0 || (y[j] - center[j]).abs() <= TRIM_MADS * spread[j])
        })
        .cloned()
        .collect())
}

const MAD_TO_SD: f64 = 1.482_602_218_505_602;
const TRIM_MADS: f64 = 5.0;

/// Initial mixture and the number of points it was fitted on. Moment
/// matching first drops gross outliers (see [`trim_outliers`]) unless that
/// would leave fewer than K points.
pub fn init_params(window: &[Vec<f64>], k: usize, mode: InitMode) -> Result<(GmmParams, u64)> {
    match mode {
        InitMode::MomentMatch => {
            let kept = trim_outliers(window)?;
            let points = if kept.len() >= k { &kept[..] } else { window };
            Ok((moment_match(points, k)?, window.len() as u64))
        }
        InitMode::Uniform { n_points, seed } => {
            let points = uniform_init_points(window, n_points, seed)?;
            Ok((moment_match(&points, k)?, n_points as u64))
        }
    }
}

/// Learner initialized from `window`; the step counter starts at the
/// number of points the initial fit used.
pub fn init_from_window(
    algorithm: Algorithm,
    window: &[Vec<f64>],
    k: usize,
    mode: InitMode,
) -> Result<EmLearner> {
    let (params, seen) = init_params(window, k, mode)?;
    EmLearner::from_params(algorithm, &params, seen)
}

/// Per-sample loss with a gradient in θ.
pub trait DifferentiableLoss {
    fn value(&self, theta: &[f64], y: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64], y: &[f64]) -> Vec<f64>;
}

/// ℓ(θ; y) = ½‖θ − y‖².
#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredLoss;

impl DifferentiableLoss for SquaredLoss {
    fn value(&self, theta: &[f64], y: &[f64]) -> f64 {
        0.5 * theta.iter().zip(y).map(|(t, v)| (t - v) * (t - v)).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64], y: &[f64]) -> Vec<f64> {
        theta.iter().zip(y).map(|(t, v)| t - v).collect()
    }
}

/// Truncated SGD on ℓ(θ) + (λ/2)‖θ‖²: H = λθ + ∇ℓ(θ).
#[derive(Clone, Debug)]
pub struct SgdL2 {
    pub lambda: f64,
    config: SraConfig,
    sa: SaState,
}

impl SgdL2 {
    pub fn new(theta0: Vec<f64>, lambda: f64, config: SraConfig) -> Result<Self> {
        config.validate()?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
        }
        if theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial parameters"));
        }
        Ok(Self { lambda, config, sa: SaState::new(theta0) })
    }

    pub fn theta(&self) -> &[f64] {
        &self.sa.theta
    }

    pub fn sa_state(&self) -> &SaState {
        &self.sa
    }

    /// The score is the unregularized loss before the update.
    pub fn step(&mut self, loss: &dyn DifferentiableLoss, y: &[f64]) -> Result<StepReport> {
        let score = loss.value(&self.sa.theta, y);
        let grad = loss.gradient(&self.sa.theta, y);
        if grad.len() != self.sa.theta.len() {
            return Err(Error::DimensionMismatch { expected: self.sa.theta.len(), got: grad.len() });
        }
        let update: Vec<f64> =
            self.sa.theta.iter().zip(&grad).map(|(t, g)| self.lambda * t + g).collect();
        let outcome = self.sa.advance(&update, &self.config)?;
        let delta = if outcome.truncated { 0.0 } else { outcome.rho * euclidean_norm(&update) };
        Ok(StepReport { score, truncated: outcome.truncated, theta_delta_norm: delta })
    }
}
