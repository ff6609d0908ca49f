//! Running learners over whole streams and the synthetic MSE benchmark.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::GmmParams;
use crate::learners::{init_from_window, Algorithm, InitMode, StepReport};
use crate::metrics::{alarm_eval, segment_mse, AlarmEval, MseWindows, SegmentMse};
use crate::streamgen::{
    detection_benchmark_spec, generate, paper_synthetic_spec, DETECTION_LEN, SYNTHETIC_CHANGE,
};

/// Transient period and evaluation window of the synthetic benchmark.
pub const SYNTHETIC_TAU: usize = 1000;
pub const SYNTHETIC_EVAL: (usize, usize) = (500, 999);
/// Points used to initialize learners on the synthetic benchmark.
pub const SYNTHETIC_INIT_POINTS: usize = 10;
/// Detection tolerance on the change-detection benchmark.
pub const DETECTION_TAU: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub k: usize,
    pub init: InitMode,
    /// Inclusive 1-based range of the stream used for initialization.
    pub init_range: (usize, usize),
    pub record_means: bool,
}

impl RunOptions {
    pub fn moment_match(k: usize, init_points: usize) -> Self {
        Self { k, init: InitMode::MomentMatch, init_range: (1, init_points), record_means: false }
    }
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub reports: Vec<StepReport>,
    /// Component means after each step, if requested.
    pub means: Vec<Vec<Vec<f64>>>,
    pub final_model: GmmParams,
}

impl RunTrace {
    pub fn scores(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.score).collect()
    }
}

/// Initialize from `opts.init_range` and then consume every point of `y`
/// in order. The score at t comes from the model fitted through t − 1.
pub fn run_learner(algorithm: &Algorithm, y: &[Vec<f64>], opts: &RunOptions) -> Result<RunTrace> {
    let (a, b) = opts.init_range;
    if !(a >= 1 && a <= b && b <= y.len()) {
        return Err(Error::InvalidConfig(format!(
            "initialization range [{a}, {b}] outside a stream of length {}",
            y.len()
        )));
    }
    let mut learner = init_from_window(algorithm.clone(), &y[a - 1..b], opts.k, opts.init)?;
    let mut reports = Vec::with_capacity(y.len());
    let mut means = Vec::with_capacity(if opts.record_means { y.len() } else { 0 });
    for point in y {
        reports.push(learner.step(point)?);
        if opts.record_means {
            means.push(learner.model().means().iter().map(|m| m.iter().copied().collect()).collect());
        }
    }
    Ok(RunTrace { reports, means, final_model: learner.model().clone() })
}

/// Segment MSEs of one algorithm on one synthetic stream.
pub fn synthetic_mse(algorithm: &Algorithm, alpha: f64, u: f64, seed: u64) -> Result<SegmentMse> {
    let samples = generate(&paper_synthetic_spec(alpha, u, seed))?;
    let y: Vec<Vec<f64>> = samples.iter().map(|s| s.y.clone()).collect();
    let truth: Vec<Vec<Vec<f64>>> = samples.iter().map(|s| s.true_means.clone()).collect();
    let opts = RunOptions { record_means: true, ..RunOptions::moment_match(2, SYNTHETIC_INIT_POINTS) };
    let trace = run_learner(algorithm, &y, &opts)?;
    segment_mse(
        &trace.means,
        &truth,
        MseWindows { tau: SYNTHETIC_TAU, t_star: SYNTHETIC_CHANGE, eval: SYNTHETIC_EVAL },
    )
}

/// Mean segment MSEs over seeds, computed in parallel.
pub fn mean_synthetic_mse(algorithm: &Algorithm, alpha: f64, u: f64, seeds: &[u64]) -> Result<SegmentMse> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let runs: Vec<SegmentMse> = seeds
        .par_iter()
        .map(|&s| synthetic_mse(algorithm, alpha, u, s))
        .collect::<Result<_>>()?;
    Ok(mean_of(&runs))
}

/// Alarm evaluation of one algorithm's scores on one change-detection
/// benchmark stream (K = 1, scored after the initialization window).
pub fn detection_eval(algorithm: &Algorithm, seed: u64) -> Result<AlarmEval> {
    let spec = detection_benchmark_spec(seed);
    let y: Vec<Vec<f64>> = generate(&spec)?.into_iter().map(|s| s.y).collect();
    let trace = run_learner(algorithm, &y, &RunOptions::moment_match(1, SYNTHETIC_INIT_POINTS))?;
    alarm_eval(
        &trace.scores(),
        &spec.change_points(),
        DETECTION_TAU,
        SYNTHETIC_INIT_POINTS + 1,
        DETECTION_LEN,
    )
}

pub fn mean_of(runs: &[SegmentMse]) -> SegmentMse {
    let n = runs.len() as f64;
    let avg = |f: fn(&SegmentMse) -> f64| runs.iter().map(f).sum::<f64>() / n;
    SegmentMse {
        s_eval: avg(|m| m.s_eval),
        s_bc: avg(|m| m.s_bc),
        s_ac: avg(|m| m.s_ac),
        s_tot: avg(|m| m.s_tot),
    }
}
