//! Seeded contaminated, piecewise-stationary streams.
//!
//! At each t an i.i.d. coin with P(inlier) = α picks between the active
//! segment's mixture and uniform noise on [−U, U]^d. Randomness is split
//! into independent substreams of one seed: 0 for the coin, 1 for the
//! component choice, 2 for the Gaussian draws, 3 for the uniform noise.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gmm::GmmParams;
use crate::rng::StreamRng;

const COIN_STREAM: u64 = 0;
const COMPONENT_STREAM: u64 = 1;
const GAUSS_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Clone, Debug)]
pub struct Segment {
    /// First time index (1-based) of the segment.
    pub start: usize,
    pub params: GmmParams,
}

#[derive(Clone, Debug)]
pub struct StreamSpec {
    pub t_len: usize,
    pub d: usize,
    pub alpha: f64,
    pub u: f64,
    pub segments: Vec<Segment>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub t: usize,
    pub y: Vec<f64>,
    pub is_outlier: bool,
    pub segment_id: usize,
    pub true_means: Vec<Vec<f64>>,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.u > 0.0 && self.u.is_finite()) {
            return bad("U must be positive and finite");
        }
        if self.d == 0 {
            return bad("d must be positive");
        }
        let Some(first) = self.segments.first() else {
            return bad("at least one segment is required");
        };
        if first.start != 1 {
            return bad("the first segment must start at t = 1");
        }
        if self.segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return bad("segment starts must be strictly increasing");
        }
        if self.segments.iter().any(|s| s.params.dim() != self.d) {
            return bad("segment dimension does not match d");
        }
        if let Some(last) = self.segments.last() {
            if last.start > self.t_len.max(1) {
                return bad("segment starts beyond the stream");
            }
        }
        Ok(())
    }

    /// Start times of every segment after the first.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    pub fn k_max(&self) -> usize {
        self.segments.iter().map(|s| s.params.k()).max().unwrap_or(0)
    }
}

/// Draw the stream described by `spec`.
pub fn generate(spec: &StreamSpec) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    let mut coin = StreamRng::new(spec.seed, COIN_STREAM);
    let mut comp = StreamRng::new(spec.seed, COMPONENT_STREAM);
    let mut gauss = StreamRng::new(spec.seed, GAUSS_STREAM);
    let mut noise = StreamRng::new(spec.seed, NOISE_STREAM);

    let factors: Vec<Vec<nalgebra::DMatrix<f64>>> = spec
        .segments
        .iter()
        .map(|s| {
            s.params
                .covariances()
                .iter()
                .map(|c| c.clone().cholesky().expect("validated covariance").l())
                .collect()
        })
        .collect();
    let true_means: Vec<Vec<Vec<f64>>> = spec
        .segments
        .iter()
        .map(|s| s.params.means().iter().map(|m| m.iter().copied().collect()).collect())
        .collect();

    let mut out = Vec::with_capacity(spec.t_len);
    let mut seg = 0;
    for t in 1..=spec.t_len {
        while seg + 1 < spec.segments.len() && spec.segments[seg + 1].start <= t {
            seg += 1;
        }
        let params = &spec.segments[seg].params;
        let is_outlier = coin.uniform() >= spec.alpha;
        let y = if is_outlier {
            (0..spec.d).map(|_| noise.uniform_range(-spec.u, spec.u)).collect()
        } else {
            let k = comp.categorical(params.weights());
            let z = DVector::from_iterator(spec.d, (0..spec.d).map(|_| gauss.standard_normal()));
            let y = &params.means()[k] + &factors[seg][k] * z;
            y.iter().copied().collect()
        };
        out.push(LabeledSample {
            t,
            y,
            is_outlier,
            segment_id: seg,
            true_means: true_means[seg].clone(),
        });
    }
    Ok(out)
}

pub const SYNTHETIC_LEN: usize = 20_000;
pub const SYNTHETIC_CHANGE: usize = 10_001;

/// The two-component univariate benchmark: means ±0.5 switching to ±1.0 at
/// t = 10001, standard deviation 0.1, equal weights, T = 20000.
pub fn paper_synthetic_spec(alpha: f64, u: f64, seed: u64) -> StreamSpec {
    let seg = |m: f64| {
        GmmParams::univariate(&[0.5, 0.5], &[m, -m], &[0.01, 0.01]).expect("fixed valid mixture")
    };
    StreamSpec {
        t_len: SYNTHETIC_LEN,
        d: 1,
        alpha,
        u,
        segments: vec![
            Segment { start: 1, params: seg(0.5) },
            Segment { start: SYNTHETIC_CHANGE, params: seg(1.0) },
        ],
        seed,
    }
}

/// CSV header for a stream of dimension `d` whose segments have `k` components.
/// Length, segment length and inlier probability of the change-detection
/// benchmark.
pub const DETECTION_LEN: usize = 8000;
pub const DETECTION_SEGMENT: usize = 1000;
pub const DETECTION_ALPHA: f64 = 0.95;

/// Single Gaussian (σ = 0.1) whose mean jumps every 1000 steps, contaminated
/// by uniform noise on [−20, 20].
pub fn detection_benchmark_spec(seed: u64) -> StreamSpec {
    const MEANS: [f64; 8] = [0.0, 0.3, -0.15, 0.24, -0.3, 0.09, 0.36, -0.06];
    let segments = MEANS
        .iter()
        .enumerate()
        .map(|(i, &m)| Segment {
            start: 1 + i * DETECTION_SEGMENT,
            params: GmmParams::univariate(&[1.0], &[m], &[0.01]).expect("fixed valid model"),
        })
        .collect();
    StreamSpec { t_len: DETECTION_LEN, d: 1, alpha: DETECTION_ALPHA, u: 20.0, segments, seed }
}

pub fn csv_header(d: usize, k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=d).map(|j| format!("y{j}")));
    h.push("is_outlier".into());
    h.push("segment_id".into());
    for c in 1..=k {
        if d == 1 {
            h.push(format!("true_mu_{c}"));
        } else {
            h.extend((1..=d).map(|j| format!("true_mu_{c}_{j}")));
        }
    }
    h
}

/// Write samples as CSV. Floats use the shortest representation that
/// round-trips; components missing from a segment are left empty.
pub fn write_csv<W: Write>(samples: &[LabeledSample], d: usize, k: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(format!("csv write failed: {e}"));
    w.write_record(csv_header(d, k)).map_err(io)?;
    for s in samples {
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.y.iter().map(|v| format!("{v}")));
        rec.push(if s.is_outlier { "1" } else { "0" }.into());
        rec.push(s.segment_id.to_string());
        for c in 0..k {
            match s.true_means.get(c) {
                Some(m) => rec.extend(m.iter().map(|v| format!("{v}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), d)),
            }
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("csv write failed: {e}")))?;
    Ok(())
}
