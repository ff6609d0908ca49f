//! Input loading and output sinks shared by the subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{FileConfig, SegmentSpec};
use super::{CliError, CliResult, InputArgs, StreamArgs};
use crate::datasets::{read_labeled_csv, read_series, read_stream_csv, split_preset, SplitPreset};
use crate::gmm::GmmParams;
use crate::learners::ParamsSummary;
use crate::streamgen::{generate, paper_synthetic_spec, Segment, StreamSpec};

/// A stream ready for a learner, with whatever ground truth came with it.
#[derive(Clone, Debug, Default)]
pub struct Loaded {
    pub y: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
    pub change_points: Vec<usize>,
    pub true_means: Option<Vec<Vec<Vec<f64>>>>,
    /// Components per segment of a generated stream.
    pub k_hint: Option<usize>,
    /// Description echoed into output headers.
    pub source: Value,
}

pub fn seed(stream: &StreamArgs, file: &FileConfig) -> u64 {
    stream.seed.or(file.seed).unwrap_or(0)
}

pub fn preset(input: &InputArgs) -> CliResult<Option<SplitPreset>> {
    match &input.preset {
        None => Ok(None),
        Some(name) => split_preset(name)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("unknown preset {name:?}"))),
    }
}

/// The generator spec selected by the flags and the config file, if any.
pub fn stream_spec(
    stream: &StreamArgs,
    file: &FileConfig,
    seed: u64,
    t_len: Option<usize>,
) -> CliResult<Option<StreamSpec>> {
    let sec = &file.stream;
    let alpha = stream.alpha.or(sec.alpha);
    let u = stream.u.or(sec.u);
    let mut spec = if stream.paper_synthetic {
        paper_synthetic_spec(alpha.unwrap_or(0.99), u.unwrap_or(20.0), seed)
    } else if !sec.segments.is_empty() {
        let segments = sec
            .segments
            .iter()
            .map(|s| {
                Ok(Segment { start: s.start, params: segment_params(s)? })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let t_len = t_len.or(sec.t_len).ok_or_else(|| {
            CliError::Usage("a configured stream needs t_len".into())
        })?;
        let d = segments[0].params.dim();
        StreamSpec {
            t_len,
            d,
            alpha: alpha.unwrap_or(1.0),
            u: u.unwrap_or(0.0),
            segments,
            seed,
        }
    } else {
        return Ok(None);
    };
    if let Some(n) = t_len.or(if stream.paper_synthetic { sec.t_len } else { None }) {
        spec.t_len = n;
        if stream.paper_synthetic {
            // Keep the change at mid-stream (10001 of 20000).
            spec.segments[1].start = n / 2 + 1;
        }
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Some(spec))
}

fn segment_params(s: &SegmentSpec) -> CliResult<GmmParams> {
    let usage = |e: crate::Error| CliError::Usage(format!("segment at {}: {e}", s.start));
    let d = s.means.first().map(Vec::len).unwrap_or(0);
    let means = s.means.iter().map(|m| nalgebra::DVector::from_vec(m.clone())).collect();
    let covs = s
        .covariances
        .iter()
        .map(|c| {
            if c.len() != d * d {
                return Err(CliError::Usage(format!(
                    "segment at {}: covariance needs {} entries",
                    s.start,
                    d * d
                )));
            }
            Ok(nalgebra::DMatrix::from_row_slice(d, d, c))
        })
        .collect::<CliResult<Vec<_>>>()?;
    GmmParams::new(s.weights.clone(), means, covs).map_err(usage)
}

pub fn segment_spec(start: usize, p: &GmmParams) -> SegmentSpec {
    let s = ParamsSummary::from(p);
    SegmentSpec { start, weights: s.weights, means: s.means, covariances: s.covariances }
}

pub fn spec_json(spec: &StreamSpec) -> Value {
    let segments: Vec<SegmentSpec> =
        spec.segments.iter().map(|s| segment_spec(s.start, &s.params)).collect();
    json!({
        "kind": "generated",
        "t_len": spec.t_len,
        "d": spec.d,
        "alpha": spec.alpha,
        "u": spec.u,
        "seed": spec.seed,
        "segments": segments,
    })
}

pub fn from_spec(spec: &StreamSpec) -> CliResult<Loaded> {
    let samples = generate(spec)?;
    Ok(Loaded {
        y: samples.iter().map(|s| s.y.clone()).collect(),
        labels: Some(samples.iter().map(|s| s.is_outlier).collect()),
        change_points: spec.change_points(),
        true_means: Some(samples.into_iter().map(|s| s.true_means).collect()),
        k_hint: Some(spec.k_max()),
        source: spec_json(spec),
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn data_err(path: &Path) -> impl Fn(crate::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Reads a file as a labeled CSV (with `label_column`), a generated-stream
/// CSV (header starting with `y1`) or a one-value-per-line series.
pub fn read_file(path: &Path, label_column: Option<&str>) -> CliResult<Loaded> {
    let source = json!({ "kind": "file", "path": path.display().to_string() });
    if let Some(col) = label_column {
        let data = read_labeled_csv(open(path)?, col).map_err(data_err(path))?;
        return Ok(Loaded { y: data.y, labels: Some(data.labels), source, ..Default::default() });
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    let is_stream_csv = first.is_some_and(|l| l.split(',').any(|h| h.trim() == "y1"));
    if is_stream_csv {
        let s = read_stream_csv(text.as_bytes()).map_err(data_err(path))?;
        let change_points = s.change_points();
        let labels = (s.is_outlier.len() == s.y.len()).then_some(s.is_outlier);
        let true_means = (!s.true_means.is_empty()).then_some(s.true_means);
        let k_hint = true_means.as_ref().and_then(|m| m.iter().map(Vec::len).max());
        Ok(Loaded { y: s.y, labels, change_points, true_means, k_hint, source })
    } else {
        let v = read_series(text.as_bytes()).map_err(data_err(path))?;
        Ok(Loaded { y: v.into_iter().map(|x| vec![x]).collect(), source, ..Default::default() })
    }
}

/// The stream a `run` or `tune` works on: `--input`, else a generated one.
pub fn load_stream(
    stream: &StreamArgs,
    input: &InputArgs,
    file: &FileConfig,
    seed: u64,
) -> CliResult<Loaded> {
    if let Some(path) = &input.input {
        if stream.paper_synthetic {
            return Err(CliError::Usage("--input and --paper-synthetic are exclusive".into()));
        }
        return read_file(path, input.label_column.as_deref());
    }
    match stream_spec(stream, file, seed, None)? {
        Some(spec) => from_spec(&spec),
        None => Err(CliError::Usage(
            "no input: pass --input, --paper-synthetic or a [stream] config section".into(),
        )),
    }
}

/// Buffered writer to `path`, or stdout.
pub fn sink(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> CliResult<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
