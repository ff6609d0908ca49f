use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{AlgorithmSpec, FileConfig, InitSpec};
use super::io::{load_stream, preset, seed, sink, Loaded};
use super::{AlgorithmArgs, CliError, CliResult, InitArgs, RunArgs};
use crate::learners::{init_from_window, Algorithm, InitMode, ParamsSummary};
use crate::sa::StepSchedule;

#[derive(Serialize)]
struct Record<'a> {
    t: usize,
    score: f64,
    params_summary: &'a ParamsSummary,
    truncated: bool,
}

pub fn resolve_algorithm(file: &FileConfig, args: &AlgorithmArgs) -> CliResult<Algorithm> {
    let mut spec: AlgorithmSpec = file.algorithm.clone();
    spec.merge(&args.spec());
    spec.resolve()
}

/// Init mode and window, with preset defaults applied under explicit settings.
pub fn resolve_init(
    file: &FileConfig,
    args: &InitArgs,
    preset: Option<crate::datasets::SplitPreset>,
    len: usize,
    seed: u64,
) -> CliResult<(InitMode, (usize, usize))> {
    let mut spec = InitSpec::default();
    if let Some(p) = preset {
        spec.mode = Some(super::config::InitName::Uniform);
        spec.range = Some(p.init_range);
    }
    spec.merge(&file.init);
    spec.merge(&args.spec());
    let (mode, range) = spec.resolve(len, seed);
    if range.1 > len {
        return Err(CliError::Usage(format!(
            "initialization window [{}, {}] exceeds the stream length {len}",
            range.0, range.1
        )));
    }
    Ok((mode, range))
}

pub fn resolve_k(file: &FileConfig, args: &InitArgs, loaded: &Loaded) -> usize {
    args.k.or(file.k).or(loaded.k_hint).unwrap_or(1)
}

/// The effective step size, when it is constant.
pub fn constant_rho(alg: &Algorithm) -> Option<f64> {
    match alg.sa_config().schedule {
        StepSchedule::Constant { rho } => Some(rho),
        _ => None,
    }
}

pub fn cmd_run(file: &FileConfig, a: &RunArgs) -> CliResult<()> {
    let seed = seed(&a.stream, file);
    let algorithm = resolve_algorithm(file, &a.algorithm)?;
    let loaded = load_stream(&a.stream, &a.input, file, seed)?;
    let mut out = sink(a.out.as_ref())?;
    if loaded.y.is_empty() {
        out.flush()?;
        return Ok(());
    }
    let preset = preset(&a.input)?;
    let k = resolve_k(file, &a.init, &loaded);
    let (init, range) = resolve_init(file, &a.init, preset, loaded.y.len(), seed)?;

    let header = json!({
        "config": {
            "command": "run",
            "algorithm": algorithm,
            "rho": constant_rho(&algorithm),
            "k": k,
            "init": init,
            "init_range": range,
            "seed": seed,
            "input": loaded.source,
        }
    });
    writeln!(out, "{header}")?;

    let mut learner = init_from_window(algorithm, &loaded.y[range.0 - 1..range.1], k, init)?;
    for (i, y) in loaded.y.iter().enumerate() {
        let t = i + 1;
        match learner.step(y) {
            Ok(report) => {
                let summary = ParamsSummary::from(learner.model());
                let rec = Record {
                    t,
                    score: report.score,
                    params_summary: &summary,
                    truncated: report.truncated,
                };
                serde_json::to_writer(&mut out, &rec).map_err(|e| CliError::Data(e.to_string()))?;
                writeln!(out)?;
            }
            Err(e) => {
                let rec: Value = json!({ "t": t, "error": e.to_string() });
                writeln!(out, "{rec}")?;
                out.flush()?;
                return Err(e.into());
            }
        }
    }
    out.flush()?;
    Ok(())
}
