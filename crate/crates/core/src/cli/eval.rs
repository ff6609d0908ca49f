use std::io::{BufRead, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::config::FileConfig;
use super::io::{read_file, sink, write_json, Loaded};
use super::{CliError, CliResult, DetectArgs, EvalArgs};
use crate::datasets::well_log_annotation;
use crate::experiment::{SYNTHETIC_EVAL, SYNTHETIC_TAU};
use crate::metrics::{alarm_eval, roc_auc, segment_mse, MseWindows};

#[derive(Deserialize)]
struct Summary {
    means: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct Record {
    t: usize,
    score: f64,
    params_summary: Summary,
}

/// Scores and per-step means read back from a `run` JSONL file.
pub struct RunOutput {
    pub config: Option<Value>,
    pub scores: Vec<f64>,
    pub means: Vec<Vec<Vec<f64>>>,
}

pub fn read_run(path: &Path) -> CliResult<RunOutput> {
    let f = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = RunOutput { config: None, scores: Vec::new(), means: Vec::new() };
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Data(format!("{} line {}: {m}", path.display(), i + 1));
        let v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if let Some(c) = v.get("config") {
            out.config = Some(c.clone());
            continue;
        }
        if let Some(e) = v.get("error") {
            return Err(bad(format!("run aborted: {e}")));
        }
        let rec: Record = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
        if rec.t != out.scores.len() + 1 {
            return Err(bad(format!("expected t = {}, found {}", out.scores.len() + 1, rec.t)));
        }
        out.scores.push(rec.score);
        out.means.push(rec.params_summary.means);
    }
    Ok(out)
}

/// Change points from flags, then the config file, then the ground truth.
pub fn change_points(d: &DetectArgs, file: &FileConfig, truth: Option<&Loaded>) -> CliResult<Vec<usize>> {
    let annotation = d.annotation.or(file.eval.annotation);
    if let Some(cp) = d.change_points.clone() {
        return Ok(cp);
    }
    if let Some(set) = annotation {
        return well_log_annotation(set)
            .map(<[usize]>::to_vec)
            .ok_or_else(|| CliError::Usage(format!("annotation set must be 1 to 5, got {set}")));
    }
    if let Some(cp) = file.eval.change_points.clone() {
        return Ok(cp);
    }
    Ok(truth.map(|t| t.change_points.clone()).unwrap_or_default())
}

pub fn cmd_eval(file: &FileConfig, a: &EvalArgs) -> CliResult<()> {
    let run = read_run(&a.scores)?;
    let n = run.scores.len();
    let label_column = a.label_column.as_deref();
    let truth = a.truth.as_deref().map(|p| read_file(p, label_column)).transpose()?;
    if let Some(t) = &truth {
        if t.y.len() != n {
            return Err(CliError::Data(format!("{n} scores but {} truth rows", t.y.len())));
        }
    }
    let cps = change_points(&a.detect, file, truth.as_ref())?;
    let (start, end) = a.detect.range.or(file.eval.range).unwrap_or((1, n.max(1)));

    let tau = a.detect.tau.or(file.eval.tau);
    let alarm = match tau {
        Some(tau) if !cps.is_empty() && n > 0 => Some(alarm_eval(&run.scores, &cps, tau, start, end)?),
        _ => None,
    };

    let roc = match truth.as_ref().and_then(|t| t.labels.as_ref()) {
        Some(labels) if end <= n => roc_auc(&run.scores[start - 1..end], &labels[start - 1..end]).ok(),
        _ => None,
    };

    let t_star = a.t_star.or(file.eval.t_star).or(cps.first().copied());
    let mse = match (truth.as_ref().and_then(|t| t.true_means.as_ref()), t_star) {
        (Some(true_means), Some(t_star)) => {
            let windows = MseWindows {
                tau: a.mse_tau.or(file.eval.mse_tau).unwrap_or(SYNTHETIC_TAU),
                t_star,
                eval: a.eval_window.or(file.eval.eval_window).unwrap_or(SYNTHETIC_EVAL),
            };
            Some(segment_mse(&run.means, true_means, windows)?)
        }
        _ => None,
    };

    if let (Some(path), Some(al)) = (&a.curve_out, &alarm) {
        let mut w = sink(Some(path))?;
        writeln!(w, "false_alarm_rate,benefit_recall")?;
        for [x, y] in &al.curve {
            writeln!(w, "{x},{y}")?;
        }
        w.flush()?;
    }

    let report = json!({
        "n": n,
        "range": [start, end],
        "tau": tau,
        "change_points": cps,
        "mse": mse,
        "alarm": alarm,
        "roc_auc": roc,
        "run_config": run.config,
    });
    write_json(a.out.as_ref(), &report)
}
