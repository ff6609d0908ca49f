use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{AlgorithmName, AlgorithmSpec, FileConfig};
use super::eval::change_points;
use super::io::{from_spec, load_stream, preset, seed, stream_spec, write_json, Loaded};
use super::run::{constant_rho, resolve_init, resolve_k};
use super::{CliError, CliResult, TuneArgs};
use crate::experiment::{run_learner, RunOptions, SYNTHETIC_EVAL, SYNTHETIC_TAU};
use crate::learners::{Algorithm, InitMode};
use crate::metrics::{alarm_eval, roc_auc, segment_mse, MseWindows};
use crate::streamgen::paper_synthetic_spec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    SEval,
    AlarmAuc,
    RocAuc,
}

impl Objective {
    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "s-eval" | "s_eval" => Ok(Objective::SEval),
            "alarm-auc" | "alarm_auc" => Ok(Objective::AlarmAuc),
            "roc-auc" | "roc_auc" => Ok(Objective::RocAuc),
            _ => Err(CliError::Usage(format!("unknown objective {s:?}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Objective::SEval => "s-eval",
            Objective::AlarmAuc => "alarm-auc",
            Objective::RocAuc => "roc-auc",
        }
    }

    fn minimize(self) -> bool {
        self == Objective::SEval
    }

    /// Value charged to a run that fails numerically.
    fn worst(self) -> f64 {
        if self.minimize() { f64::INFINITY } else { 0.0 }
    }
}

#[derive(Clone, Debug)]
struct Cell {
    k: usize,
    spec: AlgorithmSpec,
    algorithm: Algorithm,
    params: Map<String, Value>,
}

#[derive(Serialize)]
struct CellResult {
    params: Map<String, Value>,
    #[serde(with = "crate::serde_float")]
    mean: f64,
    values: Vec<Value>,
    failures: usize,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn float_value(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { json!(crate::serde_float::label(x)) }
}

/// Grid cells in lexicographic hyperparameter order.
fn cells(name: AlgorithmName, a: &TuneArgs, file: &FileConfig, ks: &[usize]) -> CliResult<Vec<Cell>> {
    let t = &file.tune;
    let grid = |flag: &Option<Vec<f64>>, cfg: &Option<Vec<f64>>| flag.clone().or_else(|| cfg.clone()).map(sorted);
    let gamma = grid(&a.gamma, &t.gamma);
    let beta = grid(&a.beta, &t.beta);
    let m = grid(&a.m, &t.m);
    let rho = grid(&a.rho, &t.rho);
    let r = grid(&a.r, &t.r);
    let need = |g: Option<Vec<f64>>, what: &str| {
        g.filter(|v| !v.is_empty()).ok_or_else(|| CliError::Usage(format!("{} tuning needs a {what} grid", name_str(name))))
    };

    let mut specs: Vec<(Map<String, Value>, AlgorithmSpec)> = Vec::new();
    let base = AlgorithmSpec { name: Some(name), ..Default::default() };
    match name {
        AlgorithmName::Sra => {
            let gamma = need(gamma, "gamma")?;
            for &g in &gamma {
                if let Some(rho) = &rho {
                    for &p in rho {
                        let mut map = Map::new();
                        map.insert("gamma".into(), float_value(g));
                        map.insert("rho".into(), json!(p));
                        specs.push((map, AlgorithmSpec { gamma: Some(g), rho: Some(p), ..base.clone() }));
                    }
                } else {
                    let beta = need(beta.clone(), "beta")?;
                    let m = need(m.clone(), "M")?;
                    for &b in &beta {
                        for &mm in &m {
                            let mut map = Map::new();
                            map.insert("gamma".into(), float_value(g));
                            map.insert("beta".into(), json!(b));
                            map.insert("M".into(), json!(mm));
                            specs.push((
                                map,
                                AlgorithmSpec { gamma: Some(g), beta: Some(b), m: Some(mm), ..base.clone() },
                            ));
                        }
                    }
                }
            }
        }
        AlgorithmName::Sem | AlgorithmName::Sdem => {
            for x in need(r.or(rho), "r")? {
                let mut map = Map::new();
                map.insert("r".into(), json!(x));
                specs.push((map, AlgorithmSpec { r: Some(x), ..base.clone() }));
            }
        }
        AlgorithmName::Iem => specs.push((Map::new(), base)),
    }

    let mut out = Vec::new();
    for &k in ks {
        for (map, spec) in &specs {
            let algorithm = spec.resolve()?;
            let mut params = Map::new();
            params.insert("k".into(), json!(k));
            params.extend(map.clone());
            out.push(Cell { k, spec: spec.clone(), algorithm, params });
        }
    }
    Ok(out)
}

fn name_str(n: AlgorithmName) -> &'static str {
    match n {
        AlgorithmName::Sra => "sra",
        AlgorithmName::Sem => "sem",
        AlgorithmName::Iem => "iem",
        AlgorithmName::Sdem => "sdem",
    }
}

/// One evaluation task: a stream plus how to initialize and score on it.
struct Task {
    stream: Loaded,
    init: InitMode,
    init_range: (usize, usize),
}

pub fn cmd_tune(file: &FileConfig, a: &TuneArgs) -> CliResult<()> {
    let base_seed = seed(&a.stream, file);
    let objective = Objective::parse(a.objective.as_deref().or(file.tune.objective.as_deref()).unwrap_or(
        if a.input.input.is_some() { "alarm-auc" } else { "s-eval" },
    ))?;
    let repeats = a.repeats.or(file.tune.repeats).unwrap_or(10);
    if repeats == 0 {
        return Err(CliError::Usage("repeats must be positive".into()));
    }
    let preset = preset(&a.input)?;
    let name = a.algorithm.or(file.algorithm.name).unwrap_or(AlgorithmName::Sra);

    // Streams: a fixed input varies the initialization seed across repeats;
    // a generated stream varies the stream seed.
    let mut tasks = Vec::with_capacity(repeats);
    let fixed = if a.input.input.is_some() {
        let mut s = load_stream(&a.stream, &a.input, file, base_seed)?;
        if let Some(p) = preset {
            let n = p.train_len.min(s.y.len());
            s.y.truncate(n);
            if let Some(l) = &mut s.labels {
                l.truncate(n);
            }
            if let Some(m) = &mut s.true_means {
                m.truncate(n);
            }
        }
        Some(s)
    } else {
        None
    };
    for i in 0..repeats as u64 {
        let seed_i = base_seed + i;
        let stream = match &fixed {
            Some(s) => s.clone(),
            None => match stream_spec(&a.stream, file, seed_i, None)? {
                Some(spec) => from_spec(&spec)?,
                None => from_spec(&paper_synthetic_spec(0.99, 20.0, seed_i))?,
            },
        };
        if stream.y.is_empty() {
            return Err(CliError::Data("empty stream".into()));
        }
        let (init, init_range) = resolve_init(file, &a.init, preset, stream.y.len(), seed_i)?;
        tasks.push(Task { stream, init, init_range });
    }

    let k_default = resolve_k(file, &a.init, &tasks[0].stream);
    let ks: Vec<usize> = {
        let mut v = a.k_grid.clone().or_else(|| file.tune.k.clone()).unwrap_or(vec![k_default]);
        v.sort_unstable();
        v.dedup();
        v
    };
    let cells = cells(name, a, file, &ks)?;

    let cps = change_points(&a.detect, file, Some(&tasks[0].stream))?;
    let tau = a.detect.tau.or(file.eval.tau);
    let n0 = tasks[0].stream.y.len();
    let range = a.detect.range.or(file.eval.range).or(preset.map(|p| p.tune_range)).unwrap_or((1, n0));
    match objective {
        Objective::AlarmAuc if tau.is_none() || cps.is_empty() => {
            return Err(CliError::Usage("alarm-auc needs --tau and change points".into()));
        }
        Objective::RocAuc if tasks.iter().any(|t| t.stream.labels.is_none()) => {
            return Err(CliError::Usage("roc-auc needs labeled input".into()));
        }
        Objective::SEval if tasks.iter().any(|t| t.stream.true_means.is_none()) => {
            return Err(CliError::Usage("s-eval needs a stream with true means".into()));
        }
        _ => {}
    }

    let evaluate = |cell: &Cell, task: &Task| -> CliResult<Option<f64>> {
        let opts = RunOptions {
            k: cell.k,
            init: task.init,
            init_range: task.init_range,
            record_means: objective == Objective::SEval,
        };
        let trace = match run_learner(&cell.algorithm, &task.stream.y, &opts) {
            Ok(t) => t,
            Err(e) if e.is_numeric() => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let v = match objective {
            Objective::SEval => {
                let truth = task.stream.true_means.as_ref().expect("checked above");
                let windows = MseWindows {
                    tau: file.eval.mse_tau.unwrap_or(SYNTHETIC_TAU),
                    t_star: file.eval.t_star.or(task.stream.change_points.first().copied()).ok_or_else(
                        || CliError::Usage("s-eval needs a change point".into()),
                    )?,
                    eval: file.eval.eval_window.unwrap_or(SYNTHETIC_EVAL),
                };
                segment_mse(&trace.means, truth, windows)?.s_eval
            }
            Objective::AlarmAuc => {
                alarm_eval(&trace.scores(), &cps, tau.expect("checked above"), range.0, range.1)?.auc
            }
            Objective::RocAuc => {
                let labels = task.stream.labels.as_ref().expect("checked above");
                let s = trace.scores();
                roc_auc(&s[range.0 - 1..range.1], &labels[range.0 - 1..range.1])?
            }
        };
        Ok(Some(v))
    };

    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..tasks.len()).map(move |r| (c, r))).collect();
    let values: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(c, r)| evaluate(&cells[c], &tasks[r]))
        .collect::<CliResult<_>>()?;

    let mut results: Vec<CellResult> = Vec::with_capacity(cells.len());
    let mut best: Option<usize> = None;
    for (c, cell) in cells.iter().enumerate() {
        let vals = &values[c * tasks.len()..(c + 1) * tasks.len()];
        let failures = vals.iter().filter(|v| v.is_none()).count();
        let mean = vals.iter().map(|v| v.unwrap_or(objective.worst())).sum::<f64>() / vals.len() as f64;
        let better = |b: f64| if objective.minimize() { mean < b } else { mean > b };
        if best.is_none_or(|b| better(results[b].mean)) {
            best = Some(c);
        }
        results.push(CellResult {
            params: cell.params.clone(),
            mean,
            values: vals.iter().map(|v| v.map_or(Value::Null, float_value)).collect(),
            failures,
        });
    }
    let b = best.expect("grid is non-empty");
    let report = json!({
        "objective": objective.name(),
        "direction": if objective.minimize() { "minimize" } else { "maximize" },
        "repeats": repeats,
        "base_seed": base_seed,
        "best": {
            "params": cells[b].params,
            "algorithm": cells[b].algorithm,
            "rho": constant_rho(&cells[b].algorithm),
            "spec": cells[b].spec,
            "value": float_value(results[b].mean),
        },
        "grid": results,
    });
    write_json(a.out.as_ref(), &report)
}
