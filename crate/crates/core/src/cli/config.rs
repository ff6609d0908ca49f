//! Config-file types shared by the subcommands. Every field is optional in
//! the file; command-line flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::learners::{Algorithm, InitMode};
use crate::sa::{SraConfig, StepSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Sra,
    Sem,
    Iem,
    Sdem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScheduleName {
    Constant,
    InvSqrt,
    Harmonic,
}

/// Hyperparameters as a user writes them. SRA takes γ plus either ρ, the
/// pair (β, M) for the step-size rule, or a decaying schedule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: Option<AlgorithmName>,
    #[serde(with = "opt_float")]
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<f64>,
    pub rho: Option<f64>,
    pub schedule: Option<ScheduleName>,
    /// Scale of the c/√t schedule.
    pub c: Option<f64>,
    /// sEM step or SDEM forgetting factor.
    pub r: Option<f64>,
}

impl AlgorithmSpec {
    pub fn merge(&mut self, o: &AlgorithmSpec) {
        macro_rules! take {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        take!(name, gamma, beta, m, rho, schedule, c, r);
    }

    pub fn resolve(&self) -> Result<Algorithm, CliError> {
        let usage = |m: &str| CliError::Usage(m.to_string());
        let alg = match self.name.unwrap_or(AlgorithmName::Sra) {
            AlgorithmName::Sra => {
                let gamma = self.gamma.ok_or_else(|| usage("sra needs --gamma"))?;
                let cfg = match (self.schedule, self.rho, self.beta, self.m) {
                    (Some(ScheduleName::Harmonic), ..) => {
                        SraConfig::new(gamma, StepSchedule::Harmonic)
                    }
                    (Some(ScheduleName::InvSqrt), ..) => {
                        let c = self.c.ok_or_else(|| usage("inv_sqrt schedule needs --c"))?;
                        SraConfig::new(gamma, StepSchedule::InvSqrt { c })
                    }
                    (_, Some(rho), ..) => SraConfig::new(gamma, StepSchedule::Constant { rho }),
                    (_, None, Some(beta), Some(m)) => SraConfig::from_gamma_beta_m(gamma, beta, m),
                    _ => return Err(usage("sra needs --rho or both --beta and --m")),
                }
                .map_err(|e| CliError::Usage(e.to_string()))?;
                Algorithm::Sra(cfg)
            }
            AlgorithmName::Sem => {
                Algorithm::Sem { r: self.r.or(self.rho).ok_or_else(|| usage("sem needs --r"))? }
            }
            AlgorithmName::Iem => Algorithm::Iem,
            AlgorithmName::Sdem => Algorithm::Sdem { r: self.r.ok_or_else(|| usage("sdem needs --r"))? },
        };
        alg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(alg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    /// Moment matching on the initialization window.
    Moment,
    /// Moment matching on uniform draws over the window's range.
    Uniform,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub mode: Option<InitName>,
    /// Inclusive 1-based window `[start, end]`.
    pub range: Option<(usize, usize)>,
    /// Number of uniform draws.
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

impl InitSpec {
    pub fn merge(&mut self, o: &InitSpec) {
        if o.mode.is_some() {
            self.mode = o.mode;
        }
        if o.range.is_some() {
            self.range = o.range;
        }
        if o.points.is_some() {
            self.points = o.points;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
    }

    /// Mode and window for a stream of length `len`; the default window is
    /// the first ten points.
    pub fn resolve(&self, len: usize, default_seed: u64) -> (InitMode, (usize, usize)) {
        let range = self.range.unwrap_or((1, len.min(10)));
        let mode = match self.mode.unwrap_or(InitName::Moment) {
            InitName::Moment => InitMode::MomentMatch,
            InitName::Uniform => InitMode::Uniform {
                n_points: self.points.unwrap_or(20),
                seed: self.seed.unwrap_or(default_seed),
            },
        };
        (mode, range)
    }
}

/// Whole-file config; each subcommand reads the sections it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub algorithm: AlgorithmSpec,
    pub init: InitSpec,
    pub stream: StreamSection,
    pub eval: EvalSection,
    pub tune: TuneSection,
    pub bounds: Option<crate::bounds::BoundInputs>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub alpha: Option<f64>,
    pub u: Option<f64>,
    pub t_len: Option<usize>,
    /// Change times; each segment is given by `segments` in order.
    pub segments: Vec<SegmentSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major covariance per component.
    pub covariances: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tau: Option<usize>,
    pub range: Option<(usize, usize)>,
    pub change_points: Option<Vec<usize>>,
    pub annotation: Option<usize>,
    pub mse_tau: Option<usize>,
    pub t_star: Option<usize>,
    pub eval_window: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub objective: Option<String>,
    pub repeats: Option<usize>,
    #[serde(with = "opt_float_vec")]
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "crate::serde_float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

mod opt_float_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "crate::serde_float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|xs| xs.iter().copied().map(W).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Vec<W>>::deserialize(d)?.map(|v| v.into_iter().map(|w| w.0).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sra_from_rule() {
        let spec = AlgorithmSpec {
            name: Some(AlgorithmName::Sra),
            gamma: Some(3.0),
            beta: Some(0.1),
            m: Some(5.0),
            ..Default::default()
        };
        let Algorithm::Sra(cfg) = spec.resolve().unwrap() else { panic!() };
        assert!((cfg.schedule.max_rho() - 0.0116).abs() < 1e-4);
    }

    #[test]
    fn file_round_trip() {
        let text = r#"
            seed = 3
            k = 2
            [algorithm]
            name = "sra"
            gamma = inf
            rho = 0.005
            [tune]
            gamma = [1.0, 3.0, inf]
        "#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.algorithm.gamma, Some(f64::INFINITY));
        assert_eq!(cfg.tune.gamma.as_deref(), Some(&[1.0, 3.0, f64::INFINITY][..]));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn missing_hyperparameters_are_usage_errors() {
        let spec = AlgorithmSpec { name: Some(AlgorithmName::Sdem), ..Default::default() };
        assert!(matches!(spec.resolve(), Err(CliError::Usage(_))));
    }
}
