use std::io::Write;

use serde::Serialize;

use super::config::FileConfig;
use super::io::{sink, write_json};
use super::{BoundsArgs, CliError, CliResult, Format};
use crate::bounds::{
    corollary2_limit, corollary3_gap, gaussian_tail, minimize_const_rho_bound, step_rule_cross_check,
    theorem2_bound, with_stationary_decrement, BoundInputs, Minimum, StepRuleCrossCheck,
};
use crate::sa::{corollary1_rho, StepSchedule};

#[derive(Serialize)]
struct Row {
    #[serde(with = "crate::serde_float")]
    gamma: f64,
    rho: f64,
    v0n: f64,
    tail: f64,
    theorem2: f64,
    corollary2_limit: f64,
    corollary3_gap: f64,
    warning: Option<String>,
}

#[derive(Serialize)]
struct MinimizeReport {
    #[serde(with = "crate::serde_float")]
    gamma: f64,
    minimum: Option<Minimum>,
    cross_check: Option<StepRuleCrossCheck>,
    error: Option<String>,
}

/// Flags over the `[bounds]` section; every input must come from one of them.
/// The flag is set when no schedule was given, so the step-size rule is used.
fn inputs(file: &FileConfig, a: &BoundsArgs) -> CliResult<(BoundInputs, bool)> {
    let base = file.bounds.clone();
    macro_rules! field {
        ($f:ident, $flag:expr) => {
            match ($flag, base.as_ref()) {
                (Some(v), _) => v,
                (None, Some(b)) => b.$f,
                (None, None) => {
                    return Err(CliError::Usage(format!("bounds needs --{}", stringify!($f).replace('_', "-"))))
                }
            }
        };
    }
    let gamma_default = a.gamma.as_ref().and_then(|g| g.first().copied());
    let inp = BoundInputs {
        c0: field!(c0, a.c0),
        c1: field!(c1, a.c1),
        d0: field!(d0, a.d0),
        d1: field!(d1, a.d1),
        sigma0_sq: field!(sigma0_sq, a.sigma0_sq),
        sigma1_sq: field!(sigma1_sq, a.sigma1_sq),
        l: field!(l, a.l),
        alpha: field!(alpha, a.alpha),
        u: field!(u, a.u),
        d: field!(d, a.d),
        v0n: match (a.v0n, base.as_ref()) {
            (Some(v), _) => v,
            (None, Some(b)) => b.v0n,
            (None, None) if a.stationary => 0.0,
            (None, None) => return Err(CliError::Usage("bounds needs --v0n or --stationary".into())),
        },
        n: field!(n, a.n),
        schedule: base.as_ref().map(|b| b.schedule.clone()).unwrap_or(StepSchedule::Harmonic),
        gamma: field!(gamma, gamma_default),
        m: field!(m, a.m),
    };
    Ok((inp, base.is_none() && a.rho.is_none()))
}

pub fn cmd_bounds(file: &FileConfig, a: &BoundsArgs) -> CliResult<()> {
    let (base, use_rule) = inputs(file, a)?;
    let gammas = a.gamma.clone().unwrap_or_else(|| vec![base.gamma]);
    let schedules: Vec<Option<f64>> = match &a.rho {
        Some(r) => r.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };

    let mut rows = Vec::new();
    let mut minimized = Vec::new();
    for &gamma in &gammas {
        for &rho in &schedules {
            let mut inp = BoundInputs { gamma, ..base.clone() };
            match rho {
                Some(r) => inp.schedule = StepSchedule::Constant { rho: r },
                None if use_rule => {
                    inp.schedule = StepSchedule::Constant { rho: corollary1_rho(gamma, inp.beta(), inp.m) };
                }
                None => {}
            }
            if a.stationary {
                inp = with_stationary_decrement(&inp);
            }
            let t2 = theorem2_bound(&inp)?;
            rows.push(Row {
                gamma,
                rho: inp.schedule.max_rho(),
                v0n: inp.v0n,
                tail: gaussian_tail(gamma, inp.m),
                theorem2: t2.value,
                corollary2_limit: corollary2_limit(&inp)?,
                corollary3_gap: corollary3_gap(&inp)?,
                warning: t2.warning,
            });
            if a.minimize && rho == schedules[0] {
                let (minimum, cross_check, error) =
                    match (minimize_const_rho_bound(&inp, 1.0), step_rule_cross_check(&inp, 1.0)) {
                        (Ok(m), Ok(c)) => (Some(m), Some(c), None),
                        (Ok(m), Err(e)) => (Some(m), None, Some(e.to_string())),
                        (Err(e), _) => (None, None, Some(e.to_string())),
                    };
                minimized.push(MinimizeReport { gamma, minimum, cross_check, error });
            }
        }
    }

    match a.format {
        Format::Json => {
            let report = serde_json::json!({
                "inputs": base,
                "step_size_rule": use_rule,
                "rows": rows,
                "minimize": if a.minimize { Some(&minimized) } else { None },
            });
            write_json(a.out.as_ref(), &report)
        }
        Format::Text => {
            let mut w = sink(a.out.as_ref())?;
            writeln!(
                w,
                "{:>10} {:>12} {:>12} {:>14} {:>14} {:>14} {:>14}",
                "gamma", "rho", "tail", "theorem2", "cor2_limit", "cor3_gap", "v0n"
            )?;
            for r in &rows {
                writeln!(
                    w,
                    "{:>10.4} {:>12.6e} {:>12.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}{}",
                    r.gamma,
                    r.rho,
                    r.tail,
                    r.theorem2,
                    r.corollary2_limit,
                    r.corollary3_gap,
                    r.v0n,
                    r.warning.as_deref().map(|m| format!("  warning: {m}")).unwrap_or_default()
                )?;
            }
            for m in &minimized {
                writeln!(w)?;
                writeln!(w, "gamma = {}", m.gamma)?;
                if let Some(min) = &m.minimum {
                    writeln!(w, "  numeric argmin rho = {:.6e} (bound {:.6e}, grid fallback {})", min.argmin, min.value, min.used_grid)?;
                }
                if let Some(c) = &m.cross_check {
                    writeln!(w, "  rule rho          = {:.6e} (gamma-optimal at {:.6}, consistent {})", c.rho_rule, c.gamma_at_rule, c.rule_consistent)?;
                    writeln!(w, "  rule rho with c1  = {:.6e} (gamma-optimal at {:.6}, consistent {})", c.rho_rule_c1, c.gamma_at_rule_c1, c.rule_c1_consistent)?;
                }
                if let Some(e) = &m.error {
                    writeln!(w, "  {e}")?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}
