//! Evaluation protocols: segment MSEs against known means, benefit-weighted
//! alarm AUC for change detection, and ROC AUC for labeled anomalies.
//!
//! Series are indexed so that element `i` belongs to time `t = i + 1`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegmentMse {
    pub s_eval: f64,
    pub s_bc: f64,
    pub s_ac: f64,
    pub s_tot: f64,
}

/// Windows for [`segment_mse`], all 1-based and inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseWindows {
    /// Transient length; sums start at τ + 1.
    pub tau: usize,
    pub t_star: usize,
    pub eval: (usize, usize),
}

/// Squared error between estimated and true component means at one step,
/// minimized over relabelings of the estimate.
pub fn matched_sq_error(est: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimated components, {} true",
            est.len(),
            truth.len()
        )));
    }
    let k = est.len();
    let mut cost = vec![vec![0.0; k]; k];
    for (i, e) in est.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if e.len() != t.len() {
                return Err(Error::DimensionMismatch { expected: t.len(), got: e.len() });
            }
            cost[i][j] = e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        best = best.min(c);
    });
    Ok(if k == 0 { 0.0 } else { best })
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start + 1 >= p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// Per-step matched squared errors of an estimate series.
pub fn matched_errors(estimated: &[Vec<Vec<f64>>], truth: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates, {} true steps",
            estimated.len(),
            truth.len()
        )));
    }
    estimated.iter().zip(truth).map(|(e, t)| matched_sq_error(e, t)).collect()
}

/// Segment MSEs: S_tot over [τ+1, T], S_bc over [τ+1, t*−1], S_ac over
/// [t*+1, T] and S_eval over the evaluation window, each divided by the
/// number of steps it sums.
pub fn segment_mse(
    estimated: &[Vec<Vec<f64>>],
    truth: &[Vec<Vec<f64>>],
    windows: MseWindows,
) -> Result<SegmentMse> {
    let errors = matched_errors(estimated, truth)?;
    segment_mse_from_errors(&errors, windows)
}

pub fn segment_mse_from_errors(errors: &[f64], windows: MseWindows) -> Result<SegmentMse> {
    let big_t = errors.len();
    let MseWindows { tau, t_star, eval } = windows;
    if !(tau + 1 < t_star && t_star < big_t) {
        return Err(Error::InvalidConfig(format!(
            "need tau + 1 < t* < T, got tau={tau}, t*={t_star}, T={big_t}"
        )));
    }
    if !(eval.0 >= 1 && eval.0 <= eval.1 && eval.1 <= big_t) {
        return Err(Error::InvalidConfig(format!(
            "evaluation window [{}, {}] outside [1, {big_t}]",
            eval.0, eval.1
        )));
    }
    let mean = |a: usize, b: usize| errors[a - 1..b].iter().sum::<f64>() / (b - a + 1) as f64;
    Ok(SegmentMse {
        s_eval: mean(eval.0, eval.1),
        s_bc: mean(tau + 1, t_star - 1),
        s_ac: mean(t_star + 1, big_t),
        s_tot: mean(tau + 1, big_t),
    })
}

/// b(t; t*) = 1 − |t − t*|/τ when |t − t*| < τ, else 0.
pub fn benefit(t: usize, t_star: usize, tau: usize) -> f64 {
    let dist = t.abs_diff(t_star);
    if dist < tau {
        1.0 - dist as f64 / tau as f64
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlarmEval {
    /// Ascending, with −∞ first and +∞ last.
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    pub benefit_recall: Vec<f64>,
    pub false_alarm_rate: Vec<f64>,
    /// (false-alarm rate, recall) sorted for integration, with (0, 0) and
    /// (1, 1) included.
    pub curve: Vec<[f64; 2]>,
    pub auc: f64,
    /// Set when no threshold produces any benefit; the AUC is then 0.
    pub flag: Option<String>,
}

fn nearest(change_points: &[usize], t: usize) -> Option<usize> {
    // Sorted input; ties go to the earlier change point.
    let i = change_points.partition_point(|&c| c < t);
    let after = change_points.get(i).copied();
    let before = i.checked_sub(1).map(|j| change_points[j]);
    match (before, after) {
        (Some(b), Some(a)) => Some(if t - b <= a - t { b } else { a }),
        (b, a) => b.or(a),
    }
}

/// Benefit/false-alarm curve of `scores` over [t_start, t_end] with one
/// threshold per distinct score value plus ±∞. An alarm is raised when
/// s_t > ε. Each alarm is judged against its nearest change point; a change
/// point is credited with the best benefit among its alarms, and alarms with
/// zero benefit are false alarms.
pub fn alarm_eval(
    scores: &[f64],
    change_points: &[usize],
    tau: usize,
    t_start: usize,
    t_end: usize,
) -> Result<AlarmEval> {
    if tau == 0 {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    if !(t_start >= 1 && t_start <= t_end && t_end <= scores.len()) {
        return Err(Error::InvalidConfig(format!(
            "range [{t_start}, {t_end}] outside [1, {}]",
            scores.len()
        )));
    }
    let window = &scores[t_start - 1..t_end];
    if window.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut cps: Vec<usize> = change_points.to_vec();
    cps.sort_unstable();
    cps.dedup();

    // Alarm times ordered by descending score.
    let mut order: Vec<usize> = (t_start..=t_end).collect();
    order.sort_by(|&a, &b| scores[b - 1].total_cmp(&scores[a - 1]).then(a.cmp(&b)));

    let mut best = vec![0.0f64; cps.len()];
    let mut total_benefit = 0.0;
    let mut false_alarms = 0usize;
    // (threshold, total benefit, false alarms), from +∞ downward.
    let mut rows = vec![(f64::INFINITY, 0.0, 0usize)];
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i] - 1];
        rows.push((v, total_benefit, false_alarms));
        while i < order.len() && scores[order[i] - 1] == v {
            let t = order[i];
            let b = match nearest(&cps, t) {
                Some(c) => {
                    let idx = cps.binary_search(&c).expect("nearest returns a member");
                    let b = benefit(t, c, tau);
                    if b > best[idx] {
                        total_benefit += b - best[idx];
                        best[idx] = b;
                    }
                    b
                }
                None => 0.0,
            };
            if b == 0.0 {
                false_alarms += 1;
            }
            i += 1;
        }
    }
    rows.push((f64::NEG_INFINITY, total_benefit, false_alarms));
    rows.reverse();

    let sup_b = total_benefit;
    let sup_n = false_alarms;
    let thresholds: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let benefit_recall: Vec<f64> =
        rows.iter().map(|r| if sup_b > 0.0 { r.1 / sup_b } else { 0.0 }).collect();
    let false_alarm_rate: Vec<f64> =
        rows.iter().map(|r| if sup_n > 0 { r.2 as f64 / sup_n as f64 } else { 0.0 }).collect();

    let mut curve: Vec<[f64; 2]> =
        false_alarm_rate.iter().zip(&benefit_recall).map(|(f, r)| [*f, *r]).collect();
    curve.push([0.0, 0.0]);
    curve.push([1.0, 1.0]);
    curve.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    curve.dedup();

    let (auc, flag) = if sup_b > 0.0 {
        (trapezoid(&curve), None)
    } else {
        (0.0, Some("no alarm falls within tau of any change point".to_string()))
    };
    Ok(AlarmEval { thresholds, benefit_recall, false_alarm_rate, curve, auc, flag })
}

fn trapezoid(curve: &[[f64; 2]]) -> f64 {
    curve.windows(2).map(|w| (w[1][0] - w[0][0]) * 0.5 * (w[0][1] + w[1][1])).sum()
}

/// ROC AUC as the normalized Mann–Whitney statistic; tied scores count ½.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParams("ROC AUC needs both positive and negative labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
