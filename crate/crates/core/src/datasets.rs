//! Readers for user-supplied stream files and the built-in protocol presets.
//!
//! * Single-column series (e.g. Well-log): one value per line, blank lines
//!   and lines starting with `#` ignored.
//! * Labeled CSV (e.g. SMTP, THYROID exported to CSV): a header row, one
//!   label column (`1`/`0`, `true`/`false`), every other column a feature.
//! * Generated streams as written by [`crate::streamgen::write_csv`].

use std::io::{BufRead, Read};

use crate::error::{Error, Result};

/// Change points of the five Well-log annotation sets.
pub fn well_log_annotation(set: usize) -> Option<&'static [usize]> {
    const A1: &[usize] = &[1069, 1525, 1681, 1861, 2053, 2407, 2473, 2527, 2587, 2767, 2779];
    const A2: &[usize] = &[1069, 1525, 1681, 1867, 2053, 2407, 2467, 2527, 2587];
    const A3: &[usize] = &[1069, 1525, 1687, 1867, 2053, 2407, 2473, 2527, 2587];
    const A4: &[usize] = &[1057, 2797];
    const A5: &[usize] = &[
        19, 1069, 1525, 1681, 1861, 2059, 2407, 2467, 2527, 2587, 2767, 2779, 3121, 3151, 3715,
        3853, 3961,
    ];
    match set {
        1 => Some(A1),
        2 => Some(A2),
        3 => Some(A3),
        4 => Some(A4),
        5 => Some(A5),
        _ => None,
    }
}

/// Tuning ranges and initialization window of the real-data protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitPreset {
    /// Points 1..=train_len are used for tuning.
    pub train_len: usize,
    /// Inclusive range scored during tuning.
    pub tune_range: (usize, usize),
    /// Inclusive range whose per-coordinate min/max bounds the uniform
    /// initialization draws.
    pub init_range: (usize, usize),
}

pub fn split_preset(name: &str) -> Option<SplitPreset> {
    match name.to_ascii_lowercase().as_str() {
        "well-log" | "welllog" | "well_log" => Some(SplitPreset {
            train_len: 1550,
            tune_range: (20, 1150),
            init_range: (20, 40),
        }),
        "smtp" => Some(SplitPreset {
            train_len: 40_000,
            tune_range: (10_000, 40_000),
            init_range: (20, 40),
        }),
        "thyroid" => Some(SplitPreset {
            train_len: 2_000,
            tune_range: (1_000, 2_000),
            init_range: (20, 40),
        }),
        _ => None,
    }
}

/// One value per line.
pub fn read_series<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: {s:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line: i + 1, message: "non-finite value".into() });
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledData {
    pub features: Vec<String>,
    pub y: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" | "anomaly" | "outlier" => Some(true),
        "0" | "0.0" | "false" | "no" | "normal" | "inlier" => Some(false),
        _ => None,
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

/// CSV with a header and a label column; all other columns are features.
pub fn read_labeled_csv<R: Read>(reader: R, label_column: &str) -> Result<LabeledData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let label_idx = headers.iter().position(|h| h == label_column).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("no column named {label_column:?}"),
    })?;
    let features: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut data = LabeledData { features, ..Default::default() };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut y = Vec::with_capacity(rec.len().saturating_sub(1));
        for (i, field) in rec.iter().enumerate() {
            if i == label_idx {
                let l = parse_label(field).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("bad label {field:?}"),
                })?;
                data.labels.push(l);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, message: "non-finite value".into() });
                }
                y.push(v);
            }
        }
        data.y.push(y);
    }
    Ok(data)
}

/// A stream file written by the generator, with its ground truth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeneratedStream {
    pub d: usize,
    pub y: Vec<Vec<f64>>,
    pub is_outlier: Vec<bool>,
    pub segment_id: Vec<usize>,
    /// Per step, per component, the true mean; empty if the file has none.
    pub true_means: Vec<Vec<Vec<f64>>>,
}

impl GeneratedStream {
    /// Steps at which the segment id changes.
    pub fn change_points(&self) -> Vec<usize> {
        (1..self.segment_id.len())
            .filter(|&i| self.segment_id[i] != self.segment_id[i - 1])
            .map(|i| i + 1)
            .collect()
    }
}

/// Reads a CSV with columns `y1..yd` and optionally `is_outlier`,
/// `segment_id` and `true_mu_*`. Only the `y` columns are required.
pub fn read_stream_csv<R: Read>(reader: R) -> Result<GeneratedStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let y_cols: Vec<usize> = (1..)
        .map_while(|j| headers.iter().position(|h| h == format!("y{j}")))
        .collect();
    if y_cols.is_empty() {
        return Err(Error::Parse { line: 1, message: "header has no y1 column".into() });
    }
    let d = y_cols.len();
    let outlier_col = headers.iter().position(|h| h == "is_outlier");
    let segment_col = headers.iter().position(|h| h == "segment_id");
    // true_mu_{c} for d = 1, true_mu_{c}_{j} otherwise.
    let mut mu_cols: Vec<Vec<usize>> = Vec::new();
    for c in 1.. {
        let cols: Vec<usize> = if d == 1 {
            headers.iter().position(|h| h == format!("true_mu_{c}")).into_iter().collect()
        } else {
            (1..=d).filter_map(|j| headers.iter().position(|h| h == format!("true_mu_{c}_{j}"))).collect()
        };
        if cols.len() != d {
            break;
        }
        mu_cols.push(cols);
    }

    let mut s = GeneratedStream { d, ..Default::default() };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            let f = rec.get(i).unwrap_or("");
            f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line,
                message: format!("not a finite number: {f:?}"),
            })
        };
        s.y.push(y_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?);
        if let Some(i) = outlier_col {
            let f = rec.get(i).unwrap_or("");
            s.is_outlier.push(parse_label(f).ok_or_else(|| Error::Parse {
                line,
                message: format!("bad is_outlier {f:?}"),
            })?);
        }
        if let Some(i) = segment_col {
            let f = rec.get(i).unwrap_or("");
            s.segment_id.push(f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad segment_id {f:?}"),
            })?);
        }
        if !mu_cols.is_empty() {
            let mut means = Vec::new();
            for cols in &mu_cols {
                if cols.iter().all(|&i| rec.get(i).is_some_and(|f| !f.is_empty())) {
                    means.push(cols.iter().map(|&i| num(i)).collect::<Result<Vec<f64>>>()?);
                }
            }
            s.true_means.push(means);
        }
    }
    Ok(s)
}
