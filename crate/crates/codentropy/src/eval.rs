//! ROC/AUC evaluation of line scores against labels, plus class-conditional
//! entropy summaries.
//!
//! AUC is the Mann-Whitney statistic: over all (buggy, clean) pairs, the
//! fraction where the buggy line outscores the clean one, ties credited 0.5.
//! It is computed from sorted ranks in O(n log n), with the numerator kept in
//! integers (doubled ranks) so the result equals brute-force pair counting
//! bit for bit. Ties produce single diagonal ROC segments, which is the one
//! convention under which the trapezoidal curve area agrees exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LineLabel;
use crate::csvio;
use crate::error::{Error, Result};

/// AUC, the ROC curve and the class-conditional entropy means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub mean_entropy_buggy: f64,
    pub mean_entropy_clean: f64,
    /// buggy mean minus clean mean.
    pub entropy_gap: f64,
    pub n_buggy: usize,
    pub n_clean: usize,
}

fn split_counts(scores: &[(f64, LineLabel)]) -> Result<(usize, usize)> {
    let n_buggy = scores.iter().filter(|(_, l)| *l == LineLabel::Buggy).count();
    let n_clean = scores.len() - n_buggy;
    if n_buggy == 0 || n_clean == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((n_buggy, n_clean))
}

fn sorted_indices(scores: &[(f64, LineLabel)]) -> Result<Vec<usize>> {
    if scores.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "score passed to evaluation".into(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].0.partial_cmp(&scores[b].0).unwrap());
    Ok(idx)
}

/// Mann-Whitney AUC with ties counted half.
pub fn auc(scores: &[(f64, LineLabel)]) -> Result<f64> {
    let (n_buggy, n_clean) = split_counts(scores)?;
    let idx = sorted_indices(scores)?;
    // Doubled average ranks stay integral, so the numerator is exact.
    let mut rank2_sum_buggy: u64 = 0;
    let mut i = 0usize;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]].0 == scores[idx[i]].0 {
            j += 1;
        }
        // Ranks i+1 ..= j+1 (1-based); doubled average = (i + 1) + (j + 1).
        let rank2 = (i + j + 2) as u64;
        for &k in &idx[i..=j] {
            if scores[k].1 == LineLabel::Buggy {
                rank2_sum_buggy += rank2;
            }
        }
        i = j + 1;
    }
    let nb = n_buggy as u64;
    let numerator2 = rank2_sum_buggy - nb * (nb + 1);
    Ok(numerator2 as f64 / (2 * nb * n_clean as u64) as f64)
}

/// Threshold sweep over distinct score values, descending. Higher score
/// means "predicted buggy"; a tie group contributes one segment.
pub fn roc_curve(scores: &[(f64, LineLabel)]) -> Result<Vec<(f64, f64)>> {
    let (n_buggy, n_clean) = split_counts(scores)?;
    let idx = sorted_indices(scores)?;
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = idx.len();
    while i > 0 {
        let mut j = i;
        while j > 1 && scores[idx[j - 2]].0 == scores[idx[i - 1]].0 {
            j -= 1;
        }
        for &k in &idx[j - 1..i] {
            match scores[k].1 {
                LineLabel::Buggy => tp += 1,
                LineLabel::Clean => fp += 1,
            }
        }
        points.push((fp as f64 / n_clean as f64, tp as f64 / n_buggy as f64));
        i = j - 1;
    }
    Ok(points)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Assemble AUC, curve and class-conditional means into one report.
pub fn summarize(scores: &[(f64, LineLabel)]) -> Result<RocReport> {
    let (n_buggy, n_clean) = split_counts(scores)?;
    let auc_value = auc(scores)?;
    let roc_points = roc_curve(scores)?;
    let sum_of = |want: LineLabel| -> f64 {
        scores
            .iter()
            .filter(|(_, l)| *l == want)
            .map(|(v, _)| v)
            .sum()
    };
    let mean_entropy_buggy = sum_of(LineLabel::Buggy) / n_buggy as f64;
    let mean_entropy_clean = sum_of(LineLabel::Clean) / n_clean as f64;
    Ok(RocReport {
        auc: auc_value,
        roc_points,
        mean_entropy_buggy,
        mean_entropy_clean,
        entropy_gap: mean_entropy_buggy - mean_entropy_clean,
        n_buggy,
        n_clean,
    })
}

/// Aligned comparison table, one row per report, sorted by AUC descending.
pub fn render_table(rows: &[(String, RocReport)]) -> String {
    let mut sorted: Vec<&(String, RocReport)> = rows.iter().collect();
    sorted.sort_by(|a, b| b.1.auc.partial_cmp(&a.1.auc).unwrap());
    let name_width = sorted
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once("source".len()))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>8}  {:>12}  {:>12}  {:>12}  {:>7}  {:>7}",
        "source", "auc", "mean_buggy", "mean_clean", "gap", "buggy", "clean"
    );
    for (name, r) in sorted {
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>8.4}  {:>12.6}  {:>12.6}  {:>12.6}  {:>7}  {:>7}",
            name, r.auc, r.mean_entropy_buggy, r.mean_entropy_clean, r.entropy_gap, r.n_buggy, r.n_clean
        );
    }
    out
}

/// ROC points as CSV for external plotting.
pub fn roc_csv(report: &RocReport) -> String {
    let mut out = String::from("fpr,tpr\n");
    for &(fpr, tpr) in &report.roc_points {
        let mut row = String::new();
        csvio::push_row(&mut row, &[&format!("{fpr:.6}"), &format!("{tpr:.6}")]);
        out.push_str(&row);
    }
    out
}

pub fn write_roc_csv(path: &Path, report: &RocReport) -> Result<()> {
    std::fs::write(path, roc_csv(report)).map_err(|e| Error::io(path, e))
}
