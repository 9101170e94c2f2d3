//! Onset-based precision, recall and F1.
//!
//! An onset is the first index of a run of a foreground class. A predicted
//! onset is correct when a true onset of the same class lies strictly closer
//! than `0.1 · m_med`, where `m_med` is the median foreground run length of
//! the ground truth. Recall is the same computation with the roles swapped.
//! Every onset is checked independently (no one-to-one matching).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::BACKGROUND;

/// Matching radius as a fraction of the median foreground run.
pub const ONSET_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Onset {
    pub position: usize,
    pub class: usize,
}

/// Positions where a foreground run starts, ascending. A change from one
/// foreground class straight to another counts as an onset.
pub fn find_onsets(labels: &[usize]) -> Vec<Onset> {
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c != BACKGROUND && (i == 0 || labels[i - 1] != c))
        .map(|(position, &class)| Onset { position, class })
        .collect()
}

/// Lengths of maximal single-class foreground runs, in order.
pub fn foreground_runs(labels: &[usize]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let c = labels[i];
        let start = i;
        while i < labels.len() && labels[i] == c {
            i += 1;
        }
        if c != BACKGROUND {
            runs.push(i - start);
        }
    }
    runs
}

/// Median foreground run length; the lower median for an even count.
pub fn median_foreground_length(labels: &[usize]) -> Result<usize> {
    let mut runs = foreground_runs(labels);
    if runs.is_empty() {
        return Err(Error::Consistency(
            "label series has no foreground segment".into(),
        ));
    }
    runs.sort_unstable();
    Ok(runs[(runs.len() - 1) / 2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred_onsets: usize,
    pub n_true_onsets: usize,
}

impl OnsetScores {
    /// The fixed-field report line printed by the CLI.
    pub fn report_line(&self) -> String {
        format!(
            "precision={:.4} recall={:.4} f1={:.4} n_pred_onsets={} n_true_onsets={}",
            self.precision, self.recall, self.f1, self.n_pred_onsets, self.n_true_onsets
        )
    }
}

fn matched_fraction(from: &[Onset], against: &[Onset], radius: f64) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let hits = from
        .iter()
        .filter(|a| {
            against
                .iter()
                .any(|b| b.class == a.class && (a.position.abs_diff(b.position) as f64) < radius)
        })
        .count();
    hits as f64 / from.len() as f64
}

pub fn onset_f1(pred: &[usize], truth: &[usize], m_med: usize) -> Result<OnsetScores> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "predicted labels have length {}, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    if m_med == 0 {
        return Err(Error::Config("median foreground length must be ≥ 1".into()));
    }
    let radius = ONSET_TOLERANCE * m_med as f64;
    let p_on = find_onsets(pred);
    let t_on = find_onsets(truth);
    let precision = matched_fraction(&p_on, &t_on, radius);
    let recall = matched_fraction(&t_on, &p_on, radius);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(OnsetScores {
        precision,
        recall,
        f1,
        n_pred_onsets: p_on.len(),
        n_true_onsets: t_on.len(),
    })
}
