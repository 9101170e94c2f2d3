//! Temporal-consistency smoothing of predicted label series.
//!
//! Scanning left to right, each onset of a foreground class in the input
//! opens a window of `m_w` positions. The window's majority class overwrites
//! that span of the output and scanning resumes after the window. Positions
//! past the end of the series vote as background, so a short-lived onset at
//! the very end is erased like any other.

use crate::error::{Error, Result};
use crate::metrics::onset_f1;
use crate::series::BACKGROUND;

/// Majority class in `window`, padded with `pad` background votes. Ties go
/// to the class that appears first (padding comes last).
fn majority(window: &[usize], pad: usize) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    let votes = window.iter().copied().chain(std::iter::repeat_n(BACKGROUND, pad));
    for c in votes {
        match counts.iter_mut().find(|(class, _)| *class == c) {
            Some((_, n)) => *n += 1,
            None => counts.push((c, 1)),
        }
    }
    let mut best = counts[0];
    for &(c, n) in &counts[1..] {
        if n > best.1 {
            best = (c, n);
        }
    }
    best.0
}

pub fn smooth_labels(before: &[usize], window: usize) -> Result<Vec<usize>> {
    if window == 0 {
        return Err(Error::Config("smoothing window must be ≥ 1".into()));
    }
    let n = before.len();
    let mut after = before.to_vec();
    let mut i = 0;
    while i < n {
        let c = before[i];
        let is_onset = c != BACKGROUND && (i == 0 || before[i - 1] != c);
        if !is_onset {
            i += 1;
            continue;
        }
        let end = (i + window).min(n);
        let winner = majority(&before[i..end], i + window - end);
        after[i..end].fill(winner);
        i += window;
    }
    Ok(after)
}

/// The candidate window whose smoothed predictions score the highest onset
/// F1 against the validation truth; the smallest candidate on ties.
pub fn select_window_by_validation(
    pred: &[usize],
    truth: &[usize],
    candidates: &[usize],
    m_med: usize,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for w in sorted {
        let f1 = onset_f1(&smooth_labels(pred, w)?, truth, m_med)?.f1;
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((w, f1));
        }
    }
    best.map(|(w, _)| w)
        .ok_or_else(|| Error::Config("no smoothing window candidates".into()))
}
