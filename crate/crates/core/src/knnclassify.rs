//! Majority-vote k-NN classification on a cross-join graph.

use crate::error::{Error, Result};
use crate::knngraph::KnnGraph;
use crate::metrics::onset_f1;
use crate::postprocess::smooth_labels;
use crate::series::LabelSeries;

/// Labels each graph row by unweighted majority over its first `k_use`
/// neighbors. Among tied classes the one held by the nearer neighbor wins.
pub fn knn_predict(graph: &KnnGraph, train_labels: &LabelSeries, k_use: usize) -> Result<LabelSeries> {
    if k_use == 0 || k_use > graph.k() {
        return Err(Error::Config(format!(
            "k_use = {k_use} must be in 1..={}",
            graph.k()
        )));
    }
    let y = train_labels.labels();
    let n_classes = train_labels.n_classes();
    let mut counts = vec![0usize; n_classes];
    let mut out = Vec::with_capacity(graph.n_rows());
    for (i, row) in graph.rows().enumerate() {
        counts.fill(0);
        for &nb in &row[..k_use] {
            let c = *y.get(nb).ok_or_else(|| {
                Error::Consistency(format!(
                    "graph row {i} references training subsequence {nb}, but only {} labels exist",
                    y.len()
                ))
            })?;
            counts[c] += 1;
        }
        let top = *counts.iter().max().unwrap();
        // Walking neighbors nearest-first finds the nearest tied class.
        let label = row[..k_use]
            .iter()
            .map(|&nb| y[nb])
            .find(|&c| counts[c] == top)
            .unwrap();
        out.push(label);
    }
    LabelSeries::new(out, n_classes)
}

/// Chooses `k_use` by onset F1 of the smoothed validation predictions; ties
/// go to the smallest candidate.
pub fn select_k_by_validation(
    valid_graph: &KnnGraph,
    train_labels: &LabelSeries,
    valid_labels: &LabelSeries,
    candidates: &[usize],
    window: usize,
    m_med: usize,
) -> Result<usize> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, f64)> = None;
    for k in sorted {
        let pred = knn_predict(valid_graph, train_labels, k)?;
        let smoothed = smooth_labels(pred.labels(), window)?;
        let f1 = onset_f1(&smoothed, valid_labels.labels(), m_med)?.f1;
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((k, f1));
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::Config("no k candidates".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knngraph::GraphMode;

    fn graph(rows: &[&[usize]]) -> KnnGraph {
        let k = rows[0].len();
        KnnGraph::from_rows(GraphMode::Cross, 4, k, rows.concat()).unwrap()
    }

    #[test]
    fn single_neighbor() {
        let g = graph(&[&[2, 0, 1], &[1, 2, 0]]);
        let y = LabelSeries::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(knn_predict(&g, &y, 1).unwrap().labels(), &[2, 1]);
    }

    #[test]
    fn strict_majority() {
        let g = graph(&[&[0, 1, 2]]);
        let y = LabelSeries::new(vec![2, 2, 1], 3).unwrap();
        assert_eq!(knn_predict(&g, &y, 3).unwrap().labels(), &[2]);
    }

    #[test]
    fn tie_goes_to_nearer_class() {
        let g = graph(&[&[0, 1]]);
        let y = LabelSeries::new(vec![1, 2], 3).unwrap();
        assert_eq!(knn_predict(&g, &y, 2).unwrap().labels(), &[1]);
        let g = graph(&[&[1, 0]]);
        assert_eq!(knn_predict(&g, &y, 2).unwrap().labels(), &[2]);
    }

    #[test]
    fn out_of_range_neighbor() {
        let g = graph(&[&[0, 5]]);
        let y = LabelSeries::new(vec![1, 2], 3).unwrap();
        assert!(matches!(knn_predict(&g, &y, 2), Err(Error::Consistency(_))));
        assert!(knn_predict(&g, &y, 3).is_err());
    }

    #[test]
    fn k_selection() {
        // Rows 2..6 are a class-1 segment; their first neighbor is wrong.
        let g = graph(&[
            &[0, 1, 2],
            &[0, 1, 2],
            &[3, 4, 5],
            &[3, 4, 5],
            &[3, 4, 5],
            &[3, 4, 5],
            &[0, 1, 2],
            &[0, 1, 2],
        ]);
        let train = LabelSeries::new(vec![0, 0, 0, 0, 1, 1], 2).unwrap();
        let valid = LabelSeries::new(vec![0, 0, 1, 1, 1, 1, 0, 0], 2).unwrap();
        assert_eq!(select_k_by_validation(&g, &train, &valid, &[1], 1, 4).unwrap(), 1);
        assert_eq!(select_k_by_validation(&g, &train, &valid, &[1, 3], 1, 4).unwrap(), 3);
        let bg = LabelSeries::new(vec![0; 6], 2).unwrap();
        assert_eq!(select_k_by_validation(&g, &bg, &valid, &[3, 2], 1, 4).unwrap(), 2);
    }
}
