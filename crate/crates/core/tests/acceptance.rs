//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Criterion numbers given as arguments restrict the
//! run, e.g. `cargo test --test acceptance -- 1 6`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use egots::autodiff::gradcheck::{run_suite, Instance, SuiteReport};
use egots::autodiff::{MultiHeadAttention, ParameterStore, Tensor, TransformerBlock};
use egots::backbones::{Backbone, BackboneConfig, BackboneKind};
use egots::bench::{time_builder, Builder};
use egots::datasynth::{planted_motif_dataset, random_walk, PlantedConfig, PlantedDataset};
use egots::distprof::{distance_profile_brute, distance_profiles_streaming, znorm_distance};
use egots::egonet::{EgoBatch, EgoNet};
use egots::knngraph::{knn_stomp_cross_with, knn_stomp_self_with, BuildOptions, KnnGraph};
use egots::metrics::{median_foreground_length, onset_f1};
use egots::postprocess::smooth_labels;
use egots::trainer::{infer, train, ModelKind, TrainConfig};
use egots::{Result, TimeSeries};

const GRAD_TOL: f64 = 1e-3;
const PROFILE_TOL: f64 = 1e-6;
const PERM_TOL: f64 = 1e-5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

struct Outcome {
    pass: bool,
    detail: String,
    budget: Duration,
}

fn outcome(pass: bool, detail: String, budget_s: u64) -> Outcome {
    Outcome { pass, detail, budget: Duration::from_secs(budget_s) }
}

fn random_series(n: usize, d: usize, r: &mut ChaCha8Rng) -> TimeSeries {
    TimeSeries::new("x", (0..d).map(|_| random_walk(n, r)).collect()).unwrap()
}

// 1. Streaming distance profiles against brute force.
fn profiles() -> Result<Outcome> {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    let mut rows = 0;
    for inst in 0..100 {
        let m = [8, 25, 50][inst % 3];
        let d = [1, 3][(inst / 3) % 2];
        let n = r.random_range(m + 10..=500);
        let target = random_series(n, d, &mut r);
        let cross = inst % 2 == 0;
        let query = if cross { random_series(r.random_range(m..=500), d, &mut r) } else { target.clone() };
        let q = if cross { &query } else { &target };
        let mut stream = distance_profiles_streaming(q, &target, m)?;
        let mut out = Vec::new();
        let mut i = 0;
        while stream.next_into(&mut out) {
            let mut brute = vec![0.0; target.n_subsequences(m)?];
            for dim in 0..d {
                let p = distance_profile_brute(&q.dim(dim)[i..i + m], target.dim(dim))?;
                for (acc, v) in brute.iter_mut().zip(p.values) {
                    *acc += v;
                }
            }
            for (a, b) in out.iter().zip(&brute) {
                worst = worst.max(rel_err(*a, *b));
            }
            i += 1;
        }
        rows += i;
    }
    Ok(outcome(worst <= PROFILE_TOL, format!("100 instances, {rows} rows, max rel err {worst:.2e} (tol {PROFILE_TOL:.0e})"), 60))
}

/// Quadratic oracle: every pairwise distance from `znorm_distance`, then
/// repeated lowest-distance picks (lowest index on ties), each pick and the
/// query itself blocking `[j − ⌊m/2⌋, j + ⌈m/2⌉)`.
fn oracle_graph(query: &TimeSeries, target: &TimeSeries, m: usize, k: usize, self_join: bool) -> Vec<usize> {
    let nq = query.len() - m + 1;
    let nt = target.len() - m + 1;
    let blocked = |c: usize, j: usize| j + m / 2 >= c && j < c + m.div_ceil(2);
    let mut out = Vec::with_capacity(nq * k);
    for i in 0..nq {
        let dist: Vec<f64> = (0..nt)
            .map(|j| (0..query.n_dims()).map(|d| znorm_distance(&query.dim(d)[i..i + m], &target.dim(d)[j..j + m]).unwrap()).sum())
            .collect();
        let mut taken: Vec<usize> = if self_join { vec![i] } else { Vec::new() };
        for _ in 0..k {
            let mut best: Option<usize> = None;
            for (j, &dj) in dist.iter().enumerate() {
                if taken.iter().any(|&c| blocked(c, j)) {
                    continue;
                }
                if best.is_none_or(|b| dj < dist[b]) {
                    best = Some(j);
                }
            }
            let b = best.expect("oracle ran out of candidates");
            out.push(b);
            taken.push(b);
        }
    }
    out
}

// 2. STOMP graphs against the quadratic oracle.
fn graphs() -> Result<Outcome> {
    let mut r = rng(2);
    let mut mismatched = 0;
    let mut zone_violations = 0;
    let mut rows = 0;
    for inst in 0..50 {
        let m = r.random_range(4..=24);
        let k = r.random_range(1..=4);
        let d = if inst % 5 == 4 { 2 } else { 1 };
        let n = r.random_range(80..=220);
        let series = random_series(n, d, &mut r);
        let (g, want): (KnnGraph, Vec<usize>) = if inst % 2 == 0 {
            let threads = Some(1 + inst % 3);
            (knn_stomp_self_with(&series, m, k, BuildOptions { threads })?, oracle_graph(&series, &series, m, k, true))
        } else {
            let target = random_series(r.random_range(m + 4 * m..=200), d, &mut r);
            (knn_stomp_cross_with(&series, &target, m, k, BuildOptions { threads: Some(2) })?, oracle_graph(&series, &target, m, k, false))
        };
        if g.indices() != want.as_slice() {
            mismatched += 1;
        }
        if inst % 2 == 0 {
            for (i, row) in g.rows().enumerate() {
                zone_violations += row.iter().filter(|&&j| j.abs_diff(i) < m / 2).count();
            }
        }
        rows += g.n_rows();
    }
    Ok(outcome(
        mismatched == 0 && zone_violations == 0,
        format!("50 instances, {rows} rows, {mismatched} mismatched graphs, {zone_violations} exclusion-zone violations"),
        120,
    ))
}

// 3. Runtime ordering and quadratic scaling of the builders.
fn runtime() -> Result<Outcome> {
    let (m, k) = (100, 5);
    let naive = time_builder(Builder::Naive, 3000, m, k, 1, 3, Some(1))?;
    let stomp3 = time_builder(Builder::Stomp, 3000, m, k, 5, 3, Some(1))?;
    let speedup = naive.median / stomp3.median;
    // Scaling is read off single-threaded medians of 5.
    let t1 = time_builder(Builder::Stomp, 1000, m, k, 5, 4, Some(1))?;
    let t2 = time_builder(Builder::Stomp, 2000, m, k, 5, 4, Some(1))?;
    let ratio = t2.median / t1.median;
    let pass = speedup >= 50.0 && (3.0..=6.0).contains(&ratio);
    Ok(outcome(
        pass,
        format!(
            "n=3000 m=100 k=5: naive {:.3}s, stomp {:.4}s, speedup {speedup:.0}× (need ≥ 50); stomp n=1000 {:.4}s, n=2000 {:.4}s, ratio {ratio:.2} (need 3–6)",
            naive.median, stomp3.median, t1.median, t2.median
        ),
        1800,
    ))
}

fn values(n: usize, r: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn param(shape: &[usize], r: &mut impl Rng) -> Tensor {
    Tensor::param(shape, values(shape.iter().product(), r)).unwrap()
}

fn constant(shape: &[usize], r: &mut impl Rng) -> Tensor {
    Tensor::new(shape, values(shape.iter().product(), r)).unwrap()
}

fn probe(out: Result<Tensor>, w: &Tensor) -> Result<Tensor> {
    Ok(out?.mul(w)?.sum())
}

fn store_params(store: &ParameterStore) -> Vec<Tensor> {
    store.iter().map(|(_, t)| t.clone()).collect()
}

type Builder0 = Box<dyn Fn(&mut ChaCha8Rng) -> Instance>;

fn op_suites() -> Vec<(&'static str, Option<usize>, Builder0)> {
    vec![
        ("add/sub/mul", None, Box::new(|r| {
            let (a, b, c) = (param(&[3, 1, 4], r), param(&[2, 4], r), param(&[3, 2, 4], r));
            let w = constant(&[3, 2, 4], r);
            let (a2, b2, c2) = (a.clone(), b.clone(), c.clone());
            (vec![a, b, c], Box::new(move || probe(a2.add(&b2)?.mul(&c2)?.sub(&b2)?.mul(&a2), &w)))
        })),
        ("scale/relu/sum", None, Box::new(|r| {
            let a = param(&[5, 3], r);
            let w = constant(&[5, 3], r);
            let a2 = a.clone();
            (vec![a], Box::new(move || Ok(a2.scale(-1.7).relu().mul(&w)?.sum().scale(0.3))))
        })),
        ("reshape/permute/transpose/narrow/concat/mean_axis", None, Box::new(|r| {
            let (a, b) = (param(&[2, 3, 4], r), param(&[2, 2, 4], r));
            let w = constant(&[4, 2, 3], r);
            let (a2, b2) = (a.clone(), b.clone());
            (vec![a, b], Box::new(move || {
                let cat = Tensor::concat(&[a2.clone(), b2.clone()], 1)?;
                let per = cat.narrow(1, 1, 3)?.permute(&[2, 0, 1])?.reshape(&[4, 2, 3])?;
                let mean = cat.mean_axis(1)?.transpose(0, 1)?.reshape(&[4, 2, 1])?;
                probe(per.mul(&mean), &w)
            }))
        })),
        ("gather_rows", None, Box::new(|r| {
            let t = param(&[5, 3], r);
            let w = constant(&[6, 3], r);
            let idx: Vec<usize> = (0..6).map(|_| r.random_range(0..5)).collect();
            let t2 = t.clone();
            (vec![t], Box::new(move || probe(t2.gather_rows(&idx), &w)))
        })),
        ("matmul", None, Box::new(|r| {
            let (a, b) = (param(&[2, 3, 4], r), param(&[2, 4, 5], r));
            let w = constant(&[2, 3, 5], r);
            let (a2, b2) = (a.clone(), b.clone());
            (vec![a, b], Box::new(move || probe(a2.matmul(&b2), &w)))
        })),
        ("matmul (blocked kernel)", None, Box::new(|r| {
            let (a, b) = (param(&[3, 20, 24], r), param(&[24, 21], r));
            let w = constant(&[3, 20, 21], r);
            let (a2, b2) = (a.clone(), b.clone());
            (vec![a, b], Box::new(move || probe(a2.matmul(&b2), &w)))
        })),
        ("softmax", None, Box::new(|r| {
            let a = param(&[3, 6], r);
            let w = constant(&[3, 6], r);
            let a2 = a.clone();
            (vec![a], Box::new(move || probe(a2.softmax(), &w)))
        })),
        ("layer_norm", None, Box::new(|r| {
            let (x, g, b) = (param(&[4, 7], r), param(&[7], r), param(&[7], r));
            let w = constant(&[4, 7], r);
            let (x2, g2, b2) = (x.clone(), g.clone(), b.clone());
            (vec![x, g, b], Box::new(move || probe(x2.layer_norm(&g2, &b2, 1e-5), &w)))
        })),
        ("conv1d", None, Box::new(|r| {
            let (stride, pad, width) = [(1, 1, 3), (2, 3, 7), (1, 0, 1), (3, 2, 5)][r.random_range(0..4)];
            let (x, k, b) = (param(&[2, 3, 9], r), param(&[4, 3, width], r), param(&[4], r));
            let w = constant(&[2, 4, (9 + 2 * pad - width) / stride + 1], r);
            let (x2, k2, b2) = (x.clone(), k.clone(), b.clone());
            (vec![x, k, b], Box::new(move || probe(x2.conv1d(&k2, Some(&b2), stride, pad), &w)))
        })),
        ("cross_entropy", None, Box::new(|r| {
            let x = param(&[5, 4], r);
            let t: Vec<usize> = (0..5).map(|_| r.random_range(0..4)).collect();
            let x2 = x.clone();
            (vec![x], Box::new(move || x2.scale(3.0).cross_entropy(&t)))
        })),
        ("multi-head attention", None, Box::new(|r| {
            let mut store = ParameterStore::new();
            let mha = MultiHeadAttention::new(&mut store, "mha", 8, 2, r).unwrap();
            let x = param(&[2, 3, 8], r);
            let w = constant(&[2, 3, 8], r);
            let mut params = store_params(&store);
            params.push(x.clone());
            (params, Box::new(move || probe(mha.forward(&x), &w)))
        })),
        ("two transformer blocks", None, Box::new(|r| {
            let mut store = ParameterStore::new();
            let b1 = TransformerBlock::new(&mut store, "b1", 8, 2, 12, r).unwrap();
            let b2 = TransformerBlock::new(&mut store, "b2", 8, 2, 12, r).unwrap();
            let x = param(&[2, 3, 8], r);
            let w = constant(&[2, 3, 8], r);
            let mut params = store_params(&store);
            params.push(x.clone());
            (params, Box::new(move || probe(b2.forward(&b1.forward(&x)?), &w)))
        })),
    ]
}

fn model_suites() -> Vec<(&'static str, Option<usize>, Builder0)> {
    let mut out: Vec<(&'static str, Option<usize>, Builder0)> = Vec::new();
    for (kind, bb_name, ego_name) in [
        (BackboneKind::Resnet, "resnet backbone", "ego-network (resnet)"),
        (BackboneKind::Transformer, "transformer backbone", "ego-network (transformer)"),
    ] {
        out.push((bb_name, Some(2), Box::new(move |r| {
            let mut store = ParameterStore::new();
            let bb = Backbone::new(&mut store, "bb", &BackboneConfig::new(kind, 2), r).unwrap();
            let x = param(&[2, 2, 9], r);
            let w = constant(&[2, 128], r);
            let mut params = store_params(&store);
            params.push(x.clone());
            (params, Box::new(move || probe(bb.forward(&x), &w)))
        })));
        out.push((ego_name, Some(2), Box::new(move |r| {
            let mut store = ParameterStore::new();
            let net = EgoNet::new(&mut store, &BackboneConfig::new(kind, 1), 2, 3, r).unwrap();
            let batch = EgoBatch {
                focal: constant(&[2, 1, 8], r),
                neighbors: constant(&[2, 2, 1, 8], r),
                neighbor_labels: (0..4).map(|_| r.random_range(0..3)).collect(),
            };
            let targets: Vec<usize> = (0..2).map(|_| r.random_range(0..3)).collect();
            (store_params(&store), Box::new(move || net.forward(&batch)?.cross_entropy(&targets)))
        })));
    }
    out
}

// 4. Finite-difference gradient suites.
fn gradients() -> Result<Outcome> {
    const INSTANCES: usize = 20;
    let mut failures = Vec::new();
    let mut worst: (f64, &str) = (0.0, "");
    let mut rejected = 0;
    let mut suites = 0;
    for (si, (name, coords, build)) in op_suites().into_iter().chain(model_suites()).enumerate() {
        let report: SuiteReport = run_suite(INSTANCES, coords, |seed| build(&mut rng(10_000 * si as u64 + seed)), &mut rng(si as u64))?;
        suites += 1;
        rejected += report.rejected;
        if report.max_rel_err > worst.0 {
            worst = (report.max_rel_err, name);
        }
        if report.accepted < INSTANCES || report.max_rel_err > GRAD_TOL {
            failures.push(format!("{name} ({} accepted, err {:.2e})", report.accepted, report.max_rel_err));
        }
    }
    let detail = format!(
        "{suites} suites × {INSTANCES} instances, worst rel err {:.2e} in {} (tol {GRAD_TOL:.0e}), {rejected} kink draws replaced{}",
        worst.0,
        worst.1,
        if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
    );
    Ok(outcome(failures.is_empty(), detail, 300))
}

// 5. Neighbor-order invariance of the ego-network.
fn permutation() -> Result<Outcome> {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for pair in 0..100 {
        let kind = if pair % 2 == 0 { BackboneKind::Transformer } else { BackboneKind::Resnet };
        let k = r.random_range(2..=6);
        let m = r.random_range(8..=24);
        let b = r.random_range(1..=3);
        let n_classes = r.random_range(2..=4);
        let mut store = ParameterStore::new();
        let net = EgoNet::new(&mut store, &BackboneConfig::new(kind, 1), k, n_classes, &mut r)?;
        let batch = EgoBatch {
            focal: constant(&[b, 1, m], &mut r),
            neighbors: constant(&[b, k, 1, m], &mut r),
            neighbor_labels: (0..b * k).map(|_| r.random_range(0..n_classes)).collect(),
        };
        let data = batch.neighbors.to_vec();
        let mut shuffled = Vec::with_capacity(data.len());
        let mut labels = Vec::with_capacity(b * k);
        for i in 0..b {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut r);
            for p in perm {
                shuffled.extend_from_slice(&data[(i * k + p) * m..][..m]);
                labels.push(batch.neighbor_labels[i * k + p]);
            }
        }
        let moved = EgoBatch { focal: batch.focal.clone(), neighbors: Tensor::new(&[b, k, 1, m], shuffled)?, neighbor_labels: labels };
        let (x, y) = (net.forward(&batch)?.to_vec(), net.forward(&moved)?.to_vec());
        for (a, c) in x.iter().zip(&y) {
            worst = worst.max((a - c).abs());
        }
    }
    Ok(outcome(worst <= PERM_TOL, format!("100 pairs, max |Δlogit| {worst:.2e} (tol {PERM_TOL:.0e})"), 60))
}

// 6. Smoothing example, onset-F1 symmetry, matching threshold.
fn postprocess_and_metrics() -> Result<Outcome> {
    let smoothed = smooth_labels(&[0, 1, 1, 0, 2, 2, 2, 0, 1, 0], 3)?;
    let example = smoothed == [0, 1, 1, 1, 2, 2, 2, 0, 0, 0];

    let mut r = rng(6);
    let mut asymmetric = 0;
    for _ in 0..100 {
        let n = r.random_range(20..200);
        let mut gen = || -> Vec<usize> {
            let mut v = Vec::with_capacity(n);
            while v.len() < n {
                let c = if r.random_bool(0.5) { 0 } else { r.random_range(1..4) };
                let run = r.random_range(1..12);
                v.extend(std::iter::repeat_n(c, run));
            }
            v.truncate(n);
            v
        };
        let (a, b) = (gen(), gen());
        let m_med = r.random_range(1..30);
        let ab = onset_f1(&a, &b, m_med)?;
        let ba = onset_f1(&b, &a, m_med)?;
        if ab.precision != ba.recall || ab.recall != ba.precision || ab.f1 != ba.f1 {
            asymmetric += 1;
        }
    }

    // m_med = 50, so onsets match within 0.1·50 = 5 steps: 4 apart matches, 6 apart does not.
    let truth: Vec<usize> = [vec![0; 20], vec![1; 50], vec![0; 30]].concat();
    let shifted = |by: usize| -> Vec<usize> { [vec![0; 20 + by], vec![1; 50], vec![0; 30 - by]].concat() };
    let m_med = median_foreground_length(&truth)?;
    let inside = onset_f1(&shifted(4), &truth, m_med)?.f1;
    let outside = onset_f1(&shifted(6), &truth, m_med)?.f1;
    let boundary = m_med == 50 && inside == 1.0 && outside == 0.0;

    Ok(outcome(
        example && asymmetric == 0 && boundary,
        format!(
            "example → {smoothed:?} ({}), {asymmetric}/100 asymmetric pairs, boundary f1 at 4/6 steps = {inside}/{outside}",
            if example { "ok" } else { "wrong" }
        ),
        10,
    ))
}

struct RunScores {
    raw: f64,
    smoothed: f64,
}

fn planted() -> Result<PlantedDataset> {
    planted_motif_dataset(&PlantedConfig::new(3, 40, 32, 0.25, 7))
}

fn end_to_end_cfg(model: ModelKind, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(32, 5);
    cfg.model = model;
    cfg.backbone = BackboneKind::Transformer;
    cfg.epochs = 10;
    cfg.valid_every = 5;
    cfg.seed = seed;
    cfg
}

fn run_method(ds: &PlantedDataset, model: ModelKind, seed: u64) -> Result<RunScores> {
    let (train_s, train_l) = (&ds.train.series, &ds.train.labels);
    let (model, _) = train(train_s, train_l, Some((&ds.valid.series, &ds.valid.labels)), &end_to_end_cfg(model, seed))?;
    let raw = infer(&ds.test.series, train_s, train_l, &model, None)?;
    let smoothed = model.smooth(&raw)?;
    let truth = ds.test.labels.labels();
    let m_med = median_foreground_length(truth)?;
    Ok(RunScores { raw: onset_f1(raw.labels(), truth, m_med)?.f1, smoothed: onset_f1(smoothed.labels(), truth, m_med)?.f1 })
}

const SEEDS: u64 = 5;

struct EndToEnd {
    ego: Vec<RunScores>,
    baseline: Vec<RunScores>,
}

fn end_to_end() -> Result<EndToEnd> {
    let ds = planted()?;
    let mut ego = Vec::new();
    let mut baseline = Vec::new();
    for seed in 0..SEEDS {
        ego.push(run_method(&ds, ModelKind::Ego, seed)?);
        baseline.push(run_method(&ds, ModelKind::Baseline, seed)?);
    }
    Ok(EndToEnd { ego, baseline })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

// 7. Planted dataset end to end.
fn planted_check(e: &EndToEnd) -> Outcome {
    let ego0 = &e.ego[0];
    let base0 = &e.baseline[0];
    let a = ego0.smoothed >= 0.85;
    let b = ego0.smoothed >= base0.smoothed;
    let means = |runs: &[RunScores]| (mean(runs.iter().map(|s| s.raw)), mean(runs.iter().map(|s| s.smoothed)));
    let (ego_raw, ego_sm) = means(&e.ego);
    let (base_raw, base_sm) = means(&e.baseline);
    let c = ego_sm >= ego_raw && base_sm >= base_raw;
    let fmt = |runs: &[RunScores]| runs.iter().map(|s| format!("{:.3}/{:.3}", s.raw, s.smoothed)).collect::<Vec<_>>().join(" ");
    outcome(
        a && b && c,
        format!(
            "(a) ego f1 {:.4} ≥ 0.85: {}; (b) ego {:.4} ≥ baseline {:.4}: {}; (c) mean raw→smoothed over {SEEDS} seeds: ego {ego_raw:.4}→{ego_sm:.4}, baseline {base_raw:.4}→{base_sm:.4}: {}; per-seed raw/smoothed ego [{}] baseline [{}]",
            ego0.smoothed, a, ego0.smoothed, base0.smoothed, b, c, fmt(&e.ego), fmt(&e.baseline)
        ),
        1200,
    )
}

// 8. Same seed, same scores.
fn determinism(e: &EndToEnd) -> Result<Outcome> {
    let ds = planted()?;
    let ego = run_method(&ds, ModelKind::Ego, 0)?;
    let base = run_method(&ds, ModelKind::Baseline, 0)?;
    let same = |x: &RunScores, y: &RunScores| x.raw.to_bits() == y.raw.to_bits() && x.smoothed.to_bits() == y.smoothed.to_bits();
    let pass = same(&ego, &e.ego[0]) && same(&base, &e.baseline[0]);
    Ok(outcome(
        pass,
        format!(
            "seed 0 rerun: ego {:.6}/{:.6} vs {:.6}/{:.6}, baseline {:.6}/{:.6} vs {:.6}/{:.6}",
            ego.raw, ego.smoothed, e.ego[0].raw, e.ego[0].smoothed, base.raw, base.smoothed, e.baseline[0].raw, e.baseline[0].smoothed
        ),
        600,
    ))
}

fn report(n: usize, name: &str, started: Instant, res: Result<Outcome>) -> bool {
    let took = started.elapsed();
    match res {
        Ok(o) => {
            let in_time = took <= o.budget;
            let pass = o.pass && in_time;
            let budget = if in_time { String::new() } else { format!(" [over budget of {}s]", o.budget.as_secs()) };
            println!("{} {n}. {name}: {} ({:.1}s){budget}", if pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
            pass
        }
        Err(e) => {
            println!("FAIL {n}. {name}: error: {e} ({:.1}s)", took.as_secs_f64());
            false
        }
    }
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut ok = true;
    type Check = fn() -> Result<Outcome>;
    let simple: [(usize, &str, Check); 6] = [
        (1, "distance-profile oracle", profiles),
        (2, "graph oracle", graphs),
        (3, "graph builder runtime", runtime),
        (4, "gradient suite", gradients),
        (5, "ego-network permutation invariance", permutation),
        (6, "post-processing and metric vectors", postprocess_and_metrics),
    ];
    for (n, name, check) in simple {
        if on(n) {
            let t = Instant::now();
            ok &= report(n, name, t, check());
        }
    }
    if on(7) || on(8) {
        let t = Instant::now();
        match end_to_end() {
            Ok(e) => {
                ok &= report(7, "planted dataset end to end", t, Ok(planted_check(&e)));
                if on(8) {
                    let t = Instant::now();
                    ok &= report(8, "determinism", t, determinism(&e));
                }
            }
            Err(err) => {
                ok &= report(7, "planted dataset end to end", t, Err(err));
                if on(8) {
                    println!("FAIL 8. determinism: end-to-end run failed");
                    ok = false;
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
