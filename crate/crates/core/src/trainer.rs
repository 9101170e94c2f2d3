//! Training and inference over k-NN subsequence graphs.
//!
//! Training samples ⌈n/m⌉ subsequence starts per epoch, looks up each
//! one's neighbors in the self-join graph of the training series and fits
//! the ego-network (or the neighbor-free baseline) with Adam. Every
//! subsequence is z-normalized per dimension before it reaches a network.
//! Inference joins each test subsequence against the training series.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::checkpoint::{parse_checkpoint, write_checkpoint};
use crate::autodiff::{no_grad, Adam, ParameterStore, Tensor};
use crate::backbones::{BackboneConfig, BackboneKind};
use crate::egonet::{predict_class, BackboneClassifier, EgoBatch, EgoNet};
use crate::error::{Error, Result};
use crate::knngraph::{knn_stomp_cross_with, knn_stomp_self_with, BuildOptions, KnnGraph};
use crate::metrics::{median_foreground_length, onset_f1};
use crate::postprocess::{select_window_by_validation, smooth_labels};
use crate::series::{LabelSeries, TimeSeries, BACKGROUND, ZNORM_EPS};

/// Subsequences encoded per no-grad forward pass during inference.
const INFER_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Focal subsequence plus its labeled neighbors.
    Ego,
    /// The backbone and a linear head, no neighbors.
    Baseline,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ego => "ego",
            ModelKind::Baseline => "baseline",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ego" => Ok(ModelKind::Ego),
            "baseline" => Ok(ModelKind::Baseline),
            other => Err(Error::Config(format!("unknown model `{other}` (expected ego or baseline)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub backbone: BackboneKind,
    pub m: usize,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Validate every this many epochs (and after the last one).
    pub valid_every: usize,
    /// Smoothing windows tried on the validation split; empty means
    /// `{1, ⌈m/4⌉, ⌈m/2⌉, m}`.
    pub window_candidates: Vec<usize>,
    /// Graph-construction workers; `None` uses every core.
    pub threads: Option<usize>,
}

impl TrainConfig {
    pub fn new(m: usize, k: usize) -> Self {
        TrainConfig {
            model: ModelKind::Ego,
            backbone: BackboneKind::Transformer,
            m,
            k,
            epochs: 50,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            patience: 10,
            valid_every: 1,
            window_candidates: Vec::new(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("k", self.k),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("valid_every", self.valid_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.window_candidates.contains(&0) {
            return Err(Error::Config("smoothing window candidates must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn windows(&self) -> Vec<usize> {
        if self.window_candidates.is_empty() {
            default_windows(self.m)
        } else {
            self.window_candidates.clone()
        }
    }
}

pub fn default_windows(m: usize) -> Vec<usize> {
    let mut w = vec![1, m.div_ceil(4), m.div_ceil(2), m];
    w.sort_unstable();
    w.dedup();
    w
}

/// ⌈n/m⌉ distinct subsequence starts drawn uniformly from `0..=n − m`.
pub fn sample_indices(n: usize, m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::Bounds(format!("subsequence length {m} does not fit length {n}")));
    }
    let n_sample = n.div_ceil(m);
    let n_starts = n - m + 1;
    if n_sample > n_starts {
        return Err(Error::Config(format!(
            "cannot draw {n_sample} distinct starts from {n_starts} subsequences"
        )));
    }
    Ok(sample(rng, n_starts, n_sample).into_vec())
}

/// Sampled subsequences with their labels and start indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    /// Each window dimension-major, `d · m` values.
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

pub fn sample_subsequences(series: &TimeSeries, labels: &LabelSeries, m: usize, rng: &mut impl Rng) -> Result<Sampled> {
    labels.check_matches(series, m)?;
    let indices = sample_indices(series.len(), m, rng)?;
    let windows = indices
        .iter()
        .map(|&i| series.extract_subsequence(i, m))
        .collect::<Result<_>>()?;
    let y = indices.iter().map(|&i| labels.labels()[i]).collect();
    Ok(Sampled { windows, labels: y, indices })
}

/// Neighbor windows and labels of graph rows, row-major `[rows, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub starts: Vec<usize>,
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn get_neighbors(graph: &KnnGraph, rows: &[usize], target: &TimeSeries, target_labels: &LabelSeries) -> Result<Neighbors> {
    labels_cover_graph(graph, target, target_labels)?;
    let mut starts = Vec::with_capacity(rows.len() * graph.k());
    for &r in rows {
        if r >= graph.n_rows() {
            return Err(Error::Bounds(format!("row {r} outside a graph of {} rows", graph.n_rows())));
        }
        starts.extend_from_slice(graph.row(r));
    }
    let windows = starts
        .iter()
        .map(|&j| target.extract_subsequence(j, graph.m()))
        .collect::<Result<_>>()?;
    let labels = starts.iter().map(|&j| target_labels.labels()[j]).collect();
    Ok(Neighbors { starts, windows, labels })
}

fn labels_cover_graph(graph: &KnnGraph, target: &TimeSeries, labels: &LabelSeries) -> Result<()> {
    labels.check_matches(target, graph.m())?;
    if let Some(&bad) = graph.indices().iter().find(|&&j| j >= labels.len()) {
        return Err(Error::Consistency(format!(
            "graph references subsequence {bad}, but the target has {} subsequences",
            labels.len()
        )));
    }
    Ok(())
}

/// `[starts.len(), d, m]` tensor of per-dimension z-normalized windows.
pub fn window_tensor(series: &TimeSeries, starts: &[usize], m: usize) -> Result<Tensor> {
    let d = series.n_dims();
    let mut data = Vec::with_capacity(starts.len() * d * m);
    for &s in starts {
        if s + m > series.len() {
            return Err(Error::Bounds(format!("window {s}..{} exceeds length {}", s + m, series.len())));
        }
        let at = data.len();
        series.push_subsequence(s, m, &mut data);
        for chunk in data[at..].chunks_mut(m) {
            znorm_in_place(chunk);
        }
    }
    Tensor::new(&[starts.len(), d, m], data)
}

fn znorm_in_place(x: &mut [f64]) {
    let (mean, std) = crate::series::mean_std(x);
    if std < ZNORM_EPS {
        x.fill(0.0);
    } else {
        x.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
}

/// Everything needed to rebuild a model's architecture, stored as the
/// checkpoint manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub kind: ModelKind,
    pub backbone: BackboneConfig,
    pub m: usize,
    pub k: usize,
    pub n_classes: usize,
    /// Smoothing window chosen on validation data.
    pub window: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Net {
    Ego(EgoNet),
    Baseline(BackboneClassifier),
}

#[derive(Debug, Clone)]
pub struct Model {
    pub manifest: ModelManifest,
    pub store: ParameterStore,
    net: Net,
}

impl Model {
    pub fn new(manifest: ModelManifest, rng: &mut impl Rng) -> Result<Self> {
        manifest.backbone.validate()?;
        let mut store = ParameterStore::new();
        let net = match manifest.kind {
            ModelKind::Ego => Net::Ego(EgoNet::new(&mut store, &manifest.backbone, manifest.k, manifest.n_classes, rng)?),
            ModelKind::Baseline => {
                Net::Baseline(BackboneClassifier::new(&mut store, &manifest.backbone, manifest.n_classes, rng)?)
            }
        };
        Ok(Model { manifest, store, net })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let manifest = serde_json::to_string(&self.manifest).map_err(|e| Error::Format(e.to_string()))?;
        write_checkpoint(w, &manifest, &self.store).map_err(|e| Error::io("<checkpoint>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn from_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let (manifest, records) = parse_checkpoint(bytes, source)?;
        let manifest: ModelManifest =
            serde_json::from_str(&manifest).map_err(|e| Error::parse(source, "manifest", e.to_string()))?;
        let model = Model::new(manifest, &mut ChaCha8Rng::seed_from_u64(0))?;
        model.store.load_named(&records)?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes, &path.display().to_string())
    }

    fn loss(&self, train: &TimeSeries, labels: &LabelSeries, graph: Option<&KnnGraph>, rows: &[usize]) -> Result<Tensor> {
        let m = self.manifest.m;
        let focal = window_tensor(train, rows, m)?;
        let targets: Vec<usize> = rows.iter().map(|&i| labels.labels()[i]).collect();
        let logits = match (&self.net, graph) {
            (Net::Ego(net), Some(g)) => {
                let mut starts = Vec::with_capacity(rows.len() * g.k());
                for &r in rows {
                    starts.extend_from_slice(g.row(r));
                }
                let nb = window_tensor(train, &starts, m)?;
                let (b, d) = (rows.len(), train.n_dims());
                let batch = EgoBatch {
                    focal,
                    neighbors: nb.reshape(&[b, g.k(), d, m])?,
                    neighbor_labels: starts.iter().map(|&j| labels.labels()[j]).collect(),
                };
                net.forward(&batch)?
            }
            (Net::Baseline(net), _) => net.forward(&focal)?,
            (Net::Ego(_), None) => return Err(Error::Config("the ego model needs a graph".into())),
        };
        logits.cross_entropy(&targets)
    }

    fn check_inputs(&self, query: &TimeSeries, train: &TimeSeries, train_labels: &LabelSeries) -> Result<()> {
        let d = self.manifest.backbone.input_dims;
        if query.n_dims() != d || train.n_dims() != d {
            return Err(Error::Consistency(format!(
                "checkpoint expects {d}-dimensional series, got {} (query) and {} (train)",
                query.n_dims(),
                train.n_dims()
            )));
        }
        if train_labels.n_classes() != self.manifest.n_classes {
            return Err(Error::Consistency(format!(
                "checkpoint has {} classes, training labels have {}",
                self.manifest.n_classes,
                train_labels.n_classes()
            )));
        }
        train_labels.check_matches(train, self.manifest.m)
    }

    /// Backbone embeddings for the ego model, logits for the baseline.
    fn embed_chunks(&self, series: &TimeSeries, starts: &[usize]) -> Result<Vec<Vec<f64>>> {
        let m = self.manifest.m;
        let mut out = Vec::with_capacity(starts.len());
        for chunk in starts.chunks(INFER_CHUNK) {
            let x = window_tensor(series, chunk, m)?;
            let emb = match &self.net {
                Net::Ego(net) => net.encode(&x)?,
                Net::Baseline(net) => net.forward(&x)?,
            };
            let width = emb.shape()[1];
            out.extend(emb.data().chunks(width).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    /// Predicted class for every row of `graph` (query subsequences), each
    /// joined with its neighbors in the training series. The baseline
    /// ignores the graph and classifies each query start directly.
    pub fn predict_rows(
        &self,
        query: &TimeSeries,
        rows: &[usize],
        graph: Option<&KnnGraph>,
        train: &TimeSeries,
        train_labels: &LabelSeries,
    ) -> Result<Vec<usize>> {
        self.check_inputs(query, train, train_labels)?;
        no_grad(|| match &self.net {
            Net::Baseline(_) => {
                let logits = self.embed_chunks(query, rows)?;
                Ok(logits.iter().map(|row| argmax(row)).collect())
            }
            Net::Ego(net) => {
                let g = graph.ok_or_else(|| Error::Config("the ego model needs a graph".into()))?;
                if g.k() != self.manifest.k || g.m() != self.manifest.m {
                    return Err(Error::Consistency(format!(
                        "graph has m = {}, k = {}; checkpoint expects m = {}, k = {}",
                        g.m(),
                        g.k(),
                        self.manifest.m,
                        self.manifest.k
                    )));
                }
                labels_cover_graph(g, train, train_labels)?;
                let k = g.k();
                let mut unique: Vec<usize> = rows.iter().flat_map(|&r| g.row(r).iter().copied()).collect();
                unique.sort_unstable();
                unique.dedup();
                let nb_emb = self.embed_chunks(train, &unique)?;
                let lookup: HashMap<usize, usize> = unique.iter().enumerate().map(|(i, &s)| (s, i)).collect();
                let e = net.embed_dim();
                let mut out = Vec::with_capacity(rows.len());
                for chunk in rows.chunks(INFER_CHUNK) {
                    let focal = self.embed_chunks(query, chunk)?;
                    let b = chunk.len();
                    let mut nb = Vec::with_capacity(b * k * e);
                    let mut labels = Vec::with_capacity(b * k);
                    for &r in chunk {
                        for &j in g.row(r) {
                            nb.extend_from_slice(&nb_emb[lookup[&j]]);
                            labels.push(train_labels.labels()[j]);
                        }
                    }
                    let focal = Tensor::new(&[b, e], focal.concat())?;
                    let nb = Tensor::new(&[b * k, e], nb)?;
                    out.extend(predict_class(&net.aggregate(&focal, &nb, &labels)?)?);
                }
                Ok(out)
            }
        })
    }

    /// Smooths raw predictions with the window chosen during training.
    pub fn smooth(&self, pred: &LabelSeries) -> Result<LabelSeries> {
        LabelSeries::new(smooth_labels(pred.labels(), self.manifest.window)?, pred.n_classes())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted labels for every subsequence start of `test`, each subsequence
/// classified from its `k` nearest training subsequences (unsmoothed).
pub fn infer(test: &TimeSeries, train: &TimeSeries, train_labels: &LabelSeries, model: &Model, threads: Option<usize>) -> Result<LabelSeries> {
    let m = model.manifest.m;
    let n_rows = test.n_subsequences(m)?;
    let rows: Vec<usize> = (0..n_rows).collect();
    let graph = match model.manifest.kind {
        ModelKind::Ego => Some(knn_stomp_cross_with(test, train, m, model.manifest.k, BuildOptions { threads })?),
        ModelKind::Baseline => None,
    };
    let pred = model.predict_rows(test, &rows, graph.as_ref(), train, train_labels)?;
    LabelSeries::new(pred, model.manifest.n_classes)
}

/// Per-validation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationPoint {
    pub epoch: usize,
    pub raw_f1: f64,
    pub smoothed_f1: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub validations: Vec<ValidationPoint>,
    /// Epoch whose parameters were kept (1-based; 0 when none was
    /// validated).
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    pub stopped_early: bool,
}

fn check_train_labels(labels: &LabelSeries) -> Result<()> {
    let y = labels.labels();
    if !y.contains(&BACKGROUND) || !y.iter().any(|&c| c != BACKGROUND) {
        return Err(Error::Config(
            "training labels need both background (0) and at least one foreground class".into(),
        ));
    }
    Ok(())
}

struct Validator<'a> {
    series: &'a TimeSeries,
    labels: &'a LabelSeries,
    graph: Option<KnnGraph>,
    rows: Vec<usize>,
    m_med: usize,
    windows: Vec<usize>,
}

impl Validator<'_> {
    fn run(&self, model: &Model, train: &TimeSeries, train_labels: &LabelSeries, epoch: usize) -> Result<ValidationPoint> {
        let pred = model.predict_rows(self.series, &self.rows, self.graph.as_ref(), train, train_labels)?;
        let truth = self.labels.labels();
        let raw_f1 = onset_f1(&pred, truth, self.m_med)?.f1;
        let window = select_window_by_validation(&pred, truth, &self.windows, self.m_med)?;
        let smoothed_f1 = onset_f1(&smooth_labels(&pred, window)?, truth, self.m_med)?.f1;
        Ok(ValidationPoint { epoch, raw_f1, smoothed_f1, window })
    }
}

/// Fits a model on `train`. With a validation split, the parameters with
/// the best smoothed validation onset F1 are kept and training stops after
/// `patience` epochs without improvement; without one, the final epoch is
/// kept and no smoothing window is chosen (window 1).
pub fn train(
    train: &TimeSeries,
    train_labels: &LabelSeries,
    valid: Option<(&TimeSeries, &LabelSeries)>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    train_labels.check_matches(train, cfg.m)?;
    check_train_labels(train_labels)?;
    let n_classes = train_labels.n_classes();
    let opts = BuildOptions { threads: cfg.threads };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let manifest = ModelManifest {
        kind: cfg.model,
        backbone: BackboneConfig::new(cfg.backbone, train.n_dims()),
        m: cfg.m,
        k: cfg.k,
        n_classes,
        window: 1,
        seed: cfg.seed,
    };
    let mut model = Model::new(manifest, &mut rng)?;
    let graph = match cfg.model {
        ModelKind::Ego => Some(knn_stomp_self_with(train, cfg.m, cfg.k, opts)?),
        ModelKind::Baseline => None,
    };
    let validator = match valid {
        Some((vs, vl)) => {
            vl.check_matches(vs, cfg.m)?;
            if vl.n_classes() != n_classes {
                return Err(Error::Consistency(format!(
                    "validation labels have {} classes, training labels {n_classes}",
                    vl.n_classes()
                )));
            }
            let graph = match cfg.model {
                ModelKind::Ego => Some(knn_stomp_cross_with(vs, train, cfg.m, cfg.k, opts)?),
                ModelKind::Baseline => None,
            };
            Some(Validator {
                series: vs,
                labels: vl,
                graph,
                rows: (0..vl.len()).collect(),
                m_med: median_foreground_length(vl.labels())?,
                windows: cfg.windows(),
            })
        }
        None => None,
    };
    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        validations: Vec::new(),
        best_epoch: 0,
        best_valid_f1: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best: Option<(Vec<Vec<f64>>, usize)> = None;
    for epoch in 1..=cfg.epochs {
        let indices = sample_indices(train.len(), cfg.m, &mut rng)?;
        let mut total = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            model.store.zero_grad();
            let loss = model.loss(train, train_labels, graph.as_ref(), batch)?;
            let l = loss.item();
            if !l.is_finite() {
                return Err(Error::Numerical(format!("training loss became {l} in epoch {epoch}")));
            }
            loss.backward()?;
            adam.step(&model.store)?;
            total += l * batch.len() as f64;
        }
        report.epoch_losses.push(total / indices.len() as f64);
        let Some(v) = &validator else { continue };
        if epoch % cfg.valid_every != 0 && epoch != cfg.epochs {
            continue;
        }
        let point = v.run(&model, train, train_labels, epoch)?;
        report.validations.push(point);
        if point.smoothed_f1 > report.best_valid_f1 {
            report.best_valid_f1 = point.smoothed_f1;
            report.best_epoch = epoch;
            best = Some((model.store.snapshot(), point.window));
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    if let Some((snapshot, window)) = best {
        model.store.restore(&snapshot)?;
        model.manifest.window = window;
    } else {
        report.best_epoch = report.epoch_losses.len();
        report.best_valid_f1 = f64::NAN;
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knngraph::GraphMode;
    use std::collections::HashSet;

    #[test]
    fn sample_sizes_and_distinctness() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = sample_indices(100, 10, &mut rng).unwrap();
        assert_eq!(idx.len(), 10);
        assert_eq!(idx.iter().collect::<HashSet<_>>().len(), 10);
        assert_eq!(sample_indices(10, 10, &mut rng).unwrap(), vec![0]);
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = sample_indices(57, 5, &mut rng).unwrap();
            assert_eq!(idx.len(), 12);
            assert!(idx.iter().all(|&i| i <= 52));
            assert_eq!(idx.iter().collect::<HashSet<_>>().len(), 12);
        }
        // ⌈11/10⌉ = 2 starts from only 2 windows is fine; 3 from 2 is not.
        assert_eq!(sample_indices(11, 10, &mut rng).unwrap().len(), 2);
        assert!(sample_indices(5, 6, &mut rng).is_err());
    }

    #[test]
    fn too_many_samples_rejected() {
        // n = 3, m = 2: ⌈3/2⌉ = 2 draws from 2 starts is fine.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_indices(3, 2, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn sampled_windows_match_labels() {
        let ts = TimeSeries::univariate("t", (0..40).map(f64::from).collect()).unwrap();
        let labels = LabelSeries::new((0..36).map(|i| usize::from(i >= 18)).collect(), 2).unwrap();
        let s = sample_subsequences(&ts, &labels, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(s.indices.len(), 8);
        for ((w, &y), &i) in s.windows.iter().zip(&s.labels).zip(&s.indices) {
            assert_eq!(w[0], i as f64);
            assert_eq!(y, usize::from(i >= 18));
        }
    }

    #[test]
    fn neighbor_lookup_matches_rows() {
        let ts = TimeSeries::univariate("t", (0..8).map(|v| f64::from(v) * 10.0).collect()).unwrap();
        let labels = LabelSeries::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        let g = KnnGraph::from_rows(GraphMode::SelfJoin, 3, 2, vec![3, 5, 4, 0, 5, 1]).unwrap();
        let nb = get_neighbors(&g, &[2, 0], &ts, &labels).unwrap();
        assert_eq!(nb.starts, vec![5, 1, 3, 5]);
        assert_eq!(nb.labels, vec![2, 1, 0, 2]);
        assert_eq!(nb.windows[0], vec![50.0, 60.0, 70.0]);
        assert_eq!(nb.windows[3], vec![50.0, 60.0, 70.0]);
        let one = get_neighbors(&g, &[1], &ts, &labels).unwrap();
        assert_eq!(one.starts, g.row(1));
        assert!(get_neighbors(&g, &[3], &ts, &labels).is_err());
    }

    #[test]
    fn window_tensor_is_normalized() {
        let ts = TimeSeries::new("t", vec![vec![1.0, 2.0, 3.0, 3.0], vec![5.0; 4]]).unwrap();
        let x = window_tensor(&ts, &[0, 1], 3).unwrap();
        assert_eq!(x.shape(), &[2, 2, 3]);
        let v = x.to_vec();
        let z = 1.5f64.sqrt();
        for (a, b) in v[..3].iter().zip([-z, 0.0, z]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(&v[3..6], &[0.0; 3]);
        assert!(window_tensor(&ts, &[2], 3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(16, 3);
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(16, 3);
        cfg.lr = f64::NAN;
        assert!(cfg.validate().is_err());
        assert_eq!(default_windows(32), vec![1, 8, 16, 32]);
        assert_eq!(default_windows(2), vec![1, 2]);
    }

    #[test]
    fn labels_need_background_and_foreground() {
        let ts = TimeSeries::univariate("t", (0..20).map(|v| f64::from(v).sin()).collect()).unwrap();
        let cfg = TrainConfig::new(4, 1);
        let all_bg = LabelSeries::new(vec![0; 17], 2).unwrap();
        assert!(matches!(train(&ts, &all_bg, None, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[0.5, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[3.0]), 0);
    }
}
