//! Turns classification instances into continuous labeled series: each
//! instance is wrapped in random-walk background and the expanded instances
//! are chained, with offsets adjusted so no junction shows a step. Also
//! generates a planted-motif benchmark.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{LabelSeries, TimeSeries, BACKGROUND};

/// A foreground segment: `d` dimensions of equal length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub series: Vec<Vec<f64>>,
    pub class: usize,
}

impl Instance {
    pub fn new(series: Vec<Vec<f64>>, class: usize) -> Result<Self> {
        let len = series.first().map_or(0, Vec::len);
        if len < 2 || series.iter().any(|d| d.len() != len) {
            return Err(Error::Shape("instance needs ≥ 2 steps in every dimension, all of equal length".into()));
        }
        if class == BACKGROUND {
            return Err(Error::Config("instance class must be a foreground class (≥ 1)".into()));
        }
        Ok(Instance { series, class })
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_dims(&self) -> usize {
        self.series.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisRecipe {
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    /// Background length as a multiple of the instance length.
    pub background_factor: usize,
    /// Minimum fraction of a window that must be one class's foreground.
    pub label_threshold: f64,
}

impl Default for SynthesisRecipe {
    fn default() -> Self {
        SynthesisRecipe {
            split: [0.6, 0.2, 0.2],
            background_factor: 2,
            label_threshold: 0.6,
        }
    }
}

impl SynthesisRecipe {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.split.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.split.iter().any(|&r| r < 0.0) {
            return Err(Error::Config(format!("split ratios {:?} must be non-negative and sum to 1", self.split)));
        }
        if !(self.label_threshold > 0.0 && self.label_threshold <= 1.0) {
            return Err(Error::Config(format!("label threshold {} must be in (0, 1]", self.label_threshold)));
        }
        if self.background_factor == 0 {
            return Err(Error::Config("background factor must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Cumulative sum of i.i.d. standard normal steps.
pub fn random_walk(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut acc = 0.0;
    (0..len)
        .map(|_| {
            let step: f64 = StandardNormal.sample(rng);
            acc += step;
            acc
        })
        .collect()
}

/// Appends `piece` shifted so its first value equals the current last value.
fn append_stitched(out: &mut Vec<f64>, piece: &[f64]) {
    let shift = match (out.last(), piece.first()) {
        (Some(&last), Some(&first)) => last - first,
        _ => 0.0,
    };
    out.extend(piece.iter().map(|v| v + shift));
}

/// A per-dimension series with its per-step foreground class (0 for
/// background).
#[derive(Debug, Clone, PartialEq)]
pub struct Expanded {
    pub series: Vec<Vec<f64>>,
    pub mask: Vec<usize>,
}

/// Wraps an instance in `background_factor · L` steps of random walk, cut at
/// a uniform position in `0..=background_factor · L`.
pub fn expand_instance(inst: &Instance, recipe: &SynthesisRecipe, rng: &mut impl Rng) -> Expanded {
    let len = inst.len();
    let bg_len = recipe.background_factor * len;
    let cut = rng.random_range(0..=bg_len);
    let mut series = Vec::with_capacity(inst.n_dims());
    for fg in &inst.series {
        let bg = random_walk(bg_len, rng);
        let mut out = Vec::with_capacity(bg_len + len);
        out.extend_from_slice(&bg[..cut]);
        append_stitched(&mut out, fg);
        append_stitched(&mut out, &bg[cut..]);
        series.push(out);
    }
    let mut mask = vec![BACKGROUND; bg_len + len];
    mask[cut..cut + len].fill(inst.class);
    Expanded { series, mask }
}

/// Chains expanded pieces with offset stitching per dimension.
pub fn concatenate(pieces: &[Expanded]) -> Result<Expanded> {
    let d = pieces
        .first()
        .ok_or_else(|| Error::Config("nothing to concatenate".into()))?
        .series
        .len();
    if pieces.iter().any(|p| p.series.len() != d) {
        return Err(Error::Shape("pieces differ in dimensionality".into()));
    }
    let mut series = vec![Vec::new(); d];
    let mut mask = Vec::new();
    for p in pieces {
        for (out, dim) in series.iter_mut().zip(&p.series) {
            append_stitched(out, dim);
        }
        mask.extend_from_slice(&p.mask);
    }
    Ok(Expanded { series, mask })
}

/// Label of every window start: class `c` when at least
/// `threshold · m` of the window's steps are class-`c` foreground.
pub fn window_labels(mask: &[usize], m: usize, threshold: f64, n_classes: usize) -> Result<Vec<usize>> {
    if m == 0 || m > mask.len() {
        return Err(Error::Bounds(format!("window length {m} does not fit a series of length {}", mask.len())));
    }
    let need = threshold * m as f64 - 1e-9;
    let mut counts = vec![0usize; n_classes];
    for &c in &mask[..m] {
        counts[c] += 1;
    }
    let pick = |counts: &[usize]| {
        (1..n_classes)
            .filter(|&c| counts[c] as f64 >= need)
            .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
            .unwrap_or(BACKGROUND)
    };
    let mut labels = Vec::with_capacity(mask.len() - m + 1);
    labels.push(pick(&counts));
    for s in 1..=mask.len() - m {
        counts[mask[s - 1]] -= 1;
        counts[mask[s + m - 1]] += 1;
        labels.push(pick(&counts));
    }
    Ok(labels)
}

/// Expands and chains `instances` in the given order, then labels every
/// window of length `m`.
pub fn synthesize_split(
    name: &str,
    instances: &[Instance],
    recipe: &SynthesisRecipe,
    m: usize,
    n_classes: usize,
    rng: &mut impl Rng,
) -> Result<(TimeSeries, LabelSeries)> {
    recipe.validate()?;
    if let Some(bad) = instances.iter().find(|i| i.class >= n_classes) {
        return Err(Error::Config(format!("instance class {} exceeds {n_classes} classes", bad.class)));
    }
    let pieces: Vec<Expanded> = instances.iter().map(|i| expand_instance(i, recipe, rng)).collect();
    let joined = concatenate(&pieces)?;
    let labels = window_labels(&joined.mask, m, recipe.label_threshold, n_classes)?;
    Ok((
        TimeSeries::new(name, joined.series)?,
        LabelSeries::new(labels, n_classes)?,
    ))
}

/// Waveform planted for each foreground class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    Sine,
    Square,
    Sawtooth,
    Triangle,
    Chirp,
    Pulse,
}

const TEMPLATES: [Template; 6] = [
    Template::Sine,
    Template::Square,
    Template::Sawtooth,
    Template::Triangle,
    Template::Chirp,
    Template::Pulse,
];

impl Template {
    pub fn for_class(class: usize) -> Self {
        TEMPLATES[(class - 1) % TEMPLATES.len()]
    }

    /// Value at phase `u ∈ [0, 1)` of the segment, in `[-1, 1]`. Classes
    /// beyond the template list repeat with more periods.
    fn value(self, u: f64, periods: f64) -> f64 {
        let p = (u * periods).fract();
        match self {
            Template::Sine => (2.0 * std::f64::consts::PI * p).sin(),
            Template::Square => {
                if p < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Template::Sawtooth => 2.0 * p - 1.0,
            Template::Triangle => 1.0 - 4.0 * (p - 0.5).abs(),
            Template::Chirp => (2.0 * std::f64::consts::PI * periods * u * u).sin(),
            Template::Pulse => {
                if (0.4..0.6).contains(&p) {
                    1.0
                } else {
                    -0.25
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedConfig {
    /// Number of foreground classes; labels run 1..=n_foreground.
    pub n_foreground: usize,
    /// Instances per foreground class.
    pub runs: usize,
    pub m: usize,
    /// Foreground length; defaults to ⌈1.5·m⌉.
    pub instance_len: Option<usize>,
    pub dims: usize,
    pub amplitude: f64,
    /// Template periods per instance.
    pub periods: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(n_foreground: usize, runs: usize, m: usize, noise_std: f64, seed: u64) -> Self {
        PlantedConfig {
            n_foreground,
            runs,
            m,
            instance_len: None,
            dims: 1,
            amplitude: 4.0,
            periods: 4.0,
            noise_std,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.instance_len.unwrap_or((3 * self.m).div_ceil(2))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub series: TimeSeries,
    pub labels: LabelSeries,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub train: Split,
    pub valid: Split,
    pub test: Split,
    pub config: PlantedConfig,
    pub recipe: SynthesisRecipe,
}

#[derive(Debug, Serialize)]
pub struct DatasetManifest<'a> {
    pub config: &'a PlantedConfig,
    pub recipe: &'a SynthesisRecipe,
    pub n_classes: usize,
    pub templates: Vec<(usize, Template)>,
    pub splits: Vec<SplitSummary>,
}

#[derive(Debug, Serialize)]
pub struct SplitSummary {
    pub name: String,
    pub length: usize,
    pub instances_per_class: Vec<usize>,
}

impl PlantedDataset {
    pub fn n_classes(&self) -> usize {
        self.config.n_foreground + 1
    }

    pub fn splits(&self) -> [(&'static str, &Split); 3] {
        [("train", &self.train), ("valid", &self.valid), ("test", &self.test)]
    }

    pub fn manifest(&self) -> DatasetManifest<'_> {
        DatasetManifest {
            config: &self.config,
            recipe: &self.recipe,
            n_classes: self.n_classes(),
            templates: (1..=self.config.n_foreground).map(|c| (c, Template::for_class(c))).collect(),
            splits: self
                .splits()
                .iter()
                .map(|(name, s)| SplitSummary {
                    name: name.to_string(),
                    length: s.series.len(),
                    instances_per_class: s.counts.clone(),
                })
                .collect(),
        }
    }
}

/// One noisy, randomly scaled copy of a class template. Each dimension gets
/// its own phase offset.
fn planted_instance(cfg: &PlantedConfig, class: usize, rng: &mut impl Rng) -> Result<Instance> {
    let len = cfg.len();
    let template = Template::for_class(class);
    let periods = cfg.periods + ((class - 1) / TEMPLATES.len()) as f64;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let scale = cfg.amplitude * rng.random_range(0.8..1.2);
    let series = (0..cfg.dims)
        .map(|d| {
            let phase = d as f64 / cfg.dims as f64;
            (0..len)
                .map(|t| {
                    let u = (t as f64 / len as f64 + phase / periods).fract();
                    scale * template.value(u, periods) + noise.sample(rng)
                })
                .collect()
        })
        .collect();
    Instance::new(series, class)
}

/// Splits instances per class in the recipe's ratios (train and validation
/// counts rounded, the rest to test), then expands and chains each split in
/// shuffled order.
pub fn synthesize_dataset(
    instances: Vec<Instance>,
    n_classes: usize,
    recipe: &SynthesisRecipe,
    m: usize,
    rng: &mut impl Rng,
) -> Result<[Split; 3]> {
    recipe.validate()?;
    let mut by_class: Vec<Vec<Instance>> = vec![Vec::new(); n_classes];
    for inst in instances {
        let c = inst.class;
        by_class
            .get_mut(c)
            .ok_or_else(|| Error::Config(format!("instance class {c} exceeds {n_classes} classes")))?
            .push(inst);
    }
    let mut parts: [Vec<Instance>; 3] = Default::default();
    let mut counts = [vec![0; n_classes], vec![0; n_classes], vec![0; n_classes]];
    for (class, mut insts) in by_class.into_iter().enumerate() {
        let n = insts.len();
        insts.shuffle(rng);
        let n_train = ((recipe.split[0] * n as f64).round() as usize).min(n);
        let n_valid = ((recipe.split[1] * n as f64).round() as usize).min(n - n_train);
        let test = insts.split_off(n_train + n_valid);
        let valid = insts.split_off(n_train);
        for (i, chunk) in [insts, valid, test].into_iter().enumerate() {
            counts[i][class] += chunk.len();
            parts[i].extend(chunk);
        }
    }
    let names = ["train", "valid", "test"];
    let mut splits = Vec::with_capacity(3);
    for (i, mut insts) in parts.into_iter().enumerate() {
        if insts.is_empty() {
            return Err(Error::Config(format!("{} split is empty; more instances are needed", names[i])));
        }
        insts.shuffle(rng);
        let (series, labels) = synthesize_split(names[i], &insts, recipe, m, n_classes, rng)?;
        splits.push(Split { series, labels, counts: std::mem::take(&mut counts[i]) });
    }
    let [train, valid, test]: [Split; 3] = splits.try_into().expect("three splits");
    Ok([train, valid, test])
}

/// Reads instances from headerless CSV rows `label,v0,v1,…`: each instance
/// is `dims` consecutive rows sharing a label. Distinct labels are mapped to
/// classes 1, 2, … in sorted order; the returned names give the original
/// label of each class.
pub fn read_instances<R: std::io::Read>(source: &str, reader: R, dims: usize) -> Result<(Vec<Instance>, Vec<String>)> {
    if dims == 0 {
        return Err(Error::Config("instances need ≥ 1 dimension".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows: Vec<(String, Vec<f64>, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::parse(source, "csv", e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fields = record.iter().map(str::trim);
        let label = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source, format!("line {line}"), format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((label, values, line));
    }
    if rows.is_empty() || !rows.len().is_multiple_of(dims) {
        return Err(Error::parse(source, "end", format!("{} rows do not form instances of {dims} dimensions", rows.len())));
    }
    let mut names: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    names.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    });
    names.dedup();
    let mut instances = Vec::with_capacity(rows.len() / dims);
    for group in rows.chunks(dims) {
        let label = &group[0].0;
        if let Some(bad) = group.iter().find(|r| &r.0 != label) {
            return Err(Error::parse(source, format!("line {}", bad.2), "dimensions of one instance carry different labels"));
        }
        let class = names.iter().position(|n| n == label).expect("label collected") + 1;
        let series = group.iter().map(|r| r.1.clone()).collect();
        instances.push(
            Instance::new(series, class)
                .map_err(|e| Error::parse(source, format!("line {}", group[0].2), e.to_string()))?,
        );
    }
    Ok((instances, names))
}

/// Balanced planted-motif data, split per class in the recipe's ratios and
/// shuffled within each split.
pub fn planted_motif_dataset(cfg: &PlantedConfig) -> Result<PlantedDataset> {
    if cfg.n_foreground == 0 || cfg.runs == 0 || cfg.dims == 0 || cfg.m == 0 {
        return Err(Error::Config("planted dataset needs ≥ 1 class, run, dimension and m ≥ 1".into()));
    }
    if cfg.len() < 2 {
        return Err(Error::Config("instances need at least 2 steps".into()));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::Config(format!("noise std {} must be finite and ≥ 0", cfg.noise_std)));
    }
    let recipe = SynthesisRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.n_foreground * cfg.runs);
    for class in 1..=cfg.n_foreground {
        for _ in 0..cfg.runs {
            instances.push(planted_instance(cfg, class, &mut rng)?);
        }
    }
    let [train, valid, test] = synthesize_dataset(instances, cfg.n_foreground + 1, &recipe, cfg.m, &mut rng)?;
    Ok(PlantedDataset { train, valid, test, config: cfg.clone(), recipe })
}
