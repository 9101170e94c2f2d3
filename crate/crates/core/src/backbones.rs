//! Subsequence encoders: a residual CNN and a Transformer, both mapping
//! `[batch, d, m]` to a fixed-width representation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Conv1d, LayerNorm, Linear, ParameterStore, Tensor, TransformerBlock};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Resnet,
    Transformer,
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackboneKind::Resnet => "resnet",
            BackboneKind::Transformer => "transformer",
        })
    }
}

impl std::str::FromStr for BackboneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet" => Ok(BackboneKind::Resnet),
            "transformer" => Ok(BackboneKind::Transformer),
            other => Err(Error::Config(format!("unknown backbone `{other}` (expected resnet or transformer)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub input_dims: usize,
    pub model_dim: usize,
    pub out_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub n_tblocks: usize,
    pub n_rblocks: usize,
}

impl BackboneConfig {
    pub fn new(kind: BackboneKind, input_dims: usize) -> Self {
        BackboneConfig {
            kind,
            input_dims,
            model_dim: 64,
            out_dim: 128,
            heads: 8,
            ff_dim: 256,
            n_tblocks: 4,
            n_rblocks: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dims == 0 || self.model_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("backbone dimensions must be positive".into()));
        }
        if self.kind == BackboneKind::Transformer && (self.heads == 0 || !self.model_dim.is_multiple_of(self.heads)) {
            return Err(Error::Config(format!(
                "model_dim {} is not divisible by {} heads",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }
}

const ENTRY_WIDTH: usize = 7;
const ENTRY_STRIDE: usize = 2;
const ENTRY_PADDING: usize = 3;

/// Sequence length after the entry convolution, ⌈m/2⌉.
pub fn entry_length(m: usize) -> usize {
    (m + 2 * ENTRY_PADDING - ENTRY_WIDTH) / ENTRY_STRIDE + 1
}

/// Layer norm over the channel axis of `[batch, channels, len]`.
fn channel_norm(norm: &LayerNorm, x: &Tensor) -> Result<Tensor> {
    norm.forward(&x.transpose(1, 2)?)?.transpose(1, 2)
}

/// Three same-padded convolutions (widths 7, 5, 3), each followed by layer
/// norm and ReLU, added to an identity or width-1 convolution skip path.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub convs: [Conv1d; 3],
    pub norms: [LayerNorm; 3],
    pub skip: Option<Conv1d>,
    c_in: usize,
}

impl ResidualBlock {
    pub fn new(store: &mut ParameterStore, name: &str, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let convs = [
            Conv1d::same(store, &format!("{name}.conv7"), c_in, c_out, 7, rng)?,
            Conv1d::same(store, &format!("{name}.conv5"), c_out, c_out, 5, rng)?,
            Conv1d::same(store, &format!("{name}.conv3"), c_out, c_out, 3, rng)?,
        ];
        let norms = [
            LayerNorm::new(store, &format!("{name}.norm7"), c_out)?,
            LayerNorm::new(store, &format!("{name}.norm5"), c_out)?,
            LayerNorm::new(store, &format!("{name}.norm3"), c_out)?,
        ];
        let skip = if c_in != c_out {
            Some(Conv1d::new(store, &format!("{name}.skip"), c_in, c_out, 1, 1, 0, rng)?)
        } else {
            None
        };
        Ok(ResidualBlock { convs, norms, skip, c_in })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 3 || x.shape()[1] != self.c_in {
            return Err(Error::Shape(format!(
                "residual block expects [batch, {}, len], got {:?}",
                self.c_in,
                x.shape()
            )));
        }
        let mut h = x.clone();
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            h = channel_norm(norm, &conv.forward(&h)?)?.relu();
        }
        let skip = match &self.skip {
            Some(conv) => conv.forward(x)?,
            None => x.clone(),
        };
        h.add(&skip)
    }
}

/// Three linear layers with ReLU after the first two.
#[derive(Debug, Clone)]
pub struct ProjectionHead {
    pub layers: [Linear; 3],
}

impl ProjectionHead {
    pub fn new(store: &mut ParameterStore, name: &str, d: usize, out: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(ProjectionHead {
            layers: [
                Linear::new(store, &format!("{name}.0"), d, d, rng)?,
                Linear::new(store, &format!("{name}.1"), d, d, rng)?,
                Linear::new(store, &format!("{name}.2"), d, out, rng)?,
            ],
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.layers[0].forward(x)?.relu();
        let h = self.layers[1].forward(&h)?.relu();
        self.layers[2].forward(&h)
    }
}

#[derive(Debug, Clone)]
pub struct ResNetBackbone {
    pub entry: Conv1d,
    pub blocks: Vec<ResidualBlock>,
    pub head: ProjectionHead,
}

impl ResNetBackbone {
    fn new(store: &mut ParameterStore, name: &str, cfg: &BackboneConfig, rng: &mut impl Rng) -> Result<Self> {
        let c = cfg.model_dim;
        let entry = Conv1d::new(store, &format!("{name}.entry"), cfg.input_dims, c, ENTRY_WIDTH, ENTRY_STRIDE, ENTRY_PADDING, rng)?;
        let blocks = (0..cfg.n_rblocks)
            .map(|i| ResidualBlock::new(store, &format!("{name}.block{i}"), c, c, rng))
            .collect::<Result<_>>()?;
        let head = ProjectionHead::new(store, &format!("{name}.head"), c, cfg.out_dim, rng)?;
        Ok(ResNetBackbone { entry, blocks, head })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.entry.forward(x)?;
        for block in &self.blocks {
            h = block.forward(&h)?;
        }
        let (b, c, len) = (h.shape()[0], h.shape()[1], h.shape()[2]);
        let pooled = if len > 1 { h.mean_axis(2)? } else { h.reshape(&[b, c])? };
        self.head.forward(&pooled)
    }
}

/// Fixed sinusoidal encoding, `[len, d]`.
pub fn sinusoidal_encoding(len: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let freq = 10000f64.powf(-((i - i % 2) as f64) / d as f64);
            let angle = pos as f64 * freq;
            pe[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

#[derive(Debug, Clone)]
pub struct TransformerBackbone {
    pub entry: Conv1d,
    pub start: Tensor,
    pub blocks: Vec<TransformerBlock>,
    pub head: ProjectionHead,
}

impl TransformerBackbone {
    fn new(store: &mut ParameterStore, name: &str, cfg: &BackboneConfig, rng: &mut impl Rng) -> Result<Self> {
        let c = cfg.model_dim;
        let entry = Conv1d::new(store, &format!("{name}.entry"), cfg.input_dims, c, ENTRY_WIDTH, ENTRY_STRIDE, ENTRY_PADDING, rng)?;
        let start = store.normal(&format!("{name}.start"), &[c], 0.02, rng)?;
        let blocks = (0..cfg.n_tblocks)
            .map(|i| TransformerBlock::new(store, &format!("{name}.block{i}"), c, cfg.heads, cfg.ff_dim, rng))
            .collect::<Result<_>>()?;
        let head = ProjectionHead::new(store, &format!("{name}.head"), c, cfg.out_dim, rng)?;
        Ok(TransformerBackbone { entry, start, blocks, head })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.entry.forward(x)?.transpose(1, 2)?;
        let (b, len, c) = (h.shape()[0], h.shape()[1], h.shape()[2]);
        let pe = Tensor::new(&[len, c], sinusoidal_encoding(len, c))?;
        let h = h.add(&pe)?;
        let start = Tensor::zeros(&[b, 1, c]).add(&self.start)?;
        let mut s = Tensor::concat(&[start, h], 1)?;
        for block in &self.blocks {
            s = block.forward(&s)?;
        }
        let readout = s.narrow(1, 0, 1)?.reshape(&[b, c])?;
        self.head.forward(&readout)
    }
}

#[derive(Debug, Clone)]
pub enum BackboneNet {
    Resnet(ResNetBackbone),
    Transformer(TransformerBackbone),
}

#[derive(Debug, Clone)]
pub struct Backbone {
    pub config: BackboneConfig,
    pub net: BackboneNet,
}

impl Backbone {
    pub fn new(store: &mut ParameterStore, name: &str, config: &BackboneConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let net = match config.kind {
            BackboneKind::Resnet => BackboneNet::Resnet(ResNetBackbone::new(store, name, config, rng)?),
            BackboneKind::Transformer => BackboneNet::Transformer(TransformerBackbone::new(store, name, config, rng)?),
        };
        Ok(Backbone { config: config.clone(), net })
    }

    /// `[batch, d, m]` → `[batch, out_dim]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 3 || x.shape()[1] != self.config.input_dims || x.shape()[2] == 0 {
            return Err(Error::Shape(format!(
                "backbone expects [batch, {}, m ≥ 1], got {:?}",
                self.config.input_dims,
                x.shape()
            )));
        }
        match &self.net {
            BackboneNet::Resnet(n) => n.forward(x),
            BackboneNet::Transformer(n) => n.forward(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{run_suite, Instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random(shape: &[usize], r: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn build(kind: BackboneKind, d: usize, seed: u64) -> (ParameterStore, Backbone) {
        let mut store = ParameterStore::new();
        let bb = Backbone::new(&mut store, "bb", &BackboneConfig::new(kind, d), &mut rng(seed)).unwrap();
        (store, bb)
    }

    #[test]
    fn entry_length_is_half_rounded_up() {
        for m in 1..60 {
            assert_eq!(entry_length(m), m.div_ceil(2));
        }
    }

    #[test]
    fn output_is_128_wide() {
        for kind in [BackboneKind::Resnet, BackboneKind::Transformer] {
            for (d, m) in [(1, 16), (2, 100), (3, 7)] {
                let (_, bb) = build(kind, d, 1);
                let x = random(&[2, d, m], &mut rng(2));
                assert_eq!(bb.forward(&x).unwrap().shape(), &[2, 128], "{kind} d={d} m={m}");
            }
        }
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        for kind in [BackboneKind::Resnet, BackboneKind::Transformer] {
            let (_, bb) = build(kind, 1, 3);
            let row: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
            let x = Tensor::new(&[2, 1, 20], [row.clone(), row].concat()).unwrap();
            let y = bb.forward(&x).unwrap().to_vec();
            assert_eq!(y[..128], y[128..]);
        }
    }

    #[test]
    fn batch_matches_single_items() {
        for kind in [BackboneKind::Resnet, BackboneKind::Transformer] {
            let (_, bb) = build(kind, 2, 4);
            let x = random(&[3, 2, 24], &mut rng(5));
            let batched = bb.forward(&x).unwrap().to_vec();
            for i in 0..3 {
                let single = bb.forward(&x.narrow(0, i, 1).unwrap()).unwrap().to_vec();
                for (a, b) in single.iter().zip(&batched[i * 128..]) {
                    assert!((a - b).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn residual_block_zero_main_path_is_identity() {
        let mut store = ParameterStore::new();
        let block = ResidualBlock::new(&mut store, "rb", 64, 64, &mut rng(6)).unwrap();
        for conv in &block.convs {
            conv.weight.set_data(&vec![0.0; conv.weight.numel()]).unwrap();
        }
        for len in [9, 50] {
            let x = random(&[2, 64, len], &mut rng(7));
            let y = block.forward(&x).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert_eq!(y.to_vec(), x.to_vec());
        }
        assert!(matches!(block.forward(&random(&[1, 32, 9], &mut rng(8))), Err(Error::Shape(_))));
    }

    #[test]
    fn residual_block_keeps_shape_and_projects_skip() {
        let mut store = ParameterStore::new();
        let block = ResidualBlock::new(&mut store, "rb", 64, 64, &mut rng(9)).unwrap();
        for len in [9, 50] {
            assert_eq!(block.forward(&random(&[2, 64, len], &mut rng(10))).unwrap().shape(), &[2, 64, len]);
        }
        // 32 → 64 needs the width-1 skip convolution.
        let mut store = ParameterStore::new();
        let block = ResidualBlock::new(&mut store, "rb", 32, 64, &mut rng(11)).unwrap();
        let skip = block.skip.as_ref().unwrap();
        for conv in &block.convs {
            conv.weight.set_data(&vec![0.0; conv.weight.numel()]).unwrap();
        }
        let x = random(&[1, 32, 9], &mut rng(12));
        let y = block.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 64, 9]);
        assert_eq!(y.to_vec(), x.conv1d(&skip.weight, Some(&skip.bias), 1, 0).unwrap().to_vec());
    }

    #[test]
    fn single_step_sequence_skips_pooling() {
        // m = 2 leaves one step after the stride-2 entry conv.
        assert_eq!(entry_length(2), 1);
        let (_, bb) = build(BackboneKind::Resnet, 1, 13);
        let BackboneNet::Resnet(net) = &bb.net else { unreachable!() };
        let x = random(&[3, 1, 2], &mut rng(14));
        let mut h = net.entry.forward(&x).unwrap();
        for block in &net.blocks {
            h = block.forward(&h).unwrap();
        }
        assert_eq!(h.shape(), &[3, 64, 1]);
        let want = net.head.forward(&h.reshape(&[3, 64]).unwrap()).unwrap();
        assert_eq!(bb.forward(&x).unwrap().to_vec(), want.to_vec());
    }

    fn layer_norm_row(v: &[f64]) -> Vec<f64> {
        let n = v.len() as f64;
        let mu = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        v.iter().map(|x| (x - mu) / (var + 1e-5).sqrt()).collect()
    }

    #[test]
    fn zeroed_blocks_read_out_the_start_token() {
        let (_, bb) = build(BackboneKind::Transformer, 1, 15);
        let BackboneNet::Transformer(net) = &bb.net else { unreachable!() };
        for block in &net.blocks {
            for lin in [&block.attn.q, &block.attn.k, &block.attn.v, &block.attn.out, &block.ff1, &block.ff2] {
                lin.weight.set_data(&vec![0.0; lin.weight.numel()]).unwrap();
            }
        }
        let x = random(&[2, 1, 16], &mut rng(16));
        let got = bb.forward(&x).unwrap().to_vec();
        // Each block reduces to two layer norms of the start token.
        let mut token = net.start.to_vec();
        for _ in 0..2 * net.blocks.len() {
            token = layer_norm_row(&token);
        }
        let want = net.head.forward(&Tensor::new(&[1, 64], token).unwrap()).unwrap().to_vec();
        for b in 0..2 {
            for (g, w) in got[b * 128..][..128].iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn readout_sees_distant_time_steps() {
        for kind in [BackboneKind::Transformer, BackboneKind::Resnet] {
            let (_, bb) = build(kind, 1, 17);
            let x = random(&[1, 1, 40], &mut rng(18));
            let base = bb.forward(&x).unwrap().to_vec();
            let mut v = x.to_vec();
            v[39] += 1.0;
            let moved = bb.forward(&Tensor::new(&[1, 1, 40], v).unwrap()).unwrap().to_vec();
            let change: f64 = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).sum();
            assert!(change > 1e-6, "{kind}: change {change}");
        }
    }

    #[test]
    fn positional_encoding_values() {
        let pe = sinusoidal_encoding(3, 4);
        assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe[4] - 1f64.sin()).abs() < 1e-15);
        assert!((pe[6] - (1.0f64 / 100.0).sin()).abs() < 1e-15);
        assert!((pe[7] - (1.0f64 / 100.0).cos()).abs() < 1e-15);
    }

    #[test]
    fn every_parameter_gets_gradient() {
        for kind in [BackboneKind::Resnet, BackboneKind::Transformer] {
            let (store, bb) = build(kind, 2, 19);
            let x = random(&[3, 2, 20], &mut rng(20));
            let w = random(&[3, 128], &mut rng(21));
            bb.forward(&x).unwrap().mul(&w).unwrap().sum().backward().unwrap();
            for (name, t) in store.iter() {
                let g = t.grad().unwrap_or_else(|| panic!("{name} has no gradient"));
                // Softmax is invariant to the key bias.
                if name.ends_with(".attn.k.bias") {
                    continue;
                }
                assert!(g.iter().any(|v| *v != 0.0), "{kind}: {name} has zero gradient");
            }
        }
    }

    #[test]
    fn backbone_gradients_match_finite_differences() {
        for kind in [BackboneKind::Resnet, BackboneKind::Transformer] {
            let build = |seed: u64| -> Instance {
                let mut r = rng(100 + seed);
                let mut store = ParameterStore::new();
                let bb = Backbone::new(&mut store, "bb", &BackboneConfig::new(kind, 2), &mut r).unwrap();
                let x = Tensor::param(&[2, 2, 9], (0..36).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
                let w = random(&[2, 128], &mut r);
                let mut params: Vec<Tensor> = store.iter().map(|(_, t)| t.clone()).collect();
                params.push(x.clone());
                (params, Box::new(move || Ok(bb.forward(&x)?.mul(&w)?.sum())))
            };
            let report = run_suite(5, Some(2), build, &mut rng(7)).unwrap();
            assert_eq!(report.accepted, 5, "{kind}: {report:?}");
            assert!(report.max_rel_err <= 1e-3, "{kind}: {report:?}");
        }
    }
}
