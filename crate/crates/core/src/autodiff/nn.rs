//! Parameterized layers over [`Tensor`].

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Named trainable tensors in registration order. Names are unique.
#[derive(Debug, Default, Clone)]
pub struct ParameterStore {
    params: Vec<(String, Tensor)>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if self.get(name).is_some() {
            return Err(Error::Config(format!("parameter `{name}` registered twice")));
        }
        let t = Tensor::param(shape, data)?;
        self.params.push((name.to_string(), t.clone()));
        Ok(t)
    }

    /// Uniform on ±√(1/fan_in).
    pub fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Result<Tensor> {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let data = (0..numel(shape)).map(|_| dist.sample(rng)).collect();
        self.register(name, shape, data)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut impl Rng) -> Result<Tensor> {
        let dist = Normal::new(0.0, std).map_err(|e| Error::Config(format!("normal init: {e}")))?;
        let data = (0..numel(shape)).map(|_| dist.sample(rng)).collect();
        self.register(name, shape, data)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        self.register(name, shape, vec![value; numel(shape)])
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&self) {
        for (_, t) in &self.params {
            t.zero_grad();
        }
    }

    /// Current values of every parameter, in order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|(_, t)| t.to_vec()).collect()
    }

    pub fn restore(&self, snapshot: &[Vec<f64>]) -> Result<()> {
        if snapshot.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "snapshot has {} tensors, store has {}",
                snapshot.len(),
                self.params.len()
            )));
        }
        for ((_, t), v) in self.params.iter().zip(snapshot) {
            t.set_data(v)?;
        }
        Ok(())
    }

    /// Copies values by name; every parameter must be present with its shape.
    pub fn load_named(&self, records: &[(String, Vec<usize>, Vec<f64>)]) -> Result<()> {
        if records.len() != self.params.len() {
            return Err(Error::Consistency(format!(
                "checkpoint has {} tensors, model expects {}",
                records.len(),
                self.params.len()
            )));
        }
        for (name, t) in &self.params {
            let (_, shape, data) = records
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| Error::Consistency(format!("checkpoint lacks parameter `{name}`")))?;
            if shape.as_slice() != t.shape() {
                return Err(Error::Consistency(format!(
                    "parameter `{name}` has shape {shape:?} in the checkpoint, model expects {:?}",
                    t.shape()
                )));
            }
            t.set_data(data)?;
        }
        Ok(())
    }
}

/// `y = x·W + b` over the last axis, with `W` stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(store: &mut ParameterStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Linear {
            weight: store.uniform(&format!("{name}.weight"), &[d_in, d_out], d_in, rng)?,
            bias: store.constant(&format!("{name}.bias"), &[d_out], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.weight)?.add(&self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        width: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Conv1d {
            weight: store.uniform(&format!("{name}.weight"), &[c_out, c_in, width], c_in * width, rng)?,
            bias: store.constant(&format!("{name}.bias"), &[c_out], 0.0)?,
            stride,
            padding,
        })
    }

    /// Padding that keeps the length for stride 1 and odd widths.
    pub fn same(store: &mut ParameterStore, name: &str, c_in: usize, c_out: usize, width: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::new(store, name, c_in, c_out, width, 1, width / 2, rng)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.conv1d(&self.weight, Some(&self.bias), self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNorm {
    pub fn new(store: &mut ParameterStore, name: &str, d: usize) -> Result<Self> {
        Ok(LayerNorm {
            gain: store.constant(&format!("{name}.gain"), &[d], 1.0)?,
            bias: store.constant(&format!("{name}.bias"), &[d], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.layer_norm(&self.gain, &self.bias, LAYER_NORM_EPS)
    }
}

/// Scaled dot-product self-attention over `[batch, seq, d]`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParameterStore, name: &str, d: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(Error::Config(format!("model width {d} is not divisible by {heads} heads")));
        }
        Ok(MultiHeadAttention {
            q: Linear::new(store, &format!("{name}.q"), d, d, rng)?,
            k: Linear::new(store, &format!("{name}.k"), d, d, rng)?,
            v: Linear::new(store, &format!("{name}.v"), d, d, rng)?,
            out: Linear::new(store, &format!("{name}.out"), d, d, rng)?,
            heads,
        })
    }

    fn split_heads(&self, x: &Tensor, b: usize, s: usize, d: usize) -> Result<Tensor> {
        x.reshape(&[b, s, self.heads, d / self.heads])?.permute(&[0, 2, 1, 3])
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let &[b, s, d] = x.shape() else {
            return Err(Error::Shape(format!("attention expects [batch, seq, d], got {:?}", x.shape())));
        };
        let dh = d / self.heads;
        let q = self.split_heads(&self.q.forward(x)?, b, s, d)?;
        let kt = self.k.forward(x)?.reshape(&[b, s, self.heads, dh])?.permute(&[0, 2, 3, 1])?;
        let v = self.split_heads(&self.v.forward(x)?, b, s, d)?;
        let att = q.matmul(&kt)?.scale(1.0 / (dh as f64).sqrt()).softmax()?;
        let ctx = att.matmul(&v)?.permute(&[0, 2, 1, 3])?.reshape(&[b, s, d])?;
        self.out.forward(&ctx)
    }
}

/// Post-norm encoder block: attention and a ReLU feed-forward, each wrapped
/// in a residual connection followed by layer normalization.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub norm2: LayerNorm,
}

impl TransformerBlock {
    pub fn new(store: &mut ParameterStore, name: &str, d: usize, heads: usize, ff: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(TransformerBlock {
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d, heads, rng)?,
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d)?,
            ff1: Linear::new(store, &format!("{name}.ff1"), d, ff, rng)?,
            ff2: Linear::new(store, &format!("{name}.ff2"), ff, d, rng)?,
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.norm1.forward(&x.add(&self.attn.forward(x)?)?)?;
        let f = self.ff2.forward(&self.ff1.forward(&y)?.relu())?;
        self.norm2.forward(&y.add(&f)?)
    }
}
