//! Ego-network classifier: the focal subsequence attends over its k labeled
//! neighbors and the focal position is read out as class logits.

use rand::Rng;

use crate::autodiff::{Linear, ParameterStore, Tensor, TransformerBlock};
use crate::backbones::{Backbone, BackboneConfig};
use crate::error::{Error, Result};

pub const AGG_BLOCKS: usize = 2;
pub const AGG_HEADS: usize = 8;
pub const AGG_FF: usize = 512;

/// One minibatch of ego-networks. `neighbor_labels` is row-major `[batch, k]`.
#[derive(Debug, Clone)]
pub struct EgoBatch {
    pub focal: Tensor,
    pub neighbors: Tensor,
    pub neighbor_labels: Vec<usize>,
}

impl EgoBatch {
    pub fn batch_size(&self) -> usize {
        self.focal.shape()[0]
    }
}

#[derive(Debug, Clone)]
pub struct EgoNet {
    pub backbone: Backbone,
    pub label_embeddings: Tensor,
    pub blocks: Vec<TransformerBlock>,
    pub head: Linear,
    pub k: usize,
    pub n_classes: usize,
}

fn check_shape(what: &str, t: &Tensor, want: &[usize]) -> Result<()> {
    if t.shape() != want {
        return Err(Error::Shape(format!("{what} has shape {:?}, expected {want:?}", t.shape())));
    }
    Ok(())
}

impl EgoNet {
    pub fn new(store: &mut ParameterStore, backbone: &BackboneConfig, k: usize, n_classes: usize, rng: &mut impl Rng) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("an ego-network needs k ≥ 1 neighbors".into()));
        }
        if n_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
        }
        let backbone = Backbone::new(store, "backbone", backbone, rng)?;
        let d = backbone.config.out_dim;
        let label_embeddings = store.normal("label_embeddings", &[n_classes, d], 0.02, rng)?;
        let blocks = (0..AGG_BLOCKS)
            .map(|i| TransformerBlock::new(store, &format!("agg{i}"), d, AGG_HEADS, AGG_FF, rng))
            .collect::<Result<_>>()?;
        let head = Linear::new(store, "classifier", d, n_classes, rng)?;
        Ok(EgoNet { backbone, label_embeddings, blocks, head, k, n_classes })
    }

    pub fn embed_dim(&self) -> usize {
        self.backbone.config.out_dim
    }

    /// Backbone encoding of `[n, d, m]` subsequences.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.backbone.forward(x)
    }

    /// Logits from a focal embedding `[batch, e]`, neighbor embeddings
    /// `[batch·k, e]` and their labels.
    pub fn aggregate(&self, focal: &Tensor, neighbors: &Tensor, labels: &[usize]) -> Result<Tensor> {
        let e = self.embed_dim();
        let b = focal.shape().first().copied().unwrap_or(0);
        check_shape("focal embedding", focal, &[b, e])?;
        check_shape("neighbor embeddings", neighbors, &[b * self.k, e])?;
        if labels.len() != b * self.k {
            return Err(Error::Shape(format!("{} neighbor labels for {} neighbors", labels.len(), b * self.k)));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= self.n_classes) {
            return Err(Error::Bounds(format!("neighbor label {bad} out of range for {} classes", self.n_classes)));
        }
        let labeled = neighbors.add(&self.label_embeddings.gather_rows(labels)?)?;
        let mut s = Tensor::concat(&[focal.reshape(&[b, 1, e])?, labeled.reshape(&[b, self.k, e])?], 1)?;
        for block in &self.blocks {
            s = block.forward(&s)?;
        }
        self.head.forward(&s.narrow(1, 0, 1)?.reshape(&[b, e])?)
    }

    pub fn forward(&self, batch: &EgoBatch) -> Result<Tensor> {
        let f = &batch.focal;
        if f.ndim() != 3 {
            return Err(Error::Shape(format!("focal batch must be [batch, d, m], got {:?}", f.shape())));
        }
        let (b, d, m) = (f.shape()[0], f.shape()[1], f.shape()[2]);
        check_shape("neighbor batch", &batch.neighbors, &[b, self.k, d, m])?;
        let all = Tensor::concat(&[f.clone(), batch.neighbors.reshape(&[b * self.k, d, m])?], 0)?;
        let emb = self.encode(&all)?;
        let focal = emb.narrow(0, 0, b)?;
        let neighbors = emb.narrow(0, b, b * self.k)?;
        self.aggregate(&focal, &neighbors, &batch.neighbor_labels)
    }
}

/// The backbone alone with a linear classifier: the no-neighbor baseline.
#[derive(Debug, Clone)]
pub struct BackboneClassifier {
    pub backbone: Backbone,
    pub head: Linear,
    pub n_classes: usize,
}

impl BackboneClassifier {
    pub fn new(store: &mut ParameterStore, backbone: &BackboneConfig, n_classes: usize, rng: &mut impl Rng) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
        }
        let backbone = Backbone::new(store, "backbone", backbone, rng)?;
        let head = Linear::new(store, "classifier", backbone.config.out_dim, n_classes, rng)?;
        Ok(BackboneClassifier { backbone, head, n_classes })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.head.forward(&self.backbone.forward(x)?)
    }
}

/// Row-wise argmax of `[batch, n_classes]` logits; the lowest index wins ties.
pub fn predict_class(logits: &Tensor) -> Result<Vec<usize>> {
    if logits.ndim() != 2 || logits.shape()[1] == 0 {
        return Err(Error::Shape(format!("logits must be [batch, n_classes], got {:?}", logits.shape())));
    }
    let c = logits.shape()[1];
    Ok(logits
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}
