//! Subsequence classification over k-nearest-neighbor subsequence graphs.
//!
//! The pipeline: build a k-NN graph of z-normalized subsequences
//! ([`knngraph`]), encode every subsequence of an ego-network with a
//! backbone ([`backbones`]), fuse the focal subsequence with its labeled
//! neighbors ([`egonet`]), smooth the predicted label series
//! ([`postprocess`]) and score onsets ([`metrics`]).

pub mod error;
pub mod series;
pub mod distprof;
pub mod knngraph;
pub mod metrics;
pub mod postprocess;
pub mod knnclassify;
pub mod autodiff;
pub mod backbones;
pub mod egonet;
pub mod datasynth;
pub mod trainer;
pub mod config;
pub mod bench;

pub use error::{Error, Result};
pub use series::{LabelSeries, SubseqWindow, TimeSeries, BACKGROUND};
