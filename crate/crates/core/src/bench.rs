//! Wall-clock comparison of the graph builders on random-walk series.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::datasynth::random_walk;
use crate::error::{Error, Result};
use crate::knngraph::{knn_naive, knn_stomp_self_with, BuildOptions, GraphMode};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Builder {
    Naive,
    Stomp,
}

impl std::str::FromStr for Builder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Builder::Naive),
            "stomp" => Ok(Builder::Stomp),
            other => Err(Error::Config(format!("unknown builder `{other}` (expected naive or stomp)"))),
        }
    }
}

impl std::fmt::Display for Builder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Builder::Naive => "naive",
            Builder::Stomp => "stomp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub builder: Builder,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub threads: Option<usize>,
    /// Seconds per repetition, in run order.
    pub times: Vec<f64>,
    pub median: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times `reps` self-join builds of one random walk of length `n`.
pub fn time_builder(builder: Builder, n: usize, m: usize, k: usize, reps: usize, seed: u64, threads: Option<usize>) -> Result<BenchRow> {
    if reps == 0 {
        return Err(Error::Config("need at least one repetition".into()));
    }
    let series = TimeSeries::univariate("walk", random_walk(n, &mut ChaCha8Rng::seed_from_u64(seed)))?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let g = match builder {
            Builder::Naive => knn_naive(&series, &series, m, k, GraphMode::SelfJoin)?,
            Builder::Stomp => knn_stomp_self_with(&series, m, k, BuildOptions { threads })?,
        };
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(g);
    }
    Ok(BenchRow { builder, n, m, k, threads, median: median(&times), times })
}
