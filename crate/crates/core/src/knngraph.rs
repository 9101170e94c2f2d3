//! k-nearest-neighbor subsequence graphs.
//!
//! Each row of a [`KnnGraph`] lists the start indices of the `k` target
//! subsequences closest to one query subsequence, nearest first. Self-join
//! graphs (training) exclude the zone around the query itself; cross-join
//! graphs (testing) do not. In both modes every selected neighbor masks its
//! own zone, so the `k` neighbors never overlap each other's trivial-match
//! region.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::distprof::{distance_profile_brute, ProfileStream, RESEED_INTERVAL};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

const MAGIC: &[u8; 4] = b"KNNG";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    SelfJoin,
    Cross,
}

impl GraphMode {
    fn code(self) -> u8 {
        match self {
            GraphMode::SelfJoin => 0,
            GraphMode::Cross => 1,
        }
    }
}

impl std::fmt::Display for GraphMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphMode::SelfJoin => "self",
            GraphMode::Cross => "cross",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    mode: GraphMode,
    m: usize,
    k: usize,
    /// Row-major `n_rows × k`.
    indices: Vec<usize>,
}

impl KnnGraph {
    pub fn from_rows(mode: GraphMode, m: usize, k: usize, indices: Vec<usize>) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::Config("graph needs k ≥ 1 and m ≥ 1".into()));
        }
        if !indices.len().is_multiple_of(k) {
            return Err(Error::Shape(format!(
                "{} indices do not form rows of {k}",
                indices.len()
            )));
        }
        Ok(Self { mode, m, k, indices })
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.indices.chunks_exact(self.k)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Writes the binary `KNNG` format.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.mode.code()])?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.k as u32).to_le_bytes())?;
        w.write_all(&(self.n_rows() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.indices.len() * 8);
        for &ix in &self.indices {
            buf.extend_from_slice(&(ix as u64).to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<graph stream>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "not a graph file: magic {:?}, expected \"KNNG\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported graph version {version}")));
        }
        let mode = match cur.take(1, "mode")?[0] {
            0 => GraphMode::SelfJoin,
            1 => GraphMode::Cross,
            other => {
                return Err(Error::Format(format!("unknown graph mode byte {other}")));
            }
        };
        let m = cur.u32("m")? as usize;
        let k = cur.u32("k")? as usize;
        let n_rows = cur.u64("n_rows")? as usize;
        let total = n_rows
            .checked_mul(k)
            .ok_or_else(|| Error::Format("row count overflows".into()))?;
        let mut indices = Vec::with_capacity(total.min(bytes.len() / 8));
        for _ in 0..total {
            indices.push(cur.u64("neighbor index")? as usize);
        }
        if cur.pos != bytes.len() {
            return Err(Error::parse(
                "graph",
                format!("offset {}", cur.pos),
                format!("{} trailing bytes", bytes.len() - cur.pos),
            ));
        }
        Self::from_rows(mode, m, k, indices)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Parse { location, message, .. } => {
                Error::parse(path.display().to_string(), location, message)
            }
            other => other,
        })
    }

    /// `row,rank,neighbor` triples with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::io("<graph csv>", std::io::Error::other(e.to_string()));
        wtr.write_record(["row", "rank", "neighbor"]).map_err(err)?;
        for (i, row) in self.rows().enumerate() {
            for (rank, nb) in row.iter().enumerate() {
                wtr.write_record([i.to_string(), rank.to_string(), nb.to_string()])
                    .map_err(err)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<graph csv>", e))
    }
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(
                "graph",
                format!("offset {}", self.pos),
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Sets `[i − ⌊m/2⌋, i + ⌈m/2⌉)` (clipped) to `+inf`.
pub fn mask_with_inf(profile: &mut [f64], i: usize, m: usize) {
    let lo = i.saturating_sub(m / 2);
    let hi = (i + m.div_ceil(2)).min(profile.len());
    if lo < hi {
        profile[lo..hi].fill(f64::INFINITY);
    }
}

/// Index of the smallest finite entry, lowest index on ties.
pub fn find_min_index(profile: &[f64]) -> Option<usize> {
    let mut best = f64::INFINITY;
    let mut at = None;
    for (j, &v) in profile.iter().enumerate() {
        if v < best {
            best = v;
            at = Some(j);
        }
    }
    at
}

/// Picks `k` neighbors from a distance profile, masking after each pick.
/// `exclude` is the query's own start in self-join mode.
pub fn select_neighbors(
    profile: &mut [f64],
    exclude: Option<usize>,
    m: usize,
    k: usize,
    row: usize,
    out: &mut Vec<usize>,
) -> Result<()> {
    if let Some(i) = exclude {
        mask_with_inf(profile, i, m);
    }
    for found in 0..k {
        let Some(j) = find_min_index(profile) else {
            return Err(Error::InsufficientCandidates {
                row,
                found,
                wanted: k,
            });
        };
        out.push(j);
        mask_with_inf(profile, j, m);
    }
    Ok(())
}

/// Builder options shared by both join modes.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { threads: Some(1) }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(())
}

/// Training-mode graph over the subsequences of `series`.
pub fn knn_stomp_self(series: &TimeSeries, m: usize, k: usize) -> Result<KnnGraph> {
    knn_stomp_self_with(series, m, k, BuildOptions::default())
}

pub fn knn_stomp_self_with(
    series: &TimeSeries,
    m: usize,
    k: usize,
    opts: BuildOptions,
) -> Result<KnnGraph> {
    check_k(k)?;
    let indices = build_rows(series, series, m, k, true, opts)?;
    KnnGraph::from_rows(GraphMode::SelfJoin, m, k, indices)
}

/// Test-mode graph: neighbors of every `query` subsequence among the
/// subsequences of `target`.
pub fn knn_stomp_cross(
    query: &TimeSeries,
    target: &TimeSeries,
    m: usize,
    k: usize,
) -> Result<KnnGraph> {
    knn_stomp_cross_with(query, target, m, k, BuildOptions::default())
}

pub fn knn_stomp_cross_with(
    query: &TimeSeries,
    target: &TimeSeries,
    m: usize,
    k: usize,
    opts: BuildOptions,
) -> Result<KnnGraph> {
    check_k(k)?;
    let indices = build_rows(query, target, m, k, false, opts)?;
    KnnGraph::from_rows(GraphMode::Cross, m, k, indices)
}

fn build_rows(
    query: &TimeSeries,
    target: &TimeSeries,
    m: usize,
    k: usize,
    self_join: bool,
    opts: BuildOptions,
) -> Result<Vec<usize>> {
    let n_rows = query.n_subsequences(m)?;
    // Validates dimensions and the target length up front.
    ProfileStream::new(query, target, m, 0..0)?;
    let chunks: Vec<std::ops::Range<usize>> = (0..n_rows)
        .step_by(RESEED_INTERVAL)
        .map(|s| s..(s + RESEED_INTERVAL).min(n_rows))
        .collect();

    let run_chunk = |rows: std::ops::Range<usize>| -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(rows.len() * k);
        let mut stream = ProfileStream::new(query, target, m, rows)?;
        let mut profile = Vec::with_capacity(stream.target_len());
        loop {
            let i = stream.next_row();
            if !stream.next_into(&mut profile) {
                break;
            }
            select_neighbors(&mut profile, self_join.then_some(i), m, k, i, &mut out)?;
        }
        Ok(out)
    };

    let parts: Vec<Result<Vec<usize>>> = match opts.threads {
        Some(1) => chunks.into_iter().map(run_chunk).collect(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| chunks.into_par_iter().map(run_chunk).collect())
        }
        None => chunks.into_par_iter().map(run_chunk).collect(),
    };
    let mut indices = Vec::with_capacity(n_rows * k);
    for part in parts {
        indices.extend(part?);
    }
    Ok(indices)
}

/// Reference builder: every distance profile computed window by window with
/// [`distance_profile_brute`], O(n² m). Used for benchmarking.
pub fn knn_naive(
    query: &TimeSeries,
    target: &TimeSeries,
    m: usize,
    k: usize,
    mode: GraphMode,
) -> Result<KnnGraph> {
    check_k(k)?;
    if query.n_dims() != target.n_dims() {
        return Err(Error::Shape("query and target dimensions differ".into()));
    }
    let n_rows = query.n_subsequences(m)?;
    let n_target = target.n_subsequences(m)?;
    let mut indices = Vec::with_capacity(n_rows * k);
    let mut profile = vec![0.0; n_target];
    for i in 0..n_rows {
        profile.fill(0.0);
        for d in 0..query.n_dims() {
            let q = &query.dim(d)[i..i + m];
            let p = distance_profile_brute(q, target.dim(d))?;
            for (acc, v) in profile.iter_mut().zip(p.values) {
                *acc += v;
            }
        }
        let exclude = (mode == GraphMode::SelfJoin).then_some(i);
        select_neighbors(&mut profile, exclude, m, k, i, &mut indices)?;
    }
    KnnGraph::from_rows(mode, m, k, indices)
}
