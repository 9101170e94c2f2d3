//! z-normalized Euclidean distance profiles.
//!
//! Three routes compute the same quantity: [`znorm_distance`] normalizes
//! both windows and takes the Euclidean norm of the difference,
//! [`distance_profile_brute`] applies that to every window of a target, and
//! [`ProfileStream`] produces one profile per query window in O(n) each by
//! updating the sliding dot products between consecutive query windows.

use crate::error::{Error, Result};
use crate::series::{mean_std, z_normalize, TimeSeries, ZNORM_EPS};

/// Rows between direct re-computations of the sliding dot products.
pub const RESEED_INTERVAL: usize = 1024;

/// Distances from one query window to every window of a target series.
/// Masked entries are `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    pub values: Vec<f64>,
}

impl DistanceProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-window population mean and standard deviation.
#[derive(Debug, Clone)]
pub struct MovingStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl MovingStats {
    pub fn new(x: &[f64], m: usize) -> Self {
        let n_sub = x.len() + 1 - m;
        let mut means = Vec::with_capacity(n_sub);
        let mut stds = Vec::with_capacity(n_sub);
        for w in x.windows(m) {
            let (mu, sd) = mean_std(w);
            means.push(mu);
            stds.push(sd);
        }
        Self { means, stds }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Dot products between the current query window and every target window.
#[derive(Debug, Clone)]
pub struct SlidingDotState {
    pub qt: Vec<f64>,
}

impl SlidingDotState {
    /// Direct O(n m) computation for query window `row`.
    pub fn seed(query: &[f64], target: &[f64], m: usize, row: usize) -> Self {
        let q = &query[row..row + m];
        let qt = target.windows(m).map(|w| dot(q, w)).collect();
        Self { qt }
    }

    /// Advances from query window `row - 1` to `row`. `scratch` must have the
    /// same length as the state and is swapped in.
    pub fn advance(&mut self, query: &[f64], target: &[f64], m: usize, row: usize, scratch: &mut Vec<f64>) {
        debug_assert!(row > 0);
        let out_old = query[row - 1];
        let in_new = query[row + m - 1];
        let prev = &self.qt;
        scratch[0] = dot(&query[row..row + m], &target[..m]);
        let n = prev.len();
        let next = &mut scratch[1..n];
        let prev = &prev[..n - 1];
        let leaving = &target[..n - 1];
        let entering = &target[m..m + n - 1];
        for (((o, &p), &l), &e) in next.iter_mut().zip(prev).zip(leaving).zip(entering) {
            *o = p - out_old * l + in_new * e;
        }
        std::mem::swap(&mut self.qt, scratch);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the loop vectorize without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cannot compare windows of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("cannot compare empty windows".into()));
    }
    Ok(())
}

/// `‖z(a) − z(b)‖₂`.
pub fn znorm_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let za = z_normalize(a);
    let zb = z_normalize(b);
    Ok(za
        .iter()
        .zip(&zb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// The same distance through the closed form `√(2m(1 − ρ))`.
pub fn znorm_distance_pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let (mu_a, sd_a) = mean_std(a);
    let (mu_b, sd_b) = mean_std(b);
    Ok(distance_from_dot(dot(a, b), a.len(), mu_a, sd_a, mu_b, sd_b))
}

/// Converts a raw dot product of two windows into their z-normalized
/// distance, applying the constant-window rule.
#[inline]
pub fn distance_from_dot(qt: f64, m: usize, mu_q: f64, sd_q: f64, mu_t: f64, sd_t: f64) -> f64 {
    let mf = m as f64;
    match (sd_q < ZNORM_EPS, sd_t < ZNORM_EPS) {
        (true, true) => 0.0,
        (true, false) | (false, true) => mf.sqrt(),
        (false, false) => {
            let rho = ((qt - mf * mu_q * mu_t) / (mf * sd_q * sd_t)).clamp(-1.0, 1.0);
            (2.0 * mf * (1.0 - rho)).sqrt()
        }
    }
}

/// O(n m) profile: [`znorm_distance`] against every window of `target`.
pub fn distance_profile_brute(query: &[f64], target: &[f64]) -> Result<DistanceProfile> {
    let m = query.len();
    if m == 0 || m > target.len() {
        return Err(Error::Bounds(format!(
            "query length {m} does not fit a target of length {}",
            target.len()
        )));
    }
    let values = target
        .windows(m)
        .map(|w| znorm_distance(query, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceProfile { values })
}

/// Sum over dimensions of the per-dimension z-normalized distance.
/// `query` is dimension-major, `d * m` values.
pub fn multivariate_distance_profile(
    query: &[f64],
    m: usize,
    target: &TimeSeries,
) -> Result<DistanceProfile> {
    let d = target.n_dims();
    if m == 0 || query.len() != d * m {
        return Err(Error::Shape(format!(
            "query has {} values, expected {d} dimensions × {m}",
            query.len()
        )));
    }
    let mut total = vec![0.0; target.n_subsequences(m)?];
    for dim in 0..d {
        let p = distance_profile_brute(&query[dim * m..(dim + 1) * m], target.dim(dim))?;
        for (t, v) in total.iter_mut().zip(p.values) {
            *t += v;
        }
    }
    Ok(DistanceProfile { values: total })
}

/// Per-dimension precomputation for one side of a join.
#[derive(Debug, Clone)]
struct SideStats {
    means: Vec<f64>,
    stds: Vec<f64>,
    /// `1/σ`, or 0 for constant windows.
    inv_stds: Vec<f64>,
}

impl SideStats {
    fn new(x: &[f64], m: usize) -> Self {
        let MovingStats { means, stds } = MovingStats::new(x, m);
        let inv_stds = stds
            .iter()
            .map(|&s| if s < ZNORM_EPS { 0.0 } else { 1.0 / s })
            .collect();
        Self { means, stds, inv_stds }
    }
}

/// Emits one distance profile per query window, in order, against every
/// window of the target. Multivariate series are aggregated by summing
/// per-dimension distances.
pub struct ProfileStream<'a> {
    query: &'a TimeSeries,
    target: &'a TimeSeries,
    m: usize,
    self_join: bool,
    row: usize,
    end: usize,
    first: usize,
    query_stats: Vec<SideStats>,
    target_stats: Vec<SideStats>,
    /// Indices of constant target windows, per dimension.
    target_constant: Vec<Vec<usize>>,
    states: Vec<SlidingDotState>,
    scratch: Vec<f64>,
}

/// Streaming profiles of every window of `query` against `target`.
pub fn distance_profiles_streaming<'a>(
    query: &'a TimeSeries,
    target: &'a TimeSeries,
    m: usize,
) -> Result<ProfileStream<'a>> {
    let n_rows = query.n_subsequences(m)?;
    ProfileStream::new(query, target, m, 0..n_rows)
}

impl<'a> ProfileStream<'a> {
    /// A stream over query rows `rows`. Streams that start on a multiple of
    /// [`RESEED_INTERVAL`] produce bit-identical profiles to a stream started
    /// at row 0.
    pub fn new(
        query: &'a TimeSeries,
        target: &'a TimeSeries,
        m: usize,
        rows: std::ops::Range<usize>,
    ) -> Result<Self> {
        if query.n_dims() != target.n_dims() {
            return Err(Error::Shape(format!(
                "query has {} dimensions, target has {}",
                query.n_dims(),
                target.n_dims()
            )));
        }
        let n_rows = query.n_subsequences(m)?;
        target.n_subsequences(m)?;
        if rows.end > n_rows || rows.start > rows.end {
            return Err(Error::Bounds(format!(
                "row range {rows:?} outside 0..{n_rows}"
            )));
        }
        let d = query.n_dims();
        let self_join = std::ptr::eq(query, target);
        let query_stats: Vec<SideStats> = (0..d).map(|i| SideStats::new(query.dim(i), m)).collect();
        let target_stats: Vec<SideStats> = if self_join {
            query_stats.clone()
        } else {
            (0..d).map(|i| SideStats::new(target.dim(i), m)).collect()
        };
        let target_constant = target_stats
            .iter()
            .map(|s| {
                s.stds
                    .iter()
                    .enumerate()
                    .filter(|(_, &sd)| sd < ZNORM_EPS)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let n_target = target.len() - m + 1;
        Ok(Self {
            query,
            target,
            m,
            self_join,
            row: rows.start,
            end: rows.end,
            first: rows.start,
            query_stats,
            target_stats,
            target_constant,
            states: Vec::with_capacity(d),
            scratch: vec![0.0; n_target],
        })
    }

    pub fn target_len(&self) -> usize {
        self.scratch.len()
    }

    /// Index of the query row the next call will produce.
    pub fn next_row(&self) -> usize {
        self.row
    }

    /// Writes the next profile into `out` (resized as needed).
    /// Returns `false` when the stream is exhausted.
    pub fn next_into(&mut self, out: &mut Vec<f64>) -> bool {
        if self.row >= self.end {
            return false;
        }
        let i = self.row;
        let m = self.m;
        let mf = m as f64;
        let n_target = self.scratch.len();
        out.clear();
        out.resize(n_target, 0.0);
        let reseed = i == self.first || i.is_multiple_of(RESEED_INTERVAL);
        for dim in 0..self.query.n_dims() {
            let q = self.query.dim(dim);
            let t = self.target.dim(dim);
            if reseed {
                let state = SlidingDotState::seed(q, t, m, i);
                if self.states.len() > dim {
                    self.states[dim] = state;
                } else {
                    self.states.push(state);
                }
            } else {
                self.states[dim].advance(q, t, m, i, &mut self.scratch);
            }
            let qs = &self.query_stats[dim];
            let ts = &self.target_stats[dim];
            let qt = &self.states[dim].qt;
            if qs.stds[i] < ZNORM_EPS {
                // Constant query window: √m against everything except other
                // constant windows.
                let root_m = mf.sqrt();
                for o in out.iter_mut() {
                    *o += root_m;
                }
                for &j in &self.target_constant[dim] {
                    out[j] -= root_m;
                }
                continue;
            }
            let mu_q = qs.means[i];
            let scale = 2.0 * qs.inv_stds[i];
            let two_m = 2.0 * mf;
            let four_m = 4.0 * mf;
            for (((o, &dot), &mu_t), &inv_t) in out
                .iter_mut()
                .zip(qt)
                .zip(&ts.means)
                .zip(&ts.inv_stds)
            {
                let d2 = two_m - (dot - mf * mu_q * mu_t) * scale * inv_t;
                *o += d2.clamp(0.0, four_m).sqrt();
            }
            for &j in &self.target_constant[dim] {
                // The vectorized pass produced √(2m) for these entries.
                out[j] += mf.sqrt() - two_m.sqrt();
            }
        }
        if self.self_join {
            out[i] = 0.0;
        }
        self.row += 1;
        true
    }
}

impl Iterator for ProfileStream<'_> {
    type Item = DistanceProfile;

    fn next(&mut self) -> Option<DistanceProfile> {
        let mut values = Vec::new();
        self.next_into(&mut values).then_some(DistanceProfile { values })
    }
}
