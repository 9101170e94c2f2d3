//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::tensor::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-4;

/// Outcome of one check: the worst per-tensor relative error, the position
/// of that tensor in the input list, how many coordinates were compared and
/// how many were excluded as non-differentiable.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_tensor: usize,
    pub n_probed: usize,
    pub n_kinks: usize,
}

/// Whether `[x − h, x + h]` straddles a kink (a ReLU switching sign). On a
/// smooth function the central differences at `h` and `h/2` agree to
/// O(h²); across a kink they differ by a fraction of the slope jump. The
/// test never looks at the analytic gradient, so it cannot mask a bug.
fn straddles_kink(f0: f64, d_full: f64, d_half: f64) -> bool {
    let noise = 1e-9 * (1.0 + f0.abs());
    (d_full - d_half).abs() > 1e-5 * d_full.abs().max(d_half.abs()) + noise
}

/// Gradients smaller than this are compared absolutely: some are exactly
/// zero (a key bias under softmax shift invariance) and their difference
/// quotients are pure rounding noise.
pub const GRAD_FLOOR: f64 = 1e-6;

/// ‖a − n‖ / max(‖a‖, ‖n‖, GRAD_FLOOR).
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(GRAD_FLOOR)
}

/// Compares the gradient of `loss` with respect to each of `params` against
/// central differences. At most `max_coords` coordinates per tensor are
/// probed, chosen with `rng`; `None` probes all of them.
pub fn check_gradients(
    params: &[Tensor],
    loss: impl Fn() -> Result<Tensor>,
    max_coords: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradCheck> {
    for p in params {
        p.zero_grad();
    }
    let l0 = loss()?;
    l0.backward()?;
    let f0 = l0.item();
    let mut n_kinks = 0;
    let mut worst = 0.0f64;
    let mut worst_tensor = 0;
    let mut n_probed = 0;
    for (ti, p) in params.iter().enumerate() {
        let analytic_full = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let n = p.numel();
        let coords: Vec<usize> = match max_coords {
            Some(c) if c < n => sample(rng, n, c).into_vec(),
            _ => (0..n).collect(),
        };
        let base = p.to_vec();
        let mut probe = base.clone();
        let mut eval_at = |i: usize, delta: f64| -> Result<f64> {
            probe[i] = base[i] + delta;
            p.set_data(&probe)?;
            let v = loss()?.item();
            probe[i] = base[i];
            Ok(v)
        };
        let mut numeric = Vec::with_capacity(coords.len());
        let mut analytic = Vec::with_capacity(coords.len());
        for &i in &coords {
            let up = eval_at(i, FD_STEP)?;
            let down = eval_at(i, -FD_STEP)?;
            let up_half = eval_at(i, FD_STEP / 2.0)?;
            let down_half = eval_at(i, -FD_STEP / 2.0)?;
            let d_full = (up - down) / (2.0 * FD_STEP);
            let d_half = (up_half - down_half) / FD_STEP;
            if straddles_kink(f0, d_full, d_half) {
                n_kinks += 1;
                continue;
            }
            numeric.push(d_full);
            analytic.push(analytic_full[i]);
        }
        p.set_data(&base)?;
        let err = relative_error(&analytic, &numeric);
        if err > worst {
            worst = err;
            worst_tensor = ti;
        }
        n_probed += numeric.len();
    }
    for p in params {
        p.zero_grad();
    }
    Ok(GradCheck { max_rel_err: worst, worst_tensor, n_probed, n_kinks })
}

/// A loss closure together with the tensors it is differentiated against.
pub type Instance = (Vec<Tensor>, Box<dyn Fn() -> Result<Tensor>>);

#[derive(Debug, Clone, Copy)]
pub struct SuiteReport {
    /// Worst relative error over accepted instances.
    pub max_rel_err: f64,
    /// Seed and tensor position of the worst accepted instance.
    pub worst_seed: u64,
    pub worst_tensor: usize,
    pub accepted: usize,
    /// Draws that sat on a non-differentiable point (more than a tenth of
    /// the probes straddled a kink) and were replaced.
    pub rejected: usize,
}

/// Checks `instances` random draws built by `build(seed)`. Draws that sit on
/// a kink are replaced by new seeds, up to as many replacements as there
/// are instances.
pub fn run_suite(
    instances: usize,
    max_coords: Option<usize>,
    mut build: impl FnMut(u64) -> Instance,
    rng: &mut impl Rng,
) -> Result<SuiteReport> {
    let mut report = SuiteReport { max_rel_err: 0.0, worst_seed: 0, worst_tensor: 0, accepted: 0, rejected: 0 };
    let mut seed = 0u64;
    while report.accepted < instances && report.rejected <= instances {
        let (params, loss) = build(seed);
        seed += 1;
        let res = check_gradients(&params, loss, max_coords, rng)?;
        if res.n_kinks * 10 > res.n_probed + res.n_kinks {
            report.rejected += 1;
            continue;
        }
        report.accepted += 1;
        if res.max_rel_err >= report.max_rel_err {
            report.max_rel_err = res.max_rel_err;
            report.worst_seed = seed - 1;
            report.worst_tensor = res.worst_tensor;
        }
    }
    Ok(report)
}
