//! Non-overlapping batch means estimators of the asymptotic variance in the
//! Markov chain CLT.
//!
//! Two flavours are provided:
//!
//! * [`ubm_sigma2`], the usual estimator over a fully stored chain with batch
//!   size `floor(n^tau)`.
//! * [`AbmState`], a streaming estimator whose batch size is always the
//!   largest power of two not exceeding `n^tau`. When the target size doubles,
//!   adjacent batch means are averaged pairwise, so only the batch means are
//!   ever stored: O(n^(1 - tau)) memory instead of O(n).

use serde::{Deserialize, Serialize};

use crate::error::{check_sample, Error, Result};

pub const DEFAULT_TAU: f64 = 0.5;
pub const INITIAL_BATCH_SIZE: u64 = 2;
const CHECKPOINT_VERSION: u32 = 1;

/// Accepts exponents in the open interval (1/3, 1).
pub fn validate_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 1.0 / 3.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "batch exponent tau must lie in (1/3, 1), got {tau}"
        )))
    }
}

fn is_half(tau: f64) -> bool {
    tau == 0.5
}

/// Largest power of two not exceeding `n^tau`.
pub fn target_batch_size(n: u64, tau: f64) -> Result<u64> {
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "batch size undefined for n = {n} < 4"
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    if is_half(tau) {
        // 2^k <= sqrt(n)  <=>  4^k <= n, exact in integers.
        let k = (63 - n.leading_zeros()) / 2;
        return Ok(1 << k);
    }
    let k = (tau * (n as f64).log2() + 1e-12).floor().max(0.0) as u32;
    Ok(1u64 << k.min(62))
}

/// `floor(n^tau)`, the uBM batch size.
pub fn ubm_batch_size(n: u64, tau: f64) -> u64 {
    if is_half(tau) {
        return n.isqrt();
    }
    let mut b = (n as f64).powf(tau).floor() as u64;
    // Correct for powf roundoff at exact powers.
    while ((b + 1) as f64).powf(1.0 / tau) <= n as f64 {
        b += 1;
    }
    while b > 1 && (b as f64).powf(1.0 / tau) > n as f64 {
        b -= 1;
    }
    b.max(1)
}

/// Batch means estimate from a row-major `n x dim` buffer using a fixed
/// `batch_size`. Trailing samples that do not fill a batch are discarded.
pub fn batch_means_sigma2(rows: &[f64], dim: usize, batch_size: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be positive".into(),
        ));
    }
    let n = rows.len() / dim;
    let batches = n / batch_size;
    if batches < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples give {batches} batches of size {batch_size}; need at least 2"
        )));
    }
    let mut means = vec![0.0; batches * dim];
    for (j, batch) in rows[..batches * batch_size * dim]
        .chunks_exact(batch_size * dim)
        .enumerate()
    {
        let out = &mut means[j * dim..(j + 1) * dim];
        for row in batch.chunks_exact(dim) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in out.iter_mut() {
            *o /= batch_size as f64;
        }
    }
    Ok(sigma2_from_batch_means(&means, dim, batch_size as u64))
}

/// `b / (a - 1) * sum_j (Y_j - Ybar)^2`, per coordinate.
fn sigma2_from_batch_means(means: &[f64], dim: usize, batch_size: u64) -> Vec<f64> {
    let a = means.len() / dim;
    let mut grand = vec![0.0; dim];
    for row in means.chunks_exact(dim) {
        for (g, y) in grand.iter_mut().zip(row) {
            *g += y;
        }
    }
    for g in grand.iter_mut() {
        *g /= a as f64;
    }
    let mut ss = vec![0.0; dim];
    for row in means.chunks_exact(dim) {
        for ((s, y), g) in ss.iter_mut().zip(row).zip(&grand) {
            let d = y - g;
            *s += d * d;
        }
    }
    // Identical batch means give exactly zero, even when the grand mean
    // carries summation roundoff.
    for (i, s) in ss.iter_mut().enumerate() {
        let first = means[i];
        if means.iter().skip(i).step_by(dim).all(|&y| y == first) {
            *s = 0.0;
        }
    }
    let scale = batch_size as f64 / (a - 1) as f64;
    ss.into_iter().map(|s| s * scale).collect()
}

/// Usual batch means over a stored chain: `b = floor(n^tau)`,
/// `a = floor(n / b)`, batches taken from the start.
pub fn ubm_sigma2(rows: &[f64], dim: usize, tau: f64) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    let n = (rows.len() / dim) as u64;
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "uBM needs at least 4 samples, have {n}"
        )));
    }
    batch_means_sigma2(rows, dim, ubm_batch_size(n, tau) as usize)
}

/// Streaming batch means with power-of-two batch sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmState {
    dim: usize,
    tau: f64,
    n: u64,
    batch_size: u64,
    /// Completed batch means, row-major `count x dim`.
    batch_means: Vec<f64>,
    partial_sum: Vec<f64>,
    partial_count: u64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    state: AbmState,
}

impl AbmState {
    pub fn new(dim: usize, tau: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        validate_tau(tau)?;
        Ok(AbmState {
            dim,
            tau,
            n: 0,
            batch_size: INITIAL_BATCH_SIZE,
            batch_means: Vec::new(),
            partial_sum: vec![0.0; dim],
            partial_count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn completed_batches(&self) -> usize {
        self.batch_means.len() / self.dim
    }

    pub fn partial_count(&self) -> u64 {
        self.partial_count
    }

    /// Mean of the `j`-th completed batch.
    pub fn batch_mean(&self, j: usize) -> &[f64] {
        &self.batch_means[j * self.dim..(j + 1) * self.dim]
    }

    /// Adds one draw. Returns `true` if the draw completed a batch.
    pub fn push(&mut self, x: &[f64]) -> Result<bool> {
        check_sample(x, self.dim)?;
        self.n += 1;
        self.partial_count += 1;
        for (s, v) in self.partial_sum.iter_mut().zip(x) {
            *s += v;
        }
        if self.partial_count < self.batch_size {
            return Ok(false);
        }
        let b = self.batch_size as f64;
        self.batch_means
            .extend(self.partial_sum.iter().map(|s| s / b));
        self.partial_sum.fill(0.0);
        self.partial_count = 0;
        self.maybe_double();
        Ok(true)
    }

    /// Doubling happens only at batch boundaries with an even number of
    /// completed batches; otherwise it waits for the next boundary.
    fn maybe_double(&mut self) {
        if self.n < 4 {
            return;
        }
        let Ok(target) = target_batch_size(self.n, self.tau) else {
            return;
        };
        while target >= 2 * self.batch_size && self.completed_batches().is_multiple_of(2) {
            let dim = self.dim;
            let pairs = self.completed_batches() / 2;
            for j in 0..pairs {
                for i in 0..dim {
                    let a = self.batch_means[2 * j * dim + i];
                    let b = self.batch_means[(2 * j + 1) * dim + i];
                    self.batch_means[j * dim + i] = 0.5 * (a + b);
                }
            }
            self.batch_means.truncate(pairs * dim);
            self.batch_size *= 2;
        }
    }

    /// Batch means estimate over completed batches; the partial batch is
    /// ignored.
    pub fn sigma2(&self) -> Result<Vec<f64>> {
        let a = self.completed_batches();
        if a < 2 {
            return Err(Error::InsufficientData(format!(
                "aBM needs at least 2 completed batches, have {a}"
            )));
        }
        Ok(sigma2_from_batch_means(
            &self.batch_means,
            self.dim,
            self.batch_size,
        ))
    }

    /// Equal-weight mean of the completed batch means.
    pub fn grand_mean(&self) -> Option<Vec<f64>> {
        let a = self.completed_batches();
        if a == 0 {
            return None;
        }
        let mut g = vec![0.0; self.dim];
        for row in self.batch_means.chunks_exact(self.dim) {
            for (g, y) in g.iter_mut().zip(row) {
                *g += y;
            }
        }
        Some(g.into_iter().map(|g| g / a as f64).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint {
            version: CHECKPOINT_VERSION,
            state: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(s)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported aBM checkpoint version {}",
                cp.version
            )));
        }
        let st = cp.state;
        let consistent = st.dim > 0
            && validate_tau(st.tau).is_ok()
            && st.batch_size.is_power_of_two()
            && st.batch_means.len().is_multiple_of(st.dim)
            && st.partial_sum.len() == st.dim
            && st.partial_count < st.batch_size
            && st.n == st.batch_size * st.completed_batches() as u64 + st.partial_count;
        if !consistent {
            return Err(Error::Format("inconsistent aBM checkpoint".into()));
        }
        Ok(st)
    }
}
