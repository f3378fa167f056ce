//! Single-pass moment tracking for p-dimensional chains.
//!
//! [`MomentAccumulator`] keeps, per coordinate, the running mean and the
//! running sum of squared deviations (the `M2` term of the Welford
//! recurrence). Memory is O(p) regardless of chain length. Two accumulators
//! built over disjoint pieces of a stream can be combined with
//! [`MomentAccumulator::merge`], which is how chunked and sharded ingestion
//! is expressed.

use serde::{Deserialize, Serialize};

use crate::error::{check_sample, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    n: u64,
    mean: Vec<f64>,
    sq_dev_sum: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(MomentAccumulator {
            n: 0,
            mean: vec![0.0; dim],
            sq_dev_sum: vec![0.0; dim],
        })
    }

    /// Builds an accumulator from a row-major `n x dim` buffer.
    pub fn from_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        let mut acc = Self::new(dim)?;
        for row in rows.chunks(dim) {
            acc.push(row)?;
        }
        Ok(acc)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds one draw. The accumulator is left untouched on error.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        check_sample(x, self.dim())?;
        self.n += 1;
        let n = self.n as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.sq_dev_sum).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
        Ok(())
    }

    /// The Monte Carlo estimate Z(n), the componentwise sample mean.
    pub fn mean(&self) -> Result<&[f64]> {
        if self.n == 0 {
            return Err(Error::InsufficientData(
                "mean of an empty accumulator".into(),
            ));
        }
        Ok(&self.mean)
    }

    pub fn sq_dev_sum(&self) -> &[f64] {
        &self.sq_dev_sum
    }

    /// Sample variance with the `n - 1` divisor, the estimator of the
    /// target variance of each coordinate.
    pub fn posterior_variance(&self) -> Result<Vec<f64>> {
        if self.n < 2 {
            return Err(Error::InsufficientData(format!(
                "posterior variance needs at least 2 samples, have {}",
                self.n
            )));
        }
        let denom = (self.n - 1) as f64;
        Ok(self
            .sq_dev_sum
            .iter()
            .map(|m2| m2.max(0.0) / denom)
            .collect())
    }

    pub fn posterior_sd(&self) -> Result<Vec<f64>> {
        Ok(self
            .posterior_variance()?
            .into_iter()
            .map(f64::sqrt)
            .collect())
    }

    /// Combines two accumulators as if every sample of `other` had been
    /// pushed into `self`.
    pub fn merge(&self, other: &MomentAccumulator) -> Result<MomentAccumulator> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &MomentAccumulator) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let total = na + nb;
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * (nb / total);
            self.sq_dev_sum[i] += other.sq_dev_sum[i] + delta * delta * (na * nb / total);
        }
        self.n += other.n;
        Ok(())
    }
}
