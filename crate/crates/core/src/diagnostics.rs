//! Effective sample size, Geweke's convergence diagnostic and the
//! width-to-spread quality ratio.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::batch_means::{batch_means_sigma2, target_batch_size};
use crate::error::{Error, Result};
use crate::normal::two_sided_p_value;

/// Variance-ratio ESS, `n * lambda2 / sigma2` per coordinate.
pub fn ess_ratio(n: u64, lambda2: &[f64], sigma2: &[f64]) -> Result<Vec<f64>> {
    if lambda2.len() != sigma2.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda2.len(),
            actual: sigma2.len(),
        });
    }
    lambda2
        .iter()
        .zip(sigma2)
        .enumerate()
        .map(|(i, (&l2, &s2))| {
            if s2 > 0.0 {
                Ok(n as f64 * l2 / s2)
            } else {
                Err(Error::Degenerate {
                    coordinate: i,
                    reason: "zero asymptotic variance estimate",
                })
            }
        })
        .collect()
}

/// An ESS value prepared for reporting: capped at `2n`, flagged when it
/// exceeds `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedEss {
    pub value: f64,
    pub above_n: bool,
    pub capped: bool,
}

impl ReportedEss {
    pub fn new(ess: f64, n: u64) -> Self {
        let cap = 2.0 * n as f64;
        ReportedEss {
            value: ess.min(cap),
            above_n: ess > n as f64,
            capped: ess > cap,
        }
    }
}

/// Both ESS estimates for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssPair {
    pub n: u64,
    pub ess_ratio: Vec<Option<ReportedEss>>,
    pub ess_acf: Vec<Option<ReportedEss>>,
}

impl EssPair {
    /// Computes both forms from a stored row-major chain. Degenerate
    /// coordinates yield `None`.
    pub fn from_chain(rows: &[f64], dim: usize, lambda2: &[f64], sigma2: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let n = (rows.len() / dim) as u64;
        let ratio = (0..dim)
            .map(|i| {
                ess_ratio(n, &lambda2[i..=i], &sigma2[i..=i])
                    .ok()
                    .map(|v| ReportedEss::new(v[0], n))
            })
            .collect();
        let acf = (0..dim)
            .map(|i| {
                ess_acf(&column(rows, dim, i))
                    .ok()
                    .map(|v| ReportedEss::new(v, n))
            })
            .collect();
        Ok(EssPair {
            n,
            ess_ratio: ratio,
            ess_acf: acf,
        })
    }
}

/// Copies coordinate `j` out of a row-major buffer.
pub fn column(rows: &[f64], dim: usize, j: usize) -> Vec<f64> {
    rows.iter().skip(j).step_by(dim).copied().collect()
}

/// Biased (1/n) sample autocorrelations for lags `0..n`, computed by FFT.
pub fn autocorrelations(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "autocorrelation needs at least 2 samples".into(),
        ));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(Error::Degenerate {
            coordinate: 0,
            reason: "zero-variance series",
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) {
        return Err(Error::Degenerate {
            coordinate: 0,
            reason: "zero-variance series",
        });
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Autocorrelation ESS, `n / (1 + 2 sum_k rho_k)`.
///
/// The sum is truncated with the initial positive sequence rule: lag pairs
/// `rho_{2m} + rho_{2m+1}` are accumulated while positive. The integrated
/// autocorrelation time is floored at 1/2, so the result never exceeds `2n`.
pub fn ess_acf(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "ESS needs at least 10 samples, have {n}"
        )));
    }
    let rho = autocorrelations(series)?;
    let mut pair_sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho[2 * m] + rho[2 * m + 1];
        if gamma <= 0.0 {
            break;
        }
        pair_sum += gamma;
        m += 1;
    }
    // 1 + 2 sum_{k>=1} rho_k = -1 + 2 sum_{m} gamma_m
    let tau = if m == 0 { 1.0 } else { -1.0 + 2.0 * pair_sum };
    Ok(n as f64 / tau.max(0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub frac1: f64,
    pub frac2: f64,
    pub alpha: f64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            frac1: 0.1,
            frac2: 0.5,
            alpha: 0.05,
        }
    }
}

impl GewekeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.frac1 > 0.0
            && self.frac2 > 0.0
            && self.frac1 + self.frac2 <= 1.0
            && self.alpha > 0.0
            && self.alpha < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "Geweke needs positive fractions summing to at most 1 and alpha in (0, 1), got {self:?}"
            )))
        }
    }

    /// Lengths of the leading and trailing segments for a chain of `n`.
    pub fn segment_lengths(&self, n: usize) -> (usize, usize) {
        (
            (self.frac1 * n as f64).floor() as usize,
            (self.frac2 * n as f64).floor() as usize,
        )
    }
}

const MIN_SEGMENT: usize = 16;

fn segment_mean_and_s0(seg: &[f64]) -> Option<(f64, f64)> {
    let n = seg.len();
    let mean = seg.iter().sum::<f64>() / n as f64;
    if seg.iter().all(|&v| v == seg[0]) {
        return None;
    }
    let b = target_batch_size(n as u64, 0.5).ok()? as usize;
    let s0 = batch_means_sigma2(seg, 1, b).ok()?[0];
    Some((mean, s0))
}

/// Geweke z-score comparing the leading `frac1` and trailing `frac2`
/// portions of a scalar series. The zero-frequency spectral density of
/// each segment is estimated by batch means with batch size equal to the
/// largest power of two not exceeding the square root of the segment
/// length.
///
/// Returns `Ok(None)` when the statistic is undefined (a constant segment
/// or a zero denominator).
pub fn geweke_z(series: &[f64], frac1: f64, frac2: f64) -> Result<Option<f64>> {
    let cfg = GewekeConfig {
        frac1,
        frac2,
        ..GewekeConfig::default()
    };
    cfg.validate()?;
    let n = series.len();
    let (n1, n2) = cfg.segment_lengths(n);
    if n1 < MIN_SEGMENT || n2 < MIN_SEGMENT {
        return Err(Error::InsufficientData(format!(
            "Geweke segments of {n1} and {n2} samples; need at least {MIN_SEGMENT} each"
        )));
    }
    let first = &series[..n1];
    let last = &series[n - n2..];
    let (Some((m1, s1)), Some((m2, s2))) = (segment_mean_and_s0(first), segment_mean_and_s0(last))
    else {
        return Ok(None);
    };
    let denom = (s1 / n1 as f64 + s2 / n2 as f64).sqrt();
    if !(denom > 0.0 && denom.is_finite()) {
        return Ok(None);
    }
    Ok(Some((m1 - m2) / denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub n1: usize,
    pub n2: usize,
    pub frac1: f64,
    pub frac2: f64,
    pub alpha: f64,
    /// `None` marks an undetermined coordinate.
    pub z: Vec<Option<f64>>,
    pub converged: Vec<Option<bool>>,
    /// Every determined coordinate passed.
    pub overall: bool,
    pub undetermined: usize,
}

/// Per-coordinate Geweke test over a row-major chain. A coordinate passes
/// when its two-sided p-value is at least `alpha`; no multiplicity
/// correction is applied. Undetermined coordinates are left out of the
/// overall verdict and counted.
pub fn geweke(rows: &[f64], dim: usize, cfg: &GewekeConfig) -> Result<GewekeResult> {
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let n = rows.len() / dim;
    let (n1, n2) = cfg.segment_lengths(n);
    let z = (0..dim)
        .map(|j| geweke_z(&column(rows, dim, j), cfg.frac1, cfg.frac2))
        .collect::<Result<Vec<_>>>()?;
    let converged: Vec<Option<bool>> = z
        .iter()
        .map(|z| z.map(|z| two_sided_p_value(z) >= cfg.alpha))
        .collect();
    let undetermined = converged.iter().filter(|c| c.is_none()).count();
    Ok(GewekeResult {
        n1,
        n2,
        frac1: cfg.frac1,
        frac2: cfg.frac2,
        alpha: cfg.alpha,
        overall: converged.iter().all(|c| c.unwrap_or(true)),
        z,
        converged,
        undetermined,
    })
}

/// [`geweke`] with the default 0.1 / 0.5 split.
pub fn geweke_converged(rows: &[f64], dim: usize, alpha: f64) -> Result<GewekeResult> {
    geweke(
        rows,
        dim,
        &GewekeConfig {
            alpha,
            ..GewekeConfig::default()
        },
    )
}

/// `w_i / lambda_hat_i`: interval width relative to the posterior spread.
pub fn quality_ratios(widths: &[f64], lambda_hat: &[f64]) -> Result<Vec<f64>> {
    if widths.len() != lambda_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: widths.len(),
            actual: lambda_hat.len(),
        });
    }
    widths
        .iter()
        .zip(lambda_hat)
        .enumerate()
        .map(|(i, (&w, &l))| {
            if l > 0.0 {
                Ok(w / l)
            } else {
                Err(Error::Degenerate {
                    coordinate: i,
                    reason: "zero posterior standard deviation",
                })
            }
        })
        .collect()
}
