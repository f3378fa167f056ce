//! Built-in chains with analytically known moments.
//!
//! Every sampler starts from its stationary distribution when one is
//! available, so estimator tests see no burn-in. Each exposes its analytic
//! truth through [`AnalyticTruth`].
//!
//! Random streams: a sampler seeded with `seed` derives one
//! `Xoshiro256PlusPlus` stream per coordinate. Coordinate `i` uses the
//! generator `seed_from_u64(seed)` advanced by `i` calls to `jump()`
//! (2^128 steps each), so coordinate streams never overlap and the path of
//! coordinate `i` does not depend on the total dimension.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::SampleSource;

/// Per-coordinate stationary mean, variance and asymptotic CLT variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticTruth {
    pub mean: f64,
    pub lambda2: f64,
    pub sigma2: f64,
}

impl AnalyticTruth {
    /// ESS per iteration, `lambda2 / sigma2`.
    pub fn ess_rate(&self) -> f64 {
        self.lambda2 / self.sigma2
    }
}

pub fn coordinate_rngs(seed: u64, dim: usize) -> Vec<Xoshiro256PlusPlus> {
    let mut base = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dim);
    for _ in 0..dim {
        out.push(base.clone());
        base.jump();
    }
    out
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::ZeroDimension)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec {
    pub rho: f64,
    pub mu: f64,
    pub s2: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Ar1Spec {
    pub fn new(rho: f64, dim: usize, seed: u64) -> Self {
        Ar1Spec {
            rho,
            mu: 0.0,
            s2: 1.0,
            dim,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR(1) rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.s2 > 0.0 && self.s2.is_finite()) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(
                "AR(1) needs finite mu and s2 > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn truth(&self) -> AnalyticTruth {
        AnalyticTruth {
            mean: self.mu,
            lambda2: self.s2,
            sigma2: self.s2 * (1.0 + self.rho) / (1.0 - self.rho),
        }
    }
}

/// `X' = mu + rho (X - mu) + sqrt(s2 (1 - rho^2)) N(0, 1)`, independently
/// per coordinate.
#[derive(Debug, Clone)]
pub struct Ar1Sampler {
    spec: Ar1Spec,
    innovation_sd: f64,
    state: Vec<f64>,
    rngs: Vec<Xoshiro256PlusPlus>,
}

impl Ar1Sampler {
    pub fn new(spec: Ar1Spec) -> Result<Self> {
        spec.validate()?;
        let mut rngs = coordinate_rngs(spec.seed, spec.dim);
        let sd = spec.s2.sqrt();
        let state = rngs
            .iter_mut()
            .map(|rng| spec.mu + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Ar1Sampler {
            innovation_sd: (spec.s2 * (1.0 - spec.rho * spec.rho)).sqrt(),
            spec,
            state,
            rngs,
        })
    }

    pub fn spec(&self) -> &Ar1Spec {
        &self.spec
    }

    pub fn step(&mut self) -> &[f64] {
        let Ar1Spec { rho, mu, .. } = self.spec;
        for (x, rng) in self.state.iter_mut().zip(&mut self.rngs) {
            let z: f64 = rng.sample(StandardNormal);
            *x = mu + rho * (*x - mu) + self.innovation_sd * z;
        }
        &self.state
    }
}

impl SampleSource for Ar1Sampler {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        out.copy_from_slice(self.step());
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateSpec {
    pub p01: f64,
    pub p10: f64,
    pub dim: usize,
    pub seed: u64,
}

impl TwoStateSpec {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        for (name, p) in [("p01", self.p01), ("p10", self.p10)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "two-state {name} must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn stationary_one(&self) -> f64 {
        self.p01 / (self.p01 + self.p10)
    }

    pub fn truth(&self) -> AnalyticTruth {
        let pi = self.stationary_one();
        let lambda2 = pi * (1.0 - pi);
        let s = self.p01 + self.p10;
        AnalyticTruth {
            mean: pi,
            lambda2,
            sigma2: lambda2 * (2.0 - s) / s,
        }
    }
}

/// Independent 0/1 Markov chains: 0 -> 1 with probability `p01`,
/// 1 -> 0 with probability `p10`.
#[derive(Debug, Clone)]
pub struct TwoStateSampler {
    spec: TwoStateSpec,
    state: Vec<f64>,
    rngs: Vec<Xoshiro256PlusPlus>,
}

impl TwoStateSampler {
    pub fn new(spec: TwoStateSpec) -> Result<Self> {
        spec.validate()?;
        let mut rngs = coordinate_rngs(spec.seed, spec.dim);
        let pi = spec.stationary_one();
        let state = rngs
            .iter_mut()
            .map(|rng| if rng.random::<f64>() < pi { 1.0 } else { 0.0 })
            .collect();
        Ok(TwoStateSampler { spec, state, rngs })
    }

    pub fn step(&mut self) -> &[f64] {
        for (x, rng) in self.state.iter_mut().zip(&mut self.rngs) {
            let u: f64 = rng.random();
            let flip = if *x == 0.0 {
                self.spec.p01
            } else {
                self.spec.p10
            };
            if u < flip {
                *x = 1.0 - *x;
            }
        }
        &self.state
    }
}

impl SampleSource for TwoStateSampler {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        out.copy_from_slice(self.step());
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsBvnSpec {
    pub r: f64,
    pub seed: u64,
}

impl GibbsBvnSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bivariate normal correlation must lie in (-1, 1), got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// Each coordinate is an AR(1) with coefficient `r^2`.
    pub fn truth(&self) -> AnalyticTruth {
        let r2 = self.r * self.r;
        AnalyticTruth {
            mean: 0.0,
            lambda2: 1.0,
            sigma2: (1.0 + r2) / (1.0 - r2),
        }
    }
}

/// Two-block Gibbs sampler for a standard bivariate normal with
/// correlation `r`: `x1 ~ N(r x2, 1 - r^2)`, then `x2 ~ N(r x1, 1 - r^2)`.
#[derive(Debug, Clone)]
pub struct GibbsBvnSampler {
    spec: GibbsBvnSpec,
    cond_sd: f64,
    state: [f64; 2],
    rng: Xoshiro256PlusPlus,
}

impl GibbsBvnSampler {
    pub fn new(spec: GibbsBvnSpec) -> Result<Self> {
        Self::with_start(spec, [0.0, 0.0])
    }

    pub fn with_start(spec: GibbsBvnSpec, start: [f64; 2]) -> Result<Self> {
        spec.validate()?;
        if !start.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("Gibbs start must be finite".into()));
        }
        Ok(GibbsBvnSampler {
            cond_sd: (1.0 - spec.r * spec.r).sqrt(),
            spec,
            state: start,
            rng: Xoshiro256PlusPlus::seed_from_u64(spec.seed),
        })
    }

    pub fn step(&mut self) -> &[f64] {
        let r = self.spec.r;
        let z1: f64 = self.rng.sample(StandardNormal);
        self.state[0] = r * self.state[1] + self.cond_sd * z1;
        let z2: f64 = self.rng.sample(StandardNormal);
        self.state[1] = r * self.state[0] + self.cond_sd * z2;
        &self.state
    }
}

impl SampleSource for GibbsBvnSampler {
    fn dim(&self) -> usize {
        2
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        out.copy_from_slice(self.step());
        Ok(true)
    }
}

/// Any of the built-in samplers, for configuration-driven construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerSpec {
    Ar1(Ar1Spec),
    TwoState(TwoStateSpec),
    GibbsBvn(GibbsBvnSpec),
}

impl SamplerSpec {
    pub fn dim(&self) -> usize {
        match self {
            SamplerSpec::Ar1(s) => s.dim,
            SamplerSpec::TwoState(s) => s.dim,
            SamplerSpec::GibbsBvn(_) => 2,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SamplerSpec::Ar1(s) => s.seed,
            SamplerSpec::TwoState(s) => s.seed,
            SamplerSpec::GibbsBvn(s) => s.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            SamplerSpec::Ar1(s) => s.seed = seed,
            SamplerSpec::TwoState(s) => s.seed = seed,
            SamplerSpec::GibbsBvn(s) => s.seed = seed,
        }
        self
    }

    pub fn truth(&self) -> AnalyticTruth {
        match self {
            SamplerSpec::Ar1(s) => s.truth(),
            SamplerSpec::TwoState(s) => s.truth(),
            SamplerSpec::GibbsBvn(s) => s.truth(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn SampleSource + Send>> {
        Ok(match *self {
            SamplerSpec::Ar1(s) => Box::new(Ar1Sampler::new(s)?),
            SamplerSpec::TwoState(s) => Box::new(TwoStateSampler::new(s)?),
            SamplerSpec::GibbsBvn(s) => Box::new(GibbsBvnSampler::new(s)?),
        })
    }
}
