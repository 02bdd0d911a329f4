//! Adaptive Metropolis inversion of a scalar injection rate.
//!
//! Each iteration proposes `q* ~ N(q, V)`. Proposals outside the open box
//! `(q_l, q_u)` are rejected without touching the surrogate. Inside the box a
//! noise variance is drawn from its inverse-gamma conditional given the
//! proposal's residuals, and the proposal is accepted with the Metropolis
//! ratio of Gaussian likelihoods evaluated at that shared variance. Every
//! `m0` iterations `V` is re-estimated from the last `m0` states.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::{synth_displacement, ForwardParams};
use crate::rng::SeededRng;
use crate::series::TimeSeries;

/// Optimal random-walk scaling `2.38^2 / d` for one dimension.
pub const SCALE_1D: f64 = 2.38 * 2.38;
/// Covariance floor, as a fraction of the squared bound width.
pub const COV_REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("invalid MCMC config: {0}")]
    BadConfig(String),
    #[error("noise variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("data has {data} values, prediction has {predicted}")]
    LengthMismatch { data: usize, predicted: usize },
    #[error("inverse-gamma parameters must be positive (shape {shape}, scale {scale})")]
    BadParameters { shape: f64, scale: f64 },
    #[error("covariance update needs at least 2 samples, got {0}")]
    ShortHistory(usize),
    #[error("no samples left after burn-in")]
    EmptyPostBurnIn,
    #[error("surrogate failed at q = {q}: {source}")]
    Surrogate {
        q: f64,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("surrogate returned a non-finite prediction at q = {0}")]
    NonFinitePrediction(f64),
}

/// Evaluation contract for the forward map `F(q)` on a time grid.
///
/// Implementations must be deterministic: identical arguments give identical output.
pub trait Surrogate: Sync {
    type Error: std::error::Error + Send + Sync + 'static;

    fn evaluate(&self, q: f64, times: &[f64]) -> Result<Vec<f64>, Self::Error>;
}

/// The synthetic forward model used directly as its own surrogate.
impl Surrogate for ForwardParams {
    type Error = std::convert::Infallible;

    fn evaluate(&self, q: f64, times: &[f64]) -> Result<Vec<f64>, Self::Error> {
        Ok(times.iter().map(|&t| synth_displacement(t, q, self)).collect())
    }
}

impl<S: Surrogate> Surrogate for &S {
    type Error = S::Error;

    fn evaluate(&self, q: f64, times: &[f64]) -> Result<Vec<f64>, Self::Error> {
        (*self).evaluate(q, times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Flat on the bounds.
    Uniform,
    Gaussian {
        mean: f64,
        std: f64,
    },
}

impl Prior {
    fn log_density(&self, q: f64) -> f64 {
        match *self {
            Prior::Uniform => 0.0,
            Prior::Gaussian { mean, std } => -0.5 * ((q - mean) / std).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub q0: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    pub n: usize,
    pub m0: usize,
    pub burn_in_fraction: f64,
    pub ig_shape: f64,
    pub ig_scale: f64,
    pub seed: u64,
    #[serde(default = "default_prior")]
    pub prior: Prior,
    /// Pins the noise variance instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_sigma2: Option<f64>,
    /// Initial proposal variance; defaults to `(0.1 * max(q0, 1))^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_cov: Option<f64>,
}

fn default_prior() -> Prior {
    Prior::Uniform
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            q0: 1.0,
            q_lower: 1.0,
            q_upper: 500.0,
            n: 10_000,
            m0: 100,
            burn_in_fraction: 0.5,
            ig_shape: 0.01,
            ig_scale: 0.01,
            seed: 7,
            prior: Prior::Uniform,
            fixed_sigma2: None,
            initial_cov: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: String| Err(McmcError::BadConfig(m));
        if !(self.q_lower < self.q_upper) || !self.q_lower.is_finite() || !self.q_upper.is_finite() {
            return bad(format!("bounds [{}, {}] must satisfy q_l < q_u", self.q_lower, self.q_upper));
        }
        if !(self.q0 >= self.q_lower && self.q0 <= self.q_upper) {
            return bad(format!("q0 = {} outside [{}, {}]", self.q0, self.q_lower, self.q_upper));
        }
        if self.m0 < 2 {
            return bad(format!("adaptation interval m0 = {} must be at least 2", self.m0));
        }
        if self.n < self.m0 {
            return bad(format!("n = {} must be at least m0 = {}", self.n, self.m0));
        }
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            return bad(format!("burn-in fraction {} must lie in (0, 1)", self.burn_in_fraction));
        }
        if !(self.ig_shape > 0.0 && self.ig_scale > 0.0) {
            return bad(format!("inverse-gamma shape/scale must be positive ({}, {})", self.ig_shape, self.ig_scale));
        }
        if let Some(s2) = self.fixed_sigma2 {
            if !(s2 > 0.0) {
                return bad(format!("fixed sigma2 must be positive, got {s2}"));
            }
        }
        if let Some(v) = self.initial_cov {
            if !(v >= 0.0) {
                return bad(format!("initial covariance must be >= 0, got {v}"));
            }
        }
        if let Prior::Gaussian { std, .. } = self.prior {
            if !(std > 0.0) {
                return bad(format!("Gaussian prior std must be positive, got {std}"));
            }
        }
        Ok(())
    }

    pub fn initial_covariance(&self) -> f64 {
        self.initial_cov.unwrap_or_else(|| (0.1 * self.q0.max(1.0)).powi(2))
    }
}

/// Proposal variance in force from `iteration` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariancePoint {
    pub iteration: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// State after each iteration.
    pub samples: Vec<f64>,
    /// Variance drawn at each iteration; `None` when the proposal left the bounds.
    pub sigma2s: Vec<Option<f64>>,
    pub accepted: Vec<bool>,
    /// Initial covariance, then one entry per adaptation.
    pub cov_trace: Vec<CovariancePoint>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `iter,q,sigma2,accepted` rows; iterations count from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,q,sigma2,accepted")?;
        for (i, ((q, s2), acc)) in self.samples.iter().zip(&self.sigma2s).zip(&self.accepted).enumerate() {
            let s2 = s2.map_or(String::new(), |v| v.to_string());
            writeln!(w, "{},{},{},{}", i + 1, q, s2, u8::from(*acc))?;
        }
        Ok(())
    }
}

/// Gaussian log-likelihood `-(n/2) ln(2 pi sigma2) - SSE / (2 sigma2)`.
pub fn log_likelihood(data: &[f64], predicted: &[f64], sigma2: f64) -> Result<f64, McmcError> {
    if data.len() != predicted.len() || data.is_empty() {
        return Err(McmcError::LengthMismatch { data: data.len(), predicted: predicted.len() });
    }
    if !(sigma2 > 0.0) {
        return Err(McmcError::NonPositiveVariance(sigma2));
    }
    Ok(log_likelihood_sse(data.len(), sse(data, predicted), sigma2))
}

fn log_likelihood_sse(n: usize, sse: f64, sigma2: f64) -> f64 {
    -0.5 * n as f64 * (std::f64::consts::TAU * sigma2).ln() - sse / (2.0 * sigma2)
}

fn sse(data: &[f64], predicted: &[f64]) -> f64 {
    data.iter().zip(predicted).map(|(d, p)| (d - p).powi(2)).sum()
}

pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut SeededRng) -> Result<f64, McmcError> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(McmcError::BadParameters { shape, scale });
    }
    Ok(rng.inverse_gamma(shape, scale))
}

/// Random-walk proposal `q + sqrt(cov) z`.
pub fn propose(q: f64, cov: f64, rng: &mut SeededRng) -> f64 {
    let z = rng.standard_normal();
    if cov == 0.0 {
        q
    } else {
        q + cov.sqrt() * z
    }
}

/// `s_d * (sample variance + eps)` over the adaptation window, where `eps`
/// is `COV_REGULARIZATION * (q_u - q_l)^2`.
pub fn update_covariance(history: &[f64], bound_width: f64) -> Result<f64, McmcError> {
    if history.len() < 2 {
        return Err(McmcError::ShortHistory(history.len()));
    }
    let n = history.len() as f64;
    let mean = history.iter().sum::<f64>() / n;
    let var = history.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let reg = COV_REGULARIZATION * bound_width * bound_width;
    Ok(SCALE_1D * var + SCALE_1D * reg)
}

fn evaluate_sse<S: Surrogate>(surrogate: &S, q: f64, times: &[f64], data: &[f64]) -> Result<f64, McmcError> {
    let pred = surrogate.evaluate(q, times).map_err(|e| McmcError::Surrogate { q, source: Box::new(e) })?;
    if pred.len() != data.len() {
        return Err(McmcError::LengthMismatch { data: data.len(), predicted: pred.len() });
    }
    let s = sse(data, &pred);
    if !s.is_finite() {
        return Err(McmcError::NonFinitePrediction(q));
    }
    Ok(s)
}

/// Metropolis test. A non-negative log ratio accepts without consuming randomness.
pub fn metropolis_accept(log_ratio: f64, rng: &mut SeededRng) -> bool {
    log_ratio >= 0.0 || rng.uniform_open0().ln() < log_ratio
}

/// Runs `cfg.n` adaptive Metropolis iterations against `data`.
pub fn run_chain<S: Surrogate>(cfg: &McmcConfig, surrogate: &S, data: &TimeSeries) -> Result<Chain, McmcError> {
    cfg.validate()?;
    let times = data.times();
    let obs = data.values();
    let n_data = obs.len();
    let mut rng = SeededRng::new(cfg.seed);

    let mut q = cfg.q0;
    let mut sse_q = evaluate_sse(surrogate, q, &times, obs)?;
    let mut cov = cfg.initial_covariance();
    let width = cfg.q_upper - cfg.q_lower;

    let mut chain = Chain {
        samples: Vec::with_capacity(cfg.n),
        sigma2s: Vec::with_capacity(cfg.n),
        accepted: Vec::with_capacity(cfg.n),
        cov_trace: vec![CovariancePoint { iteration: 0, value: cov }],
    };

    for m in 1..=cfg.n {
        let proposal = propose(q, cov, &mut rng);
        if !(proposal > cfg.q_lower && proposal < cfg.q_upper) {
            chain.samples.push(q);
            chain.sigma2s.push(None);
            chain.accepted.push(false);
        } else {
            let sse_p = evaluate_sse(surrogate, proposal, &times, obs)?;
            let sigma2 = match cfg.fixed_sigma2 {
                Some(s2) => s2,
                None => sample_inverse_gamma(cfg.ig_shape + 0.5 * n_data as f64, cfg.ig_scale + 0.5 * sse_p, &mut rng)?,
            };
            let log_ratio = log_likelihood_sse(n_data, sse_p, sigma2) - log_likelihood_sse(n_data, sse_q, sigma2)
                + cfg.prior.log_density(proposal)
                - cfg.prior.log_density(q);
            let accept = metropolis_accept(log_ratio, &mut rng);
            if accept {
                q = proposal;
                sse_q = sse_p;
            }
            chain.samples.push(q);
            chain.sigma2s.push(Some(sigma2));
            chain.accepted.push(accept);
        }
        if m % cfg.m0 == 0 {
            cov = update_covariance(&chain.samples[m - cfg.m0..m], width)?;
            chain.cov_trace.push(CovariancePoint { iteration: m, value: cov });
        }
    }
    Ok(chain)
}

/// Summary statistics of the post-burn-in samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    /// Fraction of post-burn-in iterations that accepted their proposal.
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub samples_used: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Statistics over samples with index `>= ceil(fraction * n)`.
pub fn summarize(chain: &Chain, burn_in_fraction: f64) -> Result<Posterior, McmcError> {
    if !(burn_in_fraction > 0.0 && burn_in_fraction < 1.0) {
        return Err(McmcError::BadConfig(format!("burn-in fraction {burn_in_fraction} must lie in (0, 1)")));
    }
    let burn_in = (burn_in_fraction * chain.len() as f64).ceil() as usize;
    if burn_in >= chain.len() {
        return Err(McmcError::EmptyPostBurnIn);
    }
    let kept = &chain.samples[burn_in..];
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let std =
        if kept.len() > 1 { (kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    let mut sorted = kept.to_vec();
    sorted.sort_by(f64::total_cmp);
    let accepted = chain.accepted[burn_in..].iter().filter(|&&a| a).count();
    Ok(Posterior {
        mean,
        std,
        median: quantile(&sorted, 0.5),
        q05: quantile(&sorted, 0.05),
        q95: quantile(&sorted, 0.95),
        acceptance_rate: accepted as f64 / n,
        burn_in,
        samples_used: kept.len(),
    })
}
