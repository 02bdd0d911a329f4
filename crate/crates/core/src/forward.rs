//! Parametric displacement generator standing in for the poroelastic
//! simulator, plus slip-weakening friction and Mohr–Coulomb fault strength.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{SeriesError, TimeSeries};

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("invalid forward parameters: {0}")]
    BadParams(String),
    #[error("injection rate {0} listed twice")]
    DuplicateRate(f64),
    #[error("injection rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("invalid friction law: {0}")]
    BadFriction(String),
    #[error("fault normal must be a unit vector (|n| = {0})")]
    NonUnitNormal(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Shape parameters of the synthetic displacement curve `u(t; q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardParams {
    /// Reference injection rate, MSCF/day.
    pub q_ref: f64,
    /// Saturating-rise amplitude, m.
    pub amp_lin: f64,
    /// Amplitude of the term quadratic in rate and linear in time, m.
    pub amp_quad: f64,
    /// Oscillation amplitude, m.
    pub amp_osc: f64,
    /// Rise time, days.
    pub tau: f64,
    /// Oscillation period, days.
    pub period: f64,
    /// Total simulated time, days.
    pub horizon: f64,
    /// Sampling step, days.
    pub dt: f64,
    /// Optional cap on the number of samples per series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
}

impl Default for ForwardParams {
    fn default() -> Self {
        Self {
            q_ref: 100.0,
            amp_lin: 0.01,
            amp_quad: 0.005,
            amp_osc: 0.002,
            tau: 20.0,
            period: 30.0,
            horizon: 114.0,
            dt: 1.0,
            max_samples: None,
        }
    }
}

impl ForwardParams {
    pub fn validate(&self) -> Result<(), ForwardError> {
        let named = [
            ("q_ref", self.q_ref),
            ("amp_lin", self.amp_lin),
            ("amp_quad", self.amp_quad),
            ("amp_osc", self.amp_osc),
            ("tau", self.tau),
            ("period", self.period),
            ("horizon", self.horizon),
            ("dt", self.dt),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(ForwardError::BadParams(format!("{name} must be positive, got {v}")));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(ForwardError::BadParams(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.max_samples == Some(0) {
            return Err(ForwardError::BadParams("max_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// `horizon / dt + 1`, capped by `max_samples`.
    pub fn sample_count(&self) -> usize {
        let n = (self.horizon / self.dt).round() as usize + 1;
        self.max_samples.map_or(n, |cap| n.min(cap))
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.sample_count()).map(|i| i as f64 * self.dt).collect()
    }
}

/// Synthetic surface displacement (m) at time `t` (days) for rate `q`:
///
/// `amp_lin·r·(1 − e^(−t/τ)) + amp_quad·r²·(t/horizon) + amp_osc·r·sin(2πt/period)`
/// with `r = q / q_ref`.
pub fn synth_displacement(t: f64, q: f64, p: &ForwardParams) -> f64 {
    let r = q / p.q_ref;
    p.amp_lin * r * (1.0 - (-t / p.tau).exp())
        + p.amp_quad * r * r * (t / p.horizon)
        + p.amp_osc * r * (std::f64::consts::TAU * t / p.period).sin()
}

pub fn synth_series(q: f64, p: &ForwardParams) -> Result<TimeSeries, ForwardError> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(ForwardError::BadRate(q));
    }
    let values = p.times().iter().map(|&t| synth_displacement(t, q, p)).collect();
    Ok(TimeSeries::new(0.0, p.dt, values, format!("synthetic q={q}"))?)
}

/// Key for rate-indexed maps. Orders by numeric value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate(pub f64);

impl Eq for Rate {}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// One noise-free series per injection rate.
pub fn generate_dataset(rates: &[f64], p: &ForwardParams) -> Result<BTreeMap<Rate, TimeSeries>, ForwardError> {
    p.validate()?;
    let mut out = BTreeMap::new();
    for &q in rates {
        let series = synth_series(q, p)?;
        if out.insert(Rate(q), series).is_some() {
            return Err(ForwardError::DuplicateRate(q));
        }
    }
    Ok(out)
}

/// Linear slip-weakening friction law with Mohr–Coulomb cohesion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionLaw {
    pub mu_s: f64,
    pub mu_d: f64,
    /// Critical slip distance, m.
    pub d_c: f64,
    /// Cohesive strength, Pa.
    pub tau_c: f64,
}

impl FrictionLaw {
    pub fn new(mu_s: f64, mu_d: f64, d_c: f64, tau_c: f64) -> Result<Self, ForwardError> {
        if !(mu_s >= mu_d && mu_d >= 0.0) {
            return Err(ForwardError::BadFriction(format!("need mu_s >= mu_d >= 0, got {mu_s}, {mu_d}")));
        }
        if !(d_c > 0.0) {
            return Err(ForwardError::BadFriction(format!("d_c must be positive, got {d_c}")));
        }
        if !(tau_c >= 0.0) {
            return Err(ForwardError::BadFriction(format!("tau_c must be >= 0, got {tau_c}")));
        }
        Ok(Self { mu_s, mu_d, d_c, tau_c })
    }
}

impl Default for FrictionLaw {
    /// μs = 0.5, μd = 0.2 over 5 mm, cohesionless.
    fn default() -> Self {
        Self { mu_s: 0.5, mu_d: 0.2, d_c: 0.005, tau_c: 0.0 }
    }
}

pub fn friction_coefficient(slip_mag: f64, law: &FrictionLaw) -> f64 {
    let d = slip_mag.abs();
    if d <= law.d_c {
        law.mu_s - (law.mu_s - law.mu_d) * d / law.d_c
    } else {
        law.mu_d
    }
}

/// Shear stress and frictional strength on a fault with traction `l` and unit normal `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultStress {
    pub tau: f64,
    pub tau_f: f64,
}

impl FaultStress {
    pub fn is_slipping(&self) -> bool {
        self.tau > self.tau_f
    }
}

pub fn fault_strength<const D: usize>(
    traction: [f64; D],
    normal: [f64; D],
    law: &FrictionLaw,
    mu_f: f64,
) -> Result<FaultStress, ForwardError> {
    let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(ForwardError::NonUnitNormal(norm));
    }
    let ln: f64 = traction.iter().zip(&normal).map(|(a, b)| a * b).sum();
    let tau = traction.iter().zip(&normal).map(|(l, n)| (l - ln * n).powi(2)).sum::<f64>().sqrt();
    let tau_f = if ln < 0.0 { law.tau_c - mu_f * ln } else { law.tau_c };
    Ok(FaultStress { tau, tau_f })
}
