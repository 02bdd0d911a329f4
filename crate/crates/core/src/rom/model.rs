use serde::{Deserialize, Serialize};

use super::network::{
    decode_unchecked, encode_unchecked, LstmWeights, DECODER_FEATURES, ENCODER_FEATURES, TENSOR_ORDER,
};
use super::train::TrainConfig;
use super::RomError;
use crate::mcmc::Surrogate;
use crate::series::{denormalize, reassemble_windows, AffineScale, TimeSeries, WindowSpec};

pub const MODEL_FORMAT: &str = "rominv.lstm-autoencoder";
pub const MODEL_VERSION: u32 = 1;

/// A trained surrogate: weights, windowing and the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct RomModel {
    pub weights: LstmWeights,
    pub window: WindowSpec,
    pub time_scale: AffineScale,
    pub rate_scale: AffineScale,
    pub disp_scale: AffineScale,
    pub first_input: f64,
    pub training_rates: Vec<f64>,
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Dimensions {
    encoder_input: usize,
    decoder_input: usize,
    hidden: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Normalization {
    time: AffineScale,
    rate: AffineScale,
    displacement: AffineScale,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    dimensions: Dimensions,
    window: WindowSpec,
    normalization: Normalization,
    first_decoder_input: f64,
    training_rates: Vec<f64>,
    #[serde(default)]
    train_config: Option<TrainConfig>,
    tensors: Vec<NamedTensor>,
}

impl RomModel {
    pub fn to_json(&self) -> Result<String, RomError> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            dimensions: Dimensions {
                encoder_input: ENCODER_FEATURES,
                decoder_input: DECODER_FEATURES,
                hidden: self.weights.hidden,
            },
            window: self.window,
            normalization: Normalization {
                time: self.time_scale,
                rate: self.rate_scale,
                displacement: self.disp_scale,
            },
            first_decoder_input: self.first_input,
            training_rates: self.training_rates.clone(),
            train_config: self.train_config,
            tensors: TENSOR_ORDER
                .iter()
                .zip(self.weights.tensors())
                .map(|(name, t)| NamedTensor { name: name.to_string(), values: t.to_vec() })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, RomError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(RomError::BadDocument(format!("format `{}`, expected `{MODEL_FORMAT}`", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(RomError::BadDocument(format!("version {}, expected {MODEL_VERSION}", doc.version)));
        }
        let d = &doc.dimensions;
        if d.encoder_input != ENCODER_FEATURES || d.decoder_input != DECODER_FEATURES || d.hidden == 0 {
            return Err(RomError::BadDocument(format!(
                "dimensions {}/{}/{} unsupported",
                d.encoder_input, d.decoder_input, d.hidden
            )));
        }
        let names: Vec<&str> = doc.tensors.iter().map(|t| t.name.as_str()).collect();
        if names != TENSOR_ORDER {
            return Err(RomError::BadDocument(format!("tensor order {names:?}, expected {TENSOR_ORDER:?}")));
        }
        let flat: Vec<f64> = doc.tensors.iter().flat_map(|t| t.values.iter().copied()).collect();
        let mut weights = LstmWeights::zeros(d.hidden);
        for (tensor, expected) in doc.tensors.iter().zip(weights.tensors()) {
            if tensor.values.len() != expected.len() {
                return Err(RomError::BadDocument(format!(
                    "tensor {} has {} values, expected {}",
                    tensor.name,
                    tensor.values.len(),
                    expected.len()
                )));
            }
        }
        weights.set_flat(&flat)?;
        weights.validate()?;
        doc.window.validate()?;
        Ok(Self {
            weights,
            window: doc.window,
            time_scale: doc.normalization.time,
            rate_scale: doc.normalization.rate,
            disp_scale: doc.normalization.displacement,
            first_input: doc.first_decoder_input,
            training_rates: doc.training_rates,
            train_config: doc.train_config,
        })
    }

    /// True when `q` lies outside the span of training rates.
    pub fn is_extrapolating(&self, q: f64) -> bool {
        let (lo, hi) = (self.rate_scale.src_min, self.rate_scale.src_max);
        q < lo || q > hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub series: TimeSeries,
    /// Set when the rate or any time stamp lies outside the training data.
    pub extrapolated: bool,
}

fn uniform_step(times: &[f64]) -> Result<f64, RomError> {
    if times.is_empty() {
        return Err(RomError::BadTimes("no time stamps".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(RomError::BadTimes(format!("non-finite time stamp {t}")));
    }
    if times.len() == 1 {
        return Ok(1.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(RomError::BadTimes("time stamps must increase".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > 1e-9 * expected.abs().max(dt) {
            return Err(RomError::BadTimes(format!("time stamp {i} breaks uniform spacing")));
        }
    }
    Ok(dt)
}

fn predict(model: &RomModel, q: f64, times: &[f64]) -> Result<(Vec<f64>, f64), RomError> {
    let dt = uniform_step(times)?;
    let spec = model.window;
    let starts = spec.window_starts(times.len())?;
    let q_norm = model.rate_scale.apply(q);
    let t_norm: Vec<f64> = times.iter().map(|&t| model.time_scale.apply(t)).collect();
    let mut outputs = Vec::with_capacity(starts.len());
    let mut window = Vec::with_capacity(spec.length);
    for s in starts {
        window.clear();
        window.extend(t_norm[s..s + spec.length].iter().map(|&t| [t, q_norm]));
        let (h, c) = encode_unchecked(&window, &model.weights);
        outputs.push(decode_unchecked(&h, &c, spec.length, model.first_input, &model.weights));
    }
    let merged = reassemble_windows(spec, times.len(), &outputs)?;
    Ok((denormalize(&merged, &model.disp_scale), dt))
}

/// Windows the query grid per the model's spec, decodes every window and
/// averages overlaps back onto the grid, in meters.
pub fn reconstruct(model: &RomModel, q: f64, times: &[f64]) -> Result<Reconstruction, RomError> {
    if !q.is_finite() {
        return Err(RomError::NonFinite(format!("rate {q}")));
    }
    let (values, dt) = predict(model, q, times)?;
    let (t_lo, t_hi) = (model.time_scale.src_min, model.time_scale.src_max);
    let extrapolated = model.is_extrapolating(q) || times.iter().any(|&t| t < t_lo || t > t_hi);
    if extrapolated {
        log::warn!("reconstruction at q={q} extrapolates beyond the training data");
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(RomError::NonFinite(format!("reconstruction produced {v}")));
    }
    let series = TimeSeries::new(times[0], dt, values, format!("rom[{}] q={q}", model.window.regime))?;
    Ok(Reconstruction { series, extrapolated })
}

/// Predicted displacements for the likelihood. Same values as [`reconstruct`],
/// without the extrapolation bookkeeping.
pub fn rom_evaluate(model: &RomModel, q: f64, times: &[f64]) -> Result<Vec<f64>, RomError> {
    if !q.is_finite() {
        return Err(RomError::NonFinite(format!("rate {q}")));
    }
    Ok(predict(model, q, times)?.0)
}

impl Surrogate for RomModel {
    type Error = RomError;

    fn evaluate(&self, q: f64, times: &[f64]) -> Result<Vec<f64>, RomError> {
        rom_evaluate(self, q, times)
    }
}
