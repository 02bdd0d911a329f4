use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::RomModel;
use super::network::{window_loss, window_loss_grad, DecoderFeed, LstmWeights, ENCODER_FEATURES};
use super::RomError;
use crate::forward::Rate;
use crate::rng::SeededRng;
use crate::series::{AffineScale, TimeSeries, WindowSpec};

/// Normalized decoder input for the first step.
pub(crate) const FIRST_DECODER_INPUT: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub teacher_forcing: bool,
    pub window: WindowSpec,
    pub hidden: usize,
    /// Windows per Adam step. Each epoch visits every window once in a seeded shuffled order.
    pub batch_size: usize,
}

impl TrainConfig {
    /// Windows of 23 with stride 23.
    pub fn nonoverlapping() -> Self {
        Self::with_window(WindowSpec::nonoverlapping(23))
    }

    /// Windows of 10 with stride 1.
    pub fn sliding() -> Self {
        Self::with_window(WindowSpec::sliding(10))
    }

    pub fn with_window(window: WindowSpec) -> Self {
        Self {
            epochs: 10,
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 7,
            teacher_forcing: true,
            window,
            hidden: 5,
            batch_size: 1,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn feed(&self) -> DecoderFeed {
        if self.teacher_forcing {
            DecoderFeed::TeacherForced
        } else {
            DecoderFeed::Autoregressive
        }
    }

    pub fn validate(&self) -> Result<(), RomError> {
        let bad = |msg: String| Err(RomError::BadConfig(msg));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden size and batch size must be positive".into());
        }
        self.window.validate()?;
        Ok(())
    }
}

/// Loss over the whole training set, before training and after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn initial(&self) -> f64 {
        self.epoch_losses[0]
    }

    pub fn last(&self) -> f64 {
        *self.epoch_losses.last().expect("log holds the initial loss")
    }

    /// `epoch,loss` rows, epoch 0 being the untrained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{e},{l}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRom {
    pub model: RomModel,
    pub log: TrainingLog,
}

struct Sample {
    inputs: Vec<[f64; ENCODER_FEATURES]>,
    targets: Vec<f64>,
}

fn dataset_loss(samples: &[Sample], feed: DecoderFeed, w: &LstmWeights) -> f64 {
    samples.iter().map(|s| window_loss(&s.inputs, &s.targets, FIRST_DECODER_INPUT, feed, w)).sum::<f64>()
        / samples.len() as f64
}

/// Trains one model on every window of every rate.
pub fn train(dataset: &BTreeMap<Rate, TimeSeries>, cfg: &TrainConfig) -> Result<TrainedRom, RomError> {
    cfg.validate()?;
    let first = dataset.values().next().ok_or_else(|| RomError::InconsistentDataset("no training series".into()))?;
    for (rate, s) in dataset {
        if s.len() != first.len() || s.t0() != first.t0() || s.dt() != first.dt() {
            return Err(RomError::InconsistentDataset(format!(
                "series for rate {} has {} samples from t0={} step {}, expected {} from t0={} step {}",
                rate.0,
                s.len(),
                s.t0(),
                s.dt(),
                first.len(),
                first.t0(),
                first.dt()
            )));
        }
    }
    let starts = cfg.window.window_starts(first.len())?;
    let times = first.times();
    let rates: Vec<f64> = dataset.keys().map(|r| r.0).collect();
    let all_values: Vec<f64> = dataset.values().flat_map(|s| s.values().iter().copied()).collect();

    let time_scale = AffineScale::fit(&times, 0.0, 1.0);
    let rate_scale = AffineScale::fit(&rates, 0.0, 1.0);
    let disp_scale = AffineScale::fit(&all_values, 0.0, 1.0);
    let t_norm: Vec<f64> = times.iter().map(|&t| time_scale.apply(t)).collect();

    let mut samples = Vec::with_capacity(starts.len() * dataset.len());
    for (rate, series) in dataset {
        let q_norm = rate_scale.apply(rate.0);
        let u_norm: Vec<f64> = series.values().iter().map(|&u| disp_scale.apply(u)).collect();
        for &s in &starts {
            let end = s + cfg.window.length;
            samples.push(Sample {
                inputs: t_norm[s..end].iter().map(|&t| [t, q_norm]).collect(),
                targets: u_norm[s..end].to_vec(),
            });
        }
    }

    let mut rng = SeededRng::new(cfg.seed);
    let mut weights = LstmWeights::random(cfg.hidden, &mut rng);
    let feed = cfg.feed();
    let adam = cfg.adam();
    let mut state = AdamState::new(weights.param_count());
    let mut flat = weights.to_flat();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = vec![dataset_loss(&samples, feed, &weights)];

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = LstmWeights::zeros(cfg.hidden);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                window_loss_grad(&s.inputs, &s.targets, FIRST_DECODER_INPUT, feed, &weights, scale, &mut grad);
            }
            adam_step(&mut flat, &grad.to_flat(), &mut state, &adam);
            weights.set_flat(&flat)?;
        }
        let loss = dataset_loss(&samples, feed, &weights);
        if !loss.is_finite() {
            return Err(RomError::NonFiniteLoss { epoch, loss });
        }
        log::debug!("epoch {epoch}: loss {loss:e}");
        epoch_losses.push(loss);
    }

    let model = RomModel {
        weights,
        window: cfg.window,
        time_scale,
        rate_scale,
        disp_scale,
        first_input: FIRST_DECODER_INPUT,
        training_rates: rates,
        train_config: Some(*cfg),
    };
    Ok(TrainedRom { model, log: TrainingLog { epoch_losses } })
}
