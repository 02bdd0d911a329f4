//! Trains the LSTM encoder-decoder under both windowing approaches and
//! reports how well each reconstructs the training series.
//!
//! `cargo run --release --example train_rom [epochs]`

use rominv::forward::{generate_dataset, ForwardParams, Rate};
use rominv::rom::{reconstruct, train, RomModel, TrainConfig};
use rominv::series::boundary_jump;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let params = ForwardParams::default();
    let rates = [100.0, 200.0, 300.0, 400.0];
    let dataset = generate_dataset(&rates, &params)?;

    for cfg in [TrainConfig::nonoverlapping(), TrainConfig::sliding()] {
        let cfg = TrainConfig { epochs, ..cfg };
        let trained = train(&dataset, &cfg)?;
        println!(
            "\n{} windows of {} (stride {}): {} weights, loss {:.3e} -> {:.3e}",
            cfg.window.regime,
            cfg.window.length,
            cfg.window.stride,
            trained.model.weights.param_count(),
            trained.log.initial(),
            trained.log.last()
        );
        for (rate, truth) in &dataset {
            let rec = reconstruct(&trained.model, rate.0, &truth.times())?;
            let (mse, var) = errors(rec.series.values(), truth.values());
            println!(
                "  q = {:>3}: mse/var {:.4}, boundary jump {:.2e} (truth {:.2e})",
                rate.0,
                mse / var,
                boundary_jump(rec.series.values(), 23),
                boundary_jump(truth.values(), 23)
            );
        }
        interpolate(&trained.model, &params, 250.0)?;
        let json = trained.model.to_json()?;
        assert_eq!(RomModel::from_json(&json)?, trained.model);
        println!("  model document: {} bytes, reloads bit-exactly", json.len());
    }
    Ok(())
}

fn errors(pred: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let mse = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let var = truth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mse, var)
}

fn interpolate(model: &RomModel, params: &ForwardParams, q: f64) -> Result<(), Box<dyn std::error::Error>> {
    let truth = generate_dataset(&[q], params)?.remove(&Rate(q)).expect("one series");
    let rec = reconstruct(model, q, &truth.times())?;
    let (mse, var) = errors(rec.series.values(), truth.values());
    println!("  unseen q = {q}: mse/var {:.4}", mse / var);
    Ok(())
}
