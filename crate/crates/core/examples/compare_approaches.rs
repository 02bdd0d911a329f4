//! The whole experiment through the pipeline API: data, both surrogates,
//! the inversion sweep and the comparison report with its plots.
//!
//! `cargo run --release --example compare_approaches [out_dir]`

use std::path::PathBuf;

use rominv::pipeline::{run_all, PipelineConfig, SurrogateKind};
use rominv::series::Regime;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rominv-out"));
    let cfg = PipelineConfig { out_dir, ..PipelineConfig::default() };
    let report = run_all(&cfg)?;

    println!("{:>8} {:>16} {:>16}", "n", "nonoverlapping", "sliding");
    for &n in &cfg.sweep {
        let err = |k| report.mean_relative_error(k, n).unwrap_or(f64::NAN);
        println!("{n:>8} {:>16.4} {:>16.4}", err(SurrogateKind::Nonoverlapping), err(SurrogateKind::Sliding));
    }
    for regime in [Regime::Nonoverlapping, Regime::Sliding] {
        let r = report.reconstruction(regime).expect("both approaches trained");
        println!("{regime}: reconstruction mse {:.3e}, boundary jump {:.3e}", r.mean_mse, r.mean_boundary_jump);
    }
    println!("report and plots in {}", cfg.layout().report_dir().display());
    Ok(())
}
