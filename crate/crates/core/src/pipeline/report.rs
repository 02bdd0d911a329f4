use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::svg::{histogram, line_plot, Line};
use super::{
    load_dataset, load_model, pretty_json, read_file, write_file, CellResult, PipelineConfig, PipelineError,
    SurrogateKind,
};
use crate::forward::Rate;
use crate::rom::reconstruct;
use crate::series::{boundary_jump, Regime};

/// Points kept per trace plot; longer chains are thinned with a fixed stride.
const TRACE_POINTS: usize = 2000;
const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReconstruction {
    pub rate: f64,
    pub mse: f64,
    /// Population variance of the clean series.
    pub target_variance: f64,
    pub mse_ratio: f64,
    pub boundary_jump: f64,
    /// The same metric on the clean series, for scale.
    pub true_boundary_jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub approach: Regime,
    /// Block length at which boundary jumps are measured, shared by both approaches.
    pub jump_block: usize,
    pub rates: Vec<RateReconstruction>,
    pub mean_mse: f64,
    pub mean_boundary_jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub surrogate: SurrogateKind,
    pub n: usize,
    pub mean_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SweepSummary>,
    pub reconstruction: Vec<ReconstructionSummary>,
}

impl ComparisonReport {
    pub fn cell(&self, surrogate: SurrogateKind, rate: f64, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.surrogate == surrogate && c.rate == rate && c.n == n)
    }

    pub fn mean_relative_error(&self, surrogate: SurrogateKind, n: usize) -> Option<f64> {
        self.summary.iter().find(|s| s.surrogate == surrogate && s.n == n).map(|s| s.mean_relative_error)
    }

    pub fn reconstruction(&self, approach: Regime) -> Option<&ReconstructionSummary> {
        self.reconstruction.iter().find(|r| r.approach == approach)
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("surrogate,rate,n,seed,mean,std,median,q05,q95,acceptance_rate,relative_error\n");
        for c in &self.cells {
            let p = &c.posterior;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.surrogate,
                c.rate,
                c.n,
                c.seed,
                p.mean,
                p.std,
                p.median,
                p.q05,
                p.q95,
                p.acceptance_rate,
                c.relative_error
            );
        }
        out
    }

    pub fn reconstruction_csv(&self) -> String {
        let mut out = String::from("approach,rate,mse,target_variance,mse_ratio,boundary_jump,true_boundary_jump\n");
        for r in &self.reconstruction {
            for x in &r.rates {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.approach, x.rate, x.mse, x.target_variance, x.mse_ratio, x.boundary_jump, x.true_boundary_jump
                );
            }
        }
        out
    }
}

/// The `q` column of a chain CSV.
pub fn read_chain_samples(path: &Path) -> Result<Vec<f64>, PipelineError> {
    let text = read_file(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let col = reader
        .headers()
        .map_err(|e| PipelineError::parse(path, e))?
        .iter()
        .position(|h| h == "q")
        .ok_or_else(|| PipelineError::parse(path, "no `q` column"))?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PipelineError::parse(path, e))?;
        let v = record
            .get(col)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| PipelineError::parse(path, format!("row {}: bad q value", row + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn read_cell(cfg: &PipelineConfig, kind: SurrogateKind, rate: f64, n: usize) -> Result<CellResult, PipelineError> {
    let path = cfg.layout().posterior_json(kind, rate, n);
    if !path.exists() {
        return Err(PipelineError::MissingCell { surrogate: kind, rate, n, path });
    }
    let cell: CellResult = serde_json::from_str(&read_file(&path)?).map_err(|e| PipelineError::parse(&path, e))?;
    if cell.surrogate != kind || cell.rate != rate || cell.n != n {
        return Err(PipelineError::parse(&path, "posterior file describes a different cell"));
    }
    Ok(cell)
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn reconstruction_summary(
    cfg: &PipelineConfig,
    regime: Regime,
    plots: &mut Vec<(String, String)>,
) -> Result<ReconstructionSummary, PipelineError> {
    let model_path = cfg.layout().model(regime);
    let model = load_model(&model_path)?;
    let clean = load_dataset(cfg, false)?;
    let noisy = load_dataset(cfg, true)?;
    let block = cfg.nonoverlapping.window.length;
    let mut rates = Vec::with_capacity(cfg.rates.len());
    for &q in &cfg.rates {
        let truth = &clean[&Rate(q)];
        let times = truth.times();
        let rec = reconstruct(&model, q, &times).map_err(|e| PipelineError::from_rom(&model_path, e))?;
        let predicted = rec.series.values();
        let mse = predicted.iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / times.len() as f64;
        let target_variance = variance(truth.values());
        rates.push(RateReconstruction {
            rate: q,
            mse,
            target_variance,
            mse_ratio: mse / target_variance,
            boundary_jump: boundary_jump(predicted, block),
            true_boundary_jump: boundary_jump(truth.values(), block),
        });
        let pts = |v: &[f64]| -> Vec<(f64, f64)> { times.iter().copied().zip(v.iter().copied()).collect() };
        let (t, d, r) = (pts(truth.values()), pts(noisy[&Rate(q)].values()), pts(predicted));
        plots.push((
            format!("reconstruction_{regime}_rate_{q}.svg"),
            line_plot(
                &format!("{regime} reconstruction, q = {q}"),
                "time (days)",
                "displacement (m)",
                &[
                    Line { label: "truth", points: &t },
                    Line { label: "noisy data", points: &d },
                    Line { label: "reconstruction", points: &r },
                ],
            ),
        ));
    }
    let k = rates.len() as f64;
    Ok(ReconstructionSummary {
        approach: regime,
        jump_block: block,
        mean_mse: rates.iter().map(|r| r.mse).sum::<f64>() / k,
        mean_boundary_jump: rates.iter().map(|r| r.boundary_jump).sum::<f64>() / k,
        rates,
    })
}

fn chain_plots(cfg: &PipelineConfig, cell: &CellResult) -> Result<[(String, String); 2], PipelineError> {
    let layout = cfg.layout();
    let samples = read_chain_samples(&layout.chain_csv(cell.surrogate, cell.rate, cell.n))?;
    let stride = samples.len().div_ceil(TRACE_POINTS).max(1);
    let trace: Vec<(f64, f64)> =
        samples.iter().enumerate().step_by(stride).map(|(i, &q)| ((i + 1) as f64, q)).collect();
    let truth = [(1.0, cell.rate), (samples.len() as f64, cell.rate)];
    let stem = format!("{}_rate_{}_n{}", cell.surrogate, cell.rate, cell.n);
    let title = format!("{} surrogate, q = {}, n = {}", cell.surrogate, cell.rate, cell.n);
    let trace_svg = line_plot(
        &format!("trace: {title}"),
        "iteration",
        "q (MSCF/day)",
        &[Line { label: "chain", points: &trace }, Line { label: "true q", points: &truth }],
    );
    let kept = &samples[cell.posterior.burn_in.min(samples.len())..];
    let hist_svg = histogram(&format!("posterior: {title}"), "q (MSCF/day)", kept, HISTOGRAM_BINS, Some(cell.rate));
    Ok([(format!("trace_{stem}.svg"), trace_svg), (format!("posterior_{stem}.svg"), hist_svg)])
}

/// Collects every inversion cell and reconstruction metric into a report
/// and writes it with its tables and plots under `<out>/report`.
pub fn cmd_compare(cfg: &PipelineConfig) -> Result<ComparisonReport, PipelineError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mut cells = Vec::new();
    for kind in cfg.surrogates() {
        for &rate in &cfg.rates {
            for &n in &cfg.sweep {
                cells.push(read_cell(cfg, kind, rate, n)?);
            }
        }
    }
    let mut summary = Vec::new();
    for kind in cfg.surrogates() {
        for &n in &cfg.sweep {
            let errs: Vec<f64> =
                cells.iter().filter(|c| c.surrogate == kind && c.n == n).map(|c| c.relative_error).collect();
            summary.push(SweepSummary {
                surrogate: kind,
                n,
                mean_relative_error: errs.iter().sum::<f64>() / errs.len() as f64,
            });
        }
    }

    let mut plots = Vec::new();
    let mut reconstruction = Vec::new();
    for regime in [Regime::Nonoverlapping, Regime::Sliding] {
        if cfg.exact_surrogate && !layout.model(regime).exists() {
            continue;
        }
        reconstruction.push(reconstruction_summary(cfg, regime, &mut plots)?);
    }
    for cell in &cells {
        plots.extend(chain_plots(cfg, cell)?);
    }
    let sweep_lines: Vec<(SurrogateKind, Vec<(f64, f64)>)> = cfg
        .surrogates()
        .into_iter()
        .map(|k| {
            (k, summary.iter().filter(|s| s.surrogate == k).map(|s| (s.n as f64, s.mean_relative_error)).collect())
        })
        .collect();
    let labels: Vec<String> = sweep_lines.iter().map(|(k, _)| k.to_string()).collect();
    let lines: Vec<Line<'_>> =
        sweep_lines.iter().zip(&labels).map(|((_, p), l)| Line { label: l, points: p }).collect();
    plots.push((
        "relative_error.svg".into(),
        line_plot("mean relative error over rates", "samples n", "|mean - q| / q", &lines),
    ));

    let report = ComparisonReport { cells, summary, reconstruction };
    let dir = layout.report_dir();
    write_file(&dir.join("report.json"), pretty_json(&report))?;
    write_file(&dir.join("cells.csv"), report.cells_csv())?;
    write_file(&dir.join("reconstruction.csv"), report.reconstruction_csv())?;
    for (name, svg) in plots {
        write_file(&dir.join(name), svg)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{cmd_generate, cmd_invert_all, ErrorClass};

    fn exact_config(dir: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            rates: vec![150.0, 300.0],
            sweep: vec![200, 400],
            exact_surrogate: true,
            out_dir: dir.to_path_buf(),
            ..PipelineConfig::default()
        };
        cfg.mcmc.q0 = 200.0;
        cfg
    }

    #[test]
    fn report_covers_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = exact_config(dir.path());
        cmd_generate(&cfg).unwrap();
        cmd_invert_all(&cfg).unwrap();
        let report = cmd_compare(&cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert_eq!(report.summary.len(), 2);
        assert!(report.reconstruction.is_empty());
        for c in &report.cells {
            assert_eq!(c.relative_error, (c.posterior.mean - c.rate).abs() / c.rate);
        }
        let csv = std::fs::read_to_string(cfg.layout().report_dir().join("cells.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(cfg.layout().report_dir().join("trace_exact_rate_150_n400.svg").exists());
    }

    #[test]
    fn missing_cell_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = exact_config(dir.path());
        cmd_generate(&cfg).unwrap();
        cmd_invert_all(&cfg).unwrap();
        std::fs::remove_file(cfg.layout().posterior_json(SurrogateKind::Exact, 300.0, 200)).unwrap();
        let err = cmd_compare(&cfg).unwrap_err();
        assert_eq!(err.class(), ErrorClass::MissingCell);
        assert!(matches!(err, PipelineError::MissingCell { rate, n: 200, .. } if rate == 300.0));
    }

    #[test]
    fn chain_samples_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "iter,q,sigma2,accepted\n1,2.5,,0\n2,3,0.1,1\n").unwrap();
        assert_eq!(read_chain_samples(&path).unwrap(), vec![2.5, 3.0]);
        std::fs::write(&path, "iter,x\n1,2\n").unwrap();
        assert_eq!(read_chain_samples(&path).unwrap_err().class(), ErrorClass::Parse);
    }
}
