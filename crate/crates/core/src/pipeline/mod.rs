//! End-to-end experiment driver: generate or extract data, add noise, train
//! both windowing approaches, invert every (rate, surrogate, sample count)
//! cell and compare.
//!
//! Every stage reads its inputs from and writes its outputs to a fixed
//! layout under the output directory, so stages can be rerun on their own:
//!
//! ```text
//! <out>/manifest.json
//! <out>/data/rate_<q>.csv, rate_<q>_noisy.csv
//! <out>/models/<approach>.json, <approach>_loss.csv
//! <out>/chains/<surrogate>_rate_<q>_n<n>.csv, .json
//! <out>/report/report.json, cells.csv, reconstruction.csv, *.svg
//! ```

mod report;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::{synth_series, ForwardError, ForwardParams, Rate};
use crate::mcmc::{run_chain, summarize, Chain, McmcConfig, McmcError, Posterior};
use crate::rom::{train, RomError, RomModel, TrainConfig, TrainedRom};
use crate::series::{add_noise, NoiseModel, Regime, SeriesError, TimeSeries};
use crate::vtk::{build_series, SnapshotSet, VtkError};

pub use report::{
    cmd_compare, read_chain_samples, ComparisonReport, RateReconstruction, ReconstructionSummary, SweepSummary,
};

pub const MANIFEST_FORMAT: &str = "rominv.manifest";

/// Broad failure class, one process exit code each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Parse,
    Numeric,
    MissingCell,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Parse => 4,
            ErrorClass::Numeric => 5,
            ErrorClass::MissingCell => 6,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("missing result for {surrogate} at rate {rate}, n = {n}: {path} not found")]
    MissingCell { surrogate: SurrogateKind, rate: f64, n: usize, path: PathBuf },
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Config(_) => ErrorClass::Config,
            PipelineError::Io { .. } => ErrorClass::Io,
            PipelineError::Parse { .. } => ErrorClass::Parse,
            PipelineError::Numeric(_) => ErrorClass::Numeric,
            PipelineError::MissingCell { .. } => ErrorClass::MissingCell,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, message: impl fmt::Display) -> Self {
        PipelineError::Parse { path: path.to_path_buf(), message: message.to_string() }
    }

    pub(crate) fn from_series(path: &Path, e: SeriesError) -> Self {
        match e {
            SeriesError::Csv(inner) if inner.is_io_error() => match inner.into_kind() {
                csv::ErrorKind::Io(source) => PipelineError::io(path, source),
                other => PipelineError::parse(path, format!("{other:?}")),
            },
            other => PipelineError::parse(path, other),
        }
    }

    pub(crate) fn from_rom(path: &Path, e: RomError) -> Self {
        match e {
            RomError::NonFiniteLoss { .. } | RomError::NonFinite(_) => {
                PipelineError::Numeric(format!("{}: {e}", path.display()))
            }
            RomError::BadConfig(m) => PipelineError::Config(m),
            other => PipelineError::parse(path, other),
        }
    }

    pub(crate) fn from_mcmc(e: McmcError) -> Self {
        match e {
            McmcError::BadConfig(m) => PipelineError::Config(m),
            McmcError::BadParameters { .. } => PipelineError::Config(e.to_string()),
            other => PipelineError::Numeric(other.to_string()),
        }
    }

    fn from_vtk(e: VtkError) -> Self {
        match e {
            VtkError::Io { path, source } => PipelineError::Io { path, source },
            VtkError::InFile { path, source } => match *source {
                VtkError::Io { path, source } => PipelineError::Io { path, source },
                inner => PipelineError::Parse { path, message: inner.to_string() },
            },
            other => PipelineError::Parse { path: PathBuf::new(), message: other.to_string() },
        }
    }

    fn from_forward(e: ForwardError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// The surrogate standing in for the forward map during inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// The synthetic forward model itself.
    Exact,
    Nonoverlapping,
    Sliding,
}

impl SurrogateKind {
    pub fn regime(self) -> Option<Regime> {
        match self {
            SurrogateKind::Exact => None,
            SurrogateKind::Nonoverlapping => Some(Regime::Nonoverlapping),
            SurrogateKind::Sliding => Some(Regime::Sliding),
        }
    }
}

impl From<Regime> for SurrogateKind {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Nonoverlapping => SurrogateKind::Nonoverlapping,
            Regime::Sliding => SurrogateKind::Sliding,
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateKind::Exact => "exact",
            SurrogateKind::Nonoverlapping => "nonoverlapping",
            SurrogateKind::Sliding => "sliding",
        })
    }
}

impl FromStr for SurrogateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(SurrogateKind::Exact),
            "nonoverlapping" => Ok(SurrogateKind::Nonoverlapping),
            "sliding" => Ok(SurrogateKind::Sliding),
            other => Err(format!("unknown surrogate `{other}` (exact, nonoverlapping, sliding)")),
        }
    }
}

/// One simulator run exported as a directory of VTK snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VtkRun {
    pub rate: f64,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { params: ForwardParams },
    Vtk { vector: String, dt: f64, runs: Vec<VtkRun> },
}

/// Measurement noise added before inversion: `sigma = relative_sigma * range`
/// of each clean series, seeded with `seed + rate index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub relative_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub source: DataSource,
    pub rates: Vec<f64>,
    pub noise: NoiseConfig,
    pub nonoverlapping: TrainConfig,
    pub sliding: TrainConfig,
    /// Template for every chain; `n` is replaced by each sweep entry.
    pub mcmc: McmcConfig,
    pub sweep: Vec<usize>,
    /// Invert with the synthetic forward model instead of the trained networks.
    pub exact_surrogate: bool,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic { params: ForwardParams::default() },
            rates: vec![100.0, 200.0, 300.0, 400.0],
            noise: NoiseConfig { relative_sigma: 0.01, seed: 100 },
            nonoverlapping: TrainConfig::nonoverlapping(),
            sliding: TrainConfig::sliding(),
            mcmc: McmcConfig::default(),
            sweep: vec![1000, 5000, 10_000],
            exact_surrogate: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("config json: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.out_dir)
    }

    pub fn train_config(&self, regime: Regime) -> &TrainConfig {
        match regime {
            Regime::Nonoverlapping => &self.nonoverlapping,
            Regime::Sliding => &self.sliding,
        }
    }

    /// Surrogates inverted by [`cmd_invert_all`].
    pub fn surrogates(&self) -> Vec<SurrogateKind> {
        if self.exact_surrogate {
            vec![SurrogateKind::Exact]
        } else {
            vec![SurrogateKind::Nonoverlapping, SurrogateKind::Sliding]
        }
    }

    /// McmcConfig for one sweep entry.
    pub fn mcmc_for(&self, n: usize) -> McmcConfig {
        McmcConfig { n, ..self.mcmc }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.rates.is_empty() {
            return bad("rate grid is empty".into());
        }
        let mut seen = Vec::new();
        for &q in &self.rates {
            if !(q > 0.0 && q.is_finite()) {
                return bad(format!("rate {q} must be positive"));
            }
            if seen.contains(&q) {
                return bad(format!("rate {q} listed twice"));
            }
            seen.push(q);
        }
        if self.sweep.is_empty() {
            return bad("sample-count sweep is empty".into());
        }
        if !(self.noise.relative_sigma >= 0.0 && self.noise.relative_sigma.is_finite()) {
            return bad(format!("noise relative_sigma {} must be >= 0", self.noise.relative_sigma));
        }
        match &self.source {
            DataSource::Synthetic { params } => params.validate().map_err(PipelineError::from_forward)?,
            DataSource::Vtk { runs, dt, .. } => {
                if self.exact_surrogate {
                    return bad("exact-surrogate mode needs the synthetic data source".into());
                }
                if !(*dt > 0.0 && dt.is_finite()) {
                    return bad(format!("snapshot dt {dt} must be positive"));
                }
                if let Some(q) = self.rates.iter().find(|&&q| !runs.iter().any(|r| r.rate == q)) {
                    return bad(format!("no VTK run listed for rate {q}"));
                }
            }
        }
        for regime in [Regime::Nonoverlapping, Regime::Sliding] {
            let tc = self.train_config(regime);
            if tc.window.regime != regime {
                return bad(format!("{regime} training config has a {} window", tc.window.regime));
            }
            tc.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        for &n in &self.sweep {
            self.mcmc_for(n).validate().map_err(PipelineError::from_mcmc)?;
        }
        Ok(())
    }
}

/// Paths of every pipeline artifact under one output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    root: PathBuf,
}

fn rate_tag(rate: f64) -> String {
    format!("rate_{rate}")
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn chains_dir(&self) -> PathBuf {
        self.root.join("chains")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn clean_csv(&self, rate: f64) -> PathBuf {
        self.data_dir().join(format!("{}.csv", rate_tag(rate)))
    }

    pub fn noisy_csv(&self, rate: f64) -> PathBuf {
        self.data_dir().join(format!("{}_noisy.csv", rate_tag(rate)))
    }

    pub fn model(&self, regime: Regime) -> PathBuf {
        self.models_dir().join(format!("{regime}.json"))
    }

    pub fn loss_log(&self, regime: Regime) -> PathBuf {
        self.models_dir().join(format!("{regime}_loss.csv"))
    }

    fn cell_stem(&self, kind: SurrogateKind, rate: f64, n: usize) -> PathBuf {
        self.chains_dir().join(format!("{kind}_{}_n{n}", rate_tag(rate)))
    }

    pub fn chain_csv(&self, kind: SurrogateKind, rate: f64, n: usize) -> PathBuf {
        self.cell_stem(kind, rate, n).with_extension("csv")
    }

    pub fn posterior_json(&self, kind: SurrogateKind, rate: f64, n: usize) -> PathBuf {
        self.cell_stem(kind, rate, n).with_extension("json")
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn read_series(path: &Path) -> Result<TimeSeries, PipelineError> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    TimeSeries::read_csv(file, label).map_err(|e| PipelineError::from_series(path, e))
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).map_err(|e| PipelineError::from_series(path, e))?;
    write_file(path, buf)
}

pub fn load_model(path: &Path) -> Result<RomModel, PipelineError> {
    RomModel::from_json(&read_file(path)?).map_err(|e| PipelineError::from_rom(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEntry {
    pub rate: f64,
    /// Paths relative to the output directory.
    pub clean: PathBuf,
    pub noisy: PathBuf,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

/// Provenance record written by [`cmd_generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: PipelineConfig,
    pub data: Vec<DataEntry>,
}

fn relative(layout: &Layout, path: &Path) -> PathBuf {
    path.strip_prefix(layout.root()).unwrap_or(path).to_path_buf()
}

fn source_series(cfg: &PipelineConfig, rate: f64) -> Result<TimeSeries, PipelineError> {
    match &cfg.source {
        DataSource::Synthetic { params } => synth_series(rate, params).map_err(PipelineError::from_forward),
        DataSource::Vtk { vector, dt, runs } => {
            let run = runs
                .iter()
                .find(|r| r.rate == rate)
                .ok_or_else(|| PipelineError::Config(format!("no VTK run listed for rate {rate}")))?;
            let set = SnapshotSet::from_dir(&run.dir, vector, *dt).map_err(PipelineError::from_vtk)?;
            build_series(&set).map_err(|e| match PipelineError::from_vtk(e) {
                PipelineError::Parse { path, message } if path.as_os_str().is_empty() => {
                    PipelineError::Parse { path: run.dir.clone(), message }
                }
                other => other,
            })
        }
    }
}

/// Writes the clean and noisy series of every rate, then the manifest.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mut data = Vec::with_capacity(cfg.rates.len());
    for (i, &rate) in cfg.rates.iter().enumerate() {
        let clean = source_series(cfg, rate)?.with_label(format!("q={rate}"));
        let noise = NoiseModel { sigma: cfg.noise.relative_sigma * clean.range(), seed: cfg.noise.seed + i as u64 };
        let noisy = add_noise(&clean, &noise);
        let (clean_path, noisy_path) = (layout.clean_csv(rate), layout.noisy_csv(rate));
        write_series(&clean_path, &clean)?;
        write_series(&noisy_path, &noisy)?;
        log::info!("rate {rate}: {} samples, noise sigma {:e}", clean.len(), noise.sigma);
        data.push(DataEntry {
            rate,
            clean: relative(&layout, &clean_path),
            noisy: relative(&layout, &noisy_path),
            noise_sigma: noise.sigma,
            noise_seed: noise.seed,
        });
    }
    let manifest = Manifest { format: MANIFEST_FORMAT.into(), version: 1, config: cfg.clone(), data };
    write_file(&layout.manifest(), pretty_json(&manifest))?;
    Ok(manifest)
}

/// Reads the generated series for every configured rate.
pub fn load_dataset(cfg: &PipelineConfig, noisy: bool) -> Result<BTreeMap<Rate, TimeSeries>, PipelineError> {
    let layout = cfg.layout();
    cfg.rates
        .iter()
        .map(|&q| {
            let path = if noisy { layout.noisy_csv(q) } else { layout.clean_csv(q) };
            Ok((Rate(q), read_series(&path)?))
        })
        .collect()
}

/// Trains one approach on the clean series and writes the model and its loss log.
pub fn cmd_train(cfg: &PipelineConfig, regime: Regime) -> Result<TrainedRom, PipelineError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let dataset = load_dataset(cfg, false)?;
    let model_path = layout.model(regime);
    let trained = train(&dataset, cfg.train_config(regime)).map_err(|e| PipelineError::from_rom(&model_path, e))?;
    log::info!("{regime}: loss {:e} -> {:e}", trained.log.initial(), trained.log.last());
    let json = trained.model.to_json().map_err(|e| PipelineError::from_rom(&model_path, e))?;
    write_file(&model_path, json)?;
    write_file(&layout.loss_log(regime), trained.log.to_csv())?;
    Ok(trained)
}

/// Extracts the surface displacement series from a directory of snapshots.
pub fn cmd_extract(dir: &Path, vector: &str, dt: f64, out: &Path) -> Result<TimeSeries, PipelineError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PipelineError::Config(format!("dt {dt} must be positive")));
    }
    let set = SnapshotSet::from_dir(dir, vector, dt).map_err(PipelineError::from_vtk)?;
    let series = build_series(&set).map_err(|e| match PipelineError::from_vtk(e) {
        PipelineError::Parse { path, message } if path.as_os_str().is_empty() => {
            PipelineError::Parse { path: dir.to_path_buf(), message }
        }
        other => other,
    })?;
    write_series(out, &series)?;
    Ok(series)
}

/// Posterior of one inversion, as written next to its chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rate: f64,
    pub surrogate: SurrogateKind,
    pub n: usize,
    pub seed: u64,
    pub relative_error: f64,
    pub posterior: Posterior,
}

enum Forward<'a> {
    Exact(&'a ForwardParams),
    Rom(&'a RomModel),
}

fn run_with(forward: &Forward<'_>, mcmc: &McmcConfig, data: &TimeSeries) -> Result<Chain, McmcError> {
    match forward {
        Forward::Exact(p) => run_chain(mcmc, *p, data),
        Forward::Rom(m) => run_chain(mcmc, *m, data),
    }
}

/// Runs one chain of the largest requested length and summarizes each
/// prefix. A chain is a deterministic function of its seed, so the prefix of
/// length `n` is exactly the chain a separate run with `n` iterations gives.
fn invert_prefixes(
    cfg: &PipelineConfig,
    forward: &Forward<'_>,
    kind: SurrogateKind,
    rate: f64,
    data: &TimeSeries,
    sweep: &[usize],
) -> Result<Vec<CellResult>, PipelineError> {
    let layout = cfg.layout();
    let n_max = *sweep.iter().max().expect("sweep is non-empty");
    let chain = run_with(forward, &cfg.mcmc_for(n_max), data).map_err(PipelineError::from_mcmc)?;
    let mut out = Vec::with_capacity(sweep.len());
    for &n in sweep {
        let prefix = chain_prefix(&chain, n, cfg.mcmc.m0);
        let posterior = summarize(&prefix, cfg.mcmc.burn_in_fraction).map_err(PipelineError::from_mcmc)?;
        let cell = CellResult {
            rate,
            surrogate: kind,
            n,
            seed: cfg.mcmc.seed,
            relative_error: (posterior.mean - rate).abs() / rate,
            posterior,
        };
        let mut csv = Vec::new();
        let csv_path = layout.chain_csv(kind, rate, n);
        prefix.write_csv(&mut csv).map_err(|e| PipelineError::io(&csv_path, e))?;
        write_file(&csv_path, csv)?;
        write_file(&layout.posterior_json(kind, rate, n), pretty_json(&cell))?;
        log::info!("{kind} q={rate} n={n}: mean {:.4} (rel. error {:.4})", posterior.mean, cell.relative_error);
        out.push(cell);
    }
    Ok(out)
}

fn chain_prefix(chain: &Chain, n: usize, m0: usize) -> Chain {
    Chain {
        samples: chain.samples[..n].to_vec(),
        sigma2s: chain.sigma2s[..n].to_vec(),
        accepted: chain.accepted[..n].to_vec(),
        cov_trace: chain.cov_trace.iter().copied().take(n / m0 + 1).collect(),
    }
}

fn load_forward_model(cfg: &PipelineConfig, kind: SurrogateKind) -> Result<Option<RomModel>, PipelineError> {
    match kind.regime() {
        Some(regime) => load_model(&cfg.layout().model(regime)).map(Some),
        None => match &cfg.source {
            DataSource::Synthetic { .. } => Ok(None),
            DataSource::Vtk { .. } => {
                Err(PipelineError::Config("exact surrogate needs the synthetic data source".into()))
            }
        },
    }
}

fn forward_for<'a>(cfg: &'a PipelineConfig, model: Option<&'a RomModel>) -> Forward<'a> {
    match (model, &cfg.source) {
        (Some(m), _) => Forward::Rom(m),
        (None, DataSource::Synthetic { params }) => Forward::Exact(params),
        (None, DataSource::Vtk { .. }) => unreachable!("checked by load_forward_model"),
    }
}

/// Inverts the noisy series of one rate with one surrogate for one chain length.
pub fn cmd_invert(cfg: &PipelineConfig, rate: f64, kind: SurrogateKind, n: usize) -> Result<CellResult, PipelineError> {
    cfg.validate()?;
    cfg.mcmc_for(n).validate().map_err(PipelineError::from_mcmc)?;
    let data = read_series(&cfg.layout().noisy_csv(rate))?;
    let model = load_forward_model(cfg, kind)?;
    let forward = forward_for(cfg, model.as_ref());
    let mut cells = invert_prefixes(cfg, &forward, kind, rate, &data, &[n])?;
    Ok(cells.remove(0))
}

/// Inverts an arbitrary displacement CSV outside the pipeline layout. With
/// no model the synthetic forward model of `source` is the surrogate.
pub fn cmd_invert_file(
    source: &DataSource,
    mcmc: &McmcConfig,
    data_path: &Path,
    model_path: Option<&Path>,
    chain_out: &Path,
    posterior_out: &Path,
) -> Result<Posterior, PipelineError> {
    mcmc.validate().map_err(PipelineError::from_mcmc)?;
    let data = read_series(data_path)?;
    let model = model_path.map(load_model).transpose()?;
    let chain = match (&model, source) {
        (Some(m), _) => run_chain(mcmc, m, &data),
        (None, DataSource::Synthetic { params }) => run_chain(mcmc, params, &data),
        (None, DataSource::Vtk { .. }) => {
            return Err(PipelineError::Config("no model given and the data source has no forward model".into()))
        }
    }
    .map_err(PipelineError::from_mcmc)?;
    let posterior = summarize(&chain, mcmc.burn_in_fraction).map_err(PipelineError::from_mcmc)?;
    let mut csv = Vec::new();
    chain.write_csv(&mut csv).map_err(|e| PipelineError::io(chain_out, e))?;
    write_file(chain_out, csv)?;
    write_file(posterior_out, pretty_json(&posterior))?;
    Ok(posterior)
}

/// Inverts every (surrogate, rate) pair, one chain per pair covering the
/// whole sweep. Pairs run in parallel and write disjoint files.
pub fn cmd_invert_all(cfg: &PipelineConfig) -> Result<Vec<CellResult>, PipelineError> {
    cfg.validate()?;
    let noisy = load_dataset(cfg, true)?;
    let kinds = cfg.surrogates();
    let models = kinds.iter().map(|&k| load_forward_model(cfg, k)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, f64)> = (0..kinds.len()).flat_map(|k| cfg.rates.iter().map(move |&q| (k, q))).collect();
    let per_job = jobs
        .par_iter()
        .map(|&(k, q)| {
            let forward = forward_for(cfg, models[k].as_ref());
            invert_prefixes(cfg, &forward, kinds[k], q, &noisy[&Rate(q)], &cfg.sweep)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Every stage in order, returning the comparison report.
pub fn run_all(cfg: &PipelineConfig) -> Result<ComparisonReport, PipelineError> {
    cmd_generate(cfg)?;
    if !cfg.exact_surrogate {
        for regime in [Regime::Nonoverlapping, Regime::Sliding] {
            cmd_train(cfg, regime)?;
        }
    }
    cmd_invert_all(cfg)?;
    cmd_compare(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> PipelineConfig {
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
    fn default_config_is_valid_and_round_trips() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"rates": [50.0], "exact_surrogate": true}"#).unwrap();
        assert_eq!(cfg.rates, vec![50.0]);
        assert_eq!(cfg.sweep, vec![1000, 5000, 10_000]);
        assert_eq!(cfg.sliding.window.length, 10);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let cases: Vec<(&str, PipelineConfig)> = vec![
            ("empty rates", PipelineConfig { rates: vec![], ..Default::default() }),
            ("empty sweep", PipelineConfig { sweep: vec![], ..Default::default() }),
            ("duplicate rate", PipelineConfig { rates: vec![1.0, 1.0], ..Default::default() }),
            ("n below m0", PipelineConfig { sweep: vec![50], ..Default::default() }),
            ("swapped windows", PipelineConfig { sliding: TrainConfig::nonoverlapping(), ..Default::default() }),
        ];
        for (name, cfg) in cases {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.class(), ErrorClass::Config, "{name}: {err}");
        }
    }

    #[test]
    fn exit_codes_are_distinct() {
        let classes =
            [ErrorClass::Config, ErrorClass::Io, ErrorClass::Parse, ErrorClass::Numeric, ErrorClass::MissingCell];
        let mut codes: Vec<i32> = classes.iter().map(|c| c.exit_code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), classes.len());
        assert!(codes.iter().all(|&c| c != 0));
    }

    #[test]
    fn sweep_prefixes_match_separate_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        cmd_generate(&cfg).unwrap();
        let all = cmd_invert_all(&cfg).unwrap();
        let short = all.iter().find(|c| c.rate == 150.0 && c.n == 200).unwrap().clone();
        let csv_all = fs::read(cfg.layout().chain_csv(SurrogateKind::Exact, 150.0, 200)).unwrap();
        let single = cmd_invert(&cfg, 150.0, SurrogateKind::Exact, 200).unwrap();
        assert_eq!(single, short);
        assert_eq!(fs::read(cfg.layout().chain_csv(SurrogateKind::Exact, 150.0, 200)).unwrap(), csv_all);
    }

    #[test]
    fn missing_noisy_data_is_an_io_error_naming_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let err = cmd_invert(&cfg, 150.0, SurrogateKind::Exact, 200).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Io);
        assert!(err.to_string().contains("rate_150_noisy.csv"), "{err}");
    }

    #[test]
    fn missing_model_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.exact_surrogate = false;
        cmd_generate(&cfg).unwrap();
        let err = cmd_invert(&cfg, 150.0, SurrogateKind::Sliding, 200).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Io);
        assert!(err.to_string().contains("sliding.json"), "{err}");
    }

    #[test]
    fn corrupt_dataset_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        cmd_generate(&cfg).unwrap();
        fs::write(cfg.layout().clean_csv(150.0), "t,value\n0,abc\n").unwrap();
        let err = cmd_train(&cfg, Regime::Sliding).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Parse, "{err}");
    }

    #[test]
    fn vtk_source_rejects_exact_mode() {
        let cfg = PipelineConfig {
            source: DataSource::Vtk {
                vector: "u".into(),
                dt: 1.0,
                runs: vec![VtkRun { rate: 100.0, dir: "x".into() }],
            },
            rates: vec![100.0],
            exact_surrogate: true,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().class(), ErrorClass::Config);
    }
}
