//! Uniformly sampled displacement series and the two windowing regimes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// Relative tolerance when checking that CSV time stamps are uniformly spaced.
const UNIFORM_SPACING_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("series must contain at least one value")]
    Empty,
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid window spec: {0}")]
    BadSpec(String),
    #[error("window length {length} exceeds series length {len}")]
    WindowTooLong { length: usize, len: usize },
    #[error("nonoverlapping windows of length {length} do not divide series length {len}")]
    NonDivisible { length: usize, len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {0} is not covered by any window")]
    Uncovered(usize),
    #[error("degenerate range: all inputs equal {}", .0.scale.src_min)]
    DegenerateRange(Normalized),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {msg}")]
    CsvContent { row: usize, msg: String },
}

/// Scalar displacement series on a uniform time grid (days, meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    label: String,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, label: impl Into<String>) -> Result<Self, SeriesError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SeriesError::BadStep(dt));
        }
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SeriesError::NonFinite { index, value });
        }
        Ok(Self { t0, dt, values, label: label.into() })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time stamp of sample `i`, always `t0 + i * dt`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Difference between max and min value.
    pub fn range(&self) -> f64 {
        let (lo, hi) = min_max(&self.values);
        hi - lo
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Writes `t,value` CSV with shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SeriesError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([self.time(i).to_string(), v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a `t,value` CSV. Time stamps must be uniformly spaced; a single
    /// row is accepted with a unit step.
    pub fn read_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self, SeriesError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
            return Err(SeriesError::CsvContent {
                row: 0,
                msg: format!("expected header `t,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |field: usize| -> Result<f64, SeriesError> {
                rec.get(field)
                    .ok_or_else(|| SeriesError::CsvContent { row: row + 1, msg: "missing field".into() })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SeriesError::CsvContent { row: row + 1, msg: e.to_string() })
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        if times.is_empty() {
            return Err(SeriesError::Empty);
        }
        let t0 = times[0];
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        for (i, &t) in times.iter().enumerate() {
            let expected = t0 + i as f64 * dt;
            if (t - expected).abs() > UNIFORM_SPACING_RTOL * expected.abs().max(dt.abs()) {
                return Err(SeriesError::CsvContent {
                    row: i + 1,
                    msg: format!("time stamp {t} breaks uniform spacing (expected {expected})"),
                });
            }
        }
        Self::new(t0, dt, values, label)
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Nonoverlapping,
    Sliding,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Nonoverlapping => f.write_str("nonoverlapping"),
            Regime::Sliding => f.write_str("sliding"),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonoverlapping" => Ok(Regime::Nonoverlapping),
            "sliding" => Ok(Regime::Sliding),
            other => Err(format!("unknown windowing approach `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
    pub regime: Regime,
}

impl WindowSpec {
    /// Disjoint windows, stride equal to length.
    pub fn nonoverlapping(length: usize) -> Self {
        Self { length, stride: length, regime: Regime::Nonoverlapping }
    }

    /// Stride-1 sliding windows.
    pub fn sliding(length: usize) -> Self {
        Self { length, stride: 1, regime: Regime::Sliding }
    }

    /// Sliding windows with a custom stride. Valid, but see [`WindowSpec::is_standard`].
    pub fn sliding_with_stride(length: usize, stride: usize) -> Self {
        Self { length, stride, regime: Regime::Sliding }
    }

    /// False for sliding windows whose stride is not 1.
    pub fn is_standard(&self) -> bool {
        match self.regime {
            Regime::Nonoverlapping => true,
            Regime::Sliding => self.stride == 1,
        }
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.length == 0 || self.stride == 0 {
            return Err(SeriesError::BadSpec(format!(
                "length and stride must be positive (length {}, stride {})",
                self.length, self.stride
            )));
        }
        if self.regime == Regime::Nonoverlapping && self.stride != self.length {
            return Err(SeriesError::BadSpec(format!(
                "nonoverlapping windows need stride == length (length {}, stride {})",
                self.length, self.stride
            )));
        }
        Ok(())
    }

    /// `floor((n - length) / stride) + 1`, or zero when the window does not fit.
    pub fn window_count(&self, n: usize) -> usize {
        if self.length > n || self.stride == 0 {
            0
        } else {
            (n - self.length) / self.stride + 1
        }
    }

    /// Start index of every window over a source of length `n`.
    pub fn window_starts(&self, n: usize) -> Result<Vec<usize>, SeriesError> {
        self.validate()?;
        if self.length > n {
            return Err(SeriesError::WindowTooLong { length: self.length, len: n });
        }
        if self.regime == Regime::Nonoverlapping && n % self.length != 0 {
            return Err(SeriesError::NonDivisible { length: self.length, len: n });
        }
        Ok((0..self.window_count(n)).map(|i| i * self.stride).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub spec: WindowSpec,
    pub source_len: usize,
    pub windows: Vec<Vec<f64>>,
}

pub fn make_windows(series: &TimeSeries, spec: WindowSpec) -> Result<WindowedDataset, SeriesError> {
    let values = series.values();
    let windows = spec.window_starts(values.len())?.into_iter().map(|s| values[s..s + spec.length].to_vec()).collect();
    Ok(WindowedDataset { spec, source_len: values.len(), windows })
}

/// Averages window outputs back onto the source grid. Every index gets the
/// unweighted mean of all window predictions covering it, which for
/// nonoverlapping windows is plain concatenation.
pub fn reassemble(dataset: &WindowedDataset, outputs: &[Vec<f64>]) -> Result<Vec<f64>, SeriesError> {
    if outputs.len() != dataset.windows.len() {
        return Err(SeriesError::ShapeMismatch(format!(
            "{} window outputs for {} windows",
            outputs.len(),
            dataset.windows.len()
        )));
    }
    reassemble_windows(dataset.spec, dataset.source_len, outputs)
}

pub(crate) fn reassemble_windows(
    spec: WindowSpec,
    source_len: usize,
    outputs: &[Vec<f64>],
) -> Result<Vec<f64>, SeriesError> {
    let starts = spec.window_starts(source_len)?;
    if outputs.len() != starts.len() {
        return Err(SeriesError::ShapeMismatch(format!("{} window outputs, expected {}", outputs.len(), starts.len())));
    }
    // running mean, so identical overlapping predictions reproduce the value bit-for-bit
    let mut mean = vec![0.0; source_len];
    let mut count = vec![0usize; source_len];
    for (k, (start, out)) in starts.iter().zip(outputs).enumerate() {
        if out.len() != spec.length {
            return Err(SeriesError::ShapeMismatch(format!(
                "window {k} has {} entries, expected {}",
                out.len(),
                spec.length
            )));
        }
        for (j, v) in out.iter().enumerate() {
            let i = start + j;
            count[i] += 1;
            mean[i] += (v - mean[i]) / count[i] as f64;
        }
    }
    match count.iter().position(|&c| c == 0) {
        Some(i) => Err(SeriesError::Uncovered(i)),
        None => Ok(mean),
    }
}

/// Mean absolute jump across the boundaries of length-`window` blocks:
/// `mean_k |v[k*window] - v[k*window - 1]|` for every `k >= 1` inside the series.
pub fn boundary_jump(values: &[f64], window: usize) -> f64 {
    if window == 0 {
        return 0.0;
    }
    let jumps: Vec<f64> = (1..)
        .map(|k| k * window)
        .take_while(|&i| i < values.len())
        .map(|i| (values[i] - values[i - 1]).abs())
        .collect();
    if jumps.is_empty() {
        0.0
    } else {
        jumps.iter().sum::<f64>() / jumps.len() as f64
    }
}

/// Min–max affine map from `[src_min, src_max]` onto `[lo, hi]`.
///
/// A constant source (`src_min == src_max`) maps everything to `lo` and
/// inverts back to `src_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineScale {
    pub src_min: f64,
    pub src_max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AffineScale {
    pub fn fit(values: &[f64], lo: f64, hi: f64) -> Self {
        let (src_min, src_max) = min_max(values);
        Self { src_min, src_max, lo, hi }
    }

    pub fn is_degenerate(&self) -> bool {
        self.src_max <= self.src_min
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            self.lo
        } else {
            self.lo + (x - self.src_min) * (self.hi - self.lo) / (self.src_max - self.src_min)
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            self.src_min
        } else {
            self.src_min + (y - self.lo) * (self.src_max - self.src_min) / (self.hi - self.lo)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub scale: AffineScale,
}

/// Min–max scales `values` onto `[lo, hi]`.
///
/// A constant input is reported as [`SeriesError::DegenerateRange`], which
/// still carries the all-`lo` output and its constants.
pub fn normalize(values: &[f64], lo: f64, hi: f64) -> Result<Normalized, SeriesError> {
    if !(hi > lo) {
        return Err(SeriesError::BadSpec(format!("normalization target needs hi > lo, got [{lo}, {hi}]")));
    }
    if values.is_empty() {
        return Err(SeriesError::Empty);
    }
    let scale = AffineScale::fit(values, lo, hi);
    let out = Normalized { values: values.iter().map(|&v| scale.apply(v)).collect(), scale };
    if scale.is_degenerate() {
        Err(SeriesError::DegenerateRange(out))
    } else {
        Ok(out)
    }
}

pub fn denormalize(values: &[f64], scale: &AffineScale) -> Vec<f64> {
    values.iter().map(|&v| scale.invert(v)).collect()
}

/// Additive i.i.d. Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self, SeriesError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SeriesError::BadSpec(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

pub fn add_noise(series: &TimeSeries, noise: &NoiseModel) -> TimeSeries {
    let mut rng = SeededRng::new(noise.seed);
    let values = series
        .values()
        .iter()
        .map(|&v| if noise.sigma == 0.0 { v } else { v + noise.sigma * rng.standard_normal() })
        .collect();
    TimeSeries {
        t0: series.t0,
        dt: series.dt,
        values,
        label: format!("{}+noise(sigma={},seed={})", series.label, noise.sigma, noise.seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> TimeSeries {
        TimeSeries::new(0.0, 1.0, (0..n).map(|i| i as f64).collect(), "ramp").unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(matches!(TimeSeries::new(0.0, 0.0, vec![1.0], ""), Err(SeriesError::BadStep(_))));
        assert!(matches!(TimeSeries::new(0.0, 1.0, vec![], ""), Err(SeriesError::Empty)));
        assert!(matches!(
            TimeSeries::new(0.0, 1.0, vec![1.0, f64::NAN], ""),
            Err(SeriesError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn time_stamps_are_exact() {
        let s = TimeSeries::new(3.0, 0.5, vec![0.0; 5], "").unwrap();
        assert_eq!(s.times(), vec![3.0, 3.5, 4.0, 4.5, 5.0]);
    }

    #[test]
    fn window_counts_for_default_settings() {
        let s = ramp(115);
        let non = make_windows(&s, WindowSpec::nonoverlapping(23)).unwrap();
        assert_eq!(non.windows.len(), 5);
        let sl = make_windows(&s, WindowSpec::sliding(10)).unwrap();
        assert_eq!(sl.windows.len(), 106);
        assert!(sl.windows.iter().all(|w| w.len() == 10));
        assert_eq!(sl.windows[7][0], 7.0);
    }

    #[test]
    fn nondivisible_and_too_long() {
        let s = ramp(7);
        assert!(matches!(
            make_windows(&s, WindowSpec::nonoverlapping(3)),
            Err(SeriesError::NonDivisible { length: 3, len: 7 })
        ));
        assert!(matches!(make_windows(&s, WindowSpec::sliding(8)), Err(SeriesError::WindowTooLong { .. })));
    }

    #[test]
    fn inconsistent_nonoverlapping_stride_is_rejected() {
        let spec = WindowSpec { length: 3, stride: 1, regime: Regime::Nonoverlapping };
        assert!(matches!(spec.validate(), Err(SeriesError::BadSpec(_))));
        assert!(!WindowSpec::sliding_with_stride(4, 2).is_standard());
    }

    #[test]
    fn reassemble_examples() {
        let ds = WindowedDataset { spec: WindowSpec::nonoverlapping(2), source_len: 4, windows: vec![vec![0.0; 2]; 2] };
        assert_eq!(reassemble(&ds, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);

        let ds = WindowedDataset { spec: WindowSpec::sliding(2), source_len: 3, windows: vec![vec![0.0; 2]; 2] };
        assert_eq!(reassemble(&ds, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), vec![1.0, 2.5, 4.0]);

        let s = ramp(12);
        let ds = make_windows(&s, WindowSpec::sliding(5)).unwrap();
        let constant = vec![vec![0.25; 5]; ds.windows.len()];
        assert!(reassemble(&ds, &constant).unwrap().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn reassemble_shape_errors() {
        let s = ramp(6);
        let ds = make_windows(&s, WindowSpec::sliding(3)).unwrap();
        assert!(matches!(reassemble(&ds, &[vec![0.0; 3]]), Err(SeriesError::ShapeMismatch(_))));
        let mut bad = ds.windows.clone();
        bad[1].pop();
        assert!(matches!(reassemble(&ds, &bad), Err(SeriesError::ShapeMismatch(_))));
    }

    #[test]
    fn stride_gaps_are_reported() {
        let s = ramp(6);
        let ds = make_windows(&s, WindowSpec::sliding_with_stride(2, 3)).unwrap();
        assert!(matches!(reassemble(&ds, &ds.windows), Err(SeriesError::Uncovered(2))));
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&[0.0, 5.0, 10.0], 0.0, 1.0).unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        match normalize(&[4.0, 4.0, 4.0], 0.0, 1.0) {
            Err(SeriesError::DegenerateRange(n)) => {
                assert_eq!(n.values, vec![0.0; 3]);
                assert_eq!(n.scale.invert(0.0), 4.0);
            }
            other => panic!("expected DegenerateRange, got {other:?}"),
        }
        assert!(matches!(normalize(&[1.0, 2.0], 1.0, 1.0), Err(SeriesError::BadSpec(_))));
    }

    #[test]
    fn boundary_jump_counts_interior_boundaries() {
        let v = [0.0, 0.0, 1.0, 1.0, 3.0, 3.0];
        assert_eq!(boundary_jump(&v, 2), 1.5);
        assert_eq!(boundary_jump(&v, 6), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::new(1.0, 0.25, vec![0.1, 1.0 / 3.0, -2.5e-7], "x").unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,value\n1,0.1\n"));
        let back = TimeSeries::read_csv(buf.as_slice(), "x").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(TimeSeries::read_csv("a,b\n1,2\n".as_bytes(), "").is_err());
        assert!(matches!(
            TimeSeries::read_csv("t,value\n0,1\n1,x\n".as_bytes(), ""),
            Err(SeriesError::CsvContent { row: 2, .. })
        ));
        assert!(TimeSeries::read_csv("t,value\n0,1\n1,2\n5,3\n".as_bytes(), "").is_err());
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let s = ramp(50);
        assert_eq!(add_noise(&s, &NoiseModel::new(0.0, 5).unwrap()).values(), s.values());
        let a = add_noise(&s, &NoiseModel::new(0.3, 5).unwrap());
        let b = add_noise(&s, &NoiseModel::new(0.3, 5).unwrap());
        assert_eq!(a, b);
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        let flat = TimeSeries::new(0.0, 1.0, vec![0.0; n], "flat").unwrap();
        let noisy = add_noise(&flat, &NoiseModel::new(0.01, 11).unwrap());
        let v = noisy.values();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((std - 0.01).abs() / 0.01 < 0.02, "std {std}");
        assert!(mean.abs() < 3.0 * 0.01 / (n as f64).sqrt(), "mean {mean}");
    }

    proptest! {
        #[test]
        fn window_count_formula(n in 1usize..300, w in 1usize..50, stride in 1usize..20) {
            prop_assume!(w <= n);
            let spec = WindowSpec::sliding_with_stride(w, stride);
            let starts = spec.window_starts(n).unwrap();
            prop_assert_eq!(starts.len(), (n - w) / stride + 1);
            prop_assert!(starts.iter().enumerate().all(|(i, &s)| s == i * stride));
        }

        #[test]
        fn windows_reassemble_to_source(values in proptest::collection::vec(-1e3f64..1e3, 1..120), w in 1usize..30) {
            prop_assume!(w <= values.len());
            let s = TimeSeries::new(0.0, 1.0, values.clone(), "p").unwrap();
            let sl = make_windows(&s, WindowSpec::sliding(w)).unwrap();
            prop_assert_eq!(reassemble(&sl, &sl.windows).unwrap(), values.clone());
            let n = values.len() - values.len() % w;
            let s = TimeSeries::new(0.0, 1.0, values[..n].to_vec(), "p").unwrap();
            let non = make_windows(&s, WindowSpec::nonoverlapping(w)).unwrap();
            prop_assert_eq!(reassemble(&non, &non.windows).unwrap(), values[..n].to_vec());
        }

        #[test]
        fn normalize_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 2..50)) {
            if let Ok(n) = normalize(&values, 0.0, 1.0) {
                let back = denormalize(&n.values, &n.scale);
                let span = n.scale.src_max - n.scale.src_min;
                for (a, b) in back.iter().zip(&values) {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(span));
                }
                prop_assert!(n.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
