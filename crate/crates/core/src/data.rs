//! Series generation, CSV ingestion and windowing into supervised datasets.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::Normalizer;
use crate::error::{Error, Result};

/// Mackey-Glass delay differential equation
/// `dx/dt = 0.2 x(t - tau) / (1 + x(t - tau)^10) - 0.1 x(t)`
/// with constant history `x(t) = x0` for `t <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlass {
    pub tau: f64,
    pub x0: f64,
    /// Integration step; `1 / step` must be an integer.
    pub step: f64,
}

impl Default for MackeyGlass {
    fn default() -> Self {
        MackeyGlass { tau: 30.0, x0: 1.2, step: 0.1 }
    }
}

#[inline]
fn mg_rhs(x: f64, delayed: f64) -> f64 {
    0.2 * delayed / (1.0 + delayed.powi(10)) - 0.1 * x
}

impl MackeyGlass {
    /// Whether the delay lies in the chaotic regime (`tau >= 17`).
    pub fn is_chaotic(&self) -> bool {
        self.tau >= 17.0
    }

    /// Integrate with fixed-step RK4 and return `x(t)` sampled at the integer
    /// times `t_start, t_start + 1, ..., t_start + length - 1`. The delayed
    /// term between grid points is linearly interpolated.
    pub fn generate(&self, t_start: usize, length: usize) -> Result<Vec<(f64, f64)>> {
        let per_unit = (1.0 / self.step).round();
        if !(self.step > 0.0) || ((per_unit * self.step) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("integration step {} must divide 1", self.step)));
        }
        if !(self.tau >= self.step) {
            return Err(Error::Config(format!("delay {} must be at least one integration step", self.tau)));
        }
        let per_unit = per_unit as usize;
        let h = self.step;
        let delay_steps = self.tau * per_unit as f64;
        let t_end = t_start + length.saturating_sub(1);
        let total = t_end * per_unit;
        let mut grid = Vec::with_capacity(total + 1);
        grid.push(self.x0);

        let x0 = self.x0;
        let delayed = |grid: &[f64], pos: f64| -> f64 {
            if pos <= 0.0 {
                return x0;
            }
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 {
                grid[lo]
            } else {
                grid[lo] * (1.0 - frac) + grid[lo + 1] * frac
            }
        };

        for i in 0..total {
            let x = grid[i];
            let base = i as f64 - delay_steps;
            let d0 = delayed(&grid, base);
            let dh = delayed(&grid, base + 0.5);
            let d1 = delayed(&grid, base + 1.0);
            let k1 = mg_rhs(x, d0);
            let k2 = mg_rhs(x + 0.5 * h * k1, dh);
            let k3 = mg_rhs(x + 0.5 * h * k2, dh);
            let k4 = mg_rhs(x + h * k3, d1);
            grid.push(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        }
        Ok((t_start..=t_end).take(length).map(|t| (t as f64, grid[t * per_unit])).collect())
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Add i.i.d. zero-mean Gaussian noise whose standard deviation is
/// `std_fraction` times the standard deviation of the clean series.
pub fn add_noise(series: &[f64], std_fraction: f64, seed: u64) -> Result<Vec<f64>> {
    if !(std_fraction >= 0.0) {
        return Err(Error::Config(format!("noise fraction must be >= 0, got {std_fraction}")));
    }
    if std_fraction == 0.0 || series.is_empty() {
        return Ok(series.to_vec());
    }
    let scale = std_fraction * std_dev(series);
    let normal = Normal::new(0.0, scale).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(series.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Hourly (or otherwise timestamped) multivariate table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub timestamps: Vec<NaiveDateTime>,
    pub names: Vec<String>,
    /// One vector per named column.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Config(format!("column `{name}` not found (have {:?})", self.names)))
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// CSV text with a `timestamp` column followed by every named column.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (row, ts) in self.timestamps.iter().enumerate() {
            let mut rec = vec![ts.format("%Y-%m-%dT%H:%M:%S").to_string()];
            rec.extend(self.columns.iter().map(|c| format!("{}", c[row])));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(ts);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0))
}

/// Read a CSV with a header row, a `timestamp` column and the requested value
/// columns (all value columns when `columns` is empty). Rows are numbered from
/// 1 (the first data row) in error messages.
pub fn load_csv(path: impl AsRef<Path>, columns: &[&str]) -> Result<Table> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?.clone();
    let ts_col = header
        .iter()
        .position(|h| h == "timestamp")
        .ok_or_else(|| Error::Csv { row: 0, msg: "missing `timestamp` column".into() })?;
    let wanted: Vec<String> = if columns.is_empty() {
        header.iter().filter(|h| *h != "timestamp").map(String::from).collect()
    } else {
        columns.iter().map(|s| s.to_string()).collect()
    };
    let idx: Vec<usize> = wanted
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Csv { row: 0, msg: format!("missing column `{name}`") })
        })
        .collect::<Result<_>>()?;

    let mut table = Table { timestamps: Vec::new(), names: wanted, columns: vec![Vec::new(); idx.len()] };
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        let raw_ts = rec.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Csv { row, msg: format!("unparseable timestamp `{raw_ts}`") })?;
        table.timestamps.push(ts);
        for (col, &c) in idx.iter().enumerate() {
            let raw = rec.get(c).unwrap_or("");
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Csv { row, msg: format!("column `{}`: invalid value `{raw}`", table.names[col]) })?;
            table.columns[col].push(v);
        }
    }
    Ok(table)
}

/// Deterministic stand-in for an hourly microgrid record with daily and
/// weekly cycles plus noise. Values stay strictly positive.
pub fn synthetic_microgrid(start: NaiveDate, days: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let t0 = start.and_hms_opt(0, 0, 0).unwrap();
    let hours = days * 24;
    let mut timestamps = Vec::with_capacity(hours);
    let (mut power, mut price) = (Vec::with_capacity(hours), Vec::with_capacity(hours));
    let tau = std::f64::consts::TAU;
    for h in 0..hours {
        let ts = t0 + Duration::hours(h as i64);
        let hour = ts.hour() as f64;
        let dow = ts.weekday().number_from_monday() as f64;
        let season = (tau * ts.ordinal() as f64 / 366.0).cos();
        power.push(3.0 + 1.2 * (tau * (hour - 6.0) / 24.0).sin() + 0.4 * season + 0.15 * (dow >= 6.0) as u8 as f64 + 0.1 * noise.sample(&mut rng));
        price.push(2.0 + 0.6 * (tau * (hour - 9.0) / 24.0).sin().max(-0.5) + 0.2 * season + 0.05 * noise.sample(&mut rng));
        timestamps.push(ts);
    }
    Table { timestamps, names: vec!["unmet_power".into(), "price".into()], columns: vec![power, price] }
}

/// `(month 1-12, weekday 1-7 from Monday, hour 0-23)` of a timestamp.
pub fn calendar_features(ts: &NaiveDateTime) -> [f64; 3] {
    [ts.month() as f64, ts.weekday().number_from_monday() as f64, ts.hour() as f64]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Sliding window: one next-step model applied recursively.
    #[serde(rename = "SW", alias = "sw")]
    Sw,
    /// Parallel models: one single-output model per lead.
    #[serde(rename = "PM", alias = "pm")]
    Pm,
    /// Multiple outputs: one model predicting every lead.
    #[serde(rename = "MO", alias = "mo")]
    Mo,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SW" => Ok(Scheme::Sw),
            "PM" => Ok(Scheme::Pm),
            "MO" => Ok(Scheme::Mo),
            _ => Err(Error::Config(format!("unknown scheme `{s}` (expected SW, PM or MO)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Sw => "SW",
            Scheme::Pm => "PM",
            Scheme::Mo => "MO",
        })
    }
}

/// Which lagged values form an input row and which leads form the targets.
/// Offsets are relative to the prediction origin `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub input_lags: Vec<i64>,
    pub output_leads: Vec<i64>,
    pub scheme: Scheme,
    /// Prepend `(month, weekday, hour)` of the most recent input time.
    #[serde(default)]
    pub calendar: bool,
}

impl WindowSpec {
    /// Nine lags `t-18, ..., t-2` and leads `t, t+2, t+4`.
    pub fn chaotic(scheme: Scheme) -> Self {
        WindowSpec { input_lags: (1..=9).map(|i| -20 + 2 * i).collect(), output_leads: vec![0, 2, 4], scheme, calendar: false }
    }

    /// Calendar features plus nine hourly lags `t-9, ..., t-1`; leads `t, t+1, t+2`.
    pub fn microgrid(scheme: Scheme) -> Self {
        WindowSpec { input_lags: (-9..=-1).collect(), output_leads: vec![0, 1, 2], scheme, calendar: true }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("window spec: {m}")));
        if self.input_lags.is_empty() || self.output_leads.is_empty() {
            return bad("needs at least one lag and one lead");
        }
        if self.input_lags.windows(2).any(|w| w[0] >= w[1]) {
            return bad("input lags must be strictly increasing");
        }
        if self.output_leads.windows(2).any(|w| w[0] >= w[1]) {
            return bad("output leads must be strictly increasing");
        }
        if *self.input_lags.last().unwrap() > 0 {
            return bad("input lags must be <= 0");
        }
        if self.output_leads[0] <= *self.input_lags.last().unwrap() {
            return bad("every lead must come after the most recent lag");
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.input_lags.len() + if self.calendar { 3 } else { 0 }
    }

    pub fn n_outputs(&self) -> usize {
        self.output_leads.len()
    }

    /// Minimum series length for a single window.
    pub fn span(&self) -> usize {
        (self.output_leads.last().unwrap() - self.input_lags[0] + 1) as usize
    }

    /// Offset between consecutive sliding-window steps.
    pub fn stride(&self) -> i64 {
        if self.output_leads.len() > 1 {
            self.output_leads[1] - self.output_leads[0]
        } else if self.input_lags.len() > 1 {
            self.input_lags[1] - self.input_lags[0]
        } else {
            1
        }
    }

    /// Spec restricted to a set of leads (used for PM and SW sub-models).
    pub fn with_leads(&self, leads: Vec<i64>) -> WindowSpec {
        WindowSpec { output_leads: leads, ..self.clone() }
    }

    /// Index of the most recent lag of the target variable inside an input row.
    pub fn last_lag_column(&self) -> usize {
        self.n_inputs() - 1
    }
}

/// Train or test membership of each raw sample.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    /// Samples `[0, train_len)` train, the rest test.
    Range { train_len: usize },
    /// Day-of-month `<= train_days` train, later days test.
    DayOfMonth { train_days: u32 },
}

/// Raw supervised windows of one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Windows {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Index of the prediction origin `t` in the raw series.
    pub origins: Vec<usize>,
    /// Timestamp of each origin (empty for untimed series).
    pub origin_times: Vec<NaiveDateTime>,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Normalized train/test matrices plus the raw values they came from.
/// Rows `0..n_train` are training windows, the rest are test windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub spec: WindowSpec,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub raw: Windows,
    pub n_train: usize,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    /// Windows discarded because they straddle a split boundary or a time gap.
    pub dropped: usize,
}

impl WindowedDataset {
    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.x[..self.n_train]
    }
    pub fn train_y(&self) -> &[Vec<f64>] {
        &self.y[..self.n_train]
    }
    pub fn test_x(&self) -> &[Vec<f64>] {
        &self.x[self.n_train..]
    }
    pub fn test_y(&self) -> &[Vec<f64>] {
        &self.y[self.n_train..]
    }
    pub fn raw_test_x(&self) -> &[Vec<f64>] {
        &self.raw.x[self.n_train..]
    }
    pub fn raw_test_y(&self) -> &[Vec<f64>] {
        &self.raw.y[self.n_train..]
    }
    pub fn raw_train_x(&self) -> &[Vec<f64>] {
        &self.raw.x[..self.n_train]
    }
    pub fn raw_train_y(&self) -> &[Vec<f64>] {
        &self.raw.y[..self.n_train]
    }

    /// Single-output view on lead `k`, with the same windows and scaling.
    pub fn select_output(&self, k: usize) -> WindowedDataset {
        let pick = |rows: &[Vec<f64>]| rows.iter().map(|r| vec![r[k]]).collect();
        WindowedDataset {
            spec: self.spec.with_leads(vec![self.spec.output_leads[k]]),
            x: self.x.clone(),
            y: pick(&self.y),
            raw: Windows { y: pick(&self.raw.y), ..self.raw.clone() },
            n_train: self.n_train,
            input_norm: self.input_norm.clone(),
            target_norm: self.target_norm.column(k),
            dropped: self.dropped,
        }
    }
}

/// A univariate series prepared for windowing. `train` and `test` may differ
/// when independent noise is injected into each split.
#[derive(Debug, Clone)]
pub struct SeriesInput<'a> {
    pub train: &'a [f64],
    pub test: &'a [f64],
    pub timestamps: Option<&'a [NaiveDateTime]>,
}

fn is_train(rule: &SplitRule, idx: usize, timestamps: Option<&[NaiveDateTime]>) -> Result<bool> {
    match rule {
        SplitRule::Range { train_len } => Ok(idx < *train_len),
        SplitRule::DayOfMonth { train_days } => {
            let ts = timestamps.ok_or_else(|| Error::Config("day-of-month split needs timestamps".into()))?;
            Ok(ts[idx].day() <= *train_days)
        }
    }
}

/// Raw windows for every origin, assigned to train or test. A window whose raw
/// samples belong to both splits, or that spans a gap in the timestamps, is
/// dropped and counted.
pub fn extract_windows(input: &SeriesInput, spec: &WindowSpec, split: &SplitRule) -> Result<(Windows, Windows, usize)> {
    spec.validate()?;
    let len = input.train.len();
    if input.test.len() != len || input.timestamps.is_some_and(|t| t.len() != len) {
        return Err(Error::Shape("series and timestamps must have equal length".into()));
    }
    if spec.calendar && input.timestamps.is_none() {
        return Err(Error::Config("calendar features need a timestamped series".into()));
    }
    let span = spec.span();
    if len < span {
        return Err(Error::InsufficientLength { required: span, actual: len });
    }
    let first_lag = spec.input_lags[0];
    let last_lag = *spec.input_lags.last().unwrap();
    let last_lead = *spec.output_leads.last().unwrap();
    let step = input.timestamps.and_then(|ts| if ts.len() > 1 { Some(ts[1] - ts[0]) } else { None });

    let labels: Vec<bool> = (0..len).map(|i| is_train(split, i, input.timestamps)).collect::<Result<_>>()?;
    let (mut train, mut test) = (Windows::default(), Windows::default());
    let mut dropped = 0;
    for t in (-first_lag) as usize..(len as i64 - last_lead) as usize {
        let lo = (t as i64 + first_lag) as usize;
        let hi = (t as i64 + last_lead) as usize;
        let label = labels[lo];
        let consistent = labels[lo..=hi].iter().all(|&l| l == label);
        let contiguous = match (input.timestamps, step) {
            (Some(ts), Some(step)) => ts[lo..=hi].windows(2).all(|w| w[1] - w[0] == step),
            _ => true,
        };
        if !consistent || !contiguous {
            dropped += 1;
            continue;
        }
        let series = if label { input.train } else { input.test };
        let mut x = Vec::with_capacity(spec.n_inputs());
        if spec.calendar {
            let ts = input.timestamps.unwrap();
            x.extend_from_slice(&calendar_features(&ts[(t as i64 + last_lag) as usize]));
        }
        x.extend(spec.input_lags.iter().map(|&lag| series[(t as i64 + lag) as usize]));
        let y = spec.output_leads.iter().map(|&lead| series[(t as i64 + lead) as usize]).collect();
        let dest = if label { &mut train } else { &mut test };
        dest.x.push(x);
        dest.y.push(y);
        dest.origins.push(t);
        if let Some(ts) = input.timestamps {
            dest.origin_times.push(ts[t]);
        }
    }
    Ok((train, test, dropped))
}

/// Normalize raw windows with statistics from the training split. Targets are
/// scaled with the normalizer of the most recent lag column, so the link layer
/// mixes predictions and the last input on one scale.
pub fn normalize_windows(spec: &WindowSpec, train: Windows, test: Windows, dropped: usize) -> Result<WindowedDataset> {
    if train.is_empty() {
        return Err(Error::InsufficientLength { required: spec.span(), actual: 0 });
    }
    let input_norm = Normalizer::fit(&train.x)?;
    let col = input_norm.column(spec.last_lag_column());
    let k = spec.n_outputs();
    let target_norm = Normalizer { min: vec![col.min[0]; k], max: vec![col.max[0]; k] };
    let n_train = train.len();
    let mut raw = train;
    raw.x.extend(test.x);
    raw.y.extend(test.y);
    raw.origins.extend(test.origins);
    raw.origin_times.extend(test.origin_times);
    let x = raw.x.iter().map(|r| input_norm.apply(r)).collect();
    let y = raw.y.iter().map(|r| target_norm.apply(r)).collect();
    Ok(WindowedDataset { spec: spec.clone(), x, y, raw, n_train, input_norm, target_norm, dropped })
}

/// Build the dataset(s) a scheme trains on: one multi-output dataset for MO,
/// one single-output dataset per lead for PM, and a single next-step dataset
/// for SW. Every dataset shares the same windows and input scaling.
pub fn build_windows(input: &SeriesInput, spec: &WindowSpec, split: &SplitRule) -> Result<Vec<WindowedDataset>> {
    let (train, test, dropped) = extract_windows(input, spec, split)?;
    let full = normalize_windows(spec, train, test, dropped)?;
    Ok(match spec.scheme {
        Scheme::Mo => vec![full],
        Scheme::Pm => (0..spec.n_outputs()).map(|k| full.select_output(k)).collect(),
        Scheme::Sw => vec![full.select_output(0)],
    })
}
