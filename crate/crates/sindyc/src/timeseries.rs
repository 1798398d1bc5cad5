//! Uniformly sampled multichannel trajectories and the snapshot matrices
//! derived from them.
//!
//! The on-disk format is a plain UTF-8 CSV with a header row
//! `t,x1,..,xn[,u1,..,uq]`, comma delimited, `.` decimal separator, no
//! missing cells. Values are written in scientific notation with 17
//! significant digits so that a save/load round trip is exact.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative tolerance on the deviation of successive time differences from
/// the mean step.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// A uniformly sampled trajectory: one row per channel, one column per
/// sample. Inputs, when present, share the same time grid.
///
/// Instances are immutable after construction and validated on entry:
/// at least two samples, a uniform strictly increasing grid, matching
/// column counts, and all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Array1<f64>,
    states: Array2<f64>,
    inputs: Option<Array2<f64>>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(
        times: Array1<f64>,
        states: Array2<f64>,
        inputs: Option<Array2<f64>>,
    ) -> Result<Self> {
        let len = times.len();
        if len < 2 {
            return Err(Error::Size(format!(
                "a time series needs at least 2 samples, got {len}"
            )));
        }
        if states.ncols() != len {
            return Err(Error::Shape(format!(
                "states have {} columns but there are {} samples",
                states.ncols(),
                len
            )));
        }
        if states.nrows() == 0 {
            return Err(Error::Shape("states must have at least one channel".into()));
        }
        if let Some(u) = &inputs {
            if u.ncols() != len {
                return Err(Error::Shape(format!(
                    "inputs have {} columns but there are {} samples",
                    u.ncols(),
                    len
                )));
            }
        }
        if !times.iter().all(|v| v.is_finite())
            || !states.iter().all(|v| v.is_finite())
            || !inputs.iter().flat_map(|u| u.iter()).all(|v| v.is_finite())
        {
            return Err(Error::Data("non-finite entry in time series".into()));
        }
        let dt = (times[len - 1] - times[0]) / (len - 1) as f64;
        if dt <= 0.0 {
            return Err(Error::Grid("time must be strictly increasing".into()));
        }
        for k in 1..len {
            let step = times[k] - times[k - 1];
            if (step - dt).abs() >= GRID_TOLERANCE * dt {
                return Err(Error::Grid(format!(
                    "nonuniform grid: step {k} is {step}, expected {dt}"
                )));
            }
        }
        Ok(Self {
            times,
            states,
            inputs,
            dt,
        })
    }

    pub fn times(&self) -> &Array1<f64> {
        &self.times
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn inputs(&self) -> Option<&Array2<f64>> {
        self.inputs.as_ref()
    }

    /// Uniform time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of state channels.
    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of input channels (0 when there are none).
    pub fn input_dim(&self) -> usize {
        self.inputs.as_ref().map_or(0, |u| u.nrows())
    }

    /// Number of samples (columns).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires >= 2 samples
    }

    /// Copy of this series with the input channels removed.
    pub fn without_inputs(&self) -> TimeSeries {
        TimeSeries {
            times: self.times.clone(),
            states: self.states.clone(),
            inputs: None,
            dt: self.dt,
        }
    }

    /// Keep every `stride`-th sample (always including the first). The time
    /// step of the result is `stride * dt`.
    pub fn downsample(&self, stride: usize) -> Result<TimeSeries> {
        if stride == 0 {
            return Err(Error::Param("stride must be at least 1".into()));
        }
        let idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if idx.len() < 2 {
            return Err(Error::Size(format!(
                "stride {stride} leaves fewer than 2 of {} samples",
                self.len()
            )));
        }
        let times = Array1::from_iter(idx.iter().map(|&k| self.times[k]));
        let states = self.states.select(Axis(1), &idx);
        let inputs = self.inputs.as_ref().map(|u| u.select(Axis(1), &idx));
        TimeSeries::new(times, states, inputs)
    }

    /// Sub-series covering the half-open sample range `[start, end)`.
    pub fn slice_samples(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start >= end || end > self.len() {
            return Err(Error::Param(format!(
                "invalid sample range {start}..{end} for {} samples",
                self.len()
            )));
        }
        TimeSeries::new(
            self.times.slice(s![start..end]).to_owned(),
            self.states.slice(s![.., start..end]).to_owned(),
            self.inputs
                .as_ref()
                .map(|u| u.slice(s![.., start..end]).to_owned()),
        )
    }
}

/// Paired snapshot matrices: `current` holds samples 1..m, `shifted` the
/// same columns advanced by one step, and `inputs_current` the inputs
/// aligned to `current`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub current: Array2<f64>,
    pub shifted: Array2<f64>,
    pub inputs_current: Option<Array2<f64>>,
}

/// Split a trajectory of m+1 samples into time-shifted snapshot matrices of
/// m columns each.
pub fn to_snapshot_pair(series: &TimeSeries) -> SnapshotPair {
    let m = series.len() - 1;
    SnapshotPair {
        current: series.states.slice(s![.., ..m]).to_owned(),
        shifted: series.states.slice(s![.., 1..]).to_owned(),
        inputs_current: series
            .inputs
            .as_ref()
            .map(|u| u.slice(s![.., ..m]).to_owned()),
    }
}

/// Maps CSV header names to channel roles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time: String,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
}

impl CsvSchema {
    /// The canonical schema `t, x1..xn, u1..uq`.
    pub fn canonical(state_dim: usize, input_dim: usize) -> Self {
        CsvSchema {
            time: "t".into(),
            states: (1..=state_dim).map(|i| format!("x{i}")).collect(),
            inputs: (1..=input_dim).map(|i| format!("u{i}")).collect(),
        }
    }

    /// Infer roles from a header row: the `t` column is time, `x*` columns
    /// are states, `u*` columns are inputs, in file order.
    pub fn infer(header: &[String]) -> Result<Self> {
        let mut time = None;
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        for name in header {
            let trimmed = name.trim();
            if trimmed == "t" || trimmed == "time" {
                time = Some(trimmed.to_string());
            } else if trimmed.starts_with('x') {
                states.push(trimmed.to_string());
            } else if trimmed.starts_with('u') {
                inputs.push(trimmed.to_string());
            } else {
                return Err(Error::Schema(format!(
                    "cannot infer role of column '{trimmed}' (expected t, x*, or u*)"
                )));
            }
        }
        let time = time.ok_or_else(|| Error::Schema("no time column in header".into()))?;
        if states.is_empty() {
            return Err(Error::Schema("no state columns in header".into()));
        }
        Ok(CsvSchema {
            time,
            states,
            inputs,
        })
    }
}

/// Load a trajectory from CSV, mapping columns to roles via `schema`.
/// Rows are sorted by time before validation.
pub fn load_timeseries(path: &Path, schema: &CsvSchema) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)?;
    parse_timeseries(&text, schema)
}

/// Load a trajectory from CSV, inferring the schema from the header row.
pub fn load_timeseries_auto(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)?;
    let header = first_header(&text)?;
    let schema = CsvSchema::infer(&header)?;
    parse_timeseries(&text, &schema)
}

fn first_header(text: &str) -> Result<Vec<String>> {
    let line = text
        .lines()
        .next()
        .ok_or_else(|| Error::Schema("empty file".into()))?;
    Ok(line.split(',').map(|s| s.trim().to_string()).collect())
}

fn parse_timeseries(text: &str, schema: &CsvSchema) -> Result<TimeSeries> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();

    let col_of = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|&h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let t_col = col_of(&schema.time)?;
    let x_cols: Vec<usize> = schema
        .states
        .iter()
        .map(|n| col_of(n))
        .collect::<Result<_>>()?;
    let u_cols: Vec<usize> = schema
        .inputs
        .iter()
        .map(|n| col_of(n))
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::Schema(format!(
                "row {} has {} cells, header has {}",
                lineno + 2,
                cells.len(),
                names.len()
            )));
        }
        let mut parsed = Vec::with_capacity(cells.len());
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::Schema(format!(
                    "row {} has an empty cell (no missing values permitted)",
                    lineno + 2
                )));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("row {}: cannot parse '{cell}'", lineno + 2)))?;
            parsed.push(v);
        }
        rows.push(parsed);
    }
    if rows.len() < 2 {
        return Err(Error::Size(format!(
            "need at least 2 data rows, got {}",
            rows.len()
        )));
    }
    rows.sort_by(|a, b| a[t_col].total_cmp(&b[t_col]));

    let m1 = rows.len();
    let times = Array1::from_iter(rows.iter().map(|r| r[t_col]));
    let mut states = Array2::zeros((x_cols.len(), m1));
    for (i, &c) in x_cols.iter().enumerate() {
        for (k, row) in rows.iter().enumerate() {
            states[(i, k)] = row[c];
        }
    }
    let inputs = if u_cols.is_empty() {
        None
    } else {
        let mut u = Array2::zeros((u_cols.len(), m1));
        for (i, &c) in u_cols.iter().enumerate() {
            for (k, row) in rows.iter().enumerate() {
                u[(i, k)] = row[c];
            }
        }
        Some(u)
    };
    TimeSeries::new(times, states, inputs)
}

/// Write a trajectory as CSV with the canonical header `t,x1..xn,u1..uq`.
/// Values carry 17 significant digits, so loading the file reproduces the
/// series exactly.
pub fn save_timeseries(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push('t');
    for i in 1..=series.state_dim() {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=series.input_dim() {
        let _ = write!(out, ",u{i}");
    }
    out.push('\n');
    for k in 0..series.len() {
        let _ = write!(out, "{:.16e}", series.times[k]);
        for i in 0..series.state_dim() {
            let _ = write!(out, ",{:.16e}", series.states[(i, k)]);
        }
        if let Some(u) = &series.inputs {
            for i in 0..u.nrows() {
                let _ = write!(out, ",{:.16e}", u[(i, k)]);
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Convenience view of states as a snapshot matrix without the final column.
pub fn training_columns(series: &TimeSeries) -> ArrayView2<'_, f64> {
    let m = series.len() - 1;
    series.states.slice(s![.., ..m])
}
