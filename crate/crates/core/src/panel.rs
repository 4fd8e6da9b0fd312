//! Long-format panel ingestion and the within-group (time-demeaning)
//! transformation.
//!
//! Observations are grouped into per-unit dense blocks: a `T_i`-vector of
//! responses and a column-major `T_i x k` regressor matrix. Every block also
//! remembers the global position of each of its time labels, which the
//! leverage code uses to average across units observed at the same period.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit or time identifier as read from the input.
///
/// A column whose every value parses as an integer becomes `Int` so that
/// periods sort numerically; anything else is kept as text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Text(String),
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Label::Int(a), Label::Int(b)) => a.cmp(b),
            (Label::Text(a), Label::Text(b)) => a.cmp(b),
            (Label::Int(_), Label::Text(_)) => Ordering::Less,
            (Label::Text(_), Label::Int(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(v: &str) -> Self {
        Label::Text(v.to_owned())
    }
}

/// One long-format observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit: Label,
    pub time: Label,
    pub y: f64,
    pub x: Vec<f64>,
}

/// Which CSV columns hold the unit id, time id, response and regressors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub unit: String,
    pub time: String,
    pub y: String,
    pub x: Vec<String>,
}

impl ColumnSpec {
    pub fn new(y: impl Into<String>, x: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ColumnSpec {
            unit: "unit".to_owned(),
            time: "time".to_owned(),
            y: y.into(),
            x: x.into_iter().map(Into::into).collect(),
        }
    }
}

/// All observations of one unit, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBlock {
    pub id: Label,
    pub times: Vec<Label>,
    /// Index of each row's time label in [`PanelDataset::time_labels`].
    pub time_pos: Vec<usize>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl UnitBlock {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// A validated long-format panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    units: Vec<UnitBlock>,
    time_labels: Vec<Label>,
    column_names: Vec<String>,
}

/// Facts about a panel worth surfacing to users before estimation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    /// Units observed in a single period; they carry no within-unit variation.
    pub singleton_units: Vec<Label>,
    pub balanced: bool,
}

impl PanelDataset {
    /// Build a panel from unordered observations.
    ///
    /// Units keep their order of first appearance; rows are sorted by time
    /// within each unit.
    pub fn from_observations(
        observations: Vec<Observation>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let k = column_names.len();
        if k == 0 {
            return Err(Error::Config("at least one regressor is required".into()));
        }
        if observations.is_empty() {
            return Err(Error::Data("panel has no observations".into()));
        }

        let mut order: Vec<Label> = Vec::new();
        let mut groups: HashMap<Label, Vec<Observation>> = HashMap::new();
        for obs in observations {
            if obs.x.len() != k {
                return Err(Error::Data(format!(
                    "unit {} time {}: expected {k} regressors, found {}",
                    obs.unit,
                    obs.time,
                    obs.x.len()
                )));
            }
            if !obs.y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "unit {} time {}: non-finite value",
                    obs.unit, obs.time
                )));
            }
            if !groups.contains_key(&obs.unit) {
                order.push(obs.unit.clone());
            }
            groups.entry(obs.unit.clone()).or_default().push(obs);
        }

        let mut all_times: Vec<Label> = groups
            .values()
            .flatten()
            .map(|o| o.time.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        all_times.sort();
        let position: HashMap<&Label, usize> =
            all_times.iter().enumerate().map(|(i, t)| (t, i)).collect();

        let mut units = Vec::with_capacity(order.len());
        for id in &order {
            let mut rows = groups.remove(id).expect("grouped unit");
            rows.sort_by(|a, b| a.time.cmp(&b.time));
            for pair in rows.windows(2) {
                if pair[0].time == pair[1].time {
                    return Err(Error::DuplicateObservation {
                        unit: id.to_string(),
                        time: pair[0].time.to_string(),
                    });
                }
            }
            let t = rows.len();
            let y = DVector::from_iterator(t, rows.iter().map(|o| o.y));
            let x = DMatrix::from_fn(t, k, |r, c| rows[r].x[c]);
            let time_pos = rows.iter().map(|o| position[&o.time]).collect();
            let times = rows.into_iter().map(|o| o.time).collect();
            units.push(UnitBlock {
                id: id.clone(),
                times,
                time_pos,
                y,
                x,
            });
        }

        Ok(PanelDataset {
            units,
            time_labels: all_times,
            column_names,
        })
    }

    /// Assemble a balanced panel directly from per-unit blocks with integer
    /// periods `1..=T`. Used by the simulation code, which never produces
    /// duplicates.
    pub fn from_balanced_blocks(
        blocks: Vec<(DVector<f64>, DMatrix<f64>)>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let t = blocks.first().map(|b| b.0.len()).unwrap_or(0);
        if t == 0 {
            return Err(Error::Data("panel has no observations".into()));
        }
        let k = column_names.len();
        let time_labels: Vec<Label> = (1..=t as i64).map(Label::Int).collect();
        let mut units = Vec::with_capacity(blocks.len());
        for (i, (y, x)) in blocks.into_iter().enumerate() {
            if y.len() != t || x.nrows() != t || x.ncols() != k {
                return Err(Error::Data(format!("block {i} has inconsistent shape")));
            }
            units.push(UnitBlock {
                id: Label::Int(i as i64 + 1),
                times: time_labels.clone(),
                time_pos: (0..t).collect(),
                y,
                x,
            });
        }
        Ok(PanelDataset {
            units,
            time_labels,
            column_names,
        })
    }

    pub fn units(&self) -> &[UnitBlock] {
        &self.units
    }

    /// Number of units, `N`.
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// Total number of observations, `n = sum T_i`.
    pub fn n_obs(&self) -> usize {
        self.units.iter().map(UnitBlock::len).sum()
    }

    pub fn k(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn time_labels(&self) -> &[Label] {
        &self.time_labels
    }

    pub fn periods(&self) -> Vec<usize> {
        self.units.iter().map(UnitBlock::len).collect()
    }

    pub fn validation_report(&self) -> ValidationReport {
        let singleton_units = self
            .units
            .iter()
            .filter(|u| u.len() == 1)
            .map(|u| u.id.clone())
            .collect();
        let t0 = self.units.first().map(UnitBlock::len).unwrap_or(0);
        ValidationReport {
            singleton_units,
            balanced: self.units.iter().all(|u| u.len() == t0),
        }
    }
}

/// Read a long-format CSV file into a panel.
pub fn load_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<PanelDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, spec)
}

/// Same as [`load_csv`] for any reader.
pub fn read_csv<R: std::io::Read>(reader: R, spec: &ColumnSpec) -> Result<PanelDataset> {
    if spec.x.is_empty() {
        return Err(Error::Config("at least one regressor is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    let unit_col = find(&spec.unit)?;
    let time_col = find(&spec.time)?;
    let y_col = find(&spec.y)?;
    let x_cols = spec.x.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut raw_units = Vec::new();
    let mut raw_times = Vec::new();
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        // Header is line 1.
        let row = idx + 2;
        let cell = |c: usize, name: &str| -> Result<&str> {
            match record.get(c) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    message: format!("missing value in column `{name}`"),
                }),
            }
        };
        let number = |c: usize, name: &str| -> Result<f64> {
            let text = cell(c, name)?;
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    message: format!("column `{name}`: `{text}` is not a finite number"),
                }),
            }
        };
        raw_units.push(cell(unit_col, &spec.unit)?.to_owned());
        raw_times.push(cell(time_col, &spec.time)?.to_owned());
        ys.push(number(y_col, &spec.y)?);
        let row_x = x_cols
            .iter()
            .zip(&spec.x)
            .map(|(&c, name)| number(c, name))
            .collect::<Result<Vec<_>>>()?;
        xs.push(row_x);
    }

    let units = to_labels(raw_units);
    let times = to_labels(raw_times);
    let observations = units
        .into_iter()
        .zip(times)
        .zip(ys.into_iter().zip(xs))
        .map(|((unit, time), (y, x))| Observation { unit, time, y, x })
        .collect();
    PanelDataset::from_observations(observations, spec.x.clone())
}

fn to_labels(raw: Vec<String>) -> Vec<Label> {
    let ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
    match ints {
        Some(v) => v.into_iter().map(Label::Int).collect(),
        None => raw.into_iter().map(Label::Text).collect(),
    }
}

/// One unit after subtracting its time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct DemeanedUnit {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub time_pos: Vec<usize>,
}

impl DemeanedUnit {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// The within-transformed panel, unit order matching the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DemeanedPanel {
    units: Vec<DemeanedUnit>,
    n_positions: usize,
    column_names: Vec<String>,
}

impl DemeanedPanel {
    pub fn units(&self) -> &[DemeanedUnit] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_obs(&self) -> usize {
        self.units.iter().map(DemeanedUnit::len).sum()
    }

    pub fn k(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Number of distinct time labels across the panel.
    pub fn n_positions(&self) -> usize {
        self.n_positions
    }

    /// Stack all unit blocks into one `n x k` design and `n`-vector.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n_obs();
        let k = self.k();
        let mut x = DMatrix::zeros(n, k);
        let mut y = DVector::zeros(n);
        let mut row = 0;
        for u in &self.units {
            let t = u.len();
            x.view_mut((row, 0), (t, k)).copy_from(&u.x);
            y.rows_mut(row, t).copy_from(&u.y);
            row += t;
        }
        (x, y)
    }

    /// Panel with the same design and a different demeaned response.
    pub fn with_response(&self, ys: Vec<DVector<f64>>) -> Self {
        let units = self
            .units
            .iter()
            .zip(ys)
            .map(|(u, y)| DemeanedUnit {
                y,
                x: u.x.clone(),
                time_pos: u.time_pos.clone(),
            })
            .collect();
        DemeanedPanel {
            units,
            n_positions: self.n_positions,
            column_names: self.column_names.clone(),
        }
    }

    /// Construct from already-demeaned blocks. Caller is responsible for
    /// the zero within-unit means.
    pub fn from_units(
        units: Vec<DemeanedUnit>,
        n_positions: usize,
        column_names: Vec<String>,
    ) -> Self {
        DemeanedPanel {
            units,
            n_positions,
            column_names,
        }
    }
}

/// Subtract each unit's own mean from its response and every regressor.
pub fn within_transform(data: &PanelDataset) -> DemeanedPanel {
    let units = data
        .units()
        .iter()
        .map(|u| DemeanedUnit {
            y: demean_vector(&u.y),
            x: demean_columns(&u.x),
            time_pos: u.time_pos.clone(),
        })
        .collect();
    DemeanedPanel {
        units,
        n_positions: data.time_labels().len(),
        column_names: data.column_names().to_vec(),
    }
}

fn demean_vector(v: &DVector<f64>) -> DVector<f64> {
    if v.len() <= 1 {
        return DVector::zeros(v.len());
    }
    let mean = v.mean();
    v.map(|e| e - mean)
}

fn demean_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    if m.nrows() <= 1 {
        out.fill(0.0);
        return out;
    }
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.apply(|e| *e -= mean);
    }
    out
}
