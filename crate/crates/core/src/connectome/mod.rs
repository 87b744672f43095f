//! ROI time series, emotion ratings and the correlation network built from them.

mod atlas;

use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graphcore::WeightedGraph;

pub use atlas::{FunctionalSystem, Roi, RoiAtlas};

/// Default top end of the rating scale.
pub const DEFAULT_MAX_RATING: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ConnectomeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("atlas: {0}")]
    Atlas(String),
    #[error("ROI `{name}` (column {index}) has zero variance")]
    ZeroVariance { index: usize, name: String },
    #[error("time series needs at least 3 time points, got {0}")]
    TooFewTimePoints(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("ratings for category `{0}` do not vary; no epochs can be selected")]
    DegenerateRatings(String),
    #[error("quantile must lie strictly between 0 and 1, got {0}")]
    InvalidQuantile(f64),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl ConnectomeError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ConnectomeError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ConnectomeError>;

/// BOLD signal per time point (rows) and ROI (columns), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    roi_names: Vec<String>,
    time_count: usize,
    values: Vec<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(roi_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let roi_count = roi_names.len();
        if roi_count == 0 {
            return Err(ConnectomeError::ShapeMismatch("no ROI columns".into()));
        }
        if rows.len() < 3 {
            return Err(ConnectomeError::TooFewTimePoints(rows.len()));
        }
        let mut values = Vec::with_capacity(rows.len() * roi_count);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != roi_count {
                return Err(ConnectomeError::ShapeMismatch(format!(
                    "row {t} has {} values, expected {roi_count}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(ConnectomeError::InvalidValue(format!(
                    "non-finite value at row {t}, ROI `{}`",
                    roi_names[j]
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(TimeSeriesMatrix {
            roi_names,
            time_count: rows.len(),
            values,
        })
    }

    /// Matrix with default names `roi_0 .. roi_{N-1}`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::new((0..n).map(|j| format!("roi_{j}")).collect(), rows)
    }

    pub fn roi_count(&self) -> usize {
        self.roi_names.len()
    }

    pub fn time_count(&self) -> usize {
        self.time_count
    }

    pub fn roi_names(&self) -> &[String] {
        &self.roi_names
    }

    pub fn get(&self, t: usize, roi: usize) -> f64 {
        self.values[t * self.roi_count() + roi]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.roi_count();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn column(&self, roi: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(roi).step_by(self.roi_count()).copied()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.roi_names.clone(),
            rows.iter().map(|&t| self.row(t).to_vec()).collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| ConnectomeError::io(path, e))?;
        Self::from_csv(file)
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let (names, rows) = read_numeric_csv(reader)?;
        Self::new(names, rows)
    }

    pub fn to_csv(&self) -> String {
        write_numeric_csv(&self.roi_names, (0..self.time_count).map(|t| self.row(t)))
    }
}

/// Parses a rectangular CSV with a header row and finite numeric cells.
fn read_numeric_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(1, e))?,
        None => {
            return Err(ConnectomeError::Parse {
                line: 1,
                msg: "empty file; expected a header row".into(),
            })
        }
    };
    if header.iter().all(|f| f.parse::<f64>().is_ok()) {
        return Err(ConnectomeError::Parse {
            line: 1,
            msg: "missing header row of column names".into(),
        });
    }
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_err(0, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() {
            return Err(ConnectomeError::Parse {
                line,
                msg: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => row.push(x),
                _ => {
                    return Err(ConnectomeError::Parse {
                        line,
                        msg: format!("column `{}`: `{cell}` is not a finite number", names[j]),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok((names, rows))
}

fn csv_err(line: usize, e: csv::Error) -> ConnectomeError {
    let line = e.position().map_or(line, |p| p.line() as usize);
    ConnectomeError::Parse {
        line,
        msg: e.to_string(),
    }
}

fn write_numeric_csv<'a, I>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Symmetric matrix with unit diagonal, stored as its strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    size: usize,
    upper: Vec<f64>,
}

impl CorrelationMatrix {
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * (2 * self.size - i - 1) / 2 + (j - i - 1)
    }

    /// Builds from a full square matrix, reading only the upper triangle.
    pub fn from_full(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(ConnectomeError::ShapeMismatch("empty correlation matrix".into()));
        }
        let mut m = CorrelationMatrix {
            size,
            upper: vec![0.0; size * (size - 1) / 2],
        };
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(ConnectomeError::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            for j in i + 1..size {
                let r = row[j];
                if !(-1.0..=1.0).contains(&r) {
                    return Err(ConnectomeError::InvalidValue(format!(
                        "correlation ({i}, {j}) = {r} outside [-1, 1]"
                    )));
                }
                let k = m.offset(i, j);
                m.upper[k] = r;
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.upper[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.upper[self.offset(j, i)],
        }
    }

    pub fn to_full(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Pearson correlation between every pair of ROI columns.
pub fn pearson_correlation(ts: &TimeSeriesMatrix) -> Result<CorrelationMatrix> {
    let n = ts.roi_count();
    let t = ts.time_count() as f64;
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for j in 0..n {
        let mean = ts.column(j).sum::<f64>() / t;
        let col: Vec<f64> = ts.column(j).map(|x| x - mean).collect();
        let ss: f64 = col.iter().map(|x| x * x).sum();
        if ss <= 0.0 || col.iter().all(|&x| x == 0.0) {
            return Err(ConnectomeError::ZeroVariance {
                index: j,
                name: ts.roi_names()[j].clone(),
            });
        }
        norms.push(ss.sqrt());
        centered.push(col);
    }
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            upper.push((dot / (norms[i] * norms[j])).clamp(-1.0, 1.0));
        }
    }
    Ok(CorrelationMatrix { size: n, upper })
}

/// Dense network with one edge per ROI pair weighted by the correlation.
pub fn build_network(c: &CorrelationMatrix) -> WeightedGraph {
    let n = c.size();
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    WeightedGraph::new(n, edges.map(|(i, j)| (i, j, c.get(i, j))))
        .expect("correlation entries are finite and pairs unique")
}

/// Element-wise mean of correlation matrices (unit diagonal kept).
pub fn group_average(cs: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    let first = cs
        .first()
        .ok_or_else(|| ConnectomeError::ShapeMismatch("no matrices to average".into()))?;
    check_same_size(cs)?;
    let k = cs.len() as f64;
    let upper = (0..first.upper.len())
        .map(|e| cs.iter().map(|c| c.upper[e]).sum::<f64>() / k)
        .collect();
    Ok(CorrelationMatrix {
        size: first.size,
        upper,
    })
}

/// Mean in Fisher z space: `tanh(mean(atanh(r)))`.
pub fn group_average_fisher_z(cs: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    let first = cs
        .first()
        .ok_or_else(|| ConnectomeError::ShapeMismatch("no matrices to average".into()))?;
    check_same_size(cs)?;
    let k = cs.len() as f64;
    let bound = 1.0 - 1e-15;
    let upper = (0..first.upper.len())
        .map(|e| {
            let z: f64 = cs.iter().map(|c| c.upper[e].clamp(-bound, bound).atanh()).sum();
            (z / k).tanh()
        })
        .collect();
    Ok(CorrelationMatrix {
        size: first.size,
        upper,
    })
}

fn check_same_size(cs: &[CorrelationMatrix]) -> Result<()> {
    let size = cs[0].size;
    match cs.iter().position(|c| c.size != size) {
        Some(i) => Err(ConnectomeError::ShapeMismatch(format!(
            "matrix {i} is {0}x{0}, expected {size}x{size}",
            cs[i].size
        ))),
        None => Ok(()),
    }
}

/// Per-time-point (or per-stimulus) ratings on `[0, max_rating]` for each
/// emotion category.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionRatings {
    categories: Vec<String>,
    max_rating: f64,
    values: Vec<f64>,
}

impl EmotionRatings {
    pub fn new(categories: Vec<String>, rows: Vec<Vec<f64>>, max_rating: f64) -> Result<Self> {
        if categories.is_empty() {
            return Err(ConnectomeError::ShapeMismatch("no rating categories".into()));
        }
        if !(max_rating > 0.0 && max_rating.is_finite()) {
            return Err(ConnectomeError::InvalidValue(format!("max rating {max_rating}")));
        }
        let c = categories.len();
        let mut values = Vec::with_capacity(rows.len() * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(ConnectomeError::ShapeMismatch(format!(
                    "rating row {i} has {} values, expected {c}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|&y| !(0.0..=max_rating).contains(&y)) {
                return Err(ConnectomeError::InvalidValue(format!(
                    "rating row {i}, category `{}`: {} outside [0, {max_rating}]",
                    categories[j], row[j]
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(EmotionRatings {
            categories,
            max_rating,
            values,
        })
    }

    pub fn load(path: &Path, max_rating: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| ConnectomeError::io(path, e))?;
        Self::from_csv(file, max_rating)
    }

    pub fn from_csv<R: Read>(reader: R, max_rating: f64) -> Result<Self> {
        let (names, rows) = read_numeric_csv(reader)?;
        Self::new(names, rows, max_rating)
    }

    pub fn to_csv(&self) -> String {
        write_numeric_csv(&self.categories, (0..self.len()).map(|i| self.row(i)))
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn max_rating(&self) -> f64 {
        self.max_rating
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.category_count();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn category(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.category_count()).copied()
    }
}

/// Linear-interpolation quantile of `values` (the usual "type 7" rule).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Indices of the rows whose rating for `category` is at least the
/// `quantile`-th quantile of that category's ratings.
pub fn epoch_rows(ratings: &EmotionRatings, category: usize, q: f64) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ConnectomeError::InvalidQuantile(q));
    }
    if category >= ratings.category_count() {
        return Err(ConnectomeError::ShapeMismatch(format!(
            "category {category} out of range for {} categories",
            ratings.category_count()
        )));
    }
    let col: Vec<f64> = ratings.category(category).collect();
    if col.is_empty() || col.iter().all(|&y| y == col[0]) {
        return Err(ConnectomeError::DegenerateRatings(
            ratings.categories()[category].clone(),
        ));
    }
    let threshold = quantile(&col, q);
    Ok(col
        .iter()
        .enumerate()
        .filter(|(_, &y)| y >= threshold)
        .map(|(t, _)| t)
        .collect())
}

/// Keeps the time points that are representative of one emotion category.
pub fn select_emotion_epochs(
    ts: &TimeSeriesMatrix,
    ratings: &EmotionRatings,
    category: usize,
    q: f64,
) -> Result<TimeSeriesMatrix> {
    if ratings.len() != ts.time_count() {
        return Err(ConnectomeError::ShapeMismatch(format!(
            "{} rating rows for {} time points",
            ratings.len(),
            ts.time_count()
        )));
    }
    let rows = epoch_rows(ratings, category, q)?;
    if rows.len() < 3 {
        return Err(ConnectomeError::TooFewTimePoints(rows.len()));
    }
    ts.select_rows(&rows)
}
