//! Synthetic dataset generators, min-max scaling, missing-value injection
//! and CSV ingestion.
//!
//! All randomness flows through `ChaCha8Rng::seed_from_u64`, a fixed,
//! portable generator: the same seed yields bitwise-identical datasets on
//! every platform and build. Generated targets are divided by their
//! theoretical maximum (not the empirical one) so error metrics are
//! comparable across seeds.
//!
//! The in-memory missing marker is `f64::NAN`; on disk it is an empty CSV
//! field or the literal `nan` (case-insensitive). Targets may never be
//! missing.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column linear maps used to scale features and target to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    feature_ranges: Vec<(f64, f64)>,
    target_range: (f64, f64),
}

/// Addresses one column of a dataset for scaling purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Feature(usize),
    Target,
}

impl Scaler {
    pub fn new(feature_ranges: Vec<(f64, f64)>, target_range: (f64, f64)) -> Result<Self> {
        let valid = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && hi > lo;
        for (i, &(lo, hi)) in feature_ranges.iter().enumerate() {
            if !valid(lo, hi) {
                return Err(Error::input(format!(
                    "scaler: feature column {} has empty range [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        if !valid(target_range.0, target_range.1) {
            return Err(Error::input(format!(
                "scaler: target range [{}, {}] is empty",
                target_range.0, target_range.1
            )));
        }
        Ok(Self {
            feature_ranges,
            target_range,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_ranges.len()
    }

    fn range(&self, column: Column) -> Result<(f64, f64)> {
        match column {
            Column::Feature(i) => self.feature_ranges.get(i).copied().ok_or_else(|| {
                Error::input(format!(
                    "scaler: no feature column {} (dim {})",
                    i + 1,
                    self.dim()
                ))
            }),
            Column::Target => Ok(self.target_range),
        }
    }

    /// `(v - min) / (max - min)`.
    pub fn scale_value(&self, column: Column, v: f64) -> Result<f64> {
        let (lo, hi) = self.range(column)?;
        Ok((v - lo) / (hi - lo))
    }

    /// Inverse of [`Scaler::scale_value`].
    pub fn unscale_value(&self, column: Column, v: f64) -> Result<f64> {
        let (lo, hi) = self.range(column)?;
        Ok(v * (hi - lo) + lo)
    }

    pub fn unscale(&self, column: Column, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .map(|&v| self.unscale_value(column, v))
            .collect()
    }

    /// Width of a column's range; multiplies scaled-unit errors back to raw
    /// units.
    pub fn span(&self, column: Column) -> Result<f64> {
        let (lo, hi) = self.range(column)?;
        Ok(hi - lo)
    }
}

/// An input matrix with optional missing entries, a fully-known target
/// vector and optional scaling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    x: DMatrix<f64>,
    y: DVector<f64>,
    scaler: Option<Scaler>,
}

/// One withheld cell of an injected-missing protocol: where the hole is and
/// what the true value was.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        target_name: String,
        x: DMatrix<f64>,
        y: DVector<f64>,
        scaler: Option<Scaler>,
    ) -> Result<Self> {
        if x.ncols() == 0 || x.nrows() == 0 {
            return Err(Error::input(
                "dataset must have at least one row and one feature",
            ));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::input(format!(
                "dataset: {} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::input(format!(
                "dataset: {} rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("dataset: targets must be known and finite"));
        }
        if x.iter().any(|v| v.is_infinite()) {
            return Err(Error::input("dataset: features must be finite or missing"));
        }
        if let Some(s) = &scaler {
            if s.dim() != x.ncols() {
                return Err(Error::input(format!(
                    "dataset: scaler covers {} columns but data have {}",
                    s.dim(),
                    x.ncols()
                )));
            }
            if x.iter().any(|v| !v.is_nan() && !(0.0..=1.0).contains(v)) {
                return Err(Error::input(
                    "dataset: scaled feature entries must lie in [0, 1]",
                ));
            }
        }
        Ok(Self {
            feature_names,
            target_name,
            x,
            y,
            scaler,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    /// Column indices of the missing entries in one row.
    pub fn missing_in_row(&self, row: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&c| self.x[(row, c)].is_nan())
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        !self.x.iter().any(|v| v.is_nan())
    }

    /// A new dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(Error::input(format!(
                "subset: row {bad} out of bounds ({} rows)",
                self.n_rows()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.x[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        Dataset::new(
            self.feature_names.clone(),
            self.target_name.clone(),
            x,
            y,
            self.scaler.clone(),
        )
    }

    /// Replaces the feature matrix, keeping names, targets and scaler.
    pub(crate) fn with_x(&self, x: DMatrix<f64>) -> Result<Dataset> {
        Dataset::new(
            self.feature_names.clone(),
            self.target_name.clone(),
            x,
            self.y.clone(),
            self.scaler.clone(),
        )
    }
}

fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn uniform_features(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, dim);
    for r in 0..n {
        for c in 0..dim {
            x[(r, c)] = rng.gen::<f64>();
        }
    }
    x
}

fn assemble(x: DMatrix<f64>, raw: impl Fn(&[f64]) -> f64, y_max: f64) -> Result<Dataset> {
    let dim = x.ncols();
    let y = DVector::from_fn(x.nrows(), |r, _| {
        let row: Vec<f64> = (0..dim).map(|c| x[(r, c)]).collect();
        raw(&row) / y_max
    });
    let scaler = Scaler::new(vec![(0.0, 1.0); dim], (0.0, y_max))?;
    Dataset::new(default_names(dim), "y".to_string(), x, y, Some(scaler))
}

/// `f(x) = x_1 + ... + x_d` on uniform inputs, target scaled by `d`.
pub fn gen_additive(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || dim == 0 {
        return Err(Error::input("gen_additive: n and dim must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_features(&mut rng, n, dim);
    assemble(x, |row| row.iter().sum(), dim as f64)
}

/// `f(x, y, z) = x^3 + y + z^5`, target scaled by 3.
pub fn gen_power(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("gen_power: n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_features(&mut rng, n, 3);
    assemble(x, |r| r[0].powi(3) + r[1] + r[2].powi(5), 3.0)
}

/// `f(x, y, z) = x + 0.2xy + y + z`, target scaled by 3.2.
pub fn gen_coupled(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("gen_coupled: n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_features(&mut rng, n, 3);
    assemble(x, |r| r[0] + 0.2 * r[0] * r[1] + r[1] + r[2], 3.2)
}

/// The quartic factor `g(x) = 0.5((3.5(x-0.5))^4 - (5.5(x-0.5))^2 + 1.6)`,
/// quadruple-valued under inversion on `[0, 1]`.
pub fn quartic_g(x: f64) -> f64 {
    let t = x - 0.5;
    0.5 * ((3.5 * t).powi(4) - (5.5 * t).powi(2) + 1.6)
}

/// Maximum of `g` on `[0, 1]`, attained at both endpoints.
const QUARTIC_G_MAX: f64 = 1.708203125;

/// `f(x, y, z) = g(x) + y + z` with the quartic `g`, target scaled by its
/// analytic maximum `g(0) + 2`.
pub fn gen_quartic(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("gen_quartic: n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_features(&mut rng, n, 3);
    assemble(x, |r| quartic_g(r[0]) + r[1] + r[2], QUARTIC_G_MAX + 2.0)
}

/// Additive 3-d target over an uneven input distribution: `n_normal` rows
/// sampled per-column from `Normal(0.1, 0.01)` clipped to `[0, 1)`, followed
/// by `n_uniform` uniform rows.
pub fn gen_uneven(n_normal: usize, n_uniform: usize, seed: u64) -> Result<Dataset> {
    let n = n_normal + n_uniform;
    if n == 0 {
        return Err(Error::input("gen_uneven: at least one row is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.1, 0.01).expect("valid normal");
    let mut x = DMatrix::zeros(n, 3);
    for r in 0..n_normal {
        for c in 0..3 {
            // clipping is vanishingly rare at mu=0.1, sigma=0.01
            let v: f64 = normal.sample(&mut rng);
            x[(r, c)] = v.clamp(0.0, 1.0 - f64::EPSILON);
        }
    }
    for r in n_normal..n {
        for c in 0..3 {
            x[(r, c)] = rng.gen::<f64>();
        }
    }
    assemble(x, |row| row.iter().sum(), 3.0)
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma` to the
/// target. `sigma = 0` returns the data unchanged.
pub fn add_noise(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::input(format!(
            "add_noise: sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid normal");
    let y = DVector::from_fn(data.n_rows(), |i, _| data.y[i] + normal.sample(&mut rng));
    Dataset::new(
        data.feature_names.clone(),
        data.target_name.clone(),
        data.x.clone(),
        y,
        data.scaler.clone(),
    )
}

/// Blanks `per_column_count` entries in every column, at most one per row,
/// and returns the withheld true values. Rows are drawn without replacement
/// from the complete rows of `data`.
pub fn inject_missing(
    data: &Dataset,
    per_column_count: usize,
    seed: u64,
) -> Result<(Dataset, Vec<MissingCell>)> {
    if per_column_count == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    let dim = data.dim();
    let holes = per_column_count
        .checked_mul(dim)
        .ok_or_else(|| Error::input("inject_missing: hole count overflows"))?;
    let complete: Vec<usize> = (0..data.n_rows())
        .filter(|&r| data.missing_in_row(r).is_empty())
        .collect();
    if holes > complete.len() {
        return Err(Error::input(format!(
            "inject_missing: need {holes} complete rows for {per_column_count} holes \
             per column over {dim} columns, but only {} are available",
            complete.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, complete.len(), holes);

    let mut x = data.x.clone();
    let mut record = Vec::with_capacity(holes);
    for (k, pick) in picked.iter().enumerate() {
        let row = complete[pick];
        let col = k / per_column_count;
        record.push(MissingCell {
            row,
            col,
            value: x[(row, col)],
        });
        x[(row, col)] = f64::NAN;
    }
    let holed = Dataset::new(
        data.feature_names.clone(),
        data.target_name.clone(),
        x,
        data.y.clone(),
        data.scaler.clone(),
    )?;
    Ok((holed, record))
}

/// Blanks `count` entries in one column, at most one per complete row, and
/// returns the withheld values. Used when only one variable's imputation is
/// under study.
pub fn inject_missing_in_column(
    data: &Dataset,
    col: usize,
    count: usize,
    seed: u64,
) -> Result<(Dataset, Vec<MissingCell>)> {
    if col >= data.dim() {
        return Err(Error::input(format!(
            "inject_missing_in_column: column {col} out of range ({} columns)",
            data.dim()
        )));
    }
    if count == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    let complete: Vec<usize> = (0..data.n_rows())
        .filter(|&r| data.missing_in_row(r).is_empty())
        .collect();
    if count > complete.len() {
        return Err(Error::input(format!(
            "inject_missing_in_column: {count} holes requested but only {} complete rows",
            complete.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, complete.len(), count);
    let mut x = data.x().clone();
    let mut record = Vec::with_capacity(count);
    for pick in picked.iter() {
        let row = complete[pick];
        record.push(MissingCell {
            row,
            col,
            value: x[(row, col)],
        });
        x[(row, col)] = f64::NAN;
    }
    Ok((data.with_x(x)?, record))
}

/// Draws `count` distinct row indices without replacement, seeded.
pub fn sample_rows(n_rows: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n_rows {
        return Err(Error::input(format!(
            "sample_rows: cannot draw {count} rows from {n_rows}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n_rows, count).into_vec())
}

/// Applies an existing scaler (typically the one a model was trained with)
/// to raw data. Errors if any entry falls outside the scaler's ranges.
pub fn apply_scaler(data: &Dataset, scaler: &Scaler) -> Result<Dataset> {
    if scaler.dim() != data.dim() {
        return Err(Error::input(format!(
            "apply_scaler: scaler covers {} columns but data have {}",
            scaler.dim(),
            data.dim()
        )));
    }
    let x = DMatrix::from_fn(data.n_rows(), data.dim(), |r, c| {
        let v = data.x[(r, c)];
        if v.is_nan() {
            v
        } else {
            scaler.scale_value(Column::Feature(c), v).unwrap()
        }
    });
    let y = DVector::from_fn(data.n_rows(), |r, _| {
        scaler.scale_value(Column::Target, data.y[r]).unwrap()
    });
    Dataset::new(
        data.feature_names.clone(),
        data.target_name.clone(),
        x,
        y,
        Some(scaler.clone()),
    )
}

/// Rescales every column (features and target) to `[0, 1]` by its observed
/// range, skipping missing entries. Constant columns are rejected.
pub fn minmax_scale(data: &Dataset) -> Result<(Dataset, Scaler)> {
    let mut feature_ranges = Vec::with_capacity(data.dim());
    for c in 0..data.dim() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..data.n_rows() {
            let v = data.x[(r, c)];
            if v.is_nan() {
                continue;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Err(Error::input(format!(
                "minmax_scale: column '{}' has no known values",
                data.feature_names[c]
            )));
        }
        if hi <= lo {
            return Err(Error::input(format!(
                "minmax_scale: column '{}' is constant at {lo}",
                data.feature_names[c]
            )));
        }
        feature_ranges.push((lo, hi));
    }
    let y_lo = data.y.min();
    let y_hi = data.y.max();
    if y_hi <= y_lo {
        return Err(Error::input(format!(
            "minmax_scale: target '{}' is constant at {y_lo}",
            data.target_name
        )));
    }
    let scaler = Scaler::new(feature_ranges, (y_lo, y_hi))?;

    let x = DMatrix::from_fn(data.n_rows(), data.dim(), |r, c| {
        let v = data.x[(r, c)];
        if v.is_nan() {
            v
        } else {
            scaler.scale_value(Column::Feature(c), v).unwrap()
        }
    });
    let y = DVector::from_fn(data.n_rows(), |r, _| {
        scaler.scale_value(Column::Target, data.y[r]).unwrap()
    });
    let scaled = Dataset::new(
        data.feature_names.clone(),
        data.target_name.clone(),
        x,
        y,
        Some(scaler.clone()),
    )?;
    Ok((scaled, scaler))
}

fn is_missing_token(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("nan")
}

/// Loads a comma-delimited file: mandatory header row, feature columns
/// first, target in the last column. Empty fields and `nan` are missing
/// markers; the target column must be fully known.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let loc = |row: usize, col: usize| format!("{}:{}:{}", path.display(), row, col);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::parse(format!(
            "{}: need at least one feature column and a target column",
            path.display()
        )));
    }
    let dim = headers.len() - 1;
    let feature_names: Vec<String> = headers.iter().take(dim).map(str::to_string).collect();
    let target_name = headers[dim].to_string();

    let mut values: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(Error::parse(format!(
                "{}: row {row_no} has {} fields, expected {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let is_target = c == dim;
            if is_missing_token(field) {
                if is_target {
                    return Err(Error::parse(format!(
                        "{}: missing target value",
                        loc(row_no, c + 1)
                    )));
                }
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(format!(
                    "{}: cannot parse '{field}' as a number",
                    loc(row_no, c + 1)
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(format!(
                    "{}: non-finite value '{field}'",
                    loc(row_no, c + 1)
                )));
            }
            if is_target {
                targets.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::parse(format!("{}: no data rows", path.display())));
    }
    let x = DMatrix::from_row_slice(n, dim, &values);
    Dataset::new(
        feature_names,
        target_name,
        x,
        DVector::from_vec(targets),
        None,
    )
}

/// Writes the dataset in the dialect [`load_csv`] reads. Numbers are
/// printed with shortest round-trip formatting, so a save/load cycle
/// reproduces every value exactly; missing entries become empty fields.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(data.target_name.as_str());
    writer
        .write_record(&header)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;

    let mut field = String::new();
    for r in 0..data.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(data.dim() + 1);
        for c in 0..data.dim() {
            let v = data.x[(r, c)];
            field.clear();
            if !v.is_nan() {
                write!(field, "{v}").unwrap();
            }
            record.push(field.clone());
        }
        record.push(format!("{}", data.y[r]));
        writer
            .write_record(&record)
            .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes an injected-missing ground-truth record: `row,column,true_value`
/// with the column given by name.
pub fn save_ground_truth(
    cells: &[MissingCell],
    feature_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["row", "column", "true_value"])
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    for cell in cells {
        let name = feature_names.get(cell.col).ok_or_else(|| {
            Error::input(format!(
                "ground truth: column index {} out of range",
                cell.col
            ))
        })?;
        writer
            .write_record([
                cell.row.to_string(),
                name.clone(),
                format!("{}", cell.value),
            ])
            .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a ground-truth record back, resolving column names against
/// `feature_names`.
pub fn load_ground_truth(
    path: impl AsRef<Path>,
    feature_names: &[String],
) -> Result<Vec<MissingCell>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(Error::parse(format!(
                "{}: row {row_no} has {} fields, expected 3",
                path.display(),
                record.len()
            )));
        }
        let row: usize = record[0].trim().parse().map_err(|_| {
            Error::parse(format!(
                "{}: row {row_no}: bad row index '{}'",
                path.display(),
                &record[0]
            ))
        })?;
        let name = record[1].trim();
        let col = feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::parse(format!(
                    "{}: row {row_no}: unknown column '{name}'",
                    path.display()
                ))
            })?;
        let value: f64 = record[2].trim().parse().map_err(|_| {
            Error::parse(format!(
                "{}: row {row_no}: bad value '{}'",
                path.display(),
                &record[2]
            ))
        })?;
        cells.push(MissingCell { row, col, value });
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_additive(50, 3, 42).unwrap();
        let b = gen_additive(50, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_additive(50, 3, 43).unwrap();
        assert_ne!(a.x(), c.x());
    }

    #[test]
    fn additive_targets_and_ranges() {
        let d = gen_additive(500, 3, 1).unwrap();
        for r in 0..d.n_rows() {
            let sum: f64 = (0..3).map(|c| d.x()[(r, c)]).sum();
            assert_relative_eq!(d.y()[r], sum / 3.0, max_relative = 1e-14);
            for c in 0..3 {
                let v = d.x()[(r, c)];
                assert!((0.0..1.0).contains(&v));
            }
            assert!((0.0..=1.0).contains(&d.y()[r]));
        }
        assert_eq!(d.scaler().unwrap().span(Column::Target).unwrap(), 3.0);

        let wide = gen_additive(10, 15, 2).unwrap();
        assert_eq!(wide.dim(), 15);
        assert!(gen_additive(0, 3, 1).is_err());
        assert!(gen_additive(3, 0, 1).is_err());

        // theoretical-max scaling has no degenerate case: a single point
        // still lands in [0, 1]
        let tiny = gen_additive(1, 1, 1).unwrap();
        assert!((0.0..=1.0).contains(&tiny.y()[0]));
    }

    #[test]
    fn power_function_values() {
        // f(0,0,0) = 0 and f(1,1,1) = 3 at the corners of the raw cube
        let f = |x: f64, y: f64, z: f64| x.powi(3) + y + z.powi(5);
        assert_eq!(f(0.0, 0.0, 0.0), 0.0);
        assert_eq!(f(1.0, 1.0, 1.0), 3.0);
        let d = gen_power(200, 9).unwrap();
        for r in 0..d.n_rows() {
            let expect = f(d.x()[(r, 0)], d.x()[(r, 1)], d.x()[(r, 2)]) / 3.0;
            assert_relative_eq!(d.y()[r], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn coupled_function_values() {
        let f = |x: f64, y: f64, z: f64| x + 0.2 * x * y + y + z;
        assert_eq!(f(0.0, 0.4, 0.6), 1.0); // coupling vanishes at x = 0
        assert_relative_eq!(f(1.0, 1.0, 0.0), 2.2, max_relative = 1e-15);
        let d = gen_coupled(200, 9).unwrap();
        for r in 0..d.n_rows() {
            let expect = f(d.x()[(r, 0)], d.x()[(r, 1)], d.x()[(r, 2)]) / 3.2;
            assert_relative_eq!(d.y()[r], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn quartic_shape() {
        assert_relative_eq!(quartic_g(0.5), 0.8, max_relative = 1e-15);
        for t in [0.1, 0.25, 0.4] {
            assert_relative_eq!(quartic_g(0.5 + t), quartic_g(0.5 - t), max_relative = 1e-12);
        }
        // the analytic maximum sits at the endpoints
        assert_relative_eq!(quartic_g(0.0), QUARTIC_G_MAX, max_relative = 1e-15);
        assert_relative_eq!(quartic_g(1.0), QUARTIC_G_MAX, max_relative = 1e-15);
        let d = gen_quartic(300, 4).unwrap();
        assert!(d.y().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn uneven_mixture_statistics() {
        let d = gen_uneven(10_000, 5_000, 5).unwrap();
        assert_eq!(d.n_rows(), 15_000);
        let mean: f64 = (0..10_000).map(|r| d.x()[(r, 0)]).sum::<f64>() / 10_000.0;
        assert!((mean - 0.1).abs() < 0.001, "normal block mean {mean}");
        // uniform block spreads over [0, 1)
        let umax = (10_000..15_000)
            .map(|r| d.x()[(r, 0)])
            .fold(0.0f64, f64::max);
        assert!(umax > 0.9);

        let pure = gen_uneven(0, 100, 7).unwrap();
        assert_eq!(pure.n_rows(), 100);
    }

    #[test]
    fn noise_statistics_and_identity() {
        let d = gen_additive(10_000, 3, 11).unwrap();
        let same = add_noise(&d, 0.0, 99).unwrap();
        assert_eq!(d, same);

        let noisy = add_noise(&d, 0.05, 99).unwrap();
        assert_eq!(noisy.x(), d.x());
        let diffs: Vec<f64> = (0..d.n_rows()).map(|r| noisy.y()[r] - d.y()[r]).collect();
        let mean: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var: f64 =
            diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / diffs.len() as f64;
        let sd = var.sqrt();
        assert!((sd - 0.05).abs() / 0.05 < 0.05, "sample std {sd}");
        assert!(add_noise(&d, -0.1, 0).is_err());
    }

    #[test]
    fn inject_missing_protocol() {
        let d = gen_additive(400, 3, 21).unwrap();
        let (holed, record) = inject_missing(&d, 100, 3).unwrap();
        assert_eq!(record.len(), 300);
        // each column exactly 100 holes, each row at most one
        for c in 0..3 {
            let holes = (0..400).filter(|&r| holed.x()[(r, c)].is_nan()).count();
            assert_eq!(holes, 100);
        }
        for r in 0..400 {
            assert!(holed.missing_in_row(r).len() <= 1);
        }
        assert_eq!(holed.y(), d.y());
        // withheld values match the original data
        for cell in &record {
            assert_eq!(cell.value, d.x()[(cell.row, cell.col)]);
            assert!(holed.x()[(cell.row, cell.col)].is_nan());
        }

        let (same, empty) = inject_missing(&d, 0, 3).unwrap();
        assert_eq!(same, d);
        assert!(empty.is_empty());

        assert!(inject_missing(&d, 200, 3).is_err());
    }

    #[test]
    fn column_targeted_injection() {
        let d = gen_additive(300, 3, 23).unwrap();
        let (holed, record) = inject_missing_in_column(&d, 0, 40, 5).unwrap();
        assert_eq!(record.len(), 40);
        assert!(record.iter().all(|c| c.col == 0));
        let holes = (0..300).filter(|&r| holed.x()[(r, 0)].is_nan()).count();
        assert_eq!(holes, 40);
        assert!((0..300).all(|r| !holed.x()[(r, 1)].is_nan()));
        assert!(inject_missing_in_column(&d, 3, 1, 5).is_err());
        assert!(inject_missing_in_column(&d, 0, 301, 5).is_err());
    }

    #[test]
    fn row_sampling_is_seeded_and_distinct() {
        let a = sample_rows(100, 30, 9).unwrap();
        let b = sample_rows(100, 30, 9).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
        assert!(sample_rows(10, 11, 0).is_err());
    }

    #[test]
    fn scaler_reapplication_matches_original_scaling() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 5.0, 10.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0, 2.0]);
        let raw = Dataset::new(vec!["a".into()], "y".into(), x, y, None).unwrap();
        let (scaled, scaler) = minmax_scale(&raw).unwrap();
        let reapplied = apply_scaler(&raw, &scaler).unwrap();
        assert_eq!(scaled, reapplied);

        // out-of-range data are rejected
        let x2 = DMatrix::from_row_slice(1, 1, &[11.0]);
        let y2 = DVector::from_column_slice(&[0.5]);
        let outside = Dataset::new(vec!["a".into()], "y".into(), x2, y2, None).unwrap();
        assert!(apply_scaler(&outside, &scaler).is_err());
    }

    #[test]
    fn minmax_scale_and_unscale_round_trip() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 3.0, 5.0, 4.0, 10.0, 5.0]);
        let y = DVector::from_column_slice(&[0.0, 10_000.0, 20_000.0]);
        let d = Dataset::new(vec!["a".into(), "b".into()], "e".into(), x, y, None).unwrap();
        let (scaled, scaler) = minmax_scale(&d).unwrap();
        assert_eq!(scaled.x().column(0).as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(scaled.y().as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(scaler.span(Column::Target).unwrap(), 20_000.0);

        for r in 0..3 {
            for c in 0..2 {
                let back = scaler
                    .unscale_value(Column::Feature(c), scaled.x()[(r, c)])
                    .unwrap();
                assert_relative_eq!(back, d.x()[(r, c)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn minmax_scale_rejects_constant_column() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 1.0, 4.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0]);
        let d = Dataset::new(vec!["a".into(), "b".into()], "y".into(), x, y, None).unwrap();
        let err = minmax_scale(&d).unwrap_err();
        assert!(err.to_string().contains("constant"), "{err}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut d = gen_additive(120, 3, 17).unwrap();
        let record;
        (d, record) = inject_missing(&d, 10, 1).unwrap();
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.feature_names(), d.feature_names());
        assert_eq!(back.y(), d.y());
        for r in 0..d.n_rows() {
            for c in 0..d.dim() {
                let (a, b) = (d.x()[(r, c)], back.x()[(r, c)]);
                assert!(a.is_nan() == b.is_nan());
                if !a.is_nan() {
                    assert_eq!(a, b, "row {r} col {c}");
                }
            }
        }

        let gt_path = dir.path().join("truth.csv");
        save_ground_truth(&record, d.feature_names(), &gt_path).unwrap();
        let cells = load_ground_truth(&gt_path, d.feature_names()).unwrap();
        assert_eq!(cells, record);
    }

    #[test]
    fn csv_missing_marker_equivalence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("markers.csv");
        std::fs::write(&path, "a,b,y\n0.5,,1.0\nNaN,0.25,2.0\nnan,0.5,3.0\n").unwrap();
        let d = load_csv(&path).unwrap();
        assert!(d.x()[(0, 1)].is_nan());
        assert!(d.x()[(1, 0)].is_nan());
        assert!(d.x()[(2, 0)].is_nan());
        assert_eq!(d.x()[(0, 0)], 0.5);
    }

    #[test]
    fn csv_errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "a,b,y\n1.0,2.0,3.0\n1.0,2.0\n").unwrap();
        assert!(load_csv(&ragged).is_err());

        let junk = dir.path().join("junk.csv");
        std::fs::write(&junk, "a,b,y\n1.0,oops,3.0\n").unwrap();
        let err = load_csv(&junk).unwrap_err();
        assert!(err.to_string().contains(":2:2"), "{err}");

        let holey_target = dir.path().join("holey.csv");
        std::fs::write(&holey_target, "a,b,y\n1.0,2.0,\n").unwrap();
        let err = load_csv(&holey_target).unwrap_err();
        assert!(err.to_string().contains("missing target"), "{err}");
    }

    #[test]
    fn scaling_preserves_extrema_positions() {
        let d = gen_coupled(200, 31).unwrap();
        let (scaled, _) = minmax_scale(&d).unwrap();
        for c in 0..d.dim() {
            let argmax_raw = (0..d.n_rows())
                .max_by(|&a, &b| d.x()[(a, c)].partial_cmp(&d.x()[(b, c)]).unwrap())
                .unwrap();
            let argmax_scaled = (0..d.n_rows())
                .max_by(|&a, &b| scaled.x()[(a, c)].partial_cmp(&scaled.x()[(b, c)]).unwrap())
                .unwrap();
            assert_eq!(argmax_raw, argmax_scaled);
        }
    }
}
