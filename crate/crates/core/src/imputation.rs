//! Inverse-lookup imputation of a single missing input per row.
//!
//! Works on first-order models only: every selection matrix must be a
//! single basis column, so each component is a function of one variable.
//! For a row with variable `i` missing, the value the missing component
//! must have taken is the residual `y - sum_{j != i} f_j(x_j)`; the
//! component is then inverted through a lookup table tabulating `f_i` on
//! the uniform grid `I_j = j / s`, `j = 0..s-1`, over `[0, 1)` (the right
//! endpoint is not tabulated).
//!
//! Components need not be monotone, so inversion can hit several grid
//! points whose values are equally close to the residual. Every abscissa
//! within `delta` of the nearest match is kept as a candidate, ordered by
//! distance (ties by ascending abscissa), and the first candidate is the
//! default choice. Anchoring the threshold at the nearest match keeps the
//! candidate set non-empty for any `delta`, including 0.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::datasets::{Dataset, MissingCell};
use crate::error::{Error, Result};
use crate::hdmr::HdmrModel;

/// Uniform-grid tabulation of every component of a first-order model.
#[derive(Debug, Clone)]
pub struct InverseLookupTable {
    num_subintervals: usize,
    grid: Vec<f64>,
    /// Row `i` holds component `i` evaluated on the grid.
    values: DMatrix<f64>,
    /// Variable index each component (table row) depends on.
    variables: Vec<usize>,
}

/// Imputation threshold and grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationPolicy {
    pub delta: f64,
    pub num_subintervals: usize,
}

impl ImputationPolicy {
    pub fn new(delta: f64, num_subintervals: usize) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::input(format!(
                "policy: delta must be >= 0, got {delta}"
            )));
        }
        if num_subintervals == 0 {
            return Err(Error::input("policy: at least one subinterval is required"));
        }
        Ok(Self {
            delta,
            num_subintervals,
        })
    }
}

/// The inversion result for one residual target: every grid abscissa whose
/// component value is within `delta` of the best match, closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Dataset row this belongs to; `None` for standalone inversions.
    pub row: Option<usize>,
    pub variable_index: usize,
    pub target_value: f64,
    /// Non-empty; sorted by distance to the target, ties by abscissa.
    pub candidates: Vec<f64>,
    /// The first candidate.
    pub chosen: f64,
}

/// Everything produced by one imputation pass.
#[derive(Debug, Clone)]
pub struct ImputationOutcome {
    /// The dataset with every hole replaced by its chosen candidate.
    pub completed: Dataset,
    /// One entry per imputed cell, in row order.
    pub cells: Vec<CandidateSet>,
    /// Per-variable RMSE of chosen vs withheld values, present when ground
    /// truth was supplied.
    pub per_variable_rmse: Option<BTreeMap<usize, f64>>,
}

/// Maps each component of a first-order model to its variable index.
/// Errors if any selection matrix is not a single basis column or two
/// components share a variable.
fn first_order_variables(model: &HdmrModel) -> Result<Vec<usize>> {
    let mut vars = Vec::with_capacity(model.components().len());
    for (selection, _) in model.components() {
        let var = selection.basis_column().ok_or_else(|| {
            Error::input(format!(
                "imputation requires a first-order model; component '{}' is not a \
                 single basis column",
                selection.label()
            ))
        })?;
        if vars.contains(&var) {
            return Err(Error::input(format!(
                "imputation requires distinct variables per component; variable {} \
                 appears twice",
                var + 1
            )));
        }
        vars.push(var);
    }
    Ok(vars)
}

/// Tabulates every component of a first-order model on the uniform grid
/// `j / num_subintervals`.
pub fn build_lookup(model: &HdmrModel, num_subintervals: usize) -> Result<InverseLookupTable> {
    if num_subintervals == 0 {
        return Err(Error::input(
            "build_lookup: at least one subinterval is required",
        ));
    }
    let variables = first_order_variables(model)?;
    let grid: Vec<f64> = (0..num_subintervals)
        .map(|j| j as f64 / num_subintervals as f64)
        .collect();

    let n_comp = model.components().len();
    let mut values = DMatrix::zeros(n_comp, num_subintervals);
    let grid_col = DMatrix::from_fn(num_subintervals, 1, |j, _| grid[j]);
    for (i, (_, gpr)) in model.components().iter().enumerate() {
        let mean = gpr.predict_mean(&grid_col)?;
        values.set_row(i, &mean.transpose());
    }
    Ok(InverseLookupTable {
        num_subintervals,
        grid,
        values,
        variables,
    })
}

impl InverseLookupTable {
    pub fn num_subintervals(&self) -> usize {
        self.num_subintervals
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Tabulated values of the component for `variable_index`, in grid
    /// order.
    pub fn component_values(&self, variable_index: usize) -> Result<Vec<f64>> {
        let row = self.component_row(variable_index)?;
        Ok((0..self.num_subintervals)
            .map(|j| self.values[(row, j)])
            .collect())
    }

    fn component_row(&self, variable_index: usize) -> Result<usize> {
        self.variables
            .iter()
            .position(|&v| v == variable_index)
            .ok_or_else(|| {
                Error::input(format!(
                    "lookup table has no component for variable {}",
                    variable_index + 1
                ))
            })
    }

    /// Variables the table covers, in component order.
    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    /// The largest jump between adjacent tabulated values of one
    /// component: the table's own resolution in output space. A threshold
    /// below half this gap cannot keep steep regions of the component in
    /// the candidate set.
    pub fn max_adjacent_gap(&self, variable_index: usize) -> Result<f64> {
        let row = self.component_row(variable_index)?;
        let gap = (1..self.num_subintervals)
            .map(|j| (self.values[(row, j)] - self.values[(row, j - 1)]).abs())
            .fold(0.0f64, f64::max);
        Ok(gap)
    }

    #[cfg(test)]
    pub(crate) fn from_raw(grid: Vec<f64>, values: DMatrix<f64>, variables: Vec<usize>) -> Self {
        Self {
            num_subintervals: grid.len(),
            grid,
            values,
            variables,
        }
    }
}

/// Splits a row with exactly one missing entry into the index of the
/// missing variable and the residual target its component must match:
/// `y - sum_{j != i} f_j(x_j)`.
pub fn residual_target(model: &HdmrModel, x_row: &[f64], y: f64) -> Result<(usize, f64)> {
    if x_row.len() != model.input_dim() {
        return Err(Error::input(format!(
            "residual_target: row has {} entries but the model expects {}",
            x_row.len(),
            model.input_dim()
        )));
    }
    if !y.is_finite() {
        return Err(Error::input(
            "residual_target: target value is missing or non-finite",
        ));
    }
    let holes: Vec<usize> = (0..x_row.len()).filter(|&i| x_row[i].is_nan()).collect();
    let missing = match holes.as_slice() {
        [one] => *one,
        [] => return Err(Error::input("residual_target: row has no missing entry")),
        _ => {
            return Err(Error::input(format!(
                "residual_target: row has {} missing entries, exactly one is supported",
                holes.len()
            )))
        }
    };

    let variables = first_order_variables(model)?;
    let mut target = y;
    for (i, (_, gpr)) in model.components().iter().enumerate() {
        let var = variables[i];
        if var == missing {
            continue;
        }
        let point = DMatrix::from_row_slice(1, 1, &[x_row[var]]);
        target -= gpr.predict_mean(&point)?[0];
    }
    Ok((missing, target))
}

/// Inverts the tabulated component for `variable_index` against a target
/// value. The candidate set holds every abscissa whose value lies within
/// `policy.delta` of the best match.
pub fn invert(
    table: &InverseLookupTable,
    variable_index: usize,
    target_value: f64,
    policy: &ImputationPolicy,
) -> Result<CandidateSet> {
    let row = table.component_row(variable_index)?;
    let mut scored: Vec<(f64, f64)> = table
        .grid
        .iter()
        .enumerate()
        .map(|(j, &absc)| ((table.values[(row, j)] - target_value).abs(), absc))
        .collect();
    let d_min = scored.iter().map(|&(d, _)| d).fold(f64::INFINITY, f64::min);
    scored.retain(|&(d, _)| d <= d_min + policy.delta);
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let candidates: Vec<f64> = scored.into_iter().map(|(_, absc)| absc).collect();
    let chosen = candidates[0];
    Ok(CandidateSet {
        row: None,
        variable_index,
        target_value,
        candidates,
        chosen,
    })
}

/// Imputes every incomplete row of `data` through a trained first-order
/// model. Rows must be complete or have exactly one hole; offenders are
/// reported together. When `truth` is given (evaluation mode), the outcome
/// carries the per-variable RMSE of the chosen values against it.
pub fn impute_dataset(
    model: &HdmrModel,
    data: &Dataset,
    policy: &ImputationPolicy,
    truth: Option<&[MissingCell]>,
) -> Result<ImputationOutcome> {
    if data.dim() != model.input_dim() {
        return Err(Error::input(format!(
            "impute: data have {} columns but the model expects {}",
            data.dim(),
            model.input_dim()
        )));
    }
    let offenders: Vec<usize> = (0..data.n_rows())
        .filter(|&r| data.missing_in_row(r).len() > 1)
        .collect();
    if !offenders.is_empty() {
        return Err(Error::input(format!(
            "impute: rows with more than one missing entry are not supported: rows {:?}",
            offenders
        )));
    }

    let table = build_lookup(model, policy.num_subintervals)?;
    let mut x = data.x().clone();
    let mut cells = Vec::new();
    for r in 0..data.n_rows() {
        let holes = data.missing_in_row(r);
        if holes.is_empty() {
            continue;
        }
        let row_values: Vec<f64> = (0..data.dim()).map(|c| data.x()[(r, c)]).collect();
        let (var, target) = residual_target(model, &row_values, data.y()[r])?;
        let mut cell = invert(&table, var, target, policy)?;
        cell.row = Some(r);
        x[(r, var)] = cell.chosen;
        cells.push(cell);
    }

    let per_variable_rmse = match truth {
        None => None,
        Some(record) => {
            let lookup: BTreeMap<(usize, usize), f64> =
                record.iter().map(|c| ((c.row, c.col), c.value)).collect();
            let mut sq_sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for cell in &cells {
                let key = (cell.row.unwrap(), cell.variable_index);
                let true_value = lookup.get(&key).ok_or_else(|| {
                    Error::input(format!(
                        "impute: ground truth does not cover row {} column {}",
                        key.0,
                        key.1 + 1
                    ))
                })?;
                let entry = sq_sums.entry(cell.variable_index).or_insert((0.0, 0));
                entry.0 += (cell.chosen - true_value) * (cell.chosen - true_value);
                entry.1 += 1;
            }
            Some(
                sq_sums
                    .into_iter()
                    .map(|(var, (sum, count))| (var, (sum / count as f64).sqrt()))
                    .collect(),
            )
        }
    };

    let completed = data.with_x(x)?;
    Ok(ImputationOutcome {
        completed,
        cells,
        per_variable_rmse,
    })
}

/// Writes one record per imputed cell: row index, column name, chosen
/// value, the full ordered candidate list (`|`-separated) and the residual
/// target.
pub fn save_report(
    cells: &[CandidateSet],
    feature_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["row", "column", "chosen", "candidates", "target"])
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    for cell in cells {
        let row = cell
            .row
            .ok_or_else(|| Error::input("imputation report requires row indices on every cell"))?;
        let name = feature_names.get(cell.variable_index).ok_or_else(|| {
            Error::input(format!(
                "report: column index {} out of range",
                cell.variable_index
            ))
        })?;
        let cand = cell
            .candidates
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join("|");
        writer
            .write_record([
                row.to_string(),
                name.clone(),
                format!("{}", cell.chosen),
                cand,
                format!("{}", cell.target_value),
            ])
            .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads an imputation report back, resolving column names.
pub fn load_report(path: impl AsRef<Path>, feature_names: &[String]) -> Result<Vec<CandidateSet>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let bad = |what: &str| Error::parse(format!("{}: row {row_no}: {what}", path.display()));
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        if record.len() != 5 {
            return Err(bad(&format!("has {} fields, expected 5", record.len())));
        }
        let row: usize = record[0].trim().parse().map_err(|_| bad("bad row index"))?;
        let name = record[1].trim();
        let variable_index = feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| bad(&format!("unknown column '{name}'")))?;
        let chosen: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| bad("bad chosen value"))?;
        let candidates = record[3]
            .split('|')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("bad candidate value"))
            })
            .collect::<Result<Vec<f64>>>()?;
        let target_value: f64 = record[4]
            .trim()
            .parse()
            .map_err(|_| bad("bad target value"))?;
        if candidates.is_empty() {
            return Err(bad("empty candidate list"));
        }
        cells.push(CandidateSet {
            row: Some(row),
            variable_index,
            target_value,
            candidates,
            chosen,
        });
    }
    Ok(cells)
}
