//! Selection matrices map the full feature matrix onto each component
//! function's input space via `X·A`. A basis column picks one variable, a
//! pair of basis columns picks two, and arbitrary entries form linear
//! combinations of variables. Builders generate the standard families in a
//! fixed order (variable index, then lexicographic tuples) so runs are
//! reproducible.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `D x d'` matrix selecting (or linearly combining) input variables for
/// one component function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    entries: DMatrix<f64>,
    label: String,
}

impl SelectionMatrix {
    /// Validates shape (`D >= 1`, `1 <= d' <= D`) and rejects all-zero
    /// columns; a component input that ignores every feature is malformed.
    pub fn new(entries: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        let (d, cols) = (entries.nrows(), entries.ncols());
        if d == 0 || cols == 0 {
            return Err(Error::input("selection matrix must be non-empty"));
        }
        if cols > d {
            return Err(Error::input(format!(
                "selection matrix has more columns ({cols}) than input dimensions ({d})"
            )));
        }
        for c in 0..cols {
            if entries.column(c).iter().all(|&v| v == 0.0) {
                return Err(Error::input(format!(
                    "selection matrix column {} is all zero",
                    c + 1
                )));
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("selection matrix contains non-finite entries"));
        }
        Ok(Self {
            entries,
            label: label.into(),
        })
    }

    /// Builds with a label derived from the columns, e.g. `x1|x2+x3`.
    pub fn with_auto_label(entries: DMatrix<f64>) -> Result<Self> {
        let label = describe_columns(&entries);
        Self::new(entries, label)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of input dimensions `D` this matrix expects.
    pub fn input_dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Dimensionality `d'` of the component input it produces.
    pub fn output_dim(&self) -> usize {
        self.entries.ncols()
    }

    /// If the matrix is a single standard basis column, returns the index
    /// of the variable it selects. First-order models are exactly those
    /// whose matrices all answer `Some`.
    pub fn basis_column(&self) -> Option<usize> {
        if self.entries.ncols() != 1 {
            return None;
        }
        let mut hit = None;
        for (i, &v) in self.entries.column(0).iter().enumerate() {
            if v == 1.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(i);
            } else if v != 0.0 {
                return None;
            }
        }
        hit
    }
}

/// `X · A`, the component inputs for one selection matrix.
pub fn project(x: &DMatrix<f64>, a: &SelectionMatrix) -> Result<DMatrix<f64>> {
    if x.ncols() != a.input_dim() {
        return Err(Error::input(format!(
            "project: data have {} columns but selection matrix '{}' expects {}",
            x.ncols(),
            a.label(),
            a.input_dim()
        )));
    }
    Ok(x * a.entries())
}

/// One basis-column matrix per variable: the first-order family.
pub fn one_d(dim: usize) -> Result<Vec<SelectionMatrix>> {
    if dim == 0 {
        return Err(Error::input("one_d: dimension must be at least 1"));
    }
    combination_family(dim, 1)
}

/// One two-column matrix per unordered variable pair, in lexicographic
/// order: the second-order family.
pub fn all_pairs(dim: usize) -> Result<Vec<SelectionMatrix>> {
    if dim < 2 {
        return Err(Error::input("all_pairs: dimension must be at least 2"));
    }
    combination_family(dim, 2)
}

/// Concatenation of the per-order families for every requested coupling
/// order (ascending), enabling simultaneous fits of mixed dimensionality.
pub fn mixed(dim: usize, orders: &[usize]) -> Result<Vec<SelectionMatrix>> {
    if dim == 0 {
        return Err(Error::input("mixed: dimension must be at least 1"));
    }
    if orders.is_empty() {
        return Err(Error::input(
            "mixed: at least one coupling order is required",
        ));
    }
    let mut sorted: Vec<usize> = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    for &order in &sorted {
        if order == 0 {
            return Err(Error::input("mixed: coupling order 0 is invalid"));
        }
        if order > dim {
            return Err(Error::input(format!(
                "mixed: coupling order {order} exceeds dimension {dim}"
            )));
        }
        out.extend(combination_family(dim, order)?);
    }
    Ok(out)
}

/// The full-dimensional special case: a single identity matrix.
pub fn full(dim: usize) -> Result<Vec<SelectionMatrix>> {
    if dim == 0 {
        return Err(Error::input("full: dimension must be at least 1"));
    }
    Ok(vec![SelectionMatrix::with_auto_label(DMatrix::identity(
        dim, dim,
    ))?])
}

fn combination_family(dim: usize, order: usize) -> Result<Vec<SelectionMatrix>> {
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..order).collect();
    loop {
        let mut entries = DMatrix::zeros(dim, order);
        for (col, &var) in combo.iter().enumerate() {
            entries[(var, col)] = 1.0;
        }
        out.push(SelectionMatrix::with_auto_label(entries)?);

        // advance to the next lexicographic combination of `order` of `dim`
        let mut i = order;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if combo[i] < dim - (order - i) {
                combo[i] += 1;
                for j in i + 1..order {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn describe_columns(entries: &DMatrix<f64>) -> String {
    let cols: Vec<String> = (0..entries.ncols())
        .map(|c| {
            let terms: Vec<String> = entries
                .column(c)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| {
                    if v == 1.0 {
                        format!("x{}", i + 1)
                    } else {
                        format!("{}*x{}", v, i + 1)
                    }
                })
                .collect();
            terms.join("+")
        })
        .collect();
    cols.join("|")
}

/// Parses a matrix specification: either a builder keyword
/// (`1d` | `2d` | `mixed:<o1>,<o2>,...` | `full`) or an explicit list of
/// matrices (`[[1,0],[0,1],[0,1]]; [[1,0],[1,0],[0,1]]`). Whitespace is
/// insignificant. `dim` is the declared input dimensionality every matrix
/// must match.
pub fn parse(text: &str, dim: usize) -> Result<Vec<SelectionMatrix>> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::parse("matrix specification is empty"));
    }
    match compact.as_str() {
        "1d" => return one_d(dim),
        "2d" => return all_pairs(dim),
        "full" => return full(dim),
        _ => {}
    }
    if let Some(rest) = compact.strip_prefix("mixed:") {
        let orders = rest
            .split(',')
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::parse(format!("mixed: bad coupling order '{tok}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        return mixed(dim, &orders);
    }
    if !compact.starts_with('[') {
        return Err(Error::parse(format!(
            "unrecognized matrix specification '{text}': expected 1d, 2d, mixed:<orders>, full, \
             or an explicit bracketed matrix list"
        )));
    }

    let mut out = Vec::new();
    for (idx, chunk) in compact.split(';').enumerate() {
        let n = idx + 1;
        if chunk.is_empty() {
            return Err(Error::parse(format!("matrix {n}: empty specification")));
        }
        let rows =
            parse_bracketed_rows(chunk).map_err(|e| Error::parse(format!("matrix {n}: {e}")))?;
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::parse(format!(
                "matrix {n}: rows have unequal lengths"
            )));
        }
        if rows.len() != dim {
            return Err(Error::parse(format!(
                "matrix {n}: has {} rows but the declared dimension is {dim}",
                rows.len()
            )));
        }
        let entries = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        let matrix = SelectionMatrix::with_auto_label(entries)
            .map_err(|e| Error::parse(format!("matrix {n}: {e}")))?;
        out.push(matrix);
    }
    Ok(out)
}

/// Parses `[[a,b],[c,d],...]` (whitespace already stripped) into rows.
fn parse_bracketed_rows(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| "expected outer brackets".to_string())?;
    let mut rows = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let body_end = rest
            .find(']')
            .ok_or_else(|| "unterminated row bracket".to_string())?;
        let row_src = rest
            .get(..body_end + 1)
            .and_then(|r| r.strip_prefix('['))
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| "expected '[' to open a row".to_string())?;
        let row = row_src
            .split(',')
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| format!("bad number '{tok}'"))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if row.is_empty() {
            return Err("empty row".to_string());
        }
        rows.push(row);
        rest = &rest[body_end + 1..];
        if let Some(tail) = rest.strip_prefix(',') {
            rest = tail;
        } else if !rest.is_empty() {
            return Err("expected ',' between rows".to_string());
        }
    }
    if rows.is_empty() {
        return Err("matrix has no rows".to_string());
    }
    Ok(rows)
}
