//! Site × site distance matrices, their TSV form, and the two
//! matrix-comparison statistics: Pearson's ρ over cells and Dietz's K_c.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix has {rows} rows of cells but {ids} site ids")]
    Shape { ids: usize, rows: usize },
    #[error("duplicate site id {0:?}")]
    DuplicateSite(String),
    #[error("cell ({row}, {col}) = {value} is not a finite nonnegative distance")]
    BadCell {
        row: String,
        col: String,
        value: f64,
    },
    #[error("diagonal cell for {site:?} is {value}, expected 0")]
    NonZeroDiagonal { site: String, value: f64 },
    #[error("cells ({a}, {b}) and ({b}, {a}) differ: {x} vs {y}")]
    Asymmetric {
        a: String,
        b: String,
        x: f64,
        y: f64,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("matrices are over different site lists")]
    MismatchedSites,
    #[error("need at least {needed} sites, found {found}")]
    TooFewSites { needed: usize, found: usize },
    #[error("off-diagonal cells of the {which} matrix have zero variance")]
    DegenerateVariance { which: &'static str },
    #[error("unknown site {0:?}")]
    UnknownSite(String),
}

/// Tolerance used by the TSV reader when checking symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    site_ids: Vec<String>,
    cells: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from the strict upper triangle produced by `cell(i, j)`
    /// for `i < j`; the lower triangle mirrors it and the diagonal is zero.
    pub fn from_fn<F>(site_ids: Vec<String>, mut cell: F) -> Result<Self, MatrixError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = site_ids.len();
        check_unique(&site_ids)?;
        let mut cells = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = cell(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(MatrixError::BadCell {
                        row: site_ids[i].clone(),
                        col: site_ids[j].clone(),
                        value: v,
                    });
                }
                cells[i * n + j] = v;
                cells[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { site_ids, cells })
    }

    /// Builds from full rows; rows must already be exactly symmetric with a
    /// zero diagonal.
    pub fn from_rows(site_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        Self::from_rows_with_tolerance(site_ids, rows, 0.0)
    }

    fn from_rows_with_tolerance(
        site_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        tol: f64,
    ) -> Result<Self, MatrixError> {
        let n = site_ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MatrixError::Shape {
                ids: n,
                rows: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(MatrixError::NonZeroDiagonal {
                    site: site_ids[i].clone(),
                    value: row[i],
                });
            }
            for j in i + 1..n {
                let (x, y) = (row[j], rows[j][i]);
                if (x - y).is_nan() || (x - y).abs() > tol {
                    return Err(MatrixError::Asymmetric {
                        a: site_ids[i].clone(),
                        b: site_ids[j].clone(),
                        x,
                        y,
                    });
                }
            }
        }
        Self::from_fn(site_ids, |i, j| rows[i][j])
    }

    pub fn len(&self) -> usize {
        self.site_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_ids.is_empty()
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.len() + j]
    }

    pub fn index_of(&self, site: &str) -> Option<usize> {
        self.site_ids.iter().position(|s| s == site)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.cells[i * n..(i + 1) * n]
    }

    /// Strict upper-triangle cells in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.row(i)[i + 1..]);
        }
        out
    }

    /// Applies `f` to every off-diagonal cell.
    pub fn map_off_diagonal<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self, MatrixError> {
        Self::from_fn(self.site_ids.clone(), |i, j| f(self.get(i, j)))
    }

    /// The same distances with sites reordered; `order[k]` is the old index
    /// of the new k-th site.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, MatrixError> {
        let ids = order.iter().map(|&k| self.site_ids[k].clone()).collect();
        Self::from_fn(ids, |i, j| self.get(order[i], order[j]))
    }

    /// The matrix restricted to `sites`, in the given order.
    pub fn submatrix(&self, sites: &[String]) -> Result<Self, MatrixError> {
        let order = sites
            .iter()
            .map(|s| {
                self.index_of(s)
                    .ok_or_else(|| MatrixError::UnknownSite(s.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.permuted(&order)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.site_ids.join("\t");
        out.push('\n');
        for (i, id) in self.site_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                write!(out, "\t{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, MatrixError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or(MatrixError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        })?;
        let ids: Vec<String> = header.split('\t').map(str::to_string).collect();
        if ids.iter().any(|s| s.is_empty()) {
            return Err(MatrixError::Parse {
                line: 1,
                message: "empty site id in header".into(),
            });
        }
        let mut rows = Vec::with_capacity(ids.len());
        for (line, text) in lines {
            if text.is_empty() {
                continue;
            }
            let mut fields = text.split('\t');
            let id = fields.next().unwrap_or_default();
            let expected = ids.get(rows.len()).ok_or_else(|| MatrixError::Parse {
                line,
                message: "more rows than header columns".into(),
            })?;
            if id != expected {
                return Err(MatrixError::Parse {
                    line,
                    message: format!("row label {id:?} does not match header column {expected:?}"),
                });
            }
            let row = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| MatrixError::Parse {
                        line,
                        message: format!("not a decimal value: {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != ids.len() {
                return Err(MatrixError::Parse {
                    line,
                    message: format!("expected {} cells, found {}", ids.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows_with_tolerance(ids, rows, SYMMETRY_TOLERANCE)
    }
}

fn check_unique(ids: &[String]) -> Result<(), MatrixError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MatrixError::DuplicateSite(id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixComparison {
    pub rho: f64,
    pub kc: f64,
    pub n_pairs: usize,
    pub n_triples: usize,
}

fn check_comparable(x: &DistanceMatrix, y: &DistanceMatrix) -> Result<(), MatrixError> {
    if x.site_ids != y.site_ids {
        return Err(MatrixError::MismatchedSites);
    }
    if x.len() < 3 {
        return Err(MatrixError::TooFewSites {
            needed: 3,
            found: x.len(),
        });
    }
    Ok(())
}

/// Pearson correlation over the strict upper-triangle cells.
pub fn pearson_rho(x: &DistanceMatrix, y: &DistanceMatrix) -> Result<f64, MatrixError> {
    check_comparable(x, y)?;
    let xs = x.upper_triangle();
    let ys = y.upper_triangle();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MatrixError::DegenerateVariance { which: "first" });
    }
    if syy == 0.0 {
        return Err(MatrixError::DegenerateVariance { which: "second" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Signed concordance total for anchor site `i` over all pairs `j < k`
/// distinct from `i`. Integer-valued, so summation order cannot matter.
fn kc_row(x: &DistanceMatrix, y: &DistanceMatrix, i: usize) -> i64 {
    let (xr, yr) = (x.row(i), y.row(i));
    let n = x.len();
    let mut total = 0i64;
    for j in 0..n {
        if j == i {
            continue;
        }
        for k in j + 1..n {
            if k == i {
                continue;
            }
            total += sign(xr[j] - xr[k]) * sign(yr[j] - yr[k]);
        }
    }
    total
}

/// Dietz's K_c: the mean over all anchors `i` and pairs `{j, k}` of
/// sign((X_ij − X_ik)(Y_ij − Y_ik)); ties contribute 0.
pub fn dietz_kc(x: &DistanceMatrix, y: &DistanceMatrix) -> Result<f64, MatrixError> {
    check_comparable(x, y)?;
    let total: i64 = (0..x.len()).into_par_iter().map(|i| kc_row(x, y, i)).sum();
    Ok(total as f64 / triple_count(x.len()) as f64)
}

fn triple_count(n: usize) -> usize {
    n * (n - 1) * (n - 2) / 2
}

pub fn compare(x: &DistanceMatrix, y: &DistanceMatrix) -> Result<MatrixComparison, MatrixError> {
    let rho = pearson_rho(x, y)?;
    let kc = dietz_kc(x, y)?;
    let n = x.len();
    Ok(MatrixComparison {
        rho,
        kc,
        n_pairs: n * (n - 1) / 2,
        n_triples: triple_count(n),
    })
}
