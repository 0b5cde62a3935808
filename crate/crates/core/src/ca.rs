//! Correspondence factor analysis of a contingency table.
//!
//! The table is turned into standardized residuals
//! `s_ij = (f_ij - f_i f_j) / sqrt(f_i f_j)` where `f_ij` are relative
//! frequencies and `f_i`, `f_j` the margins. Factors come from the spectral
//! decomposition of the smaller of `S S'` and `S' S`; the uniform direction
//! is annihilated by `S`, so every positive eigenvalue is a nontrivial
//! factor and the rank is at most `min(rows, cols) - 1`.
//!
//! Principal coordinates scale eigenvectors by the singular value over the
//! square root of the mass, which makes squared Euclidean distances between
//! coordinate vectors equal chi-square distances between profiles, and makes
//! row and column coordinates satisfy the transition formulas (each side is
//! the mass-weighted mean of the other, stretched by `1/sqrt(lambda)`).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::matrix::ContingencyTable;
use crate::{Error, Result};

/// Eigenvalues below this fraction of the leading one are treated as rank
/// deficiency, not structure.
const REL_EIGENVALUE_CUTOFF: f64 = 1e-12;
/// Absolute floor: correspondence eigenvalues never exceed 1, so anything
/// this small is floating-point residue even when the leading eigenvalue is
/// itself tiny (a near-independent table).
const ABS_EIGENVALUE_FLOOR: f64 = 1e-13;

/// A fitted correspondence analysis.
///
/// Coordinates are principal: `row_coords[i][k]` is row `i` on factor `k`,
/// factors ordered by decreasing eigenvalue. `row_dist2` and `col_dist2`
/// hold each profile's squared chi-square distance to its centroid,
/// computed from the table rather than from the factors.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CaModel {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub total_inertia: f64,
    pub row_coords: Vec<Vec<f64>>,
    pub col_coords: Vec<Vec<f64>>,
    pub row_dist2: Vec<f64>,
    pub col_dist2: Vec<f64>,
}

impl CaModel {
    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn n_factors(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fraction of total inertia carried by factor `k`.
    pub fn explained(&self, k: usize) -> f64 {
        if self.total_inertia == 0.0 {
            return 0.0;
        }
        self.eigenvalues[k] / self.total_inertia
    }
}

/// Pearson chi-square statistic of the table, computed from raw counts and
/// expected cell values under independence.
pub fn chi_square(table: &ContingencyTable) -> f64 {
    // sum (n - E)^2 / E over all cells collapses to sum n^2 / E - N,
    // which needs only the occupied cells.
    let n = table.total() as f64;
    let mut sum = 0.0;
    for i in 0..table.n_rows() {
        let row_sum = table.row_sum(i) as f64;
        for &(j, count) in table.row_cells(i) {
            let expected = row_sum * table.col_sum(j) as f64 / n;
            sum += (count as f64) * (count as f64) / expected;
        }
    }
    sum - n
}

fn standardized_residuals(table: &ContingencyTable) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = table.n_rows();
    let m = table.n_cols();
    let total = table.total() as f64;
    let row_masses: Vec<f64> = (0..n).map(|i| table.row_sum(i) as f64 / total).collect();
    let col_masses: Vec<f64> = (0..m).map(|j| table.col_sum(j) as f64 / total).collect();
    let mut s = DMatrix::from_fn(n, m, |i, j| -(row_masses[i] * col_masses[j]).sqrt());
    for i in 0..n {
        for &(j, count) in table.row_cells(i) {
            s[(i, j)] += count as f64 / total / (row_masses[i] * col_masses[j]).sqrt();
        }
    }
    (s, row_masses, col_masses)
}

/// Fit a correspondence analysis, retaining every factor whose eigenvalue
/// clears the rank-deficiency cutoff. A table with no association at all
/// yields a model with zero factors.
pub fn fit(table: &ContingencyTable) -> Result<CaModel> {
    let n = table.n_rows();
    let m = table.n_cols();
    if n < 2 || m < 2 {
        return Err(Error::Degenerate(format!(
            "table is {n}x{m}; factor analysis needs at least 2x2"
        )));
    }
    let (s, row_masses, col_masses) = standardized_residuals(table);
    let total_inertia = s.norm_squared();

    // Decompose the smaller Gram matrix and bridge to the other side.
    let rows_side = n <= m;
    let gram = if rows_side {
        &s * s.transpose()
    } else {
        s.transpose() * &s
    };
    let eigen = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("eigenvalues of a real symmetric matrix are finite")
    });
    let leading = eigen.eigenvalues[order[0]].max(0.0);
    let cutoff = (REL_EIGENVALUE_CUTOFF * leading).max(ABS_EIGENVALUE_FLOOR);
    let max_rank = (n - 1).min(m - 1);

    let mut eigenvalues = Vec::new();
    let mut row_coords = vec![Vec::new(); n];
    let mut col_coords = vec![Vec::new(); m];
    for &idx in &order {
        let lambda = eigen.eigenvalues[idx];
        if lambda <= cutoff || eigenvalues.len() == max_rank {
            break;
        }
        let sigma = lambda.sqrt();
        let unit = eigen.eigenvectors.column(idx).clone_owned();
        if rows_side {
            // F_ik = sigma u_i / sqrt(f_i); G_jk = (S'u)_j / sqrt(f_j).
            let bridged = s.tr_mul(&unit);
            for i in 0..n {
                row_coords[i].push(sigma * unit[i] / row_masses[i].sqrt());
            }
            for j in 0..m {
                col_coords[j].push(bridged[j] / col_masses[j].sqrt());
            }
        } else {
            let bridged = &s * &unit;
            for i in 0..n {
                row_coords[i].push(bridged[i] / row_masses[i].sqrt());
            }
            for j in 0..m {
                col_coords[j].push(sigma * unit[j] / col_masses[j].sqrt());
            }
        }
        eigenvalues.push(lambda);
    }

    // Eigenvector signs are arbitrary; anchor each factor so its largest
    // column coordinate in magnitude is positive (first one on a tie).
    for k in 0..eigenvalues.len() {
        let mut anchor = 0;
        let mut best = -1.0;
        for (j, coords) in col_coords.iter().enumerate() {
            if coords[k].abs() > best {
                best = coords[k].abs();
                anchor = j;
            }
        }
        if col_coords[anchor][k] < 0.0 {
            for coords in &mut col_coords {
                coords[k] = -coords[k];
            }
            for coords in &mut row_coords {
                coords[k] = -coords[k];
            }
        }
    }

    // Squared chi-square distance of each profile to the centroid, via
    // sum_j p_j^2 / f_j - 1 on occupied cells.
    let mut row_dist2 = vec![-1.0f64; n];
    let mut col_dist2 = vec![-1.0f64; m];
    for i in 0..n {
        let row_sum = table.row_sum(i) as f64;
        for &(j, count) in table.row_cells(i) {
            let p = count as f64 / row_sum;
            row_dist2[i] += p * p / col_masses[j];
            let q = count as f64 / table.col_sum(j) as f64;
            col_dist2[j] += q * q / row_masses[i];
        }
    }
    for d in row_dist2.iter_mut().chain(col_dist2.iter_mut()) {
        *d = d.max(0.0);
    }

    Ok(CaModel {
        row_labels: table.row_labels().to_vec(),
        col_labels: table.col_labels().to_vec(),
        row_masses,
        col_masses,
        eigenvalues,
        total_inertia,
        row_coords,
        col_coords,
        row_dist2,
        col_dist2,
    })
}

/// One line of the eigenvalue decomposition summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenReportRow {
    /// 1-based factor number.
    pub factor: usize,
    pub eigenvalue: f64,
    /// Share of retained inertia, in percent.
    pub percent: f64,
    /// Running total of `percent` through this factor.
    pub cumulative: f64,
}

/// Eigenvalue table with percent of inertia and cumulative percent, one row
/// per retained factor. Empty for a model with no factors.
pub fn eigen_report(model: &CaModel) -> Vec<EigenReportRow> {
    let sum: f64 = model.eigenvalues.iter().sum();
    let mut cumulative = 0.0;
    model
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let percent = if sum > 0.0 { 100.0 * lambda / sum } else { 0.0 };
            cumulative += percent;
            EigenReportRow { factor: k + 1, eigenvalue: lambda, percent, cumulative }
        })
        .collect()
}

/// How well each point is carried by each factor.
///
/// `row_ctr[i][k]` is row i's share of factor k's inertia (sums to 1 over
/// rows); `row_cos2[i][k]` is the fraction of row i's distance to the
/// centroid that factor k reproduces (sums to at most 1 over factors).
/// `dominant_row[k]` and `dominant_col[k]` index the point contributing
/// most to factor k (the first one on a tie).
#[derive(Debug, Clone, PartialEq)]
pub struct Contributions {
    pub row_ctr: Vec<Vec<f64>>,
    pub row_cos2: Vec<Vec<f64>>,
    pub col_ctr: Vec<Vec<f64>>,
    pub col_cos2: Vec<Vec<f64>>,
    pub dominant_row: Vec<usize>,
    pub dominant_col: Vec<usize>,
}

pub fn contributions(model: &CaModel) -> Contributions {
    let point_side = |coords: &[Vec<f64>], masses: &[f64], dist2: &[f64]| {
        let ctr = coords
            .iter()
            .zip(masses)
            .map(|(point, &mass)| {
                point
                    .iter()
                    .zip(&model.eigenvalues)
                    .map(|(&c, &lambda)| mass * c * c / lambda)
                    .collect()
            })
            .collect();
        let cos2 = coords
            .iter()
            .zip(dist2)
            .map(|(point, &d2)| {
                point
                    .iter()
                    .map(|&c| if d2 > 0.0 { c * c / d2 } else { 0.0 })
                    .collect()
            })
            .collect();
        (ctr, cos2)
    };
    let (row_ctr, row_cos2): (Vec<Vec<f64>>, _) =
        point_side(&model.row_coords, &model.row_masses, &model.row_dist2);
    let (col_ctr, col_cos2): (Vec<Vec<f64>>, _) =
        point_side(&model.col_coords, &model.col_masses, &model.col_dist2);
    let argmax_per_factor = |ctr: &[Vec<f64>]| {
        (0..model.n_factors())
            .map(|k| {
                let mut best = 0;
                for (i, point) in ctr.iter().enumerate() {
                    if point[k] > ctr[best][k] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    };
    let dominant_row = argmax_per_factor(&row_ctr);
    let dominant_col = argmax_per_factor(&col_ctr);
    Contributions { row_ctr, row_cos2, col_ctr, col_cos2, dominant_row, dominant_col }
}

/// A held-out row of counts over the model's columns, to be placed in the
/// fitted space without influencing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplementaryRow {
    pub label: String,
    pub cells: Vec<(usize, u64)>,
}

/// Projected positions, plus the labels of rows that had nothing to project.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectionOutcome {
    pub coords: Vec<(String, Vec<f64>)>,
    pub skipped: Vec<String>,
}

/// Place held-out rows in the fitted space through the transition formula:
/// the projection is the profile-weighted mean of the column coordinates,
/// stretched by `1/sqrt(lambda)` per factor. Rows with an all-zero profile
/// are skipped and reported.
pub fn project_rows(model: &CaModel, rows: &[SupplementaryRow]) -> Result<ProjectionOutcome> {
    project(
        rows,
        model.col_labels.len(),
        &model.col_coords,
        &model.eigenvalues,
    )
}

/// Dual of [`project_rows`]: place held-out columns using row coordinates.
pub fn project_cols(model: &CaModel, cols: &[SupplementaryRow]) -> Result<ProjectionOutcome> {
    project(
        cols,
        model.row_labels.len(),
        &model.row_coords,
        &model.eigenvalues,
    )
}

/// Project every row of a held-out table whose columns carry the same label
/// set as the model's columns, in any order. Extra or missing column labels
/// are an error; alignment is by label, not position.
pub fn project_supplementary_rows(
    model: &CaModel,
    sup: &ContingencyTable,
) -> Result<ProjectionOutcome> {
    let mapping = align_labels(sup.col_labels(), &model.col_labels, "column")?;
    let rows: Vec<SupplementaryRow> = (0..sup.n_rows())
        .map(|i| SupplementaryRow {
            label: sup.row_labels()[i].clone(),
            cells: sup
                .row_cells(i)
                .iter()
                .map(|&(j, c)| (mapping[j], c))
                .collect(),
        })
        .collect();
    project_rows(model, &rows)
}

/// Dual of [`project_supplementary_rows`]: the held-out table's rows must
/// carry the model's row label set, and its columns are projected.
pub fn project_supplementary_cols(
    model: &CaModel,
    sup: &ContingencyTable,
) -> Result<ProjectionOutcome> {
    let transposed = sup.transposed();
    let mapping = align_labels(transposed.col_labels(), &model.row_labels, "row")?;
    let cols: Vec<SupplementaryRow> = (0..transposed.n_rows())
        .map(|j| SupplementaryRow {
            label: transposed.row_labels()[j].clone(),
            cells: transposed
                .row_cells(j)
                .iter()
                .map(|&(i, c)| (mapping[i], c))
                .collect(),
        })
        .collect();
    project_cols(model, &cols)
}

/// Map each position of `from` to the position of the same label in `to`.
/// The two must be equal as sets.
fn align_labels(from: &[String], to: &[String], what: &str) -> Result<Vec<usize>> {
    if from.len() != to.len() {
        return Err(Error::LabelMismatch(format!(
            "{} {what} labels given, model has {}",
            from.len(),
            to.len()
        )));
    }
    let index: std::collections::HashMap<&str, usize> = to
        .iter()
        .enumerate()
        .map(|(i, label)| (label.as_str(), i))
        .collect();
    from.iter()
        .map(|label| {
            index.get(label.as_str()).copied().ok_or_else(|| {
                Error::LabelMismatch(format!("{what} label {label:?} not in the model"))
            })
        })
        .collect()
}

fn project(
    points: &[SupplementaryRow],
    side_len: usize,
    other_coords: &[Vec<f64>],
    eigenvalues: &[f64],
) -> Result<ProjectionOutcome> {
    let mut outcome = ProjectionOutcome::default();
    for point in points {
        for &(j, _) in &point.cells {
            if j >= side_len {
                return Err(Error::Bounds {
                    what: "supplementary cell index",
                    value: j,
                    min: 0,
                    max: side_len.saturating_sub(1),
                });
            }
        }
        let total: u64 = point.cells.iter().map(|&(_, c)| c).sum();
        if total == 0 {
            outcome.skipped.push(point.label.clone());
            continue;
        }
        let total = total as f64;
        let coords = eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lambda)| {
                let weighted: f64 = point
                    .cells
                    .iter()
                    .map(|&(j, c)| (c as f64 / total) * other_coords[j][k])
                    .sum();
                weighted / lambda.sqrt()
            })
            .collect();
        outcome.coords.push((point.label.clone(), coords));
    }
    Ok(outcome)
}
