//! Correspondence analysis of a contingency table, with supplementary rows.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::GramProfile;

/// Principal inertias at or below this are treated as zero.
const ABS_TOL: f64 = 1e-20;
/// Principal inertias at or below this share of the largest are rounding noise.
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: DMatrix<f64>,
}

impl ContingencyTable {
    /// Validates the counts and drops all-zero rows and columns.
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, counts: DMatrix<f64>) -> Result<Self> {
        if counts.nrows() != row_labels.len() || counts.ncols() != col_labels.len() {
            return Err(Error::Dimension {
                expected: row_labels.len() * col_labels.len(),
                got: counts.len(),
            });
        }
        if counts.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Param("contingency counts must be finite and non-negative".into()));
        }
        let keep_rows: Vec<usize> = (0..counts.nrows()).filter(|&i| counts.row(i).sum() > 0.0).collect();
        let keep_cols: Vec<usize> = (0..counts.ncols()).filter(|&j| counts.column(j).sum() > 0.0).collect();
        if keep_rows.len() < counts.nrows() {
            log::info!("ca: dropped {} all-zero rows", counts.nrows() - keep_rows.len());
        }
        if keep_cols.len() < counts.ncols() {
            log::info!("ca: dropped {} all-zero columns", counts.ncols() - keep_cols.len());
        }
        if keep_rows.is_empty() {
            return Err(Error::Param("contingency table has zero grand total".into()));
        }
        let counts = counts.select_rows(&keep_rows).select_columns(&keep_cols);
        Ok(ContingencyTable {
            row_labels: keep_rows.iter().map(|&i| row_labels[i].clone()).collect(),
            col_labels: keep_cols.iter().map(|&j| col_labels[j].clone()).collect(),
            counts,
        })
    }

    /// Rows are profiles, columns the given grams.
    pub fn from_profiles(rows: &[(String, &GramProfile)], grams: &[String]) -> Result<Self> {
        let counts = DMatrix::from_fn(rows.len(), grams.len(), |i, j| {
            rows[i].1.counts.get(&grams[j]).copied().unwrap_or(0) as f64
        });
        Self::new(rows.iter().map(|(l, _)| l.clone()).collect(), grams.to_vec(), counts)
    }

    pub fn grand_total(&self) -> f64 {
        self.counts.sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaResult {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    /// Principal inertias (squared singular values), non-increasing.
    pub inertias: Vec<f64>,
    pub explained: Vec<f64>,
    /// rows x axes
    pub row_principal: DMatrix<f64>,
    /// columns x axes
    pub col_principal: DMatrix<f64>,
    /// columns x axes
    pub col_standard: DMatrix<f64>,
}

impl CaResult {
    pub fn axes(&self) -> usize {
        self.inertias.len()
    }

    pub fn total_inertia(&self) -> f64 {
        self.inertias.iter().sum()
    }
}

pub fn correspondence_analysis(table: &ContingencyTable) -> Result<CaResult> {
    let n = table.grand_total();
    if !(n > 0.0) {
        return Err(Error::Param("contingency table has zero grand total".into()));
    }
    let p = &table.counts / n;
    let (nr, nc) = p.shape();
    let r: Vec<f64> = (0..nr).map(|i| p.row(i).sum()).collect();
    let c: Vec<f64> = (0..nc).map(|j| p.column(j).sum()).collect();
    let s = DMatrix::from_fn(nr, nc, |i, j| (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt());

    // Eigen-decompose the smaller cross-product S S^T or S^T S and recover
    // the other side by the transition formula.
    let wide = nr <= nc;
    let gram = if wide { &s * s.transpose() } else { s.transpose() * &s };
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambda_max = eig.eigenvalues.max().max(0.0);
    let tol = ABS_TOL.max(REL_TOL * lambda_max);
    let max_axes = nr.min(nc).saturating_sub(1);
    let axes: Vec<usize> = order
        .into_iter()
        .take(max_axes)
        .filter(|&k| eig.eigenvalues[k] > tol)
        .collect();
    let k = axes.len();
    let inertias: Vec<f64> = axes.iter().map(|&a| eig.eigenvalues[a]).collect();
    let sigma: Vec<f64> = inertias.iter().map(|l| l.sqrt()).collect();
    let mut u = DMatrix::zeros(nr, k);
    let mut v = DMatrix::zeros(nc, k);
    for (a, &e) in axes.iter().enumerate() {
        let vec = eig.eigenvectors.column(e);
        let (small, other) = if wide {
            (vec.clone_owned(), s.transpose() * vec / sigma[a])
        } else {
            (vec.clone_owned(), &s * vec / sigma[a])
        };
        let (uc, vc) = if wide { (small, other) } else { (other, small) };
        // sign convention: the largest-magnitude row entry is positive
        let pivot = uc.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let flip = if pivot < 0.0 { -1.0 } else { 1.0 };
        u.set_column(a, &(uc * flip));
        v.set_column(a, &(vc * flip));
    }
    let total: f64 = inertias.iter().sum();
    let explained = inertias.iter().map(|i| if total > 0.0 { i / total } else { 0.0 }).collect();

    let row_principal = DMatrix::from_fn(nr, k, |i, a| u[(i, a)] * sigma[a] / r[i].sqrt());
    let col_standard = DMatrix::from_fn(nc, k, |j, a| v[(j, a)] / c[j].sqrt());
    let col_principal = DMatrix::from_fn(nc, k, |j, a| col_standard[(j, a)] * sigma[a]);

    Ok(CaResult {
        row_labels: table.row_labels.clone(),
        col_labels: table.col_labels.clone(),
        row_masses: r,
        col_masses: c,
        inertias,
        explained,
        row_principal,
        col_principal,
        col_standard,
    })
}

/// Coordinates of a supplementary row: its profile times the column
/// standard coordinates. The decomposition is not affected.
pub fn project_supplementary(result: &CaResult, counts: &[f64]) -> Result<Vec<f64>> {
    if counts.len() != result.col_labels.len() {
        return Err(Error::Dimension {
            expected: result.col_labels.len(),
            got: counts.len(),
        });
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Param("supplementary row has zero total".into()));
    }
    Ok((0..result.axes())
        .map(|a| {
            counts
                .iter()
                .enumerate()
                .map(|(j, &x)| x / total * result.col_standard[(j, a)])
                .sum()
        })
        .collect())
}

/// Project a gram profile, reading counts for the analysed columns.
pub fn project_profile(result: &CaResult, profile: &GramProfile) -> Result<Vec<f64>> {
    let counts: Vec<f64> = result
        .col_labels
        .iter()
        .map(|g| profile.counts.get(g).copied().unwrap_or(0) as f64)
        .collect();
    project_supplementary(result, &counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    ActiveRow,
    Column,
    Supplementary,
}

impl PointKind {
    fn as_str(self) -> &'static str {
        match self {
            PointKind::ActiveRow => "active_row",
            PointKind::Column => "column",
            PointKind::Supplementary => "supplementary",
        }
    }
}

/// Long-format coordinates: `point_id,kind,axis,coordinate,mass,inertia_share`.
/// Axes are numbered from 1; columns use principal coordinates and
/// supplementary points carry no mass.
pub fn write_coordinates<W: Write>(
    result: &CaResult,
    supplementary: &[(String, Vec<f64>)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point_id", "kind", "axis", "coordinate", "mass", "inertia_share"])?;
    let mut emit = |id: &str, kind: PointKind, coords: &[f64], mass: Option<f64>| -> Result<()> {
        for (a, x) in coords.iter().enumerate() {
            w.write_record([
                id,
                kind.as_str(),
                &(a + 1).to_string(),
                &x.to_string(),
                &mass.map(|m| m.to_string()).unwrap_or_default(),
                &result.explained[a].to_string(),
            ])?;
        }
        Ok(())
    };
    for (i, label) in result.row_labels.iter().enumerate() {
        let coords: Vec<f64> = result.row_principal.row(i).iter().copied().collect();
        emit(label, PointKind::ActiveRow, &coords, Some(result.row_masses[i]))?;
    }
    for (j, label) in result.col_labels.iter().enumerate() {
        let coords: Vec<f64> = result.col_principal.row(j).iter().copied().collect();
        emit(label, PointKind::Column, &coords, Some(result.col_masses[j]))?;
    }
    for (id, coords) in supplementary {
        emit(id, PointKind::Supplementary, coords, None)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn table(rows: usize, cols: usize, data: &[f64]) -> ContingencyTable {
        ContingencyTable::new(labels("r", rows), labels("c", cols), DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    // Pearson chi-square / n, cell by cell.
    fn chi2_over_n(t: &ContingencyTable) -> f64 {
        let n = t.grand_total();
        let (nr, nc) = t.counts.shape();
        let mut chi = 0.0;
        for i in 0..nr {
            for j in 0..nc {
                let e = t.counts.row(i).sum() * t.counts.column(j).sum() / n;
                chi += (t.counts[(i, j)] - e).powi(2) / e;
            }
        }
        chi / n
    }

    #[test]
    fn independent_margins_give_no_axes() {
        let t = table(2, 2, &[2.0, 6.0, 3.0, 9.0]);
        let ca = correspondence_analysis(&t).unwrap();
        assert_eq!(ca.axes(), 0);
        assert_eq!(ca.total_inertia(), 0.0);
    }

    #[test]
    fn small_table_against_chi_square() {
        let t = table(3, 4, &[10.0, 2.0, 3.0, 1.0, 1.0, 8.0, 2.0, 5.0, 4.0, 4.0, 9.0, 2.0]);
        let ca = correspondence_analysis(&t).unwrap();
        assert_eq!(ca.axes(), 2);
        assert!(ca.inertias[0] >= ca.inertias[1]);
        let chi = chi2_over_n(&t);
        assert!((ca.total_inertia() - chi).abs() <= 1e-12 * chi);
        let share: f64 = ca.explained.iter().sum();
        assert!((share - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_table_reconstructs() {
        let data = [
            18.0, 2.0, 25.0, 6.0, 20.0, 10.0, 2.0, 5.0, 4.0, 16.0, 25.0, 19.0, 18.0, 3.0, 2.0, 18.0, 3.0, 6.0, 14.0,
            3.0, 8.0, 4.0, 8.0, 23.0,
        ];
        let t = table(4, 6, &data);
        let ca = correspondence_analysis(&t).unwrap();
        let n = t.grand_total();
        // P = r c^T + D_r F G_std^T D_c, rebuilt from the coordinates
        for i in 0..4 {
            for j in 0..6 {
                let mut p = ca.row_masses[i] * ca.col_masses[j];
                for a in 0..ca.axes() {
                    p += ca.row_masses[i] * ca.col_masses[j] * ca.row_principal[(i, a)] * ca.col_standard[(j, a)];
                }
                assert!((p - t.counts[(i, j)] / n).abs() < 1e-12, "cell ({i},{j})");
            }
        }
        for a in 0..ca.axes() {
            let bary: f64 = (0..6).map(|j| ca.col_masses[j] * ca.col_principal[(j, a)]).sum();
            assert!(bary.abs() < 1e-12);
        }
    }

    #[test]
    fn row_permutation_permutes_coordinates() {
        let data = [10.0, 2.0, 3.0, 1.0, 1.0, 8.0, 2.0, 5.0, 4.0, 4.0, 9.0, 2.0];
        let a = correspondence_analysis(&table(3, 4, &data)).unwrap();
        let mut swapped = data;
        swapped[..4].copy_from_slice(&data[8..]);
        swapped[8..].copy_from_slice(&data[..4]);
        let b = correspondence_analysis(&table(3, 4, &swapped)).unwrap();
        for (x, y) in a.inertias.iter().zip(&b.inertias) {
            assert!((x - y).abs() < 1e-14);
        }
        for ax in 0..a.axes() {
            // axis signs are conventions; compare up to sign
            let s = (a.row_principal[(0, ax)] * b.row_principal[(2, ax)]).signum();
            for (i, j) in [(0, 2), (1, 1), (2, 0)] {
                assert!((a.row_principal[(i, ax)] - s * b.row_principal[(j, ax)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_rows_and_columns_are_dropped() {
        let t = table(3, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 1.0]);
        assert_eq!(t.row_labels, vec!["r0", "r2"]);
        assert_eq!(t.col_labels, vec!["c0", "c2"]);
        let all_zero = ContingencyTable::new(labels("r", 1), labels("c", 1), DMatrix::zeros(1, 1));
        assert!(all_zero.is_err());
        let neg = ContingencyTable::new(labels("r", 1), labels("c", 1), DMatrix::from_element(1, 1, -1.0));
        assert!(neg.is_err());
    }

    #[test]
    fn supplementary_edge_cases() {
        let t = table(3, 3, &[5.0, 1.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 5.0]);
        let ca = correspondence_analysis(&t).unwrap();
        let origin = project_supplementary(&ca, &ca.col_masses).unwrap();
        assert!(origin.iter().all(|x| x.abs() < 1e-12));
        assert!(project_supplementary(&ca, &[0.0, 0.0, 0.0]).is_err());
        assert!(project_supplementary(&ca, &[1.0]).is_err());
        let row0 = project_supplementary(&ca, &[5.0, 1.0, 1.0]).unwrap();
        for (a, x) in row0.iter().enumerate() {
            assert!((x - ca.row_principal[(0, a)]).abs() < 1e-10);
        }
    }

    #[test]
    fn coordinates_csv() {
        let t = table(2, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 2.0]);
        let ca = correspondence_analysis(&t).unwrap();
        let mut buf = Vec::new();
        write_coordinates(&ca, &[("w0".into(), vec![0.1])], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "point_id,kind,axis,coordinate,mass,inertia_share");
        assert_eq!(lines.len(), 1 + 2 + 3 + 1);
        assert!(lines.last().unwrap().starts_with("w0,supplementary,1,0.1,,1"));
    }
}
