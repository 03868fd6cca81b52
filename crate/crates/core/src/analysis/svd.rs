//! One-sided Jacobi singular value decomposition.
//!
//! Subspace comparisons only need singular values and *left* singular
//! vectors, so this solver orthogonalises the columns of a working copy with
//! right-side plane rotations until every column pair is numerically
//! orthogonal. Converged column norms are the singular values; normalised
//! columns are the left singular vectors. Rotations change nothing about the
//! column space, so the result is exact up to floating-point roundoff.

use super::AnalysisError;
use crate::num::Matrix;

/// Relative off-diagonal tolerance at which a column pair counts as
/// orthogonal.
const JACOBI_TOL: f64 = 1e-14;
/// Hard cap on full sweeps; Jacobi converges quadratically, so hitting this
/// means the input was pathological.
const MAX_SWEEPS: usize = 64;
/// Columns with `sigma <= sigma_max * RANK_TOL` count as numerically null.
const RANK_TOL: f64 = 1e-13;

/// Thin SVD result: `u` is `rows × min(rows, cols)` with orthonormal columns
/// ordered by descending singular value; `sigma` holds the matching singular
/// values. Columns beyond the numerical rank carry no direction information
/// from the input; they are completed deterministically to keep `u`
/// orthonormal.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
}

impl Svd {
    /// The leading `k` columns of `u` as column vectors.
    pub fn leading_columns(&self, k: usize) -> Vec<Vec<f64>> {
        (0..k.min(self.u.cols()))
            .map(|j| (0..self.u.rows()).map(|i| self.u.get(i, j)).collect())
            .collect()
    }
}

fn column_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Computes the thin SVD of `m` (`rows >= 1`, `cols >= 1`, `cols <= rows`
/// not required). Errors on non-finite input or failure to converge.
pub fn singular_decomposition(m: &Matrix) -> Result<Svd, AnalysisError> {
    let rows = m.rows();
    let cols = m.cols();
    if rows == 0 || cols == 0 {
        return Err(AnalysisError::Contract("cannot decompose an empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(AnalysisError::Contract("cannot decompose a matrix with non-finite entries".into()));
    }

    // Column-major working copy; rotations act on whole columns.
    let mut g: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j)).collect())
        .collect();

    // Numerically-null columns are excluded from the orthogonality demand.
    // A matrix whose columns span fewer dimensions than their count (say,
    // more columns than non-zero rows) pushes the surplus columns down to
    // round-off scale, where they could never be made mutually orthogonal;
    // they fall below the rank cutoff regardless, and the completion step
    // below replaces their directions. The Frobenius norm is invariant under
    // the rotations, so the floor is computed once.
    let frob2: f64 = g.iter().map(|col| column_dot(col, col)).sum();
    let null2 = frob2 * RANK_TOL * RANK_TOL;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let app = column_dot(&g[p], &g[p]);
                let aqq = column_dot(&g[q], &g[q]);
                if app <= null2 || aqq <= null2 {
                    continue;
                }
                let apq = column_dot(&g[p], &g[q]);
                if apq == 0.0 || apq.abs() <= JACOBI_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = g.split_at_mut(q);
                for (gp, gq) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (old_p, old_q) = (*gp, *gq);
                    *gp = c * old_p - s * old_q;
                    *gq = s * old_p + c * old_q;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(AnalysisError::Convergence(format!(
            "one-sided Jacobi did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = g.iter().map(|col| column_dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let sigma_max = norms[order[0]];

    // A wide matrix has min(rows, cols) singular values; the surplus
    // orthogonalised columns are numerically zero and carry nothing.
    let k = rows.min(cols);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for &j in &order[..k] {
        sigma.push(norms[j]);
        if norms[j] > sigma_max * RANK_TOL && norms[j] > 0.0 {
            u_cols.push(g[j].iter().map(|v| v / norms[j]).collect());
        } else {
            u_cols.push(complete_orthonormal(&u_cols, rows)?);
        }
    }

    let u = Matrix::from_fn(rows, k, |i, j| u_cols[j][i]);
    Ok(Svd { u, sigma })
}

/// Deterministically extends an orthonormal set by one vector: tries the
/// standard basis vectors in order and keeps the first residual with
/// non-negligible norm.
fn complete_orthonormal(existing: &[Vec<f64>], rows: usize) -> Result<Vec<f64>, AnalysisError> {
    for k in 0..rows {
        let mut v = vec![0.0; rows];
        v[k] = 1.0;
        for col in existing {
            let proj = column_dot(&v, col);
            for (vi, ci) in v.iter_mut().zip(col) {
                *vi -= proj * ci;
            }
        }
        let norm = column_dot(&v, &v).sqrt();
        if norm > 0.5 {
            for vi in &mut v {
                *vi /= norm;
            }
            return Ok(v);
        }
    }
    Err(AnalysisError::Contract(
        "cannot extend an orthonormal basis past the space dimension".into(),
    ))
}
