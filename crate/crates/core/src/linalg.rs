//! Dense linear algebra helpers shared by the solver blocks.
//!
//! Matrices move through the crate as `ndarray` arrays; factorizations are
//! delegated to nalgebra and the results converted back. Everything here is
//! deterministic: no threading, no randomized pivoting, and eigenpairs are
//! reordered by `(eigenvalue, original index)` so repeated calls on the same
//! input produce bit-identical output.

use nalgebra::{Cholesky, DMatrix};
use ndarray::{Array1, Array2};

use crate::error::{CoselectError, Result};

pub fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
///
/// The input is symmetrized as `(A + A^T) / 2` before factorization so callers
/// may pass matrices that are symmetric only up to rounding.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoselectError::InvalidData(format!(
            "eigh expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = to_nalgebra(a);
    let mt = m.transpose();
    m += mt;
    m.scale_mut(0.5);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(CoselectError::Numerical(
            "eigh input contains non-finite entries".into(),
        ));
    }
    let decomp = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[i]
            .partial_cmp(&decomp.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| decomp.eigenvalues[i]));
    let vectors =
        Array2::from_shape_fn((n, n), |(i, j)| decomp.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvectors belonging to the `c` smallest eigenvalues, as an `n x c` matrix.
pub fn eigh_smallest(a: &Array2<f64>, c: usize) -> Result<Array2<f64>> {
    let n = a.nrows();
    if c == 0 || c > n {
        return Err(CoselectError::InvalidParam(format!(
            "requested {c} eigenvectors from a {n}x{n} matrix"
        )));
    }
    let (_, vectors) = eigh(a)?;
    Ok(vectors.slice(ndarray::s![.., ..c]).to_owned())
}

/// Solves `A X = B` for symmetric positive definite `A`.
///
/// Cholesky first; if that fails because `A` is only barely definite, an LU
/// solve is attempted before giving up.
pub fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != a.ncols() {
        return Err(CoselectError::InvalidData(format!(
            "solve_spd expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.ncols() != b.nrows() {
        return Err(CoselectError::InvalidData(format!(
            "solve_spd shape mismatch: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let ma = to_nalgebra(a);
    let mb = to_nalgebra(b);
    if let Some(chol) = Cholesky::new(ma.clone()) {
        return Ok(from_nalgebra(&chol.solve(&mb)));
    }
    match ma.lu().solve(&mb) {
        Some(x) => Ok(from_nalgebra(&x)),
        None => Err(CoselectError::Numerical(
            "linear system is singular to working precision".into(),
        )),
    }
}

/// Squared Euclidean distances between all row pairs: `out[i][j] = |M_i - M_j|^2`.
///
/// Computed through the Gram matrix with a clamp at zero, so the diagonal is
/// exactly zero and rounding never produces a negative distance.
pub fn pairwise_sq_row_dists(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let gram = m.dot(&m.t());
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]]).max(0.0);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Frobenius norm squared of the difference `A - B`.
pub fn frob_sq_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Largest absolute entry of the difference `A - B`.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eigh_recovers_diagonal_spectrum() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, vecs) = eigh(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-12);
        for j in 0..3 {
            let v = vecs.column(j);
            let av = a.dot(&v.to_owned());
            for i in 0..3 {
                assert_abs_diff_eq!(av[i], vals[j] * v[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn eigh_is_deterministic_across_calls() {
        let a = array![
            [2.0, -1.0, 0.5, 0.0],
            [-1.0, 3.0, 0.0, 0.2],
            [0.5, 0.0, 1.5, -0.3],
            [0.0, 0.2, -0.3, 2.5]
        ];
        let (v1, e1) = eigh(&a).unwrap();
        let (v2, e2) = eigh(&a).unwrap();
        assert_eq!(
            v1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            v2.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(
            e1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            e2.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn eigh_smallest_selects_low_end_of_spectrum() {
        let a = array![[5.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]];
        let y = eigh_smallest(&a, 2).unwrap();
        assert_eq!(y.dim(), (3, 2));
        // Smallest two eigenvalues are 1 and 3, with axis-aligned eigenvectors.
        assert_abs_diff_eq!(y.column(0)[1].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.column(1)[2].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_spd_matches_known_solution() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let x_true = array![[1.0, 0.5], [-2.0, 1.0]];
        let b = a.dot(&x_true);
        let x = solve_spd(&a, &b).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_spd_rejects_singular_systems() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![[1.0], [0.0]];
        assert!(solve_spd(&a, &b).is_err());
    }

    #[test]
    fn pairwise_dists_match_direct_computation() {
        let m = array![[1.0, 2.0], [4.0, 6.0], [1.0, 2.0]];
        let d = pairwise_sq_row_dists(&m);
        assert_abs_diff_eq!(d[[0, 1]], 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[[1, 0]], 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[[0, 2]], 0.0, epsilon = 1e-12);
        for i in 0..3 {
            assert_eq!(d[[i, i]], 0.0);
        }
    }
}
