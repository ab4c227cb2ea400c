//! Similarity graphs: kNN construction, Laplacians, and the consensus-graph
//! update with its row-wise simplex projection.
//!
//! Every graph here is row-stochastic with a zero diagonal. The kNN weights
//! follow the bounded-allocation rule: for instance `i` with sorted neighbor
//! distances `d_{i,1} <= ... <= d_{i,k+1}`,
//!
//! ```text
//! s_ij = (d_{i,k+1} - d_ij) / sum_{h<=k} (d_{i,k+1} - d_ih)
//! ```
//!
//! over the `k` nearest neighbors and zero elsewhere. When the denominator
//! vanishes (duplicate points) the mass falls back to a uniform `1/k` split.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CoselectError, Result};
use crate::linalg::pairwise_sq_row_dists;

/// Row-sum slack accepted by the stochasticity check.
const ROW_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Built from one view's raw features and fixed during optimization.
    PerView,
    /// The learned consensus graph.
    Consensus,
}

/// A validated row-stochastic similarity matrix.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    matrix: Array2<f64>,
    kind: GraphKind,
}

impl SimilarityGraph {
    pub fn new(matrix: Array2<f64>, kind: GraphKind) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(CoselectError::InvalidData(format!(
                "similarity matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for i in 0..n {
            if matrix[[i, i]] != 0.0 {
                return Err(CoselectError::InvalidData(format!(
                    "similarity diagonal must be zero, s[{i}][{i}] = {}",
                    matrix[[i, i]]
                )));
            }
            let mut sum = 0.0;
            for j in 0..n {
                let s = matrix[[i, j]];
                if !(s >= 0.0) {
                    return Err(CoselectError::InvalidData(format!(
                        "similarity entries must be non-negative, s[{i}][{j}] = {s}"
                    )));
                }
                sum += s;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(CoselectError::InvalidData(format!(
                    "similarity row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(SimilarityGraph { matrix, kind })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Builds the kNN similarity graph for one view (`x` is `d x n`, instances as
/// columns). Requires `1 <= k <= n - 1`; the instance itself never counts as
/// its own neighbor.
pub fn knn_graph(x: &Array2<f64>, k: usize) -> Result<SimilarityGraph> {
    let n = x.ncols();
    if n < 2 {
        return Err(CoselectError::InvalidData(format!(
            "kNN graph needs at least two instances, got {n}"
        )));
    }
    if k == 0 || k > n - 1 {
        return Err(CoselectError::InvalidParam(format!(
            "k must satisfy 1 <= k <= n - 1 = {}, got {k}",
            n - 1
        )));
    }
    let dists = pairwise_sq_row_dists(&x.t().to_owned());
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        // All other instances ordered by (distance, index); ties break toward
        // the smaller index so the graph is independent of iteration order.
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dists[[i, a]]
                .partial_cmp(&dists[[i, b]])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let neighbors = &order[..k];
        // Distance to the (k+1)-th neighbor caps the allocation. With
        // k = n - 1 there is none, which degenerates like duplicates do.
        let cap = if k < n - 1 {
            dists[[i, order[k]]].sqrt()
        } else {
            dists[[i, neighbors[k - 1]]].sqrt()
        };
        let gaps: Vec<f64> = neighbors
            .iter()
            .map(|&j| cap - dists[[i, j]].sqrt())
            .collect();
        let total: f64 = gaps.iter().sum();
        if total > 0.0 {
            for (&j, &g) in neighbors.iter().zip(gaps.iter()) {
                s[[i, j]] = g / total;
            }
        } else {
            for &j in neighbors {
                s[[i, j]] = 1.0 / k as f64;
            }
        }
    }
    SimilarityGraph::new(s, GraphKind::PerView)
}

/// Unnormalized Laplacian `D - A` of the symmetrized affinity `(M + M^T) / 2`.
pub fn laplacian(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]]);
        }
    }
    let degrees: Array1<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    let mut l = -a;
    for i in 0..n {
        l[[i, i]] += degrees[i];
    }
    l
}

/// Laplacian of the complement affinity `1 - s_ij` (diagonal zeroed), used by
/// the diversity term that pushes unlinked instances apart.
pub fn complement_laplacian(s: &SimilarityGraph) -> Array2<f64> {
    let n = s.n();
    let mut comp = Array2::from_elem((n, n), 1.0);
    for i in 0..n {
        comp[[i, i]] = 0.0;
    }
    comp -= s.matrix();
    laplacian(&comp)
}

/// Per-view and consensus-complement Laplacians for one view, bundled because
/// the solver consumes them together.
#[derive(Debug, Clone)]
pub struct LaplacianPair {
    pub l_view: Array2<f64>,
    pub l_complement: Array2<f64>,
}

impl LaplacianPair {
    pub fn new(view: &SimilarityGraph, consensus: &SimilarityGraph) -> Self {
        LaplacianPair {
            l_view: laplacian(view.matrix()),
            l_complement: complement_laplacian(consensus),
        }
    }
}

/// Root of `g(phi) = (1/n) * sum_j max(phi - q_j, 0) - phi` after shifting `q`
/// to sum to one.
///
/// The shift matters: the root characterizes the Euclidean simplex projection
/// only when the input already sums to one, and the projection itself is
/// invariant under uniform shifts, so normalizing here keeps both properties
/// for arbitrary vectors. `g` is convex and piecewise linear; Newton steps
/// from `phi_0 = mean - 1/n` land exactly in a handful of iterations, with
/// bisection over `[max(q) - 1, max(q)]` as the fallback.
pub fn newton_simplex_root(q: ArrayView1<f64>) -> f64 {
    let n = q.len();
    assert!(n > 0, "simplex projection of an empty vector");
    let nf = n as f64;
    let shift = (1.0 - q.sum()) / nf;
    let shifted: Vec<f64> = q.iter().map(|&v| v + shift).collect();
    let g = |phi: f64| -> f64 {
        shifted.iter().map(|&v| (phi - v).max(0.0)).sum::<f64>() / nf - phi
    };
    let mut phi = shifted.iter().sum::<f64>() / nf - 1.0 / nf;
    let mut ok = false;
    for _ in 0..100 {
        let val = g(phi);
        if val.abs() < 1e-12 {
            ok = true;
            break;
        }
        let active = shifted.iter().filter(|&&v| v < phi).count();
        let slope = active as f64 / nf - 1.0;
        if slope >= -1e-12 {
            break;
        }
        let next = phi - val / slope;
        if !next.is_finite() {
            break;
        }
        phi = next;
    }
    if !ok && g(phi).abs() >= 1e-12 {
        // g(max - 1) >= 0 and g(max) = -1/n < 0 bracket the root.
        let top = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lo = top - 1.0;
        let mut hi = top;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        phi = 0.5 * (lo + hi);
    }
    phi
}

/// Euclidean projection of `q` onto the probability simplex.
pub fn project_to_simplex(q: ArrayView1<f64>) -> Array1<f64> {
    let n = q.len();
    let shift = (1.0 - q.sum()) / n as f64;
    let phi = newton_simplex_root(q);
    let mut out = Array1::from_iter(q.iter().map(|&v| (v + shift - phi).max(0.0)));
    // The root already enforces sum 1 to ~1e-12; rescale to hit it exactly.
    let total = out.sum();
    if total > 0.0 {
        out.mapv_inplace(|v| v / total);
    }
    out
}

/// One pass of the consensus-graph update given the current consistent
/// representation `b`. Row `i` solves
///
/// ```text
/// min_{s_i in simplex} sum_v gamma_v^r |s_i - s_i^v|^2 + (alpha/2) <a_i, s_i adjustments>
/// ```
///
/// whose closed form is the simplex projection of the average of the per-view
/// targets `s_i^v + alpha / (4 V gamma_v^r) * a_i`, with `a_ij = |b_i - b_j|^2`.
/// Weights are floored at `eps` before exponentiation so a vanishing
/// `gamma_v` cannot blow up the target.
pub fn update_consensus_graph(
    s_views: &[SimilarityGraph],
    b: &Array2<f64>,
    alpha: f64,
    gamma: ArrayView1<f64>,
    r: f64,
    eps: f64,
) -> Result<SimilarityGraph> {
    let n = b.nrows();
    let n_views = s_views.len();
    if n_views == 0 {
        return Err(CoselectError::InvalidData("no per-view graphs".into()));
    }
    if gamma.len() != n_views {
        return Err(CoselectError::InvalidData(format!(
            "gamma has {} entries for {n_views} views",
            gamma.len()
        )));
    }
    for g in s_views {
        if g.n() != n {
            return Err(CoselectError::InvalidData(format!(
                "graph size {} does not match representation size {n}",
                g.n()
            )));
        }
    }
    let dists = pairwise_sq_row_dists(b);
    let mut s = Array2::zeros((n, n));
    let vf = n_views as f64;
    for i in 0..n {
        // Off-diagonal target only: s_ii = 0 is a hard constraint, so the
        // projection runs on the remaining n - 1 coordinates.
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut target = Array1::zeros(n - 1);
        for (v, graph) in s_views.iter().enumerate() {
            let gamma_r = gamma[v].max(eps).powf(r);
            let coef = alpha / (4.0 * vf * gamma_r);
            for (t, &j) in others.iter().enumerate() {
                target[t] += (graph.matrix()[[i, j]] + coef * dists[[i, j]]) / vf;
            }
        }
        let row = project_to_simplex(target.view());
        for (t, &j) in others.iter().enumerate() {
            s[[i, j]] = row[t];
        }
    }
    SimilarityGraph::new(s, GraphKind::Consensus)
}
