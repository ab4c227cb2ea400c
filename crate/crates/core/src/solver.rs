//! Alternating optimization of the joint selection objective.
//!
//! The model couples, per view, a sparse feature projection `W_v` (`d_v x c`)
//! with a consistent self-representation `B` shared by all views, a
//! view-specific self-representation `B_v`, and a learned consensus graph `S`.
//! The objective minimized here is
//!
//! ```text
//! sum_v [ |W_v^T X_v (I - B - B_v)|_F^2 + eta_v^r |B_v|_21 + lambda_v^r |W_v|_21 ]
//!   + theta |B|_21
//!   + (alpha/2) [ sum_ij |b_i - b_j|^2 (1 - s_ij)
//!               + sum_v sum_ij |b_i^v - b_j^v|^2 s_ij^v ]
//!   + sum_v gamma_v^r |S - S_v|_F^2
//! ```
//!
//! over simplex-constrained view weights `(lambda, eta, gamma)` and
//! row-stochastic `S`. Each block has a closed-form minimizer; the l2,1 terms
//! are handled by iteratively reweighted least squares, refreshing the
//! diagonal reweighting from the current iterate at the start of each block.
//!
//! All randomness (the `B`, `B_v` initializations) flows from one seeded
//! ChaCha stream, so a fit is a pure function of `(dataset, hyperparams,
//! variant)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::MultiViewDataset;
use crate::error::{CoselectError, Result};
use crate::graph::{
    complement_laplacian, knn_graph, laplacian, update_consensus_graph, GraphKind,
    SimilarityGraph,
};
use crate::linalg::{
    eigh_smallest, frob_sq_diff, max_abs_diff, pairwise_sq_row_dists, solve_spd,
};

/// Everything the solver needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Weight-sharpness exponent; must exceed 1 or the weight updates divide
    /// by zero.
    pub r: f64,
    /// Sparsity weight on the consistent representation.
    pub theta: f64,
    /// Weight of the graph and diversity terms.
    pub alpha: f64,
    /// Projection dimension; `None` resolves to `ceil(min(sqrt(n), min_v d_v))`.
    pub c: Option<usize>,
    /// Neighbors per instance in the fixed per-view graphs.
    pub k: usize,
    /// Denominator guard for reweighting diagonals and weight floors.
    pub epsilon: f64,
    /// Stop when the relative objective change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            r: 2.0,
            theta: 1.0,
            alpha: 1.0,
            c: None,
            k: 5,
            epsilon: 1e-8,
            tol: 1e-6,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(CoselectError::InvalidParam(format!(
                "r must be finite and > 1, got {}",
                self.r
            )));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(CoselectError::InvalidParam(format!(
                "theta must be finite and > 0, got {}",
                self.theta
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(CoselectError::InvalidParam(format!(
                "alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        if let Some(c) = self.c {
            if c == 0 {
                return Err(CoselectError::InvalidParam(
                    "projection dimension c must be positive".into(),
                ));
            }
        }
        if self.k == 0 {
            return Err(CoselectError::InvalidParam("k must be positive".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(CoselectError::InvalidParam(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(CoselectError::InvalidParam(format!(
                "tol must be finite and > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(CoselectError::InvalidParam(
                "max_iter must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Projection dimension for a concrete dataset: the explicit value when
    /// set (bounds-checked), otherwise `ceil(min(sqrt(n), min_v d_v))`.
    pub fn resolve_c(&self, ds: &MultiViewDataset) -> Result<usize> {
        let min_d = ds.view_dims().into_iter().min().unwrap_or(0);
        let bound = min_d.min(ds.n_instances());
        match self.c {
            Some(c) if c <= bound => Ok(c),
            Some(c) => Err(CoselectError::InvalidParam(format!(
                "c = {c} exceeds min(min_v d_v, n) = {bound}"
            ))),
            None => {
                let auto = (ds.n_instances() as f64).sqrt().min(min_d as f64).ceil() as usize;
                Ok(auto.clamp(1, bound.max(1)))
            }
        }
    }
}

/// Which parts of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The complete model.
    Full,
    /// Drops the learned consensus graph and both graph-coupled terms; only
    /// the reconstruction and sparsity terms remain.
    NoGraph,
    /// Drops the consistent representation (`B = 0` throughout); the
    /// per-view graphs stay fixed and `S` is never learned.
    NoConsensus,
}

impl FromStr for Variant {
    type Err = CoselectError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no-graph" => Ok(Variant::NoGraph),
            "no-consensus" => Ok(Variant::NoConsensus),
            other => Err(CoselectError::Config(format!(
                "unknown variant {other:?}, expected full, no-graph, or no-consensus"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Full => write!(f, "full"),
            Variant::NoGraph => write!(f, "no-graph"),
            Variant::NoConsensus => write!(f, "no-consensus"),
        }
    }
}

/// All optimization variables after a fit.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// Per-view projections, `d_v x c`.
    pub w: Vec<Array2<f64>>,
    /// Consistent self-representation, `n x n`.
    pub b: Array2<f64>,
    /// View-specific self-representations, `n x n` each.
    pub b_views: Vec<Array2<f64>>,
    /// Learned consensus graph.
    pub s: SimilarityGraph,
    /// Fixed per-view kNN graphs the fit started from.
    pub s_views: Vec<SimilarityGraph>,
    pub lambda: Array1<f64>,
    pub eta: Array1<f64>,
    pub gamma: Array1<f64>,
    pub variant: Variant,
}

impl ModelState {
    pub fn n_instances(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_views(&self) -> usize {
        self.w.len()
    }
}

/// Objective value split into its seven terms.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveTerms {
    pub total: f64,
    pub reconstruction: f64,
    pub w_sparsity: f64,
    pub b_sparsity: f64,
    pub bv_sparsity: f64,
    pub diversity: f64,
    pub specific_graph: f64,
    pub graph_fit: f64,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub terms: ObjectiveTerms,
    /// `|f_t - f_{t-1}| / max(|f_{t-1}|, eps)`.
    pub rel_change: f64,
    /// Largest entry change per block, max over views where applicable.
    pub w_delta: f64,
    pub b_delta: f64,
    pub bv_delta: f64,
    pub s_delta: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    /// Objective before the first cycle (projections still zero).
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.terms.total)
            .unwrap_or(self.initial_objective)
    }
}

/// Sum of row l2 norms.
pub fn l21_norm(m: &Array2<f64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

/// IRLS diagonal for an l2,1 penalty: `d_ii = 1 / (2 sqrt(|m_i|^2 + eps))`.
///
/// The `eps` inside the root keeps zero rows finite; it makes the diagonal
/// the exact reweighting of the smoothed norm `sum_i sqrt(|m_i|^2 + eps)`.
pub fn row_weight_diag(m: &Array2<f64>, eps: f64) -> Array1<f64> {
    m.rows()
        .into_iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|v| v * v).sum();
            1.0 / (2.0 * (sq + eps).sqrt())
        })
        .collect()
}

fn scale_rows(m: &Array2<f64>, d: &Array1<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v * d[i]);
    }
    out
}

/// The objective terms a view's projection touches: reconstruction plus its
/// weighted row-sparsity penalty.
fn w_stage_value(
    x: &Array2<f64>,
    w: &Array2<f64>,
    b: &Array2<f64>,
    b_v: &Array2<f64>,
    lam_r: f64,
) -> f64 {
    let z = w.t().dot(x);
    let mut res = &z - &z.dot(b);
    res -= &z.dot(b_v);
    res.iter().map(|e| e * e).sum::<f64>() + lam_r * l21_norm(w)
}

/// Eigenvector target shared by both `update_w` paths: the `c` bottom
/// eigenvectors of `(I - B - B_v)(I - B - B_v)^T`.
fn projection_target(b: &Array2<f64>, b_v: &Array2<f64>, c: usize) -> Result<Array2<f64>> {
    let n = b.nrows();
    let mut e = Array2::eye(n);
    e -= b;
    e -= b_v;
    let h = e.dot(&e.t());
    eigh_smallest(&h, c)
}

/// Projection update via the `d_v x d_v` normal equations; preferred when the
/// view is short (`d_v <= n`).
pub fn update_w_direct(
    x: &Array2<f64>,
    b: &Array2<f64>,
    b_v: &Array2<f64>,
    lambda: f64,
    r: f64,
    c: usize,
    d_w: &Array1<f64>,
    eps: f64,
) -> Result<Array2<f64>> {
    let y = projection_target(b, b_v, c)?;
    let lam_r = lambda.max(eps).powf(r);
    let mut lhs = x.dot(&x.t());
    for i in 0..lhs.nrows() {
        lhs[[i, i]] += lam_r * d_w[i];
    }
    solve_spd(&lhs, &x.dot(&y))
}

/// Projection update through the Woodbury identity, inverting an `n x n`
/// system instead of `d_v x d_v`; preferred for tall views (`d_v > n`).
pub fn update_w_woodbury(
    x: &Array2<f64>,
    b: &Array2<f64>,
    b_v: &Array2<f64>,
    lambda: f64,
    r: f64,
    c: usize,
    d_w: &Array1<f64>,
    eps: f64,
) -> Result<Array2<f64>> {
    let y = projection_target(b, b_v, c)?;
    let lam_r = lambda.max(eps).powf(r);
    let inv_lam = 1.0 / lam_r;
    let dinv: Array1<f64> = d_w.mapv(|v| 1.0 / v);
    let n = x.ncols();
    // inner = I_n + lam^-r X^T D^-1 X
    let dx = scale_rows(x, &dinv);
    let mut inner = x.t().dot(&dx);
    inner.mapv_inplace(|v| v * inv_lam);
    for i in 0..n {
        inner[[i, i]] += 1.0;
    }
    let xy = x.dot(&y);
    let dxy = scale_rows(&xy, &dinv);
    let z = solve_spd(&inner, &x.t().dot(&dxy))?;
    let corr = scale_rows(&x.dot(&z), &dinv);
    let mut w = dxy;
    w.scaled_add(-inv_lam, &corr);
    w.mapv_inplace(|v| v * inv_lam);
    Ok(w)
}

/// Projection update for one view, dispatching on the cheaper system size.
pub fn update_w(
    x: &Array2<f64>,
    b: &Array2<f64>,
    b_v: &Array2<f64>,
    lambda: f64,
    r: f64,
    c: usize,
    d_w: &Array1<f64>,
    eps: f64,
) -> Result<Array2<f64>> {
    if x.nrows() <= x.ncols() {
        update_w_direct(x, b, b_v, lambda, r, c, d_w, eps)
    } else {
        update_w_woodbury(x, b, b_v, lambda, r, c, d_w, eps)
    }
}

/// Consistent-representation update. Solves the stationarity system
///
/// ```text
/// [ sum_v M_v + alpha L_comp + theta D_B ] B = sum_v M_v (I - B_v)
/// ```
///
/// with `M_v = X_v^T W_v W_v^T X_v` and `L_comp` the complement-graph
/// Laplacian of the current consensus graph.
pub fn update_b(
    views: &[Array2<f64>],
    w_all: &[Array2<f64>],
    b_v_all: &[Array2<f64>],
    l_comp: &Array2<f64>,
    alpha: f64,
    theta: f64,
    d_b: &Array1<f64>,
) -> Result<Array2<f64>> {
    let n = l_comp.nrows();
    let mut lhs = Array2::zeros((n, n));
    let mut rhs = Array2::zeros((n, n));
    for ((x, w), b_v) in views.iter().zip(w_all).zip(b_v_all) {
        let t = x.t().dot(w); // n x c
        let tt = t.t().to_owned(); // c x n
        let m_v = t.dot(&tt);
        rhs += &(&m_v - &t.dot(&tt.dot(b_v)));
        lhs += &m_v;
    }
    lhs.scaled_add(alpha, l_comp);
    for i in 0..n {
        lhs[[i, i]] += theta * d_b[i];
    }
    solve_spd(&lhs, &rhs)
}

/// View-specific representation update, the per-view analogue of [`update_b`]:
///
/// ```text
/// [ M_v + alpha L_v + eta_v^r D_v ] B_v = M_v (I - B)
/// ```
pub fn update_b_v(
    x: &Array2<f64>,
    w: &Array2<f64>,
    b: &Array2<f64>,
    l_view: &Array2<f64>,
    alpha: f64,
    eta: f64,
    r: f64,
    d_bv: &Array1<f64>,
    eps: f64,
) -> Result<Array2<f64>> {
    let n = b.nrows();
    let t = x.t().dot(w);
    let tt = t.t().to_owned();
    let m_v = t.dot(&tt);
    let rhs = &m_v - &t.dot(&tt.dot(b));
    let eta_r = eta.max(eps).powf(r);
    let mut lhs = m_v;
    lhs.scaled_add(alpha, l_view);
    for i in 0..n {
        lhs[[i, i]] += eta_r * d_bv[i];
    }
    solve_spd(&lhs, &rhs)
}

/// Closed-form simplex weights `w_v ∝ a_v^(1/(1-r))` minimizing
/// `sum_v w_v^r a_v` subject to `sum_v w_v = 1`, `w_v >= 0`. Scores are
/// floored at `eps` so a vanishing term cannot produce infinities.
pub fn sharpness_weights(scores: &[f64], r: f64, eps: f64) -> Array1<f64> {
    let exponent = 1.0 / (1.0 - r);
    let powered: Vec<f64> = scores.iter().map(|&a| a.max(eps).powf(exponent)).collect();
    let total: f64 = powered.iter().sum();
    if total.is_finite() && total > 0.0 {
        Array1::from_iter(powered.iter().map(|&p| p / total))
    } else {
        Array1::from_elem(scores.len(), 1.0 / scores.len() as f64)
    }
}

/// Adaptive view-weight update: each family has the closed form of
/// [`sharpness_weights`] with its own score, and each sums to one.
pub fn update_weights(
    w_all: &[Array2<f64>],
    b_v_all: &[Array2<f64>],
    s: &SimilarityGraph,
    s_views: &[SimilarityGraph],
    r: f64,
    eps: f64,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let w_scores: Vec<f64> = w_all.iter().map(l21_norm).collect();
    let bv_scores: Vec<f64> = b_v_all.iter().map(l21_norm).collect();
    let s_scores: Vec<f64> = s_views
        .iter()
        .map(|g| frob_sq_diff(s.matrix(), g.matrix()))
        .collect();
    (
        sharpness_weights(&w_scores, r, eps),
        sharpness_weights(&bv_scores, r, eps),
        sharpness_weights(&s_scores, r, eps),
    )
}

fn objective_terms(
    views: &[Array2<f64>],
    w_all: &[Array2<f64>],
    b: &Array2<f64>,
    b_v_all: &[Array2<f64>],
    s: &SimilarityGraph,
    s_views: &[SimilarityGraph],
    lambda: &Array1<f64>,
    eta: &Array1<f64>,
    gamma: &Array1<f64>,
    hp: &Hyperparams,
    variant: Variant,
) -> ObjectiveTerms {
    let n = b.nrows();
    let graph_terms = variant != Variant::NoGraph;
    let consensus_terms = variant == Variant::Full;
    let mut reconstruction = 0.0;
    let mut w_sparsity = 0.0;
    let mut bv_sparsity = 0.0;
    let mut specific_graph = 0.0;
    let mut graph_fit = 0.0;
    for (v, x) in views.iter().enumerate() {
        let z = w_all[v].t().dot(x); // c x n
        let mut res = &z - &z.dot(b);
        res -= &z.dot(&b_v_all[v]);
        reconstruction += res.iter().map(|e| e * e).sum::<f64>();
        w_sparsity += lambda[v].powf(hp.r) * l21_norm(&w_all[v]);
        bv_sparsity += eta[v].powf(hp.r) * l21_norm(&b_v_all[v]);
        if graph_terms {
            let dists = pairwise_sq_row_dists(&b_v_all[v]);
            let sv = s_views[v].matrix();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += dists[[i, j]] * sv[[i, j]];
                }
            }
            specific_graph += 0.5 * hp.alpha * acc;
        }
        if consensus_terms {
            graph_fit += gamma[v].powf(hp.r) * frob_sq_diff(s.matrix(), s_views[v].matrix());
        }
    }
    let b_sparsity = hp.theta * l21_norm(b);
    let diversity = if consensus_terms {
        let dists = pairwise_sq_row_dists(b);
        let sm = s.matrix();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += dists[[i, j]] * (1.0 - sm[[i, j]]);
                }
            }
        }
        0.5 * hp.alpha * acc
    } else {
        0.0
    };
    let total = reconstruction
        + w_sparsity
        + b_sparsity
        + bv_sparsity
        + diversity
        + specific_graph
        + graph_fit;
    ObjectiveTerms {
        total,
        reconstruction,
        w_sparsity,
        b_sparsity,
        bv_sparsity,
        diversity,
        specific_graph,
        graph_fit,
    }
}

/// Objective breakdown for an arbitrary state, using the variant the state
/// was fitted with.
pub fn objective(state: &ModelState, ds: &MultiViewDataset, hp: &Hyperparams) -> ObjectiveTerms {
    objective_terms(
        ds.views(),
        &state.w,
        &state.b,
        &state.b_views,
        &state.s,
        &state.s_views,
        &state.lambda,
        &state.eta,
        &state.gamma,
        hp,
        state.variant,
    )
}

/// Fits the full model. See [`fit_variant`].
pub fn fit(ds: &MultiViewDataset, hp: &Hyperparams) -> Result<(ModelState, ConvergenceTrace)> {
    fit_variant(ds, hp, Variant::Full)
}

/// Runs the alternating block cycle `W -> B -> B_v -> S -> weights` until the
/// relative objective change drops below `hp.tol` or `hp.max_iter` cycles.
///
/// Initialization: per-view kNN graphs (fixed throughout), `S` as their
/// average, `B` and each `B_v` i.i.d. uniform on `[0, 1/n]` from the seeded
/// stream, all weight families uniform, and the first `W` reweighting
/// diagonal as the identity.
pub fn fit_variant(
    ds: &MultiViewDataset,
    hp: &Hyperparams,
    variant: Variant,
) -> Result<(ModelState, ConvergenceTrace)> {
    hp.validate()?;
    let views = ds.views();
    let n = ds.n_instances();
    let n_views = views.len();
    let c = hp.resolve_c(ds)?;
    let s_views: Vec<SimilarityGraph> = views
        .iter()
        .map(|x| knn_graph(x, hp.k))
        .collect::<Result<_>>()?;
    let l_views: Vec<Array2<f64>> = s_views.iter().map(|g| laplacian(g.matrix())).collect();
    let mut s_matrix = Array2::zeros((n, n));
    for g in &s_views {
        s_matrix += g.matrix();
    }
    s_matrix.mapv_inplace(|v| v / n_views as f64);
    let mut s = SimilarityGraph::new(s_matrix, GraphKind::Consensus)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let init_scale = 1.0 / n as f64;
    let mut b = if variant == Variant::NoConsensus {
        Array2::zeros((n, n))
    } else {
        Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() * init_scale)
    };
    let mut b_views: Vec<Array2<f64>> = (0..n_views)
        .map(|_| Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() * init_scale))
        .collect();
    let mut w: Vec<Array2<f64>> = views.iter().map(|x| Array2::zeros((x.nrows(), c))).collect();
    let uniform = Array1::from_elem(n_views, 1.0 / n_views as f64);
    let mut lambda = uniform.clone();
    let mut eta = uniform.clone();
    let mut gamma = uniform;

    let zero_laplacian = Array2::zeros((n, n));
    let graph_alpha = match variant {
        Variant::NoGraph => 0.0,
        _ => hp.alpha,
    };

    let initial = objective_terms(
        views, &w, &b, &b_views, &s, &s_views, &lambda, &eta, &gamma, hp, variant,
    );
    let mut f_prev = initial.total;
    let mut records = Vec::new();
    let mut converged = false;

    for iter in 1..=hp.max_iter {
        let mut w_delta: f64 = 0.0;
        for v in 0..n_views {
            let d_w = if iter == 1 {
                Array1::ones(views[v].nrows())
            } else {
                row_weight_diag(&w[v], hp.epsilon)
            };
            let next = update_w(
                &views[v], &b, &b_views[v], lambda[v], hp.r, c, &d_w, hp.epsilon,
            )?;
            // The eigenvector-target regression is the one block without a
            // descent guarantee for the joint objective, so from the second
            // cycle on a candidate is kept only if it does not increase the
            // terms it touches. Iteration 1 always accepts: the incumbent is
            // the all-zero init, which those terms trivially favor.
            let lam_r = lambda[v].max(hp.epsilon).powf(hp.r);
            let accept = iter == 1 || {
                let incumbent = w_stage_value(&views[v], &w[v], &b, &b_views[v], lam_r);
                let candidate = w_stage_value(&views[v], &next, &b, &b_views[v], lam_r);
                candidate <= incumbent * (1.0 + 1e-12) + 1e-300
            };
            if accept {
                w_delta = w_delta.max(max_abs_diff(&next, &w[v]));
                w[v] = next;
            }
        }

        let b_delta = if variant == Variant::NoConsensus {
            0.0
        } else {
            let l_comp = if variant == Variant::Full {
                complement_laplacian(&s)
            } else {
                zero_laplacian.clone()
            };
            let d_b = row_weight_diag(&b, hp.epsilon);
            let next = update_b(views, &w, &b_views, &l_comp, graph_alpha, hp.theta, &d_b)?;
            let delta = max_abs_diff(&next, &b);
            b = next;
            delta
        };

        let mut bv_delta: f64 = 0.0;
        for v in 0..n_views {
            let l_view = if variant == Variant::NoGraph {
                &zero_laplacian
            } else {
                &l_views[v]
            };
            let d_bv = row_weight_diag(&b_views[v], hp.epsilon);
            let next = update_b_v(
                &views[v], &w[v], &b, l_view, graph_alpha, eta[v], hp.r, &d_bv, hp.epsilon,
            )?;
            bv_delta = bv_delta.max(max_abs_diff(&next, &b_views[v]));
            b_views[v] = next;
        }

        let s_delta = if variant == Variant::Full {
            let next = update_consensus_graph(&s_views, &b, hp.alpha, gamma.view(), hp.r, hp.epsilon)?;
            let delta = max_abs_diff(next.matrix(), s.matrix());
            s = next;
            delta
        } else {
            0.0
        };

        let (new_lambda, new_eta, new_gamma) =
            update_weights(&w, &b_views, &s, &s_views, hp.r, hp.epsilon);
        lambda = new_lambda;
        eta = new_eta;
        if variant == Variant::Full {
            gamma = new_gamma;
        }

        let terms = objective_terms(
            views, &w, &b, &b_views, &s, &s_views, &lambda, &eta, &gamma, hp, variant,
        );
        if !terms.total.is_finite() {
            return Err(CoselectError::Numerical(format!(
                "objective became non-finite at iteration {iter} (previous value {f_prev:.6e})"
            )));
        }
        let rel_change = (terms.total - f_prev).abs() / f_prev.abs().max(hp.epsilon);
        records.push(IterationRecord {
            iter,
            terms,
            rel_change,
            w_delta,
            b_delta,
            bv_delta,
            s_delta,
        });
        f_prev = terms.total;
        if rel_change < hp.tol {
            converged = true;
            break;
        }
    }

    let state = ModelState {
        w,
        b,
        b_views,
        s,
        s_views,
        lambda,
        eta,
        gamma,
        variant,
    };
    let trace = ConvergenceTrace {
        initial_objective: initial.total,
        records,
        converged,
    };
    Ok((state, trace))
}
