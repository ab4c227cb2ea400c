//! Scoring and ranking of instances and features, and ratio-based selection.
//!
//! Instance importance is the consistent-row energy plus eta-weighted inverse
//! view-specific energies:
//!
//! ```text
//! score_i = |b_i|^2 + sum_v eta_v / (|b_i^v|^2 + eps)
//! ```
//!
//! so instances that carry shared reconstruction structure (large consistent
//! rows, small view-specific rows) rank first. The `eps` guard keeps rows the
//! optimizer zeroed out from scoring as infinite. Feature importance in view
//! `v` is the row norm of the learned projection `W_v`; features compete in
//! one global ranking across views unless per-view normalization is asked
//! for.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{CoselectError, Result};
use crate::solver::ModelState;

/// Per-instance importance scores. `eta` must hold one weight per view.
pub fn mvis_scores(
    b: &Array2<f64>,
    b_views: &[Array2<f64>],
    eta: ArrayView1<f64>,
    eps: f64,
) -> Vec<f64> {
    let n = b.nrows();
    let mut scores = vec![0.0; n];
    for i in 0..n {
        scores[i] = b.row(i).iter().map(|v| v * v).sum::<f64>();
    }
    for (v, bv) in b_views.iter().enumerate() {
        for i in 0..n {
            let sq: f64 = bv.row(i).iter().map(|e| e * e).sum();
            scores[i] += eta[v] / (sq + eps);
        }
    }
    scores
}

/// Per-view feature scores: row l2 norms of each projection matrix.
pub fn feature_scores(w_all: &[Array2<f64>]) -> Vec<Vec<f64>> {
    w_all
        .iter()
        .map(|w| {
            w.rows()
                .into_iter()
                .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// Indices `0..scores.len()` sorted by descending score, ties toward the
/// smaller index.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Everything a selection run produces: full score vectors, complete
/// rankings, and the subsets cut at the requested ratios.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub instance_scores: Vec<f64>,
    /// One score vector per view.
    pub feature_scores: Vec<Vec<f64>>,
    /// All instances, best first.
    pub instance_ranking: Vec<usize>,
    /// All `(view, feature)` pairs, best first.
    pub feature_ranking: Vec<(usize, usize)>,
    /// Top `ceil(instance_ratio * n)` of the ranking, in rank order.
    pub selected_instances: Vec<usize>,
    /// Per view, the selected features in rank order.
    pub selected_features: Vec<Vec<usize>>,
    pub feature_ratio: f64,
    pub instance_ratio: f64,
}

impl SelectionResult {
    pub fn n_selected_features(&self) -> usize {
        self.selected_features.iter().map(Vec::len).sum()
    }
}

fn check_ratio(name: &str, ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) || !ratio.is_finite() {
        return Err(CoselectError::InvalidParam(format!(
            "{name} must lie in (0, 1], got {ratio}"
        )));
    }
    Ok(())
}

fn ceil_count(ratio: f64, total: usize) -> usize {
    ((ratio * total as f64).ceil() as usize).clamp(1, total)
}

/// Ranks and selects with the default global feature ranking.
pub fn select(
    state: &ModelState,
    feature_ratio: f64,
    instance_ratio: f64,
    eps: f64,
) -> Result<SelectionResult> {
    select_with_options(state, feature_ratio, instance_ratio, eps, false)
}

/// As [`select`]; `per_view_normalize` rescales each view's feature scores by
/// the view maximum before the global ranking, so views with small projection
/// norms still place features.
pub fn select_with_options(
    state: &ModelState,
    feature_ratio: f64,
    instance_ratio: f64,
    eps: f64,
    per_view_normalize: bool,
) -> Result<SelectionResult> {
    check_ratio("feature_ratio", feature_ratio)?;
    check_ratio("instance_ratio", instance_ratio)?;
    let n = state.n_instances();
    let instance_scores = mvis_scores(&state.b, &state.b_views, state.eta.view(), eps);
    let instance_ranking = rank_desc(&instance_scores);
    let m = ceil_count(instance_ratio, n);
    let selected_instances = instance_ranking[..m].to_vec();

    let feature_scores_raw = feature_scores(&state.w);
    let ranking_scores: Vec<Vec<f64>> = if per_view_normalize {
        feature_scores_raw
            .iter()
            .map(|scores| {
                let top = scores.iter().cloned().fold(0.0f64, f64::max);
                if top > 0.0 {
                    scores.iter().map(|s| s / top).collect()
                } else {
                    scores.clone()
                }
            })
            .collect()
    } else {
        feature_scores_raw.clone()
    };
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (v, scores) in ranking_scores.iter().enumerate() {
        for f in 0..scores.len() {
            pairs.push((v, f));
        }
    }
    pairs.sort_by(|&(va, fa), &(vb, fb)| {
        ranking_scores[vb][fb]
            .partial_cmp(&ranking_scores[va][fa])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((va, fa).cmp(&(vb, fb)))
    });
    let total: usize = ranking_scores.iter().map(Vec::len).sum();
    let l = ceil_count(feature_ratio, total);
    let mut selected_features: Vec<Vec<usize>> = vec![Vec::new(); state.n_views()];
    for &(v, f) in &pairs[..l] {
        selected_features[v].push(f);
    }
    Ok(SelectionResult {
        instance_scores,
        feature_scores: feature_scores_raw,
        instance_ranking,
        feature_ranking: pairs,
        selected_instances,
        selected_features,
        feature_ratio,
        instance_ratio,
    })
}
