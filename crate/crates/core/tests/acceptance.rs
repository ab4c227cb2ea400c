//! Release gates. Each test checks one numbered criterion and prints a
//! single `criterion N: PASS/FAIL` line (visible with `--nocapture`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coselect::dataset::{synthesize, MultiViewDataset, NormalizeMode};
use coselect::eval::{evaluate, Classifier};
use coselect::graph::{
    complement_laplacian, knn_graph, laplacian, project_to_simplex, GraphKind, SimilarityGraph,
};
use coselect::selection::select;
use coselect::solver::{
    fit, fit_variant, row_weight_diag, sharpness_weights, update_b, update_b_v, update_w_direct,
    update_w_woodbury, Hyperparams, Variant,
};

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:2}: {status} - {name} ({detail})");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// Twenty seeded synthetic problems spanning the supported shapes:
/// n in [30, 120], two or three views, view dims <= 60.
fn suite() -> Vec<(MultiViewDataset, Hyperparams)> {
    (0..20u64)
        .map(|seed| {
            let s = seed as usize;
            let n = 30 + (s * 17) % 91;
            let mut dims = vec![10 + (s * 3) % 51, 8 + (s * 5) % 40];
            if s % 2 == 1 {
                dims.push(6 + (s * 7) % 30);
            }
            let classes = 2 + s % 4;
            let noise = 0.3 + 0.1 * (s % 10) as f64;
            let ds = synthesize(n, &dims, classes, noise, seed)
                .unwrap()
                .normalize(NormalizeMode::Zscore);
            let hp = Hyperparams {
                k: 5,
                tol: 1e-6,
                max_iter: 40,
                seed,
                ..Hyperparams::default()
            };
            (ds, hp)
        })
        .collect()
}

#[test]
fn criterion_01_objective_descends_on_twenty_seeds() {
    let start = Instant::now();
    let mut worst_rise = f64::NEG_INFINITY;
    for (ds, hp) in suite() {
        let (_, trace) = fit(&ds, &hp).unwrap();
        // Cycle values only: the pre-cycle value sits at the trivial minimum
        // of the projection terms (W starts at zero), so the contract is
        // non-increasing from the first recorded cycle onward.
        for pair in trace.records.windows(2) {
            let (prev, next) = (pair[0].terms.total, pair[1].terms.total);
            let rise = (next - prev) / prev.abs().max(1e-300);
            worst_rise = worst_rise.max(rise);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_rise <= 1e-6 && elapsed < 120.0;
    verdict(
        1,
        "monotone descent on 20 seeds",
        pass,
        &format!("worst relative rise {worst_rise:.3e}, {elapsed:.1}s for 20 fits"),
    );
}

#[test]
fn criterion_02_convergence_within_thirty_iterations() {
    let mut worst_iter = 0usize;
    let mut all_fast = true;
    for (ds, hp) in suite() {
        let (_, trace) = fit(&ds, &hp).unwrap();
        match trace
            .records
            .iter()
            .find(|rec| rec.rel_change < 1e-4)
            .map(|rec| rec.iter)
        {
            Some(iter) if iter <= 30 => worst_iter = worst_iter.max(iter),
            _ => all_fast = false,
        }
    }
    verdict(
        2,
        "relative change < 1e-4 within 30 iterations",
        all_fast,
        &format!("slowest problem needed {worst_iter} iterations"),
    );
}

/// Exact sort-based simplex projection (independent of the Newton path).
fn oracle_simplex(q: &[f64]) -> Vec<f64> {
    let mut sorted = q.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (1.0 - cumsum) / (j + 1) as f64;
        if u + candidate > 0.0 {
            tau = candidate;
        }
    }
    q.iter().map(|&v| (v + tau).max(0.0)).collect()
}

#[test]
fn criterion_03_simplex_projection_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = 1 + rng.gen_range(0..50);
        let scale = 10f64.powi(rng.gen_range(-2..3));
        let q: Array1<f64> = if case % 25 == 0 {
            Array1::from_elem(n, rng.gen_range(-1.0..1.0))
        } else {
            Array1::from_shape_fn(n, |_| rng.gen_range(-scale..scale))
        };
        let newton = project_to_simplex(q.view());
        let exact = oracle_simplex(q.as_slice().unwrap());
        for (a, b) in newton.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        3,
        "Newton simplex projection vs sort oracle on 1000 vectors",
        worst <= 1e-8,
        &format!("max abs deviation {worst:.3e}"),
    );
}

fn random_problem(
    rng: &mut ChaCha8Rng,
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Array2<f64>, Vec<Array2<f64>>, usize) {
    let n = 4 + rng.gen_range(0..12); // n <= 15
    let views: Vec<Array2<f64>> = (0..2)
        .map(|_| {
            let d = 3 + rng.gen_range(0..8);
            Array2::from_shape_fn((d, n), |_| rng.gen_range(-1.0..1.0))
        })
        .collect();
    let w: Vec<Array2<f64>> = views
        .iter()
        .map(|x| {
            let c = 2.min(x.nrows());
            Array2::from_shape_fn((x.nrows(), c), |_| rng.gen_range(-1.0..1.0))
        })
        .collect();
    let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..0.2));
    let b_views: Vec<Array2<f64>> = (0..2)
        .map(|_| Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..0.2)))
        .collect();
    (views, w, b, b_views, n)
}

#[test]
fn criterion_04_block_updates_satisfy_their_stationarity_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (views, w, b, b_views, n) = random_problem(&mut rng);
        let k = 3.min(n - 1);
        let graphs: Vec<SimilarityGraph> = views
            .iter()
            .map(|x| knn_graph(x, k).unwrap())
            .collect();
        let alpha = rng.gen_range(0.01..0.5);
        let theta = rng.gen_range(0.1..2.0);
        let eta = rng.gen_range(0.1..0.9);
        let r = 2.0 + (rng.gen_range(0..3)) as f64;

        // Consistent representation: residual of
        // sum_v M_v (B' + B_v - I) + alpha L_comp B' + theta D_B B' = 0.
        let l_comp = complement_laplacian(&graphs[0]);
        let d_b = row_weight_diag(&b, 1e-8);
        let b_new = update_b(&views, &w, &b_views, &l_comp, alpha, theta, &d_b).unwrap();
        let eye: Array2<f64> = Array2::eye(n);
        let mut residual: Array2<f64> = Array2::zeros((n, n));
        for ((x, wv), bv) in views.iter().zip(&w).zip(&b_views) {
            let t = x.t().dot(wv);
            let m = t.dot(&t.t());
            residual += &m.dot(&(&b_new + bv - &eye));
        }
        residual += &l_comp.dot(&b_new).mapv(|v| v * alpha);
        for i in 0..n {
            for j in 0..n {
                residual[[i, j]] += theta * d_b[i] * b_new[[i, j]];
            }
        }
        worst = worst.max(residual.iter().fold(0.0f64, |m, v| m.max(v.abs())));

        // View-specific representation: residual of
        // M (B_v' + B - I) + alpha L_v B_v' + eta^r D B_v' = 0.
        let l_view = laplacian(graphs[1].matrix());
        let d_bv = row_weight_diag(&b_views[1], 1e-8);
        let bv_new = update_b_v(
            &views[1], &w[1], &b, &l_view, alpha, eta, r, &d_bv, 1e-8,
        )
        .unwrap();
        let t = views[1].t().dot(&w[1]);
        let m = t.dot(&t.t());
        let mut res_v = m.dot(&(&bv_new + &b - &eye));
        res_v += &l_view.dot(&bv_new).mapv(|v| v * alpha);
        let eta_r = eta.max(1e-8).powf(r);
        for i in 0..n {
            for j in 0..n {
                res_v[[i, j]] += eta_r * d_bv[i] * bv_new[[i, j]];
            }
        }
        worst = worst.max(res_v.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    verdict(
        4,
        "B and B_v updates solve their stationarity systems",
        worst < 1e-6,
        &format!("max residual {worst:.3e} over 100 systems"),
    );
}

#[test]
fn criterion_05_woodbury_path_matches_direct_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let (mut tall, mut wide) = (0usize, 0usize);
    for case in 0..50 {
        let n: usize = 5 + rng.gen_range(0..16);
        let d = if case % 2 == 0 {
            tall += 1;
            n + 1 + rng.gen_range(0..25) // d > n
        } else {
            wide += 1;
            1 + rng.gen_range(0..n.saturating_sub(1).max(1)) // d < n
        };
        let x = Array2::from_shape_fn((d, n), |_| rng.gen_range(-1.0..1.0));
        let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..0.15));
        let b_v = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..0.15));
        let c = 1 + rng.gen_range(0..3.min(d).min(n));
        let lambda = rng.gen_range(0.1..0.9);
        let r = 2.0;
        let d_w = Array1::from_shape_fn(d, |_| rng.gen_range(0.2..3.0));
        let direct = update_w_direct(&x, &b, &b_v, lambda, r, c, &d_w, 1e-8).unwrap();
        let wood = update_w_woodbury(&x, &b, &b_v, lambda, r, c, &d_w, 1e-8).unwrap();
        let diff = (&direct - &wood).mapv(|v| v * v).sum().sqrt();
        let norm = direct.mapv(|v| v * v).sum().sqrt().max(1e-300);
        worst = worst.max(diff / norm);
    }
    verdict(
        5,
        "Woodbury and direct projection solves agree",
        worst <= 1e-6 && tall > 0 && wide > 0,
        &format!("max relative gap {worst:.3e} ({tall} tall, {wide} wide cases)"),
    );
}

#[test]
fn criterion_06_weight_closed_forms_beat_random_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut beaten_by = 0usize;
    let mut worst_margin = f64::INFINITY;
    for tuple in 0..100 {
        let v = 2 + tuple % 4;
        let r = (2 + tuple % 3) as f64;
        let scores: Vec<f64> = (0..v).map(|_| rng.gen_range(0.05..5.0)).collect();
        let w_star = sharpness_weights(&scores, r, 1e-8);
        let value = |w: &[f64]| -> f64 {
            w.iter().zip(&scores).map(|(&wv, &a)| wv.powf(r) * a).sum()
        };
        let star = value(w_star.as_slice().unwrap());
        for _ in 0..10_000 {
            // Dirichlet(1) sample: normalized exponentials.
            let g: Vec<f64> = (0..v).map(|_| -rng.gen_range(1e-12..1.0f64).ln()).collect();
            let total: f64 = g.iter().sum();
            let cand: Vec<f64> = g.iter().map(|x| x / total).collect();
            let cv = value(&cand);
            worst_margin = worst_margin.min(cv - star);
            if star > cv * (1.0 + 1e-10) + 1e-15 {
                beaten_by += 1;
            }
        }
    }
    verdict(
        6,
        "closed-form weights beat 10k random simplex points",
        beaten_by == 0,
        &format!("beaten {beaten_by} times; closest candidate margin {worst_margin:.3e}"),
    );
}

#[test]
fn criterion_07_laplacian_trace_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let n = 3 + rng.gen_range(0..18); // n <= 20
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            let raw = Array1::from_shape_fn(n, |j| {
                if j == i { f64::NEG_INFINITY } else { rng.gen_range(-1.0..1.0) }
            });
            // Random simplex row with a zero diagonal.
            let off: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| raw[j]).collect();
            let projected = project_to_simplex(Array1::from_vec(off).view());
            let mut col = 0;
            for j in 0..n {
                if j != i {
                    s[[i, j]] = projected[col];
                    col += 1;
                }
            }
        }
        let graph = SimilarityGraph::new(s, GraphKind::Consensus).unwrap();
        let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(-0.5..0.5));
        let alpha = 0.7;

        let mut pair_dists = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for t in 0..n {
                    let diff = b[[i, t]] - b[[j, t]];
                    acc += diff * diff;
                }
                pair_dists[[i, j]] = acc;
            }
        }
        // Graph-weighted form against alpha * Tr(B^T L B).
        let mut direct_sum = 0.0;
        let mut comp_sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                direct_sum += graph.matrix()[[i, j]] * pair_dists[[i, j]];
                if i != j {
                    comp_sum += (1.0 - graph.matrix()[[i, j]]) * pair_dists[[i, j]];
                }
            }
        }
        direct_sum *= 0.5 * alpha;
        comp_sum *= 0.5 * alpha;
        let l = laplacian(graph.matrix());
        let l_comp = complement_laplacian(&graph);
        let trace_direct = alpha * b.t().dot(&l.dot(&b)).diag().sum();
        let trace_comp = alpha * b.t().dot(&l_comp.dot(&b)).diag().sum();
        for (sum, tr) in [(direct_sum, trace_direct), (comp_sum, trace_comp)] {
            let rel = (sum - tr).abs() / sum.abs().max(1e-300);
            worst = worst.max(rel);
        }
    }
    verdict(
        7,
        "double sums equal Laplacian traces",
        worst <= 1e-8,
        &format!("max relative gap {worst:.3e}"),
    );
}

#[test]
fn criterion_08_ablation_ordering_over_five_seeds() {
    let mut means = [0.0f64; 3];
    for (vi, variant) in [Variant::Full, Variant::NoGraph, Variant::NoConsensus]
        .into_iter()
        .enumerate()
    {
        for seed in 0..5u64 {
            let ds = synthesize(90, &[20, 15], 3, 2.0, seed)
                .unwrap()
                .normalize(NormalizeMode::Zscore);
            let hp = Hyperparams { seed, ..Hyperparams::default() };
            let (state, _) = fit_variant(&ds, &hp, variant).unwrap();
            let sel = select(&state, 0.3, 0.2, hp.epsilon).unwrap();
            means[vi] += evaluate(&ds, &sel, Classifier::OneNn).unwrap().acc;
        }
        means[vi] /= 5.0;
    }
    let pass = means[0] >= means[1] && means[1] >= means[2] - 0.02;
    verdict(
        8,
        "ablation accuracy ordering full >= I >= II - 0.02",
        pass,
        &format!(
            "full {:.4}, no-graph {:.4}, no-consensus {:.4}",
            means[0], means[1], means[2]
        ),
    );
}

#[test]
fn criterion_09_zero_noise_data_scores_perfectly() {
    let mut all_perfect = true;
    let mut detail = String::new();
    for seed in 0..4u64 {
        let ds = synthesize(24, &[10, 8], 3, 0.0, seed)
            .unwrap()
            .normalize(NormalizeMode::Zscore);
        let hp = Hyperparams { seed, ..Hyperparams::default() };
        let (state, _) = fit(&ds, &hp).unwrap();
        let sel = select(&state, 0.5, 0.5, hp.epsilon).unwrap();
        let report = evaluate(&ds, &sel, Classifier::OneNn).unwrap();
        if report.acc != 1.0 || report.f1 != 1.0 {
            all_perfect = false;
        }
        detail.push_str(&format!("seed {seed}: acc {} f1 {}; ", report.acc, report.f1));
    }
    verdict(
        9,
        "zero-noise separable data evaluates to ACC = F1 = 1.0",
        all_perfect,
        detail.trim_end_matches("; "),
    );
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn criterion_10_cli_replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.cfg"),
        "synth_n = 20\nsynth_view_dims = 7,5\nsynth_classes = 2\nsynth_noise = 0.5\n\
         k = 3\nseed = 13\nfeature_ratio = 0.4\ninstance_ratio = 0.3\n\
         feature_ratios = 0.2,0.4\ninstance_ratios = 0.3\nrepeats = 2\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_coselect"))
            .current_dir(tmp.path())
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["eval", "--config", "run.cfg", "--out", "run"]);
    let first = files_under(&tmp.path().join("run"));
    run(&["eval", "--config", "run.cfg", "--out", "run"]);
    let second = files_under(&tmp.path().join("run"));
    run(&["sweep", "--config", "run.cfg", "--out", "sw", "--jobs", "1"]);
    let sweep1 = std::fs::read(tmp.path().join("sw/sweep.csv")).unwrap();
    run(&["sweep", "--config", "run.cfg", "--out", "sw", "--jobs", "4"]);
    let sweep2 = std::fs::read(tmp.path().join("sw/sweep.csv")).unwrap();

    let mut identical = first.len() == second.len() && !first.is_empty();
    for (name, bytes) in &first {
        if second.get(name) != Some(bytes) {
            identical = false;
        }
    }
    let sweep_stable = sweep1 == sweep2;
    verdict(
        10,
        "CLI replay reproduces artifacts byte-for-byte",
        identical && sweep_stable,
        &format!(
            "{} eval artifacts compared, sweep stable across job counts: {sweep_stable}",
            first.len()
        ),
    );
}
