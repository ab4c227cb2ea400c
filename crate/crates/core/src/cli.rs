//! Config-file driven front end shared by the `coselect` binary.
//!
//! A run is described by a key-value text file:
//!
//! ```text
//! # either a dataset manifest ...
//! dataset = data/manifest.txt
//! # ... or a synthesis spec
//! synth_n = 90
//! synth_view_dims = 25,18
//! synth_classes = 3
//! synth_noise = 0.4
//!
//! normalize = zscore
//! r = 2
//! theta = 1
//! alpha = 1
//! k = 5
//! seed = 7
//! variant = full
//! feature_ratio = 0.3
//! instance_ratio = 0.2
//! feature_ratios = 0.1,0.2,0.3,0.4,0.5
//! instance_ratios = 0.1,0.2,0.3,0.4,0.5
//! classifier = one-nn
//! repeats = 1
//! out = runs/demo
//! jobs = 1
//! ```
//!
//! Every command echoes its fully resolved config to `config_echo.txt` in the
//! output directory; that echo is itself a valid config file and replays the
//! run byte-for-byte. Numeric CSV artifacts are formatted with 12 significant
//! digits, files are written atomically (temp + rename), and nothing
//! timestamped is ever emitted, so reruns are directly comparable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::{
    atomic_write, load_dataset_path, save_dataset, synthesize, MultiViewDataset, NormalizeMode,
};
use crate::error::{CoselectError, Result};
use crate::eval::{evaluate, ratio_sweep, Classifier, EvalReport, SweepRow};
use crate::selection::{select_with_options, SelectionResult};
use crate::solver::{fit_variant, ConvergenceTrace, Hyperparams, ModelState, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub view_dims: Vec<usize>,
    pub classes: usize,
    pub noise: f64,
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Manifest path; mutually exclusive with `synth`.
    pub dataset: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub normalize: NormalizeMode,
    pub hp: Hyperparams,
    pub variant: Variant,
    pub feature_ratio: f64,
    pub instance_ratio: f64,
    /// Grid used by `sweep`; defaults to the 10%..50% range in 10% steps.
    pub feature_ratios: Vec<f64>,
    pub instance_ratios: Vec<f64>,
    pub classifier: Classifier,
    pub repeats: usize,
    pub per_view_normalize: bool,
    pub out: PathBuf,
    /// Worker threads for sweep/ablate; 0 lets the runtime pick.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            synth: None,
            normalize: NormalizeMode::Zscore,
            hp: Hyperparams::default(),
            variant: Variant::Full,
            feature_ratio: 0.3,
            instance_ratio: 0.3,
            feature_ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            instance_ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            classifier: Classifier::OneNn,
            repeats: 1,
            per_view_normalize: false,
            out: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

/// Command-line overrides applied after the file is parsed.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub variant: Option<Variant>,
    pub feature_ratio: Option<f64>,
    pub instance_ratio: Option<f64>,
    pub classifier: Option<Classifier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Fit,
    Select,
    Eval,
    Sweep,
    Ablate,
}

/// Joins `value` onto `base` when relative and makes it absolute, so echoed
/// configs replay identically from any working directory.
fn resolve_path(base: &Path, value: &Path) -> Result<PathBuf> {
    let joined = if value.is_absolute() {
        value.to_path_buf()
    } else {
        base.join(value)
    };
    std::path::absolute(&joined).map_err(|e| CoselectError::io(&joined, e))
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| CoselectError::Config(format!("bad {what} entry {:?}", part.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn parse(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CoselectError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::parse_str(&text, base, path)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse_str(text: &str, base: &Path, origin: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut synth: BTreeMap<&str, String> = BTreeMap::new();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoselectError::parse(origin, idx + 1, format!("expected key = value, got {line:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(CoselectError::parse(
                    origin,
                    idx + 1,
                    format!("duplicate key {key:?}"),
                ));
            }
            seen.push(key.to_string());
            let bad = |what: &str| {
                CoselectError::parse(origin, idx + 1, format!("bad {what} value {value:?}"))
            };
            match key {
                "dataset" => cfg.dataset = Some(resolve_path(base, Path::new(value))?),
                "synth_n" | "synth_view_dims" | "synth_classes" | "synth_noise" => {
                    synth.insert(key, value.to_string());
                }
                "normalize" => cfg.normalize = value.parse()?,
                "r" => cfg.hp.r = value.parse().map_err(|_| bad("r"))?,
                "theta" => cfg.hp.theta = value.parse().map_err(|_| bad("theta"))?,
                "alpha" => cfg.hp.alpha = value.parse().map_err(|_| bad("alpha"))?,
                "c" => cfg.hp.c = Some(value.parse().map_err(|_| bad("c"))?),
                "k" => cfg.hp.k = value.parse().map_err(|_| bad("k"))?,
                "epsilon" => cfg.hp.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
                "tol" => cfg.hp.tol = value.parse().map_err(|_| bad("tol"))?,
                "max_iter" => cfg.hp.max_iter = value.parse().map_err(|_| bad("max_iter"))?,
                "seed" => cfg.hp.seed = value.parse().map_err(|_| bad("seed"))?,
                "variant" => cfg.variant = value.parse()?,
                "feature_ratio" => {
                    cfg.feature_ratio = value.parse().map_err(|_| bad("feature_ratio"))?
                }
                "instance_ratio" => {
                    cfg.instance_ratio = value.parse().map_err(|_| bad("instance_ratio"))?
                }
                "feature_ratios" => cfg.feature_ratios = parse_list(value, "feature_ratios")?,
                "instance_ratios" => cfg.instance_ratios = parse_list(value, "instance_ratios")?,
                "classifier" => cfg.classifier = value.parse()?,
                "repeats" => cfg.repeats = value.parse().map_err(|_| bad("repeats"))?,
                "per_view_normalize" => {
                    cfg.per_view_normalize = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad("per_view_normalize")),
                    }
                }
                "out" => cfg.out = resolve_path(base, Path::new(value))?,
                "jobs" => cfg.jobs = value.parse().map_err(|_| bad("jobs"))?,
                other => {
                    return Err(CoselectError::parse(
                        origin,
                        idx + 1,
                        format!("unknown config key {other:?}"),
                    ))
                }
            }
        }
        if !seen.iter().any(|k| k == "out") {
            cfg.out = resolve_path(base, &cfg.out)?;
        }
        if !synth.is_empty() {
            let get = |key: &str| -> Result<&String> {
                synth.get(key).ok_or_else(|| {
                    CoselectError::Config(format!("synthesis spec is missing {key}"))
                })
            };
            cfg.synth = Some(SynthSpec {
                n: get("synth_n")?
                    .parse()
                    .map_err(|_| CoselectError::Config("bad synth_n".into()))?,
                view_dims: parse_list(get("synth_view_dims")?, "synth_view_dims")?,
                classes: get("synth_classes")?
                    .parse()
                    .map_err(|_| CoselectError::Config("bad synth_classes".into()))?,
                noise: get("synth_noise")?
                    .parse()
                    .map_err(|_| CoselectError::Config("bad synth_noise".into()))?,
            });
        }
        match (&cfg.dataset, &cfg.synth) {
            (Some(_), Some(_)) => Err(CoselectError::Config(
                "config sets both dataset and a synthesis spec; pick one".into(),
            )),
            (None, None) => Err(CoselectError::Config(
                "config needs either dataset or a synthesis spec".into(),
            )),
            _ => Ok(cfg),
        }
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.hp.seed = seed;
        }
        if let Some(jobs) = o.jobs {
            self.jobs = jobs;
        }
        if let Some(variant) = o.variant {
            self.variant = variant;
        }
        if let Some(fr) = o.feature_ratio {
            self.feature_ratio = fr;
        }
        if let Some(ir) = o.instance_ratio {
            self.instance_ratio = ir;
        }
        if let Some(classifier) = o.classifier {
            self.classifier = classifier;
        }
    }

    /// The resolved config as a config file. Floats use shortest round-trip
    /// formatting, so parsing the echo reproduces this config exactly.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        if let Some(ds) = &self.dataset {
            out.push_str(&format!("dataset = {}\n", ds.display()));
        }
        if let Some(s) = &self.synth {
            out.push_str(&format!("synth_n = {}\n", s.n));
            let dims: Vec<String> = s.view_dims.iter().map(|d| d.to_string()).collect();
            out.push_str(&format!("synth_view_dims = {}\n", dims.join(",")));
            out.push_str(&format!("synth_classes = {}\n", s.classes));
            out.push_str(&format!("synth_noise = {}\n", s.noise));
        }
        out.push_str(&format!("normalize = {}\n", self.normalize));
        out.push_str(&format!("r = {}\n", self.hp.r));
        out.push_str(&format!("theta = {}\n", self.hp.theta));
        out.push_str(&format!("alpha = {}\n", self.hp.alpha));
        if let Some(c) = self.hp.c {
            out.push_str(&format!("c = {c}\n"));
        }
        out.push_str(&format!("k = {}\n", self.hp.k));
        out.push_str(&format!("epsilon = {}\n", self.hp.epsilon));
        out.push_str(&format!("tol = {}\n", self.hp.tol));
        out.push_str(&format!("max_iter = {}\n", self.hp.max_iter));
        out.push_str(&format!("seed = {}\n", self.hp.seed));
        out.push_str(&format!("variant = {}\n", self.variant));
        out.push_str(&format!("feature_ratio = {}\n", self.feature_ratio));
        out.push_str(&format!("instance_ratio = {}\n", self.instance_ratio));
        let fmt_list = |values: &[f64]| -> String {
            values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!("feature_ratios = {}\n", fmt_list(&self.feature_ratios)));
        out.push_str(&format!("instance_ratios = {}\n", fmt_list(&self.instance_ratios)));
        out.push_str(&format!("classifier = {}\n", self.classifier));
        out.push_str(&format!("repeats = {}\n", self.repeats));
        out.push_str(&format!("per_view_normalize = {}\n", self.per_view_normalize));
        out.push_str(&format!("out = {}\n", self.out.display()));
        out.push_str(&format!("jobs = {}\n", self.jobs));
        out
    }

    /// Loads or synthesizes the dataset and applies the configured
    /// normalization.
    pub fn load_data(&self) -> Result<MultiViewDataset> {
        let raw = match (&self.dataset, &self.synth) {
            (Some(path), None) => load_dataset_path(path)?,
            (None, Some(s)) => synthesize(s.n, &s.view_dims, s.classes, s.noise, self.hp.seed)?,
            _ => unreachable!("parse enforces exactly one data source"),
        };
        Ok(raw.normalize(self.normalize))
    }
}

/// 12 significant digits; the fixed format of every numeric CSV artifact.
fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

fn write_trace_csv(path: &Path, trace: &ConvergenceTrace) -> Result<()> {
    let mut out = String::from(
        "iter,objective,reconstruction,w_sparsity,b_sparsity,bv_sparsity,diversity,specific_graph,graph_fit,rel_change,w_delta,b_delta,bv_delta,s_delta\n",
    );
    for r in &trace.records {
        let t = &r.terms;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            sig(t.total),
            sig(t.reconstruction),
            sig(t.w_sparsity),
            sig(t.b_sparsity),
            sig(t.bv_sparsity),
            sig(t.diversity),
            sig(t.specific_graph),
            sig(t.graph_fit),
            sig(r.rel_change),
            sig(r.w_delta),
            sig(r.b_delta),
            sig(r.bv_delta),
            sig(r.s_delta),
        ));
    }
    atomic_write(path, &out)
}

#[derive(Serialize)]
struct ModelSummary {
    n: usize,
    n_views: usize,
    view_dims: Vec<usize>,
    c: usize,
    variant: String,
    iterations: usize,
    converged: bool,
    initial_objective: f64,
    final_objective: f64,
    lambda: Vec<f64>,
    eta: Vec<f64>,
    gamma: Vec<f64>,
}

fn write_model_summary(
    path: &Path,
    ds: &MultiViewDataset,
    cfg: &RunConfig,
    state: &ModelState,
    trace: &ConvergenceTrace,
) -> Result<()> {
    let summary = ModelSummary {
        n: ds.n_instances(),
        n_views: ds.n_views(),
        view_dims: ds.view_dims(),
        c: cfg.hp.resolve_c(ds)?,
        variant: state.variant.to_string(),
        iterations: trace.iterations(),
        converged: trace.converged,
        initial_objective: trace.initial_objective,
        final_objective: trace.final_objective(),
        lambda: state.lambda.to_vec(),
        eta: state.eta.to_vec(),
        gamma: state.gamma.to_vec(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CoselectError::Config(format!("serializing model summary: {e}")))?;
    atomic_write(path, &json)
}

fn write_rankings(out: &Path, sel: &SelectionResult) -> Result<()> {
    let mut inst = String::from("rank,instance,score,selected\n");
    let cut = sel.selected_instances.len();
    for (rank, &i) in sel.instance_ranking.iter().enumerate() {
        inst.push_str(&format!(
            "{},{},{},{}\n",
            rank,
            i,
            sig(sel.instance_scores[i]),
            (rank < cut) as u8
        ));
    }
    atomic_write(&out.join("instance_ranking.csv"), &inst)?;
    let mut feat = String::from("rank,view,feature,score,selected\n");
    let fcut = sel.n_selected_features();
    for (rank, &(v, f)) in sel.feature_ranking.iter().enumerate() {
        feat.push_str(&format!(
            "{},{},{},{},{}\n",
            rank,
            v,
            f,
            sig(sel.feature_scores[v][f]),
            (rank < fcut) as u8
        ));
    }
    atomic_write(&out.join("feature_ranking.csv"), &feat)?;
    let json = serde_json::to_string_pretty(sel)
        .map_err(|e| CoselectError::Config(format!("serializing selection: {e}")))?;
    atomic_write(&out.join("selection.json"), &json)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("feature_ratio,instance_ratio,acc,f1,repeats,seed\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig(row.feature_ratio),
            sig(row.instance_ratio),
            sig(row.acc),
            sig(row.f1),
            row.repeats,
            row.seed
        ));
    }
    out
}

#[derive(Serialize)]
struct EvalArtifact<'a> {
    seed: u64,
    variant: String,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn fit_once(
    ds: &MultiViewDataset,
    cfg: &RunConfig,
) -> Result<(ModelState, ConvergenceTrace)> {
    fit_variant(ds, &cfg.hp, cfg.variant)
}

fn select_once(state: &ModelState, cfg: &RunConfig) -> Result<SelectionResult> {
    select_with_options(
        state,
        cfg.feature_ratio,
        cfg.instance_ratio,
        cfg.hp.epsilon,
        cfg.per_view_normalize,
    )
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.synth.as_ref().ok_or_else(|| {
        CoselectError::Config("synth needs a synthesis spec in the config".into())
    })?;
    let ds = synthesize(spec.n, &spec.view_dims, spec.classes, spec.noise, cfg.hp.seed)?;
    let manifest = save_dataset(&ds, &cfg.out.join("dataset"))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let ds = cfg.load_data()?;
    let (state, trace) = fit_once(&ds, cfg)?;
    write_trace_csv(&cfg.out.join("trace.csv"), &trace)?;
    write_model_summary(&cfg.out.join("model_summary.json"), &ds, cfg, &state, &trace)?;
    println!(
        "fit: {} iterations, converged = {}, objective {}",
        trace.iterations(),
        trace.converged,
        sig(trace.final_objective())
    );
    Ok(())
}

fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let ds = cfg.load_data()?;
    let (state, trace) = fit_once(&ds, cfg)?;
    write_trace_csv(&cfg.out.join("trace.csv"), &trace)?;
    write_model_summary(&cfg.out.join("model_summary.json"), &ds, cfg, &state, &trace)?;
    let sel = select_once(&state, cfg)?;
    write_rankings(&cfg.out, &sel)?;
    println!(
        "selected {} instances and {} features",
        sel.selected_instances.len(),
        sel.n_selected_features()
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let ds = cfg.load_data()?;
    let (state, trace) = fit_once(&ds, cfg)?;
    write_trace_csv(&cfg.out.join("trace.csv"), &trace)?;
    write_model_summary(&cfg.out.join("model_summary.json"), &ds, cfg, &state, &trace)?;
    let sel = select_once(&state, cfg)?;
    write_rankings(&cfg.out, &sel)?;
    let report = evaluate(&ds, &sel, cfg.classifier)?;
    let artifact = EvalArtifact {
        seed: cfg.hp.seed,
        variant: cfg.variant.to_string(),
        report: &report,
    };
    let json = serde_json::to_string_pretty(&artifact)
        .map_err(|e| CoselectError::Config(format!("serializing eval report: {e}")))?;
    atomic_write(&cfg.out.join("eval_report.json"), &json)?;
    // The CSV row follows the sweep protocol: `repeats` fits averaged.
    let rows = ratio_sweep(
        &ds,
        &cfg.hp,
        cfg.variant,
        &[cfg.feature_ratio],
        &[cfg.instance_ratio],
        cfg.repeats,
        cfg.classifier,
    )?;
    atomic_write(&cfg.out.join("eval_report.csv"), &sweep_csv(&rows))?;
    println!("acc {} f1 {}", sig(rows[0].acc), sig(rows[0].f1));
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let ds = cfg.load_data()?;
    let rows = ratio_sweep(
        &ds,
        &cfg.hp,
        cfg.variant,
        &cfg.feature_ratios,
        &cfg.instance_ratios,
        cfg.repeats,
        cfg.classifier,
    )?;
    atomic_write(&cfg.out.join("sweep.csv"), &sweep_csv(&rows))?;
    println!("swept {} cells x {} repeats", rows.len(), cfg.repeats);
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let ds = cfg.load_data()?;
    let variants = [Variant::Full, Variant::NoGraph, Variant::NoConsensus];
    let mut results = Vec::new();
    for variant in variants {
        let rows = ratio_sweep(
            &ds,
            &cfg.hp,
            variant,
            &[cfg.feature_ratio],
            &[cfg.instance_ratio],
            cfg.repeats,
            cfg.classifier,
        )?;
        results.push((variant, rows[0].acc, rows[0].f1));
    }
    let mut out = String::from("metric,method,value\n");
    for (variant, acc, _) in &results {
        out.push_str(&format!("acc,{variant},{}\n", sig(*acc)));
    }
    for (variant, _, f1) in &results {
        out.push_str(&format!("f1,{variant},{}\n", sig(*f1)));
    }
    atomic_write(&cfg.out.join("ablation.csv"), &out)?;
    for (variant, acc, f1) in &results {
        println!("{variant}: acc {} f1 {}", sig(*acc), sig(*f1));
    }
    Ok(())
}

/// Parses the config, applies overrides, writes the echo, and dispatches.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<()> {
    let mut cfg = RunConfig::parse(config_path)?;
    cfg.apply_overrides(overrides);
    // Override paths come from the command line; anchor them to the working
    // directory like any other CLI path.
    cfg.out = resolve_path(Path::new("."), &cfg.out)?;
    cfg.hp.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CoselectError::io(&cfg.out, e))?;
    atomic_write(&cfg.out.join("config_echo.txt"), &cfg.echo())?;
    let needs_pool = matches!(command, Command::Eval | Command::Sweep | Command::Ablate);
    if needs_pool {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CoselectError::Config(format!("building worker pool: {e}")))?;
        pool.install(|| match command {
            Command::Eval => cmd_eval(&cfg),
            Command::Sweep => cmd_sweep(&cfg),
            Command::Ablate => cmd_ablate(&cfg),
            _ => unreachable!(),
        })
    } else {
        match command {
            Command::Synth => cmd_synth(&cfg),
            Command::Fit => cmd_fit(&cfg),
            Command::Select => cmd_select(&cfg),
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH_CONFIG: &str = "\
synth_n = 16\n\
synth_view_dims = 6,5\n\
synth_classes = 2\n\
synth_noise = 0.4\n\
k = 3\n\
seed = 5\n\
";

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse_str(text, Path::new("."), Path::new("test.cfg"))
    }

    #[test]
    fn minimal_synth_config_parses_with_defaults() {
        let cfg = parse(SYNTH_CONFIG).unwrap();
        let s = cfg.synth.as_ref().unwrap();
        assert_eq!(s.n, 16);
        assert_eq!(s.view_dims, vec![6, 5]);
        assert_eq!(cfg.hp.k, 3);
        assert_eq!(cfg.hp.seed, 5);
        assert_eq!(cfg.hp.r, 2.0);
        assert_eq!(cfg.normalize, NormalizeMode::Zscore);
        assert_eq!(cfg.variant, Variant::Full);
        assert_eq!(cfg.repeats, 1);
    }

    #[test]
    fn dataset_and_synth_are_mutually_exclusive() {
        let err = parse("dataset = m.txt\nsynth_n = 5\nsynth_view_dims = 3\nsynth_classes = 2\nsynth_noise = 0\n")
            .unwrap_err();
        assert!(err.to_string().contains("pick one"), "{err}");
        let err = parse("r = 2\n").unwrap_err();
        assert!(err.to_string().contains("either dataset"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = parse("synth_n = 5\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key"), "{err}");
        let err = parse("seed = 1\nseed = 2\ndataset = m.txt\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");
    }

    #[test]
    fn echo_round_trips_exactly() {
        let mut cfg = parse(SYNTH_CONFIG).unwrap();
        cfg.hp.alpha = 0.007;
        cfg.feature_ratios = vec![0.15, 0.35];
        cfg.out = PathBuf::from("/runs/a");
        let echoed = parse(&cfg.echo()).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn overrides_take_effect() {
        let mut cfg = parse(SYNTH_CONFIG).unwrap();
        let o = Overrides {
            out: Some(PathBuf::from("elsewhere")),
            seed: Some(99),
            variant: Some(Variant::NoGraph),
            feature_ratio: Some(0.45),
            classifier: Some(Classifier::NearestCentroid),
            ..Overrides::default()
        };
        cfg.apply_overrides(&o);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
        assert_eq!(cfg.hp.seed, 99);
        assert_eq!(cfg.variant, Variant::NoGraph);
        assert_eq!(cfg.feature_ratio, 0.45);
        assert_eq!(cfg.classifier, Classifier::NearestCentroid);
    }

    #[test]
    fn load_data_synthesizes_and_normalizes() {
        let cfg = parse(SYNTH_CONFIG).unwrap();
        let ds = cfg.load_data().unwrap();
        assert_eq!(ds.n_instances(), 16);
        // Zscore: every feature row is centered.
        for v in 0..ds.n_views() {
            for row in ds.view(v).rows() {
                let mean: f64 = row.sum() / row.len() as f64;
                assert!(mean.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sig_formatting_has_twelve_significant_digits() {
        assert_eq!(sig(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(sig(0.0), "0.00000000000e0");
        assert_eq!(sig(-12345.6789), "-1.23456789000e4");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = RunConfig::parse_str(
            "dataset = data/m.txt\nout = results\n",
            Path::new("/tmp/base"),
            Path::new("/tmp/base/run.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.dataset.unwrap(), PathBuf::from("/tmp/base/data/m.txt"));
        assert_eq!(cfg.out, PathBuf::from("/tmp/base/results"));
    }
}
