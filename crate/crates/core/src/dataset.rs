//! Multi-view dataset container, disk formats, and the synthetic generator.
//!
//! A dataset is a list of view matrices, each `d_v x n` with instances as
//! columns, plus optional integer labels used only by evaluation. On disk a
//! dataset is a plain-text manifest naming one CSV per view:
//!
//! ```text
//! # comment lines start with '#'
//! orientation = features_x_instances
//! header = false
//! view = view_0.csv
//! view = view_1.csv
//! labels = labels.csv
//! ```
//!
//! Paths are resolved relative to the manifest's directory. CSV values are
//! written with shortest round-trip formatting, so a save/load cycle is
//! bit-exact.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoselectError, Result};

/// Guard added to denominators during normalization.
const NORM_EPS: f64 = 1e-12;

/// How rows and columns of a view CSV map onto features and instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    FeaturesXInstances,
    InstancesXFeatures,
}

impl FromStr for Orientation {
    type Err = CoselectError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "features_x_instances" => Ok(Orientation::FeaturesXInstances),
            "instances_x_features" => Ok(Orientation::InstancesXFeatures),
            other => Err(CoselectError::Config(format!(
                "unknown orientation {other:?}, expected features_x_instances or instances_x_features"
            ))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Orientation::FeaturesXInstances => write!(f, "features_x_instances"),
            Orientation::InstancesXFeatures => write!(f, "instances_x_features"),
        }
    }
}

/// Normalization applied once at load time, before any fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizeMode {
    None,
    /// Per feature: subtract the mean and divide by the population standard
    /// deviation (guarded, constant features map to zero).
    Zscore,
    /// Per instance: scale each column to unit Euclidean norm.
    UnitL2,
}

impl FromStr for NormalizeMode {
    type Err = CoselectError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormalizeMode::None),
            "zscore" => Ok(NormalizeMode::Zscore),
            "unit-l2" => Ok(NormalizeMode::UnitL2),
            other => Err(CoselectError::Config(format!(
                "unknown normalize mode {other:?}, expected none, zscore, or unit-l2"
            ))),
        }
    }
}

impl fmt::Display for NormalizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeMode::None => write!(f, "none"),
            NormalizeMode::Zscore => write!(f, "zscore"),
            NormalizeMode::UnitL2 => write!(f, "unit-l2"),
        }
    }
}

/// Unlabeled or labeled multi-view data with instances as columns.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    views: Vec<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Array2<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        if views.is_empty() {
            return Err(CoselectError::InvalidData(
                "dataset needs at least one view".into(),
            ));
        }
        let n = views[0].ncols();
        for (v, x) in views.iter().enumerate() {
            if x.nrows() == 0 || x.ncols() == 0 {
                return Err(CoselectError::InvalidData(format!(
                    "view {v} is empty ({}x{})",
                    x.nrows(),
                    x.ncols()
                )));
            }
            if x.ncols() != n {
                return Err(CoselectError::InvalidData(format!(
                    "instance count mismatch: view 0 has {n} instances, view {v} has {}",
                    x.ncols()
                )));
            }
            if x.iter().any(|e| !e.is_finite()) {
                return Err(CoselectError::InvalidData(format!(
                    "view {v} contains non-finite entries"
                )));
            }
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(CoselectError::InvalidData(format!(
                    "instance count mismatch: views have {n} instances, labels file has {}",
                    l.len()
                )));
            }
        }
        Ok(MultiViewDataset { views, labels })
    }

    pub fn n_instances(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> &Array2<f64> {
        &self.views[v]
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.nrows()).collect()
    }

    pub fn total_features(&self) -> usize {
        self.views.iter().map(|x| x.nrows()).sum()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Distinct label count, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut seen: Vec<usize> = l.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        })
    }

    /// Returns a copy with every view transformed by `mode`. Labels carry over.
    pub fn normalize(&self, mode: NormalizeMode) -> Self {
        let views = self
            .views
            .iter()
            .map(|x| match mode {
                NormalizeMode::None => x.clone(),
                NormalizeMode::Zscore => zscore_rows(x),
                NormalizeMode::UnitL2 => unit_l2_columns(x),
            })
            .collect();
        MultiViewDataset {
            views,
            labels: self.labels.clone(),
        }
    }
}

fn zscore_rows(x: &Array2<f64>) -> Array2<f64> {
    let n = x.ncols() as f64;
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        row.mapv_inplace(|v| (v - mean) / (std + NORM_EPS));
    }
    out
}

fn unit_l2_columns(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut col in out.columns_mut() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let denom = norm.max(NORM_EPS);
        col.mapv_inplace(|v| v / denom);
    }
    out
}

/// Parsed dataset manifest; paths are already joined onto the manifest dir.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub view_paths: Vec<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub orientation: Orientation,
    pub header: bool,
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoselectError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut view_paths = Vec::new();
    let mut labels_path = None;
    let mut orientation = Orientation::FeaturesXInstances;
    let mut header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CoselectError::parse(path, idx + 1, format!("expected key = value, got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "view" => view_paths.push(base.join(value)),
            "labels" => labels_path = Some(base.join(value)),
            "orientation" => {
                orientation = value.parse().map_err(|e: CoselectError| {
                    CoselectError::parse(path, idx + 1, e.to_string())
                })?
            }
            "header" => {
                header = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(CoselectError::parse(
                            path,
                            idx + 1,
                            format!("header must be true or false, got {other:?}"),
                        ))
                    }
                }
            }
            other => {
                return Err(CoselectError::parse(
                    path,
                    idx + 1,
                    format!("unknown manifest key {other:?}"),
                ))
            }
        }
    }
    if view_paths.is_empty() {
        return Err(CoselectError::parse(
            path,
            0,
            "manifest declares no views",
        ));
    }
    Ok(DatasetManifest {
        view_paths,
        labels_path,
        orientation,
        header,
    })
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<MultiViewDataset> {
    let mut views = Vec::with_capacity(manifest.view_paths.len());
    for path in &manifest.view_paths {
        views.push(load_view_csv(path, manifest.orientation, manifest.header)?);
    }
    let labels = match &manifest.labels_path {
        Some(path) => Some(load_labels(path)?),
        None => None,
    };
    MultiViewDataset::new(views, labels)
}

/// Loads manifest and data in one step.
pub fn load_dataset_path(path: &Path) -> Result<MultiViewDataset> {
    load_dataset(&load_manifest(path)?)
}

fn load_view_csv(path: &Path, orientation: Orientation, header: bool) -> Result<Array2<f64>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoselectError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        if header && idx == 0 {
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| {
                CoselectError::parse(path, idx + 1, format!("bad float {:?}", field.trim()))
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CoselectError::parse(
                    path,
                    idx + 1,
                    format!("row has {} fields, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| CoselectError::parse(path, 0, "file holds no data rows"))?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / width;
    let m = Array2::from_shape_vec((nrows, width), flat)
        .expect("row-major buffer matches counted shape");
    Ok(match orientation {
        Orientation::FeaturesXInstances => m,
        Orientation::InstancesXFeatures => m.t().to_owned(),
    })
}

fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoselectError::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: usize = line.parse().map_err(|_| {
            CoselectError::parse(path, idx + 1, format!("bad label {line:?}"))
        })?;
        labels.push(value);
    }
    Ok(labels)
}

/// Writes `contents` to `path` through a temp file in the same directory, so a
/// crash mid-write never leaves a truncated artifact behind.
pub(crate) fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CoselectError::InvalidParam(format!("bad output path {path:?}")))?;
    let tmp = dir.join(format!(".tmp-{}", name.to_string_lossy()));
    std::fs::write(&tmp, contents).map_err(|e| CoselectError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CoselectError::io(path, e))?;
    Ok(())
}

fn format_matrix_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Saves a dataset into `dir` as `view_{v}.csv`, optional `labels.csv`, and a
/// `manifest.txt` that [`load_dataset_path`] reads back bit-exactly.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CoselectError::io(dir, e))?;
    let mut manifest = String::from("orientation = features_x_instances\nheader = false\n");
    for (v, x) in ds.views().iter().enumerate() {
        let name = format!("view_{v}.csv");
        atomic_write(&dir.join(&name), &format_matrix_csv(x))?;
        manifest.push_str(&format!("view = {name}\n"));
    }
    if let Some(labels) = ds.labels() {
        let mut text = String::new();
        for l in labels {
            text.push_str(&format!("{l}\n"));
        }
        atomic_write(&dir.join("labels.csv"), &text)?;
        manifest.push_str("labels = labels.csv\n");
    }
    let manifest_path = dir.join("manifest.txt");
    atomic_write(&manifest_path, &manifest)?;
    Ok(manifest_path)
}

/// Generates a labeled multi-view dataset with `classes` well-separated
/// clusters shared across views.
///
/// Instances take labels round-robin (`i % classes`). Each class occupies a
/// small affine flat: a class mean plus a two-dimensional within-class basis,
/// both drawn per view, driven by per-instance latent coordinates shared
/// across views. The within-class spread is a fraction of the between-class
/// separation, so at `noise = 0` the classes are exactly separable while
/// same-class instances remain distinct. `noise` adds per-view Gaussian noise
/// on top. The same arguments always produce the same dataset.
pub fn synthesize(
    n: usize,
    view_dims: &[usize],
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if classes == 0 {
        return Err(CoselectError::InvalidParam("classes must be positive".into()));
    }
    if n < classes {
        return Err(CoselectError::InvalidParam(format!(
            "need at least one instance per class: n = {n}, classes = {classes}"
        )));
    }
    if view_dims.is_empty() {
        return Err(CoselectError::InvalidParam("need at least one view".into()));
    }
    if view_dims.iter().any(|&d| d == 0) {
        return Err(CoselectError::InvalidParam(
            "view dimensions must be positive".into(),
        ));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(CoselectError::InvalidParam(format!(
            "noise must be finite and non-negative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let scale = 1.0 / (classes as f64).sqrt();
    // Latent within-class coordinates, shared by every view.
    const LATENT: usize = 2;
    let z = Array2::from_shape_fn((LATENT, n), |_| rng.sample::<f64, _>(StandardNormal));
    let mut views = Vec::with_capacity(view_dims.len());
    for &d in view_dims {
        let map_entries: Vec<f64> = (0..d * classes)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        let map = Array2::from_shape_vec((d, classes), map_entries)
            .expect("row-major buffer matches requested shape");
        let bases: Vec<Array2<f64>> = (0..classes)
            .map(|_| {
                Array2::from_shape_fn((d, LATENT), |_| {
                    rng.sample::<f64, _>(StandardNormal) * 0.5 * scale
                })
            })
            .collect();
        let mut x = Array2::zeros((d, n));
        for (i, &label) in labels.iter().enumerate() {
            let mean: Array1<f64> = map.column(label).mapv(|v| 3.0 * v);
            let offset = bases[label].dot(&z.column(i));
            x.column_mut(i).assign(&(mean + offset));
        }
        if noise > 0.0 {
            for e in x.iter_mut() {
                *e += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        views.push(x);
    }
    MultiViewDataset::new(views, Some(labels))
}
