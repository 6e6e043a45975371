//! Objective functions: sequence classification on synthetic or loaded
//! feature data, and analytic toy surfaces.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaign::{Direction, Objective};
use crate::error::{Error, Result};
use crate::hyperspace::{HyperPoint, HyperSpace};
use crate::readout::{accuracy, classify_sequence, ridge_train, TrainingConfig};
use crate::reservoir::{Reservoir, ReservoirConfig, ReservoirState};
use crate::rng::{substream, STREAM_DATASET};

pub const DATASET_MAGIC: &str = "rcopt-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Candidate ridge penalties tried when λ is tuned on a validation split.
pub const LAMBDA_GRID: [f64; 6] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    /// T × K, one row per frame.
    pub frames: DMatrix<f64>,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: usize,
    pub classes: usize,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.classes == 0 {
            return Err(Error::domain("dataset needs at least one feature and one class"));
        }
        for (i, s) in self.sequences.iter().enumerate() {
            if s.frames.ncols() != self.features {
                return Err(Error::domain(format!(
                    "sequence {i} has {} features, expected {}",
                    s.frames.ncols(),
                    self.features
                )));
            }
            if s.frames.nrows() == 0 {
                return Err(Error::domain(format!("sequence {i} has no frames")));
            }
            if s.label >= self.classes {
                return Err(Error::domain(format!(
                    "sequence {i} has label {} but there are {} classes",
                    s.label, self.classes
                )));
            }
            if s.frames.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("sequence {i} has non-finite features")));
            }
        }
        for split in [Split::Train, Split::Test] {
            if !self.sequences.iter().any(|s| s.split == split) {
                return Err(Error::domain(format!("dataset has no {split} sequences")));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sequence> {
        self.sequences.iter().filter(move |s| s.split == split)
    }
}

/// Parameters of a generated classification task. Each class has a mean
/// feature vector; frames wander around it as an AR(1) process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub features: usize,
    pub classes: usize,
    pub sequences_per_class: usize,
    pub min_length: usize,
    pub max_length: usize,
    /// Norm of each class mean.
    pub separation: f64,
    /// AR(1) coefficient of the frame noise, in [0, 1).
    pub correlation: f64,
    /// Stationary standard deviation of the frame noise per feature.
    pub noise: f64,
    /// Fraction of each class assigned to the training split.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        SyntheticTaskSpec {
            features: 20,
            classes: 6,
            sequences_per_class: 20,
            min_length: 24,
            max_length: 60,
            separation: 1.0,
            correlation: 0.5,
            noise: 1.0,
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.classes == 0 {
            return Err(Error::domain("features and classes must be positive"));
        }
        if self.sequences_per_class < 2 {
            return Err(Error::domain("need at least 2 sequences per class for a train/test split"));
        }
        if self.min_length < 2 || self.max_length < self.min_length {
            return Err(Error::domain(format!(
                "sequence lengths must satisfy 2 ≤ min ≤ max, got {}..{}",
                self.min_length, self.max_length
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::domain("separation must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::domain("correlation must lie in [0, 1)"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::domain("noise must be finite and non-negative"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::domain("train_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticTaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = substream(spec.seed, STREAM_DATASET);
    let k = spec.features;

    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| spec.separation * x / norm).collect()
        })
        .collect();

    let n_train = ((spec.train_fraction * spec.sequences_per_class as f64).round() as usize)
        .clamp(1, spec.sequences_per_class - 1);
    let innovation = spec.noise * (1.0 - spec.correlation * spec.correlation).sqrt();
    let mut sequences = Vec::with_capacity(spec.classes * spec.sequences_per_class);
    for (label, mean) in means.iter().enumerate() {
        for i in 0..spec.sequences_per_class {
            let len = rng.random_range(spec.min_length..=spec.max_length);
            let mut frames = DMatrix::zeros(len, k);
            let mut z: Vec<f64> = (0..k)
                .map(|_| spec.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for t in 0..len {
                if t > 0 {
                    for zj in z.iter_mut() {
                        *zj = spec.correlation * *zj + innovation * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                for j in 0..k {
                    frames[(t, j)] = mean[j] + z[j];
                }
            }
            let split = if i < n_train { Split::Train } else { Split::Test };
            sequences.push(Sequence { frames, label, split });
        }
    }
    Ok(Dataset {
        features: k,
        classes: spec.classes,
        sequences,
    })
}

/// Writes `d` as a manifest plus one text table per sequence.
///
/// Layout of `dir/manifest.txt`:
///
/// ```text
/// rcopt-dataset 1
/// features <K>
/// classes <C>
/// <file>\t<label>\t<train|test>     (one line per sequence)
/// ```
///
/// Each sequence file has one frame per line, K whitespace-separated
/// decimals in shortest round-trip form. Lines starting with `#` are
/// comments.
pub fn export_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    d.validate()?;
    fs::create_dir_all(dir)?;
    let mut manifest = format!(
        "{DATASET_MAGIC} {DATASET_VERSION}\nfeatures {}\nclasses {}\n",
        d.features, d.classes
    );
    for (i, s) in d.sequences.iter().enumerate() {
        let name = format!("seq_{i:05}.txt");
        let mut out = std::io::BufWriter::new(fs::File::create(dir.join(&name))?);
        for row in s.frames.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(" "))?;
        }
        out.flush()?;
        manifest += &format!("{name}\t{}\t{}\n", s.label, s.split);
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

/// Loads a dataset directory written by [`export_dataset`] or by hand.
/// `manifest` defaults to `manifest.txt` inside `dir`; sequence paths are
/// relative to the manifest's directory.
pub fn load_features(dir: &Path, manifest: Option<&Path>) -> Result<Dataset> {
    let manifest_path = manifest.map_or_else(|| dir.join(MANIFEST_FILE), Path::to_path_buf);
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let bad = |reason: String| Error::Load {
        path: manifest_path.clone(),
        reason,
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let mut header = |key: &str| -> Result<String> {
        let (n, line) = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => Ok(v.to_string()),
            _ => Err(bad(format!("line {}: expected `{key} <value>`", n + 1))),
        }
    };
    let version = header(DATASET_MAGIC)?;
    if version != DATASET_VERSION.to_string() {
        return Err(bad(format!("unsupported dataset version {version}")));
    }
    let features: usize = header("features")?
        .parse()
        .map_err(|e| bad(format!("features: {e}")))?;
    let classes: usize = header("classes")?
        .parse()
        .map_err(|e| bad(format!("classes: {e}")))?;

    let mut entries: Vec<(PathBuf, usize, Split)> = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [file, label, split] = fields[..] else {
            return Err(bad(format!("line {}: expected `file<TAB>label<TAB>split`", n + 1)));
        };
        let path = base.join(file);
        let label: usize = label
            .parse()
            .map_err(|_| bad(format!("line {}: label {label:?} of {file} is not an integer", n + 1)))?;
        if label >= classes {
            return Err(bad(format!(
                "line {}: unknown label {label} for {file} ({classes} classes)",
                n + 1
            )));
        }
        let split = match split {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(bad(format!("line {}: unknown split {other:?} for {file}", n + 1))),
        };
        entries.push((path, label, split));
    }

    let sequences = entries
        .into_iter()
        .map(|(path, label, split)| {
            let frames = read_table(&path, features)?;
            Ok(Sequence { frames, label, split })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = Dataset {
        features,
        classes,
        sequences,
    };
    d.validate().map_err(|e| bad(e.to_string()))?;
    Ok(d)
}

fn read_table(path: &Path, features: usize) -> Result<DMatrix<f64>> {
    let bad = |reason: String| Error::Load {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = values.len();
        for cell in line.split_whitespace() {
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("line {}: {cell:?} is not a number", n + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("line {}: non-finite value {cell}", n + 1)));
            }
            values.push(v);
        }
        let cols = values.len() - before;
        if cols != features {
            return Err(bad(format!("line {}: {cols} columns, expected {features}", n + 1)));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(bad("no frames".into()));
    }
    Ok(DMatrix::from_row_slice(rows, features, &values))
}

/// Whether the reservoir starts each sequence from the zero state or
/// carries its state over from the previous sequence in dataset order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatePolicy {
    #[default]
    ResetPerSequence,
    Carry,
}

/// Test accuracy of a reservoir built at `point` on `d`.
pub fn evaluate_objective(
    d: &Dataset,
    point: &HyperPoint,
    rc: &ReservoirConfig,
    tc: &TrainingConfig,
) -> Result<f64> {
    evaluate_objective_with(d, point, rc, tc, StatePolicy::ResetPerSequence)
}

pub fn evaluate_objective_with(
    d: &Dataset,
    point: &HyperPoint,
    rc: &ReservoirConfig,
    tc: &TrainingConfig,
    policy: StatePolicy,
) -> Result<f64> {
    if rc.n_inputs != d.features {
        return Err(Error::domain(format!(
            "reservoir takes {} inputs but the dataset has {} features",
            rc.n_inputs, d.features
        )));
    }
    d.validate()?;
    tc.validate()?;
    let reservoir = Reservoir::generate(&rc.with_point(*point))?;
    let states = run_all(&reservoir, d, policy)?;

    let train: Vec<usize> = (0..d.sequences.len())
        .filter(|&i| d.sequences[i].split == Split::Train)
        .collect();
    let test: Vec<usize> = (0..d.sequences.len())
        .filter(|&i| d.sequences[i].split == Split::Test)
        .collect();

    let lambda = if tc.tune_lambda {
        tune_lambda(d, &states, &train, tc)?
    } else {
        tc.ridge_lambda
    };
    let cfg = TrainingConfig {
        ridge_lambda: lambda,
        ..*tc
    };
    score(d, &states, &train, &test, &cfg)
}

/// States scaled by 1/i0 so the readout sees the same numbers whatever the
/// illumination.
fn run_all(reservoir: &Reservoir, d: &Dataset, policy: StatePolicy) -> Result<Vec<DMatrix<f64>>> {
    let scale = 1.0 / reservoir.config.i0;
    let mut states: Vec<DMatrix<f64>> = match policy {
        StatePolicy::ResetPerSequence => d
            .sequences
            .par_iter()
            .map(|s| reservoir.run(&s.frames))
            .collect::<Result<_>>()?,
        StatePolicy::Carry => {
            let n = reservoir.config.n_nodes;
            let mut x = ReservoirState::zeros(n);
            let mut out = Vec::with_capacity(d.sequences.len());
            for s in &d.sequences {
                let traj = crate::reservoir::run_sequence(
                    &reservoir.config,
                    &reservoir.interconnection,
                    &reservoir.mask,
                    &s.frames,
                    &x,
                )?;
                x = ReservoirState {
                    values: traj.row(traj.nrows() - 1).transpose(),
                };
                out.push(traj);
            }
            out
        }
    };
    for m in &mut states {
        *m *= scale;
    }
    Ok(states)
}

fn score(
    d: &Dataset,
    states: &[DMatrix<f64>],
    train: &[usize],
    test: &[usize],
    cfg: &TrainingConfig,
) -> Result<f64> {
    let n = states[0].ncols();
    let rows: usize = train.iter().map(|&i| states[i].nrows()).sum();
    let mut s = DMatrix::zeros(rows, n);
    let mut targets = DMatrix::zeros(rows, d.classes);
    let mut r = 0;
    for &i in train {
        let m = &states[i];
        s.rows_mut(r, m.nrows()).copy_from(m);
        targets.rows_mut(r, m.nrows()).column_mut(d.sequences[i].label).fill(1.0);
        r += m.nrows();
    }
    let weights = ridge_train(&s, &targets, cfg)?;
    let predicted: Vec<usize> = test
        .iter()
        .map(|&i| classify_sequence(&weights.outputs(&states[i])))
        .collect();
    let truth: Vec<usize> = test.iter().map(|&i| d.sequences[i].label).collect();
    accuracy(&predicted, &truth)
}

/// Holds out every fifth training sequence, picks the λ from
/// [`LAMBDA_GRID`] with the best held-out accuracy (smallest λ on ties).
fn tune_lambda(d: &Dataset, states: &[DMatrix<f64>], train: &[usize], tc: &TrainingConfig) -> Result<f64> {
    let fit: Vec<usize> = train.iter().enumerate().filter(|(j, _)| j % 5 != 4).map(|(_, i)| *i).collect();
    let held: Vec<usize> = train.iter().enumerate().filter(|(j, _)| j % 5 == 4).map(|(_, i)| *i).collect();
    if fit.is_empty() || held.is_empty() {
        return Ok(tc.ridge_lambda);
    }
    let mut best = (f64::NEG_INFINITY, tc.ridge_lambda);
    for lambda in LAMBDA_GRID {
        let cfg = TrainingConfig {
            ridge_lambda: lambda,
            tune_lambda: false,
            ..*tc
        };
        if let Ok(acc) = score(d, states, &fit, &held, &cfg) {
            if acc > best.0 {
                best = (acc, lambda);
            }
        }
    }
    Ok(best.1)
}

/// Classification accuracy as a campaign objective.
pub struct ReservoirObjective {
    pub dataset: Dataset,
    pub reservoir: ReservoirConfig,
    pub training: TrainingConfig,
    pub policy: StatePolicy,
    pub label: String,
}

impl Objective for ReservoirObjective {
    fn evaluate(&self, point: &HyperPoint) -> Result<f64> {
        evaluate_objective_with(&self.dataset, point, &self.reservoir, &self.training, self.policy)
    }

    fn direction(&self) -> Direction {
        Direction::Maximize
    }

    fn describe(&self) -> String {
        format!(
            "{} N={} K={} C={} seed={}",
            self.label, self.reservoir.n_nodes, self.dataset.features, self.dataset.classes, self.reservoir.rng_seed
        )
    }
}

/// Analytic test surfaces over unit coordinates, all minimised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToySurface {
    /// One local and one global minimum along the first coordinate.
    #[serde(rename = "double_min_1d")]
    DoubleMin1d,
    /// A plateau with a rising wall on the low side of the first coordinate
    /// and a single pit.
    #[serde(rename = "pit_2d")]
    Pit2d,
    /// A bowl in the first two coordinates, constant in the last two.
    #[serde(rename = "sensitive_2of4_4d")]
    Sensitive2of4_4d,
}

// double_min_1d: 0.3 (u − 0.75)² minus two compact wells
// depth · (1 − ((u − c)/r)²)² on |u − c| < r.
const DM_SLOPE: f64 = 0.3;
const DM_LOCAL: (f64, f64, f64) = (0.22, 0.15, 0.5);
const DM_GLOBAL: (f64, f64, f64) = (0.75, 0.15, 1.0);

// pit_2d: PLATEAU + wall on u0 < PIT_WALL_WIDTH, minus a narrow and a wide
// compact bump centred on PIT_CENTER.
const PIT_PLATEAU: f64 = -0.70;
const PIT_WALL_HEIGHT: f64 = 0.2;
const PIT_WALL_WIDTH: f64 = 0.25;
const PIT_CENTER: [f64; 2] = [0.62, 0.38];
const PIT_NARROW: (f64, f64) = (0.08, 0.25);
const PIT_WIDE: (f64, f64) = (0.08, 0.60);

const BOWL_CENTER: [f64; 2] = [0.35, 0.65];

fn compact_bump(r2: f64, radius: f64) -> f64 {
    let q = r2 / (radius * radius);
    if q < 1.0 {
        (1.0 - q) * (1.0 - q)
    } else {
        0.0
    }
}

impl ToySurface {
    pub const ALL: [ToySurface; 3] = [ToySurface::DoubleMin1d, ToySurface::Pit2d, ToySurface::Sensitive2of4_4d];

    pub fn name(self) -> &'static str {
        match self {
            ToySurface::DoubleMin1d => "double_min_1d",
            ToySurface::Pit2d => "pit_2d",
            ToySurface::Sensitive2of4_4d => "sensitive_2of4_4d",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        ToySurface::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::domain(format!("unknown toy surface {name:?}")))
    }

    /// Leading unit coordinates the surface reads.
    pub fn dims(self) -> usize {
        match self {
            ToySurface::DoubleMin1d => 1,
            ToySurface::Pit2d => 2,
            ToySurface::Sensitive2of4_4d => 4,
        }
    }

    /// Location of the global minimum in the coordinates the surface reads.
    pub fn argmin(self) -> Vec<f64> {
        match self {
            ToySurface::DoubleMin1d => vec![DM_GLOBAL.0],
            ToySurface::Pit2d => PIT_CENTER.to_vec(),
            ToySurface::Sensitive2of4_4d => vec![BOWL_CENTER[0], BOWL_CENTER[1], 0.5, 0.5],
        }
    }

    pub fn minimum(self) -> f64 {
        match self {
            ToySurface::DoubleMin1d => -DM_GLOBAL.2,
            ToySurface::Pit2d => PIT_PLATEAU - PIT_NARROW.0 - PIT_WIDE.0,
            ToySurface::Sensitive2of4_4d => 0.0,
        }
    }

    /// Value of `pit_2d` wherever the wall and both bumps vanish.
    pub const PIT_PLATEAU: f64 = PIT_PLATEAU;

    /// Whether `u` lies in the support of the global well of `double_min_1d`.
    pub fn in_global_basin(u: f64) -> bool {
        (u - DM_GLOBAL.0).abs() < DM_GLOBAL.1
    }

    pub fn value(self, u: &[f64]) -> Result<f64> {
        if u.len() < self.dims() {
            return Err(Error::domain(format!(
                "{} reads {} coordinates, got {}",
                self.name(),
                self.dims(),
                u.len()
            )));
        }
        Ok(match self {
            ToySurface::DoubleMin1d => {
                let x = u[0];
                let well = |(c, r, depth): (f64, f64, f64)| depth * compact_bump((x - c) * (x - c), r);
                DM_SLOPE * (x - DM_GLOBAL.0).powi(2) - well(DM_LOCAL) - well(DM_GLOBAL)
            }
            ToySurface::Pit2d => {
                let r2 = (u[0] - PIT_CENTER[0]).powi(2) + (u[1] - PIT_CENTER[1]).powi(2);
                let wall = (1.0 - u[0] / PIT_WALL_WIDTH).max(0.0);
                PIT_PLATEAU + PIT_WALL_HEIGHT * wall * wall
                    - PIT_NARROW.0 * compact_bump(r2, PIT_NARROW.1)
                    - PIT_WIDE.0 * compact_bump(r2, PIT_WIDE.1)
            }
            ToySurface::Sensitive2of4_4d => {
                (u[0] - BOWL_CENTER[0]).powi(2) + (u[1] - BOWL_CENTER[1]).powi(2)
            }
        })
    }
}

impl fmt::Display for ToySurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks a surface up by name and evaluates it.
pub fn toy_surface(name: &str, u: &[f64]) -> Result<f64> {
    ToySurface::from_name(name)?.value(u)
}

/// A toy surface read through the unit coordinates of `space`.
pub struct ToyObjective {
    pub surface: ToySurface,
    pub space: HyperSpace,
}

impl ToyObjective {
    pub fn new(surface: ToySurface, space: HyperSpace) -> Self {
        ToyObjective { surface, space }
    }
}

impl Objective for ToyObjective {
    fn evaluate(&self, point: &HyperPoint) -> Result<f64> {
        self.surface.value(&self.space.to_unit(point)?)
    }

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn describe(&self) -> String {
        format!("toy {}", self.surface)
    }
}
