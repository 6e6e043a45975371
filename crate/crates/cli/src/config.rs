//! Campaign configuration files.
//!
//! A campaign is described by one TOML file. Relative paths inside it are
//! resolved against the file's directory; the resolved form is what
//! `optimize` stores next to the log, so a run can be replayed from its
//! output directory alone.

use std::fs;
use std::path::{Path, PathBuf};

use rcopt::acquisition::AcquisitionConfig;
use rcopt::campaign::{BayesConfig, Objective};
use rcopt::gp::GpConfig;
use rcopt::hyperspace::{GridSpec, HyperSpace, Interval, Scale, DIMS, DIM_NAMES};
use rcopt::readout::TrainingConfig;
use rcopt::reservoir::ReservoirConfig;
use rcopt::tasks::{
    generate_synthetic, load_features, Dataset, ReservoirObjective, StatePolicy, SyntheticTaskSpec, ToyObjective,
    ToySurface,
};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides `[output] dir`.
pub const OUT_ENV: &str = "RCOPT_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub reservoir: ReservoirBlock,
    pub space: SpaceBlock,
    pub method: MethodConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    Toy(ToyTask),
    Synthetic(SyntheticTaskSpec),
    Features(FeatureTask),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyTask {
    pub surface: ToySurface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureTask {
    /// Dataset directory.
    pub path: PathBuf,
    /// Manifest file; `manifest.txt` inside `path` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirBlock {
    pub nodes: usize,
    pub i0: f64,
    pub quantisation: bool,
    pub quant_in_bits: u32,
    pub quant_out_bits: u32,
    /// Seed of the input mask and interconnection matrix.
    pub seed: u64,
    pub state_policy: StatePolicy,
}

impl Default for ReservoirBlock {
    fn default() -> Self {
        ReservoirBlock {
            nodes: 64,
            i0: 1.0,
            quantisation: true,
            quant_in_bits: 8,
            quant_out_bits: 10,
            seed: 0,
            state_policy: StatePolicy::ResetPerSequence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    pub alpha: DimBlock,
    pub beta: DimBlock,
    pub gamma: DimBlock,
    pub rho: DimBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimBlock {
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
    /// Fixes the dimension at this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    Bayes(BayesBlock),
    Grid(GridBlock),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesBlock {
    pub budget: usize,
    #[serde(default = "default_init_count")]
    pub init_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub gp: GpConfig,
}

fn default_init_count() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub values: GridValues,
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridValues {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Command-line settings that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tune_lambda: bool,
    pub out: Option<PathBuf>,
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads, resolves paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = std::path::absolute(path.parent().unwrap_or(Path::new("")))
            .map_err(|e| format!("cannot resolve {}: {e}", path.display()))?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TaskConfig::Features(f) = &mut self.task {
            resolve(&mut f.path);
            if let Some(m) = &mut f.manifest {
                resolve(m);
            }
        }
        if let Some(d) = &mut self.output.dir {
            resolve(d);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            match &mut self.method {
                MethodConfig::Bayes(b) => b.seed = seed,
                MethodConfig::Grid(g) => g.seed = seed,
            }
        }
        if let (Some(w), MethodConfig::Grid(g)) = (o.workers, &mut self.method) {
            g.workers = w;
        }
        if o.tune_lambda {
            self.training.tune_lambda = true;
        }
        if let Some(out) = &o.out {
            self.output.dir = Some(out.clone());
        }
    }

    /// Checks everything that can be checked without running the campaign.
    pub fn validate(&self) -> Result<(), String> {
        let space = self.space()?;
        match &self.task {
            TaskConfig::Toy(_) => {}
            TaskConfig::Synthetic(spec) => spec.validate().map_err(|e| format!("task: {e}"))?,
            TaskConfig::Features(f) => {
                if !f.path.is_dir() {
                    return Err(format!("task: dataset directory {} does not exist", f.path.display()));
                }
                if let Some(m) = &f.manifest {
                    if !m.is_file() {
                        return Err(format!("task: manifest {} does not exist", m.display()));
                    }
                }
            }
        }
        if !matches!(self.task, TaskConfig::Toy(_)) {
            self.reservoir_config(1).validate().map_err(|e| format!("reservoir: {e}"))?;
            self.training.validate().map_err(|e| format!("training: {e}"))?;
        }
        match &self.method {
            MethodConfig::Bayes(_) => self.bayes_config().unwrap().validate().map_err(|e| format!("method: {e}"))?,
            MethodConfig::Grid(g) => {
                if g.workers == 0 {
                    return Err("method: workers must be at least 1".into());
                }
                self.grid_spec().unwrap().validate(&space).map_err(|e| format!("method: {e}"))?;
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HyperSpace, String> {
        let blocks = [&self.space.alpha, &self.space.beta, &self.space.gamma, &self.space.rho];
        let mut intervals = Vec::with_capacity(DIMS);
        for (b, name) in blocks.iter().zip(DIM_NAMES) {
            intervals.push(Interval::new(b.low, b.high, b.scale).map_err(|e| format!("space.{name}: {e}"))?);
        }
        let mut space = HyperSpace::new(intervals.try_into().unwrap()).map_err(|e| format!("space: {e}"))?;
        for (dim, b) in blocks.iter().enumerate() {
            if let Some(v) = b.pin {
                space = space.pin(dim, v).map_err(|e| format!("space: {e}"))?;
            }
        }
        if space.free_dims().is_empty() {
            return Err("space: every dimension is pinned".into());
        }
        Ok(space)
    }

    pub fn seed(&self) -> u64 {
        match &self.method {
            MethodConfig::Bayes(b) => b.seed,
            MethodConfig::Grid(g) => g.seed,
        }
    }

    pub fn bayes_config(&self) -> Option<BayesConfig> {
        let MethodConfig::Bayes(b) = &self.method else {
            return None;
        };
        Some(BayesConfig {
            budget: b.budget,
            init_count: b.init_count,
            seed: b.seed,
            acquisition: b.acquisition.clone(),
            gp: b.gp.clone(),
            target: b.target,
            patience: b.patience,
        })
    }

    pub fn grid_spec(&self) -> Option<GridSpec> {
        let MethodConfig::Grid(g) = &self.method else {
            return None;
        };
        let v = &g.values;
        Some(GridSpec::new([v.alpha.clone(), v.beta.clone(), v.gamma.clone(), v.rho.clone()]))
    }

    fn reservoir_config(&self, inputs: usize) -> ReservoirConfig {
        let r = &self.reservoir;
        // The point is replaced at every evaluation.
        let mut rc = ReservoirConfig::new(r.nodes, inputs, rcopt::hyperspace::HyperPoint::new(1.0, 0.1, 0.01, 0.01), r.seed);
        rc.i0 = r.i0;
        rc.quantisation_enabled = r.quantisation;
        rc.quant_in_bits = r.quant_in_bits;
        rc.quant_out_bits = r.quant_out_bits;
        rc
    }

    /// The dataset behind a synthetic or feature-file task.
    pub fn dataset(&self) -> Result<Option<Dataset>, rcopt::Error> {
        match &self.task {
            TaskConfig::Toy(_) => Ok(None),
            TaskConfig::Synthetic(spec) => generate_synthetic(spec).map(Some),
            TaskConfig::Features(f) => load_features(&f.path, f.manifest.as_deref()).map(Some),
        }
    }

    /// Builds the objective. Loading a feature dataset can fail at run time.
    pub fn objective(&self) -> Result<Box<dyn Objective>, rcopt::Error> {
        let space = self.space().map_err(rcopt::Error::Domain)?;
        if let TaskConfig::Toy(t) = &self.task {
            return Ok(Box::new(ToyObjective::new(t.surface, space)));
        }
        let dataset = self.dataset()?.expect("not a toy task");
        let label = match &self.task {
            TaskConfig::Synthetic(s) => format!("synthetic seed={}", s.seed),
            TaskConfig::Features(f) => format!("features {}", f.path.display()),
            TaskConfig::Toy(_) => unreachable!(),
        };
        Ok(Box::new(ReservoirObjective {
            reservoir: self.reservoir_config(dataset.features),
            dataset,
            training: self.training,
            policy: self.reservoir.state_policy,
            label,
        }))
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| format!("cannot serialise configuration: {e}"))
    }
}
