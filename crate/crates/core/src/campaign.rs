//! Optimisation campaigns: initial design, the Bayesian loop, the grid
//! baseline, and the summaries computed from a finished log.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{propose_next, AcquisitionConfig};
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel, KernelParams};
use crate::hyperspace::{is_duplicate_unit, GridSpec, HyperPoint, HyperSpace, DIMS, DIM_NAMES};
use crate::rng::{substream, STREAM_ACQUISITION_BASE, STREAM_DESIGN, STREAM_GP_FIT_BASE};

/// Spread at or above which a dimension counts as insensitive.
pub const INSENSITIVE_SPREAD: f64 = 0.8;
/// Fewest successful observations a sensitivity report is computed from.
pub const MIN_SENSITIVITY_OBSERVATIONS: usize = 10;
/// Share of the best observations a sensitivity report looks at by default.
pub const DEFAULT_TOP_FRACTION: f64 = 0.1;

/// Something to optimise. Implementations must be deterministic in the point.
pub trait Objective: Sync {
    fn evaluate(&self, point: &HyperPoint) -> Result<f64>;
    fn direction(&self) -> Direction;
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Strictly better.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// The value in minimisation form, as the surrogate sees it.
    pub fn to_cost(self, v: f64) -> f64 {
        match self {
            Direction::Maximize => -v,
            Direction::Minimize => v,
        }
    }

    /// How far `v` falls short of `reference` (≥ 0 when `reference` is at
    /// least as good).
    pub fn shortfall(self, v: f64, reference: f64) -> f64 {
        self.to_cost(v) - self.to_cost(reference)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Initial,
    Bayes,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignKind {
    Bayes,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 1-based position in the log.
    pub iteration: usize,
    pub method: Method,
    #[serde(flatten)]
    pub point: HyperPoint,
    /// `None` when the evaluation failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds spent in the objective.
    pub wall_time: f64,
    pub seed: u64,
}

impl Observation {
    pub fn succeeded(&self) -> bool {
        self.objective.is_some()
    }
}

/// Kernel parameters behind one Bayesian proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSnapshot {
    /// Iteration of the observation this surrogate proposed.
    pub iteration: usize,
    /// Successful observations the surrogate was trained on.
    pub training_points: usize,
    /// `None` when no surrogate could be fitted and the point was drawn at random.
    pub params: Option<KernelParams>,
    pub jitter: Option<f64>,
    pub expected_improvement: Option<f64>,
    #[serde(default)]
    pub duplicate_fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignHeader {
    pub method: CampaignKind,
    pub seed: u64,
    pub budget: usize,
    pub space: HyperSpace,
    pub task: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignLog {
    pub header: CampaignHeader,
    pub observations: Vec<Observation>,
    pub snapshots: Vec<SurrogateSnapshot>,
}

/// Progress notifications, delivered in log order as the campaign runs.
#[derive(Clone, Copy, Debug)]
pub enum Event<'a> {
    Observation(&'a Observation),
    Snapshot(&'a SurrogateSnapshot),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub budget: usize,
    pub init_count: usize,
    pub seed: u64,
    pub acquisition: AcquisitionConfig,
    pub gp: GpConfig,
    /// Stop once an observation is at least this good.
    pub target: Option<f64>,
    /// Stop after this many consecutive Bayesian steps without improvement.
    pub patience: Option<usize>,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            budget: 39,
            init_count: 8,
            seed: 0,
            acquisition: AcquisitionConfig::default(),
            gp: GpConfig::default(),
            target: None,
            patience: None,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_count < 2 {
            return Err(Error::domain("init_count must be at least 2"));
        }
        if self.budget < self.init_count {
            return Err(Error::domain(format!(
                "budget {} is smaller than init_count {}",
                self.budget, self.init_count
            )));
        }
        if self.patience == Some(0) {
            return Err(Error::domain("patience must be at least 1"));
        }
        if self.target.is_some_and(|t| !t.is_finite()) {
            return Err(Error::domain("target must be finite"));
        }
        self.acquisition.validate()
    }
}

/// Corners of the free unit cube picked by greedy maximin from the all-low
/// corner, then the center, then seeded uniform fill if `count` exceeds
/// the corners plus center.
pub fn initial_design(space: &HyperSpace, count: usize, rng: &mut crate::rng::Rng) -> Result<Vec<HyperPoint>> {
    if count < 2 {
        return Err(Error::domain(format!("initial design needs at least 2 points, got {count}")));
    }
    let d = space.free_dims().len();
    if d == 0 {
        return Err(Error::domain("every dimension is pinned; nothing to search"));
    }
    let corner = |bits: usize| -> Vec<f64> {
        (0..d).map(|j| if bits >> j & 1 == 1 { 1.0 } else { 0.0 }).collect()
    };
    let n_corners = 1usize << d;
    let take = (count - 1).min(n_corners);

    let mut chosen: Vec<Vec<f64>> = vec![corner(0)];
    let mut remaining: Vec<usize> = (1..n_corners).collect();
    while chosen.len() < take {
        let gaps: Vec<f64> = remaining
            .iter()
            .map(|&c| {
                let x = corner(c);
                chosen.iter().map(|y| euclidean(&x, y)).fold(f64::INFINITY, f64::min)
            })
            .collect();
        let widest = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..remaining.len())
            .filter(|&i| gaps[i] >= widest - 1e-12)
            .collect();
        let pick = *tied.choose(rng).expect("at least one corner remains");
        chosen.push(corner(remaining.remove(pick)));
    }
    chosen.push(vec![0.5; d]);
    while chosen.len() < count {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if !is_duplicate_unit(&x, &chosen, crate::hyperspace::DEFAULT_DUPLICATE_TOL) {
            chosen.push(x);
        }
    }
    chosen.iter().map(|u| space.point_from_free(u)).collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn observe(
    objective: &dyn Objective,
    point: HyperPoint,
    iteration: usize,
    method: Method,
    seed: u64,
) -> Observation {
    let start = Instant::now();
    let result = objective.evaluate(&point);
    let wall_time = start.elapsed().as_secs_f64();
    let (objective, error) = match result {
        Ok(v) if v.is_finite() => (Some(v), None),
        Ok(v) => (None, Some(format!("objective returned {v}"))),
        Err(e) => (None, Some(e.to_string())),
    };
    if let Some(e) = &error {
        log::warn!("iteration {iteration}: evaluation failed: {e}");
    }
    Observation {
        iteration,
        method,
        point,
        objective,
        error,
        wall_time,
        seed,
    }
}

pub fn run_bayesian(objective: &dyn Objective, space: &HyperSpace, cfg: &BayesConfig) -> Result<CampaignLog> {
    run_bayesian_with(objective, space, cfg, &mut |_| Ok(()))
}

/// The Bayesian loop, reporting each observation and surrogate snapshot to
/// `on_event` as soon as it exists. An error from `on_event` aborts the run.
pub fn run_bayesian_with(
    objective: &dyn Objective,
    space: &HyperSpace,
    cfg: &BayesConfig,
    on_event: &mut dyn FnMut(Event<'_>) -> Result<()>,
) -> Result<CampaignLog> {
    cfg.validate()?;
    let direction = objective.direction();
    let mut log = CampaignLog {
        header: CampaignHeader {
            method: CampaignKind::Bayes,
            seed: cfg.seed,
            budget: cfg.budget,
            space: space.clone(),
            task: objective.describe(),
            direction,
        },
        observations: Vec::with_capacity(cfg.budget),
        snapshots: Vec::new(),
    };
    let mut stop = StopRule::new(cfg, direction);

    let design = initial_design(space, cfg.init_count, &mut substream(cfg.seed, STREAM_DESIGN))?;
    for point in design {
        let obs = observe(objective, point, log.observations.len() + 1, Method::Initial, cfg.seed);
        on_event(Event::Observation(&obs))?;
        let done = stop.update(&obs, false);
        log.observations.push(obs);
        if done {
            return Ok(log);
        }
    }

    let mut warm: Option<KernelParams> = None;
    while log.observations.len() < cfg.budget {
        let iteration = log.observations.len() + 1;
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = log
            .observations
            .iter()
            .filter_map(|o| {
                let v = o.objective?;
                Some((space.project(&space.to_unit_clamped(&o.point)), direction.to_cost(v)))
            })
            .unzip();
        let history: Vec<HyperPoint> = log.observations.iter().map(|o| o.point).collect();
        let mut acq_rng = substream(cfg.seed, STREAM_ACQUISITION_BASE + iteration as u64);

        let fitted = GpModel::fit_warm(
            &xs,
            &ys,
            &cfg.gp,
            &mut substream(cfg.seed, STREAM_GP_FIT_BASE + iteration as u64),
            warm.as_ref(),
        );
        let (point, snapshot) = match fitted {
            Ok(model) => {
                let p = propose_next(&model, space, &history, &cfg.acquisition, &mut acq_rng)?;
                warm = Some(model.params().clone());
                let snap = SurrogateSnapshot {
                    iteration,
                    training_points: xs.len(),
                    params: Some(model.params().clone()),
                    jitter: Some(model.jitter()),
                    expected_improvement: Some(p.expected_improvement),
                    duplicate_fallback: p.duplicate_fallback,
                };
                (p.point, snap)
            }
            Err(e) => {
                log::warn!("iteration {iteration}: no surrogate ({e}); sampling at random");
                let (point, duplicate_fallback) =
                    random_fresh_point(space, &history, cfg.acquisition.duplicate_tol, &mut acq_rng)?;
                let snap = SurrogateSnapshot {
                    iteration,
                    training_points: xs.len(),
                    params: None,
                    jitter: None,
                    expected_improvement: None,
                    duplicate_fallback,
                };
                (point, snap)
            }
        };
        on_event(Event::Snapshot(&snapshot))?;
        log.snapshots.push(snapshot);

        let obs = observe(objective, point, iteration, Method::Bayes, cfg.seed);
        on_event(Event::Observation(&obs))?;
        let done = stop.update(&obs, true);
        log.observations.push(obs);
        if done {
            break;
        }
    }
    Ok(log)
}

fn random_fresh_point(
    space: &HyperSpace,
    history: &[HyperPoint],
    tol: f64,
    rng: &mut crate::rng::Rng,
) -> Result<(HyperPoint, bool)> {
    let d = space.free_dims().len();
    let mut last = None;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let p = space.point_from_free(&x)?;
        if !space.is_duplicate(&p, history, tol) {
            return Ok((p, false));
        }
        last = Some(p);
    }
    Ok((last.expect("loop ran"), true))
}

struct StopRule {
    target: Option<f64>,
    patience: Option<usize>,
    direction: Direction,
    best: Option<f64>,
    stale: usize,
}

impl StopRule {
    fn new(cfg: &BayesConfig, direction: Direction) -> Self {
        StopRule {
            target: cfg.target,
            patience: cfg.patience,
            direction,
            best: None,
            stale: 0,
        }
    }

    fn update(&mut self, obs: &Observation, counts_for_patience: bool) -> bool {
        let improved = match (obs.objective, self.best) {
            (Some(v), None) => Some(v),
            (Some(v), Some(b)) if self.direction.better(v, b) => Some(v),
            _ => None,
        };
        match improved {
            Some(v) => {
                self.best = Some(v);
                self.stale = 0;
            }
            None if counts_for_patience => self.stale += 1,
            None => {}
        }
        let reached = match (self.target, obs.objective) {
            (Some(t), Some(v)) => self.direction.shortfall(v, t) <= 0.0,
            _ => false,
        };
        reached || self.patience.is_some_and(|p| self.stale >= p)
    }
}

pub fn run_grid(
    objective: &dyn Objective,
    space: &HyperSpace,
    grid: &GridSpec,
    seed: u64,
    workers: usize,
) -> Result<CampaignLog> {
    run_grid_with(objective, space, grid, seed, workers, &mut |_| Ok(()))
}

/// Evaluates every grid point, `workers` at a time, reporting observations
/// in grid order.
pub fn run_grid_with(
    objective: &dyn Objective,
    space: &HyperSpace,
    grid: &GridSpec,
    seed: u64,
    workers: usize,
    on_event: &mut dyn FnMut(Event<'_>) -> Result<()>,
) -> Result<CampaignLog> {
    let points = space.grid_points(grid)?;
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start {workers} workers: {e}")))?;
    let mut log = CampaignLog {
        header: CampaignHeader {
            method: CampaignKind::Grid,
            seed,
            budget: points.len(),
            space: space.clone(),
            task: objective.describe(),
            direction: objective.direction(),
        },
        observations: Vec::with_capacity(points.len()),
        snapshots: Vec::new(),
    };
    for (chunk_index, chunk) in points.chunks(workers).enumerate() {
        let first = chunk_index * workers + 1;
        let batch: Vec<Observation> = pool.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(i, p)| observe(objective, *p, first + i, Method::Grid, seed))
                .collect()
        });
        for obs in batch {
            on_event(Event::Observation(&obs))?;
            log.observations.push(obs);
        }
    }
    Ok(log)
}

/// Best successful observation; the earliest wins ties.
pub fn best(log: &CampaignLog) -> Result<&Observation> {
    let dir = log.header.direction;
    let mut best: Option<(&Observation, f64)> = None;
    for o in &log.observations {
        if let Some(v) = o.objective {
            if best.is_none_or(|(_, b)| dir.better(v, b)) {
                best = Some((o, v));
            }
        }
    }
    best.map(|(o, _)| o)
        .ok_or_else(|| Error::domain("log has no successful observation"))
}

/// `(iteration, objective, running best)` per observation. Failed
/// observations carry the running best forward.
pub fn running_best(log: &CampaignLog) -> Vec<(usize, Option<f64>, Option<f64>)> {
    let dir = log.header.direction;
    let mut best: Option<f64> = None;
    log.observations
        .iter()
        .map(|o| {
            if let Some(v) = o.objective {
                if best.is_none_or(|b| dir.better(v, b)) {
                    best = Some(v);
                }
            }
            (o.iteration, o.objective, best)
        })
        .collect()
}

/// First iteration whose running best is within `slack` of the final best.
pub fn iterations_to_within(log: &CampaignLog, slack: f64) -> Result<usize> {
    if !(slack >= 0.0) {
        return Err(Error::domain(format!("slack must be non-negative, got {slack}")));
    }
    let final_best = best(log)?.objective.expect("best succeeded");
    let dir = log.header.direction;
    running_best(log)
        .into_iter()
        .find(|(_, _, b)| b.is_some_and(|b| dir.shortfall(b, final_best) <= slack + 1e-12))
        .map(|(it, _, _)| it)
        .ok_or_else(|| Error::domain("running best never reaches the final best"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSpread {
    pub name: String,
    pub pinned: bool,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub insensitive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SensitivityReport {
    Insufficient { observations: usize },
    Spreads { considered: usize, dims: Vec<DimSpread> },
}

/// Per-dimension spread, in unit coordinates, of the best `top_fraction` of
/// successful observations. A dimension the objective ignores leaves its
/// best points scattered, so a wide spread marks it insensitive.
pub fn sensitivity_report(log: &CampaignLog, top_fraction: f64) -> Result<SensitivityReport> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::domain(format!("top_fraction must lie in (0, 1], got {top_fraction}")));
    }
    let dir = log.header.direction;
    let mut ok: Vec<&Observation> = log.observations.iter().filter(|o| o.succeeded()).collect();
    if ok.len() < MIN_SENSITIVITY_OBSERVATIONS {
        return Ok(SensitivityReport::Insufficient { observations: ok.len() });
    }
    // Stable sort keeps earlier iterations first among equal objectives.
    ok.sort_by(|a, b| {
        let (va, vb) = (dir.to_cost(a.objective.unwrap()), dir.to_cost(b.objective.unwrap()));
        va.total_cmp(&vb)
    });
    let considered = ((top_fraction * ok.len() as f64).ceil() as usize).clamp(1, ok.len());
    let space = &log.header.space;
    let units: Vec<[f64; DIMS]> = ok[..considered]
        .iter()
        .map(|o| space.to_unit_clamped(&o.point))
        .collect();
    let dims = (0..DIMS)
        .map(|d| {
            let min = units.iter().map(|u| u[d]).fold(f64::INFINITY, f64::min);
            let max = units.iter().map(|u| u[d]).fold(f64::NEG_INFINITY, f64::max);
            let spread = max - min;
            DimSpread {
                name: DIM_NAMES[d].to_string(),
                pinned: space.pinned(d).is_some(),
                min,
                max,
                spread,
                insensitive: spread >= INSENSITIVE_SPREAD,
            }
        })
        .collect();
    Ok(SensitivityReport::Spreads { considered, dims })
}

/// Where a re-run first departs from a stored log.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub iteration: usize,
    pub reason: String,
}

/// Compares two logs record by record: method, point, objective and seed
/// must agree bit for bit. Wall times are ignored.
pub fn first_divergence(stored: &CampaignLog, rerun: &CampaignLog) -> Option<Divergence> {
    let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
    for (i, (a, b)) in stored.observations.iter().zip(&rerun.observations).enumerate() {
        let iteration = i + 1;
        let reason = if a.iteration != b.iteration {
            Some(format!("iteration index {} vs {}", a.iteration, b.iteration))
        } else if a.seed != b.seed {
            Some(format!("seed {} vs {}", a.seed, b.seed))
        } else if a.method != b.method {
            Some(format!("method {:?} vs {:?}", a.method, b.method))
        } else if !a.point.to_array().iter().zip(b.point.to_array()).all(|(x, y)| same(*x, y)) {
            Some(format!("point {:?} vs {:?}", a.point, b.point))
        } else if match (a.objective, b.objective) {
            (Some(x), Some(y)) => !same(x, y),
            (None, None) => false,
            _ => true,
        } {
            Some(format!("objective {:?} vs {:?}", a.objective, b.objective))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Some(Divergence { iteration, reason });
        }
    }
    let (n, m) = (stored.observations.len(), rerun.observations.len());
    (n != m).then(|| Divergence {
        iteration: n.min(m) + 1,
        reason: format!("stored log has {n} observations, re-run has {m}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl Objective for Quadratic {
        fn evaluate(&self, p: &HyperPoint) -> Result<f64> {
            Ok((p.alpha - 0.8).powi(2))
        }
        fn direction(&self) -> Direction {
            Direction::Minimize
        }
        fn describe(&self) -> String {
            "quadratic".into()
        }
    }

    fn synthetic_log(values: &[Option<f64>], direction: Direction) -> CampaignLog {
        CampaignLog {
            header: CampaignHeader {
                method: CampaignKind::Bayes,
                seed: 0,
                budget: values.len(),
                space: HyperSpace::standard(),
                task: "test".into(),
                direction,
            },
            observations: values
                .iter()
                .enumerate()
                .map(|(i, v)| Observation {
                    iteration: i + 1,
                    method: Method::Bayes,
                    point: HyperPoint::new(0.1 + 0.01 * i as f64, 0.5, 0.5, 0.5),
                    objective: *v,
                    error: v.is_none().then(|| "failed".into()),
                    wall_time: 0.0,
                    seed: 0,
                })
                .collect(),
            snapshots: vec![],
        }
    }

    #[test]
    fn design_of_eight_in_four_dims() {
        let space = HyperSpace::standard();
        let pts = initial_design(&space, 8, &mut substream(1, STREAM_DESIGN)).unwrap();
        assert_eq!(pts.len(), 8);
        let units: Vec<_> = pts.iter().map(|p| space.to_unit(p).unwrap()).collect();
        assert_eq!(units[0], [0.0; 4]);
        assert_eq!(units[1], [1.0; 4]);
        for u in &units[..7] {
            assert!(u.iter().all(|c| *c == 0.0 || *c == 1.0));
        }
        assert_eq!(units[7], [0.5; 4]);
        for i in 0..8 {
            for j in 0..i {
                assert!(units[i] != units[j]);
            }
        }
    }

    #[test]
    fn design_of_two_and_overfull() {
        let space = HyperSpace::standard();
        let two = initial_design(&space, 2, &mut substream(1, 4)).unwrap();
        assert_eq!(space.to_unit(&two[0]).unwrap(), [0.0; 4]);
        assert_eq!(space.to_unit(&two[1]).unwrap(), [0.5; 4]);
        let many = initial_design(&space, 20, &mut substream(1, 4)).unwrap();
        assert_eq!(many.len(), 20);
        assert!(initial_design(&space, 1, &mut substream(1, 4)).is_err());
    }

    #[test]
    fn budget_equal_to_design() {
        let cfg = BayesConfig {
            budget: 5,
            init_count: 5,
            ..Default::default()
        };
        let log = run_bayesian(&Quadratic, &HyperSpace::standard(), &cfg).unwrap();
        assert_eq!(log.observations.len(), 5);
        assert!(log.observations.iter().all(|o| o.method == Method::Initial));
        assert!(log.snapshots.is_empty());
    }

    #[test]
    fn target_stops_early() {
        let cfg = BayesConfig {
            budget: 30,
            init_count: 4,
            target: Some(1.0),
            ..Default::default()
        };
        let log = run_bayesian(&Quadratic, &HyperSpace::standard(), &cfg).unwrap();
        assert_eq!(log.observations.len(), 1);
    }

    #[test]
    fn best_and_ties() {
        let log = synthetic_log(&[Some(0.5), None, Some(0.7), Some(0.7)], Direction::Maximize);
        assert_eq!(best(&log).unwrap().iteration, 3);
        let log = synthetic_log(&[Some(0.5), Some(0.2), Some(0.2)], Direction::Minimize);
        assert_eq!(best(&log).unwrap().iteration, 2);
        assert!(best(&synthetic_log(&[None], Direction::Maximize)).is_err());
    }

    #[test]
    fn iterations_to_within_examples() {
        let log = synthetic_log(&[Some(0.5), Some(0.6), Some(0.7)], Direction::Maximize);
        assert_eq!(iterations_to_within(&log, 0.1).unwrap(), 2);
        assert_eq!(iterations_to_within(&log, 0.0).unwrap(), 3);
        assert_eq!(iterations_to_within(&log, 0.2).unwrap(), 1);
    }

    #[test]
    fn sensitivity_needs_ten() {
        let log = synthetic_log(&[Some(1.0)], Direction::Maximize);
        assert_eq!(
            sensitivity_report(&log, 0.5).unwrap(),
            SensitivityReport::Insufficient { observations: 1 }
        );
    }

    #[test]
    fn sensitivity_full_fraction_is_range() {
        let values: Vec<Option<f64>> = (0..12).map(|i| Some(i as f64)).collect();
        let log = synthetic_log(&values, Direction::Maximize);
        let SensitivityReport::Spreads { considered, dims } = sensitivity_report(&log, 1.0).unwrap() else {
            panic!("expected spreads");
        };
        assert_eq!(considered, 12);
        let iv = log.header.space.interval(0);
        let expected = 0.11 / (iv.high - iv.low);
        assert!((dims[0].spread - expected).abs() < 1e-12);
        assert_eq!(dims[1].spread, 0.0);
    }

    #[test]
    fn divergence_detection() {
        let a = synthetic_log(&[Some(0.5), Some(0.6)], Direction::Maximize);
        assert_eq!(first_divergence(&a, &a), None);
        let mut b = a.clone();
        b.observations[1].point.beta = 0.25;
        assert_eq!(first_divergence(&a, &b).unwrap().iteration, 2);
        let mut c = a.clone();
        c.observations.pop();
        assert_eq!(first_divergence(&a, &c).unwrap().iteration, 2);
    }
}
