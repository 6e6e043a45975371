//! The `rcopt` command line.
//!
//! Exit codes: 0 success, 1 runtime failure or replay divergence, 2 bad
//! configuration or unreadable log.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rcopt::campaign::{
    self, first_divergence, iterations_to_within, run_bayesian, run_bayesian_with, run_grid, run_grid_with,
    sensitivity_report, CampaignLog, SensitivityReport, DEFAULT_TOP_FRACTION, MIN_SENSITIVITY_OBSERVATIONS,
};
use rcopt::hyperspace::DIM_NAMES;
use rcopt::logfile::{self, LogWriter};

use crate::config::{CampaignConfig, Overrides, OUT_ENV};

/// Name of the resolved configuration stored with each campaign.
pub const CONFIG_FILE: &str = "config.toml";

/// Slacks reported by `report`, in objective units.
pub const REPORT_SLACKS: [f64; 2] = [0.0, 0.013];

#[derive(Debug, Parser)]
#[command(name = "rcopt", version, about = "Hyper-parameter search for simulated photonic reservoir computers")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the campaign a configuration file describes.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides RCOPT_OUT and the file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent evaluations for grid campaigns.
        #[arg(long)]
        workers: Option<usize>,
        /// Pick the ridge λ on held-out training sequences.
        #[arg(long)]
        tune_lambda: bool,
    },
    /// Summarise a campaign log.
    Report {
        /// Campaign directory or observations file.
        log: PathBuf,
        /// Share of the best observations used for the sensitivity table.
        #[arg(long, default_value_t = DEFAULT_TOP_FRACTION)]
        top_fraction: f64,
    },
    /// Re-run a campaign and check it reproduces the stored log.
    Replay {
        /// Campaign directory or observations file.
        log: PathBuf,
        /// Defaults to the configuration stored with the log.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        tune_lambda: bool,
    },
    /// Write the dataset of a synthetic or feature-file task to a directory.
    ExportDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum Failure {
    /// Exit 2.
    Config(String),
    /// Exit 1.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (program name first) and runs the command, writing reports
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    init_logging(cli.verbose);
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Optimize {
            config,
            out: out_dir,
            seed,
            workers,
            tune_lambda,
        } => {
            let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
            let overrides = Overrides {
                seed,
                workers,
                tune_lambda,
                out: out_dir.or(env_out),
            };
            let cfg = load_config(&config, &overrides)?;
            let log = optimize(&cfg)?;
            print_summary(&log, out).map_err(runtime)?;
            Ok(0)
        }
        Command::Report { log, top_fraction } => {
            if !(top_fraction > 0.0 && top_fraction <= 1.0) {
                return Err(Failure::Config(format!("--top-fraction must lie in (0, 1], got {top_fraction}")));
            }
            let log = logfile::read_campaign(&log).map_err(|e| Failure::Config(e.to_string()))?;
            report(&log, top_fraction, out).map_err(runtime)?;
            Ok(0)
        }
        Command::Replay {
            log,
            config,
            seed,
            workers,
            tune_lambda,
        } => {
            let stored = logfile::read_campaign(&log).map_err(|e| Failure::Config(e.to_string()))?;
            let config = config.unwrap_or_else(|| campaign_dir(&log).join(CONFIG_FILE));
            let overrides = Overrides {
                seed,
                workers,
                tune_lambda,
                out: None,
            };
            let cfg = load_config(&config, &overrides)?;
            replay(&stored, &cfg, out)
        }
        Command::ExportDataset { config, out: dir } => {
            let cfg = load_config(&config, &Overrides::default())?;
            let dataset = cfg
                .dataset()
                .map_err(runtime)?
                .ok_or_else(|| Failure::Config("toy tasks have no dataset to export".into()))?;
            rcopt::tasks::export_dataset(&dataset, &dir).map_err(runtime)?;
            writeln!(
                out,
                "wrote {} sequences (K = {}, C = {}) to {}",
                dataset.sequences.len(),
                dataset.features,
                dataset.classes,
                dir.display()
            )
            .map_err(runtime)?;
            Ok(0)
        }
    }
}

fn campaign_dir(log: &Path) -> PathBuf {
    if log.is_dir() {
        log.to_path_buf()
    } else {
        log.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<CampaignConfig, Failure> {
    let mut cfg = CampaignConfig::load(path).map_err(Failure::Config)?;
    cfg.apply(overrides);
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

/// Runs the campaign, streaming the log, surrogate snapshots, summary, plot
/// table and resolved configuration into the output directory.
pub fn optimize(cfg: &CampaignConfig) -> Result<CampaignLog, Failure> {
    let dir = cfg
        .output
        .dir
        .clone()
        .ok_or_else(|| Failure::Config(format!("no output directory: set [output] dir, {OUT_ENV} or --out")))?;
    let text = cfg.to_toml().map_err(Failure::Config)?;
    let space = cfg.space().map_err(Failure::Config)?;
    let objective = cfg.objective().map_err(runtime)?;

    let header = campaign::CampaignHeader {
        method: if cfg.bayes_config().is_some() {
            campaign::CampaignKind::Bayes
        } else {
            campaign::CampaignKind::Grid
        },
        seed: cfg.seed(),
        budget: match (cfg.bayes_config(), cfg.grid_spec()) {
            (Some(b), _) => b.budget,
            (_, Some(g)) => g.len(),
            _ => unreachable!(),
        },
        space: space.clone(),
        task: objective.describe(),
        direction: objective.direction(),
    };
    let mut writer = LogWriter::create(&dir, &header).map_err(runtime)?;
    std::fs::write(dir.join(CONFIG_FILE), text).map_err(runtime)?;
    let mut sink = |e: campaign::Event<'_>| writer.record(e);
    let log = match (cfg.bayes_config(), cfg.grid_spec(), &cfg.method) {
        (Some(b), _, _) => run_bayesian_with(objective.as_ref(), &space, &b, &mut sink),
        (_, Some(g), config::MethodConfig::Grid(block)) => {
            run_grid_with(objective.as_ref(), &space, &g, block.seed, block.workers, &mut sink)
        }
        _ => unreachable!(),
    }
    .map_err(runtime)?;
    writer.finish(&log).map_err(runtime)?;
    Ok(log)
}

/// Re-runs `cfg` in memory and compares it with `stored`.
pub fn replay(stored: &CampaignLog, cfg: &CampaignConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let space = cfg.space().map_err(Failure::Config)?;
    let objective = cfg.objective().map_err(runtime)?;
    let rerun = match (cfg.bayes_config(), cfg.grid_spec(), &cfg.method) {
        (Some(b), _, _) => run_bayesian(objective.as_ref(), &space, &b),
        (_, Some(g), config::MethodConfig::Grid(block)) => {
            run_grid(objective.as_ref(), &space, &g, block.seed, block.workers)
        }
        _ => unreachable!(),
    }
    .map_err(runtime)?;
    match first_divergence(stored, &rerun) {
        None => {
            writeln!(out, "replay identical: {} observations", stored.observations.len()).map_err(runtime)?;
            Ok(0)
        }
        Some(d) => Err(Failure::Runtime(format!(
            "replay diverges at iteration {}: {}",
            d.iteration, d.reason
        ))),
    }
}

fn print_summary(log: &CampaignLog, out: &mut dyn Write) -> std::io::Result<()> {
    let failures = log.observations.iter().filter(|o| !o.succeeded()).count();
    writeln!(out, "evaluations: {} ({failures} failed)", log.observations.len())?;
    match campaign::best(log) {
        Ok(b) => writeln!(
            out,
            "best: {} at iteration {} (alpha {}, beta {}, gamma {}, rho {})",
            b.objective.unwrap(),
            b.iteration,
            b.point.alpha,
            b.point.beta,
            b.point.gamma,
            b.point.rho
        ),
        Err(_) => writeln!(out, "best: none, every evaluation failed"),
    }
}

/// Best observation, iterations to within each of [`REPORT_SLACKS`], and
/// the sensitivity table.
pub fn report(log: &CampaignLog, top_fraction: f64, out: &mut dyn Write) -> std::io::Result<()> {
    let h = &log.header;
    writeln!(
        out,
        "campaign: {:?}, seed {}, budget {}, task {}, {:?}",
        h.method, h.seed, h.budget, h.task, h.direction
    )?;
    print_summary(log, out)?;
    if campaign::best(log).is_ok() {
        writeln!(out, "\niterations to within slack of the final best")?;
        writeln!(out, "  slack\titeration")?;
        for slack in REPORT_SLACKS {
            let it = iterations_to_within(log, slack).expect("log has a best observation");
            writeln!(out, "  {slack}\t{it}")?;
        }
    }
    writeln!(out)?;
    match sensitivity_report(log, top_fraction).expect("top fraction checked") {
        SensitivityReport::Insufficient { observations } => writeln!(
            out,
            "sensitivity: insufficient data ({observations} successful observations, need {MIN_SENSITIVITY_OBSERVATIONS})"
        )?,
        SensitivityReport::Spreads { considered, dims } => {
            writeln!(out, "sensitivity over the best {considered} observations (unit coordinates)")?;
            writeln!(out, "  dim\tmin\tmax\tspread\tverdict")?;
            for (d, name) in dims.iter().zip(DIM_NAMES) {
                let verdict = if d.pinned {
                    "pinned"
                } else if d.insensitive {
                    "insensitive"
                } else {
                    "sensitive"
                };
                writeln!(out, "  {name}\t{:.3}\t{:.3}\t{:.3}\t{verdict}", d.min, d.max, d.spread)?;
            }
        }
    }
    Ok(())
}
