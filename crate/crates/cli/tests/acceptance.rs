//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Campaigns go through the command line's own entry point so
//! the replay check exercises exactly what a user would run.

#[path = "../../core/tests/common/equivalence.rs"]
mod equivalence;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rcopt::campaign::{best, sensitivity_report, CampaignLog, SensitivityReport, DEFAULT_TOP_FRACTION};
use rcopt::logfile::read_campaign;
use rcopt::tasks::ToySurface;
use tempfile::TempDir;

const SEEDS: u64 = 10;

const FREE: &str = r#"{ low = 1e-10, high = 1.0, scale = "log10" }"#;
const PINNED: &str = r#"{ low = 1e-10, high = 1.0, scale = "log10", pin = 0.01 }"#;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn from_check(r: Result<String, String>) -> Verdict {
    match r {
        Ok(d) => verdict(true, d),
        Err(e) => verdict(false, e),
    }
}

fn within(limit: Duration, elapsed: Duration, v: Verdict) -> Verdict {
    if elapsed <= limit {
        v
    } else {
        verdict(false, format!("{} but took {elapsed:.1?}, limit {limit:?}", v.detail))
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = rcopt_cli::run(std::iter::once("rcopt").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into(), String::from_utf8_lossy(&err).into())
}

struct Workspace {
    root: TempDir,
    /// Campaign directories replayed by criterion 9.
    campaigns: Vec<PathBuf>,
}

impl Workspace {
    /// Writes `config` and runs it, returning the stored log.
    fn optimize(&mut self, name: &str, config: &str, replay: bool) -> Result<CampaignLog, String> {
        let cfg = self.root.path().join(format!("{name}.toml"));
        fs::write(&cfg, config).map_err(|e| e.to_string())?;
        let out = self.root.path().join(name);
        let (code, _, err) = cli(&["optimize", "--config", path(&cfg), "--out", path(&out)]);
        if code != 0 {
            return Err(format!("{name}: exit {code}: {err}"));
        }
        if replay {
            self.campaigns.push(out.clone());
        }
        read_campaign(&out).map_err(|e| e.to_string())
    }
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn space(beta: &str, gamma: &str, rho: &str) -> String {
    format!(
        "[space]\nalpha = {{ low = 0.1, high = 1.5, scale = \"linear\" }}\nbeta = {beta}\ngamma = {gamma}\nrho = {rho}\n"
    )
}

fn bayes(budget: usize, init: usize, seed: u64) -> String {
    format!("[method]\nkind = \"bayes\"\nbudget = {budget}\ninit_count = {init}\nseed = {seed}\n")
}

fn table_grid(seed: u64) -> String {
    format!(
        "[method]\nkind = \"grid\"\nseed = {seed}\n\n[method.values]\nalpha = [0.6, 0.8, 1.0]\nbeta = [0.01, 0.1]\ngamma = [0.001, 0.01, 0.1]\nrho = [0.001, 0.01, 0.1]\n"
    )
}

fn toy(surface: &str) -> String {
    format!("[task]\nkind = \"toy\"\nsurface = \"{surface}\"\n")
}

fn criterion_1(ws: &mut Workspace) -> Verdict {
    let config = format!("{}{}{}", toy("sensitive_2of4_4d"), space(FREE, FREE, FREE), table_grid(0));
    match ws.optimize("grid_cardinality", &config, false) {
        Ok(log) => verdict(log.observations.len() == 54, format!("{} evaluations", log.observations.len())),
        Err(e) => verdict(false, e),
    }
}

fn criterion_6(ws: &mut Workspace) -> Verdict {
    let mut basin = 0;
    let mut pit = 0;
    let fstar = ToySurface::Pit2d.minimum();
    for seed in 0..SEEDS {
        let config = format!("{}{}{}", toy("double_min_1d"), space(PINNED, PINNED, PINNED), bayes(12, 3, seed));
        let log = match ws.optimize(&format!("double_min_{seed}"), &config, true) {
            Ok(log) => log,
            Err(e) => return verdict(false, e),
        };
        let hs = &log.header.space;
        if log
            .observations
            .iter()
            .take(12)
            .any(|o| ToySurface::in_global_basin(hs.to_unit(&o.point).unwrap()[0]))
        {
            basin += 1;
        }

        let config = format!("{}{}{}", toy("pit_2d"), space(FREE, PINNED, PINNED), bayes(19, 5, seed));
        let log = match ws.optimize(&format!("pit_{seed}"), &config, true) {
            Ok(log) => log,
            Err(e) => return verdict(false, e),
        };
        let first_19 = CampaignLog {
            observations: log.observations.iter().take(19).cloned().collect(),
            ..log
        };
        if best(&first_19).is_ok_and(|b| b.objective.unwrap() <= fstar + 0.01 * fstar.abs()) {
            pit += 1;
        }
    }
    verdict(
        basin >= 9 && pit >= 8,
        format!("double_min_1d basin in {basin}/{SEEDS} seeds (need 9); pit_2d within 1% in {pit}/{SEEDS} (need 8)"),
    )
}

fn criterion_7(ws: &mut Workspace) -> Verdict {
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..SEEDS {
        let task = format!(
            "[task]\nkind = \"synthetic\"\nfeatures = 20\nclasses = 6\nseed = {seed}\n\n[reservoir]\nnodes = 64\nseed = {seed}\n"
        );
        let sp = space(FREE, FREE, FREE);
        let grid = ws.optimize(&format!("synthetic_grid_{seed}"), &format!("{task}{sp}{}", table_grid(seed)), true);
        let bo = ws.optimize(&format!("synthetic_bayes_{seed}"), &format!("{task}{sp}{}", bayes(39, 8, seed)), true);
        let (grid, bo) = match (grid, bo) {
            (Ok(g), Ok(b)) => (g, b),
            (Err(e), _) | (_, Err(e)) => return verdict(false, e),
        };
        let g = best(&grid).map(|o| o.objective.unwrap()).unwrap_or(f64::NAN);
        let b = best(&bo).map(|o| o.objective.unwrap()).unwrap_or(f64::NAN);
        if b >= g {
            wins += 1;
        }
        rows.push(format!("{b:.3}/{g:.3}"));
    }
    verdict(
        wins >= 8,
        format!("BO ≥ grid in {wins}/{SEEDS} seeds (need 8); BO/grid best {}", rows.join(" ")),
    )
}

fn criterion_8(ws: &mut Workspace) -> Verdict {
    let config = format!("{}{}{}", toy("sensitive_2of4_4d"), space(FREE, FREE, FREE), bayes(200, 8, 0));
    let log = match ws.optimize("sensitivity", &config, true) {
        Ok(log) => log,
        Err(e) => return verdict(false, e),
    };
    let Ok(SensitivityReport::Spreads { considered, dims }) = sensitivity_report(&log, DEFAULT_TOP_FRACTION) else {
        return verdict(false, "no sensitivity table");
    };
    let spreads: Vec<f64> = dims.iter().map(|d| d.spread).collect();
    let flags_ok = !dims[0].insensitive && !dims[1].insensitive && dims[2].insensitive && dims[3].insensitive;
    let ok = spreads[0] <= 0.2 && spreads[1] <= 0.2 && spreads[2] >= 0.8 && spreads[3] >= 0.8 && flags_ok;

    // The report command must draw the same conclusion.
    let (code, text, _) = cli(&["report", path(ws.campaigns.last().unwrap())]);
    let verdicts: Vec<&str> = text
        .lines()
        .filter_map(|l| l.trim().split('\t').next_back().filter(|v| v.ends_with("sensitive")))
        .collect();
    let report_ok = code == 0 && verdicts == ["sensitive", "sensitive", "insensitive", "insensitive"];
    verdict(
        ok && report_ok,
        format!(
            "{} evaluations, best {considered}: spreads {:.3} {:.3} {:.3} {:.3}; report verdicts {verdicts:?}",
            log.observations.len(),
            spreads[0],
            spreads[1],
            spreads[2],
            spreads[3]
        ),
    )
}

fn criterion_9(ws: &Workspace) -> Verdict {
    let mut failures = Vec::new();
    for dir in &ws.campaigns {
        let (code, _, err) = cli(&["replay", path(dir)]);
        if code != 0 {
            failures.push(format!("{}: exit {code}: {}", dir.file_name().unwrap().to_string_lossy(), err.trim()));
        }
    }
    if ws.campaigns.is_empty() {
        return verdict(false, "no campaigns to replay");
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} campaigns replayed identically", ws.campaigns.len())
        } else {
            failures.join("; ")
        },
    )
}

/// Runs every property suite of the core crate and checks each `proptest!`
/// block asks for at least 100 cases.
fn criterion_10() -> Verdict {
    let tests_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests");
    let mut suites: Vec<String> = match fs::read_dir(&tests_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok()?.file_name().into_string().ok())
            .filter_map(|n| n.strip_suffix("_props.rs").map(|s| format!("{s}_props")))
            .collect(),
        Err(e) => return verdict(false, format!("cannot list {}: {e}", tests_dir.display())),
    };
    suites.sort();

    let mut problems = Vec::new();
    let mut fewest = usize::MAX;
    for suite in &suites {
        let source = fs::read_to_string(tests_dir.join(format!("{suite}.rs"))).unwrap_or_default();
        let blocks = source.matches("proptest! {").count();
        let cases: Vec<usize> = source
            .match_indices("with_cases(")
            .filter_map(|(i, m)| {
                let rest = &source[i + m.len()..];
                rest[..rest.find(')')?].trim().parse().ok()
            })
            .collect();
        if blocks == 0 || cases.len() != blocks {
            problems.push(format!("{suite}: {blocks} proptest blocks, {} case settings", cases.len()));
        }
        fewest = fewest.min(cases.iter().copied().min().unwrap_or(0));
    }
    if fewest < 100 {
        problems.push(format!("a suite runs only {fewest} cases"));
    }

    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut args = vec!["test", "-q", "-p", "rcopt"];
    for s in &suites {
        args.extend(["--test", s]);
    }
    let mut passed = 0;
    match Command::new(&cargo).args(&args).output() {
        Ok(out) => {
            let stdout = String::from_utf8_lossy(&out.stdout);
            for line in stdout.lines().filter(|l| l.starts_with("test result:")) {
                passed += line
                    .split_whitespace()
                    .skip_while(|w| *w != "ok." && *w != "FAILED.")
                    .nth(1)
                    .and_then(|n| n.parse::<usize>().ok())
                    .unwrap_or(0);
            }
            if !out.status.success() {
                let tail: Vec<&str> = stdout.lines().filter(|l| l.contains("FAILED") || l.contains("panicked")).collect();
                problems.push(format!("property tests failed: {}", tail.join(" | ")));
            }
        }
        Err(e) => problems.push(format!("cannot run {cargo}: {e}")),
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{passed} properties in {} suites, each ≥ {fewest} cases", suites.len())
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut ws = Workspace {
        root: TempDir::new().expect("temporary directory"),
        campaigns: Vec::new(),
    };
    type Run<'a> = Box<dyn FnOnce(&mut Workspace) -> Verdict + 'a>;
    let criteria: Vec<(usize, &str, Duration, Run)> = vec![
        (1, "grid cardinality", Duration::from_secs(60), Box::new(criterion_1)),
        (2, "GP oracle", Duration::from_secs(60), Box::new(|_| from_check(equivalence::gp()))),
        (3, "EI oracle", Duration::from_secs(60), Box::new(|_| from_check(equivalence::expected_improvement_checks()))),
        (4, "ridge oracle", Duration::from_secs(60), Box::new(|_| from_check(equivalence::ridge()))),
        (5, "reservoir reference", Duration::from_secs(60), Box::new(|_| from_check(equivalence::reservoir()))),
        (6, "toy-surface convergence", Duration::from_secs(300), Box::new(criterion_6)),
        (7, "BO vs grid", Duration::from_secs(1800), Box::new(criterion_7)),
        (8, "sensitivity", Duration::from_secs(120), Box::new(criterion_8)),
        (9, "replay determinism", Duration::MAX, Box::new(|ws| criterion_9(ws))),
        (10, "property suites", Duration::MAX, Box::new(|_| criterion_10())),
    ];

    let mut failed = 0;
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let v = run(&mut ws);
        let elapsed = start.elapsed();
        let v = within(limit, elapsed, v);
        println!(
            "criterion {n:>2} {name:<24} {} ({elapsed:.1?}) {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
