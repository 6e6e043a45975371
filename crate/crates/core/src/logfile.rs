//! On-disk campaign records.
//!
//! A campaign directory holds:
//!
//! * `observations.jsonl`: a header object, then one observation per line.
//! * `surrogate.jsonl`: a header object, then one kernel snapshot per line.
//! * `summary.json`: best observation and counts, written at the end.
//! * `best_so_far.tsv`: iteration, objective and running best, for plotting.
//!
//! Every header and the summary carry `format` and `version` fields; readers
//! reject versions they do not know. Floats are written in shortest
//! round-trip form, so a log read back is bit-identical to the one written.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::{self, CampaignHeader, CampaignLog, Event, Observation, SurrogateSnapshot};
use crate::error::{Error, Result};

pub const LOG_VERSION: u32 = 1;
pub const OBSERVATIONS_FORMAT: &str = "rcopt-campaign-log";
pub const SURROGATE_FORMAT: &str = "rcopt-surrogate-log";
pub const SUMMARY_FORMAT: &str = "rcopt-summary";
pub const PLOT_FORMAT: &str = "rcopt-best-so-far";

pub const OBSERVATIONS_FILE: &str = "observations.jsonl";
pub const SURROGATE_FILE: &str = "surrogate.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "best_so_far.tsv";

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct Empty {}

fn check_version(what: &'static str, format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(Error::format(what, format!("format tag {format:?}, expected {expected:?}")));
    }
    if version != LOG_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    Ok(())
}

fn header_line<T: Serialize>(format: &str, body: T) -> Result<String> {
    serde_json::to_string(&Versioned {
        format: format.to_string(),
        version: LOG_VERSION,
        body,
    })
    .map_err(|e| Error::format("campaign log", e.to_string()))
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::format("campaign log", e.to_string()))
}

/// Streams a campaign to its directory as it runs, so a run that dies early
/// still leaves every completed observation on disk.
pub struct LogWriter {
    dir: PathBuf,
    observations: BufWriter<File>,
    surrogate: BufWriter<File>,
}

impl LogWriter {
    pub fn create(dir: &Path, header: &CampaignHeader) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut observations = BufWriter::new(File::create(dir.join(OBSERVATIONS_FILE))?);
        writeln!(observations, "{}", header_line(OBSERVATIONS_FORMAT, header)?)?;
        observations.flush()?;
        let mut surrogate = BufWriter::new(File::create(dir.join(SURROGATE_FILE))?);
        writeln!(surrogate, "{}", header_line(SURROGATE_FORMAT, Empty {})?)?;
        surrogate.flush()?;
        Ok(LogWriter {
            dir: dir.to_path_buf(),
            observations,
            surrogate,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, event: Event<'_>) -> Result<()> {
        match event {
            Event::Observation(o) => {
                writeln!(self.observations, "{}", json_line(o)?)?;
                self.observations.flush()?;
            }
            Event::Snapshot(s) => {
                writeln!(self.surrogate, "{}", json_line(s)?)?;
                self.surrogate.flush()?;
            }
        }
        Ok(())
    }

    /// Writes the summary and plot table for the finished log.
    pub fn finish(mut self, log: &CampaignLog) -> Result<()> {
        self.observations.flush()?;
        self.surrogate.flush()?;
        write_summary(&self.dir.join(SUMMARY_FILE), log)?;
        write_plot_table(&self.dir.join(PLOT_FILE), log)
    }
}

/// Writes all of `log` into `dir` at once.
pub fn write_campaign(dir: &Path, log: &CampaignLog) -> Result<()> {
    let mut w = LogWriter::create(dir, &log.header)?;
    for s in &log.snapshots {
        w.record(Event::Snapshot(s))?;
    }
    for o in &log.observations {
        w.record(Event::Observation(o))?;
    }
    w.finish(log)
}

/// Reads a campaign directory, or a bare observations file. Surrogate
/// snapshots are loaded when the directory has them.
pub fn read_campaign(path: &Path) -> Result<CampaignLog> {
    let (obs_path, dir) = if path.is_dir() {
        (path.join(OBSERVATIONS_FILE), Some(path))
    } else {
        (path.to_path_buf(), None)
    };
    let load = |e: Error| Error::Load {
        path: obs_path.clone(),
        reason: e.to_string(),
    };
    let file = File::open(&obs_path).map_err(|e| load(e.into()))?;
    let mut log = read_observations(BufReader::new(file)).map_err(load)?;
    if let Some(dir) = dir {
        let sp = dir.join(SURROGATE_FILE);
        if sp.exists() {
            let file = File::open(&sp)?;
            log.snapshots = read_snapshots(BufReader::new(file)).map_err(|e| Error::Load {
                path: sp.clone(),
                reason: e.to_string(),
            })?;
        }
    }
    Ok(log)
}

pub fn read_observations<R: BufRead>(input: R) -> Result<CampaignLog> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format("campaign log", "empty file"))??;
    let header: Versioned<CampaignHeader> = serde_json::from_str(&first)
        .map_err(|e| Error::format("campaign log", format!("header: {e}")))?;
    check_version("campaign log", &header.format, header.version, OBSERVATIONS_FORMAT)?;
    let mut observations: Vec<Observation> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let o: Observation = serde_json::from_str(&line)
            .map_err(|e| Error::format("campaign log", format!("line {}: {e}", i + 2)))?;
        if o.objective.is_some_and(|v| !v.is_finite()) {
            return Err(Error::format("campaign log", format!("line {}: non-finite objective", i + 2)));
        }
        if observations.last().is_some_and(|p| p.iteration >= o.iteration) {
            return Err(Error::format(
                "campaign log",
                format!("line {}: iteration {} does not increase", i + 2, o.iteration),
            ));
        }
        observations.push(o);
    }
    Ok(CampaignLog {
        header: header.body,
        observations,
        snapshots: Vec::new(),
    })
}

pub fn read_snapshots<R: BufRead>(input: R) -> Result<Vec<SurrogateSnapshot>> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format("surrogate log", "empty file"))??;
    let header: Versioned<Empty> = serde_json::from_str(&first)
        .map_err(|e| Error::format("surrogate log", format!("header: {e}")))?;
    check_version("surrogate log", &header.format, header.version, SURROGATE_FORMAT)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format("surrogate log", format!("line {}: {e}", i + 2)))?,
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub header: CampaignHeader,
    pub evaluations: usize,
    pub failures: usize,
    pub best: Option<Observation>,
    pub total_wall_time: f64,
}

impl Summary {
    pub fn of(log: &CampaignLog) -> Self {
        Summary {
            header: log.header.clone(),
            evaluations: log.observations.len(),
            failures: log.observations.iter().filter(|o| !o.succeeded()).count(),
            best: campaign::best(log).ok().cloned(),
            total_wall_time: log.observations.iter().map(|o| o.wall_time).sum(),
        }
    }
}

pub fn write_summary(path: &Path, log: &CampaignLog) -> Result<()> {
    let doc = Versioned {
        format: SUMMARY_FORMAT.to_string(),
        version: LOG_VERSION,
        body: Summary::of(log),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::format("summary", e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path)?;
    let doc: Versioned<Summary> =
        serde_json::from_str(&text).map_err(|e| Error::format("summary", e.to_string()))?;
    check_version("summary", &doc.format, doc.version, SUMMARY_FORMAT)?;
    Ok(doc.body)
}

/// Tab-separated `iteration objective running_best`; failed evaluations
/// leave the objective column empty.
pub fn write_plot_table(path: &Path, log: &CampaignLog) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {PLOT_FORMAT} {LOG_VERSION}")?;
    writeln!(out, "iteration\tobjective\trunning_best")?;
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (it, v, b) in campaign::running_best(log) {
        writeln!(out, "{it}\t{}\t{}", cell(v), cell(b))?;
    }
    out.flush()?;
    Ok(())
}
