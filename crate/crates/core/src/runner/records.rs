use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{append_line, check_format_version, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::importance::CorrelationTable;
use crate::metrics::EvalResult;
use crate::protocol::{MultiSourceResult, SweepResult};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    GenData,
    Train,
    Rank,
    Correlate,
    Sweep,
    BaselineMax,
    BaselineRand,
    MultiSource,
    SubsampleStudy,
    Eval,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::GenData => "gen-data",
            CommandKind::Train => "train",
            CommandKind::Rank => "rank",
            CommandKind::Correlate => "correlate",
            CommandKind::Sweep => "sweep",
            CommandKind::BaselineMax => "baseline-max",
            CommandKind::BaselineRand => "baseline-rand",
            CommandKind::MultiSource => "multi-source",
            CommandKind::SubsampleStudy => "subsample-study",
            CommandKind::Eval => "eval",
        }
    }
}

/// One point of a subsample study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsamplePoint {
    pub tenths: usize,
    pub target_train_sentences: usize,
    pub unpruned: f64,
    pub pruned: f64,
    pub best_k: usize,
}

/// Pruned and unpruned target scores per tenths of target training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleTable {
    pub target_language: String,
    pub points: Vec<SubsamplePoint>,
}

impl SubsampleTable {
    /// `tenths,target_train_sentences,unpruned,pruned`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tenths,target_train_sentences,unpruned,pruned\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{:.6},{:.6}\n", p.tenths, p.target_train_sentences, p.unpruned, p.pruned));
        }
        out
    }

    /// Score cells in the table: one pruned and one unpruned per point.
    pub fn cells(&self) -> usize {
        2 * self.points.len()
    }
}

/// Deterministic payload of a committed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Corpora { languages: Vec<String> },
    Trained { eval: EvalResult },
    Importance { languages: Vec<String> },
    Correlation { table: CorrelationTable },
    Sweep { sweep: SweepResult },
    MultiSource { multi: MultiSourceResult },
    Subsample { table: SubsampleTable },
    Eval { eval: EvalResult },
}

/// A line of `results.jsonl`. Contains nothing machine- or time-dependent,
/// so repeating a spec reproduces the line byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub format_version: String,
    pub spec_hash: String,
    pub command: CommandKind,
    pub seed: u64,
    pub outcome: Outcome,
}

/// A line of `runs.jsonl`: provenance and timing of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: String,
    pub spec_hash: String,
    pub command: CommandKind,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    /// Per-k fine-tuning wall times, one list per sweep run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seconds_per_k: Vec<Vec<f64>>,
    pub seed: u64,
    pub toolkit_version: String,
}

impl RunRecord {
    pub fn new(spec_hash: &str, command: CommandKind, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            spec_hash: spec_hash.to_string(),
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_seconds: 0.0,
            seconds_per_k: Vec::new(),
            seed,
            toolkit_version: TOOLKIT_VERSION.to_string(),
        }
    }
}

/// Reads every record of a JSON-lines log; a missing file is an empty log.
pub fn read_log<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let v: serde_json::Value = serde_json::from_str(line)?;
            let version = v.get("format_version").and_then(|f| f.as_str()).unwrap_or("");
            check_format_version(version, path).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            Ok(serde_json::from_value(v)?)
        })
        .collect()
}

/// Appends one record as a single JSON line.
pub fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    append_line(path, &serde_json::to_string(record)?)
}
