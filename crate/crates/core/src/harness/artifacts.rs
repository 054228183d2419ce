use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::env::PowerAction;
use crate::solvers::SolverResult;

use super::run::{ExperimentOutcome, RunFailure, RunTrajectory};
use super::{first_crossing, median, ExperimentConfig, HarnessError, Method};

pub const CSV_HEADER: &str = "method,seed,iteration,best_so_far,normalized";

/// Normalized-reward levels reported in the summary.
pub const THRESHOLDS: [f64; 3] = [0.9, 0.95, 0.99];

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: Method,
    pub seed: u64,
    pub iteration: usize,
    pub best_so_far: f64,
    pub normalized: f64,
}

/// One row per (method, seed, iteration), LF endings, shortest
/// round-trip decimals.
pub fn write_csv(path: &Path, trajectories: &[RunTrajectory], baseline_value: f64) -> Result<(), HarnessError> {
    let mut out = String::with_capacity(64 * trajectories.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for t in trajectories {
        for (i, v) in t.best_so_far.iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", t.method, t.seed, i, v, v / baseline_value));
        }
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

pub(crate) fn write_lines(path: &Path, lines: &[String]) -> Result<(), HarnessError> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a trajectories CSV. Errors carry the 1-based line number.
pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        Some(h) => {
            return Err(HarnessError::Parse {
                row: 1,
                message: format!("expected header `{CSV_HEADER}`, found `{h}`"),
            })
        }
        None => {
            return Err(HarnessError::Parse {
                row: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
        let row = i + 2;
        let r = rec.map_err(|e| HarnessError::Parse {
            row,
            message: e.to_string(),
        })?;
        if !r.best_so_far.is_finite() || !r.normalized.is_finite() {
            return Err(HarnessError::Parse {
                row,
                message: "non-finite value".into(),
            });
        }
        rows.push(r);
    }
    Ok(rows)
}

/// One line of the run transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Init {
        method: Method,
        seed: u64,
        agent_id: usize,
        actions: Vec<PowerAction>,
        rewards: Vec<f64>,
    },
    Step {
        method: Method,
        seed: u64,
        iteration: usize,
        agent_id: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prompt: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        raw_response: Option<String>,
        actions: Vec<PowerAction>,
        rewards: Vec<f64>,
        improved: bool,
        parse_failures: usize,
        clamped_count: usize,
    },
    Coordinator {
        method: Method,
        seed: u64,
        iteration: usize,
        pushes: Vec<usize>,
        pops: Vec<usize>,
        global_top_reward: Option<f64>,
        global_buffer_size: usize,
    },
    BruteForce {
        method: Method,
        seed: u64,
        iteration: usize,
        rewards: Vec<f64>,
    },
    /// Closes an iteration of a run.
    Iteration {
        method: Method,
        seed: u64,
        iteration: usize,
        evaluations: usize,
        cumulative_evaluations: usize,
        best_so_far: f64,
    },
    Failure {
        method: Method,
        seed: u64,
        error: String,
    },
}

impl TranscriptRecord {
    pub fn method_seed(&self) -> (Method, u64) {
        match self {
            Self::Init { method, seed, .. }
            | Self::Step { method, seed, .. }
            | Self::Coordinator { method, seed, .. }
            | Self::BruteForce { method, seed, .. }
            | Self::Iteration { method, seed, .. }
            | Self::Failure { method, seed, .. } => (*method, *seed),
        }
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Parse {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub theta: f64,
    /// First crossing per run seed; `None` if never reached.
    pub per_seed: Vec<Option<usize>>,
    /// Median over seeds with never-crossed counted as infinite; `None`
    /// when that median is infinite.
    pub median: Option<f64>,
    pub best: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub final_normalized_median: f64,
    pub final_normalized_best: f64,
    pub crossings: Vec<CrossingSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub baseline: SolverResult,
    pub baseline_value: f64,
    pub oracle: Option<SolverResult>,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<RunFailure>,
    pub created_unix_secs: u64,
}

impl Summary {
    pub fn build(cfg: &ExperimentConfig, outcome: &ExperimentOutcome, oracle: Option<&SolverResult>) -> Self {
        let baseline = outcome.baseline_value();
        let methods = cfg
            .policies
            .iter()
            .filter_map(|m| {
                let runs: Vec<&RunTrajectory> = outcome.runs_for(*m).collect();
                if runs.is_empty() {
                    return None;
                }
                let normalized: Vec<Vec<f64>> = runs
                    .iter()
                    .map(|r| r.best_so_far.iter().map(|v| v / baseline).collect())
                    .collect();
                let finals: Vec<f64> = normalized.iter().map(|n| *n.last().expect("non-empty")).collect();
                let crossings = THRESHOLDS
                    .iter()
                    .map(|&theta| {
                        let per_seed: Vec<Option<usize>> =
                            normalized.iter().map(|n| first_crossing(n, theta)).collect();
                        let as_f: Vec<f64> = per_seed
                            .iter()
                            .map(|c| c.map_or(f64::INFINITY, |v| v as f64))
                            .collect();
                        let med = median(&as_f);
                        CrossingSummary {
                            theta,
                            median: med.is_finite().then_some(med),
                            best: per_seed.iter().flatten().min().copied(),
                            per_seed,
                        }
                    })
                    .collect();
                Some(MethodSummary {
                    method: *m,
                    seeds: runs.iter().map(|r| r.seed).collect(),
                    final_normalized_median: median(&finals),
                    final_normalized_best: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    crossings,
                })
            })
            .collect();
        Summary {
            config: cfg.clone(),
            baseline: outcome.baseline.clone(),
            baseline_value: baseline,
            oracle: oracle.cloned(),
            methods,
            failures: outcome.failures.clone(),
            created_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| HarnessError::InvalidState(format!("summary: {e}")))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(method: Method, seed: u64, v: &[f64]) -> RunTrajectory {
        RunTrajectory {
            method,
            seed,
            best_so_far: v.to_vec(),
            cumulative_evaluations: (0..v.len()).collect(),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let vals = [0.1, 1.0 / 3.0, 2.5e-7, 7.0];
        write_csv(&path, &[traj(Method::BruteForce, 4, &vals)], 3.0).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,seed,iteration,best_so_far,normalized\n"));
        assert!(!text.contains('\r'));
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 4);
        for (r, v) in rows.iter().zip(vals) {
            assert_eq!(r.method, Method::BruteForce);
            assert_eq!(r.best_so_far, v);
            assert_eq!(r.normalized, v / 3.0);
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, format!("{CSV_HEADER}\ndynamic,0,0,1.0,0.5\ndynamic,0,x,1.0,0.5\n")).unwrap();
        match read_csv(&path) {
            Err(HarnessError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transcript_records_round_trip() {
        let rec = TranscriptRecord::Step {
            method: Method::Dynamic,
            seed: 1,
            iteration: 2,
            agent_id: 0,
            prompt: None,
            raw_response: Some("power: [1.000]".into()),
            actions: vec![PowerAction::new(vec![1.0])],
            rewards: vec![0.1 + 0.2],
            improved: true,
            parse_failures: 0,
            clamped_count: 0,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"kind\":\"step\""));
        assert!(!line.contains("prompt"));
        let back: TranscriptRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
