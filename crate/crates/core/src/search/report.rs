//! Run artefacts: per-episode history, summary, Q-table, pool and rules.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EpisodeRecord, SearchConfig, SearchResult};
use crate::agent::QTableError;
use crate::distill::{save_rules, RulesFileError};
use crate::operators::Pipeline;
use crate::pool::PoolError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    QTable(#[from] QTableError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Rules(#[from] RulesFileError),
    #[error("history row {row}: bad pipeline {value:?}")]
    Pipeline { row: usize, value: String },
}

#[derive(Serialize, Deserialize)]
struct HistoryRow {
    episode: usize,
    accuracy: f64,
    executed_accuracy: f64,
    best_accuracy: f64,
    epsilon: f64,
    triggered: bool,
    cumulative_calls: usize,
    evaluations: usize,
    pipeline: String,
}

pub fn write_history_csv(
    path: impl AsRef<Path>,
    history: &[EpisodeRecord],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in history {
        w.serialize(HistoryRow {
            episode: r.episode,
            accuracy: r.accuracy,
            executed_accuracy: r.executed_accuracy,
            best_accuracy: r.best_accuracy,
            epsilon: r.epsilon,
            triggered: r.triggered,
            cumulative_calls: r.cumulative_calls,
            evaluations: r.evaluations,
            pipeline: r.pipeline.id_list(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>, ReportError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<HistoryRow>().enumerate() {
        let row = row?;
        let ids: Result<Vec<i64>, _> = row
            .pipeline
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect();
        let pipeline = ids
            .ok()
            .and_then(|ids| Pipeline::from_ids(&ids).ok())
            .ok_or_else(|| ReportError::Pipeline {
                row: i + 1,
                value: row.pipeline.clone(),
            })?;
        out.push(EpisodeRecord {
            episode: row.episode,
            accuracy: row.accuracy,
            executed_accuracy: row.executed_accuracy,
            best_accuracy: row.best_accuracy,
            epsilon: row.epsilon,
            triggered: row.triggered,
            cumulative_calls: row.cumulative_calls,
            evaluations: row.evaluations,
            pipeline,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best_pipeline: Pipeline,
    pub best_pipeline_names: Vec<String>,
    pub best_accuracy: f64,
    pub baseline_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub episodes: usize,
    pub advisor_calls: usize,
    pub call_episodes: Vec<usize>,
    pub pool_size: usize,
    pub rules: Vec<String>,
    pub config: SearchConfig,
}

impl RunSummary {
    pub fn new(result: &SearchResult, cfg: &SearchConfig) -> Self {
        RunSummary {
            best_pipeline: result.best_pipeline.clone(),
            best_pipeline_names: result
                .best_pipeline
                .names()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            best_accuracy: result.best_accuracy,
            baseline_accuracy: result.baseline_accuracy,
            test_accuracy: result.test_accuracy,
            episodes: result.history.len(),
            advisor_calls: result.advisor_calls(),
            call_episodes: result.call_episodes.clone(),
            pool_size: result.pool.len(),
            rules: result.rules.iter().map(|r| r.to_string()).collect(),
            config: cfg.clone(),
        }
    }
}

/// Writes `history.csv`, `summary.json`, `qtable.csv`, `experience.jsonl`
/// and `rules.jsonl` into `dir`, creating it if needed.
pub fn write_run_report(
    dir: impl AsRef<Path>,
    result: &SearchResult,
    cfg: &SearchConfig,
) -> Result<(), ReportError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_history_csv(dir.join("history.csv"), &result.history)?;
    let summary = serde_json::to_string_pretty(&RunSummary::new(result, cfg))?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    result
        .q_table
        .write_csv(BufWriter::new(File::create(dir.join("qtable.csv"))?))?;
    result.pool.save(dir.join("experience.jsonl"))?;
    save_rules(&result.rules, dir.join("rules.jsonl"))?;
    Ok(())
}
