//! Experience pool: completed high-scoring pipelines with their per-step
//! trajectories, searchable by exact nearest neighbour over meta-features.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::StateVector;
use crate::operators::{OperatorId, Pipeline};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryStep {
    pub s_vec: StateVector,
    pub action: OperatorId,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperienceEntry {
    pub d_meta_vec: StateVector,
    pub p_complete: Pipeline,
    pub r_final: f64,
    pub trajectory: Vec<TrajectoryStep>,
    pub source_tag: String,
    pub created_episode: usize,
}

impl ExperienceEntry {
    pub fn validate(&self) -> Result<(), PoolError> {
        if self.trajectory.len() != self.p_complete.len() {
            return Err(PoolError::InvalidEntry(format!(
                "trajectory has {} steps but pipeline has {} operators",
                self.trajectory.len(),
                self.p_complete.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.r_final) {
            return Err(PoolError::InvalidEntry(format!(
                "r_final {} outside [0, 1]",
                self.r_final
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("invalid experience entry: {0}")]
    InvalidEntry(String),
    #[error("corrupt record at line {line}: {message}")]
    CorruptRecord {
        line: usize,
        message: String,
        /// Entries read before the corrupt line.
        recovered: Box<ExperiencePool>,
    },
    #[error("pool file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalHit {
    pub entry: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepHit {
    pub entry: usize,
    pub step: usize,
    pub distance: f64,
}

/// Heap element ordered by distance then insertion position.
#[derive(Debug, PartialEq)]
struct Candidate<K> {
    distance: f64,
    key: K,
}

impl<K: Ord> Eq for Candidate<K> {}

impl<K: Ord> PartialOrd for Candidate<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> Ord for Candidate<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then_with(|| self.key.cmp(&other.key))
    }
}

/// Keeps the `k` smallest candidates, returned in ascending order.
fn smallest_k<K: Ord>(k: usize, items: impl Iterator<Item = (f64, K)>) -> Vec<(f64, K)> {
    if k == 0 {
        return Vec::new();
    }
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (distance, key) in items {
        let c = Candidate { distance, key };
        if heap.len() < k {
            heap.push(c);
        } else if heap.peek().is_some_and(|worst| c < *worst) {
            heap.pop();
            heap.push(c);
        }
    }
    heap.into_sorted_vec()
        .into_iter()
        .map(|c| (c.distance, c.key))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperiencePool {
    entries: Vec<ExperienceEntry>,
}

impl ExperiencePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ExperienceEntry] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> Option<&ExperienceEntry> {
        self.entries.get(i)
    }

    pub fn add_entry(&mut self, e: ExperienceEntry) -> Result<(), PoolError> {
        e.validate()?;
        self.entries.push(e);
        Ok(())
    }

    /// The `k` entries nearest to `query` in squared L2, ascending; ties keep
    /// insertion order.
    pub fn retrieve_global(&self, query: &StateVector, k: usize) -> Vec<GlobalHit> {
        smallest_k(
            k,
            self.entries
                .iter()
                .enumerate()
                .map(|(i, e)| (query.squared_l2(&e.d_meta_vec), i)),
        )
        .into_iter()
        .map(|(distance, entry)| GlobalHit { entry, distance })
        .collect()
    }

    /// Same as [`retrieve_global`](Self::retrieve_global) over every
    /// trajectory step of every entry.
    pub fn retrieve_stepwise(&self, query: &StateVector, k: usize) -> Vec<StepHit> {
        let steps = self.entries.iter().enumerate().flat_map(|(i, e)| {
            e.trajectory
                .iter()
                .enumerate()
                .map(move |(j, s)| (query.squared_l2(&s.s_vec), (i, j)))
        });
        smallest_k(k, steps)
            .into_iter()
            .map(|(distance, (entry, step))| StepHit {
                entry,
                step,
                distance,
            })
            .collect()
    }

    /// One JSON object per line, in insertion order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PoolError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a pool file. Blank lines are ignored; the first malformed line
    /// stops loading and is reported along with everything before it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        let text = fs::read_to_string(path)?;
        let mut pool = ExperiencePool::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<ExperienceEntry>(line)
                .map_err(|e| e.to_string())
                .and_then(|e| e.validate().map(|_| e).map_err(|e| e.to_string()));
            match parsed {
                Ok(e) => pool.entries.push(e),
                Err(message) => {
                    return Err(PoolError::CorruptRecord {
                        line: i + 1,
                        message,
                        recovered: Box::new(pool),
                    })
                }
            }
        }
        Ok(pool)
    }
}
