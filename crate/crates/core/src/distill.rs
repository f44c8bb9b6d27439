//! Offline knowledge mining over the experience pool: frequent operator
//! subsequences (PrefixSpan) and IF meta-feature THEN sequence rules.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{stats, MetaFeature, StateVector};
use crate::operators::{OperatorId, Pipeline};
use crate::pool::ExperiencePool;

/// Episodes between automatic re-mining during a search.
pub const MINING_INTERVAL: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentSequence {
    pub sequence: Vec<OperatorId>,
    pub support: usize,
    pub mean_reward: f64,
}

/// Whether `needle` occurs in `haystack` in order, gaps allowed.
pub fn contains_subsequence(haystack: &[OperatorId], needle: &[OperatorId]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn prefixspan(
    db: &[&[OperatorId]],
    rewards: &[f64],
    prefix: &mut Vec<OperatorId>,
    projected: &[(usize, usize)],
    min_support: usize,
    out: &mut Vec<FrequentSequence>,
) {
    // item -> (sequence, position after its first occurrence) per supporting sequence
    let mut extensions: BTreeMap<OperatorId, Vec<(usize, usize)>> = BTreeMap::new();
    for &(seq, start) in projected {
        let mut seen = Vec::new();
        for (pos, &item) in db[seq].iter().enumerate().skip(start) {
            if !seen.contains(&item) {
                seen.push(item);
                extensions.entry(item).or_default().push((seq, pos + 1));
            }
        }
    }
    for (item, next) in extensions {
        if next.len() < min_support {
            continue;
        }
        prefix.push(item);
        let mean_reward = next.iter().map(|&(s, _)| rewards[s]).sum::<f64>() / next.len() as f64;
        out.push(FrequentSequence {
            sequence: prefix.clone(),
            support: next.len(),
            mean_reward,
        });
        prefixspan(db, rewards, prefix, &next, min_support, out);
        prefix.pop();
    }
}

/// Support descending, then longer first, then by operator ids.
fn sort_sequences(seqs: &mut [FrequentSequence]) {
    seqs.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.sequence.len().cmp(&a.sequence.len()))
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
}

/// All subsequences with at least `min_support` supporting pipelines, where
/// support counts each pipeline once.
pub fn mine_sequence_db(
    db: &[&[OperatorId]],
    rewards: &[f64],
    min_support: usize,
) -> Vec<FrequentSequence> {
    let min_support = min_support.max(1);
    let projected: Vec<(usize, usize)> = (0..db.len()).map(|i| (i, 0)).collect();
    let mut out = Vec::new();
    prefixspan(
        db,
        rewards,
        &mut Vec::new(),
        &projected,
        min_support,
        &mut out,
    );
    sort_sequences(&mut out);
    out
}

/// Frequent subsequences of the pipelines whose final reward reaches the
/// `reward_quantile` quantile of all pool rewards.
pub fn mine_sequences(
    pool: &ExperiencePool,
    min_support: usize,
    reward_quantile: f64,
) -> Vec<FrequentSequence> {
    if pool.is_empty() {
        return Vec::new();
    }
    let mut rewards: Vec<f64> = pool.entries().iter().map(|e| e.r_final).collect();
    rewards.sort_by(f64::total_cmp);
    let cutoff = stats::quantile_sorted(&rewards, reward_quantile.clamp(0.0, 1.0));
    let kept: Vec<_> = pool
        .entries()
        .iter()
        .filter(|e| e.r_final >= cutoff)
        .collect();
    let db: Vec<&[OperatorId]> = kept.iter().map(|e| e.p_complete.ops()).collect();
    let r: Vec<f64> = kept.iter().map(|e| e.r_final).collect();
    mine_sequence_db(&db, &r, min_support)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub feature: MetaFeature,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Predicate {
    pub const fn gt(feature: MetaFeature, threshold: f64) -> Self {
        Predicate {
            feature,
            comparator: Comparator::Gt,
            threshold,
        }
    }

    pub fn holds(&self, s: &StateVector) -> bool {
        let v = s.get(self.feature);
        match self.comparator {
            Comparator::Gt => v > self.threshold,
            Comparator::Le => v <= self.threshold,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparator {
            Comparator::Gt => ">",
            Comparator::Le => "<=",
        };
        write!(f, "{} {op} {}", self.feature.name(), self.threshold)
    }
}

pub fn default_predicate_grid() -> Vec<Predicate> {
    vec![
        Predicate::gt(MetaFeature::MeanAbsSkewness, 1.0),
        Predicate::gt(MetaFeature::FracMissing, 0.0),
        Predicate::gt(MetaFeature::FracCategorical, 0.0),
        Predicate::gt(MetaFeature::FracOutlierCells, 0.05),
        Predicate::gt(MetaFeature::MeanAbsPairwiseCorrelation, 0.8),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub predicate: Predicate,
    pub sequence: Vec<OperatorId>,
    pub confidence: f64,
    pub support: usize,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "IF {} THEN {} (confidence {:.2}, support {})",
            self.predicate,
            Pipeline::new(self.sequence.clone()),
            self.confidence,
            self.support
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleMiningConfig {
    pub min_support: usize,
    pub high_reward_threshold: f64,
    pub min_confidence: f64,
}

impl Default for RuleMiningConfig {
    fn default() -> Self {
        RuleMiningConfig {
            min_support: 2,
            high_reward_threshold: 0.8,
            min_confidence: 0.6,
        }
    }
}

/// Tests every predicate against every frequent sequence of the pool. A
/// rule's support is the number of entries satisfying the predicate that
/// contain the sequence; its confidence is the share of those reaching the
/// high-reward threshold.
pub fn mine_rules(pool: &ExperiencePool, grid: &[Predicate], cfg: &RuleMiningConfig) -> Vec<Rule> {
    let sequences = mine_sequences(pool, cfg.min_support, 0.0);
    let mut rules = Vec::new();
    for predicate in grid {
        let matching: Vec<_> = pool
            .entries()
            .iter()
            .filter(|e| predicate.holds(&e.d_meta_vec))
            .collect();
        if matching.is_empty() {
            continue;
        }
        for fs in &sequences {
            let containing: Vec<_> = matching
                .iter()
                .filter(|e| contains_subsequence(e.p_complete.ops(), &fs.sequence))
                .collect();
            let support = containing.len();
            if support == 0 || support < cfg.min_support {
                continue;
            }
            let high = containing
                .iter()
                .filter(|e| e.r_final >= cfg.high_reward_threshold)
                .count();
            let confidence = high as f64 / support as f64;
            if confidence >= cfg.min_confidence {
                rules.push(Rule {
                    predicate: *predicate,
                    sequence: fs.sequence.clone(),
                    confidence,
                    support,
                });
            }
        }
    }
    rules
}

/// Rules whose predicate holds on `s`, most confident first.
pub fn knowledge_lookup(rules: &[Rule], s: &StateVector) -> Vec<Rule> {
    let mut hits: Vec<Rule> = rules
        .iter()
        .filter(|r| r.predicate.holds(s))
        .cloned()
        .collect();
    hits.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    hits
}

#[derive(Debug, Error)]
pub enum RulesFileError {
    #[error("rules file: {0}")]
    Io(#[from] std::io::Error),
    #[error("rules file line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
}

pub fn save_rules(rules: &[Rule], path: impl AsRef<Path>) -> Result<(), RulesFileError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in rules {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<Rule>, RulesFileError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RulesFileError::CorruptRecord {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
