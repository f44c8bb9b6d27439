//! Tabular Q-learning over operator sequences. The state is the last
//! executed operator (or the episode start); actions are the operators plus
//! an explicit stop.

use std::fmt;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::Reward;
use crate::operators::OperatorId;

pub const N_STATES: usize = OperatorId::COUNT + 1;
pub const N_ACTIONS: usize = OperatorId::COUNT + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Apply(OperatorId),
    Terminate,
}

impl Action {
    /// Column in the Q-table: canonical operator order, then `Terminate`.
    pub fn index(self) -> usize {
        match self {
            Action::Apply(op) => op.canonical_index(),
            Action::Terminate => N_ACTIONS - 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        if i == N_ACTIONS - 1 {
            Some(Action::Terminate)
        } else {
            OperatorId::from_canonical_index(i).map(Action::Apply)
        }
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..N_ACTIONS).filter_map(Action::from_index)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Apply(op) => write!(f, "{op}"),
            Action::Terminate => f.write_str("TERMINATE"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentState {
    Start,
    After(OperatorId),
}

impl AgentState {
    pub fn index(self) -> usize {
        match self {
            AgentState::Start => 0,
            AgentState::After(op) => op.canonical_index() + 1,
        }
    }

    pub fn from_index(i: usize) -> Option<AgentState> {
        match i {
            0 => Some(AgentState::Start),
            _ => OperatorId::from_canonical_index(i - 1).map(AgentState::After),
        }
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentState::Start => f.write_str("START"),
            AgentState::After(op) => write!(f, "{op}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum QTableError {
    #[error("q-table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("q-table csv: expected {expected} {what}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("q-table csv: bad value {value:?} at row {row}")]
    BadValue { row: usize, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; N_ACTIONS]>,
}

impl Default for QTable {
    fn default() -> Self {
        QTable {
            values: vec![[0.0; N_ACTIONS]; N_STATES],
        }
    }
}

impl QTable {
    pub fn get(&self, s: AgentState, a: Action) -> f64 {
        self.values[s.index()][a.index()]
    }

    pub fn set(&mut self, s: AgentState, a: Action, v: f64) {
        self.values[s.index()][a.index()] = v;
    }

    pub fn row(&self, s: AgentState) -> &[f64; N_ACTIONS] {
        &self.values[s.index()]
    }

    pub fn max(&self, s: AgentState) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action; ties go to the lowest index.
    pub fn argmax(&self, s: AgentState) -> Action {
        let row = self.row(s);
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        Action::from_index(best).expect("index within table")
    }

    /// Writes the table with a header of action names and a leading state
    /// column. Values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), QTableError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["state".to_string()];
        header.extend(Action::all().map(|a| a.to_string()));
        out.write_record(&header)?;
        for (i, row) in self.values.iter().enumerate() {
            let mut rec = vec![AgentState::from_index(i).expect("state index").to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, QTableError> {
        let mut reader = csv::Reader::from_reader(r);
        let width = reader.headers()?.len();
        if width != N_ACTIONS + 1 {
            return Err(QTableError::Shape {
                what: "columns",
                expected: N_ACTIONS + 1,
                found: width,
            });
        }
        let mut table = QTable::default();
        let mut rows = 0;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if i >= N_STATES {
                rows = i + 1;
                continue;
            }
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| QTableError::BadValue {
                    row: i + 1,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(QTableError::BadValue {
                        row: i + 1,
                        value: cell.to_string(),
                    });
                }
                table.values[i][j] = v;
            }
            rows = i + 1;
        }
        if rows != N_STATES {
            return Err(QTableError::Shape {
                what: "rows",
                expected: N_STATES,
                found: rows,
            });
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearningConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            learning_rate: 1.0,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay: 0.99,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(format!("discount must be in [0, 1), got {}", self.discount));
        }
        if !(0.0 <= self.epsilon_end
            && self.epsilon_end <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return Err("epsilon bounds must satisfy 0 <= end <= start <= 1".into());
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(format!(
                "epsilon_decay must be in (0, 1], got {}",
                self.epsilon_decay
            ));
        }
        Ok(())
    }

    pub fn decay_epsilon(&self, epsilon: f64) -> f64 {
        (epsilon * self.epsilon_decay).max(self.epsilon_end)
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct QAgent {
    pub table: QTable,
    pub config: QLearningConfig,
    pub epsilon: f64,
}

impl QAgent {
    pub fn new(config: QLearningConfig) -> Self {
        QAgent {
            table: QTable::default(),
            epsilon: config.epsilon_start,
            config,
        }
    }

    /// Epsilon-greedy choice: uniform over every action with probability
    /// `epsilon`, otherwise the greedy action.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        s: AgentState,
        epsilon: f64,
        rng: &mut R,
    ) -> Action {
        if rng.random::<f64>() < epsilon {
            Action::from_index(rng.random_range(0..N_ACTIONS)).expect("index within table")
        } else {
            self.table.argmax(s)
        }
    }

    pub fn update(
        &mut self,
        s: AgentState,
        a: Action,
        r: Reward,
        s_next: AgentState,
        terminal: bool,
    ) {
        let future = if terminal {
            0.0
        } else {
            self.table.max(s_next)
        };
        let alpha = self.config.learning_rate;
        let old = self.table.get(s, a);
        let new = (1.0 - alpha) * old + alpha * (r.value() + self.config.discount * future);
        self.table.set(s, a, new);
    }

    /// Softmax over the Q row at temperature `tau`.
    pub fn policy_distribution(&self, s: AgentState, tau: f64) -> Vec<f64> {
        softmax(self.table.row(s), tau)
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = self.config.decay_epsilon(self.epsilon);
    }
}

pub fn softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| ((v - m) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Draws an index from a probability vector by inverse CDF.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}
