//! Pipeline advisor: builds a context-rich prompt, turns replies into ranked
//! pipeline suggestions and blends them into the agent's action policy.

mod mock;
mod prompt;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Action, N_ACTIONS};
use crate::data::{DatasetSummary, StateVector};
use crate::distill::Rule;
use crate::operators::{OperatorId, Pipeline};

pub use mock::MockAdvisor;
pub use prompt::{build_prompt, describe_state, parse_suggestions, render_suggestions};
pub use remote::{RemoteAdvisor, RemoteConfig, ENV_ADVISOR_KEY, ENV_ADVISOR_URL};

pub const MAX_SUGGESTIONS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdvisorError {
    #[error("advisor reply holds no PIPELINE lines")]
    UnparseableResponse,
    #[error("advisor unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorSuggestion {
    pub pipeline: Pipeline,
    pub confidence: f64,
    pub rationale: String,
}

/// A past experience as shown to the advisor.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedExample {
    pub context: String,
    pub pipeline: Pipeline,
    pub accuracy: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvisorContext {
    pub state_vector: StateVector,
    pub summary: DatasetSummary,
    pub partial_pipeline: Pipeline,
    /// Nearest first.
    pub retrieved: Vec<RetrievedExample>,
    pub knowledge_rules: Vec<Rule>,
    pub available_operators: Vec<&'static str>,
    pub max_pipeline_len: usize,
}

impl AdvisorContext {
    pub fn all_operator_names() -> Vec<&'static str> {
        OperatorId::all().map(|o| o.name()).collect()
    }
}

pub trait Advisor {
    fn suggest(&mut self, ctx: &AdvisorContext) -> Result<Vec<AdvisorSuggestion>, AdvisorError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyIntegrationConfig {
    /// Weight of the advisor distribution when the advisor was consulted.
    pub alpha_weight: f64,
    /// Softmax temperature applied to Q-values.
    pub temperature: f64,
}

impl Default for PolicyIntegrationConfig {
    fn default() -> Self {
        PolicyIntegrationConfig {
            alpha_weight: 0.7,
            temperature: crate::agent::DEFAULT_TEMPERATURE,
        }
    }
}

/// Advisor distribution over actions: each suggestion's first operator gets
/// mass proportional to its confidence. `None` when there is no mass.
pub fn advisor_distribution(suggestions: &[AdvisorSuggestion]) -> Option<Vec<f64>> {
    let mut p = vec![0.0; N_ACTIONS];
    for s in suggestions {
        if let Some(first) = s.pipeline.first() {
            p[Action::Apply(first).index()] += s.confidence;
        }
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return None;
    }
    p.iter_mut().for_each(|v| *v /= total);
    Some(p)
}

/// `alpha * advisor + (1 - alpha) * pi_rl`; `pi_rl` unchanged when the
/// advisor offers nothing or `alpha` is zero.
pub fn integrate_policies(
    pi_rl: &[f64],
    suggestions: &[AdvisorSuggestion],
    alpha_weight: f64,
) -> Vec<f64> {
    if alpha_weight == 0.0 {
        return pi_rl.to_vec();
    }
    match advisor_distribution(suggestions) {
        None => pi_rl.to_vec(),
        Some(llm) => llm
            .iter()
            .zip(pi_rl)
            .map(|(l, r)| alpha_weight * l + (1.0 - alpha_weight) * r)
            .collect(),
    }
}
