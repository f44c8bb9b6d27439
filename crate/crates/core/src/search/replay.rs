//! First-improvement evaluation of advisor pipelines and Q-table replay of
//! the adopted one.

use crate::advisor::AdvisorSuggestion;
use crate::agent::{Action, AgentState, QAgent};
use crate::evaluator::{compute_reward, Reward};
use crate::operators::{OperatorId, Pipeline};

/// What happened at one step of a candidate pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Applied; validation accuracy afterwards.
    Applied(f64),
    /// Rejected by the data; dataset unchanged.
    Skipped,
    /// Produced unusable data; the pipeline scores 0 from here.
    Aborted,
}

/// Step-by-step evaluation of a whole pipeline from the raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEval {
    /// Accuracy of the untransformed data.
    pub base: f64,
    /// One outcome per operator, possibly cut short by an abort.
    pub steps: Vec<StepOutcome>,
}

impl CandidateEval {
    pub fn final_accuracy(&self) -> f64 {
        let mut acc = self.base;
        for s in &self.steps {
            match s {
                StepOutcome::Applied(a) => acc = *a,
                StepOutcome::Skipped => {}
                StepOutcome::Aborted => return 0.0,
            }
        }
        acc
    }
}

/// One Bellman update made while walking a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayedStep {
    pub state: AgentState,
    pub action: Action,
    pub reward: Reward,
}

/// Walks `ops` with their outcomes from the start state, updating the agent
/// in forward order. A pipeline shorter than `max_len` that ends normally
/// gets a final stop update carrying its accuracy.
pub fn replay_trajectory(
    agent: &mut QAgent,
    ops: &[OperatorId],
    eval: &CandidateEval,
    max_len: usize,
) -> Vec<ReplayedStep> {
    let mut steps = Vec::new();
    let mut s = AgentState::Start;
    let mut acc_prev = eval.base;
    for (i, (&op, outcome)) in ops.iter().zip(&eval.steps).enumerate() {
        let a = Action::Apply(op);
        let last = i + 1 >= max_len;
        match *outcome {
            StepOutcome::Applied(acc) => {
                let r = compute_reward(acc_prev, acc, last, acc);
                let next = AgentState::After(op);
                agent.update(s, a, r, next, last);
                steps.push(ReplayedStep {
                    state: s,
                    action: a,
                    reward: r,
                });
                s = next;
                acc_prev = acc;
            }
            StepOutcome::Skipped => {
                let r = Reward::inapplicable();
                agent.update(s, a, r, s, false);
                steps.push(ReplayedStep {
                    state: s,
                    action: a,
                    reward: r,
                });
            }
            StepOutcome::Aborted => {
                let r = compute_reward(acc_prev, 0.0, true, 0.0);
                agent.update(s, a, r, s, true);
                steps.push(ReplayedStep {
                    state: s,
                    action: a,
                    reward: r,
                });
                return steps;
            }
        }
    }
    if ops.len() < max_len {
        let r = compute_reward(acc_prev, acc_prev, true, acc_prev);
        agent.update(s, Action::Terminate, r, s, true);
        steps.push(ReplayedStep {
            state: s,
            action: Action::Terminate,
            reward: r,
        });
    }
    steps
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adopted {
    pub pipeline: Pipeline,
    pub accuracy: f64,
    pub eval: CandidateEval,
    pub replay: Vec<ReplayedStep>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuggestionOutcome {
    pub adopted: Option<Adopted>,
    /// Candidates evaluated before stopping.
    pub evaluations: usize,
}

/// Evaluates suggestions in the given (confidence) order and adopts the
/// first whose accuracy beats `acc_base`, replaying it into the Q-table.
/// Nothing is updated when no candidate improves.
pub fn evaluate_suggestions<F>(
    suggestions: &[AdvisorSuggestion],
    acc_base: f64,
    mut evaluate: F,
    agent: &mut QAgent,
    max_len: usize,
) -> SuggestionOutcome
where
    F: FnMut(&Pipeline) -> CandidateEval,
{
    let mut evaluations = 0;
    for s in suggestions {
        let eval = evaluate(&s.pipeline);
        evaluations += 1;
        let accuracy = eval.final_accuracy();
        if accuracy > acc_base {
            let replay = replay_trajectory(agent, s.pipeline.ops(), &eval, max_len);
            return SuggestionOutcome {
                adopted: Some(Adopted {
                    pipeline: s.pipeline.clone(),
                    accuracy,
                    eval,
                    replay,
                }),
                evaluations,
            };
        }
    }
    SuggestionOutcome {
        adopted: None,
        evaluations,
    }
}
