//! The search loop: epsilon-greedy episodes over the operator graph, with
//! optional advisor consultation, experience admission and periodic rule
//! mining.

mod cost;
mod replay;
mod report;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{
    describe_state, integrate_policies, Advisor, AdvisorContext, AdvisorSuggestion,
    PolicyIntegrationConfig, RetrievedExample,
};
use crate::agent::{sample_index, Action, AgentState, QAgent, QLearningConfig, QTable};
use crate::data::{
    compute_meta_features, split, summarize, DataError, Dataset, DatasetSummary, SplitSpec,
    StateVector,
};
use crate::distill::{
    default_predicate_grid, knowledge_lookup, mine_rules, Rule, RuleMiningConfig, MINING_INTERVAL,
};
use crate::evaluator::{compute_reward, train_and_eval, EvalError, ModelConfig, Reward};
use crate::operators::{
    apply_operator_pair, step_seed, OperatorId, Pipeline, StepStatus, DEFAULT_MAX_PIPELINE_LEN,
};
use crate::pool::{ExperienceEntry, ExperiencePool, TrajectoryStep, DEFAULT_K};
use crate::trigger::{should_trigger, PerformanceBuffer, TriggerConfig};

pub use cost::{simulate_costs, CostComparison, CostModel};
pub use replay::{
    evaluate_suggestions, replay_trajectory, Adopted, CandidateEval, ReplayedStep, StepOutcome,
    SuggestionOutcome,
};
pub use report::{read_history_csv, write_history_csv, write_run_report, ReportError, RunSummary};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("baseline evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Pool-entry label used when none is configured.
pub const DEFAULT_SOURCE_TAG: &str = "dataset";

/// When the advisor is consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerMode {
    Off,
    /// Every `fixed_interval` episodes.
    Fixed,
    /// When the recent accuracy trend flattens.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub max_episodes: usize,
    pub max_pipeline_len: usize,
    pub seed: u64,
    pub mode: TriggerMode,
    pub fixed_interval: usize,
    pub retrieval_k: usize,
    /// Episodes between rule re-mining.
    pub mining_interval: usize,
    /// Evaluate whole suggested pipelines and replay the first improving one.
    pub evaluate_suggestions: bool,
    /// Blend suggestions into the first action's policy.
    pub mix_policies: bool,
    /// Take the most likely blended action instead of sampling it.
    pub greedy_combined: bool,
    /// Label stored with pool entries.
    pub source_tag: String,
    /// Fixed accuracy an episode must beat to enter the pool; the running
    /// best when unset.
    pub admission_threshold: Option<f64>,
    pub split: SplitSpec,
    pub q_learning: QLearningConfig,
    pub trigger: TriggerConfig,
    pub integration: PolicyIntegrationConfig,
    pub model: ModelConfig,
    pub rules: RuleMiningConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_episodes: 100,
            max_pipeline_len: DEFAULT_MAX_PIPELINE_LEN,
            seed: 0,
            mode: TriggerMode::Off,
            fixed_interval: 2,
            retrieval_k: DEFAULT_K,
            mining_interval: MINING_INTERVAL,
            evaluate_suggestions: true,
            mix_policies: true,
            greedy_combined: false,
            source_tag: DEFAULT_SOURCE_TAG.into(),
            admission_threshold: None,
            split: SplitSpec::default(),
            q_learning: QLearningConfig::default(),
            trigger: TriggerConfig::default(),
            integration: PolicyIntegrationConfig::default(),
            model: ModelConfig::default(),
            rules: RuleMiningConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Config(m));
        if self.max_episodes == 0 {
            return bad("max_episodes must be at least 1".into());
        }
        if self.max_pipeline_len == 0 {
            return bad("max_pipeline_len must be at least 1".into());
        }
        if self.fixed_interval == 0 || self.retrieval_k == 0 || self.mining_interval == 0 {
            return bad(
                "fixed_interval, retrieval_k and mining_interval must be at least 1".into(),
            );
        }
        let positive = |x: f64| x > 0.0;
        let a = self.integration.alpha_weight;
        if !(0.0..=1.0).contains(&a) {
            return bad(format!("alpha_weight must be in [0, 1], got {a}"));
        }
        if !positive(self.integration.temperature) {
            return bad("temperature must be positive".into());
        }
        if !positive(self.trigger.slope_threshold)
            || self.trigger.cooldown == 0
            || self.trigger.min_buffer == 0
        {
            return bad("trigger settings must be positive".into());
        }
        if self.admission_threshold.is_some_and(|t| !t.is_finite()) {
            return bad("admission_threshold must be finite".into());
        }
        if !positive(self.model.learning_rate)
            || self.model.l2_penalty.is_nan()
            || self.model.l2_penalty < 0.0
        {
            return bad("model learning_rate must be positive and l2_penalty non-negative".into());
        }
        self.q_learning.validate().map_err(SearchError::Config)?;
        self.split.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Best of the executed pipeline and any adopted suggestion.
    pub accuracy: f64,
    pub executed_accuracy: f64,
    pub best_accuracy: f64,
    /// Exploration rate used during the episode.
    pub epsilon: f64,
    pub triggered: bool,
    pub cumulative_calls: usize,
    /// Model trainings run this episode.
    pub evaluations: usize,
    pub pipeline: Pipeline,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_pipeline: Pipeline,
    pub best_accuracy: f64,
    pub baseline_accuracy: f64,
    /// Accuracy of the best pipeline on the held-out test split, when run
    /// through [`run_search`].
    pub test_accuracy: Option<f64>,
    pub history: Vec<EpisodeRecord>,
    pub q_table: QTable,
    pub pool: ExperiencePool,
    pub rules: Vec<Rule>,
    pub call_episodes: Vec<usize>,
}

impl SearchResult {
    pub fn advisor_calls(&self) -> usize {
        self.call_episodes.len()
    }

    /// First episode whose running best reaches `target`.
    pub fn episodes_to_reach(&self, target: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.best_accuracy >= target)
            .map(|r| r.episode)
    }
}

/// Result of one operator applied on top of an executed prefix.
enum Step {
    Applied {
        train: Dataset,
        val: Dataset,
        accuracy: f64,
    },
    Skipped,
    Aborted,
}

/// Train/validation data plus a memo of prefix accuracies.
struct Environment {
    train: Dataset,
    val: Dataset,
    seed: u64,
    model: ModelConfig,
    cache: HashMap<Pipeline, f64>,
    trainings: usize,
}

impl Environment {
    fn accuracy(
        &mut self,
        prefix: &Pipeline,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<f64, EvalError> {
        if let Some(&a) = self.cache.get(prefix) {
            return Ok(a);
        }
        self.trainings += 1;
        let a = train_and_eval(train, val, &self.model)?;
        self.cache.insert(prefix.clone(), a);
        Ok(a)
    }

    /// Applies `op` after the executed `prefix`. The step seed is the
    /// operator's position among executed steps.
    fn step(&mut self, op: OperatorId, prefix: &Pipeline, train: &Dataset, val: &Dataset) -> Step {
        match apply_operator_pair(op, train, val, step_seed(self.seed, prefix.len())) {
            Ok((t, v, StepStatus::Applied)) => {
                let next = prefix.extended(op);
                match self.accuracy(&next, &t, &v) {
                    Ok(accuracy) => Step::Applied {
                        train: t,
                        val: v,
                        accuracy,
                    },
                    Err(_) => Step::Aborted,
                }
            }
            Ok((_, _, StepStatus::Skipped)) => Step::Skipped,
            Err(_) => Step::Aborted,
        }
    }

    fn evaluate_candidate(&mut self, p: &Pipeline, base: f64) -> CandidateEval {
        let mut train = self.train.clone();
        let mut val = self.val.clone();
        let mut executed = Pipeline::default();
        let mut steps = Vec::with_capacity(p.len());
        for &op in p.ops() {
            match self.step(op, &executed, &train, &val) {
                Step::Applied {
                    train: t,
                    val: v,
                    accuracy,
                } => {
                    steps.push(StepOutcome::Applied(accuracy));
                    executed.push(op);
                    train = t;
                    val = v;
                }
                Step::Skipped => steps.push(StepOutcome::Skipped),
                Step::Aborted => {
                    steps.push(StepOutcome::Aborted);
                    break;
                }
            }
        }
        CandidateEval { base, steps }
    }
}

/// Applies `p` to both sides with executed-position seeds, skipping steps
/// either side rejects. Returns the executed operators and the data.
pub fn run_pipeline_pair(
    p: &Pipeline,
    train: &Dataset,
    other: &Dataset,
    seed: u64,
) -> Result<(Pipeline, Dataset, Dataset), crate::operators::OperatorError> {
    let mut executed = Pipeline::default();
    let (mut t, mut o) = (train.clone(), other.clone());
    for &op in p.ops() {
        let (nt, no, status) = apply_operator_pair(op, &t, &o, step_seed(seed, executed.len()))?;
        if status == StepStatus::Applied {
            executed.push(op);
            t = nt;
            o = no;
        }
    }
    Ok((executed, t, o))
}

/// Accuracy of `p` fitted on `train` and scored on `other`; pipelines that
/// break the data score 0.
pub fn evaluate_pipeline(
    p: &Pipeline,
    train: &Dataset,
    other: &Dataset,
    seed: u64,
    model: &ModelConfig,
) -> f64 {
    run_pipeline_pair(p, train, other, seed)
        .ok()
        .and_then(|(_, t, o)| train_and_eval(&t, &o, model).ok())
        .unwrap_or(0.0)
}

/// Mutable state of a search over one train/validation pair.
pub struct Searcher<'a> {
    cfg: SearchConfig,
    env: Environment,
    advisor: Option<&'a mut dyn Advisor>,
    agent: QAgent,
    rng: ChaCha8Rng,
    pool: ExperiencePool,
    rules: Vec<Rule>,
    buffer: PerformanceBuffer,
    last_call: usize,
    call_episodes: Vec<usize>,
    episode: usize,
    baseline: f64,
    best: Option<(Pipeline, f64)>,
    history: Vec<EpisodeRecord>,
    base_meta: StateVector,
    summary: DatasetSummary,
}

impl<'a> Searcher<'a> {
    pub fn new(
        cfg: SearchConfig,
        train: Dataset,
        val: Dataset,
        advisor: Option<&'a mut dyn Advisor>,
        pool: ExperiencePool,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        let mut env = Environment {
            train,
            val,
            seed: cfg.seed,
            model: cfg.model,
            cache: HashMap::new(),
            trainings: 0,
        };
        let (t, v) = (env.train.clone(), env.val.clone());
        let baseline = env.accuracy(&Pipeline::default(), &t, &v)?;
        let base_meta = compute_meta_features(&env.train, 0);
        let summary = summarize(&env.train);
        let rules = mine_rules(&pool, &default_predicate_grid(), &cfg.rules);
        Ok(Searcher {
            agent: QAgent::new(cfg.q_learning),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            env,
            advisor,
            pool,
            rules,
            buffer: PerformanceBuffer::new(),
            last_call: 0,
            call_episodes: Vec::new(),
            episode: 0,
            baseline,
            best: None,
            history: Vec::new(),
            base_meta,
            summary,
            cfg,
        })
    }

    pub fn agent(&self) -> &QAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut QAgent {
        &mut self.agent
    }

    pub fn history(&self) -> &[EpisodeRecord] {
        &self.history
    }

    pub fn baseline_accuracy(&self) -> f64 {
        self.baseline
    }

    fn wants_advice(&self, episode: usize) -> bool {
        if self.advisor.is_none() {
            return false;
        }
        match self.cfg.mode {
            TriggerMode::Off => false,
            TriggerMode::Fixed => episode - self.last_call >= self.cfg.fixed_interval,
            TriggerMode::Adaptive => {
                should_trigger(episode, &self.buffer, self.last_call, &self.cfg.trigger)
            }
        }
    }

    fn context(&self) -> AdvisorContext {
        let retrieved = self
            .pool
            .retrieve_global(&self.base_meta, self.cfg.retrieval_k)
            .into_iter()
            .filter_map(|hit| {
                let e = self.pool.get(hit.entry)?;
                Some(RetrievedExample {
                    context: describe_state(&e.d_meta_vec),
                    pipeline: e.p_complete.clone(),
                    accuracy: e.r_final,
                    distance: hit.distance,
                })
            })
            .collect();
        AdvisorContext {
            state_vector: self.base_meta,
            summary: self.summary.clone(),
            partial_pipeline: Pipeline::default(),
            retrieved,
            knowledge_rules: knowledge_lookup(&self.rules, &self.base_meta),
            available_operators: AdvisorContext::all_operator_names(),
            max_pipeline_len: self.cfg.max_pipeline_len,
        }
    }

    fn consult(&mut self) -> Vec<AdvisorSuggestion> {
        let ctx = self.context();
        let Some(advisor) = self.advisor.as_mut() else {
            return Vec::new();
        };
        match advisor.suggest(&ctx) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("episode {}: {e}; continuing without advice", self.episode);
                Vec::new()
            }
        }
    }

    /// Pool entry for an executed pipeline, with per-step meta-features.
    fn experience(&self, ops: &[OperatorId], rewards: &[f64], accuracy: f64) -> ExperienceEntry {
        let mut train = self.env.train.clone();
        let mut trajectory = Vec::with_capacity(ops.len());
        for (i, (&op, &reward)) in ops.iter().zip(rewards).enumerate() {
            trajectory.push(TrajectoryStep {
                s_vec: compute_meta_features(&train, i),
                action: op,
                reward,
            });
            if let Ok(next) =
                crate::operators::apply_operator(op, &train, step_seed(self.cfg.seed, i))
            {
                train = next;
            }
        }
        ExperienceEntry {
            d_meta_vec: self.base_meta,
            p_complete: Pipeline::new(ops.to_vec()),
            r_final: accuracy.clamp(0.0, 1.0),
            trajectory,
            source_tag: self.cfg.source_tag.clone(),
            created_episode: self.episode,
        }
    }

    pub fn run_episode(&mut self) -> &EpisodeRecord {
        self.episode += 1;
        let e = self.episode;
        let trainings_before = self.env.trainings;
        let epsilon = self.agent.epsilon;
        let max_len = self.cfg.max_pipeline_len;

        let triggered = self.wants_advice(e);
        let mut suggestions = Vec::new();
        let mut adopted: Option<Adopted> = None;
        if triggered {
            self.last_call = e;
            self.call_episodes.push(e);
            suggestions = self.consult();
            if self.cfg.evaluate_suggestions && !suggestions.is_empty() {
                let acc_base = self.best.as_ref().map_or(self.baseline, |b| b.1);
                let baseline = self.baseline;
                let env = &mut self.env;
                let out = evaluate_suggestions(
                    &suggestions,
                    acc_base,
                    |p| env.evaluate_candidate(p, baseline),
                    &mut self.agent,
                    max_len,
                );
                adopted = out.adopted;
            }
        }

        let mut state = AgentState::Start;
        let mut executed = Pipeline::default();
        let mut rewards = Vec::new();
        let (mut train, mut val) = (self.env.train.clone(), self.env.val.clone());
        let mut acc_prev = self.baseline;
        let mut aborted = false;
        for step in 0..max_len {
            let action =
                if triggered && step == 0 && self.cfg.mix_policies && !suggestions.is_empty() {
                    let pi_rl = self
                        .agent
                        .policy_distribution(state, self.cfg.integration.temperature);
                    let p =
                        integrate_policies(&pi_rl, &suggestions, self.cfg.integration.alpha_weight);
                    let idx = if self.cfg.greedy_combined {
                        argmax(&p)
                    } else {
                        sample_index(&p, &mut self.rng)
                    };
                    Action::from_index(idx).expect("policy over all actions")
                } else {
                    self.agent.select_action(state, epsilon, &mut self.rng)
                };
            let op = match action {
                Action::Terminate => {
                    let r = compute_reward(acc_prev, acc_prev, true, acc_prev);
                    self.agent.update(state, action, r, state, true);
                    break;
                }
                Action::Apply(op) => op,
            };
            let last = step + 1 == max_len;
            match self.env.step(op, &executed, &train, &val) {
                Step::Applied {
                    train: t,
                    val: v,
                    accuracy,
                } => {
                    let r = compute_reward(acc_prev, accuracy, last, accuracy);
                    let next = AgentState::After(op);
                    self.agent.update(state, action, r, next, last);
                    rewards.push(r.value());
                    executed.push(op);
                    train = t;
                    val = v;
                    state = next;
                    acc_prev = accuracy;
                }
                Step::Skipped => {
                    self.agent
                        .update(state, action, Reward::inapplicable(), state, false);
                }
                Step::Aborted => {
                    let r = compute_reward(acc_prev, 0.0, true, 0.0);
                    self.agent.update(state, action, r, state, true);
                    aborted = true;
                    break;
                }
            }
        }
        let executed_accuracy = if aborted { 0.0 } else { acc_prev };

        let (mut pipeline, mut accuracy) = (executed.clone(), executed_accuracy);
        let mut entry_parts = (executed.ops().to_vec(), rewards);
        if let Some(a) = adopted.filter(|a| a.accuracy > executed_accuracy) {
            let mut ops = Vec::new();
            let mut rs = Vec::new();
            for ((&op, outcome), step) in a.pipeline.ops().iter().zip(&a.eval.steps).zip(&a.replay)
            {
                if matches!(outcome, StepOutcome::Applied(_)) {
                    ops.push(op);
                    rs.push(step.reward.value());
                }
            }
            pipeline = Pipeline::new(ops.clone());
            accuracy = a.accuracy;
            entry_parts = (ops, rs);
        }

        let best_so_far = self.best.as_ref().map(|b| b.1);
        let admit = match self.cfg.admission_threshold.or(best_so_far) {
            Some(t) => accuracy > t,
            None => true,
        };
        if admit {
            let entry = self.experience(&entry_parts.0, &entry_parts.1, accuracy);
            if let Err(err) = self.pool.add_entry(entry) {
                log::warn!("episode {e}: experience not stored: {err}");
            }
        }
        if best_so_far.is_none_or(|b| accuracy > b) {
            self.best = Some((pipeline.clone(), accuracy));
        }

        self.buffer.push(accuracy);
        self.agent.decay_epsilon();
        if e.is_multiple_of(self.cfg.mining_interval) {
            self.rules = mine_rules(&self.pool, &default_predicate_grid(), &self.cfg.rules);
        }

        let best_accuracy = self.best.as_ref().map_or(accuracy, |b| b.1);
        log::debug!(
            "episode {e}: accuracy {accuracy:.4} best {best_accuracy:.4} pipeline {pipeline} triggered {triggered}"
        );
        self.history.push(EpisodeRecord {
            episode: e,
            accuracy,
            executed_accuracy,
            best_accuracy,
            epsilon,
            triggered,
            cumulative_calls: self.call_episodes.len(),
            evaluations: self.env.trainings - trainings_before,
            pipeline,
        });
        self.history.last().expect("just pushed")
    }

    pub fn finish(self) -> SearchResult {
        let (best_pipeline, best_accuracy) =
            self.best.unwrap_or((Pipeline::default(), self.baseline));
        SearchResult {
            best_pipeline,
            best_accuracy,
            baseline_accuracy: self.baseline,
            test_accuracy: None,
            history: self.history,
            q_table: self.agent.table,
            pool: self.pool,
            rules: self.rules,
            call_episodes: self.call_episodes,
        }
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Splits `d`, runs `cfg.max_episodes` episodes on train/validation and
/// scores the best pipeline on the test split.
pub fn run_search(
    cfg: &SearchConfig,
    d: &Dataset,
    advisor: Option<&mut dyn Advisor>,
    pool: ExperiencePool,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let (train, val, test) = split(d, &cfg.split)?;
    let mut searcher = Searcher::new(cfg.clone(), train.clone(), val, advisor, pool)?;
    for _ in 0..cfg.max_episodes {
        searcher.run_episode();
    }
    let mut result = searcher.finish();
    result.test_accuracy = Some(evaluate_pipeline(
        &result.best_pipeline,
        &train,
        &test,
        cfg.seed,
        &cfg.model,
    ));
    Ok(result)
}
