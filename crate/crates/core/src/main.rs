//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 output failure, 2 usage or configuration error,
//! 3 data error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use pipesearch::advisor::{Advisor, MockAdvisor, RemoteAdvisor, RemoteConfig, ENV_ADVISOR_URL};
use pipesearch::agent::QTable;
use pipesearch::config::{AdvisorKind, RunConfigFile};
use pipesearch::data::{load_csv_with, split, DataError, Dataset, SplitSpec};
use pipesearch::distill::{
    default_predicate_grid, mine_rules, mine_sequences, save_rules, RuleMiningConfig,
};
use pipesearch::evaluator::ModelConfig;
use pipesearch::operators::{OperatorId, Pipeline};
use pipesearch::pool::{ExperiencePool, PoolError};
use pipesearch::search::{
    evaluate_pipeline, read_history_csv, run_pipeline_pair, run_search, simulate_costs,
    write_run_report, CostModel, SearchError, TriggerMode, DEFAULT_SOURCE_TAG,
};

#[derive(Parser)]
#[command(
    name = "pipesearch",
    version,
    about = "Search data-preparation pipelines with Q-learning and an advisor"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline search and write a report directory.
    Search(Box<SearchArgs>),
    /// Apply one pipeline and print its accuracy.
    EvalPipeline(EvalArgs),
    /// Inspect the operator registry.
    #[command(subcommand)]
    Operators(OperatorsCommand),
    /// Mine frequent sequences and rules from an experience pool.
    Distill(DistillArgs),
    /// Compare fixed-interval and adaptive advisor costs.
    SimulateCost(CostArgs),
    /// Turn a run's history into plotting data.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum OperatorsCommand {
    /// Print id,name,type for every operator.
    List,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column.
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated columns to keep categorical.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Train,validation,test fractions.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    split: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdvisorArg {
    Off,
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Off,
    Fixed,
    Adaptive,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    advisor: Option<AdvisorArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Episodes between fixed-mode advisor calls.
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    alpha_weight: Option<f64>,
    #[arg(long)]
    advisor_temperature: Option<f64>,
    /// Model name sent to a remote advisor.
    #[arg(long)]
    advisor_model: Option<String>,
    /// Take the most likely blended action instead of sampling.
    #[arg(long)]
    greedy_combined: bool,
    /// Do not evaluate whole suggested pipelines.
    #[arg(long)]
    no_suggestion_eval: bool,
    /// Do not blend suggestions into the action policy.
    #[arg(long)]
    no_policy_mix: bool,
    /// Pool file loaded before and written after the search.
    #[arg(long)]
    experience_pool: Option<PathBuf>,
    #[arg(long)]
    slope_threshold: Option<f64>,
    #[arg(long)]
    cooldown: Option<usize>,
    #[arg(long)]
    buffer_min: Option<usize>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated operator ids.
    #[arg(long, allow_hyphen_values = true)]
    ops: String,
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_support: usize,
    #[arg(long, default_value_t = 0.8)]
    high_reward: f64,
    #[arg(long, default_value_t = 0.6)]
    min_confidence: f64,
    /// Only pipelines whose reward reaches this quantile of pool rewards
    /// contribute to frequent sequences.
    #[arg(long, default_value_t = 0.0)]
    reward_quantile: f64,
    /// Rules file, one JSON record per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long = "T")]
    episodes: usize,
    #[arg(long)]
    p_stag: f64,
    #[arg(long)]
    c_llm: f64,
    #[arg(long)]
    c_rl: f64,
    #[arg(long = "K", default_value_t = 1)]
    interval: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `search`.
    #[arg(long)]
    run: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the stored Q-table instead of the curves.
    #[arg(long)]
    qtable: bool,
}

enum Failure {
    Usage {
        command: &'static str,
        missing: &'static str,
    },
    Config(String),
    Data(String),
    Output(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Usage { command, missing } => {
                let mut cli = Cli::command().bin_name("pipesearch");
                cli.build();
                let mut cmd = cli
                    .find_subcommand_mut(command)
                    .expect("known subcommand")
                    .clone();
                let msg =
                    format!("the following required arguments were not provided:\n  {missing}");
                cmd.error(clap::error::ErrorKind::MissingRequiredArgument, msg)
                    .exit()
            }
            Failure::Config(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Failure::Data(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(3)
            }
            Failure::Output(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

fn data_failure(e: DataError) -> Failure {
    match e {
        DataError::InvalidSplit(_) => Failure::Config(e.to_string()),
        e => Failure::Data(e.to_string()),
    }
}

fn missing(command: &'static str, missing: &'static str) -> Failure {
    Failure::Usage { command, missing }
}

fn output_failure(e: impl std::fmt::Display) -> Failure {
    Failure::Output(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Search(a) => cmd_search(*a),
        Command::EvalPipeline(a) => cmd_eval_pipeline(a),
        Command::Operators(OperatorsCommand::List) => cmd_operators_list(),
        Command::Distill(a) => cmd_distill(a),
        Command::SimulateCost(a) => cmd_simulate_cost(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}

fn split_spec(fractions: &Option<Vec<f64>>, base: SplitSpec) -> Result<SplitSpec, Failure> {
    match fractions.as_deref() {
        None => Ok(base),
        Some([train, val, test]) => Ok(SplitSpec {
            train_fraction: *train,
            val_fraction: *val,
            test_fraction: *test,
            ..base
        }),
        Some(_) => Err(Failure::Config("--split needs three fractions".into())),
    }
}

fn load_data(path: &Path, target: &str, categorical: &[String]) -> Result<Dataset, Failure> {
    load_csv_with(path, target, categorical).map_err(data_failure)
}

fn cmd_search(a: SearchArgs) -> Result<(), Failure> {
    let mut file = match &a.config {
        Some(p) => RunConfigFile::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfigFile::default(),
    };
    let data_path = a
        .data
        .data
        .or(file.data.path.take())
        .ok_or_else(|| missing("search", "--data <DATA>"))?;
    let target = a
        .data
        .target
        .or(file.data.target.take())
        .ok_or_else(|| missing("search", "--target <TARGET>"))?;
    let mut categorical = file.data.categorical.clone();
    categorical.extend(a.data.categorical);

    let cfg = &mut file.search;
    if let Some(seed) = a.data.seed {
        cfg.seed = seed;
        cfg.split.seed = seed;
    }
    cfg.split = split_spec(&a.data.split, cfg.split)?;
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Off => TriggerMode::Off,
            ModeArg::Fixed => TriggerMode::Fixed,
            ModeArg::Adaptive => TriggerMode::Adaptive,
        };
    }
    if let Some(v) = a.episodes {
        cfg.max_episodes = v;
    }
    if let Some(v) = a.max_len {
        cfg.max_pipeline_len = v;
    }
    if let Some(v) = a.interval {
        cfg.fixed_interval = v;
    }
    if let Some(v) = a.alpha_weight {
        cfg.integration.alpha_weight = v;
    }
    if let Some(v) = a.slope_threshold {
        cfg.trigger.slope_threshold = v;
    }
    if let Some(v) = a.cooldown {
        cfg.trigger.cooldown = v;
    }
    if let Some(v) = a.buffer_min {
        cfg.trigger.min_buffer = v;
    }
    cfg.greedy_combined |= a.greedy_combined;
    if a.no_suggestion_eval {
        cfg.evaluate_suggestions = false;
    }
    if a.no_policy_mix {
        cfg.mix_policies = false;
    }
    if let Some(v) = a.advisor_temperature {
        file.advisor.temperature = v;
    }
    if let Some(v) = a.advisor_model {
        file.advisor.model = v;
    }
    if let Some(v) = a.advisor {
        file.advisor.backend = match v {
            AdvisorArg::Off => AdvisorKind::Off,
            AdvisorArg::Mock => AdvisorKind::Mock,
            AdvisorArg::Remote => AdvisorKind::Remote,
        };
    }
    if file.search.source_tag == DEFAULT_SOURCE_TAG {
        if let Some(stem) = data_path.file_stem() {
            file.search.source_tag = stem.to_string_lossy().into_owned();
        }
    }
    let cfg = file.search.clone();
    cfg.validate().map_err(|e| match e {
        SearchError::Data(d) => data_failure(d),
        e => Failure::Config(e.to_string()),
    })?;
    let out = a
        .out
        .or(file.output.clone())
        .unwrap_or_else(|| PathBuf::from("run"));
    let pool_path = a.experience_pool.or(file.advisor.experience_pool.clone());

    let mut mock = MockAdvisor;
    let mut remote;
    let advisor: Option<&mut dyn Advisor> = match file.advisor.backend {
        AdvisorKind::Off => None,
        AdvisorKind::Mock => Some(&mut mock),
        AdvisorKind::Remote => {
            let mut rc = RemoteConfig::from_env(file.advisor.model.clone()).ok_or_else(|| {
                Failure::Config(format!(
                    "--advisor remote needs {ENV_ADVISOR_URL} to be set"
                ))
            })?;
            rc.temperature = file.advisor.temperature;
            rc.timeout = Duration::from_secs(file.advisor.timeout_secs);
            remote = RemoteAdvisor::new(rc).map_err(|e| Failure::Config(e.to_string()))?;
            Some(&mut remote)
        }
    };

    let pool = match &pool_path {
        Some(p) if p.exists() => load_pool(p)?,
        _ => ExperiencePool::new(),
    };
    let d = load_data(&data_path, &target, &categorical)?;
    let result = run_search(&cfg, &d, advisor, pool).map_err(|e| match e {
        SearchError::Data(d) => data_failure(d),
        SearchError::Eval(e) => Failure::Data(e.to_string()),
        e => Failure::Config(e.to_string()),
    })?;
    write_run_report(&out, &result, &cfg).map_err(output_failure)?;
    if let Some(p) = &pool_path {
        result.pool.save(p).map_err(output_failure)?;
    }
    println!("best pipeline: [{}]", result.best_pipeline.id_list());
    println!("operators: {}", result.best_pipeline.display_names());
    println!("validation accuracy: {}", result.best_accuracy);
    if let Some(t) = result.test_accuracy {
        println!("test accuracy: {t}");
    }
    println!("advisor calls: {}", result.advisor_calls());
    println!("report: {}", out.display());
    Ok(())
}

fn load_pool(p: &Path) -> Result<ExperiencePool, Failure> {
    match ExperiencePool::load(p) {
        Ok(pool) => Ok(pool),
        Err(PoolError::CorruptRecord { line, message, .. }) => Err(Failure::Data(format!(
            "{}: line {line}: {message}",
            p.display()
        ))),
        Err(e) => Err(Failure::Data(format!("{}: {e}", p.display()))),
    }
}

fn parse_ops(text: &str) -> Result<Pipeline, Failure> {
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: i64 = part
            .parse()
            .map_err(|_| Failure::Config(format!("unknown operator id `{part}`")))?;
        ids.push(id);
    }
    Pipeline::from_ids(&ids).map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_eval_pipeline(a: EvalArgs) -> Result<(), Failure> {
    let pipeline = parse_ops(&a.ops)?;
    let data = a
        .data
        .data
        .ok_or_else(|| missing("eval-pipeline", "--data <DATA>"))?;
    let target = a
        .data
        .target
        .ok_or_else(|| missing("eval-pipeline", "--target <TARGET>"))?;
    let seed = a.data.seed.unwrap_or(0);
    let spec = split_spec(
        &a.data.split,
        SplitSpec {
            seed,
            ..SplitSpec::default()
        },
    )?;
    spec.validate().map_err(data_failure)?;
    let d = load_data(&data, &target, &a.data.categorical)?;
    let (train, val, test) = split(&d, &spec).map_err(data_failure)?;
    let model = ModelConfig::default();

    println!("pipeline: {}", pipeline.display_names());
    let executed = run_pipeline_pair(&pipeline, &train, &val, seed)
        .map(|(p, _, _)| p)
        .unwrap_or_default();
    let mut remaining = executed.ops().iter().peekable();
    for (i, op) in pipeline.ops().iter().enumerate() {
        let status = if remaining.peek() == Some(&op) {
            remaining.next();
            "applied"
        } else {
            "skipped"
        };
        println!("step {}: {} ({}) {status}", i + 1, op.name(), op.get());
    }
    println!(
        "validation accuracy: {}",
        evaluate_pipeline(&pipeline, &train, &val, seed, &model)
    );
    println!(
        "test accuracy: {}",
        evaluate_pipeline(&pipeline, &train, &test, seed, &model)
    );
    Ok(())
}

fn cmd_operators_list() -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
        w.write_record(["id", "name", "type"])?;
        for op in OperatorId::all() {
            w.write_record([
                op.get().to_string().as_str(),
                op.name(),
                op.op_type().label(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(output_failure)
}

fn cmd_distill(a: DistillArgs) -> Result<(), Failure> {
    let cfg = RuleMiningConfig {
        min_support: a.min_support,
        high_reward_threshold: a.high_reward,
        min_confidence: a.min_confidence,
    };
    if cfg.min_support == 0
        || !(0.0..=1.0).contains(&cfg.min_confidence)
        || !(0.0..=1.0).contains(&a.reward_quantile)
    {
        return Err(Failure::Config(
            "min-support must be at least 1; min-confidence and reward-quantile in [0, 1]".into(),
        ));
    }
    let pool = load_pool(&a.pool)?;
    let sequences = mine_sequences(&pool, cfg.min_support, a.reward_quantile);
    let rules = mine_rules(&pool, &default_predicate_grid(), &cfg);
    save_rules(&rules, &a.out).map_err(output_failure)?;
    let mut out = std::io::stdout().lock();
    let mut print = || -> std::io::Result<()> {
        writeln!(out, "pool entries: {}", pool.len())?;
        writeln!(out, "frequent sequences: {}", sequences.len())?;
        for s in &sequences {
            writeln!(
                out,
                "  {} support {} mean reward {}",
                Pipeline::new(s.sequence.clone()),
                s.support,
                s.mean_reward
            )?;
        }
        writeln!(out, "rules: {}", rules.len())?;
        for r in &rules {
            writeln!(out, "  {r}")?;
        }
        Ok(())
    };
    print().map_err(output_failure)
}

fn cmd_simulate_cost(a: CostArgs) -> Result<(), Failure> {
    let m = CostModel {
        c_llm: a.c_llm,
        c_rl: a.c_rl,
        p_stag: a.p_stag,
        episodes: a.episodes,
    };
    m.validate().map_err(Failure::Config)?;
    if a.interval == 0 {
        return Err(Failure::Config("--K must be at least 1".into()));
    }
    let c = simulate_costs(&m, a.interval, a.trials, a.seed);
    println!("cost_fixed {}", c.cost_fixed);
    println!("cost_adaptive_expected {}", c.cost_adaptive_expected);
    println!("delta {}", c.delta);
    println!(
        "monte_carlo_mean {} ({} trials)",
        c.monte_carlo_mean, c.trials
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), Failure> {
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(output_failure)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if a.qtable {
        let path = a.run.join("qtable.csv");
        let file = std::fs::File::open(&path)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let table = QTable::read_csv(file)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        return table.write_csv(sink).map_err(output_failure);
    }
    let path = a.run.join("history.csv");
    let history =
        read_history_csv(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(sink);
    let mut write = || -> csv::Result<()> {
        w.write_record([
            "episode",
            "accuracy",
            "best_accuracy",
            "epsilon",
            "triggered",
            "cumulative_calls",
        ])?;
        for h in &history {
            w.write_record([
                h.episode.to_string(),
                h.accuracy.to_string(),
                h.best_accuracy.to_string(),
                h.epsilon.to_string(),
                u8::from(h.triggered).to_string(),
                h.cumulative_calls.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(output_failure)
}
