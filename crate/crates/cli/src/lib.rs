//! Command-line harness for the architecture search: configuration, search
//! orchestration with checkpoint/resume, and code inspection commands.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use stgcn_nas::evaluator::{
    Cached, Evaluator, ExternalEvaluator, SurrogateEvaluator, SurrogateWeights,
    WorkerCommand, DEFAULT_TRAIN_EPOCHS,
};
use stgcn_nas::graph::{self, Ablation, BlockOps, ProblemSignature};
use stgcn_nas::objective::{EvaluationResult, ObjectiveConfig};
use stgcn_nas::qlearning::{
    greedy_rollout, BestFound, CheckpointMeta, EpisodeRecord, EpsilonSchedule, QCheckpoint,
    QLearningConfig, QTable, Search, SearchError,
};
use stgcn_nas::search_space::{space_size, validate_code, ArchitectureCode, ParameterCatalog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVALUATOR: i32 = 3;

pub const CHECKPOINT_EVERY: u64 = 100;

#[derive(Debug, Parser)]
#[command(name = "stgcn-nas", version, about = "Constraint-aware Q-learning search over STGCN architectures")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationKind {
    UniformBlocks,
    Linearize,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a search and write its artifacts to the output directory.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop once this many episodes have completed, as if interrupted.
        #[arg(long, hide = true)]
        stop_after: Option<u64>,
    },
    /// Check a code file against the catalog.
    Validate {
        code: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the model graph of a code.
    Decode {
        code: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        history_len: Option<u32>,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        node_count: Option<u32>,
        #[arg(long)]
        feature_count: Option<u32>,
    },
    /// Print the exact number of configurations in the catalog.
    SpaceSize {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the code after a structural ablation.
    Ablate {
        code: PathBuf,
        #[arg(long, value_enum)]
        kind: AblationKind,
        /// Operator triple `SIPM,TIPM,FES` for the uniform-block variants.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-render the run summary from an episode log.
    Replay {
        episodes: PathBuf,
        /// Needed to report the greedy rollout from a sibling qtable.json.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// A failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

fn fail(code: i32, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

type CmdResult = Result<i32, Failure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QLearningSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    /// Defaults to the hold/decay/hold schedule scaled to `episodes`.
    #[serde(default)]
    pub epsilon_schedule: Option<EpsilonSchedule<f64>>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_alpha() -> f64 {
    0.001
}

fn default_gamma() -> f64 {
    0.9
}

fn default_episodes() -> u64 {
    2000
}

impl Default for QLearningSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            gamma: default_gamma(),
            episodes: default_episodes(),
            epsilon_schedule: None,
            rng_seed: 0,
        }
    }
}

impl QLearningSection {
    pub fn resolve(&self) -> QLearningConfig<f64> {
        QLearningConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            episodes: self.episodes,
            epsilon_schedule: self
                .epsilon_schedule
                .clone()
                .unwrap_or_else(|| EpsilonSchedule::default_for(self.episodes)),
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Explicit inference-time limit.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Alternatively, a code whose measured time doubled becomes the limit.
    #[serde(default)]
    pub reference_code: Option<ArchitectureCode>,
    #[serde(default = "default_true")]
    pub hard_reject: bool,
    #[serde(default = "default_failure_mae")]
    pub failure_mae: f64,
}

fn default_lambda() -> f64 {
    (-19.0f64).exp()
}

fn default_true() -> bool {
    true
}

fn default_failure_mae() -> f64 {
    1e6
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            t_max: None,
            reference_code: None,
            hard_reject: true,
            failure_mae: default_failure_mae(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorSpec {
    Surrogate {
        #[serde(default)]
        weights_path: Option<PathBuf>,
    },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_train_epochs")]
        train_epochs: u32,
    },
}

fn default_timeout_ms() -> u64 {
    600_000
}

fn default_train_epochs() -> u32 {
    DEFAULT_TRAIN_EPOCHS
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        Self::Surrogate { weights_path: None }
    }
}

/// One JSON document describing a run. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub catalog: ParameterCatalog,
    #[serde(default)]
    pub qlearning: QLearningSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub evaluator: EvaluatorSpec,
    #[serde(default)]
    pub signature: ProblemSignature,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: ParameterCatalog::default(),
            qlearning: QLearningSection::default(),
            objective: ObjectiveSection::default(),
            evaluator: EvaluatorSpec::default(),
            signature: ProblemSignature::default(),
            out_dir: default_out_dir(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.out_dir = base.join(&cfg.out_dir);
        if let EvaluatorSpec::Surrogate { weights_path: Some(p) } = &mut cfg.evaluator {
            *p = base.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section and that referenced files exist.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.catalog.validate()?;
        self.qlearning.resolve().validate()?;
        self.signature.validate()?;
        let o = &self.objective;
        if let Some(t) = o.t_max {
            ObjectiveConfig { lambda: o.lambda, t_max: t, hard_reject: o.hard_reject, failure_mae: o.failure_mae }
                .validate()?;
        }
        if o.t_max.is_some() && o.reference_code.is_some() {
            anyhow::bail!("objective takes either t_max or reference_code, not both");
        }
        if let Some(code) = &o.reference_code {
            let v = validate_code(code, &self.catalog);
            if let Some(first) = v.first() {
                anyhow::bail!("reference_code is invalid: {first}");
            }
        }
        match &self.evaluator {
            EvaluatorSpec::Surrogate { weights_path: Some(p) } => {
                load_weights(p)?;
            }
            EvaluatorSpec::Surrogate { weights_path: None } => {}
            EvaluatorSpec::External { timeout_ms, .. } => {
                if *timeout_ms == 0 {
                    anyhow::bail!("timeout_ms must be positive");
                }
            }
        }
        Ok(())
    }
}

fn load_weights(path: &Path) -> anyhow::Result<SurrogateWeights<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let w: SurrogateWeights<f64> = serde_json::from_str(&text)?;
    w.validate().map_err(anyhow::Error::msg)?;
    Ok(w)
}

fn load_optional_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| fail(EXIT_CONFIG, e)),
        None => Ok(RunConfig::default()),
    }
}

fn read_code(path: &Path) -> Result<ArchitectureCode, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| fail(EXIT_CONFIG, e))?;
    text.trim()
        .parse::<ArchitectureCode>()
        .with_context(|| format!("parsing code in {}", path.display()))
        .map_err(|e| fail(EXIT_CONFIG, e))
}

/// Entry point shared by the binary and tests: runs one command and returns
/// the exit code, writing results to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Search { config, seed, episodes, out: out_dir, resume, stop_after } => cmd_search(
            &SearchArgs { config, seed, episodes, out: out_dir, resume, stop_after },
            cli.format,
            out,
        ),
        Command::Validate { code, config } => cmd_validate(&code, config.as_deref(), cli.format, out),
        Command::Decode { code, config, history_len, horizon, node_count, feature_count } => {
            cmd_decode(&code, config.as_deref(), [history_len, horizon, node_count, feature_count], out)
        }
        Command::SpaceSize { config } => cmd_space_size(config.as_deref(), cli.format, out),
        Command::Ablate { code, kind, spec, config } => {
            cmd_ablate(&code, kind, spec.as_deref(), config.as_deref(), out)
        }
        Command::Replay { episodes, config } => cmd_replay(&episodes, config.as_deref(), cli.format, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}

pub fn cmd_validate(code_path: &Path, config: Option<&Path>, format: Format, out: &mut dyn Write) -> CmdResult {
    let cfg = load_optional_config(config)?;
    let code = read_code(code_path)?;
    let violations = validate_code(&code, &cfg.catalog);
    match format {
        Format::Json => {
            let v: Vec<_> = violations
                .iter()
                .map(|v| json!({"state_index": v.state_index, "rule": v.rule}))
                .collect();
            writeln!(out, "{}", json!({"valid": violations.is_empty(), "violations": v}))
        }
        Format::Text if violations.is_empty() => writeln!(out, "valid"),
        Format::Text => violations.iter().try_for_each(|v| writeln!(out, "{v}")),
    }
    .map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_INVALID })
}

pub fn cmd_decode(
    code_path: &Path,
    config: Option<&Path>,
    overrides: [Option<u32>; 4],
    out: &mut dyn Write,
) -> CmdResult {
    let cfg = load_optional_config(config)?;
    let code = read_code(code_path)?;
    let mut sig = cfg.signature;
    let [h, p, n, f] = overrides;
    sig.history_len = h.unwrap_or(sig.history_len);
    sig.horizon = p.unwrap_or(sig.horizon);
    sig.node_count = n.unwrap_or(sig.node_count);
    sig.feature_count = f.unwrap_or(sig.feature_count);
    sig.validate().map_err(|e| fail(EXIT_CONFIG, e))?;
    let g = graph::build_graph(&code, &cfg.catalog, sig).map_err(|e| fail(EXIT_INVALID, e))?;
    out.write_all(&graph::to_json(&g))
        .and_then(|_| writeln!(out))
        .map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(EXIT_OK)
}

pub fn cmd_space_size(config: Option<&Path>, format: Format, out: &mut dyn Write) -> CmdResult {
    let cfg = load_optional_config(config)?;
    let n = space_size(&cfg.catalog);
    match format {
        Format::Json => writeln!(out, "{}", json!({"space_size": n.to_string()})),
        Format::Text => writeln!(out, "{n}"),
    }
    .map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(EXIT_OK)
}

pub fn cmd_ablate(
    code_path: &Path,
    kind: AblationKind,
    spec: Option<&str>,
    config: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let cfg = load_optional_config(config)?;
    let code = read_code(code_path)?;
    let ops = || -> Result<BlockOps, Failure> {
        spec.ok_or_else(|| fail(EXIT_INVALID, anyhow::anyhow!("--spec SIPM,TIPM,FES is required")))?
            .parse::<BlockOps>()
            .map_err(|e| fail(EXIT_INVALID, anyhow::anyhow!("invalid spec: {e}")))
    };
    let ablation = match kind {
        AblationKind::UniformBlocks => Ablation::UniformBlocks(ops()?),
        AblationKind::Linearize => Ablation::Linearize,
        AblationKind::Both => Ablation::Both(ops()?),
    };
    let result = graph::apply_ablation(&code, ablation, &cfg.catalog).map_err(|e| fail(EXIT_INVALID, e))?;
    writeln!(out, "{result}").map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(EXIT_OK)
}

pub struct SearchArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub episodes: Option<u64>,
    pub out: Option<PathBuf>,
    pub resume: bool,
    pub stop_after: Option<u64>,
}

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const QTABLE_FILE: &str = "qtable.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BEST_GRAPH_FILE: &str = "best.graph.json";
pub const BEST_CODE_FILE: &str = "best.code.txt";

fn build_evaluator(cfg: &RunConfig) -> Result<Box<dyn Evaluator<f64>>, Failure> {
    Ok(match &cfg.evaluator {
        EvaluatorSpec::Surrogate { weights_path } => {
            let w = match weights_path {
                Some(p) => load_weights(p).map_err(|e| fail(EXIT_CONFIG, e))?,
                None => SurrogateWeights::default(),
            };
            Box::new(SurrogateEvaluator::new(w))
        }
        EvaluatorSpec::External { command, args, timeout_ms, train_epochs } => {
            let cmd = WorkerCommand { program: command.clone(), args: args.clone() };
            let ev = ExternalEvaluator::spawn(cmd, *timeout_ms, cfg.catalog.clone(), cfg.signature)
                .map_err(|e| fail(EXIT_EVALUATOR, e))?
                .with_train_epochs(*train_epochs);
            Box::new(ev)
        }
    })
}

fn resolve_objective(
    cfg: &RunConfig,
    evaluator: &mut dyn Evaluator<f64>,
) -> Result<ObjectiveConfig<f64>, Failure> {
    let o = &cfg.objective;
    let t_max = match (&o.t_max, &o.reference_code) {
        (Some(t), _) => *t,
        (None, Some(code)) => match evaluator.evaluate(code).map_err(|e| fail(EXIT_EVALUATOR, e))? {
            EvaluationResult::Ok { inference_time, .. } => 2.0 * inference_time,
            EvaluationResult::Failed { reason } => {
                return Err(fail(EXIT_EVALUATOR, anyhow::anyhow!("reference model failed: {reason}")))
            }
        },
        (None, None) => {
            return Err(fail(EXIT_CONFIG, anyhow::anyhow!("objective needs t_max or reference_code")))
        }
    };
    let ocfg = ObjectiveConfig { lambda: o.lambda, t_max, hard_reject: o.hard_reject, failure_mae: o.failure_mae };
    ocfg.validate().map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(ocfg)
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn write_checkpoint(dir: &Path, cp: &QCheckpoint<f64>) -> std::io::Result<()> {
    let bytes = serde_json::to_vec(cp).expect("checkpoint serializes");
    write_atomic(&dir.join(QTABLE_FILE), &bytes)
}

pub fn read_checkpoint(path: &Path) -> anyhow::Result<QCheckpoint<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads complete records from an episode log; a torn final line is dropped.
pub fn read_episodes(path: &Path) -> anyhow::Result<Vec<EpisodeRecord<f64>>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EpisodeRecord<f64>>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(e).with_context(|| format!("{}:{}", path.display(), i + 1)),
        }
    }
    for (i, r) in out.iter().enumerate() {
        if r.episode != i as u64 {
            anyhow::bail!("{}: episode numbering breaks at line {}", path.display(), i + 1);
        }
    }
    Ok(out)
}

/// Summary statistics derived from an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: u64,
    pub best: Option<BestFound<f64>>,
    pub greedy_code: Option<ArchitectureCode>,
    pub feasible_episodes: u64,
    pub failed_episodes: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub evaluator_wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_wall_time_s: Option<f64>,
}

pub fn summarize(records: &[EpisodeRecord<f64>]) -> Summary {
    let mut best = None;
    for r in records {
        BestFound::consider(&mut best, r);
    }
    let hits = records.iter().filter(|r| r.from_cache).count() as u64;
    Summary {
        episodes: records.len() as u64,
        best,
        greedy_code: None,
        feasible_episodes: records.iter().filter(|r| r.feasible).count() as u64,
        failed_episodes: records.iter().filter(|r| r.mae.is_none()).count() as u64,
        cache_hits: hits,
        cache_misses: records.len() as u64 - hits,
        evaluator_wall_time_ms: records.iter().map(|r| r.wall_time_ms).sum(),
        t_max: None,
        run_wall_time_s: None,
    }
}

fn render_summary(s: &Summary, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string(s).expect("summary serializes")),
        Format::Text => {
            writeln!(out, "episodes: {}", s.episodes)?;
            match &s.best {
                Some(b) => {
                    writeln!(out, "best objective: {} (episode {})", b.objective, b.episode)?;
                    writeln!(out, "best mae: {}  inference time: {}", b.mae, b.inference_time)?;
                    writeln!(out, "best code: {}", b.code)?;
                }
                None => writeln!(out, "best: none")?,
            }
            if let Some(g) = &s.greedy_code {
                writeln!(out, "greedy code: {g}")?;
            }
            writeln!(out, "feasible episodes: {}  failed: {}", s.feasible_episodes, s.failed_episodes)?;
            writeln!(out, "cache hits: {}  misses: {}", s.cache_hits, s.cache_misses)
        }
    }
}

fn io_fail(e: std::io::Error) -> Failure {
    fail(EXIT_CONFIG, e)
}

pub fn cmd_search(args: &SearchArgs, format: Format, out: &mut dyn Write) -> CmdResult {
    let started = Instant::now();
    let mut cfg = RunConfig::load(&args.config).map_err(|e| fail(EXIT_CONFIG, e))?;
    if let Some(s) = args.seed {
        cfg.qlearning.rng_seed = s;
    }
    if let Some(e) = args.episodes {
        cfg.qlearning.episodes = e;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    let qcfg = cfg.qlearning.resolve();
    qcfg.validate().map_err(|e| fail(EXIT_CONFIG, e))?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(|e| fail(EXIT_CONFIG, e))?;

    let mut inner = build_evaluator(&cfg)?;
    let ocfg = resolve_objective(&cfg, inner.as_mut())?;
    let mut evaluator = Cached::new(inner);
    let mut search = Search::new(cfg.catalog.clone(), qcfg.clone(), ocfg).map_err(|e| fail(EXIT_CONFIG, e))?;

    let log_path = dir.join(EPISODES_FILE);
    let mut prior: Vec<EpisodeRecord<f64>> = Vec::new();
    if args.resume {
        let cp = read_checkpoint(&dir.join(QTABLE_FILE)).map_err(|e| fail(EXIT_CONFIG, e))?;
        let meta = &cp.meta;
        if meta.rng_state_seed != qcfg.rng_seed || meta.alpha != qcfg.alpha || meta.gamma != qcfg.gamma {
            return Err(fail(EXIT_CONFIG, anyhow::anyhow!("checkpoint was written under a different seed, alpha or gamma")));
        }
        let table = QTable::from_checkpoint(&cp).map_err(|e| fail(EXIT_CONFIG, e))?;
        let mut records = read_episodes(&log_path).map_err(|e| fail(EXIT_CONFIG, e))?;
        if (records.len() as u64) < meta.episode {
            return Err(fail(
                EXIT_CONFIG,
                anyhow::anyhow!("episode log has {} records, checkpoint expects {}", records.len(), meta.episode),
            ));
        }
        records.truncate(meta.episode as usize);
        for r in &records {
            if r.mae.is_some() {
                evaluator.preload(&r.code, r.result());
            }
        }
        let best = summarize(&records).best;
        search = search.resume(table, meta.episode, best);
        prior = records;
    }

    // Rewrite the retained prefix so the log matches the checkpoint exactly.
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&log_path)
        .map_err(io_fail)?;
    let mut log = BufWriter::new(file);
    for r in &prior {
        serde_json::to_writer(&mut log, r).map_err(|e| fail(EXIT_CONFIG, e))?;
        log.write_all(b"\n").map_err(io_fail)?;
    }
    log.flush().map_err(io_fail)?;

    let mut records = prior;
    let alpha = qcfg.alpha;
    let gamma = qcfg.gamma;
    let seed = qcfg.rng_seed;
    let stop = args.stop_after.unwrap_or(u64::MAX);
    let run_result = {
        let dir = dir.clone();
        let records = &mut records;
        let log = &mut log;
        let mut sink = move |r: &EpisodeRecord<f64>, t: &QTable<f64>| -> Result<(), String> {
            serde_json::to_writer(&mut *log, r).map_err(|e| e.to_string())?;
            log.write_all(b"\n").map_err(|e| e.to_string())?;
            records.push(r.clone());
            let done = r.episode + 1;
            if done.is_multiple_of(CHECKPOINT_EVERY) {
                log.flush().map_err(|e| e.to_string())?;
                let cp = t.checkpoint(CheckpointMeta { episode: done, rng_state_seed: seed, alpha, gamma });
                write_checkpoint(&dir, &cp).map_err(|e| e.to_string())?;
            }
            Ok(())
        };
        search.run_until(stop, &mut evaluator, &mut sink)
    };
    log.flush().map_err(io_fail)?;
    drop(log);

    match run_result {
        Ok(()) => {}
        Err(SearchError::EvaluatorUnavailable { episode, source }) => {
            write_checkpoint(&dir, &search.checkpoint()).map_err(io_fail)?;
            return Err(fail(
                EXIT_EVALUATOR,
                anyhow::anyhow!("evaluator failed at episode {episode}: {source}; checkpoint kept in {}", dir.display()),
            ));
        }
        Err(e) => return Err(fail(EXIT_CONFIG, e)),
    }
    if !search.is_done() {
        return Ok(EXIT_OK);
    }

    write_checkpoint(&dir, &search.checkpoint()).map_err(io_fail)?;
    let outcome = search.outcome().map_err(|e| fail(EXIT_CONFIG, e))?;
    let mut summary = summarize(&records);
    summary.greedy_code = Some(outcome.greedy);
    summary.t_max = Some(ocfg.t_max);
    summary.run_wall_time_s = Some(started.elapsed().as_secs_f64());
    if let Some(best) = &summary.best {
        let g = graph::build_graph(&best.code, &cfg.catalog, cfg.signature).map_err(|e| fail(EXIT_CONFIG, e))?;
        write_atomic(&dir.join(BEST_GRAPH_FILE), &graph::to_json(&g)).map_err(io_fail)?;
        write_atomic(&dir.join(BEST_CODE_FILE), format!("{}\n", best.code).as_bytes()).map_err(io_fail)?;
    } else {
        for f in [BEST_GRAPH_FILE, BEST_CODE_FILE] {
            let _ = fs::remove_file(dir.join(f));
        }
    }
    let bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    write_atomic(&dir.join(SUMMARY_FILE), &bytes).map_err(io_fail)?;
    render_summary(&summary, format, out).map_err(io_fail)?;
    Ok(EXIT_OK)
}

pub fn cmd_replay(log_path: &Path, config: Option<&Path>, format: Format, out: &mut dyn Write) -> CmdResult {
    let records = read_episodes(log_path).map_err(|e| fail(EXIT_CONFIG, e))?;
    let mut summary = summarize(&records);
    if let Some(cfg_path) = config {
        let cfg = RunConfig::load(cfg_path).map_err(|e| fail(EXIT_CONFIG, e))?;
        let qpath = log_path.parent().unwrap_or(Path::new(".")).join(QTABLE_FILE);
        if qpath.exists() {
            let cp = read_checkpoint(&qpath).map_err(|e| fail(EXIT_CONFIG, e))?;
            let table = QTable::from_checkpoint(&cp).map_err(|e| fail(EXIT_CONFIG, e))?;
            summary.greedy_code =
                Some(greedy_rollout(&table, &cfg.catalog).map_err(|e| fail(EXIT_CONFIG, e))?);
        }
    }
    render_summary(&summary, format, out).map_err(io_fail)?;
    Ok(EXIT_OK)
}

