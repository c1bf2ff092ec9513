//! `metacrisp` command-line front end.

mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metacrisp::cycle::{run_experiment_traced, CycleConfig, ExperimentReport};
use metacrisp::introspection::{collect_report, featurise, Dataset, DatasetMeta, LabelRule, MetadataProvider};
use metacrisp::mining::{mine_itemsets, mine_rules, mine_tree, MetaModel, MiningConfig, ModelPayload};
use metacrisp::policy::{compile_policy, filter_association_rules, tree_to_rules, ControlAttribute};
use metacrisp::world::{read_traces_csv, run_batch, write_traces_csv, GridWorld, RoverParams};
use metacrisp::{Policy, Schema};

use error::{CliError, CliResult};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown subcommand, bad or missing flags)
  3  input-format error (missing, unreadable or malformed file)
  4  schema/consistency error (values, attributes or models that do not fit together)
  5  internal error";

#[derive(Parser)]
#[command(name = "metacrisp", version, about = "Closed-loop metacognitive control experiments", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random rover world definition.
    #[command(after_help = EXIT_CODES)]
    World(WorldArgs),
    /// Write the attribute schema of a world.
    #[command(after_help = EXIT_CODES)]
    Schema(SchemaArgs),
    /// Run episodes of a policy in a world and write the traces CSV.
    #[command(after_help = EXIT_CODES)]
    Simulate(SimulateArgs),
    /// Turn a traces CSV into an introspective-report dataset CSV.
    #[command(after_help = EXIT_CODES)]
    Collect(CollectArgs),
    /// Mine a decision tree, association rules or frequent item-sets.
    #[command(after_help = EXIT_CODES)]
    Mine(MineArgs),
    /// Compile a tree or rule model into a policy file.
    #[command(after_help = EXIT_CODES)]
    Compile(CompileArgs),
    /// Run a full multi-cycle experiment.
    #[command(after_help = EXIT_CODES)]
    Cycle(CycleArgs),
    /// Write the per-cycle CSV of an experiment report.
    #[command(after_help = EXIT_CODES)]
    Report(ReportArgs),
}

#[derive(Args)]
struct WorldArgs {
    /// Master seed for the terrain layout.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    width: u32,
    #[arg(long, default_value_t = 8)]
    height: u32,
    /// Episode step budget [default: 2 * (width + height - 2)].
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SchemaArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    world: PathBuf,
    /// Policy file [default: the built-in default policy].
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Master seed; episode seeds are derived from it.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Per-decision probability of a random strategy.
    #[arg(long, default_value_t = 0.0)]
    exploration: f64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for the episode batch.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Label {
    OutcomeAsClass,
    StrategyAsClass,
}

#[derive(Args)]
struct CollectArgs {
    /// World whose schema the traces follow.
    #[arg(long, conflicts_with = "schema", required_unless_present = "schema")]
    world: Option<PathBuf>,
    /// Schema file, instead of --world.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    traces: PathBuf,
    /// Comma-separated report attributes.
    #[arg(long, value_delimiter = ',', required = true)]
    attributes: Vec<String>,
    #[arg(long, value_enum, default_value = "outcome-as-class")]
    label: Label,
    /// Equal-width bins for numeric attributes.
    #[arg(long, default_value_t = 3)]
    bins: usize,
    /// Dataset CSV; the sidecar goes to <out>.meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Tree,
    Apriori,
    Rules,
}

#[derive(Args)]
struct MineArgs {
    /// Dataset CSV; <data>.meta.json is used when present.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "tree")]
    algo: Algo,
    /// Mining config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf_instances: Option<usize>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Cross-validation seed [default: the config's seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Model identifier [default: file stem of --out].
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    model: PathBuf,
    /// Check the model's class against this world's control attribute.
    #[arg(long, conflicts_with = "schema")]
    world: Option<PathBuf>,
    /// Check the model's class against this schema's control attribute.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Fallback action [default: first control value].
    #[arg(long)]
    default_action: Option<String>,
    /// Minimum confidence for association rules [default: the model's].
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CycleArgs {
    /// Cycle config file (missing fields take defaults).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// World file [default: a rover world generated from the seed].
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    cycles: u32,
    /// Worker threads for episode batches.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment report written by `cycle`.
    #[arg(long)]
    experiment: PathBuf,
    /// Per-cycle CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = std::panic::catch_unwind(|| run(cli)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| (*s).to_owned())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("metacrisp: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::World(a) => world(a),
        Command::Schema(a) => schema(a),
        Command::Simulate(a) => simulate(a),
        Command::Collect(a) => collect(a),
        Command::Mine(a) => mine(a),
        Command::Compile(a) => compile(a),
        Command::Cycle(a) => cycle(a),
        Command::Report(a) => report(a),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Attaches the offending file to a library error.
fn at<T>(path: &Path, r: metacrisp::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from(e).context(path))
}

fn load_world(path: &Path) -> CliResult<GridWorld> {
    at(path, GridWorld::from_json(&read(path)?))
}

fn load_schema(world: Option<&Path>, schema: Option<&Path>) -> CliResult<Schema> {
    match (world, schema) {
        (Some(w), _) => Ok(load_world(w)?.schema()),
        (None, Some(s)) => at(s, Schema::from_json(&read(s)?)),
        (None, None) => Err(CliError::Usage("one of --world or --schema is required".into())),
    }
}

fn thread_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn world(a: WorldArgs) -> CliResult<()> {
    let params = RoverParams {
        width: a.width,
        height: a.height,
        max_steps: a.max_steps.unwrap_or(2 * (a.width + a.height).saturating_sub(2)),
        ..RoverParams::default()
    };
    let w = GridWorld::generate(&params, a.seed)?;
    write(&a.out, w.to_json())
}

fn schema(a: SchemaArgs) -> CliResult<()> {
    write(&a.out, load_world(&a.world)?.schema().to_json())
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.exploration) {
        return Err(CliError::Usage("--exploration must lie in [0, 1]".into()));
    }
    let w = load_world(&a.world)?;
    let schema = w.schema();
    let policy = match &a.policy {
        Some(p) => at(p, Policy::from_json(&read(p)?))?,
        None => Policy::default_for(&schema),
    };
    let control = ControlAttribute::from_schema(&schema);
    if policy.control != control {
        return Err(CliError::Consistency(format!(
            "policy controls `{}`, world expects `{}` with values {:?}",
            policy.control.name, control.name, control.values
        )));
    }
    let seeds: Vec<u64> = (0..a.episodes as u64)
        .map(|i| metacrisp::seed::derive(a.seed, metacrisp::seed::FRESH, &[i]))
        .collect();
    let traces = thread_pool(a.threads)?.install(|| run_batch(&w, &policy, &seeds, a.exploration))?;
    let mut buf = Vec::new();
    write_traces_csv(&schema, &traces, &mut buf)?;
    write(&a.out, buf)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn collect(a: CollectArgs) -> CliResult<()> {
    let schema = Arc::new(load_schema(a.world.as_deref(), a.schema.as_deref())?);
    let traces = at(&a.traces, read_traces_csv(&schema, read(&a.traces)?.as_bytes()))?;
    let rule = match a.label {
        Label::OutcomeAsClass => LabelRule::OutcomeAsClass,
        Label::StrategyAsClass => LabelRule::StrategyAsClass,
    };
    let provider = MetadataProvider::new(a.attributes, rule);
    let reports = traces
        .iter()
        .map(|t| collect_report(t, &provider, &schema))
        .collect::<metacrisp::Result<Vec<_>>>()?;
    let ds = featurise(&reports, a.bins)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    write(&a.out, buf)?;
    write(&sidecar(&a.out), metacrisp::to_canonical_json(&ds.meta()))
}

fn override_with<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn mine(a: MineArgs) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => at(p, serde_json::from_str::<MiningConfig>(&read(p)?).map_err(metacrisp::Error::from))?,
        None => MiningConfig::default(),
    };
    override_with(&mut cfg.max_depth, a.max_depth);
    override_with(&mut cfg.min_leaf_instances, a.min_leaf_instances);
    override_with(&mut cfg.min_support, a.min_support);
    override_with(&mut cfg.min_confidence, a.min_confidence);
    override_with(&mut cfg.cv_folds, a.cv_folds);
    override_with(&mut cfg.seed, a.seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let meta_path = sidecar(&a.data);
    let meta = if meta_path.exists() {
        let text = read(&meta_path)?;
        Some(at(&meta_path, serde_json::from_str::<DatasetMeta>(&text).map_err(metacrisp::Error::from))?)
    } else {
        None
    };
    let ds = at(&a.data, Dataset::read_csv(read(&a.data)?.as_bytes(), meta.as_ref()))?;
    let id = a.id.unwrap_or_else(|| {
        a.out
            .file_stem()
            .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
    });
    let model = match a.algo {
        Algo::Tree => mine_tree(&ds, &cfg, id)?,
        Algo::Rules => mine_rules(&ds, &cfg, id)?,
        Algo::Apriori => mine_itemsets(&ds, &cfg, id)?,
    };
    write(&a.out, model.to_json())
}

fn compile(a: CompileArgs) -> CliResult<()> {
    let model = at(&a.model, MetaModel::from_json(&read(&a.model)?))?;
    let control = ControlAttribute {
        name: model.class_attribute.clone(),
        values: model.class_values.clone(),
    };
    if a.world.is_some() || a.schema.is_some() {
        let expected = ControlAttribute::from_schema(&load_schema(a.world.as_deref(), a.schema.as_deref())?);
        if expected != control {
            return Err(CliError::Consistency(format!(
                "model predicts `{}` {:?}, the schema's control attribute is `{}` {:?}",
                control.name, control.values, expected.name, expected.values
            )));
        }
    }
    let min_conf = a.min_confidence.unwrap_or(model.evaluation.config.min_confidence);
    let ruleset = match &model.payload {
        ModelPayload::Tree(t) => tree_to_rules(t, &control)?,
        ModelPayload::Rules(rules) => {
            let defs = vec![metacrisp::AttributeDef::new(
                control.name.clone(),
                metacrisp::Scope::Modeller,
                metacrisp::Domain::categorical(control.values.clone()),
            )];
            let schema = metacrisp::define_schema(defs, &control.name)?;
            filter_association_rules(rules, &schema, min_conf, &model.binnings)
        }
        ModelPayload::Itemsets(_) => {
            return Err(CliError::Consistency("item-set models carry no rules to compile".into()));
        }
    };
    let default = a.default_action.unwrap_or_else(|| control.values[0].clone());
    let mut policy = compile_policy(ruleset, &control, &default)?;
    policy.provenance.sources = vec![model.id.clone()];
    write(&a.out, policy.to_json())
}

fn cycle(a: CycleArgs) -> CliResult<()> {
    let mut cfg = at(&a.config, CycleConfig::from_json(&read(&a.config)?))?;
    cfg.master_seed = a.seed;
    let w = match &a.world {
        Some(p) => load_world(p)?,
        None => GridWorld::generate(&RoverParams::default(), a.seed)?,
    };
    let schema = w.schema();
    let traces_dir = a.out.join("traces");
    let report = thread_pool(a.threads)?.install(|| {
        run_experiment_traced(&w, &cfg, a.cycles, |index, traces| {
            let mut buf = Vec::new();
            write_traces_csv(&schema, traces, &mut buf)?;
            write(&traces_dir.join(format!("cycle-{index}.csv")), buf)
                .map_err(|e| metacrisp::Error::Parse(e.to_string()))
        })
    })?;
    write(&a.out.join("world.json"), w.to_json())?;
    write(&a.out.join("experiment.json"), report.to_json())?;
    write(&a.out.join("policy.json"), report.final_policy.to_json())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&a.out.join("cycles.csv"), csv)
}

fn report(a: ReportArgs) -> CliResult<()> {
    let r = at(&a.experiment, ExperimentReport::from_json(&read(&a.experiment)?))?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    match &a.out {
        Some(p) => write(p, csv),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&csv)
                .map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}
