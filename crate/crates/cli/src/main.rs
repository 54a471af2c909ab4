use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ihs_core::analysis::{
    bias_probe, confident_errors, format_probe_table, probe_samples, ErrorDirection, DEFAULT_ERROR_K,
    DEFAULT_TARGETS, DEFAULT_TEMPLATE,
};
use ihs_core::config::{HyperOverrides, IngestConfig, RunConfig};
use ihs_core::dataset::{
    ingest, make_splits, read_samples_jsonl, read_splits, splits_from_samples, write_samples_jsonl, write_splits,
    Dataset, IngestOptions, Split, SplitRatios,
};
use ihs_core::embedding::{read_cache, Role, RoleStores};
use ihs_core::io::{sha256_file, write_bytes_atomic, write_json_atomic};
use ihs_core::parallel::Exec;
use ihs_core::pipeline;
use ihs_core::train::{cross_evaluate, evaluate, format_table, load_checkpoint, RunReport, TrainedRun};
use ihs_core::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ihs", version, about = "Train and evaluate hate-speech classifiers over cached embeddings")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Run every loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw corpus into canonical JSONL plus a split file.
    Ingest(IngestArgs),
    /// Train one seed and evaluate it on the test split.
    Train(TrainArgs),
    /// Score a checkpoint on a split of its own dataset.
    Eval(EvalArgs),
    /// Score a checkpoint on another corpus.
    CrossEval(CrossEvalArgs),
    /// Train every configured seed and aggregate the test metrics.
    MultiSeed(MultiSeedArgs),
    /// Print run reports as tables.
    Report(ReportArgs),
    /// List the most confident misclassifications.
    AnalyzeErrors(AnalyzeArgs),
    /// Export probe statements, or score them once embedded.
    ProbeBias(ProbeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    dataset: Dataset,
    #[arg(long)]
    input: PathBuf,
    /// Canonical samples JSONL to write.
    #[arg(long)]
    output: PathBuf,
    /// Split file; defaults to `<output>.splits.json`.
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Train/validation/test ratios, e.g. `60,20,20` or `0.8,0.1,0.1`.
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long, default_value_t = ihs_core::config::DEFAULT_SPLIT_SEED)]
    seed: u64,
    #[arg(long)]
    stratify: bool,
    /// Keep the split column shipped with the corpus.
    #[arg(long)]
    use_source_splits: bool,
    /// Field delimiter; inferred from the extension when omitted.
    #[arg(long)]
    delimiter: Option<char>,
    /// JSON column map overriding the corpus defaults.
    #[arg(long)]
    columns: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    FinetuneHead,
    LinearProbe,
}

impl Profile {
    fn name(self) -> &'static str {
        match self {
            Profile::FinetuneHead => "finetune-head",
            Profile::LinearProbe => "linear-probe",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Hyperparameter profile, overriding the config file.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Output directory; falls back to the config, then $IHS_OUTPUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Seed to train; defaults to the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MultiSeedArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Seeds trained concurrently (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CrossEvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Foreign samples JSONL.
    #[arg(long)]
    samples: PathBuf,
    /// Foreign caches as `role=path`, e.g. `tweet=toxigen.embc`.
    #[arg(long = "store", value_parser = parse_store, required = true)]
    stores: Vec<(Role, PathBuf)>,
    /// Restrict to one split of the foreign corpus instead of all of it.
    #[arg(long)]
    foreign_split: Option<Split>,
    /// Split file for `--foreign-split`.
    #[arg(long, requires = "foreign_split")]
    splits: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// One or more report.json files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    HateAsNotHate,
    NotHateAsHate,
    Both,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long, value_enum, default_value = "both")]
    direction: Direction,
    #[arg(short, long, default_value_t = DEFAULT_ERROR_K)]
    k: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    /// Probe targets; defaults to the standard six.
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Write the probe statements as samples JSONL for embedding.
    #[arg(long, conflicts_with_all = ["checkpoint", "store"])]
    export: Option<PathBuf>,
    #[arg(long, requires = "store")]
    checkpoint: Option<PathBuf>,
    /// Tweet cache holding the embedded probe statements.
    #[arg(long, requires = "checkpoint")]
    store: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_store(s: &str) -> std::result::Result<(Role, PathBuf), String> {
    let (role, path) = s.split_once('=').ok_or("expected role=path")?;
    let role = match role {
        "tweet" => Role::Tweet,
        "context" => Role::Context,
        "emotion" => Role::Emotion,
        other => return Err(format!("unknown role `{other}`")),
    };
    Ok((role, PathBuf::from(path)))
}

/// Writes `value` to `path` when given, else prints it.
fn emit(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_json_atomic(p, value),
        None => {
            println!("{value:#}");
            Ok(())
        }
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let columns = a
        .columns
        .as_deref()
        .map(|c| serde_json::from_str(c).map_err(|e| Error::Config(format!("--columns: {e}"))))
        .transpose()?
        .unwrap_or_default();
    let cfg = IngestConfig {
        dataset: a.dataset,
        input: a.input.clone(),
        options: IngestOptions {
            columns,
            delimiter: a.delimiter,
        },
        ratios: a.ratios.as_deref().map(SplitRatios::parse).transpose()?,
        split_seed: a.seed,
        stratify: a.stratify,
        use_source_splits: a.use_source_splits,
    };
    let set = ingest(cfg.dataset, &cfg.input, &cfg.options)?;
    let splits = if cfg.use_source_splits {
        splits_from_samples(&set)?
    } else {
        make_splits(&set, cfg.ratios.unwrap_or(cfg.dataset.default_ratios()), cfg.split_seed, cfg.stratify)?
    };
    let set = set.with_splits(&splits);
    let split_path = a.splits.unwrap_or_else(|| a.output.with_extension("splits.json"));
    write_samples_jsonl(set.samples(), &a.output)?;
    write_splits(&splits, &split_path)?;
    let manifest = json!({
        "ingest": cfg,
        "source_sha256": sha256_file(&a.input)?,
        "samples_sha256": sha256_file(&a.output)?,
        "splits_sha256": sha256_file(&split_path)?,
        "counts": set.counts(),
        "split_sizes": [splits.train.len(), splits.validation.len(), splits.test.len()],
    });
    write_json_atomic(&a.output.with_extension("manifest.json"), &manifest)?;
    println!("{}", serde_json::to_string(&manifest).unwrap_or_default());
    Ok(())
}

fn load_config(r: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&r.config)?;
    if let Some(p) = r.profile {
        cfg.profile = p.name().into();
    }
    cfg.hyper.merge(&HyperOverrides {
        epochs: r.epochs,
        batch_size: r.batch_size,
        learning_rate: r.learning_rate,
        weight_decay: r.weight_decay,
        ..Default::default()
    });
    if let Some(out) = &r.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn cmd_train(a: TrainArgs, exec: Exec) -> Result<()> {
    let mut cfg = load_config(&a.run)?;
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
    }
    cfg.seeds.truncate(1);
    let out = cfg.output_dir();
    let inputs = pipeline::load_inputs(&cfg)?;
    let resolved = pipeline::resolve(&cfg, &inputs)?;
    let result = pipeline::train_seed(&resolved, &inputs, cfg.seeds[0], exec)?;
    pipeline::write_outputs(&out, &resolved, std::slice::from_ref(&result), None)?;
    println!(
        "{}",
        json!({
            "seed": result.run.seed,
            "best_epoch": result.run.best_epoch,
            "checkpoint": pipeline::seed_dir(&out, result.run.seed),
            "test": result.test,
        })
    );
    Ok(())
}

fn cmd_multi_seed(a: MultiSeedArgs, exec: Exec) -> Result<()> {
    let mut cfg = load_config(&a.run)?;
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
    }
    let out = cfg.output_dir();
    let inputs = pipeline::load_inputs(&cfg)?;
    let resolved = pipeline::resolve(&cfg, &inputs)?;
    let (results, report) = pipeline::run_seeds(&resolved, &inputs, a.jobs, exec)?;
    pipeline::write_outputs(&out, &resolved, &results, Some(&report))?;
    print!("{}", format_table(&format!("{:?}", resolved.config.model.kind), &report.mean, &report.std));
    Ok(())
}

/// Checkpoint plus the inputs named by its run config.
fn checkpoint_inputs(checkpoint: &Path, config: &Path) -> Result<(TrainedRun, pipeline::Inputs)> {
    let run = load_checkpoint(checkpoint)?;
    let mut cfg = RunConfig::load(config)?;
    cfg.model.kind = run.spec().kind;
    let inputs = pipeline::load_inputs(&cfg)?;
    ihs_core::train::check_store_compat(&run, &inputs.stores)?;
    Ok((run, inputs))
}

fn cmd_eval(a: EvalArgs, exec: Exec) -> Result<()> {
    let (run, inputs) = checkpoint_inputs(&a.checkpoint, &a.config)?;
    let metrics = evaluate(&run, inputs.splits.ids(a.split), &inputs.samples, &inputs.stores, exec)?;
    emit(
        &json!({ "checkpoint": a.checkpoint, "split": a.split, "inputs": inputs.digests, "metrics": metrics }),
        a.output.as_deref(),
    )
}

fn cmd_cross_eval(a: CrossEvalArgs, exec: Exec) -> Result<()> {
    let run = load_checkpoint(&a.checkpoint)?;
    let samples = read_samples_jsonl(&a.samples)?;
    let paths: BTreeMap<Role, PathBuf> = a.stores.iter().cloned().collect();
    let stores = RoleStores::load(&paths)?;
    let splits = match (a.foreign_split, &a.splits) {
        (Some(_), Some(p)) => Some(read_splits(p)?),
        (Some(_), None) => return Err(Error::Config("--foreign-split needs --splits".into())),
        _ => None,
    };
    let result = cross_evaluate(&run, &samples, &stores, splits.as_ref().zip(a.foreign_split), exec)?;
    let store_digests: BTreeMap<Role, String> =
        paths.iter().map(|(r, p)| sha256_file(p).map(|d| (*r, d))).collect::<Result<_>>()?;
    emit(
        &json!({
            "checkpoint": a.checkpoint,
            "samples_sha256": sha256_file(&a.samples)?,
            "store_files_sha256": store_digests,
            "result": result,
        }),
        a.output.as_deref(),
    )
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    for path in &a.reports {
        let report: RunReport = ihs_core::io::read_json(path)?;
        let kind = report
            .config
            .pointer("/config/model/kind")
            .and_then(|k| k.as_str())
            .unwrap_or("run")
            .to_string();
        print!("{}", format_table(&format!("{kind} ({})", path.display()), &report.mean, &report.std));
        println!("seeds: {:?}\n", report.seeds);
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs, exec: Exec) -> Result<()> {
    let (run, inputs) = checkpoint_inputs(&a.checkpoint, &a.config)?;
    let directions: &[ErrorDirection] = match a.direction {
        Direction::HateAsNotHate => &[ErrorDirection::HateAsNotHate],
        Direction::NotHateAsHate => &[ErrorDirection::NotHateAsHate],
        Direction::Both => &[ErrorDirection::HateAsNotHate, ErrorDirection::NotHateAsHate],
    };
    let ids = inputs.splits.ids(a.split);
    let mut out = serde_json::Map::new();
    for &d in directions {
        let errors = confident_errors(&run, &inputs.samples, ids, &inputs.stores, d, a.k, exec)?;
        let key = serde_json::to_value(d).map_err(|e| Error::Validation(e.to_string()))?;
        out.insert(key.as_str().unwrap_or_default().to_string(), serde_json::to_value(errors).unwrap_or_default());
    }
    emit(
        &json!({ "checkpoint": a.checkpoint, "split": a.split, "k": a.k, "errors": out }),
        a.output.as_deref(),
    )
}

fn cmd_probe(a: ProbeArgs, exec: Exec) -> Result<()> {
    let targets: Vec<String> = if a.targets.is_empty() {
        DEFAULT_TARGETS.iter().map(|t| t.to_string()).collect()
    } else {
        a.targets
    };
    if let Some(path) = a.export {
        let set = probe_samples(&a.template, &targets)?;
        write_samples_jsonl(set.samples(), &path)?;
        println!("{}", json!({ "exported": set.len(), "path": path }));
        return Ok(());
    }
    let (Some(checkpoint), Some(store)) = (a.checkpoint, a.store) else {
        return Err(Error::Config("probe-bias needs --export, or --checkpoint with --store".into()));
    };
    let run = load_checkpoint(&checkpoint)?;
    let stores = RoleStores::tweet_only(read_cache(&store)?);
    let result = bias_probe(&run, &a.template, &targets, &stores, exec)?;
    match a.output {
        Some(p) => {
            write_json_atomic(&p, &result)?;
            write_bytes_atomic(&p.with_extension("txt"), format_probe_table(&result).as_bytes())
        }
        None => {
            print!("{}", format_probe_table(&result));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a, exec),
        Command::Eval(a) => cmd_eval(a, exec),
        Command::CrossEval(a) => cmd_cross_eval(a, exec),
        Command::MultiSeed(a) => cmd_multi_seed(a, exec),
        Command::Report(a) => cmd_report(a),
        Command::AnalyzeErrors(a) => cmd_analyze(a, exec),
        Command::ProbeBias(a) => cmd_probe(a, exec),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
