mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Settings;
use manifest::ManifestBuilder;
use privleak_core::data::{
    generate_synthetic, load_dataset, save_dataset, Dataset, SignalStrengths, SyntheticSpec, Task,
};
use privleak_core::experiments::{
    deviation_csv, embedding_deviation, markdown_report, privatize_dataset, projection_csv, read_results_csv,
    result_rows, results_csv, run_experiment, sweep_attacker_topology, sweep_csv, sweep_lambda_epsilon,
    DeviationMechanism, DeviationReport, DeviationRow, ExperimentPlan, PrivacyModel, DEFAULT_DEPTHS,
    DEFAULT_EPSILONS, DEFAULT_LAMBDAS, DEFAULT_WIDTHS,
};
use privleak_core::mechanisms::{PrivacyParams, Vocabulary};
use privleak_core::neural::TrainConfig;
use privleak_core::rng::DEFAULT_SEED;
use privleak_core::RandomSource;

#[derive(Parser)]
#[command(name = "privleak", version, about = "Privacy mechanisms for text embeddings and attacker evaluation")]
struct Cli {
    /// Plain-text `key = value` file; command-line flags take precedence.
    #[arg(long, global = true, env = "PRIVLEAK_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed (default 0x5EED2021).
    #[arg(long, global = true, env = "PRIVLEAK_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, env = "PRIVLEAK_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-signal synthetic dataset and its vocabulary.
    GenData(GenDataArgs),
    /// Apply LDP or MDP to a dataset file and write the privatized copy.
    Privatize(PrivatizeArgs),
    /// Train one or more privacy models and attack their representations.
    Run(RunArgs),
    /// λ × ε or attacker-topology grid.
    Sweep(SweepArgs),
    /// Distances between original and privatized embeddings.
    Deviation(DeviationArgs),
    /// Markdown summary of existing result CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of records.
    #[arg(long, env = "PRIVLEAK_N", value_parser = clap::value_parser!(u64).range(1..))]
    n: Option<u64>,
    #[arg(long, env = "PRIVLEAK_DIM", value_parser = clap::value_parser!(u64).range(1..))]
    dim: Option<u64>,
    #[arg(long)]
    rating_signal: Option<f64>,
    #[arg(long)]
    gender_signal: Option<f64>,
    #[arg(long)]
    country_signal: Option<f64>,
    #[arg(long)]
    age_signal: Option<f64>,
    #[arg(long)]
    words_per_profile: Option<usize>,
    #[arg(long)]
    tokens_per_record: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file (JSON lines).
    #[arg(long, env = "PRIVLEAK_DATA")]
    data: PathBuf,
    /// Vocabulary file; required by MDP.
    #[arg(long, env = "PRIVLEAK_VOCAB")]
    vocab: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismName {
    Ldp,
    Mdp,
}

#[derive(Args)]
struct PrivatizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    mechanism: MechanismName,
    #[arg(long, env = "PRIVLEAK_EPSILON")]
    epsilon: Option<f64>,
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Output dataset path (default `<out-dir>/privatized.jsonl`).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_model(s: &str) -> std::result::Result<PrivacyModel, String> {
    s.parse().map_err(|e: privleak_core::Error| e.to_string())
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: privleak_core::Error| e.to_string())
}

#[derive(Args)]
struct PlanArgs {
    /// Privacy model(s): baseline, gr, cgt, ldp, mdp, cape.
    #[arg(long, value_delimiter = ',', value_parser = parse_model, env = "PRIVLEAK_MODEL")]
    model: Option<Vec<PrivacyModel>>,
    /// Privacy budget (default 0.1, or 20 for mdp).
    #[arg(long, env = "PRIVLEAK_EPSILON")]
    epsilon: Option<f64>,
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Adversarial weight.
    #[arg(long, env = "PRIVLEAK_LAMBDA")]
    lambda: Option<f64>,
    /// Cross-gradient loss mix.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cgt_step: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, env = "PRIVLEAK_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Number of seeds derived from `--seed`.
    #[arg(long, env = "PRIVLEAK_SEEDS")]
    seeds: Option<usize>,
    #[arg(long)]
    attacker_depth: Option<usize>,
    #[arg(long)]
    attacker_width: Option<usize>,
    /// Private attribute the adversary trains against.
    #[arg(long, value_parser = parse_task)]
    target: Option<Task>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    LambdaEpsilon,
    Topology,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, value_enum)]
    grid: Grid,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// Parallel sweep cells.
    #[arg(long, env = "PRIVLEAK_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct DeviationArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',')]
    mechanisms: Option<Vec<MechanismName>>,
    #[arg(long)]
    epsilon_ldp: Option<f64>,
    #[arg(long)]
    epsilon_mdp: Option<f64>,
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Use only the first N records.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// `results.csv` files to merge.
    #[arg(long, value_delimiter = ',')]
    results: Vec<PathBuf>,
    #[arg(long)]
    deviation: Option<PathBuf>,
}

impl MechanismName {
    fn name(self) -> &'static str {
        match self {
            MechanismName::Ldp => "ldp",
            MechanismName::Mdp => "mdp",
        }
    }
}

impl std::str::FromStr for MechanismName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl serde::Serialize for MechanismName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

struct Ctx {
    settings: Settings,
    seed: u64,
    out_dir: PathBuf,
    manifest: ManifestBuilder,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn finish(self) -> Result<()> {
        let path = self
            .manifest
            .write(&self.out_dir, self.seed, self.settings.resolved(), &self.outputs)?;
        for p in self.outputs.iter().chain([&path]) {
            println!("wrote {}", p.display());
        }
        Ok(())
    }

    fn load_data(&mut self, args: &DataArgs) -> Result<(Dataset, Option<Vocabulary>)> {
        let dataset = load_dataset(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
        self.manifest.input(&args.data);
        self.settings.note("data", &args.data)?;
        let vocab = match &args.vocab {
            Some(p) => {
                let v = Vocabulary::load(p).with_context(|| format!("loading {}", p.display()))?;
                self.manifest.input(p);
                self.settings.note("vocab", p)?;
                Some(v)
            }
            None => None,
        };
        Ok((dataset, vocab))
    }
}

fn dataset_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Resolves one plan per requested model.
fn resolve_plans(s: &mut Settings, a: &PlanArgs, seed: u64, default_model: PrivacyModel) -> Result<Vec<ExperimentPlan>> {
    let models = s.get_list("model", a.model.clone(), vec![default_model])?;
    let d = TrainConfig::default();
    let epsilon = s.get_opt("epsilon", a.epsilon)?;
    let sensitivity = s.get("sensitivity", a.sensitivity, 1.0)?;
    let train = TrainConfig {
        lambda: s.get("lambda", a.lambda, d.lambda)?,
        alpha: s.get("alpha", a.alpha, d.alpha)?,
        cgt_step: s.get("cgt-step", a.cgt_step, d.cgt_step)?,
        learning_rate: s.get("learning-rate", a.learning_rate, d.learning_rate)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        seed,
    };
    let seeds = s.get("seeds", a.seeds, 1usize)?;
    let depth = s.get("attacker-depth", a.attacker_depth, 1usize)?;
    let width = s.get("attacker-width", a.attacker_width, 200usize)?;
    let target = s.get("target", a.target, Task::Gender)?;
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    Ok(models
        .into_iter()
        .map(|model| {
            let mut plan = ExperimentPlan::new(model).with_seeds(seed, seeds);
            plan.privacy = PrivacyParams {
                epsilon: epsilon.unwrap_or(model.default_epsilon()),
                sensitivity,
            };
            plan.train = train;
            plan.attacker.depth = depth;
            plan.attacker.width = width;
            plan.target = target;
            plan
        })
        .collect())
}

fn cmd_gen_data(ctx: &mut Ctx, a: &GenDataArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let d = SyntheticSpec::default();
    let ds = d.signals;
    let spec = SyntheticSpec {
        records: s.get("n", a.n, d.records as u64)? as usize,
        dim: s.get("dim", a.dim, d.dim as u64)? as usize,
        signals: SignalStrengths {
            rating: s.get("rating-signal", a.rating_signal, ds.rating)?,
            gender: s.get("gender-signal", a.gender_signal, ds.gender)?,
            country: s.get("country-signal", a.country_signal, ds.country)?,
            age: s.get("age-signal", a.age_signal, ds.age)?,
        },
        words_per_profile: s.get("words-per-profile", a.words_per_profile, d.words_per_profile)?,
        tokens_per_record: s.get("tokens-per-record", a.tokens_per_record, d.tokens_per_record)?,
        seed: ctx.seed,
    };
    s.note("spec", &spec)?;
    let data = generate_synthetic(&spec)?;
    let data_path = ctx.out_dir.join("data.jsonl");
    save_dataset(&data_path, &data.records)?;
    ctx.outputs.push(data_path);
    let vocab_path = ctx.out_dir.join("vocab.txt");
    data.vocabulary.save(&vocab_path)?;
    ctx.outputs.push(vocab_path);
    Ok(())
}

fn cmd_privatize(ctx: &mut Ctx, a: &PrivatizeArgs) -> Result<()> {
    let (dataset, vocab) = ctx.load_data(&a.data)?;
    let s = &mut ctx.settings;
    s.note("mechanism", a.mechanism)?;
    let mechanism = match a.mechanism {
        MechanismName::Ldp => DeviationMechanism::Ldp(PrivacyParams::with_sensitivity(
            s.get("epsilon", a.epsilon, 0.1)?,
            s.get("sensitivity", a.sensitivity, 1.0)?,
        )?),
        MechanismName::Mdp => DeviationMechanism::Mdp {
            epsilon: s.get("epsilon", a.epsilon, 20.0)?,
        },
    };
    let out = privatize_dataset(&dataset, vocab.as_ref(), mechanism, &RandomSource::new(ctx.seed).derive("privatize"))?;
    let path = a.output.clone().unwrap_or_else(|| ctx.out_dir.join("privatized.jsonl"));
    save_dataset(&path, out.records())?;
    ctx.outputs.push(path);
    Ok(())
}

fn cmd_run(ctx: &mut Ctx, a: &RunArgs) -> Result<()> {
    let (dataset, vocab) = ctx.load_data(&a.data)?;
    let plans = resolve_plans(&mut ctx.settings, &a.plan, ctx.seed, PrivacyModel::Cape)?;
    let label = dataset_label(&a.data.data);
    let mut rows = Vec::new();
    for plan in &plans {
        let report = run_experiment(plan, &dataset, vocab.as_ref()).with_context(|| format!("model {}", plan.model))?;
        rows.extend(result_rows(&label, plan, &report));
    }
    ctx.write("results.csv", &results_csv(&rows)?)?;
    ctx.write("report.md", &markdown_report(&rows, &[], None))?;
    Ok(())
}

fn cmd_sweep(ctx: &mut Ctx, a: &SweepArgs) -> Result<()> {
    let (dataset, vocab) = ctx.load_data(&a.data)?;
    let mut plans = resolve_plans(&mut ctx.settings, &a.plan, ctx.seed, PrivacyModel::Cape)?;
    if plans.len() != 1 {
        bail!("sweep takes exactly one --model");
    }
    let plan = plans.remove(0);
    let s = &mut ctx.settings;
    let workers = s.get("workers", a.workers, 1usize)?;
    let label = dataset_label(&a.data.data);
    let (result, name) = match a.grid {
        Grid::LambdaEpsilon => {
            let lambdas = s.get_list("lambdas", a.lambdas.clone(), DEFAULT_LAMBDAS.to_vec())?;
            let epsilons = s.get_list("epsilons", a.epsilons.clone(), DEFAULT_EPSILONS.to_vec())?;
            let r = sweep_lambda_epsilon(&plan, &lambdas, &epsilons, &dataset, vocab.as_ref(), workers)?;
            (r, "sweep_lambda_epsilon.csv")
        }
        Grid::Topology => {
            let depths = s.get_list("depths", a.depths.clone(), DEFAULT_DEPTHS.to_vec())?;
            let widths = s.get_list("widths", a.widths.clone(), DEFAULT_WIDTHS.to_vec())?;
            let r = sweep_attacker_topology(&plan, &depths, &widths, &dataset, vocab.as_ref(), workers)?;
            (r, "sweep_topology.csv")
        }
    };
    ctx.write(name, &sweep_csv(&result, &label)?)?;
    ctx.write("report.md", &markdown_report(&[], &[&result], None))?;
    if result.failures() > 0 {
        eprintln!("warning: {} of {} cells failed; see {name}", result.failures(), result.cells.len());
    }
    Ok(())
}

fn cmd_deviation(ctx: &mut Ctx, a: &DeviationArgs) -> Result<()> {
    let (dataset, vocab) = ctx.load_data(&a.data)?;
    let s = &mut ctx.settings;
    let names = s.get_list("mechanisms", a.mechanisms.clone(), vec![MechanismName::Ldp, MechanismName::Mdp])?;
    let sensitivity = s.get("sensitivity", a.sensitivity, 1.0)?;
    let eps_ldp = s.get("epsilon-ldp", a.epsilon_ldp, 0.1)?;
    let eps_mdp = s.get("epsilon-mdp", a.epsilon_mdp, 20.0)?;
    let limit = s.get("limit", a.limit, dataset.len())?;
    let mechanisms = names
        .iter()
        .map(|m| {
            Ok(match m {
                MechanismName::Ldp => DeviationMechanism::Ldp(PrivacyParams::with_sensitivity(eps_ldp, sensitivity)?),
                MechanismName::Mdp => DeviationMechanism::Mdp { epsilon: eps_mdp },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slice = if limit < dataset.len() {
        Dataset::new(dataset.records()[..limit].to_vec())?
    } else {
        dataset
    };
    let report = embedding_deviation(&slice, vocab.as_ref(), &mechanisms, &RandomSource::new(ctx.seed).derive("deviation"))?;
    ctx.write("deviation.csv", &deviation_csv(&report)?)?;
    ctx.write("projection.csv", &projection_csv(&report)?)?;
    ctx.write("report.md", &markdown_report(&[], &[], Some(&report)))?;
    Ok(())
}

fn cmd_report(ctx: &mut Ctx, a: &ReportArgs) -> Result<()> {
    if a.results.is_empty() && a.deviation.is_none() {
        bail!("nothing to report: pass --results and/or --deviation");
    }
    let mut rows = Vec::new();
    for p in &a.results {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        rows.extend(read_results_csv(&text, &p.to_string_lossy())?);
        ctx.manifest.input(p);
    }
    let deviation = match &a.deviation {
        Some(p) => {
            let mut reader = csv_reader(p)?;
            ctx.manifest.input(p);
            Some(DeviationReport {
                rows: reader.deserialize::<DeviationRow>().collect::<std::result::Result<_, _>>()?,
                projection: Vec::new(),
            })
        }
        None => None,
    };
    ctx.write("report.md", &markdown_report(&rows, &[], deviation.as_ref()))?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.get("seed", cli.seed, DEFAULT_SEED)?;
    let out_dir = settings.get("out-dir", cli.out_dir.as_ref().map(|p| p.to_string_lossy().into_owned()), "out".into())?;
    let out_dir = PathBuf::from(out_dir);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let name = match &cli.command {
        Command::GenData(_) => "gen-data",
        Command::Privatize(_) => "privatize",
        Command::Run(_) => "run",
        Command::Sweep(_) => "sweep",
        Command::Deviation(_) => "deviation",
        Command::Report(_) => "report",
    };
    let mut ctx = Ctx {
        settings,
        seed,
        out_dir,
        manifest: ManifestBuilder::start(name),
        outputs: Vec::new(),
    };
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(&mut ctx, a)?,
        Command::Privatize(a) => cmd_privatize(&mut ctx, a)?,
        Command::Run(a) => cmd_run(&mut ctx, a)?,
        Command::Sweep(a) => cmd_sweep(&mut ctx, a)?,
        Command::Deviation(a) => cmd_deviation(&mut ctx, a)?,
        Command::Report(a) => cmd_report(&mut ctx, a)?,
    }
    ctx.finish()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
