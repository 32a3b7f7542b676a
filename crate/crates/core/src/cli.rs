//! Command-line front end. The `pcpa` binary only calls [`run`].
//!
//! Exit codes: 0 success, 1 configuration error, 2 certification or
//! assumption failure, 3 prior or data mismatch, 4 solver failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::area::{dbgs_with_retries, AttackedArea, DEFAULT_MAX_RETRIES};
use crate::cases::load_grid;
use crate::diagnosis::{diagnose, DiagnosisOptions, PriorSource};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate, evaluate_record, generate_dataset, run_experiment, Dataset, DatasetConfig,
    ExperimentReport, PriorBook,
};
use crate::grid::{parse_case_file, parse_matpower, CanonicalGrid};
use crate::model::GridModel;
use crate::simulator::{FactorRange, KindMix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Assumption(_) | Error::Certification { .. } => EXIT_CERTIFICATION,
        Error::Prior(_)
        | Error::DimensionMismatch { .. }
        | Error::Dataset(_)
        | Error::Reconstruction(_)
        | Error::Metric(_) => EXIT_MISMATCH,
        Error::Solver(_) | Error::Singular(_) | Error::UnbalancedIsland { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "pcpa", version, about = "Parallel cyber-physical attack simulation and diagnosis")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random draw.
    #[arg(long, global = true, env = "PCPA_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and certify an attacked area.
    Area(AreaArgs),
    /// Generate a scenario dataset.
    Dataset(DatasetArgs),
    /// Diagnose every test scenario of a dataset with one prior.
    Diagnose(DiagnoseArgs),
    /// Compare several priors on the same dataset.
    Evaluate(EvaluateArgs),
    /// Convert a MATPOWER case into the canonical JSON grid format.
    ConvertCase(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct AreaArgs {
    /// `ieee30`, `ieee118` or a case file.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub grid: Option<String>,
    /// Existing area file; built with `--size` when absent.
    #[arg(long)]
    pub area: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Test attack cardinalities, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub attacks: Option<Vec<usize>>,
    /// Training records per attack kind.
    #[arg(long)]
    pub train: Option<usize>,
    /// Test records per cardinality.
    #[arg(long)]
    pub test: Option<usize>,
    /// `alter`, `cut` or `mixed`, for the test shards.
    #[arg(long)]
    pub mix: Option<KindMix>,
    /// Open cut lines completely instead of scaling their impedance.
    #[arg(long)]
    pub exact_cut: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// `uniform`, `oracle` or `file:<path>`.
    #[arg(long)]
    pub prior: Option<PriorSource>,
    /// Restrict to one shard, e.g. `test_f1`.
    #[arg(long)]
    pub shard: Option<String>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Priors to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "uniform,oracle")]
    pub priors: Vec<PriorSource>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// MATPOWER `.m` or canonical JSON.
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Configuration file contents. Every field is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<String>,
    pub seed: Option<u64>,
    pub area: AreaConfig,
    pub attack: AttackFileConfig,
    pub dataset: DatasetSizes,
    pub prior: Option<String>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub size: Option<usize>,
    pub max_retries: Option<u32>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackFileConfig {
    pub mix: Option<KindMix>,
    pub cardinalities: Option<Vec<usize>>,
    pub alter_factor: Option<(f64, f64)>,
    pub cut_factor: Option<(f64, f64)>,
    pub exact_cut: Option<bool>,
    pub alpha_range: Option<(f64, f64)>,
    pub load_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSizes {
    pub train_per_kind: Option<usize>,
    pub test_per_cardinality: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

const DEFAULT_GRID: &str = "ieee30";
const DEFAULT_SIZE: usize = 8;
const DEFAULT_SEED: u64 = 0;

struct Ctx {
    cfg: RunConfig,
    seed: u64,
}

impl Ctx {
    fn grid(&self, flag: &Option<String>) -> String {
        flag.clone()
            .or_else(|| self.cfg.grid.clone())
            .unwrap_or_else(|| DEFAULT_GRID.into())
    }

    fn out(&self, flag: &Option<PathBuf>, default: &str) -> PathBuf {
        flag.clone()
            .or_else(|| self.cfg.output.clone())
            .unwrap_or_else(|| default.into())
    }

    fn build_area(&self, model: &GridModel, size: Option<usize>, retries: Option<u32>) -> Result<AttackedArea> {
        let size = size.or(self.cfg.area.size).unwrap_or(DEFAULT_SIZE);
        let retries = retries
            .or(self.cfg.area.max_retries)
            .unwrap_or(DEFAULT_MAX_RETRIES);
        dbgs_with_retries(model, size, self.seed, retries)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { cfg, seed };
    match cli.command {
        Command::Area(a) => cmd_area(&ctx, a),
        Command::Dataset(a) => cmd_dataset(&ctx, a),
        Command::Diagnose(a) => cmd_diagnose(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::ConvertCase(a) => cmd_convert(a),
    }
}

fn cmd_area(ctx: &Ctx, args: AreaArgs) -> Result<()> {
    let model = GridModel::new(load_grid(&ctx.grid(&args.grid))?);
    let area = ctx.build_area(&model, args.size, args.retries)?;
    let out = ctx.out(&args.out, "area.json");
    area.save(&out)?;
    println!(
        "{}: {} buses, {} lines, certified after {} attempt(s) -> {}",
        area.id,
        area.buses.len(),
        area.lines.len(),
        area.attempts,
        out.display()
    );
    Ok(())
}

fn dataset_config(ctx: &Ctx, args: &DatasetArgs) -> Result<DatasetConfig> {
    let mut cfg = DatasetConfig::default();
    let a = &ctx.cfg.attack;
    if let Some(cards) = args.attacks.clone().or_else(|| a.cardinalities.clone()) {
        if cards.is_empty() || cards.contains(&0) {
            return Err(Error::Config("attack cardinalities must be at least 1".into()));
        }
        cfg.cardinalities = Some(cards);
    }
    if let Some(n) = args.train.or(ctx.cfg.dataset.train_per_kind) {
        cfg.train_per_kind = n;
    }
    if let Some(n) = args.test.or(ctx.cfg.dataset.test_per_cardinality) {
        cfg.test_per_cardinality = n;
    }
    if let Some(m) = args.mix.or(a.mix) {
        cfg.test_mix = m;
    }
    if let Some((lo, hi)) = a.alter_factor {
        cfg.sim.attack.alter_factor = FactorRange { lo, hi };
    }
    if let Some((lo, hi)) = a.cut_factor {
        cfg.sim.attack.cut_factor = FactorRange { lo, hi };
    }
    cfg.sim.attack.exact_cut = args.exact_cut || a.exact_cut.unwrap_or(false);
    if let Some(r) = a.alpha_range {
        cfg.sim.alpha_range = r;
    }
    if let Some(s) = a.load_sigma {
        cfg.sim.load_sigma = s;
    }
    cfg.sim.validate()?;
    Ok(cfg)
}

fn cmd_dataset(ctx: &Ctx, args: DatasetArgs) -> Result<()> {
    let cfg = dataset_config(ctx, &args)?;
    let model = GridModel::new(load_grid(&ctx.grid(&args.grid))?);
    let area = match args.area.clone().or_else(|| ctx.cfg.area.file.clone()) {
        Some(path) => {
            let area = AttackedArea::load(&path)?;
            area.validate_against(&model.grid)?;
            area
        }
        None => ctx.build_area(&model, args.size, None)?,
    };
    let out = ctx.out(&args.out, "dataset");
    let manifest = generate_dataset(&model, &area, &cfg, ctx.seed, &out)?;
    let total: usize = manifest.shards.iter().map(|s| s.spec.records).sum();
    println!(
        "{} records in {} shards for {} -> {}",
        total,
        manifest.shards.len(),
        area.id,
        out.display()
    );
    Ok(())
}

fn prior_source(ctx: &Ctx, flag: &Option<PriorSource>) -> Result<PriorSource> {
    match (flag, &ctx.cfg.prior) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(s)) => s.parse(),
        (None, None) => Ok(PriorSource::Uniform),
    }
}

fn cmd_diagnose(ctx: &Ctx, args: DiagnoseArgs) -> Result<()> {
    let dataset = Dataset::open(&args.dataset)?;
    let model = dataset.model()?;
    let source = prior_source(ctx, &args.prior)?;
    let out = ctx.out(&args.out, "diagnosis");
    let opts = DiagnosisOptions::default();
    let report = match &args.shard {
        None => run_experiment(&model, &dataset, &source, &opts)?,
        Some(name) => {
            let area = &dataset.manifest.area;
            let priors = PriorBook::resolve(&source, area)?;
            let records = dataset.read_shard(name)?;
            if records.is_empty() {
                return Err(Error::Dataset(format!("shard {name} is empty")));
            }
            let mut evaluated = Vec::with_capacity(records.len());
            let mut reports = String::new();
            for r in &records {
                let prior = priors.prior_for(r)?;
                let d = diagnose(&model, area, &r.measurements, &prior, &opts)?;
                reports.push_str(&serde_json::to_string(&d)?);
                reports.push('\n');
                evaluated.push(evaluate_record(&model, area, r, &prior, &opts)?);
            }
            fs::create_dir_all(&out)?;
            fs::write(out.join("diagnoses.ndjson"), reports)?;
            ExperimentReport {
                area_id: area.id.clone(),
                prior: source.to_string(),
                rows: aggregate(&evaluated)?,
                records: evaluated,
            }
        }
    };
    report.write(&out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, args: EvaluateArgs) -> Result<()> {
    let dataset = Dataset::open(&args.dataset)?;
    let model = dataset.model()?;
    let out = ctx.out(&args.out, "evaluation");
    let opts = DiagnosisOptions::default();
    if args.priors.is_empty() {
        return Err(Error::Config("no priors to evaluate".into()));
    }
    let mut summary = String::new();
    for source in &args.priors {
        let report = run_experiment(&model, &dataset, source, &opts)?;
        let name = match source {
            PriorSource::Uniform => "uniform".to_string(),
            PriorSource::Oracle => "oracle".to_string(),
            PriorSource::File(p) => p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("file")
                .to_string(),
        };
        report.write(&out.join(&name))?;
        summary.push_str(&report.to_text());
        summary.push('\n');
    }
    fs::create_dir_all(&out)?;
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_convert(args: ConvertArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let grid = if text.trim_start().starts_with('{') {
        CanonicalGrid::from_topology(&parse_case_file(&text)?)
    } else {
        let stem = args
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("grid");
        let parsed = parse_matpower(&text, stem)?;
        // validates connectivity and line data before writing anything
        parsed.clone().into_topology()?;
        parsed
    };
    let json = serde_json::to_string_pretty(&grid)? + "\n";
    match &args.out {
        Some(p) => fs::write(p, json)?,
        None => print!("{json}"),
    }
    Ok(())
}
