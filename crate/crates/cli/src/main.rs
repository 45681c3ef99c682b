use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use scmbound::generate::{generate_suite, GenConfig};
use scmbound::harness::{run_benchmark, BenchInstance, Method};
use scmbound::io::{load_dataset, load_model, load_query, results_doc, run_docs, save_dataset, save_model};
use scmbound::{bound_query, compile, compile_unfolded, em_multi_run, validate, EmConfig, Engine, Error, Fscm, Parallelism};

#[derive(Parser)]
#[command(name = "scmbound", version, about = "Counterfactual bounds for partially specified causal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the structural rules.
    Validate { model: PathBuf },
    /// Compile a model and print circuit statistics.
    Compile {
        model: PathBuf,
        #[arg(long)]
        no_fold: bool,
        /// Print the circuit in text form instead of the statistics.
        #[arg(long)]
        dump: bool,
    },
    /// Run EM from random initialisations and print every fitted run.
    Em {
        model: PathBuf,
        dataset: PathBuf,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Bound a counterfactual query over the EM runs.
    Bounds {
        model: PathBuf,
        dataset: PathBuf,
        query: PathBuf,
        #[command(flatten)]
        em: EmArgs,
        /// Give up after this many seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write random models and sampled datasets.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the four EM methods on every model in a directory.
    Benchmark {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "bnc,bnp,acc,acp")]
        methods: Vec<Method>,
        /// Per model and method, in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ParallelArg {
    None,
    Runs,
    Components,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Ve,
    Circuit,
}

#[derive(Args)]
struct EmArgs {
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "none")]
    parallel: ParallelArg,
    #[arg(long, value_enum, default_value = "circuit")]
    engine: EngineArg,
    /// Fit the whole model at once instead of per c-component.
    #[arg(long)]
    no_decompose: bool,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            runs: self.runs,
            max_iterations: self.iters,
            rel_tolerance: self.tol,
            seed: self.seed,
            parallelism: match self.parallel {
                ParallelArg::None => Parallelism::None,
                ParallelArg::Runs => Parallelism::Runs,
                ParallelArg::Components => Parallelism::Components,
                ParallelArg::Both => Parallelism::Both,
            },
            engine: match self.engine {
                EngineArg::Ve => Engine::Ve,
                EngineArg::Circuit => Engine::Circuit,
            },
            decompose: !self.no_decompose,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    endo_min: usize,
    #[arg(long, default_value_t = 8)]
    endo_max: usize,
    #[arg(long, default_value_t = 2)]
    exo_min: usize,
    #[arg(long, default_value_t = 7)]
    exo_max: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 3)]
    exo_card_min: usize,
    #[arg(long, default_value_t = 32)]
    exo_card_max: usize,
    #[arg(long, default_value_t = 1000)]
    size_min: usize,
    #[arg(long, default_value_t = 1000)]
    size_max: usize,
    /// Give every endogenous variable its own exogenous parent.
    #[arg(long)]
    no_sharing: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn config(&self) -> GenConfig {
        GenConfig {
            endogenous_count: (self.endo_min, self.endo_max),
            exogenous_count: (self.exo_min, self.exo_max),
            edge_probability: self.edge_prob,
            exogenous_cardinality: (self.exo_card_min, self.exo_card_max),
            dataset_size: (self.size_min, self.size_max),
            share_exogenous: !self.no_sharing,
            seed: self.seed,
        }
    }
}

/// Failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn code_of(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Timeout) => 3,
        Some(
            Error::InvalidModel(_)
            | Error::Format(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::InvalidQuery(_)
            | Error::ExogenousIntervention(_),
        ) => 1,
        _ => 2,
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        Failure { code: code_of(&error), error }
    }
}

type Outcome = Result<(), Failure>;

fn load_valid(path: &Path) -> anyhow::Result<scmbound::io::LoadedModel> {
    let m = load_model(path)?;
    let violations = validate(&m.pscm);
    if !violations.is_empty() {
        return Err(anyhow::Error::new(Error::InvalidModel(violations)).context(path.display().to_string()));
    }
    if let Some(pmfs) = &m.exo_pmfs {
        Fscm::new(m.pscm.clone(), pmfs.clone()).with_context(|| path.display().to_string())?;
    }
    Ok(m)
}

fn emit(json: &serde_json::Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(json)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn seconds(s: Option<f64>) -> anyhow::Result<Option<Duration>> {
    s.map(|s| Duration::try_from_secs_f64(s).context("timeout must be a non-negative number of seconds")).transpose()
}

fn validate_cmd(model: &Path) -> Outcome {
    let m = load_model(model)?;
    let mut violations = validate(&m.pscm);
    if let Some(pmfs) = m.exo_pmfs {
        violations.extend(scmbound::model::validate_pmfs(&Fscm { pscm: m.pscm.clone(), exo_pmfs: pmfs }));
    }
    if violations.is_empty() {
        println!("{}: ok", model.display());
        return Ok(());
    }
    for v in &violations {
        println!("{}: {v}", model.display());
    }
    Err(Failure { code: 1, error: anyhow::anyhow!("{} violation(s)", violations.len()) })
}

fn compile_cmd(model: &Path, no_fold: bool, dump: bool) -> Outcome {
    let m = load_valid(model)?;
    let c = if no_fold { compile_unfolded(&m.pscm) } else { compile(&m.pscm) };
    if dump {
        print!("{}", c.dump());
    } else {
        emit(&serde_json::to_value(c.stats())?, None)?;
    }
    Ok(())
}

fn em_cmd(model: &Path, dataset: &Path, em: &EmArgs) -> Outcome {
    let m = load_valid(model)?;
    let d = load_dataset(dataset, &m.pscm)?;
    let runs = em_multi_run(&m.pscm, &d, &em.config())?;
    emit(&serde_json::to_value(run_docs(&m.pscm, &runs))?, None)?;
    Ok(())
}

fn bounds_cmd(model: &Path, dataset: &Path, query: &Path, em: &EmArgs, timeout: Option<f64>, out: Option<&Path>) -> Outcome {
    let m = load_valid(model)?;
    let d = load_dataset(dataset, &m.pscm)?;
    let q = load_query(query, &m.pscm)?;
    let deadline = seconds(timeout)?.map(|t| Instant::now() + t);
    let report = bound_query(&m.pscm, &d, &q, &em.config(), deadline)?;
    emit(&serde_json::to_value(results_doc(&m.pscm, &report, true))?, out)?;
    Ok(())
}

fn generate_cmd(gen: &GenArgs, count: usize, out: &Path) -> Outcome {
    let cfg = gen.config();
    cfg.check()?;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    for inst in generate_suite(&cfg, count)? {
        let f = &inst.fscm;
        save_model(&out.join(format!("{}.json", inst.name)), &f.pscm, Some(&f.exo_pmfs))?;
        save_dataset(&out.join(format!("{}.csv", inst.name)), &f.pscm, &inst.dataset)?;
    }
    println!("wrote {count} models to {}", out.display());
    Ok(())
}

fn load_instances(dir: &Path) -> anyhow::Result<Vec<BenchInstance>> {
    let mut models: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| dir.display().to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    models.retain(|p| p.extension().is_some_and(|e| e == "json"));
    models.sort();
    let mut out = Vec::new();
    for path in models {
        let data = path.with_extension("csv");
        if !data.exists() {
            continue;
        }
        let m = load_valid(&path)?;
        let dataset = load_dataset(&data, &m.pscm)?;
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        out.push(BenchInstance { name, pscm: m.pscm, dataset });
    }
    if out.is_empty() {
        bail!(Error::Format(format!("{}: no model/dataset pairs", dir.display())));
    }
    Ok(out)
}

fn benchmark_cmd(dir: &Path, methods: &[Method], timeout: Option<f64>, em: &EmArgs, out: Option<&Path>) -> Outcome {
    let instances = load_instances(dir)?;
    let report = run_benchmark(&instances, methods, &em.config(), seconds(timeout)?)?;
    emit(&serde_json::to_value(&report)?, out)?;
    for (method, total) in &report.total_ms {
        let median = report.ratio_quartiles.get(method).map_or(f64::NAN, |q| q.median);
        let timeouts = report.timeouts.get(method).copied().unwrap_or(0);
        eprintln!("{method}: total {total:.1} ms, median ratio {median:.3}, timeouts {timeouts}");
    }
    let timed_out = report.timeouts.values().sum::<usize>();
    if timed_out > 0 {
        return Err(Failure { code: 3, error: anyhow::anyhow!("{timed_out} method run(s) timed out") });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { model } => validate_cmd(model),
        Command::Compile { model, no_fold, dump } => compile_cmd(model, *no_fold, *dump),
        Command::Em { model, dataset, em } => em_cmd(model, dataset, em),
        Command::Bounds { model, dataset, query, em, timeout, out } => {
            bounds_cmd(model, dataset, query, em, *timeout, out.as_deref())
        }
        Command::Generate { gen, count, out } => generate_cmd(gen, *count, out),
        Command::Benchmark { dir, methods, timeout, em, out } => {
            benchmark_cmd(dir, methods, *timeout, em, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
