//! Command-line interface: simulations, ranking, plots, corpus stats and the
//! review service.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::active::{TreatmentCode, TreatmentConfig};
use crate::corpus::Corpus;
use crate::eval::{self, plot, rank_results, runlog, ScottKnottConfig, SimOptions, SimulationData};
use crate::features::{Stoplist, TfidfVectorizer, DEFAULT_MAX_TERMS, STOPLIST_VERSION};
use crate::service::{self, SessionStore};

#[derive(Debug, Parser)]
#[command(name = "fastread", version, about = "Active-learning screening for literature reviews")]
pub struct Cli {
    /// Workspace root holding sessions/, data/ and runs/.
    #[arg(long, global = true, env = "FASTREAD_WORKSPACE", default_value = "workspace")]
    pub workspace: PathBuf,

    /// Print the embedded stop-word list and exit.
    #[arg(long)]
    pub print_stoplist: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate reviews of a labeled corpus and append results to a run log.
    Simulate(SimulateArgs),
    /// Rank treatments in one or more run logs.
    Rank(RankArgs),
    /// Write recall curves from run logs as SVG and CSV.
    Plot(PlotArgs),
    /// Run the review service.
    Serve(ServeArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Labeled input CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated treatment codes, `linear`, or `all`.
    #[arg(long, default_value = "HUTM")]
    pub treatment: String,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    /// First seed; run k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub target_recall: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
    /// Run log; defaults to <workspace>/runs/<corpus>.jsonl.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Parallel runs (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Labels gathered between refits.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, default_value_t = 5)]
    pub t1: usize,
    #[arg(long, default_value_t = 30)]
    pub t2: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = 1)]
    pub bootstrap_seed: u64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Output path without extension; `.svg` and `.csv` are added.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Only these treatments (comma-separated).
    #[arg(long)]
    pub treatment: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 5000)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of web UI assets.
    #[arg(long, env = "FASTREAD_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError { code: 1, error }
    }
}

fn usage(error: anyhow::Error) -> CliError {
    CliError { code: 2, error }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_stoplist {
        println!("# stoplist {STOPLIST_VERSION}");
        for w in Stoplist::english().sorted() {
            println!("{w}");
        }
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(usage(anyhow!("no subcommand given; see --help")));
    };
    match command {
        Command::Simulate(a) => simulate(&cli.workspace, a),
        Command::Rank(a) => rank(a),
        Command::Plot(a) => plot_cmd(a),
        Command::Serve(a) => serve(&cli.workspace, a),
        Command::Stats(a) => stats(a),
    }
}

fn load(path: &Path) -> Result<Corpus, CliError> {
    Corpus::load_csv(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(CliError::from)
}

fn simulate(workspace: &Path, a: SimulateArgs) -> Result<(), CliError> {
    let codes = TreatmentCode::parse_list(&a.treatment).map_err(|e| usage(e.into()))?;
    let config = TreatmentConfig {
        t1: a.t1,
        t2: a.t2,
        target_recall: a.target_recall,
    };
    config.validate().map_err(|e| usage(e.into()))?;
    let corpus = load(&a.data)?;
    if !corpus.is_fully_labeled() {
        return Err(usage(anyhow!(
            "{} is not fully labeled; simulation needs a \"label\" column with yes/no on every row",
            a.data.display()
        )));
    }
    let data = if codes.iter().all(TreatmentCode::is_linear) {
        SimulationData::labels_only(&corpus)
    } else {
        let vectorizer = TfidfVectorizer::new(a.max_terms, Stoplist::english());
        SimulationData::from_corpus(&corpus, &vectorizer)
    }
    .map_err(|e| usage(e.into()))?;

    let output = a
        .output
        .clone()
        .unwrap_or_else(|| workspace.join("runs").join(format!("{}.jsonl", corpus.name)));
    let done = runlog::completed(&output).with_context(|| format!("reading {}", output.display()))?;
    let options = SimOptions {
        batch: a.batch as usize,
        ..SimOptions::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| anyhow!(e))?;

    for code in codes {
        let seeds: Vec<u64> = (a.seed..a.seed + a.repeats)
            .filter(|s| !done.contains(&(data.name.clone(), code, *s)))
            .collect();
        if seeds.is_empty() {
            tracing::info!("{code}: all {} runs already logged", a.repeats);
            continue;
        }
        let results = pool
            .install(|| {
                seeds
                    .par_iter()
                    .map(|&s| eval::simulate_with(&data, code, &config, s, &options, None))
                    .collect::<Result<Vec<_>, _>>()
            })
            .map_err(anyhow::Error::from)?;
        runlog::append(&output, &results).with_context(|| format!("writing {}", output.display()))?;
        let x: Vec<f64> = results.iter().map(|r| r.x95 as f64).collect();
        let (med, iqr) = eval::median_iqr(&x).map_err(anyhow::Error::from)?;
        println!(
            "{code:<6} {} runs  X95 median {med:.0} (IQR {iqr:.0})  WSS@95 median {:.3}",
            results.len(),
            eval::wss_at(config.target_recall, med.round() as usize, data.pool()).unwrap_or(f64::NAN)
        );
    }
    println!("results in {}", output.display());
    Ok(())
}

fn read_logs(paths: &[PathBuf]) -> Result<Vec<eval::SimulationResult>, CliError> {
    let mut all = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(usage(anyhow!("{} does not exist", p.display())));
        }
        all.extend(runlog::read(p).with_context(|| format!("reading {}", p.display()))?);
    }
    if all.is_empty() {
        return Err(usage(anyhow!("no results in the given logs")));
    }
    Ok(all)
}

fn rank(a: RankArgs) -> Result<(), CliError> {
    let results = read_logs(&a.logs)?;
    let cfg = ScottKnottConfig {
        seed: a.bootstrap_seed,
        ..ScottKnottConfig::default()
    };
    let report = rank_results(&results, &cfg).map_err(|e| usage(e.into()))?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    } else {
        print!("{report}");
    }
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), CliError> {
    let mut results = read_logs(&a.logs)?;
    if let Some(filter) = &a.treatment {
        let keep = TreatmentCode::parse_list(filter).map_err(|e| usage(e.into()))?;
        results.retain(|r| keep.contains(&r.treatment));
    }
    let corpora: BTreeMap<&str, ()> = results.iter().map(|r| (r.corpus.as_str(), ())).collect();
    if corpora.len() > 1 {
        return Err(usage(anyhow!(
            "logs mix corpora: {}",
            corpora.keys().copied().collect::<Vec<_>>().join(", ")
        )));
    }
    let title = corpora.keys().next().copied().unwrap_or("");
    let svg = a.output.with_extension("svg");
    let csv = a.output.with_extension("csv");
    if let Some(dir) = svg.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&svg, plot::curves_svg(&results, title)).with_context(|| format!("writing {}", svg.display()))?;
    std::fs::write(&csv, plot::curves_csv(&results)).with_context(|| format!("writing {}", csv.display()))?;
    println!("wrote {} and {}", svg.display(), csv.display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let corpus = load(&a.data)?;
    println!("corpus: {}", corpus.name);
    println!("{}", corpus.stats());
    let coded = corpus.studies.iter().filter(|s| s.code.is_coded()).count();
    println!("coded: {coded}");
    let vectorizer = TfidfVectorizer::new(a.max_terms, Stoplist::english());
    match vectorizer.fit(&corpus) {
        Ok(v) => println!("terms: {} distinct, {} selected", v.distinct_terms, v.len()),
        Err(e) => println!("terms: none ({e})"),
    }
    Ok(())
}

fn serve(workspace: &Path, a: ServeArgs) -> Result<(), CliError> {
    let store = Arc::new(
        SessionStore::open(workspace, TreatmentConfig::default())
            .with_context(|| format!("opening workspace {}", workspace.display()))?,
    );
    let static_dir = match a.static_dir {
        Some(d) => Some(d),
        None => Some(PathBuf::from("webui/dist")).filter(|d| d.is_dir()),
    };
    if let Some(d) = &static_dir {
        tracing::info!("serving static assets from {}", d.display());
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("listening on http://{}", listener.local_addr().context("local address")?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        service::serve(listener, store, static_dir, shutdown)
            .await
            .context("serving")?;
        Ok(())
    })
}

pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}
