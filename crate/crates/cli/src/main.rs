use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bigmeans::bench::{run_plan_with, Algorithm, ExperimentPlan};
use bigmeans::bigmeans::{choose_chunk_size_hint, ProbeBudget};
use bigmeans::io::{
    load, min_max_normalize, write_centroids_csv, write_csv, write_labels, DatasetSpec, Format,
    Registry,
};
use bigmeans::metrics::{summary_rows, write_summary_csv};
use bigmeans::{big_means, kmeans, BigMeansConfig, Error, InitConfig, InitMethod, SearchConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

const DEFAULT_SEED: u64 = 20_240_101;
const DEFAULT_CHUNK_SIZE: usize = 10_000;
const DEFAULT_MAX_CHUNKS: usize = 100;

#[derive(Parser)]
#[command(name = "bigmeans", version, about = "Chunk-sampled K-means clustering")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "BIGMEANS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset.
    Cluster(ClusterArgs),
    /// Execute a benchmark plan.
    Bench(BenchArgs),
    /// Min-max normalize a dataset and write it as CSV.
    Normalize(NormalizeArgs),
    /// Suggest a chunk size by probing a halving ladder.
    HintChunkSize(HintArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset file.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    input: Option<PathBuf>,
    /// csv, whitespace or tsplib.
    #[arg(long, required_unless_present = "dataset")]
    format: Option<Format>,
    /// Registry dataset name, resolved against --data-dir.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "data", env = "BIGMEANS_DATA_DIR")]
    data_dir: PathBuf,
    /// First line is a header (CSV only).
    #[arg(long)]
    header: bool,
    /// Min-max normalize every column to [0, 1].
    #[arg(long)]
    normalize: bool,
    /// Comma-separated zero-based columns to keep.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
}

impl InputArgs {
    fn spec(&self) -> Result<DatasetSpec, Error> {
        let mut spec = match (&self.input, &self.dataset) {
            (Some(path), _) => {
                let format = self
                    .format
                    .ok_or_else(|| Error::Usage("--format is required with --input".into()))?;
                DatasetSpec::new(path, format)
            }
            (None, Some(name)) => Registry::builtin()
                .get(name)
                .ok_or_else(|| Error::Config(format!("no registry entry named '{name}'")))?
                .spec(&self.data_dir),
            (None, None) => return Err(Error::Usage("--input or --dataset is required".into())),
        };
        if let Some(format) = self.format {
            spec.format = format;
        }
        spec.has_header |= self.header;
        spec.normalize |= self.normalize;
        if self.columns.is_some() {
            spec.columns = self.columns.clone();
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: usize,
    /// big-means, forgy, kmeans++ or kmeans||.
    #[arg(long, default_value = "big-means")]
    algo: Algorithm,
    /// Chunk size for big-means (default: min(m, 10000)).
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Time budget for the big-means chunk loop.
    #[arg(long, conflicts_with = "max_chunks")]
    max_seconds: Option<f64>,
    /// Chunk budget for big-means (default 100 when no budget is given).
    #[arg(long)]
    max_chunks: Option<usize>,
    /// Unsigned integer or "random".
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value_t = SearchConfig::default().rel_tolerance)]
    tol: f64,
    #[arg(long, default_value_t = SearchConfig::default().max_iterations)]
    max_iters: usize,
    #[arg(long)]
    out_centroids: Option<PathBuf>,
    #[arg(long)]
    out_labels: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Plan JSON file.
    #[arg(long)]
    plan: PathBuf,
    /// Registry JSON overriding the built-in one.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Summary CSV, one row per (algorithm, dataset, k).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Per-run CSV.
    #[arg(long)]
    out_runs: Option<PathBuf>,
    /// Full results as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HintArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = ProbeBudget::default().rungs)]
    rungs: usize,
    #[arg(long, default_value_t = ProbeBudget::default().chunks_per_run)]
    chunks_per_run: usize,
    #[arg(long, default_value_t = ProbeBudget::default().runs)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = match cli.threads {
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Cluster(args) => cluster(args, threads),
        Command::Bench(args) => bench(args),
        Command::Normalize(args) => normalize(args),
        Command::HintChunkSize(args) => hint(args),
    }
}

fn parse_seed(seed: Option<&str>) -> Result<u64, Error> {
    match seed {
        None => Ok(DEFAULT_SEED),
        Some("random") => Ok(rand_seed()),
        Some(s) => s
            .parse()
            .map_err(|_| Error::Config(format!("--seed must be an unsigned integer or 'random', got '{s}'"))),
    }
}

fn rand_seed() -> u64 {
    use std::collections::hash_map::RandomState;
    use std::hash::BuildHasher;
    RandomState::new().hash_one(std::time::SystemTime::now())
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cluster(args: ClusterArgs, threads: usize) -> Result<(), Error> {
    let seed = parse_seed(args.seed.as_deref())?;
    if args.max_seconds.is_some() && args.max_chunks.is_some() {
        return Err(Error::Usage("--max-seconds and --max-chunks are mutually exclusive".into()));
    }
    let search = SearchConfig {
        max_iterations: args.max_iters,
        rel_tolerance: args.tol,
    };
    search.validate()?;
    let spec = args.input.spec()?;
    let data = load(&spec)?;

    let mut chunk_size = None;
    let mut max_chunks = None;
    let outcome = match args.algo {
        Algorithm::BigMeans => {
            let s = args.chunk_size.unwrap_or(data.len().min(DEFAULT_CHUNK_SIZE));
            let mut cfg = BigMeansConfig::new(args.k, s).with_seed(seed);
            cfg.search = search;
            match args.max_seconds {
                Some(t) => cfg.max_cpu_seconds = Some(t),
                None => cfg.max_chunks = Some(args.max_chunks.unwrap_or(DEFAULT_MAX_CHUNKS)),
            }
            chunk_size = Some(s);
            max_chunks = cfg.max_chunks;
            big_means(&data, &cfg)?.0
        }
        other => {
            if args.chunk_size.is_some() || args.max_seconds.is_some() || args.max_chunks.is_some() {
                return Err(Error::Usage(format!(
                    "--chunk-size and budgets only apply to big-means, not {other}"
                )));
            }
            let method = match other {
                Algorithm::Forgy => InitMethod::Forgy,
                Algorithm::KmeansPp => InitMethod::KmeansPp,
                _ => InitMethod::KmeansParallel,
            };
            let init = InitConfig {
                seed,
                ..InitConfig::with_method(method)
            };
            kmeans(&data, args.k, &init, &search)?
        }
    };

    if let Some(path) = &args.out_centroids {
        let mut w = create(path)?;
        write_centroids_csv(&outcome.centroids, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
    }
    if let Some(path) = &args.out_labels {
        let labels = outcome
            .assignment
            .as_ref()
            .ok_or_else(|| Error::InvalidState("no final assignment".into()))?;
        let mut w = create(path)?;
        write_labels(&labels.labels, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
    }
    if let Some(path) = &args.out_json {
        let c = outcome.counter;
        let report = json!({
            "objective": outcome.objective,
            "iterations": c.iterations,
            "n_d": c.distance_evals,
            "cpu_init": c.cpu_init,
            "cpu_full": c.cpu_full,
            "n_s": outcome.chunks,
            "seed": seed,
            "degenerate_centroids": outcome.centroids.degenerate_count(),
            "config": {
                "algo": args.algo.id(),
                "k": args.k,
                "input": spec.path,
                "format": spec.format,
                "header": spec.has_header,
                "normalize": spec.normalize,
                "columns": spec.columns,
                "rows": data.len(),
                "dims": data.dims(),
                "chunk_size": chunk_size,
                "max_seconds": args.max_seconds,
                "max_chunks": max_chunks,
                "tol": search.rel_tolerance,
                "max_iters": search.max_iterations,
                "candidates_per_step": InitConfig::default().candidates_per_step,
                "threads": threads,
            },
        });
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))?;
    }
    println!("{:?}", outcome.objective);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.plan).map_err(io_err(&args.plan))?;
    let plan = ExperimentPlan::from_json(&text)?;
    let registry = match &args.registry {
        Some(path) => Registry::from_path(path)?,
        None => Registry::builtin(),
    };
    let results = run_plan_with(&plan, &registry)?;
    for f in &results.failures {
        eprintln!(
            "{} {} k={}: {}{}",
            f.dataset,
            f.algorithm,
            f.k,
            if f.errored { "error: " } else { "skipped: " },
            f.reason
        );
    }
    if plan.parallel_cells {
        eprintln!("warning: cells ran concurrently; timings are unreliable");
    }

    let rows = summary_rows(&results.summaries, Some(&results.scores));
    if let Some(path) = &args.out_csv {
        let mut w = create(path)?;
        write_summary_csv(&rows, &mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    if let Some(path) = &args.out_runs {
        let mut w = create(path)?;
        results.write_runs_csv(&mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    if let Some(path) = &args.out_json {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &results)?;
        writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let print = |out: &mut io::StdoutLock| -> io::Result<()> {
        writeln!(out, "algorithm,score_accuracy,score_cpu,score_mean,accuracy_pct,cpu_pct,mean_pct")?;
        for t in &results.scores.totals {
            writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.0},{:.0},{:.0}",
                t.algorithm,
                t.accuracy_sum,
                t.cpu_sum,
                t.mean_sum,
                t.accuracy_pct,
                t.cpu_pct,
                t.mean_pct
            )?;
        }
        Ok(())
    };
    print(&mut out).map_err(io_err(Path::new("<stdout>")))?;
    if results.any_errored() {
        return Err(Error::InvalidState("one or more cells failed with an error".into()));
    }
    Ok(())
}

fn normalize(args: NormalizeArgs) -> Result<(), Error> {
    let mut spec = args.input.spec()?;
    spec.normalize = false;
    let data = min_max_normalize(&load(&spec)?);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&data, &mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(path))
        }
        None => write_csv(&data, io::stdout().lock()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn hint(args: HintArgs) -> Result<(), Error> {
    let data = load(&args.input.spec()?)?;
    let budget = ProbeBudget {
        rungs: args.rungs,
        chunks_per_run: args.chunks_per_run,
        runs: args.runs,
        seed: args.seed,
        search: SearchConfig::default(),
    };
    let s = choose_chunk_size_hint(&data, args.k, &budget)?;
    println!("{s}");
    Ok(())
}
