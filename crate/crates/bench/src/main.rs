use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coded_mrpt::cluster::{Cluster, Strategy};
use coded_mrpt::matdot::{conditioning_report, encode_data, write_shard, BetaScheme, CodeConfig, DEFAULT_WARNING_THRESHOLD};
use mrpt_bench::spec::StragglerChoice;
use mrpt_bench::{
    gen_synthetic, load_csv, load_fvecs, prepare, run, write_fvecs, BenchError, BenchResult, ExperimentSpec,
    Generator, Overrides, SyntheticKind, DEFAULT_CONFIG,
};

#[derive(Parser)]
#[command(name = "mrpt-bench", version, about = "Straggler-resilient MRPT experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary, traces and per-query outputs.
    Run(RunArgs),
    /// Measure wall-clock query time per strategy, without straggler simulation.
    ComputeBench(RunArgs),
    /// Print the default experiment config.
    Init,
    /// Write a synthetic data set (and optional held-out queries) as fvecs.
    Generate(GenerateArgs),
    /// Encode a data set into per-worker MatDot shard files.
    Encode(EncodeArgs),
    /// Report worst-case interpolation conditioning for a code.
    Conditioning(CodeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of single,data_parallel,mp_uncoded,mp_matdot,mp_systematic.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    straggler: Option<StragglerChoice>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = ["stl10", "gist"])]
    preset: Option<String>,
    /// Draw queries from the data set instead of holding them out.
    #[arg(long)]
    in_dataset: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Gaussian,
    Clustered,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    distribution: Distribution,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write this many held-out queries.
    #[arg(long, default_value_t = 0)]
    queries: usize,
    #[arg(long)]
    queries_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Chebyshev,
    Integer,
}

impl From<Scheme> for BetaScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Chebyshev => BetaScheme::Chebyshev,
            Scheme::Integer => BetaScheme::Integer,
        }
    }
}

#[derive(Args)]
struct CodeArgs {
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    workers: usize,
    #[arg(long, value_enum, default_value = "chebyshev")]
    betas: Scheme,
    #[arg(long)]
    systematic: bool,
}

#[derive(Args)]
struct EncodeArgs {
    /// fvecs file, or CSV fixture when the name ends in .csv.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    code: CodeArgs,
}

fn load_spec(args: &RunArgs) -> BenchResult<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?;
            ExperimentSpec::parse(&text)?
        }
        None => ExperimentSpec::default(),
    };
    let strategies = match &args.strategy {
        Some(names) => Some(
            names
                .iter()
                .map(|n| Strategy::from_name(n).ok_or_else(|| BenchError::Config(format!("unknown strategy `{n}`"))))
                .collect::<BenchResult<Vec<_>>>()?,
        ),
        None => None,
    };
    spec.apply(&Overrides {
        strategies,
        seed: args.seed,
        queries: args.queries,
        runs: args.runs,
        out_dir: args.out_dir.clone(),
        straggler: args.straggler,
        m: args.m,
        workers: args.workers,
        preset: args.preset.clone(),
        in_dataset: args.in_dataset,
    });
    Ok(spec)
}

fn cmd_run(args: &RunArgs) -> BenchResult<()> {
    let spec = load_spec(args)?;
    let summary = run(&spec)?;
    println!("{:<14} {:>14} {:>14} {:>8} {:>10}", "strategy", "mean_latency", "std_latency", "recall", "mean_|S|");
    for s in &summary.strategies {
        println!(
            "{:<14} {:>14.4} {:>14.4} {:>8.4} {:>10.1}",
            s.name, s.mean_latency, s.std_latency, s.mean_recall, s.mean_candidate_size
        );
    }
    println!("outputs in {}", spec.out_dir.display());
    Ok(())
}

fn cmd_compute_bench(args: &RunArgs) -> BenchResult<()> {
    let mut spec = load_spec(args)?;
    spec.straggler = coded_mrpt::cluster::StragglerModel::None;
    let w = prepare(&spec)?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| BenchError::runtime("write output", e))?;
    let mut csv = String::from("strategy,queries,total_wall_secs,mean_wall_secs\n");
    println!("{:<14} {:>16}", "strategy", "mean_wall_secs");
    for &strategy in &spec.strategies {
        let cfg = spec.cluster_config(strategy, w.data.dim())?;
        let cluster = Cluster::new(w.data.clone(), cfg).map_err(|e| BenchError::runtime("index build", e))?;
        let start = Instant::now();
        for q in &w.queries {
            cluster.run_query(q).map_err(|e| BenchError::runtime("query", e))?;
        }
        let total = start.elapsed().as_secs_f64();
        let per = total / w.queries.len().max(1) as f64;
        println!("{:<14} {:>16.6}", strategy.name(), per);
        csv.push_str(&format!("{},{},{total},{per}\n", strategy.name(), w.queries.len()));
    }
    let path = spec.out_dir.join("compute.csv");
    fs::write(&path, csv).map_err(|e| BenchError::runtime("write output", e))?;
    println!("wall-clock table in {}", path.display());
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> BenchResult<()> {
    let kind = match a.distribution {
        Distribution::Gaussian => SyntheticKind::Gaussian,
        Distribution::Clustered => SyntheticKind::Clustered { clusters: a.clusters },
    };
    let seed = coded_mrpt::RngSeed(a.seed);
    let data = gen_synthetic(a.n, a.d, kind, seed).map_err(|e| BenchError::Config(e.to_string()))?;
    let points: Vec<&[f64]> = (0..data.len()).map(|j| data.point(j)).collect();
    write_fvecs(&a.out, &points).map_err(|e| BenchError::runtime("write output", e))?;
    if a.queries > 0 {
        let path = a
            .queries_out
            .as_ref()
            .ok_or_else(|| BenchError::Config("--queries needs --queries-out".into()))?;
        let g = Generator::new(a.d, kind, seed).map_err(|e| BenchError::Config(e.to_string()))?;
        write_fvecs(path, &g.points(a.queries, 2)).map_err(|e| BenchError::runtime("write output", e))?;
    }
    Ok(())
}

fn code_config(a: &CodeArgs) -> BenchResult<CodeConfig<f64>> {
    let cfg = if a.systematic {
        CodeConfig::systematic(a.m, a.workers, a.betas.into())
    } else {
        CodeConfig::matdot(a.m, a.workers, a.betas.into())
    };
    cfg.map_err(|e| BenchError::Config(e.to_string()))
}

fn print_conditioning(cfg: &CodeConfig<f64>) {
    let r = conditioning_report(cfg, DEFAULT_WARNING_THRESHOLD);
    println!(
        "worst-case condition {:.6e} over {} subsets (workers {:?})",
        r.condition,
        if r.exhaustive { "all" } else { "sampled" },
        r.worst_subset
    );
    if r.warning {
        eprintln!("warning: condition exceeds {:.0e}; decoded products may be inaccurate", r.threshold);
    }
}

fn cmd_encode(a: &EncodeArgs) -> BenchResult<()> {
    let cfg = code_config(&a.code)?;
    let is_csv = a.input.extension().is_some_and(|e| e == "csv");
    let data = if is_csv { load_csv(&a.input) } else { load_fvecs(&a.input) }
        .map_err(|e| BenchError::data("load dataset", e))?;
    if a.code.m > data.dim() {
        return Err(BenchError::Config(format!("m = {} exceeds d = {}", a.code.m, data.dim())));
    }
    print_conditioning(&cfg);
    let shards = encode_data(data.transposed(), &cfg).map_err(|e| BenchError::runtime("encode", e))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| BenchError::runtime("write output", e))?;
    for shard in &shards {
        let path: PathBuf = Path::new(&a.out_dir).join(format!("shard_{:03}.bin", shard.worker_id));
        let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| BenchError::runtime("write output", e))?);
        write_shard(&mut f, shard, &cfg).map_err(|e| BenchError::runtime("write output", e))?;
    }
    println!("wrote {} shards to {}", shards.len(), a.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::ComputeBench(a) => cmd_compute_bench(a),
        Command::Init => {
            print!("{DEFAULT_CONFIG}");
            Ok(())
        }
        Command::Generate(a) => cmd_generate(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Conditioning(a) => code_config(a).map(|c| print_conditioning(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
