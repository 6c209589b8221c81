use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use detxplain::explain::Method;
use detxplain::harness::{self, DetectorKind, RunConfig};
use detxplain::metrics::Metric;
use detxplain::Result;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "detxplain", version, about = "Saliency explanations for two-stage detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic nodule dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Explain dataset images and write maps, overlays and JSON reports.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        /// Image id to explain; repeat for several. Default: every image.
        #[arg(long = "image")]
        images: Vec<String>,
    },
    /// Score every method on a dataset and write CSV and JSON reports.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a SAL1 map over a dataset image as a PNG overlay.
    Render {
        /// SAL1 file to render.
        saliency: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        image: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Key-value run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// synthetic or minicnn.
    #[arg(long)]
    detector: Option<String>,
    /// Comma-separated method names, or `all`.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated metric names, or `all`.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.dataset {
            cfg.dataset = Some(v);
        }
        if let Some(v) = self.detector {
            cfg.detector = v.parse::<DetectorKind>()?;
        }
        if let Some(v) = self.methods {
            cfg.methods = Method::parse_list(&v)?;
        }
        if let Some(v) = self.metrics {
            cfg.metrics = Metric::parse_list(&v)?;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { out, n, height, width, seed } => {
            harness::gen_data(n, height, width, seed, &out)?;
        }
        Command::Explain { run, images } => {
            let mut cfg = run.resolve()?;
            if !images.is_empty() {
                cfg.images = images;
            }
            let reports = harness::explain(&cfg)?;
            println!("explained {} images into {}", reports.len(), cfg.out()?.display());
        }
        Command::Benchmark { run } => {
            let cfg = run.resolve()?;
            let report = harness::benchmark(&cfg)?;
            print!("{}", report.table());
        }
        Command::Render { saliency, dataset, image, out } => {
            harness::render(&saliency, &dataset, &image, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DETXPLAIN_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
