use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use eepcrawl::config::{ConfigError, CrawlConfig, DetectorChoice, TransportConfig};
use eepcrawl::manager::{self, RunError, RunSummary};
use eepcrawl::model::Status;
use eepcrawl::report::{self, ReportError};
use eepcrawl::simnet::{SimNet, SimNetError, SimNetSpec};
use eepcrawl::store::StoreError;

const EXIT_CONFIG: u8 = 1;
const EXIT_STORE: u8 = 2;

#[derive(Parser)]
#[command(name = "eepcrawl", version, about = "Crawl I2P eepsites and analyze their link graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl as configured, until every record is terminal or the horizon passes.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this instance of the configured cluster.
        #[arg(long)]
        instance_id: Option<u32>,
        #[arg(long)]
        instances: Option<u32>,
        #[arg(long)]
        horizon_days: Option<u32>,
    },
    /// Generate a simulated net plus a ready-to-run config in `--out`.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Preset::PaperShape)]
        preset: Preset,
        #[arg(long, default_value_t = 1000)]
        sites: usize,
        /// Use this spec file instead of a preset.
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        instances: Option<u32>,
        #[arg(long)]
        horizon_days: Option<u32>,
    },
    /// Write the CSV, graph and summary bundle for a store.
    Analyze {
        #[command(flatten)]
        target: StoreTarget,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write only the GraphML and DOT files for a store.
    ExportGraph {
        #[command(flatten)]
        target: StoreTarget,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct StoreTarget {
    /// Config whose `store` to read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    PaperShape,
    Random,
}

enum Failure {
    Config(String),
    Store(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimNetError> for Failure {
    fn from(e: SimNetError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Store(e) => Failure::Store(e.to_string()),
            RunError::Log(e) => Failure::Store(format!("log output: {e}")),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Store(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Store(e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Store(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Store(msg)) => {
            eprintln!("store error: {msg}");
            ExitCode::from(EXIT_STORE)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            instance_id,
            instances,
            horizon_days,
        } => {
            let mut cfg = CrawlConfig::load(&config)?;
            if let Some(n) = instances {
                cfg.instances = n;
            }
            if let Some(d) = horizon_days {
                cfg.horizon_days = d;
            }
            if let Some(i) = instance_id {
                cfg.instance_id = i;
            }
            cfg.validate()?;
            let only = instance_id.or((cfg.instance_id != 0).then_some(cfg.instance_id));
            let summary = manager::run(&cfg, only)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Simulate {
            out,
            seed,
            preset,
            sites,
            spec,
            instances,
            horizon_days,
        } => simulate(&out, seed, preset, sites, spec.as_deref(), instances, horizon_days),
        Command::Analyze { target, out } => {
            let snap = report::analyze(&target.store_path()?, &out)?;
            println!(
                "{} records, {} crawled, {} links -> {}",
                snap.records.len(),
                snap.results.len(),
                snap.graph.edge_count(),
                out.display()
            );
            Ok(())
        }
        Command::ExportGraph { target, out } => {
            let graph = report::export_graph(&target.store_path()?, &out)?;
            println!("{} nodes, {} edges -> {}", graph.node_count(), graph.edge_count(), out.display());
            Ok(())
        }
    }
}

impl StoreTarget {
    fn store_path(&self) -> Result<PathBuf, Failure> {
        match (&self.store, &self.config) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(c)) => Ok(CrawlConfig::load(c)?.store),
            (None, None) => Err(Failure::Config("either --store or --config is required".into())),
        }
    }
}

fn simulate(
    out: &Path,
    seed: u64,
    preset: Preset,
    sites: usize,
    spec: Option<&Path>,
    instances: Option<u32>,
    horizon_days: Option<u32>,
) -> Result<(), Failure> {
    let spec = match spec {
        Some(path) => SimNetSpec::load(path)?,
        None => match preset {
            Preset::PaperShape => SimNetSpec::paper_shape(seed, sites),
            Preset::Random => SimNetSpec::random(seed, sites, 2.0),
        },
    };
    let net = SimNet::generate(&spec)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    spec.save(&out.join("simnet.json"))?;
    net.write_ground_truth(&out.join("ground_truth.json"))?;
    let seeds_path = out.join("seeds.txt");
    let mut seeds = String::new();
    for id in net.seeds() {
        seeds.push_str(&id.home_url());
        seeds.push('\n');
    }
    fs::write(&seeds_path, seeds).map_err(|e| io_failure(&seeds_path, e))?;

    let mut cfg = CrawlConfig {
        initial_seeds: "seeds.txt".into(),
        store: "crawl.redb".into(),
        detector: DetectorChoice::Simnet,
        log_dir: Some("logs".into()),
        transport: TransportConfig::Simnet { spec: "simnet.json".into() },
        ..CrawlConfig::default()
    };
    if let Some(n) = instances {
        cfg.instances = n;
    }
    if let Some(d) = horizon_days {
        cfg.horizon_days = d;
    }
    cfg.save(&out.join("config.toml"))?;
    println!(
        "{} sites, {} links, {} seeds -> {}",
        net.sites().len(),
        net.edges().len(),
        net.seeds().len(),
        out.display()
    );
    Ok(())
}

fn print_summary(s: &RunSummary) {
    let mut out = io::stdout().lock();
    let _ = writeln!(
        out,
        "stopped: {:?} after {} iterations, {}s simulated or elapsed",
        s.stop,
        s.iterations,
        s.end - s.start
    );
    let _ = writeln!(out, "records: {}", s.records);
    for status in Status::ALL {
        let _ = writeln!(out, "  {:<12} {}", status.as_str(), s.count(status));
    }
}
