//! `trialkb` command line: harvest, crawl, serve, report and fixtures.
//!
//! Exit codes: 0 on success, 1 on partial failure (quarantined records,
//! failed tasks or pages) or runtime errors, 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use trialkb::config::PipelineConfig;
use trialkb::crawl::{seed_crawl, SnapshotStore};
use trialkb::fixtures::{serve_fixtures, FixtureWorld};
use trialkb::model::EntityId;
use trialkb::pipeline::{self, PipelineError};
use trialkb::service::{self, AppState};
use trialkb::{compute_stats, Store, SystemClock};

#[derive(Debug, Parser)]
#[command(name = "trialkb", version, about = "Clinical-trial and company knowledge acquisition")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "trialkb.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan registry queries, fetch and parse results, fuse trials.
    Harvest {
        /// Print the query plan without fetching or writing anything.
        #[arg(long)]
        dry_run: bool,
        /// Restrict the run to one company id.
        #[arg(long)]
        company: Option<String>,
    },
    /// Crawl company websites, extract facts and raise change events.
    Crawl {
        /// Print the crawl seeds without fetching or writing anything.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        company: Option<String>,
    },
    /// Run the curation HTTP service until interrupted.
    Serve,
    /// Print knowledge-base statistics.
    Report {
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the fixture registry and websites until interrupted.
    Fixtures {
        /// Copy the fixture seed KB to the configured KB path and exit.
        #[arg(long)]
        seed: bool,
    },
}

/// Configuration problems map to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error(transparent)]
struct ConfigProblem(anyhow::Error);

enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigProblem>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn config_problem(e: impl Into<anyhow::Error>) -> anyhow::Error {
    ConfigProblem(e.into()).into()
}

fn open_store(config: &PipelineConfig) -> Result<Store> {
    Store::open(&config.kb.path).map_err(config_problem)
}

/// Unknown adapter or company ids are configuration errors too.
fn pipeline_err(e: PipelineError) -> anyhow::Error {
    match e {
        PipelineError::Adapters(_) | PipelineError::UnknownAdapter(_) | PipelineError::UnknownCompany(_) => {
            config_problem(e)
        }
        other => other.into(),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let config = PipelineConfig::load(&cli.config).map_err(config_problem)?;
    let clock = SystemClock;
    match cli.command {
        Command::Harvest { dry_run, company } => {
            let company = company.map(EntityId::new);
            let mut store = open_store(&config)?;
            let registry = pipeline::load_adapters(&config).map_err(pipeline_err)?;
            let adapters = pipeline::select_adapters(&registry, &config).map_err(pipeline_err)?;
            if dry_run {
                let plan = pipeline::plan_harvest(&store.kb, &adapters, &config, company.as_ref(), &clock)
                    .map_err(pipeline_err)?;
                for t in &plan {
                    println!("{}\t{}\t{}\t{}", t.priority, t.adapter_id, t.created_from, t.query_term);
                }
                return Ok(Outcome::Done);
            }
            let fetcher = pipeline::build_fetcher(&config).map_err(pipeline_err)?;
            let (summary, _) =
                pipeline::harvest(&mut store, &adapters, fetcher.as_ref(), &clock, &config, company.as_ref())
                    .map_err(pipeline_err)?;
            store.checkpoint().context("writing knowledge base")?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.is_partial_failure() { Outcome::Partial } else { Outcome::Done })
        }
        Command::Crawl { dry_run, company } => {
            let company = company.map(EntityId::new);
            let mut store = open_store(&config)?;
            if dry_run {
                if let Some(id) = &company {
                    if store.kb.company(id).is_none() {
                        return Err(pipeline_err(PipelineError::UnknownCompany(id.to_string())));
                    }
                }
                for c in store.kb.companies().filter(|c| company.as_ref().is_none_or(|id| &c.id == id)) {
                    match seed_crawl(c, config.crawl.limits.max_depth) {
                        Ok(f) => println!("{}\t{}", c.id, f.ordered()[0].url),
                        Err(e) => println!("{}\tskipped: {e}", c.id),
                    }
                }
                return Ok(Outcome::Done);
            }
            let fetcher = pipeline::build_fetcher(&config).map_err(pipeline_err)?;
            let (summary, _) = pipeline::crawl(&mut store, fetcher.as_ref(), &clock, &config, company.as_ref())
                .map_err(pipeline_err)?;
            store.checkpoint().context("writing knowledge base")?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.is_partial_failure() { Outcome::Partial } else { Outcome::Done })
        }
        Command::Serve => {
            let state = AppState::from_config(&config).map_err(config_problem)?;
            let addr = config.service.bind.parse().map_err(config_problem)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(
                state,
                addr,
                |bound| eprintln!("curation service on http://{bound}"),
                shutdown_signal(),
            ))?;
            Ok(Outcome::Done)
        }
        Command::Report { out } => {
            let store = open_store(&config)?;
            let snapshots = SnapshotStore::new(&config.kb.snapshots);
            let report = compute_stats(&store.kb, Some(&snapshots)).to_string();
            print!("{report}");
            if let Some(path) = out {
                std::fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(Outcome::Done)
        }
        Command::Fixtures { seed } => {
            let world = match &config.fixtures.root {
                Some(root) => FixtureWorld::load(root, config.fixtures.version),
                None => FixtureWorld::bundled(config.fixtures.version),
            }
            .map_err(config_problem)?;
            if seed {
                world.seed_store(&config.kb.path).context("seeding knowledge base")?;
                eprintln!("seeded {}", config.kb.path.display());
                return Ok(Outcome::Done);
            }
            let addr = config.fixtures.bind.parse().map_err(config_problem)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve_fixtures(
                Arc::new(world),
                addr,
                |bound| eprintln!("fixture world on http://{bound} (use it as http.proxy)"),
                shutdown_signal(),
            ))
            .context("fixture server")?;
            Ok(Outcome::Done)
        }
    }
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!(error = %e, "cannot listen for Ctrl-C");
        std::future::pending::<()>().await;
    }
}
