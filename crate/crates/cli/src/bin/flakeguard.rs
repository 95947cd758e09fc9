use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use flakeguard::config::SanitiserConfig;
use flakeguard::eval::corpus::build_corpus;
use flakeguard::runner::{autodetect_enabled, autodetect_extensions};
use flakeguard::{run_suite, EventRegistry, Extension, Network, NetworkSanitiser, OutcomeState, RunOptions};
use flakeguard_cli::{extension_catalog, load_network, suite_variant, Switch};

#[derive(Parser)]
#[command(name = "flakeguard", version, about = "Run a test suite with optional network sanitising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite once and report per-test outcomes.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Suite name: corpus, corpus-core or jabref.
    #[arg(long)]
    suite: String,
    /// Overrides FLAKEGUARD_SANITISE and extension autodetection.
    #[arg(long, value_enum)]
    sanitise: Option<Switch>,
    /// Overrides FLAKEGUARD_CONTEXT_SCOPING.
    #[arg(long, value_enum)]
    context_scoping: Option<Switch>,
    /// Overrides the mode set in the network config.
    #[arg(long, value_enum)]
    network: Option<Switch>,
    #[arg(long)]
    net_config: Option<PathBuf>,
    /// Read FLAKEGUARD_* keys from this file instead of the environment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding extensions.manifest when FLAKEGUARD_AUTODETECT=true.
    #[arg(long, default_value = ".")]
    manifest_dir: PathBuf,
    #[arg(long, value_enum, default_value = "off")]
    parallel: Switch,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Shuffle the test order with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: RunArgs) -> Result<bool> {
    let variant = suite_variant(&args.suite)?;
    let mut settings = match &args.config {
        Some(path) => SanitiserConfig::from_file(path)?,
        None => SanitiserConfig::from_env()?,
    };
    if let Some(s) = args.context_scoping {
        settings.context_scoping = s.enabled();
    }
    let mut state = load_network(args.net_config.as_deref())?;
    if let Some(n) = args.network {
        state.mode = if n.enabled() { flakeguard::NetworkMode::On } else { flakeguard::NetworkMode::Off };
    }

    let registry = Arc::new(EventRegistry::new(settings.context_scoping));
    let matchers = settings.matcher_set()?;
    let extensions: Vec<Arc<dyn Extension>> = match args.sanitise {
        Some(s) if s.enabled() => vec![Arc::new(NetworkSanitiser::new(Arc::clone(&registry), matchers))],
        Some(_) => Vec::new(),
        None if autodetect_enabled() => {
            let catalog = extension_catalog(&registry, &matchers);
            autodetect_extensions(true, &args.manifest_dir, &catalog).context("extension autodetection")?
        }
        None if settings.sanitise => vec![Arc::new(NetworkSanitiser::new(Arc::clone(&registry), matchers))],
        None => Vec::new(),
    };
    log::info!(
        "extensions: [{}]",
        extensions.iter().map(|e| e.name()).collect::<Vec<_>>().join(", ")
    );

    let net = Arc::new(Network::new(Arc::clone(&registry), state));
    let suite = build_corpus(variant, &net);
    let mut options = if args.parallel.enabled() {
        RunOptions::parallel(args.workers.max(1))
    } else {
        RunOptions::sequential()
    };
    if let Some(seed) = args.seed {
        options = options.shuffled(seed);
    }
    let record = run_suite(&suite, &extensions, &options);

    for (id, outcome) in &record.outcomes {
        let mut line = format!("{:<8} {id}", outcome.state().as_str());
        if !outcome.message().is_empty() {
            line.push_str(&format!(": {}", outcome.message()));
        }
        if let Some(p) = outcome.provenance() {
            line.push_str(&format!(" [{p}]"));
        }
        println!("{line}");
    }
    for w in &record.warnings {
        println!("warning  {w}");
    }
    let counts: Vec<String> = OutcomeState::ALL
        .iter()
        .map(|s| format!("{} {}", record.count(*s), s.as_str()))
        .collect();
    println!("{} tests: {} ({:.3}s)", record.outcomes.len(), counts.join(", "), record.wall_time);
    Ok(record.build_passed())
}

fn main() -> ExitCode {
    env_logger::init();
    let Command::Run(args) = Cli::parse().command;
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("flakeguard: {e:#}");
            ExitCode::from(2)
        }
    }
}
