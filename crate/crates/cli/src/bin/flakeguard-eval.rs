use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use flakeguard::config::SanitiserConfig;
use flakeguard::eval::{emit_report, format_ratio, run_matrix, Evaluation, MatrixConfig, DEFAULT_RUNS};
use flakeguard_cli::{load_network, suite_variant, Switch};

/// Runs a suite under network on/off crossed with sanitiser on/off and
/// writes the evaluation report.
#[derive(Parser)]
#[command(name = "flakeguard-eval", version)]
struct Args {
    /// Suite name: corpus, corpus-core or jabref.
    #[arg(long)]
    suite: String,
    /// Runs per configuration.
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "off")]
    parallel: Switch,
    /// Worker threads when running in parallel; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "off")]
    context_scoping: Switch,
    #[arg(long)]
    net_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: Args) -> Result<()> {
    let variant = suite_variant(&args.suite)?;
    let settings = SanitiserConfig::from_env()?;
    let workers = match (args.parallel, args.workers) {
        (Switch::Off, _) => 1,
        (Switch::On, Some(n)) => n,
        (Switch::On, None) => std::thread::available_parallelism().map_or(4, |n| n.get()),
    };
    let config = MatrixConfig {
        runs: args.runs,
        seed: args.seed,
        parallel: args.parallel.enabled(),
        workers,
        context_scoping: args.context_scoping.enabled(),
        network: load_network(args.net_config.as_deref())?,
        matchers: settings.matcher_set()?,
    };
    let report = run_matrix(variant.factory(), &config)?;
    if !report.is_complete() {
        bail!("matrix incomplete");
    }
    let eval = Evaluation::new(report);
    emit_report(&eval, &args.out).with_context(|| format!("writing {}", args.out.display()))?;

    let pr = eval.precision_recall;
    println!(
        "{}: {} runs x 4 configurations, |t_r| = {}, |t_s| = {}, precision {}, recall {}",
        eval.report.suite_name,
        config.runs,
        eval.sets.relevant.len(),
        eval.sets.sanitised.len(),
        format_ratio(pr.precision),
        format_ratio(pr.recall),
    );
    println!("report written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flakeguard-eval: {e:#}");
            ExitCode::FAILURE
        }
    }
}
