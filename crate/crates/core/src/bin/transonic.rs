use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use transonic::cli::{self, RunConfig, RunOptions};
use transonic::Error;

#[derive(Parser)]
#[command(name = "transonic", version, about = "Transonic irrotational and Beltrami duct flows")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads inside the solvers.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Reserved: there are no stochastic components.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Record wall-clock timings in report.json (makes it run-dependent).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Background profile and admissibility margins.
    Background,
    /// Irrotational fixed point.
    SolvePotential,
    /// Rotational fixed point.
    SolveBeltrami,
    /// Property suite; exit status 4 if any check fails.
    Verify,
    /// Re-render a saved report.json as markdown.
    Report {
        /// Report to render; defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", cli::error_record(e));
    ExitCode::from(cli::exit_code(e) as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let _ = args.seed;
    if args.threads == 0 {
        return fail(&Error::Config("--threads must be at least 1".into()));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        return fail(&Error::Config(format!("thread pool: {e}")));
    }
    let cfg = match &args.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => RunConfig::default(),
    };
    let out = args.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions { out, timings: args.timings };
    let done = match &args.command {
        Command::Background => cli::run_background(&cfg, &opts).map(|r| r.render()),
        Command::SolvePotential => cli::run_potential(&cfg, &opts).map(|r| r.render()),
        Command::SolveBeltrami => cli::run_beltrami(&cfg, &opts).map(|r| r.render()),
        Command::Verify => match cli::run_verify(&cfg, &opts) {
            Ok(r) => {
                print!("{}", r.render());
                return if r.passed() { ExitCode::SUCCESS } else { ExitCode::from(4) };
            }
            Err(e) => Err(e),
        },
        Command::Report { report } => cli::run_report(&report.clone().unwrap_or_else(|| opts.out.join("report.json"))),
    };
    match done {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
