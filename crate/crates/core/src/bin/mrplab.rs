use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrplab::cli::{self, Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "mrplab", version, about = "Mixed renewal process toolkit")]
struct Cli {
    /// Worker threads for simulation.
    #[arg(long, env = "MRPLAB_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble of paths; writes CSV and `<out>.manifest.json`.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 10)]
        events: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate box and count queries exactly; writes a results CSV.
    Exact {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Absolute and relative error target of the quadrature.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run verification checks; writes a JSON report.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        #[arg(long, default_value_t = 2)]
        events: usize,
        #[arg(long, default_value_t = 0.01)]
        level: f64,
        /// Box queries for mc-vs-exact.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Validate counting-process samples from a `t,N` CSV.
    CheckCounts {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("mrplab: {e}");
            return ExitCode::from(cli::EXIT_USAGE as u8);
        }
    }
    let result = match args.command {
        Command::Simulate { model, paths, events, seed, out } => cli::cmd_simulate(&model, paths, events, seed, &out),
        Command::Exact { model, queries, out, tol } => cli::cmd_exact(&model, &queries, &out, tol),
        Command::Verify {
            model,
            suite,
            seed,
            out,
            paths,
            events,
            level,
            queries,
            tol,
        } => {
            let opts = VerifyOptions {
                paths,
                events,
                level,
                queries,
                tol,
            };
            cli::cmd_verify(&model, suite, seed, &out, &opts)
        }
        Command::CheckCounts { input, out } => cli::cmd_check_counts(&input, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("mrplab: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
