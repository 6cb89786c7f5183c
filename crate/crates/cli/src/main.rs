use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use kkgeom_cli::commands::{self, CheckOptions, LiftOptions};
use kkgeom_cli::{scenario, CliError, Outcome};

/// Numerical geometry of generalized Kaluza-Klein bundles.
#[derive(Parser)]
#[command(name = "kkgeom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the algebroid axioms, the metric and the lift morphism.
    Validate { file: PathBuf },
    /// Evaluate a geometric quantity at one point.
    Compute {
        file: PathBuf,
        /// frame | nlc-curvature | torsion | curvature | ricci | scalar | einstein
        #[arg(long)]
        what: String,
        /// Point as "x1=..,x2=..,y0=..".
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Run identity suites over seeded random samples.
    Check {
        file: PathBuf,
        /// oracle | ricci-commutation | bianchi | compatibility | transformation | all
        #[arg(long, default_value = "all")]
        suite: String,
        /// Override every per-check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate a lift ODE along the scenario's base curve.
    Lift {
        file: PathBuf,
        /// parallel | horizontal | vertical
        #[arg(long, default_value = "parallel")]
        mode: String,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t1: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Validate { file } => Ok(commands::validate(&scenario::load(&file)?)),
        Command::Compute { file, what, at } => commands::compute(&scenario::load(&file)?, &what, &at),
        Command::Check { file, suite, tol, samples, seed } => {
            commands::check(&scenario::load(&file)?, &suite, &CheckOptions { tol, samples, seed })
        }
        Command::Lift { file, mode, t0, t1, steps } => commands::lift(&scenario::load(&file)?, &mode, &LiftOptions { t0, t1, steps }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    let (json, code) = match run(cli) {
        Ok(out) => {
            eprintln!("{}", out.summary);
            (out.json, out.code)
        }
        Err(e) => {
            eprintln!("{e}");
            (serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() }), e.exit_code())
        }
    };
    println!("{}", serde_json::to_string_pretty(&json).expect("JSON values always serialize"));
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(code as u8)
}
