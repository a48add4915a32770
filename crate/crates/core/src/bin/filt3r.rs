use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use filt3r::acceptance;
use filt3r::harness::{self, RunConfig};
use filt3r::{theory, Error};

#[derive(Parser)]
#[command(name = "filt3r", version, about = "Adaptive latent-state Kalman filtering harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (policy, seed) cell described by a TOML config.
    Run {
        /// Path to the run configuration (TOML).
        config: PathBuf,
        /// Overrides `output_dir` from the config and the environment.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Execute the acceptance criteria and report PASS/FAIL for each.
    Verify {
        /// Only run these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Evaluate a closed-form reference.
    Oracle {
        #[command(subcommand)]
        oracle: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Gain after t static updates: 1 / (t + r/p0).
    StaticGain { t: u64, p0: f64, r: f64 },
    /// Variance after t static updates: 1 / (1/p0 + t/r).
    StaticVariance { t: u64, p0: f64, r: f64 },
    /// Steady-state variance and gain under constant q and r.
    SteadyState { q: f64, r: f64 },
    /// Steady-state gain at the process-noise lower bound.
    GainFloor {
        #[arg(default_value_t = 0.02)]
        q_min: f64,
        #[arg(default_value_t = 1.0)]
        r: f64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 2,
        Error::InvalidConfig { .. } => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn run(config: PathBuf, output_dir: Option<PathBuf>) -> Result<(), Error> {
    let mut config = RunConfig::load(&config)?;
    if output_dir.is_some() {
        config.output_dir = output_dir;
    }
    let out = harness::run(&config)?;
    println!("{}", harness::SUMMARY_HEADER);
    for cell in &out.cells {
        println!("{}", harness::summary_csv_row(cell));
    }
    eprintln!("wrote {} files to {}", out.files.len(), out.output_dir.display());
    Ok(())
}

fn verify(only: &[u32]) -> ExitCode {
    let mut failures = 0;
    for &(id, _, _) in acceptance::CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let result = acceptance::run_criterion(id).expect("registered criterion");
        println!("{result}");
        failures += usize::from(!result.passed);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} criteria failed");
        ExitCode::from(1)
    }
}

fn oracle(oracle: Oracle) {
    match oracle {
        Oracle::StaticGain { t, p0, r } => println!("{}", theory::static_gain(t, p0, r)),
        Oracle::StaticVariance { t, p0, r } => println!("{}", theory::static_variance(t, p0, r)),
        Oracle::SteadyState { q, r } => {
            let ss = theory::steady_state(q, r);
            println!("p_star={} k_star={}", ss.p_star, ss.k_star);
        }
        Oracle::GainFloor { q_min, r } => println!("{}", theory::gain_floor(q_min, r)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_dir } => match run(config, output_dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Verify { only } => verify(&only),
        Command::Oracle { oracle: o } => {
            oracle(o);
            ExitCode::SUCCESS
        }
    }
}
