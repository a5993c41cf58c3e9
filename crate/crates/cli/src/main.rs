use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfcsim::output::write_run;
use rfcsim::sweep::{sweep, write_sweep, SweepAxis};
use rfcsim::{load_scenario, run, Error, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "rfcsim", version, about = "Macro TDD cluster simulator with common frame configuration selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its result directory.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override one key, `key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the coordination and SINR traces.
        #[arg(long)]
        trace: bool,
    },
    /// Run a parameter sweep with replications.
    Sweep {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// `key=v1,v2,...`
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn scenario(path: Option<&PathBuf>, overrides: &[String]) -> Result<Scenario, Error> {
    let mut s = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
            load_scenario(&text)?
        }
        None => Scenario::default(),
    };
    for o in overrides {
        s.apply_override(o)?;
    }
    s.validate()?;
    Ok(s)
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { scenario: path, set, out, trace } => {
            let s = scenario(path.as_ref(), &set)?;
            let opts = RunOptions { coordination_trace: trace, sinr_trace: trace };
            let r = run(&s, opts)?;
            write_run(&out, &r)?;
            println!(
                "{} packets measured, {} dropped, results in {}",
                r.records.len(),
                r.dropped,
                out.display()
            );
            Ok(true)
        }
        Command::Sweep { scenario: path, set, axis, reps, out } => {
            let s = scenario(path.as_ref(), &set)?;
            let axis: SweepAxis = axis.parse()?;
            let res = sweep(&s, &axis, reps)?;
            write_sweep(&out, &res)?;
            let failed = res.points.iter().filter(|p| !p.errors.is_empty()).count();
            println!("{} points, {} with errors, results in {}", res.points.len(), failed, out.display());
            Ok(failed == 0)
        }
        Command::Selftest => {
            let checks = rfcsim::selftest::run_all();
            for c in &checks {
                println!("{} {:<20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
