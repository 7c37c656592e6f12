//! Experiment driver for straggler-resilient coded matrix factorization.
//!
//! Commands: `factorize` (baseline vs coded pipelines on one synthetic
//! instance), `sweep` (timing grid over cluster size × partition count),
//! `analyze` (design table for a cluster), `gen` (write synthetic data).
//! Configuration comes from an optional `--config key=value` file with
//! `--key value` overrides; see [`config::ExperimentConfig`].

pub mod commands;
pub mod config;
pub mod synth;

use coded_als::{Error, Result};
use config::ExperimentConfig;

/// Maps every library error to its process exit code: 2 configuration,
/// 3 feasibility, 4 numerical decode, 5 degeneracy. (Exit 1 is reserved
/// for a factorization whose pipelines disagree on the final loss.)
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Io(_)
        | Error::Format(_)
        | Error::ShapeMismatch { .. } => 2,
        Error::Infeasible(_)
        | Error::NotDivisible { .. }
        | Error::InsufficientResponses { .. } => 3,
        Error::NumericalDecode { .. }
        | Error::NotSymmetric { .. }
        | Error::NonFinite { .. }
        | Error::DuplicatePoint { .. } => 4,
        Error::Degeneracy { .. } | Error::Singular { .. } => 5,
    }
}

/// A parsed invocation: which command to run and the effective
/// configuration after file and flag overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Factorize,
    Sweep,
    Analyze,
    Gen,
}

const USAGE: &str = "usage: coded-als <factorize|sweep|analyze|gen> [options]\n\
  --config <file>   load key=value configuration file\n\
  --out <dir>       output directory (key output_dir)\n\
  --seed <n>        RNG seed (key seed)\n\
  --rounds <n>      Monte Carlo repetitions (key rounds)\n\
  --sweep           shorthand for the sweep command\n\
  --<key> <value>   override any configuration key\n";

/// Parses command-line arguments (without the program name) into a
/// command plus effective configuration. Overrides apply in order after
/// the config file, whatever their position.
pub fn parse_invocation(args: &[String]) -> Result<Invocation> {
    let mut command = None;
    let mut config_path = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut iter = args.iter().peekable();
    while let Some(arg) = iter.next() {
        if let Some(flag) = arg.strip_prefix("--") {
            let key = match flag {
                "sweep" => {
                    set_command(&mut command, Command::Sweep)?;
                    continue;
                }
                "help" => return Err(Error::Config(USAGE.into())),
                "out" => "output_dir",
                other => other,
            };
            let value = iter.next().ok_or_else(|| {
                Error::Config(format!("--{flag} expects a value\n{USAGE}"))
            })?;
            if key == "config" {
                config_path = Some(value.clone());
            } else {
                overrides.push((key.to_string(), value.clone()));
            }
        } else {
            let cmd = match arg.as_str() {
                "factorize" => Command::Factorize,
                "sweep" => Command::Sweep,
                "analyze" => Command::Analyze,
                "gen" => Command::Gen,
                other => {
                    return Err(Error::Config(format!(
                        "unknown command '{other}'\n{USAGE}"
                    )))
                }
            };
            set_command(&mut command, cmd)?;
        }
    }
    let command = command.ok_or_else(|| Error::Config(format!("missing command\n{USAGE}")))?;
    let mut config = ExperimentConfig::default();
    if let Some(path) = config_path {
        config.load_file(std::path::Path::new(&path))?;
    }
    for (key, value) in &overrides {
        config.set(key, value)?;
    }
    Ok(Invocation { command, config })
}

fn set_command(slot: &mut Option<Command>, cmd: Command) -> Result<()> {
    match slot {
        None => {
            *slot = Some(cmd);
            Ok(())
        }
        Some(existing) if *existing == cmd => Ok(()),
        Some(existing) => Err(Error::Config(format!(
            "conflicting commands {existing:?} and {cmd:?}\n{USAGE}"
        ))),
    }
}

/// Runs a parsed invocation, printing the command's report to stdout.
/// Returns the process exit code.
pub fn run(invocation: &Invocation) -> Result<i32> {
    match invocation.command {
        Command::Factorize => {
            let report = commands::run_factorization(&invocation.config)?;
            print!("{}", report.report_text);
            Ok(if report.agreement { 0 } else { 1 })
        }
        Command::Sweep => {
            let cells = commands::run_sweep(&invocation.config)?;
            print!("{}", commands::render_sweep_table(&cells));
            println!(
                "wrote sweep.csv and sweep_table.txt to {}",
                invocation.config.output_dir.display()
            );
            Ok(0)
        }
        Command::Analyze => {
            print!("{}", commands::run_analyze(&invocation.config)?);
            Ok(0)
        }
        Command::Gen => {
            print!("{}", commands::run_gen(&invocation.config)?);
            Ok(0)
        }
    }
}
