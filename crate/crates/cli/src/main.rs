use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opindep::io::ReportFile;
use opindep::Error;
use opindep_cli::{
    cmd_analyze, cmd_extend, cmd_fuzz, cmd_verify, exit_code, render, render_verification, Flags,
    EXIT_INPUT, EXIT_OK, EXIT_REJECTED,
};

#[derive(Parser)]
#[command(
    name = "opindep",
    version,
    about = "Decide and certify independence of matrix subalgebras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every randomized step.
    #[arg(long)]
    seed: Option<u64>,
    /// State pairs sampled per check.
    #[arg(long)]
    samples: Option<usize>,
    /// Certificate tolerance (eps_verify).
    #[arg(long)]
    tol: Option<f64>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    json: bool,
    /// Record wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn flags(&self) -> Flags {
        Flags {
            seed: self.seed,
            samples: self.samples,
            tol: self.tol,
            timing: self.timing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in an instance file.
    Analyze {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build the joint extension of two named operations.
    Extend {
        instance: PathBuf,
        op1: String,
        op2: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the hierarchy over a generated family of instances.
    Fuzz {
        /// tensor_split, shared_block, haar_overlap or factor_split.
        family: String,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-validate the certificates in a report.
    VerifyReport {
        report: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn emit(report: ReportFile, common: &Common) -> Result<i32, Error> {
    let json = report.to_json();
    if let Some(out) = &common.out {
        std::fs::write(out, &json).map_err(|e| Error::Validation {
            path: out.display().to_string(),
            message: e.to_string(),
        })?;
    }
    if common.json {
        print!("{json}");
    } else {
        print!("{}", render(&report));
    }
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Analyze { instance, common } => {
            emit(cmd_analyze(&read(&instance)?, &common.flags())?, &common)
        }
        Command::Extend {
            instance,
            op1,
            op2,
            common,
        } => emit(
            cmd_extend(&read(&instance)?, &op1, &op2, &common.flags())?,
            &common,
        ),
        Command::Fuzz {
            family,
            count,
            common,
        } => {
            let seed = common.seed.unwrap_or(0);
            emit(cmd_fuzz(&family, count, seed, &common.flags())?, &common)
        }
        Command::VerifyReport { report, json } => {
            let lines = cmd_verify(&read(&report)?)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&lines).expect("lines serialize")
                );
            } else {
                print!("{}", render_verification(&lines));
            }
            Ok(if lines.iter().any(|l| l.valid == Some(false)) {
                EXIT_REJECTED
            } else {
                EXIT_OK
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
