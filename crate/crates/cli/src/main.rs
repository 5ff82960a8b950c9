use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use revpark_cli::commands::{
    cmd_batch, cmd_certify, cmd_plan, PlanFlags, EXIT_NO_PATH, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION,
};

#[derive(Parser)]
#[command(name = "revpark", version, about = "Reverse-parking path planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Flags {
    /// Also draw every enqueued branch to search_tree.svg.
    #[arg(long)]
    tree: bool,
    /// Override the scenario's iteration budget.
    #[arg(long, value_name = "N")]
    max_iterations: Option<usize>,
    /// Accepted for scripting; planning never uses randomness.
    #[arg(long)]
    seed_independent: bool,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

impl Flags {
    fn plan_flags(&self) -> PlanFlags {
        PlanFlags {
            tree: self.tree,
            max_iterations: self.max_iterations,
            quiet: self.quiet,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write CSV, SVG and report files.
    Plan {
        scenario: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a trajectory table against a scenario's exact obstacles.
    Certify {
        scenario: PathBuf,
        trajectory: PathBuf,
    },
    /// Plan every .scen file in a directory and write summary.csv.
    Batch {
        dir: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Plan {
            scenario,
            out_dir,
            flags,
        } => match cmd_plan(&scenario, &out_dir, &flags.plan_flags()) {
            Ok(report) => {
                if !flags.quiet {
                    print!("{}", report.to_text());
                }
                report.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Command::Certify {
            scenario,
            trajectory,
        } => match cmd_certify(&scenario, &trajectory) {
            Ok(None) => {
                println!("ok");
                EXIT_OK
            }
            Ok(Some(v)) => {
                println!("violation at {v}");
                EXIT_VIOLATION
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Command::Batch {
            dir,
            out_dir,
            flags,
        } => match cmd_batch(&dir, &out_dir, &flags.plan_flags()) {
            Ok((_, true)) => EXIT_OK,
            Ok((_, false)) => EXIT_NO_PATH,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code as u8);
        }
    };
    ExitCode::from(run(cli) as u8)
}
