use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use wordeq::cli::{run, Command as Cmd, OutputFormat, RunConfig};

/// Word equations with rational constraints over free groups, free monoids
/// with involution, and free products; solution sets as EDT0L systems.
#[derive(Parser)]
#[command(name = "wordeq", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Decide satisfiability at the length bound (exit 0 = SAT, 1 = UNSAT).
    Sat(CommonArgs),
    /// Build the EDT0L system and write its serialization.
    Solve(CommonArgs),
    /// Classify the solution set: empty, finite or infinite.
    Classify(CommonArgs),
    /// Enumerate solution tuples from the EDT0L system.
    Enumerate(CommonArgs),
    /// Enumerate solution tuples by brute force (ground truth).
    Oracle(CommonArgs),
    /// Log every arc of every witness path with its forward check.
    Trace(CommonArgs),
    /// Write the EDT0L system in DOT format.
    Export(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Problem file.
    input: PathBuf,
    /// Alphabet budget factor (|C| = kappa * n).
    #[arg(long, default_value_t = 100)]
    kappa: usize,
    /// Per-component solution length bound.
    #[arg(long, default_value_t = 6)]
    max_len: usize,
    /// Seed for partition sampling; a fixed seed gives identical output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on arcs per witness replay.
    #[arg(long, default_value_t = 10_000_000)]
    budget_steps: usize,
    /// Cap on enumeration and oracle work.
    #[arg(long, default_value_t = 10_000_000)]
    budget_enum: usize,
    /// Output format for solve.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cmd, common) = match &args.command {
        Command::Sat(c) => (Cmd::Sat, c),
        Command::Solve(c) => (Cmd::Solve, c),
        Command::Classify(c) => (Cmd::Classify, c),
        Command::Enumerate(c) => (Cmd::Enumerate, c),
        Command::Oracle(c) => (Cmd::Oracle, c),
        Command::Trace(c) => (Cmd::Trace, c),
        Command::Export(c) => (Cmd::Export, c),
    };
    let input = match std::fs::read_to_string(&common.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.input.display());
            return ExitCode::from(2);
        }
    };
    let config = RunConfig {
        command: cmd,
        input,
        kappa: common.kappa,
        max_len: common.max_len,
        seed: common.seed,
        budget_steps: common.budget_steps,
        budget_enum: common.budget_enum,
        format: match common.format {
            Format::Text => OutputFormat::Text,
            Format::Dot => OutputFormat::Dot,
        },
    };
    match run(&config) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
