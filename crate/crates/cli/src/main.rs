//! `infomech` command-line front end.

mod commands;
mod render;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use render::Format;

#[derive(Parser, Debug)]
#[command(
    name = "infomech",
    version,
    about = "Sell information optimally and evaluate selling protocols"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,

    /// Incentive margins down to -TOLERANCE are accepted when verifying menus.
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    tolerance: f64,

    /// Refine the candidate posteriors with a simplex grid of resolution K.
    #[arg(long, global = true, value_name = "K")]
    grid: Option<usize>,

    /// Include the candidate posterior set in the output.
    #[arg(long, global = true)]
    qstar_dump: bool,

    /// Write the solved linear program in plain-text form to PATH.
    #[arg(long, global = true, value_name = "PATH")]
    lp_dump: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mechanism {
    Envelope,
    Mappings,
    Outcomes,
    OutcomesNpt,
    FullSurplus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Revelation,
    Mappings,
    Outcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Committed,
    Uncommitted,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one mechanism class.
    Solve {
        #[arg(long, value_enum)]
        mechanism: Mechanism,
        /// Context JSON file, or `fixture:NAME` for an embedded context.
        #[arg(long)]
        context: String,
        /// Make every incentive constraint hold with this margin.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Move a fixed-price menu to a vertex with small support.
        #[arg(long)]
        reduce_support: bool,
    },
    /// Revenue of every mechanism class.
    Report {
        #[arg(long)]
        context: String,
    },
    /// Best responses and exact evaluation of a protocol tree.
    EvalProtocol {
        #[arg(long)]
        context: String,
        /// Protocol JSON file, or `fixture:NAME`.
        #[arg(long)]
        tree: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Uncommitted)]
        mode: ModeArg,
    },
    /// Turn a protocol into a revelation protocol or a pricing menu, using
    /// committed best responses.
    Transform {
        #[arg(long, value_enum)]
        to: Target,
        #[arg(long)]
        context: String,
        #[arg(long)]
        tree: String,
    },
    /// Run the embedded fixture suite.
    Fixtures {
        /// Glob over fixture names.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Revenue along μ + tη.
    Gap {
        #[arg(long)]
        context: String,
        /// Perturbation matrix (rows ω, columns θ) as JSON, or `fixture:NAME`.
        #[arg(long)]
        direction: String,
        /// Values of t; t = 0 is always included.
        #[arg(long = "t", value_delimiter = ',', allow_hyphen_values = true)]
        ts: Vec<f64>,
    },
}

/// Exit statuses.
pub mod status {
    pub const CHECK_FAILED: u8 = 1;
    pub const INPUT_ERROR: u8 = 2;
    pub const NUMERIC_FAILURE: u8 = 3;
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use infomech::Error as E;
    match err.downcast_ref::<infomech::Error>() {
        Some(
            E::Infeasible
            | E::Unbounded
            | E::NumericFailure(_)
            | E::RankDeficient { .. }
            | E::ComplexityLimit { .. },
        ) => status::NUMERIC_FAILURE,
        _ => status::INPUT_ERROR,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = commands::Options {
        format: cli.format,
        tolerance: cli.tolerance,
        grid: cli.grid,
        qstar_dump: cli.qstar_dump,
        lp_dump: cli.lp_dump,
    };
    let outcome = match cli.command {
        Command::Solve {
            mechanism,
            context,
            epsilon,
            reduce_support,
        } => commands::solve(&opts, mechanism, &context, epsilon, reduce_support),
        Command::Report { context } => commands::report(&opts, &context),
        Command::EvalProtocol {
            context,
            tree,
            mode,
        } => commands::eval_protocol(&opts, &context, &tree, mode),
        Command::Transform { to, context, tree } => commands::transform(&opts, to, &context, &tree),
        Command::Fixtures { filter } => commands::fixtures(&opts, filter.as_deref()),
        Command::Gap {
            context,
            direction,
            ts,
        } => commands::gap(&opts, &context, &direction, &ts),
    };
    match outcome {
        Ok(out) => {
            // a closed pipe is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{}", out.text);
            if out.checks_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(status::CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
