//! `gfdim` — digitize sets over fractal structures, estimate their fractal
//! dimensions, verify curve families, and run the reduced pipeline that reads
//! a d-dimensional dimension off a 1-dimensional pre-image.
//!
//! Exit codes: 0 success, 1 verification/assertion failure, 2 configuration
//! error, 3 capacity (address width) error.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use gfdim_core::Error as CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gfdim", version, about = "Fractal dimensions via space-filling maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a fractal dimension of a digitized set
    Dims(DimsArgs),
    /// Estimate through a curve family and compare with the direct estimate
    Reduce(ReduceArgs),
    /// Verify curve family conditions, coupling constants, and structure bounds
    Verify(VerifyArgs),
    /// Export the level-n image centers of a curve family as CSV
    Curve(CurveArgs),
}

#[derive(Args)]
struct SetSelection {
    /// Builtin set: full, point, sierpinski, cantor4, diagonal, gasket-native
    #[arg(long, conflicts_with = "points")]
    set: Option<String>,
    /// CSV of points in the carrier, one point per row, d columns
    #[arg(long)]
    points: Option<PathBuf>,
    /// Coordinates for --set point, comma separated (defaults to the origin)
    #[arg(long)]
    point: Option<String>,
}

#[derive(Args)]
struct EstimatorOpts {
    /// box, dim1, dim2, dim3, or dim4
    #[arg(long, default_value = "box")]
    estimator: String,
    /// Truncation depth L (env GFDIM_DEPTH overrides; default 10, or 6 for cube3+)
    #[arg(long)]
    depth: Option<u32>,
    /// Fit/slope window as lo:hi (default 3:L-1)
    #[arg(long)]
    window: Option<String>,
    /// Lower end of the s bisection bracket (default 0)
    #[arg(long)]
    s_lo: Option<f64>,
    /// Upper end of the s bisection bracket (default carrier dim + 1)
    #[arg(long)]
    s_hi: Option<f64>,
    /// Bisection tolerance on s
    #[arg(long, default_value_t = 0.02)]
    s_tol: f64,
    /// Worker threads (env GFDIM_THREADS overrides; default: available cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized components
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DimsArgs {
    #[command(flatten)]
    selection: SetSelection,
    /// Structure name: cube<d>, interval<d>, triadic, gasket
    #[arg(long)]
    structure: String,
    #[command(flatten)]
    opts: EstimatorOpts,
    /// JSON report path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of (n, N, diam) rows
    #[arg(long)]
    csv: Option<PathBuf>,
    /// CSV of the (s, n, H) grid (dim3/dim4 only)
    #[arg(long)]
    grid_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    selection: SetSelection,
    /// Curve family: hilbert<d> or gasket (fixes the range structure)
    #[arg(long)]
    curve: String,
    #[command(flatten)]
    opts: EstimatorOpts,
    /// Fail (exit 1) when |direct - product| exceeds this bound
    #[arg(long, name = "assert")]
    assert_gap: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Curve family: hilbert<d> or gasket
    #[arg(long)]
    curve: String,
    /// Exhaustive check depth (env GFDIM_DEPTH overrides)
    #[arg(long, default_value_t = 6)]
    depth: u32,
    /// Random probes per level in the κ suite
    #[arg(long, default_value_t = 512)]
    kappa_probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// Curve family: hilbert<d> or gasket
    #[arg(long)]
    family: String,
    /// Level whose image centers are exported
    #[arg(long)]
    level: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Capacity { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Dims(args) => commands::cmd_dims(args),
        Command::Reduce(args) => commands::cmd_reduce(args),
        Command::Verify(args) => commands::cmd_verify(args),
        Command::Curve(args) => commands::cmd_curve(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
