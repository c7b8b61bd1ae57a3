// `!(x > 0)` style checks are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{config_error, ConfigError, Counts, List};

const AFTER_HELP: &str = "\
Every option can also be set in the --config file as `key = value`, either at
top level or under a [forward], [invert], [verify], [norm-scan] or [constants]
section; flags win over the file and sections win over top-level keys.
SONAR_THREADS caps the number of worker threads.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure
(non-convergence or a tolerance miss, details in manifest.txt), 1 other errors.";

#[derive(Parser)]
#[command(name = "sonar", version, about = "Sonar, parabolic and transversal Radon transforms", after_help = AFTER_HELP)]
struct Cli {
    /// Config file of `key = value` lines with optional [command] sections
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving result.csv and manifest.txt
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a transform of a phantom on a grid
    Forward(ForwardArgs),
    /// Reconstruct a phantom from its transform and compare with the truth
    Invert(InvertArgs),
    /// Evaluate both sides of a factorization identity
    Verify(VerifyArgs),
    /// Norm ratios of a transform under anisotropic dilations
    NormScan(NormScanArgs),
    /// Normalizing constants of the inversion formulas
    Constants(ConstantsArgs),
}

#[derive(Args, Clone, Default)]
pub struct PhantomArgs {
    /// Dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// gaussian, bump or monomial [default: bump on the half-space or for invert, else gaussian]
    #[arg(long)]
    pub phantom: Option<String>,
    /// Comma-separated center [default: origin; (0,...,0,1) on the half-space or for a bump]
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<List>,
    /// Scale [default: 0.4 for a bump, 1 otherwise]
    #[arg(long)]
    pub scale: Option<f64>,
    /// Gauss-Legendre nodes per axis for the transforms [default: 200 (n = 2), 80 (n = 3), 40]
    #[arg(long)]
    pub m: Option<usize>,
    /// Truncation radius for integrands without a support hint [default: 8]
    #[arg(long, allow_hyphen_values = true)]
    pub r_max: Option<f64>,
}

#[derive(Args, Clone, Default)]
pub struct GridArgs {
    /// Lower grid corner, one value or one per axis
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<List>,
    /// Upper grid corner, one value or one per axis
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<List>,
    /// Nodes per axis, one count or one per axis
    #[arg(long)]
    pub nodes: Option<Counts>,
}

#[derive(Args)]
pub struct ForwardArgs {
    /// T, P, P_restricted, H or R [default: T]
    #[arg(long)]
    pub transform: Option<String>,
    #[command(flatten)]
    pub phantom: PhantomArgs,
    /// Grid [default: [-2,2]^n; x' in [-1,1], r in [0.5,2] for H; angle in [0,pi], t in [-2,2] for R]
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args)]
pub struct InvertArgs {
    /// Transform the data comes from: T, P or H [default: H]
    #[arg(long)]
    pub kind: Option<String>,
    /// hypersingular or laplacian_power [default: hypersingular for n = 2, laplacian_power otherwise]
    #[arg(long)]
    pub method: Option<String>,
    /// Finite difference order [default: n - 1 for even n, n for odd n]
    #[arg(long)]
    pub ell: Option<usize>,
    /// Decreasing inner cutoffs [default: 0.2,0.1,0.05,0.025]
    #[arg(long)]
    pub eps_schedule: Option<List>,
    /// Laplacian stencil spacing [default: 0.02]
    #[arg(long)]
    pub stencil_h: Option<f64>,
    /// Kernel exponent [default: 2n - 1]
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Outer radius of the hypersingular integral [default: 64]
    #[arg(long)]
    pub r_out: Option<f64>,
    /// Nodes of the g-functional quadrature [default: 128 (n = 2), 80 (n = 3)]
    #[arg(long)]
    pub g_nodes: Option<usize>,
    /// Directions of the angular rule [default: 32 (n = 2), 12]
    #[arg(long)]
    pub angular_nodes: Option<usize>,
    /// Nodes per log-radial panel [default: 8]
    #[arg(long)]
    pub radial_nodes: Option<usize>,
    /// Spacing of the default 3^n grid around the phantom center [default: 0.375 * scale]
    #[arg(long)]
    pub spacing: Option<f64>,
    #[command(flatten)]
    pub phantom: PhantomArgs,
    /// Explicit grid replacing the default one
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// parabolic-transversal, sonar-transversal, sonar-parabolic or scaling[:l1,l2] [default: parabolic-transversal]
    #[arg(long)]
    pub identity: Option<String>,
    /// Maximum relative error [default: 1e-6]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub phantom: PhantomArgs,
    /// Grid [default: 5 nodes per axis on [-2,2]^n; x' in [-1,1], r in [0.5,2] for sonar identities]
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args)]
pub struct NormScanArgs {
    /// T, P or H [default: T]
    #[arg(long)]
    pub transform: Option<String>,
    /// Exponent of the input norm [default: 1.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Outer exponent of the mixed norm [default: admissible value for p]
    #[arg(long)]
    pub q: Option<f64>,
    /// Inner exponent of the mixed norm [default: admissible value for p]
    #[arg(long)]
    pub s: Option<f64>,
    /// First dilation parameters [default: 0.125,0.25,0.5,1,2,4,8]
    #[arg(long)]
    pub lambda1: Option<List>,
    /// Second dilation parameters [default: lambda1]
    #[arg(long)]
    pub lambda2: Option<List>,
    #[command(flatten)]
    pub phantom: PhantomArgs,
}

#[derive(Args)]
pub struct ConstantsArgs {
    /// Dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Finite difference order [default: n - 1 for even n, n for odd n]
    #[arg(long)]
    pub ell: Option<usize>,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SONAR_THREADS") else {
        return Ok(());
    };
    let k: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| config_error(format!("invalid value for `SONAR_THREADS`: `{raw}` is not a positive count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = init_threads().and_then(|()| commands::run(cli.command, cli.config.as_deref(), &cli.out));
    match status {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
