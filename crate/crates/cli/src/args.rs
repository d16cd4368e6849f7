use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dfpi",
    version,
    about = "Deflated fixed-point iterations and Krylov baselines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one system and write the residual trace as CSV.
    Solve(SolveArgs),
    /// Run several methods on the same system and tabulate the results.
    Compare(CompareArgs),
    /// Run the certification battery.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverArg {
    Richardson,
    Dfpi,
    Gmres,
    Gmresn,
    Cg,
    Bicg,
    Bicgstab,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountArg {
    /// Every half-step of BiCGStab counts as one iteration.
    Total,
    /// Only full BiCGStab iterations are numbered.
    Reported,
}

/// System and preconditioner selection shared by `solve` and `compare`.
#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// Generated problem, e.g. `cd1d:n=100,pe=50` or `laplace2d:nx=16,ny=16`.
    #[arg(long, conflicts_with = "matrix")]
    pub problem: Option<String>,
    /// Matrix Market file with the operator.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Right-hand side file (Matrix Market or one value per line); ones by default.
    #[arg(long, requires = "matrix")]
    pub rhs: Option<PathBuf>,
    #[arg(long, default_value = "identity")]
    pub precond: String,
    #[arg(long = "tol", default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Seed for generated problems that take one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "lsq-a")]
    pub project: String,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 5e-2)]
    pub stab_tol: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub rr_tol: f64,
    /// Restart length for `gmresn`.
    #[arg(long, default_value_t = 20)]
    pub restart: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum, default_value = "dfpi")]
    pub solver: SolverArg,
    /// Recruitment strategy (dfpi only); boostconv when omitted.
    #[arg(long)]
    pub recruit: Option<String>,
    /// Where the projection sits: pre, final, post or init.
    #[arg(long, default_value = "pre")]
    pub variant: String,
    /// Record half-step residuals (iterations such as 3.5).
    #[arg(long)]
    pub record_halves: bool,
    #[arg(long, value_enum, default_value = "total")]
    pub count: CountArg,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Comma-separated methods: solver names or recruitment strategies
    /// (boostconv, bc-mw, aaos, tss, rr run the deflated solver).
    #[arg(
        long,
        default_value = "richardson,boostconv,bc-mw,aaos,tss,rr,gmres,bicgstab"
    )]
    pub methods: String,
    /// CSV table destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Problem dimension is twice this value.
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(2..=150))]
    pub scale: u64,
    #[arg(long, default_value_t = 1.0, hide = true)]
    pub tol_scale: f64,
}
