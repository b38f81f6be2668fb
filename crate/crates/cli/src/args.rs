use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Vacuum-induced mass shift of a semitransparent mirror in 1+1 dimensions.
///
/// Trajectories come either from a built-in family (`--family`) or from a
/// profile expression (`--traj`):
///
///   spec    := ("eta" | "alpha") "=" expr
///   expr    := term (("+" | "-") term)*
///   term    := unary (("*" | "/") unary)*
///   unary   := "-" unary | power
///   power   := primary ("^" unary)?
///   primary := number | "tau" | "pi" | func "(" expr ")" | "(" expr ")"
///   func    := sin | cos | tanh | exp | ln | sqrt | abs
///
/// `--onset T` freezes the motion before T (required for `alpha =` profiles).
/// Every flag may also be given in a `--config` file as `key = value` lines,
/// with keys named like the long flags; flags on the command line win.
///
/// Exit codes: 0 success, 1 check failure, 2 usage or parse error,
/// 3 numerical non-convergence.
#[derive(Debug, Parser)]
#[command(name = "mirror", version, verbatim_doc_comment)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mass shift μ(τ) with rates and flux split on a τ grid.
    #[command(args_override_self = true)]
    Mu(MuArgs),
    /// Uniform-motion constant μ₀: closed form against the numerical value.
    #[command(args_override_self = true)]
    Mu0(CommonArgs),
    /// Rate μ̇ and flux split F± on a τ grid.
    #[command(args_override_self = true)]
    Flux(CommonArgs),
    /// Self-consistent backreaction dynamics from a prescribed past.
    #[command(args_override_self = true)]
    Dynamics(DynamicsArgs),
    /// Invariant battery with a pass/fail table.
    #[command(args_override_self = true)]
    Check(CheckArgs),
    /// Random search for negative mass shifts.
    #[command(name = "study-sign", args_override_self = true)]
    StudySign(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Uniform,
    Hyperbolic,
    HyperbolicSmooth,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Accumulate μ̇ when the trajectory has a uniform past, else direct.
    Auto,
    /// Accumulate μ̇ from the start of the uniform past.
    Series,
    /// Log-separation formula, pointwise in τ.
    Direct,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    /// Profile expression, e.g. "eta = 0.01*sin(0.05*tau)".
    #[arg(long, conflicts_with = "family")]
    pub traj: Option<String>,
    /// Freeze an expression profile before this proper time.
    #[arg(long, allow_hyphen_values = true)]
    pub onset: Option<f64>,
    /// Position-checkpoint spacing for expression profiles.
    #[arg(long, default_value_t = 0.25)]
    pub panel: f64,
    /// Built-in trajectory family.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Velocity for `uniform`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Proper acceleration for `hyperbolic` and `hyperbolic-smooth`.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub alpha0: f64,
    /// Start of the accelerated segment.
    #[arg(long, allow_hyphen_values = true)]
    pub tau0: Option<f64>,
    /// Ramp length for `hyperbolic-smooth`.
    #[arg(long, default_value_t = 1.0)]
    pub ramp: f64,
    /// Initial velocity for `step`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta_i: f64,
    /// Final velocity for `step`.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub beta_f: f64,
    /// Ramp width for `step`; 0 gives a sharp jump at τ = 0.
    #[arg(long, default_value_t = 0.0)]
    pub width: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[command(flatten)]
    pub trajectory: TrajectoryArgs,
    /// Coupling strength a (mirror transparency scale).
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tau_start: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub tau_end: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dtau: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// History window Λ in units of 1/a.
    #[arg(long, default_value_t = 40.0)]
    pub window: f64,
    /// Panel limit of the adaptive quadrature.
    #[arg(long, default_value_t = 2000)]
    pub max_subdivisions: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `key = value` file supplying defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write a gnuplot script that plots the CSV given by `--out`.
    #[arg(long)]
    pub emit_plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MuArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Debug, Clone, Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Bare mass m of the mirror.
    #[arg(long, default_value_t = 1.0)]
    pub bare_mass: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Reduced grids.
    #[arg(long)]
    pub quick: bool,
    /// Deliberately corrupt one computation (harness self-test).
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of random profiles.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Largest mode frequency as a fraction of a.
    #[arg(long, default_value_t = 0.05)]
    pub omega_max: f64,
    /// Sinusoidal modes per profile.
    #[arg(long, default_value_t = 3)]
    pub modes: usize,
    /// Peak rapidity amplitude.
    #[arg(long, default_value_t = 0.05)]
    pub amplitude: f64,
    /// μ samples per profile.
    #[arg(long, default_value_t = 16)]
    pub points: usize,
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Mu(m) => &m.common,
            Command::Mu0(c) | Command::Flux(c) => c,
            Command::Dynamics(d) => &d.common,
            Command::Check(c) => &c.common,
            Command::StudySign(s) => &s.common,
        }
    }
}
