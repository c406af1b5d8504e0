use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lightlike_cli::{
    cmd_curvature, cmd_emit_spec, cmd_laws, cmd_model_algebra, cmd_normalize, cmd_validate, emit,
    exit_code, render, CliError, CurvatureOptions, Format,
};
use lightlike_core::report::{Config, Report};

#[derive(Parser)]
#[command(name = "lightlike", version, about = "Residual checks for lightlike Cartan geometries")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// Sample points per check.
    #[arg(long, global = true, default_value_t = 20)]
    samples: usize,
    /// Pass threshold for curvature and normalization checks.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Sampling seed; defaults to the seed stored in the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Allow finite-difference curvature when the node budget is exceeded.
    #[arg(long, global = true, value_enum, default_value_t = Switch::On)]
    fd_fallback: Switch,
    /// Hash-consed node budget per curvature component.
    #[arg(long, global = true, default_value_t = 2_000_000)]
    node_budget: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the spec defines a lightlike structure and report A_Z.
    Validate { spec: PathBuf },
    /// Run the screen, transition and structure identity suite.
    Laws { spec: PathBuf },
    /// Build the normalized structure (requires A_Z = Id and m >= 3).
    Normalize { spec: PathBuf },
    /// Tractor curvature, normalization conditions and the scale-bundle check.
    Curvature {
        spec: PathBuf,
        /// Perturb Γ by ε times a seeded skew field before computing.
        #[arg(long)]
        perturb: Option<f64>,
        /// Random polynomial vector fields added to the R(V,W)ξ table.
        #[arg(long, default_value_t = 0)]
        random_fields: usize,
    },
    /// Invariant suite of the model Lie algebra so(m+1,1).
    ModelAlgebra {
        #[arg(long)]
        m: usize,
    },
    /// Print the spec of a built-in model: cone M, hyperplane M or sasakian N.
    EmitSpec { model: String, size: usize },
}

fn config(f: &Flags) -> Config {
    Config {
        samples: f.samples,
        tol: f.tol,
        seed: f.seed,
        fd_fallback: f.fd_fallback == Switch::On,
        node_budget: f.node_budget,
        ..Config::default()
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = config(&cli.flags);
    let format = match cli.flags.format {
        FormatArg::Json => Format::Json,
        FormatArg::Text => Format::Text,
    };
    let out = cli.flags.out.as_deref();
    let report: Report = match &cli.command {
        Command::Validate { spec } => cmd_validate(spec, &cfg)?,
        Command::Laws { spec } => cmd_laws(spec, &cfg)?,
        Command::Normalize { spec } => cmd_normalize(spec, &cfg)?,
        Command::Curvature {
            spec,
            perturb,
            random_fields,
        } => cmd_curvature(
            spec,
            &cfg,
            &CurvatureOptions {
                perturb: *perturb,
                random_fields: *random_fields,
            },
        )?,
        Command::ModelAlgebra { m } => cmd_model_algebra(*m, &cfg)?,
        Command::EmitSpec { model, size } => {
            emit(&cmd_emit_spec(model, *size)?, out)?;
            return Ok(0);
        }
    };
    emit(&render(&report, format), out)?;
    Ok(exit_code(&report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
