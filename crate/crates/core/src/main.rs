use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cdfdr::density::{DEFAULT_DENSITY_TERMS, DEFAULT_FLOOR};
use cdfdr::io::{
    build_run_report, deviance_path_csv, fdr_curves_csv, read_input, sim_curves_csv, to_json, write_atomic,
    ColumnKind, Pi0Report, RunConfig,
};
use cdfdr::mdc::{DEFAULT_LAMBDA_STEP, DEFAULT_MDC_TERMS};
use cdfdr::pipeline::{fit_cdfdr, t_to_z, FitConfig, NullSpec, TransformMode, DEFAULT_FDR_THRESHOLD};
use cdfdr::sim::{run_replicates, Design, MixtureNormalDesign, MixtureUniformDesign, MuRedraw, DEFAULT_REPLICATES, FULL_REPLICATES};
use cdfdr::{Error, Result};

/// Local false discovery rates from beta-preflattened comparison densities.
#[derive(Parser)]
#[command(name = "cdfdr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and report local fdr values and discoveries.
    Fdr(FdrArgs),
    /// Estimate the null proportion and write the deviance path.
    Pi0(Pi0Args),
    /// Run a simulation study.
    Simulate(SimArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    Stat,
    Pvalue,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transform {
    Pit,
    TwoSided,
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row and a `stat` or `pvalue` column (optional `id`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "stat")]
    column: Column,
    /// std-normal, normal:MU,SIGMA or t:DF.
    #[arg(long, default_value = "std-normal")]
    null: String,
    #[arg(long, value_enum, default_value = "pit")]
    transform: Transform,
    /// Convert t statistics with this many degrees of freedom to z first.
    #[arg(long)]
    df: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DENSITY_TERMS)]
    m_density: usize,
    #[arg(long, default_value_t = DEFAULT_MDC_TERMS)]
    m_mdc: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_STEP)]
    lambda_step: f64,
}

#[derive(Args)]
struct FdrArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_FDR_THRESHOLD)]
    fdr_threshold: f64,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Curves CSV (t,u,v,d_hat,fdr).
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct Pi0Args {
    #[command(flatten)]
    input: InputArgs,
    /// Summary JSON.
    #[arg(long)]
    out: PathBuf,
    /// Deviance path CSV (lambda,D_lambda,n_lambda).
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    Mixnorm,
    Mixunif,
}

#[derive(Clone, Copy, ValueEnum)]
enum Redraw {
    Once,
    PerRep,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_enum)]
    design: DesignKind,
    /// Mean of the nonnull means (mixnorm).
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
    /// Null proportion; for mixnorm it sets n-null = round(pi0 * n).
    #[arg(long)]
    pi0: Option<f64>,
    /// Upper end of the signal region (mixunif).
    #[arg(long, default_value_t = 0.02)]
    a: f64,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long)]
    n_null: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Run the full 150 replicates.
    #[arg(long, conflicts_with = "replicates")]
    full: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "once")]
    mu_redraw: Redraw,
    #[arg(long, default_value_t = DEFAULT_DENSITY_TERMS)]
    m_density: usize,
    #[arg(long, default_value_t = DEFAULT_MDC_TERMS)]
    m_mdc: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_STEP)]
    lambda_step: f64,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Curves CSV (grid,true_fdr,mean_fdr,sd_fdr).
    #[arg(long)]
    curves: Option<PathBuf>,
}

fn fit_config(m_density: usize, m_mdc: usize, grid_step: f64, mode: TransformMode) -> FitConfig {
    FitConfig {
        m_density,
        m_mdc,
        grid_step,
        mode,
        floor: DEFAULT_FLOOR,
    }
}

struct Prepared {
    config: RunConfig,
    ids: Option<Vec<String>>,
    inputs: Vec<f64>,
    stats: Vec<f64>,
}

fn prepare(args: &InputArgs, fdr_threshold: f64) -> Result<Prepared> {
    let kind = match args.column {
        Column::Stat => ColumnKind::Stat,
        Column::Pvalue => ColumnKind::Pvalue,
    };
    let mode = match args.transform {
        Transform::Pit => TransformMode::Pit,
        Transform::TwoSided => TransformMode::TwoSided,
    };
    let null = match kind {
        ColumnKind::Pvalue => NullSpec::PrecomputedPvalues,
        ColumnKind::Stat => args.null.parse()?,
    };
    if kind == ColumnKind::Pvalue && args.df.is_some() {
        return Err(Error::Config("--df applies to statistics, not p-values".into()));
    }
    if !(fdr_threshold.is_finite() && fdr_threshold >= 0.0) {
        return Err(Error::Config(format!("--fdr-threshold must be non-negative, got {fdr_threshold}")));
    }
    let table = read_input(&args.input, kind)?;
    let stats = match args.df {
        Some(df) => t_to_z(&table.values, df).map_err(|e| Error::Config(e.to_string()))?,
        None => table.values.clone(),
    };
    Ok(Prepared {
        config: RunConfig {
            input: args.input.display().to_string(),
            column: kind,
            null,
            t_to_z_df: args.df,
            fit: fit_config(args.m_density, args.m_mdc, args.lambda_step, mode),
            fdr_threshold,
        },
        ids: table.ids,
        inputs: table.values,
        stats,
    })
}

fn run_fdr(args: FdrArgs) -> Result<()> {
    let p = prepare(&args.input, args.fdr_threshold)?;
    let fit = fit_cdfdr(&p.stats, &p.config.null, &p.config.fit)?;
    let curves = args.curves.as_ref().map(|_| fdr_curves_csv(&p.stats, &fit));
    let report = build_run_report(p.config, p.ids.as_deref(), &p.inputs, &p.stats, &fit);
    let json = to_json(&report)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&args.out, &json)?;
    if let (Some(path), Some(text)) = (args.curves, curves) {
        write_atomic(&path, &text)?;
    }
    Ok(())
}

fn run_pi0(args: Pi0Args) -> Result<()> {
    let p = prepare(&args.input, DEFAULT_FDR_THRESHOLD)?;
    let fit = fit_cdfdr(&p.stats, &p.config.null, &p.config.fit)?;
    let path = &fit.model.deviance_path;
    let report = Pi0Report {
        n: path.n,
        lambda_star: path.lambda_star,
        pi0_hat: path.pi0_hat,
        flat: path.flat,
        skipped: path.skipped.clone(),
        config: p.config,
    };
    let json = to_json(&report)?;
    let csv = deviance_path_csv(path);
    write_atomic(&args.out, &json)?;
    if let Some(out) = args.path {
        write_atomic(&out, &csv)?;
    }
    Ok(())
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("CDFDR_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("CDFDR_THREADS must be a non-negative integer, got '{v}'"))),
        _ => Ok(0),
    }
}

fn run_simulate(args: SimArgs) -> Result<()> {
    let replicates = if args.full { FULL_REPLICATES } else { args.replicates };
    let design = match args.design {
        DesignKind::Mixnorm => {
            if let Some(p) = args.pi0 {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("--pi0 must lie in [0, 1], got {p}")));
                }
            }
            let n_null = match (args.n_null, args.pi0) {
                (Some(k), _) => k,
                (None, Some(p)) => (p * args.n as f64).round() as usize,
                (None, None) => (0.9 * args.n as f64).round() as usize,
            };
            Design::Mixnorm(MixtureNormalDesign {
                n: args.n,
                n_null,
                mu: args.mu,
                replicates,
                seed: args.seed,
                mu_redraw: match args.mu_redraw {
                    Redraw::Once => MuRedraw::Once,
                    Redraw::PerRep => MuRedraw::PerReplicate,
                },
            })
        }
        DesignKind::Mixunif => Design::Mixunif(MixtureUniformDesign {
            pi0: args.pi0.unwrap_or(0.9),
            a: args.a,
            n: args.n,
            replicates,
            seed: args.seed,
        }),
    };
    design.validate()?;
    let config = fit_config(args.m_density, args.m_mdc, args.lambda_step, TransformMode::Pit);
    let report = run_replicates(&design, &config, threads_from_env()?)?;
    let json = to_json(&report)?;
    let csv = sim_curves_csv(&report);
    write_atomic(&args.out, &json)?;
    if let Some(path) = args.curves {
        write_atomic(&path, &csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fdr(a) => run_fdr(a),
        Command::Pi0(a) => run_pi0(a),
        Command::Simulate(a) => run_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.step() {
                Some(step) => eprintln!("error at step '{step}': {e}"),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
