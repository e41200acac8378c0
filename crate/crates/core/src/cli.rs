//! The `qnp` command line.
//!
//! Exit status 0 on success, 1 when the input or the computation fails and
//! 2 on malformed arguments. Failures print `error_code=<code> <message>`
//! on standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::continuation::{convergence_study, run, ConvergenceTable};
use crate::error::{Error, Result};
use crate::io::config::{read_run_config, GroupValues};
use crate::io::generator::{generate, GeneratorSpec, DEFAULT_TAIL};
use crate::io::path_output::{render_convergence, write_convergence, write_path, write_weights};
use crate::io::scenario_file::{read_scenarios, write_scenarios};
use crate::risk::{build_losses, PortfolioState, RiskModel};

#[derive(Debug, Parser)]
#[command(name = "qnp", version, about = "CVaR credit portfolio optimization by continuation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the risk report of the initial allocation.
    Analyze(AnalyzeArgs),
    /// Run a continuation and write its path table.
    Optimize(OptimizeArgs),
    /// Write a synthetic scenario file.
    Gen(GenArgs),
    /// Sweep the step size and fit the convergence rate.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub beta: f64,
    /// One return for all groups, or one per group.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub returns: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub groups: usize,
    #[arg(long, default_value_t = 2000)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 5)]
    pub block_size: usize,
    /// One correlation for every block, or one per block.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub correlation: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TAIL)]
    pub tail: f64,
    #[arg(long, default_value_t = 100.0)]
    pub base_value: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dispersion: f64,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Step sizes, largest first.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    /// Defaults to the config's total cost.
    #[arg(long)]
    pub total_cost: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "error_code=usage {e}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error_code={} {e}", e.code());
            1
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Analyze(a) => analyze(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Gen(a) => gen(a, out),
        Command::Convergence(a) => convergence(a, out),
    }
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let file = read_scenarios(&args.scenarios)?;
    let m = &file.matrix;
    let returns = match args.returns.as_slice() {
        [r] => GroupValues::Uniform(*r),
        many => GroupValues::PerGroup(many.to_vec()),
    }
    .resolve(m.n_groups(), "returns")?;
    let state = PortfolioState::initial(m, returns, vec![1.0; m.n_groups()])?;
    let table = build_losses(m);
    let report = RiskModel::new(&table, args.beta)?.report(&state)?;
    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "groups={} scenarios={} beta={}", m.n_groups(), m.n_scenarios(), args.beta)?;
        if file.normalized {
            writeln!(out, "likelihoods_normalized=true")?;
        }
        writeln!(out, "base_value={}", state.base_value)?;
        writeln!(out, "var={}", report.var)?;
        writeln!(out, "cvar={}", report.cvar)?;
        writeln!(out, "diversification_index={}", report.diversification_index)?;
        writeln!(out, "total_return={}", report.total_return)?;
        writeln!(out, "revenue={}", report.revenue)?;
        writeln!(out, "return_to_risk={}", report.total_return_to_risk)?;
        writeln!(out, "group,weight,contribution,dar,standalone_cvar,return_to_risk")?;
        for n in 0..m.n_groups() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m.group_ids()[n],
                state.weights[n],
                report.contributions[n],
                report.dar[n],
                report.standalone_cvar[n],
                report.group_return_to_risk[n]
            )?;
        }
        Ok(())
    };
    w(out).map_err(io_err)
}

fn optimize(args: OptimizeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = read_run_config(&args.config)?;
    let m = read_scenarios(&cfg.scenarios)?.matrix;
    let state = PortfolioState::initial(
        &m,
        cfg.returns.resolve(m.n_groups(), "returns")?,
        cfg.costs.resolve(m.n_groups(), "costs")?,
    )?;
    let result = run(&m, &state, &cfg.continuation)?;
    let output = args.output.unwrap_or(cfg.output);
    write_path(&result, &output)?;
    if let Some(weights) = &cfg.weights_output {
        write_weights(&result, m.group_ids(), weights)?;
    }
    let last = result.last();
    let report = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "termination={}", result.reason.as_str())?;
        if let Some(e) = &result.error {
            writeln!(out, "stop_cause={} {e}", e.code())?;
        }
        writeln!(out, "steps={}", last.step)?;
        writeln!(out, "cost={}", last.cost)?;
        writeln!(out, "cvar_rel={}", last.cvar_rel)?;
        writeln!(out, "return_rel={}", last.return_rel)?;
        writeln!(out, "frozen={}", last.frozen_count)?;
        writeln!(out, "path={}", output.display())
    };
    report(out).map_err(io_err)
}

fn gen(args: GenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = GeneratorSpec {
        seed: args.seed,
        groups: args.groups,
        scenarios: args.scenarios,
        block_size: args.block_size,
        correlations: args.correlation,
        tail: args.tail,
        base_value: args.base_value,
        dispersion: args.dispersion,
    };
    let matrix = generate(&spec)?;
    write_scenarios(&matrix, &args.output)?;
    writeln!(
        out,
        "wrote {} scenarios x {} groups to {}",
        matrix.n_scenarios(),
        matrix.n_groups(),
        args.output.display()
    )
    .map_err(io_err)
}

fn convergence(args: ConvergenceArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = read_run_config(&args.config)?;
    let m = read_scenarios(&cfg.scenarios)?.matrix;
    let state = PortfolioState::initial(
        &m,
        cfg.returns.resolve(m.n_groups(), "returns")?,
        cfg.costs.resolve(m.n_groups(), "costs")?,
    )?;
    let total_cost = args.total_cost.unwrap_or(cfg.continuation.total_cost);
    let table: ConvergenceTable = convergence_study(&m, &state, &cfg.continuation, &args.deltas, total_cost)?;
    if let Some(path) = &args.output {
        write_convergence(&table, path)?;
    }
    render_convergence(&table, out).map_err(io_err)
}
