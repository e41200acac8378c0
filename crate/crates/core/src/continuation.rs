//! Chains projection steps along a uniform cost grid `c_m = m dc`.
//!
//! Each step re-sorts the adjusted portfolio's scenarios, rebuilds the
//! objective gradient from the fresh risk report, picks the path rates,
//! solves the closed-form step and moves the weights by `dc * y`.

use std::thread;

use crate::error::{Error, Result};
use crate::projection::{
    constants, extremum_kappas, select_coefficients, solve_step, ConstraintMode, ObjectiveKind,
    PathParams,
};
use crate::risk::{build_losses, PortfolioState, RiskModel, RiskReport, ScenarioMatrix, TailSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaPolicy {
    /// The same rates at every step.
    Fixed(PathParams),
    /// Rates re-derived every step at the extremum of `Q`; a fixed rate is held at zero.
    Extremum { fixed_revenue: bool, fixed_second: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig {
    pub objective: ObjectiveKind,
    pub mode: ConstraintMode,
    pub kappa_policy: KappaPolicy,
    pub beta: f64,
    pub delta_c: f64,
    pub total_cost: f64,
    /// Optional cap below `round(total_cost / delta_c)`.
    pub max_steps: Option<usize>,
    pub clamp_nonnegative: bool,
    pub fixed_total_risk: bool,
    pub steady_state_tol: f64,
    pub steady_state_window: usize,
}

pub const DEFAULT_STEADY_STATE_TOL: f64 = 1e-12;
pub const DEFAULT_STEADY_STATE_WINDOW: usize = 50;

impl ContinuationConfig {
    pub fn new(objective: ObjectiveKind, mode: ConstraintMode, kappa_policy: KappaPolicy) -> Self {
        ContinuationConfig {
            objective,
            mode,
            kappa_policy,
            beta: 0.95,
            delta_c: 1e-4,
            total_cost: 0.1,
            max_steps: None,
            clamp_nonnegative: true,
            fixed_total_risk: false,
            steady_state_tol: DEFAULT_STEADY_STATE_TOL,
            steady_state_window: DEFAULT_STEADY_STATE_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_c > 0.0 && self.delta_c.is_finite()) {
            return Err(Error::Config(format!("delta_c must be positive, got {}", self.delta_c)));
        }
        if !(self.total_cost >= 0.0 && self.total_cost.is_finite()) {
            return Err(Error::Config(format!(
                "total_cost must be non-negative, got {}",
                self.total_cost
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.steady_state_tol >= 0.0) || self.steady_state_window == 0 {
            return Err(Error::Config("steady-state tolerance/window invalid".into()));
        }
        self.mode.check_objective(self.objective)
    }

    /// `M`.
    pub fn steps(&self) -> usize {
        let budget = (self.total_cost / self.delta_c).round() as usize;
        self.max_steps.map_or(budget, |cap| cap.min(budget))
    }
}

/// One row of the optimization path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub step: usize,
    pub cost: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub q: f64,
    pub rate: f64,
    pub weights: Vec<f64>,
    pub cvar: f64,
    pub total_return: f64,
    pub revenue: f64,
    pub diversification_index: f64,
    pub return_to_risk: f64,
    pub cvar_rel: f64,
    pub return_rel: f64,
    pub revenue_rel: f64,
    pub di_rel: f64,
    pub re2ri_rel: f64,
    /// Groups clamped during this step.
    pub clamped: Vec<usize>,
    /// Groups frozen so far.
    pub frozen_count: usize,
    pub rescale_factor: f64,
    /// Whether the tail scenario set differs from the previous record's.
    pub tail_changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Budget,
    SteadyState,
    InfeasibleStep,
    AllClamped,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::SteadyState => "steady-state",
            Termination::InfeasibleStep => "infeasible-step",
            Termination::AllClamped => "all-clamped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationResult {
    pub records: Vec<PathRecord>,
    pub terminal: PortfolioState,
    pub reason: Termination,
    /// The step error behind an early stop, if any.
    pub error: Option<Error>,
}

impl ContinuationResult {
    pub fn last(&self) -> &PathRecord {
        self.records.last().expect("path has at least the initial record")
    }
}

fn relative(value: f64, initial: f64) -> f64 {
    if initial == 0.0 && value == 0.0 {
        1.0
    } else {
        value / initial
    }
}

struct Baseline {
    cvar: f64,
    total_return: f64,
    revenue: f64,
    di: f64,
    re2ri: f64,
}

impl Baseline {
    fn of(report: &RiskReport) -> Self {
        Baseline {
            cvar: report.cvar,
            total_return: report.total_return,
            revenue: report.revenue,
            di: report.diversification_index,
            re2ri: report.total_return_to_risk,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    step: usize,
    cost: f64,
    params: PathParams,
    q: f64,
    rate: f64,
    state: &PortfolioState,
    report: &RiskReport,
    base: &Baseline,
    clamped: Vec<usize>,
    rescale_factor: f64,
    previous_tail: Option<&TailSet>,
) -> PathRecord {
    PathRecord {
        step,
        cost,
        kappa1: params.kappa1,
        kappa2: params.kappa2,
        q,
        rate,
        weights: state.weights.clone(),
        cvar: report.cvar,
        total_return: report.total_return,
        revenue: report.revenue,
        diversification_index: report.diversification_index,
        return_to_risk: report.total_return_to_risk,
        cvar_rel: relative(report.cvar, base.cvar),
        return_rel: relative(report.total_return, base.total_return),
        revenue_rel: relative(report.revenue, base.revenue),
        di_rel: relative(report.diversification_index, base.di),
        re2ri_rel: relative(report.total_return_to_risk, base.re2ri),
        clamped,
        frozen_count: state.frozen.iter().filter(|&&f| f).count(),
        rescale_factor,
        tail_changed: previous_tail.is_some_and(|t| *t != report.tail),
    }
}

/// `w+ = w- + dc y` on unfrozen groups. With `clamp`, a weight that would
/// end at or below zero is set to exactly zero and frozen; without it only
/// an exact zero freezes. Returns the groups frozen by this step.
pub fn apply_step(state: &PortfolioState, y: &[f64], delta_c: f64, clamp: bool) -> (PortfolioState, Vec<usize>) {
    let mut next = state.clone();
    let mut clamped = Vec::new();
    for (n, &dy) in y.iter().enumerate().take(state.n_groups()) {
        if state.frozen[n] {
            next.weights[n] = 0.0;
            continue;
        }
        let w = state.weights[n] + delta_c * dy;
        if w == 0.0 || (clamp && w < 0.0) {
            next.weights[n] = 0.0;
            next.frozen[n] = true;
            clamped.push(n);
        } else {
            next.weights[n] = w;
        }
    }
    (next, clamped)
}

/// Scales every weight by `cvar_before / cvar_after`; by positive
/// homogeneity the rescaled portfolio carries `cvar_before` again.
pub fn rescale_fixed_risk(state: &PortfolioState, cvar_before: f64, cvar_after: f64) -> Result<(PortfolioState, f64)> {
    if !(cvar_after > 0.0) {
        return Err(Error::CannotRescale(cvar_after));
    }
    let factor = cvar_before / cvar_after;
    let mut next = state.clone();
    for w in &mut next.weights {
        *w *= factor;
    }
    Ok((next, factor))
}

fn expand(active: &[usize], y: &[f64], n: usize) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (&i, &v) in active.iter().zip(y) {
        full[i] = v;
    }
    full
}

/// Runs the full continuation from `state0`.
///
/// Step errors end the path early instead of failing the run: infeasible
/// rates, collinear constraints and degenerate extremum conditions report
/// [`Termination::InfeasibleStep`]; a vanishing projected gradient means the
/// state is already stationary and reports [`Termination::SteadyState`].
pub fn run(scenarios: &ScenarioMatrix, state0: &PortfolioState, config: &ContinuationConfig) -> Result<ContinuationResult> {
    config.validate()?;
    state0.validate()?;
    if state0.n_groups() != scenarios.n_groups() {
        return Err(Error::Structural(format!(
            "state has {} groups, scenarios {}",
            state0.n_groups(),
            scenarios.n_groups()
        )));
    }
    let table = build_losses(scenarios);
    let model = RiskModel::new(&table, config.beta)?;

    let mut state = state0.clone();
    let mut report = model.report(&state)?;
    let base = Baseline::of(&report);
    let mut records = vec![record(
        0,
        0.0,
        PathParams::default(),
        0.0,
        0.0,
        &state,
        &report,
        &base,
        Vec::new(),
        1.0,
        None,
    )];

    let mut reason = Termination::Budget;
    let mut error = None;
    let mut quiet_steps = 0;
    for m in 1..=config.steps() {
        if state.active_indices().is_empty() {
            reason = Termination::AllClamped;
            break;
        }
        let outcome = (|| {
            let coeffs = select_coefficients(config.objective, config.mode, &state, &report)?;
            let consts = constants(&coeffs);
            let params = match config.kappa_policy {
                KappaPolicy::Fixed(p) => p,
                KappaPolicy::Extremum { fixed_revenue, fixed_second } => {
                    extremum_kappas(&consts, config.mode, fixed_revenue, fixed_second, coeffs.direction)?
                        .params()
                }
            };
            let solution = solve_step(&consts, &coeffs, config.mode, params, coeffs.direction)?;
            Ok((coeffs, params, solution))
        })();
        let (coeffs, params, solution) = match outcome {
            Ok(v) => v,
            Err(e) => {
                reason = match e {
                    Error::ZeroGradient { .. } => Termination::SteadyState,
                    _ => Termination::InfeasibleStep,
                };
                error = Some(e);
                break;
            }
        };

        let y = expand(&coeffs.active, &solution.y, state.n_groups());
        let (mut next, clamped) = apply_step(&state, &y, config.delta_c, config.clamp_nonnegative);
        if next.active_indices().is_empty() {
            state = next;
            report = model.report(&state)?;
            records.push(record(
                m,
                m as f64 * config.delta_c,
                params,
                solution.q,
                solution.rate,
                &state,
                &report,
                &base,
                clamped,
                1.0,
                records.last().map(|_| &report.tail),
            ));
            reason = Termination::AllClamped;
            break;
        }
        let mut next_report = model.report(&next)?;
        let mut factor = 1.0;
        if config.fixed_total_risk {
            let (scaled, f) = rescale_fixed_risk(&next, report.cvar, next_report.cvar)?;
            next = scaled;
            factor = f;
            next_report = model.report(&next)?;
        }

        let change = (next_report.cvar - report.cvar).abs() / report.cvar.abs();
        let previous_tail = std::mem::replace(&mut report, next_report).tail;
        state = next;
        records.push(record(
            m,
            m as f64 * config.delta_c,
            params,
            solution.q,
            solution.rate,
            &state,
            &report,
            &base,
            clamped,
            factor,
            Some(&previous_tail),
        ));

        // rescaling pins CVaR, so a quiet CVaR says nothing about the path
        if !config.fixed_total_risk && change < config.steady_state_tol {
            quiet_steps += 1;
            if quiet_steps >= config.steady_state_window {
                reason = Termination::SteadyState;
                break;
            }
        } else {
            quiet_steps = 0;
        }
    }

    Ok(ContinuationResult {
        records,
        terminal: state,
        reason,
        error,
    })
}

/// One row of a step-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub delta_c: f64,
    pub steps: usize,
    pub terminal_cvar_rel: Option<f64>,
    /// `|rel - rel_reference|`; the reference row has zero error.
    pub error: Option<f64>,
    pub reason: Option<Termination>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log dc`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Mean absolute residual of the log-log fit.
    pub residual: Option<f64>,
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept, mean |residual|)`.
/// `None` when fewer than two points have positive coordinates.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let points: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).abs())
        .sum::<f64>()
        / n;
    Some((slope, intercept, residual))
}

/// Re-runs the continuation for each step size to the same total cost and
/// measures the terminal relative CVaR against the finest run. Runs execute
/// on separate threads.
pub fn convergence_study(
    scenarios: &ScenarioMatrix,
    state0: &PortfolioState,
    base_config: &ContinuationConfig,
    delta_c_list: &[f64],
    total_cost: f64,
) -> Result<ConvergenceTable> {
    if delta_c_list.len() < 3 {
        return Err(Error::Config("convergence study needs at least 3 step sizes".into()));
    }
    if delta_c_list.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("step sizes must be sorted descending".into()));
    }
    let outcomes: Vec<Result<ContinuationResult>> = thread::scope(|scope| {
        let handles: Vec<_> = delta_c_list
            .iter()
            .map(|&dc| {
                let mut config = base_config.clone();
                config.delta_c = dc;
                config.total_cost = total_cost;
                scope.spawn(move || run(scenarios, state0, &config))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("continuation thread panicked"))
            .collect()
    });

    let reference = outcomes
        .last()
        .and_then(|r| r.as_ref().ok())
        .map(|r| r.last().cvar_rel);
    let rows: Vec<ConvergenceRow> = delta_c_list
        .iter()
        .zip(&outcomes)
        .map(|(&delta_c, outcome)| match outcome {
            Ok(result) => {
                let rel = result.last().cvar_rel;
                ConvergenceRow {
                    delta_c,
                    steps: result.records.len() - 1,
                    terminal_cvar_rel: Some(rel),
                    error: reference.map(|r| (rel - r).abs()),
                    reason: Some(result.reason),
                    failure: None,
                }
            }
            Err(e) => ConvergenceRow {
                delta_c,
                steps: 0,
                terminal_cvar_rel: None,
                error: None,
                reason: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.error.map(|e| (r.delta_c, e)))
        .unzip();
    let fit = fit_log_log(&xs, &ys);
    Ok(ConvergenceTable {
        rows,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        residual: fit.map(|f| f.2),
    })
}
