//! Discrete loss distributions and the CVaR family of risk measures.
//!
//! Losses at a weight vector are obtained by rescaling the recorded scenario
//! columns by `w / w_base`; the shape of each group's distribution is never
//! regenerated.  Tail quantities are computed over merged atoms (equal loss
//! values) so that a confidence level falling inside an atom splits its mass
//! pro-rata across the tied scenarios.

use crate::error::{Error, Result};

/// Slack applied when comparing cumulative probabilities against `beta`.
pub const PROB_TOL: f64 = 1e-13;

/// Maximum deviation of `sum(e_k)` from one accepted by [`ScenarioMatrix::new`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// K scenarios of N asset-group values, the initial allocation and the
/// scenario likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    group_ids: Vec<String>,
    initial_values: Vec<f64>,
    /// Row-major K x N.
    values: Vec<f64>,
    probabilities: Vec<f64>,
}

impl ScenarioMatrix {
    pub fn new(
        group_ids: Vec<String>,
        initial_values: Vec<f64>,
        values: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        let n = initial_values.len();
        if n < 2 {
            return Err(Error::Structural(format!("need at least 2 groups, got {n}")));
        }
        if group_ids.len() != n {
            return Err(Error::Structural(format!(
                "{} group ids for {n} groups",
                group_ids.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::Structural("no scenarios".into()));
        }
        if probabilities.len() != values.len() {
            return Err(Error::Structural(format!(
                "{} probabilities for {} scenarios",
                probabilities.len(),
                values.len()
            )));
        }
        for (n_idx, &x0) in initial_values.iter().enumerate() {
            if !(x0.is_finite() && x0 > 0.0) {
                return Err(Error::Domain(format!(
                    "initial value of group {n_idx} must be positive, got {x0}"
                )));
            }
        }
        let mut flat = Vec::with_capacity(values.len() * n);
        for (k, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!(
                    "scenario {k} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("scenario {k} has non-finite value {bad}")));
            }
            flat.extend_from_slice(row);
        }
        check_probabilities(&probabilities)?;
        let matrix = ScenarioMatrix {
            group_ids,
            initial_values,
            values: flat,
            probabilities,
        };
        if matrix.columns_identical() {
            return Err(Error::DegeneratePortfolio(
                "all scenario columns are identical".into(),
            ));
        }
        Ok(matrix)
    }

    /// Equal-likelihood constructor, `e_k = 1/K`.
    pub fn with_equal_probabilities(
        group_ids: Vec<String>,
        initial_values: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = values.len().max(1);
        Self::new(group_ids, initial_values, values, vec![1.0 / k as f64; k])
    }

    fn columns_identical(&self) -> bool {
        let n = self.n_groups();
        (1..n).all(|j| {
            self.initial_values[j] == self.initial_values[0]
                && (0..self.n_scenarios()).all(|k| self.value(k, j) == self.value(k, 0))
        })
    }

    pub fn n_groups(&self) -> usize {
        self.initial_values.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.initial_values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn value(&self, k: usize, n: usize) -> f64 {
        self.values[k * self.n_groups() + n]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.n_groups();
        &self.values[k * n..(k + 1) * n]
    }

    /// Total initial portfolio value `X_0`.
    pub fn base_value(&self) -> f64 {
        self.initial_values.iter().sum()
    }

    /// Initial weights `X_0^(n) / X_0`.
    pub fn base_weights(&self) -> Vec<f64> {
        let total = self.base_value();
        self.initial_values.iter().map(|x| x / total).collect()
    }
}

fn check_probabilities(probabilities: &[f64]) -> Result<()> {
    for (k, &p) in probabilities.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Domain(format!(
                "probability of scenario {k} must be positive, got {p}"
            )));
        }
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::Domain(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// Per-group losses `Z_k^(n) = X_0^(n) - X_k^(n)` with their likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    n_groups: usize,
    /// Row-major K x N.
    losses: Vec<f64>,
    probabilities: Vec<f64>,
}

impl LossTable {
    /// Builds a table directly from loss rows. Unlike [`ScenarioMatrix`] a
    /// single group is allowed here.
    pub fn new(rows: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if n == 0 {
            return Err(Error::Structural("empty loss table".into()));
        }
        if rows.len() != probabilities.len() {
            return Err(Error::Structural(format!(
                "{} probabilities for {} scenarios",
                probabilities.len(),
                rows.len()
            )));
        }
        let mut losses = Vec::with_capacity(rows.len() * n);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!(
                    "scenario {k} has {} losses, expected {n}",
                    row.len()
                )));
            }
            losses.extend_from_slice(row);
        }
        check_probabilities(&probabilities)?;
        Ok(LossTable {
            n_groups: n,
            losses,
            probabilities,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn loss(&self, k: usize, n: usize) -> f64 {
        self.losses[k * self.n_groups + n]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.losses[k * self.n_groups..(k + 1) * self.n_groups]
    }

    /// Column `n` scaled by `scale`, one entry per scenario.
    pub fn column_scaled(&self, n: usize, scale: f64) -> Vec<f64> {
        (0..self.n_scenarios()).map(|k| scale * self.loss(k, n)).collect()
    }
}

pub fn build_losses(scenarios: &ScenarioMatrix) -> LossTable {
    let n = scenarios.n_groups();
    let mut losses = Vec::with_capacity(scenarios.values.len());
    for k in 0..scenarios.n_scenarios() {
        for (x0, xk) in scenarios.initial_values.iter().zip(scenarios.row(k)) {
            losses.push(x0 - xk);
        }
    }
    LossTable {
        n_groups: n,
        losses,
        probabilities: scenarios.probabilities.clone(),
    }
}

/// Weights, returns and adjustment costs of the portfolio at one point of
/// the optimization path.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioState {
    pub weights: Vec<f64>,
    pub returns: Vec<f64>,
    pub cost_coefficients: Vec<f64>,
    pub base_value: f64,
    /// Weights at which the scenario matrix was recorded.
    pub base_weights: Vec<f64>,
    /// Groups clamped at zero weight; they are excluded from every later step.
    pub frozen: Vec<bool>,
}

/// Smallest accepted `min c / max c`.
pub const MIN_COST_RATIO: f64 = 1e-6;

impl PortfolioState {
    /// Initial state of a scenario matrix: weights equal the recorded
    /// allocation fractions.
    pub fn initial(
        scenarios: &ScenarioMatrix,
        returns: Vec<f64>,
        cost_coefficients: Vec<f64>,
    ) -> Result<Self> {
        let base_weights = scenarios.base_weights();
        let state = PortfolioState {
            weights: base_weights.clone(),
            returns,
            cost_coefficients,
            base_value: scenarios.base_value(),
            frozen: vec![false; base_weights.len()],
            base_weights,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        for (name, len) in [
            ("returns", self.returns.len()),
            ("cost coefficients", self.cost_coefficients.len()),
            ("base weights", self.base_weights.len()),
            ("frozen flags", self.frozen.len()),
        ] {
            if len != n {
                return Err(Error::Structural(format!("{len} {name} for {n} groups")));
            }
        }
        if !(self.base_value.is_finite() && self.base_value > 0.0) {
            return Err(Error::Domain(format!(
                "base value must be positive, got {}",
                self.base_value
            )));
        }
        if let Some(i) = self.base_weights.iter().position(|&w| w == 0.0 || !w.is_finite()) {
            return Err(Error::DegenerateState(format!(
                "base weight of group {i} is {}",
                self.base_weights[i]
            )));
        }
        for i in 0..n {
            if !self.frozen[i] && self.weights[i] == 0.0 {
                return Err(Error::DegenerateState(format!(
                    "unfrozen group {i} has zero weight"
                )));
            }
        }
        let mut min_c = f64::INFINITY;
        let mut max_c = 0.0_f64;
        for (i, &c) in self.cost_coefficients.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Domain(format!(
                    "cost coefficient of group {i} must be positive, got {c}"
                )));
            }
            min_c = min_c.min(c);
            max_c = max_c.max(c);
        }
        if min_c / max_c < MIN_COST_RATIO {
            return Err(Error::Domain(format!(
                "cost coefficients not comparable: min/max = {:e}",
                min_c / max_c
            )));
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.weights.len()
    }

    /// Total return `r = sum r^(n) w^(n)`.
    pub fn total_return(&self) -> f64 {
        self.returns.iter().zip(&self.weights).map(|(r, w)| r * w).sum()
    }

    /// Total revenue `sum w^(n)`, one at the initial state.
    pub fn revenue(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.n_groups()).filter(|&i| !self.frozen[i]).collect()
    }

    /// Column scale factors `w / w_base`.
    pub fn scales(&self) -> Result<Vec<f64>> {
        self.weights
            .iter()
            .zip(&self.base_weights)
            .enumerate()
            .map(|(i, (w, wb))| {
                if *wb == 0.0 {
                    Err(Error::DegenerateState(format!("base weight of group {i} is zero")))
                } else {
                    Ok(w / wb)
                }
            })
            .collect()
    }
}

/// Confidence level `beta` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..1.0).contains(&beta) {
            Ok(ConfidenceLevel(beta))
        } else {
            Err(Error::Domain(format!("confidence level must lie in [0, 1), got {beta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Probability mass each scenario carries into the tail, ascending by
/// scenario index. The masses sum to `1 - beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSet {
    pub entries: Vec<(usize, f64)>,
}

impl TailSet {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(k, _)| k)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }
}

/// VaR, CVaR and the atom-split tail of one discrete loss distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TailMeasure {
    pub beta: f64,
    pub var: f64,
    pub cvar: f64,
    /// `P(Z < VaR)`.
    pub beta_star: f64,
    /// `P(Z <= VaR)`.
    pub beta_star_closed: f64,
    pub tail: TailSet,
}

fn check_distribution(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::Structural("empty loss vector".into()));
    }
    if losses.len() != probabilities.len() {
        return Err(Error::Structural(format!(
            "{} losses for {} probabilities",
            losses.len(),
            probabilities.len()
        )));
    }
    if let Some(bad) = losses.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite loss {bad}")));
    }
    ConfidenceLevel::new(beta)?;
    Ok(())
}

/// Full tail analysis. Atoms are formed from exactly equal loss values;
/// within the VaR atom the fractional mass `P(Z <= VaR) - beta` is shared
/// pro-rata by probability.
pub fn tail_measure(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<TailMeasure> {
    check_distribution(losses, probabilities, beta)?;

    // sorting (loss, index) pairs keeps the comparisons out of the losses array
    let mut keyed: Vec<(f64, usize)> = losses.iter().copied().zip(0..).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, k)| k).collect();

    let mut below = 0.0;
    let mut start = 0;
    loop {
        let value = losses[order[start]];
        let mut end = start;
        let mut atom_mass = 0.0;
        while end < order.len() && losses[order[end]] == value {
            atom_mass += probabilities[order[end]];
            end += 1;
        }
        let closed = below + atom_mass;
        if closed >= beta - PROB_TOL || end == order.len() {
            // masses above VaR summed from the top stay accurate when 1 - beta
            // is small, where P(Z <= VaR) - beta would cancel
            let upper: f64 = order[end..].iter().rev().map(|&k| probabilities[k]).sum();
            let atom_tail = ((1.0 - beta) - upper).clamp(0.0, atom_mass);
            let split = atom_tail / atom_mass;
            let mut in_tail = vec![false; losses.len()];
            for &k in &order[start..] {
                in_tail[k] = true;
            }
            let entries: Vec<(usize, f64)> = (0..losses.len())
                .filter(|&k| in_tail[k])
                .map(|k| {
                    let mass = if losses[k] == value {
                        probabilities[k] * split
                    } else {
                        probabilities[k]
                    };
                    (k, mass)
                })
                .filter(|&(_, m)| m != 0.0)
                .collect();
            // CVaR = (E[Z; Z > VaR] + (P(Z <= VaR) - beta) VaR) / (1 - beta)
            let above: f64 = order[end..].iter().rev().map(|&k| losses[k] * probabilities[k]).sum();
            let cvar = (above + atom_tail * value) / (1.0 - beta);
            return Ok(TailMeasure {
                beta,
                var: value,
                cvar,
                beta_star: below,
                beta_star_closed: closed,
                tail: TailSet { entries },
            });
        }
        below = closed;
        start = end;
    }
}

/// `inf { Y : P(Z <= Y) >= beta }`.
pub fn var(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<f64> {
    tail_measure(losses, probabilities, beta).map(|t| t.var)
}

pub fn cvar(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<f64> {
    tail_measure(losses, probabilities, beta).map(|t| t.cvar)
}

/// Total portfolio loss per scenario, `sum_n (w/w_base)^(n) Z_k^(n)`.
pub fn portfolio_losses(table: &LossTable, state: &PortfolioState) -> Result<Vec<f64>> {
    if state.n_groups() != table.n_groups() {
        return Err(Error::Structural(format!(
            "state has {} groups, loss table {}",
            state.n_groups(),
            table.n_groups()
        )));
    }
    let scales = state.scales()?;
    Ok(losses_with_scales(table, &scales))
}

fn losses_with_scales(table: &LossTable, scales: &[f64]) -> Vec<f64> {
    (0..table.n_scenarios())
        .map(|k| table.row(k).iter().zip(scales).map(|(z, s)| s * z).sum())
        .collect()
}

/// Per-unit-weight tail averages `sum_k m_k Z_k^(n) / (w_base^(n) (1 - beta))`.
fn tail_derivatives(table: &LossTable, base_weights: &[f64], tail: &TailSet, beta: f64) -> Vec<f64> {
    let mut acc = vec![0.0; table.n_groups()];
    for &(k, mass) in &tail.entries {
        for (a, z) in acc.iter_mut().zip(table.row(k)) {
            *a += mass * z;
        }
    }
    acc.iter()
        .zip(base_weights)
        .map(|(a, wb)| a / wb / (1.0 - beta))
        .collect()
}

/// Euler allocation of portfolio CVaR over the same atom-split tail that
/// defines the CVaR itself; the entries sum to the portfolio CVaR.
pub fn risk_contributions(table: &LossTable, state: &PortfolioState, beta: f64) -> Result<Vec<f64>> {
    let losses = portfolio_losses(table, state)?;
    let measure = tail_measure(&losses, table.probabilities(), beta)?;
    let scales = state.scales()?;
    let mut acc = vec![0.0; table.n_groups()];
    for &(k, mass) in &measure.tail.entries {
        for ((a, z), s) in acc.iter_mut().zip(table.row(k)).zip(&scales) {
            *a += mass * s * z;
        }
    }
    Ok(acc.into_iter().map(|a| a / (1.0 - beta)).collect())
}

/// `contribution / w`; groups with zero weight carry no derivative here.
pub fn dar(contributions: &[f64], weights: &[f64]) -> Vec<Option<f64>> {
    contributions
        .iter()
        .zip(weights)
        .map(|(c, &w)| if w == 0.0 { None } else { Some(c / w) })
        .collect()
}

/// CVaR of group `n` held alone at its current weight.
pub fn standalone_cvar(table: &LossTable, state: &PortfolioState, n: usize, beta: f64) -> Result<f64> {
    if n >= table.n_groups() {
        return Err(Error::Structural(format!("group index {n} out of range")));
    }
    let scale = state.scales()?[n];
    cvar(&table.column_scaled(n, scale), table.probabilities(), beta)
}

/// Everything the optimizer needs to know about the risk of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub var: f64,
    pub cvar: f64,
    pub contributions: Vec<f64>,
    /// Derivative of CVaR with respect to each weight (piecewise constant).
    pub dar: Vec<f64>,
    pub standalone_cvar: Vec<f64>,
    pub diversification_index: f64,
    /// `r = sum r^(n) w^(n)`.
    pub total_return: f64,
    /// `sum w^(n)`.
    pub revenue: f64,
    pub total_return_to_risk: f64,
    pub group_return_to_risk: Vec<f64>,
    pub tail: TailSet,
    /// Frozen groups; their DaR is reported but they take no part in steps.
    pub excluded: Vec<usize>,
}

/// Loss table bound to a confidence level, with the base-weight standalone
/// CVaR of every column cached.
#[derive(Debug, Clone)]
pub struct RiskModel<'a> {
    table: &'a LossTable,
    beta: f64,
    base_standalone: Vec<f64>,
}

impl<'a> RiskModel<'a> {
    pub fn new(table: &'a LossTable, beta: f64) -> Result<Self> {
        ConfidenceLevel::new(beta)?;
        let base_standalone = (0..table.n_groups())
            .map(|n| cvar(&table.column_scaled(n, 1.0), table.probabilities(), beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(RiskModel {
            table,
            beta,
            base_standalone,
        })
    }

    pub fn table(&self) -> &LossTable {
        self.table
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn portfolio_cvar(&self, state: &PortfolioState) -> Result<f64> {
        let losses = portfolio_losses(self.table, state)?;
        cvar(&losses, self.table.probabilities(), self.beta)
    }

    pub fn report(&self, state: &PortfolioState) -> Result<RiskReport> {
        let losses = portfolio_losses(self.table, state)?;
        let measure = tail_measure(&losses, self.table.probabilities(), self.beta)?;
        let dar = tail_derivatives(self.table, &state.base_weights, &measure.tail, self.beta);
        let contributions: Vec<f64> = dar.iter().zip(&state.weights).map(|(d, w)| d * w).collect();

        let scales = state.scales()?;
        let standalone = scales
            .iter()
            .enumerate()
            .map(|(n, &s)| {
                if s > 0.0 {
                    Ok(s * self.base_standalone[n])
                } else if s == 0.0 {
                    Ok(0.0)
                } else {
                    // CVaR is not odd in the scale; re-sort the negated column.
                    cvar(&self.table.column_scaled(n, s), self.table.probabilities(), self.beta)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let standalone_sum: f64 = standalone.iter().sum();
        if !(standalone_sum > 0.0) {
            return Err(Error::DegeneratePortfolio(format!(
                "sum of standalone CVaR is {standalone_sum:e}"
            )));
        }

        let total_return = state.total_return();
        let group_return_to_risk = (0..state.n_groups())
            .map(|n| {
                if state.weights[n] != 0.0 {
                    state.returns[n] * state.weights[n] * state.base_value / standalone[n]
                } else {
                    // degree-zero homogeneous: evaluate at the base weight
                    state.returns[n] * state.base_weights[n] * state.base_value
                        / self.base_standalone[n]
                }
            })
            .collect();

        Ok(RiskReport {
            var: measure.var,
            cvar: measure.cvar,
            contributions,
            dar,
            diversification_index: measure.cvar / standalone_sum,
            standalone_cvar: standalone,
            total_return,
            revenue: state.revenue(),
            total_return_to_risk: total_return * state.base_value / measure.cvar,
            group_return_to_risk,
            tail: measure.tail,
            excluded: (0..state.n_groups()).filter(|&i| state.frozen[i]).collect(),
        })
    }
}

pub fn report(table: &LossTable, state: &PortfolioState, beta: f64) -> Result<RiskReport> {
    RiskModel::new(table, beta)?.report(state)
}
