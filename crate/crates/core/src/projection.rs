//! Closed-form single-step optimization on the unit cost ellipsoid.
//!
//! One step maximizes (or minimizes) the linear rate `Q = sum f y` over
//! directions `y = dw/dc` subject to `sum c^2 y^2 = 1` and up to two linear
//! rate constraints: `sum y = kappa1` (revenue) and `sum h y = kappa2`
//! (return or risk). Stationarity gives `y = (f - s - h t) / (q c^2)`; the
//! revenue/second multipliers are linear in `q`, and the cost constraint
//! reduces to `a2 q^2 + a0 = 0` with no linear term.
//!
//! All sums are weighted inner products `<a, b> = sum a b / c^2` taken over
//! the active (unfrozen) groups in ascending index order.

use crate::error::{Error, Result};
use crate::risk::{PortfolioState, RiskReport};

/// Relative size below which `UW - V^2` counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-14;
/// `|a2|` must exceed this for a real, well-conditioned multiplier.
pub const A2_TOL: f64 = 1e-14;
/// Relative size (against `<f, f>`) below which `a0` counts as zero.
pub const A0_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    MinRisk,
    MaxReturn,
    MaxReturnToRisk,
    MinDiversification,
}

impl ObjectiveKind {
    pub fn direction(self) -> Direction {
        match self {
            ObjectiveKind::MinRisk | ObjectiveKind::MinDiversification => Direction::Minimize,
            ObjectiveKind::MaxReturn | ObjectiveKind::MaxReturnToRisk => Direction::Maximize,
        }
    }
}

/// What the second linear constraint holds fixed (to first order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondConstraint {
    Return,
    Risk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    Both(SecondConstraint),
    RevenueOnly,
    SecondOnly(SecondConstraint),
    NoneActive,
}

impl ConstraintMode {
    pub fn revenue_active(self) -> bool {
        matches!(self, ConstraintMode::Both(_) | ConstraintMode::RevenueOnly)
    }

    pub fn second(self) -> Option<SecondConstraint> {
        match self {
            ConstraintMode::Both(s) | ConstraintMode::SecondOnly(s) => Some(s),
            _ => None,
        }
    }

    /// Number of linear constraints besides the cost ellipsoid.
    pub fn linear_count(self) -> usize {
        usize::from(self.revenue_active()) + usize::from(self.second().is_some())
    }

    /// Rejects the pairs that would constrain the objective itself.
    pub fn check_objective(self, objective: ObjectiveKind) -> Result<()> {
        match (objective, self.second()) {
            (ObjectiveKind::MaxReturn, Some(SecondConstraint::Return)) => Err(Error::Config(
                "max-return cannot also constrain the total return".into(),
            )),
            (ObjectiveKind::MinRisk, Some(SecondConstraint::Risk)) => Err(Error::Config(
                "min-risk cannot also constrain the total risk".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Objective gradient `f`, second-constraint gradient `h` and cost
/// coefficients `c`, restricted to the active groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub f: Vec<f64>,
    pub h: Option<Vec<f64>>,
    pub c: Vec<f64>,
    /// Group index of each entry.
    pub active: Vec<usize>,
    pub direction: Direction,
}

impl Coefficients {
    /// Coefficients over groups `0..f.len()`.
    pub fn new(f: Vec<f64>, h: Option<Vec<f64>>, c: Vec<f64>, direction: Direction) -> Result<Self> {
        let active = (0..f.len()).collect();
        let coeffs = Coefficients { f, h, c, active, direction };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.f.len();
        if self.c.len() != n || self.active.len() != n {
            return Err(Error::Structural("coefficient lengths differ".into()));
        }
        if let Some(h) = &self.h {
            if h.len() != n {
                return Err(Error::Structural("coefficient lengths differ".into()));
            }
        }
        if let Some(c) = self.c.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("cost coefficient must be positive, got {c}")));
        }
        Ok(())
    }
}

/// Gradient rows of the objective table, evaluated at the current state.
pub fn select_coefficients(
    objective: ObjectiveKind,
    mode: ConstraintMode,
    state: &PortfolioState,
    report: &RiskReport,
) -> Result<Coefficients> {
    mode.check_objective(objective)?;
    let active = state.active_indices();
    let x0 = state.base_value;
    let returns: Vec<f64> = active.iter().map(|&n| state.returns[n]).collect();
    let risk: Vec<f64> = active.iter().map(|&n| report.dar[n] / x0).collect();

    let (f, direction) = match (objective, mode.second()) {
        (ObjectiveKind::MaxReturn, _) => (returns.clone(), Direction::Maximize),
        (ObjectiveKind::MinRisk, _) => (risk.clone(), Direction::Minimize),
        // Ratio with risk held: raise the return. Ratio with return held: cut the risk.
        (ObjectiveKind::MaxReturnToRisk, Some(SecondConstraint::Risk)) => {
            (returns.clone(), Direction::Maximize)
        }
        (ObjectiveKind::MaxReturnToRisk, Some(SecondConstraint::Return)) => {
            (risk.clone(), Direction::Minimize)
        }
        (ObjectiveKind::MaxReturnToRisk, None) => {
            let cvar = report.cvar;
            if !(cvar > 0.0) {
                return Err(Error::DegeneratePortfolio(format!(
                    "return-to-risk gradient needs positive CVaR, got {cvar:e}"
                )));
            }
            let r = report.total_return;
            let f = active
                .iter()
                .map(|&n| (state.returns[n] - r * report.dar[n] / cvar) * x0 / cvar)
                .collect();
            (f, Direction::Maximize)
        }
        (ObjectiveKind::MinDiversification, _) => {
            let cvar = report.cvar;
            let total: f64 = report.standalone_cvar.iter().sum();
            if !(total > 0.0) || cvar == 0.0 {
                return Err(Error::DegeneratePortfolio(format!(
                    "diversification gradient needs positive risk, got CVaR {cvar:e}, standalone sum {total:e}"
                )));
            }
            // d/dw [CVaR / sum_n CVaR(X^(n))], each standalone term is 1-homogeneous in its weight
            let f = active
                .iter()
                .map(|&n| {
                    let standalone_rate = report.standalone_cvar[n] / state.weights[n];
                    report.dar[n] / total - cvar * standalone_rate / (total * total)
                })
                .collect();
            (f, Direction::Minimize)
        }
    };
    let h = mode.second().map(|s| match s {
        SecondConstraint::Return => returns,
        SecondConstraint::Risk => risk,
    });
    let c = active.iter().map(|&n| state.cost_coefficients[n]).collect();
    let coeffs = Coefficients { f, h, c, active, direction };
    coeffs.validate()?;
    Ok(coeffs)
}

/// The six weighted inner products of `f`, `h` and the ones vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConstants {
    /// `<f, f>`
    pub ff: f64,
    /// `<f, 1>`
    pub f1: f64,
    /// `<f, h>`
    pub fh: f64,
    /// `<1, 1>`
    pub one: f64,
    /// `<h, 1>`
    pub h1: f64,
    /// `<h, h>`
    pub hh: f64,
}

impl StepConstants {
    /// `UW - V^2`, the Gram determinant of the two constraint gradients.
    pub fn gram(&self) -> f64 {
        self.one * self.hh - self.h1 * self.h1
    }

    /// `a0` of the two-constraint branch.
    pub fn a0_both(&self) -> f64 {
        self.ff
            - (self.fh * self.fh * self.one + self.f1 * self.f1 * self.hh
                - 2.0 * self.f1 * self.fh * self.h1)
                / self.gram()
    }

    /// `UF - G^2`, `WF - H^2`; non-negative by Cauchy-Schwarz.
    pub fn revenue_residual(&self) -> f64 {
        self.one * self.ff - self.f1 * self.f1
    }

    pub fn second_residual(&self) -> f64 {
        self.hh * self.ff - self.fh * self.fh
    }
}

pub fn constants(coeffs: &Coefficients) -> StepConstants {
    let mut k = StepConstants {
        ff: 0.0,
        f1: 0.0,
        fh: 0.0,
        one: 0.0,
        h1: 0.0,
        hh: 0.0,
    };
    for i in 0..coeffs.len() {
        let inv = 1.0 / (coeffs.c[i] * coeffs.c[i]);
        let f = coeffs.f[i];
        k.ff += f * f * inv;
        k.f1 += f * inv;
        k.one += inv;
        if let Some(h) = &coeffs.h {
            let h = h[i];
            k.fh += f * h * inv;
            k.h1 += h * inv;
            k.hh += h * h * inv;
        }
    }
    k
}

/// Path rates `(kappa1, kappa2) = (d alpha / dc, d gamma / dc)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathParams {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl PathParams {
    pub fn new(kappa1: f64, kappa2: f64) -> Self {
        PathParams { kappa1, kappa2 }
    }
}

/// `y = homogeneous / q + offset`: the direction split by its dependence on
/// the cost multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionParts {
    pub homogeneous: Vec<f64>,
    pub offset: Vec<f64>,
}

/// Multipliers as affine functions of `q`: `s = s_q q + s_0`, `t = t_q q + t_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AffineMultipliers {
    s_q: f64,
    s_0: f64,
    t_q: f64,
    t_0: f64,
}

fn check_mode(coeffs: &Coefficients, mode: ConstraintMode) -> Result<()> {
    if mode.second().is_some() && coeffs.h.is_none() {
        return Err(Error::Structural(
            "constraint mode needs a second-constraint gradient".into(),
        ));
    }
    if coeffs.is_empty() {
        return Err(Error::DegenerateState("no active groups".into()));
    }
    Ok(())
}

fn affine_multipliers(
    k: &StepConstants,
    mode: ConstraintMode,
    params: PathParams,
) -> Result<AffineMultipliers> {
    let PathParams { kappa1, kappa2 } = params;
    Ok(match mode {
        ConstraintMode::Both(_) => {
            let gram = k.gram();
            if !(gram > COLLINEAR_TOL * k.one * k.hh) {
                return Err(Error::CollinearConstraints { gap: gram });
            }
            AffineMultipliers {
                s_q: (kappa2 * k.h1 - kappa1 * k.hh) / gram,
                s_0: (k.f1 * k.hh - k.fh * k.h1) / gram,
                t_q: (kappa1 * k.h1 - kappa2 * k.one) / gram,
                t_0: (k.fh * k.one - k.f1 * k.h1) / gram,
            }
        }
        ConstraintMode::RevenueOnly => AffineMultipliers {
            s_q: -kappa1 / k.one,
            s_0: k.f1 / k.one,
            t_q: 0.0,
            t_0: 0.0,
        },
        ConstraintMode::SecondOnly(_) => {
            if !(k.hh > 0.0) {
                return Err(Error::CollinearConstraints { gap: k.hh });
            }
            AffineMultipliers {
                s_q: 0.0,
                s_0: 0.0,
                t_q: -kappa2 / k.hh,
                t_0: k.fh / k.hh,
            }
        }
        ConstraintMode::NoneActive => AffineMultipliers {
            s_q: 0.0,
            s_0: 0.0,
            t_q: 0.0,
            t_0: 0.0,
        },
    })
}

/// Splits the stationary direction into its `1/q` and constant parts.
pub fn direction_parts(
    consts: &StepConstants,
    coeffs: &Coefficients,
    mode: ConstraintMode,
    params: PathParams,
) -> Result<DirectionParts> {
    parts_and_multipliers(consts, coeffs, mode, params).map(|(parts, _)| parts)
}

/// When `f` lies almost in the span of the constraint gradients the
/// homogeneous part is a small difference of large terms, so it is projected
/// once more onto the constraint null space and the multipliers absorb the
/// correction.
fn parts_and_multipliers(
    consts: &StepConstants,
    coeffs: &Coefficients,
    mode: ConstraintMode,
    params: PathParams,
) -> Result<(DirectionParts, AffineMultipliers)> {
    check_mode(coeffs, mode)?;
    let k = consts;
    let mut m = affine_multipliers(consts, mode, params)?;
    let h_at = |i: usize| coeffs.h.as_ref().map_or(0.0, |h| h[i]);
    let c2: Vec<f64> = coeffs.c.iter().map(|c| c * c).collect();
    let mut homogeneous: Vec<f64> = (0..coeffs.len())
        .map(|i| (coeffs.f[i] - m.s_0 - h_at(i) * m.t_0) / c2[i])
        .collect();
    let offset: Vec<f64> = (0..coeffs.len())
        .map(|i| -(m.s_q + h_at(i) * m.t_q) / c2[i])
        .collect();

    let r1: f64 = homogeneous.iter().sum();
    let r2: f64 = homogeneous.iter().enumerate().map(|(i, y)| h_at(i) * y).sum();
    let (ds, dt) = match mode {
        ConstraintMode::Both(_) => {
            let gram = k.gram();
            ((k.hh * r1 - k.h1 * r2) / gram, (k.one * r2 - k.h1 * r1) / gram)
        }
        ConstraintMode::RevenueOnly => (r1 / k.one, 0.0),
        ConstraintMode::SecondOnly(_) => (0.0, r2 / k.hh),
        ConstraintMode::NoneActive => (0.0, 0.0),
    };
    for (i, y) in homogeneous.iter_mut().enumerate() {
        *y -= (ds + dt * h_at(i)) / c2[i];
    }
    m.s_0 += ds;
    m.t_0 += dt;
    Ok((DirectionParts { homogeneous, offset }, m))
}

/// `(a0, a2)` of `a2 q^2 + a0 = 0` for the mode.
pub fn quadratic_coefficients(
    consts: &StepConstants,
    mode: ConstraintMode,
    params: PathParams,
) -> (f64, f64) {
    let k = consts;
    let PathParams { kappa1, kappa2 } = params;
    match mode {
        ConstraintMode::Both(_) => (
            k.a0_both(),
            (k.one * kappa2 * kappa2 + k.hh * kappa1 * kappa1 - 2.0 * k.h1 * kappa1 * kappa2)
                / k.gram()
                - 1.0,
        ),
        ConstraintMode::RevenueOnly => (k.ff - k.f1 * k.f1 / k.one, kappa1 * kappa1 / k.one - 1.0),
        ConstraintMode::SecondOnly(_) => (k.ff - k.fh * k.fh / k.hh, kappa2 * kappa2 / k.hh - 1.0),
        ConstraintMode::NoneActive => (k.ff, -1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    /// `dw/dc` over the active groups.
    pub y: Vec<f64>,
    /// Cost multiplier.
    pub q: f64,
    /// Revenue multiplier, zero when the revenue constraint is off.
    pub s: f64,
    /// Second-constraint multiplier, zero when that constraint is off.
    pub t: f64,
    pub a0: f64,
    pub a2: f64,
    /// Objective rate `sum f y`.
    pub rate: f64,
    pub branch: Branch,
}

/// Solves one projection step and keeps the root that moves the objective
/// in `direction`.
pub fn solve_step(
    consts: &StepConstants,
    coeffs: &Coefficients,
    mode: ConstraintMode,
    params: PathParams,
    direction: Direction,
) -> Result<StepSolution> {
    let (parts, multipliers) = parts_and_multipliers(consts, coeffs, mode, params)?;
    // a0 and a2 from the parts themselves, so the unit cost holds even when
    // the closed-form a0 cancels badly
    let weighted = |v: &[f64]| v.iter().zip(&coeffs.c).map(|(x, c)| (c * x).powi(2)).sum::<f64>();
    let a0 = weighted(&parts.homogeneous);
    let a2 = weighted(&parts.offset) - 1.0;
    if !(a2 < -A2_TOL) {
        return Err(Error::InfeasibleRates { a2 });
    }
    if !(a0 > A0_TOL * consts.ff) {
        return Err(Error::ZeroGradient { a0 });
    }
    let root = (-a0 / a2).sqrt();

    let candidate = |q: f64, branch: Branch| {
        let y: Vec<f64> = parts
            .homogeneous
            .iter()
            .zip(&parts.offset)
            .map(|(a, b)| a / q + b)
            .collect();
        let rate = coeffs.f.iter().zip(&y).map(|(f, y)| f * y).sum::<f64>();
        StepSolution {
            y,
            q,
            s: multipliers.s_q * q + multipliers.s_0,
            t: multipliers.t_q * q + multipliers.t_0,
            a0,
            a2,
            rate,
            branch,
        }
    };
    let plus = candidate(root, Branch::Plus);
    let minus = candidate(-root, Branch::Minus);
    let take_plus = match direction {
        Direction::Maximize => plus.rate >= minus.rate,
        Direction::Minimize => plus.rate <= minus.rate,
    };
    Ok(if take_plus { plus } else { minus })
}

/// Closed-form `Q` for the mode. With a single linear constraint the rate is
/// `a0/q + kappa <g, 1>/<1, 1>` (revenue) or `a0/q + kappa <f, h>/<h, h>`
/// (second), which is what `sum f y` reduces to for the directions above.
pub fn objective_rate(
    solution: &StepSolution,
    consts: &StepConstants,
    mode: ConstraintMode,
    params: PathParams,
) -> f64 {
    let k = consts;
    let q = solution.q;
    let PathParams { kappa1, kappa2 } = params;
    match mode {
        ConstraintMode::Both(_) => {
            solution.a0 / q
                + ((k.f1 * k.hh - k.fh * k.h1) * kappa1 + (k.fh * k.one - k.f1 * k.h1) * kappa2)
                    / k.gram()
        }
        ConstraintMode::RevenueOnly => solution.a0 / q + kappa1 * k.f1 / k.one,
        ConstraintMode::SecondOnly(_) => solution.a0 / q + kappa2 * k.fh / k.hh,
        ConstraintMode::NoneActive => k.ff / q,
    }
}

/// The extremum branch applied by [`extremum_kappas`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumCase {
    /// Both constraints, both rates free: steepest ascent/descent.
    BothFree,
    /// Both constraints, revenue rate held at zero.
    BothFixedRevenue,
    /// Both constraints, second rate held at zero.
    BothFixedSecond,
    /// Both rates held at zero; `Q` does not depend on them.
    BothFixed,
    /// Revenue constraint only, rate free.
    RevenueFree,
    /// Revenue constraint only, rate held at zero.
    RevenueFixed,
    /// Second constraint only, rate free.
    SecondFree,
    /// Second constraint only, rate held at zero.
    SecondFixed,
    /// No linear constraints; `Q` does not depend on the rates.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumSolution {
    pub kappa1_bar: f64,
    pub kappa2_bar: f64,
    pub q_bar: f64,
    pub case: ExtremumCase,
}

impl ExtremumSolution {
    pub fn params(&self) -> PathParams {
        PathParams::new(self.kappa1_bar, self.kappa2_bar)
    }
}

fn positive_root(value: f64, scale: f64, what: &str) -> Result<f64> {
    if value > A0_TOL * scale && value.is_finite() {
        Ok(value.sqrt())
    } else {
        Err(Error::DegeneratePortfolio(format!("{what} = {value:e} is not positive")))
    }
}

/// Path rates at which `Q` attains its maximum (or minimum) given which
/// rates are held at zero. At every extremum `Q = q_bar`.
pub fn extremum_kappas(
    consts: &StepConstants,
    mode: ConstraintMode,
    fixed_revenue: bool,
    fixed_second: bool,
    direction: Direction,
) -> Result<ExtremumSolution> {
    let k = consts;
    let sign = direction.sign();
    let solution = |kappa1_bar, kappa2_bar, q_bar, case| ExtremumSolution {
        kappa1_bar,
        kappa2_bar,
        q_bar,
        case,
    };
    match mode {
        ConstraintMode::Both(_) => {
            let gram = k.gram();
            if !(gram > COLLINEAR_TOL * k.one * k.hh) {
                return Err(Error::CollinearConstraints { gap: gram });
            }
            match (fixed_revenue, fixed_second) {
                (false, false) => {
                    let q = sign * positive_root(k.ff, k.ff.max(1.0), "F")?;
                    Ok(solution(k.f1 / q, k.fh / q, q, ExtremumCase::BothFree))
                }
                (true, false) => {
                    let residual = k.revenue_residual();
                    let q = sign * positive_root(residual / k.one, k.ff, "F - G^2/U")?;
                    let kappa2 = (k.fh * k.one - k.f1 * k.h1) / (k.one * q);
                    Ok(solution(0.0, kappa2, q, ExtremumCase::BothFixedRevenue))
                }
                (false, true) => {
                    let residual = k.second_residual();
                    let q = sign * positive_root(residual / k.hh, k.ff, "F - H^2/W")?;
                    let kappa1 = (k.f1 * k.hh - k.fh * k.h1) / (k.hh * q);
                    Ok(solution(kappa1, 0.0, q, ExtremumCase::BothFixedSecond))
                }
                (true, true) => {
                    let q = sign * positive_root(k.a0_both(), k.ff, "a0")?;
                    Ok(solution(0.0, 0.0, q, ExtremumCase::BothFixed))
                }
            }
        }
        ConstraintMode::RevenueOnly => {
            if fixed_revenue {
                let q = sign * positive_root(k.ff - k.f1 * k.f1 / k.one, k.ff, "F - G^2/U")?;
                Ok(solution(0.0, 0.0, q, ExtremumCase::RevenueFixed))
            } else {
                let q = sign * positive_root(k.ff, k.ff.max(1.0), "F")?;
                Ok(solution(k.f1 / q, 0.0, q, ExtremumCase::RevenueFree))
            }
        }
        ConstraintMode::SecondOnly(_) => {
            if !(k.hh > 0.0) {
                return Err(Error::CollinearConstraints { gap: k.hh });
            }
            if fixed_second {
                let q = sign * positive_root(k.ff - k.fh * k.fh / k.hh, k.ff, "F - H^2/W")?;
                Ok(solution(0.0, 0.0, q, ExtremumCase::SecondFixed))
            } else {
                let q = sign * positive_root(k.ff, k.ff.max(1.0), "F")?;
                Ok(solution(0.0, k.fh / q, q, ExtremumCase::SecondFree))
            }
        }
        ConstraintMode::NoneActive => {
            let q = sign * positive_root(k.ff, k.ff.max(1.0), "F")?;
            Ok(solution(0.0, 0.0, q, ExtremumCase::Unconstrained))
        }
    }
}

/// Second-order check of the free two-constraint extremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianDiagnostic {
    pub determinant: f64,
    pub d2_kappa1: f64,
    pub d2_kappa2: f64,
    /// Determinant positive and both second partials of sign opposite to `q_bar`.
    pub confirms_extremum: bool,
}

/// Hessian of `Q(kappa1, kappa2)` at the [`ExtremumCase::BothFree`] point;
/// `None` for every other case.
pub fn hessian_sign_check(consts: &StepConstants, extremum: &ExtremumSolution) -> Option<HessianDiagnostic> {
    if extremum.case != ExtremumCase::BothFree {
        return None;
    }
    let k = consts;
    let gram = k.gram();
    let a0 = k.a0_both();
    let q = extremum.q_bar;
    let g_part = k.f1 * k.hh - k.fh * k.h1;
    let h_part = k.fh * k.one - k.f1 * k.h1;
    let determinant = k.ff * k.ff / (gram * a0);
    let d2_kappa1 = -(k.hh / gram + g_part * g_part / (gram * gram * a0)) * q;
    let d2_kappa2 = -(k.one / gram + h_part * h_part / (gram * gram * a0)) * q;
    let confirms_extremum = determinant > 0.0
        && d2_kappa1.signum() == -q.signum()
        && d2_kappa2.signum() == -q.signum();
    Some(HessianDiagnostic {
        determinant,
        d2_kappa1,
        d2_kappa2,
        confirms_extremum,
    })
}
