//! Slow brute-force references for the engine's computations.
//!
//! Nothing here calls into the risk or projection arithmetic: the tail
//! average walks sorted losses directly, the direction oracle samples the
//! feasible sphere, the rate search evaluates a geometric form of the rate
//! on a grid, and DaR is a central difference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::projection::{Coefficients, ConstraintMode, Direction, PathParams, StepConstants};
use crate::risk::{LossTable, PortfolioState};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    TailAverage,
    SphereSample,
    GridSearch,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub value: f64,
    pub method: OracleMethod,
    /// Sample count, grid step or difference step.
    pub resolution: f64,
    pub seed: Option<u64>,
}

/// Mean of the worst `1 - beta` probability mass, taking only part of the
/// scenario that straddles the boundary.
pub fn cvar_tail_average(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<f64> {
    if losses.is_empty() || losses.len() != probabilities.len() {
        return Err(Error::Structural("losses and probabilities must match and be non-empty".into()));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must lie in [0, 1), got {beta}")));
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]));
    let tail = 1.0 - beta;
    let mut remaining = tail;
    let mut total = 0.0;
    for k in order {
        if remaining <= 0.0 {
            break;
        }
        let take = probabilities[k].min(remaining);
        total += take * losses[k];
        remaining -= take;
    }
    Ok(total / tail)
}

/// Extremes of the objective rate over sampled feasible directions.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSample {
    pub best_q: f64,
    pub best_y: Vec<f64>,
    pub worst_q: f64,
    pub worst_y: Vec<f64>,
    pub report: OracleReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalizes `vectors` in order, dropping those already spanned.
fn gram_schmidt(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        // two passes keep the basis orthogonal to rounding level
        for _ in 0..2 {
            for e in &basis {
                let p = dot(&w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= p * ei;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * scale.max(1e-300) {
            basis.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Samples `{y : active constraints hold, sum c^2 y^2 = 1}`.
///
/// With `u = c y` the set is a sphere of radius `sqrt(1 - |u0|^2)` around
/// the minimum-norm solution `u0`, inside the null space of the constraint
/// rows. A one-dimensional null space gives two points, which are
/// enumerated instead of sampled.
pub fn best_feasible_direction(
    coeffs: &Coefficients,
    mode: ConstraintMode,
    params: PathParams,
    samples: usize,
    seed: u64,
) -> Result<DirectionSample> {
    let n = coeffs.f.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    if mode.revenue_active() {
        rows.push(coeffs.c.iter().map(|c| 1.0 / c).collect());
        rhs.push(params.kappa1);
    }
    if mode.second().is_some() {
        let h = coeffs
            .h
            .as_ref()
            .ok_or_else(|| Error::Structural("second constraint without h".into()))?;
        rows.push(h.iter().zip(&coeffs.c).map(|(h, c)| h / c).collect());
        rhs.push(params.kappa2);
    }

    let row_basis = gram_schmidt(&rows);
    if row_basis.len() < rows.len() {
        return Err(Error::CollinearConstraints { gap: 0.0 });
    }
    // u0 = A^T (A A^T)^{-1} kappa, solved by Cramer's rule on the small Gram matrix
    let u0: Vec<f64> = match rows.len() {
        0 => vec![0.0; n],
        1 => {
            let s = rhs[0] / dot(&rows[0], &rows[0]);
            rows[0].iter().map(|a| s * a).collect()
        }
        _ => {
            let (g11, g12, g22) = (
                dot(&rows[0], &rows[0]),
                dot(&rows[0], &rows[1]),
                dot(&rows[1], &rows[1]),
            );
            let det = g11 * g22 - g12 * g12;
            let l1 = (g22 * rhs[0] - g12 * rhs[1]) / det;
            let l2 = (g11 * rhs[1] - g12 * rhs[0]) / det;
            rows[0].iter().zip(&rows[1]).map(|(a, b)| l1 * a + l2 * b).collect()
        }
    };
    let radius2 = 1.0 - dot(&u0, &u0);
    if !(radius2 > 0.0) {
        return Err(Error::InfeasibleRates { a2: -radius2 });
    }
    let radius = radius2.sqrt();

    let mut spanning = row_basis.clone();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        spanning.push(e);
    }
    let null_basis: Vec<Vec<f64>> = gram_schmidt(&spanning).split_off(row_basis.len());
    if null_basis.is_empty() {
        return Err(Error::InfeasibleRates { a2: 0.0 });
    }

    let g: Vec<f64> = coeffs.f.iter().zip(&coeffs.c).map(|(f, c)| f / c).collect();
    let to_y = |z: &[f64]| -> Vec<f64> {
        let mut u = u0.clone();
        for (zi, e) in z.iter().zip(&null_basis) {
            for (ui, ei) in u.iter_mut().zip(e) {
                *ui += radius * zi * ei;
            }
        }
        u.iter().zip(&coeffs.c).map(|(u, c)| u / c).collect()
    };
    let base = dot(&g, &u0);
    let g_null: Vec<f64> = null_basis.iter().map(|e| radius * dot(&g, e)).collect();

    let d = null_basis.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    let mut worst = (f64::INFINITY, vec![0.0; d]);
    let mut consider = |z: &[f64]| {
        let q = base + dot(z, &g_null);
        if q > best.0 {
            best.0 = q;
            best.1.copy_from_slice(z);
        }
        if q < worst.0 {
            worst.0 = q;
            worst.1.copy_from_slice(z);
        }
    };
    if d == 1 {
        consider(&[1.0]);
        consider(&[-1.0]);
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; d];
        for _ in 0..samples.max(1) {
            let mut norm2: f64 = 0.0;
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
                norm2 += *zi * *zi;
            }
            if norm2 == 0.0 {
                continue;
            }
            let inv = 1.0 / norm2.sqrt();
            for zi in z.iter_mut() {
                *zi *= inv;
            }
            consider(&z);
        }
    }
    Ok(DirectionSample {
        best_q: best.0,
        best_y: to_y(&best.1),
        worst_q: worst.0,
        worst_y: to_y(&worst.1),
        report: OracleReport {
            value: best.0,
            method: OracleMethod::SphereSample,
            resolution: if d == 1 { 2.0 } else { samples as f64 },
            seed: Some(seed),
        },
    })
}

/// Closed rectangle of path rates scanned by [`kappa_grid_search`]; a
/// degenerate interval holds that rate fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBounds {
    pub kappa1: (f64, f64),
    pub kappa2: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub kappa: PathParams,
    pub q: f64,
    pub report: OracleReport,
}

/// Extreme rate at `kappa`, from the sphere geometry: the feasible `u`
/// form a sphere around `u0` and `sum f y = g.u0 +- radius |P g|`.
/// `None` when the rates leave the cost ellipsoid.
fn geometric_rate(consts: &StepConstants, mode: ConstraintMode, kappa: PathParams, sign: f64) -> Option<f64> {
    let k = consts;
    // gram matrix M of active rows, b = <g, rows>, r = rates
    let (g_u0, u0_norm2, explained) = match (mode.revenue_active(), mode.second().is_some()) {
        (false, false) => (0.0, 0.0, 0.0),
        (true, false) => (k.f1 * kappa.kappa1 / k.one, kappa.kappa1.powi(2) / k.one, k.f1 * k.f1 / k.one),
        (false, true) => (k.fh * kappa.kappa2 / k.hh, kappa.kappa2.powi(2) / k.hh, k.fh * k.fh / k.hh),
        (true, true) => {
            let det = k.one * k.hh - k.h1 * k.h1;
            // M^{-1} = [[W, -V], [-V, U]] / det
            let solve = |x1: f64, x2: f64| ((k.hh * x1 - k.h1 * x2) / det, (k.one * x2 - k.h1 * x1) / det);
            let (m1, m2) = solve(kappa.kappa1, kappa.kappa2);
            let (b1, b2) = solve(k.f1, k.fh);
            (
                k.f1 * m1 + k.fh * m2,
                kappa.kappa1 * m1 + kappa.kappa2 * m2,
                k.f1 * b1 + k.fh * b2,
            )
        }
    };
    let radius2 = 1.0 - u0_norm2;
    if !(radius2 > 0.0) {
        return None;
    }
    let projected = (k.ff - explained).max(0.0).sqrt();
    Some(g_u0 + sign * radius2.sqrt() * projected)
}

/// Scans the rate rectangle with spacing `grid_step` and returns the best
/// point for `direction`, skipping rates outside the cost ellipsoid.
pub fn kappa_grid_search(
    consts: &StepConstants,
    mode: ConstraintMode,
    grid_step: f64,
    bounds: KappaBounds,
    direction: Direction,
) -> Result<GridOptimum> {
    if !(grid_step > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {grid_step}")));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if hi <= lo {
            return vec![lo];
        }
        let cells = ((hi - lo) / grid_step).round() as usize;
        (0..=cells).map(|i| lo + i as f64 * grid_step).collect()
    };
    let sign = direction.sign();
    let k1_axis = if mode.revenue_active() { axis(bounds.kappa1) } else { vec![0.0] };
    let k2_axis = if mode.second().is_some() { axis(bounds.kappa2) } else { vec![0.0] };
    let mut best: Option<(PathParams, f64)> = None;
    for &k1 in &k1_axis {
        for &k2 in &k2_axis {
            let kappa = PathParams::new(k1, k2);
            if let Some(q) = geometric_rate(consts, mode, kappa, sign) {
                if best.is_none_or(|(_, b)| sign * q > sign * b) {
                    best = Some((kappa, q));
                }
            }
        }
    }
    let (kappa, q) = best.ok_or(Error::InfeasibleRates { a2: 0.0 })?;
    Ok(GridOptimum {
        kappa,
        q,
        report: OracleReport {
            value: q,
            method: OracleMethod::GridSearch,
            resolution: grid_step,
            seed: None,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference {
    pub value: f64,
    /// The tail changed between the two evaluations; the quotient then
    /// straddles a kink and is not a derivative.
    pub kink: bool,
    pub report: OracleReport,
}

/// Scenarios carrying full and partial tail mass, in index order.
fn tail_roles(losses: &[f64], probabilities: &[f64], beta: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let mut remaining = 1.0 - beta;
    let mut full = Vec::new();
    let mut partial = Vec::new();
    for k in order {
        if remaining <= 1e-15 {
            break;
        }
        if probabilities[k] <= remaining + 1e-15 {
            full.push(k);
        } else {
            partial.push(k);
        }
        remaining -= probabilities[k].min(remaining);
    }
    full.sort_unstable();
    partial.sort_unstable();
    (full, partial)
}

/// Central difference of CVaR in weight `n`.
pub fn finite_difference_dar(
    table: &LossTable,
    state: &PortfolioState,
    beta: f64,
    n: usize,
    epsilon: f64,
) -> Result<FiniteDifference> {
    let probabilities = table.probabilities();
    let losses_at = |wn: f64| -> Vec<f64> {
        (0..table.n_scenarios())
            .map(|k| {
                (0..table.n_groups())
                    .map(|j| {
                        let w = if j == n { wn } else { state.weights[j] };
                        table.loss(k, j) * w / state.base_weights[j]
                    })
                    .sum()
            })
            .collect()
    };
    let up = losses_at(state.weights[n] + epsilon);
    let down = losses_at(state.weights[n] - epsilon);
    let value = (cvar_tail_average(&up, probabilities, beta)? - cvar_tail_average(&down, probabilities, beta)?)
        / (2.0 * epsilon);
    let kink = tail_roles(&up, probabilities, beta) != tail_roles(&down, probabilities, beta);
    Ok(FiniteDifference {
        value,
        kink,
        report: OracleReport {
            value,
            method: OracleMethod::FiniteDifference,
            resolution: epsilon,
            seed: None,
        },
    })
}
