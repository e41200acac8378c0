//! Seeded random instances shared by the property and acceptance suites.
#![allow(dead_code)]

use credit_qnp::projection::{
    constants, quadratic_coefficients, Coefficients, ConstraintMode, Direction, PathParams, SecondConstraint,
    StepConstants,
};
use credit_qnp::risk::{LossTable, PortfolioState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const MODES: [ConstraintMode; 4] = [
    ConstraintMode::NoneActive,
    ConstraintMode::RevenueOnly,
    ConstraintMode::SecondOnly(SecondConstraint::Return),
    ConstraintMode::Both(SecondConstraint::Return),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive likelihoods summing to one; half the time exactly uniform.
pub fn probabilities(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    if rng.random_bool(0.5) {
        return vec![1.0 / k as f64; k];
    }
    let raw: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

/// Losses on a coarse integer grid about a third of the time, so ties and
/// shared atoms are common.
pub fn losses(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let coarse = rng.random_bool(0.35);
    (0..k)
        .map(|_| {
            if coarse {
                rng.random_range(-3..8) as f64
            } else {
                let z: f64 = rng.sample(StandardNormal);
                5.0 * z + 2.0
            }
        })
        .collect()
}

/// Confidence levels that include the partial sums of the sorted
/// likelihoods, where the quantile sits on an atom boundary, and points
/// inside atoms.
pub fn betas(rng: &mut ChaCha8Rng, losses: &[f64], probabilities: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0, 0.5, 0.7, 0.8, 0.95];
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let mut cumulative = 0.0;
    let mut boundaries = Vec::new();
    for &k in &order {
        let before = cumulative;
        cumulative += probabilities[k];
        boundaries.push((before, cumulative));
    }
    for _ in 0..2 {
        let (lo, hi) = boundaries[rng.random_range(0..boundaries.len())];
        if hi < 1.0 - 1e-9 {
            out.push(hi);
        }
        let inside = lo + (hi - lo) * rng.random::<f64>();
        if inside < 1.0 - 1e-9 {
            out.push(inside);
        }
    }
    out
}

pub fn loss_table(rng: &mut ChaCha8Rng, n: usize, k: usize) -> LossTable {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| losses(rng, n)).collect();
    LossTable::new(rows, probabilities(rng, k)).unwrap()
}

/// A state whose weights differ from the recording weights.
pub fn state(rng: &mut ChaCha8Rng, n: usize) -> PortfolioState {
    let base: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let weights: Vec<f64> = base.iter().map(|b| b * (0.5 + rng.random::<f64>())).collect();
    PortfolioState {
        weights,
        returns: (0..n).map(|_| 0.1 * rng.random::<f64>()).collect(),
        cost_coefficients: vec![1.0; n],
        base_value: 10.0,
        base_weights: base,
        frozen: vec![false; n],
    }
}

pub fn coefficients(rng: &mut ChaCha8Rng, n: usize, direction: Direction) -> Coefficients {
    let normal = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let f = normal(rng);
    let h = normal(rng);
    let c = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Coefficients::new(f, Some(h), c, direction).unwrap()
}

/// Path rates drawn inside the cost ellipsoid of `mode`.
pub fn feasible_params(rng: &mut ChaCha8Rng, consts: &StepConstants, mode: ConstraintMode) -> PathParams {
    loop {
        let p = PathParams::new(
            if mode.revenue_active() { rng.random_range(-1.0..1.0) * consts.one.sqrt() } else { 0.0 },
            if mode.second().is_some() { rng.random_range(-1.0..1.0) * consts.hh.sqrt() } else { 0.0 },
        );
        if quadratic_coefficients(consts, mode, p).1 < -1e-3 {
            return p;
        }
    }
}

pub fn instance(seed: u64, n: usize, mode: ConstraintMode, direction: Direction) -> (Coefficients, StepConstants, PathParams) {
    let mut r = rng(seed);
    let coeffs = coefficients(&mut r, n, direction);
    let consts = constants(&coeffs);
    let params = feasible_params(&mut r, &consts, mode);
    (coeffs, consts, params)
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
