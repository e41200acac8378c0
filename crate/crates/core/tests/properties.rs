mod common;

use common::*;
use credit_qnp::continuation::{run, ContinuationConfig, KappaPolicy};
use credit_qnp::io::scenario_file::{parse_scenarios, render_scenarios};
use credit_qnp::io::config::parse_run_config;
use credit_qnp::oracle::{cvar_tail_average, finite_difference_dar, kappa_grid_search, KappaBounds};
use credit_qnp::projection::{
    constants, direction_parts, extremum_kappas, objective_rate, quadratic_coefficients, solve_step, Coefficients,
    ConstraintMode, Direction, ObjectiveKind, PathParams, SecondConstraint,
};
use credit_qnp::risk::{build_losses, cvar, report, tail_measure, var, PortfolioState, ScenarioMatrix};
use credit_qnp::Error;
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn mode_strategy() -> impl Strategy<Value = ConstraintMode> {
    prop::sample::select(MODES.to_vec())
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn cvar_is_coherent_and_matches_tail_average(seed in any::<u64>(), k in 1usize..=50, lambda in 0.01f64..100.0) {
        let mut r = rng(seed);
        let z = losses(&mut r, k);
        let p = probabilities(&mut r, k);
        for beta in betas(&mut r, &z, &p) {
            let c = cvar(&z, &p, beta).unwrap();
            let v = var(&z, &p, beta).unwrap();
            prop_assert!(c >= v - 1e-12 * v.abs().max(1.0));
            let scaled: Vec<f64> = z.iter().map(|x| lambda * x).collect();
            let cs = cvar(&scaled, &p, beta).unwrap();
            prop_assert!((cs - lambda * c).abs() <= 1e-12 * (lambda * c).abs().max(lambda));
            let oracle = cvar_tail_average(&z, &p, beta).unwrap();
            prop_assert!((c - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "beta {beta}: {c} vs {oracle}");
        }
    }

    #[test]
    fn euler_allocation_sums_to_cvar(seed in any::<u64>(), n in 2usize..=5, k in 1usize..=50) {
        let mut r = rng(seed);
        let table = loss_table(&mut r, n, k);
        let st = state(&mut r, n);
        let z = credit_qnp::risk::portfolio_losses(&table, &st).unwrap();
        for beta in betas(&mut r, &z, table.probabilities()) {
            let rep = report(&table, &st, beta);
            let Ok(rep) = rep else { continue };
            let scale = rep.cvar.abs().max(1e-9);
            let sum: f64 = rep.contributions.iter().sum();
            prop_assert!((sum - rep.cvar).abs() <= 1e-10 * scale);
            let by_dar: f64 = st.weights.iter().zip(&rep.dar).map(|(w, d)| w * d).sum();
            prop_assert!((by_dar - rep.cvar).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn dar_is_piecewise_constant(seed in any::<u64>(), n in 2usize..=5, k in 2usize..=40, which in 0usize..5) {
        let mut r = rng(seed);
        let table = loss_table(&mut r, n, k);
        let st = state(&mut r, n);
        let beta = [0.5, 0.8, 0.9][r.random_range(0..3)];
        let Ok(before) = report(&table, &st, beta) else { return Ok(()) };
        let mut moved = st.clone();
        moved.weights[which % n] += 1e-9;
        let after = report(&table, &moved, beta).unwrap();
        if after.tail == before.tail {
            prop_assert_eq!(after.dar, before.dar);
        }
    }

    #[test]
    fn dar_matches_central_difference_off_kinks(seed in any::<u64>(), n in 2usize..=5, k in 2usize..=40) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| 0.1 + r.sample::<f64, _>(rand_distr::StandardNormal).abs()).collect()).collect();
        let table = credit_qnp::risk::LossTable::new(rows, probabilities(&mut r, k)).unwrap();
        let st = state(&mut r, n);
        let beta = [0.0, 0.5, 0.9][r.random_range(0..3)];
        let rep = report(&table, &st, beta).unwrap();
        for j in 0..n {
            let fd = finite_difference_dar(&table, &st, beta, j, 1e-5).unwrap();
            if !fd.kink {
                prop_assert!((fd.value - rep.dar[j]).abs() <= 1e-8 * rep.dar[j].abs().max(1.0),
                    "group {j}: {} vs {}", fd.value, rep.dar[j]);
            }
        }
    }

    #[test]
    fn diversification_index_is_in_unit_interval(seed in any::<u64>(), n in 2usize..=5, k in 2usize..=40) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.random_range(0.0..5.0)).collect()).collect();
        let table = credit_qnp::risk::LossTable::new(rows, probabilities(&mut r, k)).unwrap();
        let st = state(&mut r, n);
        let Ok(rep) = report(&table, &st, 0.9) else { return Ok(()) };
        if rep.cvar > 0.0 {
            prop_assert!(rep.diversification_index > 0.0);
            prop_assert!(rep.diversification_index <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn comonotone_columns_have_unit_diversification() {
    let base = [1.0, 4.0, 2.0, 7.0, 3.0];
    let rows: Vec<Vec<f64>> = base.iter().map(|&x| vec![x, 2.0 * x + 1.0, x * x]).collect();
    let table = credit_qnp::risk::LossTable::new(rows, vec![0.2; 5]).unwrap();
    let mut r = rng(1);
    let st = state(&mut r, 3);
    let rep = report(&table, &st, 0.6).unwrap();
    assert!((rep.diversification_index - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(config(400))]

    #[test]
    fn steps_are_feasible(seed in any::<u64>(), n in 3usize..=8, mode in mode_strategy(), maximize in any::<bool>()) {
        let direction = if maximize { Direction::Maximize } else { Direction::Minimize };
        let (coeffs, consts, params) = instance(seed, n, mode, direction);
        let s = solve_step(&consts, &coeffs, mode, params, direction).unwrap();
        let cost: f64 = s.y.iter().zip(&coeffs.c).map(|(y, c)| c * c * y * y).sum();
        prop_assert!((cost - 1.0).abs() < 1e-10);
        if mode.revenue_active() {
            prop_assert!((s.y.iter().sum::<f64>() - params.kappa1).abs() < 1e-10);
        }
        if mode.second().is_some() {
            let h = coeffs.h.as_ref().unwrap();
            let hy: f64 = h.iter().zip(&s.y).map(|(h, y)| h * y).sum();
            prop_assert!((hy - params.kappa2).abs() < 1e-10);
        }
        let q = objective_rate(&s, &consts, mode, params);
        prop_assert!((q - s.rate).abs() < 1e-10 * consts.ff.sqrt().max(1.0));
    }

    #[test]
    fn multiplier_polynomial_has_no_linear_term(seed in any::<u64>(), n in 3usize..=8, mode in mode_strategy()) {
        let (coeffs, consts, params) = instance(seed, n, mode, Direction::Maximize);
        let parts = direction_parts(&consts, &coeffs, mode, params).unwrap();
        let (a0, a2) = quadratic_coefficients(&consts, mode, params);
        let (mut quad, mut lin, mut cst) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let c2 = coeffs.c[i] * coeffs.c[i];
            quad += c2 * parts.homogeneous[i].powi(2);
            lin += 2.0 * c2 * parts.homogeneous[i] * parts.offset[i];
            cst += c2 * parts.offset[i].powi(2);
        }
        prop_assert!(lin.abs() < 1e-10);
        prop_assert!((quad - a0).abs() < 1e-10 * a0.max(1.0));
        prop_assert!((cst - 1.0 - a2).abs() < 1e-10);
        prop_assert!(a0 >= 0.0);
    }

    #[test]
    fn direction_is_invariant_under_uniform_cost_scaling(
        seed in any::<u64>(),
        n in 3usize..=8,
        mode in mode_strategy(),
        lambda in 0.1f64..10.0,
        exponent in -8i32..=8,
    ) {
        let (coeffs, consts, params) = instance(seed, n, mode, Direction::Maximize);
        let s = solve_step(&consts, &coeffs, mode, params, Direction::Maximize).unwrap();
        let scaled_direction = |lambda: f64| {
            // rates scale with 1/lambda so the constraints stay on the same rays
            let scaled = Coefficients::new(coeffs.f.clone(), coeffs.h.clone(), coeffs.c.iter().map(|c| c * lambda).collect(), Direction::Maximize).unwrap();
            let sp = PathParams::new(params.kappa1 / lambda, params.kappa2 / lambda);
            solve_step(&constants(&scaled), &scaled, mode, sp, Direction::Maximize).unwrap().y
        };
        let unit = |y: &[f64]| {
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            y.iter().map(|v| v / norm).collect::<Vec<_>>()
        };
        let gap = |y: &[f64]| unit(&s.y).iter().zip(unit(y)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

        // a power of two scales every intermediate exactly
        prop_assert!(gap(&scaled_direction(2f64.powi(exponent))) < 1e-12);
        // a general factor rounds the inputs; the homogeneous part carries
        // that rounding amplified by F / a0
        if s.a0 >= 1e-3 * consts.ff {
            prop_assert!(gap(&scaled_direction(lambda)) < 1e-12);
        }
    }

    #[test]
    fn free_extremum_is_steepest(seed in any::<u64>(), n in 3usize..=8, maximize in any::<bool>()) {
        let direction = if maximize { Direction::Maximize } else { Direction::Minimize };
        let mode = ConstraintMode::Both(SecondConstraint::Return);
        let (coeffs, consts, _) = instance(seed, n, mode, direction);
        let e = extremum_kappas(&consts, mode, false, false, direction).unwrap();
        let s = solve_step(&consts, &coeffs, mode, e.params(), direction).unwrap();
        let q = objective_rate(&s, &consts, mode, e.params());
        let steepest = direction.sign() * consts.ff.sqrt();
        prop_assert!((q - steepest).abs() <= 1e-12 * steepest.abs());
        // the multipliers vanish there as a difference of terms of size
        // |s0|, |t0|, whose rounding also grows as a0 or |a2| shrink
        let k = &consts;
        let s0 = (k.f1 * k.hh - k.fh * k.h1) / k.gram();
        let t0 = (k.fh * k.one - k.f1 * k.h1) / k.gram();
        let scale = 1.0f64.max(s0.abs()).max(t0.abs());
        if s.a0 >= 1e-3 * k.ff && s.a2 <= -1e-3 {
            prop_assert!(s.s.abs() < 1e-10 * scale && s.t.abs() < 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn grid_search_never_beats_free_extremum(seed in any::<u64>(), n in 3usize..=6) {
        let mode = ConstraintMode::Both(SecondConstraint::Return);
        let (coeffs, consts, _) = instance(seed, n, mode, Direction::Maximize);
        let e = extremum_kappas(&consts, mode, false, false, Direction::Maximize).unwrap();
        let s = solve_step(&consts, &coeffs, mode, e.params(), Direction::Maximize).unwrap();
        let reach = (consts.one.sqrt(), consts.hh.sqrt());
        let bounds = KappaBounds { kappa1: (-reach.0, reach.0), kappa2: (-reach.1, reach.1) };
        let step = (reach.0.min(reach.1) / 40.0).max(1e-3);
        let g = kappa_grid_search(&consts, mode, step, bounds, Direction::Maximize).unwrap();
        prop_assert!(g.q <= s.rate + 1e-6);
    }
}

fn continuation_fixture(seed: u64, n: usize, k: usize) -> (ScenarioMatrix, PortfolioState) {
    let mut r = rng(seed);
    let initial: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * r.random::<f64>()).collect();
    let values: Vec<Vec<f64>> = (0..k)
        .map(|_| initial.iter().map(|x| x * (1.0 - 0.4 * r.random::<f64>().powi(3))).collect())
        .collect();
    let ids = (0..n).map(|j| format!("g{j}")).collect();
    let m = ScenarioMatrix::new(ids, initial, values, probabilities(&mut r, k)).unwrap();
    let returns = (0..n).map(|_| 0.1 * r.random::<f64>() - 0.02).collect();
    let s = PortfolioState::initial(&m, returns, vec![1.0; n]).unwrap();
    (m, s)
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn continuation_bookkeeping(seed in any::<u64>(), n in 3usize..=6, k in 5usize..=40, steps in 1usize..=40) {
        let (m, s0) = continuation_fixture(seed, n, k);
        let mut cfg = ContinuationConfig::new(ObjectiveKind::MinRisk, ConstraintMode::RevenueOnly,
            KappaPolicy::Extremum { fixed_revenue: true, fixed_second: false });
        cfg.delta_c = 0.02;
        cfg.total_cost = steps as f64 * cfg.delta_c;
        let res = run(&m, &s0, &cfg).unwrap();
        let executed = res.records.len() - 1;
        let spent: f64 = (0..executed).map(|_| cfg.delta_c).sum();
        prop_assert!((res.last().cost - spent).abs() < 1e-12);
        let mut dead = vec![false; n];
        for rec in &res.records {
            for (&d, &w) in dead.iter().zip(&rec.weights) {
                if d {
                    prop_assert_eq!(w, 0.0);
                }
                prop_assert!(w >= 0.0);
            }
            for &j in &rec.clamped {
                dead[j] = true;
            }
        }
    }

    #[test]
    fn revenue_moves_by_the_rate(seed in any::<u64>(), n in 3usize..=6, k in 5usize..=40, kappa1 in -0.5f64..0.5) {
        let (m, s0) = continuation_fixture(seed, n, k);
        let mut cfg = ContinuationConfig::new(ObjectiveKind::MinRisk, ConstraintMode::RevenueOnly,
            KappaPolicy::Fixed(PathParams::new(kappa1, 0.0)));
        cfg.delta_c = 1e-3;
        cfg.total_cost = 0.02;
        cfg.clamp_nonnegative = false;
        let res = run(&m, &s0, &cfg).unwrap();
        for w in res.records.windows(2) {
            let before: f64 = w[0].weights.iter().sum();
            let after: f64 = w[1].weights.iter().sum();
            prop_assert!((after - before - cfg.delta_c * kappa1).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_risk_holds_cvar(seed in any::<u64>(), n in 3usize..=6, k in 5usize..=40) {
        let (m, s0) = continuation_fixture(seed, n, k);
        let mut cfg = ContinuationConfig::new(ObjectiveKind::MaxReturn, ConstraintMode::NoneActive,
            KappaPolicy::Fixed(PathParams::default()));
        cfg.delta_c = 1e-3;
        cfg.total_cost = 0.05;
        cfg.fixed_total_risk = true;
        let res = run(&m, &s0, &cfg).unwrap();
        for rec in &res.records {
            prop_assert!((rec.cvar_rel - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn unconstrained_return_never_falls(seed in any::<u64>(), n in 3usize..=6, k in 5usize..=40) {
        let (m, s0) = continuation_fixture(seed, n, k);
        let mut cfg = ContinuationConfig::new(ObjectiveKind::MaxReturn, ConstraintMode::NoneActive,
            KappaPolicy::Fixed(PathParams::default()));
        cfg.delta_c = 5e-3;
        cfg.total_cost = 0.5;
        let res = run(&m, &s0, &cfg).unwrap();
        for w in res.records.windows(2) {
            prop_assert!(w[1].total_return >= w[0].total_return);
        }
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn scenario_files_round_trip_bit_exactly(seed in any::<u64>(), n in 2usize..=6, k in 1usize..=30) {
        let mut r = rng(seed);
        let initial: Vec<f64> = (0..n).map(|_| 1e-3 + 1e3 * r.random::<f64>()).collect();
        let values: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal) * 10f64.powi(r.random_range(-8..8))).collect()).collect();
        let ids = (0..n).map(|j| format!("id{j}")).collect();
        let m = ScenarioMatrix::new(ids, initial, values, probabilities(&mut r, k)).unwrap();
        let mut buf = Vec::new();
        render_scenarios(&m, &mut buf).unwrap();
        let back = parse_scenarios(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.matrix, m);
    }

    #[test]
    fn scenario_parser_is_total(text in "(group|initial|[0-9.,e#\\- \n\"]|nan|inf|a){0,80}") {
        match parse_scenarios(&text) {
            Ok(_) => {}
            Err(Error::Parse { line, .. }) => prop_assert!(line >= 1),
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    #[test]
    fn config_parser_is_total(text in "([a-z_]{1,12} ?= ?[a-z0-9.,_]{0,8}\n|#.*\n|\n){0,8}") {
        let _ = parse_run_config(&text, std::path::Path::new("."));
    }
}

#[test]
fn tail_measure_reports_split_masses() {
    let z = [0.0, 1.0, 2.0, 3.0, 4.0];
    let t = tail_measure(&z, &[0.2; 5], 0.7).unwrap();
    assert!((t.tail.total_mass() - 0.3).abs() < 1e-15);
    let table = build_losses(
        &ScenarioMatrix::with_equal_probabilities(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap(),
    );
    assert_eq!(table.n_scenarios(), 2);
}
