//! Monte Carlo growth statistics against exact expectations computed here.

use qubus_core::growth::{self, RowStatus, StrategyConfig, Variant};

/// Expected rounds from `start` to `target` for a ±1 walk that restarts a
/// collapsed chain at length 1 for free: `T_1 = 1/p`, `T_k = (1 + (1−p) T_{k−1})/p`.
fn sequential_exact(p: f64, start: u64, target: u64) -> f64 {
    let mut step = 1.0 / p;
    let mut total = 0.0;
    for k in 1..target {
        if k > 1 {
            step = (1.0 + (1.0 - p) * step) / p;
        }
        if k >= start {
            total += step;
        }
    }
    total
}

/// Exact `E[C_k]` for the pair-or-discard rule by propagating the full distribution.
fn dc_expected_chains(n: usize, p: f64, rounds: u32) -> Vec<f64> {
    let mut dist = vec![0.0; n + 1];
    dist[n] = 1.0;
    let mut means = vec![n as f64];
    for _ in 0..rounds {
        let mut next = vec![0.0; n + 1];
        for (c, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let pairs = c / 2;
            // binomial(pairs, p) by recurrence
            let mut pmf = vec![0.0; pairs + 1];
            pmf[0] = 1.0;
            for _ in 0..pairs {
                for s in (0..=pairs).rev() {
                    let stay = pmf[s] * (1.0 - p);
                    let up = if s > 0 { pmf[s - 1] * p } else { 0.0 };
                    pmf[s] = stay + up;
                }
            }
            for (s, q) in pmf.iter().enumerate() {
                next[s] += w * q;
            }
        }
        dist = next;
        means.push(dist.iter().enumerate().map(|(c, w)| c as f64 * w).sum());
    }
    means
}

fn join_exact(p: f64, l: u64) -> f64 {
    (0..l)
        .map(|i| (2 * (l - i) - 1) as f64 * p * (1.0 - p).powi(i as i32))
        .sum()
}

#[test]
fn sequential_matches_restart_walk() {
    for (p, target) in [(0.75, 41u64), (0.6, 20), (0.9, 30)] {
        let cfg = StrategyConfig::new(Variant::Sequential, p, 20_000, 17).with_target(target);
        let s = growth::simulate(&cfg).unwrap();
        let want = sequential_exact(p, 1, target);
        let z = (s.ops.mean - want) / s.ops.stderr;
        assert!(z.abs() <= 3.0, "p={p}: {} vs {want} (z = {z})", s.ops.mean);
        assert!(s.conserved);
    }
    // the closed form ignores the restart boundary: 79 against 80 at p = 3/4
    assert!((sequential_exact(0.75, 1, 41) - 79.0).abs() < 1e-9);
}

#[test]
fn sequential_far_from_boundary_has_linear_drift() {
    for p in [0.3, 0.5, 0.75] {
        for k in [10u32, 100, 400] {
            let mut cfg = StrategyConfig::new(Variant::Sequential, p, 4000, 5).with_rounds(k);
            cfg.initial_length = 1000;
            let s = growth::simulate(&cfg).unwrap();
            let want = 1000.0 + k as f64 * (2.0 * p - 1.0);
            let z = (s.final_length.mean - want) / s.final_length.stderr;
            assert!(z.abs() <= 3.0, "p={p}, k={k}: z = {z}");
            let point = growth::analytic_point(&cfg).unwrap();
            let rows = growth::compare_to_analytic(&s, &point).unwrap();
            assert!(rows.iter().all(|r| r.status == RowStatus::Pass));
        }
    }
}

#[test]
fn sequential_unit_probability_is_exact() {
    for l in [1u64, 2, 17, 100] {
        let cfg = StrategyConfig::new(Variant::Sequential, 1.0, 10, 0).with_target(l);
        let s = growth::simulate(&cfg).unwrap();
        assert_eq!(s.ops.mean, (l - 1) as f64);
        assert_eq!(s.ops.variance, 0.0);
    }
}

#[test]
fn divide_conquer_matches_exact_distribution() {
    for p in [0.5, 0.75] {
        let exact = dc_expected_chains(64, p, 5);
        for k in 1..=5u32 {
            let cfg = StrategyConfig::new(Variant::DivideConquer, p, 20_000, 23)
                .with_qubits(64)
                .with_rounds(k);
            let s = growth::simulate(&cfg).unwrap();
            let z = (s.chains.mean - exact[k as usize]) / s.chains.stderr;
            assert!(z.abs() <= 3.0, "p={p}, k={k}: {} vs {} (z = {z})", s.chains.mean, exact[k as usize]);
            let len = if k == 0 { 1.0 } else { (1u64 << (k - 1)) as f64 + 1.0 };
            assert!((s.structure.mean - s.chains.mean * len).abs() < 1e-9 * s.structure.mean.max(1.0));
            assert!((s.wasted.mean + s.structure.mean - 64.0).abs() < 1e-9);
        }
    }
}

#[test]
fn divide_conquer_odd_leftover_shows_from_round_two() {
    // round 1 pairs all 1024 qubits; round 2 loses p/2 · P(C₁ odd) = 1/8 of a chain
    let exact = dc_expected_chains(1024, 0.5, 3);
    assert!((exact[1] - 256.0).abs() < 1e-9);
    assert!((exact[2] - (64.0 - 0.125)).abs() < 1e-9);
    let cfg = StrategyConfig::new(Variant::DivideConquer, 1.0, 3, 0)
        .with_qubits(1 << 10)
        .with_rounds(10);
    let s = growth::simulate(&cfg).unwrap();
    assert_eq!(s.chains.mean, 1.0);
    assert_eq!(s.final_length.mean, 513.0);
    assert_eq!(s.ops.mean, 1023.0);
}

#[test]
fn join_pair_matches_finite_sum() {
    for (p, l) in [(0.75, 10u64), (0.5, 6), (0.3, 4), (0.9, 3)] {
        let j = growth::join_pair_experiment(p, l, 50_000, 31).unwrap();
        let want = join_exact(p, l);
        assert!(((j.mean - want) / j.stderr).abs() <= 3.0, "p={p} L={l}: {} vs {want}", j.mean);
    }
    let sure = growth::join_pair_experiment(1.0, 12, 100, 0).unwrap();
    assert_eq!(sure.mean, 23.0);
    assert!((join_exact(0.75, 10) - 18.333_333).abs() < 1e-5);
}

#[test]
fn vertical_link_qubit_cost() {
    for p in [0.5, 0.75, 1.0] {
        let cfg = StrategyConfig::new(Variant::VerticalLink, p, 100_000, 3);
        let s = growth::simulate(&cfg).unwrap();
        let want = 2.0 * (1.0 / p + 1.0);
        assert!((s.consumed.mean - want).abs() <= 0.01 * want);
        assert!(((s.ops.mean - 1.0 / p) / s.ops.stderr.max(1e-300)).abs() <= 3.0 || p == 1.0);
    }
}

#[test]
fn merge_at_unit_probability_is_deterministic() {
    let cfg = StrategyConfig::new(Variant::Merge, 1.0, 5, 0).with_target(33);
    let s = growth::simulate(&cfg).unwrap();
    let plan = growth::merge_plan(1.0, 33).unwrap();
    assert_eq!(plan.leaf_length, 2);
    assert_eq!(plan.merge_levels, 5);
    assert_eq!(s.final_length.mean, 33.0);
    // 32 leaves at one gate each, then 31 joins
    assert_eq!(s.ops.mean, 63.0);
    assert_eq!(s.ops.variance, 0.0);
}

#[test]
fn mean_ops_fall_as_p_rises() {
    let grid = [0.6, 0.7, 0.8, 0.9, 1.0];
    let per_variant = |make: &dyn Fn(f64) -> StrategyConfig, per_chain: bool| -> Vec<f64> {
        grid.iter()
            .map(|&p| {
                let s = growth::simulate(&make(p)).unwrap();
                if per_chain {
                    s.ops.mean / s.chains.mean
                } else {
                    s.ops.mean
                }
            })
            .collect()
    };
    let series = [
        per_variant(&|p| StrategyConfig::new(Variant::Sequential, p, 4000, 1).with_target(30), false),
        per_variant(&|p| StrategyConfig::new(Variant::VerticalLink, p, 4000, 1), false),
        per_variant(
            &|p| StrategyConfig::new(Variant::DivideConquer, p, 200, 1).with_qubits(1 << 14).with_rounds(5),
            true,
        ),
    ];
    for s in &series {
        assert!(s.windows(2).all(|w| w[1] <= w[0]), "{s:?}");
    }
}

#[test]
fn merge_ops_fall_with_p_at_fixed_leaf_length() {
    // L0 = 2 throughout (2/3 < p ≤ 1); the leaf count shrinks as L0 − L_c grows
    let ops: Vec<f64> = [0.7, 0.8, 0.9, 1.0]
        .iter()
        .map(|&p| {
            let cfg = StrategyConfig::new(Variant::Merge, p, 1000, 1).with_target(40);
            assert_eq!(growth::merge_plan(p, 40).unwrap().leaf_length, 2);
            growth::simulate(&cfg).unwrap().ops.mean
        })
        .collect();
    assert!(ops.windows(2).all(|w| w[1] <= w[0]), "{ops:?}");
    // crossing into L0 = 3 below p = 2/3 makes the literal rule cheaper, not dearer
    let low = StrategyConfig::new(Variant::Merge, 0.6, 1000, 1).with_target(40);
    assert!(growth::simulate(&low).unwrap().ops.mean < ops[0]);
}

#[test]
fn statistics_are_reproducible() {
    let cfg = StrategyConfig::new(Variant::Merge, 0.75, 300, 99).with_target(50);
    assert_eq!(growth::simulate(&cfg).unwrap(), growth::simulate(&cfg).unwrap());
    let other = StrategyConfig { master_seed: 100, ..cfg.clone() };
    assert_ne!(growth::simulate(&cfg).unwrap().ops, growth::simulate(&other).unwrap().ops);
}

#[test]
fn comparison_rows_flag_printed_divide_conquer_sum() {
    let cfg = StrategyConfig::new(Variant::DivideConquer, 0.5, 500, 4)
        .with_qubits(1 << 12)
        .with_rounds(4);
    let s = growth::simulate(&cfg).unwrap();
    let rows = growth::compare_to_analytic(&s, &growth::analytic_point(&cfg).unwrap()).unwrap();
    let row = |name: &str| rows.iter().find(|r| r.metric == name).unwrap();
    assert_eq!(row("ops@printed").status, RowStatus::Flag);
    assert_eq!(row("ops@all_rounds").status, RowStatus::Pass);
    assert_eq!(row("time").z, 0.0);
}
