mod common;

use rand::Rng;
use sqc_core::{oracle_lcore, solve_core_brute, solve_lcore, EvalParams, LcoreOptions};

fn stepped() -> LcoreOptions {
    LcoreOptions {
        step: Some(0.5),
        ..LcoreOptions::default()
    }
}

#[test]
fn stepped_search_matches_grid_oracle() {
    let mut r = common::rng(1);
    for t in 0..120u64 {
        let n = r.random_range(2..=12);
        let inst = common::random_tree(n, 1000 + t, r.random_range(0.02..0.3), 0.0);
        let params = common::random_params(&mut r);
        for l in [1.0, 2.0, 3.0] {
            if l > inst.diameter() {
                continue;
            }
            let s = solve_lcore(&inst, l, &params, &stepped()).unwrap();
            let o = oracle_lcore(&inst, l, &params, 0.5).unwrap();
            assert!(
                (s.metrics.f - o.metrics.f).abs() <= 1e-9,
                "tree {t}, l={l}: {} {} vs {} {}",
                s.best_label,
                s.metrics.f,
                o.best_label,
                o.metrics.f
            );
            assert_eq!(s.candidates_evaluated, o.candidates_evaluated);
        }
    }
}

#[test]
fn event_offsets_suffice_without_queue_term() {
    // With β = 0 the objective is affine between events.
    let mut r = common::rng(2);
    for t in 0..80u64 {
        let n = r.random_range(2..=12);
        let inst = common::random_tree(n, 2000 + t, r.random_range(0.02..0.3), 0.0);
        let params = EvalParams::new(r.random_range(0.0..0.5), 1.0, 0.0).unwrap();
        for l in [1.0, 2.0, 3.0] {
            if l > inst.diameter() {
                continue;
            }
            let s = solve_lcore(&inst, l, &params, &LcoreOptions::default()).unwrap();
            let o = oracle_lcore(&inst, l, &params, 0.5).unwrap();
            assert!((s.metrics.f - o.metrics.f).abs() <= 1e-9);
        }
    }
}

#[test]
fn event_search_is_an_upper_bound() {
    let mut r = common::rng(3);
    for t in 0..60u64 {
        let inst = common::random_tree(r.random_range(2..=12), 3000 + t, 0.2, 0.0);
        let params = common::random_params(&mut r);
        let l = 2.0f64.min(inst.diameter());
        let s = solve_lcore(&inst, l, &params, &LcoreOptions::default()).unwrap();
        let o = oracle_lcore(&inst, l, &params, 0.5).unwrap();
        assert!(s.metrics.f >= o.metrics.f - 1e-9);
    }
}

#[test]
fn scaling_rates_never_restores_stability() {
    for t in 0..30u64 {
        let inst = common::random_tree(9, 4000 + t, 0.1, 0.0);
        let l = 2.0f64.min(inst.diameter());
        let params = EvalParams::default();
        let mut was_unstable = false;
        for c in [1.0, 2.0, 4.0, 8.0, 16.0, 64.0] {
            let scaled = inst.with_total_rate(0.1 * c).unwrap();
            let r = solve_lcore(&scaled, l, &params, &LcoreOptions::default()).unwrap();
            if was_unstable {
                assert!(!r.metrics.stable);
            }
            was_unstable |= !r.metrics.stable;
        }
        let flooded = inst.with_total_rate(1e3).unwrap();
        let r = solve_lcore(&flooded, l, &params, &LcoreOptions::default()).unwrap();
        assert_eq!(r.metrics.f, f64::INFINITY);
    }
}

#[test]
fn unconstrained_core_is_no_worse_than_any_lcore() {
    for t in 0..30u64 {
        let inst = common::random_tree(8, 5000 + t, 0.1, 0.01);
        let params = EvalParams::new(0.05, 1.0, 0.3).unwrap();
        let core = solve_core_brute(&inst, &params).unwrap();
        for l in [1.0, 2.0, 3.0] {
            if l > inst.diameter() {
                continue;
            }
            let r = solve_lcore(&inst, l, &params, &LcoreOptions::default()).unwrap();
            if r.best.is_vertex_path() {
                assert!(core.metrics.f <= r.metrics.f + 1e-12);
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let inst = common::random_tree(12, 77, 0.2, 0.0);
    let params = EvalParams::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let r = solve_lcore(&inst, 2.0, &params, &stepped()).unwrap();
                r.to_json(false).to_string()
            })
    };
    assert_eq!(run(1), run(4));
}
