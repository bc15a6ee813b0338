//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to the
//! real stdout (bypassing the harness capture) before asserting.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqc_cli::bench::{run_bench, BenchRequest, CellValue};
use sqc_cli::verify::{example_rates_instance, verify_paper, EXAMPLE_BRANCH_WEIGHT};
use sqc_core::{
    compare_analytic, evaluate_direct, extend_metrics, extension_condition, generate_random,
    oracle_lcore, scan_shift, simulate_path, solve_lcore, EdgeRecord, EvalParams, ExtensionState,
    LcoreOptions, PathLocus, SimConfig, TreeInstance, VertexRecord,
};

const REL_RECURSION: f64 = 1e-10;
const TOL_DELAY: f64 = 1e-8;
const TOL_CONDITION: f64 = 1e-3;
const TOL_LCORE: f64 = 1e-9;
const TOL_ORDER: f64 = 1e-12;
const SIM_ARRIVALS: u64 = 1_000_000;
const SIM_REPS: u32 = 5;

fn report(name: &str, passed: bool, detail: &str) {
    let line = format!(
        "ACCEPTANCE {} {name}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn finish(name: &str, passed: bool, detail: String) {
    report(name, passed, &detail);
    assert!(passed, "{name}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree, integer edge lengths 1..=3, random rates summing to `lambda`,
/// common handling time `g`.
fn random_tree(n: usize, seed: u64, lambda: f64, g: f64) -> TreeInstance {
    let base = generate_random(n, &[1.0, 2.0, 3.0], seed).unwrap();
    let mut r = rng(seed ^ 0xacce);
    let mut doc = base.document().clone();
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    for (v, x) in doc.vertices.iter_mut().zip(&raw) {
        v.lambda = lambda * x / total;
        v.g = g;
    }
    TreeInstance::from_document(doc).unwrap()
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn extendable(inst: &TreeInstance, path: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for end in [path[0], *path.last().unwrap()] {
        for &(u, _) in inst.neighbors(end) {
            if !path.contains(&u) && !out.iter().any(|&(_, x)| x == u) {
                out.push((end, u));
            }
        }
    }
    out
}

fn extended(path: &[usize], end: usize, u: usize) -> Vec<usize> {
    let mut p = path.to_vec();
    if end == *path.last().unwrap() {
        p.push(u);
    } else {
        p.insert(0, u);
    }
    p
}

fn random_path(inst: &TreeInstance, r: &mut ChaCha8Rng) -> Vec<usize> {
    let a = r.random_range(0..inst.len());
    let b = r.random_range(0..inst.len());
    inst.path_vertices(a, b)
}

#[test]
fn single_vertex_delay() {
    let started = Instant::now();
    let inst = example_rates_instance();
    let mut worst: f64 = 0.0;
    for v in 0..inst.len() {
        let m = evaluate_direct(&inst, &PathLocus::vertex(v), &EvalParams::default()).unwrap();
        worst = worst.max((m.qbar - 0.000017058).abs());
    }
    let elapsed = started.elapsed();
    finish(
        "single-vertex delay",
        worst <= TOL_DELAY && elapsed < Duration::from_secs(1),
        format!("max |Qbar - 0.000017058| = {worst:.2e} (tol {TOL_DELAY:e}), {elapsed:?}"),
    );
}

#[test]
fn worked_example_identities() {
    let started = Instant::now();
    let report = verify_paper();
    let elapsed = started.elapsed();
    let wanted = ["F(alpha1=0", "|P| from", "stability"];
    let checks: Vec<_> = report
        .checks
        .iter()
        .filter(|c| wanted.iter().any(|w| c.name.starts_with(w)))
        .collect();
    let passed = checks.len() == 3
        && checks.iter().all(|c| c.passed)
        && elapsed < Duration::from_secs(1);
    let detail = checks
        .iter()
        .map(|c| format!("{} [{}]", c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    finish("objective identities", passed, format!("{detail}; {elapsed:?}"));
}

#[test]
fn condition_values() {
    let low = extension_condition(&EvalParams::new(0.1, 1.0, 0.1).unwrap(), 1.0, 1.0, EXAMPLE_BRANCH_WEIGHT);
    let high = extension_condition(&EvalParams::new(0.5, 1.0, 0.1).unwrap(), 1.0, 1.0, EXAMPLE_BRANCH_WEIGHT);
    let passed = (low.lhs + 0.1969).abs() <= TOL_CONDITION
        && (high.lhs - 0.2031).abs() <= TOL_CONDITION
        && !low.holds
        && high.holds;
    finish(
        "extension condition values",
        passed,
        format!("lhs = {:.4} and {:.4} (tol {TOL_CONDITION:e})", low.lhs, high.lhs),
    );
}

#[test]
fn recursion_matches_direct_evaluation() {
    let started = Instant::now();
    let mut r = rng(11);
    let (mut triples, mut failures) = (0, 0);
    while triples < 300 {
        let n = r.random_range(2..=12);
        let g = if r.random_bool(0.5) { 0.0 } else { r.random_range(0.0..0.3) };
        let inst = random_tree(n, r.random(), r.random_range(0.01..0.5), g);
        let path = random_path(&inst, &mut r);
        let options = extendable(&inst, &path);
        let Some(&(_, u)) = options.choose(&mut r) else { continue };
        let state =
            ExtensionState::from_path(&inst, &PathLocus::from_vertices(&inst, &path).unwrap()).unwrap();
        let next = extend_metrics(&inst, &state, u).unwrap();
        let d = evaluate_direct(&inst, next.path(), &EvalParams::default()).unwrap();
        triples += 1;
        if !(rel_close(next.sbar(), d.sbar, REL_RECURSION)
            && rel_close(next.s2bar(), d.s2bar, REL_RECURSION)
            && rel_close(next.qbar(), d.qbar, REL_RECURSION))
        {
            failures += 1;
        }
    }
    let elapsed = started.elapsed();
    finish(
        "recursion vs direct",
        failures == 0 && elapsed < Duration::from_secs(30),
        format!("{triples} triples, {failures} mismatches (rel tol {REL_RECURSION:e}), {elapsed:?}"),
    );
}

#[test]
fn inclusion_monotonicity() {
    let mut r = rng(12);
    let (mut pairs, mut violations) = (0, 0);
    let p = EvalParams::default();
    while pairs < 300 {
        let inst = random_tree(r.random_range(2..=12), r.random(), r.random_range(0.01..0.5), 0.02);
        let small = random_path(&inst, &mut r);
        let mut big = small.clone();
        for _ in 0..r.random_range(1..=4) {
            let options = extendable(&inst, &big);
            let Some(&(end, u)) = options.choose(&mut r) else { break };
            big = extended(&big, end, u);
        }
        if big.len() == small.len() {
            continue;
        }
        pairs += 1;
        let a = evaluate_direct(&inst, &PathLocus::from_vertices(&inst, &small).unwrap(), &p).unwrap();
        let b = evaluate_direct(&inst, &PathLocus::from_vertices(&inst, &big).unwrap(), &p).unwrap();
        let ok = b.t1 <= a.t1 + TOL_ORDER
            && b.t2 >= a.t2 - TOL_ORDER
            && b.sbar >= a.sbar - TOL_ORDER
            && b.s2bar >= a.s2bar - TOL_ORDER
            && b.qbar >= a.qbar - TOL_ORDER;
        if !ok {
            violations += 1;
        }
    }
    finish(
        "inclusion monotonicity",
        violations == 0,
        format!("{pairs} nested pairs, {violations} violations"),
    );
}

#[test]
fn condition_sufficiency() {
    let mut r = rng(13);
    let (mut holding, mut violations, mut counter_cases, mut attempts) = (0, 0, 0, 0);
    while holding < 600 && attempts < 200_000 {
        attempts += 1;
        let inst = random_tree(r.random_range(2..=12), r.random(), r.random_range(0.01..0.3), 0.0);
        let params = EvalParams::new(
            r.random_range(0.0..1.0),
            r.random_range(0.2..1.5),
            r.random_range(0.0..1.0),
        )
        .unwrap();
        let path = random_path(&inst, &mut r);
        let options = extendable(&inst, &path);
        let Some(&(end, u)) = options.choose(&mut r) else { continue };
        let cond = extension_condition(&params, inst.vt(), inst.total_weight(), inst.side_weight(end, u));
        let before = evaluate_direct(&inst, &PathLocus::from_vertices(&inst, &path).unwrap(), &params).unwrap();
        let after = evaluate_direct(
            &inst,
            &PathLocus::from_vertices(&inst, &extended(&path, end, u)).unwrap(),
            &params,
        )
        .unwrap();
        // Both sides must be finite for "strictly increases" to be meaningful.
        if !(before.f.is_finite() && after.f.is_finite()) {
            continue;
        }
        if cond.holds {
            holding += 1;
            if !(after.f > before.f) {
                violations += 1;
            }
        } else if after.f > before.f {
            counter_cases += 1;
        }
    }
    finish(
        "condition sufficiency",
        holding >= 500 && violations == 0 && counter_cases >= 1,
        format!(
            "{holding} extensions with the condition holding, {violations} violations, \
             {counter_cases} cases where F rose without it"
        ),
    );
}

#[test]
fn shift_unimodality() {
    let mut r = rng(14);
    let (mut runs, mut violations, mut nonconcave) = (0, 0, 0);
    while runs < 200 {
        let n = r.random_range(3..=12);
        let inst = random_tree(n, r.random(), 0.1, 0.0);
        let leaves = inst.leaves();
        let a = *leaves.choose(&mut r).unwrap();
        let b = *leaves.choose(&mut r).unwrap();
        let d = inst.distance(a, b);
        if d < 1.0 {
            continue;
        }
        let l = r.random_range(1..=(d as usize)) as f64;
        let scan = scan_shift(&inst, a, b, l, &EvalParams::default(), None).unwrap();
        let s: Vec<f64> = scan.metrics().iter().map(|m| m.sbar).collect();
        runs += 1;
        let mut falling = false;
        let mut ok = true;
        for w in s.windows(2) {
            if w[1] < w[0] - TOL_ORDER {
                falling = true;
            } else if falling && w[1] > w[0] + TOL_ORDER {
                ok = false;
            }
        }
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= s[0].min(*s.last().unwrap()) <= min + TOL_ORDER;
        if !ok {
            violations += 1;
        }
        let second: Vec<f64> = s.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        if second.iter().any(|&x| x > 1e-9) && second.iter().any(|&x| x < -1e-9) {
            nonconcave += 1;
        }
    }
    finish(
        "shift unimodality",
        violations == 0 && nonconcave >= 1,
        format!("{runs} scans, {violations} violations, {nonconcave} non-concave"),
    );
}

#[test]
fn lcore_matches_oracle() {
    let started = Instant::now();
    let mut r = rng(15);
    let opts = LcoreOptions {
        step: Some(0.5),
        ..LcoreOptions::default()
    };
    let (mut cases, mut mismatches, mut event_only_gaps, mut trees) = (0, 0, 0, 0);
    while trees < 80 {
        let n = r.random_range(2..=12);
        let inst = random_tree(n, r.random(), r.random_range(0.02..0.3), 0.0);
        let params = EvalParams::new(r.random_range(0.0..0.5), 1.0, r.random_range(0.0..1.0)).unwrap();
        trees += 1;
        for l in [1.0, 2.0, 3.0] {
            if l > inst.diameter() {
                continue;
            }
            cases += 1;
            let s = solve_lcore(&inst, l, &params, &opts).unwrap();
            let o = oracle_lcore(&inst, l, &params, 0.5).unwrap();
            if (s.metrics.f - o.metrics.f).abs() > TOL_LCORE {
                mismatches += 1;
            }
            let e = solve_lcore(&inst, l, &params, &LcoreOptions::default()).unwrap();
            if (e.metrics.f - o.metrics.f).abs() > TOL_LCORE {
                event_only_gaps += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    finish(
        "l-core vs grid oracle",
        mismatches == 0 && elapsed < Duration::from_secs(120),
        format!(
            "{trees} trees, {cases} cases, {mismatches} mismatches (tol {TOL_LCORE:e}); \
             vertex-aligned windows alone differ in {event_only_gaps}; {elapsed:?}"
        ),
    );
}

fn uniform_star(lambda: f64, g: f64) -> TreeInstance {
    let vertices = (0..4)
        .map(|i| VertexRecord {
            id: format!("v{i}"),
            lambda: lambda / 4.0,
            g,
        })
        .collect();
    let edges = (1..4)
        .map(|i| EdgeRecord {
            a: "v0".into(),
            b: format!("v{i}"),
            length: 1.0,
        })
        .collect();
    TreeInstance::new(1.0, vertices, edges).unwrap()
}

#[test]
fn simulation_matches_delay() {
    let started = Instant::now();
    let config = SimConfig {
        arrivals: SIM_ARRIVALS,
        warmup: 10_000,
        seed: 2024,
        replications: SIM_REPS,
        ..SimConfig::default()
    };
    let md1 = uniform_star(0.5, 1.0);
    let example = example_rates_instance();
    let star = uniform_star(0.4, 0.0);
    let cases = [
        ("M/D/1", &md1, PathLocus::vertex(0), 0.5),
        ("single vertex", &example, PathLocus::vertex(4), 0.000017058),
        (
            "star path",
            &star,
            PathLocus::from_vertices(&star, &[0, 1]).unwrap(),
            0.0441176,
        ),
    ];
    let mut all = true;
    let mut parts = Vec::new();
    for (name, inst, path, expected) in cases {
        let analytic = evaluate_direct(inst, &path, &EvalParams::default()).unwrap().qbar;
        let sim = simulate_path(inst, &path, &config).unwrap();
        let verdict = compare_analytic(&sim, analytic);
        all &= verdict.is_pass() && (analytic - expected).abs() < 1e-7;
        parts.push(format!(
            "{name}: sim {:.6} ± {:.6} vs {:.6} ({})",
            sim.mean_wait,
            sim.ci_half_width,
            analytic,
            verdict.label()
        ));
    }
    let elapsed = started.elapsed();
    finish(
        "simulation vs delay formula",
        all && elapsed < Duration::from_secs(120),
        format!("{}; {elapsed:?}", parts.join("; ")),
    );
}

#[test]
fn objective_trends() {
    let started = Instant::now();
    let req = BenchRequest {
        sizes: vec![20, 50, 90],
        seeds: vec![1, 2, 3],
        lambdas: (1..=9).map(|k| k as f64 / 10.0).collect(),
        lengths: vec![2.0, 4.0, 7.0, 10.0, 13.0, 16.0],
        ..BenchRequest::default()
    };
    let grid = run_bench(&req).unwrap();
    let mut violations = Vec::new();
    let mut unstable_cells = 0;
    for &n in &req.sizes {
        for &seed in &req.seeds {
            for (li, &l) in req.lengths.iter().enumerate() {
                for (ki, &lam) in req.lambdas.iter().enumerate() {
                    let CellValue::Value { f, stable } = grid.cell(n, seed, lam, l).unwrap().value else {
                        continue;
                    };
                    if !stable {
                        unstable_cells += 1;
                    }
                    if let Some(&next) = req.lambdas.get(ki + 1) {
                        if let CellValue::Value { f: f2, stable: s2 } =
                            grid.cell(n, seed, next, l).unwrap().value
                        {
                            if f2 < f - TOL_ORDER * f.abs().max(1.0) || (!stable && s2) {
                                violations.push(format!("n={n} seed={seed} l={l} lambda={lam}"));
                            }
                        }
                    }
                    if let Some(&longer) = req.lengths.get(li + 1) {
                        if let CellValue::Value { stable: s2, .. } =
                            grid.cell(n, seed, lam, longer).unwrap().value
                        {
                            if !stable && s2 {
                                violations.push(format!("n={n} seed={seed} l={l} lambda={lam} (length)"));
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    finish(
        "objective trends",
        violations.is_empty() && unstable_cells > 0 && elapsed < Duration::from_secs(300),
        format!(
            "{} cells, {unstable_cells} unstable, {} violations{}; {elapsed:?}",
            grid.cells.len(),
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    );
}

fn sqc(args: &[&str], threads: usize) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_sqc"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("running sqc");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn outputs_are_deterministic() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    std::fs::create_dir_all(&dir).unwrap();
    let inst = dir.join("tree.json");
    let inst_s = inst.to_str().unwrap();
    sqc(&["gen", "--n", "40", "--seed", "7", "--lengths", "1..4", "--lambda", "0.3", "--out", inst_s], 1);
    let runs: [&[&str]; 4] = [
        &["core", "--instance", inst_s, "--alpha1", "0.05", "--json"],
        &["lcore", "--instance", inst_s, "--length", "6", "--json"],
        &["lcore", "--instance", inst_s, "--length", "5", "--step", "0.5"],
        &["bench", "--sizes", "20,30", "--lambdas", "0.1,0.5", "--lengths", "3,8", "--seeds", "1,2"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let a = sqc(args, 1);
        let b = sqc(args, 1);
        let c = sqc(args, 4);
        let d = sqc(args, 4);
        if !(a == b && b == c && c == d) || a.is_empty() {
            differing.push(args[0]);
        }
    }
    finish(
        "determinism",
        differing.is_empty(),
        format!(
            "core, lcore and bench outputs across 2 runs x {{1, 4}} workers; differing: {:?}",
            differing
        ),
    );
}
