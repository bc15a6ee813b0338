//! Self-contained checks against the reference worked example.

use serde_json::json;
use sqc_core::metrics::{objective, response_time};
use sqc_core::{
    evaluate_direct, extension_condition, queue_delay, EdgeRecord, EvalParams, PathLocus,
    TreeInstance, VertexRecord,
};

pub const EXAMPLE_LAMBDA: f64 = 0.34;
pub const EXAMPLE_G: f64 = 0.01;
pub const EXAMPLE_RATES: [f64; 12] = [
    0.02, 0.03, 0.01, 0.04, 0.03, 0.03, 0.05, 0.02, 0.03, 0.05, 0.02, 0.01,
];

/// One reference row: T̄1, T̄2, Q̄ and F for (α1, β) = (0, 0), (0.1, 0.1),
/// (0.5, 0.1). `None` marks an infinite entry.
#[derive(Debug, Clone, Copy)]
pub struct TableRow {
    pub path: &'static str,
    pub t1: f64,
    pub t2: f64,
    pub qbar: Option<f64>,
    pub f_00: f64,
    pub f_01: Option<f64>,
    pub f_05: Option<f64>,
}

const fn row(
    path: &'static str,
    t1: f64,
    t2: f64,
    qbar: Option<f64>,
    f_00: f64,
    f_01: Option<f64>,
    f_05: Option<f64>,
) -> TableRow {
    TableRow {
        path,
        t1,
        t2,
        qbar,
        f_00,
        f_01,
        f_05,
    }
}

pub const TABLE: [TableRow; 11] = [
    row("v1", 6.1324, 0.0, Some(0.000017058), 6.1424, Some(5.5291), Some(5.5291)),
    row("v5", 3.9559, 0.0, Some(0.000017058), 3.9659, Some(3.5703), Some(3.5703)),
    row("v12", 3.2500, 0.0, Some(0.000017058), 3.2600, Some(2.9350), Some(2.9350)),
    row("v9", 3.7206, 0.0, Some(0.000017058), 3.7306, Some(3.3585), Some(3.3585)),
    row("v5,v12", 2.1029, 1.4170, Some(0.7112), 2.1129, Some(2.4155), Some(3.6155)),
    row("v12,v9", 2.4853, 0.9446, Some(0.2425), 2.4953, Some(2.5655), Some(3.3655)),
    row("v8,v9,v6", 3.5733, 0.2716, Some(0.0319), 3.5835, Some(3.4565), Some(4.2565)),
    row("v1,v3,v5", 3.5441, 0.6920, Some(0.1987), 3.5541, Some(3.5888), Some(4.7888)),
    row("v5,v12,v9", 1.3382, 2.3616, Some(5.0013), 1.3482, Some(2.4507), Some(4.4507)),
    row("v3,v5,v12", 1.7500, 1.9983, Some(2.4618), 1.7600, Some(2.5310), Some(4.5310)),
    row("v3,v5,v12,v9", 0.9853, 2.9429, None, 0.9953, None, None),
];

/// Branch weight of v9 when P = {v5, v12} is extended by v9.
pub const EXAMPLE_BRANCH_WEIGHT: f64 = 0.3824;

pub const TOL_Q: f64 = 1e-8;
pub const TOL_F: f64 = 5e-4;
pub const TOL_LHS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "passed": self.all_passed(),
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

/// The example's rates on a unit-length line. The real topology is only
/// shown in a figure; single-vertex queueing delay does not depend on it.
pub fn example_rates_instance() -> TreeInstance {
    let vertices = EXAMPLE_RATES
        .iter()
        .enumerate()
        .map(|(i, &lambda)| VertexRecord {
            id: format!("v{}", i + 1),
            lambda,
            g: EXAMPLE_G,
        })
        .collect();
    let edges = (1..EXAMPLE_RATES.len())
        .map(|i| EdgeRecord {
            a: format!("v{i}"),
            b: format!("v{}", i + 1),
            length: 1.0,
        })
        .collect();
    TreeInstance::new(1.0, vertices, edges).expect("example instance is valid")
}

fn params(alpha1: f64, beta: f64) -> EvalParams {
    EvalParams::new(alpha1, 1.0, beta).unwrap()
}

/// F from tabulated T̄1, T̄2, Q̄ and a path length.
fn table_f(r: &TableRow, length: f64, p: &EvalParams) -> f64 {
    let q = r.qbar.unwrap_or(f64::INFINITY);
    objective(length, response_time(r.t1, r.t2, q, EXAMPLE_G, p.beta), p)
}

/// |P| back-solved from the (α1, β) = (0.1, 0.1) column. The table prints
/// four decimals, so the estimate is only good to about 1e-3; it is rounded
/// to two decimals and clamped at zero.
pub fn inferred_length(r: &TableRow) -> Option<f64> {
    let f = r.f_01?;
    let p = params(0.1, 0.1);
    let tr = table_f(r, 0.0, &p);
    Some((((f - tr) / p.alpha1) * 100.0).round().max(0.0) / 100.0)
}

fn check_single_vertex_delay() -> CheckResult {
    let inst = example_rates_instance();
    let mut worst: f64 = 0.0;
    for v in 0..inst.len() {
        let m = evaluate_direct(&inst, &PathLocus::vertex(v), &EvalParams::default()).unwrap();
        worst = worst.max((m.qbar - 0.000017058).abs());
    }
    let closed = queue_delay(EXAMPLE_LAMBDA, EXAMPLE_G, EXAMPLE_G * EXAMPLE_G).unwrap();
    worst = worst.max((closed - 0.000017058).abs());
    for r in TABLE.iter().filter(|r| r.t2 == 0.0) {
        worst = worst.max((r.qbar.unwrap() - closed).abs());
    }
    CheckResult {
        name: "single-vertex queueing delay".into(),
        passed: worst <= TOL_Q,
        detail: format!("Qbar = {closed:.9}, max deviation {worst:.2e} (tol {TOL_Q:e})"),
    }
}

fn check_identity() -> CheckResult {
    let p = params(0.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for r in &TABLE {
        let dev = (table_f(r, 0.0, &p) - r.f_00).abs();
        debug_assert!((table_f(r, 0.0, &p) - (r.t1 + EXAMPLE_G)).abs() < 1e-12);
        if dev > TOL_F {
            bad.push(r.path);
        }
        worst = worst.max(dev);
    }
    CheckResult {
        name: "F(alpha1=0, beta=0) = T1 + G".into(),
        passed: bad.is_empty(),
        detail: format!(
            "{} rows, max deviation {worst:.1e} (tol {TOL_F:e}){}",
            TABLE.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", bad.join(" "))
            }
        ),
    }
}

fn check_lengths() -> CheckResult {
    let p = params(0.5, 0.1);
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    let mut bad = Vec::new();
    for r in &TABLE {
        let (Some(len), Some(f05)) = (inferred_length(r), r.f_05) else {
            continue;
        };
        rows += 1;
        let dev = (table_f(r, len, &p) - f05).abs();
        if dev > TOL_F {
            bad.push(r.path);
        }
        worst = worst.max(dev);
    }
    CheckResult {
        name: "|P| from alpha1=0.1 reproduces alpha1=0.5".into(),
        passed: bad.is_empty() && rows == 10,
        detail: format!(
            "{rows} finite rows, max deviation {worst:.1e} (tol {TOL_F:e}){}",
            if bad.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", bad.join(" "))
            }
        ),
    }
}

fn check_stability() -> CheckResult {
    let mut mismatched = Vec::new();
    let mut unstable = Vec::new();
    for r in &TABLE {
        let stable = 1.0 - EXAMPLE_LAMBDA * (r.t2 + EXAMPLE_G) > 0.0;
        let published = r.qbar.is_some() && r.f_01.is_some() && r.f_05.is_some();
        let delay = queue_delay(EXAMPLE_LAMBDA, r.t2 + EXAMPLE_G, 0.0).unwrap();
        if stable != published || stable != delay.is_finite() {
            mismatched.push(r.path);
        }
        if !stable {
            unstable.push(r.path);
        }
    }
    let passed = mismatched.is_empty() && unstable == ["v3,v5,v12,v9"];
    CheckResult {
        name: "stability pattern".into(),
        passed,
        detail: format!(
            "unstable rows: {{{}}}{}",
            unstable.join("} {"),
            if mismatched.is_empty() {
                String::new()
            } else {
                format!(", mismatched: {}", mismatched.join(" "))
            }
        ),
    }
}

fn check_condition() -> CheckResult {
    let low = extension_condition(&params(0.1, 0.1), 1.0, 1.0, EXAMPLE_BRANCH_WEIGHT);
    let high = extension_condition(&params(0.5, 0.1), 1.0, 1.0, EXAMPLE_BRANCH_WEIGHT);
    let passed = (low.lhs + 0.1969).abs() <= TOL_LHS
        && !low.holds
        && (high.lhs - 0.2031).abs() <= TOL_LHS
        && high.holds;
    CheckResult {
        name: "extension condition values".into(),
        passed,
        detail: format!(
            "alpha1=0.1: {:.4} (holds={}), alpha1=0.5: {:.4} (holds={})",
            low.lhs, low.holds, high.lhs, high.holds
        ),
    }
}

pub fn verify_paper() -> VerifyReport {
    VerifyReport {
        checks: vec![
            check_single_vertex_delay(),
            check_identity(),
            check_lengths(),
            check_stability(),
            check_condition(),
        ],
    }
}
