//! Stochastic queue core of a tree.
//!
//! A path in a weighted tree is operated as an M/G/1 facility: clients walk to
//! the closest point of the path, a single server travels along the path to
//! serve them in FCFS order. This crate evaluates any such path, provides the
//! extension and sliding-window recursions, searches for the best core (and
//! the best core of fixed length), and simulates the queue to cross-check the
//! analytic delay.

pub mod error;
pub mod incremental;
pub mod instance;
pub mod metrics;
pub mod path;
pub mod qsim;
pub mod solver;

pub use error::{Result, SqcError};
pub use incremental::{
    extend_metrics, extension_condition, scan_shift, ExtensionCondition, ExtensionState,
    ShiftScan,
};
pub use instance::{generate_random, parse_instance, EdgeRecord, TreeInstance, VertexRecord};
pub use metrics::{
    decompose, evaluate_direct, queue_delay, EvalParams, PathDecomposition, PathMetrics,
};
pub use path::{Overhang, PathKey, PathLocus, Spine};
pub use qsim::{
    compare_analytic, simulate_path, ReplicationStats, ServiceModel, SimConfig, SimResult, Verdict,
};
pub use solver::{
    enumerate_windows, oracle_lcore, precompute_downweights, solve_core_brute, solve_lcore,
    DownWeights, LcoreOptions, SideSums, SolveReport,
};

/// Renders a number for CSV output; infinities print as `inf`.
pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// JSON value for a number; infinities become the string `"inf"`.
pub fn json_num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::String(fmt_num(x))
    }
}
