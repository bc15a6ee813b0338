//! Objective grid over instance size, seed, total rate and core length.

use std::time::{Duration, Instant};

use sqc_core::{fmt_num, generate_random, solve_lcore, EvalParams, LcoreOptions, Result};

pub const CAVEAT: &str = "# random instances: the reference benchmark trees are not available, \
so only the trends (not the values) are comparable";

#[derive(Debug, Clone)]
pub struct BenchRequest {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub lengths: Vec<f64>,
    /// Edge lengths drawn uniformly from this list.
    pub edge_lengths: Vec<f64>,
    pub params: EvalParams,
}

impl Default for BenchRequest {
    fn default() -> Self {
        BenchRequest {
            sizes: vec![20, 50, 90],
            seeds: vec![1, 2, 3],
            lambdas: vec![0.1, 0.4, 0.8],
            lengths: vec![4.0, 10.0, 16.0],
            edge_lengths: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            params: EvalParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Value { f: f64, stable: bool },
    /// The core length exceeds the diameter of the instance.
    NotApplicable,
}

#[derive(Debug, Clone)]
pub struct BenchCell {
    pub n: usize,
    pub seed: u64,
    pub lambda: f64,
    pub length: f64,
    pub value: CellValue,
    pub best_path: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct BenchGrid {
    pub cells: Vec<BenchCell>,
}

impl BenchGrid {
    pub fn header(timing: bool) -> &'static str {
        if timing {
            "n,seed,lambda,l,F,stable,best_path,time_ms"
        } else {
            "n,seed,lambda,l,F,stable,best_path"
        }
    }

    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = format!("{CAVEAT}\n{}\n", Self::header(timing));
        for c in &self.cells {
            let (f, stable) = match c.value {
                CellValue::Value { f, stable } => (fmt_num(f), stable.to_string()),
                CellValue::NotApplicable => ("n/a".into(), "n/a".into()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                c.n,
                c.seed,
                fmt_num(c.lambda),
                fmt_num(c.length),
                f,
                stable,
                c.best_path
            ));
            if timing {
                out.push_str(&format!(",{:.3}", c.elapsed.as_secs_f64() * 1e3));
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, n: usize, seed: u64, lambda: f64, length: f64) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.seed == seed && c.lambda == lambda && c.length == length)
    }
}

/// Cells in order size, seed, λ, l.
pub fn run_bench(req: &BenchRequest) -> Result<BenchGrid> {
    req.params.validate()?;
    let mut cells = Vec::new();
    for &n in &req.sizes {
        for &seed in &req.seeds {
            let base = generate_random(n, &req.edge_lengths, seed)?;
            let diameter = base.diameter();
            for &lambda in &req.lambdas {
                let inst = base.with_total_rate(lambda)?;
                for &length in &req.lengths {
                    let started = Instant::now();
                    let (value, best_path) = if length > diameter {
                        (CellValue::NotApplicable, String::new())
                    } else {
                        let r = solve_lcore(&inst, length, &req.params, &LcoreOptions::default())?;
                        (
                            CellValue::Value {
                                f: r.metrics.f,
                                stable: r.metrics.stable,
                            },
                            r.best_label,
                        )
                    };
                    cells.push(BenchCell {
                        n,
                        seed,
                        lambda,
                        length,
                        value,
                        best_path,
                        elapsed: started.elapsed(),
                    });
                }
            }
        }
    }
    Ok(BenchGrid { cells })
}
