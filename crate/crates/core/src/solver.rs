//! Core search: brute-force unconstrained core, l-core by sliding windows
//! along leaf-to-leaf spines, and an exhaustive fixed-grid oracle.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde_json::json;

use crate::error::{Result, SqcError};
use crate::incremental::{
    check_window_length, refine_offsets, scan_profile, stepped_offsets, SpineProfile,
};
use crate::instance::TreeInstance;
use crate::metrics::{evaluate_direct, EvalParams, PathMetrics};
use crate::path::{PathKey, PathLocus, Spine, POSITION_EPS};
use crate::{fmt_num, json_num};

/// Subtree aggregates of the tree rooted at `root`.
#[derive(Debug, Clone)]
pub struct DownWeights {
    root: usize,
    parent: Vec<Option<usize>>,
    parent_len: Vec<f64>,
    children: Vec<Vec<usize>>,
    w_down: Vec<f64>,
    sum_d: Vec<f64>,
    sum_star: Vec<f64>,
    total_d: Vec<f64>,
    wg_down: Vec<f64>,
    wg2_down: Vec<f64>,
    w_total: f64,
    wg_total: f64,
    wg2_total: f64,
}

/// Aggregates over the component on one side of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideSums {
    pub weight: f64,
    /// Σ w_v d(x, v) measured from the near end `x` of the edge.
    pub weighted_distance: f64,
    pub weighted_g: f64,
    pub weighted_g2: f64,
}

impl DownWeights {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// d(v, par(v)); zero at the root.
    pub fn parent_length(&self, v: usize) -> f64 {
        self.parent_len[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// w̄_down(v): weight of the subtree of `v`.
    pub fn w_down(&self, v: usize) -> f64 {
        self.w_down[v]
    }

    /// Σ_{u in subtree(v)} w_u d(v, u).
    pub fn sum_d(&self, v: usize) -> f64 {
        self.sum_d[v]
    }

    /// `sum_d(v)` measured from the parent of `v`.
    pub fn sum_star(&self, v: usize) -> f64 {
        self.sum_star[v]
    }

    /// Σ_u w_u d(v, u) over the whole tree.
    pub fn total_d(&self, v: usize) -> f64 {
        self.total_d[v]
    }

    /// Aggregates of the component containing `y` after removing edge `x`-`y`.
    pub fn side(&self, x: usize, y: usize) -> SideSums {
        if self.parent[y] == Some(x) {
            SideSums {
                weight: self.w_down[y],
                weighted_distance: self.sum_star[y],
                weighted_g: self.wg_down[y],
                weighted_g2: self.wg2_down[y],
            }
        } else {
            debug_assert_eq!(self.parent[x], Some(y));
            SideSums {
                weight: self.w_total - self.w_down[x],
                weighted_distance: self.total_d[x] - self.sum_d[x],
                weighted_g: self.wg_total - self.wg_down[x],
                weighted_g2: self.wg2_total - self.wg2_down[x],
            }
        }
    }
}

pub fn precompute_downweights(inst: &TreeInstance, root: usize) -> Result<DownWeights> {
    let n = inst.len();
    if root >= n {
        return Err(SqcError::UnknownVertex(format!("index {root}")));
    }
    let mut parent = vec![None; n];
    let mut parent_len = vec![0.0; n];
    let mut children = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(c, len) in inst.neighbors(v) {
            if !seen[c] {
                seen[c] = true;
                parent[c] = Some(v);
                parent_len[c] = len;
                children[v].push(c);
                stack.push(c);
            }
        }
    }

    let mut w_down: Vec<f64> = inst.weights().to_vec();
    let mut wg_down: Vec<f64> = (0..n).map(|v| inst.weight(v) * inst.handling_time(v)).collect();
    let mut wg2_down: Vec<f64> = (0..n)
        .map(|v| inst.weight(v) * inst.handling_time(v).powi(2))
        .collect();
    let mut sum_d = vec![0.0; n];
    let mut sum_star = vec![0.0; n];
    for &v in order.iter().rev() {
        for &c in &children[v] {
            w_down[v] += w_down[c];
            wg_down[v] += wg_down[c];
            wg2_down[v] += wg2_down[c];
            sum_d[v] += sum_star[c];
        }
        sum_star[v] = sum_d[v] + w_down[v] * parent_len[v];
    }

    let w_total = w_down[root];
    let mut total_d = vec![0.0; n];
    total_d[root] = sum_d[root];
    for &v in &order {
        if let Some(p) = parent[v] {
            total_d[v] = total_d[p] + parent_len[v] * (w_total - 2.0 * w_down[v]);
        }
    }
    Ok(DownWeights {
        root,
        parent,
        parent_len,
        children,
        wg_total: wg_down[root],
        wg2_total: wg2_down[root],
        w_down,
        sum_d,
        sum_star,
        total_d,
        wg_down,
        wg2_down,
        w_total,
    })
}

/// Options for the l-core search.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LcoreOptions {
    /// Extra equally spaced offsets per gap between event offsets.
    pub grid: Option<usize>,
    /// Shift step: also evaluate windows moved by multiples of this
    /// distance from every vertex-aligned position.
    pub step: Option<f64>,
    /// Also consider every vertex-to-vertex path shorter than `l`.
    pub at_most: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub best: PathLocus,
    pub best_label: String,
    pub metrics: PathMetrics,
    pub candidates_evaluated: usize,
    pub ties: usize,
    pub elapsed: Duration,
    pub config: serde_json::Value,
}

impl SolveReport {
    pub const CSV_HEADER: &'static str = "mode,l,best_path,|P|,F,stable,candidates,ties";

    /// Report document; wall time is included only when `timing` is set so
    /// that the default output is reproducible byte for byte.
    pub fn to_json(&self, timing: bool) -> serde_json::Value {
        let mut doc = json!({
            "best_path": self.best_label,
            "length": json_num(self.metrics.length),
            "metrics": self.metrics.to_json_value(),
            "candidates": self.candidates_evaluated,
            "ties": self.ties,
            "config": self.config,
        });
        if timing {
            doc["elapsed_ms"] = json!(self.elapsed.as_secs_f64() * 1e3);
        }
        doc
    }

    pub fn csv_row(&self) -> String {
        let mode = self.config["mode"].as_str().unwrap_or("");
        let l = match &self.config["l"] {
            serde_json::Value::Number(x) => fmt_num(x.as_f64().unwrap()),
            _ => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            mode,
            l,
            self.best_label,
            fmt_num(self.metrics.length),
            fmt_num(self.metrics.f),
            self.metrics.stable,
            self.candidates_evaluated,
            self.ties
        )
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    key: PathKey,
    f: f64,
    length: f64,
    locus: PathLocus,
}

fn candidate(locus: PathLocus, m: &PathMetrics) -> Candidate {
    Candidate {
        key: locus.key(),
        f: m.f,
        length: m.length,
        locus,
    }
}

fn same_f(a: f64, b: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return a == b;
    }
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Deduplicates by locus and picks the winner: lowest F, then shortest
/// length, then smallest key. Returns (winner, distinct count, ties).
fn select(mut cands: Vec<Candidate>) -> (Candidate, usize, usize) {
    cands.sort_by(|a, b| a.key.cmp(&b.key).then(a.f.total_cmp(&b.f)));
    cands.dedup_by(|later, earlier| later.key == earlier.key);
    let distinct = cands.len();
    let f_min = cands
        .iter()
        .map(|c| c.f)
        .min_by(|a, b| a.total_cmp(b))
        .expect("at least one candidate");
    let mut tied: Vec<Candidate> = cands.into_iter().filter(|c| same_f(c.f, f_min)).collect();
    let ties = tied.len();
    tied.sort_by(|a, b| {
        let la = (a.length / POSITION_EPS).round() as i64;
        let lb = (b.length / POSITION_EPS).round() as i64;
        la.cmp(&lb).then_with(|| a.key.cmp(&b.key))
    });
    (tied.swap_remove(0), distinct, ties)
}

fn finish(
    inst: &TreeInstance,
    params: &EvalParams,
    cands: Vec<Candidate>,
    started: Instant,
    config: serde_json::Value,
) -> Result<SolveReport> {
    let (best, distinct, ties) = select(cands);
    let metrics = evaluate_direct(inst, &best.locus, params)?;
    debug_assert!(same_f(metrics.f, best.f) || (metrics.f - best.f).abs() < 1e-9);
    Ok(SolveReport {
        best_label: best.locus.render(inst),
        best: best.locus,
        metrics,
        candidates_evaluated: distinct,
        ties,
        elapsed: started.elapsed(),
        config,
    })
}

fn params_json(params: &EvalParams) -> serde_json::Value {
    json!({"alpha1": params.alpha1, "alpha2": params.alpha2, "beta": params.beta})
}

fn vertex_paths(inst: &TreeInstance, params: &EvalParams, max_len: f64) -> Result<Vec<Candidate>> {
    let n = inst.len();
    let per_start: Vec<Result<Vec<Candidate>>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            for v in u..n {
                if inst.distance(u, v) > max_len + POSITION_EPS {
                    continue;
                }
                let locus = PathLocus::between(inst, u, v);
                let m = evaluate_direct(inst, &locus, params)?;
                out.push(candidate(locus, &m));
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for part in per_start {
        all.extend(part?);
    }
    Ok(all)
}

/// Best vertex-to-vertex path (single vertices included) by exhaustive
/// enumeration.
pub fn solve_core_brute(inst: &TreeInstance, params: &EvalParams) -> Result<SolveReport> {
    params.validate()?;
    let started = Instant::now();
    let cands = vertex_paths(inst, params, f64::INFINITY)?;
    finish(
        inst,
        params,
        cands,
        started,
        json!({"mode": "core", "params": params_json(params)}),
    )
}

/// All length-`l` windows on the `v1`–`v2` spine at event offsets.
pub fn enumerate_windows(
    inst: &TreeInstance,
    v1: usize,
    v2: usize,
    l: f64,
) -> Result<Vec<PathLocus>> {
    if v1 >= inst.len() || v2 >= inst.len() {
        return Err(SqcError::InvalidPath("spine end out of range".into()));
    }
    let spine = Spine::between(inst, v1, v2);
    check_window_length(l, spine.total_length())?;
    spine
        .event_offsets(l)
        .into_iter()
        .map(|s| spine.window(inst, s, l))
        .collect()
}

fn leaf_pairs(inst: &TreeInstance, l: f64) -> Vec<(usize, usize)> {
    let leaves = inst.leaves();
    let mut pairs = Vec::new();
    for (i, &a) in leaves.iter().enumerate() {
        for &b in &leaves[i + 1..] {
            if inst.distance(a, b) >= l - POSITION_EPS {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Best window of length exactly `l` (or at most `l` with
/// `options.at_most`).
///
/// Every window lies on some leaf-to-leaf path, and a window with an end on a
/// vertex is an event window of any spine extending it, so scanning the
/// leaf-pair spines covers all event windows of all vertex-pair spines.
pub fn solve_lcore(
    inst: &TreeInstance,
    l: f64,
    params: &EvalParams,
    options: &LcoreOptions,
) -> Result<SolveReport> {
    params.validate()?;
    check_window_length(l, inst.diameter())?;
    if let Some(step) = options.step {
        if !(step.is_finite() && step > 0.0) {
            return Err(SqcError::InvalidParams(format!(
                "shift step must be positive, got {step}"
            )));
        }
    }
    let started = Instant::now();
    let dw = precompute_downweights(inst, 0)?;
    let per_pair: Vec<Result<Vec<Candidate>>> = leaf_pairs(inst, l)
        .into_par_iter()
        .map(|(a, b)| {
            let spine = Spine::between(inst, a, b);
            let mut offsets = refine_offsets(&spine.event_offsets(l), options.grid);
            if let Some(step) = options.step {
                offsets.extend(stepped_offsets(&spine, l, step));
                offsets.sort_by(f64::total_cmp);
                offsets.dedup_by(|b, a| *b - *a < POSITION_EPS);
            }
            let profile = SpineProfile::new(inst, &dw, spine);
            let scan = scan_profile(&profile, l, params, offsets);
            let spine = scan.spine();
            scan.offsets()
                .iter()
                .zip(scan.metrics())
                .map(|(&s, m)| Ok(candidate(spine.window(inst, s, l)?, m)))
                .collect()
        })
        .collect();
    let mut cands = Vec::new();
    for part in per_pair {
        cands.extend(part?);
    }
    if options.at_most {
        cands.extend(vertex_paths(inst, params, l)?);
    }
    finish(
        inst,
        params,
        cands,
        started,
        json!({
            "mode": "lcore",
            "l": l,
            "grid": options.grid.unwrap_or(0),
            "step": options.step,
            "at_most": options.at_most,
            "params": params_json(params),
        }),
    )
}

/// Uniform grid offsets 0, h, 2h, ... plus the final flush offset.
fn grid_offsets(span: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let s = k as f64 * h;
        if s >= span - POSITION_EPS {
            break;
        }
        out.push(s);
        k += 1;
    }
    out.push(span.max(0.0));
    out
}

/// Exhaustive reference for `solve_lcore`: every spine between any two
/// vertices, windows on a uniform grid of pitch `grid_step`, each evaluated
/// from the definitions.
pub fn oracle_lcore(
    inst: &TreeInstance,
    l: f64,
    params: &EvalParams,
    grid_step: f64,
) -> Result<SolveReport> {
    params.validate()?;
    check_window_length(l, inst.diameter())?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(SqcError::InvalidParams(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let started = Instant::now();
    let n = inst.len();
    let per_start: Vec<Result<Vec<Candidate>>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            for v in u + 1..n {
                let spine = Spine::between(inst, u, v);
                let span = spine.total_length() - l;
                if span < -POSITION_EPS {
                    continue;
                }
                for s in grid_offsets(span, grid_step) {
                    let locus = spine.window(inst, s, l)?;
                    let m = evaluate_direct(inst, &locus, params)?;
                    out.push(candidate(locus, &m));
                }
            }
            Ok(out)
        })
        .collect();
    let mut cands = Vec::new();
    for part in per_start {
        cands.extend(part?);
    }
    finish(
        inst,
        params,
        cands,
        started,
        json!({
            "mode": "oracle",
            "l": l,
            "grid_step": grid_step,
            "params": params_json(params),
        }),
    )
}
