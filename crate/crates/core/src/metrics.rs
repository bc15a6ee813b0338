//! Direct evaluation of a path as a mobile-server facility.
//!
//! Every quantity here is computed from its definition: the branch
//! decomposition assigns each vertex to its gate on the path, the server sits
//! at anchor point `p` with probability equal to the weight of `p`'s branch,
//! and a demand from vertex `i` takes
//!
//! ```text
//! s_i = d̄(û, gate(i)) / vt + G_i
//! ```
//!
//! to serve. `S̄ = Σ w_i s_i`, `S̄² = Σ w_i s_i²`, and the queueing delay is
//! the Pollaczek–Khinchine mean wait `λ S̄² / (2 (1 − λ S̄))`.

use serde::Serialize;

use crate::error::{Result, SqcError};
use crate::fmt_num;
use crate::instance::TreeInstance;
use crate::path::PathLocus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalParams {
    /// Cost per unit of path length.
    pub alpha1: f64,
    /// Price per unit of response time.
    pub alpha2: f64,
    /// Weight of the server-side terms (queueing + travel) against client travel.
    pub beta: f64,
}

impl EvalParams {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64) -> Result<Self> {
        let p = EvalParams {
            alpha1,
            alpha2,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1.is_finite() && self.alpha1 >= 0.0) {
            return Err(SqcError::InvalidParams(format!(
                "alpha1 must be >= 0, got {}",
                self.alpha1
            )));
        }
        if !(self.alpha2.is_finite() && self.alpha2 >= 0.0) {
            return Err(SqcError::InvalidParams(format!(
                "alpha2 must be >= 0, got {}",
                self.alpha2
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(SqcError::InvalidParams(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            alpha1: 0.0,
            alpha2: 1.0,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorKind {
    Vertex(usize),
    /// Interior point of edge `from`-`toward`, `offset` units from `from`.
    Edge {
        from: usize,
        toward: usize,
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPoint {
    pub kind: AnchorKind,
    /// Distance from the start of the path.
    pub position: f64,
}

#[derive(Debug, Clone)]
pub struct PathDecomposition {
    points: Vec<AnchorPoint>,
    branch_weight: Vec<f64>,
    gate: Vec<usize>,
    dist_to_path: Vec<f64>,
}

impl PathDecomposition {
    pub fn points(&self) -> &[AnchorPoint] {
        &self.points
    }

    /// w_{T_p} per anchor point.
    pub fn branch_weights(&self) -> &[f64] {
        &self.branch_weight
    }

    /// Index into [`points`](Self::points) of the gate of vertex `v`.
    pub fn gate(&self, v: usize) -> usize {
        self.gate[v]
    }

    /// d(P, v)
    pub fn dist_to_path(&self, v: usize) -> f64 {
        self.dist_to_path[v]
    }

    pub fn anchor_distance(&self, i: usize, j: usize) -> f64 {
        (self.points[i].position - self.points[j].position).abs()
    }

    pub fn point_of_vertex(&self, v: usize) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.kind == AnchorKind::Vertex(v))
    }

    /// Prob_P(û = p) for every anchor point.
    pub fn server_distribution(&self) -> &[f64] {
        &self.branch_weight
    }

    /// d̄_P(û, p) = Σ_j Prob_P(û = p_j) d(p_j, p).
    pub fn mean_server_distance(&self, p: usize) -> Result<f64> {
        if p >= self.points.len() {
            return Err(SqcError::InvalidPath(format!(
                "anchor point {p} out of range (path has {})",
                self.points.len()
            )));
        }
        Ok(self
            .branch_weight
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.anchor_distance(j, p))
            .sum())
    }

    fn mean_server_distances(&self) -> Vec<f64> {
        (0..self.points.len())
            .map(|p| self.mean_server_distance(p).unwrap())
            .collect()
    }
}

pub fn decompose(inst: &TreeInstance, path: &PathLocus) -> Result<PathDecomposition> {
    // Re-validate: the locus may have been built against another instance.
    let path = PathLocus::new(inst, path.spine().to_vec(), path.head(), path.tail())?;
    let spine = path.spine();
    let m = spine.len();
    let n = inst.len();

    let mut points = Vec::with_capacity(m + 2);
    let mut roots: Vec<(usize, Option<usize>, f64)> = Vec::new(); // (start vertex, blocked, base dist) per point
    if let Some(o) = path.start_overhang(inst) {
        points.push(AnchorPoint {
            kind: AnchorKind::Edge {
                from: spine[1],
                toward: spine[0],
                offset: o.offset,
            },
            position: 0.0,
        });
        roots.push((spine[0], Some(spine[1]), path.head()));
    }
    let lo = usize::from(path.head() > 0.0);
    let hi = if path.tail() > 0.0 { m - 1 } else { m };
    let mut cum = 0.0;
    for j in 0..hi {
        if j > 0 {
            cum += inst.edge_length(spine[j - 1], spine[j]).unwrap();
        }
        if j < lo {
            continue;
        }
        points.push(AnchorPoint {
            kind: AnchorKind::Vertex(spine[j]),
            position: cum - path.head(),
        });
        roots.push((spine[j], None, 0.0));
    }
    if let Some(o) = path.end_overhang(inst) {
        points.push(AnchorPoint {
            kind: AnchorKind::Edge {
                from: spine[m - 2],
                toward: spine[m - 1],
                offset: o.offset,
            },
            position: path.length(),
        });
        roots.push((spine[m - 1], Some(spine[m - 2]), path.tail()));
    }

    let mut on_spine = vec![false; n];
    for &v in spine {
        on_spine[v] = true;
    }

    let mut gate = vec![usize::MAX; n];
    let mut dist = vec![f64::NAN; n];
    let mut stack = Vec::new();
    for (p, &(root, blocked, base)) in roots.iter().enumerate() {
        match blocked {
            // Overhang point: everything on the far side of the edge.
            Some(b) => stack.push((root, b, base)),
            None => {
                assert_eq!(gate[root], usize::MAX, "vertex gated twice");
                gate[root] = p;
                dist[root] = 0.0;
                for &(y, len) in inst.neighbors(root) {
                    if !on_spine[y] {
                        stack.push((y, root, len));
                    }
                }
            }
        }
        while let Some((v, from, d)) = stack.pop() {
            assert_eq!(gate[v], usize::MAX, "vertex gated twice");
            gate[v] = p;
            dist[v] = d;
            for &(y, len) in inst.neighbors(v) {
                if y != from {
                    stack.push((y, v, d + len));
                }
            }
        }
    }
    debug_assert!(gate.iter().all(|&g| g != usize::MAX));

    let mut branch_weight = vec![0.0; points.len()];
    for v in 0..n {
        branch_weight[gate[v]] += inst.weight(v);
    }
    Ok(PathDecomposition {
        points,
        branch_weight,
        gate,
        dist_to_path: dist,
    })
}

/// Mean queueing delay of an M/G/1 queue; `+∞` once `λ S̄ ≥ 1`.
pub fn queue_delay(lambda: f64, sbar: f64, s2bar: f64) -> Result<f64> {
    if !(lambda >= 0.0 && sbar >= 0.0 && s2bar >= 0.0) {
        return Err(SqcError::InvalidParams(format!(
            "queue_delay needs non-negative inputs (lambda {lambda}, sbar {sbar}, s2bar {s2bar})"
        )));
    }
    let slack = 1.0 - lambda * sbar;
    if slack > 0.0 {
        Ok(lambda * s2bar / (2.0 * slack))
    } else {
        Ok(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMetrics {
    pub length: f64,
    pub t1: f64,
    pub t2: f64,
    pub gbar: f64,
    pub sbar: f64,
    pub s2bar: f64,
    pub qbar: f64,
    pub trbar: f64,
    pub f: f64,
    pub stable: bool,
}

/// TR̄ = β(Q̄ + T̄2) + Ḡ + (1 − β) T̄1, with the β·Q̄ term dropped when β = 0.
pub fn response_time(t1: f64, t2: f64, qbar: f64, gbar: f64, beta: f64) -> f64 {
    let server_side = if beta == 0.0 { 0.0 } else { beta * (qbar + t2) };
    server_side + gbar + (1.0 - beta) * t1
}

/// F = α1 |P| + α2 TR̄, with the α2 term dropped when α2 = 0.
pub fn objective(length: f64, trbar: f64, params: &EvalParams) -> f64 {
    let time_cost = if params.alpha2 == 0.0 {
        0.0
    } else {
        params.alpha2 * trbar
    };
    params.alpha1 * length + time_cost
}

impl PathMetrics {
    /// Completes the queueing and objective terms from the travel and
    /// service-time moments.
    #[allow(clippy::too_many_arguments)]
    pub fn from_moments(
        length: f64,
        t1: f64,
        t2: f64,
        gbar: f64,
        sbar: f64,
        s2bar: f64,
        lambda: f64,
        params: &EvalParams,
    ) -> Self {
        let stable = 1.0 - lambda * sbar > 0.0;
        let qbar = queue_delay(lambda, sbar.max(0.0), s2bar.max(0.0)).unwrap();
        let trbar = response_time(t1, t2, qbar, gbar, params.beta);
        PathMetrics {
            length,
            t1,
            t2,
            gbar,
            sbar,
            s2bar,
            qbar,
            trbar,
            f: objective(length, trbar, params),
            stable,
        }
    }

    pub const CSV_HEADER: &'static str = "path,|P|,T1,T2,Sbar,S2bar,Qbar,TRbar,F,stable";

    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            label,
            fmt_num(self.length),
            fmt_num(self.t1),
            fmt_num(self.t2),
            fmt_num(self.sbar),
            fmt_num(self.s2bar),
            fmt_num(self.qbar),
            fmt_num(self.trbar),
            fmt_num(self.f),
            self.stable
        )
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let num = crate::json_num;
        serde_json::json!({
            "length": num(self.length),
            "T1": num(self.t1),
            "T2": num(self.t2),
            "Gbar": num(self.gbar),
            "Sbar": num(self.sbar),
            "S2bar": num(self.s2bar),
            "Qbar": num(self.qbar),
            "TRbar": num(self.trbar),
            "F": num(self.f),
            "stable": self.stable,
        })
    }
}

/// Evaluates `path` from the definitions (no recursions).
pub fn evaluate_direct(
    inst: &TreeInstance,
    path: &PathLocus,
    params: &EvalParams,
) -> Result<PathMetrics> {
    params.validate()?;
    let decomp = decompose(inst, path)?;
    let dbar = decomp.mean_server_distances();
    let vt = inst.vt();
    let (mut t1, mut t2, mut gbar, mut sbar, mut s2bar) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for v in 0..inst.len() {
        let w = inst.weight(v);
        let g = inst.handling_time(v);
        let travel = dbar[decomp.gate(v)] / vt;
        let s = travel + g;
        t1 += w * decomp.dist_to_path(v) / vt;
        t2 += w * travel;
        gbar += w * g;
        sbar += w * s;
        s2bar += w * s * s;
    }
    Ok(PathMetrics::from_moments(
        path.length(),
        t1,
        t2,
        gbar,
        sbar,
        s2bar,
        inst.lambda_total(),
        params,
    ))
}
