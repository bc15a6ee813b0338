//! Recursions: growing a path by one vertex, the sufficient condition for an
//! extension to be worse, and sliding a fixed-length window along a spine.

use crate::error::{Result, SqcError};
use crate::fmt_num;
use crate::instance::TreeInstance;
use crate::metrics::{queue_delay, EvalParams, PathMetrics};
use crate::path::{PathLocus, Spine, POSITION_EPS};
use crate::solver::{precompute_downweights, DownWeights};

/// Moments of a vertex path, carried along so that adding a neighbor costs
/// O(1) instead of a full re-evaluation.
///
/// Besides S̄ and S̄² the state keeps the mean server distance at both end
/// anchors: the second-moment update needs the service time at the end being
/// extended.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionState {
    path: PathLocus,
    branch_weights: Vec<f64>,
    sbar: f64,
    s2bar: f64,
    t1: f64,
    g: f64,
    lambda: f64,
    vt: f64,
    w_total: f64,
    dbar_first: f64,
    dbar_last: f64,
}

impl ExtensionState {
    pub fn start(inst: &TreeInstance, v: usize) -> Result<Self> {
        let g = inst
            .homogeneous_handling_time()
            .ok_or(SqcError::HeterogeneousHandling)?;
        if v >= inst.len() {
            return Err(SqcError::InvalidPath(format!("vertex index {v} out of range")));
        }
        let vt = inst.vt();
        let t1 = inst
            .distances_from(v)
            .iter()
            .zip(inst.weights())
            .map(|(d, w)| w * d)
            .sum::<f64>()
            / vt;
        Ok(ExtensionState {
            path: PathLocus::vertex(v),
            branch_weights: vec![inst.total_weight()],
            sbar: g,
            s2bar: g * g,
            t1,
            g,
            lambda: inst.lambda_total(),
            vt,
            w_total: inst.total_weight(),
            dbar_first: 0.0,
            dbar_last: 0.0,
        })
    }

    /// Builds the state of a vertex path by extending from its first anchor.
    pub fn from_path(inst: &TreeInstance, path: &PathLocus) -> Result<Self> {
        if !path.is_vertex_path() {
            return Err(SqcError::InvalidPath(
                "extension states cover vertex-to-vertex paths only".into(),
            ));
        }
        let anchors = path.anchors();
        let mut state = Self::start(inst, anchors[0])?;
        for &u in &anchors[1..] {
            state = extend_metrics(inst, &state, u)?;
        }
        Ok(state)
    }

    pub fn path(&self) -> &PathLocus {
        &self.path
    }

    pub fn branch_weights(&self) -> &[f64] {
        &self.branch_weights
    }

    pub fn sbar(&self) -> f64 {
        self.sbar
    }

    pub fn s2bar(&self) -> f64 {
        self.s2bar
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.sbar - self.g
    }

    pub fn qbar(&self) -> f64 {
        queue_delay(self.lambda, self.sbar, self.s2bar).unwrap()
    }

    pub fn metrics(&self, params: &EvalParams) -> PathMetrics {
        PathMetrics::from_moments(
            self.path.length(),
            self.t1,
            self.t2(),
            self.g,
            self.sbar,
            self.s2bar,
            self.lambda,
            params,
        )
    }
}

/// State of `P ∪ {u}` for a vertex `u` adjacent to an end of `P`.
///
/// With branch weight w_u of the new end, d = d(P, u), W = w(T) and s_k the
/// service time at the end being extended:
///
/// ```text
/// S̄'  = S̄  + (2/vt) w_u (W − w_u) d
/// S̄²' = S̄² + (2/vt) w_u d S̄ + (2/vt) w_u (W − 2 w_u) d s_k
///            + (1/vt²) w_u (W − w_u) W d²
/// ```
///
/// The `s_k` term vanishes only when the extended end has zero service time
/// (e.g. growing a single vertex with G = 0).
pub fn extend_metrics(
    inst: &TreeInstance,
    state: &ExtensionState,
    u: usize,
) -> Result<ExtensionState> {
    if inst.homogeneous_handling_time() != Some(state.g) {
        return Err(SqcError::HeterogeneousHandling);
    }
    if u >= inst.len() {
        return Err(SqcError::InvalidPath(format!("vertex index {u} out of range")));
    }
    let anchors = state.path.anchors();
    if anchors.contains(&u) {
        return Err(SqcError::InvalidPath(format!(
            "`{}` is already on the path",
            inst.id(u)
        )));
    }
    let first = anchors[0];
    let last = *anchors.last().unwrap();
    let (at_end, endpoint, d) = if let Some(d) = inst.edge_length(last, u) {
        (true, last, d)
    } else if let Some(d) = inst.edge_length(first, u) {
        (false, first, d)
    } else {
        return Err(SqcError::InvalidPath(format!(
            "`{}` is not adjacent to an end of the path",
            inst.id(u)
        )));
    };

    let vt = state.vt;
    let w = state.w_total;
    let w_u = inst.side_weight(endpoint, u);
    let dbar_end = if at_end {
        state.dbar_last
    } else {
        state.dbar_first
    };
    let s_end = dbar_end / vt + state.g;

    let sbar = state.sbar + 2.0 / vt * w_u * (w - w_u) * d;
    let s2bar = state.s2bar
        + 2.0 / vt * w_u * d * state.sbar
        + 2.0 / vt * w_u * (w - 2.0 * w_u) * d * s_end
        + w_u * (w - w_u) * w * d * d / (vt * vt);
    let t1 = state.t1 - w_u * d / vt;

    let mut spine = anchors.to_vec();
    let mut branch_weights = state.branch_weights.clone();
    let (dbar_first, dbar_last);
    if at_end {
        spine.push(u);
        *branch_weights.last_mut().unwrap() -= w_u;
        branch_weights.push(w_u);
        dbar_first = state.dbar_first + w_u * d;
        dbar_last = dbar_end + (w - w_u) * d;
    } else {
        spine.insert(0, u);
        branch_weights[0] -= w_u;
        branch_weights.insert(0, w_u);
        dbar_first = dbar_end + (w - w_u) * d;
        dbar_last = state.dbar_last + w_u * d;
    }

    Ok(ExtensionState {
        path: PathLocus::from_vertices(inst, &spine)?,
        branch_weights,
        sbar,
        s2bar,
        t1,
        dbar_first,
        dbar_last,
        ..state.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionCondition {
    pub lhs: f64,
    pub holds: bool,
}

/// Sufficient condition for `F(P ∪ {u}) > F(P)` when d(P, u) > 0:
///
/// ```text
/// α1 + α2 w_u ((2/vt) β (W − w_u) − 1/vt + β/vt) > 0
/// ```
///
/// It is not necessary: extensions with a negative left-hand side can still
/// make F worse.
pub fn extension_condition(
    params: &EvalParams,
    vt: f64,
    w_total: f64,
    w_tu: f64,
) -> ExtensionCondition {
    let beta = params.beta;
    let lhs =
        params.alpha1 + params.alpha2 * w_tu * (2.0 / vt * beta * (w_total - w_tu) - 1.0 / vt + beta / vt);
    ExtensionCondition {
        lhs,
        holds: lhs > 0.0,
    }
}

/// Spine-local aggregates for fast window evaluation: everything hanging off
/// each spine vertex (its own weight included) is summarized by its weight,
/// its weighted distance to the spine vertex, and its weighted handling-time
/// moments.
#[derive(Debug, Clone)]
pub(crate) struct SpineProfile {
    spine: Spine,
    hang_w: Vec<f64>,
    // Prefix sums over spine indices, length m + 1.
    pre_w: Vec<f64>,
    pre_wpos: Vec<f64>,
    pre_wg: Vec<f64>,
    hang_wg: Vec<f64>,
    hang_wg2: Vec<f64>,
    total_wd: f64,
    total_wg: f64,
    total_wg2: f64,
    lambda: f64,
    vt: f64,
}

impl SpineProfile {
    pub(crate) fn new(inst: &TreeInstance, dw: &DownWeights, spine: Spine) -> Self {
        let verts = spine.vertices();
        let m = verts.len();
        let mut hang_w = vec![0.0; m];
        let mut hang_wd = vec![0.0; m];
        let mut hang_wg = vec![0.0; m];
        let mut hang_wg2 = vec![0.0; m];
        for (j, &x) in verts.iter().enumerate() {
            let g = inst.handling_time(x);
            let w = inst.weight(x);
            hang_w[j] = w;
            hang_wg[j] = w * g;
            hang_wg2[j] = w * g * g;
            let prev = (j > 0).then(|| verts[j - 1]);
            let next = (j + 1 < m).then(|| verts[j + 1]);
            for &(y, _) in inst.neighbors(x) {
                if Some(y) == prev || Some(y) == next {
                    continue;
                }
                let side = dw.side(x, y);
                hang_w[j] += side.weight;
                hang_wd[j] += side.weighted_distance;
                hang_wg[j] += side.weighted_g;
                hang_wg2[j] += side.weighted_g2;
            }
        }
        let prefix = |vals: &[f64]| {
            let mut out = Vec::with_capacity(vals.len() + 1);
            let mut acc = 0.0;
            out.push(acc);
            for v in vals {
                acc += v;
                out.push(acc);
            }
            out
        };
        let wpos: Vec<f64> = hang_w
            .iter()
            .zip(spine.positions())
            .map(|(w, p)| w * p)
            .collect();
        SpineProfile {
            pre_w: prefix(&hang_w),
            pre_wpos: prefix(&wpos),
            pre_wg: prefix(&hang_wg),
            total_wd: hang_wd.iter().sum(),
            total_wg: hang_wg.iter().sum(),
            total_wg2: hang_wg2.iter().sum(),
            hang_w,
            hang_wg,
            hang_wg2,
            spine,
            lambda: inst.lambda_total(),
            vt: inst.vt(),
        }
    }

    pub(crate) fn spine(&self) -> &Spine {
        &self.spine
    }

    /// Metrics of the window `[start, start + l]`.
    pub(crate) fn window_metrics(&self, start: f64, l: f64, params: &EvalParams) -> PathMetrics {
        let pos = self.spine.positions();
        let m = pos.len();
        let end = start + l;
        // Vertices before `behind` lie strictly behind the start point,
        // vertices after `ahead` strictly beyond the end point.
        let behind = self.spine.index_at_or_after(start);
        let ahead = self.spine.index_at_or_before(end);
        let at_start = behind < m && (pos[behind] - start).abs() < POSITION_EPS;
        let at_end = (pos[ahead] - end).abs() < POSITION_EPS;

        let range = |a: usize, b: usize, pre: &[f64]| pre[b] - pre[a];
        let w_behind = range(0, behind, &self.pre_w);
        let w_ahead = range(ahead + 1, m, &self.pre_w);
        let t1 = (self.total_wd + start * w_behind - range(0, behind, &self.pre_wpos)
            + range(ahead + 1, m, &self.pre_wpos)
            - end * w_ahead)
            / self.vt;

        // (position, weight, Σ w G, Σ w G²) per anchor point.
        let mut points: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(ahead + 3 - behind.min(ahead + 1));
        let g2_range = |a: usize, b: usize| self.hang_wg2[a..b].iter().sum::<f64>();
        let mut first = (
            start,
            w_behind,
            range(0, behind, &self.pre_wg),
            g2_range(0, behind),
        );
        let lo = if at_start {
            first.1 += self.hang_w[behind];
            first.2 += self.hang_wg[behind];
            first.3 += self.hang_wg2[behind];
            behind + 1
        } else {
            behind
        };
        let mut last = (
            end,
            w_ahead,
            range(ahead + 1, m, &self.pre_wg),
            g2_range(ahead + 1, m),
        );
        let hi = if at_end {
            last.1 += self.hang_w[ahead];
            last.2 += self.hang_wg[ahead];
            last.3 += self.hang_wg2[ahead];
            ahead
        } else {
            ahead + 1
        };
        points.push(first);
        for j in lo..hi {
            points.push((pos[j], self.hang_w[j], self.hang_wg[j], self.hang_wg2[j]));
        }
        points.push(last);

        // d̄ at every point in one forward and one backward sweep.
        let k = points.len();
        let mut dbar = vec![0.0; k];
        let (mut w_acc, mut wp_acc) = (0.0, 0.0);
        for (i, &(p, w, _, _)) in points.iter().enumerate() {
            dbar[i] += p * w_acc - wp_acc;
            w_acc += w;
            wp_acc += w * p;
        }
        let (mut w_acc, mut wp_acc) = (0.0, 0.0);
        for (i, &(p, w, _, _)) in points.iter().enumerate().rev() {
            dbar[i] += wp_acc - p * w_acc;
            w_acc += w;
            wp_acc += w * p;
        }

        let (mut t2, mut s2bar) = (0.0, 0.0);
        for (i, &(_, w, wg, wg2)) in points.iter().enumerate() {
            let t = dbar[i] / self.vt;
            t2 += w * t;
            s2bar += w * t * t + 2.0 * t * wg + wg2;
        }
        let gbar = self.total_wg;
        debug_assert!((self.total_wg2 - points.iter().map(|p| p.3).sum::<f64>()).abs() < 1e-9);
        PathMetrics::from_moments(l, t1, t2, gbar, t2 + gbar, s2bar, self.lambda, params)
    }
}

/// `grid` extra equally spaced offsets inside every gap between consecutive
/// events.
pub(crate) fn refine_offsets(events: &[f64], grid: Option<usize>) -> Vec<f64> {
    let k = grid.unwrap_or(0);
    let mut out = Vec::with_capacity(events.len() * (k + 1));
    for (i, &e) in events.iter().enumerate() {
        out.push(e);
        if let Some(&next) = events.get(i + 1) {
            for t in 1..=k {
                out.push(e + (next - e) * t as f64 / (k + 1) as f64);
            }
        }
    }
    out
}

/// Event offsets plus, for a shift step `d`, every offset reached by moving
/// the window `d, 2d, ...` away from a vertex-aligned position in either
/// direction.
pub(crate) fn stepped_offsets(spine: &Spine, l: f64, step: f64) -> Vec<f64> {
    let span = (spine.total_length() - l).max(0.0);
    let mut out = spine.event_offsets(l);
    for &p in spine.positions() {
        for base in [p, p - l] {
            let mut k = 1u64;
            loop {
                let fwd = base + k as f64 * step;
                let back = base - k as f64 * step;
                if fwd > span + POSITION_EPS && back < -POSITION_EPS {
                    break;
                }
                for s in [fwd, back] {
                    if (-POSITION_EPS..=span + POSITION_EPS).contains(&s) {
                        out.push(s.clamp(0.0, span));
                    }
                }
                k += 1;
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|b, a| *b - *a < POSITION_EPS);
    out
}

pub(crate) fn check_window_length(l: f64, available: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(SqcError::InvalidLength {
            length: l,
            reason: "must be positive".into(),
        });
    }
    if l > available + POSITION_EPS {
        return Err(SqcError::InvalidLength {
            length: l,
            reason: format!("exceeds the available distance {available}"),
        });
    }
    Ok(())
}

/// Every evaluated position of a length-`l` window sliding from `v̄1` to `v̄2`.
#[derive(Debug, Clone)]
pub struct ShiftScan {
    spine: Spine,
    length: f64,
    offsets: Vec<f64>,
    metrics: Vec<PathMetrics>,
    argmin_f: usize,
    argmin_sbar: usize,
}

impl ShiftScan {
    pub fn spine(&self) -> &Spine {
        &self.spine
    }

    pub fn window_length(&self) -> f64 {
        self.length
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn metrics(&self) -> &[PathMetrics] {
        &self.metrics
    }

    pub fn argmin_f(&self) -> usize {
        self.argmin_f
    }

    pub fn argmin_sbar(&self) -> usize {
        self.argmin_sbar
    }

    pub fn locus(&self, inst: &TreeInstance, i: usize) -> PathLocus {
        self.spine
            .window(inst, self.offsets[i], self.length)
            .expect("scan offsets fit the spine")
    }

    pub const CSV_HEADER: &'static str = "offset,T1,T2,Sbar,S2bar,Qbar,F";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (s, m) in self.offsets.iter().zip(&self.metrics) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_num(*s),
                fmt_num(m.t1),
                fmt_num(m.t2),
                fmt_num(m.sbar),
                fmt_num(m.s2bar),
                fmt_num(m.qbar),
                fmt_num(m.f)
            ));
        }
        out
    }
}

fn first_argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if i == 0 || v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Slides a window of length `l` along the `v1`–`v2` path, evaluating it at
/// every event offset (an end of the window on a spine vertex) plus `grid`
/// extra offsets per gap between events.
pub fn scan_shift(
    inst: &TreeInstance,
    v1: usize,
    v2: usize,
    l: f64,
    params: &EvalParams,
    grid: Option<usize>,
) -> Result<ShiftScan> {
    params.validate()?;
    if v1 >= inst.len() || v2 >= inst.len() {
        return Err(SqcError::InvalidPath("spine end out of range".into()));
    }
    let spine = Spine::between(inst, v1, v2);
    check_window_length(l, spine.total_length())?;
    let dw = precompute_downweights(inst, v1)?;
    let offsets = refine_offsets(&spine.event_offsets(l), grid);
    let profile = SpineProfile::new(inst, &dw, spine);
    Ok(scan_profile(&profile, l, params, offsets))
}

pub(crate) fn scan_profile(
    profile: &SpineProfile,
    l: f64,
    params: &EvalParams,
    offsets: Vec<f64>,
) -> ShiftScan {
    let metrics: Vec<PathMetrics> = offsets
        .iter()
        .map(|&s| profile.window_metrics(s, l, params))
        .collect();
    ShiftScan {
        spine: profile.spine().clone(),
        length: l,
        argmin_f: first_argmin(metrics.iter().map(|m| m.f)),
        argmin_sbar: first_argmin(metrics.iter().map(|m| m.sbar)),
        offsets,
        metrics,
    }
}
