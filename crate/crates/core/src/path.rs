//! Paths in a tree, possibly ending inside an edge.
//!
//! A [`PathLocus`] is stored as a *spine* (a vertex sequence `x_0..x_m`) with
//! `head` trimmed off the start of the first edge and `tail` trimmed off the
//! end of the last edge. With `head == tail == 0` it is an ordinary
//! vertex-to-vertex path. A positive `head` means the path starts on edge
//! `x_0`-`x_1`, i.e. it has an overhang of `len(x_0,x_1) - head` beyond the
//! first anchor toward `x_0`.

use std::cmp::Ordering;

use crate::error::{Result, SqcError};
use crate::instance::TreeInstance;

/// Positions closer than this are treated as the same point.
pub const POSITION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PathLocus {
    spine: Vec<usize>,
    head: f64,
    tail: f64,
    length: f64,
}

/// Fractional piece of an edge beyond an end anchor: the path continues
/// `offset` units from the anchor toward `toward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overhang {
    pub toward: usize,
    pub offset: f64,
}

/// Orientation-independent identity of a locus (vertex indices plus the two
/// trims quantized to 1e-9).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey {
    spine: Vec<usize>,
    head: i64,
    tail: i64,
}

fn quantize(x: f64) -> i64 {
    (x / POSITION_EPS).round() as i64
}

impl PathLocus {
    pub fn vertex(v: usize) -> Self {
        PathLocus {
            spine: vec![v],
            head: 0.0,
            tail: 0.0,
            length: 0.0,
        }
    }

    /// Vertex-to-vertex path through `vertices`, which must be consecutive
    /// neighbors in the tree.
    pub fn from_vertices(inst: &TreeInstance, vertices: &[usize]) -> Result<Self> {
        Self::new(inst, vertices.to_vec(), 0.0, 0.0)
    }

    pub fn between(inst: &TreeInstance, u: usize, v: usize) -> Self {
        Self::new(inst, inst.path_vertices(u, v), 0.0, 0.0)
            .expect("tree paths are valid loci")
    }

    pub fn new(inst: &TreeInstance, spine: Vec<usize>, head: f64, tail: f64) -> Result<Self> {
        let edge_lengths = spine_edges(inst, &spine)?;
        let head = if head.abs() < POSITION_EPS { 0.0 } else { head };
        let tail = if tail.abs() < POSITION_EPS { 0.0 } else { tail };
        if !(head.is_finite() && tail.is_finite()) || head < 0.0 || tail < 0.0 {
            return Err(SqcError::InvalidPath(format!(
                "trims must be finite and non-negative (head {head}, tail {tail})"
            )));
        }
        if edge_lengths.is_empty() {
            if head > 0.0 || tail > 0.0 {
                return Err(SqcError::InvalidPath(
                    "a single-vertex path has no edge to overhang".into(),
                ));
            }
            return Ok(Self::vertex(spine[0]));
        }
        let first = edge_lengths[0];
        let last = *edge_lengths.last().unwrap();
        if head >= first - POSITION_EPS {
            return Err(SqcError::InvalidPath(format!(
                "overhang offset {} outside (0, {first})",
                first - head
            )));
        }
        if tail >= last - POSITION_EPS {
            return Err(SqcError::InvalidPath(format!(
                "overhang offset {} outside (0, {last})",
                last - tail
            )));
        }
        if edge_lengths.len() == 1 && head + tail >= first - POSITION_EPS {
            return Err(SqcError::InvalidPath(
                "trims leave nothing of the only edge".into(),
            ));
        }
        let total: f64 = edge_lengths.iter().sum();
        Ok(PathLocus {
            spine,
            head,
            tail,
            length: total - head - tail,
        })
    }

    pub fn spine(&self) -> &[usize] {
        &self.spine
    }

    pub fn head(&self) -> f64 {
        self.head
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// |P|
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_vertex_path(&self) -> bool {
        self.head == 0.0 && self.tail == 0.0
    }

    /// Vertices lying on the path, in order. Empty only for a segment strictly
    /// inside one edge.
    pub fn anchors(&self) -> &[usize] {
        let m = self.spine.len();
        let lo = usize::from(self.head > 0.0);
        let hi = if self.tail > 0.0 { m - 1 } else { m };
        if lo >= hi {
            &[]
        } else {
            &self.spine[lo..hi]
        }
    }

    pub fn start_overhang(&self, inst: &TreeInstance) -> Option<Overhang> {
        (self.head > 0.0).then(|| Overhang {
            toward: self.spine[0],
            offset: inst.edge_length(self.spine[0], self.spine[1]).unwrap() - self.head,
        })
    }

    pub fn end_overhang(&self, inst: &TreeInstance) -> Option<Overhang> {
        let m = self.spine.len();
        (self.tail > 0.0).then(|| Overhang {
            toward: self.spine[m - 1],
            offset: inst.edge_length(self.spine[m - 2], self.spine[m - 1]).unwrap() - self.tail,
        })
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.anchors().contains(&v)
    }

    pub fn reversed(&self) -> Self {
        let mut spine = self.spine.clone();
        spine.reverse();
        PathLocus {
            spine,
            head: self.tail,
            tail: self.head,
            length: self.length,
        }
    }

    pub fn key(&self) -> PathKey {
        let fwd = PathKey {
            spine: self.spine.clone(),
            head: quantize(self.head),
            tail: quantize(self.tail),
        };
        let mut rev_spine = self.spine.clone();
        rev_spine.reverse();
        let rev = PathKey {
            spine: rev_spine,
            head: quantize(self.tail),
            tail: quantize(self.head),
        };
        match fwd.cmp(&rev) {
            Ordering::Greater => rev,
            _ => fwd,
        }
    }

    /// Hyphen-joined ids; an overhang renders as `id+offset`, meaning the path
    /// reaches `offset` units from its neighboring spine vertex toward `id`.
    pub fn render(&self, inst: &TreeInstance) -> String {
        let m = self.spine.len();
        let mut parts = Vec::with_capacity(m);
        for (j, &v) in self.spine.iter().enumerate() {
            let covered = if j == 0 && self.head > 0.0 {
                Some(inst.edge_length(v, self.spine[1]).unwrap() - self.head)
            } else if j == m - 1 && self.tail > 0.0 {
                Some(inst.edge_length(self.spine[m - 2], v).unwrap() - self.tail)
            } else {
                None
            };
            match covered {
                Some(o) => parts.push(format!("{}+{}", inst.id(v), o)),
                None => parts.push(inst.id(v).to_string()),
            }
        }
        parts.join("-")
    }

    /// Inverse of [`PathLocus::render`]; tokens may be separated by `,` or `-`.
    pub fn parse(inst: &TreeInstance, text: &str) -> Result<Self> {
        let sep = if text.contains(',') { ',' } else { '-' };
        let tokens: Vec<&str> = text.split(sep).map(str::trim).collect();
        let m = tokens.len();
        let mut spine = Vec::with_capacity(m);
        let mut covered = vec![None; m];
        for (j, tok) in tokens.iter().enumerate() {
            let (id, off) = match tok.split_once('+') {
                Some((id, off)) => {
                    let off: f64 = off.parse().map_err(|_| {
                        SqcError::InvalidPath(format!("bad overhang offset in `{tok}`"))
                    })?;
                    (id, Some(off))
                }
                None => (*tok, None),
            };
            if off.is_some() && j != 0 && j != m - 1 {
                return Err(SqcError::InvalidPath(format!(
                    "only end tokens may carry an overhang (`{tok}`)"
                )));
            }
            if off.is_some() && m == 1 {
                return Err(SqcError::InvalidPath(format!(
                    "overhang `{tok}` needs a neighboring vertex"
                )));
            }
            covered[j] = off;
            spine.push(inst.vertex(id)?);
        }
        let edges = spine_edges(inst, &spine)?;
        let head = match covered[0] {
            Some(o) => edge_trim(edges[0], o)?,
            None => 0.0,
        };
        let tail = match covered[m - 1] {
            Some(o) if m > 1 => edge_trim(*edges.last().unwrap(), o)?,
            _ => 0.0,
        };
        Self::new(inst, spine, head, tail)
    }
}

fn edge_trim(edge: f64, offset: f64) -> Result<f64> {
    if !(offset > 0.0 && offset < edge) {
        return Err(SqcError::InvalidPath(format!(
            "overhang offset {offset} outside (0, {edge})"
        )));
    }
    Ok(edge - offset)
}

fn spine_edges(inst: &TreeInstance, spine: &[usize]) -> Result<Vec<f64>> {
    if spine.is_empty() {
        return Err(SqcError::InvalidPath("empty vertex sequence".into()));
    }
    if let Some(&v) = spine.iter().find(|&&v| v >= inst.len()) {
        return Err(SqcError::InvalidPath(format!("vertex index {v} out of range")));
    }
    let mut seen = vec![false; inst.len()];
    for &v in spine {
        if std::mem::replace(&mut seen[v], true) {
            return Err(SqcError::InvalidPath(format!(
                "vertex `{}` repeats",
                inst.id(v)
            )));
        }
    }
    spine
        .windows(2)
        .map(|w| {
            inst.edge_length(w[0], w[1]).ok_or_else(|| {
                SqcError::InvalidPath(format!(
                    "`{}` and `{}` are not adjacent",
                    inst.id(w[0]),
                    inst.id(w[1])
                ))
            })
        })
        .collect()
}

/// The vertex sequence between two end vertices with cumulative positions,
/// along which fixed-length windows slide.
#[derive(Debug, Clone, PartialEq)]
pub struct Spine {
    vertices: Vec<usize>,
    positions: Vec<f64>,
}

impl Spine {
    pub fn between(inst: &TreeInstance, from: usize, to: usize) -> Self {
        let vertices = inst.path_vertices(from, to);
        let mut positions = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        positions.push(acc);
        for w in vertices.windows(2) {
            acc += inst.edge_length(w[0], w[1]).unwrap();
            positions.push(acc);
        }
        Spine {
            vertices,
            positions,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn total_length(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    /// Offsets at which either end of a length-`l` window sits on a spine
    /// vertex, ascending and deduplicated.
    pub fn event_offsets(&self, l: f64) -> Vec<f64> {
        let slack = self.total_length() - l;
        let mut out: Vec<f64> = self
            .positions
            .iter()
            .flat_map(|&p| [p, p - l])
            .filter(|&s| s > -POSITION_EPS && s < slack + POSITION_EPS)
            .map(|s| s.clamp(0.0, slack.max(0.0)))
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < POSITION_EPS);
        out
    }

    /// Index of the last vertex at or before `s` (within tolerance).
    pub(crate) fn index_at_or_before(&self, s: f64) -> usize {
        self.positions.partition_point(|&p| p <= s + POSITION_EPS) - 1
    }

    /// Index of the first vertex at or after `s` (within tolerance).
    pub(crate) fn index_at_or_after(&self, s: f64) -> usize {
        self.positions.partition_point(|&p| p < s - POSITION_EPS)
    }

    /// The window `[start, start + l]` as a locus.
    pub fn window(&self, inst: &TreeInstance, start: f64, l: f64) -> Result<PathLocus> {
        let end = start + l;
        if start < -POSITION_EPS || end > self.total_length() + POSITION_EPS || l <= 0.0 {
            return Err(SqcError::InvalidLength {
                length: l,
                reason: format!("window at {start} does not fit the spine"),
            });
        }
        let i = self.index_at_or_before(start.max(0.0));
        let k = self
            .index_at_or_after(end.min(self.total_length()))
            .min(self.vertices.len() - 1);
        let head = (start - self.positions[i]).max(0.0);
        let tail = (self.positions[k] - end).max(0.0);
        PathLocus::new(inst, self.vertices[i..=k].to_vec(), head, tail)
    }
}
