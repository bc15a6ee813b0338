//! Weighted trees with Poisson demand at the vertices.
//!
//! A [`TreeInstance`] is immutable once built. Vertices are addressed by their
//! position in the input document (`usize`); string ids are only used at the
//! boundaries (parsing, rendering, CLI flags).

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqcError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: String,
    pub lambda: f64,
    #[serde(default)]
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub a: String,
    pub b: String,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub vt: f64,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone)]
pub struct TreeInstance {
    doc: InstanceDocument,
    index: HashMap<String, usize>,
    lambda_total: f64,
    weights: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
    // Rooted at vertex 0.
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    root_dist: Vec<f64>,
    down_weight: Vec<f64>,
}

/// Length and vertex sequence of the unique path between two vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePath {
    pub length: f64,
    pub vertices: Vec<String>,
}

pub fn parse_instance(text: &str) -> Result<TreeInstance> {
    let doc: InstanceDocument =
        serde_json::from_str(text).map_err(|e| SqcError::Malformed(e.to_string()))?;
    TreeInstance::from_document(doc)
}

impl TreeInstance {
    pub fn new(vt: f64, vertices: Vec<VertexRecord>, edges: Vec<EdgeRecord>) -> Result<Self> {
        Self::from_document(InstanceDocument {
            vt,
            vertices,
            edges,
        })
    }

    pub fn from_document(doc: InstanceDocument) -> Result<Self> {
        if !(doc.vt.is_finite() && doc.vt > 0.0) {
            return Err(SqcError::InvalidSpeed(doc.vt));
        }
        let n = doc.vertices.len();
        if n < 2 {
            return Err(SqcError::TooFewVertices(n));
        }

        let mut index = HashMap::with_capacity(n);
        for (i, v) in doc.vertices.iter().enumerate() {
            if v.id.is_empty() || v.id.contains([',', '+']) || v.id.chars().any(char::is_whitespace)
            {
                return Err(SqcError::InvalidVertex {
                    id: v.id.clone(),
                    reason: "ids must be non-empty tokens without ',', '+' or whitespace".into(),
                });
            }
            if !(v.lambda.is_finite() && v.lambda >= 0.0) {
                return Err(SqcError::InvalidVertex {
                    id: v.id.clone(),
                    reason: format!("lambda must be finite and >= 0, got {}", v.lambda),
                });
            }
            if !(v.g.is_finite() && v.g >= 0.0) {
                return Err(SqcError::InvalidVertex {
                    id: v.id.clone(),
                    reason: format!("g must be finite and >= 0, got {}", v.g),
                });
            }
            if index.insert(v.id.clone(), i).is_some() {
                return Err(SqcError::DuplicateVertex(v.id.clone()));
            }
        }

        let lambda_total: f64 = doc.vertices.iter().map(|v| v.lambda).sum();
        if lambda_total <= 0.0 {
            return Err(SqcError::ZeroDemand);
        }

        if doc.edges.len() != n - 1 {
            return Err(SqcError::NotATree(format!(
                "{} vertices need {} edges, found {}",
                n,
                n - 1,
                doc.edges.len()
            )));
        }

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut dsu = DisjointSets::new(n);
        for e in &doc.edges {
            let bad = |reason: &str| SqcError::InvalidEdge {
                a: e.a.clone(),
                b: e.b.clone(),
                reason: reason.to_string(),
            };
            let a = *index.get(&e.a).ok_or_else(|| SqcError::UnknownVertex(e.a.clone()))?;
            let b = *index.get(&e.b).ok_or_else(|| SqcError::UnknownVertex(e.b.clone()))?;
            if a == b {
                return Err(bad("self loop"));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(bad(&format!("length must be positive, got {}", e.length)));
            }
            if !dsu.union(a, b) {
                return Err(SqcError::NotATree(format!(
                    "edge {}-{} closes a cycle",
                    e.a, e.b
                )));
            }
            adj[a].push((b, e.length));
            adj[b].push((a, e.length));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }

        let weights = doc.vertices.iter().map(|v| v.lambda / lambda_total).collect();

        let mut inst = TreeInstance {
            doc,
            index,
            lambda_total,
            weights,
            adj,
            parent: vec![None; n],
            depth: vec![0; n],
            root_dist: vec![0.0; n],
            down_weight: vec![0.0; n],
        };
        inst.root_at_zero();
        Ok(inst)
    }

    fn root_at_zero(&mut self) {
        let n = self.len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(u, len) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    self.parent[u] = Some(v);
                    self.depth[u] = self.depth[v] + 1;
                    self.root_dist[u] = self.root_dist[v] + len;
                    queue.push_back(u);
                }
            }
        }
        for &v in order.iter().rev() {
            self.down_weight[v] += self.weights[v];
            if let Some(p) = self.parent[v] {
                self.down_weight[p] += self.down_weight[v];
            }
        }
    }

    pub fn len(&self) -> usize {
        self.doc.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vt(&self) -> f64 {
        self.doc.vt
    }

    /// Total demand rate λ = Σ λ_i.
    pub fn lambda_total(&self) -> f64 {
        self.lambda_total
    }

    pub fn lambda(&self, v: usize) -> f64 {
        self.doc.vertices[v].lambda
    }

    pub fn handling_time(&self, v: usize) -> f64 {
        self.doc.vertices[v].g
    }

    /// Normalized weight w_v = λ_v / λ.
    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// w(T); equal to 1 up to rounding.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean handling time Ḡ = Σ w_i G_i.
    pub fn mean_handling_time(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.doc.vertices)
            .map(|(w, v)| w * v.g)
            .sum()
    }

    /// The common handling time when all vertices share one, else `None`.
    pub fn homogeneous_handling_time(&self) -> Option<f64> {
        let g0 = self.doc.vertices[0].g;
        self.doc
            .vertices
            .iter()
            .all(|v| v.g == g0)
            .then_some(g0)
    }

    pub fn id(&self, v: usize) -> &str {
        &self.doc.vertices[v].id
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| SqcError::UnknownVertex(id.to_string()))
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a]
            .binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| self.adj[a][i].1)
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.degree(v) == 1).collect()
    }

    /// Weight of the component containing `y` once edge `x`-`y` is removed.
    pub fn side_weight(&self, x: usize, y: usize) -> f64 {
        if self.parent[y] == Some(x) {
            self.down_weight[y]
        } else {
            debug_assert_eq!(self.parent[x], Some(y));
            self.total_weight() - self.down_weight[x]
        }
    }

    fn lca(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u].unwrap();
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v].unwrap();
        }
        while u != v {
            u = self.parent[u].unwrap();
            v = self.parent[v].unwrap();
        }
        u
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let a = self.lca(u, v);
        (self.root_dist[u] - self.root_dist[a]) + (self.root_dist[v] - self.root_dist[a])
    }

    /// Vertex sequence of the unique `u`–`v` path, both ends included.
    pub fn path_vertices(&self, u: usize, v: usize) -> Vec<usize> {
        let a = self.lca(u, v);
        let mut left = vec![u];
        let mut x = u;
        while x != a {
            x = self.parent[x].unwrap();
            left.push(x);
        }
        let mut right = Vec::new();
        let mut y = v;
        while y != a {
            right.push(y);
            y = self.parent[y].unwrap();
        }
        left.extend(right.into_iter().rev());
        left
    }

    /// Distance and path between two vertices given by id.
    pub fn tree_distance(&self, u: &str, v: &str) -> Result<TreePath> {
        let (u, v) = (self.vertex(u)?, self.vertex(v)?);
        let vertices = self.path_vertices(u, v);
        // Sum along the path so the value matches what a hand traversal gives.
        let length = vertices
            .windows(2)
            .map(|w| self.edge_length(w[0], w[1]).unwrap())
            .sum();
        Ok(TreePath {
            length,
            vertices: vertices.into_iter().map(|x| self.id(x).to_string()).collect(),
        })
    }

    /// Longest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let far = |s: usize| -> (usize, f64) {
            let d = self.distances_from(s);
            d.iter()
                .enumerate()
                .fold((s, 0.0), |acc, (v, &x)| if x > acc.1 { (v, x) } else { acc })
        };
        let (a, _) = far(0);
        far(a).1
    }

    pub fn distances_from(&self, s: usize) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.len()];
        dist[s] = 0.0;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(u, len) in &self.adj[v] {
                if dist[u].is_nan() {
                    dist[u] = dist[v] + len;
                    stack.push(u);
                }
            }
        }
        dist
    }

    pub fn document(&self) -> &InstanceDocument {
        &self.doc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("instance documents always serialize")
    }

    /// Same tree with every λ_i scaled so that Σ λ_i = `total`.
    pub fn with_total_rate(&self, total: f64) -> Result<Self> {
        if !(total.is_finite() && total > 0.0) {
            return Err(SqcError::InvalidParams(format!(
                "total rate must be positive, got {total}"
            )));
        }
        let scale = total / self.lambda_total;
        let mut doc = self.doc.clone();
        for v in &mut doc.vertices {
            v.lambda *= scale;
        }
        Self::from_document(doc)
    }

    /// Same tree with every handling time set to `g`.
    pub fn with_handling_time(&self, g: f64) -> Result<Self> {
        let mut doc = self.doc.clone();
        for v in &mut doc.vertices {
            v.g = g;
        }
        Self::from_document(doc)
    }
}

/// Random labeled tree on `n` vertices: vertex `k` attaches to a uniformly
/// chosen earlier vertex, lengths are drawn uniformly from `length_choices`,
/// and every vertex gets λ_i = 1/n (so w_i = 1/n), G_i = 0, vt = 1.
pub fn generate_random(n: usize, length_choices: &[f64], seed: u64) -> Result<TreeInstance> {
    if n < 2 {
        return Err(SqcError::TooFewVertices(n));
    }
    if length_choices.is_empty() {
        return Err(SqcError::InvalidParams("length_choices is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |k: usize| format!("v{}", k + 1);
    let vertices = (0..n)
        .map(|k| VertexRecord {
            id: id(k),
            lambda: 1.0 / n as f64,
            g: 0.0,
        })
        .collect();
    let edges = (1..n)
        .map(|k| {
            let parent = rng.random_range(0..k);
            let length = length_choices[rng.random_range(0..length_choices.len())];
            EdgeRecord {
                a: id(parent),
                b: id(k),
                length,
            }
        })
        .collect();
    TreeInstance::new(1.0, vertices, edges)
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
