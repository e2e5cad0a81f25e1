//! Sequences of comparison graphs, strength trajectories and edge
//! observations.
//!
//! A [`GraphSequence`] holds the comparison graphs `G_0, ..., G_T` on `n`
//! items; time step `k` corresponds to the grid point `t = k/T`. Edges are
//! undirected and stored canonically as `(i, j)` with `i < j`. The signed
//! incidence convention is fixed once here: the edge `(i, j)` contributes
//! `+1` at `i` and `-1` at `j`, so `incidence_apply` reproduces the measured
//! difference `z_i - z_j`.
//!
//! All operators are matrix-free apply/adjoint pairs. The temporal
//! smoothness operator is applied in reduced form: instead of the full
//! path-incidence ⊗ complete-graph-incidence product (one row per item
//! pair), each time difference `d_k = z_k - z_{k+1}` is centered and scaled
//! by `sqrt(n)`, which has the same Gram matrix because
//! `C Cᵀ = n·I - 1·1ᵀ` for the complete-graph incidence `C`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance scale used by [`StrengthTrajectory::is_block_centered`].
pub const CENTERING_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Union-find, used for connectivity checks and spanning-tree repair.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub(crate) fn new(size: usize) -> Self {
        Self {
            parent: (0..size).collect(),
            rank: vec![0; size],
            components: size,
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub(crate) fn component_count(&self) -> usize {
        self.components
    }
}

// ---------------------------------------------------------------------------
// GraphSequence
// ---------------------------------------------------------------------------

/// The comparison graphs `G_0, ..., G_T` on `n` items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSequence {
    n: usize,
    edges: Vec<Vec<(usize, usize)>>,
}

impl GraphSequence {
    /// Builds a sequence from per-step edge lists.
    ///
    /// Edges are canonicalized to `(i, j)` with `i < j`, sorted and
    /// deduplicated. Requires `n >= 2` and at least two steps (horizon
    /// `T >= 1`); self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "item count must be >= 2, got {n}"
            )));
        }
        if edges.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 time steps (horizon >= 1), got {}",
                edges.len()
            )));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (k, step) in edges.into_iter().enumerate() {
            let mut set = BTreeSet::new();
            for (a, b) in step {
                if a == b {
                    return Err(Error::InvalidArgument(format!(
                        "self-loop ({a},{b}) at step {k}"
                    )));
                }
                if a >= n || b >= n {
                    return Err(Error::Dimension(format!(
                        "edge ({a},{b}) at step {k} out of range for n={n}"
                    )));
                }
                set.insert((a.min(b), a.max(b)));
            }
            canonical.push(set.into_iter().collect());
        }
        Ok(Self {
            n,
            edges: canonical,
        })
    }

    /// Number of items `n`.
    pub fn item_count(&self) -> usize {
        self.n
    }

    /// Horizon `T`; the sequence has `T + 1` steps.
    pub fn horizon(&self) -> usize {
        self.edges.len() - 1
    }

    /// Number of time steps `T + 1`.
    pub fn step_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list of step `k`.
    pub fn edges(&self, k: usize) -> &[(usize, usize)] {
        &self.edges[k]
    }

    /// Number of edges at step `k`.
    pub fn edge_count(&self, k: usize) -> usize {
        self.edges[k].len()
    }

    /// Total number of edges over all steps.
    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Deduplicated edge set of the union graph `G_U`.
    pub fn union_edges(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> =
            self.edges.iter().flat_map(|e| e.iter().copied()).collect();
        set.into_iter().collect()
    }

    fn check_step(&self, k: usize) -> Result<()> {
        if k >= self.edges.len() {
            return Err(Error::Dimension(format!(
                "step {k} out of range (horizon {})",
                self.horizon()
            )));
        }
        Ok(())
    }

    fn check_vertex_vec(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected vector of length n={}, got {}",
                self.n,
                z.len()
            )));
        }
        Ok(())
    }

    /// Applies the transposed incidence matrix: entry `e = (i, j)` of the
    /// output is `z_i - z_j`.
    pub fn incidence_apply(&self, k: usize, z: &[f64]) -> Result<Vec<f64>> {
        self.check_step(k)?;
        self.check_vertex_vec(z)?;
        Ok(self.edges[k].iter().map(|&(i, j)| z[i] - z[j]).collect())
    }

    /// Adjoint of [`incidence_apply`](Self::incidence_apply): scatters an
    /// edge vector back to the vertices with the same signs.
    pub fn incidence_adjoint(&self, k: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.check_step(k)?;
        if w.len() != self.edges[k].len() {
            return Err(Error::Dimension(format!(
                "expected edge vector of length {}, got {}",
                self.edges[k].len(),
                w.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        for (&(i, j), &v) in self.edges[k].iter().zip(w) {
            out[i] += v;
            out[j] -= v;
        }
        Ok(out)
    }

    /// Applies the graph Laplacian `L_k = Q_k Q_kᵀ` of step `k`.
    pub fn laplacian_apply(&self, k: usize, z: &[f64]) -> Result<Vec<f64>> {
        let w = self.incidence_apply(k, z)?;
        self.incidence_adjoint(k, &w)
    }

    /// Whether the graph at step `k` is connected.
    pub fn is_connected(&self, k: usize) -> bool {
        assert!(k < self.edges.len(), "step {k} out of range");
        let mut uf = UnionFind::new(self.n);
        for &(i, j) in &self.edges[k] {
            uf.union(i, j);
        }
        uf.component_count() == 1
    }

    /// Whether the union graph `G_U` is connected.
    pub fn union_is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        for step in &self.edges {
            for &(i, j) in step {
                uf.union(i, j);
            }
        }
        uf.component_count() == 1
    }

    /// Steps whose graph is disconnected.
    pub fn disconnected_steps(&self) -> Vec<usize> {
        (0..self.step_count())
            .filter(|&k| !self.is_connected(k))
            .collect()
    }

    /// Serializes to the JSON interchange format
    /// `{"n": .., "T": .., "edges": [[[i,j], ..] per step]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GraphSequenceRepr::from(
            self,
        ))?)
    }

    /// Reads the JSON interchange format.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: GraphSequenceRepr = serde_json::from_str(text)?;
        repr.into_graph()
    }
}

#[derive(Serialize, Deserialize)]
struct GraphSequenceRepr {
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    edges: Vec<Vec<(usize, usize)>>,
}

impl From<&GraphSequence> for GraphSequenceRepr {
    fn from(g: &GraphSequence) -> Self {
        Self {
            n: g.n,
            horizon: g.horizon(),
            edges: g.edges.clone(),
        }
    }
}

impl GraphSequenceRepr {
    fn into_graph(self) -> Result<GraphSequence> {
        if self.edges.len() != self.horizon + 1 {
            return Err(Error::Parse(format!(
                "edge list has {} steps but T={}",
                self.edges.len(),
                self.horizon
            )));
        }
        GraphSequence::new(self.n, self.edges)
    }
}

impl Serialize for GraphSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphSequenceRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GraphSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GraphSequenceRepr::deserialize(d)?;
        repr.into_graph().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// StrengthTrajectory
// ---------------------------------------------------------------------------

/// A vector in `R^{n(T+1)}` stored as `T + 1` blocks of length `n`;
/// block `k` holds the strengths at time `k/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthTrajectory {
    n: usize,
    data: Vec<f64>,
}

impl StrengthTrajectory {
    /// All-zero trajectory.
    pub fn zeros(n: usize, horizon: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * (horizon + 1)],
        }
    }

    /// Wraps a flat vector laid out block-by-block.
    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "item count must be >= 2, got {n}"
            )));
        }
        if data.is_empty() || !data.len().is_multiple_of(n) || data.len() / n < 2 {
            return Err(Error::Dimension(format!(
                "flat data of length {} is not n*(T+1) blocks of n={} with T >= 1",
                data.len(),
                n
            )));
        }
        Ok(Self { n, data })
    }

    /// Builds from explicit blocks.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let n = blocks.first().map(Vec::len).unwrap_or(0);
        for b in blocks {
            if b.len() != n {
                return Err(Error::Dimension("ragged blocks".into()));
            }
        }
        Self::from_flat(n, blocks.concat())
    }

    pub fn item_count(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.n - 1
    }

    pub fn step_count(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Euclidean norm of the full vector.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Subtracts each block's mean from the block.
    pub fn center_blocks(&mut self) {
        let n = self.n;
        for k in 0..self.step_count() {
            let block = self.block_mut(k);
            let mean = block.iter().sum::<f64>() / n as f64;
            for v in block {
                *v -= mean;
            }
        }
    }

    /// Whether every block sums to zero within `1e-9 * n * max|entry|`.
    pub fn is_block_centered(&self) -> bool {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = CENTERING_TOL * self.n as f64 * scale.max(f64::MIN_POSITIVE);
        (0..self.step_count()).all(|k| self.block(k).iter().sum::<f64>().abs() <= tol)
    }

    /// Applies the reduced smoothness operator: output block
    /// `k = 0, ..., T-1` is `sqrt(n) * center(z_k - z_{k+1})`.
    pub fn smoothness_apply(&self) -> Vec<f64> {
        let horizon = self.horizon();
        let mut out = vec![0.0; self.n * horizon];
        smoothness_apply_flat(self.n, horizon, &self.data, &mut out, 1.0);
        out
    }

    /// Adjoint of [`smoothness_apply`](Self::smoothness_apply).
    pub fn smoothness_adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        let horizon = self.horizon();
        if w.len() != self.n * horizon {
            return Err(Error::Dimension(format!(
                "expected length {} (n*T), got {}",
                self.n * horizon,
                w.len()
            )));
        }
        let mut out = vec![0.0; self.data.len()];
        smoothness_adjoint_flat(self.n, horizon, w, &mut out, 1.0);
        Ok(out)
    }

    /// Squared smoothness norm `Σ_k (n·|d_k|² - (1ᵀd_k)²)` with
    /// `d_k = z_k - z_{k+1}`; equals the squared norm of
    /// [`smoothness_apply`](Self::smoothness_apply).
    pub fn smoothness_penalty(&self) -> f64 {
        let n = self.n as f64;
        let mut total = 0.0;
        for k in 0..self.horizon() {
            let (a, b) = (self.block(k), self.block(k + 1));
            let mut sq = 0.0;
            let mut sum = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = x - y;
                sq += d * d;
                sum += d;
            }
            total += n * sq - sum * sum;
        }
        total
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TrajectoryRepr::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: TrajectoryRepr = serde_json::from_str(text)?;
        repr.into_trajectory()
    }
}

/// `out = coeff * E~ z` on flat storage; `out` has length `n * horizon`.
pub(crate) fn smoothness_apply_flat(
    n: usize,
    horizon: usize,
    z: &[f64],
    out: &mut [f64],
    coeff: f64,
) {
    let scale = coeff * (n as f64).sqrt();
    for k in 0..horizon {
        let a = &z[k * n..(k + 1) * n];
        let b = &z[(k + 1) * n..(k + 2) * n];
        let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / n as f64;
        for ((o, x), y) in out[k * n..(k + 1) * n].iter_mut().zip(a).zip(b) {
            *o = scale * (x - y - mean);
        }
    }
}

/// `out += coeff * E~ᵀ w` on flat storage; `out` has length `n * (horizon + 1)`.
pub(crate) fn smoothness_adjoint_flat(
    n: usize,
    horizon: usize,
    w: &[f64],
    out: &mut [f64],
    coeff: f64,
) {
    let scale = coeff * (n as f64).sqrt();
    for k in 0..horizon {
        let wk = &w[k * n..(k + 1) * n];
        let mean = wk.iter().sum::<f64>() / n as f64;
        for (idx, &v) in wk.iter().enumerate() {
            let c = scale * (v - mean);
            out[k * n + idx] += c;
            out[(k + 1) * n + idx] -= c;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRepr {
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    blocks: Vec<Vec<f64>>,
}

impl From<&StrengthTrajectory> for TrajectoryRepr {
    fn from(z: &StrengthTrajectory) -> Self {
        Self {
            n: z.n,
            horizon: z.horizon(),
            blocks: (0..z.step_count()).map(|k| z.block(k).to_vec()).collect(),
        }
    }
}

impl TrajectoryRepr {
    fn into_trajectory(self) -> Result<StrengthTrajectory> {
        if self.blocks.len() != self.horizon + 1 {
            return Err(Error::Parse(format!(
                "{} blocks but T={}",
                self.blocks.len(),
                self.horizon
            )));
        }
        for b in &self.blocks {
            if b.len() != self.n {
                return Err(Error::Parse("block length differs from n".into()));
            }
        }
        StrengthTrajectory::from_blocks(&self.blocks)
    }
}

impl Serialize for StrengthTrajectory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrajectoryRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StrengthTrajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TrajectoryRepr::deserialize(d)?
            .into_trajectory()
            .map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// ObservationSet
// ---------------------------------------------------------------------------

/// Per-step edge measurements `y_ij(k)`, one value per canonical edge.
///
/// Iteration and stacking order is step-ascending, then edge-lexicographic;
/// this is the canonical layout of the stacked vector `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    graph: GraphSequence,
    values: Vec<Vec<f64>>,
}

impl ObservationSet {
    /// Pairs a graph sequence with per-step value lists; the value list of
    /// step `k` must match the canonical edge order of `graph.edges(k)`.
    pub fn new(graph: GraphSequence, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != graph.step_count() {
            return Err(Error::Dimension(format!(
                "{} value steps for {} graph steps",
                values.len(),
                graph.step_count()
            )));
        }
        for (k, vals) in values.iter().enumerate() {
            if vals.len() != graph.edge_count(k) {
                return Err(Error::Dimension(format!(
                    "step {k} has {} values for {} edges",
                    vals.len(),
                    graph.edge_count(k)
                )));
            }
        }
        Ok(Self { graph, values })
    }

    pub fn graph(&self) -> &GraphSequence {
        &self.graph
    }

    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn total_len(&self) -> usize {
        self.graph.total_edges()
    }

    /// The stacked vector `y` in canonical order.
    pub fn stacked(&self) -> Vec<f64> {
        self.values.concat()
    }

    /// Iterates `(step, i, j, y)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.values.iter().enumerate().flat_map(move |(k, vals)| {
            self.graph
                .edges(k)
                .iter()
                .zip(vals)
                .map(move |(&(i, j), &y)| (k, i, j, y))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ObservationRepr::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ObservationRepr = serde_json::from_str(text)?;
        repr.into_observations()
    }

    /// Writes the CSV form with header `step,i,j,y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "i", "j", "y"])?;
        for (k, i, j, y) in self.iter() {
            w.write_record(&[
                k.to_string(),
                i.to_string(),
                j.to_string(),
                format!("{y:.17e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV form. `n` and `horizon` must be supplied because steps
    /// without edges leave no trace in the file. Rows with `i > j` are
    /// canonicalized by flipping the sign of `y`.
    pub fn read_csv<R: Read>(reader: R, n: usize, horizon: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut per_step: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); horizon + 1];
        for record in r.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!(
                    "expected 4 columns, got {}",
                    record.len()
                )));
            }
            let parse_idx = |s: &str, what: &str| -> Result<usize> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
            };
            let k = parse_idx(&record[0], "step")?;
            let i = parse_idx(&record[1], "i")?;
            let j = parse_idx(&record[2], "j")?;
            let y: f64 = record[3]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad y value {:?}", &record[3])))?;
            if k > horizon {
                return Err(Error::Parse(format!("step {k} exceeds horizon {horizon}")));
            }
            if i < j {
                per_step[k].push((i, j, y));
            } else {
                per_step[k].push((j, i, -y));
            }
        }
        let mut edges = Vec::with_capacity(horizon + 1);
        let mut values = Vec::with_capacity(horizon + 1);
        for (k, mut rows) in per_step.into_iter().enumerate() {
            rows.sort_by_key(|&(i, j, _)| (i, j));
            if rows
                .windows(2)
                .any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
            {
                return Err(Error::Parse(format!("duplicate edge at step {k}")));
            }
            edges.push(rows.iter().map(|&(i, j, _)| (i, j)).collect());
            values.push(rows.iter().map(|&(_, _, y)| y).collect());
        }
        Self::new(GraphSequence::new(n, edges)?, values)
    }
}

#[derive(Serialize, Deserialize)]
struct ObservationRepr {
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    edges: Vec<Vec<(usize, usize)>>,
    values: Vec<Vec<f64>>,
}

impl From<&ObservationSet> for ObservationRepr {
    fn from(o: &ObservationSet) -> Self {
        Self {
            n: o.graph.n,
            horizon: o.graph.horizon(),
            edges: o.graph.edges.clone(),
            values: o.values.clone(),
        }
    }
}

impl ObservationRepr {
    fn into_observations(self) -> Result<ObservationSet> {
        let graph = GraphSequenceRepr {
            n: self.n,
            horizon: self.horizon,
            edges: self.edges,
        }
        .into_graph()?;
        ObservationSet::new(graph, self.values)
    }
}

impl Serialize for ObservationSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ObservationRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObservationSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ObservationRepr::deserialize(d)?
            .into_observations()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn incidence_single_edge() {
        let g = GraphSequence::new(2, vec![vec![(0, 1)], vec![]]).unwrap();
        assert_eq!(g.incidence_apply(0, &[1.0, -1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn incidence_path() {
        let g = GraphSequence::new(3, vec![vec![(0, 1), (1, 2)], vec![]]).unwrap();
        assert_eq!(
            g.incidence_apply(0, &[3.0, 2.0, 0.0]).unwrap(),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn laplacian_complete_graph() {
        let g = GraphSequence::new(3, vec![vec![(0, 1), (0, 2), (1, 2)], vec![]]).unwrap();
        let out = g.laplacian_apply(0, &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(out, vec![3.0, 0.0, -3.0]);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let g = GraphSequence::new(4, vec![vec![(0, 1), (2, 3)], vec![(1, 2)]]).unwrap();
        for k in 0..2 {
            let out = g.laplacian_apply(k, &[5.0; 4]).unwrap();
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn laplacian_path_unit_vector() {
        let g = GraphSequence::new(3, vec![vec![(0, 1), (1, 2)], vec![]]).unwrap();
        assert_eq!(
            g.laplacian_apply(0, &[1.0, 0.0, 0.0]).unwrap(),
            vec![1.0, -1.0, 0.0]
        );
    }

    #[test]
    fn connectivity_cases() {
        let g = GraphSequence::new(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        assert!(!g.is_connected(0));
        assert!(!g.is_connected(1));
        assert!(g.union_is_connected());
        let h = GraphSequence::new(3, vec![vec![(0, 1), (1, 2)], vec![]]).unwrap();
        assert!(h.is_connected(0));
        assert!(!h.is_connected(1));
        assert!(h.union_is_connected());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            GraphSequence::new(3, vec![vec![(0, 0)], vec![]]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            GraphSequence::new(3, vec![vec![(0, 3)], vec![]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn canonicalizes_and_dedups() {
        let g = GraphSequence::new(3, vec![vec![(2, 1), (1, 2), (1, 0)], vec![]]).unwrap();
        assert_eq!(g.edges(0), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn smoothness_constant_trajectory_is_zero() {
        let block = vec![1.0, -2.0, 3.5];
        let z = StrengthTrajectory::from_blocks(&[block.clone(), block.clone(), block]).unwrap();
        assert!(z.smoothness_apply().iter().all(|&v| v == 0.0));
        assert_eq!(z.smoothness_penalty(), 0.0);
    }

    #[test]
    fn smoothness_norm_matches_k3_incidence() {
        // d = (1,-1,0); explicit complete-graph incidence rows give
        // Cᵀd = (2, 1, -1), squared norm 6.
        let z =
            StrengthTrajectory::from_blocks(&[vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let out = z.smoothness_apply();
        let sq: f64 = out.iter().map(|v| v * v).sum();
        assert!(close(sq, 6.0, 1e-12));
        assert!(close(z.smoothness_penalty(), 6.0, 1e-12));
    }

    /// Materializes the full smoothness operator `Mᵀ ⊗ Cᵀ` from literal
    /// path/complete incidence matrices, for the Gram-identity check.
    fn full_smoothness_norm_sq(n: usize, horizon: usize, z: &[f64]) -> f64 {
        let mut total = 0.0;
        for k in 0..horizon {
            for i in 0..n {
                for j in (i + 1)..n {
                    // row of E for time-edge k and item pair (i, j)
                    let d =
                        (z[k * n + i] - z[(k + 1) * n + i]) - (z[k * n + j] - z[(k + 1) * n + j]);
                    total += d * d;
                }
            }
        }
        total
    }

    #[test]
    fn reduced_operator_matches_full_gram() {
        let mut rng = crate::rng::substream(7, &[99]);
        for _ in 0..20 {
            let n = rng.random_range(2..=5usize);
            let horizon = rng.random_range(1..=4usize);
            let data: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let z = StrengthTrajectory::from_flat(n, data.clone()).unwrap();
            let fast: f64 = z.smoothness_apply().iter().map(|v| v * v).sum();
            let full = full_smoothness_norm_sq(n, horizon, &data);
            assert!(close(fast, full, 1e-10), "fast {fast} vs full {full}");
            assert!(close(z.smoothness_penalty(), full, 1e-10));
        }
    }

    #[test]
    fn smoothness_shift_invariance() {
        let mut rng = crate::rng::substream(11, &[3]);
        let n = 4;
        let horizon = 3;
        let data: Vec<f64> = (0..n * (horizon + 1))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let z = StrengthTrajectory::from_flat(n, data.clone()).unwrap();
        let mut shifted = data;
        for k in 0..=horizon {
            let c = rng.random_range(-5.0..5.0);
            for v in &mut shifted[k * n..(k + 1) * n] {
                *v += c;
            }
        }
        let zs = StrengthTrajectory::from_flat(n, shifted).unwrap();
        assert!(close(
            z.smoothness_penalty(),
            zs.smoothness_penalty(),
            1e-10
        ));
    }

    #[test]
    fn incidence_adjoint_identity_small() {
        let mut rng = crate::rng::substream(13, &[1]);
        for _ in 0..20 {
            let n = rng.random_range(2..=6usize);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.5 {
                        edges.push((i, j));
                    }
                }
            }
            let g = GraphSequence::new(n, vec![edges, vec![]]).unwrap();
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..g.edge_count(0))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let qz = g.incidence_apply(0, &z).unwrap();
            let qw = g.incidence_adjoint(0, &w).unwrap();
            let lhs: f64 = qz.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = z.iter().zip(&qw).map(|(a, b)| a * b).sum();
            assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn smoothness_adjoint_identity() {
        let mut rng = crate::rng::substream(13, &[2]);
        for _ in 0..20 {
            let n = rng.random_range(2..=5usize);
            let horizon = rng.random_range(1..=4usize);
            let z: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let w: Vec<f64> = (0..n * horizon)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let zt = StrengthTrajectory::from_flat(n, z.clone()).unwrap();
            let ez = zt.smoothness_apply();
            let etw = zt.smoothness_adjoint(&w).unwrap();
            let lhs: f64 = ez.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = z.iter().zip(&etw).map(|(a, b)| a * b).sum();
            assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn trajectory_centering() {
        let mut z = StrengthTrajectory::from_blocks(&[vec![1.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert!(!z.is_block_centered());
        z.center_blocks();
        assert!(z.is_block_centered());
        assert_eq!(z.block(0), &[-0.5, 0.5]);
    }

    #[test]
    fn observation_shape_validation() {
        let g = GraphSequence::new(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        assert!(ObservationSet::new(g.clone(), vec![vec![1.0], vec![]]).is_err());
        assert!(ObservationSet::new(g, vec![vec![1.0], vec![2.0]]).is_ok());
    }

    #[test]
    fn json_round_trips() {
        let g = GraphSequence::new(3, vec![vec![(0, 1), (1, 2)], vec![(0, 2)]]).unwrap();
        let obs = ObservationSet::new(g.clone(), vec![vec![0.5, -1.5], vec![2.0]]).unwrap();
        let z = StrengthTrajectory::from_blocks(&[vec![0.1, -0.1, 0.0], vec![0.0; 3]]).unwrap();
        assert_eq!(GraphSequence::from_json(&g.to_json().unwrap()).unwrap(), g);
        assert_eq!(
            ObservationSet::from_json(&obs.to_json().unwrap()).unwrap(),
            obs
        );
        assert_eq!(
            StrengthTrajectory::from_json(&z.to_json().unwrap()).unwrap(),
            z
        );
    }

    #[test]
    fn csv_round_trip_and_canonicalization() {
        let g = GraphSequence::new(4, vec![vec![(0, 1), (2, 3)], vec![], vec![(1, 2)]]).unwrap();
        let obs = ObservationSet::new(g, vec![vec![0.25, -3.5], vec![], vec![1e-13]]).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = ObservationSet::read_csv(&buf[..], 4, 2).unwrap();
        assert_eq!(back, obs);

        let flipped = "step,i,j,y\n0,1,0,2.5\n";
        let set = ObservationSet::read_csv(flipped.as_bytes(), 2, 1).unwrap();
        assert_eq!(set.values(0), &[-2.5]);
        assert_eq!(set.graph().edges(0), &[(0, 1)]);
    }

    #[test]
    fn csv_rejects_duplicate_edges() {
        let text = "step,i,j,y\n0,0,1,1.0\n0,1,0,-1.0\n";
        assert!(matches!(
            ObservationSet::read_csv(text.as_bytes(), 2, 1),
            Err(Error::Parse(_))
        ));
    }
}
