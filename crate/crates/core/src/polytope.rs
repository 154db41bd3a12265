//! Rotation polytopes: the convex bodies of level-n cylinder frequency
//! vectors of shift-invariant measures, realized as circulation polytopes of
//! the level-n de Bruijn graph. Vertices are the simple cycles; a subset of
//! arcs that equals the union of its own cycles spans a face; two vertices
//! form an edge exactly when their arc union contains no third cycle.
//!
//! All geometry is exact: frequency vectors are rationals and dimensions
//! come from rational Gaussian elimination, never floating point.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::debruijn::{
    build_graph, count_cycles_within, cycles_within, enumerate_cycles_capped, kirchhoff_balanced,
    Cycle, DeBruijnGraph, PeriodicMeasure, DEFAULT_CYCLE_CAP,
};
use crate::haar::Word;
use crate::rat::Rat;
use crate::{Error, Result};

/// Default ceiling for full face enumeration (a 2^(2^n) subset search).
pub const DEFAULT_FACE_CAP: u32 = 4;

#[derive(Clone, Debug)]
pub struct RotationPolytope {
    n: u32,
    graph: DeBruijnGraph,
    cycles: Vec<Cycle>,
    measures: Vec<PeriodicMeasure>,
    vertices: Vec<Vec<Rat>>,
    dim: i64,
}

/// A face: the cycles supported on a cycle-closed arc set, with its exact
/// affine dimension (-1 for the empty face).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub support: u128,
    pub cycles: Vec<usize>,
    pub dim: i64,
}

pub fn build_polytope(n: u32) -> Result<RotationPolytope> {
    build_polytope_capped(n, DEFAULT_CYCLE_CAP)
}

pub fn build_polytope_capped(n: u32, cap: u32) -> Result<RotationPolytope> {
    let graph = build_graph(n)?;
    let raw = enumerate_cycles_capped(&graph, cap)?;
    let mut pairs: Vec<(PeriodicMeasure, Cycle)> = raw
        .into_iter()
        .map(|c| (c.measure(&graph), c))
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let measures: Vec<PeriodicMeasure> = pairs.iter().map(|(m, _)| m.clone()).collect();
    let cycles: Vec<Cycle> = pairs.into_iter().map(|(_, c)| c).collect();
    let mut vertices = Vec::with_capacity(cycles.len());
    for m in &measures {
        let pi = m.pi(n)?;
        let total: Rat = pi.iter().sum();
        assert_eq!(total, Rat::from(num_bigint::BigInt::from(1)), "frequencies sum to 1");
        assert!(pi.iter().all(|x| !x.is_negative()), "frequencies are nonnegative");
        assert!(kirchhoff_balanced(&pi, n), "frequencies balance at every node");
        vertices.push(pi);
    }
    let mut seen = std::collections::BTreeSet::new();
    for v in &vertices {
        assert!(seen.insert(v.clone()), "distinct cycles must map to distinct vertices");
    }
    let dim = affine_dim(&vertices);
    Ok(RotationPolytope {
        n,
        graph,
        cycles,
        measures,
        vertices,
        dim,
    })
}

impl RotationPolytope {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn graph(&self) -> &DeBruijnGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn measure(&self, i: usize) -> &PeriodicMeasure {
        &self.measures[i]
    }

    pub fn measures(&self) -> &[PeriodicMeasure] {
        &self.measures
    }

    pub fn cycle(&self, i: usize) -> &Cycle {
        &self.cycles[i]
    }

    pub fn pi(&self, i: usize) -> &[Rat] {
        &self.vertices[i]
    }

    /// Exact affine dimension of the whole polytope.
    pub fn dim(&self) -> i64 {
        self.dim
    }

    pub fn vertex_index_of(&self, m: &PeriodicMeasure) -> Option<usize> {
        self.measures.binary_search(m).ok()
    }

    /// Two vertices span an edge exactly when the union of their arc sets
    /// contains exactly two cycles (the minimal face holding both is then
    /// one-dimensional). The search stops as soon as a third cycle appears.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        assert_ne!(i, j, "an edge needs two distinct vertices");
        let union = self.cycles[i].arc_mask() | self.cycles[j].arc_mask();
        count_cycles_within(&self.graph, union, 3) == 2
    }

    /// All edge-adjacent vertices. For maximal-length cycle vertices at
    /// levels <= 4 the count is checked to be 2^(n-1) exactly.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let out: Vec<usize> = (0..self.vertex_count())
            .filter(|&j| j != i && self.is_edge(i, j))
            .collect();
        if self.n <= 4 && self.cycles[i].len() == self.graph.node_count() {
            assert_eq!(
                out.len(),
                self.graph.node_count(),
                "a maximal-cycle vertex must lie on exactly 2^(n-1) edges"
            );
        }
        out
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.vertex_count() {
            for j in (i + 1)..self.vertex_count() {
                if self.is_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn face_lattice(&self) -> Result<Vec<Face>> {
        self.face_lattice_capped(DEFAULT_FACE_CAP)
    }

    /// Every face, found by scanning all arc subsets for the cycle-closed
    /// ones (each face is the circulation body of exactly one such subset).
    pub fn face_lattice_capped(&self, cap: u32) -> Result<Vec<Face>> {
        if self.n > cap {
            return Err(Error::cap(format!(
                "face enumeration capped: level {} exceeds {cap} (the search visits 2^(2^n) arc subsets)",
                self.n
            )));
        }
        let arc_count = self.graph.arc_count();
        let masks: Vec<u128> = self.cycles.iter().map(Cycle::arc_mask).collect();
        let mut faces = Vec::new();
        for support in 0..(1u128 << arc_count) {
            if !self.is_cycle_closed(support) {
                continue;
            }
            let cycles: Vec<usize> = (0..self.cycles.len())
                .filter(|&c| masks[c] & !support == 0)
                .collect();
            let pts: Vec<Vec<Rat>> = cycles.iter().map(|&c| self.vertices[c].clone()).collect();
            let dim = affine_dim(&pts);
            faces.push(Face {
                support,
                cycles,
                dim,
            });
        }
        Ok(faces)
    }

    /// An arc set is cycle-closed when every arc in it lies on a cycle that
    /// stays inside the set, i.e. each arc's source is reachable from its
    /// target without leaving the set.
    fn is_cycle_closed(&self, support: u128) -> bool {
        let nodes = self.graph.node_count();
        let mut reach = vec![0u64; nodes];
        for (t, slot) in reach.iter_mut().enumerate() {
            let mut seen = 1u64 << t;
            let mut frontier = vec![t];
            while let Some(v) = frontier.pop() {
                for arc in self.graph.arcs_from(v) {
                    if support & (1u128 << arc) == 0 {
                        continue;
                    }
                    let w = self.graph.arc_target(arc);
                    if seen & (1u64 << w) == 0 {
                        seen |= 1u64 << w;
                        frontier.push(w);
                    }
                }
            }
            *slot = seen;
        }
        (0..self.graph.arc_count()).all(|arc| {
            if support & (1u128 << arc) == 0 {
                return true;
            }
            let s = self.graph.arc_source(arc);
            let t = self.graph.arc_target(arc);
            reach[t] & (1u64 << s) != 0
        })
    }
}

/// Face counts keyed by dimension, the census the level-3 body is checked
/// against.
pub fn face_census(faces: &[Face]) -> BTreeMap<i64, usize> {
    let mut census = BTreeMap::new();
    for f in faces {
        *census.entry(f.dim).or_insert(0) += 1;
    }
    census
}

/// Exact affine dimension of a point set: rank of the differences to the
/// first point; -1 for the empty set.
pub fn affine_dim(points: &[Vec<Rat>]) -> i64 {
    let Some(first) = points.first() else {
        return -1;
    };
    let rows: Vec<Vec<Rat>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(first).map(|(a, b)| a - b).collect())
        .collect();
    matrix_rank(rows)
}

fn matrix_rank(mut rows: Vec<Vec<Rat>>) -> i64 {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let head = rows[rank][col].clone();
        for r in (rank + 1)..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = &rows[r][col] / &head;
            for c in col..cols {
                let sub = &rows[rank][c] * &factor;
                rows[r][c] -= sub;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank as i64
}

/// Writes a circulation (nonnegative arc weights, total mass 1, balanced at
/// every node) as an explicit convex combination of the cycles inside its
/// own support, by repeatedly peeling the cycle that the positive-weight
/// subgraph must contain. This realizes, constructively, the fact that a
/// face's circulation body is spanned by its cycles.
pub fn decompose_circulation(
    g: &DeBruijnGraph,
    weights: &[Rat],
) -> Result<Vec<(Cycle, Rat)>> {
    if weights.len() != g.arc_count() {
        return Err(Error::invalid(format!(
            "expected {} arc weights, got {}",
            g.arc_count(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::invalid("circulation weights must be nonnegative"));
    }
    let total: Rat = weights.iter().sum();
    if !total.is_one() {
        return Err(Error::invalid("circulation weights must sum to 1"));
    }
    if !kirchhoff_balanced(weights, g.n()) {
        return Err(Error::validation(
            "circulation-balance",
            "weights do not balance at every node",
        ));
    }
    let mut rem: Vec<Rat> = weights.to_vec();
    let mut parts = Vec::new();
    loop {
        let Some(seed) = (0..rem.len()).find(|&a| rem[a].is_positive()) else {
            break;
        };
        // Walk positive arcs until a node repeats; balance guarantees every
        // entered node still has positive outflow.
        let mut node = g.arc_source(seed);
        let mut seen_at: Vec<Option<usize>> = vec![None; g.node_count()];
        let mut walk: Vec<usize> = Vec::new();
        let cycle_arcs = loop {
            if let Some(pos) = seen_at[node] {
                break walk[pos..].to_vec();
            }
            seen_at[node] = Some(walk.len());
            let arc = g
                .arcs_from(node)
                .into_iter()
                .find(|&a| rem[a].is_positive())
                .expect("balanced positive inflow forces positive outflow");
            walk.push(arc);
            node = g.arc_target(arc);
        };
        let peel = cycle_arcs
            .iter()
            .map(|&a| rem[a].clone())
            .min()
            .expect("cycle is nonempty");
        for &a in &cycle_arcs {
            rem[a] -= &peel;
        }
        // Rotate so the stored cycle starts at its smallest node.
        let min_pos = (0..cycle_arcs.len())
            .min_by_key(|&i| g.arc_source(cycle_arcs[i]))
            .expect("nonempty");
        let arcs: Vec<usize> = cycle_arcs[min_pos..]
            .iter()
            .chain(&cycle_arcs[..min_pos])
            .copied()
            .collect();
        let len = arcs.len() as u64;
        let cycle = rebuild_cycle(g, arcs);
        parts.push((cycle, peel * Rat::from(num_bigint::BigInt::from(len))));
    }
    let mass: Rat = parts.iter().map(|(_, t)| t).sum();
    assert!(mass.is_one(), "peeled coefficients must sum to 1");
    Ok(parts)
}

fn rebuild_cycle(g: &DeBruijnGraph, arcs: Vec<usize>) -> Cycle {
    // Re-derive the cycle through its periodic word so the struct is built
    // through the same canonical path as enumeration.
    let mut w = Word::empty();
    for &a in &arcs {
        w = w.push(g.arc_first_letter(a)).expect("cycle fits in a word");
    }
    let m = PeriodicMeasure::new(w).expect("nonempty");
    let union = arcs.iter().fold(0u128, |acc, &a| acc | 1u128 << a);
    cycles_within(g, union)
        .into_iter()
        .find(|c| c.measure(g) == m)
        .expect("the walked cycle exists in its own arc set")
}
