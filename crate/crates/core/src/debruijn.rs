//! De Bruijn graphs over the binary alphabet, simple-cycle enumeration,
//! periodic orbit measures with their cylinder-frequency vectors, recursive
//! complexity, and basins (the cylinders an orbit touches).
//!
//! The level-n graph has the words of length n-1 as nodes and the words of
//! length n as arcs: the arc w runs from the first n-1 letters of w to the
//! last n-1. Node and arc identities are plain indices (the numeric value
//! of the word), so the whole structure is bit arithmetic; adjacency never
//! needs to be materialized.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::haar::Word;
use crate::rat::Rat;
use crate::{Error, Result};

/// Default ceiling for cycle enumeration; counts grow super-exponentially.
pub const DEFAULT_CYCLE_CAP: u32 = 6;

/// Hard ceiling imposed by the bit-parallel representation (node visit sets
/// in a u64, arc sets in a u128).
pub const BITSET_CYCLE_CAP: u32 = 7;

#[derive(Clone, Copy, Debug)]
pub struct DeBruijnGraph {
    n: u32,
}

pub fn build_graph(n: u32) -> Result<DeBruijnGraph> {
    if !(1..=16).contains(&n) {
        return Err(Error::invalid(format!("graph level {n} outside 1..=16")));
    }
    Ok(DeBruijnGraph { n })
}

impl DeBruijnGraph {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn node_count(&self) -> usize {
        1 << (self.n - 1)
    }

    pub fn arc_count(&self) -> usize {
        1 << self.n
    }

    /// First n-1 letters of the arc word.
    pub fn arc_source(&self, arc: usize) -> usize {
        arc >> 1
    }

    /// Last n-1 letters of the arc word.
    pub fn arc_target(&self, arc: usize) -> usize {
        arc & (self.node_count() - 1)
    }

    /// The two arcs leaving a node: append 0 or 1.
    pub fn arcs_from(&self, node: usize) -> [usize; 2] {
        [node << 1, node << 1 | 1]
    }

    /// The two arcs entering a node: prepend 0 or 1.
    pub fn arcs_into(&self, node: usize) -> [usize; 2] {
        [node, node | self.node_count()]
    }

    /// First letter of the arc word; walking a cycle and reading first
    /// letters spells the periodic word it carries.
    pub fn arc_first_letter(&self, arc: usize) -> u8 {
        ((arc >> (self.n - 1)) & 1) as u8
    }

    pub fn arc_word(&self, arc: usize) -> Word {
        Word::from_bits(arc as u64, self.n).expect("arc index in range")
    }

    pub fn node_word(&self, node: usize) -> Word {
        Word::from_bits(node as u64, self.n - 1).expect("node index in range")
    }
}

/// A closed walk through distinct nodes, stored as its arc sequence
/// starting at the cycle's smallest node index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    n: u32,
    arcs: Vec<usize>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a cycle has at least one arc
    }

    pub fn arcs(&self) -> &[usize] {
        &self.arcs
    }

    /// Arc set as a bitmask (arc index i at bit i).
    pub fn arc_mask(&self) -> u128 {
        self.arcs.iter().fold(0u128, |m, &a| m | 1u128 << a)
    }

    /// The periodic word the cycle carries (first letters of its arcs).
    pub fn word(&self, g: &DeBruijnGraph) -> Word {
        let mut w = Word::empty();
        for &a in &self.arcs {
            w = w.push(g.arc_first_letter(a)).expect("cycle length within word cap");
        }
        w
    }

    pub fn measure(&self, g: &DeBruijnGraph) -> PeriodicMeasure {
        PeriodicMeasure::new(self.word(g)).expect("cycle words are nonempty")
    }
}

/// Depth-first enumeration of all simple cycles whose smallest node is
/// `start`, restricted to arcs allowed by `mask`. Each simple cycle of the
/// graph is produced exactly once overall because its smallest node is
/// unique. Returns true if the `stop_at` quota was reached.
fn dfs_cycles(
    g: &DeBruijnGraph,
    start: usize,
    node: usize,
    visited: u64,
    mask: u128,
    path: &mut Vec<usize>,
    out: &mut Vec<Cycle>,
    stop_at: usize,
) -> bool {
    for arc in g.arcs_from(node) {
        if mask & (1u128 << arc) == 0 {
            continue;
        }
        let t = g.arc_target(arc);
        if t == start {
            path.push(arc);
            out.push(Cycle {
                n: g.n(),
                arcs: path.clone(),
            });
            path.pop();
            if out.len() >= stop_at {
                return true;
            }
        } else if t > start && visited & (1u64 << t) == 0 {
            path.push(arc);
            let stop = dfs_cycles(g, start, t, visited | 1u64 << t, mask, path, out, stop_at);
            path.pop();
            if stop {
                return true;
            }
        }
    }
    false
}

fn cycles_impl(g: &DeBruijnGraph, mask: u128, stop_at: usize) -> Vec<Cycle> {
    assert!(
        g.n() <= BITSET_CYCLE_CAP,
        "cycle search needs the bit-parallel representation (level <= {BITSET_CYCLE_CAP})"
    );
    let mut out = Vec::new();
    let mut path = Vec::new();
    for start in 0..g.node_count() {
        if dfs_cycles(g, start, start, 1u64 << start, mask, &mut path, &mut out, stop_at) {
            break;
        }
    }
    out
}

/// All simple cycles, each exactly once, in a deterministic order (by
/// smallest node, then lexicographic arc choices).
pub fn enumerate_cycles(g: &DeBruijnGraph) -> Result<Vec<Cycle>> {
    enumerate_cycles_capped(g, DEFAULT_CYCLE_CAP)
}

pub fn enumerate_cycles_capped(g: &DeBruijnGraph, cap: u32) -> Result<Vec<Cycle>> {
    let cap = cap.min(BITSET_CYCLE_CAP);
    if g.n() > cap {
        return Err(Error::cap(format!(
            "cycle enumeration at level {} exceeds cap {cap}",
            g.n()
        )));
    }
    Ok(cycles_impl(g, u128::MAX, usize::MAX))
}

/// Cycles using only the arcs in `mask`.
pub fn cycles_within(g: &DeBruijnGraph, mask: u128) -> Vec<Cycle> {
    cycles_impl(g, mask, usize::MAX)
}

/// Number of cycles inside `mask`, counting no further than `stop_at`.
pub fn count_cycles_within(g: &DeBruijnGraph, mask: u128, stop_at: usize) -> usize {
    cycles_impl(g, mask, stop_at).len()
}

/// Number of cycles of maximal length 2^(n-1); checked against the closed
/// form 2^(2^(n-2) - n + 1), which counts full-length cycles exactly.
pub fn hamiltonian_count(n: u32) -> Result<u64> {
    if n < 2 {
        return Err(Error::invalid("maximal-cycle count needs level >= 2"));
    }
    let g = build_graph(n)?;
    let cycles = enumerate_cycles(&g)?;
    let count = cycles.iter().filter(|c| c.len() == g.node_count()).count() as u64;
    let expected = 1u64 << ((1u64 << (n - 2)) + 1 - n as u64);
    assert_eq!(count, expected, "maximal-cycle census disagrees with the closed form");
    Ok(count)
}

/// A periodic orbit of the shift, identified by the lexicographically least
/// rotation of its primitive word. Non-primitive input is reduced to its
/// primitive root (the orbit is the same).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodicMeasure {
    word: Word,
}

impl PeriodicMeasure {
    pub fn new(word: Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::invalid("a periodic orbit needs a nonempty word"));
        }
        let primitive = primitive_root(&word);
        let canonical = (0..primitive.len())
            .map(|k| primitive.rotate_left(k))
            .min()
            .expect("nonempty");
        Ok(PeriodicMeasure { word: canonical })
    }

    pub fn parse(s: &str) -> Result<Self> {
        PeriodicMeasure::new(s.parse()?)
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn period(&self) -> u32 {
        self.word.len()
    }

    /// The first k letters of the orbit point starting at offset j.
    pub fn window(&self, j: u32, k: u32) -> Result<Word> {
        let p = self.period();
        let mut w = Word::empty();
        for i in 0..k {
            w = w.push(self.word.bit((j + i) % p))?;
        }
        Ok(w)
    }

    /// Level-k cylinder frequencies: entry i is the fraction of orbit
    /// points whose first k letters spell the word with index i.
    pub fn pi(&self, k: u32) -> Result<Vec<Rat>> {
        if k > crate::haar::MAX_LEVEL {
            return Err(Error::cap(format!(
                "frequency vector at level {k} exceeds {}",
                crate::haar::MAX_LEVEL
            )));
        }
        let p = self.period();
        let mut counts = vec![0u64; 1 << k];
        for j in 0..p {
            counts[self.window(j, k)?.index()] += 1;
        }
        let period = Rat::from(BigInt::from(p));
        Ok(counts
            .into_iter()
            .map(|c| Rat::from(BigInt::from(c)) / &period)
            .collect())
    }

    /// The level-k cylinders that meet the orbit.
    pub fn basin(&self, k: u32) -> Result<BTreeSet<Word>> {
        (0..self.period()).map(|j| self.window(j, k)).collect()
    }

    /// Least n such that distinct orbit points sit in distinct level-(n-1)
    /// cylinders, i.e. the orbit's walk on the level-n graph is a simple
    /// cycle. At most period + 1, since full-period windows are distinct.
    pub fn recursive_complexity(&self) -> u32 {
        for d in 0..=self.period() {
            let windows = self.basin(d).expect("window length within cap");
            if windows.len() as u32 == self.period() {
                return d + 1;
            }
        }
        unreachable!("primitive words have distinct full-period rotations")
    }
}

impl std::fmt::Display for PeriodicMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.word)
    }
}

impl Serialize for PeriodicMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.word.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PeriodicMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Word::deserialize(d)?;
        PeriodicMeasure::new(w).map_err(|e| D::Error::custom(format!("{e}")))
    }
}

fn primitive_root(word: &Word) -> Word {
    let len = word.len();
    'outer: for p in 1..=len {
        if len % p != 0 {
            continue;
        }
        for i in p..len {
            if word.bit(i) != word.bit(i % p) {
                continue 'outer;
            }
        }
        return word.prefix(p);
    }
    unreachable!("every word is periodic with its own length")
}

/// Symbolic check of the basin nesting identity: pulling the level-n basin
/// back through j = 0..s shift preimages and intersecting equals the
/// level-(n+s) basin, provided the orbit is already simple at level n.
pub fn basin_intersection_check(m: &PeriodicMeasure, n: u32, s: u32) -> Result<bool> {
    if m.recursive_complexity() > n {
        return Err(Error::validation(
            "basin-identity-hypothesis",
            format!(
                "orbit {m} has recursive complexity {} > {n}; the identity is only claimed \
                 for orbits simple at level {n}",
                m.recursive_complexity()
            ),
        ));
    }
    let basin_n = m.basin(n)?;
    let level = n + s;
    let mut lhs = BTreeSet::new();
    for w in Word::all_of_len(level)? {
        // w lies in the j-th preimage iff its letters j..j+n form a basin word.
        let ok = (0..=s).all(|j| basin_n.contains(&w.prefix(j + n).suffix(n)));
        if ok {
            lhs.insert(w);
        }
    }
    Ok(lhs == m.basin(level)?)
}

/// Kirchhoff balance of a level-k frequency vector: at every node of the
/// level-k graph, inbound weight equals outbound weight.
pub fn kirchhoff_balanced(pi: &[Rat], k: u32) -> bool {
    assert_eq!(pi.len(), 1 << k, "frequency vector length");
    if k == 0 {
        return true;
    }
    let half = 1usize << (k - 1);
    (0..half).all(|node| {
        let outbound = &pi[node << 1] + &pi[node << 1 | 1];
        let inbound = &pi[node] + &pi[node | half];
        outbound == inbound
    })
}

/// Census data the CLI emits for one cycle.
#[derive(Serialize)]
pub struct CycleRecord {
    pub word: String,
    pub period: u32,
    pub pi: Vec<String>,
}

pub fn cycle_records(g: &DeBruijnGraph, cycles: &[Cycle]) -> Result<Vec<CycleRecord>> {
    let mut map = BTreeMap::new();
    for c in cycles {
        let m = c.measure(g);
        let pi = m.pi(g.n())?;
        map.insert(
            m.word().to_owned(),
            CycleRecord {
                word: m.word().to_string(),
                period: m.period(),
                pi: pi.iter().map(crate::rat::format_rat).collect(),
            },
        );
    }
    Ok(map.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;
    use num_traits::Signed;

    fn m(s: &str) -> PeriodicMeasure {
        PeriodicMeasure::parse(s).unwrap()
    }

    /// Independent census oracle: lexicographically least primitive words of
    /// length <= 2^(n-1) whose level-(n-1) windows are pairwise distinct.
    fn necklace_census(n: u32) -> BTreeSet<PeriodicMeasure> {
        let mut out = BTreeSet::new();
        for len in 1..=(1u32 << (n - 1)) {
            for bits in 0..(1u64 << len) {
                let w = Word::from_bits(bits, len).unwrap();
                let pm = PeriodicMeasure::new(w).unwrap();
                if pm.period() == len && *pm.word() == w && pm.recursive_complexity() <= n {
                    out.insert(pm);
                }
            }
        }
        out
    }

    #[test]
    fn graph_shape_examples() {
        let g1 = build_graph(1).unwrap();
        assert_eq!((g1.node_count(), g1.arc_count()), (1, 2));
        assert_eq!(g1.arc_source(0), 0);
        assert_eq!(g1.arc_target(0), 0);
        assert_eq!(g1.arc_target(1), 0);

        let g3 = build_graph(3).unwrap();
        assert_eq!((g3.node_count(), g3.arc_count()), (4, 8));
        let arc = 0b010;
        assert_eq!(g3.arc_word(arc).to_string(), "010");
        assert_eq!(g3.node_word(g3.arc_source(arc)).to_string(), "01");
        assert_eq!(g3.node_word(g3.arc_target(arc)).to_string(), "10");

        let g4 = build_graph(4).unwrap();
        assert_eq!((g4.node_count(), g4.arc_count()), (8, 16));
        for node in 0..g4.node_count() {
            assert_eq!(g4.arcs_from(node).map(|a| g4.arc_source(a)), [node, node]);
            assert_eq!(g4.arcs_into(node).map(|a| g4.arc_target(a)), [node, node]);
        }
        assert!(build_graph(0).is_err());
        assert!(build_graph(17).is_err());
    }

    #[test]
    fn cycle_census_small_levels() {
        let g1 = build_graph(1).unwrap();
        let words: BTreeSet<String> = enumerate_cycles(&g1)
            .unwrap()
            .iter()
            .map(|c| c.measure(&g1).to_string())
            .collect();
        assert_eq!(words, ["0", "1"].iter().map(|s| s.to_string()).collect());

        let g3 = build_graph(3).unwrap();
        let words: BTreeSet<String> = enumerate_cycles(&g3)
            .unwrap()
            .iter()
            .map(|c| c.measure(&g3).to_string())
            .collect();
        let expected: BTreeSet<String> = ["0", "1", "01", "001", "011", "0011"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(words, expected);
        assert_eq!(words.len(), 6);
    }

    #[test]
    fn census_matches_necklace_oracle_and_nests() {
        let mut previous: BTreeSet<PeriodicMeasure> = BTreeSet::new();
        for n in 1..=5u32 {
            let g = build_graph(n).unwrap();
            let cycles = enumerate_cycles(&g).unwrap();
            let measures: BTreeSet<PeriodicMeasure> =
                cycles.iter().map(|c| c.measure(&g)).collect();
            assert_eq!(measures.len(), cycles.len(), "distinct cycles share an orbit at {n}");
            assert_eq!(measures, necklace_census(n), "census mismatch at level {n}");
            assert!(previous.is_subset(&measures), "census not nested at level {n}");
            previous = measures;
        }
    }

    #[test]
    fn cycle_lengths_and_maximal_counts() {
        for (n, expected) in [(2u32, 1u64), (3, 1), (4, 2), (5, 16)] {
            let g = build_graph(n).unwrap();
            for c in enumerate_cycles(&g).unwrap() {
                assert!(c.len() <= g.node_count());
            }
            assert_eq!(hamiltonian_count(n).unwrap(), expected);
        }
        assert!(hamiltonian_count(1).is_err());
        assert!(enumerate_cycles(&build_graph(7).unwrap()).is_err());
    }

    #[test]
    fn measures_canonicalize_and_reduce() {
        assert_eq!(m("1010").word().to_string(), "01");
        assert_eq!(m("110").word().to_string(), "011");
        assert_eq!(m("000000").period(), 1);
        assert_eq!(m("0101").period(), 2);
        assert!(PeriodicMeasure::new(Word::empty()).is_err());
    }

    #[test]
    fn frequency_vectors_are_balanced_probabilities() {
        for word in ["0", "01", "001", "0011", "00101"] {
            let pm = m(word);
            for k in 0..=4u32 {
                let pi = pm.pi(k).unwrap();
                let total: Rat = pi.iter().sum();
                assert_eq!(total, rat(1, 1));
                assert!(pi.iter().all(|x| !x.is_negative()));
                assert!(kirchhoff_balanced(&pi, k), "imbalance for {word} at level {k}");
            }
        }
        assert_eq!(m("01").pi(2).unwrap(), vec![rat(0, 1), rat(1, 2), rat(1, 2), rat(0, 1)]);
    }

    #[test]
    fn recursive_complexity_examples() {
        assert_eq!(m("0").recursive_complexity(), 1);
        assert_eq!(m("01").recursive_complexity(), 2);
        assert_eq!(m("000111").recursive_complexity(), 4);
        assert_eq!(m("01011").recursive_complexity(), 5);
        assert_eq!(m("0011").recursive_complexity(), 3);
    }

    #[test]
    fn basin_examples() {
        let expect = |words: &[&str]| -> BTreeSet<Word> {
            words.iter().map(|s| s.parse().unwrap()).collect()
        };
        assert_eq!(m("01").basin(2).unwrap(), expect(&["01", "10"]));
        assert_eq!(m("01").basin(3).unwrap(), expect(&["010", "101"]));
        assert_eq!(m("0").basin(3).unwrap(), expect(&["000"]));
    }

    #[test]
    fn basin_intersection_identity() {
        assert!(basin_intersection_check(&m("01"), 2, 1).unwrap());
        assert!(basin_intersection_check(&m("0"), 1, 4).unwrap());
        assert!(basin_intersection_check(&m("0011"), 3, 2).unwrap());
        // Hypothesis violated: 0011 is not simple at level 2.
        assert!(basin_intersection_check(&m("0011"), 2, 1).is_err());
    }

    #[test]
    fn basin_identity_exhaustive_small_levels() {
        for n in 1..=4u32 {
            let g = build_graph(n).unwrap();
            for c in enumerate_cycles(&g).unwrap() {
                let pm = c.measure(&g);
                for s in 0..=3u32 {
                    assert!(
                        basin_intersection_check(&pm, n, s).unwrap(),
                        "identity failed for {pm} at n={n}, s={s}"
                    );
                }
            }
        }
    }
}
