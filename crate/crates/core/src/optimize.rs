//! Exact ergodic optimization for level-n step functions.
//!
//! The time-average of a step function against a periodic orbit is a
//! rational number, and over all shift-invariant measures the supremum is
//! attained at a vertex of the rotation polytope, i.e. at a periodic orbit
//! whose recursive complexity is at most the function's level. Everything
//! here is exact rational arithmetic; Karp's minimum/maximum cycle-mean
//! recursion over the de Bruijn graph serves as an independent check on the
//! vertex scan.

use num_traits::Zero;

use crate::debruijn::{DeBruijnGraph, PeriodicMeasure};
use crate::haar::StepFunction;
use crate::polytope::{build_polytope, RotationPolytope};
use crate::rat::{rat, Rat};
use crate::{Error, Result};

/// Outcome of maximizing a step function over the rotation polytope.
#[derive(Clone, Debug)]
pub struct OptimizationResult {
    /// The maximum time-average.
    pub ergsup: Rat,
    /// Index of the optimal vertex in the polytope's word-sorted order.
    pub maximizer_index: usize,
    /// The optimal periodic orbit (lexicographically least among ties).
    pub maximizer: PeriodicMeasure,
    /// Best value over the non-maximizing vertices.
    pub second_best: Rat,
    /// ergsup - second_best; zero exactly when the maximizer is not unique.
    pub gap: Rat,
    /// True when two or more vertices attain the maximum.
    pub tie: bool,
}

/// Time-average of `f` along the periodic orbit of `m`: the mean of `f`
/// over one period, equivalently the inner product of `f`'s cylinder values
/// with the orbit's level-n frequency vector.
pub fn evaluate(f: &StepFunction, m: &PeriodicMeasure) -> Result<Rat> {
    let level = f.level();
    if level == 0 {
        return Ok(f.values()[0].clone());
    }
    let p = m.period();
    let mut sum = Rat::zero();
    for j in 0..p {
        let w = m.window(j, level)?;
        sum += f.value_on(&w)?;
    }
    Ok(sum / rat(p as i64, 1))
}

/// Values of `f` at every vertex of `p`, in vertex order.
pub fn vertex_values(p: &RotationPolytope, f: &StepFunction) -> Result<Vec<Rat>> {
    p.measures().iter().map(|m| evaluate(f, m)).collect()
}

/// Maximize `f` over all shift-invariant measures by scanning the vertices
/// of the rotation polytope at the function's own level (level-0 functions
/// are lifted to level 1, where the answer is their constant value).
pub fn ergodic_supremum(f: &StepFunction) -> Result<OptimizationResult> {
    let n = f.level().max(1);
    let p = build_polytope(n)?;
    ergodic_supremum_with(&p, f)
}

/// Maximize `f` over the given polytope. Requires the polytope level to be
/// at least the function level, so that the vertex scan is exact.
pub fn ergodic_supremum_with(
    p: &RotationPolytope,
    f: &StepFunction,
) -> Result<OptimizationResult> {
    if f.level() > p.n() {
        return Err(Error::invalid(format!(
            "polytope level {} cannot resolve a level-{} function",
            p.n(),
            f.level()
        )));
    }
    let values = vertex_values(p, f)?;
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if v > &values[best] {
            best = i;
        }
    }
    // Vertices are sorted by orbit word, so the first argmax is the
    // lexicographically least maximizer.
    let ergsup = values[best].clone();
    let second_best = values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, v)| v)
        .max()
        .cloned()
        .unwrap_or_else(|| ergsup.clone());
    let gap = &ergsup - &second_best;
    let tie = gap.is_zero() && values.len() > 1;
    if p.n() <= 4 {
        let via_neighbors = gap_via_neighbors(p, &values, best);
        assert_eq!(
            gap, via_neighbors,
            "the runner-up must be found among the maximizer's neighbors"
        );
    }
    Ok(OptimizationResult {
        ergsup,
        maximizer_index: best,
        maximizer: p.measure(best).clone(),
        second_best,
        gap,
        tie,
    })
}

/// The gap computed from the maximizer's polytope neighbors only. A linear
/// functional's second-best vertex is always edge-adjacent to an argmax
/// vertex, so this agrees with the global gap.
pub fn gap_via_neighbors(p: &RotationPolytope, values: &[Rat], max_index: usize) -> Rat {
    let nb = p.neighbors(max_index);
    let best_nb = nb
        .iter()
        .map(|&j| &values[j])
        .max()
        .cloned()
        .unwrap_or_else(|| values[max_index].clone());
    &values[max_index] - &best_nb
}

/// Karp's recursion for the maximum cycle mean of arc weights on the
/// level-n de Bruijn graph: with D_k(v) the best k-step walk weight from a
/// fixed source, the answer is max_v min_k (D_N(v) - D_k(v)) / (N - k).
/// Exact rational arithmetic throughout; used as an oracle for the vertex
/// scan.
pub fn karp_max_cycle_mean(g: &DeBruijnGraph, weights: &[Rat]) -> Result<Rat> {
    if weights.len() != g.arc_count() {
        return Err(Error::invalid(format!(
            "expected {} arc weights, got {}",
            g.arc_count(),
            weights.len()
        )));
    }
    let n = g.node_count();
    // d[k][v] = maximum weight of a k-arc walk from node 0 to v.
    let mut d: Vec<Vec<Option<Rat>>> = vec![vec![None; n]; n + 1];
    d[0][0] = Some(Rat::zero());
    for k in 0..n {
        for v in 0..n {
            let Some(base) = d[k][v].clone() else {
                continue;
            };
            for arc in g.arcs_from(v) {
                let t = g.arc_target(arc);
                let cand = &base + &weights[arc];
                let slot = &mut d[k + 1][t];
                if slot.as_ref().map_or(true, |cur| cand > *cur) {
                    *slot = Some(cand);
                }
            }
        }
    }
    let mut best: Option<Rat> = None;
    for v in 0..n {
        let Some(dn) = &d[n][v] else {
            continue;
        };
        let mut inner: Option<Rat> = None;
        for (k, row) in d.iter().enumerate().take(n) {
            let Some(dk) = &row[v] else {
                continue;
            };
            let mean = (dn - dk) / rat((n - k) as i64, 1);
            if inner.as_ref().map_or(true, |cur| mean < *cur) {
                inner = Some(mean);
            }
        }
        if let Some(m) = inner {
            if best.as_ref().map_or(true, |cur| m > *cur) {
                best = Some(m);
            }
        }
    }
    best.ok_or_else(|| Error::invalid("no cycle reachable from node 0"))
}

/// Checks the cancellation inequality that controls how much a level-k
/// function can beat its own level-n restriction's maximizer:
///
///   <g, xi> - <g, mu>  <=  2 (k - n + 1) ||g||_inf * xi(complement of B)
///
/// where B is the union of the level-n cylinders on the words of mu's
/// level-n basin. `mu` must be a vertex at level n, `xi` any orbit of
/// complexity at most k = level(g), with period(mu) <= period(xi).
pub fn cancellation_bound_check(
    g: &StepFunction,
    mu: &PeriodicMeasure,
    xi: &PeriodicMeasure,
    n: u32,
) -> Result<bool> {
    let k = g.level();
    if n == 0 || n > k {
        return Err(Error::invalid(format!(
            "restriction level {n} must lie in 1..={k}"
        )));
    }
    if mu.recursive_complexity() > n {
        return Err(Error::invalid(format!(
            "orbit {mu} has complexity {} > {n}",
            mu.recursive_complexity()
        )));
    }
    if xi.recursive_complexity() > k {
        return Err(Error::invalid(format!(
            "orbit {xi} has complexity {} > {k}",
            xi.recursive_complexity()
        )));
    }
    if mu.period() > xi.period() {
        return Err(Error::invalid(format!(
            "period of {mu} exceeds period of {xi}"
        )));
    }
    let lhs = evaluate(g, xi)? - evaluate(g, mu)?;
    let basin = mu.basin(n)?;
    let pi = xi.pi(n)?;
    let mut inside = Rat::zero();
    for w in &basin {
        inside += &pi[w.index()];
    }
    let outside = rat(1, 1) - inside;
    let factor = rat(2 * (k - n + 1) as i64, 1);
    let rhs = factor * g.sup_norm() * outside;
    Ok(lhs <= rhs)
}
