//! Cycle covers of assignment solutions and their conversion into tours.

use serde::{Deserialize, Serialize};

use crate::assignment::{is_permutation, ApSolution};
use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::Edge;

/// Largest instance on which the exhaustive substitution search runs.
pub const SUBSTITUTION_SEARCH_MAX_N: usize = 9;

/// Merge order used by [`karp_patch`], echoed into run metadata.
pub const PATCH_VARIANT: &str = "karp-steele/largest-two";

/// A Hamiltonian cycle, listed from vertex 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub cost: f64,
}

impl Tour {
    /// Builds a tour from a successor map, or `None` if the map is not a
    /// single cycle through all vertices.
    pub fn from_successor(c: &CostMatrix, succ: &[usize]) -> Option<Self> {
        if !is_single_cycle(succ) {
            return None;
        }
        let mut order = Vec::with_capacity(succ.len());
        let mut v = 0;
        for _ in 0..succ.len() {
            order.push(v);
            v = succ[v];
        }
        Some(Self {
            order,
            cost: c.permutation_cost(succ),
        })
    }

    /// Builds a tour from a visiting order, rotating it to start at 0.
    pub fn from_order(c: &CostMatrix, order: &[usize]) -> Result<Self> {
        let n = c.n();
        if order.len() != n || !is_permutation(order) {
            return Err(Error::InvalidInput("order must visit every vertex exactly once".into()));
        }
        let mut succ = vec![0; n];
        for k in 0..n {
            succ[order[k]] = order[(k + 1) % n];
        }
        Self::from_successor(c, &succ)
            .ok_or_else(|| Error::InvalidInput("order does not form a tour".into()))
    }

    pub fn successor(&self) -> Vec<usize> {
        let n = self.order.len();
        let mut succ = vec![0; n];
        for k in 0..n {
            succ[self.order[k]] = self.order[(k + 1) % n];
        }
        succ
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.order.len();
        (0..n).map(move |k| (self.order[k], self.order[(k + 1) % n]))
    }
}

/// True iff `t` visits each of the `n` vertices once, starts at 0, and uses
/// no loop.
pub fn validate_tour(t: &Tour, n: usize) -> bool {
    t.order.len() == n
        && n >= 2
        && t.order.first() == Some(&0)
        && is_permutation(&t.order)
        && t.edges().all(|(i, j)| i != j)
}

/// True iff the successor map is one cycle through all vertices.
pub fn is_single_cycle(succ: &[usize]) -> bool {
    let n = succ.len();
    if n < 2 || !is_permutation(succ) {
        return false;
    }
    let mut v = 0;
    for step in 1..=n {
        v = succ[v];
        if v == 0 {
            return step == n;
        }
    }
    false
}

/// Disjoint cycles of a permutation, each listed from its smallest vertex,
/// ordered by that vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCover {
    pub cycles: Vec<Vec<usize>>,
}

impl CycleCover {
    pub fn of(succ: &[usize]) -> Self {
        let n = succ.len();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = start;
            while !seen[v] {
                seen[v] = true;
                cycle.push(v);
                v = succ[v];
            }
            cycles.push(cycle);
        }
        Self { cycles }
    }

    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.cycles.iter().map(Vec::len).collect()
    }

    /// `counts[i]` is the number of cycles of length `i`.
    pub fn length_counts(&self) -> Vec<usize> {
        let n: usize = self.lengths().iter().sum();
        let mut counts = vec![0; n + 1];
        for len in self.lengths() {
            counts[len] += 1;
        }
        counts
    }

    /// Index of the cycle through each vertex.
    pub fn cycle_index(&self) -> Vec<usize> {
        let n = self.cycles.iter().map(Vec::len).sum();
        let mut idx = vec![0; n];
        for (k, cycle) in self.cycles.iter().enumerate() {
            for &v in cycle {
                idx[v] = k;
            }
        }
        idx
    }
}

pub fn cycle_cover(sol: &ApSolution) -> CycleCover {
    CycleCover::of(&sol.assignment)
}

/// Patches the cycle cover of an assignment into a tour: while more than
/// one cycle remains, the two largest cycles (ties to the one with the
/// smaller first vertex) are merged by the cheapest exchange of one edge
/// from each.
pub fn karp_patch(c: &CostMatrix, sol: &ApSolution) -> Tour {
    patch_successor(c, sol.assignment.clone())
}

pub(crate) fn patch_successor(c: &CostMatrix, mut succ: Vec<usize>) -> Tour {
    loop {
        let cover = CycleCover::of(&succ);
        if cover.count() <= 1 {
            break;
        }
        let mut by_size: Vec<&Vec<usize>> = cover.cycles.iter().collect();
        by_size.sort_by(|x, y| y.len().cmp(&x.len()).then(x[0].cmp(&y[0])));
        let (mut first, mut second) = (by_size[0].clone(), by_size[1].clone());
        first.sort_unstable();
        second.sort_unstable();
        let mut best = (f64::INFINITY, 0, 0);
        for &a in &first {
            for &b in &second {
                let delta = c.cost(a, succ[b]) + c.cost(b, succ[a]) - c.cost(a, succ[a]) - c.cost(b, succ[b]);
                if delta < best.0 {
                    best = (delta, a, b);
                }
            }
        }
        let (_, a, b) = best;
        succ.swap(a, b);
    }
    Tour::from_successor(c, &succ).expect("patching ends with a single cycle")
}

/// Tour obtained by a k-substitution on the optimal cycle cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub delta: f64,
    pub tour: Tour,
}

/// Removes the matching edges `removed` (at least one per cycle), which
/// splits the cover into paths, path `t` starting at the head of
/// `removed[t]`. The paths are then joined in the sequence `order`, each
/// path's last vertex linked to the next path's first, and the cost of the
/// resulting tour minus Z_AP is returned.
pub fn k_substitution(
    c: &CostMatrix,
    sol: &ApSolution,
    removed: &[Edge],
    order: &[usize],
) -> Result<Substitution> {
    let n = c.n();
    let succ = &sol.assignment;
    let k = removed.len();
    if k == 0 {
        return Err(Error::InvalidSubstitution("no edges removed".into()));
    }
    let mut is_cut = vec![false; n];
    for &(i, j) in removed {
        if i >= n || succ[i] != j {
            return Err(Error::InvalidSubstitution(format!(
                "edge ({i}, {j}) is not in the matching"
            )));
        }
        if std::mem::replace(&mut is_cut[i], true) {
            return Err(Error::InvalidSubstitution(format!("edge ({i}, {j}) removed twice")));
        }
    }
    let cover = CycleCover::of(succ);
    if let Some(cycle) = cover.cycles.iter().find(|cy| !cy.iter().any(|&v| is_cut[v])) {
        return Err(Error::InvalidSubstitution(format!(
            "cycle through {} keeps all its edges",
            cycle[0]
        )));
    }
    if order.len() != k || !is_permutation(order) {
        return Err(Error::InvalidSubstitution(format!(
            "order must be a permutation of the {k} paths"
        )));
    }
    // Path t runs from the head of removed[t] to the next cut tail.
    let ends: Vec<(usize, usize)> = removed
        .iter()
        .map(|&(_, start)| {
            let mut v = start;
            while !is_cut[v] {
                v = succ[v];
            }
            (start, v)
        })
        .collect();
    let mut next = succ.clone();
    for t in 0..k {
        let (_, end) = ends[order[t]];
        let (start, _) = ends[order[(t + 1) % k]];
        if end == start {
            return Err(Error::InvalidSubstitution(format!("closing edge ({end}, {end}) is a loop")));
        }
        next[end] = start;
    }
    let tour = Tour::from_successor(c, &next)
        .ok_or_else(|| Error::InvalidSubstitution("result is not a single tour".into()))?;
    Ok(Substitution {
        delta: tour.cost - sol.value,
        tour,
    })
}

pub fn k_substitution_delta(
    c: &CostMatrix,
    sol: &ApSolution,
    removed: &[Edge],
    order: &[usize],
) -> Result<f64> {
    k_substitution(c, sol, removed, order).map(|s| s.delta)
}

/// Cheapest k-substitution over every removed set that covers all cycles
/// and every path order.
pub fn exhaustive_substitution_min(c: &CostMatrix, sol: &ApSolution) -> Result<Substitution> {
    let n = c.n();
    if n > SUBSTITUTION_SEARCH_MAX_N {
        return Err(Error::SizeGuard {
            what: "exhaustive substitution search",
            n,
            limit: SUBSTITUTION_SEARCH_MAX_N,
        });
    }
    let succ = &sol.assignment;
    let cover = CycleCover::of(succ);
    let cycle_of = cover.cycle_index();
    let mut best: Option<(f64, Vec<Edge>, Vec<usize>)> = None;
    for mask in 1u32..(1 << n) {
        let mut hit = vec![false; cover.count()];
        let tails: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        for &v in &tails {
            hit[cycle_of[v]] = true;
        }
        if hit.iter().any(|h| !h) {
            continue;
        }
        let removed: Vec<Edge> = tails.iter().map(|&v| (v, succ[v])).collect();
        let is_cut = |v: usize| mask >> v & 1 == 1;
        let ends: Vec<(usize, usize)> = removed
            .iter()
            .map(|&(_, start)| {
                let mut v = start;
                while !is_cut(v) {
                    v = succ[v];
                }
                (start, v)
            })
            .collect();
        let removed_cost: f64 = removed.iter().map(|&e| c.edge_cost(e)).sum();
        let k = removed.len();
        let mut order: Vec<usize> = (0..k).collect();
        for_each_rotation_free_order(&mut order, 1, &mut |order| {
            let mut added = 0.0;
            for t in 0..k {
                let end = ends[order[t]].1;
                let start = ends[order[(t + 1) % k]].0;
                if end == start {
                    return;
                }
                added += c.cost(end, start);
            }
            let delta = added - removed_cost;
            if best.as_ref().is_none_or(|b| delta < b.0) {
                best = Some((delta, removed.clone(), order.to_vec()));
            }
        });
    }
    let (_, removed, order) = best.ok_or_else(|| Error::InvalidSubstitution("no substitution exists".into()))?;
    k_substitution(c, sol, &removed, &order)
}

/// Visits every order with `order[0]` fixed, permuting the rest in place.
fn for_each_rotation_free_order(order: &mut [usize], from: usize, f: &mut impl FnMut(&[usize])) {
    if from >= order.len() {
        f(order);
        return;
    }
    for k in from..order.len() {
        order.swap(from, k);
        for_each_rotation_free_order(order, from + 1, f);
        order.swap(from, k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{solve_ap, Restriction};

    fn fake_solution(c: &CostMatrix, succ: Vec<usize>) -> ApSolution {
        let n = succ.len();
        ApSolution {
            value: c.permutation_cost(&succ),
            assignment: succ,
            free_rows: (0..n).collect(),
            free_cols: (0..n).collect(),
            u: vec![0.0; n],
            v: vec![0.0; n],
            n_free: n,
            m_free: n * (n - 1),
        }
    }

    #[test]
    fn cycle_structure() {
        let cover = CycleCover::of(&[1, 2, 3, 0]);
        assert_eq!(cover.count(), 1);
        let cover = CycleCover::of(&[1, 0, 3, 2]);
        assert_eq!(cover.lengths(), vec![2, 2]);
        assert_eq!(cover.length_counts()[2], 2);
        let cover = CycleCover::of(&[2, 4, 0, 1, 3]);
        assert_eq!(cover.lengths().iter().sum::<usize>(), 5);
    }

    #[test]
    fn tour_validation() {
        let c = CostMatrix::constant(4, 0.5).unwrap();
        let t = Tour::from_successor(&c, &[2, 3, 1, 0]).unwrap();
        assert!(validate_tour(&t, 4));
        assert_eq!(t.order, vec![0, 2, 1, 3]);
        assert!(Tour::from_successor(&c, &[1, 0, 3, 2]).is_none());
        let twice = Tour {
            order: vec![0, 1, 1, 3],
            cost: 2.0,
        };
        assert!(!validate_tour(&twice, 4));
        assert!(Tour::from_order(&c, &[0, 1, 1, 3]).is_err());
    }

    #[test]
    fn patch_keeps_tours_and_merges_two_cycles() {
        let c = CostMatrix::generate_uniform(4, 3).unwrap();
        let tour_sol = fake_solution(&c, vec![1, 2, 3, 0]);
        let t = karp_patch(&c, &tour_sol);
        assert_eq!(t.successor(), vec![1, 2, 3, 0]);

        // (1 2)(3 4) in one-based labels; the four crosswise exchanges.
        let sol = fake_solution(&c, vec![1, 0, 3, 2]);
        let t = karp_patch(&c, &sol);
        let s = &sol.assignment;
        let best = [(0, 2), (0, 3), (1, 2), (1, 3)]
            .iter()
            .map(|&(a, b)| c.cost(a, s[b]) + c.cost(b, s[a]) - c.cost(a, s[a]) - c.cost(b, s[b]))
            .fold(f64::INFINITY, f64::min);
        assert!((t.cost - (sol.value + best)).abs() < 1e-12);
        assert!(validate_tour(&t, 4));
    }

    #[test]
    fn identity_substitution_on_a_tour() {
        let c = CostMatrix::generate_uniform(5, 1).unwrap();
        let sol = fake_solution(&c, vec![1, 2, 3, 4, 0]);
        let d = k_substitution_delta(&c, &sol, &[(2, 3)], &[0]).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn invalid_substitutions_are_rejected() {
        let c = CostMatrix::generate_uniform(4, 1).unwrap();
        let sol = fake_solution(&c, vec![1, 0, 3, 2]);
        // Misses the second cycle.
        assert!(k_substitution_delta(&c, &sol, &[(0, 1)], &[0]).is_err());
        // Not a matching edge.
        assert!(k_substitution_delta(&c, &sol, &[(0, 2), (2, 3)], &[0, 1]).is_err());
        // Closing each path onto itself is not a path order.
        assert!(k_substitution_delta(&c, &sol, &[(0, 1), (2, 3)], &[0, 0]).is_err());
        assert!(k_substitution_delta(&c, &sol, &[(0, 1), (2, 3)], &[1, 0]).is_ok());
    }

    #[test]
    fn patched_cost_bounds_the_assignment() {
        for seed in 0..20 {
            let c = CostMatrix::generate_uniform(30, seed).unwrap();
            let sol = solve_ap(&c, &Restriction::empty(30)).unwrap();
            let t = karp_patch(&c, &sol);
            assert!(validate_tour(&t, 30));
            assert!(t.cost >= sol.value - 1e-12);
            assert_eq!(t, karp_patch(&c, &sol));
        }
    }
}
