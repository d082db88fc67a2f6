//! Sensitivity of an AP(F) optimum: insertion costs of non-matching edges,
//! near-optimal alternative matchings, and the basis tree of tight edges.
//!
//! The cheapest feasible matching that contains a free edge `(a, b)` differs
//! from the optimum by one alternating cycle: `a -> b`, back along the
//! matching to `r = pi^-1(b)`, then a shortest alternating path from `r` to
//! `pi(a)` through reduced costs. One Dijkstra scan per row yields every
//! completion at once.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{invert, AnalysisParams, ApSolution, Restriction, TIGHT_TOLERANCE};
use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::Edge;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub edge: Edge,
    /// `C(M_e) - Z_AP(F)`.
    pub delta: f64,
    /// Cheapest feasible matching containing the edge.
    pub matching: Vec<usize>,
}

/// Shortest alternating completions from every free row, in local indices.
pub struct InsertionTable<'a> {
    c: &'a CostMatrix,
    f: &'a Restriction,
    sol: &'a ApSolution,
    row_pos: Vec<Option<usize>>,
    col_pos: Vec<Option<usize>>,
    inverse: Vec<usize>,
    /// `dist[r][b]`: cheapest alternating path from free row `r` to free
    /// column `b` (infinite if unreachable).
    dist: Vec<Vec<f64>>,
    /// Column from which `b` was reached on the path from `r` (local index),
    /// or `None` when reached directly from `r`.
    via: Vec<Vec<Option<usize>>>,
}

impl<'a> InsertionTable<'a> {
    pub fn new(c: &'a CostMatrix, f: &'a Restriction, sol: &'a ApSolution) -> Self {
        let n = c.n();
        let m = sol.n_free;
        let mut row_pos = vec![None; n];
        let mut col_pos = vec![None; n];
        for (a, &i) in sol.free_rows.iter().enumerate() {
            row_pos[i] = Some(a);
        }
        for (b, &j) in sol.free_cols.iter().enumerate() {
            col_pos[j] = Some(b);
        }
        let mut table = Self {
            c,
            f,
            sol,
            row_pos,
            col_pos,
            inverse: invert(&sol.assignment),
            dist: Vec::with_capacity(m),
            via: Vec::with_capacity(m),
        };
        let reduced = table.reduced_matrix();
        for r in 0..m {
            let (d, v) = table.scan_from(r, &reduced);
            table.dist.push(d);
            table.via.push(v);
        }
        table
    }

    /// Reduced costs on the free problem, `INFINITY` where forbidden or matched.
    fn reduced_matrix(&self) -> Vec<f64> {
        let m = self.sol.n_free;
        let mut out = vec![f64::INFINITY; m * m];
        for (a, &i) in self.sol.free_rows.iter().enumerate() {
            for (b, &j) in self.sol.free_cols.iter().enumerate() {
                if self.sol.assignment[i] != j && self.f.allows((i, j)) {
                    out[a * m + b] = (self.c.cost(i, j) - self.sol.u[a] - self.sol.v[b]).max(0.0);
                }
            }
        }
        out
    }

    fn matched_row_of_col(&self, b: usize) -> usize {
        let j = self.sol.free_cols[b];
        self.row_pos[self.inverse[j]].expect("free column is matched to a free row")
    }

    fn scan_from(&self, root: usize, reduced: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
        let m = self.sol.n_free;
        let mut dist = vec![f64::INFINITY; m];
        let mut via = vec![None; m];
        let mut done = vec![false; m];
        for b in 0..m {
            dist[b] = reduced[root * m + b];
        }
        loop {
            let mut best = None;
            for b in 0..m {
                if !done[b] && dist[b].is_finite() && best.is_none_or(|k: usize| dist[b] < dist[k]) {
                    best = Some(b);
                }
            }
            let Some(b) = best else { break };
            done[b] = true;
            let r = self.matched_row_of_col(b);
            if r == root {
                continue;
            }
            for k in 0..m {
                if done[k] {
                    continue;
                }
                let w = reduced[r * m + k];
                if w.is_finite() && dist[b] + w < dist[k] {
                    dist[k] = dist[b] + w;
                    via[k] = Some(b);
                }
            }
        }
        (dist, via)
    }

    fn check_edge(&self, e: Edge) -> Result<()> {
        let n = self.c.n();
        if e.0 >= n || e.1 >= n {
            return Err(Error::InvalidEdge {
                edge: e,
                reason: "endpoint out of range",
            });
        }
        if self.sol.contains(e) {
            return Ok(());
        }
        if !self.f.is_free_edge(e) {
            return Err(Error::InvalidEdge {
                edge: e,
                reason: "edge is a loop, forced out, inadmissible, or blocked by a forced-in edge",
            });
        }
        Ok(())
    }

    /// `C(M_e) - Z_AP(F)` computed from reduced costs, `None` if no feasible
    /// matching contains `e`.
    pub fn delta(&self, e: Edge) -> Result<Option<f64>> {
        self.check_edge(e)?;
        if self.sol.contains(e) {
            return Ok(Some(0.0));
        }
        let (a, b) = (self.row_pos[e.0].unwrap(), self.col_pos[e.1].unwrap());
        let r = self.row_pos[self.inverse[e.1]].unwrap();
        let target = self.col_pos[self.sol.assignment[e.0]].unwrap();
        let rc = (self.c.cost(e.0, e.1) - self.sol.u[a] - self.sol.v[b]).max(0.0);
        let d = self.dist[r][target];
        Ok(d.is_finite().then_some(rc + d))
    }

    /// Cheapest feasible matching containing `e`.
    pub fn insertion(&self, e: Edge) -> Result<Insertion> {
        let Some(_) = self.delta(e)? else {
            return Err(Error::InvalidEdge {
                edge: e,
                reason: "no feasible matching contains this edge",
            });
        };
        let mut matching = self.sol.assignment.clone();
        if !self.sol.contains(e) {
            let r_local = self.row_pos[self.inverse[e.1]].unwrap();
            let target = self.col_pos[self.sol.assignment[e.0]].unwrap();
            // Walk back from the target column, re-assigning each column to
            // the row that reached it.
            let mut b = target;
            loop {
                let from_row = match self.via[r_local][b] {
                    Some(prev) => self.matched_row_of_col(prev),
                    None => r_local,
                };
                matching[self.sol.free_rows[from_row]] = self.sol.free_cols[b];
                match self.via[r_local][b] {
                    Some(prev) => b = prev,
                    None => break,
                }
            }
            matching[e.0] = e.1;
        }
        let delta = self.c.permutation_cost(&matching) - self.sol.value;
        Ok(Insertion {
            edge: e,
            delta,
            matching,
        })
    }

    /// Every free non-matching edge with a feasible completion, cheapest first
    /// (ties by edge).
    pub fn ranked(&self) -> Vec<(f64, Edge)> {
        let mut out = Vec::new();
        for &i in &self.sol.free_rows {
            for &j in &self.sol.free_cols {
                let e = (i, j);
                if self.sol.contains(e) || !self.f.is_free_edge(e) {
                    continue;
                }
                if let Ok(Some(d)) = self.delta(e) {
                    out.push((d, e));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        out
    }
}

/// Insertion cost of a single edge.
pub fn insertion_cost(
    c: &CostMatrix,
    f: &Restriction,
    sol: &ApSolution,
    e: Edge,
) -> Result<Insertion> {
    if sol.contains(e) {
        return Ok(Insertion {
            edge: e,
            delta: 0.0,
            matching: sol.assignment.clone(),
        });
    }
    InsertionTable::new(c, f, sol).insertion(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    /// Distinguishing edge, in this matching and in no other returned one.
    pub edge: Edge,
    pub matching: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternatives {
    pub base: ApSolution,
    pub items: Vec<Alternative>,
    /// Fewer than `d` alternatives were found.
    pub shortfall: bool,
    /// `F` is outside `|F1| <= n^(3 eps/8)`, `|F0| <= n^(3 eps/4)`.
    pub outside_size_regime: bool,
}

impl Alternatives {
    /// Re-derives the postconditions from the returned matchings.
    pub fn verify(&self, c: &CostMatrix, f: &Restriction, threshold: f64) -> std::result::Result<(), String> {
        let mut seen = HashSet::new();
        for (k, alt) in self.items.iter().enumerate() {
            if !f.admits(&alt.matching) {
                return Err(format!("alternative {k} is not feasible"));
            }
            let cost = c.permutation_cost(&alt.matching);
            if (cost - alt.cost).abs() > 1e-12 {
                return Err(format!("alternative {k} misreports its cost"));
            }
            if cost - self.base.value > threshold + TIGHT_TOLERANCE {
                return Err(format!("alternative {k} exceeds the cost threshold"));
            }
            if !seen.insert(alt.matching.clone()) || alt.matching == self.base.assignment {
                return Err(format!("alternative {k} repeats a matching"));
            }
            if alt.matching[alt.edge.0] != alt.edge.1 || f.forced_in().contains(&alt.edge) {
                return Err(format!("alternative {k} does not use its edge"));
            }
            for (l, other) in self.items.iter().enumerate() {
                if l != k && other.matching[alt.edge.0] == alt.edge.1 {
                    return Err(format!("edge of alternative {k} also lies in alternative {l}"));
                }
            }
        }
        Ok(())
    }
}

/// Up to `params.d` distinct matchings within `params.alt_threshold` of
/// Z_AP(F), each with an edge that none of the others use. Candidates are
/// the cheapest completions of single non-matching edges, taken in order of
/// insertion cost and kept greedily when compatible with those already kept.
pub fn alternatives(c: &CostMatrix, f: &Restriction, params: &AnalysisParams) -> Result<Alternatives> {
    let base = super::solve_ap(c, f)?;
    alternatives_from(c, f, base, params.d, params.alt_threshold, params, |_| true)
}

pub(crate) fn alternatives_from(
    c: &CostMatrix,
    f: &Restriction,
    base: ApSolution,
    d: usize,
    threshold: f64,
    params: &AnalysisParams,
    keep: impl Fn(&Alternative) -> bool,
) -> Result<Alternatives> {
    let n = c.n() as f64;
    let outside_size_regime = f.forced_in().len() as f64 > n.powf(3.0 * params.epsilon / 8.0)
        || f.forced_out().len() as f64 > n.powf(3.0 * params.epsilon / 4.0);

    let mut items: Vec<Alternative> = Vec::new();
    {
        let table = InsertionTable::new(c, f, &base);
        for (delta, e) in table.ranked() {
            if items.len() >= d || delta > threshold + TIGHT_TOLERANCE {
                break;
            }
            let ins = table.insertion(e)?;
            let cost = c.permutation_cost(&ins.matching);
            if cost - base.value > threshold {
                continue;
            }
            let m = ins.matching;
            let compatible = items.iter().all(|alt| {
                alt.matching != m && alt.matching[e.0] != e.1 && m[alt.edge.0] != alt.edge.1
            });
            if !compatible {
                continue;
            }
            let alt = Alternative {
                edge: e,
                matching: m,
                cost,
            };
            if keep(&alt) {
                items.push(alt);
            }
        }
    }
    Ok(Alternatives {
        shortfall: items.len() < d,
        base,
        items,
        outside_size_regime,
    })
}

/// Spanning tree of the free bipartite graph built from matching edges and
/// tight edges. When tight edges leave it disconnected, the cheapest
/// connecting edges by reduced cost complete it and `completed_with_slack`
/// is set. `spanning` is false only if the admissible graph is itself
/// disconnected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTree {
    /// Edges `(row, column)` in original labels.
    pub edges: Vec<Edge>,
    pub completed_with_slack: bool,
    pub spanning: bool,
}

pub fn basis_tree(
    c: &CostMatrix,
    f: &Restriction,
    sol: &ApSolution,
    tolerance: f64,
) -> BasisTree {
    let m = sol.n_free;
    // Union-find over rows 0..m and columns m..2m.
    let mut parent: Vec<usize> = (0..2 * m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut col_pos = vec![usize::MAX; c.n()];
    for (b, &j) in sol.free_cols.iter().enumerate() {
        col_pos[j] = b;
    }
    let mut edges = Vec::with_capacity(2 * m);
    for (a, &i) in sol.free_rows.iter().enumerate() {
        let b = col_pos[sol.assignment[i]];
        let (x, y) = (find(&mut parent, a), find(&mut parent, m + b));
        parent[x] = y;
        edges.push((i, sol.assignment[i]));
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (a, &i) in sol.free_rows.iter().enumerate() {
        for (b, &j) in sol.free_cols.iter().enumerate() {
            if sol.assignment[i] != j && f.allows((i, j)) {
                let rc = c.cost(i, j) - sol.u[a] - sol.v[b];
                // Tight edges keep lexicographic order among themselves.
                let key = if rc <= tolerance { f64::NEG_INFINITY } else { rc };
                candidates.push((key, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut completed_with_slack = false;
    for (key, a, b) in candidates {
        if edges.len() + 1 >= 2 * m {
            break;
        }
        let (x, y) = (find(&mut parent, a), find(&mut parent, m + b));
        if x != y {
            parent[x] = y;
            edges.push((sol.free_rows[a], sol.free_cols[b]));
            if key.is_finite() {
                completed_with_slack = true;
            }
        }
    }
    let spanning = m == 0 || edges.len() + 1 == 2 * m;
    BasisTree {
        edges,
        completed_with_slack,
        spanning,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_ap, tests::example3};
    use super::*;

    #[test]
    fn insertion_cost_on_three_by_three() {
        let c = example3();
        let f = Restriction::empty(3);
        let s = solve_ap(&c, &f).unwrap();
        let ins = insertion_cost(&c, &f, &s, (0, 2)).unwrap();
        assert!((ins.delta - 1.5).abs() < 1e-12);
        assert_eq!(ins.matching, vec![2, 0, 1]);

        let same = insertion_cost(&c, &f, &s, (0, 1)).unwrap();
        assert_eq!(same.delta, 0.0);
        assert_eq!(same.matching, s.assignment);

        assert!(matches!(
            insertion_cost(&c, &f, &s, (1, 1)),
            Err(Error::InvalidEdge { .. })
        ));
        let out = Restriction::new(3, [], [(0, 2)]).unwrap();
        let s2 = solve_ap(&c, &out).unwrap();
        assert!(insertion_cost(&c, &out, &s2, (0, 2)).is_err());
    }

    #[test]
    fn constant_matrix_has_free_insertions() {
        let c = CostMatrix::constant(5, 0.3).unwrap();
        let f = Restriction::empty(5);
        let s = solve_ap(&c, &f).unwrap();
        let table = InsertionTable::new(&c, &f, &s);
        for (d, _) in table.ranked() {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_matrix_yields_d_alternatives() {
        let c = CostMatrix::constant(6, 0.25).unwrap();
        let f = Restriction::empty(6);
        let params = AnalysisParams::new(6, 0.2).unwrap().with_d(3);
        let alts = alternatives(&c, &f, &params).unwrap();
        assert_eq!(alts.items.len(), 3);
        assert!(!alts.shortfall);
        for a in &alts.items {
            assert!((a.cost - 1.5).abs() < 1e-12);
        }
        alts.verify(&c, &f, params.alt_threshold).unwrap();
    }

    #[test]
    fn three_by_three_has_no_cheap_alternative() {
        let c = example3();
        let f = Restriction::empty(3);
        let mut params = AnalysisParams::new(3, 0.2).unwrap().with_d(2);
        params.alt_threshold = 1.0;
        let alts = alternatives(&c, &f, &params).unwrap();
        assert!(alts.items.is_empty());
        assert!(alts.shortfall);
    }

    #[test]
    fn basis_tree_of_three_by_three() {
        let c = example3();
        let f = Restriction::empty(3);
        let s = solve_ap(&c, &f).unwrap();
        let t = basis_tree(&c, &f, &s, TIGHT_TOLERANCE);
        assert_eq!(t.edges.len(), 5);
        assert!(t.spanning);
        for i in 0..3 {
            assert!(t.edges.contains(&(i, s.assignment[i])));
        }
    }

    #[test]
    fn basis_tree_on_constant_matrix_is_all_tight() {
        let c = CostMatrix::constant(6, 0.5).unwrap();
        let f = Restriction::empty(6);
        let s = solve_ap(&c, &f).unwrap();
        let t = basis_tree(&c, &f, &s, TIGHT_TOLERANCE);
        assert_eq!(t.edges.len(), 11);
        assert!(!t.completed_with_slack);
    }
}
