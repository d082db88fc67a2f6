use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Edge;

/// Branching constraints on the assignment relaxation: edges forced in,
/// edges forced out, and the edges made inadmissible by the forced-in set.
///
/// `forced_in` and `forced_out` are disjoint, and `forced_in` is disjoint
/// from `inadmissible`. An edge may sit in both `forced_out` and
/// `inadmissible` when it was excluded by branching before later forced-in
/// edges made it inadmissible as well.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    n: usize,
    forced_in: BTreeSet<Edge>,
    forced_out: BTreeSet<Edge>,
    inadmissible: BTreeSet<Edge>,
    /// `succ[i]` is the forced-in head out of `i`.
    #[serde(skip)]
    succ: Vec<Option<usize>>,
    #[serde(skip)]
    pred: Vec<Option<usize>>,
}

impl Restriction {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            forced_in: BTreeSet::new(),
            forced_out: BTreeSet::new(),
            inadmissible: BTreeSet::new(),
            succ: vec![None; n],
            pred: vec![None; n],
        }
    }

    pub fn new(
        n: usize,
        forced_in: impl IntoIterator<Item = Edge>,
        forced_out: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let forced_in: BTreeSet<Edge> = forced_in.into_iter().collect();
        let forced_out: BTreeSet<Edge> = forced_out.into_iter().collect();
        for &(i, j) in forced_in.iter().chain(&forced_out) {
            if i >= n || j >= n {
                return Err(Error::InconsistentRestriction(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InconsistentRestriction(format!(
                    "loop ({i}, {i}) cannot be constrained"
                )));
            }
        }
        if let Some(e) = forced_in.intersection(&forced_out).next() {
            return Err(Error::InconsistentRestriction(format!(
                "edge {e:?} is both forced in and forced out"
            )));
        }
        let (succ, pred) = path_links(&forced_in, n)?;
        let inadmissible = inadmissible_from_links(&succ, &pred, n);
        Ok(Self {
            n,
            forced_in,
            forced_out,
            inadmissible,
            succ,
            pred,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forced_in(&self) -> &BTreeSet<Edge> {
        &self.forced_in
    }

    pub fn forced_out(&self) -> &BTreeSet<Edge> {
        &self.forced_out
    }

    pub fn inadmissible(&self) -> &BTreeSet<Edge> {
        &self.inadmissible
    }

    pub fn is_empty(&self) -> bool {
        self.forced_in.is_empty() && self.forced_out.is_empty()
    }

    /// Forced-in head leaving `i`, if any.
    pub fn forced_successor(&self, i: usize) -> Option<usize> {
        self.succ[i]
    }

    /// Forced-in tail entering `j`, if any.
    pub fn forced_predecessor(&self, j: usize) -> Option<usize> {
        self.pred[j]
    }

    /// True when `(i, j)` may appear in a matching feasible for this
    /// restriction: not a loop, not forced out, not inadmissible.
    pub fn allows(&self, (i, j): Edge) -> bool {
        i != j && !self.forced_out.contains(&(i, j)) && !self.inadmissible.contains(&(i, j))
    }

    /// True when `(i, j)` is available to the free part of the problem:
    /// allowed and not itself forced in.
    pub fn is_free_edge(&self, e: Edge) -> bool {
        self.succ[e.0].is_none() && self.pred[e.1].is_none() && self.allows(e)
    }

    /// Whether `perm` (successor map) is a feasible matching for AP(F).
    pub fn admits(&self, perm: &[usize]) -> bool {
        self.forced_in.iter().all(|&(i, j)| perm[i] == j)
            && perm.iter().enumerate().all(|(i, &j)| self.allows((i, j)))
    }

    pub fn with_forced_in(&self, e: Edge) -> Result<Self> {
        if !self.allows(e) || self.forced_in.contains(&e) {
            return Err(Error::InvalidEdge {
                edge: e,
                reason: "edge is not admissible for forcing in",
            });
        }
        let mut forced_in = self.forced_in.clone();
        forced_in.insert(e);
        Self::new(self.n, forced_in, self.forced_out.iter().copied())
    }

    pub fn with_forced_out(&self, e: Edge) -> Result<Self> {
        if self.forced_in.contains(&e) {
            return Err(Error::InvalidEdge {
                edge: e,
                reason: "edge is forced in",
            });
        }
        let mut next = self.clone();
        next.forced_out.insert(e);
        Ok(next)
    }

    /// Adds several forced-in and forced-out edges at once.
    pub fn extended(
        &self,
        forced_in: impl IntoIterator<Item = Edge>,
        forced_out: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let mut fin = self.forced_in.clone();
        let mut fout = self.forced_out.clone();
        for e in forced_in {
            if !self.allows(e) {
                return Err(Error::InvalidEdge {
                    edge: e,
                    reason: "edge is not admissible for forcing in",
                });
            }
            fin.insert(e);
        }
        fout.extend(forced_out);
        Self::new(self.n, fin, fout)
    }

    /// Restores the derived path links after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        Self::new(self.n, self.forced_in, self.forced_out)
    }
}

/// Edges made inadmissible by a forced-in set on `n` vertices: edges sharing
/// a tail with a forced edge but with another head, edges sharing a head but
/// with another tail, and edges closing a forced path into a cycle shorter
/// than `n`.
pub fn derive_inadmissible(forced_in: &BTreeSet<Edge>, n: usize) -> Result<BTreeSet<Edge>> {
    for &(i, j) in forced_in {
        if i >= n || j >= n || i == j {
            return Err(Error::InconsistentRestriction(format!(
                "edge ({i}, {j}) is not an edge of the complete digraph on {n} vertices"
            )));
        }
    }
    let (succ, pred) = path_links(forced_in, n)?;
    Ok(inadmissible_from_links(&succ, &pred, n))
}

type Links = (Vec<Option<usize>>, Vec<Option<usize>>);

fn path_links(forced_in: &BTreeSet<Edge>, n: usize) -> Result<Links> {
    let mut succ = vec![None; n];
    let mut pred = vec![None; n];
    for &(i, j) in forced_in {
        if succ[i].replace(j).is_some() {
            return Err(Error::InconsistentRestriction(format!(
                "vertex {i} has two forced-in out-edges"
            )));
        }
        if pred[j].replace(i).is_some() {
            return Err(Error::InconsistentRestriction(format!(
                "vertex {j} has two forced-in in-edges"
            )));
        }
    }
    // Every forced cycle must be Hamiltonian.
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || succ[start].is_none() {
            continue;
        }
        let mut len = 0;
        let mut v = start;
        let mut closed = false;
        while let Some(w) = succ[v] {
            seen[v] = true;
            len += 1;
            v = w;
            if v == start {
                closed = true;
                break;
            }
            if seen[v] {
                break;
            }
        }
        if closed && len < n {
            return Err(Error::InconsistentRestriction(format!(
                "forced-in edges contain a cycle of length {len} < {n}"
            )));
        }
    }
    Ok((succ, pred))
}

fn inadmissible_from_links(
    succ: &[Option<usize>],
    pred: &[Option<usize>],
    n: usize,
) -> BTreeSet<Edge> {
    let mut out = BTreeSet::new();
    for i in 0..n {
        if let Some(h) = succ[i] {
            out.extend((0..n).filter(|&j| j != i && j != h).map(|j| (i, j)));
        }
    }
    for j in 0..n {
        if let Some(t) = pred[j] {
            out.extend((0..n).filter(|&i| i != j && i != t).map(|i| (i, j)));
        }
    }
    // Closing edges: from the end of each maximal forced path back to its start.
    for start in 0..n {
        if pred[start].is_some() || succ[start].is_none() {
            continue;
        }
        let mut end = start;
        let mut edges = 0;
        while let Some(w) = succ[end] {
            end = w;
            edges += 1;
        }
        if edges + 1 < n {
            out.insert((end, start));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(edges: &[Edge]) -> BTreeSet<Edge> {
        edges.iter().copied().collect()
    }

    /// Direct reading of the definition: for every candidate edge, check the
    /// degree conflicts and simulate adding it to look for a short cycle.
    fn inadmissible_by_definition(forced_in: &BTreeSet<Edge>, n: usize) -> BTreeSet<Edge> {
        let mut out = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || forced_in.contains(&(i, j)) {
                    continue;
                }
                let tail_clash = forced_in.iter().any(|&(a, b)| a == i && b != j);
                let head_clash = forced_in.iter().any(|&(a, b)| b == j && a != i);
                let mut closes_short = false;
                if !tail_clash && !head_clash {
                    let mut v = j;
                    let mut len = 1;
                    while let Some(&(_, w)) = forced_in.iter().find(|&&(a, _)| a == v) {
                        v = w;
                        len += 1;
                    }
                    closes_short = v == i && len < n;
                }
                if tail_clash || head_clash || closes_short {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn empty_forced_set_has_no_inadmissible_edges() {
        assert!(derive_inadmissible(&BTreeSet::new(), 5).unwrap().is_empty());
    }

    #[test]
    fn two_edge_path_on_four_vertices() {
        // 1->2->3 in one-based labels.
        let f1 = set(&[(0, 1), (1, 2)]);
        let got = derive_inadmissible(&f1, 4).unwrap();
        let mut expected = BTreeSet::new();
        expected.extend([2, 3].map(|j| (0, j)));
        expected.extend([0, 3].map(|j| (1, j)));
        expected.extend([2, 3].map(|i| (i, 1)));
        expected.extend([0, 3].map(|i| (i, 2)));
        expected.insert((2, 0));
        assert_eq!(got, expected);
        assert_eq!(got, inadmissible_by_definition(&f1, 4));
    }

    #[test]
    fn hamilton_path_leaves_only_the_closing_edge() {
        let f1 = set(&[(0, 1), (1, 2), (2, 3)]);
        let r = Restriction::new(4, f1.iter().copied(), []).unwrap();
        let open: Vec<Edge> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && !f1.contains(&(i, j)) && r.allows((i, j)))
            .collect();
        assert_eq!(open, vec![(3, 0)]);
    }

    #[test]
    fn matches_definition_on_all_small_forced_sets() {
        let n = 5;
        let edges: Vec<Edge> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .collect();
        for a in 0..edges.len() {
            for b in a..edges.len() {
                for c in b..edges.len() {
                    let f1 = set(&[edges[a], edges[b], edges[c]]);
                    if let Ok(got) = derive_inadmissible(&f1, n) {
                        assert_eq!(got, inadmissible_by_definition(&f1, n), "F1 = {f1:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_inconsistent_forced_sets() {
        assert!(Restriction::new(4, [(0, 1), (0, 2)], []).is_err());
        assert!(Restriction::new(4, [(0, 1), (2, 1)], []).is_err());
        assert!(Restriction::new(4, [(0, 1), (1, 0)], []).is_err());
        assert!(Restriction::new(4, [(0, 1)], [(0, 1)]).is_err());
        assert!(Restriction::new(4, [(1, 1)], []).is_err());
        // A Hamilton cycle is a legal forced set.
        assert!(Restriction::new(3, [(0, 1), (1, 2), (2, 0)], []).is_ok());
    }
}
