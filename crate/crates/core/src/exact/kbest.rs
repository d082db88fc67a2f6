//! Ranked enumeration of feasible matchings by Murty partitioning.
//!
//! After a matching is emitted, the free edges `e_1, ..., e_k` it uses (in
//! row order) split its subproblem into children: child `t` keeps
//! `e_1, ..., e_{t-1}` and forbids `e_t`. The partition forcing is local to
//! the enumeration and does not make any edge inadmissible.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::assignment::{solve_constrained, ApSolution, Restriction};
use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::Edge;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedMatching {
    pub cost: f64,
    pub matching: Vec<usize>,
}

struct Subproblem {
    cost: f64,
    forced: Vec<Option<usize>>,
    excluded: BTreeSet<Edge>,
    solution: ApSolution,
}

impl PartialEq for Subproblem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Subproblem {}

impl PartialOrd for Subproblem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subproblem {
    // Reversed: the heap pops the cheapest, then the lexicographically
    // smallest matching.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.solution.assignment.cmp(&self.solution.assignment))
    }
}

/// Feasible matchings of AP(F) in nondecreasing cost order, stopping after
/// `count_limit` items or at the first matching costing more than
/// `cost_limit`.
pub struct KBestStream<'a> {
    c: &'a CostMatrix,
    base: &'a Restriction,
    frontier: BinaryHeap<Subproblem>,
    cost_limit: f64,
    count_limit: usize,
    emitted: usize,
    error: Option<Error>,
    done: bool,
}

pub fn kbest_matchings<'a>(
    c: &'a CostMatrix,
    f: &'a Restriction,
    cost_limit: f64,
    count_limit: usize,
) -> KBestStream<'a> {
    let forced: Vec<Option<usize>> = (0..c.n()).map(|i| f.forced_successor(i)).collect();
    let mut stream = KBestStream {
        c,
        base: f,
        frontier: BinaryHeap::new(),
        cost_limit,
        count_limit,
        emitted: 0,
        error: None,
        done: false,
    };
    stream.push(forced, BTreeSet::new(), None);
    stream
}

impl KBestStream<'_> {
    fn push(&mut self, forced: Vec<Option<usize>>, excluded: BTreeSet<Edge>, warm: Option<&ApSolution>) {
        let base = self.base;
        match solve_constrained(self.c, &forced, |e| base.allows(e) && !excluded.contains(&e), warm) {
            Ok(solution) => self.frontier.push(Subproblem {
                cost: solution.value,
                forced,
                excluded,
                solution,
            }),
            Err(Error::Infeasible { .. }) => {}
            Err(e) => self.error = Some(e),
        }
    }

    /// Number of matchings emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }
}

impl Iterator for KBestStream<'_> {
    type Item = Result<RankedMatching>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.error.take() {
            self.done = true;
            return Some(Err(e));
        }
        if self.done || self.emitted >= self.count_limit {
            return None;
        }
        let Some(top) = self.frontier.pop() else {
            self.done = true;
            return None;
        };
        if top.cost > self.cost_limit {
            self.done = true;
            return None;
        }
        self.emitted += 1;
        let free: Vec<Edge> = (0..self.c.n())
            .filter(|&i| top.forced[i].is_none())
            .map(|i| (i, top.solution.assignment[i]))
            .collect();
        // The last child would force every other row and forbid the only
        // column left, so it is always empty.
        let mut forced = top.forced.clone();
        for t in 0..free.len().saturating_sub(1) {
            let mut excluded = top.excluded.clone();
            excluded.insert(free[t]);
            self.push(forced.clone(), excluded, Some(&top.solution));
            forced[free[t].0] = Some(free[t].1);
        }
        Some(Ok(RankedMatching {
            cost: top.cost,
            matching: top.solution.assignment,
        }))
    }
}

/// Number of feasible matchings (no restriction) costing strictly less
/// than `threshold`.
pub fn count_matchings_below(c: &CostMatrix, threshold: f64) -> Result<usize> {
    count_restricted_below(c, &Restriction::empty(c.n()), threshold)
}

pub fn count_restricted_below(c: &CostMatrix, f: &Restriction, threshold: f64) -> Result<usize> {
    if !threshold.is_finite() {
        return Err(Error::InvalidInput("threshold must be finite".into()));
    }
    let mut count = 0;
    for item in kbest_matchings(c, f, threshold, usize::MAX) {
        let item = item?;
        if item.cost >= threshold {
            break;
        }
        count += 1;
    }
    Ok(count)
}
