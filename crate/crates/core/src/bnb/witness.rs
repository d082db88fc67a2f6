//! Trees of near-optimal matchings that no branch and bound can skip.
//!
//! Each node holds a restriction and a matching feasible for it. An
//! internal node asks for `d` alternatives `M_1..M_d` with distinguishing
//! edges `e_1..e_d`; child `i` forces `e_i` in and every other `e_j` out, so
//! the subtrees partition the matchings and the leaves are pairwise distinct.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::assignment::{alternatives_from, solve_ap, AnalysisParams, Restriction, TIGHT_TOLERANCE};
use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::Edge;

/// Largest number of leaves `d^depth` a witness tree may ask for.
pub const WITNESS_MAX_LEAVES: usize = 1 << 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Edge forced in relative to the parent.
    pub edge: Option<Edge>,
    pub restriction: Restriction,
    pub matching: Vec<usize>,
    pub cost: f64,
    pub children: Vec<usize>,
    /// Fewer than `d` alternatives were available here.
    pub shortfall: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessChecks {
    /// Every node's matching satisfies its restriction.
    pub feasible: bool,
    /// Leaf matchings are pairwise distinct.
    pub distinct: bool,
    /// Children add exactly one forced-in edge and `d - 1` forced-out edges,
    /// and a complete tree has `d^depth` leaves.
    pub bookkeeping: bool,
    /// Every leaf costs at most Z_AP + d * alt_threshold.
    pub cost_window: bool,
}

impl WitnessChecks {
    pub fn all(&self) -> bool {
        self.feasible && self.distinct && self.bookkeeping && self.cost_window
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessTree {
    pub d: usize,
    pub depth_limit: usize,
    pub alt_threshold: f64,
    pub root_value: f64,
    pub nodes: Vec<WitnessNode>,
    /// No node ran short of alternatives.
    pub complete: bool,
    pub checks: WitnessChecks,
}

impl WitnessTree {
    pub fn leaves(&self) -> impl Iterator<Item = &WitnessNode> {
        self.nodes.iter().filter(|v| v.children.is_empty())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn max_leaf_cost(&self) -> f64 {
        self.leaves().map(|v| v.cost).fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self) -> WitnessChecks {
        let feasible = self.nodes.iter().all(|v| v.restriction.admits(&v.matching));
        let mut seen = HashSet::new();
        let distinct = self.leaves().all(|v| seen.insert(v.matching.clone()));
        let mut bookkeeping = self.nodes.iter().all(|v| {
            let Some(p) = v.parent else { return true };
            let pf = &self.nodes[p].restriction;
            let e = v.edge.expect("children carry an edge");
            let siblings = self.nodes[p].children.len();
            v.restriction.forced_in().len() == pf.forced_in().len() + 1
                && v.restriction.forced_in().contains(&e)
                && v.restriction.forced_out().len() == pf.forced_out().len() + siblings - 1
        });
        if self.complete {
            bookkeeping &= self.leaf_count() == self.d.pow(self.depth_limit as u32);
        }
        let limit = self.root_value + self.d as f64 * self.alt_threshold + TIGHT_TOLERANCE;
        let cost_window = self
            .leaves()
            .all(|v| v.cost >= self.root_value - TIGHT_TOLERANCE && v.cost <= limit);
        WitnessChecks {
            feasible,
            distinct,
            bookkeeping,
            cost_window,
        }
    }
}

pub fn build_witness_tree(c: &CostMatrix, params: &AnalysisParams, depth_limit: usize) -> Result<WitnessTree> {
    let n = c.n();
    if params.n != n {
        return Err(Error::InvalidInput(format!(
            "parameters are for n = {}, matrix has n = {n}",
            params.n
        )));
    }
    if params.d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    if depth_limit > params.d {
        return Err(Error::InvalidInput(format!(
            "depth {depth_limit} exceeds d = {}",
            params.d
        )));
    }
    let leaves = (params.d as u128).checked_pow(depth_limit as u32).unwrap_or(u128::MAX);
    if leaves > WITNESS_MAX_LEAVES as u128 {
        return Err(Error::SizeGuard {
            what: "witness tree leaves",
            n,
            limit: WITNESS_MAX_LEAVES,
        });
    }
    let root_f = Restriction::empty(n);
    let root = solve_ap(c, &root_f)?;
    let mut nodes = vec![WitnessNode {
        parent: None,
        depth: 0,
        edge: None,
        restriction: root_f,
        cost: root.value,
        matching: root.assignment.clone(),
        children: Vec::new(),
        shortfall: false,
    }];
    let mut complete = true;
    let mut next = 0;
    while next < nodes.len() {
        let id = next;
        next += 1;
        if nodes[id].depth >= depth_limit {
            continue;
        }
        // An alternative is usable only if it stays feasible once its edge
        // is forced in: the new forced path can turn one of its other edges
        // into a short-cycle closure.
        let f = &nodes[id].restriction;
        let solved = solve_ap(c, f).and_then(|base| {
            alternatives_from(c, f, base, params.d, params.alt_threshold, params, |alt| {
                f.with_forced_in(alt.edge).is_ok_and(|g| g.admits(&alt.matching))
            })
        });
        let alts = match solved {
            Ok(a) => a,
            Err(Error::Infeasible { .. }) => {
                nodes[id].shortfall = true;
                complete = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        if alts.shortfall {
            nodes[id].shortfall = true;
            complete = false;
            continue;
        }
        let edges: Vec<Edge> = alts.items.iter().map(|a| a.edge).collect();
        for (i, alt) in alts.items.into_iter().enumerate() {
            let others = edges.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &e)| e);
            let restriction = nodes[id].restriction.extended([alt.edge], others)?;
            let child = nodes.len();
            nodes[id].children.push(child);
            nodes.push(WitnessNode {
                parent: Some(id),
                depth: nodes[id].depth + 1,
                edge: Some(alt.edge),
                restriction,
                matching: alt.matching,
                cost: alt.cost,
                children: Vec::new(),
                shortfall: false,
            });
        }
    }
    let mut tree = WitnessTree {
        d: params.d,
        depth_limit,
        alt_threshold: params.alt_threshold,
        root_value: root.value,
        nodes,
        complete,
        checks: WitnessChecks {
            feasible: false,
            distinct: false,
            bookkeeping: false,
            cost_window: false,
        },
    };
    tree.checks = tree.check();
    Ok(tree)
}
