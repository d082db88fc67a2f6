//! Branch and bound for the ATSP with the restricted assignment bound.
//!
//! Each node carries a [`Restriction`]; its bound is Z_AP(F). A node is
//! fathomed when its assignment is a tour, pruned when its bound reaches
//! the incumbent, and otherwise split by including or excluding edges.
//! Every AP(F) solve counts as one explored node.

mod witness;

use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use witness::{build_witness_tree, WitnessChecks, WitnessNode, WitnessTree, WITNESS_MAX_LEAVES};

use crate::assignment::{solve_ap, solve_ap_warm, ApSolution, Restriction};
use crate::error::{Error, Result};
use crate::exact::count_matchings_below;
use crate::instance::CostMatrix;
use crate::tour::{karp_patch, CycleCover, Tour};
use crate::Edge;

/// Largest n for which [`verify_counting_bound`] enumerates matchings.
pub const COUNTING_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Branch on the first free edge of a shortest subtour, in cycle order
    /// from its smallest vertex.
    ShortestSubcycle,
    /// Binary split on the subtour edge whose exclusion is most expensive
    /// by row and column reduced-cost penalties.
    MaxRegret,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SearchOrder {
    BestFirst,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum IncumbentInit {
    None,
    /// Patch the root assignment into a tour.
    Patch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnbOptions {
    pub branch_rule: BranchRule,
    pub search_order: SearchOrder,
    pub incumbent_init: IncumbentInit,
    /// Prune when bound >= incumbent (true) or only when bound > incumbent.
    pub prune_ties: bool,
    pub time_limit_ms: Option<u64>,
    pub node_limit: Option<usize>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            branch_rule: BranchRule::ShortestSubcycle,
            search_order: SearchOrder::BestFirst,
            incumbent_init: IncumbentInit::Patch,
            prune_ties: true,
            time_limit_ms: None,
            node_limit: None,
        }
    }
}

impl BnbOptions {
    /// All sixteen combinations of rule, order, incumbent and tie policy.
    pub fn all_combinations() -> Vec<Self> {
        let mut out = Vec::new();
        for branch_rule in [BranchRule::ShortestSubcycle, BranchRule::MaxRegret] {
            for search_order in [SearchOrder::BestFirst, SearchOrder::DepthFirst] {
                for incumbent_init in [IncumbentInit::None, IncumbentInit::Patch] {
                    for prune_ties in [true, false] {
                        out.push(Self {
                            branch_rule,
                            search_order,
                            incumbent_init,
                            prune_ties,
                            ..Self::default()
                        });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.time_limit_ms == Some(0) {
            return Err(Error::InvalidOptions("time limit must be positive".into()));
        }
        if self.node_limit == Some(0) {
            return Err(Error::InvalidOptions("node limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Open,
    Branched,
    Fathomed,
    Pruned,
    Infeasible,
}

/// One solved subproblem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Edge fixed relative to the parent: `(edge, true)` forced in,
    /// `(edge, false)` forced out.
    pub branch: Option<(Edge, bool)>,
    pub bound: Option<f64>,
    pub status: NodeStatus,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncumbentUpdate {
    pub cost: f64,
    pub node: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnbRun {
    pub tour: Tour,
    pub cost: f64,
    pub root_bound: f64,
    pub nodes_explored: usize,
    pub nodes_pruned_by_bound: usize,
    pub nodes_fathomed_as_tours: usize,
    pub nodes_infeasible: usize,
    pub nodes_branched: usize,
    pub max_depth: usize,
    pub incumbent_history: Vec<IncumbentUpdate>,
    /// False when a time or node limit stopped the search early; `tour` is
    /// then only the best found.
    pub complete: bool,
    pub options: BnbOptions,
    #[serde(skip)]
    pub tree: Vec<NodeRecord>,
}

struct Live {
    id: usize,
    restriction: Restriction,
    solution: ApSolution,
}

#[derive(PartialEq)]
struct Keyed(f64, usize);

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

enum Frontier {
    Best(BinaryHeap<Keyed>, Vec<Option<Live>>),
    Depth(Vec<Live>),
}

impl Frontier {
    fn push(&mut self, node: Live) {
        match self {
            Frontier::Best(heap, slots) => {
                let id = node.id;
                heap.push(Keyed(node.solution.value, id));
                if slots.len() <= id {
                    slots.resize_with(id + 1, || None);
                }
                slots[id] = Some(node);
            }
            Frontier::Depth(stack) => stack.push(node),
        }
    }

    fn pop(&mut self) -> Option<Live> {
        match self {
            Frontier::Best(heap, slots) => heap.pop().and_then(|Keyed(_, id)| slots[id].take()),
            Frontier::Depth(stack) => stack.pop(),
        }
    }
}

struct Search<'a> {
    c: &'a CostMatrix,
    options: &'a BnbOptions,
    tree: Vec<NodeRecord>,
    incumbent: Option<Tour>,
    history: Vec<IncumbentUpdate>,
    pruned: usize,
    fathomed: usize,
    infeasible: usize,
    branched: usize,
}

impl Search<'_> {
    fn prunes(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => false,
            Some(t) if self.options.prune_ties => bound >= t.cost,
            Some(t) => bound > t.cost,
        }
    }

    fn offer(&mut self, tour: Tour, node: usize) {
        if self.incumbent.as_ref().is_none_or(|t| tour.cost < t.cost) {
            self.history.push(IncumbentUpdate {
                cost: tour.cost,
                node,
            });
            self.incumbent = Some(tour);
        }
    }

    /// Records a freshly solved node and classifies it. Returns the node if
    /// it needs branching.
    fn admit(
        &mut self,
        parent: Option<usize>,
        branch: Option<(Edge, bool)>,
        restriction: Restriction,
        solved: Result<ApSolution>,
    ) -> Result<Option<Live>> {
        let id = self.tree.len();
        let depth = parent.map_or(0, |p| self.tree[p].depth + 1);
        if let Some(p) = parent {
            self.tree[p].children.push(id);
        }
        let mut record = NodeRecord {
            parent,
            depth,
            branch,
            bound: None,
            status: NodeStatus::Open,
            children: Vec::new(),
        };
        let solution = match solved {
            Ok(s) => s,
            Err(Error::Infeasible { .. }) => {
                record.status = NodeStatus::Infeasible;
                self.tree.push(record);
                self.infeasible += 1;
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        record.bound = Some(solution.value);
        self.tree.push(record);
        if self.prunes(solution.value) {
            self.tree[id].status = NodeStatus::Pruned;
            self.pruned += 1;
            return Ok(None);
        }
        if let Some(tour) = Tour::from_successor(self.c, &solution.assignment) {
            self.tree[id].status = NodeStatus::Fathomed;
            self.fathomed += 1;
            self.offer(tour, id);
            return Ok(None);
        }
        Ok(Some(Live {
            id,
            restriction,
            solution,
        }))
    }
}

/// The + child (if `e` can be forced in) followed by the − child.
fn binary(f: &Restriction, e: Edge) -> Result<Vec<(Restriction, (Edge, bool))>> {
    let mut out = Vec::with_capacity(2);
    if f.allows(e) {
        out.push((f.with_forced_in(e)?, (e, true)));
    }
    out.push((f.with_forced_out(e)?, (e, false)));
    Ok(out)
}

/// Children of a node as `(restriction, branch edges)`, in exploration order.
fn children(c: &CostMatrix, node: &Live, rule: BranchRule) -> Result<Vec<(Restriction, (Edge, bool))>> {
    let f = &node.restriction;
    let sol = &node.solution;
    let cover = CycleCover::of(&sol.assignment);
    match rule {
        BranchRule::ShortestSubcycle => {
            let cycle = cover
                .cycles
                .iter()
                .min_by(|a, b| a.len().cmp(&b.len()).then(a[0].cmp(&b[0])))
                .expect("a non-tour has cycles");
            // Repeated along the + children this walks the cycle edge by
            // edge; once all but one are forced in the last is inadmissible.
            let e = cycle
                .iter()
                .map(|&v| (v, sol.assignment[v]))
                .find(|e| !f.forced_in().contains(e))
                .expect("a subtour has a free edge");
            binary(f, e)
        }
        BranchRule::MaxRegret => {
            let n = c.n();
            let cycle_of = cover.cycle_index();
            let mut best: Option<(f64, Edge)> = None;
            for &i in &sol.free_rows {
                let j = sol.assignment[i];
                if cover.cycles[cycle_of[i]].len() == n {
                    continue;
                }
                let row_pen = sol
                    .free_cols
                    .iter()
                    .filter(|&&k| k != j && f.allows((i, k)))
                    .filter_map(|&k| sol.reduced_cost(c, i, k))
                    .fold(f64::INFINITY, f64::min);
                let col_pen = sol
                    .free_rows
                    .iter()
                    .filter(|&&k| k != i && f.allows((k, j)))
                    .filter_map(|&k| sol.reduced_cost(c, k, j))
                    .fold(f64::INFINITY, f64::min);
                let regret = row_pen + col_pen;
                if best.is_none_or(|(r, _)| regret > r) {
                    best = Some((regret, (i, j)));
                }
            }
            let (_, e) = best.expect("a non-tour has a free subtour edge");
            binary(f, e)
        }
    }
}

pub fn solve_bnb(c: &CostMatrix, options: &BnbOptions) -> Result<BnbRun> {
    options.validate()?;
    let started = Instant::now();
    let limit = options.time_limit_ms.map(Duration::from_millis);
    let mut search = Search {
        c,
        options,
        tree: Vec::new(),
        incumbent: None,
        history: Vec::new(),
        pruned: 0,
        fathomed: 0,
        infeasible: 0,
        branched: 0,
    };
    let root_f = Restriction::empty(c.n());
    let root_solution = solve_ap(c, &root_f)?;
    let root_bound = root_solution.value;
    let patched = (options.incumbent_init == IncumbentInit::Patch).then(|| karp_patch(c, &root_solution));
    let mut frontier = match options.search_order {
        SearchOrder::BestFirst => Frontier::Best(BinaryHeap::new(), Vec::new()),
        SearchOrder::DepthFirst => Frontier::Depth(Vec::new()),
    };
    // The patched tour is offered after the root is admitted so the root
    // itself is never pruned against it.
    let root = search.admit(None, None, root_f, Ok(root_solution))?;
    if let Some(tour) = patched {
        search.offer(tour, 0);
    }
    if let Some(live) = root {
        frontier.push(live);
    }

    let mut complete = true;
    while let Some(node) = frontier.pop() {
        let out_of_time = limit.is_some_and(|l| started.elapsed() >= l);
        let out_of_nodes = options.node_limit.is_some_and(|l| search.tree.len() >= l);
        if out_of_time || out_of_nodes {
            complete = false;
            break;
        }
        if search.prunes(node.solution.value) {
            search.tree[node.id].status = NodeStatus::Pruned;
            search.pruned += 1;
            continue;
        }
        search.tree[node.id].status = NodeStatus::Branched;
        search.branched += 1;
        let kids = children(c, &node, options.branch_rule)?;
        let mut live = Vec::with_capacity(kids.len());
        for (restriction, branch) in kids {
            let solved = solve_ap_warm(c, &restriction, &node.solution);
            if let Some(child) = search.admit(Some(node.id), Some(branch), restriction, solved)? {
                live.push(child);
            }
        }
        // Depth-first explores the first child next.
        if options.search_order == SearchOrder::DepthFirst {
            live.reverse();
        }
        for child in live {
            frontier.push(child);
        }
    }

    let tour = search
        .incumbent
        .clone()
        .ok_or_else(|| Error::InvalidInput("search stopped before finding any tour".into()))?;
    Ok(BnbRun {
        cost: tour.cost,
        tour,
        root_bound,
        nodes_explored: search.tree.len(),
        nodes_pruned_by_bound: search.pruned,
        nodes_fathomed_as_tours: search.fathomed,
        nodes_infeasible: search.infeasible,
        nodes_branched: search.branched,
        max_depth: search.tree.iter().map(|r| r.depth).max().unwrap_or(0),
        incumbent_history: search.history,
        complete,
        options: options.clone(),
        tree: search.tree,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub nodes_explored: usize,
    /// Matchings costing strictly less than Z_ATSP.
    pub matchings_below: usize,
    pub z_ap: f64,
    pub z_atsp: f64,
    pub gap: f64,
    pub holds: bool,
}

/// Compares the explored node count with the number of matchings cheaper
/// than the optimal tour; each such matching keeps some node from being
/// pruned or fathomed.
pub fn verify_counting_bound(run: &BnbRun, c: &CostMatrix) -> Result<CountingReport> {
    let n = c.n();
    if n > COUNTING_MAX_N {
        return Err(Error::SizeGuard {
            what: "counting bound verification",
            n,
            limit: COUNTING_MAX_N,
        });
    }
    if !run.complete {
        return Err(Error::InvalidInput("run did not finish".into()));
    }
    let matchings_below = count_matchings_below(c, run.cost)?;
    Ok(CountingReport {
        nodes_explored: run.nodes_explored,
        matchings_below,
        z_ap: run.root_bound,
        z_atsp: run.cost,
        gap: run.cost - run.root_bound,
        holds: run.nodes_explored >= matchings_below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::held_karp;
    use crate::tour::validate_tour;

    #[test]
    fn matches_held_karp_on_small_instances() {
        for seed in 0..20 {
            let c = CostMatrix::generate_uniform(9, seed).unwrap();
            let (opt, _) = held_karp(&c).unwrap();
            for options in BnbOptions::all_combinations() {
                let run = solve_bnb(&c, &options).unwrap();
                assert!((run.cost - opt).abs() < 1e-9, "seed {seed} {options:?}");
                assert!(validate_tour(&run.tour, 9));
                assert!(run.complete);
            }
        }
    }

    #[test]
    fn constant_matrix() {
        let c = CostMatrix::constant(6, 0.5).unwrap();
        let run = solve_bnb(&c, &BnbOptions::default()).unwrap();
        assert!((run.cost - 3.0).abs() < 1e-12);
        assert!(run.nodes_explored >= 1);
    }

    #[test]
    fn tree_invariants() {
        for seed in 0..10 {
            let c = CostMatrix::generate_uniform(10, seed).unwrap();
            for options in BnbOptions::all_combinations() {
                let run = solve_bnb(&c, &options).unwrap();
                assert_eq!(run.tree.len(), run.nodes_explored);
                for (id, node) in run.tree.iter().enumerate() {
                    if let (Some(p), Some(b)) = (node.parent, node.bound) {
                        let pb = run.tree[p].bound.unwrap();
                        assert!(b >= pb - 1e-9, "bound drops at node {id}");
                    }
                    if node.status != NodeStatus::Branched {
                        assert!(node.children.is_empty());
                    }
                }
                let counted = run.nodes_pruned_by_bound
                    + run.nodes_fathomed_as_tours
                    + run.nodes_infeasible
                    + run.nodes_branched;
                assert_eq!(counted, run.nodes_explored);
            }
        }
    }

    #[test]
    fn limits_stop_the_search() {
        let c = CostMatrix::generate_uniform(14, 3).unwrap();
        let options = BnbOptions {
            node_limit: Some(2),
            ..BnbOptions::default()
        };
        let run = solve_bnb(&c, &options).unwrap();
        if run.nodes_explored > 2 {
            assert!(!run.complete);
        }
        assert!(solve_bnb(&c, &BnbOptions { node_limit: Some(0), ..BnbOptions::default() }).is_err());
    }
}
