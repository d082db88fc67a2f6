//! Structural diagnostics of an AP(F) optimum: the alternating digraph on
//! short edges, its A:B diameters, dual and matching-edge magnitudes, and
//! out-degrees of the contracted basis tree.
//!
//! Vertices `0..n` are the rows (A), `n..2n` the columns (B). Backward
//! edges run from each column to its matched row; forward edges run from a
//! row to a column when the pair is among the `zeta` cheapest admissible
//! edges out of the row or into the column.

use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{ApSolution, BasisTree, Restriction};
use crate::error::{Error, Result};
use crate::instance::CostMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborDigraph {
    pub n: usize,
    pub zeta: usize,
    /// Forward heads of each row with their costs, ascending by column.
    pub forward: Vec<Vec<(usize, f64)>>,
    /// Row matched to each column.
    pub backward: Vec<usize>,
    /// Cost of the matching edge at each row.
    pub matching_cost: Vec<f64>,
}

pub fn build_neighbor_digraph(
    c: &CostMatrix,
    f: &Restriction,
    sol: &ApSolution,
    zeta: usize,
) -> Result<NeighborDigraph> {
    if zeta == 0 {
        return Err(Error::InvalidInput("zeta must be at least 1".into()));
    }
    let n = c.n();
    let mut chosen = vec![vec![false; n]; n];
    let by_cost = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    for x in 0..n {
        let mut row: Vec<(f64, usize)> = (0..n)
            .filter(|&y| f.allows((x, y)))
            .map(|y| (c.cost(x, y), y))
            .collect();
        row.sort_by(by_cost);
        for &(_, y) in row.iter().take(zeta) {
            chosen[x][y] = true;
        }
    }
    for y in 0..n {
        let mut col: Vec<(f64, usize)> = (0..n)
            .filter(|&x| f.allows((x, y)))
            .map(|x| (c.cost(x, y), x))
            .collect();
        col.sort_by(by_cost);
        for &(_, x) in col.iter().take(zeta) {
            chosen[x][y] = true;
        }
    }
    let forward = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| chosen[x][y] && !f.forced_in().contains(&(x, y)))
                .map(|y| (y, c.cost(x, y)))
                .collect()
        })
        .collect();
    Ok(NeighborDigraph {
        n,
        zeta,
        forward,
        backward: sol.inverse(),
        matching_cost: (0..n).map(|i| c.cost(i, sol.assignment[i])).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackwardWeight {
    /// Matching edges leave the matching, so they add nothing.
    Zero,
    /// Charge each backward edge its matching cost.
    MatchingCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiameterMode {
    Unweighted,
    Weighted(BackwardWeight),
}

impl NeighborDigraph {
    pub fn forward_edge_count(&self) -> usize {
        self.forward.iter().map(Vec::len).sum()
    }

    /// Shortest distances from row `source` to every column.
    pub fn distances_from(&self, source: usize, mode: DiameterMode) -> Vec<f64> {
        match mode {
            DiameterMode::Unweighted => self.bfs(source),
            DiameterMode::Weighted(w) => self.dijkstra(source, w),
        }
    }

    fn bfs(&self, source: usize) -> Vec<f64> {
        let n = self.n;
        let mut row_dist = vec![usize::MAX; n];
        let mut col_dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        row_dist[source] = 0;
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.forward[x] {
                if col_dist[y] == usize::MAX {
                    col_dist[y] = row_dist[x] + 1;
                    let back = self.backward[y];
                    if row_dist[back] == usize::MAX {
                        row_dist[back] = col_dist[y] + 1;
                        queue.push_back(back);
                    }
                }
            }
        }
        col_dist
            .into_iter()
            .map(|d| if d == usize::MAX { f64::INFINITY } else { d as f64 })
            .collect()
    }

    fn dijkstra(&self, source: usize, weight: BackwardWeight) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
            }
        }
        let n = self.n;
        let mut row_dist = vec![f64::INFINITY; n];
        let mut col_dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        row_dist[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(d, x)) = heap.pop() {
            if d > row_dist[x] {
                continue;
            }
            for &(y, cost) in &self.forward[x] {
                let dy = d + cost;
                if dy < col_dist[y] {
                    col_dist[y] = dy;
                    let back = self.backward[y];
                    let step = match weight {
                        BackwardWeight::Zero => 0.0,
                        BackwardWeight::MatchingCost => self.matching_cost[back],
                    };
                    if dy + step < row_dist[back] {
                        row_dist[back] = dy + step;
                        heap.push(Item(dy + step, back));
                    }
                }
            }
        }
        col_dist
    }
}

/// Maximum over rows `a` and columns `b != a` of the shortest `a -> b`
/// path; infinite if some such column is unreachable. The pair `(a, a)` has
/// no edge in the underlying bipartite graph and is left out.
pub fn ab_diameter(g: &NeighborDigraph, mode: DiameterMode) -> f64 {
    (0..g.n)
        .into_par_iter()
        .map(|a| {
            g.distances_from(a, mode)
                .into_iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .fold(0.0_f64, |m, (_, d)| m.max(d))
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest `|u_i|`, `|v_j|` over the free duals.
pub fn max_dual_magnitude(sol: &ApSolution) -> f64 {
    sol.u.iter().chain(&sol.v).fold(0.0, |m, x| m.max(x.abs()))
}

/// Most expensive matching edge that is not forced in.
pub fn max_matching_edge_cost(sol: &ApSolution, c: &CostMatrix) -> f64 {
    sol.free_rows
        .iter()
        .map(|&i| c.cost(i, sol.assignment[i]))
        .fold(0.0, f64::max)
}

/// The basis tree with its matching edges contracted: each non-matching
/// tree edge `(i1, pi(i2))` becomes `i1 -> i2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractedTree {
    /// Contracted vertices (the free rows), ascending.
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// Out-degree of each vertex, parallel to `vertices`.
    pub out_degree: Vec<usize>,
    /// Vertices of total degree one.
    pub leaves: usize,
}

impl ContractedTree {
    pub fn leaf_fraction(&self) -> f64 {
        if self.vertices.is_empty() {
            0.0
        } else {
            self.leaves as f64 / self.vertices.len() as f64
        }
    }
}

pub fn contract_and_degrees(tree: &BasisTree, sol: &ApSolution) -> Result<ContractedTree> {
    let n = sol.n();
    let inverse = sol.inverse();
    let mut has_matching_edge = vec![false; n];
    let mut edges = Vec::new();
    for &(i, j) in &tree.edges {
        if sol.assignment[i] == j {
            has_matching_edge[i] = true;
        } else {
            edges.push((i, inverse[j]));
        }
    }
    if let Some(&i) = sol.free_rows.iter().find(|&&i| !has_matching_edge[i]) {
        return Err(Error::InvalidInput(format!(
            "basis tree is missing matching edge ({i}, {})",
            sol.assignment[i]
        )));
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in sol.free_rows.iter().enumerate() {
        pos[i] = k;
    }
    let m = sol.free_rows.len();
    let mut out_degree = vec![0; m];
    let mut degree = vec![0; m];
    for &(a, b) in &edges {
        if pos[a] == usize::MAX || pos[b] == usize::MAX {
            return Err(Error::InvalidInput(format!("tree edge {a} -> {b} leaves the free part")));
        }
        out_degree[pos[a]] += 1;
        degree[pos[a]] += 1;
        degree[pos[b]] += 1;
    }
    Ok(ContractedTree {
        vertices: sol.free_rows.clone(),
        leaves: degree.iter().filter(|&&d| d == 1).count(),
        edges,
        out_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{basis_tree, solve_ap, TIGHT_TOLERANCE};

    fn example3() -> CostMatrix {
        CostMatrix::from_rows(&[
            vec![0.0, 0.2, 0.7],
            vec![0.5, 0.0, 0.1],
            vec![0.3, 0.9, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn saturated_digraph_has_diameter_one() {
        let c = CostMatrix::generate_uniform(12, 4).unwrap();
        let f = Restriction::empty(12);
        let s = solve_ap(&c, &f).unwrap();
        let g = build_neighbor_digraph(&c, &f, &s, 11).unwrap();
        assert_eq!(g.forward_edge_count(), 12 * 11);
        assert_eq!(ab_diameter(&g, DiameterMode::Unweighted), 1.0);
    }

    #[test]
    fn single_neighbour_rows_pick_row_minima() {
        let c = example3();
        let f = Restriction::empty(3);
        let s = solve_ap(&c, &f).unwrap();
        let g = build_neighbor_digraph(&c, &f, &s, 1).unwrap();
        // Row minima: 1->2 (0.2), 2->3 (0.1), 3->1 (0.3); column minima add
        // nothing new (col 1: row 3, col 2: row 1, col 3: row 2).
        let heads: Vec<Vec<usize>> = g.forward.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
        assert_eq!(heads, vec![vec![1], vec![2], vec![0]]);
    }

    #[test]
    fn forced_out_edges_never_appear() {
        let c = CostMatrix::generate_uniform(10, 2).unwrap();
        let f = Restriction::new(10, [(0, 5)], [(1, 2), (3, 4), (2, 7)]).unwrap();
        let s = solve_ap(&c, &f).unwrap();
        let g = build_neighbor_digraph(&c, &f, &s, 9).unwrap();
        for (x, row) in g.forward.iter().enumerate() {
            for &(y, _) in row {
                assert!(f.allows((x, y)));
                assert!(!f.forced_in().contains(&(x, y)));
            }
        }
    }

    #[test]
    fn constant_matrix_magnitudes() {
        let c = CostMatrix::constant(7, 0.3).unwrap();
        let f = Restriction::empty(7);
        let s = solve_ap(&c, &f).unwrap();
        assert!((max_dual_magnitude(&s) - 0.3).abs() < 1e-12);
        assert_eq!(max_matching_edge_cost(&s, &c), 0.3);
    }

    #[test]
    fn forced_edges_do_not_count_as_matching_edges() {
        let mut rows = vec![vec![0.1; 5]; 5];
        rows[0][1] = 1.0;
        let c = CostMatrix::from_rows(&rows).unwrap();
        let f = Restriction::new(5, [(0, 1)], []).unwrap();
        let s = solve_ap(&c, &f).unwrap();
        assert!((max_matching_edge_cost(&s, &c) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn contracted_degrees_sum_to_n_minus_one() {
        for seed in 0..10 {
            let c = CostMatrix::generate_uniform(20, seed).unwrap();
            let f = Restriction::empty(20);
            let s = solve_ap(&c, &f).unwrap();
            let t = basis_tree(&c, &f, &s, TIGHT_TOLERANCE);
            let ct = contract_and_degrees(&t, &s).unwrap();
            assert_eq!(ct.out_degree.iter().sum::<usize>(), 19);
            assert!(ct.leaves >= 2);
        }
    }

    #[test]
    fn star_tree() {
        let n = 6;
        let c = CostMatrix::constant(n, 0.5).unwrap();
        let f = Restriction::empty(n);
        let s = solve_ap(&c, &f).unwrap();
        let centre = 2;
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, s.assignment[i])).collect();
        edges.extend((0..n).filter(|&k| k != centre).map(|k| (centre, s.assignment[k])));
        let tree = BasisTree {
            edges,
            completed_with_slack: false,
            spanning: true,
        };
        let ct = contract_and_degrees(&tree, &s).unwrap();
        assert_eq!(ct.out_degree[centre], n - 1);
        assert_eq!(ct.leaves, n - 1);

        let mut broken = tree.clone();
        broken.edges.remove(0);
        assert!(contract_and_degrees(&broken, &s).is_err());
    }

    #[test]
    fn diameters_are_odd_and_shrink_with_zeta() {
        let c = CostMatrix::generate_uniform(60, 9).unwrap();
        let f = Restriction::empty(60);
        let s = solve_ap(&c, &f).unwrap();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for zeta in [2, 3, 5, 8, 59] {
            let g = build_neighbor_digraph(&c, &f, &s, zeta).unwrap();
            let u = ab_diameter(&g, DiameterMode::Unweighted);
            let w = ab_diameter(&g, DiameterMode::Weighted(BackwardWeight::Zero));
            if u.is_finite() {
                assert_eq!(u % 2.0, 1.0);
            }
            assert!(u <= last.0 && w <= last.1 + 1e-12);
            last = (u, w);
        }
    }
}
