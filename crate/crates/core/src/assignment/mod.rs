//! The restricted assignment relaxation AP(F).
//!
//! Forced-in edges are contracted out: their tails leave the row set and
//! their heads leave the column set, and the remaining free problem is
//! solved on the admissible pairs only. Forbidden pairs are filtered out,
//! never priced, so duals keep their natural magnitudes.

mod hungarian;
mod params;
mod restriction;
mod sensitivity;

use serde::{Deserialize, Serialize};

pub use params::AnalysisParams;
pub use restriction::{derive_inadmissible, Restriction};
pub(crate) use sensitivity::alternatives_from;
pub use sensitivity::{
    alternatives, basis_tree, insertion_cost, Alternative, Alternatives, BasisTree, Insertion,
    InsertionTable,
};

use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::Edge;
use hungarian::{Dense, WarmStart};

/// Absolute tolerance for treating a reduced cost as zero.
pub const TIGHT_TOLERANCE: f64 = 1e-9;

/// Optimal solution of AP(F) with its dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSolution {
    /// Successor map of the optimal matching, forced-in edges included.
    pub assignment: Vec<usize>,
    /// Z_AP(F).
    pub value: f64,
    /// Rows not constrained by a forced-in edge, ascending.
    pub free_rows: Vec<usize>,
    /// Columns not constrained by a forced-in edge, ascending.
    pub free_cols: Vec<usize>,
    /// Row duals, parallel to `free_rows`; the first is pinned to 0.
    pub u: Vec<f64>,
    /// Column duals, parallel to `free_cols`.
    pub v: Vec<f64>,
    /// Number of free rows, `n - |F1|`.
    pub n_free: usize,
    /// Number of free admissible edges.
    pub m_free: usize,
}

impl ApSolution {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn row_dual(&self, i: usize) -> Option<f64> {
        self.free_rows.binary_search(&i).ok().map(|k| self.u[k])
    }

    pub fn col_dual(&self, j: usize) -> Option<f64> {
        self.free_cols.binary_search(&j).ok().map(|k| self.v[k])
    }

    /// `C(i, j) - u_i - v_j` for a free pair of row and column.
    pub fn reduced_cost(&self, c: &CostMatrix, i: usize, j: usize) -> Option<f64> {
        Some(c.cost(i, j) - self.row_dual(i)? - self.col_dual(j)?)
    }

    pub fn contains(&self, (i, j): Edge) -> bool {
        self.assignment[i] == j
    }

    /// Row matched to each column.
    pub fn inverse(&self) -> Vec<usize> {
        invert(&self.assignment)
    }

    pub fn dual_sum(&self) -> f64 {
        self.u.iter().sum::<f64>() + self.v.iter().sum::<f64>()
    }

    /// Checks the optimality certificate against `F`: feasibility of the
    /// matching, dual feasibility and complementary slackness within `tol`,
    /// and the duality identity.
    pub fn verify(&self, c: &CostMatrix, f: &Restriction, tol: f64) -> std::result::Result<(), String> {
        let n = c.n();
        if self.assignment.len() != n || !is_permutation(&self.assignment) {
            return Err("assignment is not a permutation".into());
        }
        if !f.admits(&self.assignment) {
            return Err("assignment violates the restriction".into());
        }
        for (a, &i) in self.free_rows.iter().enumerate() {
            for (b, &j) in self.free_cols.iter().enumerate() {
                if !f.allows((i, j)) {
                    continue;
                }
                let rc = c.cost(i, j) - self.u[a] - self.v[b];
                if rc < -tol {
                    return Err(format!("reduced cost of ({i}, {j}) is {rc}"));
                }
                if self.assignment[i] == j && rc.abs() > tol {
                    return Err(format!("matching edge ({i}, {j}) has reduced cost {rc}"));
                }
            }
        }
        let forced: f64 = f.forced_in().iter().map(|&e| c.edge_cost(e)).sum();
        let gap = self.value - (self.dual_sum() + forced);
        if gap.abs() > tol {
            return Err(format!("duality gap {gap}"));
        }
        Ok(())
    }
}

/// Solves AP(F) from scratch.
pub fn solve_ap(c: &CostMatrix, f: &Restriction) -> Result<ApSolution> {
    solve_constrained(c, &forced_successors(f), |e| f.allows(e), None)
}

/// Solves AP(F) starting from the duals and matching of a related solution,
/// typically the parent node's. Falls back to a cold solve if the warm
/// result fails its certificate.
pub fn solve_ap_warm(c: &CostMatrix, f: &Restriction, start: &ApSolution) -> Result<ApSolution> {
    let succ = forced_successors(f);
    let sol = solve_constrained(c, &succ, |e| f.allows(e), Some(start))?;
    if sol.verify(c, f, TIGHT_TOLERANCE).is_ok() {
        Ok(sol)
    } else {
        solve_constrained(c, &succ, |e| f.allows(e), None)
    }
}

fn forced_successors(f: &Restriction) -> Vec<Option<usize>> {
    (0..f.n()).map(|i| f.forced_successor(i)).collect()
}

/// Minimum-cost perfect matching that uses every `forced[i] = Some(j)` pair
/// and otherwise only pairs accepted by `allowed`. Used directly by the
/// ranked-matching enumerator, whose forced pairs do not induce
/// inadmissible edges.
pub(crate) fn solve_constrained(
    c: &CostMatrix,
    forced: &[Option<usize>],
    allowed: impl Fn(Edge) -> bool,
    warm: Option<&ApSolution>,
) -> Result<ApSolution> {
    let n = c.n();
    let mut col_taken = vec![false; n];
    for (i, j) in forced.iter().enumerate() {
        if let Some(j) = *j {
            if i == j || col_taken[j] {
                return Err(Error::InconsistentRestriction(format!(
                    "forced pair ({i}, {j}) conflicts with another forced pair or the diagonal"
                )));
            }
            col_taken[j] = true;
        }
    }
    let free_rows: Vec<usize> = (0..n).filter(|&i| forced[i].is_none()).collect();
    let free_cols: Vec<usize> = (0..n).filter(|&j| !col_taken[j]).collect();
    let m = free_rows.len();
    let mut cost = vec![f64::INFINITY; m * m];
    let mut m_free = 0;
    for (a, &i) in free_rows.iter().enumerate() {
        for (b, &j) in free_cols.iter().enumerate() {
            if i != j && allowed((i, j)) {
                cost[a * m + b] = c.cost(i, j);
                m_free += 1;
            }
        }
    }
    let dense = Dense { m, cost };

    let warm = warm.map(|s| {
        let col_pos: Vec<Option<usize>> = {
            let mut pos = vec![None; n];
            for (b, &j) in free_cols.iter().enumerate() {
                pos[j] = Some(b);
            }
            pos
        };
        WarmStart {
            u: free_rows.iter().map(|&i| s.row_dual(i)).collect(),
            v: free_cols.iter().map(|&j| s.col_dual(j)).collect(),
            row_to_col: free_rows
                .iter()
                .map(|&i| s.assignment.get(i).and_then(|&j| col_pos.get(j).copied().flatten()))
                .collect(),
        }
    });

    let sol = dense.solve(warm).map_err(|h| Error::Infeasible {
        rows: h.rows.iter().map(|&a| free_rows[a]).collect(),
        cols: h.cols.iter().map(|&b| free_cols[b]).collect(),
    })?;

    let mut assignment: Vec<usize> = forced.iter().map(|j| j.unwrap_or(usize::MAX)).collect();
    for (a, &i) in free_rows.iter().enumerate() {
        assignment[i] = free_cols[sol.row_to_col[a]];
    }
    let (mut u, mut v) = (sol.u, sol.v);
    if let Some(&shift) = u.first() {
        u.iter_mut().for_each(|x| *x -= shift);
        v.iter_mut().for_each(|x| *x += shift);
    }
    let value = c.permutation_cost(&assignment);
    Ok(ApSolution {
        assignment,
        value,
        free_rows,
        free_cols,
        u,
        v,
        n_free: m,
        m_free,
    })
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&j| j < perm.len() && !std::mem::replace(&mut seen[j], true))
}

pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &j) in perm.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example3() -> CostMatrix {
        CostMatrix::from_rows(&[
            vec![0.0, 0.2, 0.7],
            vec![0.5, 0.0, 0.1],
            vec![0.3, 0.9, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn three_by_three_unrestricted() {
        // Derangements of size 3: 1->2->3->1 costs 0.6, 1->3->2->1 costs 2.1.
        let c = example3();
        let s = solve_ap(&c, &Restriction::empty(3)).unwrap();
        assert!((s.value - 0.6).abs() < 1e-12);
        assert_eq!(s.assignment, vec![1, 2, 0]);
        s.verify(&c, &Restriction::empty(3), 1e-9).unwrap();
        assert_eq!(s.u[0], 0.0);
        assert_eq!(s.n_free, 3);
        assert_eq!(s.m_free, 6);
    }

    #[test]
    fn three_by_three_with_forced_edge() {
        let c = example3();
        let f = Restriction::new(3, [(0, 2)], []).unwrap();
        let s = solve_ap(&c, &f).unwrap();
        assert!((s.value - 2.1).abs() < 1e-12);
        assert_eq!(s.assignment, vec![2, 0, 1]);
        s.verify(&c, &f, 1e-9).unwrap();
        assert_eq!(s.n_free, 2);
    }

    #[test]
    fn constant_matrix() {
        let c = CostMatrix::constant(4, 0.25).unwrap();
        let s = solve_ap(&c, &Restriction::empty(4)).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.u.iter().all(|&x| x.abs() < 1e-12));
        assert!(s.v.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn infeasible_restriction_reports_hall_violator() {
        let c = example3();
        let f = Restriction::new(3, [], [(0, 1), (0, 2)]).unwrap();
        match solve_ap(&c, &f) {
            Err(Error::Infeasible { rows, cols }) => {
                assert!(cols.len() < rows.len());
                assert!(rows.contains(&0));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        for seed in 0..40 {
            let c = CostMatrix::generate_uniform(9, seed).unwrap();
            let root = solve_ap(&c, &Restriction::empty(9)).unwrap();
            let e = (0, root.assignment[0]);
            let out = Restriction::empty(9).with_forced_out(e).unwrap();
            let warm = solve_ap_warm(&c, &out, &root).unwrap();
            let cold = solve_ap(&c, &out).unwrap();
            assert!((warm.value - cold.value).abs() < 1e-12);
            let alt = (1, if root.assignment[1] == 2 { 3 } else { 2 });
            if let Ok(fin) = Restriction::empty(9).with_forced_in(alt) {
                let warm = solve_ap_warm(&c, &fin, &root).unwrap();
                let cold = solve_ap(&c, &fin).unwrap();
                assert!((warm.value - cold.value).abs() < 1e-12);
                warm.verify(&c, &fin, 1e-9).unwrap();
            }
        }
    }

    #[test]
    fn hamilton_forced_set_has_no_free_part() {
        let c = example3();
        let f = Restriction::new(3, [(0, 1), (1, 2), (2, 0)], []).unwrap();
        let s = solve_ap(&c, &f).unwrap();
        assert_eq!(s.n_free, 0);
        assert!((s.value - 0.6).abs() < 1e-12);
        s.verify(&c, &f, 1e-9).unwrap();
    }
}
