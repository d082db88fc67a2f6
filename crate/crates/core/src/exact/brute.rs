use crate::assignment::Restriction;
use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::tour::Tour;

use super::BRUTE_FORCE_MAX_N;

fn guard(n: usize, what: &'static str, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::SizeGuard { what, n, limit });
    }
    Ok(())
}

/// Calls `visit` with every permutation feasible for `f`.
pub fn for_each_feasible_matching(f: &Restriction, mut visit: impl FnMut(&[usize])) {
    fn rec(f: &Restriction, i: usize, perm: &mut Vec<usize>, used: &mut [bool], visit: &mut impl FnMut(&[usize])) {
        let n = f.n();
        if i == n {
            visit(perm);
            return;
        }
        let choices: Vec<usize> = match f.forced_successor(i) {
            Some(j) => vec![j],
            None => (0..n).filter(|&j| f.allows((i, j))).collect(),
        };
        for j in choices {
            if used[j] {
                continue;
            }
            used[j] = true;
            perm.push(j);
            rec(f, i + 1, perm, used, visit);
            perm.pop();
            used[j] = false;
        }
    }
    rec(f, 0, &mut Vec::with_capacity(f.n()), &mut vec![false; f.n()], &mut visit);
}

/// Every feasible matching with its cost, sorted by cost then lexicographically.
pub fn all_matchings(c: &CostMatrix, f: &Restriction) -> Result<Vec<(f64, Vec<usize>)>> {
    guard(c.n(), "matching enumeration", BRUTE_FORCE_MAX_N)?;
    let mut out = Vec::new();
    for_each_feasible_matching(f, |p| out.push((c.permutation_cost(p), p.to_vec())));
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(out)
}

/// Exact AP(F) optimum by enumeration.
pub fn brute_force_ap(c: &CostMatrix, f: &Restriction) -> Result<(f64, Vec<usize>)> {
    guard(c.n(), "brute-force assignment", BRUTE_FORCE_MAX_N)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_feasible_matching(f, |p| {
        let cost = c.permutation_cost(p);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, p.to_vec()));
        }
    });
    best.ok_or_else(|| Error::Infeasible {
        rows: (0..c.n()).collect(),
        cols: Vec::new(),
    })
}

/// Exact ATSP optimum over all cyclic orders starting at vertex 0.
pub fn brute_force_atsp(c: &CostMatrix) -> Result<(f64, Tour)> {
    let n = c.n();
    guard(n, "brute-force ATSP", BRUTE_FORCE_MAX_N)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    fn rec(c: &CostMatrix, k: usize, order: &mut [usize], best: &mut Option<(f64, Vec<usize>)>) {
        let n = order.len();
        if k == n {
            let mut succ = vec![0; n];
            for t in 0..n {
                succ[order[t]] = order[(t + 1) % n];
            }
            let cost = c.permutation_cost(&succ);
            if best.as_ref().is_none_or(|b| cost < b.0) {
                *best = Some((cost, order.to_vec()));
            }
            return;
        }
        for t in k..n {
            order.swap(k, t);
            rec(c, k + 1, order, best);
            order.swap(k, t);
        }
    }
    rec(c, 1, &mut order, &mut best);
    let (_, order) = best.expect("n >= 3 has tours");
    let tour = Tour::from_order(c, &order)?;
    Ok((tour.cost, tour))
}
