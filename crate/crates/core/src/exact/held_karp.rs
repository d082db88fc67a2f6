use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::tour::Tour;

use super::HELD_KARP_MAX_N;

/// Exact ATSP optimum by dynamic programming over (visited set, endpoint),
/// with tours anchored at vertex 0. Ties resolve to the smaller predecessor.
pub fn held_karp(c: &CostMatrix) -> Result<(f64, Tour)> {
    let n = c.n();
    if n > HELD_KARP_MAX_N {
        return Err(Error::SizeGuard {
            what: "Held-Karp",
            n,
            limit: HELD_KARP_MAX_N,
        });
    }
    // Vertex v in 1..n is bit v-1.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut best = vec![f64::INFINITY; (1 << m) * m];
    let mut prev = vec![u8::MAX; (1 << m) * m];
    for v in 0..m {
        best[(1 << v) * m + v] = c.cost(0, v + 1);
    }
    for set in 1..=full {
        for last in 0..m {
            if set >> last & 1 == 0 {
                continue;
            }
            let here = best[set * m + last];
            if here.is_infinite() {
                continue;
            }
            let mut rest = full & !set;
            while rest != 0 {
                let next = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let to = (set | 1 << next) * m + next;
                let cand = here + c.cost(last + 1, next + 1);
                if cand < best[to] || (cand == best[to] && (last as u8) < prev[to]) {
                    best[to] = cand;
                    prev[to] = last as u8;
                }
            }
        }
    }
    let mut end = 0;
    let mut total = f64::INFINITY;
    for last in 0..m {
        let cand = best[full * m + last] + c.cost(last + 1, 0);
        if cand < total {
            total = cand;
            end = last;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut set = full;
    let mut last = end;
    loop {
        order.push(last + 1);
        let p = prev[set * m + last];
        set &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    order.push(0);
    order.reverse();
    let tour = Tour::from_order(c, &order)?;
    Ok((tour.cost, tour))
}
