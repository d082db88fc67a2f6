//! Dense shortest-augmenting-path assignment with dual potentials.
//!
//! Works on an `m x m` matrix where `INFINITY` marks a forbidden pair. The
//! duals stay feasible (`u[i] + v[j] <= cost[i][j]` on allowed pairs) and
//! matched pairs stay tight, so the solver can resume from any such state.

const NONE: usize = usize::MAX;

/// Slack above which a warm-started matched pair is no longer treated as tight.
const WARM_TIGHTNESS: f64 = 1e-12;

pub(crate) struct Dense {
    pub m: usize,
    pub cost: Vec<f64>,
}

pub(crate) struct WarmStart {
    pub u: Vec<Option<f64>>,
    pub v: Vec<Option<f64>>,
    pub row_to_col: Vec<Option<usize>>,
}

#[derive(Debug)]
pub(crate) struct DenseSolution {
    pub row_to_col: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Rows (by local index) whose allowed columns are fewer than the rows.
#[derive(Debug)]
pub(crate) struct HallViolator {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Dense {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.m + j]
    }

    fn allowed_cols(&self, rows: &[usize]) -> Vec<usize> {
        (0..self.m)
            .filter(|&j| rows.iter().any(|&i| self.at(i, j).is_finite()))
            .collect()
    }

    pub fn solve(&self, warm: Option<WarmStart>) -> Result<DenseSolution, HallViolator> {
        let m = self.m;
        // Column m is the virtual root of each search.
        let mut v = vec![0.0; m + 1];
        let mut u = vec![0.0; m];
        let mut p = vec![NONE; m + 1];
        let mut row_to_col = vec![NONE; m];

        if let Some(w) = warm {
            for j in 0..m {
                v[j] = w.v[j].unwrap_or(0.0);
            }
            for i in 0..m {
                u[i] = w.u[i].unwrap_or(f64::INFINITY);
            }
            for (i, c) in w.row_to_col.iter().enumerate() {
                if let Some(j) = *c {
                    if self.at(i, j).is_finite() && p[j] == NONE {
                        p[j] = i;
                        row_to_col[i] = j;
                    }
                }
            }
        }

        // Restore dual feasibility; a row whose potential had to drop loses
        // its matched column.
        for i in 0..m {
            let best = (0..m)
                .filter(|&j| self.at(i, j).is_finite())
                .map(|j| self.at(i, j) - v[j])
                .fold(f64::INFINITY, f64::min);
            if best.is_infinite() {
                return Err(HallViolator {
                    rows: vec![i],
                    cols: Vec::new(),
                });
            }
            if best < u[i] {
                u[i] = best;
            }
            let j = row_to_col[i];
            if j != NONE && self.at(i, j) - u[i] - v[j] > WARM_TIGHTNESS {
                p[j] = NONE;
                row_to_col[i] = NONE;
            }
        }

        let mut minv = vec![f64::INFINITY; m];
        let mut used = vec![false; m + 1];
        let mut way = vec![NONE; m + 1];
        for row in 0..m {
            if row_to_col[row] != NONE {
                continue;
            }
            p[m] = row;
            let mut j0 = m;
            minv.iter_mut().for_each(|x| *x = f64::INFINITY);
            used.iter_mut().for_each(|x| *x = false);
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = NONE;
                for j in 0..m {
                    if used[j] {
                        continue;
                    }
                    let c = self.at(i0, j);
                    if c.is_finite() {
                        let cur = c - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                if j1 == NONE {
                    let mut rows: Vec<usize> = (0..=m).filter(|&j| used[j]).map(|j| p[j]).collect();
                    rows.sort_unstable();
                    let cols = self.allowed_cols(&rows);
                    return Err(HallViolator { rows, cols });
                }
                for j in 0..=m {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == NONE {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == m {
                    break;
                }
            }
            for j in 0..m {
                if p[j] != NONE {
                    row_to_col[p[j]] = j;
                }
            }
        }
        v.truncate(m);
        Ok(DenseSolution { row_to_col, u, v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(d: &Dense) -> Option<f64> {
        fn rec(d: &Dense, i: usize, used: &mut Vec<bool>, acc: f64, best: &mut Option<f64>) {
            if i == d.m {
                if best.is_none_or(|b| acc < b) {
                    *best = Some(acc);
                }
                return;
            }
            for j in 0..d.m {
                if !used[j] && d.at(i, j).is_finite() {
                    used[j] = true;
                    rec(d, i + 1, used, acc + d.at(i, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = None;
        rec(d, 0, &mut vec![false; d.m], 0.0, &mut best);
        best
    }

    fn value(d: &Dense, s: &DenseSolution) -> f64 {
        (0..d.m).map(|i| d.at(i, s.row_to_col[i])).sum()
    }

    #[test]
    fn small_dense_problems_match_enumeration() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in 1..=6 {
            for _ in 0..30 {
                let cost: Vec<f64> = (0..m * m)
                    .map(|_| {
                        let x = next();
                        if x < 0.15 { f64::INFINITY } else { x }
                    })
                    .collect();
                let d = Dense { m, cost };
                match (d.solve(None), brute(&d)) {
                    (Ok(s), Some(b)) => {
                        assert!((value(&d, &s) - b).abs() < 1e-12);
                        for i in 0..m {
                            for j in 0..m {
                                if d.at(i, j).is_finite() {
                                    assert!(d.at(i, j) - s.u[i] - s.v[j] >= -1e-12);
                                }
                            }
                            let j = s.row_to_col[i];
                            assert!((d.at(i, j) - s.u[i] - s.v[j]).abs() < 1e-12);
                        }
                    }
                    (Err(h), None) => {
                        assert!(h.cols.len() < h.rows.len(), "{h:?}");
                    }
                    (a, b) => panic!("solver {a:?} vs enumeration {b:?}"),
                }
            }
        }
    }

    #[test]
    fn warm_start_after_removing_a_matched_pair() {
        let cost = vec![
            4.0, 1.0, 3.0, //
            2.0, 0.0, 5.0, //
            3.0, 2.0, 2.0,
        ];
        let d = Dense { m: 3, cost };
        let s = d.solve(None).unwrap();
        let j = s.row_to_col[0];
        let mut cost2 = d.cost.clone();
        cost2[j] = f64::INFINITY;
        let d2 = Dense { m: 3, cost: cost2 };
        let warm = WarmStart {
            u: s.u.iter().map(|&x| Some(x)).collect(),
            v: s.v.iter().map(|&x| Some(x)).collect(),
            row_to_col: s.row_to_col.iter().map(|&x| Some(x)).collect(),
        };
        let w = d2.solve(Some(warm)).unwrap();
        assert!((value(&d2, &w) - brute(&d2).unwrap()).abs() < 1e-12);
    }
}
