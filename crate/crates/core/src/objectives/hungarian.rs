//! Minimum-cost perfect assignment (Hungarian method, O(N^3)).
//!
//! Among all optimal assignments the lexicographically smallest permutation
//! is returned: after the shortest-augmenting-path solve, rows are assigned
//! greedily in order to the smallest column on a zero-reduced-cost edge that
//! still admits a perfect matching of the remaining rows.

use crate::Real;

use super::ObjectiveError;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `perm[i]` is the column assigned to row `i`.
    pub perm: Vec<usize>,
    /// Sum of `cost[i][perm[i]]` accumulated in row order.
    pub cost: T,
}

/// Solves a square assignment problem given as a row-major `n x n` matrix.
pub fn hungarian<T: Real>(n: usize, cost: &[T]) -> Result<Assignment<T>, ObjectiveError> {
    if cost.len() != n * n {
        return Err(ObjectiveError::Dimension {
            expected: n * n,
            actual: cost.len(),
        });
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFinite);
    }
    if n == 0 {
        return Ok(Assignment {
            perm: Vec::new(),
            cost: T::zero(),
        });
    }
    let at = |i: usize, j: usize| cost[i * n + j];

    // 1-indexed potentials; column 0 is the virtual source.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut raw = vec![0usize; n];
    for j in 1..=n {
        raw[p[j] - 1] = j - 1;
    }
    let raw_cost = row_order_cost(n, cost, &raw);

    let scale = cost.iter().fold(T::zero(), |m, &c| m.max(c.abs()));
    let tol = (T::one() + scale) * T::from_count(n) * T::lit(1e-12);
    let tight: Vec<bool> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            at(i, j) - u[i + 1] - v[j + 1] <= tol
        })
        .collect();

    if let Some(lex) = lexicographic_matching(n, &tight) {
        let lex_cost = row_order_cost(n, cost, &lex);
        if lex_cost <= raw_cost {
            return Ok(Assignment {
                perm: lex,
                cost: lex_cost,
            });
        }
    }
    Ok(Assignment {
        perm: raw,
        cost: raw_cost,
    })
}

fn row_order_cost<T: Real>(n: usize, cost: &[T], perm: &[usize]) -> T {
    let mut acc = T::zero();
    for (i, &j) in perm.iter().enumerate() {
        acc += cost[i * n + j];
    }
    acc
}

/// Lexicographically smallest perfect matching in the bipartite graph given
/// by `edges` (row-major adjacency), if one exists.
fn lexicographic_matching(n: usize, edges: &[bool]) -> Option<Vec<usize>> {
    let mut perm = Vec::with_capacity(n);
    let mut col_used = vec![false; n];
    for i in 0..n {
        let mut chosen = None;
        for j in 0..n {
            if col_used[j] || !edges[i * n + j] {
                continue;
            }
            col_used[j] = true;
            if has_perfect_matching(n, edges, i + 1, &col_used) {
                chosen = Some(j);
                break;
            }
            col_used[j] = false;
        }
        perm.push(chosen?);
    }
    Some(perm)
}

/// Kuhn's augmenting-path check that rows `first_row..n` can be matched into
/// the columns not yet used.
fn has_perfect_matching(n: usize, edges: &[bool], first_row: usize, col_used: &[bool]) -> bool {
    fn augment(
        row: usize,
        n: usize,
        edges: &[bool],
        col_used: &[bool],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..n {
            if col_used[j] || seen[j] || !edges[row * n + j] {
                continue;
            }
            seen[j] = true;
            let free = match owner[j] {
                None => true,
                Some(r) => augment(r, n, edges, col_used, seen, owner),
            };
            if free {
                owner[j] = Some(row);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n];
    for row in first_row..n {
        let mut seen = vec![false; n];
        if !augment(row, n, edges, col_used, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}
