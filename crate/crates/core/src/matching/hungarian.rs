//! Shortest-augmenting-path Hungarian solver with thresholded pairs.
//!
//! An `n x m` problem with a `max_cost` gate is embedded in a square matrix
//! of side `n + m`:
//!
//! ```text
//!            real cols      row dummies
//! real rows [ C (gated)   | F/2 on diagonal ]
//! col dumm. [ F/2 on diag | 0               ]
//! ```
//!
//! `F = max_cost`. Leaving a row and a column unmatched costs `F` in total,
//! so a valid pair (`c < F`) is always worth taking on its own and the
//! optimum minimises `sum(c) + F * (max(n, m) - |pairs|)` up to a constant.
//! Every row has a dedicated "unmatched" column, which makes the
//! lexicographic tie-break well defined: row by row, the smallest column
//! wins and "unmatched" sorts after every real column.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Reduced costs within this (relative) distance of zero count as tight.
const TIGHT_EPS: f64 = 1e-9;

/// Solves the embedded problem. Returns `row -> Some(col)` for matched rows.
pub(crate) fn solve(
    cost: &[f64],
    rows: usize,
    cols: usize,
    max_cost: f64,
) -> Result<Vec<Option<usize>>> {
    if let Some(bad) = cost.iter().find(|c| !c.is_finite()) {
        return Err(Error::SolverFailure(format!("non-finite cost {bad}")));
    }
    if !max_cost.is_finite() {
        return Err(Error::SolverFailure(format!("non-finite max_cost {max_cost}")));
    }
    if rows == 0 || cols == 0 {
        return Ok(alloc::vec![None; rows]);
    }

    let n = rows + cols;
    let half = max_cost.max(0.0) / 2.0;
    let largest = cost.iter().fold(max_cost.abs(), |acc, c| acc.max(c.abs()));
    // Strictly worse than leaving both endpoints unmatched.
    let forbidden = 4.0 * largest + 1.0;
    let mut square = alloc::vec![forbidden; n * n];
    for i in 0..rows {
        for j in 0..cols {
            let c = cost[i * cols + j];
            if c < max_cost {
                square[i * n + j] = c;
            }
        }
        square[i * n + cols + i] = half;
    }
    for j in 0..cols {
        let r = rows + j;
        square[r * n + j] = half;
        for d in 0..rows {
            square[r * n + cols + d] = 0.0;
        }
    }

    let (assignment, u, v) = hungarian_square(&square, n)?;
    let scale = 1.0 + largest;
    let tight = |i: usize, j: usize| -> bool {
        square[i * n + j] < forbidden && (square[i * n + j] - u[i] - v[j]).abs() <= TIGHT_EPS * scale
    };
    let assignment = lexicographic_refine(assignment, n, rows, cols, &tight);
    Ok((0..rows)
        .map(|i| {
            let j = assignment[i];
            (j < cols).then_some(j)
        })
        .collect())
}

/// Classic O(n^3) potentials-based Hungarian method on a dense square
/// matrix. Returns the row assignment and the dual potentials.
fn hungarian_square(a: &[f64], n: usize) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    // 1-based internal indexing, column 0 is a sentinel.
    let mut u = alloc::vec![0.0f64; n + 1];
    let mut v = alloc::vec![0.0f64; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    let cap = (n + 1) * (n + 1) + 16;

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = alloc::vec![f64::INFINITY; n + 1];
        let mut used = alloc::vec![false; n + 1];
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > cap {
                return Err(Error::SolverFailure(format!(
                    "iteration cap exceeded while augmenting row {i}"
                )));
            }
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() || j1 == 0 {
                return Err(Error::SolverFailure("no augmenting column found".into()));
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

    let mut assignment = alloc::vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let u = u[1..].to_vec();
    let v = v[1..].to_vec();
    Ok((assignment, u, v))
}

/// Moves a perfect matching of the equality subgraph to the lexicographically
/// smallest one over the first `rows` rows.
///
/// By complementary slackness every optimal assignment lives in the subgraph
/// of tight edges, so this only ever swaps between optima.
fn lexicographic_refine(
    mut assignment: Vec<usize>,
    n: usize,
    rows: usize,
    cols: usize,
    tight: &dyn Fn(usize, usize) -> bool,
) -> Vec<usize> {
    let mut owner = alloc::vec![0usize; n];
    for (i, &j) in assignment.iter().enumerate() {
        owner[j] = i;
    }
    let mut locked_row = alloc::vec![false; n];
    let mut locked_col = alloc::vec![false; n];

    for i in 0..rows {
        let current = assignment[i];
        // Real columns ascending, then this row's own dummy.
        let limit = if current < cols { current } else { cols };
        for target in 0..limit {
            if locked_col[target] || !tight(i, target) {
                continue;
            }
            let start = owner[target];
            if locked_row[start] {
                continue;
            }
            let search = PathSearch {
                n,
                assignment: &assignment,
                owner: &owner,
                locked_row: &locked_row,
                locked_col: &locked_col,
                tight,
            };
            if let Some(path) = search.run(start, target, current, i) {
                // path: rows r_0 = start, r_1, ...; r_k takes column path[k].1
                for &(r, c) in &path {
                    assignment[r] = c;
                    owner[c] = r;
                }
                assignment[i] = target;
                owner[target] = i;
                break;
            }
        }
        locked_row[i] = true;
        locked_col[assignment[i]] = true;
    }
    assignment
}

struct PathSearch<'a> {
    n: usize,
    assignment: &'a [usize],
    owner: &'a [usize],
    locked_row: &'a [bool],
    locked_col: &'a [bool],
    tight: &'a dyn Fn(usize, usize) -> bool,
}

impl PathSearch<'_> {
    /// Breadth-first search for re-assignments that let `row` take `target`
    /// (currently owned by `start`) while giving up `goal_col`.
    ///
    /// Returns `(row, new_col)` moves whose application keeps the matching
    /// perfect once `row` takes `target`.
    fn run(&self, start: usize, target: usize, goal_col: usize, row: usize) -> Option<Vec<(usize, usize)>> {
        let n = self.n;
        let mut parent_col: Vec<Option<usize>> = alloc::vec![None; n];
        let mut came_from: Vec<Option<usize>> = alloc::vec![None; n];
        let mut seen_row = alloc::vec![false; n];
        let mut queue = alloc::collections::VecDeque::new();
        seen_row[start] = true;
        seen_row[row] = true;
        parent_col[target] = Some(row);
        queue.push_back(start);

        while let Some(r) = queue.pop_front() {
            for c in 0..n {
                if c == self.assignment[r] || self.locked_col[c] || parent_col[c].is_some() {
                    continue;
                }
                if !(self.tight)(r, c) {
                    continue;
                }
                parent_col[c] = Some(r);
                if c == goal_col {
                    let mut moves = Vec::new();
                    let (mut taker, mut col) = (r, c);
                    loop {
                        moves.push((taker, col));
                        match came_from[taker] {
                            Some(prev) => {
                                col = prev;
                                taker = parent_col[prev].expect("visited column has a parent");
                            }
                            None => break,
                        }
                    }
                    return Some(moves);
                }
                let next = self.owner[c];
                if seen_row[next] || self.locked_row[next] {
                    continue;
                }
                seen_row[next] = true;
                came_from[next] = Some(c);
                queue.push_back(next);
            }
        }
        None
    }
}
