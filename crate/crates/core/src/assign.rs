//! Gated rectangular linear assignment.
//!
//! Entries that are non-finite or above the gate cannot be matched. Leaving
//! a row or a column unmatched costs `gate / 2`, so a pair is worth taking
//! exactly when its cost does not exceed the gate. With an infinite gate
//! the dummy cost is chosen large enough that the result is a
//! minimum-cost matching among those of maximum cardinality.
//!
//! The padded square problem is solved with the shortest-augmenting-path
//! Hungarian method. Among optimal matchings the returned one is the
//! lexicographically smallest when read row by row, with "unmatched"
//! ordered after every column.

use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        CostMatrix { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        CostMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Matching {
    /// Sum of matched costs, accumulated in row order.
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }
}

/// Half of the cost of leaving one row and one column unmatched.
pub(crate) fn dummy_cost(costs: &CostMatrix, gate: f64) -> f64 {
    if gate.is_finite() {
        return 0.5 * gate;
    }
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &v in &costs.data {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (hi.abs() + lo.abs() + 1.0) * (costs.rows + costs.cols + 1) as f64
}

/// Minimum-cost gated matching. Deterministic for identical inputs.
pub fn assign(costs: &CostMatrix, gate: f64) -> Matching {
    let n = costs.rows;
    let m = costs.cols;
    if n == 0 || m == 0 {
        return Matching {
            pairs: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }
    let size = n + m;
    let dummy = dummy_cost(costs, gate);
    let inf = f64::INFINITY;

    // Rows: n real then m dummy. Columns: m real then n dummy.
    let mut a = vec![inf; size * size];
    let mut scale = dummy.abs();
    for r in 0..n {
        for c in 0..m {
            let v = costs.get(r, c);
            if v.is_finite() && v <= gate {
                a[r * size + c] = v;
                scale = scale.max(v.abs());
            }
        }
        a[r * size + m + r] = dummy;
    }
    for k in 0..m {
        let r = n + k;
        a[r * size + k] = dummy;
        for c in m..size {
            a[r * size + c] = 0.0;
        }
    }

    let (u, v, mut col_of, mut row_of) = hungarian(&a, size);

    let eps = 1e-10 * (1.0 + scale);
    let tight = |r: usize, c: usize| {
        let x = a[r * size + c];
        x.is_finite() && x - u[r] - v[c] <= eps
    };

    let mut fixed = vec![false; size];
    let mut visited = vec![false; size];
    for i in 0..n {
        let current = col_of[i];
        for j in 0..current {
            if !tight(i, j) || fixed[row_of[j]] {
                continue;
            }
            // Move i to j; the displaced row must reach `current` through
            // tight edges without touching fixed rows.
            fixed[i] = true;
            visited.iter_mut().for_each(|x| *x = false);
            let mut path = Vec::new();
            if reroute(row_of[j], current, j, size, &tight, &fixed, &row_of, &mut visited, &mut path) {
                // path holds (row, new column) moves.
                for &(r, c) in path.iter().rev() {
                    col_of[r] = c;
                    row_of[c] = r;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
            fixed[i] = false;
        }
        fixed[i] = true;
    }

    let mut out = Matching::default();
    for r in 0..n {
        let c = col_of[r];
        if c < m {
            out.pairs.push((r, c));
        } else {
            out.unmatched_rows.push(r);
        }
    }
    for c in 0..m {
        if row_of[c] >= n {
            out.unmatched_cols.push(c);
        }
    }
    out
}

/// Depth-first search for an alternating path moving `row` off `banned`
/// and ending on the freed column `target`.
#[allow(clippy::too_many_arguments)]
fn reroute(
    row: usize,
    target: usize,
    banned: usize,
    size: usize,
    tight: &impl Fn(usize, usize) -> bool,
    fixed: &[bool],
    row_of: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    visited[row] = true;
    for c in 0..size {
        if c == banned || !tight(row, c) {
            continue;
        }
        if c == target {
            path.push((row, c));
            return true;
        }
        let next = row_of[c];
        if fixed[next] || visited[next] {
            continue;
        }
        if reroute(next, target, c, size, tight, fixed, row_of, visited, path) {
            path.push((row, c));
            return true;
        }
    }
    false
}

/// Square Hungarian method on a row-major matrix whose infinite entries are
/// forbidden. A feasible perfect matching must exist. Returns the row and
/// column potentials and the assignment in both directions.
fn hungarian(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>, Vec<usize>) {
    let inf = f64::INFINITY;
    // 1-based with index 0 as the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            let row = &a[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(delta.is_finite(), "no feasible augmenting path");
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
    let mut col_of = vec![0usize; n];
    let mut row_of = vec![0usize; n];
    for j in 1..=n {
        col_of[p[j] - 1] = j - 1;
        row_of[j - 1] = p[j] - 1;
    }
    (u[1..].to_vec(), v[1..].to_vec(), col_of, row_of)
}
