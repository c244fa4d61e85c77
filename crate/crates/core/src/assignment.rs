//! Exact minimum-cost assignment (shortest augmenting paths with potentials).
//!
//! Costs are generic so identity costs, which are frame counts, stay in exact
//! integer arithmetic while per-frame distance costs use `f64`.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};

pub trait Cost: Copy + Debug + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    /// Larger than any reachable reduced cost.
    const INFINITY: Self;

    fn is_valid(self) -> bool;
}

impl Cost for i64 {
    const ZERO: Self = 0;
    const INFINITY: Self = i64::MAX / 4;

    fn is_valid(self) -> bool {
        (0..Self::INFINITY / 4).contains(&self)
    }
}

impl Cost for f64 {
    const ZERO: Self = 0.0;
    const INFINITY: Self = f64::INFINITY;

    fn is_valid(self) -> bool {
        self.is_finite() && self >= 0.0
    }
}

/// Dense row-major cost matrix with finite, non-negative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl<C: Cost> CostMatrix<C> {
    pub fn new(rows: usize, cols: usize, data: Vec<C>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|c| !c.is_valid()) {
            return Err(Error::validation(format!(
                "cost matrix entry ({}, {}) = {:?} is negative or not finite",
                i / cols.max(1),
                i % cols.max(1),
                data[i]
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<C>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::validation("cost matrix rows have unequal lengths"));
        }
        Self::new(n, m, rows.into_iter().flatten().collect())
    }

    pub fn square(n: usize, data: Vec<C>) -> Result<Self> {
        Self::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> C {
        self.data[row * self.cols + col]
    }

    fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<C> {
    /// Column chosen for each row. Every row of a square matrix is assigned;
    /// for rectangular inputs the surplus side stays unassigned.
    pub row_to_col: Vec<Option<usize>>,
    pub total_cost: C,
}

impl<C> Assignment<C> {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }
}

/// Minimum-cost assignment. On a square matrix the result is a bijection;
/// on a rectangular one every row (or column, whichever is fewer) is matched.
pub fn solve_min_cost_assignment<C: Cost>(m: &CostMatrix<C>) -> Assignment<C> {
    if m.rows > m.cols {
        let t = solve_min_cost_assignment(&m.transposed());
        let mut row_to_col = vec![None; m.rows];
        for (c, r) in t.pairs() {
            row_to_col[r] = Some(c);
        }
        return Assignment {
            row_to_col,
            total_cost: t.total_cost,
        };
    }

    let (n, cols) = (m.rows, m.cols);
    // 1-based: index 0 of `owner` and of the column arrays is a virtual root.
    let mut u = vec![C::ZERO; n + 1];
    let mut v = vec![C::ZERO; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut min_v = vec![C::INFINITY; cols + 1];
    let mut used = vec![false; cols + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        min_v.fill(C::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let base = (i0 - 1) * cols;
            let mut delta = C::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = m.data[base + j - 1] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    min_v[j] = min_v[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; n];
    let mut total_cost = C::ZERO;
    for j in 1..=cols {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = Some(j - 1);
            total_cost = total_cost + m.get(owner[j] - 1, j - 1);
        }
    }
    Assignment {
        row_to_col,
        total_cost,
    }
}
