//! Compressed sparse row storage for nonnegative constraint matrices.
//!
//! Rows are constraints, columns are the coordinates being rounded. Stored
//! entries must be finite and strictly positive (structural zeros are simply
//! absent), which every guarantee in the crate relies on.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An immutable nonnegative sparse matrix in CSR form.
///
/// Within each row, entries are sorted by column index and columns are
/// unique; construction enforces both. All row reductions (sums, deviations)
/// run in this canonical column order, so identical inputs give bit-identical
/// floats everywhere downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// Borrowed view of one row: parallel column/value slices.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    /// Column indices, strictly increasing.
    pub cols: &'a [u32],
    /// Matching strictly positive weights.
    pub values: &'a [f64],
}

impl ConstraintMatrix {
    /// Build from `(row, col, weight)` triplets in any order.
    ///
    /// Rejects out-of-range indices, non-finite or non-positive weights, and
    /// duplicate `(row, col)` positions (reported with their coordinates).
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if cols > u32::MAX as usize {
            return Err(Error::invalid("column count exceeds u32 range"));
        }
        let mut entries: Vec<(usize, u32, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, w) in triplets {
            if r >= rows {
                return Err(Error::IndexOutOfRange {
                    kind: "row",
                    index: r,
                    bound: rows,
                });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange {
                    kind: "column",
                    index: c,
                    bound: cols,
                });
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::BadWeight {
                    row: r,
                    col: c,
                    value: w,
                });
            }
            entries.push((r, c as u32, w));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEntry {
                    row: pair[0].0,
                    col: pair[0].1 as usize,
                });
            }
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut next_row = 0usize;
        for &(r, c, w) in &entries {
            while next_row < r {
                row_ptr.push(col_idx.len());
                next_row += 1;
            }
            col_idx.push(c);
            values.push(w);
        }
        while next_row < rows {
            row_ptr.push(col_idx.len());
            next_row += 1;
        }
        Ok(ConstraintMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from per-row `(col, weight)` lists (validated like
    /// [`from_triplets`](Self::from_triplets)).
    pub fn from_rows(cols: usize, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for &(c, w) in row {
                triplets.push((r, c as usize, w));
            }
        }
        Self::from_triplets(rows.len(), cols, &triplets)
    }

    /// Number of rows (constraints).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns (coordinates).
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Flat entry index of the first entry of row `i` (entries are stored
    /// row-major; entry `base + t` is the `t`-th column of the row).
    pub fn row_entry_base(&self, i: usize) -> usize {
        self.row_ptr[i]
    }

    /// View of row `i`.
    pub fn row(&self, i: usize) -> RowView<'_> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        RowView {
            cols: &self.col_idx[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    /// `Σⱼ aᵢⱼ` in canonical column order.
    pub fn row_sum(&self, i: usize) -> f64 {
        let mut acc = 0.0;
        for &v in self.row(i).values {
            acc += v;
        }
        acc
    }

    /// `Σⱼ aᵢⱼ²` in canonical column order.
    pub fn row_sum_sq(&self, i: usize) -> f64 {
        let mut acc = 0.0;
        for &v in self.row(i).values {
            acc += v * v;
        }
        acc
    }

    /// `maxⱼ aᵢⱼ` (0 for an empty row).
    pub fn row_max(&self, i: usize) -> f64 {
        let mut acc = 0.0;
        for &v in self.row(i).values {
            if v > acc {
                acc = v;
            }
        }
        acc
    }

    /// Signed row deviation `Σⱼ aᵢⱼ·(pⱼ − qⱼ)` in canonical column order.
    pub fn row_deviation(&self, i: usize, p: &[f64], q: &[f64]) -> f64 {
        let view = self.row(i);
        let mut acc = 0.0;
        for (idx, &c) in view.cols.iter().enumerate() {
            acc += view.values[idx] * (p[c as usize] - q[c as usize]);
        }
        acc
    }

    /// All signed row deviations at once.
    pub fn deviations(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_deviation(i, p, q)).collect()
    }
}
