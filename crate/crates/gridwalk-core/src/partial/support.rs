//! Dynamic view of the matrix restricted to still-moving columns.
//!
//! Each step of the walk touches only entries whose column is still moving,
//! so per-step cost must be proportional to the *active* support, not the
//! full matrix. This structure keeps, per row, an ordered prefix of the
//! row's active `(column, weight)` entries, and per tracked band an ordered
//! prefix of its active member columns. When a column freezes it is removed
//! from every affected row and band with an ordered shift, found by binary
//! search (rows and bands keep their entries sorted by column so objective
//! terms can be emitted in index order directly).
//!
//! Total maintenance cost over a whole walk is bounded by the sum of row
//! lengths times the number of freeze events per row, which is at most the
//! cost of one dense pass per freeze and in practice far below the walk's
//! own step cost.

use alloc::vec::Vec;

use crate::matrix::ConstraintMatrix;

/// Sentinel for "this entry belongs to no tracked band".
pub(crate) const NO_TRACKER: u32 = u32::MAX;

/// Active-entry view of a matrix during a walk (see module docs).
pub(crate) struct ActiveSupport {
    /// Row segment offsets into `slot_col` / `slot_val` (length rows+1).
    row_start: Vec<usize>,
    /// Number of still-active entries at the front of each row segment.
    active_len: Vec<usize>,
    /// Column of each slot, ascending within the active prefix.
    slot_col: Vec<u32>,
    /// Weight of each slot.
    slot_val: Vec<f64>,
    /// Column segment offsets into `col_row`/`col_tracker` (length cols+1).
    col_ptr: Vec<usize>,
    /// Rows containing each column (over initially-active columns only).
    col_row: Vec<u32>,
    /// Spread-tracker index owning each column occurrence, or [`NO_TRACKER`].
    col_tracker: Vec<u32>,
    /// Band segment offsets into `band_slot_col` (length trackers+1).
    band_start: Vec<usize>,
    /// Active member count at the front of each band segment.
    band_active: Vec<usize>,
    /// Member column of each band slot, ascending within the active prefix.
    band_slot_col: Vec<u32>,
}

impl ActiveSupport {
    /// Build the view. `active` flags the initially-moving columns;
    /// `tracker_members` lists, per spread tracker, its row and full member
    /// columns (ascending).
    pub(crate) fn new(
        matrix: &ConstraintMatrix,
        active: &[bool],
        tracker_members: &[(u32, &[u32])],
    ) -> Self {
        let rows = matrix.rows();
        let cols = matrix.cols();
        debug_assert_eq!(active.len(), cols);

        // Per-entry tracker ownership, aligned with the matrix's CSR order.
        let mut entry_tracker: Vec<u32> = alloc::vec![NO_TRACKER; matrix.nnz()];
        for (t, &(row, members)) in tracker_members.iter().enumerate() {
            let view = matrix.row(row as usize);
            let base = matrix.row_entry_base(row as usize);
            for &c in members {
                let pos = view
                    .cols
                    .binary_search(&c)
                    .expect("band member must be a row entry");
                entry_tracker[base + pos] = t as u32;
            }
        }

        // Row segments: keep only active entries, in column order.
        let mut row_start = Vec::with_capacity(rows + 1);
        let mut active_len = Vec::with_capacity(rows);
        let mut slot_col: Vec<u32> = Vec::new();
        let mut slot_val: Vec<f64> = Vec::new();
        for i in 0..rows {
            row_start.push(slot_col.len());
            let view = matrix.row(i);
            for (idx, &c) in view.cols.iter().enumerate() {
                if active[c as usize] {
                    slot_col.push(c);
                    slot_val.push(view.values[idx]);
                }
            }
            active_len.push(slot_col.len() - row_start[i]);
        }
        row_start.push(slot_col.len());

        // Column segments (CSC over active columns), carrying tracker ids.
        let mut counts: Vec<usize> = alloc::vec![0; cols + 1];
        for i in 0..rows {
            let view = matrix.row(i);
            for &c in view.cols {
                if active[c as usize] {
                    counts[c as usize + 1] += 1;
                }
            }
        }
        for c in 0..cols {
            counts[c + 1] += counts[c];
        }
        let col_ptr = counts.clone();
        let total = col_ptr[cols];
        let mut col_row: Vec<u32> = alloc::vec![0; total];
        let mut col_tracker: Vec<u32> = alloc::vec![NO_TRACKER; total];
        let mut cursor = col_ptr.clone();
        for i in 0..rows {
            let view = matrix.row(i);
            let base = matrix.row_entry_base(i);
            for (idx, &c) in view.cols.iter().enumerate() {
                if active[c as usize] {
                    let at = cursor[c as usize];
                    col_row[at] = i as u32;
                    col_tracker[at] = entry_tracker[base + idx];
                    cursor[c as usize] += 1;
                }
            }
        }

        // Band segments: active members only, ascending.
        let mut band_start = Vec::with_capacity(tracker_members.len() + 1);
        let mut band_active = Vec::with_capacity(tracker_members.len());
        let mut band_slot_col: Vec<u32> = Vec::new();
        for &(_, members) in tracker_members {
            band_start.push(band_slot_col.len());
            for &c in members {
                if active[c as usize] {
                    band_slot_col.push(c);
                }
            }
            band_active.push(band_slot_col.len() - band_start.last().unwrap());
        }
        band_start.push(band_slot_col.len());

        ActiveSupport {
            row_start,
            active_len,
            slot_col,
            slot_val,
            col_ptr,
            col_row,
            col_tracker,
            band_start,
            band_active,
            band_slot_col,
        }
    }

    /// Active `(columns, weights)` of row `i`, columns ascending.
    pub(crate) fn row_active(&self, i: usize) -> (&[u32], &[f64]) {
        let s = self.row_start[i];
        let e = s + self.active_len[i];
        (&self.slot_col[s..e], &self.slot_val[s..e])
    }

    /// Active member columns of spread tracker `t`, ascending.
    pub(crate) fn band_active_members(&self, t: usize) -> &[u32] {
        let s = self.band_start[t];
        &self.band_slot_col[s..s + self.band_active[t]]
    }

    /// Remove a newly frozen column from every row and band containing it.
    /// Calls `on_band(tracker)` once per tracked band that lost a member.
    pub(crate) fn deactivate_column(&mut self, col: u32, mut on_band: impl FnMut(u32)) {
        let c = col as usize;
        for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
            let row = self.col_row[idx] as usize;
            let s = self.row_start[row];
            let len = self.active_len[row];
            let pos = self.slot_col[s..s + len]
                .binary_search(&col)
                .expect("frozen column must be active in its rows");
            self.slot_col.copy_within(s + pos + 1..s + len, s + pos);
            self.slot_val.copy_within(s + pos + 1..s + len, s + pos);
            self.active_len[row] = len - 1;

            let tracker = self.col_tracker[idx];
            if tracker != NO_TRACKER {
                let t = tracker as usize;
                let bs = self.band_start[t];
                let blen = self.band_active[t];
                let bpos = self.band_slot_col[bs..bs + blen]
                    .binary_search(&col)
                    .expect("frozen column must be active in its band");
                self.band_slot_col
                    .copy_within(bs + bpos + 1..bs + blen, bs + bpos);
                self.band_active[t] = blen - 1;
                on_band(tracker);
            }
        }
    }
}
