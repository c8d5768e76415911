//! Walk state on the 1/k grid: integer numerators, the moving set, and grid
//! rounding/validation helpers.
//!
//! Positions are stored as exact integer numerators in `[0, k]`; a column is
//! *moving* while its numerator is strictly inside, and freezes permanently
//! the moment it reaches 0 or k. All fractional values handed out are derived
//! as `numerator / k` through one helper, so every consumer sees identical
//! floats.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric;

/// Absolute tolerance when snapping an input probability to the grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Largest accepted granularity (numerators stay comfortably inside `u32`,
/// and `T = Θ(k²)` stays addressable).
pub const MAX_GRANULARITY: u32 = 1 << 20;

/// The fractional value `num / k`.
#[inline]
pub fn grid_value(num: u32, k: u32) -> f64 {
    num as f64 / k as f64
}

/// Validate `k`: strictly positive, even (so 1/2 is on the grid and ±1/k
/// steps preserve it), and at most [`MAX_GRANULARITY`].
pub fn validate_granularity(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("granularity k must be positive"));
    }
    if k % 2 != 0 {
        return Err(Error::invalid(alloc::format!(
            "granularity k must be even, got {k}"
        )));
    }
    if k > MAX_GRANULARITY {
        return Err(Error::invalid(alloc::format!(
            "granularity k = {k} exceeds the supported maximum {MAX_GRANULARITY}"
        )));
    }
    Ok(())
}

/// Snap `p` to its numerator on the 1/k grid, rejecting values further than
/// [`GRID_TOLERANCE`] from any multiple of 1/k (reported with `index`).
pub fn snap_to_grid(p: f64, k: u32, index: usize) -> Result<u32> {
    if !p.is_finite() {
        return Err(Error::OffGrid { index, value: p, k });
    }
    let scaled = p * k as f64;
    let num = numeric::round(scaled);
    if num < 0.0 || num > k as f64 {
        return Err(Error::OffGrid { index, value: p, k });
    }
    let num = num as u32;
    if numeric::abs(p - grid_value(num, k)) > GRID_TOLERANCE {
        return Err(Error::OffGrid { index, value: p, k });
    }
    Ok(num)
}

/// Nearest grid numerator for `p ∈ [0,1]`, ties rounding up
/// (`⌊p·k + 1/2⌋`, clamped to `[0, k]`).
pub fn round_to_grid(p: f64, k: u32, index: usize) -> Result<u32> {
    if !p.is_finite() || p < 0.0 || p > 1.0 {
        return Err(Error::OffGrid { index, value: p, k });
    }
    let num = numeric::floor(p * k as f64 + 0.5);
    Ok(if num >= k as f64 { k } else { num as u32 })
}

/// Grid positions of all columns plus the moving set.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    k: u32,
    num: Vec<u32>,
    moving: Vec<u32>,
    steps: u64,
}

impl WalkState {
    /// State at positions `p` (each snapped to the grid; off-grid input is an
    /// error) with granularity `k`.
    pub fn init(p: &[f64], k: u32) -> Result<Self> {
        validate_granularity(k)?;
        let mut num = Vec::with_capacity(p.len());
        for (j, &pj) in p.iter().enumerate() {
            num.push(snap_to_grid(pj, k, j)?);
        }
        Ok(Self::from_numerators(num, k))
    }

    /// State directly from numerators (must be `≤ k`).
    pub(crate) fn from_numerators(num: Vec<u32>, k: u32) -> Self {
        debug_assert!(num.iter().all(|&v| v <= k));
        let moving = num
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0 && v != k)
            .map(|(j, _)| j as u32)
            .collect();
        WalkState {
            k,
            num,
            moving,
            steps: 0,
        }
    }

    /// Granularity.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of columns.
    pub fn len(&self) -> usize {
        self.num.len()
    }

    /// True when there are no columns at all.
    pub fn is_empty(&self) -> bool {
        self.num.is_empty()
    }

    /// Integer numerator of column `j`.
    pub fn numerator(&self, j: usize) -> u32 {
        self.num[j]
    }

    /// Fractional value of column `j`.
    pub fn value(&self, j: usize) -> f64 {
        grid_value(self.num[j], self.k)
    }

    /// All fractional values.
    pub fn values(&self) -> Vec<f64> {
        self.num.iter().map(|&v| grid_value(v, self.k)).collect()
    }

    /// Moving columns, ascending.
    pub fn moving(&self) -> &[u32] {
        &self.moving
    }

    /// Is column `j` still moving?
    pub fn is_moving(&self, j: usize) -> bool {
        self.num[j] != 0 && self.num[j] != self.k
    }

    /// Steps applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one ±1 numerator move per moving column (`signs` aligned with
    /// [`moving`](Self::moving)); returns the columns that froze, ascending.
    ///
    /// Frozen columns never move again: the moving set only shrinks.
    pub fn apply_signs(&mut self, signs: &[i8]) -> Vec<u32> {
        assert_eq!(signs.len(), self.moving.len(), "sign vector mismatch");
        let mut frozen = Vec::new();
        for (idx, &j) in self.moving.iter().enumerate() {
            let slot = &mut self.num[j as usize];
            debug_assert!(signs[idx] == 1 || signs[idx] == -1);
            if signs[idx] == 1 {
                *slot += 1;
            } else {
                *slot -= 1;
            }
            if *slot == 0 || *slot == self.k {
                frozen.push(j);
            }
        }
        if !frozen.is_empty() {
            let k = self.k;
            let num = &self.num;
            self.moving.retain(|&j| {
                let v = num[j as usize];
                v != 0 && v != k
            });
        }
        self.steps += 1;
        frozen
    }
}
