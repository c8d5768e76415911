//! Fully integral rounding: repeated partial fixing until every column is 0/1.
//!
//! One partial fix leaves a (typically small) set of columns strictly inside
//! the grid. Rounding finishes by *recursing*: the surviving rows — those
//! whose output conditions held — keep only their still-moving, non-ignored
//! entries, their budgets shrink to `0.997·Δ`, and the residual instance is
//! fixed again. Because surviving rows shrank their non-ignored moving mass
//! to ≤ 0.99 of the row total, the mass-to-budget ratio contracts by
//! `0.99/0.997 < 1` per level, so after at most `⌈ln k / ln(1000/999)⌉ + 1`
//! levels either every column is integral or the remaining mass fits inside
//! the budget outright (at which point all-zeros is a valid completion).
//!
//! Two safeguards make termination unconditional without touching the
//! analysis: a level that freezes nothing and drops no row forces its
//! lowest-index moving column to the nearest endpoint, and hitting the depth
//! cap forces every remaining column. Finally the realized deviation
//! `|Σⱼ aᵢⱼ(pⱼ − qⱼ)|` of **every** row is checked against the original
//! budget directly, and any violator is added to the bad set — so the output
//! contract holds by construction, whatever path produced it.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::matrix::ConstraintMatrix;
use crate::numeric;
use crate::partial::{partial_fix, IgnoreSet};
use crate::walk::{grid_value, round_to_grid, validate_granularity, GRID_TOLERANCE};

/// Per-level budget shrink factor.
const LEVEL_BUDGET_SHRINK: f64 = 0.997;

/// What one recursion level did.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    /// Moving columns when the level started.
    pub moving_before: usize,
    /// Columns frozen by the level's walk.
    pub frozen_during: usize,
    /// Rows still carried by the level.
    pub rows_active: usize,
    /// Rows dropped (conditions failed) at this level.
    pub rows_dropped: usize,
    /// `max_i Σⱼaᵢⱼ / Δᵢ` over active rows at level start.
    pub mass_ratio: f64,
    /// Steps the level's walk ran.
    pub steps: u64,
}

/// Result of rounding to an exact 0/1 vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralFixResult {
    /// The rounded vector, one 0/1 value per column.
    pub bits: Vec<u8>,
    /// Rows whose realized deviation is not certified within budget
    /// (dropped at some level or failing the final direct check), ascending.
    pub bad_rows: Vec<u32>,
    /// Realized signed deviations `Σⱼ aᵢⱼ(pⱼ − qⱼ)` against the *input* `p`.
    pub deviations: Vec<f64>,
    /// Recursion levels, in order.
    pub levels: Vec<LevelReport>,
    /// Columns forced to an endpoint by a termination safeguard, ascending.
    pub forced_columns: Vec<u32>,
    /// Total derandomization work across all levels.
    pub total_work: u64,
}

impl IntegralFixResult {
    /// The rounded vector as floats.
    pub fn values(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// Depth cap: enough levels for the mass-to-budget ratio to contract below 1
/// from any start the grid can express.
fn depth_cap(k: u32) -> usize {
    let cap = numeric::ceil(numeric::ln(k as f64) / numeric::ln(1000.0 / 999.0)) as usize;
    cap + 1
}

/// Round `p` to an exact 0/1 vector, keeping every row's deviation within its
/// budget outside the reported bad set (see module docs).
///
/// `p` may be anywhere in `[0,1]`: it is first rounded to the `1/k` grid
/// (ties toward 1), and all guarantees are checked against the original `p`.
pub fn fix_integral(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<IntegralFixResult> {
    if p.len() != matrix.cols() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {} columns but {} positions were supplied",
            matrix.cols(),
            p.len()
        )));
    }
    if deltas.len() != matrix.rows() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {} rows but {} budgets were supplied",
            matrix.rows(),
            deltas.len()
        )));
    }
    validate_granularity(k)?;
    for (i, &d) in deltas.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::invalid(alloc::format!(
                "budget for row {i} must be finite and > 0, got {d}"
            )));
        }
    }

    let n = matrix.cols();
    let m = matrix.rows();

    // Already integral? Return it unchanged (even when all-zeros would also
    // qualify: the caller's vector wins).
    if p.iter()
        .all(|&v| numeric::abs(v) <= GRID_TOLERANCE || numeric::abs(v - 1.0) <= GRID_TOLERANCE)
    {
        let bits: Vec<u8> = p.iter().map(|&v| u8::from(v > 0.5)).collect();
        let q: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let deviations = matrix.deviations(p, &q);
        let bad_rows = direct_check(&deviations, deltas, &[]);
        return Ok(IntegralFixResult {
            bits,
            bad_rows,
            deviations,
            levels: Vec::new(),
            forced_columns: Vec::new(),
            total_work: 0,
        });
    }

    // Whole instance fits inside the budgets? All-zeros is a valid rounding.
    if (0..m).all(|i| matrix.row_sum(i) <= deltas[i]) {
        let q = vec![0.0; n];
        let deviations = matrix.deviations(p, &q);
        let bad_rows = direct_check(&deviations, deltas, &[]);
        return Ok(IntegralFixResult {
            bits: vec![0; n],
            bad_rows,
            deviations,
            levels: Vec::new(),
            forced_columns: Vec::new(),
            total_work: 0,
        });
    }

    // Grid-round the start (ties toward 1) and walk level by level.
    let mut nums: Vec<u32> = Vec::with_capacity(n);
    for (j, &v) in p.iter().enumerate() {
        nums.push(round_to_grid(v, k, j)?);
    }

    // Inner walks stop once frozen (the tail provably can't change state) and
    // skip tracing: only their outputs feed the recursion.
    let mut level_config = config.clone();
    level_config.early_exit = true;
    level_config.record_potential_trace = false;
    level_config.record_history = false;

    // Active subinstance: original row ids, their current entries, budgets.
    let mut active_rows: Vec<u32> = (0..m as u32).collect();
    let mut row_entries: Vec<Vec<(u32, f64)>> = (0..m)
        .map(|i| {
            let view = matrix.row(i);
            view.cols
                .iter()
                .zip(view.values)
                .map(|(&c, &v)| (c, v))
                .collect()
        })
        .collect();
    let mut budgets: Vec<f64> = deltas.to_vec();

    let mut levels: Vec<LevelReport> = Vec::new();
    let mut forced_columns: Vec<u32> = Vec::new();
    let mut dropped_rows: Vec<u32> = Vec::new();
    let mut total_work: u64 = 0;
    let cap = depth_cap(k);

    loop {
        let moving: Vec<u32> = (0..n as u32)
            .filter(|&j| nums[j as usize] != 0 && nums[j as usize] != k)
            .collect();
        if moving.is_empty() {
            break;
        }
        // Base case: remaining mass fits inside every active budget — zero
        // out whatever still moves.
        let mass_ratio = active_rows
            .iter()
            .map(|&r| {
                let s: f64 = row_entries[r as usize].iter().map(|&(_, v)| v).sum();
                s / budgets[r as usize]
            })
            .fold(0.0f64, f64::max);
        if mass_ratio <= 1.0 {
            for &j in &moving {
                nums[j as usize] = 0;
            }
            break;
        }
        if levels.len() >= cap {
            for &j in &moving {
                nums[j as usize] = if 2 * nums[j as usize] >= k { k } else { 0 };
                forced_columns.push(j);
            }
            break;
        }

        // Build the level instance: active rows over the full column space.
        let level_matrix = {
            let mut triplets = Vec::new();
            for (li, &r) in active_rows.iter().enumerate() {
                for &(c, v) in &row_entries[r as usize] {
                    triplets.push((li, c as usize, v));
                }
            }
            ConstraintMatrix::from_triplets(active_rows.len(), n, &triplets)?
        };
        let level_deltas: Vec<f64> = active_rows.iter().map(|&r| budgets[r as usize]).collect();
        let level_p: Vec<f64> = nums.iter().map(|&v| grid_value(v, k)).collect();
        let res = partial_fix(&level_matrix, &level_p, &level_deltas, k, &level_config)?;
        total_work += res.diagnostics.derandomize_work;

        let frozen_during = moving.len()
            - res
                .numerators
                .iter()
                .filter(|&&v| v != 0 && v != k)
                .count();
        levels.push(LevelReport {
            moving_before: moving.len(),
            frozen_during,
            rows_active: active_rows.len(),
            rows_dropped: res.bad_rows.len(),
            mass_ratio,
            steps: res.diagnostics.steps_run,
        });
        nums.copy_from_slice(&res.numerators);

        // Survivors keep their still-moving, non-ignored entries at a
        // shrunken budget.
        let mut next_rows = Vec::with_capacity(active_rows.len());
        for (li, &r) in active_rows.iter().enumerate() {
            if res.bad_rows.binary_search(&(li as u32)).is_ok() {
                dropped_rows.push(r);
                continue;
            }
            let ignore = &res.classification.rows[li].ignore;
            row_entries[r as usize].retain(|&(c, _)| {
                let still_moving = nums[c as usize] != 0 && nums[c as usize] != k;
                still_moving
                    && match ignore {
                        IgnoreSet::AllColumns => false,
                        IgnoreSet::Columns(_) => !ignore.contains(c),
                    }
            });
            budgets[r as usize] *= LEVEL_BUDGET_SHRINK;
            next_rows.push(r);
        }
        let no_rows_dropped = next_rows.len() == active_rows.len();
        active_rows = next_rows;

        // Safeguard: a level that achieved nothing forces one column, so
        // every level makes progress.
        if frozen_during == 0 && no_rows_dropped {
            let j = *moving
                .iter()
                .find(|&&j| nums[j as usize] != 0 && nums[j as usize] != k)
                .expect("moving set unchanged");
            nums[j as usize] = if 2 * nums[j as usize] >= k { k } else { 0 };
            forced_columns.push(j);
        }
    }

    let bits: Vec<u8> = nums.iter().map(|&v| u8::from(2 * v >= k)).collect();
    debug_assert!(nums.iter().all(|&v| v == 0 || v == k));
    let q: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
    let deviations = matrix.deviations(p, &q);
    dropped_rows.sort_unstable();
    dropped_rows.dedup();
    let bad_rows = direct_check(&deviations, deltas, &dropped_rows);
    Ok(IntegralFixResult {
        bits,
        bad_rows,
        deviations,
        levels,
        forced_columns,
        total_work,
    })
}

/// Union of already-dropped rows and rows whose realized deviation exceeds
/// the budget, ascending.
fn direct_check(deviations: &[f64], deltas: &[f64], dropped: &[u32]) -> Vec<u32> {
    let mut bad: Vec<u32> = dropped.to_vec();
    for (i, (&d, &budget)) in deviations.iter().zip(deltas).enumerate() {
        if numeric::abs(d) > budget {
            bad.push(i as u32);
        }
    }
    bad.sort_unstable();
    bad.dedup();
    bad
}
