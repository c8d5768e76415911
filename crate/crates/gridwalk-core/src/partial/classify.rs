//! Row classification and dyadic weight bands.
//!
//! Before the walk starts, every row is placed in one of three regimes by
//! comparing its budget `Δᵢ` against its total mass and weight variance:
//!
//! * **Wide budget** (`Δᵢ ≥ Σⱼ aᵢⱼ`): the row can never deviate past its
//!   budget, so it is excluded from the potential and every column of it is
//!   ignorable. Empty rows land here.
//! * **Narrow budget** (`Δᵢ² < Σⱼ aᵢⱼ²`): the failure bound is ≥ 1 and the
//!   analysis offers nothing; no columns are ignored. (The practical profile
//!   still guides such rows — drift potentials plus spread tracking for
//!   their bulk bands, with the ignore set kept empty — see
//!   [`Profile::guide_boring_small`](crate::config::Profile). Spread
//!   pressure is what pushes columns toward the 0/1 boundaries, so without
//!   it a walk over purely narrow rows balances forever and never freezes
//!   anything.)
//! * **Tracked** (everything else): drift and spread potentials apply.
//!
//! A tracked row's support is split into *bands* `B_{i,e} = {j : 2^e ≤ aᵢⱼ <
//! 2^{e+1}}`. A band is a *singleton* if `|B| = 1`, *sparse* if
//! `1 < |B| < Δᵢ²/Σⱼaᵢⱼ²`, and *bulk* otherwise. Singleton and sparse band
//! members form the row's ignorable columns (their total weight is at most
//! `10·Δᵢ`, which the acceptance suite checks directly). Bulk bands are
//! tracked through spread potentials, but only one *representative* per
//! band size — the one with the largest exponent — since same-size bands
//! obey identical spread dynamics and the largest weights dominate.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use crate::config::Profile;
use crate::error::{Error, Result};
use crate::matrix::ConstraintMatrix;
use crate::numeric;

/// Budget regime of a row (see module docs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowClass {
    /// `Δᵢ ≥ Σⱼ aᵢⱼ`: can never fail; carries no potential.
    WideBudget,
    /// `Δᵢ² < Σⱼ aᵢⱼ²`: failure bound ≥ 1; no ignorable columns.
    NarrowBudget,
    /// Potential-tracked row.
    Tracked,
}

/// Band kind (see module docs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    /// Exactly one member; ignorable.
    Singleton,
    /// Fewer members than `Δᵢ²/Σaᵢⱼ²`; ignorable.
    Sparse,
    /// Tracked through spread potentials.
    Bulk,
}

/// One dyadic weight band of a tracked row.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    /// Weight exponent `e`: members satisfy `2^e ≤ aᵢⱼ < 2^{e+1}`.
    pub exponent: i32,
    /// Range into [`RowClassification::members`] listing the member columns,
    /// ascending.
    pub members: Range<usize>,
    /// Kind under the row's budget.
    pub kind: BandKind,
    /// True for the largest-exponent bulk band of each band size.
    pub representative: bool,
}

impl Band {
    /// Number of member columns.
    pub fn len(&self) -> usize {
        self.members.end - self.members.start
    }

    /// True if the band has no members (never constructed, but keeps clippy
    /// honest about `len`).
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Columns a row is allowed to ignore when its output conditions are checked.
#[derive(Debug, Clone, PartialEq)]
pub enum IgnoreSet {
    /// Every column (wide-budget rows).
    AllColumns,
    /// An explicit ascending list (possibly empty).
    Columns(Vec<u32>),
}

impl IgnoreSet {
    /// True if column `j` is ignorable.
    pub fn contains(&self, j: u32) -> bool {
        match self {
            IgnoreSet::AllColumns => true,
            IgnoreSet::Columns(cols) => cols.binary_search(&j).is_ok(),
        }
    }

    /// Number of listed columns (`None` for "all").
    pub fn listed_len(&self) -> Option<usize> {
        match self {
            IgnoreSet::AllColumns => None,
            IgnoreSet::Columns(cols) => Some(cols.len()),
        }
    }
}

/// Everything the walk needs to know about one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPlan {
    /// Budget regime.
    pub class: RowClass,
    /// Drift multiplier `λᵢ = (1/s)·min(Δᵢ/Σaᵢⱼ², k/Σaᵢⱼ)` (0 for wide-budget
    /// and empty rows).
    pub lambda: f64,
    /// Failure bound `c·exp(−(1/c)·min(Δᵢ²/Σaᵢⱼ², Δᵢ·k/Σaᵢⱼ))`, uncapped.
    pub prob_bad: f64,
    /// Budget `Δᵢ`.
    pub delta: f64,
    /// `Σⱼ aᵢⱼ`.
    pub sum: f64,
    /// `Σⱼ aᵢⱼ²`.
    pub sum_sq: f64,
    /// `maxⱼ aᵢⱼ`.
    pub max: f64,
    /// Ignorable columns.
    pub ignore: IgnoreSet,
    /// `Σ_{j ignorable} aᵢⱼ` (for wide-budget rows, the whole row sum).
    pub ignore_mass: f64,
    /// Dyadic bands (tracked rows only; empty otherwise).
    pub bands: Vec<Band>,
}

/// Classification of all rows of a matrix under budgets `Δ` and granularity `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowClassification {
    /// Per-row plans.
    pub rows: Vec<RowPlan>,
    /// Arena of band member columns referenced by [`Band::members`].
    pub members: Vec<u32>,
}

/// Exact `⌊log₂ a⌋` for `a > 0`, via the float exponent (no rounding).
fn weight_exponent(a: f64) -> i32 {
    let (frac, exp) = libm::frexp(a); // a = frac·2^exp, frac ∈ [0.5, 1)
    debug_assert!((0.5..1.0).contains(&frac));
    let _ = frac;
    exp - 1
}

/// Failure bound of one row: `c·exp(−(1/c)·min(Δ²/Σa², Δ·k/Σa))`, uncapped.
///
/// Empty rows get 0 (they can never deviate). As `Δ → 0⁺` the bound tends to
/// `c`; callers that report probabilities cap at 1 themselves.
pub fn compute_prob_bad_partial(sum: f64, sum_sq: f64, delta: f64, k: u32, c: f64) -> f64 {
    if sum <= 0.0 {
        return 0.0;
    }
    let e1 = delta * delta / sum_sq;
    let e2 = delta * k as f64 / sum;
    c * numeric::exp(-e1.min(e2) / c)
}

/// Carve one row's support into dyadic weight bands (see module docs).
///
/// Singleton and sparse bands are appended to `ignore_cols` only when
/// `collect_ignore` is set; guided narrow-budget rows carve bands for spread
/// tracking but keep their ignore set empty.
fn carve_bands(
    cols: &[u32],
    values: &[f64],
    sparse_threshold: f64,
    collect_ignore: bool,
    members: &mut Vec<u32>,
    ignore_cols: &mut Vec<u32>,
) -> Vec<Band> {
    let mut by_exponent: BTreeMap<i32, Vec<u32>> = BTreeMap::new();
    for (idx, &c) in cols.iter().enumerate() {
        by_exponent
            .entry(weight_exponent(values[idx]))
            .or_default()
            .push(c);
    }
    let mut bands = Vec::with_capacity(by_exponent.len());
    // Bulk bands grouped by size; remember the largest exponent per size.
    let mut best_by_size: BTreeMap<usize, i32> = BTreeMap::new();
    for (&exponent, band_cols) in &by_exponent {
        let kind = if band_cols.len() == 1 {
            BandKind::Singleton
        } else if (band_cols.len() as f64) < sparse_threshold {
            BandKind::Sparse
        } else {
            BandKind::Bulk
        };
        if kind != BandKind::Bulk {
            if collect_ignore {
                ignore_cols.extend_from_slice(band_cols);
            }
        } else {
            best_by_size
                .entry(band_cols.len())
                .and_modify(|e| *e = (*e).max(exponent))
                .or_insert(exponent);
        }
        let start = members.len();
        members.extend_from_slice(band_cols);
        bands.push(Band {
            exponent,
            members: start..members.len(),
            kind,
            representative: false,
        });
    }
    for band in &mut bands {
        if band.kind == BandKind::Bulk && best_by_size.get(&band.len()) == Some(&band.exponent) {
            band.representative = true;
        }
    }
    bands
}

/// Classify every row of `matrix` under budgets `deltas` (see module docs).
pub fn classify_rows(
    matrix: &ConstraintMatrix,
    deltas: &[f64],
    k: u32,
    profile: &Profile,
) -> Result<RowClassification> {
    if deltas.len() != matrix.rows() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {} rows but {} budgets were supplied",
            matrix.rows(),
            deltas.len()
        )));
    }
    for (i, &d) in deltas.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::invalid(alloc::format!(
                "budget for row {i} must be finite and > 0, got {d}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(matrix.rows());
    let mut members: Vec<u32> = Vec::new();
    for i in 0..matrix.rows() {
        let delta = deltas[i];
        let sum = matrix.row_sum(i);
        let sum_sq = matrix.row_sum_sq(i);
        let max = matrix.row_max(i);
        if delta >= sum {
            rows.push(RowPlan {
                class: RowClass::WideBudget,
                lambda: 0.0,
                prob_bad: compute_prob_bad_partial(sum, sum_sq, delta, k, profile.c),
                delta,
                sum,
                sum_sq,
                max,
                ignore: IgnoreSet::AllColumns,
                ignore_mass: sum,
                bands: Vec::new(),
            });
            continue;
        }
        let lambda = (delta / sum_sq).min(k as f64 / sum) / profile.lambda_scale;
        let prob_bad = compute_prob_bad_partial(sum, sum_sq, delta, k, profile.c);
        if delta * delta < sum_sq {
            // Guided narrow rows still carve bands so their bulk bands get
            // spread tracking; their ignore set stays empty. The sparse
            // threshold Δ²/Σa² < 1 here, so no band classifies as sparse.
            let bands = if profile.guide_boring_small {
                let view = matrix.row(i);
                let mut no_ignore: Vec<u32> = Vec::new();
                let bands = carve_bands(
                    view.cols,
                    view.values,
                    delta * delta / sum_sq,
                    false,
                    &mut members,
                    &mut no_ignore,
                );
                debug_assert!(no_ignore.is_empty());
                bands
            } else {
                Vec::new()
            };
            rows.push(RowPlan {
                class: RowClass::NarrowBudget,
                lambda,
                prob_bad,
                delta,
                sum,
                sum_sq,
                max,
                ignore: IgnoreSet::Columns(Vec::new()),
                ignore_mass: 0.0,
                bands,
            });
            continue;
        }

        // Tracked: carve the support into dyadic bands.
        let view = matrix.row(i);
        let mut ignore_cols: Vec<u32> = Vec::new();
        let bands = carve_bands(
            view.cols,
            view.values,
            delta * delta / sum_sq, // ≥ 1 here
            true,
            &mut members,
            &mut ignore_cols,
        );
        ignore_cols.sort_unstable();
        let ignore_mass: f64 = {
            let mut acc = 0.0;
            for (idx, &c) in view.cols.iter().enumerate() {
                if ignore_cols.binary_search(&c).is_ok() {
                    acc += view.values[idx];
                }
            }
            acc
        };
        rows.push(RowPlan {
            class: RowClass::Tracked,
            lambda,
            prob_bad,
            delta,
            sum,
            sum_sq,
            max,
            ignore: IgnoreSet::Columns(ignore_cols),
            ignore_mass,
            bands,
        });
    }
    Ok(RowClassification { rows, members })
}

impl RowClassification {
    /// Member columns of a band.
    pub fn band_members(&self, band: &Band) -> &[u32] {
        &self.members[band.members.clone()]
    }
}
