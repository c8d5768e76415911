//! Concentration wrappers: deviation guarantees for small probabilities.
//!
//! The plain integral fixer is sharpest when probabilities sit near 1/2. For
//! small `p` the classical route is *probability doubling*: repeatedly run
//! the fixer on a scaled instance (`a → 2pⱼ·aᵢⱼ`, all probabilities 1/2) to
//! decide which small columns double their probability and which drop to
//! zero, until every survivor reaches `p ≥ 1/2`, then fix once at full
//! strength. Budgets follow the schedules
//!
//! ```text
//! ε_ℓ = (1/16)·max(0.8^ℓ, 1/k)      (per-level spend)
//! α_ℓ = (1/2)·(1 − 0.8^ℓ + ℓ/k)     (cumulative guarantee)
//! ```
//!
//! which satisfy `α_ℓ ≥ ε_ℓ + (1+ε_ℓ)·α_{ℓ−1}` and `α_ℓ ∈ [1/10, 1]` for
//! `ℓ ∈ [1, k]` — so the final deviation is at most `α_ℓ·Δᵢ ≤ Δᵢ`.
//!
//! On top of the ladder sit the three theorem-shaped wrappers:
//!
//! * [`fix_hoeffding`] / [`fix_chernoff`] — shift `pⱼ → max(pⱼ, 1/n)`, halve
//!   the budget, optionally inflate the granularity, subsample, and report
//!   failure bounds with the Hoeffding exponent `min(Δ²/Σa², Δk/Σpa)` or the
//!   Chernoff exponent `min(Δ²/(Σpa·max a), Δ/max a, Δk/Σpa)`. Both produce
//!   the *same* vector; only the reported bounds differ.
//! * [`fix_bernstein`] — splits each row into dyadic coefficient buckets
//!   `aᵢⱼ ∈ (2^{ℓ−1}, 2^ℓ]`, gives bucket `ℓ` the budget share
//!   `Δ_{iℓ} = max(ε⁽¹⁾,ε⁽²⁾,ε⁽³⁾)·Δᵢ/100` (the shares always sum to at most
//!   `Δᵢ`), fixes the expanded system with the Chernoff wrapper, and pulls
//!   bad buckets back to their owning rows. The reported bound carries the
//!   variance exponent `min(Δ²/V, Δ/max a, Δk/μ)` with `μ = Σpⱼaᵢⱼ`,
//!   `V = Σpⱼaᵢⱼ²`.
//!
//! Every wrapper measures realized deviations directly against the caller's
//! original `p` and `Δ` and reports any violator as bad, so the contract
//! holds by construction whatever the constants.
//!
//! Under [`Profile::practical`](crate::config::Profile) the ladder and the
//! granularity inflations are bypassed (`direct_subsampling`): probabilities
//! are grid-rounded at the caller's `k` and fixed integrally once. The
//! doubling ladder's per-level budgets only separate from noise at
//! asymptotic scale; the direct route keeps the same output contract via the
//! same direct verification.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::integral::{fix_integral, IntegralFixResult};
use crate::matrix::ConstraintMatrix;
use crate::numeric;
use crate::partial::compute_prob_bad_partial;
use crate::walk::validate_granularity;

/// Which failure-bound formula a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Partial-fixing bound `c·exp(−(1/c)·min(Δ²/Σa², Δk/Σa))`.
    Partial,
    /// Hoeffding bound `c·exp(−(1/c)·min(e_hoef, k))`.
    Hoeffding,
    /// Chernoff bound `c·exp(−(1/c)·min(e_cher, k))`.
    Chernoff,
    /// Bernstein bound `(1/α)·exp(−α·min(Δ²/V, Δ/max a, Δk/μ))`.
    Bernstein,
}

impl BoundMode {
    /// Stable lowercase label (used by reports).
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMode::Partial => "partial",
            BoundMode::Hoeffding => "hoeffding",
            BoundMode::Chernoff => "chernoff",
            BoundMode::Bernstein => "bernstein",
        }
    }
}

/// Exponents and failure bound of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBound {
    /// Hoeffding exponent `min(Δ²/Σa², Δ·k/Σpa)` (∞ for empty rows).
    pub e_hoeffding: f64,
    /// Chernoff exponent `min(Δ²/(Σpa·max a), Δ/max a, Δ·k/Σpa)`.
    pub e_chernoff: f64,
    /// Variance exponent `min(Δ²/V, Δ/max a, Δ·k/μ)`.
    pub e_bernstein: f64,
    /// Failure bound under the report's mode, capped at 1.
    pub prob_bad: f64,
    /// Realized `Σⱼaᵢⱼ(pⱼ−qⱼ)` when a rounded vector exists.
    pub deviation: Option<f64>,
}

/// Failure bounds for all rows, plus the effective granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    /// Bound formula in use.
    pub mode: BoundMode,
    /// Caller's granularity.
    pub k: u32,
    /// Granularity actually walked (after any inflation).
    pub k_effective: u32,
    /// Global constant `c` of the active profile.
    pub c: f64,
    /// Per-row exponents and bounds.
    pub rows: Vec<RowBound>,
}

/// One doubling level of the subsampling ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplingPlan {
    /// Level index `ℓ = ⌈−log₂ min pⱼ⌉` when the level ran.
    pub level: u32,
    /// Budget spend `ε_ℓ`.
    pub epsilon: f64,
    /// Cumulative guarantee `α_ℓ`.
    pub alpha: f64,
    /// Columns with `pⱼ < 0.5^{ℓ−1}` (the ones decided this level).
    pub small_columns: usize,
    /// Granularity of the level's scaled fix.
    pub k_small: u32,
    /// Columns whose probability doubled.
    pub doubled: usize,
    /// Columns dropped to zero.
    pub dropped: usize,
    /// Rows whose conditions failed inside the level's fix, ascending
    /// (original row ids).
    pub bad_rows: Vec<u32>,
}

/// Result of the subsampling ladder (or its direct bypass).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplingOutcome {
    /// Rounded 0/1 vector.
    pub bits: Vec<u8>,
    /// Rows not certified within `α_ℓ·Δᵢ` (accumulated + direct), ascending.
    pub bad_rows: Vec<u32>,
    /// Realized deviations against the `p` this ladder was given.
    pub deviations: Vec<f64>,
    /// Per-level plans (empty on the direct path and in the base case).
    pub levels: Vec<SubsamplingPlan>,
    /// Total derandomization work.
    pub total_work: u64,
    /// Total walk steps run across all underlying fixes.
    pub total_steps: u64,
}

/// Per-level budget spend `ε_ℓ = (1/16)·max(0.8^ℓ, 1/k)`.
pub fn epsilon_schedule(level: u32, k: u32) -> f64 {
    let decay = numeric::pow(0.8, level as f64);
    (1.0 / 16.0) * decay.max(1.0 / k as f64)
}

/// Cumulative guarantee `α_ℓ = (1/2)·(1 − 0.8^ℓ + ℓ/k)`.
pub fn alpha_schedule(level: u32, k: u32) -> f64 {
    let decay = numeric::pow(0.8, level as f64);
    0.5 * (1.0 - decay + level as f64 / k as f64)
}

/// Doubling level needed for minimum probability `min_p ∈ (0, 1]`:
/// `⌈−log₂ min_p⌉`.
pub fn doubling_level(min_p: f64) -> u32 {
    if min_p >= 1.0 {
        return 0;
    }
    numeric::ceil(-numeric::log2(min_p)) as u32
}

fn validate_probabilities(p: &[f64], cols: usize) -> Result<()> {
    if p.len() != cols {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {cols} columns but {} probabilities were supplied",
            p.len()
        )));
    }
    for (j, &v) in p.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(alloc::format!(
                "probability for column {j} must lie in [0,1], got {v}"
            )));
        }
    }
    Ok(())
}

fn validate_budgets(deltas: &[f64], rows: usize) -> Result<()> {
    if deltas.len() != rows {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {rows} rows but {} budgets were supplied",
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
    Ok(())
}

/// Matrix restricted to surviving columns (entries of dropped columns removed).
fn restrict_columns(matrix: &ConstraintMatrix, alive: &[bool]) -> Result<ConstraintMatrix> {
    let mut triplets = Vec::new();
    for i in 0..matrix.rows() {
        let view = matrix.row(i);
        for (idx, &c) in view.cols.iter().enumerate() {
            if alive[c as usize] {
                triplets.push((i, c as usize, view.values[idx]));
            }
        }
    }
    ConstraintMatrix::from_triplets(matrix.rows(), matrix.cols(), &triplets)
}

fn merge_bad(target: &mut Vec<u32>, extra: impl IntoIterator<Item = u32>) {
    target.extend(extra);
    target.sort_unstable();
    target.dedup();
}

/// Round under the doubling ladder: probabilities double or drop level by
/// level until all survivors sit at `p ≥ 1/2`, then one integral fix
/// finishes (see module docs). Requires `pⱼ ≥ 1/2ᵏ` on the ladder path; the
/// practical profile's direct bypass accepts any `p ∈ [0,1]`.
pub fn fix_with_subsampling(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<SubsamplingOutcome> {
    validate_probabilities(p, matrix.cols())?;
    validate_budgets(deltas, matrix.rows())?;
    validate_granularity(k)?;

    if config.profile.direct_subsampling {
        let res = fix_integral(matrix, p, deltas, k, config)?;
        let total_steps = res.levels.iter().map(|l| l.steps).sum();
        let IntegralFixResult {
            bits,
            bad_rows,
            deviations,
            total_work,
            ..
        } = res;
        return Ok(SubsamplingOutcome {
            bits,
            bad_rows,
            deviations,
            levels: Vec::new(),
            total_work,
            total_steps,
        });
    }

    // Ladder path: probabilities must be expressible within k doublings.
    let mut min_p = f64::INFINITY;
    for (j, &v) in p.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::invalid(alloc::format!(
                "subsampling requires positive probabilities; column {j} has {v}"
            )));
        }
        min_p = min_p.min(v);
    }
    if !min_p.is_finite() {
        // No columns at all: the empty rounding.
        return Ok(SubsamplingOutcome {
            bits: Vec::new(),
            bad_rows: Vec::new(),
            deviations: matrix.deviations(&[], &[]),
            levels: Vec::new(),
            total_work: 0,
            total_steps: 0,
        });
    }
    let start_level = doubling_level(min_p);
    if start_level > k {
        return Err(Error::invalid(alloc::format!(
            "minimum probability {min_p} is below 1/2^{k}; raise probabilities or k"
        )));
    }

    let n = matrix.cols();
    let mut cur_p = p.to_vec();
    let mut alive = vec![true; n];
    let mut budgets = deltas.to_vec();
    let mut bad_rows: Vec<u32> = Vec::new();
    let mut levels: Vec<SubsamplingPlan> = Vec::new();
    let mut total_work: u64 = 0;
    let mut total_steps: u64 = 0;
    let final_alpha = alpha_schedule(start_level.max(1), k);

    loop {
        let level = {
            let mut mp = f64::INFINITY;
            for (j, &v) in cur_p.iter().enumerate() {
                if alive[j] {
                    mp = mp.min(v);
                }
            }
            if !mp.is_finite() {
                break; // every column dropped
            }
            doubling_level(mp)
        };
        if level <= 1 {
            break;
        }
        let epsilon = epsilon_schedule(level, k);
        let alpha = alpha_schedule(level, k);
        let threshold = numeric::pow(0.5, (level - 1) as f64);
        let small: Vec<u32> = (0..n as u32)
            .filter(|&j| alive[j as usize] && cur_p[j as usize] < threshold)
            .collect();
        debug_assert!(!small.is_empty());
        let k_small = if config.profile.inflate_granularity {
            let ks = (k as u64).pow(3);
            u32::try_from(ks)
                .map_err(|_| Error::invalid("inflated granularity k^3 exceeds u32"))?
        } else {
            k
        };
        validate_granularity(k_small)?;

        // Scaled decision instance over the small columns only.
        let mut triplets = Vec::new();
        for i in 0..matrix.rows() {
            let view = matrix.row(i);
            for (idx, &c) in view.cols.iter().enumerate() {
                if alive[c as usize] && cur_p[c as usize] < threshold {
                    triplets.push((i, c as usize, 2.0 * cur_p[c as usize] * view.values[idx]));
                }
            }
        }
        let small_matrix = ConstraintMatrix::from_triplets(matrix.rows(), n, &triplets)?;
        let small_p: Vec<f64> = (0..n)
            .map(|j| {
                if alive[j] && cur_p[j] < threshold {
                    0.5
                } else {
                    0.0
                }
            })
            .collect();
        let small_deltas: Vec<f64> = budgets.iter().map(|&d| epsilon * d).collect();
        let res = fix_integral(&small_matrix, &small_p, &small_deltas, k_small, config)?;
        total_work += res.total_work;
        total_steps += res.levels.iter().map(|l| l.steps).sum::<u64>();

        let mut doubled = 0usize;
        let mut dropped = 0usize;
        for &j in &small {
            if res.bits[j as usize] == 1 {
                cur_p[j as usize] *= 2.0;
                doubled += 1;
            } else {
                alive[j as usize] = false;
                dropped += 1;
            }
        }
        merge_bad(&mut bad_rows, res.bad_rows.iter().copied());
        levels.push(SubsamplingPlan {
            level,
            epsilon,
            alpha,
            small_columns: small.len(),
            k_small,
            doubled,
            dropped,
            bad_rows: res.bad_rows.clone(),
        });
        for b in budgets.iter_mut() {
            *b *= 1.0 + epsilon;
        }
    }

    // Base case: all survivors at p ≥ 1/2; one fix at the caller's k.
    let base_matrix = restrict_columns(matrix, &alive)?;
    let base_p: Vec<f64> = (0..n).map(|j| if alive[j] { cur_p[j] } else { 0.0 }).collect();
    let res = fix_integral(&base_matrix, &base_p, &budgets, k, config)?;
    total_work += res.total_work;
    total_steps += res.levels.iter().map(|l| l.steps).sum::<u64>();
    merge_bad(&mut bad_rows, res.bad_rows.iter().copied());

    let q: Vec<f64> = res.bits.iter().map(|&b| b as f64).collect();
    let deviations = matrix.deviations(p, &q);
    let alpha_budget: Vec<f64> = deltas.iter().map(|&d| final_alpha * d).collect();
    merge_bad(
        &mut bad_rows,
        deviations.iter().enumerate().filter_map(|(i, &d)| {
            (numeric::abs(d) > alpha_budget[i]).then_some(i as u32)
        }),
    );
    Ok(SubsamplingOutcome {
        bits: res.bits,
        bad_rows,
        deviations,
        levels,
        total_work,
        total_steps,
    })
}

/// Result of a theorem wrapper: a 0/1 vector plus certified accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationResult {
    /// Rounded 0/1 vector.
    pub bits: Vec<u8>,
    /// Rows not certified within `Δᵢ` (accumulated + direct), ascending.
    pub bad_rows: Vec<u32>,
    /// Realized deviations against the caller's `p`.
    pub deviations: Vec<f64>,
    /// Exponents and failure bounds.
    pub report: ExponentReport,
    /// Ladder levels run underneath (empty on the direct path).
    pub levels: Vec<SubsamplingPlan>,
    /// Total derandomization work.
    pub total_work: u64,
    /// Total walk steps run across all underlying fixes.
    pub total_steps: u64,
}

impl ConcentrationResult {
    /// The rounded vector as floats.
    pub fn values(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// Shared shift-subsample-verify core of the Hoeffding/Chernoff wrappers.
fn fix_shifted(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
    mode: BoundMode,
) -> Result<ConcentrationResult> {
    validate_probabilities(p, matrix.cols())?;
    validate_budgets(deltas, matrix.rows())?;
    validate_granularity(k)?;
    let n = matrix.cols().max(1);
    let floor = 1.0 / n as f64;
    let shifted: Vec<f64> = p.iter().map(|&v| v.max(floor)).collect();
    let halved: Vec<f64> = deltas.iter().map(|&d| 0.5 * d).collect();
    let k_eff = if config.profile.inflate_granularity {
        let factor = numeric::ceil(
            config.profile.c
                * config.profile.c
                * numeric::ln(2.0 * matrix.cols().max(1) as f64 * matrix.rows().max(1) as f64),
        ) as u64;
        u32::try_from(factor.max(1) * k as u64)
            .map_err(|_| Error::invalid("inflated granularity exceeds u32"))?
    } else {
        k
    };
    validate_granularity(k_eff)?;

    let sub = fix_with_subsampling(matrix, &shifted, &halved, k_eff, config)?;
    let q: Vec<f64> = sub.bits.iter().map(|&b| b as f64).collect();
    let deviations = matrix.deviations(p, &q);
    let mut bad_rows = sub.bad_rows.clone();
    merge_bad(
        &mut bad_rows,
        deviations
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| (numeric::abs(d) > deltas[i]).then_some(i as u32)),
    );
    let mut report = compute_failure_bounds(matrix, p, deltas, k, mode, config)?;
    report.k_effective = k_eff;
    for (rb, &d) in report.rows.iter_mut().zip(&deviations) {
        rb.deviation = Some(d);
    }
    Ok(ConcentrationResult {
        bits: sub.bits,
        bad_rows,
        deviations,
        report,
        levels: sub.levels,
        total_work: sub.total_work,
        total_steps: sub.total_steps,
    })
}

/// Round with a Hoeffding-shaped certificate:
/// `|Σⱼaᵢⱼ(pⱼ−qⱼ)| ≤ Δᵢ` outside the bad set, each row failing with bound
/// `c·exp(−(1/c)·min(Δᵢ²/Σa², Δᵢk/Σpa, k))`.
pub fn fix_hoeffding(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<ConcentrationResult> {
    fix_shifted(matrix, p, deltas, k, config, BoundMode::Hoeffding)
}

/// Round with a Chernoff-shaped certificate (same vector as
/// [`fix_hoeffding`]; the exponent gains the `Δᵢ/max aᵢⱼ` branch that is
/// sharper for small probabilities).
pub fn fix_chernoff(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<ConcentrationResult> {
    fix_shifted(matrix, p, deltas, k, config, BoundMode::Chernoff)
}

/// Dyadic coefficient bucket of one row: weights in `(2^{ℓ−1}, 2^ℓ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinBucket {
    /// Bucket exponent ℓ.
    pub exponent: i32,
    /// Member columns, ascending.
    pub members: Vec<u32>,
    /// `μ_{iℓ} = Σ_{j∈B} pⱼaᵢⱼ`.
    pub mu: f64,
    /// `V_{iℓ} = Σ_{j∈B} pⱼaᵢⱼ²`.
    pub v: f64,
    /// Budget share `Δ_{iℓ} = max(ε⁽¹⁾,ε⁽²⁾,ε⁽³⁾)·Δᵢ/100`.
    pub delta_share: f64,
}

/// Bucket decomposition of one row for the variance-shaped bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinRow {
    /// Nonempty buckets, ascending by exponent.
    pub buckets: Vec<BernsteinBucket>,
    /// `μᵢ = Σⱼ pⱼaᵢⱼ`.
    pub mu: f64,
    /// `Vᵢ = Σⱼ pⱼaᵢⱼ²`.
    pub v: f64,
    /// Largest nonempty bucket exponent (`None` for empty rows).
    pub lmax: Option<i32>,
    /// `γᵢ = Vᵢ/(Δᵢ·2^{ℓmax})`.
    pub gamma: f64,
    /// `αᵢ = 1/(c·ln(μᵢ/Δᵢ + 2))`.
    pub alpha: f64,
}

/// Bucket decomposition of a whole instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinPlan {
    /// Per-row decompositions.
    pub rows: Vec<BernsteinRow>,
}

/// Bucket exponent of weight `a > 0`: the ℓ with `a ∈ (2^{ℓ−1}, 2^ℓ]`.
fn bucket_exponent(a: f64) -> i32 {
    let (frac, exp) = libm::frexp(a); // a = frac·2^exp, frac ∈ [0.5, 1)
    if frac == 0.5 {
        exp - 1
    } else {
        exp
    }
}

/// Build the bucket decomposition and budget shares.
pub fn bernstein_plan(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    c: f64,
) -> Result<BernsteinPlan> {
    validate_probabilities(p, matrix.cols())?;
    validate_budgets(deltas, matrix.rows())?;
    let mut rows = Vec::with_capacity(matrix.rows());
    for i in 0..matrix.rows() {
        let view = matrix.row(i);
        let delta = deltas[i];
        let mut mu = 0.0;
        let mut v = 0.0;
        for (idx, &cidx) in view.cols.iter().enumerate() {
            let a = view.values[idx];
            let pj = p[cidx as usize];
            mu += pj * a;
            v += pj * a * a;
        }
        // Group the support into dyadic buckets, ascending by exponent.
        let mut buckets: Vec<BernsteinBucket> = Vec::new();
        {
            let mut by_exp: alloc::collections::BTreeMap<i32, (Vec<u32>, f64, f64)> =
                alloc::collections::BTreeMap::new();
            for (idx, &cidx) in view.cols.iter().enumerate() {
                let a = view.values[idx];
                let e = bucket_exponent(a);
                let slot = by_exp.entry(e).or_insert_with(|| (Vec::new(), 0.0, 0.0));
                slot.0.push(cidx);
                slot.1 += p[cidx as usize] * a;
                slot.2 += p[cidx as usize] * a * a;
            }
            for (e, (members, bmu, bv)) in by_exp {
                buckets.push(BernsteinBucket {
                    exponent: e,
                    members,
                    mu: bmu,
                    v: bv,
                    delta_share: 0.0,
                });
            }
        }
        let lmax = buckets.last().map(|b| b.exponent);
        let gamma = match lmax {
            Some(e) => v / (delta * numeric::pow2(e)),
            None => 0.0,
        };
        let alpha = 1.0 / (c * numeric::ln(mu / delta + 2.0));
        if let Some(e_max) = lmax {
            let root_gamma = numeric::sqrt(gamma).min(1.0);
            for b in buckets.iter_mut() {
                let e1 = numeric::sqrt(c * alpha * root_gamma * b.v / v);
                let e2 = numeric::pow(0.9, (e_max - b.exponent) as f64);
                let e3 = b.mu / mu;
                b.delta_share = e1.max(e2).max(e3) * delta / 100.0;
            }
        }
        rows.push(BernsteinRow {
            buckets,
            mu,
            v,
            lmax,
            gamma,
            alpha,
        });
    }
    Ok(BernsteinPlan { rows })
}

/// Round with a variance-shaped certificate: each row is split into dyadic
/// coefficient buckets with budget shares summing to at most `Δᵢ`, the
/// expanded system is fixed with the Chernoff wrapper, and a row is bad
/// exactly when one of its buckets is (or its direct deviation exceeds
/// `Δᵢ`).
pub fn fix_bernstein(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<ConcentrationResult> {
    validate_granularity(k)?;
    let plan = bernstein_plan(matrix, p, deltas, config.profile.c)?;

    // Expand: one constraint per nonempty bucket, original weights, shared
    // column space; remember each expanded row's owner.
    let mut triplets = Vec::new();
    let mut expanded_deltas = Vec::new();
    let mut owner: Vec<u32> = Vec::new();
    for (i, row) in plan.rows.iter().enumerate() {
        let view = matrix.row(i);
        for bucket in &row.buckets {
            let r = expanded_deltas.len();
            for &cidx in &bucket.members {
                let pos = view
                    .cols
                    .binary_search(&cidx)
                    .expect("bucket member must be a row entry");
                triplets.push((r, cidx as usize, view.values[pos]));
            }
            expanded_deltas.push(bucket.delta_share);
            owner.push(i as u32);
        }
    }
    let expanded = ConstraintMatrix::from_triplets(expanded_deltas.len(), matrix.cols(), &triplets)?;
    let k_inner = if config.profile.inflate_granularity {
        let factor = numeric::ceil(
            config.profile.c
                * numeric::ln((matrix.cols().max(2) as f64) * (matrix.rows().max(2) as f64)),
        ) as u64;
        u32::try_from(factor.max(1) * k as u64)
            .map_err(|_| Error::invalid("inflated granularity exceeds u32"))?
    } else {
        k
    };

    let inner = fix_chernoff(&expanded, p, &expanded_deltas, k_inner, config)?;
    let q = inner.values();
    let deviations = matrix.deviations(p, &q);
    let mut bad_rows: Vec<u32> = inner.bad_rows.iter().map(|&r| owner[r as usize]).collect();
    merge_bad(
        &mut bad_rows,
        deviations
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| (numeric::abs(d) > deltas[i]).then_some(i as u32)),
    );
    let mut report = compute_failure_bounds(matrix, p, deltas, k, BoundMode::Bernstein, config)?;
    report.k_effective = inner.report.k_effective;
    for (rb, &d) in report.rows.iter_mut().zip(&deviations) {
        rb.deviation = Some(d);
    }
    Ok(ConcentrationResult {
        bits: inner.bits,
        bad_rows,
        deviations,
        report,
        levels: inner.levels,
        total_work: inner.total_work,
        total_steps: inner.total_steps,
    })
}

/// Evaluate the per-row failure bounds without rounding anything.
///
/// Empty rows get infinite exponents and bound 0 by convention.
pub fn compute_failure_bounds(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    mode: BoundMode,
    config: &EngineConfig,
) -> Result<ExponentReport> {
    validate_probabilities(p, matrix.cols())?;
    validate_budgets(deltas, matrix.rows())?;
    let c = config.profile.c;
    let kf = k as f64;
    let mut rows = Vec::with_capacity(matrix.rows());
    for i in 0..matrix.rows() {
        let view = matrix.row(i);
        let delta = deltas[i];
        let sum = matrix.row_sum(i);
        let sum_sq = matrix.row_sum_sq(i);
        let max_a = matrix.row_max(i);
        let mut mu = 0.0;
        let mut var = 0.0;
        for (idx, &cidx) in view.cols.iter().enumerate() {
            let a = view.values[idx];
            mu += p[cidx as usize] * a;
            var += p[cidx as usize] * a * a;
        }
        let (e_hoeffding, e_chernoff, e_bernstein, prob_bad);
        if sum <= 0.0 {
            e_hoeffding = f64::INFINITY;
            e_chernoff = f64::INFINITY;
            e_bernstein = f64::INFINITY;
            prob_bad = 0.0;
        } else {
            e_hoeffding = (delta * delta / sum_sq).min(if mu > 0.0 {
                delta * kf / mu
            } else {
                f64::INFINITY
            });
            e_chernoff = if mu > 0.0 {
                (delta * delta / (mu * max_a))
                    .min(delta / max_a)
                    .min(delta * kf / mu)
            } else {
                delta / max_a
            };
            e_bernstein = if mu > 0.0 {
                (delta * delta / var).min(delta / max_a).min(delta * kf / mu)
            } else {
                delta / max_a
            };
            prob_bad = match mode {
                BoundMode::Partial => compute_prob_bad_partial(sum, sum_sq, delta, k, c),
                BoundMode::Hoeffding => c * numeric::exp(-e_hoeffding.min(kf) / c),
                BoundMode::Chernoff => c * numeric::exp(-e_chernoff.min(kf) / c),
                BoundMode::Bernstein => {
                    let alpha = 1.0 / (c * numeric::ln(mu / delta + 2.0));
                    (1.0 / alpha) * numeric::exp(-alpha * e_bernstein)
                }
            };
        }
        rows.push(RowBound {
            e_hoeffding,
            e_chernoff,
            e_bernstein,
            prob_bad: prob_bad.min(1.0),
            deviation: None,
        });
    }
    Ok(ExponentReport {
        mode,
        k,
        k_effective: k,
        c,
        rows,
    })
}
