//! The potential-guided walk: deterministic partial fixing on the 1/k grid.
//!
//! Starting from grid positions `p`, the walk takes `T` steps; in each step
//! every still-moving column moves by ±1/k, with the sign vector chosen by
//! derandomizing a pairwise-independent space against a potential built from
//! the row classification:
//!
//! * per guided row, two *drift* potentials with per-step factors
//!   `1 ± λᵢ·Sᵢ + Sᵢ²λᵢ²·…` where `Sᵢ = λᵢ·Σⱼ aᵢⱼ·x̄ⱼ/k` over the row's active
//!   entries, compensated by `1 + λᵢ²Σaᵢⱼ²/k²` per step;
//! * per representative band, a *spread* potential tracking the pairwise
//!   spread statistic `y_B = Σ_{j,j'∈B}(p_j − p_{j'})²`, with factor
//!   `1 − λ'·Δy + λ'²·(surrogate + 100β⁴/k³)` and compensator
//!   `1 − λ'β²/(100k²) + λ'²·(100β³/k²)(1 + β/k)`, weighted by
//!   `exp(−min(β,k)/d)`.
//!
//! Under pairwise independence the conditional expectation of each factor is
//! at most its compensator, and the derandomized sign vector achieves a value
//! at most the expectation, so the total potential never increases. The
//! potential starts below `Σᵢ probᵢ·(2 + Σ_B weight)`, and a row whose
//! potential term would have to exceed comparable size for it to end badly
//! therefore fails only with the certified bound `probᵢ`.
//!
//! Every quantity that admits one is tracked in exact integer arithmetic
//! (band sums are sums of grid numerators); everything else is accumulated
//! as running products with exact power-of-two rescaling, so results are
//! bit-identical across thread counts and feature sets.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::matrix::ConstraintMatrix;
use crate::numeric;
use crate::pairwise::{derandomize, PairwiseSpace, QuadraticObjective};
use crate::partial::classify::{classify_rows, RowClass, RowClassification};
use crate::partial::support::ActiveSupport;
use crate::walk::{grid_value, WalkState};

/// Factor by which non-ignored mass (or squared mass) must shrink for a row
/// to satisfy its first two output conditions.
const MASS_SHRINK: f64 = 0.99;

/// Fixed constant in the spread compensator and surrogate companion terms
/// (`β²/(100k²)` additive increment, `100β⁴/k³` companion, `100β³/k²·(1+β/k)`
/// compensator). Part of the potential's definition, not a tunable profile
/// constant.
const SPREAD_C: f64 = 100.0;

/// Drift potentials of one guided row.
struct DriftTracker {
    row: u32,
    lambda: f64,
    /// Reciprocal of the per-step compensator `1 + λ²Σa²/k²`.
    inv_comp: f64,
    /// Running `probᵢ·Π factors·comp⁻ᵗ`, shared-scale (see `scale_log`).
    u1: f64,
    u2: f64,
}

/// Spread potential of one representative band.
struct SpreadTracker {
    /// Band size β (all members, frozen included).
    beta_int: i64,
    beta: f64,
    /// Spread multiplier `λ' = k/(s·β·(β+k))`.
    lambda2: f64,
    /// Reciprocal of the per-step compensator.
    inv_comp: f64,
    /// Additive-mode per-step spread increment `β²/(100k²)`.
    add_inc: f64,
    /// Surrogate companion constant `100β⁴/k³`.
    quart: f64,
    /// Running `probᵢ·weight·Π factors·comp⁻ᵗ`, shared-scale.
    u: f64,
    /// Exact `Σ_B numⱼ` over all members.
    sum_num: i64,
    /// Exact `Σ_B numⱼ²` over all members.
    sum_num_sq: i128,
    /// Switched to additive spread tracking (one-way).
    additive: bool,
    /// Current spread statistic `y_B` (exact while tracking exactly).
    y: f64,
}

/// One recorded step: the signed move of every column that moved.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `(column, ±1)` numerator moves, ascending by column. Empty once
    /// everything is frozen.
    pub moves: Vec<(u32, i8)>,
}

/// Outcome of the three output conditions for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAudit {
    /// Budget regime the row was classified into.
    pub class: RowClass,
    /// Certified failure bound (uncapped; cap at 1 when reading as a
    /// probability).
    pub prob_bad: f64,
    /// Realized signed deviation `Σⱼ aᵢⱼ(pⱼ − qⱼ)` from the walk's start.
    pub deviation: f64,
    /// Non-ignored still-moving mass shrank to ≤ 0.99 of the row total.
    pub mass_ok: bool,
    /// Same for squared weights.
    pub variance_ok: bool,
    /// `|deviation| ≤ fraction·Δᵢ`.
    pub deviation_ok: bool,
    /// Row failed at least one condition (never true for wide-budget rows).
    pub bad: bool,
}

/// Run-shape measurements of one walk.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDiagnostics {
    /// Steps advanced (including closed-form frozen tail steps).
    pub steps_run: u64,
    /// Steps in which at least one column moved.
    pub active_steps: u64,
    /// Total derandomization work `Σ (L+1)·‖f_t‖`.
    pub derandomize_work: u64,
    /// Largest per-step objective complexity `‖f_t‖`.
    pub max_objective_complexity: u64,
    /// Potential before the first step.
    pub pot_initial: f64,
    /// Potential after the last step.
    pub pot_final: f64,
    /// Per-step potential, `pot_trace[t]` = after step `t`
    /// (`pot_trace[0] = pot_initial`). Empty unless tracing is on.
    pub pot_trace: Vec<f64>,
    /// Per-step objective complexity (0 for frozen tail steps), same gating.
    pub complexity_trace: Vec<u64>,
    /// Post-step moving-column counts, same gating.
    pub moving_trace: Vec<u32>,
}

/// Result of a partial fixing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFixResult {
    /// Grid granularity.
    pub k: u32,
    /// Final grid numerators, one per column.
    pub numerators: Vec<u32>,
    /// Row classification the walk ran under.
    pub classification: RowClassification,
    /// Per-row condition outcomes.
    pub audits: Vec<RowAudit>,
    /// Rows failing at least one condition, ascending.
    pub bad_rows: Vec<u32>,
    /// Run measurements.
    pub diagnostics: PartialDiagnostics,
    /// Per-step moves (present only when history recording is on).
    pub history: Option<Vec<StepRecord>>,
}

impl PartialFixResult {
    /// Final fractional values `numerator / k`.
    pub fn values(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&v| grid_value(v, self.k))
            .collect()
    }

    /// Columns still strictly inside the grid, ascending.
    pub fn moving_columns(&self) -> Vec<u32> {
        self.numerators
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0 && v != self.k)
            .map(|(j, _)| j as u32)
            .collect()
    }
}

/// Shared running-product ledger scale: true values are `u·exp(scale_log)`.
struct Scale {
    log: f64,
}

impl Scale {
    const UP: f64 = 1e140;
    const DOWN: f64 = 1e-140;
    /// 2⁵¹² and 2⁻⁵¹²: rescaling multipliers are exact powers of two, so the
    /// relative structure of the ledger never moves.
    const SHIFT_BITS: i32 = 512;

    fn rebalance(&mut self, drift: &mut [DriftTracker], spread: &mut [SpreadTracker]) {
        let mut mx = 0.0f64;
        for d in drift.iter() {
            mx = mx.max(d.u1).max(d.u2);
        }
        for s in spread.iter() {
            mx = mx.max(s.u);
        }
        if mx == 0.0 || !mx.is_finite() {
            return;
        }
        let shift: i32 = if mx < Self::DOWN {
            Self::SHIFT_BITS
        } else if mx > Self::UP {
            -Self::SHIFT_BITS
        } else {
            return;
        };
        let mult = numeric::pow2(shift);
        for d in drift.iter_mut() {
            d.u1 *= mult;
            d.u2 *= mult;
        }
        for s in spread.iter_mut() {
            s.u *= mult;
        }
        self.log -= shift as f64 * core::f64::consts::LN_2;
    }

    /// Current total potential (canonical summation order: drift trackers,
    /// then spread trackers).
    fn pot(&self, drift: &[DriftTracker], spread: &[SpreadTracker]) -> f64 {
        let mut acc = 0.0;
        for d in drift {
            acc += d.u1 + d.u2;
        }
        for s in spread {
            acc += s.u;
        }
        acc * numeric::exp(self.log)
    }
}

/// Deterministically move every fractional column to the grid boundary (or
/// leave it usefully placed), so that each row deviates by more than its
/// budget `Δᵢ` only if it is reported in `bad_rows` — and the certified
/// failure bounds on those events sum to `Σᵢ probᵢ`.
///
/// `p` are starting positions (each within [`crate::walk::GRID_TOLERANCE`] of
/// the 1/k grid), `deltas` the per-row budgets. The returned positions are a
/// *partial* fixing: most columns reach 0 or 1, and every row either keeps
/// its three output conditions (shrunken non-ignored moving mass, shrunken
/// squared mass, bounded deviation) or is listed in `bad_rows`.
pub fn partial_fix(
    matrix: &ConstraintMatrix,
    p: &[f64],
    deltas: &[f64],
    k: u32,
    config: &EngineConfig,
) -> Result<PartialFixResult> {
    if p.len() != matrix.cols() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {} columns but {} positions were supplied",
            matrix.cols(),
            p.len()
        )));
    }
    let mut walk = WalkState::init(p, k)?;
    let classification = classify_rows(matrix, deltas, k, &config.profile)?;
    let p0 = walk.values();
    let kf = k as f64;
    let inv_k = 1.0 / kf;
    let inv_k2 = inv_k * inv_k;
    let profile = &config.profile;

    // ---- trackers ----
    let mut drift: Vec<DriftTracker> = Vec::new();
    let mut spread: Vec<SpreadTracker> = Vec::new();
    let mut member_ranges: Vec<(u32, core::ops::Range<usize>)> = Vec::new();
    for (i, plan) in classification.rows.iter().enumerate() {
        let guided = match plan.class {
            RowClass::WideBudget => false,
            RowClass::NarrowBudget => profile.guide_boring_small,
            RowClass::Tracked => true,
        };
        // ln prob, without the round trip through a possibly-underflowing exp.
        let ln_prob = numeric::ln(profile.c)
            - (plan.delta * plan.delta / plan.sum_sq).min(plan.delta * kf / plan.sum) / profile.c;
        if guided {
            let comp = 1.0 + plan.lambda * plan.lambda * plan.sum_sq * inv_k2;
            drift.push(DriftTracker {
                row: i as u32,
                lambda: plan.lambda,
                inv_comp: 1.0 / comp,
                u1: ln_prob,
                u2: ln_prob,
            });
        }
        if guided {
            for band in &plan.bands {
                if !band.representative {
                    continue;
                }
                let beta_int = band.len() as i64;
                let beta = beta_int as f64;
                let lambda2 = kf / (profile.pair_lambda_scale * beta * (beta + kf));
                let weight_log = -(beta.min(kf)) / profile.spread_weight_divisor;
                let add_inc = beta * beta / (SPREAD_C * kf * kf);
                let quart = SPREAD_C * beta * beta * beta * beta / (kf * kf * kf);
                let comp = 1.0 - lambda2 * add_inc
                    + lambda2 * lambda2 * (SPREAD_C * beta * beta * beta / (kf * kf))
                        * (1.0 + beta / kf);
                let mut sum_num: i64 = 0;
                let mut sum_num_sq: i128 = 0;
                for &c in classification.band_members(band) {
                    let v = walk.numerator(c as usize) as i64;
                    sum_num += v;
                    sum_num_sq += (v * v) as i128;
                }
                let y = (2 * beta_int as i128 * sum_num_sq
                    - 2 * (sum_num as i128) * (sum_num as i128)) as f64
                    * inv_k2;
                spread.push(SpreadTracker {
                    beta_int,
                    beta,
                    lambda2,
                    inv_comp: 1.0 / comp,
                    add_inc,
                    quart,
                    u: ln_prob + weight_log,
                    sum_num,
                    sum_num_sq,
                    additive: false,
                    y,
                });
                member_ranges.push((i as u32, band.members.clone()));
            }
        }
    }

    // The u fields currently hold logs; exponentiate against the shared scale
    // so relatively tiny start values underflow gracefully instead of zeroing
    // everything when all bounds are astronomically small.
    let mut scale = Scale { log: 0.0 };
    {
        let mut mx = f64::NEG_INFINITY;
        for d in &drift {
            mx = mx.max(d.u1);
        }
        for s in &spread {
            mx = mx.max(s.u);
        }
        if mx.is_finite() {
            scale.log = mx;
            for d in &mut drift {
                d.u1 = numeric::exp(d.u1 - mx);
                d.u2 = numeric::exp(d.u2 - mx);
            }
            for s in &mut spread {
                s.u = numeric::exp(s.u - mx);
            }
        }
    }

    let mut support = {
        let mut active = vec![false; matrix.cols()];
        for &j in walk.moving() {
            active[j as usize] = true;
        }
        let member_slices: Vec<(u32, &[u32])> = member_ranges
            .iter()
            .map(|(r, range)| (*r, &classification.members[range.clone()]))
            .collect();
        ActiveSupport::new(matrix, &active, &member_slices)
    };

    // ---- the walk ----
    let total_steps = config.steps_for(k);
    let trace_on = config.record_potential_trace;
    let mut pot_trace: Vec<f64> = Vec::new();
    let mut complexity_trace: Vec<u64> = Vec::new();
    let mut moving_trace: Vec<u32> = Vec::new();
    let pot_initial = scale.pot(&drift, &spread);
    if trace_on {
        pot_trace.reserve(total_steps as usize + 1);
        pot_trace.push(pot_initial);
    }
    let mut history: Option<Vec<StepRecord>> = config.record_history.then(Vec::new);
    let mut local_of: Vec<u32> = vec![0; matrix.cols()];
    let mut cbuf: Vec<f64> = Vec::new();
    let mut obj = QuadraticObjective::with_capacity(0, drift.len() + 2 * spread.len() + 1);
    let mut work: u64 = 0;
    let mut max_complexity: u64 = 0;
    let mut steps_run: u64 = 0;
    let mut active_steps: u64 = 0;

    for _t in 1..=total_steps {
        if walk.moving().is_empty() {
            if config.early_exit {
                break;
            }
            // Frozen tail: nothing can change, so every drift factor is
            // exactly 1 and every spread factor is its constant additive form
            // (bands switch to additive tracking the moment their moving
            // count hits zero). Advance the ledger in closed per-step form.
            for d in &mut drift {
                d.u1 *= d.inv_comp;
                d.u2 *= d.inv_comp;
            }
            for s in &mut spread {
                s.additive = true;
                let f = 1.0 - s.lambda2 * s.add_inc + s.lambda2 * s.lambda2 * s.quart;
                s.u *= f * s.inv_comp;
                s.y += s.add_inc;
            }
            steps_run += 1;
            if trace_on {
                pot_trace.push(scale.pot(&drift, &spread));
                complexity_trace.push(0);
                moving_trace.push(0);
            }
            if let Some(h) = history.as_mut() {
                h.push(StepRecord { moves: Vec::new() });
            }
            scale.rebalance(&mut drift, &mut spread);
            continue;
        }

        // Spread mode switch, evaluated at step start, one-way.
        for (ti, s) in spread.iter_mut().enumerate() {
            if !s.additive && 10 * support.band_active_members(ti).len() as i64 <= s.beta_int {
                s.additive = true;
            }
        }

        let n_mov = walk.moving().len();
        for (idx, &c) in walk.moving().iter().enumerate() {
            local_of[c as usize] = idx as u32;
        }

        // Common weight scale: the largest per-term objective weight.
        let mut wmax = 0.0f64;
        for d in &drift {
            wmax = wmax.max(d.u1.max(d.u2) * d.inv_comp);
        }
        for s in &spread {
            wmax = wmax.max(s.u * s.inv_comp);
        }
        let inv_wmax = if wmax > 0.0 { 1.0 / wmax } else { 1.0 };

        // ---- objective assembly over the moving columns ----
        obj.reset(n_mov);
        let mut const_acc = 0.0;
        for d in &drift {
            let (cols, vals) = support.row_active(d.row as usize);
            let w1 = d.u1 * d.inv_comp * inv_wmax;
            let w2 = d.u2 * d.inv_comp * inv_wmax;
            if cols.is_empty() {
                const_acc += w1 + w2;
                continue;
            }
            let sum_w = w1 + w2;
            let diff_w = w1 - w2;
            // (w1+w2)·(1 + s²) + (w1−w2)·s with s = λ·Σ a_j x_j / k,
            // as one scaled square plus a linear run.
            obj.begin_term();
            for (idx, &c) in cols.iter().enumerate() {
                obj.push_left(local_of[c as usize], d.lambda * vals[idx] * inv_k);
            }
            obj.seal_square(sum_w);
            if diff_w != 0.0 {
                for (idx, &c) in cols.iter().enumerate() {
                    obj.push_linear(local_of[c as usize], diff_w * d.lambda * vals[idx] * inv_k);
                }
            }
            obj.finish_term(sum_w);
        }
        for (ti, s) in spread.iter().enumerate() {
            let members = support.band_active_members(ti);
            let w = s.u * s.inv_comp * inv_wmax;
            let l2 = s.lambda2;
            if members.is_empty() {
                // Additive by the step-start switch; surrogate is empty.
                const_acc += w * (1.0 - l2 * s.add_inc + l2 * l2 * s.quart);
                continue;
            }
            // Linear spread coefficients c_j = 4(β·num_j − Σnum)/k².
            cbuf.clear();
            cbuf.extend(members.iter().map(|&c| {
                (4 * (s.beta_int * walk.numerator(c as usize) as i64 - s.sum_num)) as f64 * inv_k2
            }));
            if s.additive {
                const_acc += w * (1.0 - l2 * s.add_inc + l2 * l2 * s.quart);
            } else {
                let m_b = members.len() as f64;
                const_acc += w * (1.0 + l2 * l2 * s.quart - l2 * 2.0 * s.beta * m_b * inv_k2);
                obj.begin_term();
                for &c in members {
                    obj.push_left(local_of[c as usize], 1.0);
                }
                obj.seal_square(w * 2.0 * l2 * inv_k2);
                for (idx, &c) in members.iter().enumerate() {
                    obj.push_linear(local_of[c as usize], -w * l2 * cbuf[idx]);
                }
                obj.finish_term(0.0);
            }
            obj.begin_term();
            for (idx, &c) in members.iter().enumerate() {
                obj.push_left(local_of[c as usize], cbuf[idx]);
            }
            obj.seal_square(w * l2 * l2);
            obj.finish_term(0.0);
        }
        if const_acc != 0.0 {
            obj.begin_term();
            obj.seal_left();
            obj.seal_right();
            obj.finish_term(const_acc);
        }

        // ---- derandomize one step ----
        let space = PairwiseSpace::new(n_mov)?;
        let out = derandomize(&space, &obj)?;
        work += out.work;
        max_complexity = max_complexity.max(obj.complexity());
        let signs = &out.assignment;

        // ---- ledger update at the realized signs (pre-move state) ----
        for d in &mut drift {
            let (cols, vals) = support.row_active(d.row as usize);
            let mut dot = 0.0;
            for (idx, &c) in cols.iter().enumerate() {
                dot += vals[idx] * signs[local_of[c as usize] as usize] as f64;
            }
            let sv = d.lambda * dot * inv_k;
            d.u1 *= d.inv_comp * (1.0 + sv + sv * sv);
            d.u2 *= d.inv_comp * (1.0 - sv + sv * sv);
        }
        for (ti, s) in spread.iter_mut().enumerate() {
            let members = support.band_active_members(ti);
            if members.is_empty() {
                let f = 1.0 - s.lambda2 * s.add_inc + s.lambda2 * s.lambda2 * s.quart;
                s.u *= f * s.inv_comp;
                s.y += s.add_inc;
                continue;
            }
            let m_b = members.len() as i64;
            let mut sum_x: i64 = 0;
            let mut sum_numx: i64 = 0;
            for &c in members {
                let sg = signs[local_of[c as usize] as usize] as i64;
                sum_x += sg;
                sum_numx += walk.numerator(c as usize) as i64 * sg;
            }
            let lin_num: i128 = 4 * (s.beta_int as i128 * sum_numx as i128
                - s.sum_num as i128 * sum_x as i128);
            let lin = lin_num as f64 * inv_k2;
            let surrogate = lin * lin;
            let l2 = s.lambda2;
            let f = if s.additive {
                1.0 - l2 * s.add_inc + l2 * l2 * (surrogate + s.quart)
            } else {
                let dy_num: i128 = lin_num + 2 * s.beta_int as i128 * m_b as i128
                    - 2 * (sum_x as i128) * (sum_x as i128);
                let dy = dy_num as f64 * inv_k2;
                1.0 - l2 * dy + l2 * l2 * (surrogate + s.quart)
            };
            s.u *= f * s.inv_comp;
            s.sum_num += sum_x;
            s.sum_num_sq += (2 * sum_numx + m_b) as i128;
            if s.additive {
                s.y += s.add_inc;
            } else {
                s.y = (2 * s.beta_int as i128 * s.sum_num_sq
                    - 2 * (s.sum_num as i128) * (s.sum_num as i128)) as f64
                    * inv_k2;
            }
        }

        // ---- apply the step ----
        if let Some(h) = history.as_mut() {
            h.push(StepRecord {
                moves: walk
                    .moving()
                    .iter()
                    .zip(signs)
                    .map(|(&c, &sg)| (c, sg))
                    .collect(),
            });
        }
        let frozen = walk.apply_signs(signs);
        for &c in &frozen {
            support.deactivate_column(c, |_| {});
        }
        steps_run += 1;
        active_steps += 1;
        if trace_on {
            pot_trace.push(scale.pot(&drift, &spread));
            complexity_trace.push(obj.complexity());
            moving_trace.push(walk.moving().len() as u32);
        }
        scale.rebalance(&mut drift, &mut spread);
    }

    // ---- output conditions ----
    let q = walk.values();
    let mut audits = Vec::with_capacity(matrix.rows());
    let mut bad_rows = Vec::new();
    for (i, plan) in classification.rows.iter().enumerate() {
        let deviation = matrix.row_deviation(i, &p0, &q);
        if plan.class == RowClass::WideBudget {
            audits.push(RowAudit {
                class: plan.class,
                prob_bad: plan.prob_bad,
                deviation,
                mass_ok: true,
                variance_ok: true,
                deviation_ok: true,
                bad: false,
            });
            continue;
        }
        let (cols, vals) = support.row_active(i);
        let mut mass = 0.0;
        let mut var = 0.0;
        for (idx, &c) in cols.iter().enumerate() {
            if !plan.ignore.contains(c) {
                mass += vals[idx];
                var += vals[idx] * vals[idx];
            }
        }
        let mass_ok = mass <= MASS_SHRINK * plan.sum;
        let variance_ok = var <= MASS_SHRINK * plan.sum_sq;
        let deviation_ok =
            numeric::abs(deviation) <= profile.walk_deviation_fraction * plan.delta;
        let bad = !(mass_ok && variance_ok && deviation_ok);
        if bad {
            bad_rows.push(i as u32);
        }
        audits.push(RowAudit {
            class: plan.class,
            prob_bad: plan.prob_bad,
            deviation,
            mass_ok,
            variance_ok,
            deviation_ok,
            bad,
        });
    }

    let pot_final = scale.pot(&drift, &spread);
    let numerators: Vec<u32> = (0..walk.len()).map(|j| walk.numerator(j)).collect();
    Ok(PartialFixResult {
        k,
        numerators,
        classification,
        audits,
        bad_rows,
        diagnostics: PartialDiagnostics {
            steps_run,
            active_steps,
            derandomize_work: work,
            max_objective_complexity: max_complexity,
            pot_initial,
            pot_final,
            pot_trace,
            complexity_trace,
            moving_trace,
        },
        history,
    })
}
