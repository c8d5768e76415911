//! Randomized and sequential reference implementations.
//!
//! These exist to validate the deterministic engine, not to compete with it:
//! a literal coin-flipping grid walk, plain Bernoulli rounding for empirical
//! deviation percentiles, and the sequential potential-greedy labeler whose
//! potential argument the whole pipeline scales up. All randomness comes
//! from [`SplitMix64`], a fixed, documented 64-bit mixing generator, so
//! traces are bit-reproducible from the seed across platforms and
//! languages.

use alloc::vec;
use alloc::vec::Vec;

use crate::apps::SetSystem;
use crate::error::{Error, Result};
use crate::matrix::ConstraintMatrix;
use crate::walk::{snap_to_grid, validate_granularity};

/// SplitMix64: `state += 0x9E3779B97F4A7C15` per draw, output mixed with
/// the Stafford mix13 constants. Reference output for seed 0 starts
/// `0xE220A8397B1DCDAF`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Generator seeded with `seed`.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Next 64 uniformly mixed bits.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Result of [`randomized_walk`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedWalkResult {
    /// Final grid values.
    pub values: Vec<f64>,
    /// Final grid numerators (value = numerator/k).
    pub numerators: Vec<u32>,
    /// Steps actually run (stops early once everything froze).
    pub steps: u64,
    /// Sampling stride of the traces: entry `s` was recorded after step
    /// `s·stride` (the final step is always recorded last).
    pub trace_stride: u64,
    /// Per-row drift trace `φ_i = Σⱼ aᵢⱼ·pⱼ` at each recorded step.
    pub phi_trace: Vec<Vec<f64>>,
    /// Per-row spread trace `ψ_i = Σ_{j₁,j₂∈Rᵢ²}(p_{j₁}−p_{j₂})²` at each
    /// recorded step (support members, unweighted, as in the analysis).
    pub psi_trace: Vec<Vec<f64>>,
}

/// Most recorded trace points per row; deeper walks are downsampled.
const MAX_TRACE_POINTS: u64 = 4096;

/// The literal coin-flipping baseline: run `T = 100k²` steps, each moving
/// every unfrozen coordinate by an independent uniform `±1/k` drawn from a
/// seeded [`SplitMix64`] (one fresh word per step, bits consumed MSB
/// first). Probabilities must already sit on the `1/k` grid.
pub fn randomized_walk(
    matrix: &ConstraintMatrix,
    p: &[f64],
    k: u32,
    rng_seed: u64,
) -> Result<RandomizedWalkResult> {
    validate_granularity(k)?;
    if p.len() != matrix.cols() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "matrix has {} columns but {} probabilities were supplied",
            matrix.cols(),
            p.len()
        )));
    }
    let n = p.len();
    let m = matrix.rows();
    let mut nums: Vec<u32> = Vec::with_capacity(n);
    for (j, &v) in p.iter().enumerate() {
        nums.push(snap_to_grid(v, k, j)?);
    }
    let mut moving: Vec<u32> = (0..n as u32)
        .filter(|&j| nums[j as usize] != 0 && nums[j as usize] != k)
        .collect();

    // Column → incident rows, for incremental φ/ψ maintenance.
    let mut col_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut phi = vec![0.0f64; m]; // Σ a·p
    let mut s1 = vec![0.0f64; m]; // Σ p over support
    let mut s2 = vec![0.0f64; m]; // Σ p² over support
    let mut row_len = vec![0usize; m];
    for i in 0..m {
        let view = matrix.row(i);
        row_len[i] = view.cols.len();
        for (idx, &c) in view.cols.iter().enumerate() {
            let a = view.values[idx];
            let pj = nums[c as usize] as f64 / k as f64;
            col_rows[c as usize].push((i as u32, a));
            phi[i] += a * pj;
            s1[i] += pj;
            s2[i] += pj * pj;
        }
    }
    let psi_of = |i: usize, s1: &[f64], s2: &[f64]| -> f64 {
        2.0 * row_len[i] as f64 * s2[i] - 2.0 * s1[i] * s1[i]
    };

    let total_steps = 100u64 * (k as u64) * (k as u64);
    let stride = (total_steps / MAX_TRACE_POINTS).max(1);
    let mut phi_trace: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut psi_trace: Vec<Vec<f64>> = vec![Vec::new(); m];
    let record =
        |phi: &[f64], s1: &[f64], s2: &[f64], pt: &mut Vec<Vec<f64>>, st: &mut Vec<Vec<f64>>| {
            for i in 0..m {
                pt[i].push(phi[i]);
                st[i].push(psi_of(i, s1, s2));
            }
        };
    record(&phi, &s1, &s2, &mut phi_trace, &mut psi_trace);

    let mut rng = SplitMix64::new(rng_seed);
    let inv_k = 1.0 / k as f64;
    let mut steps = 0u64;
    for t in 1..=total_steps {
        if moving.is_empty() {
            break;
        }
        steps = t;
        let mut word = 0u64;
        let mut bits_left = 0u32;
        let mut write = 0usize;
        for idx in 0..moving.len() {
            let j = moving[idx] as usize;
            if bits_left == 0 {
                word = rng.next_u64();
                bits_left = 64;
            }
            let up = (word >> 63) & 1 == 1;
            word <<= 1;
            bits_left -= 1;
            let delta = if up { 1.0 } else { -1.0 } * inv_k;
            let old = nums[j] as f64 * inv_k;
            nums[j] = if up { nums[j] + 1 } else { nums[j] - 1 };
            for &(r, a) in &col_rows[j] {
                let r = r as usize;
                phi[r] += a * delta;
                s1[r] += delta;
                s2[r] += delta * (2.0 * old + delta);
            }
            if nums[j] != 0 && nums[j] != k {
                moving[write] = j as u32;
                write += 1;
            }
        }
        moving.truncate(write);
        if t % stride == 0 || moving.is_empty() || t == total_steps {
            record(&phi, &s1, &s2, &mut phi_trace, &mut psi_trace);
        }
    }

    Ok(RandomizedWalkResult {
        values: nums.iter().map(|&v| v as f64 * inv_k).collect(),
        numerators: nums,
        steps,
        trace_stride: stride,
        phi_trace,
        psi_trace,
    })
}

/// Independent Bernoulli rounding: `qⱼ = 1` iff the j-th uniform draw falls
/// below `pⱼ` (columns in ascending order, one draw each).
pub fn monte_carlo_round(p: &[f64], rng_seed: u64) -> Result<Vec<u8>> {
    let mut rng = SplitMix64::new(rng_seed);
    let mut q = Vec::with_capacity(p.len());
    for (j, &v) in p.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(alloc::format!(
                "probability for column {j} must lie in [0,1], got {v}"
            )));
        }
        q.push(u8::from(rng.next_f64() < v));
    }
    Ok(q)
}

/// Result of [`sequential_conditional_fix`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialFixResult {
    /// One `±1` label per ground element.
    pub labels: Vec<i8>,
    /// Normalized potential after each decision; starts at exactly 1 and
    /// never increases.
    pub pot_trace: Vec<f64>,
    /// Per-set `(+1, −1)` label counts.
    pub per_set: Vec<(usize, usize)>,
}

/// The sequential potential-greedy labeler: decide elements one at a time,
/// each time picking the sign that keeps the normalized potential
/// `(1/2m)·Σᵢ(Φ⁽¹⁾ᵢ + Φ⁽²⁾ᵢ)` from increasing (ties take `+1`). Per set the
/// two potentials multiply `(1 ± λxⱼ + λ²xⱼ²)` over decided members with
/// `λ = 1/10`, normalized by one `(1+λ²)` per decided member so the
/// potential starts at exactly 1. For sets of at least logarithmic size
/// this guarantees at least `|Sᵢ|/3` of each label.
///
/// Elements are processed in ascending index order; see
/// [`sequential_conditional_fix_ordered`] to choose the order.
pub fn sequential_conditional_fix(system: &SetSystem) -> Result<SequentialFixResult> {
    let order: Vec<u32> = (0..system.ground_size() as u32).collect();
    sequential_conditional_fix_ordered(system, &order)
}

/// [`sequential_conditional_fix`] with an explicit processing order
/// (a permutation of the ground set).
pub fn sequential_conditional_fix_ordered(
    system: &SetSystem,
    order: &[u32],
) -> Result<SequentialFixResult> {
    let n = system.ground_size();
    let m = system.num_sets();
    if order.len() != n {
        return Err(Error::invalid(alloc::format!(
            "order must list all {n} elements, got {}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &j in order {
        if j as usize >= n || seen[j as usize] {
            return Err(Error::invalid(alloc::format!(
                "order is not a permutation (element {j})"
            )));
        }
        seen[j as usize] = true;
    }
    let mut element_sets: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, s) in system.sets().iter().enumerate() {
        for &j in s {
            element_sets[j as usize].push(i as u32);
        }
    }

    const LAMBDA: f64 = 0.1;
    let norm = 1.0 + LAMBDA * LAMBDA;
    let mut u1 = vec![1.0f64; m];
    let mut u2 = vec![1.0f64; m];
    let scale = 1.0 / (2.0 * m.max(1) as f64);
    let pot = |u1: &[f64], u2: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            acc += u1[i] + u2[i];
        }
        if m == 0 {
            1.0
        } else {
            scale * acc
        }
    };

    let mut labels = vec![0i8; n];
    let mut pot_trace = Vec::with_capacity(n + 1);
    pot_trace.push(pot(&u1, &u2));
    // Per decided member the potentials gain (1 ± λx + λ²)/(1+λ²); x = ±1
    // makes the quadratic term λ² exactly.
    let f_plus = (1.0 + LAMBDA + LAMBDA * LAMBDA) / norm;
    let f_minus = (1.0 - LAMBDA + LAMBDA * LAMBDA) / norm;
    for &j in order {
        let affected = &element_sets[j as usize];
        let mut d_plus = 0.0;
        let mut d_minus = 0.0;
        for &i in affected {
            let i = i as usize;
            // x = +1: Φ¹ gains f_plus, Φ² gains f_minus (and vice versa).
            d_plus += u1[i] * (f_plus - 1.0) + u2[i] * (f_minus - 1.0);
            d_minus += u1[i] * (f_minus - 1.0) + u2[i] * (f_plus - 1.0);
        }
        let x = if d_plus <= d_minus { 1i8 } else { -1i8 };
        labels[j as usize] = x;
        for &i in affected {
            let i = i as usize;
            if x == 1 {
                u1[i] *= f_plus;
                u2[i] *= f_minus;
            } else {
                u1[i] *= f_minus;
                u2[i] *= f_plus;
            }
        }
        pot_trace.push(pot(&u1, &u2));
    }
    let per_set = system
        .sets()
        .iter()
        .map(|s| {
            let plus = s.iter().filter(|&&j| labels[j as usize] == 1).count();
            (plus, s.len() - plus)
        })
        .collect();
    Ok(SequentialFixResult {
        labels,
        pot_trace,
        per_set,
    })
}
