//! Pairwise-independent ±1 assignments from GF(2) dot products, quadratic
//! objectives in "nice" form, exact conditional expectations, and the
//! bit-by-bit seed search that finds an assignment no worse than average.
//!
//! # The sign space
//!
//! Variable `j ∈ [n]` carries the code `(j << 1) | 1` — its index bits with a
//! constant 1 appended in the least significant place — over `L = ⌈log₂ n⌉+1`
//! bits, so there are `2^L ≤ 4n` seeds. Under seed `z ∈ {0,1}^L`,
//!
//! ```text
//! x_j(z) = −1 + 2·(⟨code(j), z⟩ mod 2) ∈ {−1, +1}.
//! ```
//!
//! Codes are distinct and nonzero, so over a uniform seed each `x_j` is a
//! uniform sign and any two are independent: `E[x_j] = 0`, `E[x_i·x_j] = 0`.
//!
//! # Nice quadratic terms
//!
//! A term is `Q(x) = (Σ_{i∈A} α_i x_i)(Σ_{j∈B} β_j x_j) + Σ_{l∈C} γ_l x_l + δ`
//! with complexity `‖Q‖ = |A| + |B| + |C| + 1`; an objective is a sum of
//! terms with complexity `‖f‖ = Σ‖Q‖`.
//!
//! # Conditional expectations in linear time
//!
//! Seed bits are fixed low-to-high. With the first `r` bits fixed to `z₀..z_{r−1}`,
//! write `code(j) = (pre_j, suf_j)` (fixed / free positions) and
//! `ε_j = (−1)^{1+⟨pre_j, z_pre⟩}`. If `suf_j = 0` then `x_j = ε_j` is already
//! determined; otherwise `x_j = ε_j·ρ_{suf_j}` where `ρ_s` is a uniform sign
//! shared by all variables with free-bit pattern `s`, and distinct patterns
//! give pairwise-independent signs. Hence, grouping each sum by `suf`,
//!
//! ```text
//! E[(Σ_A α x)(Σ_B β x) | prefix] = Σ_s (Σ_{A, suf=s} α ε)·(Σ_{B, suf=s} β ε),
//! ```
//!
//! the `s = 0` group being the determined part, and linear terms keep only
//! their determined variables. Because codes are `(j << 1) | 1`, sorting by
//! index sorts by `suf`, so each term is processed with one merge pass —
//! `O(‖Q‖)` per term, no hashing.
//!
//! # Seed search
//!
//! [`derandomize`] fixes bits one at a time, keeping whichever value has the
//! smaller conditional expectation (ties take bit 0). The law of total
//! expectation makes the running conditional expectation nonincreasing, so
//! the fully fixed seed satisfies `f(x̄) ≤ E[f]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::reduce;

/// The GF(2) dot-product sign space over `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseSpace {
    n: usize,
    bits: u32,
}

impl PairwiseSpace {
    /// Space over `n ≥ 1` variables with `⌈log₂ n⌉ + 1` seed bits.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("pairwise space needs at least one variable"));
        }
        if n > (1usize << 31) {
            return Err(Error::invalid("pairwise space limited to 2^31 variables"));
        }
        let ceil_log2 = if n == 1 {
            0
        } else {
            usize::BITS - (n - 1).leading_zeros()
        };
        Ok(PairwiseSpace {
            n,
            bits: ceil_log2 + 1,
        })
    }

    /// Number of variables.
    pub fn variables(&self) -> usize {
        self.n
    }

    /// Number of seed bits `L`.
    pub fn seed_bits(&self) -> u32 {
        self.bits
    }

    /// Number of seeds, `2^L ≤ 4n`.
    pub fn seed_count(&self) -> u64 {
        1u64 << self.bits
    }

    #[inline]
    fn code(j: usize) -> u64 {
        ((j as u64) << 1) | 1
    }

    /// Sign of variable `j` under `seed`.
    #[inline]
    pub fn value(&self, j: usize, seed: u64) -> i8 {
        debug_assert!(j < self.n);
        if (Self::code(j) & seed).count_ones() & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// The full ±1 assignment under `seed`.
    pub fn assignment(&self, seed: u64) -> Vec<i8> {
        (0..self.n).map(|j| self.value(j, seed)).collect()
    }
}

/// A partially fixed seed: values for the first `len` bit positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeedPrefix {
    len: u32,
    bits: u64,
}

impl SeedPrefix {
    /// The empty prefix (nothing fixed).
    pub fn empty() -> Self {
        SeedPrefix { len: 0, bits: 0 }
    }

    /// This prefix with one more bit fixed to `bit`.
    pub fn extended(&self, bit: bool) -> Self {
        debug_assert!(self.len < 64);
        SeedPrefix {
            len: self.len + 1,
            bits: self.bits | ((bit as u64) << self.len),
        }
    }

    /// Number of fixed bits.
    pub fn len(&self) -> u32 {
        self.len
    }

    /// True if nothing is fixed yet.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The fixed bit values, bit `i` of the word being position `i`.
    pub fn bits(&self) -> u64 {
        self.bits
    }
}

/// One nice quadratic term
/// `(Σ_{i∈A} α_i x_i)(Σ_{j∈B} β_j x_j) + Σ_{l∈C} γ_l x_l + δ`.
///
/// Index lists are sorted and duplicate-free (enforced at construction);
/// complexity is `|A| + |B| + |C| + 1 ≥ 1`. Terms are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NiceQuadraticTerm {
    left: Vec<(u32, f64)>,
    right: Vec<(u32, f64)>,
    linear: Vec<(u32, f64)>,
    constant: f64,
}

fn normalize_side(mut side: Vec<(u32, f64)>, what: &str) -> Result<Vec<(u32, f64)>> {
    side.sort_unstable_by_key(|&(j, _)| j);
    for pair in side.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::invalid(alloc::format!(
                "duplicate variable {} in {what} factor of a term",
                pair[0].0
            )));
        }
    }
    for &(j, c) in &side {
        if !c.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "non-finite coefficient on variable {j} in {what} factor"
            )));
        }
    }
    Ok(side)
}

impl NiceQuadraticTerm {
    /// Build a term from (variable, coefficient) lists in any order.
    ///
    /// Each list is sorted; duplicates within a list and non-finite
    /// coefficients are rejected. A variable may appear in several lists.
    pub fn new(
        left: Vec<(u32, f64)>,
        right: Vec<(u32, f64)>,
        linear: Vec<(u32, f64)>,
        constant: f64,
    ) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::invalid("non-finite constant in a term"));
        }
        Ok(NiceQuadraticTerm {
            left: normalize_side(left, "left")?,
            right: normalize_side(right, "right")?,
            linear: normalize_side(linear, "linear")?,
            constant,
        })
    }

    /// A purely linear term `Σ γ_l x_l + δ`.
    pub fn linear(linear: Vec<(u32, f64)>, constant: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), linear, constant)
    }

    /// `‖Q‖ = |A| + |B| + |C| + 1`.
    pub fn complexity(&self) -> u64 {
        (self.left.len() + self.right.len() + self.linear.len() + 1) as u64
    }

    /// Largest variable index mentioned, if any.
    fn max_var(&self) -> Option<u32> {
        let m = |v: &Vec<(u32, f64)>| v.last().map(|&(j, _)| j);
        [m(&self.left), m(&self.right), m(&self.linear)]
            .into_iter()
            .flatten()
            .max()
    }
}

/// Borrowed view of one term inside an objective.
///
/// Scaled-square terms (built by the walk engine) expose the shared factor
/// as both `left` and `right` with the scale in `outer`; plain terms have
/// `outer = 1`.
#[derive(Debug, Clone, Copy)]
pub struct TermView<'a> {
    /// Left bilinear factor `(j, α_j)`, sorted by `j`.
    pub left: &'a [(u32, f64)],
    /// Right bilinear factor `(j, β_j)`, sorted by `j`.
    pub right: &'a [(u32, f64)],
    /// Linear part `(j, γ_j)`, sorted by `j`.
    pub linear: &'a [(u32, f64)],
    /// Additive constant `δ`.
    pub constant: f64,
    /// Scale on the bilinear product.
    pub outer: f64,
}

impl TermView<'_> {
    /// Evaluate the term at a real assignment.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let dot = |side: &[(u32, f64)]| {
            let mut acc = 0.0;
            for &(j, c) in side {
                acc += c * x[j as usize];
            }
            acc
        };
        self.outer * dot(self.left) * dot(self.right) + dot(self.linear) + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TermSpan {
    start: u32,
    left_end: u32,
    right_end: u32,
    linear_end: u32,
    constant: f64,
    /// Scale applied to the bilinear product (1 for plain terms).
    outer: f64,
    /// Scaled-square term: the left run doubles as the right factor and the
    /// stored right run is empty. Evaluates as `outer·(Σ c_j x_j)²`.
    square: bool,
}

/// A sum of nice quadratic terms over variables `0..var_count`.
///
/// Stored flat (one element array shared by all terms) so the walk engine can
/// rebuild objectives every step without allocator churn.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    var_count: usize,
    spans: Vec<TermSpan>,
    elems: Vec<(u32, f64)>,
    open: bool,
}

impl QuadraticObjective {
    /// Objective over `var_count` variables from a list of terms.
    ///
    /// Rejects any term mentioning a variable `≥ var_count`.
    pub fn new(var_count: usize, terms: Vec<NiceQuadraticTerm>) -> Result<Self> {
        let mut obj = Self::with_capacity(var_count, terms.len());
        for term in &terms {
            if let Some(j) = term.max_var() {
                if j as usize >= var_count {
                    return Err(Error::IndexOutOfRange {
                        kind: "variable",
                        index: j as usize,
                        bound: var_count,
                    });
                }
            }
            obj.begin_term();
            for &(j, c) in &term.left {
                obj.push_left(j, c);
            }
            obj.seal_left();
            for &(j, c) in &term.right {
                obj.push_right(j, c);
            }
            obj.seal_right();
            for &(j, c) in &term.linear {
                obj.push_linear(j, c);
            }
            obj.finish_term(term.constant);
        }
        Ok(obj)
    }

    /// Empty objective with reserved space.
    pub fn with_capacity(var_count: usize, terms: usize) -> Self {
        QuadraticObjective {
            var_count,
            spans: Vec::with_capacity(terms),
            elems: Vec::with_capacity(terms * 4),
            open: false,
        }
    }

    /// Number of variables the objective ranges over.
    pub fn var_count(&self) -> usize {
        self.var_count
    }

    /// Number of terms.
    pub fn term_count(&self) -> usize {
        self.spans.len()
    }

    /// Total complexity `‖f‖ = Σ_Q ‖Q‖`.
    pub fn complexity(&self) -> u64 {
        self.elems.len() as u64 + self.spans.len() as u64
    }

    /// View of term `t`.
    pub fn term(&self, t: usize) -> TermView<'_> {
        let s = self.spans[t];
        let left = &self.elems[s.start as usize..s.left_end as usize];
        TermView {
            left,
            right: if s.square {
                left
            } else {
                &self.elems[s.left_end as usize..s.right_end as usize]
            },
            linear: &self.elems[s.right_end as usize..s.linear_end as usize],
            constant: s.constant,
            outer: s.outer,
        }
    }

    /// Which variables appear in at least one term.
    pub fn active_variables(&self) -> Vec<bool> {
        let mut active = vec![false; self.var_count];
        for &(j, _) in &self.elems {
            active[j as usize] = true;
        }
        active
    }

    /// Evaluate at a real assignment (`x.len() == var_count`), summing term
    /// values in canonical order.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.var_count, "assignment length mismatch");
        let values: Vec<f64> = (0..self.spans.len())
            .map(|t| self.term(t).evaluate(x))
            .collect();
        reduce::sum(&values)
    }

    /// Evaluate at a ±1 assignment.
    pub fn evaluate_signs(&self, x: &[i8]) -> f64 {
        let xf: Vec<f64> = x.iter().map(|&s| s as f64).collect();
        self.evaluate(&xf)
    }

    // ---- incremental building (used by the walk engine) ----

    /// Drop all terms, keep capacity; allow a new variable count.
    pub(crate) fn reset(&mut self, var_count: usize) {
        self.var_count = var_count;
        self.spans.clear();
        self.elems.clear();
        self.open = false;
    }

    pub(crate) fn begin_term(&mut self) {
        debug_assert!(!self.open);
        self.open = true;
        let here = self.elems.len() as u32;
        self.spans.push(TermSpan {
            start: here,
            left_end: here,
            right_end: here,
            linear_end: here,
            constant: 0.0,
            outer: 1.0,
            square: false,
        });
    }

    pub(crate) fn push_left(&mut self, j: u32, c: f64) {
        debug_assert!(self.open);
        debug_assert!((j as usize) < self.var_count);
        self.elems.push((j, c));
    }

    pub(crate) fn seal_left(&mut self) {
        let end = self.elems.len() as u32;
        let span = self.spans.last_mut().expect("no open term");
        span.left_end = end;
        span.right_end = end;
        span.linear_end = end;
    }

    /// Seal the pushed run as a scaled square `outer·(Σ c_j x_j)²`; only the
    /// linear part may follow. Stores the factor once.
    pub(crate) fn seal_square(&mut self, outer: f64) {
        let end = self.elems.len() as u32;
        let span = self.spans.last_mut().expect("no open term");
        span.left_end = end;
        span.right_end = end;
        span.linear_end = end;
        span.outer = outer;
        span.square = true;
    }

    pub(crate) fn push_right(&mut self, j: u32, c: f64) {
        debug_assert!(self.open);
        self.elems.push((j, c));
    }

    pub(crate) fn seal_right(&mut self) {
        let end = self.elems.len() as u32;
        let span = self.spans.last_mut().expect("no open term");
        span.right_end = end;
        span.linear_end = end;
    }

    pub(crate) fn push_linear(&mut self, j: u32, c: f64) {
        debug_assert!(self.open);
        self.elems.push((j, c));
    }

    pub(crate) fn finish_term(&mut self, constant: f64) {
        debug_assert!(self.open);
        let end = self.elems.len() as u32;
        let span = self.spans.last_mut().expect("no open term");
        span.linear_end = end;
        span.constant = constant;
        self.open = false;
        debug_assert!(span.start <= span.left_end && span.left_end <= span.right_end);
        debug_assert!(span.right_end <= span.linear_end);
        debug_assert!(sorted_strict(
            &self.elems[span.start as usize..span.left_end as usize]
        ));
        debug_assert!(sorted_strict(
            &self.elems[span.left_end as usize..span.right_end as usize]
        ));
        debug_assert!(sorted_strict(
            &self.elems[span.right_end as usize..span.linear_end as usize]
        ));
    }
}

#[cfg(debug_assertions)]
fn sorted_strict(side: &[(u32, f64)]) -> bool {
    side.windows(2).all(|w| w[0].0 < w[1].0)
}

#[cfg(not(debug_assertions))]
fn sorted_strict(_side: &[(u32, f64)]) -> bool {
    true
}

/// Sign of the determined part of variable `j`'s value: `ε_j` for the fixed
/// low bits `zbits` (positions `0..r`).
#[inline]
fn eps(code: u64, zbits: u64) -> f64 {
    if (code & zbits).count_ones() & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Conditional expectation of one term given `r` fixed bits `zbits`.
///
/// One merge pass over the two bilinear factors grouped by free-bit pattern
/// `code >> r` (pattern 0 = determined variables), plus the determined run of
/// the linear part.
fn term_ce(term: TermView<'_>, r: u32, zbits: u64) -> f64 {
    let key = |j: u32| PairwiseSpace::code(j as usize) >> r;
    let mut quad = 0.0;

    // Merge left and right runs by key; matching keys contribute a_s·b_s.
    // For scaled squares the two sides alias, so every run matches itself.
    let (mut li, mut ri) = (0usize, 0usize);
    while li < term.left.len() && ri < term.right.len() {
        let kl = key(term.left[li].0);
        let kr = key(term.right[ri].0);
        if kl < kr {
            li += 1;
            while li < term.left.len() && key(term.left[li].0) == kl {
                li += 1;
            }
        } else if kr < kl {
            ri += 1;
            while ri < term.right.len() && key(term.right[ri].0) == kr {
                ri += 1;
            }
        } else {
            let mut a = 0.0;
            while li < term.left.len() && key(term.left[li].0) == kl {
                let (j, c) = term.left[li];
                a += c * eps(PairwiseSpace::code(j as usize), zbits);
                li += 1;
            }
            let mut b = 0.0;
            while ri < term.right.len() && key(term.right[ri].0) == kl {
                let (j, c) = term.right[ri];
                b += c * eps(PairwiseSpace::code(j as usize), zbits);
                ri += 1;
            }
            quad += a * b;
        }
    }

    let mut acc = term.constant + term.outer * quad;
    // Determined run of the linear part (key 0 is always the leading run).
    for &(j, c) in term.linear {
        let code = PairwiseSpace::code(j as usize);
        if code >> r != 0 {
            break;
        }
        acc += c * eps(code, zbits);
    }
    acc
}

/// Conditional expectations of one term for *both* candidate values of bit
/// `r`, given bits `0..r` fixed to `zbits`. Returns `(E | bit r = 0, E | bit r = 1)`.
///
/// Candidate 1 flips `ε_j` exactly when bit `r` of `code(j)` is set, so one
/// pass accumulates both sums.
fn term_ce_dual(term: TermView<'_>, r: u32, zbits: u64) -> (f64, f64) {
    let rr = r + 1;
    let key = |j: u32| PairwiseSpace::code(j as usize) >> rr;
    let flip_mask = 1u64 << r;
    let (mut q0, mut q1) = (0.0, 0.0);

    let gather = |side: &[(u32, f64)], i: &mut usize, k: u64| -> (f64, f64) {
        let (mut s0, mut s1) = (0.0, 0.0);
        while *i < side.len() && key(side[*i].0) == k {
            let (j, c) = side[*i];
            let code = PairwiseSpace::code(j as usize);
            let e0 = c * eps(code, zbits);
            s0 += e0;
            s1 += if code & flip_mask != 0 { -e0 } else { e0 };
            *i += 1;
        }
        (s0, s1)
    };

    let (mut li, mut ri) = (0usize, 0usize);
    while li < term.left.len() && ri < term.right.len() {
        let kl = key(term.left[li].0);
        let kr = key(term.right[ri].0);
        if kl < kr {
            gather(term.left, &mut li, kl);
        } else if kr < kl {
            gather(term.right, &mut ri, kr);
        } else {
            let (a0, a1) = gather(term.left, &mut li, kl);
            let (b0, b1) = gather(term.right, &mut ri, kl);
            q0 += a0 * b0;
            q1 += a1 * b1;
        }
    }

    let mut acc0 = term.constant + term.outer * q0;
    let mut acc1 = term.constant + term.outer * q1;
    for &(j, c) in term.linear {
        let code = PairwiseSpace::code(j as usize);
        if code >> rr != 0 {
            break;
        }
        let e0 = c * eps(code, zbits);
        acc0 += e0;
        acc1 += if code & flip_mask != 0 { -e0 } else { e0 };
    }
    (acc0, acc1)
}

/// Both-branch conditional expectation of one term with cached per-variable
/// signs: `eps[j]` is the determined sign of `x_j` under the fixed bits, and
/// `flip[j] = ±1` is the extra factor variable `j` picks up when the next bit
/// is set. One pass, no per-element parity computation.
fn term_ce_dual_cached(
    objective: &QuadraticObjective,
    span: TermSpan,
    rr: u32,
    eps: &[f64],
    flip: &[f64],
) -> (f64, f64) {
    let elems = &objective.elems;
    let key = |j: u32| PairwiseSpace::code(j as usize) >> rr;
    let (mut q0, mut q1) = (0.0, 0.0);

    if span.square {
        // Single pass over the shared factor: Σ_s (run sum)² per key.
        let run = &elems[span.start as usize..span.left_end as usize];
        let mut i = 0usize;
        while i < run.len() {
            let k0 = key(run[i].0);
            let (mut s0, mut s1) = (0.0, 0.0);
            while i < run.len() {
                let (j, c) = run[i];
                if key(j) != k0 {
                    break;
                }
                let e = c * eps[j as usize];
                s0 += e;
                s1 += e * flip[j as usize];
                i += 1;
            }
            q0 += s0 * s0;
            q1 += s1 * s1;
        }
    } else {
        let left = &elems[span.start as usize..span.left_end as usize];
        let right = &elems[span.left_end as usize..span.right_end as usize];
        let gather = |side: &[(u32, f64)], i: &mut usize, k: u64| -> (f64, f64) {
            let (mut s0, mut s1) = (0.0, 0.0);
            while *i < side.len() && key(side[*i].0) == k {
                let (j, c) = side[*i];
                let e = c * eps[j as usize];
                s0 += e;
                s1 += e * flip[j as usize];
                *i += 1;
            }
            (s0, s1)
        };
        let (mut li, mut ri) = (0usize, 0usize);
        while li < left.len() && ri < right.len() {
            let kl = key(left[li].0);
            let kr = key(right[ri].0);
            if kl < kr {
                gather(left, &mut li, kl);
            } else if kr < kl {
                gather(right, &mut ri, kr);
            } else {
                let (a0, a1) = gather(left, &mut li, kl);
                let (b0, b1) = gather(right, &mut ri, kl);
                q0 += a0 * b0;
                q1 += a1 * b1;
            }
        }
    }

    let mut acc0 = span.constant + span.outer * q0;
    let mut acc1 = span.constant + span.outer * q1;
    let linear = &elems[span.right_end as usize..span.linear_end as usize];
    for &(j, c) in linear {
        if PairwiseSpace::code(j as usize) >> rr != 0 {
            break;
        }
        let e = c * eps[j as usize];
        acc0 += e;
        acc1 += e * flip[j as usize];
    }
    (acc0, acc1)
}

fn check_compatible(space: &PairwiseSpace, objective: &QuadraticObjective) -> Result<()> {
    if objective.var_count() != space.variables() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "objective over {} variables, space over {}",
            objective.var_count(),
            space.variables()
        )));
    }
    Ok(())
}

/// Minimum term count before per-term evaluation is parallelized.
const MIN_PARALLEL_TERMS: usize = 192;

/// `E[f(X) | prefix]` over the space, exactly (up to float rounding).
///
/// Cost is one `O(‖Q‖)` pass per term; per-term values are summed in
/// canonical term order.
pub fn conditional_expectation(
    space: &PairwiseSpace,
    objective: &QuadraticObjective,
    prefix: &SeedPrefix,
) -> Result<f64> {
    check_compatible(space, objective)?;
    if prefix.len() > space.seed_bits() {
        return Err(Error::invalid("prefix longer than the seed"));
    }
    let r = prefix.len();
    let zbits = prefix.bits();
    let values = reduce::map_indexed(objective.term_count(), MIN_PARALLEL_TERMS, |t| {
        term_ce(objective.term(t), r, zbits)
    });
    Ok(reduce::sum(&values))
}

/// `E[f(X)]` with nothing fixed.
pub fn expectation(space: &PairwiseSpace, objective: &QuadraticObjective) -> Result<f64> {
    conditional_expectation(space, objective, &SeedPrefix::empty())
}

/// Both one-bit extensions of `prefix` at once:
/// `(E[f | prefix, next bit 0], E[f | prefix, next bit 1])`.
pub fn conditional_expectation_both(
    space: &PairwiseSpace,
    objective: &QuadraticObjective,
    prefix: &SeedPrefix,
) -> Result<(f64, f64)> {
    check_compatible(space, objective)?;
    if prefix.len() >= space.seed_bits() {
        return Err(Error::invalid("seed already fully fixed"));
    }
    let r = prefix.len();
    let zbits = prefix.bits();
    let values0 = reduce::map_indexed(objective.term_count(), MIN_PARALLEL_TERMS, |t| {
        term_ce_dual(objective.term(t), r, zbits).0
    });
    let values1 = reduce::map_indexed(objective.term_count(), MIN_PARALLEL_TERMS, |t| {
        term_ce_dual(objective.term(t), r, zbits).1
    });
    Ok((reduce::sum(&values0), reduce::sum(&values1)))
}

/// Fill the per-variable sign caches for fixing bit `r`: `eps[j]` stays the
/// sign determined by the already-fixed bits (updated by the caller when a
/// bit is set), `flip[j]` becomes the factor bit `r` contributes.
fn refresh_flip(flip: &mut [f64], r: u32) {
    for (j, slot) in flip.iter_mut().enumerate() {
        let bit = (PairwiseSpace::code(j) >> r) & 1;
        *slot = 1.0 - 2.0 * bit as f64;
    }
}

/// Result of the bit-by-bit seed search.
#[derive(Debug, Clone, PartialEq)]
pub struct DerandomizeOutcome {
    /// The selected ±1 assignment `x̄`.
    pub assignment: Vec<i8>,
    /// The seed that produces it.
    pub seed: u64,
    /// `E[f]` before any bit was fixed.
    pub expectation: f64,
    /// `f(x̄)`, as the final conditional expectation. Guaranteed `≤ expectation`
    /// up to float rounding.
    pub value: f64,
    /// Elements touched: `(L + 1)·‖f‖` (one pass for the initial expectation,
    /// one dual pass per seed bit).
    pub work: u64,
}

/// Fix all `L` seed bits, each to the value with the smaller conditional
/// expectation (ties take 0), and return the resulting assignment.
///
/// The returned `value = f(x̄)` never exceeds `expectation = E[f]` (up to
/// float rounding), by the law of total expectation.
pub fn derandomize(
    space: &PairwiseSpace,
    objective: &QuadraticObjective,
) -> Result<DerandomizeOutcome> {
    check_compatible(space, objective)?;
    let initial = expectation(space, objective)?;
    let mut prefix = SeedPrefix::empty();
    let mut current = initial;
    // No bits fixed yet: every determined sign is the even-parity value −1.
    let mut eps = alloc::vec![-1.0f64; space.variables()];
    let mut flip = alloc::vec![0.0f64; space.variables()];
    for r in 0..space.seed_bits() {
        refresh_flip(&mut flip, r);
        let (e0, e1) = dual_pass(objective, r, &eps, &flip);
        if e1 < e0 {
            prefix = prefix.extended(true);
            current = e1;
            for (e, f) in eps.iter_mut().zip(&flip) {
                *e *= f;
            }
        } else {
            prefix = prefix.extended(false);
            current = e0;
        }
    }
    let seed = prefix.bits();
    Ok(DerandomizeOutcome {
        assignment: space.assignment(seed),
        seed,
        expectation: initial,
        value: current,
        work: (space.seed_bits() as u64 + 1) * objective.complexity(),
    })
}

fn dual_pass(objective: &QuadraticObjective, r: u32, eps: &[f64], flip: &[f64]) -> (f64, f64) {
    let rr = r + 1;
    let n = objective.term_count();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if n >= MIN_PARALLEL_TERMS && rayon::current_num_threads() > 1 {
            let pairs: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|t| term_ce_dual_cached(objective, objective.spans[t], rr, eps, flip))
                .collect();
            let (mut a0, mut a1) = (0.0, 0.0);
            for &(v0, v1) in &pairs {
                a0 += v0;
                a1 += v1;
            }
            return (a0, a1);
        }
    }
    let (mut a0, mut a1) = (0.0, 0.0);
    for t in 0..n {
        let (v0, v1) = term_ce_dual_cached(objective, objective.spans[t], rr, eps, flip);
        a0 += v0;
        a1 += v1;
    }
    (a0, a1)
}

/// `E[f]` by brute force: average of `f` over all `2^L` seeds.
///
/// Exponential in `L`; intended as an oracle for small spaces (refused above
/// 2²⁴ seeds).
pub fn enumerate_expectation(
    space: &PairwiseSpace,
    objective: &QuadraticObjective,
) -> Result<f64> {
    check_compatible(space, objective)?;
    if space.seed_bits() > 24 {
        return Err(Error::invalid(
            "enumeration refused beyond 2^24 seeds; use conditional_expectation",
        ));
    }
    let mut x = vec![0.0f64; space.variables()];
    let mut values = Vec::with_capacity(space.seed_count() as usize);
    for seed in 0..space.seed_count() {
        for (j, slot) in x.iter_mut().enumerate() {
            *slot = space.value(j, seed) as f64;
        }
        values.push(objective.evaluate(&x));
    }
    Ok(reduce::sum(&values) / space.seed_count() as f64)
}
