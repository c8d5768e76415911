//! Deterministic rounding of fractional vectors under weighted linear
//! constraints, driven by potential-guided walks on a 1/k grid.
//!
//! Given a nonnegative constraint matrix `A ∈ ℝ₊^{m×n}`, a fractional vector
//! `p ∈ [0,1]ⁿ` and per-row deviation budgets `Δ ∈ ℝ₊ᵐ`, the engine produces a
//! rounded vector `q` such that `|Σⱼ aᵢⱼ(pⱼ − qⱼ)| ≤ Δᵢ` for every row outside
//! an explicitly reported bad set — with **no randomness anywhere**: every
//! choice is made by minimizing a conditional expectation over a small
//! pairwise-independent sign space.
//!
//! The toolkit is layered:
//!
//! * [`pairwise`] — the GF(2) dot-product sign space, quadratic objectives in
//!   "nice" form, exact conditional expectations, and the bit-by-bit seed
//!   search that finds a point no worse than average.
//! * [`walk`] + [`partial`] — the grid walk: each of `T = Θ(k²)` steps moves
//!   every non-frozen column by ±1/k, with the joint sign pattern chosen so
//!   that a product-form potential never increases. Output is a partially
//!   integral vector plus per-row certificates.
//! * [`integral`] — recursive application of the partial fix until every
//!   column is exactly 0/1.
//! * [`concentration`] — wrappers delivering Hoeffding-, Chernoff- and
//!   Bernstein-shaped deviation guarantees for small sampling probabilities,
//!   via probability doubling (subsampling) and dyadic weight bucketing.
//! * [`apps`] — ready-made drivers: ε-approximate set sampling, neighborhood
//!   sampling in graphs, and YES/NO/MAYBE set partitioning.
//! * [`baseline`] — randomized counterparts (independent walk, Monte Carlo
//!   rounding, sequential sign fixing) for head-to-head comparisons, driven by
//!   a fixed, documented splitmix64 generator.
//!
//! # Determinism
//!
//! All floating-point reductions run in a canonical order (index-sorted terms,
//! sequential fold over per-term values), so results are byte-identical across
//! runs and across thread counts. Transcendentals go through `libm` in every
//! configuration, so `std` and `no_std` builds agree bit-for-bit.
//!
//! # `no_std`
//!
//! The crate is `no_std`-compatible (requires `alloc`). The default `std`
//! feature only adds `std::error::Error` impls; the optional `parallel`
//! feature (rayon) implies `std`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(missing_docs)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod apps;
pub mod baseline;
pub mod concentration;
pub mod config;
pub mod error;
pub mod integral;
pub mod matrix;
pub(crate) mod numeric;
pub mod pairwise;
pub mod partial;
pub(crate) mod reduce;
pub mod walk;

pub use apps::{
    partition_yes_no, sample_graph_neighbors, sample_sets, Graph, Label,
    NeighborSampleOutcome, PartitionOutcome, SetSampleOutcome, SetSystem, SetWindow,
};
pub use baseline::{
    monte_carlo_round, randomized_walk, sequential_conditional_fix,
    sequential_conditional_fix_ordered, RandomizedWalkResult, SequentialFixResult, SplitMix64,
};
pub use concentration::{
    compute_failure_bounds, fix_bernstein, fix_chernoff, fix_hoeffding, fix_with_subsampling,
    BoundMode, ConcentrationResult, ExponentReport, RowBound, SubsamplingOutcome,
};
pub use config::{EngineConfig, Profile};
pub use error::{Error, Result};
pub use integral::{fix_integral, IntegralFixResult};
pub use matrix::ConstraintMatrix;
pub use pairwise::{NiceQuadraticTerm, PairwiseSpace, QuadraticObjective, SeedPrefix};
pub use partial::{partial_fix, PartialFixResult};
