//! Constant profiles and engine configuration.
//!
//! Every multiplicative constant of the walk engine lives here. Two named
//! profiles are provided:
//!
//! * [`Profile::paper`] — the conservative reference constants: drift
//!   multiplier scale 10⁸, spread multiplier scale 10⁶, spread weight divisor
//!   10³⁰, `T = 100k²` steps, global constant `c = 10`, and full granularity
//!   inflation in the concentration wrappers. These constants are sized for
//!   asymptotic guarantees, not for observable behavior at desk scale.
//! * [`Profile::practical`] — the same algorithms with constants sized so the
//!   guidance is visible on instances that fit in memory: scales 8, 4, 30,
//!   `T = 4k²`, `c = 4`, no granularity inflation. Monotonicity of the
//!   potential holds for *any* positive scales, so this profile trades only
//!   the size of the certified failure bounds, never correctness of the
//!   reported deviations (which are always measured directly).

use alloc::string::String;

/// A named set of engine constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// Profile name as it appears in reports ("paper" or "practical" for the
    /// built-ins; custom profiles may use any label).
    pub name: &'static str,
    /// Scale `s` in the per-row drift multiplier
    /// `λᵢ = (1/s)·min(Δᵢ/Σⱼaᵢⱼ², k/Σⱼaᵢⱼ)`.
    pub lambda_scale: f64,
    /// Scale `s` in the per-bucket spread multiplier `λ'_β = k/(s·β·(β+k))`.
    pub pair_lambda_scale: f64,
    /// Divisor `d` in the spread-term weight `exp(−min(|B|,k)/d)`.
    pub spread_weight_divisor: f64,
    /// Steps per walk: `T = step_multiplier · k²`.
    pub step_multiplier: u64,
    /// Global constant `c` used by the failure-probability bounds and the
    /// granularity inflation factors.
    pub c: f64,
    /// Fraction of Δᵢ the walk's own deviation must stay within for a row to
    /// count as good (output condition three). The reference reading is
    /// 1/1000; the relaxed reading licensed by the analysis is O(Δᵢ), here
    /// taken with constant 1.
    pub walk_deviation_fraction: f64,
    /// Keep drift potentials for rows whose budget is below their weight
    /// variance (`Δᵢ² < Σⱼaᵢⱼ²`). Such rows carry no failure guarantee either
    /// way; guiding them anyway costs nothing (monotonicity is scale-free) and
    /// is what makes desk-scale instances behave. The reference profile
    /// excludes them, exactly matching the stated potential.
    pub guide_boring_small: bool,
    /// Apply the granularity inflations of the concentration wrappers
    /// (`k' = ⌈c²·ln(2nm)⌉·k`, `k_small = k³`, `k' = ⌈c·ln(nm)⌉·k`). These make
    /// `T` astronomically large and exist for asymptotic bounds; the practical
    /// profile keeps `k` as supplied.
    pub inflate_granularity: bool,
    /// Route the subsampling wrapper straight to its base case (grid-round at
    /// granularity k, one integral fix) instead of the probability-doubling
    /// ladder. The ladder's per-level budgets `ε_ℓ·Δ` are meaningful only at
    /// asymptotic scale.
    pub direct_subsampling: bool,
}

impl Profile {
    /// The conservative reference constants (see module docs).
    pub fn paper() -> Self {
        Profile {
            name: "paper",
            lambda_scale: 1e8,
            pair_lambda_scale: 1e6,
            spread_weight_divisor: 1e30,
            step_multiplier: 100,
            c: 10.0,
            walk_deviation_fraction: 1e-3,
            guide_boring_small: false,
            inflate_granularity: true,
            direct_subsampling: false,
        }
    }

    /// Desk-scale constants (see module docs).
    pub fn practical() -> Self {
        Profile {
            name: "practical",
            lambda_scale: 8.0,
            pair_lambda_scale: 4.0,
            spread_weight_divisor: 30.0,
            step_multiplier: 4,
            c: 4.0,
            walk_deviation_fraction: 1.0,
            guide_boring_small: true,
            inflate_granularity: false,
            direct_subsampling: true,
        }
    }

    /// Look up a built-in profile by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Profile::paper()),
            "practical" => Some(Profile::practical()),
            _ => None,
        }
    }
}

impl Default for Profile {
    /// The reference profile is the default.
    fn default() -> Self {
        Profile::paper()
    }
}

/// Engine-wide configuration: a profile plus run-shape switches.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Constant profile.
    pub profile: Profile,
    /// Override the step count `T` (otherwise `profile.step_multiplier · k²`).
    pub step_override: Option<u64>,
    /// Stop the walk as soon as no column is moving. Off by default: without
    /// it the walk runs all `T` steps (the frozen tail is advanced in closed
    /// form — state provably cannot change — so the potential trace still has
    /// full length).
    pub early_exit: bool,
    /// Record the per-step potential trace (cheap; on by default).
    pub record_potential_trace: bool,
    /// Record per-step signed column moves, enabling independent recomputation
    /// of the potential at any step. Off by default (memory proportional to
    /// total moves).
    pub record_history: bool,
    /// Minimum set size accepted by the YES/NO/MAYBE partitioner. `None` uses
    /// `⌈10·ln(max(n,2))⌉` — partition guarantees need sets of logarithmic size.
    pub partition_min_set_size: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            profile: Profile::default(),
            step_override: None,
            early_exit: false,
            record_potential_trace: true,
            record_history: false,
            partition_min_set_size: None,
        }
    }
}

impl EngineConfig {
    /// Config with the given profile and all other switches at their defaults.
    pub fn with_profile(profile: Profile) -> Self {
        EngineConfig {
            profile,
            ..EngineConfig::default()
        }
    }

    /// Number of walk steps for granularity `k`.
    pub fn steps_for(&self, k: u32) -> u64 {
        self.step_override
            .unwrap_or(self.profile.step_multiplier * (k as u64) * (k as u64))
    }

    /// Report label of the active profile.
    pub fn profile_name(&self) -> String {
        String::from(self.profile.name)
    }
}
