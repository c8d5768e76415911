//! Deterministic partial fixing: classification, the guided walk, audits.
//!
//! The entry point is [`partial_fix`]; [`classify_rows`] exposes the row
//! regimes and band structure on their own (useful for inspecting an
//! instance, and recomputed internally by the walk).

mod classify;
mod engine;
mod support;

pub use classify::{
    classify_rows, compute_prob_bad_partial, Band, BandKind, IgnoreSet, RowClass,
    RowClassification, RowPlan,
};
pub use engine::{partial_fix, PartialDiagnostics, PartialFixResult, RowAudit, StepRecord};
