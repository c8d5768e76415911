//! Shared deterministic instance generators for the integration tests.

use gridwalk_core::{ConstraintMatrix, SplitMix64};

/// Random sparse nonnegative matrix: `m` rows over `n` columns, each row with
/// `1..=max_row_len` distinct columns and weights in `[w_lo, w_hi)`.
pub fn random_matrix(
    rng: &mut SplitMix64,
    m: usize,
    n: usize,
    max_row_len: usize,
    w_lo: f64,
    w_hi: f64,
) -> ConstraintMatrix {
    let rows: Vec<Vec<(u32, f64)>> = (0..m)
        .map(|_| {
            let len = 1 + (rng.next_u64() as usize) % max_row_len.min(n);
            let mut cols: Vec<u32> = Vec::with_capacity(len);
            while cols.len() < len {
                let c = (rng.next_u64() as usize % n) as u32;
                if !cols.contains(&c) {
                    cols.push(c);
                }
            }
            cols.sort_unstable();
            cols.into_iter()
                .map(|c| (c, w_lo + (w_hi - w_lo) * rng.next_f64()))
                .collect()
        })
        .collect();
    ConstraintMatrix::from_rows(n, &rows).expect("generator produces valid rows")
}

/// Random on-grid start positions with numerators in `1..k` (strictly
/// fractional, so every column starts moving).
pub fn random_grid_probs(rng: &mut SplitMix64, n: usize, k: u32) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let num = 1 + (rng.next_u64() % (k as u64 - 1)) as u32;
            num as f64 / k as f64
        })
        .collect()
}

/// Budgets `Δᵢ = scale·Σⱼ aᵢⱼ·pⱼ` (requires every row to have positive mass
/// under `p`).
pub fn budgets_from_scale(matrix: &ConstraintMatrix, p: &[f64], scale: f64) -> Vec<f64> {
    (0..matrix.rows())
        .map(|i| {
            let view = matrix.row(i);
            let mu: f64 = view
                .cols
                .iter()
                .zip(view.values)
                .map(|(&c, &w)| w * p[c as usize])
                .sum();
            assert!(mu > 0.0, "row {i} has no mass under p");
            scale * mu
        })
        .collect()
}
