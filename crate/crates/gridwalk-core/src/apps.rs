//! Front doors for the three motivating sampling setups: uniform set-system
//! sampling, graph neighborhood sampling, and the YES/NO/MAYBE partition.
//!
//! Each builds a constraint system, delegates to the rounding engine, and
//! verifies its guarantee *directly from the output* — window membership and
//! label counts are always recomputed from the returned sample, never read
//! from engine internals.

use alloc::vec;
use alloc::vec::Vec;

use crate::concentration::{fix_chernoff, ExponentReport, SubsamplingPlan};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::matrix::ConstraintMatrix;
use crate::numeric;
use crate::partial::{partial_fix, PartialDiagnostics};

/// A ground set `[n]` together with index sets `S_1..S_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    ground: usize,
    sets: Vec<Vec<u32>>,
}

impl SetSystem {
    /// Build a set system over ground size `n`. Sets are sorted; duplicate
    /// indices within a set and out-of-range indices are rejected.
    pub fn new(n: usize, mut sets: Vec<Vec<u32>>) -> Result<Self> {
        for (i, s) in sets.iter_mut().enumerate() {
            s.sort_unstable();
            for w in s.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::invalid(alloc::format!(
                        "set {i} contains element {} twice",
                        w[0]
                    )));
                }
            }
            if let Some(&last) = s.last() {
                if last as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        kind: "element",
                        index: last as usize,
                        bound: n,
                    });
                }
            }
        }
        Ok(SetSystem { ground: n, sets })
    }

    /// Ground set size `n`.
    pub fn ground_size(&self) -> usize {
        self.ground
    }

    /// Number of sets `m`.
    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// The sets, each sorted ascending.
    pub fn sets(&self) -> &[Vec<u32>] {
        &self.sets
    }

    /// Unit-weight membership matrix: row `i` has weight 1 on each `j ∈ S_i`.
    pub fn membership_matrix(&self) -> Result<ConstraintMatrix> {
        let rows: Vec<Vec<(u32, f64)>> = self
            .sets
            .iter()
            .map(|s| s.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        ConstraintMatrix::from_rows(self.ground, &rows)
    }
}

/// An undirected graph stored as symmetric adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// Build from an edge list over vertices `0..n`. Rejects out-of-range
    /// endpoints, self-loops, and duplicate edges.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::IndexOutOfRange {
                    kind: "vertex",
                    index: u.max(v) as usize,
                    bound: n,
                });
            }
            if u == v {
                return Err(Error::invalid(alloc::format!(
                    "self-loop at vertex {u} is not allowed"
                )));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::DuplicateEntry {
                        row: v,
                        col: w[0] as usize,
                    });
                }
            }
        }
        Ok(Graph { adj })
    }

    /// Vertex count.
    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    /// Degree of vertex `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Neighbors of `v`, sorted ascending.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }
}

/// Verification of one set against its `(1±ε)·p·|S_i|` window.
#[derive(Debug, Clone, PartialEq)]
pub struct SetWindow {
    /// `|S_i|`.
    pub size: usize,
    /// `|S_i ∩ T|`.
    pub count: usize,
    /// Lower window edge `(1−ε)·p·|S_i|`.
    pub low: f64,
    /// Upper window edge `(1+ε)·p·|S_i|`.
    pub high: f64,
    /// Whether the count landed inside the window.
    pub in_window: bool,
}

/// Outcome of [`sample_sets`]: a sample plus direct per-set verification.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSampleOutcome {
    /// Sampled elements `T`, ascending.
    pub sample: Vec<u32>,
    /// 0/1 membership vector over the ground set.
    pub membership: Vec<u8>,
    /// One window check per set, computed from `T` directly.
    pub windows: Vec<SetWindow>,
    /// Sets whose engine conditions failed, ascending.
    pub bad_sets: Vec<u32>,
    /// Regime threshold `ln(max(n,2))/(p·ε²)` on the set size.
    pub regime_threshold: f64,
    /// Sets smaller than the regime threshold (guarantee not promised, still
    /// sampled and measured), ascending.
    pub below_regime: Vec<u32>,
    /// Failure bounds of the underlying rounding.
    pub report: ExponentReport,
    /// Subsampling levels run underneath.
    pub levels: Vec<SubsamplingPlan>,
    /// Total derandomization work.
    pub total_work: u64,
    /// Total walk steps run across all underlying fixes.
    pub total_steps: u64,
}

/// Deterministically sample `T ⊆ [n]` so every set gets
/// `|S_i ∩ T| ∈ (1±ε)·p·|S_i|` outside the reported bad sets.
///
/// Empty sets are rejected (their budget `ε·p·|S_i|` would be zero). With no
/// sets at all, the unconstrained instance rounds every probability the same
/// way the constrained fixer would (grid-round, then all-zero); the outcome
/// simply carries zero windows.
pub fn sample_sets(
    system: &SetSystem,
    p: f64,
    epsilon: f64,
    k: u32,
    config: &EngineConfig,
) -> Result<SetSampleOutcome> {
    if !p.is_finite() || !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "sampling probability must lie in (0,1], got {p}"
        )));
    }
    if !epsilon.is_finite() || !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "tolerance must lie in (0,1], got {epsilon}"
        )));
    }
    for (i, s) in system.sets().iter().enumerate() {
        if s.is_empty() {
            return Err(Error::invalid(alloc::format!(
                "set {i} is empty; its deviation budget would be zero"
            )));
        }
    }
    let n = system.ground_size();
    let regime_threshold =
        numeric::ln(n.max(2) as f64) / (p * epsilon * epsilon);
    let below_regime: Vec<u32> = system
        .sets()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| ((s.len() as f64) < regime_threshold).then_some(i as u32))
        .collect();

    let matrix = system.membership_matrix()?;
    let probs = vec![p; n];
    let deltas: Vec<f64> = system
        .sets()
        .iter()
        .map(|s| epsilon * p * s.len() as f64)
        .collect();
    let res = fix_chernoff(&matrix, &probs, &deltas, k, config)?;

    let membership = res.bits.clone();
    let sample: Vec<u32> = membership
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| (b == 1).then_some(j as u32))
        .collect();
    let windows = system
        .sets()
        .iter()
        .map(|s| {
            let count = s.iter().filter(|&&j| membership[j as usize] == 1).count();
            let mean = p * s.len() as f64;
            let low = (1.0 - epsilon) * mean;
            let high = (1.0 + epsilon) * mean;
            let c = count as f64;
            SetWindow {
                size: s.len(),
                count,
                low,
                high,
                in_window: c >= low - 1e-9 && c <= high + 1e-9,
            }
        })
        .collect();
    Ok(SetSampleOutcome {
        sample,
        membership,
        windows,
        bad_sets: res.bad_rows,
        regime_threshold,
        below_regime,
        report: res.report,
        levels: res.levels,
        total_work: res.total_work,
        total_steps: res.total_steps,
    })
}

/// Outcome of [`sample_graph_neighbors`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSampleOutcome {
    /// Sampled vertices `T`, ascending.
    pub sample: Vec<u32>,
    /// 0/1 membership vector over the vertices.
    pub membership: Vec<u8>,
    /// Vertices whose neighborhoods were constrained (degree at or above the
    /// regime threshold), ascending; aligns with `windows`.
    pub constrained: Vec<u32>,
    /// Vertices below the degree threshold (sampled but not constrained),
    /// ascending.
    pub skipped: Vec<u32>,
    /// One window check per constrained vertex.
    pub windows: Vec<SetWindow>,
    /// Constrained vertices whose engine conditions failed, ascending.
    pub bad_vertices: Vec<u32>,
    /// Degree threshold `ln(max(n,2))/(p·ε²)`.
    pub regime_threshold: f64,
    /// Failure bounds of the underlying rounding.
    pub report: ExponentReport,
    /// Total derandomization work.
    pub total_work: u64,
    /// Total walk steps run across all underlying fixes.
    pub total_steps: u64,
}

/// Deterministically sample vertices so every sufficiently high-degree
/// vertex `v` sees `(1±ε)·p·d_v` of its neighbors sampled.
///
/// Vertices below the regime degree threshold are not constrained (their
/// guarantee is not promised at that scale); they are listed in `skipped`.
/// An edgeless graph yields zero constraints.
pub fn sample_graph_neighbors(
    graph: &Graph,
    p: f64,
    epsilon: f64,
    k: u32,
    config: &EngineConfig,
) -> Result<NeighborSampleOutcome> {
    if !p.is_finite() || !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "sampling probability must lie in (0,1], got {p}"
        )));
    }
    if !epsilon.is_finite() || !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "tolerance must lie in (0,1], got {epsilon}"
        )));
    }
    let n = graph.vertex_count();
    let regime_threshold =
        numeric::ln(n.max(2) as f64) / (p * epsilon * epsilon);
    let mut constrained = Vec::new();
    let mut skipped = Vec::new();
    for v in 0..n {
        if graph.degree(v) as f64 >= regime_threshold {
            constrained.push(v as u32);
        } else {
            skipped.push(v as u32);
        }
    }
    let sets: Vec<Vec<u32>> = constrained
        .iter()
        .map(|&v| graph.neighbors(v as usize).to_vec())
        .collect();
    let system = SetSystem::new(n, sets)?;
    let out = sample_sets(&system, p, epsilon, k, config)?;
    let bad_vertices: Vec<u32> = out
        .bad_sets
        .iter()
        .map(|&r| constrained[r as usize])
        .collect();
    Ok(NeighborSampleOutcome {
        sample: out.sample,
        membership: out.membership,
        constrained,
        skipped,
        windows: out.windows,
        bad_vertices,
        regime_threshold,
        report: out.report,
        total_work: out.total_work,
        total_steps: out.total_steps,
    })
}

/// Label of one element after partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// Frozen at 1.
    Yes,
    /// Frozen at 0.
    No,
    /// Still fractional when the walk ended.
    Maybe,
}

impl Label {
    /// Stable uppercase label (used by reports).
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "YES",
            Label::No => "NO",
            Label::Maybe => "MAYBE",
        }
    }
}

/// Per-set label tally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetLabelCount {
    /// `|S_i|`.
    pub size: usize,
    /// Elements labeled YES.
    pub yes: usize,
    /// Elements labeled NO.
    pub no: usize,
    /// Elements still fractional.
    pub maybe: usize,
    /// Whether the set got at least `|S_i|/5` of each decided label.
    pub satisfied: bool,
}

/// Outcome of [`partition_yes_no`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOutcome {
    /// Final grid values (YES = 1, NO = 0, MAYBE strictly between).
    pub values: Vec<f64>,
    /// One label per ground element.
    pub labels: Vec<Label>,
    /// Elements labeled YES, ascending.
    pub yes: Vec<u32>,
    /// Elements labeled NO, ascending.
    pub no: Vec<u32>,
    /// Undecided elements, ascending.
    pub maybe: Vec<u32>,
    /// Per-set tallies.
    pub per_set: Vec<SetLabelCount>,
    /// Sets whose engine conditions failed, ascending.
    pub bad_sets: Vec<u32>,
    /// Minimum set size that was enforced.
    pub min_set_size: usize,
    /// Walk diagnostics of the underlying run.
    pub diagnostics: PartialDiagnostics,
}

/// Split the ground set into YES/NO/MAYBE so every set keeps at least a
/// fifth of its elements in each decided class (outside the reported bad
/// sets). Runs the guided walk from the all-branch point `p = 1/2` with
/// per-set budget `|S_i|/6`.
///
/// Sets smaller than the configured minimum (default `⌈10·ln(max(n,2))⌉`)
/// are rejected: the guarantee needs logarithmic size.
pub fn partition_yes_no(
    system: &SetSystem,
    k: u32,
    config: &EngineConfig,
) -> Result<PartitionOutcome> {
    let n = system.ground_size();
    let min_set_size = config
        .partition_min_set_size
        .unwrap_or_else(|| numeric::ceil(10.0 * numeric::ln(n.max(2) as f64)) as usize);
    for (i, s) in system.sets().iter().enumerate() {
        if s.len() < min_set_size {
            return Err(Error::invalid(alloc::format!(
                "set {i} has {} elements but the partition regime needs at least \
                 {min_set_size}; pass a smaller minimum explicitly to override",
                s.len()
            )));
        }
    }
    let matrix = system.membership_matrix()?;
    let probs = vec![0.5; n];
    let deltas: Vec<f64> = system
        .sets()
        .iter()
        .map(|s| s.len() as f64 / 6.0)
        .collect();
    let res = partial_fix(&matrix, &probs, &deltas, k, config)?;

    let mut labels = Vec::with_capacity(n);
    let (mut yes, mut no, mut maybe) = (Vec::new(), Vec::new(), Vec::new());
    for (j, &num) in res.numerators.iter().enumerate() {
        let label = if num == res.k {
            yes.push(j as u32);
            Label::Yes
        } else if num == 0 {
            no.push(j as u32);
            Label::No
        } else {
            maybe.push(j as u32);
            Label::Maybe
        };
        labels.push(label);
    }
    let per_set = system
        .sets()
        .iter()
        .map(|s| {
            let mut count = SetLabelCount {
                size: s.len(),
                yes: 0,
                no: 0,
                maybe: 0,
                satisfied: false,
            };
            for &j in s {
                match labels[j as usize] {
                    Label::Yes => count.yes += 1,
                    Label::No => count.no += 1,
                    Label::Maybe => count.maybe += 1,
                }
            }
            let fifth = s.len() as f64 / 5.0;
            count.satisfied = count.yes as f64 >= fifth && count.no as f64 >= fifth;
            count
        })
        .collect();
    Ok(PartitionOutcome {
        values: res.values(),
        labels,
        yes,
        no,
        maybe,
        per_set,
        bad_sets: res.bad_rows,
        min_set_size,
        diagnostics: res.diagnostics,
    })
}
