//! Argument surface and dispatch for the `gridwalk` binary.
//!
//! Exit codes: 0 on success, 1 on I/O or validation errors (including
//! malformed flags), 2 when `--strict` is set and any row is bad.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gridwalk_core::{
    compute_failure_bounds, fix_bernstein, fix_chernoff, fix_hoeffding, fix_integral,
    monte_carlo_round, partial_fix, partition_yes_no, randomized_walk, sample_graph_neighbors,
    sample_sets, sequential_conditional_fix, BoundMode, ConcentrationResult, ConstraintMatrix,
    EngineConfig, Profile,
};
use serde_json::json;

use crate::formats::{format_values, parse_instance, parse_vector, serialize_instance, Instance};
use crate::report::{read_report, render_report, write_report, RowReport, RunReport};

/// Deterministic rounding, sampling and partitioning on the 1/k grid.
///
/// Every command writes an output vector (one value per line) and a JSON
/// run report. Outputs are byte-identical across runs and thread counts.
#[derive(Parser, Debug)]
#[command(name = "gridwalk", version, disable_help_subcommand = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Constant profile: `practical` (tuned) or `paper` (literal constants).
    #[arg(long, global = true, default_value = "practical")]
    pub profile: String,
    /// Worker threads for objective evaluation (default 1; results do not
    /// depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the output vector here (default: stdout).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Write the JSON run report here (default: stderr).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Write a line-delimited walk trace here (`step potential complexity
    /// moving`; populated by the partial/partition walks).
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Exit with code 2 when any row is bad.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Include wall time in the report (makes reports differ between runs).
    #[arg(long, global = true)]
    pub timing: bool,
}

/// Rounding mode of `fix` (and expected mode in `verify`).
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Partially integral output with per-row certificates.
    Partial,
    /// Fully 0/1 output by recursive fixing.
    Integral,
    /// 0/1 output with Hoeffding-shaped failure bounds.
    Hoeffding,
    /// 0/1 output with Chernoff-shaped failure bounds.
    Chernoff,
    /// 0/1 output with variance-shaped (bucketed) failure bounds.
    Bernstein,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Partial => "partial",
            Mode::Integral => "integral",
            Mode::Hoeffding => "hoeffding",
            Mode::Chernoff => "chernoff",
            Mode::Bernstein => "bernstein",
        }
    }
}

/// Reference algorithm of `baseline`.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Independent random ±1/k grid walk.
    Walk,
    /// Independent Bernoulli rounding.
    MonteCarlo,
    /// Sequential potential-greedy ±1 labeling (sets instance).
    Sequential,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Round a matrix instance under per-row deviation budgets.
    Fix {
        /// Instance file (matrix format).
        #[arg(long)]
        input: PathBuf,
        /// Rounding mode.
        #[arg(long, value_enum, default_value_t = Mode::Partial)]
        mode: Mode,
        /// Grid granularity (even, ≥ 2).
        #[arg(long)]
        k: u32,
        /// Uniform column probability (alternative to --p-file).
        #[arg(long)]
        p: Option<f64>,
        /// File with one probability per column.
        #[arg(long)]
        p_file: Option<PathBuf>,
        /// File with one budget Δᵢ per row.
        #[arg(long)]
        delta_file: Option<PathBuf>,
        /// Budgets as Δᵢ = scale · Σⱼ aᵢⱼ·pⱼ.
        #[arg(long)]
        delta_scale: Option<f64>,
    },
    /// Sample T ⊆ [n] so |Sᵢ ∩ T| ∈ (1±ε)·p·|Sᵢ| for every set.
    SampleSets {
        /// Instance file (sets format).
        #[arg(long)]
        input: PathBuf,
        /// Per-element sampling probability.
        #[arg(long)]
        p: f64,
        /// Window half-width ε.
        #[arg(long)]
        epsilon: f64,
        /// Grid granularity (even, ≥ 2).
        #[arg(long)]
        k: u32,
    },
    /// Sample vertices so each high-degree vertex keeps (1±ε)·p·deg sampled
    /// neighbors.
    SampleGraph {
        /// Instance file (graph format).
        #[arg(long)]
        input: PathBuf,
        /// Per-vertex sampling probability.
        #[arg(long)]
        p: f64,
        /// Window half-width ε.
        #[arg(long)]
        epsilon: f64,
        /// Grid granularity (even, ≥ 2).
        #[arg(long)]
        k: u32,
    },
    /// Split the ground set into YES/NO/MAYBE keeping every set balanced.
    Partition {
        /// Instance file (sets format).
        #[arg(long)]
        input: PathBuf,
        /// Grid granularity (even, ≥ 2).
        #[arg(long)]
        k: u32,
        /// Minimum accepted set size (default ⌈10·ln(max(n,2))⌉).
        #[arg(long)]
        min_set_size: Option<usize>,
    },
    /// Run a randomized or sequential reference algorithm.
    Baseline {
        /// Instance file (matrix for walk/monte-carlo, sets for sequential).
        #[arg(long)]
        input: PathBuf,
        /// Which reference algorithm to run.
        #[arg(long, value_enum, default_value_t = Algorithm::Walk)]
        algorithm: Algorithm,
        /// Seed of the splitmix64 generator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid granularity (walk only).
        #[arg(long)]
        k: Option<u32>,
        /// Uniform column probability (walk/monte-carlo).
        #[arg(long)]
        p: Option<f64>,
        /// File with one probability per column (walk/monte-carlo).
        #[arg(long)]
        p_file: Option<PathBuf>,
        /// File with one budget Δᵢ per row (walk/monte-carlo).
        #[arg(long)]
        delta_file: Option<PathBuf>,
        /// Budgets as Δᵢ = scale · Σⱼ aᵢⱼ·pⱼ (walk/monte-carlo).
        #[arg(long)]
        delta_scale: Option<f64>,
    },
    /// Parse an instance and print it back in canonical form.
    Fmt {
        /// Instance file (matrix, sets or graph format).
        #[arg(long)]
        input: PathBuf,
    },
    /// Recompute deviations for an output vector and cross-check a report.
    Verify {
        /// Instance file.
        #[arg(long)]
        input: PathBuf,
        /// The output vector to verify (one value per line).
        #[arg(long)]
        q: PathBuf,
        /// Report to cross-check against the recomputation.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Expected mode (integral modes enforce a fully 0/1 vector).
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Uniform column probability (matrix/sets/graph instances).
        #[arg(long)]
        p: Option<f64>,
        /// File with one probability per column (matrix instances).
        #[arg(long)]
        p_file: Option<PathBuf>,
        /// File with one budget Δᵢ per row (matrix instances).
        #[arg(long)]
        delta_file: Option<PathBuf>,
        /// Budgets as Δᵢ = scale · Σⱼ aᵢⱼ·pⱼ (matrix instances).
        #[arg(long)]
        delta_scale: Option<f64>,
        /// Window half-width ε (sets/graph instances).
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

struct Dispatched {
    /// Pre-formatted output text (absent for `verify`).
    output: Option<String>,
    /// Run report (absent for `fmt`).
    report: Option<RunReport>,
    /// Trace lines, when the underlying walk recorded one.
    trace: Option<String>,
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let profile = Profile::by_name(&cli.profile)
        .ok_or_else(|| anyhow!("unknown profile `{}` (use `practical` or `paper`)", cli.profile))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(1))
        .build()
        .context("cannot build thread pool")?;
    let started = Instant::now();
    let mut dispatched = pool.install(|| dispatch(&cli, profile))?;
    if cli.timing {
        if let Some(report) = &mut dispatched.report {
            report.wall_time_seconds = Some(started.elapsed().as_secs_f64());
        }
    }

    if let Some(text) = &dispatched.output {
        match &cli.output {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("cannot write output to {}", path.display()))?,
            None => print!("{text}"),
        }
    }
    if let Some(report) = &dispatched.report {
        match &cli.report {
            Some(path) => write_report(report, path)?,
            None => eprint!("{}", render_report(report)),
        }
    }
    if let Some(path) = &cli.trace {
        let text = dispatched
            .trace
            .unwrap_or_else(|| String::from("# no walk trace for this command\n"));
        fs::write(path, text)
            .with_context(|| format!("cannot write trace to {}", path.display()))?;
    }
    let bad = dispatched.report.as_ref().map_or(0, |r| r.bad_count);
    Ok(if cli.strict && bad > 0 { 2 } else { 0 })
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read instance {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("in {}", path.display()))
}

fn resolve_probs(
    cols: usize,
    p: Option<f64>,
    p_file: &Option<PathBuf>,
) -> Result<Vec<f64>> {
    match (p, p_file) {
        (Some(v), None) => {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                bail!("--p must lie in [0,1], got {v}");
            }
            Ok(vec![v; cols])
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let v = parse_vector(&text, "probability")?;
            if v.len() != cols {
                bail!(
                    "{} has {} probabilities but the instance has {cols} columns",
                    path.display(),
                    v.len()
                );
            }
            Ok(v)
        }
        (Some(_), Some(_)) => bail!("give --p or --p-file, not both"),
        (None, None) => bail!("give --p or --p-file"),
    }
}

fn row_dot(matrix: &ConstraintMatrix, i: usize, p: &[f64]) -> f64 {
    let view = matrix.row(i);
    let mut acc = 0.0;
    for (idx, &c) in view.cols.iter().enumerate() {
        acc += view.values[idx] * p[c as usize];
    }
    acc
}

fn resolve_deltas(
    matrix: &ConstraintMatrix,
    p: &[f64],
    delta_file: &Option<PathBuf>,
    delta_scale: Option<f64>,
) -> Result<Vec<f64>> {
    match (delta_file, delta_scale) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let v = parse_vector(&text, "budget")?;
            if v.len() != matrix.rows() {
                bail!(
                    "{} has {} budgets but the instance has {} rows",
                    path.display(),
                    v.len(),
                    matrix.rows()
                );
            }
            Ok(v)
        }
        (None, Some(scale)) => {
            if !scale.is_finite() || scale <= 0.0 {
                bail!("--delta-scale must be finite and > 0, got {scale}");
            }
            let mut out = Vec::with_capacity(matrix.rows());
            for i in 0..matrix.rows() {
                let mu = row_dot(matrix, i, p);
                if mu <= 0.0 {
                    bail!(
                        "row {i} has Σ aᵢⱼ·pⱼ = 0, so --delta-scale gives it no budget; \
                         use --delta-file"
                    );
                }
                out.push(scale * mu);
            }
            Ok(out)
        }
        (Some(_), Some(_)) => bail!("give --delta-file or --delta-scale, not both"),
        (None, None) => bail!("give --delta-file or --delta-scale"),
    }
}

fn bad_flags(rows: usize, bad: &[u32]) -> Vec<bool> {
    let mut flags = vec![false; rows];
    for &i in bad {
        flags[i as usize] = true;
    }
    flags
}

fn blank_report(command: &str, mode: &str, k: u32, profile: &Profile) -> RunReport {
    RunReport {
        command: command.into(),
        mode: mode.into(),
        k,
        k_effective: k,
        profile: String::from(profile.name),
        rows_total: 0,
        rows: Vec::new(),
        bad_rows: Vec::new(),
        bad_count: 0,
        prob_bad_sum: 0.0,
        work: 0,
        steps: 0,
        wall_time_seconds: None,
        details: None,
    }
}

fn trace_text(diag: &gridwalk_core::partial::PartialDiagnostics) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("# step potential complexity moving\n");
    for (t, &pot) in diag.pot_trace.iter().enumerate() {
        let complexity = if t == 0 {
            0
        } else {
            diag.complexity_trace.get(t - 1).copied().unwrap_or(0)
        };
        let moving = if t == 0 {
            diag.moving_trace.first().copied().unwrap_or(0)
        } else {
            diag.moving_trace.get(t).copied().unwrap_or(0)
        };
        let _ = writeln!(out, "{t} {pot} {complexity} {moving}");
    }
    out
}

fn levels_json(levels: &[gridwalk_core::concentration::SubsamplingPlan]) -> serde_json::Value {
    json!(levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "epsilon": l.epsilon,
                "alpha": l.alpha,
                "small_columns": l.small_columns,
                "k_small": l.k_small,
                "doubled": l.doubled,
                "dropped": l.dropped,
                "bad_rows": l.bad_rows,
            })
        })
        .collect::<Vec<_>>())
}

fn concentration_report(
    command: &str,
    mode: Mode,
    k: u32,
    profile: &Profile,
    deltas: &[f64],
    res: &ConcentrationResult,
) -> RunReport {
    let flags = bad_flags(deltas.len(), &res.bad_rows);
    let mut report = blank_report(command, mode.as_str(), k, profile);
    report.k_effective = res.report.k_effective;
    report.rows = res
        .deviations
        .iter()
        .enumerate()
        .map(|(i, &d)| RowReport {
            deviation: d,
            delta: deltas[i],
            prob_bad: res.report.rows[i].prob_bad,
            bad: flags[i],
        })
        .collect();
    report.work = res.total_work;
    report.steps = res.total_steps;
    report.details = Some(json!({ "levels": levels_json(&res.levels) }));
    report.finalize()
}

fn dispatch(cli: &Cli, profile: Profile) -> Result<Dispatched> {
    match &cli.command {
        Command::Fix {
            input,
            mode,
            k,
            p,
            p_file,
            delta_file,
            delta_scale,
        } => {
            let Instance::Matrix(matrix) = read_instance(input)? else {
                bail!("`fix` needs a matrix instance");
            };
            let probs = resolve_probs(matrix.cols(), *p, p_file)?;
            let deltas = resolve_deltas(&matrix, &probs, delta_file, *delta_scale)?;
            let mut config = EngineConfig::with_profile(profile.clone());
            config.record_potential_trace = cli.trace.is_some();
            match mode {
                Mode::Partial => {
                    let res = partial_fix(&matrix, &probs, &deltas, *k, &config)
                        .map_err(|e| anyhow!("{e}"))?;
                    let mut report = blank_report("fix", "partial", *k, &profile);
                    report.rows = res
                        .audits
                        .iter()
                        .enumerate()
                        .map(|(i, a)| RowReport {
                            deviation: a.deviation,
                            delta: deltas[i],
                            prob_bad: a.prob_bad.min(1.0),
                            bad: a.bad,
                        })
                        .collect();
                    report.work = res.diagnostics.derandomize_work;
                    report.steps = res.diagnostics.steps_run;
                    report.details = Some(json!({
                        "active_steps": res.diagnostics.active_steps,
                        "max_objective_complexity": res.diagnostics.max_objective_complexity,
                        "pot_initial": res.diagnostics.pot_initial,
                        "pot_final": res.diagnostics.pot_final,
                        "moving_final": res.moving_columns().len(),
                    }));
                    Ok(Dispatched {
                        output: Some(format_values(&res.values())),
                        trace: cli.trace.is_some().then(|| trace_text(&res.diagnostics)),
                        report: Some(report.finalize()),
                    })
                }
                Mode::Integral => {
                    let res = fix_integral(&matrix, &probs, &deltas, *k, &config)
                        .map_err(|e| anyhow!("{e}"))?;
                    let bounds =
                        compute_failure_bounds(&matrix, &probs, &deltas, *k, BoundMode::Partial, &config)
                            .map_err(|e| anyhow!("{e}"))?;
                    let flags = bad_flags(deltas.len(), &res.bad_rows);
                    let mut report = blank_report("fix", "integral", *k, &profile);
                    report.rows = res
                        .deviations
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| RowReport {
                            deviation: d,
                            delta: deltas[i],
                            prob_bad: bounds.rows[i].prob_bad,
                            bad: flags[i],
                        })
                        .collect();
                    report.work = res.total_work;
                    report.steps = res.levels.iter().map(|l| l.steps).sum();
                    report.details = Some(json!({
                        "levels": res.levels.iter().map(|l| json!({
                            "moving_before": l.moving_before,
                            "frozen_during": l.frozen_during,
                            "rows_active": l.rows_active,
                            "rows_dropped": l.rows_dropped,
                            "mass_ratio": l.mass_ratio,
                            "steps": l.steps,
                        })).collect::<Vec<_>>(),
                        "forced_columns": res.forced_columns,
                    }));
                    Ok(Dispatched {
                        output: Some(format_values(&res.values())),
                        trace: None,
                        report: Some(report.finalize()),
                    })
                }
                Mode::Hoeffding | Mode::Chernoff | Mode::Bernstein => {
                    let res = match mode {
                        Mode::Hoeffding => fix_hoeffding(&matrix, &probs, &deltas, *k, &config),
                        Mode::Chernoff => fix_chernoff(&matrix, &probs, &deltas, *k, &config),
                        _ => fix_bernstein(&matrix, &probs, &deltas, *k, &config),
                    }
                    .map_err(|e| anyhow!("{e}"))?;
                    let report =
                        concentration_report("fix", *mode, *k, &profile, &deltas, &res);
                    Ok(Dispatched {
                        output: Some(format_values(&res.values())),
                        trace: None,
                        report: Some(report),
                    })
                }
            }
        }
        Command::SampleSets {
            input,
            p,
            epsilon,
            k,
        } => {
            let Instance::Sets(system) = read_instance(input)? else {
                bail!("`sample-sets` needs a sets instance");
            };
            let config = EngineConfig::with_profile(profile.clone());
            let out = sample_sets(&system, *p, *epsilon, *k, &config).map_err(|e| anyhow!("{e}"))?;
            let flags = bad_flags(system.num_sets(), &out.bad_sets);
            let mut report = blank_report("sample-sets", "chernoff", *k, &profile);
            report.k_effective = out.report.k_effective;
            report.rows = out
                .windows
                .iter()
                .enumerate()
                .map(|(i, w)| RowReport {
                    deviation: p * w.size as f64 - w.count as f64,
                    delta: epsilon * p * w.size as f64,
                    prob_bad: out.report.rows[i].prob_bad,
                    bad: flags[i],
                })
                .collect();
            report.work = out.total_work;
            report.steps = out.total_steps;
            report.details = Some(json!({
                "sample_size": out.sample.len(),
                "regime_threshold": out.regime_threshold,
                "below_regime": out.below_regime,
                "windows": out.windows.iter().map(|w| json!({
                    "size": w.size,
                    "count": w.count,
                    "low": w.low,
                    "high": w.high,
                    "in_window": w.in_window,
                })).collect::<Vec<_>>(),
                "levels": levels_json(&out.levels),
            }));
            let bits: Vec<f64> = out.membership.iter().map(|&b| b as f64).collect();
            Ok(Dispatched {
                output: Some(format_values(&bits)),
                trace: None,
                report: Some(report.finalize()),
            })
        }
        Command::SampleGraph {
            input,
            p,
            epsilon,
            k,
        } => {
            let Instance::Graph(graph) = read_instance(input)? else {
                bail!("`sample-graph` needs a graph instance");
            };
            let config = EngineConfig::with_profile(profile.clone());
            let out = sample_graph_neighbors(&graph, *p, *epsilon, *k, &config)
                .map_err(|e| anyhow!("{e}"))?;
            let mut bad_row_flags = vec![false; out.constrained.len()];
            for (r, &v) in out.constrained.iter().enumerate() {
                if out.bad_vertices.binary_search(&v).is_ok() {
                    bad_row_flags[r] = true;
                }
            }
            let mut report = blank_report("sample-graph", "chernoff", *k, &profile);
            report.k_effective = out.report.k_effective;
            report.rows = out
                .windows
                .iter()
                .enumerate()
                .map(|(i, w)| RowReport {
                    deviation: p * w.size as f64 - w.count as f64,
                    delta: epsilon * p * w.size as f64,
                    prob_bad: out.report.rows[i].prob_bad,
                    bad: bad_row_flags[i],
                })
                .collect();
            report.work = out.total_work;
            report.steps = out.total_steps;
            report.details = Some(json!({
                "sample_size": out.sample.len(),
                "regime_threshold": out.regime_threshold,
                "constrained": out.constrained,
                "skipped_count": out.skipped.len(),
                "windows": out.windows.iter().map(|w| json!({
                    "size": w.size,
                    "count": w.count,
                    "low": w.low,
                    "high": w.high,
                    "in_window": w.in_window,
                })).collect::<Vec<_>>(),
            }));
            let bits: Vec<f64> = out.membership.iter().map(|&b| b as f64).collect();
            Ok(Dispatched {
                output: Some(format_values(&bits)),
                trace: None,
                report: Some(report.finalize()),
            })
        }
        Command::Partition {
            input,
            k,
            min_set_size,
        } => {
            let Instance::Sets(system) = read_instance(input)? else {
                bail!("`partition` needs a sets instance");
            };
            let mut config = EngineConfig::with_profile(profile.clone());
            config.partition_min_set_size = *min_set_size;
            config.record_potential_trace = cli.trace.is_some();
            let out = partition_yes_no(&system, *k, &config).map_err(|e| anyhow!("{e}"))?;
            let matrix = system.membership_matrix().map_err(|e| anyhow!("{e}"))?;
            let deltas: Vec<f64> = system
                .sets()
                .iter()
                .map(|s| s.len() as f64 / 6.0)
                .collect();
            let bounds = compute_failure_bounds(
                &matrix,
                &vec![0.5; system.ground_size()],
                &deltas,
                *k,
                BoundMode::Partial,
                &config,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let flags = bad_flags(system.num_sets(), &out.bad_sets);
            let mut report = blank_report("partition", "partial", *k, &profile);
            report.rows = system
                .sets()
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let dev: f64 = s.iter().map(|&j| 0.5 - out.values[j as usize]).sum();
                    RowReport {
                        deviation: dev,
                        delta: deltas[i],
                        prob_bad: bounds.rows[i].prob_bad,
                        bad: flags[i],
                    }
                })
                .collect();
            report.work = out.diagnostics.derandomize_work;
            report.steps = out.diagnostics.steps_run;
            report.details = Some(json!({
                "yes": out.yes.len(),
                "no": out.no.len(),
                "maybe": out.maybe.len(),
                "min_set_size": out.min_set_size,
                "per_set": out.per_set.iter().map(|t| json!({
                    "size": t.size,
                    "yes": t.yes,
                    "no": t.no,
                    "maybe": t.maybe,
                    "satisfied": t.satisfied,
                })).collect::<Vec<_>>(),
            }));
            Ok(Dispatched {
                output: Some(format_values(&out.values)),
                trace: cli.trace.is_some().then(|| trace_text(&out.diagnostics)),
                report: Some(report.finalize()),
            })
        }
        Command::Baseline {
            input,
            algorithm,
            seed,
            k,
            p,
            p_file,
            delta_file,
            delta_scale,
        } => match algorithm {
            Algorithm::Walk | Algorithm::MonteCarlo => {
                let Instance::Matrix(matrix) = read_instance(input)? else {
                    bail!("`baseline --algorithm {:?}` needs a matrix instance", algorithm);
                };
                let probs = resolve_probs(matrix.cols(), *p, p_file)?;
                let deltas = resolve_deltas(&matrix, &probs, delta_file, *delta_scale)?;
                let config = EngineConfig::with_profile(profile.clone());
                let (values, steps, mode_name, bound_mode) = match algorithm {
                    Algorithm::Walk => {
                        let kk = k.ok_or_else(|| anyhow!("`baseline --algorithm walk` needs --k"))?;
                        let res = randomized_walk(&matrix, &probs, kk, *seed)
                            .map_err(|e| anyhow!("{e}"))?;
                        (res.values, res.steps, "walk", BoundMode::Partial)
                    }
                    _ => {
                        let q = monte_carlo_round(&probs, *seed).map_err(|e| anyhow!("{e}"))?;
                        let values: Vec<f64> = q.iter().map(|&b| b as f64).collect();
                        (values, 0, "monte-carlo", BoundMode::Hoeffding)
                    }
                };
                let deviations = matrix.deviations(&probs, &values);
                let bounds =
                    compute_failure_bounds(&matrix, &probs, &deltas, k.unwrap_or(2), bound_mode, &config)
                        .map_err(|e| anyhow!("{e}"))?;
                let mut report = blank_report("baseline", mode_name, k.unwrap_or(0), &profile);
                report.rows = deviations
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| RowReport {
                        deviation: d,
                        delta: deltas[i],
                        prob_bad: bounds.rows[i].prob_bad,
                        bad: d.abs() > deltas[i],
                    })
                    .collect();
                report.steps = steps;
                report.details = Some(json!({ "seed": seed }));
                Ok(Dispatched {
                    output: Some(format_values(&values)),
                    trace: None,
                    report: Some(report.finalize()),
                })
            }
            Algorithm::Sequential => {
                let Instance::Sets(system) = read_instance(input)? else {
                    bail!("`baseline --algorithm sequential` needs a sets instance");
                };
                let res = sequential_conditional_fix(&system).map_err(|e| anyhow!("{e}"))?;
                let values: Vec<f64> = res
                    .labels
                    .iter()
                    .map(|&x| if x == 1 { 1.0 } else { 0.0 })
                    .collect();
                let mut report = blank_report("baseline", "sequential", 0, &profile);
                report.rows = system
                    .sets()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let (plus, _minus) = res.per_set[i];
                        let dev = s.len() as f64 / 2.0 - plus as f64;
                        let delta = s.len() as f64 / 6.0;
                        RowReport {
                            deviation: dev,
                            delta,
                            prob_bad: 0.0,
                            bad: dev.abs() > delta,
                        }
                    })
                    .collect();
                report.steps = system.ground_size() as u64;
                report.details = Some(json!({
                    "pot_initial": res.pot_trace.first().copied().unwrap_or(1.0),
                    "pot_final": res.pot_trace.last().copied().unwrap_or(1.0),
                    "per_set": res.per_set.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
                }));
                Ok(Dispatched {
                    output: Some(format_values(&values)),
                    trace: None,
                    report: Some(report.finalize()),
                })
            }
        },
        Command::Fmt { input } => {
            let instance = read_instance(input)?;
            Ok(Dispatched {
                output: Some(serialize_instance(&instance)),
                trace: None,
                report: None,
            })
        }
        Command::Verify {
            input,
            q,
            against,
            mode,
            p,
            p_file,
            delta_file,
            delta_scale,
            epsilon,
        } => {
            let instance = read_instance(input)?;
            let q_text = fs::read_to_string(q)
                .with_context(|| format!("cannot read vector {}", q.display()))?;
            let values = parse_vector(&q_text, "value")?;
            let against_report = against.as_ref().map(|path| read_report(path)).transpose()?;
            let expected_mode: Option<String> = mode
                .map(|m| m.as_str().to_string())
                .or_else(|| against_report.as_ref().map(|r| r.mode.clone()));
            let integral_expected = matches!(
                expected_mode.as_deref(),
                Some("integral") | Some("hoeffding") | Some("chernoff") | Some("bernstein")
                    | Some("monte-carlo") | Some("sequential")
            );
            if integral_expected {
                if let Some(v) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
                    bail!(
                        "expected a 0/1 vector for mode {}, found value {v}",
                        expected_mode.as_deref().unwrap_or("integral")
                    );
                }
            }

            let (rows, check_cols) = match &instance {
                Instance::Matrix(matrix) => {
                    let probs = resolve_probs(matrix.cols(), *p, p_file)?;
                    let deltas = resolve_deltas(matrix, &probs, delta_file, *delta_scale)?;
                    if values.len() != matrix.cols() {
                        bail!(
                            "vector has {} entries but the instance has {} columns",
                            values.len(),
                            matrix.cols()
                        );
                    }
                    let deviations = matrix.deviations(&probs, &values);
                    let rows: Vec<RowReport> = deviations
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| RowReport {
                            deviation: d,
                            delta: deltas[i],
                            prob_bad: 0.0,
                            bad: d.abs() > deltas[i],
                        })
                        .collect();
                    (rows, matrix.cols())
                }
                Instance::Sets(system) => {
                    let pv = p.ok_or_else(|| anyhow!("verifying a sets instance needs --p"))?;
                    let eps =
                        epsilon.ok_or_else(|| anyhow!("verifying a sets instance needs --epsilon"))?;
                    if values.len() != system.ground_size() {
                        bail!(
                            "vector has {} entries but the ground set has {} elements",
                            values.len(),
                            system.ground_size()
                        );
                    }
                    let rows = verify_sets_rows(system.sets(), &values, pv, eps);
                    (rows, system.ground_size())
                }
                Instance::Graph(graph) => {
                    let pv = p.ok_or_else(|| anyhow!("verifying a graph instance needs --p"))?;
                    let eps =
                        epsilon.ok_or_else(|| anyhow!("verifying a graph instance needs --epsilon"))?;
                    if values.len() != graph.vertex_count() {
                        bail!(
                            "vector has {} entries but the graph has {} vertices",
                            values.len(),
                            graph.vertex_count()
                        );
                    }
                    let n = graph.vertex_count();
                    let threshold =
                        (n.max(2) as f64).ln() / (pv * eps * eps);
                    let sets: Vec<Vec<u32>> = (0..n)
                        .filter(|&v| graph.degree(v) as f64 >= threshold)
                        .map(|v| graph.neighbors(v).to_vec())
                        .collect();
                    let rows = verify_sets_rows(&sets, &values, pv, eps);
                    (rows, n)
                }
            };
            let _ = check_cols;

            if let Some(reported) = &against_report {
                if reported.rows.len() != rows.len() {
                    bail!(
                        "report has {} rows but the instance yields {}",
                        reported.rows.len(),
                        rows.len()
                    );
                }
                for (i, (ours, theirs)) in rows.iter().zip(&reported.rows).enumerate() {
                    let tol = 1e-9 * ours.deviation.abs().max(1.0);
                    if (ours.deviation - theirs.deviation).abs() > tol {
                        bail!(
                            "row {i}: recomputed deviation {} but the report says {}",
                            ours.deviation,
                            theirs.deviation
                        );
                    }
                    // Reports may flag extra rows bad (conservative engine
                    // conditions), but a direct budget violation must be
                    // flagged.
                    if ours.bad && !theirs.bad {
                        bail!(
                            "row {i}: deviation {} exceeds budget {} but the report does not \
                             flag it bad",
                            ours.deviation,
                            ours.delta
                        );
                    }
                }
            }

            let mut report = blank_report(
                "verify",
                expected_mode.as_deref().unwrap_or("direct"),
                against_report.as_ref().map(|r| r.k).unwrap_or(0),
                &profile,
            );
            report.k_effective = against_report
                .as_ref()
                .map(|r| r.k_effective)
                .unwrap_or(report.k);
            report.rows = rows;
            let report = report.finalize();
            println!(
                "verified {} rows: {} bad{}",
                report.rows_total,
                report.bad_count,
                if against.is_some() {
                    ", report cross-check ok"
                } else {
                    ""
                }
            );
            Ok(Dispatched {
                output: None,
                trace: None,
                report: Some(report),
            })
        }
    }
}

fn verify_sets_rows(sets: &[Vec<u32>], values: &[f64], p: f64, epsilon: f64) -> Vec<RowReport> {
    sets.iter()
        .map(|s| {
            let count = s.iter().filter(|&&j| values[j as usize] == 1.0).count();
            let mean = p * s.len() as f64;
            let dev = mean - count as f64;
            let delta = epsilon * mean;
            RowReport {
                deviation: dev,
                delta,
                prob_bad: 0.0,
                bad: dev.abs() > delta + 1e-9,
            }
        })
        .collect()
}
