//! Adaptive chord under-approximation with a certified optimality gap.
//!
//! Every generator starts with the chord through `{0, π/2}`. Each iteration solves
//! the surrogate, measures `δ = f(p) - ĝ`, and adds the sawtooth value of every unit
//! at the new dispatch as a breakpoint, so the next surrogate is exact there.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{EldpError, Result};
use crate::model::{total_cost, DispatchProblem, DispatchVector};
use crate::solver::{compile_all, solve_compiled, SolveReport, SolverConfig};
use crate::surrogate::{sawtooth, Breakpoints, PiecewiseLinear, DEFAULT_MERGE_TOL};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Target gap between the true cost and the lower bound, $/h.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Breakpoints closer than this, in radians, are merged.
    pub merge_tol: f64,
    pub solver: SolverConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            merge_tol: DEFAULT_MERGE_TOL,
            solver: SolverConfig::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(EldpError::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(EldpError::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.merge_tol >= 0.0) {
            return Err(EldpError::InvalidArgument("merge_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Starts at 1.
    pub iteration: usize,
    /// Best lower bound on the true optimum so far, $/h.
    pub lower_bound: f64,
    /// Surrogate value at this iterate, $/h.
    pub surrogate_value: f64,
    /// True cost at this iterate, $/h.
    pub true_cost: f64,
    /// `true_cost - lower_bound`.
    pub delta: f64,
    /// Breakpoint count per generator for the surrogate solved in this iteration.
    pub breakpoints: Vec<usize>,
    pub nodes_explored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutcome {
    /// Best iterate by true cost. `certified_bound` is the final lower bound and
    /// `absolute_gap` the true-cost gap to it.
    pub report: SolveReport,
    pub trace: Vec<IterationRecord>,
    /// True when `δ < ε` was reached.
    pub converged: bool,
    /// Per-generator breakpoints of the last surrogate.
    pub breakpoints: Vec<Breakpoints>,
}

/// Runs the refinement loop until the gap drops below `cfg.epsilon`.
///
/// Stops early, unconverged, at `max_iterations` or when no new breakpoint can be
/// added. The returned dispatch is always the iterate with the lowest true cost.
pub fn adaptive_solve(problem: &DispatchProblem, cfg: &AdaptiveConfig) -> Result<AdaptiveOutcome> {
    problem.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let n = problem.len();
    let mut bps = vec![Breakpoints::initial(); n];
    let mut trace = Vec::new();
    let mut lower = f64::NEG_INFINITY;
    let mut best: Option<SolveReport> = None;
    let mut warm: Option<Vec<f64>> = None;
    let mut nodes = 0;
    let mut inner_certified = true;
    let mut converged = false;
    let mut last_value = f64::NAN;
    let mut kkt: Option<f64> = None;

    for iteration in 1..=cfg.max_iterations {
        let pwls: Vec<PiecewiseLinear> = bps.iter().map(Breakpoints::chord).collect();
        let fns = compile_all(problem, &pwls)?;
        let report = solve_compiled(problem, &fns, &cfg.solver, warm.as_deref())?;
        nodes += report.nodes_explored;
        if let Some(v) = report.kkt_violation {
            kkt = Some(kkt.map_or(v, |k: f64| k.max(v)));
        }
        inner_certified &= report.certified;
        lower = lower.max(report.certified_bound);
        last_value = report.surrogate_value;
        let delta = report.true_cost - lower;
        trace.push(IterationRecord {
            iteration,
            lower_bound: lower,
            surrogate_value: report.surrogate_value,
            true_cost: report.true_cost,
            delta,
            breakpoints: bps.iter().map(Breakpoints::len).collect(),
            nodes_explored: report.nodes_explored,
        });
        if best.as_ref().is_none_or(|b| report.true_cost < b.true_cost) {
            best = Some(report.clone());
        }
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
        let mut added = false;
        for ((bp, g), &x) in bps.iter_mut().zip(&problem.generators).zip(report.p.as_slice()) {
            let (t, _) = sawtooth(g.phase(x));
            added |= bp.insert(t, cfg.merge_tol);
        }
        if !added {
            break;
        }
        warm = Some(report.p.0);
    }

    let best = best.expect("at least one iteration runs");
    let true_cost = total_cost(problem, &best.p)?;
    let report = SolveReport {
        p: DispatchVector(best.p.0),
        surrogate_value: last_value,
        true_cost,
        certified_bound: lower,
        absolute_gap: true_cost - lower,
        nodes_explored: nodes,
        certified: converged && inner_certified,
        wall_time: started.elapsed().as_secs_f64(),
        kkt_violation: kkt,
    };
    Ok(AdaptiveOutcome { report, trace, converged, breakpoints: bps })
}

/// Renders a trace as a plain-text table.
pub fn format_trace(trace: &[IterationRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>16} {:>16} {:>12} {:>8} {:>8}",
        "iter", "lower_bound", "true_cost", "delta", "nodes", "bps"
    );
    for r in trace {
        let total: usize = r.breakpoints.iter().sum();
        let _ = writeln!(
            out,
            "{:>4} {:>16.6} {:>16.6} {:>12.3e} {:>8} {:>8}",
            r.iteration, r.lower_bound, r.true_cost, r.delta, r.nodes_explored, total
        );
    }
    out
}
