//! Certified solution of piecewise-quadratic surrogate dispatch problems, and
//! export of the equivalent mixed-integer models.

mod bnb;
pub mod knapsack;
pub mod lp;

pub use bnb::solve_compiled;
pub use knapsack::{kkt_violation, solve_separable_convex, Relaxation};
pub use lp::{export_lp, export_lp_to_path, LpModel};

use crate::error::{EldpError, Result};
use crate::model::{DispatchProblem, DispatchVector};
use crate::surrogate::{compile, PiecewiseLinear, PiecewiseQuadratic};

/// Default absolute optimality gap, $/h.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
/// Default limit on explored nodes.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Absolute gap between the incumbent and the certified bound, $/h.
    pub gap_tol: f64,
    pub node_cap: usize,
    /// Evaluate sibling nodes and envelopes on a thread pool. The search order, and
    /// therefore the result, does not depend on this flag.
    pub parallel: bool,
    /// Worker count for parallel mode; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Measure the optimality-condition violation of every node relaxation.
    pub check_kkt: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gap_tol: DEFAULT_GAP_TOL,
            node_cap: DEFAULT_NODE_CAP,
            parallel: false,
            threads: None,
            check_kkt: false,
        }
    }
}

/// Result of a surrogate solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub p: DispatchVector,
    /// Surrogate cost at `p`, $/h.
    pub surrogate_value: f64,
    /// True valve-point cost at `p`, $/h.
    pub true_cost: f64,
    /// Proven lower bound on the surrogate optimum, $/h.
    pub certified_bound: f64,
    /// `surrogate_value - certified_bound`.
    pub absolute_gap: f64,
    pub nodes_explored: usize,
    /// False when the node cap stopped the search before the gap closed.
    pub certified: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Largest scaled KKT violation over all relaxations, when `check_kkt` is set.
    pub kkt_violation: Option<f64>,
}

/// Compiles one surrogate per generator.
pub fn compile_all(problem: &DispatchProblem, pwls: &[PiecewiseLinear]) -> Result<Vec<PiecewiseQuadratic>> {
    if pwls.len() != problem.len() {
        return Err(EldpError::LengthMismatch { expected: problem.len(), got: pwls.len() });
    }
    Ok(problem.generators.iter().zip(pwls).map(|(g, pwl)| compile(g, pwl)).collect())
}

/// Solves the surrogate problem defined by one piecewise-linear sine surrogate per
/// generator to a certified gap of `cfg.gap_tol`.
pub fn solve_surrogate(problem: &DispatchProblem, pwls: &[PiecewiseLinear], cfg: &SolverConfig) -> Result<SolveReport> {
    problem.validate()?;
    let fns = compile_all(problem, pwls)?;
    solve_compiled(problem, &fns, cfg, None)
}
