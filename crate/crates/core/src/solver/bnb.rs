//! Spatial branch-and-bound over per-generator intervals.
//!
//! Each node relaxes every compiled cost to its convex envelope on the node's
//! interval and solves the resulting continuous problem exactly. Nodes are
//! explored best-first; a node is split on the unit whose cost exceeds its
//! envelope the most at the relaxation point, at a compiled piece boundary
//! inside the envelope bridge holding that point.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::knapsack::{kkt_violation, solve_separable_convex, Relaxation};
use super::{SolveReport, SolverConfig};
use crate::envelope::{convex_envelope, ConvexEnvelope};
use crate::error::{EldpError, Result};
use crate::model::{total_cost, DispatchProblem, DispatchVector};
use crate::surrogate::PiecewiseQuadratic;

type ChildNode = (Vec<(f64, f64)>, Vec<Arc<ConvexEnvelope>>, Relaxation);

struct Node {
    intervals: Vec<(f64, f64)>,
    envs: Vec<Arc<ConvexEnvelope>>,
    relax: Relaxation,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the lowest bound, then the oldest node, comes first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    fns: &'a [PiecewiseQuadratic],
    demand: f64,
    parallel: bool,
}

impl Search<'_> {
    fn surrogate(&self, p: &[f64]) -> f64 {
        self.fns.iter().zip(p).map(|(f, &x)| f.eval(x)).sum()
    }

    fn relax(&self, envs: &[Arc<ConvexEnvelope>]) -> Option<Relaxation> {
        match solve_separable_convex(envs, self.demand) {
            Ok(r) => Some(r),
            Err(EldpError::Infeasible(_)) => None,
            Err(err) => unreachable!("relaxation failed on a validated node: {err}"),
        }
    }

    fn child(&self, parent: &Node, unit: usize, interval: (f64, f64)) -> Option<ChildNode> {
        let mut intervals = parent.intervals.clone();
        intervals[unit] = interval;
        let mut envs = parent.envs.clone();
        envs[unit] = Arc::new(convex_envelope(&self.fns[unit], interval.0, interval.1));
        let relax = self.relax(&envs)?;
        Some((intervals, envs, relax))
    }

    /// Moves the balance residual onto the unit with the widest node interval.
    fn project(&self, node: &Node) -> Vec<f64> {
        let mut p = node.relax.p.clone();
        let (j, _) = node.intervals.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &(lo, hi))| {
            if hi - lo > best.1 {
                (i, hi - lo)
            } else {
                best
            }
        });
        let others: f64 = p.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &x)| x).sum();
        let candidate = self.demand - others;
        let f = &self.fns[j];
        if candidate >= f.lo() && candidate <= f.hi() {
            p[j] = candidate;
        }
        p
    }

    /// Unit and split point for branching, or `None` when the envelope is tight at the
    /// relaxation point for every unit.
    fn branching(&self, node: &Node, leaf_tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, (env, &x)) in node.envs.iter().zip(&node.relax.p).enumerate() {
            let gap = self.fns[i].eval(x) - env.eval(x);
            if gap <= leaf_tol || best.is_some_and(|(_, g, _)| gap <= g) {
                continue;
            }
            let Some((lo, hi)) = env.bridge_at(x) else { continue };
            if let Some(split) = nearest_boundary(&self.fns[i], lo, hi, x) {
                best = Some((i, gap, split));
            }
        }
        best.map(|(i, _, split)| (i, split))
    }
}

/// Compiled boundary strictly inside `(lo, hi)` nearest to `x`; ties go left.
fn nearest_boundary(f: &PiecewiseQuadratic, lo: f64, hi: f64, x: f64) -> Option<f64> {
    let res = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let bounds: Vec<f64> = f.boundaries().filter(|&b| b > lo + res && b < hi - res).collect();
    let pos = bounds.partition_point(|&b| b < x);
    let right = bounds.get(pos).copied();
    let left = pos.checked_sub(1).map(|i| bounds[i]);
    match (left, right) {
        (Some(l), Some(r)) => Some(if x - l <= r - x { l } else { r }),
        (l, r) => l.or(r),
    }
}

/// Solves `min Σ fns_i(p_i)` s.t. `Σ p_i = demand`, `p_i` in the compiled domains, to a
/// certified absolute gap.
///
/// `warm_start`, when feasible, seeds the incumbent.
pub fn solve_compiled(
    problem: &DispatchProblem,
    fns: &[PiecewiseQuadratic],
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<SolveReport> {
    if fns.len() != problem.len() {
        return Err(EldpError::LengthMismatch { expected: problem.len(), got: fns.len() });
    }
    if !(cfg.gap_tol > 0.0) {
        return Err(EldpError::InvalidArgument("gap tolerance must be positive".into()));
    }
    let started = Instant::now();
    let run = || branch_and_bound(problem, fns, cfg, warm_start);
    let mut report = if cfg.parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads.unwrap_or(0))
            .build()
            .map_err(|e| EldpError::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(run)?
    } else {
        run()?
    };
    report.wall_time = started.elapsed().as_secs_f64();
    Ok(report)
}

fn branch_and_bound(
    problem: &DispatchProblem,
    fns: &[PiecewiseQuadratic],
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<SolveReport> {
    let search = Search { fns, demand: problem.demand, parallel: cfg.parallel };
    let n = fns.len();
    let leaf_tol = cfg.gap_tol / (4.0 * n as f64);

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(p) = warm_start {
        let balanced = (p.iter().sum::<f64>() - problem.demand).abs() <= problem.default_tol_balance();
        let boxed = p.len() == n && p.iter().zip(fns).all(|(&x, f)| x >= f.lo() && x <= f.hi());
        if balanced && boxed {
            incumbent = Some((search.surrogate(p), p.to_vec()));
        }
    }

    let intervals: Vec<(f64, f64)> = fns.iter().map(|f| (f.lo(), f.hi())).collect();
    let build = |i: usize| Arc::new(convex_envelope(&fns[i], intervals[i].0, intervals[i].1));
    let envs: Vec<Arc<ConvexEnvelope>> =
        if cfg.parallel { (0..n).into_par_iter().map(build).collect() } else { (0..n).map(build).collect() };
    let relax =
        search.relax(&envs).ok_or_else(|| EldpError::Infeasible("demand outside the total capacity range".into()))?;
    let mut kkt = cfg.check_kkt.then(|| kkt_violation(&envs, &relax.p, relax.lambda));

    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    heap.push(Node { intervals, envs, bound: relax.dual_bound, relax, seq });

    let mut closed_bound = f64::INFINITY;
    let mut explored = 0usize;
    let mut certified = true;

    while let Some(node) = heap.pop() {
        let inc = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
        if node.bound >= inc - cfg.gap_tol {
            closed_bound = closed_bound.min(node.bound);
            break;
        }
        if explored >= cfg.node_cap {
            closed_bound = closed_bound.min(node.bound);
            certified = false;
            break;
        }
        explored += 1;

        let candidate = search.project(&node);
        let value = search.surrogate(&candidate);
        if value < inc {
            incumbent = Some((value, candidate));
        }
        let inc = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);

        let Some((unit, split)) = search.branching(&node, leaf_tol) else {
            closed_bound = closed_bound.min(node.bound);
            continue;
        };
        let (lo, hi) = node.intervals[unit];
        let (left, right) = if search.parallel {
            rayon::join(|| search.child(&node, unit, (lo, split)), || search.child(&node, unit, (split, hi)))
        } else {
            (search.child(&node, unit, (lo, split)), search.child(&node, unit, (split, hi)))
        };
        for (intervals, envs, relax) in [left, right].into_iter().flatten() {
            if let Some(worst) = kkt.as_mut() {
                *worst = worst.max(kkt_violation(&envs, &relax.p, relax.lambda));
            }
            let bound = relax.dual_bound.max(node.bound);
            if bound >= inc - cfg.gap_tol {
                closed_bound = closed_bound.min(bound);
                continue;
            }
            seq += 1;
            heap.push(Node { intervals, envs, relax, bound, seq });
        }
    }

    let (value, p) = incumbent.ok_or_else(|| EldpError::Infeasible("no feasible dispatch found".into()))?;
    let bound = closed_bound.min(value);
    let p = DispatchVector(p);
    let true_cost = total_cost(problem, &p)?;
    Ok(SolveReport {
        p,
        surrogate_value: value,
        true_cost,
        certified_bound: bound,
        absolute_gap: value - bound,
        nodes_explored: explored,
        certified,
        wall_time: 0.0,
        kkt_violation: kkt,
    })
}
