//! Brute-force references: a grid scan of the true cost for tiny instances and
//! exhaustive piece enumeration for surrogate problems.

use crate::envelope::{convex_envelope, ConvexEnvelope};
use crate::error::{EldpError, Result};
use crate::model::{unit_cost, DispatchProblem, DispatchVector, Generator};
use crate::solver::{compile_all, solve_separable_convex};
use crate::surrogate::{PiecewiseLinear, PiecewiseQuadratic};

/// Largest instance `brute_force_true` accepts.
pub const MAX_GRID_UNITS: usize = 3;
/// Largest number of piece combinations `enumerate_pieces` visits.
pub const MAX_COMBINATIONS: u64 = 1_000_000;
/// Default grid step, MW.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// MW.
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { step: DEFAULT_GRID_STEP }
    }
}

/// Grid points `p_min + j step` on a unit's box, plus `p_max` when it is off-grid.
fn axis(g: &Generator, step: f64) -> Vec<f64> {
    let count = (g.width() / step).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|j| g.p_min + j as f64 * step).collect();
    if pts.last().is_some_and(|&x| x < g.p_max) {
        pts.push(g.p_max);
    }
    pts
}

/// Scans the grid of the first `n - 1` outputs, setting the last from the balance, and
/// returns the cheapest feasible point. The result is within `K (n - 1) step` of the
/// true optimum, `K` being the Lipschitz constant of the problem.
pub fn brute_force_true(problem: &DispatchProblem, grid: GridSpec) -> Result<(DispatchVector, f64)> {
    problem.validate()?;
    let n = problem.len();
    if n > MAX_GRID_UNITS {
        return Err(EldpError::TooLarge(format!("grid search supports at most {MAX_GRID_UNITS} units, got {n}")));
    }
    if !(grid.step > 0.0 && grid.step.is_finite()) {
        return Err(EldpError::InvalidArgument(format!("grid step must be positive, got {}", grid.step)));
    }
    let gens = &problem.generators;
    let last = &gens[n - 1];
    let tol = problem.default_tol_balance();
    let close = |x: f64| -> Option<f64> {
        if x < last.p_min - tol || x > last.p_max + tol {
            None
        } else {
            Some(x.clamp(last.p_min, last.p_max))
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut offer = |cost: f64, p: &[f64]| {
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, p.to_vec()));
        }
    };
    match n {
        1 => {
            if let Some(x) = close(problem.demand) {
                offer(unit_cost(last, x), &[x]);
            }
        }
        2 => {
            for x in axis(&gens[0], grid.step) {
                if let Some(y) = close(problem.demand - x) {
                    offer(unit_cost(&gens[0], x) + unit_cost(last, y), &[x, y]);
                }
            }
        }
        _ => {
            let ys = axis(&gens[1], grid.step);
            let y_costs: Vec<f64> = ys.iter().map(|&y| unit_cost(&gens[1], y)).collect();
            for x in axis(&gens[0], grid.step) {
                let fx = unit_cost(&gens[0], x);
                let rest = problem.demand - x;
                // Only the second-unit outputs that leave the third inside its box.
                let from = ys.partition_point(|&y| y < rest - last.p_max - tol);
                let to = ys.partition_point(|&y| y <= rest - last.p_min + tol);
                for j in from..to {
                    if let Some(z) = close(rest - ys[j]) {
                        offer(fx + y_costs[j] + unit_cost(last, z), &[x, ys[j], z]);
                    }
                }
            }
        }
    }
    let (cost, p) = best.ok_or_else(|| EldpError::Infeasible("no grid point satisfies the balance".into()))?;
    Ok((DispatchVector(p), cost))
}

/// Exact surrogate optimum by trying every combination of one compiled piece per
/// generator. Each combination is a convex problem solved to optimality.
pub fn enumerate_pieces(problem: &DispatchProblem, pwls: &[PiecewiseLinear]) -> Result<(DispatchVector, f64)> {
    problem.validate()?;
    let fns = compile_all(problem, pwls)?;
    let combos = fns.iter().try_fold(1u64, |acc, f| acc.checked_mul(f.len() as u64).filter(|&c| c <= MAX_COMBINATIONS));
    let Some(combos) = combos else {
        return Err(EldpError::TooLarge(format!("more than {MAX_COMBINATIONS} piece combinations")));
    };

    let pieces: Vec<Vec<ConvexEnvelope>> = fns
        .iter()
        .map(|f| {
            f.pieces()
                .iter()
                .map(|&piece| {
                    let single = PiecewiseQuadratic::new(vec![piece]).expect("compiled pieces are valid");
                    convex_envelope(&single, piece.lo, piece.hi)
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = vec![0usize; fns.len()];
    for _ in 0..combos {
        let chosen: Vec<&ConvexEnvelope> = pick.iter().zip(&pieces).map(|(&j, ps)| &ps[j]).collect();
        match solve_separable_convex(&chosen, problem.demand) {
            Ok(r) => {
                let value: f64 = fns.iter().zip(&r.p).map(|(f, &x)| f.eval(x)).sum();
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    best = Some((value, r.p));
                }
            }
            Err(EldpError::Infeasible(_)) => {}
            Err(err) => return Err(err),
        }
        for (j, ps) in pick.iter_mut().zip(&pieces) {
            *j += 1;
            if *j < ps.len() {
                break;
            }
            *j = 0;
        }
    }
    let (value, p) = best.ok_or_else(|| EldpError::Infeasible("no piece combination meets the demand".into()))?;
    Ok((DispatchVector(p), value))
}
