//! Separable convex minimization under one balance equality and box limits,
//! solved by bisection on the balance multiplier.

use std::borrow::Borrow;

use crate::envelope::ConvexEnvelope;
use crate::error::{EldpError, Result};

const MAX_BISECTIONS: usize = 200;
const LAMBDA_REL_WIDTH: f64 = 1e-13;

/// Solution of the continuous relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub p: Vec<f64>,
    /// Balance multiplier (marginal cost, $/MWh).
    pub lambda: f64,
    /// `Σ env_i(p_i)`.
    pub value: f64,
    /// Lagrangian dual value, a certified lower bound on `value`'s optimum.
    pub dual_bound: f64,
}

fn sum_responses<E: Borrow<ConvexEnvelope>>(fns: &[E], lambda: f64, right: bool) -> f64 {
    fns.iter()
        .map(|f| {
            let f = f.borrow();
            if right {
                f.response_right(lambda)
            } else {
                f.response_left(lambda)
            }
        })
        .sum()
}

/// Lagrangian dual function `λ D + Σ min_p (env_i(p) - λ p)`.
pub fn dual_value<E: Borrow<ConvexEnvelope>>(fns: &[E], demand: f64, lambda: f64) -> f64 {
    fns.iter()
        .map(|f| {
            let f = f.borrow();
            let p = f.response_left(lambda);
            f.eval(p) - lambda * p
        })
        .sum::<f64>()
        + lambda * demand
}

/// Minimizes `Σ fns_i(p_i)` subject to `Σ p_i = demand` and `p_i` within each
/// envelope's domain.
///
/// Ties along flat segments are filled in generator order, so at most one unit sits
/// strictly inside a segment of slope `λ` beyond those forced by strictly convex pieces.
pub fn solve_separable_convex<E: Borrow<ConvexEnvelope>>(fns: &[E], demand: f64) -> Result<Relaxation> {
    if fns.is_empty() {
        return Err(EldpError::InvalidProblem("no generators".into()));
    }
    let total_lo: f64 = fns.iter().map(|f| f.borrow().lo()).sum();
    let total_hi: f64 = fns.iter().map(|f| f.borrow().hi()).sum();
    let slack = 1e-9 * (1.0 + demand.abs());
    if demand < total_lo - slack || demand > total_hi + slack {
        return Err(EldpError::Infeasible(format!("demand {demand} outside interval sums [{total_lo}, {total_hi}]")));
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in fns {
        for piece in f.borrow().pieces() {
            lo = lo.min(piece.q.deriv(piece.lo));
            hi = hi.max(piece.q.deriv(piece.hi));
        }
    }
    lo -= 1.0 + lo.abs() * 1e-6;
    hi += 1.0 + hi.abs() * 1e-6;

    let mut exact = None;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= LAMBDA_REL_WIDTH * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sum_responses(fns, mid, false) > demand {
            hi = mid;
        } else if sum_responses(fns, mid, true) < demand {
            lo = mid;
        } else {
            exact = Some(mid);
            break;
        }
    }

    let (lambda, base, cap): (f64, Vec<f64>, Vec<f64>) = match exact {
        Some(l) => {
            let base: Vec<f64> = fns.iter().map(|f| f.borrow().response_left(l)).collect();
            let top = fns.iter().map(|f| f.borrow().response_right(l));
            let cap = top.zip(&base).map(|(t, b)| (t - b).max(0.0)).collect();
            (l, base, cap)
        }
        None => {
            let base: Vec<f64> = fns.iter().map(|f| f.borrow().response_right(lo)).collect();
            let top = fns.iter().map(|f| f.borrow().response_left(hi));
            let cap = top.zip(&base).map(|(t, b)| (t - b).max(0.0)).collect();
            (0.5 * (lo + hi), base, cap)
        }
    };

    let mut p = base;
    let mut residual = demand - p.iter().sum::<f64>();
    for (x, c) in p.iter_mut().zip(&cap) {
        if residual <= 0.0 {
            break;
        }
        let step = residual.min(*c);
        *x += step;
        residual -= step;
    }
    // Rounding leftovers go to the first unit with room.
    if residual.abs() > 0.0 {
        for (x, f) in p.iter_mut().zip(fns) {
            let f = f.borrow();
            let moved = (*x + residual).clamp(f.lo(), f.hi());
            residual -= moved - *x;
            *x = moved;
            if residual == 0.0 {
                break;
            }
        }
    }

    let value = fns.iter().zip(&p).map(|(f, &x)| f.borrow().eval(x)).sum();
    let dual_bound = match exact {
        Some(l) => dual_value(fns, demand, l),
        None => dual_value(fns, demand, lo).max(dual_value(fns, demand, hi)),
    };
    Ok(Relaxation { p, lambda, value, dual_bound })
}

/// Largest violation of the optimality conditions: `λ` must lie in the subdifferential
/// of each function at interior points, below the right slope at a lower limit and above
/// the left slope at an upper limit. Scaled by `1 + |λ|`.
pub fn kkt_violation<E: Borrow<ConvexEnvelope>>(fns: &[E], p: &[f64], lambda: f64) -> f64 {
    fns.iter()
        .zip(p)
        .map(|(f, &x)| {
            let (left, right) = f.borrow().subgradient(x);
            let below = if left.is_finite() { (left - lambda).max(0.0) } else { 0.0 };
            let above = if right.is_finite() { (lambda - right).max(0.0) } else { 0.0 };
            below.max(above)
        })
        .fold(0.0, f64::max)
        / (1.0 + lambda.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::convex_envelope;
    use crate::surrogate::{Piece, PiecewiseQuadratic, Quadratic};

    fn quad_env(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> ConvexEnvelope {
        let pwq = PiecewiseQuadratic::new(vec![Piece { lo, hi, q: Quadratic::new(a, b, c) }]).unwrap();
        convex_envelope(&pwq, lo, hi)
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let f = quad_env(0.01, 2.0, 5.0, 0.0, 100.0);
        let r = solve_separable_convex(&[f.clone(), f], 120.0).unwrap();
        assert!((r.p[0] - 60.0).abs() < 1e-9 && (r.p[1] - 60.0).abs() < 1e-9, "{:?}", r.p);
        assert!((r.lambda - (0.02 * 60.0 + 2.0)).abs() < 1e-9);
    }

    #[test]
    fn single_unit_takes_demand() {
        let f = quad_env(0.01, 2.0, 5.0, 10.0, 100.0);
        let r = solve_separable_convex(&[f], 37.5).unwrap();
        assert_eq!(r.p, vec![37.5]);
    }

    #[test]
    fn infeasible_demand_is_reported() {
        let f = quad_env(0.01, 2.0, 5.0, 10.0, 100.0);
        assert!(matches!(solve_separable_convex(std::slice::from_ref(&f), 5.0), Err(EldpError::Infeasible(_))));
        assert!(matches!(solve_separable_convex(&[f], 150.0), Err(EldpError::Infeasible(_))));
    }

    #[test]
    fn three_unit_equal_incremental_cost() {
        // Case-I fuel curves without the valve-point term. Equal incremental cost
        // 2 a_i p_i + b_i = λ with Σ p_i = 850 gives
        // λ = (850 + Σ b_i / 2a_i) / Σ 1 / 2a_i.
        let units = [
            (0.001562, 7.92, 561.0, 100.0, 600.0),
            (0.00194, 7.85, 310.0, 100.0, 400.0),
            (0.00482, 7.97, 78.0, 50.0, 200.0),
        ];
        let inv: f64 = units.iter().map(|u| 1.0 / (2.0 * u.0)).sum();
        let shift: f64 = units.iter().map(|u| u.1 / (2.0 * u.0)).sum();
        let lambda = (850.0 + shift) / inv;
        let expected: Vec<f64> = units.iter().map(|u| (lambda - u.1) / (2.0 * u.0)).collect();
        // Hand values: λ ≈ 9.148263, p ≈ (393.170, 334.604, 122.226).
        assert!((lambda - 9.148263).abs() < 1e-6, "{lambda}");

        let fns: Vec<_> = units.iter().map(|u| quad_env(u.0, u.1, u.2, u.3, u.4)).collect();
        let r = solve_separable_convex(&fns, 850.0).unwrap();
        for (x, e) in r.p.iter().zip(&expected) {
            assert!((x - e).abs() < 1e-7, "{x} vs {e}");
        }
        assert!((r.lambda - lambda).abs() < 1e-9);
        assert!(kkt_violation(&fns, &r.p, r.lambda) < 1e-9);
        assert!(r.dual_bound <= r.value + 1e-9 && r.value - r.dual_bound < 1e-6);
    }

    #[test]
    fn flat_ties_fill_in_index_order() {
        let up = Quadratic::new(0.0, 1.0, 0.0);
        let down = Quadratic::new(0.0, -1.0, 0.0);
        let pwq = PiecewiseQuadratic::new(vec![Piece { lo: 0.0, hi: 1.0, q: up }, Piece { lo: 1.0, hi: 2.0, q: down }])
            .unwrap();
        let env = convex_envelope(&pwq, 0.0, 2.0);
        let r = solve_separable_convex(&[env.clone(), env.clone(), env], 3.0).unwrap();
        assert_eq!(r.p, vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn responses_are_monotone_in_lambda() {
        let f = quad_env(0.02, 1.0, 0.0, 0.0, 50.0);
        let g = quad_env(0.0, 3.0, 0.0, 5.0, 20.0);
        let fns = [f, g];
        let mut last = f64::NEG_INFINITY;
        for i in 0..200 {
            let lambda = -1.0 + 0.02 * i as f64;
            let s = sum_responses(&fns, lambda, false);
            assert!(s >= last);
            last = s;
        }
    }
}
