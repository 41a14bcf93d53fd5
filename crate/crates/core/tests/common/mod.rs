#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use eldp::model::{DispatchProblem, Generator};
use eldp::surrogate::{chord_pwl, identity_pwl, tangent_pwl, Breakpoints, PiecewiseLinear, TangentConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random unit with coefficients spread over a few orders of magnitude.
pub fn random_generator(rng: &mut ChaCha8Rng, width: (f64, f64)) -> Generator {
    let a = 10f64.powf(rng.gen_range(-4.0..-2.0));
    let b = rng.gen_range(2.0..12.0);
    let c = rng.gen_range(0.0..600.0);
    let d = if rng.gen_bool(0.1) { 0.0 } else { 10f64.powf(rng.gen_range(1.0..2.6)) };
    let e = rng.gen_range(0.02..0.5);
    let p_min = rng.gen_range(0.0..100.0);
    let p_max = p_min + rng.gen_range(width.0..width.1);
    Generator::new(a, b, c, d, e, p_min, p_max)
}

/// Random feasible instance with `n` units.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, width: (f64, f64)) -> DispatchProblem {
    let gens: Vec<Generator> = (0..n).map(|_| random_generator(rng, width)).collect();
    let lo: f64 = gens.iter().map(|g| g.p_min).sum();
    let hi: f64 = gens.iter().map(|g| g.p_max).sum();
    let demand = lo + rng.gen_range(0.0..=1.0) * (hi - lo);
    DispatchProblem::new("random", gens, demand).unwrap()
}

/// Identity, tangent, or a random chord surrogate.
pub fn random_pwl(rng: &mut ChaCha8Rng) -> PiecewiseLinear {
    match rng.gen_range(0..3) {
        0 => identity_pwl(),
        1 => loop {
            let t1 = rng.gen_range(0.05..1.5);
            let t2 = rng.gen_range(t1..FRAC_PI_2);
            if let Ok(cfg) = TangentConfig::new(t1, t2) {
                break tangent_pwl(&cfg).unwrap();
            }
        },
        _ => {
            let mut bp = Breakpoints::initial();
            for _ in 0..rng.gen_range(0..5) {
                bp.insert(rng.gen_range(0.0..FRAC_PI_2), 1e-9);
            }
            chord_pwl(bp.as_slice()).unwrap()
        }
    }
}

/// Feasible dispatch: exponential weights split the demand above the lower limits,
/// outputs are clipped to the upper limits, and the remainder is spread over units
/// with room left.
pub fn random_feasible(rng: &mut ChaCha8Rng, problem: &DispatchProblem) -> Vec<f64> {
    let gens = &problem.generators;
    let w: Vec<f64> = gens.iter().map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
    let total_w: f64 = w.iter().sum();
    let spare = problem.demand - gens.iter().map(|g| g.p_min).sum::<f64>();
    let mut p: Vec<f64> = gens.iter().zip(&w).map(|(g, wi)| (g.p_min + spare * wi / total_w).min(g.p_max)).collect();
    let mut residual = problem.demand - p.iter().sum::<f64>();
    for (x, g) in p.iter_mut().zip(gens) {
        let step = residual.min(g.p_max - *x).max(0.0);
        *x += step;
        residual -= step;
    }
    p
}

/// Compares dispatches, letting units with equal coefficients (the constant term
/// aside) and equal limits trade outputs.
pub fn dispatch_matches(problem: &DispatchProblem, got: &[f64], expected: &[f64], tol: f64) -> bool {
    let gens = &problem.generators;
    let key = |g: &Generator| [g.a, g.b, g.d, g.e, g.p_min, g.p_max].map(f64::to_bits);
    let mut seen = vec![false; gens.len()];
    for i in 0..gens.len() {
        if seen[i] {
            continue;
        }
        let group: Vec<usize> = (i..gens.len()).filter(|&j| key(&gens[j]) == key(&gens[i])).collect();
        let mut a: Vec<f64> = group.iter().map(|&j| got[j]).collect();
        let mut b: Vec<f64> = group.iter().map(|&j| expected[j]).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > tol) {
            return false;
        }
        for j in group {
            seen[j] = true;
        }
    }
    true
}
