mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use eldp::adaptive::{adaptive_solve, AdaptiveConfig};
use eldp::envelope::convex_envelope;
use eldp::model::{total_cost, DispatchVector};
use eldp::solver::{compile_all, kkt_violation, solve_separable_convex, solve_surrogate, SolverConfig};
use eldp::surrogate::{
    chord_pwl, compile, refine, sawtooth, tangent_pwl, Breakpoints, PiecewiseQuadratic, TangentConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_feasible, random_generator, random_problem, random_pwl};

fn breakpoint_set() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..FRAC_PI_2, 0..8).prop_map(|extra| {
        let mut bp = Breakpoints::initial();
        for t in extra {
            bp.insert(t, 1e-9);
        }
        bp.as_slice().to_vec()
    })
}

fn tangent_config() -> impl Strategy<Value = TangentConfig> {
    (0.05f64..1.5, 0.0f64..1.0).prop_filter_map("crossings out of order", |(t1, frac)| {
        TangentConfig::new(t1, t1 + frac * (FRAC_PI_2 - t1)).ok()
    })
}

/// Lower convex hull of sampled points, evaluated at the sample abscissae.
fn sampled_hull(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut h = 0;
    for (i, &x) in xs.iter().enumerate() {
        while h + 1 < hull.len() && hull[h + 1] < i {
            h += 1;
        }
        let (a, b) = (hull[h], hull[(h + 1).min(hull.len() - 1)]);
        out.push(if a == b { ys[a] } else { ys[a] + (ys[b] - ys[a]) * (x - xs[a]) / (xs[b] - xs[a]) });
    }
    out
}

proptest! {
    #[test]
    fn sawtooth_matches_rectified_sine(x in -1.0e3f64..1.0e3) {
        let (t, k) = sawtooth(x);
        prop_assert!((0.0..=FRAC_PI_2).contains(&t));
        prop_assert!((t.sin() - x.sin().abs()).abs() <= 1e-12);
        prop_assert!(((x - k as f64 * PI).abs() - t).abs() <= 1e-12);
    }

    #[test]
    fn sawtooth_is_pi_periodic(x in -1.0e3f64..1.0e3) {
        prop_assert!((sawtooth(x + PI).0 - sawtooth(x).0).abs() <= 1e-11);
    }

    #[test]
    fn chords_under_approximate_sine(bp in breakpoint_set(), t in 0.0..FRAC_PI_2) {
        let pwl = chord_pwl(&bp).unwrap();
        prop_assert!(pwl.eval(t) <= t.sin() + 1e-12);
        for &x in &bp {
            prop_assert!((pwl.eval(x) - x.sin()).abs() <= 1e-12);
        }
    }

    #[test]
    fn tangents_over_approximate_sine(cfg in tangent_config(), t in 0.0..FRAC_PI_2) {
        prop_assert!(tangent_pwl(&cfg).unwrap().eval(t) >= t.sin() - 1e-12);
    }

    #[test]
    fn refinement_raises_chords(bp in breakpoint_set(), new in 0.0..FRAC_PI_2, t in 0.0..FRAC_PI_2) {
        let mut set = Breakpoints::initial();
        for &x in &bp {
            set.insert(x, 1e-9);
        }
        let finer = refine(&set, new, 1e-9);
        prop_assert!(finer.chord().eval(t) >= set.chord().eval(t) - 1e-12);
        prop_assert!(finer.chord().eval(t) <= t.sin() + 1e-12);
    }

    #[test]
    fn compiled_cost_follows_sawtooth(seed in any::<u64>(), u in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_generator(&mut rng, (5.0, 200.0));
        let pwl = random_pwl(&mut rng);
        let f = compile(&g, &pwl);
        let p = g.p_min + u * g.width();
        let direct = g.quadratic_cost(p) + g.d * pwl.eval(sawtooth(g.phase(p)).0);
        prop_assert!((f.eval(p) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn envelope_is_the_convex_minorant(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_generator(&mut rng, (5.0, 150.0));
        let f = compile(&g, &random_pwl(&mut rng));
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        let lo = g.p_min + u * g.width();
        let hi = (g.p_min + v * g.width()).max(lo);
        let env = convex_envelope(&f, lo, hi);
        prop_assert!(env.is_convex());

        let m = 2000;
        let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
        let hull = sampled_hull(&xs, &ys);
        // Sampling can miss the true minorant by at most slope times spacing.
        let h = (hi - lo) / m as f64;
        let slack = 1e-9 * (1.0 + ys.iter().fold(0.0f64, |s, y| s.max(y.abs()))) + g.lipschitz() * h;
        for ((&x, &y), &c) in xs.iter().zip(&ys).zip(&hull) {
            let e = env.eval(x);
            prop_assert!(e <= y + 1e-9 * (1.0 + y.abs()), "above f at {x}: {e} > {y}");
            prop_assert!(e <= c + 1e-9 * (1.0 + c.abs()), "above sampled hull at {x}");
            prop_assert!(c - e <= slack, "below sampled hull at {x} by {}", c - e);
        }
    }

    #[test]
    fn envelope_rises_when_interval_shrinks(seed in any::<u64>(), cut in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_generator(&mut rng, (5.0, 150.0));
        let f = compile(&g, &random_pwl(&mut rng));
        let full = convex_envelope(&f, g.p_min, g.p_max);
        let mid = g.p_min + cut * g.width();
        let left = convex_envelope(&f, g.p_min, mid);
        let right = convex_envelope(&f, mid, g.p_max);
        for i in 0..=200 {
            let x = g.p_min + g.width() * i as f64 / 200.0;
            let part = if x <= mid { left.eval(x) } else { right.eval(x) };
            prop_assert!(part >= full.eval(x) - 1e-9 * (1.0 + part.abs()));
        }
    }

    #[test]
    fn responses_grow_with_lambda(seed in any::<u64>(), l1 in -20.0f64..40.0, l2 in -20.0f64..40.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_generator(&mut rng, (5.0, 150.0));
        let env = convex_envelope(&compile(&g, &random_pwl(&mut rng)), g.p_min, g.p_max);
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(env.response_left(lo) <= env.response_left(hi));
        prop_assert!(env.response_right(lo) <= env.response_right(hi));
        prop_assert!(env.response_left(lo) <= env.response_right(lo));
    }

    #[test]
    fn relaxations_satisfy_kkt(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, n, (5.0, 150.0));
        let pwls: Vec<_> = (0..n).map(|_| random_pwl(&mut rng)).collect();
        let envs: Vec<_> = compile_all(&problem, &pwls).unwrap().iter().map(|f| convex_envelope(f, f.lo(), f.hi())).collect();
        let r = solve_separable_convex(&envs, problem.demand).unwrap();
        prop_assert!((r.p.iter().sum::<f64>() - problem.demand).abs() <= 1e-9 * problem.demand.max(1.0));
        prop_assert!(kkt_violation(&envs, &r.p, r.lambda) <= 1e-9);
        prop_assert!(r.dual_bound <= r.value + 1e-7 * (1.0 + r.value.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certified_bound_holds_at_random_points(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, n, (5.0, 120.0));
        let pwls: Vec<_> = (0..n).map(|_| random_pwl(&mut rng)).collect();
        let cfg = SolverConfig { check_kkt: true, ..SolverConfig::default() };
        let report = solve_surrogate(&problem, &pwls, &cfg).unwrap();
        prop_assert!(report.certified);
        prop_assert!(report.absolute_gap <= cfg.gap_tol);
        prop_assert!(report.kkt_violation.unwrap() <= 1e-9);
        let fns = compile_all(&problem, &pwls).unwrap();
        let g = |p: &[f64]| fns.iter().zip(p).map(|(f, &x)| f.eval(x)).sum::<f64>();
        prop_assert!((g(report.p.as_slice()) - report.surrogate_value).abs() <= 1e-9 * report.surrogate_value.abs());
        for _ in 0..10_000 {
            let q = random_feasible(&mut rng, &problem);
            prop_assert!(report.certified_bound <= g(&q) + 1e-9 * (1.0 + g(&q).abs()));
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, n, (5.0, 120.0));
        let pwls: Vec<_> = (0..n).map(|_| random_pwl(&mut rng)).collect();
        let cfg = SolverConfig::default();
        let a = solve_surrogate(&problem, &pwls, &cfg).unwrap();
        let b = solve_surrogate(&problem, &pwls, &cfg).unwrap();
        let par = solve_surrogate(&problem, &pwls, &SolverConfig { parallel: true, threads: Some(2), ..cfg.clone() }).unwrap();
        prop_assert_eq!(&a.p, &b.p);
        prop_assert_eq!(a.surrogate_value.to_bits(), b.surrogate_value.to_bits());
        prop_assert_eq!(a.certified_bound.to_bits(), b.certified_bound.to_bits());
        prop_assert_eq!(a.nodes_explored, b.nodes_explored);
        prop_assert_eq!(par.surrogate_value.to_bits(), a.surrogate_value.to_bits());
        prop_assert_eq!(par.certified_bound.to_bits(), a.certified_bound.to_bits());
    }

    #[test]
    fn adaptive_trace_obeys_bound_chain(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, n, (5.0, 120.0));
        let out = adaptive_solve(&problem, &AdaptiveConfig::default()).unwrap();
        prop_assert!(out.converged);
        prop_assert!(out.report.absolute_gap < 1e-3);
        for r in &out.trace {
            prop_assert!(r.delta >= -1e-9);
            prop_assert!(r.lower_bound <= r.true_cost + 1e-9);
        }
        for w in out.trace.windows(2) {
            prop_assert!(w[0].lower_bound <= w[1].lower_bound + 1e-9);
        }
        let f = total_cost(&problem, &out.report.p).unwrap();
        prop_assert_eq!(f, out.report.true_cost);
    }

    #[test]
    fn refined_surrogate_is_exact_at_the_iterate(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, n, (5.0, 120.0));
        let mut bps = vec![Breakpoints::initial(); n];
        for _ in 0..3 {
            let pwls: Vec<_> = bps.iter().map(Breakpoints::chord).collect();
            let report = solve_surrogate(&problem, &pwls, &SolverConfig::default()).unwrap();
            for ((bp, g), &x) in bps.iter_mut().zip(&problem.generators).zip(report.p.as_slice()) {
                bp.insert(sawtooth(g.phase(x)).0, 1e-9);
            }
            let next: Vec<_> = bps.iter().map(Breakpoints::chord).collect();
            let fns = compile_all(&problem, &next).unwrap();
            let g: f64 = fns.iter().zip(report.p.as_slice()).map(|(f, &x)| f.eval(x)).sum();
            let f = total_cost(&problem, &DispatchVector(report.p.0.clone())).unwrap();
            let d_sum: f64 = problem.generators.iter().map(|g| g.d).sum();
            prop_assert!((g - f).abs() <= 1e-9 * (1.0 + f.abs()) + d_sum * 1e-9, "{g} vs {f}");
        }
    }
}

#[test]
fn compiled_pieces_are_convex() {
    // Every compiled piece inherits the nonnegative curvature of the fuel curve.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let g = random_generator(&mut rng, (5.0, 300.0));
        let f: PiecewiseQuadratic = compile(&g, &random_pwl(&mut rng));
        assert!(f.pieces().iter().all(|p| p.q.a >= 0.0));
        assert_eq!((f.lo(), f.hi()), (g.p_min, g.p_max));
    }
}
