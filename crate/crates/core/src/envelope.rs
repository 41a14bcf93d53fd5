//! Lower convex envelope of a univariate piecewise-quadratic function on a
//! subinterval of its domain.
//!
//! The envelope is built left to right with a stack of convex arcs. Pushing a
//! new arc either joins it directly (convex junction) or replaces the concave
//! junction by the common supporting line of the stack top and the new arc,
//! popping arcs that fall above that line.

use crate::surrogate::{Piece, PiecewiseQuadratic, Quadratic};

/// Relative tolerance used for slope comparisons.
pub const SLOPE_TOL: f64 = 1e-9;

/// Greatest convex minorant of a piecewise-quadratic function on `[lo, hi]`.
///
/// Pieces are either arcs of the source function or affine bridges.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexEnvelope {
    pwq: PiecewiseQuadratic,
    bridge: Vec<bool>,
}

impl ConvexEnvelope {
    pub fn pieces(&self) -> &[Piece] {
        self.pwq.pieces()
    }

    pub fn as_piecewise(&self) -> &PiecewiseQuadratic {
        &self.pwq
    }

    /// Whether piece `j` is an affine bridge rather than an arc of the source.
    pub fn is_bridge(&self, j: usize) -> bool {
        self.bridge[j]
    }

    pub fn lo(&self) -> f64 {
        self.pwq.lo()
    }

    pub fn hi(&self) -> f64 {
        self.pwq.hi()
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.pwq.eval(p)
    }

    pub fn piece_index(&self, p: f64) -> usize {
        self.pwq.piece_index(p)
    }

    /// The bridge `[x, y]` containing `p`, if `p` lies strictly inside one.
    pub fn bridge_at(&self, p: f64) -> Option<(f64, f64)> {
        let j = self.piece_index(p);
        let piece = self.pieces()[j];
        (self.bridge[j] && p > piece.lo && p < piece.hi).then_some((piece.lo, piece.hi))
    }

    /// Smallest minimizer of `env(p) - slope·p`.
    pub fn response_left(&self, slope: f64) -> f64 {
        for piece in self.pieces() {
            if slope <= piece.q.deriv(piece.lo) {
                return piece.lo;
            }
            if piece.q.a > 0.0 && slope < piece.q.deriv(piece.hi) {
                return piece.argmin_tilted(slope);
            }
        }
        self.hi()
    }

    /// Largest minimizer of `env(p) - slope·p`.
    pub fn response_right(&self, slope: f64) -> f64 {
        for piece in self.pieces() {
            if slope < piece.q.deriv(piece.lo) {
                return piece.lo;
            }
            if piece.q.a > 0.0 && slope <= piece.q.deriv(piece.hi) {
                return piece.argmin_tilted(slope);
            }
        }
        self.hi()
    }

    /// Subdifferential `[left derivative, right derivative]` at `p`, with the domain
    /// endpoints open to ∓∞.
    pub fn subgradient(&self, p: f64) -> (f64, f64) {
        let pieces = self.pieces();
        let j = self.piece_index(p);
        let piece = pieces[j];
        let left = if p <= self.lo() { f64::NEG_INFINITY } else { piece.q.deriv(p) };
        let right = if p >= self.hi() {
            f64::INFINITY
        } else if p >= piece.hi && j + 1 < pieces.len() {
            pieces[j + 1].q.deriv(p)
        } else {
            piece.q.deriv(p)
        };
        (left, right)
    }

    pub fn is_convex(&self) -> bool {
        self.pwq.is_convex(SLOPE_TOL)
    }
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    lo: f64,
    hi: f64,
    q: Quadratic,
}

impl Arc {
    fn at_lo(&self) -> f64 {
        self.q.eval(self.lo)
    }

    fn at_hi(&self) -> f64 {
        self.q.eval(self.hi)
    }

    /// Coefficients `(s², s, 1)` of `min q(p) - s p` over the arc, valid on the slope
    /// region containing `s`.
    fn conj_coeffs(&self, s: f64) -> [f64; 3] {
        let q = self.q;
        let at = |p: f64| [0.0, -p, q.eval(p)];
        if q.a > 0.0 {
            let p = (s - q.b) / (2.0 * q.a);
            if p <= self.lo {
                at(self.lo)
            } else if p >= self.hi {
                at(self.hi)
            } else {
                let inv = 1.0 / (4.0 * q.a);
                [-inv, q.b * 2.0 * inv, q.c - q.b * q.b * inv]
            }
        } else if s < q.b {
            at(self.lo)
        } else {
            at(self.hi)
        }
    }

    /// Support point at slope `s`; for an affine arc at its own slope, `right` picks the
    /// right end.
    fn support(&self, s: f64, right: bool) -> f64 {
        let q = self.q;
        if q.a > 0.0 {
            ((s - q.b) / (2.0 * q.a)).clamp(self.lo, self.hi)
        } else if s > q.b || (s == q.b && right) {
            self.hi
        } else {
            self.lo
        }
    }

    fn slope_breaks(&self) -> [f64; 2] {
        [self.q.deriv(self.lo), self.q.deriv(self.hi)]
    }
}

fn eval_coeffs(c: [f64; 3], s: f64) -> f64 {
    (c[0] * s + c[1]) * s + c[2]
}

fn approx_le(x: f64, y: f64) -> bool {
    x <= y + SLOPE_TOL * (1.0 + x.abs().max(y.abs()))
}

/// Slope of the common supporting line of `left` and `right` (with `left` entirely to
/// the left of `right`).
///
/// The gap `h_L(s) - h_R(s)` between the two conjugate-type functions
/// `h(s) = min q(p) - s p` is nondecreasing in `s`, and piecewise quadratic with kinks at the
/// end slopes of either arc, so the root is found in closed form on the right bracket.
fn bridge_slope(left: &Arc, right: &Arc) -> f64 {
    let gap = |s: f64| {
        let cl = left.conj_coeffs(s);
        let cr = right.conj_coeffs(s);
        [cl[0] - cr[0], cl[1] - cr[1], cl[2] - cr[2]]
    };
    let mut breaks: Vec<f64> = left.slope_breaks().into_iter().chain(right.slope_breaks()).collect();
    breaks.sort_by(f64::total_cmp);

    // Bracket [s0, s1] (possibly unbounded) with gap(s0) <= 0 <= gap(s1).
    let values: Vec<f64> = breaks.iter().map(|&s| eval_coeffs(gap(s), s)).collect();
    let (s0, s1) = match values.iter().position(|&v| v >= 0.0) {
        Some(0) => (f64::NEG_INFINITY, breaks[0]),
        Some(i) => (breaks[i - 1], breaks[i]),
        None => (breaks[3], f64::INFINITY),
    };
    let probe = match (s0.is_finite(), s1.is_finite()) {
        (true, true) => 0.5 * (s0 + s1),
        (false, true) => s1 - 1.0 - s1.abs(),
        (true, false) => s0 + 1.0 + s0.abs(),
        (false, false) => 0.0,
    };
    let c = gap(probe);
    let root = solve_increasing_root(c, s0, s1);
    if root.is_finite() {
        root
    } else {
        // Flat gap: arcs share a point; any slope in the bracket supports both.
        if s0.is_finite() {
            s0
        } else {
            s1
        }
    }
}

/// Root in `[s0, s1]` of the quadratic `c0 s² + c1 s + c2`, which is nondecreasing there.
fn solve_increasing_root(c: [f64; 3], s0: f64, s1: f64) -> f64 {
    let [a, b, k] = c;
    let root = if a == 0.0 {
        if b == 0.0 {
            return f64::NAN;
        }
        -k / b
    } else {
        let sq = (b * b - 4.0 * a * k).max(0.0).sqrt();
        let qq = -0.5 * (b + b.signum() * sq);
        let r1 = qq / a;
        let r2 = if qq != 0.0 { k / qq } else { r1 };
        let outside = |r: f64| (s0 - r).max(r - s1).max(0.0);
        let (d1, d2) = (outside(r1), outside(r2));
        if d1 < d2 || (d1 == d2 && 2.0 * a * r1 + b >= 2.0 * a * r2 + b) {
            r1
        } else {
            r2
        }
    };
    root.clamp(s0, s1)
}

/// Lower convex envelope of `pwq` restricted to `[lo, hi]`.
///
/// `[lo, hi]` is clipped to the domain of `pwq`. A degenerate interval yields a
/// single-point envelope.
pub fn convex_envelope(pwq: &PiecewiseQuadratic, lo: f64, hi: f64) -> ConvexEnvelope {
    let lo = lo.max(pwq.lo());
    let hi = hi.min(pwq.hi()).max(lo);
    let resolution = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if hi - lo <= resolution {
        let v = pwq.eval(lo);
        return ConvexEnvelope {
            pwq: PiecewiseQuadratic::from_pieces_unchecked(vec![Piece { lo, hi: lo, q: Quadratic::new(0.0, 0.0, v) }]),
            bridge: vec![false],
        };
    }

    let first = pwq.piece_index(lo);
    let mut arcs: Vec<Arc> = pwq.pieces()[first..]
        .iter()
        .take_while(|piece| piece.lo < hi)
        .map(|piece| Arc { lo: piece.lo.max(lo), hi: piece.hi.min(hi), q: piece.q })
        .filter(|arc| arc.hi - arc.lo > resolution)
        .collect();
    if arcs.is_empty() {
        let piece = pwq.pieces()[first];
        arcs.push(Arc { lo, hi, q: piece.q });
    }
    let mut stack: Vec<Arc> = Vec::with_capacity(arcs.len());
    for arc in arcs {
        push_arc(&mut stack, arc);
    }

    let mut pieces = Vec::with_capacity(2 * stack.len());
    let mut bridge = Vec::with_capacity(2 * stack.len());
    for (i, arc) in stack.iter().enumerate() {
        if i > 0 {
            let prev = &stack[i - 1];
            if arc.lo > prev.hi {
                let q = Quadratic::line_through(prev.hi, prev.at_hi(), arc.lo, arc.at_lo());
                pieces.push(Piece { lo: prev.hi, hi: arc.lo, q });
                bridge.push(true);
            }
        }
        if arc.hi > arc.lo || stack.len() == 1 {
            pieces.push(Piece { lo: arc.lo, hi: arc.hi, q: arc.q });
            bridge.push(false);
        }
    }
    // Keep the covering exact at the ends.
    pieces.first_mut().unwrap().lo = lo;
    pieces.last_mut().unwrap().hi = hi;
    ConvexEnvelope { pwq: PiecewiseQuadratic::from_pieces_unchecked(pieces), bridge }
}

/// Slope entering the stack top at its left end.
fn incoming_slope(stack: &[Arc]) -> f64 {
    let n = stack.len();
    if n < 2 {
        return f64::NEG_INFINITY;
    }
    let (prev, top) = (&stack[n - 2], &stack[n - 1]);
    if top.lo > prev.hi {
        (top.at_lo() - prev.at_hi()) / (top.lo - prev.hi)
    } else {
        prev.q.deriv(prev.hi)
    }
}

fn push_arc(stack: &mut Vec<Arc>, mut arc: Arc) {
    loop {
        let Some(&top) = stack.last() else {
            stack.push(arc);
            return;
        };
        let joined = top.hi >= arc.lo;
        if joined && approx_le(top.q.deriv(top.hi), arc.q.deriv(arc.lo)) {
            stack.push(arc);
            return;
        }
        let s = bridge_slope(&top, &arc);
        let x = top.support(s, true);
        let y = arc.support(s, false);
        if x <= top.lo && stack.len() > 1 && !approx_le(incoming_slope(stack), s) {
            stack.pop();
            continue;
        }
        let last = stack.last_mut().unwrap();
        last.hi = x.max(last.lo);
        arc.lo = y.min(arc.hi).max(last.hi);
        stack.push(arc);
        return;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Generator;
    use crate::surrogate::{compile, identity_pwl};

    fn fig1_pwq() -> PiecewiseQuadratic {
        compile(&Generator::new(0.00533, 11.669, 213.1, 130.0, 0.0635, 50.0, 200.0), &identity_pwl())
    }

    fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64)
    }

    #[test]
    fn convex_input_is_unchanged() {
        let q = Quadratic::new(0.5, -2.0, 1.0);
        let pwq = PiecewiseQuadratic::new(vec![Piece { lo: -1.0, hi: 3.0, q }]).unwrap();
        let env = convex_envelope(&pwq, -1.0, 3.0);
        assert_eq!(env.pieces().len(), 1);
        assert_eq!(env.pieces()[0].q, q);
        assert!(!env.is_bridge(0));
    }

    #[test]
    fn inverted_tent_is_bridged_by_chord() {
        // |x| shape upside down: slope +1 then -1, meeting at x = 0.
        let up = Quadratic::new(0.0, 1.0, 0.0);
        let down = Quadratic::new(0.0, -1.0, 0.0);
        let pwq =
            PiecewiseQuadratic::new(vec![Piece { lo: -1.0, hi: 0.0, q: up }, Piece { lo: 0.0, hi: 1.0, q: down }])
                .unwrap();
        let env = convex_envelope(&pwq, -1.0, 1.0);
        assert_eq!(env.pieces().len(), 1);
        assert!(env.is_bridge(0));
        let q = env.pieces()[0].q;
        assert!(q.b.abs() < 1e-15 && (q.c + 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_convex_bowls_get_bitangent() {
        let left = Quadratic::new(1.0, 0.0, 0.0); // x² on [-2, 1]
        let right = Quadratic::new(1.0, -6.0, 9.0); // (x-3)² on [1, 5]
        let pwq =
            PiecewiseQuadratic::new(vec![Piece { lo: -2.0, hi: 1.0, q: left }, Piece { lo: 1.0, hi: 5.0, q: right }])
                .unwrap();
        let env = convex_envelope(&pwq, -2.0, 5.0);
        assert_eq!(env.pieces().len(), 3);
        assert!(env.is_bridge(1));
        assert!((env.pieces()[1].lo - 0.0).abs() < 1e-12 && (env.pieces()[1].hi - 3.0).abs() < 1e-12);
        assert!(env.eval(1.0).abs() < 1e-12);
        assert_eq!(env.bridge_at(2.0), Some((env.pieces()[1].lo, env.pieces()[1].hi)));
    }

    #[test]
    fn fig1_envelope_sampling_checks() {
        let pwq = fig1_pwq();
        let env = convex_envelope(&pwq, pwq.lo(), pwq.hi());
        assert!(env.is_convex());
        let mut fmin = f64::INFINITY;
        for p in grid(pwq.lo(), pwq.hi(), 1000) {
            assert!(env.eval(p) <= pwq.eval(p) + 1e-9, "p = {p}");
            fmin = fmin.min(pwq.eval(p));
        }
        let emin = env.pieces().iter().map(|pc| pc.eval(pc.argmin_tilted(0.0))).fold(f64::INFINITY, f64::min);
        assert!(emin <= fmin + 1e-9);
        // Envelope touches the function at both ends.
        assert!((env.eval(pwq.lo()) - pwq.eval(pwq.lo())).abs() < 1e-9);
        assert!((env.eval(pwq.hi()) - pwq.eval(pwq.hi())).abs() < 1e-9);
    }

    #[test]
    fn degenerate_interval_is_a_point() {
        let pwq = fig1_pwq();
        let env = convex_envelope(&pwq, 80.0, 80.0);
        assert_eq!(env.pieces().len(), 1);
        assert_eq!(env.eval(80.0), pwq.eval(80.0));
        assert_eq!(env.response_left(1e9), 80.0);
    }

    #[test]
    fn responses_bracket_flat_bridges() {
        let up = Quadratic::new(0.0, 1.0, 0.0);
        let down = Quadratic::new(0.0, -1.0, 0.0);
        let pwq =
            PiecewiseQuadratic::new(vec![Piece { lo: -1.0, hi: 0.0, q: up }, Piece { lo: 0.0, hi: 1.0, q: down }])
                .unwrap();
        let env = convex_envelope(&pwq, -1.0, 1.0);
        assert_eq!(env.response_left(0.0), -1.0);
        assert_eq!(env.response_right(0.0), 1.0);
        assert_eq!(env.response_left(-0.5), -1.0);
        assert_eq!(env.response_right(0.5), 1.0);
    }
}
