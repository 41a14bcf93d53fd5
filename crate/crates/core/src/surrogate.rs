//! Piecewise-linear surrogates of `sin t` on `[0, π/2]` and their compilation
//! into explicit piecewise-quadratic generator costs.
//!
//! The rectified sine `|sin x|` equals `sin(t(x))` where `t(x)` is the distance from
//! `x` to the nearest multiple of π (the sawtooth map). Replacing `sin` on `[0, π/2]` by
//! a piecewise-linear function and composing with the sawtooth gives a cost that is
//! quadratic on every interval where the sawtooth flank and the linear segment are
//! fixed.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{EldpError, Result};
use crate::model::Generator;

/// Default tolerance (radians) under which a new breakpoint is merged into an existing one.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

/// Distance from `x` to the nearest multiple of π, with the multiple attaining it.
///
/// Returns `(t, k)` with `t = |x - kπ| ∈ [0, π/2]`. When `x` is equidistant from two
/// multiples, the smaller `k` is returned.
pub fn sawtooth(x: f64) -> (f64, i64) {
    let k0 = (x / PI).floor();
    let r = (x - k0 * PI).clamp(0.0, PI);
    if r <= FRAC_PI_2 {
        (r, k0 as i64)
    } else {
        ((PI - r).max(0.0), k0 as i64 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwlKind {
    /// Chords of `sin`: bounds it from below.
    Under,
    /// Tangents of `sin`: bounds it from above.
    Over,
    /// The single segment `t`, an upper bound of `sin t`.
    Identity,
}

/// Piecewise-linear function on `[0, π/2]` given by breakpoints and per-segment
/// slope and intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    kind: PwlKind,
}

impl PiecewiseLinear {
    /// Assembles a surrogate from raw parts, checking the structural invariants.
    pub fn from_parts(breakpoints: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>, kind: PwlKind) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(EldpError::InvalidSurrogate("need at least two breakpoints".into()));
        }
        if slopes.len() != breakpoints.len() - 1 || intercepts.len() != slopes.len() {
            return Err(EldpError::InvalidSurrogate("one slope and intercept per segment required".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != FRAC_PI_2 {
            return Err(EldpError::InvalidSurrogate("breakpoints must span [0, π/2]".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EldpError::InvalidSurrogate("breakpoints must be strictly increasing".into()));
        }
        if slopes.iter().chain(&intercepts).any(|v| !v.is_finite()) {
            return Err(EldpError::InvalidSurrogate("non-finite coefficient".into()));
        }
        Ok(PiecewiseLinear { breakpoints, slopes, intercepts, kind })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn kind(&self) -> PwlKind {
        self.kind
    }

    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    /// Index of the segment containing `t`; a breakpoint belongs to the segment on its left.
    pub fn segment_of(&self, t: f64) -> usize {
        let inner = &self.breakpoints[1..self.breakpoints.len() - 1];
        inner.partition_point(|&x| x < t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let j = self.segment_of(t);
        self.slopes[j] * t + self.intercepts[j]
    }
}

/// The single segment `t ↦ t` on `[0, π/2]`.
pub fn identity_pwl() -> PiecewiseLinear {
    PiecewiseLinear {
        breakpoints: vec![0.0, FRAC_PI_2],
        slopes: vec![1.0],
        intercepts: vec![0.0],
        kind: PwlKind::Identity,
    }
}

/// Tangency points of the three-segment over-approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentConfig {
    pub theta1: f64,
    pub theta2: f64,
}

impl TangentConfig {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        let cfg = TangentConfig { theta1, theta2 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Intersections of `t` with the first tangent, and of the two tangents.
    pub fn crossings(&self) -> (f64, f64) {
        let (s1, c1) = self.theta1.sin_cos();
        let (s2, c2) = self.theta2.sin_cos();
        let x1 = (s1 - self.theta1 * c1) / (1.0 - c1);
        let x2 = (self.theta2 * c2 - self.theta1 * c1 - s2 + s1) / (c2 - c1);
        (x1, x2)
    }

    pub fn validate(&self) -> Result<()> {
        let (t1, t2) = (self.theta1, self.theta2);
        if !(t1 > 0.0 && t1 < t2 && t2 < FRAC_PI_2) {
            return Err(EldpError::InvalidSurrogate(format!(
                "tangency points must satisfy 0 < θ1 < θ2 < π/2, got θ1 = {t1}, θ2 = {t2}"
            )));
        }
        let (x1, x2) = self.crossings();
        if !(x1 > 0.0 && x1 < x2 && x2 < FRAC_PI_2) {
            return Err(EldpError::InvalidSurrogate(format!(
                "segment endpoints must satisfy 0 < X1 < X2 < π/2, got X1 = {x1}, X2 = {x2}"
            )));
        }
        Ok(())
    }
}

impl Default for TangentConfig {
    fn default() -> Self {
        TangentConfig { theta1: 0.35 * PI, theta2: 0.47 * PI }
    }
}

/// `min(t, T1(t), T2(t))` where `T_j` is the tangent of `sin` at `θ_j`.
pub fn tangent_pwl(cfg: &TangentConfig) -> Result<PiecewiseLinear> {
    cfg.validate()?;
    let (x1, x2) = cfg.crossings();
    let tangent = |theta: f64| {
        let (s, c) = theta.sin_cos();
        (c, s - theta * c)
    };
    let (a1, b1) = tangent(cfg.theta1);
    let (a2, b2) = tangent(cfg.theta2);
    PiecewiseLinear::from_parts(vec![0.0, x1, x2, FRAC_PI_2], vec![1.0, a1, a2], vec![0.0, b1, b2], PwlKind::Over)
}

/// Chord interpolation of `sin` through the given breakpoints.
pub fn chord_pwl(breakpoints: &[f64]) -> Result<PiecewiseLinear> {
    if breakpoints.len() < 2 {
        return Err(EldpError::InvalidSurrogate("chord surrogate needs at least two breakpoints".into()));
    }
    let (slopes, intercepts) = breakpoints
        .windows(2)
        .map(|w| {
            let alpha = (w[1].sin() - w[0].sin()) / (w[1] - w[0]);
            (alpha, w[0].sin() - alpha * w[0])
        })
        .unzip();
    PiecewiseLinear::from_parts(breakpoints.to_vec(), slopes, intercepts, PwlKind::Under)
}

/// Sorted breakpoint set of an adaptive chord surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints(Vec<f64>);

impl Breakpoints {
    /// The initial set `{0, π/2}`.
    pub fn initial() -> Self {
        Breakpoints(vec![0.0, FRAC_PI_2])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Inserts `t` (clamped to `[0, π/2]`) unless an existing breakpoint lies within
    /// `merge_tol`. Returns whether the set changed.
    pub fn insert(&mut self, t: f64, merge_tol: f64) -> bool {
        let t = t.clamp(0.0, FRAC_PI_2);
        let pos = self.0.partition_point(|&x| x < t);
        let near = |i: usize| self.0.get(i).is_some_and(|&x| (x - t).abs() <= merge_tol);
        if near(pos) || (pos > 0 && near(pos - 1)) {
            return false;
        }
        self.0.insert(pos, t);
        true
    }

    pub fn chord(&self) -> PiecewiseLinear {
        chord_pwl(&self.0).expect("breakpoint set always spans [0, π/2]")
    }
}

/// Returns `bp ∪ {t}` under the merge rule of [`Breakpoints::insert`].
pub fn refine(bp: &Breakpoints, t: f64, merge_tol: f64) -> Breakpoints {
    let mut out = bp.clone();
    out.insert(t, merge_tol);
    out
}

/// `a p² + b p + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Quadratic { a, b, c }
    }

    /// The affine function through two points.
    pub fn line_through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        Quadratic { a: 0.0, b: slope, c: y0 - slope * x0 }
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        (self.a * p + self.b) * p + self.c
    }

    #[inline]
    pub fn deriv(&self, p: f64) -> f64 {
        2.0 * self.a * p + self.b
    }
}

/// One quadratic piece on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub q: Quadratic,
}

impl Piece {
    pub fn eval(&self, p: f64) -> f64 {
        self.q.eval(p)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Minimizer of `q(p) - slope·p` over the piece; ties resolve to the left.
    pub fn argmin_tilted(&self, slope: f64) -> f64 {
        if self.q.a > 0.0 {
            ((slope - self.q.b) / (2.0 * self.q.a)).clamp(self.lo, self.hi)
        } else if slope > self.q.b {
            self.hi
        } else {
            self.lo
        }
    }
}

/// Continuous function made of contiguous quadratic pieces covering its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    pieces: Vec<Piece>,
}

impl PiecewiseQuadratic {
    /// Validates contiguity (`hi_j = lo_{j+1}`), ordering, and nonnegative curvature.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(EldpError::InvalidSurrogate("piecewise quadratic needs at least one piece".into()));
        }
        for (j, piece) in pieces.iter().enumerate() {
            if !(piece.lo <= piece.hi) {
                return Err(EldpError::InvalidSurrogate(format!("piece {j} has lo > hi")));
            }
            if piece.q.a < 0.0 {
                return Err(EldpError::InvalidSurrogate(format!("piece {j} is concave")));
            }
        }
        if pieces.windows(2).any(|w| w[0].hi != w[1].lo) {
            return Err(EldpError::InvalidSurrogate("pieces are not contiguous".into()));
        }
        Ok(PiecewiseQuadratic { pieces })
    }

    pub(crate) fn from_pieces_unchecked(pieces: Vec<Piece>) -> Self {
        PiecewiseQuadratic { pieces }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.pieces[0].lo
    }

    pub fn hi(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].hi
    }

    /// Index of the piece holding `p`. A boundary point belongs to the left piece;
    /// points outside the domain map to the nearest end piece.
    pub fn piece_index(&self, p: f64) -> usize {
        self.pieces[..self.pieces.len() - 1].partition_point(|piece| piece.hi < p)
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.pieces[self.piece_index(p)].eval(p)
    }

    /// Interior piece boundaries in increasing order.
    pub fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces[..self.pieces.len() - 1].iter().map(|piece| piece.hi)
    }

    /// Whether one-sided slopes are nondecreasing across all boundaries, within a
    /// relative tolerance.
    pub fn is_convex(&self, rel_tol: f64) -> bool {
        self.pieces.windows(2).all(|w| {
            let left = w[0].q.deriv(w[0].hi);
            let right = w[1].q.deriv(w[1].lo);
            left <= right + rel_tol * (1.0 + left.abs().max(right.abs()))
        })
    }

    /// Exact minimum over the domain, piece by piece.
    pub fn minimum(&self) -> (f64, f64) {
        self.pieces
            .iter()
            .map(|piece| {
                let p = piece.argmin_tilted(0.0);
                (p, piece.eval(p))
            })
            .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

/// Compiles the surrogate cost `a p² + b p + c + d·pwl(sawtooth(e (p - p_min)))` of a
/// generator into explicit quadratic pieces over `[p_min, p_max]`.
///
/// Piece boundaries sit exactly where the phase `e (p - p_min)` crosses `kπ ± X_j` for a
/// breakpoint `X_j`; inside a piece the sawtooth flank is affine in `p`.
pub fn compile(g: &Generator, pwl: &PiecewiseLinear) -> PiecewiseQuadratic {
    let span = g.e * g.width();
    let mut cuts = Vec::new();
    if g.d != 0.0 && span > 0.0 {
        let tol = 1e-12 * span.max(1.0);
        let periods = (span / PI).ceil() as i64;
        for k in 0..=periods {
            let base = k as f64 * PI;
            for &x in pwl.breakpoints() {
                for cut in [base + x, base + PI - x] {
                    if cut > tol && cut < span - tol {
                        cuts.push(cut);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|b, a| (*b - *a).abs() <= tol);
    }

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(0.0);
    edges.extend(cuts);
    edges.push(span);

    let to_power = |x: f64| if x == span { g.p_max } else { g.p_min + x / g.e };
    let pieces = edges
        .windows(2)
        .map(|w| {
            let (lo, hi) = (to_power(w[0]), to_power(w[1]));
            let q =
                if g.d == 0.0 { Quadratic::new(g.a, g.b, g.c) } else { flank_quadratic(g, pwl, 0.5 * (w[0] + w[1])) };
            Piece { lo, hi, q }
        })
        .collect();
    PiecewiseQuadratic::from_pieces_unchecked(pieces)
}

/// Quadratic that equals the surrogate cost on the flank segment containing phase `x`.
fn flank_quadratic(g: &Generator, pwl: &PiecewiseLinear, x: f64) -> Quadratic {
    let (t, k) = sawtooth(x);
    let j = pwl.segment_of(t);
    let (alpha, beta) = (pwl.slopes()[j], pwl.intercepts()[j]);
    let offset = g.e * g.p_min + k as f64 * PI;
    // rising: t = e p - offset; falling: t = offset - e p
    let sign = if x >= k as f64 * PI { 1.0 } else { -1.0 };
    Quadratic::new(g.a, g.b + g.d * alpha * sign * g.e, g.c + g.d * (beta - alpha * sign * offset))
}
