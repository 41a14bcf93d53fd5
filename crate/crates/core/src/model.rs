//! Problem data for the lossless static dispatch problem: generator fuel
//! curves with a rectified-sine valve-point term, the demand, and the
//! dataset text format.

use std::fmt;

use crate::error::{EldpError, Result};

/// Default absolute tolerance on box constraints, in MW.
pub const DEFAULT_TOL_BOX: f64 = 1e-9;
/// Default balance tolerance relative to demand.
pub const DEFAULT_TOL_BALANCE_REL: f64 = 1e-6;

/// Fuel-cost coefficients and capacity limits of one generating unit.
///
/// The cost of producing `p` MW is `a p² + b p + c + d |sin(e (p - p_min))|` in $/h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Generator {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, p_min: f64, p_max: f64) -> Self {
        Generator { a, b, c, d, e, p_min, p_max }
    }

    /// Checks the coefficient invariants. `unit` is the 1-based index used in diagnostics.
    pub fn validate(&self, unit: usize) -> Result<()> {
        let bad = |reason: &str| Err(EldpError::InvalidGenerator { unit, reason: reason.to_string() });
        let all = [self.a, self.b, self.c, self.d, self.e, self.p_min, self.p_max];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite coefficient");
        }
        if self.a < 0.0 {
            return bad("quadratic coefficient a must be nonnegative");
        }
        if self.d < 0.0 {
            return bad("valve-point amplitude d must be nonnegative");
        }
        if self.e <= 0.0 {
            return bad("valve-point frequency e must be positive");
        }
        if self.p_min > self.p_max {
            return Err(EldpError::InvalidGenerator {
                unit,
                reason: format!("p_min {} exceeds p_max {}", self.p_min, self.p_max),
            });
        }
        Ok(())
    }

    /// Smooth part of the fuel curve, `a p² + b p + c`.
    pub fn quadratic_cost(&self, p: f64) -> f64 {
        (self.a * p + self.b) * p + self.c
    }

    /// Phase of the valve-point term, `e (p - p_min)`.
    pub fn phase(&self, p: f64) -> f64 {
        self.e * (p - self.p_min)
    }

    pub fn width(&self) -> f64 {
        self.p_max - self.p_min
    }

    /// Per-unit Lipschitz constant `2 a p_max + b + d e` on the capacity box.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.a * self.p_max + self.b + self.d * self.e
    }
}

/// Fuel cost of one unit at output `p`. Defined for any finite `p`.
pub fn unit_cost(g: &Generator, p: f64) -> f64 {
    g.quadratic_cost(p) + g.d * g.phase(p).sin().abs()
}

/// A dispatch vector, one output per generator (MW).
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchVector(pub Vec<f64>);

impl DispatchVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl From<Vec<f64>> for DispatchVector {
    fn from(v: Vec<f64>) -> Self {
        DispatchVector(v)
    }
}

/// Generators plus the demand they must jointly meet.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    pub name: String,
    pub generators: Vec<Generator>,
    pub demand: f64,
}

impl DispatchProblem {
    /// Builds a problem and validates every invariant, including non-emptiness of the
    /// feasible set.
    pub fn new(name: impl Into<String>, generators: Vec<Generator>, demand: f64) -> Result<Self> {
        let problem = DispatchProblem { name: name.into(), generators, demand };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(EldpError::InvalidProblem("at least one generator is required".into()));
        }
        for (i, g) in self.generators.iter().enumerate() {
            g.validate(i + 1)?;
        }
        if !self.demand.is_finite() {
            return Err(EldpError::InvalidProblem("demand must be finite".into()));
        }
        let lo: f64 = self.generators.iter().map(|g| g.p_min).sum();
        let hi: f64 = self.generators.iter().map(|g| g.p_max).sum();
        if self.demand < lo || self.demand > hi {
            return Err(EldpError::Infeasible(format!(
                "demand {} outside total capacity range [{}, {}]",
                self.demand, lo, hi
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Default balance tolerance, `1e-6 * demand` (at least 1e-9 MW).
    pub fn default_tol_balance(&self) -> f64 {
        (DEFAULT_TOL_BALANCE_REL * self.demand.abs()).max(1e-9)
    }

    fn check_len(&self, p: &DispatchVector) -> Result<()> {
        if p.len() != self.len() {
            return Err(EldpError::LengthMismatch { expected: self.len(), got: p.len() });
        }
        Ok(())
    }
}

/// Total fuel cost of a dispatch.
pub fn total_cost(problem: &DispatchProblem, p: &DispatchVector) -> Result<f64> {
    problem.check_len(p)?;
    Ok(problem.generators.iter().zip(p.as_slice()).map(|(g, &x)| unit_cost(g, x)).sum())
}

/// A single capacity violation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxViolation {
    /// 1-based unit index.
    pub unit: usize,
    pub value: f64,
    /// Signed excess: negative below `p_min`, positive above `p_max`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `Σ p_i - p_D`.
    pub balance_residual: f64,
    pub box_violations: Vec<BoxViolation>,
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.feasible {
            return write!(f, "feasible (balance residual {:.3e} MW)", self.balance_residual);
        }
        write!(f, "infeasible: balance residual {:.3e} MW", self.balance_residual)?;
        for v in &self.box_violations {
            write!(f, "; unit {} at {} exceeds its limits by {:.3e} MW", v.unit, v.value, v.excess)?;
        }
        Ok(())
    }
}

/// Checks power balance and capacity limits within the given tolerances.
pub fn check_feasible(
    problem: &DispatchProblem,
    p: &DispatchVector,
    tol_balance: f64,
    tol_box: f64,
) -> Result<Feasibility> {
    problem.check_len(p)?;
    let balance_residual = p.total() - problem.demand;
    let box_violations: Vec<BoxViolation> = problem
        .generators
        .iter()
        .zip(p.as_slice())
        .enumerate()
        .filter_map(|(i, (g, &x))| {
            let excess = if x < g.p_min - tol_box {
                x - g.p_min
            } else if x > g.p_max + tol_box {
                x - g.p_max
            } else if x.is_nan() {
                f64::NAN
            } else {
                return None;
            };
            Some(BoxViolation { unit: i + 1, value: x, excess })
        })
        .collect();
    let feasible = balance_residual.abs() <= tol_balance && box_violations.is_empty();
    Ok(Feasibility { feasible, balance_residual, box_violations })
}

/// Common Lipschitz constant `K = Σ (2 a_i p_max_i + b_i + d_i e_i)` of the true cost and of
/// every chord surrogate on the capacity box, with respect to the 1-norm.
pub fn lipschitz_constant(problem: &DispatchProblem) -> f64 {
    problem.generators.iter().map(Generator::lipschitz).sum()
}

/// Parses the dataset text format.
///
/// The first non-comment line is `demand <MW>`; every following line holds
/// `a b c d e p_min p_max`. `#` starts a comment. A leading `# name: <label>` comment sets
/// the problem name.
pub fn load_problem(source: &str) -> Result<DispatchProblem> {
    let mut name: Option<String> = None;
    let mut demand: Option<f64> = None;
    let mut generators = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let (content, comment) = match raw.find('#') {
            Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
            None => (raw, None),
        };
        if name.is_none() {
            if let Some(label) = comment.and_then(|c| c.trim().strip_prefix("name:")) {
                name = Some(label.trim().to_string());
            }
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| EldpError::Parse {
                line: line_no,
                message: format!("field `{what}`: cannot parse `{s}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(EldpError::Parse { line: line_no, message: format!("field `{what}` is not finite") });
            }
            Ok(v)
        };
        match demand {
            None => {
                if fields[0] != "demand" {
                    return Err(EldpError::Parse {
                        line: line_no,
                        message: format!("expected `demand <MW>`, found `{}`", fields[0]),
                    });
                }
                if fields.len() != 2 {
                    return Err(EldpError::Parse {
                        line: line_no,
                        message: "demand line must hold exactly one value".into(),
                    });
                }
                demand = Some(parse(fields[1], "demand")?);
            }
            Some(_) => {
                const NAMES: [&str; 7] = ["a", "b", "c", "d", "e", "p_min", "p_max"];
                if fields.len() != NAMES.len() {
                    let message = if fields.len() < NAMES.len() {
                        format!("missing field `{}` (expected 7 values, found {})", NAMES[fields.len()], fields.len())
                    } else {
                        format!("expected 7 values, found {}", fields.len())
                    };
                    return Err(EldpError::Parse { line: line_no, message });
                }
                let mut v = [0.0; 7];
                for (slot, (field, what)) in v.iter_mut().zip(fields.iter().zip(NAMES)) {
                    *slot = parse(field, what)?;
                }
                let g = Generator::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
                let unit = generators.len() + 1;
                g.validate(unit).map_err(|err| match err {
                    EldpError::InvalidGenerator { unit, reason } => {
                        EldpError::Parse { line: line_no, message: format!("unit {unit}: {reason}") }
                    }
                    other => other,
                })?;
                generators.push(g);
            }
        }
    }

    let demand = demand.ok_or(EldpError::Parse { line: 0, message: "missing `demand` line".into() })?;
    if generators.is_empty() {
        return Err(EldpError::Parse { line: 0, message: "no generator records".into() });
    }
    DispatchProblem::new(name.unwrap_or_else(|| "unnamed".into()), generators, demand)
}

/// Writes the problem in the dataset format. Numbers use the shortest representation
/// that parses back to the same value.
impl fmt::Display for DispatchProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# name: {}", self.name)?;
        writeln!(f, "# columns: a b c d e p_min p_max")?;
        writeln!(f, "demand {}", self.demand)?;
        for g in &self.generators {
            writeln!(f, "{} {} {} {} {} {} {}", g.a, g.b, g.c, g.d, g.e, g.p_min, g.p_max)?;
        }
        Ok(())
    }
}

/// Names of the bundled benchmark datasets.
pub const BUNDLED: [&str; 4] = ["case1", "case2a", "case2b", "case3"];

/// Text of a bundled dataset.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "case1" => Some(include_str!("../data/case1.txt")),
        "case2a" => Some(include_str!("../data/case2a.txt")),
        "case2b" => Some(include_str!("../data/case2b.txt")),
        "case3" => Some(include_str!("../data/case3.txt")),
        _ => None,
    }
}

/// Loads a bundled dataset by name (`case1`, `case2a`, `case2b`, `case3`).
pub fn bundled(name: &str) -> Result<DispatchProblem> {
    let src =
        bundled_source(name).ok_or_else(|| EldpError::InvalidArgument(format!("unknown bundled dataset `{name}`")))?;
    let mut problem = load_problem(src)?;
    problem.name = name.to_string();
    Ok(problem)
}
