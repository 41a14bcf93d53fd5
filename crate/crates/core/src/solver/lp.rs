//! Mixed-integer formulation of a surrogate problem in LP-format text, so an
//! external MIQP solver can cross-check the certified optimum.
//!
//! Units with the identity surrogate use the sawtooth model
//!
//! ```text
//! min Σ a p² + b p + c + d t
//! s.t. Σ p = D,  -t <= e (p - p_min) - π k <= t,  k integer
//! ```
//!
//! and every other surrogate adds one segment selector per linear piece:
//! `t = Σ χ_j`, `Σ η_j = 1`, `X_j η_j <= χ_j <= X_{j+1} η_j`, `η_j` binary, with cost
//! `d Σ (α_j χ_j + β_j η_j)` in place of `d t`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{EldpError, Result};
use crate::model::DispatchProblem;
use crate::surrogate::{sawtooth, PiecewiseLinear, PwlKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpVar {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A quadratic-objective mixed-integer model with linear constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    pub name: String,
    pub vars: Vec<LpVar>,
    pub linear: Vec<(usize, f64)>,
    /// Terms `q x²`.
    pub quadratic: Vec<(usize, f64)>,
    pub constant: f64,
    pub constraints: Vec<LpConstraint>,
}

struct UnitVars {
    p: usize,
    t: usize,
    k: usize,
    /// `(χ, η)` per segment; empty for the identity surrogate.
    segments: Vec<(usize, usize)>,
}

impl LpModel {
    /// Builds the formulation for `problem` with one surrogate per generator.
    pub fn build(problem: &DispatchProblem, pwls: &[PiecewiseLinear]) -> Result<Self> {
        if pwls.len() != problem.len() {
            return Err(EldpError::LengthMismatch { expected: problem.len(), got: pwls.len() });
        }
        let mut model = LpModel {
            name: problem.name.clone(),
            vars: Vec::new(),
            linear: Vec::new(),
            quadratic: Vec::new(),
            constant: 0.0,
            constraints: Vec::new(),
        };
        let units = model.declare(problem, pwls);

        for ((g, pwl), u) in problem.generators.iter().zip(pwls).zip(&units) {
            model.quadratic.push((u.p, g.a));
            model.linear.push((u.p, g.b));
            model.constant += g.c;
            if u.segments.is_empty() {
                model.linear.push((u.t, g.d));
            } else {
                for (j, &(chi, eta)) in u.segments.iter().enumerate() {
                    model.linear.push((chi, g.d * pwl.slopes()[j]));
                    model.linear.push((eta, g.d * pwl.intercepts()[j]));
                }
            }
        }

        model.constraints.push(LpConstraint {
            name: "balance".into(),
            terms: units.iter().map(|u| (u.p, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: problem.demand,
        });
        for (i, ((g, pwl), u)) in problem.generators.iter().zip(pwls).zip(&units).enumerate() {
            let i = i + 1;
            let phase = vec![(u.p, g.e), (u.k, -PI)];
            let with_t = |sign: f64| {
                let mut terms = phase.clone();
                terms.push((u.t, sign));
                terms
            };
            let offset = g.e * g.p_min;
            model.constraints.push(LpConstraint {
                name: format!("saw_lo{i}"),
                terms: with_t(1.0),
                sense: Sense::Ge,
                rhs: offset,
            });
            model.constraints.push(LpConstraint {
                name: format!("saw_hi{i}"),
                terms: with_t(-1.0),
                sense: Sense::Le,
                rhs: offset,
            });
            if u.segments.is_empty() {
                continue;
            }
            let mut link = vec![(u.t, 1.0)];
            link.extend(u.segments.iter().map(|&(chi, _)| (chi, -1.0)));
            model.constraints.push(LpConstraint { name: format!("link{i}"), terms: link, sense: Sense::Eq, rhs: 0.0 });
            model.constraints.push(LpConstraint {
                name: format!("pick{i}"),
                terms: u.segments.iter().map(|&(_, eta)| (eta, 1.0)).collect(),
                sense: Sense::Eq,
                rhs: 1.0,
            });
            let x = pwl.breakpoints();
            for (j, &(chi, eta)) in u.segments.iter().enumerate() {
                let s = j + 1;
                model.constraints.push(LpConstraint {
                    name: format!("seg_lo{i}_{s}"),
                    terms: vec![(chi, 1.0), (eta, -x[j])],
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
                model.constraints.push(LpConstraint {
                    name: format!("seg_hi{i}_{s}"),
                    terms: vec![(chi, 1.0), (eta, -x[j + 1])],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
            }
        }
        Ok(model)
    }

    fn add_var(&mut self, name: String, lo: f64, hi: f64, kind: VarKind) -> usize {
        self.vars.push(LpVar { name, lo, hi, kind });
        self.vars.len() - 1
    }

    fn declare(&mut self, problem: &DispatchProblem, pwls: &[PiecewiseLinear]) -> Vec<UnitVars> {
        let n = problem.len();
        let p: Vec<usize> = (0..n)
            .map(|i| {
                let g = &problem.generators[i];
                self.add_var(format!("p{}", i + 1), g.p_min, g.p_max, VarKind::Continuous)
            })
            .collect();
        let t: Vec<usize> =
            (0..n).map(|i| self.add_var(format!("t{}", i + 1), 0.0, FRAC_PI_2, VarKind::Continuous)).collect();
        let k: Vec<usize> = (0..n)
            .map(|i| {
                let g = &problem.generators[i];
                let k_max = (g.e * g.width() / PI).ceil();
                self.add_var(format!("k{}", i + 1), 0.0, k_max, VarKind::Integer)
            })
            .collect();
        let chis: Vec<Vec<usize>> = pwls
            .iter()
            .enumerate()
            .map(|(i, pwl)| {
                if pwl.kind() == PwlKind::Identity {
                    return Vec::new();
                }
                (0..pwl.segments())
                    .map(|j| self.add_var(format!("chi{}_{}", i + 1, j + 1), 0.0, FRAC_PI_2, VarKind::Continuous))
                    .collect()
            })
            .collect();
        let mut units = Vec::with_capacity(n);
        for (i, chi) in chis.into_iter().enumerate() {
            let segments = chi
                .into_iter()
                .enumerate()
                .map(|(j, c)| (c, self.add_var(format!("eta{}_{}", i + 1, j + 1), 0.0, 1.0, VarKind::Binary)))
                .collect();
            units.push(UnitVars { p: p[i], t: t[i], k: k[i], segments });
        }
        units
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.vars.iter().filter(|v| v.kind == kind).count()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Objective value of a full variable assignment.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.constant
            + self.linear.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
            + self.quadratic.iter().map(|&(i, q)| q * x[i] * x[i]).sum::<f64>()
    }

    /// Largest constraint, bound, or integrality violation of an assignment.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.terms.iter().map(|&(i, a)| a * x[i]).sum();
            match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.vars.iter().zip(x).map(|(v, &xi)| {
            let out = (v.lo - xi).max(xi - v.hi).max(0.0);
            let frac = if v.kind == VarKind::Continuous { 0.0 } else { (xi - xi.round()).abs() };
            out.max(frac)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Completes a dispatch into a full assignment: `k` is the nearest multiple of π
    /// to the phase, `t` the sawtooth value, and the segment holding `t` is selected.
    pub fn lift_dispatch(&self, problem: &DispatchProblem, pwls: &[PiecewiseLinear], p: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.vars.len()];
        let idx = |name: String| self.var_index(&name).expect("variable declared by build");
        for (i, (g, pwl)) in problem.generators.iter().zip(pwls).enumerate() {
            let u = i + 1;
            let (t, k) = sawtooth(g.phase(p[i]));
            x[idx(format!("p{u}"))] = p[i];
            x[idx(format!("t{u}"))] = t;
            x[idx(format!("k{u}"))] = k as f64;
            if pwl.kind() != PwlKind::Identity {
                let j = pwl.segment_of(t) + 1;
                x[idx(format!("chi{u}_{j}"))] = t;
                x[idx(format!("eta{u}_{j}"))] = 1.0;
            }
        }
        x
    }

    /// Writes the model in LP format.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let name = |i: usize| self.vars[i].name.as_str();
        let _ = writeln!(out, "\\ Problem: {}", self.name);
        let _ = writeln!(out, "Minimize");
        out.push_str(" obj:");
        let mut line = Terms::new();
        for &(i, c) in &self.linear {
            line.push(&mut out, c, name(i));
        }
        if self.constant != 0.0 {
            line.push_constant(&mut out, self.constant);
        }
        if !self.quadratic.is_empty() {
            out.push_str(" + [");
            let mut quad = Terms::new();
            for &(i, q) in &self.quadratic {
                quad.push(&mut out, 2.0 * q, &format!("{} ^ 2", name(i)));
            }
            out.push_str(" ] / 2");
        }
        out.push('\n');
        let _ = writeln!(out, "Subject To");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            let mut terms = Terms::new();
            for &(i, a) in &c.terms {
                terms.push(&mut out, a, name(i));
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        let _ = writeln!(out, "Bounds");
        for v in self.vars.iter().filter(|v| v.kind != VarKind::Binary) {
            let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
        }
        for (section, kind) in [("General", VarKind::Integer), ("Binary", VarKind::Binary)] {
            let names: Vec<&str> = self.vars.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
            if names.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{section}");
            for chunk in names.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Writes signed terms, wrapping long rows.
struct Terms {
    count: usize,
}

impl Terms {
    const PER_LINE: usize = 6;

    fn new() -> Self {
        Terms { count: 0 }
    }

    fn wrap(&mut self, out: &mut String) {
        if self.count > 0 && self.count.is_multiple_of(Self::PER_LINE) {
            out.push_str("\n   ");
        }
        self.count += 1;
    }

    fn push(&mut self, out: &mut String, coef: f64, var: &str) {
        if coef == 0.0 {
            return;
        }
        self.wrap(out);
        let sign = if coef < 0.0 { '-' } else { '+' };
        let mag = coef.abs();
        if mag == 1.0 {
            let _ = write!(out, " {sign} {var}");
        } else {
            let _ = write!(out, " {sign} {mag} {var}");
        }
    }

    fn push_constant(&mut self, out: &mut String, value: f64) {
        self.wrap(out);
        let sign = if value < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", value.abs());
    }
}

/// Writes the LP-format model of the surrogate problem to `out`.
pub fn export_lp(problem: &DispatchProblem, pwls: &[PiecewiseLinear], out: &mut dyn Write) -> Result<()> {
    let model = LpModel::build(problem, pwls)?;
    out.write_all(model.to_lp_string().as_bytes())?;
    Ok(())
}

/// Writes the LP-format model to a file.
pub fn export_lp_to_path(problem: &DispatchProblem, pwls: &[PiecewiseLinear], path: &Path) -> Result<()> {
    let model = LpModel::build(problem, pwls)?;
    std::fs::write(path, model.to_lp_string())
        .map_err(|e| EldpError::Io(format!("cannot write {}: {e}", path.display())))
}
