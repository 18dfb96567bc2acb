//! Constrained plant/control/layout optimization.
//!
//! A design vector concatenates the active blocks in the fixed order plant
//! `(R, AR)`, control `(k_pto, b_pto)`, layout `(x_2..x_n, y_2..y_n)`. Body 1
//! stays at the origin. Every solver minimizes through the [`Problem`] trait
//! and ranks candidates with the feasibility rules in [`compare`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod farm;
mod ga;
mod local;
mod study;
mod sweep;

pub use farm::{FarmProblem, WaveObjective};
pub use ga::{run_ga, GaConfig};
pub use local::{run_local, run_local_multistart, LocalConfig};
pub use farm::DecodedDesign;
pub use study::{
    layout_fixture, preset, preset_names, run_study, write_bundle, CaseMetrics, CaseResult,
    CaseSpec, ClimateSource, GridSpec, LayoutSpec, SolverKind, StudyResult, StudySpec, WaveSpec,
    FIXTURE_NAMES,
};
pub use sweep::{
    landscape_period, run_sweep, write_field_csv, write_layout_svg, SweepField, SweepSpec,
    SweepSummary,
};

/// Minimum clearance between device hulls (m).
pub const DEFAULT_SAFETY_DISTANCE: f64 = 10.0;
pub const DRAFT_MIN: f64 = 0.5;
pub const DRAFT_MAX: f64 = 20.0;

pub const RADIUS_BOUNDS: (f64, f64) = (0.5, 10.0);
pub const SLENDERNESS_BOUNDS: (f64, f64) = (0.2, 10.0);
pub const K_PTO_BOUNDS: (f64, f64) = (-5e5, 5e5);
pub const B_PTO_BOUNDS: (f64, f64) = (0.0, 5e5);

/// Half-width of the layout domain for `n` devices, `0.5 sqrt(2 n 1e4)` m.
pub fn layout_half_width(n: usize) -> f64 {
    0.5 * (2.0 * n as f64 * 1e4).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Plant,
    Control,
    Layout,
}

impl Block {
    pub fn as_str(self) -> &'static str {
        match self {
            Block::Plant => "plant",
            Block::Control => "control",
            Block::Layout => "layout",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plant" => Ok(Block::Plant),
            "control" => Ok(Block::Control),
            "layout" => Ok(Block::Layout),
            other => Err(Error::invalid(format!("unknown variable block '{other}'"))),
        }
    }
}

/// Active variable blocks with their names and bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSpace {
    blocks: Vec<Block>,
    n_wec: usize,
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
}

impl VariableSpace {
    /// Default bounds for the given blocks and farm size.
    pub fn new(blocks: &[Block], n_wec: usize) -> Result<Self> {
        if n_wec == 0 {
            return Err(Error::invalid("farm needs at least one device"));
        }
        let mut blocks = blocks.to_vec();
        blocks.sort();
        blocks.dedup();
        if blocks.is_empty() {
            return Err(Error::invalid("no active variable block"));
        }
        if blocks.contains(&Block::Layout) && n_wec < 2 {
            return Err(Error::invalid("layout block needs at least two devices"));
        }
        let mut names = Vec::new();
        let mut bounds = Vec::new();
        for block in &blocks {
            match block {
                Block::Plant => {
                    names.extend(["radius".to_string(), "slenderness".to_string()]);
                    bounds.extend([RADIUS_BOUNDS, SLENDERNESS_BOUNDS]);
                }
                Block::Control => {
                    names.extend(["k_pto".to_string(), "b_pto".to_string()]);
                    bounds.extend([K_PTO_BOUNDS, B_PTO_BOUNDS]);
                }
                Block::Layout => {
                    let w = layout_half_width(n_wec);
                    for i in 2..=n_wec {
                        names.push(format!("x{i}"));
                        bounds.push((0.0, w));
                    }
                    for i in 2..=n_wec {
                        names.push(format!("y{i}"));
                        bounds.push((-w, w));
                    }
                }
            }
        }
        Ok(VariableSpace {
            blocks,
            n_wec,
            names,
            bounds,
        })
    }

    /// Replaces the bounds of one named variable.
    pub fn with_bounds(mut self, name: &str, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::invalid(format!("bounds [{lower}, {upper}] for {name}")));
        }
        let i = self
            .index(name)
            .ok_or_else(|| Error::invalid(format!("no active variable named '{name}'")))?;
        self.bounds[i] = (lower, upper);
        Ok(self)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn has(&self, block: Block) -> bool {
        self.blocks.contains(&block)
    }

    pub fn n_wec(&self) -> usize {
        self.n_wec
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Componentwise projection onto the box; the flag reports any change.
    pub fn clamp(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let mut changed = false;
        let y = x
            .iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                let c = v.clamp(lo, hi);
                changed |= c != v;
                c
            })
            .collect();
        (y, changed)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Names of variables sitting exactly on a bound.
    pub fn active_bounds(&self, x: &[f64]) -> Vec<String> {
        x.iter()
            .zip(&self.bounds)
            .zip(&self.names)
            .filter_map(|((&v, &(lo, hi)), name)| {
                if v == lo {
                    Some(format!("{name}=lower"))
                } else if v == hi {
                    Some(format!("{name}=upper"))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// One violated device pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairViolation {
    pub p: usize,
    pub q: usize,
    pub distance: f64,
    /// `2R + s_d - d` (m).
    pub violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub pairs: Vec<PairViolation>,
    /// Distance of the draft outside `[DRAFT_MIN, DRAFT_MAX]` (m).
    pub draft: f64,
    pub total: f64,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.total == 0.0
    }

    fn with_draft(mut self, draft: f64) -> Self {
        let v = (DRAFT_MIN - draft).max(0.0) + (draft - DRAFT_MAX).max(0.0);
        self.draft = v;
        self.total += v;
        self
    }

    /// Scalar violation for generic problems.
    pub fn scalar(total: f64) -> Self {
        ConstraintReport {
            pairs: Vec::new(),
            draft: 0.0,
            total: total.max(0.0),
        }
    }
}

/// Pairwise spacing constraints `2R + s_d - d_pq <= 0`.
pub fn distance_constraints(layout: &[(f64, f64)], radius: f64, safety: f64) -> ConstraintReport {
    let min = 2.0 * radius + safety;
    let mut pairs = Vec::new();
    for p in 0..layout.len() {
        for q in p + 1..layout.len() {
            let d = (layout[p].0 - layout[q].0).hypot(layout[p].1 - layout[q].1);
            if d < min {
                pairs.push(PairViolation {
                    p,
                    q,
                    distance: d,
                    violation: min - d,
                });
            }
        }
    }
    let total = pairs.iter().map(|v| v.violation).sum();
    ConstraintReport {
        pairs,
        draft: 0.0,
        total,
    }
}

/// Distance and draft constraints together.
pub fn design_constraints(
    layout: &[(f64, f64)],
    radius: f64,
    draft: f64,
    safety: f64,
) -> ConstraintReport {
    distance_constraints(layout, radius, safety).with_draft(draft)
}

/// Outcome of one objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// Value to minimize.
    pub objective: f64,
    pub constraints: ConstraintReport,
    /// Diagnostic of a failed model evaluation.
    pub failure: Option<String>,
    /// The input was projected onto the bounds before evaluation.
    pub clamped: bool,
}

impl Evaluation {
    pub fn new(objective: f64, constraints: ConstraintReport) -> Self {
        Evaluation {
            objective,
            constraints,
            failure: None,
            clamped: false,
        }
    }

    pub fn failed(objective: f64, message: impl Into<String>) -> Self {
        Evaluation {
            objective,
            constraints: ConstraintReport::default(),
            failure: Some(message.into()),
            clamped: false,
        }
    }

    pub fn violation(&self) -> f64 {
        self.constraints.total
    }

    pub fn is_feasible(&self) -> bool {
        self.failure.is_none() && self.constraints.is_feasible()
    }

    fn class(&self) -> u8 {
        if self.failure.is_some() {
            2
        } else if self.constraints.is_feasible() {
            0
        } else {
            1
        }
    }
}

/// Feasibility-rule ordering: feasible by objective, then infeasible by total
/// violation, then failed evaluations. `Less` means `a` is better.
pub fn compare(a: &Evaluation, b: &Evaluation) -> Ordering {
    a.class().cmp(&b.class()).then_with(|| match a.class() {
        0 => a.objective.total_cmp(&b.objective),
        1 => a.violation().total_cmp(&b.violation()),
        _ => Ordering::Equal,
    })
}

/// Index of the best evaluation; exact ties go to the lower index.
pub fn best_index(evals: &[Evaluation]) -> Option<usize> {
    (0..evals.len()).reduce(|best, i| {
        if compare(&evals[i], &evals[best]) == Ordering::Less {
            i
        } else {
            best
        }
    })
}

/// A bounded minimization problem.
pub trait Problem: Sync {
    fn bounds(&self) -> &[(f64, f64)];

    /// Must be deterministic in `x`.
    fn evaluate(&self, x: &[f64]) -> Evaluation;

    fn dim(&self) -> usize {
        self.bounds().len()
    }

    fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{}", i + 1)).collect()
    }
}

/// Unconstrained problem defined by a closure.
pub struct FnProblem<F> {
    bounds: Vec<(f64, f64)>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnProblem<F> {
    pub fn new(bounds: Vec<(f64, f64)>, f: F) -> Self {
        FnProblem { bounds, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Problem for FnProblem<F> {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Evaluation::new((self.f)(x), ConstraintReport::default())
    }
}

/// One row of an optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    /// Generation or simplex iteration.
    pub iteration: usize,
    /// Start index for multi-start runs.
    pub start: usize,
    pub evaluations: usize,
    pub best_objective: f64,
    pub best_violation: f64,
    pub best_feasible: bool,
    /// Population objective range (GA) or penalized merit (local).
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub solver: String,
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub evaluation: Evaluation,
    /// Best design satisfies every constraint.
    pub feasible: bool,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
    /// Stopped early by the evaluation budget.
    pub truncated: bool,
    /// Excluded from serialized output so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests;
