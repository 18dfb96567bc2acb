//! Bounded Nelder-Mead refiner.
//!
//! The simplex lives in coordinates scaled to the unit box and every trial
//! point is projected onto it. Constraints enter through a quadratic penalty
//! whose weight is tied to the objective magnitude at the start, which keeps
//! the search invariant to positive rescaling of the objective.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compare, Evaluation, OptResult, Problem, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    pub max_evaluations: usize,
    /// Simplex diameter in unit-box coordinates at which a start ends.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Penalty weight relative to the starting objective magnitude.
    pub penalty: f64,
    pub starts: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            max_evaluations: 2000,
            tolerance: 1e-6,
            initial_step: 0.1,
            penalty: 1e3,
            starts: 3,
        }
    }
}

struct Vertex {
    u: Vec<f64>,
    merit: f64,
}

struct Search<'a, P: ?Sized> {
    problem: &'a P,
    bounds: Vec<(f64, f64)>,
    budget: usize,
    count: usize,
    mu: f64,
    best: Option<(Vec<f64>, Evaluation)>,
}

impl<P: Problem + ?Sized> Search<'_, P> {
    fn to_x(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (lo + v * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    fn raw(&mut self, x: &[f64]) -> Option<Evaluation> {
        if self.count >= self.budget {
            return None;
        }
        self.count += 1;
        let e = self.problem.evaluate(x);
        let better = match &self.best {
            None => true,
            Some((_, b)) => compare(&e, b) == Ordering::Less,
        };
        if better {
            self.best = Some((x.to_vec(), e.clone()));
        }
        Some(e)
    }

    fn merit(&self, e: &Evaluation) -> f64 {
        if e.failure.is_some() || !e.objective.is_finite() {
            f64::INFINITY
        } else {
            e.objective + self.mu * e.violation() * e.violation()
        }
    }

    fn vertex(&mut self, u: Vec<f64>) -> Option<Vertex> {
        let u: Vec<f64> = u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let x = self.to_x(&u);
        let e = self.raw(&x)?;
        let merit = self.merit(&e);
        Some(Vertex { u, merit })
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&p, &q)| p + t * (q - p)).collect()
}

/// One Nelder-Mead descent from `x0`.
pub fn run_local<P: Problem + ?Sized>(problem: &P, config: &LocalConfig, x0: &[f64]) -> OptResult {
    let start = Instant::now();
    let bounds = problem.bounds().to_vec();
    let dim = bounds.len();
    let x0: Vec<f64> = x0
        .iter()
        .zip(&bounds)
        .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
        .collect();
    let u0: Vec<f64> = x0
        .iter()
        .zip(&bounds)
        .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect();
    let mut s = Search {
        problem,
        bounds,
        budget: config.max_evaluations.max(1),
        count: 0,
        mu: 0.0,
        best: None,
    };

    let mut evals = Vec::with_capacity(dim + 1);
    let mut points = vec![(u0.clone(), x0.clone())];
    for i in 0..dim {
        let mut u = u0.clone();
        u[i] += if u[i] + config.initial_step <= 1.0 {
            config.initial_step
        } else {
            -config.initial_step
        };
        let x = s.to_x(&u);
        points.push((u, x));
    }
    let mut simplex = Vec::with_capacity(dim + 1);
    for (u, x) in points {
        match s.raw(&x) {
            Some(e) => evals.push((u, x, e)),
            None => break,
        }
    }
    let magnitude = evals
        .iter()
        .filter(|(_, _, e)| e.failure.is_none() && e.objective.is_finite())
        .map(|(_, _, e)| e.objective.abs())
        .fold(0.0, f64::max);
    s.mu = config.penalty * if magnitude > 0.0 { magnitude } else { 1.0 };
    for (u, _, e) in evals {
        let merit = s.merit(&e);
        simplex.push(Vertex { u, merit });
    }

    let mut trace = Vec::new();
    let mut iteration = 0;
    let push_row = |trace: &mut Vec<TraceRow>, s: &Search<P>, iteration: usize, merit: f64| {
        let (_, b) = s.best.as_ref().expect("at least one evaluation");
        trace.push(TraceRow {
            iteration,
            start: 0,
            evaluations: s.count,
            best_objective: b.objective,
            best_violation: b.violation(),
            best_feasible: b.is_feasible(),
            spread: merit,
        });
    };
    let mut truncated = simplex.len() < dim + 1;

    if !truncated {
        simplex.sort_by(|a, b| a.merit.total_cmp(&b.merit));
        push_row(&mut trace, &s, iteration, simplex[0].merit);
        'outer: loop {
            let diameter = simplex[1..]
                .iter()
                .map(|v| {
                    v.u.iter()
                        .zip(&simplex[0].u)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max);
            if diameter < config.tolerance {
                break;
            }
            let n = simplex.len() - 1;
            let mut centroid = vec![0.0; dim];
            for v in &simplex[..n] {
                for (c, u) in centroid.iter_mut().zip(&v.u) {
                    *c += u / n as f64;
                }
            }
            let worst = &simplex[n];
            let Some(reflected) = s.vertex(affine(&centroid, &worst.u, -1.0)) else {
                truncated = true;
                break;
            };
            let replacement = if reflected.merit < simplex[0].merit {
                let Some(expanded) = s.vertex(affine(&centroid, &worst.u, -2.0)) else {
                    truncated = true;
                    break;
                };
                Some(if expanded.merit < reflected.merit {
                    expanded
                } else {
                    reflected
                })
            } else if reflected.merit < simplex[n - 1].merit {
                Some(reflected)
            } else {
                let outside = reflected.merit < worst.merit;
                let target = if outside { &reflected.u } else { &worst.u };
                let Some(contracted) = s.vertex(affine(&centroid, target, 0.5)) else {
                    truncated = true;
                    break;
                };
                let limit = if outside { reflected.merit } else { worst.merit };
                if contracted.merit <= limit && contracted.merit < worst.merit {
                    Some(contracted)
                } else {
                    None
                }
            };
            match replacement {
                Some(v) => simplex[n] = v,
                None => {
                    for i in 1..=n {
                        let u = affine(&simplex[0].u, &simplex[i].u, 0.5);
                        let Some(v) = s.vertex(u) else {
                            truncated = true;
                            break 'outer;
                        };
                        simplex[i] = v;
                    }
                }
            }
            simplex.sort_by(|a, b| a.merit.total_cmp(&b.merit));
            iteration += 1;
            push_row(&mut trace, &s, iteration, simplex[0].merit);
        }
    }
    if truncated && trace.is_empty() {
        push_row(&mut trace, &s, 0, f64::NAN);
    }

    let (x, evaluation) = s.best.clone().expect("at least one evaluation");
    OptResult {
        solver: "local".into(),
        names: problem.names(),
        x,
        feasible: evaluation.is_feasible(),
        evaluation,
        trace,
        evaluations: s.count,
        truncated: truncated && s.count >= s.budget,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Runs `config.starts` descents: the first from `x0`, the rest from seeded
/// uniform draws. Starts run in parallel; the best result wins by the
/// feasibility rules with ties to the earlier start.
pub fn run_local_multistart<P: Problem + ?Sized>(
    problem: &P,
    config: &LocalConfig,
    x0: &[f64],
    seed: u64,
) -> OptResult {
    let start = Instant::now();
    let bounds = problem.bounds();
    let starts: Vec<Vec<f64>> = (0..config.starts.max(1))
        .map(|i| {
            if i == 0 {
                x0.to_vec()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX - i as u64);
                bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                    .collect()
            }
        })
        .collect();
    let runs: Vec<OptResult> = starts
        .par_iter()
        .map(|x| run_local(problem, config, x))
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        if compare(&runs[i].evaluation, &runs[best].evaluation) == Ordering::Less {
            best = i;
        }
    }
    let mut trace = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        trace.extend(r.trace.iter().cloned().map(|mut row| {
            row.start = i;
            row
        }));
    }
    let r = &runs[best];
    OptResult {
        solver: "local".into(),
        names: r.names.clone(),
        x: r.x.clone(),
        evaluation: r.evaluation.clone(),
        feasible: r.feasible,
        trace,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        truncated: runs.iter().any(|r| r.truncated),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}
