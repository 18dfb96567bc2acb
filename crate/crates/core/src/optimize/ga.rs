//! Real-coded genetic algorithm with feasibility-rule selection.
//!
//! Every child draws from its own ChaCha stream keyed by
//! `(generation, index)`, so results do not depend on how the parallel
//! evaluation is scheduled.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_index, compare, Evaluation, OptResult, Problem, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    /// Defaults to `8 + 4 * dim`.
    pub population: Option<usize>,
    /// Number of generations including the initial one.
    pub generations: usize,
    /// BLX-alpha extension factor.
    pub blend_alpha: f64,
    /// Per-gene mutation probability; defaults to `1 / dim`.
    pub mutation_rate: Option<f64>,
    /// Initial mutation standard deviation as a fraction of the variable
    /// range; it decays quadratically to zero over the generations.
    pub mutation_scale: f64,
    pub elitism: usize,
    pub max_evaluations: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: None,
            generations: 50,
            blend_alpha: 0.5,
            mutation_rate: None,
            mutation_scale: 0.1,
            elitism: 1,
            max_evaluations: None,
        }
    }
}

impl GaConfig {
    pub fn population_for(&self, dim: usize) -> usize {
        self.population.unwrap_or(8 + 4 * dim).max(2)
    }
}

fn stream_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn evaluate_all<P: Problem + ?Sized>(problem: &P, pop: &[Vec<f64>]) -> Vec<Evaluation> {
    pop.par_iter().map(|x| problem.evaluate(x)).collect()
}

fn tournament(rng: &mut ChaCha8Rng, evals: &[Evaluation]) -> usize {
    let i = rng.random_range(0..evals.len());
    let j = rng.random_range(0..evals.len());
    match compare(&evals[j], &evals[i]) {
        Ordering::Less => j,
        Ordering::Equal => i.min(j),
        Ordering::Greater => i,
    }
}

fn trace_row(generation: usize, evaluations: usize, evals: &[Evaluation]) -> TraceRow {
    let best = &evals[best_index(evals).expect("population is not empty")];
    let feasible = evals
        .iter()
        .filter(|e| e.is_feasible())
        .map(|e| e.objective);
    let (lo, hi) = feasible.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    TraceRow {
        iteration: generation,
        start: 0,
        evaluations,
        best_objective: best.objective,
        best_violation: best.violation(),
        best_feasible: best.is_feasible(),
        spread: if hi >= lo { hi - lo } else { 0.0 },
    }
}

/// Minimizes `problem` from a random population seeded with `initial`.
pub fn run_ga<P: Problem + ?Sized>(
    problem: &P,
    config: &GaConfig,
    seed: u64,
    initial: &[Vec<f64>],
) -> OptResult {
    let start = Instant::now();
    let bounds = problem.bounds().to_vec();
    let dim = bounds.len();
    let n_pop = config.population_for(dim);
    let elitism = config.elitism.min(n_pop - 1);
    let p_mut = config.mutation_rate.unwrap_or(1.0 / dim.max(1) as f64);

    let mut pop: Vec<Vec<f64>> = (0..n_pop)
        .map(|idx| match initial.get(idx) {
            Some(x) => x
                .iter()
                .zip(&bounds)
                .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
                .collect(),
            None => {
                let mut rng = stream_rng(seed, 0, idx);
                bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                    .collect()
            }
        })
        .collect();
    let mut evals = evaluate_all(problem, &pop);
    let mut count = pop.len();
    let mut trace = vec![trace_row(0, count, &evals)];
    let mut truncated = false;

    for generation in 1..config.generations {
        if let Some(max) = config.max_evaluations {
            if count + n_pop - elitism > max {
                truncated = true;
                break;
            }
        }
        let mut order: Vec<usize> = (0..n_pop).collect();
        order.sort_by(|&a, &b| compare(&evals[a], &evals[b]).then(a.cmp(&b)));

        let sigma = config.mutation_scale * (1.0 - generation as f64 / config.generations as f64).powi(2);
        let children: Vec<Vec<f64>> = (elitism..n_pop)
            .map(|idx| {
                let mut rng = stream_rng(seed, generation, idx);
                let a = &pop[tournament(&mut rng, &evals)];
                let b = &pop[tournament(&mut rng, &evals)];
                (0..dim)
                    .map(|k| {
                        let (lo, hi) = bounds[k];
                        let d = (a[k] - b[k]).abs();
                        let low = a[k].min(b[k]) - config.blend_alpha * d;
                        let high = a[k].max(b[k]) + config.blend_alpha * d;
                        let mut v = low + rng.random::<f64>() * (high - low);
                        if rng.random::<f64>() < p_mut {
                            let z: f64 = rng.sample(StandardNormal);
                            v += sigma * (hi - lo) * z;
                        }
                        v.clamp(lo, hi)
                    })
                    .collect()
            })
            .collect();
        let child_evals = evaluate_all(problem, &children);
        count += children.len();

        let mut next_pop = Vec::with_capacity(n_pop);
        let mut next_evals = Vec::with_capacity(n_pop);
        for &i in &order[..elitism] {
            next_pop.push(pop[i].clone());
            next_evals.push(evals[i].clone());
        }
        next_pop.extend(children);
        next_evals.extend(child_evals);
        pop = next_pop;
        evals = next_evals;
        trace.push(trace_row(generation, count, &evals));
    }

    let best = best_index(&evals).expect("population is not empty");
    OptResult {
        solver: "ga".into(),
        names: problem.names(),
        x: pop[best].clone(),
        feasible: evals[best].is_feasible(),
        evaluation: evals[best].clone(),
        trace,
        evaluations: count,
        truncated,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}
