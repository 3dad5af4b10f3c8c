//! NSGA-II on fixed surrogates and a-posteriori verification of its front.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gp::SurrogateSet;
use crate::pareto::{dominates, hypervolume_2d, Objectives};
use crate::problems::{Evaluation, Simulator, Source};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Nsga2Settings {
    pub population: usize,
    pub generations: usize,
    pub crossover_probability: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    /// Per-variable mutation probability; `None` means `1/d`.
    pub mutation_probability: Option<f64>,
}

impl Default for Nsga2Settings {
    fn default() -> Self {
        Nsga2Settings {
            population: 100,
            generations: 200,
            crossover_probability: 0.9,
            crossover_eta: 15.0,
            mutation_eta: 20.0,
            mutation_probability: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub point: Vec<f64>,
    pub objectives: Objectives,
    pub constraint: f64,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn violation(&self) -> f64 {
        self.constraint.max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: usize,
}

impl Population {
    /// Rank-0 individuals.
    pub fn first_front(&self) -> Vec<&Individual> {
        self.individuals.iter().filter(|i| i.rank == 0).collect()
    }

    /// Hypervolume of the feasible rank-0 objectives.
    pub fn front_hypervolume(&self, reference: &Objectives) -> f64 {
        let objs: Vec<Objectives> = self
            .first_front()
            .iter()
            .filter(|i| i.constraint <= 0.0)
            .map(|i| i.objectives)
            .collect();
        hypervolume_2d(&objs, reference)
    }
}

/// Deb's constrained dominance: feasible beats infeasible, two infeasible
/// compare by violation, two feasible by Pareto dominance.
pub fn constrained_dominates(a: (&Objectives, f64), b: (&Objectives, f64)) -> bool {
    let (va, vb) = (a.1.max(0.0), b.1.max(0.0));
    match (va == 0.0, vb == 0.0) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => va < vb,
        (true, true) => dominates(a.0, b.0),
    }
}

/// Assigns ranks (fast non-dominated sort) and crowding distances in place.
pub fn rank_and_crowd(individuals: &mut [Individual]) {
    let n = individuals.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&individuals[i], &individuals[j]);
            if constrained_dominates((&a.objectives, a.constraint), (&b.objectives, b.constraint)) {
                dominated_by[i].push(j);
                count[j] += 1;
            } else if constrained_dominates(
                (&b.objectives, b.constraint),
                (&a.objectives, a.constraint),
            ) {
                dominated_by[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            individuals[i].rank = rank;
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        crowd(individuals, &current);
        next.sort_unstable();
        current = next;
        rank += 1;
    }
}

fn crowd(individuals: &mut [Individual], front: &[usize]) {
    for &i in front {
        individuals[i].crowding = 0.0;
    }
    // Distances are computed over distinct objective vectors; repeats of an
    // earlier member keep 0.
    let mut unique: Vec<usize> = Vec::with_capacity(front.len());
    for &i in front {
        if !unique
            .iter()
            .any(|&u| individuals[u].objectives == individuals[i].objectives)
        {
            unique.push(i);
        }
    }
    if unique.len() <= 2 {
        for &i in &unique {
            individuals[i].crowding = f64::INFINITY;
        }
        return;
    }
    for k in 0..2 {
        let mut order = unique.clone();
        order.sort_by(|&a, &b| {
            individuals[a].objectives[k]
                .total_cmp(&individuals[b].objectives[k])
                .then(a.cmp(&b))
        });
        let lo = individuals[order[0]].objectives[k];
        let hi = individuals[order[order.len() - 1]].objectives[k];
        individuals[order[0]].crowding = f64::INFINITY;
        individuals[order[order.len() - 1]].crowding = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = individuals[order[w + 1]].objectives[k] - individuals[order[w - 1]].objectives[k];
            individuals[order[w]].crowding += gap / (hi - lo);
        }
    }
}

/// `(rank asc, crowding desc)`.
fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// An NSGA-II run that can be advanced one generation at a time.
pub struct Nsga2<F> {
    evaluator: F,
    settings: Nsga2Settings,
    dimension: usize,
    rng: ChaCha8Rng,
    population: Population,
}

impl<F> Nsga2<F>
where
    F: Fn(&[f64]) -> (Objectives, f64),
{
    /// Draws and ranks a uniform random initial population.
    pub fn new(evaluator: F, dimension: usize, settings: Nsga2Settings, seed: u64) -> Self {
        assert!(dimension >= 1, "dimension must be >= 1");
        let mut rng = stream_rng(seed, Stream::Moea, 0);
        let size = settings.population.max(2);
        let mut individuals: Vec<Individual> = (0..size)
            .map(|_| {
                let point: Vec<f64> = (0..dimension).map(|_| rng.gen::<f64>()).collect();
                make(&evaluator, point)
            })
            .collect();
        rank_and_crowd(&mut individuals);
        Nsga2 {
            evaluator,
            settings,
            dimension,
            rng,
            population: Population {
                individuals,
                generation: 0,
            },
        }
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn into_population(self) -> Population {
        self.population
    }

    /// One generation: tournament, SBX, polynomial mutation, elitist
    /// environmental selection over parents and offspring.
    pub fn step(&mut self) {
        let size = self.population.individuals.len();
        let mut offspring = Vec::with_capacity(size);
        while offspring.len() < size {
            let a = self.tournament();
            let b = self.tournament();
            let (mut c1, mut c2) = self.crossover(a, b);
            self.mutate(&mut c1);
            self.mutate(&mut c2);
            offspring.push(make(&self.evaluator, c1));
            if offspring.len() < size {
                offspring.push(make(&self.evaluator, c2));
            }
        }
        let mut merged = std::mem::take(&mut self.population.individuals);
        merged.extend(offspring);
        rank_and_crowd(&mut merged);
        let mut order: Vec<usize> = (0..merged.len()).collect();
        order.sort_by(|&i, &j| crowded_cmp(&merged[i], &merged[j]).then(i.cmp(&j)));
        order.truncate(size);
        let mut survivors: Vec<Individual> = order.into_iter().map(|i| merged[i].clone()).collect();
        rank_and_crowd(&mut survivors);
        self.population.individuals = survivors;
        self.population.generation += 1;
    }

    pub fn run(mut self) -> Population {
        for _ in 0..self.settings.generations {
            self.step();
        }
        self.population
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.individuals.len();
        let i = self.rng.gen_range(0..n);
        let j = self.rng.gen_range(0..n);
        let (a, b) = (&self.population.individuals[i], &self.population.individuals[j]);
        if crowded_cmp(b, a) == Ordering::Less {
            j
        } else {
            i
        }
    }

    fn crossover(&mut self, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
        let mut c1 = self.population.individuals[a].point.clone();
        let mut c2 = self.population.individuals[b].point.clone();
        if self.rng.gen::<f64>() >= self.settings.crossover_probability {
            return (c1, c2);
        }
        let eta = self.settings.crossover_eta;
        for k in 0..self.dimension {
            if self.rng.gen::<f64>() > 0.5 || (c1[k] - c2[k]).abs() < 1e-14 {
                continue;
            }
            let (y1, y2) = if c1[k] < c2[k] { (c1[k], c2[k]) } else { (c2[k], c1[k]) };
            let u: f64 = self.rng.gen();
            let child = |beta: f64, sign: f64| {
                let alpha = 2.0 - beta.powf(-(eta + 1.0));
                let betaq = if u <= 1.0 / alpha {
                    (u * alpha).powf(1.0 / (eta + 1.0))
                } else {
                    (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
                };
                (0.5 * ((y1 + y2) + sign * betaq * (y2 - y1))).clamp(0.0, 1.0)
            };
            let lo = child(1.0 + 2.0 * y1 / (y2 - y1), -1.0);
            let hi = child(1.0 + 2.0 * (1.0 - y2) / (y2 - y1), 1.0);
            if self.rng.gen::<bool>() {
                c1[k] = hi;
                c2[k] = lo;
            } else {
                c1[k] = lo;
                c2[k] = hi;
            }
        }
        (c1, c2)
    }

    fn mutate(&mut self, x: &mut [f64]) {
        let p = self
            .settings
            .mutation_probability
            .unwrap_or(1.0 / self.dimension as f64);
        let eta = self.settings.mutation_eta;
        for v in x.iter_mut() {
            if self.rng.gen::<f64>() >= p {
                continue;
            }
            let y = *v;
            let (d1, d2) = (y, 1.0 - y);
            let u: f64 = self.rng.gen();
            let power = 1.0 / (eta + 1.0);
            let dq = if u < 0.5 {
                let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
                val.powf(power) - 1.0
            } else {
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
                1.0 - val.powf(power)
            };
            *v = (y + dq).clamp(0.0, 1.0);
        }
    }
}

fn make<F: Fn(&[f64]) -> (Objectives, f64)>(evaluator: &F, point: Vec<f64>) -> Individual {
    let (objectives, constraint) = evaluator(&point);
    Individual {
        point,
        objectives,
        constraint,
        rank: 0,
        crowding: 0.0,
    }
}

/// NSGA-II over an arbitrary evaluator.
pub fn nsga2_run_with<F>(evaluator: F, dimension: usize, settings: &Nsga2Settings, seed: u64) -> Population
where
    F: Fn(&[f64]) -> (Objectives, f64),
{
    Nsga2::new(evaluator, dimension, settings.clone(), seed).run()
}

/// NSGA-II on the posterior means of frozen surrogates.
pub fn nsga2_run(surrogates: &SurrogateSet, settings: &Nsga2Settings, seed: u64) -> Population {
    nsga2_run_with(
        |x: &[f64]| {
            let [p1, p2, pg] = surrogates.predict_means_unchecked(x);
            ([p1, p2], pg)
        },
        surrogates.dimension(),
        settings,
        seed,
    )
}

/// Distinct-point rank-0 members, preferring the predicted-feasible ones.
pub fn final_front(population: &Population) -> Vec<Individual> {
    let front = population.first_front();
    let feasible: Vec<&Individual> = front.iter().copied().filter(|i| i.constraint <= 0.0).collect();
    let pool = if feasible.is_empty() { front } else { feasible };
    let mut out: Vec<Individual> = Vec::new();
    for i in pool {
        if !out.iter().any(|o| o.point == i.point) {
            out.push(i.clone());
        }
    }
    out.sort_by(|a, b| a.objectives[0].total_cmp(&b.objectives[0]));
    out
}

/// Farthest-point sampling of `k` members in min-max normalized objective
/// space, starting from the smallest `f1`. Returns indices into `front`.
pub fn select_for_verification(front: &[Individual], k: usize) -> Vec<usize> {
    if front.len() <= k {
        return (0..front.len()).collect();
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for i in front {
        for m in 0..2 {
            lo[m] = lo[m].min(i.objectives[m]);
            hi[m] = hi[m].max(i.objectives[m]);
        }
    }
    let norm = |o: &Objectives| {
        let mut z = [0.0; 2];
        for m in 0..2 {
            let r = hi[m] - lo[m];
            z[m] = if r > 0.0 { (o[m] - lo[m]) / r } else { 0.0 };
        }
        z
    };
    let pts: Vec<[f64; 2]> = front.iter().map(|i| norm(&i.objectives)).collect();
    let first = (0..front.len())
        .min_by(|&a, &b| front[a].objectives[0].total_cmp(&front[b].objectives[0]))
        .unwrap_or(0);
    let mut chosen = vec![first];
    let dist = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut gap: Vec<f64> = pts.iter().map(|p| dist(p, &pts[first])).collect();
    while chosen.len() < k {
        let next = (0..pts.len())
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| gap[a].total_cmp(&gap[b]).then(b.cmp(&a)))
            .expect("front larger than k");
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            gap[i] = gap[i].min(dist(p, &pts[next]));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// A front design re-evaluated on the true black box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub point: Vec<f64>,
    pub predicted: Objectives,
    pub predicted_g: f64,
    pub simulated: Evaluation,
    /// `|predicted - simulated|` per objective.
    pub discrepancy: [f64; 2],
}

/// Re-evaluates each front design with the true evaluator and pairs the
/// result with the surrogate prediction.
pub fn verify_front(front: &[Individual], simulator: &Simulator) -> Result<Vec<Verification>> {
    let points: Vec<Vec<f64>> = front.iter().map(|i| i.point.clone()).collect();
    let evals = simulator.evaluate_batch(&points, Source::NsgaVerification)?;
    Ok(front
        .iter()
        .zip(evals)
        .map(|(i, e)| Verification {
            point: i.point.clone(),
            predicted: i.objectives,
            predicted_g: i.constraint,
            discrepancy: [
                (i.objectives[0] - e.f1).abs(),
                (i.objectives[1] - e.f2).abs(),
            ],
            simulated: e,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(f: [f64; 2], g: f64) -> Individual {
        Individual {
            point: vec![0.0],
            objectives: f,
            constraint: g,
            rank: 0,
            crowding: 0.0,
        }
    }

    #[test]
    fn constrained_dominance_cases() {
        assert!(constrained_dominates((&[5.0, 5.0], -1.0), (&[0.0, 0.0], 0.1)));
        assert!(constrained_dominates((&[5.0, 5.0], 0.1), (&[0.0, 0.0], 0.5)));
        assert!(!constrained_dominates((&[0.0, 0.0], 0.5), (&[5.0, 5.0], 0.1)));
        assert!(constrained_dominates((&[0.0, 0.0], 0.0), (&[1.0, 1.0], -2.0)));
        assert!(!constrained_dominates((&[0.0, 1.0], 0.0), (&[1.0, 0.0], 0.0)));
    }

    #[test]
    fn ranks_and_boundaries() {
        let mut v = vec![
            ind([0.0, 3.0], 0.0),
            ind([1.0, 2.0], 0.0),
            ind([2.0, 1.0], 0.0),
            ind([3.0, 0.0], 0.0),
            ind([2.0, 2.0], 0.0),
            ind([1.0, 2.0], 0.0),
        ];
        rank_and_crowd(&mut v);
        let ranks: Vec<usize> = v.iter().map(|i| i.rank).collect();
        assert_eq!(ranks, vec![0, 0, 0, 0, 1, 0]);
        assert!(v[0].crowding.is_infinite() && v[3].crowding.is_infinite());
        assert!(v[1].crowding.is_finite() && v[1].crowding > 0.0);
        assert_eq!(v[5].crowding, 0.0);
    }

    #[test]
    fn farthest_point_picks_extremes() {
        let front: Vec<Individual> = (0..11)
            .map(|i| ind([i as f64, 10.0 - i as f64], 0.0))
            .collect();
        assert_eq!(select_for_verification(&front, 2), vec![0, 10]);
        assert_eq!(select_for_verification(&front, 3), vec![0, 5, 10]);
        assert_eq!(select_for_verification(&front, 20).len(), 11);
    }
}
