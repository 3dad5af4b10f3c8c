//! Infill criteria: expected improvement, feasibility weighting, ParEGO
//! scalarization, Monte-Carlo EHVI, greedy batch selection and the inner
//! maximizer over `[0, 1]^d`.

mod batch;
mod maximize;

pub use batch::{qehvi_select, qparego_select, BatchSelection};
pub use maximize::{maximize_acquisition, maximize_from, maximize_from_with_gradient, PatternSearch};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GaussianProcessModel, Prediction, PredictionGradient, SurrogateSet};
use crate::pareto::{Objectives, ParetoArchive, Staircase};
use crate::stats::{normal_cdf, normal_pdf, sigmoid};

/// `max(best - mean, 0)`.
pub fn improvement(best: f64, prediction_mean: f64) -> f64 {
    (best - prediction_mean).max(0.0)
}

/// Closed-form expected improvement below `best` for a Gaussian with the
/// given moments.
pub fn ei_from_moments(mean: f64, variance: f64, best: f64) -> f64 {
    let s = variance.max(0.0).sqrt();
    if s == 0.0 {
        return improvement(best, mean);
    }
    let z = (best - mean) / s;
    (s * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

pub fn expected_improvement(model: &GaussianProcessModel, best: f64, x: &[f64]) -> Result<f64> {
    let p = model.predict(x)?;
    Ok(ei_from_moments(p.mean, p.variance, best))
}

/// `P(g <= 0)` for a Gaussian with the given moments.
pub fn feasibility_from_moments(mean: f64, variance: f64) -> f64 {
    let s = variance.max(0.0).sqrt();
    if s == 0.0 {
        return if mean <= 0.0 { 1.0 } else { 0.0 };
    }
    normal_cdf(-mean / s)
}

pub fn feasibility_probability(g_model: &GaussianProcessModel, x: &[f64]) -> Result<f64> {
    let p = g_model.predict(x)?;
    Ok(feasibility_from_moments(p.mean, p.variance))
}

/// Expected feasible improvement: EI times the probability of feasibility,
/// under independent posteriors.
pub fn constrained_ei(
    objective: &GaussianProcessModel,
    constraint: &GaussianProcessModel,
    best: f64,
    x: &[f64],
) -> Result<f64> {
    Ok(expected_improvement(objective, best, x)? * feasibility_probability(constraint, x)?)
}

/// Weight `w` and augmentation `alpha` of the augmented Chebyshev scalarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationWeights {
    pub w: f64,
    pub alpha: f64,
}

impl ScalarizationWeights {
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(w: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::input(format!("weight {w} outside [0, 1]")));
        }
        if !(alpha > 0.0) {
            return Err(Error::input("alpha must be > 0"));
        }
        Ok(ScalarizationWeights { w, alpha })
    }

    /// `w ~ Uniform(0, 1)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Self {
        ScalarizationWeights {
            w: rng.gen::<f64>(),
            alpha,
        }
    }
}

/// `alpha (w f1 + (1 - w) f2) + max(w f1, (1 - w) f2)` on objectives
/// already normalized to `[0, 1]`.
pub fn parego_scalarize(f1: f64, f2: f64, weights: &ScalarizationWeights) -> f64 {
    let a = weights.w * f1;
    let b = (1.0 - weights.w) * f2;
    weights.alpha * (a + b) + a.max(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSettings {
    /// Monte-Carlo samples per criterion evaluation during maximization.
    pub mc_samples: usize,
    /// Monte-Carlo samples used to score each selected point.
    pub final_mc_samples: usize,
    /// Multi-start count of the inner maximizer.
    pub restarts: usize,
    /// When positive, this many Latin-hypercube candidates plus the archive
    /// designs are scored first and the best `restarts` of them refined;
    /// when 0, `restarts` Latin-hypercube points are refined directly.
    pub raw_samples: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Criterion evaluations allowed per restart.
    pub max_evaluations_per_restart: usize,
    /// How the kept starts are refined.
    pub optimizer: InnerOptimizer,
    /// Iteration cap of the gradient refinement.
    pub lbfgs_iterations: usize,
    /// Sigmoid temperature as a fraction of the observed constraint range.
    pub sigmoid_temperature: f64,
    /// ParEGO augmentation coefficient.
    pub alpha: f64,
    /// Multiplier on posterior variances seen by the criteria and the
    /// fantasies; 1 is the plain posterior, values near 0 approach the
    /// deterministic limit.
    pub variance_scale: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        AcquisitionSettings {
            mc_samples: 1 << 12,
            final_mc_samples: 1 << 16,
            restarts: 32,
            raw_samples: 0,
            initial_step: 0.1,
            min_step: 1e-4,
            max_evaluations_per_restart: 2_000,
            optimizer: InnerOptimizer::Pattern,
            lbfgs_iterations: 100,
            sigmoid_temperature: 1e-3,
            alpha: ScalarizationWeights::DEFAULT_ALPHA,
            variance_scale: 1.0,
        }
    }
}

/// Refinement of the inner maximizer's starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerOptimizer {
    /// Derivative-free coordinate pattern search.
    #[default]
    Pattern,
    /// Box-bounded L-BFGS on the analytic gradient of the sample average.
    Lbfgs,
}

impl AcquisitionSettings {
    pub fn pattern_search(&self) -> PatternSearch {
        PatternSearch {
            initial_step: self.initial_step,
            min_step: self.min_step,
            max_evaluations: self.max_evaluations_per_restart,
        }
    }
}

/// Common random numbers for Monte-Carlo criteria: one standard normal
/// triple `(z_f1, z_f2, z_g)` per sample.
#[derive(Clone, Debug)]
pub struct BaseSamples {
    z: Vec<[f64; 3]>,
}

impl BaseSamples {
    pub fn new<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Self {
        let count = count.max(1);
        BaseSamples {
            z: (0..count)
                .map(|_| {
                    [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ]
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// A true or fantasized observation as seen by the criteria.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub objectives: Objectives,
    pub constraint: f64,
}

/// Everything a batch criterion needs: surrogates, the observations used
/// for normalization and incumbents, the archive for EHVI, and the points
/// already picked for the current batch with their fantasized values.
#[derive(Clone, Debug)]
pub struct AcquisitionContext {
    pub models: SurrogateSet,
    pub observations: Vec<Observation>,
    pub fantasies: Vec<Observation>,
    pub selected: Vec<Vec<f64>>,
    pub archive: ParetoArchive,
    pub settings: AcquisitionSettings,
    /// Sigmoid temperature in constraint units; 0 means a hard indicator.
    pub temperature: f64,
    staircase: Staircase,
    ranges: [(f64, f64); 2],
}

impl AcquisitionContext {
    pub fn new(
        models: SurrogateSet,
        observations: Vec<Observation>,
        reference: Objectives,
        settings: AcquisitionSettings,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::input("acquisition needs at least one observation"));
        }
        let mut archive = ParetoArchive::new(reference);
        for o in &observations {
            archive.insert(&[], o.objectives, o.constraint);
        }
        let g_lo = observations.iter().map(|o| o.constraint).fold(f64::INFINITY, f64::min);
        let g_hi = observations.iter().map(|o| o.constraint).fold(f64::NEG_INFINITY, f64::max);
        let g_range = if g_hi > g_lo { g_hi - g_lo } else { g_hi.abs().max(1.0) };
        let temperature = settings.sigmoid_temperature * g_range;
        let mut ranges = [(0.0, 1.0); 2];
        for (k, r) in ranges.iter_mut().enumerate() {
            let lo = observations.iter().map(|o| o.objectives[k]).fold(f64::INFINITY, f64::min);
            let hi = observations.iter().map(|o| o.objectives[k]).fold(f64::NEG_INFINITY, f64::max);
            *r = (lo, if hi > lo { hi - lo } else { 1.0 });
        }
        let staircase = archive.staircase();
        Ok(AcquisitionContext {
            models,
            observations,
            fantasies: Vec::new(),
            selected: Vec::new(),
            archive,
            settings,
            temperature,
            staircase,
            ranges,
        })
    }

    /// Replaces the archive (e.g. one carrying design points) and keeps the
    /// cached staircase in sync.
    pub fn with_archive(mut self, archive: ParetoArchive) -> Self {
        self.staircase = archive.staircase();
        self.archive = archive;
        self
    }

    pub fn dimension(&self) -> usize {
        self.models.dimension()
    }

    /// Starting points of the inner maximizer for a given seed.
    pub fn starts(&self, seed: u64) -> Vec<Vec<f64>> {
        let d = self.dimension();
        let s = &self.settings;
        if s.raw_samples == 0 {
            return if s.restarts <= 1 {
                vec![vec![0.5; d]]
            } else {
                crate::doe::lhs(s.restarts, d, seed)
                    .map(|x| x.points)
                    .unwrap_or_else(|_| vec![vec![0.5; d]])
            };
        }
        let mut starts = if s.raw_samples >= 2 {
            crate::doe::lhs(s.raw_samples, d, seed)
                .map(|x| x.points)
                .unwrap_or_default()
        } else {
            vec![vec![0.5; d]]
        };
        starts.extend(
            self.archive
                .entries()
                .iter()
                .filter(|e| e.point.len() == d)
                .map(|e| e.point.clone()),
        );
        starts
    }

    /// Runs the inner maximizer on `criterion` from [`Self::starts`];
    /// `gradient` returns the criterion with its gradient.
    pub fn maximize<F, G>(&self, criterion: F, gradient: G, seed: u64) -> (Vec<f64>, f64)
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> (f64, Vec<f64>),
    {
        let keep = self.settings.restarts.max(1);
        match self.settings.optimizer {
            InnerOptimizer::Pattern => {
                maximize_from(criterion, self.starts(seed), keep, &self.settings.pattern_search())
            }
            InnerOptimizer::Lbfgs => maximize_from_with_gradient(
                criterion,
                gradient,
                self.starts(seed),
                keep,
                self.settings.lbfgs_iterations,
            ),
        }
    }

    /// Smooth stand-in for the indicator `g <= 0`.
    #[inline]
    pub fn feasibility_weight(&self, g: f64) -> f64 {
        if self.temperature > 0.0 {
            sigmoid(-g / self.temperature)
        } else if g <= 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Sigmoid weight and its derivative in `g`.
    #[inline]
    fn feasibility_weight_and_slope(&self, g: f64) -> (f64, f64) {
        if self.temperature > 0.0 {
            let w = sigmoid(-g / self.temperature);
            (w, -w * (1.0 - w) / self.temperature)
        } else {
            (if g <= 0.0 { 1.0 } else { 0.0 }, 0.0)
        }
    }

    /// Means, scaled standard deviations and their gradients.
    fn moments_with_gradient(&self, x: &[f64]) -> ([f64; 3], [f64; 3], [PredictionGradient; 3], [f64; 3]) {
        let k = self.settings.variance_scale.max(0.0);
        let preds = self.models.predict_with_gradient_unchecked(x);
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        // d std / d var
        let mut chain = [0.0; 3];
        for (i, (p, _)) in preds.iter().enumerate() {
            mean[i] = p.mean;
            std[i] = (p.variance * k).max(0.0).sqrt();
            chain[i] = if std[i] > 0.0 { 0.5 * k / std[i] } else { 0.0 };
        }
        let [(_, a), (_, b), (_, c)] = preds;
        (mean, std, [a, b, c], chain)
    }

    /// Assembles `sum_k (a_k d mean_k + b_k d std_k) / n`.
    fn assemble(grads: &[PredictionGradient; 3], chain: &[f64; 3], a: [f64; 3], b: [f64; 3], n: usize) -> Vec<f64> {
        let d = grads[0].mean.len();
        (0..d)
            .map(|j| {
                (0..3)
                    .map(|k| a[k] * grads[k].mean[j] + b[k] * chain[k] * grads[k].variance[j])
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    fn scaled_std(&self, p: [Prediction; 3]) -> [f64; 3] {
        let k = self.settings.variance_scale.max(0.0);
        p.map(|p| (p.variance * k).max(0.0).sqrt())
    }

    /// One joint posterior draw `(f1, f2, g)` at `x`.
    pub fn sample_fantasy<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<[f64; 3]> {
        let p = self.models.predict(x)?;
        let s = self.scaled_std(p);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            out[k] = p[k].mean + s[k] * z;
        }
        Ok(out)
    }

    /// Min-max normalization over the true observations.
    #[inline]
    pub fn normalize(&self, objectives: &Objectives) -> Objectives {
        [
            (objectives[0] - self.ranges[0].0) / self.ranges[0].1,
            (objectives[1] - self.ranges[1].0) / self.ranges[1].1,
        ]
    }

    /// Best scalarized value over feasible true and fantasized observations.
    pub fn parego_incumbent(&self, weights: &ScalarizationWeights) -> Option<f64> {
        self.observations
            .iter()
            .chain(&self.fantasies)
            .filter(|o| o.constraint <= 0.0)
            .map(|o| {
                let n = self.normalize(&o.objectives);
                parego_scalarize(n[0], n[1], weights)
            })
            .min_by(f64::total_cmp)
    }

    /// Monte-Carlo feasibility-weighted EI of the scalarized objectives.
    /// Without a feasible incumbent the criterion is the probability of
    /// feasibility.
    pub fn parego_ei_mc(
        &self,
        x: &[f64],
        weights: &ScalarizationWeights,
        best: Option<f64>,
        base: &BaseSamples,
    ) -> f64 {
        let [p1, p2, pg] = self.models.predict_unchecked(x);
        let [s1, s2, sg] = self.scaled_std([p1, p2, pg]);
        let total: f64 = base
            .z
            .iter()
            .map(|z| {
                let feas = self.feasibility_weight(pg.mean + sg * z[2]);
                match best {
                    Some(best) => {
                        let n = self.normalize(&[p1.mean + s1 * z[0], p2.mean + s2 * z[1]]);
                        improvement(best, parego_scalarize(n[0], n[1], weights)) * feas
                    }
                    None => feas,
                }
            })
            .sum();
        total / base.len() as f64
    }

    /// Monte-Carlo expected hypervolume improvement over the archive, each
    /// sample weighted by the sigmoid feasibility of its constraint draw.
    pub fn ehvi_mc(&self, x: &[f64], base: &BaseSamples) -> f64 {
        let [p1, p2, pg] = self.models.predict_unchecked(x);
        let [s1, s2, sg] = self.scaled_std([p1, p2, pg]);
        let total: f64 = base
            .z
            .iter()
            .map(|z| {
                let hvi = self
                    .staircase
                    .improvement(&[p1.mean + s1 * z[0], p2.mean + s2 * z[1]]);
                if hvi == 0.0 {
                    0.0
                } else {
                    hvi * self.feasibility_weight(pg.mean + sg * z[2])
                }
            })
            .sum();
        total / base.len() as f64
    }

    /// [`Self::parego_ei_mc`] and its gradient in `x`.
    pub fn parego_ei_mc_with_gradient(
        &self,
        x: &[f64],
        weights: &ScalarizationWeights,
        best: Option<f64>,
        base: &BaseSamples,
    ) -> (f64, Vec<f64>) {
        let (m, s, grads, chain) = self.moments_with_gradient(x);
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        let mut total = 0.0;
        for z in &base.z {
            let (feas, slope) = self.feasibility_weight_and_slope(m[2] + s[2] * z[2]);
            let Some(best) = best else {
                total += feas;
                a[2] += slope;
                b[2] += slope * z[2];
                continue;
            };
            let n = self.normalize(&[m[0] + s[0] * z[0], m[1] + s[1] * z[1]]);
            let imp = improvement(best, parego_scalarize(n[0], n[1], weights));
            if imp <= 0.0 {
                continue;
            }
            total += imp * feas;
            let (u, v) = (weights.w * n[0], (1.0 - weights.w) * n[1]);
            let d_scal = [
                weights.w * (weights.alpha + if u >= v { 1.0 } else { 0.0 }),
                (1.0 - weights.w) * (weights.alpha + if u >= v { 0.0 } else { 1.0 }),
            ];
            for k in 0..2 {
                let dy = -feas * d_scal[k] / self.ranges[k].1;
                a[k] += dy;
                b[k] += dy * z[k];
            }
            a[2] += imp * slope;
            b[2] += imp * slope * z[2];
        }
        let n = base.len();
        (total / n as f64, Self::assemble(&grads, &chain, a, b, n))
    }

    /// [`Self::ehvi_mc`] and its gradient in `x`.
    pub fn ehvi_mc_with_gradient(&self, x: &[f64], base: &BaseSamples) -> (f64, Vec<f64>) {
        let (m, s, grads, chain) = self.moments_with_gradient(x);
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        let mut total = 0.0;
        for z in &base.z {
            let y = [m[0] + s[0] * z[0], m[1] + s[1] * z[1]];
            let hvi = self.staircase.improvement(&y);
            if hvi == 0.0 {
                continue;
            }
            let (feas, slope) = self.feasibility_weight_and_slope(m[2] + s[2] * z[2]);
            total += hvi * feas;
            let dh = self.staircase.improvement_gradient(&y);
            for k in 0..2 {
                a[k] += feas * dh[k];
                b[k] += feas * dh[k] * z[k];
            }
            a[2] += hvi * slope;
            b[2] += hvi * slope * z[2];
        }
        let n = base.len();
        (total / n as f64, Self::assemble(&grads, &chain, a, b, n))
    }

    /// Records a selected batch point with its sampled values and
    /// conditions all three surrogates on them.
    pub fn add_fantasy(&mut self, x: &[f64], values: [f64; 3]) -> Result<()> {
        self.models = self.models.condition_on_virtual(x, values)?;
        let obs = Observation {
            objectives: [values[0], values[1]],
            constraint: values[2],
        };
        if self.archive.insert(x, obs.objectives, obs.constraint) {
            self.staircase = self.archive.staircase();
        }
        self.fantasies.push(obs);
        self.selected.push(x.to_vec());
        Ok(())
    }
}
