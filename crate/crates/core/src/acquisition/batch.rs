use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AcquisitionContext, BaseSamples, ScalarizationWeights};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Offset separating the scoring streams from the maximization streams.
const SCORING_INDEX: u64 = 1 << 32;
const FALLBACK_CANDIDATES: usize = 1024;

/// Points chosen for one iteration, with per-point diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchSelection {
    pub points: Vec<Vec<f64>>,
    /// Criterion value of each point, re-estimated with the larger sample count.
    pub values: Vec<f64>,
    /// ParEGO weight `w` per point (absent for EHVI).
    pub weights: Vec<Option<f64>>,
    /// Whether the point came from the space-filling fallback.
    pub fallback: Vec<bool>,
    /// Fantasized `(f1, f2, g)` the models were conditioned on.
    pub fantasies: Vec<[f64; 3]>,
}

impl BatchSelection {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy qParEGO: per point, draw a fresh weight, maximize the
/// feasibility-weighted EI of the scalarized objectives, then condition
/// every model on a posterior draw at the chosen point.
pub fn qparego_select(context: &AcquisitionContext, q: usize, seed: u64) -> Result<BatchSelection> {
    greedy(context, q, seed, |ctx, j, rng| {
        let weights = ScalarizationWeights::sample(rng, ctx.settings.alpha);
        let best = ctx.parego_incumbent(&weights);
        let base = BaseSamples::new(ctx.settings.mc_samples, rng);
        let (x, value) = ctx.maximize(
            |x: &[f64]| ctx.parego_ei_mc(x, &weights, best, &base),
            |x: &[f64]| ctx.parego_ei_mc_with_gradient(x, &weights, best, &base),
            derive_seed(seed, Stream::Acquisition, j),
        );
        let score = move |ctx: &AcquisitionContext, x: &[f64], base: &BaseSamples| {
            ctx.parego_ei_mc(x, &weights, best, base)
        };
        (x, value, Some(weights.w), Box::new(score) as Scorer)
    })
}

/// Greedy qEHVI: maximize the Monte-Carlo EHVI, add a posterior draw at the
/// chosen point to the models and the archive, repeat.
pub fn qehvi_select(context: &AcquisitionContext, q: usize, seed: u64) -> Result<BatchSelection> {
    greedy(context, q, seed, |ctx, j, rng| {
        let base = BaseSamples::new(ctx.settings.mc_samples, rng);
        let (x, value) = ctx.maximize(
            |x: &[f64]| ctx.ehvi_mc(x, &base),
            |x: &[f64]| ctx.ehvi_mc_with_gradient(x, &base),
            derive_seed(seed, Stream::Acquisition, j),
        );
        let score = |ctx: &AcquisitionContext, x: &[f64], base: &BaseSamples| ctx.ehvi_mc(x, base);
        (x, value, None, Box::new(score) as Scorer)
    })
}

type Scorer = Box<dyn Fn(&AcquisitionContext, &[f64], &BaseSamples) -> f64>;

fn greedy<S>(context: &AcquisitionContext, q: usize, seed: u64, mut step: S) -> Result<BatchSelection>
where
    S: FnMut(&AcquisitionContext, u64, &mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, f64, Option<f64>, Scorer),
{
    if q == 0 {
        return Err(Error::input("batch size must be >= 1"));
    }
    let mut ctx = context.clone();
    let mut out = BatchSelection::default();
    for j in 0..q as u64 {
        let mut rng = stream_rng(seed, Stream::Acquisition, j);
        let (mut x, value, weight, score) = step(&ctx, j, &mut rng);
        let repeated = is_known(&ctx, &x);
        let fallback = !(value > 0.0) || repeated;
        if fallback {
            log::warn!(
                "acquisition step {j}: best criterion {value:e}{}, using space-filling fallback",
                if repeated { " at a known point" } else { "" }
            );
            x = space_filling_point(&ctx, seed, j);
        }
        let mut score_rng = stream_rng(seed, Stream::Acquisition, SCORING_INDEX + j);
        let scoring = BaseSamples::new(ctx.settings.final_mc_samples, &mut score_rng);
        let final_value = score(&ctx, &x, &scoring);

        let mut fantasy_rng = stream_rng(seed, Stream::Fantasy, j);
        let values = ctx.sample_fantasy(&x, &mut fantasy_rng)?;
        ctx.add_fantasy(&x, values)?;

        out.points.push(x);
        out.values.push(final_value);
        out.weights.push(weight);
        out.fallback.push(fallback);
        out.fantasies.push(values);
    }
    Ok(out)
}

fn is_known(ctx: &AcquisitionContext, x: &[f64]) -> bool {
    ctx.models
        .f1
        .training_inputs()
        .iter()
        .any(|p| squared_distance(p, x) < 1e-18)
}

/// The uniform candidate farthest from every training and selected point.
fn space_filling_point(ctx: &AcquisitionContext, seed: u64, index: u64) -> Vec<f64> {
    let d = ctx.dimension();
    let existing = ctx.models.f1.training_inputs();
    let mut rng = stream_rng(seed, Stream::Fallback, index);
    let mut best = Vec::new();
    let mut best_gap = f64::NEG_INFINITY;
    for _ in 0..FALLBACK_CANDIDATES {
        let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let gap = existing
            .iter()
            .map(|p| squared_distance(p, &c))
            .fold(f64::INFINITY, f64::min);
        if gap > best_gap {
            best_gap = gap;
            best = c;
        }
    }
    best
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}
