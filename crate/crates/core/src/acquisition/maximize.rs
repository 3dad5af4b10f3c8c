use serde::{Deserialize, Serialize};

use crate::doe;
use crate::gp::minimize_bounded;

/// Coordinate-wise pattern search settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSearch {
    pub initial_step: f64,
    pub min_step: f64,
    /// Criterion evaluations allowed per restart.
    pub max_evaluations: usize,
}

impl Default for PatternSearch {
    fn default() -> Self {
        PatternSearch {
            initial_step: 0.1,
            min_step: 1e-4,
            max_evaluations: 2_000,
        }
    }
}

/// Multi-start maximization over `[0, 1]^d`: Latin-hypercube starts, each
/// refined by coordinate pattern search with step halving. Returns the best
/// point and its criterion value; ties keep the earliest restart.
pub fn maximize_acquisition<F>(
    criterion: F,
    dimension: usize,
    restarts: usize,
    seed: u64,
    search: &PatternSearch,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(dimension >= 1, "dimension must be >= 1");
    let starts = if restarts <= 1 {
        vec![vec![0.5; dimension]]
    } else {
        doe::lhs(restarts, dimension, seed)
            .map(|d| d.points)
            .unwrap_or_else(|_| vec![vec![0.5; dimension]])
    };
    maximize_from(criterion, starts, restarts.max(1), search)
}

/// Scores every candidate start, refines the best `keep` of them by pattern
/// search and returns the best refined point. Ties keep the earlier start.
pub fn maximize_from<F>(
    criterion: F,
    starts: Vec<Vec<f64>>,
    keep: usize,
    search: &PatternSearch,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!starts.is_empty(), "at least one start");
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (i, v0) in kept_starts(&criterion, &starts, keep) {
        let (x, v) = pattern_search(&criterion, starts[i].clone(), v0, search);
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    best.expect("at least one restart")
}

/// Like [`maximize_from`], but refines the kept starts by box-bounded
/// L-BFGS; `gradient` returns the criterion and its gradient.
pub fn maximize_from_with_gradient<F, G>(
    criterion: F,
    gradient: G,
    starts: Vec<Vec<f64>>,
    keep: usize,
    max_iterations: usize,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(!starts.is_empty(), "at least one start");
    let d = starts[0].len();
    let (lower, upper) = (vec![0.0; d], vec![1.0; d]);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (i, v0) in kept_starts(&criterion, &starts, keep) {
        let (mut x, mut v) = minimize_bounded(
            |x: &[f64]| {
                let (v, g) = gradient(x);
                (v.is_finite() && g.iter().all(|g| g.is_finite())).then(|| (-v, g.into_iter().map(|g| -g).collect()))
            },
            &starts[i],
            &lower,
            &upper,
            max_iterations,
        );
        v = sanitize(-v);
        if !(v >= v0) {
            (x, v) = (starts[i].clone(), v0);
        }
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    best.expect("at least one restart")
}

/// Indices and scores of the `keep` best starts, in start order.
fn kept_starts<F: Fn(&[f64]) -> f64>(criterion: &F, starts: &[Vec<f64>], keep: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = starts
        .iter()
        .enumerate()
        .map(|(i, x)| (i, sanitize(criterion(x))))
        .collect();
    if keep < scored.len() {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(keep.max(1));
        scored.sort_by_key(|s| s.0);
    }
    scored
}

fn pattern_search<F>(criterion: &F, mut x: Vec<f64>, mut value: f64, search: &PatternSearch) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut evaluations = 1usize;
    let mut step = search.initial_step;
    while step >= search.min_step && evaluations < search.max_evaluations {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evaluations >= search.max_evaluations {
                    break;
                }
                let old = x[k];
                let trial = (old + dir * step).clamp(0.0, 1.0);
                if trial == old {
                    continue;
                }
                x[k] = trial;
                let v = sanitize(criterion(&x));
                evaluations += 1;
                if v > value {
                    value = v;
                    improved = true;
                    break;
                }
                x[k] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, value)
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}
