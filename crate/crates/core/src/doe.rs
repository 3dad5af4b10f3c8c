//! Latin hypercube designs in `[0, 1]^d`, optimized for the maximin criterion.
//!
//! Points sit at stratum centers `(i + 0.5) / n`. Optimization only swaps
//! two entries of one column, so every column stays a permutation of the
//! strata and the Latin property cannot break.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Proposal budget per input dimension for the maximin hill climber.
pub const DEFAULT_PROPOSALS_PER_DIM: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// `n` rows of `d` coordinates.
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    /// Smallest pairwise Euclidean distance among `points`.
    pub maximin_distance: f64,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::input(format!("a design needs n >= 2 points, got {n}")));
    }
    if d < 1 {
        return Err(Error::input("a design needs d >= 1"));
    }
    Ok(())
}

fn initial_strata(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    // columns[c][i] = stratum of row i along axis c
    (0..d)
        .map(|_| {
            let mut col: Vec<usize> = (0..n).collect();
            col.shuffle(rng);
            col
        })
        .collect()
}

fn to_points(columns: &[Vec<usize>], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            columns
                .iter()
                .map(|c| (c[i] as f64 + 0.5) / n as f64)
                .collect()
        })
        .collect()
}

/// An unoptimized Latin hypercube; the starting point of [`lhs_maximin`]
/// for the same seed.
pub fn lhs(n: usize, d: usize, seed: u64) -> Result<Design> {
    check_size(n, d)?;
    let mut rng = stream_rng(seed, Stream::Doe, 0);
    let columns = initial_strata(n, d, &mut rng);
    let points = to_points(&columns, n);
    let maximin_distance = maximin_score(&points)?;
    Ok(Design {
        points,
        seed,
        maximin_distance,
    })
}

/// Maximin-optimized Latin hypercube with the default proposal budget.
pub fn lhs_maximin(n: usize, d: usize, seed: u64) -> Result<Design> {
    lhs_maximin_with(n, d, seed, DEFAULT_PROPOSALS_PER_DIM * d)
}

/// Maximin Latin hypercube by column-swap hill climbing: a proposal swaps
/// two rows within one column and is kept iff the minimum pairwise
/// distance does not decrease.
pub fn lhs_maximin_with(n: usize, d: usize, seed: u64, proposals: usize) -> Result<Design> {
    check_size(n, d)?;
    let mut rng = stream_rng(seed, Stream::Doe, 0);
    let mut columns = initial_strata(n, d, &mut rng);
    let coord = |columns: &[Vec<usize>], c: usize, i: usize| (columns[c][i] as f64 + 0.5) / n as f64;

    // Squared distances, full symmetric matrix.
    let mut dist = vec![0.0f64; n * n];
    let pair = |columns: &[Vec<usize>], i: usize, j: usize| -> f64 {
        (0..d)
            .map(|c| {
                let t = coord(columns, c, i) - coord(columns, c, j);
                t * t
            })
            .sum()
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pair(&columns, i, j);
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let row_min = |dist: &[f64], i: usize| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j != i && dist[i * n + j] < best.0 {
                best = (dist[i * n + j], j);
            }
        }
        best
    };
    let mut mins: Vec<(f64, usize)> = (0..n).map(|i| row_min(&dist, i)).collect();
    let global = |mins: &[(f64, usize)]| mins.iter().fold(f64::INFINITY, |m, v| m.min(v.0));
    let mut score = global(&mins);

    let refresh = |columns: &[Vec<usize>], dist: &mut [f64], a: usize, b: usize| {
        for k in 0..n {
            for &r in &[a, b] {
                if k != r {
                    let v = pair(columns, r, k);
                    dist[r * n + k] = v;
                    dist[k * n + r] = v;
                }
            }
        }
    };

    for _ in 0..proposals {
        let c = rng.gen_range(0..d);
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let saved = mins.clone();
        columns[c].swap(a, b);
        refresh(&columns, &mut dist, a, b);
        mins[a] = row_min(&dist, a);
        mins[b] = row_min(&dist, b);
        for k in 0..n {
            if k == a || k == b {
                continue;
            }
            let (da, db) = (dist[k * n + a], dist[k * n + b]);
            let (cur, arg) = mins[k];
            if arg == a || arg == b {
                mins[k] = row_min(&dist, k);
            } else if da < cur || db < cur {
                mins[k] = if da <= db { (da, a) } else { (db, b) };
            }
        }
        let candidate = global(&mins);
        if candidate >= score {
            score = candidate;
        } else {
            columns[c].swap(a, b);
            refresh(&columns, &mut dist, a, b);
            mins = saved;
        }
    }

    let points = to_points(&columns, n);
    let maximin_distance = maximin_score(&points)?;
    Ok(Design {
        points,
        seed,
        maximin_distance,
    })
}

/// Minimum pairwise Euclidean distance.
pub fn maximin_score(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::input("maximin score needs at least 2 points"));
    }
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    Ok(best.sqrt())
}

/// True iff every axis has exactly one point per stratum `[i/n, (i+1)/n)`.
pub fn is_latin(points: &[Vec<f64>]) -> bool {
    let n = points.len();
    let Some(d) = points.first().map(Vec::len) else {
        return true;
    };
    (0..d).all(|c| {
        let mut seen = vec![false; n];
        points.iter().all(|p| {
            let v = p[c];
            if !(0.0..1.0).contains(&v) {
                return false;
            }
            let s = ((v * n as f64).floor() as usize).min(n - 1);
            !std::mem::replace(&mut seen[s], true)
        })
    })
}
