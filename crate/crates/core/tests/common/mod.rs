// Reference computations shared by the integration tests and the
// acceptance harness. Each one is deliberately naive and shares no code
// with the library routine it checks.
#![allow(dead_code)]

use std::collections::HashMap;

use mobo::gp::{kernel_eval, KernelSpec};
use mobo::pareto::Objectives;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn big_phi(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Monte-Carlo estimate of `E[max(best - Y, 0)]`, `Y ~ N(mean, variance)`,
/// with its standard error.
pub fn ei_monte_carlo<R: Rng>(mean: f64, variance: f64, best: f64, draws: usize, rng: &mut R) -> (f64, f64) {
    let sd = variance.sqrt();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..draws {
        let z: f64 = rng.sample(StandardNormal);
        let v = (best - (mean + sd * z)).max(0.0);
        sum += v;
        sum2 += v * v;
    }
    mean_and_se(sum, sum2, draws)
}

pub fn mean_and_se(sum: f64, sum2: f64, n: usize) -> (f64, f64) {
    let n = n as f64;
    let m = sum / n;
    let var = (sum2 / n - m * m).max(0.0) * n / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Union area of the boxes `[p, r]` by inclusion-exclusion over all subsets.
///
/// The intersection of the boxes of a subset is fixed by which members
/// attain its largest `f1` and largest `f2`, so subsets are aggregated by
/// that pair with exact integer signs before any area is multiplied in.
pub fn hv_inclusion_exclusion(points: &[Objectives], r: &Objectives) -> f64 {
    // key: (index of max f1, index of max f2); usize::MAX for "empty"
    let mut signs: HashMap<(usize, usize), i64> = HashMap::new();
    signs.insert((usize::MAX, usize::MAX), 1);
    for (i, p) in points.iter().enumerate() {
        let mut next = signs.clone();
        for (&(a, b), &s) in &signs {
            let a2 = if a == usize::MAX || p[0] > points[a][0] { i } else { a };
            let b2 = if b == usize::MAX || p[1] > points[b][1] { i } else { b };
            *next.entry((a2, b2)).or_insert(0) -= s;
        }
        next.retain(|_, s| *s != 0);
        signs = next;
    }
    // sum over non-empty S of (-1)^(|S|+1) vol(S); the stored sign is (-1)^|S|
    let mut area = 0.0;
    for (&(a, b), &s) in &signs {
        if a == usize::MAX {
            continue;
        }
        let w = (r[0] - points[a][0]).max(0.0);
        let h = (r[1] - points[b][1]).max(0.0);
        area -= s as f64 * w * h;
    }
    area
}

/// Hit-or-miss estimate of the dominated area inside `[lo, r]`.
pub fn hv_monte_carlo<R: Rng>(points: &[Objectives], r: &Objectives, samples: usize, rng: &mut R) -> (f64, f64) {
    let lo = [
        points.iter().map(|p| p[0]).fold(r[0], f64::min),
        points.iter().map(|p| p[1]).fold(r[1], f64::min),
    ];
    let box_area = (r[0] - lo[0]) * (r[1] - lo[1]);
    let mut hits = 0usize;
    for _ in 0..samples {
        let z = [rng.gen_range(lo[0]..=r[0]), rng.gen_range(lo[1]..=r[1])];
        if points.iter().any(|p| p[0] <= z[0] && p[1] <= z[1]) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (box_area * p, box_area * (p * (1.0 - p) / samples as f64).sqrt())
}

/// `integral_{-inf}^{t} Phi(s) ds`.
fn psi(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        0.0
    } else {
        t * big_phi(t) + phi(t)
    }
}

/// `integral_a^b Phi((z - mu) / sd) dz`.
fn integral_cdf(a: f64, b: f64, mu: f64, sd: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    sd * (psi((b - mu) / sd) - psi((a - mu) / sd))
}

/// Exact expected hypervolume improvement of an independent Gaussian
/// candidate over `front`: the integral of
/// `P(Y1 <= z1) P(Y2 <= z2)` over the non-dominated part of `(-inf, r]`,
/// split into vertical strips.
pub fn ehvi_exact(front: &[Objectives], r: &Objectives, mu: [f64; 2], sd: [f64; 2]) -> f64 {
    let mut pts: Vec<Objectives> = front.iter().copied().filter(|p| p[0] < r[0] && p[1] < r[1]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(pts.iter().map(|p| p[0]));
    edges.push(r[0]);
    let mut total = 0.0;
    for k in 0..edges.len() - 1 {
        let ceiling = pts[..k].iter().map(|p| p[1]).fold(r[1], f64::min);
        let strip = if edges[k] == f64::NEG_INFINITY {
            sd[0] * psi((edges[k + 1] - mu[0]) / sd[0])
        } else {
            integral_cdf(edges[k], edges[k + 1], mu[0], sd[0])
        };
        total += strip * sd[1] * psi((ceiling - mu[1]) / sd[1]);
    }
    total
}

/// Posterior moments from an explicit inverse of the covariance matrix.
pub struct DenseGp {
    inputs: Vec<Vec<f64>>,
    kernel: KernelSpec,
    weights: DVector<f64>,
    inverse: DMatrix<f64>,
    mean: f64,
    scale: f64,
}

impl DenseGp {
    pub fn new(inputs: &[Vec<f64>], targets: &[f64], kernel: &KernelSpec) -> Self {
        let n = inputs.len();
        let mean = targets.iter().sum::<f64>() / n as f64;
        let scale = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let y = DVector::from_iterator(n, targets.iter().map(|t| (t - mean) / scale));
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel_eval(kernel, &inputs[i], &inputs[j]).unwrap() + if i == j { kernel.noise_variance } else { 0.0 }
        });
        let inverse = k.try_inverse().expect("covariance is invertible");
        let weights = &inverse * y;
        DenseGp {
            inputs: inputs.to_vec(),
            kernel: kernel.clone(),
            weights,
            inverse,
            mean,
            scale,
        }
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| kernel_eval(&self.kernel, xi, x).unwrap()),
        );
        let m = k.dot(&self.weights);
        let v = self.kernel.signal_variance - (k.transpose() * &self.inverse * &k)[0];
        (self.mean + self.scale * m, v.max(0.0) * self.scale * self.scale)
    }
}

/// Plain Cholesky-Banachiewicz factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                l[(i, i)] = (a[(i, i)] - s).sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    l
}

pub fn uniform_points<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Either a random cloud (dominated points and points past the reference
/// included) or a strictly non-dominated curve, `m` points.
pub fn random_front<R: Rng>(m: usize, rng: &mut R) -> Vec<Objectives> {
    if rng.gen_bool(0.5) {
        (0..m)
            .map(|_| [rng.gen_range(0.0..1.1), rng.gen_range(0.0..1.1)])
            .collect()
    } else {
        let mut xs: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        let curvature = rng.gen_range(0.3..3.0);
        xs.iter().map(|&x| [x, (1.0 - x.powf(curvature)).max(0.0)]).collect()
    }
}
