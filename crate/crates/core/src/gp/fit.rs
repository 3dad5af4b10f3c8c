//! Type-II maximum likelihood for kernel hyperparameters.
//!
//! The negative log marginal likelihood is minimized over
//! `(log l_1, ..., log l_d, log signal_variance)` with a box-projected
//! L-BFGS using analytic gradients, from several space-filling starts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{factorize, kernel_matrix, solve_cholesky, GaussianProcessModel, KernelFamily, KernelSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Fixed nugget in standardized target units.
    pub noise_variance: f64,
    /// Number of optimizer starts (the first at unit lengthscales or the warm start).
    pub starts: usize,
    /// L-BFGS iteration cap per start.
    pub max_iterations: usize,
    /// Range for space-filling lengthscale starts.
    pub lengthscale_range: (f64, f64),
    /// Range for space-filling signal-variance starts.
    pub signal_range: (f64, f64),
    /// Hard bounds on lengthscales during optimization.
    pub lengthscale_bounds: (f64, f64),
    /// Hard bounds on the signal variance during optimization.
    pub signal_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            noise_variance: 1e-6,
            starts: 8,
            max_iterations: 100,
            lengthscale_range: (0.05, 5.0),
            signal_range: (0.1, 10.0),
            lengthscale_bounds: (1e-2, 1e2),
            signal_bounds: (1e-3, 1e3),
            seed: 0,
        }
    }
}

/// Fits a GP with default [`FitOptions`].
pub fn fit(
    inputs: &[Vec<f64>],
    targets: &[f64],
    family: KernelFamily,
) -> Result<GaussianProcessModel> {
    fit_with(inputs, targets, family, &FitOptions::default(), None)
}

/// Fits a GP, optionally warm-starting the first start from `warm`.
pub fn fit_with(
    inputs: &[Vec<f64>],
    targets: &[f64],
    family: KernelFamily,
    options: &FitOptions,
    warm: Option<&KernelSpec>,
) -> Result<GaussianProcessModel> {
    if inputs.len() < 2 {
        return Err(Error::input(format!(
            "need at least 2 training points, got {}",
            inputs.len()
        )));
    }
    let d = inputs[0].len();
    if d == 0 {
        return Err(Error::input("inputs must have dimension >= 1"));
    }
    // Validate shapes and finiteness once, through the fixed-hyperparameter path.
    let probe = KernelSpec::isotropic(family, d, 1.0, 1.0, options.noise_variance)?;
    super::check_training_set(inputs, targets, d)?;

    let (mean, scale) = super::standardize(targets);
    let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - mean) / scale));
    let objective = Likelihood::new(inputs, &y, family, options.noise_variance);

    let (ll, lu) = (options.lengthscale_bounds.0.ln(), options.lengthscale_bounds.1.ln());
    let (sl, su) = (options.signal_bounds.0.ln(), options.signal_bounds.1.ln());
    let mut lower = vec![ll; d];
    lower.push(sl);
    let mut upper = vec![lu; d];
    upper.push(su);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    match warm {
        Some(w) if w.dimension() == d => {
            let mut t: Vec<f64> = w.lengthscales.iter().map(|l| l.ln()).collect();
            t.push(w.signal_variance.ln());
            starts.push(t);
        }
        _ => starts.push(vec![0.0; d + 1]),
    }
    let extra = options.starts.max(1) - 1;
    if extra > 0 {
        let unit = if extra >= 2 {
            crate::doe::lhs(extra, d + 1, options.seed)?.points
        } else {
            vec![vec![0.5; d + 1]]
        };
        let (a, b) = (options.lengthscale_range.0.ln(), options.lengthscale_range.1.ln());
        let (c, e) = (options.signal_range.0.ln(), options.signal_range.1.ln());
        for u in unit {
            let mut t: Vec<f64> = u[..d].iter().map(|v| a + (b - a) * v).collect();
            t.push(c + (e - c) * u[d]);
            starts.push(t);
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (theta, value) = minimize_bounded(
            |t| objective.value_and_gradient(t),
            &start,
            &lower,
            &upper,
            options.max_iterations,
        );
        if value.is_finite() && best.as_ref().map_or(true, |(_, v)| value < *v) {
            best = Some((theta, value));
        }
    }
    let (theta, _) = best.ok_or_else(|| {
        Error::Numerical("no hyperparameter start produced a finite likelihood".into())
    })?;
    let kernel = KernelSpec::new(
        family,
        theta[..d].iter().map(|v| v.exp()).collect(),
        theta[d].exp(),
        probe.noise_variance,
    )?;
    GaussianProcessModel::with_hyperparameters(inputs, targets, kernel)
}

struct Likelihood<'a> {
    inputs: &'a [Vec<f64>],
    y: &'a DVector<f64>,
    family: KernelFamily,
    noise: f64,
}

impl<'a> Likelihood<'a> {
    fn new(inputs: &'a [Vec<f64>], y: &'a DVector<f64>, family: KernelFamily, noise: f64) -> Self {
        Likelihood {
            inputs,
            y,
            family,
            noise,
        }
    }

    /// Negative log marginal likelihood and its gradient in log-parameters.
    fn value_and_gradient(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let n = self.inputs.len();
        let d = theta.len() - 1;
        let lengthscales: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
        let signal = theta[d].exp();
        let kernel = KernelSpec {
            family: self.family,
            lengthscales,
            signal_variance: signal,
            noise_variance: self.noise,
        };
        let scaled = super::scale_inputs(self.inputs, &kernel.lengthscales);
        let mut k = kernel_matrix(&kernel, &scaled, n);
        for i in 0..n {
            k[(i, i)] += self.noise;
        }
        let (factor, _) = factorize(&k, 0.0).ok()?;
        let alpha = solve_cholesky(&factor, self.y);
        let logdet: f64 = factor.diagonal().iter().map(|v| v.ln()).sum();
        let nll = 0.5 * self.y.dot(&alpha)
            + logdet
            + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if !nll.is_finite() {
            return None;
        }

        // W = alpha alpha^T - K^-1 ; dNLL/dtheta = -1/2 tr(W dK/dtheta)
        let mut w = DMatrix::identity(n, n);
        factor.solve_lower_triangular_mut(&mut w);
        factor.tr_solve_lower_triangular_mut(&mut w);
        w.neg_mut();
        w.ger(1.0, &alpha, &alpha, 1.0);

        let mut grad = vec![0.0; d + 1];
        for j in 0..n {
            let xj = &scaled[j * d..(j + 1) * d];
            // diagonal: only the signal term contributes
            grad[d] += w[(j, j)] * signal;
            for i in (j + 1)..n {
                let xi = &scaled[i * d..(i + 1) * d];
                let r = super::scaled_dist(xi, xj);
                let wij = 2.0 * w[(i, j)];
                grad[d] += wij * signal * self.family.correlation(r);
                let lw = wij * signal * self.family.lengthscale_weight(r);
                if lw != 0.0 {
                    for (g, (a, b)) in grad[..d].iter_mut().zip(xi.iter().zip(xj)) {
                        *g += lw * (a - b) * (a - b);
                    }
                }
            }
        }
        for g in &mut grad {
            *g *= -0.5;
        }
        Some((nll, grad))
    }
}

/// Box-projected L-BFGS with Armijo backtracking. Returns the best point
/// found and its value (`+inf` if the start itself cannot be evaluated).
pub fn minimize_bounded<F>(
    mut f: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iterations: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const MEMORY: usize = 8;
    let project = |x: &mut Vec<f64>| {
        for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut x = start.to_vec();
    project(&mut x);
    let Some((mut fx, mut gx)) = f(&x) else {
        return (x, f64::INFINITY);
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();

    for iter in 0..max_iterations {
        // Projected gradient: zero components pushing against an active bound.
        let pg: Vec<f64> = (0..x.len())
            .map(|i| {
                if (x[i] <= lower[i] && gx[i] > 0.0) || (x[i] >= upper[i] && gx[i] < 0.0) {
                    0.0
                } else {
                    gx[i]
                }
            })
            .collect();
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-6 {
            break;
        }

        // Two-loop recursion.
        let mut q = pg.clone();
        let mut coeffs = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            coeffs.push((rho, a));
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y), (rho, a)) in s_hist.iter().zip(&y_hist).zip(coeffs.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().zip(&pg).map(|(v, p)| if *p == 0.0 { 0.0 } else { -v }).collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
        }

        let norm = dot(&dir, &dir).sqrt();
        let mut step = if iter == 0 && s_hist.is_empty() {
            (1.0 / norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut xn);
            let decrease: f64 = gx.iter().zip(xn.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
            if let Some((fnew, gnew)) = f(&xn) {
                if fnew <= fx + 1e-4 * decrease {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&gx).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let converged = (fx - fnew).abs() <= 1e-10 * fx.abs().max(1.0);
        x = xn;
        fx = fnew;
        gx = gnew;
        if converged {
            break;
        }
    }
    (x, fx)
}
