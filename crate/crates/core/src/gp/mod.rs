//! Gaussian-process regression with ARD stationary kernels.
//!
//! A [`GaussianProcessModel`] holds its training set, standardized targets
//! and the lower Cholesky factor of `K + noise * I`. Models are immutable:
//! conditioning on a virtual observation returns a new model whose factor
//! is extended by one row.

mod fit;
mod kernel;

pub use fit::{fit, fit_with, minimize_bounded, FitOptions};
pub use kernel::{kernel_eval, KernelFamily, KernelSpec};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const JITTER_START: f64 = 1e-10;
pub(crate) const JITTER_MAX: f64 = 1e-4;

/// Posterior moments at one point, in original target units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Gradients of the posterior moments with respect to the query point.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionGradient {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// The reproducible part of a fitted model: hyperparameters and the jitter
/// that factorization needed. Rebuilding from the same data gives the same
/// model bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpState {
    pub kernel: KernelSpec,
    pub jitter: f64,
}

#[derive(Clone, Debug)]
pub struct GaussianProcessModel {
    kernel: KernelSpec,
    inputs: Vec<Vec<f64>>,
    // inputs divided by lengthscales, row-major n x d
    scaled: Vec<f64>,
    targets: DVector<f64>,
    target_mean: f64,
    target_scale: f64,
    jitter: Vec<f64>,
    factor: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn standardize(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt();
    if scale > 1e-12 * mean.abs().max(1.0) {
        (mean, scale)
    } else {
        (mean, 1.0)
    }
}

fn scale_inputs(inputs: &[Vec<f64>], lengthscales: &[f64]) -> Vec<f64> {
    inputs
        .iter()
        .flat_map(|x| x.iter().zip(lengthscales).map(|(v, l)| v / l))
        .collect()
}

#[inline]
fn scaled_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Noise-free kernel matrix on pre-scaled inputs.
pub(crate) fn kernel_matrix(kernel: &KernelSpec, scaled: &[f64], n: usize) -> DMatrix<f64> {
    let d = kernel.dimension();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let xj = &scaled[j * d..(j + 1) * d];
        k[(j, j)] = kernel.signal_variance;
        for i in (j + 1)..n {
            let xi = &scaled[i * d..(i + 1) * d];
            let v = kernel.signal_variance * kernel.family.correlation(scaled_dist(xi, xj));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `base + diag(extra)` with bounded jitter escalation.
/// Returns the lower factor and the jitter that was needed (0 if none).
pub(crate) fn factorize(base: &DMatrix<f64>, start_jitter: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = start_jitter;
    loop {
        let mut m = base.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = nalgebra::Cholesky::new(m) {
            return Ok((chol.unpack(), jitter));
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "covariance factorization failed with jitter up to {JITTER_MAX:e}"
            )));
        }
    }
}

impl GaussianProcessModel {
    /// Builds the posterior for fixed hyperparameters (no optimization).
    pub fn with_hyperparameters(
        inputs: &[Vec<f64>],
        targets: &[f64],
        kernel: KernelSpec,
    ) -> Result<Self> {
        Self::from_state(
            inputs,
            targets,
            &GpState {
                kernel,
                jitter: 0.0,
            },
        )
    }

    /// Rebuilds a model from a saved [`GpState`].
    pub fn from_state(inputs: &[Vec<f64>], targets: &[f64], state: &GpState) -> Result<Self> {
        let kernel = state.kernel.clone();
        kernel.validate()?;
        check_training_set(inputs, targets, kernel.dimension())?;
        let n = inputs.len();
        let (target_mean, target_scale) = standardize(targets);
        let y = DVector::from_iterator(
            n,
            targets.iter().map(|t| (t - target_mean) / target_scale),
        );
        let scaled = scale_inputs(inputs, &kernel.lengthscales);
        let mut k = kernel_matrix(&kernel, &scaled, n);
        for i in 0..n {
            k[(i, i)] += kernel.noise_variance;
        }
        let (factor, jitter) = factorize(&k, state.jitter)?;
        let alpha = solve_cholesky(&factor, &y);
        Ok(GaussianProcessModel {
            kernel,
            inputs: inputs.to_vec(),
            scaled,
            targets: y,
            target_mean,
            target_scale,
            jitter: vec![jitter; n],
            factor,
            alpha,
        })
    }

    pub fn state(&self) -> GpState {
        GpState {
            kernel: self.kernel.clone(),
            jitter: self.jitter.first().copied().unwrap_or(0.0),
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dimension(&self) -> usize {
        self.kernel.dimension()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Standardized training targets.
    pub fn training_targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// Training targets in original units.
    pub fn original_targets(&self) -> Vec<f64> {
        self.targets
            .iter()
            .map(|t| t * self.target_scale + self.target_mean)
            .collect()
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    /// Lower-triangular factor of `K + noise * I` (standardized units).
    pub fn covariance_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Noise plus jitter that was placed on each diagonal entry.
    pub fn diagonal_noise(&self) -> Vec<f64> {
        self.jitter
            .iter()
            .map(|j| j + self.kernel.noise_variance)
            .collect()
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let fit = self.targets.dot(&self.alpha);
        let logdet: f64 = self.factor.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::input(format!(
                "query of dimension {} on a model of dimension {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    fn cross_covariance(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dimension();
        let xs: Vec<f64> = x
            .iter()
            .zip(&self.kernel.lengthscales)
            .map(|(v, l)| v / l)
            .collect();
        DVector::from_iterator(
            self.len(),
            self.scaled.chunks_exact(d).map(|row| {
                self.kernel.signal_variance * self.kernel.family.correlation(scaled_dist(row, &xs))
            }),
        )
    }

    /// Posterior mean and (latent, noise-free) variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_point(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let k = self.cross_covariance(x);
        let mean = k.dot(&self.alpha);
        let mut v = k;
        self.factor.solve_lower_triangular_mut(&mut v);
        let var = (self.kernel.signal_variance - v.norm_squared()).max(0.0);
        Prediction {
            mean: mean * self.target_scale + self.target_mean,
            variance: var * self.target_scale * self.target_scale,
        }
    }

    /// Posterior moments at `x` and their gradients in `x`. The variance
    /// gradient is zero where the variance is clamped at 0.
    pub fn predict_with_gradient(&self, x: &[f64]) -> Result<(Prediction, PredictionGradient)> {
        self.check_point(x)?;
        Ok(self.predict_with_gradient_unchecked(x))
    }

    pub(crate) fn predict_with_gradient_unchecked(&self, x: &[f64]) -> (Prediction, PredictionGradient) {
        let d = self.dimension();
        let n = self.len();
        let ls = &self.kernel.lengthscales;
        let sv = self.kernel.signal_variance;
        let xs: Vec<f64> = x.iter().zip(ls).map(|(v, l)| v / l).collect();
        let mut k = DVector::zeros(n);
        // d k_i / d x_j = -sv * w(r_i) * (xs_j - row_ij) / l_j
        let mut weights = vec![0.0; n];
        for (i, row) in self.scaled.chunks_exact(d).enumerate() {
            let r = scaled_dist(row, &xs);
            k[i] = sv * self.kernel.family.correlation(r);
            weights[i] = -sv * self.kernel.family.lengthscale_weight(r);
        }
        let mean = k.dot(&self.alpha);
        let mut v = k;
        self.factor.solve_lower_triangular_mut(&mut v);
        let raw_var = sv - v.norm_squared();
        let mut u = v;
        self.factor.tr_solve_lower_triangular_mut(&mut u);
        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        for (i, row) in self.scaled.chunks_exact(d).enumerate() {
            let (a, b) = (weights[i] * self.alpha[i], -2.0 * weights[i] * u[i]);
            for j in 0..d {
                let dx = (xs[j] - row[j]) / ls[j];
                dmean[j] += a * dx;
                dvar[j] += b * dx;
            }
        }
        let s2 = self.target_scale * self.target_scale;
        dmean.iter_mut().for_each(|g| *g *= self.target_scale);
        if raw_var > 0.0 {
            dvar.iter_mut().for_each(|g| *g *= s2);
        } else {
            dvar.iter_mut().for_each(|g| *g = 0.0);
        }
        (
            Prediction {
                mean: mean * self.target_scale + self.target_mean,
                variance: raw_var.max(0.0) * s2,
            },
            PredictionGradient {
                mean: dmean,
                variance: dvar,
            },
        )
    }

    /// Posterior mean only, O(n d).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.predict_mean_unchecked(x))
    }

    pub(crate) fn predict_mean_unchecked(&self, x: &[f64]) -> f64 {
        self.cross_covariance(x).dot(&self.alpha) * self.target_scale + self.target_mean
    }

    /// Draws one value from the posterior marginal at `x`.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let p = self.predict(x)?;
        let z: f64 = rng.sample(StandardNormal);
        if p.variance == 0.0 {
            return Ok(p.mean);
        }
        Ok(p.mean + p.std_dev() * z)
    }

    /// [`sample_posterior`](Self::sample_posterior) with a generator seeded from `seed`.
    pub fn sample_posterior_seeded(&self, x: &[f64], seed: u64) -> Result<f64> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.sample_posterior(x, &mut rng)
    }

    /// Conditions on `(x_new, y_virtual)` by extending the Cholesky factor by
    /// one row. Hyperparameters and standardization are kept.
    pub fn condition_on_virtual(&self, x_new: &[f64], y_virtual: f64) -> Result<Self> {
        self.check_point(x_new)?;
        if !y_virtual.is_finite() {
            return Err(Error::input("virtual observation must be finite"));
        }
        let n = self.len();
        let k = self.cross_covariance(x_new);
        let mut l_row = k.clone();
        self.factor.solve_lower_triangular_mut(&mut l_row);
        let base = self.kernel.signal_variance + self.kernel.noise_variance;
        let mut jitter = self.jitter.first().copied().unwrap_or(0.0);
        let mut pivot = base + jitter - l_row.norm_squared();
        while pivot <= 0.0 {
            jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::Numerical(
                    "conditioning point duplicates the training set beyond jitter recovery".into(),
                ));
            }
            pivot = base + jitter - l_row.norm_squared();
        }

        let mut factor = self.factor.clone().resize(n + 1, n + 1, 0.0);
        for j in 0..n {
            factor[(n, j)] = l_row[j];
        }
        factor[(n, n)] = pivot.sqrt();

        let mut targets = self.targets.clone().resize_vertically(n + 1, 0.0);
        targets[n] = (y_virtual - self.target_mean) / self.target_scale;
        let alpha = solve_cholesky(&factor, &targets);

        let mut inputs = self.inputs.clone();
        inputs.push(x_new.to_vec());
        let mut scaled = self.scaled.clone();
        scaled.extend(
            x_new
                .iter()
                .zip(&self.kernel.lengthscales)
                .map(|(v, l)| v / l),
        );
        let mut jitters = self.jitter.clone();
        jitters.push(jitter);
        Ok(GaussianProcessModel {
            kernel: self.kernel.clone(),
            inputs,
            scaled,
            targets,
            target_mean: self.target_mean,
            target_scale: self.target_scale,
            jitter: jitters,
            factor,
            alpha,
        })
    }

    /// Leave-one-out residuals `y_i - mu_{-i}(x_i)` in original units,
    /// from the closed form `alpha_i / [K^-1]_ii`.
    pub fn loo_residuals(&self) -> Vec<f64> {
        let n = self.len();
        let mut inv = DMatrix::identity(n, n);
        self.factor.solve_lower_triangular_mut(&mut inv);
        // diag(K^-1) = column sums of squares of L^-1
        (0..n)
            .map(|i| {
                let d: f64 = inv.column(i).iter().map(|v| v * v).sum();
                self.alpha[i] / d * self.target_scale
            })
            .collect()
    }
}

pub(crate) fn solve_cholesky(factor: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut a = y.clone();
    factor.solve_lower_triangular_mut(&mut a);
    factor.tr_solve_lower_triangular_mut(&mut a);
    a
}

fn check_training_set(inputs: &[Vec<f64>], targets: &[f64], d: usize) -> Result<()> {
    if inputs.len() < 2 {
        return Err(Error::input(format!(
            "need at least 2 training points, got {}",
            inputs.len()
        )));
    }
    if inputs.len() != targets.len() {
        return Err(Error::input(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != d) {
        return Err(Error::input(format!(
            "training input of dimension {} for a kernel of dimension {d}",
            x.len()
        )));
    }
    if inputs.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::input("training data must be finite"));
    }
    Ok(())
}

/// Independent posteriors for the two objectives and the constraint.
#[derive(Clone, Debug)]
pub struct SurrogateSet {
    pub f1: GaussianProcessModel,
    pub f2: GaussianProcessModel,
    pub g: GaussianProcessModel,
}

impl SurrogateSet {
    pub fn dimension(&self) -> usize {
        self.f1.dimension()
    }

    pub fn predict(&self, x: &[f64]) -> Result<[Prediction; 3]> {
        Ok([self.f1.predict(x)?, self.f2.predict(x)?, self.g.predict(x)?])
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> [Prediction; 3] {
        [
            self.f1.predict_unchecked(x),
            self.f2.predict_unchecked(x),
            self.g.predict_unchecked(x),
        ]
    }

    pub(crate) fn predict_with_gradient_unchecked(&self, x: &[f64]) -> [(Prediction, PredictionGradient); 3] {
        [
            self.f1.predict_with_gradient_unchecked(x),
            self.f2.predict_with_gradient_unchecked(x),
            self.g.predict_with_gradient_unchecked(x),
        ]
    }

    pub(crate) fn predict_means_unchecked(&self, x: &[f64]) -> [f64; 3] {
        [
            self.f1.predict_mean_unchecked(x),
            self.f2.predict_mean_unchecked(x),
            self.g.predict_mean_unchecked(x),
        ]
    }

    /// Posterior means `(f1, f2, g)`.
    pub fn predict_means(&self, x: &[f64]) -> Result<[f64; 3]> {
        Ok([
            self.f1.predict_mean(x)?,
            self.f2.predict_mean(x)?,
            self.g.predict_mean(x)?,
        ])
    }

    pub fn condition_on_virtual(&self, x: &[f64], values: [f64; 3]) -> Result<Self> {
        Ok(SurrogateSet {
            f1: self.f1.condition_on_virtual(x, values[0])?,
            f2: self.f2.condition_on_virtual(x, values[1])?,
            g: self.g.condition_on_virtual(x, values[2])?,
        })
    }

    pub fn states(&self) -> [GpState; 3] {
        [self.f1.state(), self.f2.state(), self.g.state()]
    }
}
