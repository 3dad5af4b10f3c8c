use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Stationary covariance families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// Matérn ν = 5/2: twice-differentiable sample paths.
    Matern52,
    /// Matérn ν = 1/2: continuous but rough sample paths, suited to irregular responses.
    Exponential,
    /// Gaussian / radial basis function.
    SquaredExponential,
}

impl KernelFamily {
    /// Correlation as a function of the ARD-scaled distance `r`.
    #[inline]
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern52 => {
                let s = SQRT5 * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelFamily::Exponential => (-r).exp(),
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
        }
    }

    /// `w(r)` such that `d k / d log(l_j) = signal_variance * w(r) * (dx_j / l_j)^2`.
    #[inline]
    pub(crate) fn lengthscale_weight(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern52 => {
                let s = SQRT5 * r;
                (5.0 / 3.0) * (1.0 + s) * (-s).exp()
            }
            KernelFamily::Exponential => {
                if r > 0.0 {
                    (-r).exp() / r
                } else {
                    0.0
                }
            }
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "matern52" | "matern_52" | "matern5/2" => Ok(KernelFamily::Matern52),
            "exponential" | "matern12" | "matern_12" => Ok(KernelFamily::Exponential),
            "squared_exponential" | "rbf" | "se" => Ok(KernelFamily::SquaredExponential),
            other => Err(Error::input(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A fully specified covariance function with ARD lengthscales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        lengthscales: Vec<f64>,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let spec = KernelSpec {
            family,
            lengthscales,
            signal_variance,
            noise_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic(
        family: KernelFamily,
        dimension: usize,
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        Self::new(
            family,
            vec![lengthscale; dimension],
            signal_variance,
            noise_variance,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::input("kernel needs at least one lengthscale"));
        }
        if self.lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::input("lengthscales must be finite and > 0"));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::input("signal variance must be finite and > 0"));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::input("noise variance must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.lengthscales.len()
    }

    /// ARD distance `sqrt(sum_j ((x_j - y_j) / l_j)^2)`.
    pub fn scaled_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let t = (a - b) / l;
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Noise-free covariance `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dimension();
        if x.len() != d || y.len() != d {
            return Err(Error::input(format!(
                "kernel of dimension {d} evaluated on points of dimension {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(self.signal_variance * self.family.correlation(self.scaled_distance(x, y)))
    }
}

/// Covariance between `x` and `y` under `spec`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_gives_signal_variance() {
        for family in [
            KernelFamily::Matern52,
            KernelFamily::Exponential,
            KernelFamily::SquaredExponential,
        ] {
            let k = KernelSpec::new(family, vec![0.3, 2.0], 2.0, 0.0).unwrap();
            assert_eq!(k.eval(&[0.1, 0.7], &[0.1, 0.7]).unwrap(), 2.0);
        }
    }

    #[test]
    fn closed_forms_at_unit_distance() {
        let e = KernelSpec::isotropic(KernelFamily::Exponential, 1, 1.0, 1.0, 0.0).unwrap();
        assert!((e.eval(&[0.0], &[1.0]).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        let m = KernelSpec::isotropic(KernelFamily::Matern52, 1, 1.0, 1.0, 0.0).unwrap();
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((m.eval(&[0.25], &[1.25]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.523_994).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 2, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(k.eval(&[0.0], &[1.0, 0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![0.0], 1.0, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], 0.0, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], 1.0, -1e-9).is_err());
    }

    #[test]
    fn lengthscale_weight_matches_finite_differences() {
        // d k / d log l for a 1-D kernel, where (dx/l)^2 = r^2.
        for family in [
            KernelFamily::Matern52,
            KernelFamily::Exponential,
            KernelFamily::SquaredExponential,
        ] {
            let dx: f64 = 0.7;
            let l: f64 = 0.9;
            let h = 1e-6;
            let k = |log_l: f64| family.correlation(dx / log_l.exp());
            let fd = (k(l.ln() + h) - k(l.ln() - h)) / (2.0 * h);
            let r = dx / l;
            let analytic = family.lengthscale_weight(r) * r * r;
            assert!((fd - analytic).abs() < 1e-7, "{family:?}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn family_parses_from_config_names() {
        assert_eq!("matern52".parse::<KernelFamily>().unwrap(), KernelFamily::Matern52);
        assert_eq!("Exponential".parse::<KernelFamily>().unwrap(), KernelFamily::Exponential);
        assert!("cubic".parse::<KernelFamily>().is_err());
    }
}
