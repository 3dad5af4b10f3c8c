//! Analytic benchmark problems.

use super::{Outcome, Problem, VariableSpec};
use crate::error::Result;
use crate::pareto::Objectives;

/// Binh and Korn: two variables, two constraints folded into one.
///
/// `f1 = 4 x1^2 + 4 x2^2`, `f2 = (x1 - 5)^2 + (x2 - 5)^2` on
/// `[0, 5] x [0, 3]`, subject to `(x1 - 5)^2 + x2^2 <= 25` and
/// `(x1 - 8)^2 + (x2 + 3)^2 >= 7.7`. The single constraint value is the
/// larger of the two violations.
pub struct Bnh {
    variables: Vec<VariableSpec>,
}

impl Bnh {
    pub fn new() -> Self {
        Bnh {
            variables: vec![
                VariableSpec::new("x1", "", (0.0, 5.0), (0.0, 1.0)).unwrap(),
                VariableSpec::new("x2", "", (0.0, 3.0), (0.0, 1.0)).unwrap(),
            ],
        }
    }

    pub fn evaluate_real(x1: f64, x2: f64) -> Outcome {
        let f1 = 4.0 * x1 * x1 + 4.0 * x2 * x2;
        let f2 = (x1 - 5.0).powi(2) + (x2 - 5.0).powi(2);
        let c1 = (x1 - 5.0).powi(2) + x2 * x2 - 25.0;
        let c2 = 7.7 - (x1 - 8.0).powi(2) - (x2 + 3.0).powi(2);
        Outcome { f1, f2, g: c1.max(c2) }
    }
}

impl Default for Bnh {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for Bnh {
    fn name(&self) -> &str {
        "bnh"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn evaluate_unit(&self, x: &[f64]) -> Result<Outcome> {
        let x1 = self.variables[0].denormalize(self.variables[0].from_unit(x[0]))?;
        let x2 = self.variables[1].denormalize(self.variables[1].from_unit(x[1]))?;
        Ok(Self::evaluate_real(x1, x2))
    }

    /// `x1 = x2 = s` for `s` in `[0, 3]`, then `x2 = 3` for `x1` in `[3, 5]`.
    fn known_front(&self, samples: usize) -> Option<Vec<Objectives>> {
        let samples = samples.max(2);
        let half = samples / 2;
        let mut out = Vec::with_capacity(samples);
        for i in 0..half {
            let s = 3.0 * i as f64 / half as f64;
            let o = Self::evaluate_real(s, s);
            out.push([o.f1, o.f2]);
        }
        let rest = samples - half;
        for i in 0..rest {
            let x1 = 3.0 + 2.0 * i as f64 / (rest - 1).max(1) as f64;
            let o = Self::evaluate_real(x1, 3.0);
            out.push([o.f1, o.f2]);
        }
        Some(out)
    }
}

/// Srinivas and Deb: two variables on `[-20, 20]^2`, two constraints folded
/// into one.
pub struct Srn {
    variables: Vec<VariableSpec>,
}

impl Srn {
    pub fn new() -> Self {
        Srn {
            variables: vec![
                VariableSpec::new("x1", "", (-20.0, 20.0), (0.0, 1.0)).unwrap(),
                VariableSpec::new("x2", "", (-20.0, 20.0), (0.0, 1.0)).unwrap(),
            ],
        }
    }

    pub fn evaluate_real(x1: f64, x2: f64) -> Outcome {
        let f1 = (x1 - 2.0).powi(2) + (x2 - 1.0).powi(2) + 2.0;
        let f2 = 9.0 * x1 - (x2 - 1.0).powi(2);
        let c1 = x1 * x1 + x2 * x2 - 225.0;
        let c2 = x1 - 3.0 * x2 + 10.0;
        Outcome { f1, f2, g: c1.max(c2) }
    }
}

impl Default for Srn {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for Srn {
    fn name(&self) -> &str {
        "srn"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn evaluate_unit(&self, x: &[f64]) -> Result<Outcome> {
        let x1 = self.variables[0].denormalize(self.variables[0].from_unit(x[0]))?;
        let x2 = self.variables[1].denormalize(self.variables[1].from_unit(x[1]))?;
        Ok(Self::evaluate_real(x1, x2))
    }
}

/// Threshold of the back-EMF analogue; feasible designs stay at or below it.
pub const FEM_THRESHOLD: f64 = 650.0;

// Per-variable coefficients, in the order of `SynrelToy::variables`.
// torque: optimum location, curvature, exponent
const T_CENTER: [f64; 12] = [0.95, 0.7, 0.75, 0.0, 0.0, 0.0, 0.0, 0.3, 0.5, 1.0, 1.0, 1.0];
const T_CURV: [f64; 12] = [0.99, 0.6, 0.6, 0.5, 0.5, 0.5, 0.99, 0.6, 0.4, 0.7, 0.7, 0.7];
const T_WEIGHT: [f64; 12] = [4.8, 3.2, 2.4, 1.6, 1.2, 0.8, 6.0, 2.0, 1.6, 3.6, 2.8, 2.0];
// power ratio: preferred location and weight of the penalty quadratic
const P_CENTER: [f64; 12] = [0.6, 0.4, 0.3, 0.9, 0.9, 0.8, 0.9, 0.7, 0.6, 0.3, 0.3, 0.4];
const P_WEIGHT: [f64; 12] = [0.8, 0.3, 0.3, 0.5, 0.4, 0.3, 1.6, 0.4, 0.3, 0.9, 0.6, 0.4];
// back-EMF: linear sensitivities around the box center
const E_SLOPE: [f64; 12] = [1.0, 0.4, 0.3, -0.5, -0.4, -0.3, -1.2, -0.3, -0.2, 0.8, 0.6, 0.4];
const E_BASE: f64 = 568.5;

const BETA_L1: usize = 6;
const BETA_L2: usize = 7;
const PM_LEN_L1: usize = 9;

/// A 12-variable analytic stand-in for a rotor design problem.
///
/// Variables carry the names and normalized bounds of a three-layer
/// permanent-magnet-assisted synchronous reluctance rotor. The response
/// surfaces are synthetic:
///
/// * `couple` (torque analogue, maximized): a weighted product of concave
///   quadratics, largest for long magnets, thin bridges and a small first
///   barrier opening angle. The exponents make it sharply peaked, so a
///   space-filling design sees little of the high-torque region.
/// * `power_ratio` (maximized, in `(0, 1]`): a ratio of two quadratics
///   that prefers the opposite corner, so the two objectives conflict.
/// * `fem` (back-EMF analogue): linear plus quadratic, correlated with
///   torque; designs with `fem > 650` (about 30 % of the box) are infeasible.
///
/// Internally `f1 = -couple`, `f2 = -power_ratio`, `g = fem - 650`.
pub struct SynrelToy {
    variables: Vec<VariableSpec>,
}

impl SynrelToy {
    pub fn new() -> Self {
        let wide = (0.1, 0.9);
        let mut v = vec![VariableSpec::new("Rad_PM_L1", "mm", (40.0, 80.0), (0.6, 0.9)).unwrap()];
        for name in ["Rad_PM_L2", "Rad_PM_L3"] {
            v.push(VariableSpec::new(name, "mm", (40.0, 80.0), wide).unwrap());
        }
        for name in ["Rad_Brid_L1", "Rad_Brid_L2", "Rad_Brid_L3"] {
            v.push(VariableSpec::new(name, "mm", (0.5, 2.0), wide).unwrap());
        }
        for name in ["Beta_L1", "Beta_L2", "Beta_L3"] {
            v.push(VariableSpec::new(name, "deg", (10.0, 60.0), wide).unwrap());
        }
        for name in ["PM_Len_L1", "PM_Len_L2", "PM_Len_L3"] {
            v.push(VariableSpec::new(name, "mm", (5.0, 30.0), wide).unwrap());
        }
        SynrelToy { variables: v }
    }

    /// Responses `(couple, power_ratio, fem)` at normalized values `z`.
    pub fn responses(z: &[f64]) -> (f64, f64, f64) {
        let mut torque = 360.0;
        for j in 0..12 {
            let t = 1.0 - T_CURV[j] * (z[j] - T_CENTER[j]).powi(2);
            torque *= t.powf(T_WEIGHT[j]);
        }
        let penalty: f64 = (0..12).map(|j| P_WEIGHT[j] * (z[j] - P_CENTER[j]).powi(2)).sum();
        let base = 0.25 + 0.5 * (z[BETA_L2] - 0.2).powi(2);
        let ratio = base / (base + penalty);
        let linear: f64 = (0..12).map(|j| E_SLOPE[j] * (z[j] - 0.5)).sum();
        let quad = (z[BETA_L1] - 0.5).powi(2)
            + (z[PM_LEN_L1] - 0.5).powi(2)
            + 0.5 * (z[0] - 0.75).powi(2);
        let fem = E_BASE + 150.0 * linear + 80.0 * quad;
        (torque, ratio, fem)
    }

    /// The constraint value for a given back-EMF analogue.
    pub fn constraint_from_fem(fem: f64) -> f64 {
        fem - FEM_THRESHOLD
    }

    pub fn normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.variables)
            .map(|(u, v)| v.from_unit(*u))
            .collect()
    }
}

impl Default for SynrelToy {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for SynrelToy {
    fn name(&self) -> &str {
        "synrel-toy"
    }

    fn dimension(&self) -> usize {
        12
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn display_names(&self) -> [&str; 2] {
        ["couple", "power_ratio"]
    }

    fn constraint_name(&self) -> &str {
        "fem"
    }

    fn evaluate_unit(&self, x: &[f64]) -> Result<Outcome> {
        let (torque, ratio, fem) = Self::responses(&self.normalized(x));
        Ok(Outcome {
            f1: -torque,
            f2: -ratio,
            g: Self::constraint_from_fem(fem),
        })
    }
}
