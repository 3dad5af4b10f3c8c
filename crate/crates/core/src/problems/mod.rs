//! Black-box problems: variable normalization, the evaluation record, a
//! budget-counting simulator wrapper, built-in benchmarks and an
//! external-process adapter.

mod benchmarks;
mod external;

pub use benchmarks::{Bnh, Srn, SynrelToy, FEM_THRESHOLD};
pub use external::{external_adapter, ExternalProblem};

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::Objectives;

/// One design variable and its two affine maps: the optimizer's unit
/// coordinate into the searchable sub-box `[min_norm, max_norm]`, and a
/// normalized value into physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub unit: String,
    pub min_real: f64,
    pub max_real: f64,
    pub min_norm: f64,
    pub max_norm: f64,
}

impl VariableSpec {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        (min_real, max_real): (f64, f64),
        (min_norm, max_norm): (f64, f64),
    ) -> Result<Self> {
        let name = name.into();
        if !(min_real < max_real) {
            return Err(Error::input(format!("{name}: min_real must be < max_real")));
        }
        if !(0.0 <= min_norm && min_norm < max_norm && max_norm <= 1.0) {
            return Err(Error::input(format!(
                "{name}: need 0 <= min_norm < max_norm <= 1"
            )));
        }
        Ok(VariableSpec {
            name,
            unit: unit.into(),
            min_real,
            max_real,
            min_norm,
            max_norm,
        })
    }

    /// A variable spanning the whole unit interval, unitless.
    pub fn unit_interval(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            unit: String::new(),
            min_real: 0.0,
            max_real: 1.0,
            min_norm: 0.0,
            max_norm: 1.0,
        }
    }

    /// Normalized value to physical units.
    pub fn denormalize(&self, x_norm: f64) -> Result<f64> {
        if !(self.min_norm..=self.max_norm).contains(&x_norm) {
            return Err(Error::input(format!(
                "{}: normalized value {x_norm} outside [{}, {}]",
                self.name, self.min_norm, self.max_norm
            )));
        }
        Ok(self.min_real + (self.max_real - self.min_real) * x_norm)
    }

    /// Physical units back to a normalized value.
    pub fn normalize(&self, real: f64) -> Result<f64> {
        let x = (real - self.min_real) / (self.max_real - self.min_real);
        if !(self.min_norm - 1e-12..=self.max_norm + 1e-12).contains(&x) {
            return Err(Error::input(format!(
                "{}: physical value {real} outside the searchable box",
                self.name
            )));
        }
        Ok(x.clamp(self.min_norm, self.max_norm))
    }

    /// Optimizer coordinate `u` in `[0, 1]` to the normalized value.
    pub fn from_unit(&self, u: f64) -> f64 {
        self.min_norm + (self.max_norm - self.min_norm) * u
    }

    pub fn to_unit(&self, x_norm: f64) -> f64 {
        (x_norm - self.min_norm) / (self.max_norm - self.min_norm)
    }
}

/// Normalized value to physical units.
pub fn denormalize(spec: &VariableSpec, x_norm: f64) -> Result<f64> {
    spec.denormalize(x_norm)
}

/// Raw evaluator output: two objectives to minimize and one constraint,
/// feasible when `g <= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub f1: f64,
    pub f2: f64,
    pub g: f64,
}

/// A deterministic black box over `[0, 1]^d`.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn variables(&self) -> &[VariableSpec];

    /// Column labels for the two objectives when displayed as quantities to
    /// maximize, i.e. negated from the internal minimization values.
    fn display_names(&self) -> [&str; 2] {
        ["neg_f1", "neg_f2"]
    }

    fn constraint_name(&self) -> &str {
        "g"
    }

    fn evaluate_unit(&self, x: &[f64]) -> Result<Outcome>;

    /// `samples` points of the analytic Pareto front, when known.
    fn known_front(&self, _samples: usize) -> Option<Vec<Objectives>> {
        None
    }

    /// How many evaluations may be in flight at once.
    fn max_concurrency(&self) -> usize {
        1
    }
}

/// Where an evaluation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Doe,
    BoIteration(usize),
    NsgaVerification,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Doe => write!(f, "doe"),
            Source::BoIteration(k) => write!(f, "bo-iteration-{k}"),
            Source::NsgaVerification => write!(f, "nsga-verification"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doe" => Ok(Source::Doe),
            "nsga-verification" => Ok(Source::NsgaVerification),
            _ => s
                .strip_prefix("bo-iteration-")
                .and_then(|k| k.parse().ok())
                .map(Source::BoIteration)
                .ok_or_else(|| Error::input(format!("unknown evaluation source `{s}`"))),
        }
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One true evaluation of the black box. Equality ignores `wall_time`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub f1: f64,
    pub f2: f64,
    pub g: f64,
    pub source: Source,
    /// Measured, never persisted: artifacts stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for Evaluation {
    fn eq(&self, other: &Self) -> bool {
        self.point == other.point
            && self.f1 == other.f1
            && self.f2 == other.f2
            && self.g == other.g
            && self.source == other.source
    }
}

impl Evaluation {
    pub fn objectives(&self) -> Objectives {
        [self.f1, self.f2]
    }

    pub fn feasible(&self) -> bool {
        self.g <= 0.0
    }
}

fn check_point(problem: &dyn Problem, point: &[f64]) -> Result<()> {
    if point.len() != problem.dimension() {
        return Err(Error::input(format!(
            "{}: expected a point of dimension {}, got {}",
            problem.name(),
            problem.dimension(),
            point.len()
        )));
    }
    if point.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::input(format!(
            "{}: point {point:?} outside [0, 1]^d",
            problem.name()
        )));
    }
    Ok(())
}

/// Evaluates `point` once, validating the input box and the finiteness of
/// the output.
pub fn evaluate(problem: &dyn Problem, point: &[f64], source: Source) -> Result<Evaluation> {
    check_point(problem, point)?;
    let start = Instant::now();
    let out = problem.evaluate_unit(point)?;
    if ![out.f1, out.f2, out.g].iter().all(|v| v.is_finite()) {
        return Err(Error::evaluation(
            point,
            format!("non-finite output {out:?}"),
        ));
    }
    Ok(Evaluation {
        point: point.to_vec(),
        f1: out.f1,
        f2: out.f2,
        g: out.g,
        source,
        wall_time: start.elapsed(),
    })
}

/// A problem plus a counter of true evaluations.
pub struct Simulator {
    problem: Arc<dyn Problem>,
    calls: AtomicUsize,
}

impl Simulator {
    pub fn new(problem: Arc<dyn Problem>) -> Self {
        Simulator {
            problem,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem.as_ref()
    }

    pub fn shared_problem(&self) -> Arc<dyn Problem> {
        Arc::clone(&self.problem)
    }

    /// True evaluations requested so far, successful or not.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn evaluate(&self, point: &[f64], source: Source) -> Result<Evaluation> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        evaluate(self.problem.as_ref(), point, source)
    }

    /// Evaluates `points` in order, running up to `max_concurrency()` at a
    /// time. The first failure is returned.
    pub fn evaluate_batch(&self, points: &[Vec<f64>], source: Source) -> Result<Vec<Evaluation>> {
        let width = self.problem.max_concurrency().max(1);
        if width == 1 {
            return points.iter().map(|p| self.evaluate(p, source)).collect();
        }
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(width) {
            let results: Vec<Result<Evaluation>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|p| scope.spawn(move || self.evaluate(p, source)))
                    .collect();
                handles
                    .into_iter()
                    .zip(chunk)
                    .map(|(h, p)| {
                        h.join().unwrap_or_else(|_| {
                            Err(Error::evaluation(p, "evaluator thread panicked"))
                        })
                    })
                    .collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

/// Names accepted by [`builtin`].
pub fn builtin_problems() -> Vec<&'static str> {
    vec!["bnh", "srn", "synrel-toy"]
}

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Result<Arc<dyn Problem>> {
    match name {
        "bnh" => Ok(Arc::new(Bnh::new())),
        "srn" => Ok(Arc::new(Srn::new())),
        "synrel-toy" => Ok(Arc::new(SynrelToy::new())),
        other => Err(Error::input(format!(
            "unknown problem `{other}`; available: {}",
            builtin_problems().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denormalize_endpoints() {
        let v = VariableSpec::new("x", "mm", (2.0, 7.0), (0.0, 1.0)).unwrap();
        assert_eq!(v.denormalize(0.0).unwrap(), 2.0);
        assert_eq!(v.denormalize(1.0).unwrap(), 7.0);
        assert!(matches!(v.denormalize(1.5), Err(Error::Input(_))));
    }

    #[test]
    fn beta_l1_uses_the_ten_degree_floor() {
        let toy = SynrelToy::new();
        let beta = toy.variables().iter().find(|v| v.name == "Beta_L1").unwrap();
        assert_eq!(beta.min_real, 10.0);
        assert_eq!((beta.min_norm, beta.max_norm), (0.1, 0.9));
        let span = beta.max_real - beta.min_real;
        assert!((beta.denormalize(0.1).unwrap() - (10.0 + 0.1 * span)).abs() < 1e-12);
        assert!((beta.denormalize(0.9).unwrap() - (10.0 + 0.9 * span)).abs() < 1e-12);
        assert!(beta.denormalize(0.05).is_err());
        assert_eq!(beta.from_unit(0.0), 0.1);
        assert_eq!(beta.from_unit(1.0), 0.9);
    }

    #[test]
    fn invalid_variable_specs() {
        assert!(VariableSpec::new("x", "", (1.0, 1.0), (0.0, 1.0)).is_err());
        assert!(VariableSpec::new("x", "", (0.0, 1.0), (0.5, 0.5)).is_err());
        assert!(VariableSpec::new("x", "", (0.0, 1.0), (0.0, 1.2)).is_err());
    }

    #[test]
    fn source_round_trips_through_text() {
        for s in [Source::Doe, Source::BoIteration(17), Source::NsgaVerification] {
            assert_eq!(s.to_string().parse::<Source>().unwrap(), s);
        }
        assert!("bo-iteration-x".parse::<Source>().is_err());
    }

    #[test]
    fn catalog_lookup() {
        assert!(builtin_problems().contains(&"bnh"));
        assert_eq!(builtin("synrel-toy").unwrap().dimension(), 12);
        assert!(matches!(builtin("zdt9"), Err(Error::Input(_))));
    }

    #[test]
    fn simulator_counts_and_validates() {
        let sim = Simulator::new(builtin("bnh").unwrap());
        let a = sim.evaluate(&[0.3, 0.4], Source::Doe).unwrap();
        let b = sim.evaluate(&[0.3, 0.4], Source::Doe).unwrap();
        assert_eq!(a.objectives(), b.objectives());
        assert_eq!(a.g, b.g);
        assert!(sim.evaluate(&[1.3, 0.4], Source::Doe).is_err());
        assert_eq!(sim.calls(), 3);
    }
}
