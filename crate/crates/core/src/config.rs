//! JSON run configuration for the command-line front end.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::Rational;
use crate::error::{Error, Result};
use crate::measure::{Clustering, ExternalField};
use crate::theta::Theta;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveScalar,
    SolveVector,
    AnalyticCheck,
    Balayage,
    SpectralCurve,
    Sample,
    Compare,
}

impl Command {
    pub fn parse(s: &str) -> Result<Command> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown command {s:?}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveScalar => "solve-scalar",
            Command::SolveVector => "solve-vector",
            Command::AnalyticCheck => "analytic-check",
            Command::Balayage => "balayage",
            Command::SpectralCurve => "spectral-curve",
            Command::Sample => "sample",
            Command::Compare => "compare",
        }
    }
}

/// `theta` as `"q/r"`, a decimal string, or a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Linear,
    Monomial { c: f64, p: f64 },
    Tabulated { points: Vec<(f64, f64)> },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Linear
    }
}

impl FieldSpec {
    pub fn field(&self) -> Result<ExternalField> {
        match self {
            FieldSpec::Linear => Ok(ExternalField::linear()),
            FieldSpec::Monomial { c, p } => {
                if !(*c > 0.0 && *p > 0.0) {
                    return Err(Error::InvalidArgument("monomial field needs c > 0 and p > 0".into()));
                }
                Ok(ExternalField::monomial(*c, *p))
            }
            FieldSpec::Tabulated { points } => ExternalField::tabulated(points),
        }
    }

    /// `V'` when it is a polynomial.
    pub fn derivative(&self) -> Result<Rational> {
        match self {
            FieldSpec::Linear => Ok(Rational::polynomial(vec![1.0])),
            FieldSpec::Monomial { c, p } if p.fract() == 0.0 && *p >= 1.0 => Rational::monomial_derivative(*c, *p as u32),
            _ => Err(Error::InvalidArgument("the spectral curve needs a field with rational V'".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusteringSpec {
    Uniform,
    Cosine,
    /// `R t^2`, clustering toward 0.
    Quadratic,
}

impl From<ClusteringSpec> for Clustering {
    fn from(c: ClusteringSpec) -> Self {
        match c {
            ClusteringSpec::Uniform => Clustering::Uniform,
            ClusteringSpec::Cosine => Clustering::Cosine,
            ClusteringSpec::Quadratic => Clustering::Power { gamma: 2.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Right end of the scalar grid; from a pilot solve when absent.
    pub radius: Option<f64>,
    pub cells: usize,
    pub clustering: ClusteringSpec,
    /// Cells of the center component of the vector problem.
    pub center_cells: usize,
    pub per_decade: f64,
    pub band_per_decade: f64,
    pub eps_tail: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radius: None,
            cells: 400,
            clustering: ClusteringSpec::Cosine,
            center_cells: 240,
            per_decade: 12.0,
            band_per_decade: 40.0,
            eps_tail: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_var: f64,
    pub tol_fixed: f64,
    pub curve: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_var: 1e-3, tol_fixed: 1e-8, curve: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub a: f64,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { a: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalayageConfig {
    /// `(position, mass)` of the swept point masses.
    pub atoms: Vec<(f64, f64)>,
    /// `"negative"` or `"positive"`.
    pub target: String,
    pub inner: f64,
    pub outer: f64,
    pub per_decade: f64,
    /// `(lo, hi, cells per decade)` refinement bands in `|x|`.
    pub bands: Vec<(f64, f64, f64)>,
}

impl Default for BalayageConfig {
    fn default() -> Self {
        Self {
            atoms: vec![(1.0, 1.0)],
            target: "negative".into(),
            inner: 1e-10,
            outer: 1e20,
            per_decade: 20.0,
            bands: vec![(1e-3, 1e3, 200.0)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub sweeps: usize,
    pub chains: usize,
    pub burn_in: f64,
    pub bins: usize,
    pub max_particles: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 200, sweeps: 200_000, chains: 4, burn_in: 0.2, bins: 4000, max_particles: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub theta: Option<ThetaSpec>,
    #[serde(default)]
    pub q: Option<u32>,
    #[serde(default)]
    pub r: Option<u32>,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; not part of the hash.
    #[serde(default, skip_serializing)]
    pub out: Option<String>,
    #[serde(default)]
    pub analytic: AnalyticConfig,
    #[serde(default)]
    pub balayage: BalayageConfig,
    #[serde(default)]
    pub sample: SampleConfig,
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<RunConfig> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// `theta` in lowest terms; `q, r` are gcd-reduced and must agree with `theta` when both are given.
    pub fn theta(&self) -> Result<Theta> {
        let from_qr = match (self.q, self.r) {
            (Some(q), Some(r)) => Some(Theta::new(q, r)?),
            (None, None) => None,
            _ => return bad("q and r must be given together"),
        };
        let from_theta = match &self.theta {
            Some(ThetaSpec::Number(x)) => Some(Theta::approximate(*x, 1000, 1e-12)?),
            Some(ThetaSpec::Text(s)) => Some(Theta::parse(s)?),
            None => None,
        };
        match (from_qr, from_theta) {
            (Some(a), Some(b)) if a != b => bad(format!("theta = {b} does not match q/r = {a}")),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => bad("give theta or q and r"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if !(t.tol_var > 0.0 && t.tol_fixed > 0.0 && t.curve > 0.0) {
            return bad("tolerances must be positive");
        }
        let needs_theta = !matches!(self.command, Command::AnalyticCheck | Command::Balayage);
        if needs_theta {
            self.theta()?;
            self.field.field()?;
        }
        let g = &self.grid;
        if g.cells < 2 || g.center_cells < 2 || !(g.per_decade > 0.0 && g.band_per_decade > 0.0 && g.eps_tail > 0.0) {
            return bad("grid sizes must be positive");
        }
        if let Some(r) = g.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("grid radius must be positive");
            }
        }
        match self.command {
            Command::AnalyticCheck => {
                let r = self.r.unwrap_or(2);
                if r < 2 {
                    return bad("analytic-check needs r >= 2");
                }
                if !(self.analytic.a > 0.0) {
                    return bad("analytic.a must be positive");
                }
            }
            Command::Balayage => {
                let b = &self.balayage;
                if b.atoms.is_empty() || b.atoms.iter().any(|&(x, m)| !(m > 0.0) || !x.is_finite()) {
                    return bad("balayage needs atoms with positive mass");
                }
                if b.target != "negative" && b.target != "positive" {
                    return bad("balayage.target must be negative or positive");
                }
            }
            Command::SpectralCurve => {
                if self.theta()?.q != 1 {
                    return bad("spectral-curve needs theta = 1/r");
                }
                self.field.derivative()?;
            }
            Command::Sample | Command::Compare => {
                let s = &self.sample;
                if s.n == 0 || s.n > s.max_particles || s.sweeps == 0 || s.chains == 0 || !(0.0..1.0).contains(&s.burn_in) {
                    return bad("sample needs 1 <= n <= max_particles, sweeps, chains >= 1 and burn_in in [0, 1)");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(s.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_forms() {
        let c = RunConfig::from_json(r#"{"command":"solve-scalar","theta":"2/4"}"#).unwrap();
        assert_eq!(c.theta().unwrap(), Theta { q: 1, r: 2 });
        let c = RunConfig::from_json(r#"{"command":"solve-scalar","theta":0.5,"q":2,"r":4}"#).unwrap();
        assert_eq!(c.theta().unwrap(), Theta { q: 1, r: 2 });
        let c = RunConfig::from_json(r#"{"command":"solve-scalar","theta":"1/3","q":1,"r":2}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(r#"{"command":"solve-scalar","q":1}"#).unwrap();
        assert!(c.theta().is_err());
    }

    #[test]
    fn defaults_and_unknown_keys() {
        let c = RunConfig::from_json(r#"{"command":"sample","theta":1,"field":{"kind":"monomial","c":2,"p":1}}"#).unwrap();
        assert_eq!(c.sample.n, 200);
        assert!(c.validate().is_ok());
        assert!(RunConfig::from_json(r#"{"command":"sample","theta":1,"gird":{}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command":"fly"}"#).is_err());
        assert_eq!(Command::parse("spectral-curve").unwrap(), Command::SpectralCurve);
    }

    #[test]
    fn curve_needs_rational_derivative() {
        let c = RunConfig::from_json(r#"{"command":"spectral-curve","theta":"1/2","field":{"kind":"monomial","c":1,"p":1.5}}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(r#"{"command":"spectral-curve","theta":"2/3"}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_is_stable() {
        let c = RunConfig::from_json(r#"{"command":"analytic-check","r":3}"#).unwrap();
        assert_eq!(c.hash(), c.clone().hash());
        let mut d = c.clone();
        d.seed = 9;
        assert_ne!(c.hash(), d.hash());
    }
}
