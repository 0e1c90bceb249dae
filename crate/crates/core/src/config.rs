//! Run configuration: TOML sections per stage, case defaults filled in.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::SolverConfig;
use crate::problem::{CaseTag, ProblemSpec};
use crate::{Error, Result};

/// Scalar literal: a plain number, `pi`, `Npi`, `N*pi`, or a quotient `a/b` of those.
pub fn parse_scalar(s: &str) -> Result<f64> {
    let bad = || Error::InvalidConfig(format!("cannot parse `{s}` as a number"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        return Ok(parse_scalar(a)? / parse_scalar(b)?);
    }
    let lower = s.to_ascii_lowercase();
    if let Some(k) = lower.strip_suffix("pi") {
        let k = k.trim().trim_end_matches('*').trim();
        let k = if k.is_empty() { 1.0 } else { k.parse::<f64>().map_err(|_| bad())? };
        return Ok(k * PI);
    }
    lower.parse::<f64>().map_err(|_| bad())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    fn value(&self) -> Result<f64> {
        match self {
            Scalar::Num(v) => Ok(*v),
            Scalar::Text(s) => parse_scalar(s),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    case: Option<String>,
    omega: Option<Scalar>,
    reflection: Option<f64>,
    pml_width: Option<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHierarchy {
    levels: Option<Vec<Scalar>>,
    degree: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    cfl: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdapt {
    t_up: Option<Scalar>,
    eta0: Option<Scalar>,
    eps0: Option<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDriver {
    t_max: Option<f64>,
    uniform_baseline: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    hierarchy: RawHierarchy,
    #[serde(default)]
    stepper: RawStepper,
    #[serde(default)]
    adapt: RawAdapt,
    #[serde(default)]
    driver: RawDriver,
}

/// Partially specified run; `None` means "case default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub case: Option<String>,
    pub omega: Option<f64>,
    pub reflection: Option<f64>,
    pub pml_width: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub degree: Option<usize>,
    pub cfl: Option<f64>,
    pub t_up: Option<f64>,
    pub eta0: Option<f64>,
    pub eps0: Option<f64>,
    pub t_max: Option<f64>,
    pub uniform_baseline: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let opt = |s: &Option<Scalar>| s.as_ref().map(Scalar::value).transpose();
        Ok(Self {
            case: raw.problem.case,
            omega: opt(&raw.problem.omega)?,
            reflection: raw.problem.reflection,
            pml_width: opt(&raw.problem.pml_width)?,
            levels: raw
                .hierarchy
                .levels
                .map(|v| v.iter().map(Scalar::value).collect::<Result<Vec<_>>>())
                .transpose()?,
            degree: raw.hierarchy.degree,
            cfl: raw.stepper.cfl,
            t_up: opt(&raw.adapt.t_up)?,
            eta0: opt(&raw.adapt.eta0)?,
            eps0: opt(&raw.adapt.eps0)?,
            t_max: raw.driver.t_max,
            uniform_baseline: raw.driver.uniform_baseline,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Values set in `other` win.
    pub fn merge(mut self, other: ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(case, omega, reflection, pml_width, levels, degree, cfl, t_up, eta0, eps0, t_max, uniform_baseline);
        self
    }

    /// Applies the case defaults and validates.
    pub fn resolve(&self) -> Result<RunConfig> {
        let case: CaseTag = self
            .case
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no case given".into()))?
            .parse()?;
        let omega = self.omega.unwrap_or(10.0 * PI);
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
        }
        let d = SolverConfig::for_case(case, omega);
        let cfg = RunConfig {
            case,
            omega,
            reflection: self.reflection.unwrap_or(1e-10),
            pml_width: self.pml_width.unwrap_or(PI / omega),
            levels: self.levels.clone().unwrap_or(d.levels),
            degree: self.degree.unwrap_or(d.degree),
            cfl: self.cfl.unwrap_or(d.cfl),
            t_up: self.t_up.unwrap_or(d.t_up),
            eta0: self.eta0.unwrap_or(d.eta0),
            eps0: self.eps0.unwrap_or(d.eps0),
            t_max: self.t_max.unwrap_or(d.t_max),
            uniform_baseline: self.uniform_baseline.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved run configuration, echoed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub case: CaseTag,
    pub omega: f64,
    pub reflection: f64,
    pub pml_width: f64,
    pub levels: Vec<f64>,
    pub degree: usize,
    pub cfl: f64,
    pub t_up: f64,
    pub eta0: f64,
    pub eps0: f64,
    pub t_max: f64,
    pub uniform_baseline: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidHierarchy("no mesh widths given".into()));
        }
        if !(1..=10).contains(&self.degree) {
            return Err(Error::InvalidConfig(format!("degree must lie in 1..=10, got {}", self.degree)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!("CFL number must lie in (0, 1], got {}", self.cfl)));
        }
        for (name, v) in [("t_up", self.t_up), ("eta0", self.eta0), ("eps0", self.eps0), ("t_max", self.t_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let spec = self.problem()?;
        crate::hierarchy::build_hierarchy(&self.levels, spec.half_width, spec.pml_width, spec.dim)?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::named(self.case, self.omega)?;
        spec.reflection = self.reflection;
        spec.pml_width = self.pml_width;
        spec.validate()?;
        Ok(spec)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            levels: self.levels.clone(),
            degree: self.degree,
            cfl: self.cfl,
            t_up: self.t_up,
            eta0: self.eta0,
            eps0: self.eps0,
            t_max: self.t_max,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars() {
        assert_eq!(parse_scalar("10pi").unwrap(), 10.0 * PI);
        assert_eq!(parse_scalar("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_scalar("pi").unwrap(), PI);
        assert_eq!(parse_scalar("1/50").unwrap(), 0.02);
        assert_eq!(parse_scalar("pi/5").unwrap(), PI / 5.0);
        assert_eq!(parse_scalar(" 31.5 ").unwrap(), 31.5);
        assert!(parse_scalar("ten").is_err());
    }

    #[test]
    fn toml_sections() {
        let text = r#"
            [problem]
            case = "1d_bump"
            omega = "20pi"
            [hierarchy]
            levels = ["1/5", 0.1, "1/100"]
            [adapt]
            eta0 = 0.5
        "#;
        let cfg = ConfigOverrides::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.omega, 20.0 * PI);
        assert_eq!(cfg.levels, vec![0.2, 0.1, 0.01]);
        assert_eq!(cfg.eta0, 0.5);
        assert_eq!(cfg.eps0, 20.0 * PI / 100.0);
        assert_eq!(cfg.degree, 2);
        assert_eq!(cfg.cfl, 0.9);
        assert!((cfg.pml_width - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let base = ConfigOverrides {
            case: Some("1d_bump".into()),
            ..Default::default()
        };
        assert!(base.resolve().is_ok());
        let mut c = base.clone();
        c.case = Some("3d_cube".into());
        assert!(matches!(c.resolve(), Err(Error::UnknownCase(_))));
        let mut c = base.clone();
        c.omega = Some(-1.0);
        assert!(matches!(c.resolve(), Err(Error::InvalidConfig(_))));
        let mut c = base.clone();
        c.levels = Some(vec![0.2, 0.03]);
        assert!(matches!(c.resolve(), Err(Error::InvalidHierarchy(_))));
        assert!(ConfigOverrides::from_toml("[problem]\nshape = 1").is_err());
    }

    #[test]
    fn merge_prefers_later() {
        let a = ConfigOverrides {
            case: Some("1d_bump".into()),
            degree: Some(3),
            ..Default::default()
        };
        let b = ConfigOverrides {
            degree: Some(2),
            ..Default::default()
        };
        let m = a.merge(b);
        assert_eq!(m.degree, Some(2));
        assert_eq!(m.case.as_deref(), Some("1d_bump"));
    }
}
