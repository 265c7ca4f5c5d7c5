use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curveflow::{init_curve, CurveShape, DiscreteCurve, FlowConfig};
use crate::error::{Error, Result};
use crate::patch::{Immersion, ImmersionPatch};
use crate::potential::{PotentialField, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCurve {
    pub shape: CurveShape,
    pub n: usize,
}

impl InitialCurve {
    pub fn build(&self) -> Result<DiscreteCurve> {
        init_curve(&self.shape, self.n)
    }
}

/// Monitors and hypothesis evaluations to arm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Hessian pinching, initial |A|², derivative polynomial and bounds.
    #[serde(default)]
    pub hypothesis: bool,
    /// Quadratic-diagonal threshold 2m − M, checked initially and along the flow.
    #[serde(default)]
    pub threshold: bool,
    #[serde(default)]
    pub convexity: bool,
    #[serde(default)]
    pub sphere_bound: bool,
    /// Region for the Hessian bounds; defaults to the padded bounding box of
    /// the initial curve.
    #[serde(default)]
    pub region: Option<Region>,
}

fn default_identity_h() -> f64 {
    crate::patch::DEFAULT_STENCIL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityBlock {
    pub patch: ImmersionPatch,
    pub points: Vec<Vec<f64>>,
    /// Coarse stencil; the fine one is half of it.
    #[serde(default = "default_identity_h")]
    pub h: f64,
    /// Time step of the evolution check; skipped when absent.
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_samples() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBlock {
    pub n: usize,
    pub r0: f64,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialBlock>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.');
        if self.name.is_empty() || !self.name.chars().all(safe) || self.name.starts_with('.') {
            return Err(Error::Scenario(format!(
                "name {:?} must be nonempty and use only letters, digits, '-', '_' and '.'",
                self.name
            )));
        }
        self.potential.validate()?;
        let dim = self.potential.dimension();
        if let Some(initial) = &self.initial {
            initial.shape.validate()?;
            if initial.shape.dimension() != dim {
                return Err(Error::Scenario(format!(
                    "shape lives in R^{} but the potential in R^{dim}",
                    initial.shape.dimension()
                )));
            }
        }
        if let Some(flow) = &self.flow {
            flow.validate()?;
        }
        if let Some(region) = &self.checks.region {
            region.validate()?;
            if region.dimension() != dim {
                return Err(Error::Scenario(format!("region has dimension {}, expected {dim}", region.dimension())));
            }
        }
        if let Some(id) = &self.identities {
            id.patch.validate()?;
            if !(id.h > 0.0) || id.eps.is_some_and(|e| !(e > 0.0)) {
                return Err(Error::Scenario("identity stencil and eps must be positive".into()));
            }
            if id.points.is_empty() {
                return Err(Error::Scenario("identity check needs at least one point".into()));
            }
            if id.eps.is_some() && id.patch.ambient_dim() != dim {
                return Err(Error::Scenario(format!(
                    "patch lives in R^{} but the potential in R^{dim}",
                    id.patch.ambient_dim()
                )));
            }
        }
        if let Some(r) = &self.radial {
            if r.n + 1 != dim {
                return Err(Error::Scenario(format!("sphere S^{} needs a potential on R^{}", r.n, r.n + 1)));
            }
        }
        Ok(())
    }

    pub fn initial_curve(&self) -> Result<DiscreteCurve> {
        self.initial
            .as_ref()
            .ok_or_else(|| Error::Scenario("scenario has no initial curve".into()))?
            .build()
    }

    pub fn flow_config(&self) -> Result<&FlowConfig> {
        self.flow
            .as_ref()
            .ok_or_else(|| Error::Scenario("scenario has no flow block".into()))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.output) {
            (Some(dir), _) => dir.to_path_buf(),
            (None, Some(dir)) => dir.clone(),
            (None, None) => Path::new("out").join(&self.name),
        }
    }
}

/// Strict parse of a scenario document; errors name the offending key.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Scenario(format!("at `{path}`: {}", e.into_inner()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario_value(value: Value) -> Result<Scenario> {
    let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::Scenario(format!("at `{path}`: {}", e.into_inner()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Replaces the number at a dotted key path (array indices allowed).
pub fn set_number(doc: &mut Value, path: &str, value: f64) -> Result<()> {
    let mut node = doc;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Scenario(format!("sweep axis `{path}`: no key `{key}`")))?;
    }
    if !node.is_number() {
        return Err(Error::Scenario(format!("sweep axis `{path}` is not a number")));
    }
    // integer fields stay integers when the value allows it
    *node = if node.is_u64() && value >= 0.0 && value.fract() == 0.0 {
        Value::from(value as u64)
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| Error::Scenario(format!("sweep value {value} is not finite")))?
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "circle",
        "potential": {"kind": "constant", "dimension": 2},
        "initial": {"shape": {"kind": "circle", "r": 1.0}, "n": 64},
        "flow": {"t_end": 0.1}
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        let flow = s.flow_config().unwrap();
        assert_eq!(flow.cfl, 0.4);
        assert_eq!(flow.remesh_ratio, 3.0);
        assert_eq!(flow.blowup_a2, 1e6);
        assert!(!s.checks.hypothesis);
        assert_eq!(s.output_dir(None), Path::new("out/circle"));
        assert_eq!(s.initial_curve().unwrap().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"t_end\": 0.1", "\"t_end\": 0.1, \"viscosity\": 2");
        let err = parse_scenario_str(&text).unwrap_err().to_string();
        assert!(err.contains("viscosity"), "{err}");
        assert!(err.contains("flow"), "{err}");
    }

    #[test]
    fn unknown_kind_rejected() {
        let text = MINIMAL.replace("\"constant\"", "\"cubic\"");
        assert!(matches!(parse_scenario_str(&text), Err(Error::Scenario(_))));
    }

    #[test]
    fn dimension_and_name_validation() {
        let text = MINIMAL.replace("\"dimension\": 2", "\"dimension\": 3");
        assert!(parse_scenario_str(&text).is_err());
        let text = MINIMAL.replace("\"circle\",\n        \"potential\"", "\"../x\",\n        \"potential\"");
        assert!(parse_scenario_str(&text).is_err());
    }

    #[test]
    fn set_number_paths() {
        let mut doc: Value = serde_json::from_str(MINIMAL).unwrap();
        set_number(&mut doc, "initial.shape.r", 1.5).unwrap();
        set_number(&mut doc, "initial.n", 128.0).unwrap();
        let s = parse_scenario_value(doc.clone()).unwrap();
        assert_eq!(s.initial.unwrap().n, 128);
        assert!(set_number(&mut doc, "initial.shape.radius", 1.0).is_err());
        assert!(set_number(&mut doc, "name", 1.0).is_err());
        let mut doc: Value =
            serde_json::from_str(r#"{"potential": {"coefficients": [1.0, 2.0]}}"#).unwrap();
        set_number(&mut doc, "potential.coefficients.1", 1.5).unwrap();
        assert_eq!(doc["potential"]["coefficients"][1], 1.5);
    }
}
