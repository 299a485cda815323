//! JSON scenario documents.
//!
//! Speeds may be given as bare numbers (m/s) or as strings carrying a `kph` or
//! `mps` suffix. Everything written back out is plain SI numbers. See
//! `docs/scenario.md` for the schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AssumptionSet, EgoVehicle, LimitSegment, ModelError, ParkedVehicle, PostedLimit, Preset,
    Scenario, ValidationError,
};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad speed `{0}` (expected a number or a string like `30 kph` / `8.3 mps`)")]
    Speed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeedValue {
    Mps(f64),
    Text(String),
}

impl SpeedValue {
    pub fn to_mps(&self) -> Result<f64, ScenarioFileError> {
        match self {
            SpeedValue::Mps(v) => Ok(*v),
            SpeedValue::Text(t) => parse_speed(t).ok_or_else(|| ScenarioFileError::Speed(t.clone())),
        }
    }
}

/// Parses `"30 kph"`, `"30kph"`, `"8.33 mps"` or a bare number (m/s).
pub fn parse_speed(text: &str) -> Option<f64> {
    let t = text.trim().to_ascii_lowercase();
    let (num, divisor) = if let Some(n) = t.strip_suffix("kph") {
        (n, 3.6)
    } else if let Some(n) = t.strip_suffix("mps") {
        (n, 1.0)
    } else {
        (t.as_str(), 1.0)
    };
    let v: f64 = num.trim().parse().ok()?;
    Some(v / divisor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PostedLimitDoc {
    Constant(SpeedValue),
    Segments(Vec<SegmentDoc>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDoc {
    pub from: f64,
    pub speed: SpeedValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteDoc {
    pub length: f64,
    pub posted_limit: PostedLimitDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoDoc {
    pub width: f64,
    pub length: f64,
    #[serde(default)]
    pub x_sens: f64,
    #[serde(default)]
    pub y_sens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkedDoc {
    pub s_front: f64,
    pub length: f64,
    pub d_lat: f64,
    #[serde(default = "default_parked_width")]
    pub width: f64,
}

fn default_parked_width() -> f64 {
    ParkedVehicle::<f64>::DEFAULT_WIDTH
}

/// Partial assumption set; missing fields come from the preset (default `example`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_plan_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_plan_dec: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    pub route: RouteDoc,
    pub ego: EgoDoc,
    #[serde(default)]
    pub parked: Vec<ParkedDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionsDoc>,
}

impl ScenarioDoc {
    /// Builds the domain scenario without validating it.
    pub fn to_scenario(&self) -> Result<Scenario<f64>, ScenarioFileError> {
        let posted = match &self.route.posted_limit {
            PostedLimitDoc::Constant(v) => PostedLimit::constant(v.to_mps()?),
            PostedLimitDoc::Segments(segs) => PostedLimit::from_segments(
                segs.iter()
                    .map(|g| {
                        Ok(LimitSegment {
                            from: g.from,
                            speed: g.speed.to_mps()?,
                        })
                    })
                    .collect::<Result<_, ScenarioFileError>>()?,
            ),
        };
        let preset = match &self.preset {
            Some(p) => p.parse::<Preset>()?,
            None => Preset::Example,
        };
        let mut assumptions = AssumptionSet::preset(preset);
        if let Some(a) = &self.assumptions {
            let fields = [
                ("v_o", a.v_o),
                ("t_r", a.t_r),
                ("a_max", a.a_max),
                ("w_o", a.w_o),
                ("a_plan_acc", a.a_plan_acc),
                ("a_plan_dec", a.a_plan_dec),
            ];
            for (k, v) in fields {
                if let Some(v) = v {
                    assumptions.set(k, v)?;
                }
            }
        }
        Ok(Scenario {
            name: self.name.clone(),
            route_length: self.route.length,
            posted,
            ego: EgoVehicle {
                width: self.ego.width,
                length: self.ego.length,
                x_sens: self.ego.x_sens,
                y_sens: self.ego.y_sens,
            },
            parked: self
                .parked
                .iter()
                .map(|p| ParkedVehicle {
                    s_front: p.s_front,
                    length: p.length,
                    d_lat: p.d_lat,
                    width: p.width,
                })
                .collect(),
            assumptions,
        })
    }

    /// Fully explicit document: SI numbers, all assumption fields, no preset.
    pub fn from_scenario(s: &Scenario<f64>) -> Self {
        let a = &s.assumptions;
        Self {
            name: s.name.clone(),
            route: RouteDoc {
                length: s.route_length,
                posted_limit: PostedLimitDoc::Segments(
                    s.posted
                        .segments()
                        .iter()
                        .map(|g| SegmentDoc {
                            from: g.from,
                            speed: SpeedValue::Mps(g.speed),
                        })
                        .collect(),
                ),
            },
            ego: EgoDoc {
                width: s.ego.width,
                length: s.ego.length,
                x_sens: s.ego.x_sens,
                y_sens: s.ego.y_sens,
            },
            parked: s
                .parked
                .iter()
                .map(|p| ParkedDoc {
                    s_front: p.s_front,
                    length: p.length,
                    d_lat: p.d_lat,
                    width: p.width,
                })
                .collect(),
            preset: None,
            assumptions: Some(AssumptionsDoc {
                v_o: Some(a.v_o),
                t_r: Some(a.t_r),
                a_max: Some(a.a_max),
                w_o: Some(a.w_o),
                a_plan_acc: Some(a.a_plan_acc),
                a_plan_dec: Some(a.a_plan_dec),
            }),
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(json: &str) -> Result<Scenario<f64>, ScenarioFileError> {
    let doc: ScenarioDoc = serde_json::from_str(json)?;
    Ok(doc.to_scenario()?.validate()?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario<f64>, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn to_json(s: &Scenario<f64>) -> String {
    serde_json::to_string_pretty(&ScenarioDoc::from_scenario(s)).expect("scenario serializes")
}
