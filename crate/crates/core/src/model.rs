//! Domain types: behavioral assumptions, the ego vehicle, parked vehicles and the
//! straight-route scenario that ties them together.
//!
//! Coordinates: the route is the x-axis and `s` is the arclength of the ego front.
//! The occlusion-side boundary of the ego driving corridor is the line `y = 0`;
//! parked vehicles sit below it, occupying `y ∈ [-d_lat - width, -d_lat]` and
//! `x ∈ [s_front - length, s_front]`. The ego travels towards `+x`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

/// Behavioral and physical assumptions the speed limit is derived from. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionSet<T> {
    /// Pedestrian speed, m/s.
    pub v_o: T,
    /// Reaction time until an actual braking response, s.
    pub t_r: T,
    /// Emergency deceleration magnitude, m/s².
    pub a_max: T,
    /// Assumed total human width, m.
    pub w_o: T,
    /// Acceleration bound used for normal profile tracking, m/s².
    pub a_plan_acc: T,
    /// Comfort deceleration bound used for normal profile tracking, m/s².
    pub a_plan_dec: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Literature-based example values.
    Example,
    /// Slow reaction, black-ice braking and sprinting pedestrians.
    Extreme,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown preset `{0}` (expected `example` or `extreme`)")]
    UnknownPreset(String),
    #[error("unknown assumption key `{0}`")]
    UnknownKey(String),
    #[error("malformed override `{0}` (expected key=value)")]
    MalformedOverride(String),
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Example, Preset::Extreme];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example => "example",
            Preset::Extreme => "extreme",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "example" => Ok(Preset::Example),
            "extreme" => Ok(Preset::Extreme),
            _ => Err(ModelError::UnknownPreset(s.to_string())),
        }
    }
}

/// Looks up a preset by name.
pub fn preset<T: Scalar>(name: &str) -> Result<AssumptionSet<T>, ModelError> {
    name.parse::<Preset>().map(AssumptionSet::preset)
}

impl<T: Scalar> AssumptionSet<T> {
    pub fn preset(p: Preset) -> Self {
        let (v_o, t_r, a_max, w_o, a_plan_acc, a_plan_dec) = match p {
            Preset::Example => (1.6, 1.0, 6.5, 0.5, 2.0, 3.0),
            Preset::Extreme => (10.0, 2.0, 1.0, 0.3, 2.0, 1.0),
        };
        Self {
            v_o: T::lit(v_o),
            t_r: T::lit(t_r),
            a_max: T::lit(a_max),
            w_o: T::lit(w_o),
            a_plan_acc: T::lit(a_plan_acc),
            a_plan_dec: T::lit(a_plan_dec),
        }
    }

    /// Half the assumed human width: longitudinal offset between the front line of a
    /// parked vehicle and the front-center of a pedestrian squeezed against it.
    pub fn xi(&self) -> T {
        self.w_o * T::half()
    }

    pub const KEYS: [&'static str; 6] = ["v_o", "t_r", "a_max", "w_o", "a_plan_acc", "a_plan_dec"];

    pub fn get(&self, key: &str) -> Result<T, ModelError> {
        Ok(match normalize_key(key).as_str() {
            "v_o" => self.v_o,
            "t_r" => self.t_r,
            "a_max" => self.a_max,
            "w_o" => self.w_o,
            "a_plan_acc" => self.a_plan_acc,
            "a_plan_dec" => self.a_plan_dec,
            _ => return Err(ModelError::UnknownKey(key.to_string())),
        })
    }

    /// Sets one field by name. Keys are case-insensitive (`v_O` and `v_o` are the same).
    pub fn set(&mut self, key: &str, value: T) -> Result<(), ModelError> {
        let slot = match normalize_key(key).as_str() {
            "v_o" => &mut self.v_o,
            "t_r" => &mut self.t_r,
            "a_max" => &mut self.a_max,
            "w_o" => &mut self.w_o,
            "a_plan_acc" => &mut self.a_plan_acc,
            "a_plan_dec" => &mut self.a_plan_dec,
            _ => return Err(ModelError::UnknownKey(key.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ModelError> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| ModelError::MalformedOverride(spec.to_string()))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| ModelError::MalformedOverride(spec.to_string()))?;
        self.set(k.trim(), T::lit(value))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let z = T::zero();
        check(&mut out, "assumptions.v_o", self.v_o > z, "must be positive");
        check(&mut out, "assumptions.t_r", self.t_r >= z, "must be non-negative");
        check(&mut out, "assumptions.a_max", self.a_max > z, "must be positive");
        check(&mut out, "assumptions.w_o", self.w_o >= z, "must be non-negative");
        check(&mut out, "assumptions.a_plan_acc", self.a_plan_acc > z, "must be positive");
        check(&mut out, "assumptions.a_plan_dec", self.a_plan_dec > z, "must be positive");
        check(
            &mut out,
            "assumptions.a_plan_dec",
            self.a_plan_dec <= self.a_max,
            "must not exceed a_max",
        );
        out
    }

    pub fn cast<U: Scalar>(&self) -> AssumptionSet<U> {
        AssumptionSet {
            v_o: cast(self.v_o),
            t_r: cast(self.t_r),
            a_max: cast(self.a_max),
            w_o: cast(self.w_o),
            a_plan_acc: cast(self.a_plan_acc),
            a_plan_dec: cast(self.a_plan_dec),
        }
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase()
}

fn cast<T: Scalar, U: Scalar>(x: T) -> U {
    U::lit(x.as_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EgoVehicle<T> {
    pub width: T,
    pub length: T,
    /// Longitudinal sensor offset. The effective sensor origin sits at
    /// `s - w_o/2 + x_sens`, so `x_sens = w_o/2` puts it level with the ego front.
    pub x_sens: T,
    /// Lateral sensor offset inboard from the corridor boundary.
    pub y_sens: T,
}

impl<T: Scalar> EgoVehicle<T> {
    pub fn cast<U: Scalar>(&self) -> EgoVehicle<U> {
        EgoVehicle {
            width: cast(self.width),
            length: cast(self.length),
            x_sens: cast(self.x_sens),
            y_sens: cast(self.y_sens),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParkedVehicle<T> {
    /// Arclength of the vehicle's front line.
    pub s_front: T,
    pub length: T,
    /// Lateral gap between the corridor boundary and the vehicle's near side.
    pub d_lat: T,
    pub width: T,
}

impl<T: Scalar> ParkedVehicle<T> {
    pub const DEFAULT_WIDTH: f64 = 2.5;

    pub fn new(s_front: T, length: T, d_lat: T) -> Self {
        Self {
            s_front,
            length,
            d_lat,
            width: T::lit(Self::DEFAULT_WIDTH),
        }
    }

    pub fn s_rear(&self) -> T {
        self.s_front - self.length
    }

    pub fn cast<U: Scalar>(&self) -> ParkedVehicle<U> {
        ParkedVehicle {
            s_front: cast(self.s_front),
            length: cast(self.length),
            d_lat: cast(self.d_lat),
            width: cast(self.width),
        }
    }
}

/// One constant-speed stretch of the posted limit, valid from `from` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSegment<T> {
    pub from: T,
    pub speed: T,
}

/// Piecewise-constant posted speed limit along the route.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostedLimit<T> {
    segments: Vec<LimitSegment<T>>,
}

impl<T: Scalar> PostedLimit<T> {
    pub fn constant(speed: T) -> Self {
        Self {
            segments: vec![LimitSegment {
                from: T::zero(),
                speed,
            }],
        }
    }

    /// Segments are kept sorted by `from`; the first one must start at 0 (checked by validation).
    pub fn from_segments(mut segments: Vec<LimitSegment<T>>) -> Self {
        segments.sort_by(|a, b| a.from.partial_cmp(&b.from).unwrap_or(std::cmp::Ordering::Equal));
        Self { segments }
    }

    pub fn segments(&self) -> &[LimitSegment<T>] {
        &self.segments
    }

    pub fn at(&self, s: T) -> T {
        let mut speed = self.segments.first().map(|g| g.speed).unwrap_or_else(T::infinity);
        for seg in &self.segments {
            if seg.from <= s {
                speed = seg.speed;
            } else {
                break;
            }
        }
        speed
    }

    /// Lowest posted speed anywhere on `[a, b]`.
    pub fn min_over(&self, a: T, b: T) -> T {
        let mut m = self.at(a);
        for seg in &self.segments {
            if seg.from > a && seg.from <= b {
                m = m.min(seg.speed);
            }
        }
        m
    }

    pub fn max(&self) -> T {
        self.segments
            .iter()
            .map(|g| g.speed)
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn cast<U: Scalar>(&self) -> PostedLimit<U> {
        PostedLimit {
            segments: self
                .segments
                .iter()
                .map(|g| LimitSegment {
                    from: cast(g.from),
                    speed: cast(g.speed),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario<T> {
    pub name: String,
    pub route_length: T,
    pub posted: PostedLimit<T>,
    pub ego: EgoVehicle<T>,
    /// Sorted by `s_front` after validation.
    pub parked: Vec<ParkedVehicle<T>>,
    pub assumptions: AssumptionSet<T>,
}

/// A single failed constraint, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario failed validation:{}", fmt_list(.0))]
pub struct ValidationError(pub Vec<Violation>);

fn fmt_list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("\n  - {x}")).collect()
}

fn check(out: &mut Vec<Violation>, field: &str, ok: bool, constraint: &str) {
    if !ok {
        out.push(Violation {
            field: field.to_string(),
            constraint: constraint.to_string(),
        });
    }
}

impl<T: Scalar> Scenario<T> {
    /// Checks every invariant; on success returns the scenario with parked vehicles sorted.
    pub fn validate(mut self) -> Result<Self, ValidationError> {
        self.parked
            .sort_by(|a, b| a.s_front.partial_cmp(&b.s_front).unwrap_or(std::cmp::Ordering::Equal));
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ValidationError(v))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let z = T::zero();
        let mut out = Vec::new();
        check(&mut out, "route.length", self.route_length > z, "empty route");
        let segs = self.posted.segments();
        check(&mut out, "route.posted_limit", !segs.is_empty(), "no posted limit");
        if let Some(first) = segs.first() {
            check(&mut out, "route.posted_limit[0].from", first.from == z, "must start at 0");
        }
        for (i, g) in segs.iter().enumerate() {
            check(
                &mut out,
                &format!("route.posted_limit[{i}].speed"),
                g.speed > z && g.speed.is_finite(),
                "must be positive",
            );
        }
        let e = &self.ego;
        check(&mut out, "ego.width", e.width > z, "negative dimension");
        check(&mut out, "ego.length", e.length > z, "negative dimension");
        check(&mut out, "ego.x_sens", e.x_sens >= z, "negative sensor offset");
        check(&mut out, "ego.y_sens", e.y_sens >= z, "negative sensor offset");
        for (i, p) in self.parked.iter().enumerate() {
            let f = |name: &str| format!("parked[{i}].{name}");
            check(&mut out, &f("length"), p.length > z, "negative dimension");
            check(&mut out, &f("width"), p.width > z, "negative dimension");
            check(&mut out, &f("d_lat"), p.d_lat >= z, "negative lateral gap");
            check(
                &mut out,
                &f("s_front"),
                p.s_rear() >= z && p.s_front <= self.route_length,
                "out of route",
            );
        }
        for (i, w) in self.parked.windows(2).enumerate() {
            check(
                &mut out,
                &format!("parked[{}]", i + 1),
                w[1].s_rear() >= w[0].s_front,
                "overlap",
            );
        }
        out.extend(self.assumptions.violations());
        out
    }

    pub fn cast<U: Scalar>(&self) -> Scenario<U> {
        Scenario {
            name: self.name.clone(),
            route_length: cast(self.route_length),
            posted: self.posted.cast(),
            ego: self.ego.cast(),
            parked: self.parked.iter().map(|p| p.cast()).collect(),
            assumptions: self.assumptions.cast(),
        }
    }

    /// The same scenario with no parked vehicles: the "no occlusion treatment" baseline.
    pub fn without_parked(&self) -> Self {
        Self {
            parked: Vec::new(),
            ..self.clone()
        }
    }
}

/// Free-function form of [`Scenario::validate`].
pub fn validate<T: Scalar>(scenario: Scenario<T>) -> Result<Scenario<T>, ValidationError> {
    scenario.validate()
}
