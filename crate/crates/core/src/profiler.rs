//! Drivable velocity profile under the dynamic limit, and summary metrics.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::limiter::LimitSample;
use crate::model::{AssumptionSet, Scenario};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample<T> {
    pub s: T,
    pub v_lim: T,
    /// Cap the planner actually honours at this sample (the windowed limit floor).
    pub v_cap: T,
    pub v: T,
    pub t: T,
}

/// Piecewise constant-acceleration profile: `v²` is linear in `s` inside each cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedProfile<T> {
    pub samples: Vec<ProfileSample<T>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("empty limit grid")]
    EmptyGrid,
    #[error("entry speed {requested} m/s exceeds the feasible maximum {max} m/s")]
    InfeasibleEntry { requested: f64, max: f64 },
    #[error("limit reaches zero at s = {s} m; the route cannot be completed")]
    Stall { s: f64 },
}

/// Highest entry speed from which every later cap can still be met braking at `a_plan_dec`.
pub fn max_entry_speed<T: Scalar>(limits: &[LimitSample<T>], assumptions: &AssumptionSet<T>) -> T {
    backward(limits, assumptions)
        .first()
        .map_or(T::zero(), |v2| v2.sqrt())
}

fn backward<T: Scalar>(limits: &[LimitSample<T>], a: &AssumptionSet<T>) -> Vec<T> {
    let mut v2: Vec<T> = limits.iter().map(|x| x.v_floor * x.v_floor).collect();
    for i in (0..v2.len().saturating_sub(1)).rev() {
        let ds = limits[i + 1].s0 - limits[i].s0;
        v2[i] = v2[i].min(v2[i + 1] + T::two() * a.a_plan_dec * ds);
    }
    v2
}

/// Plans the pointwise-maximal profile below the limit floor under the planning
/// acceleration bounds. Without `v_entry` the vehicle enters at the limit at `s = 0`,
/// or lower if that would make a later cap unreachable.
pub fn plan_profile<T: Scalar>(
    limits: &[LimitSample<T>],
    assumptions: &AssumptionSet<T>,
    v_entry: Option<T>,
) -> Result<SpeedProfile<T>, ProfileError> {
    if limits.is_empty() {
        return Err(ProfileError::EmptyGrid);
    }
    if let Some(x) = limits.iter().find(|x| x.v_floor <= T::zero()) {
        return Err(ProfileError::Stall { s: x.s0.as_f64() });
    }
    let mut v2 = backward(limits, assumptions);
    let max = v2[0].sqrt();
    let entry = match v_entry {
        Some(v) if v > max * (T::one() + T::lit(1e-12)) => {
            return Err(ProfileError::InfeasibleEntry {
                requested: v.as_f64(),
                max: max.as_f64(),
            })
        }
        Some(v) => v.max(T::zero()).min(max),
        None => limits[0].v_lim.min(max),
    };
    v2[0] = entry * entry;
    for i in 1..v2.len() {
        let ds = limits[i].s0 - limits[i - 1].s0;
        v2[i] = v2[i].min(v2[i - 1] + T::two() * assumptions.a_plan_acc * ds);
    }

    let mut samples = Vec::with_capacity(limits.len());
    let mut t = T::zero();
    for (i, x) in limits.iter().enumerate() {
        let v = v2[i].sqrt();
        if i > 0 {
            let prev: &ProfileSample<T> = &samples[i - 1];
            t = t + cell_time(x.s0 - prev.s, prev.v, v);
        }
        samples.push(ProfileSample {
            s: x.s0,
            v_lim: x.v_lim,
            v_cap: x.v_floor,
            v,
            t,
        });
    }
    Ok(SpeedProfile { samples })
}

/// Time to cover `ds` at constant acceleration from `v0` to `v1`.
fn cell_time<T: Scalar>(ds: T, v0: T, v1: T) -> T {
    if ds <= T::zero() {
        return T::zero();
    }
    T::two() * ds / (v0 + v1)
}

impl<T: Scalar> SpeedProfile<T> {
    pub fn travel_time(&self) -> T {
        self.samples.last().map_or(T::zero(), |x| x.t)
    }

    pub fn start(&self) -> T {
        self.samples.first().map_or(T::zero(), |x| x.s)
    }

    pub fn end(&self) -> T {
        self.samples.last().map_or(T::zero(), |x| x.s)
    }

    /// Index `i` of the cell `[s_i, s_{i+1}]` containing `s`.
    fn cell_of(&self, s: T) -> usize {
        let n = self.samples.len();
        if n < 2 {
            return 0;
        }
        let k = self.samples.partition_point(|x| x.s <= s);
        k.clamp(1, n - 1) - 1
    }

    pub fn speed_at(&self, s: T) -> T {
        let n = self.samples.len();
        if n == 0 {
            return T::zero();
        }
        if n == 1 || s <= self.start() {
            return self.samples[0].v;
        }
        if s >= self.end() {
            return self.samples[n - 1].v;
        }
        let i = self.cell_of(s);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let f = (s - a.s) / (b.s - a.s);
        (a.v * a.v + (b.v * b.v - a.v * a.v) * f).max(T::zero()).sqrt()
    }

    /// Time at which the profile reaches `s` (exact within a cell).
    pub fn time_at(&self, s: T) -> T {
        if self.samples.len() < 2 || s <= self.start() {
            return T::zero();
        }
        if s >= self.end() {
            return self.travel_time();
        }
        let i = self.cell_of(s);
        let a = &self.samples[i];
        a.t + cell_time(s - a.s, a.v, self.speed_at(s))
    }

    /// Position and speed at time `t` (clamped to the profile's span).
    pub fn position_at_time(&self, t: T) -> (T, T) {
        let n = self.samples.len();
        if n == 0 {
            return (T::zero(), T::zero());
        }
        if t <= T::zero() {
            return (self.samples[0].s, self.samples[0].v);
        }
        if n == 1 || t >= self.travel_time() {
            return (self.samples[n - 1].s, self.samples[n - 1].v);
        }
        let k = self.samples.partition_point(|x| x.t <= t).clamp(1, n - 1) - 1;
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let ds = b.s - a.s;
        let acc = (b.v * b.v - a.v * a.v) / (T::two() * ds);
        let tau = t - a.t;
        let s = (a.s + a.v * tau + T::half() * acc * tau * tau).clamp(a.s, b.s);
        let v = (a.v + acc * tau).clamp(a.v.min(b.v), a.v.max(b.v));
        (s, v)
    }

    /// Where the profile is `dt` after passing `s`.
    pub fn advance(&self, s: T, dt: T) -> (T, T) {
        self.position_at_time(self.time_at(s) + dt)
    }

    /// Writes `s_m,v_lim_mps,v_mps,t_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s_m", "v_lim_mps", "v_mps", "t_s"])?;
        for x in &self.samples {
            w.write_record([x.s.to_string(), x.v_lim.to_string(), x.v.to_string(), x.t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics<T> {
    /// Lowest limit the planner had to respect, m/s.
    pub min_limit: T,
    pub avg_speed_route: T,
    /// Average speed alongside parked vehicles; `None` when there are none.
    pub avg_speed_passing: Option<T>,
    /// The same, per parked vehicle.
    pub avg_speed_passing_each: Vec<T>,
    pub travel_time: T,
}

pub fn metrics<T: Scalar>(profile: &SpeedProfile<T>, scenario: &Scenario<T>) -> Metrics<T> {
    let min_limit = profile
        .samples
        .iter()
        .map(|x| x.v_cap)
        .fold(T::infinity(), |a, b| a.min(b));
    let travel_time = profile.travel_time();
    let mut each = Vec::with_capacity(scenario.parked.len());
    let (mut len, mut time) = (T::zero(), T::zero());
    for p in &scenario.parked {
        let dt = profile.time_at(p.s_front) - profile.time_at(p.s_rear());
        each.push(p.length / dt);
        len = len + p.length;
        time = time + dt;
    }
    Metrics {
        min_limit,
        avg_speed_route: (profile.end() - profile.start()) / travel_time,
        avg_speed_passing: if scenario.parked.is_empty() {
            None
        } else {
            Some(len / time)
        },
        avg_speed_passing_each: each,
        travel_time,
    }
}

impl<T: Scalar> Metrics<T> {
    /// Key-value text block, one `key: value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("min_limit_mps: {}\n", self.min_limit));
        s.push_str(&format!("avg_speed_route_mps: {}\n", self.avg_speed_route));
        match self.avg_speed_passing {
            Some(v) => s.push_str(&format!("avg_speed_passing_mps: {v}\n")),
            None => s.push_str("avg_speed_passing_mps: -\n"),
        }
        for (m, v) in self.avg_speed_passing_each.iter().enumerate() {
            s.push_str(&format!("avg_speed_passing_{m}_mps: {v}\n"));
        }
        s.push_str(&format!("travel_time_s: {}\n", self.travel_time));
        s
    }
}
