//! Longitudinal ego simulation and the adversarial pedestrian-emergence sweep.

use std::fmt;
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::model::{AssumptionSet, Scenario};
use crate::occlusion::{conflict_point, d_o_closed_form};
use crate::profiler::SpeedProfile;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode<T> {
    Tracking,
    /// Reaction window after a detection; speed is held until `until`.
    Reacting { until: T },
    EmergencyBraking,
    Stopped,
}

impl<T> Mode<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Tracking => "tracking",
            Mode::Reacting { .. } => "reacting",
            Mode::EmergencyBraking => "emergency_braking",
            Mode::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EgoState<T> {
    pub t: T,
    pub s: T,
    pub v: T,
    pub mode: Mode<T>,
}

/// Advances the ego by `dt`.
///
/// Tracking follows the profile exactly. Reacting holds the current speed and hands
/// over to emergency braking when the window ends, even mid-step. Emergency braking
/// uses the exact constant-deceleration update and stops at `v = 0`.
pub fn step<T: Scalar>(state: EgoState<T>, profile: &SpeedProfile<T>, a_max: T, dt: T) -> EgoState<T> {
    let z = T::zero();
    if dt <= z {
        return state;
    }
    match state.mode {
        Mode::Tracking => {
            let (s, v) = profile.advance(state.s, dt);
            EgoState {
                t: state.t + dt,
                s,
                v,
                mode: Mode::Tracking,
            }
        }
        Mode::Reacting { until } => {
            let hold = (until - state.t).max(z);
            if dt <= hold {
                return EgoState {
                    t: state.t + dt,
                    s: state.s + state.v * dt,
                    ..state
                };
            }
            let held = EgoState {
                t: until.max(state.t),
                s: state.s + state.v * hold,
                v: state.v,
                mode: Mode::EmergencyBraking,
            };
            step(held, profile, a_max, dt - hold)
        }
        Mode::EmergencyBraking => {
            let t_stop = state.v / a_max;
            if state.v <= z || dt >= t_stop {
                EgoState {
                    t: state.t + dt,
                    s: state.s + state.v * state.v / (T::two() * a_max),
                    v: z,
                    mode: Mode::Stopped,
                }
            } else {
                EgoState {
                    t: state.t + dt,
                    s: state.s + state.v * dt - T::half() * a_max * dt * dt,
                    v: state.v - a_max * dt,
                    mode: Mode::EmergencyBraking,
                }
            }
        }
        Mode::Stopped => EgoState {
            t: state.t + dt,
            v: z,
            ..state
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace<T> {
    pub states: Vec<EgoState<T>>,
    pub travel_time: T,
}

impl<T: Scalar> Trace<T> {
    /// Writes `t_s,s_m,v_mps,mode`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "s_m", "v_mps", "mode"])?;
        for x in &self.states {
            w.write_record([x.t.to_string(), x.s.to_string(), x.v.to_string(), x.mode.name().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Drives the whole route along `profile` with fixed steps; the last step is
/// shortened so the log ends exactly at the route end.
pub fn simulate<T: Scalar>(scenario: &Scenario<T>, profile: &SpeedProfile<T>, dt: T) -> Trace<T> {
    let end = profile.end();
    let total = profile.travel_time();
    let mut state = EgoState {
        t: T::zero(),
        s: profile.start(),
        v: profile.speed_at(profile.start()),
        mode: Mode::Tracking,
    };
    let mut states = vec![state];
    while state.s < end && state.t < total {
        let h = dt.min(total - state.t);
        state = step(state, profile, scenario.assumptions.a_max, h);
        states.push(state);
    }
    Trace {
        travel_time: state.t,
        states,
    }
}

/// Time for the ego to reach `s_c` holding speed `v`; `None` once it is at or past it.
pub fn time_to_conflict<T: Scalar>(s: T, v: T, s_c: T) -> Option<T> {
    if s >= s_c {
        None
    } else if v <= T::zero() {
        Some(T::infinity())
    } else {
        Some((s_c - s) / v)
    }
}

/// Whether a pedestrian `d_o` away at speed `v_o` reaches the conflict point no later
/// than the ego, which needs `t_c` (`None` when it has already passed).
pub fn pedestrian_can_reach<T: Scalar>(d_o: T, v_o: T, t_c: Option<T>) -> bool {
    match t_c {
        None => false,
        Some(t_c) => d_o / v_o <= t_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    PassedFirst,
    StoppedShort,
    FrontalCollision,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::PassedFirst => "ego_passed_first",
            Outcome::StoppedShort => "ego_stopped_short",
            Outcome::FrontalCollision => "frontal_collision",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig<T> {
    /// Spacing of emergence times, s.
    pub emergence_step: T,
    pub dt: T,
    /// What pedestrians and the ego actually do. The profile was planned with the
    /// scenario's assumptions; a differing world probes the guarantee's limits.
    pub world: AssumptionSet<T>,
    /// Actual pedestrian speeds as fractions of `world.v_o`.
    pub speed_factors: Vec<T>,
    /// Extra depth beyond the closest hiding spot at emergence, m.
    pub depth_offsets: Vec<T>,
}

impl<T: Scalar> SweepConfig<T> {
    pub fn new(world: AssumptionSet<T>, emergence_step: T, dt: T) -> Self {
        Self {
            emergence_step,
            dt,
            world,
            speed_factors: [1.0, 0.75, 0.5, 0.25].iter().map(|&x| T::lit(x)).collect(),
            depth_offsets: [0.0, 0.5, 1.0].iter().map(|&x| T::lit(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmergenceEvent<T> {
    pub m: usize,
    pub t_emerge: T,
    /// Pedestrian's distance to the corridor when it starts moving.
    pub d_o: T,
    pub ped_speed: T,
    pub depth_offset: T,
    /// When it leaves the shadow and is seen.
    pub t_detect: T,
    pub t_arrival: T,
    pub braked: bool,
    pub outcome: Outcome,
    /// Distance from the stop point to the conflict point; negative on collision and
    /// absent when the ego passed first.
    pub stop_margin: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport<T> {
    pub events: usize,
    pub collisions: usize,
    pub passed_first: usize,
    pub stopped_short: usize,
    pub worst_stop_margin: Option<T>,
    pub config: SweepConfig<T>,
    #[serde(skip)]
    pub detail: Vec<EmergenceEvent<T>>,
}

const TIME_TOL: f64 = 1e-9;
const BISECT_STEPS: usize = 64;

/// Runs the emergence sweep for every occlusion of `scenario` against `profile`.
///
/// Emergence times run on a fixed grid for as long as the ego is upstream of the
/// conflict point. Each pedestrian starts at or behind the closest hiding spot and
/// heads straight for the corridor; it is seen the moment it leaves the shadow.
pub fn adversary_sweep<T: Scalar>(
    scenario: &Scenario<T>,
    profile: &SpeedProfile<T>,
    config: &SweepConfig<T>,
) -> SweepReport<T> {
    let mut detail = Vec::new();
    for m in 0..scenario.parked.len() {
        let s_c = conflict_point(&scenario.parked[m], config.world.w_o);
        let mut k = 0usize;
        loop {
            let t_e = T::lit(k as f64) * config.emergence_step;
            let (s_e, _) = profile.position_at_time(t_e);
            if s_e >= s_c || t_e > profile.travel_time() {
                break;
            }
            for &f in &config.speed_factors {
                for &off in &config.depth_offsets {
                    detail.push(run_event(scenario, profile, config, m, t_e, f, off));
                }
            }
            k += 1;
        }
    }
    summarize(detail, config.clone())
}

fn summarize<T: Scalar>(detail: Vec<EmergenceEvent<T>>, config: SweepConfig<T>) -> SweepReport<T> {
    let count = |o| detail.iter().filter(|e| e.outcome == o).count();
    let worst = detail
        .iter()
        .filter_map(|e| e.stop_margin)
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))));
    SweepReport {
        events: detail.len(),
        collisions: count(Outcome::FrontalCollision),
        passed_first: count(Outcome::PassedFirst),
        stopped_short: count(Outcome::StoppedShort),
        worst_stop_margin: worst,
        config,
        detail,
    }
}

fn run_event<T: Scalar>(
    scenario: &Scenario<T>,
    profile: &SpeedProfile<T>,
    config: &SweepConfig<T>,
    m: usize,
    t_e: T,
    factor: T,
    offset: T,
) -> EmergenceEvent<T> {
    let world = &config.world;
    let plan = &scenario.assumptions;
    let vehicle = &scenario.parked[m];
    let s_c = conflict_point(vehicle, world.w_o);
    let hidden = |s: T| d_o_closed_form(s, vehicle, &scenario.ego, world.w_o);
    let v_ped = world.v_o * factor;
    let d0 = hidden(profile.position_at_time(t_e).0) + offset;
    let depth = |t: T| d0 - v_ped * (t - t_e);
    let t_arrival = t_e + d0 / v_ped;

    // Seen once its depth drops to the edge of the shadow, which recedes as the ego closes in.
    let t_detect = if offset <= T::zero() {
        t_e
    } else {
        let (mut lo, mut hi) = (t_e, t_arrival);
        for _ in 0..BISECT_STEPS {
            let mid = (lo + hi) * T::half();
            if depth(mid) <= hidden(profile.position_at_time(mid).0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let (s_d, v_d) = profile.position_at_time(t_detect);
    let remaining = depth(t_detect).max(T::zero());
    let braked = pedestrian_can_reach(remaining, plan.v_o, time_to_conflict(s_d, v_d, s_c));

    let mut state = EgoState {
        t: t_detect,
        s: s_d,
        v: v_d,
        mode: if braked {
            Mode::Reacting {
                until: t_detect + world.t_r,
            }
        } else {
            Mode::Tracking
        },
    };
    // (time, speed) when the front reaches s_c, if it does.
    let mut crossing = None;
    if s_d >= s_c {
        crossing = Some((t_detect, v_d));
    } else if !braked {
        if profile.end() >= s_c {
            crossing = Some((profile.time_at(s_c), profile.speed_at(s_c)));
        }
    } else {
        while state.mode != Mode::Stopped {
            let next = step(state, profile, world.a_max, config.dt);
            if next.s >= s_c {
                let (mut lo, mut hi) = (T::zero(), config.dt);
                for _ in 0..BISECT_STEPS {
                    let mid = (lo + hi) * T::half();
                    if step(state, profile, world.a_max, mid).s >= s_c {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let x = step(state, profile, world.a_max, hi);
                crossing = Some((x.t, x.v));
                break;
            }
            state = next;
        }
    }

    let tol = T::lit(TIME_TOL);
    let (outcome, stop_margin) = match crossing {
        Some((t_x, _)) if t_x < t_arrival + tol => (Outcome::PassedFirst, None),
        Some((_, v_x)) if v_x > tol => (
            Outcome::FrontalCollision,
            Some(-(v_x * v_x) / (T::two() * world.a_max)),
        ),
        Some(_) => (Outcome::StoppedShort, Some(T::zero())),
        None => (Outcome::StoppedShort, Some(s_c - state.s)),
    };
    EmergenceEvent {
        m,
        t_emerge: t_e,
        d_o: d0,
        ped_speed: v_ped,
        depth_offset: offset,
        t_detect,
        t_arrival,
        braked,
        outcome,
        stop_margin,
    }
}

impl<T: Scalar> SweepReport<T> {
    pub fn is_safe(&self) -> bool {
        self.collisions == 0
    }

    /// Writes `m,t_emerge,outcome,stop_margin_m,ped_speed_mps,depth_offset_m`.
    pub fn write_events_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "t_emerge", "outcome", "stop_margin_m", "ped_speed_mps", "depth_offset_m"])?;
        for e in &self.detail {
            w.write_record([
                e.m.to_string(),
                e.t_emerge.to_string(),
                e.outcome.to_string(),
                e.stop_margin.map_or_else(String::new, |x| x.to_string()),
                e.ped_speed.to_string(),
                e.depth_offset.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Short human-readable verdict.
    pub fn summary(&self) -> String {
        let worst = self
            .worst_stop_margin
            .map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        format!(
            "events: {}\ncollisions: {}\npassed_first: {}\nstopped_short: {}\nworst_stop_margin_m: {}\nverdict: {}\n",
            self.events,
            self.collisions,
            self.passed_first,
            self.stopped_short,
            worst,
            if self.is_safe() { "safe" } else { "COLLISIONS" }
        )
    }
}
