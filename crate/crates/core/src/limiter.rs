//! Relevance condition, speed supremum, and the combined dynamic limit along the route.

use std::fmt;
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::model::Scenario;
use crate::occlusion::{conflict_point, d_o_from_delta};
use crate::scalar::Scalar;

/// Highest speed from which the ego still stops within `delta_s` after reacting for
/// `t_r` at constant speed and then braking at `a_max`.
///
/// Evaluated as `2·a·Δs / (sqrt(t_R²a² + 2aΔs) + t_R·a)`, which is algebraically
/// the textbook form but does not cancel catastrophically for small `Δs`.
pub fn v_sup<T: Scalar>(delta_s: T, t_r: T, a_max: T) -> T {
    if delta_s <= T::zero() {
        return T::zero();
    }
    let ta = t_r * a_max;
    let num = T::two() * a_max * delta_s;
    num / ((ta * ta + num).sqrt() + ta)
}

/// Whether a pedestrian hidden `d_o` away could reach the conflict point before an
/// ego at constant `v_ego` covers the remaining `delta_s`.
pub fn is_relevant<T: Scalar>(d_o: T, delta_s: T, v_ego: T, v_o: T) -> bool {
    if delta_s <= T::zero() || !d_o.is_finite() {
        return false;
    }
    d_o / v_o <= delta_s / v_ego
}

/// What sets the limit at a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    Posted,
    Occlusion(usize),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Posted => f.write_str("posted"),
            Binding::Occlusion(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for Binding {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSample<T> {
    pub s0: T,
    /// Combined limit at exactly `s0`.
    pub v_lim: T,
    /// Infimum of the combined limit between the neighbouring grid points. A profile
    /// kept below this at every sample stays below the limit between samples too.
    pub v_floor: T,
    pub binding: Binding,
}

/// Limit imposed by one occlusion with `delta_s` remaining, or `None` when it does
/// not constrain the speed there.
pub fn occlusion_limit<T: Scalar>(scenario: &Scenario<T>, index: usize, delta_s: T) -> Option<T> {
    let a = &scenario.assumptions;
    let d_o = d_o_from_delta(delta_s, scenario.parked[index].d_lat, &scenario.ego, a.w_o);
    let v = v_sup(delta_s, a.t_r, a.a_max);
    if is_relevant(d_o, delta_s, v, a.v_o) {
        Some(v)
    } else {
        None
    }
}

/// Combined limit at ego position `s0`.
pub fn limit_at<T: Scalar>(s0: T, scenario: &Scenario<T>) -> (T, Binding) {
    let mut best = (scenario.posted.at(s0), Binding::Posted);
    for (m, p) in scenario.parked.iter().enumerate() {
        let delta_s = conflict_point(p, scenario.assumptions.w_o) - s0;
        if let Some(v) = occlusion_limit(scenario, m, delta_s) {
            if v < best.0 {
                best = (v, Binding::Occlusion(m));
            }
        }
    }
    best
}

const FLOOR_PROBES: usize = 8;
const BISECT_STEPS: usize = 80;

/// Infimum of one occlusion's limit over ego positions `[a, b]`.
///
/// The limit is `v_sup(Δs)` wherever the occlusion is relevant at that speed and
/// unconstrained elsewhere. `v_sup` grows with `Δs`, so the infimum sits at the
/// smallest constrained `Δs` in the window. Probes locate the first constrained
/// point, bisection refines the regime boundary.
fn occlusion_floor<T: Scalar>(scenario: &Scenario<T>, index: usize, a: T, b: T) -> Option<T> {
    let s_c = conflict_point(&scenario.parked[index], scenario.assumptions.w_o);
    let hi = s_c - a;
    if hi <= T::zero() {
        return None;
    }
    let lo = (s_c - b).max(T::zero());
    let on = |d: T| occlusion_limit(scenario, index, d).is_some();
    let n = T::lit(FLOOR_PROBES as f64);
    let mut prev = lo;
    if on(lo) && lo > T::zero() {
        return occlusion_limit(scenario, index, lo);
    }
    for k in 1..=FLOOR_PROBES {
        let d = lo + (hi - lo) * T::lit(k as f64) / n;
        if on(d) {
            let (mut off, mut onp) = (prev, d);
            for _ in 0..BISECT_STEPS {
                let mid = (off + onp) * T::half();
                if mid <= off || mid >= onp {
                    break;
                }
                if on(mid) {
                    onp = mid;
                } else {
                    off = mid;
                }
            }
            // Just past the boundary the limit approaches v_sup(off) from above.
            return Some(v_sup(off, scenario.assumptions.t_r, scenario.assumptions.a_max));
        }
        prev = d;
    }
    None
}

/// Lowest combined limit anywhere on `[a, b]`.
pub fn floor_over<T: Scalar>(scenario: &Scenario<T>, a: T, b: T) -> T {
    let mut m = scenario.posted.min_over(a, b);
    for k in 0..scenario.parked.len() {
        if let Some(v) = occlusion_floor(scenario, k, a, b) {
            m = m.min(v);
        }
    }
    m
}

/// Grid `{0, ds, 2ds, …}` up to and including the route end.
pub fn grid<T: Scalar>(route_length: T, ds: T) -> Vec<T> {
    let n = (route_length / ds - T::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
    (0..=n)
        .map(|i| (T::lit(i as f64) * ds).min(route_length))
        .collect()
}

/// Samples the dynamic limit on the route grid with spacing `ds`.
pub fn limit_profile<T: Scalar>(scenario: &Scenario<T>, ds: T) -> Vec<LimitSample<T>> {
    let s = grid(scenario.route_length, ds);
    let n = s.len();
    (0..n)
        .map(|i| {
            let (v_lim, binding) = limit_at(s[i], scenario);
            let a = s[i.saturating_sub(1)];
            let b = s[(i + 1).min(n - 1)];
            LimitSample {
                s0: s[i],
                v_lim,
                v_floor: floor_over(scenario, a, b).min(v_lim),
                binding,
            }
        })
        .collect()
}

/// Writes `s_m,v_lim_mps,binding`, one row per sample.
pub fn write_limits_csv<T: Scalar, W: Write>(out: W, samples: &[LimitSample<T>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s_m", "v_lim_mps", "binding"])?;
    for x in samples {
        w.write_record([x.s0.to_string(), x.v_lim.to_string(), x.binding.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AssumptionSet, EgoVehicle, ParkedVehicle, Preset, PostedLimit};
    use proptest::prelude::*;

    /// Largest v with `t_r·v + v²/(2a) ≤ Δs`, found by bisection.
    fn v_sup_oracle(delta_s: f64, t_r: f64, a: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0e4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if t_r * mid + mid * mid / (2.0 * a) <= delta_s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn single_rv() -> Scenario<f64> {
        Scenario {
            name: "single".into(),
            route_length: 150.0,
            posted: PostedLimit::constant(50.0 / 3.6),
            ego: EgoVehicle {
                width: 2.0,
                length: 4.5,
                x_sens: 0.0,
                y_sens: 0.35,
            },
            parked: vec![ParkedVehicle::new(100.0, 8.5, 1.0)],
            assumptions: AssumptionSet::preset(Preset::Example),
        }
    }

    #[test]
    fn v_sup_examples() {
        let v = v_sup(20.0, 1.0, 6.5);
        assert!((v - (302.25f64.sqrt() - 6.5)).abs() < 1e-12);
        assert!((v - 10.885_338_650_713_71).abs() < 1e-9);
        assert!((v - v_sup_oracle(20.0, 1.0, 6.5)).abs() < 1e-9);
        assert_eq!(v_sup(0.0, 1.0, 6.5), 0.0);
        assert!((v_sup(10.0, 0.0, 6.5) - 130f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn relevance_examples() {
        assert!(is_relevant(1.6, 10.0, 5.0, 1.6));
        assert!(!is_relevant(f64::INFINITY, 10.0, 5.0, 1.6));
        assert!(!is_relevant(1.6, 0.0, 5.0, 1.6));
        assert!(!is_relevant(1.6, 10.0, 20.0, 1.6));
    }

    #[test]
    fn far_from_occlusions_is_posted() {
        let sc = single_rv();
        let (v, b) = limit_at(0.0, &sc);
        assert_eq!(v, 50.0 / 3.6);
        assert_eq!(b, Binding::Posted);
        let (v, b) = limit_at(120.0, &sc);
        assert_eq!((v, b), (50.0 / 3.6, Binding::Posted));
    }

    #[test]
    fn dips_near_the_front_line_and_recovers() {
        let sc = single_rv();
        let samples = limit_profile(&sc, 0.1);
        let min = samples.iter().map(|x| x.v_lim).fold(f64::INFINITY, f64::min);
        assert!(min < 1.0);
        let last_dip = samples.iter().rev().find(|x| x.binding != Binding::Posted).unwrap();
        assert!(last_dip.s0 < 100.0);
        assert!(samples.iter().all(|x| x.v_lim > 0.0 && x.v_floor <= x.v_lim));
    }

    #[test]
    fn empty_scenario_is_constant() {
        let sc = single_rv().without_parked();
        let samples = limit_profile(&sc, 0.5);
        assert!(samples.iter().all(|x| x.v_lim == 50.0 / 3.6 && x.v_floor == x.v_lim));
    }

    #[test]
    fn grid_covers_both_ends() {
        let g = grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = grid(140.0, 0.1);
        assert_eq!(g.len(), 1401);
        assert_eq!(*g.last().unwrap(), 140.0);
    }

    #[test]
    fn floor_bounds_dense_samples() {
        let sc = single_rv();
        let samples = limit_profile(&sc, 0.5);
        for w in samples.windows(2) {
            for k in 0..=50 {
                let s = w[0].s0 + (w[1].s0 - w[0].s0) * k as f64 / 50.0;
                let v = limit_at(s, &sc).0;
                assert!(w[0].v_floor <= v + 1e-9 && w[1].v_floor <= v + 1e-9);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let sc = single_rv();
        let samples = limit_profile(&sc, 75.0);
        let mut buf = Vec::new();
        write_limits_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("s_m,v_lim_mps,binding"));
        assert_eq!(lines.count(), 3);
    }

    proptest! {
        #[test]
        fn inverts_stopping_distance(ds in 0.0..500.0f64, t_r in 0.0..3.0f64, a in 0.1..12.0f64) {
            let v = v_sup(ds, t_r, a);
            prop_assert!((t_r * v + v * v / (2.0 * a) - ds).abs() <= 1e-9);
            prop_assert!((v - v_sup_oracle(ds, t_r, a)).abs() <= 1e-7);
        }

        #[test]
        fn v_sup_monotone(
            ds in 0.01..200.0f64, t_r in 0.0..3.0f64, a in 0.1..12.0f64,
            e in 0.01..5.0f64,
        ) {
            let v = v_sup(ds, t_r, a);
            prop_assert!(v_sup(ds + e, t_r, a) > v);
            prop_assert!(v_sup(ds, t_r, a + e) > v);
            prop_assert!(v_sup(ds, t_r + e, a) <= v);
        }

        #[test]
        fn removing_a_vehicle_never_lowers_the_limit(
            fronts in proptest::collection::vec(10.0..140.0f64, 1..4),
            d_lat in 0.0..2.0f64, y in 0.0..1.0f64, drop in 0usize..4, s0 in 0.0..150.0f64,
        ) {
            let mut sc = single_rv();
            sc.ego.y_sens = y;
            let mut f = fronts.clone();
            f.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sc.parked = f.iter().map(|&x| ParkedVehicle::new(x, 5.0, d_lat)).collect();
            let full = limit_at(s0, &sc).0;
            let mut fewer = sc.clone();
            fewer.parked.remove(drop % sc.parked.len());
            prop_assert!(limit_at(s0, &fewer).0 >= full);
        }

        #[test]
        fn self_consistent(s0 in 0.0..150.0f64, d_lat in 0.0..2.0f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
            let mut sc = single_rv();
            sc.parked[0].d_lat = d_lat;
            sc.ego.x_sens = x;
            sc.ego.y_sens = y;
            let (v, b) = limit_at(s0, &sc);
            prop_assert!(v > 0.0 && v <= sc.posted.at(s0));
            if let Binding::Occlusion(m) = b {
                let a = &sc.assumptions;
                let ds = conflict_point(&sc.parked[m], a.w_o) - s0;
                let d_o = d_o_from_delta(ds, d_lat, &sc.ego, a.w_o);
                prop_assert!(!is_relevant(d_o, ds, v, a.v_o) || v <= v_sup(ds, a.t_r, a.a_max));
            }
        }
    }

    #[test]
    fn f32_limit() {
        let sc = single_rv().cast::<f32>();
        let (v, _) = limit_at(99.0f32, &sc);
        let (w, _) = limit_at(99.0, &single_rv());
        assert!((v as f64 - w).abs() < 1e-3);
    }
}
