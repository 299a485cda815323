//! Where a pedestrian of width `w_o` could be fully hidden next to a parked vehicle,
//! and how far that hiding spot is from the ego corridor.
//!
//! Two independent routes compute the same distance: a closed form derived from
//! similar triangles, and a ray cast through an explicit shadow polygon.

use serde::Serialize;

use crate::model::{EgoVehicle, ParkedVehicle};
use crate::scalar::Scalar;
use crate::shadow::{shadow, Point2, Rect};

/// Derived geometry of one occlusion at a given ego position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OcclusionView<T> {
    /// Index of the generating parked vehicle.
    pub index: usize,
    /// Ego-front arclength at which it would meet an emerging pedestrian.
    pub s_c: T,
    /// Remaining distance `s_c - s0`.
    pub delta_s: T,
    /// Minimum distance of a fully hidden pedestrian to the corridor boundary
    /// (infinite when no such hiding spot exists).
    pub d_o: T,
    /// Front-center of the closest fully hidden pedestrian.
    pub p_o: Point2<T>,
    /// Where that pedestrian would step onto the corridor boundary.
    pub p_c: Point2<T>,
}

/// Conflict point: the parked vehicle's front line shifted by half a pedestrian width.
pub fn conflict_point<T: Scalar>(vehicle: &ParkedVehicle<T>, w_o: T) -> T {
    vehicle.s_front + w_o * T::half()
}

/// Effective sensor origin when the ego front is at `s0`.
///
/// The horizontal distance from this origin to the vehicle's front line is
/// `delta_s - x_sens`, which is the distance the closed form divides by.
pub fn sensor_origin<T: Scalar>(s0: T, ego: &EgoVehicle<T>, w_o: T) -> Point2<T> {
    Point2::new(s0 - w_o * T::half() + ego.x_sens, ego.y_sens)
}

/// Closed-form minimum distance of a fully obscured pedestrian.
pub fn d_o_closed_form<T: Scalar>(
    s0: T,
    vehicle: &ParkedVehicle<T>,
    ego: &EgoVehicle<T>,
    w_o: T,
) -> T {
    let delta_s = conflict_point(vehicle, w_o) - s0;
    d_o_from_delta(delta_s, vehicle.d_lat, ego, w_o)
}

/// Same as [`d_o_closed_form`] but parameterized by the remaining distance directly.
pub fn d_o_from_delta<T: Scalar>(delta_s: T, d_lat: T, ego: &EgoVehicle<T>, w_o: T) -> T {
    let base = delta_s - ego.x_sens;
    if base <= T::zero() {
        return T::infinity();
    }
    d_lat + (d_lat + ego.y_sens) / base * w_o
}

/// The parked vehicle's footprint.
pub fn footprint<T: Scalar>(vehicle: &ParkedVehicle<T>) -> Rect<T> {
    Rect {
        x_min: vehicle.s_rear(),
        x_max: vehicle.s_front,
        y_min: -vehicle.d_lat - vehicle.width,
        y_max: -vehicle.d_lat,
    }
}

const WINDOW_MARGIN: f64 = 1.0e4;

/// Ray-cast minimum distance of a fully obscured pedestrian.
///
/// The pedestrian is a segment of width `w_o` along the route, standing in the gap
/// beyond the vehicle's front line. For candidate placements its two endpoints are
/// dropped vertically onto the shadow polygon; the deeper entry point decides how
/// far from the corridor that placement must be.
pub fn d_o_raycast<T: Scalar>(s0: T, vehicle: &ParkedVehicle<T>, ego: &EgoVehicle<T>, w_o: T) -> T {
    let sensor = sensor_origin(s0, ego, w_o);
    // Level with or past the front line the sensor sees straight into the gap.
    if sensor.x >= vehicle.s_front {
        return T::infinity();
    }
    let rect = footprint(vehicle);
    let margin = T::lit(WINDOW_MARGIN);
    let window = Rect {
        x_min: sensor.x.min(rect.x_min) - margin,
        x_max: rect.x_max + margin,
        y_min: rect.y_min - margin,
        y_max: T::zero(),
    };
    let region = match shadow(sensor, &rect, &window) {
        Ok(r) => r,
        Err(_) => return T::infinity(),
    };
    let depth_at = |x: T| region.top_at(x).map(|y| -y);

    let mut best = T::infinity();
    let steps = 8;
    for k in 0..=steps {
        let near = vehicle.s_front + w_o * T::lit(k as f64 / 2.0);
        let far = near + w_o;
        if let (Some(a), Some(b)) = (depth_at(near), depth_at(far)) {
            best = best.min(a.max(b));
        }
    }
    best
}

/// Full occlusion view for vehicle `index` with the ego front at `s0`.
pub fn view<T: Scalar>(
    s0: T,
    index: usize,
    vehicle: &ParkedVehicle<T>,
    ego: &EgoVehicle<T>,
    w_o: T,
) -> OcclusionView<T> {
    let s_c = conflict_point(vehicle, w_o);
    let d_o = d_o_closed_form(s0, vehicle, ego, w_o);
    OcclusionView {
        index,
        s_c,
        delta_s: s_c - s0,
        d_o,
        p_o: Point2::new(s_c, -d_o),
        p_c: Point2::new(s_c, T::zero()),
    }
}
