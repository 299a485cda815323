//! Planar shadow geometry: the region a rectangle hides from a point sensor.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    fn norm2(self) -> T {
        self.dot(self)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Scalar> Rect<T> {
    pub fn corners(&self) -> [Point2<T>; 4] {
        [
            Point2::new(self.x_min, self.y_min),
            Point2::new(self.x_max, self.y_min),
            Point2::new(self.x_max, self.y_max),
            Point2::new(self.x_min, self.y_max),
        ]
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ShadowError {
    #[error("sensor lies inside or on the occluding rectangle")]
    SensorInside,
}

/// Convex polygon (counter-clockwise) covering everything behind the occluder as
/// seen from the sensor, clipped to a window. It also contains the far part of the
/// occluder itself; points outside the occluder are exactly the hidden ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowRegion<T> {
    pub vertices: Vec<Point2<T>>,
    /// The two corners whose rays bound the shadow, clockwise-most first.
    pub silhouette: [Point2<T>; 2],
}

impl<T: Scalar> ShadowRegion<T> {
    /// Topmost boundary point on the vertical line `x`, if the line meets the region.
    pub fn top_at(&self, x: T) -> Option<T> {
        let n = self.vertices.len();
        let mut best: Option<T> = None;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (lo, hi) = if a.x <= b.x { (a, b) } else { (b, a) };
            if x < lo.x || x > hi.x {
                continue;
            }
            let y = if hi.x == lo.x {
                lo.y.max(hi.y)
            } else {
                lo.y + (hi.y - lo.y) * (x - lo.x) / (hi.x - lo.x)
            };
            best = Some(best.map_or(y, |b| b.max(y)));
        }
        best
    }

    /// Signed area (positive for counter-clockwise vertex order).
    pub fn area(&self) -> T {
        let n = self.vertices.len();
        let mut acc = T::zero();
        for i in 0..n {
            acc = acc + self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        acc * T::half()
    }

    pub fn contains(&self, p: Point2<T>, tol: T) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b.sub(a);
            e.cross(p.sub(a)) >= -tol * e.norm2().sqrt()
        })
    }
}

/// Computes the shadow of `occluder` seen from `sensor`, clipped to `window`.
pub fn shadow<T: Scalar>(
    sensor: Point2<T>,
    occluder: &Rect<T>,
    window: &Rect<T>,
) -> Result<ShadowRegion<T>, ShadowError> {
    if occluder.contains(sensor) {
        return Err(ShadowError::SensorInside);
    }
    // Angular extremes of the corners. The sensor is outside a convex body, so the
    // corner directions span less than pi and cross products order them.
    let corners = occluder.corners();
    let (mut c_cw, mut c_ccw) = (corners[0], corners[0]);
    for &c in &corners[1..] {
        let d = c.sub(sensor);
        // Collinear corners tie; the nearer one bounds the silhouette.
        let pick = |cur: Point2<T>, sign: T| {
            let e = cur.sub(sensor);
            let x = sign * e.cross(d);
            x > T::zero() || (x == T::zero() && e.dot(d) > T::zero() && d.norm2() < e.norm2())
        };
        if pick(c_cw, -T::one()) {
            c_cw = c;
        }
        if pick(c_ccw, T::one()) {
            c_ccw = c;
        }
    }

    let mut poly = window.corners().to_vec();
    // Inside the cone: left of sensor->c_cw, right of sensor->c_ccw.
    poly = clip(&poly, sensor, c_cw.sub(sensor));
    poly = clip(&poly, c_ccw, sensor.sub(c_ccw));
    // Beyond the chord between the silhouette corners.
    poly = clip(&poly, c_ccw, c_cw.sub(c_ccw));
    Ok(ShadowRegion {
        vertices: poly,
        silhouette: [c_cw, c_ccw],
    })
}

/// Sutherland–Hodgman: keeps the part of `poly` left of the directed line through `p` along `dir`.
fn clip<T: Scalar>(poly: &[Point2<T>], p: Point2<T>, dir: Point2<T>) -> Vec<Point2<T>> {
    let side = |q: Point2<T>| dir.cross(q.sub(p));
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (sa, sb) = (side(a), side(b));
        if sa >= T::zero() {
            out.push(a);
        }
        if (sa >= T::zero()) != (sb >= T::zero()) {
            let t = sa / (sa - sb);
            out.push(Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big_window() -> Rect<f64> {
        Rect {
            x_min: -100.0,
            x_max: 100.0,
            y_min: -100.0,
            y_max: 100.0,
        }
    }

    fn unit() -> Rect<f64> {
        Rect {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    #[test]
    fn sensor_inside_is_an_error() {
        let r = unit();
        assert_eq!(
            shadow(Point2::new(0.5, 0.5), &r, &big_window()).unwrap_err(),
            ShadowError::SensorInside
        );
        assert!(shadow(Point2::new(1.0, 0.5), &r, &big_window()).is_err());
    }

    #[test]
    fn unit_square_similar_triangles() {
        // Sensor at (-1, 2): silhouette corners are (0,0) and (1,1).
        // Ray through (1,1) has slope -1/2: at x = 3 it sits at y = 0.
        // Ray through (0,0) has slope -2: at x = 1 it sits at y = -2.
        let s = shadow(Point2::new(-1.0, 2.0), &unit(), &big_window()).unwrap();
        let mut sil = s.silhouette.to_vec();
        sil.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        assert_eq!(sil, vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)]);
        assert!((s.top_at(3.0).unwrap() - 0.0).abs() < 1e-12);
        assert!((s.top_at(5.0).unwrap() + 1.0).abs() < 1e-12);
        assert!(s.contains(Point2::new(1.0, -1.9), 1e-12));
        assert!(!s.contains(Point2::new(1.0, -2.1), 1e-12));
        assert!(!s.contains(Point2::new(-1.0, 2.0), 1e-12));
        assert!(s.area() > 0.0);
    }

    #[test]
    fn sensor_on_front_line_axis() {
        // Sensor on the extension of the edge x = 1: rays through the two near corners.
        let s = shadow(Point2::new(1.0, 3.0), &unit(), &big_window()).unwrap();
        let mut sil = s.silhouette.to_vec();
        sil.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        assert_eq!(sil, vec![Point2::new(0.0, 1.0), Point2::new(1.0, 1.0)]);
        // Nothing to the right of x = 1 is hidden.
        assert!(s.top_at(1.5).is_none());
        // Left bound: ray from (1,3) through (0,1), slope 2: at x = -1, y = -1.
        assert!((s.top_at(-1.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn distant_lateral_sensor_approaches_projection() {
        let s = shadow(Point2::new(0.5, 1.0e6), &unit(), &big_window()).unwrap();
        for x in [0.01, 0.5, 0.99] {
            assert!((s.top_at(x).unwrap() - 1.0).abs() < 1e-5);
        }
        assert!(s.top_at(1.01).is_none());
        assert!(s.top_at(-0.01).is_none());
    }
}
