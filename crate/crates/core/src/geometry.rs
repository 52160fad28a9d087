//! Planar geometry primitives: the local equirectangular projection and
//! point/ring distance tests that realize the stop-to-area buffer method.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Scalar, EARTH_RADIUS_FEET};

/// A point in the local planar frame, in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(String),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(String),
    #[error("coordinate ({0}, {1}) more than 1 degree from projection origin")]
    TooFarFromOrigin(String, String),
}

fn deg_to_rad<T: Scalar>(deg: T) -> T {
    deg * T::from_f64_const(std::f64::consts::PI / 180.0)
}

fn rad_to_deg<T: Scalar>(rad: T) -> T {
    rad * T::from_f64_const(180.0 / std::f64::consts::PI)
}

/// Project WGS84 degrees onto the local planar frame (feet), equirectangular
/// about `origin = (lat0, lon0)`. Only valid at regional scale: inputs more
/// than one degree from the origin are rejected.
pub fn project<T: Scalar>(lat: T, lon: T, origin: (T, T)) -> Result<Point<T>, ProjectionError> {
    let (lat0, lon0) = origin;
    let ninety = T::from_f64_const(90.0);
    let one_eighty = T::from_f64_const(180.0);
    if lat.abs() > ninety || !lat.is_finite() {
        return Err(ProjectionError::LatitudeOutOfRange(format!("{lat}")));
    }
    if lon.abs() > one_eighty || !lon.is_finite() {
        return Err(ProjectionError::LongitudeOutOfRange(format!("{lon}")));
    }
    if (lat - lat0).abs() > T::one() || (lon - lon0).abs() > T::one() {
        return Err(ProjectionError::TooFarFromOrigin(
            format!("{lat}"),
            format!("{lon}"),
        ));
    }
    let radius = T::from_f64_const(EARTH_RADIUS_FEET);
    let x = deg_to_rad(lon - lon0) * deg_to_rad(lat0).cos() * radius;
    let y = deg_to_rad(lat - lat0) * radius;
    Ok(Point::new(x, y))
}

/// Inverse of [`project`]; round-trips within 1e-6 ft at regional scale.
pub fn unproject<T: Scalar>(p: Point<T>, origin: (T, T)) -> (T, T) {
    let (lat0, lon0) = origin;
    let radius = T::from_f64_const(EARTH_RADIUS_FEET);
    let lat = lat0 + rad_to_deg(p.y / radius);
    let lon = lon0 + rad_to_deg(p.x / (radius * deg_to_rad(lat0).cos()));
    (lat, lon)
}

/// Minimum distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> T {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == T::zero() {
        return p.distance(&a);
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq;
    let t = t.max(T::zero()).min(T::one());
    let proj = Point::new(a.x + t * dx, a.y + t * dy);
    p.distance(&proj)
}

/// Even-odd parity of `p` against a set of rings (exterior rings plus holes).
/// Rings are stored closed (first point repeated last).
pub fn point_in_rings<T: Scalar>(p: Point<T>, rings: &[Vec<Point<T>>]) -> bool {
    let mut inside = false;
    for ring in rings {
        for seg in ring.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Minimum distance from `p` to any ring segment; zero when `p` lies on a ring.
pub fn distance_to_rings<T: Scalar>(p: Point<T>, rings: &[Vec<Point<T>>]) -> T {
    let mut best = T::infinity();
    for ring in rings {
        for seg in ring.windows(2) {
            let d = point_segment_distance(p, seg[0], seg[1]);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Distance from `p` to the area enclosed by `rings` under the even-odd rule:
/// zero for interior and boundary points, otherwise the distance to the
/// nearest ring segment. A point inside a hole is outside the area.
pub fn point_rings_distance<T: Scalar>(p: Point<T>, rings: &[Vec<Point<T>>]) -> T {
    if point_in_rings(p, rings) {
        return T::zero();
    }
    distance_to_rings(p, rings)
}

/// Signed shoelace area of one closed ring (positive for counter-clockwise).
pub fn ring_signed_area<T: Scalar>(ring: &[Point<T>]) -> T {
    let two = T::from_f64_const(2.0);
    let mut acc = T::zero();
    for seg in ring.windows(2) {
        acc = acc + (seg[0].x * seg[1].y - seg[1].x * seg[0].y);
    }
    acc / two
}

/// Area centroid of a ring set with signed-area weighting, so conventionally
/// wound holes subtract. Falls back to the vertex mean for degenerate input.
pub fn rings_centroid<T: Scalar>(rings: &[Vec<Point<T>>]) -> Point<T> {
    let six = T::from_f64_const(6.0);
    let mut area_acc = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    for ring in rings {
        for seg in ring.windows(2) {
            let cross = seg[0].x * seg[1].y - seg[1].x * seg[0].y;
            cx = cx + (seg[0].x + seg[1].x) * cross;
            cy = cy + (seg[0].y + seg[1].y) * cross;
            area_acc = area_acc + cross;
        }
    }
    let area = area_acc / T::from_f64_const(2.0);
    if area.abs() > T::zero() {
        return Point::new(cx / (six * area), cy / (six * area));
    }
    let mut n = 0usize;
    let (mut sx, mut sy) = (T::zero(), T::zero());
    for ring in rings {
        for p in ring.iter().take(ring.len().saturating_sub(1)) {
            sx = sx + p.x;
            sy = sy + p.y;
            n += 1;
        }
    }
    let n = T::from_usize_const(n.max(1));
    Point::new(sx / n, sy / n)
}

/// True when two segments properly intersect or overlap; shared endpoints of
/// adjacent segments are handled by the caller.
fn segments_intersect<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> bool {
    fn orient<T: Scalar>(p: Point<T>, q: Point<T>, r: Point<T>) -> T {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    }
    fn on_segment<T: Scalar>(p: Point<T>, q: Point<T>, r: Point<T>) -> bool {
        q.x >= p.x.min(r.x) && q.x <= p.x.max(r.x) && q.y >= p.y.min(r.y) && q.y <= p.y.max(r.y)
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let zero = T::zero();
    if ((o1 > zero) != (o2 > zero) && o1 != zero && o2 != zero)
        && ((o3 > zero) != (o4 > zero) && o3 != zero && o4 != zero)
    {
        return true;
    }
    (o1 == zero && on_segment(a, c, b))
        || (o2 == zero && on_segment(a, d, b))
        || (o3 == zero && on_segment(c, a, d))
        || (o4 == zero && on_segment(c, b, d))
}

/// Self-intersection check for one closed ring: any two non-adjacent segments
/// touching makes the ring invalid.
pub fn ring_self_intersects<T: Scalar>(ring: &[Point<T>]) -> bool {
    let n = ring.len().saturating_sub(1); // number of segments
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent segments (and the first/last pair, adjacent on a ring)
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn closed_square(x0: f64, y0: f64, side: f64) -> Vec<Point<f64>> {
        vec![
            pt(x0, y0),
            pt(x0 + side, y0),
            pt(x0 + side, y0 + side),
            pt(x0, y0 + side),
            pt(x0, y0),
        ]
    }

    const ORIGIN: (f64, f64) = (42.36, -71.06);

    #[test]
    fn projection_is_identity_at_origin() {
        let p = project(42.36, -71.06, ORIGIN).unwrap();
        assert_eq!(p.x, 0.0);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn projection_one_hundredth_degree_north() {
        // 0.01 deg of latitude = 0.01 * pi/180 * R feet
        let p = project(42.37, -71.06, ORIGIN).unwrap();
        let expected = 0.01f64.to_radians() * EARTH_RADIUS_FEET;
        assert!((p.y - expected).abs() < 1e-6, "y = {}", p.y);
        assert!(p.x.abs() < 1e-9);
        assert!(
            (expected - 3648.0).abs() < 1.0,
            "expected ~3648 ft, got {expected}"
        );
    }

    #[test]
    fn projection_rejects_bad_latitude() {
        assert!(matches!(
            project(95.0, -71.06, ORIGIN),
            Err(ProjectionError::LatitudeOutOfRange(_))
        ));
    }

    #[test]
    fn projection_rejects_far_points() {
        assert!(matches!(
            project(44.0, -71.06, (42.36, -71.06)),
            Err(ProjectionError::TooFarFromOrigin(_, _))
        ));
    }

    #[test]
    fn projection_round_trips_under_a_microfoot() {
        let candidates = [
            (42.36, -71.06),
            (42.37, -71.05),
            (42.20, -71.30),
            (42.99, -70.80),
            (42.3601, -71.0589),
        ];
        for &(lat, lon) in &candidates {
            let p = project(lat, lon, ORIGIN).unwrap();
            let (lat2, lon2) = unproject(p, ORIGIN);
            let p2 = project(lat2, lon2, ORIGIN).unwrap();
            assert!((p.x - p2.x).abs() < 1e-6, "x drift at ({lat},{lon})");
            assert!((p.y - p2.y).abs() < 1e-6, "y drift at ({lat},{lon})");
        }
    }

    #[test]
    fn interior_point_distance_is_zero() {
        let rings = vec![closed_square(0.0, 0.0, 1000.0)];
        assert_eq!(point_rings_distance(pt(500.0, 500.0), &rings), 0.0);
    }

    #[test]
    fn vertex_point_distance_is_zero() {
        let rings = vec![closed_square(0.0, 0.0, 1000.0)];
        assert_eq!(point_rings_distance(pt(0.0, 0.0), &rings), 0.0);
    }

    #[test]
    fn exterior_point_distance_matches_hand_value() {
        // 300 ft east of the unit square's right edge
        let rings = vec![closed_square(0.0, 0.0, 1000.0)];
        assert_eq!(point_rings_distance(pt(1300.0, 500.0), &rings), 300.0);
    }

    #[test]
    fn hole_interior_counts_as_outside() {
        // 1000-ft square with a centered 200-ft hole; the hole's center is
        // 100 ft from the hole boundary.
        let rings = vec![
            closed_square(0.0, 0.0, 1000.0),
            closed_square(400.0, 400.0, 200.0),
        ];
        let d = point_rings_distance(pt(500.0, 500.0), &rings);
        assert_eq!(d, 100.0);
        // but a point between hole and outer boundary is inside
        assert_eq!(point_rings_distance(pt(200.0, 500.0), &rings), 0.0);
    }

    #[test]
    fn self_intersection_detected() {
        // bow-tie
        let ring = vec![
            pt(0.0, 0.0),
            pt(1.0, 1.0),
            pt(1.0, 0.0),
            pt(0.0, 1.0),
            pt(0.0, 0.0),
        ];
        assert!(ring_self_intersects(&ring));
        assert!(!ring_self_intersects(&closed_square(0.0, 0.0, 1.0)));
    }

    #[test]
    fn centroid_of_square_is_center() {
        let rings = vec![closed_square(0.0, 0.0, 1000.0)];
        let c = rings_centroid(&rings);
        assert!((c.x - 500.0).abs() < 1e-9);
        assert!((c.y - 500.0).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn projection_round_trip_property(
            dlat in -0.9f64..0.9,
            dlon in -0.9f64..0.9,
        ) {
            let (lat, lon) = (ORIGIN.0 + dlat, ORIGIN.1 + dlon);
            let p = project(lat, lon, ORIGIN).unwrap();
            let (lat2, lon2) = unproject(p, ORIGIN);
            let p2 = project(lat2, lon2, ORIGIN).unwrap();
            proptest::prop_assert!((p.x - p2.x).abs() < 1e-6);
            proptest::prop_assert!((p.y - p2.y).abs() < 1e-6);
        }

        #[test]
        fn segment_distance_never_exceeds_endpoint_distance(
            px in -1e4f64..1e4, py in -1e4f64..1e4,
            ax in -1e4f64..1e4, ay in -1e4f64..1e4,
            bx in -1e4f64..1e4, by in -1e4f64..1e4,
        ) {
            let (p, a, b) = (pt(px, py), pt(ax, ay), pt(bx, by));
            let d = point_segment_distance(p, a, b);
            proptest::prop_assert!(d <= p.distance(&a) + 1e-9);
            proptest::prop_assert!(d <= p.distance(&b) + 1e-9);
            proptest::prop_assert!(d >= 0.0);
        }
    }

    #[test]
    fn geometry_is_generic_over_f32() {
        let rings = vec![vec![
            Point::new(0.0f32, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(0.0, 10.0),
            Point::new(0.0, 0.0),
        ]];
        assert_eq!(point_rings_distance(Point::new(5.0f32, 5.0), &rings), 0.0);
        assert_eq!(point_rings_distance(Point::new(13.0f32, 5.0), &rings), 3.0);
    }
}
