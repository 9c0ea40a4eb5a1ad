//! Planar geometry: points, poses, the rectangular robot footprint, ray casting
//! against wall segments and the exact footprint/wall overlap test.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point or vector in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}

/// Robot pose in the world frame. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Maps a point from the body frame into the world frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotate(self.theta)
    }

    /// Maps a world point into the body frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        (world - self.position()).rotate(-self.theta)
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from(v: [f64; 3]) -> Self {
        Pose2D::new(v[0], v[1], v[2])
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// A wall segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Vec2; 2]", into = "[Vec2; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn direction(&self) -> Vec2 {
        self.b - self.a
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.a + self.direction() * s
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let d = self.direction();
        let len2 = d.dot(d);
        let s = if len2 > 0.0 {
            ((p - self.a).dot(d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.point_at(s).distance(p)
    }
}

impl From<[Vec2; 2]> for Segment {
    fn from(v: [Vec2; 2]) -> Self {
        Segment::new(v[0], v[1])
    }
}

impl From<Segment> for [Vec2; 2] {
    fn from(s: Segment) -> Self {
        [s.a, s.b]
    }
}

/// Rectangular robot body with a lidar mounted on its longitudinal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// Body length along the heading, meters.
    pub length: f64,
    /// Body width, meters.
    pub width: f64,
    /// Signed lidar position relative to the body center, along the heading.
    pub lidar_offset: f64,
    /// Inflation applied on every side.
    pub safety_margin: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self {
            length: 0.84,
            width: 0.46,
            lidar_offset: 0.19,
            safety_margin: 0.05,
        }
    }
}

impl Footprint {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.length, self.width, self.lidar_offset, self.safety_margin]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("footprint values must be finite"));
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return Err(Error::config("footprint length and width must be positive"));
        }
        if self.safety_margin < 0.0 {
            return Err(Error::config("safety margin must be non-negative"));
        }
        if self.lidar_offset.abs() >= self.length / 2.0 {
            return Err(Error::config("lidar must be mounted inside the body"));
        }
        Ok(())
    }

    /// Half extents of the inflated rectangle: (along heading, across heading).
    pub fn inflated_half_extents(&self) -> (f64, f64) {
        (
            self.length / 2.0 + self.safety_margin,
            self.width / 2.0 + self.safety_margin,
        )
    }

    /// Inflated rectangle expressed in the lidar frame.
    pub fn safety_rect(&self) -> LidarRect {
        let (hx, hy) = self.inflated_half_extents();
        LidarRect {
            front: hx - self.lidar_offset,
            back: hx + self.lidar_offset,
            half_width: hy,
        }
    }

    pub fn lidar_origin(&self, pose: &Pose2D) -> Vec2 {
        pose.transform_point(Vec2::new(self.lidar_offset, 0.0))
    }

    pub fn circumscribed_radius(&self) -> f64 {
        let (hx, hy) = self.inflated_half_extents();
        hx.hypot(hy)
    }
}

/// Axis-aligned rectangle around the lidar origin: x in [-back, front],
/// y in [-half_width, half_width]. All three extents are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarRect {
    pub front: f64,
    pub back: f64,
    pub half_width: f64,
}

impl LidarRect {
    /// Distance from the lidar origin to the rectangle boundary along `angle`
    /// (radians, lidar frame, 0 = forward).
    pub fn boundary_distance(&self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        let mut t = f64::INFINITY;
        if c > 0.0 {
            t = t.min(self.front / c);
        } else if c < 0.0 {
            t = t.min(-self.back / c);
        }
        if s > 0.0 {
            t = t.min(self.half_width / s);
        } else if s < 0.0 {
            t = t.min(-self.half_width / s);
        }
        t
    }

    /// The four corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.front, self.half_width),
            Vec2::new(-self.back, self.half_width),
            Vec2::new(-self.back, -self.half_width),
            Vec2::new(self.front, -self.half_width),
        ]
    }
}

const PARALLEL_EPS: f64 = 1e-12;

/// Distance along the ray to the segment, if hit.
pub fn ray_segment_intersection(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.direction();
    let denom = dir.cross(e);
    let ao = seg.a - origin;
    if denom.abs() < PARALLEL_EPS {
        // Parallel; only a collinear overlap can hit.
        if ao.cross(dir).abs() > PARALLEL_EPS {
            return None;
        }
        let ta = ao.dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        if hi < 0.0 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Distance from `origin` to the first wall along `angle`, capped at `max_range`.
pub fn cast_ray(walls: &[Segment], origin: Vec2, angle: f64, max_range: f64) -> f64 {
    let dir = Vec2::from_angle(angle);
    walls
        .iter()
        .filter_map(|w| ray_segment_intersection(origin, dir, w))
        .fold(max_range, f64::min)
}

/// Lidar scan of `n_rays` evenly spaced rays, ray 0 straight ahead and indices
/// increasing counter-clockwise.
pub fn scan(
    walls: &[Segment],
    pose: &Pose2D,
    footprint: &Footprint,
    n_rays: usize,
    max_range: f64,
) -> Vec<f64> {
    let origin = footprint.lidar_origin(pose);
    let inc = 2.0 * PI / n_rays as f64;
    (0..n_rays)
        .map(|i| cast_ray(walls, origin, pose.theta + inc * i as f64, max_range).clamp(0.0, max_range))
        .collect()
}

/// Scan restricted to a subset of ray indices.
pub fn scan_indices(
    walls: &[Segment],
    pose: &Pose2D,
    footprint: &Footprint,
    n_rays: usize,
    indices: &[usize],
    max_range: f64,
) -> Vec<f64> {
    let origin = footprint.lidar_origin(pose);
    let inc = 2.0 * PI / n_rays as f64;
    indices
        .iter()
        .map(|&i| cast_ray(walls, origin, pose.theta + inc * i as f64, max_range).clamp(0.0, max_range))
        .collect()
}

/// Inflated body rectangle in the world frame, counter-clockwise starting at
/// the rear-right corner.
pub fn footprint_polygon(pose: &Pose2D, footprint: &Footprint) -> [Vec2; 4] {
    let (hx, hy) = footprint.inflated_half_extents();
    [
        Vec2::new(-hx, -hy),
        Vec2::new(hx, -hy),
        Vec2::new(hx, hy),
        Vec2::new(-hx, hy),
    ]
    .map(|p| pose.transform_point(p))
}

/// Shoelace area of a simple polygon (positive when counter-clockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment/segment intersection; touching counts.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Point inside or on a convex counter-clockwise polygon.
pub fn point_in_convex(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| orientation(poly[i], poly[(i + 1) % n], p) >= 0.0)
}

/// Ground-truth contact test: the inflated footprint rectangle intersects or
/// touches any wall segment.
pub fn oracle_collides(walls: &[Segment], pose: &Pose2D, footprint: &Footprint) -> bool {
    let poly = footprint_polygon(pose, footprint);
    walls.iter().any(|w| segment_overlaps_polygon(w, &poly))
}

pub fn segment_overlaps_polygon(seg: &Segment, poly: &[Vec2; 4]) -> bool {
    if point_in_convex(poly, seg.a) || point_in_convex(poly, seg.b) {
        return true;
    }
    (0..4).any(|i| segments_intersect(seg.a, seg.b, poly[i], poly[(i + 1) % 4]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn wall(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Vec2::new(ax, ay), Vec2::new(bx, by))
    }

    fn square_room(half: f64) -> Vec<Segment> {
        vec![
            wall(-half, -half, half, -half),
            wall(half, -half, half, half),
            wall(half, half, -half, half),
            wall(-half, half, -half, -half),
        ]
    }

    #[test]
    fn normalize_angle_range() {
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(0.5), 0.5);
        assert_abs_diff_eq!(normalize_angle(-0.5 - 2.0 * PI), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn ray_axis_aligned_hit() {
        let walls = [wall(2.0, -1.0, 2.0, 1.0)];
        assert_abs_diff_eq!(cast_ray(&walls, Vec2::ZERO, 0.0, 6.0), 2.0);
        assert_eq!(cast_ray(&walls, Vec2::ZERO, PI, 6.0), 6.0);
    }

    #[test]
    fn ray_diagonal_hit_matches_parametric_solution() {
        let walls = [wall(2.0, -5.0, 2.0, 5.0)];
        let d = cast_ray(&walls, Vec2::ZERO, FRAC_PI_4, 6.0);
        // Independent: x = t cos(a) = 2.
        let expected = 2.0 / FRAC_PI_4.cos();
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ray_collinear_wall() {
        let walls = [wall(1.0, 0.0, 3.0, 0.0)];
        assert_abs_diff_eq!(cast_ray(&walls, Vec2::ZERO, 0.0, 6.0), 1.0);
    }

    #[test]
    fn open_area_scan_is_max_range() {
        let fp = Footprint::default();
        let walls = [wall(100.0, 100.0, 101.0, 100.0)];
        let ranges = scan(&walls, &Pose2D::default(), &fp, 32, 6.0);
        assert!(ranges.iter().all(|&r| r == 6.0));
    }

    #[test]
    fn square_room_scan_symmetry() {
        let fp = Footprint {
            lidar_offset: 0.0,
            ..Footprint::default()
        };
        let ranges = scan(&square_room(2.0), &Pose2D::default(), &fp, 32, 6.0);
        for i in [0, 8, 16, 24] {
            assert_abs_diff_eq!(ranges[i], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn polygon_axis_aligned_and_rotated() {
        let fp = Footprint {
            length: 1.0,
            width: 0.6,
            lidar_offset: 0.0,
            safety_margin: 0.0,
        };
        let p = footprint_polygon(&Pose2D::default(), &fp);
        for c in p {
            assert_abs_diff_eq!(c.x.abs(), 0.5);
            assert_abs_diff_eq!(c.y.abs(), 0.3);
        }
        let p = footprint_polygon(&Pose2D::new(0.0, 0.0, FRAC_PI_2), &fp);
        for c in p {
            assert_abs_diff_eq!(c.x.abs(), 0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(c.y.abs(), 0.5, epsilon = 1e-12);
        }
        assert!(polygon_area(&p) > 0.0);
    }

    #[test]
    fn polygon_rigid_transform_oracle() {
        let fp = Footprint {
            length: 0.8,
            width: 0.5,
            lidar_offset: 0.0,
            safety_margin: 0.0,
        };
        let pose = Pose2D::new(1.0, 2.0, FRAC_PI_6);
        let poly = footprint_polygon(&pose, &fp);
        let (c, s) = (FRAC_PI_6.cos(), FRAC_PI_6.sin());
        let local = [(-0.4, -0.25), (0.4, -0.25), (0.4, 0.25), (-0.4, 0.25)];
        for (p, (lx, ly)) in poly.iter().zip(local) {
            assert_abs_diff_eq!(p.x, 1.0 + c * lx - s * ly, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, 2.0 + s * lx + c * ly, epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_room_center_and_touching() {
        let fp = Footprint {
            length: 1.0,
            width: 0.6,
            lidar_offset: 0.0,
            safety_margin: 0.0,
        };
        let room = square_room(2.0);
        assert!(!oracle_collides(&room, &Pose2D::default(), &fp));
        // Front edge exactly on the x = 2 wall.
        assert!(oracle_collides(&room, &Pose2D::new(1.5, 0.0, 0.0), &fp));
        assert!(!oracle_collides(&room, &Pose2D::new(1.49, 0.0, 0.0), &fp));
    }

    #[test]
    fn oracle_detects_wall_fully_inside() {
        let fp = Footprint::default();
        let walls = [wall(-0.05, 0.0, 0.05, 0.0)];
        assert!(oracle_collides(&walls, &Pose2D::default(), &fp));
    }

    #[test]
    fn lidar_rect_boundary_distance() {
        let r = LidarRect {
            front: 1.0,
            back: 2.0,
            half_width: 0.5,
        };
        assert_abs_diff_eq!(r.boundary_distance(0.0), 1.0);
        assert_abs_diff_eq!(r.boundary_distance(PI), 2.0);
        assert_abs_diff_eq!(r.boundary_distance(FRAC_PI_2), 0.5);
        assert_abs_diff_eq!(r.boundary_distance(-FRAC_PI_2), 0.5);
        let corner = Vec2::new(1.0, 0.5);
        assert_abs_diff_eq!(r.boundary_distance(corner.angle()), corner.norm(), epsilon = 1e-12);
    }

    #[test]
    fn footprint_validation() {
        assert!(Footprint::default().validate().is_ok());
        let bad = Footprint {
            lidar_offset: 0.5,
            ..Footprint::default()
        };
        assert!(bad.validate().is_err());
        let bad = Footprint {
            width: 0.0,
            ..Footprint::default()
        };
        assert!(bad.validate().is_err());
    }
}
