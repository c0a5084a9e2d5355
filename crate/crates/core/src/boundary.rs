//! Geometry of the superellipse table boundary `|x/a|^p + |y/b|^p = 1`.
//!
//! Points on the boundary are addressed by their polar angle `theta`, which is
//! not the arc length. The polar parametrisation is closed form because the
//! family is star-shaped about the origin:
//! `r(theta) = (|cos theta / a|^p + |sin theta / b|^p)^(-1/p)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use thiserror::Error;

use crate::vec2::Vec2;

/// Absolute tolerance of the arc-length quadrature.
pub const ARC_LENGTH_TOLERANCE: f64 = 1e-10;

/// Recursion cap of the adaptive Simpson rule.
const MAX_QUADRATURE_DEPTH: u32 = 40;

/// Levels of bisection performed before the error estimate is trusted.
const MIN_QUADRATURE_DEPTH: u32 = 5;

/// Gradients smaller than this are treated as vanishing.
const MIN_GRADIENT: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid boundary curve: {0}")]
    InvalidCurve(String),
    #[error("implicit gradient vanishes at ({x}, {y})")]
    ZeroGradient { x: f64, y: f64 },
    #[error("arc-length quadrature did not converge on [{theta_0}, {theta_1}]")]
    QuadratureFailure { theta_0: f64, theta_1: f64 },
}

/// The table boundary `|x/a|^p + |y/b|^p = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCurve {
    semi_axis_a: f64,
    semi_axis_b: f64,
    power_p: f64,
    perimeter: f64,
}

impl BoundaryCurve {
    /// Builds the curve and caches its perimeter.
    ///
    /// Powers in `(1, 2)` are accepted but give a boundary that is not twice
    /// differentiable on the axes; see [`BoundaryCurve::is_low_regularity`].
    pub fn new(semi_axis_a: f64, semi_axis_b: f64, power_p: f64) -> Result<Self, GeometryError> {
        if !(semi_axis_a.is_finite() && semi_axis_a > 0.0) {
            return Err(GeometryError::InvalidCurve(format!(
                "semi-axis a must be positive, got {semi_axis_a}"
            )));
        }
        if !(semi_axis_b.is_finite() && semi_axis_b > 0.0) {
            return Err(GeometryError::InvalidCurve(format!(
                "semi-axis b must be positive, got {semi_axis_b}"
            )));
        }
        if !(power_p.is_finite() && power_p > 1.0) {
            return Err(GeometryError::InvalidCurve(format!(
                "power p must exceed 1 for a strictly convex table, got {power_p}"
            )));
        }
        let mut curve = Self {
            semi_axis_a,
            semi_axis_b,
            power_p,
            perimeter: f64::NAN,
        };
        curve.perimeter = curve.arc_length_between(0.0, TAU)?;
        Ok(curve)
    }

    /// The circle of radius `radius` centered at the origin.
    pub fn circle(radius: f64) -> Result<Self, GeometryError> {
        Self::new(radius, radius, 2.0)
    }

    pub fn semi_axis_a(&self) -> f64 {
        self.semi_axis_a
    }

    pub fn semi_axis_b(&self) -> f64 {
        self.semi_axis_b
    }

    pub fn power_p(&self) -> f64 {
        self.power_p
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// True for `1 < p < 2`, where the boundary curvature is singular on the axes.
    pub fn is_low_regularity(&self) -> bool {
        self.power_p < 2.0
    }

    /// True if this is a circle (`a == b`, `p == 2`).
    pub fn is_circle(&self) -> bool {
        self.semi_axis_a == self.semi_axis_b && self.power_p == 2.0
    }

    /// `F(x, y) = |x/a|^p + |y/b|^p - 1`: negative inside, zero on the boundary.
    #[inline]
    pub fn implicit_value(&self, point: Vec2) -> f64 {
        abs_pow(point.x / self.semi_axis_a, self.power_p)
            + abs_pow(point.y / self.semi_axis_b, self.power_p)
            - 1.0
    }

    /// Gradient of [`implicit_value`](Self::implicit_value).
    #[inline]
    pub fn gradient(&self, point: Vec2) -> Vec2 {
        let p = self.power_p;
        let u = point.x / self.semi_axis_a;
        let w = point.y / self.semi_axis_b;
        Vec2::new(
            p * signed_pow(u, p - 1.0) / self.semi_axis_a,
            p * signed_pow(w, p - 1.0) / self.semi_axis_b,
        )
    }

    pub fn outward_normal(&self, point: Vec2) -> Result<Vec2, GeometryError> {
        let g = self.gradient(point);
        let norm = g.norm();
        if !(norm >= MIN_GRADIENT) {
            return Err(GeometryError::ZeroGradient {
                x: point.x,
                y: point.y,
            });
        }
        Ok(g * (1.0 / norm))
    }

    /// Unit tangent with the interior on the left.
    pub fn tangent_ccw(&self, point: Vec2) -> Result<Vec2, GeometryError> {
        self.outward_normal(point).map(Vec2::perp)
    }

    /// Radius of the boundary in direction `theta`.
    #[inline]
    pub fn radius_at(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.radius_from(c, s)
    }

    pub fn point_at_polar(&self, theta_pos: f64) -> Vec2 {
        let (s, c) = theta_pos.sin_cos();
        let r = self.radius_from(c, s);
        Vec2::new(r * c, r * s)
    }

    /// Polar angle of `point` normalized to `[0, 2 pi)`.
    pub fn polar_angle_of(&self, point: Vec2) -> f64 {
        normalize_angle(point.angle())
    }

    /// `|d Sigma / d theta|`, the arc-length density of the polar parametrisation.
    pub fn arc_length_density(&self, theta: f64) -> f64 {
        let p = self.power_p;
        let (s, c) = theta.sin_cos();
        let u = c / self.semi_axis_a;
        let w = s / self.semi_axis_b;
        let gauge = abs_pow(u, p) + abs_pow(w, p);
        let gauge_prime = p
            * (signed_pow(u, p - 1.0) * (-s / self.semi_axis_a)
                + signed_pow(w, p - 1.0) * (c / self.semi_axis_b));
        let r = gauge.powf(-1.0 / p);
        let r_prime = -r * gauge_prime / (p * gauge);
        r.hypot(r_prime)
    }

    /// Signed counterclockwise arc length from polar angle `theta_0` to `theta_1`.
    ///
    /// Angles are not wrapped: `arc_length_between(0, 2 pi)` is the perimeter
    /// and swapping the arguments flips the sign.
    pub fn arc_length_between(&self, theta_0: f64, theta_1: f64) -> Result<f64, GeometryError> {
        if theta_0 == theta_1 {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if theta_0 < theta_1 {
            (theta_0, theta_1, 1.0)
        } else {
            (theta_1, theta_0, -1.0)
        };
        // Split at the axes, where the density is not smooth for p < 2.
        let mut breaks = vec![lo];
        let mut k = (lo / FRAC_PI_2).floor() + 1.0;
        while k * FRAC_PI_2 < hi {
            breaks.push(k * FRAC_PI_2);
            k += 1.0;
        }
        breaks.push(hi);

        let pieces = (breaks.len() - 1) as f64;
        let density = |t: f64| self.arc_length_density(t);
        let mut total = 0.0;
        for pair in breaks.windows(2) {
            total += adaptive_simpson(&density, pair[0], pair[1], ARC_LENGTH_TOLERANCE / pieces)
                .ok_or(GeometryError::QuadratureFailure { theta_0, theta_1 })?;
        }
        Ok(sign * total)
    }

    /// `r = a / (|c|^p + |s a / b|^p)^(1/p)`, exact on the axes.
    #[inline]
    fn radius_from(&self, c: f64, s: f64) -> f64 {
        let p = self.power_p;
        let gauge = abs_pow(c, p) + abs_pow(s * self.semi_axis_a / self.semi_axis_b, p);
        let root = if p == 2.0 {
            gauge.sqrt()
        } else {
            gauge.powf(1.0 / p)
        };
        self.semi_axis_a / root
    }
}

/// `|x|^p` with the exact value 0 at `x = 0`.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p)
    }
}

/// `sign(x) |x|^q` with value 0 at `x = 0`.
#[inline]
fn signed_pow(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(q)
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_difference(delta: f64) -> f64 {
    let d = delta.rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_QUADRATURE_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol && depth + MIN_QUADRATURE_DEPTH <= MAX_QUADRATURE_DEPTH {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let child_tol = (0.5 * tol).max(4.0 * f64::EPSILON * whole.abs());
    let l = simpson_step(f, a, m, fa, flm, fm, left, child_tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, child_tol, depth - 1)?;
    Some(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ellipse() -> BoundaryCurve {
        BoundaryCurve::new(10.0, 8.0, 2.0).unwrap()
    }

    fn fd_normal(curve: &BoundaryCurve, q: Vec2, h: f64) -> Vec2 {
        let gx = (curve.implicit_value(q + Vec2::new(h, 0.0))
            - curve.implicit_value(q - Vec2::new(h, 0.0)))
            / (2.0 * h);
        let gy = (curve.implicit_value(q + Vec2::new(0.0, h))
            - curve.implicit_value(q - Vec2::new(0.0, h)))
            / (2.0 * h);
        Vec2::new(gx, gy).normalized()
    }

    fn polygon_length(curve: &BoundaryCurve, segments: usize) -> f64 {
        let mut prev = curve.point_at_polar(0.0);
        let mut total = 0.0;
        for k in 1..=segments {
            let q = curve.point_at_polar(TAU * k as f64 / segments as f64);
            total += (q - prev).norm();
            prev = q;
        }
        total
    }

    #[test]
    fn implicit_value_examples() {
        let c = ellipse();
        assert_eq!(c.implicit_value(Vec2::new(10.0, 0.0)), 0.0);
        assert_eq!(c.implicit_value(Vec2::new(0.0, 0.0)), -1.0);
        assert_eq!(c.implicit_value(Vec2::new(10.0, 8.0)), 1.0);
        let odd = BoundaryCurve::new(3.0, 5.0, 2.7).unwrap();
        assert_eq!(odd.implicit_value(Vec2::new(0.0, 0.0)), -1.0);
    }

    #[test]
    fn rejects_degenerate_curves() {
        assert!(BoundaryCurve::new(0.0, 1.0, 2.0).is_err());
        assert!(BoundaryCurve::new(1.0, -1.0, 2.0).is_err());
        assert!(BoundaryCurve::new(1.0, 1.0, 1.0).is_err());
        assert!(BoundaryCurve::new(1.0, 1.0, f64::NAN).is_err());
        assert!(BoundaryCurve::new(1.0, 1.0, 1.5)
            .unwrap()
            .is_low_regularity());
    }

    #[test]
    fn normal_and_tangent_on_axes() {
        let circle = BoundaryCurve::circle(10.0).unwrap();
        assert_eq!(
            circle.outward_normal(Vec2::new(10.0, 0.0)).unwrap(),
            Vec2::new(1.0, 0.0)
        );
        assert_eq!(
            circle.tangent_ccw(Vec2::new(10.0, 0.0)).unwrap(),
            Vec2::new(0.0, 1.0)
        );
        let c = ellipse();
        assert_eq!(
            c.outward_normal(Vec2::new(0.0, 8.0)).unwrap(),
            Vec2::new(0.0, 1.0)
        );
        assert_eq!(
            c.tangent_ccw(Vec2::new(0.0, 8.0)).unwrap(),
            Vec2::new(-1.0, 0.0)
        );
    }

    #[test]
    fn zero_gradient_at_center() {
        assert!(matches!(
            ellipse().outward_normal(Vec2::new(0.0, 0.0)),
            Err(GeometryError::ZeroGradient { .. })
        ));
    }

    #[test]
    fn normal_matches_finite_differences_at_fixed_angle() {
        let c = BoundaryCurve::new(10.0, 8.0, 2.5).unwrap();
        let q = c.point_at_polar(0.7);
        let n = c.outward_normal(q).unwrap();
        let fd = fd_normal(&c, q, 1e-6);
        assert!((n - fd).norm() <= 1e-8, "{n:?} vs {fd:?}");
    }

    #[test]
    fn normal_matches_finite_differences_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &p in &[2.0, 2.005, 2.5, 4.0] {
            let c = BoundaryCurve::new(10.0, 8.0, p).unwrap();
            for _ in 0..1000 {
                let q = c.point_at_polar(rng.random::<f64>() * TAU);
                let n = c.outward_normal(q).unwrap();
                assert!((n - fd_normal(&c, q, 1e-6)).norm() <= 1e-7);
                let t = c.tangent_ccw(q).unwrap();
                assert!(n.dot(t).abs() <= 1e-15);
                assert!((n.norm() - 1.0).abs() <= 1e-15 && (t.norm() - 1.0).abs() <= 1e-15);
                // outward: a small step along n leaves the table
                assert!(c.implicit_value(q + n * 1e-3) > 0.0);
            }
        }
    }

    #[test]
    fn polar_points_on_axes() {
        let c = ellipse();
        let q = c.point_at_polar(0.0);
        assert_eq!((q.x, q.y), (10.0, 0.0));
        let q = c.point_at_polar(FRAC_PI_2);
        assert!((q.x).abs() < 1e-15 && (q.y - 8.0).abs() < 1e-14);
        let circle = BoundaryCurve::circle(10.0).unwrap();
        let q = circle.point_at_polar(PI / 4.0);
        assert!((q.x - 10.0 * FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((q.y - 10.0 * FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn polar_angle_examples() {
        let c = ellipse();
        assert_eq!(c.polar_angle_of(Vec2::new(10.0, 0.0)), 0.0);
        assert!((c.polar_angle_of(Vec2::new(0.0, -8.0)) - 1.5 * PI).abs() < 1e-15);
        assert_eq!(normalize_angle(-1e-300), 0.0);
        assert!((wrap_difference(TAU - 0.1) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn polar_round_trip_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[2.0, 2.005, 3.0, 1.5] {
            let c = BoundaryCurve::new(10.0, 8.0, p).unwrap();
            for _ in 0..1000 {
                let theta = rng.random::<f64>() * TAU;
                let q = c.point_at_polar(theta);
                assert!(c.implicit_value(q).abs() <= 1e-12);
                let back = c.polar_angle_of(q);
                assert!(wrap_difference(back - theta).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn x_mirror_symmetry() {
        let c = BoundaryCurve::new(10.0, 8.0, 2.005).unwrap();
        for k in 0..100 {
            let theta = 0.0314 * k as f64;
            let q = c.point_at_polar(theta);
            let m = c.point_at_polar(PI - theta);
            assert!((m.x + q.x).abs() <= 1e-12 && (m.y - q.y).abs() <= 1e-12);
            let m = c.point_at_polar(-theta);
            assert!((m.x - q.x).abs() <= 1e-12 && (m.y + q.y).abs() <= 1e-12);
        }
    }

    #[test]
    fn strictly_convex_polygon() {
        for &p in &[2.0, 2.005, 1.5, 2.5] {
            let c = BoundaryCurve::new(10.0, 8.0, p).unwrap();
            let n = 10_000;
            let pts: Vec<Vec2> = (0..n)
                .map(|k| c.point_at_polar(TAU * k as f64 / n as f64))
                .collect();
            for k in 0..n {
                let e0 = pts[(k + 1) % n] - pts[k];
                let e1 = pts[(k + 2) % n] - pts[(k + 1) % n];
                assert!(e0.cross(e1) > 0.0, "p={p} k={k}");
            }
        }
    }

    #[test]
    fn circle_quarter_arc() {
        let circle = BoundaryCurve::circle(10.0).unwrap();
        let len = circle.arc_length_between(0.0, FRAC_PI_2).unwrap();
        assert!((len - 5.0 * PI).abs() <= 1e-9);
        assert_eq!(circle.arc_length_between(1.3, 1.3).unwrap(), 0.0);
        let back = circle.arc_length_between(FRAC_PI_2, 0.0).unwrap();
        assert!((back + 5.0 * PI).abs() <= 1e-9);
    }

    #[test]
    fn ellipse_perimeter_matches_polygon_oracle() {
        let c = ellipse();
        let oracle = polygon_length(&c, 1_000_000);
        assert!(
            (c.perimeter() - oracle).abs() <= 1e-6,
            "{} vs {}",
            c.perimeter(),
            oracle
        );
        let c = BoundaryCurve::new(10.0, 8.0, 1.5).unwrap();
        let oracle = polygon_length(&c, 1_000_000);
        assert!((c.perimeter() - oracle).abs() <= 1e-6);
    }

    proptest! {
        #[test]
        fn arc_length_is_additive(
            t0 in 0.0..TAU, t1 in 0.0..TAU, t2 in 0.0..TAU, p in 1.5f64..5.0,
        ) {
            let c = BoundaryCurve::new(10.0, 8.0, p).unwrap();
            let a = c.arc_length_between(t0, t1).unwrap();
            let b = c.arc_length_between(t1, t2).unwrap();
            let whole = c.arc_length_between(t0, t2).unwrap();
            prop_assert!((a + b - whole).abs() <= 1e-9);
        }
    }
}
