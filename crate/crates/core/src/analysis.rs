//! Dynamical diagnostics and independent oracles.
//!
//! - [`joachimsthal`]: the first integral of the field-free elliptic table.
//! - [`symplectic_defect`]: how far a finite-difference Jacobian of the map is
//!   from preserving `cos(phi) dphi ^ ds`.
//! - [`reversibility_defect`]: forward/backward round trip with the field reversed.
//! - [`circle_field_oracle`]: the billiard map of a circular table in a field,
//!   computed by circle-circle intersection without any root finding.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::boundary::{normalize_angle, wrap_difference, BoundaryCurve};
use crate::stepper::{billiard_step, BoundaryState, FieldParams, PhasePoint};
use crate::vec2::Vec2;
use crate::DEFAULT_TOLERANCE;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("probe failed: {0}")]
    ProbeFailure(String),
    #[error("the Larmor circle does not cross the table a second time")]
    NoSecondIntersection,
}

/// `<A x, v>` with `A = diag(1/a^2, 1/b^2)`, evaluated with the outgoing velocity.
///
/// Conserved by the field-free billiard in an ellipse (`p = 2`); for other
/// tables it is still reported but carries no meaning.
pub fn joachimsthal(curve: &BoundaryCurve, state: &BoundaryState) -> f64 {
    let a2 = curve.semi_axis_a() * curve.semi_axis_a();
    let b2 = curve.semi_axis_b() * curve.semi_axis_b();
    state.position.x * state.velocity.x / a2 + state.position.y * state.velocity.y / b2
}

/// `(max - min) / |mean|` of a sample; zero for fewer than two values.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (hi - lo) / mean.abs()
}

/// Finite-difference check of the invariant area form at one phase point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticProbe {
    pub base_point: PhasePoint,
    /// Step in both the arc length `s` and the angle `phi`.
    pub fd_step: f64,
    /// `|det(J) cos(phi') / cos(phi) - 1|`.
    pub defect: f64,
}

impl SymplecticProbe {
    /// Central differences in `(s, phi)`, with `s` the counterclockwise arc
    /// length from polar angle 0.
    pub fn measure(
        curve: &BoundaryCurve,
        z: PhasePoint,
        field: &FieldParams,
        fd_step: f64,
    ) -> Result<Self, AnalysisError> {
        if !(fd_step > 0.0) {
            return Err(AnalysisError::ProbeFailure(format!(
                "fd_step must be positive, got {fd_step}"
            )));
        }
        let step = |w: PhasePoint| {
            if !w.is_valid() {
                return Err(AnalysisError::ProbeFailure(format!(
                    "neighbour {w:?} is outside the phase cylinder"
                )));
            }
            billiard_step(curve, w, field, DEFAULT_TOLERANCE)
                .map_err(|e| AnalysisError::ProbeFailure(e.to_string()))
        };
        let image = step(z)?;
        // arc length along the boundary from the base image to a neighbour image
        let image_offset = |w: PhasePoint| -> Result<f64, AnalysisError> {
            let theta = image.theta_pos + wrap_difference(w.theta_pos - image.theta_pos);
            curve
                .arc_length_between(image.theta_pos, theta)
                .map_err(|e| AnalysisError::ProbeFailure(e.to_string()))
        };

        let h = fd_step;
        let s_plus = PhasePoint::new(theta_at_arc_offset(curve, z.theta_pos, h)?, z.theta_vel);
        let s_minus = PhasePoint::new(theta_at_arc_offset(curve, z.theta_pos, -h)?, z.theta_vel);
        let phi_plus = PhasePoint::new(z.theta_pos, z.theta_vel + h);
        let phi_minus = PhasePoint::new(z.theta_pos, z.theta_vel - h);

        let (sp, sm, pp, pm) = (
            step(s_plus)?,
            step(s_minus)?,
            step(phi_plus)?,
            step(phi_minus)?,
        );
        let ds_ds = (image_offset(sp)? - image_offset(sm)?) / (2.0 * h);
        let dphi_ds = (sp.theta_vel - sm.theta_vel) / (2.0 * h);
        let ds_dphi = (image_offset(pp)? - image_offset(pm)?) / (2.0 * h);
        let dphi_dphi = (pp.theta_vel - pm.theta_vel) / (2.0 * h);
        let det = ds_ds * dphi_dphi - ds_dphi * dphi_ds;
        let defect = (det * image.theta_vel.cos() / z.theta_vel.cos() - 1.0).abs();
        Ok(Self {
            base_point: z,
            fd_step,
            defect,
        })
    }
}

pub fn symplectic_defect(
    curve: &BoundaryCurve,
    z: PhasePoint,
    field: &FieldParams,
    fd_step: f64,
) -> Result<f64, AnalysisError> {
    SymplecticProbe::measure(curve, z, field, fd_step).map(|probe| probe.defect)
}

/// Polar angle reached by moving `offset` along the boundary from `theta_0`.
fn theta_at_arc_offset(
    curve: &BoundaryCurve,
    theta_0: f64,
    offset: f64,
) -> Result<f64, AnalysisError> {
    let mut theta = theta_0 + offset / curve.arc_length_density(theta_0);
    for _ in 0..4 {
        let len = curve
            .arc_length_between(theta_0, theta)
            .map_err(|e| AnalysisError::ProbeFailure(e.to_string()))?;
        theta -= (len - offset) / curve.arc_length_density(theta);
    }
    Ok(theta)
}

/// Steps `n_steps` forward, reverses direction and field, steps back, and
/// returns the larger of the position and angle mismatches.
pub fn reversibility_defect(
    curve: &BoundaryCurve,
    z: PhasePoint,
    field: &FieldParams,
    n_steps: usize,
) -> Result<f64, AnalysisError> {
    let run = |mut w: PhasePoint, f: &FieldParams| {
        for _ in 0..n_steps {
            w = billiard_step(curve, w, f, DEFAULT_TOLERANCE)
                .map_err(|e| AnalysisError::ProbeFailure(e.to_string()))?;
        }
        Ok::<_, AnalysisError>(w)
    };
    let forward = run(z, field)?;
    let back = run(forward.reversed(), &field.reversed())?.reversed();
    Ok(wrap_difference(back.theta_pos - z.theta_pos)
        .abs()
        .max((back.theta_vel - z.theta_vel).abs()))
}

/// The magnetic billiard map of the circle of radius `table_radius`, from the
/// closed-form intersection of the table circle with the Larmor circle.
pub fn circle_field_oracle(
    table_radius: f64,
    field: &FieldParams,
    z: PhasePoint,
) -> Result<PhasePoint, AnalysisError> {
    assert!(
        !field.is_zero(),
        "circle_field_oracle needs a nonzero field"
    );
    let big_r = table_radius;
    let radial = Vec2::from_angle(z.theta_pos);
    let start = radial * big_r;
    let (s, c) = z.theta_vel.sin_cos();
    let velocity = -radial * c + radial.perp() * s;

    let r = field.larmor_radius();
    let sense = field.orientation();
    let center = start + velocity.perp() * (sense * r);

    // The radical line of the two circles is perpendicular to the line of
    // centers at distance `along` from the origin; the start point is one of
    // the two intersections, the hit is its mirror image across that line.
    let d = center.norm();
    if !(d > 0.0) {
        return Err(AnalysisError::NoSecondIntersection);
    }
    let axis = center * (1.0 / d);
    let along = (big_r * big_r - r * r + d * d) / (2.0 * d);
    let half_chord = start.cross(axis).abs();
    if !(along.abs() < big_r) || half_chord <= 1e-12 * big_r {
        return Err(AnalysisError::NoSecondIntersection);
    }
    let hit = axis * (2.0 * along) - start;

    let arrival = (hit - center).perp() * (sense / r);
    let normal = hit * (1.0 / big_r);
    let outgoing = arrival - normal * (2.0 * arrival.dot(normal));
    let theta_pos = normalize_angle(hit.angle());
    let theta_vel = outgoing.dot(normal.perp()).atan2(-outgoing.dot(normal));
    if theta_vel.abs() >= FRAC_PI_2 {
        return Err(AnalysisError::NoSecondIntersection);
    }
    Ok(PhasePoint::new(theta_pos, theta_vel))
}
