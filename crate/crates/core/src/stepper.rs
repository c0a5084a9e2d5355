//! The billiard map on the phase cylinder.
//!
//! A phase point `(theta_pos, theta_vel)` names a boundary point by its polar
//! angle and an outgoing direction by its angle from the inward normal,
//! positive toward the counterclockwise tangent. One step follows a straight
//! chord (no field) or a Larmor circle (field `B != 0`) to the next boundary
//! crossing, reflects, and converts back.
//!
//! Crossings are located by marching along the trajectory parameter `t`
//! (arc length, unit speed) to bracket the first inside-to-outside sign change
//! of the implicit function, then bisecting and polishing with Newton. The
//! march also watches for interior maxima of `F` so that a trajectory which
//! pokes out of the table between two samples is not missed.

use std::f64::consts::{FRAC_PI_2, TAU};

use thiserror::Error;

use crate::boundary::{normalize_angle, BoundaryCurve};
use crate::vec2::Vec2;

/// Number of marching samples per characteristic length.
const MARCH_SAMPLES: f64 = 64.0;
/// Start-point exclusion window, relative to the characteristic length.
const EXCLUSION: f64 = 1e-6;
/// Bisection stops once the bracket is below this fraction of the characteristic length.
const BRACKET_WIDTH: f64 = 1e-12;
const MAX_NEWTON: usize = 5;
const MAX_ITERATIONS: usize = 200;
const GOLDEN_ITERATIONS: usize = 40;
/// Outgoing angles closer than this to +-pi/2 leave the admissible cylinder.
pub const TANGENCY_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("orbit became tangential (theta_vel = {theta_vel})")]
    DegenerateTangency { theta_vel: f64 },
    #[error("velocity does not point into the table")]
    VelocityOutOfRange,
}

/// A point of the discrete dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    /// Polar angle of the boundary point, in `[0, 2 pi)`.
    pub theta_pos: f64,
    /// Outgoing angle from the inward normal, in `(-pi/2, pi/2)`.
    pub theta_vel: f64,
}

impl PhasePoint {
    /// Builds a phase point, wrapping `theta_pos` into `[0, 2 pi)`.
    pub fn new(theta_pos: f64, theta_vel: f64) -> Self {
        Self {
            theta_pos: normalize_angle(theta_pos),
            theta_vel,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..TAU).contains(&self.theta_pos) && self.theta_vel.abs() < FRAC_PI_2
    }

    /// The time-reversed phase point (same position, mirrored direction).
    pub fn reversed(&self) -> Self {
        Self {
            theta_pos: self.theta_pos,
            theta_vel: -self.theta_vel,
        }
    }
}

/// Euclidean form of a phase point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryState {
    pub position: Vec2,
    /// Outgoing unit velocity, pointing into the table.
    pub velocity: Vec2,
}

/// Uniform transverse magnetic field at unit particle speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldParams {
    field_strength: f64,
    larmor_radius: f64,
    orientation: f64,
}

impl FieldParams {
    /// Positive `B` turns the particle counterclockwise.
    pub fn new(field_strength: f64) -> Self {
        let larmor_radius = if field_strength == 0.0 {
            f64::INFINITY
        } else {
            1.0 / field_strength.abs()
        };
        let orientation = if field_strength < 0.0 { -1.0 } else { 1.0 };
        Self {
            field_strength,
            larmor_radius,
            orientation,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0)
    }

    pub fn field_strength(&self) -> f64 {
        self.field_strength
    }

    /// `1/|B|`, infinite without a field.
    pub fn larmor_radius(&self) -> f64 {
        self.larmor_radius
    }

    /// +1 for counterclockwise turning, -1 for clockwise.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn is_zero(&self) -> bool {
        self.field_strength == 0.0
    }

    /// The field seen by the time-reversed particle.
    pub fn reversed(&self) -> Self {
        Self::new(-self.field_strength)
    }

    /// Center of the Larmor circle through `state`.
    pub fn larmor_center(&self, state: &BoundaryState) -> Vec2 {
        state.position + state.velocity.perp() * (self.orientation * self.larmor_radius)
    }
}

/// Result of following a Larmor arc to the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcHit {
    pub point: Vec2,
    /// Unit velocity of the particle on arrival, before reflection.
    pub velocity: Vec2,
    /// The Larmor circle never left the table; `point` and `velocity` are the start state.
    pub full_loop: bool,
}

/// One application of the billiard map, with solver diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: PhasePoint,
    /// The boundary crossing as returned by the root finder, before re-projection.
    pub hit: Vec2,
    pub full_loop: bool,
}

#[inline]
fn unit_normal(curve: &BoundaryCurve, point: Vec2) -> Vec2 {
    curve.gradient(point).normalized()
}

pub fn phase_to_state(curve: &BoundaryCurve, z: PhasePoint) -> BoundaryState {
    let position = curve.point_at_polar(z.theta_pos);
    let n = unit_normal(curve, position);
    let (s, c) = z.theta_vel.sin_cos();
    BoundaryState {
        position,
        velocity: -n * c + n.perp() * s,
    }
}

pub fn state_to_phase(
    curve: &BoundaryCurve,
    state: &BoundaryState,
) -> Result<PhasePoint, StepError> {
    let n = unit_normal(curve, state.position);
    let inward = -state.velocity.dot(n);
    if !(inward > 0.0) {
        return Err(StepError::VelocityOutOfRange);
    }
    Ok(PhasePoint::new(
        curve.polar_angle_of(state.position),
        state.velocity.dot(n.perp()).atan2(inward),
    ))
}

/// Specular reflection: keeps the tangential component, flips the normal one.
#[inline]
pub fn reflect(v_in: Vec2, n: Vec2) -> Vec2 {
    v_in - n * (2.0 * v_in.dot(n))
}

#[derive(Clone, Copy, Debug)]
enum Trajectory {
    Line {
        start: Vec2,
        direction: Vec2,
    },
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        orientation: f64,
    },
}

impl Trajectory {
    #[inline]
    fn point(&self, t: f64) -> Vec2 {
        match *self {
            Trajectory::Line { start, direction } => start + direction * t,
            Trajectory::Arc {
                center,
                radius,
                start_angle,
                orientation,
            } => center + Vec2::from_angle(start_angle + orientation * t / radius) * radius,
        }
    }

    #[inline]
    fn velocity(&self, t: f64) -> Vec2 {
        match *self {
            Trajectory::Line { direction, .. } => direction,
            Trajectory::Arc {
                radius,
                start_angle,
                orientation,
                ..
            } => Vec2::from_angle(start_angle + orientation * t / radius).perp() * orientation,
        }
    }
}

struct CrossingSearch<'a> {
    curve: &'a BoundaryCurve,
    path: Trajectory,
    length_scale: f64,
    tol: f64,
    iterations: usize,
}

impl CrossingSearch<'_> {
    #[inline]
    fn value(&mut self, t: f64) -> f64 {
        self.iterations += 1;
        self.curve.implicit_value(self.path.point(t))
    }

    fn check_budget(&self) -> Result<(), StepError> {
        if self.iterations > MAX_ITERATIONS {
            Err(StepError::RootFindFailure(format!(
                "iteration cap of {MAX_ITERATIONS} exceeded"
            )))
        } else {
            Ok(())
        }
    }

    /// Parameter of the first inside-to-outside crossing in `(t_excl, horizon]`.
    fn first_exit(&mut self, horizon: f64) -> Result<Option<f64>, StepError> {
        let step = self.length_scale / MARCH_SAMPLES;
        let mut t_prev = EXCLUSION * self.length_scale;
        let mut f_prev = self.value(t_prev);
        if f_prev > 0.0 {
            return Err(StepError::RootFindFailure(
                "trajectory leaves the table immediately".into(),
            ));
        }
        let mut before: Option<(f64, f64)> = None;
        while t_prev < horizon {
            self.check_budget()?;
            let t = (t_prev + step).min(horizon);
            let f = self.value(t);
            if f > 0.0 {
                return self.refine(t_prev, t).map(Some);
            }
            if let Some((t_pp, f_pp)) = before {
                if f_prev > f_pp && f_prev > f {
                    // F peaks between samples: the path may graze or poke out
                    let (t_peak, f_peak) = self.maximize(t_pp, t);
                    if f_peak > self.tol {
                        return self.refine(t_pp, t_peak).map(Some);
                    }
                }
            }
            before = Some((t_prev, f_prev));
            t_prev = t;
            f_prev = f;
        }
        Ok(None)
    }

    fn maximize(&mut self, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = self.value(x1);
        let mut f2 = self.value(x2);
        for _ in 0..GOLDEN_ITERATIONS {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.value(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.value(x1);
            }
        }
        if f1 > f2 {
            (x1, f1)
        } else {
            (x2, f2)
        }
    }

    /// Root of `F` along the path given `F(lo) <= 0 < F(hi)`.
    fn refine(&mut self, mut lo: f64, mut hi: f64) -> Result<f64, StepError> {
        let width = BRACKET_WIDTH * self.length_scale;
        let mut f_lo = self.value(lo);
        let mut f_hi = self.value(hi);
        while hi - lo > width {
            self.check_budget()?;
            let mid = 0.5 * (lo + hi);
            let f_mid = self.value(mid);
            if f_mid > 0.0 {
                hi = mid;
                f_hi = f_mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        let (mut t, mut f) = if f_hi.abs() < f_lo.abs() {
            (hi, f_hi)
        } else {
            (lo, f_lo)
        };
        let slack = hi - lo;
        for _ in 0..MAX_NEWTON {
            let slope = self
                .curve
                .gradient(self.path.point(t))
                .dot(self.path.velocity(t));
            if !(slope.abs() > 0.0) {
                break;
            }
            let t_next = t - f / slope;
            if !(t_next >= lo - slack && t_next <= hi + slack) {
                break;
            }
            let f_next = self.value(t_next);
            if f_next.abs() >= f.abs() {
                break;
            }
            t = t_next;
            f = f_next;
        }
        if f.abs() > self.tol {
            return Err(StepError::RootFindFailure(format!(
                "residual {f:e} above tolerance {:e}",
                self.tol
            )));
        }
        Ok(t)
    }
}

/// Next boundary point along the straight chord leaving `state`.
pub fn next_hit_line(
    curve: &BoundaryCurve,
    state: &BoundaryState,
    tol: f64,
) -> Result<Vec2, StepError> {
    let length_scale = curve
        .perimeter()
        .min(4.0 * curve.semi_axis_a().max(curve.semi_axis_b()));
    let path = Trajectory::Line {
        start: state.position,
        direction: state.velocity,
    };
    let mut search = CrossingSearch {
        curve,
        path,
        length_scale,
        tol,
        iterations: 0,
    };
    match search.first_exit(length_scale)? {
        Some(t) => Ok(path.point(t)),
        None => Err(StepError::RootFindFailure(
            "chord did not leave the table within the search horizon".into(),
        )),
    }
}

/// Next boundary point along the Larmor circle leaving `state`.
///
/// If the circle never leaves the table the start state is returned with
/// `full_loop` set.
pub fn next_hit_arc(
    curve: &BoundaryCurve,
    state: &BoundaryState,
    field: &FieldParams,
    tol: f64,
) -> Result<ArcHit, StepError> {
    assert!(!field.is_zero(), "next_hit_arc requires a nonzero field");
    let radius = field.larmor_radius();
    let circumference = TAU * radius;
    let length_scale = curve.perimeter().min(circumference);
    let center = field.larmor_center(state);
    let path = Trajectory::Arc {
        center,
        radius,
        start_angle: (state.position - center).angle(),
        orientation: field.orientation(),
    };
    let mut search = CrossingSearch {
        curve,
        path,
        length_scale,
        tol,
        iterations: 0,
    };
    let horizon = circumference - EXCLUSION * length_scale;
    Ok(match search.first_exit(horizon)? {
        Some(t) => ArcHit {
            point: path.point(t),
            velocity: path.velocity(t),
            full_loop: false,
        },
        None => ArcHit {
            point: state.position,
            velocity: state.velocity,
            full_loop: true,
        },
    })
}

/// One step of the billiard map with diagnostics.
pub fn billiard_step_detailed(
    curve: &BoundaryCurve,
    z: PhasePoint,
    field: &FieldParams,
    tol: f64,
) -> Result<StepOutcome, StepError> {
    let state = phase_to_state(curve, z);
    let (hit, arrival) = if field.is_zero() {
        (next_hit_line(curve, &state, tol)?, state.velocity)
    } else {
        let arc = next_hit_arc(curve, &state, field, tol)?;
        if arc.full_loop {
            return Ok(StepOutcome {
                next: z,
                hit: state.position,
                full_loop: true,
            });
        }
        (arc.point, arc.velocity)
    };
    let outgoing = reflect(arrival, unit_normal(curve, hit));
    let next = state_to_phase(
        curve,
        &BoundaryState {
            position: hit,
            velocity: outgoing,
        },
    )
    .map_err(|_| StepError::DegenerateTangency {
        theta_vel: FRAC_PI_2,
    })?;
    if next.theta_vel.abs() > FRAC_PI_2 - TANGENCY_MARGIN {
        return Err(StepError::DegenerateTangency {
            theta_vel: next.theta_vel,
        });
    }
    Ok(StepOutcome {
        next,
        hit,
        full_loop: false,
    })
}

/// The billiard map.
pub fn billiard_step(
    curve: &BoundaryCurve,
    z: PhasePoint,
    field: &FieldParams,
    tol: f64,
) -> Result<PhasePoint, StepError> {
    billiard_step_detailed(curve, z, field, tol).map(|outcome| outcome.next)
}
