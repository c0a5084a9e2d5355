//! Seeded orbit ensembles.
//!
//! Orbit `i` draws its initial condition from its own generator, seeded by a
//! SplitMix64 mix of `(master_seed, i)`. Orbits therefore do not depend on
//! each other or on how the work is scheduled across threads.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary::BoundaryCurve;
use crate::stepper::{billiard_step_detailed, FieldParams, PhasePoint};
use crate::vec2::Vec2;

/// Identifier of the per-orbit random generator, recorded in run metadata.
pub const RNG_IDENTIFIER: &str =
    "ChaCha8Rng (rand_chacha 0.9), per-orbit seed = splitmix64(master_seed, orbit_id)";

pub const DEFAULT_CUTOFF_DELTA: f64 = 0.01;
pub const DEFAULT_HIGHLIGHT_COUNT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub field: FieldParams,
    pub curve: BoundaryCurve,
    pub number_of_orbits: usize,
    pub points_per_orbit: usize,
    /// Initial `theta_vel` is drawn from `(-pi/2 + delta, pi/2 - delta)`.
    pub cutoff_delta: f64,
    pub tolerance: f64,
    pub master_seed: u64,
    pub highlight_count: usize,
}

impl EnsembleConfig {
    pub fn new(
        curve: BoundaryCurve,
        field: FieldParams,
        number_of_orbits: usize,
        points_per_orbit: usize,
    ) -> Self {
        Self {
            field,
            curve,
            number_of_orbits,
            points_per_orbit,
            cutoff_delta: DEFAULT_CUTOFF_DELTA,
            tolerance: crate::DEFAULT_TOLERANCE,
            master_seed: 0,
            highlight_count: DEFAULT_HIGHLIGHT_COUNT,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.number_of_orbits < 1 || self.points_per_orbit < 1 {
            return Err("number_of_orbits and points_per_orbit must be at least 1".into());
        }
        if !(0.0..FRAC_PI_2).contains(&self.cutoff_delta) {
            return Err(format!(
                "cutoff delta {} outside [0, pi/2)",
                self.cutoff_delta
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(format!("tolerance {} outside (0, 1e-3]", self.tolerance));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrbitFlags {
    /// At least one step followed a full Larmor circle without reaching the wall.
    pub full_loop: bool,
    /// The orbit stopped before `points_per_orbit` steps.
    pub terminated_early: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord {
    pub orbit_id: usize,
    pub orbit_seed: u64,
    /// Initial condition followed by one point per reflection.
    pub points: Vec<PhasePoint>,
    /// `point_at_polar(points[i].theta_pos)`.
    pub positions: Vec<Vec2>,
    pub flags: OrbitFlags,
}

/// SplitMix64 finalizer applied to `master_seed` advanced by `index + 1` golden-ratio increments.
pub fn orbit_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an initial condition uniformly from `[0, 2 pi) x (-pi/2 + delta, pi/2 - delta)`.
pub fn sample_initial<R: Rng + ?Sized>(rng: &mut R, cutoff_delta: f64) -> PhasePoint {
    let theta_pos = rng.random::<f64>() * TAU;
    let half_width = FRAC_PI_2 - cutoff_delta;
    let theta_vel = loop {
        // open interval: reject the lower endpoint
        let u = rng.random::<f64>();
        if u > 0.0 {
            break -half_width + 2.0 * half_width * u;
        }
    };
    PhasePoint::new(theta_pos, theta_vel)
}

pub fn run_orbit(config: &EnsembleConfig, init: PhasePoint, orbit_id: usize) -> OrbitRecord {
    let curve = &config.curve;
    let mut points = Vec::with_capacity(config.points_per_orbit + 1);
    let mut positions = Vec::with_capacity(config.points_per_orbit + 1);
    let mut flags = OrbitFlags::default();
    let mut z = init;
    points.push(z);
    positions.push(curve.point_at_polar(z.theta_pos));
    for _ in 0..config.points_per_orbit {
        match billiard_step_detailed(curve, z, &config.field, config.tolerance) {
            Ok(outcome) => {
                flags.full_loop |= outcome.full_loop;
                z = outcome.next;
                points.push(z);
                positions.push(curve.point_at_polar(z.theta_pos));
            }
            Err(_) => {
                flags.terminated_early = true;
                break;
            }
        }
    }
    OrbitRecord {
        orbit_id,
        orbit_seed: orbit_seed(config.master_seed, orbit_id as u64),
        points,
        positions,
        flags,
    }
}

/// Initial condition of orbit `orbit_id` under `config`.
pub fn initial_condition(config: &EnsembleConfig, orbit_id: usize) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(orbit_seed(config.master_seed, orbit_id as u64));
    sample_initial(&mut rng, config.cutoff_delta)
}

/// Runs every orbit of the ensemble in parallel; records come back in `orbit_id` order.
pub fn run_ensemble(config: &EnsembleConfig) -> Vec<OrbitRecord> {
    (0..config.number_of_orbits)
        .into_par_iter()
        .map(|id| run_orbit(config, initial_condition(config, id), id))
        .collect()
}
