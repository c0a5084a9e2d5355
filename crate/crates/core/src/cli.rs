//! Command-line front end: flags, geometry resolution, the example presets,
//! run bundles, and the `verify` suite.
//!
//! Flag names follow the usual parameter vocabulary
//! (`--magnetic-field`, `--eccentricity`, `--power`, `--orbits`,
//! `--points-per-orbit`, `--points-on-table`).

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{
    circle_field_oracle, joachimsthal, relative_spread, reversibility_defect, symplectic_defect,
    DEFAULT_FD_STEP,
};
use crate::boundary::{wrap_difference, BoundaryCurve};
use crate::ensemble::{
    run_ensemble, sample_initial, EnsembleConfig, OrbitRecord, DEFAULT_CUTOFF_DELTA,
};
use crate::output::{
    read_orbit_data, render_phase_portrait, render_table_figure, write_orbit_data, PaletteMode,
    PlotStyle, RunMetadata,
};
use crate::stepper::{
    billiard_step, billiard_step_detailed, phase_to_state, FieldParams, PhasePoint,
};
use crate::DEFAULT_TOLERANCE;

/// Semi-axis `a` used when the table is given by an eccentricity.
pub const DEFAULT_SEMI_AXIS_A: f64 = 10.0;

pub const DATA_FILE: &str = "orbits.csv";
pub const PORTRAIT_FILE: &str = "phase_portrait.svg";
pub const TABLE_FILE: &str = "table.svg";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error(transparent)]
    Output(#[from] crate::output::OutputError),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    /// Process exit status: 1 verification, 2 configuration, 3 runtime.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::InvalidConfig(_) | CliError::InvalidGeometry(_) => 2,
            CliError::Runtime(_) | CliError::Output(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "magbill",
    version,
    about = "Classical magnetic billiards in superellipse tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble and write data, metadata and both figures.
    Simulate(SimulateArgs),
    /// Re-render figures from an existing data file.
    Plot(PlotArgs),
    /// Run the invariant checks and report measured defects.
    Verify(VerifyArgs),
    /// Run one of the built-in parameter presets (0-5 or "all").
    Example(ExampleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Field strength B; the Larmor radius is 1/|B|, B > 0 turns counterclockwise.
    #[arg(
        long = "magnetic-field",
        short = 'B',
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub field_b: f64,
    #[arg(long = "semi-axis-a", default_value_t = DEFAULT_SEMI_AXIS_A)]
    pub semi_axis_a: f64,
    #[arg(long = "semi-axis-b")]
    pub semi_axis_b: Option<f64>,
    /// Sets b = a |1 - eps^2|^(1/p) when --semi-axis-b is absent.
    #[arg(long = "eccentricity")]
    pub eccentricity: Option<f64>,
    #[arg(long = "power", default_value_t = 2.0)]
    pub power_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PaletteArg {
    Fixed,
    Random,
}

impl From<PaletteArg> for PaletteMode {
    fn from(p: PaletteArg) -> Self {
        match p {
            PaletteArg::Fixed => PaletteMode::FixedSix,
            PaletteArg::Random => PaletteMode::RandomPerOrbit,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StyleArgs {
    #[arg(long = "points-on-table", default_value_t = 500)]
    pub points_on_table: usize,
    /// Number of highlighted orbits (the first ones sampled).
    #[arg(long = "highlight", default_value_t = 6)]
    pub highlight_count: usize,
    #[arg(long = "palette", value_enum, default_value_t = PaletteArg::Fixed)]
    pub palette: PaletteArg,
    /// Overlay chords or Larmor arcs between table points.
    #[arg(long = "overlay-paths")]
    pub overlay_paths: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub style: StyleArgs,
    #[arg(long = "orbits", default_value_t = 1000)]
    pub number_of_orbits: usize,
    #[arg(long = "points-per-orbit", default_value_t = 1000)]
    pub points_per_orbit: usize,
    #[arg(long = "delta", default_value_t = DEFAULT_CUTOFF_DELTA)]
    pub cutoff_delta: f64,
    #[arg(long = "tol", default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long = "seed", default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long = "out", default_value = "magbill-out")]
    pub output_directory: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Data file written by `simulate`.
    #[arg(long = "data")]
    pub data: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub style: StyleArgs,
    /// Seed of the random-per-orbit colors.
    #[arg(long = "seed", default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long = "out", default_value = "magbill-out")]
    pub output_directory: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Check a single table and field instead of the built-in grid.
    #[arg(long = "magnetic-field", short = 'B', allow_negative_numbers = true)]
    pub field_b: Option<f64>,
    #[arg(long = "semi-axis-a", default_value_t = DEFAULT_SEMI_AXIS_A)]
    pub semi_axis_a: f64,
    #[arg(long = "semi-axis-b")]
    pub semi_axis_b: Option<f64>,
    #[arg(long = "eccentricity")]
    pub eccentricity: Option<f64>,
    #[arg(long = "power", default_value_t = 2.0)]
    pub power_p: f64,
    #[arg(long = "tol", default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long = "seed", default_value_t = 0)]
    pub master_seed: u64,
    /// Random states per check.
    #[arg(long = "samples", default_value_t = 20)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExampleArgs {
    /// 0-5, or "all" for the high-resolution random-color portrait.
    pub which: String,
    #[arg(long = "seed", default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long = "out", default_value = "magbill-out")]
    pub output_directory: PathBuf,
}

/// Resolves the table from semi-axes or from the eccentricity convention.
///
/// Returns the curve together with warnings meant for the user.
pub fn resolve_geometry(
    semi_axis_a: f64,
    semi_axis_b: Option<f64>,
    eccentricity: Option<f64>,
    power_p: f64,
) -> Result<(BoundaryCurve, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let b = match (semi_axis_b, eccentricity) {
        (Some(b), Some(_)) => {
            warnings.push(
                "both --semi-axis-b and --eccentricity given; using --semi-axis-b".to_string(),
            );
            b
        }
        (Some(b), None) => b,
        (None, Some(eps)) => {
            let factor = (1.0 - eps * eps).abs();
            if factor == 0.0 {
                return Err(CliError::InvalidGeometry(
                    "eccentricity 1 collapses the table (b = 0)".into(),
                ));
            }
            if eps.abs() > 1.0 {
                warnings.push(format!(
                    "WARNING: with eccentricity {eps} > 1 the coefficient 1/(1 - eps^2) of |y|^p is negative and \
                     the literal level set bounds no table; using the convention b = a |1 - eps^2|^(1/p) = {}",
                    semi_axis_a * factor.powf(1.0 / power_p)
                ));
            }
            semi_axis_a * factor.powf(1.0 / power_p)
        }
        (None, None) => {
            return Err(CliError::InvalidConfig(
                "one of --semi-axis-b or --eccentricity is required".into(),
            ))
        }
    };
    if !(b > 0.0) {
        return Err(CliError::InvalidGeometry(format!(
            "resolved semi-axis b = {b} is not positive"
        )));
    }
    let curve = BoundaryCurve::new(semi_axis_a, b, power_p)
        .map_err(|e| CliError::InvalidGeometry(e.to_string()))?;
    if curve.is_low_regularity() {
        warnings.push(format!(
            "power {power_p} < 2: the boundary is not twice differentiable on the axes"
        ));
    }
    Ok((curve, warnings))
}

impl GeometryArgs {
    pub fn resolve(&self) -> Result<(BoundaryCurve, Vec<String>), CliError> {
        resolve_geometry(
            self.semi_axis_a,
            self.semi_axis_b,
            self.eccentricity,
            self.power_p,
        )
    }
}

fn check_tolerance(tol: f64) -> Result<(), CliError> {
    if tol > 0.0 && tol <= 1e-3 {
        Ok(())
    } else {
        Err(CliError::InvalidConfig(format!(
            "--tol {tol} outside (0, 1e-3]"
        )))
    }
}

/// A built-in parameter set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExamplePreset {
    pub name: &'static str,
    pub field_b: f64,
    pub eccentricity: f64,
    pub power_p: f64,
    pub number_of_orbits: usize,
    pub points_per_orbit: usize,
    pub points_on_table: usize,
    pub palette: PaletteMode,
}

const fn preset(
    name: &'static str,
    field_b: f64,
    power_p: f64,
    points_on_table: usize,
) -> ExamplePreset {
    ExamplePreset {
        name,
        field_b,
        eccentricity: 1.5,
        power_p,
        number_of_orbits: 1000,
        points_per_orbit: 1000,
        points_on_table,
        palette: PaletteMode::FixedSix,
    }
}

/// Examples 0-5 followed by the high-resolution portrait of Example 3.
pub const EXAMPLE_PRESETS: [ExamplePreset; 7] = [
    preset("example_0", 0.0, 2.0, 1000),
    preset("example_1", 0.01, 2.0, 2000),
    preset("example_2", 0.5, 2.0, 500),
    preset("example_3", 1.0, 2.0, 500),
    preset("example_4", 2.0, 2.0, 500),
    preset("example_5", 0.0, 2.005, 1000),
    // points_on_table inherited from example_3
    ExamplePreset {
        name: "example_all",
        field_b: 1.0,
        eccentricity: 1.5,
        power_p: 2.0,
        number_of_orbits: 2000,
        points_per_orbit: 3000,
        points_on_table: 500,
        palette: PaletteMode::RandomPerOrbit,
    },
];

pub fn example_preset(which: &str) -> Result<&'static ExamplePreset, CliError> {
    let index = match which {
        "all" => 6,
        n => match n.parse::<usize>() {
            Ok(k) if k <= 5 => k,
            _ => {
                return Err(CliError::InvalidConfig(format!(
                    "unknown example {which:?}; expected 0-5 or all"
                )))
            }
        },
    };
    Ok(&EXAMPLE_PRESETS[index])
}

/// Everything needed to produce one run bundle.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub config: EnsembleConfig,
    pub style: PlotStyle,
    pub output_directory: PathBuf,
}

/// Files written for one run.
#[derive(Clone, Debug)]
pub struct RunBundle {
    pub directory: PathBuf,
    pub data: PathBuf,
    pub portrait: PathBuf,
    pub table: PathBuf,
    pub records: Vec<OrbitRecord>,
}

impl RunSpec {
    pub fn from_preset(
        preset: &ExamplePreset,
        master_seed: u64,
        output_root: &Path,
    ) -> Result<Self, CliError> {
        let (curve, _) = resolve_geometry(
            DEFAULT_SEMI_AXIS_A,
            None,
            Some(preset.eccentricity),
            preset.power_p,
        )?;
        let mut config = EnsembleConfig::new(
            curve,
            FieldParams::new(preset.field_b),
            preset.number_of_orbits,
            preset.points_per_orbit,
        );
        config.master_seed = master_seed;
        let mut style = PlotStyle::new(
            (0..config.highlight_count).collect(),
            preset.palette,
            preset.points_on_table,
        );
        style.color_seed = master_seed;
        Ok(Self {
            config,
            style,
            output_directory: output_root.join(preset.name),
        })
    }

    /// Simulates and writes data, metadata, portrait and table figure.
    pub fn run(&self) -> Result<RunBundle, CliError> {
        self.config.validate().map_err(CliError::InvalidConfig)?;
        let dir = &self.output_directory;
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let records = run_ensemble(&self.config);

        let mut meta = RunMetadata::for_config(&self.config);
        meta.insert("points_on_table", self.style.points_on_table);
        meta.insert(
            "palette",
            match self.style.palette_mode {
                PaletteMode::FixedSix => "fixed",
                PaletteMode::RandomPerOrbit => "random",
            },
        );
        meta.insert(
            "portrait_stride",
            crate::output::portrait_stride(&records, &self.style),
        );
        meta.insert(
            "orbits_terminated_early",
            records.iter().filter(|r| r.flags.terminated_early).count(),
        );
        meta.insert(
            "orbits_with_full_loops",
            records.iter().filter(|r| r.flags.full_loop).count(),
        );

        let bundle = RunBundle {
            directory: dir.clone(),
            data: dir.join(DATA_FILE),
            portrait: dir.join(PORTRAIT_FILE),
            table: dir.join(TABLE_FILE),
            records,
        };
        write_orbit_data(&bundle.records, &meta, &bundle.data)?;
        render_phase_portrait(&bundle.records, &self.style, &bundle.portrait)?;
        render_table_figure(
            &self.config.curve,
            &bundle.records,
            &self.style,
            &bundle.table,
        )?;
        Ok(bundle)
    }
}

pub fn run_example(
    which: &str,
    master_seed: u64,
    output_root: &Path,
) -> Result<RunBundle, CliError> {
    RunSpec::from_preset(example_preset(which)?, master_seed, output_root)?.run()
}

fn style_from_args(args: &StyleArgs, field: FieldParams, color_seed: u64) -> PlotStyle {
    let mut style = PlotStyle::new(
        (0..args.highlight_count).collect(),
        args.palette.into(),
        args.points_on_table,
    );
    style.color_seed = color_seed;
    if args.overlay_paths {
        style.overlay_field = Some(field);
    }
    style
}

pub fn simulate(args: &SimulateArgs) -> Result<(RunBundle, Vec<String>), CliError> {
    check_tolerance(args.tolerance)?;
    let (curve, warnings) = args.geometry.resolve()?;
    let field = FieldParams::new(args.geometry.field_b);
    let mut config =
        EnsembleConfig::new(curve, field, args.number_of_orbits, args.points_per_orbit);
    config.cutoff_delta = args.cutoff_delta;
    config.tolerance = args.tolerance;
    config.master_seed = args.master_seed;
    config.highlight_count = args.style.highlight_count;
    config.validate().map_err(CliError::InvalidConfig)?;
    let spec = RunSpec {
        config,
        style: style_from_args(&args.style, field, args.master_seed),
        output_directory: args.output_directory.clone(),
    };
    Ok((spec.run()?, warnings))
}

pub fn plot(args: &PlotArgs) -> Result<Vec<String>, CliError> {
    let (curve, warnings) = args.geometry.resolve()?;
    let records = read_orbit_data(&args.data)?;
    let style = style_from_args(
        &args.style,
        FieldParams::new(args.geometry.field_b),
        args.master_seed,
    );
    let dir = &args.output_directory;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    render_phase_portrait(&records, &style, &dir.join(PORTRAIT_FILE))?;
    render_table_figure(&curve, &records, &style, &dir.join(TABLE_FILE))?;
    Ok(warnings)
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// Set when a check could not run at all (solver failure).
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.measured <= self.bound
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<28} measured={:.3e} bound={:.1e}",
            self.name, self.measured, self.bound
        )?;
        if let Some(msg) = &self.failure {
            write!(f, " ({msg})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Scale and scope of a verification run.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// `None` runs the built-in grid; `Some` checks one table and field.
    pub scenario: Option<(BoundaryCurve, FieldParams)>,
    pub tolerance: f64,
    pub master_seed: u64,
    pub samples: usize,
    pub steps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            tolerance: DEFAULT_TOLERANCE,
            master_seed: 0,
            samples: 20,
            steps: 100,
        }
    }
}

struct Checker<'a> {
    config: &'a VerifyConfig,
    rng: ChaCha8Rng,
}

impl Checker<'_> {
    fn states(&mut self, n: usize) -> Vec<PhasePoint> {
        (0..n)
            .map(|_| sample_initial(&mut self.rng, DEFAULT_CUTOFF_DELTA))
            .collect()
    }

    fn boundary_residual(&mut self, cases: &[(BoundaryCurve, FieldParams)]) -> CheckResult {
        let tol = self.config.tolerance;
        let mut worst: f64 = 0.0;
        for (curve, field) in cases {
            for mut z in self.states(self.config.samples) {
                for _ in 0..self.config.steps {
                    match billiard_step_detailed(curve, z, field, tol) {
                        Ok(out) => {
                            worst = worst.max(curve.implicit_value(out.hit).abs()).max(
                                curve
                                    .implicit_value(curve.point_at_polar(out.next.theta_pos))
                                    .abs(),
                            );
                            z = out.next;
                        }
                        Err(e) => return failed("boundary_residual", tol, e),
                    }
                }
            }
        }
        check("boundary_residual", worst, tol)
    }

    fn circle_integrability(
        &mut self,
        curve: &BoundaryCurve,
        fields: &[FieldParams],
    ) -> CheckResult {
        let mut worst: f64 = 0.0;
        for field in fields {
            for mut z in self.states(self.config.samples) {
                let (mut lo, mut hi) = (z.theta_vel, z.theta_vel);
                for _ in 0..self.config.steps {
                    match billiard_step(curve, z, field, self.config.tolerance) {
                        Ok(next) => z = next,
                        Err(e) => return failed("circle_integrability", 1e-8, e),
                    }
                    lo = lo.min(z.theta_vel);
                    hi = hi.max(z.theta_vel);
                }
                worst = worst.max(hi - lo);
            }
        }
        check("circle_integrability", worst, 1e-8)
    }

    fn circle_closed_form(&mut self, curve: &BoundaryCurve) -> CheckResult {
        let mut worst: f64 = 0.0;
        for z in self.states(self.config.samples) {
            match billiard_step(curve, z, &FieldParams::zero(), self.config.tolerance) {
                Ok(next) => {
                    let advance = PI - 2.0 * z.theta_vel;
                    worst =
                        worst.max(wrap_difference(next.theta_pos - z.theta_pos - advance).abs());
                }
                Err(e) => return failed("circle_closed_form", 1e-8, e),
            }
        }
        check("circle_closed_form", worst, 1e-8)
    }

    fn circle_oracle(&mut self, curve: &BoundaryCurve, fields: &[FieldParams]) -> CheckResult {
        let mut worst: f64 = 0.0;
        for field in fields {
            for z in self.states(self.config.samples) {
                let stepped = billiard_step(curve, z, field, self.config.tolerance);
                let oracle = circle_field_oracle(curve.semi_axis_a(), field, z);
                match (stepped, oracle) {
                    (Ok(a), Ok(b)) => {
                        worst = worst
                            .max(wrap_difference(a.theta_pos - b.theta_pos).abs())
                            .max((a.theta_vel - b.theta_vel).abs());
                    }
                    (Err(e), _) => return failed("circle_oracle_agreement", 1e-8, e),
                    (_, Err(e)) => return failed("circle_oracle_agreement", 1e-8, e),
                }
            }
        }
        check("circle_oracle_agreement", worst, 1e-8)
    }

    fn joachimsthal(&mut self, curve: &BoundaryCurve) -> CheckResult {
        let mut worst: f64 = 0.0;
        for mut z in self.states(self.config.samples) {
            let mut values = vec![joachimsthal(curve, &phase_to_state(curve, z))];
            for _ in 0..self.config.steps {
                match billiard_step(curve, z, &FieldParams::zero(), self.config.tolerance) {
                    Ok(next) => z = next,
                    Err(e) => return failed("ellipse_joachimsthal", 1e-7, e),
                }
                values.push(joachimsthal(curve, &phase_to_state(curve, z)));
            }
            worst = worst.max(relative_spread(&values));
        }
        check("ellipse_joachimsthal", worst, 1e-7)
    }

    fn symplectic(&mut self, cases: &[(BoundaryCurve, FieldParams)]) -> CheckResult {
        let mut worst: f64 = 0.0;
        for (curve, field) in cases {
            for z in self.states(self.config.samples) {
                match symplectic_defect(curve, z, field, DEFAULT_FD_STEP) {
                    Ok(d) => worst = worst.max(d),
                    Err(e) => return failed("symplectic_defect", 1e-4, e),
                }
            }
        }
        check("symplectic_defect", worst, 1e-4)
    }

    fn reversibility(&mut self, cases: &[(BoundaryCurve, FieldParams)]) -> CheckResult {
        let mut worst: f64 = 0.0;
        for (curve, field) in cases {
            for z in self.states(self.config.samples) {
                match reversibility_defect(curve, z, field, self.config.steps) {
                    Ok(d) => worst = worst.max(d),
                    Err(e) => return failed("reversibility_defect", 1e-6, e),
                }
            }
        }
        check("reversibility_defect", worst, 1e-6)
    }

    fn straight_line_limit(&mut self, curve: &BoundaryCurve) -> CheckResult {
        let weak = FieldParams::new(1e-6);
        let mut worst: f64 = 0.0;
        for z in self.states(self.config.samples) {
            let line = billiard_step(curve, z, &FieldParams::zero(), self.config.tolerance);
            let arc = billiard_step(curve, z, &weak, self.config.tolerance);
            match (line, arc) {
                (Ok(a), Ok(b)) => {
                    worst = worst
                        .max(wrap_difference(a.theta_pos - b.theta_pos).abs())
                        .max((a.theta_vel - b.theta_vel).abs());
                }
                (Err(e), _) | (_, Err(e)) => return failed("straight_line_limit", 1e-4, e),
            }
        }
        check("straight_line_limit", worst, 1e-4)
    }
}

fn check(name: &str, measured: f64, bound: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        measured,
        bound,
        failure: None,
    }
}

fn failed(name: &str, bound: f64, error: impl fmt::Display) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        measured: f64::NAN,
        bound,
        failure: Some(error.to_string()),
    }
}

/// Runs the invariant checks at desk scale.
pub fn verify(config: &VerifyConfig) -> VerifyReport {
    let mut checker = Checker {
        config,
        rng: ChaCha8Rng::seed_from_u64(config.master_seed),
    };
    let mut report = VerifyReport::default();
    match config.scenario {
        None => {
            let ellipse = BoundaryCurve::new(10.0, 8.0, 2.0).expect("valid ellipse");
            let perturbed = BoundaryCurve::new(10.0, 8.0, 2.005).expect("valid superellipse");
            let circle = BoundaryCurve::circle(10.0).expect("valid circle");
            let grid: Vec<(BoundaryCurve, FieldParams)> = [ellipse, perturbed]
                .iter()
                .flat_map(|c| [0.0, 0.01, 0.5, 1.0, 2.0].map(|b| (*c, FieldParams::new(b))))
                .collect();
            let circle_fields = [0.0, 0.01, 0.5, 1.0, 2.0].map(FieldParams::new);
            let oracle_fields = [0.1, 0.5, 1.0, 2.0].map(FieldParams::new);
            report.checks.push(checker.boundary_residual(&grid));
            report
                .checks
                .push(checker.circle_integrability(&circle, &circle_fields));
            report.checks.push(checker.circle_closed_form(&circle));
            report
                .checks
                .push(checker.circle_oracle(&circle, &oracle_fields));
            report.checks.push(checker.joachimsthal(&ellipse));
            report.checks.push(checker.symplectic(&grid));
            report.checks.push(checker.reversibility(&grid));
            report.checks.push(checker.straight_line_limit(&ellipse));
        }
        Some((curve, field)) => {
            let case = [(curve, field)];
            report.checks.push(checker.boundary_residual(&case));
            if curve.is_circle() {
                report
                    .checks
                    .push(checker.circle_integrability(&curve, &[field]));
                if field.is_zero() {
                    report.checks.push(checker.circle_closed_form(&curve));
                } else {
                    report.checks.push(checker.circle_oracle(&curve, &[field]));
                }
            }
            if curve.power_p() == 2.0 && field.is_zero() {
                report.checks.push(checker.joachimsthal(&curve));
            }
            report.checks.push(checker.symplectic(&case));
            report.checks.push(checker.reversibility(&case));
        }
    }
    report
}

impl VerifyArgs {
    pub fn to_config(&self) -> Result<(VerifyConfig, Vec<String>), CliError> {
        check_tolerance(self.tolerance)?;
        let geometry_given =
            self.field_b.is_some() || self.semi_axis_b.is_some() || self.eccentricity.is_some();
        let mut warnings = Vec::new();
        let scenario = if geometry_given {
            let (curve, w) = if self.semi_axis_b.is_none() && self.eccentricity.is_none() {
                resolve_geometry(self.semi_axis_a, Some(self.semi_axis_a), None, self.power_p)?
            } else {
                resolve_geometry(
                    self.semi_axis_a,
                    self.semi_axis_b,
                    self.eccentricity,
                    self.power_p,
                )?
            };
            warnings = w;
            Some((curve, FieldParams::new(self.field_b.unwrap_or(0.0))))
        } else {
            None
        };
        Ok((
            VerifyConfig {
                scenario,
                tolerance: self.tolerance,
                master_seed: self.master_seed,
                samples: self.samples.max(1),
                steps: 100,
            },
            warnings,
        ))
    }
}

/// Runs a parsed command line; the returned text is printed on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Simulate(args) => {
            let (bundle, warnings) = simulate(args)?;
            Ok(summary(&warnings, &bundle))
        }
        Command::Plot(args) => {
            let warnings = plot(args)?;
            let mut text = warnings.join("\n");
            text.push_str(&format!(
                "\nfigures written to {}",
                args.output_directory.display()
            ));
            Ok(text.trim_start().to_string())
        }
        Command::Verify(args) => {
            let (config, warnings) = args.to_config()?;
            for w in &warnings {
                eprintln!("{w}");
            }
            let report = verify(&config);
            println!("{report}");
            if report.passed() {
                Ok(String::new())
            } else {
                Err(CliError::VerificationFailed)
            }
        }
        Command::Example(args) => {
            let preset = example_preset(&args.which)?;
            let (_, warnings) = resolve_geometry(
                DEFAULT_SEMI_AXIS_A,
                None,
                Some(preset.eccentricity),
                preset.power_p,
            )?;
            let bundle = run_example(&args.which, args.master_seed, &args.output_directory)?;
            Ok(summary(&warnings, &bundle))
        }
    }
}

fn summary(warnings: &[String], bundle: &RunBundle) -> String {
    let mut text = String::new();
    for w in warnings {
        text.push_str(w);
        text.push('\n');
    }
    let steps: usize = bundle.records.iter().map(|r| r.points.len() - 1).sum();
    let early = bundle
        .records
        .iter()
        .filter(|r| r.flags.terminated_early)
        .count();
    text.push_str(&format!(
        "{} orbits, {steps} reflections ({early} orbits stopped early)\nwrote {}",
        bundle.records.len(),
        bundle.directory.display()
    ));
    text
}
