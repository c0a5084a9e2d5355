//! Orbit data files, run metadata and SVG figures.
//!
//! The data file is comma-separated text with the header
//! `orbit_id,step_index,theta_pos,theta_vel,x,y` and one row per recorded
//! phase point, floats written with 17 significant digits. Metadata is a
//! sibling `key=value` file. Figures are standalone SVG 1.1 documents: a phase
//! portrait over `[0, 2 pi] x [-pi/2, pi/2]` and a configuration-space plot of
//! reflection points on the table.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::boundary::BoundaryCurve;
use crate::ensemble::{orbit_seed, EnsembleConfig, OrbitFlags, OrbitRecord, RNG_IDENTIFIER};
use crate::stepper::{phase_to_state, FieldParams, PhasePoint};
use crate::vec2::Vec2;

pub const DATA_HEADER: &str = "orbit_id,step_index,theta_pos,theta_vel,x,y";

/// Background points beyond this count are thinned by an even stride.
pub const MAX_BACKGROUND_POINTS: usize = 2_000_000;

/// Vertices of the boundary polyline in table figures.
pub const BOUNDARY_POLYLINE_POINTS: usize = 2048;

/// Colorblind-safe qualitative palette (Okabe-Ito, without yellow and black).
pub const FIXED_PALETTE: [&str; 6] = [
    "#E69F00", "#56B4E9", "#009E73", "#CC79A7", "#0072B2", "#D55E00",
];

pub const BACKGROUND_COLOR: &str = "#9A9A9A";

/// Points per `<path>` element for large groups.
const POINTS_PER_PATH: usize = 10_000;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("nothing to write: no orbit records")]
    Empty,
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Ordered `key=value` run metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetadata {
    entries: Vec<(String, String)>,
}

impl RunMetadata {
    /// Full ensemble configuration plus generator and tool identification.
    pub fn for_config(config: &EnsembleConfig) -> Self {
        let mut meta = Self::default();
        meta.insert("tool", concat!("magbill ", env!("CARGO_PKG_VERSION")));
        meta.insert("rng", RNG_IDENTIFIER);
        meta.insert("magnetic_field", config.field.field_strength());
        meta.insert("larmor_radius", config.field.larmor_radius());
        meta.insert("semi_axis_a", config.curve.semi_axis_a());
        meta.insert("semi_axis_b", config.curve.semi_axis_b());
        meta.insert("power", config.curve.power_p());
        meta.insert("number_of_orbits", config.number_of_orbits);
        meta.insert("points_per_orbit", config.points_per_orbit);
        meta.insert("cutoff_delta", config.cutoff_delta);
        meta.insert("tolerance", config.tolerance);
        meta.insert("master_seed", config.master_seed);
        meta.insert("highlight_count", config.highlight_count);
        meta
    }

    /// Sets `key`, replacing an earlier value.
    pub fn insert(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(text, "{k}={v}");
        }
        std::fs::write(path, text).map_err(io_error(path))
    }

    pub fn read(path: &Path) -> Result<Self, OutputError> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let mut meta = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| OutputError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            meta.insert(k, v);
        }
        Ok(meta)
    }
}

/// Path of the metadata file that accompanies a data file.
pub fn metadata_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta")
}

/// Writes the orbit table to `path` and `metadata` next to it.
pub fn write_orbit_data(
    records: &[OrbitRecord],
    metadata: &RunMetadata,
    path: &Path,
) -> Result<(), OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let mut write_all = || -> io::Result<()> {
        writeln!(out, "{DATA_HEADER}")?;
        for rec in records {
            for (step, (z, q)) in rec.points.iter().zip(&rec.positions).enumerate() {
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    rec.orbit_id, step, z.theta_pos, z.theta_vel, q.x, q.y
                )?;
            }
        }
        out.flush()
    };
    write_all().map_err(io_error(path))?;
    metadata.write(&metadata_path(path))
}

/// Reads a data file written by [`write_orbit_data`].
///
/// Seeds and flags are not part of the table; they come back as zero/default.
pub fn read_orbit_data(path: &Path) -> Result<Vec<OrbitRecord>, OutputError> {
    let file = File::open(path).map_err(io_error(path))?;
    let parse_err = |line: usize, message: String| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut records: Vec<OrbitRecord> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if i == 0 {
            if line != DATA_HEADER {
                return Err(parse_err(1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(
                i + 1,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(i + 1, e.to_string()))
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_err(i + 1, e.to_string()))
        };
        let orbit_id = int(fields[0])?;
        let step = int(fields[1])?;
        let z = PhasePoint {
            theta_pos: float(fields[2])?,
            theta_vel: float(fields[3])?,
        };
        let q = Vec2::new(float(fields[4])?, float(fields[5])?);
        if records.last().map(|r| r.orbit_id) != Some(orbit_id) {
            records.push(OrbitRecord {
                orbit_id,
                orbit_seed: 0,
                points: Vec::new(),
                positions: Vec::new(),
                flags: OrbitFlags::default(),
            });
        }
        let rec = records.last_mut().unwrap();
        if step != rec.points.len() {
            return Err(parse_err(i + 1, format!("step {step} out of sequence")));
        }
        rec.points.push(z);
        rec.positions.push(q);
    }
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaletteMode {
    /// Highlighted orbits take the fixed palette, everything else is gray.
    FixedSix,
    /// Every orbit gets its own seeded random hue.
    RandomPerOrbit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotStyle {
    pub highlighted_orbit_ids: Vec<usize>,
    pub palette_mode: PaletteMode,
    pub background_point_size: f64,
    pub highlight_point_size: f64,
    /// Reflection points per highlighted orbit drawn on the table.
    pub points_on_table: usize,
    /// Seed of the random-per-orbit hues.
    pub color_seed: u64,
    /// Draw the chords or Larmor arcs between table points for this field.
    pub overlay_field: Option<FieldParams>,
}

impl PlotStyle {
    pub fn new(
        highlighted_orbit_ids: Vec<usize>,
        palette_mode: PaletteMode,
        points_on_table: usize,
    ) -> Self {
        let mut seen = HashSet::new();
        let highlighted_orbit_ids = highlighted_orbit_ids
            .into_iter()
            .filter(|id| seen.insert(*id))
            .collect();
        Self {
            highlighted_orbit_ids,
            palette_mode,
            background_point_size: 0.9,
            highlight_point_size: 1.8,
            points_on_table,
            color_seed: 0,
            overlay_field: None,
        }
    }

    /// Stroke color of an orbit; `None` means background gray.
    pub fn orbit_color(&self, orbit_id: usize) -> Option<String> {
        if let Some(rank) = self
            .highlighted_orbit_ids
            .iter()
            .position(|&id| id == orbit_id)
        {
            return Some(match self.palette_mode {
                PaletteMode::FixedSix => FIXED_PALETTE[rank % FIXED_PALETTE.len()].to_string(),
                PaletteMode::RandomPerOrbit => self.random_color(orbit_id),
            });
        }
        match self.palette_mode {
            PaletteMode::FixedSix => None,
            PaletteMode::RandomPerOrbit => Some(self.random_color(orbit_id)),
        }
    }

    fn random_color(&self, orbit_id: usize) -> String {
        let bits = orbit_seed(self.color_seed ^ 0xC010_55EE_D000_0000, orbit_id as u64);
        let hue = (bits >> 11) as f64 / (1u64 << 53) as f64;
        hsl_to_hex(hue, 0.75, 0.45)
    }

    fn is_highlighted(&self, orbit_id: usize) -> bool {
        self.highlighted_orbit_ids.contains(&orbit_id)
    }
}

fn hsl_to_hex(h: f64, s: f64, l: f64) -> String {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h * 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02X}{:02X}{:02X}", to_byte(r), to_byte(g), to_byte(b))
}

/// Stride applied to background points so that at most
/// [`MAX_BACKGROUND_POINTS`] are drawn.
pub fn portrait_stride(records: &[OrbitRecord], style: &PlotStyle) -> usize {
    let background: usize = records
        .iter()
        .filter(|r| {
            style.palette_mode == PaletteMode::RandomPerOrbit || !style.is_highlighted(r.orbit_id)
        })
        .map(|r| r.points.len())
        .sum();
    background.div_ceil(MAX_BACKGROUND_POINTS).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderSummary {
    pub stride: usize,
    pub points_drawn: usize,
}

/// Accumulates round-capped zero-length subpaths, which render as dots.
struct DotPath<'a> {
    out: &'a mut dyn Write,
    color: String,
    width: f64,
    data: String,
    count: usize,
}

impl<'a> DotPath<'a> {
    fn new(out: &'a mut dyn Write, color: &str, width: f64) -> Self {
        Self {
            out,
            color: color.to_string(),
            width,
            data: String::new(),
            count: 0,
        }
    }

    fn dot(&mut self, x: f64, y: f64) -> io::Result<()> {
        let _ = write!(self.data, "M{x:.2} {y:.2}h0");
        self.count += 1;
        if self.count.is_multiple_of(POINTS_PER_PATH) {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        if !self.data.is_empty() {
            writeln!(
                self.out,
                r#"<path fill="none" stroke="{}" stroke-width="{}" stroke-linecap="round" d="{}"/>"#,
                self.color, self.width, self.data
            )?;
            self.data.clear();
        }
        Ok(())
    }
}

fn svg_open(out: &mut dyn Write, width: f64, height: f64) -> io::Result<()> {
    writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    )?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )?;
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    )
}

/// Layout of the phase portrait in SVG user units.
pub mod portrait_layout {
    pub const WIDTH: f64 = 1000.0;
    pub const HEIGHT: f64 = 560.0;
    pub const LEFT: f64 = 80.0;
    pub const RIGHT: f64 = 980.0;
    pub const TOP: f64 = 20.0;
    pub const BOTTOM: f64 = 500.0;
}

fn portrait_xy(z: &PhasePoint) -> (f64, f64) {
    use portrait_layout::*;
    let x = LEFT + (RIGHT - LEFT) * z.theta_pos / TAU;
    let y = BOTTOM - (BOTTOM - TOP) * (z.theta_vel + FRAC_PI_2) / PI;
    (x, y)
}

pub fn write_phase_portrait(
    out: &mut dyn Write,
    records: &[OrbitRecord],
    style: &PlotStyle,
) -> io::Result<RenderSummary> {
    use portrait_layout::*;
    svg_open(out, WIDTH, HEIGHT)?;
    writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    )?;
    let x_ticks = [
        (0.0, "0"),
        (0.25, "π/2"),
        (0.5, "π"),
        (0.75, "3π/2"),
        (1.0, "2π"),
    ];
    for (f, label) in x_ticks {
        let x = LEFT + (RIGHT - LEFT) * f;
        writeln!(
            out,
            r#"<line x1="{x}" y1="{BOTTOM}" x2="{x}" y2="{}" stroke="black"/>"#,
            BOTTOM + 6.0
        )?;
        writeln!(
            out,
            r#"<text x="{x}" y="{}" font-family="serif" font-size="16" text-anchor="middle">{label}</text>"#,
            BOTTOM + 24.0
        )?;
    }
    let y_ticks = [(0.0, "−π/2"), (0.5, "0"), (1.0, "π/2")];
    for (f, label) in y_ticks {
        let y = BOTTOM - (BOTTOM - TOP) * f;
        writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#,
            LEFT - 6.0
        )?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="serif" font-size="16" text-anchor="end">{label}</text>"#,
            LEFT - 10.0,
            y + 5.0
        )?;
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="serif" font-size="18" text-anchor="middle">θ<tspan baseline-shift="sub" font-size="12">pos</tspan></text>"#,
        0.5 * (LEFT + RIGHT),
        HEIGHT - 12.0
    )?;
    writeln!(
        out,
        r#"<text x="22" y="{}" font-family="serif" font-size="18" text-anchor="middle" transform="rotate(-90 22 {})">θ<tspan baseline-shift="sub" font-size="12">vel</tspan></text>"#,
        0.5 * (TOP + BOTTOM),
        0.5 * (TOP + BOTTOM)
    )?;

    let stride = portrait_stride(records, style);
    let mut drawn = 0;
    let strided = |rec: &OrbitRecord| {
        style.palette_mode == PaletteMode::RandomPerOrbit || !style.is_highlighted(rec.orbit_id)
    };

    // gray background first, colored orbits on top
    {
        let mut gray = DotPath::new(out, BACKGROUND_COLOR, style.background_point_size);
        let mut counter = 0usize;
        for rec in records
            .iter()
            .filter(|r| style.orbit_color(r.orbit_id).is_none())
        {
            for z in &rec.points {
                if counter.is_multiple_of(stride) {
                    let (x, y) = portrait_xy(z);
                    gray.dot(x, y)?;
                    drawn += 1;
                }
                counter += 1;
            }
        }
        gray.flush()?;
    }
    let mut counter = 0usize;
    let colored = records
        .iter()
        .filter_map(|r| style.orbit_color(r.orbit_id).map(|c| (r, c)))
        .filter(|(r, _)| !style.is_highlighted(r.orbit_id))
        .chain(
            style
                .highlighted_orbit_ids
                .iter()
                .filter_map(|id| records.iter().find(|r| r.orbit_id == *id))
                .map(|r| (r, style.orbit_color(r.orbit_id).unwrap())),
        );
    for (rec, color) in colored {
        let highlighted = style.is_highlighted(rec.orbit_id);
        let size = if highlighted {
            style.highlight_point_size
        } else {
            style.background_point_size
        };
        let mut path = DotPath::new(out, &color, size);
        for z in &rec.points {
            let keep = !strided(rec) || highlighted || counter.is_multiple_of(stride);
            if !highlighted {
                counter += 1;
            }
            if keep {
                let (x, y) = portrait_xy(z);
                path.dot(x, y)?;
                drawn += 1;
            }
        }
        path.flush()?;
    }
    writeln!(out, "</svg>")?;
    Ok(RenderSummary {
        stride,
        points_drawn: drawn,
    })
}

fn create_svg(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(io_error(path))
}

pub fn render_phase_portrait(
    records: &[OrbitRecord],
    style: &PlotStyle,
    path: &Path,
) -> Result<RenderSummary, OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut out = create_svg(path)?;
    let summary = write_phase_portrait(&mut out, records, style).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))?;
    Ok(summary)
}

/// Maps table coordinates to SVG coordinates with equal aspect.
#[derive(Clone, Copy, Debug)]
pub struct TableFrame {
    pub scale: f64,
    pub width: f64,
    pub height: f64,
    pub margin: f64,
}

impl TableFrame {
    pub fn for_curve(curve: &BoundaryCurve) -> Self {
        let margin = 20.0;
        let scale = 640.0 / (2.0 * curve.semi_axis_a().max(curve.semi_axis_b()));
        Self {
            scale,
            width: 2.0 * curve.semi_axis_a() * scale + 2.0 * margin,
            height: 2.0 * curve.semi_axis_b() * scale + 2.0 * margin,
            margin,
        }
    }

    pub fn map(&self, q: Vec2) -> (f64, f64) {
        (
            0.5 * self.width + q.x * self.scale,
            0.5 * self.height - q.y * self.scale,
        )
    }
}

pub fn write_table_figure(
    out: &mut dyn Write,
    curve: &BoundaryCurve,
    records: &[OrbitRecord],
    style: &PlotStyle,
) -> io::Result<usize> {
    let frame = TableFrame::for_curve(curve);
    svg_open(out, frame.width, frame.height)?;
    let mut outline = String::new();
    for k in 0..BOUNDARY_POLYLINE_POINTS {
        let (x, y) =
            frame.map(curve.point_at_polar(TAU * k as f64 / BOUNDARY_POLYLINE_POINTS as f64));
        let _ = write!(outline, "{}{x:.3} {y:.3}", if k == 0 { "M" } else { "L" });
    }
    writeln!(
        out,
        r#"<path fill="none" stroke="black" stroke-width="1.2" d="{outline}Z"/>"#
    )?;

    let mut drawn = 0;
    for id in &style.highlighted_orbit_ids {
        let Some(rec) = records.iter().find(|r| r.orbit_id == *id) else {
            continue;
        };
        let color = style
            .orbit_color(*id)
            .unwrap_or_else(|| BACKGROUND_COLOR.to_string());
        let count = style.points_on_table.min(rec.positions.len());
        if count == 0 {
            continue;
        }
        if let Some(field) = &style.overlay_field {
            write_overlay(
                out,
                curve,
                &frame,
                field,
                &rec.points[..count],
                &rec.positions[..count],
                &color,
            )?;
        }
        let mut dots = DotPath::new(out, &color, 2.0 * style.highlight_point_size);
        for q in &rec.positions[..count] {
            let (x, y) = frame.map(*q);
            dots.dot(x, y)?;
            drawn += 1;
        }
        dots.flush()?;
    }
    writeln!(out, "</svg>")?;
    Ok(drawn)
}

fn write_overlay(
    out: &mut dyn Write,
    curve: &BoundaryCurve,
    frame: &TableFrame,
    field: &FieldParams,
    points: &[PhasePoint],
    positions: &[Vec2],
    color: &str,
) -> io::Result<()> {
    let mut data = String::new();
    for k in 0..positions.len().saturating_sub(1) {
        let (x0, y0) = frame.map(positions[k]);
        let (x1, y1) = frame.map(positions[k + 1]);
        let _ = write!(data, "M{x0:.3} {y0:.3}");
        if field.is_zero() {
            let _ = write!(data, "L{x1:.3} {y1:.3}");
            continue;
        }
        let state = phase_to_state(curve, points[k]);
        let center = field.larmor_center(&state);
        let radius = field.larmor_radius() * frame.scale;
        let swept = (field.orientation()
            * ((positions[k + 1] - center).angle() - (state.position - center).angle()))
        .rem_euclid(TAU);
        // y is flipped on screen, so counterclockwise turning draws with sweep-flag 1
        let sweep = u8::from(field.orientation() > 0.0);
        if swept < 1e-12 {
            let _ = write!(data, "m0 0a{radius:.3} {radius:.3} 0 1 {sweep} 0 0.001");
        } else {
            let large = u8::from(swept > PI);
            let _ = write!(
                data,
                "A{radius:.3} {radius:.3} 0 {large} {sweep} {x1:.3} {y1:.3}"
            );
        }
    }
    writeln!(
        out,
        r#"<path fill="none" stroke="{color}" stroke-width="0.5" stroke-opacity="0.6" d="{data}"/>"#
    )
}

pub fn render_table_figure(
    curve: &BoundaryCurve,
    records: &[OrbitRecord],
    style: &PlotStyle,
    path: &Path,
) -> Result<usize, OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut out = create_svg(path)?;
    let drawn = write_table_figure(&mut out, curve, records, style).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))?;
    Ok(drawn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::run_ensemble;

    fn small_run() -> (EnsembleConfig, Vec<OrbitRecord>) {
        let curve = BoundaryCurve::new(10.0, 8.0, 2.0).unwrap();
        let mut cfg = EnsembleConfig::new(curve, FieldParams::new(0.5), 10, 30);
        cfg.master_seed = 3;
        let recs = run_ensemble(&cfg);
        (cfg, recs)
    }

    /// All `M x y` dot coordinates in a document.
    fn dots(svg: &str) -> Vec<(f64, f64)> {
        svg.split('M')
            .skip(1)
            .filter_map(|chunk| {
                let body = chunk
                    .strip_suffix("h0")
                    .or_else(|| chunk.split_once("h0").map(|(a, _)| a))?;
                let (x, y) = body.split_once(' ')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect()
    }

    #[test]
    fn data_file_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orbits.csv");
        let (cfg, _) = small_run();
        let rec = OrbitRecord {
            orbit_id: 0,
            orbit_seed: 1,
            points: vec![PhasePoint::new(0.0, 0.0), PhasePoint::new(PI, 0.0)],
            positions: vec![Vec2::new(10.0, 0.0), Vec2::new(-10.0, 0.0)],
            flags: OrbitFlags::default(),
        };
        write_orbit_data(&[rec], &RunMetadata::for_config(&cfg), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), DATA_HEADER);
        let meta = RunMetadata::read(&metadata_path(&path)).unwrap();
        assert_eq!(meta.get("rng"), Some(RNG_IDENTIFIER));
        assert_eq!(meta.get("points_per_orbit"), Some("30"));
        assert!(meta.get("tool").unwrap().starts_with("magbill "));
    }

    #[test]
    fn data_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orbits.csv");
        let (cfg, recs) = small_run();
        write_orbit_data(&recs, &RunMetadata::for_config(&cfg), &path).unwrap();
        let back = read_orbit_data(&path).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.orbit_id, b.orbit_id);
            assert_eq!(a.points, b.points);
            assert_eq!(a.positions, b.positions);
        }
    }

    #[test]
    fn empty_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_orbit_data(&[], &RunMetadata::default(), &dir.path().join("x.csv"));
        assert!(matches!(err, Err(OutputError::Empty)));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let (cfg, recs) = small_run();
        let path = Path::new("/nonexistent-dir/orbits.csv");
        let err = write_orbit_data(&recs, &RunMetadata::for_config(&cfg), path).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/orbits.csv"));
    }

    #[test]
    fn portrait_points_stay_in_frame() {
        use portrait_layout::*;
        let (_, recs) = small_run();
        let style = PlotStyle::new(vec![0, 1, 2, 3, 4, 5], PaletteMode::FixedSix, 10);
        let mut buf = Vec::new();
        let summary = write_phase_portrait(&mut buf, &recs, &style).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        let total: usize = recs.iter().map(|r| r.points.len()).sum();
        assert_eq!(
            summary,
            RenderSummary {
                stride: 1,
                points_drawn: total
            }
        );
        let pts = dots(&svg);
        assert_eq!(pts.len(), total);
        let r = style.highlight_point_size;
        for (x, y) in pts {
            assert!(x.is_finite() && y.is_finite());
            assert!(x >= LEFT - r && x <= RIGHT + r && y >= TOP - r && y <= BOTTOM + r);
        }
        for color in FIXED_PALETTE {
            assert!(svg.contains(color));
        }
    }

    #[test]
    fn empty_highlight_list_is_all_gray() {
        let (_, recs) = small_run();
        let style = PlotStyle::new(vec![], PaletteMode::FixedSix, 10);
        let mut buf = Vec::new();
        write_phase_portrait(&mut buf, &recs, &style).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert!(svg.contains(BACKGROUND_COLOR));
        assert!(FIXED_PALETTE.iter().all(|c| !svg.contains(c)));
    }

    #[test]
    fn random_palette_colors_every_orbit_deterministically() {
        let (_, recs) = small_run();
        let mut style = PlotStyle::new(vec![0], PaletteMode::RandomPerOrbit, 10);
        style.color_seed = 5;
        let colors: HashSet<String> = recs
            .iter()
            .map(|r| style.orbit_color(r.orbit_id).unwrap())
            .collect();
        assert!(colors.len() > 5);
        let render = || {
            let mut buf = Vec::new();
            write_phase_portrait(&mut buf, &recs, &style).unwrap();
            buf
        };
        let first = render();
        assert_eq!(first, render());
        assert!(!String::from_utf8(first).unwrap().contains(BACKGROUND_COLOR));
    }

    #[test]
    fn stride_kicks_in_above_cap() {
        let rec = OrbitRecord {
            orbit_id: 0,
            orbit_seed: 0,
            points: vec![PhasePoint::new(0.0, 0.0); MAX_BACKGROUND_POINTS + 1],
            positions: vec![],
            flags: OrbitFlags::default(),
        };
        let style = PlotStyle::new(vec![], PaletteMode::FixedSix, 0);
        assert_eq!(portrait_stride(std::slice::from_ref(&rec), &style), 2);
        let style = PlotStyle::new(vec![0], PaletteMode::FixedSix, 0);
        assert_eq!(portrait_stride(&[rec], &style), 1);
    }

    #[test]
    fn table_figure_colors_match_portrait() {
        let (cfg, recs) = small_run();
        let style = PlotStyle::new(vec![2, 7], PaletteMode::FixedSix, 5);
        let mut buf = Vec::new();
        let drawn = write_table_figure(&mut buf, &cfg.curve, &recs, &style).unwrap();
        assert_eq!(drawn, 10);
        let svg = String::from_utf8(buf).unwrap();
        assert!(svg.contains(&style.orbit_color(2).unwrap()));
        assert!(svg.contains(&style.orbit_color(7).unwrap()));
        assert_eq!(style.orbit_color(2).unwrap(), FIXED_PALETTE[0]);
    }

    #[test]
    fn table_figure_without_points_has_only_the_boundary() {
        let (cfg, recs) = small_run();
        let style = PlotStyle::new(vec![0, 1], PaletteMode::FixedSix, 0);
        let mut buf = Vec::new();
        assert_eq!(
            write_table_figure(&mut buf, &cfg.curve, &recs, &style).unwrap(),
            0
        );
        let svg = String::from_utf8(buf).unwrap();
        assert_eq!(svg.matches("<path").count(), 1);
        assert_eq!(svg.matches('L').count(), BOUNDARY_POLYLINE_POINTS - 1);
    }

    #[test]
    fn overlay_draws_arcs() {
        let (cfg, recs) = small_run();
        let mut style = PlotStyle::new(vec![0], PaletteMode::FixedSix, 4);
        style.overlay_field = Some(cfg.field);
        let mut buf = Vec::new();
        write_table_figure(&mut buf, &cfg.curve, &recs, &style).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert_eq!(svg.matches('A').count(), 3);
    }

    #[test]
    fn hsl_primaries() {
        assert_eq!(hsl_to_hex(0.0, 1.0, 0.5), "#FF0000");
        assert_eq!(hsl_to_hex(1.0 / 3.0, 1.0, 0.5), "#00FF00");
    }
}
