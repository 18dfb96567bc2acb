//! Power landscape of one device moved over a rectangular grid, plus SVG
//! layout drawings.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::{RegularWave, SiteClimate};
use crate::dynamics::{FarmDesign, Simulator};
use crate::error::{Error, Result};
use crate::hydro::{check_overlap, wavenumber, BackendKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    /// Index of the moving device.
    pub device: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            x_min: 0.0,
            x_max: 300.0,
            nx: 31,
            y_min: -300.0,
            y_max: 300.0,
            ny: 121,
            device: 1,
        }
    }
}

fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    (0..n)
        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sweep values indexed `[ix][iy]`. Overlapping positions hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Distance of the moving device to the origin (m).
    pub distance: Vec<Vec<f64>>,
    /// All spacing constraints hold.
    pub feasible: Vec<Vec<bool>>,
    /// Saturated farm power (W).
    pub power: Vec<Vec<f64>>,
    /// Unsaturated farm power over `n` isolated devices.
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    /// `2 pi / k` for a regular wave (m).
    pub wavelength: Option<f64>,
    /// Oscillation period of `q` along the line through the origin
    /// perpendicular to the wave direction (m).
    pub radial_period: Option<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub q_peak_to_trough: f64,
    pub power_min: f64,
    pub power_max: f64,
}

/// Moves device `spec.device` over the grid with all other devices fixed.
pub fn run_sweep(
    sim: &Simulator,
    template: &FarmDesign,
    spec: &SweepSpec,
    regular: Option<RegularWave>,
    climate: Option<&SiteClimate>,
    p_limit: Option<f64>,
    safety: f64,
) -> Result<SweepField> {
    if spec.device == 0 || spec.device >= template.n_wec() {
        return Err(Error::Config(format!(
            "sweep device {} must be in 1..{}",
            spec.device,
            template.n_wec()
        )));
    }
    if spec.nx == 0 || spec.ny == 0 || !(spec.x_max >= spec.x_min) || !(spec.y_max >= spec.y_min) {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let farm = |design: &FarmDesign, sim: &Simulator| -> Result<(f64, f64)> {
        match (regular, climate) {
            (Some(w), _) => {
                let per = sim.regular_power(design, &w)?;
                let unsat = per.iter().sum();
                let sat = per.iter().map(|&p| p_limit.map_or(p, |l| p.min(l))).sum();
                Ok((sat, unsat))
            }
            (None, Some(c)) => {
                let pm = sim.power_matrix(design, &c.axes(), p_limit)?;
                Ok((pm.weighted(c, true)?, pm.weighted(c, false)?))
            }
            (None, None) => Err(Error::Config("sweep needs a regular wave or a climate".into())),
        }
    };
    let mut alone = sim.clone();
    alone.backend.kind = BackendKind::Isolated;
    let single = FarmDesign::single(template.geom, template.pto);
    let reference = template.n_wec() as f64 * farm(&single, &alone)?.1;

    let xs = axis(spec.x_min, spec.x_max, spec.nx);
    let ys = axis(spec.y_min, spec.y_max, spec.ny);
    let radius = template.geom.radius();
    let points: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..ys.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<(f64, bool, f64, f64)> = points
        .par_iter()
        .map(|&(i, j)| {
            let mut layout = template.layout.clone();
            layout[spec.device] = (xs[i], ys[j]);
            let d = xs[i].hypot(ys[j]);
            let feasible = super::distance_constraints(&layout, radius, safety).is_feasible();
            if check_overlap(&layout, radius).is_err() {
                return Ok((d, false, f64::NAN, f64::NAN));
            }
            let design = FarmDesign::new(template.geom, template.pto, layout)?;
            let (sat, unsat) = farm(&design, sim)?;
            Ok((d, feasible, sat, unsat / reference))
        })
        .collect::<Result<_>>()?;

    let mut field = SweepField {
        distance: vec![vec![0.0; ys.len()]; xs.len()],
        feasible: vec![vec![false; ys.len()]; xs.len()],
        power: vec![vec![0.0; ys.len()]; xs.len()],
        q: vec![vec![0.0; ys.len()]; xs.len()],
        xs,
        ys,
    };
    for (&(i, j), &(d, f, p, q)) in points.iter().zip(&values) {
        field.distance[i][j] = d;
        field.feasible[i][j] = f;
        field.power[i][j] = p;
        field.q[i][j] = q;
    }
    Ok(field)
}

impl SweepField {
    fn feasible_values<'a>(&'a self, v: &'a [Vec<f64>]) -> impl Iterator<Item = f64> + 'a {
        v.iter()
            .flatten()
            .zip(self.feasible.iter().flatten())
            .filter(|(_, &f)| f)
            .map(|(&x, _)| x)
    }

    /// `max q - min q` over feasible positions.
    pub fn q_peak_to_trough(&self) -> f64 {
        let (lo, hi) = min_max(self.feasible_values(&self.q));
        hi - lo
    }

    pub fn summary(&self, omega: Option<f64>, depth: f64) -> SweepSummary {
        let (q_min, q_max) = min_max(self.feasible_values(&self.q));
        let (power_min, power_max) = min_max(self.feasible_values(&self.power));
        SweepSummary {
            wavelength: omega.map(|w| 2.0 * std::f64::consts::PI / wavenumber(w, depth)),
            radial_period: landscape_period(self),
            q_min,
            q_max,
            q_peak_to_trough: q_max - q_min,
            power_min,
            power_max,
        }
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Oscillation period of `q - 1` along the grid column closest to `x = 0`,
/// on the `y > 0` side and over feasible positions only. Twice the mean
/// spacing of interpolated zero crossings; `None` with fewer than two.
pub fn landscape_period(field: &SweepField) -> Option<f64> {
    let ix = (0..field.xs.len()).min_by(|&a, &b| field.xs[a].abs().total_cmp(&field.xs[b].abs()))?;
    let samples: Vec<(f64, f64)> = (0..field.ys.len())
        .filter(|&j| field.ys[j] > 0.0 && field.feasible[ix][j] && field.q[ix][j].is_finite())
        .map(|j| (field.distance[ix][j], field.q[ix][j] - 1.0))
        .collect();
    let mut crossings = Vec::new();
    for w in samples.windows(2) {
        let ((d0, v0), (d1, v1)) = (w[0], w[1]);
        if v0 == 0.0 {
            crossings.push(d0);
        } else if v0 * v1 < 0.0 {
            crossings.push(d0 + (d1 - d0) * v0 / (v0 - v1));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(2.0 * span / (crossings.len() - 1) as f64)
}

pub(crate) fn write_field_header<W: Write>(sink: &mut W) -> Result<()> {
    writeln!(sink, "case,x_m,y_m,distance_m,feasible,farm_power_W,q")?;
    Ok(())
}

pub(crate) fn write_field_rows<W: Write>(field: &SweepField, case: usize, sink: &mut W) -> Result<()> {
    for (i, x) in field.xs.iter().enumerate() {
        for (j, y) in field.ys.iter().enumerate() {
            writeln!(
                sink,
                "{case},{x},{y},{},{},{},{}",
                field.distance[i][j], field.feasible[i][j], field.power[i][j], field.q[i][j]
            )?;
        }
    }
    Ok(())
}

/// Rectangular field CSV `case,x_m,y_m,distance_m,feasible,farm_power_W,q`
/// for a single sweep.
pub fn write_field_csv<W: Write>(field: &SweepField, mut sink: W) -> Result<()> {
    write_field_header(&mut sink)?;
    write_field_rows(field, 0, &mut sink)
}

/// Draws the layout to scale: each hull of radius `R` over a disc of radius
/// `R + s_d / 2`. Two discs touch exactly when a pair sits at `2R + s_d`.
pub fn write_layout_svg<W: Write>(
    design: &FarmDesign,
    safety: f64,
    title: &str,
    sink: &mut W,
) -> Result<()> {
    let r = design.geom.radius();
    let halo = r + 0.5 * safety;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &design.layout {
        x0 = x0.min(x - halo);
        x1 = x1.max(x + halo);
        y0 = y0.min(y - halo);
        y1 = y1.max(y + halo);
    }
    let margin = 0.1 * (x1 - x0).max(y1 - y0);
    let (x0, y0) = (x0 - margin, y0 - margin);
    let (w, h) = (x1 - x0 + margin, y1 - y0 + margin);
    let scale = 600.0 / w.max(h);
    let px = |x: f64| (x - x0) * scale;
    let py = |y: f64| (y0 + h - y) * scale;
    writeln!(
        sink,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="0 0 {:.1} {:.1}">"#,
        w * scale,
        h * scale + 24.0,
        w * scale,
        h * scale + 24.0
    )?;
    writeln!(sink, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    for &(x, y) in &design.layout {
        writeln!(
            sink,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="orange" fill-opacity="0.3" stroke="orange"/>"#,
            px(x),
            py(y),
            halo * scale
        )?;
    }
    for (i, &(x, y)) in design.layout.iter().enumerate() {
        writeln!(
            sink,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="green" stroke="black" stroke-width="0.5"/>"#,
            px(x),
            py(y),
            r * scale
        )?;
        writeln!(
            sink,
            r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="middle">{}</text>"#,
            px(x),
            py(y) - halo * scale - 2.0,
            i + 1
        )?;
    }
    writeln!(
        sink,
        r#"<text x="4" y="{:.1}" font-size="12">{} (R = {} m, s_d = {} m, waves along +x)</text>"#,
        h * scale + 18.0,
        escape(title),
        r,
        safety
    )?;
    writeln!(sink, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
