//! Farm equation of motion, absorbed power, power matrices and performance
//! metrics.
//!
//! For unit wave amplitude the heave displacements solve
//! `[-omega^2 (M + A) + i omega (B + b_pto I) + (G + k_pto) I] xi = X`
//! and device `i` absorbs `b_pto omega^2 |xi_i|^2 / 2` per squared amplitude.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::{
    jonswap_unchecked, FrequencyGrid, RegularWave, SeaStateBin, SeaStateGrid, SiteClimate,
    SpectrumParams,
};
use crate::error::{Error, Result};
use crate::hydro::{
    array_hydro, array_hydro_cached, isolated_heave_coefficients, BackendKind, CoefficientCache,
    CylinderGeometry, HydroBackend, HydroSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtoParams {
    /// PTO damping (N s/m).
    pub b_pto: f64,
    /// PTO stiffness (N/m).
    pub k_pto: f64,
}

/// Identical devices sharing one PTO setting; body 0 sits at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarmDesign {
    pub geom: CylinderGeometry,
    pub pto: PtoParams,
    pub layout: Vec<(f64, f64)>,
}

impl FarmDesign {
    pub fn new(geom: CylinderGeometry, pto: PtoParams, layout: Vec<(f64, f64)>) -> Result<Self> {
        if layout.is_empty() {
            return Err(Error::invalid("layout must contain at least one body"));
        }
        if layout[0] != (0.0, 0.0) {
            return Err(Error::invalid(format!(
                "the first body must sit at the origin, got {:?}",
                layout[0]
            )));
        }
        if !(pto.b_pto >= 0.0 && pto.b_pto.is_finite()) || !pto.k_pto.is_finite() {
            return Err(Error::invalid(format!("invalid PTO parameters {pto:?}")));
        }
        Ok(FarmDesign { geom, pto, layout })
    }

    /// Single body with the same geometry and PTO.
    pub fn single(geom: CylinderGeometry, pto: PtoParams) -> Self {
        FarmDesign {
            geom,
            pto,
            layout: vec![(0.0, 0.0)],
        }
    }

    pub fn n_wec(&self) -> usize {
        self.layout.len()
    }

    /// Total displaced volume `n pi R^2 D` (m^3).
    pub fn total_volume(&self) -> f64 {
        self.n_wec() as f64 * self.geom.volume()
    }
}

/// Complex heave displacement per unit wave amplitude.
pub fn solve_motion(design: &FarmDesign, hydro: &HydroSet, omega: f64) -> Result<DVector<Complex64>> {
    let n = design.n_wec();
    if hydro.len() != n || hydro.added_mass.nrows() != n {
        return Err(Error::invalid(format!(
            "hydro set has {} bodies, design has {n}",
            hydro.len()
        )));
    }
    let mass = design.geom.mass();
    let stiffness = design.geom.hydrostatic_stiffness() + design.pto.k_pto;
    let b_pto = design.pto.b_pto;
    let imp = DMatrix::from_fn(n, n, |p, q| {
        let diag = p == q;
        let m = hydro.added_mass[(p, q)] + if diag { mass } else { 0.0 };
        let b = hydro.damping[(p, q)] + if diag { b_pto } else { 0.0 };
        let s = if diag { stiffness } else { 0.0 };
        Complex64::new(s - omega * omega * m, omega * b)
    });
    if hydro.excitation.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
        return Ok(DVector::zeros(n));
    }
    let singular = || Error::Singular { omega };
    let scale = imp.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = imp.clone().lu();
    let xi = lu.solve(&hydro.excitation).ok_or_else(singular)?;
    if xi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(singular());
    }
    // A pivot at round-off level means the impedance has no usable inverse.
    let min_pivot = (0..n).map(|i| lu.u()[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(singular());
    }
    Ok(xi)
}

/// Mean absorbed power per device (W) in a regular wave.
pub fn device_power_regular(
    design: &FarmDesign,
    hydro: &HydroSet,
    omega: f64,
    amplitude: f64,
) -> Result<Vec<f64>> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid(format!("amplitude must be positive, got {amplitude}")));
    }
    let xi = solve_motion(design, hydro, omega)?;
    let c = 0.5 * design.pto.b_pto * omega * omega * amplitude * amplitude;
    Ok(xi.iter().map(|z| c * z.norm_sqr()).collect())
}

/// Frequency response of every device on a quadrature grid: absorbed power
/// per unit spectral density, `b_pto omega^2 |xi_i|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmResponse {
    pub omegas: Vec<f64>,
    weights: Vec<f64>,
    /// `[device][frequency]`.
    pub power_density: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl FarmResponse {
    pub fn n_devices(&self) -> usize {
        self.power_density.len()
    }

    /// Per-device mean power (W) in a JONSWAP sea.
    pub fn seastate_power(&self, params: &SpectrumParams) -> Vec<f64> {
        let spectrum: Vec<f64> = self
            .omegas
            .iter()
            .zip(&self.weights)
            .map(|(&w, &q)| q * jonswap_unchecked(w, params))
            .collect();
        self.power_density
            .iter()
            .map(|row| row.iter().zip(&spectrum).map(|(r, s)| r * s).sum())
            .collect()
    }
}

/// Evaluation settings shared by all metrics: quadrature grid, hydrodynamic
/// backend, wave heading and an optional coefficient cache.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub grid: FrequencyGrid,
    pub backend: HydroBackend,
    /// Direction of wave travel from `+x` (rad).
    pub heading: f64,
    pub cache: Option<Arc<CoefficientCache>>,
}

impl Simulator {
    pub fn new(backend: HydroBackend) -> Self {
        Simulator {
            grid: FrequencyGrid::default_grid(),
            backend,
            heading: 0.0,
            cache: None,
        }
    }

    pub fn with_grid(mut self, grid: FrequencyGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_cache(mut self, cache: Arc<CoefficientCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    fn with_backend_kind(&self, kind: BackendKind) -> Simulator {
        let mut sim = self.clone();
        sim.backend.kind = kind;
        sim
    }

    pub fn hydro_at(&self, design: &FarmDesign, omega: f64) -> Result<HydroSet> {
        match &self.cache {
            Some(cache) => array_hydro_cached(
                &design.layout,
                &design.geom,
                omega,
                &self.backend,
                self.heading,
                cache,
            ),
            None => array_hydro(&design.layout, &design.geom, omega, &self.backend, self.heading),
        }
    }

    pub fn response(&self, design: &FarmDesign) -> Result<FarmResponse> {
        let omegas = self.grid.omegas().to_vec();
        let per_freq: Vec<(Vec<f64>, Option<String>)> = omegas
            .par_iter()
            .map(|&w| {
                let hydro = self.hydro_at(design, w)?;
                let xi = solve_motion(design, &hydro, w)?;
                let c = design.pto.b_pto * w * w;
                Ok((xi.iter().map(|z| c * z.norm_sqr()).collect(), hydro.warning))
            })
            .collect::<Result<_>>()?;
        let n = design.n_wec();
        let power_density = (0..n)
            .map(|i| per_freq.iter().map(|(p, _)| p[i]).collect())
            .collect();
        let warnings = per_freq.into_iter().filter_map(|(_, w)| w).collect();
        Ok(FarmResponse {
            omegas,
            weights: self.grid.trapezoid_weights(),
            power_density,
            warnings,
        })
    }

    /// Per-device mean power (W) for one sea-state bin.
    pub fn seastate_power(&self, design: &FarmDesign, bin: &SeaStateBin) -> Result<Vec<f64>> {
        let params = SpectrumParams::with_default_gamma(bin.hs, bin.tp)?;
        Ok(self.response(design)?.seastate_power(&params))
    }

    /// Per-device mean power (W) in a regular wave.
    pub fn regular_power(&self, design: &FarmDesign, wave: &RegularWave) -> Result<Vec<f64>> {
        let hydro = self.hydro_at(design, wave.omega)?;
        device_power_regular(design, &hydro, wave.omega, wave.amplitude)
    }

    pub fn power_matrix(
        &self,
        design: &FarmDesign,
        grid: &SeaStateGrid,
        p_limit: Option<f64>,
    ) -> Result<PowerMatrix> {
        let response = self.response(design)?;
        PowerMatrix::from_response(&response, grid, p_limit)
    }

    /// `(farm, n * single)` unsaturated weighted powers; `single` is the same
    /// device alone and without interaction.
    fn q_parts(&self, design: &FarmDesign, response: &FarmResponse, climate: &SiteClimate) -> Result<(f64, f64)> {
        let grid = climate.axes();
        let farm = PowerMatrix::from_response(response, &grid, None)?.weighted(climate, false)?;
        let single = self.single_matrix(design, &grid, None)?.weighted(climate, false)?;
        Ok((farm, design.n_wec() as f64 * single))
    }

    fn single_matrix(&self, design: &FarmDesign, grid: &SeaStateGrid, p_limit: Option<f64>) -> Result<PowerMatrix> {
        let single = FarmDesign::single(design.geom, design.pto);
        self.with_backend_kind(BackendKind::Isolated)
            .power_matrix(&single, grid, p_limit)
    }

    pub fn q_factor(&self, design: &FarmDesign, climate: &SiteClimate) -> Result<f64> {
        let response = self.response(design)?;
        let (farm, reference) = self.q_parts(design, &response, climate)?;
        ratio(farm, reference)
    }

    /// q-factor in a regular wave.
    pub fn q_factor_regular(&self, design: &FarmDesign, wave: &RegularWave) -> Result<f64> {
        let farm: f64 = self.regular_power(design, wave)?.iter().sum();
        let single = FarmDesign::single(design.geom, design.pto);
        let alone: f64 = self
            .with_backend_kind(BackendKind::Isolated)
            .regular_power(&single, wave)?
            .iter()
            .sum();
        ratio(farm, design.n_wec() as f64 * alone)
    }

    /// Weighted power per unit displaced volume (W/m^3).
    pub fn objective_pv(&self, design: &FarmDesign, climate: &SiteClimate, p_limit: Option<f64>) -> Result<f64> {
        let pm = self.power_matrix(design, &climate.axes(), p_limit)?;
        Ok(pm.weighted(climate, true)? / design.total_volume())
    }

    /// Full set of metrics. `rated` enables the capacity factor.
    pub fn report(
        &self,
        design: &FarmDesign,
        climate: &SiteClimate,
        p_limit: Option<f64>,
        rated: Option<f64>,
    ) -> Result<PerformanceReport> {
        let response = self.response(design)?;
        let grid = climate.axes();
        let pm = PowerMatrix::from_response(&response, &grid, p_limit)?;
        let weighted = pm.weighted(climate, true)?;
        let weighted_unsat = pm.weighted(climate, false)?;
        let single_pm = self.single_matrix(design, &grid, p_limit)?;
        let n = design.n_wec() as f64;
        let q = ratio(weighted_unsat, n * single_pm.weighted(climate, false)?)?;
        let q_sat = ratio(weighted, n * single_pm.weighted(climate, true)?).ok();
        let nat = natural_frequency(design, &self.backend)?;
        let capacity_factor = match rated {
            Some(r) => Some(capacity_factor(weighted, r)?),
            None => None,
        };
        Ok(PerformanceReport {
            n_wec: design.n_wec(),
            backend: self.backend.kind,
            weighted_power: weighted,
            weighted_power_unsaturated: weighted_unsat,
            p_v: weighted / design.total_volume(),
            q_factor: q,
            q_factor_saturated: q_sat,
            capacity_factor,
            natural_frequency: nat.value(),
            peak_bin_power: pm.peak_farm_power(),
            per_device: pm.weighted_per_device(climate)?,
            warnings: dedup(response.warnings),
        })
    }
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    v.dedup();
    v
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator(format!(
            "reference single-device power is {den}"
        )));
    }
    Ok(num / den)
}

/// Per-device power for one bin with a JONSWAP sea on the default grid.
pub fn seastate_power(
    design: &FarmDesign,
    bin: &SeaStateBin,
    grid: &FrequencyGrid,
    backend: &HydroBackend,
) -> Result<Vec<f64>> {
    Simulator::new(*backend)
        .with_grid(grid.clone())
        .seastate_power(design, bin)
}

/// Device and farm power over a rectangular sea-state grid, before and after
/// per-device saturation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerMatrix {
    pub grid: SeaStateGrid,
    pub p_limit: Option<f64>,
    /// `[hs][tp][device]` (W).
    pub unsaturated: Vec<Vec<Vec<f64>>>,
    /// `[hs][tp][device]` (W), clipped at `p_limit`.
    pub saturated: Vec<Vec<Vec<f64>>>,
}

impl PowerMatrix {
    /// Builds a matrix from unsaturated device powers `[hs][tp][device]`.
    pub fn from_unsaturated(
        grid: SeaStateGrid,
        unsaturated: Vec<Vec<Vec<f64>>>,
        p_limit: Option<f64>,
    ) -> Result<Self> {
        if let Some(limit) = p_limit {
            if !(limit >= 0.0) {
                return Err(Error::invalid(format!("p_limit must be >= 0, got {limit}")));
            }
        }
        if unsaturated.len() != grid.hs.len() || unsaturated.iter().any(|r| r.len() != grid.tp.len()) {
            return Err(Error::invalid("power entries do not match the sea-state grid"));
        }
        let saturated = unsaturated
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        cell.iter()
                            .map(|&p| match p_limit {
                                Some(limit) => p.min(limit),
                                None => p,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(PowerMatrix {
            grid,
            p_limit,
            unsaturated,
            saturated,
        })
    }

    pub fn from_response(response: &FarmResponse, grid: &SeaStateGrid, p_limit: Option<f64>) -> Result<Self> {
        let mut entries = Vec::with_capacity(grid.hs.len());
        for &hs in &grid.hs {
            let mut row = Vec::with_capacity(grid.tp.len());
            for &tp in &grid.tp {
                let params = SpectrumParams::with_default_gamma(hs, tp)?;
                row.push(response.seastate_power(&params));
            }
            entries.push(row);
        }
        Self::from_unsaturated(grid.clone(), entries, p_limit)
    }

    pub fn n_devices(&self) -> usize {
        self.unsaturated
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len)
    }

    pub fn farm_power(&self, hs_idx: usize, tp_idx: usize, saturated: bool) -> f64 {
        let cells = if saturated { &self.saturated } else { &self.unsaturated };
        cells[hs_idx][tp_idx].iter().sum()
    }

    pub fn peak_farm_power(&self) -> f64 {
        (0..self.grid.hs.len())
            .flat_map(|i| (0..self.grid.tp.len()).map(move |j| (i, j)))
            .map(|(i, j)| self.farm_power(i, j, true))
            .fold(0.0, f64::max)
    }

    fn locate(&self, bin: &SeaStateBin) -> Result<(usize, usize)> {
        match (self.grid.hs_index(bin.hs), self.grid.tp_index(bin.tp)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(Error::Coverage {
                hs: bin.hs,
                tp: bin.tp,
            }),
        }
    }

    /// `(1/n_yr) sum_years sum_bins prob * farm_power(bin)`.
    pub fn weighted(&self, climate: &SiteClimate, saturated: bool) -> Result<f64> {
        let mut total = 0.0;
        for year in &climate.years {
            for bin in year.bins.iter().filter(|b| b.prob > 0.0) {
                let (i, j) = self.locate(bin)?;
                total += bin.prob * self.farm_power(i, j, saturated);
            }
        }
        Ok(total / climate.n_yr() as f64)
    }

    /// Saturated weighted power of each device.
    pub fn weighted_per_device(&self, climate: &SiteClimate) -> Result<Vec<f64>> {
        let mut totals = vec![0.0; self.n_devices()];
        for year in &climate.years {
            for bin in year.bins.iter().filter(|b| b.prob > 0.0) {
                let (i, j) = self.locate(bin)?;
                for (t, p) in totals.iter_mut().zip(&self.saturated[i][j]) {
                    *t += bin.prob * p;
                }
            }
        }
        let n = climate.n_yr() as f64;
        Ok(totals.into_iter().map(|t| t / n).collect())
    }

    /// Writes `hs_m,tp_s,device,unsat_W,sat_W`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["hs_m", "tp_s", "device", "unsat_W", "sat_W"])
            .map_err(csv_err)?;
        for (i, &hs) in self.grid.hs.iter().enumerate() {
            for (j, &tp) in self.grid.tp.iter().enumerate() {
                for (d, (u, s)) in self.unsaturated[i][j].iter().zip(&self.saturated[i][j]).enumerate() {
                    w.write_record([
                        hs.to_string(),
                        tp.to_string(),
                        d.to_string(),
                        u.to_string(),
                        s.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Saturated weighted farm power (W).
pub fn weighted_power(pm: &PowerMatrix, climate: &SiteClimate) -> Result<f64> {
    pm.weighted(climate, true)
}

/// Outcome of the natural-frequency iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NaturalFrequency {
    Resonant(f64),
    /// Net stiffness `k_pto + G <= 0`.
    NoResonance,
}

impl NaturalFrequency {
    pub fn value(self) -> Option<f64> {
        match self {
            NaturalFrequency::Resonant(w) => Some(w),
            NaturalFrequency::NoResonance => None,
        }
    }
}

/// `omega_n = sqrt((k_pto + G) / (M + a(omega_n)))` with the isolated added mass.
pub fn natural_frequency(design: &FarmDesign, backend: &HydroBackend) -> Result<NaturalFrequency> {
    let geom = design.geom;
    let n_terms = backend.n_terms;
    natural_frequency_with(design, |w| {
        isolated_heave_coefficients(&geom, w, n_terms).map(|c| c.added_mass)
    })
}

/// Damped fixed-point iteration for the natural frequency with a supplied
/// added-mass function.
pub fn natural_frequency_with<F>(design: &FarmDesign, added_mass: F) -> Result<NaturalFrequency>
where
    F: Fn(f64) -> Result<f64>,
{
    let stiffness = design.pto.k_pto + design.geom.hydrostatic_stiffness();
    if !(stiffness > 0.0) {
        return Ok(NaturalFrequency::NoResonance);
    }
    let mass = design.geom.mass();
    let target = |w: f64| -> Result<f64> {
        let total = mass + added_mass(w)?;
        if !(total > 0.0) {
            return Err(Error::Iteration(format!("non-positive total mass {total} at omega={w}")));
        }
        Ok((stiffness / total).sqrt())
    };
    let mut omega = (stiffness / mass).sqrt();
    let mut relax = 0.5;
    let mut last_step = f64::INFINITY;
    for _ in 0..200 {
        let step = relax * (target(omega)? - omega);
        if step.abs() > last_step {
            relax *= 0.5;
        }
        last_step = step.abs();
        omega += step;
        if step.abs() < 1e-8 {
            return Ok(NaturalFrequency::Resonant(omega));
        }
    }
    Err(Error::Iteration(format!(
        "natural frequency did not converge within 200 iterations (last omega {omega})"
    )))
}

/// `weighted / rated`.
pub fn capacity_factor(weighted: f64, rated: f64) -> Result<f64> {
    if !(rated > 0.0) {
        return Err(Error::invalid(format!("rated power must be positive, got {rated}")));
    }
    Ok(weighted / rated)
}

/// Rated power from a reference climate: the largest year-averaged
/// `prob * saturated farm power` over the bins.
pub fn rated_power(pm: &PowerMatrix, reference: &SiteClimate) -> Result<f64> {
    let per_bin = weighted_bin_powers(pm, reference)?;
    Ok(per_bin.iter().flatten().copied().fold(0.0, f64::max))
}

/// Year-averaged `prob * saturated farm power` per bin, `[hs][tp]`.
pub fn weighted_bin_powers(pm: &PowerMatrix, climate: &SiteClimate) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![vec![0.0; pm.grid.tp.len()]; pm.grid.hs.len()];
    for year in &climate.years {
        for bin in year.bins.iter().filter(|b| b.prob > 0.0) {
            let (i, j) = pm.locate(bin)?;
            out[i][j] += bin.prob * pm.farm_power(i, j, true);
        }
    }
    let n = climate.n_yr() as f64;
    for v in out.iter_mut().flatten() {
        *v /= n;
    }
    Ok(out)
}

/// Per-bin capacity-factor contributions; they sum to the capacity factor.
pub fn capacity_factor_matrix(pm: &PowerMatrix, climate: &SiteClimate, rated: f64) -> Result<Vec<Vec<f64>>> {
    capacity_factor(1.0, rated)?;
    let mut per_bin = weighted_bin_powers(pm, climate)?;
    for v in per_bin.iter_mut().flatten() {
        *v /= rated;
    }
    Ok(per_bin)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub n_wec: usize,
    pub backend: BackendKind,
    /// Saturated weighted farm power (W).
    pub weighted_power: f64,
    pub weighted_power_unsaturated: f64,
    /// Weighted power per displaced volume (W/m^3).
    pub p_v: f64,
    /// Unsaturated q-factor.
    pub q_factor: f64,
    pub q_factor_saturated: Option<f64>,
    pub capacity_factor: Option<f64>,
    /// rad/s; absent when the net stiffness is not positive.
    pub natural_frequency: Option<f64>,
    /// Largest saturated farm power over the sea-state grid (W).
    pub peak_bin_power: f64,
    /// Saturated weighted power of each device (W).
    pub per_device: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PerformanceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Mean absorbed power of a linear oscillator tuned to the wave, used as an
/// analytic check: `|X|^2 / (8 b)` per unit squared amplitude.
pub fn matched_power_bound(excitation: Complex64, damping: f64) -> f64 {
    excitation.norm_sqr() / (8.0 * damping)
}

/// Wavelength `2 pi / k` (m).
pub fn wavelength(k: f64) -> f64 {
    2.0 * PI / k
}
