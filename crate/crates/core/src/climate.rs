//! Wave inputs: JONSWAP spectra, regular waves, sea-state bins and multi-year
//! site climates.
//!
//! A site climate is a list of yearly joint probability distributions over
//! `(Hs, Tp)` bins. The site only ever enters the farm model through this
//! distribution.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{GRAVITY, RHO_WATER};

/// Default JONSWAP peak-enhancement factor.
pub const DEFAULT_GAMMA: f64 = 3.3;

/// Allowed deviation of a yearly probability sum from one.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// Significant wave height (m).
    pub hs: f64,
    /// Peak period (s).
    pub tp: f64,
    /// Peak-enhancement factor.
    pub gamma: f64,
}

impl SpectrumParams {
    pub fn new(hs: f64, tp: f64, gamma: f64) -> Result<Self> {
        let params = SpectrumParams { hs, tp, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn with_default_gamma(hs: f64, tp: f64) -> Result<Self> {
        Self::new(hs, tp, DEFAULT_GAMMA)
    }

    fn validate(&self) -> Result<()> {
        if !(self.hs > 0.0 && self.hs.is_finite()) {
            return Err(Error::invalid(format!("hs must be positive, got {}", self.hs)));
        }
        if !(self.tp > 0.0 && self.tp.is_finite()) {
            return Err(Error::invalid(format!("tp must be positive, got {}", self.tp)));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn peak_frequency(&self) -> f64 {
        2.0 * PI / self.tp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaStateBin {
    pub hs: f64,
    pub tp: f64,
    pub prob: f64,
}

/// Strictly increasing angular frequencies used for spectral quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::invalid("frequency grid needs at least 2 points"));
        }
        if !(omegas[0] > 0.0) {
            return Err(Error::invalid("frequency grid must start above 0"));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) || omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("frequency grid must be strictly increasing"));
        }
        Ok(FrequencyGrid { omegas })
    }

    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > min) {
            return Err(Error::invalid(format!(
                "uniform grid needs n >= 2 and max > min (got n={n}, [{min}, {max}])"
            )));
        }
        let step = (max - min) / (n - 1) as f64;
        Self::new((0..n).map(|i| min + step * i as f64).collect())
    }

    /// `[0.1, 3.0]` rad/s with 120 points.
    pub fn default_grid() -> Self {
        Self::uniform(0.1, 3.0, 120).expect("default grid is valid")
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Trapezoidal quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let w = &self.omegas;
        let n = w.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (w[i + 1] - w[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        weights
    }
}

/// JONSWAP spectral density S(omega) in m^2 s/rad.
pub fn jonswap_density(omega: f64, params: &SpectrumParams) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    params.validate()?;
    Ok(jonswap_unchecked(omega, params))
}

pub(crate) fn jonswap_unchecked(omega: f64, params: &SpectrumParams) -> f64 {
    let wp = params.peak_frequency();
    let ratio4 = (wp / omega).powi(4);
    let sigma = if omega <= wp { 0.07 } else { 0.09 };
    let r = (-(omega - wp).powi(2) / (2.0 * sigma * sigma * wp * wp)).exp();
    let norm = 1.0 - 0.287 * params.gamma.ln();
    (5.0 / 16.0) * norm * params.hs * params.hs * wp.powi(4) * omega.powi(-5) * (-1.25 * ratio4).exp()
        * params.gamma.powf(r)
}

/// Trapezoidal spectral moment `m_n = sum w_i omega_i^n S(omega_i)`, `n` in {0, 1, 2}.
pub fn spectral_moment(params: &SpectrumParams, grid: &FrequencyGrid, n: u32) -> Result<f64> {
    if n > 2 {
        return Err(Error::invalid(format!("moment order must be 0, 1 or 2, got {n}")));
    }
    params.validate()?;
    let weights = grid.trapezoid_weights();
    Ok(grid
        .omegas()
        .iter()
        .zip(&weights)
        .map(|(&w, &q)| q * w.powi(n as i32) * jonswap_unchecked(w, params))
        .sum())
}

/// A monochromatic wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularWave {
    /// Amplitude (m), half the wave height.
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
}

impl RegularWave {
    pub fn height(&self) -> f64 {
        2.0 * self.amplitude
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

pub fn regular_wave(height: f64, period: f64) -> Result<RegularWave> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::invalid(format!("wave height must be positive, got {height}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(format!("wave period must be positive, got {period}")));
    }
    Ok(RegularWave {
        amplitude: 0.5 * height,
        omega: 2.0 * PI / period,
    })
}

/// A stationary sea condition accepted by the farm evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeaState {
    Irregular(SpectrumParams),
    Regular(RegularWave),
}

/// Rectangular `(Hs, Tp)` bin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeaStateGrid {
    pub hs: Vec<f64>,
    pub tp: Vec<f64>,
}

impl SeaStateGrid {
    pub fn new(mut hs: Vec<f64>, mut tp: Vec<f64>) -> Result<Self> {
        if hs.is_empty() || tp.is_empty() {
            return Err(Error::invalid("sea-state grid axes must be non-empty"));
        }
        if hs.iter().chain(&tp).any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("sea-state grid values must be positive"));
        }
        hs.sort_by(f64::total_cmp);
        tp.sort_by(f64::total_cmp);
        hs.dedup();
        tp.dedup();
        Ok(SeaStateGrid { hs, tp })
    }

    /// Tp in {3, 4, ..., 17} s and Hs in {0.5, 1.0, ..., 9.5} m.
    pub fn default_grid() -> Self {
        SeaStateGrid {
            hs: (1..=19).map(|i| 0.5 * i as f64).collect(),
            tp: (3..=17).map(|t| t as f64).collect(),
        }
    }

    pub fn hs_index(&self, hs: f64) -> Option<usize> {
        axis_index(&self.hs, hs)
    }

    pub fn tp_index(&self, tp: f64) -> Option<usize> {
        axis_index(&self.tp, tp)
    }
}

pub(crate) fn axis_index(axis: &[f64], value: f64) -> Option<usize> {
    axis.iter()
        .position(|&a| (a - value).abs() <= 1e-9 * a.abs().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDistribution {
    pub year: i64,
    pub bins: Vec<SeaStateBin>,
}

impl YearDistribution {
    pub fn total_probability(&self) -> f64 {
        self.bins.iter().map(|b| b.prob).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteClimate {
    pub site_id: String,
    pub years: Vec<YearDistribution>,
}

impl SiteClimate {
    /// Builds a climate, checking per-year normalization and duplicate bins.
    pub fn new(site_id: impl Into<String>, years: Vec<YearDistribution>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::invalid("a site climate needs at least one year"));
        }
        for year in &years {
            let mut seen = HashSet::new();
            for bin in &year.bins {
                if !(0.0..=1.0).contains(&bin.prob) || !(bin.hs > 0.0) || !(bin.tp > 0.0) {
                    return Err(Error::invalid(format!(
                        "year {}: invalid bin hs={} tp={} prob={}",
                        year.year, bin.hs, bin.tp, bin.prob
                    )));
                }
                if !seen.insert((bin.hs.to_bits(), bin.tp.to_bits())) {
                    return Err(Error::DuplicateBin {
                        year: year.year,
                        hs: bin.hs,
                        tp: bin.tp,
                    });
                }
            }
            let sum = year.total_probability();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Normalization { year: year.year, sum });
            }
        }
        Ok(SiteClimate {
            site_id: site_id.into(),
            years,
        })
    }

    pub fn n_yr(&self) -> usize {
        self.years.len()
    }

    /// Sorted distinct Hs and Tp values over all years.
    pub fn axes(&self) -> SeaStateGrid {
        let mut hs: Vec<f64> = Vec::new();
        let mut tp: Vec<f64> = Vec::new();
        for bin in self.years.iter().flat_map(|y| &y.bins) {
            if axis_index(&hs, bin.hs).is_none() {
                hs.push(bin.hs);
            }
            if axis_index(&tp, bin.tp).is_none() {
                tp.push(bin.tp);
            }
        }
        hs.sort_by(f64::total_cmp);
        tp.sort_by(f64::total_cmp);
        SeaStateGrid { hs, tp }
    }

    /// Probability of each bin averaged over all years, on [`Self::axes`].
    /// Indexed `[hs][tp]`.
    pub fn mean_distribution(&self) -> (SeaStateGrid, Vec<Vec<f64>>) {
        let axes = self.axes();
        let mut probs = vec![vec![0.0; axes.tp.len()]; axes.hs.len()];
        let scale = 1.0 / self.n_yr() as f64;
        for year in &self.years {
            for bin in &year.bins {
                let i = axes.hs_index(bin.hs).expect("bin on axes");
                let j = axes.tp_index(bin.tp).expect("bin on axes");
                probs[i][j] += scale * bin.prob;
            }
        }
        (axes, probs)
    }

    /// The most probable bin of the year-averaged distribution.
    pub fn modal_bin(&self) -> SeaStateBin {
        let (axes, probs) = self.mean_distribution();
        let mut best = SeaStateBin {
            hs: axes.hs[0],
            tp: axes.tp[0],
            prob: -1.0,
        };
        for (i, row) in probs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > best.prob {
                    best = SeaStateBin {
                        hs: axes.hs[i],
                        tp: axes.tp[j],
                        prob: p,
                    };
                }
            }
        }
        best
    }

    pub fn mean_hs(&self) -> f64 {
        self.years.iter().map(|y| year_mean(y, |b| b.hs)).sum::<f64>() / self.n_yr() as f64
    }

    pub fn mean_tp(&self) -> f64 {
        self.years.iter().map(|y| year_mean(y, |b| b.tp)).sum::<f64>() / self.n_yr() as f64
    }

    /// Deep-water incident energy flux per metre of crest (W/m) for one year,
    /// using `Te = 0.9 Tp`.
    pub fn energy_flux(year: &YearDistribution) -> f64 {
        let coeff = RHO_WATER * GRAVITY * GRAVITY / (64.0 * PI);
        year.bins
            .iter()
            .map(|b| b.prob * coeff * b.hs * b.hs * 0.9 * b.tp)
            .sum()
    }

    pub fn mean_energy_flux(&self) -> f64 {
        self.years.iter().map(Self::energy_flux).sum::<f64>() / self.n_yr() as f64
    }
}

fn year_mean(year: &YearDistribution, f: impl Fn(&SeaStateBin) -> f64) -> f64 {
    year.bins.iter().map(|b| b.prob * f(b)).sum::<f64>() / year.total_probability()
}

const CSV_COLUMNS: [&str; 4] = ["year", "hs_m", "tp_s", "prob"];

/// Parses the `year,hs_m,tp_s,prob` CSV format.
pub fn load_site_climate<R: Read>(site_id: impl Into<String>, source: R) -> Result<SiteClimate> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                line: 1,
                message: format!("missing required column '{name}'"),
            })?;
    }

    let mut years: BTreeMap<i64, Vec<SeaStateBin>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Schema {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str> {
            record.get(columns[idx]).ok_or_else(|| Error::Schema {
                line,
                message: format!("missing value for '{}'", CSV_COLUMNS[idx]),
            })
        };
        let year: i64 = field(0)?.parse().map_err(|_| Error::Schema {
            line,
            message: format!("year is not an integer: '{}'", field(0).unwrap_or("")),
        })?;
        let mut values = [0.0f64; 3];
        for (k, v) in values.iter_mut().enumerate() {
            let raw = field(k + 1)?;
            *v = raw.parse().map_err(|_| Error::Schema {
                line,
                message: format!("{} is not a number: '{raw}'", CSV_COLUMNS[k + 1]),
            })?;
        }
        let [hs, tp, prob] = values;
        if !(hs > 0.0) || !(tp > 0.0) || !(0.0..=1.0).contains(&prob) {
            return Err(Error::Schema {
                line,
                message: format!("out-of-range bin hs={hs} tp={tp} prob={prob}"),
            });
        }
        if !seen.insert((year, hs.to_bits(), tp.to_bits())) {
            return Err(Error::DuplicateBin { year, hs, tp });
        }
        let bins = years.entry(year).or_default();
        if prob > 0.0 {
            bins.push(SeaStateBin { hs, tp, prob });
        }
    }
    if years.is_empty() {
        return Err(Error::Schema {
            line: 1,
            message: "no data rows".into(),
        });
    }
    SiteClimate::new(
        site_id,
        years
            .into_iter()
            .map(|(year, bins)| YearDistribution { year, bins })
            .collect(),
    )
}

pub fn write_site_climate<W: Write>(climate: &SiteClimate, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for year in &climate.years {
        for bin in &year.bins {
            writer
                .write_record([
                    year.year.to_string(),
                    bin.hs.to_string(),
                    bin.tp.to_string(),
                    bin.prob.to_string(),
                ])
                .map_err(csv_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimateProfile {
    HighEnergy,
    LowEnergy,
}

impl std::str::FromStr for ClimateProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high-energy" | "high" => Ok(ClimateProfile::HighEnergy),
            "low-energy" | "low" => Ok(ClimateProfile::LowEnergy),
            other => Err(Error::invalid(format!(
                "unknown climate profile '{other}' (expected high-energy or low-energy)"
            ))),
        }
    }
}

/// Bivariate normal parameters of a synthetic profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileShape {
    pub mean_hs: f64,
    pub mean_tp: f64,
    pub sd_hs: f64,
    pub sd_tp: f64,
    pub correlation: f64,
}

impl ClimateProfile {
    pub fn shape(self) -> ProfileShape {
        match self {
            ClimateProfile::HighEnergy => ProfileShape {
                mean_hs: 2.5,
                mean_tp: 10.0,
                sd_hs: 1.0,
                sd_tp: 2.0,
                correlation: 0.5,
            },
            ClimateProfile::LowEnergy => ProfileShape {
                mean_hs: 1.2,
                mean_tp: 7.0,
                sd_hs: 0.5,
                sd_tp: 1.5,
                correlation: 0.5,
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ClimateProfile::HighEnergy => "high-energy",
            ClimateProfile::LowEnergy => "low-energy",
        }
    }
}

pub const SYNTH_YEARS: usize = 30;
/// Mahalanobis radius beyond which the synthetic distribution is cut.
const TRUNCATION_RADIUS: f64 = 3.0;
const YEAR_JITTER: f64 = 0.05;

/// Generates a 30-year climate on the default sea-state grid from a truncated,
/// discretized bivariate normal with seeded per-year mean jitter.
pub fn synth_site_climate(profile: ClimateProfile, seed: u64) -> SiteClimate {
    let grid = SeaStateGrid::default_grid();
    let shape = profile.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let years = (0..SYNTH_YEARS)
        .map(|y| {
            let mean_hs = shape.mean_hs * (1.0 + rng.random_range(-YEAR_JITTER..YEAR_JITTER));
            let mean_tp = shape.mean_tp * (1.0 + rng.random_range(-YEAR_JITTER..YEAR_JITTER));
            let rho = shape.correlation;
            let mut bins = Vec::new();
            for &hs in &grid.hs {
                for &tp in &grid.tp {
                    let u = (hs - mean_hs) / shape.sd_hs;
                    let v = (tp - mean_tp) / shape.sd_tp;
                    let q = (u * u - 2.0 * rho * u * v + v * v) / (1.0 - rho * rho);
                    if q <= TRUNCATION_RADIUS * TRUNCATION_RADIUS {
                        bins.push(SeaStateBin {
                            hs,
                            tp,
                            prob: (-0.5 * q).exp(),
                        });
                    }
                }
            }
            let total: f64 = bins.iter().map(|b| b.prob).sum();
            for bin in &mut bins {
                bin.prob /= total;
            }
            YearDistribution {
                year: y as i64 + 1,
                bins,
            }
        })
        .collect();
    SiteClimate {
        site_id: profile.label().to_string(),
        years,
    }
}
