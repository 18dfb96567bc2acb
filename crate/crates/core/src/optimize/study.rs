//! Study specifications, presets and result bundles.
//!
//! A study expands a base design and a set of axes (block sets, climates,
//! waves, plants, controls, layouts, power limits) into cases and runs one
//! solver per case.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::climate::{
    load_site_climate, regular_wave, synth_site_climate, ClimateProfile, FrequencyGrid,
    RegularWave, SeaStateBin, SiteClimate, YearDistribution,
};
use crate::dynamics::{
    capacity_factor_matrix, natural_frequency, rated_power, FarmDesign, PowerMatrix, PtoParams,
    Simulator,
};
use crate::error::{Error, Result};
use crate::hydro::{check_overlap, BackendKind, CoefficientCache, CylinderGeometry, HydroBackend};

use super::sweep::{run_sweep, SweepField, SweepSpec};
use super::{
    compare, design_constraints, run_ga, run_local_multistart, Block, ConstraintReport,
    FarmProblem, GaConfig, LocalConfig, OptResult, VariableSpace, WaveObjective,
    DEFAULT_SAFETY_DISTANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Ga,
    Local,
    /// GA followed by multi-start local refinement from the GA best.
    GaLocal,
    /// No optimization: metrics of the fixed design.
    Evaluate,
    /// Grid sweep of the second device position.
    Sweep,
}

impl SolverKind {
    fn optimizes(self) -> bool {
        matches!(self, SolverKind::Ga | SolverKind::Local | SolverKind::GaLocal)
    }
}

/// Where a site climate comes from: a synthetic profile or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClimateSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl ClimateSource {
    pub fn synth(profile: ClimateProfile, seed: u64) -> Self {
        ClimateSource {
            name: profile.label().to_string(),
            profile: Some(profile.label().to_string()),
            seed: Some(seed),
            path: None,
        }
    }

    pub fn file(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        ClimateSource {
            name: name.into(),
            profile: None,
            seed: None,
            path: Some(path.into()),
        }
    }

    pub fn load(&self) -> Result<SiteClimate> {
        match (&self.profile, &self.path) {
            (Some(p), None) => Ok(synth_site_climate(p.parse()?, self.seed.unwrap_or(0))),
            (None, Some(path)) => {
                let file = fs::File::open(path).map_err(|e| {
                    Error::Config(format!("cannot open climate {}: {e}", path.display()))
                })?;
                load_site_climate(self.name.clone(), std::io::BufReader::new(file))
            }
            _ => Err(Error::Config(format!(
                "climate '{}' needs exactly one of profile or path",
                self.name
            ))),
        }
    }
}

/// Wave input of a case, written `climate`, `regular-modal`,
/// `regular:H,T` or `irregular:Hs,Tp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WaveSpec {
    /// The case climate.
    Climate,
    /// Regular wave with the height and period of the climate's modal bin.
    RegularModal,
    Regular { height: f64, period: f64 },
    /// A single JONSWAP sea state.
    Irregular { hs: f64, tp: f64 },
}

impl WaveSpec {
    pub fn uses_climate(self) -> bool {
        matches!(self, WaveSpec::Climate | WaveSpec::RegularModal)
    }
}

impl fmt::Display for WaveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveSpec::Climate => f.write_str("climate"),
            WaveSpec::RegularModal => f.write_str("regular-modal"),
            WaveSpec::Regular { height, period } => write!(f, "regular:{height},{period}"),
            WaveSpec::Irregular { hs, tp } => write!(f, "irregular:{hs},{tp}"),
        }
    }
}

impl FromStr for WaveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let pair = |rest: &str| -> Result<(f64, f64)> {
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| Error::invalid(format!("wave '{s}': expected two numbers")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("wave '{s}': bad number '{v}'")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::invalid(format!("wave '{s}': values must be positive")));
            }
            Ok((a, b))
        };
        match s.trim() {
            "climate" => Ok(WaveSpec::Climate),
            "regular-modal" => Ok(WaveSpec::RegularModal),
            other => {
                if let Some(rest) = other.strip_prefix("regular:") {
                    let (height, period) = pair(rest)?;
                    Ok(WaveSpec::Regular { height, period })
                } else if let Some(rest) = other.strip_prefix("irregular:") {
                    let (hs, tp) = pair(rest)?;
                    Ok(WaveSpec::Irregular { hs, tp })
                } else {
                    Err(Error::invalid(format!(
                        "unknown wave '{other}' (climate, regular-modal, regular:H,T, irregular:Hs,Tp)"
                    )))
                }
            }
        }
    }
}

impl TryFrom<String> for WaveSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WaveSpec> for String {
    fn from(w: WaveSpec) -> String {
        w.to_string()
    }
}

/// Explicit coordinates or a named fixture generated for the farm size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutSpec {
    Points(Vec<[f64; 2]>),
    Fixture {
        fixture: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing: Option<f64>,
    },
}

impl LayoutSpec {
    pub fn fixture(name: &str, spacing: f64) -> Self {
        LayoutSpec::Fixture {
            fixture: name.to_string(),
            spacing: Some(spacing),
        }
    }

    fn label(&self) -> String {
        match self {
            LayoutSpec::Points(p) => format!("{}-points", p.len()),
            LayoutSpec::Fixture { fixture, .. } => fixture.clone(),
        }
    }

    fn resolve(&self, n_wec: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            LayoutSpec::Points(p) => Ok(p.iter().map(|q| (q[0], q[1])).collect()),
            LayoutSpec::Fixture { fixture, spacing } => layout_fixture(fixture, n_wec, *spacing),
        }
    }
}

pub const FIXTURE_NAMES: [&str; 6] = [
    "row",
    "column",
    "close-symmetrical",
    "far-symmetrical",
    "diagonal",
    "staggered",
];

/// Named layouts with body 1 at the origin and waves travelling along `+x`.
///
/// `row` lines devices up across the waves (along `y`), `column` along the
/// waves. The symmetrical fixtures form a chevron opening down-wave; `far`
/// differs from `close` only in its default spacing.
pub fn layout_fixture(name: &str, n: usize, spacing: Option<f64>) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::invalid("layout needs at least one device"));
    }
    let s = spacing.unwrap_or(if name == "far-symmetrical" { 200.0 } else { 40.0 });
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("layout spacing {s}")));
    }
    let (c60, s60) = ((PI / 3.0).cos(), (PI / 3.0).sin());
    let point = |i: usize| -> (f64, f64) {
        let j = i.div_ceil(2) as f64;
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        match name {
            "row" => (0.0, sign * j * s),
            "column" => (i as f64 * s, 0.0),
            "close-symmetrical" | "far-symmetrical" => (j * s * c60, sign * j * s * s60),
            "diagonal" => {
                let d = i as f64 * s * std::f64::consts::FRAC_1_SQRT_2;
                (d, d)
            }
            _ => (i as f64 * s * s60, if i % 2 == 1 { s * c60 } else { 0.0 }),
        }
    };
    if !FIXTURE_NAMES.contains(&name) {
        return Err(Error::Config(format!(
            "unknown layout fixture '{name}'; available: {}",
            FIXTURE_NAMES.join(", ")
        )));
    }
    Ok((0..n).map(|i| if i == 0 { (0.0, 0.0) } else { point(i) }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            omega_min: 0.1,
            omega_max: 3.0,
            n_omega: 120,
        }
    }
}

fn default_backend() -> BackendKind {
    BackendKind::Pa
}
fn default_n_terms() -> usize {
    crate::hydro::DEFAULT_N_TERMS
}
fn default_partial_waves() -> u32 {
    crate::hydro::DEFAULT_PARTIAL_WAVES
}
fn default_depth() -> f64 {
    crate::hydro::DEFAULT_DEPTH
}
fn default_one() -> usize {
    1
}
fn default_safety() -> f64 {
    DEFAULT_SAFETY_DISTANCE
}
fn default_climates() -> Vec<ClimateSource> {
    vec![ClimateSource::synth(ClimateProfile::HighEnergy, 7)]
}
fn default_layout() -> LayoutSpec {
    LayoutSpec::fixture("row", 40.0)
}

/// A study as read from TOML. Every design variable has a fixed base value;
/// the active blocks are the ones the solver varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    pub solver: SolverKind,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default = "default_n_terms")]
    pub n_terms: usize,
    #[serde(default = "default_partial_waves")]
    pub partial_waves: u32,
    #[serde(default = "default_depth")]
    pub depth: f64,
    /// Wave travel direction from `+x` (rad).
    #[serde(default)]
    pub heading: f64,
    #[serde(default = "default_one")]
    pub n_wec: usize,
    pub radius: f64,
    pub slenderness: f64,
    pub b_pto: f64,
    pub k_pto: f64,
    #[serde(default = "default_layout")]
    pub layout: LayoutSpec,
    #[serde(default = "default_safety")]
    pub safety_distance: f64,
    #[serde(default = "default_climates")]
    pub climates: Vec<ClimateSource>,
    /// Climate whose year-averaged peak bin sets the rated power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rated_climate: Option<String>,
    /// Per-device saturation limits (W); `inf` means none.
    #[serde(default)]
    pub p_limits: Vec<f64>,
    #[serde(default)]
    pub waves: Vec<WaveSpec>,
    /// `[radius, slenderness]` alternatives.
    #[serde(default)]
    pub plants: Vec<[f64; 2]>,
    /// `[b_pto, k_pto]` alternatives.
    #[serde(default)]
    pub controls: Vec<[f64; 2]>,
    #[serde(default)]
    pub layouts: Vec<LayoutSpec>,
    #[serde(default)]
    pub block_sets: Vec<Vec<Block>>,
    /// Per-variable bound overrides, `name = [lower, upper]`.
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub local: LocalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl StudySpec {
    /// A single-device study with the given solver and everything else at
    /// defaults.
    pub fn base(solver: SolverKind, seed: u64) -> Self {
        StudySpec {
            preset: None,
            description: None,
            seed,
            solver,
            blocks: Vec::new(),
            backend: default_backend(),
            n_terms: default_n_terms(),
            partial_waves: default_partial_waves(),
            depth: default_depth(),
            heading: 0.0,
            n_wec: 1,
            radius: 5.0,
            slenderness: 5.0,
            b_pto: 2.5e5,
            k_pto: 0.0,
            layout: default_layout(),
            safety_distance: DEFAULT_SAFETY_DISTANCE,
            climates: default_climates(),
            rated_climate: None,
            p_limits: Vec::new(),
            waves: Vec::new(),
            plants: Vec::new(),
            controls: Vec::new(),
            layouts: Vec::new(),
            block_sets: Vec::new(),
            bounds: BTreeMap::new(),
            grid: GridSpec::default(),
            ga: GaConfig::default(),
            local: LocalConfig::default(),
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: StudySpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("study spec serializes")
    }

    pub fn backend(&self) -> HydroBackend {
        HydroBackend {
            kind: self.backend,
            n_terms: self.n_terms,
            partial_waves: self.partial_waves,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backend().validate()?;
        if self.n_wec == 0 {
            return Err(Error::Config("n_wec must be at least 1".into()));
        }
        if self.solver.optimizes() {
            let sets = self.block_sets();
            if sets.iter().any(Vec::is_empty) {
                return Err(Error::Config(format!(
                    "solver {:?} needs at least one active block",
                    self.solver
                )));
            }
        }
        if self.solver == SolverKind::Sweep && self.sweep.is_none() {
            return Err(Error::Config("sweep solver needs a [sweep] table".into()));
        }
        if self.p_limits.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("p_limits must be >= 0".into()));
        }
        if !(self.safety_distance >= 0.0) {
            return Err(Error::Config("safety_distance must be >= 0".into()));
        }
        let needs_climate = self.waves().iter().any(|w| w.uses_climate());
        if needs_climate && self.climates.is_empty() {
            return Err(Error::Config("climate waves need at least one climate".into()));
        }
        let mut names: Vec<&str> = self.climates.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("climate names must be unique".into()));
        }
        if let Some(rated) = &self.rated_climate {
            if !names.contains(&rated.as_str()) {
                return Err(Error::Config(format!("rated_climate '{rated}' is not a listed climate")));
            }
        }
        FrequencyGrid::uniform(self.grid.omega_min, self.grid.omega_max, self.grid.n_omega)?;
        Ok(())
    }

    fn block_sets(&self) -> Vec<Vec<Block>> {
        if self.block_sets.is_empty() {
            vec![self.blocks.clone()]
        } else {
            self.block_sets.clone()
        }
    }

    fn waves(&self) -> Vec<WaveSpec> {
        if self.waves.is_empty() {
            vec![WaveSpec::Climate]
        } else {
            self.waves.clone()
        }
    }

    /// Replaces the climate list with files, keeping the rated climate on the
    /// first of them.
    pub fn override_climates(&mut self, sources: Vec<ClimateSource>) {
        if sources.is_empty() {
            return;
        }
        if self.rated_climate.is_some() {
            self.rated_climate = Some(sources[0].name.clone());
        }
        self.climates = sources;
    }

    /// Expands the axes into cases.
    pub fn cases(&self) -> Result<Vec<CaseSpec>> {
        let block_sets = self.block_sets();
        let waves = self.waves();
        let plants = if self.plants.is_empty() {
            vec![[self.radius, self.slenderness]]
        } else {
            self.plants.clone()
        };
        let controls = if self.controls.is_empty() {
            vec![[self.b_pto, self.k_pto]]
        } else {
            self.controls.clone()
        };
        let layouts = if self.layouts.is_empty() {
            vec![self.layout.clone()]
        } else {
            self.layouts.clone()
        };
        let p_limits = if self.p_limits.is_empty() {
            vec![f64::INFINITY]
        } else {
            self.p_limits.clone()
        };

        let mut cases = Vec::new();
        for blocks in &block_sets {
            for wave in &waves {
                let climates: Vec<Option<String>> = if wave.uses_climate() {
                    self.climates.iter().map(|c| Some(c.name.clone())).collect()
                } else {
                    vec![None]
                };
                for climate in &climates {
                    for plant in &plants {
                        for control in &controls {
                            for layout in &layouts {
                                for &p in &p_limits {
                                    let mut parts = Vec::new();
                                    if block_sets.len() > 1 {
                                        parts.push(
                                            blocks.iter().map(|b| b.as_str()).collect::<Vec<_>>().join("+"),
                                        );
                                    }
                                    if let (Some(c), true) = (climate, self.climates.len() > 1) {
                                        parts.push(c.clone());
                                    }
                                    if waves.len() > 1 {
                                        parts.push(wave.to_string());
                                    }
                                    if plants.len() > 1 {
                                        parts.push(format!("R={},AR={}", plant[0], plant[1]));
                                    }
                                    if controls.len() > 1 {
                                        parts.push(format!("b={},k={}", control[0], control[1]));
                                    }
                                    if layouts.len() > 1 {
                                        parts.push(layout.label());
                                    }
                                    if p_limits.len() > 1 {
                                        parts.push(p_limit_label(p));
                                    }
                                    let label = if parts.is_empty() {
                                        "base".to_string()
                                    } else {
                                        parts.join("/")
                                    };
                                    cases.push(CaseSpec {
                                        label,
                                        blocks: blocks.clone(),
                                        climate: climate.clone(),
                                        wave: *wave,
                                        radius: plant[0],
                                        slenderness: plant[1],
                                        b_pto: control[0],
                                        k_pto: control[1],
                                        layout: layout.resolve(self.n_wec)?,
                                        p_limit: if p.is_finite() { Some(p) } else { None },
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cases)
    }
}

fn p_limit_label(p: f64) -> String {
    if p.is_finite() {
        format!("p_limit={}kW", p / 1e3)
    } else {
        "p_limit=none".into()
    }
}

/// One fully resolved case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSpec {
    pub label: String,
    pub blocks: Vec<Block>,
    pub climate: Option<String>,
    pub wave: WaveSpec,
    pub radius: f64,
    pub slenderness: f64,
    pub b_pto: f64,
    pub k_pto: f64,
    pub layout: Vec<(f64, f64)>,
    /// Per-device limit (W).
    pub p_limit: Option<f64>,
}

/// Metrics of the reported design of one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseMetrics {
    /// Mean farm power (W), saturated.
    pub farm_power: f64,
    pub farm_power_unsaturated: f64,
    /// W/m^3.
    pub p_v: f64,
    pub q_factor: f64,
    pub q_factor_saturated: Option<f64>,
    pub rated_power: Option<f64>,
    pub capacity_factor: Option<f64>,
    pub natural_frequency: Option<f64>,
    pub per_device: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub case: CaseSpec,
    pub design: Option<FarmDesign>,
    pub optimization: Option<OptResult>,
    pub constraints: ConstraintReport,
    pub feasible: bool,
    /// Variables of the reported design that sit on a bound.
    pub active_bounds: Vec<String>,
    pub metrics: Option<CaseMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<super::sweep::SweepSummary>,
    #[serde(skip)]
    pub power_matrix: Option<PowerMatrix>,
    #[serde(skip)]
    pub capacity_factor_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub field: Option<SweepField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub preset: Option<String>,
    pub seed: u64,
    pub solver: SolverKind,
    pub backend: BackendKind,
    pub safety_distance: f64,
    pub cases: Vec<CaseResult>,
    /// Some case stopped on its evaluation budget.
    pub truncated: bool,
    /// Every optimized case reported a feasible design.
    pub feasible: bool,
}

impl StudyResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study result serializes")
    }
}

fn single_state_climate(hs: f64, tp: f64) -> Result<SiteClimate> {
    SiteClimate::new(
        format!("hs{hs}-tp{tp}"),
        vec![YearDistribution {
            year: 1,
            bins: vec![SeaStateBin { hs, tp, prob: 1.0 }],
        }],
    )
}

/// Resolved wave input of a case.
enum CaseWave {
    Climate(Arc<SiteClimate>),
    Regular(RegularWave),
}

fn case_wave(case: &CaseSpec, climates: &BTreeMap<String, Arc<SiteClimate>>) -> Result<CaseWave> {
    let climate = || -> Result<Arc<SiteClimate>> {
        let name = case.climate.as_deref().unwrap_or_default();
        climates
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown climate '{name}'")))
    };
    Ok(match case.wave {
        WaveSpec::Climate => CaseWave::Climate(climate()?),
        WaveSpec::RegularModal => {
            let modal = climate()?.modal_bin();
            CaseWave::Regular(regular_wave(modal.hs, modal.tp)?)
        }
        WaveSpec::Regular { height, period } => CaseWave::Regular(regular_wave(height, period)?),
        WaveSpec::Irregular { hs, tp } => CaseWave::Climate(Arc::new(single_state_climate(hs, tp)?)),
    })
}

struct Context<'a> {
    spec: &'a StudySpec,
    simulator: Simulator,
    climates: BTreeMap<String, Arc<SiteClimate>>,
}

/// Runs every case of `spec`. Cases run one after another; parallelism lives
/// inside the solvers and the frequency loop.
pub fn run_study(spec: &StudySpec, cache: Option<Arc<CoefficientCache>>) -> Result<StudyResult> {
    spec.validate()?;
    let grid = FrequencyGrid::uniform(spec.grid.omega_min, spec.grid.omega_max, spec.grid.n_omega)?;
    let mut simulator = Simulator::new(spec.backend()).with_grid(grid);
    simulator.heading = spec.heading;
    simulator.cache = cache;
    let mut climates = BTreeMap::new();
    for source in &spec.climates {
        climates.insert(source.name.clone(), Arc::new(source.load()?));
    }
    let ctx = Context {
        spec,
        simulator,
        climates,
    };
    let mut cases = Vec::new();
    for case in spec.cases()? {
        cases.push(run_case(&ctx, case)?);
    }
    let truncated = cases
        .iter()
        .any(|c| c.optimization.as_ref().is_some_and(|o| o.truncated));
    let feasible = cases.iter().all(|c| c.feasible);
    Ok(StudyResult {
        preset: spec.preset.clone(),
        seed: spec.seed,
        solver: spec.solver,
        backend: spec.backend,
        safety_distance: spec.safety_distance,
        cases,
        truncated,
        feasible,
    })
}

fn template(spec: &StudySpec, case: &CaseSpec) -> Result<FarmDesign> {
    let geom = CylinderGeometry::new(case.radius, case.slenderness, spec.depth)?;
    FarmDesign::new(
        geom,
        PtoParams {
            b_pto: case.b_pto,
            k_pto: case.k_pto,
        },
        case.layout.clone(),
    )
}

fn run_case(ctx: &Context, case: CaseSpec) -> Result<CaseResult> {
    let spec = ctx.spec;
    let wave = case_wave(&case, &ctx.climates)?;
    let template = template(spec, &case)?;

    if spec.solver == SolverKind::Sweep {
        let sweep = spec.sweep.as_ref().expect("validated");
        let (wave_obj, climate) = match &wave {
            CaseWave::Climate(c) => (None, Some(c.as_ref())),
            CaseWave::Regular(w) => (Some(*w), None),
        };
        let field = run_sweep(&ctx.simulator, &template, sweep, wave_obj, climate, case.p_limit, spec.safety_distance)?;
        let summary = field.summary(wave_obj.map(|w| w.omega), spec.depth);
        return Ok(CaseResult {
            case,
            design: Some(template),
            optimization: None,
            constraints: ConstraintReport::default(),
            feasible: true,
            active_bounds: Vec::new(),
            metrics: None,
            sweep: Some(summary),
            power_matrix: None,
            capacity_factor_matrix: None,
            field: Some(field),
        });
    }

    let objective = match &wave {
        CaseWave::Climate(c) => WaveObjective::Climate {
            climate: c.clone(),
            p_limit: case.p_limit,
        },
        CaseWave::Regular(w) => WaveObjective::Regular {
            wave: *w,
            p_limit: case.p_limit,
        },
    };

    let (design, optimization, constraints, active_bounds) = if spec.solver.optimizes() {
        let mut space = VariableSpace::new(&case.blocks, template.n_wec())?;
        for (name, [lo, hi]) in &spec.bounds {
            if space.index(name).is_some() {
                space = space.with_bounds(name, *lo, *hi)?;
            }
        }
        let problem = FarmProblem::new(
            space,
            template.clone(),
            objective.clone(),
            ctx.simulator.clone(),
            spec.safety_distance,
        )?;
        let x0 = problem.space.clamp(&problem.encode(&template)).0;
        let result = match spec.solver {
            SolverKind::Ga => run_ga(&problem, &spec.ga, spec.seed, &[x0]),
            SolverKind::Local => run_local_multistart(&problem, &spec.local, &x0, spec.seed),
            _ => {
                let ga = run_ga(&problem, &spec.ga, spec.seed, &[x0]);
                let local = run_local_multistart(&problem, &spec.local, &ga.x, spec.seed);
                merge(ga, local)
            }
        };
        let constraints = problem.constraints(&result.x);
        let active = problem.space.active_bounds(&result.x);
        let design = problem.design(&result.x).ok();
        (design, Some(result), constraints, active)
    } else {
        let constraints = design_constraints(
            &template.layout,
            template.geom.radius(),
            template.geom.draft(),
            spec.safety_distance,
        );
        (Some(template), None, constraints, Vec::new())
    };

    let feasible = constraints.is_feasible()
        && optimization.as_ref().is_none_or(|o| o.feasible)
        && design.is_some();
    let mut result = CaseResult {
        case,
        design: design.clone(),
        optimization,
        constraints,
        feasible,
        active_bounds,
        metrics: None,
        sweep: None,
        power_matrix: None,
        capacity_factor_matrix: None,
        field: None,
    };
    let simulable = design
        .as_ref()
        .is_some_and(|d| check_overlap(&d.layout, d.geom.radius()).is_ok());
    if let (Some(design), true) = (design, simulable) {
        match metrics(ctx, &design, &wave, result.case.p_limit) {
            Ok((m, pm, cf)) => {
                result.metrics = Some(m);
                result.power_matrix = pm;
                result.capacity_factor_matrix = cf;
            }
            Err(e) => {
                result.feasible = false;
                result.metrics = None;
                if let Some(o) = result.optimization.as_mut() {
                    o.evaluation.failure.get_or_insert(e.to_string());
                }
            }
        }
    }
    Ok(result)
}

fn merge(ga: OptResult, local: OptResult) -> OptResult {
    let local_wins = compare(&local.evaluation, &ga.evaluation) == std::cmp::Ordering::Less;
    let mut trace = ga.trace.clone();
    trace.extend(local.trace.iter().cloned().map(|mut r| {
        r.start += 1;
        r.evaluations += ga.evaluations;
        r
    }));
    let best = if local_wins { &local } else { &ga };
    OptResult {
        solver: "ga-local".into(),
        names: ga.names.clone(),
        x: best.x.clone(),
        evaluation: best.evaluation.clone(),
        feasible: best.feasible,
        trace,
        evaluations: ga.evaluations + local.evaluations,
        truncated: ga.truncated || local.truncated,
        wall_time_s: ga.wall_time_s + local.wall_time_s,
    }
}

type Metrics = (CaseMetrics, Option<PowerMatrix>, Option<Vec<Vec<f64>>>);

fn metrics(ctx: &Context, design: &FarmDesign, wave: &CaseWave, p_limit: Option<f64>) -> Result<Metrics> {
    let sim = &ctx.simulator;
    match wave {
        CaseWave::Climate(climate) => {
            let rated = match &ctx.spec.rated_climate {
                Some(name) => {
                    let reference = &ctx.climates[name];
                    let pm = sim.power_matrix(design, &reference.axes(), p_limit)?;
                    Some(rated_power(&pm, reference)?)
                }
                None => None,
            };
            let report = sim.report(design, climate, p_limit, rated)?;
            let pm = sim.power_matrix(design, &climate.axes(), p_limit)?;
            let cf = match rated {
                Some(r) => Some(capacity_factor_matrix(&pm, climate, r)?),
                None => None,
            };
            Ok((
                CaseMetrics {
                    farm_power: report.weighted_power,
                    farm_power_unsaturated: report.weighted_power_unsaturated,
                    p_v: report.p_v,
                    q_factor: report.q_factor,
                    q_factor_saturated: report.q_factor_saturated,
                    rated_power: rated,
                    capacity_factor: report.capacity_factor,
                    natural_frequency: report.natural_frequency,
                    per_device: report.per_device,
                    warnings: report.warnings,
                },
                Some(pm),
                cf,
            ))
        }
        CaseWave::Regular(w) => {
            let per = sim.regular_power(design, w)?;
            let unsat: f64 = per.iter().sum();
            let clipped: Vec<f64> = per.iter().map(|&p| p_limit.map_or(p, |l| p.min(l))).collect();
            let total: f64 = clipped.iter().sum();
            let nat = natural_frequency(design, &sim.backend)?;
            let hydro = sim.hydro_at(design, w.omega)?;
            Ok((
                CaseMetrics {
                    farm_power: total,
                    farm_power_unsaturated: unsat,
                    p_v: total / design.total_volume(),
                    q_factor: sim.q_factor_regular(design, w)?,
                    q_factor_saturated: None,
                    rated_power: None,
                    capacity_factor: None,
                    natural_frequency: nat.value(),
                    per_device: clipped,
                    warnings: hydro.warning.into_iter().collect(),
                },
                None,
                None,
            ))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn create(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(dir.join(name))?))
}

/// Writes `result.json`, `trace.csv`, `layout.csv`, `power_matrix.csv`,
/// `capacity_factor.csv`, `field.csv` and one SVG drawing per case. Returns
/// the written file names.
pub fn write_bundle(result: &StudyResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    fs::write(dir.join("result.json"), result.to_json() + "\n")?;
    written.push("result.json".to_string());

    let mut w = create(dir, "trace.csv")?;
    w.write_record([
        "case",
        "start",
        "iteration",
        "evaluations",
        "best_objective",
        "best_violation",
        "best_feasible",
        "spread",
    ])
    .map_err(csv_err)?;
    for (i, c) in result.cases.iter().enumerate() {
        for row in c.optimization.iter().flat_map(|o| &o.trace) {
            w.write_record([
                i.to_string(),
                row.start.to_string(),
                row.iteration.to_string(),
                row.evaluations.to_string(),
                row.best_objective.to_string(),
                row.best_violation.to_string(),
                row.best_feasible.to_string(),
                row.spread.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    written.push("trace.csv".into());

    let mut w = create(dir, "layout.csv")?;
    w.write_record(["case", "label", "device", "x_m", "y_m", "radius_m", "draft_m"])
        .map_err(csv_err)?;
    for (i, c) in result.cases.iter().enumerate() {
        if let Some(d) = &c.design {
            for (k, &(x, y)) in d.layout.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    c.case.label.clone(),
                    k.to_string(),
                    x.to_string(),
                    y.to_string(),
                    d.geom.radius().to_string(),
                    d.geom.draft().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    written.push("layout.csv".into());

    let mut w = create(dir, "power_matrix.csv")?;
    w.write_record(["case", "hs_m", "tp_s", "device", "unsat_W", "sat_W"])
        .map_err(csv_err)?;
    for (i, c) in result.cases.iter().enumerate() {
        if let Some(pm) = &c.power_matrix {
            for (a, &hs) in pm.grid.hs.iter().enumerate() {
                for (b, &tp) in pm.grid.tp.iter().enumerate() {
                    for (d, (u, s)) in pm.unsaturated[a][b].iter().zip(&pm.saturated[a][b]).enumerate() {
                        w.write_record([
                            i.to_string(),
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
        }
    }
    w.flush()?;
    written.push("power_matrix.csv".into());

    if result.cases.iter().any(|c| c.capacity_factor_matrix.is_some()) {
        let mut w = create(dir, "capacity_factor.csv")?;
        w.write_record(["case", "hs_m", "tp_s", "cf"]).map_err(csv_err)?;
        for (i, c) in result.cases.iter().enumerate() {
            if let (Some(cf), Some(pm)) = (&c.capacity_factor_matrix, &c.power_matrix) {
                for (a, &hs) in pm.grid.hs.iter().enumerate() {
                    for (b, &tp) in pm.grid.tp.iter().enumerate() {
                        w.write_record([i.to_string(), hs.to_string(), tp.to_string(), cf[a][b].to_string()])
                            .map_err(csv_err)?;
                    }
                }
            }
        }
        w.flush()?;
        written.push("capacity_factor.csv".into());
    }

    if result.cases.iter().any(|c| c.field.is_some()) {
        let file = fs::File::create(dir.join("field.csv"))?;
        let mut sink = std::io::BufWriter::new(file);
        super::sweep::write_field_header(&mut sink)?;
        for (i, c) in result.cases.iter().enumerate() {
            if let Some(f) = &c.field {
                super::sweep::write_field_rows(f, i, &mut sink)?;
            }
        }
        sink.flush()?;
        written.push("field.csv".into());
    }

    for (i, c) in result.cases.iter().enumerate() {
        if let Some(d) = &c.design {
            let name = format!("layout_{i:02}.svg");
            let mut file = fs::File::create(dir.join(&name))?;
            super::sweep::write_layout_svg(d, result.safety_distance, &c.case.label, &mut file)?;
            written.push(name);
        }
    }
    Ok(written)
}

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &[
        "table1-concurrent",
        "table3-control",
        "table4-plant",
        "table5-control-plant",
        "table6-control-site",
        "table6-control-layout",
        "table7-layout",
        "fig1-capacity",
        "fig3-smoothing",
        "fig4-regular",
        "fig5-landscape",
        "fig6-plant-layout",
    ]
}

fn both_climates() -> Vec<ClimateSource> {
    vec![
        ClimateSource::synth(ClimateProfile::HighEnergy, 7),
        ClimateSource::synth(ClimateProfile::LowEnergy, 7),
    ]
}

/// Built-in study definitions. All of them use synthetic climates and the
/// default seed 1; the CLI can override climates, backend, limits and seed.
pub fn preset(name: &str) -> Result<StudySpec> {
    let mut s = match name {
        "table1-concurrent" => {
            let mut s = StudySpec::base(SolverKind::Ga, 1);
            s.description = Some("concurrent plant and layout optimization with prescribed PTO".into());
            s.blocks = vec![Block::Plant, Block::Layout];
            s.n_wec = 5;
            s.b_pto = 5e5;
            s.k_pto = -5e3;
            s.layout = LayoutSpec::fixture("row", 40.0);
            s.climates = both_climates();
            s
        }
        "table3-control" => {
            let mut s = StudySpec::base(SolverKind::GaLocal, 1);
            s.description = Some("single-device control optimization across power limits and sites".into());
            s.blocks = vec![Block::Control];
            s.p_limits = vec![50e3, 150e3, 250e3, 350e3, f64::INFINITY];
            s.climates = both_climates();
            s.ga.generations = 30;
            s
        }
        "table4-plant" => {
            let mut s = StudySpec::base(SolverKind::GaLocal, 1);
            s.description = Some("single-device plant optimization with prescribed PTO".into());
            s.blocks = vec![Block::Plant];
            s.b_pto = 5e5;
            s.k_pto = -500.0;
            s.p_limits = vec![1e3, 1e5, 1e8, f64::INFINITY];
            s.climates = both_climates();
            s.ga.generations = 30;
            s
        }
        "table5-control-plant" => {
            let mut s = StudySpec::base(SolverKind::Local, 1);
            s.description = Some("farm control optimization for two plants".into());
            s.blocks = vec![Block::Control];
            s.backend = BackendKind::Ms;
            s.n_wec = 5;
            s.layout = LayoutSpec::fixture("close-symmetrical", 40.0);
            s.plants = vec![[5.0, 5.0], [10.0, 5.0]];
            s.p_limits = vec![1e3, 1e4, 1e5, f64::INFINITY];
            s
        }
        "table6-control-site" => {
            let mut s = preset("table5-control-plant")?;
            s.description = Some("farm control optimization on two sites".into());
            s.plants = Vec::new();
            s.climates = both_climates();
            s
        }
        "table6-control-layout" => {
            let mut s = preset("table5-control-plant")?;
            s.description = Some("farm control optimization for two layouts".into());
            s.plants = Vec::new();
            s.layouts = vec![
                LayoutSpec::fixture("close-symmetrical", 40.0),
                LayoutSpec::fixture("row", 40.0),
            ];
            s
        }
        "table7-layout" => {
            let mut s = StudySpec::base(SolverKind::Ga, 1);
            s.description = Some("three-device layout optimization for fixed plant and control".into());
            s.blocks = vec![Block::Layout];
            s.backend = BackendKind::Ms;
            s.n_wec = 3;
            s.plants = vec![[2.0, 1.0], [6.0, 3.0]];
            s.controls = vec![[5e5, -5e3], [2e3, -2e3]];
            s.climates = both_climates();
            s.ga.generations = 30;
            s
        }
        "fig1-capacity" => {
            let mut s = StudySpec::base(SolverKind::Evaluate, 1);
            s.description = Some("capacity factor of a fixed design rated on the high-energy site".into());
            s.k_pto = -5e5;
            s.climates = both_climates();
            s.rated_climate = Some("high-energy".into());
            s
        }
        "fig3-smoothing" => {
            let mut s = StudySpec::base(SolverKind::Evaluate, 1);
            s.description = Some("q-factor of five close three-device layouts, regular and irregular".into());
            s.n_wec = 3;
            s.radius = 5.0;
            s.slenderness = 5.0;
            s.b_pto = 1e5;
            s.k_pto = -5e5;
            s.layouts = ["row", "column", "close-symmetrical", "diagonal", "staggered"]
                .iter()
                .map(|n| LayoutSpec::fixture(n, 30.0))
                .collect();
            s.waves = vec![WaveSpec::Climate, WaveSpec::RegularModal];
            s
        }
        "fig4-regular" => {
            let mut s = StudySpec::base(SolverKind::Local, 1);
            s.description = Some("optimal plant and control against regular-wave period".into());
            s.block_sets = vec![vec![Block::Plant], vec![Block::Control]];
            s.b_pto = 1e5;
            s.waves = (2..=8)
                .map(|i| WaveSpec::Regular {
                    height: 2.0,
                    period: 2.0 * i as f64,
                })
                .collect();
            s
        }
        "fig5-landscape" => {
            let mut s = StudySpec::base(SolverKind::Sweep, 1);
            s.description = Some("farm power as the second device moves around the first".into());
            s.n_wec = 2;
            s.radius = 5.0;
            s.slenderness = 2.5;
            s.b_pto = 1e5;
            s.waves = vec![
                WaveSpec::Regular {
                    height: 2.0,
                    period: 10.0,
                },
                WaveSpec::Irregular { hs: 2.0, tp: 10.0 },
            ];
            s.sweep = Some(SweepSpec::default());
            s
        }
        "fig6-plant-layout" => {
            let mut s = StudySpec::base(SolverKind::Local, 1);
            s.description = Some("farm plant optimization for four prescribed layouts".into());
            s.blocks = vec![Block::Plant];
            s.n_wec = 5;
            s.b_pto = 1e5;
            s.k_pto = -5e5;
            s.layouts = vec![
                LayoutSpec::fixture("close-symmetrical", 40.0),
                LayoutSpec::fixture("row", 40.0),
                LayoutSpec::fixture("column", 40.0),
                LayoutSpec::fixture("far-symmetrical", 200.0),
            ];
            s
        }
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                available: preset_names().iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    s.preset = Some(name.to_string());
    Ok(s)
}
