//! Heave hydrodynamics of truncated vertical cylinders, alone and in arrays.

mod array;
mod cache;
mod dispersion;
mod meem;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{GRAVITY, RHO_WATER};

pub use array::{array_hydro, array_hydro_cached, check_overlap};
pub use cache::{cache_key, CacheKey, CoefficientCache};
pub use dispersion::{evanescent_wavenumbers, group_velocity, wavenumber};
pub use meem::{
    diffraction_coefficients, excitation_by_pressure, isolated_heave_coefficients,
    RadiationSolution,
};

/// Default water depth (m).
pub const DEFAULT_DEPTH: f64 = 50.0;
/// Default number of evanescent terms in the eigenfunction expansion.
pub const DEFAULT_N_TERMS: usize = 40;
/// Default partial-wave order for the multiple-scattering backend.
pub const DEFAULT_PARTIAL_WAVES: u32 = 3;
/// Relative change between successive partial-wave orders that triggers a
/// convergence warning.
pub const MS_CONVERGENCE_TOL: f64 = 0.05;

/// Vertical cylinder with draft derived from the slenderness ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderGeometry {
    radius: f64,
    slenderness: f64,
    draft: f64,
    depth: f64,
}

impl CylinderGeometry {
    /// `slenderness` is `R / D`.
    pub fn new(radius: f64, slenderness: f64, depth: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
        }
        if !(slenderness > 0.0 && slenderness.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "slenderness must be positive, got {slenderness}"
            )));
        }
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::InvalidGeometry(format!("depth must be positive, got {depth}")));
        }
        let draft = radius / slenderness;
        if !(draft < depth) {
            return Err(Error::InvalidGeometry(format!(
                "draft {draft} must be less than depth {depth}"
            )));
        }
        Ok(CylinderGeometry {
            radius,
            slenderness,
            draft,
            depth,
        })
    }

    pub fn from_draft(radius: f64, draft: f64, depth: f64) -> Result<Self> {
        if !(draft > 0.0) {
            return Err(Error::InvalidGeometry(format!("draft must be positive, got {draft}")));
        }
        let mut geom = Self::new(radius, radius / draft, depth)?;
        geom.draft = draft;
        Ok(geom)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn slenderness(&self) -> f64 {
        self.slenderness
    }

    pub fn draft(&self) -> f64 {
        self.draft
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Submerged volume `pi R^2 D` (m^3).
    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.draft
    }

    /// Neutrally buoyant mass (kg).
    pub fn mass(&self) -> f64 {
        RHO_WATER * self.volume()
    }

    /// Hydrostatic heave stiffness `rho g pi R^2` (N/m).
    pub fn hydrostatic_stiffness(&self) -> f64 {
        RHO_WATER * GRAVITY * PI * self.radius * self.radius
    }
}

/// Heave coefficients of one isolated body at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleBodyCoeffs {
    pub omega: f64,
    /// Added mass (kg).
    pub added_mass: f64,
    /// Radiation damping (N s/m).
    pub radiation_damping: f64,
    /// Excitation force per unit wave amplitude (N/m).
    pub excitation: Complex64,
}

/// Array coefficients at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroSet {
    pub omega: f64,
    pub wavenumber: f64,
    /// Added-mass matrix (kg).
    pub added_mass: DMatrix<f64>,
    /// Radiation-damping matrix (N s/m).
    pub damping: DMatrix<f64>,
    /// Excitation per unit wave amplitude (N/m).
    pub excitation: DVector<Complex64>,
    /// Set when the multiple-scattering truncation looks unconverged.
    pub warning: Option<String>,
}

impl HydroSet {
    pub fn len(&self) -> usize {
        self.excitation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excitation.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// No interaction between bodies.
    Isolated,
    /// Point-absorber far-field coupling.
    Pa,
    /// Multiple scattering by interaction theory.
    Ms,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Isolated => "isolated",
            BackendKind::Pa => "pa",
            BackendKind::Ms => "ms",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            BackendKind::Isolated => 0,
            BackendKind::Pa => 1,
            BackendKind::Ms => 2,
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "isolated" => Ok(BackendKind::Isolated),
            "pa" => Ok(BackendKind::Pa),
            "ms" => Ok(BackendKind::Ms),
            other => Err(Error::invalid(format!(
                "unknown backend '{other}' (expected isolated, pa or ms)"
            ))),
        }
    }
}

/// Interaction model plus its truncation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HydroBackend {
    pub kind: BackendKind,
    /// Evanescent terms in the single-body expansion.
    pub n_terms: usize,
    /// Highest partial-wave order `M_h` (multiple scattering only).
    pub partial_waves: u32,
}

impl HydroBackend {
    pub fn new(kind: BackendKind) -> Self {
        HydroBackend {
            kind,
            n_terms: DEFAULT_N_TERMS,
            partial_waves: DEFAULT_PARTIAL_WAVES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 4 {
            return Err(Error::invalid(format!("n_terms must be >= 4, got {}", self.n_terms)));
        }
        Ok(())
    }
}

impl Default for HydroBackend {
    fn default() -> Self {
        HydroBackend::new(BackendKind::Pa)
    }
}

/// Everything an array backend needs from the isolated body at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyResponse {
    pub radiation: RadiationSolution,
    /// `D_m` for `m = 0..=M_h`; empty unless the backend scatters.
    pub diffraction: Vec<Complex64>,
}

impl BodyResponse {
    pub fn compute(geom: &CylinderGeometry, omega: f64, backend: &HydroBackend) -> Result<Self> {
        backend.validate()?;
        let radiation = meem::radiation_solve(geom, omega, backend.n_terms)?;
        let diffraction = match backend.kind {
            BackendKind::Ms => {
                diffraction_coefficients(geom, omega, backend.partial_waves, backend.n_terms)?
            }
            _ => Vec::new(),
        };
        Ok(BodyResponse {
            radiation,
            diffraction,
        })
    }
}

#[cfg(test)]
mod tests;
