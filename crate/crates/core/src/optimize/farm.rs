use std::sync::Arc;

use crate::climate::{RegularWave, SiteClimate};
use crate::dynamics::{FarmDesign, PtoParams, Simulator};
use crate::error::{Error, Result};
use crate::hydro::CylinderGeometry;

use super::{design_constraints, Block, ConstraintReport, Evaluation, Problem, VariableSpace};

/// Wave input the objective is averaged over.
#[derive(Debug, Clone)]
pub enum WaveObjective {
    /// Climate-weighted mean power with optional per-device saturation (W).
    Climate {
        climate: Arc<SiteClimate>,
        p_limit: Option<f64>,
    },
    /// Mean power in one regular wave.
    Regular {
        wave: RegularWave,
        p_limit: Option<f64>,
    },
}

impl WaveObjective {
    pub fn p_limit(&self) -> Option<f64> {
        match self {
            WaveObjective::Climate { p_limit, .. } | WaveObjective::Regular { p_limit, .. } => *p_limit,
        }
    }
}

/// Design values decoded from a variable vector, before any validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedDesign {
    pub radius: f64,
    pub slenderness: f64,
    pub pto: PtoParams,
    pub layout: Vec<(f64, f64)>,
}

impl DecodedDesign {
    pub fn draft(&self) -> f64 {
        self.radius / self.slenderness
    }
}

/// Minimize `-p_v` over the active blocks; inactive values come from the
/// template design.
#[derive(Debug, Clone)]
pub struct FarmProblem {
    pub space: VariableSpace,
    pub template: FarmDesign,
    pub objective: WaveObjective,
    pub simulator: Simulator,
    /// Hull clearance `s_d` (m).
    pub safety_distance: f64,
}

impl FarmProblem {
    pub fn new(
        space: VariableSpace,
        template: FarmDesign,
        objective: WaveObjective,
        simulator: Simulator,
        safety_distance: f64,
    ) -> Result<Self> {
        if template.n_wec() != space.n_wec() {
            return Err(Error::invalid(format!(
                "template has {} devices, variable space {}",
                template.n_wec(),
                space.n_wec()
            )));
        }
        if !(safety_distance >= 0.0) {
            return Err(Error::invalid(format!("safety distance {safety_distance}")));
        }
        Ok(FarmProblem {
            space,
            template,
            objective,
            simulator,
            safety_distance,
        })
    }

    pub fn decode(&self, x: &[f64]) -> DecodedDesign {
        let t = &self.template;
        let mut d = DecodedDesign {
            radius: t.geom.radius(),
            slenderness: t.geom.slenderness(),
            pto: t.pto,
            layout: t.layout.clone(),
        };
        let mut i = 0;
        for block in self.space.blocks() {
            match block {
                Block::Plant => {
                    d.radius = x[i];
                    d.slenderness = x[i + 1];
                    i += 2;
                }
                Block::Control => {
                    d.pto.k_pto = x[i];
                    d.pto.b_pto = x[i + 1];
                    i += 2;
                }
                Block::Layout => {
                    let m = d.layout.len() - 1;
                    for j in 0..m {
                        d.layout[j + 1] = (x[i + j], x[i + m + j]);
                    }
                    i += 2 * m;
                }
            }
        }
        d
    }

    /// Inverse of [`decode`](Self::decode) for the active blocks.
    pub fn encode(&self, design: &FarmDesign) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.space.dim());
        for block in self.space.blocks() {
            match block {
                Block::Plant => x.extend([design.geom.radius(), design.geom.slenderness()]),
                Block::Control => x.extend([design.pto.k_pto, design.pto.b_pto]),
                Block::Layout => {
                    x.extend(design.layout[1..].iter().map(|p| p.0));
                    x.extend(design.layout[1..].iter().map(|p| p.1));
                }
            }
        }
        x
    }

    pub fn constraints(&self, x: &[f64]) -> ConstraintReport {
        let d = self.decode(x);
        design_constraints(&d.layout, d.radius, d.draft(), self.safety_distance)
    }

    pub fn design(&self, x: &[f64]) -> Result<FarmDesign> {
        let d = self.decode(x);
        let geom = CylinderGeometry::new(d.radius, d.slenderness, self.template.geom.depth())?;
        FarmDesign::new(geom, d.pto, d.layout)
    }

    /// Farm mean power (W), saturated where a limit applies.
    pub fn farm_power(&self, design: &FarmDesign) -> Result<f64> {
        match &self.objective {
            WaveObjective::Climate { climate, p_limit } => self
                .simulator
                .power_matrix(design, &climate.axes(), *p_limit)?
                .weighted(climate, true),
            WaveObjective::Regular { wave, p_limit } => {
                let per = self.simulator.regular_power(design, wave)?;
                Ok(per
                    .iter()
                    .map(|&p| p_limit.map_or(p, |l| p.min(l)))
                    .sum())
            }
        }
    }

    fn power_per_volume(&self, x: &[f64]) -> Result<f64> {
        let design = self.design(x)?;
        Ok(self.farm_power(&design)? / design.total_volume())
    }
}

impl Problem for FarmProblem {
    fn bounds(&self) -> &[(f64, f64)] {
        self.space.bounds()
    }

    fn names(&self) -> Vec<String> {
        self.space.names().to_vec()
    }

    /// Infeasible designs are not simulated; they carry objective 0, the
    /// worst attainable value of `-p_v`. Model failures carry the same value
    /// plus the diagnostic.
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (x, clamped) = self.space.clamp(x);
        let report = self.constraints(&x);
        let mut e = if !report.is_feasible() {
            Evaluation::new(0.0, report)
        } else {
            match self.power_per_volume(&x) {
                Ok(pv) => Evaluation::new(-pv, report),
                Err(err) => Evaluation::failed(0.0, err.to_string()),
            }
        };
        e.clamped = clamped;
        e
    }
}
