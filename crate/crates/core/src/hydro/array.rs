//! Array coefficients for the isolated, point-absorber and
//! multiple-scattering backends.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    BackendKind, BodyResponse, CoefficientCache, CylinderGeometry, HydroBackend, HydroSet,
    MS_CONVERGENCE_TOL,
};
use crate::error::{Error, Result};
use crate::special::{bessel_j, bessel_y, hankel2};
use crate::GRAVITY;

/// Fails when any two bodies are not more than `2R` apart.
pub fn check_overlap(layout: &[(f64, f64)], radius: f64) -> Result<()> {
    for p in 0..layout.len() {
        for q in p + 1..layout.len() {
            let dist = distance(layout[p], layout[q]);
            if !(dist > 2.0 * radius) {
                return Err(Error::Overlap {
                    p,
                    q,
                    distance: dist,
                    min: 2.0 * radius,
                });
            }
        }
    }
    Ok(())
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Heave coefficients of an array of identical cylinders. `heading` is the
/// direction of wave travel measured from `+x` (rad).
pub fn array_hydro(
    layout: &[(f64, f64)],
    geom: &CylinderGeometry,
    omega: f64,
    backend: &HydroBackend,
    heading: f64,
) -> Result<HydroSet> {
    validate_layout(layout, geom)?;
    let body = BodyResponse::compute(geom, omega, backend)?;
    assemble(layout, geom, omega, backend, heading, &body)
}

/// As [`array_hydro`], with single-body data taken from (and stored in)
/// `cache`. Inputs are snapped to the cache quantum first, so the result
/// does not depend on whether the entry was already present.
pub fn array_hydro_cached(
    layout: &[(f64, f64)],
    geom: &CylinderGeometry,
    omega: f64,
    backend: &HydroBackend,
    heading: f64,
    cache: &CoefficientCache,
) -> Result<HydroSet> {
    validate_layout(layout, geom)?;
    let (geom, omega) = CoefficientCache::canonical(geom, omega)?;
    let body = cache.body_response(&geom, omega, backend)?;
    assemble(layout, &geom, omega, backend, heading, &body)
}

fn validate_layout(layout: &[(f64, f64)], geom: &CylinderGeometry) -> Result<()> {
    if layout.is_empty() {
        return Err(Error::invalid("layout must contain at least one body"));
    }
    if layout.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::invalid("layout coordinates must be finite"));
    }
    check_overlap(layout, geom.radius())
}

fn incident_phase(k: f64, pos: (f64, f64), heading: f64) -> Complex64 {
    Complex64::from_polar(1.0, -k * (pos.0 * heading.cos() + pos.1 * heading.sin()))
}

fn assemble(
    layout: &[(f64, f64)],
    geom: &CylinderGeometry,
    omega: f64,
    backend: &HydroBackend,
    heading: f64,
    body: &BodyResponse,
) -> Result<HydroSet> {
    let n = layout.len();
    let rad = &body.radiation;
    let k = rad.wavenumber;
    let (a, b) = (rad.coeffs.added_mass, rad.coeffs.radiation_damping);
    let isolated_x = |pos| rad.coeffs.excitation * incident_phase(k, pos, heading);

    match backend.kind {
        BackendKind::Isolated => Ok(HydroSet {
            omega,
            wavenumber: k,
            added_mass: DMatrix::from_diagonal_element(n, n, a),
            damping: DMatrix::from_diagonal_element(n, n, b),
            excitation: DVector::from_iterator(n, layout.iter().map(|&p| isolated_x(p))),
            warning: None,
        }),
        BackendKind::Pa => {
            let mut added_mass = DMatrix::from_diagonal_element(n, n, a);
            let mut damping = DMatrix::from_diagonal_element(n, n, b);
            for p in 0..n {
                for q in 0..n {
                    if p != q {
                        let kd = k * distance(layout[p], layout[q]);
                        damping[(p, q)] = b * bessel_j(0, kd);
                        added_mass[(p, q)] = -b * bessel_y(0, kd) / omega;
                    }
                }
            }
            Ok(HydroSet {
                omega,
                wavenumber: k,
                added_mass,
                damping,
                excitation: DVector::from_iterator(n, layout.iter().map(|&p| isolated_x(p))),
                warning: None,
            })
        }
        BackendKind::Ms => {
            let order = backend.partial_waves;
            let (z, x) = interaction(layout, geom, omega, heading, body, order)?;
            let mut warning = None;
            if n > 1 && order > 0 {
                let (z_low, x_low) = interaction(layout, geom, omega, heading, body, order - 1)?;
                let change = relative_change(&z, &z_low).max(relative_change_vec(&x, &x_low));
                if change > MS_CONVERGENCE_TOL {
                    warning = Some(format!(
                        "partial-wave truncation M_h={order} not converged at omega={omega}: \
                         relative change {change:.3} from M_h-1"
                    ));
                }
            }
            Ok(HydroSet {
                omega,
                wavenumber: k,
                added_mass: z.map(|v| v.im / omega),
                damping: z.map(|v| v.re),
                excitation: x,
                warning,
            })
        }
    }
}

fn relative_change(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / a.norm().max(f64::MIN_POSITIVE)
}

fn relative_change_vec(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    (a - b).norm() / a.norm().max(f64::MIN_POSITIVE)
}

/// Interaction-theory solve with partial waves `|m| <= order`. Returns the
/// radiation impedance `Z = B + i omega A` and the excitation vector.
///
/// Each body's outgoing coefficients `A_p` satisfy
/// `A_p = D (a_p + sum_{q != p} T_qp A_q) + s_p`, where `T_qp` re-expands
/// waves outgoing from `q` as regular waves about `p` (Graf's addition
/// theorem) and `s_p` is the body's own radiated wave.
fn interaction(
    layout: &[(f64, f64)],
    geom: &CylinderGeometry,
    omega: f64,
    heading: f64,
    body: &BodyResponse,
    order: u32,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    let n = layout.len();
    let rad = &body.radiation;
    let k = rad.wavenumber;
    let mo = order as i32;
    let width = (2 * order + 1) as usize;
    let size = n * width;
    let idx = |p: usize, m: i32| p * width + (m + mo) as usize;
    let scatter = |m: i32| body.diffraction[m.unsigned_abs() as usize];

    let mut transfer = DMatrix::<Complex64>::zeros(size, size);
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let (dx, dy) = (layout[p].0 - layout[q].0, layout[p].1 - layout[q].1);
            let kl = k * dx.hypot(dy);
            let alpha = dy.atan2(dx);
            let hank: Vec<Complex64> = (-2 * mo..=2 * mo).map(|v| hankel2(v, kl)).collect();
            for m in -mo..=mo {
                for nn in -mo..=mo {
                    let v = nn - m;
                    transfer[(idx(p, m), idx(q, nn))] =
                        hank[(v + 2 * mo) as usize] * Complex64::from_polar(1.0, v as f64 * alpha);
                }
            }
        }
    }

    let mut system = DMatrix::<Complex64>::identity(size, size);
    for p in 0..n {
        for m in -mo..=mo {
            let row = idx(p, m);
            let dm = scatter(m);
            for col in 0..size {
                system[(row, col)] -= dm * transfer[(row, col)];
            }
        }
    }

    // Column 0: diffraction; column 1 + j: radiation from body j.
    let c_inc = Complex64::new(0.0, GRAVITY / omega);
    let mut incident = DVector::<Complex64>::zeros(size);
    for (p, &pos) in layout.iter().enumerate() {
        let base = c_inc * incident_phase(k, pos, heading);
        for m in -mo..=mo {
            let im = Complex64::new(0.0, -1.0).powi(m) * Complex64::from_polar(1.0, -(m as f64) * heading);
            incident[idx(p, m)] = base * im;
        }
    }
    let mut rhs = DMatrix::<Complex64>::zeros(size, n + 1);
    for p in 0..n {
        for m in -mo..=mo {
            rhs[(idx(p, m), 0)] = scatter(m) * incident[idx(p, m)];
        }
        rhs[(idx(p, 0), 1 + p)] = rad.outgoing;
    }
    let sol = system.lu().solve(&rhs).ok_or_else(|| Error::Solver {
        radius: geom.radius(),
        draft: geom.draft(),
        depth: geom.depth(),
        omega,
        message: "singular interaction system".to_string(),
    })?;
    let exciting = &transfer * &sol;

    let f0 = rad.partial_force;
    let own = Complex64::new(rad.coeffs.radiation_damping, omega * rad.coeffs.added_mass);
    let excitation = DVector::from_fn(n, |p, _| f0 * (incident[idx(p, 0)] + exciting[(idx(p, 0), 0)]));
    let impedance = DMatrix::from_fn(n, n, |p, j| {
        let diag = if p == j { own } else { Complex64::new(0.0, 0.0) };
        diag - f0 * exciting[(idx(p, 0), 1 + j)]
    });
    Ok((impedance, excitation))
}

#[cfg(test)]
pub(crate) fn graf_transfer(k: f64, from: (f64, f64), to: (f64, f64), m: i32, n: i32) -> Complex64 {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let v = n - m;
    hankel2(v, k * dx.hypot(dy)) * Complex64::from_polar(1.0, v as f64 * dy.atan2(dx))
}
