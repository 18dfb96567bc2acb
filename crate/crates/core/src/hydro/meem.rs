//! Matched eigenfunction expansion for a heaving truncated vertical cylinder
//! in finite depth.
//!
//! Time dependence is `exp(i omega t)`, so outgoing waves are `H^(2)`. The
//! vertical coordinate is `u = z + h`. Inside (`r < R`, `0 < u < d`, `d = h - D`)
//! the modes are `cos(lambda_j u)` with `lambda_j = j pi / d`; outside the
//! modes are `Z_0 = cosh(k u) / cosh(k h)` and `Z_n = cos(k_n u)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::dispersion::{evanescent_wavenumbers, wavenumber};
use super::{CylinderGeometry, SingleBodyCoeffs};
use crate::error::{Error, Result};
use crate::special::{
    bessel_i_ratio, bessel_j, bessel_j_derivative, bessel_k_ratio, hankel2, hankel2_derivative,
    sinc,
};
use crate::{GRAVITY, RHO_WATER};

/// Depth-dependent data shared by the radiation and diffraction solves.
struct Modes {
    k: f64,
    /// `k_0 = k`, followed by the evanescent roots.
    kn: Vec<f64>,
    /// `lambda_j`, `j = 0..=N`.
    lambda: Vec<f64>,
    /// `int_0^h Z_n^2 du`.
    norm: Vec<f64>,
    /// `int_0^d cos(lambda_j u) Z_n(u) du`, row `j`, column `n`.
    coupling: DMatrix<f64>,
    d: f64,
}

impl Modes {
    fn new(geom: &CylinderGeometry, omega: f64, n_terms: usize) -> Modes {
        let h = geom.depth();
        let d = h - geom.draft();
        let k = wavenumber(omega, h);
        let mut kn = vec![k];
        kn.extend(evanescent_wavenumbers(omega, h, n_terms));
        let lambda: Vec<f64> = (0..=n_terms).map(|j| j as f64 * PI / d).collect();

        let kh = k * h;
        let sech2 = if kh > 350.0 { 0.0 } else { 1.0 / (kh.cosh() * kh.cosh()) };
        let mut norm = vec![0.5 * (h * sech2 + kh.tanh() / k)];
        norm.extend(kn[1..].iter().map(|&q| 0.5 * h + (2.0 * q * h).sin() / (4.0 * q)));

        // sinh(k d) / cosh(k h) without overflow.
        let sinh_ratio =
            ((k * (d - h)).exp() - (-k * (d + h)).exp()) / (1.0 + (-2.0 * kh).exp());
        let coupling = DMatrix::from_fn(n_terms + 1, n_terms + 1, |j, n| {
            let lam = lambda[j];
            if n == 0 {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * k * sinh_ratio / (k * k + lam * lam)
            } else {
                let q = kn[n];
                0.5 * d * (sinc((lam - q) * d) + sinc((lam + q) * d))
            }
        });
        Modes {
            k,
            kn,
            lambda,
            norm,
            coupling,
            d,
        }
    }

    fn len(&self) -> usize {
        self.lambda.len()
    }
}

/// Solves the matched system for azimuthal order `m`.
///
/// Unknowns are interior amplitudes `alpha_j` (of `I_m(lambda_j r)/I_m(lambda_j R) cos(lambda_j u)`,
/// or `(r/R)^m` for `j = 0`) and exterior amplitudes `beta_n` (of
/// `H_m(k r)/H_m(k R) Z_0` and `K_m(k_n r)/K_m(k_n R) Z_n`).
/// `potential_rhs[j]` and `velocity_rhs[n]` are the projected jumps of the
/// known part of the solution.
fn solve_order(
    geom: &CylinderGeometry,
    omega: f64,
    modes: &Modes,
    m: u32,
    potential_rhs: &[Complex64],
    velocity_rhs: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let r = geom.radius();
    let size = modes.len();
    let mf = m as f64;

    let w: Vec<f64> = modes
        .lambda
        .iter()
        .map(|&lam| {
            if lam == 0.0 {
                mf / r
            } else {
                lam * (bessel_i_ratio(m, lam * r) + mf / (lam * r))
            }
        })
        .collect();
    let mut gamma = vec![Complex64::new(0.0, 0.0); size];
    let kr = modes.k * r;
    gamma[0] = modes.k * hankel2_derivative(m as i32, kr) / hankel2(m as i32, kr);
    for n in 1..size {
        let q = modes.kn[n];
        gamma[n] = Complex64::from(q * (mf / (q * r) - bessel_k_ratio(m, q * r)));
    }

    let mut mat = DMatrix::<Complex64>::zeros(2 * size, 2 * size);
    let mut rhs = DVector::<Complex64>::zeros(2 * size);
    for j in 0..size {
        let eps = if j == 0 { 1.0 } else { 0.5 };
        mat[(j, j)] = Complex64::from(modes.d * eps);
        for n in 0..size {
            mat[(j, size + n)] = Complex64::from(-modes.coupling[(j, n)]);
        }
        rhs[j] = potential_rhs[j];
    }
    for n in 0..size {
        mat[(size + n, size + n)] = gamma[n] * modes.norm[n];
        for j in 0..size {
            mat[(size + n, j)] = Complex64::from(-w[j] * modes.coupling[(j, n)]);
        }
        rhs[size + n] = velocity_rhs[n];
    }

    let fail = |message: &str| Error::Solver {
        radius: r,
        draft: geom.draft(),
        depth: geom.depth(),
        omega,
        message: message.to_string(),
    };
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| fail("singular matching system"))?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(fail("non-finite matching solution"));
    }
    let alpha = sol.rows(0, size).iter().copied().collect();
    let beta = sol.rows(size, size).iter().copied().collect();
    Ok((alpha, beta))
}

/// `int_0^R 2 pi r (sum_j alpha_j I_0(lambda_j r)/I_0(lambda_j R) (-1)^j) dr`
/// for the axisymmetric interior modes evaluated on the body bottom.
fn bottom_integral(modes: &Modes, r: f64, alpha: &[Complex64]) -> Complex64 {
    let mut sum = alpha[0] * (0.5 * r * r);
    for (j, a) in alpha.iter().enumerate().skip(1) {
        let lam = modes.lambda[j];
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += a * (sign * r * bessel_i_ratio(0, lam * r) / lam);
    }
    2.0 * PI * sum
}

/// Single-body heave radiation result with the far-field data needed by the
/// interaction backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationSolution {
    pub coeffs: SingleBodyCoeffs,
    pub wavenumber: f64,
    /// Coefficient of `H_0^(2)(k r) Z_0` radiated by unit heave velocity.
    pub outgoing: Complex64,
    /// Heave force per unit coefficient of an incident `J_0(k r) Z_0` potential.
    pub partial_force: Complex64,
}

pub(crate) fn radiation_solve(
    geom: &CylinderGeometry,
    omega: f64,
    n_terms: usize,
) -> Result<RadiationSolution> {
    validate(geom, omega, n_terms)?;
    let modes = Modes::new(geom, omega, n_terms);
    let size = modes.len();
    let r = geom.radius();
    let d = modes.d;

    // Particular interior solution ((z+h)^2 - r^2/2) / (2d) carries the body
    // bottom condition.
    let mut pot = vec![Complex64::new(0.0, 0.0); size];
    pot[0] = Complex64::from(-(d * d / 6.0 - r * r / 4.0));
    for (j, p) in pot.iter_mut().enumerate().skip(1) {
        let lam = modes.lambda[j];
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *p = Complex64::from(-sign / (lam * lam));
    }
    let vel: Vec<Complex64> = (0..size)
        .map(|n| Complex64::from(-r / (2.0 * d) * modes.coupling[(0, n)]))
        .collect();
    let (alpha, beta) = solve_order(geom, omega, &modes, 0, &pot, &vel)?;

    let particular = 2.0 * PI * (d * d * r * r / 2.0 - r.powi(4) / 8.0) / (2.0 * d);
    let integral = bottom_integral(&modes, r, &alpha) + particular;
    let added_mass = RHO_WATER * integral.re;
    let radiation_damping = -omega * RHO_WATER * integral.im;

    let outgoing = beta[0] / hankel2(0, modes.k * r);
    let n0 = modes.norm[0];
    let excitation = Complex64::new(0.0, 4.0 * RHO_WATER * GRAVITY * n0) * outgoing;
    let partial_force = 4.0 * omega * RHO_WATER * n0 * outgoing;
    Ok(RadiationSolution {
        coeffs: SingleBodyCoeffs {
            omega,
            added_mass,
            radiation_damping,
            excitation,
        },
        wavenumber: modes.k,
        outgoing,
        partial_force,
    })
}

fn validate(geom: &CylinderGeometry, omega: f64, n_terms: usize) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    if n_terms < 4 {
        return Err(Error::invalid(format!("n_terms must be >= 4, got {n_terms}")));
    }
    if !(geom.draft() < geom.depth()) {
        return Err(Error::InvalidGeometry(format!(
            "draft {} must be below depth {}",
            geom.draft(),
            geom.depth()
        )));
    }
    Ok(())
}

/// Heave added mass, radiation damping and excitation of an isolated
/// truncated cylinder. Excitation comes from the radiated far field through
/// the Haskind relation; the incident wave travels along `+x` with its crest
/// at the body axis.
pub fn isolated_heave_coefficients(
    geom: &CylinderGeometry,
    omega: f64,
    n_terms: usize,
) -> Result<SingleBodyCoeffs> {
    radiation_solve(geom, omega, n_terms).map(|s| s.coeffs)
}

/// Interior amplitudes and outgoing coefficient for an incident
/// `J_m(k r) Z_0 e^{i m theta}` wave of unit amplitude.
fn diffraction_order(
    geom: &CylinderGeometry,
    omega: f64,
    m: u32,
    modes: &Modes,
) -> Result<(Vec<Complex64>, Complex64)> {
    let size = modes.len();
    let kr = modes.k * geom.radius();
    let jm = bessel_j(m as i32, kr);
    let djm = bessel_j_derivative(m as i32, kr);
    let pot: Vec<Complex64> = (0..size)
        .map(|j| Complex64::from(jm * modes.coupling[(j, 0)]))
        .collect();
    let mut vel = vec![Complex64::new(0.0, 0.0); size];
    vel[0] = Complex64::from(-modes.k * djm * modes.norm[0]);
    let (alpha, beta) = solve_order(geom, omega, modes, m, &pot, &vel)?;
    Ok((alpha, beta[0] / hankel2(m as i32, kr)))
}

/// Diffraction coefficients `D_m`, `m = 0..=max_order`: an incident
/// `J_m(k r) e^{i m theta} Z_0` produces the scattered wave
/// `D_m H_m^(2)(k r) e^{i m theta} Z_0`. Energy conservation gives
/// `|1 + 2 D_m| = 1`.
pub fn diffraction_coefficients(
    geom: &CylinderGeometry,
    omega: f64,
    max_order: u32,
    n_terms: usize,
) -> Result<Vec<Complex64>> {
    validate(geom, omega, n_terms)?;
    let modes = Modes::new(geom, omega, n_terms);
    (0..=max_order)
        .map(|m| diffraction_order(geom, omega, m, &modes).map(|(_, d)| d))
        .collect()
}

/// Heave excitation found by integrating the diffraction pressure over the
/// body bottom, independently of the radiation problem.
pub fn excitation_by_pressure(geom: &CylinderGeometry, omega: f64, n_terms: usize) -> Result<Complex64> {
    validate(geom, omega, n_terms)?;
    let modes = Modes::new(geom, omega, n_terms);
    let (alpha, _) = diffraction_order(geom, omega, 0, &modes)?;
    // -i omega rho times the incident potential amplitude i g / omega.
    Ok(RHO_WATER * GRAVITY * bottom_integral(&modes, geom.radius(), &alpha))
}
