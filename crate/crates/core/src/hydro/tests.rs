use super::array::graf_transfer;
use super::*;
use crate::special::{bessel_j, hankel2};

fn geom(r: f64, d: f64) -> CylinderGeometry {
    CylinderGeometry::from_draft(r, d, 50.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn haskind_damping(g: &CylinderGeometry, omega: f64, x: Complex64) -> f64 {
    let k = wavenumber(omega, g.depth());
    k * x.norm_sqr() / (4.0 * RHO_WATER * GRAVITY * group_velocity(omega, g.depth()))
}

#[test]
fn geometry_derives_draft() {
    let g = CylinderGeometry::new(5.0, 5.0, 50.0).unwrap();
    assert!((g.draft() - 1.0).abs() < 1e-12);
    assert!(CylinderGeometry::new(10.0, 0.2, 50.0).is_err());
    assert!(matches!(
        CylinderGeometry::new(2.0, 0.01, 50.0),
        Err(Error::InvalidGeometry(_))
    ));
}

#[test]
fn damping_is_nonnegative_over_grid() {
    for &(r, d) in &[(0.5, 2.5), (2.0, 2.0), (5.0, 1.0), (10.0, 20.0)] {
        let g = geom(r, d);
        for i in 0..30 {
            let omega = 0.1 + 0.1 * i as f64;
            let c = isolated_heave_coefficients(&g, omega, 40).unwrap();
            assert!(c.radiation_damping >= 0.0, "R={r} D={d} omega={omega}: {c:?}");
            assert!(c.added_mass.is_finite() && c.excitation.norm().is_finite());
        }
    }
}

#[test]
fn haskind_energy_identity() {
    for &(r, d) in &[(2.0, 2.0), (3.0, 1.5), (5.0, 1.0)] {
        let g = geom(r, d);
        for &omega in &[0.4, 0.8, 1.2] {
            let c = isolated_heave_coefficients(&g, omega, 40).unwrap();
            let oracle = haskind_damping(&g, omega, c.excitation);
            assert!(rel(c.radiation_damping, oracle) < 0.02, "R={r} omega={omega}");
        }
    }
}

#[test]
fn excitation_matches_pressure_integration() {
    for &(r, d) in &[(2.0, 2.0), (5.0, 1.0), (8.0, 12.0)] {
        let g = geom(r, d);
        for &omega in &[0.3, 0.8, 1.5] {
            let haskind = isolated_heave_coefficients(&g, omega, 40).unwrap().excitation;
            let direct = excitation_by_pressure(&g, omega, 40).unwrap();
            assert!((haskind - direct).norm() < 0.01 * direct.norm(), "R={r} omega={omega}: {haskind} vs {direct}");
        }
    }
}

#[test]
fn long_waves_approach_froude_krylov() {
    let g = geom(5.0, 1.0);
    let omega = 0.02;
    let c = isolated_heave_coefficients(&g, omega, 40).unwrap();
    assert!(rel(c.excitation.norm(), g.hydrostatic_stiffness()) < 0.01);
}

#[test]
fn damping_vanishes_at_low_frequency_like_shallow_water_limit() {
    // Long-wave limit: X -> rho g pi R^2, so b -> rho omega pi^2 R^4 / (4 h).
    let g = geom(5.0, 1.0);
    let mut last = f64::INFINITY;
    for &omega in &[0.05, 0.02, 0.01, 0.005] {
        let c = isolated_heave_coefficients(&g, omega, 40).unwrap();
        let limit = RHO_WATER * omega * std::f64::consts::PI.powi(2) * 5f64.powi(4) / (4.0 * 50.0);
        assert!(c.radiation_damping < last);
        last = c.radiation_damping;
        if omega <= 0.01 {
            assert!(rel(c.radiation_damping, limit) < 0.02, "omega={omega}");
        }
    }
}

#[test]
fn truncation_converges() {
    let g = geom(3.0, 1.5);
    let a = isolated_heave_coefficients(&g, 0.8, 40).unwrap();
    let b = isolated_heave_coefficients(&g, 0.8, 80).unwrap();
    assert!(rel(a.added_mass, b.added_mass) < 0.005);
    assert!(rel(a.radiation_damping, b.radiation_damping) < 0.005);
    assert!(rel(a.excitation.norm(), b.excitation.norm()) < 0.005);
}

#[test]
fn rejects_bad_inputs() {
    let g = geom(2.0, 2.0);
    assert!(isolated_heave_coefficients(&g, 0.0, 40).is_err());
    assert!(isolated_heave_coefficients(&g, 1.0, 3).is_err());
}

#[test]
fn diffraction_conserves_energy() {
    let g = geom(4.0, 3.0);
    for &omega in &[0.3, 0.9, 1.6] {
        for (m, d) in diffraction_coefficients(&g, omega, 4, 40).unwrap().iter().enumerate() {
            let unit = (Complex64::new(1.0, 0.0) + 2.0 * d).norm();
            assert!((unit - 1.0).abs() < 1e-3, "m={m} omega={omega}: {unit}");
        }
    }
}

#[test]
fn graf_addition_reexpands_outgoing_waves() {
    let k: f64 = 0.3;
    let q: (f64, f64) = (1.0, -2.0);
    let p: (f64, f64) = (14.0, 6.0);
    let x: (f64, f64) = (15.5, 5.2);
    for n in -3..=3 {
        let (dx, dy) = (x.0 - q.0, x.1 - q.1);
        let direct =
            hankel2(n, k * dx.hypot(dy)) * Complex64::from_polar(1.0, n as f64 * dy.atan2(dx));
        let (ex, ey) = (x.0 - p.0, x.1 - p.1);
        let (rp, tp) = (ex.hypot(ey), ey.atan2(ex));
        let sum: Complex64 = (-40..=40)
            .map(|m| graf_transfer(k, q, p, m, n) * bessel_j(m, k * rp) * Complex64::from_polar(1.0, m as f64 * tp))
            .sum();
        assert!((direct - sum).norm() < 1e-10 * direct.norm(), "n={n}: {direct} vs {sum}");
    }
}

#[test]
fn point_absorber_coupling_is_j0() {
    let h: f64 = 50.0;
    let omega = (GRAVITY * 0.1 * (0.1 * h).tanh()).sqrt();
    let g = geom(2.0, 2.0);
    let set = array_hydro(&[(0.0, 0.0), (50.0, 0.0)], &g, omega, &HydroBackend::new(BackendKind::Pa), 0.0).unwrap();
    let ratio = set.damping[(0, 1)] / set.damping[(0, 0)];
    assert!((ratio - bessel_j(0, 5.0)).abs() < 1e-9);
    assert!((ratio + 0.17760).abs() < 1e-5);

    let far = array_hydro(&[(0.0, 0.0), (1e5, 0.0)], &g, omega, &HydroBackend::new(BackendKind::Pa), 0.0).unwrap();
    assert!((far.damping[(0, 1)] / far.damping[(0, 0)]).abs() < 1e-2);
}

#[test]
fn isolated_backend_is_diagonal() {
    let g = geom(2.0, 2.0);
    let layout = [(0.0, 0.0), (20.0, 5.0), (40.0, -10.0)];
    let set = array_hydro(&layout, &g, 0.7, &HydroBackend::new(BackendKind::Isolated), 0.0).unwrap();
    let iso = isolated_heave_coefficients(&g, 0.7, DEFAULT_N_TERMS).unwrap();
    for p in 0..3 {
        for q in 0..3 {
            if p == q {
                assert_eq!(set.added_mass[(p, q)], iso.added_mass);
                assert_eq!(set.damping[(p, q)], iso.radiation_damping);
            } else {
                assert_eq!(set.added_mass[(p, q)], 0.0);
                assert_eq!(set.damping[(p, q)], 0.0);
            }
        }
        assert!((set.excitation[p].norm() - iso.excitation.norm()).abs() < 1e-9 * iso.excitation.norm());
    }
}

#[test]
fn overlapping_bodies_are_rejected() {
    let g = geom(2.0, 2.0);
    let err = array_hydro(&[(0.0, 0.0), (3.0, 0.0)], &g, 0.7, &HydroBackend::default(), 0.0).unwrap_err();
    assert!(matches!(err, Error::Overlap { p: 0, q: 1, .. }));
}

#[test]
fn single_body_scattering_reproduces_isolated() {
    let g = geom(3.0, 2.0);
    for &omega in &[0.4, 0.9, 1.5] {
        let iso = isolated_heave_coefficients(&g, omega, DEFAULT_N_TERMS).unwrap();
        let ms = array_hydro(&[(0.0, 0.0)], &g, omega, &HydroBackend::new(BackendKind::Ms), 0.0).unwrap();
        assert!(rel(ms.added_mass[(0, 0)], iso.added_mass) < 1e-3);
        assert!(rel(ms.damping[(0, 0)], iso.radiation_damping) < 1e-3);
        assert!((ms.excitation[0] - iso.excitation).norm() < 1e-3 * iso.excitation.norm());
    }
}

fn frobenius_asymmetry(m: &nalgebra::DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() / m.norm()
}

fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigen().eigenvalues.min()
}

#[test]
fn scattering_matrices_are_symmetric_and_dissipative() {
    let g = geom(3.0, 2.0);
    let layout = [(0.0, 0.0), (18.0, 4.0), (5.0, 21.0), (30.0, -12.0)];
    for &omega in &[0.3, 0.6, 0.9, 1.2, 2.0] {
        let set = array_hydro(&layout, &g, omega, &HydroBackend::new(BackendKind::Ms), 0.3).unwrap();
        assert!(frobenius_asymmetry(&set.added_mass) < 1e-9, "omega={omega}");
        assert!(frobenius_asymmetry(&set.damping) < 1e-9, "omega={omega}");
        assert!(min_eigenvalue(&set.damping) >= -1e-8 * set.damping.norm(), "omega={omega}");
    }
}

#[test]
fn scattering_is_cauchy_in_partial_wave_order() {
    // Spacing 4R. The 0 -> 1 step can be smaller than 1 -> 2 once kR > ~1.4,
    // where |D_1| dips while |D_2| grows, so monotonicity is checked from the
    // 1 -> 2 step on.
    let g = geom(2.0, 2.0);
    let layout = [(0.0, 0.0), (8.0, 0.0), (4.0, 9.0)];
    for omega in FrequencyGridOmegas::default_sample() {
        let sets: Vec<HydroSet> = (0..=6)
            .map(|order| {
                let backend = HydroBackend {
                    partial_waves: order,
                    ..HydroBackend::new(BackendKind::Ms)
                };
                array_hydro(&layout, &g, omega, &backend, 0.0).unwrap()
            })
            .collect();
        let changes: Vec<f64> = sets
            .windows(2)
            .map(|w| (&w[1].damping - &w[0].damping).norm() / w[1].damping.norm())
            .collect();
        // Below ~1e-9 the changes are round-off and carry no ordering.
        let floor = 1e-9;
        for pair in changes[1..].windows(2) {
            assert!(pair[1] <= pair[0].max(floor), "omega={omega}: {changes:?}");
        }
        assert!(changes[2] < MS_CONVERGENCE_TOL, "omega={omega}: {changes:?}");
    }
}

struct FrequencyGridOmegas;

impl FrequencyGridOmegas {
    fn default_sample() -> Vec<f64> {
        crate::climate::FrequencyGrid::default_grid()
            .omegas()
            .iter()
            .step_by(7)
            .copied()
            .collect()
    }
}

#[test]
fn translation_multiplies_excitation_by_common_phase() {
    let g = geom(2.0, 2.0);
    let layout = [(0.0, 0.0), (15.0, 3.0), (2.0, -17.0)];
    let shifted: Vec<(f64, f64)> = layout.iter().map(|&(x, y)| (x + 37.0, y - 11.0)).collect();
    for kind in [BackendKind::Isolated, BackendKind::Pa, BackendKind::Ms] {
        let backend = HydroBackend::new(kind);
        let a = array_hydro(&layout, &g, 0.8, &backend, 0.0).unwrap();
        let b = array_hydro(&shifted, &g, 0.8, &backend, 0.0).unwrap();
        let phase = b.excitation[0] / a.excitation[0];
        assert!((phase.norm() - 1.0).abs() < 1e-9);
        for p in 0..3 {
            assert!((b.excitation[p] - a.excitation[p] * phase).norm() < 1e-9 * a.excitation[p].norm());
        }
        assert!((&a.damping - &b.damping).norm() < 1e-9 * a.damping.norm());
    }
}

#[test]
fn cache_keys_quantize() {
    let backend = HydroBackend::new(BackendKind::Isolated);
    let a = cache_key(&geom(2.0, 1.0), 0.8, &backend);
    assert_eq!(a, cache_key(&geom(2.0, 1.0), 0.8, &backend));
    let nudged = CylinderGeometry::new(2.0 + 1e-9, 2.0, 50.0).unwrap();
    assert_eq!(a, cache_key(&nudged, 0.8, &backend));
    assert_ne!(a, cache_key(&geom(2.0, 1.0), 0.8, &HydroBackend::new(BackendKind::Pa)));
    assert_ne!(a, cache_key(&geom(2.0, 1.0), 0.8001, &backend));
}

#[test]
fn cached_results_do_not_depend_on_hits() {
    let g = geom(2.5, 1.7);
    let layout = [(0.0, 0.0), (20.0, 3.0)];
    let backend = HydroBackend::new(BackendKind::Ms);
    let cache = CoefficientCache::new();
    let first = array_hydro_cached(&layout, &g, 0.9, &backend, 0.0, &cache).unwrap();
    let second = array_hydro_cached(&layout, &g, 0.9, &backend, 0.0, &cache).unwrap();
    assert_eq!(first, second);
    assert_eq!(cache.stats(), (1, 1));
    let fresh = array_hydro_cached(&layout, &g, 0.9, &backend, 0.0, &CoefficientCache::new()).unwrap();
    assert_eq!(first, fresh);
    let uncached = array_hydro(&layout, &g, 0.9, &backend, 0.0).unwrap();
    assert!((&uncached.damping - &first.damping).norm() < 1e-4 * first.damping.norm());
}

#[test]
fn cache_file_round_trips() {
    let cache = CoefficientCache::new();
    for &omega in &[0.5, 0.7] {
        for kind in [BackendKind::Pa, BackendKind::Ms] {
            cache.body_response(&geom(2.0, 2.0), omega, &HydroBackend::new(kind)).unwrap();
        }
    }
    let mut bytes = Vec::new();
    cache.write_to(&mut bytes).unwrap();
    let loaded = CoefficientCache::read_from(bytes.as_slice()).unwrap();
    assert_eq!(loaded.len(), 4);
    let mut again = Vec::new();
    loaded.write_to(&mut again).unwrap();
    assert_eq!(bytes, again);
    let a = cache.body_response(&geom(2.0, 2.0), 0.7, &HydroBackend::new(BackendKind::Ms)).unwrap();
    let b = loaded.body_response(&geom(2.0, 2.0), 0.7, &HydroBackend::new(BackendKind::Ms)).unwrap();
    assert_eq!(a, b);
    assert!(CoefficientCache::read_from(&bytes[..bytes.len() - 3]).is_err());
}
