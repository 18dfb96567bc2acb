//! Randomized checks of the model invariants.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use wecfarm::climate::{
    jonswap_density, regular_wave, spectral_moment, synth_site_climate, ClimateProfile,
    FrequencyGrid, SpectrumParams,
};
use wecfarm::dynamics::{FarmDesign, PtoParams, Simulator};
use wecfarm::hydro::{
    array_hydro, cache_key, wavenumber, BackendKind, CylinderGeometry, HydroBackend,
};
use wecfarm::optimize::{
    best_index, compare, distance_constraints, Block, ConstraintReport, Evaluation,
    VariableSpace,
};
use wecfarm::GRAVITY;

/// Layouts of up to five bodies on a 60 m lattice with +/-10 m jitter, so
/// that every pair clears `2R + 10` for `R <= 10`. Body 0 sits at the origin.
fn feasible_layout(max_n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..=max_n).prop_map(|jitter| {
        let pts: Vec<(f64, f64)> = jitter
            .iter()
            .enumerate()
            .map(|(i, &(dx, dy))| ((i % 3) as f64 * 60.0 + dx, (i / 3) as f64 * 60.0 + dy))
            .collect();
        let (x0, y0) = pts[0];
        pts.iter().map(|&(x, y)| (x - x0, y - y0)).collect()
    })
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(f64::MIN_POSITIVE)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jonswap_is_nonnegative_and_unimodal(
        hs in 0.5..8.0f64,
        tp in 3.0..18.0f64,
        gamma in 1.0..7.0f64,
    ) {
        let p = SpectrumParams::new(hs, tp, gamma).unwrap();
        let wp = p.peak_frequency();
        let n = 400;
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let w = wp * (0.2 + 4.8 * i as f64 / (n - 1) as f64);
                jonswap_density(w, &p).unwrap()
            })
            .collect();
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        let peak = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        prop_assert!(s[..=peak].windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(s[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zeroth_moment_scales_with_height_squared(hs in 0.5..6.0f64, tp in 5.0..14.0f64) {
        let grid = FrequencyGrid::uniform(0.1, 3.0, 400).unwrap();
        let m1 = spectral_moment(&SpectrumParams::with_default_gamma(hs, tp).unwrap(), &grid, 0).unwrap();
        let m2 = spectral_moment(&SpectrumParams::with_default_gamma(2.0 * hs, tp).unwrap(), &grid, 0).unwrap();
        prop_assert!(rel(m2, 4.0 * m1) < 1e-12);
    }

    #[test]
    fn dispersion_residual_is_tiny(omega in 0.01..4.0f64, depth in 1.0..5000.0f64) {
        let k = wavenumber(omega, depth);
        prop_assert!(k > 0.0);
        let lhs = omega * omega;
        let rhs = GRAVITY * k * (k * depth).tanh();
        prop_assert!(rel(rhs, lhs) < 1e-12);
    }

    #[test]
    fn distance_violation_formula(
        layout in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..6),
        radius in 0.5..10.0f64,
        safety in 0.0..20.0f64,
    ) {
        let r = distance_constraints(&layout, radius, safety);
        let mut total = 0.0;
        let mut min_gap = f64::INFINITY;
        for p in 0..layout.len() {
            for q in p + 1..layout.len() {
                let d = (layout[p].0 - layout[q].0).hypot(layout[p].1 - layout[q].1);
                total += (2.0 * radius + safety - d).max(0.0);
                min_gap = min_gap.min(d - 2.0 * radius - safety);
            }
        }
        prop_assert!((r.total - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert_eq!(r.is_feasible(), r.total == 0.0);
        prop_assert_eq!(r.is_feasible(), layout.len() < 2 || min_gap >= 0.0);
    }

    #[test]
    fn feasible_never_ranks_below_infeasible(
        f1 in -1e9..1e9f64,
        f2 in -1e9..1e9f64,
        v in 1e-9..1e3f64,
    ) {
        let feasible = Evaluation::new(f1, ConstraintReport::default());
        let infeasible = Evaluation::new(f2, ConstraintReport::scalar(v));
        prop_assert_eq!(compare(&feasible, &infeasible), Ordering::Less);
        prop_assert_eq!(compare(&infeasible, &feasible), Ordering::Greater);
        let pool = [infeasible.clone(), feasible.clone(), infeasible];
        prop_assert_eq!(best_index(&pool), Some(1));
    }

    #[test]
    fn exact_ties_go_to_the_lower_index(f in -1e6..1e6f64, n in 2..8usize) {
        let pool = vec![Evaluation::new(f, ConstraintReport::default()); n];
        prop_assert_eq!(best_index(&pool), Some(0));
    }

    #[test]
    fn clamping_lands_inside_bounds(
        x in prop::collection::vec(-1e6..1e6f64, 8),
    ) {
        let space = VariableSpace::new(&[Block::Plant, Block::Control, Block::Layout], 3).unwrap();
        let (c, changed) = space.clamp(&x);
        prop_assert!(space.contains(&c));
        prop_assert_eq!(changed, !space.contains(&x));
        if !changed {
            prop_assert_eq!(c, x);
        }
    }

    #[test]
    fn cache_key_ignores_sub_quantum_changes(
        radius in 0.5..10.0f64,
        slenderness in 0.5..10.0f64,
        omega in 0.1..3.0f64,
    ) {
        let g = CylinderGeometry::new(radius, slenderness, 50.0).unwrap();
        let h = CylinderGeometry::new(radius * (1.0 + 1e-10), slenderness, 50.0).unwrap();
        let pa = HydroBackend::new(BackendKind::Pa);
        let iso = HydroBackend::new(BackendKind::Isolated);
        prop_assert_eq!(cache_key(&g, omega, &pa), cache_key(&h, omega * (1.0 + 1e-10), &pa));
        prop_assert_ne!(cache_key(&g, omega, &pa), cache_key(&g, omega, &iso));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn array_matrices_are_symmetric_and_dissipative(
        layout in feasible_layout(5),
        radius in 1.0..6.0f64,
        slenderness in 0.5..3.0f64,
        omega in 0.3..2.0f64,
        ms in any::<bool>(),
    ) {
        let geom = CylinderGeometry::new(radius, slenderness, 50.0).unwrap();
        let kinds = if ms {
            vec![BackendKind::Isolated, BackendKind::Ms]
        } else {
            vec![BackendKind::Isolated, BackendKind::Pa]
        };
        for kind in kinds {
            let set = array_hydro(&layout, &geom, omega, &HydroBackend::new(kind), 0.0).unwrap();
            prop_assert!(asymmetry(&set.added_mass) < 1e-9, "{kind}");
            prop_assert!(asymmetry(&set.damping) < 1e-9, "{kind}");
            let tol = -1e-8 * set.damping.norm();
            prop_assert!(min_eigenvalue(&set.damping) >= tol, "{kind}: {}", min_eigenvalue(&set.damping));
        }
    }

    #[test]
    fn powers_survive_translation_and_mirroring(
        layout in feasible_layout(4),
        shift in (-500.0..500.0f64, -500.0..500.0f64),
        b_pto in 1e4..5e5f64,
        k_pto in -5e4..5e5f64,
        period in 5.0..14.0f64,
    ) {
        let geom = CylinderGeometry::new(3.0, 1.5, 50.0).unwrap();
        let pto = PtoParams { b_pto, k_pto };
        let wave = regular_wave(2.0, period).unwrap();
        let sim = Simulator::new(HydroBackend::new(BackendKind::Pa));
        let total = |pts: Vec<(f64, f64)>| -> f64 {
            // Body 0 need not sit at the origin once translated; build the
            // hydrodynamics directly instead of through FarmDesign.
            let set = array_hydro(&pts, &geom, wave.omega, &sim.backend, 0.0).unwrap();
            let design = FarmDesign {
                geom,
                pto,
                layout: pts,
            };
            wecfarm::dynamics::device_power_regular(&design, &set, wave.omega, wave.amplitude)
                .unwrap()
                .iter()
                .sum()
        };
        let base = total(layout.clone());
        let moved = total(layout.iter().map(|&(x, y)| (x + shift.0, y + shift.1)).collect());
        let mirrored = total(layout.iter().map(|&(x, y)| (x, -y)).collect());
        prop_assert!(rel(moved, base) < 1e-9, "{moved} vs {base}");
        prop_assert!(rel(mirrored, base) < 1e-9, "{mirrored} vs {base}");
    }

    #[test]
    fn weighted_power_is_monotone_in_the_limit(
        b_pto in 5e4..5e5f64,
        k_pto in -5e5..0.0f64,
        limits in prop::collection::vec(1e3..5e5f64, 4),
    ) {
        let climate = synth_site_climate(ClimateProfile::HighEnergy, 7);
        let geom = CylinderGeometry::new(5.0, 5.0, 50.0).unwrap();
        let design = FarmDesign::single(geom, PtoParams { b_pto, k_pto });
        let sim = Simulator::new(HydroBackend::new(BackendKind::Isolated))
            .with_grid(FrequencyGrid::uniform(0.1, 3.0, 40).unwrap());
        let mut sorted = limits.clone();
        sorted.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for l in sorted.iter().map(|&l| Some(l)).chain([None]) {
            let p = sim.power_matrix(&design, &climate.axes(), l).unwrap().weighted(&climate, true).unwrap();
            prop_assert!(p >= last);
            last = p;
        }
        let unsat = sim.power_matrix(&design, &climate.axes(), None).unwrap().weighted(&climate, false).unwrap();
        prop_assert_eq!(last, unsat);
    }

    #[test]
    fn isolated_backend_q_is_exactly_one(
        layout in feasible_layout(4),
        b_pto in 1e4..5e5f64,
        period in 5.0..14.0f64,
    ) {
        let geom = CylinderGeometry::new(4.0, 2.0, 50.0).unwrap();
        let design = FarmDesign::new(geom, PtoParams { b_pto, k_pto: 0.0 }, layout).unwrap();
        let sim = Simulator::new(HydroBackend::new(BackendKind::Isolated));
        let q = sim.q_factor_regular(&design, &regular_wave(2.0, period).unwrap()).unwrap();
        prop_assert!((q - 1.0).abs() < 1e-12, "{q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn synthetic_climates_are_normalized_and_repeatable(seed in any::<u64>(), high in any::<bool>()) {
        let profile = if high { ClimateProfile::HighEnergy } else { ClimateProfile::LowEnergy };
        let a = synth_site_climate(profile, seed);
        prop_assert_eq!(a.n_yr(), 30);
        for year in &a.years {
            prop_assert!((year.total_probability() - 1.0).abs() < 1e-6);
        }
        let b = synth_site_climate(profile, seed);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
