use std::sync::Arc;

use super::*;
use crate::climate::{regular_wave, synth_site_climate, ClimateProfile, FrequencyGrid};
use crate::dynamics::{FarmDesign, PtoParams, Simulator};
use crate::hydro::{BackendKind, CylinderGeometry, HydroBackend};

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Minimize `x + y` subject to `x^2 + y^2 <= 1`; optimum at `-(1, 1)/sqrt 2`.
struct InsideDisc;

impl Problem for InsideDisc {
    fn bounds(&self) -> &[(f64, f64)] {
        &[(-2.0, 2.0), (-2.0, 2.0)]
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let v = (x[0] * x[0] + x[1] * x[1] - 1.0).max(0.0);
        Evaluation::new(x[0] + x[1], ConstraintReport::scalar(v))
    }
}

#[test]
fn distance_constraint_examples() {
    let r = distance_constraints(&[(0.0, 0.0), (14.0, 0.0)], 2.0, 10.0);
    assert!(r.is_feasible());
    assert_eq!(r.total, 0.0);
    let r = distance_constraints(&[(0.0, 0.0), (10.0, 0.0)], 2.0, 10.0);
    assert_eq!(r.pairs.len(), 1);
    assert!((r.total - 4.0).abs() < 1e-12);
    assert_eq!(distance_constraints(&[(0.0, 0.0)], 2.0, 10.0).total, 0.0);
}

#[test]
fn draft_violation_for_squat_large_cylinder() {
    let r = design_constraints(&[(0.0, 0.0)], 10.0, 10.0 / 0.2, DEFAULT_SAFETY_DISTANCE);
    assert!((r.draft - 30.0).abs() < 1e-9);
    assert!((r.total - 30.0).abs() < 1e-9);
    assert!((design_constraints(&[(0.0, 0.0)], 1.0, 0.25, 10.0).draft - 0.25).abs() < 1e-12);
}

#[test]
fn default_bounds() {
    let s = VariableSpace::new(&[Block::Layout, Block::Plant, Block::Control], 3).unwrap();
    assert_eq!(
        s.names(),
        ["radius", "slenderness", "k_pto", "b_pto", "x2", "x3", "y2", "y3"]
    );
    let w = 0.5 * 60000f64.sqrt();
    assert_eq!(s.bounds()[0], (0.5, 10.0));
    assert_eq!(s.bounds()[1], (0.2, 10.0));
    assert_eq!(s.bounds()[2], (-5e5, 5e5));
    assert_eq!(s.bounds()[3], (0.0, 5e5));
    assert_eq!(s.bounds()[4], (0.0, w));
    assert_eq!(s.bounds()[7], (-w, w));
    assert!(VariableSpace::new(&[Block::Layout], 1).is_err());
    assert!(VariableSpace::new(&[], 2).is_err());
    let (c, flag) = s.clamp(&[20.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(flag);
    assert_eq!(c[0], 10.0);
    assert_eq!(c[3], 0.0);
}

#[test]
fn feasibility_ordering() {
    let feasible = Evaluation::new(100.0, ConstraintReport::default());
    let slightly = Evaluation::new(-100.0, ConstraintReport::scalar(0.1));
    let badly = Evaluation::new(-1e9, ConstraintReport::scalar(5.0));
    let failed = Evaluation::failed(-1e12, "boom");
    use std::cmp::Ordering::*;
    assert_eq!(compare(&feasible, &slightly), Less);
    assert_eq!(compare(&slightly, &badly), Less);
    assert_eq!(compare(&badly, &failed), Less);
    assert_eq!(best_index(&[badly.clone(), feasible.clone(), feasible.clone()]), Some(1));
}

#[test]
fn ga_sphere_harness() {
    let p = FnProblem::new(vec![(-5.0, 5.0); 2], sphere);
    let config = GaConfig {
        population: Some(40),
        generations: 100,
        ..GaConfig::default()
    };
    let r = run_ga(&p, &config, 3, &[]);
    assert!(r.x.iter().all(|v| v.abs() < 1e-3), "{:?}", r.x);
    assert!(r.trace.len() <= 100);
    assert_eq!(r.evaluations, 40 + 99 * 39);
    assert!(r.trace.windows(2).all(|w| w[1].best_objective <= w[0].best_objective));
}

#[test]
fn ga_is_deterministic_across_thread_counts() {
    let p = FnProblem::new(vec![(-5.0, 5.0); 3], |x: &[f64]| {
        sphere(x) + (3.0 * x[0]).sin()
    });
    let config = GaConfig {
        generations: 20,
        ..GaConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ga(&p, &config, 11, &[]))
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.x, b.x);
    assert_eq!(a.trace, b.trace);
    let c = run_ga(&p, &config, 12, &[]);
    assert_ne!(a.trace, c.trace);
}

#[test]
fn ga_respects_feasibility() {
    let config = GaConfig {
        population: Some(30),
        generations: 60,
        ..GaConfig::default()
    };
    let r = run_ga(&InsideDisc, &config, 5, &[]);
    assert!(r.feasible);
    assert!(r.x[0] * r.x[0] + r.x[1] * r.x[1] <= 1.0);
    assert!((r.evaluation.objective + 2f64.sqrt()).abs() < 0.05);
}

#[test]
fn ga_flags_infeasible_result() {
    struct Never;
    impl Problem for Never {
        fn bounds(&self) -> &[(f64, f64)] {
            &[(0.0, 1.0)]
        }
        fn evaluate(&self, x: &[f64]) -> Evaluation {
            Evaluation::new(0.0, ConstraintReport::scalar(1.0 + x[0]))
        }
    }
    let r = run_ga(&Never, &GaConfig { generations: 5, ..GaConfig::default() }, 1, &[]);
    assert!(!r.feasible);
    assert!(r.x[0] < 0.2);
}

#[test]
fn ga_budget_truncates() {
    let p = FnProblem::new(vec![(-1.0, 1.0)], sphere);
    let config = GaConfig {
        population: Some(10),
        generations: 50,
        max_evaluations: Some(35),
        ..GaConfig::default()
    };
    let r = run_ga(&p, &config, 1, &[]);
    assert!(r.truncated);
    assert_eq!(r.evaluations, 28);
    assert_eq!(r.trace.len(), 3);
}

#[test]
fn local_from_optimum_stays_put() {
    let p = FnProblem::new(vec![(-5.0, 5.0); 2], sphere);
    let r = run_local(&p, &LocalConfig::default(), &[0.0, 0.0]);
    assert_eq!(r.x, vec![0.0, 0.0]);
    assert_eq!(r.evaluation.objective, 0.0);
    assert!(!r.truncated);
}

#[test]
fn local_trace_is_monotone_and_improves_on_start() {
    let p = FnProblem::new(vec![(-5.0, 5.0); 3], |x: &[f64]| {
        (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2) + x[2].powi(4)
    });
    let x0 = [4.0, 4.0, -3.0];
    let start = p.evaluate(&x0).objective;
    let r = run_local(&p, &LocalConfig::default(), &x0);
    assert!(r.trace.windows(2).all(|w| w[1].spread <= w[0].spread));
    assert!(r.trace.windows(2).all(|w| w[1].best_objective <= w[0].best_objective));
    assert!(r.evaluation.objective <= start);
    assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] + 0.5).abs() < 1e-3, "{:?}", r.x);
    assert!(r.evaluations <= 2000);
}

#[test]
fn local_budget_is_exact() {
    let p = FnProblem::new(vec![(-5.0, 5.0); 4], |x: &[f64]| {
        x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.3).powi(2)).sum()
    });
    let config = LocalConfig {
        max_evaluations: 37,
        ..LocalConfig::default()
    };
    let r = run_local(&p, &config, &[2.0; 4]);
    assert_eq!(r.evaluations, 37);
    assert!(r.truncated);
}

#[test]
fn local_handles_constraints_with_penalty() {
    let r = run_local_multistart(&InsideDisc, &LocalConfig::default(), &[1.5, 1.5], 2);
    assert!(r.feasible);
    assert!((r.evaluation.objective + 2f64.sqrt()).abs() < 0.02, "{}", r.evaluation.objective);
}

#[test]
fn argmin_invariant_under_objective_scaling() {
    let f = |x: &[f64]| (x[0] - 0.7).powi(2) + (x[1] + 1.3).powi(2) + 0.3 * (2.0 * x[0]).sin();
    for scale in [0.125, 8.0] {
        let base = FnProblem::new(vec![(-3.0, 3.0); 2], f);
        let scaled = FnProblem::new(vec![(-3.0, 3.0); 2], move |x: &[f64]| scale * f(x));
        let config = GaConfig {
            generations: 15,
            ..GaConfig::default()
        };
        assert_eq!(run_ga(&base, &config, 4, &[]).x, run_ga(&scaled, &config, 4, &[]).x);
        let lc = LocalConfig::default();
        assert_eq!(
            run_local(&base, &lc, &[2.0, 2.0]).x,
            run_local(&scaled, &lc, &[2.0, 2.0]).x
        );
    }
}

fn coarse_sim(kind: BackendKind) -> Simulator {
    Simulator::new(HydroBackend::new(kind)).with_grid(FrequencyGrid::uniform(0.2, 2.0, 30).unwrap())
}

fn farm_problem(blocks: &[Block], n: usize, kind: BackendKind) -> FarmProblem {
    let geom = CylinderGeometry::new(3.0, 2.0, 50.0).unwrap();
    let layout = layout_fixture("row", n, Some(30.0)).unwrap();
    let design = FarmDesign::new(geom, PtoParams { b_pto: 1e5, k_pto: 0.0 }, layout).unwrap();
    let climate = Arc::new(synth_site_climate(ClimateProfile::HighEnergy, 7));
    FarmProblem::new(
        VariableSpace::new(blocks, n).unwrap(),
        design,
        WaveObjective::Climate {
            climate,
            p_limit: None,
        },
        coarse_sim(kind),
        DEFAULT_SAFETY_DISTANCE,
    )
    .unwrap()
}

#[test]
fn farm_problem_encode_decode_round_trip() {
    let p = farm_problem(&[Block::Plant, Block::Control, Block::Layout], 3, BackendKind::Pa);
    let x = p.encode(&p.template);
    assert_eq!(x, vec![3.0, 2.0, 0.0, 1e5, 0.0, 0.0, 30.0, -30.0]);
    assert_eq!(p.design(&x).unwrap(), p.template);
    let d = p.decode(&[4.0, 2.0, -1e3, 2e5, 10.0, 20.0, 50.0, -60.0]);
    assert_eq!(d.layout, vec![(0.0, 0.0), (10.0, 50.0), (20.0, -60.0)]);
    assert_eq!(d.pto.k_pto, -1e3);
    assert_eq!(d.draft(), 2.0);
}

#[test]
fn farm_evaluation_is_deterministic_and_flags_violations() {
    let p = farm_problem(&[Block::Plant, Block::Layout], 2, BackendKind::Pa);
    let x = [3.0, 2.0, 20.0, 15.0];
    let a = p.evaluate(&x);
    assert_eq!(a, p.evaluate(&x));
    assert!(a.is_feasible() && a.objective < 0.0);

    let close = p.evaluate(&[3.0, 2.0, 10.0, 0.0]);
    assert!(!close.is_feasible());
    assert!((close.violation() - 6.0).abs() < 1e-12);

    let squat = p.evaluate(&[10.0, 0.2, 100.0, 0.0]);
    assert!((squat.constraints.draft - 30.0).abs() < 1e-9);

    let outside = p.evaluate(&[3.0, 2.0, -50.0, 15.0]);
    assert!(outside.clamped);
}

#[test]
fn isolated_layout_objective_is_flat() {
    let p = farm_problem(&[Block::Layout], 3, BackendKind::Isolated);
    let config = GaConfig {
        population: Some(12),
        generations: 3,
        ..GaConfig::default()
    };
    let r = run_ga(&p, &config, 9, &[]);
    for row in &r.trace {
        assert!(row.spread <= 1e-9 * row.best_objective.abs(), "{row:?}");
    }
    let a = p.evaluate(&[40.0, 80.0, 30.0, -50.0]).objective;
    let b = p.evaluate(&[120.0, 5.0, -100.0, 100.0]).objective;
    assert!((a - b).abs() <= 1e-9 * a.abs());
}

#[test]
fn control_only_regular_wave_matches_impedance_matching() {
    let geom = CylinderGeometry::new(2.0, 1.0, 50.0).unwrap();
    let design = FarmDesign::single(geom, PtoParams { b_pto: 1e5, k_pto: 0.0 });
    let wave = regular_wave(1.0, 6.0).unwrap();
    let sim = coarse_sim(BackendKind::Isolated);
    let p = FarmProblem::new(
        VariableSpace::new(&[Block::Control], 1).unwrap(),
        design.clone(),
        WaveObjective::Regular { wave, p_limit: None },
        sim.clone(),
        DEFAULT_SAFETY_DISTANCE,
    )
    .unwrap();
    let h = sim.hydro_at(&design, wave.omega).unwrap();
    let (a, b) = (h.added_mass[(0, 0)], h.damping[(0, 0)]);
    let bound = crate::dynamics::matched_power_bound(h.excitation[0], b) * wave.amplitude.powi(2);
    let k_opt = wave.omega.powi(2) * (geom.mass() + a) - geom.hydrostatic_stiffness();

    let r = run_local_multistart(&p, &LocalConfig::default(), &p.space.midpoint(), 1);
    let power = -r.evaluation.objective * geom.volume();
    assert!((power / bound - 1.0).abs() < 0.01, "{power} vs {bound}");
    assert!((r.x[1] / b - 1.0).abs() < 0.02, "b_pto {} vs {b}", r.x[1]);
    assert!((r.x[0] / k_opt - 1.0).abs() < 0.02, "k_pto {} vs {k_opt}", r.x[0]);
}

#[test]
fn fixtures_start_at_origin_and_keep_spacing() {
    for name in FIXTURE_NAMES {
        let l = layout_fixture(name, 5, Some(25.0)).unwrap();
        assert_eq!(l[0], (0.0, 0.0));
        assert_eq!(l.len(), 5);
        let r = distance_constraints(&l, 7.0, 10.0);
        assert!(r.total < 1e-9, "{name}: {r:?}");
        assert!(l.iter().all(|p| p.0 >= 0.0), "{name}");
    }
    assert!(matches!(layout_fixture("spiral", 3, None), Err(crate::Error::Config(_))));
}

#[test]
fn wave_spec_round_trip() {
    for s in ["climate", "regular-modal", "regular:2,10", "irregular:1.5,8"] {
        let w: WaveSpec = s.parse().unwrap();
        assert_eq!(w.to_string(), s);
    }
    assert!("regular:2".parse::<WaveSpec>().is_err());
    assert!("regular:-1,3".parse::<WaveSpec>().is_err());
}

#[test]
fn presets_round_trip_through_toml() {
    for name in preset_names() {
        let spec = preset(name).unwrap();
        spec.validate().unwrap();
        let text = spec.to_toml_string();
        let back = StudySpec::from_toml_str(&text).unwrap();
        assert_eq!(back, spec, "{name}\n{text}");
        assert!(!spec.cases().unwrap().is_empty());
    }
    match preset("table9") {
        Err(crate::Error::UnknownPreset { available, .. }) => {
            assert!(available.iter().any(|n| n == "table3-control"))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn study_spec_requires_seed() {
    let text = "solver = \"evaluate\"\nradius = 2.0\nslenderness = 1.0\nb_pto = 1e5\nk_pto = 0.0\n";
    assert!(StudySpec::from_toml_str(text).is_err());
    let ok = StudySpec::from_toml_str(&format!("seed = 3\n{text}")).unwrap();
    assert_eq!(ok.cases().unwrap().len(), 1);
}

#[test]
fn case_expansion_skips_climates_for_regular_waves() {
    let mut spec = preset("table3-control").unwrap();
    assert_eq!(spec.cases().unwrap().len(), 10);
    spec.waves = vec!["regular:2,8".parse().unwrap()];
    let cases = spec.cases().unwrap();
    assert_eq!(cases.len(), 5);
    assert!(cases.iter().all(|c| c.climate.is_none()));
    assert_eq!(cases[4].p_limit, None);
    assert_eq!(cases[0].p_limit, Some(50e3));
}
