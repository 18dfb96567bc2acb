use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use wecfarm::climate::{
    load_site_climate, synth_site_climate, write_site_climate, ClimateProfile, FrequencyGrid,
    SiteClimate,
};
use wecfarm::dynamics::{FarmDesign, PtoParams, Simulator};
use wecfarm::hydro::{CoefficientCache, CylinderGeometry};
use wecfarm::optimize::{
    design_constraints, run_study, write_bundle, CaseMetrics, ConstraintReport, SolverKind,
    StudyResult, StudySpec, WaveSpec,
};

use crate::failure::{CliResult, Failure};
use crate::manifest::{digest, Manifest, FILE_NAME};
use crate::resolve::{resolve, Resolved};
use crate::{SiteArgs, StudyArgs};

const CACHE_FILE: &str = "coefficients.cache";

pub struct Output {
    pub quiet: bool,
}

impl Output {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn refuse_overwrite(path: &Path, force: bool) -> CliResult {
    if path.exists() && !force {
        return Err(Failure::invalid(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Creates `dir`, refusing a non-empty one without `force`.
fn prepare_dir(dir: &Path, force: bool) -> CliResult {
    let occupied = fs::read_dir(dir).is_ok_and(|mut it| it.next().is_some());
    if occupied && !force {
        return Err(Failure::invalid(format!(
            "output directory {} is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn out_dir(args: &StudyArgs) -> CliResult<PathBuf> {
    args.out
        .clone()
        .ok_or_else(|| Failure::invalid("--out DIR is required"))
}

fn summarize_climate(c: &SiteClimate, out: &Output) {
    let axes = c.axes();
    out.say(format!(
        "site {}: {} years on a {} x {} (Hs x Tp) grid",
        c.site_id,
        c.n_yr(),
        axes.hs.len(),
        axes.tp.len()
    ));
    out.say(format!(
        "mean Hs {:.3} m, mean Tp {:.3} s, mean energy flux {:.2} kW/m",
        c.mean_hs(),
        c.mean_tp(),
        c.mean_energy_flux() / 1e3
    ));
    out.say("year,mean_hs_m,mean_tp_s,energy_flux_kW_per_m,prob_sum");
    for y in &c.years {
        let total = y.total_probability();
        let hs: f64 = y.bins.iter().map(|b| b.prob * b.hs).sum::<f64>() / total;
        let tp: f64 = y.bins.iter().map(|b| b.prob * b.tp).sum::<f64>() / total;
        out.say(format!(
            "{},{:.4},{:.4},{:.4},{:.9}",
            y.year,
            hs,
            tp,
            SiteClimate::energy_flux(y) / 1e3,
            total
        ));
    }
}

pub fn site(args: &SiteArgs, out: &Output) -> CliResult {
    match (&args.synth, &args.check) {
        (Some(profile), None) => {
            let profile: ClimateProfile = profile.parse()?;
            let path = args
                .out
                .clone()
                .ok_or_else(|| Failure::invalid("--synth needs -o FILE"))?;
            refuse_overwrite(&path, args.force)?;
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let climate = synth_site_climate(profile, args.seed);
            write_site_climate(&climate, fs::File::create(&path)?)?;
            let config = format!("profile = \"{}\"\nseed = {}\n", profile.label(), args.seed);
            let mut manifest = Manifest::new("site", args.seed, config);
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            manifest.outputs.push(digest(&path, name)?);
            manifest.write(&path.with_extension("manifest.json"))?;
            summarize_climate(&climate, out);
            out.say(format!("wrote {}", path.display()));
            Ok(())
        }
        (None, Some(path)) => {
            let file = fs::File::open(path)
                .map_err(|e| Failure::invalid(format!("cannot open {}: {e}", path.display())))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let climate = load_site_climate(name, std::io::BufReader::new(file))?;
            summarize_climate(&climate, out);
            out.say(format!("{}: every year normalizes to 1 within 1e-6", path.display()));
            Ok(())
        }
        _ => Err(Failure::invalid("site needs --synth PROFILE or --check FILE")),
    }
}

fn resolve_for(args: &StudyArgs, command: &str, default: impl FnOnce() -> StudySpec) -> CliResult<Option<Resolved>> {
    let resolved = resolve(args, command, std::env::vars(), default)?;
    if args.print_spec {
        print!("{}", resolved.spec.to_toml_string());
        return Ok(None);
    }
    Ok(Some(resolved))
}

fn open_cache(args: &StudyArgs, dir: &Path) -> CliResult<(Arc<CoefficientCache>, PathBuf)> {
    let path = args.cache.clone().unwrap_or_else(|| dir.join(CACHE_FILE));
    Ok((Arc::new(CoefficientCache::load_or_default(&path)?), path))
}

/// Writes `manifest.json` with digests of `files` (relative to `dir`).
fn finish_manifest(command: &str, resolved: &Resolved, dir: &Path, files: &[String]) -> CliResult {
    let mut manifest = Manifest::new(command, resolved.spec.seed, resolved.spec.to_toml_string());
    manifest.inputs = resolved.inputs.clone();
    for f in files {
        manifest.outputs.push(digest(&dir.join(f), f.clone())?);
    }
    manifest.write(&dir.join(FILE_NAME))
}

fn simulator(spec: &StudySpec) -> CliResult<Simulator> {
    let grid = FrequencyGrid::uniform(spec.grid.omega_min, spec.grid.omega_max, spec.grid.n_omega)?;
    let mut sim = Simulator::new(spec.backend()).with_grid(grid);
    sim.heading = spec.heading;
    Ok(sim)
}

fn default_single() -> StudySpec {
    StudySpec::base(SolverKind::Evaluate, 0)
}

pub fn hydro(args: &StudyArgs, out: &Output) -> CliResult {
    let Some(resolved) = resolve_for(args, "hydro", default_single)? else {
        return Ok(());
    };
    let spec = &resolved.spec;
    let dir = out_dir(args)?;
    prepare_dir(&dir, args.force)?;
    let case = spec.cases()?.into_iter().next().expect("at least one case");
    let geom = CylinderGeometry::new(case.radius, case.slenderness, spec.depth)?;
    let design = FarmDesign::new(
        geom,
        PtoParams {
            b_pto: case.b_pto,
            k_pto: case.k_pto,
        },
        case.layout,
    )?;
    let (cache, cache_path) = open_cache(args, &dir)?;
    let sim = simulator(spec)?.with_cache(cache.clone());

    let mut text = String::from("omega,body_p,body_q,A_pq,B_pq,ReX_p,ImX_p\n");
    for &w in sim.grid.omegas() {
        let set = sim.hydro_at(&design, w)?;
        for p in 0..set.len() {
            for q in 0..set.len() {
                text.push_str(&format!(
                    "{w},{p},{q},{},{},{},{}\n",
                    set.added_mass[(p, q)],
                    set.damping[(p, q)],
                    set.excitation[p].re,
                    set.excitation[p].im
                ));
            }
        }
    }
    fs::write(dir.join("hydro.csv"), text)?;
    cache.save(&cache_path)?;
    finish_manifest("hydro", &resolved, &dir, &["hydro.csv".to_string()])?;
    out.say(format!(
        "wrote {} ({} bodies, {} frequencies, backend {})",
        dir.join("hydro.csv").display(),
        design.n_wec(),
        sim.grid.len(),
        spec.backend
    ));
    Ok(())
}

fn describe_violations(label: &str, c: &ConstraintReport) -> String {
    let mut parts: Vec<String> = c
        .pairs
        .iter()
        .map(|v| {
            format!(
                "bodies {} and {} are {:.3} m apart ({:.3} m short)",
                v.p + 1,
                v.q + 1,
                v.distance,
                v.violation
            )
        })
        .collect();
    if c.draft > 0.0 {
        parts.push(format!("draft outside bounds by {:.3} m", c.draft));
    }
    format!("case {label}: {}", parts.join("; "))
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    label: &'a str,
    climate: Option<&'a str>,
    wave: WaveSpec,
    p_limit: Option<f64>,
    metrics: &'a CaseMetrics,
}

fn print_metrics(label: &str, m: &CaseMetrics, out: &Output) {
    let nat = m
        .natural_frequency
        .map_or("none".to_string(), |w| format!("{w:.4} rad/s"));
    out.say(format!(
        "{label}: P = {:.6e} W, p_v = {:.6e} W/m^3, q = {:.6}, omega_n = {nat}",
        m.farm_power, m.p_v, m.q_factor
    ));
    if let Some(cf) = m.capacity_factor {
        out.say(format!("{label}: capacity factor {cf:.4}"));
    }
    for w in &m.warnings {
        out.say(format!("{label}: warning: {w}"));
    }
}

pub fn simulate(args: &StudyArgs, out: &Output) -> CliResult {
    let Some(resolved) = resolve_for(args, "simulate", default_single)? else {
        return Ok(());
    };
    let spec = &resolved.spec;
    let cases = spec.cases()?;
    let mut violations = Vec::new();
    for case in &cases {
        let draft = case.radius / case.slenderness;
        let c = design_constraints(&case.layout, case.radius, draft, spec.safety_distance);
        if !c.is_feasible() {
            violations.push(describe_violations(&case.label, &c));
        }
    }
    if !violations.is_empty() {
        return Err(Failure::infeasible(format!(
            "infeasible design (need spacing >= 2R + {} m and draft in [0.5, 20] m):\n  {}",
            spec.safety_distance,
            violations.join("\n  ")
        )));
    }
    let dir = out_dir(args)?;
    prepare_dir(&dir, args.force)?;
    let (cache, cache_path) = open_cache(args, &dir)?;
    let result = run_study(spec, Some(cache.clone()))?;
    cache.save(&cache_path)?;

    let mut entries = Vec::new();
    for c in &result.cases {
        let m = c
            .metrics
            .as_ref()
            .ok_or_else(|| Failure::solver(format!("case {}: evaluation failed", c.case.label)))?;
        entries.push(ReportEntry {
            label: &c.case.label,
            climate: c.case.climate.as_deref(),
            wave: c.case.wave,
            p_limit: c.case.p_limit,
            metrics: m,
        });
        print_metrics(&c.case.label, m, out);
    }
    let mut files = write_bundle(&result, &dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&entries).expect("report serializes") + "\n",
    )?;
    files.push("report.json".into());
    files.sort();
    finish_manifest("simulate", &resolved, &dir, &files)?;
    out.say(format!("wrote {}", dir.display()));
    Ok(())
}

fn print_study(result: &StudyResult, out: &Output) {
    for (i, c) in result.cases.iter().enumerate() {
        let status = if c.feasible { "feasible" } else { "INFEASIBLE" };
        let mut line = format!("case {i} [{}]: {status}", c.case.label);
        if let Some(m) = &c.metrics {
            line.push_str(&format!(
                ", P = {:.6e} W, p_v = {:.6e} W/m^3, q = {:.6}",
                m.farm_power, m.p_v, m.q_factor
            ));
        }
        if let Some(s) = &c.sweep {
            line.push_str(&format!(
                ", q in [{:.4}, {:.4}], peak-to-trough {:.4}",
                s.q_min, s.q_max, s.q_peak_to_trough
            ));
            if let (Some(l), Some(p)) = (s.wavelength, s.radial_period) {
                line.push_str(&format!(", radial period {p:.2} m vs wavelength {l:.2} m"));
            }
        }
        out.say(line);
        if let Some(o) = &c.optimization {
            let vars: Vec<String> = o
                .names
                .iter()
                .zip(&o.x)
                .map(|(n, v)| format!("{n} = {v:.6}"))
                .collect();
            out.say(format!("  {} ({} evaluations): {}", o.solver, o.evaluations, vars.join(", ")));
            if let Some(f) = &o.evaluation.failure {
                out.say(format!("  failure: {f}"));
            }
        }
        if !c.active_bounds.is_empty() {
            out.say(format!("  at bounds: {}", c.active_bounds.join(", ")));
        }
        if !c.feasible && !c.constraints.is_feasible() {
            out.say(format!("  {}", describe_violations(&c.case.label, &c.constraints)));
        }
    }
    if result.truncated {
        out.say("evaluation budget exhausted: results are partial (truncated = true)");
    }
}

fn run_and_write(args: &StudyArgs, command: &str, out: &Output) -> CliResult {
    if command == "optimize" && args.config.is_none() && args.preset.is_none() {
        return Err(Failure::invalid("optimize needs --config or --preset"));
    }
    let Some(resolved) = resolve_for(args, command, || StudySpec::base(SolverKind::Sweep, 0))? else {
        return Ok(());
    };
    let dir = out_dir(args)?;
    prepare_dir(&dir, args.force)?;
    let (cache, cache_path) = open_cache(args, &dir)?;
    let result = run_study(&resolved.spec, Some(cache.clone()))?;
    cache.save(&cache_path)?;
    let mut files = write_bundle(&result, &dir)?;
    files.sort();
    finish_manifest(command, &resolved, &dir, &files)?;
    print_study(&result, out);
    out.say(format!("wrote {}", dir.display()));
    std::io::stdout().flush()?;

    let failed = result.cases.iter().find_map(|c| {
        c.optimization
            .as_ref()
            .and_then(|o| o.evaluation.failure.as_ref())
            .map(|f| format!("case {}: {f}", c.case.label))
    });
    if let Some(f) = failed {
        return Err(Failure::solver(f));
    }
    if !result.feasible {
        return Err(Failure::infeasible("no feasible design found for every case"));
    }
    Ok(())
}

pub fn optimize(args: &StudyArgs, out: &Output) -> CliResult {
    run_and_write(args, "optimize", out)
}

pub fn sweep(args: &StudyArgs, out: &Output) -> CliResult {
    run_and_write(args, "sweep", out)
}
