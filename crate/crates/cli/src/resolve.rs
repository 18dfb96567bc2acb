//! Turns command-line arguments into a validated study spec.
//!
//! Precedence, lowest first: preset or config file, `WECFARM_*`
//! environment variables, `--set KEY=VALUE`, then the typed flags.

use std::fs;
use std::path::Path;

use toml::{Table, Value};
use wecfarm::optimize::{preset, ClimateSource, SolverKind, StudySpec, SweepSpec};

use crate::failure::{CliResult, Failure};
use crate::manifest::{digest, FileDigest, Manifest};
use crate::StudyArgs;

pub const ENV_PREFIX: &str = "WECFARM_";

pub struct Resolved {
    pub spec: StudySpec,
    /// Digests of the climate files the spec reads.
    pub inputs: Vec<FileDigest>,
}

/// Parses a single TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> CliResult {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Failure::invalid(format!("'{key}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `KEY=VALUE` with a dotted key.
fn apply_assignment(table: &mut Table, assignment: &str) -> CliResult {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::invalid(format!("expected KEY=VALUE, got '{assignment}'")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Failure::invalid(format!("bad key '{key}'")));
    }
    set_path(table, &path, parse_value(raw.trim()))
}

/// `WECFARM_GA__GENERATIONS=10` sets `ga.generations = 10`.
pub fn apply_env(table: &mut Table, vars: impl IntoIterator<Item = (String, String)>) -> CliResult {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.len() > ENV_PREFIX.len())
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let key = key[ENV_PREFIX.len()..].to_ascii_lowercase();
        let path: Vec<&str> = key.split("__").collect();
        set_path(table, &path, parse_value(&raw))?;
    }
    Ok(())
}

pub fn parse_p_limit(raw: &str) -> CliResult<f64> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "none" | "inf" | "infinity" => Ok(f64::INFINITY),
        s => match s.parse::<f64>() {
            Ok(v) if v >= 0.0 => Ok(v),
            _ => Err(Failure::invalid(format!("bad --p-limit '{raw}' (watts >= 0 or 'none')"))),
        },
    }
}

fn base_table(args: &StudyArgs, command: &str, default: impl FnOnce() -> StudySpec) -> CliResult<Table> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) if path.extension().is_some_and(|e| e == "json") => {
            let m = Manifest::read(path)?;
            if m.command != command {
                return Err(Failure::invalid(format!(
                    "manifest was written by '{}', not '{command}'",
                    m.command
                )));
            }
            m.verify_inputs()?;
            m.config
        }
        (Some(path), _) => fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => preset(name)?.to_toml_string(),
        (None, None) => default().to_toml_string(),
    };
    toml::from_str(&text).map_err(|e| Failure::invalid(format!("config: {e}")))
}

fn climate_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "site".into())
}

/// Builds the spec for `command`. `default` supplies the spec when neither
/// a config nor a preset is given.
pub fn resolve(
    args: &StudyArgs,
    command: &str,
    env: impl IntoIterator<Item = (String, String)>,
    default: impl FnOnce() -> StudySpec,
) -> CliResult<Resolved> {
    let mut table = base_table(args, command, default)?;
    apply_env(&mut table, env)?;
    for a in &args.set {
        apply_assignment(&mut table, a)?;
    }
    let mut spec: StudySpec = Value::Table(table)
        .try_into()
        .map_err(|e| Failure::invalid(format!("config: {e}")))?;

    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(b) = args.backend {
        spec.backend = b;
    }
    if let Some(p) = &args.p_limit {
        spec.p_limits = vec![parse_p_limit(p)?];
    }
    if let Some(w) = args.wave {
        spec.waves = vec![w];
    }
    if !args.climate.is_empty() {
        let mut sources = Vec::new();
        for path in &args.climate {
            let abs = fs::canonicalize(path)
                .map_err(|e| Failure::invalid(format!("climate {}: {e}", path.display())))?;
            sources.push(ClimateSource::file(climate_name(path), abs));
        }
        spec.override_climates(sources);
    }
    match command {
        "simulate" | "hydro" => spec.solver = SolverKind::Evaluate,
        "sweep" => {
            spec.solver = SolverKind::Sweep;
            if spec.sweep.is_none() {
                spec.sweep = Some(SweepSpec::default());
            }
            if spec.n_wec < 2 {
                spec.n_wec = 2;
            }
        }
        _ => {}
    }
    spec.validate()?;

    let mut inputs = Vec::new();
    for c in &spec.climates {
        if let Some(path) = &c.path {
            inputs.push(digest(path, path.display().to_string())?);
        }
    }
    Ok(Resolved { spec, inputs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn assignments_create_nested_tables() {
        let mut t = table("seed = 1");
        apply_assignment(&mut t, "ga.generations=7").unwrap();
        apply_assignment(&mut t, "backend = ms").unwrap();
        apply_assignment(&mut t, "p_limits=[1e3, inf]").unwrap();
        assert_eq!(t["ga"]["generations"].as_integer(), Some(7));
        assert_eq!(t["backend"].as_str(), Some("ms"));
        assert_eq!(t["p_limits"].as_array().unwrap().len(), 2);
        assert!(apply_assignment(&mut t, "novalue").is_err());
        assert!(apply_assignment(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn environment_overrides_use_double_underscores() {
        let mut t = table("seed = 1");
        let vars = vec![
            ("WECFARM_SEED".to_string(), "9".to_string()),
            ("WECFARM_LOCAL__STARTS".to_string(), "2".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        apply_env(&mut t, vars).unwrap();
        assert_eq!(t["seed"].as_integer(), Some(9));
        assert_eq!(t["local"]["starts"].as_integer(), Some(2));
        assert!(!t.contains_key("home"));
    }

    #[test]
    fn p_limit_parsing() {
        assert_eq!(parse_p_limit("150e3").unwrap(), 150e3);
        assert!(parse_p_limit("none").unwrap().is_infinite());
        assert!(parse_p_limit("-1").is_err());
        assert!(parse_p_limit("lots").is_err());
    }
}
