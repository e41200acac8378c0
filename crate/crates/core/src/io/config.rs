//! Flat `key = value` run configuration.
//!
//! ```text
//! # minimize risk at fixed revenue
//! scenarios = portfolio.csv
//! objective = min_risk
//! constraints = revenue
//! kappa = extremum
//! fixed_revenue = true
//! returns = 0.05
//! delta_c = 1e-4
//! total_cost = 0.1
//! output = path.csv
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::continuation::{ContinuationConfig, KappaPolicy};
use crate::error::{Error, Result};
use crate::projection::{ConstraintMode, ObjectiveKind, PathParams, SecondConstraint};

/// A per-group vector given either as one broadcast value or one value per group.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupValues {
    Uniform(f64),
    PerGroup(Vec<f64>),
}

impl GroupValues {
    pub fn resolve(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            GroupValues::Uniform(v) => Ok(vec![*v; n]),
            GroupValues::PerGroup(v) if v.len() == n => Ok(v.clone()),
            GroupValues::PerGroup(v) => Err(Error::Config(format!(
                "{what} has {} entries for {n} groups",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenarios: PathBuf,
    pub continuation: ContinuationConfig,
    pub returns: GroupValues,
    pub costs: GroupValues,
    pub output: PathBuf,
    pub weights_output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "scenarios",
    "objective",
    "constraints",
    "kappa",
    "kappa1",
    "kappa2",
    "fixed_revenue",
    "fixed_second",
    "beta",
    "delta_c",
    "total_cost",
    "max_steps",
    "clamp",
    "fixed_total_risk",
    "steady_state_tol",
    "steady_state_window",
    "returns",
    "costs",
    "output",
    "weights_output",
];

const REQUIRED: &[&str] = &["scenarios", "objective", "constraints", "returns"];

pub fn parse_objective(s: &str) -> Result<ObjectiveKind> {
    match s {
        "min_risk" => Ok(ObjectiveKind::MinRisk),
        "max_return" => Ok(ObjectiveKind::MaxReturn),
        "max_re2ri" => Ok(ObjectiveKind::MaxReturnToRisk),
        "min_di" => Ok(ObjectiveKind::MinDiversification),
        other => Err(Error::Config(format!(
            "unknown objective {other:?} (min_risk, max_return, max_re2ri, min_di)"
        ))),
    }
}

pub fn parse_constraints(s: &str) -> Result<ConstraintMode> {
    match s {
        "both_return" => Ok(ConstraintMode::Both(SecondConstraint::Return)),
        "both_risk" => Ok(ConstraintMode::Both(SecondConstraint::Risk)),
        "revenue" => Ok(ConstraintMode::RevenueOnly),
        "return" => Ok(ConstraintMode::SecondOnly(SecondConstraint::Return)),
        "risk" => Ok(ConstraintMode::SecondOnly(SecondConstraint::Risk)),
        "none" => Ok(ConstraintMode::NoneActive),
        other => Err(Error::Config(format!(
            "unknown constraints {other:?} (both_return, both_risk, revenue, return, risk, none)"
        ))),
    }
}

fn number(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {value:?}")))
}

fn count(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn group_values(key: &str, value: &str) -> Result<GroupValues> {
    let items = value
        .split(',')
        .map(|v| number(key, v.trim()))
        .collect::<Result<Vec<_>>>()?;
    Ok(match items.as_slice() {
        [single] => GroupValues::Uniform(*single),
        _ => GroupValues::PerGroup(items),
    })
}

/// Parses config text; `base_dir` anchors relative paths.
pub fn parse_run_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unknown key {key:?}"),
            });
        }
        if entries.insert(key, value).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate key {key:?}"),
            });
        }
    }
    if let Some(missing) = REQUIRED.iter().find(|k| !entries.contains_key(*k)) {
        return Err(Error::Config(format!("missing required key {missing:?}")));
    }

    let get = |k: &str| entries.get(k).copied();
    let objective = parse_objective(entries["objective"])?;
    let mode = parse_constraints(entries["constraints"])?;
    let kappa_policy = match get("kappa").unwrap_or("fixed") {
        "fixed" => {
            let k1 = get("kappa1").map(|v| number("kappa1", v)).transpose()?.unwrap_or(0.0);
            let k2 = get("kappa2").map(|v| number("kappa2", v)).transpose()?.unwrap_or(0.0);
            KappaPolicy::Fixed(PathParams::new(k1, k2))
        }
        "extremum" => {
            if get("kappa1").is_some() || get("kappa2").is_some() {
                return Err(Error::Config("kappa1/kappa2 only apply with kappa = fixed".into()));
            }
            KappaPolicy::Extremum {
                fixed_revenue: get("fixed_revenue").map(|v| flag("fixed_revenue", v)).transpose()?.unwrap_or(false),
                fixed_second: get("fixed_second").map(|v| flag("fixed_second", v)).transpose()?.unwrap_or(false),
            }
        }
        other => return Err(Error::Config(format!("kappa: expected fixed or extremum, got {other:?}"))),
    };
    if matches!(kappa_policy, KappaPolicy::Fixed(_))
        && (get("fixed_revenue").is_some() || get("fixed_second").is_some())
    {
        return Err(Error::Config("fixed_revenue/fixed_second only apply with kappa = extremum".into()));
    }

    let mut continuation = ContinuationConfig::new(objective, mode, kappa_policy);
    if let Some(v) = get("beta") {
        continuation.beta = number("beta", v)?;
    }
    if let Some(v) = get("delta_c") {
        continuation.delta_c = number("delta_c", v)?;
    }
    if let Some(v) = get("total_cost") {
        continuation.total_cost = number("total_cost", v)?;
    }
    if let Some(v) = get("max_steps") {
        continuation.max_steps = Some(count("max_steps", v)?);
    }
    if let Some(v) = get("clamp") {
        continuation.clamp_nonnegative = flag("clamp", v)?;
    }
    if let Some(v) = get("fixed_total_risk") {
        continuation.fixed_total_risk = flag("fixed_total_risk", v)?;
    }
    if let Some(v) = get("steady_state_tol") {
        continuation.steady_state_tol = number("steady_state_tol", v)?;
    }
    if let Some(v) = get("steady_state_window") {
        continuation.steady_state_window = count("steady_state_window", v)?;
    }
    continuation.validate()?;

    let costs = match get("costs") {
        Some(v) => group_values("costs", v)?,
        None => GroupValues::Uniform(1.0),
    };
    let resolve = |p: &str| base_dir.join(p);
    Ok(RunConfig {
        scenarios: resolve(entries["scenarios"]),
        continuation,
        returns: group_values("returns", entries["returns"])?,
        costs,
        output: resolve(get("output").unwrap_or("path.csv")),
        weights_output: get("weights_output").map(resolve),
    })
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_run_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "scenarios = s.csv\nobjective = min_risk\nconstraints = revenue\nreturns = 0.05\n";

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_run_config(BASE, Path::new("/data")).unwrap();
        assert_eq!(cfg.scenarios, PathBuf::from("/data/s.csv"));
        assert_eq!(cfg.costs, GroupValues::Uniform(1.0));
        assert_eq!(cfg.output, PathBuf::from("/data/path.csv"));
        assert_eq!(cfg.continuation.beta, 0.95);
        assert_eq!(cfg.continuation.kappa_policy, KappaPolicy::Fixed(PathParams::default()));
        assert!(cfg.continuation.clamp_nonnegative);
    }

    #[test]
    fn full_config() {
        let text = format!(
            "{BASE}# comment\nkappa = extremum\nfixed_revenue = true\nbeta=0.99\ndelta_c=1e-3\ntotal_cost=0.05\ncosts=1,2,3\nmax_steps=10\nweights_output=w.csv\n"
        );
        let cfg = parse_run_config(&text, Path::new("")).unwrap();
        assert_eq!(
            cfg.continuation.kappa_policy,
            KappaPolicy::Extremum { fixed_revenue: true, fixed_second: false }
        );
        assert_eq!(cfg.costs, GroupValues::PerGroup(vec![1.0, 2.0, 3.0]));
        assert_eq!(cfg.continuation.steps(), 10);
        assert_eq!(cfg.weights_output, Some(PathBuf::from("w.csv")));
        assert!(cfg.costs.resolve(2, "costs").is_err());
    }

    #[test]
    fn rejections() {
        let unknown = parse_run_config(&format!("{BASE}colour = red\n"), Path::new("")).unwrap_err();
        assert_eq!(unknown, Error::Parse { line: 5, message: "unknown key \"colour\"".into() });
        assert!(parse_run_config("objective = min_risk\n", Path::new("")).is_err());
        assert!(parse_run_config(&format!("{BASE}beta = 1.5\n"), Path::new("")).is_err());
        assert!(parse_run_config(&format!("{BASE}returns = 1\n"), Path::new("")).is_err());
        assert!(parse_run_config(&format!("{BASE}fixed_revenue = true\n"), Path::new("")).is_err());
        assert!(parse_run_config(&BASE.replace("revenue", "risk"), Path::new("")).is_err());
        assert!(parse_run_config("just text\n", Path::new("")).is_err());
    }
}
