//! Experiment configuration: a flat `key=value` file overlaid by flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_SAMPLES_PER_INTERVAL;
use crate::model::OcpDefinition;
use crate::schemes::{Family, HsForm, SchemeId};
use crate::solver::SolveOptions;

/// Every key accepted in a config file or via `--set`.
pub const CONFIG_KEYS: [&str; 18] = [
    "problem",
    "method",
    "methods",
    "hs_form",
    "N",
    "Ns",
    "fair",
    "out",
    "timing",
    "path_at_midpoints",
    "samples_per_interval",
    "grid_per_interval",
    "kkt_tol",
    "max_outer_iters",
    "max_inner_iters",
    "penalty_init",
    "penalty_growth",
    "fd_step",
];

/// A method name as typed by the user: `tz1`, `tz2`, `tzm`, `hs1`, `hs2`, `hsm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub family: Family,
    /// `None` for the `m` variants, which take the problem's order.
    pub order: Option<usize>,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        let family = match s.get(..2) {
            Some("tz") => Family::Trapezoidal,
            Some("hs") => Family::HermiteSimpson,
            _ => return Err(Error::UnknownMethod(s.to_string())),
        };
        let order = match &s[2..] {
            "1" => Some(1),
            "2" => Some(2),
            "m" => None,
            _ => return Err(Error::UnknownMethod(s.to_string())),
        };
        Ok(Method { family, order })
    }

    pub fn name(&self) -> String {
        let prefix = match self.family {
            Family::Trapezoidal => "tz",
            Family::HermiteSimpson => "hs",
        };
        match self.order {
            Some(m) => format!("{prefix}{m}"),
            None => format!("{prefix}m"),
        }
    }

    pub fn scheme(&self, ocp: &OcpDefinition, form: HsForm) -> SchemeId {
        let order = self.order.unwrap_or(ocp.order());
        match self.family {
            Family::Trapezoidal => SchemeId::trapezoidal(order),
            Family::HermiteSimpson => SchemeId::hermite_simpson(order, form),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: Method,
    /// Method list for `compare` and `convergence`.
    pub methods: Vec<Method>,
    pub hs_form: HsForm,
    pub n: usize,
    /// Interval counts for `convergence`.
    pub n_list: Vec<usize>,
    /// Run trapezoidal methods at twice `n` so collocation-point counts match.
    pub fair: bool,
    pub out: PathBuf,
    /// Record wall times; off makes every artifact reproducible byte for byte.
    pub timing: bool,
    pub path_at_midpoints: bool,
    pub samples_per_interval: usize,
    /// Rows per interval in `trajectory.csv`.
    pub grid_per_interval: usize,
    pub solver: SolveOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "cartpole".into(),
            method: Method {
                family: Family::HermiteSimpson,
                order: Some(2),
            },
            methods: Vec::new(),
            hs_form: HsForm::Separated,
            n: 25,
            n_list: Vec::new(),
            fair: false,
            out: PathBuf::from("out"),
            timing: true,
            path_at_midpoints: false,
            samples_per_interval: DEFAULT_SAMPLES_PER_INTERVAL,
            grid_per_interval: 10,
            solver: SolveOptions::default(),
        }
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected on/off, got `{v}`"))),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentConfig {
    /// Builds a config from defaults overlaid with `map`.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (k, v) in map {
            let v = v.as_str();
            match k.as_str() {
                "problem" => c.problem = v.to_string(),
                "method" => c.method = Method::parse(v)?,
                "methods" => c.methods = list(v).map(Method::parse).collect::<Result<_>>()?,
                "hs_form" => {
                    c.hs_form = match v {
                        "separated" => HsForm::Separated,
                        "compressed" => HsForm::Compressed,
                        _ => return Err(Error::Config(format!("unknown hs_form `{v}`"))),
                    }
                }
                "N" => c.n = num(k, v)?,
                "Ns" => c.n_list = list(v).map(|s| num(k, s)).collect::<Result<_>>()?,
                "fair" => c.fair = flag(k, v)?,
                "out" => c.out = PathBuf::from(v),
                "timing" => c.timing = flag(k, v)?,
                "path_at_midpoints" => c.path_at_midpoints = flag(k, v)?,
                "samples_per_interval" => c.samples_per_interval = num(k, v)?,
                "grid_per_interval" => c.grid_per_interval = num(k, v)?,
                "kkt_tol" => c.solver.kkt_tol = num(k, v)?,
                "max_outer_iters" => c.solver.max_outer_iters = num(k, v)?,
                "max_inner_iters" => c.solver.max_inner_iters = num(k, v)?,
                "penalty_init" => c.solver.penalty_init = num(k, v)?,
                "penalty_growth" => c.solver.penalty_growth = num(k, v)?,
                "fd_step" => c.solver.fd_step = num(k, v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_list.contains(&0) {
            return Err(Error::Config("N must be positive".into()));
        }
        if self.grid_per_interval == 0 {
            return Err(Error::Config("grid_per_interval must be positive".into()));
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Methods for multi-method commands, falling back to `method`.
    pub fn method_list(&self) -> Vec<Method> {
        if self.methods.is_empty() {
            vec![self.method]
        } else {
            self.methods.clone()
        }
    }

    /// Interval count for `method`, doubled for trapezoidal methods in fair mode.
    pub fn n_for(&self, method: Method, n: usize) -> usize {
        if self.fair && method.family == Family::Trapezoidal {
            2 * n
        } else {
            n
        }
    }

    /// Flat key=value rendering, sorted by key; parses back to `self`.
    pub fn to_kv(&self) -> String {
        let s = &self.solver;
        let join = |v: Vec<String>| v.join(",");
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        let mut map = BTreeMap::new();
        map.insert("problem", self.problem.clone());
        map.insert("method", self.method.name());
        map.insert("methods", join(self.methods.iter().map(Method::name).collect()));
        map.insert(
            "hs_form",
            match self.hs_form {
                HsForm::Separated => "separated",
                HsForm::Compressed => "compressed",
            }
            .to_string(),
        );
        map.insert("N", self.n.to_string());
        map.insert("Ns", join(self.n_list.iter().map(|n| n.to_string()).collect()));
        map.insert("fair", onoff(self.fair));
        map.insert("out", self.out.display().to_string());
        map.insert("timing", onoff(self.timing));
        map.insert("path_at_midpoints", onoff(self.path_at_midpoints));
        map.insert("samples_per_interval", self.samples_per_interval.to_string());
        map.insert("grid_per_interval", self.grid_per_interval.to_string());
        map.insert("kkt_tol", format!("{:e}", s.kkt_tol));
        map.insert("max_outer_iters", s.max_outer_iters.to_string());
        map.insert("max_inner_iters", s.max_inner_iters.to_string());
        map.insert("penalty_init", format!("{:e}", s.penalty_init));
        map.insert("penalty_growth", format!("{:e}", s.penalty_growth));
        map.insert("fd_step", format!("{:e}", s.fd_step));
        map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
