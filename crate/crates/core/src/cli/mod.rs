//! Command-line front end: solve, compare and convergence experiments.
//!
//! Each command writes its artifacts below the configured output directory
//! and reports whether every solve converged, which the binary maps to its
//! exit code.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::metrics::{fmt_f64, integrate_errors, ErrorReport};
use crate::problems::by_name;
use crate::schemes::{Family, HsForm, PolyTrajectory};
use crate::solver::{solve, Solution, SolveStatus};
use crate::transcribe::{transcribe_with, Mesh, Nlp, NlpSizes, TranscribeOptions};

pub use config::{parse_kv, ExperimentConfig, Method, CONFIG_KEYS};

#[derive(Debug, Parser)]
#[command(name = "colloc", version, about = "Direct collocation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem with one method and write its artifacts.
    Solve(CommonArgs),
    /// Solve with several methods and tabulate their dynamic errors.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated methods, at least two.
        #[arg(long)]
        methods: Option<String>,
        /// Run trapezoidal methods at 2N to match collocation-point counts.
        #[arg(long)]
        fair: bool,
    },
    /// Solve over a list of interval counts and tabulate error integrals.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated interval counts, at least three.
        #[arg(long = "Ns", visible_alias = "ns")]
        n_list: Option<String>,
        /// Comma-separated methods; defaults to `--method`.
        #[arg(long)]
        methods: Option<String>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key=value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    /// tz1, tz2, tzm, hs1, hs2 or hsm.
    #[arg(long)]
    pub method: Option<String>,
    /// separated or compressed.
    #[arg(long)]
    pub hs_form: Option<String>,
    /// Number of mesh intervals.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// on or off; off writes null wall times so artifacts are reproducible.
    #[arg(long)]
    pub timing: Option<String>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl CommonArgs {
    fn overlay(&self, extra: &[(&str, Option<String>)]) -> Result<ExperimentConfig> {
        let mut map = match &self.config {
            Some(path) => parse_kv(&fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let flags = [
            ("problem", self.problem.clone()),
            ("method", self.method.clone()),
            ("hs_form", self.hs_form.clone()),
            ("N", self.n.map(|n| n.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("timing", self.timing.clone()),
        ];
        for (k, v) in flags.iter().chain(extra) {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        ExperimentConfig::from_map(&map)
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub all_converged: bool,
    pub files: Vec<PathBuf>,
}

/// Parses arguments, runs the command and returns its outcome.
pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve(common) => cmd_solve(&common.overlay(&[])?),
        Command::Compare {
            common,
            methods,
            fair,
        } => {
            let fair = fair.then(|| "on".to_string());
            cmd_compare(&common.overlay(&[("methods", methods.clone()), ("fair", fair)])?)
        }
        Command::Convergence {
            common,
            n_list,
            methods,
        } => cmd_convergence(&common.overlay(&[("Ns", n_list.clone()), ("methods", methods.clone())])?),
    }
}

/// One solved cell of an experiment.
struct Cell {
    method: Method,
    nlp: Nlp,
    solution: Solution,
    traj: PolyTrajectory,
    errors: ErrorReport,
    wall_time: Option<f64>,
}

fn solve_cell(cfg: &ExperimentConfig, method: Method, n: usize) -> Result<Cell> {
    let bench = by_name(&cfg.problem)?;
    let scheme = method.scheme(&bench.ocp, cfg.hs_form);
    let mesh = Mesh::new(n, bench.ocp.t_f())?;
    let opts = TranscribeOptions {
        path_at_midpoints: cfg.path_at_midpoints,
    };
    let nlp = transcribe_with(&bench.ocp, scheme, mesh, opts)?;
    check_sizes(&nlp)?;
    let guess = nlp.assemble_initial_guess(&bench.guess)?;
    let start = Instant::now();
    let solution = solve(&nlp, &guess, &cfg.solver)?;
    let elapsed = start.elapsed().as_secs_f64();
    let traj = nlp.trajectory(&solution.x)?;
    let errors = integrate_errors(&traj, nlp.ocp(), cfg.samples_per_interval)?;
    Ok(Cell {
        method,
        nlp,
        solution,
        traj,
        errors,
        wall_time: cfg.timing.then_some(elapsed),
    })
}

/// Cross-checks the transcription's sizes against the closed-form counts.
fn check_sizes(nlp: &Nlp) -> Result<()> {
    let ocp = nlp.ocp();
    let (n, n_x, n_u) = (nlp.mesh().n_intervals(), ocp.n_x(), ocp.n_u());
    let s = nlp.sizes();
    let (n_vars, n_col, controls) = match (nlp.scheme().family, nlp.scheme().hs_form) {
        (Family::Trapezoidal, _) => ((n + 1) * (n_x + n_u), n * n_x, (n + 1) * n_u),
        (Family::HermiteSimpson, HsForm::Separated) => {
            ((2 * n + 1) * (n_x + n_u), 2 * n * n_x, (2 * n + 1) * n_u)
        }
        (Family::HermiteSimpson, HsForm::Compressed) => {
            ((n + 1) * (n_x + n_u) + n * n_u, n * n_x, (2 * n + 1) * n_u)
        }
    };
    let n_dof = (n_x + controls) as isize - ocp.n_boundary() as isize;
    if s.n_vars != n_vars || s.n_collocation != n_col || s.n_dof as isize != n_dof {
        return Err(Error::InvalidInput(format!(
            "transcription sizes {s:?} disagree with n_v = {n_vars}, collocation rows = {n_col}, n_DOF = {n_dof}"
        )));
    }
    Ok(())
}

fn integrals(values: &[f64], joint: Option<f64>) -> Value {
    let mut m = Map::new();
    for (i, v) in values.iter().enumerate() {
        m.insert(format!("q{}", i + 1), Value::from(*v));
    }
    m.insert("joint".into(), joint.map_or(Value::Null, Value::from));
    Value::Object(m)
}

#[derive(Serialize)]
struct Summary<'a> {
    problem: &'a str,
    method: String,
    scheme: String,
    hs_form: Option<&'a str>,
    #[serde(rename = "N")]
    n: usize,
    n_vars: usize,
    n_eq: usize,
    n_ineq: usize,
    n_dof: usize,
    cost: f64,
    kkt_residual: f64,
    constraint_violation: f64,
    status: &'static str,
    iterations: usize,
    wall_time_s: Option<f64>,
    #[serde(rename = "E1")]
    e1: Value,
    #[serde(rename = "E2")]
    e2: Value,
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    problem: &'a str,
    method: String,
    config: Vec<String>,
    knots: Vec<f64>,
    sizes: NlpSizes,
    solution: &'a Solution,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn hs_form_name(cell: &Cell) -> Option<&'static str> {
    let s = cell.nlp.scheme();
    (s.family == Family::HermiteSimpson).then_some(match s.hs_form {
        HsForm::Separated => "separated",
        HsForm::Compressed => "compressed",
    })
}

/// Config lines recorded in artifacts; the output directory is left out so
/// identical experiments written to different places stay identical.
fn provenance(cfg: &ExperimentConfig) -> Vec<String> {
    cfg.to_kv()
        .lines()
        .filter(|l| !l.starts_with("out="))
        .map(str::to_string)
        .collect()
}

/// Writes `q`, its derivatives up to the problem order, and `u` on a uniform
/// grid of `grid` rows per interval plus the final time.
pub fn write_trajectory_csv<W: Write>(
    traj: &PolyTrajectory,
    n_q: usize,
    order: usize,
    grid: usize,
    mut w: W,
) -> Result<()> {
    let lifted = traj.order() == 1 && order > 1;
    let mut header = vec!["t".to_string()];
    for r in 0..=order {
        let prefix = match r {
            0 => String::new(),
            1 => "d".to_string(),
            _ => format!("d{r}"),
        };
        header.extend((1..=n_q).map(|i| format!("{prefix}q{i}")));
    }
    header.extend((1..=traj.n_u()).map(|j| format!("u{j}")));
    writeln!(w, "{}", header.join(","))?;
    let knots = traj.knots();
    let n = traj.n_intervals();
    for k in 0..n {
        let h = knots[k + 1] - knots[k];
        let rows = if k + 1 == n { grid + 1 } else { grid };
        for j in 0..rows {
            let tau = h * j as f64 / grid as f64;
            let t = if j == grid { knots[k + 1] } else { knots[k] + tau };
            let mut row = vec![fmt_f64(t)];
            for r in 0..=order {
                let vals = if lifted {
                    // Levels below the top are stored states of the lift.
                    let (level, offset) = if r < order { (0, r * n_q) } else { (1, (order - 1) * n_q) };
                    traj.eval_on_interval(k, tau, level)[offset..offset + n_q].to_vec()
                } else {
                    traj.eval_on_interval(k, tau, r)[..n_q].to_vec()
                };
                row.extend(vals.iter().map(|v| fmt_f64(*v)));
            }
            row.extend(traj.control_on_interval(k, tau).iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

fn write_cell(cfg: &ExperimentConfig, cell: &Cell, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let ocp = cell.nlp.ocp();
    let sizes = cell.nlp.sizes();
    let n = cell.nlp.mesh().n_intervals();
    let sol = &cell.solution;

    let solution_path = dir.join("solution.json");
    write_json(
        &solution_path,
        &SolutionFile {
            problem: &cfg.problem,
            method: cell.method.name(),
            config: provenance(cfg),
            knots: cell.nlp.mesh().knots(),
            sizes,
            solution: sol,
        },
    )?;

    let traj_path = dir.join("trajectory.csv");
    let mut w = BufWriter::new(fs::File::create(&traj_path)?);
    write_trajectory_csv(
        &cell.traj,
        ocp.source_n_q(),
        ocp.source_order(),
        cfg.grid_per_interval,
        &mut w,
    )?;
    w.flush()?;

    let errors_path = dir.join("errors.csv");
    let mut w = BufWriter::new(fs::File::create(&errors_path)?);
    cell.errors.write_csv(&mut w)?;
    w.flush()?;

    let summary_path = dir.join("summary.json");
    write_json(
        &summary_path,
        &Summary {
            problem: &cfg.problem,
            method: cell.method.name(),
            scheme: cell.nlp.scheme().label(),
            hs_form: hs_form_name(cell),
            n,
            n_vars: sizes.n_vars,
            n_eq: sizes.n_eq,
            n_ineq: sizes.n_ineq,
            n_dof: sizes.n_dof,
            cost: sol.cost,
            kkt_residual: sol.kkt_residual,
            constraint_violation: sol.constraint_violation,
            status: sol.status.as_str(),
            iterations: sol.iterations,
            wall_time_s: cell.wall_time,
            e1: integrals(&cell.errors.e1, cell.errors.e1_joint),
            e2: integrals(&cell.errors.e2, cell.errors.e2_joint),
        },
    )?;
    Ok(vec![solution_path, traj_path, errors_path, summary_path])
}

fn status_line(cell: &Cell) -> String {
    let e2: Vec<String> = cell.errors.e2.iter().map(|v| format!("{v:.4e}")).collect();
    format!(
        "{} N={} status={} cost={:.6} kkt={:.2e} E2=[{}]",
        cell.method.name(),
        cell.nlp.mesh().n_intervals(),
        cell.solution.status.as_str(),
        cell.solution.cost,
        cell.solution.kkt_residual,
        e2.join(", ")
    )
}

fn time_field(t: Option<f64>) -> String {
    t.map_or(String::new(), fmt_f64)
}

/// Solves one configuration and writes `solution.json`, `trajectory.csv`,
/// `errors.csv` and `summary.json` into the output directory.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let cell = solve_cell(cfg, cfg.method, cfg.n)?;
    let files = write_cell(cfg, &cell, &cfg.out)?;
    println!("{}", status_line(&cell));
    Ok(Outcome {
        all_converged: cell.solution.status == SolveStatus::Converged,
        files,
    })
}

/// Solves with every listed method and writes `compare.csv` plus one
/// artifact directory per method.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.methods.len() < 2 {
        return Err(Error::Config("compare needs at least two methods".into()));
    }
    let mut cells = Vec::new();
    let mut files = Vec::new();
    for &method in &cfg.methods {
        let n = cfg.n_for(method, cfg.n);
        let cell = solve_cell(cfg, method, n)?;
        files.extend(write_cell(cfg, &cell, &cfg.out.join(format!("{}_N{n}", method.name())))?);
        println!("{}", status_line(&cell));
        cells.push(cell);
    }
    let n_q = cells[0].errors.e2.len();
    let mut header = vec!["method".to_string(), "N".into(), "status".into(), "cost".into()];
    for tag in ["E1", "E2", "E2_ratio"] {
        header.extend((1..=n_q).map(|i| format!("{tag}_q{i}")));
    }
    header.push("wall_time_s".into());
    let path = cfg.out.join("compare.csv");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "{}", header.join(","))?;
    let base = cells[0].errors.e2.clone();
    for cell in &cells {
        let mut row = vec![
            cell.method.name(),
            cell.nlp.mesh().n_intervals().to_string(),
            cell.solution.status.as_str().to_string(),
            fmt_f64(cell.solution.cost),
        ];
        row.extend(cell.errors.e1.iter().map(|v| fmt_f64(*v)));
        row.extend(cell.errors.e2.iter().map(|v| fmt_f64(*v)));
        // Error of the first method relative to this one.
        row.extend(base.iter().zip(&cell.errors.e2).map(|(b, e)| fmt_f64(b / e)));
        row.push(time_field(cell.wall_time));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    files.push(path);
    Ok(Outcome {
        all_converged: cells.iter().all(|c| c.solution.status == SolveStatus::Converged),
        files,
    })
}

/// Solves every (method, N) pair and writes `convergence.csv`.
pub fn cmd_convergence(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.n_list.len() < 3 {
        return Err(Error::Config("convergence needs at least three values of N".into()));
    }
    let methods = cfg.method_list();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut all_converged = true;
    let mut n_q = 0;
    for &method in &methods {
        for &n in &cfg.n_list {
            let cell = solve_cell(cfg, method, n)?;
            files.extend(write_cell(cfg, &cell, &cfg.out.join(format!("{}_N{n}", method.name())))?);
            println!("{}", status_line(&cell));
            all_converged &= cell.solution.status == SolveStatus::Converged;
            n_q = cell.errors.e2.len();
            let mut row = vec![
                method.name(),
                n.to_string(),
                fmt_f64(cell.nlp.mesh().h()),
                cell.solution.status.as_str().to_string(),
                fmt_f64(cell.solution.cost),
            ];
            row.extend(cell.errors.e2.iter().map(|v| fmt_f64(*v)));
            row.push(cell.errors.e2_joint.map_or(String::new(), fmt_f64));
            row.push(time_field(cell.wall_time));
            rows.push(row.join(","));
        }
    }
    let mut header = vec!["method".to_string(), "N".into(), "h".into(), "status".into(), "cost".into()];
    header.extend((1..=n_q).map(|i| format!("E2_q{i}")));
    header.push("E2_joint".into());
    header.push("wall_time_s".into());
    let path = cfg.out.join("convergence.csv");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in &rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    files.push(path);
    Ok(Outcome {
        all_converged,
        files,
    })
}
