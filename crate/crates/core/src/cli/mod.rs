//! Command-line driver. Every subcommand reads one TOML file, applies the
//! `--set` overrides, resolves the seed and writes its CSV and JSON outputs
//! under `--out`, named by the experiment id of the resolved config.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or config
//! error.

pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value as Json};
use toml::Table;

use crate::error::{Error, Result};
use crate::harness::output::{experiment_id, write_json, write_raw_csv, write_table, write_theory_csv, write_trajectory_csv};
use crate::harness::{
    compare_to_theory, finite_sample_sweep, phase_heatmap, phase_portrait, run_experiment, theory_curves,
    toy_scaling_demo, ExperimentConfig, HeatmapConfig, TheoryMethod, ToyConfig,
};
use crate::theory::FixedPoint;
use crate::trackers::Algorithm;
use config::{PortraitSection, RateSection};

#[derive(Debug, Parser)]
#[command(name = "subspace-limits", version, about = "Streaming subspace estimation and its ODE limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override one key, e.g. `--set model.n=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Master seed; overrides the file.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo experiment and write trajectories.
    Simulate(Common),
    /// Evaluate the deterministic limit at the record times.
    Predict(Common),
    /// Simulate and compare the mean cosines with the limit.
    Compare(Common),
    /// Finite-n error sweep and its log-log slope.
    Rate(Common),
    /// PETRELS (Q², G) trajectories and nullclines.
    PhasePortrait(Common),
    /// PETRELS steady state over a (snr, mu) grid.
    PhaseMap(Common),
    /// The scalar toy recursion against its limit.
    DemoScaling(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Predict(_) => "predict",
            Command::Compare(_) => "compare",
            Command::Rate(_) => "rate",
            Command::PhasePortrait(_) => "phase-portrait",
            Command::PhaseMap(_) => "phase-map",
            Command::DemoScaling(_) => "demo-scaling",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Predict(c)
            | Command::Compare(c)
            | Command::Rate(c)
            | Command::PhasePortrait(c)
            | Command::PhaseMap(c)
            | Command::DemoScaling(c) => c,
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Run one subcommand and return the files it wrote.
pub fn execute(cmd: &Command) -> Result<Vec<PathBuf>> {
    let common = cmd.common();
    let mut table = config::load_table(&common.config)?;
    for s in &common.set {
        config::apply_override(&mut table, s)?;
    }
    let mut out = Output::new(cmd.name(), common);
    match cmd {
        Command::Simulate(_) => simulate(&mut table, &mut out)?,
        Command::Predict(_) => predict(&mut table, &mut out)?,
        Command::Compare(_) => compare(&mut table, &mut out)?,
        Command::Rate(_) => rate(&mut table, &mut out)?,
        Command::PhasePortrait(_) => portrait(&table, &mut out)?,
        Command::PhaseMap(_) => phase_map(&mut table, &mut out)?,
        Command::DemoScaling(_) => scaling(&mut table, &mut out)?,
    }
    Ok(out.files)
}

struct Output {
    command: &'static str,
    dir: PathBuf,
    seed: Option<u64>,
    workers: Option<usize>,
    id: String,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(command: &'static str, c: &Common) -> Self {
        Self {
            command,
            dir: c.out.clone(),
            seed: c.seed,
            workers: c.workers,
            id: String::new(),
            files: Vec::new(),
        }
    }

    /// Fix the experiment id from the resolved config and create the directory.
    fn bind(&mut self, resolved: &impl Serialize) -> Result<()> {
        self.id = experiment_id(&(self.command, resolved))?;
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    fn path(&mut self, suffix: &str) -> PathBuf {
        let p = self.dir.join(format!("{}_{}", self.id, suffix));
        self.files.push(p.clone());
        p
    }

    fn summary(&mut self, resolved: &impl Serialize, body: Json) -> Result<()> {
        let mut doc = json!({
            "experiment_id": self.id,
            "command": self.command,
            "config": resolved,
        });
        if let (Json::Object(d), Json::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let path = self.path("summary.json");
        write_json(&path, &doc)
    }
}

/// Experiment tables with the seed resolved and optional keys made explicit.
fn resolved_experiment(table: &mut Table, seed: Option<u64>) -> Result<ExperimentConfig> {
    config::resolve_seed(table, "run", seed)?;
    let mut cfg = config::experiment(table)?;
    if cfg.algorithm.eps.is_none() {
        cfg.algorithm.eps = Some(cfg.algorithm.tracker_params(cfg.model.alpha).eps);
    }
    Ok(cfg)
}

fn run_summary(cfg: &ExperimentConfig, rec: &crate::harness::TrajectoryRecord) -> Json {
    json!({
        "seed": cfg.run.seed,
        "trials": rec.n_trials(),
        "steps_per_trial": rec.steps,
        "total_skips": rec.total_skips(),
        "max_orth_defect": rec.max_orth_defect,
        "final_mean": rec.mean.last(),
    })
}

fn simulate(table: &mut Table, out: &mut Output) -> Result<()> {
    let cfg = resolved_experiment(table, out.seed)?;
    out.bind(&cfg)?;
    let rec = run_experiment(&cfg, out.workers)?;
    let id = out.id.clone();
    write_trajectory_csv(&out.path("trajectory.csv"), &id, &rec, None)?;
    write_raw_csv(&out.path("raw.csv"), &id, &rec)?;
    out.summary(&cfg, run_summary(&cfg, &rec))
}

fn predict(table: &mut Table, out: &mut Output) -> Result<()> {
    let cfg = resolved_experiment(table, out.seed)?;
    out.bind(&cfg)?;
    let methods: Vec<TheoryMethod> = match cfg.algorithm.name {
        Algorithm::Petrels => vec![TheoryMethod::PetrelsFull, TheoryMethod::PetrelsReduced],
        _ if cfg.algorithm.step.as_constant().is_some() => vec![TheoryMethod::ClosedForm, TheoryMethod::Rk4],
        _ => vec![TheoryMethod::Rk4],
    };
    let times = &cfg.run.record_times;
    let curves = methods
        .iter()
        .map(|&m| theory_curves(&cfg, times, m))
        .collect::<Result<Vec<_>>>()?;
    let id = out.id.clone();
    for c in &curves {
        write_theory_csv(&out.path(&format!("theory_{}.csv", c.method.name())), &id, c)?;
    }
    let discrepancy = (curves.len() == 2).then(|| {
        curves[0]
            .cosines
            .iter()
            .flatten()
            .zip(curves[1].cosines.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    });
    out.summary(
        &cfg,
        json!({
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "times": times,
            "cosines": curves.iter().map(|c| (c.method.name(), &c.cosines)).collect::<std::collections::BTreeMap<_, _>>(),
            "max_discrepancy": discrepancy,
        }),
    )
}

fn compare(table: &mut Table, out: &mut Output) -> Result<()> {
    let cfg = resolved_experiment(table, out.seed)?;
    out.bind(&cfg)?;
    let rec = run_experiment(&cfg, out.workers)?;
    let theory = theory_curves(&cfg, &cfg.run.record_times, TheoryMethod::default_for(&cfg))?;
    let report = compare_to_theory(&rec, &theory.points())?;
    let id = out.id.clone();
    write_trajectory_csv(&out.path("trajectory.csv"), &id, &rec, Some(&theory))?;
    write_raw_csv(&out.path("raw.csv"), &id, &rec)?;
    let mut body = run_summary(&cfg, &rec);
    if let Json::Object(m) = &mut body {
        m.insert("theory_method".into(), json!(theory.method.name()));
        m.insert("max_abs_err".into(), json!(report.max_abs_err));
        m.insert("rms_err".into(), json!(report.rms_err));
        m.insert("all_within_2sem".into(), json!(report.all_within_band));
        m.insert("points".into(), json!(report.points));
    }
    out.summary(&cfg, body)
}

#[derive(Serialize)]
struct RateResolved<'a> {
    #[serde(flatten)]
    experiment: &'a ExperimentConfig,
    rate: &'a RateSection,
}

fn rate(table: &mut Table, out: &mut Output) -> Result<()> {
    let cfg = resolved_experiment(table, out.seed)?;
    let rate: RateSection = config::section(table, "rate")?;
    let resolved = RateResolved {
        experiment: &cfg,
        rate: &rate,
    };
    out.bind(&resolved)?;
    let sweep = finite_sample_sweep(&cfg, &rate.n_list, rate.t_star, out.workers)?;
    let id = out.id.clone();
    write_table(
        &out.path("rate.csv"),
        &["experiment_id", "n", "mean_err", "sem_err"],
        sweep
            .points
            .iter()
            .map(|p| [id.clone(), p.n.to_string(), p.mean_err.to_string(), p.sem_err.to_string()]),
    )?;
    write_table(
        &out.path("rate_raw.csv"),
        &["experiment_id", "n", "trial", "error"],
        sweep.points.iter().flat_map(|p| {
            let id = &id;
            p.errors
                .iter()
                .enumerate()
                .map(move |(j, e)| [id.clone(), p.n.to_string(), j.to_string(), e.to_string()])
        }),
    )?;
    out.summary(
        &resolved,
        json!({
            "t_star": sweep.t_star,
            "points": sweep.points.iter().map(|p| json!({"n": p.n, "mean_err": p.mean_err, "sem_err": p.sem_err})).collect::<Vec<_>>(),
            "fit": sweep.fit,
        }),
    )
}

fn validate_portrait(p: &PortraitSection) -> Result<()> {
    let ok = p.lambda.is_finite()
        && p.sigma > 0.0
        && p.alpha > 0.0
        && p.alpha <= 1.0
        && p.mu > 0.0
        && p.mu.is_finite()
        && p.starts.iter().flatten().all(|v| v.is_finite() && *v >= 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::Config(
            "portrait needs sigma > 0, alpha in (0, 1], mu > 0 and non-negative starts".into(),
        ))
    }
}

fn portrait(table: &Table, out: &mut Output) -> Result<()> {
    let sec: PortraitSection = config::section(table, "portrait")?;
    validate_portrait(&sec)?;
    out.bind(&sec)?;
    let res = phase_portrait(&sec.params(), &sec.layout())?;
    let id = out.id.clone();
    write_table(
        &out.path("trajectories.csv"),
        &["experiment_id", "start", "t", "q2", "g"],
        res.trajectories.iter().enumerate().flat_map(|(i, tr)| {
            let id = &id;
            tr.iter()
                .map(move |[t, q2, g]| [id.clone(), i.to_string(), t.to_string(), q2.to_string(), g.to_string()])
        }),
    )?;
    let mut rows = Vec::new();
    for (name, pts) in [("f", &res.nullcline_f), ("h", &res.nullcline_h)] {
        for [g, q2] in pts {
            rows.push([id.clone(), name.to_string(), g.to_string(), q2.to_string()]);
        }
    }
    write_table(&out.path("nullclines.csv"), &["experiment_id", "curve", "g", "q2"], rows)?;
    let fixed = match res.fixed_point {
        FixedPoint::Informative { q2, g } => json!({"kind": "informative", "q2": q2, "g": g}),
        FixedPoint::Uninformative { g } => json!({"kind": "uninformative", "q2": 0.0, "g": g}),
    };
    let ends: Vec<_> = res.trajectories.iter().filter_map(|tr| tr.last()).collect();
    out.summary(
        &sec,
        json!({
            "fixed_point": fixed,
            "critical_mu": res.critical_mu,
            "endpoints": ends,
        }),
    )
}

fn phase_map(table: &mut Table, out: &mut Output) -> Result<()> {
    config::resolve_seed(table, "phase_map", out.seed)?;
    let cfg: HeatmapConfig = config::section(table, "phase_map")?;
    cfg.validate()?;
    out.bind(&cfg)?;
    let res = phase_heatmap(&cfg, out.workers)?;
    let id = out.id.clone();
    write_table(
        &out.path("cells.csv"),
        &["experiment_id", "snr", "mu", "lambda", "critical_mu", "theory_q2", "mean_q2", "std_q2"],
        res.cells.iter().map(|c| {
            [
                id.clone(),
                c.snr.to_string(),
                c.mu.to_string(),
                c.lambda.to_string(),
                c.critical_mu.to_string(),
                c.theory_q2.to_string(),
                c.mean_q2.to_string(),
                c.std_q2.to_string(),
            ]
        }),
    )?;
    write_table(
        &out.path("boundary.csv"),
        &["experiment_id", "snr", "critical_mu"],
        res.boundary.iter().map(|[s, m]| [id.clone(), s.to_string(), m.to_string()]),
    )?;
    write_table(
        &out.path("cells_raw.csv"),
        &["experiment_id", "snr", "mu", "trial", "q2"],
        res.cells.iter().flat_map(|c| {
            let id = &id;
            c.q2.iter()
                .enumerate()
                .map(move |(j, v)| [id.clone(), c.snr.to_string(), c.mu.to_string(), j.to_string(), v.to_string()])
        }),
    )?;
    out.summary(&cfg, json!({ "cells": res.cells.len() }))
}

fn scaling(table: &mut Table, out: &mut Output) -> Result<()> {
    config::resolve_seed(table, "scaling", out.seed)?;
    let cfg: ToyConfig = config::section(table, "scaling")?;
    cfg.validate()?;
    out.bind(&cfg)?;
    let runs = toy_scaling_demo(&cfg, out.workers)?;
    let id = out.id.clone();
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for r in &runs {
        for (i, t) in r.times.iter().enumerate() {
            rows.push([
                id.clone(),
                r.n.to_string(),
                t.to_string(),
                r.mean[i].to_string(),
                r.std[i].to_string(),
                r.limit[i].to_string(),
            ]);
            for (j, tr) in r.trials.iter().enumerate() {
                raw.push([id.clone(), r.n.to_string(), j.to_string(), t.to_string(), tr[i].to_string()]);
            }
        }
    }
    write_table(&out.path("scaling.csv"), &["experiment_id", "n", "t", "mean", "std", "limit"], rows)?;
    write_table(&out.path("scaling_raw.csv"), &["experiment_id", "n", "trial", "t", "q"], raw)?;
    out.summary(
        &cfg,
        json!({
            "max_dev": runs.iter().map(|r| json!({"n": r.n, "max_dev": r.max_dev})).collect::<Vec<_>>(),
        }),
    )
}
