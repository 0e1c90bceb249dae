//! Command line front end: option parsing, run orchestration, artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_scalar, ConfigOverrides, RunConfig};
use crate::driver::{decompose_1d, dof_growth_rates, run_case, CaseOutcome, Decomposition, RunReport};
use crate::export::{write_level_map, write_nodes_csv, write_raster};
use crate::fourier::FineGrid;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "tdhelm", version, about = "Adaptive time-domain Helmholtz solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one case, or a frequency sweep of it.
    Run(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML file with [problem], [hierarchy], [stepper], [adapt], [driver] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 1d_bump, 2d_bump, 2d_point or 2d_trap.
    #[arg(long)]
    pub case: Option<String>,
    /// Angular frequency, e.g. 31.4159 or 10pi.
    #[arg(long)]
    pub omega: Option<String>,
    /// Comma-separated mesh widths, e.g. 1/5,1/50.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long = "t-up")]
    pub t_up: Option<String>,
    #[arg(long)]
    pub eta0: Option<String>,
    #[arg(long)]
    pub eps0: Option<String>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Also run the classical uniform-mesh method on the finest width.
    #[arg(long = "uniform-baseline")]
    pub uniform_baseline: bool,
    /// Frequency sweep, e.g. omega=10pi,20pi,40pi.
    #[arg(long)]
    pub sweep: Option<String>,
    /// 1D only: split the reference error into layer and truncation parts.
    #[arg(long)]
    pub decompose: bool,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
    /// Accepted for compatibility; runs are single-threaded.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for the randomized test harness; ignored by runs.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let s = |v: &Option<String>| v.as_deref().map(parse_scalar).transpose();
        Ok(ConfigOverrides {
            case: self.case.clone(),
            omega: s(&self.omega)?,
            levels: self
                .levels
                .as_deref()
                .map(|l| l.split(',').map(parse_scalar).collect::<Result<Vec<_>>>())
                .transpose()?,
            degree: self.degree,
            cfl: self.cfl,
            t_up: s(&self.t_up)?,
            eta0: s(&self.eta0)?,
            eps0: s(&self.eps0)?,
            uniform_baseline: self.uniform_baseline.then_some(true),
            ..Default::default()
        })
    }

    /// Resolved configurations, one per sweep point.
    pub fn resolve(&self) -> Result<Vec<RunConfig>> {
        let base = match &self.config {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        }
        .merge(self.overrides()?);
        let Some(sweep) = &self.sweep else {
            return Ok(vec![base.resolve()?]);
        };
        let (key, list) = sweep
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("sweep must look like omega=10pi,20pi, got `{sweep}`")))?;
        if key.trim() != "omega" {
            return Err(Error::InvalidConfig(format!("only omega sweeps are supported, got `{key}`")));
        }
        let mut out = Vec::new();
        for w in list.split(',') {
            let mut o = base.clone();
            o.omega = Some(parse_scalar(w)?);
            // Frequency-dependent defaults unless set explicitly.
            if self.t_up.is_none() {
                o.t_up = None;
            }
            out.push(o.resolve()?);
        }
        Ok(out)
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub config: RunConfig,
    pub report: RunReport,
    pub err2: f64,
    pub fem_err2: Option<f64>,
    pub fem_n_dof: Option<usize>,
    pub decomposition: Option<Decomposition>,
}

fn run_dir(out: &Path, cfg: &RunConfig) -> PathBuf {
    let k = cfg.omega / std::f64::consts::PI;
    let tag = if (k - k.round()).abs() < 1e-9 { format!("{}pi", k.round()) } else { format!("{:.6}", cfg.omega) };
    out.join(format!("{}_omega{}", cfg.case, tag))
}

fn write_artifacts(dir: &Path, cfg: &RunConfig, row: &Row, outcome: &CaseOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let echo = vec![format!("config {}", cfg.to_json())];
    let report = serde_json::to_string_pretty(row).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    fs::write(dir.join("report.json"), report + "\n")?;
    let field = &outcome.solution.field;
    let spec = cfg.problem()?;
    let grid = FineGrid::new(field.hier.clone(), field.p, &spec);
    write_nodes_csv(BufWriter::new(File::create(dir.join("field_nodes.csv"))?), &grid.positions(), &field.values, &echo)?;
    write_raster(BufWriter::new(File::create(dir.join("field_raster.txt"))?), field, &echo)?;
    write_level_map(BufWriter::new(File::create(dir.join("level_map.txt"))?), &outcome.solution.mesh)?;
    Ok(())
}

fn table_line(r: &Row) -> String {
    let levels: Vec<String> = r.config.levels.iter().map(|h| format!("{h}")).collect();
    format!(
        "{},{},{},{},{},{},{:.3e},{:.3e},{},{}",
        r.config.case,
        r.config.omega,
        levels.join(" "),
        r.config.pml_width,
        r.report.m,
        r.report.j_stop,
        r.err2,
        r.report.n_dof_avg,
        r.fem_err2.map(|e| format!("{e:.3e}")).unwrap_or_default(),
        r.fem_n_dof.map(|n| n.to_string()).unwrap_or_default(),
    )
}

/// Executes `run`; returns the table rows.
pub fn run(args: &RunArgs) -> Result<Vec<Row>> {
    let configs = args.resolve()?;
    if args.decompose && configs.iter().any(|c| c.case.dim() != 1) {
        return Err(Error::InvalidConfig("--decompose is available for 1D cases only".into()));
    }
    fs::create_dir_all(&args.out_dir)?;
    let mut rows = Vec::new();
    for cfg in &configs {
        let spec = cfg.problem()?;
        let solver = cfg.solver();
        let outcome = run_case(&spec, &solver, cfg.uniform_baseline)?;
        let decomposition = if args.decompose {
            Some(decompose_1d(&spec, &solver, &outcome.solution.report)?)
        } else {
            None
        };
        let row = Row {
            config: cfg.clone(),
            report: outcome.solution.report.clone(),
            err2: outcome.err2,
            fem_err2: outcome.baseline.as_ref().map(|b| b.err2),
            fem_n_dof: outcome.baseline.as_ref().map(|b| b.n_dof),
            decomposition,
        };
        write_artifacts(&run_dir(&args.out_dir, cfg), cfg, &row, &outcome)?;
        println!("{}", table_line(&row));
        rows.push(row);
    }
    let mut t = BufWriter::new(File::create(args.out_dir.join("table.csv"))?);
    for cfg in &configs {
        writeln!(t, "# config {}", cfg.to_json())?;
    }
    writeln!(t, "case,omega,levels,pml_width,m,j_stop,err2,n_dof_avg,fem_err2,fem_n_dof")?;
    for r in &rows {
        writeln!(t, "{}", table_line(r))?;
    }
    if rows.len() > 1 {
        let reports: Vec<RunReport> = rows.iter().map(|r| r.report.clone()).collect();
        let mut g = BufWriter::new(File::create(args.out_dir.join("growth.csv"))?);
        writeln!(g, "omega_from,omega_to,ratio,rate")?;
        for (i, (ratio, rate)) in dof_growth_rates(&reports).into_iter().enumerate() {
            let line = format!("{},{},{ratio:.4},{rate:.4}", rows[i].config.omega, rows[i + 1].config.omega);
            println!("growth {line}");
            writeln!(g, "{line}")?;
        }
    }
    Ok(rows)
}

/// Process exit code for a run result.
pub fn exit_code(r: &Result<Vec<Row>>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(Error::UnknownCase(_) | Error::InvalidConfig(_) | Error::InvalidHierarchy(_)) => 2,
        Err(Error::RunAborted { .. }) => 3,
        Err(_) => 1,
    }
}
