//! `chsolver` command line.  Exit codes: 0 success, 1 invalid input or
//! failed checks, 2 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bdf::{audit_kernels, dcc_kernels, doc_kernels, random_mesh, TimeMesh};
use crate::experiments::{run_convergence, run_scenario_with, ExperimentError, ScenarioName};
use crate::io::{parse_config, read_records, write_snapshot, ConfigError, PolicyKind, RecordWriter, SimConfig};
use crate::monitor::{check_records, MonitorTolerances};

#[derive(Debug, Parser)]
#[command(name = "chsolver", about = "Variable-step Cahn-Hilliard solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario, writing records.csv and snapshot files.
    Simulate(RunArgs),
    /// Run the temporal convergence sweep and write convergence.csv.
    Converge(RunArgs),
    /// Dump DOC/DCC kernels and their identity residuals for the configured mesh.
    Kernels(RunArgs),
    /// Check invariants of a records file, or of a fresh run of a config.
    Check {
        config: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<ScenarioName>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Scenario used when the config file names none.
    #[arg(long)]
    scenario: Option<ScenarioName>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Converge(a) => converge(&a, out),
        Command::Kernels(a) => kernels(&a, out),
        Command::Check { config, records, scenario } => check(config.as_deref(), records.as_deref(), scenario, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Invalid(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "runtime error: {m}");
            2
        }
    }
}

fn load(a: &RunArgs) -> Result<(SimConfig, PathBuf), Failure> {
    let config = parse_config(&a.config, a.scenario)?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
    std::fs::create_dir_all(&dir)?;
    Ok((config, dir))
}

fn simulate(a: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (config, dir) = load(a)?;
    let scenario = config.scenario()?;
    let mut writer = RecordWriter::create(&dir.join("records.csv"))?;
    let mut snap_count = 0usize;
    let mut write_snap = |field: &crate::spectral::SpectralField, t: f64| -> Result<(), ExperimentError> {
        let path = dir.join(format!("snapshot_{snap_count:03}.chsnap"));
        snap_count += 1;
        write_snapshot(field, t, &path).map_err(|e| ExperimentError::Invalid(e.to_string()))
    };
    let initial = scenario.initial_state()?;
    if scenario.snapshot_times.iter().any(|&t| t.abs() <= 1e-12 * scenario.horizon) {
        write_snap(initial.phi(), 0.0)?;
    }
    let every = config.record_every;
    let output = run_scenario_with(&scenario, |rec, snap| {
        if rec.n % every == 0 {
            writer.write(rec).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        }
        if let Some(s) = snap {
            write_snap(&s.field, s.t)?;
        }
        Ok(())
    })?;
    let last = output.records.last();
    let _ = writeln!(
        out,
        "scenario {}: {} steps to t = {}, gamma = {:e}, energy = {:e}, {} snapshots in {}",
        scenario.name,
        output.records.len(),
        last.map_or(0.0, |r| r.t),
        output.final_state.gamma(),
        last.map_or(f64::NAN, |r| r.energy),
        output.snapshots.len(),
        dir.display()
    );
    Ok(0)
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn converge(a: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (config, dir) = load(a)?;
    let setup = config.convergence_setup()?;
    let report = run_convergence(&setup)?;
    let path = dir.join("convergence.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(csv, "K,tau,h1_error,h1_order,gamma_error,gamma_order,max_ratio")?;
    let _ = writeln!(out, "{:>7} {:>12} {:>12} {:>8} {:>12} {:>8} {:>8}", "K", "tau", "H1 error", "order", "gamma err", "order", "max r");
    for r in &report.rows {
        writeln!(
            csv,
            "{},{:.16e},{:.16e},{},{:.16e},{},{:.16e}",
            r.k,
            r.tau_max,
            r.h1_error,
            fmt_order(r.h1_order),
            r.gamma_error,
            fmt_order(r.gamma_order),
            r.max_ratio
        )?;
        let _ = writeln!(
            out,
            "{:>7} {:>12.4e} {:>12.4e} {:>8} {:>12.4e} {:>8} {:>8.3}",
            r.k,
            r.tau_max,
            r.h1_error,
            fmt_order(r.h1_order),
            r.gamma_error,
            fmt_order(r.gamma_order),
            r.max_ratio
        );
    }
    csv.flush()?;
    Ok(0)
}

fn kernel_mesh(config: &SimConfig) -> Result<TimeMesh, Failure> {
    let mesh = match config.policy {
        PolicyKind::Fixed => TimeMesh::uniform(config.horizon, (config.horizon / config.tau).round().max(1.0) as usize),
        _ => random_mesh(config.horizon, config.steps, config.seed),
    };
    mesh.map_err(|e| Failure::Invalid(e.to_string()))
}

fn kernels(a: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (config, dir) = load(a)?;
    let mesh = kernel_mesh(&config)?;
    let n = mesh.len();
    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("kernels.csv"))?);
    writeln!(csv, "n,j,theta,p")?;
    for m in 1..=n {
        let theta = doc_kernels(&mesh, m).map_err(runtime)?;
        let p = dcc_kernels(&mesh, m).map_err(runtime)?;
        for j in 1..=m {
            writeln!(csv, "{m},{j},{:.16e},{:.16e}", theta[m - j], p[m - j])?;
        }
    }
    csv.flush()?;
    let audit = audit_kernels(&mesh, n).map_err(runtime)?;
    let mut res = std::io::BufWriter::new(std::fs::File::create(dir.join("kernel_residuals.csv"))?);
    writeln!(res, "n,doc_residual,dcc_residual,dcc_sum_error,dcc_bound_ratio,doc_dcc_relation,telescoping_residual")?;
    for r in &audit {
        writeln!(
            res,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.doc_residual, r.dcc_residual, r.dcc_sum_error, r.dcc_bound_ratio, r.doc_dcc_relation, r.telescoping_residual
        )?;
    }
    res.flush()?;
    let max = |f: fn(&crate::bdf::KernelAudit) -> f64| audit.iter().map(f).fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "{n} levels, max ratio {:.4}: doc {:.2e}, dcc {:.2e}, sum {:.2e}, bound {:.4}, relation {:.2e}, telescoping {:.2e}",
        mesh.max_ratio(),
        max(|r| r.doc_residual),
        max(|r| r.dcc_residual),
        max(|r| r.dcc_sum_error),
        max(|r| r.dcc_bound_ratio),
        max(|r| r.doc_dcc_relation),
        max(|r| r.telescoping_residual)
    );
    Ok(0)
}

fn check(
    config: Option<&Path>,
    records: Option<&Path>,
    scenario: Option<ScenarioName>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut tol = MonitorTolerances::default();
    let recs = match (records, config) {
        (Some(path), _) => read_records(path).map_err(|e| match e {
            crate::io::FormatError::Io(e) => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        })?,
        (None, Some(path)) => {
            let config = parse_config(path, scenario)?;
            let s = config.scenario()?;
            tol.mass_scale = Some(s.grid()?.volume());
            if let crate::adaptive::StepPolicy::Adaptive(p) = &s.policy {
                tol.max_ratio = p.r_max_eff;
            }
            run_scenario_with(&s, |_, _| Ok(()))?.records
        }
        (None, None) => return Err(Failure::Invalid("check needs a config file or --records".into())),
    };
    let violations = check_records(&recs, &tol);
    for v in &violations {
        let _ = writeln!(out, "violation at {v}");
    }
    let _ = writeln!(out, "{} records checked, {} violations", recs.len(), violations.len());
    Ok(if violations.is_empty() { 0 } else { 1 })
}
