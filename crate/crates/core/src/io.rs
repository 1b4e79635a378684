//! Plain-text configuration, record CSV and `CHSNAP v1` field snapshots.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::adaptive::{AdaptiveParams, StepPolicy};
use crate::bdf::{r_max_root, random_mesh, DEFAULT_DELTA};
use crate::experiments::{
    default_threads, ConvergenceSetup, InitialCondition, KissingGrouping, RandRange, Scenario, ScenarioName,
    KISSING_OFFSET,
};
use crate::spectral::SpectralField;
use crate::stepper::StepRecord;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad snapshot header: {0}")]
    Header(String),
    #[error("snapshot payload has {got} bytes, expected {expected}")]
    Payload { expected: usize, got: usize },
    #[error("record line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("field has no valid physical representation: {0}")]
    Field(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Fixed,
    RandomMesh,
    Adaptive,
}

impl PolicyKind {
    fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Fixed => "fixed",
            PolicyKind::RandomMesh => "random_mesh",
            PolicyKind::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    Bubble,
    Kissing,
    Random,
    Constant,
}

impl IcKind {
    fn as_str(&self) -> &'static str {
        match self {
            IcKind::Bubble => "bubble",
            IcKind::Kissing => "kissing",
            IcKind::Random => "random",
            IcKind::Constant => "constant",
        }
    }
}

/// Every tunable of a run.  Keys missing from a config file take the
/// scenario's defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: ScenarioName,
    // [grid]
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub dealias: bool,
    // [model]
    pub eps: f64,
    pub ic: IcKind,
    pub ic_value: f64,
    pub rand_range: RandRange,
    pub kissing_grouping: KissingGrouping,
    pub kissing_offset: f64,
    // [time]
    pub horizon: f64,
    pub policy: PolicyKind,
    pub tau: f64,
    pub steps: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub alpha: f64,
    pub delta: f64,
    pub r_max_eff: f64,
    // [experiment]
    pub seed: u64,
    pub base_k: usize,
    pub levels: usize,
    pub ref_steps: usize,
    // [output]
    pub output_dir: String,
    pub snapshot_times: Vec<f64>,
    pub record_every: usize,
}

impl SimConfig {
    pub fn defaults(scenario: ScenarioName) -> SimConfig {
        let s = Scenario::defaults(scenario);
        let r_max_eff = r_max_root() - DEFAULT_DELTA;
        let mut c = SimConfig {
            scenario,
            dim: s.dim,
            n: s.n,
            length: s.length,
            dealias: s.dealias,
            eps: s.eps,
            ic: IcKind::Bubble,
            ic_value: 1.0,
            rand_range: RandRange::Symmetric,
            kissing_grouping: KissingGrouping::Standard,
            kissing_offset: KISSING_OFFSET,
            horizon: s.horizon,
            policy: PolicyKind::Fixed,
            tau: 1e-4,
            steps: 400,
            tau_min: 1e-4,
            tau_max: 1e-4,
            alpha: 0.0,
            delta: DEFAULT_DELTA,
            r_max_eff,
            seed: s.seed,
            base_k: 400,
            levels: 4,
            ref_steps: 0,
            output_dir: "out".to_string(),
            snapshot_times: s.snapshot_times.clone(),
            record_every: 1,
        };
        match s.ic {
            InitialCondition::Bubble => c.ic = IcKind::Bubble,
            InitialCondition::Kissing { grouping, offset } => {
                c.ic = IcKind::Kissing;
                c.kissing_grouping = grouping;
                c.kissing_offset = offset;
            }
            InitialCondition::Random(range) => {
                c.ic = IcKind::Random;
                c.rand_range = range;
            }
            InitialCondition::Constant(v) => {
                c.ic = IcKind::Constant;
                c.ic_value = v;
            }
        }
        match s.policy {
            StepPolicy::Fixed(tau) => {
                c.policy = PolicyKind::Fixed;
                c.tau = tau;
            }
            StepPolicy::Prescribed(mesh) => {
                c.policy = PolicyKind::RandomMesh;
                c.steps = mesh.len();
            }
            StepPolicy::Adaptive(p) => {
                c.policy = PolicyKind::Adaptive;
                c.tau = p.tau_min;
                c.tau_min = p.tau_min;
                c.tau_max = p.tau_max;
                c.alpha = p.alpha;
                c.r_max_eff = p.r_max_eff;
            }
        }
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Validation(m));
        if !(self.dim == 2 || self.dim == 3) {
            return fail(format!("grid.dim must be 2 or 3, got {}", self.dim));
        }
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return fail(format!("grid.n must be even and >= 4, got {}", self.n));
        }
        for (key, v) in [
            ("grid.length", self.length),
            ("model.eps", self.eps),
            ("time.horizon", self.horizon),
            ("time.tau", self.tau),
            ("time.tau_min", self.tau_min),
            ("time.tau_max", self.tau_max),
            ("time.delta", self.delta),
            ("time.r_max_eff", self.r_max_eff),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{key} must be positive, got {v}"));
            }
        }
        if self.tau_min > self.tau_max {
            return fail(format!("time.tau_min = {} exceeds time.tau_max = {}", self.tau_min, self.tau_max));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail(format!("time.alpha must be >= 0, got {}", self.alpha));
        }
        let bound = r_max_root() - self.delta;
        if self.r_max_eff > bound {
            return fail(format!("time.r_max_eff = {} exceeds r_max - delta = {bound}", self.r_max_eff));
        }
        if self.steps < 2 {
            return fail(format!("time.steps must be >= 2, got {}", self.steps));
        }
        if self.record_every == 0 {
            return fail("output.record_every must be >= 1".into());
        }
        if self.base_k < 2 || self.levels == 0 {
            return fail("experiment.base_k must be >= 2 and experiment.levels >= 1".into());
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.horizon)) {
            return fail(format!("snapshot time {t} outside [0, {}]", self.horizon));
        }
        if matches!(self.ic, IcKind::Bubble | IcKind::Kissing) && self.dim != 2 {
            return fail(format!("initial condition `{}` needs dim = 2", self.ic.as_str()));
        }
        if self.scenario == ScenarioName::Convergence && self.dim != 2 {
            return fail("the convergence scenario is two-dimensional".into());
        }
        Ok(())
    }

    pub fn policy(&self) -> Result<StepPolicy, ConfigError> {
        Ok(match self.policy {
            PolicyKind::Fixed => StepPolicy::Fixed(self.tau),
            PolicyKind::RandomMesh => StepPolicy::Prescribed(
                random_mesh(self.horizon, self.steps, self.seed).map_err(|e| ConfigError::Validation(e.to_string()))?,
            ),
            PolicyKind::Adaptive => StepPolicy::Adaptive(AdaptiveParams {
                tau_min: self.tau_min,
                tau_max: self.tau_max,
                alpha: self.alpha,
                r_max_eff: self.r_max_eff,
            }),
        })
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.ic {
            IcKind::Bubble => InitialCondition::Bubble,
            IcKind::Kissing => InitialCondition::Kissing { grouping: self.kissing_grouping, offset: self.kissing_offset },
            IcKind::Random => InitialCondition::Random(self.rand_range),
            IcKind::Constant => InitialCondition::Constant(self.ic_value),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        Ok(Scenario {
            name: self.scenario,
            ic: self.initial_condition(),
            eps: self.eps,
            dim: self.dim,
            n: self.n,
            length: self.length,
            horizon: self.horizon,
            policy: self.policy()?,
            seed: self.seed,
            snapshot_times: self.snapshot_times.clone(),
            dealias: self.dealias,
        })
    }

    pub fn convergence_setup(&self) -> Result<ConvergenceSetup, ConfigError> {
        self.validate()?;
        Ok(ConvergenceSetup {
            base_k: self.base_k,
            levels: self.levels,
            horizon: self.horizon,
            eps: self.eps,
            n: self.n,
            length: self.length,
            seed: self.seed,
            ref_steps: self.ref_steps,
            dealias: self.dealias,
            threads: default_threads(),
        })
    }

    /// Serializes every key; parsing the result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "length = {:?}", self.length);
        let _ = writeln!(s, "dealias = {}", self.dealias);
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "ic = {}", self.ic.as_str());
        let _ = writeln!(s, "ic_value = {:?}", self.ic_value);
        let _ = writeln!(s, "rand_range = {}", match self.rand_range {
            RandRange::Symmetric => "symmetric",
            RandRange::Unit => "unit",
        });
        let _ = writeln!(s, "kissing_grouping = {}", match self.kissing_grouping {
            KissingGrouping::Standard => "standard",
            KissingGrouping::Verbatim => "verbatim",
        });
        let _ = writeln!(s, "kissing_offset = {:?}", self.kissing_offset);
        let _ = writeln!(s, "\n[time]");
        let _ = writeln!(s, "horizon = {:?}", self.horizon);
        let _ = writeln!(s, "policy = {}", self.policy.as_str());
        let _ = writeln!(s, "tau = {:?}", self.tau);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "tau_min = {:?}", self.tau_min);
        let _ = writeln!(s, "tau_max = {:?}", self.tau_max);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "delta = {:?}", self.delta);
        let _ = writeln!(s, "r_max_eff = {:?}", self.r_max_eff);
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "base_k = {}", self.base_k);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "ref_steps = {}", self.ref_steps);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir);
        let times: Vec<String> = self.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "snapshot_times = {}", times.join(", "));
        let _ = writeln!(s, "record_every = {}", self.record_every);
        s
    }
}

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    const SECTIONS: [&str; 5] = ["grid", "model", "time", "experiment", "output"];
    let mut section = String::new();
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse { line, message: "unterminated section header".into() })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::Parse { line, message: format!("unknown section [{name}]") });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            return Err(ConfigError::Parse { line, message: "empty key".into() });
        }
        if !seen.insert((section.clone(), key.clone())) {
            return Err(ConfigError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        entries.push(Entry { line, section: section.clone(), key, value });
    }
    Ok(entries)
}

fn parse_value<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse::<T>().map_err(|_| ConfigError::Parse {
        line: e.line,
        message: format!("cannot parse `{}` for key `{}`", e.value, e.key),
    })
}

fn parse_choice<T: Copy>(e: &Entry, choices: &[(&str, T)]) -> Result<T, ConfigError> {
    choices.iter().find(|(name, _)| *name == e.value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
        ConfigError::Parse { line: e.line, message: format!("`{}` must be one of {}", e.key, names.join(", ")) }
    })
}

/// Parses config text.  The scenario comes from the top-level `scenario`
/// key, or from `fallback` when the text has none.
pub fn parse_config_str(text: &str, fallback: Option<ScenarioName>) -> Result<SimConfig, ConfigError> {
    let entries = tokenize(text)?;
    let scenario = match entries.iter().find(|e| e.section.is_empty() && e.key == "scenario") {
        Some(e) => e.value.parse::<ScenarioName>().map_err(|m| ConfigError::Parse { line: e.line, message: m })?,
        None => fallback.ok_or_else(|| ConfigError::Validation("no scenario given".into()))?,
    };
    let mut c = SimConfig::defaults(scenario);
    let mut eps_line = None;
    let mut eps2_line = None;
    let mut r_max_eff_set = false;
    let mut snapshots_set = false;
    for e in &entries {
        match (e.section.as_str(), e.key.as_str()) {
            ("", "scenario") => {}
            ("grid", "dim") => c.dim = parse_value(e)?,
            ("grid", "n") => c.n = parse_value(e)?,
            ("grid", "length") => c.length = parse_value(e)?,
            ("grid", "dealias") => c.dealias = parse_value(e)?,
            ("model", "eps") => {
                c.eps = parse_value(e)?;
                eps_line = Some(e.line);
            }
            ("model", "eps2") => {
                let eps2: f64 = parse_value(e)?;
                c.eps = eps2.sqrt();
                eps2_line = Some(e.line);
            }
            ("model", "ic") => {
                c.ic = parse_choice(e, &[
                    ("bubble", IcKind::Bubble),
                    ("kissing", IcKind::Kissing),
                    ("random", IcKind::Random),
                    ("constant", IcKind::Constant),
                ])?
            }
            ("model", "ic_value") => c.ic_value = parse_value(e)?,
            ("model", "rand_range") => {
                c.rand_range = parse_choice(e, &[("symmetric", RandRange::Symmetric), ("unit", RandRange::Unit)])?
            }
            ("model", "kissing_grouping") => {
                c.kissing_grouping = parse_choice(e, &[
                    ("standard", KissingGrouping::Standard),
                    ("verbatim", KissingGrouping::Verbatim),
                ])?
            }
            ("model", "kissing_offset") => c.kissing_offset = parse_value(e)?,
            ("time", "horizon") => c.horizon = parse_value(e)?,
            ("time", "policy") => {
                c.policy = parse_choice(e, &[
                    ("fixed", PolicyKind::Fixed),
                    ("random_mesh", PolicyKind::RandomMesh),
                    ("adaptive", PolicyKind::Adaptive),
                ])?
            }
            ("time", "tau") => c.tau = parse_value(e)?,
            ("time", "steps") => c.steps = parse_value(e)?,
            ("time", "tau_min") => c.tau_min = parse_value(e)?,
            ("time", "tau_max") => c.tau_max = parse_value(e)?,
            ("time", "alpha") => c.alpha = parse_value(e)?,
            ("time", "delta") => c.delta = parse_value(e)?,
            ("time", "r_max_eff") => {
                c.r_max_eff = parse_value(e)?;
                r_max_eff_set = true;
            }
            ("experiment", "seed") => c.seed = parse_value(e)?,
            ("experiment", "base_k") => c.base_k = parse_value(e)?,
            ("experiment", "levels") => c.levels = parse_value(e)?,
            ("experiment", "ref_steps") => c.ref_steps = parse_value(e)?,
            ("output", "dir") => c.output_dir = e.value.clone(),
            ("output", "snapshot_times") => {
                snapshots_set = true;
                c.snapshot_times = if e.value.is_empty() {
                    Vec::new()
                } else {
                    e.value
                        .split(',')
                        .map(|t| {
                            t.trim().parse::<f64>().map_err(|_| ConfigError::Parse {
                                line: e.line,
                                message: format!("bad snapshot time `{}`", t.trim()),
                            })
                        })
                        .collect::<Result<_, _>>()?
                }
            }
            ("output", "record_every") => c.record_every = parse_value(e)?,
            (section, key) => {
                let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                return Err(ConfigError::Parse { line: e.line, message: format!("unknown key `{name}`") });
            }
        }
    }
    if let (Some(_), Some(line)) = (eps_line, eps2_line) {
        return Err(ConfigError::Parse { line, message: "give either eps or eps2, not both".into() });
    }
    if !r_max_eff_set {
        c.r_max_eff = r_max_root() - c.delta;
    }
    if !snapshots_set {
        // scenario defaults past a shortened horizon are dropped, not errors
        let horizon = c.horizon;
        c.snapshot_times.retain(|&t| t <= horizon);
    }
    c.validate()?;
    Ok(c)
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path, fallback: Option<ScenarioName>) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, fallback)
}

pub const RECORD_HEADER: &str = "n,t,tau,gamma,energy,xi,eta,mass,dissipation";

fn format_record(r: &StepRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.n, r.t, r.tau, r.gamma, r.energy, r.xi, r.eta, r.mass, r.dissipation
    )
}

/// Streams records to a CSV file, flushing after every row.
pub struct RecordWriter {
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{RECORD_HEADER}")?;
        out.flush()?;
        Ok(RecordWriter { out })
    }

    pub fn write(&mut self, record: &StepRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", format_record(record))?;
        self.out.flush()
    }
}

pub fn write_records(records: &[StepRecord], path: &Path) -> std::io::Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<StepRecord>, FormatError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RECORD_HEADER {
        return Err(FormatError::Record { line: 1, message: format!("expected header `{RECORD_HEADER}`") });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| FormatError::Record { line: line_no, message };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 9 {
            return Err(bad(format!("expected 9 columns, got {}", cells.len())));
        }
        let n = cells[0].parse::<usize>().map_err(|_| bad(format!("bad step index `{}`", cells[0])))?;
        let mut v = [0.0; 8];
        for (slot, cell) in v.iter_mut().zip(&cells[1..]) {
            *slot = cell.parse::<f64>().map_err(|_| bad(format!("bad number `{cell}`")))?;
        }
        out.push(StepRecord {
            n,
            t: v[0],
            tau: v[1],
            gamma: v[2],
            energy: v[3],
            xi: v[4],
            eta: v[5],
            mass: v[6],
            dissipation: v[7],
        });
    }
    Ok(out)
}

const SNAPSHOT_MAGIC: &str = "CHSNAP v1";

/// Decoded `CHSNAP v1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

/// Writes `CHSNAP v1 dim=<d> N=<N> L=<L> t=<t>\n` followed by the physical
/// values as little-endian f64, row-major.
pub fn write_snapshot(field: &SpectralField, t: f64, path: &Path) -> Result<(), FormatError> {
    let field = field.to_physical().map_err(|e| FormatError::Field(e.to_string()))?;
    let values = field.physical().expect("physical values present");
    let grid = field.grid();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{SNAPSHOT_MAGIC} dim={} N={} L={} t={}", grid.dim(), grid.n(), grid.length(), t)?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile, FormatError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SnapshotFile, FormatError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| FormatError::Header("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| FormatError::Header("not UTF-8".into()))?;
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| FormatError::Header(format!("bad magic in `{header}`")))?;
    let (mut dim, mut n, mut length, mut t) = (None, None, None, None);
    for token in rest.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| FormatError::Header(format!("bad token `{token}`")))?;
        let bad = || FormatError::Header(format!("bad value in `{token}`"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "N" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            "L" => length = Some(v.parse::<f64>().map_err(|_| bad())?),
            "t" => t = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(FormatError::Header(format!("unknown header field `{k}`"))),
        }
    }
    let missing = |f: &str| FormatError::Header(format!("missing `{f}`"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let n = n.ok_or_else(|| missing("N"))?;
    let length = length.ok_or_else(|| missing("L"))?;
    let t = t.ok_or_else(|| missing("t"))?;
    if !(dim == 2 || dim == 3) {
        return Err(FormatError::Header(format!("dim must be 2 or 3, got {dim}")));
    }
    let payload = &bytes[newline + 1..];
    let expected = n
        .checked_pow(dim as u32)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| FormatError::Header("grid too large".into()))?;
    if payload.len() != expected {
        return Err(FormatError::Payload { expected, got: payload.len() });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(SnapshotFile { dim, n, length, t, values })
}
