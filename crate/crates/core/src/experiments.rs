//! Initial conditions and the experiment harnesses: temporal convergence on
//! random meshes, the kissing-bubbles coalescence, and coarsening in 2D/3D.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adaptive::{run_with_policy, run_with_policy_observed, AdaptiveParams, ControlError, StepPolicy};
use crate::bdf::{random_mesh, BdfError, TimeMesh};
use crate::spectral::{Grid, SpectralError, SpectralField};
use crate::stepper::{energy, GsavState, StepError, StepRecord, StepperOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("initial condition `{ic}` needs a {expected}D grid, got {got}D")]
    DimMismatch { ic: &'static str, expected: usize, got: usize },
    #[error("order undefined: coarse and fine step sizes are equal ({0})")]
    DegenerateRatio(f64),
    #[error("invalid experiment setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Mesh(#[from] BdfError),
}

impl From<ExperimentError> for ControlError {
    fn from(e: ExperimentError) -> Self {
        ControlError::InvalidPolicy(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    Convergence,
    KissingBubbles,
    Coarsening2d,
    Coarsening3d,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Convergence,
        ScenarioName::KissingBubbles,
        ScenarioName::Coarsening2d,
        ScenarioName::Coarsening3d,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Convergence => "convergence",
            ScenarioName::KissingBubbles => "kissing_bubbles",
            ScenarioName::Coarsening2d => "coarsening2d",
            ScenarioName::Coarsening3d => "coarsening3d",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Distribution of `Rand(x)` in the random initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RandRange {
    /// `U(-1, 1)`, values in `(0.05, 0.65)`.
    #[default]
    Symmetric,
    /// `U(0, 1)`, values in `(0.35, 0.65)`.
    Unit,
}

/// Grouping inside the kissing-bubble `tanh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KissingGrouping {
    /// `tanh((r_i − d_i)/(4ε²))`
    #[default]
    Standard,
    /// `tanh(r_i − d_i/(4ε²))`
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Bubble,
    Kissing { grouping: KissingGrouping, offset: f64 },
    Random(RandRange),
    Constant(f64),
}

/// Offset added to the two-bubble sum so the field takes values near ±1.
pub const KISSING_OFFSET: f64 = 1.0;

/// `−tanh((|x − (π, π)| − 1.5)/(4ε))`.
pub fn ic_bubble(grid: &Arc<Grid>, eps: f64) -> Result<SpectralField, ExperimentError> {
    require_2d(grid, "bubble")?;
    Ok(SpectralField::from_fn(grid.clone(), |x| {
        let d = ((x[0] - PI).powi(2) + (x[1] - PI).powi(2)).sqrt();
        -((d - 1.5) / (4.0 * eps)).tanh()
    }))
}

/// Two unit-radius bubbles centred at `(π ∓ 1, π)`, standard grouping.
pub fn ic_kissing(grid: &Arc<Grid>, eps2: f64) -> Result<SpectralField, ExperimentError> {
    ic_kissing_with(grid, eps2, KissingGrouping::Standard, KISSING_OFFSET)
}

pub fn ic_kissing_with(
    grid: &Arc<Grid>,
    eps2: f64,
    grouping: KissingGrouping,
    offset: f64,
) -> Result<SpectralField, ExperimentError> {
    require_2d(grid, "kissing")?;
    let centres = [(PI - 1.0, PI), (PI + 1.0, PI)];
    let radius = 1.0;
    Ok(SpectralField::from_fn(grid.clone(), |x| {
        offset
            + centres
                .iter()
                .map(|&(cx, cy)| {
                    let d = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
                    match grouping {
                        KissingGrouping::Standard => ((radius - d) / (4.0 * eps2)).tanh(),
                        KissingGrouping::Verbatim => (radius - d / (4.0 * eps2)).tanh(),
                    }
                })
                .sum::<f64>()
    }))
}

/// `0.35 + 0.3 Rand(x)` with iid draws, deterministic per seed.
pub fn ic_random(grid: &Arc<Grid>, seed: u64, range: RandRange) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| {
            let r = match range {
                RandRange::Symmetric => rng.random_range(-1.0..1.0),
                RandRange::Unit => rng.random_range(0.0..1.0),
            };
            0.35 + 0.3 * r
        })
        .collect();
    SpectralField::from_physical(grid.clone(), values).expect("length matches grid")
}

fn require_2d(grid: &Grid, ic: &'static str) -> Result<(), ExperimentError> {
    if grid.dim() != 2 {
        return Err(ExperimentError::DimMismatch { ic, expected: 2, got: grid.dim() });
    }
    Ok(())
}

impl InitialCondition {
    pub fn build(&self, grid: &Arc<Grid>, eps: f64, seed: u64) -> Result<SpectralField, ExperimentError> {
        match *self {
            InitialCondition::Bubble => ic_bubble(grid, eps),
            InitialCondition::Kissing { grouping, offset } => ic_kissing_with(grid, eps * eps, grouping, offset),
            InitialCondition::Random(range) => Ok(ic_random(grid, seed, range)),
            InitialCondition::Constant(c) => Ok(SpectralField::constant(grid.clone(), c)),
        }
    }
}

/// A complete simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub ic: InitialCondition,
    pub eps: f64,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub horizon: f64,
    pub policy: StepPolicy,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub dealias: bool,
}

impl Scenario {
    /// Parameters used for each scenario in the reference experiments.
    pub fn defaults(name: ScenarioName) -> Scenario {
        let base = Scenario {
            name,
            ic: InitialCondition::Bubble,
            eps: 0.2,
            dim: 2,
            n: 128,
            length: 2.0 * PI,
            horizon: 0.1,
            policy: StepPolicy::Fixed(1e-4),
            seed: 0,
            snapshot_times: vec![0.0, 0.1],
            dealias: false,
        };
        match name {
            ScenarioName::Convergence => Scenario {
                policy: StepPolicy::Prescribed(random_mesh(0.1, 400, 0).expect("valid mesh")),
                ..base
            },
            ScenarioName::KissingBubbles => Scenario {
                ic: InitialCondition::Kissing { grouping: KissingGrouping::Standard, offset: KISSING_OFFSET },
                eps: 0.1_f64.sqrt(),
                horizon: 1.0,
                policy: StepPolicy::Adaptive(AdaptiveParams::new(1e-4, 7e-3, 0.01)),
                snapshot_times: vec![0.0, 0.1, 0.2, 0.5, 0.8, 1.0],
                ..base
            },
            ScenarioName::Coarsening2d => Scenario {
                ic: InitialCondition::Random(RandRange::Symmetric),
                eps: 0.3,
                horizon: 3.0,
                policy: StepPolicy::Adaptive(AdaptiveParams::new(1e-5, 1e-4, 0.01)),
                snapshot_times: vec![0.0, 0.1, 0.2, 1.0, 2.0, 3.0],
                ..base
            },
            ScenarioName::Coarsening3d => Scenario {
                ic: InitialCondition::Random(RandRange::Symmetric),
                dim: 3,
                n: 48,
                eps: 2.0 * PI / 48.0,
                horizon: 1.8,
                policy: StepPolicy::Adaptive(AdaptiveParams::new(4e-5, 1e-4, 1.0)),
                snapshot_times: vec![0.0, 0.2, 0.4, 0.8, 1.0, 1.8],
                ..base
            },
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ExperimentError> {
        Ok(Grid::new(self.dim, self.n, self.length)?)
    }

    pub fn initial_field(&self) -> Result<SpectralField, ExperimentError> {
        self.ic.build(&self.grid()?, self.eps, self.seed)
    }

    pub fn initial_state(&self) -> Result<GsavState, ExperimentError> {
        let phi0 = self.initial_field()?;
        Ok(GsavState::with_options(&phi0, self.eps, StepperOptions { dealias: self.dealias })?)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: SpectralField,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: GsavState,
}

/// Runs a scenario, landing exactly on each snapshot time.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput, ExperimentError> {
    run_scenario_with(s, |_, _| Ok(()))
}

/// As [`run_scenario`], handing every record and snapshot to `on_event` as
/// it is produced.
pub fn run_scenario_with(
    s: &Scenario,
    mut on_event: impl FnMut(&StepRecord, Option<&Snapshot>) -> Result<(), ExperimentError>,
) -> Result<ScenarioOutput, ExperimentError> {
    let mut state = s.initial_state()?;
    let slack = 1e-12 * s.horizon;
    let mut snapshots = Vec::new();
    if s.snapshot_times.iter().any(|&t| t.abs() <= slack) {
        snapshots.push(Snapshot { t: 0.0, field: state.phi().clone() });
    }
    let mut pending: Vec<f64> = s.snapshot_times.iter().copied().filter(|&t| t > slack).collect();
    pending.sort_by(f64::total_cmp);
    let mut cursor = 0;
    let records = run_with_policy_observed(&mut state, &s.policy, s.horizon, &pending, |rec, st| {
        let mut snap = None;
        while cursor < pending.len() && (pending[cursor] - rec.t).abs() <= slack {
            snap = Some(Snapshot { t: rec.t, field: st.phi().clone() });
            cursor += 1;
        }
        if let Some(snap) = &snap {
            snapshots.push(snap.clone());
        }
        on_event(rec, snap.as_ref()).map_err(ControlError::from)
    })?;
    Ok(ScenarioOutput { records, snapshots, final_state: state })
}

/// `(log e_c − log e_f)/(log τ_c − log τ_f)`.
pub fn order_of(e_coarse: f64, e_fine: f64, tau_coarse: f64, tau_fine: f64) -> Result<f64, ExperimentError> {
    if tau_coarse == tau_fine {
        return Err(ExperimentError::DegenerateRatio(tau_coarse));
    }
    if !(e_coarse > 0.0 && e_fine > 0.0 && tau_coarse > 0.0 && tau_fine > 0.0) {
        return Err(ExperimentError::Invalid("order needs positive errors and steps".into()));
    }
    Ok((e_coarse.ln() - e_fine.ln()) / (tau_coarse.ln() - tau_fine.ln()))
}

/// Setup of the temporal convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub base_k: usize,
    pub levels: usize,
    pub horizon: f64,
    pub eps: f64,
    pub n: usize,
    pub length: f64,
    pub seed: u64,
    /// Steps of the fixed-step reference run; 0 means 32 × the finest level.
    pub ref_steps: usize,
    pub dealias: bool,
    /// Maximum number of levels run concurrently.
    pub threads: usize,
}

impl Default for ConvergenceSetup {
    fn default() -> Self {
        ConvergenceSetup {
            base_k: 400,
            levels: 4,
            horizon: 0.1,
            eps: 0.2,
            n: 128,
            length: 2.0 * PI,
            seed: 0,
            ref_steps: 0,
            dealias: false,
            threads: default_threads(),
        }
    }
}

/// `CHSOLVER_THREADS` if set and positive, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("CHSOLVER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

impl ConvergenceSetup {
    pub fn level_steps(&self) -> Vec<usize> {
        (0..self.levels).map(|i| self.base_k << i).collect()
    }

    pub fn reference_steps(&self) -> usize {
        if self.ref_steps > 0 {
            self.ref_steps
        } else {
            32 * self.level_steps().last().copied().unwrap_or(self.base_k)
        }
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub k: usize,
    pub tau_max: f64,
    pub h1_error: f64,
    pub h1_order: Option<f64>,
    pub gamma_error: f64,
    pub gamma_order: Option<f64>,
    pub max_ratio: f64,
    /// `max_n |1 − ξⁿ|` along the run.
    pub xi_defect: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `E(φ_ref(T)) + 1`
    pub reference_energy: f64,
    pub reference_gamma: f64,
}

struct LevelResult {
    phi: SpectralField,
    gamma: f64,
    xi_defect: f64,
    mesh: TimeMesh,
}

fn run_level(phi0: &SpectralField, setup: &ConvergenceSetup, mesh: TimeMesh) -> Result<LevelResult, ExperimentError> {
    let mut state = GsavState::with_options(phi0, setup.eps, StepperOptions { dealias: setup.dealias })?;
    let records = run_with_policy(&mut state, &StepPolicy::Prescribed(mesh.clone()), mesh.horizon())?;
    let xi_defect = records.iter().map(|r| (1.0 - r.xi).abs()).fold(0.0, f64::max);
    Ok(LevelResult { phi: state.phi().clone(), gamma: state.gamma(), xi_defect, mesh })
}

/// Errors at `t = T` against a fine fixed-step reference run of the same
/// scheme on the same grid, for random meshes with `K, 2K, 4K, …` steps.
/// Level `i` uses mesh seed `seed + i`.
pub fn run_convergence(setup: &ConvergenceSetup) -> Result<ConvergenceReport, ExperimentError> {
    if setup.levels == 0 || setup.base_k < 2 {
        return Err(ExperimentError::Invalid("need levels >= 1 and base_k >= 2".into()));
    }
    let grid = Grid::new(2, setup.n, setup.length)?;
    let phi0 = ic_bubble(&grid, setup.eps)?;

    let mut jobs: Vec<TimeMesh> = vec![TimeMesh::uniform(setup.horizon, setup.reference_steps())?];
    for (i, k) in setup.level_steps().into_iter().enumerate() {
        jobs.push(random_mesh(setup.horizon, k, setup.seed.wrapping_add(i as u64))?);
    }

    let threads = setup.threads.max(1);
    let mut results: Vec<Option<Result<LevelResult, ExperimentError>>> = (0..jobs.len()).map(|_| None).collect();
    let queue: Vec<(usize, TimeMesh)> = jobs.into_iter().enumerate().collect();
    for batch in queue.chunks(threads) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|(i, mesh)| {
                    let phi0 = &phi0;
                    (*i, scope.spawn(move || run_level(phi0, setup, mesh.clone())))
                })
                .collect();
            for (i, h) in handles {
                results[i] = Some(h.join().expect("convergence level panicked"));
            }
        });
    }
    let mut results = results.into_iter().map(|r| r.expect("every level ran"));
    let reference = results.next().expect("reference run")?;
    let reference_energy = energy(&reference.phi, setup.eps)? + 1.0;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for level in results {
        let level = level?;
        let diff = SpectralField::linear_combination(1.0, &level.phi, -1.0, &reference.phi)?;
        let h1_error = diff.h1_norm();
        let gamma_error = (level.gamma - reference_energy).abs();
        let tau_max = level.mesh.max_step();
        let (h1_order, gamma_order) = match rows.last() {
            Some(prev) => (
                Some(order_of(prev.h1_error, h1_error, prev.tau_max, tau_max)?),
                Some(order_of(prev.gamma_error, gamma_error, prev.tau_max, tau_max)?),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            k: level.mesh.len(),
            tau_max,
            h1_error,
            h1_order,
            gamma_error,
            gamma_order,
            max_ratio: level.mesh.max_ratio(),
            xi_defect: level.xi_defect,
        });
    }
    Ok(ConvergenceReport { rows, reference_energy, reference_gamma: reference.gamma })
}

/// Connected components of `{φ > 0}` on the collocation grid, using
/// nearest-neighbour adjacency with periodic wrap-around.
pub fn count_positive_components(field: &SpectralField) -> Result<usize, ExperimentError> {
    let grid = field.grid().clone();
    let values = field.to_physical()?;
    let values = values.physical().expect("physical values");
    let (n, dim) = (grid.n(), grid.dim());
    let mut seen = vec![false; values.len()];
    let mut stack = Vec::new();
    let mut idx = vec![0; dim];
    let mut components = 0;
    for start in 0..values.len() {
        if seen[start] || values[start] <= 0.0 {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            grid.unflatten(cell, &mut idx);
            for axis in 0..dim {
                for step in [1, n - 1] {
                    let mut nb = idx.clone();
                    nb[axis] = (nb[axis] + step) % n;
                    let flat = grid.flatten(&nb);
                    if !seen[flat] && values[flat] > 0.0 {
                        seen[flat] = true;
                        stack.push(flat);
                    }
                }
            }
        }
    }
    Ok(components)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(2, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn bubble_profile() {
        let g = grid(64);
        let f = ic_bubble(&g, 0.2).unwrap();
        let v = f.physical().unwrap();
        let centre = g.flatten(&[32, 32]);
        assert!((v[centre] - (1.875_f64).tanh()).abs() < 1e-12);
        assert!((v[centre] - 0.954).abs() < 1e-3);
        assert!((v[0] + 1.0).abs() < 0.05);
        // isotropy: (π + a, π) vs (π, π + a)
        assert!((v[g.flatten(&[40, 32])] - v[g.flatten(&[32, 40])]).abs() < 1e-12);
        let g3 = Grid::new(3, 8, 2.0 * PI).unwrap();
        assert!(matches!(ic_bubble(&g3, 0.2), Err(ExperimentError::DimMismatch { .. })));
    }

    #[test]
    fn kissing_symmetries() {
        let g = grid(64);
        let f = ic_kissing(&g, 0.1).unwrap();
        let v = f.physical().unwrap();
        // x = π and y = π are mirror lines; index i maps to 64 − i
        for i in 0..64 {
            for j in 0..64 {
                let here = v[g.flatten(&[i, j])];
                assert!((here - v[g.flatten(&[(64 - i) % 64, j])]).abs() < 1e-12);
                assert!((here - v[g.flatten(&[i, (64 - j) % 64])]).abs() < 1e-12);
            }
        }
        let verbatim = ic_kissing_with(&g, 0.1, KissingGrouping::Verbatim, 0.0).unwrap();
        assert_ne!(verbatim.physical().unwrap(), v);
        assert!(ic_kissing(&Grid::new(3, 8, 1.0).unwrap(), 0.1).is_err());
    }

    #[test]
    fn random_ic_range_and_reproducibility() {
        let g = grid(48);
        let f = ic_random(&g, 7, RandRange::Symmetric);
        let v = f.physical().unwrap();
        assert!(v.iter().all(|&x| x > 0.05 && x < 0.65));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.35).abs() < 0.01);
        assert_eq!(ic_random(&g, 7, RandRange::Symmetric).physical().unwrap(), v);
        let u = ic_random(&g, 7, RandRange::Unit);
        assert!(u.physical().unwrap().iter().all(|&x| (0.35..0.65).contains(&x)));
    }

    #[test]
    fn order_examples() {
        assert!((order_of(4e-4, 1e-4, 2e-3, 1e-3).unwrap() - 2.0).abs() < 1e-12);
        let table = order_of(1.5974e-4, 3.6817e-5, 2.0643e-4, 1.0229e-4).unwrap();
        assert!((table - 2.09).abs() < 5e-3, "{table}");
        assert_eq!(order_of(1e-3, 1e-3, 2.0, 1.0).unwrap(), 0.0);
        assert!(matches!(order_of(1.0, 0.5, 1.0, 1.0), Err(ExperimentError::DegenerateRatio(_))));
    }

    #[test]
    fn scenario_names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert!("nope".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn components_count() {
        let g = grid(32);
        let two = SpectralField::from_fn(g.clone(), |x| (x[0]).cos());
        // cos x > 0 on a band that wraps across x = 0: one component
        assert_eq!(count_positive_components(&two).unwrap(), 1);
        let four = SpectralField::from_fn(g.clone(), |x| x[0].sin() * x[1].sin());
        assert_eq!(count_positive_components(&four).unwrap(), 2);
        assert_eq!(count_positive_components(&SpectralField::constant(g, -1.0)).unwrap(), 0);
    }

    #[test]
    fn scenario_snapshots_land_exactly() {
        let mut s = Scenario::defaults(ScenarioName::Coarsening2d);
        s.n = 16;
        s.horizon = 2e-3;
        s.snapshot_times = vec![0.0, 7.5e-4, 2e-3];
        let out = run_scenario(&s).unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 7.5e-4).abs() < 1e-15 && (times[2] - 2e-3).abs() < 1e-15);
    }
}
