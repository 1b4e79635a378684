//! Step-size policies and the driver that runs the stepper under them.

use thiserror::Error;

use crate::bdf::{r_max_root, BdfError, TimeMesh, DEFAULT_DELTA};
use crate::stepper::{GsavState, StepError, StepRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("prescribed mesh exhausted after {0} steps")]
    MeshExhausted(usize),
    #[error("invalid step policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Mesh(#[from] BdfError),
}

/// Parameters of the energy-rate controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    pub tau_min: f64,
    pub tau_max: f64,
    /// Weight on the squared energy rate.
    pub alpha: f64,
    /// Cap on `τ_{n+1}/τ_n`; at most `r_max − δ`.
    pub r_max_eff: f64,
}

impl AdaptiveParams {
    /// Parameters with `r_max_eff = r_max − δ` for the default `δ`.
    pub fn new(tau_min: f64, tau_max: f64, alpha: f64) -> Self {
        AdaptiveParams { tau_min, tau_max, alpha, r_max_eff: r_max_root() - DEFAULT_DELTA }
    }

    pub fn validate(&self, delta: f64) -> Result<(), ControlError> {
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite()) {
            return Err(ControlError::InvalidPolicy(format!(
                "need 0 < tau_min <= tau_max, got tau_min = {}, tau_max = {}",
                self.tau_min, self.tau_max
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ControlError::InvalidPolicy(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        let bound = r_max_root() - delta;
        if !(self.r_max_eff > 0.0 && self.r_max_eff <= bound) {
            return Err(ControlError::InvalidPolicy(format!(
                "r_max_eff = {} must lie in (0, {bound}]",
                self.r_max_eff
            )));
        }
        Ok(())
    }

    /// Unclamped proposal `τ* = τ_max / sqrt(1 + α |δ_t E|²)`.
    pub fn proposal(&self, energy_rate: f64) -> f64 {
        self.tau_max / (1.0 + self.alpha * energy_rate * energy_rate).sqrt()
    }

    /// `min(max(τ*, τ_min), τ_max, r_max_eff · τ_prev)`.
    pub fn next_step(&self, prev_tau: f64, energy_rate: f64) -> f64 {
        self.proposal(energy_rate)
            .max(self.tau_min)
            .min(self.tau_max)
            .min(self.r_max_eff * prev_tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    Prescribed(TimeMesh),
    Adaptive(AdaptiveParams),
}

impl StepPolicy {
    pub fn validate(&self, delta: f64) -> Result<(), ControlError> {
        match self {
            StepPolicy::Fixed(tau) if !(tau.is_finite() && *tau > 0.0) => {
                Err(ControlError::InvalidPolicy(format!("fixed step must be positive, got {tau}")))
            }
            StepPolicy::Fixed(_) => Ok(()),
            StepPolicy::Prescribed(mesh) => Ok(mesh.check_a1(delta)?),
            StepPolicy::Adaptive(p) => p.validate(delta),
        }
    }
}

/// Discrete energy rate `δ_t E(t_n) = (γⁿ − γⁿ⁻¹)/τ_n`.
pub fn energy_rate(prev_gamma: f64, curr_gamma: f64, tau: f64) -> f64 {
    (curr_gamma - prev_gamma) / tau
}

/// Stateful step chooser: walks a prescribed mesh or applies the controller.
#[derive(Debug, Clone)]
pub struct StepController {
    policy: StepPolicy,
    cursor: usize,
}

impl StepController {
    pub fn new(policy: StepPolicy) -> Self {
        StepController { policy, cursor: 0 }
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    /// Proposes the next step.  `last` is `(τ_n, γⁿ⁻¹, γⁿ)` of the step just
    /// taken, or `None` before the first step; the adaptive policy opens
    /// with `τ_min`.
    pub fn next_step(&mut self, last: Option<(f64, f64, f64)>) -> Result<f64, ControlError> {
        match &self.policy {
            StepPolicy::Fixed(tau) => Ok(*tau),
            StepPolicy::Prescribed(mesh) => {
                let tau = mesh
                    .steps()
                    .get(self.cursor)
                    .copied()
                    .ok_or(ControlError::MeshExhausted(mesh.len()))?;
                self.cursor += 1;
                Ok(tau)
            }
            StepPolicy::Adaptive(p) => Ok(match last {
                None => p.tau_min,
                Some((tau, prev_gamma, curr_gamma)) => {
                    p.next_step(tau, energy_rate(prev_gamma, curr_gamma, tau))
                }
            }),
        }
    }
}

/// Remaining intervals shorter than this fraction of the horizon count as reached.
const LANDING_TOLERANCE: f64 = 1e-12;

/// Advances `state` until `horizon`, shortening steps to land exactly on
/// every time in `stops` (and on the horizon).  `on_step` sees each record
/// and the updated state.
pub fn run_with_policy_observed(
    state: &mut GsavState,
    policy: &StepPolicy,
    horizon: f64,
    stops: &[f64],
    mut on_step: impl FnMut(&StepRecord, &GsavState) -> Result<(), ControlError>,
) -> Result<Vec<StepRecord>, ControlError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ControlError::InvalidPolicy(format!("horizon must be positive, got {horizon}")));
    }
    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > 0.0 && s < horizon).collect();
    targets.push(horizon);
    targets.sort_by(f64::total_cmp);
    let slack = LANDING_TOLERANCE * horizon;
    let growth_cap = match policy {
        StepPolicy::Adaptive(p) => p.r_max_eff,
        _ => r_max_root() - DEFAULT_DELTA,
    };

    let mut controller = StepController::new(policy.clone());
    let mut records = Vec::new();
    let mut last = None;
    let mut next_target = 0;
    // Prescribed meshes are followed verbatim.
    let prescribed = matches!(policy, StepPolicy::Prescribed(_));
    while horizon - state.time() > slack {
        while next_target < targets.len() && targets[next_target] - state.time() <= slack {
            next_target += 1;
        }
        let mut tau = controller.next_step(last)?;
        if !prescribed {
            // a step shortened to hit a stop must not break A1 afterwards
            if let Some(prev) = state.prev_tau() {
                tau = tau.min(growth_cap * prev);
            }
            let remaining = targets[next_target] - state.time();
            if tau >= remaining - slack {
                tau = remaining;
            }
        }
        let prev_gamma = state.gamma();
        let record = state.advance(tau)?;
        on_step(&record, state)?;
        last = Some((tau, prev_gamma, record.gamma));
        records.push(record);
    }
    Ok(records)
}

/// Advances `state` until `horizon`; see [`run_with_policy_observed`].
pub fn run_with_policy(
    state: &mut GsavState,
    policy: &StepPolicy,
    horizon: f64,
) -> Result<Vec<StepRecord>, ControlError> {
    run_with_policy_observed(state, policy, horizon, &[], |_, _| Ok(()))
}
