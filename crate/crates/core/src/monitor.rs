//! Invariant checks over a sequence of step records.

use std::fmt;

use crate::bdf::{r_max_root, DEFAULT_DELTA};
use crate::stepper::StepRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorTolerances {
    /// Allowed growth of γ per step, relative to γ⁰.
    pub gamma_slack: f64,
    /// `|(γⁿ⁻¹ − γⁿ) − dissipation| ≤ dissipation_rel · γⁿ⁻¹`.
    pub dissipation_rel: f64,
    /// `|massⁿ − mass¹| ≤ mass_abs · mass_scale`.
    pub mass_abs: f64,
    /// Scale for the mass drift; `None` uses `max(|mass¹|, 1)`.
    pub mass_scale: Option<f64>,
    /// Largest admissible `τ_{n}/τ_{n−1}`.
    pub max_ratio: f64,
}

impl Default for MonitorTolerances {
    fn default() -> Self {
        MonitorTolerances {
            gamma_slack: 1e-13,
            dissipation_rel: 1e-12,
            mass_abs: 1e-10,
            mass_scale: None,
            max_ratio: r_max_root() - DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    GammaIncrease,
    NonPositiveGamma,
    NonPositiveXi,
    NegativeDissipation,
    DissipationIdentity,
    MassDrift,
    RatioBound,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub n: usize,
    pub kind: ViolationKind,
    /// The offending quantity (a difference, a ratio, or the value itself).
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {:?} ({:e})", self.n, self.kind, self.value)
    }
}

/// Checks every record against the scheme's invariants: γ positive and
/// non-increasing, ξ positive, dissipation non-negative and equal to the
/// drop in γ, mass conserved, step ratios bounded.
pub fn check_records(records: &[StepRecord], tol: &MonitorTolerances) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = records.first() else {
        return out;
    };
    let gamma0 = first.gamma + first.dissipation;
    let mass_scale = tol.mass_scale.unwrap_or(first.mass.abs().max(1.0));
    let mut push = |n, kind, value| out.push(Violation { n, kind, value });
    let mut prev_gamma = gamma0;
    let mut prev_tau: Option<f64> = None;
    for r in records {
        let fields = [r.t, r.tau, r.gamma, r.energy, r.xi, r.eta, r.mass, r.dissipation];
        if fields.iter().any(|v| !v.is_finite()) {
            push(r.n, ViolationKind::NonFinite, f64::NAN);
            prev_gamma = r.gamma;
            continue;
        }
        if r.gamma - prev_gamma > tol.gamma_slack * gamma0 {
            push(r.n, ViolationKind::GammaIncrease, r.gamma - prev_gamma);
        }
        if r.gamma <= 0.0 {
            push(r.n, ViolationKind::NonPositiveGamma, r.gamma);
        }
        if r.xi <= 0.0 {
            push(r.n, ViolationKind::NonPositiveXi, r.xi);
        }
        if r.dissipation < 0.0 {
            push(r.n, ViolationKind::NegativeDissipation, r.dissipation);
        }
        let defect = (prev_gamma - r.gamma) - r.dissipation;
        if defect.abs() > tol.dissipation_rel * prev_gamma {
            push(r.n, ViolationKind::DissipationIdentity, defect);
        }
        let drift = r.mass - first.mass;
        if drift.abs() > tol.mass_abs * mass_scale {
            push(r.n, ViolationKind::MassDrift, drift);
        }
        if let Some(p) = prev_tau {
            let ratio = r.tau / p;
            if ratio > tol.max_ratio * (1.0 + 1e-12) {
                push(r.n, ViolationKind::RatioBound, ratio);
            }
        }
        prev_gamma = r.gamma;
        prev_tau = Some(r.tau);
    }
    out
}
