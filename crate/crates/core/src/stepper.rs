//! The gSAV IMEX BDF2 time integrator.
//!
//! Each step performs one constant-coefficient solve per Fourier mode for the
//! intermediate field `φ̄ⁿ`, updates the scalar auxiliary energy `γⁿ` in closed
//! form, and rescales `φ̄ⁿ` by the relaxation factor `ηⁿ` to obtain `φⁿ`.
//! `D₂` acts on the `φ̄` history and the extrapolation `B` on the `φ` history.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::bdf::BdfCoeffs;
use crate::spectral::{dealiased_nonlinearity, gradient_energy, Grid, SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite coefficient in the solution of step {step}")]
    NonfiniteField { step: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("interface width must be positive, got {0}")]
    InvalidEps(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Diagnostics emitted for every completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub gamma: f64,
    /// `E(φ̄ⁿ)`
    pub energy: f64,
    pub xi: f64,
    pub eta: f64,
    /// `(φ̄ⁿ, 1)`
    pub mass: f64,
    /// `τ_n ξⁿ ‖∇μⁿ‖²`, equal to `γⁿ⁻¹ − γⁿ`.
    pub dissipation: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepperOptions {
    /// Evaluate `f(Bφ)` with the 3/2 zero-padding rule.
    pub dealias: bool,
}

/// Ginzburg-Landau energy `½‖∇φ‖² + ‖φ² − 1‖²/(4ε²)`.
///
/// The gradient term is taken in coefficient space and the double-well term
/// by collocation quadrature `h^dim Σ (φ² − 1)²/(4ε²)`.
pub fn energy(field: &SpectralField, eps: f64) -> Result<f64, SpectralError> {
    let grid = field.grid();
    let values = field.values()?;
    Ok(0.5 * gradient_energy(grid, &field.coeffs()) + well_energy(grid, &values, eps))
}

fn well_energy(grid: &Grid, values: &[f64], eps: f64) -> f64 {
    let sum: f64 = values.iter().map(|&u| (u * u - 1.0) * (u * u - 1.0)).sum();
    grid.cell_volume() * sum / (4.0 * eps * eps)
}

/// `γⁿ = γⁿ⁻¹ / (1 + τ ‖∇μ‖² / (E + 1))`; never increases and stays positive.
pub fn gamma_from(gamma_prev: f64, tau: f64, grad_mu_sq: f64, energy: f64) -> f64 {
    gamma_prev / (1.0 + tau * grad_mu_sq / (energy + 1.0))
}

/// `ξ = γ/(E + 1)` and `η = ξ(2 − ξ)`.
pub fn relaxation_factors(gamma: f64, energy: f64) -> (f64, f64) {
    let xi = gamma / (energy + 1.0);
    (xi, xi * (2.0 - xi))
}

#[derive(Debug, Clone)]
pub struct GammaUpdate {
    pub gamma: f64,
    pub grad_mu_sq: f64,
    /// `E(φ̄ⁿ)`
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub xi: f64,
    pub eta: f64,
    pub phi: SpectralField,
}

/// Full stepper state: two levels of `φ̄` and `φ`, and the scalar `γⁿ⁻¹`.
#[derive(Debug, Clone)]
pub struct GsavState {
    grid: Arc<Grid>,
    eps: f64,
    options: StepperOptions,
    phi_bar_prev1: SpectralField,
    phi_bar_prev2: SpectralField,
    phi_prev1: SpectralField,
    phi_prev2: SpectralField,
    gamma: f64,
    gamma0: f64,
    xi: f64,
    step_index: usize,
    time: f64,
    prev_tau: Option<f64>,
    initial_mass: f64,
}

struct Solve {
    phi_bar_hat: Vec<Complex64>,
    forcing_hat: Vec<Complex64>,
}

impl GsavState {
    /// Sets `φ̄⁰ = φ⁰ = P_N Φ⁰` and `γ⁰ = E(φ⁰) + 1`.
    pub fn new(phi0: &SpectralField, eps: f64) -> Result<Self, StepError> {
        Self::with_options(phi0, eps, StepperOptions::default())
    }

    pub fn with_options(
        phi0: &SpectralField,
        eps: f64,
        options: StepperOptions,
    ) -> Result<Self, StepError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(StepError::InvalidEps(eps));
        }
        let grid = phi0.grid().clone();
        let projected = phi0.project(grid.n())?.to_physical()?;
        let e0 = energy(&projected, eps)?;
        let gamma0 = e0 + 1.0;
        let initial_mass = projected.mass();
        Ok(GsavState {
            grid,
            eps,
            options,
            phi_bar_prev1: projected.clone(),
            phi_bar_prev2: projected.clone(),
            phi_prev1: projected.clone(),
            phi_prev2: projected,
            gamma: gamma0,
            gamma0,
            xi: 1.0,
            step_index: 0,
            time: 0.0,
            prev_tau: None,
            initial_mass,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn options(&self) -> StepperOptions {
        self.options
    }

    /// `φⁿ⁻¹`, the relaxed solution at the current time.
    pub fn phi(&self) -> &SpectralField {
        &self.phi_prev1
    }

    /// `φ̄ⁿ⁻¹`, the unrelaxed solution at the current time.
    pub fn phi_bar(&self) -> &SpectralField {
        &self.phi_bar_prev1
    }

    pub fn phi_history(&self) -> (&SpectralField, &SpectralField) {
        (&self.phi_prev1, &self.phi_prev2)
    }

    pub fn phi_bar_history(&self) -> (&SpectralField, &SpectralField) {
        (&self.phi_bar_prev1, &self.phi_bar_prev2)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Most recent `ξ`; 1 before the first step.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Number of completed steps.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn prev_tau(&self) -> Option<f64> {
        self.prev_tau
    }

    /// `(φ̄⁰, 1)`.
    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    /// Step weights for a next step of size `tau` (BDF1 on the first step).
    pub fn coeffs_for(&self, tau: f64) -> BdfCoeffs {
        BdfCoeffs::from_steps(tau, self.prev_tau)
    }

    fn check_tau(tau: f64) -> Result<(), StepError> {
        if tau.is_finite() && tau > 0.0 {
            Ok(())
        } else {
            Err(StepError::InvalidStep(tau))
        }
    }

    /// Coefficients of `f(Bφⁿ⁻¹)`.
    fn forcing(&self, coeffs: &BdfCoeffs) -> Result<Vec<Complex64>, StepError> {
        let (a, b) = if self.step_index == 0 {
            (1.0, 0.0)
        } else {
            (coeffs.extrap_plus, -coeffs.extrap_minus)
        };
        if self.options.dealias {
            let p1 = self.phi_prev1.coeffs();
            let p2 = self.phi_prev2.coeffs();
            let extrapolated: Vec<Complex64> = p1.iter().zip(p2.iter()).map(|(x, y)| x * a + y * b).collect();
            return Ok(dealiased_nonlinearity(&self.grid, &extrapolated, self.eps)?);
        }
        let p1 = self.phi_prev1.values()?;
        let p2 = self.phi_prev2.values()?;
        let inv = 1.0 / (self.eps * self.eps);
        let f: Vec<f64> = p1
            .iter()
            .zip(p2.iter())
            .map(|(x, y)| {
                let u = a * x + b * y;
                (u * u * u - u) * inv
            })
            .collect();
        Ok(self.grid.coefficients_of(&f))
    }

    fn solve(&self, tau: f64) -> Result<Solve, StepError> {
        Self::check_tau(tau)?;
        let c = self.coeffs_for(tau);
        let forcing_hat = self.forcing(&c)?;
        let prev1 = self.phi_bar_prev1.coeffs();
        let prev2 = self.phi_bar_prev2.coeffs();
        let symbol = self.grid.laplace_symbol();
        let mut phi_bar_hat = Vec::with_capacity(symbol.len());
        for i in 0..symbol.len() {
            let k2 = symbol[i];
            let rhs = prev1[i] * c.b0 - (prev1[i] - prev2[i]) * c.b1 - forcing_hat[i] * k2;
            phi_bar_hat.push(rhs / (c.b0 + k2 * k2));
        }
        if phi_bar_hat.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(StepError::NonfiniteField { step: self.step_index + 1 });
        }
        Ok(Solve { phi_bar_hat, forcing_hat })
    }

    /// `‖∇μ‖²` with `μ̂ = |k|² φ̄̂ + F̂`.
    fn grad_mu_sq(&self, phi_bar_hat: &[Complex64], forcing_hat: &[Complex64]) -> f64 {
        let mu: Vec<Complex64> = phi_bar_hat
            .iter()
            .zip(forcing_hat)
            .zip(self.grid.laplace_symbol())
            .map(|((p, f), &k2)| p * k2 + f)
            .collect();
        gradient_energy(&self.grid, &mu)
    }

    /// Solves for `φ̄ⁿ` with step `tau`, without changing the state.
    pub fn linear_solve(&self, tau: f64) -> Result<SpectralField, StepError> {
        let s = self.solve(tau)?;
        let values = self.grid.values_of(&s.phi_bar_hat)?;
        Ok(SpectralField::from_parts(self.grid.clone(), values, s.phi_bar_hat))
    }

    /// `γⁿ` and `‖∇μⁿ‖²` for a candidate `φ̄ⁿ` computed with step `tau`.
    pub fn gamma_update(&self, phi_bar: &SpectralField, tau: f64) -> Result<GammaUpdate, StepError> {
        Self::check_tau(tau)?;
        phi_bar.same_grid(&self.phi_bar_prev1)?;
        let forcing_hat = self.forcing(&self.coeffs_for(tau))?;
        let grad_mu_sq = self.grad_mu_sq(&phi_bar.coeffs(), &forcing_hat);
        let energy = energy(phi_bar, self.eps)?;
        Ok(GammaUpdate { gamma: gamma_from(self.gamma, tau, grad_mu_sq, energy), grad_mu_sq, energy })
    }

    /// `ξⁿ`, `ηⁿ` and `φⁿ = ηⁿ φ̄ⁿ` for a given `γⁿ`.
    pub fn relax(&self, phi_bar: &SpectralField, gamma: f64) -> Result<Relaxation, StepError> {
        let e = energy(phi_bar, self.eps)?;
        let (xi, eta) = relaxation_factors(gamma, e);
        Ok(Relaxation { xi, eta, phi: phi_bar.scale(eta) })
    }

    /// Advances one step of size `tau`. The state is left untouched on error.
    pub fn advance(&mut self, tau: f64) -> Result<StepRecord, StepError> {
        let Solve { phi_bar_hat, forcing_hat } = self.solve(tau)?;
        let values = self.grid.values_of(&phi_bar_hat)?;
        let energy = 0.5 * gradient_energy(&self.grid, &phi_bar_hat) + well_energy(&self.grid, &values, self.eps);
        let grad_mu_sq = self.grad_mu_sq(&phi_bar_hat, &forcing_hat);
        let gamma = gamma_from(self.gamma, tau, grad_mu_sq, energy);
        let (xi, eta) = relaxation_factors(gamma, energy);
        let mass = self.grid.volume() * phi_bar_hat[0].re;

        let phi = SpectralField::from_parts(
            self.grid.clone(),
            values.iter().map(|v| v * eta).collect(),
            phi_bar_hat.iter().map(|z| z * eta).collect(),
        );
        let phi_bar = SpectralField::from_parts(self.grid.clone(), values, phi_bar_hat);

        self.phi_bar_prev2 = std::mem::replace(&mut self.phi_bar_prev1, phi_bar);
        self.phi_prev2 = std::mem::replace(&mut self.phi_prev1, phi);
        self.gamma = gamma;
        self.xi = xi;
        self.step_index += 1;
        self.time += tau;
        self.prev_tau = Some(tau);

        Ok(StepRecord {
            n: self.step_index,
            t: self.time,
            tau,
            gamma,
            energy,
            xi,
            eta,
            mass,
            dissipation: tau * xi * grad_mu_sq,
        })
    }
}
