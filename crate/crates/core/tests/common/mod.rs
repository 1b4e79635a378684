//! Dense reference implementation of one step, built from explicit DFT sums
//! and a direct LU solve.  Shared by the oracle and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ch_gsav::{GsavState, SpectralField};
use nalgebra::{DMatrix, DVector};

pub struct Dense {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    /// Per-point coordinates.
    pub points: Vec<Vec<f64>>,
    /// Per-mode wavevectors, FFT ordering (first axis slowest).
    pub modes: Vec<Vec<f64>>,
    /// Per-mode, per-direction flag: index is the Nyquist one.
    pub nyquist: Vec<Vec<bool>>,
    pub lap: DMatrix<f64>,
    pub grads: Vec<DMatrix<f64>>,
}

fn split(flat: usize, n: usize, dim: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    let mut rest = flat;
    for d in (0..dim).rev() {
        idx[d] = rest % n;
        rest /= n;
    }
    idx
}

impl Dense {
    pub fn new(dim: usize, n: usize, length: f64) -> Dense {
        let len = n.pow(dim as u32);
        let h = length / n as f64;
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(len);
        let mut modes: Vec<Vec<f64>> = Vec::with_capacity(len);
        let mut nyquist: Vec<Vec<bool>> = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = split(flat, n, dim);
            points.push(idx.iter().map(|&i| i as f64 * h).collect());
            let signed: Vec<i64> = idx.iter().map(|&i| if i < n / 2 { i as i64 } else { i as i64 - n as i64 }).collect();
            modes.push(signed.iter().map(|&m| 2.0 * PI * m as f64 / length).collect());
            nyquist.push(signed.iter().map(|&m| m == -(n as i64) / 2).collect());
        }
        // Operator matrices (1/len) Σ_m s(m) e^{i k_m·(x_j − x_l)}, real part.
        let mut lap = DMatrix::zeros(len, len);
        let mut grads = vec![DMatrix::zeros(len, len); dim];
        for j in 0..len {
            for l in 0..len {
                let mut acc_lap = 0.0;
                let mut acc_grad = vec![0.0; dim];
                for m in 0..len {
                    let k = &modes[m];
                    let phase: f64 = (0..dim).map(|d| k[d] * (points[j][d] - points[l][d])).sum();
                    let (s, c) = phase.sin_cos();
                    let k2: f64 = k.iter().map(|v| v * v).sum();
                    acc_lap -= k2 * c;
                    for d in 0..dim {
                        if !nyquist[m][d] {
                            // Re(i k e^{iφ}) = −k sin φ
                            acc_grad[d] -= k[d] * s;
                        }
                    }
                }
                lap[(j, l)] = acc_lap / len as f64;
                for d in 0..dim {
                    grads[d][(j, l)] = acc_grad[d] / len as f64;
                }
            }
        }
        Dense { dim, n, length, points, modes, nyquist, lap, grads }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn cell_volume(&self) -> f64 {
        (self.length / self.n as f64).powi(self.dim as i32)
    }

    /// `û_m = (1/len) Σ_j u_j e^{−i k_m·x_j}` as `(re, im)`.
    pub fn coefficients(&self, u: &DVector<f64>) -> Vec<(f64, f64)> {
        let len = self.len();
        (0..len)
            .map(|m| {
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..len {
                    let phase: f64 = (0..self.dim).map(|d| self.modes[m][d] * self.points[j][d]).sum();
                    re += u[j] * phase.cos();
                    im -= u[j] * phase.sin();
                }
                (re / len as f64, im / len as f64)
            })
            .collect()
    }

    pub fn grad_sq(&self, u: &DVector<f64>) -> f64 {
        self.grads.iter().map(|g| (g * u).norm_squared()).sum::<f64>() * self.cell_volume()
    }

    pub fn energy(&self, u: &DVector<f64>, eps: f64) -> f64 {
        let well: f64 = u.iter().map(|v| (v * v - 1.0).powi(2)).sum::<f64>() / (4.0 * eps * eps);
        0.5 * self.grad_sq(u) + well * self.cell_volume()
    }
}

pub struct DenseStep {
    pub phi_bar: DVector<f64>,
    pub phi: DVector<f64>,
    pub gamma: f64,
    pub energy: f64,
    pub xi: f64,
    pub dissipation: f64,
}

pub fn values(field: &SpectralField) -> DVector<f64> {
    DVector::from_vec(field.to_physical().unwrap().physical().unwrap().to_vec())
}

/// One step of size `tau` from the history stored in `state`.
pub fn dense_step(dense: &Dense, state: &GsavState, tau: f64) -> DenseStep {
    let eps = state.eps();
    let (p1, p2) = state.phi_history();
    let (q1, q2) = state.phi_bar_history();
    let (p1, p2, q1, q2) = (values(p1), values(p2), values(q1), values(q2));
    let (b0, b1, extrap) = match state.prev_tau() {
        None => (1.0 / tau, 0.0, p1.clone()),
        Some(prev) => {
            let r = tau / prev;
            // interpolation weights of the quadratic through the last three levels
            let b0 = (1.0 + 2.0 * r) / (tau * (1.0 + r));
            let b1 = -r * r / (tau * (1.0 + r));
            (b0, b1, &p1 * (1.0 + r) - &p2 * r)
        }
    };
    let forcing = extrap.map(|u| (u * u * u - u) / (eps * eps));
    let len = dense.len();
    let system = DMatrix::<f64>::identity(len, len) * b0 + &dense.lap * &dense.lap;
    let rhs = &q1 * b0 - (&q1 - &q2) * b1 + &dense.lap * &forcing;
    let phi_bar = system.lu().solve(&rhs).expect("nonsingular system");
    let mu = -(&dense.lap * &phi_bar) + &forcing;
    let g = dense.grad_sq(&mu);
    let energy = dense.energy(&phi_bar, eps);
    let gamma = state.gamma() / (1.0 + tau * g / (energy + 1.0));
    let xi = gamma / (energy + 1.0);
    let eta = xi * (2.0 - xi);
    DenseStep { phi: &phi_bar * eta, phi_bar, gamma, energy, xi, dissipation: tau * xi * g }
}

/// Largest coefficient-wise gap between a library field and a dense vector.
pub fn coefficient_gap(dense: &Dense, field: &SpectralField, reference: &DVector<f64>) -> f64 {
    let ours = field.to_coefficients();
    let ours = ours.coefficients().unwrap();
    dense
        .coefficients(reference)
        .iter()
        .zip(ours)
        .map(|((re, im), z)| (re - z.re).hypot(im - z.im))
        .fold(0.0, f64::max)
}

/// Random state at `N = 8` in 2D: random values in (−1, 1), then up to three
/// random steps so the history is non-trivial.
pub fn random_state(seed: u64) -> (GsavState, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = ch_gsav::Grid::new(2, 8, 2.0 * PI).unwrap();
    let vals: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eps = rng.random_range(0.15..0.6);
    let phi0 = SpectralField::from_physical(grid, vals).unwrap();
    let mut state = GsavState::new(&phi0, eps).unwrap();
    let mut tau: f64 = rng.random_range(1e-4..1e-2);
    for _ in 0..rng.random_range(0..4usize) {
        state.advance(tau).unwrap();
        tau *= rng.random_range(0.25..4.0);
    }
    (state, tau)
}
