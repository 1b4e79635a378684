//! Variable-step BDF2 weights, the extrapolation operator, step-ratio
//! condition A1, and the DOC/DCC convolution kernels used to audit them.
//!
//! Indices follow the usual 1-based step numbering: step `n` advances from
//! `t_{n-1}` to `t_n` with size `τ_n`, and `r_n = τ_n / τ_{n-1}` with `r_1 = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spectral::SpectralField;

/// Default safety margin `δ` below `r_max` in condition A1.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Lower bound of the random step weights is `1 / RANDOM_MESH_RATIO_BOUND`.
pub const RANDOM_MESH_RATIO_BOUND: f64 = 4.86;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdfError {
    #[error("step index {n} out of range 1..={len}")]
    IndexOutOfRange { n: usize, len: usize },
    #[error("step {index} has non-positive or non-finite size {value}")]
    InvalidStep { index: usize, value: f64 },
    #[error("time mesh is empty")]
    EmptyMesh,
    #[error("singular kernel system: b0 of step {n} is {b0}")]
    SingularKernel { n: usize, b0: f64 },
    #[error("step ratio r_{index} = {ratio} exceeds the A1 bound {bound}")]
    MeshViolatesA1 { index: usize, ratio: f64, bound: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Real root of `x³ = (2x + 1)²`, i.e. of `x³ − 4x² − 4x − 1`, in `(4, 5)`.
pub fn r_max_root() -> f64 {
    let g = |x: f64| ((x - 4.0) * x - 4.0) * x - 1.0;
    let dg = |x: f64| (3.0 * x - 8.0) * x - 4.0;
    let (mut lo, mut hi) = (4.0_f64, 5.0_f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        x -= g(x) / dg(x);
    }
    x
}

/// A finite sequence of positive step sizes with cached node times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    steps: Vec<f64>,
    times: Vec<f64>,
}

impl TimeMesh {
    pub fn new(steps: Vec<f64>) -> Result<Self, BdfError> {
        if steps.is_empty() {
            return Err(BdfError::EmptyMesh);
        }
        if let Some((i, &v)) = steps.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(BdfError::InvalidStep { index: i + 1, value: v });
        }
        let mut times = Vec::with_capacity(steps.len() + 1);
        times.push(0.0);
        let mut t = 0.0;
        for &tau in &steps {
            t += tau;
            times.push(t);
        }
        Ok(TimeMesh { steps, times })
    }

    pub fn uniform(horizon: f64, count: usize) -> Result<Self, BdfError> {
        if count == 0 {
            return Err(BdfError::EmptyMesh);
        }
        TimeMesh::new(vec![horizon / count as f64; count])
    }

    /// Number of steps `K`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// `τ_n`, 1-based.
    pub fn tau(&self, n: usize) -> Result<f64, BdfError> {
        self.check_index(n)?;
        Ok(self.steps[n - 1])
    }

    /// `r_n`, with `r_1 = 0`.
    pub fn ratio(&self, n: usize) -> Result<f64, BdfError> {
        self.check_index(n)?;
        Ok(if n == 1 { 0.0 } else { self.steps[n - 1] / self.steps[n - 2] })
    }

    pub fn ratios(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.steps.windows(2).map(|w| w[1] / w[0]))
            .collect()
    }

    /// `t_n` for `0 <= n <= K`.
    pub fn time(&self, n: usize) -> f64 {
        self.times[n]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `r_k` over `k >= 2` (0 for a single-step mesh).
    pub fn max_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// Checks `0 < r_k <= r_max − δ` for all `k >= 2`.
    pub fn check_a1(&self, delta: f64) -> Result<(), BdfError> {
        let bound = r_max_root() - delta;
        for (i, r) in self.ratios().into_iter().enumerate().skip(1) {
            if !(r > 0.0 && r <= bound) {
                return Err(BdfError::MeshViolatesA1 { index: i + 1, ratio: r, bound });
            }
        }
        Ok(())
    }

    fn check_index(&self, n: usize) -> Result<(), BdfError> {
        if n == 0 || n > self.steps.len() {
            Err(BdfError::IndexOutOfRange { n, len: self.steps.len() })
        } else {
            Ok(())
        }
    }
}

/// Convolution weights of `D₂` at one step, plus the extrapolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdfCoeffs {
    pub b0: f64,
    pub b1: f64,
    /// `1 + r_n`
    pub extrap_plus: f64,
    /// `r_n`
    pub extrap_minus: f64,
}

impl BdfCoeffs {
    /// Weights for step size `tau` and ratio `ratio`; `ratio = 0` gives BDF1.
    pub fn from_ratio(tau: f64, ratio: f64) -> Self {
        let denom = tau * (1.0 + ratio);
        BdfCoeffs {
            b0: (1.0 + 2.0 * ratio) / denom,
            b1: -ratio * ratio / denom,
            extrap_plus: 1.0 + ratio,
            extrap_minus: ratio,
        }
    }

    /// Weights for step `tau` following `prev_tau` (`None` on the first step).
    pub fn from_steps(tau: f64, prev_tau: Option<f64>) -> Self {
        Self::from_ratio(tau, prev_tau.map_or(0.0, |p| tau / p))
    }

    /// Weights of step `n` of `mesh`.
    pub fn for_step(mesh: &TimeMesh, n: usize) -> Result<Self, BdfError> {
        Ok(Self::from_ratio(mesh.tau(n)?, mesh.ratio(n)?))
    }
}

/// Shorthand for [`BdfCoeffs::for_step`].
pub fn bdf_coeffs(mesh: &TimeMesh, n: usize) -> Result<BdfCoeffs, BdfError> {
    BdfCoeffs::for_step(mesh, n)
}

/// Values that can be extrapolated: scalars and fields.
pub trait Combine: Sized {
    /// `a·x + b·y`
    fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Self;
}

impl Combine for f64 {
    fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        a * x + b * y
    }
}

impl Combine for SpectralField {
    fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        SpectralField::linear_combination(a, x, b, y).expect("extrapolation history shares one grid")
    }
}

/// `B u^{n-1} = (1 + r) u^{n-1} − r u^{n-2}`, or `u^{n-1}` when `ratio` is `None`.
pub fn extrapolate_with_ratio<T: Combine + Clone>(prev1: &T, prev2: &T, ratio: Option<f64>) -> T {
    match ratio {
        None => prev1.clone(),
        Some(r) => T::combine(1.0 + r, prev1, -r, prev2),
    }
}

/// `B u^{n-1}` using the ratio of step `n` of `mesh`; `B u^0 = u^0`.
pub fn extrapolate<T: Combine + Clone>(
    prev1: &T,
    prev2: &T,
    n: usize,
    mesh: &TimeMesh,
) -> Result<T, BdfError> {
    let r = mesh.ratio(n)?;
    Ok(extrapolate_with_ratio(prev1, prev2, if n == 1 { None } else { Some(r) }))
}

/// `D₂ u^n` for a scalar sequence `u = (u^0, …, u^K)`.
pub fn apply_d2(mesh: &TimeMesh, n: usize, u: &[f64]) -> Result<f64, BdfError> {
    let c = BdfCoeffs::for_step(mesh, n)?;
    if u.len() <= n {
        return Err(BdfError::InvalidArgument(format!("sequence too short for step {n}")));
    }
    let mut value = c.b0 * (u[n] - u[n - 1]);
    if n >= 2 {
        value += c.b1 * (u[n - 1] - u[n - 2]);
    }
    Ok(value)
}

fn kernel_weights(mesh: &TimeMesh, n: usize) -> Result<Vec<BdfCoeffs>, BdfError> {
    if n == 0 || n > mesh.len() {
        return Err(BdfError::IndexOutOfRange { n, len: mesh.len() });
    }
    (1..=n)
        .map(|j| {
            let c = BdfCoeffs::for_step(mesh, j)?;
            if c.b0 > 0.0 && c.b0.is_finite() {
                Ok(c)
            } else {
                Err(BdfError::SingularKernel { n: j, b0: c.b0 })
            }
        })
        .collect()
}

/// Solves `Σ_{j=k}^{n} κ_{n−j} b^{(j)}_{j−k} = rhs(k)` for `k = n, n−1, …, 1`.
/// Only `b_0, b_1` are nonzero, so each row has two unknowns.
fn back_substitute(weights: &[BdfCoeffs], rhs: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = weights.len();
    let mut kernel = vec![0.0; n];
    kernel[0] = rhs(n) / weights[n - 1].b0;
    for k in (1..n).rev() {
        let i = n - k;
        kernel[i] = (rhs(k) - kernel[i - 1] * weights[k].b1) / weights[k - 1].b0;
    }
    kernel
}

/// DOC kernels `θ^{(n)}_i`, returned with `result[i] = θ^{(n)}_i`, `i = 0..n`.
pub fn doc_kernels(mesh: &TimeMesh, n: usize) -> Result<Vec<f64>, BdfError> {
    let w = kernel_weights(mesh, n)?;
    Ok(back_substitute(&w, |k| if k == n { 1.0 } else { 0.0 }))
}

/// DCC kernels `p^{(n)}_i`, returned with `result[i] = p^{(n)}_i`.
pub fn dcc_kernels(mesh: &TimeMesh, n: usize) -> Result<Vec<f64>, BdfError> {
    let w = kernel_weights(mesh, n)?;
    Ok(back_substitute(&w, |_| 1.0))
}

/// All DOC kernels up to level `n`: `table[m - 1][i] = θ^{(m)}_i`.
pub fn doc_table(mesh: &TimeMesh, n: usize) -> Result<Vec<Vec<f64>>, BdfError> {
    let w = kernel_weights(mesh, n)?;
    Ok((1..=n)
        .map(|m| back_substitute(&w[..m], |k| if k == m { 1.0 } else { 0.0 }))
        .collect())
}

/// `max_k |Σ_{j=k}^{n} κ_{n−j} b^{(j)}_{j−k} − target(k)|`, summed explicitly.
pub fn convolution_residual(
    mesh: &TimeMesh,
    kernel: &[f64],
    target: impl Fn(usize) -> f64,
) -> Result<f64, BdfError> {
    let n = kernel.len();
    let w = kernel_weights(mesh, n)?;
    let b = |j: usize, lag: usize| match lag {
        0 => w[j - 1].b0,
        1 => w[j - 1].b1,
        _ => 0.0,
    };
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        let sum: f64 = (k..=n).map(|j| kernel[n - j] * b(j, j - k)).sum();
        worst = worst.max((sum - target(k)).abs());
    }
    Ok(worst)
}

/// Outcome of the discrete quadratic-form positivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFormCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Absolute slack allowed in the quadratic-form chain.
pub const QUADRATIC_FORM_SLACK: f64 = 1e-10;

/// Evaluates `lhs = 2 Σ_k w_k Σ_{j<=k} θ^{(k)}_{k−j} w_j` and
/// `rhs = (δ/20) Σ_k (Σ_{s>=k} θ^{(s)}_{s−k} w_s)² / τ_k` for `n = w.len()`,
/// passing when `lhs >= rhs >= 0` up to [`QUADRATIC_FORM_SLACK`].
pub fn quadratic_form_check(
    mesh: &TimeMesh,
    w: &[f64],
    delta: f64,
) -> Result<QuadraticFormCheck, BdfError> {
    let n = w.len();
    if n == 0 {
        return Err(BdfError::InvalidArgument("empty weight sequence".into()));
    }
    if n > mesh.len() {
        return Err(BdfError::IndexOutOfRange { n, len: mesh.len() });
    }
    let prefix = TimeMesh::new(mesh.steps()[..n].to_vec())?;
    prefix.check_a1(delta)?;
    let theta = doc_table(&prefix, n)?;
    let mut lhs = 0.0;
    for k in 1..=n {
        let inner: f64 = (1..=k).map(|j| theta[k - 1][k - j] * w[j - 1]).sum();
        lhs += 2.0 * w[k - 1] * inner;
    }
    let mut rhs = 0.0;
    for k in 1..=n {
        let inner: f64 = (k..=n).map(|s| theta[s - 1][s - k] * w[s - 1]).sum();
        rhs += inner * inner / prefix.steps()[k - 1];
    }
    rhs *= delta / 20.0;
    let pass = lhs >= rhs - QUADRATIC_FORM_SLACK && rhs >= -QUADRATIC_FORM_SLACK;
    Ok(QuadraticFormCheck { lhs, rhs, pass })
}

/// Mesh `τ_k = T θ_k / Σ θ` for explicit positive weights `θ`.
pub fn mesh_from_weights(horizon: f64, weights: &[f64]) -> Result<TimeMesh, BdfError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(BdfError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let total: f64 = weights.iter().sum();
    TimeMesh::new(weights.iter().map(|w| horizon * w / total).collect())
}

/// Random mesh with weights `θ_k ~ U(1/4.86, 1)`, deterministic per `seed`.
/// Ratios are bounded by 4.86.
pub fn random_mesh(horizon: f64, count: usize, seed: u64) -> Result<TimeMesh, BdfError> {
    if count < 2 {
        return Err(BdfError::InvalidArgument(format!("need at least 2 steps, got {count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 1.0 / RANDOM_MESH_RATIO_BOUND;
    let weights: Vec<f64> = (0..count).map(|_| rng.random_range(lo..1.0)).collect();
    mesh_from_weights(horizon, &weights)
}

/// Per-level identity residuals of the kernels, as dumped by `chsolver kernels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAudit {
    pub n: usize,
    pub doc_residual: f64,
    pub dcc_residual: f64,
    /// `|Σ_j p^{(n)}_{n−j} − t_n|`
    pub dcc_sum_error: f64,
    /// `max_j p^{(n)}_{n−j} / (2 τ_max)`; at most 1 when the bound holds.
    pub dcc_bound_ratio: f64,
    /// `max_j |θ^{(n)}_{n−j} − (p^{(n)}_{n−j} − p^{(n−1)}_{n−1−j})|`
    pub doc_dcc_relation: f64,
    /// `|Σ_j θ^{(n)}_{n−j} D₂u^j − (u^n − u^{n−1})|` for `u^k = sin(k)`.
    pub telescoping_residual: f64,
}

/// Audits every level `1..=n` of `mesh`.
pub fn audit_kernels(mesh: &TimeMesh, n: usize) -> Result<Vec<KernelAudit>, BdfError> {
    let u: Vec<f64> = (0..=n).map(|k| (k as f64).sin()).collect();
    let d2: Vec<f64> = (1..=n).map(|j| apply_d2(mesh, j, &u)).collect::<Result<_, _>>()?;
    let two_tau = 2.0 * mesh.max_step();
    let mut out = Vec::with_capacity(n);
    let mut prev_p: Vec<f64> = Vec::new();
    for m in 1..=n {
        let theta = doc_kernels(mesh, m)?;
        let p = dcc_kernels(mesh, m)?;
        let doc_residual = convolution_residual(mesh, &theta, |k| if k == m { 1.0 } else { 0.0 })?;
        let dcc_residual = convolution_residual(mesh, &p, |_| 1.0)?;
        let dcc_sum_error = (p.iter().sum::<f64>() - mesh.time(m)).abs();
        let dcc_bound_ratio = p.iter().cloned().fold(f64::MIN, f64::max) / two_tau;
        // θ^{(m)}_{m−j} = p^{(m)}_{m−j} − p^{(m−1)}_{m−1−j}, with p^{(m−1)}_{−1} = 0
        let doc_dcc_relation = (1..=m)
            .map(|j| {
                let older = if j < m { prev_p[m - 1 - j] } else { 0.0 };
                (theta[m - j] - (p[m - j] - older)).abs()
            })
            .fold(0.0, f64::max);
        let telescoped: f64 = (1..=m).map(|j| theta[m - j] * d2[j - 1]).sum();
        let telescoping_residual = (telescoped - (u[m] - u[m - 1])).abs();
        out.push(KernelAudit {
            n: m,
            doc_residual,
            dcc_residual,
            dcc_sum_error,
            dcc_bound_ratio,
            doc_dcc_relation,
            telescoping_residual,
        });
        prev_p = p;
    }
    Ok(out)
}
