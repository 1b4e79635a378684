//! Periodic uniform-grid fields in physical and Fourier-coefficient space.
//!
//! Coefficients follow the normalization `û_k = (1/|Ω|) ∫ u e^{-ik·x} dx`, so
//! the forward transform is the unnormalized DFT divided by `N^dim` and the
//! inverse transform is the plain sum `u(x_j) = Σ_k û_k e^{ik·x_j}`.  Storage
//! is row-major with the last axis fastest; coefficient arrays use FFT order
//! (index `i < N/2` is wavenumber `i`, otherwise `i - N`).

use std::borrow::Cow;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Relative imaginary residue above which an inverse transform is rejected.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} values for this grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("imaginary residue {residue:e} exceeds {IMAGINARY_TOLERANCE:e} of field magnitude {magnitude:e}")]
    ImaginaryResidue { residue: f64, magnitude: f64 },
    #[error("symbol power must be 1 or 2, got {0}")]
    InvalidSymbolPower(u32),
    #[error("projection cutoff {cutoff} exceeds N = {n}")]
    InvalidCutoff { cutoff: usize, n: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    InvalidAxis { axis: usize, dim: usize },
}

/// Cubic periodic grid `(0, L)^dim` with `N` points per direction.
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    /// Wavenumber of each 1D FFT index.
    fft_wavenumbers: Vec<f64>,
    /// `|k|²` per flattened mode.
    laplace_symbol: Vec<f64>,
    /// `Σ_d ξ_d²` with the Nyquist index of direction `d` dropped, i.e. the
    /// symbol of `-∇·∇` when each derivative zeroes its Nyquist mode.
    gradient_symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    padded: OnceLock<Arc<Grid>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Builds a grid; `N` must be even and at least 4, `dim` 2 or 3.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Arc<Grid>, SpectralError> {
        if !(dim == 2 || dim == 3) {
            return Err(SpectralError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(format!("N must be even and >= 4, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!("L must be positive, got {length}")));
        }
        Ok(Arc::new(Self::build(dim, n, length)))
    }

    // Unchecked: also used for the odd-sized 3/2 padding grid.
    fn build(dim: usize, n: usize, length: f64) -> Grid {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let fft_wavenumbers: Vec<f64> = (0..n)
            .map(|i| 2.0 * std::f64::consts::PI * signed_index(i, n) as f64 / length)
            .collect();
        let nyquist = n / 2;
        let total = n.pow(dim as u32);
        let mut laplace_symbol = vec![0.0; total];
        let mut gradient_symbol = vec![0.0; total];
        let mut idx = vec![0usize; dim];
        for flat in 0..total {
            unflatten(flat, n, &mut idx);
            let mut lap = 0.0;
            let mut grad = 0.0;
            for &i in idx.iter() {
                let k2 = fft_wavenumbers[i] * fft_wavenumbers[i];
                lap += k2;
                if !(n.is_multiple_of(2) && i == nyquist) {
                    grad += k2;
                }
            }
            laplace_symbol[flat] = lap;
            gradient_symbol[flat] = grad;
        }
        Grid {
            dim,
            n,
            length,
            fft_wavenumbers,
            laplace_symbol,
            gradient_symbol,
            forward,
            inverse,
            padded: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Mesh size `h = L/N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `|Ω| = L^dim`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Number of grid points, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumbers `2πk/L` for `k = -N/2, …, N/2-1`, in ascending order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let half = self.n as i64 / 2;
        (-half..half)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / self.length)
            .collect()
    }

    /// Signed mode number stored at 1D FFT index `i`.
    pub fn mode_number(&self, i: usize) -> i64 {
        signed_index(i, self.n)
    }

    /// 1D FFT index holding signed mode number `k`.
    pub fn fft_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    pub fn fft_wavenumber(&self, i: usize) -> f64 {
        self.fft_wavenumbers[i]
    }

    /// `|k|²` per flattened mode, FFT order.
    pub fn laplace_symbol(&self) -> &[f64] {
        &self.laplace_symbol
    }

    /// Gradient-energy weights per mode (Nyquist dropped per direction).
    pub fn gradient_symbol(&self) -> &[f64] {
        &self.gradient_symbol
    }

    /// Flat index -> per-axis indices.
    pub fn unflatten(&self, flat: usize, idx: &mut [usize]) {
        unflatten(flat, self.n, idx);
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Physical coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        unflatten(flat, self.n, &mut idx);
        let h = self.spacing();
        idx.iter().map(|&i| i as f64 * h).collect()
    }

    /// Normalized forward transform in place: `û = DFT(u) / N^dim`.
    pub(crate) fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform_axes(data, &self.forward);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Inverse transform in place: `u_j = Σ_k û_k e^{ik·x_j}`.
    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform_axes(data, &self.inverse);
    }

    fn transform_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = data.len();
        debug_assert_eq!(total, self.len());
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = data[base + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, z) in line.iter().enumerate() {
                        data[base + i * stride] = *z;
                    }
                }
            }
        }
    }

    fn padded_grid(&self) -> Arc<Grid> {
        self.padded
            .get_or_init(|| Arc::new(Grid::build(self.dim, 3 * self.n / 2, self.length)))
            .clone()
    }

    /// Forward transform of real data.
    pub(crate) fn coefficients_of(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Inverse transform with the realness check.
    pub(crate) fn values_of(&self, coefficients: &[Complex64]) -> Result<Vec<f64>, SpectralError> {
        let mut data = coefficients.to_vec();
        self.inverse_in_place(&mut data);
        let mut residue: f64 = 0.0;
        let mut magnitude: f64 = 0.0;
        for z in &data {
            residue = residue.max(z.im.abs());
            magnitude = magnitude.max(z.norm());
        }
        if residue > IMAGINARY_TOLERANCE * magnitude {
            return Err(SpectralError::ImaginaryResidue { residue, magnitude });
        }
        Ok(data.into_iter().map(|z| z.re).collect())
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn unflatten(mut flat: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

/// A real scalar field on a [`Grid`], carrying whichever of its physical
/// values and Fourier coefficients are current.  At least one of the two is
/// always present; operations fill in the other on demand.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    physical: Option<Vec<f64>>,
    coefficients: Option<Vec<Complex64>>,
}

impl SpectralField {
    pub fn from_physical(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, SpectralError> {
        check_len(&grid, values.len())?;
        Ok(SpectralField { grid, physical: Some(values), coefficients: None })
    }

    pub fn from_coefficients(
        grid: Arc<Grid>,
        coefficients: Vec<Complex64>,
    ) -> Result<Self, SpectralError> {
        check_len(&grid, coefficients.len())?;
        Ok(SpectralField { grid, physical: None, coefficients: Some(coefficients) })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(&grid.point(j))).collect();
        SpectralField { grid, physical: Some(values), coefficients: None }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let len = grid.len();
        let mut coefficients = vec![Complex64::default(); len];
        coefficients[0] = Complex64::new(value, 0.0);
        SpectralField {
            grid,
            physical: Some(vec![value; len]),
            coefficients: Some(coefficients),
        }
    }

    /// Both representations supplied by a caller that guarantees they agree.
    pub(crate) fn from_parts(grid: Arc<Grid>, physical: Vec<f64>, coefficients: Vec<Complex64>) -> Self {
        SpectralField { grid, physical: Some(physical), coefficients: Some(coefficients) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn physical(&self) -> Option<&[f64]> {
        self.physical.as_deref()
    }

    pub fn coefficients(&self) -> Option<&[Complex64]> {
        self.coefficients.as_deref()
    }

    pub fn has_physical(&self) -> bool {
        self.physical.is_some()
    }

    pub fn has_coefficients(&self) -> bool {
        self.coefficients.is_some()
    }

    /// Returns a copy with valid coefficients; physical values are kept.
    pub fn to_coefficients(&self) -> SpectralField {
        let coefficients = self.coeffs().into_owned();
        SpectralField {
            grid: self.grid.clone(),
            physical: self.physical.clone(),
            coefficients: Some(coefficients),
        }
    }

    /// Returns a copy with valid physical values; fails on an imaginary
    /// residue above [`IMAGINARY_TOLERANCE`] relative to the field magnitude.
    pub fn to_physical(&self) -> Result<SpectralField, SpectralError> {
        let physical = self.values()?.into_owned();
        Ok(SpectralField {
            grid: self.grid.clone(),
            physical: Some(physical),
            coefficients: self.coefficients.clone(),
        })
    }

    pub(crate) fn coeffs(&self) -> Cow<'_, [Complex64]> {
        match (&self.coefficients, &self.physical) {
            (Some(c), _) => Cow::Borrowed(c),
            (None, Some(p)) => Cow::Owned(self.grid.coefficients_of(p)),
            (None, None) => unreachable!("field without any representation"),
        }
    }

    pub(crate) fn values(&self) -> Result<Cow<'_, [f64]>, SpectralError> {
        match (&self.physical, &self.coefficients) {
            (Some(p), _) => Ok(Cow::Borrowed(p)),
            (None, Some(c)) => Ok(Cow::Owned(self.grid.values_of(c)?)),
            (None, None) => unreachable!("field without any representation"),
        }
    }

    /// Multiplies coefficients by `(-|k|²)^power`, `power ∈ {1, 2}`.
    pub fn apply_symbol(&self, power: u32) -> Result<SpectralField, SpectralError> {
        if !(power == 1 || power == 2) {
            return Err(SpectralError::InvalidSymbolPower(power));
        }
        let sign = if power % 2 == 1 { -1.0 } else { 1.0 };
        let coefficients = self
            .coeffs()
            .iter()
            .zip(self.grid.laplace_symbol())
            .map(|(z, &k2)| z * (sign * k2.powi(power as i32)))
            .collect();
        Ok(SpectralField { grid: self.grid.clone(), physical: None, coefficients: Some(coefficients) })
    }

    /// Spectral derivative along `axis`; the Nyquist mode of that axis is zeroed.
    pub fn partial_derivative(&self, axis: usize) -> Result<SpectralField, SpectralError> {
        let dim = self.grid.dim();
        if axis >= dim {
            return Err(SpectralError::InvalidAxis { axis, dim });
        }
        let n = self.grid.n();
        let mut idx = vec![0; dim];
        let coefficients = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(flat, z)| {
                unflatten(flat, n, &mut idx);
                let i = idx[axis];
                if i == n / 2 {
                    Complex64::default()
                } else {
                    z * Complex64::new(0.0, self.grid.fft_wavenumber(i))
                }
            })
            .collect();
        Ok(SpectralField { grid: self.grid.clone(), physical: None, coefficients: Some(coefficients) })
    }

    /// `‖u‖² = |Ω| Σ |û|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.volume() * self.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `‖∇u‖² = |Ω| Σ |k|² |û|²` (per-direction Nyquist modes excluded).
    pub fn grad_norm_sq(&self) -> f64 {
        gradient_energy(&self.grid, &self.coeffs())
    }

    pub fn h1_norm(&self) -> f64 {
        (self.l2_norm_sq() + self.grad_norm_sq()).sqrt()
    }

    /// Discrete `L²` inner product `|Ω| Σ Re(û conj v̂)`.
    pub fn inner_product(&self, other: &SpectralField) -> Result<f64, SpectralError> {
        self.same_grid(other)?;
        let a = self.coeffs();
        let b = other.coeffs();
        Ok(self.grid.volume() * a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
    }

    /// `(u, 1) = |Ω| û₀`.
    pub fn mass(&self) -> f64 {
        match (&self.coefficients, &self.physical) {
            (Some(c), _) => self.grid.volume() * c[0].re,
            (None, Some(p)) => self.grid.cell_volume() * p.iter().sum::<f64>(),
            (None, None) => unreachable!("field without any representation"),
        }
    }

    /// Pointwise `f(u) = (u³ − u)/ε²` on the collocation grid.
    pub fn nonlinearity(&self, eps: f64) -> Result<SpectralField, SpectralError> {
        let inv = 1.0 / (eps * eps);
        let physical = self.values()?.iter().map(|&u| (u * u * u - u) * inv).collect();
        Ok(SpectralField { grid: self.grid.clone(), physical: Some(physical), coefficients: None })
    }

    /// `f(u)` evaluated with the 3/2 zero-padding rule; the result is
    /// returned in coefficient space with the Nyquist modes zeroed.
    pub fn nonlinearity_dealiased(&self, eps: f64) -> Result<SpectralField, SpectralError> {
        let coefficients = dealiased_nonlinearity(&self.grid, &self.coeffs(), eps)?;
        Ok(SpectralField { grid: self.grid.clone(), physical: None, coefficients: Some(coefficients) })
    }

    /// `P_N` onto modes with every index in `[-cutoff/2, cutoff/2 - 1]`.
    ///
    /// For `cutoff < N` the mode `-cutoff/2` has its conjugate partner
    /// outside the range, so it is dropped as well to keep real fields real.
    pub fn project(&self, cutoff: usize) -> Result<SpectralField, SpectralError> {
        let n = self.grid.n();
        if cutoff > n {
            return Err(SpectralError::InvalidCutoff { cutoff, n });
        }
        if cutoff == n {
            return Ok(self.to_coefficients());
        }
        let hi = (cutoff as i64 - 1) / 2;
        let lo = -hi;
        let dim = self.grid.dim();
        let mut idx = vec![0; dim];
        let coefficients = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(flat, z)| {
                unflatten(flat, n, &mut idx);
                let inside = idx.iter().all(|&i| {
                    let k = signed_index(i, n);
                    (lo..=hi).contains(&k)
                });
                if inside { *z } else { Complex64::default() }
            })
            .collect();
        Ok(SpectralField { grid: self.grid.clone(), physical: None, coefficients: Some(coefficients) })
    }

    /// Uniform scaling; keeps whichever representations are valid.
    pub fn scale(&self, factor: f64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            physical: self.physical.as_ref().map(|p| p.iter().map(|v| v * factor).collect()),
            coefficients: self.coefficients.as_ref().map(|c| c.iter().map(|z| z * factor).collect()),
        }
    }

    /// `a·x + b·y`, computed in every representation both inputs share.
    pub fn linear_combination(
        a: f64,
        x: &SpectralField,
        b: f64,
        y: &SpectralField,
    ) -> Result<SpectralField, SpectralError> {
        x.same_grid(y)?;
        let physical = match (&x.physical, &y.physical) {
            (Some(p), Some(q)) => Some(p.iter().zip(q).map(|(u, v)| a * u + b * v).collect()),
            _ => None,
        };
        let coefficients = match (&x.coefficients, &y.coefficients) {
            (Some(p), Some(q)) => Some(p.iter().zip(q).map(|(u, v)| u * a + v * b).collect()),
            _ if physical.is_none() => {
                let (p, q) = (x.coeffs(), y.coeffs());
                Some(p.iter().zip(q.iter()).map(|(u, v)| u * a + v * b).collect())
            }
            _ => None,
        };
        Ok(SpectralField { grid: x.grid.clone(), physical, coefficients })
    }

    pub(crate) fn same_grid(&self, other: &SpectralField) -> Result<(), SpectralError> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }
}

fn check_len(grid: &Grid, got: usize) -> Result<(), SpectralError> {
    let expected = grid.len();
    if got != expected {
        return Err(SpectralError::LengthMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn gradient_energy(grid: &Grid, coefficients: &[Complex64]) -> f64 {
    grid.volume()
        * coefficients
            .iter()
            .zip(grid.gradient_symbol())
            .map(|(z, &w)| w * z.norm_sqr())
            .sum::<f64>()
}

pub(crate) fn dealiased_nonlinearity(
    grid: &Grid,
    coefficients: &[Complex64],
    eps: f64,
) -> Result<Vec<Complex64>, SpectralError> {
    let padded = grid.padded_grid();
    let (n, m, dim) = (grid.n(), padded.n(), grid.dim());
    let mut buffer = vec![Complex64::default(); padded.len()];
    let mut idx = vec![0; dim];
    let mut pidx = vec![0; dim];
    let map = |i: usize| padded.fft_index(signed_index(i, n));
    for (flat, z) in coefficients.iter().enumerate() {
        unflatten(flat, n, &mut idx);
        if idx.contains(&(n / 2)) {
            continue;
        }
        for (p, &i) in pidx.iter_mut().zip(idx.iter()) {
            *p = map(i);
        }
        buffer[pidx.iter().fold(0, |acc, &i| acc * m + i)] = *z;
    }
    let values = padded.values_of(&buffer)?;
    let inv = 1.0 / (eps * eps);
    let f: Vec<f64> = values.iter().map(|&u| (u * u * u - u) * inv).collect();
    let fhat = padded.coefficients_of(&f);
    let mut out = vec![Complex64::default(); grid.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        unflatten(flat, n, &mut idx);
        if idx.contains(&(n / 2)) {
            continue;
        }
        for (p, &i) in pidx.iter_mut().zip(idx.iter()) {
            *p = map(i);
        }
        *slot = fhat[pidx.iter().fold(0, |acc, &i| acc * m + i)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid2(n: usize) -> Arc<Grid> {
        Grid::new(2, n, 2.0 * PI).unwrap()
    }

    fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> SpectralField {
        let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        SpectralField::from_physical(grid.clone(), values).unwrap()
    }

    /// Direct O(N⁴) DFT with the `1/|Ω|` normalization.
    fn direct_dft(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
        let n = grid.n();
        let mut out = vec![Complex64::default(); grid.len()];
        for k in 0..n {
            for l in 0..n {
                let mut acc = Complex64::default();
                for a in 0..n {
                    for b in 0..n {
                        let phase = -2.0 * PI * ((k * a) as f64 + (l * b) as f64) / n as f64;
                        acc += values[a * n + b] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[k * n + l] = acc / (n * n) as f64;
            }
        }
        out
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(2, 7, 1.0).is_err());
        assert!(Grid::new(2, 2, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(3, 8, 0.0).is_err());
        let g = grid2(8);
        assert_eq!(g.len(), 64);
        assert!((g.cell_volume() - (PI / 4.0).powi(2)).abs() < 1e-15);
        let w = g.wavenumbers();
        assert_eq!(w.len(), 8);
        assert_eq!(w[0], -4.0);
        // symmetric apart from the unpaired -N/2 entry
        for k in 1..4 {
            assert_eq!(w[4 + k], -w[4 - k]);
        }
    }

    #[test]
    fn constant_field_coefficients() {
        let g = grid2(8);
        let f = SpectralField::from_physical(g.clone(), vec![2.5; 64]).unwrap().to_coefficients();
        let c = f.coefficients().unwrap();
        assert!((c[0].re - 2.5).abs() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn cosine_coefficients() {
        let g = grid2(16);
        let f = SpectralField::from_fn(g.clone(), |x| x[0].cos()).to_coefficients();
        let c = f.coefficients().unwrap();
        let plus = g.flatten(&[g.fft_index(1), 0]);
        let minus = g.flatten(&[g.fft_index(-1), 0]);
        for (i, z) in c.iter().enumerate() {
            let expected = if i == plus || i == minus { 0.5 } else { 0.0 };
            assert!((z - Complex64::new(expected, 0.0)).norm() < 1e-14, "mode {i}: {z}");
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let g = grid2(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = random_field(&g, &mut rng);
            let oracle = direct_dft(&g, f.physical().unwrap());
            let fast = f.to_coefficients();
            for (a, b) in fast.coefficients().unwrap().iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-14);
            }
            let back = SpectralField::from_coefficients(g.clone(), oracle).unwrap().to_physical().unwrap();
            for (a, b) in back.physical().unwrap().iter().zip(f.physical().unwrap()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_coefficient_is_one() {
        let g = grid2(8);
        let mut c = vec![Complex64::default(); 64];
        c[0] = Complex64::new(1.0, 0.0);
        let f = SpectralField::from_coefficients(g, c).unwrap().to_physical().unwrap();
        assert!(f.physical().unwrap().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn cosine_coefficients_invert_pointwise() {
        let g = grid2(16);
        let mut c = vec![Complex64::default(); g.len()];
        c[g.flatten(&[1, 0])] = Complex64::new(0.5, 0.0);
        c[g.flatten(&[15, 0])] = Complex64::new(0.5, 0.0);
        let f = SpectralField::from_coefficients(g.clone(), c).unwrap().to_physical().unwrap();
        for (j, v) in f.physical().unwrap().iter().enumerate() {
            assert!((v - g.point(j)[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let g = grid2(8);
        let mut c = vec![Complex64::default(); 64];
        c[g.flatten(&[1, 0])] = Complex64::new(1.0, 0.0);
        let err = SpectralField::from_coefficients(g, c).unwrap().to_physical().unwrap_err();
        assert!(matches!(err, SpectralError::ImaginaryResidue { .. }));
    }

    #[test]
    fn symbols_on_eigenfunctions() {
        let g = grid2(16);
        let c1 = SpectralField::from_fn(g.clone(), |x| x[0].cos());
        let lap = c1.apply_symbol(1).unwrap().to_physical().unwrap();
        for (j, v) in lap.physical().unwrap().iter().enumerate() {
            assert!((v + g.point(j)[0].cos()).abs() < 1e-12);
        }
        let c2 = SpectralField::from_fn(g.clone(), |x| (2.0 * x[0]).cos());
        let bih = c2.apply_symbol(2).unwrap().to_physical().unwrap();
        for (j, v) in bih.physical().unwrap().iter().enumerate() {
            assert!((v - 16.0 * (2.0 * g.point(j)[0]).cos()).abs() < 1e-11);
        }
        let k = SpectralField::constant(g.clone(), 3.0).apply_symbol(1).unwrap().to_physical().unwrap();
        assert!(k.physical().unwrap().iter().all(|v| v.abs() < 1e-14));
        assert!(matches!(c1.apply_symbol(3), Err(SpectralError::InvalidSymbolPower(3))));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid2(16);
        let one = SpectralField::constant(g.clone(), 1.0);
        assert!((one.l2_norm_sq() - 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(one.grad_norm_sq(), 0.0);
        assert!((one.h1_norm() - 2.0 * PI).abs() < 1e-12);
        let c = SpectralField::from_fn(g.clone(), |x| x[0].cos());
        assert!((c.l2_norm_sq() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((c.grad_norm_sq() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((c.h1_norm() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(SpectralField::constant(g, 0.0).h1_norm(), 0.0);
    }

    #[test]
    fn grad_norm_matches_differentiated_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3] {
            let g = Grid::new(dim, 8, 2.0 * PI).unwrap();
            let f = random_field(&g, &mut rng);
            let mut quad = 0.0;
            for axis in 0..dim {
                let d = f.partial_derivative(axis).unwrap().to_physical().unwrap();
                quad += g.cell_volume() * d.physical().unwrap().iter().map(|v| v * v).sum::<f64>();
            }
            let spectral = f.grad_norm_sq();
            assert!((spectral - quad).abs() <= 1e-10 * quad, "{spectral} vs {quad}");
        }
    }

    #[test]
    fn pointwise_nonlinearity() {
        let g = grid2(8);
        for (u, eps, expected) in [(1.0, 0.3, 0.0), (0.0, 0.3, 0.0), (2.0, 0.5, 24.0)] {
            let f = SpectralField::constant(g.clone(), u).nonlinearity(eps).unwrap();
            assert!(!f.has_coefficients());
            assert!(f.physical().unwrap().iter().all(|v| (v - expected).abs() < 1e-12));
        }
    }

    #[test]
    fn dealiased_nonlinearity_exact_on_low_modes() {
        // u = 0.5 cos x: u³ has modes |k| <= 3, all resolved on N = 16.
        let g = grid2(16);
        let u = SpectralField::from_fn(g.clone(), |x| 0.5 * x[0].cos());
        let a = u.nonlinearity_dealiased(0.7).unwrap().to_physical().unwrap();
        let b = u.nonlinearity(0.7).unwrap();
        for (x, y) in a.physical().unwrap().iter().zip(b.physical().unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_cases() {
        let g = grid2(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&g, &mut rng);
        let full = f.project(16).unwrap();
        for (a, b) in full.coeffs().iter().zip(f.coeffs().iter()) {
            assert_eq!(a, b);
        }
        let high = SpectralField::from_fn(g.clone(), |x| (6.0 * x[0]).cos());
        assert!(high.project(8).unwrap().l2_norm_sq() < 1e-24);
        let p = f.project(8).unwrap();
        let pp = p.project(8).unwrap();
        assert!(p.to_physical().is_ok());
        assert!(f.project(5).unwrap().to_physical().is_ok());
        for (a, b) in p.coeffs().iter().zip(pp.coeffs().iter()) {
            assert_eq!(a, b);
        }
        assert!(matches!(f.project(18), Err(SpectralError::InvalidCutoff { .. })));
    }

    #[test]
    fn mass_agrees_between_representations() {
        let g = grid2(8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_field(&g, &mut rng);
        let m1 = f.mass();
        let m2 = f.to_coefficients().mass();
        let m3 = SpectralField::from_coefficients(g, f.coeffs().into_owned()).unwrap().mass();
        assert!((m1 - m3).abs() < 1e-13 && (m2 - m3).abs() < 1e-13);
    }

    #[test]
    fn linear_combination_rejects_mixed_grids() {
        let a = SpectralField::constant(grid2(8), 1.0);
        let b = SpectralField::constant(grid2(16), 1.0);
        assert!(SpectralField::linear_combination(1.0, &a, 1.0, &b).is_err());
        let c = SpectralField::linear_combination(2.0, &a, -1.0, &a.clone()).unwrap();
        assert!(c.physical().unwrap().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
