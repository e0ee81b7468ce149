//! Periodic grid geometry, scalar fields, and the norms used by the
//! separation estimates.
//!
//! All integrals use midpoint quadrature: `∫ f ≈ Σ f_i · cell_volume`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Spectral;

/// Uniform discretization of the periodic box `[0, L)^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n_per_axis: usize,
    edge_length: f64,
}

impl Grid {
    pub fn new(dim: usize, n_per_axis: usize, edge_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n_per_axis < 4 || !n_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n_per_axis} must be a power of two >= 4"
            )));
        }
        if !(edge_length.is_finite() && edge_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "edge length {edge_length} must be positive"
            )));
        }
        Ok(Self {
            dim,
            n_per_axis,
            edge_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn spacing(&self) -> f64 {
        self.edge_length / self.n_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.edge_length.powi(self.dim as i32)
    }

    /// Number of grid points, `n_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index along `axis` of the row-major flat index `idx`.
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        let stride = self.n_per_axis.pow((self.dim - 1 - axis) as u32);
        (idx / stride) % self.n_per_axis
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        multi
            .iter()
            .fold(0, |acc, &i| acc * self.n_per_axis + i % self.n_per_axis)
    }

    /// Flat index shifted by `delta` points along `axis`, wrapping periodically.
    pub fn shifted(&self, idx: usize, axis: usize, delta: isize) -> usize {
        let n = self.n_per_axis as isize;
        let stride = self.n_per_axis.pow((self.dim - 1 - axis) as u32);
        let i = self.axis_index(idx, axis) as isize;
        let j = (i + delta).rem_euclid(n) as usize;
        idx - (i as usize) * stride + j * stride
    }

    /// Physical coordinates of grid point `idx`.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        for (axis, xi) in x.iter_mut().enumerate().take(self.dim) {
            *xi = self.axis_index(idx, axis) as f64 * h;
        }
        x
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D n={} L={}", self.dim, self.n_per_axis, self.edge_length)
    }
}

/// Real scalar samples on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps `values`, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} values for {grid}", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the grid coordinates (unused axes are 0).
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Field> {
        let values = self.values.iter().map(|&v| f(v)).collect::<Result<_>>()?;
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.to_string(),
                found: other.grid.to_string(),
            });
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// Integral mean, i.e. the arithmetic mean of the samples.
    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// `∫ f g`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let sum = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b));
        Ok(sum * self.grid.cell_volume())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `L^p` norm for `p ≥ 1`; pass `f64::INFINITY` for the sup norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::param("p", format!("{p} is below 1")));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        let sum = compensated_sum(self.values.iter().map(|v| v.abs().powf(p)));
        Ok((sum * self.grid.cell_volume()).powf(1.0 / p))
    }

    /// `L²` norm.
    pub fn l2_norm(&self) -> f64 {
        let sum = compensated_sum(self.values.iter().map(|v| v * v));
        (sum * self.grid.cell_volume()).sqrt()
    }

    pub(crate) fn spectrum(&self, spectral: &Spectral) -> Vec<Complex64> {
        spectral.forward_real(&self.values)
    }

    /// Spectral gradient; the Nyquist derivative coefficient is zero.
    pub fn gradient(&self) -> Vec<Field> {
        let spectral = Spectral::new(self.grid);
        let hat = self.spectrum(&spectral);
        (0..self.grid.dim())
            .map(|axis| {
                let component: Vec<Complex64> = hat
                    .iter()
                    .enumerate()
                    .map(|(idx, c)| c * Complex64::new(0.0, spectral.kd(idx, axis)))
                    .collect();
                Field::from_raw(self.grid, spectral.inverse_real(component))
            })
            .collect()
    }

    /// `‖∇f‖²` from the real-space spectral gradient.
    pub fn h1_seminorm_sq(&self) -> f64 {
        self.gradient().iter().map(|g| g.l2_norm().powi(2)).sum()
    }

    /// `‖∇f‖²` evaluated directly in Fourier space (Parseval).
    pub fn h1_seminorm_sq_spectral(&self) -> f64 {
        let spectral = Spectral::new(self.grid);
        let hat = self.spectrum(&spectral);
        h1_from_spectrum(&spectral, &hat)
    }

    /// `L²` norm evaluated via Parseval.
    pub fn l2_norm_spectral(&self) -> f64 {
        let spectral = Spectral::new(self.grid);
        let hat = self.spectrum(&spectral);
        let sum = compensated_sum(hat.iter().map(|c| c.norm_sqr()));
        (sum * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// `‖∇f‖²` with second-order centered differences. Used for truncated
    /// fields whose kinks spoil spectral accuracy.
    pub fn fd_gradient_norm_sq(&self) -> f64 {
        let h = self.grid.spacing();
        let mut total = 0.0;
        for axis in 0..self.grid.dim() {
            total += compensated_sum((0..self.values.len()).map(|idx| {
                let fwd = self.values[self.grid.shifted(idx, axis, 1)];
                let bwd = self.values[self.grid.shifted(idx, axis, -1)];
                let d = (fwd - bwd) / (2.0 * h);
                d * d
            }));
        }
        total * self.grid.cell_volume()
    }

    /// `(f − ρ)⁺`.
    pub fn truncate_above(&self, rho: f64) -> Field {
        self.map(|v| (v - rho).max(0.0))
    }

    /// `(f + ρ)⁻ = max(−(f + ρ), 0)`.
    pub fn truncate_below(&self, rho: f64) -> Field {
        self.map(|v| (-(v + rho)).max(0.0))
    }

    /// `‖(−Δ)^{-1/2} f‖` for the zero-mean part of `f`.
    pub fn inverse_sqrt_laplacian_norm(&self) -> f64 {
        let spectral = Spectral::new(self.grid);
        let hat = self.spectrum(&spectral);
        let sum = compensated_sum(
            hat.iter()
                .zip(spectral.k2())
                .filter(|(_, &k2)| k2 > 0.0)
                .map(|(c, &k2)| c.norm_sqr() / k2),
        );
        (sum * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }
}

pub(crate) fn h1_from_spectrum(spectral: &Spectral, hat: &[Complex64]) -> f64 {
    let grid = spectral.grid();
    let sum = compensated_sum(hat.iter().zip(spectral.kd2()).map(|(c, &k2)| k2 * c.norm_sqr()));
    sum * grid.cell_volume() / grid.len() as f64
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::new(grid, values).unwrap()
    }

    /// Sum of a few low Fourier modes; exactly representable on the grid.
    fn band_limited(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(usize, usize, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(0..grid.dim()),
                    rng.gen_range(1..4),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let l = grid.edge_length();
        Field::from_fn(grid, |x| {
            modes
                .iter()
                .map(|&(axis, k, amp, phase)| amp * (2.0 * PI * k as f64 * x[axis] / l + phase).sin())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 8, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(1, 2, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(2, 8, f64::NAN).is_err());
    }

    #[test]
    fn cell_volume_matches_definition() {
        let g = Grid::new(3, 16, 2.5).unwrap();
        assert_eq!(g.cell_volume(), (2.5 / 16.0_f64).powi(3));
        assert_eq!(g.len(), 4096);
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let err = Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
        assert!(Field::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn shifted_wraps() {
        let g = Grid::new(2, 4, 1.0).unwrap();
        let idx = g.flat_index(&[3, 0]);
        assert_eq!(g.shifted(idx, 0, 1), g.flat_index(&[0, 0]));
        assert_eq!(g.shifted(idx, 1, -1), g.flat_index(&[3, 3]));
    }

    #[test]
    fn mean_of_constant_and_mode() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        assert_eq!(Field::constant(g, 0.37).mean(), 0.37);
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!(f.mean().abs() < 1e-14);
    }

    #[test]
    fn mean_matches_extended_summation() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = random_field(g, 11);
        // Double-double accumulation (TwoSum) as the extended-precision oracle.
        let (mut hi, mut lo) = (0.0_f64, 0.0_f64);
        for &v in f.values() {
            let s = hi + v;
            let bb = s - hi;
            let err = (hi - (s - bb)) + (v - bb);
            hi = s;
            lo += err;
        }
        let oracle = (hi + lo) / 16.0;
        assert!((f.mean() - oracle).abs() < 1e-14);
    }

    #[test]
    fn lp_norms() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let one = Field::constant(g, 1.0);
        for p in [1.0, 2.0, 10.0 / 3.0, 7.0, f64::INFINITY] {
            assert!((one.lp_norm(p).unwrap() - 1.0).abs() < 1e-14);
        }
        let mut v = vec![0.0; g.len()];
        v[5] = 0.5;
        assert_eq!(Field::new(g, v).unwrap().lp_norm(f64::INFINITY).unwrap(), 0.5);
        assert!(one.lp_norm(0.5).is_err());
        assert!(one.lp_norm(f64::NAN).is_err());
    }

    #[test]
    fn lp_norm_ten_thirds_matches_quadrature() {
        let g = Grid::new(1, 32, 2.0).unwrap();
        let f = random_field(g, 3);
        let p = 10.0 / 3.0;
        let mut terms: Vec<f64> = f.values().iter().map(|v| v.abs().powf(p)).collect();
        terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = (terms.iter().sum::<f64>() * g.cell_volume()).powf(1.0 / p);
        let got = f.lp_norm(p).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-13);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for c in Field::constant(g, 0.3).gradient() {
            assert!(c.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_of_single_mode() {
        let l = 3.0;
        let g = Grid::new(1, 16, l).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0] / l).sin()).unwrap();
        let dx = &f.gradient()[0];
        for (i, v) in dx.values().iter().enumerate() {
            let x = g.coords(i)[0];
            let exact = 2.0 * PI / l * (2.0 * PI * x / l).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_at_second_order() {
        // Smooth non-trigonometric periodic profile; FD error must drop ~4x per halving.
        let errors: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = Grid::new(1, n, 1.0).unwrap();
                let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin().exp()).unwrap();
                let spec = &f.gradient()[0];
                let h = g.spacing();
                (0..n)
                    .map(|i| {
                        let fd = (f.values()[g.shifted(i, 0, 1)] - f.values()[g.shifted(i, 0, -1)]) / (2.0 * h);
                        (fd - spec.values()[i]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn h1_of_single_mode() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let expected = (2.0 * PI).powi(2) * 0.5;
        assert!((f.h1_seminorm_sq() - expected).abs() < 1e-12 * expected);
        assert_eq!(Field::constant(g, 2.0).h1_seminorm_sq(), 0.0);
    }

    #[test]
    fn h1_real_and_spectral_agree() {
        for dim in 1..=3 {
            let g = Grid::new(dim, 8, 1.7).unwrap();
            let f = random_field(g, dim as u64);
            let a = f.h1_seminorm_sq();
            let b = f.h1_seminorm_sq_spectral();
            assert!(((a - b) / b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn truncations() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let low = Field::constant(g, 0.2);
        assert!(low.truncate_above(0.5).values().iter().all(|&v| v == 0.0));
        let high = Field::constant(g, 0.9);
        for v in high.truncate_above(0.5).values() {
            assert!((v - 0.4).abs() < 1e-15);
        }
        let f = random_field(g, 5);
        let t = f.truncate_above(0.0);
        for (a, b) in f.values().iter().zip(t.values()) {
            assert_eq!(*b, if *a > 0.0 { *a } else { 0.0 });
        }
        let below = f.truncate_below(0.3);
        for (a, b) in f.values().iter().zip(below.values()) {
            assert_eq!(*b, if *a + 0.3 < 0.0 { -(*a + 0.3) } else { 0.0 });
        }
    }

    #[test]
    fn truncated_mean_nonincreasing_in_rho() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        for seed in 0..20 {
            let f = random_field(g, 100 + seed);
            let means: Vec<f64> = (0..10)
                .map(|j| f.truncate_above(-1.0 + 0.2 * j as f64).mean())
                .collect();
            assert!(means.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn band_limited_gradient_is_exact() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = band_limited(g, 9);
        // For band-limited data Parseval and real space agree and the
        // spectral L2 norm matches the quadrature norm.
        assert!((f.l2_norm() - f.l2_norm_spectral()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn inverse_sqrt_laplacian_of_mode() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos() + 3.0).unwrap();
        // ‖cos‖ / (2π) with the constant removed.
        let expected = 0.5_f64.sqrt() / (2.0 * PI);
        assert!((f.inverse_sqrt_laplacian_norm() - expected).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn l2_matches_parseval(seed in any::<u64>(), dim in 1usize..=3) {
            let g = Grid::new(dim, 8, 1.3).unwrap();
            let f = random_field(g, seed);
            let a = f.l2_norm();
            let b = f.l2_norm_spectral();
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }

        #[test]
        fn mean_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = Grid::new(2, 8, 1.0).unwrap();
            let f = random_field(g, seed);
            let h = random_field(g, seed.wrapping_add(1));
            let combo = f.linear_combination(a, &h, b).unwrap();
            prop_assert!((combo.mean() - (a * f.mean() + b * h.mean())).abs() < 1e-13);
        }
    }
}
