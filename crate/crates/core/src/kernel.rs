//! Interaction kernels `J` sampled on the periodic grid.
//!
//! Samples are taken at the minimum-image displacement of every grid point
//! from the origin, so `J(x) = J(−x)` holds exactly on the grid. Convolution
//! is the periodic discrete convolution `Σ_j J(x_i − x_j) f_j · cell_volume`,
//! computed through the DFT of the samples.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::spectral::{signed_index, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `A·exp(−|x|²/(2σ²))`
    Gaussian,
    /// `A·exp(−|x|/σ)`
    Exponential,
    /// `A/(4π·max(|x|, r_m))`
    MollifiedNewtonian,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
            KernelFamily::MollifiedNewtonian => "mollified_newtonian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "exponential" => Ok(KernelFamily::Exponential),
            "mollified_newtonian" => Ok(KernelFamily::MollifiedNewtonian),
            other => Err(format!("unknown kernel family `{other}`")),
        }
    }
}

/// Family parameters. `width` is σ for gaussian/exponential and the
/// mollification radius `r_m` for the Newtonian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub amplitude: f64,
    pub width: f64,
}

impl KernelParams {
    /// Positivity plus the family's resolution constraints on `grid`.
    pub fn validate(&self, family: KernelFamily, grid: &Grid) -> Result<()> {
        let KernelParams { amplitude, width } = *self;
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::param(
                "kernel.amplitude",
                format!("{amplitude} must be positive"),
            ));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::param("kernel.width", format!("{width} must be positive")));
        }
        match family {
            KernelFamily::Gaussian if width > grid.edge_length() / 6.0 => {
                return Err(Error::param(
                    "kernel.width",
                    format!("gaussian width {width} exceeds L/6 (periodization error)"),
                ));
            }
            KernelFamily::MollifiedNewtonian if width < 2.0 * grid.spacing() => {
                return Err(Error::param(
                    "kernel.width",
                    format!(
                        "mollification radius {width} under-resolved (needs >= {})",
                        2.0 * grid.spacing()
                    ),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    family: KernelFamily,
    params: KernelParams,
    grid: Grid,
    spectral: Spectral,
    samples: Vec<f64>,
    multiplier: Vec<f64>,
    gradient_multipliers: Vec<Vec<Complex64>>,
    j_integral: f64,
    grad_j_l1: f64,
}

impl Kernel {
    pub fn build(family: KernelFamily, params: KernelParams, grid: Grid) -> Result<Self> {
        params.validate(family, &grid)?;

        let h = grid.spacing();
        let n = grid.n_per_axis();
        let dim = grid.dim();
        let len = grid.len();
        let mut samples = vec![0.0; len];
        let mut grads = vec![vec![0.0; len]; dim];
        for idx in 0..len {
            let mut disp = [0.0; 3];
            for (axis, d) in disp.iter_mut().enumerate().take(dim) {
                *d = signed_index(grid.axis_index(idx, axis), n) as f64 * h;
            }
            let r = disp.iter().map(|d| d * d).sum::<f64>().sqrt();
            let (value, radial_slope) = profile(family, params, r);
            samples[idx] = value;
            if r > 0.0 {
                for axis in 0..dim {
                    grads[axis][idx] = radial_slope * disp[axis] / r;
                }
            }
        }

        let cell = grid.cell_volume();
        let spectral = Spectral::new(grid);
        let hat = spectral.forward_real(&samples);
        let scale = hat.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if let Some(bad) = hat.iter().find(|c| c.im.abs() > 1e-12 * scale.max(1.0)) {
            return Err(Error::param(
                "kernel",
                format!("spectral multiplier not real (imag {:e})", bad.im),
            ));
        }
        let multiplier = hat.iter().map(|c| c.re).collect();
        let gradient_multipliers = grads.iter().map(|g| spectral.forward_real(g)).collect();

        let j_integral = samples.iter().sum::<f64>() * cell;
        let grad_j_l1 = (0..len)
            .map(|idx| grads.iter().map(|g| g[idx] * g[idx]).sum::<f64>().sqrt())
            .sum::<f64>()
            * cell;

        Ok(Self {
            family,
            params,
            grid,
            spectral,
            samples,
            multiplier,
            gradient_multipliers,
            j_integral,
            grad_j_l1,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub(crate) fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Kernel samples at the minimum-image displacements.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// DFT of the samples (real by even symmetry).
    pub fn spectral_multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// `∫J`, equal to `J∗1` on the torus.
    pub fn j_integral(&self) -> f64 {
        self.j_integral
    }

    /// `‖∇J‖_{L¹}` over the periodic box.
    pub fn grad_j_l1(&self) -> f64 {
        self.grad_j_l1
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.to_string(),
                found: f.grid().to_string(),
            });
        }
        Ok(())
    }

    /// `J∗f`.
    pub fn convolve(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        let hat = self.spectral.forward_real(f.values());
        Ok(Field::from_raw(self.grid, self.convolve_spectrum(hat)))
    }

    /// `J∗f` from the (unnormalized) spectrum of `f`; consumes the buffer.
    pub(crate) fn convolve_spectrum(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        let cell = self.grid.cell_volume();
        for (c, m) in hat.iter_mut().zip(&self.multiplier) {
            *c *= m * cell;
        }
        self.spectral.inverse_real(hat)
    }

    /// `(∇J)∗f`, one field per axis, from the sampled analytic gradient.
    pub fn convolve_gradient(&self, f: &Field) -> Result<Vec<Field>> {
        self.check_grid(f)?;
        let hat = self.spectral.forward_real(f.values());
        let cell = self.grid.cell_volume();
        Ok(self
            .gradient_multipliers
            .iter()
            .map(|gm| {
                let product = hat.iter().zip(gm).map(|(a, b)| a * b * cell).collect();
                Field::from_raw(self.grid, self.spectral.inverse_real(product))
            })
            .collect())
    }
}

/// Kernel value and radial derivative at distance `r`.
fn profile(family: KernelFamily, params: KernelParams, r: f64) -> (f64, f64) {
    let KernelParams { amplitude, width } = params;
    match family {
        KernelFamily::Gaussian => {
            let v = amplitude * (-(r * r) / (2.0 * width * width)).exp();
            (v, -r / (width * width) * v)
        }
        KernelFamily::Exponential => {
            let v = amplitude * (-r / width).exp();
            (v, -v / width)
        }
        KernelFamily::MollifiedNewtonian => {
            if r <= width {
                (amplitude / (4.0 * PI * width), 0.0)
            } else {
                (amplitude / (4.0 * PI * r), -amplitude / (4.0 * PI * r * r))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_field(grid: Grid, seed: u64, amp: f64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.gen_range(-amp..amp)).collect();
        Field::new(grid, values).unwrap()
    }

    fn gaussian(grid: Grid, a: f64, s: f64) -> Kernel {
        Kernel::build(KernelFamily::Gaussian, KernelParams { amplitude: a, width: s }, grid).unwrap()
    }

    #[test]
    fn parameter_errors() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        let bad = |family, amplitude, width| Kernel::build(family, KernelParams { amplitude, width }, g).is_err();
        assert!(bad(KernelFamily::Gaussian, 0.0, 0.1));
        assert!(bad(KernelFamily::Gaussian, 1.0, -0.1));
        assert!(bad(KernelFamily::Gaussian, 1.0, 0.2));
        assert!(bad(KernelFamily::MollifiedNewtonian, 1.0, 0.1));
        assert!(!bad(KernelFamily::MollifiedNewtonian, 1.0, 0.125));
        assert!("bessel".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn gaussian_integral_matches_closed_form() {
        for dim in 1..=3 {
            let g = Grid::new(dim, 64, 1.0).unwrap();
            let (a, s) = (1.3, 0.1);
            let k = gaussian(g, a, s);
            let exact = a * (2.0 * PI * s * s).powf(dim as f64 / 2.0);
            assert!(((k.j_integral() - exact) / exact).abs() < 1e-3, "dim {dim}");
        }
    }

    #[test]
    fn dc_mode_is_sum_of_samples() {
        for family in [
            KernelFamily::Gaussian,
            KernelFamily::Exponential,
            KernelFamily::MollifiedNewtonian,
        ] {
            let g = Grid::new(2, 16, 1.0).unwrap();
            let k = Kernel::build(
                family,
                KernelParams {
                    amplitude: 1.0,
                    width: 0.15,
                },
                g,
            )
            .unwrap();
            let dc = k.spectral_multiplier()[0];
            assert!((dc - k.j_integral() / g.cell_volume()).abs() < 1e-12 * dc.abs());
            assert!(k.j_integral() > 0.0 && k.grad_j_l1() > 0.0);
        }
    }

    #[test]
    fn samples_are_even() {
        for family in [
            KernelFamily::Gaussian,
            KernelFamily::Exponential,
            KernelFamily::MollifiedNewtonian,
        ] {
            let g = Grid::new(3, 16, 1.0).unwrap();
            let k = Kernel::build(
                family,
                KernelParams {
                    amplitude: 2.0,
                    width: 0.16,
                },
                g,
            )
            .unwrap();
            for idx in 0..g.len() {
                let mirror: Vec<usize> = (0..3).map(|ax| (16 - g.axis_index(idx, ax)) % 16).collect();
                assert_eq!(k.samples()[idx], k.samples()[g.flat_index(&mirror)]);
            }
        }
    }

    fn direct_convolution(k: &Kernel, f: &Field) -> Vec<f64> {
        let g = f.grid();
        let n = g.n_per_axis();
        (0..g.len())
            .map(|i| {
                (0..g.len())
                    .map(|j| {
                        let diff: Vec<usize> = (0..g.dim())
                            .map(|ax| (g.axis_index(i, ax) + n - g.axis_index(j, ax)) % n)
                            .collect();
                        k.samples()[g.flat_index(&diff)] * f.values()[j]
                    })
                    .sum::<f64>()
                    * g.cell_volume()
            })
            .collect()
    }

    #[test]
    fn convolution_matches_direct_sum() {
        for (dim, n) in [(1, 8), (2, 8), (3, 4)] {
            let g = Grid::new(dim, n, 1.0).unwrap();
            let k = Kernel::build(
                KernelFamily::Exponential,
                KernelParams {
                    amplitude: 1.0,
                    width: 0.2,
                },
                g,
            )
            .unwrap();
            let f = random_field(g, 7, 1.0);
            let fast = k.convolve(&f).unwrap();
            for (a, b) in fast.values().iter().zip(direct_convolution(&k, &f)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_of_constant_and_mode() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let k = gaussian(g, 1.0, 0.08);
        let c = k.convolve(&Field::constant(g, 0.4)).unwrap();
        for v in c.values() {
            assert!((v - 0.4 * k.j_integral()).abs() < 1e-12);
        }
        let mode = Field::from_fn(g, |x| (2.0 * PI * 3.0 * x[0]).cos()).unwrap();
        let out = k.convolve(&mode).unwrap();
        let factor = k.spectral_multiplier()[3] * g.cell_volume();
        for (a, b) in out.values().iter().zip(mode.values()) {
            assert!((a - factor * b).abs() < 1e-12);
        }
        let other = Grid::new(1, 16, 1.0).unwrap();
        assert!(k.convolve(&Field::zeros(other)).is_err());
    }

    #[test]
    fn convolution_preserves_mean_and_is_linear() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let k = gaussian(g, 1.0, 0.1);
        let f = random_field(g, 1, 1.0);
        let h = random_field(g, 2, 1.0);
        let jf = k.convolve(&f).unwrap();
        assert!((jf.mean() - k.j_integral() * f.mean()).abs() < 1e-12 * (k.j_integral() * f.mean()).abs().max(1e-3));
        let lhs = k.convolve(&f.linear_combination(2.0, &h, -0.5).unwrap()).unwrap();
        let rhs = jf.linear_combination(2.0, &k.convolve(&h).unwrap(), -0.5).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_convolution_obeys_young() {
        for family in [
            KernelFamily::Gaussian,
            KernelFamily::Exponential,
            KernelFamily::MollifiedNewtonian,
        ] {
            let g = Grid::new(2, 32, 1.0).unwrap();
            let k = Kernel::build(
                family,
                KernelParams {
                    amplitude: 1.0,
                    width: 0.1,
                },
                g,
            )
            .unwrap();
            for seed in 0..20 {
                let f = random_field(g, seed, 1.0);
                let comps = k.convolve_gradient(&f).unwrap();
                let sup = (0..g.len())
                    .map(|i| comps.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                assert!(sup <= k.grad_j_l1() * f.sup_norm() * (1.0 + 1e-6));
            }
        }
    }
}
