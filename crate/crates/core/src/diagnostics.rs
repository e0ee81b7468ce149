//! Scalar diagnostics: the nonlocal energy in both of its forms, separation
//! margin, `‖μ‖_∞`, the Gagliardo-Nirenberg ratio and the empirical
//! Poincaré-type ratio for truncations.

use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field};
use crate::kernel::Kernel;
use crate::potential::PotentialParams;

/// Column names of [`DiagnosticsRow`], in CSV order.
pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "mass",
    "energy",
    "energy_alt",
    "dissipation_accum",
    "energy_residual",
    "min_phi",
    "max_phi",
    "delta_sep",
    "mu_linf",
    "inner_iters",
    "dt_used",
];

/// One time-series record. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub energy_alt: f64,
    pub dissipation_accum: f64,
    /// `E(t) + dissipation_accum − E(0)`.
    pub energy_residual: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    pub delta_sep: f64,
    pub mu_linf: f64,
    pub inner_iters: usize,
    pub dt_used: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl TimeSeries {
    pub fn push(&mut self, row: DiagnosticsRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Smallest `delta_sep` over rows with `t ≥ t_from`.
    pub fn min_separation_after(&self, t_from: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.t >= t_from)
            .map(|r| r.delta_sep)
            .reduce(f64::min)
    }
}

fn potential_integral(phi: &Field, potential: &PotentialParams) -> Result<f64> {
    let values = phi
        .values()
        .iter()
        .map(|&s| potential.f(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(values) * phi.grid().cell_volume())
}

/// `E(φ) = −½∫φ(J∗φ) + ∫F(φ)`.
pub fn energy(phi: &Field, kernel: &Kernel, potential: &PotentialParams) -> Result<f64> {
    let conv = kernel.convolve(phi)?;
    Ok(-0.5 * phi.inner(&conv)? + potential_integral(phi, potential)?)
}

/// The same energy written as `¼∬J(x−y)|φ(x)−φ(y)|² + ∫(F(φ) − (J∗1)/2·φ²)`,
/// with the double integral expanded through `J∗1 = ∫J` on the torus.
pub fn energy_alt(phi: &Field, kernel: &Kernel, potential: &PotentialParams) -> Result<f64> {
    let conv = kernel.convolve(phi)?;
    let a = kernel.j_integral();
    let norm_sq = phi.inner(phi)?;
    let interaction = 0.5 * a * norm_sq - 0.5 * phi.inner(&conv)?;
    let cell = phi.grid().cell_volume();
    let local = phi
        .values()
        .iter()
        .map(|&s| Ok(potential.f(s)? - 0.5 * a * s * s))
        .collect::<Result<Vec<_>>>()?;
    Ok(interaction + compensated_sum(local) * cell)
}

/// `1 − ‖φ‖_∞`; positive iff the field is strictly separated.
pub fn separation_margin(phi: &Field) -> f64 {
    1.0 - phi.sup_norm()
}

pub fn mu_linf(state: &SimState) -> f64 {
    state.mu.sup_norm()
}

/// Upper bound `sup_{|s| ≤ 1−δ*} |F'(s)| + ∫J` for `‖μ‖_∞` on a trajectory
/// separated by `δ*`.
pub fn mu_linf_bound(potential: &PotentialParams, delta_star: f64, j_integral: f64) -> Result<f64> {
    Ok(potential.f_prime(1.0 - delta_star)? + j_integral)
}

/// `‖u‖_{L^{10/3}} / (‖u‖^{2/5} ‖u‖_V^{3/5})`, `‖u‖_V² = ‖u‖² + ‖∇u‖²`.
pub fn gn_ratio(u: &Field) -> Result<f64> {
    let l2 = u.l2_norm();
    if l2 == 0.0 {
        return Err(Error::param("u", "zero field has no Gagliardo-Nirenberg ratio"));
    }
    let v_norm = (l2 * l2 + u.h1_seminorm_sq()).sqrt();
    Ok(u.lp_norm(10.0 / 3.0)? / (l2.powf(0.4) * v_norm.powf(0.6)))
}

/// Ratio `‖(φ−ρ)⁺‖ / ‖∇(φ−ρ)⁺‖`, gradient by centered differences.
///
/// `Ok(None)` when the truncation vanishes; an error when it is a nonzero
/// constant (no vanishing set, so no Poincaré bound can hold).
pub fn poincare_ratio(phi: &Field, rho: f64) -> Result<Option<f64>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", format!("{rho} not in (0, 1)")));
    }
    let truncated = phi.truncate_above(rho);
    let norm = truncated.l2_norm();
    if norm == 0.0 {
        return Ok(None);
    }
    let grad = truncated.fd_gradient_norm_sq().sqrt();
    if grad <= 1e-14 {
        return Err(Error::DegenerateTruncation { rho, norm });
    }
    Ok(Some(norm / grad))
}

/// Largest Poincaré ratio over every field and level, checking both the
/// upper phase (`φ`) and the lower phase (`−φ`). `None` if every truncation
/// vanished.
pub fn poincare_sup<'a>(fields: impl IntoIterator<Item = &'a Field>, levels: &[f64]) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for f in fields {
        let mirrored = f.scale(-1.0);
        for &rho in levels {
            for g in [f, &mirrored] {
                if let Some(r) = poincare_ratio(g, rho)? {
                    best = Some(best.map_or(r, |b| b.max(r)));
                }
            }
        }
    }
    Ok(best)
}

pub fn row(
    state: &SimState,
    kernel: &Kernel,
    potential: &PotentialParams,
    initial_energy: f64,
) -> Result<DiagnosticsRow> {
    let e = energy(&state.phi, kernel, potential)?;
    row_with_energy(state, kernel, potential, e, initial_energy)
}

pub fn row_with_energy(
    state: &SimState,
    kernel: &Kernel,
    potential: &PotentialParams,
    energy: f64,
    initial_energy: f64,
) -> Result<DiagnosticsRow> {
    let min_phi = state.phi.min();
    let max_phi = state.phi.max();
    Ok(DiagnosticsRow {
        t: state.t,
        mass: state.phi.mean(),
        energy,
        energy_alt: energy_alt(&state.phi, kernel, potential)?,
        dissipation_accum: state.dissipation_accum,
        energy_residual: energy + state.dissipation_accum - initial_energy,
        min_phi,
        max_phi,
        delta_sep: 1.0 - min_phi.abs().max(max_phi.abs()),
        mu_linf: mu_linf(state),
        inner_iters: state.last_inner_iters,
        dt_used: state.last_dt,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dynamics::{init_state, InitialData};
    use crate::grid::Grid;
    use crate::kernel::{KernelFamily, KernelParams};

    fn random_field(grid: Grid, seed: u64, amp: f64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.gen_range(-amp..amp)).collect();
        Field::new(grid, values).unwrap()
    }

    fn kernel(grid: Grid) -> Kernel {
        Kernel::build(
            KernelFamily::Gaussian,
            KernelParams {
                amplitude: 3.0,
                width: 0.1,
            },
            grid,
        )
        .unwrap()
    }

    fn pot() -> PotentialParams {
        PotentialParams::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn energy_of_zero_and_constant() {
        let g = Grid::new(2, 16, 1.5).unwrap();
        let k = kernel(g);
        assert_eq!(energy(&Field::zeros(g), &k, &pot()).unwrap(), 0.0);
        assert_eq!(energy_alt(&Field::zeros(g), &k, &pot()).unwrap(), 0.0);
        let c = 0.6;
        let expected = g.volume() * (pot().f(c).unwrap() - 0.5 * c * c * k.j_integral());
        let phi = Field::constant(g, c);
        assert!((energy(&phi, &k, &pot()).unwrap() - expected).abs() < 1e-12);
        assert!((energy_alt(&phi, &k, &pot()).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_double_sum() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let k = kernel(g);
        let phi = random_field(g, 4, 0.9);
        let h = g.cell_volume();
        let n = 8;
        let mut double = 0.0;
        for i in 0..n {
            for j in 0..n {
                double += k.samples()[(i + n - j) % n] * phi.values()[i] * phi.values()[j] * h * h;
            }
        }
        let local: f64 = phi.values().iter().map(|&s| pot().f(s).unwrap() * h).sum();
        let oracle = -0.5 * double + local;
        assert!((energy(&phi, &k, &pot()).unwrap() - oracle).abs() < 1e-12);

        // Direct quadruple-difference form ¼ΣΣ J(x−y)|φ(x)−φ(y)|².
        let mut diff = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = phi.values()[i] - phi.values()[j];
                diff += k.samples()[(i + n - j) % n] * d * d * h * h;
            }
        }
        let a = k.j_integral();
        let alt_oracle = 0.25 * diff
            + phi
                .values()
                .iter()
                .map(|&s| (pot().f(s).unwrap() - 0.5 * a * s * s) * h)
                .sum::<f64>();
        assert!((energy_alt(&phi, &k, &pot()).unwrap() - alt_oracle).abs() < 1e-12);
    }

    #[test]
    fn two_energy_forms_agree() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let k = kernel(g);
        for seed in 0..20 {
            let phi = random_field(g, seed, 0.95);
            let e = energy(&phi, &k, &pot()).unwrap();
            let ea = energy_alt(&phi, &k, &pot()).unwrap();
            assert!(((e - ea) / e).abs() < 1e-11);
        }
    }

    #[test]
    fn energy_rejects_out_of_range() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let k = kernel(g);
        assert!(energy(&Field::constant(g, 1.2), &k, &pot()).is_err());
    }

    #[test]
    fn separation() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        assert_eq!(separation_margin(&Field::zeros(g)), 1.0);
        let mut v = vec![0.0; 8];
        v[1] = 0.95;
        v[2] = -0.6;
        let f = Field::new(g, v).unwrap();
        assert!((separation_margin(&f) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mu_linf_of_uniform_states() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let k = kernel(g);
        let s = init_state(
            &k,
            &pot(),
            &InitialData::Constant {
                m: 0.0,
                noise_amplitude: 0.0,
                seed: 0,
            },
            0.1,
        )
        .unwrap();
        assert_eq!(mu_linf(&s), 0.0);
        let s = init_state(
            &k,
            &pot(),
            &InitialData::Constant {
                m: -0.4,
                noise_amplitude: 0.0,
                seed: 0,
            },
            0.1,
        )
        .unwrap();
        let expected = (pot().f_prime(-0.4).unwrap() + 0.4 * k.j_integral()).abs();
        assert!((mu_linf(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn gn_ratio_properties() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        assert!((gn_ratio(&Field::constant(g, -0.3)).unwrap() - 1.0).abs() < 1e-13);
        assert!(gn_ratio(&Field::zeros(g)).is_err());
        let u = random_field(g, 8, 1.0);
        let r1 = gn_ratio(&u).unwrap();
        let r2 = gn_ratio(&u.scale(2.0)).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
        assert!(r1.is_finite() && r1 > 0.0);
    }

    #[test]
    fn poincare_ratio_outcomes() {
        let g = Grid::new(1, 256, 1.0).unwrap();
        assert_eq!(poincare_ratio(&Field::constant(g, 0.2), 0.5).unwrap(), None);
        assert!(matches!(
            poincare_ratio(&Field::constant(g, 0.8), 0.5),
            Err(Error::DegenerateTruncation { .. })
        ));
        assert!(poincare_ratio(&Field::zeros(g), 1.0).is_err());

        let phi = Field::from_fn(g, |x| 0.9 * (2.0 * PI * x[0]).sin()).unwrap();
        let got = poincare_ratio(&phi, 0.5).unwrap().unwrap();
        // Continuum oracle: fine midpoint quadrature of the truncated profile
        // and of its a.e. derivative.
        let m = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let x = (i as f64 + 0.5) / m as f64;
            let v = 0.9 * (2.0 * PI * x).sin() - 0.5;
            if v > 0.0 {
                num += v * v / m as f64;
                den += (0.9 * 2.0 * PI * (2.0 * PI * x).cos()).powi(2) / m as f64;
            }
        }
        let oracle = (num / den).sqrt();
        assert!(((got - oracle) / oracle).abs() < 0.05, "{got} vs {oracle}");
    }
}
