//! Mass-constrained stationary states `F'(φ∞) − J∗φ∞ = μ∞` and long-time
//! convergence monitoring.

use crate::diagnostics::{energy, TimeSeries};
use crate::dynamics::chemical_potential;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::Kernel;
use crate::potential::PotentialParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// Sup-norm fixed-point increment at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial damping `ω ∈ (0, 1]`.
    pub omega: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 20_000,
            omega: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub phi_inf: Field,
    pub mu_inf: f64,
    /// `‖F'(φ∞) − J∗φ∞ − μ∞‖_∞`.
    pub residual_linf: f64,
    pub mass_error: f64,
    pub iterations: usize,
    pub separation_margin: f64,
    pub last_increment: f64,
    pub converged: bool,
}

impl EquilibriumResult {
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::StationaryNotConverged {
                iterations: self.iterations,
                increment: self.last_increment,
            })
        }
    }
}

/// Finds `μ` with `mean((F')⁻¹(c + μ)) = m` by bisection.
///
/// The map is strictly increasing in `μ`, and the initial bracket puts every
/// point strictly above (below) `m`, so the root is always enclosed.
fn constrained_shift(conv: &Field, potential: &PotentialParams, m: f64) -> f64 {
    let alpha = potential.alpha_bar();
    let centre = alpha * m.atanh();
    let mut lo = centre - conv.max() - 1.0;
    let mut hi = centre - conv.min() + 1.0;
    let mass = |mu: f64| conv.map(|c| potential.f_prime_inverse(c + mu)).mean();
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (m_lo, m_hi) = (mass(lo), mass(hi));
    if (m_lo - m).abs() <= (m_hi - m).abs() {
        lo
    } else {
        hi
    }
}

/// Damped fixed-point iteration `φ ← (1−ω)φ + ω·(F')⁻¹(J∗φ + μ)` with `μ`
/// re-solved each sweep to hold the mean at `m`. `ω` is halved when the
/// update grows and reverses direction.
///
/// Returns the best iterate (flagged unconverged) when `max_iters` runs out.
pub fn solve_stationary(
    kernel: &Kernel,
    potential: &PotentialParams,
    m: f64,
    guess: &Field,
    options: &StationaryOptions,
) -> Result<EquilibriumResult> {
    if !(m.abs() < 1.0) {
        return Err(Error::param("m", format!("pure phase mean {m}")));
    }
    if !(options.omega > 0.0 && options.omega <= 1.0) {
        return Err(Error::param("omega", format!("{} not in (0, 1]", options.omega)));
    }
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    guess.ensure_same_grid(&Field::zeros(kernel.grid()))?;
    if !(guess.sup_norm() < 1.0) {
        return Err(Error::param("guess", "must satisfy max |guess| < 1"));
    }

    let mut phi = guess.clone();
    let mut omega = options.omega;
    let mut previous = f64::INFINITY;
    let mut best: Option<(f64, Field)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut increment = f64::INFINITY;
    let mut last_update: Option<Field> = None;

    while iterations < options.max_iters {
        iterations += 1;
        let conv = kernel.convolve(&phi)?;
        let mu = constrained_shift(&conv, potential, m);
        let image = conv.map(|c| potential.f_prime_inverse(c + mu));
        let update = image.sub(&phi)?;
        increment = update.sup_norm();
        if increment <= options.tol {
            phi = image;
            converged = true;
            break;
        }
        if best.as_ref().is_none_or(|(b, _)| increment < *b) {
            best = Some((increment, image.clone()));
        }
        // Growth alone also happens while leaving an unstable state; only
        // growth with a reversed update direction is treated as overshoot.
        let reversed = last_update
            .as_ref()
            .is_some_and(|u: &Field| u.inner(&update).is_ok_and(|ip| ip < 0.0));
        if increment > previous && reversed {
            omega = (omega * 0.5).max(1e-3);
        }
        previous = increment;
        phi = phi.linear_combination(1.0, &update, omega)?;
        last_update = Some(update);
    }
    if !converged {
        if let Some((inc, field)) = best {
            increment = inc;
            phi = field;
        }
    }

    let residual_field = chemical_potential(&phi, kernel, potential)?;
    let mu_inf = residual_field.mean();
    let residual_linf = residual_field
        .values()
        .iter()
        .fold(0.0_f64, |r, v| r.max((v - mu_inf).abs()));
    Ok(EquilibriumResult {
        mass_error: (phi.mean() - m).abs(),
        separation_margin: 1.0 - phi.sup_norm(),
        phi_inf: phi,
        mu_inf,
        residual_linf,
        iterations,
        last_increment: increment,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSample {
    pub t: f64,
    /// `‖∇μ(t)‖`.
    pub grad_mu: f64,
    /// `‖φ(t) − φ∞‖`.
    pub distance: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub samples: Vec<ConvergenceSample>,
    pub energy_inf: f64,
    pub final_grad_mu: f64,
    pub grad_mu_below_trigger: bool,
    /// `‖φ(t) − φ∞‖` nonincreasing over `t ∈ [T/10, T]`.
    pub distance_monotone_tail: bool,
    /// `E(φ(t)) ≥ E(φ∞) − tol` at every sample.
    pub energy_above_limit: bool,
    /// Energy column of the time series nonincreasing (with tolerance).
    pub energy_nonincreasing: bool,
    /// `|E(φ(T)) − E(φ∞)| ≤ tol`.
    pub energy_limit_matches: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    pub grad_mu_trigger: f64,
    pub energy_tol: f64,
    /// Slack allowed in the tail monotonicity of `‖φ(t) − φ∞‖`.
    pub distance_slack: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            grad_mu_trigger: 1e-6,
            energy_tol: 1e-10,
            distance_slack: 1e-13,
        }
    }
}

/// Report-only check of the approach to `phi_inf` along stored snapshots.
pub fn monitor_convergence(
    series: &TimeSeries,
    snapshots: &[(f64, Field)],
    phi_inf: &Field,
    kernel: &Kernel,
    potential: &PotentialParams,
    options: &MonitorOptions,
) -> Result<ConvergenceReport> {
    let energy_inf = energy(phi_inf, kernel, potential)?;
    let mut samples = snapshots
        .iter()
        .map(|(t, phi)| {
            let mu = chemical_potential(phi, kernel, potential)?;
            Ok(ConvergenceSample {
                t: *t,
                grad_mu: mu.h1_seminorm_sq().sqrt(),
                distance: phi.sub(phi_inf)?.l2_norm(),
                energy: energy(phi, kernel, potential)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    let last = samples
        .last()
        .copied()
        .ok_or_else(|| Error::Trajectory("no snapshots to monitor".into()))?;

    let tail_start = last.t / 10.0;
    let tail: Vec<&ConvergenceSample> = samples.iter().filter(|s| s.t >= tail_start).collect();
    let distance_monotone_tail = tail
        .windows(2)
        .all(|w| w[1].distance <= w[0].distance + options.distance_slack);
    let energy_nonincreasing = series
        .rows
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs() + 1e-13);

    Ok(ConvergenceReport {
        energy_above_limit: samples.iter().all(|s| s.energy >= energy_inf - options.energy_tol),
        energy_limit_matches: (last.energy - energy_inf).abs() <= options.energy_tol,
        final_grad_mu: last.grad_mu,
        grad_mu_below_trigger: last.grad_mu < options.grad_mu_trigger,
        distance_monotone_tail,
        energy_nonincreasing,
        energy_inf,
        samples,
    })
}
