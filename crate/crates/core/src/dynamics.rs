//! Time integration of `∂φ/∂t = Δμ`, `μ = F'(φ) − J∗φ`.
//!
//! Each step solves the convex-splitting system
//!
//! ```text
//! φⁿ⁺¹ − Δt·Δ F'(φⁿ⁺¹) = φⁿ − Δt·Δ(J∗φⁿ)
//! ```
//!
//! with a stabilized fixed-point iteration that is diagonal in Fourier space.
//! Iterates are damped back inside `|φ| ≤ 1 − ε_safe` before the potential is
//! ever evaluated, and a failing step is retried with half the time step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{self, DiagnosticsRow, TimeSeries};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::Kernel;
use crate::potential::PotentialParams;

const MAX_DAMPING_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub dt_min: f64,
    /// Sup-norm increment at which the inner iteration stops.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Iterates are kept within `|φ| ≤ 1 − epsilon_safe`.
    pub epsilon_safe: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dt_min: 1e-9,
            inner_tol: 1e-10,
            inner_max_iters: 200,
            epsilon_safe: 1e-12,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return Err(Error::param(
                "stepper.dt_min",
                format!("{} must be positive", self.dt_min),
            ));
        }
        if !(self.dt >= self.dt_min && self.dt.is_finite()) {
            return Err(Error::param(
                "stepper.dt",
                format!("{} must be at least dt_min = {}", self.dt, self.dt_min),
            ));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::param("stepper.inner_tol", "must be positive"));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::param("stepper.inner_max_iters", "must be at least 1"));
        }
        if !(self.epsilon_safe > 0.0 && self.epsilon_safe < 1e-6) {
            return Err(Error::param(
                "stepper.epsilon_safe",
                format!("{} not in (0, 1e-6)", self.epsilon_safe),
            ));
        }
        Ok(())
    }
}

/// Initial phase field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `m` plus seeded uniform noise in `[−a, a]`, re-centred to mean `m`.
    Constant {
        m: f64,
        noise_amplitude: f64,
        seed: u64,
    },
    /// `m + a·tanh(cos(2πx₀/L)/w)`, re-centred to mean `m`: two flat
    /// domains along the first axis separated by diffuse interfaces.
    Tanh {
        m: f64,
        amplitude: f64,
        width: f64,
    },
    Snapshot(Field),
}

impl InitialData {
    /// Grid-independent checks: `δ₀ ∈ (0, 1)`, `|m| < 1` and `|m| + a ≤ 1 − δ₀`.
    pub fn validate(&self, delta0: f64) -> Result<()> {
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(Error::param("initial.delta0", format!("{delta0} not in (0, 1)")));
        }
        let bound = 1.0 - delta0;
        let (m, a, key) = match self {
            InitialData::Constant { m, noise_amplitude, .. } => (*m, *noise_amplitude, "initial.noise_amplitude"),
            InitialData::Tanh { m, amplitude, width } => {
                if !(*width > 0.0) {
                    return Err(Error::param("initial.width", "must be positive"));
                }
                (*m, *amplitude, "initial.amplitude")
            }
            InitialData::Snapshot(_) => return Ok(()),
        };
        check_mean(m)?;
        if !(a >= 0.0) || m.abs() + a > bound {
            return Err(Error::param(
                key,
                format!("|m| + a = {} exceeds 1 - delta0 = {bound}", m.abs() + a),
            ));
        }
        Ok(())
    }
}

fn check_mean(m: f64) -> Result<()> {
    if !(m.abs() < 1.0) {
        return Err(Error::param("initial.m", format!("pure phase mean {m}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi: Field,
    pub mu: Field,
    /// `Σ Δt·‖∇μ‖²` over accepted steps.
    pub dissipation_accum: f64,
    pub step_count: usize,
    pub initial_mass: f64,
    pub last_inner_iters: usize,
    pub last_dt: f64,
}

/// `μ = F'(φ) − J∗φ`.
pub fn chemical_potential(phi: &Field, kernel: &Kernel, potential: &PotentialParams) -> Result<Field> {
    let conv = kernel.convolve(phi)?;
    let fp = phi.try_map(|s| potential.f_prime(s))?;
    fp.sub(&conv)
}

pub fn init_state(
    kernel: &Kernel,
    potential: &PotentialParams,
    initial: &InitialData,
    delta0: f64,
) -> Result<SimState> {
    initial.validate(delta0)?;
    let grid = kernel.grid();
    let bound = 1.0 - delta0;

    let phi = match initial {
        InitialData::Constant {
            m,
            noise_amplitude,
            seed,
        } => {
            if *noise_amplitude == 0.0 {
                Field::constant(grid, *m)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let a = *noise_amplitude;
                let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-a..=a)).collect();
                recentre(Field::new(grid, noise)?, *m)
            }
        }
        InitialData::Tanh { m, amplitude, width } => {
            let l = grid.edge_length();
            let profile = Field::from_fn(grid, |x| {
                amplitude * ((2.0 * std::f64::consts::PI * x[0] / l).cos() / width).tanh()
            })?;
            recentre(profile, *m)
        }
        InitialData::Snapshot(field) => {
            if field.grid() != grid {
                return Err(Error::GridMismatch {
                    expected: grid.to_string(),
                    found: field.grid().to_string(),
                });
            }
            check_mean(field.mean())?;
            field.clone()
        }
    };

    if phi.sup_norm() > bound {
        return Err(Error::param(
            "initial",
            format!("sup |phi0| = {} exceeds 1 - delta0 = {bound}", phi.sup_norm()),
        ));
    }
    let mu = chemical_potential(&phi, kernel, potential)?;
    Ok(SimState {
        t: 0.0,
        initial_mass: phi.mean(),
        phi,
        mu,
        dissipation_accum: 0.0,
        step_count: 0,
        last_inner_iters: 0,
        last_dt: 0.0,
    })
}

fn recentre(f: Field, m: f64) -> Field {
    let shift = m - f.mean();
    f.map(|v| v + shift)
}

struct InnerFailure {
    residual: f64,
}

/// Solves the implicit convex-splitting system for one trial `dt`.
fn implicit_solve(
    phi_n: &Field,
    dt: f64,
    cfg: &StepperConfig,
    kernel: &Kernel,
    potential: &PotentialParams,
) -> std::result::Result<(Field, usize), InnerFailure> {
    let spectral = kernel.spectral();
    let grid = phi_n.grid();
    let k2 = spectral.k2();
    let alpha = potential.alpha_bar();
    let bound = 1.0 - cfg.epsilon_safe;

    // r̂ = φ̂ⁿ + Δt |k|² (J∗φⁿ)^
    let phi_hat = spectral.forward_real(phi_n.values());
    let cell = grid.cell_volume();
    let rhs: Vec<_> = phi_hat
        .iter()
        .zip(kernel.spectral_multiplier())
        .zip(k2)
        .map(|((p, m), k2)| p * (1.0 + dt * k2 * m * cell))
        .collect();

    let mut current = phi_n.values().to_vec();
    let mut last_increment = f64::INFINITY;
    for iter in 1..=cfg.inner_max_iters {
        let mut stab = alpha;
        for &s in &current {
            let f2 = potential.f_second(s).map_err(|_| InnerFailure { residual: f64::NAN })?;
            stab = stab.max(f2);
        }
        let mut g = Vec::with_capacity(current.len());
        for &s in &current {
            let fp = potential.f_prime(s).map_err(|_| InnerFailure { residual: f64::NAN })?;
            g.push(fp - stab * s);
        }
        let mut g_hat = spectral.forward_real(&g);
        for ((gh, r), &k2) in g_hat.iter_mut().zip(&rhs).zip(k2) {
            *gh = (r - *gh * (dt * k2)) / (1.0 + dt * stab * k2);
        }
        let candidate = spectral.inverse_real(g_hat);

        let update: Vec<f64> = candidate.iter().zip(&current).map(|(c, p)| c - p).collect();
        let increment = update.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
        if !increment.is_finite() {
            return Err(InnerFailure { residual: increment });
        }

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_DAMPING_HALVINGS {
            let trial: Vec<f64> = current.iter().zip(&update).map(|(p, u)| p + lambda * u).collect();
            if trial.iter().all(|v| v.abs() <= bound) {
                accepted = Some(trial);
                break;
            }
            lambda *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(InnerFailure { residual: increment });
        };
        current = next;
        last_increment = increment;
        if increment <= cfg.inner_tol {
            return Ok((Field::from_raw(grid, current), iter));
        }
    }
    Err(InnerFailure {
        residual: last_increment,
    })
}

/// Advances one accepted step, halving `cfg.dt` on inner-solver failure.
pub fn step(state: &SimState, cfg: &StepperConfig, kernel: &Kernel, potential: &PotentialParams) -> Result<SimState> {
    state.phi.ensure_same_grid(&Field::zeros(kernel.grid()))?;
    let mut dt = cfg.dt;
    let mut last_residual;
    loop {
        match implicit_solve(&state.phi, dt, cfg, kernel, potential) {
            Ok((phi, iters)) => {
                let mu = chemical_potential(&phi, kernel, potential)?;
                let dissipation = dt * mu.h1_seminorm_sq();
                return Ok(SimState {
                    t: state.t + dt,
                    phi,
                    mu,
                    dissipation_accum: state.dissipation_accum + dissipation,
                    step_count: state.step_count + 1,
                    initial_mass: state.initial_mass,
                    last_inner_iters: iters,
                    last_dt: dt,
                });
            }
            Err(failure) => last_residual = failure.residual,
        }
        dt *= 0.5;
        if dt < cfg.dt_min {
            return Err(Error::InnerSolverDiverged {
                dt: dt * 2.0,
                residual: last_residual,
            });
        }
    }
}

/// Assertions evaluated on every accepted step of [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorChecks {
    /// Maximum `|mean(φ) − mean(φ₀)|`.
    pub mass_tol: Option<f64>,
    /// `(relative, absolute)` slack for `E(φⁿ⁺¹) ≤ E(φⁿ)`.
    pub energy_slack: Option<(f64, f64)>,
    /// Require `max|φ| ≤ 1 − ε_safe`.
    pub separation: bool,
}

impl Default for MonitorChecks {
    fn default() -> Self {
        Self {
            mass_tol: Some(1e-12),
            energy_slack: Some((1e-12, 1e-13)),
            separation: true,
        }
    }
}

impl MonitorChecks {
    pub fn none() -> Self {
        Self {
            mass_tol: None,
            energy_slack: None,
            separation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControl {
    /// Emit a diagnostics row every this many steps (the final state always
    /// gets a row).
    pub row_stride: usize,
    /// Hand the state to the observer every this many steps.
    pub snapshot_stride: Option<usize>,
    pub checks: MonitorChecks,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            row_stride: 1,
            snapshot_stride: None,
            checks: MonitorChecks::default(),
        }
    }
}

/// Receives rows and snapshots while [`run`] progresses.
pub trait Observer {
    fn on_row(&mut self, _row: &DiagnosticsRow) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Keeps every snapshot in memory as `(t, φ)`.
#[derive(Debug, Default, Clone)]
pub struct SnapshotRecorder {
    pub snapshots: Vec<(f64, Field)>,
}

impl Observer for SnapshotRecorder {
    fn on_snapshot(&mut self, state: &SimState) -> Result<()> {
        self.snapshots.push((state.t, state.phi.clone()));
        Ok(())
    }
}

/// Steps until `t_end`, emitting diagnostics and snapshots.
///
/// Snapshots (when enabled) include the initial state. The time step is
/// shortened on the last step to land on `t_end` exactly.
pub fn run(
    state: SimState,
    t_end: f64,
    cfg: &StepperConfig,
    kernel: &Kernel,
    potential: &PotentialParams,
    control: &RunControl,
    observer: &mut dyn Observer,
) -> Result<(SimState, TimeSeries)> {
    cfg.validate()?;
    let mut series = TimeSeries::default();
    if !(t_end > state.t) {
        return Ok((state, series));
    }
    let row_stride = control.row_stride.max(1);
    let checks = control.checks;
    let initial_energy = diagnostics::energy(&state.phi, kernel, potential)?;
    let tiny = 1e-12 * t_end.abs().max(1.0);

    let first = diagnostics::row(&state, kernel, potential, initial_energy)?;
    observer.on_row(&first)?;
    series.push(first);
    if control.snapshot_stride.is_some() {
        observer.on_snapshot(&state)?;
    }

    let mut state = state;
    let mut energy = initial_energy;
    while state.t < t_end - tiny {
        let mut step_cfg = *cfg;
        step_cfg.dt = cfg.dt.min(t_end - state.t);
        if step_cfg.dt < step_cfg.dt_min {
            step_cfg.dt_min = step_cfg.dt;
        }
        let next = step(&state, &step_cfg, kernel, potential)?;
        let next_energy = diagnostics::energy(&next.phi, kernel, potential)?;

        if let Some(tol) = checks.mass_tol {
            let drift = (next.phi.mean() - next.initial_mass).abs();
            if drift > tol {
                return Err(Error::MonitorViolation {
                    t: next.t,
                    reason: format!("mass drift {drift:e} > {tol:e}"),
                });
            }
        }
        if let Some((rel, abs)) = checks.energy_slack {
            if next_energy > energy + rel * energy.abs() + abs {
                return Err(Error::MonitorViolation {
                    t: next.t,
                    reason: format!("energy increased from {energy:e} to {next_energy:e}"),
                });
            }
        }
        if checks.separation && next.phi.sup_norm() > 1.0 - cfg.epsilon_safe {
            return Err(Error::MonitorViolation {
                t: next.t,
                reason: format!("sup |phi| = {} reached the safety bound", next.phi.sup_norm()),
            });
        }

        state = next;
        energy = next_energy;
        let last = state.t >= t_end - tiny;
        if state.step_count.is_multiple_of(row_stride) || last {
            let row = diagnostics::row_with_energy(&state, kernel, potential, energy, initial_energy)?;
            observer.on_row(&row)?;
            series.push(row);
        }
        if let Some(stride) = control.snapshot_stride {
            if state.step_count.is_multiple_of(stride.max(1)) || last {
                observer.on_snapshot(&state)?;
            }
        }
    }
    Ok((state, series))
}
