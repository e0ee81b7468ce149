//! Logarithmic (Flory-Huggins type) potential
//! `F(s) = (ᾱ/2)((1+s)ln(1+s) + (1−s)ln(1−s))` and its companions.
//!
//! `F'(s) = ᾱ·artanh(s)`, `F''(s) = ᾱ/(1−s²)`, `(F')⁻¹(w) = tanh(w/ᾱ)`.
//! Evaluations use `ln_1p` so that `1 − |s|` keeps full precision down to
//! [`SEPARATION_FLOOR`]; closer to the pure phases the derivatives refuse
//! to evaluate.

use crate::error::{Error, Result};

/// Smallest admissible distance `1 − |s|` for `F'` and `F''`.
pub const SEPARATION_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    alpha_bar: f64,
    alpha0: f64,
}

impl PotentialParams {
    pub fn new(alpha_bar: f64, alpha0: f64) -> Result<Self> {
        if !(alpha_bar.is_finite() && alpha_bar > 0.0) {
            return Err(Error::param("alpha_bar", format!("{alpha_bar} must be positive")));
        }
        if !(alpha0.is_finite() && alpha0 > alpha_bar) {
            return Err(Error::param(
                "alpha0",
                format!("{alpha0} must exceed alpha_bar = {alpha_bar}"),
            ));
        }
        Ok(Self { alpha_bar, alpha0 })
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// `F(s)` on the closed interval `[−1, 1]`; `F(±1) = ᾱ ln 2`.
    pub fn f(&self, s: f64) -> Result<f64> {
        if !(s.abs() <= 1.0) {
            return Err(Error::PotentialDomain { value: s });
        }
        let plus = if s == -1.0 { 0.0 } else { (1.0 + s) * s.ln_1p() };
        let minus = if s == 1.0 { 0.0 } else { (1.0 - s) * (-s).ln_1p() };
        Ok(0.5 * self.alpha_bar * (plus + minus))
    }

    pub fn f_prime(&self, s: f64) -> Result<f64> {
        check_interior(s)?;
        Ok(0.5 * self.alpha_bar * (s.ln_1p() - (-s).ln_1p()))
    }

    pub fn f_second(&self, s: f64) -> Result<f64> {
        check_interior(s)?;
        Ok(self.alpha_bar / ((1.0 - s) * (1.0 + s)))
    }

    /// `(F')⁻¹(w) = tanh(w/ᾱ)`, kept strictly inside `(−1, 1)`.
    pub fn f_prime_inverse(&self, w: f64) -> f64 {
        let s = (w / self.alpha_bar).tanh();
        if s >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else if s <= -1.0 {
            -1.0 + f64::EPSILON / 2.0
        } else {
            s
        }
    }

    /// `Ψ(s) = F(s) − α₀ s²/2`, reported only.
    pub fn psi(&self, s: f64) -> Result<f64> {
        Ok(self.f(s)? - 0.5 * self.alpha0 * s * s)
    }

    /// Tail-growth diagnostics at the given `δ ∈ (0, 0.1]`.
    pub fn check_h4_asymptotics(&self, deltas: &[f64]) -> Result<AsymptoticsReport> {
        if deltas.is_empty() {
            return Err(Error::param("deltas", "empty list"));
        }
        let rows = deltas
            .iter()
            .map(|&delta| {
                if !(delta > 0.0 && delta <= 0.1) {
                    return Err(Error::param("delta", format!("{delta} not in (0, 0.1]")));
                }
                let upper = 1.0 - 2.0 * delta;
                let lower = -1.0 + 2.0 * delta;
                let log_delta = delta.ln().abs();
                Ok(AsymptoticsRow {
                    delta,
                    scaled_second: delta * self.f_second(upper)?,
                    scaled_first: self.f_prime(upper)? / log_delta,
                    mirrored_scaled_second: delta * self.f_second(lower)?,
                    mirrored_scaled_first: self.f_prime(lower)?.abs() / log_delta,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let smallest = rows
            .iter()
            .min_by(|a, b| a.delta.total_cmp(&b.delta))
            .expect("non-empty");
        let second_limit = self.alpha_bar / 4.0;
        let first_limit = self.alpha_bar / 2.0;
        Ok(AsymptoticsReport {
            second_converged: ((smallest.scaled_second - second_limit) / second_limit).abs() <= 0.01,
            first_converged: ((smallest.scaled_first - first_limit) / first_limit).abs() <= 0.01,
            second_limit,
            first_limit,
            rows,
        })
    }
}

fn check_interior(s: f64) -> Result<()> {
    if !(1.0 - s.abs() >= SEPARATION_FLOOR) {
        return Err(Error::PotentialDomain { value: s });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsRow {
    pub delta: f64,
    /// `δ·F''(1−2δ)`, tends to `ᾱ/4`.
    pub scaled_second: f64,
    /// `F'(1−2δ)/|ln δ|`, tends to `ᾱ/2`.
    pub scaled_first: f64,
    pub mirrored_scaled_second: f64,
    pub mirrored_scaled_first: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub rows: Vec<AsymptoticsRow>,
    pub second_limit: f64,
    pub first_limit: f64,
    pub second_converged: bool,
    pub first_converged: bool,
}
