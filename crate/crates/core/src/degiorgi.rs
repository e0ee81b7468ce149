//! Level-truncation (De Giorgi) machinery as executable numerics.
//!
//! * the geometric convergence lemma for `y_{n+1} ≤ C bⁿ y_n^{1+ε}`,
//! * the truncation levels `k_n = 1 − δ − δ/2ⁿ`,
//! * space-time measures `y_n` of the superlevel sets `{φ ≥ k_n}` measured
//!   from stored snapshots,
//! * the closed-form window length `τ̃`, recursion coefficient and
//!   admissible threshold for `y₀`.
//!
//! The inequalities behind these constants are sufficient conditions with
//! nonconstructive constants, so a trajectory that misses the threshold is
//! reported, never treated as a contradiction.

use crate::diagnostics::{gn_ratio, poincare_sup};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::potential::PotentialParams;

/// Outcome of iterating `y_{n+1} = C bⁿ y_n^{1+ε}` against the lemma's bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// `θ = C^{−1/ε} b^{−1/ε²}`.
    pub theta: f64,
    pub y0: f64,
    pub within_threshold: bool,
    /// Equality iteration, `n = 0..=n_max`.
    pub sequence: Vec<f64>,
    /// `θ b^{−n/ε}`, `n = 0..=n_max`.
    pub bounds: Vec<f64>,
    /// Indices where `sequence[n] > bounds[n]` (only checked within threshold).
    pub violations: Vec<usize>,
}

/// Relative slack for comparing the iterated sequence with its bound.
const BOUND_SLACK: f64 = 1e-12;

pub fn lemma_threshold(c: f64, b: f64, eps: f64) -> f64 {
    c.powf(-1.0 / eps) * b.powf(-1.0 / (eps * eps))
}

pub fn lemma_conv_bound(c: f64, b: f64, eps: f64, y0: f64, n_max: usize) -> Result<LemmaReport> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("C", format!("{c} must be positive")));
    }
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::param("b", format!("{b} must exceed 1")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::param("y0", format!("{y0} must be nonnegative")));
    }
    let theta = lemma_threshold(c, b, eps);
    let within_threshold = y0 <= theta;

    let mut sequence = Vec::with_capacity(n_max + 1);
    let mut y = y0;
    sequence.push(y);
    for n in 0..n_max {
        y = c * b.powi(n as i32) * y.powf(1.0 + eps);
        sequence.push(y);
    }
    let bounds: Vec<f64> = (0..=n_max).map(|n| theta * b.powf(-(n as f64) / eps)).collect();
    let violations = if within_threshold {
        sequence
            .iter()
            .zip(&bounds)
            .enumerate()
            .filter(|(_, (y, bound))| **y > **bound * (1.0 + BOUND_SLACK))
            .map(|(n, _)| n)
            .collect()
    } else {
        Vec::new()
    };
    Ok(LemmaReport {
        theta,
        y0,
        within_threshold,
        sequence,
        bounds,
        violations,
    })
}

/// Truncation level `k_n = (1 − δ) − δ/2ⁿ`.
///
/// The offset `gap = δ/2ⁿ` is exact, so levels remain strictly ordered even
/// after `value` has rounded to `1 − δ` (around `n ≈ 52` for `δ = 0.1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub n: usize,
    pub value: f64,
    pub gap: f64,
}

impl Level {
    /// `φ ≥ k_n`, evaluated as `φ − (1 − δ) ≥ −δ/2ⁿ`.
    fn contains(&self, base: f64, phi: f64) -> bool {
        phi - base >= -self.gap
    }
}

pub fn level_sequence(delta: f64, n_max: usize) -> Result<Vec<Level>> {
    check_delta(delta, 0.5)?;
    let base = 1.0 - delta;
    let levels: Vec<Level> = (0..=n_max)
        .map(|n| {
            let gap = delta * 0.5_f64.powi(n as i32);
            Level {
                n,
                value: base - gap,
                gap,
            }
        })
        .collect();
    for pair in levels.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let ordered = b.gap < a.gap && b.value >= a.value && b.value <= base;
        if !ordered || (b.n >= 1 && b.value <= 1.0 - 2.0 * delta) {
            return Err(Error::Trajectory(format!(
                "level sequence lost monotonicity at n = {}",
                b.n
            )));
        }
    }
    Ok(levels)
}

fn check_delta(delta: f64, upper: f64) -> Result<()> {
    if !(delta > 0.0 && delta < upper) {
        return Err(Error::param("delta", format!("{delta} not in (0, {upper})")));
    }
    Ok(())
}

/// Measured `y_n` over the window `[T − 3τ̃, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct YnMeasurement {
    pub y: Vec<f64>,
    pub levels: Vec<Level>,
    pub t_end: f64,
    pub window_start: f64,
    pub stride: f64,
    pub snapshots_used: usize,
    /// Largest `n` whose interval `I_n` is distinguishable from `I_{n−1}` at
    /// the snapshot stride; `y` stops there.
    pub n_cap: usize,
}

impl YnMeasurement {
    pub fn is_nonincreasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Snapshots lying in `[T − 3τ̃, T]`, with their uniform stride.
struct Window<'a> {
    inside: Vec<&'a (f64, Field)>,
    t_end: f64,
    start: f64,
    stride: f64,
}

fn window(snapshots: &[(f64, Field)], tau_w: f64) -> Result<Window<'_>> {
    if !(tau_w > 0.0) {
        return Err(Error::param("window", format!("{tau_w} must be positive")));
    }
    let t_end = snapshots
        .iter()
        .map(|(t, _)| *t)
        .reduce(f64::max)
        .ok_or_else(|| Error::Trajectory("no snapshots".into()))?;
    let start = t_end - 3.0 * tau_w;
    let slack = 1e-9 * tau_w;
    let mut inside: Vec<&(f64, Field)> = snapshots.iter().filter(|(t, _)| *t >= start - slack).collect();
    inside.sort_by(|a, b| a.0.total_cmp(&b.0));
    if inside.len() < 2 {
        return Err(Error::Trajectory(format!(
            "window [{start}, {t_end}] holds {} snapshot(s), need at least 2",
            inside.len()
        )));
    }
    let stride = inside[1].0 - inside[0].0;
    if !(stride > 0.0) {
        return Err(Error::Trajectory("duplicate snapshot times".into()));
    }
    for pair in inside.windows(2) {
        let d = pair[1].0 - pair[0].0;
        if ((d - stride) / stride).abs() > 1e-6 {
            return Err(Error::Trajectory(format!(
                "non-uniform snapshot stride ({d} vs {stride})"
            )));
        }
    }
    Ok(Window {
        inside,
        t_end,
        start,
        stride,
    })
}

pub fn measure_yn(snapshots: &[(f64, Field)], delta: f64, n_max: usize, tau_w: f64) -> Result<YnMeasurement> {
    let Window {
        inside,
        t_end,
        start,
        stride,
    } = window(snapshots, tau_w)?;
    let n_cap = if tau_w >= stride {
        (tau_w / stride).log2().floor() as usize + 1
    } else {
        0
    };
    let levels = level_sequence(delta, n_max.min(n_cap))?;
    let base = 1.0 - delta;
    let cell = inside[0].1.grid().cell_volume();
    let slack = 1e-9 * stride;

    // t_{n−1} for n = 0, 1, ...: t_{−1} = T − 3τ̃, t_n = t_{n−1} + τ̃/2ⁿ.
    let mut interval_start = start;
    let mut y = Vec::with_capacity(levels.len());
    for level in &levels {
        let measure: f64 = inside
            .iter()
            .filter(|(t, _)| *t >= interval_start - slack)
            .map(|(_, phi)| phi.values().iter().filter(|&&v| level.contains(base, v)).count() as f64 * cell * stride)
            .sum();
        y.push(measure);
        interval_start += tau_w * 0.5_f64.powi(level.n as i32);
    }
    Ok(YnMeasurement {
        y,
        levels,
        t_end,
        window_start: start,
        stride,
        snapshots_used: inside.len(),
        n_cap,
    })
}

/// Inputs of the closed-form constants. All estimates are empirical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeGiorgiParams {
    pub delta: f64,
    pub potential: PotentialParams,
    /// `‖∇J‖_{L¹}`.
    pub grad_j_l1: f64,
    /// Gagliardo-Nirenberg constant estimate `Ĉ`.
    pub c_hat: f64,
    /// Poincaré constant estimate `C_P`.
    pub c_p: f64,
    /// Bound `C(τ)` on `‖F'(φ)‖_{L¹}` along the trajectory.
    pub c_tau: f64,
}

impl DeGiorgiParams {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta, 0.25)?;
        for (name, v) in [
            ("grad_j_l1", self.grad_j_l1),
            ("c_hat", self.c_hat),
            ("c_p", self.c_p),
            ("c_tau", self.c_tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    fn second(&self) -> Result<f64> {
        self.potential.f_second(1.0 - 2.0 * self.delta)
    }

    fn first(&self) -> Result<f64> {
        self.potential.f_prime(1.0 - 2.0 * self.delta)
    }

    /// `(1 + C_P²)^{3/2} Ĉ^{3/2} ‖∇J‖⁵`, shared by τ̃ and the threshold.
    fn denominator(&self) -> f64 {
        self.grad_j_l1.powi(5) * self.c_hat.powf(1.5) * (1.0 + self.c_p * self.c_p).powf(1.5)
    }
}

/// `τ̃ = 2^{−20} δ⁵ F''(1−2δ)⁴ F'(1−2δ) / (3 C(τ) ‖∇J‖⁵ Ĉ^{3/2} (1+C_P²)^{3/2})`.
pub fn tau_tilde(params: &DeGiorgiParams) -> Result<f64> {
    params.validate()?;
    let d = params.delta;
    Ok(2f64.powi(-20) * d.powi(5) * params.second()?.powi(4) * params.first()?
        / (3.0 * params.c_tau * params.denominator()))
}

/// Coefficients of `y_{n+1} ≤ C_rec bⁿ y_n^{1+ε}` and the admissible `y₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recursion {
    pub c_rec: f64,
    pub b: f64,
    pub eps: f64,
    /// `2^{−20} δ⁵ F''(1−2δ)⁴ / (‖∇J‖⁵ Ĉ^{3/2} (1+C_P²)^{3/2})`.
    pub threshold: f64,
}

pub fn recursion_coefficient(params: &DeGiorgiParams) -> Result<Recursion> {
    params.validate()?;
    let d = params.delta;
    let second = params.second()?;
    let c_rec =
        2f64.powf(4.5) * params.grad_j_l1.powi(3) * params.c_hat.powf(0.9) * (1.0 + params.c_p * params.c_p).powf(0.9)
            / (d.powi(3) * second.powf(2.4));
    Ok(Recursion {
        c_rec,
        b: 2f64.powf(4.5),
        eps: 0.6,
        threshold: 2f64.powi(-20) * d.powi(5) * second.powi(4) / params.denominator(),
    })
}

/// `y₀` bound `3 C(τ) τ̃ / F'(1−2δ)` implied by the `L¹` bound on `F'(φ)`.
pub fn y0_bound_from_c_tau(params: &DeGiorgiParams) -> Result<f64> {
    Ok(3.0 * params.c_tau * tau_tilde(params)? / params.first()?)
}

/// `max_t ‖F'(φ(t))‖_{L¹}`.
pub fn estimate_c_tau<'a>(fields: impl IntoIterator<Item = &'a Field>, potential: &PotentialParams) -> Result<f64> {
    let mut best = 0.0_f64;
    for f in fields {
        let fp = f.try_map(|s| potential.f_prime(s).map(f64::abs))?;
        best = best.max(fp.integral());
    }
    Ok(best)
}

/// Largest Gagliardo-Nirenberg ratio over the nonzero truncations
/// `(±φ − k)⁺` at the given levels.
pub fn estimate_c_hat<'a>(fields: impl IntoIterator<Item = &'a Field>, levels: &[f64]) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for f in fields {
        let mirrored = f.scale(-1.0);
        for g in [f, &mirrored] {
            for &k in levels {
                let t = g.truncate_above(k);
                if t.l2_norm() > 0.0 {
                    let r = gn_ratio(&t)?;
                    best = Some(best.map_or(r, |b| b.max(r)));
                }
            }
        }
    }
    Ok(best)
}

/// `max C_P` over both phases and the given levels.
pub fn estimate_c_p<'a>(fields: impl IntoIterator<Item = &'a Field>, levels: &[f64]) -> Result<Option<f64>> {
    poincare_sup(fields, levels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub measurement: YnMeasurement,
    pub y0_within_threshold: bool,
    /// Lemma bounds `θ b^{−n/ε}` for the recursion's `(C_rec, b, ε)`.
    pub bounds: Vec<f64>,
    /// Measured `y_n ≤ bound_n` at every measured `n`.
    pub bounds_hold: bool,
    pub nonincreasing: bool,
    /// Space-time measure of `{φ ≥ 1 − δ}` over the whole window.
    pub superlevel_measure: f64,
}

impl PhaseReport {
    pub fn separated(&self) -> bool {
        self.superlevel_measure == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeReport {
    pub params: DeGiorgiParams,
    pub tau_tilde: f64,
    pub recursion: Recursion,
    pub theta: f64,
    pub window: f64,
    /// `(φ − k_n)⁺` levels.
    pub upper: PhaseReport,
    /// `(φ + k_n)⁻` levels, i.e. the same scheme on `−φ`.
    pub lower: PhaseReport,
}

/// Measures `y_n` on both phases and compares them with the lemma bounds
/// built from the recursion coefficient.
pub fn verify_scheme_on_trajectory(
    snapshots: &[(f64, Field)],
    params: &DeGiorgiParams,
    tau_w: f64,
    n_max: usize,
) -> Result<SchemeReport> {
    let recursion = recursion_coefficient(params)?;
    let tau = tau_tilde(params)?;
    let lemma = lemma_conv_bound(recursion.c_rec, recursion.b, recursion.eps, 0.0, n_max)?;

    let mirrored: Vec<(f64, Field)> = snapshots.iter().map(|(t, f)| (*t, f.scale(-1.0))).collect();
    let phase = |snaps: &[(f64, Field)]| -> Result<PhaseReport> {
        let measurement = measure_yn(snaps, params.delta, n_max, tau_w)?;
        let bounds: Vec<f64> = lemma.bounds[..measurement.y.len()].to_vec();
        let bounds_hold = measurement
            .y
            .iter()
            .zip(&bounds)
            .all(|(y, b)| *y <= *b * (1.0 + BOUND_SLACK));
        let Window { inside, stride, .. } = window(snaps, tau_w)?;
        let base = 1.0 - params.delta;
        let cell = inside[0].1.grid().cell_volume();
        let superlevel_measure = inside
            .iter()
            .map(|(_, f)| f.values().iter().filter(|&&v| v >= base).count() as f64 * cell * stride)
            .sum();
        Ok(PhaseReport {
            y0_within_threshold: measurement.y[0] <= recursion.threshold,
            nonincreasing: measurement.is_nonincreasing(),
            bounds,
            bounds_hold,
            superlevel_measure,
            measurement,
        })
    };

    Ok(SchemeReport {
        params: *params,
        tau_tilde: tau,
        recursion,
        theta: lemma.theta,
        window: tau_w,
        upper: phase(snapshots)?,
        lower: phase(&mirrored)?,
    })
}
