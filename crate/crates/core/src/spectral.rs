//! Multi-dimensional FFTs on the periodic box and the wavenumber tables
//! that go with them.
//!
//! Transforms are unnormalized forward / `1/N^dim` inverse. Plans are cached
//! process-wide per axis length; scratch buffers are allocated per call.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Signed integer wavenumber index in `{-N/2, ..., N/2-1}`.
pub fn signed_index(i: usize, n: usize) -> isize {
    if i < n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Spectral operator tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Plan,
    inverse: Plan,
    /// Per-axis wavenumbers `2π/L · {-N/2..N/2-1}` (Nyquist kept).
    k_axis: Vec<f64>,
    /// Per-axis derivative wavenumbers (Nyquist zeroed).
    kd_axis: Vec<f64>,
    /// `|k|²` over the full spectrum, Nyquist included.
    k2: Vec<f64>,
    /// `Σ_j kd_j²` over the full spectrum, Nyquist excluded per axis.
    kd2: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n_per_axis();
        let (forward, inverse) = plans(n);
        let scale = 2.0 * PI / grid.edge_length();
        let k_axis: Vec<f64> = (0..n).map(|i| signed_index(i, n) as f64 * scale).collect();
        let kd_axis: Vec<f64> = (0..n).map(|i| if i == n / 2 { 0.0 } else { k_axis[i] }).collect();

        let len = grid.len();
        let mut k2 = vec![0.0; len];
        let mut kd2 = vec![0.0; len];
        for idx in 0..len {
            for axis in 0..grid.dim() {
                let i = grid.axis_index(idx, axis);
                k2[idx] += k_axis[i] * k_axis[i];
                kd2[idx] += kd_axis[i] * kd_axis[i];
            }
        }
        Self {
            grid,
            forward,
            inverse,
            k_axis,
            kd_axis,
            k2,
            kd2,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub fn kd2(&self) -> &[f64] {
        &self.kd2
    }

    /// Derivative wavenumber of spectral index `idx` along `axis`.
    pub fn kd(&self, idx: usize, axis: usize) -> f64 {
        self.kd_axis[self.grid.axis_index(idx, axis)]
    }

    pub fn k(&self, idx: usize, axis: usize) -> f64 {
        self.k_axis[self.grid.axis_index(idx, axis)]
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Normalized inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, true);
        let norm = 1.0 / self.grid.len() as f64;
        data.into_iter().map(|c| c.re * norm).collect()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n_per_axis();
        let dim = self.grid.dim();
        let len = data.len();
        debug_assert_eq!(len, self.grid.len());
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];

        // Last axis is contiguous.
        plan.process_with_scratch(data, &mut scratch);
        if dim == 1 {
            return;
        }

        let mut line = vec![Complex64::default(); n];
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..len).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }
}
