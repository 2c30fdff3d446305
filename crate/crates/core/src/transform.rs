//! Uniform-grid transforms on `[-pi, pi)^N`.
//!
//! Arrays are flat and row-major: the last axis is contiguous. Grid node `j`
//! along an axis sits at `-pi + 2 pi j / G`, which is why coefficient arrays
//! carry a `(-1)^(m_1 + ... + m_N)` phase relative to the plain DFT.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub fn node(grid: usize, j: usize) -> f64 {
    -PI + 2.0 * PI * j as f64 / grid as f64
}

/// Storage slot of frequency `m` in a length-`grid` DFT axis.
pub fn wrap_index(m: i64, grid: usize) -> usize {
    m.rem_euclid(grid as i64) as usize
}

/// Signed frequency stored at DFT slot `i`.
pub fn signed_frequency(i: usize, grid: usize) -> i64 {
    if i < grid.div_ceil(2) {
        i as i64
    } else {
        i as i64 - grid as i64
    }
}

pub fn phase_sign(m: &[i64]) -> f64 {
    if m.iter().sum::<i64>().rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Coordinates of the grid node with flat index `flat`.
pub fn node_coords(dim: usize, grid: usize, mut flat: usize, out: &mut [f64]) {
    for d in (0..dim).rev() {
        out[d] = node(grid, flat % grid);
        flat /= grid;
    }
}

/// Per-axis indices of flat index `flat`.
pub fn unflatten(dim: usize, grid: usize, mut flat: usize, out: &mut [usize]) {
    for d in (0..dim).rev() {
        out[d] = flat % grid;
        flat /= grid;
    }
}

pub fn flatten(grid: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * grid + i)
}

/// Multidimensional FFT over a `grid^dim` array.
pub struct GridTransform {
    dim: usize,
    grid: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridTransform {
    pub fn new(dim: usize, grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridTransform {
            dim,
            grid,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized `sum_j a_j exp(-2 pi i j.k / G)` in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &*self.forward);
    }

    /// Unnormalized `sum_k a_k exp(+2 pi i j.k / G)` in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &*self.inverse);
    }

    fn apply(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.len(), "array does not match the grid");
        let g = self.grid;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // contiguous last axis
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); g];
        for axis in (0..self.dim.saturating_sub(1)).rev() {
            let stride = g.pow((self.dim - 1 - axis) as u32);
            let block = stride * g;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = data[base + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        data[base + t * stride] = *v;
                    }
                }
            }
        }
    }
}
