//! Periodic spatial grids and their Fourier side.
//!
//! All field computations live on the box [-L, L)^d, d = 1 or 2, with N
//! equispaced points per axis and periodic wrap. A `Spectrum` stores the
//! continuum Fourier coefficients
//!
//! ```text
//!     fhat(xi_k) = integral of f(x) exp(-i xi_k . x) dx,   xi_k = pi k / L,
//! ```
//!
//! approximated by the rectangle rule, which for smooth periodic data is
//! spectrally accurate. The index k runs over the signed range [-N/2, N/2)
//! per axis, stored in the usual wrapped DFT order. With this normalization
//! coefficient products correspond to convolution of fields and the k = 0
//! coefficient is the total mass.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Parameter(format!(
                "grid half width must be positive and finite, got {half_width}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        Ok(SpatialGrid {
            dim,
            half_width,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Node coordinate along one axis: x_j = -L + j dx.
    pub fn node1d(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Full coordinates of a flat index (row-major in 2d); the second
    /// component is 0 for 1d grids.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.node1d(idx), 0.0],
            _ => [self.node1d(idx / self.points), self.node1d(idx % self.points)],
        }
    }

    /// Signed frequency index for a stored axis index (wrapped DFT order).
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.points / 2 {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    /// Continuum frequency along one axis for a stored index.
    pub fn xi1d(&self, i: usize) -> f64 {
        std::f64::consts::PI * self.signed_index(i) as f64 / self.half_width
    }

    /// Frequency vector of a flat spectral index.
    pub fn freq(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.xi1d(idx), 0.0],
            _ => [self.xi1d(idx / self.points), self.xi1d(idx % self.points)],
        }
    }

    /// Largest resolved frequency magnitude per axis (Nyquist).
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * (self.points as f64 / 2.0) / self.half_width
    }

    /// Wrap a physical coordinate into [-L, L).
    pub fn wrap(&self, x: f64) -> f64 {
        let width = 2.0 * self.half_width;
        let mut y = (x + self.half_width).rem_euclid(width) - self.half_width;
        if y >= self.half_width {
            y -= width;
        }
        y
    }

    pub fn integrate(&self, data: &[f64]) -> f64 {
        debug_assert_eq!(data.len(), self.len());
        data.iter().sum::<f64>() * self.cell_volume()
    }

    /// L^p norm by grid quadrature; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, data: &[f64], p: f64) -> f64 {
        debug_assert_eq!(data.len(), self.len());
        if p.is_infinite() {
            data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            (data.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume()).powf(1.0 / p)
        }
    }
}

/// Real scalar field sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: SpatialGrid,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        GridField {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: FnMut([f64; 2]) -> f64>(grid: SpatialGrid, mut f: F) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        GridField { grid, data }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.data)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.grid.lp_norm(&self.data, p)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// FFT plans for one grid size, reusable across many transforms.
pub struct FftCache {
    size: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl FftCache {
    pub fn new(points: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftCache {
            size: points,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        if data.len() == self.size {
            plan.process(data);
        } else {
            // 2d row-major: transform rows, then columns in a scratch strip.
            debug_assert_eq!(data.len(), self.size * self.size);
            for row in data.chunks_exact_mut(self.size) {
                plan.process(row);
            }
            let mut col = vec![Complex64::default(); self.size];
            for c in 0..self.size {
                for r in 0..self.size {
                    col[r] = data[r * self.size + c];
                }
                plan.process(&mut col);
                for r in 0..self.size {
                    data[r * self.size + c] = col[r];
                }
            }
        }
    }
}

/// Continuum Fourier coefficients of a real field.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: SpatialGrid,
    pub coeffs: Vec<Complex64>,
}

/// Parity factor (-1)^(sum of axis indices) translating between the DFT
/// (origin at array start) and the box convention (origin at the center).
fn parity(grid: &SpatialGrid, idx: usize) -> f64 {
    let n = grid.points_per_axis();
    let s = match grid.dim() {
        1 => idx,
        _ => idx / n + idx % n,
    };
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Spectrum {
    pub fn from_field(field: &GridField, cache: &FftCache) -> Self {
        let grid = field.grid;
        let mut buf: Vec<Complex64> = field
            .data
            .iter()
            .map(|v| Complex64::new(*v, 0.0))
            .collect();
        cache.run(&mut buf, false);
        let vol = grid.cell_volume();
        for (i, c) in buf.iter_mut().enumerate() {
            *c *= vol * parity(&grid, i);
        }
        Spectrum { grid, coeffs: buf }
    }

    /// Back to physical space. The imaginary residue of the inverse
    /// transform is returned alongside as a consistency diagnostic.
    pub fn to_field(&self, cache: &FftCache) -> (GridField, f64) {
        let grid = self.grid;
        let mut buf: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * parity(&grid, i))
            .collect();
        cache.run(&mut buf, true);
        let scale = 1.0 / (2.0 * grid.half_width()).powi(grid.dim() as i32);
        let mut imag_max = 0.0f64;
        let data = buf
            .iter()
            .map(|c| {
                imag_max = imag_max.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (GridField { grid, data }, imag_max)
    }

    /// Build directly from a multiplier in frequency space.
    pub fn from_multiplier<F: FnMut([f64; 2]) -> Complex64>(grid: SpatialGrid, mut f: F) -> Self {
        let coeffs = (0..grid.len()).map(|i| f(grid.freq(i))).collect();
        Spectrum { grid, coeffs }
    }

    pub fn apply_multiplier<F: FnMut([f64; 2]) -> Complex64>(&mut self, mut f: F) {
        for i in 0..self.coeffs.len() {
            self.coeffs[i] *= f(self.grid.freq(i));
        }
    }

    /// Total mass (the zero-frequency coefficient; real for real fields).
    pub fn mass(&self) -> f64 {
        self.coeffs[0].re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(3, 1.0, 16).is_err());
        assert!(SpatialGrid::new(1, 1.0, 12).is_err());
        assert!(SpatialGrid::new(1, 1.0, 4).is_err());
        assert!(SpatialGrid::new(1, -1.0, 16).is_err());
        assert!(SpatialGrid::new(2, 5.0, 64).is_ok());
    }

    #[test]
    fn nodes_and_frequencies() {
        let g = SpatialGrid::new(1, 4.0, 8).unwrap();
        assert_relative_eq!(g.spacing(), 1.0);
        assert_relative_eq!(g.node1d(0), -4.0);
        assert_relative_eq!(g.node1d(7), 3.0);
        assert_eq!(g.signed_index(3), 3);
        assert_eq!(g.signed_index(4), -4);
        assert_relative_eq!(g.xi1d(1), std::f64::consts::PI / 4.0);
    }

    #[test]
    fn forward_transform_matches_analytic_coefficient() {
        // f(x) = cos(k x) on a commensurate box has fhat(+-k) = L each.
        let l = std::f64::consts::PI * 4.0;
        let g = SpatialGrid::new(1, l, 64).unwrap();
        let cache = FftCache::new(64);
        let f = GridField::from_fn(g, |p| (2.0 * p[0]).cos());
        let spec = Spectrum::from_field(&f, &cache);
        // Frequency 2.0 corresponds to signed index k with pi k / L = 2.
        let k = (2.0 * l / std::f64::consts::PI).round() as usize;
        assert_relative_eq!(spec.coeffs[k].re, l, max_relative = 1e-12);
        assert!(spec.coeffs[k].im.abs() < 1e-10);
        // All other coefficients vanish.
        let other: f64 = (0..64)
            .filter(|i| *i != k && *i != 64 - k)
            .map(|i| spec.coeffs[i].norm())
            .sum();
        assert!(other < 1e-9);
    }

    #[test]
    fn roundtrip_is_identity() {
        let g = SpatialGrid::new(1, 3.0, 32).unwrap();
        let cache = FftCache::new(32);
        let f = GridField::from_fn(g, |p| (p[0] * 1.3).sin() + 0.5 * (p[0] * 2.7).cos());
        let (back, imag) = Spectrum::from_field(&f, &cache).to_field(&cache);
        assert!(imag < 1e-12);
        for (a, b) in f.data.iter().zip(&back.data) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn roundtrip_2d() {
        let g = SpatialGrid::new(2, 2.0, 16).unwrap();
        let cache = FftCache::new(16);
        let f = GridField::from_fn(g, |p| (p[0] * std::f64::consts::PI).cos() * (p[1] * 0.5).sin());
        let (back, imag) = Spectrum::from_field(&f, &cache).to_field(&cache);
        assert!(imag < 1e-12);
        for (a, b) in f.data.iter().zip(&back.data) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // Mass equals the rectangle-rule integral.
        let spec = Spectrum::from_field(&f, &cache);
        assert_relative_eq!(spec.mass(), f.integrate(), epsilon = 1e-12);
    }

    #[test]
    fn wrap_into_box() {
        let g = SpatialGrid::new(1, 2.0, 8).unwrap();
        assert_relative_eq!(g.wrap(2.5), -1.5);
        assert_relative_eq!(g.wrap(-2.5), 1.5);
        assert_relative_eq!(g.wrap(1.0), 1.0);
        assert_relative_eq!(g.wrap(6.1), -1.9, epsilon = 1e-12);
    }
}
