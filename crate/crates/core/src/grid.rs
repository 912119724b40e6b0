//! Periodic x–z grid and the 2D FFT used by every spectral operation.
//!
//! Real-space arrays are stored row-major with z fastest: site `(ix, iz)` lives
//! at `ix * nz + iz`. Spectral arrays produced by [`Fft2::forward`] are stored
//! transposed, mode `(jx, jz)` at `jz * nx + jx`, which saves one transpose per
//! transform pair. Kernels and dispersion tables are built in that layout.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2D {
    pub nx: usize,
    pub nz: usize,
    /// Extent along x̂ (μm).
    pub lx: f64,
    /// Extent along ẑ (μm).
    pub lz: f64,
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, lx: f64, lz: f64) -> Result<Self> {
        let g = Grid2D { nx, nz, lx, lz };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("nz", self.nz)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::invalid(format!(
                    "{name} must be a power of two >= 8, got {n}"
                )));
            }
        }
        for (name, l) in [("lx", self.lx), ("lz", self.lz)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    /// Area of one cell (μm²).
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dz()
    }

    #[inline]
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        ix * self.nz + iz
    }

    /// Position of grid line `ix`; the grid is centered on the origin.
    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx / 2) as f64) * self.dx()
    }

    #[inline]
    pub fn z(&self, iz: usize) -> f64 {
        (iz as f64 - (self.nz / 2) as f64) * self.dz()
    }

    /// Iterator over `(index, x, z)` in storage order.
    pub fn sites(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.nx).flat_map(move |ix| {
            (0..self.nz).map(move |iz| (self.index(ix, iz), self.x(ix), self.z(iz)))
        })
    }

    pub fn kx(&self, jx: usize) -> f64 {
        mode_wavevector(jx, self.nx, self.lx)
    }

    pub fn kz(&self, jz: usize) -> f64 {
        mode_wavevector(jz, self.nz, self.lz)
    }

    /// Spectral-layout index of mode `(jx, jz)`.
    #[inline]
    pub fn spectral_index(&self, jx: usize, jz: usize) -> usize {
        jz * self.nx + jx
    }

    /// `(kx, kz)` of every mode, in spectral layout.
    pub fn spectral_modes(&self) -> Vec<(f64, f64)> {
        let kx: Vec<f64> = (0..self.nx).map(|j| self.kx(j)).collect();
        let mut out = Vec::with_capacity(self.len());
        for jz in 0..self.nz {
            let kz = self.kz(jz);
            out.extend(kx.iter().map(|&k| (k, kz)));
        }
        out
    }

    /// Smallest Nyquist wavevector of the two axes (rad/μm).
    pub fn nyquist(&self) -> f64 {
        (PI / self.dx()).min(PI / self.dz())
    }

    pub fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Signed wavevector (rad/μm) of FFT bin `j` on an axis with `n` points and
/// extent `l`. Bins above n/2 are negative frequencies; bin n/2 is taken as
/// −Nyquist.
pub fn mode_wavevector(j: usize, n: usize, l: f64) -> f64 {
    let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
    2.0 * PI * m as f64 / l
}

/// Inverse of [`mode_wavevector`]; `None` if `k` is not a grid mode.
pub fn mode_bin(k: f64, n: usize, l: f64) -> Option<usize> {
    let m = k * l / (2.0 * PI);
    let r = m.round();
    if (m - r).abs() > 1e-9 {
        return None;
    }
    let r = r as isize;
    let half = (n / 2) as isize;
    if r < -half || r >= half {
        return None;
    }
    Some(if r >= 0 { r as usize } else { (r + n as isize) as usize })
}

/// Planned unnormalized 2D transform over a [`Grid2D`].
///
/// `inverse(forward(a)) == N * a` with `N = nx * nz`.
pub struct Fft2 {
    grid: Grid2D,
    fwd_z: Arc<dyn Fft<f64>>,
    inv_z: Arc<dyn Fft<f64>>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_z = planner.plan_fft_forward(grid.nz);
        let inv_z = planner.plan_fft_inverse(grid.nz);
        let fwd_x = planner.plan_fft_forward(grid.nx);
        let inv_x = planner.plan_fft_inverse(grid.nx);
        let scratch_len = [&fwd_z, &inv_z, &fwd_x, &inv_x]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2 {
            grid,
            fwd_z,
            inv_z,
            fwd_x,
            inv_x,
            scratch: vec![Complex64::default(); scratch_len],
            tmp: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Real-space layout in, spectral layout out.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len());
        let (nx, nz) = (self.grid.nx, self.grid.nz);
        self.fwd_z.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.tmp, nx, nz);
        self.fwd_x.process_with_scratch(&mut self.tmp, &mut self.scratch);
        data.copy_from_slice(&self.tmp);
    }

    /// Spectral layout in, real-space layout out (unnormalized).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len());
        let (nx, nz) = (self.grid.nx, self.grid.nz);
        self.inv_x.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.tmp, nz, nx);
        self.inv_z.process_with_scratch(&mut self.tmp, &mut self.scratch);
        data.copy_from_slice(&self.tmp);
    }

    /// Inverse transform including the 1/N factor.
    pub fn inverse_normalized(&mut self, data: &mut [Complex64]) {
        self.inverse(data);
        let inv_n = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|v| *v *= inv_n);
    }
}

/// `src` is `rows × cols` row-major; `dst` becomes `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Grid2D::new(8, 16, 10.0, 20.0).is_ok());
        assert!(Grid2D::new(4, 16, 10.0, 20.0).is_err());
        assert!(Grid2D::new(12, 16, 10.0, 20.0).is_err());
        assert!(Grid2D::new(8, 16, 0.0, 20.0).is_err());
    }

    #[test]
    fn wavevector_round_trip() {
        let (n, l) = (16, 37.5);
        for j in 0..n {
            let k = mode_wavevector(j, n, l);
            assert_eq!(mode_bin(k, n, l), Some(j));
        }
        assert_eq!(mode_wavevector(8, 16, 2.0 * PI), -8.0);
        assert_eq!(mode_bin(0.5, n, l), None);
    }

    #[test]
    fn plane_wave_lands_in_its_bin() {
        let g = Grid2D::new(8, 16, 8.0, 32.0).unwrap();
        let (jx, jz) = (3usize, 13usize);
        let (kx, kz) = (g.kx(jx), g.kz(jz));
        let mut a: Vec<Complex64> = g
            .sites()
            .map(|(_, x, z)| Complex64::from_polar(1.0, kx * x + kz * z))
            .collect();
        let mut fft = Fft2::new(g);
        fft.forward(&mut a);
        let s = g.spectral_index(jx, jz);
        for (i, v) in a.iter().enumerate() {
            if i == s {
                assert!((v.norm() - g.len() as f64).abs() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "leak at {i}: {v}");
            }
        }
        assert_eq!(g.spectral_modes()[s], (kx, kz));
    }

    #[test]
    fn inverse_undoes_forward() {
        let g = Grid2D::new(16, 8, 1.0, 1.0).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut a = orig.clone();
        let mut fft = Fft2::new(g);
        fft.forward(&mut a);
        fft.inverse_normalized(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x - y).norm() < 1e-13);
        }
    }
}
