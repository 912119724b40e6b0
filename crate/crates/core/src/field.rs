//! Spinor field state, its magnetization, and state preparation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::spin::{self, Spinor};
use crate::units::{derive_params, PhysicalParams};

/// Sign of the helix imprint: ψ_m → exp(HELIX_SIGN · i m κ z) ψ_m makes the
/// transverse angle arg(M_x + i M_y) advance as +κz.
pub const HELIX_SIGN: f64 = -1.0;

/// Three complex amplitudes (m = +1, 0, −1) per site.
///
/// Normalized to column density: Σ_sites Σ_m |ψ_m|² dx dz = atom number, so
/// |ψ|² is in atoms/μm².
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: Grid2D,
    /// Component arrays in real-space layout, indexed `[m_index][site]` with
    /// m_index 0, 1, 2 ↔ m = +1, 0, −1.
    pub psi: [Vec<Complex64>; 3],
}

impl SpinorField {
    pub fn zeros(grid: Grid2D) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        SpinorField {
            grid,
            psi: [z.clone(), z.clone(), z],
        }
    }

    #[inline]
    pub fn site(&self, i: usize) -> Spinor {
        [self.psi[0][i], self.psi[1][i], self.psi[2][i]]
    }

    #[inline]
    pub fn set_site(&mut self, i: usize, v: Spinor) {
        for (c, x) in self.psi.iter_mut().zip(v) {
            c[i] = x;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| spin::norm_sqr(&self.site(i)))
            .collect()
    }

    /// Σ |ψ|² dx dz.
    pub fn norm(&self) -> f64 {
        let sum: f64 = self
            .psi
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum();
        sum * self.grid.cell_area()
    }

    pub fn is_finite(&self) -> bool {
        self.psi
            .iter()
            .flat_map(|c| c.iter())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Multiply every amplitude so that the norm equals `target`.
    pub fn renormalize(&mut self, target: f64) {
        let s = (target / self.norm()).sqrt();
        self.psi
            .iter_mut()
            .flat_map(|c| c.iter_mut())
            .for_each(|v| *v *= s);
    }
}

/// Vector magnetization in units of g_F μ_B × atoms/μm², with column density.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationField {
    pub grid: Grid2D,
    pub m: Vec<[f64; 3]>,
    pub n: Vec<f64>,
}

impl MagnetizationField {
    pub fn transverse(&self, i: usize) -> Complex64 {
        Complex64::new(self.m[i][0], self.m[i][1])
    }

    /// Component `c` (0, 1, 2 ↔ x, y, z) as a flat array.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.m.iter().map(|v| v[c]).collect()
    }
}

pub fn magnetization(s: &SpinorField) -> MagnetizationField {
    let (m, n) = (0..s.grid.len())
        .map(|i| spin::spin_density(&s.site(i)))
        .unzip();
    MagnetizationField { grid: s.grid, m, n }
}

fn unit_axis(axis: [f64; 3]) -> Result<[f64; 3]> {
    let len = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !((len - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!("rotation axis must be a unit vector, |axis| = {len}")));
    }
    Ok(axis)
}

/// Apply exp(−i·angle·(axis·F)) at every site.
pub fn rotate_spin(s: &SpinorField, axis: [f64; 3], angle: f64) -> Result<SpinorField> {
    let mut out = s.clone();
    rotate_spin_in_place(&mut out, axis, angle)?;
    Ok(out)
}

pub fn rotate_spin_in_place(s: &mut SpinorField, axis: [f64; 3], angle: f64) -> Result<()> {
    let u = spin::rotation_matrix(unit_axis(axis)?, angle);
    for i in 0..s.grid.len() {
        let v = spin::mat_vec(&u, &s.site(i));
        s.set_site(i, v);
    }
    Ok(())
}

/// Wind a transverse helix of wavevector `kappa` (rad/μm) along ẑ.
pub fn imprint_helix(s: &SpinorField, kappa: f64) -> SpinorField {
    let mut out = s.clone();
    let g = s.grid;
    for (i, _, z) in g.sites() {
        let ph = Complex64::from_polar(1.0, HELIX_SIGN * kappa * z);
        // m = +1 gets ph, m = −1 gets conj(ph)
        out.psi[0][i] *= ph;
        out.psi[2][i] *= ph.conj();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Flat column density inside an ellipse with tanh edges.
    Uniform,
    /// In-plane Thomas-Fermi column with the trap's aspect ratio.
    ThomasFermi,
}

/// Geometry of a prepared cloud, needed to build a matching trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudShape {
    /// Peak column density (μm⁻²).
    pub column_peak: f64,
    /// Semi-axes (μm) along x̂ and ẑ.
    pub rx: f64,
    pub rz: f64,
}

/// Half-width of the tanh edge of the uniform profile, in grid cells.
pub const UNIFORM_EDGE_CELLS: f64 = 4.0;

/// Cloud semi-axes for a given profile: the trap sets the aspect ratio
/// rz/rx = ωx/ωz, the peak column density is √(2π) σ_y n0, and the area is
/// fixed by the atom number.
pub fn cloud_shape(p: &PhysicalParams, profile: Profile) -> Result<CloudShape> {
    let d = derive_params(p)?;
    let aspect = p.trap_freqs[0] / p.trap_freqs[2];
    // N = area_factor · ñ0 · rx · rz
    let area_factor = match profile {
        Profile::Uniform => PI,
        Profile::ThomasFermi => PI / 2.0,
    };
    let rxrz = p.atom_number / (area_factor * d.column_n0);
    let rx = (rxrz / aspect).sqrt();
    Ok(CloudShape {
        column_peak: d.column_n0,
        rx,
        rz: rx * aspect,
    })
}

/// All atoms in m = −1 with the requested column profile; norm = atom number.
pub fn prepare_initial(p: &PhysicalParams, g: &Grid2D, profile: Profile) -> Result<SpinorField> {
    g.validate()?;
    let shape = cloud_shape(p, profile)?;
    let pad = match profile {
        Profile::Uniform => UNIFORM_EDGE_CELLS * g.dx().max(g.dz()),
        Profile::ThomasFermi => 0.0,
    };
    if shape.rx + pad > g.lx / 2.0 - g.dx() || shape.rz + pad > g.lz / 2.0 - g.dz() {
        return Err(Error::invalid(format!(
            "grid {}×{} μm too small for cloud radii ({:.1}, {:.1}) μm",
            g.lx, g.lz, shape.rx, shape.rz
        )));
    }
    let mut s = SpinorField::zeros(*g);
    for (i, x, z) in g.sites() {
        let n = match profile {
            Profile::ThomasFermi => {
                shape.column_peak * (1.0 - (x / shape.rx).powi(2) - (z / shape.rz).powi(2)).max(0.0)
            }
            Profile::Uniform => {
                // signed distance from the ellipse edge, approximately in μm
                let r = ((x / shape.rx).powi(2) + (z / shape.rz).powi(2)).sqrt();
                let dist = (1.0 - r) * shape.rx.min(shape.rz).max(1e-12);
                let w = UNIFORM_EDGE_CELLS * g.dx().min(g.dz()) / 2.0;
                shape.column_peak * 0.5 * (1.0 + (dist / w).tanh())
            }
        };
        s.psi[2][i] = Complex64::new(n.sqrt(), 0.0);
    }
    s.renormalize(p.atom_number);
    Ok(s)
}

/// Flat column density `column` over the whole periodic grid, all in m = −1.
pub fn prepare_homogeneous(g: &Grid2D, column: f64) -> SpinorField {
    let mut s = SpinorField::zeros(*g);
    s.psi[2].iter_mut().for_each(|v| *v = Complex64::new(column.sqrt(), 0.0));
    s
}

/// Add white complex Gaussian noise of relative amplitude `amplitude` to every
/// component, scaled by the local amplitude, then restore the original norm.
pub fn add_spin_noise<R: Rng>(s: &mut SpinorField, amplitude: f64, rng: &mut R) {
    if amplitude == 0.0 {
        return;
    }
    let norm = s.norm();
    for i in 0..s.grid.len() {
        let local = (spin::norm_sqr(&s.site(i)) / 3.0).sqrt();
        for c in 0..3 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s.psi[c][i] += Complex64::new(re, im) * (amplitude * local / 2f64.sqrt());
        }
    }
    s.renormalize(norm);
}
