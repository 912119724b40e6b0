//! Slow, independent reference computations used to cross-check the fast
//! paths: a brute-force dipolar lattice sum, a pair-interaction sign audit, a
//! numeric Larmor average, a real-space integral for the helix column energy
//! and an RK4 integration of the on-site spin problem.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::dipole::{
    bare_tensor, build_kernel, dipolar_energy, helix_column_energy, larmor_average,
    rotate_tensor_z, DipoleKernel, DipoleWorkspace, KernelMode, Tensor,
};
use crate::dynamics::{EvolutionConfig, Potential, Propagator};
use crate::error::{Error, Result};
use crate::field::{prepare_homogeneous, MagnetizationField, SpinorField};
use crate::grid::Grid2D;
use crate::quad::GaussLegendre;
use crate::spin::{spin_density, Spinor};
use crate::units::{derive_params, PhysicalParams, PHASE_PER_HZ_MS};

/// Largest grid side the O(N²) lattice sum accepts.
pub const DIRECT_SUM_MAX_SIDE: usize = 24;

/// Transverse-integrated dipole tensor from a direct k_y quadrature of
/// (4π/3)(3k̂k̂ − 1) against exp(−σ²k_y²)/(2π). Shares nothing with the
/// closed form in the dipole module.
pub fn tensor_by_quadrature(kx: f64, kz: f64, sigma: f64) -> Tensor {
    let gl = GaussLegendre::new(20);
    let kmax = 9.0 / sigma;
    let kp2 = kx * kx + kz * kz;
    let c = 4.0 * PI / 3.0;
    let comp = |i: usize, j: usize| -> f64 {
        let mut f = |ky: f64| {
            let k = [kx, ky, kz];
            let k2 = kp2 + ky * ky;
            let d = if i == j { 1.0 } else { 0.0 };
            let kk = if k2 > 0.0 { 3.0 * k[i] * k[j] / k2 } else { 0.0 };
            (-(sigma * ky).powi(2)).exp() * c * (kk - d)
        };
        // even integrand (odd ones, xy and yz, vanish identically)
        let split = kp2.sqrt().clamp(1e-9, kmax);
        let tol = 1e-13 * c / sigma;
        2.0 * (gl.adaptive(0.0, split, tol, &mut f) + gl.adaptive(split, kmax, tol, &mut f))
            / (2.0 * PI)
    };
    [comp(0, 0), comp(1, 1), comp(2, 2), 0.0, comp(0, 2), 0.0]
}

/// Dipolar field b = −c_dd K ∗ M by an explicit lattice sum, with the
/// periodic real-space kernel K built by a direct (non-FFT) Fourier sum of
/// [`tensor_by_quadrature`].
pub fn direct_sum_field(g: &Grid2D, sigma: f64, c_dd: f64, mode: KernelMode, m: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    if g.nx > DIRECT_SUM_MAX_SIDE || g.nz > DIRECT_SUM_MAX_SIDE {
        return Err(Error::invalid(format!(
            "direct sum limited to {DIRECT_SUM_MAX_SIDE}×{DIRECT_SUM_MAX_SIDE} grids"
        )));
    }
    let n = g.len();
    let mut qk = Vec::with_capacity(n);
    for jx in 0..g.nx {
        for jz in 0..g.nz {
            // a Nyquist bin stands for +k and −k alike: average over both
            let kxs: &[f64] = if jx == g.nx / 2 { &[g.kx(jx), -g.kx(jx)] } else { &[g.kx(jx)] };
            let kzs: &[f64] = if jz == g.nz / 2 { &[g.kz(jz), -g.kz(jz)] } else { &[g.kz(jz)] };
            let mut t = [0.0; 6];
            let w = 1.0 / (kxs.len() * kzs.len()) as f64;
            for &kx in kxs {
                for &kz in kzs {
                    let q = tensor_by_quadrature(kx, kz, sigma);
                    t.iter_mut().zip(q).for_each(|(a, v)| *a += w * v);
                }
            }
            let t = match mode {
                KernelMode::Bare => t,
                KernelMode::Larmor => larmor_average(&t),
                KernelMode::Off => [0.0; 6],
            };
            qk.push((jx, jz, t));
        }
    }
    // K(Δ) for every displacement Δ = (dx, dz) in cells
    let mut kernel = vec![[0.0f64; 6]; n];
    for dx in 0..g.nx {
        for dz in 0..g.nz {
            let mut acc = [0.0; 6];
            for (jx, jz, t) in &qk {
                let ph = 2.0 * PI * ((jx * dx) as f64 / g.nx as f64 + (jz * dz) as f64 / g.nz as f64);
                let c = ph.cos();
                for (a, v) in acc.iter_mut().zip(t) {
                    *a += v * c;
                }
            }
            kernel[g.index(dx, dz)] = acc.map(|v| v / n as f64);
        }
    }
    let mut out = vec![[0.0; 3]; n];
    for ix in 0..g.nx {
        for iz in 0..g.nz {
            let mut b = [0.0; 3];
            for jx in 0..g.nx {
                for jz in 0..g.nz {
                    let k = &kernel[g.index((ix + g.nx - jx) % g.nx, (iz + g.nz - jz) % g.nz)];
                    let v = m[g.index(jx, jz)];
                    b[0] += k[0] * v[0] + k[3] * v[1] + k[4] * v[2];
                    b[1] += k[3] * v[0] + k[1] * v[1] + k[5] * v[2];
                    b[2] += k[4] * v[0] + k[5] * v[1] + k[2] * v[2];
                }
            }
            out[g.index(ix, iz)] = b.map(|v| -c_dd * v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error.is_finite() && self.error <= self.tolerance
    }
}

fn max_rel(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let scale = b.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| (0..3).map(move |c| (u[c] - v[c]).abs()))
        .fold(0.0, f64::max)
        / scale
}

/// Smooth pseudo-random magnetization used by the field checks.
pub fn test_magnetization(g: &Grid2D) -> Vec<[f64; 3]> {
    g.sites()
        .map(|(i, x, z)| {
            let s = i as f64;
            [
                (0.7 * x + 0.3 * z).sin() + 0.2 * (1.3 * s).cos(),
                (0.4 * z - 0.9 * x).cos() + 0.1 * (2.1 * s).sin(),
                0.5 + 0.3 * (0.5 * x * z).sin(),
            ]
        })
        .collect()
}

/// FFT field against the lattice sum, max error relative to the peak field.
pub fn check_direct_sum(kernel: &DipoleKernel) -> Result<Check> {
    let g = kernel.grid;
    let m = test_magnetization(&g);
    let mut ws = DipoleWorkspace::new(g);
    let fast = kernel.field(&m, &mut ws);
    let slow = direct_sum_field(&g, kernel.sigma_y, kernel.c_dd, kernel.mode, &m)?;
    let name = match kernel.mode {
        KernelMode::Bare => "dipole FFT vs direct sum (bare)",
        KernelMode::Larmor => "dipole FFT vs direct sum (larmor)",
        KernelMode::Off => "dipole FFT vs direct sum (off)",
    };
    Ok(Check { name, error: max_rel(&fast, &slow), tolerance: 1e-6 })
}

/// Width (μm) of the Gaussian patches used by the sign audit.
const AUDIT_PATCH_WIDTH: f64 = 1.2;
/// Centre separation (μm) of the two patches.
const AUDIT_SEPARATION: f64 = 16.0;

/// Interaction energy of two Gaussian patches magnetized along ẑ, placed side
/// by side (along x) and head to tail (along z), against the point-dipole
/// pair energy c_dd μ_a μ_b (1 − 3cos²θ)/r³, with `c_dd` the physical
/// coupling supplied independently of the kernel. Returns the worse relative
/// deviation; a wrong sign always counts as ≥ 2.
///
/// The kernel grid must be at least ~6 separations wide so periodic images
/// stay negligible.
pub fn check_sign_audit(kernel: &DipoleKernel, c_dd: f64) -> Result<Check> {
    let g = kernel.grid;
    if g.lx < 6.0 * AUDIT_SEPARATION || g.lz < 6.0 * AUDIT_SEPARATION {
        return Err(Error::invalid("sign audit needs a grid at least 96 μm on a side"));
    }
    let patch = |x0: f64, z0: f64| -> Vec<[f64; 3]> {
        g.sites()
            .map(|(_, x, z)| {
                let r2 = (x - x0).powi(2) + (z - z0).powi(2);
                [0.0, 0.0, (-r2 / (2.0 * AUDIT_PATCH_WIDTH.powi(2))).exp()]
            })
            .collect()
    };
    let energy = |m: Vec<[f64; 3]>| dipolar_energy(kernel, &MagnetizationField { grid: g, n: vec![1.0; g.len()], m });
    let moment = 2.0 * PI * AUDIT_PATCH_WIDTH.powi(2);
    let d = AUDIT_SEPARATION;
    let mut worst: f64 = 0.0;
    for ((xb, zb), cos2) in [((d, 0.0), 0.0), ((0.0, d), 1.0)] {
        let ma = patch(0.0, 0.0);
        let mb = patch(xb, zb);
        let both: Vec<[f64; 3]> = ma.iter().zip(&mb).map(|(u, v)| std::array::from_fn(|c| u[c] + v[c])).collect();
        let got = energy(both)? - energy(ma)? - energy(mb)?;
        let expect = c_dd * moment * moment * (1.0 - 3.0 * cos2) / d.powi(3);
        let rel = (got - expect).abs() / expect.abs();
        worst = worst.max(if got.signum() == expect.signum() { rel } else { 2.0 + rel });
    }
    Ok(Check { name: "dipole pair sign audit", error: worst, tolerance: 0.1 })
}

/// Closed-form Larmor average against a 32-point uniform φ average of rotated
/// bare tensors, over every mode of `g`.
pub fn check_larmor_average(g: &Grid2D, sigma: f64) -> Check {
    let npts = 32;
    let mut worst: f64 = 0.0;
    for (kx, kz) in g.spectral_modes() {
        let t = bare_tensor(kx, kz, sigma);
        let mut avg = [0.0; 6];
        for j in 0..npts {
            let r = rotate_tensor_z(&t, 2.0 * PI * j as f64 / npts as f64);
            avg.iter_mut().zip(r).for_each(|(a, v)| *a += v / npts as f64);
        }
        let closed = larmor_average(&t);
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in avg.iter().zip(closed) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Check { name: "Larmor average vs numeric phi average", error: worst, tolerance: 1e-10 }
}

/// On-axis dipolar energy of one atom in an infinite Gaussian column carrying
/// a transverse helix, by direct real-space integration in spherical
/// coordinates about the atom (principal value with spherical exclusion).
///
/// With the azimuth integrated, the shell integrand is
/// 2π [n(r sinθ) cos(κ r cosθ) − n0] (3/2 cos²θ − 1/2) / r; the constant n0
/// part vanishes on every shell and is dropped.
pub fn helix_column_energy_3d(kappa: f64, sigma: f64, n0: f64, c_dd: f64) -> f64 {
    let gl = GaussLegendre::new(16);
    let r_max = 200.0 * sigma;
    let shell = |r: f64| -> f64 {
        let a = r * r / (2.0 * sigma * sigma);
        // w = 1 − cosθ; the column is confined to w ≲ σ²/r²
        let w_max = (40.0 / a).min(1.0);
        let panels = 8;
        let h = w_max / panels as f64;
        let mut v = 0.0;
        for j in 0..panels {
            v += gl.integrate(j as f64 * h, (j + 1) as f64 * h, |w| {
                let u = 1.0 - w;
                let n = (-a * w * (2.0 - w)).exp();
                n * (kappa * r * u).cos() * (1.5 * u * u - 0.5)
            });
        }
        // both hemispheres, azimuth
        4.0 * PI * v / r
    };
    let period = if kappa > 0.0 { 2.0 * PI / kappa } else { f64::INFINITY };
    let h = (0.1 * sigma).min(period / 8.0);
    let panels = (r_max / h).ceil() as usize;
    let mut total = 0.0;
    for j in 0..panels {
        total += gl.integrate(j as f64 * h, (j + 1) as f64 * h, shell);
    }
    c_dd * n0 * total
}

pub fn check_helix_column(sigma: f64, n0: f64, c_dd: f64) -> Check {
    let mut worst: f64 = 0.0;
    for ks in [0.3, 1.0, 3.0] {
        let kappa = ks / sigma;
        let a = helix_column_energy(kappa, sigma, n0, c_dd);
        let b = helix_column_energy_3d(kappa, sigma, n0, c_dd);
        worst = worst.max((a - b).abs() / b.abs());
    }
    Check { name: "helix column energy vs 3D integral", error: worst, tolerance: 0.05 }
}

/// RK4 for dψ/dt = −2πi·10⁻³·H(ψ)ψ (t in ms, H in h·Hz) with
/// H = c0n + c2 ⟨F⟩·F + q F_z², where `c0n` is the constant density term.
pub fn single_site_rk4(psi: Spinor, c0n: f64, c2: f64, q: f64, t_ms: f64, steps: usize) -> Spinor {
    let h = t_ms / steps as f64;
    let rhs = |v: &Spinor| -> Spinor {
        let (f, _) = spin_density(v);
        let hp = Complex64::new(c2 * f[0], c2 * f[1]) * std::f64::consts::FRAC_1_SQRT_2;
        let hz = c2 * f[2];
        let diag = c0n;
        let hv = [
            (diag + hz + q) * v[0] + hp.conj() * v[1],
            hp * v[0] + diag * v[1] + hp.conj() * v[2],
            hp * v[1] + (diag - hz + q) * v[2],
        ];
        hv.map(|x| x * Complex64::new(0.0, -PHASE_PER_HZ_MS))
    };
    let mut v = psi;
    for _ in 0..steps {
        let add = |a: &Spinor, b: &Spinor, s: f64| -> Spinor { std::array::from_fn(|i| a[i] + b[i] * s) };
        let k1 = rhs(&v);
        let k2 = rhs(&add(&v, &k1, h / 2.0));
        let k3 = rhs(&add(&v, &k2, h / 2.0));
        let k4 = rhs(&add(&v, &k3, h));
        v = std::array::from_fn(|i| v[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0));
    }
    v
}

/// A uniform transverse state evolved by the split-step integrator (kernel
/// off, q > 0) against RK4 on the same on-site problem.
pub fn check_single_site(p: &PhysicalParams) -> Result<Check> {
    let d = derive_params(p)?;
    let g = Grid2D::new(8, 8, 8.0, 8.0)?;
    let column = d.column_n0;
    let mut s = prepare_homogeneous(&g, column);
    // (1/2, 1/√2, 1/2)·√n: fully magnetized along x
    let a = column.sqrt();
    let init: Spinor = [
        Complex64::new(0.5 * a, 0.0),
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2 * a, 0.0),
        Complex64::new(0.5 * a, 0.0),
    ];
    for i in 0..g.len() {
        s.set_site(i, init);
    }
    let t_final = 20.0;
    let cfg = EvolutionConfig {
        dt: 0.001,
        t_final,
        snapshot_every: t_final,
        kernel_mode: KernelMode::Off,
        q: d.q_hz,
        residual_gradient: 0.0,
        potential: Potential::None,
        rng_seed: 0,
    };
    let mut prop = Propagator::new(p, &cfg, build_kernel(&g, p.sigma_y_um, KernelMode::Off, 0.0))?;
    for _ in 0..cfg.steps() {
        prop.step(&mut s);
    }
    let reference = single_site_rk4(init, d.c0_2d * column, d.c2_2d, d.q_hz, t_final, 100_000);
    let got: SpinorField = s;
    let v = got.site(0);
    let err = (0..3).map(|i| (v[i] - reference[i]).norm()).fold(0.0, f64::max) / a;
    Ok(Check { name: "single-site spin dynamics vs RK4", error: err, tolerance: 1e-8 })
}

/// Runs every self-check at the given parameters.
pub fn run_all(p: &PhysicalParams) -> Result<Vec<Check>> {
    let d = derive_params(p)?;
    let sigma = p.sigma_y_um;
    let mut out = Vec::new();
    let small = Grid2D::new(16, 16, 12.0, 16.0)?;
    for mode in [KernelMode::Bare, KernelMode::Larmor] {
        out.push(check_direct_sum(&build_kernel(&small, sigma, mode, d.c_dd))?);
    }
    let wide = Grid2D::new(128, 128, 128.0, 128.0)?;
    out.push(check_sign_audit(&build_kernel(&wide, sigma, KernelMode::Larmor, d.c_dd), d.c_dd)?);
    out.push(check_larmor_average(&small, sigma));
    out.push(check_helix_column(sigma, d.n0, d.c_dd));
    out.push(check_single_site(p)?);
    Ok(out)
}
