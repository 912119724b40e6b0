//! Derived constants and energies checked against values computed outside
//! this crate (CODATA constants with scipy, transverse integrals with mpmath).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use spinor_dipolar::dipole::{build_kernel, KernelMode};
use spinor_dipolar::dynamics::{EvolutionConfig, Potential, Propagator};
use spinor_dipolar::field::{imprint_helix, SpinorField};
use spinor_dipolar::grid::Grid2D;
use spinor_dipolar::units::{
    derive_params, gradient_for_wavevector, helix_kinetic_energy, helix_wavevector, modulation_kinetic_energy,
    PhysicalParams,
};

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol * want.abs(), "got {got}, want {want}");
}

#[test]
fn couplings_and_scales() {
    let d = derive_params(&PhysicalParams::paper()).unwrap();
    // scipy uses CODATA 2022; the crate uses 2018, ~1e-9 apart
    close(d.c0, 7.799405150228476, 1e-8);
    close(d.c2, -0.03897266783374616, 1e-8);
    close(d.c_dd, 0.003245032905641255, 1e-8);
    close(d.xi_s_um, 2.54701666190631, 1e-8);
    close(d.e_d_hz, 4.689502907029064, 1e-8);
    close(d.a_d_nm, 0.009300714444180928, 1e-8);
    close(d.column_n0, 464.09327271774845, 1e-12);
    close(d.q_hz, 1.94931, 1e-12);
    close(d.transverse_overlap, 0.35043507250280004, 1e-12);
}

#[test]
fn kinetic_scales() {
    let p = PhysicalParams::paper();
    close(helix_kinetic_energy(&p, 2.0 * PI / 60.0), 0.3188443931179494, 1e-8);
    close(modulation_kinetic_energy(&p, 2.0 * PI / 10.0), 5.739199076123089, 1e-8);
}

#[test]
fn gradient_winding_inverts() {
    let k = helix_wavevector(0.5, 100.0, 2.0).unwrap();
    close(gradient_for_wavevector(0.5, k, 2.0).unwrap(), 100.0, 1e-12);
    // 2π · (gF μB/h = 699.812 kHz/G) · (1 mG/cm = 1e-7 G/μm) · 1 ms ≈ 4.4e-4 rad/μm
    close(helix_wavevector(0.5, 1.0, 1.0).unwrap(), 2.0 * PI * 6.99812e5 * 1e-7 * 1e-3, 1e-5);
}

/// Fully magnetized transverse helix, one winding across a homogeneous box.
fn box_helix(p: &PhysicalParams, lambda: f64) -> SpinorField {
    let d = derive_params(p).unwrap();
    let g = Grid2D::new(32, 64, lambda, lambda).unwrap();
    let a = d.column_n0.sqrt();
    let mut s = SpinorField::zeros(g);
    for i in 0..g.len() {
        s.set_site(
            i,
            [Complex64::new(0.5 * a, 0.0), Complex64::new(FRAC_1_SQRT_2 * a, 0.0), Complex64::new(0.5 * a, 0.0)],
        );
    }
    imprint_helix(&s, 2.0 * PI / lambda)
}

fn energies(mode: KernelMode, lambda: f64) -> spinor_dipolar::dynamics::EnergyTerms {
    let p = PhysicalParams::paper();
    let d = derive_params(&p).unwrap();
    let s = box_helix(&p, lambda);
    let cfg = EvolutionConfig {
        dt: 0.05,
        t_final: 0.0,
        snapshot_every: 0.05,
        kernel_mode: mode,
        q: d.q_hz,
        residual_gradient: 0.0,
        potential: Potential::None,
        rng_seed: 0,
    };
    let mut prop = Propagator::new(&p, &cfg, build_kernel(&s.grid, p.sigma_y_um, mode, d.c_dd)).unwrap();
    prop.energy(&s).unwrap()
}

#[test]
fn helix_energy_decomposition() {
    for mode in [KernelMode::Bare, KernelMode::Larmor] {
        let e = energies(mode, 60.0);
        close(e.kinetic, 0.3188443931179494, 1e-8);
        close(e.zeeman, 1.94931 / 2.0, 1e-12);
        close(e.contact0, 634.2264111590014, 1e-8);
        close(e.contact2, -3.1691513362098656, 1e-8);
        assert_eq!(e.potential, 0.0);
        // c_dd ñ (π/3)(J0 − 3 I(κ)), I by mpmath quadrature over k_y
        close(e.dipolar, 0.326845522584598, 1e-7);
    }
    close(energies(KernelMode::Bare, 30.0).dipolar, 0.138986190058874, 1e-7);
    assert_eq!(energies(KernelMode::Off, 60.0).dipolar, 0.0);
}
