//! Physical constants, experiment parameters and closed-form derived scales.
//!
//! Internal unit system used throughout the crate:
//!
//! | quantity       | unit                 |
//! |----------------|----------------------|
//! | length         | μm                   |
//! | time           | ms                   |
//! | energy         | h·Hz (i.e. E/h)      |
//! | 3D density     | μm⁻³                 |
//! | column density | atoms/μm²            |
//! | coupling       | h·Hz·μm³             |
//!
//! A state component with energy `E` (h·Hz) accumulates the phase
//! `2π·E·t·1e-3` over `t` ms, see [`PHASE_PER_HZ_MS`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values (SI). Exact where the SI defines them.
pub mod si {
    /// Reduced Planck constant (J·s).
    pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
    /// Planck constant (J·s).
    pub const H: f64 = 6.626_070_15e-34;
    /// Bohr magneton (J/T).
    pub const MU_B: f64 = 9.274_010_078_3e-24;
    /// Vacuum permeability (N/A²).
    pub const MU_0: f64 = 1.256_637_062_12e-6;
    /// Unified atomic mass unit (kg).
    pub const AMU: f64 = 1.660_539_066_60e-27;
    /// Mass of ⁸⁷Rb (kg), 86.909180527 u.
    pub const RB87_MASS: f64 = 86.909_180_527 * AMU;
}

/// Phase (rad) accumulated per h·Hz of energy per ms.
pub const PHASE_PER_HZ_MS: f64 = 2.0 * PI * 1e-3;

const NM_TO_UM: f64 = 1e-3;
const CM3_TO_UM3: f64 = 1e-12;
const UM_TO_M: f64 = 1e-6;
const MG_TO_T: f64 = 1e-7;
const G_TO_T: f64 = 1e-4;
const MG_PER_CM_TO_T_PER_M: f64 = 1e-5;

/// Experiment parameters, in the units the lab reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Scattering length in the total-spin-0 channel (nm).
    pub a0_nm: f64,
    /// Scattering length in the total-spin-2 channel (nm).
    pub a2_nm: f64,
    /// Peak 3D number density (cm⁻³).
    pub n0_cm3: f64,
    pub atom_number: f64,
    /// Ambient field along ẑ (mG).
    pub b0_mg: f64,
    /// Trap angular frequencies (ωx, ωy, ωz) in s⁻¹.
    pub trap_freqs: [f64; 3],
    /// rms width of the Gaussian density profile along the tight axis ŷ (μm).
    pub sigma_y_um: f64,
    /// Quadratic Zeeman coefficient (Hz/G²).
    pub q_coeff_hz_per_g2: f64,
    pub mass_kg: f64,
    pub g_f: f64,
}

/// Thomas-Fermi radius along ŷ quoted for the experiment (μm).
pub const PAPER_TF_RADIUS_Y_UM: f64 = 1.8;

impl PhysicalParams {
    /// ⁸⁷Rb F=1 parameter set of the helix-dissolution experiment.
    pub fn paper() -> Self {
        let two_pi = 2.0 * PI;
        PhysicalParams {
            a0_nm: 5.39,
            a2_nm: 5.31,
            n0_cm3: 2.3e14,
            atom_number: 2.3e6,
            b0_mg: 165.0,
            trap_freqs: [two_pi * 39.0, two_pi * 440.0, two_pi * 4.2],
            // rms width of a Thomas-Fermi column of radius r_y is r_y/√5.
            sigma_y_um: PAPER_TF_RADIUS_Y_UM / 5f64.sqrt(),
            q_coeff_hz_per_g2: 71.6,
            mass_kg: si::RB87_MASS,
            g_f: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a0_nm", self.a0_nm),
            ("a2_nm", self.a2_nm),
            ("n0_cm3", self.n0_cm3),
            ("atom_number", self.atom_number),
            ("sigma_y_um", self.sigma_y_um),
            ("mass_kg", self.mass_kg),
            ("g_f", self.g_f),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b0_mg.is_finite() && self.b0_mg >= 0.0) {
            return Err(Error::invalid(format!("b0_mg must be >= 0, got {}", self.b0_mg)));
        }
        if !self.q_coeff_hz_per_g2.is_finite() {
            return Err(Error::invalid("q_coeff_hz_per_g2 must be finite"));
        }
        if self.trap_freqs.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "trap_freqs must be positive, got {:?}",
                self.trap_freqs
            )));
        }
        Ok(())
    }

    /// ħ/m in μm²/ms.
    pub fn hbar_over_mass(&self) -> f64 {
        si::HBAR / self.mass_kg * 1e12 * 1e-3
    }

    /// Kinetic energy ħ²k²/2m in h·Hz for a wavevector in rad/μm.
    pub fn kinetic_hz(&self, k: f64) -> f64 {
        // ħ²k²/(2m h) = (ħ/m) k² / (4π), with ħ/m in μm²/s
        self.hbar_over_mass() * 1e3 * k * k / (4.0 * PI)
    }
}

/// Closed-form scales derived from [`PhysicalParams`], in internal units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedParams {
    /// (2 a2 + a0)/3 (nm).
    pub abar_nm: f64,
    /// (a2 − a0)/3 (nm); negative means ferromagnetic.
    pub delta_a_nm: f64,
    /// Dipolar length μ0 gF² μB² m / (12π ħ²) (nm).
    pub a_d_nm: f64,
    /// Spin-independent contact coupling 4πħ² ā/m (h·Hz·μm³).
    pub c0: f64,
    /// Spin-dependent contact coupling 4πħ² Δa/m (h·Hz·μm³).
    pub c2: f64,
    /// Dipolar coupling μ0 (gF μB)²/(4π) (h·Hz·μm³).
    pub c_dd: f64,
    /// Peak density (μm⁻³).
    pub n0: f64,
    /// Spin healing length (8π |Δa| n0)^(−1/2) (μm).
    pub xi_s_um: f64,
    /// Quadratic Zeeman energy at B0 (h·Hz).
    pub q_hz: f64,
    /// Uniform-vs-wound dipole energy scale μ0 gF² μB² n0 / 2 (h·Hz).
    pub e_d_hz: f64,
    /// Larmor frequency gF μB B0 / h (Hz). Informational only: the dynamics
    /// run in the frame rotating at this frequency.
    pub larmor_hz: f64,
    /// ∫ρ(y)² dy for the unit-normalized transverse Gaussian (μm⁻¹).
    pub transverse_overlap: f64,
    /// Quasi-2D couplings c·∫ρ² (h·Hz·μm²).
    pub c0_2d: f64,
    pub c2_2d: f64,
    /// Peak column density √(2π) σ_y n0 (μm⁻²).
    pub column_n0: f64,
}

impl DerivedParams {
    /// a_d / |Δa|.
    pub fn dipolar_ratio(&self) -> f64 {
        self.a_d_nm / self.delta_a_nm.abs()
    }
}

pub fn derive_params(p: &PhysicalParams) -> Result<DerivedParams> {
    p.validate()?;
    let abar_nm = (2.0 * p.a2_nm + p.a0_nm) / 3.0;
    let delta_a_nm = (p.a2_nm - p.a0_nm) / 3.0;
    let mu = p.g_f * si::MU_B;
    let a_d_m = si::MU_0 * mu * mu * p.mass_kg / (12.0 * PI * si::HBAR * si::HBAR);

    // 4πħ²a/(m h) = 2 (ħ/m) a, with ħ/m in μm²/s and a in μm → Hz·μm³
    let hbar_over_m_si = p.hbar_over_mass() * 1e3;
    let c0 = 2.0 * hbar_over_m_si * abar_nm * NM_TO_UM;
    let c2 = 2.0 * hbar_over_m_si * delta_a_nm * NM_TO_UM;
    let c_dd = si::MU_0 * mu * mu / (4.0 * PI * si::H) / (UM_TO_M * UM_TO_M * UM_TO_M);

    let n0 = p.n0_cm3 * CM3_TO_UM3;
    let xi_s_um = 1.0 / (8.0 * PI * delta_a_nm.abs() * NM_TO_UM * n0).sqrt();
    let e_d_hz = si::MU_0 * mu * mu * (p.n0_cm3 * 1e6) / 2.0 / si::H;
    let larmor_hz = mu * p.b0_mg * MG_TO_T / si::H;

    let transverse_overlap = 1.0 / (2.0 * PI.sqrt() * p.sigma_y_um);
    Ok(DerivedParams {
        abar_nm,
        delta_a_nm,
        a_d_nm: a_d_m * 1e9,
        c0,
        c2,
        c_dd,
        n0,
        xi_s_um,
        q_hz: quadratic_zeeman(p.q_coeff_hz_per_g2, p.b0_mg)?,
        e_d_hz,
        larmor_hz,
        transverse_overlap,
        c0_2d: c0 * transverse_overlap,
        c2_2d: c2 * transverse_overlap,
        column_n0: (2.0 * PI).sqrt() * p.sigma_y_um * n0,
    })
}

/// q = q_coeff · B0² in h·Hz.
pub fn quadratic_zeeman(q_coeff_hz_per_g2: f64, b0_mg: f64) -> Result<f64> {
    if !(b0_mg >= 0.0) {
        return Err(Error::invalid(format!("field must be >= 0, got {b0_mg} mG")));
    }
    let b_g = b0_mg * MG_TO_T / G_TO_T;
    Ok(q_coeff_hz_per_g2 * b_g * b_g)
}

/// Helix wavevector (rad/μm) wound by a gradient `dBz/dz` (mG/cm) applied for
/// `tau_p_ms`.
pub fn helix_wavevector(g_f: f64, gradient_mg_per_cm: f64, tau_p_ms: f64) -> Result<f64> {
    if !(tau_p_ms > 0.0) {
        return Err(Error::invalid(format!("tau_p must be positive, got {tau_p_ms} ms")));
    }
    let rate = g_f * si::MU_B / si::HBAR; // rad s⁻¹ T⁻¹
    let kappa_per_m = rate * gradient_mg_per_cm * MG_PER_CM_TO_T_PER_M * tau_p_ms * 1e-3;
    Ok(kappa_per_m * UM_TO_M)
}

/// Gradient (mG/cm) that winds wavevector `kappa` (rad/μm) in `tau_p_ms`.
pub fn gradient_for_wavevector(g_f: f64, kappa: f64, tau_p_ms: f64) -> Result<f64> {
    Ok(kappa / helix_wavevector(g_f, 1.0, tau_p_ms)?)
}

/// ħ²κ²/4m in h·Hz: kinetic energy per atom of a fully magnetized spin helix.
pub fn helix_kinetic_energy(p: &PhysicalParams, kappa: f64) -> f64 {
    p.kinetic_hz(kappa) / 2.0
}

/// ħ²k²/8m in h·Hz: kinetic energy per atom when half the magnetization
/// spectral weight sits at `k_mod`.
pub fn modulation_kinetic_energy(p: &PhysicalParams, k_mod: f64) -> f64 {
    p.kinetic_hz(k_mod) / 4.0
}

/// Linear Zeeman shift per m_F per unit length (h·Hz/μm) of a field gradient
/// given in mG/cm.
pub fn gradient_zeeman_hz_per_um(g_f: f64, gradient_mg_per_cm: f64) -> f64 {
    g_f * si::MU_B / si::H * gradient_mg_per_cm * MG_PER_CM_TO_T_PER_M * UM_TO_M
}
