//! Symmetric split-step evolution of the spinor field.
//!
//! The dynamics run in the frame rotating at the Larmor frequency, so the
//! linear Zeeman term is absent and rf pulses are instantaneous rotations.
//! One step of length dt is
//!
//! ```text
//! P(dt/2) · K(dt) · P(dt/2)
//! ```
//!
//! where K is the exact kinetic propagator in momentum space and P the
//! on-site propagator for V + c0′n + c2′⟨F⟩·F + qF_z² + p(z)F_z − b·F. The
//! scalar part of P is an exact phase (density is conserved on-site). The spin
//! part is exponentiated exactly for a frozen mean field evaluated at the
//! midpoint of the substep through one predictor pass. The dipolar field b is
//! frozen over each half step.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dipole::{energy_from_field, DipoleKernel, DipoleWorkspace, KernelMode};
use crate::error::{Error, Result};
use crate::field::{cloud_shape, rotate_spin_in_place, Profile, SpinorField};
use crate::grid::{Fft2, Grid2D};
use crate::rng::{stream, Purpose};
use crate::spin::{evolve_spin, spin_density};
use crate::units::{derive_params, gradient_zeeman_hz_per_um, PhysicalParams, PHASE_PER_HZ_MS};

/// Largest accepted time step (ms). Above it the kinetic phase per step at the
/// Nyquist mode of a 1 μm grid exceeds ~1 rad.
pub const MAX_DT_MS: f64 = 0.2;

/// Default time step (ms): resolves the ~1.3 kHz contact energy and the
/// ~0.6 kHz Nyquist kinetic energy of a 1 μm grid to a few percent of a radian.
pub const DEFAULT_DT_MS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    None,
    /// ½ m (ω_x² x² + ω_z² z²) with angular frequencies in s⁻¹.
    Harmonic { omega_x: f64, omega_z: f64 },
    /// The harmonic trap that holds the prepared Thomas-Fermi cloud in place.
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub kernel_mode: KernelMode,
    /// Quadratic Zeeman energy (h·Hz).
    pub q: f64,
    /// Stray field gradient dB_z/dz (mG/cm).
    pub residual_gradient: f64,
    pub potential: Potential,
    pub rng_seed: u64,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT_MS) {
            return Err(Error::invalid(format!("dt must be in (0, {MAX_DT_MS}] ms, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        let ratio = self.snapshot_every / self.dt;
        if !(self.snapshot_every > 0.0 && (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0)) {
            return Err(Error::invalid(format!(
                "snapshot_every ({}) must be a positive multiple of dt ({})",
                self.snapshot_every, self.dt
            )));
        }
        if !self.q.is_finite() || !self.residual_gradient.is_finite() {
            return Err(Error::invalid("q and residual_gradient must be finite"));
        }
        if let Potential::Harmonic { omega_x, omega_z } = self.potential {
            if !(omega_x >= 0.0 && omega_z >= 0.0) {
                return Err(Error::invalid("harmonic frequencies must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn snapshot_stride(&self) -> usize {
        ((self.snapshot_every / self.dt).round() as usize).max(1)
    }
}

/// An instantaneous rf rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub time: f64,
    pub axis: [f64; 3],
    pub angle: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub events: Vec<Pulse>,
}

impl PulseSchedule {
    pub fn validate(&self, t_final: f64) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for p in &self.events {
            if !(p.time > prev) {
                return Err(Error::invalid("pulse times must be strictly increasing"));
            }
            if !(0.0..=t_final).contains(&p.time) {
                return Err(Error::invalid(format!("pulse at {} ms outside [0, {t_final}]", p.time)));
            }
            if p.axis[2] != 0.0 {
                return Err(Error::invalid("pulse axes must lie in the x–y plane"));
            }
            prev = p.time;
        }
        Ok(())
    }
}

/// π/2 pulses at Poisson-distributed times of mean rate `rate_khz`, each about
/// an axis drawn uniformly on the transverse circle.
pub fn make_cancellation_schedule(rate_khz: f64, t_final: f64, seed: u64) -> Result<PulseSchedule> {
    if !(rate_khz > 0.0) {
        return Err(Error::invalid(format!("pulse rate must be positive, got {rate_khz} kHz")));
    }
    let mut rng = stream(seed, Purpose::Schedule);
    let gaps = Exp::new(rate_khz).map_err(|e| Error::invalid(e.to_string()))?;
    let mut events = Vec::new();
    let mut t = gaps.sample(&mut rng);
    while t <= t_final {
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        events.push(Pulse {
            time: t,
            axis: [phi.cos(), phi.sin(), 0.0],
            angle: FRAC_PI_2,
        });
        t += gaps.sample(&mut rng);
    }
    Ok(PulseSchedule { events })
}

/// Per-atom energy terms (h·Hz).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub kinetic: f64,
    pub potential: f64,
    pub contact0: f64,
    pub contact2: f64,
    pub zeeman: f64,
    pub dipolar: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.contact0 + self.contact2 + self.zeeman + self.dipolar
    }
}

/// Everything needed to advance a state: couplings, tables and scratch space.
pub struct Propagator {
    grid: Grid2D,
    dt: f64,
    c0: f64,
    c2: f64,
    q: f64,
    potential: Vec<f64>,
    /// Linear Zeeman shift per site (h·Hz per unit F_z).
    gradient: Vec<f64>,
    /// ħ²k²/2m per mode (h·Hz), spectral layout.
    kinetic_energy: Vec<f64>,
    kinetic_phase: Vec<Complex64>,
    kernel: DipoleKernel,
    dipole_ws: DipoleWorkspace,
    fft: Fft2,
    buf: Vec<Complex64>,
    spin: Vec<[f64; 3]>,
    field: Vec<[f64; 3]>,
}

/// Harmonic frequencies (ωx, ωz) in s⁻¹ that hold the Thomas-Fermi cloud
/// prepared from `p` stationary for a fully magnetized state.
pub fn matched_trap(p: &PhysicalParams) -> Result<(f64, f64)> {
    let d = derive_params(p)?;
    let shape = cloud_shape(p, Profile::ThomasFermi)?;
    let mu_hz = (d.c0_2d + d.c2_2d) * shape.column_peak;
    // ½ m ω² r² = μ  →  ω = √(2μ/m)/r
    let v = (2.0 * mu_hz * crate::units::si::H / p.mass_kg).sqrt() * 1e6; // μm/s
    Ok((v / shape.rx, v / shape.rz))
}

impl Propagator {
    pub fn new(p: &PhysicalParams, cfg: &EvolutionConfig, kernel: DipoleKernel) -> Result<Self> {
        cfg.validate()?;
        let d = derive_params(p)?;
        let g = kernel.grid;
        let (wx, wz) = match cfg.potential {
            Potential::None => (0.0, 0.0),
            Potential::Harmonic { omega_x, omega_z } => (omega_x, omega_z),
            Potential::Matched => matched_trap(p)?,
        };
        // ½ m ω² r² / h with r in μm
        let pot_scale = 0.5 * p.mass_kg / crate::units::si::H * 1e-12;
        let potential = g
            .sites()
            .map(|(_, x, z)| pot_scale * (wx * wx * x * x + wz * wz * z * z))
            .collect();
        let grad = gradient_zeeman_hz_per_um(p.g_f, cfg.residual_gradient);
        let gradient = g.sites().map(|(_, _, z)| grad * z).collect();
        let kinetic_energy: Vec<f64> = g
            .spectral_modes()
            .into_iter()
            .map(|(kx, kz)| p.kinetic_hz((kx * kx + kz * kz).sqrt()))
            .collect();
        let inv_n = 1.0 / g.len() as f64;
        let kinetic_phase = kinetic_energy
            .iter()
            .map(|e| Complex64::from_polar(inv_n, -PHASE_PER_HZ_MS * e * cfg.dt))
            .collect();
        Ok(Propagator {
            grid: g,
            dt: cfg.dt,
            c0: d.c0_2d,
            c2: d.c2_2d,
            q: cfg.q,
            potential,
            gradient,
            kinetic_energy,
            kinetic_phase,
            dipole_ws: DipoleWorkspace::new(g),
            kernel,
            fft: Fft2::new(g),
            buf: vec![Complex64::default(); g.len()],
            spin: vec![[0.0; 3]; g.len()],
            field: vec![[0.0; 3]; g.len()],
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self) -> &DipoleKernel {
        &self.kernel
    }

    fn update_spin_and_field(&mut self, s: &SpinorField) {
        for (i, f) in self.spin.iter_mut().enumerate() {
            *f = spin_density(&s.site(i)).0;
        }
        if self.kernel.mode == KernelMode::Off {
            self.field.iter_mut().for_each(|b| *b = [0.0; 3]);
        } else {
            self.kernel.field_into(&self.spin, &mut self.dipole_ws, &mut self.field);
        }
    }

    fn position_half_step(&mut self, s: &mut SpinorField, tau: f64) {
        self.update_spin_and_field(s);
        let phase = PHASE_PER_HZ_MS * tau;
        for i in 0..self.grid.len() {
            let psi = s.site(i);
            let (f, n) = spin_density(&psi);
            let b = self.field[i];
            let ext = [-b[0], -b[1], self.gradient[i] - b[2]];
            let h0 = std::array::from_fn(|c| self.c2 * f[c] + ext[c]);
            let trial = evolve_spin(&psi, h0, self.q, phase);
            let ft = spin_density(&trial).0;
            let hm = std::array::from_fn(|c| self.c2 * 0.5 * (f[c] + ft[c]) + ext[c]);
            let mut out = evolve_spin(&psi, hm, self.q, phase);
            let scalar = Complex64::from_polar(1.0, -phase * (self.potential[i] + self.c0 * n));
            out.iter_mut().for_each(|v| *v *= scalar);
            s.set_site(i, out);
        }
    }

    fn kinetic_step(&mut self, s: &mut SpinorField) {
        for comp in s.psi.iter_mut() {
            self.buf.copy_from_slice(comp);
            self.fft.forward(&mut self.buf);
            for (v, ph) in self.buf.iter_mut().zip(&self.kinetic_phase) {
                *v *= ph;
            }
            self.fft.inverse(&mut self.buf);
            comp.copy_from_slice(&self.buf);
        }
    }

    /// One Strang step of length dt, in place.
    pub fn step(&mut self, s: &mut SpinorField) {
        let half = 0.5 * self.dt;
        self.position_half_step(s, half);
        self.kinetic_step(s);
        self.position_half_step(s, half);
    }

    /// Per-atom energy decomposition of `s`.
    pub fn energy(&mut self, s: &SpinorField) -> Result<EnergyTerms> {
        self.grid.check_same(&s.grid)?;
        let g = self.grid;
        let area = g.cell_area();
        let atoms = s.norm();
        let mut kin = 0.0;
        for comp in &s.psi {
            self.buf.copy_from_slice(comp);
            self.fft.forward(&mut self.buf);
            kin += self
                .buf
                .iter()
                .zip(&self.kinetic_energy)
                .map(|(v, e)| v.norm_sqr() * e)
                .sum::<f64>();
        }
        let kinetic = kin * area / g.len() as f64;
        self.update_spin_and_field(s);
        let (mut pot, mut c0, mut c2, mut zee) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let psi = s.site(i);
            let (f, n) = spin_density(&psi);
            pot += self.potential[i] * n;
            c0 += 0.5 * self.c0 * n * n;
            c2 += 0.5 * self.c2 * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
            zee += self.q * (psi[0].norm_sqr() + psi[2].norm_sqr()) + self.gradient[i] * f[2];
        }
        let dip = energy_from_field(&self.field, &self.spin, area);
        Ok(EnergyTerms {
            kinetic: kinetic / atoms,
            potential: pot * area / atoms,
            contact0: c0 * area / atoms,
            contact2: c2 * area / atoms,
            zeeman: zee * area / atoms,
            dipolar: dip / atoms,
        })
    }
}

/// One Strang step on a copy of `s`.
pub fn split_step(s: &SpinorField, prop: &mut Propagator) -> Result<SpinorField> {
    prop.grid.check_same(&s.grid)?;
    let mut out = s.clone();
    prop.step(&mut out);
    if !out.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            time_ms: prop.dt,
            detail: "state diverged in a single step".into(),
        });
    }
    Ok(out)
}

pub fn energy_decomposition(s: &SpinorField, prop: &mut Propagator) -> Result<EnergyTerms> {
    prop.energy(s)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: SpinorField,
    pub snapshot_times: Vec<f64>,
    pub steps: usize,
    pub pulses_applied: usize,
}

/// Finite checks cost a full pass over the state; run them this often.
const FINITE_CHECK_STRIDE: usize = 50;

/// Advance `s` to `cfg.t_final`, applying pulses between steps and calling
/// `observer(t, state)` at t = 0 and every `snapshot_every`.
///
/// A pulse with time t_p is applied just before the step that starts at the
/// first grid time ≥ t_p − dt/2.
pub fn evolve<O>(
    s: SpinorField,
    cfg: &EvolutionConfig,
    prop: &mut Propagator,
    schedule: &PulseSchedule,
    mut observer: O,
) -> Result<Trajectory>
where
    O: FnMut(f64, &SpinorField) -> Result<()>,
{
    cfg.validate()?;
    schedule.validate(cfg.t_final)?;
    prop.grid.check_same(&s.grid)?;
    let steps = cfg.steps();
    let stride = cfg.snapshot_stride();
    let mut state = s;
    let mut times = Vec::new();
    let mut next_pulse = 0;
    for n in 0..=steps {
        let t = n as f64 * cfg.dt;
        if n % stride == 0 {
            observer(t, &state)?;
            times.push(t);
        }
        if n == steps {
            break;
        }
        while next_pulse < schedule.events.len() && schedule.events[next_pulse].time < t + 0.5 * cfg.dt {
            let p = schedule.events[next_pulse];
            rotate_spin_in_place(&mut state, p.axis, p.angle)?;
            next_pulse += 1;
        }
        prop.step(&mut state);
        if ((n + 1) % FINITE_CHECK_STRIDE == 0 || n + 1 == steps) && !state.is_finite() {
            return Err(Error::NonFinite {
                step: n + 1,
                time_ms: t + cfg.dt,
                detail: "NaN or infinite amplitude".into(),
            });
        }
    }
    Ok(Trajectory {
        final_state: state,
        snapshot_times: times,
        steps,
        pulses_applied: next_pulse,
    })
}
