//! Run configuration: a TOML document, optionally layered over a named preset.
//!
//! ```toml
//! seed = 7
//! [evolution]
//! dt = 0.1
//! kernel_mode = "bare"
//! [initial]
//! helix_pitch_um = 80.0
//! ```
//!
//! Every key is required unless a preset supplies it. Unknown keys, missing
//! keys and out-of-range values are rejected with the offending line where
//! one exists.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{RegionSpec, DEFAULT_VORTEX_THRESHOLD};
use crate::dipole::KernelMode;
use crate::dynamics::{EvolutionConfig, Potential, DEFAULT_DT_MS};
use crate::error::{Error, Result};
use crate::field::Profile;
use crate::grid::Grid2D;
use crate::units::{derive_params, PhysicalParams};

/// Name of the preset holding the experiment's parameter set.
pub const PAPER_PRESET: &str = "defaults-paper";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    /// Time step (ms).
    pub dt: f64,
    /// Simulated duration (ms).
    pub t_final: f64,
    /// Interval between analysed snapshots (ms), a multiple of `dt`.
    pub snapshot_every: f64,
    pub kernel_mode: KernelMode,
    /// Quadratic Zeeman energy (h·Hz). Derived from the bias field if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_hz: Option<f64>,
    /// Stray gradient dB_z/dz (mG/cm).
    pub residual_gradient_mg_per_cm: f64,
    pub potential: Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub profile: Profile,
    /// Helix pitch λ = 2π/κ (μm).
    pub helix_pitch_um: f64,
    /// Relative amplitude of the white spin noise seeded into the helix.
    pub noise_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancellationSection {
    pub enabled: bool,
    /// Mean rate of the random π/2 pulses (kHz).
    pub rate_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub k_cut: f64,
    pub k_lo: f64,
    pub k_hi: f64,
    /// Vortex detection threshold as a fraction of the peak |M⊥|.
    pub vortex_threshold: f64,
}

impl AnalysisSection {
    pub fn regions(&self) -> RegionSpec {
        RegionSpec {
            k_cut: self.k_cut,
            k_lo: self.k_lo,
            k_hi: self.k_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Write every n-th analysed snapshot to disk; the first and last are
    /// always written.
    pub snapshot_file_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub physics: PhysicalParams,
    pub grid: Grid2D,
    pub evolution: EvolutionSection,
    pub initial: InitialSection,
    pub cancellation: CancellationSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// The experiment's parameters on a 64 × 512 μm grid at 1 μm spacing,
    /// which holds the Thomas-Fermi cloud (radii ≈ 18 × 171 μm).
    pub fn paper() -> Self {
        let regions = RegionSpec::default();
        RunConfig {
            seed: 1,
            physics: PhysicalParams::paper(),
            grid: Grid2D {
                nx: 64,
                nz: 512,
                lx: 64.0,
                lz: 512.0,
            },
            evolution: EvolutionSection {
                dt: DEFAULT_DT_MS,
                t_final: 250.0,
                snapshot_every: 5.0,
                kernel_mode: KernelMode::Larmor,
                q_hz: None,
                residual_gradient_mg_per_cm: 0.0,
                potential: Potential::Matched,
            },
            initial: InitialSection {
                profile: Profile::ThomasFermi,
                helix_pitch_um: 60.0,
                noise_amplitude: 1e-3,
            },
            cancellation: CancellationSection {
                enabled: false,
                rate_khz: 1.5,
            },
            analysis: AnalysisSection {
                k_cut: regions.k_cut,
                k_lo: regions.k_lo,
                k_hi: regions.k_hi,
                vortex_threshold: DEFAULT_VORTEX_THRESHOLD,
            },
            output: OutputSection {
                dir: "runs/default".into(),
                snapshot_file_stride: 10,
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PAPER_PRESET => Ok(Self::paper()),
            other => Err(Error::Config {
                line: None,
                key: None,
                message: format!("unknown preset `{other}` (available: {PAPER_PRESET})"),
            }),
        }
    }

    /// Quadratic Zeeman energy in effect (h·Hz).
    pub fn q_hz(&self) -> Result<f64> {
        match self.evolution.q_hz {
            Some(q) => Ok(q),
            None => Ok(derive_params(&self.physics)?.q_hz),
        }
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let e = &self.evolution;
        Ok(EvolutionConfig {
            dt: e.dt,
            t_final: e.t_final,
            snapshot_every: e.snapshot_every,
            kernel_mode: e.kernel_mode,
            q: self.q_hz()?,
            residual_gradient: e.residual_gradient_mg_per_cm,
            potential: e.potential,
            rng_seed: self.seed,
        })
    }

    /// Helix wavevector κ = 2π/λ (rad/μm).
    pub fn kappa(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.initial.helix_pitch_um
    }

    /// Checks every field; errors name the offending key as `section.key`.
    pub fn validate(&self) -> Result<()> {
        let keyed = |key: &str, r: Result<()>| {
            r.map_err(|e| Error::Config {
                line: None,
                key: Some(key.to_string()),
                message: e.to_string(),
            })
        };
        let range = |key: &str, ok: bool, what: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config {
                    line: None,
                    key: Some(key.to_string()),
                    message: format!("`{key}` out of range: {what}"),
                })
            }
        };
        // TOML integers are signed 64-bit
        range("seed", self.seed <= i64::MAX as u64, format!("seed = {}", self.seed))?;
        keyed("physics", self.physics.validate())?;
        keyed("grid", self.grid.validate())?;
        let e = &self.evolution;
        range("evolution.dt", e.dt > 0.0 && e.dt <= crate::dynamics::MAX_DT_MS, format!("dt = {}", e.dt))?;
        range("evolution.t_final", e.t_final >= 0.0 && e.t_final.is_finite(), format!("t_final = {}", e.t_final))?;
        if let Some(q) = e.q_hz {
            range("evolution.q_hz", q.is_finite(), format!("q_hz = {q}"))?;
        }
        keyed("evolution", self.evolution_config()?.validate())?;
        let i = &self.initial;
        range(
            "initial.helix_pitch_um",
            i.helix_pitch_um > 0.0 && i.helix_pitch_um.is_finite(),
            format!("helix_pitch_um = {}", i.helix_pitch_um),
        )?;
        range(
            "initial.noise_amplitude",
            (0.0..1.0).contains(&i.noise_amplitude),
            format!("noise_amplitude = {} not in [0, 1)", i.noise_amplitude),
        )?;
        let c = &self.cancellation;
        range("cancellation.rate_khz", c.rate_khz > 0.0 && c.rate_khz.is_finite(), format!("rate_khz = {}", c.rate_khz))?;
        let a = &self.analysis;
        keyed("analysis", a.regions().check_grid(&self.grid))?;
        range(
            "analysis.vortex_threshold",
            a.vortex_threshold > 0.0 && a.vortex_threshold < 1.0,
            format!("vortex_threshold = {}", a.vortex_threshold),
        )?;
        range(
            "output.snapshot_file_stride",
            self.output.snapshot_file_stride >= 1,
            "snapshot_file_stride must be >= 1".into(),
        )?;
        range("output.dir", !self.output.dir.is_empty(), "dir is empty".into())?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes to TOML")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Parses `text` on top of `preset` (if any) and validates the result.
pub fn parse_config(text: &str, preset: Option<&str>) -> Result<RunConfig> {
    let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| line_at(text, s.start)),
        key: None,
        message: e.message().trim().to_string(),
    })?;
    let merged = match preset {
        Some(name) => {
            let mut base = toml::Table::try_from(RunConfig::preset(name)?)
                .map_err(|e| Error::invalid(format!("preset does not serialize: {e}")))?;
            merge(&mut base, user);
            base
        }
        None => user,
    };
    let cfg: RunConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
        let message = e.message().trim().to_string();
        let key = backticked(&message);
        Error::Config {
            line: key.as_deref().and_then(|k| line_of_key(text, k)),
            key,
            message,
        }
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Config { key: Some(key), message, .. } => {
            let leaf = key.rsplit('.').next().unwrap_or(&key).to_string();
            Error::Config {
                line: line_of_key(text, &leaf),
                key: Some(key),
                message,
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        let rest = l
            .strip_prefix(key)
            .or_else(|| l.strip_prefix(&format!("\"{key}\"")));
        rest.is_some_and(|r| r.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_with_preset_is_the_paper_set() {
        let c = parse_config("", Some(PAPER_PRESET)).unwrap();
        assert_eq!(c, RunConfig::paper());
        assert_eq!(c.physics.a0_nm, 5.39);
        assert_eq!(c.physics.b0_mg, 165.0);
    }

    #[test]
    fn negative_dt_names_dt_and_its_line() {
        let e = parse_config("seed = 3\n[evolution]\ndt = -1\n", Some(PAPER_PRESET)).unwrap_err();
        match e {
            Error::Config { line, key, message } => {
                assert_eq!(key.as_deref(), Some("evolution.dt"));
                assert_eq!(line, Some(3));
                assert!(message.contains("dt"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys() {
        let e = parse_config("[grid]\nnx = 64\nbogus = 1\n", Some(PAPER_PRESET)).unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(3), .. }), "{e}");
        let e = parse_config("seed = 1\n", None).unwrap_err();
        assert!(e.to_string().contains("missing field"), "{e}");
        let e = parse_config("seed = [", None).unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(1), .. }), "{e}");
    }

    #[test]
    fn serialization_round_trips() {
        let text = "[initial]\nhelix_pitch_um = 80.0\n[evolution]\nq_hz = 0.5\n";
        let a = parse_config(text, Some(PAPER_PRESET)).unwrap();
        let b = parse_config(&a.to_toml(), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig::paper().hash());
    }
}
