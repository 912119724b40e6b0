//! Run orchestration: state preparation, evolution with analysis, and the
//! on-disk layout of a run directory.
//!
//! A run directory holds `meta` (TOML: config hash, version, full config),
//! `timeseries.csv`, `snap_t<ms>.txt` files and, once finished, `DONE`. A run
//! that fails leaves `INCOMPLETE` with the error message instead.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    detect_vortices, growth_rate, order_parameters, power_spectrum, Background, OrderParamRow, OrderParamSeries,
};
use crate::config::RunConfig;
use crate::dipole::{build_kernel, DipoleKernel};
use crate::dynamics::{evolve, make_cancellation_schedule, EvolutionConfig, Propagator, PulseSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::field::{add_spin_noise, imprint_helix, magnetization, prepare_initial, rotate_spin_in_place, SpinorField};
use crate::rng::{stream, Purpose};
use crate::snapshot::{list_snapshots, read_snapshot, snapshot_name, write_snapshot};
use crate::units::derive_params;

pub const TIMESERIES_HEADER: &str =
    "t_ms,long_order,short_order,total_power,n_vortices,e_kin,e_pot,e_c0,e_c2,e_zeeman,e_dipole";

/// Everything a run needs before the first step.
pub struct Prepared {
    pub state: SpinorField,
    pub propagator: Propagator,
    pub schedule: PulseSchedule,
    pub evolution: EvolutionConfig,
}

fn kernel_for(cfg: &RunConfig) -> Result<DipoleKernel> {
    let d = derive_params(&cfg.physics)?;
    Ok(build_kernel(&cfg.grid, cfg.physics.sigma_y_um, cfg.evolution.kernel_mode, d.c_dd))
}

/// The experiment's preparation sequence: cloud in m = −1, a π/2 pulse about
/// ŷ, the gradient-wound helix along ẑ, then seeded spin noise.
pub fn prepare_state(cfg: &RunConfig) -> Result<SpinorField> {
    cfg.validate()?;
    let mut s = prepare_initial(&cfg.physics, &cfg.grid, cfg.initial.profile)?;
    rotate_spin_in_place(&mut s, [0.0, 1.0, 0.0], FRAC_PI_2)?;
    let mut s = imprint_helix(&s, cfg.kappa());
    add_spin_noise(&mut s, cfg.initial.noise_amplitude, &mut stream(cfg.seed, Purpose::InitialNoise));
    Ok(s)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let state = prepare_state(cfg)?;
    let evolution = cfg.evolution_config()?;
    let propagator = Propagator::new(&cfg.physics, &evolution, kernel_for(cfg)?)?;
    let schedule = if cfg.cancellation.enabled {
        make_cancellation_schedule(cfg.cancellation.rate_khz, evolution.t_final, cfg.seed)?
    } else {
        PulseSchedule::default()
    };
    Ok(Prepared {
        state,
        propagator,
        schedule,
        evolution,
    })
}

/// Order parameters, vortex count and energy terms of one state.
pub fn analyze_state(t_ms: f64, s: &SpinorField, cfg: &RunConfig, prop: &mut Propagator) -> Result<OrderParamRow> {
    let m = magnetization(s);
    let ps = power_spectrum(&m);
    let op = order_parameters(&ps, &cfg.analysis.regions(), Background::Zero)?;
    let vortices = detect_vortices(&m, cfg.analysis.vortex_threshold)?;
    Ok(OrderParamRow {
        t_ms,
        long_order: op.long,
        short_order: op.short,
        total_power: op.total,
        n_vortices: vortices.count(),
        energy: prop.energy(s)?,
    })
}

/// Evolves `cfg` in memory, analysing every snapshot; `on_snapshot` sees each
/// analysed state.
pub fn simulate<F>(cfg: &RunConfig, mut on_snapshot: F) -> Result<(OrderParamSeries, Trajectory)>
where
    F: FnMut(&SpinorField, &OrderParamRow) -> Result<()>,
{
    let Prepared {
        state,
        mut propagator,
        schedule,
        evolution,
    } = prepare(cfg)?;
    // a second propagator evaluates energies while the first one is borrowed
    let mut probe = Propagator::new(&cfg.physics, &evolution, propagator.kernel().clone())?;
    let mut series = OrderParamSeries::default();
    let traj = evolve(state, &evolution, &mut propagator, &schedule, |t, s| {
        let row = analyze_state(t, s, cfg, &mut probe)?;
        on_snapshot(s, &row)?;
        series.push(row);
        Ok(())
    })?;
    Ok((series, traj))
}

pub fn format_row(r: &OrderParamRow) -> String {
    let e = &r.energy;
    let mut s = format!("{:.6}", r.t_ms);
    for v in [r.long_order, r.short_order, r.total_power] {
        let _ = write!(s, ",{v:.9e}");
    }
    let _ = write!(s, ",{}", r.n_vortices);
    for v in [e.kinetic, e.potential, e.contact0, e.contact2, e.zeeman, e.dipolar] {
        let _ = write!(s, ",{v:.9e}");
    }
    s
}

pub fn format_series(series: &OrderParamSeries) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in &series.rows {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub config_hash: String,
    pub version: String,
    pub config: RunConfig,
}

pub fn read_meta(dir: &Path) -> Result<Meta> {
    let path = dir.join("meta");
    let text = fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| Error::Format {
        path,
        message: e.message().to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub series: OrderParamSeries,
    pub snapshot_files: Vec<PathBuf>,
    pub pulses_applied: usize,
}

/// Runs `cfg` into `cfg.output.dir`, which must not already hold a run.
pub fn run_simulate(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output.dir);
    if dir.join("meta").exists() {
        return Err(Error::invalid(format!("{} already holds a run", dir.display())));
    }
    fs::create_dir_all(&dir)?;
    let incomplete = dir.join("INCOMPLETE");
    fs::write(&incomplete, "running\n")?;
    let result = run_into(cfg, &dir);
    match &result {
        Ok(_) => {
            fs::remove_file(&incomplete)?;
            fs::write(dir.join("DONE"), "")?;
        }
        Err(e) => fs::write(&incomplete, format!("{e}\n"))?,
    }
    result
}

fn run_into(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let hash = cfg.hash();
    let meta = Meta {
        config_hash: hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
    };
    fs::write(dir.join("meta"), toml::to_string(&meta).expect("meta serializes"))?;

    let evolution = cfg.evolution_config()?;
    let last = evolution.steps() / evolution.snapshot_stride();
    let file_stride = cfg.output.snapshot_file_stride;
    let mut index = 0;
    let mut files = Vec::new();
    let (series, traj) = simulate(cfg, |s, row| {
        if index % file_stride == 0 || index == last {
            let path = dir.join(snapshot_name(row.t_ms));
            write_snapshot(&path, row.t_ms, &hash, s)?;
            files.push(path);
        }
        index += 1;
        Ok(())
    })?;
    fs::write(dir.join("timeseries.csv"), format_series(&series))?;
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        series,
        snapshot_files: files,
        pulses_applied: traj.pulses_applied,
    })
}

/// Re-analyses the snapshots stored in a run directory and writes
/// `analysis.csv` in the time-series format.
pub fn run_analyze(dir: &Path) -> Result<OrderParamSeries> {
    let meta = read_meta(dir)?;
    let cfg = meta.config;
    if cfg.hash() != meta.config_hash {
        return Err(Error::Format {
            path: dir.join("meta"),
            message: "config hash does not match the stored config".into(),
        });
    }
    let evolution = cfg.evolution_config()?;
    let mut prop = Propagator::new(&cfg.physics, &evolution, kernel_for(&cfg)?)?;
    let mut series = OrderParamSeries::default();
    for path in list_snapshots(dir)? {
        let snap = read_snapshot(&path)?;
        if snap.config_hash != meta.config_hash {
            return Err(Error::Format {
                path,
                message: "snapshot belongs to a different config".into(),
            });
        }
        series.push(analyze_state(snap.time_ms, &snap.state, &cfg, &mut prop)?);
    }
    fs::write(dir.join("analysis.csv"), format_series(&series))?;
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaPoint {
    pub pitch_um: f64,
    pub kappa: f64,
    pub gamma_per_s: f64,
}

/// Growth rate of the short-range fraction for each helix pitch, one run per
/// pitch (run concurrently, in memory).
pub fn sweep_kappa(cfg: &RunConfig, pitches: &[f64]) -> Result<Vec<GammaPoint>> {
    if pitches.len() < 2 {
        return Err(Error::invalid(format!("sweep needs at least 2 pitches, got {}", pitches.len())));
    }
    let mut points: Vec<GammaPoint> = pitches
        .par_iter()
        .map(|&pitch| {
            let mut c = cfg.clone();
            c.initial.helix_pitch_um = pitch;
            let (series, _) = simulate(&c, |_, _| Ok(()))?;
            Ok(GammaPoint {
                pitch_um: pitch,
                kappa: c.kappa(),
                gamma_per_s: growth_rate(&series, None)?,
            })
        })
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    Ok(points)
}

pub fn format_gamma(points: &[GammaPoint]) -> String {
    let mut out = String::from("kappa_rad_per_um,gamma_per_s\n");
    for p in points {
        let _ = writeln!(out, "{:.9e},{:.9e}", p.kappa, p.gamma_per_s);
    }
    out
}

/// Runs the sweep and writes `gamma.csv` into `cfg.output.dir`.
pub fn run_sweep_kappa(cfg: &RunConfig, pitches: &[f64]) -> Result<(PathBuf, Vec<GammaPoint>)> {
    cfg.validate()?;
    let points = sweep_kappa(cfg, pitches)?;
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir)?;
    let path = dir.join("gamma.csv");
    fs::write(&path, format_gamma(&points))?;
    Ok((path, points))
}
