use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinor_dipolar::config::{parse_config, RunConfig, PAPER_PRESET};
use spinor_dipolar::dipole::KernelMode;
use spinor_dipolar::oracle;
use spinor_dipolar::run::{run_analyze, run_simulate, run_sweep_kappa};
use spinor_dipolar::units::{derive_params, helix_kinetic_energy, modulation_kinetic_energy};
use spinor_dipolar::Error;

#[derive(Parser)]
#[command(name = "spinor-dipolar", version, about = "Spin-helix dynamics in a dipolar spin-1 condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset filling keys absent from --config (default: defaults-paper when
    /// no config file is given).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dipolar kernel: bare, larmor or off.
    #[arg(long)]
    dipoles: Option<KernelMode>,
    /// Enable random π/2 cancellation pulses at this mean rate (kHz).
    #[arg(long, value_name = "RATE_KHZ")]
    cancel_pulses: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived constants of a configuration.
    Constants(ConfigArgs),
    /// Prepare a helix, evolve it and write a run directory.
    Simulate(ConfigArgs),
    /// Re-analyse the snapshots of a run directory into analysis.csv.
    Analyze {
        dir: PathBuf,
    },
    /// Growth rate of the modulated phase against helix wavevector.
    SweepKappa {
        #[command(flatten)]
        config: ConfigArgs,
        /// Helix pitches (μm), comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        pitches: Vec<f64>,
    },
    /// Run the independent reference checks.
    Selfcheck(ConfigArgs),
}

fn load(a: &ConfigArgs) -> spinor_dipolar::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_config(&text, a.preset.as_deref())?
        }
        None => parse_config("", Some(a.preset.as_deref().unwrap_or(PAPER_PRESET)))?,
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(mode) = a.dipoles {
        cfg.evolution.kernel_mode = mode;
    }
    if let Some(rate) = a.cancel_pulses {
        cfg.cancellation.enabled = true;
        cfg.cancellation.rate_khz = rate;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn constants(cfg: &RunConfig) -> spinor_dipolar::Result<()> {
    let d = derive_params(&cfg.physics)?;
    let p = &cfg.physics;
    let rows = [
        ("abar_nm", d.abar_nm),
        ("delta_a_nm", d.delta_a_nm),
        ("a_d_nm", d.a_d_nm),
        ("a_d_over_abs_delta_a", d.dipolar_ratio()),
        ("c0_hz_um3", d.c0),
        ("c2_hz_um3", d.c2),
        ("c_dd_hz_um3", d.c_dd),
        ("n0_um3", d.n0),
        ("xi_s_um", d.xi_s_um),
        ("q_hz", d.q_hz),
        ("q_half_hz", d.q_hz / 2.0),
        ("e_d_hz", d.e_d_hz),
        ("larmor_hz", d.larmor_hz),
        ("transverse_overlap_per_um", d.transverse_overlap),
        ("c0_2d_hz_um2", d.c0_2d),
        ("c2_2d_hz_um2", d.c2_2d),
        ("column_n0_um2", d.column_n0),
        ("helix_kinetic_hz", helix_kinetic_energy(p, cfg.kappa())),
        ("modulation_kinetic_hz_at_10um", modulation_kinetic_energy(p, 2.0 * std::f64::consts::PI / 10.0)),
    ];
    for (name, v) in rows {
        println!("{name:<32} {v:.9e}");
    }
    Ok(())
}

fn selfcheck(cfg: &RunConfig) -> spinor_dipolar::Result<bool> {
    let checks = oracle::run_all(&cfg.physics)?;
    let mut ok = true;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<40} max error {:.3e} (tolerance {:.1e})", c.name, c.error, c.tolerance);
        ok &= c.passed();
    }
    Ok(ok)
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numerical() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Constants(a) => load(&a).and_then(|c| constants(&c)),
        Command::Simulate(a) => load(&a).and_then(|c| {
            let out = run_simulate(&c)?;
            println!("{} ({} snapshots analysed)", out.dir.display(), out.series.rows.len());
            Ok(())
        }),
        Command::Analyze { dir } => run_analyze(&dir).map(|s| {
            println!("{} ({} snapshots)", dir.join("analysis.csv").display(), s.rows.len());
        }),
        Command::SweepKappa { config, pitches } => load(&config).and_then(|c| {
            let (path, points) = run_sweep_kappa(&c, &pitches)?;
            for p in &points {
                println!("lambda {:>7.2} um  kappa {:.5} rad/um  gamma {:.4e} 1/s", p.pitch_um, p.kappa, p.gamma_per_s);
            }
            println!("{}", path.display());
            Ok(())
        }),
        Command::Selfcheck(a) => match load(&a).and_then(|c| selfcheck(&c)) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
