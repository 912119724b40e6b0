//! Plain-text snapshot files.
//!
//! A header of `key=value` lines (time, grid, units, config hash) is followed
//! by one record per site, row-major with z fastest:
//!
//! ```text
//! x z n Mx My Mz re(ψ+1) im(ψ+1) re(ψ0) im(ψ0) re(ψ−1) im(ψ−1)
//! ```
//!
//! Numbers are printed with 13 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{magnetization, SpinorField};
use crate::grid::Grid2D;

pub const UNITS: &str = "length=um time=ms density=um^-2 magnetization=um^-2 psi=um^-1";
pub const COLUMNS: &str = "x z n Mx My Mz re_p1 im_p1 re_0 im_0 re_m1 im_m1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time_ms: f64,
    pub config_hash: String,
    pub state: SpinorField,
}

/// File name of the snapshot taken at `t_ms`; sorts by time.
pub fn snapshot_name(t_ms: f64) -> String {
    format!("snap_t{:09.3}.txt", t_ms)
}

pub fn format_snapshot(time_ms: f64, config_hash: &str, s: &SpinorField) -> String {
    let g = s.grid;
    let m = magnetization(s);
    let mut out = String::with_capacity(g.len() * 260);
    let _ = writeln!(out, "time_ms={time_ms:.12e}");
    let _ = writeln!(out, "nx={}\nnz={}\nlx={:.12e}\nlz={:.12e}", g.nx, g.nz, g.lx, g.lz);
    let _ = writeln!(out, "units={UNITS}");
    let _ = writeln!(out, "config_hash={config_hash}");
    let _ = writeln!(out, "columns={COLUMNS}");
    for (i, x, z) in g.sites() {
        let v = s.site(i);
        let mut fields = [x, z, m.n[i], m.m[i][0], m.m[i][1], m.m[i][2], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for c in 0..3 {
            fields[6 + 2 * c] = v[c].re;
            fields[7 + 2 * c] = v[c].im;
        }
        let line: Vec<String> = fields.iter().map(|f| format!("{f:.12e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_snapshot(path: &Path, time_ms: f64, config_hash: &str, s: &SpinorField) -> Result<()> {
    fs::write(path, format_snapshot(time_ms, config_hash, s))?;
    Ok(())
}

pub fn parse_snapshot(text: &str, path: &Path) -> Result<Snapshot> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut header = std::collections::HashMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, l)) = lines.peek() {
        match l.split_once('=') {
            Some((k, v)) => {
                header.insert(k.trim().to_string(), v.trim().to_string());
                lines.next();
            }
            None => break,
        }
    }
    let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("header lacks `{k}`")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|e| bad(format!("`{k}`: {e}"))) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| bad(format!("`{k}`: {e}"))) };
    let grid = Grid2D::new(int("nx")?, int("nz")?, num("lx")?, num("lz")?)?;
    let time_ms = num("time_ms")?;
    let config_hash = get("config_hash")?.clone();
    if get("columns")? != COLUMNS {
        return Err(bad("unexpected column layout".into()));
    }
    let mut state = SpinorField::zeros(grid);
    let mut count = 0;
    for (ln, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        if count == grid.len() {
            return Err(bad(format!("line {}: more records than grid sites", ln + 1)));
        }
        let f: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
        if f.len() != 12 {
            return Err(bad(format!("line {}: expected 12 fields, got {}", ln + 1, f.len())));
        }
        let v = std::array::from_fn(|c| Complex64::new(f[6 + 2 * c], f[7 + 2 * c]));
        state.set_site(count, v);
        count += 1;
    }
    if count != grid.len() {
        return Err(bad(format!("{count} records for {} sites", grid.len())));
    }
    Ok(Snapshot {
        time_ms,
        config_hash,
        state,
    })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    parse_snapshot(&text, path)
}

/// Snapshot files in `dir`, ordered by time.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_t") && n.ends_with(".txt"))
        })
        .collect();
    out.sort();
    Ok(out)
}
