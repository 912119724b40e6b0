//! Measurements on magnetization fields: power spectra, long/short-range
//! order parameters, growth rates, the spin correlation function and spin
//! vortex detection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::EnergyTerms;
use crate::error::{Error, Result};
use crate::field::MagnetizationField;
use crate::grid::{Fft2, Grid2D};

/// |M̃(k)|² summed over the three components, in spectral layout.
///
/// Normalized so that Σ_k P = Σ_r |M(r)|² (P = |FFT|²/N).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub grid: Grid2D,
    pub p: Vec<f64>,
}

impl PowerSpectrum {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// |k| of every mode, in spectral layout.
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.grid
            .spectral_modes()
            .into_iter()
            .map(|(kx, kz)| (kx * kx + kz * kz).sqrt())
            .collect()
    }
}

pub fn power_spectrum(m: &MagnetizationField) -> PowerSpectrum {
    let g = m.grid;
    let mut fft = Fft2::new(g);
    let mut p = vec![0.0; g.len()];
    let mut buf = vec![Complex64::default(); g.len()];
    for c in 0..3 {
        for (b, v) in buf.iter_mut().zip(&m.m) {
            *b = Complex64::new(v[c], 0.0);
        }
        fft.forward(&mut buf);
        for (acc, b) in p.iter_mut().zip(&buf) {
            *acc += b.norm_sqr();
        }
    }
    let inv_n = 1.0 / g.len() as f64;
    p.iter_mut().for_each(|v| *v *= inv_n);
    PowerSpectrum { grid: g, p }
}

/// Fourier-space regions (rad/μm): disc |k| ≤ k_cut and annulus
/// k_lo ≤ |k| ≤ k_hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub k_cut: f64,
    pub k_lo: f64,
    pub k_hi: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            k_cut: 2.0 * PI / 25.0,
            k_lo: 2.0 * PI / 15.0,
            k_hi: 2.0 * PI / 6.0,
        }
    }
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_cut > 0.0 && self.k_cut < self.k_lo && self.k_lo < self.k_hi) {
            return Err(Error::invalid(format!(
                "regions need 0 < k_cut < k_lo < k_hi, got {} {} {}",
                self.k_cut, self.k_lo, self.k_hi
            )));
        }
        Ok(())
    }

    pub fn check_grid(&self, g: &Grid2D) -> Result<()> {
        self.validate()?;
        if self.k_hi >= g.nyquist() {
            return Err(Error::invalid(format!(
                "k_hi = {} exceeds the grid Nyquist wavevector {}",
                self.k_hi,
                g.nyquist()
            )));
        }
        Ok(())
    }
}

/// Spectral floor subtracted from every mode before integrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    #[default]
    Zero,
    Value(f64),
    /// Mean of P over modes with |k| > 2 k_hi.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderParams {
    pub long: f64,
    pub short: f64,
    pub total: f64,
}

pub fn order_parameters(ps: &PowerSpectrum, regions: &RegionSpec, bg: Background) -> Result<OrderParams> {
    regions.check_grid(&ps.grid)?;
    let ks = ps.wavenumbers();
    let floor = match bg {
        Background::Zero => 0.0,
        Background::Value(v) => v,
        Background::Estimate => {
            let (sum, count) = ks
                .iter()
                .zip(&ps.p)
                .filter(|(k, _)| **k > 2.0 * regions.k_hi)
                .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
            if count == 0 {
                return Err(Error::invalid("no modes above 2·k_hi to estimate the background"));
            }
            sum / count as f64
        }
    };
    let mut out = OrderParams { long: 0.0, short: 0.0, total: 0.0 };
    for (k, p) in ks.iter().zip(&ps.p) {
        let v = (p - floor).max(0.0);
        out.total += v;
        if *k <= regions.k_cut {
            out.long += v;
        } else if *k >= regions.k_lo && *k <= regions.k_hi {
            out.short += v;
        }
    }
    Ok(out)
}

/// Power summed in annular bins of width `dk` (bin i covers [i·dk, (i+1)·dk)).
pub fn radial_profile(ps: &PowerSpectrum, dk: f64) -> Vec<f64> {
    let ks = ps.wavenumbers();
    let kmax = ks.iter().cloned().fold(0.0, f64::max);
    let mut bins = vec![0.0; (kmax / dk) as usize + 1];
    for (k, p) in ks.iter().zip(&ps.p) {
        bins[(k / dk) as usize] += p;
    }
    bins
}

/// Centre |k| of the strongest radial bin at or above `k_min`.
pub fn dominant_wavenumber(ps: &PowerSpectrum, k_min: f64, dk: f64) -> f64 {
    let bins = radial_profile(ps, dk);
    let first = (k_min / dk).ceil() as usize;
    let (best, _) = bins
        .iter()
        .enumerate()
        .skip(first)
        .fold((first, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    (best as f64 + 0.5) * dk
}

/// Normalized `order`-fold angular harmonic of the power in an annulus:
/// |Σ P e^{i·order·θ}| / Σ P.
pub fn angular_harmonic(ps: &PowerSpectrum, k_lo: f64, k_hi: f64, order: u32) -> f64 {
    let mut acc = Complex64::default();
    let mut sum = 0.0;
    for ((kx, kz), p) in ps.grid.spectral_modes().into_iter().zip(&ps.p) {
        let k = (kx * kx + kz * kz).sqrt();
        if k >= k_lo && k <= k_hi {
            acc += Complex64::from_polar(*p, order as f64 * kz.atan2(kx));
            sum += p;
        }
    }
    if sum > 0.0 {
        acc.norm() / sum
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderParamRow {
    pub t_ms: f64,
    pub long_order: f64,
    pub short_order: f64,
    pub total_power: f64,
    pub n_vortices: usize,
    pub energy: EnergyTerms,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OrderParamSeries {
    pub rows: Vec<OrderParamRow>,
}

impl OrderParamSeries {
    pub fn push(&mut self, row: OrderParamRow) {
        self.rows.push(row);
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t_ms).collect()
    }

    /// short_order / total_power per row (0 where the total vanishes).
    pub fn short_fraction(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| if r.total_power > 0.0 { r.short_order / r.total_power } else { 0.0 })
            .collect()
    }
}

/// Minimum number of samples in a growth-rate fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Default fit window: from the first sample until the short-range fraction
/// first exceeds half its final value, extended to at least
/// [`MIN_FIT_POINTS`] samples.
pub fn default_growth_window(series: &OrderParamSeries) -> Option<(f64, f64)> {
    let t = series.times();
    let f = series.short_fraction();
    let last = *f.last()?;
    let end = f.iter().position(|&v| v > 0.5 * last).unwrap_or(f.len() - 1);
    let end = end.max(MIN_FIT_POINTS - 1).min(t.len() - 1);
    Some((t[0], t[end]))
}

/// Least-squares slope of short_order/total_power against time over `window`
/// (ms, inclusive), in s⁻¹.
pub fn growth_rate(series: &OrderParamSeries, window: Option<(f64, f64)>) -> Result<f64> {
    let (t0, t1) = window
        .or_else(|| default_growth_window(series))
        .ok_or_else(|| Error::invalid("empty series"))?;
    let (ts, ys): (Vec<f64>, Vec<f64>) = series
        .times()
        .into_iter()
        .zip(series.short_fraction())
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .unzip();
    if ts.len() < MIN_FIT_POINTS {
        return Err(Error::invalid(format!(
            "growth-rate window [{t0}, {t1}] ms holds {} samples, need {MIN_FIT_POINTS}",
            ts.len()
        )));
    }
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("degenerate growth-rate window: all times equal"));
    }
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    Ok(sxy / sxx * 1e3)
}

/// Spin correlation G(δr) in real-space layout indexed by the displacement
/// (ix, iz) with periodic wraparound. `None` where the density overlap
/// vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub grid: Grid2D,
    pub g: Vec<Option<f64>>,
}

impl Correlation {
    /// Value at a displacement of `(dix, diz)` cells.
    pub fn at(&self, dix: isize, diz: isize) -> Option<f64> {
        let ix = dix.rem_euclid(self.grid.nx as isize) as usize;
        let iz = diz.rem_euclid(self.grid.nz as isize) as usize;
        self.g[self.grid.index(ix, iz)]
    }
}

/// Relative overlap below which G is reported undefined.
const CORRELATION_MASK: f64 = 1e-12;

pub fn correlation(m: &MagnetizationField) -> Result<Correlation> {
    let g = m.grid;
    if !m.n.iter().any(|&n| n > 0.0) {
        return Err(Error::invalid("correlation needs positive density somewhere"));
    }
    let mut fft = Fft2::new(g);
    let autocorr = |fft: &mut Fft2, f: &dyn Fn(usize) -> f64| {
        let mut buf: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(f(i), 0.0)).collect();
        fft.forward(&mut buf);
        buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
        fft.inverse_normalized(&mut buf);
        buf.into_iter().map(|v| v.re).collect::<Vec<f64>>()
    };
    let mut num = vec![0.0; g.len()];
    for c in 0..3 {
        let a = autocorr(&mut fft, &|i| m.m[i][c]);
        num.iter_mut().zip(a).for_each(|(s, v)| *s += v);
    }
    let den = autocorr(&mut fft, &|i| m.n[i]);
    let scale = den.iter().cloned().fold(0.0, f64::max);
    let gvals = num
        .iter()
        .zip(&den)
        .map(|(n, d)| if *d > CORRELATION_MASK * scale { Some(n / d) } else { None })
        .collect();
    Ok(Correlation { grid: g, g: gvals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vortex {
    pub x: f64,
    pub z: f64,
    pub charge: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VortexSet {
    pub vortices: Vec<Vortex>,
    pub threshold_frac: f64,
}

impl VortexSet {
    pub fn count(&self) -> usize {
        self.vortices.len()
    }

    pub fn net_charge(&self) -> i32 {
        self.vortices.iter().map(|v| v.charge).sum()
    }
}

pub const DEFAULT_VORTEX_THRESHOLD: f64 = 0.15;

fn wrap_phase(d: f64) -> f64 {
    (d + PI).rem_euclid(2.0 * PI) - PI
}

/// Polar-core spin vortices: plaquettes whose transverse phase winds by ±2π
/// with all four corners above `threshold_frac` of the peak |M⊥|. Adjacent
/// candidates (including diagonals) of equal charge merge into one vortex at
/// their centroid. Loops run counterclockwise in the (x, z) plane.
pub fn detect_vortices(m: &MagnetizationField, threshold_frac: f64) -> Result<VortexSet> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::invalid(format!("threshold must be in (0, 1), got {threshold_frac}")));
    }
    let g = m.grid;
    let amp: Vec<f64> = (0..g.len()).map(|i| m.transverse(i).norm()).collect();
    let phase: Vec<f64> = (0..g.len()).map(|i| m.transverse(i).arg()).collect();
    let cut = threshold_frac * amp.iter().cloned().fold(0.0, f64::max);
    let mut charge = vec![0i32; g.len()];
    for ix in 0..g.nx {
        let ix1 = (ix + 1) % g.nx;
        for iz in 0..g.nz {
            let iz1 = (iz + 1) % g.nz;
            let corners = [g.index(ix, iz), g.index(ix1, iz), g.index(ix1, iz1), g.index(ix, iz1)];
            if corners.iter().any(|&c| amp[c] <= cut) {
                continue;
            }
            let w: f64 = (0..4)
                .map(|j| wrap_phase(phase[corners[(j + 1) % 4]] - phase[corners[j]]))
                .sum();
            let q = (w / (2.0 * PI)).round() as i32;
            if q.abs() == 1 {
                charge[g.index(ix, iz)] = q;
            }
        }
    }
    // flood-fill clusters of equal charge
    let mut seen = vec![false; g.len()];
    let mut vortices = Vec::new();
    for start in 0..g.len() {
        if charge[start] == 0 || seen[start] {
            continue;
        }
        let q = charge[start];
        let (sx, sz) = ((start / g.nz) as isize, (start % g.nz) as isize);
        let mut stack = vec![(sx, sz)];
        seen[start] = true;
        let (mut cx, mut cz, mut count) = (0.0, 0.0, 0.0);
        while let Some((ux, uz)) = stack.pop() {
            // unwrapped offsets from the seed keep clusters across the edge intact
            cx += ux as f64;
            cz += uz as f64;
            count += 1.0;
            for dx in -1..=1isize {
                for dz in -1..=1isize {
                    let (vx, vz) = (ux + dx, uz + dz);
                    let j = g.index(
                        vx.rem_euclid(g.nx as isize) as usize,
                        vz.rem_euclid(g.nz as isize) as usize,
                    );
                    if !seen[j] && charge[j] == q {
                        seen[j] = true;
                        stack.push((vx, vz));
                    }
                }
            }
        }
        let (mx, mz) = (cx / count, cz / count);
        let wrap = |v: f64, l: f64| (v + l / 2.0).rem_euclid(l) - l / 2.0;
        vortices.push(Vortex {
            x: wrap(-g.lx / 2.0 + (mx + 0.5) * g.dx(), g.lx),
            z: wrap(-g.lz / 2.0 + (mz + 0.5) * g.dz(), g.lz),
            charge: q,
        });
    }
    Ok(VortexSet { vortices, threshold_frac })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `None` if either
/// series is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
