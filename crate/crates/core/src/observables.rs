//! Scalar and marginal diagnostics of a density matrix.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::analytic;
use crate::error::{Error, Result};
use crate::grids::{self, GridSpec, Representation, SectorField};
use crate::params::{DerivedConstants, PhysicalParams, SectorLabel};
use crate::states::{gaussian_wavefunction, DensityMatrix};

/// A real observable sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidRun(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidRun("series times must be finite and strictly increasing".into()));
        }
        Ok(Self {
            label: label.into(),
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Writes `t,value` rows after `#` header lines.
pub fn write_series_csv<W: Write>(s: &TimeSeries, header: &[String], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# observable={}", s.label)?;
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "t,value")?;
    for (t, v) in s.times.iter().zip(&s.values) {
        writeln!(w, "{t},{v}")?;
    }
    Ok(())
}

pub fn read_series_csv<R: BufRead>(r: R) -> Result<TimeSeries> {
    let bad = |m: String| Error::Dump(m);
    let mut label = String::new();
    let mut body = String::new();
    for line in r.lines() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if let Some(c) = line.strip_prefix('#') {
            if let Some(l) = c.trim().strip_prefix("observable=") {
                label = l.to_string();
            }
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(bad(format!("expected header t,value, found {headers:?}")));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {row}: {e}")))?;
        if rec.len() != 2 {
            return Err(bad(format!("row {row}: expected 2 columns")));
        }
        let num = |k: usize| {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {row} column {k}: {e}")))
        };
        times.push(num(0)?);
        values.push(num(1)?);
    }
    TimeSeries::new(label, times, values).map_err(|e| bad(e.to_string()))
}

fn at_origin(f: &SectorField) -> Complex64 {
    f.values[[f.grid.origin_center(), f.grid.origin_diff()]]
}

/// Complex sector trace in any representation.
pub fn trace_complex(f: &SectorField) -> Complex64 {
    let g = f.grid;
    match f.rep {
        Representation::PartialFourier => at_origin(f),
        Representation::CenterDifference => f.values.column(g.origin_diff()).sum() * g.d_center(),
        Representation::Position => f.values.diag().sum() * g.d_center(),
    }
}

pub fn trace(f: &SectorField) -> f64 {
    trace_complex(f).re
}

/// Sum of the diagonal-sector traces.
pub fn total_trace(rho: &DensityMatrix) -> f64 {
    trace(rho.sector(SectorLabel::UpUp)) + trace(rho.sector(SectorLabel::DownDown))
}

/// `Tr rho^2`, contracting each sector with its partner through Parseval in `(Q, r)`.
pub fn purity(rho: &DensityMatrix) -> Result<f64> {
    let q = rho.to_partial_fourier()?;
    let g = q.grid();
    let (n0, n1) = g.shape();
    let weight = g.d_wavenumber() * g.d_diff() / (2.0 * std::f64::consts::PI);
    let mut total = Complex64::new(0.0, 0.0);
    for s in SectorLabel::ALL {
        let a = &q.sector(s).values;
        let b = &q.sector(s.partner()).values;
        for i in 0..n0 {
            let im = (n0 - i) % n0;
            for j in 0..n1 {
                total += a[[i, j]] * b[[im, (n1 - j) % n1]];
            }
        }
    }
    Ok(total.re * weight)
}

pub fn linear_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(total_trace(rho) - purity(rho)?)
}

/// `rho_updown(R, 0)` on the `R` grid.
fn updown_diagonal(rho: &DensityMatrix) -> Result<Vec<Complex64>> {
    let f = rho.sector(SectorLabel::UpDown);
    let g = f.grid;
    match f.rep {
        Representation::PartialFourier => grids::inverse_column(f, g.origin_diff()),
        Representation::CenterDifference => Ok(f.values.column(g.origin_diff()).to_vec()),
        Representation::Position => Ok(f.values.diag().to_vec()),
    }
}

/// `dR sum_R |rho_updown(R, 0)|`.
pub fn coherence_norm(rho: &DensityMatrix) -> Result<f64> {
    let d = updown_diagonal(rho)?;
    Ok(d.iter().map(|v| v.norm()).sum::<f64>() * rho.grid().d_center())
}

/// `max_R |rho_updown(R, 0)|`.
pub fn coherence_sup(rho: &DensityMatrix) -> Result<f64> {
    Ok(updown_diagonal(rho)?.iter().fold(0.0, |m, v| m.max(v.norm())))
}

/// Natural log of the coherence norm from logs of `rho_hat_updown(Q_k, 0)`.
///
/// The column is rescaled by its largest magnitude before the transform, so
/// norms far below the floating-point range are still resolved.
pub fn log_coherence_norm_from_logs(log_column: &[Complex64], grid: GridSpec) -> Result<f64> {
    let top = log_column.iter().fold(f64::NEG_INFINITY, |m, l| m.max(l.re));
    if !top.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let scaled: Vec<Complex64> = log_column.iter().map(|l| (l - top).exp()).collect();
    let diag = grids::inverse_lane(&scaled, grid)?;
    let l1 = diag.iter().map(|v| v.norm()).sum::<f64>() * grid.d_center();
    Ok(l1.ln() + top)
}

/// Log coherence norm of the closed-form evolution of `rho0` at each time.
///
/// Requires a closed-form apparatus block; values stay finite long after
/// the coherence itself underflows.
pub fn log_coherence_series(rho0: &DensityMatrix, times: &[f64], dc: &DerivedConstants) -> Result<TimeSeries> {
    let ev = rho0
        .apparatus
        .as_deref()
        .ok_or_else(|| Error::InvalidState("log coherence series needs a closed-form initial state".into()))?;
    let w = rho0.amps.weight(SectorLabel::UpDown);
    if w.norm() == 0.0 {
        return Err(Error::DegenerateSector(SectorLabel::UpDown.tag()));
    }
    let g = rho0.grid();
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let column: Vec<Complex64> = (0..g.n_center)
            .map(|i| analytic::evolve_log_point(ev, w, g.wavenumber(i), 0.0, t, SectorLabel::UpDown, dc))
            .collect();
        values.push(log_coherence_norm_from_logs(&column, g)?);
    }
    TimeSeries::new("log_coherence_norm", times.to_vec(), values)
}

/// A one-dimensional distribution on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub density: Vec<f64>,
    pub spacing: f64,
}

impl Marginal {
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spacing
    }

    pub fn mean(&self) -> f64 {
        let z: f64 = self.density.iter().sum();
        self.coords.iter().zip(&self.density).map(|(x, p)| x * p).sum::<f64>() / z
    }

    pub fn variance(&self) -> f64 {
        let z: f64 = self.density.iter().sum();
        let mu = self.mean();
        self.coords
            .iter()
            .zip(&self.density)
            .map(|(x, p)| (x - mu).powi(2) * p)
            .sum::<f64>()
            / z
    }

    /// Largest negative density value, zero if none.
    pub fn min_negative(&self) -> f64 {
        self.density.iter().fold(0.0f64, |m, p| m.min(*p))
    }
}

/// `P(R) = rho(R, 0)`.
pub fn position_marginal(f: &SectorField) -> Result<Marginal> {
    let g = f.grid;
    let diag: Vec<Complex64> = match f.rep {
        Representation::PartialFourier => grids::inverse_column(f, g.origin_diff())?,
        Representation::CenterDifference => f.values.column(g.origin_diff()).to_vec(),
        Representation::Position => f.values.diag().to_vec(),
    };
    Ok(Marginal {
        coords: (0..g.n_center).map(|i| g.center(i)).collect(),
        density: diag.iter().map(|v| v.re).collect(),
        spacing: g.d_center(),
    })
}

/// `P(p) = 1/(2 pi hbar) int dr exp(-i p r/hbar) rho_hat(0, r)` on the
/// momentum grid conjugate to `r`.
pub fn momentum_marginal(f: &SectorField, hbar: f64) -> Result<Marginal> {
    let q = grids::to_partial_fourier(f)?;
    let g = q.grid;
    let row = q.values.row(g.origin_center());
    let n = g.n_diff;
    let dp = 2.0 * std::f64::consts::PI * hbar / (n as f64 * g.d_diff());
    let coords: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64) * dp).collect();
    let density = coords
        .iter()
        .map(|&p| {
            let s: Complex64 = (0..n)
                .map(|j| row[j] * Complex64::from_polar(1.0, -p * g.diff(j) / hbar))
                .sum();
            (s * g.d_diff() / (2.0 * std::f64::consts::PI * hbar)).re
        })
        .collect();
    Ok(Marginal {
        coords,
        density,
        spacing: dp,
    })
}

/// Second moment along `r` of `|rho(R, r)|^2`.
pub fn r_variance(f: &SectorField) -> Result<f64> {
    let c = grids::to_center_difference(f)?;
    let g = c.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((_, j), v) in c.values.indexed_iter() {
        let w = v.norm_sqr();
        num += g.diff(j).powi(2) * w;
        den += w;
    }
    if den == 0.0 {
        return Err(Error::DegenerateSector(f.label.tag()));
    }
    Ok(num / den)
}

/// `<alpha| rho |alpha> / Tr rho` for the coherent state at `(x0, p0)`.
pub fn coherent_fidelity(f: &SectorField, x0: f64, p0: f64, p: &PhysicalParams) -> Result<f64> {
    let c = grids::to_center_difference(f)?;
    let g = c.grid;
    let tr = trace(&c);
    if !(tr.abs() > 0.0) {
        return Err(Error::DegenerateSector(f.label.tag()));
    }
    let s = (p.hbar / (2.0 * p.m * p.omega)).sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for ((i, j), v) in c.values.indexed_iter() {
        let (x, xp) = grids::from_center_coords(g.center(i), g.diff(j));
        acc += gaussian_wavefunction(x, x0, p0, s, p.hbar).conj() * v * gaussian_wavefunction(xp, x0, p0, s, p.hbar);
    }
    Ok((acc * g.d_center() * g.d_diff()).re / tr)
}

/// Fitted exponential decay time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub tau: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(t, log value)` restricted to `window`.
pub fn fit_log_decay(times: &[f64], logs: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(logs)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, l)| (*t, *l))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!("{} points in window, need at least 4", pts.len())));
    }
    if pts.iter().any(|(_, l)| !l.is_finite()) {
        return Err(Error::Fit("non-positive value in fit window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sll: f64 = pts.iter().map(|p| (p.1 - ml).powi(2)).sum();
    let slope = stl / stt;
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("no decay: slope {slope}")));
    }
    let r_squared = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    Ok(DecayFit {
        tau: -1.0 / slope,
        slope,
        r_squared,
        points: pts.len(),
    })
}

/// Fits `values ~ exp(-t / tau)` over `window` (all points if `None`).
pub fn fit_decoherence_time(s: &TimeSeries, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut logs = Vec::with_capacity(s.len());
    for (t, v) in s.times.iter().zip(&s.values) {
        if *t >= lo && *t <= hi && !(*v > 0.0) {
            return Err(Error::Fit(format!("non-positive value {v} at t = {t}")));
        }
        logs.push(v.ln());
    }
    fit_log_decay(&s.times, &logs, window)
}

/// Window `[t0, t0 + 2 tau_D]` with `t0` late enough that transients of the
/// slowest relaxation mode have decayed by `1e-4`.
pub fn default_fit_window(dc: &DerivedConstants) -> (f64, f64) {
    let t0 = (1e4f64).ln() / dc.slowest_rate();
    (t0, t0 + 2.0 * dc.tau_d)
}

/// `|<R>_downdown - <R>_upup|`.
pub fn pointer_separation(rho: &DensityMatrix) -> Result<f64> {
    let mut means = [0.0; 2];
    for (k, s) in [SectorLabel::UpUp, SectorLabel::DownDown].into_iter().enumerate() {
        let m = position_marginal(rho.sector(s))?;
        if !(m.integral().abs() > 1e-300) {
            return Err(Error::DegenerateSector(s.tag()));
        }
        means[k] = m.mean();
    }
    Ok((means[1] - means[0]).abs())
}

/// Grid L1 distance `sum_sectors dR dr sum |a - b|` in `(R, r)`; a proxy for
/// the trace distance.
pub fn l1_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidGrid("states live on different grids".into()));
    }
    let (ac, bc) = (a.to_center_difference()?, b.to_center_difference()?);
    let g = a.grid();
    let mut total = 0.0;
    for s in SectorLabel::ALL {
        total += (&ac.sector(s).values - &bc.sector(s).values)
            .iter()
            .map(|v| v.norm())
            .sum::<f64>();
    }
    Ok(total * g.d_center() * g.d_diff())
}

/// Largest `|a - b|` over a sector pair.
pub fn sup_distance(a: &SectorField, b: &SectorField) -> f64 {
    (&a.values - &b.values).iter().fold(0.0, |m, v| m.max(v.norm()))
}
