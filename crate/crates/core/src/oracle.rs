//! Numerical integrators for the sector transport equations.
//!
//! Both solvers work from the equation coefficients alone and never call
//! into [`crate::analytic`]: a fixed-step RK4 integration of single
//! characteristics, and a method-of-lines solver for whole fields.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{GridSpec, Representation};
use crate::params::{DerivedConstants, SectorLabel};
use crate::states::DensityMatrix;

/// Transport coefficients of one sector.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    hbar_over_m: f64,
    spring: f64,
    two_gamma: f64,
    q_drift: f64,
    damping: f64,
    phase_r: f64,
    phase_const: f64,
}

impl Coefficients {
    fn new(sector: SectorLabel, dc: &DerivedConstants) -> Self {
        let p = &dc.params;
        let s = sector.branch();
        let diag = sector.is_diagonal();
        Self {
            hbar_over_m: p.hbar / p.m,
            spring: p.m * p.omega * p.omega / p.hbar,
            two_gamma: 2.0 * p.gamma,
            q_drift: if diag { 0.0 } else { 2.0 * s * p.epsilon / p.hbar },
            damping: dc.diffusion / (4.0 * p.hbar * p.hbar),
            phase_r: if diag { s * p.epsilon / p.hbar } else { 0.0 },
            phase_const: if diag { 0.0 } else { 2.0 * s * p.lambda_spin / p.hbar },
        }
    }

    fn v_q(&self, r: f64) -> f64 {
        -self.spring * r + self.q_drift
    }

    fn v_r(&self, q: f64, r: f64) -> f64 {
        self.hbar_over_m * q - self.two_gamma * r
    }

    fn source(&self, r: f64) -> Complex64 {
        Complex64::new(-self.damping * r * r, self.phase_r * r + self.phase_const)
    }
}

/// Point on a characteristic with its accumulated exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharOdeState {
    pub q: f64,
    pub r: f64,
    pub logw: Complex64,
}

/// Follows the characteristic through `(q, r)` for a time `t` with `steps`
/// classical RK4 steps. Returns the source point and `int S ds`.
pub fn integrate_characteristic(
    q: f64,
    r: f64,
    t: f64,
    sector: SectorLabel,
    dc: &DerivedConstants,
    steps: usize,
) -> Result<CharOdeState> {
    if steps < 16 {
        return Err(Error::InvalidRun(format!("characteristic needs at least 16 steps, got {steps}")));
    }
    let c = Coefficients::new(sector, dc);
    let rhs = |y: [f64; 4]| -> [f64; 4] {
        let s = c.source(y[1]);
        [c.v_q(y[1]), c.v_r(y[0], y[1]), s.re, s.im]
    };
    let h = t / steps as f64;
    let mut y = [q, r, 0.0, 0.0];
    let axpy = |y: [f64; 4], k: [f64; 4], a: f64| -> [f64; 4] { std::array::from_fn(|n| y[n] + a * k[n]) };
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(axpy(y, k1, 0.5 * h));
        let k3 = rhs(axpy(y, k2, 0.5 * h));
        let k4 = rhs(axpy(y, k3, h));
        y = std::array::from_fn(|n| y[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]));
    }
    Ok(CharOdeState {
        q: y[0],
        r: y[1],
        logw: Complex64::new(y[2], y[3]),
    })
}

/// Spatial discretization of the advection terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Third-order upwind-biased differences, zero outside the grid.
    Upwind3,
    /// FFT derivatives on the periodic extension of the grid.
    Spectral,
}

impl Scheme {
    /// Largest stable `|v| dt / h` for RK4.
    fn advective_limit(self) -> f64 {
        match self {
            Scheme::Upwind3 => 1.6,
            // sqrt(8) / pi
            Scheme::Spectral => 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeRunConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Safety factor in `(0, 1]` applied to the stability limit.
    pub cfl: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (and at the end).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    50
}

impl PdeRunConfig {
    /// Largest admissible step for `cfl`, shortened to divide `t_end` evenly.
    pub fn auto(grid: GridSpec, dc: &DerivedConstants, scheme: Scheme, cfl: f64, t_end: f64) -> Self {
        let limit = cfl * stable_dt(grid, dc, scheme);
        let steps = (t_end / limit).ceil().max(1.0);
        Self {
            dt: t_end / steps,
            scheme,
            cfl,
            t_end,
            record_every: default_record_every(),
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidRun(format!("time step {} must be positive", self.dt)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidRun(format!("CFL factor {} must lie in (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidRun(format!("end time {} must be non-negative", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidRun("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// RK4 stability limit on `dt` over all sectors, including source stiffness.
pub fn stable_dt(grid: GridSpec, dc: &DerivedConstants, scheme: Scheme) -> f64 {
    let q_max = grid.wavenumber(0).abs();
    let r_max = grid.diff_extent;
    let adv = scheme.advective_limit();
    let mut worst: f64 = 0.0;
    for sector in SectorLabel::ALL {
        let c = Coefficients::new(sector, dc);
        let vq = c.spring * r_max + c.q_drift.abs();
        let vr = c.hbar_over_m * q_max + c.two_gamma * r_max;
        let s = c.source(r_max).norm().max(c.source(0.0).norm());
        // 2.78: real-axis extent of the RK4 stability region
        let rate = (vq / grid.d_wavenumber() + vr / grid.d_diff()) / adv + s / 2.78;
        worst = worst.max(rate);
    }
    1.0 / worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeDiagnostic {
    pub t: f64,
    pub sector: SectorLabel,
    /// Real part of the value at `(Q, r) = (0, 0)`.
    pub trace: f64,
    pub l2: f64,
    /// Squared-norm fraction in the two outermost grid lines on every side,
    /// relative to the sector's initial squared norm.
    pub boundary: f64,
}

#[derive(Debug, Clone)]
pub struct PdeOutcome {
    pub state: DensityMatrix,
    pub diagnostics: Vec<PdeDiagnostic>,
    pub steps: usize,
    /// Largest change of a diagonal-sector trace over the run.
    pub max_trace_drift: f64,
}

/// Boundary fraction above which the run aborts.
pub const MAX_BOUNDARY_FRACTION: f64 = 1e-6;

struct SectorOperator {
    v_q: Vec<f64>,
    v_r: Array2<f64>,
    source: Vec<Complex64>,
}

impl SectorOperator {
    fn new(label: SectorLabel, grid: GridSpec, dc: &DerivedConstants) -> Self {
        let c = Coefficients::new(label, dc);
        let (n0, n1) = grid.shape();
        Self {
            v_q: (0..n1).map(|j| c.v_q(grid.diff(j))).collect(),
            v_r: Array2::from_shape_fn((n0, n1), |(i, j)| c.v_r(grid.wavenumber(i), grid.diff(j))),
            source: (0..n1).map(|j| c.source(grid.diff(j))).collect(),
        }
    }
}

struct Derivatives {
    scheme: Scheme,
    hq: f64,
    hr: f64,
    n0: usize,
    n1: usize,
    fft_q: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fft_r: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    /// `i k / n` per FFT bin, Nyquist bin zeroed.
    kq: Vec<Complex64>,
    kr: Vec<Complex64>,
}

/// Scratch buffers reused across right-hand-side evaluations.
struct Workspace {
    rows: Vec<Complex64>,
    cols: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn upwind_lane(f: &[Complex64], v: impl Fn(usize) -> f64, h: f64, out: &mut [Complex64]) {
    let n = f.len();
    let at = |k: isize| -> Complex64 {
        if k < 0 || k >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            f[k as usize]
        }
    };
    let inv = 1.0 / (6.0 * h);
    for (i, o) in out.iter_mut().enumerate() {
        let k = i as isize;
        // d/dt rho = v d rho: information arrives from the +v side
        *o = if v(i) > 0.0 {
            (-at(k - 1) * 2.0 - at(k) * 3.0 + at(k + 1) * 6.0 - at(k + 2)) * inv
        } else {
            (at(k - 2) - at(k - 1) * 6.0 + at(k) * 3.0 + at(k + 1) * 2.0) * inv
        };
    }
}

fn spectral_factors(n: usize, h: f64) -> Vec<Complex64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|m| {
            let k = if m < n / 2 {
                m as f64
            } else if m == n / 2 {
                0.0
            } else {
                m as f64 - n as f64
            };
            Complex64::new(0.0, k * dk / n as f64)
        })
        .collect()
}

/// Differentiates every contiguous lane of `buf` in place.
fn spectral_batch(
    buf: &mut [Complex64],
    plans: &(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    k: &[Complex64],
    scratch: &mut Vec<Complex64>,
) {
    let need = plans.0.get_inplace_scratch_len().max(plans.1.get_inplace_scratch_len());
    if scratch.len() < need {
        scratch.resize(need, Complex64::new(0.0, 0.0));
    }
    plans.0.process_with_scratch(buf, &mut scratch[..need]);
    for lane in buf.chunks_exact_mut(k.len()) {
        for (v, f) in lane.iter_mut().zip(k) {
            *v *= f;
        }
    }
    plans.1.process_with_scratch(buf, &mut scratch[..need]);
}

impl Derivatives {
    fn new(grid: GridSpec, scheme: Scheme) -> Self {
        let mut planner = FftPlanner::new();
        let (n0, n1) = grid.shape();
        Self {
            scheme,
            hq: grid.d_wavenumber(),
            hr: grid.d_diff(),
            n0,
            n1,
            fft_q: (planner.plan_fft_forward(n0), planner.plan_fft_inverse(n0)),
            fft_r: (planner.plan_fft_forward(n1), planner.plan_fft_inverse(n1)),
            kq: spectral_factors(n0, grid.d_wavenumber()),
            kr: spectral_factors(n1, grid.d_diff()),
        }
    }

    fn workspace(&self) -> Workspace {
        let zero = Complex64::new(0.0, 0.0);
        Workspace {
            rows: vec![zero; self.n0 * self.n1],
            cols: vec![zero; self.n0 * self.n1],
            scratch: Vec::new(),
        }
    }

    /// `v_Q d_Q f + v_r d_r f + S f`.
    fn rhs(&self, op: &SectorOperator, f: &Array2<Complex64>, out: &mut Array2<Complex64>, ws: &mut Workspace) {
        let (n0, n1) = (self.n0, self.n1);
        let fs = f.as_slice().expect("standard layout");
        let vr = op.v_r.as_slice().expect("standard layout");
        // r direction: rows are contiguous
        match self.scheme {
            Scheme::Upwind3 => {
                for i in 0..n0 {
                    let lane = &fs[i * n1..(i + 1) * n1];
                    let v = &vr[i * n1..(i + 1) * n1];
                    upwind_lane(lane, |j| v[j], self.hr, &mut ws.rows[i * n1..(i + 1) * n1]);
                }
            }
            Scheme::Spectral => {
                ws.rows.copy_from_slice(fs);
                spectral_batch(&mut ws.rows, &self.fft_r, &self.kr, &mut ws.scratch);
            }
        }
        // Q direction on the transposed copy; velocity is constant along each lane
        for i in 0..n0 {
            for j in 0..n1 {
                ws.cols[j * n0 + i] = fs[i * n1 + j];
            }
        }
        match self.scheme {
            Scheme::Upwind3 => {
                let mut lane = vec![Complex64::new(0.0, 0.0); n0];
                for j in 0..n1 {
                    lane.copy_from_slice(&ws.cols[j * n0..(j + 1) * n0]);
                    let v = op.v_q[j];
                    upwind_lane(&lane, |_| v, self.hq, &mut ws.cols[j * n0..(j + 1) * n0]);
                }
            }
            Scheme::Spectral => spectral_batch(&mut ws.cols, &self.fft_q, &self.kq, &mut ws.scratch),
        }
        let os = out.as_slice_mut().expect("standard layout");
        for i in 0..n0 {
            for j in 0..n1 {
                let idx = i * n1 + j;
                os[idx] = ws.rows[idx] * vr[idx] + ws.cols[j * n0 + i] * op.v_q[j] + fs[idx] * op.source[j];
            }
        }
    }
}

fn squared_norm(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

fn boundary_norm(a: &Array2<Complex64>) -> f64 {
    let (n0, n1) = a.dim();
    let mut s = 0.0;
    for ((i, j), v) in a.indexed_iter() {
        if i < 2 || i + 2 >= n0 || j < 2 || j + 2 >= n1 {
            s += v.norm_sqr();
        }
    }
    s
}

/// Method-of-lines RK4 evolution of every sector from `rho0` to `cfg.t_end`.
pub fn integrate_pde(rho0: &DensityMatrix, cfg: &PdeRunConfig, dc: &DerivedConstants) -> Result<PdeOutcome> {
    cfg.check()?;
    rho0.sectors
        .iter()
        .try_for_each(|s| s.expect_rep(Representation::PartialFourier))?;
    let grid = rho0.grid();
    let limit = cfg.cfl * stable_dt(grid, dc, cfg.scheme);
    if cfg.dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: cfg.dt, limit });
    }
    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { cfg.t_end / steps as f64 };
    let derivs = Derivatives::new(grid, cfg.scheme);
    let mut ws = derivs.workspace();
    let origin = (grid.origin_center(), grid.origin_diff());

    let mut state = rho0.clone();
    let mut diagnostics = Vec::new();
    let mut max_trace_drift: f64 = 0.0;
    let mut k = [(); 4].map(|_| Array2::<Complex64>::zeros(grid.shape()));
    let mut stage = Array2::<Complex64>::zeros(grid.shape());

    for sector in SectorLabel::ALL {
        let field = &mut state.sectors[sector.index()];
        let initial_norm = squared_norm(&field.values);
        let trace0 = field.values[[origin.0, origin.1]].re;
        let record = |t: f64, values: &Array2<Complex64>, out: &mut Vec<PdeDiagnostic>| -> Result<f64> {
            let l2 = squared_norm(values);
            let boundary = if initial_norm > 0.0 {
                boundary_norm(values) / initial_norm
            } else {
                0.0
            };
            let trace = values[[origin.0, origin.1]].re;
            out.push(PdeDiagnostic {
                t,
                sector,
                trace,
                l2: (l2 * grid.d_wavenumber() * grid.d_diff()).sqrt(),
                boundary,
            });
            if boundary > MAX_BOUNDARY_FRACTION {
                return Err(Error::DomainTooSmall {
                    fraction: boundary,
                    sector: sector.tag(),
                    t,
                });
            }
            Ok(trace)
        };
        record(0.0, &field.values, &mut diagnostics)?;
        if initial_norm == 0.0 {
            if steps > 0 {
                record(cfg.t_end, &field.values, &mut diagnostics)?;
            }
            continue;
        }
        let op = SectorOperator::new(sector, grid, dc);
        for n in 0..steps {
            let y = &field.values;
            derivs.rhs(&op, y, &mut k[0], &mut ws);
            stage.zip_mut_with(y, |s, v| *s = *v);
            stage.scaled_add(Complex64::new(0.5 * h, 0.0), &k[0]);
            derivs.rhs(&op, &stage, &mut k[1], &mut ws);
            stage.zip_mut_with(y, |s, v| *s = *v);
            stage.scaled_add(Complex64::new(0.5 * h, 0.0), &k[1]);
            derivs.rhs(&op, &stage, &mut k[2], &mut ws);
            stage.zip_mut_with(y, |s, v| *s = *v);
            stage.scaled_add(Complex64::new(h, 0.0), &k[2]);
            derivs.rhs(&op, &stage, &mut k[3], &mut ws);
            let w = h / 6.0;
            let values = &mut field.values;
            ndarray::Zip::from(values)
                .and(&k[0])
                .and(&k[1])
                .and(&k[2])
                .and(&k[3])
                .for_each(|v, a, b, c, d| *v += (a + (b + c) * 2.0 + d) * w);
            let done = n + 1;
            if done % cfg.record_every == 0 || done == steps {
                let t = done as f64 * h;
                let trace = record(t, &field.values, &mut diagnostics)?;
                if sector.is_diagonal() {
                    max_trace_drift = max_trace_drift.max((trace - trace0).abs());
                }
            }
        }
    }
    state.time = rho0.time + cfg.t_end;
    diagnostics.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.sector.cmp(&b.sector)));
    Ok(PdeOutcome {
        state,
        diagnostics,
        steps,
        max_trace_drift,
    })
}

/// Writes diagnostics as `t,sector,trace,l2,boundary` rows.
pub fn write_diagnostics_csv<W: std::io::Write>(diags: &[PdeDiagnostic], header: &[String], mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidRun(format!("writing diagnostics: {e}"));
    for line in header {
        writeln!(w, "# {line}").map_err(io)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "sector", "trace", "l2", "boundary"])
        .map_err(|e| Error::InvalidRun(e.to_string()))?;
    for d in diags {
        out.write_record([
            d.t.to_string(),
            d.sector.tag().to_string(),
            d.trace.to_string(),
            d.l2.to_string(),
            d.boundary.to_string(),
        ])
        .map_err(|e| Error::InvalidRun(e.to_string()))?;
    }
    out.flush().map_err(io)
}

/// Relative L2 distance between two fields on the same grid.
pub fn relative_l2(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
