//! Grids, sector fields and the partial Fourier transform in `R`.
//!
//! Sector fields live on a uniform 2-D grid. Axis 0 is the centre coordinate
//! `R = (x + x')/2` or its conjugate wavenumber `Q`; axis 1 is the difference
//! coordinate `r = x - x'`. Both axes have an even number of points and
//! contain the origin at index `n/2`.
//!
//! The transform uses the `exp(+i Q R)` kernel with Riemann-sum weights:
//!
//! ```text
//! rho_hat(Q_k, r) = dR * sum_n exp(+i Q_k R_n) rho(R_n, r)
//! rho(R_n, r)     = 1/(N dR) * sum_k exp(-i Q_k R_n) rho_hat(Q_k, r)
//! ```
//!
//! so `rho_hat(0, 0)` is the sector trace.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SectorLabel;

/// Below this magnitude a field is treated as vanishing at the domain edge.
pub const EDGE_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points along `R` (and `Q`).
    #[serde(rename = "n_R")]
    pub n_center: usize,
    /// Points along `r`.
    #[serde(rename = "n_r")]
    pub n_diff: usize,
    /// Half-width of the `R` domain.
    #[serde(rename = "R_extent")]
    pub center_extent: f64,
    /// Half-width of the `r` domain.
    #[serde(rename = "r_extent")]
    pub diff_extent: f64,
}

impl GridSpec {
    pub fn new(n_center: usize, n_diff: usize, center_extent: f64, diff_extent: f64) -> Result<Self> {
        let g = Self {
            n_center,
            n_diff,
            center_extent,
            diff_extent,
        };
        g.check()?;
        Ok(g)
    }

    pub fn square(n: usize, center_extent: f64, diff_extent: f64) -> Result<Self> {
        Self::new(n, n, center_extent, diff_extent)
    }

    pub fn check(&self) -> Result<()> {
        for (name, n) in [("n_R", self.n_center), ("n_r", self.n_diff)] {
            if n < 8 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be at least 8")));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even")));
            }
        }
        for (name, e) in [("R_extent", self.center_extent), ("r_extent", self.diff_extent)] {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidGrid(format!("{name} = {e} must be positive")));
            }
        }
        Ok(())
    }

    /// `dR = 2 R_extent / N_R`.
    pub fn d_center(&self) -> f64 {
        2.0 * self.center_extent / self.n_center as f64
    }

    /// `dr = 2 r_extent / N_r`.
    pub fn d_diff(&self) -> f64 {
        2.0 * self.diff_extent / self.n_diff as f64
    }

    /// `dQ = 2 pi / (N_R dR)`.
    pub fn d_wavenumber(&self) -> f64 {
        2.0 * PI / (self.n_center as f64 * self.d_center())
    }

    pub fn center(&self, i: usize) -> f64 {
        -self.center_extent + i as f64 * self.d_center()
    }

    pub fn diff(&self, j: usize) -> f64 {
        -self.diff_extent + j as f64 * self.d_diff()
    }

    /// `Q_i = (i - N_R/2) dQ`, covering the alias window `[-pi/dR, pi/dR)`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        (i as f64 - (self.n_center / 2) as f64) * self.d_wavenumber()
    }

    pub fn origin_center(&self) -> usize {
        self.n_center / 2
    }

    pub fn origin_diff(&self) -> usize {
        self.n_diff / 2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_center, self.n_diff)
    }

    /// Coordinate along axis 0 for a field in `rep`.
    pub fn axis0(&self, rep: Representation, i: usize) -> f64 {
        match rep {
            Representation::PartialFourier => self.wavenumber(i),
            Representation::CenterDifference | Representation::Position => self.center(i),
        }
    }

    /// Coordinate along axis 1 for a field in `rep`.
    pub fn axis1(&self, rep: Representation, j: usize) -> f64 {
        match rep {
            Representation::Position => self.center(j),
            _ => self.diff(j),
        }
    }

    /// Array shape of a field in `rep`. Position fields are square over
    /// `x, x'` with the `R` spacing.
    pub fn shape_for(&self, rep: Representation) -> (usize, usize) {
        match rep {
            Representation::Position => (self.n_center, self.n_center),
            _ => self.shape(),
        }
    }

    pub fn with_points(&self, n: usize) -> Result<Self> {
        Self::new(n, n, self.center_extent, self.diff_extent)
    }
}

/// Changes `(x, x')` to `(R, r) = ((x + x')/2, x - x')`.
pub fn to_center_coords(x: f64, x_prime: f64) -> (f64, f64) {
    (0.5 * (x + x_prime), x - x_prime)
}

pub fn from_center_coords(center: f64, diff: f64) -> (f64, f64) {
    (center + 0.5 * diff, center - 0.5 * diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// `(x, x')`.
    Position,
    /// `(R, r)`.
    CenterDifference,
    /// `(Q, r)`.
    PartialFourier,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::CenterDifference => "center-difference",
            Representation::PartialFourier => "partial-fourier",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Representation::Position,
            Representation::CenterDifference,
            Representation::PartialFourier,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }

    fn coordinate_names(self) -> (&'static str, &'static str) {
        match self {
            Representation::Position => ("x", "xp"),
            Representation::CenterDifference => ("R", "r"),
            Representation::PartialFourier => ("Q", "r"),
        }
    }
}

/// One spin sector of the reduced density matrix sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorField {
    pub label: SectorLabel,
    pub rep: Representation,
    pub grid: GridSpec,
    pub values: Array2<Complex64>,
}

impl SectorField {
    pub fn zeros(label: SectorLabel, rep: Representation, grid: GridSpec) -> Self {
        Self {
            label,
            rep,
            grid,
            values: Array2::zeros(grid.shape_for(rep)),
        }
    }

    /// Samples `f(axis0, axis1)` at every node.
    pub fn from_fn(
        label: SectorLabel,
        rep: Representation,
        grid: GridSpec,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let values = Array2::from_shape_fn(grid.shape_for(rep), |(i, j)| {
            f(grid.axis0(rep, i), grid.axis1(rep, j))
        });
        Self {
            label,
            rep,
            grid,
            values,
        }
    }

    pub fn expect_rep(&self, rep: Representation) -> Result<()> {
        if self.rep == rep {
            Ok(())
        } else {
            Err(Error::Representation {
                expected: rep,
                found: self.rep,
            })
        }
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| v * k);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest `|rho(R, -r) - conj(rho(R, r))|` relative to the field maximum;
    /// zero for an exactly Hermitian diagonal block in `(R, r)`.
    pub fn hermiticity_defect(&self) -> Result<f64> {
        self.expect_rep(Representation::CenterDifference)?;
        let (n0, n1) = self.values.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n0 {
            for j in 1..n1 {
                let d = self.values[[i, n1 - j]] - self.values[[i, j]].conj();
                worst = worst.max(d.norm());
            }
        }
        Ok(worst / self.max_abs().max(f64::MIN_POSITIVE))
    }

    /// A reusable off-grid sampler for this field.
    pub fn sampler(&self) -> Bicubic {
        let rep = self.rep;
        let (h0, h1) = match rep {
            Representation::PartialFourier => (self.grid.d_wavenumber(), self.grid.d_diff()),
            Representation::CenterDifference => (self.grid.d_center(), self.grid.d_diff()),
            Representation::Position => (self.grid.d_center(), self.grid.d_center()),
        };
        Bicubic::new(
            &self.values,
            self.grid.axis0(rep, 0),
            h0,
            self.grid.axis1(rep, 0),
            h1,
        )
    }
}

struct ColumnFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ColumnFft {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

fn alternating(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `(R, r) -> (Q, r)`.
pub fn forward_partial_ft(f: &SectorField) -> Result<SectorField> {
    f.expect_rep(Representation::CenterDifference)?;
    let g = f.grid;
    let n = g.n_center;
    let half = (n / 2) as i64;
    let plan = ColumnFft::new(n);
    let mut out = SectorField::zeros(f.label, Representation::PartialFourier, g);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let dr = g.d_center();
    for j in 0..g.n_diff {
        for (b, v) in buf.iter_mut().zip(f.values.column(j)) {
            *b = *v;
        }
        // exp(+2 pi i k n / N) kernel
        plan.inverse.process(&mut buf);
        for i in 0..n {
            let k = i as i64 - half;
            out.values[[i, j]] = buf[k.rem_euclid(n as i64) as usize] * (dr * alternating(k));
        }
    }
    Ok(out)
}

/// `(Q, r) -> (R, r)`.
pub fn inverse_partial_ft(f: &SectorField) -> Result<SectorField> {
    f.expect_rep(Representation::PartialFourier)?;
    let g = f.grid;
    let n = g.n_center;
    let half = (n / 2) as i64;
    let plan = ColumnFft::new(n);
    let mut out = SectorField::zeros(f.label, Representation::CenterDifference, g);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let norm = 1.0 / (n as f64 * g.d_center());
    for j in 0..g.n_diff {
        for i in 0..n {
            let k = i as i64 - half;
            buf[k.rem_euclid(n as i64) as usize] = f.values[[i, j]] * alternating(k);
        }
        plan.forward.process(&mut buf);
        for i in 0..n {
            out.values[[i, j]] = buf[i] * norm;
        }
    }
    Ok(out)
}

/// Inverse transform of the single column `r = r_j`, returning `rho(R_n, r_j)`.
pub fn inverse_column(f: &SectorField, j: usize) -> Result<Vec<Complex64>> {
    f.expect_rep(Representation::PartialFourier)?;
    let column: Vec<Complex64> = f.values.column(j).iter().copied().collect();
    inverse_lane(&column, f.grid)
}

/// Inverse transform of values sampled at the `Q_k` of `grid`.
pub fn inverse_lane(values: &[Complex64], grid: GridSpec) -> Result<Vec<Complex64>> {
    let n = grid.n_center;
    if values.len() != n {
        return Err(Error::InvalidGrid(format!("lane has {} values, grid has {n}", values.len())));
    }
    let half = (n / 2) as i64;
    let plan = ColumnFft::new(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, v) in values.iter().enumerate() {
        let k = i as i64 - half;
        buf[k.rem_euclid(n as i64) as usize] = v * alternating(k);
    }
    plan.forward.process(&mut buf);
    let norm = 1.0 / (n as f64 * grid.d_center());
    Ok(buf.into_iter().map(|v| v * norm).collect())
}

/// Converts to `(R, r)` from any representation.
pub fn to_center_difference(f: &SectorField) -> Result<SectorField> {
    match f.rep {
        Representation::CenterDifference => Ok(f.clone()),
        Representation::PartialFourier => inverse_partial_ft(f),
        Representation::Position => position_to_center(f),
    }
}

/// Converts to `(Q, r)` from any representation.
pub fn to_partial_fourier(f: &SectorField) -> Result<SectorField> {
    match f.rep {
        Representation::PartialFourier => Ok(f.clone()),
        Representation::CenterDifference => forward_partial_ft(f),
        Representation::Position => forward_partial_ft(&position_to_center(f)?),
    }
}

/// Resamples an `(R, r)` field onto the square `(x, x')` grid.
///
/// Points with `|x - x'|` beyond the `r` domain are zero when the field has
/// vanished at that edge and an error otherwise.
pub fn center_to_position(f: &SectorField) -> Result<SectorField> {
    f.expect_rep(Representation::CenterDifference)?;
    let g = f.grid;
    let s = f.sampler();
    let mut out = SectorField::zeros(f.label, Representation::Position, g);
    for i in 0..g.n_center {
        for j in 0..g.n_center {
            let (c, d) = to_center_coords(g.center(i), g.center(j));
            out.values[[i, j]] = s.sample(c, d)?;
        }
    }
    Ok(out)
}

/// Resamples an `(x, x')` field onto the `(R, r)` grid.
pub fn position_to_center(f: &SectorField) -> Result<SectorField> {
    f.expect_rep(Representation::Position)?;
    let g = f.grid;
    let s = f.sampler();
    let mut out = SectorField::zeros(f.label, Representation::CenterDifference, g);
    for i in 0..g.n_center {
        for j in 0..g.n_diff {
            let (x, xp) = from_center_coords(g.center(i), g.diff(j));
            out.values[[i, j]] = s.sample(x, xp)?;
        }
    }
    Ok(out)
}

/// Bicubic Hermite interpolation with fourth-order finite-difference slopes.
///
/// Exact at nodes and for tensor-product cubics away from the outermost two
/// rows and columns.
#[derive(Debug, Clone)]
pub struct Bicubic {
    f: Array2<Complex64>,
    fx: Array2<Complex64>,
    fy: Array2<Complex64>,
    fxy: Array2<Complex64>,
    x0: f64,
    hx: f64,
    y0: f64,
    hy: f64,
}

fn slope(values: &[Complex64], i: usize, h: f64) -> Complex64 {
    let n = values.len();
    let f = |k: usize| values[k];
    if i >= 2 && i + 2 < n {
        (f(i - 2) - f(i + 2) + (f(i + 1) - f(i - 1)) * 8.0) / (12.0 * h)
    } else if i >= 1 && i + 1 < n {
        (f(i + 1) - f(i - 1)) / (2.0 * h)
    } else if i == 0 {
        (f(1) * 4.0 - f(0) * 3.0 - f(2)) / (2.0 * h)
    } else {
        (f(n - 1) * 3.0 - f(n - 2) * 4.0 + f(n - 3)) / (2.0 * h)
    }
}

fn derivative_axis(a: &Array2<Complex64>, axis: usize, h: f64) -> Array2<Complex64> {
    let mut out = Array2::zeros(a.dim());
    let ax = ndarray::Axis(axis);
    for (lane_in, mut lane_out) in a.lanes(ax).into_iter().zip(out.lanes_mut(ax)) {
        let v: Vec<Complex64> = lane_in.iter().copied().collect();
        for (i, o) in lane_out.iter_mut().enumerate() {
            *o = slope(&v, i, h);
        }
    }
    out
}

impl Bicubic {
    pub fn new(values: &Array2<Complex64>, x0: f64, hx: f64, y0: f64, hy: f64) -> Self {
        let fx = derivative_axis(values, 0, hx);
        let fy = derivative_axis(values, 1, hy);
        let fxy = derivative_axis(&fx, 1, hy);
        Self {
            f: values.clone(),
            fx,
            fy,
            fxy,
            x0,
            hx,
            y0,
            hy,
        }
    }

    /// Interpolated value at `(x, y)`.
    ///
    /// Outside the grid, returns zero if the field at the nearest boundary
    /// node is below [`EDGE_ZERO`], else [`Error::LeftDomain`].
    pub fn sample(&self, x: f64, y: f64) -> Result<Complex64> {
        let (nx, ny) = self.f.dim();
        let u = (x - self.x0) / self.hx;
        let v = (y - self.y0) / self.hy;
        let (umax, vmax) = ((nx - 1) as f64, (ny - 1) as f64);
        if !(u >= 0.0 && u <= umax && v >= 0.0 && v <= vmax) {
            if !(u.is_finite() && v.is_finite()) {
                return Err(Error::LeftDomain { q: x, r: y });
            }
            let i = u.round().clamp(0.0, umax) as usize;
            let j = v.round().clamp(0.0, vmax) as usize;
            return if self.f[[i, j]].norm() < EDGE_ZERO {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Err(Error::LeftDomain { q: x, r: y })
            };
        }
        let i = (u.floor() as usize).min(nx - 2);
        let j = (v.floor() as usize).min(ny - 2);
        let s = u - i as f64;
        let t = v - j as f64;
        let h0 = |s: f64| [2.0 * s * s * s - 3.0 * s * s + 1.0, -2.0 * s * s * s + 3.0 * s * s];
        let h1 = |s: f64| [s * s * s - 2.0 * s * s + s, s * s * s - s * s];
        let (ax, bx) = (h0(s), h1(s));
        let (ay, by) = (h0(t), h1(t));
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                let (ii, jj) = (i + a, j + b);
                acc += self.f[[ii, jj]] * (ax[a] * ay[b])
                    + self.fx[[ii, jj]] * (self.hx * bx[a] * ay[b])
                    + self.fy[[ii, jj]] * (self.hy * ax[a] * by[b])
                    + self.fxy[[ii, jj]] * (self.hx * self.hy * bx[a] * by[b]);
            }
        }
        Ok(acc)
    }
}

/// One-shot off-grid sample of a field.
pub fn sample_offgrid(f: &SectorField, a0: f64, a1: f64) -> Result<Complex64> {
    f.sampler().sample(a0, a1)
}

/// Writes a field dump: `#` metadata lines, then `i,j,<c0>,<c1>,re,im` rows.
pub fn write_field_csv<W: Write>(
    f: &SectorField,
    time: f64,
    extra_header: &[String],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# decohere {} field dump", env!("CARGO_PKG_VERSION"))?;
    for line in extra_header {
        writeln!(w, "# {line}")?;
    }
    let g = f.grid;
    writeln!(
        w,
        "# rep={} label={} n_R={} n_r={} R_extent={} r_extent={} t={}",
        f.rep.name(),
        f.label.tag(),
        g.n_center,
        g.n_diff,
        g.center_extent,
        g.diff_extent,
        time
    )?;
    let (c0, c1) = f.rep.coordinate_names();
    writeln!(w, "i,j,{c0},{c1},re,im")?;
    let (n0, n1) = f.values.dim();
    for i in 0..n0 {
        let a0 = g.axis0(f.rep, i);
        for j in 0..n1 {
            let v = f.values[[i, j]];
            writeln!(w, "{i},{j},{a0},{},{},{}", g.axis1(f.rep, j), v.re, v.im)?;
        }
    }
    Ok(())
}

/// Parses a field dump produced by [`write_field_csv`]. Returns the field and
/// its time stamp.
pub fn read_field_csv<R: BufRead>(r: R) -> Result<(SectorField, f64)> {
    let mut meta: Option<(Representation, SectorLabel, GridSpec, f64)> = None;
    let mut body = String::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::Dump(e.to_string()))?;
        if let Some(comment) = line.strip_prefix('#') {
            if comment.trim_start().starts_with("rep=") {
                meta = Some(parse_meta(comment)?);
            }
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let (rep, label, grid, time) = meta.ok_or_else(|| Error::Dump("missing rep= header".into()))?;
    let mut field = SectorField::zeros(label, rep, grid);
    let (n0, n1) = field.values.dim();
    let mut seen = vec![false; n0 * n1];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Dump(format!("row {row}: {e}")))?;
        if rec.len() != 6 {
            return Err(Error::Dump(format!("row {row}: expected 6 columns, found {}", rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Dump(format!("row {row} column {k}: {e}")))
        };
        let idx = |k: usize| -> Result<usize> {
            rec[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Dump(format!("row {row} column {k}: {e}")))
        };
        let (i, j) = (idx(0)?, idx(1)?);
        if i >= n0 || j >= n1 {
            return Err(Error::Dump(format!("row {row}: index ({i}, {j}) out of range")));
        }
        if seen[i * n1 + j] {
            return Err(Error::Dump(format!("row {row}: duplicate node ({i}, {j})")));
        }
        seen[i * n1 + j] = true;
        field.values[[i, j]] = Complex64::new(num(4)?, num(5)?);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Dump(format!(
            "incomplete dump: {} of {} nodes present",
            seen.iter().filter(|s| **s).count(),
            n0 * n1
        )));
    }
    Ok((field, time))
}

/// Largest grid accepted from a dump, to bound allocation on hostile input.
const MAX_DUMP_POINTS: usize = 1 << 12;

fn parse_meta(line: &str) -> Result<(Representation, SectorLabel, GridSpec, f64)> {
    let mut rep = None;
    let mut label = None;
    let mut n = [None, None];
    let mut ext = [None, None];
    let mut time = 0.0;
    for kv in line.split_whitespace() {
        let Some((k, v)) = kv.split_once('=') else {
            continue;
        };
        let bad = |e: &dyn std::fmt::Display| Error::Dump(format!("{k}: {e}"));
        match k {
            "rep" => rep = Some(Representation::from_name(v).ok_or_else(|| bad(&"unknown representation"))?),
            "label" => label = Some(SectorLabel::from_tag(v).ok_or_else(|| bad(&"unknown sector"))?),
            "n_R" => n[0] = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "n_r" => n[1] = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "R_extent" => ext[0] = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "r_extent" => ext[1] = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "t" => time = v.parse::<f64>().map_err(|e| bad(&e))?,
            _ => {}
        }
    }
    let missing = |name: &str| Error::Dump(format!("header missing {name}"));
    let grid = GridSpec::new(
        n[0].ok_or_else(|| missing("n_R"))?,
        n[1].ok_or_else(|| missing("n_r"))?,
        ext[0].ok_or_else(|| missing("R_extent"))?,
        ext[1].ok_or_else(|| missing("r_extent"))?,
    )
    .map_err(|e| Error::Dump(e.to_string()))?;
    if grid.n_center > MAX_DUMP_POINTS || grid.n_diff > MAX_DUMP_POINTS {
        return Err(Error::Dump(format!(
            "grid {}x{} exceeds the {MAX_DUMP_POINTS} point limit",
            grid.n_center, grid.n_diff
        )));
    }
    Ok((
        rep.ok_or_else(|| missing("rep"))?,
        label.ok_or_else(|| missing("label"))?,
        grid,
        time,
    ))
}
