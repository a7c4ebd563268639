//! Initial apparatus states and the product spin-apparatus density matrix.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{self, GridSpec, Representation, SectorField};
use crate::params::{PhysicalParams, SectorLabel, SpinAmplitudes};

/// Initial apparatus wavefunction (or density matrix, for `CustomGrid`).
#[derive(Debug, Clone, PartialEq)]
pub enum ApparatusState {
    /// Ground-state-width Gaussian displaced to `(x0, p0)`.
    Coherent { x0: f64, p0: f64 },
    /// Gaussian with position spread `sigma`.
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    /// `|x0, p0> + exp(i phase) |-x0, -p0>`, normalized including overlap.
    Cat { x0: f64, p0: f64, phase: f64 },
    /// Oscillator eigenstate, `n <= 4`.
    Fock { n: u32 },
    /// Apparatus density matrix given directly on the grid.
    CustomGrid(SectorField),
}

/// `rho_hat(Q, r)` of `|a><b|` for two Gaussian packets of equal spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub weight: Complex64,
    /// `(x_a + x_b) / 2`.
    pub mid: f64,
    /// `(x_a - x_b) / 2`.
    pub half_sep: f64,
    /// `(p_a - p_b) / hbar`.
    pub kick: f64,
    /// `(p_a + p_b) / 2`.
    pub mean_p: f64,
    pub sigma_sq: f64,
}

impl GaussianTerm {
    fn between(xa: f64, pa: f64, xb: f64, pb: f64, sigma_sq: f64, hbar: f64, weight: Complex64) -> Self {
        Self {
            weight,
            mid: 0.5 * (xa + xb),
            half_sep: 0.5 * (xa - xb),
            kick: (pa - pb) / hbar,
            mean_p: 0.5 * (pa + pb),
            sigma_sq,
        }
    }

    fn eval(&self, q: f64, r: f64, hbar: f64) -> Complex64 {
        let k = q + self.kick;
        let u = 0.5 * r - self.half_sep;
        let re = -0.5 * self.sigma_sq * k * k - u * u / (2.0 * self.sigma_sq);
        let im = k * self.mid + self.mean_p * r / hbar;
        self.weight * Complex64::new(re, im).exp()
    }

    fn log_eval(&self, q: f64, r: f64, hbar: f64) -> Complex64 {
        let k = q + self.kick;
        let u = 0.5 * r - self.half_sep;
        let re = -0.5 * self.sigma_sq * k * k - u * u / (2.0 * self.sigma_sq);
        let im = k * self.mid + self.mean_p * r / hbar;
        self.weight.ln() + Complex64::new(re, im)
    }
}

/// Closed-form apparatus density matrix in the `(Q, r)` representation.
#[derive(Debug, Clone, PartialEq)]
pub struct QrEvaluator {
    terms: Vec<GaussianTerm>,
    hbar: f64,
}

impl QrEvaluator {
    pub fn eval(&self, q: f64, r: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(q, r, self.hbar)).sum()
    }

    /// Natural log of [`Self::eval`], finite where the value underflows.
    pub fn eval_log(&self, q: f64, r: f64) -> Complex64 {
        let logs: Vec<Complex64> = self.terms.iter().map(|t| t.log_eval(q, r, self.hbar)).collect();
        let top = logs.iter().fold(f64::NEG_INFINITY, |m, l| m.max(l.re));
        let sum: Complex64 = logs.iter().map(|l| (l - top).exp()).sum();
        sum.ln() + top
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    pub fn trace(&self) -> f64 {
        self.eval(0.0, 0.0).re
    }
}

fn ground_sigma_sq(p: &PhysicalParams) -> f64 {
    p.hbar / (2.0 * p.m * p.omega)
}

/// `rho_hat(Q, r) = exp(i Q x0 - hbar Q^2/(4 m omega) - m omega r^2/(4 hbar) + i p0 r / hbar)`.
pub fn coherent_qr(x0: f64, p0: f64, p: &PhysicalParams) -> QrEvaluator {
    gaussian_qr(x0, p0, ground_sigma_sq(p).sqrt(), p.hbar)
}

pub fn gaussian_qr(x0: f64, p0: f64, sigma: f64, hbar: f64) -> QrEvaluator {
    QrEvaluator {
        terms: vec![GaussianTerm::between(
            x0,
            p0,
            x0,
            p0,
            sigma * sigma,
            hbar,
            Complex64::new(1.0, 0.0),
        )],
        hbar,
    }
}

/// Normalized two-packet superposition; a sum of four Gaussian terms.
pub fn cat_qr(x0: f64, p0: f64, phase: f64, p: &PhysicalParams) -> Result<QrEvaluator> {
    let s2 = ground_sigma_sq(p);
    let one = Complex64::new(1.0, 0.0);
    let rel = Complex64::from_polar(1.0, phase);
    let raw = [
        GaussianTerm::between(x0, p0, x0, p0, s2, p.hbar, one),
        GaussianTerm::between(-x0, -p0, -x0, -p0, s2, p.hbar, one),
        GaussianTerm::between(-x0, -p0, x0, p0, s2, p.hbar, rel),
        GaussianTerm::between(x0, p0, -x0, -p0, s2, p.hbar, rel.conj()),
    ];
    let unnormalized = QrEvaluator {
        terms: raw.to_vec(),
        hbar: p.hbar,
    };
    let norm = unnormalized.trace();
    if !(norm > 1e-12) {
        return Err(Error::InvalidState(format!(
            "cat state has vanishing norm {norm:e} (destructive overlap)"
        )));
    }
    Ok(QrEvaluator {
        terms: raw
            .iter()
            .map(|t| GaussianTerm {
                weight: t.weight / norm,
                ..*t
            })
            .collect(),
        hbar: p.hbar,
    })
}

/// Oscillator eigenfunction `phi_n(x)` for `n <= 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockWavefunction {
    n: u32,
    inv_len: f64,
    prefactor: f64,
}

pub const MAX_FOCK: u32 = 4;

pub fn fock_position(n: u32, p: &PhysicalParams) -> Result<FockWavefunction> {
    if n > MAX_FOCK {
        return Err(Error::InvalidState(format!(
            "Fock level {n} not supported (maximum {MAX_FOCK})"
        )));
    }
    let inv_len = (p.m * p.omega / p.hbar).sqrt();
    let factorial: f64 = (1..=n).map(f64::from).product();
    let prefactor = (inv_len * inv_len / PI).powf(0.25) / (2f64.powi(n as i32) * factorial).sqrt();
    Ok(FockWavefunction {
        n,
        inv_len,
        prefactor,
    })
}

impl FockWavefunction {
    pub fn eval(&self, x: f64) -> f64 {
        let xi = x * self.inv_len;
        let h = match self.n {
            0 => 1.0,
            1 => 2.0 * xi,
            2 => 4.0 * xi * xi - 2.0,
            3 => 8.0 * xi.powi(3) - 12.0 * xi,
            _ => 16.0 * xi.powi(4) - 48.0 * xi * xi + 12.0,
        };
        self.prefactor * h * (-0.5 * xi * xi).exp()
    }
}

/// Normalized Gaussian wavepacket `(2 pi s^2)^(-1/4) exp(-(x-x0)^2/(4 s^2) + i p0 x / hbar)`.
pub fn gaussian_wavefunction(x: f64, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Complex64 {
    let amp = (2.0 * PI * sigma * sigma).powf(-0.25) * (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
    Complex64::from_polar(amp, p0 * x / hbar)
}

impl ApparatusState {
    /// Closed-form `(Q, r)` evaluator for the Gaussian family.
    pub fn qr_evaluator(&self, p: &PhysicalParams) -> Result<Option<QrEvaluator>> {
        Ok(match *self {
            ApparatusState::Coherent { x0, p0 } => Some(coherent_qr(x0, p0, p)),
            ApparatusState::Gaussian { x0, p0, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidState(format!("Gaussian width {sigma} must be positive")));
                }
                Some(gaussian_qr(x0, p0, sigma, p.hbar))
            }
            ApparatusState::Cat { x0, p0, phase } => Some(cat_qr(x0, p0, phase, p)?),
            ApparatusState::Fock { .. } | ApparatusState::CustomGrid(_) => None,
        })
    }

    /// Position-space wavefunction, for the pure states.
    pub fn wavefunction(&self, p: &PhysicalParams) -> Result<Option<Box<dyn Fn(f64) -> Complex64>>> {
        let hbar = p.hbar;
        let s0 = ground_sigma_sq(p).sqrt();
        Ok(match *self {
            ApparatusState::Coherent { x0, p0 } => {
                Some(Box::new(move |x| gaussian_wavefunction(x, x0, p0, s0, hbar)))
            }
            ApparatusState::Gaussian { x0, p0, sigma } => {
                Some(Box::new(move |x| gaussian_wavefunction(x, x0, p0, sigma, hbar)))
            }
            ApparatusState::Cat { x0, p0, phase } => {
                let norm = cat_qr(x0, p0, phase, p)?.terms()[0].weight.re.sqrt();
                let rel = Complex64::from_polar(1.0, phase);
                Some(Box::new(move |x| {
                    (gaussian_wavefunction(x, x0, p0, s0, hbar)
                        + rel * gaussian_wavefunction(x, -x0, -p0, s0, hbar))
                        * norm
                }))
            }
            ApparatusState::Fock { n } => {
                let phi = fock_position(n, p)?;
                Some(Box::new(move |x| Complex64::new(phi.eval(x), 0.0)))
            }
            ApparatusState::CustomGrid(_) => None,
        })
    }

    /// Apparatus density matrix on `grid` in the `(Q, r)` representation.
    pub fn qr_field(&self, grid: GridSpec, p: &PhysicalParams) -> Result<SectorField> {
        if let Some(ev) = self.qr_evaluator(p)? {
            return Ok(SectorField::from_fn(
                SectorLabel::UpUp,
                Representation::PartialFourier,
                grid,
                |q, r| ev.eval(q, r),
            ));
        }
        if let ApparatusState::CustomGrid(f) = self {
            if f.grid != grid {
                return Err(Error::InvalidState("custom grid does not match the working grid".into()));
            }
            return grids::to_partial_fourier(f);
        }
        let psi = self
            .wavefunction(p)?
            .expect("every non-custom state has a wavefunction");
        let rho = SectorField::from_fn(SectorLabel::UpUp, Representation::CenterDifference, grid, |c, d| {
            let (x, xp) = grids::from_center_coords(c, d);
            psi(x) * psi(xp).conj()
        });
        grids::forward_partial_ft(&rho)
    }
}

/// Full spin-apparatus reduced density matrix on a grid.
///
/// Each sector holds its spin weight (`|a|^2`, `a b*`, `a* b`, `|b|^2`)
/// times the apparatus block, so the total trace is the sum of the diagonal
/// sectors at the origin of `(Q, r)`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub sectors: [SectorField; 4],
    pub amps: SpinAmplitudes,
    pub time: f64,
    /// Closed form of the initial apparatus block, when one exists.
    pub apparatus: Option<Arc<QrEvaluator>>,
}

impl DensityMatrix {
    pub fn sector(&self, label: SectorLabel) -> &SectorField {
        &self.sectors[label.index()]
    }

    pub fn sector_mut(&mut self, label: SectorLabel) -> &mut SectorField {
        &mut self.sectors[label.index()]
    }

    pub fn grid(&self) -> GridSpec {
        self.sectors[0].grid
    }

    pub fn rep(&self) -> Representation {
        self.sectors[0].rep
    }

    /// Same state with every sector converted to `(R, r)`.
    pub fn to_center_difference(&self) -> Result<DensityMatrix> {
        let mut out = self.clone();
        for s in out.sectors.iter_mut() {
            *s = grids::to_center_difference(s)?;
        }
        Ok(out)
    }

    pub fn to_partial_fourier(&self) -> Result<DensityMatrix> {
        let mut out = self.clone();
        for s in out.sectors.iter_mut() {
            *s = grids::to_partial_fourier(s)?;
        }
        Ok(out)
    }

    /// Builds a state from an apparatus block in `(Q, r)` and spin weights.
    pub fn from_apparatus(
        block: &SectorField,
        amps: SpinAmplitudes,
        time: f64,
        apparatus: Option<Arc<QrEvaluator>>,
    ) -> DensityMatrix {
        let sectors = SectorLabel::ALL.map(|s| {
            let mut f = block.scaled(amps.weight(s));
            f.label = s;
            f
        });
        DensityMatrix {
            sectors,
            amps,
            time,
            apparatus,
        }
    }
}

/// Product state `phi (x) (a|up> + b|down>)` at `t = 0` in `(Q, r)`.
pub fn assemble_initial(
    state: &ApparatusState,
    amps: SpinAmplitudes,
    grid: GridSpec,
    p: &PhysicalParams,
) -> Result<DensityMatrix> {
    let block = state.qr_field(grid, p)?;
    let trace = block.values[[grid.origin_center(), grid.origin_diff()]].re;
    if !((trace - 1.0).abs() <= 1e-8) {
        return Err(Error::NotNormalized { trace });
    }
    let evaluator = state.qr_evaluator(p)?.map(Arc::new);
    Ok(DensityMatrix::from_apparatus(&block, amps, 0.0, evaluator))
}
