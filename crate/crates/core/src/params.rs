//! Model constants, their validation, and every derived quantity used by the
//! closed-form propagator and the decoherence-time predictions.
//!
//! The apparatus is an oscillator of mass `m` and frequency `omega`, coupled
//! to the spin through `epsilon * x * sigma_z` and to an ohmic bath that enters
//! only through the relaxation rate `gamma` and the diffusion coefficient `D`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal state of the bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Bath {
    /// `D = 4 m gamma omega hbar`.
    ZeroTemperature,
    /// `D = 8 m gamma kB T`; the bath is described by the product `kB T`.
    HighTemperature {
        #[serde(rename = "kBT")]
        kbt: f64,
    },
    /// Full Bose occupancy at temperature `T`.
    General {
        #[serde(rename = "T")]
        temperature: f64,
    },
}

impl Bath {
    pub fn name(&self) -> &'static str {
        match self {
            Bath::ZeroTemperature => "zero-temperature",
            Bath::HighTemperature { .. } => "high-temperature",
            Bath::General { .. } => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub omega: f64,
    /// Spin splitting coefficient of `lambda * sigma_z`.
    pub lambda_spin: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub bath: Bath,
    pub hbar: f64,
    #[serde(rename = "kB")]
    pub kb: f64,
}

impl PhysicalParams {
    /// `hbar = m = omega = kB = 1` with the given damping, coupling and bath.
    pub fn natural(gamma: f64, epsilon: f64, lambda_spin: f64, bath: Bath) -> Self {
        Self {
            m: 1.0,
            omega: 1.0,
            lambda_spin,
            epsilon,
            gamma,
            bath,
            hbar: 1.0,
            kb: 1.0,
        }
    }

    /// The reference set used throughout the tests: `gamma = 2`,
    /// `epsilon = 0.5`, `lambda = 0.3`, zero-temperature bath.
    pub fn reference() -> Self {
        Self::natural(2.0, 0.5, 0.3, Bath::ZeroTemperature)
    }

    pub fn with_bath(mut self, bath: Bath) -> Self {
        self.bath = bath;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn is_overdamped(&self) -> bool {
        self.gamma > self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub field: &'static str,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Validation {
    pub issues: Vec<Issue>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    fn push(&mut self, field: &'static str, severity: Severity, message: impl Into<String>) {
        self.issues.push(Issue {
            field,
            severity,
            message: message.into(),
        });
    }
}

/// Checks every parameter invariant and reports all violations at once.
pub fn validate(p: &PhysicalParams) -> Validation {
    let mut v = Validation::default();
    let positive = [
        ("m", p.m, "mass must be positive"),
        ("omega", p.omega, "frequency must be positive"),
        ("hbar", p.hbar, "hbar must be positive"),
        ("kB", p.kb, "Boltzmann constant must be positive"),
    ];
    for (field, value, msg) in positive {
        if !(value > 0.0 && value.is_finite()) {
            v.push(field, Severity::Error, msg);
        }
    }
    if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
        v.push("gamma", Severity::Error, "relaxation rate must be non-negative");
    }
    for (field, value) in [("epsilon", p.epsilon), ("lambda_spin", p.lambda_spin)] {
        if !value.is_finite() {
            v.push(field, Severity::Error, format!("{field} must be finite"));
        }
    }
    match p.bath {
        Bath::ZeroTemperature => {}
        Bath::HighTemperature { kbt } => {
            if !(kbt >= 0.0 && kbt.is_finite()) {
                v.push("bath.kBT", Severity::Error, "bath temperature must be non-negative");
            }
        }
        Bath::General { temperature } => {
            if !(temperature >= 0.0 && temperature.is_finite()) {
                v.push("bath.T", Severity::Error, "bath temperature must be non-negative");
            }
        }
    }
    if p.gamma.is_finite() && p.omega > 0.0 && p.gamma <= p.omega {
        v.push(
            "gamma",
            Severity::Warning,
            "underdamped: long-time pointer assertions disabled",
        );
    }
    v
}

/// Every constant derived from [`PhysicalParams`].
///
/// `lambda_plus`/`lambda_minus` are the two characteristic lengths of the
/// transport flow in `(Q, r)`; they become a complex-conjugate pair when the
/// apparatus is underdamped. `rate_plus`/`rate_minus` are the matching decay
/// rates `hbar / (m lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub params: PhysicalParams,
    pub diffusion: f64,
    pub nbar: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub gamma_char: Complex64,
    pub rate_plus: Complex64,
    pub rate_minus: Complex64,
    pub tau_r: f64,
    pub tau_d: f64,
    pub alpha_sq: f64,
    pub delta_sep: f64,
    pub lambda_db: Option<f64>,
}

/// Mean thermal occupancy of the apparatus mode at temperature `kB T`.
pub fn thermal_occupancy(hbar_omega: f64, kbt: f64) -> f64 {
    if kbt <= 0.0 {
        0.0
    } else {
        1.0 / (hbar_omega / kbt).exp_m1()
    }
}

pub fn derive_constants(p: &PhysicalParams) -> Result<DerivedConstants> {
    let validation = validate(p);
    if let Some(issue) = validation.errors().next() {
        return Err(Error::InvalidParams(format!("{}: {}", issue.field, issue.message)));
    }
    if p.gamma == 0.0 {
        return Err(Error::Dissipationless);
    }
    let PhysicalParams {
        m,
        omega,
        epsilon,
        gamma,
        hbar,
        kb,
        ..
    } = *p;
    let hw = hbar * omega;

    let (diffusion, nbar, lambda_db) = match p.bath {
        Bath::ZeroTemperature => (4.0 * m * gamma * omega * hbar, 0.0, None),
        Bath::HighTemperature { kbt } => (
            8.0 * m * gamma * kbt,
            thermal_occupancy(hw, kbt),
            Some(hbar / (2.0 * m * kbt).sqrt()),
        ),
        Bath::General { temperature } => {
            let nbar = thermal_occupancy(hw, kb * temperature);
            (8.0 * m * gamma * hw * (nbar + 0.5), nbar, None)
        }
    };

    let root = Complex64::new(gamma * gamma - omega * omega, 0.0).sqrt();
    if root.norm() <= 1e-9 * gamma.max(omega) {
        return Err(Error::CriticalDamping);
    }
    let scale = hbar / (m * omega * omega);
    let lambda_plus = (gamma + root) * scale;
    // product form avoids the cancellation in gamma - sqrt(gamma^2 - omega^2)
    let lambda_minus = hbar * hbar / (m * m * omega * omega) / lambda_plus;
    let gamma_char = lambda_plus * lambda_minus / (lambda_plus - lambda_minus);
    let rate_plus = hbar / (m * lambda_plus);
    let rate_minus = hbar / (m * lambda_minus);

    let tau_d = hbar * hbar * m * m * omega.powi(4) / (diffusion * epsilon * epsilon);
    Ok(DerivedConstants {
        params: *p,
        diffusion,
        nbar,
        lambda_plus,
        lambda_minus,
        gamma_char,
        rate_plus,
        rate_minus,
        tau_r: 1.0 / gamma,
        tau_d,
        alpha_sq: epsilon * epsilon / (2.0 * m * omega.powi(3) * hbar),
        delta_sep: 2.0 * epsilon / (m * omega * omega),
        lambda_db,
    })
}

impl DerivedConstants {
    /// Distance of each pointer centre from the origin, `epsilon / (m omega^2)`.
    pub fn pointer_offset(&self) -> f64 {
        let p = &self.params;
        p.epsilon / (p.m * p.omega * p.omega)
    }

    /// `tau_D / (tau_R / (2 |alpha|^2))`. The closed-form decay rate gives
    /// `1/4` at zero temperature where the `tau_R / (2|alpha|^2)` shorthand
    /// would suggest `1`.
    pub fn tau_d_over_alpha_form(&self) -> f64 {
        self.tau_d / (self.tau_r / (2.0 * self.alpha_sq))
    }

    /// `tau_R (lambda_dB / Delta)^2`, defined for the high-temperature bath.
    pub fn tau_d_de_broglie_form(&self) -> Option<f64> {
        self.lambda_db
            .map(|ld| self.tau_r * (ld / self.delta_sep).powi(2))
    }

    /// Slowest relaxation rate of the characteristic flow (real part).
    ///
    /// Transients in backtraces and log-factors die out like
    /// `exp(-slowest_rate * t)`.
    pub fn slowest_rate(&self) -> f64 {
        self.rate_plus
            .re
            .min(self.rate_minus.re)
            .min(2.0 * self.params.gamma)
    }

    /// Position variance `D / (8 m^2 omega^2 gamma)` of the long-time pointers.
    pub fn pointer_position_variance(&self) -> f64 {
        let p = &self.params;
        self.diffusion / (8.0 * p.m * p.m * p.omega * p.omega * p.gamma)
    }

    /// Second moment along `r` of `|rho(R, r)|^2` for the long-time pointers,
    /// `4 hbar^2 gamma / D`.
    pub fn pointer_r_variance(&self) -> f64 {
        let p = &self.params;
        4.0 * p.hbar * p.hbar * p.gamma / self.diffusion
    }
}

/// Spin amplitudes `a |up> + b |down>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinAmplitudes {
    pub a: Complex64,
    pub b: Complex64,
}

impl SpinAmplitudes {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAmplitudes(format!(
                "|a|^2 + |b|^2 = {norm}, expected 1"
            )));
        }
        Ok(Self { a, b })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidAmplitudes("zero or non-finite amplitudes".into()));
        }
        Ok(Self {
            a: a / norm,
            b: b / norm,
        })
    }

    /// `(|up> + |down>) / sqrt(2)`.
    pub fn balanced() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            a: Complex64::new(h, 0.0),
            b: Complex64::new(h, 0.0),
        }
    }

    /// Coefficient multiplying the apparatus density matrix in `sector`.
    pub fn weight(&self, sector: SectorLabel) -> Complex64 {
        match sector {
            SectorLabel::UpUp => Complex64::new(self.a.norm_sqr(), 0.0),
            SectorLabel::DownDown => Complex64::new(self.b.norm_sqr(), 0.0),
            SectorLabel::UpDown => self.a * self.b.conj(),
            SectorLabel::DownUp => self.a.conj() * self.b,
        }
    }
}

/// One spin-space block `(s, s')` of the reduced density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorLabel {
    UpUp,
    UpDown,
    DownUp,
    DownDown,
}

impl SectorLabel {
    pub const ALL: [SectorLabel; 4] = [
        SectorLabel::UpUp,
        SectorLabel::UpDown,
        SectorLabel::DownUp,
        SectorLabel::DownDown,
    ];

    pub fn is_diagonal(self) -> bool {
        matches!(self, SectorLabel::UpUp | SectorLabel::DownDown)
    }

    /// Sign `sigma` multiplying `epsilon` and `lambda` in this sector's
    /// transport equation.
    ///
    /// Diagonal: `d/dt rho = v.grad rho - D r^2/(4 hbar^2) rho + i sigma eps r / hbar rho`.
    /// Off-diagonal: the `Q` velocity carries `+ 2 sigma eps / hbar` and the
    /// source `+ 2 i sigma lambda / hbar`.
    ///
    /// The binding follows `-(i/hbar)[H, rho]` for `H = ... + (lambda + eps x) sigma_z`,
    /// which puts the up-spin pointer at `x = -eps / (m omega^2)`.
    pub fn branch(self) -> f64 {
        match self {
            SectorLabel::UpUp | SectorLabel::UpDown => -1.0,
            SectorLabel::DownUp | SectorLabel::DownDown => 1.0,
        }
    }

    /// The sector holding the Hermitian-conjugate block.
    pub fn partner(self) -> SectorLabel {
        match self {
            SectorLabel::UpDown => SectorLabel::DownUp,
            SectorLabel::DownUp => SectorLabel::UpDown,
            s => s,
        }
    }

    pub fn index(self) -> usize {
        match self {
            SectorLabel::UpUp => 0,
            SectorLabel::UpDown => 1,
            SectorLabel::DownUp => 2,
            SectorLabel::DownDown => 3,
        }
    }

    /// Short tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            SectorLabel::UpUp => "uu",
            SectorLabel::UpDown => "ud",
            SectorLabel::DownUp => "du",
            SectorLabel::DownDown => "dd",
        }
    }

    pub fn from_tag(tag: &str) -> Option<SectorLabel> {
        SectorLabel::ALL.into_iter().find(|s| s.tag() == tag)
    }
}
