//! Exact solution of the sector transport equations.
//!
//! In `(Q, r)` every sector obeys `d/dt rho = v . grad rho + S rho` with
//!
//! ```text
//! v_r = hbar Q / m - 2 gamma r
//! v_Q = -(m omega^2 / hbar) r + [off-diagonal] 2 sigma eps / hbar
//! S   = -D r^2 / (4 hbar^2) + i sigma eps r / hbar      (diagonal)
//! S   = -D r^2 / (4 hbar^2) + 2 i sigma lambda / hbar   (off-diagonal)
//! ```
//!
//! where `sigma` is [`SectorLabel::branch`]. The value at `(Q, r, t)` is the
//! initial field at the point reached by following `v` for a time `t`, times
//! the exponential of `S` integrated along the way. The flow is linear with
//! fixed point `(Q*, r*)` and decays along the two invariant combinations
//! `A_pm = (Q - Q*) - (r - r*) / lambda_pm` at rates `hbar / (m lambda_pm)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{self, GridSpec, Representation, SectorField};
use crate::params::{Bath, DerivedConstants, SectorLabel, SpinAmplitudes};
use crate::states::{coherent_qr, DensityMatrix, QrEvaluator};

/// Source point and accumulated exponent of one characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicImage {
    pub q_src: f64,
    pub r_src: f64,
    pub log_factor: Complex64,
}

/// `(1 - exp(-k t)) / k`, continuous through `k t -> 0`.
fn relaxed(k: Complex64, t: f64) -> Complex64 {
    let x = k * t;
    if x.norm() < 1e-3 {
        t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        (1.0 - (-x).exp()) / k
    }
}

/// Fixed point `(Q*, r*)` of the flow: `(4 sigma eps gamma/(hbar omega^2), 2 sigma eps/(m omega^2))`
/// off the diagonal, the origin on it.
pub fn fixed_point(sector: SectorLabel, dc: &DerivedConstants) -> (f64, f64) {
    if sector.is_diagonal() {
        return (0.0, 0.0);
    }
    let p = &dc.params;
    let s = sector.branch();
    (
        4.0 * s * p.epsilon * p.gamma / (p.hbar * p.omega * p.omega),
        2.0 * s * p.epsilon / (p.m * p.omega * p.omega),
    )
}

struct Modes {
    a_plus: Complex64,
    a_minus: Complex64,
}

impl Modes {
    fn new(dq: f64, dr: f64, dc: &DerivedConstants) -> Self {
        Self {
            a_plus: dq - dr / dc.lambda_plus,
            a_minus: dq - dr / dc.lambda_minus,
        }
    }

    /// Offsets from the fixed point after following the flow for `t`.
    fn advance(&self, t: f64, dc: &DerivedConstants) -> (f64, f64) {
        let cp = self.a_plus * (-dc.rate_plus * t).exp();
        let cm = self.a_minus * (-dc.rate_minus * t).exp();
        let dq = (cp * dc.lambda_plus - cm * dc.lambda_minus) / (dc.lambda_plus - dc.lambda_minus);
        let dr = dc.gamma_char * (cp - cm);
        (dq.re, dr.re)
    }

    /// `int_0^t (r - r*) ds` and `int_0^t (r - r*)^2 ds` along the flow.
    fn r_integrals(&self, t: f64, dc: &DerivedConstants) -> (f64, f64) {
        let (kp, km) = (dc.rate_plus, dc.rate_minus);
        let (ap, am) = (self.a_plus, self.a_minus);
        let g = dc.gamma_char;
        let i1 = g * (ap * relaxed(kp, t) - am * relaxed(km, t));
        let i2 = g * g
            * (ap * ap * relaxed(2.0 * kp, t) - 2.0 * ap * am * relaxed(kp + km, t)
                + am * am * relaxed(2.0 * km, t));
        (i1.re, i2.re)
    }
}

/// Source point and log-factor for any sector.
pub fn characteristic_image(q: f64, r: f64, t: f64, sector: SectorLabel, dc: &DerivedConstants) -> CharacteristicImage {
    if t == 0.0 {
        return CharacteristicImage {
            q_src: q,
            r_src: r,
            log_factor: Complex64::new(0.0, 0.0),
        };
    }
    let p = &dc.params;
    let (qs, rs) = fixed_point(sector, dc);
    let modes = Modes::new(q - qs, r - rs, dc);
    let (dq, dr) = modes.advance(t, dc);
    let sigma = sector.branch();
    let damping = dc.diffusion / (4.0 * p.hbar * p.hbar);
    let needed = dc.diffusion != 0.0 || (sector.is_diagonal() && p.epsilon != 0.0);
    let (i1, i2) = if needed { modes.r_integrals(t, dc) } else { (0.0, 0.0) };
    let log_factor = if sector.is_diagonal() {
        Complex64::new(-damping * i2, sigma * p.epsilon / p.hbar * i1)
    } else {
        let r_sq = rs * rs * t + 2.0 * rs * i1 + i2;
        Complex64::new(-damping * r_sq, 2.0 * sigma * p.lambda_spin * t / p.hbar)
    };
    CharacteristicImage {
        q_src: qs + dq,
        r_src: rs + dr,
        log_factor,
    }
}

fn require_offdiag(sector: SectorLabel) -> Result<()> {
    if sector.is_diagonal() {
        Err(Error::WrongSector {
            expected: "off-diagonal",
            found: sector.tag(),
        })
    } else {
        Ok(())
    }
}

fn require_diag(sector: SectorLabel) -> Result<()> {
    if sector.is_diagonal() {
        Ok(())
    } else {
        Err(Error::WrongSector {
            expected: "diagonal",
            found: sector.tag(),
        })
    }
}

pub fn backtrace_offdiag(q: f64, r: f64, t: f64, sector: SectorLabel, dc: &DerivedConstants) -> Result<(f64, f64)> {
    require_offdiag(sector)?;
    let img = characteristic_image(q, r, t, sector, dc);
    Ok((img.q_src, img.r_src))
}

/// Both diagonal sectors share the same flow.
pub fn backtrace_diag(q: f64, r: f64, t: f64, dc: &DerivedConstants) -> (f64, f64) {
    let img = characteristic_image(q, r, t, SectorLabel::UpUp, dc);
    (img.q_src, img.r_src)
}

/// `-eps^2 t D/(hbar^2 m^2 omega^4)` plus transient damping, plus the `2 sigma lambda t/hbar` phase.
pub fn offdiag_log_factor(q: f64, r: f64, t: f64, sector: SectorLabel, dc: &DerivedConstants) -> Result<Complex64> {
    require_offdiag(sector)?;
    Ok(characteristic_image(q, r, t, sector, dc).log_factor)
}

pub fn diag_log_factor(q: f64, r: f64, t: f64, sector: SectorLabel, dc: &DerivedConstants) -> Result<Complex64> {
    require_diag(sector)?;
    Ok(characteristic_image(q, r, t, sector, dc).log_factor)
}

/// Evolved value of one sector whose initial block is `weight * ev`.
pub fn evolve_point(
    ev: &QrEvaluator,
    weight: Complex64,
    q: f64,
    r: f64,
    t: f64,
    sector: SectorLabel,
    dc: &DerivedConstants,
) -> Complex64 {
    if weight == Complex64::new(0.0, 0.0) {
        return weight;
    }
    let img = characteristic_image(q, r, t, sector, dc);
    ev.eval(img.q_src, img.r_src) * weight * img.log_factor.exp()
}

/// Natural log of [`evolve_point`], for times where the value underflows.
pub fn evolve_log_point(
    ev: &QrEvaluator,
    weight: Complex64,
    q: f64,
    r: f64,
    t: f64,
    sector: SectorLabel,
    dc: &DerivedConstants,
) -> Complex64 {
    let img = characteristic_image(q, r, t, sector, dc);
    weight.ln() + ev.eval_log(img.q_src, img.r_src) + img.log_factor
}

/// Evolves every sector of a `t = 0` state to time `t`.
///
/// With a closed-form apparatus block the initial data is evaluated exactly
/// at each source point; otherwise the gridded sector is sampled bicubically.
pub fn propagate(rho0: &DensityMatrix, t: f64, dc: &DerivedConstants) -> Result<DensityMatrix> {
    rho0.sectors
        .iter()
        .try_for_each(|s| s.expect_rep(Representation::PartialFourier))?;
    if rho0.time != 0.0 {
        return Err(Error::InvalidRun(format!(
            "propagation starts from t = 0, state is at t = {}",
            rho0.time
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidRun(format!("time {t} must be finite and non-negative")));
    }
    let mut out = rho0.clone();
    out.time = t;
    if t == 0.0 {
        return Ok(out);
    }
    let grid = rho0.grid();
    for sector in SectorLabel::ALL {
        let field = &mut out.sectors[sector.index()];
        if let Some(ev) = rho0.apparatus.as_deref() {
            let w = rho0.amps.weight(sector);
            *field = SectorField::from_fn(sector, Representation::PartialFourier, grid, |q, r| {
                evolve_point(ev, w, q, r, t, sector, dc)
            });
        } else {
            let src = rho0.sector(sector);
            if src.values.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            let sampler = src.sampler();
            for ((i, j), v) in field.values.indexed_iter_mut() {
                let img = characteristic_image(grid.wavenumber(i), grid.diff(j), t, sector, dc);
                *v = sampler.sample(img.q_src, img.r_src)? * img.log_factor.exp();
            }
        }
    }
    Ok(out)
}

fn require_overdamped(dc: &DerivedConstants) -> Result<()> {
    let p = &dc.params;
    if p.gamma > p.omega {
        Ok(())
    } else {
        Err(Error::Underdamped {
            gamma: p.gamma,
            omega: p.omega,
        })
    }
}

/// Long-time pointer block `exp(-a Q^2 - b r^2 + i c Q)`, unit trace.
///
/// In `(R, r)` this is `exp(-(R - c)^2 / (4a) - b r^2) / sqrt(4 pi a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerGaussian {
    pub label: SectorLabel,
    pub center: f64,
    pub q_coeff: f64,
    pub r_coeff: f64,
}

impl PointerGaussian {
    pub fn eval_qr(&self, q: f64, r: f64) -> Complex64 {
        Complex64::new(-self.q_coeff * q * q - self.r_coeff * r * r, self.center * q).exp()
    }

    pub fn eval_center_difference(&self, c: f64, r: f64) -> Complex64 {
        let a = self.q_coeff;
        let g = (-(c - self.center).powi(2) / (4.0 * a) - self.r_coeff * r * r).exp();
        Complex64::new(g / (4.0 * std::f64::consts::PI * a).sqrt(), 0.0)
    }

    pub fn position_variance(&self) -> f64 {
        2.0 * self.q_coeff
    }

    /// Second moment along `r` of `|rho(R, r)|^2`.
    pub fn r_variance(&self) -> f64 {
        0.25 / self.r_coeff
    }

    pub fn field(&self, grid: GridSpec, rep: Representation, weight: f64) -> SectorField {
        match rep {
            Representation::PartialFourier => {
                SectorField::from_fn(self.label, rep, grid, |q, r| self.eval_qr(q, r) * weight)
            }
            Representation::CenterDifference => {
                SectorField::from_fn(self.label, rep, grid, |c, r| self.eval_center_difference(c, r) * weight)
            }
            Representation::Position => SectorField::from_fn(self.label, rep, grid, |x, xp| {
                let (c, r) = grids::to_center_coords(x, xp);
                self.eval_center_difference(c, r) * weight
            }),
        }
    }
}

/// Limit of a diagonal sector as `t -> infinity` for `gamma > omega`.
///
/// `a = D/(16 m^2 omega^2 gamma)`, `b = D/(16 hbar^2 gamma)`, centred at
/// `sigma eps/(m omega^2)`: the up pointer sits at `-eps/(m omega^2)`.
pub fn long_time_sector(dc: &DerivedConstants, sector: SectorLabel) -> Result<PointerGaussian> {
    require_overdamped(dc)?;
    require_diag(sector)?;
    let p = &dc.params;
    Ok(PointerGaussian {
        label: sector,
        center: sector.branch() * dc.pointer_offset(),
        q_coeff: dc.diffusion / (16.0 * p.m * p.m * p.omega * p.omega * p.gamma),
        r_coeff: dc.diffusion / (16.0 * p.hbar * p.hbar * p.gamma),
    })
}

/// Coherent pointer of a zero-temperature bath.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTemperaturePointer {
    pub label: SectorLabel,
    /// Position of the coherent state; its momentum is zero.
    pub x0: f64,
    pub state: QrEvaluator,
    pub alpha_sq: f64,
}

pub fn zero_t_pointer(dc: &DerivedConstants, sector: SectorLabel) -> Result<ZeroTemperaturePointer> {
    if dc.params.bath != Bath::ZeroTemperature {
        return Err(Error::WrongBath {
            expected: "zero-temperature",
        });
    }
    require_overdamped(dc)?;
    require_diag(sector)?;
    let x0 = sector.branch() * dc.pointer_offset();
    Ok(ZeroTemperaturePointer {
        label: sector,
        x0,
        state: coherent_qr(x0, 0.0, &dc.params),
        alpha_sq: dc.alpha_sq,
    })
}

/// Thermal pointer: position variance `kB T/(m omega^2)`, `r` variance
/// `hbar^2/(2 m kB T)`.
pub fn high_t_pointer(dc: &DerivedConstants, sector: SectorLabel) -> Result<PointerGaussian> {
    let Bath::HighTemperature { kbt } = dc.params.bath else {
        return Err(Error::WrongBath {
            expected: "high-temperature",
        });
    };
    require_overdamped(dc)?;
    require_diag(sector)?;
    let p = &dc.params;
    Ok(PointerGaussian {
        label: sector,
        center: sector.branch() * dc.pointer_offset(),
        q_coeff: kbt / (2.0 * p.m * p.omega * p.omega),
        r_coeff: p.m * kbt / (2.0 * p.hbar * p.hbar),
    })
}

/// Fully decohered state: `|a|^2` and `|b|^2` times the long-time pointers,
/// zero off the diagonal. Returned in `(Q, r)`.
pub fn final_mixture(amps: SpinAmplitudes, dc: &DerivedConstants, grid: GridSpec) -> Result<DensityMatrix> {
    let rep = Representation::PartialFourier;
    let mut sectors = SectorLabel::ALL.map(|s| SectorField::zeros(s, rep, grid));
    for s in [SectorLabel::UpUp, SectorLabel::DownDown] {
        let w = amps.weight(s).re;
        if w != 0.0 {
            sectors[s.index()] = long_time_sector(dc, s)?.field(grid, rep, w);
        } else {
            // still enforce the regime gate
            long_time_sector(dc, s)?;
        }
    }
    Ok(DensityMatrix {
        sectors,
        amps,
        time: f64::INFINITY,
        apparatus: None::<Arc<QrEvaluator>>,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_constants, PhysicalParams};
    use crate::states::{assemble_initial, ApparatusState};

    fn dc() -> DerivedConstants {
        derive_constants(&PhysicalParams::reference()).unwrap()
    }

    fn underdamped() -> DerivedConstants {
        derive_constants(&PhysicalParams::reference().with_gamma(0.5)).unwrap()
    }

    #[test]
    fn identity_at_zero_time() {
        for s in SectorLabel::ALL {
            let img = characteristic_image(0.7, -1.3, 0.0, s, &dc());
            assert_eq!((img.q_src, img.r_src), (0.7, -1.3));
            assert_eq!(img.log_factor, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn long_time_fixed_points() {
        let dc = dc();
        let (q, r) = backtrace_offdiag(1.0, 2.0, 200.0, SectorLabel::UpDown, &dc).unwrap();
        assert!((q + 4.0).abs() < 1e-12 && (r + 1.0).abs() < 1e-12);
        let (q, r) = backtrace_offdiag(-3.0, 0.5, 200.0, SectorLabel::DownUp, &dc).unwrap();
        assert!((q - 4.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_kinds_are_checked() {
        assert!(backtrace_offdiag(0.0, 0.0, 1.0, SectorLabel::UpUp, &dc()).is_err());
        assert!(diag_log_factor(0.0, 0.0, 1.0, SectorLabel::UpDown, &dc()).is_err());
    }

    #[test]
    fn diagonal_flow_is_offdiagonal_flow_without_coupling() {
        let mut p = PhysicalParams::reference();
        p.epsilon = 0.0;
        let d0 = derive_constants(&p).unwrap();
        for (q, r, t) in [(0.3, 1.0, 0.2), (-2.0, 0.4, 1.7), (1.0, -3.0, 5.0)] {
            let a = backtrace_diag(q, r, t, &dc());
            let b = backtrace_offdiag(q, r, t, SectorLabel::UpDown, &d0).unwrap();
            assert!((a.0 - b.0).abs() < 1e-13 && (a.1 - b.1).abs() < 1e-13);
        }
    }

    #[test]
    fn pure_phase_without_damping_or_coupling() {
        let mut d = dc();
        d.params.epsilon = 0.0;
        d.diffusion = 0.0;
        let lf = offdiag_log_factor(0.5, 0.5, 3.0, SectorLabel::DownUp, &d).unwrap();
        assert_eq!(lf.re, 0.0);
        assert!((lf.im - 2.0 * 0.3 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn origin_is_fixed_for_diagonal_sectors() {
        for t in [0.1, 1.0, 10.0, 100.0] {
            for d in [dc(), underdamped()] {
                let img = characteristic_image(0.0, 0.0, t, SectorLabel::DownDown, &d);
                assert_eq!((img.q_src, img.r_src), (0.0, 0.0));
                assert_eq!(img.log_factor, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn leading_decay_rate_is_inverse_decoherence_time() {
        let d = dc();
        let a = offdiag_log_factor(0.2, 0.1, 100.0, SectorLabel::UpDown, &d).unwrap().re;
        let b = offdiag_log_factor(0.2, 0.1, 101.0, SectorLabel::UpDown, &d).unwrap().re;
        assert!(((a - b) - 1.0 / d.tau_d).abs() < 1e-9);
    }

    #[test]
    fn underdamped_images_are_finite() {
        let d = underdamped();
        assert!(d.lambda_plus.im != 0.0);
        let img = characteristic_image(1.0, -0.5, 2.3, SectorLabel::UpDown, &d);
        assert!(img.q_src.is_finite() && img.r_src.is_finite() && img.log_factor.re <= 0.0);
    }

    #[test]
    fn pointer_forms() {
        let d = dc();
        let up = long_time_sector(&d, SectorLabel::UpUp).unwrap();
        assert!((up.center + 0.5).abs() < 1e-15);
        assert!((up.position_variance() - 0.5).abs() < 1e-15);
        assert!((up.eval_qr(0.0, 0.0).re - 1.0).abs() < 1e-15);
        let z = zero_t_pointer(&d, SectorLabel::DownDown).unwrap();
        assert!((z.alpha_sq - 0.125).abs() < 1e-15);
        let lt = long_time_sector(&d, SectorLabel::DownDown).unwrap();
        for (q, r) in [(0.4, 0.2), (-1.0, 2.0)] {
            assert!((z.state.eval(q, r) - lt.eval_qr(q, r)).norm() < 1e-14);
        }
        assert!(matches!(high_t_pointer(&d, SectorLabel::UpUp), Err(Error::WrongBath { .. })));

        let hot = derive_constants(&PhysicalParams::reference().with_bath(Bath::HighTemperature { kbt: 10.0 })).unwrap();
        let h = high_t_pointer(&hot, SectorLabel::UpUp).unwrap();
        assert!((h.position_variance() - 10.0).abs() < 1e-12);
        assert!((h.r_variance() - 0.05).abs() < 1e-14);
        assert_eq!(h, long_time_sector(&hot, SectorLabel::UpUp).unwrap());
        assert!(matches!(zero_t_pointer(&hot, SectorLabel::UpUp), Err(Error::WrongBath { .. })));

        assert!(matches!(
            long_time_sector(&underdamped(), SectorLabel::UpUp),
            Err(Error::Underdamped { .. })
        ));
    }

    #[test]
    fn pointer_forms_are_a_transform_pair() {
        let g = GridSpec::new(128, 64, 10.0, 8.0).unwrap();
        let ptr = long_time_sector(&dc(), SectorLabel::UpUp).unwrap();
        let qr = ptr.field(g, Representation::PartialFourier, 1.0);
        let rr = ptr.field(g, Representation::CenterDifference, 1.0);
        let back = grids::inverse_partial_ft(&qr).unwrap();
        let err = (&back.values - &rr.values).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(err < 1e-10, "{err}");
    }

    fn grid() -> GridSpec {
        GridSpec::new(64, 64, 10.0, 10.0).unwrap()
    }

    #[test]
    fn propagate_at_zero_is_identity() {
        let rho0 = assemble_initial(
            &ApparatusState::Coherent { x0: 1.0, p0: 0.3 },
            SpinAmplitudes::balanced(),
            grid(),
            &PhysicalParams::reference(),
        )
        .unwrap();
        let out = propagate(&rho0, 0.0, &dc()).unwrap();
        for s in SectorLabel::ALL {
            assert_eq!(out.sector(s).values, rho0.sector(s).values);
        }
    }

    #[test]
    fn evaluator_and_grid_paths_agree() {
        let p = PhysicalParams::reference();
        let g = GridSpec::new(128, 128, 10.0, 10.0).unwrap();
        let rho0 = assemble_initial(&ApparatusState::Coherent { x0: 1.0, p0: 0.0 }, SpinAmplitudes::balanced(), g, &p)
            .unwrap();
        let mut gridded = rho0.clone();
        gridded.apparatus = None;
        for t in [0.05, 0.5] {
            let a = propagate(&rho0, t, &dc()).unwrap();
            let b = propagate(&gridded, t, &dc()).unwrap();
            for s in SectorLabel::ALL {
                let err = (&a.sector(s).values - &b.sector(s).values)
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.norm()));
                assert!(err < 1e-4, "t = {t} sector {s:?}: {err}");
            }
        }
    }

    #[test]
    fn final_mixture_weights() {
        let amps = SpinAmplitudes::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let mix = final_mixture(amps, &dc(), grid()).unwrap();
        for s in [SectorLabel::UpUp, SectorLabel::UpDown, SectorLabel::DownUp] {
            assert!(mix.sector(s).values.iter().all(|v| v.norm() == 0.0));
        }
        let o = (grid().origin_center(), grid().origin_diff());
        assert!((mix.sector(SectorLabel::DownDown).values[[o.0, o.1]].re - 1.0).abs() < 1e-15);
    }
}
