//! Randomized invariants shared by the unit suite and the acceptance run.
//!
//! Every check drives a deterministic proptest runner and returns the first
//! counterexample as a string instead of panicking, so callers can decide
//! how to report it.

#![allow(dead_code)]

use decohere::analytic::{self, characteristic_image};
use decohere::grids::{self, GridSpec, Representation, SectorField};
use decohere::observables;
use decohere::oracle::{self, integrate_characteristic, PdeRunConfig, Scheme};
use decohere::params::{derive_constants, Bath, PhysicalParams, SectorLabel, SpinAmplitudes};
use decohere::states::{assemble_initial, ApparatusState, DensityMatrix};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 200;

pub type Check = fn() -> Result<(), String>;

/// Name and entry point of every check.
pub const SUITE: &[(&str, Check)] = &[
    ("lambda identities", lambda_identities),
    ("high/zero temperature decay-time ratio", decay_time_ratio),
    ("constants are deterministic", constants_deterministic),
    ("parseval", parseval),
    ("transform round trips", transform_round_trips),
    ("position diagonal is real", position_diagonal_real),
    ("builders are hermitian, normalized and pure", builders),
    ("initial off-diagonal sectors are conjugate partners", initial_partners),
    ("characteristic semigroup", semigroup),
    ("conjugation symmetry", conjugation_symmetry),
    ("sector traces are conserved", trace_conservation),
    ("oracle matches closed form", oracle_matches_closed_form),
    ("off-diagonal reduces to diagonal at zero splitting", zero_splitting_reduction),
    ("pde conserves diagonal traces", pde_trace_conservation),
    ("purity at most one for unsqueezed states", purity_bounded),
    ("observables survive representation round trips", representation_invariance),
    ("time series need increasing times", series_monotone),
    ("pointer states forget the initial state at 200 tau_R", late_pointer_states),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            max_shrink_iters: 64,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Physical parameters with `gamma` away from critical damping.
pub fn physical_params() -> impl Strategy<Value = PhysicalParams> {
    (
        0.2f64..5.0,
        0.2f64..5.0,
        prop_oneof![0.05f64..0.8, 1.25f64..4.0],
        -2.0f64..2.0,
        -1.0f64..1.0,
        0.2f64..3.0,
        prop_oneof![
            Just(Bath::ZeroTemperature),
            (0.5f64..50.0).prop_map(|kbt| Bath::HighTemperature { kbt }),
            (0.01f64..20.0).prop_map(|temperature| Bath::General { temperature }),
        ],
    )
        .prop_map(|(m, omega, g_ratio, epsilon, lambda_spin, hbar, bath)| PhysicalParams {
            m,
            omega,
            lambda_spin,
            epsilon,
            gamma: g_ratio * omega,
            bath,
            hbar,
            kb: 1.0,
        })
}

fn sector() -> impl Strategy<Value = SectorLabel> {
    prop::sample::select(SectorLabel::ALL.to_vec())
}

fn spin() -> impl Strategy<Value = SpinAmplitudes> {
    (0.05f64..1.5, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(theta, phi)| {
            SpinAmplitudes::new(
                Complex64::new(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), phi),
            )
            .expect("unit norm by construction")
        })
}

/// Apparatus states no narrower than the oscillator ground state.
pub fn unsqueezed_apparatus() -> impl Strategy<Value = ApparatusState> {
    prop_oneof![
        (-1.5f64..1.5, -1.0f64..1.0).prop_map(|(x0, p0)| ApparatusState::Coherent { x0, p0 }),
        (-1.5f64..1.5, -1.0f64..1.0, 0.75f64..1.0)
            .prop_map(|(x0, p0, sigma)| ApparatusState::Gaussian { x0, p0, sigma }),
        (0.3f64..1.5, -0.5f64..0.5, 0.0f64..3.0)
            .prop_map(|(x0, p0, phase)| ApparatusState::Cat { x0, p0, phase }),
        (0u32..=2).prop_map(|n| ApparatusState::Fock { n }),
    ]
}

/// Apparatus states that fit a `[-6, 6]^2` box in natural units.
pub fn apparatus() -> impl Strategy<Value = ApparatusState> {
    prop_oneof![
        (-1.5f64..1.5, -1.0f64..1.0).prop_map(|(x0, p0)| ApparatusState::Coherent { x0, p0 }),
        (-1.5f64..1.5, -1.0f64..1.0, 0.5f64..0.9)
            .prop_map(|(x0, p0, sigma)| ApparatusState::Gaussian { x0, p0, sigma }),
        (0.3f64..1.5, -0.5f64..0.5, 0.0f64..3.0)
            .prop_map(|(x0, p0, phase)| ApparatusState::Cat { x0, p0, phase }),
        (0u32..=2).prop_map(|n| ApparatusState::Fock { n }),
    ]
}

/// Grid that holds every [`apparatus`] state and its propagated images.
fn work_grid() -> GridSpec {
    GridSpec::new(128, 96, 8.0, 12.0).unwrap()
}

fn natural(gamma: f64) -> PhysicalParams {
    PhysicalParams::reference().with_gamma(gamma)
}

fn random_field(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
}

fn field_from(values: &[(f64, f64)], grid: GridSpec, rep: Representation) -> SectorField {
    let (n0, n1) = grid.shape_for(rep);
    SectorField {
        label: SectorLabel::UpUp,
        rep,
        grid,
        values: Array2::from_shape_fn((n0, n1), |(i, j)| {
            let (re, im) = values[i * n1 + j];
            Complex64::new(re, im)
        }),
    }
}

pub fn lambda_identities() -> Result<(), String> {
    check(1000, physical_params(), |p| {
        let dc = derive_constants(&p).map_err(fail)?;
        let prod = dc.lambda_plus * dc.lambda_minus;
        let sum = dc.lambda_plus + dc.lambda_minus;
        let want_prod = (p.hbar / (p.m * p.omega)).powi(2);
        let want_sum = 2.0 * p.hbar * p.gamma / (p.m * p.omega * p.omega);
        ensure((prod - want_prod).norm() <= 1e-12 * want_prod, || format!("product {prod} vs {want_prod}"))?;
        ensure((sum - want_sum).norm() <= 1e-12 * want_sum, || format!("sum {sum} vs {want_sum}"))?;
        if p.gamma > p.omega {
            ensure(
                dc.lambda_plus.im == 0.0 && dc.lambda_minus.im == 0.0 && dc.lambda_minus.re > 0.0,
                || "overdamped lambdas must be real and positive".into(),
            )?;
        }
        let tau = (p.hbar * p.m * p.omega * p.omega).powi(2) / (dc.diffusion * p.epsilon * p.epsilon);
        ensure(p.epsilon == 0.0 || rel(dc.tau_d, tau) < 1e-14, || format!("tau_D {} vs {tau}", dc.tau_d))
    })
}

pub fn decay_time_ratio() -> Result<(), String> {
    check(CASES, (physical_params(), 0.5f64..100.0), |(p, kbt)| {
        if p.epsilon == 0.0 {
            return Ok(());
        }
        let cold = derive_constants(&p.with_bath(Bath::ZeroTemperature)).map_err(fail)?;
        let hot = derive_constants(&p.with_bath(Bath::HighTemperature { kbt })).map_err(fail)?;
        let want = p.hbar * p.omega / (2.0 * kbt);
        let got = hot.tau_d / cold.tau_d;
        ensure(rel(got, want) < 1e-12, || format!("ratio {got} vs {want}"))
    })
}

pub fn constants_deterministic() -> Result<(), String> {
    check(CASES, physical_params(), |p| {
        let a = derive_constants(&p).map_err(fail)?;
        let b = derive_constants(&p).map_err(fail)?;
        ensure(format!("{a:?}") == format!("{b:?}"), || "constants differ between calls".into())
    })
}

pub fn parseval() -> Result<(), String> {
    let grid = GridSpec::new(16, 16, 5.0, 4.0).unwrap();
    check(CASES, random_field(16), move |v| {
        let f = field_from(&v, grid, Representation::CenterDifference);
        let hat = grids::forward_partial_ft(&f).map_err(fail)?;
        let lhs: f64 = f.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.d_center();
        let rhs: f64 = hat.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.d_wavenumber()
            / (2.0 * std::f64::consts::PI);
        ensure(rel(rhs, lhs) < 1e-10, || format!("{lhs} vs {rhs}"))
    })
}

pub fn transform_round_trips() -> Result<(), String> {
    let grid = GridSpec::new(16, 16, 5.0, 4.0).unwrap();
    check(CASES, random_field(16), move |v| {
        let f = field_from(&v, grid, Representation::CenterDifference);
        let scale = f.max_abs();
        let back = grids::inverse_partial_ft(&grids::forward_partial_ft(&f).map_err(fail)?).map_err(fail)?;
        let d1 = observables::sup_distance(&back, &f) / scale;
        let g = field_from(&v, grid, Representation::PartialFourier);
        let again = grids::forward_partial_ft(&grids::inverse_partial_ft(&g).map_err(fail)?).map_err(fail)?;
        let d2 = observables::sup_distance(&again, &g) / g.max_abs();
        ensure(d1 < 1e-12 && d2 < 1e-12, || format!("round-trip defects {d1}, {d2}"))
    })
}

pub fn position_diagonal_real() -> Result<(), String> {
    let grid = GridSpec::new(16, 16, 5.0, 4.0).unwrap();
    check(CASES, random_field(16), move |v| {
        let mut f = field_from(&v, grid, Representation::CenterDifference);
        let n1 = grid.n_diff;
        for i in 0..grid.n_center {
            f.values[[i, 0]].im = 0.0;
            f.values[[i, grid.origin_diff()]].im = 0.0;
            for j in 1..grid.origin_diff() {
                f.values[[i, n1 - j]] = f.values[[i, j]].conj();
            }
        }
        let hat = grids::forward_partial_ft(&f).map_err(fail)?;
        let diag = grids::inverse_column(&hat, grid.origin_diff()).map_err(fail)?;
        let worst = diag.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        ensure(worst < 1e-10 * f.max_abs(), || format!("imaginary diagonal {worst}"))
    })
}

pub fn builders() -> Result<(), String> {
    let grid = work_grid();
    let p = PhysicalParams::reference();
    check(CASES, apparatus(), move |st| {
        let rho = assemble_initial(&st, SpinAmplitudes::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap(), grid, &p)
            .map_err(fail)?;
        let cd = rho.to_center_difference().map_err(fail)?;
        let herm = cd.sector(SectorLabel::UpUp).hermiticity_defect().map_err(fail)?;
        ensure(herm < 1e-10, || format!("hermiticity defect {herm}"))?;
        let tr = observables::total_trace(&rho);
        ensure((tr - 1.0).abs() < 1e-8, || format!("trace {tr}"))?;
        let purity = observables::purity(&rho).map_err(fail)?;
        ensure((purity - 1.0).abs() < 1e-6, || format!("purity {purity}"))
    })
}

pub fn initial_partners() -> Result<(), String> {
    let grid = work_grid();
    let p = PhysicalParams::reference();
    check(CASES, (apparatus(), spin()), move |(st, amps)| {
        let rho = assemble_initial(&st, amps, grid, &p).map_err(fail)?;
        let (ud, du) = (rho.sector(SectorLabel::UpDown), rho.sector(SectorLabel::DownUp));
        let (n0, n1) = grid.shape();
        let scale = ud.max_abs().max(f64::MIN_POSITIVE);
        for i in 1..n0 {
            for j in 1..n1 {
                let d = du.values[[i, j]] - ud.values[[n0 - i, n1 - j]].conj();
                ensure(d.norm() <= 1e-13 * scale, || format!("partner defect {d} at ({i},{j})"))?;
            }
        }
        Ok(())
    })
}

pub fn semigroup() -> Result<(), String> {
    let strat = (
        prop_oneof![Just(2.0), Just(0.5), 1.1f64..4.0],
        -4.0f64..4.0,
        -4.0f64..4.0,
        0.0f64..2.0,
        0.0f64..2.0,
        sector(),
    );
    check(CASES, strat, |(gamma, q, r, t1, t2, s)| {
        let dc = derive_constants(&natural(gamma)).map_err(fail)?;
        let whole = characteristic_image(q, r, t1 + t2, s, &dc);
        let first = characteristic_image(q, r, t1, s, &dc);
        let second = characteristic_image(first.q_src, first.r_src, t2, s, &dc);
        let scale = 1.0 + whole.q_src.abs().max(whole.r_src.abs());
        let dq = (whole.q_src - second.q_src).abs() / scale;
        let dr = (whole.r_src - second.r_src).abs() / scale;
        let dl = (whole.log_factor - first.log_factor - second.log_factor).norm() / (1.0 + whole.log_factor.norm());
        ensure(dq < 1e-10 && dr < 1e-10 && dl < 1e-10, || format!("defects {dq} {dr} {dl}"))
    })
}

fn propagated(st: &ApparatusState, amps: SpinAmplitudes, grid: GridSpec, p: &PhysicalParams, t: f64) -> Result<(DensityMatrix, DensityMatrix), TestCaseError> {
    let dc = derive_constants(p).map_err(fail)?;
    let rho0 = assemble_initial(st, amps, grid, p).map_err(fail)?;
    let rho = analytic::propagate(&rho0, t, &dc).map_err(fail)?;
    Ok((rho0, rho))
}

pub fn offdiag_sup_bound() -> Result<(), String> {
    let grid = work_grid();
    check(CASES, (apparatus(), 1.1f64..4.0, 0.0f64..3.0), move |(st, gamma, t)| {
        let p = natural(gamma);
        let dc = derive_constants(&p).map_err(fail)?;
        let (rho0, rho) = propagated(&st, SpinAmplitudes::balanced(), grid, &p, t)?;
        for s in [SectorLabel::UpDown, SectorLabel::DownUp] {
            let bound = (-t / dc.tau_d).exp() * rho0.sector(s).max_abs() * (1.0 + 1e-6);
            let got = rho.sector(s).max_abs();
            ensure(got <= bound, || format!("{s:?}: sup {got} exceeds {bound} at t = {t}"))?;
        }
        Ok(())
    })
}

pub fn conjugation_symmetry() -> Result<(), String> {
    let grid = work_grid();
    check(CASES, (apparatus(), spin(), prop_oneof![Just(2.0), 0.3f64..0.8], 0.0f64..4.0), move |(st, amps, gamma, t)| {
        let (_, rho) = propagated(&st, amps, grid, &natural(gamma), t)?;
        let (ud, du) = (rho.sector(SectorLabel::UpDown), rho.sector(SectorLabel::DownUp));
        let (n0, n1) = grid.shape();
        let scale = ud.max_abs().max(f64::MIN_POSITIVE);
        for i in 1..n0 {
            for j in 1..n1 {
                let d = du.values[[i, j]] - ud.values[[n0 - i, n1 - j]].conj();
                ensure(d.norm() <= 1e-10 * scale, || format!("defect {} at ({i},{j})", d.norm() / scale))?;
            }
        }
        Ok(())
    })
}

pub fn trace_conservation() -> Result<(), String> {
    let grid = work_grid();
    check(CASES, (apparatus(), spin(), prop_oneof![Just(2.0), 0.3f64..0.8], 0.0f64..20.0), move |(st, amps, gamma, t)| {
        let (_, rho) = propagated(&st, amps, grid, &natural(gamma), t)?;
        let up = observables::trace(rho.sector(SectorLabel::UpUp));
        let down = observables::trace(rho.sector(SectorLabel::DownDown));
        ensure((up - amps.a.norm_sqr()).abs() < 1e-8, || format!("up trace {up}"))?;
        ensure((down - amps.b.norm_sqr()).abs() < 1e-8, || format!("down trace {down}"))
    })
}

/// Worst relative disagreement between the RK4 oracle and the closed form
/// over `samples` random characteristics at damping `gamma`.
pub fn oracle_disagreement(gamma: f64, samples: u32) -> Result<(f64, f64), String> {
    let dc = derive_constants(&natural(gamma)).map_err(|e| e.to_string())?;
    let worst = std::cell::Cell::new((0.0f64, 0.0f64));
    check(samples, (-4.0f64..4.0, -4.0f64..4.0, 0.0f64..4.0, sector()), |(q, r, t, s)| {
        let steps = ((t / 1e-3).ceil() as usize).max(16);
        let o = integrate_characteristic(q, r, t, s, &dc, steps).map_err(fail)?;
        let a = characteristic_image(q, r, t, s, &dc);
        let bt = ((o.q - a.q_src).abs() / a.q_src.abs().max(1.0)).max((o.r - a.r_src).abs() / a.r_src.abs().max(1.0));
        let lf = (o.logw - a.log_factor).norm() / a.log_factor.norm().max(1.0);
        let (wb, wl) = worst.get();
        worst.set((wb.max(bt), wl.max(lf)));
        Ok(())
    })?;
    Ok(worst.get())
}

pub fn oracle_matches_closed_form() -> Result<(), String> {
    for gamma in [2.0, 0.5] {
        let (bt, lf) = oracle_disagreement(gamma, CASES)?;
        if !(bt < 1e-8 && lf < 1e-7) {
            return Err(format!("gamma = {gamma}: backtrace {bt:.3e}, log-factor {lf:.3e}"));
        }
    }
    Ok(())
}

pub fn zero_splitting_reduction() -> Result<(), String> {
    let strat = (1.1f64..4.0, -4.0f64..4.0, -4.0f64..4.0, 0.0f64..3.0);
    check(CASES, strat, |(gamma, q, r, t)| {
        let mut p = natural(gamma);
        p.epsilon = 0.0;
        p.lambda_spin = 0.0;
        let dc = derive_constants(&p).map_err(fail)?;
        let steps = ((t / 1e-3).ceil() as usize).max(16);
        let diag = integrate_characteristic(q, r, t, SectorLabel::UpUp, &dc, steps).map_err(fail)?;
        for s in [SectorLabel::UpDown, SectorLabel::DownUp] {
            let od = integrate_characteristic(q, r, t, s, &dc, steps).map_err(fail)?;
            ensure(od == diag, || format!("{s:?} differs from the diagonal flow"))?;
            let exact = characteristic_image(q, r, t, s, &dc);
            let d = (exact.log_factor - diag.logw).norm() / exact.log_factor.norm().max(1.0);
            ensure(d < 1e-7, || format!("closed form differs by {d}"))?;
        }
        Ok(())
    })
}

pub fn pde_trace_conservation() -> Result<(), String> {
    let grid = GridSpec::new(64, 64, 10.0, 8.0).unwrap();
    let p = PhysicalParams::reference();
    let dc = derive_constants(&p).map_err(|e| e.to_string())?;
    let amps = SpinAmplitudes::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
    let rho0 = assemble_initial(&ApparatusState::Coherent { x0: 0.5, p0: 0.2 }, amps, grid, &p).map_err(|e| e.to_string())?;
    let cfg = PdeRunConfig::auto(grid, &dc, Scheme::Upwind3, 0.9, 2.0 * dc.tau_r);
    let out = oracle::integrate_pde(&rho0, &cfg, &dc).map_err(|e| e.to_string())?;
    for (s, want) in [(SectorLabel::UpUp, 0.36), (SectorLabel::DownDown, 0.64)] {
        let tr = observables::trace(out.state.sector(s));
        if (tr - want).abs() >= 1e-6 {
            return Err(format!("{s:?} trace {tr} after 2 tau_R"));
        }
    }
    Ok(())
}

fn purity_check(states: impl Strategy<Value = ApparatusState>) -> Result<(), String> {
    let grid = work_grid();
    check(CASES, (states, spin(), 1.1f64..4.0, 0.0f64..5.0), move |(st, amps, gamma, t)| {
        let (_, rho) = propagated(&st, amps, grid, &natural(gamma), t)?;
        let purity = observables::purity(&rho).map_err(fail)?;
        ensure(purity <= 1.0 + 1e-8, || format!("purity {purity} at t = {t}"))
    })
}

/// Purity bound for states at least as wide as the ground state.
pub fn purity_bounded() -> Result<(), String> {
    purity_check(unsqueezed_apparatus())
}

/// Purity bound over every builder, squeezed Gaussians included.
pub fn purity_bounded_all_states() -> Result<(), String> {
    purity_check(apparatus())
}

pub fn representation_invariance() -> Result<(), String> {
    let grid = work_grid();
    check(CASES, (apparatus(), spin(), 0.0f64..2.0), move |(st, amps, t)| {
        let (_, rho) = propagated(&st, amps, grid, &natural(2.0), t)?;
        let back = rho.to_center_difference().map_err(fail)?.to_partial_fourier().map_err(fail)?;
        let cd = rho.to_center_difference().map_err(fail)?;
        for (name, a, b, c) in [
            ("trace", observables::total_trace(&rho), observables::total_trace(&back), observables::total_trace(&cd)),
            (
                "purity",
                observables::purity(&rho).map_err(fail)?,
                observables::purity(&back).map_err(fail)?,
                observables::purity(&cd).map_err(fail)?,
            ),
            (
                "coherence",
                observables::coherence_norm(&rho).map_err(fail)?,
                observables::coherence_norm(&back).map_err(fail)?,
                observables::coherence_norm(&cd).map_err(fail)?,
            ),
        ] {
            ensure((a - b).abs() < 1e-8 && (a - c).abs() < 1e-8, || format!("{name}: {a} {b} {c}"))?;
        }
        Ok(())
    })
}

pub fn series_monotone() -> Result<(), String> {
    check(CASES, prop::collection::vec(0.0f64..10.0, 2..20), |times| {
        let values = vec![1.0; times.len()];
        let increasing = times.windows(2).all(|w| w[1] > w[0]);
        let built = observables::TimeSeries::new("x", times.clone(), values).is_ok();
        ensure(built == increasing, || format!("accepted = {built} for {times:?}"))
    })
}

/// Initial-state independence and momentum degeneracy well past the slow
/// relaxation mode (`t = 200 tau_R`).
pub fn late_pointer_states() -> Result<(), String> {
    let p = PhysicalParams::reference();
    let dc = derive_constants(&p).map_err(|e| e.to_string())?;
    let grid = GridSpec::new(256, 256, 12.0, 12.0).unwrap();
    let t = 200.0 * dc.tau_r;
    let mut late = Vec::new();
    for st in [
        ApparatusState::Coherent { x0: 2.0, p0: 0.0 },
        ApparatusState::Fock { n: 1 },
        ApparatusState::Cat { x0: 1.5, p0: 0.0, phase: 0.0 },
    ] {
        let rho0 = assemble_initial(&st, SpinAmplitudes::balanced(), grid, &p).map_err(|e| e.to_string())?;
        late.push(analytic::propagate(&rho0, t, &dc).map_err(|e| e.to_string())?);
    }
    for a in 0..late.len() {
        for b in a + 1..late.len() {
            for s in [SectorLabel::UpUp, SectorLabel::DownDown] {
                let d = observables::sup_distance(late[a].sector(s), late[b].sector(s));
                if d >= 1e-5 {
                    return Err(format!("states {a} and {b} differ by {d:.3e} in {s:?}"));
                }
            }
        }
    }
    for rho in &late {
        let up = observables::momentum_marginal(rho.sector(SectorLabel::UpUp), p.hbar).map_err(|e| e.to_string())?;
        let down = observables::momentum_marginal(rho.sector(SectorLabel::DownDown), p.hbar).map_err(|e| e.to_string())?;
        let gap = up.density.iter().zip(&down.density).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if gap >= 1e-8 {
            return Err(format!("momentum marginals differ by {gap:.3e}"));
        }
    }
    Ok(())
}
