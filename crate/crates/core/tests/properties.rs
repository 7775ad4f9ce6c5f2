use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use ratefit_core::chain::{
    dbm_to_photon_flux, synthesize_noisy_powers, synthesize_noisy_psd, synthesize_noisy_reflection,
    synthesize_noisy_trace,
};
use ratefit_core::dynamics::{bloch_integrate, ramsey_emission, t1_power_trace};
use ratefit_core::fit::{
    circle_fit, fit_circle_algebraic, fit_complex_decay, fit_curve, fit_exponential_power, fit_full_spectrum,
    fit_mollow_triplet, fit_scattering_powers, CoherentPowerModel, ComplexDecay, CurveModel, ExponentialDecay,
    FullSpectrumOptions, IncoherentPowerModel, LmOptions, Lorentzian, LossPowerModel, PowerCurves, Quadrature,
    ScatteringModel, SpectrumData, TripletModel, TripletOptions,
};
use ratefit_core::pipeline::{DynamicsRun, OffResonanceRun, OnResonanceRun, ReflectionRun, ScatteringRun};
use ratefit_core::qed::{
    coherent_power_minimum, dressed_asymmetry, incoherent_psd, incoherent_spectrum, mollow_triplet_approx,
    power_balance, reflection_coefficient, region_boundaries, steady_state, ReflectionMode,
};
use ratefit_core::units::{hz_to_angular, khz};
use ratefit_core::{BlochVector, ChainConfig, DriveConfig, FitResult, RateSet};
use rayon::prelude::*;

const WQ: f64 = TAU * 5.5e9;

fn rates() -> impl Strategy<Value = RateSet> {
    (20.0..500.0f64, 0.0..200.0f64, 0.0..50.0f64).prop_map(|(r, n, p)| RateSet::new(khz(r), khz(n), khz(p)).unwrap())
}

/// Drive from 1 kHz to 20 MHz, uniform in log.
fn rabi() -> impl Strategy<Value = f64> {
    (3.0..7.3f64).prop_map(|e| TAU * 10f64.powf(e))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Fixed-seed runs need no regression file.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn power_budget_closes_and_loss_follows_population(r in rates(), w in rabi()) {
        let b = power_balance(w, &r).unwrap();
        let s = steady_state(&DriveConfig::resonant(WQ, w).unwrap(), &r).unwrap();
        prop_assert!((b.p_in - b.p_coh - b.p_incoh - b.p_loss).abs() <= 1e-12 * b.p_in);
        prop_assert!(b.p_coh >= 0.0 && b.p_incoh >= 0.0 && b.p_loss >= 0.0);
        prop_assert!((b.p_loss - r.gamma_n() * s.s2).abs() <= 1e-12 * b.p_in);
    }

    #[test]
    fn steady_state_is_a_physical_state(r in rates(), w in rabi(), d in -5e3..5e3f64) {
        let s = steady_state(&DriveConfig::detuned(WQ, khz(d), w).unwrap(), &r).unwrap();
        prop_assert!((0.0..=0.5).contains(&s.s2));
        prop_assert!(s.s1.norm_sqr() <= s.s2 * (1.0 - s.s2) * (1.0 + 1e-12));
    }

    #[test]
    fn resonant_spectrum_is_even(r in rates(), w in rabi(), x in prop::collection::vec(1.0..2e4f64, 20)) {
        let drive = DriveConfig::resonant(WQ, w).unwrap();
        for v in x {
            let a = incoherent_psd(WQ + khz(v), &drive, &r).unwrap();
            let b = incoherent_psd(WQ - khz(v), &drive, &r).unwrap();
            prop_assert!(rel(a, b) <= 1e-12, "{a} vs {b} at {v} kHz");
        }
    }

    #[test]
    fn no_dephasing_no_asymmetry(
        gr in 20.0..500.0f64,
        gn in 0.0..200.0f64,
        d in prop_oneof![-5e3..-1.0f64, 1.0..5e3f64],
        w in rabi(),
    ) {
        let r = RateSet::new(khz(gr), khz(gn), 0.0).unwrap();
        let m = dressed_asymmetry(&DriveConfig::detuned(WQ, khz(d), w).unwrap(), &r).unwrap();
        prop_assert!((m.r_asym - 1.0).abs() <= 1e-12, "r_asym = {}", m.r_asym);
    }

    #[test]
    fn weak_probe_traces_the_reflection_circle(r in rates(), d in prop::collection::vec(-5e3..5e3f64, 20)) {
        let a = r.gamma_r() / (2.0 * r.gamma_2());
        let centre = Complex64::new(1.0 - a, 0.0);
        for v in d {
            let drive = DriveConfig::detuned(WQ, khz(v), 0.0).unwrap();
            let z = reflection_coefficient(&drive, &r, ReflectionMode::WeakProbe).unwrap();
            prop_assert!(((z - centre).norm() - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn numeric_dip_matches_closed_form(r in rates()) {
        if let Some(dip) = region_boundaries(&r).unwrap().omega_dip {
            let w = coherent_power_minimum(&r, 0.1 * dip, 10.0 * dip, 1e-12).unwrap();
            prop_assert!(rel(w, dip) <= 1e-6, "{w} vs {dip}");
        }
    }

    #[test]
    fn algebraic_circle_is_exact(
        cx in -2.0..2.0f64,
        cy in -2.0..2.0f64,
        radius in 0.01..3.0f64,
        phi in prop::collection::vec(0.0..TAU, 5..40),
    ) {
        let c = Complex64::new(cx, cy);
        let pts: Vec<Complex64> = phi.iter().map(|&t| c + Complex64::from_polar(radius, t)).collect();
        // Arcs narrower than this leave the circle ill-determined.
        let spread = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - phi.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 0.5);
        let fit = fit_circle_algebraic(&pts).unwrap();
        prop_assert!(fit.rms < 1e-12 * radius, "rms {} of radius {radius}", fit.rms);
        prop_assert!((fit.radius - radius).abs() < 1e-10 * radius);
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn integration_settles_on_the_steady_state(r in rates(), w in rabi(), d in -3e3..3e3f64) {
        let drive = DriveConfig::detuned(WQ, khz(d), w).unwrap();
        let t_max = 30.0 / r.gamma_1().min(r.gamma_2());
        let start = BlochVector { s1: Complex64::new(0.0, 0.0), s2: 0.0 };
        let traj = bloch_integrate(start, &drive, &r, &linspace(0.0, t_max, 400)).unwrap();
        for s in &traj.states {
            prop_assert!(s.s2 >= -1e-10 && s.s2 <= 1.0 + 1e-10);
            prop_assert!(s.s1.norm_sqr() <= s.s2 * (1.0 - s.s2) + 1e-10);
        }
        let end = traj.last().unwrap();
        let ss = steady_state(&drive, &r).unwrap();
        let dist = ((end.s1 - ss.s1).norm_sqr() + (end.s2 - ss.s2).powi(2)).sqrt();
        prop_assert!(dist < 1e-8, "endpoint {dist:.2e} from the steady state");
    }
}

/// Noiseless data from `p`, a fit started at `p·(1 + u)`, and every
/// parameter back to 1e-6.
fn round_trip<M: CurveModel>(model: &M, xs: &[M::X], p: &[f64], u: &[f64]) -> Result<(), TestCaseError> {
    let init: Vec<f64> = p.iter().zip(u).map(|(v, e)| v * (1.0 + e)).collect();
    fit_back(model, xs, p, init, None)
}

fn fit_back<M: CurveModel>(
    model: &M,
    xs: &[M::X],
    p: &[f64],
    init: Vec<f64>,
    bounds: Option<(&[f64], &[f64])>,
) -> Result<(), TestCaseError> {
    let ys: Vec<f64> = xs.iter().map(|&x| model.eval(x, p)).collect();
    let fit = fit_curve(model, xs, &ys, None, &init, bounds, &LmOptions::default())
        .map_err(|e| TestCaseError::fail(format!("{e}")))?;
    for (k, (got, want)) in fit.params.iter().zip(p).enumerate() {
        prop_assert!(
            rel(*got, *want) <= 1e-6,
            "{}: {got} vs {want} from {:?}",
            model.names()[k],
            init
        );
    }
    Ok(())
}

fn perturbation(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.2..0.2f64, n)
}

fn signed(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![-hi..-lo, lo..hi]
}

fn power_grid() -> Vec<f64> {
    linspace(khz(10.0).ln(), khz(5000.0).ln(), 60)
        .into_iter()
        .map(f64::exp)
        .collect()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn lorentzian_round_trip(x0 in signed(20.0, 200.0), g in 50.0..300.0f64, a in 1e4..1e6f64, u in perturbation(3)) {
        let xs = linspace(khz(-1500.0), khz(1500.0), 301);
        round_trip(&Lorentzian, &xs, &[khz(x0), khz(g), a], &u)?;
    }

    #[test]
    fn triplet_round_trip(om in 2000.0..10_000.0f64, off in prop::collection::vec(signed(5.0, 50.0), 3),
                          g in prop::collection::vec(100.0..300.0f64, 3), a in prop::collection::vec(1e4..1e6f64, 3),
                          u in perturbation(9)) {
        let mut p = Vec::new();
        for (i, c) in [-om, 0.0, om].into_iter().enumerate() {
            p.extend([khz(c + off[i]), khz(g[i]), a[i]]);
        }
        let xs = linspace(khz(-om - 2000.0), khz(om + 2000.0), 2001);
        // A line centre is a position, not a magnitude: it moves by a
        // fraction of its width. Widths stay positive as in the estimator.
        let init: Vec<f64> = (0..9)
            .map(|i| if i % 3 == 0 { p[i] + u[i] * p[i + 1] } else { p[i] * (1.0 + u[i]) })
            .collect();
        let lo: Vec<f64> = (0..9).map(|i| if i % 3 == 1 { 0.0 } else { f64::NEG_INFINITY }).collect();
        let hi = vec![f64::INFINITY; 9];
        fit_back(&TripletModel, &xs, &p, init, Some((&lo, &hi)))?;
    }

    #[test]
    fn exponential_round_trip(g in 100.0..500.0f64, p0 in 1e5..1e7f64, u in perturbation(2)) {
        let xs = linspace(0.0, 5e-6, 250);
        round_trip(&ExponentialDecay, &xs, &[khz(g), p0], &u)?;
    }

    #[test]
    fn complex_decay_round_trip(g in 50.0..300.0f64, d in signed(50.0, 300.0), amp in 0.1..2.0f64,
                                ph in signed(0.3, 3.0), u in perturbation(4)) {
        let xs: Vec<(f64, Quadrature)> = linspace(0.0, 5e-6, 250)
            .into_iter()
            .flat_map(|t| [(t, Quadrature::Re), (t, Quadrature::Im)])
            .collect();
        round_trip(&ComplexDecay, &xs, &[khz(g), khz(d), amp, ph], &u)?;
    }

    #[test]
    fn power_curve_round_trips(gr in 50.0..400.0f64, gn in 5.0..100.0f64, gphi in 0.5..30.0f64,
                               u in perturbation(3)) {
        let (gr, gn, gphi) = (khz(gr), khz(gn), khz(gphi));
        let (g1, g2) = (gr + gn, 0.5 * (gr + gn) + gphi);
        let xs = power_grid();
        round_trip(&IncoherentPowerModel, &xs, &[gr, g1 * g2, g1 * gphi], &u)?;
        round_trip(&LossPowerModel, &xs, &[gn, g1 * g2], &u[..2])?;
        let joint: Vec<(f64, u8)> = xs.iter().flat_map(|&w| [(w, 0), (w, 1), (w, 2)]).collect();
        round_trip(&ScatteringModel, &joint, &[gr, gn, gphi], &u)?;
    }

    #[test]
    fn coherent_power_round_trip(gr in 50.0..400.0f64, gn in 5.0..100.0f64, gphi in 5.0..30.0f64,
                                 u in perturbation(3)) {
        round_trip(&CoherentPowerModel, &power_grid(), &[khz(gr), khz(gn), khz(gphi)], &u)?;
    }
}

fn device() -> RateSet {
    RateSet::new(khz(227.0), khz(48.0), khz(3.0)).unwrap()
}

fn noisy_reflection(r: &RateSet, seed: u64) -> (Vec<f64>, Vec<Complex64>, Vec<f64>) {
    let run = ReflectionRun::default();
    let f01 = WQ / TAU;
    let flux = dbm_to_photon_flux(run.probe_dbm, f01).unwrap();
    let half = hz_to_angular(0.5 * run.span_hz);
    let omega = linspace(WQ - half, WQ + half, run.n_points);
    let clean: Vec<Complex64> = omega
        .iter()
        .map(|&w| {
            let d = DriveConfig::new(WQ, w, 2.0 * (r.gamma_r() * flux).sqrt()).unwrap();
            reflection_coefficient(&d, r, ReflectionMode::WeakProbe).unwrap()
        })
        .collect();
    let chain = ChainConfig::default().with_n_avg(run.n_avg).with_seed(seed);
    let n = synthesize_noisy_reflection(&clean, flux, &chain, 0).unwrap();
    (omega, n.r, n.sigma)
}

fn noisy_powers(r: &RateSet, seed: u64) -> PowerCurves {
    let run = ScatteringRun::default();
    let rabi: Vec<f64> = linspace(run.rabi_min_hz.ln(), run.rabi_max_hz.ln(), run.n_points)
        .into_iter()
        .map(|x| hz_to_angular(x.exp()))
        .collect();
    let chain = ChainConfig::default().with_n_avg(run.n_avg).with_seed(seed);
    let pts: Vec<_> = rabi
        .iter()
        .enumerate()
        .map(|(k, &w)| synthesize_noisy_powers(&power_balance(w, r).unwrap(), &chain, k as u64).unwrap())
        .collect();
    PowerCurves {
        rabi,
        p_coh: pts.iter().map(|p| p.budget.p_coh).collect(),
        p_incoh: pts.iter().map(|p| p.budget.p_incoh).collect(),
        p_loss: pts.iter().map(|p| p.budget.p_loss).collect(),
        sigma_coh: Some(pts.iter().map(|p| p.sigma.p_coh).collect()),
        sigma_incoh: Some(pts.iter().map(|p| p.sigma.p_incoh).collect()),
        sigma_loss: Some(pts.iter().map(|p| p.sigma.p_loss).collect()),
    }
}

fn dynamics_chain(n_avg: f64, seed: u64) -> ChainConfig {
    let mut c = ChainConfig::default().with_n_avg(n_avg).with_seed(seed);
    c.bandwidth_hz = DynamicsRun::default().bandwidth_hz;
    c
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| x * k).collect()
}

fn rates_of(fit: &FitResult, names: &[&str]) -> Vec<f64> {
    names.iter().map(|n| fit.value(n).unwrap()).collect()
}

fn all_scaled(a: &[f64], b: &[f64], k: f64) -> Result<(), TestCaseError> {
    for (x, y) in a.iter().zip(b) {
        prop_assert!(rel(*y, k * x) <= 1e-6, "{y} vs {k}·{x}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn rescaling_the_axes_rescales_the_rates(k in 0.1..10.0f64, seed in 0..1000u64) {
        let r = device();

        let (omega, z, sigma) = noisy_reflection(&r, seed);
        let names = ["gamma_r", "gamma_2"];
        let a = rates_of(&circle_fit(&omega, &z, Some(&sigma)).unwrap(), &names);
        let b = rates_of(&circle_fit(&scaled(&omega, k), &z, Some(&sigma)).unwrap(), &names);
        all_scaled(&a, &b, k)?;

        let c = noisy_powers(&r, seed);
        let ck = PowerCurves {
            rabi: scaled(&c.rabi, k),
            p_coh: scaled(&c.p_coh, k),
            p_incoh: scaled(&c.p_incoh, k),
            p_loss: scaled(&c.p_loss, k),
            sigma_coh: c.sigma_coh.as_deref().map(|s| scaled(s, k)),
            sigma_incoh: c.sigma_incoh.as_deref().map(|s| scaled(s, k)),
            sigma_loss: c.sigma_loss.as_deref().map(|s| scaled(s, k)),
        };
        let names = ["gamma_r", "gamma_n", "gamma_phi"];
        let a = rates_of(&fit_scattering_powers(&c).unwrap().joint, &names);
        let b = rates_of(&fit_scattering_powers(&ck).unwrap().joint, &names);
        all_scaled(&a, &b, k)?;

        let run = DynamicsRun::default();
        let t = linspace(0.0, run.duration_s, run.n_points);
        let delta = hz_to_angular(run.pulse_detuning_hz);
        let clean = ramsey_emission(delta, &r, &t, r.gamma_r().sqrt()).unwrap();
        let tr = synthesize_noisy_trace(&clean, &dynamics_chain(run.n_avg_ramsey, seed), 0).unwrap();
        let mut tk = tr.clone();
        tk.t = scaled(&tr.t, 1.0 / k);
        let names = ["gamma_2", "delta_omega"];
        let a = rates_of(&fit_complex_decay(&tr, Some(delta)).unwrap(), &names);
        let b = rates_of(&fit_complex_decay(&tk, Some(k * delta)).unwrap(), &names);
        all_scaled(&a, &b, k)?;

        let clean = t1_power_trace(&r, &t, 1.0).unwrap();
        let tr = synthesize_noisy_trace(&clean, &dynamics_chain(run.n_avg_power, seed), 1).unwrap();
        let mut tk = tr.clone();
        tk.t = scaled(&tr.t, 1.0 / k);
        let a = rates_of(&fit_exponential_power(&tr).unwrap(), &["gamma_1"]);
        let b = rates_of(&fit_exponential_power(&tk).unwrap(), &["gamma_1"]);
        all_scaled(&a, &b, k)?;
    }
}

/// Covariance symmetric and positive semi-definite, and the quoted errors
/// its diagonal.
fn check_covariance(fit: &FitResult) {
    let n = fit.params.len();
    let c = DMatrix::from_fn(n, n, |i, j| fit.covariance[i][j]);
    let scale = (0..n).map(|i| c[(i, i)].abs()).fold(0.0, f64::max);
    assert!(
        (&c - c.transpose()).abs().max() <= 1e-10 * scale,
        "covariance not symmetric"
    );
    let min = c.symmetric_eigenvalues().min();
    assert!(min >= -1e-10 * scale, "covariance has eigenvalue {min}");
    for (i, name) in fit.names.iter().enumerate() {
        assert_eq!(fit.estimate(name).unwrap().sigma, fit.sigma_of(i));
        assert_eq!(fit.sigma_of(i), c[(i, i)].max(0.0).sqrt());
    }
}

const RUNS: u64 = 500;

/// Fraction of `RUNS` noise realisations whose 2σ interval covers the truth,
/// per parameter.
fn coverage(name: &str, truth: &[(&str, f64)], fit: impl Fn(u64) -> FitResult + Sync) -> Vec<(String, f64)> {
    let hits: Vec<Vec<bool>> = (0..RUNS)
        .into_par_iter()
        .map(|seed| {
            let f = fit(seed);
            check_covariance(&f);
            truth
                .iter()
                .map(|(p, v)| {
                    let e = f.estimate(p).unwrap();
                    (e.value - v).abs() <= 2.0 * e.sigma
                })
                .collect()
        })
        .collect();
    truth
        .iter()
        .enumerate()
        .map(|(i, (p, _))| {
            let frac = hits.iter().filter(|h| h[i]).count() as f64 / RUNS as f64;
            println!("{name} {p}: {:.1}% within 2σ", 100.0 * frac);
            (format!("{name} {p}"), frac)
        })
        .collect()
}

#[test]
fn two_sigma_intervals_cover_95_percent() {
    let r = device();
    let mut all = Vec::new();

    all.extend(coverage(
        "reflection",
        &[("gamma_r", r.gamma_r()), ("gamma_2", r.gamma_2())],
        |seed| {
            let (omega, z, sigma) = noisy_reflection(&r, seed);
            circle_fit(&omega, &z, Some(&sigma)).unwrap()
        },
    ));

    let on = OnResonanceRun::default();
    let drive = DriveConfig::resonant(WQ, hz_to_angular(on.rabi_hz)).unwrap();
    let half = hz_to_angular(on.rabi_hz + on.margin_hz);
    let clean = mollow_triplet_approx(&linspace(WQ - half, WQ + half, on.n_points), &drive, &r).unwrap();
    all.extend(coverage(
        "triplet",
        &[("gamma_1", r.gamma_1()), ("gamma_2", r.gamma_2())],
        |seed| {
            let chain = ChainConfig::default().with_n_avg(on.n_avg).with_seed(seed);
            fit_mollow_triplet(
                &synthesize_noisy_psd(&clean, &chain, 0).unwrap(),
                &TripletOptions::default(),
            )
            .unwrap()
        },
    ));

    let off = OffResonanceRun::default();
    let flux = dbm_to_photon_flux(off.drive_dbm, WQ / TAU).unwrap();
    let drive = DriveConfig::detuned(WQ, hz_to_angular(off.detuning_hz), 2.0 * (r.gamma_r() * flux).sqrt()).unwrap();
    let half = hz_to_angular(off.half_span_hz);
    let wp = drive.omega_p();
    let clean = incoherent_spectrum(&linspace(wp - half, wp + half, off.n_points), &drive, &r).unwrap();
    all.extend(coverage(
        "full spectrum",
        &[("gamma_1", r.gamma_1()), ("gamma_phi", r.gamma_phi())],
        |seed| {
            let chain = ChainConfig::default().with_n_avg(off.n_avg).with_seed(seed);
            let spectrum = synthesize_noisy_psd(&clean, &chain, 0).unwrap();
            let data = SpectrumData {
                spectrum: &spectrum,
                omega_q: WQ,
                guess: None,
            };
            fit_full_spectrum(data, r.gamma_r(), &FullSpectrumOptions::default()).unwrap()
        },
    ));

    let truth = [
        ("gamma_r", r.gamma_r()),
        ("gamma_n", r.gamma_n()),
        ("gamma_phi", r.gamma_phi()),
    ];
    all.extend(coverage("powers", &truth, |seed| {
        fit_scattering_powers(&noisy_powers(&r, seed)).unwrap().joint
    }));

    let run = DynamicsRun::default();
    let t = linspace(0.0, run.duration_s, run.n_points);
    let delta = hz_to_angular(run.pulse_detuning_hz);
    let ramsey = ramsey_emission(delta, &r, &t, r.gamma_r().sqrt()).unwrap();
    all.extend(coverage(
        "ramsey",
        &[("gamma_2", r.gamma_2()), ("delta_omega", delta)],
        |seed| {
            let tr = synthesize_noisy_trace(&ramsey, &dynamics_chain(run.n_avg_ramsey, seed), 0).unwrap();
            fit_complex_decay(&tr, Some(delta)).unwrap()
        },
    ));

    let power = t1_power_trace(&r, &t, 1.0).unwrap();
    all.extend(coverage("power decay", &[("gamma_1", r.gamma_1())], |seed| {
        let tr = synthesize_noisy_trace(&power, &dynamics_chain(run.n_avg_power, seed), 0).unwrap();
        fit_exponential_power(&tr).unwrap()
    }));

    let bad: Vec<_> = all.iter().filter(|(_, f)| !(0.93..=0.97).contains(f)).collect();
    assert!(bad.is_empty(), "coverage outside 93-97%: {bad:?}");
}
