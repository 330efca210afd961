//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! report is always printed.

use std::time::{Duration, Instant};

use fockflow::fit::{fit_range, Family};
use fockflow::nphoton::{occupation_coeffs, project_lambda, to_field_spec, TemporalBasis, TemporalFunction};
use fockflow::observables::{expect, physical_state, purity_entropy_bloch};
use fockflow::operator::trace_distance;
use fockflow::oracles::{analytic_single_photon_pe, cascaded_single_photon, timebin_brute_force};
use fockflow::scan::{
    best_shift_overlap, expectation_curve, gaussian, max_excitation, optimal_bandwidth_sweep, rabi_frequency_fit,
};
use fockflow::two_time::correlate;
use fockflow::*;

const RTOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pe_op() -> Operator {
    Operator::ket_bra(2, models::EXCITED, models::EXCITED)
}

fn ground() -> Operator {
    models::basis_state(2, models::GROUND)
}

fn atom() -> SLHModel {
    models::two_level(1.0, 0.0).unwrap()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Result<Outcome>) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = match f() {
        Ok(o) => o,
        Err(e) => outcome(false, format!("error: {e}")),
    };
    let took = start.elapsed();
    match limit {
        Some(l) if took > l => (outcome(false, format!("{} (over the {:?} budget)", out.detail, l)), took),
        _ => (out, took),
    }
}

fn c1() -> Result<Outcome> {
    let p = max_excitation(&gaussian(1.46)?, 1, RTOL)?;
    Ok(outcome((p.value - 0.801).abs() <= 0.005, format!("max P_e = {:.6}", p.value)))
}

fn c2() -> Result<Outcome> {
    let p = max_excitation(&gaussian(1.46)?, 2, RTOL)?;
    Ok(outcome((p.value - 0.805).abs() <= 0.005, format!("max P_e = {:.6}", p.value)))
}

fn c3() -> Result<Outcome> {
    let env = make_envelope(EnvelopeKind::RisingExponential { bandwidth: 1.0, arrival: 0.0 })?;
    let p = max_excitation(&env, 1, RTOL)?;
    Ok(outcome(p.value >= 0.999, format!("max P_e = {:.8}", p.value)))
}

fn hierarchy_vs_timebin(n: u32, nbins: usize) -> Result<f64> {
    let spec = FieldSpec::fock(gaussian(1.46)?, n);
    let (t0, t1) = (-3.0, 4.0);
    let tb = timebin_brute_force(&atom(), &spec, &ground(), t0, t1, nbins, 1)?;
    let mut grid = TimeGrid::new(t0, t1);
    grid.sample_dt = Some((t1 - t0) / nbins as f64);
    let c = expectation_curve(&atom(), &spec, &ground(), &pe_op(), &[], &grid)?;
    let tbp: Vec<f64> = tb.states.iter().map(|r| r[(1, 1)].re).collect();
    Ok(sup(&c.values, &tbp))
}

fn c4() -> Result<Outcome> {
    let env = gaussian(1.46)?;
    let spec = FieldSpec::fock(env.clone(), 1);
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 3.0, 401);
    let dynamics = Dynamics::new(&atom(), &spec, &[])?;
    let traj = propagate(&initial_hierarchy(&ground(), &spec)?, &dynamics, &grid)?;
    let phys = traj.physical_states();
    let pe: Vec<f64> = phys.iter().map(|r| r[(1, 1)].re).collect();
    let analytic = analytic_single_photon_pe(&env, 1.0, 1.0, &traj.times)?;
    let d_analytic = sup(&pe, &analytic);
    let casc = cascaded_single_photon(&atom(), &spec, &ground(), &grid)?;
    let d_casc = casc.system_states().iter().zip(&phys).map(|(a, b)| trace_distance(a, b)).fold(0.0, f64::max);
    let d_tb = hierarchy_vs_timebin(1, 200)?;
    Ok(outcome(
        d_analytic <= 1e-6 && d_casc <= 1e-6 && d_tb <= 5e-3,
        format!("analytic {d_analytic:.2e}, cascaded {d_casc:.2e}, time-bin {d_tb:.2e}"),
    ))
}

fn c5() -> Result<Outcome> {
    let d = hierarchy_vs_timebin(2, 200)?;
    Ok(outcome(d <= 5e-3, format!("sup |ΔP_e| = {d:.2e}")))
}

fn long_time_flux(spec: &FieldSpec) -> Result<f64> {
    let (t0, t1) = spec.slots[0].envelope.support();
    let grid = TimeGrid::sampled(t0, t1 + 40.0, 11);
    let c = expectation_curve(&atom(), spec, &ground(), &pe_op(), &[Channel::Flux { i: 0, j: 0 }], &grid)?;
    Ok(*c.channels[0].last().unwrap())
}

fn c6() -> Result<Outcome> {
    let env = gaussian(1.46)?;
    let f1 = long_time_flux(&FieldSpec::fock(env.clone(), 1))?;
    let f2 = long_time_flux(&FieldSpec::fock(env.clone(), 2))?;
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let fs = long_time_flux(&FieldSpec::superposition(env, &[(1, h), (2, h)]))?;
    let pass = (f1 - 1.0).abs() <= 1e-3 && (f2 - 2.0).abs() <= 1e-3 && (fs - 1.5).abs() <= 1e-3;
    Ok(outcome(pass, format!("E[Λ] = {f1:.6}, {f2:.6}, {fs:.6}")))
}

/// Optimal bandwidths for N = 1..=40, shared by criteria 7 and 8.
fn scaling_sweep() -> Result<Vec<(f64, f64, f64)>> {
    let ns: Vec<u32> = (1..=40).collect();
    optimal_bandwidth_sweep(&ns, 0.7, 2.2, 2e-4, RTOL)
        .into_iter()
        .map(|r| r.map(|o| (o.photons as f64, o.pe_max, o.bandwidth)))
        .collect()
}

fn c7(data: &[(f64, f64, f64)]) -> Result<Outcome> {
    let ns: Vec<f64> = data.iter().map(|d| d.0).collect();
    let p: Vec<f64> = data.iter().map(|d| d.1).collect();
    let f = fit_range(Family::PowerLawOneMinus, &ns, &p, 10.0, 40.0)?;
    let pass = (0.25..=0.29).contains(&f.a) && (0.95..=1.00).contains(&f.b) && f.r_squared >= 0.999;
    Ok(outcome(pass, format!("a = {:.4} ± {:.4}, b = {:.4} ± {:.4}, R² = {:.6}", f.a, f.a_half_width, f.b, f.b_half_width, f.r_squared)))
}

fn c8(data: &[(f64, f64, f64)]) -> Result<Outcome> {
    let ns: Vec<f64> = data.iter().map(|d| d.0).collect();
    let w: Vec<f64> = data.iter().map(|d| d.2).collect();
    let f = fit_range(Family::PowerLaw, &ns, &w, 1.0, 10.0)?;
    let pass = (1.38..=1.52).contains(&f.a) && (0.96..=1.01).contains(&f.b);
    Ok(outcome(pass, format!("a = {:.4} ± {:.4}, b = {:.4} ± {:.4}, R² = {:.6}", f.a, f.a_half_width, f.b, f.b_half_width, f.r_squared)))
}

fn c9() -> Result<Outcome> {
    let bw = 1e3;
    let mut worst: f64 = 0.0;
    let mut vals = Vec::new();
    for n in 1..=5u32 {
        let p = max_excitation(&gaussian(bw)?, n, RTOL)?;
        let r = p.value * bw / n as f64;
        worst = worst.max((r - 5.0).abs() / 5.0);
        vals.push(format!("{r:.3}"));
    }
    Ok(outcome(worst <= 0.1, format!("P·Δω/N = [{}]", vals.join(", "))))
}

fn c10() -> Result<Outcome> {
    let p1 = max_excitation(&gaussian(1.0)?, 1, RTOL)?.value;
    let p2 = max_excitation(&gaussian(1.0)?, 2, RTOL)?.value;
    Ok(outcome(p1 > p2, format!("N=1: {p1:.6}, N=2: {p2:.6}")))
}

fn c11() -> Result<Outcome> {
    let model = models::two_mode_two_level(0.5, 0.5)?;
    let mut parts = Vec::new();
    let mut pass = true;
    for (bw, reflect) in [(0.1, true), (50.0, false)] {
        let env = gaussian(bw)?;
        let (t0, t1) = env.support();
        let spec = FieldSpec::fock(env, 1);
        let chans = [Channel::Flux { i: 0, j: 0 }, Channel::Flux { i: 1, j: 1 }];
        let grid = TimeGrid::sampled(t0, t1 + 40.0, 11);
        let c = expectation_curve(&model, &spec, &ground(), &pe_op(), &chans, &grid)?;
        let (t, r) = (*c.channels[0].last().unwrap(), *c.channels[1].last().unwrap());
        pass &= if reflect { r > 0.9 } else { t > 0.9 };
        pass &= (t + r - 1.0).abs() <= 1e-3;
        parts.push(format!("Δω={bw}: T = {t:.5}, R = {r:.5}"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c12() -> Result<Outcome> {
    let t_max = 0.02;
    let n = 50;
    let env = make_envelope(EnvelopeKind::Rectangular { duration: t_max, start: 0.0 })?;
    let grid = TimeGrid::sampled(0.0, t_max, 401);
    let c = expectation_curve(&atom(), &FieldSpec::fock(env.clone(), n), &ground(), &pe_op(), &[], &grid)?;
    let omega = rabi_frequency_fit(&c.times, &c.values, 1.0, 1e4);
    let predicted = oracles::strong_coupling_metrics(&env, n, 1.0, 1.0, t_max, t_max / 2.0)?.rabi_frequency;
    let rel = (omega - predicted).abs() / predicted;
    Ok(outcome(rel <= 0.05, format!("fitted ω = {omega:.3}, ω_R = {predicted:.3}, rel {rel:.2e}")))
}

fn c13() -> Result<Outcome> {
    let g = 0.9 / (2.0 * std::f64::consts::PI).sqrt();
    let n_max = 2;
    let model = models::jaynes_cummings(g, 1.0, 0.0, 0.0, n_max, &[])?;
    let d = model.dim();
    let reference = gaussian(1.0 / std::f64::consts::PI.sqrt())?;
    let (t0, t1) = reference.support();
    let atom_pe = models::jc_excited_projector(n_max);

    let absorb = expectation_curve(
        &model,
        &FieldSpec::fock(reference.clone(), 1),
        &models::basis_state(d, models::jc_index(0, 0, n_max)),
        &atom_pe,
        &[],
        &TimeGrid::sampled(t0, t1, 2001),
    )?;
    let pmax = fockflow::scan::peak_quadratic(&absorb.times, &absorb.values).value;

    // emission from the excited atom; amplitude of the single emitted photon
    // from ⟨L†(t_a) L(t_a + τ)⟩ = ξ*(t_a) ξ(t_a + τ)
    let spec = FieldSpec::vacuum();
    let rho0 = models::basis_state(d, models::jc_index(1, 0, n_max));
    let ta = 0.05;
    let span = 30.0;
    let dt = 0.01;
    let taus: Vec<f64> = (0..=(span / dt) as usize).map(|k| k as f64 * dt).collect();
    let dynamics = Dynamics::new(&model, &spec, &[])?;
    let base = propagate(&initial_hierarchy(&rho0, &spec)?, &dynamics, &TimeGrid::sampled(0.0, ta, 2))?;
    let l = &model.l[0];
    let amp = correlate(&l.dagger(), l, ta, &taus, &model, &spec, &base, &TimeGrid::new(0.0, 1.0))?;
    let times: Vec<f64> = taus.iter().map(|s| ta + s).collect();
    let (_, ov) = best_shift_overlap(&times, &amp, &reference, (0.0, 10.0));
    Ok(outcome(pmax >= 0.96 && ov >= 0.96, format!("max P_e = {pmax:.5}, emitted overlap = {ov:.5}")))
}

fn c14() -> Result<Outcome> {
    let env = gaussian(2.0)?;
    let alpha = C64::new(4.0, 0.0);
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 30.0, 801);
    let chans = [Channel::Flux { i: 0, j: 0 }];
    let run = |spec: FieldSpec| -> Result<(Vec<[f64; 3]>, f64)> {
        let dynamics = Dynamics::new(&atom(), &spec, &chans)?;
        let traj = propagate(&initial_hierarchy(&ground(), &spec)?, &dynamics, &grid)?;
        let bloch = traj.physical_states().iter().map(|r| purity_entropy_bloch(r).bloch.unwrap()).collect();
        Ok((bloch, traj.channels.last().unwrap()[0].re))
    };
    let (exact, fe) = run(FieldSpec::vacuum().with_displacement(Displacement { mode: 0, amplitude: alpha, envelope: env.clone() }))?;
    let (fock, ff) = run(FieldSpec::coherent_truncated(env, alpha, 30))?;
    let d = exact
        .iter()
        .zip(&fock)
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let pass = d <= 1e-2 && (ff - 16.0).abs() <= 0.05;
    Ok(outcome(pass, format!("Bloch sup {d:.2e}, flux N_trunc=30 {ff:.5}, exact {fe:.5}")))
}

fn c15() -> Result<Outcome> {
    let env = gaussian(1.46)?;
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let spec = FieldSpec::superposition(env.clone(), &[(1, h), (2, h)]);
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 5.0, 201);
    let dynamics = Dynamics::new(&atom(), &spec, &[])?;
    let traj = propagate(&initial_hierarchy(&ground(), &spec)?, &dynamics, &grid)?;
    let rep = monitor_invariants(&traj);

    // quantum regression boundary
    let k = 80;
    let (a, b) = (Operator::ket_bra(2, 1, 0), Operator::ket_bra(2, 0, 1));
    let t = traj.times[k];
    let qrt = correlate(&a, &b, t, &[0.0], &atom(), &spec, &traj, &TimeGrid::new(0.0, 1.0))?[0];
    let direct = expect(&physical_state(&traj.snapshots[k], &spec).matmul(&a), &b);
    let d_qrt = (qrt - direct).norm();

    // non-orthogonal pair run directly vs the same state decomposed onto an orthonormal basis
    let xi = make_envelope(EnvelopeKind::Gaussian { bandwidth: 1.46, arrival: 0.0 })?;
    let eta = make_envelope(EnvelopeKind::Gaussian { bandwidth: 1.46, arrival: 1.0 })?;
    let slots = vec![
        Slot { envelope: xi.clone(), mode: 0, max_photons: 1 },
        Slot { envelope: eta.clone(), mode: 0, max_photons: 1 },
    ];
    let nonorth = FieldSpec::product(slots, false);
    let g2 = TimeGrid::sampled(-7.0, 10.0, 171);
    let pe_direct = expectation_curve(&atom(), &nonorth, &ground(), &pe_op(), &[], &g2)?.values;
    let psi = TemporalFunction::Product(vec![xi.clone(), eta.clone()]);
    let basis = TemporalBasis::gram_schmidt(&[xi.clone(), eta.clone()])?;
    let decomposed = to_field_spec(&occupation_coeffs(&project_lambda(&psi, &basis, 2)?)?, &basis, 0)?;
    let pe_decomp = expectation_curve(&atom(), &decomposed, &ground(), &pe_op(), &[], &g2)?.values;
    let d_nonorth = sup(&pe_direct, &pe_decomp);

    // a second basis spanning the same subspace
    let rotated = TemporalBasis::gram_schmidt(&[eta, xi])?;
    let spec_rot = to_field_spec(&occupation_coeffs(&project_lambda(&psi, &rotated, 2)?)?, &rotated, 0)?;
    let pe_rot = expectation_curve(&atom(), &spec_rot, &ground(), &pe_op(), &[], &g2)?.values;
    let d_basis = sup(&pe_decomp, &pe_rot);

    let pass = rep.diag_trace <= 1e-8
        && rep.physical_trace <= 1e-8
        && rep.offdiag_trace <= 1e-8
        && rep.min_eigenvalue >= -1e-8
        && d_qrt <= 1e-12
        && d_nonorth <= 1e-4
        && d_basis <= 1e-4;
    Ok(outcome(
        pass,
        format!(
            "trace {:.1e}, off-diag {:.1e}, min eig {:.1e}, QRT {:.1e}, non-orth {:.1e}, basis {:.1e}",
            rep.diag_trace.max(rep.physical_trace),
            rep.offdiag_trace,
            rep.min_eigenvalue,
            d_qrt,
            d_nonorth,
            d_basis
        ),
    ))
}

fn main() {
    let s = Duration::from_secs;
    let mut rows: Vec<(usize, Outcome, Duration)> = Vec::new();
    let mut run = |id: usize, limit: Option<Duration>, f: &dyn Fn() -> Result<Outcome>| {
        let (o, d) = timed(limit, f);
        println!("{} criterion {id:>2}: {} [{:.2?}]", if o.pass { "PASS" } else { "FAIL" }, o.detail, d);
        rows.push((id, o, d));
    };
    run(1, Some(s(1)), &c1);
    run(2, Some(s(1)), &c2);
    run(3, Some(s(1)), &c3);
    run(4, Some(s(30)), &c4);
    run(5, Some(s(120)), &c5);
    run(6, None, &c6);

    let start = Instant::now();
    let sweep = scaling_sweep();
    let sweep_time = start.elapsed();
    match &sweep {
        Ok(data) => {
            let in_budget = sweep_time <= s(900);
            run(7, None, &|| {
                c7(data).map(|o| Outcome {
                    pass: o.pass && in_budget,
                    detail: format!("{} (sweep N=1..40 took {sweep_time:.1?})", o.detail),
                })
            });
            run(8, None, &|| c8(data));
        }
        Err(e) => {
            run(7, None, &|| Ok(outcome(false, format!("sweep failed: {e}"))));
            run(8, None, &|| Ok(outcome(false, format!("sweep failed: {e}"))));
        }
    }
    run(9, Some(s(60)), &c9);
    run(10, None, &c10);
    run(11, None, &c11);
    run(12, None, &c12);
    run(13, None, &c13);
    run(14, None, &c14);
    run(15, None, &c15);

    let failed: Vec<usize> = rows.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", rows.len() - failed.len(), rows.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
