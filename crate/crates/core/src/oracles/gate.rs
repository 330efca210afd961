//! The oracle gate: hierarchy runs checked against every independent oracle.

use crate::envelope::{make_envelope, EnvelopeKind};
use crate::error::Result;
use crate::field::FieldSpec;
use crate::hierarchy::initial_hierarchy;
use crate::integrator::{propagate, TimeGrid};
use crate::models;
use crate::observables::{expect, physical_state};
use crate::operator::{trace_distance, Operator};
use crate::rhs::Dynamics;
use crate::scan::{expectation_curve, gaussian, max_excitation};
use crate::two_time::correlate;

use super::{analytic_single_photon_pe, cascaded_single_photon, small_bandwidth_recursion, timebin_brute_force};

#[derive(Clone, Debug)]
pub struct GateCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, limit: f64) -> GateCheck {
    GateCheck { name, value, limit, pass: value.is_finite() && value <= limit }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pe() -> Operator {
    Operator::ket_bra(2, models::EXCITED, models::EXCITED)
}

fn ground() -> Operator {
    models::basis_state(2, models::GROUND)
}

fn analytic_gap(kind: EnvelopeKind) -> Result<f64> {
    let env = make_envelope(kind)?;
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 4.0, 301);
    let c = expectation_curve(&models::two_level(1.0, 0.0)?, &FieldSpec::fock(env.clone(), 1), &ground(), &pe(), &[], &grid)?;
    Ok(sup(&c.values, &analytic_single_photon_pe(&env, 1.0, 1.0, &c.times)?))
}

fn timebin_gap(n: u32) -> Result<f64> {
    let model = models::two_level(1.0, 0.0)?;
    let spec = FieldSpec::fock(gaussian(1.46)?, n);
    let (t0, t1, nbins) = (-3.0, 4.0, 200);
    let tb = timebin_brute_force(&model, &spec, &ground(), t0, t1, nbins, 1)?;
    let mut grid = TimeGrid::new(t0, t1);
    grid.sample_dt = Some((t1 - t0) / nbins as f64);
    let c = expectation_curve(&model, &spec, &ground(), &pe(), &[], &grid)?;
    let p: Vec<f64> = tb.states.iter().map(|r| r[(1, 1)].re).collect();
    Ok(sup(&c.values, &p))
}

fn cascaded_gap() -> Result<f64> {
    let model = models::two_level(1.0, 0.0)?;
    let env = gaussian(1.46)?;
    let spec = FieldSpec::fock(env.clone(), 1);
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 3.0, 201);
    let casc = cascaded_single_photon(&model, &spec, &ground(), &grid)?;
    let traj = propagate(&initial_hierarchy(&ground(), &spec)?, &Dynamics::new(&model, &spec, &[])?, &grid)?;
    Ok(casc.system_states().iter().zip(traj.physical_states()).map(|(a, b)| trace_distance(a, &b)).fold(0.0, f64::max))
}

fn regression_gaps() -> Result<(f64, f64)> {
    let model = models::two_level(1.0, 0.0)?;
    let sp = Operator::ket_bra(2, models::EXCITED, models::GROUND);
    let sm = sp.dagger();

    let vac = FieldSpec::vacuum();
    let rho_e = models::basis_state(2, models::EXCITED);
    let base = propagate(&initial_hierarchy(&rho_e, &vac)?, &Dynamics::new(&model, &vac, &[])?, &TimeGrid::sampled(0.0, 1.0, 3))?;
    let taus = [0.0, 0.5, 1.0, 2.0];
    let got = correlate(&sp, &sm, 1.0, &taus, &model, &vac, &base, &TimeGrid::new(0.0, 1.0))?;
    let closed = taus.iter().zip(&got).map(|(s, g)| (g - (-1.0f64).exp() * (-s / 2.0f64).exp()).norm()).fold(0.0, f64::max);

    let spec = FieldSpec::fock(gaussian(1.46)?, 2);
    let (t0, t1) = spec.slots[0].envelope.support();
    let traj = propagate(&initial_hierarchy(&ground(), &spec)?, &Dynamics::new(&model, &spec, &[])?, &TimeGrid::sampled(t0, t1, 41))?;
    let k = 20;
    let qrt = correlate(&sp, &sm, traj.times[k], &[0.0], &model, &spec, &traj, &TimeGrid::new(0.0, 1.0))?[0];
    let direct = expect(&physical_state(&traj.snapshots[k], &spec).matmul(&sp), &sm);
    Ok(((qrt - direct).norm(), closed))
}

fn recursion_gap() -> Result<f64> {
    let env = gaussian(0.02)?;
    let want = small_bandwidth_recursion(super::strong::small_bandwidth_p1(&env), 3);
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let got = max_excitation(&env, n, 1e-8)?.value;
        worst = worst.max((got - want[n as usize - 1]).abs() / want[n as usize - 1]);
    }
    Ok(worst)
}

/// Run every check; an error inside one check marks it failed with an infinite value.
pub fn run_gate() -> Vec<GateCheck> {
    let or_inf = |r: Result<f64>| r.unwrap_or(f64::INFINITY);
    let mut out = vec![
        check("analytic, gaussian N=1", or_inf(analytic_gap(EnvelopeKind::Gaussian { bandwidth: 1.46, arrival: 0.0 })), 1e-6),
        check(
            "analytic, rising exponential N=1",
            or_inf(analytic_gap(EnvelopeKind::RisingExponential { bandwidth: 1.0, arrival: 0.0 })),
            1e-6,
        ),
        check("analytic, rectangular N=1", or_inf(analytic_gap(EnvelopeKind::Rectangular { duration: 2.0, start: -1.0 })), 1e-6),
        check("cascaded source, trace distance", or_inf(cascaded_gap()), 1e-6),
        check("time-bin N=1, 200 bins", or_inf(timebin_gap(1)), 5e-3),
        check("time-bin N=2, 200 bins", or_inf(timebin_gap(2)), 5e-3),
    ];
    match regression_gaps() {
        Ok((boundary, closed)) => {
            out.push(check("regression boundary at tau=0", boundary, 1e-12));
            out.push(check("vacuum regression closed form", closed, 1e-6));
        }
        Err(_) => {
            out.push(check("regression boundary at tau=0", f64::INFINITY, 1e-12));
            out.push(check("vacuum regression closed form", f64::INFINITY, 1e-6));
        }
    }
    out.push(check("small-bandwidth recursion, relative", or_inf(recursion_gap()), 0.15));
    out
}
