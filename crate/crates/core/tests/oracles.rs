use fockflow::oracles::{analytic_single_photon_pe, cascaded_single_photon, timebin_brute_force};
use fockflow::scan::{expectation_curve, gaussian};
use fockflow::*;

fn pe_op() -> Operator {
    Operator::ket_bra(2, models::EXCITED, models::EXCITED)
}

fn ground() -> Operator {
    models::basis_state(2, models::GROUND)
}

#[test]
fn hierarchy_matches_analytic_for_each_envelope() {
    let model = models::two_level(1.0, 0.0).unwrap();
    let envs = [
        gaussian(1.46).unwrap(),
        make_envelope(EnvelopeKind::RisingExponential { bandwidth: 1.0, arrival: 0.0 }).unwrap(),
        make_envelope(EnvelopeKind::Rectangular { duration: 2.0, start: -1.0 }).unwrap(),
    ];
    for env in envs {
        let (t0, t1) = env.support();
        let grid = TimeGrid::sampled(t0, t1 + 4.0, 301);
        let c = expectation_curve(&model, &FieldSpec::fock(env.clone(), 1), &ground(), &pe_op(), &[], &grid).unwrap();
        let want = analytic_single_photon_pe(&env, 1.0, 1.0, &c.times).unwrap();
        let err = c.values.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{:?}: {err}", env.kind());
    }
}

#[test]
fn hierarchy_matches_cascaded_source() {
    let model = models::two_level(1.0, 0.0).unwrap();
    let env = gaussian(1.46).unwrap();
    let spec = FieldSpec::fock(env.clone(), 1);
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 2.0, 201);
    let casc = cascaded_single_photon(&model, &spec, &ground(), &grid).unwrap();
    let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
    let traj = propagate(&initial_hierarchy(&ground(), &spec).unwrap(), &dynamics, &grid).unwrap();
    assert_eq!(casc.times.len(), traj.times.len());
    let mut worst = 0.0f64;
    let mut worst_block = 0.0f64;
    for (k, (rho, h)) in casc.system_states().iter().zip(&traj.snapshots).enumerate() {
        let phys = fockflow::observables::physical_state(h, &spec);
        worst = worst.max(fockflow::operator::trace_distance(rho, &phys));
        if let Some((_, r10, _)) = casc.fock_entries(k, 1e-3) {
            let ours = h.get(&HierarchyIndex::new(vec![1], vec![0])).unwrap();
            worst_block = worst_block.max(r10.max_abs_diff(&ours));
        }
    }
    assert!(worst <= 1e-6, "trace distance {worst}");
    assert!(worst_block <= 1e-6, "ϱ10 block {worst_block}");
}

fn timebin_vs_hierarchy(n: u32, nbins: usize) -> f64 {
    let model = models::two_level(1.0, 0.0).unwrap();
    let env = gaussian(1.46).unwrap();
    let spec = FieldSpec::fock(env.clone(), n);
    let (t0, t1) = (-3.0, 4.0);
    let tb = timebin_brute_force(&model, &spec, &ground(), t0, t1, nbins, 1).unwrap();
    let mut grid = TimeGrid::new(t0, t1);
    grid.sample_dt = Some((t1 - t0) / nbins as f64);
    let c = expectation_curve(&model, &spec, &ground(), &pe_op(), &[], &grid).unwrap();
    assert_eq!(c.times.len(), tb.times.len());
    c.values.iter().zip(&tb.states).map(|(a, rho)| (a - rho[(1, 1)].re).abs()).fold(0.0, f64::max)
}

#[test]
fn timebin_agrees_for_one_photon() {
    let e200 = timebin_vs_hierarchy(1, 200);
    assert!(e200 <= 5e-3, "{e200}");
    let e100 = timebin_vs_hierarchy(1, 100);
    let ratio = e100 / e200;
    assert!((1.6..2.5).contains(&ratio), "first-order convergence, ratio {ratio}");
}

#[test]
fn timebin_agrees_for_two_photons() {
    let e = timebin_vs_hierarchy(2, 200);
    println!("N=2 time-bin deviation {e:.3e}");
    assert!(e <= 5e-3, "{e}");
}
