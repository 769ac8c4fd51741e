use hotlink_core::analysis::fit_damped_sine;
use hotlink_core::dynamics::*;
use hotlink_core::linalg::C64;
use hotlink_core::units::{ghz, mhz, NS, US};
use proptest::prelude::*;

fn qubit(levels: usize, kappa: f64, occupancy: f64, detuning: f64) -> QubitParams {
    QubitParams {
        frequency: ghz(7.48) + detuning,
        anharmonicity: mhz(-204.0),
        levels,
        kappa,
        occupancy,
        dephasing: 0.0,
    }
}

fn mode(cutoff: usize, kappa: f64, occupancy: f64) -> ModeParams {
    ModeParams {
        frequency: ghz(7.48),
        fock_cutoff: cutoff,
        kappa,
        occupancy,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolved_states_stay_physical(
        kq in 0.2f64..5.0, nq in 0.0f64..1.0, kc in 0.2f64..20.0, nc in 0.0f64..2.0,
        g_mhz in 0.0f64..8.0, det_mhz in -20.0f64..20.0, angle in 0.0f64..std::f64::consts::PI,
    ) {
        let q = qubit(3, kq / US, nq, mhz(det_mhz));
        let m = mode(5, kc / US, nc);
        let c = Coupling::new(mhz(g_mhz), 0.0);
        let space = Space::of(&[q], Some(&m));
        let h = build_hamiltonian(&[q], Some(&m), &c, m.frequency).unwrap();
        let ops = build_collapse_operators(&[q], Some(&m)).unwrap();
        let (s, co) = angle.sin_cos();
        let mut psi = vec![C64::new(0.0, 0.0); space.total()];
        psi[space.index(&[0, 0])] = C64::new(co, 0.0);
        psi[space.index(&[1, 1])] = C64::new(0.0, s);
        let rho0 = DensityMatrix::pure(&psi, space.clone()).unwrap();
        let dt = default_time_step(&[q], Some(&m), &c, m.frequency);
        let traj = evolve(&rho0, &h, &ops, 200.0 * NS, dt, 20.0 * NS).unwrap();
        for rho in &traj.states {
            prop_assert!(rho.validate().is_ok());
        }
    }

    #[test]
    fn qubit_steady_state_obeys_detailed_balance(kq in 0.1f64..10.0, nq in 0.001f64..3.0, levels in 2usize..6) {
        let q = qubit(levels, kq / US, nq, 0.0);
        let space = Space::of(&[q], None);
        let h = build_hamiltonian(&[q], None, &Coupling::new(0.0, 0.0), q.frequency).unwrap();
        let ops = build_collapse_operators(&[q], None).unwrap();
        let ss = steady_state(&h, &ops, &space).unwrap();
        let ratio = nq / (nq + 1.0);
        for n in 0..levels - 1 {
            let (p0, p1) = (ss.rho.matrix()[(n, n)].re, ss.rho.matrix()[(n + 1, n + 1)].re);
            prop_assert!((p1 - ratio * p0).abs() < 1e-6, "{} {} {}", n, p0, p1);
        }
    }

    #[test]
    fn null_space_and_evolution_agree(kq in 0.5f64..5.0, nq in 0.0f64..0.5, kc in 20.0f64..100.0, nc in 0.0f64..0.8, g_mhz in 1.0f64..6.0) {
        let q = qubit(2, kq / US, nq, 0.0);
        let m = mode(5, kc / US, nc);
        let c = Coupling::new(mhz(g_mhz), 0.0);
        let space = Space::of(&[q], Some(&m));
        let h = build_hamiltonian(&[q], Some(&m), &c, m.frequency).unwrap();
        let ops = build_collapse_operators(&[q], Some(&m)).unwrap();
        let a = steady_state(&h, &ops, &space).unwrap();
        let b = steady_state_by_evolution(&h, &ops, &space).unwrap();
        prop_assert_eq!(a.method, SteadyMethod::NullSpace);
        let diff = (a.rho.matrix() - b.rho.matrix()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-6, "{:e}", diff);
    }
}

#[test]
fn steady_excitation_converges_with_cutoff() {
    let q = qubit(4, 1.0 / (1.08 * US), 0.52, 0.0);
    let pe_at = |cutoff: usize| {
        let m = mode(cutoff, 1.0 / (820.0 * NS), 5.64);
        let c = Coupling::new(mhz(5.0), 0.0);
        let space = Space::of(&[q], Some(&m));
        let h = build_hamiltonian(&[q], Some(&m), &c, m.frequency).unwrap();
        let ops = build_collapse_operators(&[q], Some(&m)).unwrap();
        let ss = steady_state(&h, &ops, &space).unwrap();
        1.0 - ss.rho.partial_trace(&[0]).unwrap().matrix()[(0, 0)].re
    };
    let auto = fock_cutoff_for(5.64);
    let (a, b) = (pe_at(auto), pe_at(auto + 20));
    assert!((a - b).abs() < 1e-3, "{a} {b}");
}

#[test]
fn dissipators_do_not_depend_on_the_frame() {
    let q = qubit(3, 1.0 / US, 0.3, mhz(3.0));
    let m = mode(6, 1.0 / (100.0 * NS), 0.4);
    let c = Coupling::new(mhz(4.0), 0.0);
    let space = Space::of(&[q], Some(&m));
    let ops = build_collapse_operators(&[q], Some(&m)).unwrap();
    let rho0 = DensityMatrix::basis(&[1, 0], space.clone()).unwrap();
    let populations = |frame: f64| {
        let h = build_hamiltonian(&[q], Some(&m), &c, frame).unwrap();
        let traj = evolve(&rho0, &h, &ops, 100.0 * NS, 0.002 * NS, 100.0 * NS).unwrap();
        let last = traj.states.last().unwrap().clone();
        (0..space.total()).map(|i| last.matrix()[(i, i)].re).collect::<Vec<_>>()
    };
    let (a, b) = (populations(m.frequency), populations(m.frequency + mhz(50.0)));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-7, "{x} {y}");
    }
}

#[test]
fn ramsey_fringe_recovers_programmed_detuning() {
    let detuning = mhz(3.0);
    let q = qubit(3, 1.0 / (2.0 * US), 0.0, detuning);
    let space = Space::of(&[q], None);
    let h = build_hamiltonian(&[q], None, &Coupling::new(0.0, 0.0), ghz(7.48)).unwrap();
    let ops = build_collapse_operators(&[q], None).unwrap();
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rho0 = DensityMatrix::pure(&[s, s, C64::new(0.0, 0.0)], space).unwrap();
    let traj = evolve(&rho0, &h, &ops, 1.0 * US, 0.05 * NS, 2.0 * NS).unwrap();
    let x: Vec<f64> = traj.states.iter().map(|r| 2.0 * r.matrix()[(0, 1)].re).collect();
    let fit = fit_damped_sine(&traj.times, &x).unwrap();
    let w = fit.frequency.unwrap();
    assert!((w / detuning - 1.0).abs() < 0.01, "{w} vs {detuning}");
}
