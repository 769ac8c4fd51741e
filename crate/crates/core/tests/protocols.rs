mod common;

use common::*;
use hotlink_core::analysis::{fit_exponential, FitResult};
use hotlink_core::dynamics::{embed, expectation, number, DensityMatrix, Space};
use hotlink_core::linalg::hermitian_eigenvalues;
use hotlink_core::protocols::*;
use hotlink_core::units::{mhz, NS, US};
use std::f64::consts::PI;

fn sorted_eigs(rho: &DensityMatrix) -> Vec<f64> {
    hermitian_eigenvalues(rho.matrix())
}

#[test]
fn empty_schedule_returns_initial_state() {
    let m = model_4k();
    let p = Protocol {
        name: "empty".into(),
        initial: InitialState::Ground,
        segments: vec![],
    };
    let r = run_schedule(&m, &p, RunOptions::default()).unwrap();
    let dims = r.final_state.space().dims.clone();
    let ground = DensityMatrix::ground(Space::new(dims));
    assert_eq!(r.final_state.matrix(), ground.matrix());
    assert_eq!(r.times, vec![0.0]);
}

#[test]
fn closed_uncoupled_run_preserves_spectrum() {
    let m = lossless(model_4k());
    let p = Protocol {
        name: "closed".into(),
        initial: InitialState::Ground,
        segments: vec![
            ScheduleSegment::new(0.0, 0.0, 0.0, DCoupler::Off).with_ops(vec![StatePrep::half_pi(0, Axis::Y)]),
            ScheduleSegment::new(50.0 * NS, 0.0, 0.0, DCoupler::Off),
        ],
    };
    let r = run_schedule(&m, &p, RunOptions::default()).unwrap();
    let before = {
        let q = Protocol {
            segments: vec![p.segments[0].clone()],
            ..p.clone()
        };
        run_schedule(&m, &q, RunOptions::default()).unwrap().final_state
    };
    for (a, b) in sorted_eigs(&before).iter().zip(sorted_eigs(&r.final_state)) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn closed_resonant_run_conserves_excitations() {
    let m = lossless(model_4k());
    let total_at = |t: f64| {
        let p = Protocol {
            name: "exchange".into(),
            initial: InitialState::Ground,
            segments: vec![ScheduleSegment::new(t, m.coupling.g_a, m.coupling.g_b, DCoupler::Off)
                .with_ops(vec![StatePrep::pi(0), StatePrep::half_pi(1, Axis::X)])],
        };
        let rho = run_schedule(&m, &p, RunOptions { sample_interval: 10.0 * NS, dt: None }).unwrap().final_state;
        let space = rho.space().clone();
        (0..3)
            .map(|site| expectation(&rho, &embed(&number(space.dims[site]), site, &space)).unwrap())
            .sum::<f64>()
    };
    for t_ns in [0.0, 17.0, 45.0, 80.0, 120.0] {
        let n = total_at(t_ns * NS);
        assert!((n - 1.5).abs() < 1e-8, "{t_ns} ns: {n}");
    }
}

#[test]
fn lossless_transfer_is_complete_at_t_star() {
    let m = lossless(model_4k());
    let timing = transfer_timing(m.coupling.g_a, m.coupling.g_b);
    assert!((timing.t_star - PI / (2f64.sqrt() * mhz(5.0))).abs() < 1e-12);
    let (_, rho_b) = run_transfer(&m, TransferInput::One, &timing, RunOptions::default()).unwrap();
    let pe = 1.0 - rho_b.matrix()[(0, 0)].re;
    assert!(pe > 1.0 - 1e-6, "{pe}");
    let (_, rho_b) = run_transfer(&m, TransferInput::Zero, &timing, RunOptions::default()).unwrap();
    assert!((rho_b.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
}

#[test]
fn receiver_excitation_is_stationary_at_t_star() {
    let m = lossless(model_4k());
    let timing = transfer_timing(m.coupling.g_a, m.coupling.g_b);
    let h = 0.1 * NS;
    let pe_b_at = |t: f64| {
        let p = Protocol {
            name: "probe".into(),
            initial: InitialState::Ground,
            segments: vec![ScheduleSegment::new(t, m.coupling.g_a, m.coupling.g_b, DCoupler::Off).with_ops(vec![StatePrep::pi(0)])],
        };
        let r = run_schedule(&m, &p, RunOptions { sample_interval: t, dt: Some(0.01 * NS) }).unwrap();
        *r.series("pe_b").last().unwrap()
    };
    let slope_per_ns = (pe_b_at(timing.t_star + h) - pe_b_at(timing.t_star - h)) / (2.0 * h) * NS;
    assert!(slope_per_ns.abs() < 1e-4, "{slope_per_ns}");
}

#[test]
fn swapping_sender_and_receiver_is_symmetric() {
    let mut m = model_4k();
    m.qubits[1] = m.qubits[0];
    let send = |from: usize| {
        let p = Protocol {
            name: "sym".into(),
            initial: InitialState::Steady {
                d_coupler: DCoupler::On,
                coupling: m.coupling,
            },
            segments: vec![ScheduleSegment::new(80.0 * NS, m.coupling.g_a, m.coupling.g_b, DCoupler::Off)
                .with_ops(vec![StatePrep::pi(from)])],
        };
        let r = run_schedule(&m, &p, RunOptions::default()).unwrap();
        r.series(if from == 0 { "pe_b" } else { "pe_a" }).to_vec()
    };
    let (ab, ba) = (send(0), send(1));
    assert_eq!(ab.len(), ba.len());
    for (x, y) in ab.iter().zip(&ba) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn cooling_at_4k_decays_toward_residual_excitation() {
    let m = model_4k().qubit_a_only();
    let r = run_schedule(&m, &cooling_protocol(&m, 2.0 * US), RunOptions { sample_interval: 5.0 * NS, dt: None }).unwrap();
    let pe = r.series("pe_a");
    assert!((pe[0] - 0.34).abs() < 0.01, "{}", pe[0]);
    let last = *pe.last().unwrap();
    assert!((last - 0.095).abs() < 0.02, "{last}");
    // coarse monotone trend: each 50 ns window mean is below the previous one
    let means: Vec<f64> = pe.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0] + 1e-3);
    }
    // the fast swap-limited component; higher qubit levels relax on the
    // qubit's own lifetime and leave a slow tail
    let window = 60;
    let fit: FitResult = fit_exponential(&r.times[..window], &pe[..window]).unwrap();
    let tau_ns = fit.tau() / NS;
    assert!((30.0..130.0).contains(&tau_ns), "{tau_ns}");
}

#[test]
fn cooling_with_cold_baths_reaches_ground() {
    let mut m = model_4k().qubit_a_only();
    m.qubits[0].occupancy = 0.0;
    m.channel.warm_occupancy = 0.0;
    m.channel.cooled_occupancy = None;
    let mut p = cooling_protocol(&m, 300.0 * NS);
    p.initial = InitialState::Ground;
    p.segments[0].initial_ops = vec![StatePrep::pi(0)];
    let r = run_schedule(&m, &p, RunOptions { sample_interval: 10.0 * NS, dt: None }).unwrap();
    assert!(*r.series("pe_a").last().unwrap() < 1e-3);
}

#[test]
fn chevron_on_resonance_has_vacuum_rabi_period() {
    let m = lossless(model_4k());
    let map = rabi_chevron_scan(&m, &[0.0, mhz(6.0)], 200.0 * NS, 0.5 * NS, ChevronVariant::Excited).unwrap();
    // resonant: P_e = cos^2(g t), first minimum at pi / (2 g) = 50 ns
    let row = &map.pe[0];
    let k = (50.0 / 0.5) as usize;
    assert!(row[k] < 1e-6);
    assert!((row[2 * k] - 1.0).abs() < 1e-6);
    // detuned: minimum excitation is Delta^2 / (Delta^2 + 4 g^2)
    let (d, g) = (mhz(6.0), mhz(5.0));
    let floor = d * d / (d * d + 4.0 * g * g);
    let min = map.pe[1].iter().cloned().fold(1.0, f64::min);
    assert!((min - floor).abs() < 2e-3, "{min} vs {floor}");
}

#[test]
fn reset_model_swaps_and_settles() {
    let mut q = common::qubit(7.429, 1.08, 0.0);
    q.kappa = 0.0;
    let closed = ResetModel {
        qubit: q,
        resonator_kappa: 0.0,
        resonator_occupancy: 0.0,
        coupling: ResetModel::coupling_for_period(3.2 * NS),
        fock_cutoff: Some(4),
    };
    let (sys, p) = readout_reset_protocol(&closed, 6.4 * NS);
    let r = run_schedule(&sys, &p, RunOptions { sample_interval: 0.1 * NS, dt: Some(0.002 * NS) }).unwrap();
    let pe = r.series("pe_a");
    assert!((pe[0] - 1.0).abs() < 1e-9);
    assert!(pe[16] < 1e-4, "{}", pe[16]);
    assert!((pe[32] - 1.0).abs() < 1e-4);
    assert!((pe[64] - 1.0).abs() < 1e-4);

    let lossy = ResetModel {
        resonator_kappa: 1.0 / (60.0 * NS),
        fock_cutoff: None,
        ..closed
    };
    let (sys, p) = readout_reset_protocol(&lossy, 1.0 * US);
    let r = run_schedule(&sys, &p, RunOptions { sample_interval: 10.0 * NS, dt: None }).unwrap();
    assert!(*r.series("pe_a").last().unwrap() < 0.01);
}

#[test]
fn reset_bath_can_be_tuned_to_a_residual_excitation() {
    let warm = ResetModel {
        qubit: common::qubit(7.429, 1.08, 0.52),
        resonator_kappa: 1.0 / (60.0 * NS),
        resonator_occupancy: 0.0,
        coupling: ResetModel::coupling_for_period(3.2 * NS),
        fock_cutoff: None,
    };
    let n = warm.occupancy_for_steady_pe(0.111).unwrap();
    let tuned = ResetModel {
        resonator_occupancy: n,
        ..warm
    };
    assert!((tuned.steady_pe().unwrap() - 0.111).abs() < 1e-6);
}
