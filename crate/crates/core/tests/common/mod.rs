#![allow(dead_code)]

use hotlink_core::dynamics::{Coupling, QubitParams};
use hotlink_core::protocols::{ChannelParams, SystemModel};
use hotlink_core::units::{ghz, mhz, NS, US};

/// One row of the temperature ladder: hot-stage temperature, qubit A and B
/// lifetimes and bath occupancies, and the mode occupancy with the coupler
/// on and off.
pub struct LadderRow {
    pub t_hot: f64,
    pub t1_a: f64,
    pub n_a: f64,
    pub t1_b: f64,
    pub n_b: f64,
    pub n_on: f64,
    pub n_off: f64,
}

pub const LADDER: [LadderRow; 5] = [
    LadderRow { t_hot: 0.83, t1_a: 2.74, n_a: 0.13, t1_b: 3.54, n_b: 0.14, n_on: 0.016, n_off: 0.48 },
    LadderRow { t_hot: 1.0, t1_a: 2.80, n_a: 0.16, t1_b: 3.48, n_b: 0.16, n_on: 0.026, n_off: 0.52 },
    LadderRow { t_hot: 2.0, t1_a: 2.05, n_a: 0.26, t1_b: 2.75, n_b: 0.25, n_on: 0.032, n_off: 0.92 },
    LadderRow { t_hot: 3.0, t1_a: 1.37, n_a: 0.36, t1_b: 1.83, n_b: 0.36, n_on: 0.040, n_off: 1.92 },
    LadderRow { t_hot: 4.0, t1_a: 1.08, n_a: 0.52, t1_b: 1.30, n_b: 0.42, n_on: 0.059, n_off: 5.64 },
];

pub fn qubit(frequency_ghz: f64, t1_us: f64, n: f64) -> QubitParams {
    QubitParams {
        frequency: ghz(frequency_ghz),
        anharmonicity: mhz(-204.0),
        levels: QubitParams::DEFAULT_LEVELS,
        kappa: 1.0 / (t1_us * US),
        occupancy: n,
        dephasing: 0.0,
    }
}

pub fn model(row: &LadderRow) -> SystemModel {
    SystemModel {
        qubits: vec![qubit(7.429, row.t1_a, row.n_a), qubit(7.538, row.t1_b, row.n_b)],
        mode_frequency: ghz(7.48),
        channel: ChannelParams {
            kappa_intrinsic: 1.0 / (820.0 * NS),
            kappa_d_on: 1.0 / (9.6 * NS),
            kappa_d_off: 0.0,
            warm_occupancy: row.n_off,
            cooled_occupancy: Some(row.n_on),
            cold_occupancy: 0.0,
        },
        coupling: Coupling::new(mhz(5.0), mhz(5.0)),
        fock_cutoff: None,
    }
}

pub fn model_4k() -> SystemModel {
    model(&LADDER[4])
}

/// Same couplings and frequencies with every loss and bath removed.
pub fn lossless(mut m: SystemModel) -> SystemModel {
    for q in &mut m.qubits {
        q.kappa = 0.0;
        q.occupancy = 0.0;
    }
    m.channel = ChannelParams {
        kappa_intrinsic: 0.0,
        kappa_d_on: 0.0,
        kappa_d_off: 0.0,
        warm_occupancy: 0.0,
        cooled_occupancy: None,
        cold_occupancy: 0.0,
    };
    m.fock_cutoff = Some(4);
    m
}
