use super::calibrate::{bell_timing, transfer_timing, BellTiming, TransferTiming};
use super::model::{ChannelParams, DCoupler, SystemModel};
use super::schedule::{initial_state, run_schedule, Axis, InitialState, Protocol, ProtocolResult, RunOptions, ScheduleSegment, StatePrep};
use crate::dynamics::{Coupling, DensityMatrix, QubitParams};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

fn require_qubits(model: &SystemModel, n: usize) -> Result<()> {
    if model.qubits.len() < n {
        return Err(Error::invalid("qubits", format!("protocol needs {n} qubits")));
    }
    Ok(())
}

/// Qubit A, thermalised with its own bath, is brought into resonance with
/// the radiatively cooled mode while the coupler stays on.
pub fn cooling_protocol(model: &SystemModel, duration: f64) -> Protocol {
    Protocol {
        name: "cooling".into(),
        initial: InitialState::Product {
            d_coupler: DCoupler::On,
        },
        segments: vec![ScheduleSegment::new(duration, model.coupling.g_a, 0.0, DCoupler::On)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RethermVariant {
    /// Qubit decoupled from the mode.
    QubitAlone,
    /// Qubit resonantly coupled to the warming mode.
    Coupled,
}

/// From the ground state, the coupler is switched off and the qubit (alone
/// or coupled to the mode) heats back up.
pub fn rethermalization_protocol(model: &SystemModel, duration: f64, variant: RethermVariant) -> Protocol {
    let g = match variant {
        RethermVariant::QubitAlone => 0.0,
        RethermVariant::Coupled => model.coupling.g_a,
    };
    Protocol {
        name: format!("retherm-{}", if g == 0.0 { "alone" } else { "coupled" }),
        initial: InitialState::Ground,
        segments: vec![ScheduleSegment::new(duration, g, 0.0, DCoupler::Off)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChevronVariant {
    /// Qubit in `|1>`, mode in vacuum.
    Excited,
    /// Qubit in `|0>`, mode thermal at its coupler-off occupancy.
    WarmMode,
}

/// `pe[i][k]` is qubit A's excitation at `detunings[i]` and `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChevronMap {
    pub detunings: Vec<f64>,
    pub times: Vec<f64>,
    pub pe: Vec<Vec<f64>>,
}

/// Vacuum-Rabi map of qubit A against the mode over a detuning grid.
pub fn rabi_chevron_scan(
    model: &SystemModel,
    detunings: &[f64],
    duration: f64,
    sample_interval: f64,
    variant: ChevronVariant,
) -> Result<ChevronMap> {
    let single = model.qubit_a_only();
    let rows: Result<Vec<(Vec<f64>, Vec<f64>)>> = detunings
        .par_iter()
        .map(|&delta| {
            let (initial, ops) = match variant {
                ChevronVariant::Excited => (InitialState::Ground, vec![StatePrep::pi(0)]),
                ChevronVariant::WarmMode => (
                    InitialState::Product {
                        d_coupler: DCoupler::Off,
                    },
                    vec![StatePrep::GroundReset { qubit: 0 }],
                ),
            };
            let protocol = Protocol {
                name: "chevron".into(),
                initial,
                segments: vec![ScheduleSegment::new(duration, single.coupling.g_a, 0.0, DCoupler::Off)
                    .with_detunings([delta, 0.0])
                    .with_ops(ops)],
            };
            let r = run_schedule(
                &single,
                &protocol,
                RunOptions {
                    sample_interval,
                    dt: None,
                },
            )?;
            Ok((r.times.clone(), r.series("pe_a").to_vec()))
        })
        .collect();
    let rows = rows?;
    Ok(ChevronMap {
        detunings: detunings.to_vec(),
        times: rows.first().map(|r| r.0.clone()).unwrap_or_default(),
        pe: rows.into_iter().map(|r| r.1).collect(),
    })
}

/// Process-tomography input states prepared on the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferInput {
    Zero,
    One,
    Plus,
    PlusI,
}

impl TransferInput {
    pub const ALL: [TransferInput; 4] = [TransferInput::Zero, TransferInput::One, TransferInput::Plus, TransferInput::PlusI];

    pub fn preparation(self, qubit: usize) -> Vec<StatePrep> {
        match self {
            TransferInput::Zero => vec![],
            TransferInput::One => vec![StatePrep::pi(qubit)],
            TransferInput::Plus => vec![StatePrep::half_pi(qubit, Axis::Y)],
            TransferInput::PlusI => vec![StatePrep::Rotation {
                qubit,
                axis: Axis::X,
                angle: -FRAC_PI_2,
            }],
        }
    }
}

/// Release and catch: the input is written on qubit A, both couplings are
/// turned on with the coupler off for `timing.t_star`, and the transfer
/// phase is undone with a virtual Z on qubit B.
pub fn photon_transfer_protocol(model: &SystemModel, input: TransferInput, timing: &TransferTiming) -> Protocol {
    Protocol {
        name: "transfer".into(),
        initial: InitialState::Steady {
            d_coupler: DCoupler::On,
            coupling: model.coupling,
        },
        segments: vec![
            ScheduleSegment::new(timing.t_star, model.coupling.g_a, model.coupling.g_b, DCoupler::Off)
                .with_ops(input.preparation(0)),
            ScheduleSegment::new(0.0, 0.0, 0.0, DCoupler::Off).with_ops(vec![StatePrep::VirtualZ {
                qubit: 1,
                angle: timing.phase(),
            }]),
        ],
    }
}

/// Runs one transfer and returns the trajectory and qubit B's reduced state.
pub fn run_transfer(
    model: &SystemModel,
    input: TransferInput,
    timing: &TransferTiming,
    opts: RunOptions,
) -> Result<(ProtocolResult, DensityMatrix)> {
    require_qubits(model, 2)?;
    let result = run_schedule(model, &photon_transfer_protocol(model, input, timing), opts)?;
    let receiver = result.final_state.partial_trace(&[1])?;
    Ok((result, receiver))
}

/// Qubit B's output for each tomography input, computed in parallel.
pub fn transfer_outputs(
    model: &SystemModel,
    timing: Option<TransferTiming>,
) -> Result<(TransferTiming, Vec<(TransferInput, DensityMatrix)>)> {
    require_qubits(model, 2)?;
    let timing = timing.unwrap_or_else(|| transfer_timing(model.coupling.g_a, model.coupling.g_b));
    let opts = RunOptions {
        sample_interval: timing.t_star,
        dt: None,
    };
    // every input starts from the same cooled steady state
    let start = initial_state(model, &photon_transfer_protocol(model, TransferInput::Zero, &timing))?;
    let outputs: Result<Vec<(TransferInput, DensityMatrix)>> = TransferInput::ALL
        .par_iter()
        .map(|&input| {
            let mut protocol = photon_transfer_protocol(model, input, &timing);
            protocol.initial = InitialState::Explicit(start.clone());
            let result = run_schedule(model, &protocol, opts)?;
            Ok((input, result.final_state.partial_trace(&[1])?))
        })
        .collect();
    Ok((timing, outputs?))
}

/// Default Bell calibration: 1 ns grid, stages up to 150 ns, 0.999 target.
pub fn default_bell_timing(model: &SystemModel) -> BellTiming {
    bell_timing(model.coupling.g_a, model.coupling.g_b, 1e-9, 150e-9, 0.999)
}

/// Half of an excitation is released from A and caught by B in two
/// stages, leaving `(|01> + |10>)/sqrt(2)` in the lossless limit.
pub fn bell_protocol(model: &SystemModel, timing: &BellTiming) -> Protocol {
    let (a1, b1) = timing.first.couplings(model.coupling.g_a, model.coupling.g_b);
    let (a2, b2) = timing.second.couplings(model.coupling.g_a, model.coupling.g_b);
    Protocol {
        name: "bell".into(),
        initial: InitialState::Steady {
            d_coupler: DCoupler::On,
            coupling: model.coupling,
        },
        segments: vec![
            ScheduleSegment::new(timing.first_duration, a1, b1, DCoupler::Off).with_ops(vec![StatePrep::pi(0)]),
            ScheduleSegment::new(timing.second_duration, a2, b2, DCoupler::Off),
            ScheduleSegment::new(0.0, 0.0, 0.0, DCoupler::Off).with_ops(vec![StatePrep::VirtualZ {
                qubit: 1,
                angle: timing.phase,
            }]),
        ],
    }
}

/// Runs the Bell protocol and returns the two-qubit reduced state.
pub fn run_bell(
    model: &SystemModel,
    timing: Option<BellTiming>,
    opts: RunOptions,
) -> Result<(BellTiming, ProtocolResult, DensityMatrix)> {
    require_qubits(model, 2)?;
    let timing = timing.unwrap_or_else(|| default_bell_timing(model));
    let result = run_schedule(model, &bell_protocol(model, &timing), opts)?;
    let pair = result.final_state.partial_trace(&[0, 1])?;
    Ok((timing, result, pair))
}

/// Qubit exchanging with a lossy readout resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetModel {
    pub qubit: QubitParams,
    pub resonator_kappa: f64,
    pub resonator_occupancy: f64,
    /// Exchange rate, rad/s.
    pub coupling: f64,
    pub fock_cutoff: Option<usize>,
}

impl ResetModel {
    /// Coupling giving a full swap period of `period` seconds.
    pub fn coupling_for_period(period: f64) -> f64 {
        PI / period
    }

    pub fn system(&self) -> SystemModel {
        SystemModel {
            qubits: vec![self.qubit],
            mode_frequency: self.qubit.frequency,
            channel: ChannelParams {
                kappa_intrinsic: self.resonator_kappa,
                kappa_d_on: 0.0,
                kappa_d_off: 0.0,
                warm_occupancy: self.resonator_occupancy,
                cooled_occupancy: None,
                cold_occupancy: 0.0,
            },
            coupling: Coupling::new(self.coupling, 0.0),
            fock_cutoff: self.fock_cutoff,
        }
    }

    /// Qubit excitation in the joint steady state.
    pub fn steady_pe(&self) -> Result<f64> {
        let sys = self.system();
        let cutoff = sys.cutoff_for(self.resonator_occupancy);
        let qubits = sys.qubits_at([0.0; 2]);
        let mode = sys.mode(DCoupler::Off, cutoff)?;
        let h = crate::dynamics::build_hamiltonian(&qubits, Some(&mode), &sys.coupling, sys.mode_frequency)?;
        let ops = crate::dynamics::build_collapse_operators(&qubits, Some(&mode))?;
        let space = crate::dynamics::Space::of(&qubits, Some(&mode));
        let ss = crate::dynamics::steady_state(&h, &ops, &space)?;
        let pe = crate::dynamics::embed(&super::schedule::excited_projector(self.qubit.levels), 0, &space);
        crate::dynamics::expectation(&ss.rho, &pe)
    }

    /// Resonator occupancy whose steady state leaves the qubit at `target`.
    pub fn occupancy_for_steady_pe(&self, target: f64) -> Result<f64> {
        let at = |n: f64| -> Result<f64> {
            ResetModel {
                resonator_occupancy: n,
                ..*self
            }
            .steady_pe()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        if at(lo)? > target {
            return Err(Error::invalid("target", "below the zero-occupancy steady state"));
        }
        while at(hi)? < target {
            hi *= 2.0;
            if hi > 100.0 {
                return Err(Error::invalid("target", "not reachable by any occupancy"));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if at(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Qubit in `|1>` and resonator in vacuum, then free exchange.
pub fn readout_reset_protocol(model: &ResetModel, duration: f64) -> (SystemModel, Protocol) {
    let sys = model.system();
    let protocol = Protocol {
        name: "reset".into(),
        initial: InitialState::Ground,
        segments: vec![ScheduleSegment::new(duration, model.coupling, 0.0, DCoupler::Off).with_ops(vec![StatePrep::pi(0)])],
    };
    (sys, protocol)
}
