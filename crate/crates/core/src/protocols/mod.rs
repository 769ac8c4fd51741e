//! Time-domain experiments as piecewise-constant schedules over the
//! couplings, the dissipative coupler state and the qubit detunings.

mod calibrate;
mod experiments;
mod model;
mod schedule;

pub use calibrate::{
    bell_timing, single_excitation_propagator, transfer_timing, BellTiming, CouplingPattern, TransferTiming,
};
pub use experiments::{
    bell_protocol, cooling_protocol, default_bell_timing, photon_transfer_protocol, rabi_chevron_scan, readout_reset_protocol,
    rethermalization_protocol, run_bell, run_transfer, transfer_outputs, ChevronMap, ChevronVariant, ResetModel,
    RethermVariant, TransferInput,
};
pub use model::{ChannelParams, DCoupler, SystemModel};
pub use schedule::{
    initial_state, run_schedule, Axis, InitialState, Protocol, ProtocolResult, RunOptions, ScheduleSegment, StatePrep,
};
