use super::model::{DCoupler, SystemModel};
use crate::dynamics::{
    build_collapse_operators, build_hamiltonian, default_time_step, embed, evolve_with, ladder, number, steady_state,
    Coupling, DensityMatrix, Liouvillian, QubitParams, Space,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_expm, SparseMatrix, C64, I};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Ideal, instantaneous operation applied at the start of a segment.
/// Qubits are indexed 0 (A) and 1 (B); rotations act on the `{0, 1}` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StatePrep {
    /// Replaces the qubit by its ground state.
    GroundReset { qubit: usize },
    Rotation { qubit: usize, axis: Axis, angle: f64 },
    /// `|n> -> exp(-i n angle) |n>`.
    VirtualZ { qubit: usize, angle: f64 },
    /// Closed exchange with the mode; `fraction = 1` is a full swap.
    Exchange { qubit: usize, fraction: f64 },
}

impl StatePrep {
    pub fn pi(qubit: usize) -> Self {
        StatePrep::Rotation {
            qubit,
            axis: Axis::X,
            angle: std::f64::consts::PI,
        }
    }

    pub fn half_pi(qubit: usize, axis: Axis) -> Self {
        StatePrep::Rotation {
            qubit,
            axis,
            angle: std::f64::consts::FRAC_PI_2,
        }
    }

    fn qubit(&self) -> usize {
        match *self {
            StatePrep::GroundReset { qubit }
            | StatePrep::Rotation { qubit, .. }
            | StatePrep::VirtualZ { qubit, .. }
            | StatePrep::Exchange { qubit, .. } => qubit,
        }
    }
}

/// Piecewise-constant control settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub duration: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub d_coupler: DCoupler,
    /// Qubit detunings from the mode, rad/s.
    pub qubit_detunings: [f64; 2],
    pub initial_ops: Vec<StatePrep>,
}

impl ScheduleSegment {
    pub fn new(duration: f64, g_a: f64, g_b: f64, d_coupler: DCoupler) -> Self {
        Self {
            duration,
            g_a,
            g_b,
            d_coupler,
            qubit_detunings: [0.0; 2],
            initial_ops: Vec::new(),
        }
    }

    pub fn with_ops(mut self, ops: Vec<StatePrep>) -> Self {
        self.initial_ops = ops;
        self
    }

    pub fn with_detunings(mut self, detunings: [f64; 2]) -> Self {
        self.qubit_detunings = detunings;
        self
    }

    fn validate(&self, qubits: usize) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", format!("must be >= 0, got {}", self.duration)));
        }
        if let Some(op) = self.initial_ops.iter().find(|op| op.qubit() >= qubits) {
            return Err(Error::invalid("initial_ops", format!("{op:?} targets a missing qubit")));
        }
        Ok(())
    }
}

/// Where a schedule starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Every element in its ground state.
    Ground,
    /// Joint steady state with the given couplings, qubits on resonance.
    /// A model without any dissipation starts from the ground state.
    Steady { d_coupler: DCoupler, coupling: Coupling },
    /// Each element in equilibrium with its own bath, uncoupled.
    Product { d_coupler: DCoupler },
    Explicit(DensityMatrix),
}

/// A named schedule with its starting state.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub name: String,
    pub initial: InitialState,
    pub segments: Vec<ScheduleSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub sample_interval: f64,
    /// Overrides the default RK4 step.
    pub dt: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sample_interval: 1e-9,
            dt: None,
        }
    }
}

/// Sampled observables and the final joint state.
#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub times: Vec<f64>,
    /// `pe_a`, `pe_b` (when present) and `n_c`.
    pub observables: BTreeMap<String, Vec<f64>>,
    pub final_state: DensityMatrix,
}

impl ProtocolResult {
    pub fn series(&self, name: &str) -> &[f64] {
        self.observables.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

const QUBIT_NAMES: [&str; 2] = ["pe_a", "pe_b"];

/// Runs `protocol` on `model`.
pub fn run_schedule(model: &SystemModel, protocol: &Protocol, opts: RunOptions) -> Result<ProtocolResult> {
    model.validate()?;
    let nq = model.qubits.len();
    for seg in &protocol.segments {
        seg.validate(nq)?;
    }
    let mut rho = initial_state(model, protocol)?;
    let space = rho.space().clone();
    let cutoff = *space.dims.last().expect("mode present");

    let observables = observables_for(model, &space);
    let mut result = ProtocolResult {
        times: Vec::new(),
        observables: observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
        final_state: rho.clone(),
    };
    if protocol.segments.is_empty() {
        record(&mut result, &observables, 0.0, &rho);
        return Ok(result);
    }
    let mut t0 = 0.0;
    for (k, seg) in protocol.segments.iter().enumerate() {
        for op in &seg.initial_ops {
            rho = apply_prep(&rho, op, model)?;
        }
        let qubits = model.qubits_at(seg.qubit_detunings);
        let mode = model.mode(seg.d_coupler, cutoff)?;
        let coupling = Coupling::new(seg.g_a, seg.g_b);
        let h = build_hamiltonian(&qubits, Some(&mode), &coupling, model.mode_frequency)?;
        let ops = build_collapse_operators(&qubits, Some(&mode))?;
        let liouvillian = Liouvillian::new(&h, &ops)?;
        let dt = opts
            .dt
            .unwrap_or_else(|| default_time_step(&qubits, Some(&mode), &coupling, model.mode_frequency));
        let skip_first = k > 0;
        rho = evolve_with(&rho, &liouvillian, seg.duration, dt, opts.sample_interval, |t, s| {
            if skip_first && t == 0.0 {
                return Ok(());
            }
            result.times.push(t0 + t);
            for (name, obs) in &observables {
                result.observables.get_mut(name).expect("declared").push(s.expectation(obs));
            }
            Ok(())
        })?;
        t0 += seg.duration;
    }
    result.final_state = rho;
    Ok(result)
}

/// The state `protocol` starts from, in the Hilbert space its run uses.
/// Reusing it as an explicit initial state leaves the run unchanged.
pub fn initial_state(model: &SystemModel, protocol: &Protocol) -> Result<DensityMatrix> {
    model.validate()?;
    let (start_occupancy, explicit_cutoff) = initial_occupancy(model, &protocol.initial)?;
    let cutoff = match model.fock_cutoff {
        Some(c) => c,
        None => {
            let peak = peak_occupancy(model, &protocol.segments, start_occupancy)?;
            model.cutoff_for(peak).max(explicit_cutoff)
        }
    };
    prepare_initial(model, &protocol.initial, &space_for(model, cutoff))
}

fn record(result: &mut ProtocolResult, observables: &[(String, SparseMatrix)], t: f64, rho: &DensityMatrix) {
    result.times.push(t);
    for (name, obs) in observables {
        let v = crate::dynamics::expectation(rho, obs).unwrap_or(f64::NAN);
        result.observables.get_mut(name).expect("declared").push(v);
    }
}

pub(crate) fn space_for(model: &SystemModel, cutoff: usize) -> Space {
    let mut dims: Vec<usize> = model.qubits.iter().map(|q| q.levels).collect();
    dims.push(cutoff);
    Space::new(dims)
}

/// Projector on a qubit's excited levels.
pub(crate) fn excited_projector(levels: usize) -> SparseMatrix {
    let diag: Vec<C64> = (0..levels).map(|n| C64::new(if n > 0 { 1.0 } else { 0.0 }, 0.0)).collect();
    SparseMatrix::from_diagonal(&diag)
}

fn observables_for(model: &SystemModel, space: &Space) -> Vec<(String, SparseMatrix)> {
    let mut out: Vec<(String, SparseMatrix)> = model
        .qubits
        .iter()
        .enumerate()
        .map(|(k, q)| (QUBIT_NAMES[k].to_string(), embed(&excited_projector(q.levels), k, space)))
        .collect();
    let cutoff = *space.dims.last().expect("mode present");
    out.push(("n_c".into(), embed(&number(cutoff), model.qubits.len(), space)));
    out
}

/// Mean photon number the run starts with, and the cutoff an explicit state
/// already carries.
fn initial_occupancy(model: &SystemModel, init: &InitialState) -> Result<(f64, usize)> {
    Ok(match init {
        InitialState::Ground => (0.0, 2),
        InitialState::Steady { d_coupler, .. } | InitialState::Product { d_coupler } => {
            (model.channel.bath(*d_coupler)?.occupancy, 2)
        }
        InitialState::Explicit(rho) => {
            let dims = &rho.space().dims;
            let cutoff = *dims.last().expect("non-empty space");
            let n = crate::dynamics::expectation(rho, &embed(&number(cutoff), dims.len() - 1, rho.space()))?;
            (n, cutoff)
        }
    })
}

/// Largest mode occupancy the thermal relaxation of the schedule can reach.
fn peak_occupancy(model: &SystemModel, segments: &[ScheduleSegment], start: f64) -> Result<f64> {
    let mut n = start;
    let mut peak = start;
    for seg in segments {
        let bath = model.channel.bath(seg.d_coupler)?;
        n = bath.occupancy + (n - bath.occupancy) * (-bath.kappa * seg.duration).exp();
        peak = peak.max(n);
    }
    Ok(peak)
}

fn prepare_initial(model: &SystemModel, init: &InitialState, space: &Space) -> Result<DensityMatrix> {
    match init {
        InitialState::Ground => Ok(DensityMatrix::ground(space.clone())),
        InitialState::Explicit(rho) => {
            if rho.space() == space {
                Ok(rho.clone())
            } else {
                rho.pad_to(space)
            }
        }
        InitialState::Product { d_coupler } => {
            let mode = model.mode(*d_coupler, *space.dims.last().expect("mode"))?;
            let mut rho = thermal(mode.occupancy, mode.fock_cutoff)?;
            for q in model.qubits.iter().rev() {
                rho = thermal_qubit(q)?.tensor(&rho);
            }
            Ok(rho)
        }
        InitialState::Steady { d_coupler, coupling } => {
            let bath = model.channel.bath(*d_coupler)?;
            let own = model.cutoff_for(bath.occupancy).min(*space.dims.last().expect("mode"));
            let qubits = model.qubits_at([0.0; 2]);
            let mode = model.mode(*d_coupler, own)?;
            let h = build_hamiltonian(&qubits, Some(&mode), coupling, model.mode_frequency)?;
            let ops = build_collapse_operators(&qubits, Some(&mode))?;
            if ops.is_empty() {
                // zero-temperature limit of a closed system
                return Ok(DensityMatrix::ground(space.clone()));
            }
            let ss = steady_state(&h, &ops, &Space::of(&qubits, Some(&mode)))?;
            if ss.degenerate {
                log::warn!("initial steady state is degenerate; using the state reached from ground");
            }
            ss.rho.pad_to(space)
        }
    }
}

/// Truncated geometric distribution with mean (before truncation) `n`.
pub(crate) fn thermal(n: f64, levels: usize) -> Result<DensityMatrix> {
    let r = if n > 0.0 { n / (n + 1.0) } else { 0.0 };
    let pops: Vec<f64> = (0..levels).map(|k| r.powi(k as i32)).collect();
    DensityMatrix::from_populations(&pops, Space::new(vec![levels]))
}

/// Equilibrium of a lone qubit with its bath. The ladder rates give the
/// same geometric distribution as a harmonic mode.
pub(crate) fn thermal_qubit(q: &QubitParams) -> Result<DensityMatrix> {
    thermal(q.occupancy, q.levels)
}

fn apply_prep(rho: &DensityMatrix, op: &StatePrep, model: &SystemModel) -> Result<DensityMatrix> {
    let space = rho.space().clone();
    match *op {
        StatePrep::GroundReset { qubit } => {
            let levels = space.dims[qubit];
            let mut out = crate::linalg::DMat::zeros(rho.dim(), rho.dim());
            for k in 0..levels {
                let lower = embed(
                    &SparseMatrix::from_triplets(levels, levels, [(0, k, C64::new(1.0, 0.0))]),
                    qubit,
                    &space,
                );
                let left = lower.mul_dense(rho.matrix());
                out += SparseMatrix::dense_mul(&left, &lower.adjoint());
            }
            DensityMatrix::new(out, space)
        }
        StatePrep::Rotation { qubit, axis, angle } => {
            let levels = space.dims[qubit];
            let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
            let mut t = vec![(0, 0, C64::new(c, 0.0)), (1, 1, C64::new(c, 0.0))];
            match axis {
                Axis::X => {
                    t.push((0, 1, C64::new(0.0, -s)));
                    t.push((1, 0, C64::new(0.0, -s)));
                }
                Axis::Y => {
                    t.push((0, 1, C64::new(-s, 0.0)));
                    t.push((1, 0, C64::new(s, 0.0)));
                }
            }
            t.extend((2..levels).map(|n| (n, n, C64::new(1.0, 0.0))));
            let u = embed(&SparseMatrix::from_triplets(levels, levels, t), qubit, &space);
            conjugate(rho, &u)
        }
        StatePrep::VirtualZ { qubit, angle } => {
            let levels = space.dims[qubit];
            let phases: Vec<C64> = (0..levels).map(|n| (-I * (n as f64 * angle)).exp()).collect();
            let u = embed(&SparseMatrix::from_diagonal(&phases), qubit, &space);
            conjugate(rho, &u)
        }
        StatePrep::Exchange { qubit, fraction } => {
            let mode_site = model.qubits.len();
            let b = embed(&ladder(space.dims[qubit]), qubit, &space);
            let a = embed(&ladder(space.dims[mode_site]), mode_site, &space);
            let gen = b.adjoint().matmul(&a).add(&b.matmul(&a.adjoint())).to_dense();
            let u = hermitian_expm(&gen, -I * (fraction * std::f64::consts::FRAC_PI_2));
            Ok(rho.transform(&u))
        }
    }
}

fn conjugate(rho: &DensityMatrix, u: &SparseMatrix) -> Result<DensityMatrix> {
    let left = u.mul_dense(rho.matrix());
    let out = SparseMatrix::dense_mul(&left, &u.adjoint());
    DensityMatrix::new(out, rho.space().clone())
}
