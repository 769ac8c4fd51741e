//! Experiment dispatch: each experiment computes its result through the
//! core crate, writes its tables and returns named scalars.

use crate::config::{ChevronKind, CouplerState, ExperimentConfig, QubitChoice, SurfaceConfig};
use crate::error::CliError;
use crate::ledger::{Ledger, LedgerEntry};
use crate::output::{pauli_basis, qubit_basis, Artifacts, MatrixRecord};
use hotlink_core::analysis::{fit_exponential, star_readout, steady_scan, FitResult};
use hotlink_core::circuit::{find_modes, locate_flux_extremum, sweep_flux, CircuitNetwork, Extremum, FluxBias, FluxPoint, ModeSolution};
use hotlink_core::dynamics::DensityMatrix;
use hotlink_core::protocols::{
    bell_timing, cooling_protocol, rabi_chevron_scan, readout_reset_protocol, rethermalization_protocol, run_bell, run_schedule,
    run_transfer, transfer_outputs, transfer_timing, ChevronVariant, ProtocolResult, ResetModel, RethermVariant, RunOptions,
    SystemModel, TransferInput,
};
use hotlink_core::tomography::{bell_target, process_tomography, project_qubits, state_tomography, TomographySettings};
use hotlink_core::units::{ghz, mhz, to_ghz, to_mhz, NS, US};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub type Scalars = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Modes,
    KappaSweep,
    Chevron,
    Cooling,
    Retherm,
    Transfer,
    Bell,
    SteadyScan,
    Reset,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Modes,
        Experiment::KappaSweep,
        Experiment::Chevron,
        Experiment::Cooling,
        Experiment::Retherm,
        Experiment::Transfer,
        Experiment::Bell,
        Experiment::SteadyScan,
        Experiment::Reset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Modes => "modes",
            Experiment::KappaSweep => "kappa-sweep",
            Experiment::Chevron => "chevron",
            Experiment::Cooling => "cooling",
            Experiment::Retherm => "retherm",
            Experiment::Transfer => "transfer",
            Experiment::Bell => "bell",
            Experiment::SteadyScan => "steady-scan",
            Experiment::Reset => "reset",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            CliError::Usage(format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

pub const MODE_HEADERS: [&str; 5] = ["mode_index", "freq_GHz", "Q", "kappa_per_ns", "shift_MHz"];

fn mode_row(m: &ModeSolution) -> Vec<f64> {
    vec![m.mode_index as f64, to_ghz(m.omega_m), m.quality_factor, m.kappa * NS, to_mhz(m.freq_shift_vs_off)]
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

fn opts(sample_interval_ns: f64) -> RunOptions {
    RunOptions {
        sample_interval: sample_interval_ns * NS,
        dt: None,
    }
}

/// `values` with the configured readout noise; `stream` separates the
/// random sequences of traces within one experiment.
fn measured(cfg: &ExperimentConfig, values: &[f64], stream: u64) -> Vec<f64> {
    if cfg.run.noise_sigma == 0.0 {
        return values.to_vec();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, cfg.run.noise_sigma).expect("sigma validated non-negative");
    values.iter().map(|v| v + normal.sample(&mut rng)).collect()
}

fn window(times: &[f64], limit: f64) -> usize {
    times.iter().take_while(|&&t| t <= limit * (1.0 + 1e-12)).count()
}

fn fit_window(cfg: &ExperimentConfig, times: &[f64], pe: &[f64], limit: f64, stream: u64) -> Result<(Vec<f64>, FitResult), CliError> {
    let noisy = measured(cfg, pe, stream);
    let w = window(times, limit);
    let fit = fit_exponential(&times[..w], &noisy[..w])?;
    Ok((noisy, fit))
}

/// Flux bias at both extremes of the coupler dissipation, with the network's
/// off flux set to the located minimum.
#[derive(Debug, Clone)]
pub struct CircuitPoints {
    pub net: CircuitNetwork,
    pub off: FluxPoint,
    pub on: FluxPoint,
}

pub fn circuit_points(cfg: &ExperimentConfig) -> Result<CircuitPoints, CliError> {
    let mut net = cfg.network()?;
    let target = ghz(cfg.circuit.target_ghz);
    let off = locate_flux_extremum(&net, target, cfg.circuit.off_search, Extremum::Off)?;
    net.off_flux = FluxBias::new(off.phi_ratio)?;
    let on = locate_flux_extremum(&net, target, cfg.circuit.on_search, Extremum::On)?;
    Ok(CircuitPoints { net, off, on })
}

fn modes(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let p = circuit_points(cfg)?;
    let band = [ghz(cfg.circuit.band_ghz[0]), ghz(cfg.circuit.band_ghz[1])];
    for (label, point) in [("on", &p.on), ("off", &p.off)] {
        let found = find_modes(&p.net, FluxBias::new(point.phi_ratio)?, band)?;
        arts.csv(&format!("modes_{label}.csv"), &MODE_HEADERS, found.iter().map(mode_row))?;
    }
    Ok(Scalars::from([
        ("off_flux".into(), p.off.phi_ratio),
        ("on_flux".into(), p.on.phi_ratio),
        ("off_lifetime_ns".into(), 1.0 / p.off.mode.kappa / NS),
        ("on_lifetime_ns".into(), 1.0 / p.on.mode.kappa / NS),
        ("mode_freq_ghz".into(), to_ghz(p.on.mode.omega_m)),
        ("mode_index".into(), p.on.mode.mode_index as f64),
    ]))
}

fn kappa_sweep(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let p = circuit_points(cfg)?;
    let s = cfg.circuit.sweep;
    let points = sweep_flux(&p.net, &linspace(s.start, s.stop, s.points), ghz(cfg.circuit.target_ghz))?;
    arts.csv(
        "flux_sweep.csv",
        &["phi_ratio", "freq_GHz", "kappa_per_ns", "lifetime_ns", "shift_MHz"],
        points.iter().map(|f| {
            vec![f.phi_ratio, to_ghz(f.mode.omega_m), f.mode.kappa * NS, 1.0 / f.mode.kappa / NS, to_mhz(f.mode.freq_shift_vs_off)]
        }),
    )?;
    let shortest = points
        .iter()
        .max_by(|a, b| a.mode.kappa.total_cmp(&b.mode.kappa))
        .ok_or_else(|| CliError::Config("`circuit.sweep` tracks no mode near the target".into()))?;
    Ok(Scalars::from([
        ("min_lifetime_ns".into(), 1.0 / shortest.mode.kappa / NS),
        ("min_lifetime_flux".into(), shortest.phi_ratio),
        ("off_flux".into(), p.off.phi_ratio),
        ("on_flux".into(), p.on.phi_ratio),
    ]))
}

fn chevron(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let c = cfg.chevron;
    let model = cfg.system_model(cfg.row()?);
    let half = 0.5 * c.detuning_span_mhz;
    let detunings: Vec<f64> = linspace(-half, half, c.detuning_points).into_iter().map(mhz).collect();
    let variant = match c.variant {
        ChevronKind::Excited => ChevronVariant::Excited,
        ChevronKind::WarmMode => ChevronVariant::WarmMode,
    };
    let map = rabi_chevron_scan(&model, &detunings, c.duration_ns * NS, c.sample_interval_ns * NS, variant)?;
    let rows = map
        .detunings
        .iter()
        .zip(&map.pe)
        .flat_map(|(&d, row)| map.times.iter().zip(row).map(move |(&t, &pe)| vec![to_mhz(d), t / NS, pe]));
    arts.csv("chevron.csv", &["detuning_MHz", "time_ns", "pe_a"], rows)?;
    let all = map.pe.iter().flatten();
    Ok(Scalars::from([
        ("pe_max".into(), all.clone().copied().fold(f64::NEG_INFINITY, f64::max)),
        ("pe_min".into(), all.copied().fold(f64::INFINITY, f64::min)),
    ]))
}

/// Cooling trace and fit for the configured temperature.
pub fn cooling_run(cfg: &ExperimentConfig) -> Result<(ProtocolResult, Vec<f64>, FitResult), CliError> {
    let m = cfg.system_model(cfg.row()?).qubit_a_only();
    let r = run_schedule(&m, &cooling_protocol(&m, cfg.cooling.duration_ns * NS), opts(cfg.run.sample_interval_ns))?;
    let (noisy, fit) = fit_window(cfg, &r.times, r.series("pe_a"), cfg.cooling.fit_window_ns * NS, 1)?;
    Ok((r, noisy, fit))
}

fn cooling(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let (r, noisy, fit) = cooling_run(cfg)?;
    let pe = r.series("pe_a");
    let n_c = r.series("n_c");
    arts.csv(
        "cooling.csv",
        &["time_ns", "pe_a", "pe_measured", "pe_fit", "n_c"],
        (0..r.times.len()).map(|k| vec![r.times[k] / NS, pe[k], noisy[k], fit.evaluate(r.times[k]), n_c[k]]),
    )?;
    Ok(Scalars::from([
        ("pe_initial".into(), pe[0]),
        ("pe_final".into(), *pe.last().expect("non-empty trace")),
        ("tau_ns".into(), fit.tau() / NS),
        ("fit_offset".into(), fit.offset),
    ]))
}

pub struct RethermTraces {
    pub times: Vec<f64>,
    pub alone: Vec<f64>,
    pub coupled: Vec<f64>,
    pub fit_alone: FitResult,
    pub fit_coupled: FitResult,
    measured: [Vec<f64>; 2],
}

/// Both rethermalization variants for the configured temperature.
pub fn retherm_run(cfg: &ExperimentConfig) -> Result<RethermTraces, CliError> {
    let r = &cfg.retherm;
    let m = cfg.system_model(cfg.row()?).qubit_a_only();
    let run = |v| run_schedule(&m, &rethermalization_protocol(&m, r.duration_us * US, v), opts(r.sample_interval_ns));
    let alone = run(RethermVariant::QubitAlone)?;
    let coupled = run(RethermVariant::Coupled)?;
    let limit = r.fit_window_us * US;
    let (m_alone, fit_alone) = fit_window(cfg, &alone.times, alone.series("pe_a"), limit, 2)?;
    let (m_coupled, fit_coupled) = fit_window(cfg, &coupled.times, coupled.series("pe_a"), limit, 3)?;
    Ok(RethermTraces {
        alone: alone.series("pe_a").to_vec(),
        coupled: coupled.series("pe_a").to_vec(),
        times: alone.times,
        fit_alone,
        fit_coupled,
        measured: [m_alone, m_coupled],
    })
}

fn retherm(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let t = retherm_run(cfg)?;
    arts.csv(
        "retherm.csv",
        &["time_us", "pe_alone", "pe_coupled", "measured_alone", "measured_coupled", "fit_alone", "fit_coupled"],
        (0..t.times.len()).map(|k| {
            let s = t.times[k];
            vec![s / US, t.alone[k], t.coupled[k], t.measured[0][k], t.measured[1][k], t.fit_alone.evaluate(s), t.fit_coupled.evaluate(s)]
        }),
    )?;
    Ok(Scalars::from([
        ("tau_alone_us".into(), t.fit_alone.tau() / US),
        ("tau_coupled_us".into(), t.fit_coupled.tau() / US),
        ("pe_final_alone".into(), *t.alone.last().expect("non-empty trace")),
        ("pe_final_coupled".into(), *t.coupled.last().expect("non-empty trace")),
    ]))
}

fn settings(cfg: &ExperimentConfig) -> Result<TomographySettings, CliError> {
    Ok(TomographySettings {
        confusion: cfg.confusion()?,
    })
}

/// Process fidelity of the transfer with its receiver states.
pub struct TransferReport {
    pub t_star: f64,
    pub fidelity: f64,
    pub leakage: [f64; 4],
    pub chi: MatrixRecord,
    pub receivers: Vec<(TransferInput, DensityMatrix)>,
}

pub fn transfer_report(model: &SystemModel, settings: &TomographySettings) -> Result<TransferReport, CliError> {
    let (timing, outputs) = transfer_outputs(model, None)?;
    let states: [DensityMatrix; 4] = outputs
        .iter()
        .map(|(_, rho)| rho.clone())
        .collect::<Vec<_>>()
        .try_into()
        .expect("four tomography inputs");
    let tomo = process_tomography(&states, settings)?;
    Ok(TransferReport {
        t_star: timing.t_star,
        fidelity: tomo.process.fidelity(),
        leakage: tomo.leakage,
        chi: MatrixRecord::new(&tomo.process.chi, pauli_basis()),
        receivers: outputs,
    })
}

fn trajectory_rows(r: &ProtocolResult) -> impl Iterator<Item = Vec<f64>> + '_ {
    let (a, b, n) = (r.series("pe_a"), r.series("pe_b"), r.series("n_c"));
    (0..r.times.len()).map(move |k| vec![r.times[k] / NS, a[k], b[k], n[k]])
}

fn transfer(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let model = cfg.system_model(cfg.row()?);
    let report = transfer_report(&model, &settings(cfg)?)?;
    let timing = transfer_timing(model.coupling.g_a, model.coupling.g_b);
    let (traj, _) = run_transfer(&model, TransferInput::One, &timing, opts(cfg.run.sample_interval_ns))?;
    arts.csv("transfer.csv", &["time_ns", "pe_a", "pe_b", "n_c"], trajectory_rows(&traj))?;
    arts.json("chi.json", &report.chi)?;
    let receivers: BTreeMap<String, MatrixRecord> = report
        .receivers
        .iter()
        .map(|(input, rho)| Ok((format!("{input:?}"), MatrixRecord::new(&project_qubits(rho)?.0, qubit_basis(1)))))
        .collect::<Result<_, CliError>>()?;
    arts.json("receiver_states.json", &receivers)?;
    Ok(Scalars::from([
        ("t_star_ns".into(), report.t_star / NS),
        ("process_fidelity".into(), report.fidelity),
        ("max_leakage".into(), report.leakage.iter().copied().fold(0.0, f64::max)),
    ]))
}

#[derive(Serialize)]
struct BellSummary {
    first: String,
    first_ns: f64,
    second: String,
    second_ns: f64,
    phase: f64,
    lossless_fidelity: f64,
}

/// Bell-state fidelity for `model` with the grid-searched timing.
pub struct BellReport {
    pub fidelity: f64,
    pub leakage: f64,
    pub timing: hotlink_core::protocols::BellTiming,
    pub rho: MatrixRecord,
    pub result: ProtocolResult,
}

pub fn bell_report(cfg: &ExperimentConfig, model: &SystemModel, settings: &TomographySettings) -> Result<BellReport, CliError> {
    let b = cfg.bell;
    let timing = bell_timing(model.coupling.g_a, model.coupling.g_b, b.grid_ns * NS, b.max_stage_ns * NS, b.threshold);
    let (timing, result, pair) = run_bell(model, Some(timing), opts(cfg.run.sample_interval_ns))?;
    let tomo = state_tomography(&pair, settings, Some(&bell_target()))?;
    Ok(BellReport {
        fidelity: tomo.fidelity.expect("target given"),
        leakage: tomo.leakage,
        timing,
        rho: MatrixRecord::new(&tomo.rho, qubit_basis(2)),
        result,
    })
}

fn bell(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let model = cfg.system_model(cfg.row()?);
    let r = bell_report(cfg, &model, &settings(cfg)?)?;
    arts.csv("bell.csv", &["time_ns", "pe_a", "pe_b", "n_c"], trajectory_rows(&r.result))?;
    arts.json("rho.json", &r.rho)?;
    arts.json(
        "timing.json",
        &BellSummary {
            first: format!("{:?}", r.timing.first),
            first_ns: r.timing.first_duration / NS,
            second: format!("{:?}", r.timing.second),
            second_ns: r.timing.second_duration / NS,
            phase: r.timing.phase,
            lossless_fidelity: r.timing.fidelity,
        },
    )?;
    Ok(Scalars::from([
        ("fidelity".into(), r.fidelity),
        ("leakage".into(), r.leakage),
        ("total_ns".into(), r.timing.total() / NS),
    ]))
}

impl ExperimentConfig {
    /// Steady-scan template for one surface: the qubit on resonance with a
    /// mode of adjustable rate and occupancy.
    pub fn scan_template(&self, surface: &SurfaceConfig) -> Result<ResetModel, CliError> {
        let row = self.row()?;
        let mut qubit = self.qubit_params(row, surface.qubit);
        qubit.frequency = ghz(self.system.mode_ghz);
        let g = match surface.qubit {
            QubitChoice::A => self.system.g_a_mhz,
            QubitChoice::B => self.system.g_b_mhz,
        };
        Ok(ResetModel {
            qubit,
            resonator_kappa: self.star_kappa(surface.coupler),
            resonator_occupancy: self.ladder_occupancy(surface)?,
            coupling: mhz(g),
            fock_cutoff: self.system.fock_cutoff,
        })
    }

    /// Mode decay rate at which the contour is read off.
    pub fn star_kappa(&self, coupler: CouplerState) -> f64 {
        self.kappa_intrinsic()
            + match coupler {
                CouplerState::On => self.kappa_d_on(),
                CouplerState::Off => self.kappa_d_off(),
            }
    }

    pub fn ladder_occupancy(&self, s: &SurfaceConfig) -> Result<f64, CliError> {
        let r = self.row()?;
        Ok(match (s.qubit, s.coupler) {
            (QubitChoice::A, CouplerState::On) => r.n_on_a,
            (QubitChoice::A, CouplerState::Off) => r.n_off_a,
            (QubitChoice::B, CouplerState::On) => r.n_on_b,
            (QubitChoice::B, CouplerState::Off) => r.n_off_b,
        })
    }
}

fn label(s: &SurfaceConfig) -> String {
    let q = match s.qubit {
        QubitChoice::A => "a",
        QubitChoice::B => "b",
    };
    let c = match s.coupler {
        CouplerState::On => "on",
        CouplerState::Off => "off",
    };
    format!("{q}_{c}")
}

fn steady_scan_exp(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let sc = &cfg.scan;
    let grid = log_grid(sc.occupancy_min, sc.occupancy_max, sc.occupancy_points);
    let mut scalars = Scalars::new();
    for surface in &sc.surfaces {
        let template = cfg.scan_template(surface)?;
        let target = match surface.target_pe {
            Some(t) => t,
            None => template.steady_pe()?,
        };
        let star = template.resonator_kappa;
        let mut kappas: Vec<f64> = sc.kappa_lifetimes_ns.iter().map(|l| 1.0 / (l * NS)).collect();
        kappas.push(star);
        kappas.sort_by(f64::total_cmp);
        kappas.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
        let scan = steady_scan(&template, &grid, &kappas, target)?;
        let name = label(surface);
        let rows = scan
            .kappas
            .iter()
            .zip(&scan.pe)
            .flat_map(|(&k, row)| scan.occupancies.iter().zip(row).map(move |(&n, &pe)| vec![n, k * NS, pe]));
        arts.csv(&format!("surface_{name}.csv"), &["n_c", "kappa_per_ns", "pe"], rows)?;
        arts.csv(
            &format!("contour_{name}.csv"),
            &["n_c_1", "kappa_per_ns_1", "n_c_2", "kappa_per_ns_2"],
            scan.segments.iter().map(|[(n1, k1), (n2, k2)]| vec![*n1, k1 * NS, *n2, k2 * NS]),
        )?;
        let readout = star_readout(&scan, &template, star, sc.tolerance)?;
        scalars.insert(format!("{name}_target_pe"), target);
        let nan = f64::NAN;
        scalars.insert(format!("{name}_star_n"), readout.occupancy.unwrap_or(nan));
        scalars.insert(format!("{name}_star_lower"), readout.lower.unwrap_or(nan));
        scalars.insert(format!("{name}_star_upper"), readout.upper.unwrap_or(nan));
    }
    if let (Some(off), Some(on)) = (scalars.get("a_off_star_n"), scalars.get("a_on_star_n")) {
        scalars.insert("a_ratio".into(), off / on);
    }
    Ok(scalars)
}

fn reset(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let rm = cfg.reset_model(cfg.row()?);
    let (sys, protocol) = readout_reset_protocol(&rm, cfg.reset.duration_ns * NS);
    let r = run_schedule(&sys, &protocol, opts(cfg.reset.sample_interval_ns))?;
    let (pe, n_c) = (r.series("pe_a"), r.series("n_c"));
    arts.csv("reset.csv", &["time_ns", "pe_a", "n_c"], (0..r.times.len()).map(|k| vec![r.times[k] / NS, pe[k], n_c[k]]))?;
    Ok(Scalars::from([
        ("pe_final".into(), *pe.last().expect("non-empty trace")),
        ("pe_steady".into(), rm.steady_pe()?),
    ]))
}

/// Runs `exp` and writes its artifacts; no ledger row.
pub fn execute(exp: Experiment, cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    log::info!("running {} at {} K", exp.name(), cfg.t_hot_k);
    match exp {
        Experiment::Modes => modes(cfg, arts),
        Experiment::KappaSweep => kappa_sweep(cfg, arts),
        Experiment::Chevron => chevron(cfg, arts),
        Experiment::Cooling => cooling(cfg, arts),
        Experiment::Retherm => retherm(cfg, arts),
        Experiment::Transfer => transfer(cfg, arts),
        Experiment::Bell => bell(cfg, arts),
        Experiment::SteadyScan => steady_scan_exp(cfg, arts),
        Experiment::Reset => reset(cfg, arts),
    }
}

pub fn record(out: &Path, id: &str, cfg: &ExperimentConfig, scalars: Scalars, arts: Artifacts) -> Result<LedgerEntry, CliError> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let entry = LedgerEntry {
        experiment: id.to_owned(),
        config_hash: cfg.hash(),
        scalars,
        artifacts: arts.into_paths(),
        timestamp,
    };
    Ledger::in_dir(out).append(&entry)?;
    Ok(entry)
}

/// Runs `exp`, writing artifacts under `out/<name>/` and appending a row to
/// the ledger in `out`.
pub fn run_experiment(exp: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<LedgerEntry, CliError> {
    let mut arts = Artifacts::new(&out.join(exp.name()))?;
    let scalars = execute(exp, cfg, &mut arts)?;
    record(out, exp.name(), cfg, scalars, arts)
}
