//! Strict TOML configuration layered over the bundled preset.

use crate::error::CliError;
use hotlink_core::circuit::{CircuitNetwork, DCouplerParams, FluxBias, LineSegment};
use hotlink_core::dynamics::{Coupling, QubitParams};
use hotlink_core::protocols::{ChannelParams, ResetModel, SystemModel};
use hotlink_core::tomography::ConfusionMatrix;
use hotlink_core::units::{ghz, mhz, NS, US};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const PRESET: &str = include_str!("../presets/paper.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub t_hot_k: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub circuit: CircuitConfig,
    pub system: SystemConfig,
    pub ladder: Vec<LadderRow>,
    pub run: RunConfig,
    pub cooling: CoolingConfig,
    pub retherm: RethermConfig,
    pub chevron: ChevronConfig,
    pub bell: BellConfig,
    pub reset: ResetConfig,
    pub scan: ScanConfig,
    pub tomography: TomographyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub inductance_per_m: f64,
    pub capacitance_per_m: f64,
    pub length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerConfig {
    pub series_capacitance_f: f64,
    pub parasitic_capacitance_f: f64,
    pub zero_flux_inductance_h: f64,
    pub parasitic_resistance_ohm: f64,
    pub load_resistance_ohm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub target_ghz: f64,
    pub band_ghz: [f64; 2],
    pub off_search: [f64; 2],
    pub on_search: [f64; 2],
    pub sweep: SweepConfig,
    pub cable: LineConfig,
    pub alice_cpw: LineConfig,
    pub bob_cpw: LineConfig,
    pub coupler: CouplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub mode_ghz: f64,
    pub idle_a_ghz: f64,
    pub idle_b_ghz: f64,
    pub anharmonicity_mhz: f64,
    pub levels: usize,
    pub g_a_mhz: f64,
    pub g_b_mhz: f64,
    pub dephasing_per_us: f64,
    pub intrinsic_lifetime_ns: f64,
    pub d_on_lifetime_ns: f64,
    pub d_off_lifetime_ns: f64,
    pub cold_occupancy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_cutoff: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderRow {
    pub t_hot_k: f64,
    pub t1_a_us: f64,
    pub n_a: f64,
    pub t1_b_us: f64,
    pub n_b: f64,
    pub n_on_a: f64,
    pub n_off_a: f64,
    pub n_on_b: f64,
    pub n_off_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sample_interval_ns: f64,
    /// Gaussian readout noise added to traces before fitting, drawn from
    /// `seed`.
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingConfig {
    pub duration_ns: f64,
    pub fit_window_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RethermConfig {
    pub duration_us: f64,
    pub fit_window_us: f64,
    pub sample_interval_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChevronKind {
    Excited,
    WarmMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChevronConfig {
    pub variant: ChevronKind,
    pub detuning_span_mhz: f64,
    pub detuning_points: usize,
    pub duration_ns: f64,
    pub sample_interval_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellConfig {
    pub grid_ns: f64,
    pub max_stage_ns: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetConfig {
    pub resonator_lifetime_ns: f64,
    pub swap_period_ns: f64,
    pub duration_ns: f64,
    pub resonator_occupancy: f64,
    pub sample_interval_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitChoice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplerState {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub qubit: QubitChoice,
    pub coupler: CouplerState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_pe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub occupancy_min: f64,
    pub occupancy_max: f64,
    pub occupancy_points: usize,
    pub kappa_lifetimes_ns: Vec<f64>,
    pub tolerance: f64,
    pub surfaces: Vec<SurfaceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    pub confusion_error_a: f64,
    pub confusion_error_b: f64,
}

/// Recursively overlays `over` onto `base`; tables merge, everything else
/// replaces.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_toml(text: &str, origin: &str) -> Result<toml::Value, CliError> {
    text.parse::<toml::Table>()
        .map(toml::Value::Table)
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Parses `key=value`, where `value` is a TOML literal or a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{spec}`")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Usage(format!("invalid key `{key}`")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_owned()),
    };
    Ok((path, value))
}

fn apply_override(root: &mut toml::Value, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let mut node = root;
    for (depth, key) in path.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not a table", path[..depth].join("."))))?;
        if depth + 1 == path.len() {
            if !table.contains_key(key) && !OPTIONAL_KEYS.contains(&path.join(".").as_str()) {
                return Err(CliError::Config(format!("unknown key `{}`", path.join("."))));
            }
            table.insert(key.clone(), value);
            return Ok(());
        }
        node = table
            .get_mut(key)
            .ok_or_else(|| CliError::Config(format!("unknown key `{}`", path[..=depth].join("."))))?;
    }
    unreachable!("path is non-empty")
}

const OPTIONAL_KEYS: &[&str] = &["system.fock_cutoff"];

/// Loads `path` (or only the preset when `None`) and applies overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut root = parse_toml(PRESET, "preset")?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        let user = parse_toml(&text, &p.display().to_string())?;
        // arrays of tables replace the preset's wholesale
        merge(&mut root, user);
    }
    for spec in overrides {
        let (key, value) = parse_override(spec)?;
        apply_override(&mut root, &key, value)?;
    }
    let cfg: ExperimentConfig = root
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_owned()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}` must be finite and > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}` must be finite and >= 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.row()?;
        let c = &self.circuit;
        positive("circuit.target_ghz", c.target_ghz)?;
        for (name, l) in [("cable", &c.cable), ("alice_cpw", &c.alice_cpw), ("bob_cpw", &c.bob_cpw)] {
            positive(&format!("circuit.{name}.inductance_per_m"), l.inductance_per_m)?;
            positive(&format!("circuit.{name}.capacitance_per_m"), l.capacitance_per_m)?;
            positive(&format!("circuit.{name}.length_m"), l.length_m)?;
        }
        let d = &c.coupler;
        positive("circuit.coupler.series_capacitance_f", d.series_capacitance_f)?;
        positive("circuit.coupler.parasitic_capacitance_f", d.parasitic_capacitance_f)?;
        positive("circuit.coupler.zero_flux_inductance_h", d.zero_flux_inductance_h)?;
        if !(d.parasitic_resistance_ohm > 0.0) {
            return Err(CliError::Config("`circuit.coupler.parasitic_resistance_ohm` must be > 0".into()));
        }
        non_negative("circuit.coupler.load_resistance_ohm", d.load_resistance_ohm)?;
        if !(c.band_ghz[0] > 0.0 && c.band_ghz[1] > c.band_ghz[0]) {
            return Err(CliError::Config("`circuit.band_ghz` must be an increasing positive pair".into()));
        }
        if c.sweep.points < 2 {
            return Err(CliError::Config("`circuit.sweep.points` must be at least 2".into()));
        }
        let s = &self.system;
        for (k, v) in [
            ("system.mode_ghz", s.mode_ghz),
            ("system.idle_a_ghz", s.idle_a_ghz),
            ("system.idle_b_ghz", s.idle_b_ghz),
            ("system.intrinsic_lifetime_ns", s.intrinsic_lifetime_ns),
            ("system.d_on_lifetime_ns", s.d_on_lifetime_ns),
            ("system.d_off_lifetime_ns", s.d_off_lifetime_ns),
        ] {
            positive(k, v)?;
        }
        non_negative("system.g_a_mhz", s.g_a_mhz)?;
        non_negative("system.g_b_mhz", s.g_b_mhz)?;
        non_negative("system.dephasing_per_us", s.dephasing_per_us)?;
        non_negative("system.cold_occupancy", s.cold_occupancy)?;
        if s.levels < 2 {
            return Err(CliError::Config("`system.levels` must be at least 2".into()));
        }
        for (i, r) in self.ladder.iter().enumerate() {
            let key = |f: &str| format!("ladder[{i}].{f}");
            positive(&key("t_hot_k"), r.t_hot_k)?;
            positive(&key("t1_a_us"), r.t1_a_us)?;
            positive(&key("t1_b_us"), r.t1_b_us)?;
            for (f, v) in [("n_a", r.n_a), ("n_b", r.n_b), ("n_on_a", r.n_on_a), ("n_off_a", r.n_off_a), ("n_on_b", r.n_on_b), ("n_off_b", r.n_off_b)] {
                non_negative(&key(f), v)?;
            }
        }
        positive("run.sample_interval_ns", self.run.sample_interval_ns)?;
        non_negative("run.noise_sigma", self.run.noise_sigma)?;
        positive("cooling.duration_ns", self.cooling.duration_ns)?;
        positive("cooling.fit_window_ns", self.cooling.fit_window_ns)?;
        positive("retherm.duration_us", self.retherm.duration_us)?;
        positive("retherm.fit_window_us", self.retherm.fit_window_us)?;
        positive("retherm.sample_interval_ns", self.retherm.sample_interval_ns)?;
        positive("chevron.duration_ns", self.chevron.duration_ns)?;
        positive("chevron.sample_interval_ns", self.chevron.sample_interval_ns)?;
        non_negative("chevron.detuning_span_mhz", self.chevron.detuning_span_mhz)?;
        if self.chevron.detuning_points == 0 {
            return Err(CliError::Config("`chevron.detuning_points` must be at least 1".into()));
        }
        positive("bell.grid_ns", self.bell.grid_ns)?;
        positive("bell.max_stage_ns", self.bell.max_stage_ns)?;
        positive("bell.threshold", self.bell.threshold)?;
        positive("reset.resonator_lifetime_ns", self.reset.resonator_lifetime_ns)?;
        positive("reset.swap_period_ns", self.reset.swap_period_ns)?;
        positive("reset.duration_ns", self.reset.duration_ns)?;
        positive("reset.sample_interval_ns", self.reset.sample_interval_ns)?;
        non_negative("reset.resonator_occupancy", self.reset.resonator_occupancy)?;
        positive("scan.occupancy_min", self.scan.occupancy_min)?;
        positive("scan.occupancy_max", self.scan.occupancy_max)?;
        positive("scan.tolerance", self.scan.tolerance)?;
        if self.scan.occupancy_max <= self.scan.occupancy_min || self.scan.occupancy_points < 2 {
            return Err(CliError::Config("`scan.occupancy_*` must describe an increasing grid of >= 2 points".into()));
        }
        for (i, v) in self.scan.kappa_lifetimes_ns.iter().enumerate() {
            positive(&format!("scan.kappa_lifetimes_ns[{i}]"), *v)?;
        }
        for (k, v) in [("tomography.confusion_error_a", self.tomography.confusion_error_a), ("tomography.confusion_error_b", self.tomography.confusion_error_b)] {
            if !(0.0..0.5).contains(&v) {
                return Err(CliError::Config(format!("`{k}` must lie in [0, 0.5), got {v}")));
            }
        }
        Ok(())
    }

    /// Ladder row for the selected hot-stage temperature.
    pub fn row(&self) -> Result<&LadderRow, CliError> {
        self.row_for(self.t_hot_k)
    }

    pub fn row_for(&self, t_hot: f64) -> Result<&LadderRow, CliError> {
        self.ladder
            .iter()
            .find(|r| (r.t_hot_k - t_hot).abs() < 1e-9)
            .ok_or_else(|| CliError::Config(format!("`t_hot_k` = {t_hot} has no ladder row")))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn network(&self) -> Result<CircuitNetwork, CliError> {
        let c = &self.circuit;
        let line = |l: &LineConfig| LineSegment::new(l.inductance_per_m, l.capacitance_per_m, l.length_m);
        let d = &c.coupler;
        let net = CircuitNetwork {
            alice_cpw: line(&c.alice_cpw)?,
            cable: line(&c.cable)?,
            bob_cpw: line(&c.bob_cpw)?,
            coupler: DCouplerParams {
                series_capacitance: d.series_capacitance_f,
                parasitic_capacitance: d.parasitic_capacitance_f,
                zero_flux_inductance: d.zero_flux_inductance_h,
                parasitic_resistance: d.parasitic_resistance_ohm,
                load_resistance: d.load_resistance_ohm,
            },
            off_flux: FluxBias::new(0.5 * (c.off_search[0] + c.off_search[1]))?,
        };
        net.validate()?;
        Ok(net)
    }

    fn qubit(&self, frequency_ghz: f64, t1_us: f64, n: f64) -> QubitParams {
        QubitParams {
            frequency: ghz(frequency_ghz),
            anharmonicity: mhz(self.system.anharmonicity_mhz),
            levels: self.system.levels,
            kappa: 1.0 / (t1_us * US),
            occupancy: n,
            dephasing: self.system.dephasing_per_us / US,
        }
    }

    pub fn qubit_params(&self, row: &LadderRow, which: QubitChoice) -> QubitParams {
        match which {
            QubitChoice::A => self.qubit(self.system.idle_a_ghz, row.t1_a_us, row.n_a),
            QubitChoice::B => self.qubit(self.system.idle_b_ghz, row.t1_b_us, row.n_b),
        }
    }

    pub fn kappa_intrinsic(&self) -> f64 {
        1.0 / (self.system.intrinsic_lifetime_ns * NS)
    }

    pub fn kappa_d_on(&self) -> f64 {
        1.0 / (self.system.d_on_lifetime_ns * NS)
    }

    pub fn kappa_d_off(&self) -> f64 {
        1.0 / (self.system.d_off_lifetime_ns * NS)
    }

    /// Two-qubit model at `row`, with the channel as seen by qubit A.
    pub fn system_model(&self, row: &LadderRow) -> SystemModel {
        let s = &self.system;
        SystemModel {
            qubits: vec![self.qubit_params(row, QubitChoice::A), self.qubit_params(row, QubitChoice::B)],
            mode_frequency: ghz(s.mode_ghz),
            channel: ChannelParams {
                kappa_intrinsic: self.kappa_intrinsic(),
                kappa_d_on: self.kappa_d_on(),
                kappa_d_off: self.kappa_d_off(),
                warm_occupancy: row.n_off_a,
                cooled_occupancy: Some(row.n_on_a),
                cold_occupancy: s.cold_occupancy,
            },
            coupling: Coupling::new(mhz(s.g_a_mhz), mhz(s.g_b_mhz)),
            fock_cutoff: s.fock_cutoff,
        }
    }

    /// Single-qubit model for `which`, with that qubit's view of the channel.
    pub fn single_qubit_model(&self, row: &LadderRow, which: QubitChoice) -> SystemModel {
        let mut m = self.system_model(row);
        match which {
            QubitChoice::A => m.qubits.truncate(1),
            QubitChoice::B => {
                m.qubits = vec![m.qubits[1]];
                m.coupling = Coupling::new(m.coupling.g_b, 0.0);
                m.channel.warm_occupancy = row.n_off_b;
                m.channel.cooled_occupancy = Some(row.n_on_b);
            }
        }
        m
    }

    pub fn reset_model(&self, row: &LadderRow) -> ResetModel {
        ResetModel {
            qubit: self.qubit_params(row, QubitChoice::A),
            resonator_kappa: 1.0 / (self.reset.resonator_lifetime_ns * NS),
            resonator_occupancy: self.reset.resonator_occupancy,
            coupling: ResetModel::coupling_for_period(self.reset.swap_period_ns * NS),
            fock_cutoff: self.system.fock_cutoff,
        }
    }

    pub fn confusion(&self) -> Result<Option<Vec<ConfusionMatrix>>, CliError> {
        let t = &self.tomography;
        if t.confusion_error_a == 0.0 && t.confusion_error_b == 0.0 {
            return Ok(None);
        }
        Ok(Some(vec![ConfusionMatrix::symmetric(t.confusion_error_a)?, ConfusionMatrix::symmetric(t.confusion_error_b)?]))
    }
}
