//! Impedance model of the Alice CPW, cable and Bob CPW chain with the
//! flux-tunable dissipative coupler at Bob's end, and extraction of the
//! standing modes it supports.
//!
//! Internally every impedance is carried as a projective pair `(num, den)`
//! so that open terminations and quarter-wave poles never divide by zero.
//! A line segment then acts as a 2x2 transfer matrix on that pair.

use crate::error::{Error, Result};
use crate::linalg::{C64, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform transmission-line section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    /// H/m
    pub inductance_per_length: f64,
    /// F/m
    pub capacitance_per_length: f64,
    /// m
    pub length: f64,
}

impl LineSegment {
    /// Builds a segment. A zero length is accepted as the identity section.
    pub fn new(inductance_per_length: f64, capacitance_per_length: f64, length: f64) -> Result<Self> {
        let seg = Self {
            inductance_per_length,
            capacitance_per_length,
            length,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("inductance_per_length", self.inductance_per_length)?;
        positive("capacitance_per_length", self.capacitance_per_length)?;
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return Err(Error::invalid("length", format!("must be >= 0, got {}", self.length)));
        }
        Ok(())
    }

    pub fn characteristic_impedance(&self) -> f64 {
        (self.inductance_per_length / self.capacitance_per_length).sqrt()
    }

    pub fn phase_velocity(&self) -> f64 {
        1.0 / (self.inductance_per_length * self.capacitance_per_length).sqrt()
    }

    /// Propagation constant at `omega`, rad/m.
    pub fn beta(&self, omega: f64) -> f64 {
        omega * (self.inductance_per_length * self.capacitance_per_length).sqrt()
    }

    /// Frequency (Hz) at which the section is a quarter wavelength long.
    pub fn quarter_wave_frequency(&self) -> f64 {
        self.phase_velocity() / (4.0 * self.length)
    }

    fn transfer(&self, omega: f64, z: Proj) -> Proj {
        let z0 = self.characteristic_impedance();
        let bl = self.beta(omega) * self.length;
        let (s, c) = bl.sin_cos();
        Proj::new(
            z.num * c + z.den * I * (z0 * s),
            z.num * I * (s / z0) + z.den * c,
        )
    }
}

/// Load seen at the far end of a line section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Load(C64),
    Open,
}

impl Termination {
    pub const SHORT: Termination = Termination::Load(C64::new(0.0, 0.0));

    fn proj(self) -> Proj {
        match self {
            Termination::Load(z) => Proj::finite(z),
            Termination::Open => Proj::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        }
    }
}

/// Lumped coupler: `C_D || R_1` in series with `L_D || C_p` and the load `R_D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DCouplerParams {
    pub series_capacitance: f64,
    pub parasitic_capacitance: f64,
    pub zero_flux_inductance: f64,
    /// Ohm; `f64::INFINITY` removes the branch.
    pub parasitic_resistance: f64,
    /// Ohm; zero gives a lossless short to ground.
    pub load_resistance: f64,
}

impl DCouplerParams {
    pub fn validate(&self) -> Result<()> {
        positive("series_capacitance", self.series_capacitance)?;
        positive("parasitic_capacitance", self.parasitic_capacitance)?;
        positive("zero_flux_inductance", self.zero_flux_inductance)?;
        if !(self.parasitic_resistance > 0.0) {
            return Err(Error::invalid(
                "parasitic_resistance",
                format!("must be > 0, got {}", self.parasitic_resistance),
            ));
        }
        if !(self.load_resistance >= 0.0 && self.load_resistance.is_finite()) {
            return Err(Error::invalid(
                "load_resistance",
                format!("must be finite and >= 0, got {}", self.load_resistance),
            ));
        }
        if self.parasitic_capacitance >= self.series_capacitance {
            return Err(Error::invalid(
                "parasitic_capacitance",
                "must be smaller than series_capacitance",
            ));
        }
        Ok(())
    }

    /// SQUID inductance at the given flux.
    pub fn inductance(&self, flux: FluxBias) -> f64 {
        self.zero_flux_inductance / (PI * flux.phi_ratio()).cos()
    }

    /// Series resonance of `L_D` with `C_D`, in Hz.
    pub fn series_resonance(&self, flux: FluxBias) -> f64 {
        1.0 / (2.0 * PI * (self.inductance(flux) * self.series_capacitance).sqrt())
    }

    /// Parallel (plasma) resonance of `L_D` with `C_p`, in Hz.
    pub fn plasma_resonance(&self, flux: FluxBias) -> f64 {
        1.0 / (2.0 * PI * (self.inductance(flux) * self.parasitic_capacitance).sqrt())
    }

    /// Flux ratio in `(-0.5, 0]` whose plasma resonance sits at `freq_hz`.
    pub fn plasma_flux_for(&self, freq_hz: f64) -> Result<FluxBias> {
        let w = 2.0 * PI * freq_hz;
        let l = 1.0 / (w * w * self.parasitic_capacitance);
        let cosine = self.zero_flux_inductance / l;
        if !(cosine > 0.0 && cosine <= 1.0) {
            return Err(Error::invalid(
                "freq_hz",
                format!("plasma resonance at {freq_hz} Hz is out of the tunable range"),
            ));
        }
        FluxBias::new(-cosine.acos() / PI)
    }

    fn proj(&self, flux: FluxBias, omega: f64) -> Proj {
        let one = C64::new(1.0, 0.0);
        let conductance = if self.parasitic_resistance.is_infinite() {
            0.0
        } else {
            1.0 / self.parasitic_resistance
        };
        let cap = Proj::new(one, C64::new(conductance, omega * self.series_capacitance));
        let tank_admittance = C64::new(
            0.0,
            omega * self.parasitic_capacitance - 1.0 / (omega * self.inductance(flux)),
        );
        let tank = Proj::new(one, tank_admittance);
        cap.series(tank).series(Proj::finite(C64::new(self.load_resistance, 0.0)))
    }
}

/// Flux through the coupler SQUID in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FluxBias(f64);

impl FluxBias {
    pub fn new(phi_ratio: f64) -> Result<Self> {
        let cosine = (PI * phi_ratio).cos();
        if !(cosine > 1e-12) || !phi_ratio.is_finite() {
            return Err(Error::InvalidFlux { phi_ratio, cosine });
        }
        Ok(Self(phi_ratio))
    }

    pub fn phi_ratio(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FluxBias {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FluxBias> for f64 {
    fn from(f: FluxBias) -> f64 {
        f.0
    }
}

/// Whole chain. Both CPW stubs are shorted at their outer ends; the cable
/// joins them, and the coupler hangs off Bob's node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitNetwork {
    pub alice_cpw: LineSegment,
    pub cable: LineSegment,
    pub bob_cpw: LineSegment,
    pub coupler: DCouplerParams,
    /// Flux at which the coupler is considered off; frequency shifts are
    /// reported against the modes found there.
    pub off_flux: FluxBias,
}

impl CircuitNetwork {
    pub fn validate(&self) -> Result<()> {
        self.alice_cpw.validate()?;
        self.cable.validate()?;
        self.bob_cpw.validate()?;
        self.coupler.validate()
    }

    /// Mode spacing of the bare cable shorted at both ends, Hz.
    pub fn ideal_fsr(&self) -> f64 {
        self.cable.phase_velocity() / (2.0 * self.cable.length)
    }

    /// A copy with the coupler made lossless (`R_1` open, `R_D` shorted).
    pub fn lossless(&self) -> Self {
        let mut net = *self;
        net.coupler.parasitic_resistance = f64::INFINITY;
        net.coupler.load_resistance = 0.0;
        net
    }
}

/// Impedance of a section of line terminated by `load`.
pub fn segment_impedance(seg: &LineSegment, load: Termination, omega: f64) -> Result<C64> {
    check_omega(omega)?;
    seg.validate()?;
    Ok(seg.transfer(omega, load.proj()).value())
}

pub fn dcoupler_impedance(p: &DCouplerParams, flux: FluxBias, omega: f64) -> Result<C64> {
    check_omega(omega)?;
    p.validate()?;
    Ok(p.proj(flux, omega).value())
}

/// Impedance looking into Alice's stub, whose zeros are the network modes.
pub fn input_impedance(net: &CircuitNetwork, flux: FluxBias, omega: f64) -> Result<C64> {
    check_omega(omega)?;
    net.validate()?;
    Ok(alice_side(net, flux, omega).value())
}

/// The same closed network cut open at Bob's stub instead of Alice's.
pub fn input_impedance_from_bob(net: &CircuitNetwork, flux: FluxBias, omega: f64) -> Result<C64> {
    check_omega(omega)?;
    net.validate()?;
    let short = Termination::SHORT.proj();
    let toward_alice = net.cable.transfer(omega, net.alice_cpw.transfer(omega, short));
    let node = toward_alice.parallel(net.coupler.proj(flux, omega));
    Ok(net.bob_cpw.transfer(omega, node).value())
}

fn alice_side(net: &CircuitNetwork, flux: FluxBias, omega: f64) -> Proj {
    let stub = net.bob_cpw.transfer(omega, Termination::SHORT.proj());
    let z_b = net.coupler.proj(flux, omega).parallel(stub);
    let z_a = net.cable.transfer(omega, z_b);
    net.alice_cpw.transfer(omega, z_a)
}

/// A standing mode of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    /// Number of modes at or below this one, counted upward from DC.
    pub mode_index: usize,
    pub omega_m: f64,
    pub quality_factor: f64,
    /// `omega_m / quality_factor`, 1/s.
    pub kappa: f64,
    /// Angular-frequency shift relative to the same mode at the off flux.
    pub freq_shift_vs_off: f64,
}

const BISECTION_TOL_HZ: f64 = 1e3;
const DERIVATIVE_STEP_HZ: f64 = 1e4;
const PASSIVITY_EPS: f64 = 1e-9;
const GRID_PER_FSR: f64 = 50.0;

/// All modes of `net` at `flux` in `band` (rad/s), with frequency shifts
/// against the off flux.
pub fn find_modes(net: &CircuitNetwork, flux: FluxBias, band: [f64; 2]) -> Result<Vec<ModeSolution>> {
    net.validate()?;
    let mut modes = raw_modes(net, flux, band)?;
    let reference = raw_modes(net, net.off_flux, widen(net, band))?;
    for m in &mut modes {
        m.freq_shift_vs_off = reference
            .iter()
            .find(|r| r.mode_index == m.mode_index)
            .map(|r| m.omega_m - r.omega_m)
            .unwrap_or(f64::NAN);
    }
    Ok(modes)
}

fn widen(net: &CircuitNetwork, band: [f64; 2]) -> [f64; 2] {
    let pad = 2.0 * PI * net.ideal_fsr();
    [(band[0] - pad).max(grid_step(net)), band[1] + pad]
}

fn grid_step(net: &CircuitNetwork) -> f64 {
    2.0 * PI * net.ideal_fsr() / GRID_PER_FSR
}

fn im_in(net: &CircuitNetwork, flux: FluxBias, omega: f64) -> f64 {
    alice_side(net, flux, omega).value().im
}

/// Grid points and `Im Z` samples on `[lo, hi]`.
fn scan(net: &CircuitNetwork, flux: FluxBias, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let step = grid_step(net);
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            let w = (lo + k as f64 * step).min(hi);
            (w, im_in(net, flux, w))
        })
        .collect()
}

fn rising_crossings(samples: &[(f64, f64)]) -> impl Iterator<Item = (f64, f64)> + '_ {
    samples.windows(2).filter_map(|w| {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        (fa.is_finite() && fb.is_finite() && fa < 0.0 && fb >= 0.0).then_some((a, b))
    })
}

fn raw_modes(net: &CircuitNetwork, flux: FluxBias, band: [f64; 2]) -> Result<Vec<ModeSolution>> {
    let [lo, hi] = band;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("band", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let step = grid_step(net);
    let below = scan(net, flux, step, lo);
    let mut index = rising_crossings(&below).count();
    let mut out = Vec::new();
    for (a, b) in rising_crossings(&scan(net, flux, lo, hi)).collect::<Vec<_>>() {
        let omega = bisect(net, flux, a, b);
        index += 1;
        let z = alice_side(net, flux, omega).value();
        if z.re < -PASSIVITY_EPS {
            continue;
        }
        let h = 2.0 * PI * DERIVATIVE_STEP_HZ;
        let slope = (im_in(net, flux, omega + h) - im_in(net, flux, omega - h)) / (2.0 * h);
        if !(slope > 0.0) {
            continue;
        }
        let quality_factor = omega / z.re.max(0.0) * 0.5 * slope;
        out.push(ModeSolution {
            mode_index: index,
            omega_m: omega,
            quality_factor,
            kappa: omega / quality_factor,
            freq_shift_vs_off: 0.0,
        });
    }
    Ok(out)
}

fn bisect(net: &CircuitNetwork, flux: FluxBias, mut a: f64, mut b: f64) -> f64 {
    let tol = 2.0 * PI * BISECTION_TOL_HZ;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if im_in(net, flux, m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The mode closest to `target` (rad/s), searched within one spacing.
pub fn mode_near(net: &CircuitNetwork, flux: FluxBias, target: f64) -> Result<Option<ModeSolution>> {
    let pad = 2.0 * PI * net.ideal_fsr();
    let modes = find_modes(net, flux, [target - pad, target + pad])?;
    Ok(modes
        .into_iter()
        .min_by(|x, y| (x.omega_m - target).abs().total_cmp(&(y.omega_m - target).abs())))
}

/// One point of a flux sweep tracking a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxPoint {
    pub phi_ratio: f64,
    pub mode: ModeSolution,
}

/// Tracks the mode nearest `target` across the flux values.
pub fn sweep_flux(net: &CircuitNetwork, fluxes: &[f64], target: f64) -> Result<Vec<FluxPoint>> {
    use rayon::prelude::*;
    net.validate()?;
    let pad = 2.0 * PI * net.ideal_fsr();
    let reference = raw_modes(net, net.off_flux, [target - 2.0 * pad, target + 2.0 * pad])?;
    let points: Result<Vec<Option<FluxPoint>>> = fluxes
        .par_iter()
        .map(|&phi| {
            let flux = FluxBias::new(phi)?;
            let modes = raw_modes(net, flux, [target - pad, target + pad])?;
            Ok(modes
                .into_iter()
                .min_by(|x, y| (x.omega_m - target).abs().total_cmp(&(y.omega_m - target).abs()))
                .map(|mut mode| {
                    mode.freq_shift_vs_off = reference
                        .iter()
                        .find(|r| r.mode_index == mode.mode_index)
                        .map(|r| mode.omega_m - r.omega_m)
                        .unwrap_or(f64::NAN);
                    FluxPoint { phi_ratio: phi, mode }
                }))
        })
        .collect();
    Ok(points?.into_iter().flatten().collect())
}

/// Which extremum of the dissipation rate to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    /// Minimum of kappa (coupler off).
    Off,
    /// Maximum of kappa (coupler on).
    On,
}

/// Locates the flux in `range` where the mode nearest `target` has extremal
/// kappa: a coarse sweep followed by golden-section refinement.
pub fn locate_flux_extremum(
    net: &CircuitNetwork,
    target: f64,
    range: [f64; 2],
    which: Extremum,
) -> Result<FluxPoint> {
    const COARSE: usize = 200;
    let [lo, hi] = range;
    let grid: Vec<f64> = (0..=COARSE)
        .map(|k| lo + (hi - lo) * k as f64 / COARSE as f64)
        .collect();
    let sweep = sweep_flux(net, &grid, target)?;
    let score = |p: &FluxPoint| match which {
        Extremum::Off => p.mode.kappa,
        Extremum::On => -p.mode.kappa,
    };
    let best = sweep
        .iter()
        .min_by(|a, b| score(a).total_cmp(&score(b)))
        .ok_or_else(|| Error::invalid("range", "no mode found near the target frequency"))?;
    let h = (hi - lo) / COARSE as f64;
    let eval = |phi: f64| -> Result<f64> {
        let p = sweep_flux(net, &[phi], target)?;
        Ok(p.first().map(score).unwrap_or(f64::INFINITY))
    };
    let (mut a, mut b) = ((best.phi_ratio - h).max(lo), (best.phi_ratio + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    let phi = 0.5 * (a + b);
    let refined = sweep_flux(net, &[phi], target)?;
    let candidate = refined.into_iter().next().unwrap_or(*best);
    Ok(if score(&candidate) <= score(best) {
        candidate
    } else {
        *best
    })
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::invalid("omega", format!("must be > 0, got {omega}")));
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Impedance as `num / den`.
#[derive(Debug, Clone, Copy)]
struct Proj {
    num: C64,
    den: C64,
}

impl Proj {
    fn new(num: C64, den: C64) -> Self {
        let s = num.norm().max(den.norm());
        if s > 0.0 && s.is_finite() {
            Self {
                num: num / s,
                den: den / s,
            }
        } else {
            Self { num, den }
        }
    }

    fn finite(z: C64) -> Self {
        Self::new(z, C64::new(1.0, 0.0))
    }

    fn series(self, o: Self) -> Self {
        Self::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    fn parallel(self, o: Self) -> Self {
        Self::new(self.num * o.num, self.num * o.den + o.num * self.den)
    }

    fn value(self) -> C64 {
        if self.den.norm() == 0.0 {
            C64::new(f64::INFINITY, f64::INFINITY)
        } else {
            self.num / self.den
        }
    }
}
