use crate::dynamics::{fock_cutoff_for, merge_baths, Bath, Coupling, ModeParams, QubitParams};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// State of the dissipative coupler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DCoupler {
    On,
    Off,
}

/// Loss channels of the communication mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Intrinsic loss of the cable mode, 1/s.
    pub kappa_intrinsic: f64,
    pub kappa_d_on: f64,
    pub kappa_d_off: f64,
    /// Effective occupancy of the mode's bath with the coupler off.
    pub warm_occupancy: f64,
    /// Effective occupancy with the coupler on. When absent it is obtained
    /// by merging the warm bath (at the intrinsic rate) with the cold load.
    pub cooled_occupancy: Option<f64>,
    /// Occupancy of the cold load behind the coupler.
    pub cold_occupancy: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_intrinsic", self.kappa_intrinsic),
            ("kappa_d_on", self.kappa_d_on),
            ("kappa_d_off", self.kappa_d_off),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::NegativeRate {
                    name: name.into(),
                    value: v,
                });
            }
        }
        for (name, v) in [
            ("warm_occupancy", self.warm_occupancy),
            ("cold_occupancy", self.cold_occupancy),
            ("cooled_occupancy", self.cooled_occupancy.unwrap_or(0.0)),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Effective bath of the mode for the given coupler state.
    pub fn bath(&self, d: DCoupler) -> Result<Bath> {
        match d {
            DCoupler::Off => Ok(Bath {
                kappa: self.kappa_intrinsic + self.kappa_d_off,
                occupancy: self.warm_occupancy,
            }),
            DCoupler::On if self.kappa_intrinsic + self.kappa_d_on == 0.0 => Ok(Bath {
                kappa: 0.0,
                occupancy: self.cooled_occupancy.unwrap_or(self.cold_occupancy),
            }),
            DCoupler::On => {
                let merged = merge_baths(&[
                    Bath {
                        kappa: self.kappa_intrinsic,
                        occupancy: self.warm_occupancy,
                    },
                    Bath {
                        kappa: self.kappa_d_on,
                        occupancy: self.cold_occupancy,
                    },
                ])?;
                Ok(Bath {
                    kappa: merged.kappa,
                    occupancy: self.cooled_occupancy.unwrap_or(merged.occupancy),
                })
            }
        }
    }
}

/// One or two qubits exchanging photons through a single channel mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    /// Qubit A, then optionally qubit B. `frequency` is the idle frequency.
    pub qubits: Vec<QubitParams>,
    pub mode_frequency: f64,
    pub channel: ChannelParams,
    /// Interaction strengths used whenever a protocol turns a coupling on.
    pub coupling: Coupling,
    /// Fixed Fock cutoff; chosen from the expected occupancy when absent.
    pub fock_cutoff: Option<usize>,
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() || self.qubits.len() > 2 {
            return Err(Error::invalid("qubits", "a model has one or two qubits"));
        }
        for q in &self.qubits {
            q.validate()?;
        }
        self.channel.validate()?;
        if let Some(c) = self.fock_cutoff {
            if c < 2 {
                return Err(Error::invalid("fock_cutoff", "must be at least 2"));
            }
        }
        Ok(())
    }

    /// The model restricted to qubit A.
    pub fn qubit_a_only(&self) -> SystemModel {
        SystemModel {
            qubits: vec![self.qubits[0]],
            ..self.clone()
        }
    }

    /// Qubit parameters with frequencies set by detunings from the mode.
    pub fn qubits_at(&self, detunings: [f64; 2]) -> Vec<QubitParams> {
        self.qubits
            .iter()
            .enumerate()
            .map(|(k, q)| QubitParams {
                frequency: self.mode_frequency + detunings[k],
                ..*q
            })
            .collect()
    }

    pub fn mode(&self, d: DCoupler, cutoff: usize) -> Result<ModeParams> {
        let bath = self.channel.bath(d)?;
        Ok(ModeParams {
            frequency: self.mode_frequency,
            fock_cutoff: cutoff,
            kappa: bath.kappa,
            occupancy: bath.occupancy,
        })
    }

    /// Cutoff for a mode whose occupancy stays at or below `n`.
    pub fn cutoff_for(&self, n: f64) -> usize {
        self.fock_cutoff.unwrap_or_else(|| fock_cutoff_for(n))
    }
}
