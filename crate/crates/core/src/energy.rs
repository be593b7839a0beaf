//! First-order radio energy model, packet sizes and battery drain.
//!
//! A transmission of `k` bits over distance `d` costs
//! `E_elec * k + eps_fs * k * d^2` below the crossover distance and
//! `E_elec * k + eps_mp * k * d^4` at or beyond it; reception costs
//! `E_elec * k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::Node;

/// Electronics energy of the reference profile, J/bit.
pub const DEFAULT_ELEC: f64 = 50e-9;
/// Free-space amplifier energy of the reference profile, J/bit/m^2.
pub const DEFAULT_AMP_NEAR: f64 = 10e-12;
/// Multipath amplifier energy of the reference profile, J/bit/m^4.
pub const DEFAULT_AMP_FAR: f64 = 0.0013e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("link of {distance:.3} m exceeds `{profile}` range of {max_range} m")]
    OutOfRange {
        profile: String,
        distance: f64,
        max_range: f64,
    },
    #[error("invalid packet spec: {0}")]
    InvalidPacket(String),
}

/// Energy parameters of one communication interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioProfile {
    pub name: String,
    /// J/bit, paid by both transmitter and receiver.
    pub elec_energy: f64,
    /// J/bit/m^2.
    pub amp_near: f64,
    /// J/bit/m^4.
    pub amp_far: f64,
    /// Meters.
    pub max_range: f64,
}

impl RadioProfile {
    pub fn new(
        name: impl Into<String>,
        elec_energy: f64,
        amp_near: f64,
        amp_far: f64,
        max_range: f64,
    ) -> Result<Self, EnergyError> {
        let profile = Self {
            name: name.into(),
            elec_energy,
            amp_near,
            amp_far,
            max_range,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// The classic first-order coefficients (50 nJ/bit, 10 pJ/bit/m^2,
    /// 0.0013 pJ/bit/m^4) with the given range.
    pub fn first_order(name: impl Into<String>, max_range: f64) -> Self {
        Self {
            name: name.into(),
            elec_energy: DEFAULT_ELEC,
            amp_near: DEFAULT_AMP_NEAR,
            amp_far: DEFAULT_AMP_FAR,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |reason: &str| {
            Err(EnergyError::InvalidProfile {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.name.is_empty() {
            return bad("name must not be empty");
        }
        for (label, v) in [
            ("elec_energy", self.elec_energy),
            ("amp_near", self.amp_near),
            ("amp_far", self.amp_far),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{label} must be finite and >= 0"));
            }
        }
        if !(self.max_range > 0.0) {
            return bad("max_range must be > 0");
        }
        Ok(())
    }

    /// Distance where the d^2 and d^4 amplifier terms cost the same.
    ///
    /// With no multipath term the free-space branch always applies
    /// (infinite crossover); with no free-space term the multipath branch
    /// always applies (zero crossover).
    pub fn crossover_distance(&self) -> f64 {
        if self.amp_far > 0.0 && self.amp_near > 0.0 {
            (self.amp_near / self.amp_far).sqrt()
        } else if self.amp_far > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Transmission energy without the range check.
    pub fn tx_energy(&self, bits: u64, distance: f64) -> f64 {
        let k = bits as f64;
        let amp = if distance < self.crossover_distance() {
            self.amp_near * distance * distance
        } else {
            self.amp_far * distance.powi(4)
        };
        self.elec_energy * k + amp * k
    }
}

/// Placeholder interface set standing in for Wi-Fi, Bluetooth, ZigBee, LTE
/// and NB-IoT. The numbers are synthetic: short-range interfaces are cheap
/// per bit, the cellular ones pay a flat per-bit cost with no distance term.
pub fn default_profiles() -> Vec<RadioProfile> {
    vec![
        RadioProfile::first_order("nai1", 100.0),
        RadioProfile {
            name: "nai2".into(),
            elec_energy: 20e-9,
            amp_near: 10e-12,
            amp_far: DEFAULT_AMP_FAR,
            max_range: 15.0,
        },
        RadioProfile {
            name: "nai3".into(),
            elec_energy: 30e-9,
            amp_near: 10e-12,
            amp_far: DEFAULT_AMP_FAR,
            max_range: 50.0,
        },
        RadioProfile {
            name: "nai4".into(),
            elec_energy: 250e-9,
            amp_near: 0.0,
            amp_far: 0.0,
            max_range: 5_000.0,
        },
        RadioProfile {
            name: "nai5".into(),
            elec_energy: 200e-9,
            amp_near: 0.0,
            amp_far: 0.0,
            max_range: 10_000.0,
        },
    ]
}

/// Energy to send `bits` over `distance` meters.
pub fn tx_cost(profile: &RadioProfile, bits: u64, distance: f64) -> Result<f64, EnergyError> {
    if distance > profile.max_range {
        return Err(EnergyError::OutOfRange {
            profile: profile.name.clone(),
            distance,
            max_range: profile.max_range,
        });
    }
    Ok(profile.tx_energy(bits, distance))
}

pub fn rx_cost(profile: &RadioProfile, bits: u64) -> f64 {
    profile.elec_energy * bits as f64
}

/// Interface chosen for one link, and whether it had to exceed its range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkChoice<'a> {
    pub profile: &'a RadioProfile,
    pub tx_energy: f64,
    pub escalated: bool,
}

/// Cheapest profile whose range covers `distance`. When none does, the
/// longest-range profile is used anyway and flagged as escalated.
/// Returns `None` only for an empty profile list.
pub fn select_profile(profiles: &[RadioProfile], bits: u64, distance: f64) -> Option<LinkChoice<'_>> {
    let mut best: Option<LinkChoice<'_>> = None;
    for p in profiles.iter().filter(|p| distance <= p.max_range) {
        let e = p.tx_energy(bits, distance);
        if best.is_none_or(|b| e < b.tx_energy) {
            best = Some(LinkChoice {
                profile: p,
                tx_energy: e,
                escalated: false,
            });
        }
    }
    best.or_else(|| {
        profiles
            .iter()
            .max_by(|a, b| a.max_range.total_cmp(&b.max_range))
            .map(|p| LinkChoice {
                profile: p,
                tx_energy: p.tx_energy(bits, distance),
                escalated: true,
            })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub data_bytes: u64,
    pub broadcast_bytes: u64,
    pub header_bytes: u64,
    pub compress_rate: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        Self {
            data_bytes: 100,
            broadcast_bytes: 25,
            header_bytes: 25,
            compress_rate: 0.8,
        }
    }
}

impl PacketSpec {
    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.data_bytes == 0 {
            return Err(EnergyError::InvalidPacket("data_bytes must be > 0".into()));
        }
        if !(self.compress_rate > 0.0 && self.compress_rate <= 1.0) {
            return Err(EnergyError::InvalidPacket("compress_rate must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn data_bits(&self) -> u64 {
        self.data_bytes * 8
    }

    pub fn header_bits(&self) -> u64 {
        self.header_bytes * 8
    }

    pub fn broadcast_bits(&self) -> u64 {
        self.broadcast_bytes * 8
    }

    /// A member's frame: payload plus its own header.
    pub fn frame_bits(&self) -> u64 {
        self.data_bits() + self.header_bits()
    }
}

/// Bits a cluster head forwards: the compressed payloads under one header.
pub fn aggregate_payload(spec: &PacketSpec, member_payload_bits: u64) -> u64 {
    let scaled = spec.compress_rate * member_payload_bits as f64;
    // 0.8 * 8000 must give 6400, not 6401 after a stray ulp.
    let nearest = scaled.round();
    let compressed = if (scaled - nearest).abs() < 1e-7 {
        nearest
    } else {
        scaled.ceil()
    };
    compressed as u64 + spec.header_bits()
}

impl Node {
    /// Remove up to `amount` joules; returns what was actually taken.
    pub fn drain(&mut self, amount: f64) -> f64 {
        debug_assert!(amount >= 0.0, "negative drain {amount}");
        if !self.alive || amount <= 0.0 {
            return 0.0;
        }
        let taken = amount.min(self.residual_energy);
        self.residual_energy -= taken;
        if taken == amount && self.residual_energy <= 0.0 {
            self.residual_energy = 0.0;
        }
        self.alive = self.residual_energy > 0.0;
        taken
    }
}

/// Running total of dissipated energy (compensated summation, so millions
/// of micro-joule charges against a few hundred joules still balance).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    sum: f64,
    compensation: f64,
}

impl EnergyLedger {
    pub fn record(&mut self, amount: f64) {
        let t = self.sum + amount;
        if self.sum.abs() >= amount.abs() {
            self.compensation += (self.sum - t) + amount;
        } else {
            self.compensation += (amount - t) + self.sum;
        }
        self.sum = t;
    }

    /// Drain `node` and book what it actually lost.
    pub fn charge(&mut self, node: &mut Node, amount: f64) -> f64 {
        let taken = node.drain(amount);
        self.record(taken);
        taken
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
