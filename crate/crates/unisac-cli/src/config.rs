//! Declarative experiment configuration.
//!
//! Every field has a default matching the reference operating point, so an
//! empty document is a valid configuration and a checked-in reference file
//! documents the full key set. Unknown keys are rejected.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

/// Which array the sweep drives: the fluid surface with its measured port
/// gain and stored minimum-redundancy pattern, or the fixed half-wavelength
/// array baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    Fas,
    Los,
}

impl std::fmt::Display for GainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GainMode::Fas => write!(f, "fas"),
            GainMode::Los => write!(f, "los"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    /// Payload bits per communication user.
    pub bits_c: u32,
    /// Payload bits per sensing user.
    pub bits_s: u32,
    /// Number of communication users.
    pub users_c: u32,
    /// Number of sensing users.
    pub users_s: u32,
    /// Channel uses per block.
    pub blocklength: u32,
    /// Receiver noise variance per complex dimension.
    pub noise_var: f64,
    /// Active receive elements.
    pub antennas: u32,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            bits_c: 100,
            bits_s: 100,
            users_c: 50,
            users_s: 50,
            blocklength: 5000,
            noise_var: 1.0,
            antennas: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Default array for sweeps that accept --gain-mode.
    pub mode: GainMode,
    /// Line-of-sight to scattered power ratio.
    pub rice_k: f64,
    /// Scatterer paths per user channel.
    pub scatterers: u32,
    /// Total mean channel power.
    pub omega: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { mode: GainMode::Fas, rice_k: 0.5, scatterers: 3, omega: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSection {
    /// Direction-cosine grid size of the angular codebook.
    pub grid: u32,
}

impl Default for SensingSection {
    fn default() -> Self {
        SensingSection { grid: 90 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetsSection {
    /// Per-user error probability target.
    pub pupe: f64,
    /// Mean squared direction-cosine error target.
    pub mseaoa: f64,
}

impl Default for TargetsSection {
    fn default() -> Self {
        TargetsSection { pupe: 0.1, mseaoa: 5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Total-user points, as `lo:hi:step` or a comma list.
    pub users: Option<String>,
    /// Antenna counts, as `lo:hi:step` or a comma list.
    pub m: Option<String>,
    /// SNR points in dB, as `lo:hi:step` or a comma list.
    pub snr_db: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    /// Monte Carlo trials for sampled quantities.
    pub trials: u32,
    /// Base seed; `--seed` and `UNISAC_SEED` take precedence.
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { trials: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub sensing: SensingSection,
    pub targets: TargetsSection,
    pub sweep: SweepSection,
    pub mc: McSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.system.bits_c == 0 || self.system.bits_s == 0 {
            return Err("system: payload sizes must be at least 1 bit".into());
        }
        if self.system.users_c + self.system.users_s == 0 {
            return Err("system: need at least one user".into());
        }
        if self.system.blocklength == 0 {
            return Err("system: blocklength must be at least 1".into());
        }
        if !(self.system.noise_var > 0.0) || !self.system.noise_var.is_finite() {
            return Err("system: noise variance must be positive".into());
        }
        if self.system.antennas < 2 {
            return Err("system: need at least 2 antennas".into());
        }
        if !(self.channel.rice_k >= 0.0) || !self.channel.rice_k.is_finite() {
            return Err("channel: power ratio must be nonnegative".into());
        }
        if !(self.channel.omega > 0.0) || !self.channel.omega.is_finite() {
            return Err("channel: mean power must be positive".into());
        }
        if self.sensing.grid < 2 {
            return Err("sensing: grid must have at least 2 points".into());
        }
        for (name, t) in [("pupe", self.targets.pupe), ("mseaoa", self.targets.mseaoa)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(format!("targets: {name} must lie in (0, 1)"));
            }
        }
        if self.mc.trials == 0 {
            return Err("mc: need at least one trial".into());
        }
        Ok(())
    }

    /// Canonical serialization used for the emitted config hash.
    pub fn canonical(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
