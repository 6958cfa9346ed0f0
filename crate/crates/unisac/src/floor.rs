//! Converse-side floors for the unsourced access system.
//!
//! The optimistic floor keeps only the errors no scheme can remove: codeword
//! collisions for the per-user error probability, the single-user estimation
//! limit for the angle error, and the channel capacity for the total payload.
//! Combining the three gives a minimum energy per user that lower-bounds
//! every achievable operating point.

use crate::bounds::{energy_per_user, BoundsError, PowerAssignment, SystemConfig};
use crate::channel::{ChannelError, ChannelMode, McEstimate};
use crate::numerics::linalg::{cholesky_logdet, CMat, LinalgError};
use crate::numerics::rng::RandomStream;
use crate::numerics::special::{log_binomial, SpecialError};
use rayon::prelude::*;
use std::f64::consts::{LN_2, PI};
use thiserror::Error;

/// Errors raised by floor evaluation and the floor-energy search.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloorError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("collision floor {floor:.3e} is not below the error target {target:.3e}")]
    CollisionFloor { floor: f64, target: f64 },
    #[error("the capacity constraint cannot be met within the power bracket")]
    CapacityInfeasible,
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Operating point plus what the capacity Monte Carlo needs: how channels
/// are drawn and how many trials to average.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorConfig {
    pub system: SystemConfig,
    pub mode: ChannelMode,
    pub capacity_trials: u32,
}

impl FloorConfig {
    /// Total payload bits carried per block across all users.
    pub fn total_bits(&self) -> u64 {
        self.system.bits_c as u64 * self.system.users_c as u64
            + self.system.bits_s as u64 * self.system.users_s as u64
    }

    pub fn validate(&self) -> Result<(), FloorError> {
        self.system.validate()?;
        if self.total_bits() == 0 {
            return Err(FloorError::Config("floor needs at least one payload bit"));
        }
        if self.mode.dimension() != self.system.antennas() {
            return Err(FloorError::Config("channel mode dimension does not match the array"));
        }
        if self.capacity_trials == 0 {
            return Err(FloorError::Config("need at least one capacity trial"));
        }
        Ok(())
    }
}

/// Collision-only floor on the per-user error probability: for each class,
/// the chance that a given pair shares a codeword while the remaining users
/// miss it. Evaluated in the log domain so wide codebooks cannot underflow
/// the pair term.
pub fn pupe_floor(cfg: &SystemConfig) -> Result<f64, FloorError> {
    cfg.validate()?;
    let mut acc = 0.0;
    for (users, bits) in [(cfg.users_c, cfg.bits_c), (cfg.users_s, cfg.bits_s)] {
        if users < 2 {
            continue;
        }
        let ln_pairs = log_binomial(users as u64, 2)?;
        let ln_hit = -(bits as f64) * LN_2;
        let ln_miss = (-ln_hit.exp()).ln_1p();
        acc += (ln_pairs + ln_hit + (users as f64 - 2.0) * ln_miss).exp();
    }
    Ok(acc)
}

/// Single-user estimation floor on the mean squared direction cosine for a
/// filled array of `M` elements at the constrained sensing power.
pub fn crlb_mseaoa(cfg: &SystemConfig, p_bar_s: f64) -> Result<f64, FloorError> {
    cfg.validate()?;
    let m = cfg.antennas() as f64;
    if cfg.antennas() < 2 {
        return Err(FloorError::Config("the estimation floor needs at least 2 antennas"));
    }
    if !(p_bar_s > 0.0) || !p_bar_s.is_finite() {
        return Err(FloorError::Config("sensing power must be positive"));
    }
    let sum_sq = (m - 1.0) * m * (2.0 * m - 1.0) / 6.0;
    Ok(0.5 * cfg.noise_var / (PI * PI * cfg.blocklength as f64 * p_bar_s * sum_sq))
}

/// Channel draws for the capacity average, cached as per-trial, per-class
/// outer Grams so the rate can be re-evaluated at any power without
/// redrawing. Reusing one sampler across powers makes every per-trial
/// rate monotone in the power, which is what the floor bisection needs.
#[derive(Debug, Clone)]
pub struct CapacitySampler {
    grams_c: Vec<CMat>,
    grams_s: Vec<CMat>,
    noise_var: f64,
    antennas: usize,
}

impl CapacitySampler {
    /// Draws one channel vector per user per trial (communication users
    /// first), in parallel on per-trial substreams.
    pub fn draw(
        cfg: &SystemConfig,
        mode: &ChannelMode,
        trials: u32,
        stream: RandomStream,
    ) -> Result<Self, FloorError> {
        cfg.validate()?;
        if trials == 0 {
            return Err(FloorError::Config("need at least one capacity trial"));
        }
        let m = cfg.antennas();
        if mode.dimension() != m {
            return Err(FloorError::Config("channel mode dimension does not match the array"));
        }
        let experiment = (stream.id() >> 32) as u32;
        let pairs: Result<Vec<(CMat, CMat)>, FloorError> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream.substream(experiment, t).rng();
                let mut draw_class = |users: u32| -> Result<CMat, FloorError> {
                    let mut cols = Vec::with_capacity(users as usize);
                    for _ in 0..users {
                        cols.push(mode.draw_rng(&mut rng)?);
                    }
                    if cols.is_empty() {
                        return Ok(CMat::zeros(m, 0));
                    }
                    CMat::from_cols(&cols).map_err(FloorError::from)
                };
                let gc = draw_class(cfg.users_c)?;
                let gs = draw_class(cfg.users_s)?;
                Ok((gc.outer_gram(), gs.outer_gram()))
            })
            .collect();
        let (grams_c, grams_s) = pairs?.into_iter().unzip();
        Ok(CapacitySampler { grams_c, grams_s, noise_var: cfg.noise_var, antennas: m })
    }

    /// Mean and standard error of the sum rate in bits per channel use at
    /// the given constrained powers.
    pub fn rate(&self, p_bar_c: f64, p_bar_s: f64) -> Result<McEstimate, FloorError> {
        if [p_bar_c, p_bar_s].iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(FloorError::Config("powers must be positive and finite"));
        }
        let m = self.antennas;
        let wc = p_bar_c / self.noise_var;
        let ws = p_bar_s / self.noise_var;
        let values: Result<Vec<f64>, FloorError> = self
            .grams_c
            .iter()
            .zip(&self.grams_s)
            .map(|(tc, ts)| {
                let mut s = CMat::zeros(m, m);
                for r in 0..m {
                    for c in 0..m {
                        let v = tc.get(r, c) * wc + ts.get(r, c) * ws;
                        s.set(r, c, v);
                    }
                    let d = s.get(r, r);
                    s.set(r, r, d + 1.0);
                }
                Ok(cholesky_logdet(&s)? / LN_2)
            })
            .collect();
        Ok(McEstimate::from_values(&values?))
    }
}

/// Average sum rate over fresh channel draws at one power assignment.
pub fn capacity_mc(
    cfg: &SystemConfig,
    mode: &ChannelMode,
    powers: &PowerAssignment,
    trials: u32,
    stream: RandomStream,
) -> Result<McEstimate, FloorError> {
    powers.validate()?;
    CapacitySampler::draw(cfg, mode, trials, stream)?.rate(powers.p_bar_c, powers.p_bar_s)
}

/// Which floor constraint fixed the returned power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorBinding {
    Capacity,
    CramerRao,
}

impl std::fmt::Display for FloorBinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FloorBinding::Capacity => write!(f, "capacity"),
            FloorBinding::CramerRao => write!(f, "crlb"),
        }
    }
}

/// The floor-energy point with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPoint {
    pub e_n0_db: f64,
    pub power: f64,
    pub binding: FloorBinding,
    pub capacity: McEstimate,
    pub crlb: f64,
    pub pupe_floor: f64,
}

/// Minimum energy per user no scheme can beat: the smaller power meeting
/// both the total-payload rate constraint and the angle-estimation floor,
/// under the equal-power convention.
///
/// The rate side compares the payload rate against the Monte Carlo capacity
/// mean shrunk by two standard errors, so sampling noise cannot fake
/// feasibility, and bisects the shared power to 1e-4 decades over the same
/// bracket the achievability search uses. The estimation side is a closed
/// form. The collision floor is power-independent and gates the whole
/// search.
pub fn min_energy_floor(
    cfg: &FloorConfig,
    pupe_target: f64,
    mseaoa_target: f64,
    stream: RandomStream,
) -> Result<FloorPoint, FloorError> {
    cfg.validate()?;
    if !(pupe_target > 0.0 && pupe_target < 1.0) {
        return Err(FloorError::Config("error target must lie in (0, 1)"));
    }
    if !(mseaoa_target > 0.0) {
        return Err(FloorError::Config("angle target must be positive"));
    }
    let sys = &cfg.system;
    let floor = pupe_floor(sys)?;
    if floor > pupe_target {
        return Err(FloorError::CollisionFloor { floor, target: pupe_target });
    }
    let rate_needed = cfg.total_bits() as f64 / sys.blocklength as f64;
    let sampler = CapacitySampler::draw(sys, &cfg.mode, cfg.capacity_trials, stream)?;
    let feasible = |p: f64| -> Result<bool, FloorError> {
        Ok(rate_needed <= sampler.rate(p, p)?.conservative(2.0))
    };
    let scale = sys.noise_var / sys.blocklength as f64;
    let mut lo = 1e-8 * scale;
    let mut hi = 1e4 * scale;
    if !feasible(hi)? {
        return Err(FloorError::CapacityInfeasible);
    }
    let mut p_cap = hi;
    if feasible(lo)? {
        p_cap = lo;
    } else {
        while (hi / lo).log10() > 1e-4 {
            let mid = (0.5 * (lo.ln() + hi.ln())).exp();
            if feasible(mid)? {
                hi = mid;
                p_cap = mid;
            } else {
                lo = mid;
            }
        }
    }
    let m = sys.antennas() as f64;
    let sum_sq = (m - 1.0) * m * (2.0 * m - 1.0) / 6.0;
    let p_crlb = if mseaoa_target.is_finite() {
        0.5 * sys.noise_var / (PI * PI * sys.blocklength as f64 * sum_sq * mseaoa_target)
    } else {
        0.0
    };
    let (power, binding) = if p_crlb > p_cap {
        (p_crlb, FloorBinding::CramerRao)
    } else {
        (p_cap, FloorBinding::Capacity)
    };
    let capacity = sampler.rate(power, power)?;
    let powers = PowerAssignment { p_bar_c: power, p_bar_s: power, p_c: power, p_s: power };
    Ok(FloorPoint {
        e_n0_db: energy_per_user(sys, &powers)?,
        power,
        binding,
        capacity,
        crlb: crlb_mseaoa(sys, power)?,
        pupe_floor: floor,
    })
}
