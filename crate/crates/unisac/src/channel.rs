//! Fluid-antenna channel model with a dominant line-of-sight path and a
//! finite set of non-line-of-sight scatterers.
//!
//! A surface of `ports` selectable positions spans `aperture` wavelengths.
//! The response at port `n` for a wave from angle `theta` accumulates the
//! line-of-sight term and the scatterer terms, each with the port-dependent
//! phase `2 pi n W cos(theta) / (ports - 1)`:
//!
//! ```text
//! g_n = s_0 e^{-j 2 pi n W cos(t_0) / (N-1)} + sum_l s_l e^{-j 2 pi n W cos(t_l) / (N-1)}
//! ```
//!
//! with `|s_0|^2 = K Omega / (K + 1)` at a uniform random carrier phase, and
//! the scatterer amplitudes i.i.d. CN(0, Omega / ((K + 1) L_s)). `K` is the
//! power ratio between the two groups and `Omega` the total mean power.
//!
//! Draw order is fixed and documented for reproducibility: the carrier phase
//! first, then for each scatterer its angle followed by its complex amplitude
//! (real then imaginary part).

use crate::numerics::rng::{complex_gaussian, RandomStream};
use crate::Cx;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Errors raised by channel generation and port selection.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    /// Parameter outside its domain.
    #[error("invalid channel parameter: {0}")]
    BadParameter(&'static str),
    /// More ports requested than the realization carries.
    #[error("selection asks for more ports than available")]
    Selection,
}

/// Static description of the fluid-antenna surface and its fading
/// environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Number of selectable ports (at least 2).
    pub ports: usize,
    /// Physical span of the surface in carrier wavelengths.
    pub aperture: f64,
    /// Line-of-sight to scattered power ratio (0 = pure scattering).
    pub rice_k: f64,
    /// Number of non-line-of-sight scatterers (0 = pure line of sight).
    pub scatterers: usize,
    /// Total mean channel power.
    pub omega: f64,
}

impl ChannelParams {
    fn validate(&self) -> Result<(), ChannelError> {
        if self.ports < 2 {
            return Err(ChannelError::BadParameter("need at least 2 ports"));
        }
        if !(self.aperture > 0.0) || !self.aperture.is_finite() {
            return Err(ChannelError::BadParameter("aperture must be positive"));
        }
        if !(self.rice_k >= 0.0) || !self.rice_k.is_finite() {
            return Err(ChannelError::BadParameter("power ratio must be nonnegative"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(ChannelError::BadParameter("mean power must be positive"));
        }
        Ok(())
    }
}

/// One realized response across all ports, tagged with the line-of-sight
/// angle it was generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Per-port complex response, index 0 through `ports - 1`.
    pub response: Vec<Cx>,
    /// Line-of-sight angle in radians.
    pub theta: f64,
}

impl ChannelRealization {
    /// Wraps an explicit response vector (useful for constructing
    /// deterministic test fixtures).
    pub fn from_response(response: Vec<Cx>, theta: f64) -> Self {
        ChannelRealization { response, theta }
    }
}

/// Draws one channel realization for a line-of-sight angle `theta` in
/// `[0, pi]`.
pub fn gen_fas_channel(
    params: &ChannelParams,
    theta: f64,
    stream: RandomStream,
) -> Result<ChannelRealization, ChannelError> {
    let mut rng = stream.rng();
    gen_fas_channel_rng(params, theta, &mut rng)
}

/// Same as [`gen_fas_channel`] but drawing from a caller-positioned
/// generator, so composite experiments can interleave draws deterministically.
pub fn gen_fas_channel_rng(
    params: &ChannelParams,
    theta: f64,
    rng: &mut ChaCha12Rng,
) -> Result<ChannelRealization, ChannelError> {
    params.validate()?;
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(ChannelError::BadParameter("angle must lie in [0, pi]"));
    }
    let k = params.rice_k;
    let omega = params.omega;
    let los_amp = (k * omega / (k + 1.0)).sqrt();
    let carrier: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let los_coef = Cx::from_polar(los_amp, carrier);
    let mut paths: Vec<(Cx, f64)> = Vec::with_capacity(params.scatterers + 1);
    paths.push((los_coef, theta.cos()));
    if params.scatterers > 0 {
        let var = omega / ((k + 1.0) * params.scatterers as f64);
        for _ in 0..params.scatterers {
            let angle: f64 = rng.gen::<f64>() * std::f64::consts::PI;
            let amp = complex_gaussian(rng, var);
            paths.push((amp, angle.cos()));
        }
    }
    let unit = std::f64::consts::TAU * params.aperture / (params.ports as f64 - 1.0);
    let response = (0..params.ports)
        .map(|n| {
            let mut acc = Cx::new(0.0, 0.0);
            for &(coef, cos_angle) in &paths {
                acc += coef * Cx::from_polar(1.0, -(n as f64) * unit * cos_angle);
            }
            acc
        })
        .collect();
    Ok(ChannelRealization { response, theta })
}

/// Picks the `m` ports with the largest response moduli (ties broken toward
/// the lower index) and returns the selected indices in ascending order with
/// the gathered responses.
pub fn select_ports_optimal(
    realization: &ChannelRealization,
    m: usize,
) -> Result<(Vec<usize>, Vec<Cx>), ChannelError> {
    let n = realization.response.len();
    if m == 0 || m > n {
        return Err(ChannelError::Selection);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ma = realization.response[a].norm_sqr();
        let mb = realization.response[b].norm_sqr();
        mb.partial_cmp(&ma).expect("finite moduli").then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = order[..m].to_vec();
    picked.sort_unstable();
    let gathered = picked.iter().map(|&i| realization.response[i]).collect();
    Ok((picked, gathered))
}

/// Gathers the response at a fixed port pattern.
pub fn select_ports_fixed(
    realization: &ChannelRealization,
    pattern: &crate::mra::PortPattern,
) -> Result<Vec<Cx>, ChannelError> {
    let n = realization.response.len();
    if pattern.aperture() as usize >= n {
        return Err(ChannelError::Selection);
    }
    Ok(pattern.indices().iter().map(|&i| realization.response[i as usize]).collect())
}

/// Steering vector of a classical `m`-element half-wavelength array: entry
/// `i` is `e^{-j pi i cos(theta)}`.
pub fn gen_ula_steering(m: usize, cos_theta: f64) -> Vec<Cx> {
    (0..m)
        .map(|i| Cx::from_polar(1.0, -std::f64::consts::PI * i as f64 * cos_theta))
        .collect()
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: u32,
}

impl McEstimate {
    /// Mean shrunk by `sigmas` standard errors (a conservative reading).
    pub fn conservative(&self, sigmas: f64) -> f64 {
        self.mean - sigmas * self.std_err
    }

    /// Reduces per-trial values in index order.
    pub fn from_values(values: &[f64]) -> McEstimate {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        McEstimate { mean, std_err: (var / n as f64).sqrt(), trials: n as u32 }
    }
}

/// How a per-user receive vector is produced in Monte Carlo experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelMode {
    /// Fluid surface: draw a full realization, keep the `select` strongest
    /// ports.
    Fluid { params: ChannelParams, select: usize },
    /// Classical half-wavelength array with a pure line-of-sight response.
    LosUla { elements: usize },
}

impl ChannelMode {
    /// Number of entries in a drawn vector.
    pub fn dimension(&self) -> usize {
        match self {
            ChannelMode::Fluid { select, .. } => *select,
            ChannelMode::LosUla { elements } => *elements,
        }
    }

    /// Draws one receive vector with the arrival angle uniform on `(0, pi)`.
    pub fn draw_rng(&self, rng: &mut ChaCha12Rng) -> Result<Vec<Cx>, ChannelError> {
        let theta: f64 = rng.gen::<f64>() * std::f64::consts::PI;
        match self {
            ChannelMode::Fluid { params, select } => {
                let ch = gen_fas_channel_rng(params, theta, rng)?;
                let (_, picked) = select_ports_optimal(&ch, *select)?;
                Ok(picked)
            }
            ChannelMode::LosUla { elements } => {
                if *elements == 0 {
                    return Err(ChannelError::BadParameter("need at least 1 element"));
                }
                Ok(gen_ula_steering(*elements, theta.cos()))
            }
        }
    }
}

/// Mean per-port energy of the best-`m` selection, averaged over channel
/// realizations with the line-of-sight angle uniform on `(0, pi)`.
///
/// Trial `t` draws from `stream.substream(experiment, t)` with the experiment
/// taken from the id already carried by `stream`, so the estimate is
/// independent of the parallel schedule.
pub fn avg_channel_gain(
    params: &ChannelParams,
    m: usize,
    trials: u32,
    stream: RandomStream,
) -> Result<McEstimate, ChannelError> {
    params.validate()?;
    if m == 0 || m > params.ports {
        return Err(ChannelError::Selection);
    }
    if trials == 0 {
        return Err(ChannelError::BadParameter("need at least one trial"));
    }
    let experiment = (stream.id() >> 32) as u32;
    let values: Result<Vec<f64>, ChannelError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(experiment, t);
            let mut rng = sub.rng();
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::PI;
            let ch = gen_fas_channel_rng(params, theta, &mut rng)?;
            let (_, picked) = select_ports_optimal(&ch, m)?;
            Ok(picked.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64)
        })
        .collect();
    Ok(McEstimate::from_values(&values?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mra::PortPattern;
    use crate::numerics::linalg::norm_sqr;

    fn base_params() -> ChannelParams {
        ChannelParams { ports: 4, aperture: 1.0, rice_k: 0.5, scatterers: 3, omega: 1.0 }
    }

    #[test]
    fn parameter_validation() {
        let mut p = base_params();
        p.ports = 1;
        assert!(gen_fas_channel(&p, 1.0, RandomStream::new(1)).is_err());
        let mut p = base_params();
        p.aperture = 0.0;
        assert!(gen_fas_channel(&p, 1.0, RandomStream::new(1)).is_err());
        let p = base_params();
        assert!(gen_fas_channel(&p, -0.5, RandomStream::new(1)).is_err());
        assert!(gen_fas_channel(&p, 4.0, RandomStream::new(1)).is_err());
    }

    #[test]
    fn same_stream_reproduces_identical_response() {
        let p = base_params();
        let s = RandomStream::new(99).substream(2, 5);
        let a = gen_fas_channel(&p, 1.1, s).unwrap();
        let b = gen_fas_channel(&p, 1.1, s).unwrap();
        assert_eq!(a.response, b.response);
    }

    #[test]
    fn pure_los_moduli_are_flat() {
        // With no scatterers and a large power ratio the modulus approaches
        // sqrt(omega) at every port.
        let p = ChannelParams { ports: 8, aperture: 2.0, rice_k: 1e12, scatterers: 0, omega: 1.0 };
        let ch = gen_fas_channel(&p, 0.7, RandomStream::new(5)).unwrap();
        for z in &ch.response {
            assert!((z.norm() - 1.0).abs() < 1e-6, "modulus {}", z.norm());
        }
    }

    #[test]
    fn mean_power_approaches_omega() {
        let p = base_params();
        let trials = 20_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let s = RandomStream::new(7).substream(1, t);
            let mut rng = s.rng();
            let theta = rng.gen::<f64>() * std::f64::consts::PI;
            let ch = gen_fas_channel_rng(&p, theta, &mut rng).unwrap();
            acc += norm_sqr(&ch.response) / p.ports as f64;
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean port power {mean}");
    }

    #[test]
    fn optimal_selection_orders_by_modulus_with_index_tiebreak() {
        let resp = vec![
            Cx::new(3.0, 0.0),
            Cx::new(1.0, 0.0),
            Cx::new(4.0, 0.0),
            Cx::new(1.0, 0.0),
            Cx::new(5.0, 0.0),
        ];
        let ch = ChannelRealization::from_response(resp, 0.5);
        let (idx, picked) = select_ports_optimal(&ch, 3).unwrap();
        assert_eq!(idx, vec![0, 2, 4]);
        assert_eq!(picked[0], Cx::new(3.0, 0.0));
        // Equal moduli resolve toward lower indices.
        let flat = ChannelRealization::from_response(vec![Cx::new(1.0, 0.0); 6], 0.5);
        let (idx, _) = select_ports_optimal(&flat, 3).unwrap();
        assert_eq!(idx, vec![0, 1, 2]);
        assert!(select_ports_optimal(&flat, 0).is_err());
        assert!(select_ports_optimal(&flat, 7).is_err());
    }

    #[test]
    fn fixed_selection_gathers_pattern_entries() {
        let resp: Vec<Cx> = (0..5).map(|i| Cx::new(i as f64, -(i as f64))).collect();
        let ch = ChannelRealization::from_response(resp.clone(), 0.3);
        let pat = PortPattern::new(vec![0, 1, 3]).unwrap();
        let picked = select_ports_fixed(&ch, &pat).unwrap();
        assert_eq!(picked, vec![resp[0], resp[1], resp[3]]);
        let too_wide = PortPattern::new(vec![0, 5]).unwrap();
        assert!(select_ports_fixed(&ch, &too_wide).is_err());
    }

    #[test]
    fn los_only_selection_is_norm_equivalent_to_fixed() {
        // All moduli equal, so any m ports carry the same energy.
        let p = ChannelParams { ports: 6, aperture: 2.5, rice_k: 1e12, scatterers: 0, omega: 1.0 };
        let ch = gen_fas_channel(&p, 1.2, RandomStream::new(3)).unwrap();
        let (_, optimal) = select_ports_optimal(&ch, 3).unwrap();
        let fixed = select_ports_fixed(&ch, &PortPattern::new(vec![0, 2, 5]).unwrap()).unwrap();
        assert!((norm_sqr(&optimal) - norm_sqr(&fixed)).abs() < 1e-9);
    }

    #[test]
    fn ula_steering_conjugate_reversal_product() {
        // Closed form: sum_i e^{-j pi i c} e^{-j pi (m-1-i) c} = m e^{-j pi (m-1) c}.
        for m in [2usize, 3, 8, 16] {
            for &cos_theta in &[-0.9, -0.3, 0.0, 0.41, 1.0] {
                let g = gen_ula_steering(m, cos_theta);
                let mut prod = Cx::new(0.0, 0.0);
                for i in 0..m {
                    prod += g[i] * g[m - 1 - i];
                }
                let expect =
                    Cx::from_polar(m as f64, -std::f64::consts::PI * (m as f64 - 1.0) * cos_theta);
                assert!((prod - expect).norm() < 1e-10 * m as f64);
            }
        }
    }

    #[test]
    fn channel_mode_draws_have_declared_dimension() {
        let fluid = ChannelMode::Fluid { params: base_params(), select: 3 };
        let ula = ChannelMode::LosUla { elements: 5 };
        let mut rng = RandomStream::new(21).rng();
        let g = fluid.draw_rng(&mut rng).unwrap();
        assert_eq!(g.len(), fluid.dimension());
        let h = ula.draw_rng(&mut rng).unwrap();
        assert_eq!(h.len(), 5);
        for z in &h {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        let mut r1 = RandomStream::new(21).rng();
        let mut r2 = RandomStream::new(21).rng();
        assert_eq!(fluid.draw_rng(&mut r1).unwrap(), fluid.draw_rng(&mut r2).unwrap());
    }

    #[test]
    fn gain_estimate_is_deterministic_and_fades_with_more_ports_selected() {
        let p = base_params();
        let stream = RandomStream::new(11).substream(1, 0);
        let a = avg_channel_gain(&p, 2, 4_000, stream).unwrap();
        let b = avg_channel_gain(&p, 2, 4_000, stream).unwrap();
        assert_eq!(a, b);
        // Selecting more ports can only dilute the average per-port energy.
        let mut last = f64::INFINITY;
        for m in [1usize, 2, 3, 4] {
            let est = avg_channel_gain(&p, m, 4_000, stream).unwrap();
            assert!(est.mean <= last + 1e-12, "gain must be nonincreasing in m");
            last = est.mean;
        }
        // Selection beats the unselected average, which sits at omega.
        let est = avg_channel_gain(&p, 2, 4_000, stream).unwrap();
        assert!(est.mean > 1.0, "selection gain {}", est.mean);
        assert!(est.std_err > 0.0 && est.std_err < 0.05);
    }
}
