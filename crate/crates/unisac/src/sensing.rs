//! Virtual-array sensing built on a covariance vectorization.
//!
//! A pattern of `m` selected ports observing a far-field source produces the
//! covariance `Phi = p g g^H + s_z I`. Stacking `Phi` column-major turns the
//! angle into a sparse-recovery unknown: the dictionary column for a grid
//! direction with port response `g` is `conj(g) (x) g`, an `m^2`-entry
//! unit-modulus vector, and the noise contributes `s_z vec(I)` on the
//! diagonal positions.
//!
//! The module provides the codebook over a uniform `cos(theta)` grid, greedy
//! sparse solvers (matching pursuit and two support-refinement variants),
//! the closed-form coefficient error bound with its dictionary-coherence
//! certificate, the variance bound it implies for angle estimation, and two
//! direct angle estimators: a grid readout of the recovered support and a
//! log-ratio estimator built on the product of the response with its own
//! reversal.

use crate::channel::{gen_fas_channel_rng, select_ports_fixed, ChannelError, ChannelParams, McEstimate};
use crate::mra::PortPattern;
use crate::numerics::linalg::{
    inner, kron, largest_eigenvalue, least_squares, norm_sqr, CMat, LinalgError,
};
use crate::numerics::rng::{complex_gaussian, RandomStream};
use crate::Cx;
use rayon::prelude::*;
use std::collections::BTreeSet;
use thiserror::Error;

/// Errors raised by codebook construction, solvers, and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("invalid grid: {0}")]
    Grid(&'static str),
    #[error("invalid pattern geometry: {0}")]
    Geometry(&'static str),
    #[error("grid index out of range")]
    Target,
    #[error("solver failed: {0}")]
    Solver(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Line-of-sight response of the selected ports for a direction cosine:
/// entry `i` is `e^{-j 2 pi n_i W c / (ports_total - 1)}`.
pub fn los_port_response(
    pattern: &PortPattern,
    ports_total: usize,
    surface_w: f64,
    cos_theta: f64,
) -> Result<Vec<Cx>, SensingError> {
    if ports_total < 2 {
        return Err(SensingError::Geometry("need at least 2 ports"));
    }
    if pattern.aperture() as usize >= ports_total {
        return Err(SensingError::Geometry("pattern exceeds the port count"));
    }
    if !(surface_w > 0.0) || !surface_w.is_finite() {
        return Err(SensingError::Geometry("surface span must be positive"));
    }
    let unit = std::f64::consts::TAU * surface_w / (ports_total as f64 - 1.0);
    Ok(pattern
        .indices()
        .iter()
        .map(|&n| Cx::from_polar(1.0, -(n as f64) * unit * cos_theta))
        .collect())
}

/// Dictionary column for one direction: `conj(g) (x) g` of the line-of-sight
/// port response.
pub fn steering_virtual(
    pattern: &PortPattern,
    ports_total: usize,
    surface_w: f64,
    cos_theta: f64,
) -> Result<Vec<Cx>, SensingError> {
    let g = los_port_response(pattern, ports_total, surface_w, cos_theta)?;
    let conj: Vec<Cx> = g.iter().map(|z| z.conj()).collect();
    Ok(kron(&conj, &g))
}

/// `vec(I_m)` in the stacked-covariance coordinates: ones at the diagonal
/// positions `i (m + 1)`.
pub fn identity_vec(m: usize) -> Vec<Cx> {
    let mut v = vec![Cx::new(0.0, 0.0); m * m];
    for i in 0..m {
        v[i * (m + 1)] = Cx::new(1.0, 0.0);
    }
    v
}

/// Angular dictionary over a uniform direction-cosine grid.
#[derive(Debug, Clone)]
pub struct SensingCodebook {
    pattern: PortPattern,
    ports_total: usize,
    surface_w: f64,
    grid: Vec<f64>,
    columns: CMat,
    gamma_max: f64,
}

impl SensingCodebook {
    /// Selected port pattern.
    pub fn pattern(&self) -> &PortPattern {
        &self.pattern
    }

    /// Total number of selectable ports.
    pub fn ports_total(&self) -> usize {
        self.ports_total
    }

    /// Surface span in wavelengths.
    pub fn surface_w(&self) -> f64 {
        self.surface_w
    }

    /// Direction-cosine grid points.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Number of grid directions.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    /// True when the grid is empty (never for a built codebook).
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Stacked-covariance dimension `m^2`.
    pub fn dimension(&self) -> usize {
        self.columns.rows()
    }

    /// Number of selected ports.
    pub fn m(&self) -> usize {
        self.pattern.m()
    }

    /// One dictionary column.
    pub fn column(&self, j: usize) -> &[Cx] {
        self.columns.col(j)
    }

    /// Largest eigenvalue of the dictionary Gram matrix.
    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }
}

/// Uniform direction-cosine grid: `n` points spanning
/// `[-1 + 1/n, 1 - 1/n]` inclusive.
pub fn cos_grid(n: usize) -> Result<Vec<f64>, SensingError> {
    if n < 2 {
        return Err(SensingError::Grid("need at least 2 grid points"));
    }
    let delta = 1.0 / n as f64;
    let lo = -1.0 + delta;
    let hi = 1.0 - delta;
    let step = (hi - lo) / (n as f64 - 1.0);
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// Builds the dictionary for a port pattern and grid size, computing the
/// Gram spectral radius once.
pub fn build_codebook(
    pattern: &PortPattern,
    ports_total: usize,
    surface_w: f64,
    n_grid: usize,
) -> Result<SensingCodebook, SensingError> {
    let grid = cos_grid(n_grid)?;
    let m = pattern.m();
    if m < 2 {
        return Err(SensingError::Geometry("need at least 2 selected ports"));
    }
    let cols: Result<Vec<Vec<Cx>>, SensingError> = grid
        .iter()
        .map(|&c| steering_virtual(pattern, ports_total, surface_w, c))
        .collect();
    let columns = CMat::from_cols(&cols?).map_err(SensingError::from)?;
    let gamma_max = dictionary_gamma(&columns)?;
    Ok(SensingCodebook {
        pattern: pattern.clone(),
        ports_total,
        surface_w,
        grid,
        columns,
        gamma_max,
    })
}

/// Largest Gram eigenvalue of an explicit dictionary, working on whichever
/// of `A^H A` and `A A^H` is smaller (they share the nonzero spectrum).
pub fn dictionary_gamma(columns: &CMat) -> Result<f64, SensingError> {
    let gram = if columns.rows() <= columns.cols() {
        columns.outer_gram()
    } else {
        columns.gram()
    };
    Ok(largest_eigenvalue(&gram)?)
}

/// Noise-free expectation-mode observation of a single grid target:
/// `power * a_t + sigma_z2 * vec(I)`.
pub fn observe_expectation(
    book: &SensingCodebook,
    target: usize,
    power: f64,
    sigma_z2: f64,
) -> Result<Vec<Cx>, SensingError> {
    if target >= book.len() {
        return Err(SensingError::Target);
    }
    let mut v: Vec<Cx> = book.column(target).iter().map(|z| z * power).collect();
    let m = book.m();
    for i in 0..m {
        v[i * (m + 1)] += sigma_z2;
    }
    Ok(v)
}

/// Sampled observation: one noisy steering draw `g + z` with
/// `z ~ CN(0, sigma_z2 I_m)`, vectorized as its own outer product. The true
/// direction cosine need not sit on the grid. Its mean over draws is the
/// expectation-mode observation; it serves realism reports, not the
/// bound-domination tests.
pub fn observe_sampled(
    book: &SensingCodebook,
    cos_theta: f64,
    sigma_z2: f64,
    stream: RandomStream,
) -> Result<Vec<Cx>, SensingError> {
    if !(-1.0..=1.0).contains(&cos_theta) {
        return Err(SensingError::Grid("direction cosine must lie in [-1, 1]"));
    }
    let g = los_port_response(&book.pattern, book.ports_total, book.surface_w, cos_theta)?;
    let m = book.m();
    let mut rng = stream.rng();
    let noisy: Vec<Cx> = g.iter().map(|&gi| gi + complex_gaussian(&mut rng, sigma_z2)).collect();
    let mut phi = vec![Cx::new(0.0, 0.0); m * m];
    for c in 0..m {
        for r in 0..m {
            phi[r + c * m] = noisy[r] * noisy[c].conj();
        }
    }
    Ok(phi)
}

/// Result of a sparse solve: a dense coefficient vector over the grid, the
/// selected support, and the final residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub coefficients: Vec<Cx>,
    pub support: Vec<usize>,
    pub residual_norm: f64,
}

impl SparseEstimate {
    /// Grid index of the largest-magnitude coefficient, if any was selected.
    pub fn strongest(&self) -> Option<usize> {
        self.support
            .iter()
            .copied()
            .max_by(|&a, &b| {
                self.coefficients[a]
                    .norm_sqr()
                    .partial_cmp(&self.coefficients[b].norm_sqr())
                    .expect("finite coefficients")
                    .then(b.cmp(&a))
            })
    }

    /// Euclidean distance between the coefficient vector and a sparse truth
    /// given as `(grid index, amplitude)` pairs.
    pub fn recovery_error_l2(&self, truth: &[(usize, Cx)]) -> f64 {
        let mut diff: Vec<Cx> = self.coefficients.clone();
        for &(j, amp) in truth {
            diff[j] -= amp;
        }
        norm_sqr(&diff).sqrt()
    }
}

fn correlations(book: &SensingCodebook, r: &[Cx]) -> Vec<Cx> {
    (0..book.len()).map(|j| inner(book.column(j), r)).collect()
}

fn subtract_column(r: &mut [Cx], col: &[Cx], coef: Cx) {
    for (x, a) in r.iter_mut().zip(col) {
        *x -= coef * a;
    }
}

fn reconstruct_residual(book: &SensingCodebook, v: &[Cx], coefficients: &[Cx], support: &[usize]) -> Vec<Cx> {
    let mut r = v.to_vec();
    for &j in support {
        subtract_column(&mut r, book.column(j), coefficients[j]);
    }
    r
}

fn check_solver_input(book: &SensingCodebook, v: &[Cx], k: usize) -> Result<(), SensingError> {
    if v.len() != book.dimension() {
        return Err(SensingError::Solver("observation dimension mismatch"));
    }
    if k > book.len() {
        return Err(SensingError::Solver("sparsity exceeds the grid size"));
    }
    Ok(())
}

fn zero_estimate(book: &SensingCodebook, v: &[Cx]) -> SparseEstimate {
    SparseEstimate {
        coefficients: vec![Cx::new(0.0, 0.0); book.len()],
        support: Vec::new(),
        residual_norm: norm_sqr(v).sqrt(),
    }
}

fn solve_on_support(
    book: &SensingCodebook,
    v: &[Cx],
    support: &[usize],
) -> Result<Vec<Cx>, SensingError> {
    let cols: Vec<&[Cx]> = support.iter().map(|&j| book.column(j)).collect();
    least_squares(&cols, v).map_err(SensingError::from)
}

/// Matching pursuit with a support cap: each pass updates the coefficient of
/// the best-correlated atom, restricted to the current support once it holds
/// `k` atoms, so the residual norm never increases and the sparsity budget
/// is never exceeded. `k = 0` returns the zero estimate.
pub fn mp_solve(
    book: &SensingCodebook,
    v: &[Cx],
    k: usize,
    iters: usize,
) -> Result<SparseEstimate, SensingError> {
    check_solver_input(book, v, k)?;
    let mut coefficients = vec![Cx::new(0.0, 0.0); book.len()];
    let mut support = BTreeSet::new();
    let mut r = v.to_vec();
    if k > 0 {
        for _ in 0..iters {
            let corr = correlations(book, &r);
            let candidates: Vec<usize> = if support.len() < k {
                (0..book.len()).collect()
            } else {
                support.iter().copied().collect()
            };
            let best = candidates
                .into_iter()
                .max_by(|&a, &b| {
                    corr[a]
                        .norm_sqr()
                        .partial_cmp(&corr[b].norm_sqr())
                        .expect("finite correlations")
                        .then(b.cmp(&a))
                })
                .expect("nonempty candidate set");
            if corr[best].norm_sqr() == 0.0 {
                break;
            }
            let col = book.column(best);
            let step = corr[best] / norm_sqr(col);
            coefficients[best] += step;
            subtract_column(&mut r, col, step);
            support.insert(best);
        }
    }
    Ok(SparseEstimate {
        coefficients,
        support: support.into_iter().collect(),
        residual_norm: norm_sqr(&r).sqrt(),
    })
}

/// Compressive sampling matching pursuit: each pass merges the `2k` largest
/// correlation peaks into the current support, solves least squares on the
/// merged set (at most `3k` columns), prunes to the `k` largest
/// coefficients, and re-fits on the pruned support. The best iterate by
/// residual is kept, starting from the zero estimate, so the returned
/// residual never exceeds the observation norm even when coherent columns
/// make a merged fit degenerate.
pub fn cosamp_solve(
    book: &SensingCodebook,
    v: &[Cx],
    k: usize,
    iters: usize,
) -> Result<SparseEstimate, SensingError> {
    check_solver_input(book, v, k)?;
    let n = book.len();
    let mut best = zero_estimate(book, v);
    if k == 0 {
        return Ok(best);
    }
    let mut support: Vec<usize> = Vec::new();
    let mut r = v.to_vec();
    for _ in 0..iters {
        let corr = correlations(book, &r);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            corr[b]
                .norm_sqr()
                .partial_cmp(&corr[a].norm_sqr())
                .expect("finite correlations")
                .then(a.cmp(&b))
        });
        let mut merged: BTreeSet<usize> = support.iter().copied().collect();
        for &j in order.iter().take(2 * k) {
            if corr[j].norm_sqr() > 0.0 {
                merged.insert(j);
            }
        }
        if merged.is_empty() {
            break;
        }
        let merged: Vec<usize> = merged.into_iter().collect();
        let ls = match solve_on_support(book, v, &merged) {
            Ok(ls) => ls,
            Err(SensingError::Linalg(LinalgError::NotPositiveDefinite)) => break,
            Err(e) => return Err(e),
        };
        let mut ranked: Vec<(usize, Cx)> =
            merged.iter().copied().zip(ls.iter().copied()).collect();
        ranked.sort_by(|a, b| {
            b.1.norm_sqr()
                .partial_cmp(&a.1.norm_sqr())
                .expect("finite coefficients")
                .then(a.0.cmp(&b.0))
        });
        ranked.truncate(k);
        support = ranked.iter().map(|&(j, _)| j).collect();
        support.sort_unstable();
        let refit = match solve_on_support(book, v, &support) {
            Ok(ls) => ls,
            Err(SensingError::Linalg(LinalgError::NotPositiveDefinite)) => break,
            Err(e) => return Err(e),
        };
        let mut coefficients = vec![Cx::new(0.0, 0.0); n];
        for (&j, &c) in support.iter().zip(refit.iter()) {
            coefficients[j] = c;
        }
        r = reconstruct_residual(book, v, &coefficients, &support);
        let residual_norm = norm_sqr(&r).sqrt();
        if residual_norm < best.residual_norm {
            best = SparseEstimate { coefficients, support: support.clone(), residual_norm };
        } else {
            break;
        }
        if best.residual_norm <= 1e-12 * norm_sqr(v).sqrt() {
            break;
        }
    }
    Ok(best)
}

/// Regularized orthogonal matching pursuit: each pass takes the `k` largest
/// correlation peaks, keeps the maximal-energy group whose magnitudes are
/// within a factor 2 of each other, accumulates it into the support (capped
/// at `k`), and re-solves least squares on the support.
pub fn romp_solve(
    book: &SensingCodebook,
    v: &[Cx],
    k: usize,
    iters: usize,
) -> Result<SparseEstimate, SensingError> {
    check_solver_input(book, v, k)?;
    let n = book.len();
    if k == 0 {
        return Ok(zero_estimate(book, v));
    }
    let mut support: BTreeSet<usize> = BTreeSet::new();
    let mut coefficients = vec![Cx::new(0.0, 0.0); n];
    let mut r = v.to_vec();
    for _ in 0..iters {
        if support.len() >= k {
            break;
        }
        let corr = correlations(book, &r);
        let mut candidates: Vec<(usize, f64)> = (0..n)
            .filter(|j| !support.contains(j))
            .map(|j| (j, corr[j].norm()))
            .filter(|&(_, a)| a > 0.0)
            .collect();
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
        candidates.truncate(k);
        // Maximal comparable-magnitude group with the largest energy; the
        // list is sorted descending, so a group starting at i extends while
        // magnitudes stay above half of candidates[i].
        let mut best_group = (0usize, 0usize, 0.0f64);
        for i in 0..candidates.len() {
            let ceiling = candidates[i].1;
            let mut energy = 0.0;
            let mut j = i;
            while j < candidates.len() && candidates[j].1 * 2.0 >= ceiling {
                energy += candidates[j].1 * candidates[j].1;
                j += 1;
            }
            if energy > best_group.2 {
                best_group = (i, j, energy);
            }
        }
        let room = k - support.len();
        for &(j, _) in candidates[best_group.0..best_group.1].iter().take(room) {
            support.insert(j);
        }
        let support_vec: Vec<usize> = support.iter().copied().collect();
        let ls = match solve_on_support(book, v, &support_vec) {
            Ok(ls) => ls,
            Err(SensingError::Linalg(LinalgError::NotPositiveDefinite)) => break,
            Err(e) => return Err(e),
        };
        coefficients = vec![Cx::new(0.0, 0.0); n];
        for (&j, &c) in support_vec.iter().zip(ls.iter()) {
            coefficients[j] = c;
        }
        r = reconstruct_residual(book, v, &coefficients, &support_vec);
        if norm_sqr(&r).sqrt() <= 1e-12 * norm_sqr(v).sqrt() {
            break;
        }
    }
    let support: Vec<usize> = support.into_iter().collect();
    Ok(SparseEstimate {
        residual_norm: norm_sqr(&r).sqrt(),
        coefficients,
        support,
    })
}

/// Closed-form coefficient error bound for the convex-relaxation recovery:
/// `4 sigma_z2 / m`.
pub fn lasso_error_bound(sigma_z2: f64, m: usize) -> f64 {
    4.0 * sigma_z2 / m as f64
}

/// Largest normalized correlation between the noise term `sigma_z2 vec(I)`
/// and any dictionary column: `max_j |a_j^H n| / m`. With unit-modulus
/// columns every diagonal entry of a column has modulus one, so the value
/// equals `sigma_z2` exactly; this is the coherence certificate behind
/// [`lasso_error_bound`].
pub fn linf_correlation(book: &SensingCodebook, sigma_z2: f64) -> f64 {
    let noise: Vec<Cx> = identity_vec(book.m()).iter().map(|z| z * sigma_z2).collect();
    let m = book.m() as f64;
    (0..book.len())
        .map(|j| inner(book.column(j), &noise).norm() / m)
        .fold(0.0, f64::max)
}

/// Variance bound on the direction-cosine estimate implied by the
/// coefficient error bound: `16 sigma_z2^2 gamma_max / (lambda_bar_sq m^4)`.
pub fn mseaoa_upper(sigma_z2: f64, gamma_max: f64, lambda_bar_sq: f64, m: usize) -> f64 {
    let m4 = (m as f64).powi(4);
    16.0 * sigma_z2 * sigma_z2 * gamma_max / (lambda_bar_sq * m4)
}

/// Geometry tag for the log-ratio angle estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayKind {
    /// Classical half-wavelength array; the phase slope is `pi (m - 1)`.
    Ula,
    /// Fluid surface of span `surface_w`; the phase slope is `2 pi W`.
    Fluid { surface_w: f64 },
}

impl ArrayKind {
    fn phase_slope(&self, m: usize) -> f64 {
        match self {
            ArrayKind::Ula => std::f64::consts::PI * (m as f64 - 1.0),
            ArrayKind::Fluid { surface_w } => std::f64::consts::TAU * surface_w,
        }
    }
}

/// Log-ratio direction-cosine estimator from the product of a response with
/// its own reversal, `p = sum_i g_i g_{m-1-i}`.
///
/// The product's phase is `-slope * cos(theta)` (exactly so for reversal
/// symmetric geometries), but it is only known modulo `2 pi`; when the slope
/// exceeds `pi` several direction cosines share one phase, and `branch_ref`
/// picks the candidate closest to it (a coarse estimate from the sparse
/// recovery stage serves).
pub fn aoa_estimate_logratio(
    g: &[Cx],
    kind: ArrayKind,
    branch_ref: f64,
) -> Result<f64, SensingError> {
    let m = g.len();
    if m < 2 {
        return Err(SensingError::Geometry("need at least 2 entries"));
    }
    let mut p = Cx::new(0.0, 0.0);
    for i in 0..m {
        p += g[i] * g[m - 1 - i];
    }
    if p.norm_sqr() == 0.0 {
        return Err(SensingError::Solver("zero reversal product"));
    }
    let slope = kind.phase_slope(m);
    let principal = -p.arg() / slope;
    let period = std::f64::consts::TAU / slope;
    let k = ((branch_ref - principal) / period).round();
    Ok(principal + k * period)
}

/// Grid readout of a sparse recovery: the direction cosine of the strongest
/// recovered coefficient.
pub fn aoa_estimate_cs(book: &SensingCodebook, estimate: &SparseEstimate) -> Option<f64> {
    estimate.strongest().map(|j| book.grid[j])
}

/// Monte Carlo Gram spectral radius of a dictionary whose columns come from
/// full fading draws: per trial, every grid direction gets an independent
/// channel realization observed at the fixed pattern ports, and the largest
/// Gram eigenvalue of the resulting dictionary is recorded.
///
/// `channel.ports` is the total port count and `channel.aperture` the
/// surface span. Trial `t` draws from the substream `(experiment, t)` with
/// the experiment inherited from `stream`.
pub fn gamma_max_mc(
    channel: &ChannelParams,
    pattern: &PortPattern,
    n_grid: usize,
    trials: u32,
    stream: RandomStream,
) -> Result<McEstimate, SensingError> {
    let grid = cos_grid(n_grid)?;
    if pattern.aperture() as usize >= channel.ports {
        return Err(SensingError::Geometry("pattern exceeds the port count"));
    }
    if trials == 0 {
        return Err(SensingError::Solver("need at least one trial"));
    }
    let experiment = (stream.id() >> 32) as u32;
    let values: Result<Vec<f64>, SensingError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.substream(experiment, t).rng();
            let mut cols: Vec<Vec<Cx>> = Vec::with_capacity(grid.len());
            for &c in &grid {
                let ch = gen_fas_channel_rng(channel, c.acos(), &mut rng)?;
                let g = select_ports_fixed(&ch, pattern)?;
                let conj: Vec<Cx> = g.iter().map(|z| z.conj()).collect();
                cols.push(kron(&conj, &g));
            }
            let columns = CMat::from_cols(&cols)?;
            dictionary_gamma(&columns)
        })
        .collect();
    Ok(McEstimate::from_values(&values?))
}
