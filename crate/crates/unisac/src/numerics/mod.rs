//! Numeric building blocks: special functions, small dense complex linear
//! algebra, and reproducible random streams.

pub mod linalg;
pub mod rng;
pub mod special;

pub use linalg::{largest_eigenvalue, CMat, LinalgError};
pub use rng::RandomStream;
pub use special::{
    chi2_cdf, chi2_cdf_pair, chi2_inv, gamma_p, gamma_pq, ln_gamma, log_binomial,
    log_binomial_pow2, SpecialError,
};
