//! Covariance structure of pairs of signed cubic variations of fractional
//! Brownian motion with Hurst index `1/6`.
//!
//! For a fractional Brownian motion `B` with `H = 1/6`, the signed cubic
//! variation on the mesh `1/n` is
//!
//! ```text
//! W_n(t) = Σ_{j=1}^{⌊nt⌋} (B(j/n) - B((j-1)/n))³
//! ```
//!
//! and converges in law to `κ` times a Brownian motion independent of `B`.
//! Two subsequences `W_{a_n}` and `W_{b_n}` converge jointly to a correlated
//! pair whose cross-covariance depends on how `a_n` and `b_n` relate. This
//! crate computes that structure:
//!
//! * [`kernel`]: the fBm covariance, the four-point increment function `Φ`
//!   and its decay envelopes.
//! * [`series`]: the cubed-covariance series `f_L`, `κ²` and `κ_L²` with
//!   rigorous truncation certificates.
//! * [`limits`]: `ρ(t)`, `∫₀ᵗ ρ`, the asymptotic correlation `γ(t)`, the
//!   diffusion matrix `σ(t)` and a sampler for the limit process.
//! * [`exact`]: exact finite-`n` covariances via the third Hermite chaos,
//!   in full or certified banded form.
//! * [`simulate`]: seeded fBm path generation, Monte Carlo covariance
//!   estimates and normality diagnostics.
//!
//! ```
//! use cubevar::series::{kappa_sq, TruncationBudget};
//!
//! let k2 = kappa_sq(TruncationBudget::Tolerance(1e-10)).unwrap();
//! assert!((k2.value - 5.3911644).abs() < 1e-7);
//! assert!(k2.error_bound <= 1e-10);
//! ```

pub mod error;
pub mod exact;
pub mod kernel;
pub mod limits;
pub mod quad;
pub mod series;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use series::{CertifiedValue, TruncationBudget};

/// Relative slack applied before flooring a product `n · t` that should land
/// on an integer but may have picked up rounding error (`10 * 0.3`).
const SNAP: f64 = 1e-12;

/// `⌊n t⌋` for a mesh count `n` and a nonnegative time `t`, snapping values
/// within relative `1e-12` of an integer onto it.
pub(crate) fn grid_count(n: u64, t: f64) -> u64 {
    split_unit(n as f64 * t).0 as u64
}

/// Splits `x ≥ 0` into `(⌊x⌋, x - ⌊x⌋)` with the same snapping as
/// [`grid_count`].
pub(crate) fn split_unit(x: f64) -> (f64, f64) {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        (r, 0.0)
    } else {
        let w = x.floor();
        (w, x - w)
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/kernel.md")]
    pub struct Kernel;
    #[doc = include_str!("../../../book/src/series.md")]
    pub struct Series;
    #[doc = include_str!("../../../book/src/limits.md")]
    pub struct Limits;
    #[doc = include_str!("../../../book/src/exact.md")]
    pub struct Exact;
    #[doc = include_str!("../../../book/src/simulate.md")]
    pub struct Simulate;
}
