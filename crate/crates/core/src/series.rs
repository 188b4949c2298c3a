//! The cubed-covariance series `f_L = Σ_m f_{m,L}` with rigorous truncation
//! certificates.
//!
//! `f_{m,L}(x) = Φ(x, x+1, m, m+L)³` is eight times the cubed covariance of a
//! unit increment at `x` with an increment of length `L` at `m`. Far from the
//! origin it decays like `|m|^{-5}`, so symmetric truncation `|m| ≤ M` with an
//! integral-comparison tail gives a certificate that costs nothing to
//! evaluate.
//!
//! Two tail bounds are available, both proven from the decay estimates of
//! `Φ` for disjoint increments:
//!
//! * [`series_tail_bound`], from `‖f_{m,L}‖∞ ≤ L^{3/4} |m - 2|^{-5/2}`
//!   (and the mirrored bound for `m < -L`). Tail `O(M^{-3/2})`.
//! * [`decay_tail_bound`], from the product estimate
//!   `|Φ| ≤ (2/9)(t-s)(v-u)(s-v)^{-5/3}`, cubed. Tail `O(M^{-4})`.
//!
//! Certified values use the smaller of the two.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kernel::{root3, root3_int};

/// Largest cutoff a tolerance-driven budget may select.
pub const MAX_CUTOFF: u64 = 1 << 40;

/// Arguments of a single series term `f_{m,L}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FArgs {
    pub m: i64,
    pub l: f64,
    pub x: f64,
}

impl FArgs {
    pub fn new(m: i64, l: f64, x: f64) -> Result<Self> {
        check_ratio(l)?;
        check_unit(x)?;
        Ok(Self { m, l, x })
    }
}

/// How far to sum: either an absolute error target or an explicit
/// symmetric cutoff `|m| ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TruncationBudget {
    Tolerance(f64),
    Cutoff(u64),
}

impl Default for TruncationBudget {
    fn default() -> Self {
        TruncationBudget::Tolerance(1e-10)
    }
}

/// A value with an error bound.
///
/// `error_bound` is rigorous: it accounts only for series truncation, which
/// is bounded analytically. Results that also involve numerical quadrature
/// carry the quadrature's own (heuristic) error estimate separately in
/// `quadrature_estimate`. Floating-point rounding is not included in either.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub error_bound: f64,
    pub cutoff_used: u64,
    pub quadrature_estimate: f64,
}

impl CertifiedValue {
    pub fn exact(value: f64) -> Self {
        Self { value, error_bound: 0.0, cutoff_used: 0, quadrature_estimate: 0.0 }
    }

    /// Rigorous plus heuristic error.
    pub fn total_error(&self) -> f64 {
        self.error_bound + self.quadrature_estimate
    }

    pub fn lower(&self) -> f64 {
        self.value - self.total_error()
    }

    pub fn upper(&self) -> f64 {
        self.value + self.total_error()
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.total_error()
    }

    /// Multiplies value and both error terms by `c`.
    pub fn scale(self, c: f64) -> Self {
        Self {
            value: c * self.value,
            error_bound: c.abs() * self.error_bound,
            cutoff_used: self.cutoff_used,
            quadrature_estimate: c.abs() * self.quadrature_estimate,
        }
    }
}

/// Sum of two certified values; errors add.
impl std::ops::Add for CertifiedValue {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error_bound: self.error_bound + other.error_bound,
            cutoff_used: self.cutoff_used.max(other.cutoff_used),
            quadrature_estimate: self.quadrature_estimate + other.quadrature_estimate,
        }
    }
}

fn check_ratio(l: f64) -> Result<()> {
    ensure_finite("L", l)?;
    if l <= 0.0 {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    ensure_finite("x", x)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// `f_{m,L}(x)`.
pub fn f_ml(args: FArgs) -> f64 {
    f_ml_unchecked(args.m, args.l, args.x)
}

/// `f_{m,L}(x)` extended to every real `x` through translation invariance.
///
/// The offset `x - m` is formed once, so `f_{m,L}(1)` and `f_{m-1,L}(0)`
/// evaluate the same floating-point expression.
#[inline]
pub fn f_ml_unchecked(m: i64, l: f64, x: f64) -> f64 {
    let y = x - m as f64;
    let p = (root3(y + 1.0) + root3(y - l)) - root3(y) - root3(y + 1.0 - l);
    p * p * p
}

/// Sup-norm bound on `f_{m,L}` over `[0, 1]` from the `5/2`-power decay.
pub fn f_ml_sup_bound(m: i64, l: f64) -> f64 {
    let mf = m as f64;
    let decay = if mf < -l {
        l.powf(0.75) * (-mf - l).powf(-2.5)
    } else if m > 2 {
        l.powf(0.75) * (mf - 2.0).powf(-2.5)
    } else {
        8.0
    };
    decay.min(8.0)
}

/// Sup-norm bound on `f_{m,L}` over `[0, 1]` from the cubed product
/// estimate, `(8/729) L³ dist^{-5}`. Much sharper than
/// [`f_ml_sup_bound`] once `|m|` exceeds a few multiples of `L`.
pub fn f_ml_decay_bound(m: i64, l: f64) -> f64 {
    let mf = m as f64;
    let c = 8.0 / 729.0 * l * l * l;
    let decay = if mf < -l {
        c * (-mf - l).powi(-5)
    } else if m > 2 {
        c * (mf - 2.0).powi(-5)
    } else {
        8.0
    };
    decay.min(8.0)
}

fn min_cutoff(l: f64) -> f64 {
    l.ceil().max(2.0)
}

fn check_tail_args(cutoff: u64, l: f64) -> Result<()> {
    check_ratio(l)?;
    if (cutoff as f64) <= min_cutoff(l) {
        return Err(Error::Precondition(format!(
            "cutoff {cutoff} must exceed max(2, ceil(L)) = {}",
            min_cutoff(l)
        )));
    }
    Ok(())
}

/// Bound on `Σ_{|m|>M} ‖f_{m,L}‖∞` from [`f_ml_sup_bound`]:
/// `(2/3) L^{3/4} [(M - L)^{-3/2} + (M - 2)^{-3/2}]`.
pub fn series_tail_bound(cutoff: u64, l: f64) -> Result<f64> {
    check_tail_args(cutoff, l)?;
    let m = cutoff as f64;
    Ok(2.0 / 3.0 * l.powf(0.75) * ((m - l).powf(-1.5) + (m - 2.0).powf(-1.5)))
}

/// Bound on `Σ_{|m|>M} ‖f_{m,L}‖∞` from [`f_ml_decay_bound`]:
/// `(2/729) L³ [(M - L)^{-4} + (M - 2)^{-4}]`.
pub fn decay_tail_bound(cutoff: u64, l: f64) -> Result<f64> {
    check_tail_args(cutoff, l)?;
    let m = cutoff as f64;
    Ok(2.0 / 729.0 * l * l * l * ((m - l).powi(-4) + (m - 2.0).powi(-4)))
}

/// The certificate attached to a truncated sum: the smaller of the two
/// tail bounds.
pub fn certified_tail(cutoff: u64, l: f64) -> Result<f64> {
    Ok(series_tail_bound(cutoff, l)?.min(decay_tail_bound(cutoff, l)?))
}

/// Turns a budget into a concrete cutoff for ratio `l`.
///
/// A tolerance is met by solving both closed-form tails for `M`, taking the
/// cheaper one and rounding up to a power of two.
pub fn resolve_cutoff(budget: TruncationBudget, l: f64) -> Result<u64> {
    check_ratio(l)?;
    match budget {
        TruncationBudget::Cutoff(m) => {
            check_tail_args(m, l)?;
            Ok(m)
        }
        TruncationBudget::Tolerance(tol) => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
            }
            let base = l.max(2.0);
            let by_decay = base + (4.0 * l * l * l / (729.0 * tol)).powf(0.25);
            let by_sup = base + (4.0 / 3.0 * l.powf(0.75) / tol).powf(2.0 / 3.0);
            let solved = by_decay.min(by_sup).ceil().max(min_cutoff(l) + 1.0);
            if solved.is_nan() || solved >= MAX_CUTOFF as f64 {
                return Err(Error::Resource(format!(
                    "tolerance {tol} needs a cutoff beyond {MAX_CUTOFF}"
                )));
            }
            let mut m = (solved as u64).next_power_of_two();
            while certified_tail(m, l)? > tol {
                m *= 2;
                if m > MAX_CUTOFF {
                    return Err(Error::Resource(format!(
                        "tolerance {tol} needs a cutoff beyond {MAX_CUTOFF}"
                    )));
                }
            }
            Ok(m)
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `Σ_{|m|≤M} f_{m,L}(x)`, summed from the outermost terms inward.
pub fn partial_f_l(l: f64, x: f64, cutoff: u64) -> f64 {
    let mut acc = Compensated::default();
    for m in (1..=cutoff as i64).rev() {
        acc.add(f_ml_unchecked(m, l, x));
        acc.add(f_ml_unchecked(-m, l, x));
    }
    acc.add(f_ml_unchecked(0, l, x));
    acc.value()
}

/// Certified `f_L(x)` for `x ∈ [0, 1]`.
pub fn f_l(l: f64, x: f64, budget: TruncationBudget) -> Result<CertifiedValue> {
    check_ratio(l)?;
    check_unit(x)?;
    let cutoff = resolve_cutoff(budget, l)?;
    Ok(CertifiedValue {
        value: partial_f_l(l, x, cutoff),
        error_bound: certified_tail(cutoff, l)?,
        cutoff_used: cutoff,
        quadrature_estimate: 0.0,
    })
}

/// Certified period-one extension `f̂_L(x) = f_L(x - ⌊x⌋)`.
pub fn f_hat_l(l: f64, x: f64, budget: TruncationBudget) -> Result<CertifiedValue> {
    ensure_finite("x", x)?;
    f_l(l, x - x.floor(), budget)
}

/// `κ²` from its defining series
/// `(3/4) Σ_m (|m+1|^{1/3} + |m-1|^{1/3} - 2|m|^{1/3})³`.
///
/// This route does not go through [`f_ml_unchecked`]; comparing it with
/// `(3/4) f_1(0)` checks the two against each other.
pub fn kappa_sq(budget: TruncationBudget) -> Result<CertifiedValue> {
    let cutoff = resolve_cutoff(budget, 1.0)?;
    let term = |m: i64| {
        let m = m as i128;
        let p = (root3_int(m + 1) + root3_int(m - 1)) - 2.0 * root3_int(m);
        p * p * p
    };
    let mut acc = Compensated::default();
    for m in (1..=cutoff as i64).rev() {
        acc.add(term(m));
        acc.add(term(-m));
    }
    acc.add(term(0));
    Ok(CertifiedValue {
        value: 0.75 * acc.value(),
        error_bound: 0.75 * certified_tail(cutoff, 1.0)?,
        cutoff_used: cutoff,
        quadrature_estimate: 0.0,
    })
}

/// `κ_L² = (3 / 4L) f_L(0)`, the limiting covariance constant of the mesh
/// pair `(n, Ln)`.
pub fn kappa_l_sq(l: u32, budget: TruncationBudget) -> Result<CertifiedValue> {
    if l == 0 {
        return Err(Error::Precondition("L must be a positive integer".into()));
    }
    let l = f64::from(l);
    Ok(f_l(l, 0.0, budget)?.scale(0.75 / l))
}
