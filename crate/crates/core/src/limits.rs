//! Asymptotic covariance structure of `(W_{a_n}, W_{b_n})`.
//!
//! The limit is a pair of Brownian motions with variance `κ² t` each and
//! cross-covariance `∫₀ᵗ ρ`. Which `ρ` applies depends on how `a_n` and `b_n`
//! relate asymptotically; the caller declares that relation as a
//! [`RegimeSpec`] because it cannot be decided from finitely many terms.
//!
//! | regime | `ρ(t)` |
//! |---|---|
//! | `b_n / a_n → 0` or `∞` | `0` |
//! | `b_n / a_n = p/q` eventually | `(3/4p) Σ_{j=1}^{q} f_L(j/q)` |
//! | ratio never equal to its limit `L`, `gcd(a_n, b_n) → ∞` | `(3/4L) ∫₀¹ f_L` |
//! | `b_n ≡ k (mod a_n)` | `(3/4L) f̂_L(kt)` |
//!
//! For the third row with bounded gcd the integral value is only known at
//! `t = 1`; evaluating at other times is allowed but not backed by a limit
//! theorem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, Error, Result};
use crate::quad::integrate_pieces;
use crate::series::{
    certified_tail, f_l, kappa_sq, partial_f_l, resolve_cutoff, CertifiedValue, TruncationBudget,
};
use crate::split_unit;

/// Declared asymptotic relation between the two mesh sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeSpec {
    /// `b_n / a_n → 0` or `∞`.
    Degenerate,
    /// `b_n / a_n = p / q` for all but finitely many `n`, `gcd(p, q) = 1`.
    RationalConstant { p: u64, q: u64 },
    /// `b_n / a_n → L` without ever equalling `L` (eventually).
    IntegralConstant { l: f64 },
    /// `b_n ≡ k (mod a_n)` and `b_n / a_n → L`.
    ModK { l: f64, k: u64 },
}

fn gcd(mut x: u64, mut y: u64) -> u64 {
    while y != 0 {
        (x, y) = (y, x % y);
    }
    x
}

impl RegimeSpec {
    pub fn check(&self) -> Result<()> {
        match *self {
            RegimeSpec::Degenerate => Ok(()),
            RegimeSpec::RationalConstant { p, q } => {
                if p == 0 || q == 0 {
                    return Err(Error::Precondition("p and q must be positive".into()));
                }
                if gcd(p, q) != 1 {
                    return Err(Error::Precondition(format!("p={p} and q={q} are not coprime")));
                }
                Ok(())
            }
            RegimeSpec::IntegralConstant { l } => check_limit_ratio(l),
            RegimeSpec::ModK { l, k } => {
                check_limit_ratio(l)?;
                if k == 0 {
                    return Err(Error::Precondition("k must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// The limiting ratio `L`, or `None` for the degenerate regime.
    pub fn limit_ratio(&self) -> Option<f64> {
        match *self {
            RegimeSpec::Degenerate => None,
            RegimeSpec::RationalConstant { p, q } => Some(p as f64 / q as f64),
            RegimeSpec::IntegralConstant { l } | RegimeSpec::ModK { l, .. } => Some(l),
        }
    }

    /// True when `ρ` does not depend on time.
    pub fn is_constant(&self) -> bool {
        !matches!(self, RegimeSpec::ModK { .. })
    }
}

fn check_limit_ratio(l: f64) -> Result<()> {
    ensure_finite("L", l)?;
    if l <= 0.0 {
        return Err(Error::Precondition(format!("L must be positive, got {l}")));
    }
    Ok(())
}

/// Sanity filter: are these finitely many `(a_n, b_n)` consistent with the
/// declared regime?
///
/// Asymptotic statements allow finitely many exceptions, so the
/// ratio-equality conditions only need to hold on a suffix covering at
/// least half of the pairs. Regimes with a limit ratio additionally require
/// the last ratio to be no farther from `L` than the first.
pub fn validate_regime(spec: RegimeSpec, pairs: &[(u64, u64)]) -> Result<bool> {
    spec.check()?;
    if pairs.is_empty() {
        return Err(Error::Precondition("pair list is empty".into()));
    }
    if pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
        return Err(Error::Precondition("mesh counts must be positive".into()));
    }
    if pairs.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1) {
        return Err(Error::Precondition("pairs must be strictly increasing in both coordinates".into()));
    }
    let ratio = |&(a, b): &(u64, u64)| b as f64 / a as f64;
    let first = ratio(&pairs[0]);
    let last = ratio(&pairs[pairs.len() - 1]);
    let holds_on_suffix = |pred: &dyn Fn(&(u64, u64)) -> bool| {
        let tail_start = pairs.iter().rposition(|p| !pred(p)).map_or(0, |i| i + 1);
        2 * (pairs.len() - tail_start) >= pairs.len()
    };
    let approaches = |l: f64| (last - l).abs() <= (first - l).abs();
    Ok(match spec {
        RegimeSpec::Degenerate => {
            let spread = |r: f64| r.max(1.0 / r);
            pairs.len() == 1
                || pairs.windows(2).all(|w| spread(ratio(&w[1])) >= spread(ratio(&w[0])))
                    && spread(last) > spread(first)
        }
        RegimeSpec::RationalConstant { p, q } => holds_on_suffix(&|&(a, b)| {
            (b as u128) * (q as u128) == (a as u128) * (p as u128)
        }),
        RegimeSpec::IntegralConstant { l } => {
            holds_on_suffix(&|&(a, b)| (b as f64) != l * a as f64) && approaches(l)
        }
        RegimeSpec::ModK { l, k } => {
            pairs.iter().all(|&(a, b)| (b as i128 - k as i128).rem_euclid(a as i128) == 0)
                && approaches(l)
        }
    })
}

/// Quadrature tolerance used when the budget is an explicit cutoff.
const DEFAULT_QUAD_TOL: f64 = 1e-11;

/// The asymptotic covariance density `ρ` of a regime, with the constants it
/// needs precomputed.
#[derive(Debug, Clone)]
pub struct RhoFunction {
    regime: RegimeSpec,
    budget: TruncationBudget,
    kappa_sq: CertifiedValue,
    /// `∫₀¹ f_L`, for the regimes that integrate `f_L`.
    period_integral: Option<CertifiedValue>,
    cutoff: u64,
    quad_tol: f64,
}

/// Lower-triangular factor `σ(t)` with `σσᵀ = [[κ², ρ], [ρ, κ²]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaMatrix {
    pub entries: [[f64; 2]; 2],
}

impl SigmaMatrix {
    /// `σσᵀ`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        let e = &self.entries;
        let mut g = [[0.0; 2]; 2];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = e[i][0] * e[j][0] + e[i][1] * e[j][1];
            }
        }
        g
    }
}

/// `σ = κ [[√(1 - r²), r], [0, 1]]` with `r = ρ / κ²`.
pub fn sigma_matrix(rho_t: f64, kappa_sq_val: f64) -> Result<SigmaMatrix> {
    ensure_finite("rho", rho_t)?;
    ensure_finite("kappa_sq", kappa_sq_val)?;
    if kappa_sq_val <= 0.0 {
        return Err(Error::Domain(format!("kappa_sq must be positive, got {kappa_sq_val}")));
    }
    if rho_t.abs() > kappa_sq_val {
        return Err(Error::Domain(format!("|rho| = {} exceeds kappa_sq = {kappa_sq_val}", rho_t.abs())));
    }
    let kappa = kappa_sq_val.sqrt();
    let r = rho_t / kappa_sq_val;
    Ok(SigmaMatrix { entries: [[kappa * (1.0 - r * r).sqrt(), kappa * r], [0.0, kappa]] })
}

impl RhoFunction {
    pub fn new(regime: RegimeSpec, budget: TruncationBudget) -> Result<Self> {
        regime.check()?;
        let kappa_sq = kappa_sq(budget)?;
        let quad_tol = match budget {
            TruncationBudget::Tolerance(t) => t.clamp(1e-13, 1e-6),
            TruncationBudget::Cutoff(_) => DEFAULT_QUAD_TOL,
        };
        let mut rf = Self {
            regime,
            budget,
            kappa_sq,
            period_integral: None,
            cutoff: 0,
            quad_tol,
        };
        if let RegimeSpec::IntegralConstant { l } | RegimeSpec::ModK { l, .. } = regime {
            rf.cutoff = resolve_cutoff(budget, l)?;
            rf.period_integral = Some(rf.integral_f_l(l, 1.0)?);
        }
        Ok(rf)
    }

    pub fn regime(&self) -> RegimeSpec {
        self.regime
    }

    pub fn budget(&self) -> TruncationBudget {
        self.budget
    }

    /// Certified `κ²`.
    pub fn kappa_sq(&self) -> CertifiedValue {
        self.kappa_sq
    }

    /// `∫₀^{upper} f_L` for `upper ∈ [0, 1]`: truncated series under
    /// quadrature, split at the cusps of `f_L`.
    fn integral_f_l(&self, l: f64, upper: f64) -> Result<CertifiedValue> {
        if upper <= 0.0 {
            return Ok(CertifiedValue::exact(0.0));
        }
        let mut breaks = vec![0.0];
        let kink = l - l.floor();
        if kink > 0.0 && kink < upper {
            breaks.push(kink);
        }
        breaks.push(upper);
        let cutoff = self.cutoff;
        let q = integrate_pieces(|x| partial_f_l(l, x, cutoff), &breaks, self.quad_tol * upper)?;
        Ok(CertifiedValue {
            value: q.value,
            error_bound: certified_tail(cutoff, l)? * upper,
            cutoff_used: cutoff,
            quadrature_estimate: q.error_estimate,
        })
    }

    /// Certified `ρ(t)`.
    pub fn rho_value(&self, t: f64) -> Result<CertifiedValue> {
        ensure_nonnegative("t", t)?;
        match self.regime {
            RegimeSpec::Degenerate => Ok(CertifiedValue::exact(0.0)),
            RegimeSpec::RationalConstant { p, q } => {
                let l = p as f64 / q as f64;
                let mut acc = CertifiedValue::exact(0.0);
                for j in 1..=q {
                    acc = acc + f_l(l, j as f64 / q as f64, self.budget)?;
                }
                Ok(acc.scale(0.75 / p as f64))
            }
            RegimeSpec::IntegralConstant { l } => Ok(self.period()?.scale(0.75 / l)),
            RegimeSpec::ModK { l, k } => {
                let (_, frac) = split_unit(k as f64 * t);
                Ok(f_l(l, frac, TruncationBudget::Cutoff(self.cutoff))?.scale(0.75 / l))
            }
        }
    }

    fn period(&self) -> Result<CertifiedValue> {
        self.period_integral
            .ok_or_else(|| Error::Precondition("regime has no period integral".into()))
    }

    /// Certified `∫₀ᵗ ρ`.
    ///
    /// For the mod-k regime the integral over `[0, t]` is reduced to whole
    /// periods of `f_L` plus one partial period:
    /// `(3/4L) [(⌊kt⌋/k) ∫₀¹ f_L + (1/k) ∫₀^{kt - ⌊kt⌋} f_L]`.
    pub fn cum_cov(&self, t: f64) -> Result<CertifiedValue> {
        ensure_nonnegative("t", t)?;
        match self.regime {
            RegimeSpec::ModK { l, k } => {
                let kf = k as f64;
                let (whole, frac) = split_unit(kf * t);
                let periods = self.period()?.scale(whole / kf);
                let partial = self.integral_f_l(l, frac)?.scale(1.0 / kf);
                Ok((periods + partial).scale(0.75 / l))
            }
            _ => Ok(self.rho_value(0.0)?.scale(t)),
        }
    }

    /// Asymptotic correlation `γ(t) = ∫₀ᵗ ρ / (κ² t)`.
    ///
    /// The rigorous bound comes from interval division of the two
    /// certificates; the quadrature estimate is propagated to first order.
    pub fn gamma(&self, t: f64) -> Result<CertifiedValue> {
        ensure_finite("t", t)?;
        if t <= 0.0 {
            return Err(Error::Precondition(format!("t must be positive, got {t}")));
        }
        // constant regimes divide out t analytically, so γ is the same
        // double at every t
        let (num, t) = if self.regime.is_constant() {
            (self.rho_value(t)?, 1.0)
        } else {
            (self.cum_cov(t)?, t)
        };
        let den = self.kappa_sq;
        let value = num.value / (den.value * t);
        let (dlo, dhi) = (den.value - den.error_bound, den.value + den.error_bound);
        let (nlo, nhi) = (num.value - num.error_bound, num.value + num.error_bound);
        let corners = [nlo / dlo, nlo / dhi, nhi / dlo, nhi / dhi].map(|c| c / t);
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(CertifiedValue {
            value,
            error_bound: (hi - value).max(value - lo).max(0.0),
            cutoff_used: num.cutoff_used.max(den.cutoff_used),
            quadrature_estimate: num.quadrature_estimate / (den.value * t),
        })
    }

    /// `σ(t)` built from the certified `ρ(t)` and `κ²`.
    pub fn sigma(&self, t: f64) -> Result<SigmaMatrix> {
        let rho = self.rho_value(t)?.value;
        let k2 = self.kappa_sq.value;
        // |ρ| ≤ κ² holds analytically; clip rounding-level overshoot
        let rho = if rho.abs() > k2 && rho.abs() <= k2 * (1.0 + 1e-12) { rho.signum() * k2 } else { rho };
        sigma_matrix(rho, k2)
    }

    /// Entrywise bounds on `σ(t)` implied by the truncation certificates of
    /// `ρ(t)` and `κ²`. Each entry is monotone in `|ρ|` and in `κ²`, so the
    /// extremes sit on the corners of the certificate box (or at `ρ = 0`).
    pub fn sigma_error(&self, t: f64) -> Result<[[f64; 2]; 2]> {
        let rho = self.rho_value(t)?;
        let k2 = self.kappa_sq;
        let centre = self.sigma(t)?.entries;
        let entries = |r: f64, k: f64| {
            let kappa = k.sqrt();
            [[(k - r * r / k).max(0.0).sqrt(), r / kappa], [0.0, kappa]]
        };
        let (rlo, rhi) = (rho.value - rho.error_bound, rho.value + rho.error_bound);
        let mut rhos = vec![rlo, rhi];
        if rlo < 0.0 && rhi > 0.0 {
            rhos.push(0.0);
        }
        let mut err = [[0.0f64; 2]; 2];
        for &r in &rhos {
            for k in [k2.value - k2.error_bound, k2.value + k2.error_bound] {
                let e = entries(r, k);
                for i in 0..2 {
                    for j in 0..2 {
                        err[i][j] = err[i][j].max((e[i][j] - centre[i][j]).abs());
                    }
                }
            }
        }
        Ok(err)
    }

    /// Cross-covariance matrix `Cov(X(s), X(t))` of the limit process.
    pub fn limit_cov(&self, s: f64, t: f64) -> Result<[[f64; 2]; 2]> {
        ensure_nonnegative("s", s)?;
        ensure_nonnegative("t", t)?;
        let m = s.min(t);
        let diag = self.kappa_sq.value * m;
        let off = self.cum_cov(m)?.value;
        Ok([[diag, off], [off, diag]])
    }

    /// One draw of the limit process at the given times.
    ///
    /// Increments over consecutive grid intervals are independent Gaussian
    /// vectors with covariance `∫ σσᵀ` over the interval, so the sample is
    /// exact in distribution. Deterministic for a given seed.
    pub fn sample_limit_process(&self, grid: &[f64], seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        for &t in grid {
            ensure_nonnegative("grid point", t)?;
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("grid must be strictly increasing".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = self.kappa_sq.value;
        let (mut x1, mut x2) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
        let (mut prev_t, mut prev_c) = (0.0, 0.0);
        let (mut acc1, mut acc2) = (0.0, 0.0);
        for &t in grid {
            let c = self.cum_cov(t)?.value;
            let var = k2 * (t - prev_t);
            let cross = c - prev_c;
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            if var > 0.0 {
                let sd = var.sqrt();
                let coef = cross / sd;
                acc1 += sd * z1;
                acc2 += coef * z1 + (var - coef * coef).max(0.0).sqrt() * z2;
            }
            x1.push(acc1);
            x2.push(acc2);
            (prev_t, prev_c) = (t, c);
        }
        Ok((x1, x2))
    }
}
