//! Covariance kernel of fractional Brownian motion with Hurst index 1/6.
//!
//! Everything downstream is built from two closed forms: the covariance
//! `R(s, t) = (|t|^{1/3} + |s|^{1/3} - |t - s|^{1/3}) / 2` of the two-sided
//! process, and the four-point function
//!
//! ```text
//! Φ(s, t, u, v) = 2 E[(B(t) - B(s)) (B(v) - B(u))]
//!               = |t - u|^{1/3} + |s - v|^{1/3} - |s - u|^{1/3} - |t - v|^{1/3}
//! ```
//!
//! `Φ` carries the factor two, so the grid version [`phi_n`] is literally `Φ`
//! evaluated at grid points and equals twice the covariance of two grid
//! increments.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Hurst index of the underlying process. Fixed throughout the crate.
pub const HURST: f64 = 1.0 / 6.0;

#[inline]
pub(crate) fn root3(x: f64) -> f64 {
    x.abs().cbrt()
}

#[inline]
pub(crate) fn root3_int(x: i128) -> f64 {
    // exact conversion for |x| < 2^53, which covers every grid we accept
    (x.unsigned_abs() as f64).cbrt()
}

/// Four ordered time points `(s, t, u, v)`: the increment `B(t) - B(s)`
/// paired with `B(v) - B(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl Quad {
    pub fn new(s: f64, t: f64, u: f64, v: f64) -> Self {
        Self { s, t, u, v }
    }

    fn check(&self) -> Result<()> {
        ensure_finite("s", self.s)?;
        ensure_finite("t", self.t)?;
        ensure_finite("u", self.u)?;
        ensure_finite("v", self.v)
    }

    /// The same increments listed in the opposite order.
    pub fn swapped(&self) -> Self {
        Self::new(self.u, self.v, self.s, self.t)
    }
}

/// Pair of mesh counts `(a, b)`: the grids `j / a` and `k / b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPair {
    pub a: u64,
    pub b: u64,
}

impl GridPair {
    pub fn new(a: u64, b: u64) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::Precondition(format!(
                "mesh counts must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn swapped(&self) -> Self {
        Self { a: self.b, b: self.a }
    }

    /// `b / a`, the ratio that governs the asymptotic regime.
    pub fn ratio(&self) -> f64 {
        self.b as f64 / self.a as f64
    }
}

/// Increment indices `(j, k)`: `ΔB_{j,a}` against `ΔB_{k,b}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IncrementIndex {
    pub j: i64,
    pub k: i64,
}

impl IncrementIndex {
    pub fn new(j: i64, k: i64) -> Self {
        Self { j, k }
    }
}

/// Covariance `E[B(s) B(t)]` of the two-sided process.
pub fn cov_r(s: f64, t: f64) -> Result<f64> {
    ensure_finite("s", s)?;
    ensure_finite("t", t)?;
    Ok(cov_r_unchecked(s, t))
}

#[inline]
pub(crate) fn cov_r_unchecked(s: f64, t: f64) -> f64 {
    0.5 * (root3(t) + root3(s) - root3(t - s))
}

/// The four-point function `Φ(s, t, u, v)`.
pub fn phi(q: Quad) -> Result<f64> {
    q.check()?;
    Ok(phi_unchecked(q.s, q.t, q.u, q.v))
}

/// `Φ` without input validation, for hot loops over values already known
/// to be finite.
///
/// The two positive terms are added first so that `Φ(s,t,u,v)` and
/// `Φ(u,v,s,t)` round identically.
#[inline]
pub fn phi_unchecked(s: f64, t: f64, u: f64, v: f64) -> f64 {
    (root3(t - u) + root3(s - v)) - root3(s - u) - root3(t - v)
}

/// `Φ` at the grid points `((j-1)/a, j/a, (k-1)/b, k/b)`.
///
/// Evaluated through the scaling identity with factor `ab`, so every
/// argument difference is an exact integer and no rounding enters before the
/// cube roots.
pub fn phi_n(g: GridPair, idx: IncrementIndex) -> f64 {
    let (a, b) = (g.a as i128, g.b as i128);
    let (j, k) = (idx.j as i128, idx.k as i128);
    let raw = phi_int((j - 1) * b, j * b, (k - 1) * a, k * a);
    raw / ((g.a as f64) * (g.b as f64)).cbrt()
}

#[inline]
pub(crate) fn phi_int(s: i128, t: i128, u: i128, v: i128) -> f64 {
    (root3_int(t - u) + root3_int(s - v)) - root3_int(s - u) - root3_int(t - v)
}

/// Upper bound `8 (1/a ∧ 1/b)` on `|Φ_n(j, k)|³`, uniform in `(j, k)`.
pub fn phi_n_cube_bound(g: GridPair) -> f64 {
    8.0 / (g.a.max(g.b) as f64)
}

/// A named upper bound on `|Φ(q)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub name: &'static str,
    pub bound: f64,
}

/// Every decay estimate that applies to `q`.
///
/// The coarse bound `2 (|t - s| ∧ |v - u|)^{1/3}` is always present. When the
/// increments are disjoint (`u < v < s < t`, or the mirrored order) the three
/// separated-case bounds follow; when one increment sits strictly inside the
/// other the interleaved bound follows.
pub fn phi_envelopes(q: Quad) -> Vec<Envelope> {
    let mut out = vec![Envelope {
        name: "coarse",
        bound: 2.0 * (q.t - q.s).abs().min((q.v - q.u).abs()).cbrt(),
    }];
    for o in [q, q.swapped()] {
        let Quad { s, t, u, v } = o;
        if u < v && v < s && s < t {
            let (ts, vu, gap) = (t - s, v - u, s - v);
            out.push(Envelope {
                name: "separated_product",
                bound: 2.0 / 9.0 * ts * vu * gap.powf(-5.0 / 3.0),
            });
            out.push(Envelope {
                name: "separated_left",
                bound: ts.powf(0.25) * vu.powf(11.0 / 12.0) * gap.powf(-5.0 / 6.0),
            });
            out.push(Envelope {
                name: "separated_right",
                bound: ts.powf(11.0 / 12.0) * vu.powf(0.25) * gap.powf(-5.0 / 6.0),
            });
        } else if u < s && s < t && t < v {
            out.push(Envelope {
                name: "interleaved",
                bound: (t - s) / 3.0 * ((v - t).powf(-2.0 / 3.0) + (s - u).powf(-2.0 / 3.0)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CBRT2: f64 = 1.259_921_049_894_873_2;

    #[test]
    fn covariance_examples() {
        assert_eq!(cov_r(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(cov_r(5.0, 0.0).unwrap(), 0.0);
        assert!((cov_r(1.0, 2.0).unwrap() - CBRT2 / 2.0).abs() < 1e-15);
        assert!((cov_r(1.0, 2.0).unwrap() - 0.629_960_5).abs() < 1e-7);
        assert_eq!(cov_r(-3.0, 2.0).unwrap(), cov_r(2.0, -3.0).unwrap());
    }

    #[test]
    fn non_finite_inputs_are_domain_errors() {
        assert!(matches!(cov_r(f64::NAN, 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            phi(Quad::new(0.0, f64::INFINITY, 0.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(Quad::new(0.0, 1.0, 0.0, 1.0)).unwrap(), 2.0);
        let adjacent = phi(Quad::new(0.0, 1.0, 1.0, 2.0)).unwrap();
        assert!((adjacent - (CBRT2 - 2.0)).abs() < 1e-15);
        assert!((adjacent + 0.740_078_95).abs() < 1e-8);
        let scaled = phi(Quad::new(0.0, 8.0, 8.0, 16.0)).unwrap();
        assert!((scaled - 2.0 * (CBRT2 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn grid_phi_examples() {
        for n in [1u64, 7, 64, 1000] {
            let g = GridPair::new(n, n).unwrap();
            let v = phi_n(g, IncrementIndex::new(3, 3));
            assert!((v - 2.0 * (n as f64).powf(-1.0 / 3.0)).abs() < 1e-14);
        }
        let g = GridPair::new(1, 1).unwrap();
        assert!((phi_n(g, IncrementIndex::new(1, 2)) - (CBRT2 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn grid_phi_matches_covariance_expansion() {
        let g = GridPair::new(2, 3).unwrap();
        let (s, t, u, v) = (0.0, 0.5, 1.0 / 3.0, 2.0 / 3.0);
        let brute = 2.0
            * (cov_r(t, v).unwrap() - cov_r(t, u).unwrap() - cov_r(s, v).unwrap()
                + cov_r(s, u).unwrap());
        assert!((phi_n(g, IncrementIndex::new(1, 2)) - brute).abs() < 1e-14);
    }

    #[test]
    fn grid_phi_swaps_exactly() {
        for (a, b, j, k) in [(2, 3, 1, 2), (17, 5, -4, 9), (100, 137, 40, 55)] {
            let g = GridPair::new(a, b).unwrap();
            assert_eq!(
                phi_n(g, IncrementIndex::new(j, k)),
                phi_n(g.swapped(), IncrementIndex::new(k, j))
            );
        }
    }

    #[test]
    fn zero_mesh_rejected() {
        assert!(matches!(GridPair::new(0, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn envelope_examples() {
        let q = Quad::new(2.0, 3.0, 0.0, 1.0);
        let val = phi(q).unwrap().abs();
        let env = phi_envelopes(q);
        assert_eq!(env.len(), 4);
        assert!(env.iter().all(|e| e.bound >= val));

        let q = Quad::new(1.0, 2.0, 0.0, 4.0);
        let env = phi_envelopes(q);
        let inter = env.iter().find(|e| e.name == "interleaved").unwrap();
        assert!(inter.bound >= phi(q).unwrap().abs());

        // overlapping but not nested: only the coarse bound applies
        let env = phi_envelopes(Quad::new(0.0, 2.0, 1.0, 3.0));
        assert_eq!(env.len(), 1);
        assert_eq!(env[0].name, "coarse");
    }
}
