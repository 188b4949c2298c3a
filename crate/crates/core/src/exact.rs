//! Exact finite-`n` covariances of cubic variations.
//!
//! Split each cube as `ΔB³ = n^{-1/2} h₃(n^{1/6} ΔB) + 3 n^{-1/3} ΔB` with
//! `h₃(x) = x³ - 3x`. The first part lives in the third Wiener chaos and
//! sums to `W̃_n`; the second sums to `3 n^{-1/3} B(⌊nt⌋/n)`. The two chaoses
//! are orthogonal and `E[h₃(X) h₃(Y)] = 6 E[XY]³` for standard Gaussians, so
//!
//! ```text
//! E[W̃_a(s) W̃_b(t)] = (3/4) Σ_{j ≤ ⌊as⌋} Σ_{k ≤ ⌊bt⌋} Φ_n(j, k)³
//! E[W_a(s) W_b(t)]  = E[W̃_a(s) W̃_b(t)] + 9 a^{-1/3} b^{-1/3} R(⌊as⌋/a, ⌊bt⌋/b)
//! ```
//!
//! The full double sum is `O(ab)`. Most of its mass sits near the diagonal
//! `k ≈ j b / a`, and in the shifted index `m = k - ⌊jb/a⌋` every column
//! outside `|m| ≤ M₀ = max(2, ⌈b/a⌉)` is bounded by `27 (|m| - M₀)^{-3}`
//! times the time horizon. Banded mode sums `|m| ≤ M` only and reports that
//! tail as a certified remainder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Error, Result};
use crate::grid_count;
use crate::kernel::{cov_r_unchecked, phi_int, root3_int, GridPair};
use crate::series::Compensated;

/// Largest integer argument handed to the kernel; keeps every `j·b` exact in
/// an `f64`.
const MAX_ARGUMENT: u128 = 1 << 53;
/// Largest number of terms the full engine will attempt.
pub const MAX_FULL_TERMS: u128 = 1 << 38;
const ROW_BLOCK: u64 = 32;

/// Third Hermite polynomial, `x³ - 3x`.
pub fn hermite3(x: f64) -> f64 {
    x * x * x - 3.0 * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Full,
    /// Keep `|k - ⌊jb/a⌋| ≤ band` only.
    Banded { band: u64 },
}

/// Query for `E[W̃_a(s) W̃_b(t)]` (or the uncorrected `W` version).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovRequest {
    pub grid: GridPair,
    pub s: f64,
    pub t: f64,
    pub mode: Mode,
}

impl CovRequest {
    pub fn full(a: u64, b: u64, s: f64, t: f64) -> Result<Self> {
        Ok(Self { grid: GridPair::new(a, b)?, s, t, mode: Mode::Full })
    }

    pub fn banded(a: u64, b: u64, s: f64, t: f64, band: u64) -> Result<Self> {
        Ok(Self { grid: GridPair::new(a, b)?, s, t, mode: Mode::Banded { band } })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovResult {
    pub value: f64,
    /// Bound on the neglected band tail; zero in full mode.
    pub certified_remainder: f64,
}

/// Band half-width and the certified bound on everything outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub half_width: u64,
    pub remainder_bound: f64,
}

fn ceil_ratio(g: GridPair) -> u64 {
    g.b.div_ceil(g.a)
}

/// Smallest band accepted for the grid pair: `max(3, ⌈b/a⌉ + 1)`.
pub fn min_band(g: GridPair) -> u64 {
    (ceil_ratio(g) + 1).max(3)
}

/// `Σ_{r ≥ d} r^{-3}` bounded from above: explicit head, integral tail.
fn cubic_zeta_tail(d: u64) -> f64 {
    const HEAD: u64 = 1000;
    let head: f64 = (d..d + HEAD).rev().map(|r| (r as f64).powi(-3)).sum();
    head + 0.5 * ((d + HEAD - 1) as f64).powi(-2)
}

/// Band certificate for rows `j ≤ ⌊as⌋`:
/// `(3/4) (⌊as⌋/a) Σ_{|m| > M} 27 (|m| - M₀)^{-3}`.
pub fn band_spec(g: GridPair, band: u64, s: f64) -> Result<BandSpec> {
    ensure_nonnegative("s", s)?;
    let need = min_band(g);
    if band < need {
        return Err(Error::Precondition(format!(
            "band {band} is below the minimum {need} for a={}, b={}",
            g.a, g.b
        )));
    }
    let base = ceil_ratio(g).max(2);
    let horizon = grid_count(g.a, s) as f64 / g.a as f64;
    let tail = 2.0 * 27.0 * cubic_zeta_tail(band + 1 - base);
    Ok(BandSpec { half_width: band, remainder_bound: 0.75 * horizon * tail })
}

fn check_size(a: u64, b: u64, rows: u64, cols: u64) -> Result<()> {
    let reach = (rows as u128 + 1) * b as u128 + (cols as u128 + 1) * a as u128;
    if reach >= MAX_ARGUMENT {
        return Err(Error::Resource(format!(
            "grid arguments for a={a}, b={b} exceed exact double range"
        )));
    }
    Ok(())
}

/// Row sums `Σ_k raw(j, k)³` for `j` in `rows`, computed by sweeping the
/// cube-root table `g(j, k) = |jb - ka|^{1/3}` one row at a time.
fn full_row_block(a: i128, b: i128, rows: std::ops::Range<u64>, cols: u64) -> Vec<f64> {
    let row_table = |j: i128, out: &mut Vec<f64>| {
        out.clear();
        out.extend((0..=cols as i128).map(|k| root3_int(j * b - k * a)));
    };
    let mut prev = Vec::with_capacity(cols as usize + 1);
    let mut cur = Vec::with_capacity(cols as usize + 1);
    row_table(rows.start as i128 - 1, &mut prev);
    let mut sums = Vec::with_capacity((rows.end - rows.start) as usize);
    for j in rows {
        row_table(j as i128, &mut cur);
        let mut acc = Compensated::default();
        for k in 1..=cols as usize {
            // same association as kernel::phi_int
            let p = (cur[k - 1] + prev[k]) - prev[k - 1] - cur[k];
            acc.add(p * p * p);
        }
        sums.push(acc.value());
        std::mem::swap(&mut prev, &mut cur);
    }
    sums
}

fn full_sum(g: GridPair, rows: u64, cols: u64) -> f64 {
    let (a, b) = (g.a as i128, g.b as i128);
    let blocks: Vec<_> = (0..rows.div_ceil(ROW_BLOCK))
        .map(|i| 1 + i * ROW_BLOCK..(1 + (i + 1) * ROW_BLOCK).min(rows + 1))
        .collect();
    let row_sums: Vec<Vec<f64>> =
        blocks.into_par_iter().map(|r| full_row_block(a, b, r, cols)).collect();
    let mut acc = Compensated::default();
    for s in row_sums.iter().flatten() {
        acc.add(*s);
    }
    acc.value()
}

fn banded_sum(g: GridPair, rows: u64, cols: u64, band: u64) -> f64 {
    let (a, b) = (g.a as i128, g.b as i128);
    let row = |j: u64| {
        let center = (j as u128 * g.b as u128 / g.a as u128) as i128;
        let lo = (center - band as i128).max(1);
        let hi = (center + band as i128).min(cols as i128);
        let j = j as i128;
        let mut acc = Compensated::default();
        for k in lo..=hi {
            let p = phi_int((j - 1) * b, j * b, (k - 1) * a, k * a);
            acc.add(p * p * p);
        }
        acc.value()
    };
    let row_sums: Vec<f64> = (1..=rows).into_par_iter().map(row).collect();
    let mut acc = Compensated::default();
    for s in row_sums {
        acc.add(s);
    }
    acc.value()
}

/// `E[W̃_a(s) W̃_b(t)] = (3/4) Σ_j Σ_k Φ_n(j, k)³`.
///
/// Full mode sums every term and runs in `O(⌊as⌋ ⌊bt⌋)` with one cube root
/// per term. It is evaluated in a canonical orientation, so swapping
/// `(a, s)` with `(b, t)` reproduces the result bit for bit. Banded mode
/// keeps a band of width `2M + 1` around `k = ⌊jb/a⌋`.
pub fn exact_cov_tilde(req: &CovRequest) -> Result<CovResult> {
    ensure_nonnegative("s", req.s)?;
    ensure_nonnegative("t", req.t)?;
    let g = GridPair::new(req.grid.a, req.grid.b)?;
    let rows = grid_count(g.a, req.s);
    let cols = grid_count(g.b, req.t);
    if let Mode::Banded { band } = req.mode {
        let spec = band_spec(g, band, req.s)?;
        if rows == 0 || cols == 0 {
            return Ok(CovResult { value: 0.0, certified_remainder: spec.remainder_bound });
        }
        check_size(g.a, g.b, rows, cols)?;
        let raw = banded_sum(g, rows, cols, band);
        let value = 0.75 * raw / (g.a as f64 * g.b as f64);
        return Ok(CovResult { value, certified_remainder: spec.remainder_bound });
    }
    if rows == 0 || cols == 0 {
        return Ok(CovResult { value: 0.0, certified_remainder: 0.0 });
    }
    check_size(g.a, g.b, rows, cols)?;
    if rows as u128 * cols as u128 > MAX_FULL_TERMS {
        return Err(Error::Resource(format!(
            "{rows} x {cols} terms is beyond the full engine; use banded mode"
        )));
    }
    let (g, rows, cols) =
        if (rows, g.a) <= (cols, g.b) { (g, rows, cols) } else { (g.swapped(), cols, rows) };
    let raw = full_sum(g, rows, cols);
    Ok(CovResult { value: 0.75 * raw / (g.a as f64 * g.b as f64), certified_remainder: 0.0 })
}

/// `E[W_a(s) W_b(t)]`: the third-chaos part plus the first-chaos correction
/// `9 a^{-1/3} b^{-1/3} R(⌊as⌋/a, ⌊bt⌋/b)`.
pub fn exact_cov_w(req: &CovRequest) -> Result<CovResult> {
    let tilde = exact_cov_tilde(req)?;
    let g = req.grid;
    let x = grid_count(g.a, req.s) as f64 / g.a as f64;
    let y = grid_count(g.b, req.t) as f64 / g.b as f64;
    let first_chaos = 9.0 / (g.a as f64 * g.b as f64).cbrt() * cov_r_unchecked(x, y);
    Ok(CovResult { value: tilde.value + first_chaos, certified_remainder: tilde.certified_remainder })
}

/// Both sides of the scaling identity
/// `E[W̃_a(rt) W̃_b(rt)] = r E[W̃_{ra}(t) W̃_{rb}(t)]`, each by the full
/// engine.
pub fn scaling_check(g: GridPair, r: u64, t: f64) -> Result<(f64, f64)> {
    if r == 0 {
        return Err(Error::Precondition("r must be positive".into()));
    }
    let (ra, rb) = match (g.a.checked_mul(r), g.b.checked_mul(r)) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::Resource(format!("r={r} overflows the mesh counts"))),
    };
    let rt = r as f64 * t;
    let lhs = exact_cov_tilde(&CovRequest::full(g.a, g.b, rt, rt)?)?.value;
    let rhs = r as f64 * exact_cov_tilde(&CovRequest::full(ra, rb, t, t)?)?.value;
    Ok((lhs, rhs))
}

/// `E[W̃_a(s) B(t)]`, which vanishes identically: `W̃_a(s)` lies in the third
/// chaos and `B(t)` in the first.
pub fn cross_chaos_cov(_a: u64, _s: f64, _t: f64) -> f64 {
    0.0
}
