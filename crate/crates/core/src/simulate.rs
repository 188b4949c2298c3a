//! Seeded simulation of fBm with `H = 1/6` on one or two uniform grids.
//!
//! Increments on the mesh `1/n` form a stationary Gaussian sequence with
//! autocovariance `n^{-1/3} c(h)`, `c(h) = (|h+1|^{1/3} + |h-1|^{1/3} - 2|h|^{1/3})/2`.
//! They are drawn exactly by circulant embedding; if the embedding ever has
//! a negative eigenvalue the generator factors the Toeplitz matrix directly.
//!
//! Every path `p` draws from its own ChaCha stream `(seed, p)`, so paths can
//! be produced in any order or in parallel and estimators are reduced in
//! path order afterwards. Results do not depend on the thread count.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Error, Result};
use crate::grid_count;
use crate::kernel::cov_r_unchecked;
use crate::stats::{self, NormalityReport};

/// Largest number of increments the spectral generator accepts.
pub const MAX_SPECTRAL_POINTS: u64 = 1 << 22;
/// Largest number of points handled by dense factorization.
pub const MAX_DENSE_POINTS: u64 = 4096;
/// Eigenvalues of the embedding below this count as a failed embedding.
const EIGEN_FLOOR: f64 = -1e-9;

/// Increments `ΔB_j = B(j/n) - B((j-1)/n)` for `j = 1..=nT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub n: u64,
    pub horizon: f64,
    pub increments: Vec<f64>,
}

impl PathSample {
    fn prefix(&self, t: f64) -> &[f64] {
        let k = (grid_count(self.n, t) as usize).min(self.increments.len());
        &self.increments[..k]
    }

    /// `B(⌊nt⌋/n)`, truncated at the horizon.
    pub fn b_at(&self, t: f64) -> f64 {
        self.prefix(t).iter().sum()
    }

    /// `W_n(t)`, or `W̃_n(t)` when `tilde` is set.
    pub fn w_at(&self, t: f64, tilde: bool) -> f64 {
        let xs = self.prefix(t);
        if tilde {
            let (lift, scale) = hermite_scales(self.n);
            xs.iter().map(|&x| scale * crate::exact::hermite3(lift * x)).sum()
        } else {
            xs.iter().map(|&x| x * x * x).sum()
        }
    }
}

fn hermite_scales(n: u64) -> (f64, f64) {
    let n = n as f64;
    (n.powf(1.0 / 6.0), n.powf(-0.5))
}

/// Running sums `W_n(j/n)`, `j = 0..=nT`, starting at zero. With `tilde`
/// the summands are `n^{-1/2} h₃(n^{1/6} ΔB_j)`.
pub fn w_path(p: &PathSample, tilde: bool) -> Vec<f64> {
    let (lift, scale) = hermite_scales(p.n);
    let mut out = Vec::with_capacity(p.increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in &p.increments {
        acc += if tilde { scale * crate::exact::hermite3(lift * x) } else { x * x * x };
        out.push(acc);
    }
    out
}

/// Running sums `B(j/n)`, `j = 0..=nT`.
pub fn b_path(p: &PathSample) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in &p.increments {
        acc += x;
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GridStrategy {
    /// Simulate on the mesh `lcm(a, b)` and sum blocks.
    #[default]
    LcmRefinement,
    /// Factor the covariance of `B` on the union of both grids.
    UnionCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    pub grid_strategy: GridStrategy,
}

impl McConfig {
    pub fn new(paths: u64, seed: u64) -> Result<Self> {
        let cfg = Self { paths, seed, grid_strategy: GridStrategy::default() };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_strategy(self, grid_strategy: GridStrategy) -> Self {
        Self { grid_strategy, ..self }
    }

    fn check(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Precondition("at least two paths are required".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo mean with `std_error = sd / √paths_used`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths_used: u64,
}

impl McEstimate {
    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if self.std_error > 0.0 {
            gap.abs() / self.std_error
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Independent stream for path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn steps(n: u64, horizon: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Precondition("mesh count must be positive".into()));
    }
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    let k = grid_count(n, horizon);
    let x = n as f64 * horizon;
    if (x - k as f64).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::Precondition(format!("n*T = {x} is not an integer")));
    }
    Ok(k)
}

/// Unit-mesh fGn autocovariance `c(h)`.
fn fgn_acov(h: u64) -> f64 {
    let h = h as f64;
    0.5 * (((h + 1.0).cbrt() + (h - 1.0).abs().cbrt()) - 2.0 * h.cbrt())
}

/// Lower Cholesky factor, stored row-major for sampling.
#[derive(Debug, Clone)]
struct DenseFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl DenseFactor {
    fn new(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Resource("covariance is not numerically positive definite".into()))?;
        let l = chol.l();
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                lower.push(l[(i, j)]);
            }
        }
        Ok(Self { dim, lower })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = Vec::with_capacity(self.dim);
        let mut offset = 0;
        for i in 0..self.dim {
            let row = &self.lower[offset..offset + i + 1];
            out.push(row.iter().zip(&z).map(|(l, z)| l * z).sum());
            offset += i + 1;
        }
        out
    }
}

#[derive(Clone)]
enum Method {
    Spectral { sqrt_eigen: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Dense(DenseFactor),
}

/// Exact sampler of `nT` fGn increments at mesh `1/n`.
#[derive(Clone)]
pub struct FgnGenerator {
    n: u64,
    horizon: f64,
    len: usize,
    scale: f64,
    method: Method,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("n", &self.n)
            .field("horizon", &self.horizon)
            .field("len", &self.len)
            .field("spectral", &self.is_spectral())
            .finish()
    }
}

impl FgnGenerator {
    pub fn new(n: u64, horizon: f64) -> Result<Self> {
        let len = steps(n, horizon)?;
        if len > MAX_SPECTRAL_POINTS {
            return Err(Error::Resource(format!(
                "{len} increments exceed the limit of {MAX_SPECTRAL_POINTS}"
            )));
        }
        let len = len as usize;
        let scale = (n as f64).powf(-1.0 / 6.0);
        let method = match spectral(len) {
            Some((sqrt_eigen, fft)) => Method::Spectral { sqrt_eigen, fft },
            None => Method::Dense(dense_toeplitz(len)?),
        };
        Ok(Self { n, horizon, len, scale, method })
    }

    /// Dense factorization regardless of the embedding.
    pub fn new_dense(n: u64, horizon: f64) -> Result<Self> {
        let len = steps(n, horizon)? as usize;
        let scale = (n as f64).powf(-1.0 / 6.0);
        Ok(Self { n, horizon, len, scale, method: Method::Dense(dense_toeplitz(len)?) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.method, Method::Spectral { .. })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> PathSample {
        let mut increments = match &self.method {
            Method::Spectral { sqrt_eigen, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eigen
                    .iter()
                    .map(|&w| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(w * re, w * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.len);
                buf.into_iter().map(|z| z.re).collect::<Vec<_>>()
            }
            Method::Dense(f) => f.draw(rng),
        };
        for x in &mut increments {
            *x *= self.scale;
        }
        PathSample { n: self.n, horizon: self.horizon, increments }
    }

    pub fn sample_path(&self, seed: u64, path: u64) -> PathSample {
        self.sample(&mut path_rng(seed, path))
    }
}

/// Square roots of `λ / 2N` for the circulant embedding of size `2N`, or
/// `None` if an eigenvalue falls below the floor.
fn spectral(len: usize) -> Option<(Vec<f64>, Arc<dyn Fft<f64>>)> {
    let size = 2 * len;
    let mut row: Vec<Complex<f64>> = (0..=len as u64)
        .chain((1..len as u64).rev())
        .map(|h| Complex::new(fgn_acov(h), 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(size);
    fft.process(&mut row);
    if row.iter().any(|z| z.re < EIGEN_FLOOR) {
        return None;
    }
    let sqrt_eigen = row.iter().map(|z| (z.re.max(0.0) / size as f64).sqrt()).collect();
    Some((sqrt_eigen, fft))
}

fn dense_toeplitz(len: usize) -> Result<DenseFactor> {
    if len as u64 > MAX_DENSE_POINTS {
        return Err(Error::Resource(format!(
            "{len} points exceed the dense factorization limit of {MAX_DENSE_POINTS}"
        )));
    }
    let cov = DMatrix::from_fn(len, len, |i, j| fgn_acov(i.abs_diff(j) as u64));
    DenseFactor::new(cov)
}

/// One fGn path at mesh `1/n` on `[0, T]`, drawn from stream `(seed, 0)`.
pub fn fgn_sample(n: u64, horizon: f64, seed: u64) -> Result<PathSample> {
    Ok(FgnGenerator::new(n, horizon)?.sample_path(seed, 0))
}

fn gcd(mut x: u64, mut y: u64) -> u64 {
    while y != 0 {
        (x, y) = (y, x % y);
    }
    x
}

enum Coupling {
    Aggregate { fine: FgnGenerator, block_a: usize, block_b: usize },
    Union { factor: DenseFactor, index_a: Vec<usize>, index_b: Vec<usize> },
}

/// Joint sampler of increments at meshes `1/a` and `1/b` of one fBm path.
pub struct CoupledSampler {
    a: u64,
    b: u64,
    horizon: f64,
    coupling: Coupling,
}

impl CoupledSampler {
    /// Builds the requested coupling. A refinement grid that is too large
    /// falls back to the union factorization when that fits.
    pub fn new(a: u64, b: u64, horizon: f64, strategy: GridStrategy) -> Result<Self> {
        let na = steps(a, horizon)?;
        let nb = steps(b, horizon)?;
        let lcm = (a / gcd(a, b)).checked_mul(b);
        let union_size = na + nb - grid_count(gcd(a, b), horizon);
        let refine = match (strategy, lcm) {
            (GridStrategy::LcmRefinement, Some(l)) => {
                let fine_len = l as f64 * horizon;
                fine_len <= MAX_SPECTRAL_POINTS as f64 || union_size > MAX_DENSE_POINTS
            }
            (GridStrategy::LcmRefinement, None) => false,
            (GridStrategy::UnionCholesky, _) => false,
        };
        let coupling = if refine {
            let l = lcm.expect("checked above");
            Coupling::Aggregate {
                fine: FgnGenerator::new(l, horizon)?,
                block_a: (l / a) as usize,
                block_b: (l / b) as usize,
            }
        } else {
            union_coupling(a, b, na, nb, union_size)?
        };
        Ok(Self { a, b, horizon, coupling })
    }

    pub fn strategy(&self) -> GridStrategy {
        match self.coupling {
            Coupling::Aggregate { .. } => GridStrategy::LcmRefinement,
            Coupling::Union { .. } => GridStrategy::UnionCholesky,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (PathSample, PathSample) {
        let (xa, xb) = match &self.coupling {
            Coupling::Aggregate { fine, block_a, block_b } => {
                let p = fine.sample(rng);
                (aggregate(&p.increments, *block_a), aggregate(&p.increments, *block_b))
            }
            Coupling::Union { factor, index_a, index_b } => {
                let b = factor.draw(rng);
                (differences(&b, index_a), differences(&b, index_b))
            }
        };
        (
            PathSample { n: self.a, horizon: self.horizon, increments: xa },
            PathSample { n: self.b, horizon: self.horizon, increments: xb },
        )
    }

    pub fn sample_path(&self, seed: u64, path: u64) -> (PathSample, PathSample) {
        self.sample(&mut path_rng(seed, path))
    }
}

/// Block sums, each accumulated left to right.
pub fn aggregate(fine: &[f64], block: usize) -> Vec<f64> {
    fine.chunks_exact(block).map(|c| c.iter().sum()).collect()
}

fn differences(values: &[f64], index: &[usize]) -> Vec<f64> {
    let mut prev = 0.0;
    index
        .iter()
        .map(|&i| {
            let x = values[i] - prev;
            prev = values[i];
            x
        })
        .collect()
}

/// Orders the points `j/a` and `k/b` exactly by comparing `jb` with `ka`.
fn union_coupling(a: u64, b: u64, na: u64, nb: u64, size: u64) -> Result<Coupling> {
    if size > MAX_DENSE_POINTS {
        return Err(Error::Resource(format!(
            "union grid of {size} points exceeds the dense limit of {MAX_DENSE_POINTS}"
        )));
    }
    let (mut j, mut k) = (1u64, 1u64);
    let mut points = Vec::with_capacity(size as usize);
    let mut index_a = Vec::with_capacity(na as usize);
    let mut index_b = Vec::with_capacity(nb as usize);
    while j <= na || k <= nb {
        let ord = match (j <= na, k <= nb) {
            (true, true) => (j as u128 * b as u128).cmp(&(k as u128 * a as u128)),
            (true, false) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        let here = points.len();
        match ord {
            std::cmp::Ordering::Less => {
                points.push(j as f64 / a as f64);
                index_a.push(here);
                j += 1;
            }
            std::cmp::Ordering::Greater => {
                points.push(k as f64 / b as f64);
                index_b.push(here);
                k += 1;
            }
            std::cmp::Ordering::Equal => {
                points.push(j as f64 / a as f64);
                index_a.push(here);
                index_b.push(here);
                j += 1;
                k += 1;
            }
        }
    }
    let dim = points.len();
    let cov = DMatrix::from_fn(dim, dim, |i, l| cov_r_unchecked(points[i], points[l]));
    Ok(Coupling::Union { factor: DenseFactor::new(cov)?, index_a, index_b })
}

/// One coupled pair from stream `(cfg.seed, 0)`.
pub fn coupled_sample(a: u64, b: u64, horizon: f64, cfg: &McConfig) -> Result<(PathSample, PathSample)> {
    cfg.check()?;
    Ok(CoupledSampler::new(a, b, horizon, cfg.grid_strategy)?.sample_path(cfg.seed, 0))
}

/// Shortest integer horizon covering both times.
fn horizon_for(s: f64, t: f64) -> Result<f64> {
    ensure_nonnegative("s", s)?;
    ensure_nonnegative("t", t)?;
    Ok(s.max(t).ceil().max(1.0))
}

/// Mean and standard error of `xs`, reduced in order.
fn estimate(xs: &[f64]) -> McEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    McEstimate { mean, std_error: (var / n).sqrt(), paths_used: xs.len() as u64 }
}

/// Centered sample covariance with the standard error of its mean form.
fn covariance_estimate(pairs: &[(f64, f64)]) -> McEstimate {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let products: Vec<f64> = pairs.iter().map(|&(x, y)| (x - mx) * (y - my)).collect();
    let mut e = estimate(&products);
    e.mean *= n / (n - 1.0);
    e
}

/// `(W_a(s), W_b(t))` for every path, in path order.
pub fn mc_pairs(a: u64, b: u64, s: f64, t: f64, cfg: &McConfig) -> Result<Vec<(f64, f64)>> {
    cfg.check()?;
    let sampler = CoupledSampler::new(a, b, horizon_for(s, t)?, cfg.grid_strategy)?;
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let (pa, pb) = sampler.sample_path(cfg.seed, p);
            (pa.w_at(s, false), pb.w_at(t, false))
        })
        .collect())
}

/// Sample covariance of `W_a(s)` and `W_b(t)` over coupled paths.
pub fn mc_cov(a: u64, b: u64, s: f64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(covariance_estimate(&mc_pairs(a, b, s, t, cfg)?))
}

/// `W_n(t)` (or `W̃_n(t)`) over `cfg.paths` independent paths.
pub fn mc_w_samples(n: u64, t: f64, tilde: bool, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.check()?;
    let generator = FgnGenerator::new(n, horizon_for(t, t)?)?;
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|p| generator.sample_path(cfg.seed, p).w_at(t, tilde))
        .collect())
}

/// KS distance to the centered normal with the sample's variance, plus
/// skewness and excess kurtosis.
pub fn normality_diagnostics(samples: &[f64]) -> Result<NormalityReport> {
    stats::normality(samples)
}

/// Sample covariance of `W̃_a(t)` and `B(⌊at⌋/a)`; zero in expectation.
pub fn independence_diagnostic(a: u64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check()?;
    let generator = FgnGenerator::new(a, horizon_for(t, t)?)?;
    let pairs: Vec<(f64, f64)> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let path = generator.sample_path(cfg.seed, p);
            (path.w_at(t, true), path.b_at(t))
        })
        .collect();
    Ok(covariance_estimate(&pairs))
}
