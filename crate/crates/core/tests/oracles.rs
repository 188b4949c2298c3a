//! Independent reference computations for the exact engine and constants.

use cubevar::exact::{exact_cov_tilde, exact_cov_w, CovRequest};
use cubevar::kernel::cov_r;
use cubevar::series::{self, TruncationBudget};

/// All perfect matchings of `0..n` (n even).
fn pairings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for i in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().enumerate().filter(|&(j, _)| j + 1 != i).map(|(_, &x)| x).collect();
        for mut p in pairings(&rest) {
            p.push((first, items[i]));
            out.push(p);
        }
    }
    out
}

/// `E[Π Z_i]` for a centered Gaussian vector with covariance `cov`.
fn isserlis(cov: &dyn Fn(usize, usize) -> f64, n: usize) -> f64 {
    let items: Vec<usize> = (0..n).collect();
    pairings(&items).iter().map(|p| p.iter().map(|&(i, j)| cov(i, j)).product::<f64>()).sum()
}

/// `E[X³ Y³]` by explicit pairing; slots 0..3 are X, 3..6 are Y.
fn sixth_mixed_moment(vx: f64, vy: f64, c: f64) -> f64 {
    let cov = move |i: usize, j: usize| match (i < 3, j < 3) {
        (true, true) => vx,
        (false, false) => vy,
        _ => c,
    };
    isserlis(&cov, 6)
}

#[test]
fn fifteen_pairings() {
    assert_eq!(pairings(&[0, 1, 2, 3, 4, 5]).len(), 15);
}

#[test]
fn mixed_sixth_moment_identity() {
    for (vx, vy, c) in [(1.0, 1.0, 1.0), (2.0, 0.5, 0.3), (0.7, 3.1, -1.2), (1.0, 1.0, 0.0)] {
        let closed = 6.0 * c * c * c + 9.0 * vx * vy * c;
        assert!((sixth_mixed_moment(vx, vy, c) - closed).abs() < 1e-12);
    }
}

#[test]
fn first_and_third_chaos_are_orthogonal() {
    // E[B(1)³ B(t)] - 3 Var(B(1)) E[B(1) B(t)] = 0
    for t in [0.3, 1.0, 2.5] {
        let c = cov_r(1.0, t).unwrap();
        let cov = move |i: usize, j: usize| match (i < 3, j < 3) {
            (true, true) => 1.0,
            (false, false) => cov_r(t, t).unwrap(),
            _ => c,
        };
        let moment = isserlis(&cov, 4);
        assert!((moment - 3.0 * c).abs() < 1e-12);
    }
}

/// `E[W_a(s) W_b(t)]` summed over increment pairs, each moment taken from
/// the pairing expansion with covariances read off `R` directly.
fn brute_w(a: u64, b: u64, s: f64, t: f64) -> f64 {
    let ja = (a as f64 * s).floor() as u64;
    let kb = (b as f64 * t).floor() as u64;
    let r = |x: f64, y: f64| cov_r(x, y).unwrap();
    let mut total = 0.0;
    for j in 1..=ja {
        for k in 1..=kb {
            let (x1, x0) = (j as f64 / a as f64, (j - 1) as f64 / a as f64);
            let (y1, y0) = (k as f64 / b as f64, (k - 1) as f64 / b as f64);
            let c = r(x1, y1) - r(x0, y1) - r(x1, y0) + r(x0, y0);
            let vx = (a as f64).powf(-1.0 / 3.0);
            let vy = (b as f64).powf(-1.0 / 3.0);
            total += sixth_mixed_moment(vx, vy, c);
        }
    }
    total
}

#[test]
fn exact_engine_matches_pairing_expansion() {
    for (a, b, s, t) in [(1, 1, 1.0, 1.0), (2, 3, 1.0, 1.0), (5, 7, 0.8, 1.2), (4, 12, 1.0, 0.5), (9, 2, 1.5, 2.0)] {
        let exact = exact_cov_w(&CovRequest::full(a, b, s, t).unwrap()).unwrap().value;
        let brute = brute_w(a, b, s, t);
        assert!((exact - brute).abs() <= 1e-11 * brute.abs().max(1.0), "({a},{b},{s},{t}): {exact} vs {brute}");
    }
}

#[test]
fn kappa_regression_constant() {
    let k = series::kappa_sq(TruncationBudget::Tolerance(1e-10)).unwrap();
    assert!((k.value - 5.3911644).abs() < 1e-7, "{}", k.value);
}

#[test]
fn equal_meshes_approach_kappa() {
    let k2 = series::kappa_sq(TruncationBudget::Tolerance(1e-10)).unwrap().value;
    let errs: Vec<f64> = (6..=12)
        .map(|e| {
            let n = 1u64 << e;
            (exact_cov_tilde(&CovRequest::full(n, n, 1.0, 1.0).unwrap()).unwrap().value - k2).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn first_chaos_correction_vanishes() {
    let gaps: Vec<f64> = [16u64, 128, 1024]
        .iter()
        .map(|&n| {
            let req = CovRequest::full(n, n, 1.0, 1.0).unwrap();
            let gap = exact_cov_w(&req).unwrap().value - exact_cov_tilde(&req).unwrap().value;
            assert!((gap - 9.0 * (n as f64).powf(-2.0 / 3.0)).abs() < 1e-12);
            gap
        })
        .collect();
    assert!(gaps[2] < gaps[0] / 10.0);
}
