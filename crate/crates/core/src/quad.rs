//! Adaptive Simpson quadrature with a Richardson error estimate.
//!
//! The estimate `|S₂ - S₁| / 15` per accepted panel is a heuristic: it is
//! exact for smooth integrands in the limit of small panels but is not a
//! proof. Callers report it apart from rigorous truncation bounds.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Value of an integral and the summed per-panel error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Panels are bisected until the two-level Simpson difference is below
/// `15 · tol_panel`, where the tolerance is split in proportion to panel
/// width. Accepted panels get the Richardson-corrected value.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Precondition(format!("bad interval [{a}, {b}]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let width = b - a;
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut evaluations = 3;
    let mut stack = vec![(
        Panel { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb) },
        0u32,
    )];
    let mut value = 0.0;
    let mut error_estimate = 0.0;
    // left panels are processed first so the accumulation order is fixed
    while let Some((p, depth)) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (f(lm), f(rm));
        evaluations += 2;
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        let panel_tol = tol * (p.b - p.a) / width;
        if diff.abs() <= 15.0 * panel_tol || depth >= MAX_DEPTH {
            value += left + right + diff / 15.0;
            error_estimate += diff.abs() / 15.0;
        } else {
            stack.push((Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right }, depth + 1));
            stack.push((Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left }, depth + 1));
        }
    }
    Ok(Quadrature { value, error_estimate, evaluations })
}

/// [`integrate_cusped`] over consecutive pieces `[breaks[i], breaks[i+1]]`,
/// for integrands with known kinks or cusps at the breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<Quadrature> {
    let total = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let mut out = Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 };
    for w in breaks.windows(2) {
        let share = if total > 0.0 { tol * (w[1] - w[0]) / total } else { tol };
        let q = integrate_cusped(&f, w[0], w[1], share.max(f64::MIN_POSITIVE))?;
        out.value += q.value;
        out.error_estimate += q.error_estimate;
        out.evaluations += q.evaluations;
    }
    Ok(out)
}

/// Integral over `[c, d]` of a function with `|x - c|^{1/3}` and
/// `|x - d|^{1/3}` cusps at the ends.
///
/// Each half is mapped through `x = c + w³` (resp. `x = d - w³`), which turns
/// the cusps into smooth behaviour in `w`, and then integrated by
/// [`adaptive_simpson`].
pub fn integrate_cusped<F: Fn(f64) -> f64>(f: F, c: f64, d: f64, tol: f64) -> Result<Quadrature> {
    if !(c.is_finite() && d.is_finite()) || d < c {
        return Err(Error::Precondition(format!("bad interval [{c}, {d}]")));
    }
    if c == d {
        return Ok(Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let mid = 0.5 * (c + d);
    let reach = (mid - c).cbrt();
    let left = adaptive_simpson(|w| 3.0 * w * w * f((c + w * w * w).min(mid)), 0.0, reach, 0.5 * tol)?;
    let right = adaptive_simpson(|w| 3.0 * w * w * f((d - w * w * w).max(mid)), 0.0, reach, 0.5 * tol)?;
    Ok(Quadrature {
        value: left.value + right.value,
        error_estimate: left.error_estimate + right.error_estimate,
        evaluations: left.evaluations + right.evaluations,
    })
}
