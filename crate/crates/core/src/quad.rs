//! Adaptive quadrature for discounted integrals.
//!
//! Used as the fallback path for price kernels without a closed form and as
//! an independent cross-check of the closed forms in tests. Discounted tail
//! integrals `int_t^inf e^{-r(s-t)} f(s) ds` are truncated at a horizon `T`
//! chosen so that `e^{-rT} * bound / r` falls below the tolerance, where
//! `bound` is a caller-supplied growth bound on `|f|`.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// `int_t^inf e^{-r(s-t)} f(s) ds` with `|f| <= bound` on the tail,
/// truncated so the neglected mass is below `tol`.
pub fn discounted_tail(f: &dyn Fn(f64) -> f64, t: f64, r: f64, bound: f64, tol: f64) -> f64 {
    assert!(r > 0.0, "discount rate must be positive");
    // e^{-rT} bound / r < tol  =>  T > ln(bound / (r tol)) / r
    let horizon = ((bound.max(tol) / (r * tol)).ln() / r).max(1.0 / r);
    let g = |s: f64| (-r * (s - t)).exp() * f(s);
    adaptive_simpson(&g, t, t + horizon, tol)
}
