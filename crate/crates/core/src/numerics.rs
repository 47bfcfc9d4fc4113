//! Scalar special functions and root finding shared by the optimizer modules.
//!
//! The bandwidth closed form needs the principal branch of the Lambert W
//! function; the coupling multiplier behind it is found by bisection on a
//! strictly decreasing map. Both live here as pure, thread-safe functions.

use crate::error::{Error, Result};
use std::f64::consts::E;

/// Lower end of the real domain of the principal branch, `-1/e`.
pub const NEG_INV_E: f64 = -1.0 / E;

const MAX_HALLEY_ITERS: usize = 100;
const MAX_BISECT_ITERS: usize = 200;

/// Principal branch `W0` of the Lambert W function: the `w >= -1` solving
/// `w * exp(w) = x`.
///
/// Accurate to a relative residual of `1e-12` (typically a few ulps) on the
/// whole real domain `x >= -1/e`. Arguments below `-1/e` are rejected; in the
/// optimizer they signal a multiplier outside its bracket.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("lambert_w0: NaN argument".into()));
    }
    if x < NEG_INV_E {
        return Err(Error::Domain(format!(
            "lambert_w0: argument {x} below the branch point -1/e"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Err(Error::Domain("lambert_w0: infinite argument".into()));
    }

    let mut w = initial_guess(x);
    let tol = 1e-13 * x.abs().max(1.0);

    for _ in 0..MAX_HALLEY_ITERS {
        let ew = w.exp();
        let residual = w * ew - x;
        if residual.abs() <= tol {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            // Degenerate derivative at the branch point; nudge off it.
            w = -1.0 + 1e-9;
            continue;
        }
        // Halley step for f(w) = w e^w - x.
        let denom = ew * wp1 - (w + 2.0) * residual / (2.0 * wp1);
        let step = residual / denom;
        w -= step;
        if w < -1.0 {
            w = -1.0;
        }
        if step.abs() <= f64::EPSILON * w.abs().max(1e-300) {
            break;
        }
    }

    // Final contract check; looser than the iteration target.
    let residual = w * w.exp() - x;
    if residual.abs() <= 1e-12 * x.abs().max(1.0) {
        Ok(w)
    } else {
        Err(Error::Domain(format!(
            "lambert_w0: no convergence at x = {x} (residual {residual})"
        )))
    }
}

/// Starting point for the Halley iteration, chosen per region.
fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series around the branch point w = -1.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 0.0 {
        // Truncated Maclaurin series of W0.
        x * (1.0 - x)
    } else if x <= E {
        x / (1.0 + x)
    } else {
        // Asymptotic expansion for large arguments.
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// A bracketed search interval for scalar root finding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    /// Stopping tolerance: absolute on the residual, relative (to the
    /// midpoint) on the interval width. The relative reading keeps roots near
    /// zero from stopping early on a steep function.
    pub tol: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Bracket(format!(
                "invalid bracket: lo = {lo} must be below hi = {hi}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Bracket(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self { lo, hi, tol })
    }
}

/// Bisection on a continuous, strictly decreasing `f` with
/// `f(lo) > 0 > f(hi)`.
///
/// Returns a point whose residual or enclosing interval width is within
/// `bracket.tol`; once the interval collapses to adjacent floats the current
/// midpoint is returned as is. `f(lo) = +inf` is accepted (the caller may use
/// an unbounded sentinel at the left edge). Deterministic for identical
/// inputs.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, bracket: RootBracket) -> Result<f64> {
    let RootBracket {
        mut lo,
        mut hi,
        tol,
    } = bracket;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo > 0.0) || !(f_hi < 0.0) {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"
        )));
    }

    for _ in 0..MAX_BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval exhausted at f64 resolution.
            break;
        }
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: fixed-point iteration of w = x * exp(-w),
    /// convergent for moderate positive x.
    fn lambert_fixed_point(x: f64) -> f64 {
        let mut w = 0.5f64;
        for _ in 0..500 {
            let next = x * (-w).exp();
            if (next - w).abs() < 1e-15 {
                return next;
            }
            w = 0.5 * (w + next); // damped for stability
        }
        w
    }

    #[test]
    fn lambert_at_zero() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
    }

    #[test]
    fn lambert_at_e() {
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lambert_at_branch_point() {
        assert!((lambert_w0(NEG_INV_E).unwrap() - (-1.0)).abs() < 1e-7);
    }

    #[test]
    fn lambert_at_one_matches_fixed_point_oracle() {
        let oracle = lambert_fixed_point(1.0);
        assert!((oracle - 0.5671432904097838).abs() < 1e-12);
        assert!((lambert_w0(1.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn lambert_below_branch_point_is_domain_error() {
        assert!(matches!(lambert_w0(-0.4), Err(Error::Domain(_))));
        assert!(matches!(lambert_w0(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn lambert_monotone_on_grid() {
        let mut prev = -1.0;
        for i in 0..=10_000 {
            let x = NEG_INV_E + (i as f64 / 10_000.0) * (20.0 - NEG_INV_E);
            let w = lambert_w0(x).unwrap();
            assert!(w >= prev - 1e-12, "W not monotone at x = {x}");
            prev = w;
        }
    }

    #[test]
    fn bisect_linear_root() {
        let bracket = RootBracket::new(0.0, 2.0, 1e-12).unwrap();
        let root = bisect_decreasing(|x| 1.0 - x, bracket).unwrap();
        assert!((root - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bisect_exponential_root() {
        let bracket = RootBracket::new(0.0, 2.0, 1e-12).unwrap();
        let root = bisect_decreasing(|x| 2.0 - x.exp(), bracket).unwrap();
        assert!((root - std::f64::consts::LN_2).abs() <= 1e-10);
    }

    #[test]
    fn bisect_without_sign_change_fails() {
        let bracket = RootBracket::new(2.0, 3.0, 1e-12).unwrap();
        assert!(matches!(
            bisect_decreasing(|x| 1.0 - x, bracket),
            Err(Error::Bracket(_))
        ));
    }

    #[test]
    fn bisect_accepts_infinite_left_edge() {
        let bracket = RootBracket::new(0.0, 10.0, 1e-12).unwrap();
        let f = |x: f64| {
            if x == 0.0 {
                f64::INFINITY
            } else {
                1.0 / x - 1.0
            }
        };
        let root = bisect_decreasing(f, bracket).unwrap();
        assert!((root - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn lambert_inverts_w_exp_w(exponent in -0.9999f64..6.0) {
            // Log-spaced positive arguments up to 1e6.
            let x = if exponent < 0.0 {
                NEG_INV_E * (-exponent)
            } else {
                10f64.powf(exponent)
            };
            let w = lambert_w0(x).unwrap();
            let residual = (w * w.exp() - x).abs();
            prop_assert!(residual <= 1e-10 * x.abs().max(1.0));
            prop_assert!(w >= -1.0);
        }

        #[test]
        fn lambert_monotone_pairs(a in NEG_INV_E..1e6, b in NEG_INV_E..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(lambert_w0(lo).unwrap() <= lambert_w0(hi).unwrap() + 1e-12);
        }

        #[test]
        fn bisect_finds_roots_of_random_decreasing_functions(
            root in -5.0f64..5.0,
            slope in 0.01f64..10.0,
            curve in 0.0f64..5.0,
        ) {
            // Strictly decreasing family with a known root.
            let f = move |x: f64| slope * (root - x) + curve * ((-x).exp() - (-root).exp());
            let bracket = RootBracket::new(root - 3.0, root + 4.0, 1e-10).unwrap();
            let found = bisect_decreasing(f, bracket).unwrap();
            prop_assert!(f(found).abs() <= 1e-10 || (found - root).abs() <= 1e-9);
        }
    }
}
