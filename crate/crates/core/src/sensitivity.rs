//! Sensitivity of the spatial kernel to its length-scale.
//!
//! With `s = ell / |x - y|` the kernel normalizes to `g(s) = exp(-1/(2 s^2))`,
//! so `k(x, y) = sigma^2 g(s)`. The Taylor series of `g` at `s = 0` is
//! identically zero (essential singularity), while the expansion about
//! `s = inf`,
//!
//! ```text
//! g(s) ~ 1 - s^-2 / 2 + s^-4 / 8 - s^-6 / 48 + ...
//! ```
//!
//! is accurate for close points and blows up as `s -> 0`. Requiring that
//! expansion to stay within a tolerance gives a minimum `s`, and therefore a
//! kernel value below which pairs can be dropped.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Upper end of the search range for `s`.
pub const S_MAX: f64 = 100.0;

/// Lower end of the dense scan; the truncation error is astronomically large
/// below this for every order.
const S_MIN: f64 = 1e-2;

const GRID_POINTS: usize = 40_000;

/// One row of the cutoff table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffEntry {
    /// Highest retained power of `1/s`.
    pub order: u32,
    pub tolerance: f64,
    /// Smallest `s` from which the expansion error stays within tolerance.
    pub s_cut: f64,
    /// `g(s_cut)`: kernel cutoff as a fraction of `sigma^2`.
    pub k_cut: f64,
}

/// Normalized kernel `exp(-1/(2 s^2))`, with `g(0) = 0`.
pub fn g(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        (-0.5 / (s * s)).exp()
    }
}

/// Partial sum of the expansion about `s = inf` through `s^-order`:
/// `sum_{m=0}^{order/2} (-1)^m / (2^m m!) s^(-2m)`.
pub fn laurent_approx(s: f64, order: u32) -> f64 {
    let x = 0.5 / (s * s);
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=(order / 2) {
        term *= -x / m as f64;
        sum += term;
    }
    sum
}

/// `|g(s) - laurent_approx(s, order)|`.
///
/// For `s >= 1/sqrt(2)` the remainder series is summed directly, which
/// avoids cancelling two numbers close to one.
pub fn truncation_error(s: f64, order: u32) -> f64 {
    let x = 0.5 / (s * s);
    if x <= 1.0 {
        let mut term = 1.0;
        for m in 1..=(order / 2) {
            term *= -x / m as f64;
        }
        let mut tail = 0.0;
        let mut m = order / 2 + 1;
        loop {
            term *= -x / m as f64;
            tail += term;
            if term.abs() <= f64::EPSILON * tail.abs() || term == 0.0 {
                break;
            }
            m += 1;
        }
        tail.abs()
    } else {
        (g(s) - laurent_approx(s, order)).abs()
    }
}

/// Taylor coefficients of `g` about `s = 0` through `s^order`: all zero.
pub fn taylor_at_zero(order: u32) -> Vec<f64> {
    vec![0.0; order as usize + 1]
}

fn validate(order: u32, tolerance: f64) -> Result<()> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "expansion order must be an even integer >= 2, got {order}"
        )));
    }
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must lie in (0, 1), got {tolerance}"
        )));
    }
    Ok(())
}

/// Smallest `s_cut` such that the expansion of the given order is within
/// `tolerance` of `g` for every `s >= s_cut`.
///
/// The last tolerance violation is located on a dense log-spaced grid over
/// `[S_MIN, S_MAX]` and refined by bisection.
pub fn cutoff(order: u32, tolerance: f64) -> Result<CutoffEntry> {
    validate(order, tolerance)?;
    let err = |s: f64| truncation_error(s, order);
    if err(S_MAX) > tolerance {
        return Err(Error::NotAchievable {
            order,
            tolerance,
            s_max: S_MAX,
        });
    }
    let ratio = (S_MAX / S_MIN).ln() / (GRID_POINTS - 1) as f64;
    let grid = |i: usize| S_MIN * (ratio * i as f64).exp();
    let last_bad = (0..GRID_POINTS).rev().find(|&i| err(grid(i)) > tolerance);
    let s_cut = match last_bad {
        None => S_MIN,
        Some(i) => {
            let (mut lo, mut hi) = (grid(i), grid(i + 1).min(S_MAX));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if err(mid) > tolerance {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    Ok(CutoffEntry {
        order,
        tolerance,
        s_cut,
        k_cut: g(s_cut),
    })
}

/// Every `(order, tolerance)` combination, orders outermost. Unreachable
/// combinations are skipped.
pub fn cutoff_table(orders: &[u32], tolerances: &[f64]) -> Result<Vec<CutoffEntry>> {
    let mut rows = Vec::with_capacity(orders.len() * tolerances.len());
    for &order in orders {
        for &tol in tolerances {
            match cutoff(order, tol) {
                Ok(e) => rows.push(e),
                Err(Error::NotAchievable { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

/// CSV rendering with header `order,tolerance,s_cut,k_cut`.
pub fn table_to_csv(rows: &[CutoffEntry]) -> String {
    let mut out = String::from("order,tolerance,s_cut,k_cut\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:.6},{:.6}", r.order, r.tolerance, r.s_cut, r.k_cut);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_matches_the_kernel() {
        let (sigma, ell) = (0.1, 0.07);
        for s in [0.3, 0.8, 1.0, 2.5, 10.0] {
            let d = ell / s;
            let k = crate::kernels::spatial_kernel(
                &nalgebra::Vector3::zeros(),
                &nalgebra::Vector3::new(d, 0.0, 0.0),
                sigma,
                ell,
            );
            assert!((sigma * sigma * g(s) - k).abs() < 1e-15);
        }
        assert!((g(1.0) - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn g_underflows_cleanly_at_zero() {
        assert_eq!(g(1e-3), 0.0);
        assert_eq!(g(0.0), 0.0);
        assert!(g(1.0) > 0.6);
    }

    #[test]
    fn laurent_partial_sums() {
        let v = laurent_approx(1.0, 6);
        assert!((v - (1.0 - 0.5 + 0.125 - 1.0 / 48.0)).abs() < 1e-15);
        assert!((laurent_approx(2.0, 40) - g(2.0)).abs() < 1e-12);
        assert!((laurent_approx(1e6, 6) - 1.0).abs() < 1e-11);
        assert_eq!(laurent_approx(3.0, 0), 1.0);
    }

    #[test]
    fn truncation_error_agrees_with_direct_difference() {
        for order in [2, 4, 6, 8] {
            for s in [0.2, 0.5, 0.9, 1.0, 1.5, 3.0, 10.0] {
                let direct = (g(s) - laurent_approx(s, order)).abs();
                let tail = truncation_error(s, order);
                assert!((direct - tail).abs() <= 1e-14 + 1e-12 * direct, "order {order} s {s}");
            }
        }
    }

    #[test]
    fn partial_sums_bracket_g_for_large_s() {
        for s in [1.0, 1.3, 2.0, 5.0] {
            for order in [2u32, 4, 6, 8] {
                let lo = laurent_approx(s, order);
                let hi = laurent_approx(s, order + 2);
                let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
                assert!(a <= g(s) && g(s) <= b, "s {s} order {order}");
            }
        }
    }

    #[test]
    fn taylor_series_at_zero_vanishes() {
        assert_eq!(taylor_at_zero(8), vec![0.0; 9]);
        let v = 0.05f64.powi(-10) * g(0.05);
        assert!(v < 1e-70, "{v}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(cutoff(5, 1e-3).is_err());
        assert!(cutoff(0, 1e-3).is_err());
        assert!(cutoff(6, 0.0).is_err());
        assert!(cutoff(6, 1.0).is_err());
        assert!(matches!(cutoff(2, 1e-12), Err(Error::NotAchievable { .. })));
    }

    #[test]
    fn sixth_order_anchor() {
        let e = cutoff(6, 1e-3).unwrap();
        assert!((e.k_cut - 0.6694).abs() < 5e-3, "{e:?}");
        assert!((truncation_error(e.s_cut, 6) - 1e-3).abs() < 1e-9);
    }
}
