//! Scalar root finding for first-order optimality conditions.

use crate::domain::RevenueFunction;
use crate::num::Real;

/// Absolute tolerance on the argument for all bisection in this crate.
pub const BISECT_TOL: f64 = 1e-9;

const SCAN_INTERVALS: usize = 2048;
const MAX_BISECT_ITERS: usize = 200;

/// Bisection on `[lo, hi]` assuming `f(lo)` and `f(hi)` straddle zero.
pub fn bisect<R: Real, F: Fn(R) -> R>(mut lo: R, mut hi: R, f: F, tol: R) -> R {
    let mut f_lo = f(lo);
    if f_lo == R::zero() {
        return lo;
    }
    if f(hi) == R::zero() {
        return hi;
    }
    let half = R::of(0.5);
    for _ in 0..MAX_BISECT_ITERS {
        if hi - lo <= tol {
            break;
        }
        let mid = half * (lo + hi);
        let f_mid = f(mid);
        if f_mid == R::zero() {
            return mid;
        }
        if (f_mid > R::zero()) == (f_lo > R::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}

/// Solve the first-order condition `g'(x) = rate` on `[lo, hi]`.
///
/// The interval is scanned for sign changes of `g'(x) - rate` and each
/// bracket is bisected to [`BISECT_TOL`]. Selection rule:
///
/// * no root, `g' > rate` throughout: marginal revenue always beats the
///   rate, return `hi`;
/// * no root, `g' < rate` throughout: return `lo`;
/// * one root: return it;
/// * several roots (possible when `g'` is not monotone): return the root
///   maximizing `g(x) - rate * x`.
pub fn solve_foc<R: Real>(g: &RevenueFunction<R>, lo: R, hi: R, rate: R) -> R {
    debug_assert!(lo < hi);
    let resid =
        |x: R| g.derivative(x).expect("derivative defined on positive interval") - rate;

    let n = SCAN_INTERVALS;
    let step = (hi - lo) / R::of(n as f64);
    let mut roots: Vec<R> = Vec::new();
    let mut any_pos = false;
    let mut any_neg = false;

    let mut x_prev = lo;
    let mut r_prev = resid(lo);
    for i in 1..=n {
        let x = if i == n { hi } else { lo + step * R::of(i as f64) };
        let r = resid(x);
        if r_prev == R::zero() {
            roots.push(x_prev);
        } else if r != R::zero() && (r > R::zero()) != (r_prev > R::zero()) {
            roots.push(bisect(x_prev, x, resid, R::of(BISECT_TOL)));
        }
        any_pos |= r_prev > R::zero();
        any_neg |= r_prev < R::zero();
        x_prev = x;
        r_prev = r;
    }
    if r_prev == R::zero() {
        roots.push(x_prev);
    }
    any_pos |= r_prev > R::zero();
    any_neg |= r_prev < R::zero();

    match roots.len() {
        0 => {
            if any_pos && !any_neg {
                hi
            } else {
                lo
            }
        }
        1 => roots[0],
        _ => {
            let objective = |x: R| g.eval(x).expect("revenue defined on interval") - rate * x;
            let mut best = roots[0];
            let mut best_val = objective(best);
            for &r in &roots[1..] {
                let v = objective(r);
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            best
        }
    }
}
