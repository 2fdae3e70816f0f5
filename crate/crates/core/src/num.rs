//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`. Concrete aliases live at the
//! crate root; `f64` is the precision all file formats are written in.

use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + SampleUniform
    + std::iter::Sum
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// `f64` view of this value, used by file writers and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// One draw from the standard normal distribution.
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Uniform draw from `[lo, hi)`; degenerate intervals return `lo`.
    fn uniform_in<G: Rng + ?Sized>(lo: Self, hi: Self, rng: &mut G) -> Self {
        if hi <= lo {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    }
}

impl Real for f32 {
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardNormal.sample(rng)
    }
}

/// `n` evenly spaced points over `[lo, hi]`, endpoints exact.
pub fn linspace<R: Real>(lo: R, hi: R, n: usize) -> Vec<R> {
    assert!(n >= 1, "linspace needs at least one point");
    if n == 1 {
        return vec![lo];
    }
    let denom = R::of((n - 1) as f64);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * R::of(i as f64) / denom
            }
        })
        .collect()
}

/// Clamp `x` into `[lo, hi]` (requires `lo <= hi`).
pub fn clamp<R: Real>(x: R, lo: R, hi: R) -> R {
    debug_assert!(lo <= hi);
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// Render a scalar with 17 significant digits, enough for `f64` round-trips.
/// All text formats in this crate use this form.
pub fn fmt_sig17<R: Real>(v: R) -> String {
    format!("{:.16e}", v.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints_exact() {
        let xs = linspace::<f64>(0.2, 1.0, 5);
        assert_eq!(xs.len(), 5);
        assert_eq!(xs[0], 0.2);
        assert_eq!(xs[4], 1.0);
        assert!((xs[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn linspace_single_point() {
        assert_eq!(linspace::<f64>(0.3, 0.9, 1), vec![0.3]);
    }

    #[test]
    fn sig17_round_trips() {
        for &v in &[
            0.1_f64,
            std::f64::consts::PI,
            1.386,
            -2.0656561e-3,
            1.0 / 3.0,
        ] {
            let s = fmt_sig17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn uniform_in_degenerate_interval() {
        let mut rng = rand::thread_rng();
        assert_eq!(f64::uniform_in(0.4, 0.4, &mut rng), 0.4);
    }

    #[test]
    fn generic_math_works_in_f32() {
        let xs = linspace::<f32>(0.0, 1.0, 3);
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(clamp(1.5f32, 0.0, 1.0), 1.0);
    }
}
