//! Univariate slice sampling on a bounded interval (Neal 2003, shrinkage only).
//!
//! With a finite support the initial bracket is the whole support, so no
//! stepping out is needed and there is nothing to tune.

use rand::Rng;

use crate::scalar::Real;

const MAX_SHRINKS: usize = 500;

/// One slice-sampling transition from `x0` for the log-density `log_f`,
/// supported on the open interval `(lower, upper)`.
pub fn slice_bounded<T, R, F>(x0: T, lower: T, upper: T, log_f: F, rng: &mut R) -> T
where
    T: Real,
    R: Rng + ?Sized,
    F: Fn(T) -> T,
{
    let u: f64 = 1.0 - rng.random::<f64>();
    let level = log_f(x0) + T::lit(u.ln());
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..MAX_SHRINKS {
        let x1 = lo + T::lit(rng.random::<f64>()) * (hi - lo);
        if x1 > lower && x1 < upper && log_f(x1) > level {
            return x1;
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
        if !(hi > lo) {
            break;
        }
    }
    x0
}

/// Log full conditional of a standard deviation governing `count` centred
/// Gaussian terms with sum of squares `ss`, under a flat prior on the sd.
pub fn scale_log_density<T: Real>(count: usize, ss: T) -> impl Fn(T) -> T {
    let n = T::lit(count as f64);
    move |s: T| -n * s.ln() - ss / (T::lit(2.0) * s * s)
}
