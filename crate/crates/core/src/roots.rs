//! Bracketing root finders shared by the fixed-point and CDF-inversion code.

/// Bisection on `[lo, hi]` for a function that is positive left of the root
/// and nonpositive right of it.
///
/// Stops once the bracket is narrower than `tol` or cannot be halved any
/// further in double precision. Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..2048 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + 0.5 * (hi - lo)
}

/// Smallest `x` in `[lo, hi]` with `f(x) >= target` for nondecreasing `f`,
/// located to within `tol`.
pub fn invert_nondecreasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    for _ in 0..2048 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| 2.0 - x * x, 0.0, 2.0, 1e-14);
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn inverts_cdf() {
        let x = invert_nondecreasing(|x| x * x, 0.25, 0.0, 1.0, 1e-13);
        assert!((x - 0.5).abs() < 1e-12);
    }
}
