//! The canonical smooth cutoff profile.
//!
//! `rho(s) = 1` for `s <= 1/2`, `rho(s) = 0` for `s >= 1`, and on the
//! transition interval
//! `rho(s) = g(1 - s) / (g(1 - s) + g(s - 1/2))` with `g(u) = exp(-1/u)`.

use num_traits::Float;

fn g<T: Float>(u: T) -> T {
    if u > T::zero() {
        (-u.recip()).exp()
    } else {
        T::zero()
    }
}

/// `g'(u) = g(u) / u^2`.
fn dg<T: Float>(u: T) -> T {
    if u > T::zero() {
        g(u) / (u * u)
    } else {
        T::zero()
    }
}

pub fn bump<T: Float>(s: T) -> T {
    let half = T::from(0.5).unwrap();
    if s <= half {
        return T::one();
    }
    if s >= T::one() {
        return T::zero();
    }
    let a = g(T::one() - s);
    let b = g(s - half);
    a / (a + b)
}

pub fn bump_derivative<T: Float>(s: T) -> T {
    let half = T::from(0.5).unwrap();
    if s <= half || s >= T::one() {
        return T::zero();
    }
    let a = g(T::one() - s);
    let b = g(s - half);
    let da = -dg(T::one() - s);
    let db = dg(s - half);
    let den = a + b;
    (da * b - a * db) / (den * den)
}

/// `rho_r(s) = rho(s / r)`.
pub fn bump_scaled<T: Float>(r: T, s: T) -> T {
    bump(s / r)
}

/// `d/ds rho_r(s) = rho'(s / r) / r`.
pub fn bump_scaled_derivative<T: Float>(r: T, s: T) -> T {
    bump_derivative(s / r) / r
}
