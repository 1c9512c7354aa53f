//! Dimensional constants of the conformal Laplacian.

/// `a = 4(n-1)/(n-2)`.
pub fn a(n: usize) -> f64 {
    assert!(n >= 3, "a(n) needs n >= 3");
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

/// Critical exponent `p = 2n/(n-2)`.
pub fn p(n: usize) -> f64 {
    assert!(n >= 3, "p(n) needs n >= 3");
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// `D = (p-1)a/(p-2)`, the gradient coefficient after `w = u^(2-p)`.
pub fn d_coef(n: usize) -> f64 {
    (p(n) - 1.0) * a(n) / (p(n) - 2.0)
}

/// Boundary coupling `2/(p-2) = (n-2)/2`; equals 1 in two dimensions.
pub fn robin_factor(n: usize) -> f64 {
    if n == 2 {
        1.0
    } else {
        2.0 / (p(n) - 2.0)
    }
}

/// Signed power `sgn(u)|u|^e`, with `powi` when `e` is an integer.
pub fn spow(u: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        u.powi(e as i32)
    } else {
        u.signum() * u.abs().powf(e)
    }
}
