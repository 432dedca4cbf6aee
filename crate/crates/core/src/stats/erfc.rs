//! Complementary error function in double precision.
//!
//! Below `SWITCH` the Maclaurin-type series
//! `erf(z) = 2/sqrt(pi) * exp(-z^2) * sum_n 2^n z^(2n+1) / (1*3*...*(2n+1))`
//! is used; all its terms are positive, so there is no cancellation and the
//! absolute error of `1 - erf` stays near machine epsilon. Above it, the
//! Laplace continued fraction
//! `erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))`
//! is evaluated with the modified Lentz method, which also keeps relative
//! accuracy deep in the tail.

const SWITCH: f64 = 1.5;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * z2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * EPS {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-z2).exp() * sum
}

fn erfc_continued_fraction(z: f64) -> f64 {
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64 / 2.0;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    FRAC_2_SQRT_PI / 2.0 * (-z * z).exp() / f
}

pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z < SWITCH {
        1.0 - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}
