//! Small special-function layer: gamma variants, erfc, Wallis ratios.

use std::f64::consts::PI;

/// Gamma function. Negative non-integer arguments go through the reflection
/// formula so only positive arguments reach the underlying implementation.
pub fn gamma(x: f64) -> f64 {
    if x > 0.0 {
        statrs::function::gamma::gamma(x)
    } else {
        if x == x.floor() {
            return f64::NAN;
        }
        // Γ(x)Γ(1-x) = π / sin(πx)
        PI / ((PI * x).sin() * statrs::function::gamma::gamma(1.0 - x))
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Upper regularized incomplete gamma Q(a, x).
pub fn gamma_uq(a: f64, x: f64) -> f64 {
    statrs::function::gamma::gamma_ur(a, x)
}

pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// Central binomial ratio `binom(2m, m) 4^{-m}`, i.e. the probability that a
/// simple walk bridge of length 2m returns to its start. Also the tail of the
/// universal descending-ladder increment law.
pub fn wallis(m: usize) -> f64 {
    // product_{j=1..m} (2j-1)/(2j)
    let mut w = 1.0;
    for j in 1..=m {
        w *= (2 * j - 1) as f64 / (2 * j) as f64;
    }
    w
}

/// Table of `wallis(m)` for m = 0..=mmax.
pub fn wallis_table(mmax: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(mmax + 1);
    let mut w = 1.0;
    t.push(w);
    for j in 1..=mmax {
        w *= (2 * j - 1) as f64 / (2 * j) as f64;
        t.push(w);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reflection() {
        // Γ(-1/2) = -2√π, Γ(-1/3) ≈ -6.0934
        assert_relative_eq!(gamma(-0.5), -2.0 * PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(
            gamma(-1.0 / 3.0),
            PI / ((PI * (-1.0 / 3.0)).sin() * gamma(4.0 / 3.0)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn wallis_values() {
        assert_eq!(wallis(0), 1.0);
        assert_relative_eq!(wallis(1), 0.5);
        assert_relative_eq!(wallis(2), 0.375); // binom(4,2)/16 = 6/16
        let t = wallis_table(10);
        assert_relative_eq!(t[3], wallis(3));
        // Stirling: wallis(m) ~ 1/sqrt(pi m)
        assert_relative_eq!(wallis(100_000), 1.0 / (PI * 1e5).sqrt(), max_relative = 1e-5);
    }
}
