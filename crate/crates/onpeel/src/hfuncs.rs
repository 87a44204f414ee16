//! Harmonic functions of the ricocheted random walk.
//!
//! `h_down(p_frak, p)` is the probability that the walk ricocheting with
//! probability `p_frak` off the negative half-line, started at `p`, is
//! eventually trapped at 0. `h_up` is the harmonic function of the walk
//! conditioned to survive. `big_h(l, p)` is the universal law of the first
//! entry of an admissible walk into the non-positive integers.
//!
//! Everything reduces to the coefficients of `((1+x)/(1-x))^e`, generated by
//! the three-term recurrence from `(1-x^2) f' = 2e f`, which is stable
//! because all coefficients are positive for `e in (0,1)`.

use crate::model::NuMeasure;
use crate::special::{gamma, ln_gamma, wallis, wallis_table};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `b = arccos(p_frak)/pi`, the exponent attached to ricochet probability
/// `p_frak` in `[-1, 1]`.
pub fn b_of(p_frak: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&p_frak));
    p_frak.clamp(-1.0, 1.0).acos() / PI
}

/// Coefficients `c_0..c_nmax` of `((1+x)/(1-x))^e`.
pub fn ratio_power_series(e: f64, nmax: usize) -> Vec<f64> {
    let mut c = vec![0.0; nmax + 1];
    c[0] = 1.0;
    if nmax >= 1 {
        c[1] = 2.0 * e;
    }
    for j in 1..nmax {
        c[j + 1] = (2.0 * e * c[j] + (j as f64 - 1.0) * c[j - 1]) / (j as f64 + 1.0);
    }
    c
}

fn ratio_power_series_complex(e: Complex64, nmax: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); nmax + 1];
    c[0] = Complex64::new(1.0, 0.0);
    if nmax >= 1 {
        c[1] = 2.0 * e;
    }
    for j in 1..nmax {
        c[j + 1] = (2.0 * e * c[j] + (j as f64 - 1.0) * c[j - 1]) / (j as f64 + 1.0);
    }
    c
}

/// Trapping probability `h_down` for a single `p`.
pub fn h_down(p_frak: f64, p: usize) -> f64 {
    if p == 0 {
        return 1.0;
    }
    if p_frak == 1.0 {
        return 1.0;
    }
    if p_frak == -1.0 {
        return h_down_minus1(p);
    }
    let b = b_of(p_frak);
    let d = ratio_power_series(1.0 - b, 2 * p);
    d[2 * p] / (1.0 + p_frak)
}

/// `h_down` at `p_frak = -1`: `4/(pi^2 p) * sum_{k<=p} 1/(2k-1)`.
pub fn h_down_minus1(p: usize) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let s: f64 = (1..=p).map(|k| 1.0 / (2 * k - 1) as f64).sum();
    4.0 / (PI * PI * p as f64) * s
}

/// Closed hypergeometric form of `h_down` for `p_frak` in (-1,1). The 2F1 has
/// a negative integer first argument, so it is evaluated as the finite sum
/// `sum_k binom(2p,k) (b-1)_k / (b-2p)_k (-1)^k ... ` folded into gamma
/// ratios; used to cross-check the series engine.
pub fn h_down_hypergeometric(p_frak: f64, p: usize) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let b = b_of(p_frak);
    // prefactor Γ(b) / (Γ(2p+1) Γ(b-2p))
    let pre = gamma(b) / (gamma(2.0 * p as f64 + 1.0) * gamma(b - 2.0 * p as f64));
    // 2F1(-2p, b-1; b-2p; -1) as a finite sum with term recurrence
    let mut term = 1.0;
    let mut sum = 1.0;
    let n = 2 * p;
    for k in 0..n {
        let kf = k as f64;
        term *= -(-(n as f64) + kf) * (b - 1.0 + kf) / ((b - n as f64 + kf) * (kf + 1.0));
        sum += term;
    }
    pre * sum / (1.0 + p_frak)
}

/// Constant of the large-`p` decay `h_down(p_frak, p) ~ r p^{-b}`.
/// Degenerate `p_frak = 1` returns 0.
pub fn r_const(p_frak: f64) -> f64 {
    assert!(p_frak > -1.0, "r_const undefined at p_frak = -1");
    if p_frak == 1.0 {
        return 0.0;
    }
    let b = b_of(p_frak);
    2.0 * gamma(b) * 4f64.powf(-b) / PI * ((1.0 - p_frak) / (1.0 + p_frak)).sqrt()
}

/// Survival harmonic function `h_up` for a single `p >= 1`.
pub fn h_up(p_frak: f64, p: usize) -> f64 {
    assert!(p >= 1);
    if p_frak == 1.0 {
        return (1..=p).map(|k| 1.0 / (2 * k - 1) as f64).sum();
    }
    let b = b_of(p_frak);
    let u = ratio_power_series(b, 2 * p);
    (0..p).map(|i| u[2 * i + 1]).sum::<f64>() / (2.0 * b)
}

/// Closed hypergeometric form of `h_up`, for cross-checks.
pub fn h_up_hypergeometric(p_frak: f64, p: usize) -> f64 {
    assert!(p >= 1);
    let b = b_of(p_frak);
    let pre = gamma(b) / (gamma(2.0 * p as f64) * gamma(b - 2.0 * p as f64 + 1.0));
    let mut term = 1.0;
    let mut sum = 1.0;
    let n = 2 * p;
    for k in 0..n {
        let kf = k as f64;
        term *= -(-(n as f64) + kf) * (b + kf) / ((b - n as f64 + 1.0 + kf) * (kf + 1.0));
        sum += term;
    }
    pre * sum / (4.0 * b)
}

/// First-entry law of the admissible walk into the non-positive integers:
/// `big_h(l, p) = P_p(walk first enters Z_{<=0} at -l)`.
pub fn big_h(l: usize, p: usize) -> f64 {
    if p == 0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let pf = p as f64;
    pf / (l as f64 + pf) * wallis(p) * wallis(l)
}

/// `h_down_0(p) = binom(2p,p) 4^{-p}` for arbitrary `p`, via log-gamma when
/// outside table range.
pub fn h0(p: u64) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let p = p as f64;
    (ln_gamma(2.0 * p + 1.0) - 2.0 * ln_gamma(p + 1.0) - p * 4f64.ln()).exp()
}

/// Expected vertex count of the Boltzmann loop-decorated map of half
/// perimeter `p` at a non-generic critical point:
/// `f_down(p) = nu(-1) h_down(p) / nu(-p-1)`.
pub fn f_down(nu: &NuMeasure, p_frak: f64, p: usize) -> f64 {
    nu.pdf(-1) * h_down(p_frak, p) / nu.pdf(-(p as i64) - 1)
}

/// How a cached table was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMethod {
    Series,
    ClosedFormSpecial,
}

/// Cached `h_down`/`h_up` values up to `pmax`, with a fitted first-order
/// correction on top of the `r p^{-b}` asymptotics for evaluation beyond the
/// table.
pub struct HTable {
    pub p_frak: f64,
    pub b: f64,
    pub down: Vec<f64>,
    pub up: Vec<f64>,
    pub method: HMethod,
    r: f64,
    corr1: f64,
}

impl HTable {
    pub fn build(p_frak: f64, pmax: usize) -> Self {
        let b = b_of(p_frak);
        let (down, up, method) = if p_frak == 1.0 {
            let mut up = vec![0.0; pmax + 1];
            let mut s = 0.0;
            for p in 1..=pmax {
                s += 1.0 / (2 * p - 1) as f64;
                up[p] = s;
            }
            (vec![1.0; pmax + 1], up, HMethod::ClosedFormSpecial)
        } else if p_frak == -1.0 {
            let mut down = vec![1.0; pmax + 1];
            let mut s = 0.0;
            for p in 1..=pmax {
                s += 1.0 / (2 * p - 1) as f64;
                down[p] = 4.0 / (PI * PI * p as f64) * s;
            }
            // h_up is not used at the boundary point p_frak = -1
            (down, vec![0.0; pmax + 1], HMethod::ClosedFormSpecial)
        } else {
            let d = ratio_power_series(1.0 - b, 2 * pmax);
            let down: Vec<f64> = (0..=pmax).map(|p| d[2 * p] / (1.0 + p_frak)).collect();
            let u = ratio_power_series(b, 2 * pmax);
            let mut up = vec![0.0; pmax + 1];
            let mut s = 0.0;
            for p in 1..=pmax {
                s += u[2 * p - 1];
                up[p] = s / (2.0 * b);
            }
            (down, up, HMethod::Series)
        };
        let r = if p_frak == 1.0 { 0.0 } else { r_const(p_frak) };
        // first-order correction h(p) ≈ r p^{-b} (1 + corr1/p)
        let corr1 = if r > 0.0 && pmax >= 4 {
            let p = pmax as f64;
            (down[pmax] / (r * p.powf(-b)) - 1.0) * p
        } else {
            0.0
        };
        HTable { p_frak, b, down, up, method, r, corr1 }
    }

    /// `h_down` at arbitrary height, table below `pmax`, corrected
    /// asymptotics beyond.
    #[inline]
    pub fn down(&self, p: u64) -> f64 {
        if (p as usize) < self.down.len() {
            self.down[p as usize]
        } else if self.p_frak == 1.0 {
            1.0
        } else {
            let pf = p as f64;
            self.r * pf.powf(-self.b) * (1.0 + self.corr1 / pf)
        }
    }

    #[inline]
    pub fn up(&self, p: u64) -> f64 {
        if (p as usize) < self.up.len() {
            self.up[p as usize]
        } else {
            // h_up(p) ~ p^b / (2b Γ(1+b)^..): extend by the local power law
            let n = self.up.len() - 1;
            self.up[n] * (p as f64 / n as f64).powf(self.b)
        }
    }
}

/// Coefficients `a_j(p) = [x^j] h_down_x(p)`, `j = 0..=jmax`, extracted from
/// the analytic continuation of `h_down` to the complex unit disk by contour
/// integration on `|z| = radius` (trapezoidal rule, spectrally accurate).
///
/// These are the building blocks of the nesting law: the walk conditioned to
/// be trapped at 0 collects exactly `j` ricochets with probability
/// `p_frak^j a_j(p) / h_down(p_frak, p)`.
pub fn nesting_coeffs(p: usize, jmax: usize) -> Vec<f64> {
    let m = 1024usize.max(4 * (jmax + 1).next_power_of_two());
    let radius = 0.9;
    // h_down_z(p) at the M roots of unity scaled by radius
    let mut vals = Vec::with_capacity(m);
    for k in 0..m {
        let th = 2.0 * PI * k as f64 / m as f64;
        let z = Complex64::from_polar(radius, th);
        let b = z.acos() / PI;
        let e = Complex64::new(1.0, 0.0) - b;
        let d = ratio_power_series_complex(e, 2 * p);
        vals.push(d[2 * p] / (Complex64::new(1.0, 0.0) + z));
    }
    let mut out = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let mut s = Complex64::new(0.0, 0.0);
        for (k, v) in vals.iter().enumerate() {
            let th = -2.0 * PI * (j * k % m) as f64 / m as f64;
            s += v * Complex64::from_polar(1.0, th);
        }
        out.push(s.re / (m as f64 * radius.powi(j as i32)));
    }
    out
}

/// Exact nesting pmf `P(N = j)` for the walk from `p` conditioned to be
/// trapped at 0, with ricochet probability `p_frak`.
pub fn nesting_pmf(p: usize, p_frak: f64, jmax: usize) -> Vec<f64> {
    let a = nesting_coeffs(p, jmax);
    let h = h_down(p_frak, p);
    a.iter()
        .enumerate()
        .map(|(j, &aj)| p_frak.powi(j as i32) * aj / h)
        .collect()
}

/// Shared table of `h_down_0(p) = binom(2p,p)4^{-p}` up to `pmax`.
pub fn h0_table(pmax: usize) -> Vec<f64> {
    wallis_table(pmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn h_down_specials() {
        // h0(2) = 3/8
        assert_relative_eq!(h_down(0.0, 2), 0.375, epsilon = 1e-14);
        // h_down(p_frak, 1) = 2(1-b)^2/(1+p_frak); p_frak = 1/2 -> 16/27
        assert_relative_eq!(h_down(0.5, 1), 16.0 / 27.0, epsilon = 1e-13);
        // h_down(-1, 1) = 4/pi^2
        assert_relative_eq!(h_down(-1.0, 1), 4.0 / (PI * PI), epsilon = 1e-14);
        assert_relative_eq!(h_down(1.0, 17), 1.0);
    }

    #[test]
    fn h_down_matches_hypergeometric() {
        for &pf in &[0.25, 0.75, -0.4] {
            for p in 1..=12 {
                assert_relative_eq!(
                    h_down(pf, p),
                    h_down_hypergeometric(pf, p),
                    epsilon = 1e-11
                );
            }
        }
    }

    #[test]
    fn h_up_specials() {
        // h_up_0(p) = 2p h_down_0(p)
        for p in 1..=20 {
            assert_relative_eq!(
                h_up(0.0, p),
                2.0 * p as f64 * h_down(0.0, p),
                epsilon = 1e-12
            );
        }
        // h_up_1(2) = 1 + 1/3
        assert_relative_eq!(h_up(1.0, 2), 4.0 / 3.0, epsilon = 1e-14);
        for p in 1..=10 {
            assert_relative_eq!(h_up(0.3, p), h_up_hypergeometric(0.3, p), epsilon = 1e-10);
        }
    }

    #[test]
    fn continuity_at_boundary() {
        // The deviation from the boundary specials is linear in
        // b = arccos(1-eps)/pi ~ sqrt(2 eps)/pi, so eps = 1e-8 gives ~1e-3
        // and eps = 1e-12 lands below 1e-5.
        for p in 1..=50 {
            assert_relative_eq!(h_down(1.0 - 1e-8, p), 1.0, epsilon = 2e-3);
            assert_relative_eq!(h_down(1.0 - 1e-12, p), 1.0, epsilon = 1e-5);
            assert_relative_eq!(
                h_down(-1.0 + 1e-8, p),
                h_down_minus1(p),
                max_relative = 2e-3
            );
            assert_relative_eq!(
                h_down(-1.0 + 1e-12, p),
                h_down_minus1(p),
                max_relative = 1e-5
            );
        }
    }

    #[test]
    fn r_const_values() {
        // b = 1/2: r_0 = 1/sqrt(pi)
        assert_relative_eq!(r_const(0.0), 1.0 / PI.sqrt(), epsilon = 1e-14);
        assert_eq!(r_const(1.0), 0.0);
        // h_down(1/2, p) p^{1/3} / r -> 1
        let t = HTable::build(0.5, 20_000);
        let p = 10_000f64;
        assert_relative_eq!(
            t.down[10_000] * p.powf(t.b) / r_const(0.5),
            1.0,
            max_relative = 0.01
        );
    }

    #[test]
    fn htable_asymptotic_extension() {
        let t = HTable::build(0.5, 1 << 14);
        let exact = h_down(0.5, (1 << 14) + 1000);
        assert_relative_eq!(t.down(((1 << 14) + 1000) as u64), exact, max_relative = 1e-8);
    }

    #[test]
    fn big_h_values() {
        assert_relative_eq!(big_h(0, 1), 0.5);
        assert_relative_eq!(big_h(1, 1), 0.125); // (1/2)(1/2)(1/2)
        assert_relative_eq!(big_h(0, 3), h_down(0.0, 3));
        assert_eq!(big_h(0, 0), 1.0);
        assert_eq!(big_h(2, 0), 0.0);
    }

    #[test]
    fn big_h_row_sums_to_one() {
        // partial sums monotone up to 1, remainder within exact sandwich
        for p in 1..=6 {
            let lmax = 200_000;
            let w = wallis_table(lmax);
            let mut s = 0.0;
            let mut prev = 0.0;
            for l in 0..=lmax {
                s += p as f64 / (l + p) as f64 * w[p] * w[l];
                assert!(s >= prev);
                prev = s;
            }
            // tail: sum_{l>L} p/(l+p) w(p) w(l), with 1/sqrt(pi(l+1/2)) <= w(l) <= 1/sqrt(pi l)
            let lf = lmax as f64;
            let tail_hi = p as f64 * w[p] * 2.0 / (PI.sqrt() * lf.sqrt());
            assert!(1.0 - s > 0.0 && 1.0 - s < tail_hi);
        }
    }

    #[test]
    fn nesting_coeff_spot_values() {
        let a = nesting_coeffs(1, 8);
        // a_0(1) = H_0(1) = 1/2
        assert_relative_eq!(a[0], 0.5, epsilon = 1e-11);
        // a_1(1) = 2/pi - 1/2 (derivative of 2(1-b)^2/(1+x) at x=0)
        assert_relative_eq!(a[1], 2.0 / PI - 0.5, epsilon = 1e-10);
    }

    #[test]
    fn nesting_coeffs_resum_to_h_down() {
        // sum_j p_frak^j a_j(p) = h_down(p_frak, p)
        let p = 3;
        let a = nesting_coeffs(p, 80);
        let pf = 0.3f64;
        let s: f64 = a
            .iter()
            .enumerate()
            .map(|(j, &aj)| pf.powi(j as i32) * aj)
            .sum();
        assert_relative_eq!(s, h_down(pf, p), epsilon = 1e-9);
    }
}
