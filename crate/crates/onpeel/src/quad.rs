//! Quadrature kernels shared by the resolvent and limit-law modules.
//!
//! Three tools cover every integral in the crate:
//! * Gauss–Chebyshev (second kind) nodes for integrands carrying an explicit
//!   `sqrt(1-x^2)` weight,
//! * tanh–sinh (double exponential) nodes on (-1, 1) for endpoint exponents
//!   that are not half-integers,
//! * an adaptive Gauss–Kronrod 7/15 rule for everything on finite segments.

use std::f64::consts::PI;

/// Nodes `x_j` and weights `w_j` with
/// `∫_{-1}^{1} f(x) sqrt(1-x^2) dx ≈ Σ w_j f(x_j)`.
pub fn gauss_chebyshev2(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for j in 1..=m {
        let t = j as f64 * PI / (m as f64 + 1.0);
        x.push(t.cos());
        w.push(PI / (m as f64 + 1.0) * t.sin() * t.sin());
    }
    (x, w)
}

/// tanh–sinh nodes on (-1, 1): returns (x_i, w_i) with
/// `∫_{-1}^1 f ≈ Σ w_i f(x_i)`. `levels` halvings of the step from h0 = 1.
pub struct TanhSinh {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl TanhSinh {
    pub fn new(levels: u32) -> Self {
        let h = 1.0 / (1u64 << levels) as f64;
        let tmax = 3.8; // exp(-pi/2 sinh 3.8) ~ 1e-15 from the endpoints
        let nmax = (tmax / h) as i64;
        let mut x = Vec::new();
        let mut w = Vec::new();
        for i in -nmax..=nmax {
            let t = i as f64 * h;
            let s = (PI / 2.0) * t.sinh();
            let xi = s.tanh();
            let dx = (PI / 2.0) * t.cosh() / (s.cosh() * s.cosh());
            if (1.0 - xi.abs()) > 1e-17 && dx.is_finite() {
                x.push(xi);
                w.push(dx * h);
            }
        }
        TanhSinh { x, w }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const GK_X: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GK_WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = GK_WK[7] * f(c);
    let mut g = GK_WG[3] * f(c);
    for i in 0..7 {
        let fa = f(c - h * GK_X[i]);
        let fb = f(c + h * GK_X[i]);
        k += GK_WK[i] * (fa + fb);
        if i % 2 == 1 {
            g += GK_WG[i / 2] * (fa + fb);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod on [a, b] to absolute tolerance `tol`.
/// Returns the estimate; panics only on NaN input bounds.
pub fn integrate_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    #[derive(Clone, Copy)]
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (v, e) = gk15(&f, a, b);
    let mut segs = vec![Seg { a, b, val: v, err: e }];
    let mut total_err: f64 = e;
    let mut iter = 0;
    while total_err > tol && iter < 2000 {
        iter += 1;
        // split the worst segment
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap())
            .unwrap();
        let s = segs[idx];
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            break; // cannot subdivide further
        }
        let (v1, e1) = gk15(&f, s.a, m);
        let (v2, e2) = gk15(&f, m, s.b);
        total_err += e1 + e2 - s.err;
        segs[idx] = Seg { a: s.a, b: m, val: v1, err: e1 };
        segs.push(Seg { a: m, b: s.b, val: v2, err: e2 });
    }
    segs.iter().map(|s| s.val).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chebyshev_moments() {
        // ∫ x^2 sqrt(1-x^2) = pi/8
        let (x, w) = gauss_chebyshev2(64);
        let v: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x * x).sum();
        assert_relative_eq!(v, PI / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_{-1}^{1} (1-x^2)^{-1/3} dx = sqrt(pi) Γ(2/3)/Γ(7/6)
        let q = TanhSinh::new(7);
        let v = q.integrate(|x| (1.0 - x * x).powf(-1.0 / 3.0));
        let exact = PI.sqrt() * crate::special::gamma(2.0 / 3.0) / crate::special::gamma(7.0 / 6.0);
        assert_relative_eq!(v, exact, max_relative = 1e-10);
    }

    #[test]
    fn gk_smooth() {
        let v = integrate_gk(|x| (-x).exp(), 0.0, 30.0, 1e-12);
        assert_relative_eq!(v, 1.0, max_relative = 1e-11);
    }
}
