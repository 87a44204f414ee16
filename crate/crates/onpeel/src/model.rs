//! Model parameters, admissibility of weight sequences, and the step law ν.
//!
//! A triple `(q, g, n)` assigns weight `n g^{|l|}` to each loop and `q_k` to
//! each undecorated face of degree 2k. The gasket of such a map is a
//! Boltzmann map with effective weights `qhat_k = q_k + n g^{2k} F^(k)`, and
//! every admissible `qhat` corresponds to a unique step law ν on the
//! integers for which the half-line walk machinery applies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series for u(r) diverges at r = {0}")]
    SeriesDivergence(f64),
    #[error("step law mass deviates from 1 by {0:.3e}; inconsistent disk functions")]
    MassDeviation(f64),
    #[error("sequence is not admissible")]
    Inadmissible,
    #[error("config error: {0}")]
    Config(String),
}

/// The model parameters `(q, g, n)` with finite-support `q`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightTriple {
    /// Face weights `q_1..q_d`.
    pub q: Vec<f64>,
    /// Loop fugacity per unit of loop length.
    pub g: f64,
    /// Loop weight, in `[0, 2]`.
    pub n: f64,
}

impl WeightTriple {
    pub fn new(q: Vec<f64>, g: f64, n: f64) -> Result<Self, ModelError> {
        let t = WeightTriple { q, g, n };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.q.is_empty() {
            return Err(ModelError::InvalidParameter("q must have d >= 1".into()));
        }
        if self.q.iter().any(|&x| !(x >= 0.0)) {
            return Err(ModelError::InvalidParameter("q_k must be >= 0".into()));
        }
        if !(self.g >= 0.0) {
            return Err(ModelError::InvalidParameter("g must be >= 0".into()));
        }
        if !(0.0..=2.0).contains(&self.n) {
            return Err(ModelError::InvalidParameter("n must lie in [0, 2]".into()));
        }
        Ok(())
    }

    /// Ricochet probability of the associated walk.
    pub fn p_frak(&self) -> f64 {
        self.n / 2.0
    }

    pub fn q_at(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.q.len() {
            self.q[k - 1]
        } else {
            0.0
        }
    }

    /// Loops switched off (n = 0 or g = 0).
    pub fn loopless(&self) -> bool {
        self.n == 0.0 || self.g == 0.0
    }
}

/// Disk partition functions `F^(p) = gamma^{2p} m_p`: the bounded moments
/// `m_p = ∫ x^{2p} rho` are stored (the raw values overflow f64 for large p
/// when gamma > 1), plus the power-law model
/// `F^(p) = c gamma^{2p} p^{-(alpha+1/2)}` beyond the head.
#[derive(Debug, Clone)]
pub struct DiskFunctions {
    /// `moments[p] = F^(p) gamma^{-2p}`; `moments[0] = 1`.
    pub moments: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
    pub model_c: f64,
}

impl DiskFunctions {
    /// `F^(p)`; may legitimately overflow to infinity for very large p.
    pub fn eval(&self, p: usize) -> f64 {
        self.eval_ln(p).exp()
    }

    /// `ln F^(p)`, safe for all p.
    pub fn eval_ln(&self, p: usize) -> f64 {
        if p < self.moments.len() && self.moments[p] > 0.0 {
            2.0 * p as f64 * self.gamma.ln() + self.moments[p].ln()
        } else if self.model_c > 0.0 {
            let pf = (p as f64).max(1.0);
            self.model_c.ln() + 2.0 * pf * self.gamma.ln() - (self.alpha + 0.5) * pf.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Effective (gasket) weight sequence `qhat`.
#[derive(Debug, Clone)]
pub struct EffectiveSequence {
    source: QhatSource,
}

#[derive(Debug, Clone)]
enum QhatSource {
    /// Explicit head; zero beyond.
    Table(Vec<f64>),
    /// Head plus `c * ratio^k * k^{-power}` beyond.
    TableWithTail {
        head: Vec<f64>,
        c: f64,
        ratio: f64,
        power: f64,
    },
    /// The symmetric-law point: `qhat_k = (3 pi)^{1-k} nu_golden(k-1)`.
    Golden,
}

impl EffectiveSequence {
    pub fn from_head(head: Vec<f64>) -> Self {
        EffectiveSequence { source: QhatSource::Table(head) }
    }

    pub fn with_tail(head: Vec<f64>, c: f64, ratio: f64, power: f64) -> Self {
        EffectiveSequence {
            source: QhatSource::TableWithTail { head, c, ratio, power },
        }
    }

    pub fn golden() -> Self {
        EffectiveSequence { source: QhatSource::Golden }
    }

    /// `qhat_k`, `k >= 1`.
    pub fn at(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match &self.source {
            QhatSource::Table(h) => h.get(k - 1).copied().unwrap_or(0.0),
            QhatSource::TableWithTail { head, c, ratio, power } => {
                if k <= head.len() {
                    head[k - 1]
                } else {
                    c * ratio.powi(k as i32) * (k as f64).powf(-power)
                }
            }
            QhatSource::Golden => (3.0 * PI).powi(1 - k as i32) * golden_nu_pdf(k as i64 - 1),
        }
    }

    /// `ln qhat_k`; immune to underflow for geometrically small entries.
    pub fn ln_at(&self, k: usize) -> f64 {
        match &self.source {
            QhatSource::Table(h) => h
                .get(k - 1)
                .map(|&v| v.ln())
                .unwrap_or(f64::NEG_INFINITY),
            QhatSource::TableWithTail { head, c, ratio, power } => {
                if k <= head.len() {
                    head[k - 1].ln()
                } else {
                    c.ln() + k as f64 * ratio.ln() - power * (k as f64).ln()
                }
            }
            QhatSource::Golden => {
                (1.0 - k as f64) * (3.0 * PI).ln() + golden_nu_pdf(k as i64 - 1).ln()
            }
        }
    }

    /// Residual of the fixed-point relation against supplied `(q, g, n, F)`.
    pub fn fixed_point_residual(&self, q: &WeightTriple, f: &DiskFunctions, k: usize) -> f64 {
        let loops = if q.loopless() {
            0.0
        } else {
            q.n * ((2 * k) as f64 * q.g.ln() + f.eval_ln(k)).exp()
        };
        (self.at(k) - q.q_at(k) - loops).abs()
    }
}

/// `u(r) = r - sum_{k>=1} binom(2k,k)/2 qhat_k r^k`, evaluated adaptively
/// until the remainder is provably below 1e-12; concave in `r`.
pub fn u_hat(r: f64, qhat: &EffectiveSequence) -> Result<f64, ModelError> {
    assert!(r > 0.0);
    let mut sum = 0.0;
    // term_k = (1/2) wallis(k) qhat_k (4r)^k, accumulated in log space so
    // that geometrically small qhat_k against geometrically large (4r)^k
    // cannot overflow before cancelling.
    let mut ln_w = 0.0; // ln wallis(k)
    let ln_4r = (4.0 * r).ln();
    let mut window = [0.0f64; 4];
    let kmax = 400_000usize;
    let mut t_mid = 0.0;
    for k in 1..=kmax {
        ln_w += ((2 * k - 1) as f64 / (2 * k) as f64).ln();
        let ln_term = ln_w + qhat.ln_at(k) + k as f64 * ln_4r - 2f64.ln();
        if ln_term > 700.0 {
            return Err(ModelError::SeriesDivergence(r));
        }
        let term = ln_term.exp();
        sum += term;
        if k == kmax / 2 {
            t_mid = term;
        }
        window.rotate_left(1);
        window[3] = term;
        if k >= 8 {
            let m = window.iter().cloned().fold(0.0f64, f64::max);
            if m < 1e-17 * (1.0 + sum.abs()) {
                return Ok(r - sum);
            }
            let ratio = window[3] / window[2].max(1e-300);
            if ratio < 0.9 && window[3] * ratio / (1.0 - ratio) < 1e-13 {
                return Ok(r - sum);
            }
        }
    }
    // Reached the cap: either power-law decay exactly at the radius of
    // convergence (admissible boundary case) or divergence. Estimate the
    // local decay exponent from the last octave and correct by the
    // integral remainder when it is safely summable.
    let t_end = window[3];
    if t_end > 0.0 && t_mid > 0.0 && t_end < t_mid {
        let s = (t_mid / t_end).ln() / 2f64.ln();
        if s > 1.1 {
            let remainder = t_end * kmax as f64 / (s - 1.0);
            if remainder < 1e-6 {
                return Ok(r - sum - remainder);
            }
        }
    }
    Err(ModelError::SeriesDivergence(r))
}

/// Smallest positive root of `u(r) = 1`, returned as `gamma = 2 sqrt(r*)`;
/// `None` when no root exists (inadmissible sequence). Handles the tangent
/// (critical) case where `u` only touches 1 at its maximum.
pub fn admissible_gamma(qhat: &EffectiveSequence) -> Option<f64> {
    admissible_gamma_with_slack(qhat, 1e-9)
}

/// Like `admissible_gamma`, accepting a tangency `max u >= 1 - slack`.
/// Callers holding numerically solved sequences a hair below criticality
/// use a slack matching their solver error.
pub fn admissible_gamma_with_slack(qhat: &EffectiveSequence, slack: f64) -> Option<f64> {
    let u = |r: f64| u_hat(r, qhat);
    let mut r_prev = 1e-12;
    let mut u_prev = r_prev;
    let mut r = 0.125;
    let mut bracket: Option<(f64, f64)> = None;
    let mut max_region: Option<(f64, f64)> = None;
    for _ in 0..140 {
        match u(r) {
            Ok(v) if v >= 1.0 => {
                bracket = Some((r_prev, r));
                break;
            }
            Ok(v) => {
                if v < u_prev {
                    max_region = Some((r_prev * 0.5, r));
                    break;
                }
                r_prev = r;
                u_prev = v;
                r *= 2.0;
            }
            Err(_) => {
                let hi = shrink_to_convergent(qhat, r_prev, r);
                max_region = Some((r_prev * 0.5, hi));
                break;
            }
        }
    }
    if let Some((lo, hi)) = bracket {
        let mut lo = lo;
        let mut hi = hi;
        for _ in 0..200 {
            if hi - lo <= 1e-13 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match u(mid) {
                Ok(v) if v >= 1.0 => hi = mid,
                _ => lo = mid,
            }
        }
        return Some(2.0 * hi.sqrt());
    }
    let (lo, hi) = max_region?;
    tangent_root(qhat, lo, hi, slack)
}

fn shrink_to_convergent(qhat: &EffectiveSequence, lo: f64, hi: f64) -> f64 {
    let mut lo = lo;
    let mut hi = hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if u_hat(mid, qhat).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Ternary-search the concave maximum on [lo, hi]; accept a tangency with 1.
fn tangent_root(qhat: &EffectiveSequence, lo: f64, hi: f64, slack: f64) -> Option<f64> {
    let u = |r: f64| u_hat(r, qhat).unwrap_or(f64::NEG_INFINITY);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..220 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if u(m1) < u(m2) {
            a = m1;
        } else {
            b = m2;
        }
        if b - a < 1e-13 * b.max(1.0) {
            break;
        }
    }
    let rstar = 0.5 * (a + b);
    let umax = u(rstar);
    if umax >= 1.0 {
        // overshoot above 1: smallest root lies on the increasing branch
        let mut l = lo.min(rstar * 1e-3);
        let mut h = rstar;
        for _ in 0..200 {
            if h - l < 1e-14 * h.max(1.0) {
                break;
            }
            let mid = 0.5 * (l + h);
            if u(mid) >= 1.0 {
                h = mid;
            } else {
                l = mid;
            }
        }
        Some(2.0 * h.sqrt())
    } else if umax >= 1.0 - slack {
        Some(2.0 * rstar.sqrt())
    } else {
        None
    }
}

/// How the tail of ν beyond the stored head is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailCdfMode {
    /// Head + fitted tail model; index-wise inversion over a lazy window and
    /// continuous inversion beyond.
    #[serde(rename = "exact-lazy")]
    ExactLazy,
    /// Head only, renormalized; the dropped mass is recorded.
    #[serde(rename = "truncated-renormalized")]
    TruncatedRenormalized,
}

#[derive(Debug, Clone)]
enum TailForm {
    /// Exact symmetric law `(2/pi)/(4k^2-1)`: closed-form pdf and tail cdf.
    Golden,
    /// `nu(-k) = cm k^{-theta-1}(1+am/k)`,
    /// `nu(+k) = cp geo^k k^{-theta-1}(1+ap/k)`.
    Power {
        theta: f64,
        cm: f64,
        am: f64,
        cp: f64,
        ap: f64,
        geo: f64,
    },
    /// Zero beyond the head.
    None,
}

impl TailForm {
    fn pdf(&self, k: i64) -> f64 {
        match *self {
            TailForm::Golden => golden_nu_pdf(k),
            TailForm::Power { theta, cm, am, cp, ap, geo } => {
                let a = k.abs() as f64;
                if k < 0 {
                    (cm * a.powf(-theta - 1.0) * (1.0 + am / a)).max(0.0)
                } else if geo > 0.0 {
                    (cp * geo.powi(k as i32) * a.powf(-theta - 1.0) * (1.0 + ap / a)).max(0.0)
                } else {
                    0.0
                }
            }
            TailForm::None => 0.0,
        }
    }

    /// Mass strictly beyond `k_from` on one side: `sum_{k > k_from} pdf(±k)`.
    fn mass_beyond(&self, k_from: i64, neg: bool) -> f64 {
        match *self {
            TailForm::Golden => 1.0 / PI / (2.0 * k_from as f64 + 1.0),
            TailForm::Power { theta, cm, am, cp, ap, geo } => {
                if neg {
                    cm * (em_tail_sum(theta + 1.0, k_from) + am * em_tail_sum(theta + 2.0, k_from))
                } else if geo <= 0.0 {
                    0.0
                } else if (1.0 - geo).abs() < 1e-12 {
                    cp * (em_tail_sum(theta + 1.0, k_from) + ap * em_tail_sum(theta + 2.0, k_from))
                } else {
                    // geometric decay: direct summation converges fast
                    let mut s = 0.0;
                    let mut k = k_from + 1;
                    loop {
                        let t = self.pdf(k);
                        s += t;
                        if t < 1e-25 * (s + 1e-300) || k > k_from + 300_000 {
                            break;
                        }
                        k += 1;
                    }
                    s
                }
            }
            TailForm::None => 0.0,
        }
    }

    /// Invert the one-sided tail: smallest `k > k_from` such that the mass of
    /// `(k_from, k]` is at least `v`. Continuous-model inversion; exact for
    /// the golden closed form.
    fn invert(&self, k_from: i64, v: f64, neg: bool) -> i64 {
        match *self {
            TailForm::Golden => {
                let m0 = 1.0 / PI / (2.0 * k_from as f64 + 1.0);
                let target = (m0 - v).max(1e-300);
                // smallest k with (1/pi)/(2k+1) <= target
                let k = ((1.0 / (PI * target) - 1.0) / 2.0).ceil() as i64;
                k.max(k_from + 1)
            }
            TailForm::Power { theta, geo, .. } => {
                if neg || (1.0 - geo).abs() < 1e-12 {
                    // solve mass_beyond(x) = m0 - v in continuous x >= k_from
                    let m0 = self.mass_beyond(k_from, neg);
                    let target = (m0 - v).max(1e-300);
                    // leading order: cm x^{-theta}/theta = target
                    let lead = m0 * (k_from as f64).powf(theta);
                    let mut x = (lead / target).powf(1.0 / theta) * k_from as f64
                        / (k_from as f64).powf(0.0);
                    // one correction pass with the full model
                    for _ in 0..3 {
                        let cur = self.mass_beyond(x.round() as i64, neg);
                        if cur <= 0.0 {
                            break;
                        }
                        x *= (cur / target).powf(1.0 / theta);
                    }
                    (x.round() as i64).max(k_from + 1)
                } else {
                    // geometric side: scan (reached with vanishing probability)
                    let mut k = k_from + 1;
                    let mut acc = 0.0;
                    while acc < v && k < k_from + 1_000_000 {
                        acc += self.pdf(k);
                        if acc >= v {
                            break;
                        }
                        k += 1;
                    }
                    k
                }
            }
            TailForm::None => k_from + 1,
        }
    }
}

/// Euler–Maclaurin tail `sum_{k > K} k^{-s}`.
fn em_tail_sum(s: f64, k: i64) -> f64 {
    let x = k as f64 + 1.0;
    x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
        - x.powf(1.0 - s) / x / x / x * s * (s + 1.0) * (s + 2.0) / 720.0
}

/// Walker alias table over `0..n`.
#[derive(Debug, Clone)]
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s as usize] = l;
            prob[l as usize] = (prob[l as usize] + prob[s as usize]) - 1.0;
            if prob[l as usize] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        for i in large {
            prob[i as usize] = 1.0;
        }
        for i in small {
            prob[i as usize] = 1.0;
        }
        AliasTable { prob, alias }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.prob.len();
        let i = rng.gen_range(0..n);
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

pub(crate) fn golden_nu_pdf(k: i64) -> f64 {
    let base = 2.0 / PI / ((4 * k * k - 1) as f64);
    if k == 0 {
        1.0 + base
    } else {
        base
    }
}

/// The step law ν on the integers: exact head table for `|k| <= K` plus tail
/// descriptors, with alias sampling.
#[derive(Debug, Clone)]
pub struct NuMeasure {
    head: Vec<f64>,
    k_head: i64,
    pub gamma: f64,
    /// Tail index: `nu(-k) ~ tail_const k^{-theta-1}`.
    pub theta: f64,
    pub tail_const: f64,
    pub mode: TailCdfMode,
    tail: TailForm,
    alias: AliasTable,
    tail_mass_neg: f64,
    tail_mass_pos: f64,
    /// Mass dropped when `mode = TruncatedRenormalized`.
    pub renorm_bias: f64,
    lazy_neg: Vec<f64>,
    lazy_pos: Vec<f64>,
}

const LAZY_WINDOW: i64 = 64;

impl NuMeasure {
    fn assemble(
        head: Vec<f64>,
        gamma: f64,
        theta: f64,
        tail_const: f64,
        tail: TailForm,
        mode: TailCdfMode,
    ) -> Result<Self, ModelError> {
        let k_head = (head.len() as i64 - 1) / 2;
        assert_eq!(head.len() as i64, 2 * k_head + 1);
        if head.iter().any(|&p| !(p >= 0.0)) {
            return Err(ModelError::InvalidParameter("nu(k) must be >= 0".into()));
        }
        let (tail, renorm_bias) = match mode {
            TailCdfMode::ExactLazy => (tail, 0.0),
            TailCdfMode::TruncatedRenormalized => {
                let dropped = tail.mass_beyond(k_head, true) + tail.mass_beyond(k_head, false);
                (TailForm::None, dropped)
            }
        };
        let tail_mass_neg = tail.mass_beyond(k_head, true);
        let tail_mass_pos = tail.mass_beyond(k_head, false);
        let lazy_neg: Vec<f64> = (1..=LAZY_WINDOW).map(|j| tail.pdf(-(k_head + j))).collect();
        let lazy_pos: Vec<f64> = (1..=LAZY_WINDOW).map(|j| tail.pdf(k_head + j)).collect();
        let mut head = head;
        if mode == TailCdfMode::TruncatedRenormalized {
            let m: f64 = head.iter().sum();
            for p in head.iter_mut() {
                *p /= m;
            }
        }
        let mut weights = head.clone();
        weights.push(tail_mass_neg);
        weights.push(tail_mass_pos);
        let alias = AliasTable::new(&weights);
        Ok(NuMeasure {
            head,
            k_head,
            gamma,
            theta,
            tail_const,
            mode,
            tail,
            alias,
            tail_mass_neg,
            tail_mass_pos,
            renorm_bias,
            lazy_neg,
            lazy_pos,
        })
    }

    /// Exact pdf within the head, tail model beyond.
    #[inline]
    pub fn pdf(&self, k: i64) -> f64 {
        if k.abs() <= self.k_head {
            self.head[(k + self.k_head) as usize]
        } else {
            self.tail.pdf(k)
        }
    }

    pub fn k_head(&self) -> i64 {
        self.k_head
    }

    /// Head mass plus modeled tail mass.
    pub fn total_mass(&self) -> f64 {
        self.head.iter().sum::<f64>() + self.tail_mass_neg + self.tail_mass_pos
    }

    /// `P(X <= -k)`; exact head accumulation for `k <= K`, tail model beyond.
    pub fn cdf_le_neg(&self, k: i64) -> f64 {
        assert!(k >= 1);
        if k > self.k_head {
            self.tail.mass_beyond(k - 1, true)
        } else {
            let mut s = self.tail_mass_neg;
            let mut j = self.k_head;
            while j >= k {
                s += self.pdf(-j);
                j -= 1;
            }
            s
        }
    }

    /// Draw one step.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let i = self.alias.sample(rng);
        let n = self.head.len();
        if i < n {
            i as i64 - self.k_head
        } else if i == n {
            self.sample_tail(rng, true)
        } else {
            self.sample_tail(rng, false)
        }
    }

    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R, neg: bool) -> i64 {
        let total = if neg { self.tail_mass_neg } else { self.tail_mass_pos };
        let lazy = if neg { &self.lazy_neg } else { &self.lazy_pos };
        let mut v = rng.gen::<f64>() * total;
        for (j, &p) in lazy.iter().enumerate() {
            if v < p {
                let k = self.k_head + 1 + j as i64;
                return if neg { -k } else { k };
            }
            v -= p;
        }
        let k0 = self.k_head + LAZY_WINDOW;
        let k = self.tail.invert(k0, v, neg);
        if neg {
            -k
        } else {
            k
        }
    }

    /// Residual of `sum_k h0(l+k) nu(k) = h0(l)` including an analytic bound
    /// on the neglected tail; small iff the measure is admissible.
    pub fn harmonicity_residual(&self, l: usize) -> f64 {
        let kbig: i64 = 200_000;
        let h0t = crate::special::wallis_table((kbig + l as i64) as usize + 1);
        let mut s = 0.0;
        for k in -(l as i64)..=kbig {
            let idx = (l as i64 + k) as usize;
            s += h0t[idx] * self.pdf(k);
        }
        let kf = kbig as f64;
        let c_eff = self
            .tail_const
            .max(self.tail.pdf(-(kbig + 1)) * kf.powf(self.theta + 1.0))
            .max(self.tail.pdf(kbig + 1) * kf.powf(self.theta + 1.0));
        let tail_bound =
            2.0 * c_eff * kf.powf(-self.theta - 0.5) / ((self.theta + 0.5) * PI.sqrt());
        (s - h0t[l]).abs() + tail_bound
    }

    /// The exact symmetric critical law `nu(k) = (2/pi)/(4k^2-1) + 1_{k=0}`,
    /// with `gamma^2 = 3 pi` and tail index 1.
    pub fn golden(k_head: i64, mode: TailCdfMode) -> Self {
        let head: Vec<f64> = (-k_head..=k_head).map(golden_nu_pdf).collect();
        let gamma = (3.0 * PI).sqrt();
        NuMeasure::assemble(head, gamma, 1.0, 1.0 / (2.0 * PI), TailForm::Golden, mode)
            .expect("golden law is valid")
    }

    /// Build ν from disk functions: `nu(k) = gamma^{2k} qhat_{k+1}` for
    /// `k >= 0` and `nu(k) = 2 gamma^{2k} F^{(-k-1)}` for `k < 0`.
    pub fn from_disk_functions(
        q: &WeightTriple,
        f: &DiskFunctions,
        gamma: f64,
        k_head: i64,
        mode: TailCdfMode,
    ) -> Result<Self, ModelError> {
        assert!(gamma > 0.0 && k_head >= 16);
        let lng = gamma.ln();
        let mut head = vec![0.0; (2 * k_head + 1) as usize];
        for k in -k_head..=k_head {
            let v = if k >= 0 {
                let kk = k as usize + 1;
                let loops = if q.loopless() {
                    0.0
                } else {
                    q.n * ((2 * kk) as f64 * q.g.ln() + f.eval_ln(kk)).exp()
                };
                (2.0 * k as f64 * lng).exp() * (q.q_at(kk) + loops)
            } else {
                2.0 * (2.0 * k as f64 * lng + f.eval_ln((-k - 1) as usize)).exp()
            };
            head[(k + k_head) as usize] = v;
        }
        let theta = f.alpha - 0.5;
        // fit nu(-k) k^{theta+1} = cm (1 + am/k) on the last decade of the head
        let fit = |vals: &dyn Fn(i64) -> f64| -> (f64, f64) {
            let k1 = k_head / 2;
            let (mut sx, mut sy, mut sxx, mut sxy, mut nn) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let step = (k1 / 64).max(1);
            let mut k = k1;
            while k <= k_head {
                let y = vals(k) * (k as f64).powf(theta + 1.0);
                let x = 1.0 / k as f64;
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                nn += 1.0;
                k += step;
            }
            let det = nn * sxx - sx * sx;
            if det.abs() < 1e-300 {
                (sy / nn, 0.0)
            } else {
                let b = (nn * sxy - sx * sy) / det;
                let a = (sy - b * sx) / nn;
                (a, if a.abs() > 1e-300 { b / a } else { 0.0 })
            }
        };
        let hh = head.clone();
        let (cm, am) = fit(&|k: i64| hh[(k_head - k) as usize]);
        let geo = if q.loopless() {
            0.0
        } else {
            (q.g * gamma * gamma).powi(2)
        };
        let (cp, ap) = if geo > 0.0 {
            let hh2 = head.clone();
            let f2 = move |k: i64| hh2[(k_head + k) as usize] / geo.powi(k as i32);
            fit(&f2)
        } else {
            (0.0, 0.0)
        };
        let tail = if cm > 0.0 || (geo > 0.0 && cp > 0.0) {
            TailForm::Power { theta, cm: cm.max(0.0), am, cp: cp.max(0.0), ap, geo }
        } else {
            TailForm::None
        };
        let nu = NuMeasure::assemble(head, gamma, theta, cm.max(0.0), tail, mode)?;
        let dev = (nu.total_mass() - 1.0).abs();
        if dev > 2e-6 {
            return Err(ModelError::MassDeviation(dev));
        }
        Ok(nu)
    }

    /// CSV rows `k, nu_k, cumulative` over the stored head.
    pub fn export_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "k,nu_k,cumulative")?;
        let mut cum = self.tail_mass_neg;
        for k in -self.k_head..=self.k_head {
            let p = self.pdf(k);
            cum += p;
            writeln!(w, "{},{:.17e},{:.17e}", k, p, cum)?;
        }
        Ok(())
    }
}

/// The admissible triple whose pointed-map perimeter process couples to the
/// simple random walk on the square lattice:
/// `q_k = (nu(-1)/2)^{k-1} (nu(k-1) - nu(-k-1))`, `g = 1/(3 pi)`, `n = 2`,
/// with ν the golden law.
///
/// The support is truncated at d = 300, just before `q_k` leaves the f64
/// range. The spectral-solver coefficients are
/// `q_k gamma^{2k} = 3 pi (nu(k-1) - nu(-k-1)) ~ k^{-3}`, so the truncation
/// error of the solved density is of order `d^{-2} ~ 1e-6`.
pub fn q_from_golden() -> WeightTriple {
    let mut q = Vec::new();
    let half_nu1 = 1.0 / (3.0 * PI); // nu(-1)/2
    for k in 1..=300usize {
        // compute in log space: (3pi)^{1-k} underflows past k ~ 300
        let dnu = golden_nu_pdf(k as i64 - 1) - golden_nu_pdf(-(k as i64) - 1);
        let v = ((k as f64 - 1.0) * half_nu1.ln() + dnu.ln()).exp();
        q.push(v.max(0.0));
    }
    WeightTriple { q, g: 1.0 / (3.0 * PI), n: 2.0 }
}

/// Named presets of the model configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "golden")]
    Golden,
    #[serde(rename = "quad-critical")]
    QuadCritical,
    #[serde(rename = "none")]
    None,
}

/// On-disk model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub n: f64,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default = "default_tail_mode")]
    pub nu_tail_mode: TailCdfMode,
}

fn default_preset() -> Preset {
    Preset::None
}

fn default_tail_mode() -> TailCdfMode {
    TailCdfMode::ExactLazy
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    /// Resolve to a weight triple; presets override explicit values.
    pub fn triple(&self) -> Result<WeightTriple, ModelError> {
        match self.preset {
            Preset::Golden => Ok(q_from_golden()),
            Preset::QuadCritical => WeightTriple::new(vec![0.0, 1.0 / 12.0], 0.0, 0.0),
            Preset::None => WeightTriple::new(self.q.clone(), self.g, self.n),
        }
    }
}
