//! Beta, binomial and beta-binomial kernels plus the Jensen-Shannon
//! divergence between two beta densities.
//!
//! Probability masses are assembled in log space so that products over five
//! baskets at n = 20 never underflow.

use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate_adaptive;

/// ln(sqrt(2 pi))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Shapes of a beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return invalid(
                "beta parameters",
                format!("shapes must be positive and finite, got ({alpha}, {beta})"),
            );
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Log density at `x` in (0, 1).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - ln_beta(self.alpha, self.beta)
    }
}

/// A probability in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return invalid("probability", format!("{value} is outside [0, 1]"));
        }
        Ok(Self(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Stirling-series remainder `ln Gamma(x) - [(x - 1/2) ln x - x + ln sqrt(2 pi)]`, for x >= 10.
fn lgamma_correction(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + lgamma_correction(x);
    }
    if x < 0.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// ln B(a, b) without the cancellation of three separate log-gamma calls
/// when either argument is large.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let sum = p + q;
    if p >= 10.0 {
        let corr = lgamma_correction(p) + lgamma_correction(q) - lgamma_correction(sum);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / sum).ln() + q * (-p / sum).ln_1p()
    } else if q >= 10.0 {
        let corr = lgamma_correction(q) - lgamma_correction(sum);
        ln_gamma(p) + corr + p - p * sum.ln() + (q - 0.5) * (-p / sum).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(sum)
    }
}

/// Checked ln B(a, b).
pub fn log_beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("ln B({a}, {b}) needs positive arguments")));
    }
    Ok(ln_beta(a, b))
}

/// ln C(n, r) for r <= n.
pub fn ln_choose(n: u32, r: u32) -> f64 {
    debug_assert!(r <= n);
    if r == 0 || r == n {
        return 0.0;
    }
    -((n as f64) + 1.0).ln() - ln_beta((n - r) as f64 + 1.0, r as f64 + 1.0)
}

/// Binomial mass C(n, r) p^r (1 - p)^(n - r), with 0^0 = 1.
pub fn binom_pmf(n: u32, r: u32, p: f64) -> Result<f64> {
    if r > n {
        return Err(Error::Domain(format!("binomial mass needs r <= n, got r = {r}, n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binomial mass needs p in [0, 1], got {p}")));
    }
    Ok(binom_pmf_unchecked(n, r, p))
}

pub(crate) fn binom_pmf_unchecked(n: u32, r: u32, p: f64) -> f64 {
    if p == 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if r == n { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(n, r) + r as f64 * p.ln() + (n - r) as f64 * (-p).ln_1p();
    ln.exp()
}

const CF_MAX_ITER: usize = 20_000;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    h
}

/// Returns `(I_x(a, b), 1 - I_x(a, b))`, each evaluated on the side where it
/// is the directly computed quantity.
fn incomplete_beta_pair(a: f64, b: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = front * beta_cf(a, b, x) / a;
        (lower, 1.0 - lower)
    } else {
        let upper = front * beta_cf(b, a, 1.0 - x) / b;
        (1.0 - upper, upper)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(params: BetaParams, x: f64) -> f64 {
    incomplete_beta_pair(params.alpha, params.beta, x).0
}

/// Upper tail `P(p > p0)` of a beta distribution.
pub fn beta_tail(params: BetaParams, p0: f64) -> f64 {
    beta_tail_raw(params.alpha, params.beta, p0)
}

#[inline]
pub(crate) fn beta_tail_raw(alpha: f64, beta: f64, p0: f64) -> f64 {
    incomplete_beta_pair(alpha, beta, p0).1.clamp(0.0, 1.0)
}

/// Beta-binomial mass C(m, x) B(alpha + x, beta + m - x) / B(alpha, beta).
pub fn beta_binom_pmf(m: u32, x: u32, params: BetaParams) -> Result<f64> {
    if x > m {
        return Err(Error::Domain(format!(
            "beta-binomial mass needs x <= m, got x = {x}, m = {m}"
        )));
    }
    Ok(beta_binom_pmf_raw(m, x, params.alpha, params.beta))
}

#[inline]
pub(crate) fn beta_binom_pmf_raw(m: u32, x: u32, alpha: f64, beta: f64) -> f64 {
    let ln = ln_choose(m, x) + ln_beta(alpha + x as f64, beta + (m - x) as f64) - ln_beta(alpha, beta);
    ln.exp()
}

/// Tolerance targeted by [`jsd_beta`].
pub const JSD_TOLERANCE: f64 = 1e-10;

/// Jensen-Shannon divergence in bits between two beta densities.
///
/// Both halves of the divergence are integrated together against the equal
/// mixture. When a shape is below one the density is singular at that
/// endpoint, and each half of (0, 1) is integrated after the substitution
/// x = t^s (or 1 - x = t^s) that flattens the singularity.
pub fn jsd_beta(p: BetaParams, q: BetaParams) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    let lbp = ln_beta(p.alpha, p.beta);
    let lbq = ln_beta(q.alpha, q.beta);
    // Takes x and 1 - x separately so both tails keep full precision.
    let integrand = |x: f64, y: f64| -> f64 {
        if !(x > 0.0 && y > 0.0) {
            return 0.0;
        }
        let lx = x.ln();
        let l1x = y.ln();
        let lp = (p.alpha - 1.0) * lx + (p.beta - 1.0) * l1x - lbp;
        let lq = (q.alpha - 1.0) * lx + (q.beta - 1.0) * l1x - lbq;
        let (hi, lo) = if lp >= lq { (lp, lq) } else { (lq, lp) };
        let lm = hi + (lo - hi).exp().ln_1p() - LN_2;
        let mut v = 0.0;
        let dp = lp.exp();
        if dp > 0.0 {
            v += dp * (lp - lm);
        }
        let dq = lq.exp();
        if dq > 0.0 {
            v += dq * (lq - lm);
        }
        v
    };

    let left_power = substitution_power(p.alpha.min(q.alpha));
    let right_power = substitution_power(p.beta.min(q.beta));
    let tol = JSD_TOLERANCE * LN_2;

    let left = {
        let s = left_power;
        let f = |t: f64| {
            let x = t.powf(s);
            integrand(x, 1.0 - x) * s * t.powf(s - 1.0)
        };
        integrate_adaptive(&f, 0.0, 0.5_f64.powf(1.0 / s), 0.5 * tol)?
    };
    let right = {
        let s = right_power;
        let f = |t: f64| {
            let y = t.powf(s);
            integrand(1.0 - y, y) * s * t.powf(s - 1.0)
        };
        integrate_adaptive(&f, 0.0, 0.5_f64.powf(1.0 / s), 0.5 * tol)?
    };
    let jsd = 0.5 * (left + right) / LN_2;
    Ok(jsd.clamp(0.0, 1.0))
}

fn substitution_power(min_shape: f64) -> f64 {
    if min_shape >= 1.0 {
        1.0
    } else {
        (2.0 / min_shape).ceil()
    }
}
