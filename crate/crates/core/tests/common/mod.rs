//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerics.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

// ---------------------------------------------------------------- quadrature

/// Tanh-sinh quadrature of `f` over `[lo, hi]`. The integrand receives
/// `(x, x - lo, hi - x)` so that endpoint distances keep full precision.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, lo: f64, hi: f64, level: u32) -> f64 {
    let h = 1.0 / f64::from(1u32 << level);
    let half = 0.5 * (hi - lo);
    let mut sum = 0.0;
    let mut j: i64 = 0;
    loop {
        let t = j as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let cosh_u = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cosh_u * cosh_u);
        // distance of the node from each end, in units of the half-width
        let e = 1.0 / (1.0 + (2.0 * u).exp());
        let near = 2.0 * e;
        let far = 2.0 - near;
        let mut term = 0.0;
        for (side, (dl, dr)) in [(far, near), (near, far)].into_iter().enumerate() {
            if j == 0 && side == 1 {
                continue;
            }
            let a = dl * half;
            let b = dr * half;
            if a > 0.0 && b > 0.0 {
                term += f(lo + a, a, b);
            }
        }
        sum += w * term;
        if near * half == 0.0 || t > 6.5 {
            break;
        }
        j += 1;
    }
    sum * h * half
}

/// Composite Gauss-free midpoint rule on `n` cells; used only for smooth integrands.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

// ------------------------------------------------------------- beta kernels

fn log_kernel(a: f64, b: f64, left: f64, right: f64) -> f64 {
    (a - 1.0) * left.ln() + (b - 1.0) * right.ln()
}

/// Split points inside (0, 1) where the beta kernel is best resolved.
fn beta_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    if a > 1.0 && b > 1.0 {
        let mode = (a - 1.0) / (a + b - 2.0);
        let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
        for c in [mode - 4.0 * sd, mode, mode + 4.0 * sd] {
            if c > 1e-6 && c < 1.0 - 1e-6 {
                v.push(c);
            }
        }
    }
    v.push(1.0);
    v
}

fn integrate_pieces<F: Fn(f64, f64, f64) -> f64 + Copy>(f: F, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            tanh_sinh(move |x, dl, dr| f(x, if lo == 0.0 { dl } else { x }, if hi == 1.0 { dr } else { 1.0 - x }), lo, hi, 7)
        })
        .sum()
}

/// `ln B(a, b)` by quadrature of the kernel.
pub fn ln_beta_quad(a: f64, b: f64) -> f64 {
    let mode_log = peak_log(a, b);
    let z = integrate_pieces(move |_, l, r| (log_kernel(a, b, l, r) - mode_log).exp(), &beta_breaks(a, b));
    z.ln() + mode_log
}

fn peak_log(a: f64, b: f64) -> f64 {
    if a > 1.0 && b > 1.0 {
        let mode = (a - 1.0) / (a + b - 2.0);
        log_kernel(a, b, mode, 1.0 - mode)
    } else {
        0.0
    }
}

/// `P(X > x0)` for `X ~ Beta(a, b)` as a ratio of two quadratures.
pub fn beta_tail_quad(a: f64, b: f64, x0: f64) -> f64 {
    if x0 <= 0.0 {
        return 1.0;
    }
    if x0 >= 1.0 {
        return 0.0;
    }
    let c = peak_log(a, b);
    let f = move |_: f64, l: f64, r: f64| (log_kernel(a, b, l, r) - c).exp();
    let mut breaks = beta_breaks(a, b);
    breaks.push(x0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut left = 0.0;
    let mut right = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let part = tanh_sinh(
            move |x, dl, dr| f(x, if lo == 0.0 { dl } else { x }, if hi == 1.0 { dr } else { 1.0 - x }),
            lo,
            hi,
            7,
        );
        if hi <= x0 {
            left += part;
        } else {
            right += part;
        }
    }
    right / (left + right)
}

/// Jensen-Shannon divergence (base 2) of two beta densities by quadrature.
pub fn jsd_quad(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let z1 = ln_beta_quad(a1, b1);
    let z2 = ln_beta_quad(a2, b2);
    let integrand = move |_: f64, l: f64, r: f64| {
        let lp = log_kernel(a1, b1, l, r) - z1;
        let lq = log_kernel(a2, b2, l, r) - z2;
        let hi = lp.max(lq);
        let lm = hi + ((lp - hi).exp() + (lq - hi).exp()).ln() - std::f64::consts::LN_2;
        let mut v = 0.0;
        if lp > -745.0 {
            v += 0.5 * lp.exp() * (lp - lm);
        }
        if lq > -745.0 {
            v += 0.5 * lq.exp() * (lq - lm);
        }
        v
    };
    let mut breaks = beta_breaks(a1, b1);
    breaks.extend(beta_breaks(a2, b2));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate_pieces(integrand, &breaks) / std::f64::consts::LN_2
}

// ------------------------------------------------------------ exact rationals

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn binomial_coeff(n: u32, k: u32) -> BigInt {
    let mut c = BigInt::one();
    for j in 0..k {
        c = c * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    c
}

fn pow(x: &BigRational, e: u32) -> BigRational {
    let mut r = BigRational::one();
    for _ in 0..e {
        r *= x;
    }
    r
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

/// Exact `P(X > x0)` for integer shapes: `P(Bin(a + b - 1, x0) < a)`.
pub fn beta_tail_rational(a: u32, b: u32, x0: &BigRational) -> BigRational {
    let m = a + b - 1;
    let one_minus = BigRational::one() - x0;
    let mut s = BigRational::zero();
    for j in 0..a {
        s += BigRational::from_integer(binomial_coeff(m, j)) * pow(x0, j) * pow(&one_minus, m - j);
    }
    s
}

fn rising(x: &BigRational, count: u32) -> BigRational {
    let mut r = BigRational::one();
    for j in 0..count {
        r *= x + BigRational::from_integer(BigInt::from(j));
    }
    r
}

/// Exact beta-binomial mass for the binary values of `a` and `b`.
pub fn beta_binom_rational(m: u32, x: u32, a: f64, b: f64) -> BigRational {
    let (a, b) = (rational(a), rational(b));
    let ab = &a + &b;
    BigRational::from_integer(binomial_coeff(m, x)) * rising(&a, x) * rising(&b, m - x) / rising(&ab, m)
}

pub fn binom_pmf_rational(n: u32, r: u32, p: &BigRational) -> BigRational {
    BigRational::from_integer(binomial_coeff(n, r)) * pow(p, r) * pow(&(BigRational::one() - p), n - r)
}

/// Beta-binomial mass by products, adequate for small `m`.
pub fn beta_binom_small(m: u32, x: u32, a: f64, b: f64) -> f64 {
    let mut v = 1.0;
    for j in 0..x {
        v *= (a + j as f64) * f64::from(m - j) / f64::from(j + 1);
    }
    for j in 0..(m - x) {
        v *= b + j as f64;
    }
    for j in 0..m {
        v /= a + b + j as f64;
    }
    v
}

pub fn binom_small(n: u32, r: u32, p: f64) -> f64 {
    let mut c = 1.0;
    for j in 0..r {
        c = c * f64::from(n - j) / f64::from(j + 1);
    }
    c * p.powi(r as i32) * (1.0 - p).powi((n - r) as i32)
}

// ------------------------------------------------------- brute-force engine

#[derive(Clone, Copy, Debug)]
pub enum RefWeights {
    Cpp(f64, f64),
    Jsd(f64, f64),
    Zero,
}

#[derive(Clone, Copy, Debug)]
pub enum RefInterim {
    Posterior(f64, f64),
    PostPred(f64, f64),
}

#[derive(Clone, Debug)]
pub struct RefDesign {
    pub s1: f64,
    pub s2: f64,
    pub p0: f64,
    pub n: u32,
    pub n1: Option<u32>,
    pub lambda: f64,
    pub weights: RefWeights,
    pub share_prior: bool,
    pub interim: Option<RefInterim>,
}

#[derive(Clone, Debug, Default)]
pub struct RefOc {
    pub reject: Vec<f64>,
    pub fwer: f64,
    pub family_power: f64,
    pub ecd: f64,
    pub ess: Vec<f64>,
    pub mean: Vec<f64>,
    pub mse: Vec<f64>,
    pub mass: f64,
}

/// Brute-force evaluator: visits every outcome vector, recomputes every
/// weight and tail from scratch with the quadrature oracles.
pub struct RefEngine {
    d: RefDesign,
    weight_cache: std::cell::RefCell<HashMap<(u32, u32, u32, u32), f64>>,
    tail_cache: std::cell::RefCell<HashMap<(u64, u64), f64>>,
}

impl RefEngine {
    pub fn new(d: RefDesign) -> Self {
        Self {
            d,
            weight_cache: Default::default(),
            tail_cache: Default::default(),
        }
    }

    fn tail(&self, a: f64, b: f64) -> f64 {
        let key = (a.to_bits(), b.to_bits());
        if let Some(&v) = self.tail_cache.borrow().get(&key) {
            return v;
        }
        let v = beta_tail_quad(a, b, self.d.p0);
        self.tail_cache.borrow_mut().insert(key, v);
        v
    }

    fn weight(&self, (nk, rk): (u32, u32), (ni, ri): (u32, u32)) -> f64 {
        let key = (nk, rk, ni, ri);
        if let Some(&v) = self.weight_cache.borrow().get(&key) {
            return v;
        }
        let v = match self.d.weights {
            RefWeights::Zero => 0.0,
            RefWeights::Cpp(a, b) => {
                let diff = (rk as f64 / nk as f64 - ri as f64 / ni as f64).abs();
                if diff == 0.0 {
                    1.0
                } else {
                    let nmax = nk.max(ni) as f64;
                    1.0 / (1.0 + (a + b * (diff * nmax.powf(0.25)).ln()).exp())
                }
            }
            RefWeights::Jsd(eps, tau) => {
                let (a1, b1) = (self.d.s1 + rk as f64, self.d.s2 + (nk - rk) as f64);
                let (a2, b2) = (self.d.s1 + ri as f64, self.d.s2 + (ni - ri) as f64);
                let w = if (a1, b1) == (a2, b2) {
                    1.0
                } else {
                    (1.0 - jsd_quad(a1, b1, a2, b2)).clamp(0.0, 1.0).powf(eps)
                };
                if w > tau {
                    w
                } else {
                    0.0
                }
            }
        };
        self.weight_cache.borrow_mut().insert(key, v);
        v
    }

    fn shape(&self, obs: &[(u32, u32)], k: usize) -> (f64, f64) {
        let (s1, s2) = (self.d.s1, self.d.s2);
        let mut a = if self.d.share_prior { 0.0 } else { s1 };
        let mut b = if self.d.share_prior { 0.0 } else { s2 };
        for (i, &(n, r)) in obs.iter().enumerate() {
            let w = if i == k { 1.0 } else { self.weight(obs[k], (n, r)) };
            let (pa, pb) = if self.d.share_prior { (s1, s2) } else { (0.0, 0.0) };
            a += w * (pa + r as f64);
            b += w * (pb + (n - r) as f64);
        }
        (a, b)
    }

    fn ppp(&self, obs1: &[(u32, u32)], k: usize) -> f64 {
        let (n1, r1) = obs1[k];
        let m = self.d.n - n1;
        let (a, b) = self.shape(obs1, k);
        (0..=m)
            .filter(|&x| {
                let r = r1 + x;
                self.tail(self.d.s1 + r as f64, self.d.s2 + (self.d.n - r) as f64) >= self.d.lambda
            })
            .map(|x| beta_binom_small(m, x, a, b))
            .sum()
    }

    pub fn oc(&self, p: &[f64]) -> RefOc {
        let k = p.len();
        let mut out = RefOc {
            reject: vec![0.0; k],
            ess: vec![0.0; k],
            mean: vec![0.0; k],
            mse: vec![0.0; k],
            ..Default::default()
        };
        let n = self.d.n;
        let stage1 = self.d.n1.unwrap_or(n);
        for r1 in vectors(k, stage1) {
            let p1: f64 = r1.iter().zip(p).map(|(&r, &q)| binom_small(stage1, r, q)).product();
            if p1 == 0.0 {
                continue;
            }
            let obs1: Vec<(u32, u32)> = r1.iter().map(|&r| (stage1, r)).collect();
            // 0 = continue, 1 = futility, 2 = efficacy
            let action: Vec<u8> = match (self.d.n1, self.d.interim) {
                (Some(_), Some(rule)) => (0..k)
                    .map(|i| {
                        let (score, fut, eff) = match rule {
                            RefInterim::Posterior(fut, eff) => {
                                let (a, b) = self.shape(&obs1, i);
                                (self.tail(a, b), fut, eff)
                            }
                            RefInterim::PostPred(fut, eff) => (self.ppp(&obs1, i), fut, eff),
                        };
                        if score < fut {
                            1
                        } else if score > eff {
                            2
                        } else {
                            0
                        }
                    })
                    .collect(),
                _ => vec![0; k],
            };
            let cont: Vec<usize> = (0..k).filter(|&i| action[i] == 0 && self.d.n1.is_some()).collect();
            let m = n - stage1;
            for i in 0..k {
                out.ess[i] += p1 * if cont.contains(&i) { n as f64 } else { stage1 as f64 };
            }
            for x in vectors(cont.len(), m) {
                let p2: f64 = x
                    .iter()
                    .zip(&cont)
                    .map(|(&xi, &i)| binom_small(m, xi, p[i]))
                    .product();
                let prob = p1 * p2;
                let mut obs = obs1.clone();
                for (&xi, &i) in x.iter().zip(&cont) {
                    obs[i] = (n, r1[i] + xi);
                }
                let mut null_rej = false;
                let mut alt_rej = false;
                for i in 0..k {
                    let (a, b) = self.shape(&obs, i);
                    let rej = match action[i] {
                        1 => false,
                        2 => true,
                        _ => self.tail(a, b) >= self.d.lambda,
                    };
                    let is_null = p[i] <= self.d.p0;
                    if rej {
                        out.reject[i] += prob;
                        if is_null {
                            null_rej = true;
                        } else {
                            alt_rej = true;
                        }
                    }
                    let mean = a / (a + b);
                    out.mean[i] += prob * mean;
                    out.mse[i] += prob * (mean - p[i]) * (mean - p[i]);
                }
                if null_rej {
                    out.fwer += prob;
                }
                if alt_rej {
                    out.family_power += prob;
                }
                out.mass += prob;
            }
        }
        out.ecd = (0..k)
            .map(|i| if p[i] <= self.d.p0 { 1.0 - out.reject[i] } else { out.reject[i] })
            .sum();
        out
    }
}

/// All vectors of `{0..=m}^k` in lexicographic order.
pub fn vectors(k: usize, m: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=m).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Smallest `r` whose unshared posterior tail reaches `lambda`, or `n + 1`.
pub fn critical_value(s1: u32, s2: u32, n: u32, p0: &BigRational, lambda: f64) -> u32 {
    (0..=n)
        .find(|&r| to_f64(&beta_tail_rational(s1 + r, s2 + n - r, p0)) >= lambda)
        .unwrap_or(n + 1)
}

/// `P(Bin(n, p) >= c)` exactly.
pub fn binom_upper_rational(n: u32, c: u32, p: &BigRational) -> BigRational {
    (c..=n).map(|r| binom_pmf_rational(n, r, p)).fold(BigRational::zero(), |s, x| s + x)
}
