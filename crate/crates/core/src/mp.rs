//! Multiprecision helpers on top of MPFR/MPC: constants, the complex
//! log-gamma function and small conversions used across the crate.

use std::sync::{Mutex, OnceLock};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};

/// log2(10).
pub const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Mantissa bits needed to carry `digits` decimal digits, plus a small guard.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + 8
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn two_pi(prec: u32) -> Float {
    pi(prec) * 2u32
}

pub fn float(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

/// `|z|` as an `f64`, saturating instead of overflowing.
pub fn abs_f64(z: &Complex) -> f64 {
    Float::with_val(53, z.abs_ref()).to_f64()
}

/// `log2 |z|`, usable far outside the `f64` exponent range.
pub fn log2_abs(z: &Complex) -> f64 {
    let a = Float::with_val(64, z.abs_ref());
    if a.is_zero() {
        return f64::NEG_INFINITY;
    }
    let e = a.get_exp().unwrap_or(0) as f64;
    let m = Float::with_val(64, &a >> a.get_exp().unwrap_or(0)).to_f64();
    e + m.log2()
}

/// Bernoulli numbers `B_0, B_2, B_4, ...` (even index only), cached.
fn bernoulli_even(count: usize) -> Vec<Rational> {
    static CACHE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut all = cache.lock().unwrap();
    if all.len() < count {
        // Full table B_0..B_{2count} from Σ_{j<m+1} C(m+1, j) B_j = 0.
        let n = 2 * count;
        let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
        b.push(Rational::from(1));
        for m in 1..=n {
            if m > 1 && m % 2 == 1 {
                b.push(Rational::new());
                continue;
            }
            let mut acc = Rational::new();
            let mut binom = Integer::from(1);
            for (j, bj) in b.iter().enumerate() {
                // binom = C(m+1, j)
                if !bj.is_zero() {
                    acc += Rational::from(&binom * bj.numer()) / bj.denom();
                }
                binom *= (m + 1 - j) as u32;
                binom /= (j + 1) as u32;
            }
            b.push(-acc / Rational::from(m as u32 + 1));
        }
        *all = (0..=count).map(|k| b[2 * k].clone()).collect();
    }
    all[..count].to_vec()
}

/// Principal-branch `ln Γ(z)` for `Re z > 0`.
///
/// Shifts `z` to the right until the Stirling series is accurate to the
/// requested precision, then undoes the shift with a product whose argument
/// is tracked in double precision to pick the branch.
pub fn ln_gamma(z: &Complex) -> Complex {
    let prec = z.prec().0.max(z.prec().1);
    let work = prec + 24;
    let target = (work as f64 / 4.0).max(12.0);
    let re = z.real().to_f64();
    assert!(re > 0.0 || !z.imag().is_zero(), "ln_gamma needs Re z > 0");
    let shift = if re < target { (target - re).ceil() as u32 } else { 0 };

    let z0 = Complex::with_val(work, z);
    let mut zs = z0.clone();
    let mut prod = Complex::with_val(work, (1, 0));
    let mut arg_sum = 0.0f64;
    for _ in 0..shift {
        arg_sum += zs.imag().to_f64().atan2(zs.real().to_f64());
        prod *= &zs;
        zs += 1u32;
    }

    // Stirling at zs.
    let ln_z = Complex::with_val(work, zs.ln_ref());
    let half = Float::with_val(work, 0.5);
    let mut res = Complex::with_val(work, &zs - &half) * &ln_z;
    res -= &zs;
    let ln2pi = Float::with_val(work, two_pi(work).ln_ref());
    res += Float::with_val(work, &ln2pi / 2u32);

    let inv = Complex::with_val(work, zs.recip_ref());
    let inv2 = Complex::with_val(work, inv.square_ref());
    let mut pw = inv; // z^{-(2k-1)}
    let eps_log2 = -(work as f64) - 4.0;
    let mut count = 16usize;
    let mut bern = bernoulli_even(count + 1);
    let mut k = 1usize;
    let mut last = f64::INFINITY;
    loop {
        if k > count {
            count *= 2;
            bern = bernoulli_even(count + 1);
        }
        let coef = Float::with_val(work, &bern[k]) / ((2 * k * (2 * k - 1)) as u32);
        let term = Complex::with_val(work, &pw * &coef);
        let size = log2_abs(&term);
        res += &term;
        if size < eps_log2 + log2_abs(&res).max(0.0) || size > last {
            break;
        }
        last = size;
        pw *= &inv2;
        k += 1;
    }

    if shift > 0 {
        let mut lp = Complex::with_val(work, prod.ln_ref());
        let principal = lp.imag().to_f64();
        let turns = ((arg_sum - principal) / std::f64::consts::TAU).round();
        if turns != 0.0 {
            *lp.mut_imag() += two_pi(work) * turns;
        }
        res -= lp;
    }
    Complex::with_val(prec, res)
}

/// `Γ(z)` for `Re z > 0`.
pub fn gamma(z: &Complex) -> Complex {
    ln_gamma(z).exp()
}

/// `x^{-w}` for real `x > 0`.
pub fn pow_neg(x: &Float, w: &Complex) -> Complex {
    let prec = w.prec().0;
    let lx = Float::with_val(prec, x.ln_ref());
    let mut e = Complex::with_val(prec, w * lx);
    e = -e;
    e.exp()
}

/// `exp(-x)` at the precision of `x`.
pub fn exp_neg(x: &Float) -> Float {
    let mut e = Float::with_val(x.prec(), -x);
    e.exp_mut();
    e
}

/// `base^k` for a non-negative integer exponent.
pub fn powi(base: &Float, k: u32) -> Float {
    Float::with_val(base.prec(), base.pow(k))
}

/// Rounds to `digits` significant decimal digits, scientific notation.
pub fn to_sig_string(x: &Float, digits: usize) -> String {
    x.to_string_radix(10, Some(digits.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_small() {
        let b = bernoulli_even(6);
        assert_eq!(b[0], Rational::from(1));
        assert_eq!(b[1], Rational::from((1, 6)));
        assert_eq!(b[2], Rational::from((-1, 30)));
        assert_eq!(b[3], Rational::from((1, 42)));
        assert_eq!(b[5], Rational::from((5, 66)));
    }

    #[test]
    fn ln_gamma_real_matches_mpfr() {
        for &(x, prec) in &[(0.5, 200u32), (1.25, 100), (7.0, 300), (30.5, 120), (0.01, 150)] {
            let z = Complex::with_val(prec, (x, 0));
            let g = gamma(&z);
            let want = Float::with_val(prec, x).gamma();
            let rel = (Float::with_val(prec, g.real() - &want) / &want).abs().to_f64();
            assert!(rel < 2f64.powi(-(prec as i32) + 8), "x={x} rel={rel:e}");
            assert!(g.imag().to_f64().abs() < 1e-30);
        }
    }

    #[test]
    fn gamma_recurrence_complex() {
        let prec = 256;
        let z = Complex::with_val(prec, (0.5, 0.75));
        let g0 = gamma(&z);
        let z1 = Complex::with_val(prec, &z + 1u32);
        let g1 = gamma(&z1);
        let diff = Complex::with_val(prec, &g1 - &g0 * &z);
        assert!(abs_f64(&diff) / abs_f64(&g1) < 1e-70);
    }

    #[test]
    fn reflection_on_critical_line() {
        // |Γ(1/2 + it)|² = π / cosh(πt)
        let prec = 200;
        let t = 0.8;
        let g = gamma(&Complex::with_val(prec, (0.5, t)));
        let lhs = Float::with_val(prec, g.abs_ref()).square();
        let pt = Float::with_val(prec, pi(prec) * t);
        let rhs = pi(prec) / pt.cosh();
        let rel = (Float::with_val(prec, &lhs - &rhs) / &rhs).abs().to_f64();
        assert!(rel < 1e-55, "{rel:e}");
    }

    #[test]
    fn ln_gamma_branch_is_continuous() {
        // arg Γ(1/2 + it) for small t is close to t·ψ(1/2) ≈ -1.9635 t
        let prec = 120;
        for &t in &[-1.0f64, -0.3, 0.0, 0.4, 1.0] {
            let lg = ln_gamma(&Complex::with_val(prec, (0.5, t)));
            let im = lg.imag().to_f64();
            assert!(im.abs() < 2.5 * t.abs() + 1e-20, "t={t} im={im}");
            assert!(im * t <= 0.0);
        }
    }
}
