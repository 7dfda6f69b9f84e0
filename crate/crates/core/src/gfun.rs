//! The kernel `G(s, x) = x^{-s} Γ(s, x) = ∫_1^∞ exp(-xy) y^s dy/y`.
//!
//! Two classical expansions cover `x > 0`:
//!
//! * `x ≥ Re(s) + 1`: Legendre's continued fraction for `Γ(s, x)`, which gives
//!   `G(s, x) = e^{-x} / (x + 1 - s - 1(1-s)/(x + 3 - s - 2(2-s)/(x + 5 - s - ...)))`;
//! * otherwise `G(s, x) = x^{-s} Γ(s) - e^{-x} Σ_k x^k / (s)_{k+1}`, whose terms
//!   are all positive for real `s`.
//!
//! Derivatives in `x` follow from `d/dx G(s, x) = -G(s+1, x)` and
//! `G(s+1, x) = e^{-x}/x + (s/x) G(s, x)`.

use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::mp;

const MAX_ITER: usize = 2_000_000;

/// Requested and internal decimal precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Precision {
    /// Digits wanted in the final answer.
    pub digits: u32,
    /// Digits carried internally.
    pub work_digits: u32,
}

impl Precision {
    /// Guarded precision for conductor `cond`: `D + ceil(log10 cond) + 10`.
    pub fn for_conductor(digits: u32, cond: u64) -> Self {
        let guard = (cond.max(2) as f64).log10().ceil() as u32 + 10;
        Precision { digits, work_digits: digits + guard }
    }

    /// Explicit working precision, at least `digits + 10`.
    pub fn with_work_digits(digits: u32, work_digits: u32) -> Self {
        Precision { digits, work_digits: work_digits.max(digits + 10) }
    }

    pub fn bits(&self) -> u32 {
        mp::bits_for_digits(self.work_digits)
    }

    /// `10^{-work_digits + k}` as an `f64`-safe log2 threshold.
    fn log2_tolerance(&self, slack_digits: i32) -> f64 {
        (slack_digits - self.work_digits as i32) as f64 * mp::LOG2_10
    }
}

/// `G(s, x)` to within a few units in the last place of `p.bits()`.
pub fn g_base(s: &Complex, x: &Float, p: &Precision) -> Result<Complex> {
    g_base_bits(s, x, None, p.bits())
}

/// Same as [`g_base`], reusing a precomputed `Γ(s)` for the series branch.
pub fn g_base_with_gamma(s: &Complex, x: &Float, gamma_s: &Complex, p: &Precision) -> Result<Complex> {
    g_base_bits(s, x, Some(gamma_s), p.bits())
}

pub(crate) fn g_base_bits(s: &Complex, x: &Float, gamma_s: Option<&Complex>, bits: u32) -> Result<Complex> {
    if !x.is_finite() || *x <= 0 {
        return Err(Error::Domain(format!("G(s, x) needs x > 0, got {}", x.to_f64())));
    }
    if *s.real() <= 0 {
        return Err(Error::Domain(format!("G(s, x) needs Re(s) > 0, got {}", s.real().to_f64())));
    }
    let work = bits + 24;
    let re = s.real().to_f64();
    let xf = x.to_f64();
    let val = if xf >= re + 1.0 {
        continued_fraction(s, x, work)?
    } else {
        lower_series(s, x, gamma_s, work)?
    };
    Ok(Complex::with_val(bits, val))
}

/// Modified Lentz evaluation of the Legendre continued fraction.
fn continued_fraction(s: &Complex, x: &Float, work: u32) -> Result<Complex> {
    let x = Float::with_val(work, x);
    let s = Complex::with_val(work, s);
    let tiny = Float::with_val(work, Float::i_exp(1, -(work as i32) * 4));
    let eps = -(work as f64) + 2.0;

    // b_n = x + 2n + 1 - s, a_n = -n (n - s)
    let mut b = Complex::with_val(work, -&s);
    b += &x;
    b += 1u32;
    let mut f = b.clone();
    if f.is_zero() {
        f = Complex::with_val(work, (&tiny, 0));
    }
    let mut c = f.clone();
    let mut d = Complex::with_val(work, (0, 0));
    let mut a = Complex::with_val(work, (0, 0));
    for n in 1..MAX_ITER {
        b += 2u32;
        // a = -n (n - s) = n s - n²
        a.assign(&s * (n as u32));
        *a.mut_real() -= (n as f64) * (n as f64);
        // d = 1 / (b + a d)
        d *= &a;
        d += &b;
        if d.is_zero() {
            d = Complex::with_val(work, (&tiny, 0));
        }
        d.recip_mut();
        // c = b + a / c
        let mut t = Complex::with_val(work, &a / &c);
        t += &b;
        if t.is_zero() {
            t = Complex::with_val(work, (&tiny, 0));
        }
        c = t;
        let delta = Complex::with_val(work, &c * &d);
        f *= &delta;
        let dev = Complex::with_val(work, &delta - 1u32);
        if mp::log2_abs(&dev) < eps {
            let ex = mp::exp_neg(&x);
            return Ok(Complex::with_val(work, ex / f));
        }
    }
    Err(Error::Convergence { what: "incomplete gamma continued fraction".into(), iterations: MAX_ITER })
}

/// `x^{-s} Γ(s) - e^{-x} Σ_k x^k / (s)_{k+1}`.
fn lower_series(s: &Complex, x: &Float, gamma_s: Option<&Complex>, work: u32) -> Result<Complex> {
    let x = Float::with_val(work, x);
    let s = Complex::with_val(work, s);
    let mut term = Complex::with_val(work, s.recip_ref());
    let mut sum = term.clone();
    let eps = -(work as f64) - 2.0;
    let xf = x.to_f64();
    let mut denom = s.clone();
    for k in 1..MAX_ITER {
        denom += 1u32;
        term *= &x;
        term /= &denom;
        sum += &term;
        if (k as f64) > xf && mp::log2_abs(&term) < eps + mp::log2_abs(&sum) {
            let head = match gamma_s {
                Some(g) => Complex::with_val(work, g),
                None => mp::gamma(&s),
            };
            let mut out = mp::pow_neg(&x, &s) * head;
            let ex = mp::exp_neg(&x);
            out -= sum * ex;
            return Ok(out);
        }
    }
    Err(Error::Convergence { what: "incomplete gamma series".into(), iterations: MAX_ITER })
}

/// `G(s + k, x)` for `k = 0..=B`: `values[k] = (-1)^k G^{(k)}(s, x)`.
#[derive(Clone, Debug)]
pub struct GDerivs {
    pub s: Complex,
    pub x: Float,
    pub values: Vec<Complex>,
    /// How many times the forward recursion was restarted from a base value.
    pub restarts: usize,
}

impl GDerivs {
    /// `G^{(k)}(s, x)`.
    pub fn derivative(&self, k: usize) -> Complex {
        let v = self.values[k].clone();
        if k % 2 == 1 {
            -v
        } else {
            v
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Forward recursion `G(s+k+1, x) = e^{-x}/x + ((s+k)/x) G(s+k, x)`, with a
/// running relative-error estimate; when it exceeds `10^{-work+8}` the
/// current entry is recomputed from the base evaluation.
pub fn g_derivs(s: &Complex, x: &Float, b: usize, p: &Precision) -> Result<GDerivs> {
    g_derivs_from(s, x, None, b, p)
}

pub(crate) fn g_derivs_from(
    s: &Complex,
    x: &Float,
    gamma_s: Option<&Complex>,
    b: usize,
    p: &Precision,
) -> Result<GDerivs> {
    let bits = p.bits();
    let work = bits + 16;
    let first = g_base_bits(s, x, gamma_s, work)?;
    let xw = Float::with_val(work, x);
    let e_over_x = mp::exp_neg(&xw) / &xw;
    let unit = -(work as f64) + 2.0; // log2 of one rounding step, generously
    let limit = p.log2_tolerance(8);

    let mut values = Vec::with_capacity(b + 1);
    values.push(first);
    let mut log_err = unit; // log2 of the relative error bound of values[k]
    let mut restarts = 0;
    let mut sk = Complex::with_val(work, s);
    for k in 0..b {
        let prev = &values[k];
        let mut next = Complex::with_val(work, &sk * prev);
        next /= &xw;
        let growth = mp::log2_abs(&next);
        next += &e_over_x;
        // The error of prev is scaled by |(s+k)/x| |G(s+k)| / |G(s+k+1)|.
        let amplified = log_err + growth - mp::log2_abs(&next);
        log_err = log2_add(amplified, unit);
        sk += 1u32;
        if log_err > limit {
            next = g_base_bits(&sk, x, None, work)?;
            log_err = unit;
            restarts += 1;
        }
        values.push(next);
    }
    let values = values.into_iter().map(|v| Complex::with_val(bits, v)).collect();
    Ok(GDerivs { s: s.clone(), x: x.clone(), values, restarts })
}

fn log2_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp2() + (b - m).exp2()).log2()
}

/// Cauchy bound `exp(R - x) / ((x - R) R^k)` on `|G^{(k)}(s, x)| / k!`,
/// valid for `0 < Re(s) < 1` and `0 < R < x`.
pub fn deriv_bound(x: f64, r: f64, k: u32) -> Result<f64> {
    if !(r > 0.0 && r < x) {
        return Err(Error::Domain(format!("derivative bound needs 0 < R < x, got R={r}, x={x}")));
    }
    Ok((r - x).exp() / ((x - r) * r.powi(k as i32)))
}

/// `exp(-x) / x`, the bound on `|G(s, x)|` in the critical strip.
pub fn g_bound(x: f64) -> f64 {
    (-x).exp() / x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prec(d: u32) -> Precision {
        Precision::with_work_digits(d, d + 10)
    }

    fn c(p: u32, re: f64, im: f64) -> Complex {
        Complex::with_val(p, (re, im))
    }

    fn rel(a: &Complex, b: &Complex) -> f64 {
        let d = Complex::with_val(a.prec().0, a - b);
        (mp::log2_abs(&d) - mp::log2_abs(b)).exp2()
    }

    /// Composite Gauss–Legendre quadrature of ∫_1^∞ e^{-xy} y^{s-1} dy on a
    /// truncated, subdivided range; independent of both expansions.
    fn quad_oracle(s: (f64, f64), x: f64) -> (f64, f64) {
        let nodes = [
            (-0.9602898564975363, 0.1012285362903763),
            (-0.7966664774136267, 0.2223810344533745),
            (-0.525_532_409_916_329, 0.3137066458778873),
            (-0.1834346424956498, 0.362_683_783_378_362),
            (0.1834346424956498, 0.362_683_783_378_362),
            (0.525_532_409_916_329, 0.3137066458778873),
            (0.7966664774136267, 0.2223810344533745),
            (0.9602898564975363, 0.1012285362903763),
        ];
        // substitute y = 1 + u², dy = 2u du, smooth at u = 0
        let upper = ((60.0 / x) + 1.0).sqrt();
        let panels = 4000;
        let h = upper / panels as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for &(t, w) in &nodes {
                let u = mid + 0.5 * h * t;
                let y = 1.0 + u * u;
                let mag = (-x * y).exp() * y.powf(s.0 - 1.0) * 2.0 * u * w * 0.5 * h;
                let ph = s.1 * y.ln();
                re += mag * ph.cos();
                im += mag * ph.sin();
            }
        }
        (re, im)
    }

    #[test]
    fn closed_form_s_one() {
        let p = prec(30);
        let bits = p.bits();
        for &x in &[0.3, 1.0, 2.0, 7.5, 40.0] {
            let xf = Float::with_val(bits, x);
            let g = g_base(&c(bits, 1.0, 0.0), &xf, &p).unwrap();
            let want = mp::exp_neg(&xf) / &xf;
            let want = Complex::with_val(bits, (want, 0));
            assert!(rel(&g, &want) < 1e-36, "x={x}");
        }
        let x2 = Float::with_val(bits, 2);
        let g = g_base(&c(bits, 1.0, 0.0), &x2, &p).unwrap();
        assert!((g.real().to_f64() - 0.06766764161830635).abs() < 1e-16);
    }

    #[test]
    fn half_at_one_is_sqrt_pi_erfc() {
        let p = prec(40);
        let bits = p.bits();
        let g = g_base(&c(bits, 0.5, 0.0), &Float::with_val(bits, 1), &p).unwrap();
        let want = mp::pi(bits).sqrt() * Float::with_val(bits, 1).erfc();
        assert!((Float::with_val(bits, g.real() - &want)).abs().to_f64() < 1e-45);
        assert!((g.real().to_f64() - 0.2788055852806619).abs() < 1e-15);
        let (qr, _) = quad_oracle((0.5, 0.0), 1.0);
        assert!((g.real().to_f64() - qr).abs() < 1e-12);
    }

    #[test]
    fn quadrature_oracle_agreement_complex() {
        let p = prec(20);
        let bits = p.bits();
        for &(sr, si, x) in &[(0.3, 0.7, 5.0), (0.5, -1.0, 0.4), (0.5, 1.0, 1.49), (0.5, 1.0, 1.51), (0.75, 0.5, 12.0)] {
            let g = g_base(&c(bits, sr, si), &Float::with_val(bits, x), &p).unwrap();
            let (qr, qi) = quad_oracle((sr, si), x);
            let scale = g_bound(x);
            assert!((g.real().to_f64() - qr).abs() < 1e-11 * scale.max(1.0), "s=({sr},{si}) x={x}");
            assert!((g.imag().to_f64() - qi).abs() < 1e-11 * scale.max(1.0), "s=({sr},{si}) x={x}");
        }
        let g = g_base(&c(bits, 0.3, 0.7), &Float::with_val(bits, 5), &p).unwrap();
        assert!(mp::abs_f64(&g) <= 0.001347589399817);
    }

    #[test]
    fn domain_errors() {
        let p = prec(20);
        let bits = p.bits();
        assert!(g_base(&c(bits, 0.5, 0.0), &Float::with_val(bits, 0), &p).is_err());
        assert!(g_base(&c(bits, 0.5, 0.0), &Float::with_val(bits, -1), &p).is_err());
        assert!(deriv_bound(1.0, 1.0, 2).is_err());
        assert!(deriv_bound(1.0, 0.0, 2).is_err());
    }

    #[test]
    fn derivs_match_hand_recursion() {
        let p = prec(30);
        let bits = p.bits();
        let d = g_derivs(&c(bits, 1.0, 0.0), &Float::with_val(bits, 2), 3, &p).unwrap();
        let want = 3.0 * (-2.0f64).exp() / 4.0;
        assert!((d.values[1].real().to_f64() - want).abs() < 1e-16);
        let d0 = g_derivs(&c(bits, 1.0, 0.0), &Float::with_val(bits, 2), 0, &p).unwrap();
        assert_eq!(d0.len(), 1);
        let base = g_base(&c(bits, 1.0, 0.0), &Float::with_val(bits, 2), &p).unwrap();
        assert!(rel(&d0.values[0], &base) < 1e-38);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = prec(30);
        let bits = p.bits();
        let s = c(bits, 0.5, 0.0);
        let h = 1e-6;
        let gp = g_base(&s, &Float::with_val(bits, 3.0 + h), &p).unwrap();
        let gm = g_base(&s, &Float::with_val(bits, 3.0 - h), &p).unwrap();
        let fd = (gp.real().to_f64() - gm.real().to_f64()) / (2.0 * h);
        let d = g_derivs(&s, &Float::with_val(bits, 3), 1, &p).unwrap();
        let exact = d.derivative(1).real().to_f64();
        assert!(((fd - exact) / exact).abs() < 1e-8, "fd={fd} exact={exact}");
    }

    #[test]
    fn deriv_bound_values() {
        let b = deriv_bound(1.0, 0.5, 3).unwrap();
        assert!((b - 16.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((b - 9.7045).abs() < 1e-4);
        let x = 3.0;
        assert!((deriv_bound(x, x / 2.0, 0).unwrap() - (-x / 2.0).exp() / (x / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn deriv_bound_holds_numerically() {
        let p = prec(30);
        let bits = p.bits();
        let d = g_derivs(&c(bits, 0.5, 0.5), &Float::with_val(bits, 4), 10, &p).unwrap();
        let mut fact = 1.0;
        for k in 0..=10u32 {
            if k > 0 {
                fact *= k as f64;
            }
            let v = mp::abs_f64(&d.values[k as usize]) / fact;
            assert!(v <= deriv_bound(4.0, 1.0, k).unwrap(), "k={k}");
        }
    }

    #[test]
    fn recursion_agrees_with_base_over_grid() {
        // x spanning [2π/√q, log(q 10^D)] log-uniformly for q = 10^7, D = 6.
        let p = Precision::for_conductor(6, 10_000_000);
        let bits = p.bits();
        let x1 = 2.0 * std::f64::consts::PI / 10_000_000f64.sqrt();
        let x2 = (1e13f64).ln();
        let b = 40;
        for i in 0..8 {
            let x = x1 * (x2 / x1).powf(i as f64 / 7.0);
            let xf = Float::with_val(bits, x);
            for s in [c(bits, 0.5, 1.0), c(bits, 0.5, -0.3)] {
                let d = g_derivs(&s, &xf, b, &p).unwrap();
                for k in [1usize, 7, 20, 40] {
                    let sk = Complex::with_val(bits, &s + k as u32);
                    let direct = g_base(&sk, &xf, &p).unwrap();
                    let digits = -rel(&d.values[k], &direct).log10();
                    assert!(digits >= (p.work_digits - 6) as f64, "x={x} k={k} digits={digits}");
                }
            }
        }
    }

    #[test]
    fn conjugate_symmetry_and_decay() {
        let p = prec(25);
        let bits = p.bits();
        let s = c(bits, 0.5, 0.8);
        let sb = c(bits, 0.5, -0.8);
        for &x in &[0.01, 0.9, 1.6, 9.0] {
            let xf = Float::with_val(bits, x);
            let g = g_base(&s, &xf, &p).unwrap();
            let gb = g_base(&sb, &xf, &p).unwrap();
            let conj = Complex::with_val(bits, gb.conj_ref());
            assert!(rel(&g, &conj) < 1e-30);
        }
        let mut last = f64::INFINITY;
        for i in 1..60 {
            let x = 0.05 * i as f64;
            let g = g_base(&c(bits, 0.5, 0.0), &Float::with_val(bits, x), &p).unwrap();
            let v = g.real().to_f64();
            assert!(v < last);
            last = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bound_never_violated(sr in 0.01f64..0.99, si in -2.0f64..2.0, lx in -6.0f64..4.0) {
            let p = prec(20);
            let bits = p.bits();
            let x = lx.exp();
            let g = g_base(&c(bits, sr, si), &Float::with_val(bits, x), &p).unwrap();
            prop_assert!(mp::abs_f64(&g) <= g_bound(x) * (1.0 + 1e-12));
        }

        #[test]
        fn recursion_identity_holds(sr in 0.1f64..0.9, si in -1.0f64..1.0, lx in -5.0f64..3.5) {
            let p = prec(20);
            let bits = p.bits();
            let x = Float::with_val(bits, lx.exp());
            let d = g_derivs(&c(bits, sr, si), &x, 6, &p).unwrap();
            let e = mp::exp_neg(&x) / &x;
            for k in 0..6 {
                let sk = Complex::with_val(bits, c(bits, sr, si) + k as u32);
                let want = Complex::with_val(bits, &sk * &d.values[k]) / &x + &e;
                prop_assert!(rel(&d.values[k + 1], &want) < 1e-25);
            }
        }
    }
}
