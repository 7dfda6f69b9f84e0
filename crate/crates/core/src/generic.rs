//! The Taylor-grid evaluator for an arbitrary sequence of integer
//! coefficients, with inner sums computed exactly.
//!
//! A coefficient file describes `Λ(s) = Σ_n a(n) n^κ {G(w(s), λ m_n) + ε G(w(1-s), λ m_n)}`
//! in one of two shapes:
//!
//! * `half`: `w(s) = (s + κ)/2`, `λ = π / cond`, `m_n = n²` (quadratic
//!   Dirichlet characters, `κ` the parity);
//! * `full`: `w(s) = s + κ/2`, `λ = 2π / √cond`, `m_n = n`, and the `n^κ`
//!   factor is dropped (class group characters with `κ = 0`, weight two
//!   forms in arithmetic normalization with `κ = 1`).
//!
//! Centres are placed at integers `m_j = (3^{j-1} + 1)/2`, so
//! `S[j][k] = Σ_{m ∈ I_j} b(m) (m - m_j)^k` is an exact integer and the
//! powers of `λ` go into the kernel.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Assign, Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::engine::{half_plus_it, interval_range};
use crate::error::{Error, Result};
use crate::gfun::{self, Precision};
use crate::mp;

/// Kronecker symbol `(d | n)` for `n ≥ 0`.
pub fn kronecker(d: i64, n: u64) -> i32 {
    if n == 0 {
        return if d.unsigned_abs() == 1 { 1 } else { 0 };
    }
    let mut n = n;
    let mut sign = 1i32;
    let tz = n.trailing_zeros();
    if tz > 0 {
        if d % 2 == 0 {
            return 0;
        }
        // (d | 2) = 1 for d ≡ ±1 mod 8, -1 for d ≡ ±3 mod 8.
        let r = d.rem_euclid(8);
        if tz % 2 == 1 && (r == 3 || r == 5) {
            sign = -sign;
        }
        n >>= tz;
    }
    // Now n is odd: the Jacobi symbol (d mod n | n).
    let mut a = d.rem_euclid(n as i64) as u64;
    let mut m = n;
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 && (m % 8 == 3 || m % 8 == 5) {
            sign = -sign;
        }
        if a % 4 == 3 && m % 4 == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut m);
        a %= m;
    }
    if m == 1 {
        sign
    } else {
        0
    }
}

/// Whether `d` is a fundamental discriminant.
pub fn is_fundamental_discriminant(d: i64) -> bool {
    let squarefree = |mut n: u64| {
        let mut p = 2u64;
        while p * p <= n {
            if n.is_multiple_of(p * p) {
                return false;
            }
            if n.is_multiple_of(p) {
                n /= p;
            }
            p += 1;
        }
        true
    };
    let a = d.unsigned_abs();
    match d.rem_euclid(4) {
        1 => d != 1 && squarefree(a),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaShape {
    Half,
    Full,
}

impl FromStr for GammaShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(GammaShape::Half),
            "full" => Ok(GammaShape::Full),
            _ => Err(Error::input(format!("gamma shape must be half or full, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for GammaShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GammaShape::Half => "half",
            GammaShape::Full => "full",
        })
    }
}

/// Contents of a `GLF1` coefficient file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffFile {
    pub name: String,
    pub cond: u64,
    pub shape: GammaShape,
    /// Sign of the functional equation, `±1`.
    pub sign: i32,
    /// Shift `κ ∈ {0, 1}` in the gamma factor.
    pub kappa: u32,
    /// `a(1), ..., a(N)`.
    pub coeffs: Vec<i64>,
}

impl CoeffFile {
    /// Coefficients `(d | n)` for a fundamental discriminant `d`, enough of
    /// them for `digits` digits.
    pub fn kronecker(d: i64, digits: u32) -> Result<Self> {
        if !is_fundamental_discriminant(d) {
            return Err(Error::input(format!("{d} is not a fundamental discriminant")));
        }
        let cond = d.unsigned_abs();
        let kappa = u32::from(d < 0);
        let n = required_terms(cond, GammaShape::Half, kappa, digits)?;
        let coeffs = (1..=n as u64).map(|k| kronecker(d, k) as i64).collect();
        Ok(CoeffFile { name: format!("kronecker{d}"), cond, shape: GammaShape::Half, sign: 1, kappa, coeffs })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "GLF1 {} {} {} {} {} {}",
            self.name,
            self.cond,
            self.shape,
            self.sign,
            self.coeffs.len(),
            self.kappa
        )?;
        for (i, a) in self.coeffs.iter().enumerate() {
            writeln!(w, "{} {}", i + 1, a)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let header = header?;
        let bad = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.first() != Some(&"GLF1") {
            return Err(bad("missing GLF1 magic"));
        }
        if f.len() != 6 && f.len() != 7 {
            return Err(bad("header must be: GLF1 name cond shape sign N [kappa]"));
        }
        let cond: u64 = f[2].parse().map_err(|_| bad("conductor is not a positive integer"))?;
        if cond < 2 {
            return Err(bad("conductor must be at least 2"));
        }
        let shape: GammaShape = f[3].parse().map_err(|_| bad("shape must be half or full"))?;
        let sign: i32 = f[4].parse().map_err(|_| bad("sign must be 1 or -1"))?;
        if sign != 1 && sign != -1 {
            return Err(bad("sign must be 1 or -1"));
        }
        let n: usize = f[5].parse().map_err(|_| bad("N is not an integer"))?;
        let kappa: u32 = match f.get(6) {
            Some(k) => k.parse().map_err(|_| bad("kappa must be 0 or 1"))?,
            None => 0,
        };
        if kappa > 1 {
            return Err(bad("kappa must be 0 or 1"));
        }
        let mut coeffs = Vec::with_capacity(n);
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            let idx: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| perr("expected `n a(n)`".into()))?;
            let val: i64 = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| perr("coefficient is not a 64-bit integer".into()))?;
            if parts.next().is_some() {
                return Err(perr("trailing fields".into()));
            }
            if idx != coeffs.len() + 1 {
                return Err(perr(format!("expected n = {}, found {idx}", coeffs.len() + 1)));
            }
            coeffs.push(val);
        }
        if coeffs.len() != n {
            return Err(Error::Parse {
                line: coeffs.len() + 1,
                msg: format!("header announces {n} coefficients, file has {}", coeffs.len()),
            });
        }
        Ok(CoeffFile { name: f[1].to_string(), cond, shape, sign, kappa, coeffs })
    }
}

fn lambda_f64(cond: u64, shape: GammaShape) -> f64 {
    match shape {
        GammaShape::Half => std::f64::consts::PI / cond as f64,
        GammaShape::Full => std::f64::consts::TAU / (cond as f64).sqrt(),
    }
}

/// `ln |γ(1/2 + i)|`, the smallest `|γ|` on `|t| ≤ 1`, where
/// `γ(s) = λ^{-w(s)} Γ(w(s))`.
fn ln_gamma_factor_min(cond: u64, shape: GammaShape, kappa: u32) -> f64 {
    let lambda = lambda_f64(cond, shape);
    let w = match shape {
        GammaShape::Half => Complex::with_val(64, ((0.5 + kappa as f64) / 2.0, 0.5)),
        GammaShape::Full => Complex::with_val(64, (0.5 + kappa as f64 / 2.0, 1.0)),
    };
    let re = w.real().to_f64();
    mp::ln_gamma(&w).real().to_f64() - re * lambda.ln()
}

/// `ln` of a bound on `|b(m)|`, where `b(m)` multiplies the kernels at `λ m`.
fn ln_coeff_bound(m: f64, shape: GammaShape, kappa: u32) -> f64 {
    match shape {
        // |a(n)| ≤ 1, times n^κ with n = √m.
        GammaShape::Half => 0.5 * kappa as f64 * m.ln(),
        // Divisor-bounded coefficients of weight κ + 1.
        GammaShape::Full => 2f64.ln() + 0.5 * (kappa as f64 + 1.0) * m.ln(),
    }
}

/// `ln` of a bound for `Σ_{m > M} |b(m)| (|G(w, λm)| + |G(w', λm)|)`.
fn ln_tail(m0: f64, lambda: f64, shape: GammaShape, kappa: u32) -> f64 {
    let term = |m: f64| 2f64.ln() + ln_coeff_bound(m, shape, kappa) - lambda * m - (lambda * m).ln();
    match shape {
        // Terms at m = n², n > √M; Gaussian tail of the remaining sum.
        GammaShape::Half => {
            let n0 = m0.sqrt().floor() + 1.0;
            let m = n0 * n0;
            term(m) + (1.0 + 1.0 / (2.0 * lambda * n0)).ln()
        }
        GammaShape::Full => {
            let m = m0.floor() + 1.0;
            term(m) - (1.0 - (-lambda).exp()).ln()
        }
    }
}

/// Required `m` range so the truncated tail stays below `10^{-D}` of `|γ|`.
fn required_m(cond: u64, shape: GammaShape, kappa: u32, digits: u32) -> Result<u64> {
    let lambda = lambda_f64(cond, shape);
    let target = ln_gamma_factor_min(cond, shape, kappa) - (digits as f64 + 1.0) * std::f64::consts::LN_10;
    let mut hi = (1.0 / lambda).max(2.0);
    while ln_tail(hi, lambda, shape, kappa) > target {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::Resource("truncation point does not fit in 64 bits".into()));
        }
    }
    let mut lo = 1.0f64;
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if ln_tail(mid, lambda, shape, kappa) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi as u64)
}

/// Number of coefficients `a(n)` needed for `digits` digits.
pub fn required_terms(cond: u64, shape: GammaShape, kappa: u32, digits: u32) -> Result<usize> {
    let m = required_m(cond, shape, kappa, digits)?;
    Ok(match shape {
        GammaShape::Half => (m as f64).sqrt().floor() as usize + 1,
        GammaShape::Full => m as usize,
    })
}

/// One Taylor interval of the integer grid.
#[derive(Clone, Debug)]
struct Patch {
    /// `m_j`.
    center: u64,
    /// `(m, b(m))` for nonzero coefficients in the interval.
    members: Vec<(u64, Integer)>,
    /// Exact `Σ b(m) (m - m_j)^k`, `k = 0..=B`; empty when summed directly.
    sums: Vec<Integer>,
    /// `sums` rounded to working precision.
    sums_f: Vec<Float>,
}

impl Patch {
    fn direct(&self) -> bool {
        self.sums.is_empty()
    }
}

/// Parameters of a generic evaluator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenericParams {
    pub cond: u64,
    pub shape: GammaShape,
    pub kappa: u32,
    pub sign: i32,
    pub precision: Precision,
    /// Largest `m` used.
    pub m_max: u64,
    /// Coefficients read, `n ≤ n_used`.
    pub n_used: usize,
    pub t_count: u32,
    pub b: usize,
}

/// Evaluates `Z(t) = Re(u Λ(1/2 + it) / |γ(1/2 + it)|)`, `u = 1` for sign `+1`
/// and `u = -i` for sign `-1`.
#[derive(Clone, Debug)]
pub struct GenericEngine {
    pub params: GenericParams,
    patches: Vec<Patch>,
}

impl GenericEngine {
    pub fn new(file: &CoeffFile, digits: u32) -> Result<Self> {
        if digits == 0 {
            return Err(Error::input("digits must be at least 1"));
        }
        let (cond, shape, kappa) = (file.cond, file.shape, file.kappa);
        let m_max = required_m(cond, shape, kappa, digits)?;
        let n_used = required_terms(cond, shape, kappa, digits)?;
        if file.coeffs.len() < n_used {
            return Err(Error::input(format!(
                "{} digits need {n_used} coefficients, file has {}",
                digits,
                file.coeffs.len()
            )));
        }
        let precision = Precision::for_conductor(digits, cond);
        let bits = precision.bits();

        let mut t_count = 1u32;
        while interval_range(t_count).1 < m_max as u128 {
            t_count += 1;
        }

        // b(m) for m ≤ m_max.
        let mut coeffs: Vec<(u64, Integer)> = Vec::new();
        for (i, &a) in file.coeffs.iter().enumerate().take(n_used) {
            if a == 0 {
                continue;
            }
            let n = i as u64 + 1;
            let (m, b) = match shape {
                GammaShape::Half => (n * n, Integer::from(a) * Integer::from(n).pow(kappa)),
                GammaShape::Full => (n, Integer::from(a)),
            };
            if m <= m_max {
                coeffs.push((m, b));
            }
        }

        // Maximal-error Taylor order: every term's tail is at most
        // 2 (e^{-λ/2} / (λ/2)) 2^{-B}, counting both kernels.
        let lambda = lambda_f64(cond, shape);
        let l1: f64 = coeffs.iter().map(|(_, b)| b.to_f64().abs()).sum();
        let target = ln_gamma_factor_min(cond, shape, kappa) - (digits as f64 + 1.0) * std::f64::consts::LN_10;
        let lead = 2f64.ln() + (-lambda / 2.0) - (lambda / 2.0).ln() + l1.max(1.0).ln();
        let b = ((lead - target) / 2f64.ln()).ceil().max(1.0) as usize;

        let mut patches: Vec<Patch> = (1..=t_count)
            .map(|j| {
                let p = 3u64.pow(j - 1);
                Patch { center: p.div_ceil(2), members: Vec::new(), sums: Vec::new(), sums_f: Vec::new() }
            })
            .collect();
        for (m, bm) in coeffs {
            let mut j = 1u32;
            while interval_range(j).1 < m as u128 {
                j += 1;
            }
            patches[j as usize - 1].members.push((m, bm));
        }
        use rayon::prelude::*;
        patches.par_iter_mut().for_each(|patch| {
            if patch.members.len() < b {
                return;
            }
            let mut sums = vec![Integer::new(); b + 1];
            let mut pw = Integer::new();
            for (m, bm) in &patch.members {
                let d = *m as i64 - patch.center as i64;
                pw.assign(bm);
                for s in sums.iter_mut() {
                    *s += &pw;
                    pw *= d;
                }
            }
            patch.sums_f = sums.iter().map(|s| Float::with_val(bits, s)).collect();
            patch.sums = sums;
        });

        let params = GenericParams {
            cond,
            shape,
            kappa,
            sign: file.sign,
            precision,
            m_max,
            n_used,
            t_count,
            b,
        };
        Ok(GenericEngine { params, patches })
    }

    /// Exact inner sum `Σ_{m ∈ I_j} b(m) (m - m_j)^k`, if interval `j` uses
    /// the Taylor patch.
    pub fn inner_sum(&self, j: u32, k: usize) -> Option<&Integer> {
        self.patches.get(j as usize - 1).and_then(|p| p.sums.get(k))
    }

    /// Recomputes the highest-order inner sum of the last Taylor patch term by
    /// term and compares it with the stored value.  Returns the interval
    /// checked, or `None` when every interval is summed directly.
    pub fn verify_inner_sum(&self) -> Result<Option<u32>> {
        let Some(idx) = self.patches.iter().rposition(|p| !p.sums.is_empty()) else {
            return Ok(None);
        };
        let patch = &self.patches[idx];
        let k = patch.sums.len() - 1;
        let mut want = Integer::new();
        for (m, bm) in &patch.members {
            let d = Integer::from(*m as i64 - patch.center as i64);
            want += d.pow(k as u32) * bm;
        }
        if want != patch.sums[k] {
            return Err(Error::numerical(format!("inner sum of interval {} order {k} does not recompute", idx + 1)));
        }
        Ok(Some(idx as u32 + 1))
    }

    /// Members `(m, b(m))` of interval `j`.
    pub fn members(&self, j: u32) -> &[(u64, Integer)] {
        &self.patches[j as usize - 1].members
    }

    fn lambda(&self, bits: u32) -> Float {
        let pi = mp::pi(bits);
        match self.params.shape {
            GammaShape::Half => pi / self.params.cond,
            GammaShape::Full => pi * 2u32 / Float::with_val(bits, self.params.cond).sqrt(),
        }
    }

    /// `w(s)` and `w(1 - s)`.
    fn weights(&self, s: &Complex) -> (Complex, Complex) {
        let bits = s.prec().0;
        let s1 = Complex::with_val(bits, 1u32 - s);
        let k = self.params.kappa;
        match self.params.shape {
            GammaShape::Half => (Complex::with_val(bits, s + k) / 2u32, Complex::with_val(bits, &s1 + k) / 2u32),
            GammaShape::Full => {
                let h = Float::with_val(bits, k) / 2u32;
                (Complex::with_val(bits, s + &h), Complex::with_val(bits, &s1 + &h))
            }
        }
    }

    /// `Λ(1/2 + it)`.
    pub fn lambda_at(&self, t: &Float) -> Result<Complex> {
        let p = self.params.precision;
        let bits = p.bits();
        let t = Float::with_val(bits, t);
        let s = half_plus_it(&t);
        let (w, w1) = self.weights(&s);
        let g = mp::gamma(&w);
        let g1 = mp::gamma(&w1);
        let lam = self.lambda(bits);
        let eps = self.params.sign;
        let combine = |a: Complex, b: Complex| if eps > 0 { a + b } else { a - b };

        let mut acc = Complex::new(bits);
        for patch in &self.patches {
            if patch.members.is_empty() {
                continue;
            }
            if patch.direct() {
                for (m, bm) in &patch.members {
                    let x = Float::with_val(bits, &lam * *m);
                    let a = gfun::g_base_with_gamma(&w, &x, &g, &p)?;
                    let b = gfun::g_base_with_gamma(&w1, &x, &g1, &p)?;
                    acc += combine(a, b) * Float::with_val(bits, bm);
                }
                continue;
            }
            let x = Float::with_val(bits, &lam * patch.center);
            let da = gfun::g_derivs_from(&w, &x, Some(&g), self.params.b, &p)?;
            let db = gfun::g_derivs_from(&w1, &x, Some(&g1), self.params.b, &p)?;
            // (-λ)^k / k! turns G(w+k, x) into λ^k G^{(k)}(w, x) / k!.
            let mut factor = Float::with_val(bits, 1u32);
            for (k, sk) in patch.sums_f.iter().enumerate() {
                let c = combine(da.values[k].clone(), db.values[k].clone());
                acc += c * Float::with_val(bits, &factor * sk);
                factor *= &lam;
                factor /= (k + 1) as u32;
                factor = -factor;
            }
        }
        Ok(acc)
    }

    /// `Z(t)` with the imaginary-part check.
    pub fn z(&self, t: &Float) -> Result<Float> {
        if !t.is_finite() || t.clone().abs() > 1 {
            return Err(Error::Domain(format!("t must satisfy |t| ≤ 1, got {}", t.to_f64())));
        }
        let bits = self.params.precision.bits();
        let lam = self.lambda_at(t)?;
        let t = Float::with_val(bits, t);
        let s = half_plus_it(&t);
        let (w, _) = self.weights(&s);
        // |γ| = λ^{-Re w} |Γ(w)|
        let lg = mp::ln_gamma(&w);
        let ln_abs = Float::with_val(bits, lg.real() - Float::with_val(bits, self.lambda(bits).ln() * w.real()));
        let scale = Float::with_val(bits, -ln_abs).exp();
        let mut z = lam * scale;
        if self.params.sign < 0 {
            z *= Complex::with_val(bits, (0, -1));
        }
        let re = z.real().to_f64();
        let im = z.imag().to_f64();
        if im.abs() > 10f64.powi(-(self.params.precision.digits as i32)) * re.abs().max(1.0) {
            return Err(Error::numerical(format!("Z({}) has imaginary part {im:e}", t.to_f64())));
        }
        Ok(z.real().clone())
    }
}
