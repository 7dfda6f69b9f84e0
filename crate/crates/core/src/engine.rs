//! Taylor-grid evaluation of the Hardy function
//! `Z(t, φ) = exp(iθ) (2π/√q)^s Γ(s)^{-1} Σ_n r_φ(n) {G(s, 2πn/√q) + G(1-s, 2πn/√q)}`
//! on `s = 1/2 + it`, `|t| ≤ 1`.
//!
//! The points `x_n = n x_1`, `x_1 = 2π/√q`, are grouped into intervals
//! centred at `x_j = (x_1/2)(3^{j-1} + 1)` of half-width `Δ_j = 3^{j-1} x_1/4`.
//! On each interval both kernels are expanded to order `B` about `x_j`, so the
//! character enters only through the `s`-independent sums
//! `S[j][k] = Σ_{n ∈ I_j} r_φ(n) ((x_n - x_j)/Δ_j)^k`.  The normalized offset
//! `(x_n - x_j)/Δ_j = (4n - 2·3^{j-1} - 2) / 3^{j-1}` does not depend on `q`.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfun::{self, Precision};
use crate::mp;

/// `ln(q · 10^D)`.
fn log_q10d(q: u64, digits: u32) -> f64 {
    (q as f64).ln() + digits as f64 * std::f64::consts::LN_10
}

/// Number of series terms: `N = ceil(√q ln(q 10^D) / 2π)`.
pub fn choose_n(q: u64, digits: u32) -> usize {
    ((q as f64).sqrt() * log_q10d(q, digits) / std::f64::consts::TAU).ceil() as usize
}

/// Integer range `[lo, hi]` of `n` with `n x_1 ∈ I_j`, before clipping to `N`.
/// The endpoints `(3^{j-1} + 2)/4` are never integers.
pub fn interval_range(j: u32) -> (u128, u128) {
    let p = 3u128.pow(j - 1);
    ((p + 2) / 4 + 1, (3 * p + 2) / 4)
}

/// Number of intervals: `T = ceil(ln(√q ln(q 10^D)))`, raised until the last
/// interval reaches both `ln(q 10^D)` and `n = N`.
pub fn choose_t(q: u64, digits: u32) -> u32 {
    let l = log_q10d(q, digits);
    let x1 = std::f64::consts::TAU / (q as f64).sqrt();
    let n = choose_n(q, digits) as u128;
    let mut t = ((q as f64).sqrt() * l).ln().ceil().max(1.0) as u32;
    loop {
        let reach = (3f64.powi(t as i32) / 2.0 + 1.0) * x1 / 2.0;
        if reach >= l && interval_range(t).1 >= n {
            return t;
        }
        t += 1;
    }
}

/// Taylor order: `B = ceil(1.5 ln(q^{3/4} 10^D))`, the standard-error choice.
pub fn choose_b(q: u64, digits: u32) -> usize {
    let v = 0.75 * (q as f64).ln() + digits as f64 * std::f64::consts::LN_10;
    (1.5 * v).ceil() as usize
}

/// Taylor order under the maximal-error model: the tail
/// `(2 e^{-x_1/2} / x_1) 2^{1-B}`, counted once for each of the two kernels,
/// must stay below `q^{-1/2} 10^{-D}`.
pub fn choose_b_paranoid(q: u64, digits: u32) -> usize {
    let x1 = std::f64::consts::TAU / (q as f64).sqrt();
    let lead = (2.0 * 2.0 * (-x1 / 2.0).exp() / x1).log2();
    let target = 0.5 * (q as f64).log2() + digits as f64 * mp::LOG2_10;
    (1.0 + lead + target).ceil() as usize
}

/// Per-evaluation tail bound `(2 e^{-x_1/2} / x_1) 2^{1-B}` of one kernel.
pub fn taylor_tail_bound(x1: f64, b: usize) -> f64 {
    2.0 * (-x1 / 2.0).exp() / x1 * 2f64.powi(1 - b as i32)
}

/// Options controlling grid construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Use the maximal-error Taylor order.
    pub paranoid: bool,
    /// Sum intervals with fewer than `B` members term by term.
    pub direct_small: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { paranoid: false, direct_small: true }
    }
}

/// One interval of the grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    /// 1-based interval number.
    pub j: u32,
    /// First and last `n` in the interval, clipped to `N`; empty when `lo > hi`.
    pub lo: usize,
    pub hi: usize,
    /// Evaluated term by term rather than through the Taylor patch.
    pub direct: bool,
}

impl Interval {
    pub fn len(&self) -> usize {
        (self.hi + 1).saturating_sub(self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `3^{j-1}`.
    pub fn scale(&self) -> Integer {
        Integer::from(3u32).pow(self.j - 1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaylorGrid {
    pub q: u64,
    pub precision: Precision,
    pub n_max: usize,
    pub t_count: u32,
    pub b: usize,
    pub intervals: Vec<Interval>,
}

impl TaylorGrid {
    pub fn build(q: u64, digits: u32, opts: GridOptions) -> Result<Self> {
        if q <= 4 {
            return Err(Error::input(format!("conductor must exceed 4, got {q}")));
        }
        if digits == 0 {
            return Err(Error::input("digits must be at least 1"));
        }
        let n_max = choose_n(q, digits);
        let t_count = choose_t(q, digits);
        let b = if opts.paranoid { choose_b_paranoid(q, digits) } else { choose_b(q, digits) };
        let intervals = (1..=t_count)
            .map(|j| {
                let (lo, hi) = interval_range(j);
                let lo = lo as usize;
                let hi = (hi as usize).min(n_max);
                let len = (hi + 1).saturating_sub(lo);
                Interval { j, lo, hi, direct: opts.direct_small && len > 0 && len < b }
            })
            .collect();
        Ok(TaylorGrid {
            q,
            precision: Precision::for_conductor(digits, q),
            n_max,
            t_count,
            b,
            intervals,
        })
    }

    pub fn digits(&self) -> u32 {
        self.precision.digits
    }

    pub fn bits(&self) -> u32 {
        self.precision.bits()
    }

    /// `x_1 = 2π/√q`.
    pub fn x1(&self) -> Float {
        let bits = self.bits();
        let sq = Float::with_val(bits, self.q).sqrt();
        mp::two_pi(bits) / sq
    }

    /// `x_j = (x_1/2)(3^{j-1} + 1)`.
    pub fn center(&self, iv: &Interval) -> Float {
        let bits = self.bits();
        Float::with_val(bits, self.x1() * (iv.scale() + 1u32)) / 2u32
    }

    /// `Δ_j = 3^{j-1} x_1 / 4`.
    pub fn radius(&self, iv: &Interval) -> Float {
        let bits = self.bits();
        Float::with_val(bits, self.x1() * iv.scale()) / 4u32
    }

    /// Largest `n` handled term by term, 0 if none.
    pub fn direct_limit(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.direct).map(|iv| iv.hi).max().unwrap_or(0)
    }

    /// Number of precomputed values an evaluation reads.
    pub fn sums_per_eval(&self) -> usize {
        self.intervals
            .iter()
            .map(|iv| if iv.direct { iv.len() } else { self.b + 1 })
            .sum()
    }
}

/// Powers `u_n^k`, `k = 0..=B`, of the normalized offsets of every `n` in a
/// Taylor interval.  Shared by all characters.
pub struct PowerTable {
    /// Per interval (empty for direct intervals), per member, per power.
    powers: Vec<Vec<Vec<Float>>>,
}

impl PowerTable {
    pub fn new(grid: &TaylorGrid) -> Self {
        let bits = grid.bits();
        let powers = grid
            .intervals
            .par_iter()
            .map(|iv| {
                if iv.direct {
                    return Vec::new();
                }
                let scale = iv.scale();
                let shift = Integer::from(&scale * 2u32) + 2u32;
                (iv.lo..=iv.hi)
                    .map(|n| {
                        let num = Integer::from(n) * 4u32 - &shift;
                        let u = Float::with_val(bits, &num) / &scale;
                        let mut row = Vec::with_capacity(grid.b + 1);
                        let mut acc = Float::with_val(bits, 1u32);
                        for _ in 0..=grid.b {
                            row.push(acc.clone());
                            acc *= &u;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        PowerTable { powers }
    }
}

/// The `s`-independent sums for one coefficient row.
#[derive(Clone, Debug)]
pub struct CharSums {
    /// `S[j][k]`, empty for direct intervals.
    pub taylor: Vec<Vec<Float>>,
    /// `r(n)` for `n = 1..=direct_limit`.
    pub direct: Vec<f64>,
}

impl CharSums {
    pub fn new(row: &[f64], grid: &TaylorGrid, powers: &PowerTable) -> Result<Self> {
        if row.len() < grid.n_max {
            return Err(Error::input(format!(
                "coefficient row has {} entries, the grid needs {}",
                row.len(),
                grid.n_max
            )));
        }
        let bits = grid.bits();
        let taylor = grid
            .intervals
            .iter()
            .zip(&powers.powers)
            .map(|(iv, pw)| {
                if iv.direct {
                    return Vec::new();
                }
                let mut acc: Vec<Float> = (0..=grid.b).map(|_| Float::new(bits)).collect();
                for (n, p) in (iv.lo..=iv.hi).zip(pw) {
                    let r = row[n - 1];
                    if r == 0.0 {
                        continue;
                    }
                    for (a, pk) in acc.iter_mut().zip(p) {
                        *a += Float::with_val(bits, pk * r);
                    }
                }
                acc
            })
            .collect();
        let direct = row[..grid.direct_limit()].to_vec();
        Ok(CharSums { taylor, direct })
    }

    /// Number of stored values, `T (B + 1)` when no interval is direct.
    pub fn len(&self) -> usize {
        self.taylor.iter().map(Vec::len).sum::<usize>() + self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sums for many rows at once.
pub fn precompute_sums(rows: &[&[f64]], grid: &TaylorGrid) -> Result<Vec<CharSums>> {
    let powers = PowerTable::new(grid);
    rows.par_iter().map(|row| CharSums::new(row, grid, &powers)).collect()
}

/// `θ(t) = t ln(√q / 2π) + arg Γ(1/2 + it)`.
pub fn theta(t: &Float, q: u64) -> Float {
    let bits = t.prec();
    let lq = Float::with_val(bits, q).sqrt() / mp::two_pi(bits);
    let lg = mp::ln_gamma(&half_plus_it(t));
    Float::with_val(bits, t * lq.ln()) + lg.imag()
}

pub(crate) fn half_plus_it(t: &Float) -> Complex {
    let bits = t.prec();
    Complex::with_val(bits, (Float::with_val(bits, 0.5), t))
}

fn check_band(t: &Float) -> Result<()> {
    if !t.is_finite() || t.clone().abs() > 1 {
        return Err(Error::Domain(format!("t must satisfy |t| ≤ 1, got {}", t.to_f64())));
    }
    Ok(())
}

/// `exp(iθ) (2π/√q)^s / Γ(s)`, which is real and positive on the critical line.
fn prefactor(s: &Complex, t: &Float, q: u64, ln_gamma_s: &Complex) -> Complex {
    let bits = t.prec();
    let x1 = mp::two_pi(bits) / Float::with_val(bits, q).sqrt();
    let mut e = Complex::with_val(bits, s * x1.ln());
    e -= ln_gamma_s;
    *e.mut_imag() += theta(t, q);
    e.exp()
}

/// Everything an evaluation at one `t` needs that does not depend on the
/// character.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub t: Float,
    /// `Δ_j^k (G^{(k)}(s, x_j) + G^{(k)}(1-s, x_j)) / k!`, empty for direct intervals.
    taylor: Vec<Vec<Complex>>,
    /// `G(s, x_n) + G(1-s, x_n)` for `n = 1..=direct_limit`.
    direct: Vec<Complex>,
    prefactor: Complex,
    digits: u32,
}

impl Kernel {
    pub fn new(grid: &TaylorGrid, t: &Float) -> Result<Self> {
        check_band(t)?;
        let p = grid.precision;
        let bits = grid.bits();
        let t = Float::with_val(bits, t);
        let s = half_plus_it(&t);
        let s1 = Complex::with_val(bits, 1u32 - &s);
        let lg = mp::ln_gamma(&s);
        let gamma_s = Complex::with_val(bits, lg.exp_ref());
        let gamma_s1 = mp::gamma(&s1);

        let x1 = grid.x1();
        let direct = (1..=grid.direct_limit())
            .map(|n| {
                let x = Float::with_val(bits, &x1 * n as u32);
                let a = gfun::g_base_with_gamma(&s, &x, &gamma_s, &p)?;
                let b = gfun::g_base_with_gamma(&s1, &x, &gamma_s1, &p)?;
                Ok(a + b)
            })
            .collect::<Result<Vec<_>>>()?;

        let taylor = grid
            .intervals
            .iter()
            .map(|iv| {
                if iv.direct || iv.is_empty() {
                    return Ok(Vec::new());
                }
                let xj = grid.center(iv);
                let dj = grid.radius(iv);
                let a = gfun::g_derivs_from(&s, &xj, Some(&gamma_s), grid.b, &p)?;
                let b = gfun::g_derivs_from(&s1, &xj, Some(&gamma_s1), grid.b, &p)?;
                // (-Δ)^k / k! turns G(s+k, x) into Δ^k G^{(k)}(s, x) / k!.
                let mut factor = Float::with_val(bits, 1u32);
                let mut out = Vec::with_capacity(grid.b + 1);
                for k in 0..=grid.b {
                    let sum = Complex::with_val(bits, &a.values[k] + &b.values[k]);
                    out.push(sum * &factor);
                    factor *= &dj;
                    factor /= (k + 1) as u32;
                    factor = -factor;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let prefactor = prefactor(&s, &t, grid.q, &lg);
        Ok(Kernel { t, taylor, direct, prefactor, digits: grid.digits() })
    }

    /// The completed sum `Σ r(n) {G(s, x_n) + G(1-s, x_n)}` for one row.
    pub fn lambda(&self, sums: &CharSums) -> Complex {
        let bits = self.t.prec();
        let mut acc = Complex::new(bits);
        for (c, s) in self.taylor.iter().zip(&sums.taylor) {
            for (ck, sk) in c.iter().zip(s) {
                acc += Complex::with_val(bits, ck * sk);
            }
        }
        for (g, &r) in self.direct.iter().zip(&sums.direct) {
            if r != 0.0 {
                acc += Complex::with_val(bits, g * r);
            }
        }
        acc
    }

    /// `Z(t)` for one row, checking that the imaginary part vanishes.
    pub fn z(&self, sums: &CharSums) -> Result<Float> {
        finish(&self.prefactor, &self.lambda(sums), self.digits, &self.t)
    }
}

fn finish(prefactor: &Complex, lambda: &Complex, digits: u32, t: &Float) -> Result<Float> {
    let bits = t.prec();
    let z = Complex::with_val(bits, prefactor * lambda);
    let re = z.real().to_f64();
    let im = z.imag().to_f64();
    if im.abs() > 10f64.powi(-(digits as i32)) * re.abs().max(1.0) {
        return Err(Error::numerical(format!(
            "Z({}) has imaginary part {im:e} (real part {re:e})",
            t.to_f64()
        )));
    }
    Ok(z.real().clone())
}

/// `Z(t)` through the Taylor grid.
pub fn z_eval(t: &Float, sums: &CharSums, grid: &TaylorGrid) -> Result<Float> {
    Kernel::new(grid, t)?.z(sums)
}

/// `Σ_{n ∈ range} r(n) {G(s, n x_1) + G(1-s, n x_1)}` with a fresh kernel
/// evaluation for every term.
pub fn direct_lambda(
    t: &Float,
    row: &[f64],
    range: std::ops::RangeInclusive<usize>,
    grid: &TaylorGrid,
) -> Result<Complex> {
    let p = grid.precision;
    let bits = grid.bits();
    if *range.end() > row.len() {
        return Err(Error::input(format!(
            "coefficient row has {} entries, need {}",
            row.len(),
            range.end()
        )));
    }
    let t = Float::with_val(bits, t);
    let s = half_plus_it(&t);
    let s1 = Complex::with_val(bits, 1u32 - &s);
    let gamma_s = mp::gamma(&s);
    let gamma_s1 = mp::gamma(&s1);
    let x1 = grid.x1();
    let mut acc = Complex::new(bits);
    for n in range {
        let r = row[n - 1];
        if r == 0.0 {
            continue;
        }
        let x = Float::with_val(bits, &x1 * n as u32);
        let a = gfun::g_base_with_gamma(&s, &x, &gamma_s, &p)?;
        let b = gfun::g_base_with_gamma(&s1, &x, &gamma_s1, &p)?;
        acc += Complex::with_val(bits, a + b) * r;
    }
    Ok(acc)
}

/// `Z(t)` by direct summation over `n ≤ N`; the Taylor-free reference.
pub fn direct_eval(t: &Float, row: &[f64], grid: &TaylorGrid) -> Result<Float> {
    check_band(t)?;
    let bits = grid.bits();
    let t = Float::with_val(bits, t);
    let lambda = direct_lambda(&t, row, 1..=grid.n_max, grid)?;
    let s = half_plus_it(&t);
    let pre = prefactor(&s, &t, grid.q, &mp::ln_gamma(&s));
    finish(&pre, &lambda, grid.digits(), &t)
}

/// The real factor `exp(iθ)(2π/√q)^s / Γ(s)` at `t`, for scaling tails.
pub fn prefactor_abs(t: &Float, q: u64) -> Float {
    let s = half_plus_it(t);
    let pre = prefactor(&s, t, q, &mp::ln_gamma(&s));
    Float::with_val(t.prec(), pre.abs_ref())
}
