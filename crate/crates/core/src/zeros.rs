//! Locating zeros of `Z(t)` and the low-lying zero statistics.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rug::Float;

use crate::engine::{CharSums, Kernel, TaylorGrid};
use crate::error::{Error, Result};
use crate::forms::CharIndex;

/// Refinement gives up after this many steps.
pub const MAX_REFINE_ITER: usize = 200;

/// Mean lowest normalized zero of the symplectic model.
pub const USP_MEAN_LOWEST: f64 = 0.78;

/// Default rescaling applied to normalized zeros in the density estimator.
pub const DEFAULT_RESCALE: f64 = 0.78 / 1.18;

/// Extra digits carried by an evaluator whose zeros are reported to `D`
/// significant digits: `Z` accurate to `10^{-D}` only pins a zero near
/// `t ≈ 10^{-3}` to about `D - 3` significant digits.
pub const ZERO_GUARD_DIGITS: u32 = 4;

/// Width of the density histogram bins.
pub const BIN_WIDTH: f64 = 0.05;

/// Number of bins, covering `[0, 1.8)`.
pub const BIN_COUNT: usize = 36;

/// Brent's bracketed root finder.  `fa` and `fb` are `f(a)` and `f(b)`; the
/// returned point lies in the bracket and is within `tol` of a sign change.
pub fn refine_with<F>(a: &Float, fa: &Float, b: &Float, fb: &Float, tol: &Float, mut f: F) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let prec = a.prec().max(b.prec()).max(tol.prec());
    let fl = |v: &Float| Float::with_val(prec, v);
    let (mut a, mut b, mut fa, mut fb) = (fl(a), fl(b), fl(fa), fl(fb));
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    if fa.is_sign_negative() == fb.is_sign_negative() {
        return Err(Error::input(format!(
            "no sign change on [{}, {}]",
            a.to_f64(),
            b.to_f64()
        )));
    }
    let eps = Float::with_val(prec, Float::i_exp(1, 1 - prec as i32));
    let mut c = a.clone();
    let mut fc = fa.clone();
    let mut d = Float::with_val(prec, &b - &a);
    let mut e = d.clone();
    for _ in 0..MAX_REFINE_ITER {
        if fb.is_sign_negative() == fc.is_sign_negative() {
            c = a.clone();
            fc = fa.clone();
            d = Float::with_val(prec, &b - &a);
            e = d.clone();
        }
        if fc.clone().abs() < fb.clone().abs() {
            a = b.clone();
            b = c.clone();
            c = a.clone();
            fa = fb.clone();
            fb = fc.clone();
            fc = fa.clone();
        }
        let tol1 = Float::with_val(prec, &eps * b.clone().abs()) * 2u32 + Float::with_val(prec, tol / 2u32);
        let xm = Float::with_val(prec, &c - &b) / 2u32;
        if xm.clone().abs() <= tol1 || fb.is_zero() {
            return Ok(b);
        }
        if e.clone().abs() >= tol1 && fa.clone().abs() > fb.clone().abs() {
            let s = Float::with_val(prec, &fb / &fa);
            let (mut p, mut q);
            if a == c {
                p = Float::with_val(prec, &xm * &s) * 2u32;
                q = Float::with_val(prec, 1u32 - &s);
            } else {
                let qq = Float::with_val(prec, &fa / &fc);
                let r = Float::with_val(prec, &fb / &fc);
                let t1 = Float::with_val(prec, &xm * 2u32) * &qq * Float::with_val(prec, &qq - &r);
                let t2 = Float::with_val(prec, &b - &a) * Float::with_val(prec, &r - 1u32);
                p = s.clone() * (t1 - t2);
                q = Float::with_val(prec, &qq - 1u32) * Float::with_val(prec, &r - 1u32) * Float::with_val(prec, &s - 1u32);
            }
            if p.is_sign_positive() && !p.is_zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = Float::with_val(prec, &xm * &q) * 3u32 - Float::with_val(prec, &tol1 * &q).abs();
            let min2 = Float::with_val(prec, &e * &q).abs();
            let bound = if min1 < min2 { min1 } else { min2 };
            if Float::with_val(prec, &p * 2u32) < bound {
                e = d.clone();
                d = p / &q;
            } else {
                d = xm.clone();
                e = d.clone();
            }
        } else {
            d = xm.clone();
            e = d.clone();
        }
        a = b.clone();
        fa = fb.clone();
        if d.clone().abs() > tol1 {
            b += &d;
        } else if xm.is_sign_negative() {
            b -= &tol1;
        } else {
            b += &tol1;
        }
        fb = Float::with_val(prec, f(&b)?);
    }
    Err(Error::Convergence { what: "bracketed zero refinement".into(), iterations: MAX_REFINE_ITER })
}

/// [`refine_with`] evaluating the endpoints first.
pub fn refine<F>(a: &Float, b: &Float, tol: &Float, mut f: F) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    refine_with(a, &fa, b, &fb, tol, f)
}

/// Scan step `2π / (20 ln q)`.
pub fn default_step(q: u64) -> f64 {
    TAU / (20.0 * (q as f64).ln())
}

/// `γ̃ = γ ln(q) / 2π`.
pub fn normalize(t: f64, q: u64) -> f64 {
    t * (q as f64).ln() / TAU
}

/// Sampling and refinement settings.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Bracket width at which refinement stops.
    pub tol: f64,
    /// `|Z|` below this at a sample counts as a zero at that sample.
    pub zero_threshold: f64,
}

impl ScanConfig {
    /// Defaults for conductor `q` at `digits` digits over `[0, 1]`.
    pub fn new(q: u64, digits: u32) -> Self {
        ScanConfig {
            lo: 0.0,
            hi: 1.0,
            step: default_step(q),
            tol: 10f64.powi(-(digits as i32) - 2),
            zero_threshold: 10f64.powi(-(digits as i32) + 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= -1.0 && self.hi <= 1.0 && self.lo <= self.hi) {
            return Err(Error::input(format!("t range [{}, {}] must lie in [-1, 1]", self.lo, self.hi)));
        }
        if !(self.step > 0.0 && self.tol > 0.0) {
            return Err(Error::input("scan step and tolerance must be positive"));
        }
        Ok(())
    }

    /// `lo, lo + δ, ...` up to `hi`, with `hi` itself appended.
    pub fn samples(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u64;
        loop {
            let t = self.lo + i as f64 * self.step;
            if t > self.hi - 1e-12 * self.step {
                break;
            }
            out.push(t);
            i += 1;
        }
        out.push(self.hi);
        out
    }
}

/// A located zero of one L-function.
#[derive(Clone, Debug)]
pub struct ZeroRecord {
    pub q: u64,
    pub chi: CharIndex,
    pub t: Float,
    /// `t ln(q) / 2π`.
    pub gamma_tilde: f64,
}

/// Zeros found for one character.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub chi: CharIndex,
    pub zeros: Vec<ZeroRecord>,
    /// `|Z(0)|` fell below the zero threshold.
    pub central_zero: bool,
}

/// Scans samples of `f`, refining every sign change.
pub fn scan_zeros<F>(q: u64, chi: &CharIndex, cfg: &ScanConfig, prec: u32, mut f: F) -> Result<ScanResult>
where
    F: FnMut(&Float) -> Result<Float>,
{
    cfg.validate()?;
    let ts = cfg.samples();
    let mut values = Vec::with_capacity(ts.len());
    for &t in &ts {
        values.push(f(&Float::with_val(prec, t))?);
    }
    zeros_from_samples(q, chi, cfg, prec, &ts, &values, f)
}

/// Zeros from precomputed samples `values[i] = f(ts[i])`; `f` is only
/// called while refining brackets.
pub fn zeros_from_samples<F>(
    q: u64,
    chi: &CharIndex,
    cfg: &ScanConfig,
    prec: u32,
    ts: &[f64],
    values: &[Float],
    mut f: F,
) -> Result<ScanResult>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let tol = Float::with_val(prec, cfg.tol);
    let small = |v: &Float| v.clone().abs() < cfg.zero_threshold;
    let mut zeros = Vec::new();
    let mut central_zero = false;
    let record = |t: Float| {
        let g = normalize(t.to_f64(), q);
        ZeroRecord { q, chi: chi.clone(), t, gamma_tilde: g }
    };
    for i in 0..ts.len() {
        if small(&values[i]) {
            if ts[i] == 0.0 {
                central_zero = true;
            } else {
                zeros.push(record(Float::with_val(prec, ts[i])));
            }
            continue;
        }
        if i + 1 < ts.len() && !small(&values[i + 1]) && values[i].is_sign_negative() != values[i + 1].is_sign_negative()
        {
            let a = Float::with_val(prec, ts[i]);
            let b = Float::with_val(prec, ts[i + 1]);
            let t = refine_with(&a, &values[i], &b, &values[i + 1], &tol, &mut f)?;
            zeros.push(record(t));
        }
    }
    Ok(ScanResult { chi: chi.clone(), zeros, central_zero })
}

/// Scans many characters of one conductor, sharing each sample's kernel
/// across characters.  Results follow the order of `chars`.
pub fn scan_many(grid: &TaylorGrid, chars: &[CharIndex], sums: &[CharSums], cfg: &ScanConfig) -> Result<Vec<ScanResult>> {
    cfg.validate()?;
    if chars.len() != sums.len() {
        return Err(Error::input("one set of sums per character is required"));
    }
    let prec = grid.bits();
    let ts = cfg.samples();
    let kernels: Vec<Kernel> = ts
        .par_iter()
        .map(|&t| Kernel::new(grid, &Float::with_val(prec, t)))
        .collect::<Result<_>>()?;
    chars
        .par_iter()
        .zip(sums)
        .map(|(chi, s)| {
            let values = kernels.iter().map(|k| k.z(s)).collect::<Result<Vec<_>>>()?;
            zeros_from_samples(grid.q, chi, cfg, prec, &ts, &values, |t| Kernel::new(grid, t)?.z(s))
        })
        .collect()
}

/// A histogram over `[0, 1.8)` in bins of `0.05`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `(lo, hi, weight, model)` per bin.
    pub bins: Vec<(f64, f64, f64, f64)>,
}

/// Symplectic one-level density `1 - sin(2πx) / (2πx)`.
pub fn usp_density(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let y = 2.0 * PI * x;
    1.0 - y.sin() / y
}

fn bin_of(x: f64) -> Option<usize> {
    if !(0.0..BIN_COUNT as f64 * BIN_WIDTH).contains(&x) {
        return None;
    }
    Some(((x / BIN_WIDTH).floor() as usize).min(BIN_COUNT - 1))
}

fn histogram(values: impl Iterator<Item = f64>, scale: f64, model: impl Fn(f64) -> f64) -> Histogram {
    let mut counts = vec![0usize; BIN_COUNT];
    for v in values {
        if let Some(b) = bin_of(v) {
            counts[b] += 1;
        }
    }
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lo = i as f64 * BIN_WIDTH;
            let hi = (i + 1) as f64 * BIN_WIDTH;
            (lo, hi, c as f64 * scale, model((lo + hi) / 2.0))
        })
        .collect();
    Histogram { bins }
}

/// Lowest positive zero of each character: the mean of `γ̃` and a
/// histogram of the lowest values normalized to unit mass.
pub fn lowest_zero_stats(results: &[ScanResult]) -> Result<(f64, Histogram)> {
    let lowest: Vec<f64> = results
        .iter()
        .filter_map(|r| {
            r.zeros
                .iter()
                .filter(|z| z.t.is_sign_positive() && !z.t.is_zero())
                .map(|z| z.gamma_tilde)
                .min_by(|a, b| a.total_cmp(b))
        })
        .collect();
    if lowest.is_empty() {
        return Err(Error::input("no zeros to summarize"));
    }
    let mean = lowest.iter().sum::<f64>() / lowest.len() as f64;
    let scale = 1.0 / (lowest.len() as f64 * BIN_WIDTH);
    Ok((mean, histogram(lowest.into_iter(), scale, |_| f64::NAN)))
}

/// `(β - α)^{-1} / #chars · Σ_φ Σ_γ 1[rescale · γ̃ ∈ [α, β)]`, with the model
/// density sampled at bin centres.
pub fn one_level_density(results: &[ScanResult], rescale: f64) -> Histogram {
    let n = results.len().max(1) as f64;
    let values = results.iter().flat_map(|r| r.zeros.iter().map(move |z| rescale * z.gamma_tilde));
    histogram(values, 1.0 / (n * BIN_WIDTH), usp_density)
}

/// Pearson correlation of the pairs.
pub fn pearson(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::input(format!("correlation needs at least 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain("correlation undefined for constant data".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Correlation between per-discriminant mean lowest zeros and `h/√q`;
/// each entry is `(q, h, mean)`.
pub fn class_number_correlation(data: &[(u64, usize, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = data.iter().map(|&(q, h, m)| (m, h as f64 / (q as f64).sqrt())).collect();
    pearson(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fl(v: f64) -> Float {
        Float::with_val(128, v)
    }

    #[test]
    fn refine_linear_and_cos() {
        let tol = fl(1e-30);
        let r = refine(&fl(-1.0), &fl(2.0), &tol, |t| Ok(Float::with_val(128, t * 3u32))).unwrap();
        assert!(r.to_f64().abs() < 1e-29);
        let r = refine(&fl(1.0), &fl(2.0), &tol, |t| Ok(t.clone().cos())).unwrap();
        let half_pi = crate::mp::pi(128) / 2u32;
        assert!(Float::with_val(128, &r - &half_pi).abs().to_f64() < 1e-29);
    }

    #[test]
    fn refine_stays_in_bracket_and_reports_errors() {
        let tol = fl(1e-12);
        let mut seen = Vec::new();
        let r = refine(&fl(0.0), &fl(3.0), &tol, |t| {
            seen.push(t.to_f64());
            Ok(Float::with_val(128, t * t) - 2u32)
        })
        .unwrap();
        assert!((r.to_f64() - 2f64.sqrt()).abs() < 1e-11);
        assert!(seen.iter().all(|&t| (0.0..=3.0).contains(&t)));
        let err = refine(&fl(0.0), &fl(1.0), &tol, |t| Ok(Float::with_val(128, t + 1u32))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // A discontinuous sign change never satisfies a zero tolerance.
        let err = refine(&fl(-1.0), &fl(1.0), &fl(0.0), |t| Ok(if t.is_sign_negative() { fl(-1.0) } else { fl(1.0) }))
            .unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn scan_finds_sign_changes() {
        let cfg = ScanConfig { lo: 0.0, hi: 1.0, step: 0.05, tol: 1e-12, zero_threshold: 1e-20 };
        let chi = CharIndex(vec![1]);
        let res = scan_zeros(100, &chi, &cfg, 128, |t| Ok(Float::with_val(128, t * 10.0).sin())).unwrap();
        let ts: Vec<f64> = res.zeros.iter().map(|z| z.t.to_f64()).collect();
        assert_eq!(ts.len(), 3);
        for (k, t) in ts.iter().enumerate() {
            assert!((t - (k + 1) as f64 * PI / 10.0).abs() < 1e-11);
        }
        assert!(res.central_zero);
        for z in &res.zeros {
            let lo = Float::with_val(128, &z.t - 1e-8);
            let hi = Float::with_val(128, &z.t + 1e-8);
            assert!(Float::with_val(128, lo * 10.0).sin().is_sign_negative() != Float::with_val(128, hi * 10.0).sin().is_sign_negative());
            assert_eq!(z.gamma_tilde, normalize(z.t.to_f64(), 100));
        }
        let flat = scan_zeros(100, &chi, &cfg, 128, |t| Ok(Float::with_val(128, t + 1u32))).unwrap();
        assert!(flat.zeros.is_empty() && !flat.central_zero);
    }

    #[test]
    fn samples_include_endpoint() {
        let cfg = ScanConfig { lo: 0.0, hi: 0.01, ..ScanConfig::new(10_000_003, 6) };
        assert_eq!(cfg.samples(), vec![0.0, 0.01]);
        let s = ScanConfig::new(10_000_003, 6).samples();
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), 1.0);
        assert!((s[1] - default_step(10_000_003)).abs() < 1e-15);
        assert!(ScanConfig { lo: -2.0, ..ScanConfig::new(23, 6) }.validate().is_err());
    }

    fn result(gt: &[f64]) -> ScanResult {
        let chi = CharIndex(vec![1]);
        ScanResult {
            chi: chi.clone(),
            zeros: gt
                .iter()
                .map(|&g| ZeroRecord { q: 100, chi: chi.clone(), t: fl(g), gamma_tilde: g })
                .collect(),
            central_zero: false,
        }
    }

    #[test]
    fn statistics() {
        let (mean, hist) = lowest_zero_stats(&[result(&[1.0])]).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(hist.bins.len(), 36);
        assert!(lowest_zero_stats(&[]).is_err());

        assert_eq!(usp_density(0.0), 0.0);
        assert!((usp_density(0.25) - (1.0 - 2.0 / PI)).abs() < 1e-15);

        let rs = vec![result(&[0.3, 0.9, 2.0]), result(&[0.5]), result(&[])];
        let h = one_level_density(&rs, 1.0);
        assert!(h.bins.iter().all(|b| b.2 >= 0.0));
        assert!((h.bins[0].0, h.bins[35].1) == (0.0, 1.8));
        let total: f64 = h.bins.iter().map(|b| b.2 * BIN_WIDTH).sum();
        assert!((total - 3.0 / 3.0).abs() < 1e-12);

        let anti: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -2.0 * i as f64)).collect();
        assert!((pearson(&anti).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&anti[..2]).is_err());
        assert!(pearson(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }
}
