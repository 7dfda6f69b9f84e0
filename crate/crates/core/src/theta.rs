//! Representation numbers of reduced forms and their transforms into
//! per-character Dirichlet coefficients.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::GroupDft;
use crate::forms::{CharIndex, ClassGroup, Discriminant, QuadForm};

/// Default ceiling on the size of a representation table, in bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// How lattice counts are scaled into coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Counts of ideals: lattice counts divided by the two units `±1`.
    #[default]
    Ideal,
    /// Raw counts of lattice vectors.
    Lattice,
}

impl Normalization {
    pub fn divisor(self) -> f64 {
        match self {
            Normalization::Ideal => 2.0,
            Normalization::Lattice => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Normalization::Ideal => 0,
            Normalization::Lattice => 1,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Normalization::Ideal),
            1 => Ok(Normalization::Lattice),
            _ => Err(Error::input(format!("unknown normalization code {c}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Ideal => "ideal",
            Normalization::Lattice => "lattice",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Normalization::Ideal),
            "lattice" => Ok(Normalization::Lattice),
            _ => Err(Error::input(format!("normalization must be ideal or lattice, got {s:?}"))),
        }
    }
}

/// Smallest non-negative `k` with `k² ≥ num / den`.
fn ceil_sqrt_ratio(num: u128, den: u128) -> u64 {
    let approx = ((num as f64) / (den as f64)).sqrt().ceil() as u128;
    let mut k = approx.saturating_sub(2);
    while k * k * den < num {
        k += 1;
    }
    k as u64
}

/// Box containing every `(x, y)` with `f(x, y) ≤ n`:
/// `|x| ≤ ceil(2√(n c / q))`, `|y| ≤ ceil(2√(n a / q))`.
pub fn grid_bounds(q: Discriminant, n: u64, f: &QuadForm) -> (u64, u64) {
    let q = q.q() as u128;
    let n = n as u128;
    let x = ceil_sqrt_ratio(4 * n * f.c as u128, q);
    let y = ceil_sqrt_ratio(4 * n * f.a as u128, q);
    (x, y)
}

/// `counts[i][n - 1]` is the number of nonzero `(x, y)` with `Q_i(x, y) = n`,
/// `Q_i` the i-th reduced form of the class group.
#[derive(Clone, Debug)]
pub struct RepTable {
    q: Discriminant,
    n_max: usize,
    counts: Vec<Vec<u32>>,
}

impl RepTable {
    pub fn compute(g: &ClassGroup, n_max: usize) -> Result<Self> {
        Self::compute_with_budget(g, n_max, DEFAULT_MEMORY_BUDGET)
    }

    pub fn compute_with_budget(g: &ClassGroup, n_max: usize, budget_bytes: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::input("representation table needs N ≥ 1"));
        }
        let bytes = g.class_number().saturating_mul(n_max).saturating_mul(4);
        if bytes > budget_bytes {
            return Err(Error::Resource(format!(
                "representation table needs {bytes} bytes, budget is {budget_bytes}"
            )));
        }
        let q = g.discriminant();
        let counts = g
            .forms()
            .par_iter()
            .map(|f| form_counts(q, f, n_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(RepTable { q, n_max, counts })
    }

    pub fn discriminant(&self) -> Discriminant {
        self.q
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `r_Q(n)` for the form at `form_index`, `1 ≤ n ≤ N`.
    pub fn get(&self, form_index: usize, n: usize) -> u32 {
        self.counts[form_index][n - 1]
    }

    pub fn row(&self, form_index: usize) -> &[u32] {
        &self.counts[form_index]
    }
}

fn form_counts(q: Discriminant, f: &QuadForm, n_max: usize) -> Result<Vec<u32>> {
    let mut row = vec![0u32; n_max];
    let (xm, ym) = grid_bounds(q, n_max as u64, f);
    let (a, b, c) = (f.a as i128, f.b as i128, f.c as i128);
    let (xm, ym) = (xm as i128, ym as i128);
    let limit = n_max as i128;
    // Half plane y > 0 or (y = 0, x > 0); the other half is its negative.
    for y in 0..=ym {
        let x_lo = if y == 0 { 1 } else { -xm };
        let cy = c * y * y;
        for x in x_lo..=xm {
            let v = a * x * x + b * x * y + cy;
            if v >= 1 && v <= limit {
                let slot = &mut row[(v - 1) as usize];
                *slot = slot
                    .checked_add(2)
                    .ok_or_else(|| Error::Resource(format!("representation count overflow at n={v}")))?;
            }
        }
    }
    Ok(row)
}

/// Dirichlet coefficients `r_φ(n)`, `1 ≤ n ≤ N`, for a chosen set of
/// characters.  A character and its conjugate share one row.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    pub q: Discriminant,
    pub n_max: usize,
    pub normalization: Normalization,
    pub invariant_factors: Vec<u64>,
    chars: Vec<CharIndex>,
    rows: Vec<Vec<f64>>,
    index: HashMap<CharIndex, usize>,
    /// Largest `|Im r_φ(n)|` seen before the imaginary parts were dropped.
    pub max_imag: f64,
}

impl CoeffTable {
    /// Assembles a table from stored rows, e.g. read back from a cache file.
    pub fn from_rows(
        q: Discriminant,
        n_max: usize,
        normalization: Normalization,
        invariant_factors: Vec<u64>,
        chars: Vec<CharIndex>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if chars.len() != rows.len() || rows.iter().any(|r| r.len() != n_max) {
            return Err(Error::input("coefficient rows do not match the header"));
        }
        let mut t = CoeffTable {
            q,
            n_max,
            normalization,
            invariant_factors,
            chars,
            rows,
            index: HashMap::new(),
            max_imag: 0.0,
        };
        t.rebuild_index();
        Ok(t)
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (i, chi) in self.chars.iter().enumerate() {
            self.index.insert(chi.clone(), i);
            let conj = conjugate(&self.invariant_factors, chi);
            self.index.entry(conj).or_insert(i);
        }
    }

    /// Stored characters, in the order their rows are kept.
    pub fn characters(&self) -> &[CharIndex] {
        &self.chars
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The row of `chi` or of its conjugate.
    pub fn row(&self, chi: &CharIndex) -> Option<&[f64]> {
        self.index.get(chi).map(|&i| self.rows[i].as_slice())
    }

    pub fn row_or_err(&self, chi: &CharIndex) -> Result<&[f64]> {
        self.row(chi)
            .ok_or_else(|| Error::input(format!("character {chi} is not in the coefficient table")))
    }
}

fn conjugate(m: &[u64], chi: &CharIndex) -> CharIndex {
    CharIndex(chi.0.iter().zip(m).map(|(&a, &m)| ((m - a as u64) % m) as u32).collect())
}

/// Principal character, genus characters and one of each conjugate pair.
pub fn stored_characters(g: &ClassGroup, include_real: bool) -> Vec<CharIndex> {
    g.characters()
        .into_iter()
        .filter(|chi| {
            if g.is_real(chi) {
                include_real
            } else {
                *chi < g.conjugate(chi)
            }
        })
        .collect()
}

/// Realness tolerance for one coefficient: the larger of the requested
/// decimal threshold and the rounding floor of a double-precision transform
/// whose inputs sum to `l1`.
fn imag_tolerance(digits: u32, re: f64, l1: f64, h: usize) -> f64 {
    let requested = 10f64.powi(-(digits as i32 + 2)) * re.abs().max(1.0);
    let floor = 64.0 * f64::EPSILON * (1.0 + (h as f64).log2()) * l1;
    requested.max(floor)
}

/// `r_φ(n) = Σ_Q φ(Q) r_Q(n)`, divided by the unit count when `normalization`
/// is ideal, for every `chi` in `chars`.
pub fn char_coeffs(
    g: &ClassGroup,
    rep: &RepTable,
    normalization: Normalization,
    digits: u32,
    chars: &[CharIndex],
) -> Result<CoeffTable> {
    if rep.discriminant() != g.discriminant() {
        return Err(Error::input("representation table and class group disagree on q"));
    }
    let h = g.class_number();
    let n_max = rep.n_max();
    let plan = GroupDft::new(g.invariant_factors());
    let layout = g.layout();
    let m = g.invariant_factors().to_vec();
    let targets: Vec<(usize, usize, bool)> = chars
        .iter()
        .map(|chi| {
            if chi.0.len() != m.len() || chi.0.iter().zip(&m).any(|(&a, &mi)| a as u64 >= mi) {
                return Err(Error::input(format!("character {chi} does not fit the group {}", g.structure_display())));
            }
            Ok((g.linear_index(&chi.0), g.linear_index(&g.conjugate(chi).0), g.is_real(chi)))
        })
        .collect::<Result<_>>()?;
    let scale = normalization.divisor();

    const CHUNK: usize = 256;
    let columns: Vec<(Vec<Vec<f64>>, f64)> = (0..n_max)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|ns| {
            let mut buf = vec![Complex64::new(0.0, 0.0); h];
            let mut cols = Vec::with_capacity(ns.len());
            let mut worst = 0.0f64;
            for &n in ns {
                let mut l1 = 0.0;
                for (slot, &form) in buf.iter_mut().zip(&layout) {
                    let v = rep.counts[form][n] as f64;
                    l1 += v;
                    *slot = Complex64::new(v, 0.0);
                }
                if l1 == 0.0 {
                    cols.push(vec![0.0; targets.len()]);
                    continue;
                }
                plan.transform(&mut buf);
                for z in buf.iter() {
                    if z.im.abs() > imag_tolerance(digits, z.re, l1, h) {
                        return Err(Error::numerical(format!(
                            "coefficient at n={} has imaginary part {:e}",
                            n + 1,
                            z.im
                        )));
                    }
                    worst = worst.max(z.im.abs());
                }
                let col = targets
                    .iter()
                    .map(|&(i, j, real)| {
                        // Averaging with the conjugate makes both rows bitwise equal.
                        let v = 0.5 * (buf[i].re + buf[j].re);
                        let v = if real { v.round() } else { v };
                        v / scale
                    })
                    .collect();
                cols.push(col);
            }
            Ok((cols, worst))
        })
        .collect::<Result<_>>()?;

    let mut rows = vec![Vec::with_capacity(n_max); chars.len()];
    let mut max_imag = 0.0f64;
    for (cols, worst) in columns {
        max_imag = max_imag.max(worst);
        for col in cols {
            for (row, v) in rows.iter_mut().zip(col) {
                row.push(v);
            }
        }
    }
    let mut table = CoeffTable::from_rows(g.discriminant(), n_max, normalization, m, chars.to_vec(), rows)?;
    table.max_imag = max_imag;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(q: u64) -> ClassGroup {
        ClassGroup::compute(Discriminant::new(q).unwrap()).unwrap()
    }

    fn brute_counts(f: &QuadForm, n_max: i64) -> Vec<u32> {
        let mut out = vec![0u32; n_max as usize];
        let r = 2 * n_max + 2;
        for x in -r..=r {
            for y in -r..=r {
                let v = f.eval(x, y);
                if (x, y) != (0, 0) && v >= 1 && v <= n_max {
                    out[(v - 1) as usize] += 1;
                }
            }
        }
        out
    }

    #[test]
    fn grid_bounds_examples() {
        let q = Discriminant::new(23).unwrap();
        let f = QuadForm::new(1, 1, 6);
        assert_eq!(grid_bounds(q, 6, &f), (3, 2));
        assert_eq!(grid_bounds(q, 0, &f), (0, 0));
    }

    #[test]
    fn grid_bounds_contain_all_representations() {
        for q in [23u64, 47, 71, 84, 191, 260] {
            let d = Discriminant::new(q).unwrap();
            for f in group(q).forms() {
                for n in 1..30u64 {
                    let (xm, ym) = grid_bounds(d, n, f);
                    let r = 3 * n as i64 + 3;
                    for x in -r..=r {
                        for y in -r..=r {
                            if (x, y) != (0, 0) && f.eval(x, y) as u64 <= n {
                                assert!(x.unsigned_abs() <= xm && y.unsigned_abs() <= ym);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rep_numbers_q23() {
        let g = group(23);
        let rep = RepTable::compute(&g, 6).unwrap();
        let i = g.index_of(&QuadForm::new(1, 1, 6)).unwrap();
        assert_eq!(rep.get(i, 1), 2);
        // (0, ±1) and ±(1, -1)
        assert_eq!(rep.get(i, 6), 4);
        assert_eq!(rep.get(i, 2), 0);
        let j = g.index_of(&QuadForm::new(2, 1, 3)).unwrap();
        let k = g.index_of(&QuadForm::new(2, -1, 3)).unwrap();
        assert_eq!((rep.get(j, 2), rep.get(k, 2)), (2, 2));
    }

    #[test]
    fn rep_numbers_match_brute_force() {
        for q in [23u64, 39, 84, 136, 155, 420] {
            let g = group(q);
            let rep = RepTable::compute(&g, 40).unwrap();
            for (i, f) in g.forms().iter().enumerate() {
                assert_eq!(rep.row(i), brute_counts(f, 40).as_slice(), "q={q} f={f}");
                assert!(rep.row(i).iter().all(|c| c % 2 == 0));
                let inv = g.index_of(&f.inverse().reduce().unwrap()).unwrap();
                assert_eq!(rep.row(i), rep.row(inv));
            }
        }
    }

    #[test]
    fn rep_budget_is_resource_error() {
        let g = group(23);
        let err = RepTable::compute_with_budget(&g, 1000, 100).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn q23_character_coefficient() {
        let g = group(23);
        let rep = RepTable::compute(&g, 6).unwrap();
        let all = g.characters();
        let t = char_coeffs(&g, &rep, Normalization::Lattice, 15, &all).unwrap();
        let chi = CharIndex(vec![1]);
        assert!((t.row(&chi).unwrap()[1] + 2.0).abs() < 1e-12);
        let principal = t.row(&CharIndex(vec![0])).unwrap();
        assert_eq!(principal, &[2.0, 4.0, 4.0, 6.0, 0.0, 8.0]);
        let ideal = char_coeffs(&g, &rep, Normalization::Ideal, 15, &all).unwrap();
        assert!((ideal.row(&chi).unwrap()[1] + 1.0).abs() < 1e-12);
    }

    fn naive_coeff(g: &ClassGroup, rep: &RepTable, chi: &CharIndex, n: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g.class_number() {
            let (num, den) = g.character_phase(chi, i);
            let phase = std::f64::consts::TAU * num as f64 / den as f64;
            acc += Complex64::from_polar(rep.get(i, n) as f64, phase);
        }
        acc
    }

    #[test]
    fn coefficients_match_naive_character_sum() {
        for q in [84u64, 251, 479, 3299] {
            let g = group(q);
            let rep = RepTable::compute(&g, 60).unwrap();
            let all = g.characters();
            let t = char_coeffs(&g, &rep, Normalization::Lattice, 12, &all).unwrap();
            for chi in &all {
                let row = t.row(chi).unwrap();
                for n in 1..=60 {
                    let want = naive_coeff(&g, &rep, chi, n);
                    assert!(want.im.abs() < 1e-9);
                    assert!((row[n - 1] - want.re).abs() < 1e-9, "q={q} chi={chi} n={n}");
                }
            }
        }
    }

    #[test]
    fn realness_conjugates_parseval_and_hecke() {
        for q in [84u64, 3299, 10007 * 4 + 3] {
            let g = group(q);
            let h = g.class_number();
            let n_max = 200;
            let rep = RepTable::compute(&g, n_max).unwrap();
            let all = g.characters();
            let t = char_coeffs(&g, &rep, Normalization::Lattice, 12, &all).unwrap();
            assert!(t.max_imag < 1e-10);
            for chi in &all {
                assert_eq!(t.row(chi), t.row(&g.conjugate(chi)));
            }
            assert!(t.row(&CharIndex(vec![0; g.invariant_factors().len()])).unwrap().iter().all(|&v| v >= 0.0));
            for n in 1..=n_max {
                let lhs: f64 = all.iter().map(|c| t.row(c).unwrap()[n - 1].powi(2)).sum();
                let rhs = h as f64 * (0..h).map(|i| (rep.get(i, n) as f64).powi(2)).sum::<f64>();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0), "q={q} n={n}");
                let divisors = (1..=n).filter(|d| n % d == 0).count() as f64;
                for c in &all {
                    assert!(t.row(c).unwrap()[n - 1].abs() <= 2.0 * divisors + 1e-9);
                }
            }
        }
    }

    #[test]
    fn stored_set_has_one_of_each_pair() {
        let g = group(10000088);
        let usable = stored_characters(&g, false);
        assert_eq!(usable.len(), 752);
        assert_eq!(usable, g.usable_characters());
        assert_eq!(stored_characters(&g, true).len(), 752 + 8);
    }

    #[test]
    fn rejects_foreign_character() {
        let g = group(23);
        let rep = RepTable::compute(&g, 5).unwrap();
        let err = char_coeffs(&g, &rep, Normalization::Ideal, 6, &[CharIndex(vec![5])]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
