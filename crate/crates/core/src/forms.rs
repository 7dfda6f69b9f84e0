//! Positive definite binary quadratic forms of discriminant -q and the
//! structure of their class group.
//!
//! Forms are stored with `i64` coefficients; composition and reduction run in
//! `i128` so that discriminants well beyond 10^12 stay exact.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the class number accepted by [`ClassGroup::compute`].
pub const DEFAULT_CLASS_BUDGET: usize = 1_000_000;

/// The conductor `q` of an imaginary quadratic order; the discriminant is `-q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Discriminant(u64);

impl Discriminant {
    /// Accepts `q > 4` with `-q ≡ 0, 1 (mod 4)`.
    pub fn new(q: u64) -> Result<Self> {
        if q <= 4 {
            return Err(Error::input(format!("discriminant -{q}: need q > 4")));
        }
        if q > (1u64 << 53) {
            return Err(Error::input(format!("discriminant -{q} is too large")));
        }
        // -q ≡ 0,1 mod 4  <=>  q ≡ 0,3 mod 4
        if !q.is_multiple_of(4) && q % 4 != 3 {
            return Err(Error::input(format!(
                "-{q} is not a discriminant (must be 0 or 1 mod 4)"
            )));
        }
        let d = Discriminant(q);
        if !d.is_fundamental() {
            log::warn!("-{q} is not a fundamental discriminant; using primitive forms");
        }
        Ok(d)
    }

    pub fn q(self) -> u64 {
        self.0
    }

    /// The (negative) discriminant itself.
    pub fn value(self) -> i128 {
        -(self.0 as i128)
    }

    pub fn is_fundamental(self) -> bool {
        let q = self.0;
        if q % 4 == 3 {
            is_squarefree(q)
        } else {
            // -q = 4m with m ≡ 2,3 mod 4, i.e. q/4 ≡ 2,1 mod 4
            let m = q / 4;
            (m % 4 == 1 || m % 4 == 2) && is_squarefree(m)
        }
    }
}

impl fmt::Display for Discriminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "-{}", self.0)
    }
}

fn is_squarefree(mut n: u64) -> bool {
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    true
}

/// The form `a x² + b x y + c y²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

impl QuadForm {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        QuadForm { a, b, c }
    }

    pub fn discriminant(&self) -> i128 {
        let (a, b, c) = (self.a as i128, self.b as i128, self.c as i128);
        b * b - 4 * a * c
    }

    /// The identity class: `(1, 0, q/4)` or `(1, 1, (q+1)/4)`.
    pub fn principal(q: Discriminant) -> Self {
        let q = q.q() as i64;
        if q % 4 == 0 {
            QuadForm::new(1, 0, q / 4)
        } else {
            QuadForm::new(1, 1, (q + 1) / 4)
        }
    }

    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        a > 0 && b.abs() <= a && a <= c && (b >= 0 || (b.abs() != a && a != c))
    }

    pub fn is_primitive(&self) -> bool {
        gcd(gcd(self.a.unsigned_abs(), self.b.unsigned_abs()), self.c.unsigned_abs()) == 1
    }

    /// Value at the lattice point `(x, y)`.
    #[inline]
    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }

    /// The unique reduced form properly equivalent to `self`.
    pub fn reduce(&self) -> Result<QuadForm> {
        let disc = self.discriminant();
        if disc >= 0 || self.a <= 0 {
            return Err(Error::InvalidForm {
                a: self.a,
                b: self.b,
                c: self.c,
                reason: "not positive definite".into(),
            });
        }
        let (mut a, mut b, mut c) = (self.a as i128, self.b as i128, self.c as i128);
        normalize(&mut a, &mut b, &mut c);
        while a > c || (a == c && b < 0) {
            std::mem::swap(&mut a, &mut c);
            b = -b;
            normalize(&mut a, &mut b, &mut c);
        }
        debug_assert_eq!(b * b - 4 * a * c, disc);
        Ok(QuadForm::new(a as i64, b as i64, c as i64))
    }

    /// Inverse class, already reduced when `self` is.
    pub fn inverse(&self) -> QuadForm {
        let f = QuadForm::new(self.a, -self.b, self.c);
        if f.is_reduced() {
            f
        } else {
            f.reduce().expect("inverse of a definite form is definite")
        }
    }

    /// Gauss composition followed by reduction.
    pub fn compose(&self, other: &QuadForm, q: Discriminant) -> Result<QuadForm> {
        let d = q.value();
        if self.discriminant() != d || other.discriminant() != d {
            return Err(Error::input(format!(
                "cannot compose {self} and {other} in discriminant {q}"
            )));
        }
        Ok(compose_raw(self, other, d))
    }

    /// `self^e`, reduced.
    pub fn pow(&self, mut e: u64, q: Discriminant) -> QuadForm {
        let d = q.value();
        let mut acc = QuadForm::principal(q);
        let mut base = *self;
        while e > 0 {
            if e & 1 == 1 {
                acc = compose_raw(&acc, &base, d);
            }
            e >>= 1;
            if e > 0 {
                base = compose_raw(&base, &base, d);
            }
        }
        acc
    }
}

/// Moves `b` into `(-a, a]` by `x -> x + k y`.
fn normalize(a: &mut i128, b: &mut i128, c: &mut i128) {
    let two_a = 2 * *a;
    let mut k = (*a - *b).div_euclid(two_a);
    // b + 2ak in (-a, a]
    if *b + two_a * k <= -*a {
        k += 1;
    }
    if k != 0 {
        *c += *a * k * k + *b * k;
        *b += two_a * k;
    }
}

fn compose_raw(f: &QuadForm, g: &QuadForm, d: i128) -> QuadForm {
    let (a1, b1, _c1) = (f.a as i128, f.b as i128, f.c as i128);
    let (a2, b2, _c2) = (g.a as i128, g.b as i128, g.c as i128);
    let beta = (b1 + b2) / 2;
    let (g1, u1, v1) = ext_gcd(a1, a2);
    let (e, x, w) = ext_gcd(g1, beta);
    let (u, v) = (x * u1, x * v1);
    let big_a = a1 * a2 / (e * e);
    let num = u * a1 * b2 + v * a2 * b1 + w * ((b1 * b2 + d) / 2);
    debug_assert_eq!(num % e, 0);
    let big_b = (num / e).rem_euclid(2 * big_a);
    let big_c = (big_b * big_b - d) / (4 * big_a);
    debug_assert_eq!(big_b * big_b - 4 * big_a * big_c, d);
    let (mut a, mut b, mut c) = (big_a, big_b, big_c);
    normalize(&mut a, &mut b, &mut c);
    while a > c || (a == c && b < 0) {
        std::mem::swap(&mut a, &mut c);
        b = -b;
        normalize(&mut a, &mut b, &mut c);
    }
    QuadForm::new(a as i64, b as i64, c as i64)
}

/// Returns `(g, u, v)` with `u x + v y = g = gcd(x, y) ≥ 0`.
fn ext_gcd(x: i128, y: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (x, y);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let qt = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
        (t0, t1) = (t1, t0 - qt * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All reduced primitive forms of discriminant `-q`, ordered by `a`, then `b`.
pub fn enumerate_reduced(q: Discriminant) -> Vec<QuadForm> {
    let qq = q.q() as i128;
    let mut out = Vec::new();
    let mut a: i128 = 1;
    // a ≤ sqrt(q/3)
    while 3 * a * a <= qq {
        // b runs over (-a, a] with b ≡ q (mod 2)
        let mut b = -a + 1;
        if (b - qq).rem_euclid(2) != 0 {
            b += 1;
        }
        while b <= a {
            let num = b * b + qq;
            if num % (4 * a) == 0 {
                let c = num / (4 * a);
                let f = QuadForm::new(a as i64, b as i64, c as i64);
                if c >= a && (b >= 0 || a != c) && f.is_primitive() {
                    out.push(f);
                }
            }
            b += 2;
        }
        a += 1;
    }
    out
}

/// The class group with a cyclic decomposition and discrete-log coordinates.
#[derive(Clone, Debug)]
pub struct ClassGroup {
    q: Discriminant,
    forms: Vec<QuadForm>,
    invariant_factors: Vec<u64>,
    generators: Vec<QuadForm>,
    coords: Vec<Vec<u32>>,
    index: HashMap<(i64, i64), usize>,
}

impl ClassGroup {
    pub fn compute(q: Discriminant) -> Result<Self> {
        Self::compute_with_budget(q, DEFAULT_CLASS_BUDGET)
    }

    pub fn compute_with_budget(q: Discriminant, budget: usize) -> Result<Self> {
        let forms = enumerate_reduced(q);
        let h = forms.len();
        if h > budget {
            return Err(Error::Resource(format!(
                "class number h({q}) = {h} exceeds budget {budget}"
            )));
        }
        let index: HashMap<(i64, i64), usize> =
            forms.iter().enumerate().map(|(i, f)| ((f.a, f.b), i)).collect();
        let h_primes = prime_factors(h as u64);
        let orders: Vec<u64> = forms
            .iter()
            .map(|f| element_order(f, h as u64, &h_primes, q))
            .collect();

        let identity = index[&{
            let p = QuadForm::principal(q);
            (p.a, p.b)
        }];
        // Coordinates of the subgroup generated so far; `None` outside it.
        let mut sub: Vec<Option<Vec<u32>>> = vec![None; h];
        sub[identity] = Some(Vec::new());
        let mut members = vec![identity];
        let mut generators = Vec::new();
        let mut factors: Vec<u64> = Vec::new();

        while members.len() < h {
            // Element of maximal order in G / H; ties go to the smallest form.
            let mut best: Option<(usize, u64)> = None;
            for (i, f) in forms.iter().enumerate() {
                if sub[i].is_some() {
                    continue;
                }
                if let Some((_, k)) = best {
                    if orders[i] <= k {
                        continue;
                    }
                }
                let k = quotient_order(f, orders[i], &sub, &index, q);
                if best.is_none_or(|(_, bk)| k > bk) {
                    best = Some((i, k));
                }
            }
            let (gi, k) = best.expect("a non-member exists while H is proper");
            let g = forms[gi];
            // Lift so the new generator has order exactly k in G.
            let y = g.pow(k, q);
            let yc = sub[index[&(y.a, y.b)]].clone().expect("g^k lies in H");
            let mut x = QuadForm::principal(q);
            for (i, (&ci, gen)) in yc.iter().zip(&generators).enumerate() {
                if !(ci as u64).is_multiple_of(k) {
                    return Err(Error::numerical(format!(
                        "class group decomposition: coordinate {ci} of factor {i} not divisible by {k}"
                    )));
                }
                let part: QuadForm = QuadForm::pow(gen, ci as u64 / k, q);
                x = compose_raw(&x, &part, q.value());
            }
            let lifted = compose_raw(&g, &x.inverse(), q.value());
            if lifted.pow(k, q) != QuadForm::principal(q) {
                return Err(Error::numerical(format!("lifted generator {lifted} has wrong order")));
            }

            let old: Vec<usize> = members.clone();
            for &m in &old {
                sub[m].as_mut().unwrap().push(0);
            }
            let mut power = lifted;
            for e in 1..k {
                for &m in &old {
                    let prod = compose_raw(&forms[m], &power, q.value());
                    let pi = index[&(prod.a, prod.b)];
                    let mut c = sub[m].clone().unwrap();
                    *c.last_mut().unwrap() = e as u32;
                    if sub[pi].is_some() {
                        return Err(Error::numerical(format!(
                            "class group decomposition revisited {prod}"
                        )));
                    }
                    sub[pi] = Some(c);
                    members.push(pi);
                }
                power = compose_raw(&power, &lifted, q.value());
            }
            generators.push(lifted);
            factors.push(k);
        }

        let coords = sub.into_iter().map(|c| c.expect("every form has coordinates")).collect();
        Ok(ClassGroup { q, forms, invariant_factors: factors, generators, coords, index })
    }

    pub fn discriminant(&self) -> Discriminant {
        self.q
    }

    pub fn class_number(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[QuadForm] {
        &self.forms
    }

    /// Cyclic orders `m_1, m_2, ...` with `m_{i+1} | m_i`.
    pub fn invariant_factors(&self) -> &[u64] {
        &self.invariant_factors
    }

    pub fn generators(&self) -> &[QuadForm] {
        &self.generators
    }

    /// Exponent vector of the `i`-th reduced form.
    pub fn coords(&self, i: usize) -> &[u32] {
        &self.coords[i]
    }

    pub fn index_of(&self, f: &QuadForm) -> Option<usize> {
        self.index.get(&(f.a, f.b)).copied()
    }

    /// Mixed-radix position of an exponent vector (first factor most significant).
    pub fn linear_index(&self, coords: &[u32]) -> usize {
        coords
            .iter()
            .zip(&self.invariant_factors)
            .fold(0usize, |acc, (&e, &m)| acc * m as usize + e as usize)
    }

    /// `layout[linear_index(coords(i))] = i`.
    pub fn layout(&self) -> Vec<usize> {
        let mut layout = vec![0; self.forms.len()];
        for i in 0..self.forms.len() {
            layout[self.linear_index(&self.coords[i])] = i;
        }
        layout
    }

    /// Product of generators raised to the given exponents.
    pub fn element(&self, coords: &[u32]) -> QuadForm {
        let mut acc = QuadForm::principal(self.q);
        for (g, &e) in self.generators.iter().zip(coords) {
            acc = compose_raw(&acc, &g.pow(e as u64, self.q), self.q.value());
        }
        acc
    }

    pub fn compose(&self, f: &QuadForm, g: &QuadForm) -> Result<QuadForm> {
        f.compose(g, self.q)
    }

    /// Invariant factors as a braced list, e.g. `{412, 2, 2}`; the trivial group prints `{1}`.
    pub fn structure_display(&self) -> String {
        if self.invariant_factors.is_empty() {
            return "{1}".into();
        }
        let parts: Vec<String> = self.invariant_factors.iter().map(|m| m.to_string()).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Number of elements of order at most two.
    pub fn two_torsion(&self) -> usize {
        1usize << self.invariant_factors.iter().filter(|&&m| m % 2 == 0).count()
    }

    /// Complex characters up to conjugation.
    pub fn count_usable_characters(&self) -> usize {
        (self.class_number() - self.two_torsion()) / 2
    }

    /// All characters in lexicographic order of their exponent vectors.
    pub fn characters(&self) -> Vec<CharIndex> {
        let mut out = Vec::with_capacity(self.class_number());
        let r = self.invariant_factors.len();
        let mut cur = vec![0u32; r];
        loop {
            out.push(CharIndex(cur.clone()));
            let mut i = r;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                cur[i] += 1;
                if (cur[i] as u64) < self.invariant_factors[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
    }

    pub fn is_real(&self, chi: &CharIndex) -> bool {
        chi.0
            .iter()
            .zip(&self.invariant_factors)
            .all(|(&a, &m)| (2 * a as u64).is_multiple_of(m))
    }

    pub fn conjugate(&self, chi: &CharIndex) -> CharIndex {
        CharIndex(
            chi.0
                .iter()
                .zip(&self.invariant_factors)
                .map(|(&a, &m)| ((m - a as u64) % m) as u32)
                .collect(),
        )
    }

    /// One character from each complex-conjugate pair (the lexicographically
    /// smaller one), genus characters omitted.
    pub fn usable_characters(&self) -> Vec<CharIndex> {
        self.characters()
            .into_iter()
            .filter(|chi| !self.is_real(chi) && *chi < self.conjugate(chi))
            .collect()
    }

    /// Real characters other than the principal one.
    pub fn genus_characters(&self) -> Vec<CharIndex> {
        self.characters()
            .into_iter()
            .filter(|chi| self.is_real(chi) && !chi.is_principal())
            .collect()
    }

    /// `φ(Q)` as a fraction of a full turn, `Σ a_i e_i / m_i mod 1`, returned
    /// as `(numerator, m_1)`.
    pub fn character_phase(&self, chi: &CharIndex, form_index: usize) -> (u64, u64) {
        let m1 = self.invariant_factors.first().copied().unwrap_or(1);
        let mut num = 0u64;
        for ((&a, &e), &m) in chi.0.iter().zip(&self.coords[form_index]).zip(&self.invariant_factors) {
            num = (num + (a as u64 * e as u64 % m) * (m1 / m)) % m1;
        }
        (num, m1)
    }

    /// Writes the `forms_<q>.tsv` cache.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "BQF1 {} {} {}",
            self.q.q(),
            self.class_number(),
            join_or_dash(&self.invariant_factors)
        )?;
        for (f, c) in self.forms.iter().zip(&self.coords) {
            writeln!(w, "{} {} {} {}", f.a, f.b, f.c, join_or_dash(c))?;
        }
        Ok(())
    }

    /// Reads a `forms_<q>.tsv` cache and re-validates every row.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let header = header?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "BQF1" {
            return Err(Error::Parse { line: 1, msg: format!("bad header {header:?}") });
        }
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let q: u64 = parts[1].parse().map_err(|_| perr(1, "bad q"))?;
        let h: usize = parts[2].parse().map_err(|_| perr(1, "bad h"))?;
        let factors: Vec<u64> = parse_list(parts[3]).ok_or_else(|| perr(1, "bad factor list"))?;
        let q = Discriminant::new(q)?;
        let mut forms = Vec::with_capacity(h);
        let mut coords = Vec::with_capacity(h);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Vec<&str> = line.split_whitespace().collect();
            if p.len() != 4 {
                return Err(perr(i + 1, "expected `a b c e1,...,er`"));
            }
            let nums: Option<Vec<i64>> = p[..3].iter().map(|s| s.parse().ok()).collect();
            let nums = nums.ok_or_else(|| perr(i + 1, "bad coefficient"))?;
            let f = QuadForm::new(nums[0], nums[1], nums[2]);
            if f.discriminant() != q.value() || !f.is_reduced() {
                return Err(perr(i + 1, "form is not reduced of the header discriminant"));
            }
            let c: Vec<u32> = parse_list(p[3]).ok_or_else(|| perr(i + 1, "bad coordinates"))?;
            if c.len() != factors.len() || c.iter().zip(&factors).any(|(&e, &m)| e as u64 >= m) {
                return Err(perr(i + 1, "coordinates out of range"));
            }
            forms.push(f);
            coords.push(c);
        }
        if forms.len() != h || factors.iter().product::<u64>() != h as u64 {
            return Err(perr(1, "class number does not match rows or factors"));
        }
        let index: HashMap<(i64, i64), usize> =
            forms.iter().enumerate().map(|(i, f)| ((f.a, f.b), i)).collect();
        let mut generators = Vec::with_capacity(factors.len());
        for k in 0..factors.len() {
            let unit: Vec<u32> = (0..factors.len()).map(|i| u32::from(i == k)).collect();
            let pos = coords
                .iter()
                .position(|c| *c == unit)
                .ok_or_else(|| perr(1, "missing generator row"))?;
            generators.push(forms[pos]);
        }
        let g = ClassGroup { q, forms, invariant_factors: factors, generators, coords, index };
        g.validate()?;
        Ok(g)
    }

    /// Checks that generator powers reproduce every form.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.class_number()];
        for (i, f) in self.forms.iter().enumerate() {
            if self.element(&self.coords[i]) != *f {
                return Err(Error::numerical(format!("coordinates of {f} do not reproduce it")));
            }
            let li = self.linear_index(&self.coords[i]);
            if std::mem::replace(&mut seen[li], true) {
                return Err(Error::numerical("coordinate map is not injective"));
            }
        }
        Ok(())
    }
}

fn join_or_dash<T: ToString>(xs: &[T]) -> String {
    if xs.is_empty() {
        "-".into()
    } else {
        xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.parse().ok()).collect()
}

/// Exponent vector `(a_1, ..., a_r)` naming the character
/// `Q ↦ exp(2πi Σ a_i coords(Q)_i / m_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharIndex(pub Vec<u32>);

impl CharIndex {
    pub fn is_principal(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

impl fmt::Display for CharIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(":"))
    }
}

impl std::str::FromStr for CharIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.split(':')
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::input(format!("bad character index {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(CharIndex)
    }
}

pub(crate) fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn element_order(f: &QuadForm, h: u64, primes: &[u64], q: Discriminant) -> u64 {
    let id = QuadForm::principal(q);
    let mut ord = h;
    for &p in primes {
        while ord.is_multiple_of(p) && f.pow(ord / p, q) == id {
            ord /= p;
        }
    }
    ord
}

fn quotient_order(
    f: &QuadForm,
    order: u64,
    sub: &[Option<Vec<u32>>],
    index: &HashMap<(i64, i64), usize>,
    q: Discriminant,
) -> u64 {
    let in_sub = |g: QuadForm| sub[index[&(g.a, g.b)]].is_some();
    let mut k = order;
    for p in prime_factors(order) {
        while k.is_multiple_of(p) && in_sub(f.pow(k / p, q)) {
            k /= p;
        }
    }
    k
}
