//! Discrete Fourier transforms over finite abelian groups `Z/m_1 × … × Z/m_r`.
//!
//! All transforms use the positive exponent, `X[a] = Σ_k x[k] e^{+2πi a k / n}`,
//! which matches the character convention of the class group.  Short axes are
//! done naively, powers of two by an iterative radix-2 kernel and every other
//! length through a chirp (Bluestein) convolution.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

/// Axes no longer than this are transformed by the O(n²) sum.
pub const NAIVE_CUTOFF: usize = 64;

/// `e^{2πi j / n}` with `j` reduced first so large indices keep full accuracy.
fn root(j: u64, n: u64) -> Complex64 {
    let j = j % n;
    Complex64::from_polar(1.0, TAU * j as f64 / n as f64)
}

/// Iterative in-place radix-2 transform with a precomputed twiddle table.
#[derive(Clone, Debug)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let twiddles = (0..n / 2).map(|j| root(j as u64, n as u64)).collect();
        let rev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Radix2 { n, twiddles, rev }
    }

    /// `inverse` flips the exponent sign; no scaling is applied.
    fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Naive { roots: Vec<Complex64> },
    Radix2(Radix2),
    Bluestein { chirp: Vec<Complex64>, kernel: Vec<Complex64>, inner: Radix2 },
}

/// A planned one-dimensional transform of fixed length.
#[derive(Clone, Debug)]
pub struct Dft {
    n: usize,
    kind: Kind,
}

impl Dft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform length must be positive");
        let kind = if n <= NAIVE_CUTOFF {
            Kind::Naive { roots: (0..n).map(|j| root(j as u64, n as u64)).collect() }
        } else if n.is_power_of_two() {
            Kind::Radix2(Radix2::new(n))
        } else {
            // e^{2πi ak/n} = c_a c_k conj(c_{a-k}) with c_j = e^{πi j²/n}.
            let two_n = 2 * n as u64;
            let chirp: Vec<Complex64> = (0..n as u64)
                .map(|j| {
                    let r = (j * j) % two_n;
                    Complex64::from_polar(1.0, PI * r as f64 / n as f64)
                })
                .collect();
            let m = (2 * n - 1).next_power_of_two();
            let inner = Radix2::new(m);
            let mut kernel = vec![Complex64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for j in 1..n {
                kernel[j] = chirp[j].conj();
                kernel[m - j] = chirp[j].conj();
            }
            inner.process(&mut kernel, false);
            Kind::Bluestein { chirp, kernel, inner }
        };
        Dft { n, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Transforms `data` in place; `data.len()` must equal the planned length.
    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n);
        match &self.kind {
            Kind::Naive { roots } => {
                let n = self.n;
                let input = data.to_vec();
                for (a, out) in data.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut idx = 0;
                    for x in &input {
                        acc += x * roots[idx];
                        idx += a;
                        if idx >= n {
                            idx -= n;
                        }
                    }
                    *out = acc;
                }
            }
            Kind::Radix2(r) => r.process(data, false),
            Kind::Bluestein { chirp, kernel, inner } => {
                let m = kernel.len();
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                for (k, x) in data.iter().enumerate() {
                    buf[k] = x * chirp[k];
                }
                inner.process(&mut buf, false);
                for (b, k) in buf.iter_mut().zip(kernel) {
                    *b *= k;
                }
                inner.process(&mut buf, true);
                let scale = 1.0 / m as f64;
                for (a, out) in data.iter_mut().enumerate() {
                    *out = buf[a] * chirp[a] * scale;
                }
            }
        }
    }
}

/// Multidimensional transform over `Z/m_1 × … × Z/m_r`, row-major layout
/// (the last axis varies fastest).
#[derive(Clone, Debug)]
pub struct GroupDft {
    dims: Vec<usize>,
    plans: Vec<Dft>,
}

impl GroupDft {
    pub fn new(dims: &[u64]) -> Self {
        let dims: Vec<usize> = dims.iter().map(|&m| m as usize).collect();
        let plans = dims.iter().map(|&m| Dft::new(m)).collect();
        GroupDft { dims, plans }
    }

    /// Group order.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn transform(&self, data: &mut [Complex64]) {
        let total = self.len();
        assert_eq!(data.len(), total);
        let mut line = Vec::new();
        let mut stride = total;
        for (axis, &m) in self.dims.iter().enumerate() {
            stride /= m;
            if m == 1 {
                continue;
            }
            line.resize(m, Complex64::new(0.0, 0.0));
            let block = m * stride;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[start + i * stride];
                    }
                    self.plans[axis].process(&mut line);
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }
}

/// The O(h²) character sum, used as a reference.
pub fn naive_group_dft(dims: &[u64], data: &[Complex64]) -> Vec<Complex64> {
    let total: usize = dims.iter().map(|&m| m as usize).product();
    assert_eq!(data.len(), total);
    let unravel = |mut i: usize| -> Vec<u64> {
        let mut c = vec![0u64; dims.len()];
        for (slot, &m) in c.iter_mut().zip(dims).rev() {
            *slot = (i % m as usize) as u64;
            i /= m as usize;
        }
        c
    };
    let coords: Vec<Vec<u64>> = (0..total).map(unravel).collect();
    // Phase as a fraction of a full turn over the common denominator.
    let l = dims.iter().fold(1u64, |acc, &m| acc / crate::forms::gcd(acc, m) * m);
    (0..total)
        .map(|a| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, x) in data.iter().enumerate() {
                let mut num = 0u64;
                for ((&ai, &ki), &m) in coords[a].iter().zip(&coords[k]).zip(dims) {
                    num = (num + (ai * ki % m) * (l / m)) % l;
                }
                acc += x * root(num, l);
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn max_rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    fn check(dims: &[u64], seed: u64) {
        let plan = GroupDft::new(dims);
        let input = random(plan.len(), seed);
        let want = naive_group_dft(dims, &input);
        let mut got = input.clone();
        plan.transform(&mut got);
        let err = max_rel_err(&got, &want);
        assert!(err < 1e-12, "dims {dims:?}: relative error {err:e}");
    }

    #[test]
    fn one_dimensional_lengths() {
        for (i, &n) in [1u64, 2, 3, 5, 64, 65, 128, 353, 706, 1000].iter().enumerate() {
            check(&[n], i as u64);
        }
    }

    #[test]
    fn class_group_shapes() {
        check(&[258, 2, 2, 2], 11);
        check(&[126, 6, 2], 12);
        check(&[330, 3], 13);
        check(&[412, 2, 2], 14);
    }

    #[test]
    fn delta_and_constant() {
        let plan = GroupDft::new(&[258, 2, 2, 2]);
        let h = plan.len();
        let mut delta = vec![Complex64::new(0.0, 0.0); h];
        delta[0] = Complex64::new(1.0, 0.0);
        plan.transform(&mut delta);
        assert!(delta.iter().all(|z| (z - 1.0).norm() < 1e-12));

        let mut ones = vec![Complex64::new(1.0, 0.0); h];
        plan.transform(&mut ones);
        assert!((ones[0] - h as f64).norm() < 1e-9);
        assert!(ones[1..].iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn positive_exponent_convention() {
        let mut x = vec![Complex64::new(0.0, 0.0); 353];
        x[1] = Complex64::new(1.0, 0.0);
        Dft::new(353).process(&mut x);
        for (a, z) in x.iter().enumerate() {
            assert!((z - root(a as u64, 353)).norm() < 1e-13);
        }
    }
}
