//! Small dense complex matrices: products, commutators, LU determinant and
//! inverse, and eigenvalues by Hessenberg reduction plus shifted QR.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{Float, One, Zero};

use crate::{Error, Result, C64};

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![C64::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![C64::one(); n])
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Build from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<C64>) -> Result<Self> {
        let n = Float::sqrt(data.len() as f64).round() as usize;
        if n * n != data.len() {
            return Err(Error::Model(alloc::format!("{} entries do not form a square matrix", data.len())));
        }
        Ok(Matrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Matrix { n: self.n, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Matrix) -> Matrix {
        &(self * other) - &(other * self)
    }

    /// `D A D⁻¹` for `D = diag(d)`.
    pub fn conjugate_diag(&self, d: &[C64]) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = d[i] * self[(i, j)] / d[j];
            }
        }
        out
    }

    /// `self^k` for `k ≥ 0`.
    pub fn pow(&self, k: u32) -> Matrix {
        let mut out = Matrix::identity(self.n);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn lu(&self) -> (Matrix, Vec<usize>, f64, bool) {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm())).unwrap_or(k);
            if a[(p, k)].is_zero() {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        (a, perm, sign, singular)
    }

    pub fn det(&self) -> C64 {
        let (lu, _, sign, singular) = self.lu();
        if singular {
            return C64::zero();
        }
        lu.diag().into_iter().fold(C64::new(sign, 0.0), |acc, v| acc * v)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.n;
        let (lu, perm, _, singular) = self.lu();
        if singular {
            return Err(Error::Model("singular matrix".into()));
        }
        let mut inv = Matrix::zeros(n);
        for col in 0..n {
            let mut x: Vec<C64> = (0..n).map(|i| if perm[i] == col { C64::one() } else { C64::zero() }).collect();
            for i in 0..n {
                for j in 0..i {
                    let xj = x[j];
                    x[i] -= lu[(i, j)] * xj;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let xj = x[j];
                    x[i] -= lu[(i, j)] * xj;
                }
                x[i] /= lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        Ok(inv)
    }

    /// Upper Hessenberg form by Householder reflections (similar matrix).
    pub fn hessenberg(&self) -> Matrix {
        let n = self.n;
        let mut a = self.clone();
        for k in 0..n.saturating_sub(2) {
            let norm = Float::sqrt((k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>());
            if norm == 0.0 {
                continue;
            }
            let x0 = a[(k + 1, k)];
            let phase = if x0.is_zero() { C64::one() } else { x0 / x0.norm() };
            let alpha = -phase * norm;
            let mut v: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
            v[0] -= alpha;
            let vn = Float::sqrt(v.iter().map(|c| c.norm_sqr()).sum::<f64>());
            if vn == 0.0 {
                continue;
            }
            for c in v.iter_mut() {
                *c /= vn;
            }
            // A ← (I − 2vv*) A
            for j in 0..n {
                let s: C64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * a[(k + 1 + t, j)]).sum();
                for (t, vi) in v.iter().enumerate() {
                    a[(k + 1 + t, j)] -= 2.0 * vi * s;
                }
            }
            // A ← A (I − 2vv*)
            for i in 0..n {
                let s: C64 = v.iter().enumerate().map(|(t, vi)| a[(i, k + 1 + t)] * vi).sum();
                for (t, vi) in v.iter().enumerate() {
                    a[(i, k + 1 + t)] -= 2.0 * s * vi.conj();
                }
            }
            for i in k + 2..n {
                a[(i, k)] = C64::zero();
            }
        }
        a
    }

    /// All eigenvalues (with multiplicity), unordered.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let n = self.n;
        let mut h = self.hessenberg();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Ok(out);
        }
        let eps = f64::EPSILON;
        let mut hi = n - 1;
        let mut iter = 0usize;
        let mut rot: Vec<(C64, C64)> = Vec::with_capacity(n);
        while hi > 0 {
            let mut l = hi;
            while l > 0 {
                let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
                let s = if s == 0.0 { self.max_norm() } else { s };
                if h[(l, l - 1)].norm() <= eps * s {
                    h[(l, l - 1)] = C64::zero();
                    break;
                }
                l -= 1;
            }
            if l == hi {
                out.push(h[(hi, hi)]);
                hi -= 1;
                iter = 0;
                continue;
            }
            iter += 1;
            if iter > 60 * n.max(4) {
                return Err(Error::Model("eigenvalue iteration did not converge".into()));
            }
            let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
            let mut mu = if iter % 11 == 0 {
                d + h[(hi, hi - 1)].norm() * 0.75
            } else {
                let half = 0.5 * (a + d);
                let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
                let (m1, m2) = (half + disc, half - disc);
                if (m1 - d).norm() < (m2 - d).norm() {
                    m1
                } else {
                    m2
                }
            };
            if !(mu.re.is_finite() && mu.im.is_finite()) {
                mu = d;
            }
            for k in l..=hi {
                h[(k, k)] -= mu;
            }
            rot.clear();
            for k in l..hi {
                let (x, y) = (h[(k, k)], h[(k + 1, k)]);
                let r = Float::sqrt(x.norm_sqr() + y.norm_sqr());
                let (cs, sn) = if r == 0.0 { (C64::one(), C64::zero()) } else { (x / r, y / r) };
                for j in k..=hi {
                    let (p, q) = (h[(k, j)], h[(k + 1, j)]);
                    h[(k, j)] = cs.conj() * p + sn.conj() * q;
                    h[(k + 1, j)] = -sn * p + cs * q;
                }
                rot.push((cs, sn));
            }
            for (t, &(cs, sn)) in rot.iter().enumerate() {
                let k = l + t;
                for i in l..=(k + 1).min(hi) {
                    let (p, q) = (h[(i, k)], h[(i, k + 1)]);
                    h[(i, k)] = p * cs + q * sn;
                    h[(i, k + 1)] = -p * sn.conj() + q * cs.conj();
                }
            }
            for k in l..=hi {
                h[(k, k)] += mu;
            }
        }
        out.push(h[(0, 0)]);
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// Distance between two eigenvalue multisets: the largest gap under the
/// best pairing (exhaustive up to 7 values, greedy beyond).
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    multiset_distance_by(a, b, |x, y| (x - y).norm())
}

/// [`multiset_distance`] with a custom gap between paired values.
pub fn multiset_distance_by(a: &[C64], b: &[C64], gap: impl Fn(C64, C64) -> f64) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    if n <= 7 {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| {
            let d = p.iter().enumerate().fold(0.0f64, |m, (i, &j)| m.max(gap(a[i], b[j])));
            best = best.min(d);
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut worst = 0.0f64;
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, gap(*x, *y)))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap_or((0, f64::INFINITY));
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

fn permute(idx: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}
