//! Root systems of types A, D, E and BC with exact coordinates, root-indexed
//! matrices, and structure constants of simply-laced Lie algebras.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::linalg::Matrix;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    A,
    D,
    E6,
    E7,
    E8,
    BC,
}

impl Family {
    pub fn is_simply_laced(self) -> bool {
        !matches!(self, Family::BC)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::D => "D",
            Family::E6 => "E6",
            Family::E7 => "E7",
            Family::E8 => "E8",
            Family::BC => "BC",
        };
        f.write_str(s)
    }
}

/// Weyl orbit a root belongs to, by length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orbit {
    Long,
    Middle,
    Short,
    Single,
}

/// A vector of half-integers, stored as twice its coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Root(Vec<i32>);

impl Root {
    /// From integer coordinates.
    pub fn from_ints(v: &[i32]) -> Root {
        Root(v.iter().map(|x| 2 * x).collect())
    }

    /// From twice the coordinates.
    pub fn from_doubled(v: Vec<i32>) -> Root {
        Root(v)
    }

    /// `±e_j` or `±2e_j` style unit multiples.
    pub fn unit(dim: usize, j: usize, k: i32) -> Root {
        let mut v = vec![0; dim];
        v[j] = 2 * k;
        Root(v)
    }

    pub fn doubled(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> Vec<f64> {
        self.0.iter().map(|&x| x as f64 * 0.5).collect()
    }

    /// Four times the inner product, exact.
    fn dot4(&self, other: &Root) -> i32 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Inner product; every system here spans an integral lattice.
    pub fn dot(&self, other: &Root) -> i32 {
        let d = self.dot4(other);
        debug_assert!(d % 4 == 0, "non-integral inner product");
        d / 4
    }

    pub fn norm2(&self) -> i32 {
        self.dot(self)
    }

    /// `v · self` for a complex vector `v` in the same space.
    pub fn pair(&self, v: &[C64]) -> C64 {
        self.0.iter().zip(v).map(|(&a, &x)| x * (a as f64 * 0.5)).sum()
    }

    pub fn neg(&self) -> Root {
        Root(self.0.iter().map(|x| -x).collect())
    }

    pub fn add(&self, o: &Root) -> Root {
        Root(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Root) -> Root {
        Root(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i32) -> Root {
        Root(self.0.iter().map(|x| k * x).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Reflection of `self` in the hyperplane orthogonal to `alpha`.
    pub fn reflect(&self, alpha: &Root) -> Root {
        let k = 2 * self.dot4(alpha) / alpha.dot4(alpha);
        self.sub(&alpha.scale(k))
    }

    /// Coordinates as exact rational strings (`"1/2"`, `"-1"`, `"0"`).
    pub fn to_rational_strings(&self) -> Vec<String> {
        self.0
            .iter()
            .map(|&x| if x % 2 == 0 { (x / 2).to_string() } else { format!("{x}/2") })
            .collect()
    }

    /// Parse rational coordinate strings with denominator 1 or 2.
    pub fn from_rational_strings<S: AsRef<str>>(v: &[S]) -> Result<Root> {
        let parse = |s: &str| -> Option<i32> {
            match s.split_once('/') {
                None => s.trim().parse::<i32>().ok().map(|x| 2 * x),
                Some((n, "2")) => n.trim().parse::<i32>().ok(),
                Some((n, "1")) => n.trim().parse::<i32>().ok().map(|x| 2 * x),
                _ => None,
            }
        };
        v.iter()
            .map(|s| parse(s.as_ref()).ok_or_else(|| Error::RootSystem(format!("bad coordinate `{}`", s.as_ref()))))
            .collect::<Result<Vec<_>>>()
            .map(Root)
    }
}

/// A root system with its orbit partition, in a fixed lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSystem {
    family: Family,
    rank: usize,
    dim: usize,
    roots: Vec<Root>,
    orbits: Vec<Orbit>,
    simple: Vec<Root>,
}

fn closure(simple: &[Root]) -> Vec<Root> {
    let mut set: BTreeSet<Root> = simple.iter().cloned().collect();
    set.extend(simple.iter().map(Root::neg));
    loop {
        let mut added = Vec::new();
        for r in &set {
            for s in simple {
                let t = r.reflect(s);
                if !set.contains(&t) {
                    added.push(t);
                }
            }
        }
        if added.is_empty() {
            return set.into_iter().collect();
        }
        set.extend(added);
    }
}

fn e8_simple() -> Vec<Root> {
    let mut s = vec![Root::from_doubled(vec![1, -1, -1, -1, -1, -1, -1, 1])];
    s.push(Root::from_ints(&[1, 1, 0, 0, 0, 0, 0, 0]));
    for i in 0..6 {
        let mut v = vec![0; 8];
        v[i] = -1;
        v[i + 1] = 1;
        s.push(Root::from_ints(&v));
    }
    s
}

fn chain(dim: usize, count: usize) -> Vec<Root> {
    (0..count)
        .map(|i| {
            let mut v = vec![0; dim];
            v[i] = 1;
            v[i + 1] = -1;
            Root::from_ints(&v)
        })
        .collect()
}

/// Build the root system of a family at the given Lie rank.
///
/// `A` of rank `r` lives in ℝ^{r+1}; `E6`, `E7` live in ℝ⁸ inside `E8`.
pub fn build_root_system(family: Family, rank: usize) -> Result<RootSystem> {
    let bad = || Error::RootSystem(format!("{family}{rank}"));
    let (dim, simple) = match family {
        Family::A => {
            if rank < 1 {
                return Err(bad());
            }
            (rank + 1, chain(rank + 1, rank))
        }
        Family::D => {
            if rank < 3 {
                return Err(bad());
            }
            let mut s = chain(rank, rank - 1);
            let mut v = vec![0; rank];
            v[rank - 2] = 1;
            v[rank - 1] = 1;
            s.push(Root::from_ints(&v));
            (rank, s)
        }
        Family::E6 | Family::E7 | Family::E8 => {
            let want = match family {
                Family::E6 => 6,
                Family::E7 => 7,
                _ => 8,
            };
            if rank != want {
                return Err(bad());
            }
            let mut s = e8_simple();
            s.truncate(rank);
            (8, s)
        }
        Family::BC => {
            if rank < 1 {
                return Err(bad());
            }
            let mut s = chain(rank, rank - 1);
            s.push(Root::unit(rank, rank - 1, 1));
            (rank, s)
        }
    };
    let roots = if family == Family::BC {
        let mut r = Vec::new();
        for j in 0..rank {
            for s in [1, -1] {
                r.push(Root::unit(rank, j, 2 * s));
                r.push(Root::unit(rank, j, s));
                for k in j + 1..rank {
                    for t in [1, -1] {
                        r.push(Root::unit(rank, j, s).add(&Root::unit(rank, k, t)));
                    }
                }
            }
        }
        r.sort();
        r
    } else {
        closure(&simple)
    };
    let orbits = roots
        .iter()
        .map(|r| match (family, r.norm2()) {
            (Family::BC, 4) => Orbit::Long,
            (Family::BC, 2) => Orbit::Middle,
            (Family::BC, _) => Orbit::Short,
            _ => Orbit::Single,
        })
        .collect();
    Ok(RootSystem { family, rank, dim, roots, orbits, simple })
}

impl RootSystem {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the ambient space the roots live in.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn simple_roots(&self) -> &[Root] {
        &self.simple
    }

    pub fn orbit_of(&self, i: usize) -> Orbit {
        self.orbits[i]
    }

    /// Roots of one orbit, in index order.
    pub fn orbit(&self, o: Orbit) -> Vec<Root> {
        self.roots.iter().zip(&self.orbits).filter(|(_, &b)| b == o).map(|(r, _)| r.clone()).collect()
    }

    pub fn contains(&self, r: &Root) -> bool {
        self.roots.binary_search(r).is_ok()
    }

    pub fn index_of(&self, r: &Root) -> Option<usize> {
        self.roots.binary_search(r).ok()
    }

    pub fn is_simply_laced(&self) -> bool {
        self.family.is_simply_laced()
    }

    /// Coordinates of a lattice vector in the simple-root basis.
    pub fn simple_coordinates(&self, r: &Root) -> Option<Vec<i32>> {
        let n = self.simple.len();
        let gram: Vec<f64> =
            (0..n * n).map(|k| self.simple[k / n].dot4(&self.simple[k % n]) as f64 / 4.0).collect();
        let rhs: Vec<f64> = self.simple.iter().map(|s| s.dot4(r) as f64 / 4.0).collect();
        let sol = solve_real(gram, rhs)?;
        let c: Vec<i32> = sol.iter().map(|x| num_traits::Float::round(*x) as i32).collect();
        let mut back = Root(vec![0; self.dim]);
        for (k, s) in c.iter().zip(&self.simple) {
            back = back.add(&s.scale(*k));
        }
        (back == *r).then_some(c)
    }

    /// Positive roots: nonnegative simple-root coordinates.
    pub fn is_positive(&self, r: &Root) -> bool {
        self.simple_coordinates(r).is_some_and(|c| c.iter().all(|&x| x >= 0))
    }

    /// Σ_β β·β divided by the dimension of the span of the roots, so that
    /// `Σ_β (β·v)² = c · v·v` for `v` in that span.
    pub fn quadratic_scale(&self) -> f64 {
        let total: i32 = self.roots.iter().map(Root::norm2).sum();
        total as f64 / self.rank as f64
    }
}

fn solve_real(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
        if a[p * n + k].abs() < 1e-12 {
            return None;
        }
        for j in 0..n {
            a.swap(k * n + j, p * n + j);
        }
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

/// A matrix whose rows and columns are labelled by an ordered list of roots.
#[derive(Clone, Debug, PartialEq)]
pub struct RootIndexedMatrix {
    pub index: Vec<Root>,
    pub entries: Matrix,
}

/// `E(kα)_{βγ} = δ_{kα, β−γ}` over the given index set.
pub fn e_matrix(index: &[Root], alpha: &Root, k: i32) -> RootIndexedMatrix {
    let target = alpha.scale(k);
    let mut m = Matrix::zeros(index.len());
    for (i, b) in index.iter().enumerate() {
        for (j, g) in index.iter().enumerate() {
            if b.sub(g) == target {
                m[(i, j)] = C64::one();
            }
        }
    }
    RootIndexedMatrix { index: index.to_vec(), entries: m }
}

/// Nonzero `(β, γ)` positions of `E(kα)` over an index set.
pub fn e_pairs(index: &[Root], alpha: &Root, k: i32) -> Vec<(usize, usize)> {
    let target = alpha.scale(k);
    let mut out = Vec::new();
    for (i, b) in index.iter().enumerate() {
        for (j, g) in index.iter().enumerate() {
            if b.sub(g) == target {
                out.push((i, j));
            }
        }
    }
    out
}

/// Structure constants `N_{α,β}` with `[e_α, e_β] = N_{α,β} e_{α+β}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    roots: Vec<Root>,
    table: Vec<i8>,
}

impl StructureConstants {
    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    /// `N` by position in [`roots`](Self::roots).
    pub fn at(&self, i: usize, j: usize) -> i8 {
        self.table[i * self.roots.len() + j]
    }

    pub fn get(&self, a: &Root, b: &Root) -> Option<i8> {
        let i = self.roots.binary_search(a).ok()?;
        let j = self.roots.binary_search(b).ok()?;
        Some(self.at(i, j))
    }

    fn index(&self, r: &Root) -> Option<usize> {
        self.roots.binary_search(r).ok()
    }

    /// Check antisymmetry, the support condition and the three-way equality
    /// `N_{−β,α+β} = N_{−α,−β} = N_{α+β,−α}`; returns the first violation.
    pub fn verify(&self) -> core::result::Result<(), String> {
        let n = self.roots.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&self.roots[i], &self.roots[j]);
                let nab = self.at(i, j);
                if nab != -self.at(j, i) {
                    return Err(format!("antisymmetry fails at ({i}, {j})"));
                }
                let s = a.add(b);
                let Some(k) = self.index(&s) else {
                    if nab != 0 {
                        return Err(format!("nonzero N for non-root sum at ({i}, {j})"));
                    }
                    continue;
                };
                if nab == 0 {
                    return Err(format!("zero N for root sum at ({i}, {j})"));
                }
                let na = self.index(&a.neg()).unwrap();
                let nb = self.index(&b.neg()).unwrap();
                let t1 = self.at(nb, k);
                let t2 = self.at(na, nb);
                let t3 = self.at(k, na);
                if t1 != t2 || t2 != t3 {
                    return Err(format!("three-way equality fails at ({i}, {j}): {t1} {t2} {t3}"));
                }
            }
        }
        Ok(())
    }
}

/// Structure constants from the bilinear sign cocycle on the simple-root
/// lattice, `ε(α_i, α_j) = (−1)^{α_i·α_j}` for `i < j`, `−1` on the diagonal,
/// `+1` for `i > j`, adjusted by root positivity:
/// `N_{α,β} = ε(α,β) c_α c_β c_{α+β}` with `c = ±1` on positive/negative
/// roots. The adjustment keeps every invariant and makes `[e_α, e_{−α}]`
/// equal to the coroot in the matrix-unit realization.
pub fn structure_constants(rs: &RootSystem) -> Result<StructureConstants> {
    if !rs.is_simply_laced() {
        return Err(Error::RootSystem(format!("{} is not simply laced", rs.family())));
    }
    let simple = rs.simple_roots();
    let n = simple.len();
    let mut odd = vec![vec![false; n]; n];
    for i in 0..n {
        odd[i][i] = true;
        for j in i + 1..n {
            odd[i][j] = simple[i].dot(&simple[j]).rem_euclid(2) == 1;
        }
    }
    let coords: Vec<Vec<i32>> = rs
        .roots()
        .iter()
        .map(|r| rs.simple_coordinates(r).ok_or_else(|| Error::RootSystem("root outside the simple lattice".into())))
        .collect::<Result<_>>()?;
    let sign = |c: &[i32]| if c.iter().all(|&x| x >= 0) { 1i8 } else { -1 };
    let eps = |a: &[i32], b: &[i32]| {
        let mut parity = 0i64;
        for i in 0..n {
            for j in i..n {
                if odd[i][j] {
                    parity += (a[i] as i64) * (b[j] as i64);
                }
            }
        }
        if parity.rem_euclid(2) == 0 {
            1i8
        } else {
            -1
        }
    };
    let m = rs.roots().len();
    let mut table = vec![0i8; m * m];
    for i in 0..m {
        for j in 0..m {
            let s = rs.roots()[i].add(&rs.roots()[j]);
            if let Some(k) = rs.index_of(&s) {
                table[i * m + j] = eps(&coords[i], &coords[j]) * sign(&coords[i]) * sign(&coords[j]) * sign(&coords[k]);
            }
        }
    }
    let sc = StructureConstants { roots: rs.roots().to_vec(), table };
    sc.verify().map_err(Error::RootSystem)?;
    Ok(sc)
}

/// For `A_{ℓ−1}`: the matrix-unit position `(j, k)` of `α = e_j − e_k`.
pub fn matrix_unit(r: &Root) -> Option<(usize, usize)> {
    let d = r.doubled();
    let j = d.iter().position(|&x| x == 2)?;
    let k = d.iter().position(|&x| x == -2)?;
    (d.iter().filter(|&&x| x != 0).count() == 2).then_some((j, k))
}

/// Signs `s_α` such that `e_α = s_α E_{jk}` realizes the given structure
/// constants in `gl(ℓ)` with `[e_α, e_{−α}] = E_jj − E_kk`. Only type A.
pub fn matrix_unit_signs(rs: &RootSystem, sc: &StructureConstants) -> Result<Vec<i8>> {
    if rs.family() != Family::A {
        return Err(Error::RootSystem(format!("matrix units need type A, got {}", rs.family())));
    }
    let roots = rs.roots();
    let units: Vec<(usize, usize)> = roots.iter().map(|r| matrix_unit(r).unwrap()).collect();
    // [E_ab, E_cd] = δ_bc E_ad − δ_da E_cb, as the sign in front of E_{α+β}
    let bracket = |p: (usize, usize), q: (usize, usize)| -> i8 {
        if p.1 == q.0 {
            1
        } else if q.1 == p.0 {
            -1
        } else {
            0
        }
    };
    let mut heights: Vec<(i32, usize)> = Vec::new();
    for (i, r) in roots.iter().enumerate() {
        let c = rs.simple_coordinates(r).unwrap();
        if c.iter().all(|&x| x >= 0) {
            heights.push((c.iter().sum(), i));
        }
    }
    heights.sort();
    let mut s: BTreeMap<usize, i8> = BTreeMap::new();
    for &(h, i) in &heights {
        if h == 1 {
            s.insert(i, 1);
            continue;
        }
        let alpha = &roots[i];
        let (k, b) = rs
            .simple_roots()
            .iter()
            .find_map(|a| {
                let rest = alpha.sub(a);
                let b = rs.index_of(&rest)?;
                s.contains_key(&b).then(|| (rs.index_of(a).unwrap(), b))
            })
            .ok_or_else(|| Error::RootSystem("sign propagation stalled".into()))?;
        let val = s[&k] * s[&b] * bracket(units[k], units[b]) * sc.at(k, b);
        s.insert(i, val);
    }
    let mut out = vec![0i8; roots.len()];
    for (i, r) in roots.iter().enumerate() {
        out[i] = match s.get(&i) {
            Some(&v) => v,
            None => s[&rs.index_of(&r.neg()).unwrap()],
        };
    }
    for i in 0..roots.len() {
        for j in 0..roots.len() {
            let n = sc.at(i, j);
            if n == 0 {
                continue;
            }
            let k = rs.index_of(&roots[i].add(&roots[j])).unwrap();
            if out[i] * out[j] * bracket(units[i], units[j]) != n * out[k] {
                return Err(Error::RootSystem(format!("structure constants not realized at ({i}, {j})")));
            }
        }
    }
    Ok(out)
}

/// Zero matrix of the index dimension.
pub fn zero_indexed(index: &[Root]) -> RootIndexedMatrix {
    RootIndexedMatrix { index: index.to_vec(), entries: Matrix::zeros(index.len()) }
}

/// Diagonal root-indexed matrix with entries `v·β`.
pub fn pairing_diag(index: &[Root], v: &[C64]) -> Vec<C64> {
    index.iter().map(|b| b.pair(v)).collect()
}

impl RootIndexedMatrix {
    pub fn is_zero(&self) -> bool {
        self.entries.as_slice().iter().all(|v| v.is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_strings_round_trip() {
        let r = Root::from_doubled(vec![1, -1, 2, 0]);
        let s = r.to_rational_strings();
        assert_eq!(s, ["1/2", "-1/2", "1", "0"]);
        assert_eq!(Root::from_rational_strings(&s).unwrap(), r);
        assert!(Root::from_rational_strings(&["1/3"]).is_err());
    }

    #[test]
    fn reflection_is_involutive() {
        let a = Root::from_ints(&[1, -1, 0]);
        let b = Root::from_ints(&[0, 1, -1]);
        assert_eq!(b.reflect(&a), Root::from_ints(&[1, 0, -1]));
        assert_eq!(b.reflect(&a).reflect(&a), b);
        assert_eq!(a.reflect(&a), a.neg());
    }

    #[test]
    fn unsupported_ranks() {
        assert!(build_root_system(Family::E6, 7).is_err());
        assert!(build_root_system(Family::D, 2).is_err());
        assert!(build_root_system(Family::A, 0).is_err());
    }

    #[test]
    fn quadratic_scale_values() {
        assert_eq!(build_root_system(Family::A, 2).unwrap().quadratic_scale(), 6.0);
        assert_eq!(build_root_system(Family::D, 4).unwrap().quadratic_scale(), 12.0);
        assert_eq!(build_root_system(Family::E8, 8).unwrap().quadratic_scale(), 60.0);
    }
}
