//! Exact rational linear algebra over the exponent matrix.
//!
//! Everything here works in arbitrary-precision rationals; no floating point
//! enters any decision taken downstream (cone classification, vanishing
//! tests, Mellin–Barnes coefficients).

use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_to_f64(v: &Q) -> f64 {
    // Entries stay tiny for the matrices this crate handles, so the
    // conversion through i64 ratios is exact enough; fall back to strings.
    use num::ToPrimitive;
    match (v.numer().to_f64(), v.denom().to_f64()) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    }
}

/// Serde adapter writing rationals as `"n"` or `"n/d"` strings.
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let raw = String::deserialize(d)?;
        Q::from_str(raw.trim()).map_err(|_| serde::de::Error::custom(format!("bad rational {raw:?}")))
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
            let strings: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            strings.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|r| {
                    Q::from_str(r.trim())
                        .map_err(|_| serde::de::Error::custom(format!("bad rational {r:?}")))
                })
                .collect()
        }
    }
}

/// An ordered index set, strictly increasing. Stored 0-based, shown and
/// serialized 1-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subset(Vec<usize>);

impl Subset {
    /// Build from 0-based indices.
    pub fn from_zero_based(idx: Vec<usize>) -> Self {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        Subset(idx)
    }

    /// Build from 1-based indices, validating order and range `1..=n`.
    pub fn from_one_based(idx: &[usize], n: usize) -> Result<Self> {
        if idx.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::MalformedIndex(format!("{idx:?}: entries must lie in 1..={n}")));
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedIndex(format!(
                "{idx:?}: entries must be strictly increasing"
            )));
        }
        Ok(Subset(idx.iter().map(|i| i - 1).collect()))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        self.0.binary_search(&k).ok()
    }

    /// Sum of the 1-based coordinates, `i_1 + ... + i_p`.
    pub fn coordinate_sum(&self) -> usize {
        self.0.iter().map(|i| i + 1).sum()
    }

    /// Indices of `0..n` not in the set.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|k| !self.contains(*k)).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        if raw.iter().any(|&i| i == 0) || raw.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom(format!(
                "index set {raw:?} must be 1-based and strictly increasing"
            )));
        }
        Ok(Subset(raw.into_iter().map(|i| i - 1).collect()))
    }
}

/// All `p`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, p: usize) -> Vec<Subset> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Subset>) {
        if left == 0 {
            out.push(Subset(cur.clone()));
            return;
        }
        for i in start..=n - left {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if p <= n {
        rec(0, n, p, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

/// The `p × n` exponent matrix of a monomial mapping; row `j` holds the
/// exponent vector of the `j`-th monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentMatrix {
    p: usize,
    n: usize,
    entries: Vec<Vec<u32>>,
}

impl ExponentMatrix {
    pub fn new(entries: Vec<Vec<u32>>) -> Result<Self> {
        let p = entries.len();
        if p == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let n = entries[0].len();
        if n == 0 {
            return Err(Error::InvalidMatrix("matrix has no columns".into()));
        }
        if entries.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("rows have different lengths".into()));
        }
        if p > n {
            return Err(Error::InvalidMatrix(format!("p = {p} exceeds n = {n}")));
        }
        if let Some(j) = entries.iter().position(|r| r.iter().all(|&e| e == 0)) {
            return Err(Error::InvalidMatrix(format!(
                "row {} is zero (constant monomial)",
                j + 1
            )));
        }
        Ok(ExponentMatrix { p, n, entries })
    }

    /// Validating constructor from signed input, as read from files.
    pub fn from_signed(p: usize, n: usize, rows: &[Vec<i64>]) -> Result<Self> {
        if rows.len() != p {
            return Err(Error::InvalidMatrix(format!("declared p = {p} but {} rows given", rows.len())));
        }
        let mut entries = Vec::with_capacity(p);
        for (j, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "declared n = {n} but row {} has {} entries",
                    j + 1,
                    r.len()
                )));
            }
            let mut row = Vec::with_capacity(n);
            for &e in r {
                if e < 0 {
                    return Err(Error::InvalidMatrix(format!("negative entry {e} in row {}", j + 1)));
                }
                let e = u32::try_from(e)
                    .map_err(|_| Error::InvalidMatrix(format!("entry {e} too large")))?;
                row.push(e);
            }
            entries.push(row);
        }
        ExponentMatrix::new(entries)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, k: usize) -> u32 {
        self.entries[j][k]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.entries
    }

    /// Column `k` (0-based), i.e. the vector α^k.
    pub fn column(&self, k: usize) -> Vec<u32> {
        self.entries.iter().map(|r| r[k]).collect()
    }

    pub fn column_q(&self, k: usize) -> Vec<Q> {
        self.entries.iter().map(|r| q(r[k] as i64)).collect()
    }

    /// |α^k| for every column.
    pub fn column_sums(&self) -> Vec<u32> {
        (0..self.n).map(|k| self.entries.iter().map(|r| r[k]).sum()).collect()
    }

    /// Total degree of each monomial.
    pub fn row_sums(&self) -> Vec<u32> {
        self.entries.iter().map(|r| r.iter().sum()).collect()
    }

    /// The square matrix A_I whose columns are α^i for i in I.
    pub fn square_minor(&self, subset: &Subset) -> Vec<Vec<BigInt>> {
        (0..self.p)
            .map(|row| subset.indices().iter().map(|&k| BigInt::from(self.entries[row][k])).collect())
            .collect()
    }
}

pub fn column_sums(a: &ExponentMatrix) -> Vec<u32> {
    a.column_sums()
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det_bareiss(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    match n {
        0 => BigInt::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = BigInt::zero();
            for col in 0..n {
                if m[0][col].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<BigInt>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, v)| v.clone()).collect())
                    .collect();
                let term = &m[0][col] * det_cofactor(&minor);
                if col % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

/// Exact inverse by Gauss–Jordan elimination; `None` if singular.
pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..2 * n {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| (0..inner).fold(Q::zero(), |acc, k| acc + &row[k] * &b[k][c]))
                .collect()
        })
        .collect()
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

/// Row echelon form in place; returns the pivot columns.
fn echelon(rows: &mut [Vec<Q>]) -> Vec<usize> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..width {
        if r >= rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for k in c..width {
                    let d = &f * &rows[r][k];
                    rows[i][k] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Exact rank of a family of vectors.
pub fn rank(vectors: &[Vec<Q>]) -> usize {
    let mut m = vectors.to_vec();
    echelon(&mut m).len()
}

/// Whether `target` lies in the linear span of `vectors`.
pub fn in_span(vectors: &[Vec<Q>], target: &[Q]) -> bool {
    if target.iter().all(|v| v.is_zero()) {
        return true;
    }
    let base = rank(vectors);
    let mut ext = vectors.to_vec();
    ext.push(target.to_vec());
    rank(&ext) == base
}

/// Basis of the null space `{x : M x = 0}` for a row list `M`.
pub fn null_space(rows: &[Vec<Q>], width: usize) -> Vec<Vec<Q>> {
    let mut m = rows.to_vec();
    let pivots = echelon(&mut m);
    let free: Vec<usize> = (0..width).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); width];
            v[f] = Q::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

/// Per-subset data: the minor Δ_I, the rows β_j of A_I⁻¹ and the vectors
/// μ^k = A_I⁻¹ α^k for k ∉ I.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexData {
    pub subset: Subset,
    pub delta: BigInt,
    /// Rows β_j of A_I⁻¹ (absent when Δ_I = 0).
    pub inverse_rows: Option<Vec<Vec<Q>>>,
    /// `(k, μ^k)` for every column k ∉ I, in increasing k.
    pub mu: Vec<(usize, Vec<Q>)>,
}

impl IndexData {
    pub fn is_degenerate(&self) -> bool {
        self.delta.is_zero()
    }

    /// Columns β^l of A_I⁻¹.
    pub fn inverse_cols(&self) -> Option<Vec<Vec<Q>>> {
        let rows = self.inverse_rows.as_ref()?;
        let p = rows.len();
        Some((0..p).map(|l| rows.iter().map(|r| r[l].clone()).collect()).collect())
    }

    pub fn mu_of(&self, k: usize) -> Option<&[Q]> {
        self.mu.iter().find(|(kk, _)| *kk == k).map(|(_, v)| v.as_slice())
    }

    pub fn delta_sign(&self) -> i32 {
        if self.delta.is_positive() {
            1
        } else if self.delta.is_negative() {
            -1
        } else {
            0
        }
    }
}

/// Exact minor, inverse and μ-vectors for one index set.
pub fn index_data(a: &ExponentMatrix, subset: &Subset) -> Result<IndexData> {
    if subset.len() != a.p() {
        return Err(Error::MalformedIndex(format!(
            "{subset} has {} entries, expected p = {}",
            subset.len(),
            a.p()
        )));
    }
    if subset.indices().iter().any(|&k| k >= a.n()) {
        return Err(Error::MalformedIndex(format!("{subset} exceeds n = {}", a.n())));
    }
    let minor = a.square_minor(subset);
    let delta = det_bareiss(&minor);
    if delta.is_zero() {
        return Ok(IndexData { subset: subset.clone(), delta, inverse_rows: None, mu: Vec::new() });
    }
    let minor_q: Vec<Vec<Q>> =
        minor.iter().map(|r| r.iter().map(|v| Q::from_integer(v.clone())).collect()).collect();
    let inv = inverse(&minor_q).expect("nonzero determinant");
    let mu = subset
        .complement(a.n())
        .into_iter()
        .map(|k| {
            let col = a.column_q(k);
            let v: Vec<Q> = inv.iter().map(|row| dot(row, &col)).collect();
            (k, v)
        })
        .collect();
    Ok(IndexData { subset: subset.clone(), delta, inverse_rows: Some(inv), mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[u32]]) -> ExponentMatrix {
        ExponentMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn qv(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn column_sums_examples() {
        assert_eq!(column_sums(&mat(&[&[1, 0], &[0, 1]])), vec![1, 1]);
        assert_eq!(column_sums(&mat(&[&[1, 1, 0], &[0, 1, 1]])), vec![1, 2, 1]);
        assert_eq!(column_sums(&mat(&[&[1, 3], &[0, 1]])), vec![1, 4]);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(ExponentMatrix::new(vec![vec![0, 0], vec![1, 0]]).is_err());
        assert!(ExponentMatrix::new(vec![vec![1], vec![1]]).is_err());
        assert!(ExponentMatrix::from_signed(1, 2, &[vec![1, -1]]).is_err());
        assert!(ExponentMatrix::from_signed(2, 2, &[vec![1, 1]]).is_err());
    }

    #[test]
    fn index_data_normal_crossing() {
        let a = mat(&[&[1, 1, 0], &[0, 1, 1]]);
        let d = index_data(&a, &Subset::from_one_based(&[1, 2], 3).unwrap()).unwrap();
        assert_eq!(d.delta, BigInt::from(1));
        let inv = d.inverse_rows.clone().unwrap();
        assert_eq!(inv[0], qv(&[1, -1]));
        assert_eq!(inv[1], qv(&[0, 1]));
        assert_eq!(d.mu_of(2).unwrap(), qv(&[-1, 1]).as_slice());

        let d = index_data(&a, &Subset::from_one_based(&[1, 3], 3).unwrap()).unwrap();
        assert_eq!(d.delta, BigInt::from(1));
        assert_eq!(d.inverse_rows.clone().unwrap(), vec![qv(&[1, 0]), qv(&[0, 1])]);
        assert_eq!(d.mu_of(1).unwrap(), qv(&[1, 1]).as_slice());
    }

    #[test]
    fn index_data_degenerate() {
        let a = mat(&[&[1, 1], &[2, 2]]);
        let d = index_data(&a, &Subset::from_one_based(&[1, 2], 2).unwrap()).unwrap();
        assert!(d.is_degenerate());
        assert!(d.inverse_rows.is_none());
        assert!(d.mu.is_empty());
    }

    #[test]
    fn malformed_subsets() {
        assert!(Subset::from_one_based(&[2, 1], 3).is_err());
        assert!(Subset::from_one_based(&[1, 1], 3).is_err());
        assert!(Subset::from_one_based(&[0, 1], 3).is_err());
        assert!(Subset::from_one_based(&[1, 4], 3).is_err());
        let a = mat(&[&[1, 1, 0], &[0, 1, 1]]);
        assert!(index_data(&a, &Subset::from_one_based(&[1], 3).unwrap()).is_err());
    }

    #[test]
    fn subsets_lexicographic() {
        let s: Vec<Vec<usize>> = subsets(4, 2).iter().map(|s| s.one_based()).collect();
        assert_eq!(s, vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]);
        assert_eq!(subsets(3, 3).len(), 1);
    }

    #[test]
    fn span_and_null_space() {
        let vs = vec![qv(&[1, 1, 0]), qv(&[0, 1, 1])];
        assert!(in_span(&vs, &qv(&[1, 2, 1])));
        assert!(!in_span(&vs, &qv(&[1, 0, 0])));
        let ns = null_space(&vs, 3);
        assert_eq!(ns.len(), 1);
        for v in &vs {
            assert!(dot(v, &ns[0]).is_zero());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn square(max_p: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
            (1..=max_p).prop_flat_map(|p| prop::collection::vec(prop::collection::vec(-4i64..=4, p), p))
        }

        proptest! {
            #[test]
            fn bareiss_matches_cofactor(m in square(5)) {
                let b: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
                prop_assert_eq!(det_bareiss(&b), det_cofactor(&b));
            }

            #[test]
            fn inverse_is_exact(rows in (1usize..=5).prop_flat_map(|p| (Just(p), prop::collection::vec(prop::collection::vec(0u32..=3, 5), p)))) {
                let (p, entries) = rows;
                prop_assume!(entries.iter().all(|r| r.iter().any(|&e| e > 0)));
                let a = ExponentMatrix::new(entries).unwrap();
                for s in subsets(a.n(), p) {
                    let d = index_data(&a, &s).unwrap();
                    let Some(inv) = d.inverse_rows.clone() else { continue };
                    let minor: Vec<Vec<Q>> = a.square_minor(&s).into_iter()
                        .map(|r| r.into_iter().map(Q::from_integer).collect()).collect();
                    let prod = mat_mul(&minor, &inv);
                    for (i, row) in prod.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            prop_assert_eq!(v.clone(), if i == j { Q::one() } else { Q::zero() });
                        }
                    }
                    // ⟨α^k, β_j⟩ two ways: row dot product and μ^k component.
                    for (k, mu) in &d.mu {
                        let col = a.column_q(*k);
                        for (j, beta) in inv.iter().enumerate() {
                            prop_assert_eq!(dot(&col, beta), mu[j].clone());
                        }
                        // μ^k = Σ_l α_l^k β^l over the inverse's columns.
                        let cols = d.inverse_cols().unwrap();
                        let mut acc = vec![Q::zero(); p];
                        for (l, beta_col) in cols.iter().enumerate() {
                            for (slot, b) in acc.iter_mut().zip(beta_col) {
                                *slot += &col[l] * b;
                            }
                        }
                        prop_assert_eq!(&acc, mu);
                    }
                }
            }
        }
    }
}
