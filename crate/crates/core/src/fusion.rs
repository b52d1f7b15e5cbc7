//! Fusion-rule combinatorics for sl2 and for `U_q(sl2)` at `q = e^{2 pi i / N}`.
//!
//! Paths are stored zero-based: `path[0] = a_1, ..., path[n-1] = a_n`. The ordinary rules test
//! the triples `(a_{j-1}, a_j, L_j)` with `a_0 = a_n`; the modified rules test
//! `(a_j, a_{j+1}, L_j)` with `a_{n+1} = a_1`. Everything here is exact integer arithmetic.

use serde::Serialize;

use crate::{Error, Result};

/// `L_c` occurs in `L_a (x) L_b` for sl2.
pub fn fusion_triple_sl2(a: i64, b: i64, c: i64) -> bool {
    a >= 0 && b >= 0 && c >= 0 && (a - b).abs() <= c && c <= a + b && (a - b - c).rem_euclid(2) == 0
}

/// `U_q(sl2)` rule at level `N`: the sl2 rule plus `a, b, c <= N - 2` and `a + b + c <= 2N - 4`.
pub fn fusion_triple_uq(a: i64, b: i64, c: i64, level: i64) -> bool {
    fusion_triple_sl2(a, b, c) && a.max(b).max(c) <= level - 2 && a + b + c <= 2 * level - 4
}

/// Which fusion rule a path is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    Sl2,
    /// Root of unity of order `N`.
    Uq(i64),
}

impl Rule {
    pub fn admits(&self, a: i64, b: i64, c: i64) -> bool {
        match *self {
            Rule::Sl2 => fusion_triple_sl2(a, b, c),
            Rule::Uq(level) => fusion_triple_uq(a, b, c, level),
        }
    }
}

/// Ordinary or modified pairing of neighbours along a cyclic path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathKind {
    Ordinary,
    Modified,
}

fn check_lengths(path: &[i64], lambdas: &[i64]) {
    assert_eq!(path.len(), lambdas.len(), "path and weights must have the same length");
}

/// Every triple `(a_{j-1}, a_j, L_j)` obeys `rule`, cyclically.
pub fn fusion_path(path: &[i64], lambdas: &[i64], rule: Rule) -> bool {
    check_lengths(path, lambdas);
    let n = path.len();
    (0..n).all(|j| rule.admits(path[(j + n - 1) % n], path[j], lambdas[j]))
}

/// Every triple `(a_j, a_{j+1}, L_j)` obeys `rule`, cyclically.
pub fn modified_fusion_path(path: &[i64], lambdas: &[i64], rule: Rule) -> bool {
    check_lengths(path, lambdas);
    let n = path.len();
    (0..n).all(|j| rule.admits(path[j], path[(j + 1) % n], lambdas[j]))
}

pub fn path_admissible(path: &[i64], lambdas: &[i64], kind: PathKind, rule: Rule) -> bool {
    match kind {
        PathKind::Ordinary => fusion_path(path, lambdas, rule),
        PathKind::Modified => modified_fusion_path(path, lambdas, rule),
    }
}

/// Weight vector `w_j = L_j - 2 m_j` with zero total weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct WeightVector(pub Vec<i64>);

impl WeightVector {
    pub fn new(w: Vec<i64>, lambdas: &[i64]) -> Result<Self> {
        if w.len() != lambdas.len() {
            return Err(Error::InvalidParams("weight vector length differs from number of factors".into()));
        }
        if w.iter().sum::<i64>() != 0 {
            return Err(Error::InvalidParams(format!("weight vector {w:?} has nonzero total")));
        }
        for (&wj, &l) in w.iter().zip(lambdas) {
            if wj.abs() > l || (l - wj).rem_euclid(2) != 0 {
                return Err(Error::InvalidParams(format!("{wj} is not a weight of L_{l}")));
            }
        }
        Ok(Self(w))
    }

    /// Weight vector of the zero-weight index `m`.
    pub fn from_index(m: &[usize], lambdas: &[i64]) -> Result<Self> {
        Self::new(m.iter().zip(lambdas).map(|(&mj, &l)| l - 2 * mj as i64).collect(), lambdas)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    /// `Sigma^j = w_1 + ... + w_j` for `j = 1..n`.
    pub fn partial_sums(&self) -> Vec<i64> {
        self.0
            .iter()
            .scan(0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }

    /// `Sigma~^j = w_j + ... + w_n` for `j = 1..n`.
    pub fn tail_sums(&self) -> Vec<i64> {
        let mut out = vec![0; self.0.len()];
        let mut acc = 0;
        for j in (0..self.0.len()).rev() {
            acc += self.0[j];
            out[j] = acc;
        }
        out
    }

    /// Sums matching the path kind: head sums for ordinary, tail sums for modified rules.
    pub fn sums(&self, kind: PathKind) -> Vec<i64> {
        match kind {
            PathKind::Ordinary => self.partial_sums(),
            PathKind::Modified => self.tail_sums(),
        }
    }
}

/// All valid weight vectors for the given highest weights.
pub fn weight_vectors(lambdas: &[i64]) -> Vec<WeightVector> {
    fn rec(lambdas: &[i64], prefix: &mut Vec<i64>, out: &mut Vec<WeightVector>) {
        let j = prefix.len();
        if j == lambdas.len() {
            if prefix.iter().sum::<i64>() == 0 {
                out.push(WeightVector(prefix.clone()));
            }
            return;
        }
        let l = lambdas[j];
        let mut w = -l;
        while w <= l {
            prefix.push(w);
            rec(lambdas, prefix, out);
            prefix.pop();
            w += 2;
        }
    }
    let mut out = Vec::new();
    rec(lambdas, &mut Vec::new(), &mut out);
    out
}

/// Path `(sign * Sigma^j + shift)_j` built from head or tail sums.
pub fn shifted_path(w: &WeightVector, kind: PathKind, sign: i64, shift: i64) -> Vec<i64> {
    w.sums(kind).into_iter().map(|s| sign * s + shift).collect()
}

/// Shift number `k(w)`: the least `k >= 0` with `(Sigma^j + k)_j` obeying the ordinary sl2 rules.
///
/// Consecutive entries differ by `w_j`, a weight of `L_j`, so the only active constraints are
/// `a_{j-1} + a_j >= L_j`, which is linear in `k` with an even right-hand side.
pub fn shift_number(w: &WeightVector, lambdas: &[i64]) -> i64 {
    let sums = w.partial_sums();
    let n = sums.len();
    (0..n)
        .map(|j| {
            let prev = sums[(j + n - 1) % n];
            (lambdas[j] - prev - sums[j]) / 2
        })
        .fold(0, i64::max)
}

/// Shift number for the modified rules and tail sums.
pub fn shift_number_modified(w: &WeightVector, lambdas: &[i64]) -> i64 {
    let sums = w.tail_sums();
    let n = sums.len();
    (0..n).map(|j| (lambdas[j] - sums[j] - sums[(j + 1) % n]) / 2).fold(0, i64::max)
}

pub fn shift_number_for(w: &WeightVector, lambdas: &[i64], kind: PathKind) -> i64 {
    match kind {
        PathKind::Ordinary => shift_number(w, lambdas),
        PathKind::Modified => shift_number_modified(w, lambdas),
    }
}

/// Whether a Weyl-antisymmetric solution is forced to vanish on index `m` at `lambda = 2 eta k`.
///
/// For `k >= 0` the test path is `(-Sigma^j + k - 1)`, for `k < 0` it is `(Sigma^j + |k| - 1)`;
/// the coefficient is forced to vanish exactly when the path breaks the rule.
pub fn vanishing_support(m: &[usize], lambdas: &[i64], kind: PathKind, k: i64, rule: Rule) -> Result<bool> {
    let w = WeightVector::from_index(m, lambdas)?;
    let (sign, shift) = if k >= 0 { (-1, k - 1) } else { (1, -k - 1) };
    Ok(!path_admissible(&shifted_path(&w, kind, sign, shift), lambdas, kind, rule))
}
