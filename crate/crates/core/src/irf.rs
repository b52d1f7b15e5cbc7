//! Interaction-round-a-face models built from the fundamental R-matrix: Boltzmann weights,
//! the star-triangle equation, row-to-row transfer matrices on unrestricted and restricted
//! height configurations, and the restriction of Bethe eigenfunctions to height states.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::elliptic_core::EllipticParams;
use crate::linalg::{eigenvalues, max_abs, max_abs_vec, null_space, overlap};
use crate::qkzb_ops::{BasisKind, TensorSpace, ZeroWeightFn};
use crate::rmatrix::fundamental_r;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Heights `a_1, ..., a_n` of a periodic row, stored as exact integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IrfState(pub Vec<i64>);

impl IrfState {
    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Neighbouring heights differ by one, cyclically.
    pub fn is_cyclic_path(&self) -> bool {
        let n = self.n();
        n > 0 && (0..n).all(|j| (self.0[j] - self.0[(j + 1) % n]).abs() == 1)
    }

    /// All heights strictly between `0` and `level`.
    pub fn is_restricted(&self, level: i64) -> bool {
        self.is_cyclic_path() && self.0.iter().all(|&a| 0 < a && a < level)
    }

    /// Some height is a multiple of `level` (or zero when `level` is `None`).
    pub fn is_neutral(&self, level: Option<i64>) -> bool {
        self.0.iter().any(|&a| match level {
            Some(l) => a.rem_euclid(l) == 0,
            None => a == 0,
        })
    }

    /// Zero-weight index with `m_j = 0` iff `a_j - a_{j+1} = 1`.
    pub fn weight_index(&self) -> Vec<usize> {
        let n = self.n();
        (0..n).map(|j| step_bit(self.0[j] - self.0[(j + 1) % n])).collect()
    }

    /// `a -> level - a`.
    pub fn reflected(&self, level: i64) -> Self {
        Self(self.0.iter().map(|a| level - a).collect())
    }
}

fn step_bit(d: i64) -> usize {
    usize::from(d != 1)
}

/// `w(a, b, c, d; z)` read off `R(z, 2 eta (mu + d))`, zero unless all four neighbouring
/// heights differ by one. `mu` is a common offset of all heights.
pub fn boltzmann(a: i64, b: i64, c: i64, d: i64, z: C64, mu: C64, params: &EllipticParams) -> Result<C64> {
    if [a - b, b - c, c - d, a - d].iter().any(|x| x.abs() != 1) {
        return Ok(C64::new(0.0, 0.0));
    }
    let lambda = 2.0 * params.eta * (mu + d as f64);
    let r = fundamental_r(z, lambda, params)
        .map_err(|e| Error::Pole(format!("Boltzmann weight w({a},{b},{c},{d}): {e}")))?;
    Ok(r[(2 * step_bit(a - b) + step_bit(d - a), 2 * step_bit(d - c) + step_bit(c - b))])
}

/// Heights of the internal face summed over in the star-triangle equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeightRange {
    /// All integers, heights shifted by a generic offset.
    Generic,
    /// `1..=level-1` at `eta = 1/(2 level)`, no offset.
    Restricted(i64),
}

/// `|LHS - RHS|` of the star-triangle equation with boundary heights `[a, b, c, d, e, f]`.
pub fn star_triangle_residual(
    labels: [i64; 6],
    z: [C64; 3],
    mu: C64,
    range: HeightRange,
    params: &EllipticParams,
) -> Result<f64> {
    let [a, b, c, d, e, f] = labels;
    let [z1, z2, z3] = z;
    let (lo, hi) = match range {
        HeightRange::Generic => {
            let lo = labels.iter().min().copied().unwrap_or(0) - 1;
            let hi = labels.iter().max().copied().unwrap_or(0) + 1;
            (lo, hi)
        }
        HeightRange::Restricted(level) => (1, level - 1),
    };
    let w = |a, b, c, d, z| boltzmann(a, b, c, d, z, mu, params);
    let mut lhs = C64::new(0.0, 0.0);
    let mut rhs = C64::new(0.0, 0.0);
    for g in lo..=hi {
        if (g - f).abs() == 1 && (g - b).abs() == 1 && (g - d).abs() == 1 {
            lhs += w(a, b, g, f, z2 - z3)? * w(b, c, d, g, z1 - z3)? * w(g, d, e, f, z1 - z2)?;
        }
        if (g - a).abs() == 1 && (g - c).abs() == 1 && (g - e).abs() == 1 {
            rhs += w(b, c, g, a, z1 - z2)? * w(a, g, e, f, z1 - z3)? * w(g, c, d, e, z2 - z3)?;
        }
    }
    Ok((lhs - rhs).norm())
}

/// Cyclic height paths of length `n` with heights in `1..level`, in lexicographic order.
pub fn restricted_basis(level: i64, n: usize) -> Vec<IrfState> {
    let mut out = Vec::new();
    if n == 0 || n % 2 != 0 {
        return out;
    }
    fn extend(prefix: &mut Vec<i64>, n: usize, level: i64, out: &mut Vec<IrfState>) {
        if prefix.len() == n {
            let state = IrfState(prefix.clone());
            if state.is_restricted(level) {
                out.push(state);
            }
            return;
        }
        let last = *prefix.last().expect("prefix starts with a height");
        for next in [last - 1, last + 1] {
            if 0 < next && next < level {
                prefix.push(next);
                extend(prefix, n, level, out);
                prefix.pop();
            }
        }
    }
    for a1 in 1..level {
        extend(&mut vec![a1], n, level, &mut out);
    }
    out
}

/// Number of closed walks of length `n` on the path graph with vertices `1..level`.
pub fn closed_walk_count(level: i64, n: usize) -> u64 {
    let v = (level - 1).max(0) as usize;
    let mut power = vec![vec![0u64; v]; v];
    for (i, row) in power.iter_mut().enumerate() {
        row[i] = 1;
    }
    for _ in 0..n {
        let mut next = vec![vec![0u64; v]; v];
        for i in 0..v {
            for j in 0..v {
                let left = if j > 0 { power[i][j - 1] } else { 0 };
                let right = if j + 1 < v { power[i][j + 1] } else { 0 };
                next[i][j] = left + right;
            }
        }
        power = next;
    }
    (0..v).map(|i| power[i][i]).sum()
}

/// Product `prod_j w(b_{j+1}, a_{j+1}, a_j, b_j; w - z_j)`.
pub fn row_weight(b: &IrfState, a: &IrfState, w: C64, z: &[C64], mu: C64, params: &EllipticParams) -> Result<C64> {
    let n = b.n();
    let mut prod = C64::new(1.0, 0.0);
    for j in 0..n {
        let k = (j + 1) % n;
        prod *= boltzmann(b.0[k], a.0[k], a.0[j], b.0[j], w - z[j], mu, params)?;
        if prod == C64::new(0.0, 0.0) {
            break;
        }
    }
    Ok(prod)
}

/// Sparse vector over height states.
pub type HeightVector = BTreeMap<IrfState, C64>;

/// States adjacent to `a` in every column (`b_j = a_j +- 1`, cyclic).
fn neighbours(a: &IrfState) -> Vec<IrfState> {
    let n = a.n();
    (0..1usize << n)
        .map(|mask| IrfState((0..n).map(|j| a.0[j] + if mask >> j & 1 == 0 { 1 } else { -1 }).collect()))
        .filter(IrfState::is_cyclic_path)
        .collect()
}

/// Row-to-row transfer matrix on functions of heights shifted by `mu`; each input state feeds
/// at most `2^n` output states.
pub fn transfer_apply(v: &HeightVector, w: C64, z: &[C64], mu: C64, params: &EllipticParams) -> Result<HeightVector> {
    let mut out = HeightVector::new();
    for (a, &coeff) in v {
        if a.n() != z.len() {
            return Err(Error::InvalidParams("state length differs from number of points".into()));
        }
        for b in neighbours(a) {
            let weight = row_weight(&b, a, w, z, mu, params)?;
            if weight != C64::new(0.0, 0.0) {
                *out.entry(b).or_insert(C64::new(0.0, 0.0)) += weight * coeff;
            }
        }
    }
    Ok(out)
}

/// Dense transfer matrix on the restricted basis, `T[b][a]`.
pub fn restricted_transfer(basis: &[IrfState], w: C64, z: &[C64], params: &EllipticParams) -> Result<CMatrix> {
    let mut t = CMatrix::zeros(basis.len(), basis.len());
    for (i, b) in basis.iter().enumerate() {
        for (j, a) in basis.iter().enumerate() {
            t[(i, j)] = row_weight(b, a, w, z, C64::new(0.0, 0.0), params)?;
        }
    }
    Ok(t)
}

/// Compares the row-to-row formula with the transfer operator built from the monodromy of
/// R-matrices, on a random function supported on heights `mu + a_1`, `a_1` in `window`.
pub fn row_to_row_residual(
    transfer: &crate::qkzb_ops::Operator,
    n: usize,
    mu: C64,
    window: (i64, i64),
    seed: u64,
    params: &EllipticParams,
    w: C64,
    z: &[C64],
) -> Result<f64> {
    let space = transfer.source().clone();
    let mut sampler = crate::sampling::Sampler::new(seed);
    let states: Vec<IrfState> = (window.0..=window.1).flat_map(|a1| cyclic_paths_from(a1, n)).collect();
    let coeffs: HeightVector = states.iter().map(|s| (s.clone(), sampler.gaussian())).collect();
    let f = height_function(&coeffs, space.clone(), mu, params)?;
    let tf = transfer.apply(&f)?;
    let direct = transfer_apply(&coeffs, w, z, mu, params)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (b, value) in &direct {
        if b.0[0] < window.0 + 1 || b.0[0] > window.1 - 1 {
            continue;
        }
        let idx = space.index_of(&b.weight_index()).ok_or_else(|| Error::InvalidParams("state outside space".into()))?;
        let lhs = tf.eval(2.0 * params.eta * (mu + b.0[0] as f64))?[idx];
        worst = worst.max((lhs - value).norm());
        scale = scale.max(value.norm());
    }
    Ok(worst / scale)
}

/// Function of `lambda` equal to `sum_a v_a e_{M(a)}` at `lambda = 2 eta (mu + a_1)` and zero
/// elsewhere.
pub fn height_function(v: &HeightVector, space: Arc<TensorSpace>, mu: C64, params: &EllipticParams) -> Result<ZeroWeightFn> {
    let two_eta = 2.0 * params.eta;
    let mut entries = Vec::with_capacity(v.len());
    for (a, &c) in v {
        let idx = space.index_of(&a.weight_index()).ok_or_else(|| Error::InvalidParams(format!("state {:?} outside space", a.0)))?;
        entries.push((a.0[0], idx, c));
    }
    let dim = space.dim();
    Ok(ZeroWeightFn::new(space, BasisKind::Standard, move |lambda| {
        let h = lambda / two_eta - mu;
        let mut out = CVector::zeros(dim);
        if (h - h.re.round()).norm() < 1e-9 {
            let a1 = h.re.round() as i64;
            for &(b1, idx, c) in &entries {
                if b1 == a1 {
                    out[idx] += c;
                }
            }
        }
        Ok(out)
    }))
}

/// Coefficients `(A psi)_{|a>} = (A psi)_{M(a)}(2 eta a_1)` on the given states.
pub fn restrict_eigenfunction(apsi: &ZeroWeightFn, states: &[IrfState], params: &EllipticParams) -> Result<CVector> {
    let space = apsi.space().clone();
    let f = apsi.to_standard(params)?;
    let mut cache: BTreeMap<i64, CVector> = BTreeMap::new();
    let mut out = CVector::zeros(states.len());
    for (i, a) in states.iter().enumerate() {
        let idx = space.index_of(&a.weight_index()).ok_or_else(|| Error::InvalidParams(format!("state {:?} outside space", a.0)))?;
        let v = match cache.get(&a.0[0]) {
            Some(v) => v.clone(),
            None => {
                let v = crate::bethe::eval_regular(&f, 2.0 * params.eta * a.0[0] as f64)?;
                cache.insert(a.0[0], v.clone());
                v
            }
        };
        out[i] = v[idx];
    }
    Ok(out)
}

/// Restricted Bethe vector; an error when every coefficient is at most `zero_tol * reference`
/// (`reference` is typically the size of the eigenfunction before antisymmetrisation).
pub fn bethe_eigenvector_restricted(
    apsi: &ZeroWeightFn,
    level: i64,
    n: usize,
    reference: f64,
    zero_tol: f64,
    params: &EllipticParams,
) -> Result<(Vec<IrfState>, CVector)> {
    let basis = restricted_basis(level, n);
    let v = restrict_eigenfunction(apsi, &basis, params)?;
    if max_abs_vec(&v) <= zero_tol * reference {
        return Err(Error::Degenerate(format!("restricted Bethe vector vanishes (max {:.3e})", max_abs_vec(&v))));
    }
    Ok((basis, v))
}

/// `||T v - eps v|| / ||v||`.
pub fn vector_eigen_residual(t: &CMatrix, v: &CVector, eps: C64) -> f64 {
    (t * v - v * eps).norm() / v.norm().max(1e-300)
}

/// `max_a |v_a - sign v_{N - a}| / max |v|` with `sign = (-1)^{n/2 + 1} e^c`.
pub fn height_reflection_residual(basis: &[IrfState], v: &CVector, level: i64, c: C64) -> Result<f64> {
    let n = basis.first().map_or(0, IrfState::n);
    let sign = if (n / 2 + 1) % 2 == 0 { 1.0 } else { -1.0 } * c.exp();
    let index: BTreeMap<&IrfState, usize> = basis.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut worst: f64 = 0.0;
    for (i, s) in basis.iter().enumerate() {
        let r = s.reflected(level);
        let j = *index.get(&r).ok_or_else(|| Error::InvalidParams("reflection leaves the basis".into()))?;
        worst = worst.max((v[i] - sign * v[j]).norm());
    }
    Ok(worst / max_abs_vec(v).max(1e-300))
}

/// Permutation matrix of `a -> level - a` on the basis.
pub fn reflection_matrix(basis: &[IrfState], level: i64) -> Result<CMatrix> {
    let mut p = CMatrix::zeros(basis.len(), basis.len());
    for (j, s) in basis.iter().enumerate() {
        let r = s.reflected(level);
        let i = basis.iter().position(|x| *x == r).ok_or_else(|| Error::InvalidParams("reflection leaves the basis".into()))?;
        p[(i, j)] = C64::new(1.0, 0.0);
    }
    Ok(p)
}

/// Dense spectral data of a restricted transfer matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub basis: Vec<IrfState>,
    pub matrix: CMatrix,
    pub eigenvalues: Vec<C64>,
    /// `||[T(w1), T(w2)]||` (max entry).
    pub commutator: f64,
    /// `||P T - T P||` for the height reflection `P`.
    pub reflection_commutator: f64,
}

pub fn brute_force_spectrum(level: i64, n: usize, w: C64, w_other: C64, z: &[C64], params: &EllipticParams) -> Result<Spectrum> {
    let basis = restricted_basis(level, n);
    let t1 = restricted_transfer(&basis, w, z, params)?;
    let t2 = restricted_transfer(&basis, w_other, z, params)?;
    let commutator = max_abs(&(&t1 * &t2 - &t2 * &t1));
    let p = reflection_matrix(&basis, level)?;
    let reflection_commutator = max_abs(&(&p * &t1 - &t1 * &p));
    let mut eigenvalues = eigenvalues(&t1)?;
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(Spectrum { basis, matrix: t1, eigenvalues, commutator, reflection_commutator })
}

/// Best match of a vector and a predicted eigenvalue against the dense spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMatch {
    pub eigenvalue: C64,
    /// Distance from the predicted eigenvalue to the matched eigenvalue.
    pub distance: f64,
    /// Norm of the projection onto the matched eigenspace, relative to the vector norm.
    pub overlap: f64,
}

impl Spectrum {
    /// Picks the eigenspace with largest overlap with `v`.
    pub fn match_vector(&self, v: &CVector, predicted: C64) -> SpectralMatch {
        let mut best = SpectralMatch { eigenvalue: predicted, distance: f64::INFINITY, overlap: 0.0 };
        let scale = crate::linalg::operator_norm(&self.matrix).max(1e-300);
        let dim = self.matrix.nrows();
        for &e in &self.eigenvalues {
            let shifted = &self.matrix - CMatrix::identity(dim, dim) * e;
            let kernel = null_space(&shifted, 1e-8 * scale / crate::linalg::operator_norm(&shifted).max(1e-300));
            let o = overlap(&kernel, v);
            if o > best.overlap + 1e-12 || (o >= best.overlap - 1e-12 && (e - predicted).norm() < best.distance) {
                best = SpectralMatch { eigenvalue: e, distance: (e - predicted).norm(), overlap: o };
            }
        }
        best
    }

    pub fn to_json(&self, level: i64, w: C64, matches: &[SpectralMatch]) -> Value {
        let pair = |x: C64| json!([x.re, x.im]);
        let p = |x: &C64| pair(*x);
        json!({
            "N": level,
            "n": self.basis.first().map_or(0, IrfState::n),
            "w": pair(w),
            "basis": self.basis.iter().map(|s| s.0.clone()).collect::<Vec<_>>(),
            "eigenvalues": self.eigenvalues.iter().map(p).collect::<Vec<_>>(),
            "commutator_norm": self.commutator,
            "reflection_commutator_norm": self.reflection_commutator,
            "bethe_matches": matches.iter().map(|m| json!({
                "eigenvalue": pair(m.eigenvalue),
                "distance": m.distance,
                "overlap": m.overlap,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Outcome of the eigenvector check on positive heights at generic `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositiveCheck {
    /// Largest coefficient at states with a zero height, relative to the largest coefficient.
    pub neutral: f64,
    /// `max_b |(T Apsi)_b - eps (Apsi)_b| / max |Apsi|` over positive `b` with `b_1 <= a_max`.
    pub residual: f64,
}

/// Checks that `A psi` restricted to positive heights is an eigenvector of the row-to-row
/// transfer matrix at `mu = 0`, after verifying that its coefficients at states touching height
/// zero vanish. Output states have positive heights, so no weight is read at `lambda = 0`.
pub fn infinite_restricted_check(
    apsi: &ZeroWeightFn,
    a_max: i64,
    w: C64,
    z: &[C64],
    eps: C64,
    reference: f64,
    neutral_tol: f64,
    params: &EllipticParams,
) -> Result<PositiveCheck> {
    let n = z.len();
    let all: Vec<IrfState> = (0..=a_max + 1)
        .flat_map(|a1| cyclic_paths_from(a1, n))
        .filter(|s| s.0.iter().all(|&h| h >= 0))
        .collect();
    let coeffs = restrict_eigenfunction(apsi, &all, params)?;
    let scale = max_abs_vec(&coeffs);
    if scale <= neutral_tol * reference {
        return Err(Error::Degenerate("antisymmetrised eigenfunction vanishes on the window".into()));
    }
    let neutral = all
        .iter()
        .zip(coeffs.iter())
        .filter(|(s, _)| s.is_neutral(None))
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max)
        / scale;
    if neutral > neutral_tol {
        return Err(Error::Degenerate(format!("coefficients at zero heights do not vanish ({neutral:.3e})")));
    }
    let value: BTreeMap<&IrfState, C64> = all.iter().zip(coeffs.iter().copied()).collect();
    let zero = C64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for b in all.iter().filter(|s| !s.is_neutral(None) && s.0[0] <= a_max) {
        let mut lhs = zero;
        for a in neighbours(b).iter().filter(|a| !a.is_neutral(None)) {
            let coeff = value.get(a).copied().ok_or_else(|| Error::InvalidParams(format!("state {:?} outside window", a.0)))?;
            lhs += row_weight(b, a, w, z, zero, params)? * coeff;
        }
        worst = worst.max((lhs - eps * value[b]).norm());
    }
    Ok(PositiveCheck { neutral, residual: worst / scale })
}

fn cyclic_paths_from(a1: i64, n: usize) -> impl Iterator<Item = IrfState> {
    (0..1usize << (n - 1))
        .map(move |mask| {
            let mut a = vec![a1];
            for j in 0..n - 1 {
                let last = a[j];
                a.push(if mask >> j & 1 == 0 { last - 1 } else { last + 1 });
            }
            IrfState(a)
        })
        .filter(IrfState::is_cyclic_path)
}
