//! Dynamical R-matrices as transition matrices between weight-function bases.
//!
//! A block at level `m` acts on `span{e_i (x) e_j : i + j = m}`. Rows are the upper
//! (output) index, columns the lower (input) index, so `R^{kl}_{ij} = entries[(kl), (ij)]`
//! and `omega~_{kl} = sum_{ij} R^{kl}_{ij} omega_{ij}`.

use std::f64::consts::PI;

use serde_json::{json, Value};

use crate::elliptic_core::{elliptic_factorial, theta, theta_prime_zero, EllipticParams};
use crate::linalg::{inverse, max_abs};
use crate::weight_functions::{
    admissible_compositions, basis_matrices_on, diagonal_factors, scaled_diff, Dependence,
    ModelParams, WeightIndex, MAX_LEVEL,
};
use crate::{CMatrix, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// A diagonal factor below this modulus makes the strict builder refuse.
const STRICT_THRESHOLD: f64 = 1e-12;
/// A diagonal factor below this modulus routes through the circle mean.
const REGULARIZE_THRESHOLD: f64 = 1e-4;
const CIRCLE_NODES: usize = 24;
/// Circle radius in units of `|2 eta|`.
const CIRCLE_RADIUS: f64 = 0.06;
/// Relative size of the Laurent coefficient `c_{-1}` that signals a genuine pole.
const POLE_SIGNAL: f64 = 1e-8;

/// Highest weight of a tensor factor: a Verma module or its finite-dimensional quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Verma(C64),
    Finite(usize),
}

impl Weight {
    pub fn value(&self) -> C64 {
        match *self {
            Weight::Verma(l) => l,
            Weight::Finite(l) => C64::new(l as f64, 0.0),
        }
    }

    pub fn cap(&self) -> Option<usize> {
        match *self {
            Weight::Verma(_) => None,
            Weight::Finite(l) => Some(l),
        }
    }
}

/// Index pair `(i, j)` of `e_i (x) e_j`.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct RMatrixBlock {
    pub m: usize,
    pub indices: Vec<Pair>,
    pub entries: CMatrix,
    pub l1: C64,
    pub l2: C64,
    pub z: C64,
    pub lambda: C64,
}

impl RMatrixBlock {
    pub fn position(&self, idx: Pair) -> Option<usize> {
        self.indices.iter().position(|&p| p == idx)
    }

    /// `R^{upper}_{lower}`; zero when either index is outside the block.
    pub fn entry(&self, upper: Pair, lower: Pair) -> C64 {
        match (self.position(upper), self.position(lower)) {
            (Some(r), Some(c)) => self.entries[(r, c)],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Flat JSON record with `[re, im]` pairs and row-major entries.
    pub fn to_json(&self) -> Value {
        let pair = |x: C64| json!([x.re, x.im]);
        let mut entries = Vec::with_capacity(self.dim() * self.dim());
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                entries.push(pair(self.entries[(r, c)]));
            }
        }
        json!({
            "lambda": pair(self.lambda),
            "z": pair(self.z),
            "L1": pair(self.l1),
            "L2": pair(self.l2),
            "m": self.m,
            "indices": self.indices.iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>(),
            "entries": entries,
        })
    }
}

fn to_pairs(indices: &[WeightIndex]) -> Vec<Pair> {
    indices.iter().map(|w| (w.0[0], w.0[1])).collect()
}

#[derive(Debug, Clone, Copy)]
struct Point {
    l1: C64,
    l2: C64,
    z: C64,
    lambda: C64,
}

impl Point {
    fn model(&self, params: &EllipticParams) -> Result<ModelParams> {
        ModelParams::new(vec![self.l1, self.l2], vec![self.z, C64::new(0.0, 0.0)], *params)
    }
}

/// Diagonal factors of `A` (numerators and denominators) and `A~` (denominators) whose
/// vanishing would make `A~ A^{-1}` ill-defined, with the smallest modulus seen.
fn weakest_factors(
    pt: &Point,
    indices: &[WeightIndex],
    params: &EllipticParams,
    threshold: f64,
) -> Result<Vec<(Dependence, C64, f64)>> {
    let model = pt.model(params)?;
    let mut out = Vec::new();
    for idx in indices {
        for mirror in [false, true] {
            for f in diagonal_factors(idx, pt.lambda, &model, mirror) {
                if mirror && f.numerator {
                    continue;
                }
                let v = theta(f.arg, params).norm();
                if v < threshold {
                    out.push((f.depends_on, f.arg, v));
                }
            }
        }
    }
    Ok(out)
}

fn check_level(m: usize) -> Result<()> {
    if m > MAX_LEVEL {
        Err(Error::TooLarge(format!("level {m} exceeds cap {MAX_LEVEL}")))
    } else {
        Ok(())
    }
}

fn raw_block(pt: &Point, indices: &[WeightIndex], params: &EllipticParams) -> Result<CMatrix> {
    let model = pt.model(params)?;
    let (_, a, a_mirror) = basis_matrices_on(indices, pt.lambda, &model)?;
    let inv = inverse(&a, "weight-function matrix A")?;
    Ok(a_mirror * inv)
}

fn assemble(pt: &Point, m: usize, indices: &[WeightIndex], entries: CMatrix) -> RMatrixBlock {
    RMatrixBlock { m, indices: to_pairs(indices), entries, l1: pt.l1, l2: pt.l2, z: pt.z, lambda: pt.lambda }
}

/// `R_{L1,L2}(z, lambda)` on level `m` of the Verma tensor product, as `A~ A^{-1}`.
///
/// Refuses when a diagonal value of `A` vanishes or a diagonal factor has a pole.
pub fn build_rmatrix(l1: C64, l2: C64, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<RMatrixBlock> {
    build_strict(l1, l2, z, lambda, m, (None, None), params)
}

/// Same as [`build_rmatrix`] with the two points given separately; only `z1 - z2` matters.
pub fn build_rmatrix_at(
    l1: C64,
    l2: C64,
    z1: C64,
    z2: C64,
    lambda: C64,
    m: usize,
    params: &EllipticParams,
) -> Result<RMatrixBlock> {
    check_level(m)?;
    let model = ModelParams::new(vec![l1, l2], vec![z1, z2], *params)?;
    let indices = admissible_compositions(m, &[None, None]);
    let (_, a, a_mirror) = basis_matrices_on(&indices, lambda, &model)?;
    let entries = a_mirror * inverse(&a, "weight-function matrix A")?;
    Ok(RMatrixBlock { m, indices: to_pairs(&indices), entries, l1, l2, z: z1 - z2, lambda })
}

fn build_strict(
    l1: C64,
    l2: C64,
    z: C64,
    lambda: C64,
    m: usize,
    caps: (Option<usize>, Option<usize>),
    params: &EllipticParams,
) -> Result<RMatrixBlock> {
    check_level(m)?;
    let pt = Point { l1, l2, z, lambda };
    let indices = admissible_compositions(m, &[caps.0, caps.1]);
    if let Some((dep, arg, _)) = weakest_factors(&pt, &indices, params, STRICT_THRESHOLD)?.first() {
        return Err(Error::Singular(format!("diagonal factor theta({arg}) vanishes ({dep:?} dependence)")));
    }
    let entries = raw_block(&pt, &indices, params)?;
    Ok(assemble(&pt, m, &indices, entries))
}

/// `R` evaluated through removable singularities.
///
/// When a diagonal factor of `A` is (nearly) zero the block is replaced by its mean over a
/// small circle in the offending variables. A nonzero `1/zeta` Laurent coefficient on that
/// circle means the point is a genuine pole, which is reported.
pub fn build_rmatrix_regular(
    l1: C64,
    l2: C64,
    z: C64,
    lambda: C64,
    m: usize,
    caps: (Option<usize>, Option<usize>),
    params: &EllipticParams,
) -> Result<RMatrixBlock> {
    check_level(m)?;
    let pt = Point { l1, l2, z, lambda };
    let indices = admissible_compositions(m, &[caps.0, caps.1]);
    if indices.is_empty() {
        return Ok(assemble(&pt, m, &indices, CMatrix::zeros(0, 0)));
    }
    let weak = weakest_factors(&pt, &indices, params, REGULARIZE_THRESHOLD)?;
    if weak.is_empty() {
        let entries = raw_block(&pt, &indices, params)?;
        return Ok(assemble(&pt, m, &indices, entries));
    }
    let mut dir = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (dep, arg, _) in &weak {
        match dep {
            Dependence::Lambda => dir.3 = C64::new(1.0, 0.0),
            Dependence::Points => dir.2 = C64::new(0.7, 0.0),
            Dependence::Weight(0) if caps.0.is_none() => dir.0 = c(0.3, 0.2) / (2.0 * params.eta),
            Dependence::Weight(_) if caps.1.is_none() => dir.1 = c(0.25, -0.15) / (2.0 * params.eta),
            _ => {
                return Err(Error::Singular(format!(
                    "diagonal factor theta({arg}) vanishes ({dep:?} dependence) and cannot be regularized"
                )))
            }
        }
    }
    let radius = CIRCLE_RADIUS * (2.0 * params.eta).norm();
    let (mean, laurent) = circle_moments(radius, CIRCLE_NODES, |zeta| {
        let shifted = Point {
            l1: pt.l1 + zeta * dir.0,
            l2: pt.l2 + zeta * dir.1,
            z: pt.z + zeta * dir.2,
            lambda: pt.lambda + zeta * dir.3,
        };
        raw_block(&shifted, &indices, params)
    })?;
    if max_abs(&laurent) > POLE_SIGNAL * max_abs(&mean).max(1.0) {
        return Err(Error::Pole(format!("R-matrix has a pole at lambda = {lambda}, z = {z}")));
    }
    Ok(assemble(&pt, m, &indices, mean))
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Trapezoidal moments `(1/K) sum f(zeta_j)` and `(1/K) sum f(zeta_j) zeta_j` on a circle
/// with nodes offset by half a step.
fn circle_moments(
    radius: f64,
    nodes: usize,
    f: impl Fn(C64) -> Result<CMatrix>,
) -> Result<(CMatrix, CMatrix)> {
    let mut mean: Option<CMatrix> = None;
    let mut laurent: Option<CMatrix> = None;
    for j in 0..nodes {
        let zeta = radius * (2.0 * PI * I * (j as f64 + 0.5) / nodes as f64).exp();
        let v = f(zeta)?;
        let w = &v * zeta;
        mean = Some(match mean {
            Some(acc) => acc + v,
            None => v,
        });
        laurent = Some(match laurent {
            Some(acc) => acc + w,
            None => w,
        });
    }
    let k = nodes as f64;
    Ok((mean.expect("nodes > 0") / C64::new(k, 0.0), laurent.expect("nodes > 0") / C64::new(k, 0.0)))
}

/// Quotient block on `L_{L1} (x) L_{L2}` (indices `i <= L1`, `j <= L2` where capped).
pub fn quotient_rmatrix(w1: Weight, w2: Weight, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<RMatrixBlock> {
    build_rmatrix_regular(w1.value(), w2.value(), z, lambda, m, (w1.cap(), w2.cap()), params)
}

/// Full Verma block at integer highest weights, evaluated by the circle mean in the weights.
pub fn build_rmatrix_integral(l1: usize, l2: usize, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<RMatrixBlock> {
    build_rmatrix_regular(c(l1 as f64, 0.0), c(l2 as f64, 0.0), z, lambda, m, (None, None), params)
}

/// Restriction of a Verma block to admissible indices together with the leakage
/// `max |R^{adm}_{non-adm}|`, which must vanish because the non-admissible span is invariant.
pub fn finite_dim_project(r: &RMatrixBlock, l1: usize, l2: usize, tol: f64) -> Result<(RMatrixBlock, f64)> {
    let adm: Vec<usize> = (0..r.dim()).filter(|&k| r.indices[k].0 <= l1 && r.indices[k].1 <= l2).collect();
    let rest: Vec<usize> = (0..r.dim()).filter(|k| !adm.contains(k)).collect();
    let scale = max_abs(&r.entries).max(1.0);
    let mut leakage: f64 = 0.0;
    for &row in &adm {
        for &col in &rest {
            leakage = leakage.max(r.entries[(row, col)].norm() / scale);
        }
    }
    if leakage > tol {
        return Err(Error::Leakage { leakage, tol });
    }
    let entries = CMatrix::from_fn(adm.len(), adm.len(), |a, b| r.entries[(adm[a], adm[b])]);
    let indices = adm.iter().map(|&k| r.indices[k]).collect();
    Ok((RMatrixBlock { m: r.m, indices, entries, ..r.clone() }, leakage))
}

/// Fundamental `4 x 4` R-matrix in the basis `e0e0, e0e1, e1e0, e1e1`.
pub fn fundamental_r(z: C64, lambda: C64, params: &EllipticParams) -> Result<CMatrix> {
    let th = |x: C64| theta(x, params);
    let eta = params.eta;
    let den_z = th(z - 2.0 * eta);
    for (v, what) in [(th(lambda), "theta(lambda)"), (th(-lambda), "theta(-lambda)"), (den_z, "theta(z - 2 eta)")] {
        if v.norm() < STRICT_THRESHOLD {
            return Err(Error::Pole(format!("fundamental R-matrix: {what} vanishes")));
        }
    }
    let alpha = |l: C64| th(l + 2.0 * eta) * th(z) / (th(l) * den_z);
    let beta = |l: C64| -th(l + z) * th(2.0 * eta) / (th(l) * den_z);
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    Ok(CMatrix::from_row_slice(
        4,
        4,
        &[
            one, zero, zero, zero,
            zero, alpha(lambda), beta(lambda), zero,
            zero, beta(-lambda), alpha(-lambda), zero,
            zero, zero, zero, one,
        ],
    ))
}

fn fundamental_block(z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<RMatrixBlock> {
    let meta = Point { l1: c(1.0, 0.0), l2: c(1.0, 0.0), z, lambda };
    let (indices, entries): (Vec<Pair>, CMatrix) = match m {
        0 => (vec![(0, 0)], CMatrix::identity(1, 1)),
        1 => {
            let r = fundamental_r(z, lambda, params)?;
            (vec![(0, 1), (1, 0)], r.view((1, 1), (2, 2)).into_owned())
        }
        2 => (vec![(1, 1)], CMatrix::identity(1, 1)),
        _ => (Vec::new(), CMatrix::zeros(0, 0)),
    };
    Ok(RMatrixBlock { m, indices, entries, l1: meta.l1, l2: meta.l2, z, lambda })
}

/// Block of `R_{w1,w2}(z, lambda)` at level `m`: closed form for two fundamental factors,
/// otherwise the (quotient of the) geometric construction.
pub fn r_block(w1: Weight, w2: Weight, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<RMatrixBlock> {
    if w1 == Weight::Finite(1) && w2 == Weight::Finite(1) {
        return fundamental_block(z, lambda, m, params);
    }
    if m == 0 {
        let pt = Point { l1: w1.value(), l2: w2.value(), z, lambda };
        return Ok(RMatrixBlock { m, indices: vec![(0, 0)], entries: CMatrix::identity(1, 1), l1: pt.l1, l2: pt.l2, z, lambda });
    }
    quotient_rmatrix(w1, w2, z, lambda, m, params)
}

/// States of a tensor product of three factors at a fixed level.
fn triple_states(weights: &[Weight; 3], m: usize) -> Vec<[usize; 3]> {
    let caps: Vec<Option<usize>> = weights.iter().map(|w| w.cap()).collect();
    admissible_compositions(m, &caps).into_iter().map(|w| [w.0[0], w.0[1], w.0[2]]).collect()
}

/// Matrix of `R_{wa,wb}(z, lambda - 2 eta h^{(spectator)})` acting in slots `(a, b)` of a
/// three-factor level-`m` space.
fn embed_pair(
    states: &[[usize; 3]],
    weights: &[Weight; 3],
    slots: (usize, usize),
    z: C64,
    lambda: C64,
    spectator: Option<usize>,
    params: &EllipticParams,
) -> Result<CMatrix> {
    let (a, b) = slots;
    let d = states.len();
    let mut out = CMatrix::zeros(d, d);
    let mut cache: Vec<((usize, usize), RMatrixBlock)> = Vec::new();
    for (col, s) in states.iter().enumerate() {
        let shift = spectator.map_or(c(0.0, 0.0), |k| weights[k].value() - 2.0 * s[k] as f64);
        let level = s[a] + s[b];
        let key = (level, spectator.map_or(0, |k| s[k]));
        let block = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, blk)) => blk.clone(),
            None => {
                let blk = r_block(weights[a], weights[b], z, lambda - 2.0 * params.eta * shift, level, params)?;
                cache.push((key, blk.clone()));
                blk
            }
        };
        let col_pos = block.position((s[a], s[b])).ok_or_else(|| Error::InvalidParams("state outside block".into()))?;
        for (row_pos, &(i, j)) in block.indices.iter().enumerate() {
            let mut t = *s;
            t[a] = i;
            t[b] = j;
            if let Some(row) = states.iter().position(|x| *x == t) {
                out[(row, col)] += block.entries[(row_pos, col_pos)];
            }
        }
    }
    Ok(out)
}

/// Largest entry of `LHS - RHS` of the dynamical Yang-Baxter equation on level `m`,
/// relative to the largest entry of either side.
pub fn dybe_residual(
    weights: [Weight; 3],
    z: C64,
    w: C64,
    lambda: C64,
    m: usize,
    params: &EllipticParams,
) -> Result<f64> {
    let states = triple_states(&weights, m);
    if states.is_empty() {
        return Ok(0.0);
    }
    let r12_shift = embed_pair(&states, &weights, (0, 1), z, lambda, Some(2), params)?;
    let r13 = embed_pair(&states, &weights, (0, 2), z + w, lambda, None, params)?;
    let r23_shift = embed_pair(&states, &weights, (1, 2), w, lambda, Some(0), params)?;
    let r23 = embed_pair(&states, &weights, (1, 2), w, lambda, None, params)?;
    let r13_shift = embed_pair(&states, &weights, (0, 2), z + w, lambda, Some(1), params)?;
    let r12 = embed_pair(&states, &weights, (0, 1), z, lambda, None, params)?;
    let lhs = r12_shift * r13 * r23_shift;
    let rhs = r23 * r13_shift * r12;
    Ok(max_abs(&(&lhs - &rhs)) / max_abs(&lhs).max(max_abs(&rhs)).max(1.0))
}

/// `max |R_{12}(z, lambda) P R_{21}(-z, lambda) P - Id|` on level `m`.
pub fn unitarity_residual(w1: Weight, w2: Weight, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<f64> {
    let r12 = r_block(w1, w2, z, lambda, m, params)?;
    let r21 = r_block(w2, w1, -z, lambda, m, params)?;
    let d = r12.dim();
    let flipped = CMatrix::from_fn(d, d, |row, col| {
        let (k, l) = r12.indices[row];
        let (i, j) = r12.indices[col];
        r21.entry((l, k), (j, i))
    });
    Ok(max_abs(&(&r12.entries * flipped - CMatrix::identity(d, d))))
}

/// `det R` on level `m` against the ratio of diagonal values of `A~` and `A`.
pub fn determinant_residual(l1: C64, l2: C64, z: C64, lambda: C64, m: usize, params: &EllipticParams) -> Result<f64> {
    let r = build_rmatrix(l1, l2, z, lambda, m, params)?;
    let model = ModelParams::new(vec![l1, l2], vec![z, c(0.0, 0.0)], *params)?;
    let indices = admissible_compositions(m, &[None, None]);
    let mut expect = c(1.0, 0.0);
    for idx in &indices {
        expect *= crate::weight_functions::diagonal_closed_form(idx, lambda, &model, true)
            / crate::weight_functions::diagonal_closed_form(idx, lambda, &model, false);
    }
    Ok(scaled_diff(r.entries.determinant(), expect))
}

/// Reciprocal elliptic factorial with `1/[j]! = 0` for negative `j`.
pub fn reciprocal_factorial(j: i64, params: &EllipticParams) -> Result<C64> {
    if j < 0 {
        Ok(c(0.0, 0.0))
    } else {
        Ok(elliptic_factorial(j, params)?.inv())
    }
}

/// Diagonal Shapovalov coefficient `Q_k^{L}(lambda)` of a single factor.
pub fn shapovalov_factor(l: C64, k: usize, lambda: C64, params: &EllipticParams) -> Result<C64> {
    let eta = params.eta;
    let th = |x: C64| theta(x, params);
    let mut q = (theta_prime_zero(params) / th(2.0 * eta)).powu(k as u32);
    for l_idx in 1..=k {
        let lf = l_idx as f64;
        let den = th(lambda + 2.0 * eta * (l + 1.0 - k as f64 - lf)) * th(lambda - 2.0 * eta * lf);
        if den.norm() < STRICT_THRESHOLD {
            return Err(Error::Pole(format!("Shapovalov factor at lambda = {lambda}")));
        }
        q *= th(2.0 * eta * (l + 1.0 - lf)) * th(2.0 * eta * lf) / den;
    }
    Ok(q)
}

/// Shapovalov coefficient `Q_M(lambda)` on the zero-weight space.
pub fn shapovalov(index: &WeightIndex, lambda: C64, model: &ModelParams) -> Result<C64> {
    let eta = model.eta();
    let mut shift = c(0.0, 0.0);
    let mut q = c(1.0, 0.0);
    for (j, &mj) in index.parts().iter().enumerate() {
        q *= shapovalov_factor(model.lambdas[j], mj, lambda + 2.0 * eta * shift, &model.params)?;
        shift += model.lambdas[j] - 2.0 * mj as f64;
    }
    Ok(q)
}

/// One element `lambda_{M,j,l}` of the pole set of `Q_M` (zero-based `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapovalovPole {
    pub j: usize,
    pub l: usize,
    pub value: C64,
}

/// The `2m` poles of `Q_M`.
pub fn shapovalov_poles(index: &WeightIndex, lambdas: &[C64], eta: C64) -> Vec<ShapovalovPole> {
    let parts = index.parts();
    let n = parts.len();
    let mut out = Vec::new();
    let mut shift = c(0.0, 0.0);
    for j in 0..n.saturating_sub(1) {
        for l in 0..=parts[j] + parts[j + 1] {
            if l != parts[j] {
                let value = -2.0 * eta * (lambdas[j] - parts[j] as f64 - l as f64 + shift);
                out.push(ShapovalovPole { j, l, value });
            }
        }
        shift += lambdas[j] - 2.0 * parts[j] as f64;
    }
    if n >= 1 {
        let last = n - 1;
        let span = if n == 1 { parts[0] } else { parts[last] + parts[0] };
        for l in 0..=span {
            if l != parts[last] {
                let value = -2.0 * eta * (parts[last] as f64 - l as f64);
                out.push(ShapovalovPole { j: last, l, value });
            }
        }
    }
    out
}

/// Index dual to `M` with respect to `lambda_{M,j,l}` and the pole as seen from the dual.
pub fn dual_index(index: &WeightIndex, j: usize, l: usize, lambdas: &[C64], eta: C64) -> (WeightIndex, C64) {
    let mut parts = index.0.clone();
    let n = parts.len();
    if j + 1 < n {
        let total = parts[j] + parts[j + 1];
        parts[j] = l;
        parts[j + 1] = total - l;
        let dual = WeightIndex(parts);
        let shift: C64 = dual.weights(lambdas)[..j].iter().sum();
        let value = -2.0 * eta * (lambdas[j] - l as f64 - index.0[j] as f64 + shift);
        (dual, value)
    } else {
        let total = parts[0] + parts[n - 1];
        parts[0] = total - l;
        parts[n - 1] = l;
        let value = -2.0 * eta * (l as f64 - index.0[n - 1] as f64);
        (WeightIndex(parts), value)
    }
}

/// Scaled residual of the relation between R-matrix entries and Shapovalov factors:
///
/// `Q_j^{L1}(lambda + 2 eta (L2 - 2k)) Q_k^{L2}(lambda) R^{jk}_{rs}(-lambda)
///  = Q_r^{L1}(lambda) Q_s^{L2}(lambda + 2 eta (L1 - 2r)) R^{rs}_{jk}(lambda + 2 eta (L1 + L2 - 2(r+s)))`.
pub fn qr_relation_residual(
    jk: Pair,
    rs: Pair,
    lambda: C64,
    l1: C64,
    l2: C64,
    z: C64,
    params: &EllipticParams,
) -> Result<f64> {
    let (j, k) = jk;
    let (r, s) = rs;
    if j + k != r + s {
        return Err(Error::InvalidParams("Q-R relation needs equal levels".into()));
    }
    let m = j + k;
    let eta = params.eta;
    let caps = (None, None);
    let left_r = build_rmatrix_regular(l1, l2, z, -lambda, m, caps, params)?;
    let right_r = build_rmatrix_regular(l1, l2, z, lambda + 2.0 * eta * (l1 + l2 - 2.0 * m as f64), m, caps, params)?;
    let lhs = shapovalov_factor(l1, j, lambda + 2.0 * eta * (l2 - 2.0 * k as f64), params)?
        * shapovalov_factor(l2, k, lambda, params)?
        * left_r.entry((j, k), (r, s));
    let rhs = shapovalov_factor(l1, r, lambda, params)?
        * shapovalov_factor(l2, s, lambda + 2.0 * eta * (l1 - 2.0 * r as f64), params)?
        * right_r.entry((r, s), (j, k));
    Ok(scaled_diff(lhs, rhs))
}

/// Contour data around a candidate pole of `lambda -> R(z, lambda)`.
#[derive(Debug, Clone)]
pub struct PoleResidue {
    pub pole: C64,
    /// `(1 / 2 pi i) \oint R d lambda`.
    pub residue: CMatrix,
    /// `(1 / 2 pi i) \oint (lambda - pole) R d lambda`; vanishes for a simple pole.
    pub second_moment: CMatrix,
    /// Radius of the quadrature circle.
    pub radius: f64,
}

pub const RESIDUE_RADIUS: f64 = 1e-3;
pub const RESIDUE_NODES: usize = 32;

/// Residue of `R_{L1,L2}(z, .)` at `pole` by trapezoidal quadrature on a small circle.
pub fn lambda_pole_residue(l1: C64, l2: C64, z: C64, pole: C64, m: usize, params: &EllipticParams) -> Result<PoleResidue> {
    let radius = RESIDUE_RADIUS;
    let two_eta = 2.0 * params.eta;
    // Every other candidate singularity in lambda must stay well outside the circle.
    let tau = params.tau;
    for k in -(2 * m as i64 + 2)..=(2 * m as i64 + 2) {
        for base in [two_eta * (l1 - k as f64), two_eta * (l1 + l2 - k as f64)] {
            let d = crate::sampling::lattice_distance(pole, base, tau);
            if d > 1e-9 && d < 3.0 * radius {
                return Err(Error::InvalidParams(format!(
                    "quadrature circle around {pole} meets another singularity at distance {d:.2e}"
                )));
            }
        }
    }
    let indices = admissible_compositions(m, &[None, None]);
    let eval = |zeta: C64| -> Result<CMatrix> {
        let pt = Point { l1, l2, z, lambda: pole + zeta };
        raw_block(&pt, &indices, params)
    };
    let mut residue = CMatrix::zeros(indices.len(), indices.len());
    let mut second = residue.clone();
    for j in 0..RESIDUE_NODES {
        let zeta = radius * (2.0 * PI * I * (j as f64 + 0.5) / RESIDUE_NODES as f64).exp();
        let v = eval(zeta)?;
        residue += &v * (zeta / RESIDUE_NODES as f64);
        second += &v * (zeta * zeta / RESIDUE_NODES as f64);
    }
    Ok(PoleResidue { pole, residue, second_moment: second, radius })
}

/// Outcome of the kernel test for a residue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelReport {
    /// `max ||K u|| / (||K|| ||u||)` over a basis of the predicted kernel.
    pub kernel_residual: f64,
    /// `min ||K v|| / (||K|| ||v||)` over vectors breaking one relation; bounded away from 0.
    pub complement_ratio: f64,
}

/// Checks that the residue at `2 eta (L1 - k) + r + s tau` annihilates exactly the vectors with
/// `[a]! [m-a]! e^{2 pi i s a (-z + eta L1 + eta L2)} u_{a, m-a}` equal along `a + b = k`.
pub fn residue_kernel_check(
    residue: &CMatrix,
    m: usize,
    k: usize,
    s: i64,
    l1: C64,
    l2: C64,
    z: C64,
    params: &EllipticParams,
) -> Result<KernelReport> {
    let dim = m + 1;
    if residue.nrows() != dim {
        return Err(Error::InvalidParams("residue has wrong size".into()));
    }
    let phase_arg = -z + params.eta * (l1 + l2);
    let weight = |a: usize| -> Result<C64> {
        let phase = (2.0 * PI * I * (s as f64) * (a as f64) * phase_arg).exp();
        Ok(elliptic_factorial(a as i64, params)? * elliptic_factorial((m - a) as i64, params)? * phase)
    };
    let mut kernel = Vec::new();
    let mut broken = Vec::new();
    let paired = |a: usize| k >= a && k - a <= m && k - a != a;
    for a in 0..dim {
        if !paired(a) {
            let mut u = crate::CVector::zeros(dim);
            u[a] = c(1.0, 0.0);
            kernel.push(u);
        } else if a < k - a {
            let b = k - a;
            let mut u = crate::CVector::zeros(dim);
            u[a] = weight(a)?.inv();
            u[b] = weight(b)?.inv();
            kernel.push(u.clone());
            u[b] = -u[b];
            broken.push(u);
        }
    }
    let norm = crate::linalg::operator_norm(residue).max(1e-300);
    let ratio = |u: &crate::CVector| (residue * u).norm() / (norm * u.norm());
    Ok(KernelReport {
        kernel_residual: kernel.iter().map(ratio).fold(0.0, f64::max),
        complement_ratio: broken.iter().map(ratio).fold(f64::INFINITY, f64::min),
    })
}

/// Which of the two coefficient relations to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffKind {
    /// Relates `R^{a,b}_{d,c}` and `R^{a,b'}_{d',c}` at `lambda = +-2 eta (b' - b)`.
    First,
    /// Relates `R^{a,b}_{d,c}` and `R^{a',b}_{d,c'}` at `lambda = 2 eta (L1 + L2 - 2b - a - a')`.
    Second,
}

/// Indices of a coefficient relation; the remaining index on each side follows from
/// conservation of the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffIndices {
    pub a: i64,
    pub b: i64,
    /// `b'` for the first relation, `a'` for the second.
    pub primed: i64,
    /// `c` for the first relation, `d` for the second.
    pub fixed: i64,
}

/// Parameters shared by the two sides of a coefficient relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffSetting {
    pub l1: C64,
    pub l2: C64,
    pub z: C64,
    pub w: C64,
    pub r: i64,
    pub s: i64,
}

fn entry_or_zero(
    l1: C64,
    l2: C64,
    z: C64,
    lambda: C64,
    upper: (i64, i64),
    lower: (i64, i64),
    params: &EllipticParams,
) -> Result<C64> {
    let all = [upper.0, upper.1, lower.0, lower.1];
    if all.iter().any(|&x| x < 0) || upper.0 + upper.1 != lower.0 + lower.1 {
        return Ok(c(0.0, 0.0));
    }
    let m = (upper.0 + upper.1) as usize;
    let block = build_rmatrix_regular(l1, l2, z, lambda, m, (None, None), params)?;
    Ok(block.entry((upper.0 as usize, upper.1 as usize), (lower.0 as usize, lower.1 as usize)))
}

/// Scaled residual of one coefficient relation, with lattice shift `r + s tau`.
pub fn coeff_relation_residual(kind: CoeffKind, idx: CoeffIndices, set: CoeffSetting, params: &EllipticParams) -> Result<f64> {
    let eta = params.eta;
    let shift = set.r as f64 + set.s as f64 * params.tau;
    let e = |x: C64| (2.0 * PI * I * (set.s as f64) * x).exp();
    let fact = |j: i64| -> Result<C64> {
        if j < 0 {
            Ok(c(0.0, 0.0))
        } else {
            elliptic_factorial(j, params)
        }
    };
    let zw = set.z - set.w;
    let (lhs, rhs) = match kind {
        CoeffKind::First => {
            let (a, b, b2, cc) = (idx.a, idx.b, idx.primed, idx.fixed);
            let d = a + b - cc;
            let d2 = a + b2 - cc;
            let side = |bb: i64, dd: i64, lam: C64| -> Result<C64> {
                let pref = e(bb as f64 * (-set.w + eta * set.l1) + dd as f64 * (set.z - eta * set.l2));
                let entry = entry_or_zero(set.l1, set.l2, zw, lam, (a, bb), (dd, cc), params)?;
                Ok(pref * fact(bb)? * reciprocal_factorial(dd, params)? * entry)
            };
            (
                side(b, d, 2.0 * eta * (b2 - b) as f64 + shift)?,
                side(b2, d2, 2.0 * eta * (b - b2) as f64 + shift)?,
            )
        }
        CoeffKind::Second => {
            let (a, a2, b, d) = (idx.a, idx.primed, idx.b, idx.fixed);
            let cc = a + b - d;
            let c2 = a2 + b - d;
            let lam = 2.0 * eta * (set.l1 + set.l2 - (2 * b + a + a2) as f64) + shift;
            let side = |aa: i64, ccc: i64| -> Result<C64> {
                let pref = e(aa as f64 * (-set.z - eta * set.l2) + ccc as f64 * (set.w + eta * set.l1));
                let entry = entry_or_zero(set.l1, set.l2, zw, lam, (aa, b), (d, ccc), params)?;
                Ok(pref * fact(aa)? * reciprocal_factorial(ccc, params)? * entry)
            };
            (side(a, cc)?, side(a2, c2)?)
        }
    };
    Ok(scaled_diff(lhs, rhs))
}
