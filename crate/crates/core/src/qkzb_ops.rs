//! Difference operators on functions `lambda -> V[0]`.
//!
//! Functions are evaluators, not grids: an operator wraps its input and only calls it at the
//! shifted points it needs when the output is evaluated. All operators act in the standard
//! basis `e_M`; functions given in the reduced basis `E_M = e_M / ([m_1]! ... [m_n]!)` are
//! converted on the way in.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::elliptic_core::{elliptic_factorial, EllipticParams};
use crate::rmatrix::{r_block, Weight};
use crate::sampling::{ProbeFunction, Sampler};
use crate::weight_functions::admissible_compositions;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Zero-weight (or fixed-level) subspace of a tensor product of highest-weight modules.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace {
    weights: Vec<Weight>,
    level: usize,
    states: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl TensorSpace {
    /// Level-`level` span of `e_{m_1} (x) ... (x) e_{m_n}`, truncated by finite weights.
    pub fn new(weights: Vec<Weight>, level: usize) -> Self {
        let caps: Vec<Option<usize>> = weights.iter().map(|w| w.cap()).collect();
        let states: Vec<Vec<usize>> = admissible_compositions(level, &caps).into_iter().map(|w| w.0).collect();
        let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { weights, level, states, lookup }
    }

    /// Zero-weight space; requires the highest weights to sum to an even integer `2m`.
    pub fn zero_weight(weights: Vec<Weight>) -> Result<Self> {
        let total: C64 = weights.iter().map(|w| w.value()).sum();
        let m = total.re / 2.0;
        if total.im.abs() > 1e-12 || (m - m.round()).abs() > 1e-12 || m < -1e-12 {
            return Err(Error::InvalidParams(format!("weights sum to {total}, not an even non-negative integer")));
        }
        Ok(Self::new(weights, m.round() as usize))
    }

    /// `n` copies of the two-dimensional module.
    pub fn fundamental(n: usize) -> Result<Self> {
        Self::zero_weight(vec![Weight::Finite(1); n])
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn index_of(&self, state: &[usize]) -> Option<usize> {
        self.lookup.get(state).copied()
    }

    /// Eigenvalue of `h^{(l)}` on a state.
    pub fn h(&self, state: &[usize], l: usize) -> C64 {
        self.weights[l].value() - 2.0 * state[l] as f64
    }

    fn shift_sum(&self, state: &[usize], set: &[usize]) -> C64 {
        set.iter().map(|&l| self.h(state, l)).sum()
    }

    /// Same level, weights permuted so that new position `i` holds old factor `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self::new(order.iter().map(|&i| self.weights[i]).collect(), self.level)
    }

    /// `prod_j [m_j]!` for each state, the factor relating standard and reduced coordinates.
    pub fn factorial_weights(&self, params: &EllipticParams) -> Result<Vec<C64>> {
        self.states
            .iter()
            .map(|s| s.iter().try_fold(C64::new(1.0, 0.0), |acc, &mj| Ok(acc * elliptic_factorial(mj as i64, params)?)))
            .collect()
    }
}

/// Coordinates are with respect to `e_M` or `E_M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Standard,
    Reduced,
}

pub type Evaluator = Arc<dyn Fn(C64) -> Result<CVector> + Send + Sync>;

/// A function of the dynamical variable with values in a [`TensorSpace`].
#[derive(Clone)]
pub struct ZeroWeightFn {
    space: Arc<TensorSpace>,
    basis: BasisKind,
    evaluator: Evaluator,
}

impl fmt::Debug for ZeroWeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZeroWeightFn").field("dim", &self.space.dim()).field("basis", &self.basis).finish()
    }
}

impl ZeroWeightFn {
    pub fn new(space: Arc<TensorSpace>, basis: BasisKind, evaluator: impl Fn(C64) -> Result<CVector> + Send + Sync + 'static) -> Self {
        Self { space, basis, evaluator: Arc::new(evaluator) }
    }

    pub fn zero(space: Arc<TensorSpace>) -> Self {
        let dim = space.dim();
        Self::new(space, BasisKind::Standard, move |_| Ok(CVector::zeros(dim)))
    }

    /// Random trigonometric polynomial in `e^{2 pi i lambda}`.
    pub fn probe(space: Arc<TensorSpace>, degree: i64, sampler: &mut Sampler) -> Self {
        let probe = ProbeFunction::random(space.dim(), degree, sampler);
        Self::new(space, BasisKind::Standard, move |lambda| Ok(probe.eval(lambda)))
    }

    pub fn space(&self) -> &Arc<TensorSpace> {
        &self.space
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn eval(&self, lambda: C64) -> Result<CVector> {
        let v = (self.evaluator)(lambda)?;
        if v.len() != self.space.dim() {
            return Err(Error::InvalidParams(format!("evaluator returned {} coordinates, expected {}", v.len(), self.space.dim())));
        }
        Ok(v)
    }

    fn rescaled(&self, basis: BasisKind, params: &EllipticParams, invert: bool) -> Result<Self> {
        let mut weights = self.space.factorial_weights(params)?;
        if invert {
            weights.iter_mut().for_each(|w| *w = w.inv());
        }
        let inner = self.evaluator.clone();
        Ok(Self::new(self.space.clone(), basis, move |lambda| {
            let mut v = inner(lambda)?;
            v.iter_mut().zip(&weights).for_each(|(x, w)| *x *= w);
            Ok(v)
        }))
    }

    /// Coordinates `psi_M = [m_1]! ... [m_n]! u_M` with respect to `E_M`.
    pub fn to_reduced(&self, params: &EllipticParams) -> Result<Self> {
        match self.basis {
            BasisKind::Reduced => Ok(self.clone()),
            BasisKind::Standard => self.rescaled(BasisKind::Reduced, params, false),
        }
    }

    pub fn to_standard(&self, params: &EllipticParams) -> Result<Self> {
        match self.basis {
            BasisKind::Standard => Ok(self.clone()),
            BasisKind::Reduced => self.rescaled(BasisKind::Standard, params, true),
        }
    }

    /// Pointwise linear combination `a f + b g` (same space and basis).
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        if self.space != other.space || self.basis != other.basis {
            return Err(Error::InvalidParams("combining functions on different spaces".into()));
        }
        let (f, g) = (self.evaluator.clone(), other.evaluator.clone());
        Ok(Self::new(self.space.clone(), self.basis, move |lambda| Ok(f(lambda)? * a + g(lambda)? * b)))
    }
}

type Transform = Arc<dyn Fn(&ZeroWeightFn) -> Result<ZeroWeightFn> + Send + Sync>;

/// Linear operator on functions of `lambda`, together with the offsets at which it reads
/// its input.
#[derive(Clone)]
pub struct Operator {
    name: String,
    source: Arc<TensorSpace>,
    target: Arc<TensorSpace>,
    offsets: Vec<C64>,
    params: EllipticParams,
    transform: Transform,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator").field("name", &self.name).field("offsets", &self.offsets).finish()
    }
}

fn merge_offsets(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for x in a {
        for y in b {
            let s = x + y;
            if !out.iter().any(|o| (o - s).norm() < 1e-12) {
                out.push(s);
            }
        }
    }
    out
}

impl Operator {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &Arc<TensorSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<TensorSpace> {
        &self.target
    }

    /// `lambda`-offsets read from the input.
    pub fn offsets(&self) -> &[C64] {
        &self.offsets
    }

    pub fn apply(&self, f: &ZeroWeightFn) -> Result<ZeroWeightFn> {
        if **f.space() != *self.source {
            return Err(Error::InvalidParams(format!("{} applied to a function on the wrong space", self.name)));
        }
        let f = f.to_standard(&self.params)?;
        (self.transform)(&f)
    }

    /// `next` applied after `self`.
    pub fn then(&self, next: &Operator) -> Result<Operator> {
        if *self.target != *next.source {
            return Err(Error::InvalidParams(format!("cannot compose {} with {}", next.name, self.name)));
        }
        let (first, second) = (self.transform.clone(), next.transform.clone());
        Ok(Operator {
            name: format!("{} {}", next.name, self.name),
            source: self.source.clone(),
            target: next.target.clone(),
            offsets: merge_offsets(&self.offsets, &next.offsets),
            params: self.params,
            transform: Arc::new(move |f| second(&first(f)?)),
        })
    }

    /// Applies the operators in order: `ops[0]` first.
    pub fn chain(ops: &[Operator]) -> Result<Operator> {
        let (head, rest) = ops.split_first().ok_or_else(|| Error::InvalidParams("empty operator chain".into()))?;
        rest.iter().try_fold(head.clone(), |acc, op| acc.then(op))
    }

    /// `g(lambda) = matrix(lambda) f(lambda)`.
    pub fn pointwise(
        name: impl Into<String>,
        source: Arc<TensorSpace>,
        target: Arc<TensorSpace>,
        params: EllipticParams,
        matrix: impl Fn(C64) -> Result<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        let matrix = Arc::new(matrix);
        let out_space = target.clone();
        Operator {
            name: name.into(),
            source,
            target,
            offsets: vec![C64::new(0.0, 0.0)],
            params,
            transform: Arc::new(move |f: &ZeroWeightFn| {
                let (f, m) = (f.clone(), matrix.clone());
                Ok(ZeroWeightFn::new(out_space.clone(), BasisKind::Standard, move |lambda| Ok(m(lambda)? * f.eval(lambda)?)))
            }),
        }
    }

    pub fn identity(space: Arc<TensorSpace>, params: EllipticParams) -> Self {
        let dim = space.dim();
        Self::pointwise("Id", space.clone(), space, params, move |_| Ok(CMatrix::identity(dim, dim)))
    }
}

/// `(Gamma_j f)(lambda)` has the components of weight `mu` in factor `j` read at `lambda - 2 eta mu`.
pub fn gamma_j(space: Arc<TensorSpace>, j: usize, params: &EllipticParams) -> Result<Operator> {
    if j >= space.n() {
        return Err(Error::InvalidParams(format!("factor {j} out of range")));
    }
    let eta = params.eta;
    let shifts: Vec<C64> = space.states().iter().map(|s| -2.0 * eta * space.h(s, j)).collect();
    let mut offsets: Vec<C64> = Vec::new();
    for s in &shifts {
        if !offsets.iter().any(|o| (o - s).norm() < 1e-12) {
            offsets.push(*s);
        }
    }
    let groups: Vec<(C64, Vec<usize>)> = offsets
        .iter()
        .map(|&o| (o, (0..shifts.len()).filter(|&i| (shifts[i] - o).norm() < 1e-12).collect()))
        .collect();
    let out_space = space.clone();
    let dim = space.dim();
    Ok(Operator {
        name: format!("Gamma_{}", j + 1),
        source: space.clone(),
        target: space,
        offsets,
        params: *params,
        transform: Arc::new(move |f: &ZeroWeightFn| {
            let (f, groups) = (f.clone(), groups.clone());
            Ok(ZeroWeightFn::new(out_space.clone(), BasisKind::Standard, move |lambda| {
                let mut out = CVector::zeros(dim);
                for (offset, members) in &groups {
                    let v = f.eval(lambda + offset)?;
                    for &i in members {
                        out[i] = v[i];
                    }
                }
                Ok(out)
            }))
        }),
    })
}

/// Matrix of `R_{L_j, L_k}(z, lambda - 2 eta sum_{l in shift_set} h^{(l)})` acting in slots
/// `(j, k)`, slot `j` first.
pub fn pair_matrix(
    space: &TensorSpace,
    slots: (usize, usize),
    z: C64,
    lambda: C64,
    shift_set: &[usize],
    params: &EllipticParams,
) -> Result<CMatrix> {
    let (j, k) = slots;
    let dim = space.dim();
    let mut out = CMatrix::zeros(dim, dim);
    let mut cache: HashMap<(usize, Vec<usize>), crate::rmatrix::RMatrixBlock> = HashMap::new();
    for (col, s) in space.states().iter().enumerate() {
        let level = s[j] + s[k];
        let key = (level, shift_set.iter().map(|&l| s[l]).collect::<Vec<_>>());
        if !cache.contains_key(&key) {
            let shifted = lambda - 2.0 * params.eta * space.shift_sum(s, shift_set);
            let block = r_block(space.weights()[j], space.weights()[k], z, shifted, level, params)
                .map_err(|e| Error::Pole(format!("R_({},{}) at z = {z}: {e}", j + 1, k + 1)))?;
            cache.insert(key.clone(), block);
        }
        let block = &cache[&key];
        let col_pos = block.position((s[j], s[k])).ok_or_else(|| Error::InvalidParams("state outside R-block".into()))?;
        let mut t = s.clone();
        for (row_pos, &(a, b)) in block.indices.iter().enumerate() {
            t[j] = a;
            t[k] = b;
            if let Some(row) = space.index_of(&t) {
                out[(row, col)] += block.entries[(row_pos, col_pos)];
            }
        }
    }
    Ok(out)
}

/// Dynamical R-operator `R_{j,k}(z)` with shift set given explicitly.
pub fn r_operator(space: Arc<TensorSpace>, slots: (usize, usize), z: C64, shift_set: Vec<usize>, params: &EllipticParams) -> Operator {
    let p = *params;
    let inner = space.clone();
    Operator::pointwise(format!("R_({},{})", slots.0 + 1, slots.1 + 1), space.clone(), space, p, move |lambda| {
        pair_matrix(&inner, slots, z, lambda, &shift_set, &p)
    })
}

fn check_points(space: &TensorSpace, z: &[C64]) -> Result<()> {
    if z.len() != space.n() {
        Err(Error::InvalidParams(format!("{} points for {} factors", z.len(), space.n())))
    } else {
        Ok(())
    }
}

/// qKZB operator
/// `K_j = R_{j,j-1}(z_j - z_{j-1} + p) ... R_{j,1}(z_j - z_1 + p) Gamma_j R_{j,n}(z_j - z_n) ... R_{j,j+1}(z_j - z_{j+1})`
/// where `R_{j,k}` is shifted by `h^{(l)}` for `l < k`, `l != j` (zero-based `j`).
pub fn kzb_operator(space: Arc<TensorSpace>, j: usize, z: &[C64], params: &EllipticParams) -> Result<Operator> {
    check_points(&space, z)?;
    let n = space.n();
    let mut ops = Vec::new();
    for k in j + 1..n {
        let set = (0..k).filter(|&l| l != j).collect();
        ops.push(r_operator(space.clone(), (j, k), z[j] - z[k], set, params));
    }
    ops.push(gamma_j(space.clone(), j, params)?);
    for k in 0..j {
        let set = (0..k).filter(|&l| l != j).collect();
        ops.push(r_operator(space.clone(), (j, k), z[j] - z[k] + params.p, set, params));
    }
    let mut op = Operator::chain(&ops)?;
    op.name = format!("K_{}", j + 1);
    Ok(op)
}

/// Mirror qKZB operator
/// `K^v_j = R^v_{j,j+1}(z_j - z_{j+1} + p) ... R^v_{j,n}(z_j - z_n + p) Gamma_j R^v_{j,1}(z_j - z_1) ... R^v_{j,j-1}(z_j - z_{j-1})`
/// where `R^v_{j,k}` is shifted by `h^{(l)}` for `l > k`, `l != j`.
pub fn mirror_kzb_operator(space: Arc<TensorSpace>, j: usize, z: &[C64], params: &EllipticParams) -> Result<Operator> {
    check_points(&space, z)?;
    let n = space.n();
    let mut ops = Vec::new();
    for k in (0..j).rev() {
        let set = (k + 1..n).filter(|&l| l != j).collect();
        ops.push(r_operator(space.clone(), (j, k), z[j] - z[k], set, params));
    }
    ops.push(gamma_j(space.clone(), j, params)?);
    for k in (j + 1..n).rev() {
        let set = (k + 1..n).filter(|&l| l != j).collect();
        ops.push(r_operator(space.clone(), (j, k), z[j] - z[k] + params.p, set, params));
    }
    let mut op = Operator::chain(&ops)?;
    op.name = format!("K^v_{}", j + 1);
    Ok(op)
}

/// Commuting operator `H_j`: the qKZB operator at `p = 0`.
pub fn h_operator(space: Arc<TensorSpace>, j: usize, z: &[C64], params: &EllipticParams) -> Result<Operator> {
    let mut op = kzb_operator(space, j, z, &params.with_p(C64::new(0.0, 0.0))?)?;
    op.name = format!("H_{}", j + 1);
    Ok(op)
}

/// Relabelling of tensor factors: new position `i` holds old factor `order[i]`.
pub fn permutation_operator(space: Arc<TensorSpace>, order: Vec<usize>, params: &EllipticParams) -> Result<Operator> {
    let n = space.n();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::InvalidParams(format!("{order:?} is not a permutation of {n} factors")));
    }
    let target = Arc::new(space.permuted(&order));
    let dim = space.dim();
    let mut matrix = CMatrix::zeros(dim, dim);
    for (col, s) in space.states().iter().enumerate() {
        let t: Vec<usize> = order.iter().map(|&i| s[i]).collect();
        let row = target.index_of(&t).ok_or_else(|| Error::InvalidParams("permuted state missing".into()))?;
        matrix[(row, col)] = C64::new(1.0, 0.0);
    }
    Ok(Operator::pointwise(format!("P{order:?}"), space, target, *params, move |_| Ok(matrix.clone())))
}

fn transposition(n: usize, j: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.swap(j, j + 1);
    order
}

/// `s_j(z) = P^{(j,j+1)} R_{L_j, L_{j+1}}(z, lambda - 2 eta sum_{l<j} h^{(l)})^{(j,j+1)}`.
pub fn s_operator(space: Arc<TensorSpace>, j: usize, z: C64, params: &EllipticParams) -> Result<Operator> {
    if j + 1 >= space.n() {
        return Err(Error::InvalidParams(format!("s_{} needs factors {} and {}", j + 1, j + 1, j + 2)));
    }
    let r = r_operator(space.clone(), (j, j + 1), z, (0..j).collect(), params);
    let p = permutation_operator(space.clone(), transposition(space.n(), j), params)?;
    let mut op = r.then(&p)?;
    op.name = format!("s_{}", j + 1);
    Ok(op)
}

/// `Delta = Gamma_1 P^{(1,2)} P^{(2,3)} ... P^{(n-1,n)}`, mapping `V_{L_1..L_n}` to
/// `V_{L_n, L_1, ..., L_{n-1}}`.
pub fn delta_operator(space: Arc<TensorSpace>, params: &EllipticParams) -> Result<Operator> {
    let n = space.n();
    let mut order = vec![n - 1];
    order.extend(0..n - 1);
    let p = permutation_operator(space, order, params)?;
    let g = gamma_j(p.target().clone(), 0, params)?;
    let mut op = p.then(&g)?;
    op.name = "Delta".into();
    Ok(op)
}

/// `K_j` through the factorisation
/// `s_{j-1}(z_j - z_{j-1} + p) ... s_1(z_j - z_1 + p) Delta s_{n-1}(z_j - z_n) ... s_j(z_j - z_{j+1})`.
pub fn kzb_via_s_chain(space: Arc<TensorSpace>, j: usize, z: &[C64], params: &EllipticParams) -> Result<Operator> {
    check_points(&space, z)?;
    let n = space.n();
    let mut ops = Vec::new();
    let mut current = space;
    for k in j..n - 1 {
        let op = s_operator(current.clone(), k, z[j] - z[k + 1], params)?;
        current = op.target().clone();
        ops.push(op);
    }
    let d = delta_operator(current, params)?;
    current = d.target().clone();
    ops.push(d);
    for k in 0..j {
        let op = s_operator(current.clone(), k, z[j] - z[k] + params.p, params)?;
        current = op.target().clone();
        ops.push(op);
    }
    Operator::chain(&ops)
}

/// Weyl reflection `(S f)(lambda) = (s_{L_1} (x) ... (x) s_{L_n}) f(-lambda)` with
/// `s_L E_j = E_{L-j}`, that is `s_L e_j = [j]! / [L-j]! e_{L-j}`.
pub fn weyl_reflection(space: Arc<TensorSpace>, params: &EllipticParams) -> Result<Operator> {
    let caps: Vec<usize> = space
        .weights()
        .iter()
        .map(|w| w.cap().ok_or_else(|| Error::InvalidParams("Weyl reflection needs integer weights".into())))
        .collect::<Result<_>>()?;
    let dim = space.dim();
    let mut matrix = CMatrix::zeros(dim, dim);
    for (col, s) in space.states().iter().enumerate() {
        let t: Vec<usize> = s.iter().zip(&caps).map(|(&mj, &l)| l - mj).collect();
        let row = space.index_of(&t).ok_or_else(|| Error::InvalidParams("Weyl image leaves the zero-weight space".into()))?;
        let mut coeff = C64::new(1.0, 0.0);
        for (&mj, &l) in s.iter().zip(&caps) {
            coeff *= elliptic_factorial(mj as i64, params)? / elliptic_factorial((l - mj) as i64, params)?;
        }
        matrix[(row, col)] = coeff;
    }
    let out_space = space.clone();
    Ok(Operator {
        name: "S".into(),
        source: space.clone(),
        target: space,
        offsets: vec![C64::new(0.0, 0.0)],
        params: *params,
        transform: Arc::new(move |f: &ZeroWeightFn| {
            let (f, m) = (f.clone(), matrix.clone());
            Ok(ZeroWeightFn::new(out_space.clone(), BasisKind::Standard, move |lambda| Ok(&m * f.eval(-lambda)?)))
        }),
    })
}

/// Order in which the auxiliary L-operators act inside a transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// `R^{(01)}` first, factor `k` shifted by `h^{(l)}`, `l < k`.
    Irf,
    /// `R^{(0n)}` first, factor `k` shifted by `h^{(l)}`, `l > k`.
    TensorProduct,
}

/// Transfer matrix with a two-dimensional auxiliary space:
/// `(T(w) f)(lambda) = sum_{nu} [L(w, lambda) f(lambda - 2 eta nu)]_{nu, nu}`.
pub fn transfer_operator(space: Arc<TensorSpace>, w: C64, z: &[C64], kind: TransferKind, params: &EllipticParams) -> Result<Operator> {
    check_points(&space, z)?;
    let n = space.n();
    let mut extended = vec![Weight::Finite(1)];
    extended.extend_from_slice(space.weights());
    let aux_spaces: Vec<TensorSpace> = (0..2).map(|a| TensorSpace::new(extended.clone(), space.level() + a)).collect();
    let order: Vec<usize> = match kind {
        TransferKind::Irf => (0..n).collect(),
        TransferKind::TensorProduct => (0..n).rev().collect(),
    };
    let p = *params;
    let z = z.to_vec();
    let inner = space.clone();
    let dim = space.dim();
    let monodromy = Arc::new(move |lambda: C64, aux: usize| -> Result<CMatrix> {
        let ext = &aux_spaces[aux];
        let mut mat = CMatrix::identity(ext.dim(), ext.dim());
        for &k in &order {
            let set: Vec<usize> = match kind {
                TransferKind::Irf => (1..k + 1).collect(),
                TransferKind::TensorProduct => (k + 2..n + 1).collect(),
            };
            mat = pair_matrix(ext, (0, k + 1), w - z[k], lambda, &set, &p)? * mat;
        }
        let embed = |s: &Vec<usize>| {
            let mut t = vec![aux];
            t.extend_from_slice(s);
            ext.index_of(&t)
        };
        let positions: Vec<Option<usize>> = inner.states().iter().map(embed).collect();
        Ok(CMatrix::from_fn(dim, dim, |r, c| match (positions[r], positions[c]) {
            (Some(a), Some(b)) => mat[(a, b)],
            _ => C64::new(0.0, 0.0),
        }))
    });
    let eta = params.eta;
    let out_space = space.clone();
    Ok(Operator {
        name: format!("T({w})"),
        source: space.clone(),
        target: space,
        offsets: vec![-2.0 * eta, 2.0 * eta],
        params: p,
        transform: Arc::new(move |f: &ZeroWeightFn| {
            let (f, mono) = (f.clone(), monodromy.clone());
            Ok(ZeroWeightFn::new(out_space.clone(), BasisKind::Standard, move |lambda| {
                let mut out = CVector::zeros(dim);
                for (aux, nu) in [(0usize, 1.0), (1usize, -1.0)] {
                    out += mono(lambda, aux)? * f.eval(lambda - 2.0 * eta * nu)?;
                }
                Ok(out)
            }))
        }),
    })
}

/// Largest relative deviation `|A f - B f| / max(|A f|, |B f|, 1)` over probes and points.
pub fn operator_residual(lhs: &Operator, rhs: &Operator, probes: &[ZeroWeightFn], lambdas: &[C64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probes {
        let (a, b) = (lhs.apply(f)?, rhs.apply(f)?);
        for &lambda in lambdas {
            let (x, y) = (a.eval(lambda)?, b.eval(lambda)?);
            let scale = crate::linalg::max_abs_vec(&x).max(crate::linalg::max_abs_vec(&y)).max(1.0);
            worst = worst.max(crate::linalg::max_abs_vec(&(x - y)) / scale);
        }
    }
    Ok(worst)
}

/// Which resonance condition to test, with zero-based factor positions.
///
/// `Adjacent(j)` pairs factors `j, j+1` and `Wrap` pairs the last factor with the first; these
/// are the relations obeyed by coordinates built from ordinary weight functions. The mirror
/// variants are the relations obeyed by coordinates built from mirror weight functions, with
/// the sums running over the factors to the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resonance {
    Adjacent(usize),
    Wrap,
    MirrorAdjacent(usize),
    MirrorWrap,
}

impl Resonance {
    /// All relations of one orientation for `n` factors.
    pub fn all(n: usize, mirror: bool) -> Vec<Resonance> {
        let mut out: Vec<Resonance> = (0..n.saturating_sub(1))
            .map(|j| if mirror { Resonance::MirrorAdjacent(j) } else { Resonance::Adjacent(j) })
            .collect();
        if n > 1 {
            out.push(if mirror { Resonance::MirrorWrap } else { Resonance::Wrap });
        }
        out
    }
}

/// Lattice shift `r + s tau` of a resonance point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatticeShift {
    pub r: i64,
    pub s: i64,
}

/// Largest scaled violation of a resonance condition by the coefficients of `u` (standard basis).
pub fn resonance_condition_residual(
    u: &ZeroWeightFn,
    which: Resonance,
    z: &[C64],
    shift: LatticeShift,
    params: &EllipticParams,
) -> Result<f64> {
    let space = u.space().clone();
    check_points(&space, z)?;
    let u = u.to_standard(params)?;
    let n = space.n();
    let eta = params.eta;
    let lattice = shift.r as f64 + shift.s as f64 * params.tau;
    let fact = |k: usize| elliptic_factorial(k as i64, params);
    let lam: Vec<C64> = space.weights().iter().map(|w| w.value()).collect();
    // `first` carries `a`, `second` carries `k - a`.
    let (first, second) = match which {
        Resonance::Adjacent(j) if j + 1 < n => (j, j + 1),
        Resonance::MirrorAdjacent(j) if j + 1 < n => (j + 1, j),
        Resonance::Wrap if n > 1 => (n - 1, 0),
        Resonance::MirrorWrap if n > 1 => (0, n - 1),
        _ => return Err(Error::InvalidParams("resonance condition index out of range".into())),
    };
    let phase_arg = match which {
        Resonance::Adjacent(j) => z[j + 1] - z[j] + eta * (lam[j + 1] + lam[j]),
        Resonance::Wrap => z[0] - z[n - 1] + eta * (lam[0] + lam[n - 1]) - params.p,
        _ if shift.s != 0 => {
            return Err(Error::InvalidParams("mirror resonance relations are available for s = 0 only".into()))
        }
        _ => C64::new(0.0, 0.0),
    };
    let phase = |a: usize| (2.0 * PI * C64::i() * (shift.s as f64) * (a as f64) * phase_arg).exp();
    let mut worst: f64 = 0.0;
    let mut cache: HashMap<u64, CVector> = HashMap::new();
    let mut eval_at = |x: C64| -> Result<CVector> {
        let key = (x.re * 1e9).round().to_bits() ^ (x.im * 1e9).round().to_bits().rotate_left(32);
        if let Some(v) = cache.get(&key) {
            return Ok(v.clone());
        }
        let v = u.eval(x)?;
        cache.insert(key, v.clone());
        Ok(v)
    };
    for state in space.states() {
        let k = state[first] + state[second];
        let a = state[first];
        for b in (0..=k).filter(|&b| b != a) {
            let mut other = state.clone();
            other[first] = b;
            other[second] = k - b;
            let Some(il) = space.index_of(&other) else {
                continue;
            };
            let im = space.index_of(state).expect("state belongs to its space");
            let (point_m, point_l) = match which {
                Resonance::Adjacent(j) => {
                    let before: C64 = (0..j).map(|l| lam[l] - 2.0 * state[l] as f64).sum();
                    let x = lattice + 2.0 * eta * (lam[j] - (a + b) as f64 + before);
                    (x, x)
                }
                Resonance::MirrorAdjacent(j) => {
                    let after: C64 = (j + 2..n).map(|l| lam[l] - 2.0 * state[l] as f64).sum();
                    let x = lattice + 2.0 * eta * (lam[j + 1] - (a + b) as f64 + after);
                    (x, x)
                }
                Resonance::Wrap | Resonance::MirrorWrap => {
                    let d = 2.0 * eta * (a as f64 - b as f64);
                    (lattice + d, lattice - d)
                }
            };
            let lhs = fact(a)? * fact(k - a)? * phase(a) * eval_at(point_m)?[im];
            let rhs = fact(b)? * fact(k - b)? * phase(b) * eval_at(point_l)?[il];
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0));
        }
    }
    Ok(worst)
}
