//! Elliptic weight functions and their mirror images.
//!
//! For a composition `M = (m_1, ..., m_n)` of `m` the weight function is a sum over
//! ordered set partitions `I_1 ⊔ ... ⊔ I_n = {1..m}` with `|I_k| = m_k`:
//!
//! ```text
//! omega_M(t) = u(t)^{-1} sum_I  prod_l prod_{i in I_l} prod_{k<l} th(t_i - z_k + a_k)/th(t_i - z_k - a_k)
//!                             * prod_{k<l} prod_{i in I_k, j in I_l} th(t_i - t_j + 2 eta)/th(t_i - t_j)
//!                             * prod_k prod_{j in I_k} th(lambda + t_j - z_k - a_k + 2 eta m_k - 2 eta S_k)
//!                                                      / th(t_j - z_k - a_k)
//! ```
//!
//! with `a_k = eta Lambda_k`, `u(t) = prod_{i<j} th(t_i - t_j + 2 eta)/th(t_i - t_j)` and
//! `S_k = sum_{l<k} (Lambda_l - 2 m_l)`. The mirror version reverses every ordering
//! (`k > l` and `S_k = sum_{l>k}`).

use serde::{Deserialize, Serialize};

use crate::elliptic_core::{elliptic_factorial, theta, EllipticParams};
use crate::{CMatrix, Error, Result, C64};

/// Largest level for which weight functions are evaluated.
pub const MAX_LEVEL: usize = 5;

/// Below this modulus a theta value in a denominator is treated as a zero.
const ZERO_THRESHOLD: f64 = 1e-13;

/// Composition `(m_1, ..., m_n)` labelling the basis vector `e_M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeightIndex(pub Vec<usize>);

impl WeightIndex {
    pub fn new(parts: Vec<usize>) -> Self {
        Self(parts)
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn m(&self) -> usize {
        self.0.iter().sum()
    }

    /// `m_j <= Lambda_j` for every capped factor.
    pub fn is_admissible(&self, caps: &[Option<usize>]) -> bool {
        self.0.iter().zip(caps).all(|(m, cap)| cap.map_or(true, |c| *m <= c))
    }

    /// Weights `Lambda_j - 2 m_j`.
    pub fn weights(&self, lambdas: &[C64]) -> Vec<C64> {
        self.0.iter().zip(lambdas).map(|(m, l)| l - 2.0 * *m as f64).collect()
    }
}

impl From<Vec<usize>> for WeightIndex {
    fn from(parts: Vec<usize>) -> Self {
        Self(parts)
    }
}

/// All compositions of `m` into `n` non-negative parts, lexicographically ascending.
pub fn compositions(m: usize, n: usize) -> Vec<WeightIndex> {
    fn rec(m: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<WeightIndex>) {
        if n == 1 {
            prefix.push(m);
            out.push(WeightIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=m {
            prefix.push(first);
            rec(m - first, n - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if m == 0 {
            out.push(WeightIndex(Vec::new()));
        }
        return out;
    }
    rec(m, n, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Compositions with `m_j <= caps[j]` where a cap is present.
pub fn admissible_compositions(m: usize, caps: &[Option<usize>]) -> Vec<WeightIndex> {
    compositions(m, caps.len()).into_iter().filter(|c| c.is_admissible(caps)).collect()
}

/// Highest weights, evaluation points and the analytic context.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambdas: Vec<C64>,
    pub z: Vec<C64>,
    pub params: EllipticParams,
}

impl ModelParams {
    pub fn new(lambdas: Vec<C64>, z: Vec<C64>, params: EllipticParams) -> Result<Self> {
        if lambdas.len() != z.len() || lambdas.is_empty() {
            return Err(Error::InvalidParams(format!(
                "need as many evaluation points as weights ({} vs {})",
                z.len(),
                lambdas.len()
            )));
        }
        Ok(Self { lambdas, z, params })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn eta(&self) -> C64 {
        self.params.eta
    }

    /// `a_j = eta Lambda_j`.
    pub fn a(&self, j: usize) -> C64 {
        self.params.eta * self.lambdas[j]
    }

    /// Level `m` with `sum Lambda_j = 2 m`, if the weights allow a zero-weight space.
    pub fn zero_weight_level(&self) -> Option<usize> {
        let total: C64 = self.lambdas.iter().sum();
        let m = (total.re / 2.0).round();
        ((total - 2.0 * m).norm() < 1e-9 && m >= 0.0).then_some(m as usize)
    }

    /// Same model with weights and points permuted by `order` (new slot `i` takes old `order[i]`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            lambdas: order.iter().map(|&i| self.lambdas[i]).collect(),
            z: order.iter().map(|&i| self.z[i]).collect(),
            params: self.params,
        }
    }
}

fn th(x: C64, params: &EllipticParams) -> C64 {
    theta(x, params)
}

fn checked_ratio(num: C64, den: C64, what: &str) -> Result<C64> {
    if den.norm() < ZERO_THRESHOLD {
        Err(Error::Pole(what.to_string()))
    } else {
        Ok(num / den)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Orientation {
    Ordinary,
    Mirror,
}

/// Ordinary weight function `omega_M(t, lambda, z)`.
pub fn omega(index: &WeightIndex, t: &[C64], lambda: C64, model: &ModelParams) -> Result<C64> {
    weight_function(index, t, lambda, model, Orientation::Ordinary)
}

/// Mirror weight function `omega~_M(t, lambda, z)`.
pub fn omega_mirror(index: &WeightIndex, t: &[C64], lambda: C64, model: &ModelParams) -> Result<C64> {
    weight_function(index, t, lambda, model, Orientation::Mirror)
}

fn weight_function(
    index: &WeightIndex,
    t: &[C64],
    lambda: C64,
    model: &ModelParams,
    orientation: Orientation,
) -> Result<C64> {
    let n = model.n();
    let m = index.m();
    if index.n() != n {
        return Err(Error::InvalidParams(format!("index {:?} does not match {n} factors", index.0)));
    }
    if t.len() != m {
        return Err(Error::InvalidParams(format!("expected {m} variables, got {}", t.len())));
    }
    if m > MAX_LEVEL {
        return Err(Error::TooLarge(format!("level {m} exceeds cap {MAX_LEVEL}")));
    }
    if m == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let p = &model.params;
    let eta = p.eta;
    let parts = index.parts();

    let mut pair = vec![vec![C64::new(1.0, 0.0); m]; m];
    let mut u = C64::new(1.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                pair[i][j] = checked_ratio(
                    th(t[i] - t[j] + 2.0 * eta, p),
                    th(t[i] - t[j], p),
                    "coincident integration variables",
                )?;
            }
        }
        for j in i + 1..m {
            u *= pair[i][j];
        }
    }

    let weights = index.weights(&model.lambdas);
    let shift: Vec<C64> = (0..n)
        .map(|k| match orientation {
            Orientation::Ordinary => weights[..k].iter().sum(),
            Orientation::Mirror => weights[k + 1..].iter().sum(),
        })
        .collect();

    // cross[i][l]: product of the z-factors seen by t_i placed in block l.
    let mut cross = vec![vec![C64::new(1.0, 0.0); n]; m];
    let mut diag = vec![vec![C64::new(0.0, 0.0); n]; m];
    for i in 0..m {
        let mut zf = Vec::with_capacity(n);
        for k in 0..n {
            let a = model.a(k);
            let den = th(t[i] - model.z[k] - a, p);
            zf.push(checked_ratio(th(t[i] - model.z[k] + a, p), den, "variable on z_k + a_k")?);
            if parts[k] > 0 {
                let arg = lambda + t[i] - model.z[k] - a + 2.0 * eta * parts[k] as f64
                    - 2.0 * eta * shift[k];
                diag[i][k] = th(arg, p) / den;
            }
        }
        for l in 0..n {
            cross[i][l] = match orientation {
                Orientation::Ordinary => zf[..l].iter().product(),
                Orientation::Mirror => zf[l + 1..].iter().product(),
            };
        }
    }

    let mut remaining = parts.to_vec();
    let mut block = vec![0usize; m];
    let sum = assign(0, &mut remaining, &mut block, &pair, &cross, &diag, orientation);
    let value = sum / u;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Pole("weight function is not finite".into()))
    }
}

/// Multinomial recursion over positions: position `i` is placed in each block that
/// still has room, multiplying in the pair factors against earlier positions.
fn assign(
    i: usize,
    remaining: &mut [usize],
    block: &mut [usize],
    pair: &[Vec<C64>],
    cross: &[Vec<C64>],
    diag: &[Vec<C64>],
    orientation: Orientation,
) -> C64 {
    let m = block.len();
    if i == m {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for b in 0..remaining.len() {
        if remaining[b] == 0 {
            continue;
        }
        let mut factor = cross[i][b] * diag[i][b];
        for j in 0..i {
            let bj = block[j];
            if bj == b {
                continue;
            }
            let earlier_first = match orientation {
                Orientation::Ordinary => bj < b,
                Orientation::Mirror => bj > b,
            };
            factor *= if earlier_first { pair[j][i] } else { pair[i][j] };
        }
        remaining[b] -= 1;
        block[i] = b;
        total += factor * assign(i + 1, remaining, block, pair, cross, diag, orientation);
        remaining[b] += 1;
    }
    total
}

/// Special point `T_M`: block `j` is `(z_j - eta Lambda_j + 2 eta (m_j - 1), ..., z_j - eta Lambda_j)`.
pub fn special_point(index: &WeightIndex, model: &ModelParams) -> Vec<C64> {
    let eta = model.eta();
    let mut out = Vec::with_capacity(index.m());
    for (j, &mj) in index.parts().iter().enumerate() {
        let base = model.z[j] - model.a(j);
        for i in (0..mj).rev() {
            out.push(base + 2.0 * eta * i as f64);
        }
    }
    out
}

/// Matrices `A[M][L] = omega_M(T_L)` and `A~[M][L] = omega~_M(T_L)` on the level-`m`
/// space of two factors, indices in ascending order of `m_1`.
pub fn basis_matrices(
    m: usize,
    lambda: C64,
    model: &ModelParams,
) -> Result<(Vec<WeightIndex>, CMatrix, CMatrix)> {
    if model.n() != 2 {
        return Err(Error::InvalidParams("basis matrices are defined for two factors".into()));
    }
    let indices = compositions(m, 2);
    basis_matrices_on(&indices, lambda, model)
}

/// Same as [`basis_matrices`] restricted to a subset of indices.
pub fn basis_matrices_on(
    indices: &[WeightIndex],
    lambda: C64,
    model: &ModelParams,
) -> Result<(Vec<WeightIndex>, CMatrix, CMatrix)> {
    let d = indices.len();
    let points: Vec<Vec<C64>> = indices.iter().map(|l| special_point(l, model)).collect();
    let mut a = CMatrix::zeros(d, d);
    let mut a_mirror = CMatrix::zeros(d, d);
    for (r, row) in indices.iter().enumerate() {
        for (c, pt) in points.iter().enumerate() {
            a[(r, c)] = omega(row, pt, lambda, model)?;
            a_mirror[(r, c)] = omega_mirror(row, pt, lambda, model)?;
        }
    }
    Ok((indices.to_vec(), a, a_mirror))
}

/// Which parameter a diagonal factor depends on; used to pick a regularisation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Eta,
    Lambda,
    /// Highest weight of the given factor (0 or 1).
    Weight(usize),
    Points,
}

/// One theta factor of a closed-form diagonal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagFactor {
    pub arg: C64,
    pub numerator: bool,
    pub depends_on: Dependence,
}

/// Theta factors of `omega_M(T_M)` (ordinary) or `omega~_M(T_M)` (mirror) for two factors.
pub fn diagonal_factors(index: &WeightIndex, lambda: C64, model: &ModelParams, mirror: bool) -> Vec<DiagFactor> {
    let eta = model.eta();
    let (l1, l2) = (model.lambdas[0], model.lambdas[1]);
    let (m1, m2) = (index.0[0] as f64, index.0[1] as f64);
    let z12 = model.z[0] - model.z[1];
    let mut out = Vec::new();
    let mut push = |arg: C64, numerator: bool, depends_on: Dependence| {
        out.push(DiagFactor { arg, numerator, depends_on })
    };
    // The factor attached to the first block in the ordinary case is the second block
    // in the mirror case; the two loops below share this structure.
    let (first, second) = if mirror { (1, 0) } else { (0, 1) };
    let (first_count, first_weight, second_count, second_weight, second_shift, z_num, z_den) = if !mirror {
        (
            m1,
            l1,
            m2,
            l2,
            l1 + l2 - 2.0 * m1 - m2,
            -z12 + eta * l1 - eta * l2,
            -z12 - eta * l1 - eta * l2,
        )
    } else {
        (
            m2,
            l2,
            m1,
            l1,
            l1 + l2 - m1 - 2.0 * m2,
            z12 - eta * l1 + eta * l2,
            z12 - eta * l1 - eta * l2,
        )
    };
    for l in 1..=first_count as usize {
        let lf = l as f64;
        push(2.0 * eta, true, Dependence::Eta);
        push(2.0 * eta * lf, false, Dependence::Eta);
        push(lambda - 2.0 * eta * (first_weight - first_count - lf + 1.0), true, Dependence::Lambda);
        push(-2.0 * eta * (first_weight - lf + 1.0), false, Dependence::Weight(first));
    }
    for l in 1..=second_count as usize {
        let lf = l as f64;
        push(2.0 * eta, true, Dependence::Eta);
        push(2.0 * eta * lf, false, Dependence::Eta);
        push(lambda - 2.0 * eta * (second_shift - lf + 1.0), true, Dependence::Lambda);
        push(-2.0 * eta * (second_weight - lf + 1.0), false, Dependence::Weight(second));
        push(z_num + 2.0 * eta * (lf - 1.0), true, Dependence::Points);
        push(z_den + 2.0 * eta * (lf - 1.0), false, Dependence::Points);
    }
    if mirror {
        // `T_M` lists the first block before the second, which the mirror ordering does not.
        let offset = z12 - eta * l1 + eta * l2;
        for a in 0..index.0[0] {
            for b in 0..index.0[1] {
                let d = offset + 2.0 * eta * (a as f64 - b as f64);
                push(d - 2.0 * eta, true, Dependence::Points);
                push(d + 2.0 * eta, false, Dependence::Points);
            }
        }
    }
    out
}

/// Closed-form diagonal value `omega_M(T_M)` (or its mirror) for two factors.
pub fn diagonal_closed_form(index: &WeightIndex, lambda: C64, model: &ModelParams, mirror: bool) -> C64 {
    diagonal_factors(index, lambda, model, mirror).iter().fold(C64::new(1.0, 0.0), |acc, f| {
        let v = theta(f.arg, &model.params);
        if f.numerator {
            acc * v
        } else {
            acc / v
        }
    })
}

/// Scaled residual `|x - y| / max(1, |x|, |y|)`.
pub fn scaled_diff(x: C64, y: C64) -> f64 {
    (x - y).norm() / 1f64.max(x.norm()).max(y.norm())
}

/// Residual of the weight-function resonance relation at positions `(j, j+1)`
/// (zero-based `j`), including the lattice shift `r + s tau` and its exponential prefactor.
///
/// `base` carries `(a, k - a)` at positions `j, j+1`; the partner index carries `(b, k - b)`.
pub fn resonance_check_weights(
    j: usize,
    base: &WeightIndex,
    b: usize,
    r: i64,
    s: i64,
    t: &[C64],
    model: &ModelParams,
) -> Result<f64> {
    let n = model.n();
    if j + 1 >= n {
        return Err(Error::InvalidParams(format!("position {j} has no right neighbour")));
    }
    let p = &model.params;
    let eta = p.eta;
    let a = base.0[j];
    let k = a + base.0[j + 1];
    if b > k {
        return Err(Error::InvalidParams(format!("b = {b} exceeds k = {k}")));
    }
    let mut partner = base.clone();
    partner.0[j] = b;
    partner.0[j + 1] = k - b;

    let shift: C64 = base.weights(&model.lambdas)[..j].iter().sum();
    let lambda0 = 2.0 * eta * (model.lambdas[j] - a as f64 - b as f64 + shift)
        + r as f64
        + s as f64 * p.tau;
    let phase_base = model.z[j + 1] - model.z[j] + eta * model.lambdas[j + 1] + eta * model.lambdas[j];
    let prefactor = |x: usize| -> Result<C64> {
        let fac = elliptic_factorial(x as i64, p)? * elliptic_factorial((k - x) as i64, p)?;
        let phase = (2.0 * std::f64::consts::PI * C64::i() * (s as f64) * (x as f64) * phase_base).exp();
        Ok(fac * phase)
    };
    let lhs = prefactor(a)? * omega(base, t, lambda0, model)?;
    let rhs = prefactor(b)? * omega(&partner, t, lambda0, model)?;
    Ok(scaled_diff(lhs, rhs))
}
