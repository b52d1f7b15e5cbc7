//! Bethe ansatz equations, a deterministic root solver, and the eigenfunctions and
//! eigenvalues built from their solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::elliptic_core::{theta, theta_log_derivative, EllipticParams};
use crate::fusion::{self, PathKind, Rule, WeightVector};
use crate::linalg::inverse;
use crate::qkzb_ops::{weyl_reflection, BasisKind, LatticeShift, Resonance, TensorSpace, ZeroWeightFn};
use crate::rmatrix::Weight;
use crate::sampling::{lattice_distance, Sampler};
use crate::weight_functions::{omega, omega_mirror, ModelParams, WeightIndex};
use crate::{CMatrix, CVector, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Which system of Bethe ansatz equations is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetheVariant {
    /// Equations for the commuting operators `H_j`, right-hand side `e^{-4 eta c}`.
    HType,
    /// Equations for the transfer matrix of a tensor product, right-hand side `e^{4 eta c}`.
    TransferType,
    /// The `H`-type system with all weights equal to one and `m = n/2`.
    FundamentalIrf,
}

/// Factorised form shared by the three systems: for each root `t_i`,
/// `prod_l theta(t_i - z_l + site_num_l) / theta(t_i - z_l + site_den_l)
///  prod_{k != i} theta(t_i - t_k + pair_num) / theta(t_i - t_k + pair_den) = rhs`.
#[derive(Debug, Clone)]
struct System {
    site: Vec<(C64, C64)>,
    pair: (C64, C64),
    rhs: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetheProblem {
    pub variant: BetheVariant,
    pub model: ModelParams,
    pub c: C64,
    pub m: usize,
}

impl BetheProblem {
    pub fn new(variant: BetheVariant, model: ModelParams, c: C64, m: usize) -> Result<Self> {
        if variant == BetheVariant::FundamentalIrf {
            let n = model.n();
            if n % 2 != 0 || model.lambdas.iter().any(|l| (l - 1.0).norm() > 1e-12) || m != n / 2 {
                return Err(Error::InvalidParams("fundamental IRF system needs even n, unit weights and m = n/2".into()));
            }
        }
        Ok(Self { variant, model, c, m })
    }

    pub fn params(&self) -> &EllipticParams {
        &self.model.params
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    fn system(&self) -> System {
        let eta = self.model.eta();
        let rhs_exp = |sign: f64| (sign * 4.0 * eta * self.c).exp();
        match self.variant {
            BetheVariant::HType | BetheVariant::FundamentalIrf => System {
                site: self.model.lambdas.iter().map(|&l| (eta * l, -eta * l)).collect(),
                pair: (-2.0 * eta, 2.0 * eta),
                rhs: rhs_exp(-1.0),
            },
            BetheVariant::TransferType => System {
                site: self.model.lambdas.iter().map(|&l| (-(1.0 + l) * eta, -(1.0 - l) * eta)).collect(),
                pair: (2.0 * eta, -2.0 * eta),
                rhs: rhs_exp(1.0),
            },
        }
    }

    /// Same model and twist with the other orientation; roots correspond under `t -> t + eta`
    /// (from `H`-type to transfer-type) and `t -> t - eta` (back).
    pub fn partner(&self) -> Result<Self> {
        let variant = match self.variant {
            BetheVariant::TransferType => BetheVariant::HType,
            _ => BetheVariant::TransferType,
        };
        Self::new(variant, self.model.clone(), self.c, self.m)
    }

    pub fn partner_roots(&self, roots: &[C64]) -> Vec<C64> {
        let eta = self.model.eta();
        let shift = if self.variant == BetheVariant::TransferType { -eta } else { eta };
        roots.iter().map(|t| t + shift).collect()
    }

    /// Tensor space of the problem; positive integer weights give finite-dimensional factors.
    pub fn space(&self) -> Result<Arc<TensorSpace>> {
        let weights = self.model.lambdas.iter().map(|&l| integer_weight(l)).collect();
        let space = TensorSpace::zero_weight(weights)?;
        if space.level() != self.m {
            return Err(Error::InvalidParams(format!("weights give level {}, problem has m = {}", space.level(), self.m)));
        }
        Ok(Arc::new(space))
    }
}

fn integer_weight(l: C64) -> Weight {
    let r = l.re.round();
    if l.im.abs() < 1e-12 && (l.re - r).abs() < 1e-12 && r >= 0.0 {
        Weight::Finite(r as usize)
    } else {
        Weight::Verma(l)
    }
}

fn safe_theta(x: C64, params: &EllipticParams, what: &dyn Fn() -> String) -> Result<C64> {
    let v = theta(x, params);
    if v.norm() < 1e-13 {
        Err(Error::Pole(format!("theta vanishes at {x} ({})", what())))
    } else {
        Ok(v)
    }
}

/// Per-root deviation `log(LHS / RHS)` (principal branch, zero at a solution).
pub fn bae_residual(problem: &BetheProblem, t: &[C64]) -> Result<Vec<C64>> {
    check_root_count(problem, t)?;
    let sys = problem.system();
    let p = problem.params();
    let z = &problem.model.z;
    let mut out = Vec::with_capacity(t.len());
    for (i, &ti) in t.iter().enumerate() {
        let mut ratio = sys.rhs.inv();
        for (l, &(num, den)) in sys.site.iter().enumerate() {
            let what = || format!("root {} against point {}", i + 1, l + 1);
            ratio *= safe_theta(ti - z[l] + num, p, &what)? / safe_theta(ti - z[l] + den, p, &what)?;
        }
        for (k, &tk) in t.iter().enumerate().filter(|&(k, _)| k != i) {
            let what = || format!("roots {} and {}", i + 1, k + 1);
            ratio *= safe_theta(ti - tk + sys.pair.0, p, &what)? / safe_theta(ti - tk + sys.pair.1, p, &what)?;
        }
        out.push(ratio.ln());
    }
    Ok(out)
}

fn check_root_count(problem: &BetheProblem, t: &[C64]) -> Result<()> {
    if t.len() != problem.m {
        Err(Error::InvalidParams(format!("expected {} roots, got {}", problem.m, t.len())))
    } else {
        Ok(())
    }
}

/// Jacobian of [`bae_residual`] from logarithmic derivatives of theta.
pub fn bae_jacobian(problem: &BetheProblem, t: &[C64]) -> Result<CMatrix> {
    check_root_count(problem, t)?;
    let sys = problem.system();
    let p = problem.params();
    let z = &problem.model.z;
    let m = t.len();
    let mut jac = CMatrix::zeros(m, m);
    for i in 0..m {
        for (l, &(num, den)) in sys.site.iter().enumerate() {
            jac[(i, i)] += theta_log_derivative(t[i] - z[l] + num, p)? - theta_log_derivative(t[i] - z[l] + den, p)?;
        }
        for k in (0..m).filter(|&k| k != i) {
            let d = theta_log_derivative(t[i] - t[k] + sys.pair.0, p)? - theta_log_derivative(t[i] - t[k] + sys.pair.1, p)?;
            jac[(i, i)] += d;
            jac[(i, k)] -= d;
        }
    }
    Ok(jac)
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Two roots are congruent modulo `Z + tau Z` (within `tol`).
pub fn roots_collide(t: &[C64], tau: C64, tol: f64) -> bool {
    (0..t.len()).any(|i| (i + 1..t.len()).any(|j| lattice_distance(t[i], t[j], tau) < tol))
}

fn distance_mod_one(a: C64, b: C64) -> f64 {
    let d = a - b;
    C64::new(d.re - d.re.round(), d.im).norm()
}

/// Real parts reduced to `[-1/2, 1/2)` and roots sorted lexicographically.
pub fn canonical_roots(t: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = t.iter().map(|x| C64::new(x.re - (x.re + 0.5).floor(), x.im)).collect();
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Newton iteration settings and the continuation path in the modulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Residual at which a root is accepted.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of seeded random starts.
    pub starts: usize,
    pub seed: u64,
    /// Extra imaginary part of the modulus at the start of the continuation.
    pub continuation_height: f64,
    pub continuation_steps: usize,
    /// Minimal distance between roots modulo the lattice.
    pub collision_tol: f64,
    /// Accepted roots satisfy `|Im t| <= max_imag * Im tau`.
    pub max_imag: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 80,
            starts: 96,
            seed: 3,
            continuation_height: 1.5,
            continuation_steps: 6,
            collision_tol: 1e-6,
            max_imag: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetheSolution {
    pub roots: Vec<C64>,
    /// `max_i |bae_residual_i|`.
    pub residual: f64,
    /// Index of the random start that produced the roots.
    pub start: usize,
    /// Residual after each continuation stage (last entry at the target modulus).
    pub trace: Vec<f64>,
}

/// Damped Newton on the logarithmic form at fixed parameters.
pub fn newton(problem: &BetheProblem, start: &[C64], opts: &SolverOptions) -> Result<(Vec<C64>, f64)> {
    let mut t = start.to_vec();
    let mut f = bae_residual(problem, &t)?;
    let mut res = max_norm(&f);
    for _ in 0..opts.max_iter {
        if res < opts.tol {
            break;
        }
        let jac = bae_jacobian(problem, &t)?;
        let step = inverse(&jac, "Bethe Jacobian")? * CVector::from_vec(f.clone());
        let mut damping = 1.0;
        loop {
            let trial: Vec<C64> = t.iter().zip(step.iter()).map(|(x, d)| x - d * damping).collect();
            if let Ok(ft) = bae_residual(problem, &trial) {
                let r = max_norm(&ft);
                if r < res || damping < 1e-3 {
                    t = trial;
                    f = ft;
                    res = r;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-3 {
                return Err(Error::Solver(format!("Newton stalled at residual {res:.3e}")));
            }
        }
    }
    if res < opts.tol {
        Ok((t, res))
    } else {
        Err(Error::Solver(format!("Newton did not converge, residual {res:.3e}")))
    }
}

/// Follows a root from a larger imaginary part of the modulus down to the target.
fn continue_root(problem: &BetheProblem, start: &[C64], opts: &SolverOptions) -> Result<(Vec<C64>, f64, Vec<f64>)> {
    let target = problem.params().tau;
    let mut t = start.to_vec();
    let mut trace = Vec::new();
    let loose = SolverOptions { tol: opts.tol.max(1e-9), ..opts.clone() };
    for step in 0..=opts.continuation_steps {
        let frac = if opts.continuation_steps == 0 { 0.0 } else { 1.0 - step as f64 / opts.continuation_steps as f64 };
        let tau = target + I * (opts.continuation_height * frac);
        let mut stage = problem.clone();
        stage.model.params = problem.params().with_tau(tau)?;
        let last = step == opts.continuation_steps;
        let (next, res) = newton(&stage, &t, if last { opts } else { &loose })?;
        trace.push(res);
        t = next;
    }
    let res = trace.last().copied().unwrap_or(f64::INFINITY);
    Ok((t, res, trace))
}

/// All distinct non-degenerate solutions found from seeded random starts, each followed
/// along the modulus continuation, with a direct Newton fallback at the target modulus.
pub fn solve_bae(problem: &BetheProblem, opts: &SolverOptions) -> Result<Vec<BetheSolution>> {
    if problem.m == 0 {
        return Ok(vec![BetheSolution { roots: Vec::new(), residual: 0.0, start: 0, trace: Vec::new() }]);
    }
    let tau = problem.params().tau;
    let mut sampler = Sampler::new(opts.seed);
    let mut found: Vec<BetheSolution> = Vec::new();
    let mut failures = Vec::new();
    for start in 0..opts.starts {
        let seed: Vec<C64> = (0..problem.m).map(|_| sampler.complex((-0.5, 0.5), (-0.5, 0.5))).collect();
        if roots_collide(&seed, tau, opts.collision_tol) {
            continue;
        }
        let attempt = continue_root(problem, &seed, opts).or_else(|e| {
            failures.push(format!("start {start}: {e}"));
            newton(problem, &seed, opts).map(|(t, r)| (t, r, vec![r]))
        });
        let Ok((roots, residual, trace)) = attempt else {
            continue;
        };
        let finite = residual.is_finite() && roots.iter().all(|t| t.is_finite());
        if !finite || roots_collide(&roots, tau, opts.collision_tol) || roots.iter().any(|t| t.im.abs() > opts.max_imag * tau.im) {
            continue;
        }
        let roots = canonical_roots(&roots);
        let duplicate = found.iter().any(|s| s.roots.iter().zip(&roots).all(|(a, b)| distance_mod_one(*a, *b) < 1e-7));
        if !duplicate {
            found.push(BetheSolution { roots, residual, start, trace });
        }
    }
    if found.is_empty() {
        return Err(Error::Solver(format!("no solution from {} starts; {}", opts.starts, failures.join("; "))));
    }
    found.sort_by(|a, b| {
        a.roots
            .iter()
            .zip(&b.roots)
            .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}

/// JSON record of a solution.
pub fn solution_json(problem: &BetheProblem, sol: &BetheSolution) -> Value {
    let pair = |x: &C64| json!([x.re, x.im]);
    let p = problem.params();
    json!({
        "variant": problem.variant,
        "tau": pair(&p.tau),
        "eta": pair(&p.eta),
        "c": pair(&problem.c),
        "z": problem.model.z.iter().map(pair).collect::<Vec<_>>(),
        "lambdas": problem.model.lambdas.iter().map(pair).collect::<Vec<_>>(),
        "roots": sol.roots.iter().map(pair).collect::<Vec<_>>(),
        "residual": sol.residual,
    })
}

fn index_of(state: &[usize]) -> WeightIndex {
    WeightIndex(state.to_vec())
}

/// `psi(lambda) = sum_J e^{c lambda} omega_J(t, z, lambda) e_J` for `H`-type roots.
pub fn eigenfunction_h(problem: &BetheProblem, roots: &[C64]) -> Result<ZeroWeightFn> {
    if problem.variant == BetheVariant::TransferType {
        return Err(Error::InvalidParams("eigenfunction_h needs H-type roots".into()));
    }
    let space = problem.space()?;
    let model = problem.model.clone();
    let (t, c) = (roots.to_vec(), problem.c);
    let indices: Vec<WeightIndex> = space.states().iter().map(|s| index_of(s)).collect();
    Ok(ZeroWeightFn::new(space, BasisKind::Standard, move |lambda| {
        let e = (c * lambda).exp();
        let coords = indices.iter().map(|j| Ok(e * omega(j, &t, lambda, &model)?)).collect::<Result<Vec<_>>>()?;
        Ok(CVector::from_vec(coords))
    }))
}

/// Eigenfunction of the tensor-product transfer matrix for transfer-type roots `u`:
/// `e^{c(lambda + 2 eta m)} (-1)^m prod_{i<j} theta(t_i - t_j + 2 eta) / theta(t_i - t_j)
///  sum_J omega~_J(t, z, lambda) e_J` with `t = u - eta`.
pub fn eigenfunction_transfer(problem: &BetheProblem, roots: &[C64]) -> Result<ZeroWeightFn> {
    if problem.variant != BetheVariant::TransferType {
        return Err(Error::InvalidParams("eigenfunction_transfer needs transfer-type roots".into()));
    }
    let space = problem.space()?;
    let model = problem.model.clone();
    let p = *problem.params();
    let eta = p.eta;
    let t: Vec<C64> = roots.iter().map(|u| u - eta).collect();
    let m = t.len();
    let mut pre = C64::new(if m % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            let what = || format!("roots {} and {}", i + 1, j + 1);
            pre *= theta(t[i] - t[j] + 2.0 * eta, &p) / safe_theta(t[i] - t[j], &p, &what)?;
        }
    }
    let c = problem.c;
    let indices: Vec<WeightIndex> = space.states().iter().map(|s| index_of(s)).collect();
    Ok(ZeroWeightFn::new(space, BasisKind::Standard, move |lambda| {
        let e = pre * (c * (lambda + 2.0 * eta * m as f64)).exp();
        let coords = indices.iter().map(|j| Ok(e * omega_mirror(j, &t, lambda, &model)?)).collect::<Result<Vec<_>>>()?;
        Ok(CVector::from_vec(coords))
    }))
}

/// `epsilon_j = e^{-2 c eta L_j} prod_k theta(t_k - z_j - eta L_j) / theta(t_k - z_j + eta L_j)`.
pub fn eigenvalue_h(problem: &BetheProblem, roots: &[C64], j: usize) -> Result<C64> {
    let p = problem.params();
    let a = problem.model.a(j);
    let zj = problem.model.z[j];
    let mut eps = (-2.0 * problem.c * a).exp();
    for (k, &t) in roots.iter().enumerate() {
        let what = || format!("root {} at point {}", k + 1, j + 1);
        eps *= theta(t - zj - a, p) / safe_theta(t - zj + a, p, &what)?;
    }
    Ok(eps)
}

/// Eigenvalue of the IRF-ordered transfer matrix on the fundamental chain.
pub fn eigenvalue_irf(problem: &BetheProblem, roots: &[C64], w: C64) -> Result<C64> {
    let p = problem.params();
    let eta = p.eta;
    let c = problem.c;
    let what = || format!("spectral parameter {w}");
    let mut first = (-2.0 * eta * c).exp();
    let mut second = (2.0 * eta * c).exp();
    for &t in roots {
        let den = safe_theta(t - w + eta, p, &what)?;
        first *= theta(t - w - eta, p) / den;
        second *= theta(t - w + 3.0 * eta, p) / den;
    }
    for &zk in &problem.model.z {
        second *= theta(w - zk, p) / safe_theta(w - zk - 2.0 * eta, p, &what)?;
    }
    Ok(first + second)
}

/// Eigenvalue of the tensor-product transfer matrix for transfer-type roots.
pub fn eigenvalue_transfer(problem: &BetheProblem, roots: &[C64], w: C64) -> Result<C64> {
    let p = problem.params();
    let eta = p.eta;
    let c = problem.c;
    let what = || format!("spectral parameter {w}");
    let mut first = (-2.0 * eta * c).exp();
    let mut second = (2.0 * eta * c).exp();
    for &t in roots {
        let den = safe_theta(t - w, p, &what)?;
        first *= theta(t - w - 2.0 * eta, p) / den;
        second *= theta(t - w + 2.0 * eta, p) / den;
    }
    for (&zk, &l) in problem.model.z.iter().zip(&problem.model.lambdas) {
        second *= theta(w - zk - (1.0 - l) * eta, p) / safe_theta(w - zk - (1.0 + l) * eta, p, &what)?;
    }
    Ok(first + second)
}

/// Value of `f` at `x`, replaced by the mean over a small circle when `x` is a removable
/// singularity of the closed-form expression.
pub fn eval_regular(f: &ZeroWeightFn, x: C64) -> Result<CVector> {
    match f.eval(x) {
        Ok(v) if v.iter().all(|c| c.is_finite()) => return Ok(v),
        Ok(_) | Err(Error::Pole(_)) => {}
        Err(e) => return Err(e),
    }
    const NODES: usize = 16;
    const RADIUS: f64 = 1e-4;
    let mut acc = CVector::zeros(f.space().dim());
    for k in 0..NODES {
        let phase = C64::from_polar(RADIUS, 2.0 * PI * (k as f64 + 0.5) / NODES as f64);
        acc += f.eval(x + phase)?;
    }
    Ok(acc / C64::new(NODES as f64, 0.0))
}

/// `A psi = psi - S psi`.
pub fn antisymmetrize(psi: &ZeroWeightFn, params: &EllipticParams) -> Result<ZeroWeightFn> {
    let s = weyl_reflection(psi.space().clone(), params)?;
    let reflected = s.apply(psi)?;
    let psi = psi.to_standard(params)?;
    psi.combine(C64::new(1.0, 0.0), &reflected, C64::new(-1.0, 0.0))
}

/// Rescales so that the largest coordinate over `points` has modulus one.
pub fn normalized(psi: &ZeroWeightFn, points: &[C64]) -> Result<ZeroWeightFn> {
    let mut scale: f64 = 0.0;
    for &x in points {
        scale = scale.max(crate::linalg::max_abs_vec(&psi.eval(x)?));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate("function vanishes at every reference point".into()));
    }
    let zero = ZeroWeightFn::zero(psi.space().clone());
    let zero = ZeroWeightFn::new(zero.space().clone(), psi.basis(), move |l| zero.eval(l));
    psi.combine(C64::new(1.0 / scale, 0.0), &zero, C64::new(0.0, 0.0))
}

/// Relative eigen-equation residual `max_lambda |A psi - eps psi| / max_lambda |psi|`.
pub fn eigen_residual(applied: &ZeroWeightFn, psi: &ZeroWeightFn, eps: C64, grid: &[C64]) -> Result<f64> {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for &x in grid {
        let v = psi.eval(x)?;
        let a = applied.eval(x)?;
        num = num.max(crate::linalg::max_abs_vec(&(a - &v * eps)));
        den = den.max(crate::linalg::max_abs_vec(&v));
    }
    if den == 0.0 {
        return Err(Error::Degenerate("eigenfunction vanishes on the grid".into()));
    }
    Ok(num / den)
}

/// Largest violation of all resonance relations of one orientation at `r = s = 0`,
/// normalised by the largest coordinate of `psi` at the resonance points.
pub fn resonance_residual(psi: &ZeroWeightFn, problem: &BetheProblem, mirror: bool) -> Result<f64> {
    let n = problem.n();
    let params = problem.params().with_p(C64::new(0.0, 0.0))?;
    let mut worst: f64 = 0.0;
    for which in Resonance::all(n, mirror) {
        let r = crate::qkzb_ops::resonance_condition_residual(psi, which, &problem.model.z, LatticeShift::default(), &params)?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// One coordinate of an antisymmetrised eigenfunction at `lambda = 2 eta k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingEntry {
    pub index: Vec<usize>,
    pub k: i64,
    pub magnitude: f64,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingReport {
    pub kind: PathKind,
    pub rule: Rule,
    pub entries: Vec<VanishingEntry>,
    /// Largest modulus among entries that must vanish.
    pub max_forced: f64,
    /// Smallest modulus among entries that need not vanish.
    pub min_unforced: f64,
}

impl VanishingReport {
    /// Forced entries below `tol` and unforced entries at least `factor` times larger.
    pub fn certified(&self, tol: f64, factor: f64) -> bool {
        self.max_forced < tol && (self.min_unforced.is_infinite() || self.min_unforced >= factor * self.max_forced.max(tol))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report is serialisable")
    }
}

/// Evaluates the reduced coordinates of `apsi` at `lambda = 2 eta k` for `k` in `ks` and
/// classifies each entry with the fusion-rule predicate.
pub fn vanishing_report(
    apsi: &ZeroWeightFn,
    problem: &BetheProblem,
    kind: PathKind,
    rule: Rule,
    ks: impl IntoIterator<Item = i64>,
) -> Result<VanishingReport> {
    let params = problem.params();
    let reduced = apsi.to_reduced(params)?;
    let lambdas = integer_lambdas(problem)?;
    let space = apsi.space().clone();
    let mut entries = Vec::new();
    for k in ks {
        let v = eval_regular(&reduced, 2.0 * params.eta * k as f64)?;
        for (i, state) in space.states().iter().enumerate() {
            let forced = fusion::vanishing_support(state, &lambdas, kind, k, rule)?;
            entries.push(VanishingEntry { index: state.clone(), k, magnitude: v[i].norm(), forced });
        }
    }
    let max_forced = entries.iter().filter(|e| e.forced).map(|e| e.magnitude).fold(0.0, f64::max);
    let min_unforced = entries.iter().filter(|e| !e.forced).map(|e| e.magnitude).fold(f64::INFINITY, f64::min);
    Ok(VanishingReport { kind, rule, entries, max_forced, min_unforced })
}

fn integer_lambdas(problem: &BetheProblem) -> Result<Vec<i64>> {
    problem
        .model
        .lambdas
        .iter()
        .map(|&l| match integer_weight(l) {
            Weight::Finite(k) => Ok(k as i64),
            Weight::Verma(_) => Err(Error::InvalidParams("fusion rules need integer weights".into())),
        })
        .collect()
}

/// `max |psi_M(2 eta k) - psi_{s(M)}(-2 eta k)|` over admissible `M` and the interval
/// `k in [-k(w_M), k(-w_M)]`, in reduced coordinates, relative to the largest coordinate seen.
pub fn weyl_pair_residual(psi: &ZeroWeightFn, problem: &BetheProblem, kind: PathKind) -> Result<f64> {
    let params = problem.params();
    let reduced = psi.to_reduced(params)?;
    let lambdas = integer_lambdas(problem)?;
    let space = psi.space().clone();
    let eta = params.eta;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, state) in space.states().iter().enumerate() {
        let w = WeightVector::from_index(state, &lambdas)?;
        let lo = -fusion::shift_number_for(&w, &lambdas, kind);
        let hi = fusion::shift_number_for(&w.negated(), &lambdas, kind);
        let dual: Vec<usize> = state.iter().zip(&lambdas).map(|(&m, &l)| l as usize - m).collect();
        let j = space.index_of(&dual).ok_or_else(|| Error::InvalidParams("dual index missing".into()))?;
        for k in lo..=hi {
            let x = 2.0 * eta * k as f64;
            let (a, b) = (eval_regular(&reduced, x)?[i], eval_regular(&reduced, -x)?[j]);
            worst = worst.max((a - b).norm());
            scale = scale.max(a.norm()).max(b.norm());
        }
    }
    Ok(worst / scale.max(1e-300))
}

/// Quasi-periodicity check `psi(lambda + 1) = (-1)^m e^c psi(lambda)`.
pub fn quasi_periodicity_residual(psi: &ZeroWeightFn, problem: &BetheProblem, lambda: C64) -> Result<f64> {
    let mu = C64::new(if problem.m % 2 == 0 { 1.0 } else { -1.0 }, 0.0) * problem.c.exp();
    let (a, b) = (psi.eval(lambda + 1.0)?, psi.eval(lambda)? * mu);
    Ok(crate::linalg::max_abs_vec(&(&a - &b)) / crate::linalg::max_abs_vec(&b).max(1e-300))
}

/// Number of zeros of `LHS/RHS - 1` for a single root inside the cell spanned by `1` and `tau`
/// with lower-left corner `corner`, counted by the argument principle.
pub fn single_root_count(problem: &BetheProblem, corner: C64, nodes: usize) -> Result<i64> {
    if problem.m != 1 {
        return Err(Error::InvalidParams("root counting is for one root".into()));
    }
    let tau = problem.params().tau;
    let sys = problem.system();
    let p = problem.params();
    let z = &problem.model.z;
    let f = |t: C64| -> C64 {
        let mut ratio = sys.rhs.inv();
        for (l, &(num, den)) in sys.site.iter().enumerate() {
            ratio *= theta(t - z[l] + num, p) / theta(t - z[l] + den, p);
        }
        ratio - 1.0
    };
    let verts = [corner, corner + 1.0, corner + 1.0 + tau, corner + tau, corner];
    let mut winding = 0.0;
    let mut prev = f(corner);
    for e in 0..4 {
        for s in 1..=nodes {
            let x = verts[e] + (verts[e + 1] - verts[e]) * (s as f64 / nodes as f64);
            let v = f(x);
            winding += (v / prev).arg();
            prev = v;
        }
    }
    let winding = (winding / (2.0 * PI)).round() as i64;
    // Each site denominator has one simple zero per period cell.
    Ok(winding + sys.site.len() as i64)
}
