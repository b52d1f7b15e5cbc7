//! Acceptance suite: one pass/fail line per criterion, with the measured figures, the
//! tolerance and the runtime budget. Exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use eqg_core::bethe::{self, BetheProblem, BetheVariant, SolverOptions};
use eqg_core::elliptic_core::{theta, theta_product, EllipticParams};
use eqg_core::fusion::{self, PathKind, Rule, WeightVector};
use eqg_core::irf::{self, HeightRange};
use eqg_core::linalg::max_abs_vec;
use eqg_core::qkzb_ops::{
    self, kzb_operator, operator_residual, transfer_operator, weyl_reflection, BasisKind, LatticeShift, Resonance,
    TensorSpace, TransferKind, ZeroWeightFn,
};
use eqg_core::rmatrix::{self, CoeffIndices, CoeffKind, CoeffSetting, Weight};
use eqg_core::sampling::{lambda_grid, Sampler};
use eqg_core::weight_functions::{self, compositions, diagonal_closed_form, ModelParams, WeightIndex};
use eqg_core::{c64, CVector, C64};

type Outcome = Result<Vec<Check>, String>;

/// One measured quantity against its bound.
struct Check {
    label: String,
    value: f64,
    bound: f64,
    /// `true`: value must stay below the bound; `false`: value must reach it.
    below: bool,
}

impl Check {
    fn below(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, bound, below: true }
    }

    fn at_least(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, bound, below: false }
    }

    fn exact(label: impl Into<String>, ok: bool) -> Self {
        Self { label: label.into(), value: if ok { 0.0 } else { 1.0 }, bound: 0.5, below: true }
    }

    fn passed(&self) -> bool {
        if self.below {
            self.value < self.bound
        } else {
            self.value >= self.bound
        }
    }

    fn describe(&self) -> String {
        let op = if self.below { "<" } else { ">=" };
        format!("{} {:.2e} {op} {:.0e}", self.label, self.value, self.bound)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- theta

/// Triple-product form `2 q^{1/4} sin(pi t) prod (1 - q^{2k})(1 - q^{2k} e^{2 pi i t})(1 - q^{2k} e^{-2 pi i t})`
/// with `q = e^{pi i tau}`.
fn theta_triple_product(t: C64, tau: C64) -> C64 {
    let i = c64(0.0, 1.0);
    let q = (PI * i * tau).exp();
    let (u, v) = ((2.0 * PI * i * t).exp(), (-2.0 * PI * i * t).exp());
    let mut prod = 2.0 * (PI * i * tau / 4.0).exp() * (PI * t).sin();
    let mut q2k = q * q;
    while q2k.norm() > 1e-18 {
        prod *= (1.0 - q2k) * (1.0 - q2k * u) * (1.0 - q2k * v);
        q2k *= q * q;
    }
    prod
}

fn criterion_theta() -> Outcome {
    let mut checks = Vec::new();
    for tau in [c64(0.0, 1.0), c64(0.2, 0.8)] {
        let p = EllipticParams::new(tau, c64(0.1, 0.0)).map_err(err)?;
        let mut sampler = Sampler::new(11);
        let (mut prod, mut odd, mut quasi) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let t = sampler.complex((-1.0, 1.0), (-tau.im, tau.im));
            let th = theta(t, &p);
            let scale = th.norm().max(1.0);
            prod = prod.max((th - theta_triple_product(t, tau)).norm() / scale);
            prod = prod.max((th - theta_product(t, &p)).norm() / scale);
            odd = odd.max((theta(-t, &p) + th).norm() / scale);
            let by_one = theta(t + 1.0, &p) + th;
            let by_tau = theta(t + tau, &p) + (-PI * c64(0.0, 1.0) * (tau + 2.0 * t)).exp() * th;
            let shifted_scale = scale.max(theta(t + tau, &p).norm());
            quasi = quasi.max(by_one.norm() / scale).max(by_tau.norm() / shifted_scale);
        }
        let tag = format!("tau={:.1}{:+.1}i", tau.re, tau.im);
        checks.push(Check::below(format!("{tag} sum/product"), prod, 1e-10));
        checks.push(Check::below(format!("{tag} oddness"), odd, 1e-10));
        checks.push(Check::below(format!("{tag} quasi-periodicity"), quasi, 1e-10));
    }
    Ok(checks)
}

// ---------------------------------------------------------------- weight functions

fn criterion_triangularity() -> Outcome {
    let p = EllipticParams::new(c64(0.1, 1.0), c64(0.13, 0.02)).map_err(err)?;
    let mut sampler = Sampler::new(21);
    let (mut off, mut off_mirror, mut diag) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let lambdas = vec![sampler.complex((0.3, 1.7), (-0.3, 0.3)), sampler.complex((0.3, 1.7), (-0.3, 0.3))];
        let z = vec![sampler.complex((-0.4, 0.4), (-0.2, 0.2)), c64(0.0, 0.0)];
        let model = ModelParams::new(lambdas, z, p).map_err(err)?;
        let lambda = sampler.complex((-0.4, 0.4), (-0.3, 0.3));
        for m in 1..=3 {
            let (idx, a, am) = weight_functions::basis_matrices(m, lambda, &model).map_err(err)?;
            let scale = eqg_core::linalg::max_abs(&a).max(1e-300);
            let scale_m = eqg_core::linalg::max_abs(&am).max(1e-300);
            for r in 0..idx.len() {
                for c in 0..idx.len() {
                    if c > r {
                        off = off.max(a[(r, c)].norm() / scale);
                    }
                    if c < r {
                        off_mirror = off_mirror.max(am[(r, c)].norm() / scale_m);
                    }
                }
                let expect = diagonal_closed_form(&idx[r], lambda, &model, false);
                let expect_m = diagonal_closed_form(&idx[r], lambda, &model, true);
                diag = diag.max((a[(r, r)] - expect).norm() / expect.norm());
                diag = diag.max((am[(r, r)] - expect_m).norm() / expect_m.norm());
            }
        }
    }
    Ok(vec![
        Check::below("omega off-triangle", off, 1e-9),
        Check::below("mirror off-triangle", off_mirror, 1e-9),
        Check::below("diagonal closed forms", diag, 1e-9),
    ])
}

// ---------------------------------------------------------------- R-matrix axioms

fn criterion_rmatrix() -> Outcome {
    let one = Weight::Finite(1);
    let mut sampler = Sampler::new(31);
    let (mut fund, mut zero_weight) = (0.0f64, 0.0f64);
    let (mut dybe_f, mut unit_f, mut dybe_g, mut unit_g) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for draw in 0..20 {
        let tau = c64(sampler.real(-0.3, 0.3), sampler.real(0.8, 1.3));
        let eta = sampler.complex((0.07, 0.17), (-0.03, 0.03));
        let p = EllipticParams::new(tau, eta).map_err(err)?;
        let z = sampler.complex((-0.4, 0.4), (-0.2, 0.2));
        let w = sampler.complex((-0.4, 0.4), (-0.2, 0.2));
        let lambda = sampler.complex((-0.4, 0.4), (-0.3, 0.3));
        let r = rmatrix::fundamental_r(z, lambda, &p).map_err(err)?;
        for level in 0..=2usize {
            let block = rmatrix::build_rmatrix_regular(c64(1.0, 0.0), c64(1.0, 0.0), z, lambda, level, (Some(1), Some(1)), &p)
                .map_err(err)?;
            for (row, &(k, l)) in block.indices.iter().enumerate() {
                for (col, &(i, j)) in block.indices.iter().enumerate() {
                    if k > 1 || l > 1 || i > 1 || j > 1 {
                        continue;
                    }
                    let expect = r[(2 * k + l, 2 * i + j)];
                    fund = fund.max((block.entries[(row, col)] - expect).norm());
                }
            }
        }
        for row in 0..4usize {
            for col in 0..4usize {
                let weight = |s: usize| (s >> 1) + (s & 1);
                if weight(row) != weight(col) {
                    zero_weight = zero_weight.max(r[(row, col)].norm());
                }
            }
        }
        for m in 0..=3 {
            dybe_f = dybe_f.max(rmatrix::dybe_residual([one; 3], z, w, lambda, m, &p).map_err(err)?);
        }
        for m in 0..=2 {
            unit_f = unit_f.max(rmatrix::unitarity_residual(one, one, z, lambda, m, &p).map_err(err)?);
        }
        if draw < 20 {
            let ls: Vec<Weight> = (0..3).map(|_| Weight::Verma(sampler.complex((0.3, 1.7), (-0.3, 0.3)))).collect();
            for m in 0..=2 {
                dybe_g = dybe_g.max(rmatrix::dybe_residual([ls[0], ls[1], ls[2]], z, w, lambda, m, &p).map_err(err)?);
                unit_g = unit_g.max(rmatrix::unitarity_residual(ls[0], ls[1], z, lambda, m, &p).map_err(err)?);
            }
        }
    }
    Ok(vec![
        Check::below("geometric vs fundamental", fund, 1e-10),
        Check::below("zero weight", zero_weight, 1e-9),
        Check::below("DYBE fundamental", dybe_f, 1e-9),
        Check::below("unitarity fundamental", unit_f, 1e-9),
        Check::below("DYBE generic", dybe_g, 1e-8),
        Check::below("unitarity generic", unit_g, 1e-8),
    ])
}

// ---------------------------------------------------------------- Q-R, poles, coefficients

fn criterion_poles_and_coefficients() -> Outcome {
    let mut sampler = Sampler::new(41);
    let p = EllipticParams::new(c64(0.1, 1.0), c64(0.13, 0.02)).map_err(err)?;
    let (mut qr, mut simple, mut kernel, mut complement) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let (mut coeff, mut example) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let l1 = sampler.complex((0.3, 1.7), (-0.3, 0.3));
        let l2 = sampler.complex((0.3, 1.7), (-0.3, 0.3));
        let z = sampler.complex((-0.4, 0.4), (-0.2, 0.2));
        let lambda = sampler.complex((-0.4, 0.4), (-0.3, 0.3));
        for m in 1..=2usize {
            for j in 0..=m {
                for r in 0..=m {
                    qr = qr.max(rmatrix::qr_relation_residual((j, m - j), (r, m - r), lambda, l1, l2, z, &p).map_err(err)?);
                }
            }
            for k in 1..2 * m {
                for (rr, ss) in [(0i64, 0i64), (1, 1)] {
                    let pole = 2.0 * p.eta * (l1 - k as f64) + rr as f64 + ss as f64 * p.tau;
                    let res = rmatrix::lambda_pole_residue(l1, l2, z, pole, m, &p).map_err(err)?;
                    let size = eqg_core::linalg::max_abs(&res.residue).max(1e-300);
                    simple = simple.max(eqg_core::linalg::max_abs(&res.second_moment) / (size * res.radius));
                    let report = rmatrix::residue_kernel_check(&res.residue, m, k, ss, l1, l2, z, &p).map_err(err)?;
                    kernel = kernel.max(report.kernel_residual);
                    complement = complement.min(report.complement_ratio);
                }
            }
        }
        let w = sampler.complex((-0.4, 0.4), (-0.2, 0.2));
        for (rr, ss) in [(0i64, 0i64), (1, -1), (0, 1)] {
            let set = CoeffSetting { l1, l2, z, w, r: rr, s: ss };
            for a in 0..=2i64 {
                for b in 0..=2i64 {
                    for primed in 0..=2i64 {
                        for fixed in 0..=a + b {
                            let idx = CoeffIndices { a, b, primed, fixed };
                            for kind in [CoeffKind::First, CoeffKind::Second] {
                                coeff = coeff.max(rmatrix::coeff_relation_residual(kind, idx, set, &p).map_err(err)?);
                            }
                        }
                    }
                }
            }
        }
        for k in 1..=3usize {
            let first = rmatrix::build_rmatrix_regular(l1, l2, z - w, -2.0 * p.eta * k as f64, k, (None, None), &p).map_err(err)?;
            let second = rmatrix::build_rmatrix_regular(l1, l2, z - w, 2.0 * p.eta * (l1 + l2 - k as f64), k, (None, None), &p)
                .map_err(err)?;
            for i in 0..=k {
                let lower = (i, k - i);
                let want_first = if lower == (k, 0) { 1.0 } else { 0.0 };
                let want_second = if lower == (0, k) { 1.0 } else { 0.0 };
                example = example.max((first.entry((0, k), lower) - want_first).norm());
                example = example.max((second.entry((k, 0), lower) - want_second).norm());
            }
        }
    }
    Ok(vec![
        Check::below("Q-R relation", qr, 1e-8),
        Check::below("pole simplicity (second moment / residue)", simple, 1e-8),
        Check::below("residue kernel", kernel, 1e-8),
        Check::at_least("residue complement ratio", complement, 1e-6),
        Check::below("coefficient relations", coeff, 1e-8),
        Check::below("example 0/1 entries", example, 1e-8),
    ])
}

// ---------------------------------------------------------------- qKZB

fn criterion_qkzb() -> Outcome {
    let mut checks = Vec::new();
    for n in [2usize, 4] {
        let p = EllipticParams::new(c64(0.05, 1.1), c64(0.11, 0.015)).map_err(err)?.with_p(c64(0.37, 0.21)).map_err(err)?;
        let space = Arc::new(TensorSpace::fundamental(n).map_err(err)?);
        let mut sampler = Sampler::new(51 + n as u64);
        let z: Vec<C64> = (0..n).map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2))).collect();
        let probes: Vec<ZeroWeightFn> = (0..5).map(|_| ZeroWeightFn::probe(space.clone(), 2, &mut sampler)).collect();
        let grid = lambda_grid(&p, 4, 0.03, 7 + n as u64);
        let shifted = |i: usize| {
            let mut out = z.clone();
            out[i] += p.p;
            out
        };
        let (mut compat, mut weyl) = (0.0f64, 0.0f64);
        let s = weyl_reflection(space.clone(), &p).map_err(err)?;
        for i in 0..n {
            let ki = kzb_operator(space.clone(), i, &z, &p).map_err(err)?;
            for j in i + 1..n {
                let kj = kzb_operator(space.clone(), j, &z, &p).map_err(err)?;
                let lhs = kj.then(&kzb_operator(space.clone(), i, &shifted(j), &p).map_err(err)?).map_err(err)?;
                let rhs = ki.then(&kzb_operator(space.clone(), j, &shifted(i), &p).map_err(err)?).map_err(err)?;
                compat = compat.max(operator_residual(&lhs, &rhs, &probes, &grid).map_err(err)?);
            }
            let sk = ki.then(&s).map_err(err)?;
            let ks = s.then(&ki).map_err(err)?;
            weyl = weyl.max(operator_residual(&sk, &ks, &probes, &grid).map_err(err)?);
        }
        checks.push(Check::below(format!("n={n} compatibility"), compat, 1e-9));
        checks.push(Check::below(format!("n={n} Weyl commutation"), weyl, 1e-9));
    }
    Ok(checks)
}

// ---------------------------------------------------------------- resonance relations

fn weight_function_vector(model: &ModelParams, t: Vec<C64>, mirror: bool) -> eqg_core::Result<ZeroWeightFn> {
    let weights = model.lambdas.iter().map(|&l| Weight::Verma(l)).collect();
    let space = Arc::new(TensorSpace::new(weights, t.len()));
    let model = model.clone();
    let indices: Vec<WeightIndex> = space.states().iter().map(|s| WeightIndex(s.clone())).collect();
    Ok(ZeroWeightFn::new(space, BasisKind::Standard, move |lambda| {
        let coords = indices
            .iter()
            .map(|idx| {
                if mirror {
                    weight_functions::omega_mirror(idx, &t, lambda, &model)
                } else {
                    weight_functions::omega(idx, &t, lambda, &model)
                }
            })
            .collect::<eqg_core::Result<Vec<_>>>()?;
        Ok(CVector::from_vec(coords))
    }))
}

fn criterion_weight_resonances() -> Outcome {
    let p = EllipticParams::new(c64(0.1, 1.0), c64(0.13, 0.02)).map_err(err)?;
    let mut sampler = Sampler::new(61);
    let (mut direct, mut ordinary, mut shifted) = (0.0f64, 0.0f64, 0.0f64);
    let mut relations = 0usize;
    for n in 2..=3usize {
        let lambdas: Vec<C64> = (0..n).map(|_| sampler.complex((0.3, 1.7), (-0.3, 0.3))).collect();
        let z: Vec<C64> = (0..n).map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2))).collect();
        let model = ModelParams::new(lambdas, z.clone(), p).map_err(err)?;
        for m in 1..=2usize {
            let t: Vec<C64> = (0..m).map(|_| sampler.complex((-0.4, 0.4), (-0.3, 0.3))).collect();
            for base in compositions(m, n) {
                for j in 0..n - 1 {
                    let k = base.0[j] + base.0[j + 1];
                    for b in 0..=k {
                        if b == base.0[j] {
                            continue;
                        }
                        for (r, s) in [(0i64, 0i64), (1, 1), (-1, 2)] {
                            let v = weight_functions::resonance_check_weights(j, &base, b, r, s, &t, &model).map_err(err)?;
                            if (r, s) == (0, 0) {
                                direct = direct.max(v);
                            } else {
                                shifted = shifted.max(v);
                            }
                            relations += 1;
                        }
                    }
                }
            }
            let u = weight_function_vector(&model, t.clone(), false).map_err(err)?;
            let p0 = p.with_p(c64(0.0, 0.0)).map_err(err)?;
            for j in 0..n - 1 {
                let which = Resonance::Adjacent(j);
                ordinary = ordinary.max(qkzb_ops::resonance_condition_residual(&u, which, &z, LatticeShift::default(), &p0).map_err(err)?);
            }
        }
    }
    Ok(vec![
        Check::below(format!("adjacent relations ({relations} checked)"), direct, 1e-8),
        Check::below("adjacent relations on the vector of weight functions", ordinary, 1e-8),
        Check::below("lattice-shifted relations", shifted, 1e-8),
    ])
}

// ---------------------------------------------------------------- Bethe pipeline

const LEVEL: i64 = 4;

fn desk_model(eta: C64) -> eqg_core::Result<ModelParams> {
    let p = EllipticParams::new(c64(0.0, 1.0), eta)?;
    let z = vec![c64(0.11, 0.03), c64(-0.2, 0.01), c64(0.33, -0.02), c64(0.05, 0.04)];
    ModelParams::new(vec![c64(1.0, 0.0); 4], z, p)
}

/// Largest coordinate of `psi` over a few points, used as the reference size for "identically zero".
fn reference_size(psi: &ZeroWeightFn, points: &[C64]) -> eqg_core::Result<f64> {
    let mut size: f64 = 0.0;
    for &x in points {
        size = size.max(max_abs_vec(&psi.eval(x)?));
    }
    Ok(size)
}

fn criterion_bethe() -> Outcome {
    let model = desk_model(c64(0.5 / LEVEL as f64, 0.0)).map_err(err)?;
    let p = model.params;
    let c = c64(0.0, PI);
    let problem = BetheProblem::new(BetheVariant::HType, model, c, 2).map_err(err)?;
    let partner = problem.partner().map_err(err)?;
    let solutions = bethe::solve_bae(&problem, &SolverOptions::default()).map_err(err)?;
    let grid = lambda_grid(&p, 20, 0.03, 3);
    let ws = [c64(0.07, -0.13), c64(-0.21, 0.05)];
    let (mut bae, mut h_res, mut t_res, mut tp_res, mut qp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut res_h, mut res_t, mut weyl_pair) = (0.0f64, 0.0f64, 0.0f64);
    let (mut forced_h, mut forced_t, mut periodic) = (0.0f64, 0.0f64, 0.0f64);
    let (mut unforced_h, mut unforced_t) = (f64::INFINITY, f64::INFINITY);
    let mut nontrivial = 0usize;
    for sol in &solutions {
        bae = bae.max(sol.residual);
        let psi = bethe::eigenfunction_h(&problem, &sol.roots).map_err(err)?;
        let space = psi.space().clone();
        for j in 0..4 {
            let h = qkzb_ops::h_operator(space.clone(), j, &problem.model.z, &p).map_err(err)?;
            let e = bethe::eigenvalue_h(&problem, &sol.roots, j).map_err(err)?;
            h_res = h_res.max(bethe::eigen_residual(&h.apply(&psi).map_err(err)?, &psi, e, &grid).map_err(err)?);
        }
        let u = problem.partner_roots(&sol.roots);
        let psi_t = bethe::eigenfunction_transfer(&partner, &u).map_err(err)?;
        for &w in &ws {
            let t = transfer_operator(space.clone(), w, &problem.model.z, TransferKind::Irf, &p).map_err(err)?;
            let e = bethe::eigenvalue_irf(&problem, &sol.roots, w).map_err(err)?;
            t_res = t_res.max(bethe::eigen_residual(&t.apply(&psi).map_err(err)?, &psi, e, &grid).map_err(err)?);
            let t = transfer_operator(space.clone(), w, &problem.model.z, TransferKind::TensorProduct, &p).map_err(err)?;
            let e = bethe::eigenvalue_transfer(&partner, &u, w).map_err(err)?;
            tp_res = tp_res.max(bethe::eigen_residual(&t.apply(&psi_t).map_err(err)?, &psi_t, e, &grid).map_err(err)?);
        }
        qp = qp.max(bethe::quasi_periodicity_residual(&psi, &problem, grid[0]).map_err(err)?);
        res_h = res_h.max(bethe::resonance_residual(&psi, &problem, false).map_err(err)?);
        res_t = res_t.max(bethe::resonance_residual(&psi_t, &partner, true).map_err(err)?);
        weyl_pair = weyl_pair.max(bethe::weyl_pair_residual(&psi, &problem, PathKind::Ordinary).map_err(err)?);

        let a_h = bethe::antisymmetrize(&psi, &p).map_err(err)?;
        let a_t = bethe::antisymmetrize(&psi_t, &p).map_err(err)?;
        let reference = reference_size(&psi, &grid[..4]).map_err(err)?;
        let rep_h = bethe::vanishing_report(&a_h, &problem, PathKind::Ordinary, Rule::Uq(LEVEL), 0..LEVEL).map_err(err)?;
        let rep_t = bethe::vanishing_report(&a_t, &partner, PathKind::Modified, Rule::Uq(LEVEL), 0..LEVEL).map_err(err)?;
        forced_h = forced_h.max(rep_h.max_forced / reference);
        forced_t = forced_t.max(rep_t.max_forced / reference);
        let sign = c.exp();
        for k in 0..LEVEL {
            let x = 2.0 * p.eta * k as f64;
            let a = bethe::eval_regular(&a_t, x).map_err(err)?;
            let b = bethe::eval_regular(&a_t, x + 2.0 * p.eta * LEVEL as f64).map_err(err)? * sign;
            periodic = periodic.max(max_abs_vec(&(a - b)) / reference);
        }
        // States with A psi identically zero carry no vanishing information.
        if rep_h.min_unforced > 1e-6 * reference && rep_t.min_unforced > 1e-6 * reference {
            nontrivial += 1;
            unforced_h = unforced_h.min(rep_h.min_unforced / reference);
            unforced_t = unforced_t.min(rep_t.min_unforced / reference);
        }
    }
    Ok(vec![
        Check::at_least("solutions found", solutions.len() as f64, 1.0),
        Check::below("BAE residual", bae, 1e-11),
        Check::below("H_j eigen-equation", h_res, 1e-8),
        Check::below("T(w) eigen-equation (IRF order)", t_res, 1e-8),
        Check::below("T(w) eigen-equation (tensor product)", tp_res, 1e-8),
        Check::below("quasi-periodicity", qp, 1e-10),
        Check::below("resonance relations (ordinary)", res_h, 1e-8),
        Check::below("resonance relations (mirror)", res_t, 1e-8),
        Check::below("Weyl pairs on the interior interval", weyl_pair, 1e-8),
        Check::at_least("solutions with nonzero A psi", nontrivial as f64, 1.0),
        Check::below("forced entries, mirror eigenfunction", forced_t, 1e-8),
        Check::at_least("separation, mirror eigenfunction", unforced_t / forced_t.max(1e-8), 10.0),
        Check::below("forced entries, ordinary eigenfunction", forced_h, 1e-8),
        Check::at_least("separation, ordinary eigenfunction", unforced_h / forced_h.max(1e-8), 10.0),
        Check::below("N-periodicity of A psi", periodic, 1e-8),
    ])
}

// ---------------------------------------------------------------- restricted IRF

fn criterion_restricted_irf() -> Outcome {
    let model = desk_model(c64(0.5 / LEVEL as f64, 0.0)).map_err(err)?;
    let p = model.params;
    let z = model.z.clone();
    let c = c64(0.0, PI);
    let problem = BetheProblem::new(BetheVariant::FundamentalIrf, model, c, 2).map_err(err)?;
    let (w1, w2) = (c64(0.07, -0.13), c64(-0.21, 0.05));
    let basis = irf::restricted_basis(LEVEL, 4);
    let walks = irf::closed_walk_count(LEVEL, 4);
    let spectrum = irf::brute_force_spectrum(LEVEL, 4, w1, w2, &z, &p).map_err(err)?;
    let solutions = bethe::solve_bae(&problem, &SolverOptions::default()).map_err(err)?;
    let (mut residual, mut distance, mut overlap, mut reflection) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let mut vectors = 0usize;
    let grid = lambda_grid(&p, 4, 0.03, 5);
    for sol in &solutions {
        let psi = bethe::eigenfunction_h(&problem, &sol.roots).map_err(err)?;
        let apsi = bethe::antisymmetrize(&psi, &p).map_err(err)?;
        let reference = reference_size(&psi, &grid).map_err(err)?;
        let (states, v) = match irf::bethe_eigenvector_restricted(&apsi, LEVEL, 4, reference, 1e-8, &p) {
            Ok(found) => found,
            Err(eqg_core::Error::Degenerate(_)) => continue,
            Err(e) => return Err(e.to_string()),
        };
        vectors += 1;
        let e = bethe::eigenvalue_irf(&problem, &sol.roots, w1).map_err(err)?;
        residual = residual.max(irf::vector_eigen_residual(&spectrum.matrix, &v, e));
        let found = spectrum.match_vector(&v, e);
        distance = distance.max(found.distance);
        overlap = overlap.min(found.overlap);
        reflection = reflection.max(irf::height_reflection_residual(&states, &v, LEVEL, c).map_err(err)?);
    }
    Ok(vec![
        Check::exact(format!("dimension {} = walk count {walks} = 8", basis.len()), basis.len() as u64 == walks && walks == 8),
        Check::below("[T(w1), T(w2)]", spectrum.commutator, 1e-9),
        Check::at_least("nonzero restricted Bethe vectors", vectors as f64, 1.0),
        Check::below("Bethe vector eigen-residual", residual, 1e-7),
        Check::below("distance to brute-force eigenvalue", distance, 1e-7),
        Check::at_least("eigenspace overlap", overlap, 1.0 - 1e-6),
        Check::below("height reflection", reflection, 1e-8),
    ])
}

// ---------------------------------------------------------------- star-triangle

fn hexagon(sampler: &mut Sampler, lo: i64, hi: i64) -> Option<[i64; 6]> {
    let start = sampler.integer(lo, hi);
    let mut labels = [start; 6];
    for k in 1..6 {
        labels[k] = labels[k - 1] + if sampler.index(2) == 0 { 1 } else { -1 };
    }
    let closes = (labels[5] - labels[0]).abs() == 1;
    (closes && labels.iter().all(|&x| lo <= x && x <= hi)).then_some(labels)
}

fn criterion_star_triangle() -> Outcome {
    let mut sampler = Sampler::new(91);
    let (mut generic, mut restricted) = (0.0f64, 0.0f64);
    let (mut done_generic, mut done_restricted) = (0usize, 0usize);
    while done_generic < 100 {
        let Some(labels) = hexagon(&mut sampler, -3, 3) else { continue };
        let p = EllipticParams::new(c64(sampler.real(-0.2, 0.2), sampler.real(0.8, 1.2)), sampler.complex((0.07, 0.17), (-0.03, 0.03)))
            .map_err(err)?;
        let z = [0; 3].map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2)));
        generic = generic.max(irf::star_triangle_residual(labels, z, c64(0.31, 0.17), HeightRange::Generic, &p).map_err(err)?);
        done_generic += 1;
    }
    while done_restricted < 100 {
        let level = 3 + sampler.integer(0, 2);
        let Some(labels) = hexagon(&mut sampler, 1, level - 1) else { continue };
        let p = EllipticParams::new(c64(0.0, 1.0), c64(0.5 / level as f64, 0.0)).map_err(err)?;
        let z = [0; 3].map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2)));
        restricted = restricted
            .max(irf::star_triangle_residual(labels, z, c64(0.0, 0.0), HeightRange::Restricted(level), &p).map_err(err)?);
        done_restricted += 1;
    }
    Ok(vec![Check::below("generic heights", generic, 1e-9), Check::below("restricted heights", restricted, 1e-9)])
}

// ---------------------------------------------------------------- fusion combinatorics

/// Least `k >= 0` such that the shifted path obeys the sl2 rules, by direct search.
fn scanned_shift(w: &WeightVector, lambdas: &[i64], kind: PathKind) -> Option<i64> {
    (0..200).find(|&k| fusion::path_admissible(&fusion::shifted_path(w, kind, 1, k), lambdas, kind, Rule::Sl2))
}

fn all_lambdas(n: usize, max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out.into_iter().flat_map(|v| (0..=max).map(move |l| [v.clone(), vec![l]].concat())).collect();
    }
    out
}

fn criterion_fusion() -> Outcome {
    let (mut shift_cases, mut shift_bad) = (0usize, 0usize);
    for n in 1..=4 {
        for lambdas in all_lambdas(n, 3) {
            for w in fusion::weight_vectors(&lambdas) {
                for kind in [PathKind::Ordinary, PathKind::Modified] {
                    shift_cases += 1;
                    if scanned_shift(&w, &lambdas, kind) != Some(fusion::shift_number_for(&w, &lambdas, kind)) {
                        shift_bad += 1;
                    }
                }
            }
        }
    }
    let (mut lemma_cases, mut lemma_bad) = (0usize, 0usize);
    for level in 2..=6i64 {
        for n in 1..=4 {
            for lambdas in all_lambdas(n, 3) {
                for w in fusion::weight_vectors(&lambdas) {
                    let lower = fusion::shift_number(&w.negated(), &lambdas);
                    let upper = level - fusion::shift_number(&w, &lambdas);
                    for k in 0..level {
                        lemma_cases += 1;
                        let interval = lower < k && k < upper;
                        let path = fusion::shifted_path(&w, PathKind::Ordinary, -1, k - 1);
                        if interval != fusion::fusion_path(&path, &lambdas, Rule::Uq(level)) {
                            lemma_bad += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(vec![
        Check::exact(format!("shift numbers ({shift_bad} of {shift_cases} differ)"), shift_bad == 0),
        Check::exact(format!("interval/fusion equivalence ({lemma_bad} of {lemma_cases} differ)"), lemma_bad == 0),
    ])
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let criteria: Vec<(&str, u64, fn() -> Outcome)> = vec![
        ("theta kernel", 1, criterion_theta),
        ("triangularity and diagonal values", 5, criterion_triangularity),
        ("R-matrix axioms", 30, criterion_rmatrix),
        ("Q-R relation, poles, coefficient relations", 60, criterion_poles_and_coefficients),
        ("qKZB compatibility and Weyl commutation", 60, criterion_qkzb),
        ("weight-function resonance relations", 30, criterion_weight_resonances),
        ("Bethe pipeline", 300, criterion_bethe),
        ("restricted IRF", 120, criterion_restricted_irf),
        ("star-triangle equation", 30, criterion_star_triangle),
        ("fusion combinatorics", 10, criterion_fusion),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (number, (name, budget, run)) in criteria.into_iter().enumerate() {
        let number = number + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (ok, detail) = match &outcome {
            Ok(checks) => (
                checks.iter().all(Check::passed),
                checks
                    .iter()
                    .map(|c| format!("{}{}", if c.passed() { "" } else { "FAILED " }, c.describe()))
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
            Err(e) => (false, format!("error: {e}")),
        };
        let pass = ok && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {number:2} {} {name}: {detail}; runtime {:.2}s (budget {budget}s{})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", exceeded" },
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
