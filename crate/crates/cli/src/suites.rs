//! Identity suites run by `eqg verify`. Every sample is drawn from the configured seed.

use std::sync::Arc;

use clap::ValueEnum;
use eqg_core::bethe::{self, BetheProblem, BetheVariant, SolverOptions};
use eqg_core::elliptic_core::{theta, theta_product, theta_quasi_check, EllipticParams};
use eqg_core::fusion::{self, PathKind, Rule};
use eqg_core::irf::{self, HeightRange};
use eqg_core::linalg::{max_abs, max_abs_vec};
use eqg_core::qkzb_ops::{
    h_operator, kzb_operator, operator_residual, transfer_operator, weyl_reflection, TensorSpace, TransferKind,
    ZeroWeightFn,
};
use eqg_core::rmatrix::{self, Weight};
use eqg_core::sampling::{lambda_grid, Sampler};
use eqg_core::weight_functions::{self, compositions, ModelParams};
use eqg_core::{c64, C64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{Check, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Theta,
    Weights,
    Rmatrix,
    Qkzb,
    Resonance,
    Bethe,
    Irf,
    Ste,
    Fusion,
    All,
}

impl Suite {
    pub const EACH: [Suite; 9] = [
        Suite::Theta,
        Suite::Weights,
        Suite::Rmatrix,
        Suite::Qkzb,
        Suite::Resonance,
        Suite::Bethe,
        Suite::Irf,
        Suite::Ste,
        Suite::Fusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theta => "theta",
            Suite::Weights => "weights",
            Suite::Rmatrix => "rmatrix",
            Suite::Qkzb => "qkzb",
            Suite::Resonance => "resonance",
            Suite::Bethe => "bethe",
            Suite::Irf => "irf",
            Suite::Ste => "ste",
            Suite::Fusion => "fusion",
            Suite::All => "all",
        }
    }

    pub fn run(self, cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
        match self {
            Suite::Theta => theta_suite(cfg),
            Suite::Weights => weights_suite(cfg),
            Suite::Rmatrix => rmatrix_suite(cfg),
            Suite::Qkzb => qkzb_suite(cfg),
            Suite::Resonance => resonance_suite(cfg),
            Suite::Bethe => bethe_suite(cfg),
            Suite::Irf => irf_suite(cfg),
            Suite::Ste => ste_suite(cfg),
            Suite::Fusion => fusion_suite(cfg),
            Suite::All => Err(Failure::config("'all' is expanded by the caller")),
        }
    }
}

fn generic_params(cfg: &RunConfig) -> Result<EllipticParams, Failure> {
    let mut sampler = Sampler::new(cfg.seed ^ 0x5eed);
    let tau = c64(sampler.real(-0.3, 0.3), sampler.real(0.8, 1.3));
    let eta = sampler.complex((0.07, 0.17), (-0.03, 0.03));
    Ok(EllipticParams::new(tau, eta)?)
}

fn theta_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-10);
    let mut checks = Vec::new();
    let mut taus = vec![c64(0.0, 1.0), c64(0.2, 0.8)];
    if !taus.contains(&cfg.tau) {
        taus.push(cfg.tau);
    }
    for tau in taus {
        let p = EllipticParams::new(tau, c64(0.1, 0.0))?;
        let mut sampler = Sampler::new(cfg.seed);
        let (mut product, mut odd, mut quasi) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let t = sampler.complex((-1.0, 1.0), (-tau.im, tau.im));
            let th = theta(t, &p);
            let scale = th.norm().max(1.0);
            product = product.max((th - theta_product(t, &p)).norm() / scale);
            odd = odd.max((theta(-t, &p) + th).norm() / scale);
            quasi = quasi.max(theta_quasi_check(t, &p));
        }
        let tag = format!("tau=({},{})", tau.re, tau.im);
        checks.push(Check::below(format!("{tag} sum vs product"), product, tol));
        checks.push(Check::below(format!("{tag} oddness"), odd, tol));
        checks.push(Check::below(format!("{tag} quasi-periodicity"), quasi, tol));
    }
    Ok(checks)
}

fn weights_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-9);
    let p = generic_params(cfg)?;
    let mut sampler = Sampler::new(cfg.seed);
    let lambdas = vec![sampler.complex((0.3, 1.7), (-0.3, 0.3)), sampler.complex((0.3, 1.7), (-0.3, 0.3))];
    let model = ModelParams::new(lambdas, vec![sampler.complex((-0.4, 0.4), (-0.2, 0.2)), c64(0.0, 0.0)], p)?;
    let lambda = sampler.complex((-0.4, 0.4), (-0.3, 0.3));
    let (mut lower, mut upper, mut diagonal) = (0.0f64, 0.0f64, 0.0f64);
    for m in 1..=3 {
        let (indices, a, a_mirror) = weight_functions::basis_matrices(m, lambda, &model)?;
        let (scale, scale_mirror) = (max_abs(&a), max_abs(&a_mirror));
        for (r, idx) in indices.iter().enumerate() {
            for c in 0..indices.len() {
                if c > r {
                    lower = lower.max(a[(r, c)].norm() / scale);
                } else if c < r {
                    upper = upper.max(a_mirror[(r, c)].norm() / scale_mirror);
                }
            }
            for (matrix, mirror) in [(&a, false), (&a_mirror, true)] {
                let expect = weight_functions::diagonal_closed_form(idx, lambda, &model, mirror);
                diagonal = diagonal.max(weight_functions::scaled_diff(matrix[(r, r)], expect));
            }
        }
    }
    Ok(vec![
        Check::below("weight functions lower triangular", lower, tol),
        Check::below("mirror weight functions upper triangular", upper, tol),
        Check::below("diagonal closed forms", diagonal, tol),
    ])
}

fn rmatrix_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-9);
    let one = Weight::Finite(1);
    let mut sampler = Sampler::new(cfg.seed);
    let (mut fund, mut dybe, mut unitarity, mut generic) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let p = EllipticParams::new(c64(sampler.real(-0.3, 0.3), sampler.real(0.8, 1.3)), sampler.complex((0.07, 0.17), (-0.03, 0.03)))?;
        let (z, w) = (sampler.complex((-0.4, 0.4), (-0.2, 0.2)), sampler.complex((-0.4, 0.4), (-0.2, 0.2)));
        let lambda = sampler.complex((-0.4, 0.4), (-0.3, 0.3));
        let block = rmatrix::build_rmatrix(c64(1.0, 0.0), c64(1.0, 0.0), z, lambda, 1, &p)?;
        let r = rmatrix::fundamental_r(z, lambda, &p)?;
        for a in 0..2 {
            for b in 0..2 {
                fund = fund.max((block.entries[(a, b)] - r[(a + 1, b + 1)]).norm());
            }
        }
        for m in 0..=2 {
            dybe = dybe.max(rmatrix::dybe_residual([one; 3], z, w, lambda, m, &p)?);
            unitarity = unitarity.max(rmatrix::unitarity_residual(one, one, z, lambda, m, &p)?);
        }
        let ls: Vec<Weight> = (0..3).map(|_| Weight::Verma(sampler.complex((0.3, 1.7), (-0.3, 0.3)))).collect();
        for m in 0..=2 {
            generic = generic.max(rmatrix::dybe_residual([ls[0], ls[1], ls[2]], z, w, lambda, m, &p)?);
            generic = generic.max(rmatrix::unitarity_residual(ls[0], ls[1], z, lambda, m, &p)?);
        }
    }
    Ok(vec![
        Check::below("level-one block equals fundamental R", fund, tol),
        Check::below("dynamical Yang-Baxter, fundamental", dybe, tol),
        Check::below("unitarity, fundamental", unitarity, tol),
        Check::below("Yang-Baxter and unitarity, generic weights", generic, cfg.tolerance(1e-8)),
    ])
}

fn qkzb_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-9);
    let mut checks = Vec::new();
    let mut sampler = Sampler::new(cfg.seed);
    for n in [2usize, 4] {
        let p = generic_params(cfg)?.with_p(sampler.complex((0.2, 0.5), (0.1, 0.3)))?;
        let space = Arc::new(TensorSpace::fundamental(n)?);
        let z: Vec<C64> = (0..n).map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2))).collect();
        let probes: Vec<ZeroWeightFn> = (0..5).map(|_| ZeroWeightFn::probe(space.clone(), 2, &mut sampler)).collect();
        let grid = lambda_grid(&p, 4, 0.03, cfg.seed);
        let s = weyl_reflection(space.clone(), &p)?;
        let shifted = |i: usize| {
            let mut out = z.clone();
            out[i] += p.p;
            out
        };
        let (mut compat, mut weyl) = (0.0f64, 0.0f64);
        for i in 0..n {
            let ki = kzb_operator(space.clone(), i, &z, &p)?;
            for j in i + 1..n {
                let kj = kzb_operator(space.clone(), j, &z, &p)?;
                let lhs = kj.then(&kzb_operator(space.clone(), i, &shifted(j), &p)?)?;
                let rhs = ki.then(&kzb_operator(space.clone(), j, &shifted(i), &p)?)?;
                compat = compat.max(operator_residual(&lhs, &rhs, &probes, &grid)?);
            }
            weyl = weyl.max(operator_residual(&ki.then(&s)?, &s.then(&ki)?, &probes, &grid)?);
        }
        checks.push(Check::below(format!("n={n} compatibility"), compat, tol));
        checks.push(Check::below(format!("n={n} Weyl commutation"), weyl, tol));
    }
    Ok(checks)
}

fn resonance_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-8);
    let p = generic_params(cfg)?;
    let mut sampler = Sampler::new(cfg.seed);
    let (mut plain, mut shifted) = (0.0f64, 0.0f64);
    for n in 2..=3usize {
        let lambdas: Vec<C64> = (0..n).map(|_| sampler.complex((0.3, 1.7), (-0.3, 0.3))).collect();
        let z: Vec<C64> = (0..n).map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2))).collect();
        let model = ModelParams::new(lambdas, z, p)?;
        for m in 1..=2usize {
            let t: Vec<C64> = (0..m).map(|_| sampler.complex((-0.4, 0.4), (-0.3, 0.3))).collect();
            for base in compositions(m, n) {
                for j in 0..n - 1 {
                    for b in (0..=base.0[j] + base.0[j + 1]).filter(|&b| b != base.0[j]) {
                        for (r, s) in [(0i64, 0i64), (1, 1), (-1, 2)] {
                            let v = weight_functions::resonance_check_weights(j, &base, b, r, s, &t, &model)?;
                            if (r, s) == (0, 0) {
                                plain = plain.max(v);
                            } else {
                                shifted = shifted.max(v);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(vec![Check::below("resonance relations", plain, tol), Check::below("lattice-shifted resonance relations", shifted, tol)])
}

/// Four-site problem at `eta = 1/2N` (default `N = 4`) with unit weights.
pub fn root_of_unity_problem(cfg: &RunConfig, variant: BetheVariant) -> Result<BetheProblem, Failure> {
    let mut cfg = cfg.clone();
    cfg.level = cfg.level.or(Some(4));
    let n = cfg.n.unwrap_or(4);
    if n % 2 != 0 {
        return Err(Failure::config(format!("n must be even, got {n}")));
    }
    let model = ModelParams::new(vec![c64(1.0, 0.0); n], cfg.points(n)?, cfg.params()?)?;
    Ok(BetheProblem::new(variant, model, cfg.c, n / 2)?)
}

fn bethe_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let problem = root_of_unity_problem(cfg, BetheVariant::HType)?;
    let p = *problem.params();
    let options = SolverOptions { seed: cfg.seed, ..SolverOptions::default() };
    let solutions = bethe::solve_bae(&problem, &options)?;
    if solutions.is_empty() {
        return Err(Failure::solver("no Bethe roots found"));
    }
    let grid = lambda_grid(&p, 20, 0.03, cfg.seed);
    let (mut bae, mut h, mut t, mut resonance) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for sol in &solutions {
        bae = bae.max(sol.residual);
        let psi = bethe::eigenfunction_h(&problem, &sol.roots)?;
        for j in 0..problem.n() {
            let op = h_operator(psi.space().clone(), j, &problem.model.z, &p)?;
            let e = bethe::eigenvalue_h(&problem, &sol.roots, j)?;
            h = h.max(bethe::eigen_residual(&op.apply(&psi)?, &psi, e, &grid)?);
        }
        let op = transfer_operator(psi.space().clone(), cfg.w, &problem.model.z, TransferKind::Irf, &p)?;
        let e = bethe::eigenvalue_irf(&problem, &sol.roots, cfg.w)?;
        t = t.max(bethe::eigen_residual(&op.apply(&psi)?, &psi, e, &grid)?);
        resonance = resonance.max(bethe::resonance_residual(&psi, &problem, false)?);
    }
    Ok(vec![
        Check::below("Bethe equations", bae, cfg.tolerance(1e-11)),
        Check::below("H_j eigen-equations", h, cfg.tolerance(1e-8)),
        Check::below("transfer eigen-equation", t, cfg.tolerance(1e-8)),
        Check::below("resonance relations", resonance, cfg.tolerance(1e-8)),
    ])
}

fn irf_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let level = cfg.level.unwrap_or(4);
    let n = cfg.n.unwrap_or(4);
    let mut local = cfg.clone();
    local.level = Some(level);
    let p = local.params()?;
    let z = local.points(n)?;
    let spectrum = irf::brute_force_spectrum(level, n, cfg.w, cfg.w2, &z, &p)?;
    let walks = irf::closed_walk_count(level, n);
    let generic = generic_params(cfg)?;
    let space = Arc::new(TensorSpace::fundamental(n)?);
    let transfer = transfer_operator(space, cfg.w, &z, TransferKind::Irf, &generic)?;
    let row = irf::row_to_row_residual(&transfer, n, c64(0.31, 0.17), (-3, 3), cfg.seed, &generic, cfg.w, &z)?;
    Ok(vec![
        Check::below("basis size minus walk count", (spectrum.basis.len() as f64 - walks as f64).abs(), 0.5),
        Check::below("commutator of restricted transfer matrices", spectrum.commutator, cfg.tolerance(1e-9)),
        Check::below("commutator with height reflection", spectrum.reflection_commutator, cfg.tolerance(1e-9)),
        Check::below("row-to-row formula vs monodromy trace", row, cfg.tolerance(1e-9)),
    ])
}

fn ste_suite(cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerance(1e-9);
    let mut sampler = Sampler::new(cfg.seed);
    let hexagon = |lo: i64, hi: i64, sampler: &mut Sampler| loop {
        let mut labels = [sampler.integer(lo, hi); 6];
        for k in 1..6 {
            labels[k] = labels[k - 1] + if sampler.index(2) == 0 { 1 } else { -1 };
        }
        if (labels[5] - labels[0]).abs() == 1 && labels.iter().all(|&x| lo <= x && x <= hi) {
            return labels;
        }
    };
    let (mut generic, mut restricted) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = generic_params(&RunConfig { seed: sampler.integer(0, 1 << 30) as u64, ..cfg.clone() })?;
        let labels = hexagon(-3, 3, &mut sampler);
        let z = [0; 3].map(|_| sampler.complex((-0.4, 0.4), (-0.2, 0.2)));
        generic = generic.max(irf::star_triangle_residual(labels, z, c64(0.31, 0.17), HeightRange::Generic, &p)?);
        let level = 3 + sampler.integer(0, 2);
        let labels = hexagon(1, level - 1, &mut sampler);
        let p = EllipticParams::new(c64(0.0, 1.0), c64(0.5 / level as f64, 0.0))?;
        restricted = restricted.max(irf::star_triangle_residual(labels, z, c64(0.0, 0.0), HeightRange::Restricted(level), &p)?);
    }
    Ok(vec![Check::below("generic heights", generic, tol), Check::below("restricted heights", restricted, tol)])
}

fn fusion_suite(_cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let mut all = vec![Vec::new()];
    let mut lambda_sets = Vec::new();
    for _ in 0..4 {
        all = all.into_iter().flat_map(|v: Vec<i64>| (0..=3).map(move |l| [v.clone(), vec![l]].concat())).collect();
        lambda_sets.extend(all.iter().cloned());
    }
    let (mut shift_bad, mut lemma_bad) = (0usize, 0usize);
    for lambdas in &lambda_sets {
        for w in fusion::weight_vectors(lambdas) {
            for kind in [PathKind::Ordinary, PathKind::Modified] {
                let k = fusion::shift_number_for(&w, lambdas, kind);
                let admissible = |s| fusion::path_admissible(&fusion::shifted_path(&w, kind, 1, s), lambdas, kind, Rule::Sl2);
                if !admissible(k) || (0..k).any(admissible) {
                    shift_bad += 1;
                }
            }
            let lower = fusion::shift_number(&w.negated(), lambdas);
            for level in 2..=6i64 {
                let upper = level - fusion::shift_number(&w, lambdas);
                for k in 0..level {
                    let path = fusion::shifted_path(&w, PathKind::Ordinary, -1, k - 1);
                    if (lower < k && k < upper) != fusion::fusion_path(&path, lambdas, Rule::Uq(level)) {
                        lemma_bad += 1;
                    }
                }
            }
        }
    }
    Ok(vec![
        Check::below("shift numbers differing from scan", shift_bad as f64, 0.5),
        Check::below("interval criterion differing from fusion rules", lemma_bad as f64, 0.5),
    ])
}

/// Magnitude of `psi` on a few interior points, the reference scale for vanishing entries.
pub fn reference_size(psi: &ZeroWeightFn, params: &EllipticParams) -> Result<f64, Failure> {
    let mut size: f64 = 0.0;
    for x in lambda_grid(params, 4, 0.03, 1) {
        size = size.max(max_abs_vec(&psi.eval(x)?));
    }
    Ok(size)
}
