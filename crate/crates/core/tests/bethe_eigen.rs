use std::f64::consts::PI;

use eqg_core::bethe::*;
use eqg_core::elliptic_core::EllipticParams;
use eqg_core::fusion::{PathKind, Rule};
use eqg_core::qkzb_ops::{h_operator, transfer_operator, TransferKind};
use eqg_core::weight_functions::ModelParams;
use eqg_core::{c64, C64};

const GRID: [C64; 3] = [C64::new(0.19, 0.05), C64::new(-0.23, 0.11), C64::new(0.07, -0.17)];

fn problem(n: usize, eta: C64, c: C64) -> BetheProblem {
    let p = EllipticParams::new(c64(0.05, 1.05), eta).unwrap();
    let z = [c64(0.11, 0.03), c64(-0.2, 0.01), c64(0.33, -0.02), c64(0.05, 0.04)][..n].to_vec();
    let model = ModelParams::new(vec![c64(1.0, 0.0); n], z, p).unwrap();
    BetheProblem::new(BetheVariant::HType, model, c, n / 2).unwrap()
}

fn solutions(problem: &BetheProblem) -> Vec<BetheSolution> {
    let found = solve_bae(problem, &SolverOptions::default()).unwrap();
    assert!(!found.is_empty(), "no Bethe roots found");
    found
}

#[test]
fn two_site_eigenfunctions_diagonalise_h_and_transfer() {
    let prob = problem(2, c64(0.093, 0.011), c64(0.0, 0.0));
    let w = c64(0.07, -0.13);
    for sol in solutions(&prob) {
        assert!(sol.residual < 1e-11);
        let psi = eigenfunction_h(&prob, &sol.roots).unwrap();
        for j in 0..2 {
            let h = h_operator(psi.space().clone(), j, &prob.model.z, prob.params()).unwrap();
            let e = eigenvalue_h(&prob, &sol.roots, j).unwrap();
            assert!(eigen_residual(&h.apply(&psi).unwrap(), &psi, e, &GRID).unwrap() < 1e-9);
        }
        let t = transfer_operator(psi.space().clone(), w, &prob.model.z, TransferKind::Irf, prob.params()).unwrap();
        let e = eigenvalue_irf(&prob, &sol.roots, w).unwrap();
        assert!(eigen_residual(&t.apply(&psi).unwrap(), &psi, e, &GRID).unwrap() < 1e-9);
        assert!(resonance_residual(&psi, &prob, false).unwrap() < 1e-9);
        assert!(quasi_periodicity_residual(&psi, &prob, GRID[0]).unwrap() < 1e-10);
    }
}

#[test]
fn partner_system_gives_tensor_product_eigenfunctions() {
    let prob = problem(2, c64(0.093, 0.011), c64(0.0, 0.0));
    let partner = prob.partner().unwrap();
    let w = c64(-0.21, 0.05);
    for sol in solutions(&prob) {
        let u = prob.partner_roots(&sol.roots);
        assert!(max_abs(&bae_residual(&partner, &u).unwrap()) < 1e-10);
        let psi = eigenfunction_transfer(&partner, &u).unwrap();
        let t = transfer_operator(psi.space().clone(), w, &partner.model.z, TransferKind::TensorProduct, partner.params())
            .unwrap();
        let e = eigenvalue_transfer(&partner, &u, w).unwrap();
        assert!(eigen_residual(&t.apply(&psi).unwrap(), &psi, e, &GRID).unwrap() < 1e-9);
        assert!(resonance_residual(&psi, &partner, true).unwrap() < 1e-9);
    }
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn root_of_unity_vanishing_pattern_on_four_sites() {
    let prob = problem(4, c64(0.125, 0.0), c64(0.0, PI));
    let mut informative = 0;
    for sol in solutions(&prob) {
        let psi = eigenfunction_h(&prob, &sol.roots).unwrap();
        let scale = GRID.iter().map(|&x| eqg_core::linalg::max_abs_vec(&psi.eval(x).unwrap())).fold(0.0, f64::max);
        let apsi = antisymmetrize(&psi, prob.params()).unwrap();
        let report = vanishing_report(&apsi, &prob, PathKind::Ordinary, Rule::Uq(4), 0..4).unwrap();
        assert!(report.max_forced < 1e-8 * scale, "forced entry {:.2e}", report.max_forced);
        if report.min_unforced > 1e-6 * scale {
            informative += 1;
            assert!(report.certified(1e-8 * scale, 10.0));
        }
        assert!(weyl_pair_residual(&psi, &prob, PathKind::Ordinary).unwrap() < 1e-8);
    }
    assert!(informative >= 1, "every solution has a vanishing antisymmetrisation");
}
