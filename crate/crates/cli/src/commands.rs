use eqg_core::bethe::{self, BetheProblem, BetheVariant, SolverOptions};
use eqg_core::fusion::{PathKind, Rule};
use eqg_core::irf;
use eqg_core::rmatrix::{self, Weight};
use eqg_core::weight_functions::ModelParams;
use eqg_core::C64;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{pair, pairs, Check, Failure, Report};
use crate::suites::{self, reference_size, Suite};

/// Runs the requested suites on separate threads and collects their checks in suite order.
pub fn verify(cfg: &RunConfig, suite: Suite) -> Result<Report, Failure> {
    let selected: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let results: Vec<(Suite, Result<Vec<Check>, Failure>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = selected.iter().map(|&s| (s, scope.spawn(move || s.run(cfg)))).collect();
        handles.into_iter().map(|(s, h)| (s, h.join().unwrap_or_else(|_| Err(Failure::solver("suite panicked"))))).collect()
    });
    let mut checks = Vec::new();
    let mut per_suite = Vec::new();
    for (s, result) in results {
        let mut found = result?;
        for c in &mut found {
            c.name = format!("{}: {}", s.name(), c.name);
        }
        per_suite.push(json!({ "suite": s.name(), "passed": found.iter().all(|c| c.passed) }));
        checks.extend(found);
    }
    Ok(Report { command: "verify", checks, data: json!({ "seed": cfg.seed, "suites": per_suite }) })
}

fn weight_of(l: C64) -> (Weight, Option<usize>) {
    let k = l.re.round();
    if l.im.abs() < 1e-12 && (l.re - k).abs() < 1e-12 && k >= 0.0 {
        (Weight::Finite(k as usize), Some(k as usize))
    } else {
        (Weight::Verma(l), None)
    }
}

/// One weight block of the dynamical R-matrix with its unitarity residual.
pub fn rmatrix_block(cfg: &RunConfig) -> Result<Report, Failure> {
    let p = cfg.params()?;
    let lambdas = cfg.weights(2)?;
    let z = cfg.z.as_ref().and_then(|z| z.first().copied()).unwrap_or(eqg_core::c64(0.23, 0.07));
    let m = cfg.m.unwrap_or(1);
    let (w1, cap1) = weight_of(lambdas[0]);
    let (w2, cap2) = weight_of(lambdas[1]);
    let block = rmatrix::build_rmatrix_regular(lambdas[0], lambdas[1], z, cfg.lambda, m, (cap1, cap2), &p)?;
    let unitarity = rmatrix::unitarity_residual(w1, w2, z, cfg.lambda, m, &p)?;
    Ok(Report {
        command: "rmatrix",
        checks: vec![Check::below("unitarity", unitarity, cfg.tolerance(1e-9))],
        data: json!({ "tau": pair(p.tau), "eta": pair(p.eta), "block": block.to_json() }),
    })
}

fn bethe_problem(cfg: &RunConfig) -> Result<BetheProblem, Failure> {
    let n = cfg.n.or(cfg.z.as_ref().map(Vec::len)).unwrap_or(4);
    let lambdas = cfg.weights(n)?;
    let model = ModelParams::new(lambdas, cfg.points(n)?, cfg.params()?)?;
    let m = match (cfg.m, model.zero_weight_level()) {
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(Failure::config("weights have no zero-weight space; give m explicitly")),
    };
    Ok(BetheProblem::new(BetheVariant::HType, model, cfg.c, m)?)
}

/// Solves the Bethe equations and reports each solution with its eigenvalues at `w`.
pub fn bethe_roots(cfg: &RunConfig) -> Result<Report, Failure> {
    let problem = bethe_problem(cfg)?;
    let options = SolverOptions { seed: cfg.seed, ..SolverOptions::default() };
    let solutions = bethe::solve_bae(&problem, &options)?;
    if solutions.is_empty() {
        return Err(Failure::solver("no Bethe roots found"));
    }
    let mut records = Vec::new();
    let mut worst: f64 = 0.0;
    for sol in &solutions {
        worst = worst.max(sol.residual);
        let mut record = bethe::solution_json(&problem, sol);
        let h: Vec<C64> = (0..problem.n()).map(|j| bethe::eigenvalue_h(&problem, &sol.roots, j)).collect::<Result<_, _>>()?;
        record["h_eigenvalues"] = pairs(&h);
        record["transfer_eigenvalue"] = pair(bethe::eigenvalue_irf(&problem, &sol.roots, cfg.w)?);
        records.push(record);
    }
    Ok(Report {
        command: "bethe",
        checks: vec![Check::below("Bethe equations", worst, cfg.tolerance(1e-11))],
        data: json!({ "w": pair(cfg.w), "m": problem.m, "solutions": records }),
    })
}

fn level_and_sites(cfg: &RunConfig) -> Result<(i64, usize), Failure> {
    let level = cfg.level.ok_or_else(|| Failure::config("--N is required"))?;
    let n = cfg.n.ok_or_else(|| Failure::config("--n is required"))?;
    if n == 0 || n % 2 != 0 {
        return Err(Failure::config(format!("n must be positive and even, got {n}")));
    }
    Ok((level, n))
}

/// Restricted transfer-matrix spectrum, optionally matched against Bethe eigenvalues.
pub fn irf_spectrum(cfg: &RunConfig, with_bethe: bool) -> Result<Report, Failure> {
    let (level, n) = level_and_sites(cfg)?;
    let p = cfg.params()?;
    let z = cfg.points(n)?;
    let spectrum = irf::brute_force_spectrum(level, n, cfg.w, cfg.w2, &z, &p)?;
    let mut checks = vec![
        Check::below("basis size minus walk count", (spectrum.basis.len() as f64 - irf::closed_walk_count(level, n) as f64).abs(), 0.5),
        Check::below("commutator", spectrum.commutator, cfg.tolerance(1e-9)),
        Check::below("reflection commutator", spectrum.reflection_commutator, cfg.tolerance(1e-9)),
    ];
    let mut matches = Vec::new();
    if with_bethe {
        let problem = suites::root_of_unity_problem(cfg, BetheVariant::FundamentalIrf)?;
        let options = SolverOptions { seed: cfg.seed, ..SolverOptions::default() };
        for sol in bethe::solve_bae(&problem, &options)? {
            let psi = bethe::eigenfunction_h(&problem, &sol.roots)?;
            let apsi = bethe::antisymmetrize(&psi, &p)?;
            let reference = reference_size(&psi, &p)?;
            let (_, v) = match irf::bethe_eigenvector_restricted(&apsi, level, n, reference, 1e-8, &p) {
                Ok(found) => found,
                Err(eqg_core::Error::Degenerate(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let found = spectrum.match_vector(&v, bethe::eigenvalue_irf(&problem, &sol.roots, cfg.w)?);
            checks.push(Check::below("Bethe eigenvalue distance", found.distance, cfg.tolerance(1e-7)));
            checks.push(Check::below("Bethe eigenspace overlap defect", 1.0 - found.overlap, cfg.tolerance(1e-6)));
            matches.push(found);
        }
    }
    Ok(Report { command: "irf-spectrum", checks, data: spectrum.to_json(level, cfg.w, &matches) })
}

/// Vanishing pattern of the antisymmetrised Bethe eigenfunctions at `lambda = 2 eta k`.
pub fn vanishing_report(cfg: &RunConfig) -> Result<Report, Failure> {
    let (level, _) = level_and_sites(cfg)?;
    let problem = suites::root_of_unity_problem(cfg, BetheVariant::HType)?;
    let partner = problem.partner()?;
    let p = *problem.params();
    let options = SolverOptions { seed: cfg.seed, ..SolverOptions::default() };
    let solutions = bethe::solve_bae(&problem, &options)?;
    if solutions.is_empty() {
        return Err(Failure::solver("no Bethe roots found"));
    }
    let tol = cfg.tolerance(1e-8);
    let mut checks = Vec::new();
    let mut records = Vec::new();
    for (i, sol) in solutions.iter().enumerate() {
        let psi = bethe::eigenfunction_h(&problem, &sol.roots)?;
        let reference = reference_size(&psi, &p)?;
        let mirror = bethe::eigenfunction_transfer(&partner, &problem.partner_roots(&sol.roots))?;
        let ordinary = bethe::vanishing_report(&bethe::antisymmetrize(&psi, &p)?, &problem, PathKind::Ordinary, Rule::Uq(level), 0..level)?;
        let modified =
            bethe::vanishing_report(&bethe::antisymmetrize(&mirror, &p)?, &partner, PathKind::Modified, Rule::Uq(level), 0..level)?;
        let degenerate = ordinary.min_unforced <= 1e-6 * reference || modified.min_unforced <= 1e-6 * reference;
        for (name, report) in [("ordinary", &ordinary), ("modified", &modified)] {
            checks.push(Check::below(format!("solution {i} {name} forced entries"), report.max_forced / reference, tol));
            if !degenerate {
                let separation = report.min_unforced / report.max_forced.max(tol * reference);
                checks.push(Check::below(format!("solution {i} {name} inverse separation"), 1.0 / separation, 0.1));
            }
        }
        records.push(json!({
            "roots": pairs(&sol.roots),
            "reference": reference,
            "degenerate": degenerate,
            "ordinary": ordinary.to_json(),
            "modified": modified.to_json(),
        }));
    }
    Ok(Report { command: "vanishing-report", checks, data: json!({ "N": level, "c": pair(problem.c), "solutions": records }) })
}
