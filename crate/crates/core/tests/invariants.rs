//! Property tests for structural invariants.

use eqg_core::bethe::canonical_roots;
use eqg_core::elliptic_core::{theta, theta_quasi_check, EllipticParams};
use eqg_core::fusion::{self, PathKind, Rule};
use eqg_core::irf::{self, HeightRange, IrfState};
use eqg_core::rmatrix::{self, Weight};
use eqg_core::{c64, C64};
use proptest::prelude::*;

fn complex(re: std::ops::Range<f64>, im: std::ops::Range<f64>) -> impl Strategy<Value = C64> {
    (re, im).prop_map(|(a, b)| c64(a, b))
}

fn params() -> impl Strategy<Value = EllipticParams> {
    (complex(-0.4..0.4, 0.7..1.4), complex(0.05..0.2, -0.03..0.03))
        .prop_map(|(tau, eta)| EllipticParams::new(tau, eta).unwrap())
}

fn hexagon() -> impl Strategy<Value = [i64; 6]> {
    (-3i64..=3, prop::collection::vec(any::<bool>(), 5)).prop_filter_map("hexagon must close", |(start, steps)| {
        let mut labels = [start; 6];
        for k in 1..6 {
            labels[k] = labels[k - 1] + if steps[k - 1] { 1 } else { -1 };
        }
        ((labels[5] - labels[0]).abs() == 1).then_some(labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_is_odd_and_quasi_periodic(p in params(), t in complex(-1.0..1.0, -0.6..0.6)) {
        let scale = theta(t, &p).norm().max(1.0);
        prop_assert!((theta(-t, &p) + theta(t, &p)).norm() / scale < 1e-12);
        prop_assert!(theta_quasi_check(t, &p) < 1e-10);
    }

    #[test]
    fn canonical_roots_are_idempotent_and_order_free(
        roots in prop::collection::vec(complex(-3.0..3.0, -1.0..1.0), 1..5),
        shift in -3i64..3,
    ) {
        let once = canonical_roots(&roots);
        prop_assert_eq!(canonical_roots(&once), once.clone());
        let mut moved: Vec<C64> = roots.iter().rev().map(|x| x + shift as f64).collect();
        moved.rotate_left(1);
        let again = canonical_roots(&moved);
        for (a, b) in again.iter().zip(&once) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_numbers_are_minimal(lambdas in prop::collection::vec(0i64..=3, 1..=5), pick in any::<prop::sample::Index>()) {
        let weights = fusion::weight_vectors(&lambdas);
        prop_assume!(!weights.is_empty());
        let w = &weights[pick.index(weights.len())];
        for kind in [PathKind::Ordinary, PathKind::Modified] {
            let k = fusion::shift_number_for(w, &lambdas, kind);
            let admissible = |s| fusion::path_admissible(&fusion::shifted_path(w, kind, 1, s), &lambdas, kind, Rule::Sl2);
            prop_assert!(admissible(k));
            prop_assert!((0..k).all(|s| !admissible(s)));
        }
    }

    #[test]
    fn restricted_basis_counts_closed_walks(level in 3i64..=7, half in 1usize..=3) {
        let n = 2 * half;
        let basis = irf::restricted_basis(level, n);
        prop_assert_eq!(basis.len() as u64, irf::closed_walk_count(level, n));
        for state in &basis {
            prop_assert!(state.is_cyclic_path() && state.is_restricted(level));
            let back: IrfState = state.reflected(level).reflected(level);
            prop_assert_eq!(&back, state);
        }
    }

    #[test]
    fn star_triangle_holds_for_generic_heights(
        p in params(),
        labels in hexagon(),
        z in prop::array::uniform3(complex(-0.4..0.4, -0.2..0.2)),
        mu in complex(-0.5..0.5, -0.3..0.3),
    ) {
        prop_assert!(irf::star_triangle_residual(labels, z, mu, HeightRange::Generic, &p).unwrap() < 1e-9);
    }

    #[test]
    fn fundamental_unitarity(p in params(), z in complex(-0.4..0.4, -0.2..0.2), lambda in complex(-0.4..0.4, -0.3..0.3)) {
        let one = Weight::Finite(1);
        for m in 0..=2 {
            prop_assert!(rmatrix::unitarity_residual(one, one, z, lambda, m, &p).unwrap() < 1e-9);
        }
    }
}
