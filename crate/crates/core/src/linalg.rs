//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Schur, SVD};

use crate::{CMatrix, CVector, Error, Result, C64};

pub fn inverse(a: &CMatrix, what: &str) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Eigenvalues of a square complex matrix from its complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Solver("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Orthonormal basis (as columns) of the numerical null space of `a`,
/// keeping singular directions with `sigma <= rel_tol * sigma_max`.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = a.ncols();
    // Pad to square so that the SVD exposes all right singular vectors.
    let mut square = CMatrix::zeros(n.max(a.nrows()), n);
    square.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = SVD::new(square, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= rel_tol * smax)
        .map(|(i, _)| v_t.row(i).adjoint().into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// `|| P v || / || v ||` where `P` projects onto the span of the orthonormal columns of `basis`.
pub fn overlap(basis: &CMatrix, v: &CVector) -> f64 {
    let norm = v.norm();
    if norm == 0.0 || basis.ncols() == 0 {
        return 0.0;
    }
    (basis.adjoint() * v).norm() / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn schur_eigenvalues_of_triangular() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c64(1.0, 1.0), c64(2.0, 0.0), c64(0.0, 3.0), C64::default(), c64(-2.0, 0.5),
              c64(1.0, 0.0), C64::default(), C64::default(), c64(0.5, -1.0)],
        );
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((ev[0] - c64(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c64(0.5, -1.0)).norm() < 1e-12);
        assert!((ev[2] - c64(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let v = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(2.0, 0.0)]);
        let a = &v * v.adjoint();
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!(max_abs(&(&a * &ns)) < 1e-12);
    }
}
