//! Complex-analytic kernels.
//!
//! The odd Jacobi theta function
//!
//! ```text
//! theta(t, tau) = - sum_{j in Z} exp(pi i (j+1/2)^2 tau + 2 pi i (j+1/2)(t+1/2))
//! ```
//!
//! is entire, odd, has simple zeros on `Z + tau Z` and multipliers `-1` and
//! `-exp(-2 pi i t - pi i tau)` under `t -> t+1` and `t -> t+tau`. Everything
//! else in the crate is a ratio of such thetas.

use std::f64::consts::PI;

use crate::{c64, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);
const DEFAULT_TOL: f64 = 1e-10;

/// Analytic context shared by every computation: modulus, step of the
/// dynamical shift, qKZB step and truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub tau: C64,
    pub eta: C64,
    /// Step of the qKZB system and second modulus of the phase function.
    pub p: C64,
    /// Number of q-series terms, chosen so that `|q|^n_terms < tol / 10`.
    pub n_terms: usize,
    /// Tolerance used by identity checks.
    pub tol: f64,
}

impl EllipticParams {
    pub fn new(tau: C64, eta: C64) -> Result<Self> {
        Self::with_all(tau, eta, C64::new(0.0, 0.0), DEFAULT_TOL)
    }

    pub fn with_all(tau: C64, eta: C64, p: C64, tol: f64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParams(format!("Im tau must be positive, got {tau}")));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidParams(format!("tolerance must lie in (0,1), got {tol}")));
        }
        if !eta.is_finite() || !p.is_finite() {
            return Err(Error::InvalidParams("eta and p must be finite".into()));
        }
        Ok(Self { tau, eta, p, n_terms: terms_for(tau, tol), tol })
    }

    pub fn with_p(self, p: C64) -> Result<Self> {
        Self::with_all(self.tau, self.eta, p, self.tol)
    }

    pub fn with_tol(self, tol: f64) -> Result<Self> {
        Self::with_all(self.tau, self.eta, self.p, tol)
    }

    pub fn with_tau(self, tau: C64) -> Result<Self> {
        Self::with_all(tau, self.eta, self.p, self.tol)
    }

    pub fn with_eta(self, eta: C64) -> Result<Self> {
        Self::with_all(self.tau, eta, self.p, self.tol)
    }

    /// `q = exp(2 pi i tau)`.
    pub fn nome(&self) -> C64 {
        (2.0 * PI * I * self.tau).exp()
    }

    /// Step `p` must lie in the upper half plane wherever it acts as a modulus.
    pub fn require_step(&self) -> Result<()> {
        if self.p.im > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("Im p must be positive, got {}", self.p)))
        }
    }
}

/// Smallest `n` with `|exp(2 pi i tau)|^n < tol / 10`.
pub fn terms_for(tau: C64, tol: f64) -> usize {
    let log_q = -2.0 * PI * tau.im;
    let n = ((tol / 10.0).ln() / log_q).ceil();
    (n.max(1.0) as usize).max(2)
}

/// Writes `t = t0 + k tau + l` with `|Im t0| <= Im tau / 2` and `|Re t0| <= 1/2`
/// (the real reduction is with respect to the oblique lattice direction).
fn reduce(t: C64, tau: C64) -> (C64, i64, i64) {
    let k = (t.im / tau.im).round();
    let t1 = t - k * tau;
    let l = t1.re.round();
    (t1 - l, k as i64, l as i64)
}

/// Multiplier `theta(t0 + k tau + l) / theta(t0)`.
fn lattice_multiplier(t0: C64, k: i64, l: i64, tau: C64) -> C64 {
    let sign = if (k + l).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let kf = k as f64;
    sign * (-2.0 * PI * I * kf * t0 - PI * I * tau * kf * kf).exp()
}

/// Half-width of the summation window that keeps every omitted term below
/// machine precision relative to the dominant one.
fn window(t: C64, tau: C64, n_terms: usize) -> i64 {
    (n_terms as f64 + (t.im / tau.im).abs() + 3.0).ceil() as i64
}

/// Reduction is only used where direct summation would overflow.
fn needs_reduction(t: C64, tau: C64) -> bool {
    t.im.abs() > 6.0 * tau.im
}

fn series(t: C64, tau: C64, n_terms: usize) -> (C64, C64) {
    let half = window(t, tau, n_terms);
    let mut value = C64::new(0.0, 0.0);
    let mut deriv = C64::new(0.0, 0.0);
    for j in -half - 1..=half {
        let x = j as f64 + 0.5;
        let term = (PI * I * x * x * tau + 2.0 * PI * I * x * (t + 0.5)).exp();
        value += term;
        deriv += 2.0 * PI * I * x * term;
    }
    (-value, -deriv)
}

/// `theta(t, tau)` from the defining series truncated according to `n_terms`.
pub fn theta_with(t: C64, tau: C64, n_terms: usize) -> C64 {
    if needs_reduction(t, tau) {
        let (t0, k, l) = reduce(t, tau);
        series(t0, tau, n_terms).0 * lattice_multiplier(t0, k, l, tau)
    } else {
        series(t, tau, n_terms).0
    }
}

/// `theta(t, tau)` for the modulus in `params`.
pub fn theta(t: C64, params: &EllipticParams) -> C64 {
    theta_with(t, params.tau, params.n_terms)
}

/// Product formula
/// `2 e^{pi i tau/4} sin(pi t) prod_j (1-q^j)(1-q^j e^{2 pi i t})(1-q^j e^{-2 pi i t})`.
pub fn theta_product(t: C64, params: &EllipticParams) -> C64 {
    let q = params.nome();
    let x = (2.0 * PI * I * t).exp();
    let xi = (-2.0 * PI * I * t).exp();
    let mut acc = 2.0 * (PI * I * params.tau / 4.0).exp() * (PI * t).sin();
    let mut qj = q;
    let extra = (t.im.abs() / params.tau.im).ceil() as usize;
    for _ in 0..params.n_terms + extra + 2 {
        acc *= (1.0 - qj) * (1.0 - qj * x) * (1.0 - qj * xi);
        qj *= q;
    }
    acc
}

/// `theta'(t)` by the term-wise differentiated series.
pub fn theta_prime(t: C64, params: &EllipticParams) -> C64 {
    let tau = params.tau;
    if needs_reduction(t, tau) {
        let (t0, k, l) = reduce(t, tau);
        let (v, d) = series(t0, tau, params.n_terms);
        lattice_multiplier(t0, k, l, tau) * (d - 2.0 * PI * I * (k as f64) * v)
    } else {
        series(t, tau, params.n_terms).1
    }
}

/// `theta'(0)`, taken directly from the differentiated series.
pub fn theta_prime_zero(params: &EllipticParams) -> C64 {
    series(C64::new(0.0, 0.0), params.tau, params.n_terms).1
}

/// `theta'(t) / theta(t)`; lattice points are poles.
pub fn theta_log_derivative(t: C64, params: &EllipticParams) -> Result<C64> {
    let (t0, k, _) = reduce(t, params.tau);
    let (v, d) = series(t0, params.tau, params.n_terms);
    if v.norm() < 1e-14 * d.norm().max(1.0) {
        return Err(Error::Pole(format!("logarithmic derivative of theta at lattice point {t}")));
    }
    Ok(d / v - 2.0 * PI * I * (k as f64))
}

/// `max(|theta(t+1) + theta(t)|, |theta(t+tau) + e^{-2 pi i t - pi i tau} theta(t)|)`,
/// relative to `max(1, |theta(t)|)`.
pub fn theta_quasi_check(t: C64, params: &EllipticParams) -> f64 {
    let tau = params.tau;
    let n = params.n_terms;
    let base = series_or_reduced(t, tau, n);
    let shifted_one = series_or_reduced(t + 1.0, tau, n);
    let shifted_tau = series_or_reduced(t + tau, tau, n);
    let scale = base.norm().max(1.0);
    let r1 = (shifted_one + base).norm();
    let r2 = (shifted_tau + (-2.0 * PI * I * t - PI * I * tau).exp() * base).norm();
    r1.max(r2) / scale
}

/// Direct summation without lattice reduction whenever it is numerically safe,
/// so the quasi-periodicity check compares genuinely independent sums.
fn series_or_reduced(t: C64, tau: C64, n_terms: usize) -> C64 {
    if t.im.abs() <= 12.0 * tau.im {
        series(t, tau, n_terms).0
    } else {
        theta_with(t, tau, n_terms)
    }
}

/// Elliptic number `[k] = theta(2 eta k) / theta(2 eta)`.
pub fn elliptic_number(k: i64, params: &EllipticParams) -> C64 {
    let two_eta = 2.0 * params.eta;
    theta(two_eta * k as f64, params) / theta(two_eta, params)
}

/// Elliptic factorial `[k]! = [1][2]...[k]`, `[0]! = 1`.
pub fn elliptic_factorial(k: i64, params: &EllipticParams) -> Result<C64> {
    if k < 0 {
        return Err(Error::InvalidParams(format!("elliptic factorial of negative integer {k}")));
    }
    Ok((1..=k).map(|j| elliptic_number(j, params)).product())
}

/// Phase function `Omega_a(t, tau, p)` with step and modulus from `params`.
pub fn phase_omega(t: C64, a: C64, params: &EllipticParams) -> Result<C64> {
    params.require_step()?;
    phase_omega_with(t, a, params.tau, params.p, params.tol)
}

/// Phase function as a truncated double product:
///
/// ```text
/// prod_{j,k >= 0} (1 - r^j q^k e(t-a)) (1 - r^{j+1} q^{k+1} e(-t-a))
///               / (1 - r^j q^k e(t+a)) (1 - r^{j+1} q^{k+1} e(-t+a))
/// ```
///
/// with `q = e(tau)`, `r = e(p)`, `e(x) = exp(2 pi i x)`.
pub fn phase_omega_with(t: C64, a: C64, tau: C64, p: C64, tol: f64) -> Result<C64> {
    if !(tau.im > 0.0 && p.im > 0.0) {
        return Err(Error::InvalidParams("phase function needs Im tau > 0 and Im p > 0".into()));
    }
    let e = |x: C64| (2.0 * PI * I * x).exp();
    let q = e(tau);
    let r = e(p);
    let nq = terms_for(tau, tol * 1e-4) + 2;
    let nr = terms_for(p, tol * 1e-4) + 2;
    let (e_tma, e_mta, e_tpa, e_mtpa) = (e(t - a), e(-t - a), e(t + a), e(-t + a));
    let mut acc = c64(1.0, 0.0);
    let mut rj = c64(1.0, 0.0);
    for _ in 0..nr {
        let mut qk = c64(1.0, 0.0);
        for _ in 0..nq {
            let w = rj * qk;
            let w1 = w * r * q;
            let num = (1.0 - w * e_tma) * (1.0 - w1 * e_mta);
            let den = (1.0 - w * e_tpa) * (1.0 - w1 * e_mtpa);
            if den.norm() < 1e-300 {
                return Err(Error::Pole(format!("phase function pole at t = {t}, a = {a}")));
            }
            acc *= num / den;
            qk *= q;
        }
        rj *= r;
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::Pole(format!("phase function not finite at t = {t}, a = {a}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EllipticParams {
        EllipticParams::new(c64(0.0, 1.0), c64(0.13, 0.02)).unwrap()
    }

    #[test]
    fn theta_vanishes_on_lattice() {
        let p = params();
        for t in [c64(0.0, 0.0), c64(1.0, 0.0), p.tau, p.tau + 2.0] {
            assert!(theta(t, &p).norm() < 1e-13, "theta({t}) = {}", theta(t, &p));
        }
    }

    #[test]
    fn theta_half_matches_product() {
        let p = params();
        let q = (-2.0 * PI).exp();
        let mut expect = 2.0 * (-PI / 4.0).exp();
        for j in 1..40 {
            let qj = q.powi(j);
            expect *= (1.0 - qj) * (1.0 + qj) * (1.0 + qj);
        }
        assert!((theta(c64(0.5, 0.0), &p) - expect).norm() < 1e-14);
    }

    #[test]
    fn reduction_agrees_with_direct_sum() {
        let p = params();
        let t = c64(0.31, 7.4);
        let (t0, k, l) = reduce(t, p.tau);
        let reduced = series(t0, p.tau, p.n_terms).0 * lattice_multiplier(t0, k, l, p.tau);
        let direct = series(t, p.tau, p.n_terms).0;
        assert!((reduced - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn log_derivative_matches_finite_difference() {
        let p = params();
        for t in [c64(0.21, 0.13), c64(-0.4, 0.9), c64(0.1, 8.2)] {
            let h = 1e-6;
            let fd = (theta(t + h, &p) - theta(t - h, &p)) / (2.0 * h) / theta(t, &p);
            let ld = theta_log_derivative(t, &p).unwrap();
            assert!((fd - ld).norm() < 1e-6 * ld.norm().max(1.0), "{fd} vs {ld}");
            let odd = theta_log_derivative(-t, &p).unwrap();
            assert!((odd + ld).norm() < 1e-10 * ld.norm().max(1.0));
        }
        assert!(theta_log_derivative(c64(0.0, 0.0), &p).is_err());
    }

    #[test]
    fn theta_prime_zero_matches_product_derivative() {
        let p = params();
        let h = 1e-5;
        let fd = (theta_product(c64(h, 0.0), &p) - theta_product(c64(-h, 0.0), &p)) / (2.0 * h);
        assert!((fd - theta_prime_zero(&p)).norm() < 1e-8);
    }

    #[test]
    fn elliptic_numbers() {
        let p = params();
        assert!((elliptic_number(1, &p) - 1.0).norm() < 1e-15);
        assert_eq!(elliptic_factorial(0, &p).unwrap(), c64(1.0, 0.0));
        for k in 1..5 {
            assert!((elliptic_number(-k, &p) + elliptic_number(k, &p)).norm() < 1e-13);
        }
        assert!(elliptic_factorial(-1, &p).is_err());
    }

    #[test]
    fn phase_function_identities() {
        let p = params().with_p(c64(0.17, 0.83)).unwrap();
        let a = c64(0.11, 0.04);
        assert!((phase_omega(c64(0.3, 0.2), c64(0.0, 0.0), &p).unwrap() - 1.0).norm() < 1e-14);
        for z in [c64(0.23, 0.1), c64(-0.31, 0.27)] {
            let lhs = phase_omega(z + p.p, a, &p).unwrap();
            let rhs = (2.0 * PI * I * a).exp() * theta(z + a, &p) / theta(z - a, &p)
                * phase_omega(z, a, &p).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
            let swapped = phase_omega_with(z, a, p.p, p.tau, p.tol).unwrap();
            assert!((swapped - phase_omega(z, a, &p).unwrap()).norm() < 1e-10);
            let periodic = phase_omega(z + 1.0, a, &p).unwrap();
            assert!((periodic - phase_omega(z, a, &p).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(EllipticParams::new(c64(0.1, -0.2), c64(0.1, 0.0)).is_err());
        assert!(phase_omega(c64(0.1, 0.0), c64(0.1, 0.0), &params()).is_err());
    }
}
