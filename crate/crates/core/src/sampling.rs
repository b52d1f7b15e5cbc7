//! Seeded samplers for "generic" parameters and probe functions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic_core::EllipticParams;
use crate::{c64, CVector, C64};

/// Deterministic source of generic complex parameters.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn real(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn complex(&mut self, re: (f64, f64), im: (f64, f64)) -> C64 {
        c64(self.real(re.0, re.1), self.real(im.0, im.1))
    }

    /// Standard complex Gaussian.
    pub fn gaussian(&mut self) -> C64 {
        let u1: f64 = self.rng.gen_range(1e-12..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        c64(r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin()) / 2f64.sqrt()
    }

    pub fn index(&mut self, upper: usize) -> usize {
        self.rng.gen_range(0..upper)
    }

    pub fn integer(&mut self, lo: i64, hi_inclusive: i64) -> i64 {
        self.rng.gen_range(lo..=hi_inclusive)
    }

    /// Draws from the box until `accept` holds; gives up after many attempts.
    pub fn complex_where(
        &mut self,
        re: (f64, f64),
        im: (f64, f64),
        accept: impl Fn(C64) -> bool,
    ) -> C64 {
        for _ in 0..10_000 {
            let x = self.complex(re, im);
            if accept(x) {
                return x;
            }
        }
        panic!("sampler could not find an acceptable point");
    }
}

/// Distance from `x` to the set `base + Z + tau Z`.
pub fn lattice_distance(x: C64, base: C64, tau: C64) -> f64 {
    let d = x - base;
    let k = (d.im / tau.im).round();
    let mut best = f64::INFINITY;
    for dk in -1..=1 {
        let r = d - (k + dk as f64) * tau;
        let l = r.re.round();
        for dl in -1..=1 {
            best = best.min((r - (l + dl as f64)).norm());
        }
    }
    best
}

/// Distance from `x` to `2 eta Z + Z + tau Z`, scanning `|k| <= kmax`.
pub fn distance_to_shift_lattice(x: C64, params: &EllipticParams, kmax: i64) -> f64 {
    (-kmax..=kmax)
        .map(|k| lattice_distance(x, 2.0 * params.eta * k as f64, params.tau))
        .fold(f64::INFINITY, f64::min)
}

/// Deterministic grid of `count` points in the fundamental domain that keep at least
/// `margin` away from `2 eta Z + Z + tau Z`.
pub fn lambda_grid(params: &EllipticParams, count: usize, margin: f64, seed: u64) -> Vec<C64> {
    let mut sampler = Sampler::new(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = sampler.complex((-0.5, 0.5), (-0.45 * params.tau.im, 0.45 * params.tau.im));
        if distance_to_shift_lattice(x, params, 40) >= margin {
            out.push(x);
        }
    }
    out
}

/// Random trigonometric polynomial in `exp(2 pi i lambda)` with one coefficient vector per
/// Fourier mode `-degree..=degree`.
#[derive(Debug, Clone)]
pub struct ProbeFunction {
    degree: i64,
    coefficients: Vec<CVector>,
}

impl ProbeFunction {
    pub fn random(dim: usize, degree: i64, sampler: &mut Sampler) -> Self {
        let coefficients = (-degree..=degree)
            .map(|_| CVector::from_fn(dim, |_, _| sampler.gaussian()))
            .collect();
        Self { degree, coefficients }
    }

    pub fn eval(&self, lambda: C64) -> CVector {
        let base = (2.0 * PI * C64::i() * lambda).exp();
        let mut out = CVector::zeros(self.coefficients[0].len());
        for (idx, coeff) in self.coefficients.iter().enumerate() {
            let mode = idx as i64 - self.degree;
            out += coeff * base.powi(mode as i32);
        }
        out
    }
}
