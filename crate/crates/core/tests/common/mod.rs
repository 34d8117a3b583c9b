#![allow(dead_code)]

use blindsr::linalg::{CMat, CVec};
use blindsr::scene::ArrayGeometry;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn geo(n: usize) -> ArrayGeometry {
    ArrayGeometry::half_wavelength(n).unwrap()
}

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

pub fn cn_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn cn_vec<R: Rng>(rng: &mut R, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| cn(rng))
}

/// Unit-norm data vector with positive entries.
pub fn positive_unit<R: Rng>(rng: &mut R, len: usize) -> CVec {
    let v = CVec::from_fn(len, |_, _| Complex64::new(1.0 - rng.random::<f64>(), 0.0));
    let n = v.norm();
    v.unscale(n)
}

/// `sum_i coef_i a(theta_i) phi_i^H` over the full array.
pub fn atoms(geometry: &ArrayGeometry, angles: &[f64], coefs: &[f64], phis: &[CVec]) -> CMat {
    let t = phis[0].len();
    let mut y = CMat::zeros(geometry.n_antennas, t);
    for ((&th, &cf), phi) in angles.iter().zip(coefs).zip(phis) {
        y += geometry.steering_vector(th).unwrap().scale(cf) * phi.adjoint();
    }
    y
}

/// Angle whose spatial frequency is `f` on a half-wavelength array.
pub fn angle_at(f: f64) -> f64 {
    (2.0 * f).acos()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
