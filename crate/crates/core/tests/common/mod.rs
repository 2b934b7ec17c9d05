#![allow(dead_code)]

use irshp::channel::{generate_channels, LinkLosses};
use irshp::{CMat, CVec, Channels, SeedStream, SystemConfig};
use nalgebra::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> Complex<f64> {
    let n: f64 = rng.sample(rand_distr::StandardNormal);
    let m: f64 = rng.sample(rand_distr::StandardNormal);
    Complex::new(n, m)
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| cgauss(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    let a = random_matrix(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}

pub fn random_phases(rng: &mut impl Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| {
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        Complex::new(t.cos(), t.sin())
    })
}

pub fn table1_channels(seed: u64) -> Channels {
    generate_channels(
        &SystemConfig::table1(),
        &LinkLosses::uniform(0.0, 0.0),
        &SeedStream::new(seed),
    )
    .unwrap()
}

pub fn channels_for(cfg: &SystemConfig, seed: u64) -> Channels {
    generate_channels(cfg, &LinkLosses::uniform(0.0, 0.0), &SeedStream::new(seed)).unwrap()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
