//! Shared test fixtures: random matrix draws and a compact instance family
//! that is worst-case feasible at its own starting point by construction.

use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelSet, Region, RegionChannels};
use crate::expcli::config::SystemConfig;
use crate::numerics::{dagger, C64, HermitianMatrix};
use crate::passive::StarGram;

pub(crate) fn randn_mat(m: usize, n: usize, rng: &mut ChaCha12Rng) -> Array2<C64> {
    Array2::from_shape_fn((m, n), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub(crate) fn random_psd(dim: usize, rng: &mut ChaCha12Rng) -> HermitianMatrix {
    let g = randn_mat(dim, dim, rng);
    HermitianMatrix::symmetrize(g.dot(&dagger(&g)))
}

pub(crate) fn unit(v: &Array1<C64>) -> Array1<C64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

pub(crate) fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// A small instance that is worst-case feasible at its own starting surface
/// by construction: the region-t beam is aligned with the effective rate
/// channel of region t and orthogonal to region r's, and the thresholds are
/// backed off from the values the starting point actually achieves.
pub(crate) struct Crafted {
    pub channels: ChannelSet,
    pub w: [HermitianMatrix; 2],
    pub star: StarGram,
    pub config: SystemConfig,
}

pub(crate) fn crafted(m: usize, n_t: usize, full_amplitude: bool, seed: u64) -> Crafted {
    const EPS: f64 = 1e-3;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let region = |rng: &mut ChaCha12Rng| RegionChannels {
        h_hat: randn_mat(m, n_t, rng),
        g_hat: randn_mat(m, n_t, rng),
        v_hat: randn_mat(m, n_t, rng),
        eps1: EPS,
        eps2: EPS,
        eps3: EPS,
        truth: None,
    };
    let t = region(&mut rng);
    let r = region(&mut rng);
    let channels = ChannelSet { t, r, m, n_t };
    let star = if full_amplitude {
        StarGram::full_on([m, m], &mut rng)
    } else {
        StarGram::uniform_split(m, &mut rng)
    };

    let phi_t = star.coefficients(Region::Transmission).unwrap();
    let phi_r = star.coefficients(Region::Reflection).unwrap();
    let c_t = dagger(&channels.t.h_hat).dot(phi_t);
    let c_r = dagger(&channels.r.h_hat).dot(phi_r);
    let a = unit(&c_t);
    let overlap: C64 = a.iter().zip(c_r.iter()).map(|(x, y)| x.conj() * y).sum();
    let b = unit(&(&c_r - &a.mapv(|z| z * overlap)));
    let w = [HermitianMatrix::outer(&a), HermitianMatrix::outer(&b)];

    let gain = |c: &Array1<C64>, dir: &Array1<C64>| -> f64 {
        let dot: C64 = dir.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
        dot.norm_sqr()
    };
    let a_t = gain(&c_t, &a);
    let b_t = gain(&c_t, &b);
    let a_r = gain(&c_r, &a);
    let b_r = gain(&c_r, &b);
    let gamma_ir = (b_r / (4.0 * a_r.max(1e-12))).min(0.9);
    let sigma2 = 0.25 * (a_t / gamma_ir - b_t).min(b_r / gamma_ir - a_r);
    assert!(sigma2 > 0.0, "crafted rate margins collapsed");

    let d_t = dagger(&channels.t.v_hat).dot(phi_t);
    let d_r = dagger(&channels.r.v_hat).dot(phi_r);
    let leak = |own: f64, cross: f64| own / (cross + sigma2);
    let eta =
        4.0 * leak(gain(&d_t, &a), gain(&d_t, &b)).max(leak(gain(&d_r, &b), gain(&d_r, &a)));

    let text = format!(
        "m = {m}\nn_t = {n_t}\nrate_ir = {}\nrate_eve = {}\nnoise_dbm = {}\nnoise_eve_dbm = {}\n",
        (1.0 + gamma_ir).log2(),
        (1.0 + eta).log2(),
        w_to_dbm(sigma2),
        w_to_dbm(sigma2),
    );
    let config = SystemConfig::parse(&text).expect("crafted config");
    Crafted { channels, w, star, config }
}
