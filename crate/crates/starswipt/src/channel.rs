//! Ground-segment channel synthesis and the bounded CSI uncertainty model.
//!
//! The surface-to-terminal links are Rician; the effective satellite→surface→
//! terminal channel is the cascade `diag(h^H)·f`, which absorbs the surface
//! into one linear map per terminal. Estimation error is modeled as an
//! unknown perturbation confined to a Frobenius-norm ball around the
//! estimate: truth is drawn first, an in-ball error is subtracted to obtain
//! the estimate, and the radii are set from the estimate norms, so
//! `‖truth − estimate‖_F ≤ ε` holds by construction for every family.

use ndarray::prelude::*;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expcli::config::{SatGainMode, SystemConfig};
use crate::numerics::C64;
use crate::record::{MatrixRecord, RecordError};
use crate::satlink::{self, SatLinkError};

/// Errors from channel synthesis and validation.
#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("reference path loss must be positive (got {0})")]
    NonPositivePathLoss(f64),
    #[error("path-loss exponent must be positive (got {0})")]
    NonPositiveExponent(f64),
    #[error("Rician factor must be nonnegative (got {0})")]
    NegativeRicianFactor(f64),
    #[error("distance must be positive (got {0} m)")]
    NonPositiveDistance(f64),
    #[error("dimension mismatch: vector length {vector} vs matrix rows {rows}")]
    DimensionMismatch { vector: usize, rows: usize },
    #[error("channel matrices must share shape ({m}, {n_t}); found {rows}x{cols}")]
    ShapeMismatch { m: usize, n_t: usize, rows: usize, cols: usize },
    #[error("error radius must be nonnegative (got {0})")]
    NegativeRadius(f64),
    #[error("true channel lies outside its uncertainty ball: distance {distance:.3e} > ε {eps:.3e}")]
    TruthOutsideBall { distance: f64, eps: f64 },
    #[error(transparent)]
    SatLink(#[from] SatLinkError),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Large- and small-scale fading parameters of one surface-to-terminal link.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundChannelParams {
    /// Reference path loss at 1 m (linear).
    pub chi_0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Rician factor (linear; `f64::INFINITY` gives the pure LoS limit).
    pub k: f64,
    /// Surface-to-terminal distance (m).
    pub d: f64,
    /// Surface element count.
    pub m: usize,
}

impl GroundChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.chi_0 > 0.0) {
            return Err(ChannelError::NonPositivePathLoss(self.chi_0));
        }
        if !(self.alpha > 0.0) {
            return Err(ChannelError::NonPositiveExponent(self.alpha));
        }
        if self.k < 0.0 || self.k.is_nan() {
            return Err(ChannelError::NegativeRicianFactor(self.k));
        }
        if !(self.d > 0.0) {
            return Err(ChannelError::NonPositiveDistance(self.d));
        }
        Ok(())
    }
}

/// Which side of the surface a terminal group sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Transmission side (signal passes through the surface).
    Transmission,
    /// Reflection side.
    Reflection,
}

impl Region {
    pub const BOTH: [Region; 2] = [Region::Transmission, Region::Reflection];

    pub fn label(self) -> &'static str {
        match self {
            Region::Transmission => "t",
            Region::Reflection => "r",
        }
    }

    /// Storage slot in `[transmission, reflection]`-ordered pairs.
    pub fn index(self) -> usize {
        match self {
            Region::Transmission => 0,
            Region::Reflection => 1,
        }
    }

    /// The other region (the interfering stream's index k̄).
    pub fn other(self) -> Region {
        match self {
            Region::Transmission => Region::Reflection,
            Region::Reflection => Region::Transmission,
        }
    }
}

/// True cascaded channels of one region, kept alongside the estimates when
/// the generator knows them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTruth {
    pub h: Array2<C64>,
    pub g: Array2<C64>,
    pub v: Array2<C64>,
}

/// Estimated cascaded channels and uncertainty radii of one region:
/// information receiver (`h`), energy harvester (`g`), eavesdropper (`v`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionChannels {
    pub h_hat: Array2<C64>,
    pub g_hat: Array2<C64>,
    pub v_hat: Array2<C64>,
    /// Frobenius radii for the h/g/v balls respectively.
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub truth: Option<RegionTruth>,
}

/// The complete channel state of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub t: RegionChannels,
    pub r: RegionChannels,
    /// Surface element count (matrix rows).
    pub m: usize,
    /// Satellite antenna count (matrix columns).
    pub n_t: usize,
}

impl ChannelSet {
    /// Validates shapes, radii, and (when truths are present) ball membership.
    pub fn validate(&self) -> Result<(), ChannelError> {
        for region in Region::BOTH {
            let rc = self.region(region);
            for mat in [&rc.h_hat, &rc.g_hat, &rc.v_hat] {
                let (rows, cols) = mat.dim();
                if rows != self.m || cols != self.n_t {
                    return Err(ChannelError::ShapeMismatch { m: self.m, n_t: self.n_t, rows, cols });
                }
            }
            for eps in [rc.eps1, rc.eps2, rc.eps3] {
                if eps < 0.0 || eps.is_nan() {
                    return Err(ChannelError::NegativeRadius(eps));
                }
            }
            if let Some(truth) = &rc.truth {
                for (true_mat, est, eps) in [
                    (&truth.h, &rc.h_hat, rc.eps1),
                    (&truth.g, &rc.g_hat, rc.eps2),
                    (&truth.v, &rc.v_hat, rc.eps3),
                ] {
                    let distance = frob_distance(true_mat, est);
                    // Tiny slack absorbs the rounding of the norm evaluation.
                    if distance > eps * (1.0 + 1e-9) + 1e-30 {
                        return Err(ChannelError::TruthOutsideBall { distance, eps });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn region(&self, region: Region) -> &RegionChannels {
        match region {
            Region::Transmission => &self.t,
            Region::Reflection => &self.r,
        }
    }

    pub fn to_record(&self) -> ChannelSetRecord {
        ChannelSetRecord {
            m: self.m,
            n_t: self.n_t,
            t: region_to_record(&self.t),
            r: region_to_record(&self.r),
        }
    }

    pub fn from_record(record: &ChannelSetRecord) -> Result<Self, ChannelError> {
        let set = Self {
            t: region_from_record(&record.t)?,
            r: region_from_record(&record.r)?,
            m: record.m,
            n_t: record.n_t,
        };
        set.validate()?;
        Ok(set)
    }
}

/// Serialized form of a [`ChannelSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSetRecord {
    pub m: usize,
    pub n_t: usize,
    pub t: RegionRecord,
    pub r: RegionRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionRecord {
    pub h_hat: MatrixRecord,
    pub g_hat: MatrixRecord,
    pub v_hat: MatrixRecord,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub truth: Option<[MatrixRecord; 3]>,
}

fn region_to_record(rc: &RegionChannels) -> RegionRecord {
    RegionRecord {
        h_hat: MatrixRecord::from_array(&rc.h_hat),
        g_hat: MatrixRecord::from_array(&rc.g_hat),
        v_hat: MatrixRecord::from_array(&rc.v_hat),
        eps1: rc.eps1,
        eps2: rc.eps2,
        eps3: rc.eps3,
        truth: rc.truth.as_ref().map(|t| {
            [
                MatrixRecord::from_array(&t.h),
                MatrixRecord::from_array(&t.g),
                MatrixRecord::from_array(&t.v),
            ]
        }),
    }
}

fn region_from_record(record: &RegionRecord) -> Result<RegionChannels, ChannelError> {
    Ok(RegionChannels {
        h_hat: record.h_hat.to_array()?,
        g_hat: record.g_hat.to_array()?,
        v_hat: record.v_hat.to_array()?,
        eps1: record.eps1,
        eps2: record.eps2,
        eps3: record.eps3,
        truth: match &record.truth {
            None => None,
            Some([h, g, v]) => Some(RegionTruth {
                h: h.to_array()?,
                g: g.to_array()?,
                v: v.to_array()?,
            }),
        },
    })
}

fn frob_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn frob_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One circularly-symmetric complex Gaussian draw with unit variance.
fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one Rician surface-to-terminal vector:
/// `√(χ₀/d^α)·(√(K/(K+1))·los + √(1/(K+1))·nlos)`, with `los` and `nlos`
/// i.i.d. unit-variance circularly-symmetric complex Gaussian vectors.
///
/// Both components are always drawn (in that order), so the rng stream
/// advances identically regardless of `K`; `K = ∞` weights them (1, 0).
pub fn rician_vector<R: Rng + ?Sized>(
    params: &GroundChannelParams,
    rng: &mut R,
) -> Result<Array1<C64>, ChannelError> {
    params.validate()?;
    let scale = (params.chi_0 / params.d.powf(params.alpha)).sqrt();
    let (w_los, w_nlos) = if params.k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((params.k / (params.k + 1.0)).sqrt(), (1.0 / (params.k + 1.0)).sqrt())
    };
    let mut out = Array1::zeros(params.m);
    let los: Vec<C64> = (0..params.m).map(|_| complex_gaussian(rng)).collect();
    let nlos: Vec<C64> = (0..params.m).map(|_| complex_gaussian(rng)).collect();
    for i in 0..params.m {
        out[i] = (los[i] * w_los + nlos[i] * w_nlos) * scale;
    }
    Ok(out)
}

/// Cascades a surface-to-terminal vector with the satellite-to-surface
/// matrix: `diag(h^H)·f`, i.e. row `i` of the result is `conj(h_i)` times
/// row `i` of `f`.
pub fn cascade(h: &Array1<C64>, f: &Array2<C64>) -> Result<Array2<C64>, ChannelError> {
    if h.len() != f.nrows() {
        return Err(ChannelError::DimensionMismatch { vector: h.len(), rows: f.nrows() });
    }
    let mut out = f.clone();
    for i in 0..f.nrows() {
        let c = h[i].conj();
        for j in 0..f.ncols() {
            out[[i, j]] *= c;
        }
    }
    Ok(out)
}

/// Uncertainty radius `ρ·‖estimate‖_F` of the normalized error model.
pub fn error_radius(estimate: &Array2<C64>, rho: f64) -> f64 {
    debug_assert!(rho >= 0.0, "uncertainty level must be nonnegative");
    rho * frob_norm(estimate)
}

/// Where in the uncertainty ball to place a sampled error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Uniform over the ball volume.
    Interior,
    /// Uniform over the sphere `‖ΔH‖_F = radius`.
    Boundary,
}

/// Samples a perturbation matrix from the Frobenius ball of the given radius:
/// a Gaussian draw renormalized to the sphere, and for interior mode scaled by
/// `u^{1/(2·m·n_t)}` so the norm follows the ball-volume law.
pub fn sample_error<R: Rng + ?Sized>(
    radius: f64,
    dims: (usize, usize),
    mode: ErrorMode,
    rng: &mut R,
) -> Array2<C64> {
    let (m, n_t) = dims;
    if radius <= 0.0 {
        return Array2::zeros((m, n_t));
    }
    let mut delta = Array2::zeros((m, n_t));
    for i in 0..m {
        for j in 0..n_t {
            delta[[i, j]] = complex_gaussian(rng);
        }
    }
    let norm = frob_norm(&delta).max(f64::MIN_POSITIVE);
    let target = match mode {
        ErrorMode::Boundary => radius,
        ErrorMode::Interior => {
            let u: f64 = rng.random();
            radius * u.powf(1.0 / (2.0 * (m * n_t) as f64))
        }
    };
    delta.mapv(|z| z * (target / norm))
}

/// Synthesizes the full channel state of one trial from the configuration.
///
/// Draw order (fixed for reproducibility): satellite-link phases, then per
/// region the IR vector, EHR vector, Eve distance, Eve vector, then the six
/// in-ball estimation errors. Truth is drawn first and the estimate set to
/// `truth − ΔH` with `‖ΔH‖ ≤ ρ·‖truth‖/(1+ρ)`, which guarantees
/// `‖truth − estimate‖_F ≤ ρ·‖estimate‖_F = ε`.
pub fn build_channel_set<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    let link = config.sat_link_params();
    let g_l = match config.sat_gain_mode {
        SatGainMode::Pattern => satlink::antenna_gain(&link)?,
        SatGainMode::Fixed => config.g_l_fixed,
    };
    let magnitude = satlink::sat_channel_magnitude(&link, g_l)?;
    let phase_seed: u64 = rng.random();
    let f = satlink::sat_to_surface_matrix(&link, magnitude, phase_seed)?;

    let terminal_params = |d: f64| GroundChannelParams {
        chi_0: config.chi_0,
        alpha: config.alpha,
        k: config.rician_k,
        d,
        m: config.m,
    };

    let mut regions = Vec::with_capacity(2);
    for _region in Region::BOTH {
        let h = rician_vector(&terminal_params(config.d_terminal_m), rng)?;
        let g = rician_vector(&terminal_params(config.d_terminal_m), rng)?;
        let d_eve = config.eve_d_min_m
            + rng.random::<f64>() * (config.eve_d_max_m - config.eve_d_min_m);
        let v = rician_vector(&terminal_params(d_eve), rng)?;

        let truth = RegionTruth {
            h: cascade(&h, &f)?,
            g: cascade(&g, &f)?,
            v: cascade(&v, &f)?,
        };

        let estimate_of = |true_mat: &Array2<C64>, rng: &mut R| -> (Array2<C64>, f64) {
            if config.rho == 0.0 {
                return (true_mat.clone(), 0.0);
            }
            let sample_radius = config.rho * frob_norm(true_mat) / (1.0 + config.rho);
            let delta = sample_error(
                sample_radius,
                (config.m, config.n_t),
                ErrorMode::Interior,
                rng,
            );
            let estimate = true_mat - &delta;
            let eps = error_radius(&estimate, config.rho);
            (estimate, eps)
        };

        let (h_hat, eps1) = estimate_of(&truth.h, rng);
        let (g_hat, eps2) = estimate_of(&truth.g, rng);
        let (v_hat, eps3) = estimate_of(&truth.v, rng);

        regions.push(RegionChannels { h_hat, g_hat, v_hat, eps1, eps2, eps3, truth: Some(truth) });
    }

    let r = regions.pop().expect("two regions pushed");
    let t = regions.pop().expect("two regions pushed");
    let set = ChannelSet { t, r, m: config.m, n_t: config.n_t };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_params(m: usize) -> GroundChannelParams {
        GroundChannelParams { chi_0: 1e-3, alpha: 2.2, k: 10f64.powf(0.5), d: 10.0, m }
    }

    #[test]
    fn rician_pure_los_limit() {
        // K = ∞ must reproduce the scaled LoS draw exactly; the nlos draw is
        // still consumed, so the stream position matches the finite-K path.
        let mut params = test_params(6);
        params.k = f64::INFINITY;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let v = rician_vector(&params, &mut rng).unwrap();

        let mut reference_rng = ChaCha12Rng::seed_from_u64(1);
        let scale = (params.chi_0 / params.d.powf(params.alpha)).sqrt();
        let los: Vec<C64> = (0..6).map(|_| complex_gaussian(&mut reference_rng)).collect();
        for i in 0..6 {
            assert_eq!(v[i], los[i] * scale);
        }
    }

    #[test]
    fn rician_second_moment() {
        // E[‖v‖²/m] = χ₀/d^α regardless of K (unit power in the Rician mix).
        let params = test_params(4);
        let expected = params.chi_0 / params.d.powf(params.alpha);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let v = rician_vector(&params, &mut rng).unwrap();
            acc += v.iter().map(|z| z.norm_sqr()).sum::<f64>() / params.m as f64;
        }
        let mean = acc / draws as f64;
        assert!((mean - expected).abs() <= 0.02 * expected, "mean {mean} vs {expected}");
    }

    #[test]
    fn rician_rejects_bad_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut p = test_params(4);
        p.d = 0.0;
        assert!(matches!(
            rician_vector(&p, &mut rng),
            Err(ChannelError::NonPositiveDistance(_))
        ));
        let mut p = test_params(4);
        p.k = -1.0;
        assert!(matches!(
            rician_vector(&p, &mut rng),
            Err(ChannelError::NegativeRicianFactor(_))
        ));
    }

    #[test]
    fn cascade_identity_and_basis_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let f = Array2::from_shape_fn((3, 2), |_| complex_gaussian(&mut rng));

        let ones = Array1::from_elem(3, C64::new(1.0, 0.0));
        let out = cascade(&ones, &f).unwrap();
        assert!(out.iter().zip(f.iter()).all(|(a, b)| a == b));

        let mut e1 = Array1::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let out = cascade(&e1, &f).unwrap();
        for j in 0..2 {
            assert_eq!(out[[0, j]], f[[0, j]]);
            assert_eq!(out[[1, j]], C64::new(0.0, 0.0));
            assert_eq!(out[[2, j]], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn cascade_elementwise_formula() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let h = Array1::from_shape_fn(3, |_| complex_gaussian(&mut rng));
        let f = Array2::from_shape_fn((3, 2), |_| complex_gaussian(&mut rng));
        let out = cascade(&h, &f).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(out[[i, j]], h[i].conj() * f[[i, j]]);
            }
        }
    }

    #[test]
    fn cascade_dimension_mismatch() {
        let h = Array1::zeros(4);
        let f = Array2::zeros((3, 2));
        assert!(matches!(
            cascade(&h, &f),
            Err(ChannelError::DimensionMismatch { vector: 4, rows: 3 })
        ));
    }

    #[test]
    fn error_radius_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let est = Array2::from_shape_fn((3, 2), |_| complex_gaussian(&mut rng));
        assert_eq!(error_radius(&est, 0.0), 0.0);
        let r1 = error_radius(&est, 0.05);
        assert_relative_eq!(r1, 0.05 * frob_norm(&est), max_relative = 1e-14);
        let doubled = est.mapv(|z| z * 2.0);
        assert_relative_eq!(error_radius(&doubled, 0.05), 2.0 * r1, max_relative = 1e-12);
    }

    #[test]
    fn sample_error_zero_radius() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let delta = sample_error(0.0, (4, 3), ErrorMode::Boundary, &mut rng);
        assert!(delta.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sample_error_boundary_norm_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..100 {
            let delta = sample_error(0.37, (4, 3), ErrorMode::Boundary, &mut rng);
            assert_relative_eq!(frob_norm(&delta), 0.37, max_relative = 1e-12);
        }
    }

    #[test]
    fn sample_error_interior_matches_ball_volume_law() {
        // Kolmogorov distance between the empirical norm CDF and the ball
        // law F(r) = (r/R)^{2mn} over 10⁴ draws.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let radius = 1.3;
        let (m, n) = (2, 2);
        let draws = 10_000;
        let mut norms: Vec<f64> = (0..draws)
            .map(|_| frob_norm(&sample_error(radius, (m, n), ErrorMode::Interior, &mut rng)))
            .collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(*norms.last().unwrap() <= radius * (1.0 + 1e-12));
        let exponent = 2.0 * (m * n) as f64;
        let mut ks: f64 = 0.0;
        for (i, &r) in norms.iter().enumerate() {
            let model = (r / radius).powf(exponent);
            let hi = (i + 1) as f64 / draws as f64;
            let lo = i as f64 / draws as f64;
            ks = ks.max((model - lo).abs()).max((hi - model).abs());
        }
        assert!(ks <= 0.02, "Kolmogorov distance {ks}");
    }

    #[test]
    fn build_channel_set_zero_uncertainty() {
        let mut config = SystemConfig::default();
        config.rho = 0.0;
        config.m = 4;
        config.n_t = 2;
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let set = build_channel_set(&config, &mut rng).unwrap();
        for region in Region::BOTH {
            let rc = set.region(region);
            let truth = rc.truth.as_ref().unwrap();
            assert!(rc.h_hat.iter().zip(truth.h.iter()).all(|(a, b)| a == b));
            assert!(rc.g_hat.iter().zip(truth.g.iter()).all(|(a, b)| a == b));
            assert!(rc.v_hat.iter().zip(truth.v.iter()).all(|(a, b)| a == b));
            assert_eq!(rc.eps1, 0.0);
            assert_eq!(rc.eps2, 0.0);
            assert_eq!(rc.eps3, 0.0);
        }
    }

    #[test]
    fn build_channel_set_truth_within_ball() {
        let mut config = SystemConfig::default();
        config.rho = 0.05;
        config.m = 6;
        config.n_t = 3;
        for seed in 0..20 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let set = build_channel_set(&config, &mut rng).unwrap();
            set.validate().unwrap();
            for region in Region::BOTH {
                let rc = set.region(region);
                let truth = rc.truth.as_ref().unwrap();
                assert!(frob_distance(&truth.h, &rc.h_hat) <= rc.eps1 * (1.0 + 1e-12));
                assert!(frob_distance(&truth.g, &rc.g_hat) <= rc.eps2 * (1.0 + 1e-12));
                assert!(frob_distance(&truth.v, &rc.v_hat) <= rc.eps3 * (1.0 + 1e-12));
                assert_relative_eq!(
                    rc.eps1,
                    config.rho * frob_norm(&rc.h_hat),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn build_channel_set_deterministic() {
        let mut config = SystemConfig::default();
        config.m = 5;
        config.n_t = 2;
        let a = build_channel_set(&config, &mut ChaCha12Rng::seed_from_u64(11)).unwrap();
        let b = build_channel_set(&config, &mut ChaCha12Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let c = build_channel_set(&config, &mut ChaCha12Rng::seed_from_u64(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn channel_set_record_roundtrip() {
        let mut config = SystemConfig::default();
        config.m = 4;
        config.n_t = 2;
        let set = build_channel_set(&config, &mut ChaCha12Rng::seed_from_u64(13)).unwrap();
        let json = serde_json::to_string(&set.to_record()).unwrap();
        let decoded: ChannelSetRecord = serde_json::from_str(&json).unwrap();
        let back = ChannelSet::from_record(&decoded).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn validate_rejects_truth_outside_ball() {
        let mut config = SystemConfig::default();
        config.m = 4;
        config.n_t = 2;
        let mut set = build_channel_set(&config, &mut ChaCha12Rng::seed_from_u64(14)).unwrap();
        set.t.eps1 = 0.0; // shrink the ball under the recorded truth
        assert!(matches!(set.validate(), Err(ChannelError::TruthOutsideBall { .. })));
    }

    proptest! {
        #[test]
        fn cascade_norm_bounded_by_peak_gain(seed in 0u64..500) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let h = Array1::from_shape_fn(5, |_| complex_gaussian(&mut rng));
            let f = Array2::from_shape_fn((5, 3), |_| complex_gaussian(&mut rng));
            let out = cascade(&h, &f).unwrap();
            let peak = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(frob_norm(&out) <= peak * frob_norm(&f) * (1.0 + 1e-12));
        }

        #[test]
        fn sample_error_never_leaves_ball(seed in 0u64..200, radius in 0.0f64..5.0) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let delta = sample_error(radius, (3, 2), ErrorMode::Interior, &mut rng);
            prop_assert!(frob_norm(&delta) <= radius * (1.0 + 1e-12));
        }
    }
}
