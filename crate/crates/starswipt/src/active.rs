//! Beam-side subproblem: semidefinite relaxation over the per-stream beam
//! Grams with the surface fixed, post-hoc rank certification, and
//! beamformer recovery.
//!
//! Dropping the rank-one requirements on `W_k = w_k w_k^H` turns the beam
//! design into a semidefinite program over the two Grams, the harvest
//! target ξ, and the ball multipliers. At the optimum the relaxation is
//! provably tight whenever the rate and leakage thresholds are strictly
//! positive, so the returned Grams are expected — but never assumed — to be
//! rank-one: every solve reports the subdominant eigenvalue ratio, and when
//! certification fails the beamformers fall back to Gaussian randomization
//! filtered through a feasibility judge.

use ndarray::{Array1, Array2};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::channel::{sample_error, ChannelSet, ErrorMode, Region};
use crate::conic::{ConicError, LinExpr, MatVarRef, ScalVarRef, SdpProblem, SdpStatus};
use crate::expcli::config::{ObjectiveMode, SystemConfig};
use crate::numerics::{
    dominant_eig, eig_hermitian, subdominant_ratio, C64, HermitianMatrix, NumericsError,
};
use crate::passive::StarGram;
use crate::robustify::{
    eh_power_lmi, eh_power_sum_lmi, eve_leakage_lmi, ir_rate_lmi, perturbed_slack, MatArg,
    RobustConstraintSpec, RobustError, ScalArg,
};

/// Errors from beam-side assembly and extraction.
#[derive(Debug, Error)]
pub enum ActiveError {
    #[error("invalid beam gram: {detail}")]
    InvalidGram { detail: String },
    #[error("invalid input: {detail}")]
    InvalidInput { detail: String },
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Beam state: one Gram and (after extraction) one beamformer per stream,
/// stored in [transmission, reflection] order.
#[derive(Debug, Clone)]
pub struct BeamformerGram {
    /// Beam Grams `W_k`, ideally rank-one `w_k w_k^H`.
    pub w: [HermitianMatrix; 2],
    /// Extracted beamformers `w_k` (absent until extraction).
    pub vecs: [Option<Array1<C64>>; 2],
}

impl BeamformerGram {
    /// Wraps solved Grams; no extraction is implied.
    pub fn from_grams(w: [HermitianMatrix; 2]) -> Self {
        Self { w, vecs: [None, None] }
    }

    /// Rank-one state built from explicit beamformers.
    pub fn from_vectors(vecs: [Array1<C64>; 2]) -> Self {
        Self {
            w: [HermitianMatrix::outer(&vecs[0]), HermitianMatrix::outer(&vecs[1])],
            vecs: [Some(vecs[0].clone()), Some(vecs[1].clone())],
        }
    }

    pub fn dim(&self) -> usize {
        self.w[0].dim()
    }

    pub fn gram(&self, region: Region) -> &HermitianMatrix {
        &self.w[region.index()]
    }

    pub fn beamformer(&self, region: Region) -> Option<&Array1<C64>> {
        self.vecs[region.index()].as_ref()
    }

    /// Transmit power `Tr(W_k)` of one stream, in Watts.
    pub fn power(&self, region: Region) -> f64 {
        self.w[region.index()].trace()
    }

    /// Total transmit power `Σ_k Tr(W_k)`, in Watts.
    pub fn total_power(&self) -> f64 {
        self.power(Region::Transmission) + self.power(Region::Reflection)
    }

    /// Checks the Gram invariants: `W_k ⪰ 0`, the power budget, and — when
    /// beamformers are present — `‖w_k‖² = Tr(W_k)` within the rank-one
    /// tolerance.
    pub fn validate(&self, p_max: f64) -> Result<(), ActiveError> {
        let fail = |detail: String| Err(ActiveError::InvalidGram { detail });
        for region in Region::BOTH {
            let k = region.index();
            let w = &self.w[k];
            let label = region.label();
            let (vals, _) = eig_hermitian(w);
            if vals[0] < -1e-9 {
                return fail(format!("W_{label} has negative eigenvalue {:.3e}", vals[0]));
            }
            if let Some(vec) = &self.vecs[k] {
                if vec.len() != w.dim() {
                    return fail(format!("stream {label}: beamformer length {}", vec.len()));
                }
                let power = w.trace();
                let norm_sqr = vec.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if (norm_sqr - power).abs() > 1e-5 * power.max(1.0) {
                    return fail(format!(
                        "stream {label}: beamformer power {norm_sqr:.9} vs trace {power:.9}"
                    ));
                }
            }
        }
        let total = self.total_power();
        if total > p_max + 1e-8 {
            return fail(format!("total power {total:.9} exceeds budget {p_max:.9}"));
        }
        Ok(())
    }
}

/// `λ₂/λ₁` threshold under which a Gram is accepted as numerically rank-one.
pub const RANK_ONE_RATIO: f64 = 1e-6;

/// Rank certificate of one beam Gram, logged per solve to track how tight
/// the relaxation actually is.
#[derive(Debug, Clone, Copy)]
pub struct RankCertificate {
    /// Subdominant eigenvalue ratio `λ₂/λ₁` (infinite when `λ₁ ≤ 0`).
    pub ratio: f64,
    /// Whether the ratio is within [`RANK_ONE_RATIO`].
    pub is_rank_one: bool,
}

/// Measures how far a Gram is from rank one by its eigenvalue ratio.
pub fn certify_rank_one(w: &HermitianMatrix) -> RankCertificate {
    let ratio = subdominant_ratio(w);
    RankCertificate { ratio, is_rank_one: ratio <= RANK_ONE_RATIO }
}

/// A built beam program with handles to its decision variables.
pub struct ActiveSdp {
    pub problem: SdpProblem,
    /// Beam Gram variables in [transmission, reflection] order.
    pub w_vars: [MatVarRef; 2],
    /// Harvest target ξ.
    pub xi: ScalVarRef,
}

/// Builds the beam program at a fixed surface: maximize ξ over
/// `W_t, W_r ⪰ 0` subject to the worst-case rate/harvest/leakage
/// constraints (beam side symbolic) and the total power budget.
pub fn build_active_sdp(
    channels: &ChannelSet,
    q_fixed: &StarGram,
    config: &SystemConfig,
) -> Result<ActiveSdp, ActiveError> {
    for region in Region::BOTH {
        if q_fixed.dim(region) != channels.m {
            return Err(ActiveError::InvalidInput {
                detail: format!(
                    "surface gram of region {} has dimension {}, channels have {} elements",
                    region.label(),
                    q_fixed.dim(region),
                    channels.m
                ),
            });
        }
    }

    let mut problem = SdpProblem::new();
    let w_vars =
        [problem.add_mat_var("w_t", channels.n_t), problem.add_mat_var("w_r", channels.n_t)];
    for &var in &w_vars {
        problem.require_psd(var)?;
    }
    let xi = problem.add_scal_var("xi");

    let mut eh_specs = Vec::with_capacity(2);
    for region in Region::BOTH {
        let rc = channels.region(region);
        let w_k = MatArg::Var(w_vars[region.index()]);
        let w_other = MatArg::Var(w_vars[region.other().index()]);
        let q_k = MatArg::Fixed(q_fixed.gram(region));
        let ir = RobustConstraintSpec::ir_rate(
            region,
            rc.h_hat.clone(),
            rc.eps1,
            config.gamma_ir(),
            config.noise_w,
        )?;
        ir_rate_lmi(&mut problem, &ir, w_k, w_other, q_k)?;
        if config.secrecy {
            let eve = RobustConstraintSpec::eve_leakage(
                region,
                rc.v_hat.clone(),
                rc.eps3,
                config.eta_eve(),
                config.noise_eve_w,
            )?;
            eve_leakage_lmi(&mut problem, &eve, w_k, w_other, q_k)?;
        }
        eh_specs.push(RobustConstraintSpec::eh_power(region, rc.g_hat.clone(), rc.eps2)?);
    }
    match config.objective_mode {
        ObjectiveMode::Min => {
            for region in Region::BOTH {
                let k = region.index();
                eh_power_lmi(
                    &mut problem,
                    &eh_specs[k],
                    MatArg::Var(w_vars[k]),
                    MatArg::Var(w_vars[region.other().index()]),
                    MatArg::Fixed(q_fixed.gram(region)),
                    ScalArg::Var(xi),
                )?;
            }
        }
        ObjectiveMode::Sum => {
            eh_power_sum_lmi(
                &mut problem,
                [&eh_specs[0], &eh_specs[1]],
                [
                    MatArg::Fixed(q_fixed.gram(Region::Transmission)),
                    MatArg::Fixed(q_fixed.gram(Region::Reflection)),
                ],
                MatArg::Var(w_vars[0]),
                MatArg::Var(w_vars[1]),
                ScalArg::Var(xi),
            )?;
        }
    }

    let power = LinExpr::default()
        .plus_mat(w_vars[0], HermitianMatrix::eye(channels.n_t))
        .plus_mat(w_vars[1], HermitianMatrix::eye(channels.n_t));
    problem.add_scalar_ineq(power, config.p_max_w)?;
    problem.set_objective(LinExpr::scal(xi));

    Ok(ActiveSdp { problem, w_vars, xi })
}

/// Outcome of one beam-side solve.
#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    /// Solved Grams; beamformers not yet extracted.
    pub grams: BeamformerGram,
    /// Harvest target at the optimum.
    pub xi: f64,
    pub status: SdpStatus,
    /// Rank certificates of the solved Grams.
    pub certificates: [RankCertificate; 2],
    /// Power-budget slack `P_max − Σ_k Tr(W_k)` at the returned point.
    pub budget_slack: f64,
    /// Smallest eigenvalue across the worst-case LMI blocks at the returned
    /// point.
    pub min_lmi_margin: f64,
}

impl ActiveOutcome {
    /// Complementary power usage at an optimum: either the budget is
    /// exhausted (to `1e-6·P_max`) or every worst-case block holds strictly.
    /// A violation flags solver trouble.
    pub fn power_complementary(&self, p_max: f64) -> bool {
        self.budget_slack.abs() <= 1e-6 * p_max.max(1.0) || self.min_lmi_margin > 0.0
    }
}

/// Builds and solves the beam program, wrapping the solution with the rank
/// and complementarity diagnostics logged by the alternating loop.
pub fn solve_active(
    channels: &ChannelSet,
    q_fixed: &StarGram,
    config: &SystemConfig,
) -> Result<ActiveOutcome, ActiveError> {
    let built = build_active_sdp(channels, q_fixed, config)?;
    let solution = built.problem.solve(&config.solve_options())?;
    let grams = BeamformerGram::from_grams([
        solution.mat(built.w_vars[0]).clone(),
        solution.mat(built.w_vars[1]).clone(),
    ]);
    let certificates =
        [certify_rank_one(&grams.w[0]), certify_rank_one(&grams.w[1])];
    let margins = built.problem.lmi_margins(solution.assignment());
    Ok(ActiveOutcome {
        budget_slack: config.p_max_w - grams.total_power(),
        min_lmi_margin: margins.into_iter().fold(f64::INFINITY, f64::min),
        xi: solution.scal(built.xi),
        status: solution.status,
        grams,
        certificates,
    })
}

/// One recovered beamformer pair plus the recovery diagnostics.
#[derive(Debug, Clone)]
pub struct Extraction {
    /// Beamformers in [transmission, reflection] order.
    pub vecs: [Array1<C64>; 2],
    pub certificates: [RankCertificate; 2],
    /// Randomized candidate pairs drawn (zero when both Grams certified).
    pub candidates: usize,
    /// Set when certification failed and no candidate passed the judge; the
    /// spectral fallback is returned regardless.
    pub degraded: bool,
}

/// Recovers beamformers from solved Grams. Certified rank-one Grams yield
/// the `√λ_max`-scaled dominant eigenvector directly. Otherwise up to
/// `n_candidates` Gaussian pairs are drawn with the Grams as covariances,
/// rescaled to preserve the per-stream power, and judged: the judge returns
/// the candidate's validated objective, or `None` when it breaks a
/// constraint. The best-scoring feasible pair wins; if none pass, the
/// spectral vectors are returned with the outcome marked degraded.
pub fn extract_beamformer<F>(
    grams: &[HermitianMatrix; 2],
    n_candidates: usize,
    judge: F,
    rng: &mut impl Rng,
) -> Result<Extraction, ActiveError>
where
    F: Fn(&[Array1<C64>; 2]) -> Option<f64>,
{
    if grams[0].dim() != grams[1].dim() {
        return Err(ActiveError::InvalidInput {
            detail: format!(
                "stream grams have dimensions {} and {}",
                grams[0].dim(),
                grams[1].dim()
            ),
        });
    }
    let certificates = [certify_rank_one(&grams[0]), certify_rank_one(&grams[1])];
    let spectral = [spectral_vector(&grams[0]), spectral_vector(&grams[1])];
    if certificates.iter().all(|c| c.is_rank_one) {
        return Ok(Extraction { vecs: spectral, certificates, candidates: 0, degraded: false });
    }

    let roots = [sqrt_factor(&grams[0]), sqrt_factor(&grams[1])];
    let mut best: Option<(f64, [Array1<C64>; 2])> = None;
    for _ in 0..n_candidates {
        let pair = [0, 1].map(|k| {
            if certificates[k].is_rank_one {
                spectral[k].clone()
            } else {
                random_candidate(&roots[k], grams[k].trace(), rng)
            }
        });
        if let Some(score) = judge(&pair) {
            if best.as_ref().is_none_or(|(incumbent, _)| score > *incumbent) {
                best = Some((score, pair));
            }
        }
    }
    match best {
        Some((_, vecs)) => {
            Ok(Extraction { vecs, certificates, candidates: n_candidates, degraded: false })
        }
        None => Ok(Extraction {
            vecs: spectral,
            certificates,
            candidates: n_candidates,
            degraded: true,
        }),
    }
}

/// `√λ_max`-scaled dominant eigenvector (canonical phase).
fn spectral_vector(w: &HermitianMatrix) -> Array1<C64> {
    let (lambda, u) = dominant_eig(w);
    let scale = lambda.max(0.0).sqrt();
    u.mapv(|z| z * scale)
}

/// A factor `F` with `F F^H = W` (eigenvectors scaled by `√λ⁺`).
fn sqrt_factor(w: &HermitianMatrix) -> Array2<C64> {
    let (vals, vecs) = eig_hermitian(w);
    let mut f = vecs;
    for (j, &v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        f.column_mut(j).mapv_inplace(|z| z * s);
    }
    f
}

/// One Gaussian candidate with covariance `F F^H`, rescaled to the exact
/// stream power.
fn random_candidate(root: &Array2<C64>, power: f64, rng: &mut impl Rng) -> Array1<C64> {
    let n = root.nrows();
    let z: Array1<C64> =
        (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let raw = root.dot(&z);
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let target = power.max(0.0).sqrt();
    if norm > 1e-30 {
        raw.mapv(|z| z / norm * target)
    } else {
        let mut fallback = Array1::zeros(n);
        fallback[0] = C64::new(target, 0.0);
        fallback
    }
}

/// Builds a deterministic feasibility judge for beam candidates: a fixed
/// validation set of ball perturbations (boundary-heavy, one in ten
/// interior, plus the estimate itself) is drawn up front per constraint
/// family, and a pair passes when the power budget and every sampled slack
/// hold. The score is the sampled worst-case harvest objective. Sampling
/// makes the check necessary rather than sufficient — a certified
/// worst-case validation needs the full ball, which only the conic
/// machinery quantifies.
pub fn robust_judge<R: Rng>(
    channels: &ChannelSet,
    q_fixed: &StarGram,
    config: &SystemConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<impl Fn(&[Array1<C64>; 2]) -> Option<f64> + use<R>, ActiveError> {
    struct Family {
        spec: RobustConstraintSpec,
        gram: HermitianMatrix,
        slot: usize,
        deltas: Vec<Option<Array2<C64>>>,
    }
    let dims = (channels.m, channels.n_t);
    let mut draw = |radius: f64| -> Vec<Option<Array2<C64>>> {
        let mut deltas = vec![None];
        for i in 0..n_samples {
            let mode = if i % 10 == 9 { ErrorMode::Interior } else { ErrorMode::Boundary };
            deltas.push(Some(sample_error(radius, dims, mode, rng)));
        }
        deltas
    };

    let mut hard = Vec::new();
    let mut harvest = Vec::new();
    for region in Region::BOTH {
        let rc = channels.region(region);
        let k = region.index();
        let gram = q_fixed.gram(region).clone();
        let ir = RobustConstraintSpec::ir_rate(
            region,
            rc.h_hat.clone(),
            rc.eps1,
            config.gamma_ir(),
            config.noise_w,
        )?;
        hard.push(Family { deltas: draw(rc.eps1), spec: ir, gram: gram.clone(), slot: k });
        if config.secrecy {
            let eve = RobustConstraintSpec::eve_leakage(
                region,
                rc.v_hat.clone(),
                rc.eps3,
                config.eta_eve(),
                config.noise_eve_w,
            )?;
            hard.push(Family {
                deltas: draw(rc.eps3),
                spec: eve,
                gram: gram.clone(),
                slot: k,
            });
        }
        let eh = RobustConstraintSpec::eh_power(region, rc.g_hat.clone(), rc.eps2)?;
        harvest.push(Family { deltas: draw(rc.eps2), spec: eh, gram, slot: k });
    }

    let p_max = config.p_max_w;
    let mode = config.objective_mode;
    Ok(move |vecs: &[Array1<C64>; 2]| -> Option<f64> {
        let total: f64 = vecs.iter().flat_map(|v| v.iter()).map(|z| z.norm_sqr()).sum();
        if total > p_max + 1e-8 {
            return None;
        }
        let w = [HermitianMatrix::outer(&vecs[0]), HermitianMatrix::outer(&vecs[1])];
        let worst = |family: &Family| -> f64 {
            family
                .deltas
                .iter()
                .map(|delta| {
                    perturbed_slack(
                        &family.spec,
                        delta.as_ref(),
                        &w[family.slot],
                        &w[1 - family.slot],
                        &family.gram,
                        0.0,
                    )
                })
                .fold(f64::INFINITY, f64::min)
        };
        for family in &hard {
            if worst(family) < 0.0 {
                return None;
            }
        }
        // The harvest balls are independent across regions, so the
        // worst-case sum separates into per-region minima.
        let per_region = [worst(&harvest[0]), worst(&harvest[1])];
        Some(match mode {
            ObjectiveMode::Min => per_region[0].min(per_region[1]),
            ObjectiveMode::Sum => per_region[0] + per_region[1],
        })
    })
}
