//! Surface-side subproblem: penalty-driven successive convex approximation
//! over the transmission/reflection surface Grams.
//!
//! With the beam Grams fixed, the surface design maximizes the harvest
//! target ξ subject to the worst-case link constraints, the element
//! amplitude couplings, and `Q_k ⪰ 0` — a semidefinite program except for
//! the implicit rank-one requirement on each Gram. That requirement is
//! driven to hold by penalizing the rank-one defect `Σ_k (‖Q_k‖_* − ‖Q_k‖₂)`:
//! the concave spectral-norm term is replaced by its supporting hyperplane
//! at the previous iterate (keeping the program convex), the penalized
//! program is re-solved until its objective settles (inner loop), and the
//! penalty weight is grown geometrically (outer loop) until the defect is
//! numerically zero.

use ndarray::{Array1, Array2};
use rand::{Rng, RngExt};
use thiserror::Error;

use crate::channel::{ChannelSet, Region};
use crate::conic::{ConicError, LinExpr, MatVarRef, ScalVarRef, SdpProblem, SdpStatus};
use crate::expcli::config::{ObjectiveMode, SystemConfig};
use crate::numerics::{
    dagger, dominant_eig, eig_hermitian, rank_one_defect, C64, HermitianMatrix, NumericsError,
};
use crate::robustify::{
    eh_power_lmi, eh_power_sum_lmi, eve_leakage_lmi, ir_rate_lmi, MatArg, RobustConstraintSpec,
    RobustError, ScalArg,
};

/// Errors from surface-side assembly and extraction.
#[derive(Debug, Error)]
pub enum PassiveError {
    #[error("invalid surface gram: {detail}")]
    InvalidGram { detail: String },
    #[error("invalid input: {detail}")]
    InvalidInput { detail: String },
    #[error("surface gram is not rank-one: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotRankOne { defect: f64, tol: f64 },
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How the element amplitudes of the two regions are tied together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeRule {
    /// Energy splitting: every element divides its power freely between the
    /// regions, `β_t[i] + β_r[i] = 1`.
    PerElement,
    /// Uniform energy splitting: all elements of a region carry one shared
    /// amplitude level, and the two levels sum to one.
    SharedScalar,
    /// Conventional-surface baseline: the two Grams describe disjoint
    /// sub-surfaces whose live elements pass full power, `β_k[i] = 1`.
    FullAmplitude,
}

fn slot(region: Region) -> usize {
    region.index()
}

/// Surface state: one Gram, one amplitude vector, and (after extraction) one
/// coefficient vector per region, stored in [transmission, reflection] order.
#[derive(Debug, Clone)]
pub struct StarGram {
    /// Surface Grams `Q_k`, ideally rank-one `Φ_k Φ_k^H`.
    pub q: [HermitianMatrix; 2],
    /// Element amplitudes `β_k = diag(Q_k)`.
    pub beta: [Vec<f64>; 2],
    /// Extracted coefficient vectors `Φ_k` (absent until extraction).
    pub phi: [Option<Array1<C64>>; 2],
}

impl StarGram {
    /// Energy-splitting start: every element splits evenly (`β = 0.5`) with
    /// an independent uniform random phase per element and region, so each
    /// Gram is rank-one by construction.
    pub fn uniform_split(m: usize, rng: &mut impl Rng) -> Self {
        Self::from_phases([m, m], [0.5, 0.5], rng)
    }

    /// Full-amplitude start for disjoint sub-surfaces: every live element
    /// passes full power (`β = 1`), phases uniform random.
    pub fn full_on(dims: [usize; 2], rng: &mut impl Rng) -> Self {
        Self::from_phases(dims, [1.0, 1.0], rng)
    }

    fn from_phases(dims: [usize; 2], levels: [f64; 2], rng: &mut impl Rng) -> Self {
        let mut draw = |dim: usize, level: f64| {
            let amp = level.sqrt();
            let phi: Array1<C64> = (0..dim)
                .map(|_| C64::from_polar(amp, rng.random::<f64>() * std::f64::consts::TAU))
                .collect();
            (HermitianMatrix::outer(&phi), vec![level; dim], Some(phi))
        };
        let (q_t, beta_t, phi_t) = draw(dims[0], levels[0]);
        let (q_r, beta_r, phi_r) = draw(dims[1], levels[1]);
        Self { q: [q_t, q_r], beta: [beta_t, beta_r], phi: [phi_t, phi_r] }
    }

    /// Wraps solved Grams, reading the amplitudes off the diagonals. No
    /// extraction is implied.
    pub fn from_grams(q: [HermitianMatrix; 2]) -> Self {
        let diag = |m: &HermitianMatrix| (0..m.dim()).map(|i| m.as_array()[[i, i]].re).collect();
        let beta = [diag(&q[0]), diag(&q[1])];
        Self { q, beta, phi: [None, None] }
    }

    pub fn dim(&self, region: Region) -> usize {
        self.q[slot(region)].dim()
    }

    pub fn gram(&self, region: Region) -> &HermitianMatrix {
        &self.q[slot(region)]
    }

    pub fn amplitudes(&self, region: Region) -> &[f64] {
        &self.beta[slot(region)]
    }

    pub fn coefficients(&self, region: Region) -> Option<&Array1<C64>> {
        self.phi[slot(region)].as_ref()
    }

    /// Checks the Gram invariants under the given coupling rule: `Q_k ⪰ 0`,
    /// `diag(Q_k) = β_k`, `β ∈ [0, 1]`, the rule's coupling, and — when
    /// coefficients are present — `|Φ_k[i]|² = β_k[i]`.
    pub fn validate(&self, rule: AmplitudeRule) -> Result<(), PassiveError> {
        const TOL: f64 = 1e-8;
        let fail = |detail: String| Err(PassiveError::InvalidGram { detail });
        for region in Region::BOTH {
            let k = slot(region);
            let q = &self.q[k];
            let beta = &self.beta[k];
            let label = region.label();
            if beta.len() != q.dim() {
                return fail(format!(
                    "region {label}: {} amplitudes for a {}-element gram",
                    beta.len(),
                    q.dim()
                ));
            }
            let (vals, _) = eig_hermitian(q);
            if vals[0] < -1e-9 {
                return fail(format!("Q_{label} has negative eigenvalue {:.3e}", vals[0]));
            }
            for i in 0..q.dim() {
                let d = q.as_array()[[i, i]].re;
                if (d - beta[i]).abs() > TOL {
                    return fail(format!(
                        "region {label} element {i}: diagonal {d:.9} vs amplitude {:.9}",
                        beta[i]
                    ));
                }
                if !(-TOL..=1.0 + TOL).contains(&beta[i]) {
                    return fail(format!(
                        "region {label} element {i}: amplitude {:.9} outside [0, 1]",
                        beta[i]
                    ));
                }
            }
            if let Some(phi) = &self.phi[k] {
                if phi.len() != beta.len() {
                    return fail(format!("region {label}: coefficient length {}", phi.len()));
                }
                for i in 0..phi.len() {
                    if (phi[i].norm_sqr() - beta[i]).abs() > TOL {
                        return fail(format!(
                            "region {label} element {i}: |Φ|² = {:.9} vs amplitude {:.9}",
                            phi[i].norm_sqr(),
                            beta[i]
                        ));
                    }
                }
            }
        }
        match rule {
            AmplitudeRule::PerElement | AmplitudeRule::SharedScalar => {
                if self.beta[0].len() != self.beta[1].len() {
                    return fail("coupled regions need equal element counts".to_string());
                }
                for i in 0..self.beta[0].len() {
                    let sum = self.beta[0][i] + self.beta[1][i];
                    if (sum - 1.0).abs() > TOL {
                        return fail(format!("element {i}: amplitude split sums to {sum:.9}"));
                    }
                }
                if rule == AmplitudeRule::SharedScalar {
                    for k in 0..2 {
                        let first = self.beta[k][0];
                        if self.beta[k].iter().any(|&b| (b - first).abs() > TOL) {
                            return fail("shared-level rule with unequal amplitudes".to_string());
                        }
                    }
                }
            }
            AmplitudeRule::FullAmplitude => {
                for k in 0..2 {
                    if self.beta[k].iter().any(|&b| (b - 1.0).abs() > TOL) {
                        return fail("full-amplitude rule with a partial element".to_string());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Total rank-one defect `Σ_k (‖Q_k‖_* − ‖Q_k‖₂)`; nonnegative for PSD Grams
/// and zero exactly when both are rank-one.
pub fn total_defect(star: &StarGram) -> Result<f64, PassiveError> {
    let mut acc = 0.0;
    for q in &star.q {
        acc += rank_one_defect(q)?;
    }
    Ok(acc)
}

/// Supporting hyperplane of the spectral norm at the PSD expansion point
/// `q_prev`: the affine expression `‖Q_prev‖₂ + Tr(u u^H (Q − Q_prev))` in
/// the Gram variable, with `u` the dominant eigenvector. It never exceeds
/// `‖Q‖₂` and touches it at `Q = Q_prev`.
pub fn spectral_linearization(q: MatVarRef, q_prev: &HermitianMatrix) -> LinExpr {
    let (lambda_max, u) = dominant_eig(q_prev);
    let uu = HermitianMatrix::outer(&u);
    LinExpr::constant(lambda_max - uu.inner(q_prev)).plus_mat(q, uu)
}

/// Numeric cascade quadratic `Tr(S · Ĥ^H Q Ĥ)` through the surface.
pub(crate) fn cascaded_quad(
    estimate: &Array2<C64>,
    q: &HermitianMatrix,
    s: &HermitianMatrix,
) -> f64 {
    let mid = dagger(estimate).dot(q.as_array()).dot(estimate);
    HermitianMatrix::symmetrize(mid).inner(s)
}

/// Nominal value of the harvest objective (min or sum of the per-region
/// received powers over both streams) at a fixed design point.
fn nominal_objective(
    channels: &ChannelSet,
    w_fixed: &[HermitianMatrix; 2],
    star: &StarGram,
    mode: ObjectiveMode,
) -> f64 {
    let sum_w = w_fixed[0].scaled_add(1.0, &w_fixed[1], 1.0);
    let per = Region::BOTH
        .map(|region| cascaded_quad(&channels.region(region).g_hat, star.gram(region), &sum_w));
    match mode {
        ObjectiveMode::Min => per[0].min(per[1]),
        ObjectiveMode::Sum => per[0] + per[1],
    }
}

/// A built surface program with handles to its decision variables.
pub struct PassiveSdp {
    pub problem: SdpProblem,
    /// Gram variables in [transmission, reflection] order.
    pub q_vars: [MatVarRef; 2],
    /// Harvest target ξ.
    pub xi: ScalVarRef,
    /// Shared amplitude levels (uniform-splitting rule only).
    pub split_vars: Option<[ScalVarRef; 2]>,
}

/// Builds the penalized surface program at one linearization point:
/// maximize `ξ − γ Σ_k (Tr(Q_k) − lin_k(Q_k))` over `Q_t, Q_r ⪰ 0` subject
/// to the worst-case rate/harvest/leakage constraints (surface side
/// symbolic) and the amplitude couplings of `rule`.
pub fn build_passive_sdp(
    channels: &ChannelSet,
    w_fixed: &[HermitianMatrix; 2],
    q_prev: &StarGram,
    gamma: f64,
    rule: AmplitudeRule,
    config: &SystemConfig,
) -> Result<PassiveSdp, PassiveError> {
    if !(gamma > 0.0) {
        return Err(PassiveError::InvalidInput {
            detail: format!("penalty weight must be positive, got {gamma}"),
        });
    }
    for region in Region::BOTH {
        if q_prev.dim(region) != channels.m {
            return Err(PassiveError::InvalidInput {
                detail: format!(
                    "previous gram of region {} has dimension {}, channels have {} elements",
                    region.label(),
                    q_prev.dim(region),
                    channels.m
                ),
            });
        }
        if w_fixed[slot(region)].dim() != channels.n_t {
            return Err(PassiveError::InvalidInput {
                detail: format!(
                    "beam gram of region {} has dimension {}, channels have {} antennas",
                    region.label(),
                    w_fixed[slot(region)].dim(),
                    channels.n_t
                ),
            });
        }
    }

    let mut problem = SdpProblem::new();
    let q_vars = [problem.add_mat_var("q_t", channels.m), problem.add_mat_var("q_r", channels.m)];
    for &var in &q_vars {
        problem.require_psd(var)?;
    }
    let xi = problem.add_scal_var("xi");

    let mut eh_specs = Vec::with_capacity(2);
    for region in Region::BOTH {
        let rc = channels.region(region);
        let w_k = MatArg::Fixed(&w_fixed[slot(region)]);
        let w_other = MatArg::Fixed(&w_fixed[slot(region.other())]);
        let q_k = MatArg::Var(q_vars[slot(region)]);
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
                let k = slot(region);
                eh_power_lmi(
                    &mut problem,
                    &eh_specs[k],
                    MatArg::Fixed(&w_fixed[k]),
                    MatArg::Fixed(&w_fixed[slot(region.other())]),
                    MatArg::Var(q_vars[k]),
                    ScalArg::Var(xi),
                )?;
            }
        }
        ObjectiveMode::Sum => {
            eh_power_sum_lmi(
                &mut problem,
                [&eh_specs[0], &eh_specs[1]],
                [MatArg::Var(q_vars[0]), MatArg::Var(q_vars[1])],
                MatArg::Fixed(&w_fixed[0]),
                MatArg::Fixed(&w_fixed[1]),
                ScalArg::Var(xi),
            )?;
        }
    }

    let split_vars = match rule {
        AmplitudeRule::PerElement => {
            for i in 0..channels.m {
                let expr = LinExpr::default()
                    .plus_mat(q_vars[0], unit_diag(channels.m, i))
                    .plus_mat(q_vars[1], unit_diag(channels.m, i));
                problem.add_scalar_eq(expr, 1.0)?;
            }
            None
        }
        AmplitudeRule::SharedScalar => {
            let levels = [problem.add_nonneg_scal_var("beta_t"), problem.add_nonneg_scal_var("beta_r")];
            for (k, &level) in levels.iter().enumerate() {
                for i in 0..channels.m {
                    let expr = LinExpr::default()
                        .plus_mat(q_vars[k], unit_diag(channels.m, i))
                        .plus_scal(level, -1.0);
                    problem.add_scalar_eq(expr, 0.0)?;
                }
            }
            let sum = LinExpr::default().plus_scal(levels[0], 1.0).plus_scal(levels[1], 1.0);
            problem.add_scalar_eq(sum, 1.0)?;
            Some(levels)
        }
        AmplitudeRule::FullAmplitude => {
            for &var in &q_vars {
                for i in 0..channels.m {
                    let expr = LinExpr::default().plus_mat(var, unit_diag(channels.m, i));
                    problem.add_scalar_eq(expr, 1.0)?;
                }
            }
            None
        }
    };

    let mut objective = LinExpr::scal(xi);
    for region in Region::BOTH {
        let k = slot(region);
        objective = objective
            .plus_mat(q_vars[k], HermitianMatrix::eye(channels.m).scaled(-gamma))
            .plus_expr(spectral_linearization(q_vars[k], q_prev.gram(region)).scaled(gamma));
    }
    problem.set_objective(objective);

    Ok(PassiveSdp { problem, q_vars, xi, split_vars })
}

/// The elementary diagonal matrix `e_i e_i^T`, addressing `diag(Q)[i]`.
fn unit_diag(dim: usize, i: usize) -> HermitianMatrix {
    let mut d = vec![0.0; dim];
    d[i] = 1.0;
    HermitianMatrix::from_real_diag(&d)
}

/// Progress record of one penalty run.
#[derive(Debug, Clone)]
pub struct PenaltyOutcome {
    /// Final iterate; amplitudes read off the Gram diagonals, coefficients
    /// not yet extracted.
    pub star: StarGram,
    /// Harvest target at the final iterate.
    pub xi: f64,
    /// Final total rank-one defect.
    pub defect: f64,
    /// Whether the defect target was reached within the stage caps.
    pub converged: bool,
    /// Whether the per-stage defect sequence was non-increasing.
    pub defect_monotone: bool,
    /// Penalty stages actually run.
    pub stages: usize,
    /// Total interior-point solves.
    pub solves: usize,
    /// Status of the last solve (`Optimal` on clean runs).
    pub last_status: SdpStatus,
    /// Penalized objective values, one inner sequence per stage.
    pub inner_objectives: Vec<Vec<f64>>,
    /// Total defect after each stage.
    pub defect_trace: Vec<f64>,
}

/// Runs the two-level penalty method from `q_init`: the inner loop re-solves
/// the linearized program until the objective improves by less than δ₂ (or
/// the iteration cap), the outer loop grows the penalty weight by the
/// configured factor until the total defect is at most δ₁ (or the stage
/// cap). The initial weight is scale-aware: `γ₀` is the configured fraction
/// of the starting point's nominal objective magnitude.
///
/// Non-convergence and solver breakdown are reported through the outcome
/// flags — the best (lowest-defect) iterate is returned, never an error.
pub fn penalty_loop(
    channels: &ChannelSet,
    w_fixed: &[HermitianMatrix; 2],
    q_init: &StarGram,
    rule: AmplitudeRule,
    config: &SystemConfig,
) -> Result<PenaltyOutcome, PassiveError> {
    q_init.validate(rule)?;
    let options = config.solve_options();
    let xi0 = nominal_objective(channels, w_fixed, q_init, config.objective_mode);
    let mut gamma = config.gamma_init_factor * xi0.abs().max(1e-30);

    let mut current = q_init.clone();
    let mut current_xi = xi0;
    let mut current_defect = total_defect(&current)?;
    let mut best: Option<(f64, f64, StarGram)> = None;
    let mut inner_objectives = Vec::new();
    let mut defect_trace = Vec::new();
    let mut solves = 0usize;
    let mut stages = 0usize;
    let mut last_status = SdpStatus::Optimal;
    let mut converged = false;
    let mut aborted = false;

    for _ in 0..config.outer_stages.max(1) {
        stages += 1;
        let mut prev_obj = f64::NEG_INFINITY;
        let mut sequence = Vec::new();
        for _ in 0..config.inner_iters.max(1) {
            let built = build_passive_sdp(channels, w_fixed, &current, gamma, rule, config)?;
            let solution = built.problem.solve(&options)?;
            solves += 1;
            last_status = solution.status;
            if solution.status != SdpStatus::Optimal {
                aborted = true;
                break;
            }
            current = StarGram::from_grams([
                solution.mat(built.q_vars[0]).clone(),
                solution.mat(built.q_vars[1]).clone(),
            ]);
            current_xi = solution.scal(built.xi);
            let objective = solution.objective_value;
            sequence.push(objective);
            let improvement = objective - prev_obj;
            prev_obj = objective;
            if improvement < config.delta_2 {
                break;
            }
        }
        inner_objectives.push(sequence);
        current_defect = total_defect(&current)?;
        defect_trace.push(current_defect);
        let better = match &best {
            Some((defect, _, _)) => current_defect <= *defect,
            None => true,
        };
        if better {
            best = Some((current_defect, current_xi, current.clone()));
        }
        if aborted {
            break;
        }
        if current_defect <= config.delta_1 {
            converged = true;
            break;
        }
        gamma *= config.gamma_growth;
    }

    let defect_monotone = defect_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let (defect, xi, star) = if converged {
        (current_defect, current_xi, current)
    } else {
        best.unwrap_or((current_defect, current_xi, current))
    };
    Ok(PenaltyOutcome {
        star,
        xi,
        defect,
        converged,
        defect_monotone,
        stages,
        solves,
        last_status,
        inner_objectives,
        defect_trace,
    })
}

/// Recovers the coefficient vector from a numerically rank-one Gram: the
/// `√λ_max`-scaled dominant eigenvector, with every element's amplitude
/// re-projected onto `√β` (phases kept) so the amplitude coupling holds
/// exactly after extraction.
pub fn extract_star_coefficients(
    q: &HermitianMatrix,
    beta: &[f64],
    tol: f64,
) -> Result<Array1<C64>, PassiveError> {
    if beta.len() != q.dim() {
        return Err(PassiveError::InvalidInput {
            detail: format!("{} amplitudes for a {}-element gram", beta.len(), q.dim()),
        });
    }
    let defect = rank_one_defect(q)?;
    if defect > tol {
        return Err(PassiveError::NotRankOne { defect, tol });
    }
    let (lambda, u) = dominant_eig(q);
    let scale = lambda.max(0.0).sqrt();
    let phi = (0..beta.len())
        .map(|i| {
            let raw = u[i] * scale;
            let target = beta[i].max(0.0).sqrt();
            let mag = raw.norm();
            if mag > 0.0 {
                raw / mag * target
            } else {
                C64::new(target, 0.0)
            }
        })
        .collect();
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    use super::*;
    use crate::testkit::{crafted, random_psd};

    #[test]
    fn linearization_touches_the_spectral_norm_at_the_expansion_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let q_prev = random_psd(4, &mut rng);
        let mut problem = SdpProblem::new();
        let q = problem.add_mat_var("q", 4);
        let expr = spectral_linearization(q, &q_prev);
        let mut point = problem.zero_assignment();
        point.set_mat(q, q_prev.clone());
        let (vals, _) = eig_hermitian(&q_prev);
        let spectral = vals[3];
        assert!((expr.eval(&point) - spectral).abs() <= 1e-12 * spectral.max(1.0));
    }

    #[test]
    fn linearization_matches_the_diagonal_hand_case() {
        let q_prev = HermitianMatrix::from_real_diag(&[2.0, 1.0]);
        let q_new = HermitianMatrix::from_real_diag(&[1.0, 2.0]);
        let mut problem = SdpProblem::new();
        let q = problem.add_mat_var("q", 2);
        let expr = spectral_linearization(q, &q_prev);
        let mut point = problem.zero_assignment();
        point.set_mat(q, q_new);
        let value = expr.eval(&point);
        assert!((value - 1.0).abs() <= 1e-12);
        assert!(value <= 2.0);
    }

    #[test]
    fn linearization_never_exceeds_the_spectral_norm() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let mut problem = SdpProblem::new();
        let q = problem.add_mat_var("q", 3);
        for _ in 0..10_000 {
            let q_prev = random_psd(3, &mut rng);
            let q_new = random_psd(3, &mut rng);
            let expr = spectral_linearization(q, &q_prev);
            let mut point = problem.zero_assignment();
            point.set_mat(q, q_new.clone());
            let (vals, _) = eig_hermitian(&q_new);
            assert!(expr.eval(&point) <= vals[2] + 1e-10);
        }
    }

    #[test]
    fn even_split_start_is_valid_and_rank_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let star = StarGram::uniform_split(6, &mut rng);
        star.validate(AmplitudeRule::PerElement).unwrap();
        star.validate(AmplitudeRule::SharedScalar).unwrap();
        assert!(total_defect(&star).unwrap() <= 1e-9);
        let phi = star.coefficients(Region::Transmission).unwrap();
        assert!(phi.iter().any(|z| (z - phi[0]).norm() > 1e-3), "phases should vary");

        let full = StarGram::full_on([3, 5], &mut rng);
        full.validate(AmplitudeRule::FullAmplitude).unwrap();
        assert_eq!(full.dim(Region::Transmission), 3);
        assert_eq!(full.dim(Region::Reflection), 5);
    }

    #[test]
    fn gram_invariants_are_enforced() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);

        let mut broken_coupling = StarGram::uniform_split(3, &mut rng);
        broken_coupling.q[0] = broken_coupling.q[0].scaled(1.2);
        broken_coupling.beta[0] = vec![0.6; 3];
        broken_coupling.phi[0] = None;
        assert!(broken_coupling.validate(AmplitudeRule::PerElement).is_err());

        let mut diag_mismatch = StarGram::uniform_split(3, &mut rng);
        diag_mismatch.beta[0][0] += 0.1;
        assert!(diag_mismatch.validate(AmplitudeRule::PerElement).is_err());

        let mut indefinite = StarGram::uniform_split(3, &mut rng);
        indefinite.q[0] = HermitianMatrix::from_real_diag(&[0.5, -0.5, 0.5]);
        indefinite.beta[0] = vec![0.5, -0.5, 0.5];
        indefinite.phi[0] = None;
        assert!(indefinite.validate(AmplitudeRule::PerElement).is_err());

        let mut wrong_phi = StarGram::uniform_split(3, &mut rng);
        wrong_phi.phi[0] = Some(Array1::from_elem(3, C64::new(1.0, 0.0)));
        assert!(wrong_phi.validate(AmplitudeRule::PerElement).is_err());

        let mut uneven = StarGram::uniform_split(3, &mut rng);
        uneven.beta[0] = vec![0.4, 0.5, 0.6];
        uneven.beta[1] = vec![0.6, 0.5, 0.4];
        uneven.q[0] = HermitianMatrix::from_real_diag(&[0.4, 0.5, 0.6]);
        uneven.q[1] = HermitianMatrix::from_real_diag(&[0.6, 0.5, 0.4]);
        uneven.phi = [None, None];
        assert!(uneven.validate(AmplitudeRule::PerElement).is_ok());
        assert!(uneven.validate(AmplitudeRule::SharedScalar).is_err());
    }

    #[test]
    fn builder_emits_the_expected_constraint_counts() {
        let c = crafted(4, 2, false, 5);
        let counts = |rule: AmplitudeRule, config: &SystemConfig| {
            build_passive_sdp(&c.channels, &c.w, &c.star, 1.0, rule, config)
                .unwrap()
                .problem
                .constraint_counts()
        };

        let base = counts(AmplitudeRule::PerElement, &c.config);
        assert_eq!((base.lmis, base.scalar_eqs, base.scalar_ineqs, base.psd_vars), (6, 4, 0, 2));

        let mut no_secrecy = c.config.clone();
        no_secrecy.secrecy = false;
        assert_eq!(counts(AmplitudeRule::PerElement, &no_secrecy).lmis, 4);

        let mut summed = c.config.clone();
        summed.objective_mode = ObjectiveMode::Sum;
        assert_eq!(counts(AmplitudeRule::PerElement, &summed).lmis, 5);

        assert_eq!(counts(AmplitudeRule::SharedScalar, &c.config).scalar_eqs, 9);
        let full = crafted(4, 2, true, 6);
        let built =
            build_passive_sdp(&full.channels, &full.w, &full.star, 1.0, AmplitudeRule::FullAmplitude, &full.config)
                .unwrap();
        assert_eq!(built.problem.constraint_counts().scalar_eqs, 8);
    }

    #[test]
    fn nonpositive_penalty_weight_is_rejected() {
        let c = crafted(2, 2, false, 7);
        for gamma in [0.0, -1.0, f64::NAN] {
            let err = build_passive_sdp(
                &c.channels,
                &c.w,
                &c.star,
                gamma,
                AmplitudeRule::PerElement,
                &c.config,
            );
            assert!(matches!(err, Err(PassiveError::InvalidInput { .. })));
        }
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let c = crafted(3, 2, false, 8);
        let mut rng = ChaCha12Rng::seed_from_u64(80);
        let wrong_star = StarGram::uniform_split(4, &mut rng);
        assert!(matches!(
            build_passive_sdp(&c.channels, &c.w, &wrong_star, 1.0, AmplitudeRule::PerElement, &c.config),
            Err(PassiveError::InvalidInput { .. })
        ));
        let wrong_w = [HermitianMatrix::eye(3), HermitianMatrix::eye(3)];
        assert!(matches!(
            build_passive_sdp(&c.channels, &wrong_w, &c.star, 1.0, AmplitudeRule::PerElement, &c.config),
            Err(PassiveError::InvalidInput { .. })
        ));
    }

    #[test]
    fn single_element_surface_reduces_to_a_scalar_split() {
        let c = crafted(1, 2, false, 9);
        let built =
            build_passive_sdp(&c.channels, &c.w, &c.star, 1e-3, AmplitudeRule::PerElement, &c.config)
                .unwrap();
        let solution = built.problem.solve(&c.config.solve_options()).unwrap();
        assert_eq!(solution.status, SdpStatus::Optimal);
        let q_t = solution.mat(built.q_vars[0]).as_array()[[0, 0]].re;
        let q_r = solution.mat(built.q_vars[1]).as_array()[[0, 0]].re;
        assert!((q_t + q_r - 1.0).abs() <= 1e-6);
        assert!(q_t >= -1e-8 && q_r >= -1e-8);
    }

    #[test]
    fn huge_penalty_weight_pins_the_solution_near_rank_one() {
        let c = crafted(3, 2, false, 13);
        let built =
            build_passive_sdp(&c.channels, &c.w, &c.star, 1e6, AmplitudeRule::PerElement, &c.config)
                .unwrap();
        let solution = built.problem.solve(&c.config.solve_options()).unwrap();
        assert_eq!(solution.status, SdpStatus::Optimal);
        let star = StarGram::from_grams([
            solution.mat(built.q_vars[0]).clone(),
            solution.mat(built.q_vars[1]).clone(),
        ]);
        assert!(total_defect(&star).unwrap() <= 1e-6);
    }

    #[test]
    fn penalty_run_reaches_the_defect_target() {
        let c = crafted(3, 2, false, 17);
        let out =
            penalty_loop(&c.channels, &c.w, &c.star, AmplitudeRule::PerElement, &c.config).unwrap();
        assert!(out.converged, "defect trace: {:?}", out.defect_trace);
        assert!(out.defect <= c.config.delta_1);
        assert_eq!(out.last_status, SdpStatus::Optimal);
        assert!(out.defect_monotone, "defect trace: {:?}", out.defect_trace);
        for sequence in &out.inner_objectives {
            for pair in sequence.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9, "inner objectives decreased: {sequence:?}");
            }
        }
        let m = c.channels.m as f64;
        let trace_sum = out.star.q[0].trace() + out.star.q[1].trace();
        assert!((trace_sum - m).abs() <= 1e-6 * m.max(1.0));
        for i in 0..c.channels.m {
            let sum = out.star.beta[0][i] + out.star.beta[1][i];
            assert!((sum - 1.0).abs() <= 1e-6);
            assert!(out.star.beta[0][i] >= -1e-6 && out.star.beta[0][i] <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn single_element_run_converges_in_one_stage() {
        let c = crafted(1, 2, false, 21);
        let out =
            penalty_loop(&c.channels, &c.w, &c.star, AmplitudeRule::PerElement, &c.config).unwrap();
        assert!(out.converged);
        assert_eq!(out.stages, 1);
    }

    #[test]
    fn shared_scalar_rule_equalizes_the_diagonals() {
        let c = crafted(3, 2, false, 29);
        let built =
            build_passive_sdp(&c.channels, &c.w, &c.star, 1e-3, AmplitudeRule::SharedScalar, &c.config)
                .unwrap();
        let solution = built.problem.solve(&c.config.solve_options()).unwrap();
        assert_eq!(solution.status, SdpStatus::Optimal);
        let levels = built.split_vars.unwrap();
        let level_t = solution.scal(levels[0]);
        let level_r = solution.scal(levels[1]);
        assert!((level_t + level_r - 1.0).abs() <= 1e-6);
        for (k, level) in [level_t, level_r].into_iter().enumerate() {
            let q = solution.mat(built.q_vars[k]).as_array();
            for i in 0..3 {
                assert!((q[[i, i]].re - level).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn full_amplitude_rule_pins_the_diagonals() {
        let c = crafted(3, 2, true, 31);
        let built =
            build_passive_sdp(&c.channels, &c.w, &c.star, 1e-3, AmplitudeRule::FullAmplitude, &c.config)
                .unwrap();
        let solution = built.problem.solve(&c.config.solve_options()).unwrap();
        assert_eq!(solution.status, SdpStatus::Optimal);
        for &var in &built.q_vars {
            let q = solution.mat(var).as_array();
            for i in 0..3 {
                assert!((q[[i, i]].re - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn extraction_recovers_a_planted_vector() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let star = StarGram::uniform_split(5, &mut rng);
        let planted = star.coefficients(Region::Transmission).unwrap();
        let got = extract_star_coefficients(
            star.gram(Region::Transmission),
            star.amplitudes(Region::Transmission),
            1e-7,
        )
        .unwrap();
        let overlap: C64 = got.iter().zip(planted.iter()).map(|(x, y)| x.conj() * y).sum();
        let energy: f64 = planted.iter().map(|z| z.norm_sqr()).sum();
        assert!((overlap.norm() - energy).abs() <= 1e-9);
        for (z, &beta) in got.iter().zip(star.amplitudes(Region::Transmission)) {
            assert!((z.norm_sqr() - beta).abs() <= 1e-12);
        }
    }

    #[test]
    fn extraction_reprojects_amplitudes_and_keeps_phases() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let star = StarGram::uniform_split(4, &mut rng);
        let planted = star.coefficients(Region::Transmission).unwrap();
        let targets = [0.3, 0.9, 0.1, 0.7];
        let got =
            extract_star_coefficients(star.gram(Region::Transmission), &targets, 1e-7).unwrap();
        // The dominant eigenvector carries an arbitrary global phase, so only
        // the relative phases between elements are pinned.
        let reference = (got[0] * planted[0].conj()).arg();
        for i in 0..4 {
            assert!((got[i].norm_sqr() - targets[i]).abs() <= 1e-12);
            let mut drift = (got[i] * planted[i].conj()).arg() - reference;
            while drift > PI {
                drift -= 2.0 * PI;
            }
            while drift < -PI {
                drift += 2.0 * PI;
            }
            assert!(drift.abs() <= 1e-9, "relative phase moved by {drift}");
        }
    }

    #[test]
    fn extraction_rejects_wide_grams() {
        let q = HermitianMatrix::eye(3);
        let err = extract_star_coefficients(&q, &[1.0, 1.0, 1.0], 1e-7);
        match err {
            Err(PassiveError::NotRankOne { defect, .. }) => assert!((defect - 2.0).abs() <= 1e-9),
            other => panic!("expected rank rejection, got {other:?}"),
        }
    }

    #[test]
    fn reprojection_changes_the_objective_negligibly() {
        let c = crafted(3, 2, false, 47);
        let out =
            penalty_loop(&c.channels, &c.w, &c.star, AmplitudeRule::PerElement, &c.config).unwrap();
        assert!(out.converged);
        let objective = |star: &StarGram| {
            nominal_objective(&c.channels, &c.w, star, c.config.objective_mode)
        };
        let raw = objective(&out.star);
        let mut projected = out.star.clone();
        for region in Region::BOTH {
            let k = super::slot(region);
            let phi = extract_star_coefficients(
                out.star.gram(region),
                out.star.amplitudes(region),
                c.config.delta_1,
            )
            .unwrap();
            projected.q[k] = HermitianMatrix::outer(&phi);
            projected.beta[k] = phi.iter().map(|z| z.norm_sqr()).collect();
            projected.phi[k] = Some(phi);
        }
        let reprojected = objective(&projected);
        assert!(
            (raw - reprojected).abs() <= 1e-3 * raw.abs().max(1e-12),
            "objective moved from {raw} to {reprojected}"
        );
    }

    proptest! {
        #[test]
        fn penalty_defect_separates_rank_one_from_spread_grams(seed in 0u64..64) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let spread = random_psd(4, &mut rng);
            let defect = rank_one_defect(&spread).unwrap();
            let (vals, _) = eig_hermitian(&spread);
            prop_assert!(defect >= 0.0);
            prop_assert!((defect - (spread.trace() - vals[3])).abs() <= 1e-12 * spread.trace());

            let v = Array1::from_shape_fn(4, |_| {
                C64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
            });
            let rank_one = HermitianMatrix::outer(&v);
            prop_assert!(rank_one_defect(&rank_one).unwrap() <= 1e-10 * rank_one.trace());
        }
    }
}
