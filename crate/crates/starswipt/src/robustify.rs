//! Worst-case constraint builders for channels known only inside a
//! Frobenius-norm error ball.
//!
//! Every link-quality requirement in this crate is a quadratic inequality in
//! the cascaded channel `H`: with a beam-side Gram combination `S` and a
//! surface-side Gram `Q`,
//!
//! ```text
//! slack(H) = Tr(S · H^H Q H) + c  ≥  0   for all ‖H − Ĥ‖_F ≤ ε.
//! ```
//!
//! The S-procedure turns each such ball-quantified constraint into one
//! linear matrix inequality of dimension `m·n_t + 1` with a single
//! nonnegative multiplier λ:
//!
//! ```text
//! [[ K + λI,      K·vec(Ĥ) ],
//!  [ vec(Ĥ)^H K,  vec(Ĥ)^H K vec(Ĥ) + c − λ·ε² ]]  ⪰ 0,   K = S^T ⊗ Q.
//! ```
//!
//! The builders never materialize `K`. Diagonalizing the numeric side
//! (`S = Σ_j d_j e_j e_j^H` when the surface Gram is the variable,
//! `Q = Σ_p ν_p v_p v_p^H` when the beam Grams are) turns the block into a
//! block-arrow form whose diagonal cliques all share one core map — the
//! decomposed representation the conic layer solves directly. Zero modes of
//! the numeric side contribute nothing and are pruned.
//!
//! At `ε = 0` the ball degenerates to the estimate and the constraint is
//! added as the exactly-equivalent nominal scalar inequality instead (no
//! multiplier, no LMI).

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::channel::Region;
use crate::conic::{
    ArrowClique, ArrowGroup, ArrowLmi, ConicError, CoreMap, CoreTerm, LinExpr, MatVarRef,
    ScalVarRef, SdpProblem,
};
use crate::numerics::{dagger, eig_hermitian, kron_form, vec_cm, C64, HermitianMatrix};

/// Errors from robust-constraint assembly.
#[derive(Debug, Error)]
pub enum RobustError {
    #[error("invalid constraint spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("beam Grams and the surface Gram cannot both be symbolic in one constraint")]
    BilinearArguments,
    #[error("operand dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Which link-quality requirement a constraint certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Information rate: received SINR of the region's stream ≥ Γ.
    IrRate,
    /// Energy harvest: total received RF power ≥ ξ.
    EhPower,
    /// Leakage: eavesdropped SINR on the region's stream ≤ η.
    EveLeakage,
}

impl ConstraintKind {
    fn tag(self) -> &'static str {
        match self {
            ConstraintKind::IrRate => "ir",
            ConstraintKind::EhPower => "eh",
            ConstraintKind::EveLeakage => "eve",
        }
    }
}

/// SINR threshold equivalent to a spectral-efficiency floor of `rate`
/// bits/s/Hz: `2^rate − 1`.
pub fn sinr_threshold(rate: f64) -> f64 {
    2f64.powf(rate) - 1.0
}

/// One ball-quantified quadratic requirement, fully described: which family,
/// whose channel estimate, how large the error ball is, and the family's
/// threshold/noise data.
#[derive(Debug, Clone)]
pub struct RobustConstraintSpec {
    pub kind: ConstraintKind,
    pub region: Region,
    /// Cascaded channel estimate `Ĥ` (`m × n_t`).
    pub estimate: Array2<C64>,
    /// Frobenius radius of the error ball.
    pub epsilon: f64,
    /// Γ for the rate family, η for the leakage family; unused (1) for the
    /// harvest family, whose target ξ is an operand instead.
    pub threshold: f64,
    /// σ² for the rate family, σ_e² for the leakage family; unused (0) for
    /// the harvest family.
    pub noise_power: f64,
}

impl RobustConstraintSpec {
    pub fn ir_rate(
        region: Region,
        estimate: Array2<C64>,
        epsilon: f64,
        gamma: f64,
        noise_power: f64,
    ) -> Result<Self, RobustError> {
        let spec = Self {
            kind: ConstraintKind::IrRate,
            region,
            estimate,
            epsilon,
            threshold: gamma,
            noise_power,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn eh_power(
        region: Region,
        estimate: Array2<C64>,
        epsilon: f64,
    ) -> Result<Self, RobustError> {
        let spec = Self {
            kind: ConstraintKind::EhPower,
            region,
            estimate,
            epsilon,
            threshold: 1.0,
            noise_power: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn eve_leakage(
        region: Region,
        estimate: Array2<C64>,
        epsilon: f64,
        eta: f64,
        noise_power: f64,
    ) -> Result<Self, RobustError> {
        let spec = Self {
            kind: ConstraintKind::EveLeakage,
            region,
            estimate,
            epsilon,
            threshold: eta,
            noise_power,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), RobustError> {
        let fail = |detail: String| Err(RobustError::InvalidSpec { detail });
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return fail(format!("error radius must be finite and ≥ 0 (got {})", self.epsilon));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return fail(format!("threshold must be finite and > 0 (got {})", self.threshold));
        }
        match self.kind {
            ConstraintKind::EhPower => {
                if self.noise_power != 0.0 {
                    return fail("the harvest family has no noise term".to_string());
                }
            }
            _ => {
                if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
                    return fail(format!(
                        "noise power must be finite and > 0 (got {})",
                        self.noise_power
                    ));
                }
            }
        }
        if self.estimate.is_empty() {
            return fail("channel estimate must be non-empty".to_string());
        }
        Ok(())
    }

    /// Weights of the beam-side combination `S = a·W_k + b·W_k̄`.
    fn gram_weights(&self) -> (f64, f64) {
        match self.kind {
            ConstraintKind::IrRate => (1.0 / self.threshold, -1.0),
            ConstraintKind::EhPower => (1.0, 1.0),
            ConstraintKind::EveLeakage => (-1.0 / self.threshold, 1.0),
        }
    }

    /// Constant part of the slack, excluding any harvest target ξ.
    fn slack_offset(&self) -> f64 {
        match self.kind {
            ConstraintKind::IrRate => -self.noise_power,
            ConstraintKind::EhPower => 0.0,
            ConstraintKind::EveLeakage => self.noise_power,
        }
    }

    /// Full constant part of the slack at a harvest target of `xi`.
    fn offset_at(&self, xi: f64) -> f64 {
        self.slack_offset() - if self.kind == ConstraintKind::EhPower { xi } else { 0.0 }
    }
}

/// A Gram operand: a problem variable or a fixed numeric value.
#[derive(Debug, Clone, Copy)]
pub enum MatArg<'a> {
    Var(MatVarRef),
    Fixed(&'a HermitianMatrix),
}

impl MatArg<'_> {
    fn is_var(&self) -> bool {
        matches!(self, MatArg::Var(_))
    }

    fn dim(&self, problem: &SdpProblem) -> usize {
        match self {
            MatArg::Var(v) => problem.mat_dim(*v),
            MatArg::Fixed(m) => m.dim(),
        }
    }

    fn fixed(&self) -> &HermitianMatrix {
        match self {
            MatArg::Fixed(m) => m,
            MatArg::Var(_) => unreachable!("requesting numeric value of a symbolic operand"),
        }
    }
}

/// A scalar operand: a problem variable or a fixed number.
#[derive(Debug, Clone, Copy)]
pub enum ScalArg {
    Var(ScalVarRef),
    Fixed(f64),
}

/// Adds the worst-case information-rate constraint of `spec.region` and
/// returns its ball multiplier (`None` when the radius is zero and the
/// constraint entered as the nominal scalar inequality).
pub fn ir_rate_lmi(
    problem: &mut SdpProblem,
    spec: &RobustConstraintSpec,
    w_k: MatArg,
    w_other: MatArg,
    q: MatArg,
) -> Result<Option<ScalVarRef>, RobustError> {
    ensure_kind(spec, ConstraintKind::IrRate)?;
    add_ball_constraint(problem, spec, w_k, w_other, q, None)
}

/// Adds the worst-case harvested-power constraint (the region's terminals
/// collect at least `xi` RF watts); see [`ir_rate_lmi`] for the return value.
pub fn eh_power_lmi(
    problem: &mut SdpProblem,
    spec: &RobustConstraintSpec,
    w_k: MatArg,
    w_other: MatArg,
    q: MatArg,
    xi: ScalArg,
) -> Result<Option<ScalVarRef>, RobustError> {
    ensure_kind(spec, ConstraintKind::EhPower)?;
    add_ball_constraint(problem, spec, w_k, w_other, q, Some(xi))
}

/// Adds the worst-case leakage constraint (eavesdropped SINR on the region's
/// stream stays below η); see [`ir_rate_lmi`] for the return value.
pub fn eve_leakage_lmi(
    problem: &mut SdpProblem,
    spec: &RobustConstraintSpec,
    w_k: MatArg,
    w_other: MatArg,
    q: MatArg,
) -> Result<Option<ScalVarRef>, RobustError> {
    ensure_kind(spec, ConstraintKind::EveLeakage)?;
    add_ball_constraint(problem, spec, w_k, w_other, q, None)
}

/// Adds the summed-harvest constraint `Σ_regions power ≥ xi`, robust over
/// both regions' error balls jointly (one multiplier per ball). Returns the
/// multipliers in the order of the supplied specs; a `None` entry means that
/// region's ball was degenerate (zero radius or a vanishing beam
/// combination) and its power entered the corner exactly.
pub fn eh_power_sum_lmi(
    problem: &mut SdpProblem,
    specs: [&RobustConstraintSpec; 2],
    qs: [MatArg; 2],
    w_k: MatArg,
    w_other: MatArg,
    xi: ScalArg,
) -> Result<[Option<ScalVarRef>; 2], RobustError> {
    for spec in specs {
        ensure_kind(spec, ConstraintKind::EhPower)?;
    }
    if specs[0].region == specs[1].region {
        return Err(RobustError::InvalidSpec {
            detail: "joint harvest constraint needs one spec per region".to_string(),
        });
    }
    let w_sym = w_k.is_var() || w_other.is_var();
    let q_sym = qs.iter().any(MatArg::is_var);
    if w_sym && q_sym {
        return Err(RobustError::BilinearArguments);
    }
    for (spec, q) in specs.iter().zip(qs.iter()) {
        check_dims(problem, spec, &w_k, &w_other, q)?;
    }

    let mut corner = LinExpr::constant(0.0);
    match xi {
        ScalArg::Var(v) => corner = corner.plus_scal(v, -1.0),
        ScalArg::Fixed(x) => corner = corner.plus_const(-x),
    }
    let mut groups = Vec::new();
    let mut lambdas = [None, None];
    for (slot, (spec, q)) in specs.iter().zip(qs.iter()).enumerate() {
        if spec.epsilon == 0.0 {
            corner = corner.plus_expr(exact_quad_expr(spec, &w_k, &w_other, q));
            continue;
        }
        let ball = ball_data(spec, &w_k, &w_other, q);
        corner = corner.plus_expr(ball.corner_quad);
        if ball.cliques.is_empty() {
            continue;
        }
        let lambda = problem.add_nonneg_scal_var(&lambda_name(spec));
        corner = corner.plus_scal(lambda, -spec.epsilon * spec.epsilon);
        groups.push(ArrowGroup { core: ball.core, lambda: Some(lambda), cliques: ball.cliques });
        lambdas[slot] = Some(lambda);
    }
    if groups.is_empty() {
        problem.add_scalar_ineq(corner.scaled(-1.0), 0.0)?;
    } else {
        problem.add_arrow_lmi(ArrowLmi { groups, corner })?;
    }
    Ok(lambdas)
}

/// The slack of the nominal (estimate) channel itself,
/// `Tr(S Ĥ^H Q Ĥ) + c − ξ_eff`, with every operand numeric.
pub fn nominal_slack(
    spec: &RobustConstraintSpec,
    w_k: &HermitianMatrix,
    w_other: &HermitianMatrix,
    q: &HermitianMatrix,
    xi: f64,
) -> f64 {
    perturbed_slack(spec, None, w_k, w_other, q, xi)
}

/// The slack at one concrete channel realization, `Ĥ` shifted by the given
/// ball perturbation (`None` means the estimate itself), with every operand
/// numeric.
pub fn perturbed_slack(
    spec: &RobustConstraintSpec,
    delta: Option<&Array2<C64>>,
    w_k: &HermitianMatrix,
    w_other: &HermitianMatrix,
    q: &HermitianMatrix,
    xi: f64,
) -> f64 {
    let (a, b) = spec.gram_weights();
    let s = w_k.scaled_add(a, w_other, b);
    match delta {
        Some(d) => slack_value(&s, q, spec.offset_at(xi), &(&spec.estimate + d)),
        None => slack_value(&s, q, spec.offset_at(xi), &spec.estimate),
    }
}

/// Outcome of [`verify_s_procedure`].
pub struct WorstCaseProbe {
    /// Smallest eigenvalue of the certificate block.
    pub certificate_min_eig: f64,
    /// Smallest sampled slack value.
    pub min_margin: f64,
}

/// Samples the quantified quadratic directly: evaluates the slack at
/// `n_samples` errors drawn uniformly from the ball **boundary** and reports
/// the minimum, together with the smallest eigenvalue of the supplied
/// certificate block. A PSD certificate promises a nonnegative worst-case
/// slack, so a clearly negative sampled margin alongside a PSD certificate
/// would falsify the construction itself.
///
/// `xi` is the harvest target and participates only in the harvest family's
/// slack. With a zero radius (or zero samples) the estimate itself is the
/// single sample.
pub fn verify_s_procedure(
    block: &HermitianMatrix,
    spec: &RobustConstraintSpec,
    w_k: &HermitianMatrix,
    w_other: &HermitianMatrix,
    q: &HermitianMatrix,
    xi: f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> WorstCaseProbe {
    let (eigs, _) = eig_hermitian(block);
    let certificate_min_eig = eigs[0];
    if spec.epsilon == 0.0 || n_samples == 0 {
        let min_margin = nominal_slack(spec, w_k, w_other, q, xi);
        return WorstCaseProbe { certificate_min_eig, min_margin };
    }
    let (a, b) = spec.gram_weights();
    let s = w_k.scaled_add(a, w_other, b);
    let offset = spec.offset_at(xi);
    let mut min_margin = f64::INFINITY;
    for _ in 0..n_samples {
        let delta = boundary_error(spec.estimate.dim(), spec.epsilon, rng);
        let h = &spec.estimate + &delta;
        min_margin = min_margin.min(slack_value(&s, q, offset, &h));
    }
    WorstCaseProbe { certificate_min_eig, min_margin }
}

/// Assembles the full dense certificate block — the form the decomposed
/// constraint is unitarily similar to. Meant for audits and tests; quadratic
/// in `m·n_t`.
pub fn reference_block(
    spec: &RobustConstraintSpec,
    w_k: &HermitianMatrix,
    w_other: &HermitianMatrix,
    q: &HermitianMatrix,
    xi: f64,
    lambda: f64,
) -> HermitianMatrix {
    let (a, b) = spec.gram_weights();
    let s = w_k.scaled_add(a, w_other, b);
    let k = kron_form(&s, q);
    let h_vec = vec_cm(&spec.estimate);
    let n = k.dim();
    let border = k.as_array().dot(&h_vec);
    let corner = k.quad_form(&h_vec) + spec.offset_at(xi) - lambda * spec.epsilon * spec.epsilon;
    let mut full: Array2<C64> = Array2::zeros((n + 1, n + 1));
    for p in 0..n {
        for pp in 0..n {
            full[[p, pp]] = k.as_array()[[p, pp]];
        }
        full[[p, p]] += C64::new(lambda, 0.0);
        full[[p, n]] = border[p];
        full[[n, p]] = border[p].conj();
    }
    full[[n, n]] = C64::new(corner, 0.0);
    HermitianMatrix::symmetrize(full)
}

// ---------------------------------------------------------------------------
// Assembly internals
// ---------------------------------------------------------------------------

fn ensure_kind(spec: &RobustConstraintSpec, want: ConstraintKind) -> Result<(), RobustError> {
    if spec.kind != want {
        return Err(RobustError::InvalidSpec {
            detail: format!("spec is for the {:?} family, builder expects {:?}", spec.kind, want),
        });
    }
    Ok(())
}

fn lambda_name(spec: &RobustConstraintSpec) -> String {
    format!("lambda_{}_{}", spec.kind.tag(), spec.region.label())
}

fn slack_value(s: &HermitianMatrix, q: &HermitianMatrix, offset: f64, h: &Array2<C64>) -> f64 {
    let m = HermitianMatrix::symmetrize(dagger(h).dot(q.as_array()).dot(h));
    s.inner(&m) + offset
}

fn check_dims(
    problem: &SdpProblem,
    spec: &RobustConstraintSpec,
    w_k: &MatArg,
    w_other: &MatArg,
    q: &MatArg,
) -> Result<(), RobustError> {
    let (m, n_t) = spec.estimate.dim();
    for (label, arg, want) in [("w_k", w_k, n_t), ("w_other", w_other, n_t), ("q", q, m)] {
        let got = arg.dim(problem);
        if got != want {
            return Err(RobustError::DimensionMismatch {
                detail: format!("{label} has dimension {got}, channel shape needs {want}"),
            });
        }
    }
    Ok(())
}

fn add_ball_constraint(
    problem: &mut SdpProblem,
    spec: &RobustConstraintSpec,
    w_k: MatArg,
    w_other: MatArg,
    q: MatArg,
    xi: Option<ScalArg>,
) -> Result<Option<ScalVarRef>, RobustError> {
    check_dims(problem, spec, &w_k, &w_other, &q)?;
    if (w_k.is_var() || w_other.is_var()) && q.is_var() {
        return Err(RobustError::BilinearArguments);
    }

    let mut corner = LinExpr::constant(spec.slack_offset());
    match xi {
        Some(ScalArg::Var(v)) => corner = corner.plus_scal(v, -1.0),
        Some(ScalArg::Fixed(x)) => corner = corner.plus_const(-x),
        None => {}
    }

    if spec.epsilon == 0.0 {
        let quad = exact_quad_expr(spec, &w_k, &w_other, &q);
        problem.add_scalar_ineq(corner.plus_expr(quad).scaled(-1.0), 0.0)?;
        return Ok(None);
    }

    let ball = ball_data(spec, &w_k, &w_other, &q);
    corner = corner.plus_expr(ball.corner_quad);
    if ball.cliques.is_empty() {
        // The beam combination vanished: the quadratic is identically zero
        // over the whole ball and only the constant part remains binding.
        problem.add_scalar_ineq(corner.scaled(-1.0), 0.0)?;
        return Ok(None);
    }
    let lambda = problem.add_nonneg_scal_var(&lambda_name(spec));
    corner = corner.plus_scal(lambda, -spec.epsilon * spec.epsilon);
    problem.add_arrow_lmi(ArrowLmi {
        groups: vec![ArrowGroup { core: ball.core, lambda: Some(lambda), cliques: ball.cliques }],
        corner,
    })?;
    Ok(Some(lambda))
}

/// The exact nominal quadratic `Tr(S Ĥ^H Q Ĥ)` as a linear expression in
/// whichever side is symbolic.
fn exact_quad_expr(
    spec: &RobustConstraintSpec,
    w_k: &MatArg,
    w_other: &MatArg,
    q: &MatArg,
) -> LinExpr {
    let est = &spec.estimate;
    let (a, b) = spec.gram_weights();
    let mut expr = LinExpr::constant(0.0);
    if w_k.is_var() || w_other.is_var() {
        // Beam mode: M = Ĥ^H Q Ĥ is numeric, the expression is linear in W.
        let m = HermitianMatrix::symmetrize(dagger(est).dot(q.fixed().as_array()).dot(est));
        for (arg, coeff) in [(w_k, a), (w_other, b)] {
            match arg {
                MatArg::Var(v) => expr = expr.plus_mat(*v, m.scaled(coeff)),
                MatArg::Fixed(w) => expr = expr.plus_const(coeff * m.inner(w)),
            }
        }
    } else {
        // Surface mode: A = Ĥ S Ĥ^H is numeric, the expression is linear in Q.
        let s = w_k.fixed().scaled_add(a, w_other.fixed(), b);
        let acc = HermitianMatrix::symmetrize(est.dot(s.as_array()).dot(&dagger(est)));
        match q {
            MatArg::Var(v) => expr = expr.plus_mat(*v, acc),
            MatArg::Fixed(qv) => expr = expr.plus_const(acc.inner(qv)),
        }
    }
    expr
}

struct BallData {
    core: CoreMap,
    cliques: Vec<ArrowClique>,
    /// `vec(Ĥ)^H K vec(Ĥ)` restricted to the kept modes, as a linear
    /// expression — exactly consistent with the emitted cliques.
    corner_quad: LinExpr,
}

/// Diagonalizes the numeric side and produces the clique decomposition. Modes
/// with negligible weight (|eigenvalue| ≤ 1e-13 of the largest) are dropped;
/// they contribute a zero diagonal block, a zero border, and nothing to the
/// corner.
fn ball_data(
    spec: &RobustConstraintSpec,
    w_k: &MatArg,
    w_other: &MatArg,
    q: &MatArg,
) -> BallData {
    let est = &spec.estimate;
    let (m, n_t) = est.dim();
    let (a, b) = spec.gram_weights();

    if !(w_k.is_var() || w_other.is_var()) {
        // Surface mode: S numeric, cliques along its eigenvectors; the core
        // map is the surface Gram itself.
        let s = w_k.fixed().scaled_add(a, w_other.fixed(), b);
        let (vals, vecs) = eig_hermitian(&s);
        let amax = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut cliques = Vec::new();
        let mut outer: Array2<C64> = Array2::zeros((m, m));
        for (j, &d) in vals.iter().enumerate() {
            if d.abs() <= amax * 1e-13 {
                continue;
            }
            let h_j = est.dot(&vecs.column(j));
            for p in 0..m {
                for pp in 0..m {
                    outer[[p, pp]] += h_j[p] * h_j[pp].conj() * d;
                }
            }
            cliques.push(ArrowClique { scale: d, border_vec: h_j.mapv(|z| z * d) });
        }
        let core = match q {
            MatArg::Var(v) => CoreMap {
                dim: m,
                terms: vec![CoreTerm { var: *v, scale: 1.0, conj: false }],
                constant: None,
            },
            MatArg::Fixed(qv) => {
                CoreMap { dim: m, terms: Vec::new(), constant: Some(qv.as_array().clone()) }
            }
        };
        let acc = HermitianMatrix::symmetrize(outer);
        let corner_quad = match q {
            MatArg::Var(v) => LinExpr::constant(0.0).plus_mat(*v, acc),
            MatArg::Fixed(qv) => LinExpr::constant(acc.inner(qv)),
        };
        return BallData { core, cliques, corner_quad };
    }

    // Beam mode: Q numeric, cliques along its eigenvectors; the core map is
    // the transposed beam combination, conjugate-affine in the Gram
    // variables.
    let (nu, vecs) = eig_hermitian(q.fixed());
    let amax = nu.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut cliques = Vec::new();
    let mut outer: Array2<C64> = Array2::zeros((n_t, n_t));
    for (p, &weight) in nu.iter().enumerate() {
        if weight.abs() <= amax * 1e-13 {
            continue;
        }
        // Row p of V^H·Ĥ, taken as a column without conjugation.
        let mut t_p: Array1<C64> = Array1::zeros(n_t);
        for j in 0..n_t {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..m {
                acc += vecs[[i, p]].conj() * est[[i, j]];
            }
            t_p[j] = acc;
        }
        for x in 0..n_t {
            for y in 0..n_t {
                outer[[x, y]] += t_p[x].conj() * t_p[y] * weight;
            }
        }
        cliques.push(ArrowClique { scale: weight, border_vec: t_p.mapv(|z| z * weight) });
    }
    let m_tilde = HermitianMatrix::symmetrize(outer);
    let mut terms = Vec::new();
    let mut constant: Option<Array2<C64>> = None;
    let mut corner_quad = LinExpr::constant(0.0);
    for (arg, coeff) in [(w_k, a), (w_other, b)] {
        match arg {
            MatArg::Var(v) => {
                terms.push(CoreTerm { var: *v, scale: coeff, conj: true });
                corner_quad = corner_quad.plus_mat(*v, m_tilde.scaled(coeff));
            }
            MatArg::Fixed(w) => {
                let conj_w = w.as_array().mapv(|z| z.conj() * coeff);
                constant = Some(match constant {
                    Some(acc) => acc + conj_w,
                    None => conj_w,
                });
                corner_quad = corner_quad.plus_const(coeff * m_tilde.inner(w));
            }
        }
    }
    BallData { core: CoreMap { dim: n_t, terms, constant }, cliques, corner_quad }
}

/// A uniformly random error matrix on the sphere `‖Δ‖_F = radius`.
fn boundary_error(shape: (usize, usize), radius: f64, rng: &mut impl Rng) -> Array2<C64> {
    let gauss = Array2::from_shape_fn(shape, |_| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let norm = gauss.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return gauss; // measure-zero; zero error is still inside the ball
    }
    gauss.mapv(|z| z * (radius / norm))
}
