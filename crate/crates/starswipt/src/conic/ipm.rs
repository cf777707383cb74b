//! Native interior-point backend for complex-Hermitian block SDPs.
//!
//! Solves `maximize g·y  s.t.  V_k(y) = C_k + Σ_r y_r·A_{k,r} ⪰ 0` for every
//! block `k`, with all blocks Hermitian. The dual is
//! `minimize Σ⟨C_k, X_k⟩  s.t.  Σ_k⟨A_{k,r}, X_k⟩ = −g_r, X_k ⪰ 0`, and the
//! method is an infeasible-start Mehrotra predictor-corrector on the pair
//! `(S, X)` with `S_k` the slack of `V_k`, using the Nesterov–Todd scaling
//! `W_k` (the unique PD matrix with `W S W = X`) computed per block through
//! Hermitian eigendecompositions:
//! `W = S^{-1/2}(S^{1/2} X S^{1/2})^{1/2} S^{-1/2}`.
//!
//! Each Newton step eliminates `(ΔX, ΔS)` against the Schur system
//! `M Δy = g + σμ·A*(S^{-1}) − A*(W·Rd·W) − A*(Corr)` with
//! `M_rs = Σ_k ⟨A_{k,r}, W_k A_{k,s} W_k⟩` assembled from the sparse
//! coefficient blocks and factored by a dense Cholesky.
//!
//! Infeasibility is reported in two stages: a divergence heuristic watches
//! for a scaled dual improving ray (`A*(X̂) → 0`, `⟨C, X̂⟩ < 0`), and a
//! phase-I solve (`minimize t  s.t.  V_k(y) + t·I ⪰ 0`) confirms or refutes
//! it before the status is committed.

use ndarray::prelude::*;
use ndarray_linalg::{Cholesky, UPLO};

use super::{SolveOptions, SparseHerm};
use crate::numerics::{ensure_single_threaded_blas, eigh_lapack, C64};

/// One PSD constraint block over reduced coordinates.
#[derive(Debug, Clone)]
pub(crate) struct IpmBlock {
    pub dim: usize,
    pub constant: Array2<C64>,
    /// Sorted by coordinate; coordinates with empty coefficients are absent.
    pub coeffs: Vec<(usize, SparseHerm)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    Infeasible,
    IterationCap,
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    pub iterations: usize,
}

/// Entry point: classifies trivially infeasible constant blocks, drops
/// unconstrained coordinates, runs the core iteration, and resolves
/// ambiguous endings through phase I.
pub(crate) fn solve(blocks: &[IpmBlock], g: &[f64], options: &SolveOptions) -> IpmOutcome {
    ensure_single_threaded_blas();
    let n = g.len();

    // Constant blocks must be PSD on their own; they carry no information
    // for the iteration and are dropped afterwards.
    for b in blocks {
        if b.coeffs.is_empty() {
            let (vals, _) = eigh_lapack(&b.constant);
            let scale = frob(&b.constant).max(1.0);
            if b.dim > 0 && vals[0] < -options.feas_tol * scale {
                return IpmOutcome {
                    status: IpmStatus::Infeasible,
                    y: vec![0.0; n],
                    iterations: 0,
                };
            }
        }
    }

    // Coordinates that appear in no block are unconstrained: harmless when
    // their objective weight vanishes, unbounded otherwise.
    let mut covered = vec![false; n];
    for b in blocks {
        for (r, _) in &b.coeffs {
            covered[*r] = true;
        }
    }
    let g_scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if covered
        .iter()
        .zip(g.iter())
        .any(|(&c, &w)| !c && w.abs() > 1e-12 * g_scale)
    {
        return IpmOutcome { status: IpmStatus::Stalled, y: vec![0.0; n], iterations: 0 };
    }

    let cols: Vec<usize> = (0..n).filter(|&r| covered[r]).collect();
    if cols.is_empty() {
        return IpmOutcome { status: IpmStatus::Optimal, y: vec![0.0; n], iterations: 0 };
    }
    let mut col_of = vec![usize::MAX; n];
    for (packed, &r) in cols.iter().enumerate() {
        col_of[r] = packed;
    }
    let packed_blocks: Vec<PackedBlock> = blocks
        .iter()
        .filter(|b| !b.coeffs.is_empty())
        .map(|b| PackedBlock {
            dim: b.dim,
            c: b.constant.clone(),
            idx: b.coeffs.iter().map(|(r, _)| col_of[*r]).collect(),
            a: b.coeffs.iter().map(|(_, sh)| sh.clone()).collect(),
        })
        .collect();
    let g_packed: Vec<f64> = cols.iter().map(|&r| g[r]).collect();

    let core = solve_core(&packed_blocks, &g_packed, options, false);
    let unpack = |yp: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (packed, &r) in cols.iter().enumerate() {
            y[r] = yp[packed];
        }
        y
    };

    let (status, yp) = match core.end {
        CoreEnd::Converged => (IpmStatus::Optimal, core.y),
        CoreEnd::Diverged => (IpmStatus::Stalled, core.y),
        CoreEnd::Certified => (IpmStatus::Stalled, core.y), // not used by the main pass
        CoreEnd::HeuristicInfeasible => match phase_one(&packed_blocks, options) {
            Phase1::Infeasible => (IpmStatus::Infeasible, core.y),
            Phase1::Feasible | Phase1::Unknown => (IpmStatus::Stalled, core.y),
        },
        CoreEnd::Cap => {
            // A cap with residuals still far out is often an infeasible
            // instance grinding; let phase I make the call.
            if core.best_score > 1e-4 && matches!(phase_one(&packed_blocks, options), Phase1::Infeasible)
            {
                (IpmStatus::Infeasible, core.y)
            } else {
                (IpmStatus::IterationCap, core.y)
            }
        }
    };
    IpmOutcome { status, y: unpack(&yp), iterations: core.iterations }
}

// ---------------------------------------------------------------------------
// Core iteration
// ---------------------------------------------------------------------------

struct PackedBlock {
    dim: usize,
    c: Array2<C64>,
    idx: Vec<usize>,
    a: Vec<SparseHerm>,
}

enum CoreEnd {
    Converged,
    HeuristicInfeasible,
    Diverged,
    Cap,
    /// Phase-I only: the current iterate certifies strict feasibility of the
    /// unshifted blocks.
    Certified,
}

struct CoreOutcome {
    end: CoreEnd,
    y: Vec<f64>,
    iterations: usize,
    best_score: f64,
}

fn solve_core(
    blocks: &[PackedBlock],
    g: &[f64],
    options: &SolveOptions,
    feas_probe: bool,
) -> CoreOutcome {
    let na = g.len();
    let nu: f64 = blocks.iter().map(|b| b.dim as f64).sum();
    let g_scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let c_scale = blocks.iter().fold(1.0f64, |m, b| m.max(frob(&b.c)));

    let mut y = vec![0.0f64; na];
    let mut xs: Vec<Array2<C64>> = Vec::with_capacity(blocks.len());
    let mut ss: Vec<Array2<C64>> = Vec::with_capacity(blocks.len());
    for b in blocks {
        let tau = frob(&b.c).max(1.0);
        xs.push(Array2::eye(b.dim).mapv(|z: C64| z * tau));
        ss.push(Array2::eye(b.dim).mapv(|z: C64| z * tau));
    }
    let tr_x0: f64 = xs.iter().map(|x| trace_re(x)).sum();

    let mut best_y = y.clone();
    let mut best_score = f64::INFINITY;
    let mut stall = 0usize;
    let mut iterations = 0usize;

    for iter in 0..options.max_iters {
        iterations = iter + 1;

        // Residuals.
        let vals: Vec<Array2<C64>> = blocks.iter().map(|b| eval_block(b, &y)).collect();
        let rds: Vec<Array2<C64>> = vals
            .iter()
            .zip(ss.iter())
            .map(|(v, s)| v - s)
            .collect();
        let rd_rel = blocks
            .iter()
            .zip(rds.iter())
            .map(|(b, rd)| frob(rd) / (1.0 + frob(&b.c)))
            .fold(0.0f64, f64::max);
        let mut astar_x = vec![0.0f64; na];
        for (b, x) in blocks.iter().zip(xs.iter()) {
            for (i, sh) in b.a.iter().enumerate() {
                astar_x[b.idx[i]] += sh.inner_dense(x);
            }
        }
        let rp_rel = (0..na)
            .map(|r| (-g[r] - astar_x[r]).abs())
            .fold(0.0f64, f64::max)
            / (1.0 + g_scale);
        let xs_inner: f64 = xs.iter().zip(ss.iter()).map(|(x, s)| inner(x, s)).sum();
        let mu = xs_inner / nu;
        let p_obj: f64 = g.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let d_obj: f64 = blocks.iter().zip(xs.iter()).map(|(b, x)| inner(&b.c, x)).sum();
        let gap_rel = (p_obj - d_obj).abs() / (1.0 + p_obj.abs() + d_obj.abs());

        if std::env::var_os("STARSWIPT_IPM_TRACE").is_some() {
            eprintln!(
                "ipm iter {iter}: rd {rd_rel:.2e} rp {rp_rel:.2e} gap {gap_rel:.2e} mu {mu:.2e} p {p_obj:.6e} d {d_obj:.6e}"
            );
        }
        let score = rd_rel.max(rp_rel).max(gap_rel);
        if score < best_score {
            best_score = score;
            best_y.copy_from_slice(&y);
        }
        if rd_rel <= options.feas_tol && rp_rel <= options.feas_tol && gap_rel <= options.gap_tol {
            return CoreOutcome { end: CoreEnd::Converged, y, iterations, best_score };
        }
        if !mu.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return CoreOutcome { end: CoreEnd::Diverged, y: best_y, iterations, best_score };
        }
        if y.iter().fold(0.0f64, |m, v| m.max(v.abs())) > 1e12 {
            return CoreOutcome { end: CoreEnd::Diverged, y: best_y, iterations, best_score };
        }
        // Dual improving ray heuristic: X blowing up with A*(X̂) ≈ 0 and
        // ⟨C, X̂⟩ < 0 indicates primal infeasibility.
        let tr_x: f64 = xs.iter().map(|x| trace_re(x)).sum();
        if tr_x > 1e8 * tr_x0 {
            let aval = astar_x.iter().fold(0.0f64, |m, v| m.max(v.abs())) / tr_x;
            let cval = d_obj / tr_x;
            let end = if aval <= 1e-6 && cval <= -1e-9 * c_scale {
                CoreEnd::HeuristicInfeasible
            } else {
                CoreEnd::Diverged
            };
            return CoreOutcome { end, y: best_y, iterations, best_score };
        }

        // Nesterov–Todd data per block.
        let mut nts: Vec<NtData> = Vec::with_capacity(blocks.len());
        let mut ok = true;
        for (x, s) in xs.iter().zip(ss.iter()) {
            match NtData::compute(x, s) {
                Some(nt) => nts.push(nt),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return CoreOutcome { end: CoreEnd::Diverged, y: best_y, iterations, best_score };
        }

        // Phase-I early exit: the slacks already certify strict feasibility
        // of the unshifted blocks (λ_min(V_k) ≥ λ_min(S_k) − ‖Rd_k‖ > t).
        if feas_probe {
            let t_cur = y[na - 1];
            let margin = nts
                .iter()
                .zip(rds.iter())
                .map(|(nt, rd)| nt.s_min - frob(rd))
                .fold(f64::INFINITY, f64::min);
            if margin - t_cur > 1e-10 * c_scale {
                return CoreOutcome { end: CoreEnd::Certified, y, iterations, best_score };
            }
        }

        // Schur matrix and shared right-hand-side pieces.
        let wrdw: Vec<Array2<C64>> = nts
            .iter()
            .zip(rds.iter())
            .map(|(nt, rd)| nt.w.dot(rd).dot(&nt.w))
            .collect();
        let mut m = Array2::<f64>::zeros((na, na));
        for (b, nt) in blocks.iter().zip(nts.iter()) {
            for (ri, a_r) in b.a.iter().enumerate() {
                let t = waw(&nt.w, a_r);
                for si in 0..=ri {
                    let v = b.a[si].inner_dense(&t);
                    m[[b.idx[ri], b.idx[si]]] += v;
                    if b.idx[si] != b.idx[ri] {
                        m[[b.idx[si], b.idx[ri]]] += v;
                    }
                }
            }
        }
        let Some(chol) = factor_spd(&mut m) else {
            return CoreOutcome { end: CoreEnd::Diverged, y: best_y, iterations, best_score };
        };
        let mut rhs_base = g.to_vec();
        for (b, z) in blocks.iter().zip(wrdw.iter()) {
            for (i, sh) in b.a.iter().enumerate() {
                rhs_base[b.idx[i]] -= sh.inner_dense(z);
            }
        }

        // Predictor (affine) direction: σ = 0, no corrector.
        let dy_aff = chol_solve(&chol, &rhs_base);
        let ds_aff: Vec<Array2<C64>> = blocks
            .iter()
            .zip(rds.iter())
            .map(|(b, rd)| a_apply(b, &dy_aff) + rd)
            .collect();
        let dx_aff: Vec<Array2<C64>> = nts
            .iter()
            .zip(xs.iter())
            .zip(ds_aff.iter())
            .map(|((nt, x), ds)| -x - nt.w.dot(ds).dot(&nt.w))
            .collect();
        let ap_aff = min_step(&nts, &dx_aff, StepOf::X);
        let ad_aff = min_step(&nts, &ds_aff, StepOf::S);
        let mut mu_aff = 0.0;
        for k in 0..blocks.len() {
            let xn = &xs[k] + &dx_aff[k].mapv(|z| z * ap_aff.min(1.0));
            let sn = &ss[k] + &ds_aff[k].mapv(|z| z * ad_aff.min(1.0));
            mu_aff += inner(&xn, &sn);
        }
        mu_aff = (mu_aff / nu).max(0.0);
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-8, 1.0);

        // Mehrotra corrector in the scaled frame. With G = W^{1/2} Hermitian
        // and λ = G S G (= G^{-1} X G^{-1} at the NT point), the scaled
        // centrality equation is ΔX̂ + ΔŜ = σμλ^{-1} − λ − L_λ^{-1}(ΔX̂∘ΔŜ)
        // where ∘ is the Jordan product and L_λ^{-1} solves λU + Uλ = 2V —
        // in λ's eigenbasis, U_ij = 2V_ij/(λ_i + λ_j). Using λ^{-1}V instead
        // overshoots by λ_max/λ_min on off-center iterates and stalls the
        // method. Mapping back, Corr = G·L_λ^{-1}(Hsym(ΔX̂_aff·ΔŜ_aff))·G.
        let corr: Vec<Array2<C64>> = nts
            .iter()
            .zip(ss.iter())
            .zip(dx_aff.iter().zip(ds_aff.iter()))
            .map(|((nt, s), (dx, ds))| {
                let lam = hsym(&nt.g.dot(s).dot(&nt.g));
                let (lv, lu) = eigh_lapack(&lam);
                let dxh = nt.ginv.dot(dx).dot(&nt.ginv);
                let dsh = nt.g.dot(ds).dot(&nt.g);
                let v = hsym(&dxh.dot(&dsh));
                let lu_h = lu.t().mapv(|z| z.conj());
                let mut vt = lu_h.dot(&v).dot(&lu);
                let floor = lv.iter().fold(0.0f64, |m, w| m.max(w.abs())).max(1e-300) * 1e-16;
                for i in 0..lv.len() {
                    for j in 0..lv.len() {
                        let den = (lv[i].max(floor) + lv[j].max(floor)).max(floor);
                        vt[[i, j]] *= 2.0 / den;
                    }
                }
                let u = lu.dot(&vt).dot(&lu_h);
                nt.g.dot(&hsym(&u)).dot(&nt.g)
            })
            .collect();

        let build_dirs = |sigma: f64,
                          corr: Option<&[Array2<C64>]>|
         -> (Vec<f64>, Vec<Array2<C64>>, Vec<Array2<C64>>) {
            let mut rhs = rhs_base.clone();
            for (b, nt) in blocks.iter().zip(nts.iter()) {
                for (i, sh) in b.a.iter().enumerate() {
                    rhs[b.idx[i]] += sigma * mu * sh.inner_dense(&nt.s_inv);
                }
            }
            if let Some(corr) = corr {
                for (b, cr) in blocks.iter().zip(corr.iter()) {
                    for (i, sh) in b.a.iter().enumerate() {
                        rhs[b.idx[i]] -= sh.inner_dense(cr);
                    }
                }
            }
            let dy = chol_solve(&chol, &rhs);
            let ds: Vec<Array2<C64>> = blocks
                .iter()
                .zip(rds.iter())
                .map(|(b, rd)| a_apply(b, &dy) + rd)
                .collect();
            let dx: Vec<Array2<C64>> = nts
                .iter()
                .zip(xs.iter())
                .zip(ds.iter().enumerate())
                .map(|((nt, x), (k, dsk))| {
                    let mut out = &nt.s_inv.mapv(|z| z * (sigma * mu)) - x;
                    out = out - nt.w.dot(dsk).dot(&nt.w);
                    if let Some(corr) = corr {
                        out = out - &corr[k];
                    }
                    out
                })
                .collect();
            (dy, dx, ds)
        };

        let (mut dy, mut dx, mut ds) = build_dirs(sigma, Some(&corr));
        let mut ap = 1.0f64.min(0.98 * min_step(&nts, &dx, StepOf::X));
        let mut ad = 1.0f64.min(0.98 * min_step(&nts, &ds, StepOf::S));
        if ap.min(ad) < 0.2 * ap_aff.min(ad_aff).min(1.0) {
            // The corrector shortened the step well below what the plain
            // predictor allows; it is hurting rather than helping, so retry
            // the same target without it.
            let (dy2, dx2, ds2) = build_dirs(sigma, None);
            let ap2 = 1.0f64.min(0.98 * min_step(&nts, &dx2, StepOf::X));
            let ad2 = 1.0f64.min(0.98 * min_step(&nts, &ds2, StepOf::S));
            if ap2.min(ad2) > ap.min(ad) {
                (dy, dx, ds, ap, ad) = (dy2, dx2, ds2, ap2, ad2);
            }
        }
        if ap.min(ad) < 1e-10 {
            // Still blocked; fall back to a plain centering step.
            let (dy2, dx2, ds2) = build_dirs(0.8, None);
            dy = dy2;
            dx = dx2;
            ds = ds2;
            ap = 1.0f64.min(0.98 * min_step(&nts, &dx, StepOf::X));
            ad = 1.0f64.min(0.98 * min_step(&nts, &ds, StepOf::S));
        }
        if ap.min(ad) < 1e-10 {
            stall += 1;
            if stall >= 3 {
                return CoreOutcome { end: CoreEnd::Diverged, y: best_y, iterations, best_score };
            }
        } else {
            stall = 0;
        }

        if std::env::var_os("STARSWIPT_IPM_TRACE").is_some() {
            eprintln!(
                "        sigma {sigma:.3e} mu_aff {mu_aff:.3e} aff steps ({:.3e},{:.3e}) steps ({ap:.3e},{ad:.3e})",
                ap_aff.min(1.0),
                ad_aff.min(1.0),
            );
        }
        for (v, d) in y.iter_mut().zip(dy.iter()) {
            *v += ad * d;
        }
        for k in 0..blocks.len() {
            ss[k] = hsym(&(&ss[k] + &ds[k].mapv(|z| z * ad)));
            xs[k] = hsym(&(&xs[k] + &dx[k].mapv(|z| z * ap)));
        }
    }

    CoreOutcome { end: CoreEnd::Cap, y: best_y, iterations, best_score }
}

// ---------------------------------------------------------------------------
// Phase I
// ---------------------------------------------------------------------------

enum Phase1 {
    Infeasible,
    Feasible,
    Unknown,
}

/// Solves `maximize −t  s.t.  V_k(y) + t·I ⪰ 0`; a strictly positive optimum
/// certifies infeasibility of the original blocks, and an early exit fires
/// as soon as an iterate certifies strict feasibility.
fn phase_one(blocks: &[PackedBlock], options: &SolveOptions) -> Phase1 {
    let na = blocks.first().map(|_| {
        blocks
            .iter()
            .flat_map(|b| b.idx.iter().copied())
            .max()
            .map_or(0, |m| m + 1)
    });
    let Some(na) = na else { return Phase1::Feasible };
    let t_idx = na;
    let ext: Vec<PackedBlock> = blocks
        .iter()
        .map(|b| {
            let mut idx = b.idx.clone();
            let mut a = b.a.clone();
            let mut eye = SparseHerm::default();
            for p in 0..b.dim {
                eye.add(p, p, C64::new(1.0, 0.0));
            }
            idx.push(t_idx);
            a.push(eye);
            PackedBlock { dim: b.dim, c: b.c.clone(), idx, a }
        })
        .collect();
    let mut g = vec![0.0; na + 1];
    g[t_idx] = -1.0;
    let opts = SolveOptions { max_iters: options.max_iters.max(60), ..options.clone() };
    let core = solve_core(&ext, &g, &opts, true);
    let c_scale = blocks.iter().fold(1.0f64, |m, b| m.max(frob(&b.c)));
    match core.end {
        CoreEnd::Certified => Phase1::Feasible,
        CoreEnd::Converged => {
            let t_star = core.y[t_idx];
            if t_star > 1e-7 * c_scale {
                Phase1::Infeasible
            } else if t_star < -1e-10 * c_scale {
                Phase1::Feasible
            } else {
                Phase1::Unknown
            }
        }
        _ => Phase1::Unknown,
    }
}

// ---------------------------------------------------------------------------
// Per-block linear algebra
// ---------------------------------------------------------------------------

struct NtData {
    w: Array2<C64>,
    g: Array2<C64>,
    ginv: Array2<C64>,
    s_inv: Array2<C64>,
    x_invhalf: Array2<C64>,
    s_invhalf: Array2<C64>,
    s_min: f64,
}

impl NtData {
    /// `W = S^{-1/2}(S^{1/2} X S^{1/2})^{1/2} S^{-1/2}`, plus the matrix
    /// powers the step computation needs. Returns `None` when an iterate has
    /// degenerated numerically (non-finite entries).
    fn compute(x: &Array2<C64>, s: &Array2<C64>) -> Option<Self> {
        if x.iter().chain(s.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        let (sv, su) = eigh_lapack(s);
        let s_half = herm_pow(&sv, &su, 0.5);
        let s_invhalf = herm_pow(&sv, &su, -0.5);
        let s_inv = herm_pow(&sv, &su, -1.0);
        let t = s_half.dot(x).dot(&s_half);
        let (tv, tu) = eigh_lapack(&hsym(&t));
        let t_half = herm_pow(&tv, &tu, 0.5);
        let w = hsym(&s_invhalf.dot(&t_half).dot(&s_invhalf));
        let (wv, wu) = eigh_lapack(&w);
        let g = herm_pow(&wv, &wu, 0.5);
        let ginv = herm_pow(&wv, &wu, -0.5);
        let (xv, xu) = eigh_lapack(x);
        let x_invhalf = herm_pow(&xv, &xu, -0.5);
        Some(NtData { w, g, ginv, s_inv, x_invhalf, s_invhalf, s_min: sv[0] })
    }
}

enum StepOf {
    X,
    S,
}

/// Longest step `ᾱ` with `P + ᾱ·ΔP ⪰ 0` over all blocks, computed through
/// `λ_min(P^{-1/2} ΔP P^{-1/2})`.
fn min_step(nts: &[NtData], dps: &[Array2<C64>], which: StepOf) -> f64 {
    let mut alpha = f64::INFINITY;
    for (nt, dp) in nts.iter().zip(dps.iter()) {
        let ih = match which {
            StepOf::X => &nt.x_invhalf,
            StepOf::S => &nt.s_invhalf,
        };
        let m = hsym(&ih.dot(dp).dot(ih));
        let (vals, _) = eigh_lapack(&m);
        let lmin = vals[0];
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

/// `vecs · diag(clamped(vals)^p) · vecs^H`; eigenvalues are floored at a
/// tiny positive multiple of the largest magnitude so negative powers stay
/// finite near the boundary of the cone.
fn herm_pow(vals: &Array1<f64>, vecs: &Array2<C64>, p: f64) -> Array2<C64> {
    let n = vals.len();
    let floor = vals
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300)
        * 1e-16;
    let mut scaled = vecs.clone();
    for j in 0..n {
        let f = vals[j].max(floor).powf(p);
        for i in 0..n {
            scaled[[i, j]] *= f;
        }
    }
    let vecs_h = vecs.t().mapv(|z| z.conj());
    scaled.dot(&vecs_h)
}

/// `W·A·W` for sparse Hermitian `A`: rank-wise outer products of the columns
/// of `W` when `A` is sparse enough, two dense products otherwise.
fn waw(w: &Array2<C64>, a: &SparseHerm) -> Array2<C64> {
    let dim = w.nrows();
    if a.entries.len() * dim > 2 * dim * dim {
        return w.dot(&a.to_dense(dim)).dot(w);
    }
    let mut t: Array2<C64> = Array2::zeros((dim, dim));
    for &(p, q, v) in &a.entries {
        let (p, q) = (p as usize, q as usize);
        if p == q {
            let v = C64::new(v.re, 0.0);
            for i in 0..dim {
                let wi = w[[i, p]] * v;
                for j in 0..dim {
                    t[[i, j]] += wi * w[[j, p]].conj();
                }
            }
        } else {
            for i in 0..dim {
                let wi = w[[i, p]] * v;
                let wiq = w[[i, q]] * v.conj();
                for j in 0..dim {
                    t[[i, j]] += wi * w[[j, q]].conj() + wiq * w[[j, p]].conj();
                }
            }
        }
    }
    t
}

fn eval_block(b: &PackedBlock, y: &[f64]) -> Array2<C64> {
    let mut acc = b.c.clone();
    for (i, sh) in b.a.iter().enumerate() {
        let w = y[b.idx[i]];
        if w != 0.0 {
            sh.add_into(&mut acc, w);
        }
    }
    acc
}

fn a_apply(b: &PackedBlock, dy: &[f64]) -> Array2<C64> {
    let mut acc: Array2<C64> = Array2::zeros((b.dim, b.dim));
    for (i, sh) in b.a.iter().enumerate() {
        let w = dy[b.idx[i]];
        if w != 0.0 {
            sh.add_into(&mut acc, w);
        }
    }
    acc
}

fn hsym(a: &Array2<C64>) -> Array2<C64> {
    let ah = a.t().mapv(|z| z.conj());
    (a + &ah).mapv(|z| z * 0.5)
}

fn frob(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn trace_re(a: &Array2<C64>) -> f64 {
    a.diag().iter().map(|z| z.re).sum()
}

/// `Re Tr(A^H B)` for Hermitian `A`, `B`.
fn inner(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Cholesky factorization with escalating diagonal regularization; consumes
/// the matrix buffer. Returns the lower factor.
fn factor_spd(m: &mut Array2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    let diag_max = (0..n).map(|i| m[[i, i]].abs()).fold(1e-300, f64::max);
    let mut reg = 0.0;
    for attempt in 0..5 {
        if attempt > 0 {
            let bump = diag_max * 1e-12 * 100f64.powi(attempt - 1) - reg;
            for i in 0..n {
                m[[i, i]] += bump;
            }
            reg += bump;
        }
        if let Ok(l) = m.cholesky(UPLO::Lower) {
            return Some(l);
        }
    }
    None
}

/// Solves `L L^T x = b` by forward and back substitution.
fn chol_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut z = b.to_vec();
    for i in 0..n {
        let mut v = z[i];
        for j in 0..i {
            v -= l[[i, j]] * z[j];
        }
        z[i] = v / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        for j in i + 1..n {
            v -= l[[j, i]] * z[j];
        }
        z[i] = v / l[[i, i]];
    }
    z
}
