//! Lowering from the declarative [`SdpProblem`] to the block form the
//! interior-point backend consumes.
//!
//! The pass flattens every variable into real coordinates (per Hermitian
//! matrix: the `d` diagonal entries, then `(Re, Im)` pairs of the strict
//! upper triangle in lexicographic order), eliminates scalar equalities by
//! greedy pivoting with chain resolution, expands block-arrow LMIs into
//! per-clique PSD blocks with internally allocated corner-split scalars, and
//! emits every remaining constraint as one PSD block over the reduced
//! coordinates (scalar inequalities and sign-restricted scalars become 1×1
//! blocks).

use std::collections::HashMap;

use ndarray::prelude::*;

use super::ipm::IpmBlock;
use super::{
    mat_coord_count, split_local_coord, write_local_coord, ArrowLmi, ConicError, Constraint,
    DenseLmi, LinExpr, SdpProblem, SparseHerm, VarRef,
};
use crate::numerics::{C64, HermitianMatrix};
use crate::record::MatrixRecord;

/// Global real-coordinate layout: matrix variables first (each occupying
/// `d²` coordinates), then declared scalars, then internal corner-split
/// scalars allocated while expanding block-arrow constraints.
#[derive(Debug, Clone)]
pub(crate) struct CoordSpace {
    mat_offsets: Vec<usize>,
    mat_dims: Vec<usize>,
    scal_offset: usize,
    n_scal: usize,
    n_splits: usize,
}

impl CoordSpace {
    fn build(problem: &SdpProblem, n_splits: usize) -> Self {
        let mat_dims = problem.mat_var_dims();
        let mut mat_offsets = Vec::with_capacity(mat_dims.len());
        let mut offset = 0;
        for &d in &mat_dims {
            mat_offsets.push(offset);
            offset += mat_coord_count(d);
        }
        Self {
            mat_offsets,
            mat_dims,
            scal_offset: offset,
            n_scal: problem.scal_var_count(),
            n_splits,
        }
    }

    pub fn total(&self) -> usize {
        self.scal_offset + self.n_scal + self.n_splits
    }

    pub fn mat_coord(&self, var: usize, local: usize) -> usize {
        self.mat_offsets[var] + local
    }

    pub fn scal_coord(&self, var: usize) -> usize {
        self.scal_offset + var
    }

    pub fn split_coord(&self, split: usize) -> usize {
        self.scal_offset + self.n_scal + split
    }

    pub fn var_coord(&self, var: VarRef, local: usize) -> usize {
        match var {
            VarRef::Mat(v) => self.mat_coord(v.0, local),
            VarRef::Scal(v) => self.scal_coord(v.0),
        }
    }
}

/// Where a full coordinate went after equality elimination.
#[derive(Debug, Clone)]
enum Sub {
    /// Kept; value is the reduced index.
    Free(usize),
    /// Pivoted away; value is an affine function of reduced coordinates.
    Fixed { constant: f64, terms: Vec<(usize, f64)> },
}

/// The lowered problem plus enough bookkeeping to map solver iterates back
/// to variable assignments.
#[derive(Debug)]
pub(crate) struct Lowered {
    pub blocks: Vec<IpmBlock>,
    /// Objective weights over reduced coordinates (maximized).
    pub objective: Vec<f64>,
    subs: Vec<Sub>,
    space: CoordSpace,
}

impl Lowered {
    /// Builds a full variable assignment from reduced coordinates; internal
    /// split coordinates are dropped.
    pub fn recover_assignment(&self, problem: &SdpProblem, y: &[f64]) -> super::Assignment {
        let read = |coord: usize| -> f64 {
            match &self.subs[coord] {
                Sub::Free(r) => y.get(*r).copied().unwrap_or(0.0),
                Sub::Fixed { constant, terms } => {
                    let mut v = *constant;
                    for &(r, w) in terms {
                        v += w * y.get(r).copied().unwrap_or(0.0);
                    }
                    v
                }
            }
        };
        let mut out = problem.zero_assignment();
        for (var, &dim) in self.space.mat_dims.iter().enumerate() {
            let mut m: Array2<C64> = Array2::zeros((dim, dim));
            for local in 0..mat_coord_count(dim) {
                write_local_coord(&mut m, dim, local, read(self.space.mat_coord(var, local)), true);
            }
            out.set_mat(super::MatVarRef(var), HermitianMatrix::symmetrize(m));
        }
        for s in 0..self.space.n_scal {
            out.set_scal(super::ScalVarRef(s), read(self.space.scal_coord(s)));
        }
        out
    }
}

/// A constraint block over full coordinates, before elimination.
struct RawBlock {
    dim: usize,
    constant: SparseHerm,
    coeffs: Vec<(usize, SparseHerm)>,
}

/// Lowers the problem: flatten, eliminate equalities, expand structure,
/// compose, and assemble the backend block list and objective.
pub(crate) fn lower(problem: &SdpProblem) -> Result<Lowered, ConicError> {
    // Count internal corner-split scalars needed by arrow constraints.
    let mut n_splits = 0;
    for c in problem.constraints() {
        if let Constraint::ArrowLmi(lmi) = c {
            let cliques: usize = lmi.groups.iter().map(|g| g.cliques.len()).sum();
            n_splits += cliques.saturating_sub(1);
        }
    }
    let space = CoordSpace::build(problem, n_splits);

    // Collect equality rows over full coordinates.
    let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for c in problem.constraints() {
        if let Constraint::ScalarEq(expr, rhs) = c {
            let (coeffs, constant) = flatten_expr(&space, expr);
            eq_rows.push((coeffs, rhs - constant));
        }
    }
    let subs = eliminate(&space, eq_rows)?;
    let n_reduced = subs
        .iter()
        .filter(|s| matches!(s, Sub::Free(_)))
        .count();

    // Build raw blocks in declaration order, then sign-restricted scalars.
    let mut raw: Vec<RawBlock> = Vec::new();
    let mut next_split = 0;
    for c in problem.constraints() {
        match c {
            Constraint::DenseLmi(lmi) => raw.push(raw_from_dense(&space, lmi)),
            Constraint::ArrowLmi(lmi) => {
                expand_arrow(&space, lmi, &mut next_split, &mut raw);
            }
            Constraint::ScalarIneq(expr, rhs) => {
                let (coeffs, constant) = flatten_expr(&space, expr);
                let mut block = RawBlock {
                    dim: 1,
                    constant: SparseHerm::default(),
                    coeffs: Vec::with_capacity(coeffs.len()),
                };
                block.constant.add(0, 0, C64::new(rhs - constant, 0.0));
                for (coord, w) in coeffs {
                    let mut sh = SparseHerm::default();
                    sh.add(0, 0, C64::new(-w, 0.0));
                    block.coeffs.push((coord, sh));
                }
                raw.push(block);
            }
            Constraint::PsdVar(var) => {
                let dim = space.mat_dims[var.0];
                let mut coeffs = Vec::with_capacity(mat_coord_count(dim));
                for local in 0..mat_coord_count(dim) {
                    let mut basis: Array2<C64> = Array2::zeros((dim, dim));
                    write_local_coord(&mut basis, dim, local, 1.0, false);
                    coeffs.push((space.mat_coord(var.0, local), SparseHerm::from_dense(&basis, 0.0)));
                }
                raw.push(RawBlock { dim, constant: SparseHerm::default(), coeffs });
            }
            Constraint::ScalarEq(..) => {}
        }
    }
    for (s, nonneg) in problem.nonneg_flags().into_iter().enumerate() {
        if nonneg {
            let mut sh = SparseHerm::default();
            sh.add(0, 0, C64::new(1.0, 0.0));
            raw.push(RawBlock {
                dim: 1,
                constant: SparseHerm::default(),
                coeffs: vec![(space.scal_coord(s), sh)],
            });
        }
    }
    debug_assert_eq!(next_split, n_splits);

    // Compose through the substitutions into reduced coordinates.
    let blocks = raw.into_iter().map(|b| compose_block(b, &subs)).collect();

    // Objective over reduced coordinates. The constant offset is dropped:
    // the caller reports objective values by evaluating the expression at
    // the recovered assignment.
    let (obj_coeffs, _) = flatten_expr(&space, problem.objective());
    let mut g = vec![0.0; n_reduced];
    for (coord, w) in obj_coeffs {
        match &subs[coord] {
            Sub::Free(r) => g[*r] += w,
            Sub::Fixed { terms, .. } => {
                for &(r, tw) in terms {
                    g[r] += w * tw;
                }
            }
        }
    }

    Ok(Lowered { blocks, objective: g, subs, space })
}

/// Flattens a linear functional to `(Σ coeff·x_coord, constant)` over full
/// coordinates. Inner products expand as
/// `⟨A, X⟩ = Σ_p A_pp·X_pp + Σ_{p<q} 2(Re A_pq·Re X_pq + Im A_pq·Im X_pq)`.
fn flatten_expr(space: &CoordSpace, expr: &LinExpr) -> (Vec<(usize, f64)>, f64) {
    let mut acc: HashMap<usize, f64> = HashMap::new();
    for (var, coeff) in &expr.mat_terms {
        let dim = space.mat_dims[var.0];
        let a = coeff.as_array();
        for local in 0..mat_coord_count(dim) {
            let (p, q, im) = split_local_coord(dim, local);
            let w = if p == q {
                a[[p, p]].re
            } else if im {
                2.0 * a[[p, q]].im
            } else {
                2.0 * a[[p, q]].re
            };
            if w != 0.0 {
                *acc.entry(space.mat_coord(var.0, local)).or_insert(0.0) += w;
            }
        }
    }
    for (var, w) in &expr.scal_terms {
        *acc.entry(space.scal_coord(var.0)).or_insert(0.0) += w;
    }
    let mut coeffs: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
    coeffs.sort_by_key(|&(c, _)| c);
    (coeffs, expr.constant)
}

/// Greedy equality elimination. Each row is reduced against the pivots found
/// so far; a surviving coordinate of largest magnitude becomes the pivot of
/// an affine definition, an all-zero row with zero residual is dropped as
/// redundant, and a nonzero residual reports inconsistency. Definitions are
/// then chain-resolved so every kept definition refers to free coordinates
/// only.
fn eliminate(
    space: &CoordSpace,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
) -> Result<Vec<Sub>, ConicError> {
    struct Def {
        constant: f64,
        terms: Vec<(usize, f64)>,
    }
    let mut defs: Vec<(usize, Def)> = Vec::new();
    let mut pivot_of: HashMap<usize, usize> = HashMap::new();

    for (coeffs, rhs) in rows {
        let row_scale = coeffs
            .iter()
            .map(|&(_, w)| w.abs())
            .fold(rhs.abs().max(1.0), f64::max);
        let mut row: HashMap<usize, f64> = coeffs.into_iter().collect();
        let mut rhs = rhs;
        // Substitute pivoted coordinates until none remain in the row.
        loop {
            let hit = row
                .keys()
                .filter(|c| pivot_of.contains_key(c))
                .min()
                .copied();
            let Some(coord) = hit else { break };
            let beta = row.remove(&coord).unwrap();
            let def_idx = pivot_of[&coord];
            let def = &defs[def_idx].1;
            rhs -= beta * def.constant;
            for &(c, w) in &def.terms {
                let entry = row.entry(c).or_insert(0.0);
                *entry += beta * w;
                if entry.abs() <= 1e-14 * row_scale {
                    row.remove(&c);
                }
            }
        }
        row.retain(|_, w| w.abs() > 1e-12 * row_scale);
        if row.is_empty() {
            if rhs.abs() > 1e-9 * row_scale {
                return Err(ConicError::InconsistentEqualities { residual: rhs.abs() });
            }
            continue; // redundant row
        }
        // Pivot on the largest-magnitude coefficient for stability.
        let (&pivot, &pw) = row
            .iter()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap().then(b.0.cmp(a.0)))
            .unwrap();
        let mut terms: Vec<(usize, f64)> = row
            .iter()
            .filter(|&(&c, _)| c != pivot)
            .map(|(&c, &w)| (c, -w / pw))
            .collect();
        terms.sort_by_key(|&(c, _)| c);
        defs.push((pivot, Def { constant: rhs / pw, terms }));
        pivot_of.insert(pivot, defs.len() - 1);
    }

    // Chain resolution: a definition may refer to coordinates that a later
    // row pivoted. Later definitions never refer to earlier pivots, so
    // resolving in reverse creation order terminates in one pass.
    for i in (0..defs.len()).rev() {
        loop {
            let hit = defs[i]
                .1
                .terms
                .iter()
                .find(|(c, _)| pivot_of.contains_key(c))
                .map(|&(c, w)| (c, w));
            let Some((coord, weight)) = hit else { break };
            let src_idx = pivot_of[&coord];
            debug_assert!(src_idx > i, "definitions must only refer forward");
            let (src_const, src_terms) = {
                let d = &defs[src_idx].1;
                (d.constant, d.terms.clone())
            };
            let def = &mut defs[i].1;
            def.terms.retain(|&(c, _)| c != coord);
            def.constant += weight * src_const;
            for (c, w) in src_terms {
                match def.terms.iter_mut().find(|(tc, _)| *tc == c) {
                    Some(t) => t.1 += weight * w,
                    None => def.terms.push((c, weight * w)),
                }
            }
            def.terms.retain(|&(_, w)| w.abs() > 1e-300);
            def.terms.sort_by_key(|&(c, _)| c);
        }
    }

    // Number the free coordinates and translate definitions.
    let total = space.total();
    let mut subs: Vec<Sub> = Vec::with_capacity(total);
    let mut reduced_of: HashMap<usize, usize> = HashMap::new();
    let mut next = 0;
    for coord in 0..total {
        if pivot_of.contains_key(&coord) {
            subs.push(Sub::Free(usize::MAX)); // placeholder, patched below
        } else {
            subs.push(Sub::Free(next));
            reduced_of.insert(coord, next);
            next += 1;
        }
    }
    for (pivot, def) in defs {
        let terms = def
            .terms
            .iter()
            .map(|&(c, w)| (reduced_of[&c], w))
            .collect();
        subs[pivot] = Sub::Fixed { constant: def.constant, terms };
    }
    Ok(subs)
}

fn raw_from_dense(space: &CoordSpace, lmi: &DenseLmi) -> RawBlock {
    RawBlock {
        dim: lmi.dim,
        constant: lmi.constant.clone(),
        coeffs: lmi
            .coeffs
            .iter()
            .map(|(var, local, sh)| (space.var_coord(*var, *local), sh.clone()))
            .collect(),
    }
}

/// Expands one block-arrow LMI into per-clique PSD blocks.
///
/// The full constraint `[[blkdiag(scale_j·Core_g + λ_g I), border], [·, corner]] ⪰ 0`
/// is equivalent to: for every clique, `[[scale_j·Core_g + λ_g I, Core_g·w_j], [·, slot_j]] ⪰ 0`
/// where the corner slots satisfy `Σ slot_j = corner`. The first clique's
/// slot carries `corner − Σ splits`; every other clique carries one free
/// split scalar. (One direction: summing zero-padded cliques reproduces the
/// full block. Converse: Schur complements give feasible slot values.)
fn expand_arrow(
    space: &CoordSpace,
    lmi: &ArrowLmi,
    next_split: &mut usize,
    raw: &mut Vec<RawBlock>,
) {
    let total_cliques: usize = lmi.groups.iter().map(|g| g.cliques.len()).sum();
    let split_range: Vec<usize> = (0..total_cliques.saturating_sub(1))
        .map(|k| {
            let c = space.split_coord(*next_split + k);
            c
        })
        .collect();
    *next_split += total_cliques.saturating_sub(1);

    let (corner_coeffs, corner_constant) = flatten_expr(space, &lmi.corner);

    let mut clique_index = 0;
    for group in &lmi.groups {
        let d = group.core.dim;
        for clique in &group.cliques {
            let mut block = RawBlock {
                dim: d + 1,
                constant: SparseHerm::default(),
                coeffs: Vec::new(),
            };
            // Core map terms: per real coordinate of each referenced matrix
            // variable, the top-left gets `clique.scale·C_c` and the border
            // column gets `C_c·w`; conjugated terms flip the sign of
            // imaginary coordinates.
            for term in &group.core.terms {
                let dim_var = space.mat_dims[term.var.0];
                debug_assert_eq!(dim_var, d);
                for local in 0..mat_coord_count(d) {
                    let (p, q, im) = split_local_coord(d, local);
                    let coord = space.mat_coord(term.var.0, local);
                    let mut sh = SparseHerm::default();
                    let w = &clique.border_vec;
                    if p == q {
                        // C = s·E_pp
                        sh.add(p, p, C64::new(term.scale * clique.scale, 0.0));
                        push_border(&mut sh, p, d, w[p] * term.scale);
                    } else if !im {
                        // C = s·(E_pq + E_qp)
                        sh.add(p, q, C64::new(term.scale * clique.scale, 0.0));
                        push_border(&mut sh, p, d, w[q] * term.scale);
                        push_border(&mut sh, q, d, w[p] * term.scale);
                    } else {
                        // C = ±s·(i·E_pq − i·E_qp); conjugation flips sign.
                        let sign = if term.conj { -1.0 } else { 1.0 };
                        let iu = C64::new(0.0, sign * term.scale);
                        sh.add(p, q, iu * clique.scale);
                        push_border(&mut sh, p, d, iu * w[q]);
                        push_border(&mut sh, q, d, -iu * w[p]);
                    }
                    sh.normalize(0.0);
                    if !sh.is_empty() {
                        block.coeffs.push((coord, sh));
                    }
                }
            }
            if let Some(constant) = &group.core.constant {
                for p in 0..d {
                    for q in p..d {
                        let v = constant[[p, q]];
                        if v.norm() > 0.0 {
                            block.constant.add(p, q, v * clique.scale);
                        }
                    }
                }
                let border = constant.dot(&clique.border_vec);
                for p in 0..d {
                    if border[p].norm() > 0.0 {
                        block.constant.add(p, d, border[p]);
                    }
                }
            }
            // Ball multiplier on the diagonal block.
            if let Some(lambda) = group.lambda {
                let mut sh = SparseHerm::default();
                for p in 0..d {
                    sh.add(p, p, C64::new(1.0, 0.0));
                }
                block.coeffs.push((space.scal_coord(lambda.0), sh));
            }
            // Corner slot.
            if clique_index == 0 {
                block.constant.add(d, d, C64::new(corner_constant, 0.0));
                for &(coord, w) in &corner_coeffs {
                    let mut sh = SparseHerm::default();
                    sh.add(d, d, C64::new(w, 0.0));
                    block.coeffs.push((coord, sh));
                }
                for &split in &split_range {
                    let mut sh = SparseHerm::default();
                    sh.add(d, d, C64::new(-1.0, 0.0));
                    block.coeffs.push((split, sh));
                }
            } else {
                let mut sh = SparseHerm::default();
                sh.add(d, d, C64::new(1.0, 0.0));
                block.coeffs.push((split_range[clique_index - 1], sh));
            }
            block.constant.normalize(0.0);
            raw.push(block);
            clique_index += 1;
        }
    }
}

fn push_border(sh: &mut SparseHerm, row: usize, corner: usize, value: C64) {
    if value.norm() > 0.0 {
        sh.add(row, corner, value);
    }
}

/// Rewrites a raw block over full coordinates into reduced coordinates,
/// merging coefficient blocks of coordinates that eliminate to the same
/// reduced coordinate and folding fixed coordinates into the constant.
fn compose_block(block: RawBlock, subs: &[Sub]) -> IpmBlock {
    let dim = block.dim;
    let mut const_acc: HashMap<(u16, u16), C64> = HashMap::new();
    for &(p, q, v) in &block.constant.entries {
        *const_acc.entry((p, q)).or_insert(C64::new(0.0, 0.0)) += v;
    }
    let mut acc: HashMap<usize, HashMap<(u16, u16), C64>> = HashMap::new();
    let mut scale = block
        .constant
        .entries
        .iter()
        .map(|e| e.2.norm())
        .fold(0.0, f64::max);
    for (coord, sh) in &block.coeffs {
        scale = scale.max(sh.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max));
        match &subs[*coord] {
            Sub::Free(r) => merge_entries(acc.entry(*r).or_default(), sh, 1.0),
            Sub::Fixed { constant, terms } => {
                if *constant != 0.0 {
                    merge_entries(&mut const_acc, sh, *constant);
                }
                for &(r, w) in terms {
                    merge_entries(acc.entry(r).or_default(), sh, w);
                }
            }
        }
    }
    let drop_tol = 1e-14 * scale;
    let mut constant: Array2<C64> = Array2::zeros((dim, dim));
    for (&(p, q), &v) in &const_acc {
        if v.norm() > drop_tol {
            let (p, q) = (p as usize, q as usize);
            if p == q {
                constant[[p, p]] = C64::new(v.re, 0.0);
            } else {
                constant[[p, q]] = v;
                constant[[q, p]] = v.conj();
            }
        }
    }
    let mut coeffs: Vec<(usize, SparseHerm)> = Vec::with_capacity(acc.len());
    for (r, entries) in acc {
        let mut sh = SparseHerm {
            entries: entries
                .into_iter()
                .filter(|(_, v)| v.norm() > drop_tol)
                .map(|((p, q), v)| (p, q, v))
                .collect(),
        };
        sh.normalize(0.0);
        if !sh.is_empty() {
            coeffs.push((r, sh));
        }
    }
    coeffs.sort_by_key(|&(r, _)| r);
    IpmBlock { dim, constant, coeffs }
}

fn merge_entries(acc: &mut HashMap<(u16, u16), C64>, sh: &SparseHerm, scale: f64) {
    for &(p, q, v) in &sh.entries {
        *acc.entry((p, q)).or_insert(C64::new(0.0, 0.0)) += v * scale;
    }
}

// ---------------------------------------------------------------------------
// Evaluation helpers shared with the problem layer
// ---------------------------------------------------------------------------

/// Reads one real coordinate of a Hermitian matrix value.
fn read_local_coord(m: &ArrayView2<C64>, dim: usize, local: usize) -> f64 {
    let (p, q, im) = split_local_coord(dim, local);
    if p == q {
        m[[p, p]].re
    } else if im {
        m[[p, q]].im
    } else {
        m[[p, q]].re
    }
}

/// Evaluates a probed dense LMI at an assignment.
pub(crate) fn eval_dense_lmi(
    problem: &SdpProblem,
    lmi: &DenseLmi,
    point: &super::Assignment,
) -> HermitianMatrix {
    let mut acc = lmi.constant.to_dense(lmi.dim);
    for (var, local, sh) in &lmi.coeffs {
        let value = match var {
            VarRef::Scal(v) => point.scal(*v),
            VarRef::Mat(v) => {
                let dim = problem.mat_dim(*v);
                read_local_coord(&point.mat(*v).as_array().view(), dim, *local)
            }
        };
        if value != 0.0 {
            sh.add_into(&mut acc, value);
        }
    }
    HermitianMatrix::symmetrize(acc)
}

/// Assembles the full (pre-decomposition) block of an arrow LMI at an
/// assignment: diagonal blocks `scale_j·Core + λI`, border `Core·w_j`, and
/// the affine corner. The result is unitarily similar to the originally
/// derived constraint block, so its eigenvalues — and hence any PSD
/// violation — match exactly.
pub(crate) fn eval_arrow_full(lmi: &ArrowLmi, point: &super::Assignment) -> HermitianMatrix {
    let n: usize = lmi
        .groups
        .iter()
        .map(|g| g.core.dim * g.cliques.len())
        .sum();
    let mut full: Array2<C64> = Array2::zeros((n + 1, n + 1));
    let mut offset = 0;
    for group in &lmi.groups {
        let d = group.core.dim;
        let core = group.core.eval(point);
        let lambda = group.lambda.map(|l| point.scal(l)).unwrap_or(0.0);
        for clique in &group.cliques {
            for p in 0..d {
                for q in 0..d {
                    full[[offset + p, offset + q]] = core[[p, q]] * clique.scale;
                }
                full[[offset + p, offset + p]] += C64::new(lambda, 0.0);
            }
            let border = core.dot(&clique.border_vec);
            for p in 0..d {
                full[[offset + p, n]] = border[p];
                full[[n, offset + p]] = border[p].conj();
            }
            offset += d;
        }
    }
    full[[n, n]] = C64::new(lmi.corner.eval(point), 0.0);
    HermitianMatrix::symmetrize(full)
}

/// Densifies an arrow LMI for the JSON dump by finite-differencing the exact
/// affine evaluator over every coordinate of the referenced variables.
pub(crate) fn dump_arrow_dense(
    problem: &SdpProblem,
    lmi: &ArrowLmi,
) -> (usize, MatrixRecord, Vec<(String, usize, MatrixRecord)>) {
    let zero = problem.zero_assignment();
    let constant = eval_arrow_full(lmi, &zero);
    let dim = constant.dim();

    let mut refs: Vec<VarRef> = Vec::new();
    for group in &lmi.groups {
        for term in &group.core.terms {
            let r = VarRef::Mat(term.var);
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
        if let Some(lambda) = group.lambda {
            let r = VarRef::Scal(lambda);
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
    }
    for (var, _) in &lmi.corner.mat_terms {
        let r = VarRef::Mat(*var);
        if !refs.contains(&r) {
            refs.push(r);
        }
    }
    for (var, _) in &lmi.corner.scal_terms {
        let r = VarRef::Scal(*var);
        if !refs.contains(&r) {
            refs.push(r);
        }
    }

    let mut coeffs = Vec::new();
    for var in refs {
        let (name, locals) = match var {
            VarRef::Mat(v) => (problem.mat_var_name(v), mat_coord_count(problem.mat_dim(v))),
            VarRef::Scal(v) => (problem.scal_var_name(v), 1),
        };
        for local in 0..locals {
            let mut at_one = zero.clone();
            match var {
                VarRef::Scal(v) => at_one.set_scal(v, 1.0),
                VarRef::Mat(v) => {
                    let d = problem.mat_dim(v);
                    let mut m: Array2<C64> = Array2::zeros((d, d));
                    write_local_coord(&mut m, d, local, 1.0, false);
                    at_one.set_mat(v, HermitianMatrix::symmetrize(m));
                }
            }
            let shifted = eval_arrow_full(lmi, &at_one);
            let diff = shifted.as_array() - constant.as_array();
            if diff.iter().any(|z| z.norm() > 0.0) {
                coeffs.push((name.clone(), local, MatrixRecord::from_array(&diff)));
            }
        }
    }
    (dim, MatrixRecord::from_array(constant.as_array()), coeffs)
}
