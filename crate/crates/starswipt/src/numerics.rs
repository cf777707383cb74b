//! Hermitian linear algebra underneath the robust-beamforming machinery.
//!
//! Everything downstream — the vectorized quadratic forms, the S-procedure
//! blocks, the penalty linearization, rank certification — reduces to a small
//! set of dense Hermitian operations collected here: the Kronecker form that
//! turns `Tr(S H^H Q H)` into a quadratic form in `vec(H)`, a deterministic
//! cyclic-Jacobi eigensolver, and the complex-to-real PSD embedding used to
//! cross-check the conic backend.
//!
//! The Jacobi path is deliberately independent of LAPACK so that the two
//! eigensolver routes (this one and the backend's zheev) can be used as
//! oracles for each other in tests.

use ndarray::prelude::*;
use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Errors from Hermitian-algebra operations.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e} below tolerance {tol:.3e}")]
    Indefinite { min_eig: f64, tol: f64 },
}

/// Dense Hermitian matrix with the conjugate-symmetry invariant enforced at
/// construction (`A = A^H` to a relative tolerance of 1e-12).
///
/// Storage is a full dense array; the constructor symmetrizes the input so the
/// invariant holds exactly afterwards, which keeps every downstream consumer
/// (eigensolvers, the conic lowering) free of drift checks.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: Array2<C64>,
}

impl HermitianMatrix {
    /// Validates conjugate symmetry and returns the (exactly symmetrized) matrix.
    pub fn new(a: Array2<C64>) -> Result<Self, NumericsError> {
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(NumericsError::NotSquare { rows, cols });
        }
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let tol = 1e-12 * scale;
        let mut deviation: f64 = 0.0;
        for i in 0..rows {
            for j in i..cols {
                deviation = deviation.max((a[[i, j]] - a[[j, i]].conj()).norm());
            }
        }
        if deviation > tol {
            return Err(NumericsError::NotHermitian { deviation, tol });
        }
        Ok(Self::symmetrize(a))
    }

    /// Builds from an arbitrary square matrix by averaging with its adjoint.
    /// Useful when the input is Hermitian only up to rounding by construction.
    pub fn symmetrize(a: Array2<C64>) -> Self {
        let n = a.nrows();
        let mut entries = a;
        for i in 0..n {
            entries[[i, i]] = C64::new(entries[[i, i]].re, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (entries[[i, j]] + entries[[j, i]].conj());
                entries[[i, j]] = avg;
                entries[[j, i]] = avg.conj();
            }
        }
        Self { entries }
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self { entries: Array2::zeros((dim, dim)) }
    }

    /// Identity matrix of the given dimension.
    pub fn eye(dim: usize) -> Self {
        Self { entries: Array2::eye(dim) }
    }

    /// Rank-one outer product `v v^H`.
    pub fn outer(v: &Array1<C64>) -> Self {
        let n = v.len();
        let mut entries = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                entries[[i, j]] = v[i] * v[j].conj();
            }
        }
        Self { entries }
    }

    /// Real diagonal matrix.
    pub fn from_real_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut entries = Array2::zeros((n, n));
        for (i, &v) in d.iter().enumerate() {
            entries[[i, i]] = C64::new(v, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<C64> {
        self.entries
    }

    /// Trace (real by the Hermitian invariant).
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[[i, i]].re).sum()
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real inner product `Tr(A B)` between Hermitian matrices.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += (self.entries[[i, j]] * other.entries[[j, i]]).re;
            }
        }
        acc
    }

    /// Quadratic form `v^H A v` (real by the Hermitian invariant).
    pub fn quad_form(&self, v: &Array1<C64>) -> f64 {
        let av = self.entries.dot(v);
        v.iter().zip(av.iter()).map(|(x, y)| (x.conj() * y).re).sum()
    }

    /// Linear combination `a·self + b·other`.
    pub fn scaled_add(&self, a: f64, other: &HermitianMatrix, b: f64) -> Self {
        Self { entries: self.entries.mapv(|z| z * a) + other.entries.mapv(|z| z * b) }
    }

    /// `factor·self`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { entries: self.entries.mapv(|z| z * factor) }
    }
}

/// Conjugate transpose of a general complex matrix.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Column-major vectorization: stacks the columns of `h` top to bottom, so
/// entry `(p, j)` of an `m x n` matrix lands at index `j*m + p`. This is the
/// convention under which `Tr(A^H B C D) = vec(A)^H (D^T ⊗ B) vec(C)`.
pub fn vec_cm(h: &Array2<C64>) -> Array1<C64> {
    let (m, n) = h.dim();
    let mut out = Array1::zeros(m * n);
    for j in 0..n {
        for p in 0..m {
            out[j * m + p] = h[[p, j]];
        }
    }
    out
}

/// Inverse of [`vec_cm`]: reshapes a length `m*n` vector into an `m x n` matrix.
pub fn unvec_cm(v: &Array1<C64>, m: usize, n: usize) -> Array2<C64> {
    assert_eq!(v.len(), m * n, "vector length does not match target shape");
    let mut out = Array2::zeros((m, n));
    for j in 0..n {
        for p in 0..m {
            out[[p, j]] = v[j * m + p];
        }
    }
    out
}

/// Kronecker form `S^T ⊗ Q` of the trace identity
/// `Tr(S H^H Q H) = vec(H)^H (S^T ⊗ Q) vec(H)`.
///
/// `S` is the beam-side factor (dimension `n_t`), `Q` the surface-side factor
/// (dimension `m`); the result has dimension `m·n_t` with the `(i, j)` outer
/// block equal to `S[j, i] · Q`.
pub fn kron_form(s: &HermitianMatrix, q: &HermitianMatrix) -> HermitianMatrix {
    let n = s.dim();
    let m = q.dim();
    let sa = s.as_array();
    let qa = q.as_array();
    let mut out = Array2::zeros((m * n, m * n));
    for i in 0..n {
        for j in 0..n {
            let sij = sa[[j, i]]; // S^T entry (i, j)
            if sij == C64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..m {
                for q_ in 0..m {
                    out[[i * m + p, j * m + q_]] = sij * qa[[p, q_]];
                }
            }
        }
    }
    HermitianMatrix::symmetrize(out)
}

// ---------------------------------------------------------------------------
// Deterministic cyclic-Jacobi eigensolver
// ---------------------------------------------------------------------------

const JACOBI_MAX_SWEEPS: usize = 64;

/// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unitary matrix of
/// column eigenvectors. The algorithm is deterministic for fixed input (fixed
/// sweep order, no pivot search), which downstream code relies on for
/// reproducible phase choices.
pub fn eig_hermitian(a: &HermitianMatrix) -> (Array1<f64>, Array2<C64>) {
    let n = a.dim();
    let mut m = a.as_array().clone();
    let mut v: Array2<C64> = Array2::eye(n);
    if n <= 1 {
        let vals = Array1::from_iter((0..n).map(|i| m[[i, i]].re));
        return (vals, v);
    }
    let scale = a.frob_norm().max(f64::MIN_POSITIVE);
    let stop = 1e-14 * scale;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let abs_apq = apq.norm();
                if abs_apq <= 1e-300 {
                    continue;
                }
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let phase = apq / abs_apq; // e^{i φ}
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation J: J[p,p]=c, J[p,q]=s, J[q,p]=-s·conj(phase), J[q,q]=c·conj(phase).
                let sph = phase.conj() * s; // s·e^{-iφ}
                let cph = phase.conj() * c; // c·e^{-iφ}
                // A ← J^H A J, applied as column then row updates.
                for r in 0..n {
                    let arp = m[[r, p]];
                    let arq = m[[r, q]];
                    m[[r, p]] = arp * c - arq * sph;
                    m[[r, q]] = arp * s + arq * cph;
                }
                for r in 0..n {
                    let apr = m[[p, r]];
                    let aqr = m[[q, r]];
                    m[[p, r]] = apr * c - aqr * sph.conj();
                    m[[q, r]] = apr * s + aqr * cph.conj();
                }
                // Re-impose exact symmetry on the rotated 2x2 core.
                m[[p, q]] = C64::new(0.0, 0.0);
                m[[q, p]] = C64::new(0.0, 0.0);
                m[[p, p]] = C64::new(m[[p, p]].re, 0.0);
                m[[q, q]] = C64::new(m[[q, q]].re, 0.0);
                // Accumulate eigenvectors: V ← V J.
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = vrp * c - vrq * sph;
                    v[[r, q]] = vrp * s + vrq * cph;
                }
            }
        }
    }

    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.partial_cmp(&m[[j, j]].re).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]].re));
    let mut vecs = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, new_col]] = v[[r, old_col]];
        }
    }
    (vals, vecs)
}

/// Multiplies a unit vector by the phase that makes its largest-magnitude
/// entry real and positive (first index wins among equal magnitudes).
pub fn canonicalize_phase(v: &Array1<C64>) -> Array1<C64> {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return v.clone();
    }
    let rot = v[best].conj() / best_mag;
    v.mapv(|z| z * rot)
}

/// Largest eigenvalue and its (phase-canonicalized) unit eigenvector.
pub fn dominant_eig(a: &HermitianMatrix) -> (f64, Array1<C64>) {
    let n = a.dim();
    let (vals, vecs) = eig_hermitian(a);
    let lambda = vals[n - 1];
    let u = canonicalize_phase(&vecs.column(n - 1).to_owned());
    (lambda, u)
}

/// Rank-one defect `‖Q‖_* − ‖Q‖₂ = Tr(Q) − λ_max(Q)` of a PSD matrix.
///
/// The PSD precondition is scale-aware: the minimum eigenvalue must be at
/// least `−1e-9·max(1, λ_max)`; indefinite inputs are rejected.
pub fn rank_one_defect(q: &HermitianMatrix) -> Result<f64, NumericsError> {
    let (vals, _) = eig_hermitian(q);
    let n = vals.len();
    let min_eig = vals[0];
    let max_eig = vals[n - 1];
    let tol = -1e-9 * max_eig.abs().max(1.0);
    if min_eig < tol {
        return Err(NumericsError::Indefinite { min_eig, tol });
    }
    Ok((q.trace() - max_eig).max(0.0))
}

/// Ratio `λ₂/λ₁` of the two largest eigenvalues (0 for dimension-1 input).
pub fn subdominant_ratio(q: &HermitianMatrix) -> f64 {
    let (vals, _) = eig_hermitian(q);
    let n = vals.len();
    if n < 2 || vals[n - 1] <= 0.0 {
        return if n < 2 { 0.0 } else { f64::INFINITY };
    }
    (vals[n - 2].max(0.0)) / vals[n - 1]
}

/// Real symmetric embedding `[[Re A, −Im A], [Im A, Re A]]` of a Hermitian
/// matrix. PSD-ness is preserved in both directions and every eigenvalue of
/// `A` appears twice in the embedding.
pub fn hermitian_to_real_embedding(a: &HermitianMatrix) -> Array2<f64> {
    let n = a.dim();
    let arr = a.as_array();
    let mut out = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = arr[[i, j]];
            out[[i, j]] = z.re;
            out[[i, j + n]] = -z.im;
            out[[i + n, j]] = z.im;
            out[[i + n, j + n]] = z.re;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// LAPACK-backed routines for the solver hot path
// ---------------------------------------------------------------------------

/// Pins the BLAS/LAPACK thread pools to a single thread, once per process.
///
/// Multi-threaded BLAS reductions can reorder floating-point sums between
/// runs and fight with outer-level parallelism for cores; every entry point
/// that reaches LAPACK calls this before the first use so results are
/// bitwise reproducible at any parallelism level. (The variables are only
/// read at BLAS initialization, so this is best-effort if a caller already
/// fired LAPACK through some other route.)
pub(crate) fn ensure_single_threaded_blas() {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        for key in ["OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "GOTO_NUM_THREADS"] {
            if std::env::var_os(key).is_none() {
                std::env::set_var(key, "1");
            }
        }
    });
}

/// Hermitian eigendecomposition via LAPACK zheev (ascending eigenvalues,
/// eigenvectors as columns).
///
/// ndarray-linalg hands a row-major buffer to column-major LAPACK, which
/// effectively diagonalizes `A^T = conj(A)`; the returned eigenvectors are
/// therefore conjugated here before use. The Jacobi route above cross-checks
/// this fix in tests.
pub fn eigh_lapack(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    use ndarray_linalg::{Eigh, UPLO};
    ensure_single_threaded_blas();
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .expect("LAPACK zheev failed on Hermitian input");
    (vals, vecs.mapv(|z| z.conj()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha12Rng) -> HermitianMatrix {
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        HermitianMatrix::symmetrize(a)
    }

    fn random_vector(n: usize, rng: &mut ChaCha12Rng) -> Array1<C64> {
        Array1::from_iter(
            (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        )
    }

    fn random_matrix(m: usize, n: usize, rng: &mut ChaCha12Rng) -> Array2<C64> {
        let mut a = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                a[[i, j]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        a
    }

    #[test]
    fn constructor_rejects_non_hermitian() {
        let mut a: Array2<C64> = Array2::eye(3);
        a[[0, 1]] = C64::new(1.0, 0.0);
        assert!(matches!(
            HermitianMatrix::new(a),
            Err(NumericsError::NotHermitian { .. })
        ));
    }

    #[test]
    fn constructor_accepts_and_cleans_roundoff() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let h = random_hermitian(4, &mut rng);
        let mut noisy = h.as_array().clone();
        noisy[[1, 2]] += C64::new(1e-14, -1e-14);
        let rebuilt = HermitianMatrix::new(noisy).expect("within tolerance");
        assert!((rebuilt.as_array()[[1, 2]] - rebuilt.as_array()[[2, 1]].conj()).norm() == 0.0);
    }

    #[test]
    fn kron_form_identity_case() {
        let s = HermitianMatrix::eye(2);
        let q = HermitianMatrix::eye(3);
        let k = kron_form(&s, &q);
        assert_eq!(k.dim(), 6);
        assert!((k.as_array() - &Array2::<C64>::eye(6)).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kron_form_trace_identity_random() {
        // vec(H)^H (S^T ⊗ Q) vec(H) = Tr(S H^H Q H) on random instances.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let s = random_hermitian(2, &mut rng);
            let q = random_hermitian(3, &mut rng);
            let h = random_matrix(3, 2, &mut rng);
            let k = kron_form(&s, &q);
            let lhs = k.quad_form(&vec_cm(&h));
            // Tr(S H^H Q H)
            let rhs_mat = s.as_array().dot(&dagger(&h)).dot(q.as_array()).dot(&h);
            let rhs: C64 = (0..2).map(|i| rhs_mat[[i, i]]).sum();
            assert!(rhs.im.abs() <= 1e-12 * (1.0 + rhs.re.abs()));
            assert_relative_eq!(lhs, rhs.re, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn kron_form_spectrum_is_pairwise_products() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let s = random_hermitian(2, &mut rng);
        let q = random_hermitian(3, &mut rng);
        let k = kron_form(&s, &q);
        let (sv, _) = eig_hermitian(&s);
        let (qv, _) = eig_hermitian(&q);
        let mut expected: Vec<f64> = sv.iter().flat_map(|a| qv.iter().map(move |b| a * b)).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (kv, _) = eig_hermitian(&k);
        for (got, want) in kv.iter().zip(expected.iter()) {
            assert_relative_eq!(got, want, max_relative = 1e-9, epsilon = 1e-10);
        }
    }

    #[test]
    fn kron_form_is_bilinear_in_s() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let s1 = random_hermitian(2, &mut rng);
        let s2 = random_hermitian(2, &mut rng);
        let q = random_hermitian(3, &mut rng);
        let (a, b) = (0.7, -1.3);
        let combo = kron_form(&s1.scaled_add(a, &s2, b), &q);
        let separate = kron_form(&s1, &q).scaled_add(a, &kron_form(&s2, &q), b);
        let diff = (combo.as_array() - separate.as_array())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-12);
    }

    #[test]
    fn jacobi_matches_lapack_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for n in [1usize, 2, 3, 8, 21] {
            let h = random_hermitian(n, &mut rng);
            let (jv, jvecs) = eig_hermitian(&h);
            let (lv, _) = eigh_lapack(h.as_array());
            for i in 0..n {
                assert_relative_eq!(jv[i], lv[i], max_relative = 1e-10, epsilon = 1e-11);
            }
            // Reconstruction residual of the Jacobi decomposition.
            let lam = Array2::from_diag(&jv.mapv(|v| C64::new(v, 0.0)));
            let recon = jvecs.dot(&lam).dot(&dagger(&jvecs));
            let err = (&recon - h.as_array()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-11 * (1.0 + h.frob_norm()), "recon err {err}");
        }
    }

    #[test]
    fn lapack_eigenvectors_satisfy_eigen_equation() {
        // Guards the conjugation fix for ndarray-linalg's row-major/LAPACK
        // column-major mismatch: A v = λ v must hold for returned columns.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let h = random_hermitian(7, &mut rng);
        let (vals, vecs) = eigh_lapack(h.as_array());
        for k in 0..7 {
            let v = vecs.column(k).to_owned();
            let av = h.as_array().dot(&v);
            let res = (&av - &v.mapv(|z| z * vals[k]))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(res <= 1e-10, "eigen residual {res} at column {k}");
        }
    }

    #[test]
    fn dominant_eig_diagonal_case() {
        let a = HermitianMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
        let (lambda, u) = dominant_eig(&a);
        assert_relative_eq!(lambda, 3.0);
        assert_relative_eq!(u[0].re, 1.0, epsilon = 1e-12);
        assert!(u[1].norm() <= 1e-12 && u[2].norm() <= 1e-12);
    }

    #[test]
    fn dominant_eig_rank_one_case() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let w = random_vector(5, &mut rng);
        let a = HermitianMatrix::outer(&w);
        let (lambda, u) = dominant_eig(&a);
        let norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(lambda, norm_sq, max_relative = 1e-10);
        // u matches w/‖w‖ up to the canonical phase.
        let wn = w.mapv(|z| z / C64::new(norm_sq.sqrt(), 0.0));
        let wc = canonicalize_phase(&wn);
        for i in 0..5 {
            assert!((u[i] - wc[i]).norm() <= 1e-9);
        }
    }

    #[test]
    fn dominant_eig_residual_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..50 {
            let a = random_hermitian(8, &mut rng);
            let (lambda, u) = dominant_eig(&a);
            let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-10);
            let res = (&a.as_array().dot(&u) - &u.mapv(|z| z * lambda))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let spectral = eig_hermitian(&a).0.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(res <= 1e-9 * spectral.max(1e-30));
        }
    }

    #[test]
    fn dominant_eig_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let a = random_hermitian(6, &mut rng);
        let (l1, u1) = dominant_eig(&a);
        let (l2, u2) = dominant_eig(&a);
        assert_eq!(l1, l2);
        assert!(u1.iter().zip(u2.iter()).all(|(x, y)| x == y));
    }

    #[test]
    fn rank_one_defect_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let w = random_vector(4, &mut rng);
        let rank_one = HermitianMatrix::outer(&w);
        assert!(rank_one_defect(&rank_one).unwrap() <= 1e-10);

        let id3 = HermitianMatrix::eye(3);
        assert_relative_eq!(rank_one_defect(&id3).unwrap(), 2.0, epsilon = 1e-12);

        let indefinite = HermitianMatrix::from_real_diag(&[1.0, -0.5]);
        assert!(matches!(rank_one_defect(&indefinite), Err(NumericsError::Indefinite { .. })));
    }

    #[test]
    fn rank_one_defect_equals_eigenvalue_tail() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..30 {
            let g = random_matrix(5, 5, &mut rng);
            let psd = HermitianMatrix::symmetrize(g.dot(&dagger(&g)));
            let defect = rank_one_defect(&psd).unwrap();
            let (vals, _) = eig_hermitian(&psd);
            let tail: f64 = vals.iter().take(4).sum();
            assert_relative_eq!(defect, tail, max_relative = 1e-9, epsilon = 1e-10);
        }
    }

    #[test]
    fn embedding_block_structure_for_real_input() {
        let a = HermitianMatrix::from_real_diag(&[2.0, -1.0]);
        let e = hermitian_to_real_embedding(&a);
        assert_eq!(e.dim(), (4, 4));
        assert_eq!(e[[0, 0]], 2.0);
        assert_eq!(e[[2, 2]], 2.0);
        assert_eq!(e[[1, 1]], -1.0);
        assert_eq!(e[[3, 3]], -1.0);
        assert_eq!(e[[0, 2]], 0.0);
    }

    #[test]
    fn embedding_pauli_like_case() {
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = C64::new(0.0, 1.0);
        a[[1, 0]] = C64::new(0.0, -1.0);
        let h = HermitianMatrix::new(a).unwrap();
        let e = hermitian_to_real_embedding(&h);
        let he = HermitianMatrix::symmetrize(e.mapv(|x| C64::new(x, 0.0)));
        let (vals, _) = eig_hermitian(&he);
        let got: Vec<f64> = vals.to_vec();
        for (g, w) in got.iter().zip([-1.0, -1.0, 1.0, 1.0].iter()) {
            assert_relative_eq!(g, w, epsilon = 1e-10);
        }
    }

    #[test]
    fn embedding_doubles_the_spectrum() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let a = random_hermitian(4, &mut rng);
        let e = hermitian_to_real_embedding(&a);
        let he = HermitianMatrix::symmetrize(e.mapv(|x| C64::new(x, 0.0)));
        let (ev, _) = eig_hermitian(&he);
        let (av, _) = eig_hermitian(&a);
        let mut doubled: Vec<f64> = av.iter().flat_map(|&v| [v, v]).collect();
        doubled.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (g, w) in ev.iter().zip(doubled.iter()) {
            assert_relative_eq!(g, w, max_relative = 1e-9, epsilon = 1e-10);
        }
    }

    #[test]
    fn vec_cm_roundtrip_and_layout() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let h = random_matrix(3, 2, &mut rng);
        let v = vec_cm(&h);
        assert_eq!(v[0], h[[0, 0]]);
        assert_eq!(v[3], h[[0, 1]]); // second column starts at index m
        let back = unvec_cm(&v, 3, 2);
        assert!(back.iter().zip(h.iter()).all(|(a, b)| a == b));
    }
}
