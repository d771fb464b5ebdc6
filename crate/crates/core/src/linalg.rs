//! Dense complex linear algebra helpers shared by every module.
//!
//! Everything here works on [`CMat`]/[`CVec`] (dynamically sized matrices over
//! `Complex<f64>`). Spectral calculus of Hermitian matrices is done by
//! eigendecomposition with an eigenvalue clamp: eigenvalues with magnitude
//! below [`EIG_CLAMP`] are treated as exact zeros, so fractional and negative
//! powers stay finite on the support.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Structural tolerance used as a default everywhere (unitarity, membership,
/// commutation, reconstruction checks).
pub const TOL_STRUCT: f64 = 1e-10;

/// Eigenvalues below this magnitude are treated as exact zeros when taking
/// supports or fractional powers.
pub const EIG_CLAMP: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, ccols: usize) -> CMat {
    CMat::zeros(r, ccols)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Entrywise complex conjugate (no transpose).
pub fn conj_mat(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// Hilbert-Schmidt inner product `tr(a† b)`.
pub fn hs_dot(a: &CMat, b: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub fn fro_norm(m: &CMat) -> f64 {
    hs_dot(m, m).re.sqrt()
}

/// Row-major vectorization: `vec(M)[i*cols + j] = M[i][j]`.
///
/// With this convention `kron(a, b) * vec_mat(m) = vec_mat(a * m * bᵀ)`.
pub fn vec_mat(m: &CMat) -> CVec {
    let (r, cl) = m.shape();
    let mut v = CVec::zeros(r * cl);
    for i in 0..r {
        for j in 0..cl {
            v[i * cl + j] = m[(i, j)];
        }
    }
    v
}

pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols, "unvec: length mismatch");
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = v[i * cols + j];
        }
    }
    m
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// The input is symmetrized as `(m + m†)/2` first; callers are expected to
/// pass matrices that are Hermitian up to rounding. Highly degenerate spectra
/// can defeat the iterative solver; a deterministic diagonal jitter breaks
/// the ties while keeping the result within ~1e-13 of the true spectrum.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let h = (m + dagger(m)).scale(0.5);
    for attempt in 0..3 {
        let input = if attempt == 0 {
            h.clone()
        } else {
            let scale = fro_norm(&h).max(1.0) * 1e-13 * attempt as f64;
            let mut jittered = h.clone();
            for i in 0..n {
                jittered[(i, i)] += cr(scale * (i as f64 + 1.0) / n as f64);
            }
            jittered
        };
        let se = input.symmetric_eigen();
        if se.eigenvalues.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vecs = CMat::zeros(n, n);
        for (kk, &i) in idx.iter().enumerate() {
            vecs.set_column(kk, &se.eigenvectors.column(i));
        }
        return (vals, vecs);
    }
    panic!("hermitian eigensolver failed to converge after jitter retries");
}

/// Apply a real function to a Hermitian matrix through its spectrum.
pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = cr(f(vals[i]));
    }
    &vecs * d * dagger(&vecs)
}

/// `m^p` for Hermitian psd `m`, mapping clamped eigenvalues to zero.
///
/// Negative powers are pseudo-inverse powers: zero eigenvalues stay zero.
pub fn herm_pow(m: &CMat, p: f64) -> CMat {
    herm_fn(m, |x| if x <= EIG_CLAMP { 0.0 } else { x.powf(p) })
}

/// Principal matrix logarithm on the support of a Hermitian psd matrix;
/// clamped eigenvalues contribute zero (callers must handle supports).
pub fn herm_log_support(m: &CMat) -> CMat {
    herm_fn(m, |x| if x <= EIG_CLAMP { 0.0 } else { x.ln() })
}

/// `m^{it}` for Hermitian psd `m` (unitary on the support, zero on the kernel).
pub fn herm_pow_it(m: &CMat, t: f64) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = if vals[i] <= EIG_CLAMP {
            cr(0.0)
        } else {
            // λ^{it} = exp(i t ln λ)
            let a = t * vals[i].ln();
            c(a.cos(), a.sin())
        };
    }
    &vecs * d * dagger(&vecs)
}

/// Support projection of a Hermitian psd matrix (eigenvalues > clamp).
pub fn support_projection(m: &CMat) -> CMat {
    herm_fn(m, |x| if x > EIG_CLAMP { 1.0 } else { 0.0 })
}

pub fn rank_clamped(m: &CMat) -> usize {
    let (vals, _) = herm_eigen(&(dagger(m) * m));
    vals.iter().filter(|&&v| v > EIG_CLAMP).count()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Sum of singular values. Hermitian inputs take the spectral path, which is
/// exact to machine precision even for tiny eigenvalues.
pub fn trace_norm(m: &CMat) -> f64 {
    if m.nrows() == m.ncols() && (m - dagger(m)).norm() <= 1e-13 * m.norm().max(1.0) {
        let (vals, _) = herm_eigen(m);
        return vals.iter().map(|v| v.abs()).sum();
    }
    singular_values(m).iter().sum()
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    svd(m).1
}

/// Full SVD `m = u Σ v†` with singular values sorted descending.
///
/// Computed through the Hermitian embedding `[[0, m], [m†, 0]]`, whose
/// eigenvalues are ±σ with eigenvectors (u, ±v)/√2. This avoids both the
/// condition-number squaring of the normal-equations route and the
/// convergence failures of iterative bidiagonal solvers on spectra with
/// large degenerate clusters. Columns are returned for the top min(r, c)
/// singular values; directions at numerical zero carry no meaning beyond
/// their σ (consumers clamp them away).
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, ccols) = m.shape();
    let n = r + ccols;
    let mut h = CMat::zeros(n, n);
    for i in 0..r {
        for j in 0..ccols {
            h[(i, r + j)] = m[(i, j)];
            h[(r + j, i)] = m[(i, j)].conj();
        }
    }
    let (vals, vecs) = herm_eigen(&h);
    let k = r.min(ccols);
    let mut u = CMat::zeros(r, k);
    let mut v = CMat::zeros(ccols, k);
    let mut sv = Vec::with_capacity(k);
    // eigenvalues ascend; the top k are the singular values
    for t in 0..k {
        let col = vecs.column(n - 1 - t);
        let sigma = vals[n - 1 - t].max(0.0);
        sv.push(sigma);
        let mut uu = CVec::zeros(r);
        for i in 0..r {
            uu[i] = col[i];
        }
        let mut vv = CVec::zeros(ccols);
        for j in 0..ccols {
            vv[j] = col[r + j];
        }
        let (nu, nv) = (uu.norm(), vv.norm());
        if nu > 1e-150 {
            uu = uu.unscale(nu);
        }
        if nv > 1e-150 {
            vv = vv.unscale(nv);
        }
        u.set_column(t, &uu);
        v.set_column(t, &vv);
    }
    (u, sv, v)
}

/// Orthonormal basis of the kernel of `m`, from the Hermitian spectrum of
/// the Gram matrix m†m (relative eigenvalue threshold `tol`).
pub fn nullspace(m: &CMat, tol: f64) -> Vec<CVec> {
    let gram = dagger(m) * m;
    let (vals, vecs) = herm_eigen(&gram);
    let vmax = vals.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut out = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        if v <= tol * tol * vmax {
            out.push(CVec::from_column_slice(vecs.column(i).as_slice()));
        }
    }
    out
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(m: &CMat, tol: f64) -> CMat {
    let (u, s, v) = svd(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = tol.max(EIG_CLAMP) * smax.max(1.0);
    let mut si = CMat::zeros(s.len(), s.len());
    for i in 0..s.len() {
        si[(i, i)] = if s[i] > cut { cr(1.0 / s[i]) } else { cr(0.0) };
    }
    &v * si * dagger(&u)
}

/// Unitary polar factor `m (m† m)^{-1/2}`, defined for invertible `m`.
pub fn polar_unitary(m: &CMat) -> CMat {
    let s_inv_half = herm_pow(&(dagger(m) * m), -0.5);
    m * s_inv_half
}

/// Partial trace over selected tensor legs.
///
/// `dims` lists the factor dimensions, row-major ordering as produced by
/// [`kron`]; `keep` lists the indices of factors to keep (ascending).
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    assert_eq!(m.nrows(), total, "partial_trace: dimension mismatch");
    let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // index helpers: multi-index <-> flat
    let unflatten = |mut flat: usize| -> Vec<usize> {
        let mut mi = vec![0usize; dims.len()];
        for i in (0..dims.len()).rev() {
            mi[i] = flat % dims[i];
            flat /= dims[i];
        }
        mi
    };
    let flatten_sub = |mi: &[usize], subset: &[usize]| -> usize {
        let mut f = 0usize;
        for &k in subset {
            f = f * dims[k] + mi[k];
        }
        f
    };

    let mut out = CMat::zeros(keep_dim, keep_dim);
    for r in 0..total {
        let mr = unflatten(r);
        for ccol in 0..total {
            let mc = unflatten(ccol);
            // contributes only when traced indices agree
            if traced.iter().all(|&k| mr[k] == mc[k]) {
                let _ = traced_dim;
                let i = flatten_sub(&mr, keep);
                let j = flatten_sub(&mc, keep);
                out[(i, j)] += m[(r, ccol)];
            }
        }
    }
    out
}

/// A conjugate-linear operator stored as its linear factor: `T v = mat · conj(v)`.
#[derive(Clone, Debug)]
pub struct ConjLinear {
    pub mat: CMat,
}

impl ConjLinear {
    pub fn new(mat: CMat) -> Self {
        ConjLinear { mat }
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        &self.mat * conj_vec(v)
    }

    /// Adjoint with respect to ⟨u, Tv⟩ = ⟨v, T*u⟩: the linear factor transposes.
    pub fn adjoint(&self) -> ConjLinear {
        ConjLinear { mat: self.mat.transpose() }
    }

    /// `T ∘ L` for linear `L` (result conjugate-linear): factor = mat · conj(L).
    pub fn compose_linear(&self, l: &CMat) -> ConjLinear {
        ConjLinear { mat: &self.mat * conj_mat(l) }
    }

    /// `L ∘ T` for linear `L`.
    pub fn precompose_linear(&self, l: &CMat) -> ConjLinear {
        ConjLinear { mat: l * &self.mat }
    }

    /// Conjugation of a linear operator: `T a T` (linear again) assuming T² acts
    /// as a projection on the relevant subspace; returns mat·conj(a)·conj(mat).
    pub fn sandwich(&self, a: &CMat) -> CMat {
        &self.mat * conj_mat(a) * conj_mat(&self.mat)
    }

    /// `T*T` as a linear (positive) operator.
    pub fn gram(&self) -> CMat {
        self.mat.transpose() * conj_mat(&self.mat)
    }

    /// Spectral data of `T*T` through the SVD of the linear factor:
    /// `T*T = V diag(σ²) V†`. Returns (V, σ) with σ descending. Computing
    /// powers of `T*T` from σ directly avoids squaring the condition number.
    pub fn polar_svd(&self) -> (CMat, Vec<f64>) {
        let (_, sigma, v) = svd(&conj_mat(&self.mat));
        (v, sigma)
    }
}

/// `(T*T)^t` from the polar data of a conjugate-linear operator; singular
/// values below a relative clamp map to zero (pseudo-inverse powers).
pub fn gram_power(delta: &CMat, v: &CMat, sigma: &[f64], t: f64) -> CMat {
    gram_fn(delta, v, sigma, |x| x.powf(t))
}

/// Apply `f` to the spectrum of `T*T`; `f` sees the eigenvalue σ² and the
/// kernel maps to zero.
///
/// Two routes: the Hermitian eigendecomposition of the explicit Δ (best
/// orthonormality, absolute eigenvalue error ~ε‖Δ‖) when the spectrum is
/// tame, and the singular values of the closure factor (relative accuracy for
/// tiny eigenvalues, avoids squaring the condition number) when Δ spans many
/// orders of magnitude.
pub fn gram_fn(delta: &CMat, v: &CMat, sigma: &[f64], f: impl Fn(f64) -> f64) -> CMat {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    // kernel cut on the σ scale: spurious pseudo-inverse modes live at the
    // machine-epsilon level relative to σmax, genuine modular spectra of the
    // handled instances stay above ~1e-9·σmax
    let cut = 1e-11 * smax.max(1.0);
    let smin_kept = sigma.iter().cloned().filter(|&s| s > cut).fold(f64::INFINITY, f64::min);
    if smax <= 0.0 {
        return CMat::zeros(v.nrows(), v.nrows());
    }
    if smax / smin_kept.max(1e-300) <= 1e4 {
        // the eigensolver's noise floor is ~ε·λmax; clamp relative to it
        let eig_cut = (cut * cut).max(1e-12 * smax * smax);
        return herm_fn(delta, |x| if x > eig_cut { f(x) } else { 0.0 });
    }
    let mut d = CMat::zeros(sigma.len(), sigma.len());
    for (i, &s) in sigma.iter().enumerate() {
        d[(i, i)] = if s > cut { cr(f(s * s)) } else { cr(0.0) };
    }
    v * d * dagger(v)
}

/// Gram-Schmidt over complex vectors; returns an orthonormal basis of the span.
pub fn orthonormalize(vectors: &[CVec], tol: f64) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dotc(&w);
                w -= b.scale_complex(coef);
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w.unscale(n));
        }
    }
    basis
}

trait ScaleComplex {
    fn scale_complex(&self, z: C64) -> CVec;
}

impl ScaleComplex for CVec {
    fn scale_complex(&self, z: C64) -> CVec {
        self.map(|x| x * z)
    }
}

/// Orthogonal projection matrix onto the span of `basis` (assumed orthonormal).
pub fn projection_onto(basis: &[CVec]) -> CMat {
    let n = if basis.is_empty() { 0 } else { basis[0].len() };
    let mut p = CMat::zeros(n, n);
    for b in basis {
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += b[i] * b[j].conj();
            }
        }
    }
    p
}

/// Residual of `v` against the span of the (orthonormal) basis.
pub fn span_residual(basis: &[CVec], v: &CVec) -> f64 {
    let mut w = v.clone();
    for b in basis {
        let coef = b.dotc(&w);
        w -= b.scale_complex(coef);
    }
    w.norm()
}

/// True when span(a) ⊆ span(b) within tol (bases orthonormal, vectors unit-ish).
pub fn span_subset(a: &[CVec], b: &[CVec], tol: f64) -> bool {
    a.iter().all(|v| span_residual(b, v) <= tol * v.norm().max(1.0))
}

pub fn span_equal(a: &[CVec], b: &[CVec], tol: f64) -> bool {
    span_subset(a, b, tol) && span_subset(b, a, tol)
}

/// Orthonormal basis of the intersection of two spans (each given orthonormal).
///
/// Computed from the nullspace of the stacked matrix [U | −W]: a vector lies
/// in both spans iff it is U·x = W·y for some coefficient pair.
pub fn span_intersection(a: &[CVec], b: &[CVec], tol: f64) -> Vec<CVec> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a[0].len();
    let (ka, kb) = (a.len(), b.len());
    let mut stacked = CMat::zeros(n, ka + kb);
    for (q, v) in a.iter().enumerate() {
        stacked.set_column(q, v);
    }
    for (q, v) in b.iter().enumerate() {
        stacked.set_column(ka + q, &v.map(|z| -z));
    }
    let null = nullspace(&stacked, tol.max(1e-9));
    let mut out = Vec::new();
    for nv in null {
        // reconstruct the common vector from the a-side coefficients
        let mut w = CVec::zeros(n);
        for (q, v) in a.iter().enumerate() {
            let coef = nv[q];
            for r in 0..n {
                w[r] += v[r] * coef;
            }
        }
        if w.norm() > 1e-9 {
            out.push(w);
        }
    }
    orthonormalize(&out, 1e-9)
}

/// Least-squares solve `A x = b` via pseudo-inverse.
pub fn lsq_solve(a: &CMat, b: &CVec, tol: f64) -> CVec {
    pinv(a, tol) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kron_vec_convention() {
        // (a ⊗ b) vec(M) = vec(a M bᵀ) under row-major vec
        let a = CMat::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(3.0), cr(4.0)]);
        let b = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let m = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(1.0)]);
        let lhs = kron(&a, &b) * vec_mat(&m);
        let rhs = vec_mat(&(&a * &m * b.transpose()));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn herm_eigen_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[cr(2.0), c(0.0, -1.0), c(0.0, 1.0), cr(3.0)],
        );
        let (vals, vecs) = herm_eigen(&m);
        assert!(vals[0] <= vals[1]);
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = cr(vals[0]);
        d[(1, 1)] = cr(vals[1]);
        let rec = &vecs * d * dagger(&vecs);
        assert!((rec - m).norm() < 1e-10);
    }

    #[test]
    fn herm_pow_pinv_on_kernel() {
        // diag(4, 0): inverse square root must send the kernel to zero
        let m = CMat::from_row_slice(2, 2, &[cr(4.0), cr(0.0), cr(0.0), cr(0.0)]);
        let r = herm_pow(&m, -0.5);
        assert!(approx(r[(0, 0)].re, 0.5, 1e-12));
        assert!(approx(r[(1, 1)].re, 0.0, 1e-15));
    }

    #[test]
    fn partial_trace_product() {
        let a = CMat::from_row_slice(2, 2, &[cr(0.25), cr(0.1), cr(0.1), cr(0.75)]);
        let b = CMat::from_row_slice(2, 2, &[cr(0.5), cr(0.0), cr(0.0), cr(0.5)]);
        let ab = kron(&a, &b);
        let ta = partial_trace(&ab, &[2, 2], &[0]);
        assert!((ta - &a).norm() < 1e-12);
        let tb = partial_trace(&ab, &[2, 2], &[1]);
        assert!((tb - &b).norm() < 1e-12);
    }

    #[test]
    fn pinv_recovers_inverse() {
        let m = CMat::from_row_slice(2, 2, &[cr(2.0), cr(1.0), cr(0.0), cr(1.0)]);
        let mi = pinv(&m, 1e-12);
        assert!(((&m * mi) - identity(2)).norm() < 1e-10);
    }

    #[test]
    fn trace_norm_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[cr(3.0), cr(0.0), cr(0.0), cr(0.0)]);
        assert!(approx(trace_norm(&m), 3.0, 1e-10));
        assert!(approx(op_norm(&m), 3.0, 1e-10));
    }

    #[test]
    fn conj_linear_adjoint_identity() {
        // ⟨u, T v⟩ = ⟨v, T* u⟩ for conjugate-linear T
        let t = ConjLinear::new(CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 1.0), cr(0.5), c(0.0, -2.0), cr(1.0)],
        ));
        let u = CVec::from_column_slice(&[c(0.3, 0.1), c(-1.0, 0.4)]);
        let v = CVec::from_column_slice(&[c(0.9, -0.2), c(0.2, 0.7)]);
        let lhs = u.dotc(&t.apply(&v));
        let rhs = v.dotc(&t.adjoint().apply(&u));
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
