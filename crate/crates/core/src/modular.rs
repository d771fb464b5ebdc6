//! Standard forms, modular operators and relative modular theory.
//!
//! The workhorse is [`tomita_data`]: given the action of an algebra and of its
//! commutant on a Hilbert space together with a vector, it builds the closure
//! of `xΩ ↦ s(ω) x*Ω` as a conjugate-linear matrix, its positive part Δ and
//! the conjugate-linear polar factor J. Nothing assumes cyclicity or
//! separation; support projections are carried explicitly and fractional
//! powers are pseudo-inverse powers on the support, so the same code path
//! serves honest standard forms and degenerate corners alike.
//!
//! Conjugate-linear operators are stored as a linear matrix composed with
//! coordinate conjugation in the fixed basis (see [`ConjLinear`]).
//!
//! Index convention for relative operators: `relative_modular(sf, ξ, η)`
//! returns `S_{ξ,η}` with `S_{ξ,η}(xη) = s(ψ) x* ξ` and `Δ_{ξ,η} = S*S`.
//! In the Hilbert-Schmidt picture `Δ_{ξ,η}` acts as `y ↦ ρ_ξ y ρ_η^{-1}`:
//! the first index is the "numerator".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    mat_from_json, mat_to_json, vec_from_json, vec_to_json, FdAlgebra, Functional, FunctionalKind,
};
use crate::linalg::{
    conj_mat, cr, dagger, herm_eigen, herm_pow, herm_pow_it, identity, orthonormalize, pinv,
    projection_onto, vec_mat, CMat, CVec, ConjLinear, EIG_CLAMP,
};

#[derive(Debug, Error)]
pub enum ModularError {
    #[error("state is not faithful on the algebra; reduce to its support first ({0})")]
    NotFaithful(String),
    #[error("vector is not cyclic for the algebra (rank {0} < {1})")]
    NotCyclic(usize, usize),
    #[error("vector is not separating for the algebra (rank {0} < {1})")]
    NotSeparating(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("element does not lie in the algebra (residual {0:.3e})")]
    NotInAlgebra(f64),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

pub type Result<T> = std::result::Result<T, ModularError>;

/// Tomita objects of a (possibly degenerate) pair: algebra action, vector.
#[derive(Clone, Debug)]
pub struct TomitaData {
    /// Closure of `xΩ ↦ s(ω) x*Ω`, conjugate-linear.
    pub s: ConjLinear,
    /// Δ = S*S, positive.
    pub delta: CMat,
    /// Spectral frame of Δ from the SVD of the conjugate-linear factor.
    pub delta_basis: CMat,
    /// Singular values σ of the factor (Δ = V diag(σ²) V†), descending.
    pub delta_sigma: Vec<f64>,
    /// Conjugate-linear polar factor (partial anti-isometry between supports).
    pub j: ConjLinear,
    /// s(ω): projection onto [M′Ω].
    pub supp: CMat,
    /// s′(ω): projection onto [MΩ].
    pub supp_prime: CMat,
}

impl TomitaData {
    /// Δ^t with pseudo-inverse powers, computed from the singular values of
    /// the closure operator (full relative accuracy).
    pub fn delta_power(&self, t: f64) -> CMat {
        crate::linalg::gram_power(&self.delta, &self.delta_basis, &self.delta_sigma, t)
    }

    /// f(Δ) on the support (kernel maps to zero).
    pub fn delta_fn(&self, f: impl Fn(f64) -> f64) -> CMat {
        crate::linalg::gram_fn(&self.delta, &self.delta_basis, &self.delta_sigma, f)
    }
}

/// Build the Tomita operator data of `(M, Ω)` from the action of a spanning
/// set of M and of M′ on the space.
pub fn tomita_data(alg_action: &[CMat], commutant_action: &[CMat], omega: &CVec) -> TomitaData {
    let dim = omega.len();
    let mut x = CMat::zeros(dim, alg_action.len());
    let mut y = CMat::zeros(dim, alg_action.len());
    for (q, a) in alg_action.iter().enumerate() {
        x.set_column(q, &(a * omega));
        y.set_column(q, &(dagger(a) * omega));
    }
    let supp = {
        let cols: Vec<CVec> = commutant_action.iter().map(|c| c * omega).collect();
        projection_onto(&orthonormalize(&cols, 1e-10))
    };
    let supp_prime = {
        let cols: Vec<CVec> = alg_action.iter().map(|a| a * omega).collect();
        projection_onto(&orthonormalize(&cols, 1e-10))
    };
    let s_mat = &supp * &y * conj_mat(&pinv(&x, 1e-10));
    let s = ConjLinear::new(s_mat);
    let delta = s.gram();
    let (delta_basis, delta_sigma) = s.polar_svd();
    let j_mat = &s.mat * conj_mat(&crate::linalg::gram_power(&delta, &delta_basis, &delta_sigma, -0.5));
    TomitaData {
        s,
        delta,
        delta_basis,
        delta_sigma,
        j: ConjLinear::new(j_mat),
        supp,
        supp_prime,
    }
}

/// Relative modular data of a vector pair in a standard form.
#[derive(Clone, Debug)]
pub struct RelativeModular {
    /// S_{ξ,η}, conjugate-linear.
    pub s: ConjLinear,
    /// Δ_{ξ,η} = S*S.
    pub delta: CMat,
    /// Spectral frame of Δ_{ξ,η} (Δ = V diag(σ²) V†).
    pub delta_basis: CMat,
    pub delta_sigma: Vec<f64>,
    /// J_{ξ,η}: conjugate-linear polar factor.
    pub j: ConjLinear,
    /// s(φ) = [M′ξ].
    pub supp_phi: CMat,
    /// s(ψ) = [M′η].
    pub supp_psi: CMat,
    /// s′(φ) = [Mξ].
    pub supp_phi_prime: CMat,
    /// s′(ψ) = [Mη].
    pub supp_psi_prime: CMat,
}

/// A standard form: an algebra together with a cyclic separating vector and
/// the associated modular data.
#[derive(Clone, Debug)]
pub struct StandardForm {
    algebra: FdAlgebra,
    space_dim: usize,
    rep_units: Vec<CMat>,
    comm_units: Vec<CMat>,
    omega: CVec,
    delta: CMat,
    delta_basis: CMat,
    delta_sigma: Vec<f64>,
    delta_quarter: CMat,
    j: ConjLinear,
    x_omega: CMat,
    x_omega_pinv: CMat,
    reference: Functional,
}

impl StandardForm {
    /// GNS construction at a faithful state: K is the algebra itself with the
    /// inner product ⟨x, y⟩ = φ(x*y); Ω is the class of 1.
    pub fn gns(algebra: &FdAlgebra, phi: &Functional) -> Result<Self> {
        if phi.algebra().ambient_dim() != algebra.ambient_dim() {
            return Err(ModularError::Degenerate(
                "state lives on another ambient space".into(),
            ));
        }
        if !phi.is_faithful(EIG_CLAMP) {
            return Err(ModularError::NotFaithful(
                "density has a kernel inside the algebra".into(),
            ));
        }
        let units = algebra.units();
        let d_lin = units.len();
        // Gram matrix G_{qr} = φ(b_q† b_r)
        let mut gram = CMat::zeros(d_lin, d_lin);
        for (q, bq) in units.iter().enumerate() {
            for (r, br) in units.iter().enumerate() {
                gram[(q, r)] = phi.eval(&(dagger(bq) * br));
            }
        }
        let g_half = herm_pow(&gram, 0.5);
        let g_half_inv = herm_pow(&gram, -0.5);
        // left multiplication in unit coordinates: a·b_r = Σ_q L(a)_{qr} b_q
        let coef = |x: &CMat| -> CVec { unit_coefficients(algebra, x) };
        let mut rep_units = Vec::with_capacity(d_lin);
        for bq in &units {
            let mut l = CMat::zeros(d_lin, d_lin);
            for (r, br) in units.iter().enumerate() {
                l.set_column(r, &coef(&(bq * br)));
            }
            rep_units.push(&g_half * l * &g_half_inv);
        }
        let omega = &g_half * coef(&identity(algebra.ambient_dim()));
        Self::finish(algebra.clone(), rep_units, omega, phi.clone())
    }

    /// Standard form of an algebra acting on its own ambient space with a
    /// cyclic separating vector (possible exactly when dim H = dim M).
    pub fn on_space(algebra: &FdAlgebra, omega: &CVec) -> Result<Self> {
        let d = algebra.ambient_dim();
        if omega.len() != d {
            return Err(ModularError::Degenerate("vector has wrong dimension".into()));
        }
        if algebra.dim_linear() != d {
            return Err(ModularError::Degenerate(format!(
                "algebra has linear dimension {} on a space of dimension {d}; \
                 a cyclic separating vector cannot exist",
                algebra.dim_linear()
            )));
        }
        let rep_units = algebra.units();
        let dens = density_from_vector(algebra, &rep_units, omega);
        let phi = Functional::from_ambient_density(algebra, &dens, FunctionalKind::Positive)?;
        Self::finish(algebra.clone(), rep_units, omega.clone(), phi)
    }

    fn finish(
        algebra: FdAlgebra,
        rep_units: Vec<CMat>,
        omega: CVec,
        reference: Functional,
    ) -> Result<Self> {
        let dim = omega.len();
        let d_lin = rep_units.len();
        let mut x_omega = CMat::zeros(dim, d_lin);
        for (q, r) in rep_units.iter().enumerate() {
            x_omega.set_column(q, &(r * &omega));
        }
        // cyclic: the columns span the space; separating: they are independent
        let rank = crate::linalg::rank_clamped(&x_omega);
        if rank < dim {
            return Err(ModularError::NotCyclic(rank, dim));
        }
        if rank < d_lin {
            return Err(ModularError::NotSeparating(rank, d_lin));
        }
        let x_omega_pinv = pinv(&x_omega, 1e-12);
        let mut y = CMat::zeros(dim, d_lin);
        for (q, r) in rep_units.iter().enumerate() {
            y.set_column(q, &(dagger(r) * &omega));
        }
        let s_mat = &y * conj_mat(&x_omega_pinv);
        let s = ConjLinear::new(s_mat);
        let delta = s.gram();
        let (delta_basis, delta_sigma) = s.polar_svd();
        let j = ConjLinear::new(
            &s.mat
                * conj_mat(&crate::linalg::gram_power(&delta, &delta_basis, &delta_sigma, -0.5)),
        );
        let comm_units: Vec<CMat> = rep_units.iter().map(|r| j.sandwich(r)).collect();
        let delta_quarter =
            crate::linalg::gram_power(&delta, &delta_basis, &delta_sigma, 0.25);
        Ok(StandardForm {
            algebra,
            space_dim: dim,
            rep_units,
            comm_units,
            omega,
            delta,
            delta_basis,
            delta_sigma,
            delta_quarter,
            j,
            x_omega,
            x_omega_pinv,
            reference,
        })
    }

    pub fn algebra(&self) -> &FdAlgebra {
        &self.algebra
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn omega(&self) -> &CVec {
        &self.omega
    }

    pub fn delta(&self) -> &CMat {
        &self.delta
    }

    pub fn j(&self) -> &ConjLinear {
        &self.j
    }

    /// The reference functional (vector functional of Ω).
    pub fn reference(&self) -> &Functional {
        &self.reference
    }

    /// Representations of the algebra's matrix units on K.
    pub fn rep_units(&self) -> &[CMat] {
        &self.rep_units
    }

    /// J·rep(b)·J for the unit basis: a spanning set of the commutant on K.
    pub fn commutant_units(&self) -> &[CMat] {
        &self.comm_units
    }

    /// Represent an arbitrary algebra element on K.
    pub fn rep(&self, x: &CMat) -> CMat {
        let coefs = unit_coefficients(&self.algebra, x);
        let mut out = CMat::zeros(self.space_dim, self.space_dim);
        for (q, r) in self.rep_units.iter().enumerate() {
            out += r.map(|z| z * coefs[q]);
        }
        out
    }

    /// Δ^t with pseudo-inverse powers on the support, computed from the
    /// singular values of the closure operator.
    pub fn delta_power(&self, t: f64) -> CMat {
        crate::linalg::gram_power(&self.delta, &self.delta_basis, &self.delta_sigma, t)
    }

    /// Δ^{it} (unitary).
    pub fn delta_it(&self, t: f64) -> CMat {
        herm_pow_it(&self.delta, t)
    }

    /// Vector functional v ↦ ⟨v, rep(·) v⟩ as a positive functional.
    pub fn vector_functional(&self, v: &CVec) -> Functional {
        let dens = density_from_vector(&self.algebra, &self.rep_units, v);
        Functional::from_ambient_density(&self.algebra, &dens, FunctionalKind::Positive)
            .expect("vector functional is positive")
    }

    /// Solve rep(a)Ω = v for the algebra element a; returns (a, residual).
    pub fn element_from_vector(&self, v: &CVec) -> (CMat, f64) {
        let coef = &self.x_omega_pinv * v;
        let resid = (&self.x_omega * &coef - v).norm();
        let mut a = CMat::zeros(self.algebra.ambient_dim(), self.algebra.ambient_dim());
        for (q, u) in self.algebra.units().iter().enumerate() {
            a += u.map(|z| z * coef[q]);
        }
        (a, resid)
    }

    /// The unique natural-cone representative of a positive functional.
    ///
    /// With reference density ρ₀ and target density ρ the representative is
    /// `Δ^{1/4} rep(ρ₀^{-1/4} ρ^{1/2} ρ₀^{-1/4}) Ω`, all powers taken inside
    /// the algebra block by block.
    pub fn natural_cone_vector(&self, phi: &Functional) -> Result<CVec> {
        if phi.algebra().ambient_dim() != self.algebra.ambient_dim() {
            return Err(ModularError::Degenerate(
                "functional lives on another ambient space".into(),
            ));
        }
        let rho0 = self.reference.density();
        let comps0 = self.algebra.block_components(rho0);
        let comps = self.algebra.block_components(phi.density());
        let mut xs = Vec::with_capacity(comps.len());
        for (c0, cp) in comps0.iter().zip(comps.iter()) {
            let r0q = herm_pow(c0, -0.25);
            xs.push(&r0q * herm_pow(cp, 0.5) * &r0q);
        }
        let x = self.algebra.assemble(&xs);
        Ok(&self.delta_quarter * self.rep(&x) * &self.omega)
    }

    /// Natural-cone membership: v ∈ P♮ iff Δ^{-1/4} v = aΩ with a ⪰ 0.
    pub fn natural_cone_contains(&self, v: &CVec, tol: f64) -> bool {
        let w = self.delta_power(-0.25) * v;
        let (a, resid) = self.element_from_vector(&w);
        if resid > tol * v.norm().max(1.0) {
            return false;
        }
        if (&a - dagger(&a)).norm() > tol * a.norm().max(1.0) {
            return false;
        }
        let (vals, _) = herm_eigen(&a);
        vals.first().map(|&m| m >= -tol * a.norm().max(1.0)).unwrap_or(true)
    }

    /// Relative modular data S_{ξ,η}, Δ_{ξ,η} = S*S for two vectors.
    pub fn relative_modular(&self, xi: &CVec, eta: &CVec) -> Result<RelativeModular> {
        self.relative_modular_for(&self.rep_units, &self.comm_units, xi, eta)
    }

    /// Relative modular data of the commutant pair (primes swapped).
    pub fn relative_modular_commutant(&self, xi: &CVec, eta: &CVec) -> Result<RelativeModular> {
        self.relative_modular_for(&self.comm_units, &self.rep_units, xi, eta)
    }

    fn relative_modular_for(
        &self,
        action: &[CMat],
        commutant: &[CMat],
        xi: &CVec,
        eta: &CVec,
    ) -> Result<RelativeModular> {
        if xi.norm() < 1e-14 || eta.norm() < 1e-14 {
            return Err(ModularError::Degenerate("zero vector".into()));
        }
        let proj_span = |mats: &[CMat], v: &CVec| -> CMat {
            let cols: Vec<CVec> = mats.iter().map(|m| m * v).collect();
            projection_onto(&orthonormalize(&cols, 1e-10))
        };
        let supp_phi = proj_span(commutant, xi);
        let supp_psi = proj_span(commutant, eta);
        let supp_phi_prime = proj_span(action, xi);
        let supp_psi_prime = proj_span(action, eta);

        let dim = self.space_dim;
        let mut x = CMat::zeros(dim, action.len());
        let mut y = CMat::zeros(dim, action.len());
        for (q, a) in action.iter().enumerate() {
            x.set_column(q, &(a * eta));
            y.set_column(q, &(&supp_psi * dagger(a) * xi));
        }
        let s = ConjLinear::new(&y * conj_mat(&pinv(&x, 1e-10)));
        let delta = s.gram();
        let (delta_basis, delta_sigma) = s.polar_svd();
        let j = ConjLinear::new(
            &s.mat
                * conj_mat(&crate::linalg::gram_power(&delta, &delta_basis, &delta_sigma, -0.5)),
        );
        Ok(RelativeModular {
            s,
            delta,
            delta_basis,
            delta_sigma,
            j,
            supp_phi,
            supp_psi,
            supp_phi_prime,
            supp_psi_prime,
        })
    }

    /// Connes cocycle (Dφ : Dψ)_t = Δ_{ξφ,ξψ}^{it} Δ_{ξψ}^{-it}, pulled back
    /// into the algebra. Both states must be faithful.
    pub fn connes_cocycle(&self, phi: &Functional, psi: &Functional, t: f64) -> Result<CMat> {
        if !phi.is_faithful(EIG_CLAMP) || !psi.is_faithful(EIG_CLAMP) {
            return Err(ModularError::SupportMismatch(
                "cocycle requires faithful states; reduce to the support first".into(),
            ));
        }
        let xi_phi = self.natural_cone_vector(phi)?;
        let xi_psi = self.natural_cone_vector(psi)?;
        let rel = self.relative_modular(&xi_phi, &xi_psi)?;
        let dpsi = self.relative_modular(&xi_psi, &xi_psi)?;
        let u_op = herm_pow_it(&rel.delta, t) * herm_pow_it(&dpsi.delta, -t);
        let (a, resid) = self.solve_in_rep(&u_op);
        if resid > 1e-9 * u_op.norm().max(1.0) {
            return Err(ModularError::NotInAlgebra(resid));
        }
        Ok(a)
    }

    /// Modular automorphism σ_t^ψ(x) = Δ_ψ^{it} x Δ_ψ^{-it} pulled back into
    /// the algebra (ψ faithful).
    pub fn modular_automorphism(&self, psi: &Functional, t: f64, x: &CMat) -> Result<CMat> {
        let xi_psi = self.natural_cone_vector(psi)?;
        let dpsi = self.relative_modular(&xi_psi, &xi_psi)?;
        let u = herm_pow_it(&dpsi.delta, t);
        let op = &u * self.rep(x) * dagger(&u);
        let (a, resid) = self.solve_in_rep(&op);
        if resid > 1e-8 * op.norm().max(1.0) {
            return Err(ModularError::NotInAlgebra(resid));
        }
        Ok(a)
    }

    /// Least-squares pull-back of an operator on K into the algebra.
    pub fn solve_in_rep(&self, op: &CMat) -> (CMat, f64) {
        let d2 = self.space_dim * self.space_dim;
        let mut cols = CMat::zeros(d2, self.rep_units.len());
        for (q, r) in self.rep_units.iter().enumerate() {
            cols.set_column(q, &vec_mat(r));
        }
        let coef = pinv(&cols, 1e-10) * vec_mat(op);
        let resid = (&cols * &coef - vec_mat(op)).norm();
        let mut a = CMat::zeros(self.algebra.ambient_dim(), self.algebra.ambient_dim());
        for (q, u) in self.algebra.units().iter().enumerate() {
            a += u.map(|z| z * coef[q]);
        }
        (a, resid)
    }
}

/// Coefficients of an algebra element in the matrix-unit basis.
pub fn unit_coefficients(algebra: &FdAlgebra, x: &CMat) -> CVec {
    let mut v = CVec::zeros(algebra.dim_linear());
    let mut idx = 0;
    for (k, &(n, _)) in algebra.blocks().iter().enumerate() {
        let comp = algebra.block_component(x, k);
        for i in 0..n {
            for jj in 0..n {
                v[idx] = comp[(i, jj)];
                idx += 1;
            }
        }
    }
    v
}

/// Density (in the algebra) of the vector functional ⟨v, rep(·) v⟩.
fn density_from_vector(algebra: &FdAlgebra, rep_units: &[CMat], v: &CVec) -> CMat {
    let mut dens = CMat::zeros(algebra.ambient_dim(), algebra.ambient_dim());
    let mut idx = 0;
    for (k, &(n, m)) in algebra.blocks().iter().enumerate() {
        for i in 0..n {
            for jj in 0..n {
                let val = v.dotc(&(&rep_units[idx] * v));
                // tr(unit_{k,j,i}·unit_{k,i,j}) = m_k: the dual basis flips indices
                dens += algebra.unit(k, jj, i).map(|z| z * val / cr(m as f64));
                idx += 1;
            }
        }
    }
    dens
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ConjLinearJson {
    matrix: Vec<[f64; 2]>,
    conjugation: bool,
}

#[derive(Serialize, Deserialize)]
struct StandardFormJson {
    algebra: FdAlgebra,
    space_dim: usize,
    rep_units: Vec<Vec<[f64; 2]>>,
    omega: Vec<[f64; 2]>,
    delta: Vec<[f64; 2]>,
    j: ConjLinearJson,
    reference: Functional,
}

impl Serialize for StandardForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StandardFormJson {
            algebra: self.algebra.clone(),
            space_dim: self.space_dim,
            rep_units: self.rep_units.iter().map(mat_to_json).collect(),
            omega: vec_to_json(&self.omega),
            delta: mat_to_json(&self.delta),
            j: ConjLinearJson { matrix: mat_to_json(&self.j.mat), conjugation: true },
            reference: self.reference.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StandardForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let jj = StandardFormJson::deserialize(d)?;
        let k = jj.space_dim;
        let rep_units: Vec<CMat> = jj
            .rep_units
            .iter()
            .map(|m| mat_from_json(k, k, m))
            .collect::<std::result::Result<_, _>>()
            .map_err(D::Error::custom)?;
        let omega = vec_from_json(&jj.omega);
        StandardForm::finish(jj.algebra, rep_units, omega, jj.reference).map_err(D::Error::custom)
    }
}
