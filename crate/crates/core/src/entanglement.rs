//! Bipartite systems, separable states and entanglement measures.
//!
//! A [`BipartiteSystem`] is a pair of commuting factors `(A, B)` on a common
//! ambient space whose join is naturally isomorphic to the tensor product
//! `A ⊗ B`. States of the join are transported to density matrices on
//! `C^n ⊗ C^m` ("the tensor picture") and all measures are computed there:
//!
//! * mutual information `E_I(ω) = S(ω ‖ ω_A ⊗ ω_B)`, cross-checked against
//!   the entropy identity `E_I = S(ω_A) + S(ω_B) − S(ω)`;
//! * a certified upper bound on the relative entanglement entropy
//!   `E_R(ω) = inf { S(ω‖σ) : σ separable }`, produced by a Frank-Wolfe
//!   search over explicit product ensembles — every reported value is
//!   achieved by a concrete separable witness;
//! * separable operations (families of local cp maps) acting on states and on
//!   separability certificates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{mat_from_json, mat_to_json, AlgebraError, FdAlgebra, Functional, FunctionalKind};
use crate::entropy::{eta, matrix_relative_entropy, matrix_vn_entropy, ExtReal};
use crate::linalg::{
    c, cr, dagger, herm_eigen, identity, kron, partial_trace, support_projection, trace, CMat,
    CVec, EIG_CLAMP,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("algebras do not commute")]
    NotCommuting,
    #[error("the pair is not split: {0}")]
    NotSplit(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("ensemble weights do not form a distribution (sum {0})")]
    BadWeights(f64),
    #[error("map is not completely positive (Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),
    #[error("operation is not normalized (residual {0:.3e})")]
    NotNormalized(f64),
    #[error("mutual information identity violated (residual {0:.3e})")]
    IdentityViolated(f64),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, EntanglementError>;

/// Commuting factors (A, B) with the identification A∨B ≅ A⊗B.
#[derive(Clone, Debug)]
pub struct BipartiteSystem {
    a: FdAlgebra,
    b: FdAlgebra,
    join: FdAlgebra,
    dim_a: usize,
    dim_b: usize,
    a_units: Vec<CMat>,
    b_units: Vec<CMat>,
}

impl BipartiteSystem {
    /// General constructor: checks commutation and the split structure by
    /// generating the join and comparing dimensions.
    pub fn new(a: &FdAlgebra, b: &FdAlgebra) -> Result<Self> {
        if a.ambient_dim() != b.ambient_dim() {
            return Err(EntanglementError::Shape("different ambient spaces".into()));
        }
        if !a.is_factor() || !b.is_factor() {
            return Err(EntanglementError::NotSplit("both algebras must be factors".into()));
        }
        if !a.check_commuting(b, 1e-10) {
            return Err(EntanglementError::NotCommuting);
        }
        // the products of local matrix units form a unit system of the join,
        // giving the aligned frame directly
        let n = a.blocks()[0].0;
        let m = b.blocks()[0].0;
        let au = a.units();
        let bu = b.units();
        let mut prod_units = Vec::with_capacity(n * n * m * m);
        for i in 0..n {
            for k in 0..m {
                for j in 0..n {
                    for l in 0..m {
                        prod_units.push(&au[i * n + j] * &bu[k * m + l]);
                    }
                }
            }
        }
        let join = crate::algebra::factor_from_matrix_units(&prod_units, n * m)
            .map_err(|e| EntanglementError::NotSplit(format!("join frame: {e}")))?;
        Self::with_join(a, b, &join)
    }

    /// Constructor with a precomputed join (skips the generator closure).
    pub fn with_join(a: &FdAlgebra, b: &FdAlgebra, join: &FdAlgebra) -> Result<Self> {
        let n = a.blocks()[0].0;
        let m = b.blocks()[0].0;
        if join.dim_linear() != n * n * m * m || !join.is_factor() {
            return Err(EntanglementError::NotSplit(format!(
                "join has dimension {} with {} blocks; expected the factor M_{}",
                join.dim_linear(),
                join.center_dim(),
                n * m
            )));
        }
        let sys = BipartiteSystem {
            a: a.clone(),
            b: b.clone(),
            join: join.clone(),
            dim_a: n,
            dim_b: m,
            a_units: a.units(),
            b_units: b.units(),
        };
        // the identification ab ↦ a⊗b must be consistent on basis pairs
        let mut worst: f64 = 0.0;
        for (ia, ua) in sys.a_units.iter().enumerate() {
            for (ib, ub) in sys.b_units.iter().enumerate() {
                let prod = ua * ub;
                let resid = sys.join.membership_residual(&prod);
                worst = worst.max(resid);
                let _ = (ia, ib);
            }
        }
        if worst > 1e-8 {
            return Err(EntanglementError::NotSplit(format!(
                "products of local units leave the join (residual {worst:.3e})"
            )));
        }
        Ok(sys)
    }

    /// The plain n⊗m system: A = M_n ⊗ 1, B = 1 ⊗ M_m on C^{nm}.
    pub fn qubits(n: usize, m: usize) -> Result<Self> {
        Self::doubled(n, m, 1)
    }

    /// The n⊗m system with a multiplicity-r ancilla: A = M_n ⊗ 1_{mr},
    /// B = 1_n ⊗ M_m ⊗ 1_r and A∨B = M_{nm} ⊗ 1_r on C^{nmr}.
    pub fn doubled(n: usize, m: usize, r: usize) -> Result<Self> {
        let mn = FdAlgebra::full_matrix_algebra(n).map_err(EntanglementError::Algebra)?;
        let mm = FdAlgebra::full_matrix_algebra(m).map_err(EntanglementError::Algebra)?;
        let onem = FdAlgebra::scalars(m).map_err(EntanglementError::Algebra)?;
        let onen = FdAlgebra::scalars(n).map_err(EntanglementError::Algebra)?;
        let (a, b, join) = if r == 1 {
            (mn.tensor(&onem), onen.tensor(&mm), mn.tensor(&mm))
        } else {
            let oner = FdAlgebra::scalars(r).map_err(EntanglementError::Algebra)?;
            (
                mn.tensor(&onem).tensor(&oner),
                onen.tensor(&mm).tensor(&oner),
                mn.tensor(&mm).tensor(&oner),
            )
        };
        Self::with_join(&a, &b, &join)
    }

    pub fn algebra_a(&self) -> &FdAlgebra {
        &self.a
    }

    pub fn algebra_b(&self) -> &FdAlgebra {
        &self.b
    }

    pub fn join(&self) -> &FdAlgebra {
        &self.join
    }

    pub fn local_dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn ambient_dim(&self) -> usize {
        self.a.ambient_dim()
    }

    /// Swapped system (B, A); densities transport through [`swap_tensor`].
    pub fn swapped(&self) -> Result<Self> {
        BipartiteSystem::with_join(&self.b, &self.a, &self.join)
    }

    /// Density matrix on C^n ⊗ C^m of a state of the join.
    pub fn tensor_density(&self, omega: &Functional) -> Result<CMat> {
        if omega.algebra().ambient_dim() != self.ambient_dim() {
            return Err(EntanglementError::Shape("state on another ambient space".into()));
        }
        let (n, m) = (self.dim_a, self.dim_b);
        let mut rho = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let ua = &self.a_units[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        let ub = &self.b_units[k * m + l];
                        // tr(ϱ (E_ij ⊗ E_kl)) = ϱ[(j,l),(i,k)]
                        rho[(j * m + l, i * m + k)] = omega.eval(&(ua * ub));
                    }
                }
            }
        }
        Ok(rho)
    }

    /// State of the join from a tensor-picture density.
    pub fn functional_from_tensor_density(&self, rho: &CMat) -> Result<Functional> {
        let (n, m) = (self.dim_a, self.dim_b);
        if rho.nrows() != n * m {
            return Err(EntanglementError::Shape("tensor density has wrong size".into()));
        }
        let mult = self.join.blocks()[0].1;
        let dens = self.join.assemble(&[rho.scale(1.0 / mult as f64)]);
        let kind = if (trace(rho).re - 1.0).abs() < 1e-12 {
            FunctionalKind::State
        } else {
            FunctionalKind::Positive
        };
        Functional::from_ambient_density(&self.join, &dens, kind)
            .map_err(EntanglementError::Algebra)
    }

    /// Vector state of an ambient vector, as a tensor-picture density.
    pub fn tensor_density_of_vector(&self, omega: &CVec) -> Result<CMat> {
        let (n, m) = (self.dim_a, self.dim_b);
        let mut rho = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let ua = &self.a_units[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        let ub = &self.b_units[k * m + l];
                        rho[(j * m + l, i * m + k)] = omega.dotc(&((ua * ub) * omega));
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn marginal_a(&self, rho: &CMat) -> CMat {
        partial_trace(rho, &[self.dim_a, self.dim_b], &[0])
    }

    pub fn marginal_b(&self, rho: &CMat) -> CMat {
        partial_trace(rho, &[self.dim_a, self.dim_b], &[1])
    }

    /// Mutual information E_I(ω) = S(ω ‖ ω_A ⊗ ω_B), cross-checked against
    /// S(ω_A) + S(ω_B) − S(ω).
    ///
    /// The second argument's logarithm is evaluated factorwise
    /// (log(σ_A ⊗ σ_B) = log σ_A ⊗ 1 + 1 ⊗ log σ_B), which keeps the support
    /// clamps at the marginal scale instead of products of small eigenvalues.
    pub fn mutual_information(&self, rho: &CMat) -> Result<f64> {
        let (n, m) = (self.dim_a, self.dim_b);
        let ra = self.marginal_a(rho);
        let rb = self.marginal_b(rho);
        // support condition supp ω ≤ supp ω_A ⊗ supp ω_B (always true up to
        // rounding; +∞ here would be a logic error)
        let p_prod = kron(&support_projection(&ra), &support_projection(&rb));
        let p_rho = support_projection(rho);
        let leak = crate::linalg::op_norm(&((identity(n * m) - &p_prod) * &p_rho));
        if leak > 1e-8 {
            return Err(EntanglementError::IdentityViolated(f64::INFINITY));
        }
        let log_prod = kron(&crate::linalg::herm_log_support(&ra), &identity(m))
            + kron(&identity(n), &crate::linalg::herm_log_support(&rb));
        let rel = (rho * (crate::linalg::herm_log_support(rho) - log_prod))
            .diagonal()
            .iter()
            .map(|z| z.re)
            .sum::<f64>();
        let additive = matrix_vn_entropy(&ra) + matrix_vn_entropy(&rb) - matrix_vn_entropy(rho);
        let resid = (rel - additive).abs();
        if resid > 1e-8 * rel.abs().max(1.0) {
            return Err(EntanglementError::IdentityViolated(resid));
        }
        Ok(rel)
    }
}

/// Swap the two tensor legs of a density on C^n ⊗ C^m.
pub fn swap_tensor(rho: &CMat, n: usize, m: usize) -> CMat {
    let mut out = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for k in 0..m {
            for j in 0..n {
                for l in 0..m {
                    out[(k * n + i, l * n + j)] = rho[(i * m + k, j * m + l)];
                }
            }
        }
    }
    out
}

/// Reorder tensor legs of a density: `perm[t]` names which input leg lands at
/// output slot t.
pub fn permute_legs(rho: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    assert_eq!(rho.nrows(), total);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let unflatten = |mut flat: usize, ds: &[usize]| -> Vec<usize> {
        let mut mi = vec![0usize; ds.len()];
        for i in (0..ds.len()).rev() {
            mi[i] = flat % ds[i];
            flat /= ds[i];
        }
        mi
    };
    let flatten = |mi: &[usize], ds: &[usize]| -> usize {
        let mut f = 0;
        for (x, d) in mi.iter().zip(ds.iter()) {
            f = f * d + x;
        }
        f
    };
    let mut out = CMat::zeros(total, total);
    for r in 0..total {
        let mr = unflatten(r, dims);
        let pr: Vec<usize> = perm.iter().map(|&p| mr[p]).collect();
        let rr = flatten(&pr, &out_dims);
        for ccol in 0..total {
            let mc = unflatten(ccol, dims);
            let pc: Vec<usize> = perm.iter().map(|&p| mc[p]).collect();
            out[(rr, flatten(&pc, &out_dims))] = rho[(r, ccol)];
        }
    }
    out
}

/// One product term of a separable decomposition (tensor picture).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductTerm {
    pub weight: f64,
    #[serde(with = "mat_json")]
    pub rho_a: CMat,
    #[serde(with = "mat_json")]
    pub rho_b: CMat,
}

mod mat_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct M {
            rows: usize,
            data: Vec<[f64; 2]>,
        }
        M { rows: m.nrows(), data: mat_to_json(m) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        #[derive(Deserialize)]
        struct M {
            rows: usize,
            data: Vec<[f64; 2]>,
        }
        let m = M::deserialize(d)?;
        mat_from_json(m.rows, m.rows, &m.data).map_err(serde::de::Error::custom)
    }
}

/// An explicit separable decomposition Σ w_j ρ_j^A ⊗ ρ_j^B.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProductEnsemble {
    pub terms: Vec<ProductTerm>,
}

impl ProductEnsemble {
    pub fn density(&self) -> CMat {
        let (na, nb) = (self.terms[0].rho_a.nrows(), self.terms[0].rho_b.nrows());
        let mut rho = CMat::zeros(na * nb, na * nb);
        for t in &self.terms {
            rho += kron(&t.rho_a, &t.rho_b).scale(t.weight);
        }
        rho
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Information-function bound Σ η(λ_j) on the mutual information of the
    /// induced state; weights must sum to one.
    pub fn information_bound(&self) -> Result<f64> {
        let w = self.total_weight();
        if (w - 1.0).abs() > 1e-10 {
            return Err(EntanglementError::BadWeights(w));
        }
        Ok(self.terms.iter().map(|t| eta(t.weight)).sum())
    }
}

/// Options for the relative-entanglement upper bound search.
#[derive(Clone, Debug)]
pub struct ReeOptions {
    /// Maximum number of product terms in the reported witness (K).
    pub max_terms: usize,
    /// Seeded restarts for the inner product-state search (R).
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when an outer iteration improves by less than this.
    pub tol: f64,
    /// Warm-start atoms injected into the witness pool.
    pub warm_start: Option<ProductEnsemble>,
}

impl Default for ReeOptions {
    fn default() -> Self {
        ReeOptions {
            max_terms: 16,
            restarts: 16,
            seed: 1,
            max_iters: 120,
            tol: 1e-10,
            warm_start: None,
        }
    }
}

/// Certified upper bound of E_R(ω): the minimum of S(ω‖σ) over the separable
/// states σ visited by a Frank-Wolfe search with explicit product witnesses.
pub fn relative_entanglement_upper(
    sys: &BipartiteSystem,
    rho: &CMat,
    opts: &ReeOptions,
) -> Result<(f64, ProductEnsemble)> {
    let (n, m) = sys.local_dims();
    if rho.nrows() != n * m {
        return Err(EntanglementError::Shape("density has wrong size".into()));
    }
    let mut atoms: Vec<(CMat, CMat)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    // always-available atoms: uniform product (full support) and the marginals
    atoms.push((identity(n).scale(1.0 / n as f64), identity(m).scale(1.0 / m as f64)));
    weights.push(0.05);
    let ra = sys.marginal_a(rho);
    let rb = sys.marginal_b(rho);
    atoms.push((ra.clone(), rb.clone()));
    weights.push(0.95);

    // spectral witnesses: Schmidt atoms of the dominant eigenvector and the
    // classical pinching in the marginal eigenbases
    for (w, a, b) in schmidt_atoms(rho, n, m) {
        atoms.push((a, b));
        weights.push(w * 1e-3);
    }
    for (w, a, b) in pinched_atoms(rho, &ra, &rb, n, m) {
        atoms.push((a, b));
        weights.push(w * 1e-3);
    }
    if let Some(warm) = &opts.warm_start {
        for t in &warm.terms {
            if t.weight > 1e-14 {
                atoms.push((t.rho_a.clone(), t.rho_b.clone()));
                weights.push(t.weight);
            }
        }
    }
    normalize(&mut weights);

    let objective = |atoms: &[(CMat, CMat)], weights: &[f64]| -> f64 {
        let sigma = mix(atoms, weights, n, m);
        match matrix_relative_entropy(rho, &sigma) {
            ExtReal::Finite(v) => v,
            ExtReal::PlusInfinity => f64::INFINITY,
        }
    };

    // the reported bound may never exceed the plain warm-start or product
    // configurations, whatever the search below does
    let mut best_config: Option<(f64, Vec<(CMat, CMat)>, Vec<f64>)> = None;
    let offer = |atoms: &[(CMat, CMat)], weights: &[f64],
                     best_config: &mut Option<(f64, Vec<(CMat, CMat)>, Vec<f64>)>| {
        let val = objective(atoms, weights);
        if val.is_finite()
            && best_config.as_ref().map(|(v, _, _)| val < *v).unwrap_or(true)
        {
            *best_config = Some((val, atoms.to_vec(), weights.to_vec()));
        }
    };
    {
        // marginal product alone (plus the full-rank floor atom)
        let base_atoms = vec![atoms[0].clone(), atoms[1].clone()];
        offer(&base_atoms, &[1e-9, 1.0 - 1e-9], &mut best_config);
    }
    if let Some(warm) = &opts.warm_start {
        let mut wa = vec![atoms[0].clone()];
        let mut ww = vec![1e-9];
        for t in &warm.terms {
            if t.weight > 1e-14 {
                wa.push((t.rho_a.clone(), t.rho_b.clone()));
                ww.push(t.weight);
            }
        }
        normalize(&mut ww);
        offer(&wa, &ww, &mut best_config);
    }

    // optimize weights over the current atom pool first
    reweight(rho, &mut weights, &atoms, n, m);
    let mut best = objective(&atoms, &weights);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _iter in 0..opts.max_iters {
        let sigma = mix(&atoms, &weights, n, m);
        let grad = gradient_matrix(rho, &sigma);
        // Frank-Wolfe direction: product pure state minimizing ⟨a⊗b|G|a⊗b⟩
        let (pa, pb) = min_product_state(&grad, n, m, opts.restarts, &mut rng);
        // exact line search on the segment towards the new atom
        let pi = kron(&pa, &pb);
        let f_at = |g: f64| -> f64 {
            let s = sigma.scale(1.0 - g) + pi.scale(g);
            match matrix_relative_entropy(rho, &s) {
                ExtReal::Finite(v) => v,
                ExtReal::PlusInfinity => f64::INFINITY,
            }
        };
        let gamma = golden_min(&f_at, 0.0, 1.0, 48);
        if gamma > 1e-14 {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            atoms.push((pa, pb));
            weights.push(gamma);
        }
        reweight(rho, &mut weights, &atoms, n, m);
        prune(&mut atoms, &mut weights, opts.max_terms);
        reweight(rho, &mut weights, &atoms, n, m);
        let val = objective(&atoms, &weights);
        let done = best - val < opts.tol;
        best = best.min(val);
        if done {
            break;
        }
    }

    offer(&atoms, &weights, &mut best_config);
    let (value, atoms, weights) = best_config.expect("at least one finite configuration");
    let ensemble = ProductEnsemble {
        terms: atoms
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 1e-14)
            .map(|((a, b), w)| ProductTerm { weight: w, rho_a: a, rho_b: b })
            .collect(),
    };
    Ok((value, ensemble))
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in w.iter_mut() {
            *x /= s;
        }
    }
}

fn mix(atoms: &[(CMat, CMat)], weights: &[f64], n: usize, m: usize) -> CMat {
    let mut sigma = CMat::zeros(n * m, n * m);
    for ((a, b), &w) in atoms.iter().zip(weights.iter()) {
        if w > 0.0 {
            sigma += kron(a, b).scale(w);
        }
    }
    sigma
}

/// Schmidt atoms of the dominant eigenvector of ρ: the optimal witness for
/// pure states (E_R of a pure state equals its marginal entropy).
fn schmidt_atoms(rho: &CMat, n: usize, m: usize) -> Vec<(f64, CMat, CMat)> {
    let (vals, vecs) = herm_eigen(rho);
    let top = vals.len() - 1;
    if vals[top] <= 0.0 {
        return Vec::new();
    }
    let psi = vecs.column(top);
    // reshape to an n×m matrix and take its SVD (Schmidt decomposition)
    let mut w = CMat::zeros(n, m);
    for i in 0..n {
        for k in 0..m {
            w[(i, k)] = psi[i * m + k];
        }
    }
    let (u, s, v) = crate::linalg::svd(&w);
    let mut out = Vec::new();
    let total: f64 = s.iter().map(|x| x * x).sum();
    for (idx, &sv) in s.iter().enumerate() {
        let lam = sv * sv / total.max(1e-300);
        if lam <= 1e-13 {
            continue;
        }
        let a = outer(&u.column(idx).into());
        let b = outer(&v.column(idx).map(|z| z.conj()).column(0).into());
        out.push((lam, a, b));
    }
    out
}

/// Classical pinching of ρ in the product eigenbasis of its marginals.
fn pinched_atoms(rho: &CMat, ra: &CMat, rb: &CMat, n: usize, m: usize) -> Vec<(f64, CMat, CMat)> {
    let (_, va) = herm_eigen(ra);
    let (_, vb) = herm_eigen(rb);
    let mut out = Vec::new();
    for i in 0..n {
        let pa = outer(&va.column(i).into());
        for k in 0..m {
            let pb = outer(&vb.column(k).into());
            let w = (kron(&pa, &pb) * rho).diagonal().iter().map(|z| z.re).sum::<f64>();
            if w > 1e-13 {
                out.push((w, pa.clone(), pb));
            }
        }
    }
    out
}

fn outer(v: &CVec) -> CMat {
    let n = v.len();
    let mut p = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = v[i] * v[j].conj();
        }
    }
    p
}

/// Gradient of σ ↦ −tr(ρ log σ) at σ (full support enforced by the caller):
/// G = −Σ_{ab} k(μ_a, μ_b) ⟨a|ρ|b⟩ |a⟩⟨b| with k the divided difference of ln.
fn gradient_matrix(rho: &CMat, sigma: &CMat) -> CMat {
    let (vals, vecs) = herm_eigen(sigma);
    let d = sigma.nrows();
    let rho_e = dagger(&vecs) * rho * &vecs;
    let mut g = CMat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let (x, y) = (vals[a].max(EIG_CLAMP), vals[b].max(EIG_CLAMP));
            let k = if (x - y).abs() < 1e-12 * x.max(y) {
                1.0 / x
            } else {
                (x.ln() - y.ln()) / (x - y)
            };
            g[(a, b)] = -rho_e[(a, b)] * cr(k);
        }
    }
    &vecs * g * dagger(&vecs)
}

/// Minimize ⟨a⊗b|G|a⊗b⟩ over product pure states by alternating smallest
/// eigenvector iterations with seeded restarts.
fn min_product_state(
    g: &CMat,
    n: usize,
    m: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> (CMat, CMat) {
    let mut best_val = f64::INFINITY;
    let mut best: Option<(CVec, CVec)> = None;
    for r in 0..restarts.max(1) {
        let mut bvec: CVec = if r == 0 {
            CVec::from_element(m, cr(1.0 / (m as f64).sqrt()))
        } else {
            let mut v = CVec::zeros(m);
            for i in 0..m {
                let re: f64 = rng.sample(rand_distr::StandardNormal);
                let im: f64 = rng.sample(rand_distr::StandardNormal);
                v[i] = c(re, im);
            }
            v.unscale(v.norm())
        };
        let mut avec = CVec::from_element(n, cr(1.0 / (n as f64).sqrt()));
        let mut val = f64::INFINITY;
        for _sweep in 0..24 {
            // contract over b to get the effective operator on the a side
            let ma = contract_b(g, &bvec, n, m);
            avec = min_eigvec(&ma);
            let mb = contract_a(g, &avec, n, m);
            bvec = min_eigvec(&mb);
            let newval = {
                let mut phi = CVec::zeros(n * m);
                for i in 0..n {
                    for k in 0..m {
                        phi[i * m + k] = avec[i] * bvec[k];
                    }
                }
                phi.dotc(&(g * &phi)).re
            };
            if (val - newval).abs() < 1e-13 {
                val = newval;
                break;
            }
            val = newval;
        }
        if val < best_val {
            best_val = val;
            best = Some((avec, bvec));
        }
    }
    let (a, b) = best.expect("at least one restart");
    (outer(&a), outer(&b))
}

fn contract_b(g: &CMat, b: &CVec, n: usize, m: usize) -> CMat {
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for ip in 0..n {
            let mut acc = c(0.0, 0.0);
            for j in 0..m {
                for jp in 0..m {
                    acc += b[j].conj() * g[(i * m + j, ip * m + jp)] * b[jp];
                }
            }
            out[(i, ip)] = acc;
        }
    }
    out
}

fn contract_a(g: &CMat, a: &CVec, n: usize, m: usize) -> CMat {
    let mut out = CMat::zeros(m, m);
    for j in 0..m {
        for jp in 0..m {
            let mut acc = c(0.0, 0.0);
            for i in 0..n {
                for ip in 0..n {
                    acc += a[i].conj() * g[(i * m + j, ip * m + jp)] * a[ip];
                }
            }
            out[(j, jp)] = acc;
        }
    }
    out
}

fn min_eigvec(h: &CMat) -> CVec {
    let (_, vecs) = herm_eigen(h);
    CVec::from_column_slice(vecs.column(0).as_slice())
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    // keep the endpoint if it is strictly better (γ = 0 must stay reachable)
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

/// Exponentiated-gradient descent on the simplex of atom weights.
fn reweight(rho: &CMat, weights: &mut Vec<f64>, atoms: &[(CMat, CMat)], n: usize, m: usize) {
    // the uniform atom keeps sigma full-rank; its floor must sit well above
    // the support clamp or the objective degenerates to +inf
    let floor = 1e-9;
    // keep the uniform atom's weight off exact zero so σ stays full rank
    normalize(weights);
    let f = |w: &[f64]| -> f64 {
        let sigma = mix(atoms, w, n, m);
        match matrix_relative_entropy(rho, &sigma) {
            ExtReal::Finite(v) => v,
            ExtReal::PlusInfinity => f64::INFINITY,
        }
    };
    let mut cur = f(weights);
    let mut step = 1.0;
    for _ in 0..60 {
        let sigma = mix(atoms, weights, n, m);
        let grad = gradient_matrix(rho, &sigma);
        let g: Vec<f64> = atoms
            .iter()
            .map(|(a, b)| (kron(a, b) * &grad).diagonal().iter().map(|z| z.re).sum::<f64>())
            .collect();
        let gmax = g.iter().cloned().fold(f64::MIN, f64::max);
        let mut trial: Vec<f64> = weights
            .iter()
            .zip(g.iter())
            .map(|(&w, &gi)| (w.max(floor)) * (-step * (gi - gmax)).exp())
            .collect();
        normalize(&mut trial);
        let val = f(&trial);
        if val < cur - 1e-14 {
            *weights = trial;
            cur = val;
            step *= 1.3;
        } else {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    // re-floor the uniform atom (index 0 by construction)
    if weights[0] < floor {
        weights[0] = floor;
        normalize(weights);
    }
}

fn prune(atoms: &mut Vec<(CMat, CMat)>, weights: &mut Vec<f64>, max_terms: usize) {
    // drop negligible atoms (never the uniform one at index 0)
    let mut i = atoms.len();
    while i > 1 {
        i -= 1;
        if weights[i] < 1e-13 {
            atoms.remove(i);
            weights.remove(i);
        }
    }
    while atoms.len() > max_terms.max(2) {
        let mut min_idx = 1;
        let mut min_w = f64::INFINITY;
        for (idx, &w) in weights.iter().enumerate().skip(1) {
            if w < min_w {
                min_w = w;
                min_idx = idx;
            }
        }
        atoms.remove(min_idx);
        weights.remove(min_idx);
        normalize(weights);
    }
}

// ---------------------------------------------------------------------------
// separable operations
// ---------------------------------------------------------------------------

/// A local cp map F_A ⊗ F_B in Kraus form (Heisenberg picture
/// `F(x) = Σ K† x K`, state transport `ρ ↦ Σ K ρ K†`).
#[derive(Clone, Debug)]
pub struct LocalCpMap {
    pub kraus_a: Vec<CMat>,
    pub kraus_b: Vec<CMat>,
}

impl LocalCpMap {
    pub fn from_kraus(kraus_a: Vec<CMat>, kraus_b: Vec<CMat>) -> Self {
        LocalCpMap { kraus_a, kraus_b }
    }

    /// Build a factor from the matrix of a superoperator acting on vec(ρ)
    /// (state picture, row-major vec). Fails when the Choi matrix has an
    /// eigenvalue below −1e−10.
    pub fn kraus_from_superoperator(sup: &CMat, n: usize) -> Result<Vec<CMat>> {
        // Choi matrix C[(i,k),(j,l)] = Φ(E_ij)[k,l]
        let mut choi = CMat::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = cr(1.0);
                let out = crate::linalg::unvec(&(sup * crate::linalg::vec_mat(&e)), n, n);
                for k in 0..n {
                    for l in 0..n {
                        choi[(i * n + k, j * n + l)] = out[(k, l)];
                    }
                }
            }
        }
        let (vals, vecs) = herm_eigen(&choi);
        if let Some(&min) = vals.first() {
            if min < -1e-10 {
                return Err(EntanglementError::NotCompletelyPositive(min));
            }
        }
        let mut kraus = Vec::new();
        for (idx, &v) in vals.iter().enumerate() {
            if v > 1e-12 {
                let col = vecs.column(idx);
                let mut k = CMat::zeros(n, n);
                for i in 0..n {
                    for kk in 0..n {
                        k[(kk, i)] = col[i * n + kk] * cr(v.sqrt());
                    }
                }
                kraus.push(k);
            }
        }
        Ok(kraus)
    }

    /// F(1) for the Heisenberg form, = (Σ K†K)_A ⊗ (Σ K†K)_B.
    pub fn unit_image(&self, n: usize, m: usize) -> CMat {
        let mut ua = CMat::zeros(n, n);
        for k in &self.kraus_a {
            ua += dagger(k) * k;
        }
        let mut ub = CMat::zeros(m, m);
        for k in &self.kraus_b {
            ub += dagger(k) * k;
        }
        kron(&ua, &ub)
    }

    /// Predual action on a tensor-picture density (unnormalized).
    pub fn transport(&self, rho: &CMat) -> CMat {
        let d = rho.nrows();
        let mut out = CMat::zeros(d, d);
        for ka in &self.kraus_a {
            for kb in &self.kraus_b {
                let k = kron(ka, kb);
                out += &k * rho * dagger(&k);
            }
        }
        out
    }

    fn transport_local(kraus: &[CMat], rho: &CMat) -> CMat {
        let mut out = CMat::zeros(rho.nrows(), rho.ncols());
        for k in kraus {
            out += k * rho * dagger(k);
        }
        out
    }
}

/// Outcome of a separable operation applied to a state.
#[derive(Clone, Debug)]
pub struct OperationOutcome {
    pub probability: f64,
    pub density: CMat,
    /// Transported separability certificate, when the input had one.
    pub ensemble: Option<ProductEnsemble>,
}

/// Apply a separable operation {F_j} with Σ F_j(1) = 1 to a state, returning
/// the outcome states with their probabilities. Separable inputs transport
/// their product ensembles term by term.
pub fn apply_separable_operation(
    sys: &BipartiteSystem,
    maps: &[LocalCpMap],
    rho: &CMat,
    ensemble: Option<&ProductEnsemble>,
) -> Result<Vec<OperationOutcome>> {
    let (n, m) = sys.local_dims();
    let mut unit_sum = CMat::zeros(n * m, n * m);
    for f in maps {
        unit_sum += f.unit_image(n, m);
    }
    let resid = (unit_sum - identity(n * m)).norm();
    if resid > 1e-10 {
        return Err(EntanglementError::NotNormalized(resid));
    }
    let mut out = Vec::new();
    for f in maps {
        let raw = f.transport(rho);
        let p = trace(&raw).re;
        if p <= 1e-12 {
            continue;
        }
        let density = raw.scale(1.0 / p);
        let ens = ensemble.map(|e| {
            let mut terms = Vec::new();
            for t in &e.terms {
                let ra = LocalCpMap::transport_local(&f.kraus_a, &t.rho_a);
                let rb = LocalCpMap::transport_local(&f.kraus_b, &t.rho_b);
                let (ta, tb) = (trace(&ra).re, trace(&rb).re);
                let w = t.weight * ta * tb / p;
                if w > 1e-14 && ta > 1e-14 && tb > 1e-14 {
                    terms.push(ProductTerm {
                        weight: w,
                        rho_a: ra.scale(1.0 / ta),
                        rho_b: rb.scale(1.0 / tb),
                    });
                }
            }
            ProductEnsemble { terms }
        });
        out.push(OperationOutcome { probability: p, density, ensemble: ens });
    }
    Ok(out)
}

/// Bell state density on C^2 ⊗ C^2.
pub fn bell_density() -> CMat {
    let mut psi = CVec::zeros(4);
    psi[0] = cr(1.0 / 2.0f64.sqrt());
    psi[3] = cr(1.0 / 2.0f64.sqrt());
    outer(&psi)
}

/// Purity check for the tensor picture.
pub fn is_pure(rho: &CMat, tol: f64) -> bool {
    let (vals, _) = herm_eigen(rho);
    vals.iter().rev().skip(1).all(|&v| v.abs() <= tol)
}

/// Support projection helper re-exported for the nuclearity chain.
pub fn density_support(rho: &CMat) -> CMat {
    support_projection(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;

    #[test]
    fn tensor_density_transport_roundtrip() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        let rho = bell_density();
        let f = sys.functional_from_tensor_density(&rho).unwrap();
        let back = sys.tensor_density(&f).unwrap();
        assert!((back - rho).norm() < 1e-10);
    }

    #[test]
    fn mutual_information_examples() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        // product state → 0
        let mut ra = CMat::zeros(2, 2);
        ra[(0, 0)] = cr(0.7);
        ra[(1, 1)] = cr(0.3);
        let rb = identity(2).scale(0.5);
        let prod = kron(&ra, &rb);
        assert!(sys.mutual_information(&prod).unwrap().abs() < 1e-10);

        // Bell state → 2 ln 2
        let ei = sys.mutual_information(&bell_density()).unwrap();
        assert!((ei - 2.0 * 2.0f64.ln()).abs() < 1e-9);

        // classical correlation ½(P00 + P11) → ln 2
        let mut cls = CMat::zeros(4, 4);
        cls[(0, 0)] = cr(0.5);
        cls[(3, 3)] = cr(0.5);
        let ei = sys.mutual_information(&cls).unwrap();
        assert!((ei - 2.0f64.ln()).abs() < 1e-9);

        // symmetry under swapping the systems
        let swapped = swap_tensor(&bell_density(), 2, 2);
        let ei2 = sys.mutual_information(&swapped).unwrap();
        assert!((ei2 - ei - 2.0f64.ln()).abs() < 1e-9 || (ei2 - 2.0 * 2.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn ree_upper_separable_and_bell() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        // explicitly separable state with its ensemble as warm start → ~0
        let mut terms = Vec::new();
        let mut pa = CMat::zeros(2, 2);
        pa[(0, 0)] = cr(1.0);
        let mut pb = CMat::zeros(2, 2);
        pb[(1, 1)] = cr(1.0);
        terms.push(ProductTerm { weight: 0.6, rho_a: pa.clone(), rho_b: pb.clone() });
        terms.push(ProductTerm { weight: 0.4, rho_a: pb.clone(), rho_b: pa.clone() });
        let ens = ProductEnsemble { terms };
        let rho = ens.density();
        let opts = ReeOptions { warm_start: Some(ens), max_iters: 20, ..Default::default() };
        let (val, _) = relative_entanglement_upper(&sys, &rho, &opts).unwrap();
        assert!(val < 1e-6, "separable state got E_R bound {val}");

        // Bell state → ln 2 (the Schmidt witness is optimal)
        let (val, witness) =
            relative_entanglement_upper(&sys, &bell_density(), &ReeOptions::default()).unwrap();
        assert!((val - 2.0f64.ln()).abs() < 1e-3, "bell E_R bound {val}");
        // the witness is a genuine separable state
        assert!((witness.total_weight() - 1.0).abs() < 1e-9);
        // and the bound never exceeds the mutual information
        let ei = sys.mutual_information(&bell_density()).unwrap();
        assert!(val <= ei + 1e-8);
    }

    #[test]
    fn e1_information_bound() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        // single term → bound 0, E_I = 0
        let mut pa = CMat::zeros(2, 2);
        pa[(0, 0)] = cr(1.0);
        let single = ProductEnsemble {
            terms: vec![ProductTerm { weight: 1.0, rho_a: pa.clone(), rho_b: pa.clone() }],
        };
        assert!(single.information_bound().unwrap().abs() < 1e-12);
        assert!(sys.mutual_information(&single.density()).unwrap() < 1e-10);

        // two equal-weight orthogonal product terms: bound = ln 2, E_I = ln 2
        let mut pb = CMat::zeros(2, 2);
        pb[(1, 1)] = cr(1.0);
        let two = ProductEnsemble {
            terms: vec![
                ProductTerm { weight: 0.5, rho_a: pa.clone(), rho_b: pa.clone() },
                ProductTerm { weight: 0.5, rho_a: pb.clone(), rho_b: pb.clone() },
            ],
        };
        let bound = two.information_bound().unwrap();
        assert!((bound - 2.0f64.ln()).abs() < 1e-12);
        let ei = sys.mutual_information(&two.density()).unwrap();
        assert!(ei <= bound + 1e-8);
        assert!((ei - bound).abs() < 1e-9, "classical pair is tight");
    }

    #[test]
    fn separable_operations() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        let rho = bell_density();
        // identity operation
        let id_map = LocalCpMap::from_kraus(vec![identity(2)], vec![identity(2)]);
        let out = apply_separable_operation(&sys, &[id_map], &rho, None).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].probability - 1.0).abs() < 1e-12);
        assert!((out[0].density.clone() - &rho).norm() < 1e-12);

        // local unitary conjugation leaves the E_R bound invariant
        let theta: f64 = 0.4;
        let mut u = CMat::zeros(2, 2);
        u[(0, 0)] = cr(theta.cos());
        u[(0, 1)] = cr(-theta.sin());
        u[(1, 0)] = cr(theta.sin());
        u[(1, 1)] = cr(theta.cos());
        let rot = LocalCpMap::from_kraus(vec![u.clone()], vec![identity(2)]);
        let out = apply_separable_operation(&sys, &[rot], &rho, None).unwrap();
        let opts = ReeOptions::default();
        let (v1, _) = relative_entanglement_upper(&sys, &rho, &opts).unwrap();
        let (v2, _) = relative_entanglement_upper(&sys, &out[0].density, &opts).unwrap();
        assert!((v1 - v2).abs() < 1e-3);

        // two-outcome local projective measurement on the Bell state
        let mut p0 = CMat::zeros(2, 2);
        p0[(0, 0)] = cr(1.0);
        let mut p1 = CMat::zeros(2, 2);
        p1[(1, 1)] = cr(1.0);
        let f0 = LocalCpMap::from_kraus(vec![p0], vec![identity(2)]);
        let f1 = LocalCpMap::from_kraus(vec![p1], vec![identity(2)]);
        let outcomes = apply_separable_operation(&sys, &[f0, f1], &rho, None).unwrap();
        let mut avg = 0.0;
        for o in &outcomes {
            let (v, _) = relative_entanglement_upper(&sys, &o.density, &opts).unwrap();
            avg += o.probability * v;
        }
        assert!(avg <= v1 + 1e-3, "measurement must not create entanglement");

        // post-measurement states are products: bounds are ~0
        for o in &outcomes {
            let (v, _) = relative_entanglement_upper(&sys, &o.density, &opts).unwrap();
            assert!(v < 1e-6);
        }

        // separable input transports its certificate term by term
        let mut pa = CMat::zeros(2, 2);
        pa[(0, 0)] = cr(1.0);
        let ens = ProductEnsemble {
            terms: vec![ProductTerm { weight: 1.0, rho_a: pa.clone(), rho_b: pa.clone() }],
        };
        let sep = ens.density();
        let id2 = LocalCpMap::from_kraus(vec![identity(2)], vec![identity(2)]);
        let out = apply_separable_operation(&sys, &[id2], &sep, Some(&ens)).unwrap();
        let cert = out[0].ensemble.as_ref().unwrap();
        assert!((cert.density() - out[0].density.clone()).norm() < 1e-10);
    }

    #[test]
    fn choi_extraction_rejects_non_cp() {
        // transpose map is positive but not completely positive
        let n = 2;
        let mut sup = CMat::zeros(4, 4);
        // vec(ρᵀ): (i,j) ↦ (j,i)
        for i in 0..n {
            for j in 0..n {
                sup[(j * n + i, i * n + j)] = cr(1.0);
            }
        }
        match LocalCpMap::kraus_from_superoperator(&sup, 2) {
            Err(EntanglementError::NotCompletelyPositive(v)) => assert!(v < -0.5),
            other => panic!("transpose accepted as cp: {other:?}"),
        }
        // a proper channel passes: ρ ↦ ½ρ + ½ZρZ
        let mut sup = CMat::zeros(4, 4);
        for i in 0..n {
            for j in 0..n {
                let sign = if i == j { 1.0 } else { 0.0 };
                sup[(i * n + j, i * n + j)] = cr(if sign > 0.0 { 1.0 } else { 0.0 });
            }
        }
        let kraus = LocalCpMap::kraus_from_superoperator(&sup, 2).unwrap();
        assert!(!kraus.is_empty());
    }

    #[test]
    fn concave_mutual_information_sandwich() {
        let sys = BipartiteSystem::qubits(2, 2).unwrap();
        let rho1 = bell_density();
        let mut rho2 = CMat::zeros(4, 4);
        rho2[(0, 0)] = cr(0.25);
        rho2[(1, 1)] = cr(0.25);
        rho2[(2, 2)] = cr(0.25);
        rho2[(3, 3)] = cr(0.25);
        let lam = 0.3;
        let mix = rho1.scale(lam) + rho2.scale(1.0 - lam);
        let ei_mix = sys.mutual_information(&mix).unwrap();
        let avg = lam * sys.mutual_information(&rho1).unwrap()
            + (1.0 - lam) * sys.mutual_information(&rho2).unwrap();
        let h = eta(lam) + eta(1.0 - lam);
        assert!(avg - h <= ei_mix + 1e-9);
        assert!(ei_mix <= avg + 2.0 * h + 1e-9);
    }

    #[test]
    fn permute_legs_reorders() {
        let a = identity(2).scale(0.5);
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = cr(1.0);
        let mut cc = CMat::zeros(2, 2);
        cc[(1, 1)] = cr(1.0);
        let abc = kron(&a, &kron(&b, &cc));
        let perm = permute_legs(&abc, &[2, 2, 2], &[1, 0, 2]);
        let expect = kron(&b, &kron(&a, &cc));
        assert!((perm - expect).norm() < 1e-12);
    }
}
