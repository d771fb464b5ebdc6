//! Relative entropy, von Neumann entropy and the entropy of a subalgebra.
//!
//! Relative entropy is available through two independent routes that must
//! agree: a block Umegaki formula on densities and a modular-spectral formula
//! `S(φ‖ψ) = -⟨ξ, log Δ_{η,ξ} ξ⟩` evaluated in a standard form built at the
//! tracial reference state. A third route differentiates the Connes cocycle
//! numerically and is exposed as a consistency check.
//!
//! All entropies are in nats. The value +∞ is a dedicated token
//! ([`ExtReal::PlusInfinity`]), produced exactly when the support condition
//! `s(φ) ≤ s(ψ)` fails — never by floating-point overflow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{FdAlgebra, Functional, FunctionalKind};
use crate::linalg::{
    c, cr, herm_eigen, herm_log_support, herm_pow, identity, op_norm, orthonormalize,
    span_residual, support_projection, CMat, CVec, EIG_CLAMP,
};
use crate::modular::{ModularError, StandardForm};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("functionals live on different algebras")]
    AlgebraMismatch,
    #[error("operation needs positive functionals, got {0:?}")]
    NotPositive(FunctionalKind),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("ensemble does not reconstruct the functional (residual {0:.3e})")]
    BadDecomposition(f64),
    #[error("not a subalgebra inclusion")]
    NotSubalgebra,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

pub type Result<T> = std::result::Result<T, EntropyError>;

/// Extended real value: finite, or the exact +∞ token.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PlusInfinity,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(*v),
            ExtReal::PlusInfinity => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(v) => *v,
            ExtReal::PlusInfinity => f64::INFINITY,
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PlusInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtReal::Finite(v)),
            Raw::Str(s) if s == "+inf" => Ok(ExtReal::PlusInfinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad extended real: {s}"))),
        }
    }
}

/// The information function η(t) = −t ln t, with η(0) = 0 by continuity.
pub fn eta(t: f64) -> f64 {
    if t <= EIG_CLAMP {
        0.0
    } else {
        -t * t.ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelEntropyMethod {
    Umegaki,
    Modular,
}

fn require_positive(f: &Functional) -> Result<()> {
    match f.kind() {
        FunctionalKind::Positive | FunctionalKind::State => Ok(()),
        k => Err(EntropyError::NotPositive(k)),
    }
}

/// Relative entropy S(φ‖ψ) in nats, +∞ when supp φ ≰ supp ψ.
pub fn relative_entropy(
    phi: &Functional,
    psi: &Functional,
    method: RelEntropyMethod,
) -> Result<ExtReal> {
    if phi.algebra() != psi.algebra() {
        return Err(EntropyError::AlgebraMismatch);
    }
    require_positive(phi)?;
    require_positive(psi)?;
    match method {
        RelEntropyMethod::Umegaki => umegaki(phi, psi),
        RelEntropyMethod::Modular => modular_route(phi, psi),
    }
}

fn umegaki(phi: &Functional, psi: &Functional) -> Result<ExtReal> {
    let alg = phi.algebra();
    let comps_phi = alg.block_components(phi.density());
    let comps_psi = alg.block_components(psi.density());
    // support condition s(φ) ≤ s(ψ), blockwise
    for (cp, cq) in comps_phi.iter().zip(comps_psi.iter()) {
        let p_phi = support_projection(cp);
        let p_psi = support_projection(cq);
        let leak = op_norm(&((identity(cq.nrows()) - &p_psi) * &p_phi));
        if leak > 1e-9 {
            return Ok(ExtReal::PlusInfinity);
        }
    }
    let mut s = 0.0;
    for (k, (cp, cq)) in comps_phi.iter().zip(comps_psi.iter()).enumerate() {
        let (_, m) = alg.blocks()[k];
        let log_p = herm_log_support(cp);
        let log_q = herm_log_support(cq);
        let val = (cp * (log_p - log_q))
            .diagonal()
            .iter()
            .map(|z| z.re)
            .sum::<f64>();
        s += m as f64 * val;
    }
    Ok(ExtReal::Finite(s))
}

fn modular_route(phi: &Functional, psi: &Functional) -> Result<ExtReal> {
    let alg = phi.algebra();
    let trace_state = Functional::tracial_state(alg);
    let sf = StandardForm::gns(alg, &trace_state)?;
    let xi = sf.natural_cone_vector(phi)?;
    let eta_v = sf.natural_cone_vector(psi)?;
    // support test at the vector level: ξ must lie in [M η]
    let m_eta: Vec<CVec> = sf.rep_units().iter().map(|r| r * &eta_v).collect();
    let basis = orthonormalize(&m_eta, 1e-10);
    if span_residual(&basis, &xi) > 1e-8 * xi.norm().max(1.0) {
        return Ok(ExtReal::PlusInfinity);
    }
    // S(φ‖ψ) = −⟨ξ, log Δ_{η,ξ} ξ⟩ evaluated spectrally on the support
    let rel = sf.relative_modular(&eta_v, &xi)?;
    let (vals, vecs) = herm_eigen(&rel.delta);
    let mut s = 0.0;
    let mut kernel_mass = 0.0;
    for (i, &lam) in vals.iter().enumerate() {
        let col = vecs.column(i);
        let mut amp = c(0.0, 0.0);
        for r in 0..xi.len() {
            amp += col[r].conj() * xi[r];
        }
        let w = amp.norm_sqr();
        if lam <= EIG_CLAMP {
            kernel_mass += w;
        } else {
            s -= lam.ln() * w;
        }
    }
    if kernel_mass > 1e-9 * xi.norm_squared().max(1.0) {
        return Ok(ExtReal::PlusInfinity);
    }
    Ok(ExtReal::Finite(s))
}

/// Central-difference check of the cocycle-derivative representation
/// `S(φ‖ψ) = i d/dt φ((Dψ : Dφ)_t)|_{t=0}`. Returns the estimate.
pub fn relative_entropy_cocycle_check(phi: &Functional, psi: &Functional, h: f64) -> Result<f64> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(EntropyError::BadParameter(format!(
            "step {h:e} outside [1e-6, 1e-2]"
        )));
    }
    if phi.algebra() != psi.algebra() {
        return Err(EntropyError::AlgebraMismatch);
    }
    match umegaki(phi, psi)? {
        ExtReal::PlusInfinity => Err(EntropyError::NotApplicable(
            "relative entropy is infinite; the derivative formula does not apply".into(),
        )),
        ExtReal::Finite(_) => {
            let alg = phi.algebra();
            let sf = StandardForm::gns(alg, &Functional::tracial_state(alg))?;
            let up = sf.connes_cocycle(psi, phi, h)?;
            let um = sf.connes_cocycle(psi, phi, -h)?;
            let deriv = (phi.eval(&up) - phi.eval(&um)) / cr(2.0 * h);
            Ok((c(0.0, 1.0) * deriv).re)
        }
    }
}

/// Von Neumann entropy of a state, computed blockwise with the block trace
/// weights: S = Σ η over the spectrum of the canonical abstract density.
pub fn von_neumann_entropy(phi: &Functional) -> Result<f64> {
    require_positive(phi)?;
    Ok(phi.abstract_spectrum().iter().map(|&w| eta(w)).sum())
}

/// Von Neumann entropy of a density matrix on a full factor.
pub fn matrix_vn_entropy(rho: &CMat) -> f64 {
    let (vals, _) = herm_eigen(rho);
    vals.iter().map(|&v| eta(v.max(0.0))).sum()
}

/// Umegaki relative entropy of density matrices on a full matrix factor,
/// with the exact +∞ token on support violation.
pub fn matrix_relative_entropy(rho: &CMat, sigma: &CMat) -> ExtReal {
    let p_rho = support_projection(rho);
    let p_sig = support_projection(sigma);
    let leak = op_norm(&((identity(sigma.nrows()) - &p_sig) * &p_rho));
    if leak > 1e-9 {
        return ExtReal::PlusInfinity;
    }
    let val = (rho * (herm_log_support(rho) - herm_log_support(sigma)))
        .diagonal()
        .iter()
        .map(|z| z.re)
        .sum::<f64>();
    ExtReal::Finite(val)
}

/// An ensemble term: weight λ and a state on the algebra.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleTerm {
    pub weight: f64,
    pub state: Functional,
}

/// Value Σ λ_i S(φ_i ‖ φ) of a decomposition (the bracket whose supremum is
/// the von Neumann entropy). Fails unless Σ λ_i φ_i = φ within 1e-10.
pub fn entropy_decomposition_value(phi: &Functional, ensemble: &[EnsembleTerm]) -> Result<f64> {
    check_decomposition(phi, ensemble)?;
    let mut total = 0.0;
    for t in ensemble {
        match relative_entropy(&t.state, phi, RelEntropyMethod::Umegaki)? {
            ExtReal::Finite(v) => total += t.weight * v,
            ExtReal::PlusInfinity => {
                return Err(EntropyError::NotApplicable(
                    "ensemble term with support outside the state".into(),
                ))
            }
        }
    }
    Ok(total)
}

fn check_decomposition(phi: &Functional, ensemble: &[EnsembleTerm]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(EntropyError::BadDecomposition(f64::NAN));
    }
    let mut weight_sum = 0.0;
    let mut rec = CMat::zeros(phi.algebra().ambient_dim(), phi.algebra().ambient_dim());
    for t in ensemble {
        if t.weight <= 0.0 {
            return Err(EntropyError::BadParameter(
                "ensemble weight must be positive".into(),
            ));
        }
        if t.state.algebra() != phi.algebra() {
            return Err(EntropyError::AlgebraMismatch);
        }
        weight_sum += t.weight;
        rec += t.state.density().scale(t.weight);
    }
    let resid = (rec - phi.density()).norm();
    if resid > 1e-10 * phi.density().norm().max(1.0) || (weight_sum - 1.0).abs() > 1e-10 {
        return Err(EntropyError::BadDecomposition(
            resid.max((weight_sum - 1.0).abs()),
        ));
    }
    Ok(())
}

/// Per-decomposition value of the subalgebra entropy: Σ λ_i S_A(φ_i|_A ‖ φ|_A)
/// for an ensemble of φ on the big algebra.
pub fn subalgebra_entropy_value(
    sub: &FdAlgebra,
    phi: &Functional,
    ensemble: &[EnsembleTerm],
) -> Result<f64> {
    check_decomposition(phi, ensemble)?;
    let phi_a = phi.restrict(sub)?;
    let mut total = 0.0;
    for t in ensemble {
        let rest = t.state.restrict(sub)?;
        match relative_entropy(&rest, &phi_a, RelEntropyMethod::Umegaki)? {
            ExtReal::Finite(v) => total += t.weight * v,
            ExtReal::PlusInfinity => {
                return Err(EntropyError::NotApplicable(
                    "restricted term escapes the support of the restricted state".into(),
                ))
            }
        }
    }
    Ok(total)
}

/// Spectral ensemble of a state: pure components from the blockwise
/// eigendecomposition of the canonical density. Realizes the supremum in the
/// entropy definition (value = S(φ)).
pub fn spectral_ensemble(phi: &Functional) -> Result<Vec<EnsembleTerm>> {
    require_positive(phi)?;
    let alg = phi.algebra();
    let comps = alg.block_components(phi.density());
    let mut terms = Vec::new();
    for (k, comp) in comps.iter().enumerate() {
        let (n, m) = alg.blocks()[k];
        let (vals, vecs) = herm_eigen(comp);
        for i in 0..n {
            let lam = vals[i] * m as f64;
            if lam <= 1e-14 {
                continue;
            }
            let col = vecs.column(i);
            let mut proj = CMat::zeros(n, n);
            for r in 0..n {
                for cc in 0..n {
                    proj[(r, cc)] = col[r] * col[cc].conj();
                }
            }
            let mut blocks: Vec<CMat> = alg
                .blocks()
                .iter()
                .map(|&(nk, _)| CMat::zeros(nk, nk))
                .collect();
            blocks[k] = proj.scale(1.0 / m as f64);
            let dens = alg.assemble(&blocks);
            terms.push(EnsembleTerm {
                weight: lam,
                state: Functional::state(alg, &dens)?,
            });
        }
    }
    Ok(terms)
}

/// Result of the subalgebra-entropy search: a certified lower bound together
/// with the ensemble achieving it.
#[derive(Clone, Debug)]
pub struct ConditionalEntropyEstimate {
    pub lower_bound: f64,
    pub ensemble: Vec<EnsembleTerm>,
}

/// Certified lower bound of the entropy H_φ^B(A) of the subalgebra A ⊆ B with
/// respect to φ, by searching over decompositions of φ on B.
///
/// `max_terms` (K) bounds the ensemble size, `restarts` (R) the number of
/// seeded measurement draws. For a fixed seed the result is monotone
/// nondecreasing in both K and R because the candidate set is nested.
pub fn conditional_entropy(
    phi: &Functional,
    sub: &FdAlgebra,
    max_terms: usize,
    restarts: usize,
    seed: u64,
) -> Result<ConditionalEntropyEstimate> {
    if max_terms == 0 || restarts == 0 {
        return Err(EntropyError::BadParameter("K and R must be at least 1".into()));
    }
    let big = phi.algebra();
    if !big.contains_algebra(sub, 1e-8) {
        return Err(EntropyError::NotSubalgebra);
    }
    let mut best_val = 0.0;
    let mut best_ens = vec![EnsembleTerm { weight: 1.0, state: phi.clone() }];

    let consider =
        |ens: Vec<EnsembleTerm>, best_val: &mut f64, best_ens: &mut Vec<EnsembleTerm>| {
            if let Ok(v) = subalgebra_entropy_value(sub, phi, &ens) {
                if v > *best_val {
                    *best_val = v;
                    *best_ens = ens;
                }
            }
        };

    // deterministic candidate: spectral ensemble, merged down to K terms
    if let Ok(spec) = spectral_ensemble(phi) {
        let merged = merge_ensemble(phi, spec, max_terms);
        consider(merged, &mut best_val, &mut best_ens);
    }

    // seeded measurement ensembles, nested over (k ≤ K, r ≤ R)
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _r in 0..restarts {
        let u = random_block_unitary(big, &mut rng);
        for k in 2..=max_terms {
            if let Some(ens) = pinched_ensemble(phi, &u, k) {
                consider(ens, &mut best_val, &mut best_ens);
            }
        }
    }
    Ok(ConditionalEntropyEstimate { lower_bound: best_val, ensemble: best_ens })
}

/// Merge the smallest-weight terms of an ensemble until at most K remain.
fn merge_ensemble(
    phi: &Functional,
    mut terms: Vec<EnsembleTerm>,
    max_terms: usize,
) -> Vec<EnsembleTerm> {
    if terms.len() <= max_terms {
        return terms;
    }
    terms.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
    let kept: Vec<EnsembleTerm> = terms.drain(..max_terms - 1).collect();
    let rest_weight: f64 = terms.iter().map(|t| t.weight).sum();
    let mut rest_density = CMat::zeros(phi.algebra().ambient_dim(), phi.algebra().ambient_dim());
    for t in &terms {
        rest_density += t.state.density().scale(t.weight / rest_weight);
    }
    let mut out = kept;
    if let Ok(state) = Functional::state(phi.algebra(), &rest_density) {
        out.push(EnsembleTerm { weight: rest_weight, state });
    }
    out
}

/// Haar-ish random unitary inside the algebra (blockwise QR of a Ginibre draw).
pub(crate) fn random_block_unitary(alg: &FdAlgebra, rng: &mut ChaCha8Rng) -> CMat {
    let comps: Vec<CMat> = alg
        .blocks()
        .iter()
        .map(|&(n, _)| {
            let g = crate::harness::ginibre(n, rng);
            g.qr().q()
        })
        .collect();
    alg.assemble(&comps)
}

/// Ensemble from the pinching measurement λ_i ρ_i = ρ^{1/2} M_i ρ^{1/2} with
/// M_i projections onto grouped u-basis vectors (grouping round-robin).
fn pinched_ensemble(phi: &Functional, u: &CMat, groups: usize) -> Option<Vec<EnsembleTerm>> {
    let alg = phi.algebra();
    let d = alg.ambient_dim();
    let sqrt_rho = {
        let comps: Vec<CMat> = alg
            .block_components(phi.density())
            .iter()
            .map(|ck| herm_pow(ck, 0.5))
            .collect();
        alg.assemble(&comps)
    };
    let groups = groups.min(d);
    let mut terms = Vec::new();
    for gidx in 0..groups {
        let mut proj = CMat::zeros(d, d);
        for t in (gidx..d).step_by(groups) {
            let col = u.column(t);
            for r in 0..d {
                for ccc in 0..d {
                    proj[(r, ccc)] += col[r] * col[ccc].conj();
                }
            }
        }
        let proj = alg.hs_project(&proj);
        let raw = &sqrt_rho * proj * &sqrt_rho;
        let w = raw.diagonal().iter().map(|z| z.re).sum::<f64>();
        if w <= 1e-12 {
            continue;
        }
        let state = Functional::state(alg, &raw.scale(1.0 / w)).ok()?;
        terms.push(EnsembleTerm { weight: w, state });
    }
    if terms.is_empty() {
        return None;
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    for t in &mut terms {
        t.weight /= total;
    }
    Some(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FdAlgebra;
    use crate::linalg::cr;

    fn diag_state(alg: &FdAlgebra, entries: &[f64]) -> Functional {
        let d = alg.ambient_dim();
        let mut rho = CMat::zeros(d, d);
        for (i, &e) in entries.iter().enumerate() {
            rho[(i, i)] = cr(e);
        }
        Functional::state(alg, &rho).unwrap()
    }

    #[test]
    fn relative_entropy_basics() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        let phi = diag_state(&alg, &[0.5, 0.5]);
        for m in [RelEntropyMethod::Umegaki, RelEntropyMethod::Modular] {
            let v = relative_entropy(&phi, &phi, m).unwrap();
            assert!(v.finite().unwrap().abs() < 1e-10);
        }
        // diag(1,0) vs diag(1/2,1/2) → ln 2
        let pure = diag_state(&alg, &[1.0, 0.0]);
        for m in [RelEntropyMethod::Umegaki, RelEntropyMethod::Modular] {
            let v = relative_entropy(&pure, &phi, m).unwrap().finite().unwrap();
            assert!((v - (2.0f64).ln()).abs() < 1e-9, "got {v}");
        }
        // reversed: support violated → exact +∞ token on both routes
        for m in [RelEntropyMethod::Umegaki, RelEntropyMethod::Modular] {
            let v = relative_entropy(&phi, &pure, m).unwrap();
            assert_eq!(v, ExtReal::PlusInfinity);
        }
    }

    #[test]
    fn relative_entropy_routes_agree() {
        let alg = FdAlgebra::full_matrix_algebra(3).unwrap();
        let mut rho = CMat::zeros(3, 3);
        rho[(0, 0)] = cr(0.5);
        rho[(1, 1)] = cr(0.3);
        rho[(2, 2)] = cr(0.2);
        rho[(0, 1)] = c(0.1, 0.05);
        rho[(1, 0)] = c(0.1, -0.05);
        let phi = Functional::state(&alg, &rho).unwrap();
        let mut sig = CMat::zeros(3, 3);
        sig[(0, 0)] = cr(0.25);
        sig[(1, 1)] = cr(0.35);
        sig[(2, 2)] = cr(0.4);
        sig[(1, 2)] = c(0.0, 0.1);
        sig[(2, 1)] = c(0.0, -0.1);
        let psi = Functional::state(&alg, &sig).unwrap();
        let a = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let b = relative_entropy(&phi, &psi, RelEntropyMethod::Modular)
            .unwrap()
            .finite()
            .unwrap();
        assert!((a - b).abs() < 1e-8, "umegaki {a} vs modular {b}");
    }

    #[test]
    fn relative_entropy_respects_multiplicity() {
        let m2 = FdAlgebra::full_matrix_algebra(2).unwrap();
        let one2 = FdAlgebra::scalars(2).unwrap();
        let alg = m2.tensor(&one2); // blocks [(2,2)] on C^4
        let phi = diag_state(&alg, &[0.4, 0.4, 0.1, 0.1]);
        let psi = diag_state(&alg, &[0.3, 0.3, 0.2, 0.2]);
        let a = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let b = relative_entropy(&phi, &psi, RelEntropyMethod::Modular)
            .unwrap()
            .finite()
            .unwrap();
        assert!((a - b).abs() < 1e-8);
        // densities are block-diagonal here: classic KL of (0.8,0.2) vs (0.6,0.4)
        let expect = 0.8 * (0.8f64 / 0.6).ln() + 0.2 * (0.2f64 / 0.4).ln();
        assert!((a - expect).abs() < 1e-9);
    }

    #[test]
    fn cocycle_check_matches() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        let phi = diag_state(&alg, &[1.0 - 1e-9, 1e-9]); // nearly pure, still faithful
        let psi = diag_state(&alg, &[0.5, 0.5]);
        let s = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let est = relative_entropy_cocycle_check(&phi, &psi, 1e-4).unwrap();
        assert!((est - s).abs() < 1e-6, "estimate {est} vs {s}");
        // Richardson extrapolation of two steps as an independent oracle
        let e1 = relative_entropy_cocycle_check(&phi, &psi, 2e-4).unwrap();
        let richardson = (4.0 * est - e1) / 3.0;
        assert!((richardson - s).abs() < 1e-7);

        // faithful M_3 pair agrees within 1e-4
        let alg3 = FdAlgebra::full_matrix_algebra(3).unwrap();
        let phi3 = diag_state(&alg3, &[0.5, 0.3, 0.2]);
        let mut sig = CMat::zeros(3, 3);
        sig[(0, 0)] = cr(0.2);
        sig[(1, 1)] = cr(0.45);
        sig[(2, 2)] = cr(0.35);
        sig[(0, 2)] = c(0.05, 0.08);
        sig[(2, 0)] = c(0.05, -0.08);
        let psi3 = Functional::state(&alg3, &sig).unwrap();
        let s3 = relative_entropy(&phi3, &psi3, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let est3 = relative_entropy_cocycle_check(&phi3, &psi3, 1e-4).unwrap();
        assert!((est3 - s3).abs() < 1e-4);

        // infinite case is rejected
        let pure = diag_state(&alg, &[1.0, 0.0]);
        assert!(matches!(
            relative_entropy_cocycle_check(&psi, &pure, 1e-4),
            Err(EntropyError::NotApplicable(_))
        ));
    }

    #[test]
    fn von_neumann_entropy_examples() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        assert!(von_neumann_entropy(&diag_state(&alg, &[1.0, 0.0])).unwrap() < 1e-12);
        let alg3 = FdAlgebra::full_matrix_algebra(3).unwrap();
        let mix = Functional::tracial_state(&alg3);
        assert!((von_neumann_entropy(&mix).unwrap() - 3.0f64.ln()).abs() < 1e-12);
        let phi = diag_state(&alg, &[0.75, 0.25]);
        let expect = eta(0.75) + eta(0.25); // ≈ 0.5623
        let got = von_neumann_entropy(&phi).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.5623351446188083).abs() < 1e-12);
    }

    #[test]
    fn entropy_on_scalars_with_multiplicity_is_zero() {
        // the scalars inside M_2 carry a single state, of zero entropy
        let alg = FdAlgebra::scalars(2).unwrap();
        let phi = Functional::tracial_state(&alg);
        assert!(von_neumann_entropy(&phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn decomposition_value_examples() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        let phi = diag_state(&alg, &[0.75, 0.25]);
        let v = entropy_decomposition_value(
            &phi,
            &[EnsembleTerm { weight: 1.0, state: phi.clone() }],
        )
        .unwrap();
        assert!(v.abs() < 1e-12);
        // spectral ensemble achieves S(φ)
        let spec = spectral_ensemble(&phi).unwrap();
        let v = entropy_decomposition_value(&phi, &spec).unwrap();
        let s = von_neumann_entropy(&phi).unwrap();
        assert!((v - s).abs() < 1e-10);
        // a generic two-state mixture stays below S(φ)
        let a = diag_state(&alg, &[0.9, 0.1]);
        let b = diag_state(&alg, &[0.6, 0.4]);
        let mix_dens = a.density().scale(0.5) + b.density().scale(0.5);
        let mix = Functional::state(&alg, &mix_dens).unwrap();
        let v = entropy_decomposition_value(
            &mix,
            &[
                EnsembleTerm { weight: 0.5, state: a },
                EnsembleTerm { weight: 0.5, state: b },
            ],
        )
        .unwrap();
        assert!(v <= von_neumann_entropy(&mix).unwrap() + 1e-8);
        // bad ensemble is rejected
        let bad = entropy_decomposition_value(
            &phi,
            &[EnsembleTerm { weight: 1.0, state: diag_state(&alg, &[0.5, 0.5]) }],
        );
        assert!(matches!(bad, Err(EntropyError::BadDecomposition(_))));
    }

    #[test]
    fn conditional_entropy_examples() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        let phi = diag_state(&alg, &[0.7, 0.3]);
        // A = scalars → 0
        let scalars = FdAlgebra::scalars(2).unwrap();
        let est = conditional_entropy(&phi, &scalars, 4, 4, 7).unwrap();
        assert!(est.lower_bound.abs() < 1e-10);
        // A = B = M_2 → the spectral witness reaches S(φ)
        let est = conditional_entropy(&phi, &alg, 4, 4, 7).unwrap();
        let s = von_neumann_entropy(&phi).unwrap();
        assert!((est.lower_bound - s).abs() < 1e-9, "{} vs {s}", est.lower_bound);
        // monotone in K and R for a fixed seed
        let e11 = conditional_entropy(&phi, &alg, 1, 1, 3).unwrap().lower_bound;
        let e42 = conditional_entropy(&phi, &alg, 4, 2, 3).unwrap().lower_bound;
        let e84 = conditional_entropy(&phi, &alg, 8, 4, 3).unwrap().lower_bound;
        assert!(e11 <= e42 + 1e-12 && e42 <= e84 + 1e-12);
    }

    #[test]
    fn scaling_and_pinsker() {
        let alg = FdAlgebra::full_matrix_algebra(2).unwrap();
        let phi = diag_state(&alg, &[0.8, 0.2]);
        let psi = diag_state(&alg, &[0.45, 0.55]);
        let s = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let (lam, mu) = (0.7, 1.9);
        let s_scaled =
            relative_entropy(&phi.scale(lam), &psi.scale(mu), RelEntropyMethod::Umegaki)
                .unwrap()
                .finite()
                .unwrap();
        let expect = lam * s - lam * (mu / lam).ln();
        assert!((s_scaled - expect).abs() < 1e-9);
        // Pinsker: S ≥ ‖φ−ψ‖²/2
        let dist = phi.distance(&psi);
        assert!(s >= dist * dist / 2.0 - 1e-12);
    }
}
