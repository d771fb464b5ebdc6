//! Property-based invariants over randomized functionals and states.

use proptest::prelude::*;

use vnlab::algebra::{polarize_matrix, FdAlgebra};
use vnlab::entropy::{relative_entropy, von_neumann_entropy, RelEntropyMethod};
use vnlab::linalg::{c, cr, dagger, trace_norm, CMat};
use vnlab::Functional;

fn herm_matrix(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0),
        n * n,
    )
    .prop_map(move |entries| {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (re, im) = entries[i * n + j];
                m[(i, j)] = c(re, im);
            }
        }
        (&m + dagger(&m)).scale(0.5)
    })
}

fn density(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |entries| {
        let mut g = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (re, im) = entries[i * n + j];
                g[(i, j)] = c(re, im);
            }
        }
        let mut p = &g * dagger(&g) + CMat::identity(n, n).scale(0.05);
        let t: f64 = p.diagonal().iter().map(|z| z.re).sum();
        p = p.scale(1.0 / t);
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // serialized functionals round-trip with bit-identical doubles
    #[test]
    fn serde_roundtrip_bit_exact(rho in density(3)) {
        let alg = FdAlgebra::full_matrix_algebra(3).unwrap();
        let phi = Functional::state(&alg, &rho).unwrap();
        let s = serde_json::to_string(&phi).unwrap();
        let back: Functional = serde_json::from_str(&s).unwrap();
        for (a, b) in phi.density().iter().zip(back.density().iter()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        prop_assert_eq!(s, serde_json::to_string(&back).unwrap());
    }

    // Jordan parts reconstruct the functional with orthogonal supports
    #[test]
    fn jordan_reconstruction(h in herm_matrix(3)) {
        let alg = FdAlgebra::full_matrix_algebra(3).unwrap();
        let phi = Functional::from_ambient_density(
            &alg,
            &h,
            vnlab::FunctionalKind::SelfAdjoint,
        ).unwrap();
        let (p, n) = phi.jordan();
        prop_assert!((p.density() - n.density() - phi.density()).norm() < 1e-10);
        prop_assert!((p.norm() + n.norm() - phi.norm()).abs() < 1e-9);
    }

    // polarization reconstructs any density with parts below the total norm
    #[test]
    fn polarization_parts_bounded(rho in density(2), h in herm_matrix(2)) {
        let m = &rho + h.map(|z| z * c(0.0, 0.7));
        let parts = polarize_matrix(&m);
        let units = [cr(1.0), c(0.0, 1.0), cr(-1.0), c(0.0, -1.0)];
        let mut rec = CMat::zeros(2, 2);
        for (alpha, p) in parts.iter().enumerate() {
            rec += p.map(|z| z * units[alpha]);
            prop_assert!(trace_norm(p) <= trace_norm(&m) + 1e-9);
        }
        prop_assert!((rec - m).norm() < 1e-10);
    }

    // Pinsker: S(φ‖ψ) ≥ ‖φ−ψ‖²/2, and both routes agree
    #[test]
    fn pinsker_and_route_agreement(r1 in density(3), r2 in density(3)) {
        let alg = FdAlgebra::full_matrix_algebra(3).unwrap();
        let phi = Functional::state(&alg, &r1).unwrap();
        let psi = Functional::state(&alg, &r2).unwrap();
        let s = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap().finite().unwrap();
        let s2 = relative_entropy(&phi, &psi, RelEntropyMethod::Modular)
            .unwrap().finite().unwrap();
        prop_assert!((s - s2).abs() < 1e-8);
        let d = phi.distance(&psi);
        prop_assert!(s >= d * d / 2.0 - 1e-10);
    }

    // mixing can only raise entropy (concavity lower half)
    #[test]
    fn entropy_concave(r1 in density(3), r2 in density(3), lam in 0.05f64..0.95) {
        let alg = FdAlgebra::full_matrix_algebra(3).unwrap();
        let phi = Functional::state(&alg, &r1).unwrap();
        let psi = Functional::state(&alg, &r2).unwrap();
        let mix_dens = r1.scale(lam) + r2.scale(1.0 - lam);
        let mix = Functional::state(&alg, &mix_dens).unwrap();
        let s_mix = von_neumann_entropy(&mix).unwrap();
        let avg = lam * von_neumann_entropy(&phi).unwrap()
            + (1.0 - lam) * von_neumann_entropy(&psi).unwrap();
        prop_assert!(s_mix >= avg - 1e-9);
    }
}
