//! Acceptance suite: every release criterion with its pinned tolerance, one
//! printed pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vnlab::algebra::FdAlgebra;
use vnlab::entanglement::{bell_density, relative_entanglement_upper, BipartiteSystem, ReeOptions};
use vnlab::entropy::{
    relative_entropy, relative_entropy_cocycle_check, ExtReal, RelEntropyMethod,
};
use vnlab::harness::{
    self, algebra_cycle, generate_instance, random_density, random_inclusion, random_state,
    run_suite, scan_distance, InstanceKind,
};
use vnlab::inclusion::{
    canonical_entanglement_entropy, conditional_expectation, otani_witness,
    standard_implementation, takesaki_check, verify_jones_structure,
};
use vnlab::linalg::{c, cr, herm_eigen, CMat};
use vnlab::nuclearity::{
    dominating_separable, four_split, hs3_product_decomposition, intermediate_entropy_bound,
    intermediate_entropy_eval, mutual_information_bound, pnorm_upper, xi_map, PnormStrategy, Side,
    SplitPair,
};
use vnlab::Functional;

struct Criterion {
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion { name, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn finish(self, all: &mut Vec<String>) {
        if self.failures.is_empty() {
            println!("criterion {}: PASS", self.name);
        } else {
            println!(
                "criterion {}: FAIL ({} violations; first: {})",
                self.name,
                self.failures.len(),
                self.failures[0]
            );
            all.push(format!("{}: {}", self.name, self.failures[0]));
        }
    }
}

#[test]
fn acceptance() {
    let mut failures = Vec::new();

    criterion_1_dual_routes(&mut failures);
    criterion_2_support_semantics(&mut failures);
    criterion_3_property_suites(&mut failures);
    criterion_4_bell_benchmarks(&mut failures);
    criterion_5_pipeline(&mut failures);
    criterion_6_jones(&mut failures);
    criterion_7_canonical_factor(&mut failures);
    criterion_8_distance_scan(&mut failures);
    criterion_9_determinism(&mut failures);

    assert!(failures.is_empty(), "acceptance failures: {failures:?}");
}

/// 1. Umegaki vs modular-spectral agreement ≤ 1e-8 on 200 seeded pairs over
/// M_2, M_3 and two-block algebras; cocycle-derivative route ≤ 1e-4 at
/// h = 1e-4.
fn criterion_1_dual_routes(all: &mut Vec<String>) {
    let mut crit = Criterion::new("1 dual-route agreement");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..200 {
        let alg = algebra_cycle(trial);
        let phi = random_state(&alg, &mut rng);
        let psi = random_state(&alg, &mut rng);
        let a = relative_entropy(&phi, &psi, RelEntropyMethod::Umegaki)
            .unwrap()
            .finite()
            .unwrap();
        let b = relative_entropy(&phi, &psi, RelEntropyMethod::Modular)
            .unwrap()
            .finite()
            .unwrap();
        crit.check((a - b).abs() <= 1e-8, || {
            format!("trial {trial}: umegaki {a} vs modular {b}")
        });
        if trial < 50 {
            let est = relative_entropy_cocycle_check(&phi, &psi, 1e-4).unwrap();
            crit.check((est - a).abs() <= 1e-4, || {
                format!("trial {trial}: cocycle {est} vs {a}")
            });
        }
    }
    crit.finish(all);
}

/// 2. 50 constructed support-violating pairs: both routes return the exact
/// +∞ token.
fn criterion_2_support_semantics(all: &mut Vec<String>) {
    let mut crit = Criterion::new("2 support semantics");
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..50 {
        let n = 2 + trial % 3;
        let alg = FdAlgebra::full_matrix_algebra(n).unwrap();
        let u = harness::random_unitary(n, &mut rng);
        // ψ supported away from the last u-direction, φ with mass on it
        let mut d_psi = random_density(n, &mut rng);
        let mut d_phi = random_density(n, &mut rng);
        let last = u.column(n - 1).into_owned();
        let mut proj = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                proj[(i, j)] = last[i] * last[j].conj();
            }
        }
        let keep = vnlab::linalg::identity(n) - &proj;
        d_psi = &keep * d_psi * &keep;
        let t = d_psi.diagonal().iter().map(|z| z.re).sum::<f64>();
        d_psi = d_psi.scale(1.0 / t);
        d_phi += proj.scale(0.4);
        let t = d_phi.diagonal().iter().map(|z| z.re).sum::<f64>();
        d_phi = d_phi.scale(1.0 / t);
        let phi = Functional::state(&alg, &d_phi).unwrap();
        let psi = Functional::state(&alg, &d_psi).unwrap();
        for m in [RelEntropyMethod::Umegaki, RelEntropyMethod::Modular] {
            let v = relative_entropy(&phi, &psi, m).unwrap();
            crit.check(v == ExtReal::PlusInfinity, || {
                format!("trial {trial}: {m:?} returned {v:?}")
            });
        }
    }
    crit.finish(all);
}

/// 3. Property suites at 100 trials each: relative entropy properties
/// (scaling exact to 1e-9, Pinsker, joint convexity, cp monotonicity, the
/// chain rule and tensor splitting), entropy properties (concavity sandwich,
/// strong subadditivity on 2×2×2, tensor additivity) and the per-
/// decomposition subalgebra-entropy inequalities.
fn criterion_3_property_suites(all: &mut Vec<String>) {
    let mut crit = Criterion::new("3 property suites");
    for suite in [
        "relative-entropy-properties",
        "entropy-properties",
        "conditional-entropy",
    ] {
        let report = run_suite(suite, None, 303, 100).unwrap();
        for chk in &report.checks {
            crit.check(chk.pass, || {
                format!(
                    "{suite}/{}: {} failures, worst residual {:.3e}",
                    chk.check_id, chk.failures, chk.worst_residual
                )
            });
        }
    }
    crit.finish(all);
}

/// 4. Bell benchmarks: E_I = 2 ln 2 ± 1e-9; the E_R upper bound reaches
/// ln 2 ± 1e-3 within 64 restarts; E_C = ln 2 ± 1e-8 on the doubled
/// construction; E_I ≤ 2 E_C + 1e-8.
fn criterion_4_bell_benchmarks(all: &mut Vec<String>) {
    let mut crit = Criterion::new("4 bell benchmarks");
    let sys = BipartiteSystem::qubits(2, 2).unwrap();
    let rho = bell_density();
    let ln2 = 2.0f64.ln();

    let ei = sys.mutual_information(&rho).unwrap();
    crit.check((ei - 2.0 * ln2).abs() <= 1e-9, || format!("E_I = {ei}"));

    let opts = ReeOptions { restarts: 64, seed: 4, ..Default::default() };
    let (er, witness) = relative_entanglement_upper(&sys, &rho, &opts).unwrap();
    crit.check((er - ln2).abs() <= 1e-3, || format!("E_R bound = {er}"));
    crit.check((witness.total_weight() - 1.0).abs() <= 1e-9, || {
        format!("witness mass {}", witness.total_weight())
    });

    let sp = SplitPair::from_state(2, 2, &rho).unwrap();
    let ec = canonical_entanglement_entropy(&sp).unwrap();
    crit.check((ec.value - ln2).abs() <= 1e-8, || format!("E_C = {}", ec.value));
    crit.check(
        ec.mutual_information <= 2.0 * ec.value + 1e-8,
        || format!("E_I {} vs 2E_C {}", ec.mutual_information, 2.0 * ec.value),
    );
    crit.finish(all);
}

/// 5. Bound-chain soundness on 100 seeded standard split pairs (2⊗2 and 2⊗3
/// with full doubling) for p ∈ {0.25, 0.5, 0.75}: reconstruction ≤ 1e-8,
/// (1+λ)^p ≤ 4μ_p, min eig(σ−ω) ≥ −1e-10, ‖σ‖^p ≤ μ_p, μ_p ≥ 1,
/// E_I ≤ c_p z + η(z−1) − η(z) at z = μ_p^{1/p}, and the intermediate
/// witness below z ln z + c_p z^p. Zero violations allowed.
fn criterion_5_pipeline(all: &mut Vec<String>) {
    let mut crit = Criterion::new("5 bound-chain soundness");
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..100 {
        let (n, m) = if trial % 10 < 7 { (2, 2) } else { (2, 3) };
        let rho = random_density(n * m, &mut rng);
        let sp = SplitPair::from_state(n, m, &rho).unwrap();
        let si = standard_implementation(&sp).unwrap();
        let cf = vnlab::inclusion::canonical_factor(&sp).unwrap();
        let ei = sp
            .system()
            .mutual_information(&sp.omega_density().unwrap())
            .unwrap();
        for &p in &[0.25, 0.5, 0.75] {
            let xa = xi_map(&sp, Side::A);
            let (_, dec) = pnorm_upper(&xa, p, PnormStrategy::Greedy).unwrap();
            let signed = match hs3_product_decomposition(&sp, &dec) {
                Ok(s) => s,
                Err(e) => {
                    crit.check(false, || format!("trial {trial} p={p}: {e}"));
                    continue;
                }
            };
            // reconstruction residual branch is enforced inside (≤ 1e-8)
            let mu_p = signed.cost();
            crit.check(mu_p >= 1.0 - 1e-8, || format!("trial {trial} p={p}: μ_p = {mu_p}"));
            match four_split(&sp, &signed) {
                Ok(fs) => {
                    let lhs = (1.0 + fs.lambda).powf(p);
                    crit.check(lhs <= 4.0 * mu_p + 1e-8, || {
                        format!("trial {trial} p={p}: (1+λ)^p = {lhs} vs 4μ_p = {}", 4.0 * mu_p)
                    });
                }
                Err(e) => crit.check(false, || format!("trial {trial} p={p}: {e}")),
            }
            let dom = match dominating_separable(&sp, &signed) {
                Ok(d) => d,
                Err(e) => {
                    crit.check(false, || format!("trial {trial} p={p}: {e}"));
                    continue;
                }
            };
            let diff = &dom.density - sp.omega_density().unwrap();
            let (vals, _) = herm_eigen(&diff);
            crit.check(vals[0] >= -1e-10, || {
                format!("trial {trial} p={p}: min eig(σ−ω) = {}", vals[0])
            });
            crit.check(dom.norm.powf(p) <= mu_p + 1e-8, || {
                format!("trial {trial} p={p}: ‖σ‖^p = {} vs μ_p = {mu_p}", dom.norm.powf(p))
            });
            let z = mu_p.powf(1.0 / p);
            let bound = mutual_information_bound(z, p).unwrap();
            crit.check(ei <= bound + 1e-8, || {
                format!("trial {trial} p={p}: E_I = {ei} vs bound {bound}")
            });
            let cand = otani_witness(&sp, &dom, &si).unwrap();
            match intermediate_entropy_eval(&sp, &cf.factor, &[cand]) {
                Ok((value, _)) => {
                    let ibound = intermediate_entropy_bound(z, p).unwrap();
                    crit.check(value <= ibound + 1e-8, || {
                        format!("trial {trial} p={p}: witness {value} vs {ibound}")
                    });
                }
                Err(e) => crit.check(false, || format!("trial {trial} p={p}: {e}")),
            }
        }
    }
    crit.finish(all);
}

/// 6. Jones structure on 50 inclusion instances passing the Takesaki check:
/// all four structure items ≤ 1e-9 and the natural-cone checks on 50 sampled
/// cone vectors each.
fn criterion_6_jones(all: &mut Vec<String>) {
    let mut crit = Criterion::new("6 jones structure");
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..50 {
        let n = 2 + trial % 3;
        let partition = match (n, trial % 2) {
            (2, _) => vec![1, 1],
            (3, 0) => vec![1, 2],
            (3, _) => vec![1, 1, 1],
            (4, 0) => vec![2, 2],
            _ => vec![1, 3],
        };
        let (alg, sub, phi) = random_inclusion(n, &partition, &mut rng).unwrap();
        let tak = takesaki_check(&sub, &alg, &phi).unwrap();
        crit.check(tak, || format!("trial {trial}: takesaki rejected a block-compatible state"));
        if !tak {
            continue;
        }
        let ce = conditional_expectation(&sub, &alg, &phi).unwrap();
        let report = verify_jones_structure(&ce, 50).unwrap();
        for chk in &report.checks {
            crit.check(chk.pass, || {
                format!("trial {trial}: {} residual {:.3e}", chk.name, chk.residual)
            });
        }
    }
    crit.finish(all);
}

/// 7. Canonical factor on 50 factor-pair instances: J-invariance,
/// intermediacy, type I certification, the join and commutant-intersection
/// formulas (residual ≤ 1e-9 scale gates inside), and S_F(ω) = S_{F′}(ω)
/// within 1e-8.
fn criterion_7_canonical_factor(all: &mut Vec<String>) {
    let mut crit = Criterion::new("7 canonical factor");
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for trial in 0..50 {
        let (n, m) = if trial % 10 < 7 { (2, 2) } else { (2, 3) };
        let rho = random_density(n * m, &mut rng);
        let sp = SplitPair::from_state(n, m, &rho).unwrap();
        let ec = canonical_entanglement_entropy(&sp).unwrap();
        for chk in &ec.factor.report {
            crit.check(chk.pass, || {
                format!("trial {trial}: {} residual {:.3e}", chk.name, chk.residual)
            });
        }
        crit.check((ec.value - ec.value_prime).abs() <= 1e-8, || {
            format!("trial {trial}: S_F = {} vs S_F' = {}", ec.value, ec.value_prime)
        });
    }
    crit.finish(all);
}

/// 8. Distance scan on the 2⊗2 family with 10 steps: μ₁ nonincreasing,
/// E_R ≤ ln μ₁ + 1e-6 at every step, E_R(10) ≤ 1e-3, E_I(0) = 2 ln 2 ± 1e-8.
fn criterion_8_distance_scan(all: &mut Vec<String>) {
    let mut crit = Criterion::new("8 distance scan");
    let scan = scan_distance(10.0, 0.5, 10).unwrap();
    crit.check(scan.monotone, || "μ₁ not monotone".into());
    for row in &scan.rows {
        crit.check(row.e_r_upper <= row.log_mu_1 + 1e-6, || {
            format!("s = {}: E_R {} vs ln μ₁ {}", row.s, row.e_r_upper, row.log_mu_1)
        });
    }
    let first = &scan.rows[0];
    crit.check((first.e_i - 2.0 * 2.0f64.ln()).abs() <= 1e-8, || {
        format!("E_I(0) = {}", first.e_i)
    });
    let last = scan.rows.last().unwrap();
    crit.check(last.e_r_upper <= 1e-3, || format!("E_R(10) = {}", last.e_r_upper));
    crit.finish(all);
}

/// 9. Determinism: repeated runs with fixed seeds produce byte-identical
/// JSON reports (suites, scans, generated scenarios).
fn criterion_9_determinism(all: &mut Vec<String>) {
    let mut crit = Criterion::new("9 determinism");
    let r1 = run_suite("relative-entropy-properties", None, 909, 10).unwrap();
    let r2 = run_suite("relative-entropy-properties", None, 909, 10).unwrap();
    crit.check(
        serde_json::to_string(&r1).unwrap() == serde_json::to_string(&r2).unwrap(),
        || "suite reports differ".into(),
    );
    let s1 = scan_distance(5.0, 0.5, 5).unwrap();
    let s2 = scan_distance(5.0, 0.5, 5).unwrap();
    crit.check(
        serde_json::to_string(&s1).unwrap() == serde_json::to_string(&s2).unwrap(),
        || "scan reports differ".into(),
    );
    let g1 = generate_instance(InstanceKind::SplitPair, &[2, 3], 909).unwrap();
    let g2 = generate_instance(InstanceKind::SplitPair, &[2, 3], 909).unwrap();
    crit.check(
        serde_json::to_string(&g1).unwrap() == serde_json::to_string(&g2).unwrap(),
        || "generated scenarios differ".into(),
    );
    // replay of a stored worst case reproduces the residual bit for bit
    let worst = &r1.checks[0].worst_instance;
    let out = harness::replay(worst).unwrap();
    crit.check(
        out.residual.to_bits() == r1.checks[0].worst_residual.to_bits(),
        || "replay changed the residual".into(),
    );
    let _ = c(0.0, 0.0);
    let _ = cr(0.0);
    crit.finish(all);
}
