//! Command line harness: seeded instance generation, single-quantity
//! computations, invariant suites, pipeline certification and the distance
//! scan, with deterministic JSON or TSV reports.
//!
//! Exit codes: 0 all checks pass, 1 check failure, 2 usage error,
//! 3 numerical-validity error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vnlab::entanglement::{relative_entanglement_upper, BipartiteSystem, ReeOptions};
use vnlab::entropy::{
    relative_entropy, relative_entropy_cocycle_check, von_neumann_entropy, ExtReal,
    RelEntropyMethod,
};
use vnlab::harness::{
    self, certify_pipeline, generate_instance, run_suite, scan_distance, split_pair_from_scenario,
    InstanceKind, Scenario, ValueReport, SCHEMA_VERSION,
};
use vnlab::inclusion::{canonical_entanglement_entropy, takesaki_check};
use vnlab::nuclearity::{partition_function_upper, PnormStrategy, SplitPair};

#[derive(Parser)]
#[command(name = "vnlab", about = "numerical laboratory for finite-dimensional von Neumann algebras", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Tolerance override for suite checks (each check carries a natural
    /// tolerance used when this is absent).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Nuclearity exponent p ∈ (0,1).
    #[arg(long, global = true, default_value_t = 0.5)]
    p: f64,

    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a single quantity from scenario files.
    Compute(ComputeArgs),
    /// Run a registered invariant suite (or list them).
    Suite(SuiteArgs),
    /// Certify the full nuclearity-to-entanglement chain on a split pair.
    Certify(CertifyArgs),
    /// Distance scan on the 2⊗2 family.
    Scan(ScanArgs),
    /// Generate a scenario file.
    Gen(GenArgs),
}

#[derive(Args)]
struct ComputeArgs {
    #[arg(value_enum)]
    quantity: Quantity,
    /// Scenario file (kind must match the quantity).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Second scenario for two-state quantities.
    #[arg(long)]
    scenario_b: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Umegaki)]
    method: Method,
    /// Restarts for optimization-backed quantities.
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    /// Maximum witness terms for optimization-backed quantities.
    #[arg(long, default_value_t = 16)]
    terms: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    VonNeumannEntropy,
    RelativeEntropy,
    MutualInformation,
    ReeUpper,
    CanonicalEntropy,
    PartitionFunction,
    Takesaki,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Umegaki,
    Modular,
    Cocycle,
}

#[derive(Args)]
struct SuiteArgs {
    /// Suite name, or "list" to print the registry.
    name: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Replay a stored worst-case file and print its residual.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 10.0)]
    s_max: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Dimensions, comma separated (kind-specific).
    #[arg(long, default_value = "2,2")]
    dims: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    State,
    Bipartite,
    SplitPair,
    Inclusion,
}

enum Failure {
    Check,
    Usage(String),
    Numerical(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical validity error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Numerical(e.to_string())
}

fn emit(cli: &Cli, json: String) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => fs::write(path, json).map_err(|e| Failure::Usage(e.to_string())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            // a closed pipe (e.g. head) is not an error worth reporting
            let _ = writeln!(stdout, "{json}");
            Ok(())
        }
    }
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, Failure> {
    let raw = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| Failure::Usage(format!("bad scenario: {e}")))
}

fn load_split_pair(path: &PathBuf) -> Result<SplitPair, Failure> {
    match load_scenario(path)? {
        Scenario::SplitPair { a, b, omega, .. } => {
            split_pair_from_scenario(&a, &b, &omega).map_err(numerical)
        }
        _ => Err(Failure::Usage("expected a split_pair scenario".into())),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen(args) => {
            let dims: Vec<usize> = args
                .dims
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Usage(format!("bad dims: {e}")))?;
            let kind = match args.kind {
                Kind::State => InstanceKind::State,
                Kind::Bipartite => InstanceKind::Bipartite,
                Kind::SplitPair => InstanceKind::SplitPair,
                Kind::Inclusion => InstanceKind::Inclusion,
            };
            let scenario = generate_instance(kind, &dims, cli.seed).map_err(|e| match e {
                harness::HarnessError::LimitExceeded(_) => Failure::Usage(e.to_string()),
                other => numerical(other),
            })?;
            emit(cli, serde_json::to_string_pretty(&scenario).unwrap())
        }
        Command::Suite(args) => {
            if args.name == "list" {
                let names = harness::suite_names();
                return emit(cli, serde_json::to_string_pretty(&names).unwrap());
            }
            if let Some(replay_path) = &args.replay {
                let raw = fs::read_to_string(replay_path)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
                let value: serde_json::Value =
                    serde_json::from_str(&raw).map_err(|e| Failure::Usage(e.to_string()))?;
                let out = harness::replay(&value).map_err(numerical)?;
                return emit(cli, serde_json::to_string(&out).unwrap());
            }
            let report = run_suite(&args.name, cli.tol, cli.seed, args.trials).map_err(|e| match e {
                harness::HarnessError::UnknownSuite(_) => Failure::Usage(e.to_string()),
                other => numerical(other),
            })?;
            let pass = report.pass;
            let body = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).unwrap(),
                Format::Tsv => report.to_tsv(),
            };
            emit(cli, body)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Command::Certify(args) => {
            let sp = load_split_pair(&args.scenario)?;
            let report = certify_pipeline(&sp, cli.p).map_err(numerical)?;
            let pass = report.pass;
            let body = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).unwrap(),
                Format::Tsv => report.to_tsv(),
            };
            emit(cli, body)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Command::Scan(args) => {
            let report = scan_distance(args.s_max, cli.p, args.steps).map_err(numerical)?;
            let pass = report.pass;
            let body = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).unwrap(),
                Format::Tsv => report.to_tsv(),
            };
            emit(cli, body)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Command::Compute(args) => compute(cli, args),
    }
}

fn compute(cli: &Cli, args: &ComputeArgs) -> Result<(), Failure> {
    let need = |o: &Option<PathBuf>| -> Result<PathBuf, Failure> {
        o.clone().ok_or_else(|| Failure::Usage("--scenario is required".into()))
    };
    let report = match args.quantity {
        Quantity::VonNeumannEntropy => {
            let sc = load_scenario(&need(&args.scenario)?)?;
            let Scenario::State { functional, .. } = sc else {
                return Err(Failure::Usage("expected a state scenario".into()));
            };
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(von_neumann_entropy(&functional).map_err(numerical)?),
                method: "blockwise-spectral".into(),
                tolerance: 1e-12,
                witnesses: serde_json::Value::Null,
            }
        }
        Quantity::RelativeEntropy => {
            let sa = load_scenario(&need(&args.scenario)?)?;
            let sb = load_scenario(&need(&args.scenario_b)?)?;
            let (Scenario::State { functional: phi, .. }, Scenario::State { functional: psi, .. }) =
                (sa, sb)
            else {
                return Err(Failure::Usage("expected two state scenarios".into()));
            };
            match args.method {
                Method::Cocycle => {
                    let est = relative_entropy_cocycle_check(&phi, &psi, 1e-4).map_err(numerical)?;
                    ValueReport {
                        schema_version: SCHEMA_VERSION,
                        value: ExtReal::Finite(est),
                        method: "cocycle-derivative".into(),
                        tolerance: 1e-4,
                        witnesses: serde_json::Value::Null,
                    }
                }
                m => {
                    let method = if m == Method::Umegaki {
                        RelEntropyMethod::Umegaki
                    } else {
                        RelEntropyMethod::Modular
                    };
                    let v = relative_entropy(&phi, &psi, method).map_err(numerical)?;
                    ValueReport {
                        schema_version: SCHEMA_VERSION,
                        value: v,
                        method: if m == Method::Umegaki { "umegaki" } else { "modular" }.into(),
                        tolerance: 1e-8,
                        witnesses: serde_json::Value::Null,
                    }
                }
            }
        }
        Quantity::MutualInformation => {
            let sc = load_scenario(&need(&args.scenario)?)?;
            let Scenario::Bipartite { a, b, omega_density, .. } = sc else {
                return Err(Failure::Usage("expected a bipartite scenario".into()));
            };
            let sys = BipartiteSystem::new(&a, &b).map_err(numerical)?;
            let (n, m) = sys.local_dims();
            let rho = vnlab::algebra::mat_from_json(n * m, n * m, &omega_density)
                .map_err(numerical)?;
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(sys.mutual_information(&rho).map_err(numerical)?),
                method: "umegaki-product-log".into(),
                tolerance: 1e-8,
                witnesses: serde_json::Value::Null,
            }
        }
        Quantity::ReeUpper => {
            let sc = load_scenario(&need(&args.scenario)?)?;
            let Scenario::Bipartite { a, b, omega_density, ensemble, .. } = sc else {
                return Err(Failure::Usage("expected a bipartite scenario".into()));
            };
            let sys = BipartiteSystem::new(&a, &b).map_err(numerical)?;
            let (n, m) = sys.local_dims();
            let rho = vnlab::algebra::mat_from_json(n * m, n * m, &omega_density)
                .map_err(numerical)?;
            let opts = ReeOptions {
                max_terms: args.terms,
                restarts: args.restarts,
                seed: cli.seed,
                warm_start: ensemble,
                ..Default::default()
            };
            let (value, witness) = relative_entanglement_upper(&sys, &rho, &opts).map_err(numerical)?;
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(value),
                method: "frank-wolfe-upper-bound".into(),
                tolerance: 1e-3,
                witnesses: serde_json::to_value(&witness).unwrap(),
            }
        }
        Quantity::CanonicalEntropy => {
            let sp = load_split_pair(&need(&args.scenario)?)?;
            let ec = canonical_entanglement_entropy(&sp).map_err(numerical)?;
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(ec.value),
                method: "canonical-factor-restriction".into(),
                tolerance: 1e-8,
                witnesses: serde_json::json!({
                    "value_prime": ec.value_prime,
                    "mutual_information": ec.mutual_information,
                    "factor_checks": ec.factor.report,
                }),
            }
        }
        Quantity::PartitionFunction => {
            let sp = load_split_pair(&need(&args.scenario)?)?;
            let pb = partition_function_upper(&sp, cli.p, PnormStrategy::Greedy)
                .map_err(numerical)?;
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(pb.value),
                method: "svd-greedy-upper-bound".into(),
                tolerance: 0.0,
                witnesses: serde_json::json!({"terms": pb.dec.terms.len(), "p": cli.p}),
            }
        }
        Quantity::Takesaki => {
            let sc = load_scenario(&need(&args.scenario)?)?;
            let Scenario::Inclusion { algebra, subalgebra, phi, .. } = sc else {
                return Err(Failure::Usage("expected an inclusion scenario".into()));
            };
            let ok = takesaki_check(&subalgebra, &algebra, &phi).map_err(numerical)?;
            ValueReport {
                schema_version: SCHEMA_VERSION,
                value: ExtReal::Finite(if ok { 1.0 } else { 0.0 }),
                method: "modular-flow-criterion".into(),
                tolerance: 1e-9,
                witnesses: serde_json::Value::Null,
            }
        }
    };
    emit(cli, serde_json::to_string_pretty(&report).unwrap())
}
