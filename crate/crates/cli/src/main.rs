//! `matchprec`: build cube-like graphs, decide matchings, check structural
//! lemmas, compute preclusion numbers, and run exhaustive or sampled
//! verification sweeps.
//!
//! Exit codes: 0 when the command succeeds and the checked property holds,
//! 1 when violations were found (the violating certificates are written to
//! the `--certs` file or to standard output), 2 on usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use matchprec_core::{
    check_neighborhood_lemmas, fractional_pm_witness, has_fractional_pm, preclusion_number,
    read_graph, sampled_check, scheinerman_oracle, tutte_oracle, verify_super, write_graph,
    EnumerationPlan, FamilySpec, Graph, GraphIdentity, Mode, PlanConstraints, PreclusionError,
    SampleOptions, VerifyOptions, VerifyOutcome, DEFAULT_CHUNK_TARGET,
};

#[derive(Parser)]
#[command(
    name = "matchprec",
    version,
    about = "Exact matching-preclusion toolkit for cube-like interconnection networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// Binary hypercube Q_n.
    Hypercube,
    /// Augmented cube AQ_n.
    Aq,
    /// Generalized augmented cube with seeded random cross matchings.
    Gaq,
    /// Generalized augmented cube with restricted (no short alternating
    /// cycles) cross matchings.
    Rgaq,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleMethod {
    /// Fractional perfect matching via the independent-set condition.
    Scheinerman,
    /// Perfect matching via the odd-component condition.
    Tutte,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a family instance and write its edge list plus a family
    /// spec sidecar (`<out stem>.spec.json`).
    Build {
        #[arg(long, value_enum)]
        family: Family,
        /// Family dimension n.
        #[arg(long)]
        dim: u32,
        /// Seed for the randomized families (required for gaq/rgaq).
        #[arg(long)]
        seed: Option<u64>,
        /// Edge-list output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether the graph has a fractional perfect matching and
    /// optionally write a half-integral witness.
    Fpm {
        #[arg(long)]
        graph: PathBuf,
        /// Write the witness JSON here when a matching exists.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Run one of the slow set-quantified oracles and print its verdict.
    Oracle {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        method: OracleMethod,
    },
    /// Check the neighborhood-difference lemmas at the given gap.
    Lemmas {
        #[arg(long)]
        graph: PathBuf,
        /// Required neighborhood difference (1 or 2).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        gap: u32,
        /// Write the violation report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compute the preclusion number of the graph in the given mode.
    Number {
        #[arg(long)]
        graph: PathBuf,
        /// mp, smp, fmp, or fsmp.
        #[arg(long)]
        mode: Mode,
    },
    /// Exhaustively classify every fault set of the given size and report
    /// any that are preclusive without being basic/trivial.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        /// mp, smp, fmp, or fsmp.
        #[arg(long)]
        mode: Mode,
        /// Total fault-set size.
        #[arg(long)]
        size: usize,
        /// Only fault sets containing this vertex.
        #[arg(long)]
        fix_vertex: Option<u8>,
        /// Only fault sets with at least this many fault vertices.
        #[arg(long, default_value_t = 0)]
        min_vertices: usize,
        /// Exclude fault edges incident to fault vertices.
        #[arg(long)]
        no_incident: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Progress line to standard error every N cases (0 disables).
        #[arg(long, default_value_t = 1_000_000)]
        progress: u64,
        /// Checkpoint file updated after every folded chunk.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Violating certificates (JSON lines) are appended here.
        #[arg(long)]
        certs: Option<PathBuf>,
        /// Deterministic report JSON written here (timings go to a
        /// `.meta.json` sidecar).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Continue from the checkpoint instead of starting over.
        #[arg(long)]
        resume: bool,
        /// Stop after this many chunks (resume later with --resume).
        #[arg(long)]
        max_chunks: Option<u64>,
    },
    /// Classify uniform random fault sets of the given size,
    /// deterministically per seed.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        /// mp, smp, fmp, or fsmp.
        #[arg(long)]
        mode: Mode,
        /// Total fault-set size.
        #[arg(long)]
        size: usize,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        /// Only fault sets containing this vertex.
        #[arg(long)]
        fix_vertex: Option<u8>,
        /// Only fault sets with at least this many fault vertices.
        #[arg(long, default_value_t = 0)]
        min_vertices: usize,
        /// Exclude fault edges incident to fault vertices.
        #[arg(long)]
        no_incident: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Progress line to standard error every N samples (0 disables).
        #[arg(long, default_value_t = 1_000_000)]
        progress: u64,
        /// Every sampled case is written here as a certificate line.
        #[arg(long)]
        certs: Option<PathBuf>,
        /// Deterministic report JSON written here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn spec_sidecar(path: &Path) -> PathBuf {
    path.with_extension("spec.json")
}

fn load_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph file {}", path.display()))?;
    read_graph(&text).with_context(|| format!("parsing graph file {}", path.display()))
}

/// Loads the graph and, when a family-spec sidecar sits next to it, the
/// family identity for certificates (after checking the sidecar really
/// describes this graph). Without a sidecar the identity is the graph's
/// canonical hash.
fn load_graph_with_identity(path: &Path) -> Result<(Graph, GraphIdentity)> {
    let g = load_graph(path)?;
    let sidecar = spec_sidecar(path);
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)
            .with_context(|| format!("reading family spec {}", sidecar.display()))?;
        let spec = FamilySpec::from_json(&text)
            .with_context(|| format!("parsing family spec {}", sidecar.display()))?;
        let rebuilt = spec.build().context("rebuilding the family instance")?;
        if rebuilt.canonical_hash() != g.canonical_hash() {
            bail!(
                "family spec {} does not describe graph {}",
                sidecar.display(),
                path.display()
            );
        }
        Ok((g, GraphIdentity::Family(spec)))
    } else {
        let identity = GraphIdentity::of_graph(&g);
        Ok((g, identity))
    }
}

fn write_report(report_path: &Path, report_json: &str, meta_json: &str) -> Result<()> {
    std::fs::write(report_path, report_json)
        .with_context(|| format!("writing report {}", report_path.display()))?;
    let meta_path = report_path.with_extension("meta.json");
    std::fs::write(&meta_path, meta_json)
        .with_context(|| format!("writing run metadata {}", meta_path.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Build { family, dim, seed, out } => build(family, dim, seed, &out),
        Command::Fpm { graph, witness } => fpm(&graph, witness.as_deref()),
        Command::Oracle { graph, method } => oracle(&graph, method),
        Command::Lemmas { graph, gap, report } => lemmas(&graph, gap, report.as_deref()),
        Command::Number { graph, mode } => number(&graph, mode),
        Command::Verify {
            graph,
            mode,
            size,
            fix_vertex,
            min_vertices,
            no_incident,
            threads,
            progress,
            checkpoint,
            certs,
            report,
            resume,
            max_chunks,
        } => {
            let constraints = PlanConstraints {
                fixed_vertex: fix_vertex,
                min_vertices,
                forbid_incident_edges: no_incident,
                edges_only: mode.edges_only(),
            };
            let opts = VerifyOptions {
                threads,
                progress_every: progress,
                max_chunks,
                checkpoint_path: checkpoint,
                certs_path: certs,
                resume,
            };
            verify(&graph, mode, size, constraints, opts, report.as_deref())
        }
        Command::Sample {
            graph,
            mode,
            size,
            samples,
            seed,
            fix_vertex,
            min_vertices,
            no_incident,
            threads,
            progress,
            certs,
            report,
        } => {
            let constraints = PlanConstraints {
                fixed_vertex: fix_vertex,
                min_vertices,
                forbid_incident_edges: no_incident,
                edges_only: mode.edges_only(),
            };
            let opts = SampleOptions {
                threads,
                progress_every: progress,
                certs_path: certs,
            };
            sample(&graph, mode, size, samples, seed, constraints, opts, report.as_deref())
        }
    }
}

fn build(family: Family, dim: u32, seed: Option<u64>, out: &Path) -> Result<u8> {
    let spec = match family {
        Family::Hypercube => FamilySpec::Hypercube { n: dim },
        Family::Aq => FamilySpec::AugmentedCube { n: dim },
        Family::Gaq | Family::Rgaq => {
            let seed =
                seed.context("--seed is required for the randomized families (gaq, rgaq)")?;
            let restricted = matches!(family, Family::Rgaq);
            FamilySpec::random_gaq(dim, seed, restricted)?
        }
    };
    let g = spec.build().context("constructing the family instance")?;
    std::fs::write(out, write_graph(&g))
        .with_context(|| format!("writing edge list {}", out.display()))?;
    let sidecar = spec_sidecar(out);
    std::fs::write(&sidecar, spec.to_json())
        .with_context(|| format!("writing family spec {}", sidecar.display()))?;
    println!(
        "wrote {}: {} vertices, {} edges, {}-regular; family spec: {}",
        out.display(),
        g.vertex_count(),
        g.edge_count(),
        g.min_degree(),
        sidecar.display()
    );
    Ok(0)
}

fn fpm(graph: &Path, witness_out: Option<&Path>) -> Result<u8> {
    let g = load_graph(graph)?;
    match fractional_pm_witness(&g) {
        Some(w) => {
            println!("fractional perfect matching: yes");
            if let Some(path) = witness_out {
                std::fs::write(path, w.to_json())
                    .with_context(|| format!("writing witness {}", path.display()))?;
                println!("witness written to {}", path.display());
            }
        }
        None => {
            debug_assert!(!has_fractional_pm(&g));
            println!("fractional perfect matching: no");
        }
    }
    Ok(0)
}

fn oracle(graph: &Path, method: OracleMethod) -> Result<u8> {
    let g = load_graph(graph)?;
    let verdict = match method {
        OracleMethod::Scheinerman => scheinerman_oracle(&g)
            .context("running the independent-set oracle")?,
        OracleMethod::Tutte => {
            tutte_oracle(&g).context("running the odd-component oracle")?
        }
    };
    println!("{verdict}");
    Ok(0)
}

fn lemmas(graph: &Path, gap: u32, report_out: Option<&Path>) -> Result<u8> {
    let g = load_graph(graph)?;
    let report = check_neighborhood_lemmas(&g, gap as usize);
    if report.holds() {
        println!("gap-{gap} neighborhood lemma holds on all vertex pairs");
        if let Some(path) = report_out {
            std::fs::write(path, serde_json::to_string_pretty(&report)?)
                .with_context(|| format!("writing report {}", path.display()))?;
        }
        return Ok(0);
    }
    println!("gap-{gap} neighborhood lemma violated on {} pairs", report.violations.len());
    match report_out {
        Some(path) => {
            std::fs::write(path, serde_json::to_string_pretty(&report)?)
                .with_context(|| format!("writing report {}", path.display()))?;
            println!("violations written to {}", path.display());
        }
        None => {
            for v in &report.violations {
                println!("{}", serde_json::to_string(v)?);
            }
        }
    }
    Ok(1)
}

fn number(graph: &Path, mode: Mode) -> Result<u8> {
    let g = load_graph(graph)?;
    match preclusion_number(&g, mode) {
        Ok(r) => {
            println!("{}", r.number);
            println!(
                "witness: vertices {:?}, edges {:?}",
                r.witness.vertices(),
                r.witness
                    .edges()
                    .iter()
                    .map(|e| (e.u(), e.v()))
                    .collect::<Vec<_>>()
            );
            Ok(0)
        }
        Err(PreclusionError::NotPrecludable(mode)) => {
            bail!("no fault set precludes this graph in mode {mode}")
        }
        Err(err) => Err(err.into()),
    }
}

fn verify(
    graph: &Path,
    mode: Mode,
    size: usize,
    constraints: PlanConstraints,
    opts: VerifyOptions,
    report_out: Option<&Path>,
) -> Result<u8> {
    let (g, identity) = load_graph_with_identity(graph)?;
    let plan = EnumerationPlan { size, constraints, chunk_target: DEFAULT_CHUNK_TARGET };
    if opts.max_chunks.is_some() && opts.checkpoint_path.is_none() {
        eprintln!("warning: --max-chunks without --checkpoint; progress will not be saved");
    }
    let certs_to_stdout = opts.certs_path.is_none();
    match verify_super(&g, mode, &plan, &identity, &opts)? {
        VerifyOutcome::Completed(run) => {
            println!(
                "verified {} fault sets of size {size} in mode {mode}: {} preclusive, \
                 {} basic, {} trivial, {} violations",
                run.report.total,
                run.report.preclusive,
                run.report.basic,
                run.report.trivial,
                run.report.violations
            );
            if let Some(path) = report_out {
                write_report(path, &run.report.to_json(), &run.meta.to_json())?;
                println!("report written to {}", path.display());
            }
            if run.report.violations > 0 {
                if certs_to_stdout {
                    for cert in &run.certificates {
                        println!("{}", cert.to_json_line());
                    }
                }
                Ok(1)
            } else {
                Ok(0)
            }
        }
        VerifyOutcome::Suspended { checkpoint, chunks_total } => {
            println!(
                "suspended after chunk {}/{} ({} fault sets classified); \
                 rerun with --resume to continue",
                checkpoint.chunk_index + 1,
                chunks_total,
                checkpoint.tallies.total
            );
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sample(
    graph: &Path,
    mode: Mode,
    size: usize,
    samples: u64,
    seed: u64,
    constraints: PlanConstraints,
    opts: SampleOptions,
    report_out: Option<&Path>,
) -> Result<u8> {
    let (g, identity) = load_graph_with_identity(graph)?;
    let certs_to_stdout = opts.certs_path.is_none();
    let run = sampled_check(&g, mode, size, samples, seed, &constraints, &identity, &opts)?;
    println!(
        "sampled {} fault sets of size {size} in mode {mode} (seed {seed}): \
         {} preclusive, {} basic, {} trivial, {} violations",
        run.report.total,
        run.report.preclusive,
        run.report.basic,
        run.report.trivial,
        run.report.violations
    );
    if let Some(path) = report_out {
        write_report(path, &run.report.to_json(), &run.meta.to_json())?;
        println!("report written to {}", path.display());
    }
    if run.report.violations > 0 {
        if certs_to_stdout {
            for cert in &run.violations {
                println!("{}", cert.to_json_line());
            }
        }
        Ok(1)
    } else {
        Ok(0)
    }
}
