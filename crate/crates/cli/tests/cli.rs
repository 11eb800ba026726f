//! End-to-end tests driving the compiled `matchprec` binary.

use std::path::Path;
use std::process::Output;

use matchprec_core::{write_graph, FamilySpec, FractionalMatching, Graph};

fn run(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_matchprec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_complete(dir: &Path, n: usize, name: &str) {
    let mut edges = Vec::new();
    for u in 0..n as u8 {
        for v in u + 1..n as u8 {
            edges.push((u, v));
        }
    }
    let g = Graph::from_edges(n, edges).unwrap();
    std::fs::write(dir.join(name), write_graph(&g)).unwrap();
}

#[test]
fn build_writes_edge_list_and_matching_spec_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["build", "--family", "aq", "--dim", "4", "--out", "aq4.edges"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let text = std::fs::read_to_string(dir.path().join("aq4.edges")).unwrap();
    assert!(text.starts_with("16 56\n"), "16 vertices, 56 edges");

    let spec_text = std::fs::read_to_string(dir.path().join("aq4.spec.json")).unwrap();
    let spec = FamilySpec::from_json(&spec_text).unwrap();
    let rebuilt = spec.build().unwrap();
    assert_eq!(write_graph(&rebuilt), text, "sidecar describes the written graph");
}

#[test]
fn build_randomized_families_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["build", "--family", "gaq", "--dim", "5", "--out", "g.edges"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"), "stderr: {}", stderr(&out));

    // Same seed, same instance; different seed, different instance.
    let a = run(dir.path(), &["build", "--family", "rgaq", "--dim", "5", "--seed", "7", "--out", "a.edges"]);
    let b = run(dir.path(), &["build", "--family", "rgaq", "--dim", "5", "--seed", "7", "--out", "b.edges"]);
    let c = run(dir.path(), &["build", "--family", "rgaq", "--dim", "5", "--seed", "8", "--out", "c.edges"]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(code(&c), 0);
    let a = std::fs::read(dir.path().join("a.edges")).unwrap();
    let b = std::fs::read(dir.path().join("b.edges")).unwrap();
    let c = std::fs::read(dir.path().join("c.edges")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn number_prints_the_preclusion_number() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 6, "k6.edges");
    let out = run(dir.path(), &["number", "--graph", "k6.edges", "--mode", "fsmp"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out).lines().next(), Some("4"));
}

#[test]
fn fpm_writes_a_checkable_witness() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 6, "k6.edges");
    let out = run(
        dir.path(),
        &["fpm", "--graph", "k6.edges", "--witness", "w.json"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("fractional perfect matching: yes"));
    let w = FractionalMatching::from_json(
        &std::fs::read_to_string(dir.path().join("w.json")).unwrap(),
    )
    .unwrap();
    let mut edges = Vec::new();
    for u in 0..6u8 {
        for v in u + 1..6 {
            edges.push((u, v));
        }
    }
    let k6 = Graph::from_edges(6, edges).unwrap();
    assert!(w.is_perfect_for(&k6));

    // A path on three vertices has none.
    let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    std::fs::write(dir.path().join("p3.edges"), write_graph(&p3)).unwrap();
    let out = run(dir.path(), &["fpm", "--graph", "p3.edges"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("fractional perfect matching: no"));
}

#[test]
fn oracle_prints_the_set_quantified_verdict() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 4, "k4.edges");
    write_complete(dir.path(), 3, "k3.edges");
    let out = run(dir.path(), &["oracle", "--graph", "k4.edges", "--method", "scheinerman"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "true");
    // Odd order: a perfect matching cannot exist, and Tutte must say so.
    let out = run(dir.path(), &["oracle", "--graph", "k3.edges", "--method", "tutte"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "false");
}

#[test]
fn lemmas_exit_one_with_violations_written() {
    let dir = tempfile::tempdir().unwrap();
    let build = run(dir.path(), &["build", "--family", "aq", "--dim", "4", "--out", "aq4.edges"]);
    assert_eq!(code(&build), 0);
    let out = run(dir.path(), &["lemmas", "--graph", "aq4.edges", "--gap", "2"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("holds"));

    // Adjacent vertices of K_4 share all other neighbors, violating even
    // the gap-1 requirement.
    write_complete(dir.path(), 4, "k4.edges");
    let out = run(
        dir.path(),
        &["lemmas", "--graph", "k4.edges", "--gap", "1", "--report", "viol.json"],
    );
    assert_eq!(code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("viol.json")).unwrap())
            .unwrap();
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn verify_reports_violations_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 5, "k5.edges");
    let args = [
        "verify", "--graph", "k5.edges", "--mode", "fsmp", "--size", "3",
        "--threads", "2", "--progress", "0",
        "--certs", "k5.certs.jsonl", "--report", "k5.report.json",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("k5.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total"], 455);
    assert_eq!(report["violations"], 40);
    assert!(dir.path().join("k5.report.meta.json").exists());
    let certs = std::fs::read_to_string(dir.path().join("k5.certs.jsonl")).unwrap();
    assert_eq!(certs.lines().count(), 40);

    // Byte-identical on a rerun.
    let first = std::fs::read(dir.path().join("k5.report.json")).unwrap();
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 1);
    assert_eq!(std::fs::read(dir.path().join("k5.report.json")).unwrap(), first);
}

#[test]
fn verify_clean_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let build = run(dir.path(), &["build", "--family", "aq", "--dim", "3", "--out", "aq3.edges"]);
    assert_eq!(code(&build), 0);
    let out = run(
        dir.path(),
        &[
            "verify", "--graph", "aq3.edges", "--mode", "mp", "--size", "5",
            "--threads", "2", "--progress", "0", "--report", "aq3.report.json",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("aq3.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total"], 15_504);
    assert_eq!(report["preclusive"], 8);
    assert_eq!(report["violations"], 0);
}

#[test]
fn verify_suspends_and_resumes_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let build = run(dir.path(), &["build", "--family", "aq", "--dim", "3", "--out", "aq3.edges"]);
    assert_eq!(code(&build), 0);

    // Reference: one uninterrupted run (C(28,6) = 376,740 cases, 4 chunks).
    let reference = run(
        dir.path(),
        &[
            "verify", "--graph", "aq3.edges", "--mode", "smp", "--size", "6",
            "--threads", "2", "--progress", "0",
            "--certs", "ref.certs.jsonl", "--report", "ref.report.json",
        ],
    );
    assert!(code(&reference) == 0 || code(&reference) == 1);

    let suspended = run(
        dir.path(),
        &[
            "verify", "--graph", "aq3.edges", "--mode", "smp", "--size", "6",
            "--threads", "2", "--progress", "0", "--max-chunks", "2",
            "--checkpoint", "cp.json", "--certs", "run.certs.jsonl",
        ],
    );
    assert_eq!(code(&suspended), 0, "stderr: {}", stderr(&suspended));
    assert!(stdout(&suspended).contains("suspended after chunk 2/4"));

    let resumed = run(
        dir.path(),
        &[
            "verify", "--graph", "aq3.edges", "--mode", "smp", "--size", "6",
            "--threads", "2", "--progress", "0", "--resume",
            "--checkpoint", "cp.json", "--certs", "run.certs.jsonl",
            "--report", "run.report.json",
        ],
    );
    assert_eq!(code(&resumed), code(&reference));
    assert_eq!(
        std::fs::read(dir.path().join("run.report.json")).unwrap(),
        std::fs::read(dir.path().join("ref.report.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("run.certs.jsonl")).unwrap(),
        std::fs::read(dir.path().join("ref.certs.jsonl")).unwrap()
    );
}

#[test]
fn sample_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 6, "k6.edges");
    let args = [
        "sample", "--graph", "k6.edges", "--mode", "fsmp", "--size", "2",
        "--samples", "500", "--seed", "42", "--threads", "2", "--progress", "0",
        "--certs", "s.certs.jsonl", "--report", "s.report.json",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let certs = std::fs::read_to_string(dir.path().join("s.certs.jsonl")).unwrap();
    assert_eq!(certs.lines().count(), 500, "every sampled case gets a certificate line");
    let first_report = std::fs::read(dir.path().join("s.report.json")).unwrap();
    let first_certs = std::fs::read(dir.path().join("s.certs.jsonl")).unwrap();

    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(dir.path().join("s.report.json")).unwrap(), first_report);
    assert_eq!(std::fs::read(dir.path().join("s.certs.jsonl")).unwrap(), first_certs);
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write_complete(dir.path(), 5, "k5.edges");

    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 2);

    let out = run(dir.path(), &["number", "--graph", "k5.edges", "--mode", "bogus"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown mode"));

    let out = run(dir.path(), &["number", "--graph", "missing.edges", "--mode", "mp"]);
    assert_eq!(code(&out), 2);

    // Fixing a vertex is meaningless in an edge-only mode.
    let out = run(
        dir.path(),
        &[
            "verify", "--graph", "k5.edges", "--mode", "mp", "--size", "3",
            "--fix-vertex", "0", "--progress", "0",
        ],
    );
    assert_eq!(code(&out), 2);

    // A tampered sidecar that no longer matches the graph is refused.
    let build = run(dir.path(), &["build", "--family", "aq", "--dim", "3", "--out", "aq3.edges"]);
    assert_eq!(code(&build), 0);
    std::fs::write(
        dir.path().join("aq3.spec.json"),
        FamilySpec::AugmentedCube { n: 4 }.to_json(),
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "verify", "--graph", "aq3.edges", "--mode", "mp", "--size", "2",
            "--progress", "0",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("does not describe"), "stderr: {}", stderr(&out));
}
