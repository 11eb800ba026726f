//! Replayable records of verification work: per-case certificates,
//! checkpoint files for resumable runs, and deterministic summary reports.
//!
//! Report and certificate serialization is byte-stable: the same inputs
//! always produce the same bytes, so interrupted-and-resumed runs can be
//! compared to uninterrupted ones file-for-file. Wall-clock data lives in a
//! separate [`RunMeta`] sidecar to keep the main outputs reproducible.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{FamilyError, FamilySpec};
use crate::graph::{Edge, FaultSet, Graph, GraphError, VertexId};
use crate::matching::{FractionalMatching, Matching};
use crate::preclusion::{classify_fault_set, Classification, Mode, PreclusionError};

/// What a certificate was issued against: a reproducible family spec when
/// the graph came from a constructor, otherwise the graph's content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphIdentity {
    Family(FamilySpec),
    Hashed { graph_hash: String },
}

impl GraphIdentity {
    pub fn of_graph(g: &Graph) -> GraphIdentity {
        GraphIdentity::Hashed { graph_hash: g.canonical_hash() }
    }

    /// Checks that `g` is the graph this identity names.
    pub fn matches(&self, g: &Graph) -> Result<(), ReplayError> {
        let expected = match self {
            GraphIdentity::Family(spec) => spec.build()?.canonical_hash(),
            GraphIdentity::Hashed { graph_hash } => graph_hash.clone(),
        };
        if expected == g.canonical_hash() {
            Ok(())
        } else {
            Err(ReplayError::IdentityMismatch)
        }
    }
}

/// Proof that a fault set is NOT preclusive: a (near-)perfect matching of
/// the survivor for integer modes, a fractional perfect matching for
/// fractional modes. Preclusive certificates carry no witness; they are
/// checked by re-running the decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Matching(Matching),
    Fractional(FractionalMatching),
}

impl Witness {
    /// Validates the witness against the survivor graph under the
    /// certificate's mode.
    fn check(&self, survivor: &Graph, mode: Mode) -> Result<(), ReplayError> {
        match self {
            Witness::Matching(m) => {
                if mode.fractional() {
                    return Err(ReplayError::WitnessInvalid(
                        "integer witness on a fractional-mode certificate",
                    ));
                }
                if !m.is_valid_for(survivor) {
                    return Err(ReplayError::WitnessInvalid("edges not a matching of the survivor"));
                }
                let covered = 2 * m.size();
                let alive = survivor.vertex_count();
                if covered != alive && covered + 1 != alive {
                    return Err(ReplayError::WitnessInvalid(
                        "matching leaves more than one vertex exposed",
                    ));
                }
            }
            Witness::Fractional(fm) => {
                if !mode.fractional() {
                    return Err(ReplayError::WitnessInvalid(
                        "fractional witness on an integer-mode certificate",
                    ));
                }
                if !fm.is_perfect_for(survivor) {
                    return Err(ReplayError::WitnessInvalid(
                        "fractional matching is not perfect on the survivor",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("certificate identity does not match the provided graph")]
    IdentityMismatch,
    #[error("family construction failed: {0}")]
    Family(#[from] FamilyError),
    #[error("fault set invalid for the graph: {0}")]
    Graph(#[from] GraphError),
    #[error("classification mismatch: recorded {recorded:?}, replayed {replayed:?}")]
    ClassificationMismatch { recorded: Classification, replayed: Classification },
    #[error("witness invalid: {0}")]
    WitnessInvalid(&'static str),
    #[error(transparent)]
    Preclusion(#[from] PreclusionError),
}

/// One classified fault set, self-contained enough to re-check from
/// scratch. Serializes to a single JSON line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub spec: GraphIdentity,
    pub mode: Mode,
    pub fault_vertices: Vec<VertexId>,
    pub fault_edges: Vec<Edge>,
    pub preclusive: bool,
    pub basic: bool,
    pub trivial: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

impl Certificate {
    pub fn new(
        spec: GraphIdentity,
        mode: Mode,
        fault: &FaultSet,
        classification: Classification,
    ) -> Certificate {
        Certificate {
            spec,
            mode,
            fault_vertices: fault.vertices().to_vec(),
            fault_edges: fault.edges().to_vec(),
            preclusive: classification.preclusive,
            basic: classification.basic,
            trivial: classification.trivial,
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: Option<Witness>) -> Certificate {
        self.witness = witness;
        self
    }

    pub fn classification(&self) -> Classification {
        Classification {
            preclusive: self.preclusive,
            basic: self.basic,
            trivial: self.trivial,
        }
    }

    pub fn fault_set(&self) -> Result<FaultSet, GraphError> {
        FaultSet::new(self.fault_vertices.clone(), self.fault_edges.clone())
    }

    /// Re-derives the classification from the graph and compares it with
    /// the recorded one; validates the witness when present.
    pub fn replay(&self, g: &Graph) -> Result<(), ReplayError> {
        self.spec.matches(g)?;
        let fault = self.fault_set()?;
        let replayed = classify_fault_set(g, &fault, self.mode)?;
        if replayed != self.classification() {
            return Err(ReplayError::ClassificationMismatch {
                recorded: self.classification(),
                replayed,
            });
        }
        if let Some(witness) = &self.witness {
            if self.preclusive {
                return Err(ReplayError::WitnessInvalid("witness on a preclusive certificate"));
            }
            let survivor = g.delete_faults(&fault)?;
            witness.check(&survivor, self.mode)?;
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json_line(line: &str) -> Result<Certificate, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Running counts over classified fault sets. `basic` and `trivial` count
/// preclusive sets only (the breakdown of `preclusive`); `violations`
/// counts the cases the run was looking for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub total: u64,
    pub preclusive: u64,
    pub basic: u64,
    pub trivial: u64,
    pub violations: u64,
}

impl Tallies {
    pub fn record(&mut self, c: Classification, violation: bool) {
        self.total += 1;
        if c.preclusive {
            self.preclusive += 1;
            if c.basic {
                self.basic += 1;
            }
            if c.trivial {
                self.trivial += 1;
            }
        }
        if violation {
            self.violations += 1;
        }
    }

    pub fn absorb(&mut self, other: Tallies) {
        self.total += other.total;
        self.preclusive += other.preclusive;
        self.basic += other.basic;
        self.trivial += other.trivial;
        self.violations += other.violations;
    }
}

/// Resume point for a chunked run: everything folded up to and including
/// `chunk_index`, with `certs_offset` bytes of certificates already on
/// disk. Only valid for the exact plan identified by `plan_hash`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub plan_hash: String,
    pub chunk_index: u64,
    pub tallies: Tallies,
    pub certs_offset: u64,
}

impl Checkpoint {
    /// Atomic save: write a sibling temp file, then rename over the target.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serializable");
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, text.as_bytes())?;
        std::fs::rename(&tmp, path)
    }

    pub fn load(path: &Path) -> io::Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Deterministic summary of a verification or sampling run. Identical
/// inputs produce identical JSON; wall-clock data goes to [`RunMeta`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub plan_hash: String,
    pub graph_hash: String,
    pub mode: Mode,
    pub size: u64,
    pub total: u64,
    pub preclusive: u64,
    pub basic: u64,
    pub trivial: u64,
    pub violations: u64,
}

impl VerifyReport {
    pub fn new(
        plan_hash: String,
        graph_hash: String,
        mode: Mode,
        size: usize,
        tallies: Tallies,
    ) -> VerifyReport {
        VerifyReport {
            plan_hash,
            graph_hash,
            mode,
            size: size as u64,
            total: tallies.total,
            preclusive: tallies.preclusive,
            basic: tallies.basic,
            trivial: tallies.trivial,
            violations: tallies.violations,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<VerifyReport, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Non-deterministic facts about one run, kept out of the report so that
/// reports stay byte-comparable across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub elapsed_seconds: f64,
    pub threads: usize,
}

impl RunMeta {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::build_augmented_cube;
    use crate::matching::fractional_pm_witness;

    fn k4() -> Graph {
        build_augmented_cube(2).unwrap()
    }

    #[test]
    fn certificate_json_shape_without_witness() {
        let g = k4();
        let fault = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Fmp).unwrap();
        let cert = Certificate::new(GraphIdentity::of_graph(&g), Mode::Fmp, &fault, cls);
        let line = cert.to_json_line();
        assert!(line.starts_with(r#"{"spec":{"graph_hash":"#), "{line}");
        assert!(line.contains(r#""mode":"fmp""#));
        assert!(line.contains(r#""fault_vertices":[]"#));
        assert!(line.contains(r#""fault_edges":[[0,1]]"#));
        assert!(!line.contains("witness"));
        assert_eq!(Certificate::from_json_line(&line).unwrap(), cert);
    }

    #[test]
    fn certificate_with_family_identity_round_trips() {
        let spec = FamilySpec::AugmentedCube { n: 2 };
        let g = spec.build().unwrap();
        let fault = FaultSet::new(vec![0], vec![]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Fsmp).unwrap();
        let cert = Certificate::new(GraphIdentity::Family(spec), Mode::Fsmp, &fault, cls);
        let line = cert.to_json_line();
        assert!(line.contains(r#""spec":{"kind":"augmented_cube","n":2}"#), "{line}");
        let back = Certificate::from_json_line(&line).unwrap();
        assert_eq!(back, cert);
        assert!(matches!(back.spec, GraphIdentity::Family(_)));
    }

    #[test]
    fn witness_json_round_trips() {
        let g = k4();
        let fm = fractional_pm_witness(&g).unwrap();
        let w = Witness::Fractional(fm);
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains(r#""type":"fractional""#), "{text}");
        assert!(text.contains(r#""denominator":2"#));
        assert_eq!(serde_json::from_str::<Witness>(&text).unwrap(), w);

        let m = Witness::Matching(Matching {
            edges: vec![Edge::new(0, 1).unwrap(), Edge::new(2, 3).unwrap()],
        });
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains(r#""type":"matching""#), "{text}");
        assert!(text.contains(r#""edges":[[0,1],[2,3]]"#));
        assert_eq!(serde_json::from_str::<Witness>(&text).unwrap(), m);
    }

    #[test]
    fn replay_accepts_faithful_certificates() {
        let g = k4();
        // Non-preclusive edge fault with a fractional witness.
        let fault = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Fmp).unwrap();
        assert!(!cls.preclusive);
        let survivor = g.delete_faults(&fault).unwrap();
        let witness = Witness::Fractional(fractional_pm_witness(&survivor).unwrap());
        let cert = Certificate::new(GraphIdentity::of_graph(&g), Mode::Fmp, &fault, cls)
            .with_witness(Some(witness));
        cert.replay(&g).unwrap();
    }

    #[test]
    fn replay_rejects_tampered_classification() {
        let g = k4();
        let fault = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Fmp).unwrap();
        let mut cert = Certificate::new(GraphIdentity::of_graph(&g), Mode::Fmp, &fault, cls);
        cert.preclusive = !cert.preclusive;
        assert!(matches!(
            cert.replay(&g),
            Err(ReplayError::ClassificationMismatch { .. })
        ));
    }

    #[test]
    fn replay_rejects_wrong_graph() {
        let g = k4();
        let other = build_augmented_cube(3).unwrap();
        let fault = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Fmp).unwrap();
        let cert = Certificate::new(GraphIdentity::of_graph(&g), Mode::Fmp, &fault, cls);
        assert!(matches!(cert.replay(&other), Err(ReplayError::IdentityMismatch)));
    }

    #[test]
    fn replay_rejects_bad_witness() {
        let g = k4();
        let fault = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let cls = classify_fault_set(&g, &fault, Mode::Smp).unwrap();
        assert!(!cls.preclusive);
        // An integer witness that is not a matching of the survivor: edge
        // (0,1) was deleted.
        let witness = Witness::Matching(Matching {
            edges: vec![Edge::new(0, 1).unwrap(), Edge::new(2, 3).unwrap()],
        });
        let cert = Certificate::new(GraphIdentity::of_graph(&g), Mode::Smp, &fault, cls)
            .with_witness(Some(witness));
        assert!(matches!(cert.replay(&g), Err(ReplayError::WitnessInvalid(_))));
    }

    #[test]
    fn tallies_record_and_absorb() {
        let mut t = Tallies::default();
        t.record(Classification { preclusive: true, basic: true, trivial: true }, false);
        t.record(Classification { preclusive: true, basic: false, trivial: false }, true);
        t.record(Classification { preclusive: false, basic: false, trivial: false }, false);
        assert_eq!(t, Tallies { total: 3, preclusive: 2, basic: 1, trivial: 1, violations: 1 });
        let mut sum = Tallies::default();
        sum.absorb(t);
        sum.absorb(t);
        assert_eq!(sum.total, 6);
        assert_eq!(sum.violations, 2);
    }

    #[test]
    fn checkpoint_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.checkpoint.json");
        let cp = Checkpoint {
            plan_hash: "abc123".into(),
            chunk_index: 41,
            tallies: Tallies { total: 42, preclusive: 7, basic: 7, trivial: 6, violations: 0 },
            certs_offset: 512,
        };
        cp.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), cp);
        // Overwrite is atomic-by-rename; temp file must not linger.
        cp.save(&path).unwrap();
        assert!(!path.with_extension("json.tmp").exists());
    }

    #[test]
    fn report_json_is_stable() {
        let t = Tallies { total: 10, preclusive: 2, basic: 1, trivial: 1, violations: 1 };
        let r = VerifyReport::new("p".into(), "g".into(), Mode::Fsmp, 7, t);
        let a = r.to_json();
        let b = r.to_json();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        assert_eq!(VerifyReport::from_json(&a).unwrap(), r);
        let meta = RunMeta { elapsed_seconds: 1.5, threads: 4 };
        assert!(meta.to_json().contains("elapsed_seconds"));
    }
}
