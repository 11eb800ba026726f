//! Exact matching-preclusion toolkit for small graphs, with constructors
//! for cube-like interconnection families, integer and fractional matching
//! engines, independent slow oracles, and exhaustive/sampled fault-set
//! verification.

pub mod certificate;
pub mod comb;
pub mod families;
pub mod graph;
pub mod matching;
pub mod preclusion;

pub use certificate::{
    Certificate, Checkpoint, GraphIdentity, ReplayError, RunMeta, Tallies, VerifyReport, Witness,
};
pub use comb::binomial;
pub use families::{
    aq_adjacent, aq_cross_matchings, build_augmented_cube, build_gaq, build_hypercube,
    check_neighborhood_lemmas, random_cross_matchings, CrossMatchings, FamilyError, FamilySpec,
    LemmaReport, LemmaViolation,
};
pub use graph::{bits, read_graph, write_graph, Edge, FaultSet, Graph, GraphError, VertexId};
pub use matching::{
    fractional_pm_witness, has_almost_perfect_matching, has_fractional_apm, has_fractional_pm,
    has_perfect_matching, matching_number, max_matching, scheinerman_oracle, tutte_oracle,
    FractionalMatching, MatchEngine, Matching, MatchingError,
};
pub use preclusion::{
    build_index, classify_fault_set, classify_with_witness, count_fault_sets, plan_hash,
    preclusion_number, read_certificates, sampled_check, verify_super, Classification,
    EnumerationPlan, FaultIndex, FaultSetStream, Mode, PlanConstraints, PreclusionError,
    PreclusionResult, SampleOptions, SampleRun, VerifyOptions, VerifyOutcome, VerifyRun,
    CASE_BUDGET, DEFAULT_CHUNK_TARGET,
};
