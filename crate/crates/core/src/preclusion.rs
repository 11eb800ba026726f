//! Fault-set classification, preclusion numbers, deterministic fault-set
//! enumeration, and exhaustive/sampled verification drivers.
//!
//! Every driver addresses one totally ordered stream of fault sets: fewer
//! vertices first, then vertex lists lexicographically, then edge lists
//! lexicographically (the same order as `FaultSet`'s `Ord`). Exhaustive
//! verification walks contiguous rank ranges ("chunks") in parallel and
//! folds results back in rank order; sampling draws uniform ranks and
//! unranks them. Identical inputs therefore give identical outputs no
//! matter the thread count, and interrupted runs resume exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certificate::{
    Certificate, Checkpoint, GraphIdentity, RunMeta, Tallies, VerifyReport, Witness,
};
use crate::comb::{binomial, next_combination, unrank_combination};
use crate::families::derive_seed;
use crate::graph::{bits, Edge, FaultSet, Graph, GraphError, VertexId};
use crate::matching::MatchEngine;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive operations refuse plans whose unfiltered case bound
/// C(|V|+|E|, k) exceeds this.
pub const CASE_BUDGET: u128 = 10_000_000_000;

/// Incidence-filtered plans materialize one table entry per vertex subset;
/// plans needing more entries than this are refused.
pub const BLOCK_BUDGET: u128 = 1_000_000;

pub const DEFAULT_CHUNK_TARGET: u64 = 100_000;
pub const DEFAULT_PROGRESS_EVERY: u64 = 1_000_000;

/// Which matchings a fault set must destroy to count as preclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Edge faults only; destroys perfect and almost-perfect matchings.
    Mp,
    /// Vertex and edge faults; destroys perfect and almost-perfect matchings.
    Smp,
    /// Edge faults only; destroys fractional perfect matchings.
    Fmp,
    /// Vertex and edge faults; destroys fractional perfect matchings.
    Fsmp,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Mp, Mode::Smp, Mode::Fmp, Mode::Fsmp];

    /// Modes whose fault sets may contain edges only.
    pub fn edges_only(self) -> bool {
        matches!(self, Mode::Mp | Mode::Fmp)
    }

    /// Modes judged against fractional perfect matchings.
    pub fn fractional(self) -> bool {
        matches!(self, Mode::Fmp | Mode::Fsmp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mp => "mp",
            Mode::Smp => "smp",
            Mode::Fmp => "fmp",
            Mode::Fsmp => "fsmp",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "mp" => Ok(Mode::Mp),
            "smp" => Ok(Mode::Smp),
            "fmp" => Ok(Mode::Fmp),
            "fsmp" => Ok(Mode::Fsmp),
            other => Err(format!("unknown mode `{other}` (expected mp|smp|fmp|fsmp)")),
        }
    }
}

/// Verdict for one fault set. `basic` means the survivor has an isolated
/// vertex; `trivial` additionally requires an even host and an even number
/// of fault vertices. For non-preclusive sets the flags are still reported
/// but carry no preclusion meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub preclusive: bool,
    pub basic: bool,
    pub trivial: bool,
}

impl Classification {
    /// A super-matched counterexample at the mode's own bar: fractional
    /// modes tolerate only basic preclusive sets, integer modes only
    /// trivial ones.
    pub fn violates_super(self, mode: Mode) -> bool {
        self.preclusive && if mode.fractional() { !self.basic } else { !self.trivial }
    }
}

#[derive(Debug, Error)]
pub enum PreclusionError {
    #[error("fault set contains vertices but mode {0} deletes edges only")]
    VertexFaultsInEdgeMode(Mode),
    #[error("plan spans up to {bound} cases, over the {CASE_BUDGET} budget")]
    BudgetExceeded { bound: u128 },
    #[error("incidence-filtered plan needs {blocks} table entries, over the {BLOCK_BUDGET} budget")]
    BlockBudgetExceeded { blocks: u128 },
    #[error("graph admits no preclusive fault set in mode {0}")]
    NotPrecludable(Mode),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Slice constraints applied to the fault-set stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConstraints {
    /// The fault set must contain this vertex.
    pub fixed_vertex: Option<VertexId>,
    /// Lower bound on the number of fault vertices.
    pub min_vertices: usize,
    /// No fault edge may touch a fault vertex.
    pub forbid_incident_edges: bool,
    /// Fault sets consist of edges only.
    pub edges_only: bool,
}

/// A total fault-set size plus constraints; determines one enumeration
/// stream and its chunk grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationPlan {
    pub size: usize,
    pub constraints: PlanConstraints,
    /// Cases per chunk for parallel verification and checkpoints.
    pub chunk_target: u64,
}

impl EnumerationPlan {
    pub fn new(size: usize, constraints: PlanConstraints) -> EnumerationPlan {
        EnumerationPlan { size, constraints, chunk_target: DEFAULT_CHUNK_TARGET }
    }
}

#[derive(Serialize)]
struct PlanDescriptor<'a> {
    op: &'static str,
    graph_hash: &'a str,
    mode: Mode,
    size: usize,
    fixed_vertex: Option<VertexId>,
    min_vertices: usize,
    forbid_incident_edges: bool,
    edges_only: bool,
    chunk_target: u64,
    samples: Option<u64>,
    seed: Option<u64>,
}

fn descriptor_hash(d: &PlanDescriptor) -> String {
    let text = serde_json::to_string(d).expect("serializable");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Stable identifier binding a graph, a mode, and a plan (including the
/// chunk grid); checkpoints are only valid against the same hash.
pub fn plan_hash(g: &Graph, mode: Mode, plan: &EnumerationPlan) -> String {
    let hash = g.canonical_hash();
    descriptor_hash(&PlanDescriptor {
        op: "verify",
        graph_hash: &hash,
        mode,
        size: plan.size,
        fixed_vertex: plan.constraints.fixed_vertex,
        min_vertices: plan.constraints.min_vertices,
        forbid_incident_edges: plan.constraints.forbid_incident_edges,
        edges_only: plan.constraints.edges_only,
        chunk_target: plan.chunk_target,
        samples: None,
        seed: None,
    })
}

// ---------------------------------------------------------------------
// Enumeration index: rank arithmetic for one plan's stream
// ---------------------------------------------------------------------

/// One vertex-count level of the stream. `pick` free vertices are chosen
/// from the pool (plus the fixed vertex, if any) and `t` edges from the
/// block's edge pool.
struct Stratum {
    pick: usize,
    t: usize,
    prefix: u128,
    cases: u128,
    /// Cases per vertex subset; used only when the index is uniform
    /// (every block shares one edge pool).
    per_block: u128,
    /// Range into `FaultIndex::blocks` when incidence-filtered.
    block_range: (usize, usize),
}

struct Block {
    /// Global rank of this block's first case.
    prefix: u128,
}

/// Precomputed rank structure for a plan over a fixed graph: total count,
/// per-stratum prefixes, and (for incidence-filtered plans) one entry per
/// vertex subset. Immutable and shareable across worker threads.
pub struct FaultIndex {
    vpool: Vec<VertexId>,
    fixed: Option<VertexId>,
    edges: Vec<Edge>,
    filtered: bool,
    strata: Vec<Stratum>,
    blocks: Vec<Block>,
    total: u128,
    size: usize,
}

impl FaultIndex {
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stream(&self) -> FaultSetStream<'_> {
        let mut s = FaultSetStream {
            idx: self,
            pos: 0,
            si: 0,
            vidx: Vec::new(),
            eidx: Vec::new(),
            epool: Vec::new(),
            expected_in_block: 0,
            emitted_in_block: 0,
            verts: Vec::new(),
            edges_out: Vec::new(),
        };
        s.seek(0);
        s
    }
}

fn validate_plan(g: &Graph, plan: &EnumerationPlan) -> Result<(), PreclusionError> {
    let c = &plan.constraints;
    if c.edges_only && (c.fixed_vertex.is_some() || c.min_vertices > 0) {
        return Err(PreclusionError::InvalidPlan(
            "edge-only plans cannot fix or require vertices".into(),
        ));
    }
    if let Some(f) = c.fixed_vertex {
        if (f as usize) >= g.n() || !g.is_alive(f) {
            return Err(PreclusionError::InvalidPlan(format!(
                "fixed vertex {f} is not a surviving vertex"
            )));
        }
    }
    Ok(())
}

fn build_index_inner(
    g: &Graph,
    plan: &EnumerationPlan,
    enforce_budget: bool,
) -> Result<FaultIndex, PreclusionError> {
    validate_plan(g, plan)?;
    let c = plan.constraints;
    let k = plan.size;
    let m = g.edge_count();
    let alive: Vec<VertexId> = g.alive_vertices().collect();
    let universe = if c.edges_only { m } else { alive.len() + m };
    let bound = binomial(universe as u64, k as u64);
    if enforce_budget && bound > CASE_BUDGET {
        return Err(PreclusionError::BudgetExceeded { bound });
    }

    let fixed = c.fixed_vertex;
    let vpool: Vec<VertexId> =
        alive.iter().copied().filter(|&v| Some(v) != fixed).collect();
    let edges = g.edges().to_vec();

    let j_min = c.min_vertices.max(usize::from(fixed.is_some()));
    let j_max = if c.edges_only { 0 } else { k.min(vpool.len() + usize::from(fixed.is_some())) };

    if c.forbid_incident_edges {
        // Guard the table before walking it.
        let mut blocks_bound = 0u128;
        for j in j_min..=j_max {
            let pick = j - usize::from(fixed.is_some());
            blocks_bound = blocks_bound.saturating_add(binomial(vpool.len() as u64, pick as u64));
        }
        if blocks_bound > BLOCK_BUDGET {
            return Err(PreclusionError::BlockBudgetExceeded { blocks: blocks_bound });
        }
    }

    let mut strata = Vec::new();
    let mut blocks = Vec::new();
    let mut total = 0u128;
    for j in j_min..=j_max {
        let pick = j - usize::from(fixed.is_some());
        if pick > vpool.len() || j > k {
            continue;
        }
        let t = k - j;
        if !c.forbid_incident_edges {
            if t > m {
                continue;
            }
            let per_block = binomial(m as u64, t as u64);
            let vchoices = binomial(vpool.len() as u64, pick as u64);
            let cases = vchoices * per_block;
            if cases == 0 {
                continue;
            }
            strata.push(Stratum {
                pick,
                t,
                prefix: total,
                cases,
                per_block,
                block_range: (0, 0),
            });
            total += cases;
        } else {
            let block_start = blocks.len();
            let mut cases = 0u128;
            let mut vidx: Vec<usize> = (0..pick).collect();
            loop {
                let mut smask = fixed.map_or(0u128, |f| 1u128 << f);
                for &i in &vidx {
                    smask |= 1u128 << vpool[i];
                }
                let m_s = edges.iter().filter(|e| e.mask() & smask == 0).count();
                blocks.push(Block { prefix: total + cases });
                cases += binomial(m_s as u64, t as u64);
                if !next_combination(&mut vidx, vpool.len()) {
                    break;
                }
            }
            if cases == 0 {
                blocks.truncate(block_start);
                continue;
            }
            strata.push(Stratum {
                pick,
                t,
                prefix: total,
                cases,
                per_block: 0,
                block_range: (block_start, blocks.len()),
            });
            total += cases;
        }
    }

    Ok(FaultIndex {
        vpool,
        fixed,
        edges,
        filtered: c.forbid_incident_edges,
        strata,
        blocks,
        total,
        size: k,
    })
}

/// Builds the rank index for a plan, refusing plans over the case budget.
pub fn build_index(g: &Graph, plan: &EnumerationPlan) -> Result<FaultIndex, PreclusionError> {
    build_index_inner(g, plan, true)
}

/// Number of fault sets the plan's stream emits, by closed-form counting.
pub fn count_fault_sets(g: &Graph, plan: &EnumerationPlan) -> Result<u128, PreclusionError> {
    Ok(build_index(g, plan)?.total)
}

/// Cursor over one plan's stream. Obtain via [`FaultIndex::stream`];
/// iterate with the `Iterator` impl or, allocation-free, with
/// `advance`/`current`. `seek` repositions to an absolute rank.
pub struct FaultSetStream<'a> {
    idx: &'a FaultIndex,
    /// Rank of the next case to emit.
    pos: u128,
    si: usize,
    vidx: Vec<usize>,
    eidx: Vec<usize>,
    epool: Vec<Edge>,
    expected_in_block: u128,
    emitted_in_block: u128,
    verts: Vec<VertexId>,
    edges_out: Vec<Edge>,
}

impl<'a> FaultSetStream<'a> {
    /// Repositions the cursor so the next emitted case has this rank.
    pub fn seek(&mut self, rank: u128) {
        self.pos = rank;
        if rank >= self.idx.total {
            self.si = self.idx.strata.len();
            return;
        }
        let strata = &self.idx.strata;
        self.si = strata.partition_point(|s| s.prefix + s.cases <= rank);
        let st = &strata[self.si];
        let offset = rank - st.prefix;
        let (vrank, erank);
        if self.idx.filtered {
            let (lo, hi) = st.block_range;
            let b = lo
                + self.idx.blocks[lo..hi].partition_point(|blk| blk.prefix <= rank)
                - 1;
            vrank = (b - lo) as u128;
            erank = rank - self.idx.blocks[b].prefix;
        } else {
            vrank = offset / st.per_block;
            erank = offset % st.per_block;
        }
        self.vidx.resize(st.pick, 0);
        unrank_combination(self.idx.vpool.len(), vrank, &mut self.vidx);
        self.refill_edge_pool();
        self.eidx.resize(st.t, 0);
        unrank_combination(self.epool.len(), erank, &mut self.eidx);
        self.expected_in_block = binomial(self.epool.len() as u64, st.t as u64);
        self.emitted_in_block = erank;
    }

    fn refill_edge_pool(&mut self) {
        self.epool.clear();
        if self.idx.filtered {
            let mut smask = self.idx.fixed.map_or(0u128, |f| 1u128 << f);
            for &i in &self.vidx {
                smask |= 1u128 << self.idx.vpool[i];
            }
            self.epool.extend(self.idx.edges.iter().filter(|e| e.mask() & smask == 0));
        } else {
            self.epool.extend_from_slice(&self.idx.edges);
        }
    }

    /// Moves to the next case, making it available through [`current`].
    /// Returns false when the stream is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.pos >= self.idx.total {
            return false;
        }
        // Emit the current indices.
        self.verts.clear();
        match self.idx.fixed {
            None => {
                for &i in &self.vidx {
                    self.verts.push(self.idx.vpool[i]);
                }
            }
            Some(f) => {
                let mut placed = false;
                for &i in &self.vidx {
                    let v = self.idx.vpool[i];
                    if !placed && f < v {
                        self.verts.push(f);
                        placed = true;
                    }
                    self.verts.push(v);
                }
                if !placed {
                    self.verts.push(f);
                }
            }
        }
        self.edges_out.clear();
        for &i in &self.eidx {
            self.edges_out.push(self.epool[i]);
        }
        self.pos += 1;
        self.emitted_in_block += 1;

        if self.pos >= self.idx.total {
            // The stream ends exactly at a block boundary; the streamed
            // block count must match the closed-form count.
            assert_eq!(self.emitted_in_block, self.expected_in_block);
            self.si = self.idx.strata.len();
            return true;
        }
        // Step to the successor.
        if !next_combination(&mut self.eidx, self.epool.len()) {
            assert_eq!(self.emitted_in_block, self.expected_in_block);
            loop {
                let st_now = &self.idx.strata[self.si];
                if next_combination(&mut self.vidx, self.idx.vpool.len()) {
                    self.refill_edge_pool();
                    let cases = binomial(self.epool.len() as u64, st_now.t as u64);
                    if cases == 0 {
                        continue;
                    }
                    self.eidx.clear();
                    self.eidx.extend(0..st_now.t);
                    self.expected_in_block = cases;
                    self.emitted_in_block = 0;
                    break;
                }
                // Stratum finished; its prefix arithmetic must line up.
                assert_eq!(self.pos, st_now.prefix + st_now.cases);
                self.si += 1;
                let st_next = &self.idx.strata[self.si];
                self.vidx.clear();
                self.vidx.extend(0..st_next.pick);
                self.refill_edge_pool();
                let cases = binomial(self.epool.len() as u64, st_next.t as u64);
                if cases == 0 {
                    continue;
                }
                self.eidx.clear();
                self.eidx.extend(0..st_next.t);
                self.expected_in_block = cases;
                self.emitted_in_block = 0;
                break;
            }
        }
        true
    }

    /// The case produced by the last successful [`advance`]: sorted fault
    /// vertices and sorted fault edges.
    pub fn current(&self) -> (&[VertexId], &[Edge]) {
        (&self.verts, &self.edges_out)
    }
}

impl Iterator for FaultSetStream<'_> {
    type Item = FaultSet;

    fn next(&mut self) -> Option<FaultSet> {
        if self.advance() {
            Some(
                FaultSet::new(self.verts.clone(), self.edges_out.clone())
                    .expect("stream emits canonical fault sets"),
            )
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------

/// Reusable scratch for classifying many fault sets against one graph.
pub(crate) struct ClassifyCtx {
    engine: MatchEngine,
    rows: Vec<u128>,
    base_alive: u128,
    host_even: bool,
}

impl ClassifyCtx {
    pub(crate) fn new(g: &Graph) -> ClassifyCtx {
        ClassifyCtx {
            engine: MatchEngine::new(),
            rows: vec![0u128; g.n()],
            base_alive: g.alive_mask(),
            host_even: g.vertex_count().is_multiple_of(2),
        }
    }

    /// Classifies the fault set given as sorted parts. Callers guarantee
    /// validity (alive vertices, existing edges, no duplicates).
    pub(crate) fn classify(
        &mut self,
        g: &Graph,
        vertices: &[VertexId],
        edges: &[Edge],
        mode: Mode,
    ) -> Classification {
        let mut vmask = 0u128;
        for &v in vertices {
            vmask |= 1u128 << v;
        }
        let alive = self.base_alive & !vmask;
        let adj = g.adjacency();
        for u in bits(alive) {
            self.rows[u] = adj[u] & alive;
        }
        for e in edges {
            self.rows[e.u() as usize] &= !(1u128 << e.v());
            self.rows[e.v() as usize] &= !(1u128 << e.u());
        }
        let mut basic = false;
        for u in bits(alive) {
            if self.rows[u] == 0 {
                basic = true;
                break;
            }
        }
        let trivial = basic && self.host_even && vertices.len().is_multiple_of(2);
        let preclusive = if mode.fractional() {
            // An isolated vertex can never reach fractional degree one.
            basic || !self.engine.rows_have_fractional_pm(&self.rows, alive)
        } else {
            // Integer modes get no such shortcut: a survivor with an
            // isolated vertex and odd order may still have an
            // almost-perfect matching.
            let cnt = alive.count_ones() as usize;
            let nu = self.engine.rows_max_matching_size(&self.rows, alive);
            2 * nu + (cnt & 1) != cnt
        };
        Classification { preclusive, basic, trivial }
    }
}

/// Classifies one fault set: preclusive for the mode, basic (isolated
/// survivor vertex), trivial (basic with even host and even fault-vertex
/// count).
pub fn classify_fault_set(
    g: &Graph,
    fault: &FaultSet,
    mode: Mode,
) -> Result<Classification, PreclusionError> {
    if mode.edges_only() && !fault.vertices().is_empty() {
        return Err(PreclusionError::VertexFaultsInEdgeMode(mode));
    }
    g.validate_fault_set(fault)?;
    let mut ctx = ClassifyCtx::new(g);
    Ok(ctx.classify(g, fault.vertices(), fault.edges(), mode))
}

/// Like [`classify_fault_set`], additionally returning a matching witness
/// of the survivor when the fault set is not preclusive.
pub fn classify_with_witness(
    g: &Graph,
    fault: &FaultSet,
    mode: Mode,
) -> Result<(Classification, Option<Witness>), PreclusionError> {
    let classification = classify_fault_set(g, fault, mode)?;
    if classification.preclusive {
        return Ok((classification, None));
    }
    let survivor = g.delete_faults(fault)?;
    let mut engine = MatchEngine::new();
    let witness = if mode.fractional() {
        engine.fractional_pm_witness(&survivor).map(Witness::Fractional)
    } else {
        Some(Witness::Matching(engine.max_matching(&survivor)))
    };
    Ok((classification, witness))
}

// ---------------------------------------------------------------------
// Preclusion numbers
// ---------------------------------------------------------------------

/// Smallest preclusive size plus its lexicographically first witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreclusionResult {
    pub number: usize,
    pub witness: FaultSet,
}

/// Searches k = 0, 1, 2, … for the smallest preclusive fault set in the
/// mode, guarding each k against the case budget.
pub fn preclusion_number(g: &Graph, mode: Mode) -> Result<PreclusionResult, PreclusionError> {
    let universe = if mode.edges_only() {
        g.edge_count()
    } else {
        g.vertex_count() + g.edge_count()
    };
    let constraints = PlanConstraints { edges_only: mode.edges_only(), ..Default::default() };
    let mut ctx = ClassifyCtx::new(g);
    for k in 0..=universe {
        let plan = EnumerationPlan::new(k, constraints);
        let index = build_index(g, &plan)?;
        let mut stream = index.stream();
        while stream.advance() {
            let (vs, es) = stream.current();
            if ctx.classify(g, vs, es, mode).preclusive {
                let witness = FaultSet::new(vs.to_vec(), es.to_vec())?;
                return Ok(PreclusionResult { number: k, witness });
            }
        }
    }
    Err(PreclusionError::NotPrecludable(mode))
}

// ---------------------------------------------------------------------
// Exhaustive chunked verification
// ---------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub threads: usize,
    /// Progress line to standard error every this many cases; 0 disables.
    pub progress_every: u64,
    /// Stop after folding this many chunks (checkpoint/resume testing and
    /// time-boxed runs).
    pub max_chunks: Option<u64>,
    pub checkpoint_path: Option<PathBuf>,
    pub certs_path: Option<PathBuf>,
    /// Continue from the checkpoint file instead of starting fresh.
    pub resume: bool,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions {
            threads: 1,
            progress_every: DEFAULT_PROGRESS_EVERY,
            max_chunks: None,
            checkpoint_path: None,
            certs_path: None,
            resume: false,
        }
    }
}

/// A completed verification: deterministic report plus the violating
/// certificates. After a resumed run the in-memory list is reloaded from
/// the certificate file when one is configured; without one it holds only
/// the certificates found since the resume point.
#[derive(Debug)]
pub struct VerifyRun {
    pub report: VerifyReport,
    pub certificates: Vec<Certificate>,
    pub meta: RunMeta,
}

#[derive(Debug)]
pub enum VerifyOutcome {
    Completed(VerifyRun),
    /// `max_chunks` was hit first; the checkpoint value (also written to
    /// the checkpoint file when configured) resumes the run.
    Suspended { checkpoint: Checkpoint, chunks_total: u64 },
}

struct ChunkResult {
    chunk: u64,
    tallies: Tallies,
    certs: Vec<Certificate>,
}

/// Exhaustively classifies every fault set in the plan's stream, in
/// parallel chunks folded back in rank order. Violating fault sets
/// (preclusive non-basic in fractional modes, preclusive non-trivial in
/// integer modes) become certificates.
pub fn verify_super(
    g: &Graph,
    mode: Mode,
    plan: &EnumerationPlan,
    identity: &GraphIdentity,
    opts: &VerifyOptions,
) -> Result<VerifyOutcome, PreclusionError> {
    if mode.edges_only() && !plan.constraints.edges_only {
        return Err(PreclusionError::InvalidPlan(format!(
            "mode {mode} deletes edges only; set the edge-only constraint"
        )));
    }
    let started = Instant::now();
    let index = build_index(g, plan)?;
    let total = index.total();
    let hash = plan_hash(g, mode, plan);
    let chunk_size = plan.chunk_target.max(1);
    let chunks_total = total.div_ceil(chunk_size as u128) as u64;

    let mut folded = Tallies::default();
    let mut start_chunk = 0u64;
    let mut certs_offset = 0u64;
    if opts.resume {
        let path = opts.checkpoint_path.as_ref().ok_or_else(|| {
            PreclusionError::InvalidPlan("resume requires a checkpoint path".into())
        })?;
        let cp = Checkpoint::load(path)?;
        if cp.plan_hash != hash {
            return Err(PreclusionError::CheckpointMismatch(format!(
                "checkpoint was written for plan {}, this run is plan {}",
                cp.plan_hash, hash
            )));
        }
        start_chunk = cp.chunk_index + 1;
        folded = cp.tallies;
        certs_offset = cp.certs_offset;
    }

    // Certificates already folded stay; anything after the checkpoint
    // offset came from unfolded chunks and is discarded.
    let mut certs_file = match &opts.certs_path {
        Some(path) => {
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .truncate(false)
                .read(true)
                .write(true)
                .open(path)?;
            let len = file.metadata()?.len();
            if opts.resume {
                if len < certs_offset {
                    return Err(PreclusionError::CheckpointMismatch(format!(
                        "certificate file holds {len} bytes, checkpoint expects {certs_offset}"
                    )));
                }
                file.set_len(certs_offset)?;
                file.seek(SeekFrom::End(0))?;
            } else {
                file.set_len(0)?;
            }
            Some(file)
        }
        None => None,
    };

    let stop_chunk = match opts.max_chunks {
        Some(mc) => chunks_total.min(start_chunk.saturating_add(mc)),
        None => chunks_total,
    };

    let mut collected: Vec<Certificate> = Vec::new();
    let mut last_checkpoint = Checkpoint {
        plan_hash: hash.clone(),
        chunk_index: start_chunk.wrapping_sub(1),
        tallies: folded,
        certs_offset,
    };

    if start_chunk < stop_chunk {
        let claim = AtomicU64::new(start_chunk);
        let processed = AtomicU64::new(folded.total);
        let (tx, rx) = mpsc::channel::<ChunkResult>();
        let threads = opts.threads.max(1);
        let progress_every = opts.progress_every;
        let total_u64 = total as u64;

        std::thread::scope(|scope| -> Result<(), PreclusionError> {
            for _ in 0..threads {
                let tx = tx.clone();
                let claim = &claim;
                let processed = &processed;
                let index = &index;
                scope.spawn(move || {
                    let mut ctx = ClassifyCtx::new(g);
                    let mut stream = index.stream();
                    loop {
                        let chunk = claim.fetch_add(1, Ordering::Relaxed);
                        if chunk >= stop_chunk {
                            break;
                        }
                        let lo = chunk as u128 * chunk_size as u128;
                        let hi = (lo + chunk_size as u128).min(total);
                        stream.seek(lo);
                        let mut tallies = Tallies::default();
                        let mut certs = Vec::new();
                        let mut since_flush = 0u64;
                        for _ in lo..hi {
                            let ok = stream.advance();
                            debug_assert!(ok);
                            let (vs, es) = stream.current();
                            let cls = ctx.classify(g, vs, es, mode);
                            let violation = cls.violates_super(mode);
                            tallies.record(cls, violation);
                            if violation {
                                let fault = FaultSet::new(vs.to_vec(), es.to_vec())
                                    .expect("stream emits canonical fault sets");
                                certs.push(Certificate::new(
                                    identity.clone(),
                                    mode,
                                    &fault,
                                    cls,
                                ));
                            }
                            since_flush += 1;
                            if since_flush == 4096 {
                                let before = processed.fetch_add(since_flush, Ordering::Relaxed);
                                if progress_every > 0
                                    && before / progress_every
                                        != (before + since_flush) / progress_every
                                {
                                    let done = before + since_flush;
                                    eprintln!("processed {done}/{total_u64} fault sets");
                                }
                                since_flush = 0;
                            }
                        }
                        processed.fetch_add(since_flush, Ordering::Relaxed);
                        if tx.send(ChunkResult { chunk, tallies, certs }).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);

            let mut pending: BTreeMap<u64, ChunkResult> = BTreeMap::new();
            let mut next = start_chunk;
            for result in rx {
                pending.insert(result.chunk, result);
                while let Some(done) = pending.remove(&next) {
                    folded.absorb(done.tallies);
                    if let Some(file) = certs_file.as_mut() {
                        let mut bytes = Vec::new();
                        for cert in &done.certs {
                            bytes.extend_from_slice(cert.to_json_line().as_bytes());
                            bytes.push(b'\n');
                        }
                        file.write_all(&bytes)?;
                        file.flush()?;
                        certs_offset += bytes.len() as u64;
                    }
                    collected.extend(done.certs);
                    last_checkpoint = Checkpoint {
                        plan_hash: hash.clone(),
                        chunk_index: next,
                        tallies: folded,
                        certs_offset,
                    };
                    if let Some(path) = &opts.checkpoint_path {
                        last_checkpoint.save(path)?;
                    }
                    next += 1;
                }
            }
            assert_eq!(next, stop_chunk, "all claimed chunks must fold");
            Ok(())
        })?;
    }

    let meta = RunMeta {
        elapsed_seconds: started.elapsed().as_secs_f64(),
        threads: opts.threads.max(1),
    };
    if stop_chunk < chunks_total {
        return Ok(VerifyOutcome::Suspended { checkpoint: last_checkpoint, chunks_total });
    }
    // The stream and the closed-form count must agree exactly.
    assert_eq!(folded.total as u128, total, "streamed count diverged from closed form");
    if opts.resume {
        if let Some(path) = &opts.certs_path {
            collected = read_certificates(path)?;
        }
    }
    let report = VerifyReport::new(hash, g.canonical_hash(), mode, plan.size, folded);
    Ok(VerifyOutcome::Completed(VerifyRun { report, certificates: collected, meta }))
}

/// Reads a JSON-lines certificate file back into memory.
pub fn read_certificates(path: &std::path::Path) -> Result<Vec<Certificate>, PreclusionError> {
    let file = std::fs::File::open(path)?;
    let mut certs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        certs.push(Certificate::from_json_line(&line).map_err(|e| {
            PreclusionError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?);
    }
    Ok(certs)
}

// ---------------------------------------------------------------------
// Deterministic random sampling
// ---------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub threads: usize,
    pub progress_every: u64,
    /// Write every sampled case (not just violations) as a certificate
    /// line; non-preclusive cases carry a matching witness.
    pub certs_path: Option<PathBuf>,
}

impl Default for SampleOptions {
    fn default() -> SampleOptions {
        SampleOptions {
            threads: 1,
            progress_every: DEFAULT_PROGRESS_EVERY,
            certs_path: None,
        }
    }
}

/// A completed sampling run: deterministic report plus the violating
/// certificates.
#[derive(Debug)]
pub struct SampleRun {
    pub report: VerifyReport,
    pub violations: Vec<Certificate>,
    pub meta: RunMeta,
}

/// Uniform draw below `bound` without modulo bias.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u128) -> u128 {
    debug_assert!(bound > 0);
    let limit = u128::MAX - (u128::MAX % bound + 1) % bound;
    loop {
        let x = (rng.next_u64() as u128) << 64 | rng.next_u64() as u128;
        if x <= limit {
            return x % bound;
        }
    }
}

/// Classifies `samples` fault sets of the given size drawn uniformly from
/// the constrained stream, deterministically per seed. A sample violates
/// if it is preclusive below the minimum degree (nothing should preclude
/// there), or preclusive non-basic / non-trivial at or above it.
#[allow(clippy::too_many_arguments)]
pub fn sampled_check(
    g: &Graph,
    mode: Mode,
    size: usize,
    samples: u64,
    seed: u64,
    constraints: &PlanConstraints,
    identity: &GraphIdentity,
    opts: &SampleOptions,
) -> Result<SampleRun, PreclusionError> {
    if mode.edges_only() && !constraints.edges_only {
        return Err(PreclusionError::InvalidPlan(format!(
            "mode {mode} deletes edges only; set the edge-only constraint"
        )));
    }
    let started = Instant::now();
    let plan = EnumerationPlan::new(size, *constraints);
    let index = build_index_inner(g, &plan, false)?;
    let total = index.total();
    if total == 0 {
        return Err(PreclusionError::InvalidPlan(
            "no fault set satisfies the plan constraints".into(),
        ));
    }
    let graph_hash = g.canonical_hash();
    let hash = descriptor_hash(&PlanDescriptor {
        op: "sample",
        graph_hash: &graph_hash,
        mode,
        size,
        fixed_vertex: constraints.fixed_vertex,
        min_vertices: constraints.min_vertices,
        forbid_incident_edges: constraints.forbid_incident_edges,
        edges_only: constraints.edges_only,
        chunk_target: 0,
        samples: Some(samples),
        seed: Some(seed),
    });
    let below_delta = size < g.min_degree();
    let want_certs = opts.certs_path.is_some();

    let threads = opts.threads.max(1) as u64;
    let per = samples.div_ceil(threads.max(1)).max(1);
    let (tx, rx) = mpsc::channel::<(u64, Tallies, Vec<Certificate>, Vec<Certificate>)>();
    let processed = AtomicU64::new(0);
    let progress_every = opts.progress_every;

    std::thread::scope(|scope| {
        for w in 0..threads {
            let lo = w * per;
            if lo >= samples {
                break;
            }
            let hi = (lo + per).min(samples);
            let tx = tx.clone();
            let index = &index;
            let processed = &processed;
            scope.spawn(move || {
                let mut ctx = ClassifyCtx::new(g);
                let mut stream = index.stream();
                let mut tallies = Tallies::default();
                let mut violations = Vec::new();
                let mut certs = Vec::new();
                for i in lo..hi {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
                    let rank = uniform_below(&mut rng, total);
                    stream.seek(rank);
                    let ok = stream.advance();
                    debug_assert!(ok);
                    let (vs, es) = stream.current();
                    let cls = ctx.classify(g, vs, es, mode);
                    let violation = if below_delta {
                        cls.preclusive
                    } else {
                        cls.violates_super(mode)
                    };
                    tallies.record(cls, violation);
                    if violation || want_certs {
                        let fault = FaultSet::new(vs.to_vec(), es.to_vec())
                            .expect("stream emits canonical fault sets");
                        let mut cert =
                            Certificate::new(identity.clone(), mode, &fault, cls);
                        if want_certs && !cls.preclusive {
                            let (_, witness) = classify_with_witness(g, &fault, mode)
                                .expect("fault set validated by the stream");
                            cert = cert.with_witness(witness);
                        }
                        if violation {
                            violations.push(cert.clone());
                        }
                        if want_certs {
                            certs.push(cert);
                        }
                    }
                    let before = processed.fetch_add(1, Ordering::Relaxed);
                    if progress_every > 0
                        && before / progress_every != (before + 1) / progress_every
                    {
                        eprintln!("processed {}/{samples} samples", before + 1);
                    }
                }
                let _ = tx.send((lo, tallies, violations, certs));
            });
        }
        drop(tx);
    });

    let mut parts: BTreeMap<u64, (Tallies, Vec<Certificate>, Vec<Certificate>)> = BTreeMap::new();
    for (lo, tallies, violations, certs) in rx {
        parts.insert(lo, (tallies, violations, certs));
    }
    let mut folded = Tallies::default();
    let mut all_violations = Vec::new();
    let mut all_certs = Vec::new();
    for (_, (tallies, violations, certs)) in parts {
        folded.absorb(tallies);
        all_violations.extend(violations);
        all_certs.extend(certs);
    }
    assert_eq!(folded.total, samples, "every sample must be classified");
    if let Some(path) = &opts.certs_path {
        let mut bytes = Vec::new();
        for cert in &all_certs {
            bytes.extend_from_slice(cert.to_json_line().as_bytes());
            bytes.push(b'\n');
        }
        std::fs::write(path, bytes)?;
    }
    let report = VerifyReport::new(hash, graph_hash, mode, size, folded);
    let meta = RunMeta {
        elapsed_seconds: started.elapsed().as_secs_f64(),
        threads: opts.threads.max(1),
    };
    Ok(SampleRun { report, violations: all_violations, meta })
}
