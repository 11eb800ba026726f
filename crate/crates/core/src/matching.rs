//! Matching decisions: maximum matching on general graphs (Edmonds blossom
//! contraction, O(V^3)), fractional perfect matchings via perfect matching in
//! the bipartite double cover (the cover's biadjacency matrix *is* the
//! adjacency matrix, so Hopcroft-Karp runs straight on the bitset rows), and
//! two independent slow oracles from the classical existence theorems:
//! Tutte (odd components) and Scheinerman-Ullman (isolated vertices).
//!
//! All fractional values are exact half-units (integer numerators over a
//! fixed denominator of 2); no floating point enters any decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bits, Edge, Graph, VertexId, MAX_VERTICES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("{oracle} oracle supports at most {cap} surviving vertices, got {got}")]
    SizeOverCap { oracle: &'static str, cap: usize, got: usize },
}

const NONE: usize = usize::MAX;

/// Subset-enumeration bound for [`scheinerman_oracle`] (2^|V| subsets).
pub const SCHEINERMAN_CAP: usize = 24;
/// Subset-enumeration bound for [`tutte_oracle`] (2^|V| component sweeps).
pub const TUTTE_CAP: usize = 20;

/// An integer matching: pairwise disjoint edges of some host graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub edges: Vec<Edge>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    /// True when the edges exist in `g`, are pairwise disjoint, and touch
    /// only surviving vertices.
    pub fn is_valid_for(&self, g: &Graph) -> bool {
        let mut used = 0u128;
        for e in &self.edges {
            if !g.has_edge(e.u(), e.v()) || used & e.mask() != 0 {
                return false;
            }
            used |= e.mask();
        }
        true
    }
}

/// A fractional matching with values in {0, 1/2, 1}, stored as integer
/// numerators over denominator 2 and keyed by canonical edge. Zero-valued
/// edges are simply absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalMatching {
    halves: BTreeMap<Edge, u8>,
}

/// Serialized form: `{"edges": [[u, v, numerator]], "denominator": 2}`.
#[derive(Serialize, Deserialize)]
struct FractionalMatchingJson {
    edges: Vec<(VertexId, VertexId, u8)>,
    denominator: u8,
}

impl FractionalMatching {
    pub fn from_halves(entries: impl IntoIterator<Item = (Edge, u8)>) -> FractionalMatching {
        let halves = entries.into_iter().filter(|&(_, h)| h > 0).collect();
        FractionalMatching { halves }
    }

    /// Numerator over 2 for an edge; absent edges have value 0.
    pub fn value_halves(&self, e: Edge) -> u8 {
        self.halves.get(&e).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = (Edge, u8)> + '_ {
        self.halves.iter().map(|(&e, &h)| (e, h))
    }

    /// Total weight in half-units (so a perfect fractional matching on k
    /// surviving vertices totals exactly k).
    pub fn total_halves(&self) -> u64 {
        self.halves.values().map(|&h| h as u64).sum()
    }

    /// Sum of incident values at `v`, in half-units.
    pub fn vertex_sum_halves(&self, v: VertexId) -> u64 {
        self.halves
            .iter()
            .filter(|(e, _)| e.u() == v || e.v() == v)
            .map(|(_, &h)| h as u64)
            .sum()
    }

    /// True when every support edge lies in `g` with value in {1/2, 1} and
    /// every surviving vertex of `g` has incident sum exactly 1.
    pub fn is_perfect_for(&self, g: &Graph) -> bool {
        for (e, h) in self.support() {
            if !(1..=2).contains(&h) || !g.has_edge(e.u(), e.v()) {
                return false;
            }
        }
        g.alive_vertices().all(|v| self.vertex_sum_halves(v) == 2)
    }

    pub fn to_json(&self) -> String {
        let repr = FractionalMatchingJson {
            edges: self.support().map(|(e, h)| (e.u(), e.v(), h)).collect(),
            denominator: 2,
        };
        serde_json::to_string(&repr).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<FractionalMatching, serde_json::Error> {
        let repr: FractionalMatchingJson = serde_json::from_str(text)?;
        Ok(FractionalMatching::from_halves(repr.edges.into_iter().filter_map(
            |(u, v, h)| Edge::new(u, v).ok().map(|e| (e, h)),
        )))
    }
}

impl Serialize for FractionalMatching {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FractionalMatchingJson {
            edges: self.support().map(|(e, h)| (e.u(), e.v(), h)).collect(),
            denominator: 2,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FractionalMatching {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = FractionalMatchingJson::deserialize(d)?;
        let mut halves = BTreeMap::new();
        for (u, v, h) in repr.edges {
            let e = Edge::new(u, v).map_err(serde::de::Error::custom)?;
            if h > 0 {
                halves.insert(e, h);
            }
        }
        Ok(FractionalMatching { halves })
    }
}

/// Reusable scratch space for matching decisions. One engine per worker
/// thread keeps the exhaustive inner loops allocation-free.
pub struct MatchEngine {
    // Bipartite (cover) state: left and right copies indexed by vertex id.
    pair_left: Vec<usize>,
    pair_right: Vec<usize>,
    dist: Vec<u32>,
    queue: Vec<usize>,
    // Blossom state.
    mate: Vec<usize>,
    parent: Vec<usize>,
    base: Vec<usize>,
}

impl Default for MatchEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl MatchEngine {
    pub fn new() -> MatchEngine {
        MatchEngine {
            pair_left: vec![NONE; MAX_VERTICES],
            pair_right: vec![NONE; MAX_VERTICES],
            dist: vec![0; MAX_VERTICES],
            queue: vec![0; MAX_VERTICES],
            mate: vec![NONE; MAX_VERTICES],
            parent: vec![NONE; MAX_VERTICES],
            base: vec![0; MAX_VERTICES],
        }
    }

    // ---- fractional decisions (Hopcroft-Karp on the implicit cover) ----

    /// Decides whether the graph given by `rows`/`alive` has a fractional
    /// perfect matching: equivalently, whether the bipartite double cover
    /// has a perfect matching. Rows must only reference alive vertices.
    pub fn rows_have_fractional_pm(&mut self, rows: &[u128], alive: u128) -> bool {
        let need = alive.count_ones() as usize;
        self.hopcroft_karp(rows, alive) == need
    }

    pub fn has_fractional_pm(&mut self, g: &Graph) -> bool {
        self.rows_have_fractional_pm(g.adjacency(), g.alive_mask())
    }

    /// Extracts a half-integral witness from a perfect cover matching: edge
    /// (u, v) receives one half-unit for each matched cover direction, so
    /// 2-cycles of the assignment yield value 1 and longer alternating
    /// cycles yield 1/2.
    pub fn fractional_pm_witness(&mut self, g: &Graph) -> Option<FractionalMatching> {
        let alive = g.alive_mask();
        let need = alive.count_ones() as usize;
        if self.hopcroft_karp(g.adjacency(), alive) != need {
            return None;
        }
        let mut halves: BTreeMap<Edge, u8> = BTreeMap::new();
        for u in bits(alive) {
            let v = self.pair_left[u];
            let e = Edge::new(u as VertexId, v as VertexId).expect("matched edge");
            *halves.entry(e).or_insert(0) += 1;
        }
        Some(FractionalMatching { halves })
    }

    /// True when some surviving vertex can be left exposed while the rest
    /// carry a fractional perfect matching.
    pub fn has_fractional_apm(&mut self, g: &Graph) -> bool {
        let alive = g.alive_mask();
        let rows = g.adjacency();
        let mut masked = [0u128; MAX_VERTICES];
        for v in bits(alive) {
            let rest = alive & !(1u128 << v);
            for u in bits(rest) {
                masked[u] = rows[u] & rest;
            }
            if self.rows_have_fractional_pm(&masked[..g.n()], rest) {
                return true;
            }
        }
        false
    }

    fn hopcroft_karp(&mut self, rows: &[u128], alive: u128) -> usize {
        for u in bits(alive) {
            debug_assert_eq!(rows[u] & !alive, 0, "row references dead vertex");
            self.pair_left[u] = NONE;
            self.pair_right[u] = NONE;
        }
        let mut matched = 0usize;
        // Greedy seeding removes most augmenting phases on dense graphs.
        let mut free_right = alive;
        for u in bits(alive) {
            let cands = rows[u] & free_right;
            if cands != 0 {
                let v = cands.trailing_zeros() as usize;
                self.pair_left[u] = v;
                self.pair_right[v] = u;
                free_right &= !(1u128 << v);
                matched += 1;
            }
        }
        loop {
            // BFS from free left vertices builds the layer structure.
            let (mut qh, mut qt) = (0usize, 0usize);
            for u in bits(alive) {
                if self.pair_left[u] == NONE {
                    self.dist[u] = 0;
                    self.queue[qt] = u;
                    qt += 1;
                } else {
                    self.dist[u] = u32::MAX;
                }
            }
            let mut reachable_free = false;
            while qh < qt {
                let u = self.queue[qh];
                qh += 1;
                for v in bits(rows[u]) {
                    let w = self.pair_right[v];
                    if w == NONE {
                        reachable_free = true;
                    } else if self.dist[w] == u32::MAX {
                        self.dist[w] = self.dist[u] + 1;
                        self.queue[qt] = w;
                        qt += 1;
                    }
                }
            }
            if !reachable_free {
                return matched;
            }
            for u in bits(alive) {
                if self.pair_left[u] == NONE && self.hk_augment(rows, u) {
                    matched += 1;
                }
            }
        }
    }

    fn hk_augment(&mut self, rows: &[u128], u: usize) -> bool {
        let du = self.dist[u];
        self.dist[u] = u32::MAX; // visited
        for v in bits(rows[u]) {
            let w = self.pair_right[v];
            if w == NONE || (self.dist[w] == du + 1 && self.hk_augment(rows, w)) {
                self.pair_left[u] = v;
                self.pair_right[v] = u;
                return true;
            }
        }
        false
    }

    // ---- integer decisions (blossom contraction) ----

    /// Maximum-matching cardinality on a general graph.
    pub fn rows_max_matching_size(&mut self, rows: &[u128], alive: u128) -> usize {
        self.blossom(rows, alive)
    }

    pub fn max_matching(&mut self, g: &Graph) -> Matching {
        let alive = g.alive_mask();
        self.blossom(g.adjacency(), alive);
        let mut edges = Vec::new();
        for v in bits(alive) {
            let u = self.mate[v];
            if u != NONE && v < u {
                edges.push(Edge::new(v as VertexId, u as VertexId).expect("mate"));
            }
        }
        Matching { edges }
    }

    pub fn matching_number(&mut self, g: &Graph) -> usize {
        self.blossom(g.adjacency(), g.alive_mask())
    }

    /// Perfect: every surviving vertex matched. Vacuously true when no
    /// vertex survives.
    pub fn has_perfect_matching(&mut self, g: &Graph) -> bool {
        self.rows_have_perfect_matching(g.adjacency(), g.alive_mask())
    }

    pub fn rows_have_perfect_matching(&mut self, rows: &[u128], alive: u128) -> bool {
        let n = alive.count_ones() as usize;
        n.is_multiple_of(2) && self.blossom(rows, alive) * 2 == n
    }

    /// Almost perfect: odd surviving count with exactly one vertex exposed.
    pub fn has_almost_perfect_matching(&mut self, g: &Graph) -> bool {
        self.rows_have_almost_perfect_matching(g.adjacency(), g.alive_mask())
    }

    pub fn rows_have_almost_perfect_matching(&mut self, rows: &[u128], alive: u128) -> bool {
        let n = alive.count_ones() as usize;
        n % 2 == 1 && self.blossom(rows, alive) * 2 == n - 1
    }

    /// Edmonds' algorithm with blossom contraction tracked through `base`;
    /// the structure follows the classic array formulation (van Rantwijk /
    /// e-maxx lineage) specialized to bitset adjacency rows.
    fn blossom(&mut self, rows: &[u128], alive: u128) -> usize {
        for v in bits(alive) {
            self.mate[v] = NONE;
        }
        let mut size = 0usize;
        let mut free = alive;
        for v in bits(alive) {
            if free >> v & 1 == 1 {
                let cands = rows[v] & free;
                if cands != 0 {
                    let u = cands.trailing_zeros() as usize;
                    self.mate[v] = u;
                    self.mate[u] = v;
                    free &= !((1u128 << v) | (1u128 << u));
                    size += 1;
                }
            }
        }
        for v in bits(alive) {
            if self.mate[v] == NONE && self.blossom_augment(rows, alive, v) {
                size += 1;
            }
        }
        size
    }

    fn blossom_augment(&mut self, rows: &[u128], alive: u128, root: usize) -> bool {
        for v in bits(alive) {
            self.parent[v] = NONE;
            self.base[v] = v;
        }
        let mut used: u128 = 1u128 << root;
        let (mut qh, mut qt) = (0usize, 0usize);
        self.queue[qt] = root;
        qt += 1;
        while qh < qt {
            let v = self.queue[qh];
            qh += 1;
            for to in bits(rows[v]) {
                if self.base[v] == self.base[to] || self.mate[v] == to {
                    continue;
                }
                if to == root || (self.mate[to] != NONE && self.parent[self.mate[to]] != NONE) {
                    // Odd cycle through the root: contract the blossom.
                    let cur_base = self.blossom_lca(v, to);
                    let mut bl: u128 = 0;
                    self.mark_path(v, cur_base, to, &mut bl);
                    self.mark_path(to, cur_base, v, &mut bl);
                    for i in bits(alive) {
                        if bl >> self.base[i] & 1 == 1 {
                            self.base[i] = cur_base;
                            if used >> i & 1 == 0 {
                                used |= 1u128 << i;
                                self.queue[qt] = i;
                                qt += 1;
                            }
                        }
                    }
                } else if self.parent[to] == NONE {
                    self.parent[to] = v;
                    if self.mate[to] == NONE {
                        self.flip_path(to);
                        return true;
                    }
                    let w = self.mate[to];
                    used |= 1u128 << w;
                    self.queue[qt] = w;
                    qt += 1;
                }
            }
        }
        false
    }

    fn blossom_lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut on_path: u128 = 0;
        loop {
            a = self.base[a];
            on_path |= 1u128 << a;
            if self.mate[a] == NONE {
                break;
            }
            a = self.parent[self.mate[a]];
        }
        loop {
            b = self.base[b];
            if on_path >> b & 1 == 1 {
                return b;
            }
            b = self.parent[self.mate[b]];
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize, bl: &mut u128) {
        while self.base[v] != b {
            *bl |= 1u128 << self.base[v];
            *bl |= 1u128 << self.base[self.mate[v]];
            self.parent[v] = child;
            child = self.mate[v];
            v = self.parent[child];
        }
    }

    fn flip_path(&mut self, mut v: usize) {
        while v != NONE {
            let pv = self.parent[v];
            let next = self.mate[pv];
            self.mate[v] = pv;
            self.mate[pv] = v;
            v = next;
        }
    }
}

// ---- one-shot conveniences ----

pub fn max_matching(g: &Graph) -> Matching {
    MatchEngine::new().max_matching(g)
}

pub fn matching_number(g: &Graph) -> usize {
    MatchEngine::new().matching_number(g)
}

pub fn has_perfect_matching(g: &Graph) -> bool {
    MatchEngine::new().has_perfect_matching(g)
}

pub fn has_almost_perfect_matching(g: &Graph) -> bool {
    MatchEngine::new().has_almost_perfect_matching(g)
}

pub fn has_fractional_pm(g: &Graph) -> bool {
    MatchEngine::new().has_fractional_pm(g)
}

pub fn fractional_pm_witness(g: &Graph) -> Option<FractionalMatching> {
    MatchEngine::new().fractional_pm_witness(g)
}

pub fn has_fractional_apm(g: &Graph) -> bool {
    MatchEngine::new().has_fractional_apm(g)
}

// ---- independent existence oracles ----

/// Scheinerman-Ullman condition: a fractional perfect matching exists iff
/// every vertex subset S isolates at most |S| vertices, i.e.
/// i(G - S) <= |S| for all S. Pure subset enumeration, no matching code.
pub fn scheinerman_oracle(g: &Graph) -> Result<bool, MatchingError> {
    let alive = g.alive_mask();
    let count = alive.count_ones() as usize;
    if count > SCHEINERMAN_CAP {
        return Err(MatchingError::SizeOverCap {
            oracle: "scheinerman",
            cap: SCHEINERMAN_CAP,
            got: count,
        });
    }
    let rows = g.adjacency();
    let mut s: u128 = 0;
    loop {
        let rem = alive & !s;
        let budget = s.count_ones();
        let mut isolated = 0u32;
        for v in bits(rem) {
            if rows[v] & rem == 0 {
                isolated += 1;
                if isolated > budget {
                    return Ok(false);
                }
            }
        }
        if s == alive {
            return Ok(true);
        }
        s = s.wrapping_sub(alive) & alive;
    }
}

/// Tutte condition: a perfect matching exists iff every vertex subset S
/// leaves at most |S| odd components. Subset enumeration with a bitset
/// component sweep; independent of the blossom implementation.
pub fn tutte_oracle(g: &Graph) -> Result<bool, MatchingError> {
    let alive = g.alive_mask();
    let count = alive.count_ones() as usize;
    if count > TUTTE_CAP {
        return Err(MatchingError::SizeOverCap {
            oracle: "tutte",
            cap: TUTTE_CAP,
            got: count,
        });
    }
    let rows = g.adjacency();
    let mut s: u128 = 0;
    loop {
        let rem = alive & !s;
        let budget = s.count_ones();
        let mut odd = 0u32;
        let mut left = rem;
        while left != 0 {
            let seed = left & left.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut grown = 0u128;
                for v in bits(frontier) {
                    grown |= rows[v];
                }
                frontier = grown & rem & !comp;
                comp |= frontier;
            }
            if comp.count_ones() % 2 == 1 {
                odd += 1;
                if odd > budget {
                    return Ok(false);
                }
            }
            left &= !comp;
        }
        if s == alive {
            return Ok(true);
        }
        s = s.wrapping_sub(alive) & alive;
    }
}
