//! Constructors for the cube-like families under study and their structural
//! checks.
//!
//! Vertex labels are bit strings u1..un with u1 most significant, mapped to
//! ids by plain binary value, so the "first half" (prefix 0) is exactly the
//! ids below 2^(n-1). Augmented-cube adjacency has a closed form on ids:
//! two labels are adjacent iff their xor is a power of two (one differing
//! bit) or an all-ones suffix (prefix equal, suffix complemented).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bits, Edge, Graph, GraphError, VertexId};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dimension cap: 2^6 = 64 vertices, the input-size design point.
pub const MAX_DIMENSION: u32 = 6;

/// Rejection-sampling budget for random cross-matchings.
pub const SAMPLING_RETRY_BUDGET: u32 = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FamilyError {
    #[error("dimension {0} outside supported range {1}..={MAX_DIMENSION}")]
    DimensionOutOfRange(u32, u32),
    #[error("label {label:#x} does not fit in {n} bits")]
    LengthMismatch { label: u64, n: u32 },
    #[error("cross-matching sides must have equal positive size, got {0} and {1}")]
    SideSizeMismatch(usize, usize),
    #[error("half size {0} must be a power of two and at least 16 for sampling")]
    BadHalfSize(usize),
    #[error("vertex {0} is not covered exactly once by each cross matching")]
    NotPerfectCrossMatching(VertexId),
    #[error("cross matchings share the edge ({}, {})", .0.u(), .0.v())]
    MatchingOverlap(Edge),
    #[error("cross-matching sides overlap at vertex {0}")]
    SidesOverlap(VertexId),
    #[error("halves have dimensions {0} and {1}, expected equal")]
    HalfDimensionMismatch(u32, u32),
    #[error("half is not {expected}-regular on {vertices} vertices")]
    HalfNotRegular { expected: usize, vertices: usize },
    #[error("cross matching covers {got} pairs, expected {expected}")]
    CrossSizeMismatch { got: usize, expected: usize },
    #[error("cross-matching side does not match the id layout at vertex {0}")]
    SideLayoutMismatch(VertexId),
    #[error("generalized family requires dimension >= 5, got {0}")]
    GaqDimensionTooSmall(u32),
    #[error("family spec halves must each have dimension {0}")]
    BadHalves(u32),
    #[error("gave up after {SAMPLING_RETRY_BUDGET} rejected samples")]
    RetryBudgetExhausted,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check_dimension(n: u32, min: u32) -> Result<(), FamilyError> {
    if n < min || n > MAX_DIMENSION {
        return Err(FamilyError::DimensionOutOfRange(n, min));
    }
    Ok(())
}

/// n-dimensional hypercube: labels adjacent iff they differ in one bit.
pub fn build_hypercube(n: u32) -> Result<Graph, FamilyError> {
    check_dimension(n, 1)?;
    let size = 1usize << n;
    let mut edges = Vec::with_capacity(size * n as usize / 2);
    for u in 0..size as u64 {
        for bit in 0..n {
            let v = u ^ (1 << bit);
            if u < v {
                edges.push((u as VertexId, v as VertexId));
            }
        }
    }
    Ok(Graph::from_edges(size, edges)?)
}

/// Adjacency test for the augmented cube on n-bit labels: true iff some
/// position i has either the labels agreeing except bit i, or the prefix
/// before i agreeing and the entire suffix from i complemented (u != v).
/// Both conditions collapse to a shape test on u xor v.
pub fn aq_adjacent(u: u64, v: u64, n: u32) -> Result<bool, FamilyError> {
    if n == 0 || n > 63 {
        return Err(FamilyError::DimensionOutOfRange(n, 1));
    }
    for label in [u, v] {
        if label >> n != 0 {
            return Err(FamilyError::LengthMismatch { label, n });
        }
    }
    let x = u ^ v;
    Ok(x != 0 && (x & (x - 1) == 0 || x & (x + 1) == 0))
}

/// Augmented cube AQ_n: the hypercube plus all complemented-suffix edges;
/// (2n-1)-regular on 2^n vertices.
pub fn build_augmented_cube(n: u32) -> Result<Graph, FamilyError> {
    check_dimension(n, 1)?;
    let size = 1u64 << n;
    let mut edges = Vec::new();
    for u in 0..size {
        for v in u + 1..size {
            if aq_adjacent(u, v, n)? {
                edges.push((u as VertexId, v as VertexId));
            }
        }
    }
    Ok(Graph::from_edges(size as usize, edges)?)
}

/// Two edge-disjoint perfect matchings between two disjoint vertex sides,
/// the joining structure of the generalized construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossMatchings {
    m1: Vec<(VertexId, VertexId)>,
    m2: Vec<(VertexId, VertexId)>,
}

impl CrossMatchings {
    /// Validates that both lists match the same left side to the same right
    /// side, each perfectly, with no shared edge.
    pub fn new(
        mut m1: Vec<(VertexId, VertexId)>,
        mut m2: Vec<(VertexId, VertexId)>,
    ) -> Result<CrossMatchings, FamilyError> {
        if m1.len() != m2.len() || m1.is_empty() {
            return Err(FamilyError::SideSizeMismatch(m1.len(), m2.len()));
        }
        m1.sort_unstable();
        m2.sort_unstable();
        let side = |m: &[(VertexId, VertexId)],
                    pick: fn(&(VertexId, VertexId)) -> VertexId|
         -> Result<u128, FamilyError> {
            let mut mask = 0u128;
            for pair in m {
                let v = pick(pair);
                if mask >> v & 1 == 1 {
                    return Err(FamilyError::NotPerfectCrossMatching(v));
                }
                mask |= 1u128 << v;
            }
            Ok(mask)
        };
        let l1 = side(&m1, |p| p.0)?;
        let r1 = side(&m1, |p| p.1)?;
        let l2 = side(&m2, |p| p.0)?;
        let r2 = side(&m2, |p| p.1)?;
        if l1 != l2 || r1 != r2 {
            let diff = (l1 ^ l2) | (r1 ^ r2);
            let v = bits(diff).next().unwrap_or(0) as VertexId;
            return Err(FamilyError::NotPerfectCrossMatching(v));
        }
        if l1 & r1 != 0 {
            let v = bits(l1 & r1).next().unwrap() as VertexId;
            return Err(FamilyError::SidesOverlap(v));
        }
        for pair in &m1 {
            if m2.binary_search(pair).is_ok() {
                let e = Edge::new(pair.0, pair.1)?;
                return Err(FamilyError::MatchingOverlap(e));
            }
        }
        Ok(CrossMatchings { m1, m2 })
    }

    pub fn half_size(&self) -> usize {
        self.m1.len()
    }

    pub fn m1(&self) -> &[(VertexId, VertexId)] {
        &self.m1
    }

    pub fn m2(&self) -> &[(VertexId, VertexId)] {
        &self.m2
    }

    /// Lengths (in edges) of the alternating cycles of m1 union m2, sorted
    /// ascending. Every length is even and at least 4 for valid matchings.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        // m1 is sorted by left endpoint; index m2 by left endpoint too.
        let mut partner2 = std::collections::BTreeMap::new();
        for &(l, r) in &self.m2 {
            partner2.insert(l, r);
        }
        let mut right_to_left1 = std::collections::BTreeMap::new();
        for &(l, r) in &self.m1 {
            right_to_left1.insert(r, l);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut lengths = Vec::new();
        for &(start, _) in &self.m1 {
            if seen.contains(&start) {
                continue;
            }
            // Follow l -m2-> r -m1-> l' until the walk closes.
            let mut l = start;
            let mut steps = 0usize;
            loop {
                seen.insert(l);
                let r = partner2[&l];
                l = right_to_left1[&r];
                steps += 2;
                if l == start {
                    break;
                }
            }
            lengths.push(steps);
        }
        lengths.sort_unstable();
        lengths
    }

    /// The restricted condition: no alternating 4- or 6-cycles, i.e. every
    /// cycle length is at least 8.
    pub fn is_restricted(&self) -> bool {
        self.cycle_lengths().iter().all(|&len| len >= 8)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic sub-seed derivation for nested random structures.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

fn random_permutation(h: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..h).collect();
    for i in (1..h).rev() {
        // Modulo bias is below 2^-57 for our sizes and keeps the byte
        // stream's meaning independent of RNG-crate internals.
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}

fn permutation_min_cycle(sigma1: &[usize], sigma2: &[usize]) -> usize {
    // Cycle structure of sigma2^-1 . sigma1; alternating cycles are twice
    // as long.
    let h = sigma1.len();
    let mut inv2 = vec![0usize; h];
    for (i, &v) in sigma2.iter().enumerate() {
        inv2[v] = i;
    }
    let mut seen = vec![false; h];
    let mut min = usize::MAX;
    for start in 0..h {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        loop {
            seen[i] = true;
            i = inv2[sigma1[i]];
            len += 1;
            if i == start {
                break;
            }
        }
        min = min.min(len);
    }
    min
}

/// Samples two edge-disjoint random cross perfect matchings between sides
/// {0..h} and {h..2h} by rejection; with `restricted`, additionally rejects
/// pairs whose union has an alternating 4- or 6-cycle.
pub fn random_cross_matchings(
    half_size: usize,
    seed: u64,
    restricted: bool,
) -> Result<CrossMatchings, FamilyError> {
    if half_size < 16 || !half_size.is_power_of_two() {
        return Err(FamilyError::BadHalfSize(half_size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLING_RETRY_BUDGET {
        let sigma1 = random_permutation(half_size, &mut rng);
        let sigma2 = random_permutation(half_size, &mut rng);
        let min_cycle = permutation_min_cycle(&sigma1, &sigma2);
        let ok = if restricted { min_cycle >= 4 } else { min_cycle >= 2 };
        if !ok {
            continue;
        }
        let pair = |sigma: &[usize]| {
            sigma
                .iter()
                .enumerate()
                .map(|(l, &r)| (l as VertexId, (half_size + r) as VertexId))
                .collect()
        };
        return CrossMatchings::new(pair(&sigma1), pair(&sigma2));
    }
    Err(FamilyError::RetryBudgetExhausted)
}

/// The augmented cube's own joining matchings at level n: the cross matching
/// (w, w) and the complement matching (w, ~w). Their union decomposes into
/// alternating 4-cycles, so it fails the restricted condition.
pub fn aq_cross_matchings(n: u32) -> Result<CrossMatchings, FamilyError> {
    check_dimension(n, 2)?;
    let h = 1usize << (n - 1);
    let low = h as u64 - 1;
    let m1 = (0..h).map(|w| (w as VertexId, (h + w) as VertexId)).collect();
    let m2 = (0..h)
        .map(|w| (w as VertexId, (h + (!(w as u64) & low) as usize) as VertexId))
        .collect();
    CrossMatchings::new(m1, m2)
}

/// Joins two half graphs (ids 0..h and, after shifting, h..2h) with the
/// given cross matchings. Callers validate family-level preconditions.
fn join_halves(g0: &Graph, g1: &Graph, cm: &CrossMatchings) -> Result<Graph, FamilyError> {
    let h = g0.n();
    let shift = h as VertexId;
    let mut edges: Vec<(VertexId, VertexId)> =
        g0.edges().iter().map(|e| (e.u(), e.v())).collect();
    edges.extend(g1.edges().iter().map(|e| (e.u() + shift, e.v() + shift)));
    edges.extend(cm.m1().iter().copied());
    edges.extend(cm.m2().iter().copied());
    Ok(Graph::from_edges(2 * h, edges)?)
}

fn check_half_regular(g: &Graph, n: u32) -> Result<(), FamilyError> {
    let expected_vertices = 1usize << (n - 1);
    let expected_degree = 2 * (n as usize - 1) - 1;
    let regular = g.n() == expected_vertices
        && g.vertex_count() == expected_vertices
        && g.alive_vertices().all(|v| g.degree(v) == expected_degree);
    if !regular {
        return Err(FamilyError::HalfNotRegular {
            expected: expected_degree,
            vertices: expected_vertices,
        });
    }
    Ok(())
}

/// Builds a generalized augmented cube from two half specs and explicit
/// cross matchings. The cross sides must be laid out as 0..h and h..2h.
pub fn build_gaq(
    half0: &FamilySpec,
    half1: &FamilySpec,
    cm: &CrossMatchings,
) -> Result<Graph, FamilyError> {
    let d = half0.dimension();
    if d != half1.dimension() {
        return Err(FamilyError::HalfDimensionMismatch(d, half1.dimension()));
    }
    let n = d + 1;
    check_dimension(n, 2)?;
    let g0 = half0.build()?;
    let g1 = half1.build()?;
    check_half_regular(&g0, n)?;
    check_half_regular(&g1, n)?;
    let h = 1usize << (n - 1);
    if cm.half_size() != h {
        return Err(FamilyError::CrossSizeMismatch { got: cm.half_size(), expected: h });
    }
    for &(l, r) in cm.m1().iter().chain(cm.m2()) {
        if (l as usize) >= h || !(h..2 * h).contains(&(r as usize)) {
            return Err(FamilyError::SideLayoutMismatch(if (l as usize) >= h { l } else { r }));
        }
    }
    let g = join_halves(&g0, &g1, cm)?;
    debug_assert!(g.alive_vertices().all(|v| g.degree(v) == 2 * n as usize - 1));
    Ok(g)
}

/// Reproducible description of a family instance; building the same spec
/// always yields the bit-identical graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Hypercube { n: u32 },
    AugmentedCube { n: u32 },
    Gaq { n: u32, seed: u64, halves: Vec<FamilySpec> },
    Rgaq { n: u32, seed: u64, halves: Vec<FamilySpec> },
}

impl FamilySpec {
    pub fn dimension(&self) -> u32 {
        match self {
            FamilySpec::Hypercube { n }
            | FamilySpec::AugmentedCube { n }
            | FamilySpec::Gaq { n, .. }
            | FamilySpec::Rgaq { n, .. } => *n,
        }
    }

    /// Random generalized instance: halves recurse as unrestricted
    /// generalized cubes down to the AQ_4 base; only the top-level joining
    /// matchings carry the restricted condition when requested.
    pub fn random_gaq(n: u32, seed: u64, restricted: bool) -> Result<FamilySpec, FamilyError> {
        if n < 5 {
            return Err(FamilyError::GaqDimensionTooSmall(n));
        }
        check_dimension(n, 5)?;
        fn half(n: u32, seed: u64) -> FamilySpec {
            if n == 4 {
                FamilySpec::AugmentedCube { n: 4 }
            } else {
                FamilySpec::Gaq {
                    n,
                    seed,
                    halves: vec![
                        half(n - 1, derive_seed(seed, 1)),
                        half(n - 1, derive_seed(seed, 2)),
                    ],
                }
            }
        }
        let halves = vec![half(n - 1, derive_seed(seed, 1)), half(n - 1, derive_seed(seed, 2))];
        Ok(if restricted {
            FamilySpec::Rgaq { n, seed, halves }
        } else {
            FamilySpec::Gaq { n, seed, halves }
        })
    }

    pub fn validate(&self) -> Result<(), FamilyError> {
        match self {
            FamilySpec::Hypercube { n } | FamilySpec::AugmentedCube { n } => {
                check_dimension(*n, 1)
            }
            FamilySpec::Gaq { n, halves, .. } | FamilySpec::Rgaq { n, halves, .. } => {
                if *n < 5 {
                    return Err(FamilyError::GaqDimensionTooSmall(*n));
                }
                check_dimension(*n, 5)?;
                if halves.len() != 2 {
                    return Err(FamilyError::BadHalves(n - 1));
                }
                for half in halves {
                    if half.dimension() != n - 1 {
                        return Err(FamilyError::BadHalves(n - 1));
                    }
                    match half {
                        FamilySpec::Hypercube { .. } => return Err(FamilyError::BadHalves(n - 1)),
                        FamilySpec::AugmentedCube { n } if *n != 4 => {
                            return Err(FamilyError::BadHalves(4))
                        }
                        _ => half.validate()?,
                    }
                }
                Ok(())
            }
        }
    }

    pub fn build(&self) -> Result<Graph, FamilyError> {
        self.validate()?;
        match self {
            FamilySpec::Hypercube { n } => build_hypercube(*n),
            FamilySpec::AugmentedCube { n } => build_augmented_cube(*n),
            FamilySpec::Gaq { n, seed, halves } => {
                let cm = random_cross_matchings(1 << (n - 1), *seed, false)?;
                build_gaq(&halves[0], &halves[1], &cm)
            }
            FamilySpec::Rgaq { n, seed, halves } => {
                let cm = random_cross_matchings(1 << (n - 1), *seed, true)?;
                build_gaq(&halves[0], &halves[1], &cm)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<FamilySpec, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One pair whose neighborhood difference falls short of the requested gap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaViolation {
    pub a: VertexId,
    pub b: VertexId,
    pub adjacent: bool,
    pub observed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub gap: usize,
    pub violations: Vec<LemmaViolation>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the neighborhood-difference condition for every surviving pair:
/// adjacent pairs need |(N(a) - b) \ (N(b) - a)| >= gap in both directions,
/// non-adjacent pairs need |N(a) \ N(b)| >= gap in both directions. Gap 1
/// forbids one neighborhood (minus the pair) containing the other; gap 2 is
/// the two-sparse condition the generalized construction maintains.
pub fn check_neighborhood_lemmas(g: &Graph, gap: usize) -> LemmaReport {
    let mut violations = Vec::new();
    let alive: Vec<VertexId> = g.alive_vertices().collect();
    for (i, &a) in alive.iter().enumerate() {
        for &b in &alive[i + 1..] {
            let na = g.adjacency_row(a);
            let nb = g.adjacency_row(b);
            let adjacent = na >> b & 1 == 1;
            let (da, db) = if adjacent {
                let na_minus = na & !(1u128 << b);
                let nb_minus = nb & !(1u128 << a);
                (na_minus & !nb_minus, nb_minus & !na_minus)
            } else {
                (na & !nb, nb & !na)
            };
            let observed = da.count_ones().min(db.count_ones()) as usize;
            if observed < gap {
                violations.push(LemmaViolation { a, b, adjacent, observed });
            }
        }
    }
    LemmaReport { gap, violations }
}
