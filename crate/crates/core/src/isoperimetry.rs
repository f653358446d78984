//! Conductance of finite sets and certified isoperimetric bounds.
//!
//! The conductance of a nonempty finite set F against a weighted multiset S
//! is Phi(F) = sum_g w(g) |gF \ F| / |F|. Its complement, the averaged
//! overlap sum_g w(g) |gF n F| / |F|, is the contraction factor the witness
//! iteration consumes, so both are computed exactly and their sum is
//! asserted to be 1.
//!
//! Search runs on a prebuilt ball. Conductance is invariant under right
//! translation F -> Fg (y = sx iff yg = s(xg), so left edges are carried
//! along), which also preserves connectedness in the left-edge graph; a
//! connected minimizer of size m can therefore be translated to contain
//! the identity, where it lies within the complete part of a radius-m
//! ball. Rooted connected enumeration is thus globally exhaustive over
//! connected sets of bounded size.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::cayley::{BallGraph, CayleyBall, NO_VERTEX};
use crate::error::{Error, Result};
use crate::group::{GeneratorMultiset, GroupContext, GroupElement, WeightedMultiset};
use crate::rational::{self, Ratio};
use crate::rng::StreamRng;
use crate::{Limits, Provenance};

/// Nearest f64 to sqrt(1/2), the strict threshold of the conductance
/// criterion.
pub const CONDUCTANCE_THRESHOLD: f64 = 0.707_106_781_186_547_6;

/// A finite set together with its exact conductance data against a fixed
/// weighted multiset.
#[derive(Debug, Clone)]
pub struct FolnerCandidate {
    set: Vec<GroupElement>,
    boundary_counts: Vec<(GroupElement, u64)>,
    phi: Ratio,
    overlap: Ratio,
    multiset: WeightedMultiset,
}

impl FolnerCandidate {
    pub fn set(&self) -> &[GroupElement] {
        &self.set
    }

    pub fn size(&self) -> usize {
        self.set.len()
    }

    /// |gF \ F| for each support element g.
    pub fn boundary_counts(&self) -> &[(GroupElement, u64)] {
        &self.boundary_counts
    }

    pub fn phi(&self) -> &Ratio {
        &self.phi
    }

    /// sum_g w(g) |gF n F| / |F|; exactly 1 - phi.
    pub fn overlap(&self) -> &Ratio {
        &self.overlap
    }

    /// The multiset this candidate was evaluated against.
    pub fn multiset(&self) -> &WeightedMultiset {
        &self.multiset
    }
}

/// Exact conductance of `f` against `s` by direct group arithmetic.
pub fn phi(ctx: &GroupContext, s: &WeightedMultiset, f: &[GroupElement]) -> Result<FolnerCandidate> {
    if f.is_empty() {
        return Err(Error::Argument("conductance of the empty set".into()));
    }
    let mut set: Vec<GroupElement> = f.to_vec();
    set.sort();
    if set.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Argument("duplicate element in set".into()));
    }
    for g in &set {
        ctx.validate(g)?;
    }
    let members: BTreeSet<&GroupElement> = set.iter().collect();
    let size = rational::from_int(set.len() as i64);

    let mut boundary_counts = Vec::with_capacity(s.support_len());
    let mut phi = rational::zero();
    let mut overlap = rational::zero();
    for (g, w) in s.support() {
        let mut out = 0u64;
        let mut stay = 0u64;
        for x in &set {
            let gx = ctx.mul(g, x)?;
            if members.contains(&gx) {
                stay += 1;
            } else {
                out += 1;
            }
        }
        boundary_counts.push((g.clone(), out));
        phi += w * rational::from_int(out as i64) / &size;
        overlap += w * rational::from_int(stay as i64) / &size;
    }
    if &phi + &overlap != rational::one() {
        return Err(Error::InternalInvariant(
            "conductance and overlap do not sum to 1".into(),
        ));
    }
    Ok(FolnerCandidate {
        set,
        boundary_counts,
        phi,
        overlap,
        multiset: s.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMode {
    /// Visit every connected set of size <= max_size containing the center
    /// (globally exhaustive over connected sets; see module docs), or every
    /// subset of the complete part when `include_disconnected` is set.
    Exhaustive {
        max_size: usize,
        include_disconnected: bool,
    },
    /// Simulated annealing over add/remove moves, `chains` independent
    /// seeded chains of `budget` steps each, deterministic merge.
    Anneal { budget: u64, seed: u64, chains: u32 },
}

/// Best set found for one cardinality.
#[derive(Debug, Clone)]
pub struct SizeMinimum {
    pub size: usize,
    pub phi: Ratio,
    pub set: Vec<GroupElement>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: FolnerCandidate,
    /// Per-cardinality minima; exhaustive connected mode only.
    pub per_size: Vec<SizeMinimum>,
    /// Sets visited (exhaustive) or proposals evaluated (anneal).
    pub explored: u64,
    /// `Exact` when `best` is a true minimum over the searched class,
    /// `Heuristic` for annealing. Either way `best.phi` itself is exact
    /// for that set, so it is always a valid conductance upper bound.
    pub provenance: Provenance,
}

/// Weight table resolved against ball entry indices, for slot-based
/// conductance evaluation inside a search.
struct SlotWeights {
    /// (entry index, exact weight, f64 weight) per support element.
    slots: Vec<(usize, Ratio, f64)>,
}

impl SlotWeights {
    fn resolve(ball: &CayleyBall, s: &WeightedMultiset) -> Result<SlotWeights> {
        let mut slots = Vec::with_capacity(s.support_len());
        for (g, w) in s.support() {
            let j = ball.entry_of(g).ok_or_else(|| {
                Error::MethodNotApplicable(
                    "ball was not built over this multiset's support".into(),
                )
            })?;
            slots.push((j, w.clone(), rational::to_f64(w)));
        }
        Ok(SlotWeights { slots })
    }

    /// Exact conductance of an index set; all members must be complete.
    fn phi_exact(&self, graph: &BallGraph, members: &[bool], set: &[u32]) -> Ratio {
        let size = rational::from_int(set.len() as i64);
        let mut acc = rational::zero();
        for &(j, ref w, _) in &self.slots {
            let mut out = 0u64;
            for &x in set {
                let y = graph.out(x, j);
                debug_assert_ne!(y, NO_VERTEX);
                if y == NO_VERTEX || !members[y as usize] {
                    out += 1;
                }
            }
            acc += w * rational::from_int(out as i64) / &size;
        }
        acc
    }

}

/// Searches a ball for low-conductance sets.
///
/// The multiset's support must consist of ball entries; candidates are
/// restricted to complete vertices so every boundary count is exact.
pub fn folner_search(
    ball: &CayleyBall,
    s: &WeightedMultiset,
    mode: SearchMode,
    limits: &Limits,
) -> Result<SearchOutcome> {
    let weights = SlotWeights::resolve(ball, s)?;
    let graph = ball.graph();
    let complete: Vec<bool> = (0..graph.vertex_count() as u32)
        .map(|v| graph.is_complete(v))
        .collect();
    if !complete[0] {
        return Err(Error::Range(
            "ball too small: the center itself is incomplete".into(),
        ));
    }

    match mode {
        SearchMode::Exhaustive {
            max_size,
            include_disconnected,
        } => exhaustive_search(
            ball,
            s,
            &weights,
            &complete,
            max_size,
            include_disconnected,
            limits,
        ),
        SearchMode::Anneal {
            budget,
            seed,
            chains,
        } => anneal_search(ball, s, &weights, &complete, budget, seed, chains),
    }
}

/// Tracks the incumbent with a total, order-independent preference:
/// smaller phi, then smaller set, then lexicographically smaller indices.
#[derive(Clone)]
struct Best {
    phi: Ratio,
    set: Vec<u32>,
}

impl Best {
    fn offer(slot: &mut Option<Best>, phi: Ratio, set: &[u32]) {
        let better = match slot {
            None => true,
            Some(b) => {
                phi < b.phi
                    || (phi == b.phi
                        && (set.len() < b.set.len()
                            || (set.len() == b.set.len() && set < b.set.as_slice())))
            }
        };
        if better {
            *slot = Some(Best {
                phi,
                set: set.to_vec(),
            });
        }
    }
}

fn candidate_from_indices(
    ball: &CayleyBall,
    s: &WeightedMultiset,
    set: &[u32],
) -> Result<FolnerCandidate> {
    let elements: Vec<GroupElement> = set
        .iter()
        .map(|&i| ball.vertex_element(i).clone())
        .collect();
    // Authoritative re-evaluation by group arithmetic; the slot-based
    // search values must agree with this.
    phi(ball.ctx(), s, &elements)
}

fn exhaustive_search(
    ball: &CayleyBall,
    s: &WeightedMultiset,
    weights: &SlotWeights,
    complete: &[bool],
    max_size: usize,
    include_disconnected: bool,
    limits: &Limits,
) -> Result<SearchOutcome> {
    if max_size == 0 {
        return Err(Error::Range("max_size must be at least 1".into()));
    }
    if max_size > limits.max_exhaustive_size {
        return Err(Error::Budget {
            what: "exhaustive set size",
            requested: max_size as u64,
            limit: limits.max_exhaustive_size as u64,
        });
    }
    let graph = ball.graph();
    let saturated = complete.iter().all(|&c| c);
    if !saturated && max_size > graph.radius() {
        return Err(Error::Range(format!(
            "ball radius {} cannot certify sets of size {max_size}; need radius >= max_size",
            graph.radius()
        )));
    }

    let mut per_size: Vec<Option<Best>> = vec![None; max_size + 1];
    let mut explored = 0u64;

    if include_disconnected {
        let universe: Vec<u32> = (0..graph.vertex_count() as u32)
            .filter(|&v| complete[v as usize])
            .collect();
        let mut members = vec![false; graph.vertex_count()];
        let mut stack: Vec<u32> = Vec::new();
        enumerate_all_subsets(
            graph,
            weights,
            &universe,
            0,
            max_size,
            &mut stack,
            &mut members,
            &mut per_size,
            &mut explored,
            limits,
        )?;
    } else {
        let mut members = vec![false; graph.vertex_count()];
        let mut seen = vec![false; graph.vertex_count()];
        let mut stack: Vec<u32> = Vec::new();
        members[0] = true;
        seen[0] = true;
        stack.push(0);
        let ext: Vec<u32> = {
            let mut nbrs = graph.distinct_neighbors(0);
            nbrs.retain(|&u| complete[u as usize]);
            for &u in &nbrs {
                seen[u as usize] = true;
            }
            nbrs
        };
        extend_connected(
            graph,
            weights,
            complete,
            max_size,
            &mut stack,
            ext,
            &mut members,
            &mut seen,
            &mut per_size,
            &mut explored,
            limits,
        )?;
    }

    let mut minima = Vec::new();
    let mut best_slot: Option<Best> = None;
    for (size, slot) in per_size.iter().enumerate() {
        if let Some(b) = slot {
            minima.push(SizeMinimum {
                size,
                phi: b.phi.clone(),
                set: {
                    let mut els: Vec<GroupElement> = b
                        .set
                        .iter()
                        .map(|&i| ball.vertex_element(i).clone())
                        .collect();
                    els.sort();
                    els
                },
            });
            Best::offer(&mut best_slot, b.phi.clone(), &b.set);
        }
    }
    let best = best_slot.expect("at least the singleton center was visited");
    let candidate = candidate_from_indices(ball, s, &best.set)?;
    debug_assert_eq!(candidate.phi, best.phi);
    Ok(SearchOutcome {
        best: candidate,
        per_size: minima,
        explored,
        provenance: Provenance::Exact,
    })
}

/// Connected-set enumeration: each connected superset of {center} within
/// the complete part is visited exactly once. At every call the current
/// stack is one such set; `ext` holds vertices adjacent to it that were
/// not yet offered. Popping w and recursing with ext extended by w's
/// unseen neighbors, then leaving w out for the remaining iterations,
/// partitions the supersets by their earliest extension vertex.
#[allow(clippy::too_many_arguments)]
fn extend_connected(
    graph: &BallGraph,
    weights: &SlotWeights,
    complete: &[bool],
    max_size: usize,
    stack: &mut Vec<u32>,
    mut ext: Vec<u32>,
    members: &mut Vec<bool>,
    seen: &mut Vec<bool>,
    per_size: &mut [Option<Best>],
    explored: &mut u64,
    limits: &Limits,
) -> Result<()> {
    *explored += 1;
    if *explored > limits.max_enumerated_sets {
        return Err(Error::Budget {
            what: "enumerated sets",
            requested: *explored,
            limit: limits.max_enumerated_sets,
        });
    }
    let phi = weights.phi_exact(graph, members, stack);
    Best::offer(&mut per_size[stack.len()], phi, stack);

    if stack.len() == max_size {
        return Ok(());
    }
    while let Some(w) = ext.pop() {
        let mut newly = Vec::new();
        for u in graph.distinct_neighbors(w) {
            if !seen[u as usize] && complete[u as usize] {
                seen[u as usize] = true;
                newly.push(u);
            }
        }
        let mut ext2 = ext.clone();
        ext2.extend_from_slice(&newly);
        stack.push(w);
        members[w as usize] = true;
        extend_connected(
            graph, weights, complete, max_size, stack, ext2, members, seen, per_size, explored,
            limits,
        )?;
        members[w as usize] = false;
        stack.pop();
        for &u in &newly {
            seen[u as usize] = false;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn enumerate_all_subsets(
    graph: &BallGraph,
    weights: &SlotWeights,
    universe: &[u32],
    from: usize,
    max_size: usize,
    stack: &mut Vec<u32>,
    members: &mut Vec<bool>,
    per_size: &mut [Option<Best>],
    explored: &mut u64,
    limits: &Limits,
) -> Result<()> {
    if !stack.is_empty() {
        *explored += 1;
        if *explored > limits.max_enumerated_sets {
            return Err(Error::Budget {
                what: "enumerated sets",
                requested: *explored,
                limit: limits.max_enumerated_sets,
            });
        }
        let phi = weights.phi_exact(graph, members, stack);
        Best::offer(&mut per_size[stack.len()], phi, stack);
        if stack.len() == max_size {
            return Ok(());
        }
    }
    for i in from..universe.len() {
        let v = universe[i];
        stack.push(v);
        members[v as usize] = true;
        enumerate_all_subsets(
            graph,
            weights,
            universe,
            i + 1,
            max_size,
            stack,
            members,
            per_size,
            explored,
            limits,
        )?;
        members[v as usize] = false;
        stack.pop();
    }
    Ok(())
}

fn anneal_search(
    ball: &CayleyBall,
    s: &WeightedMultiset,
    weights: &SlotWeights,
    complete: &[bool],
    budget: u64,
    seed: u64,
    chains: u32,
) -> Result<SearchOutcome> {
    if chains == 0 {
        return Err(Error::Range("anneal needs at least one chain".into()));
    }
    let graph = ball.graph();

    // The unique j-preimage of v (out(u, j) = v for at most one u), if it
    // is a member of the current set.
    let member_preimage = |members: &[bool], set: &[u32], v: u32, j: usize| -> Option<u32> {
        if graph.has_incoming_slots() {
            let u = graph.incoming(v, j);
            (u != NO_VERTEX && members[u as usize]).then_some(u)
        } else {
            set.iter().copied().find(|&x| graph.out(x, j) == v)
        }
    };
    let phi_of = |counts: &[i64], len: usize| -> f64 {
        let inv = 1.0 / len as f64;
        weights
            .slots
            .iter()
            .zip(counts)
            .map(|(&(_, _, w), &c)| w * c as f64 * inv)
            .sum()
    };

    let run_chain = |chain: u32| -> (f64, Vec<u32>) {
        let mut rng = StreamRng::new(seed, &[0xF01, chain as u64]);
        let mut members = vec![false; graph.vertex_count()];
        let mut set: Vec<u32> = vec![0];
        members[0] = true;
        // Per-slot |gF \ F|, updated incrementally: moving one vertex only
        // changes a slot's count through that vertex's own out-edge and its
        // unique preimage edge.
        let mut counts: Vec<i64> = weights
            .slots
            .iter()
            .map(|&(j, _, _)| if graph.out(0, j) == 0 { 0 } else { 1 })
            .collect();
        let mut cur = phi_of(&counts, 1);
        let mut best = cur;
        let mut best_set = set.clone();
        // Geometric schedule spanning the whole budget; a fixed per-step
        // factor freezes long runs early and wastes the remaining steps.
        let t0 = 0.5f64;
        let t_end = 1e-4f64;
        let cool = (t_end / t0).powf(1.0 / budget.max(1) as f64);
        let mut temp = t0;
        let mut scratch: Vec<i64> = counts.clone();

        for _ in 0..budget {
            temp *= cool;
            let remove = set.len() > 1 && rng.next_unit() < 0.5;
            let (v, new_len) = if remove {
                (set[rng.next_below(set.len())], set.len() - 1)
            } else {
                // Grow across a uniformly chosen boundary edge.
                let x = set[rng.next_below(set.len())];
                let j = rng.next_below(graph.entry_count());
                let v = graph.out(x, j);
                if v == NO_VERTEX || members[v as usize] || !complete[v as usize] {
                    continue;
                }
                (v, set.len() + 1)
            };
            scratch.copy_from_slice(&counts);
            for (slot, &(j, _, _)) in weights.slots.iter().enumerate() {
                let y = graph.out(v, j);
                let y_in_f = y != NO_VERTEX && members[y as usize];
                let pre = member_preimage(&members, &set, v, j);
                if remove {
                    scratch[slot] +=
                        i64::from(matches!(pre, Some(u) if u != v)) - i64::from(!y_in_f);
                } else {
                    scratch[slot] += i64::from(!y_in_f && y != v) - i64::from(pre.is_some());
                }
            }
            let next = phi_of(&scratch, new_len);
            if next <= cur || rng.next_unit() < ((cur - next) / temp).exp() {
                cur = next;
                counts.copy_from_slice(&scratch);
                if remove {
                    let idx = set.iter().position(|&x| x == v).unwrap();
                    set.swap_remove(idx);
                    members[v as usize] = false;
                } else {
                    set.push(v);
                    members[v as usize] = true;
                }
                if cur < best || (cur == best && set.len() < best_set.len()) {
                    best = cur;
                    best_set = set.clone();
                }
            }
        }
        best_set.sort_unstable();
        (best, best_set)
    };

    use rayon::prelude::*;
    let results: Vec<(f64, Vec<u32>)> = (0..chains).into_par_iter().map(run_chain).collect();

    // Deterministic merge on exact values.
    let mut best_slot: Option<Best> = None;
    for (_, set) in &results {
        let members = {
            let mut m = vec![false; graph.vertex_count()];
            for &v in set {
                m[v as usize] = true;
            }
            m
        };
        let exact = weights.phi_exact(graph, &members, set);
        Best::offer(&mut best_slot, exact, set);
    }
    let best = best_slot.expect("chains always produce a candidate");
    let candidate = candidate_from_indices(ball, s, &best.set)?;
    debug_assert_eq!(candidate.phi, best.phi);
    Ok(SearchOutcome {
        best: candidate,
        per_size: Vec::new(),
        explored: budget * chains as u64,
        provenance: Provenance::Heuristic,
    })
}

/// Conductance of any n-vertex subtree of the 2k-regular tree, all of which
/// tie: ((2k-2)n + 2) / (2kn).
pub fn tree_subtree_phi(k: usize, n: u64) -> Ratio {
    rational::from_frac(
        (2 * k as i64 - 2) * n as i64 + 2,
        2 * k as i64 * n as i64,
    )
}

/// Infimal conductance of the standard generating set of free(k): the
/// subtree family above converges to (k-1)/k from above, and no set does
/// better. Exact external value, used as a cross-check oracle.
pub fn tree_h_exact(k: usize) -> Result<Ratio> {
    if k == 0 {
        return Err(Error::Range("free rank must be at least 1".into()));
    }
    Ok(rational::from_frac(k as i64 - 1, k as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HProvenance {
    /// h >= (1 - rho) |S| / (|S| - 1) with rho exact.
    MoharFromExactRho,
    /// Same transfer from a certified upper bound on rho.
    MoharFromRhoUpper,
    /// h <= Phi(F) for an explicit set F.
    CandidateSet,
    /// h <= sqrt(1 - rho_lower^2).
    MoharFromRhoLower,
    /// A closed-form exact value (e.g. the regular tree).
    ExactOracle,
}

/// One-sided bound on the conductance infimum h.
#[derive(Debug, Clone, Serialize)]
pub struct HBound {
    pub value: f64,
    /// Present when the bound is exactly representable.
    #[serde(serialize_with = "rational::serialize_opt_ratio")]
    pub exact: Option<Ratio>,
    pub provenance: HProvenance,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct HBounds {
    pub lower: Option<HBound>,
    pub upper: Option<HBound>,
}

/// Transfers spectral radius bounds to conductance bounds.
///
/// `rho_upper` (certified, or exact when flagged) gives the lower bound
/// h >= (1 - rho) |S| / (|S| - 1); `rho_lower` (certified) gives the upper
/// bound h <= sqrt(1 - rho^2). `size` is the nominal multiset size |S|.
pub fn mohar_bounds(
    rho_lower: Option<f64>,
    rho_upper: Option<f64>,
    rho_upper_is_exact: bool,
    size: &BigInt,
) -> Result<HBounds> {
    for rho in rho_lower.iter().chain(rho_upper.iter()) {
        if !(0.0..=1.0).contains(rho) {
            return Err(Error::Range(format!("rho = {rho} is outside [0, 1]")));
        }
    }
    let mut out = HBounds::default();
    if let Some(rho) = rho_upper {
        if size <= &BigInt::one() {
            return Err(Error::Range(
                "the lower-bound transfer needs |S| >= 2".into(),
            ));
        }
        let s = size.to_f64().unwrap_or(f64::INFINITY);
        let value = ((1.0 - rho) * s / (s - 1.0)).min(1.0);
        out.lower = Some(HBound {
            value,
            exact: None,
            provenance: if rho_upper_is_exact {
                HProvenance::MoharFromExactRho
            } else {
                HProvenance::MoharFromRhoUpper
            },
        });
    }
    if let Some(rho) = rho_lower {
        out.upper = Some(HBound {
            value: (1.0 - rho * rho).max(0.0).sqrt(),
            exact: None,
            provenance: HProvenance::MoharFromRhoLower,
        });
    }
    if let (Some(lo), Some(hi)) = (&out.lower, &out.upper) {
        if lo.value > hi.value {
            return Err(Error::Argument(format!(
                "inconsistent rho inputs: h lower bound {} exceeds upper bound {}",
                lo.value, hi.value
            )));
        }
    }
    Ok(out)
}

/// Upper bound on h from an explicit candidate set.
pub fn candidate_upper(cand: &FolnerCandidate) -> HBound {
    HBound {
        value: rational::to_f64(cand.phi()),
        exact: Some(cand.phi().clone()),
        provenance: HProvenance::CandidateSet,
    }
}

/// Outcome of testing h_lower > sqrt(1/2).
#[derive(Debug, Clone, Serialize)]
pub struct CriterionCheck {
    pub threshold: f64,
    pub h_lower: f64,
    pub margin: f64,
    pub passed: bool,
    /// False when the input provenance cannot certify; `passed` is then
    /// advisory only.
    pub certified: bool,
}

/// Strict comparison h_lower > sqrt(1/2). The pass flag is computed for
/// any input, but only certified provenance yields a certificate.
pub fn criterion_check(h_lower: f64, provenance: Provenance) -> CriterionCheck {
    let passed = h_lower > CONDUCTANCE_THRESHOLD;
    CriterionCheck {
        threshold: CONDUCTANCE_THRESHOLD,
        h_lower,
        margin: h_lower - CONDUCTANCE_THRESHOLD,
        passed,
        certified: passed && provenance.is_certified(),
    }
}

/// Exact form of the criterion for rational h: h > sqrt(1/2) iff 2 h^2 > 1.
pub fn criterion_check_exact(h_lower: &Ratio) -> bool {
    if h_lower < &rational::zero() {
        return false;
    }
    let two = rational::from_int(2);
    &(&two * h_lower * h_lower) > &rational::one()
}

/// One row of the power-multiset criterion ladder.
#[derive(Debug, Clone, Serialize)]
pub struct PowerTrailRow {
    pub n: u32,
    /// Nominal size |S|^n.
    pub nominal_size: f64,
    pub h_lower: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerSearch {
    pub rows: Vec<PowerTrailRow>,
    /// First power whose transferred lower bound clears the threshold.
    pub found: Option<u32>,
}

/// Walks S^n for n = 1..n_max, transferring rho(S)^n = rho(S^n) through
/// the lower-bound inequality until h(S^n) > sqrt(1/2).
///
/// Requires a symmetric multiset (the power identity for rho needs
/// self-adjointness) and an exact or certified-upper rho in (0, 1].
pub fn witness_power_search(
    ctx: &GroupContext,
    s: &GeneratorMultiset,
    rho: f64,
    n_max: u32,
) -> Result<PowerSearch> {
    if n_max == 0 {
        return Err(Error::Range("n_max must be at least 1".into()));
    }
    if !(0.0 < rho && rho <= 1.0) {
        return Err(Error::Range(format!("rho = {rho} is outside (0, 1]")));
    }
    if !s.is_symmetric(ctx)? {
        return Err(Error::MethodNotApplicable(
            "the power identity for rho needs a symmetric multiset".into(),
        ));
    }
    let size = s.size() as f64;
    let mut rows = Vec::with_capacity(n_max as usize);
    let mut found = None;
    for n in 1..=n_max {
        let s_n = size.powi(n as i32);
        let h = ((1.0 - rho.powi(n as i32)) * s_n / (s_n - 1.0)).min(1.0);
        let passed = h > CONDUCTANCE_THRESHOLD;
        rows.push(PowerTrailRow {
            n,
            nominal_size: s_n,
            h_lower: h,
            passed,
        });
        if passed {
            found = Some(n);
            break;
        }
    }
    Ok(PowerSearch { rows, found })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::build_ball;
    use crate::rational::{from_frac, from_int};

    fn free2_setup(r: usize) -> (GroupContext, WeightedMultiset, CayleyBall) {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        let w = s.weighted(&ctx).unwrap();
        let ball = build_ball(&ctx, &s, r, &Limits::default()).unwrap();
        (ctx, w, ball)
    }

    #[test]
    fn phi_of_small_sets() {
        let ctx = GroupContext::free(2).unwrap();
        let w = ctx.standard_symmetric().weighted(&ctx).unwrap();
        let e = ctx.identity();
        let a = ctx.generator(0);

        let single = phi(&ctx, &w, &[e.clone()]).unwrap();
        assert_eq!(*single.phi(), rational::one());
        assert_eq!(*single.overlap(), rational::zero());

        let pair = phi(&ctx, &w, &[e.clone(), a.clone()]).unwrap();
        assert_eq!(*pair.phi(), from_frac(3, 4));
        assert_eq!(*pair.overlap(), from_frac(1, 4));
        let counts: Vec<u64> = pair.boundary_counts().iter().map(|(_, c)| *c).collect();
        let mut sorted = counts.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 1, 2, 2]);

        assert!(phi(&ctx, &w, &[]).is_err());
        assert!(phi(&ctx, &w, &[e.clone(), e]).is_err());
    }

    #[test]
    fn phi_of_lattice_box() {
        let ctx = GroupContext::zd(2).unwrap();
        let w = ctx.standard_symmetric().weighted(&ctx).unwrap();
        for n in [2i64, 3, 5] {
            let mut f = Vec::new();
            for x in 0..n {
                for y in 0..n {
                    f.push(ctx.vector_element(vec![x, y]).unwrap());
                }
            }
            let cand = phi(&ctx, &w, &f).unwrap();
            // Each of the 4 directions pushes one side of the box out.
            assert_eq!(*cand.phi(), from_frac(1, n));
        }
    }

    #[test]
    fn right_translation_preserves_phi() {
        let ctx = GroupContext::free(2).unwrap();
        let w = ctx.standard_symmetric().weighted(&ctx).unwrap();
        let e = ctx.identity();
        let a = ctx.generator(0);
        let b = ctx.generator(1);
        let f = vec![e, a.clone(), ctx.mul(&a, &a).unwrap(), b.clone()];
        let base = phi(&ctx, &w, &f).unwrap();
        for g in [&a, &b, &ctx.inv(&b).unwrap()] {
            let translated: Vec<GroupElement> =
                f.iter().map(|x| ctx.mul(x, g).unwrap()).collect();
            let cand = phi(&ctx, &w, &translated).unwrap();
            assert_eq!(cand.phi(), base.phi());
        }
    }

    #[test]
    fn exhaustive_tree_minima_match_subtree_formula() {
        let (_, w, ball) = free2_setup(6);
        let out = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 6,
                include_disconnected: false,
            },
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(out.provenance, Provenance::Exact);
        for m in &out.per_size {
            assert_eq!(m.phi, tree_subtree_phi(2, m.size as u64), "size {}", m.size);
        }
        assert_eq!(out.best.size(), 6);
        assert_eq!(*out.best.phi(), tree_subtree_phi(2, 6));
    }

    /// Rooted subtree counts of the 4-regular tree via the generating
    /// function T = x B^4, B = 1 + x B^3, independently of the search.
    fn rooted_subtree_counts(up_to: usize) -> Vec<u64> {
        let n = up_to + 1;
        let mut b = vec![0u64; n];
        b[0] = 1;
        for _ in 0..n {
            let mut b3 = vec![0u64; n];
            for i in 0..n {
                for j in 0..n - i {
                    for k in 0..n - i - j {
                        b3[i + j + k] += b[i] * b[j] * b[k];
                    }
                }
            }
            let mut nb = vec![0u64; n];
            nb[0] = 1;
            for i in 0..n - 1 {
                nb[i + 1] += b3[i];
            }
            b = nb;
        }
        // B^4 by two squarings.
        let sq = |p: &[u64]| {
            let mut out = vec![0u64; n];
            for i in 0..n {
                for j in 0..n - i {
                    out[i + j] += p[i] * p[j];
                }
            }
            out
        };
        let b2 = sq(&b);
        let b4 = sq(&b2);
        let mut t = vec![0u64; n];
        for i in 0..n - 1 {
            t[i + 1] = b4[i];
        }
        t
    }

    #[test]
    fn connected_enumeration_counts_match_generating_function() {
        let (_, w, ball) = free2_setup(6);
        let counts = rooted_subtree_counts(6);
        assert_eq!(&counts[1..=6], &[1, 4, 18, 88, 455, 2448]);
        let out = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 6,
                include_disconnected: false,
            },
            &Limits::default(),
        )
        .unwrap();
        let expected: u64 = counts[1..=6].iter().sum();
        assert_eq!(out.explored, expected);
    }

    /// Brute force over all subsets of complete vertices containing the
    /// center, filtered by connectivity, compared set-for-set.
    #[test]
    fn connected_enumeration_matches_brute_force() {
        let ctx = GroupContext::zd(2).unwrap();
        let s = ctx.standard_symmetric();
        let w = s.weighted(&ctx).unwrap();
        let ball = build_ball(&ctx, &s, 3, &Limits::default()).unwrap();
        let g = ball.graph();
        let complete: Vec<u32> =
            (0..g.vertex_count() as u32).filter(|&v| g.is_complete(v)).collect();
        assert_eq!(complete.len(), 13);

        let is_connected = |set: &[u32]| {
            let mut seen = vec![false; g.vertex_count()];
            let mut queue = vec![set[0]];
            seen[set[0] as usize] = true;
            let members: std::collections::HashSet<u32> = set.iter().copied().collect();
            let mut reached = 0;
            while let Some(x) = queue.pop() {
                reached += 1;
                for u in g.distinct_neighbors(x) {
                    if members.contains(&u) && !seen[u as usize] {
                        seen[u as usize] = true;
                        queue.push(u);
                    }
                }
            }
            reached == set.len()
        };

        let mut brute: Vec<Vec<u32>> = Vec::new();
        let rest: Vec<u32> = complete.iter().copied().filter(|&v| v != 0).collect();
        for mask in 0..(1u32 << rest.len()) {
            if mask.count_ones() >= 4 {
                continue;
            }
            let mut set = vec![0u32];
            for (i, &v) in rest.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    set.push(v);
                }
            }
            set.sort_unstable();
            if is_connected(&set) {
                brute.push(set);
            }
        }
        brute.sort();

        // Re-run the library enumeration, collecting visited sets.
        let weights = SlotWeights::resolve(&ball, &w).unwrap();
        let completeness: Vec<bool> =
            (0..g.vertex_count() as u32).map(|v| g.is_complete(v)).collect();
        let mut per_size: Vec<Option<Best>> = vec![None; 5];
        let mut explored = 0u64;
        let mut members = vec![false; g.vertex_count()];
        let mut seen = vec![false; g.vertex_count()];
        let mut stack = vec![0u32];
        members[0] = true;
        seen[0] = true;
        let ext: Vec<u32> = {
            let mut nbrs = g.distinct_neighbors(0);
            nbrs.retain(|&u| completeness[u as usize]);
            for &u in &nbrs {
                seen[u as usize] = true;
            }
            nbrs
        };
        extend_connected(
            g,
            &weights,
            &completeness,
            4,
            &mut stack,
            ext,
            &mut members,
            &mut seen,
            &mut per_size,
            &mut explored,
            &Limits::default(),
        )
        .unwrap();
        // Sizes 1..=4 of brute force (mask < 4 ones plus center = sizes 1..4).
        assert_eq!(explored, brute.len() as u64);
    }

    #[test]
    fn exhaustive_range_and_budget_errors() {
        let (_, w, ball) = free2_setup(3);
        let err = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 4,
                include_disconnected: false,
            },
            &Limits::default(),
        );
        assert!(matches!(err, Err(Error::Range(_))));

        let err = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 12,
                include_disconnected: false,
            },
            &Limits::default(),
        );
        assert!(matches!(err, Err(Error::Budget { .. })));

        let limits = Limits {
            max_enumerated_sets: 10,
            ..Limits::default()
        };
        let err = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 3,
                include_disconnected: false,
            },
            &limits,
        );
        assert!(matches!(err, Err(Error::Budget { .. })));
    }

    #[test]
    fn disconnected_mode_agrees_with_connected_on_trees() {
        // On a tree, disconnected sets are never strictly better at small
        // sizes, so the minima agree where both search the same sizes.
        let (_, w, ball) = free2_setup(4);
        let conn = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 3,
                include_disconnected: false,
            },
            &Limits::default(),
        )
        .unwrap();
        let all = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: 3,
                include_disconnected: true,
            },
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(conn.best.phi(), all.best.phi());
        assert!(all.explored > conn.explored);
    }

    #[test]
    fn anneal_finds_lattice_boxes() {
        let ctx = GroupContext::zd(2).unwrap();
        let s = ctx.standard_symmetric();
        let w = s.weighted(&ctx).unwrap();
        let ball = build_ball(&ctx, &s, 20, &Limits::default()).unwrap();
        let out = folner_search(
            &ball,
            &w,
            SearchMode::Anneal {
                budget: 100_000,
                seed: 7,
                chains: 4,
            },
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(out.provenance, Provenance::Heuristic);
        assert!(
            out.best.phi() <= &from_frac(15, 100),
            "phi = {}",
            rational::to_f64(out.best.phi())
        );

        // Deterministic: same seed, same outcome.
        let again = folner_search(
            &ball,
            &w,
            SearchMode::Anneal {
                budget: 100_000,
                seed: 7,
                chains: 4,
            },
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(out.best.set(), again.best.set());
    }

    #[test]
    fn mohar_transfer_directions() {
        let size = BigInt::from(4);
        // Exact rho for free(2).
        let rho = 3f64.sqrt() / 2.0;
        let hb = mohar_bounds(Some(rho), Some(rho), true, &size).unwrap();
        let lo = hb.lower.unwrap();
        let hi = hb.upper.unwrap();
        assert_eq!(lo.provenance, HProvenance::MoharFromExactRho);
        assert_eq!(hi.provenance, HProvenance::MoharFromRhoLower);
        // (1 - sqrt(3)/2) * 4/3 and sqrt(1 - 3/4) = 1/2.
        assert!((lo.value - (1.0 - rho) * 4.0 / 3.0).abs() < 1e-15);
        assert!((hi.value - 0.5).abs() < 1e-15);
        // The tree's true h = 1/2 sits between them.
        assert!(lo.value <= 0.5 && 0.5 <= hi.value);

        // rho = 0 clamps the lower bound to 1.
        let hb = mohar_bounds(None, Some(0.0), false, &size).unwrap();
        assert_eq!(hb.lower.unwrap().value, 1.0);

        assert!(mohar_bounds(Some(1.5), None, false, &size).is_err());
        assert!(mohar_bounds(None, Some(0.5), false, &BigInt::from(1)).is_err());
        // Inconsistent pair: rho_lower = 1 forces h = 0, rho_upper = 0 forces h = 1.
        assert!(mohar_bounds(Some(1.0), Some(0.0), false, &size).is_err());
    }

    #[test]
    fn criterion_strictness_and_provenance() {
        let at = criterion_check(CONDUCTANCE_THRESHOLD, Provenance::Exact);
        assert!(!at.passed);
        let above = criterion_check(0.7072, Provenance::CertifiedBound);
        assert!(above.passed && above.certified);
        let heuristic = criterion_check(0.9, Provenance::Heuristic);
        assert!(heuristic.passed && !heuristic.certified);

        assert!(!criterion_check_exact(&from_frac(1, 2)));
        assert!(!criterion_check_exact(&from_frac(7071, 10000)));
        assert!(criterion_check_exact(&from_frac(7072, 10000)));
        assert!(criterion_check_exact(&from_int(1)));
    }

    #[test]
    fn power_search_finds_n9_for_free2() {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        let rho = 3f64.sqrt() / 2.0;
        let out = witness_power_search(&ctx, &s, rho, 12).unwrap();
        assert_eq!(out.found, Some(9));
        assert_eq!(out.rows.len(), 9);
        let last = out.rows.last().unwrap();
        assert!((last.h_lower - 0.72598692).abs() < 1e-7);
        assert!(!out.rows[7].passed);
        assert!((out.rows[7].h_lower - 0.68360418).abs() < 1e-7);

        // Too-short ladders report honestly.
        let short = witness_power_search(&ctx, &s, rho, 5).unwrap();
        assert_eq!(short.found, None);
        assert_eq!(short.rows.len(), 5);

        let asym = GeneratorMultiset::new(vec![ctx.generator(0), ctx.generator(1)]);
        assert!(matches!(
            witness_power_search(&ctx, &asym, rho, 5),
            Err(Error::MethodNotApplicable(_))
        ));
        assert!(witness_power_search(&ctx, &s, 0.0, 5).is_err());
    }

    #[test]
    fn tree_oracle_values() {
        assert_eq!(tree_h_exact(2).unwrap(), from_frac(1, 2));
        assert_eq!(tree_subtree_phi(2, 1), rational::one());
        assert_eq!(tree_subtree_phi(2, 2), from_frac(3, 4));
        assert_eq!(tree_subtree_phi(2, 9), from_frac(20, 36));
        assert!(tree_h_exact(0).is_err());
    }
}
