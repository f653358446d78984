//! Finite radius-R balls of Cayley graphs and Schreier graphs.
//!
//! Both graph kinds share a [`BallGraph`] core: an indexed multigraph with
//! one out-slot per (vertex, multiset entry). Edges follow the convention
//! that entry `s` connects `x` to `s·x`, so the edge boundary of a vertex
//! set F is exactly the multiset boundary `sF \ F` used by the conductance
//! functional.
//!
//! Construction is deterministic: vertices are discovered breadth-first and
//! each level is sorted by element normal form before indices are assigned,
//! so rebuilding the same ball is bit-identical.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::group::parse::format_group_spec;
use crate::group::{GeneratorMultiset, GroupContext, GroupElement};
use crate::Limits;

/// Sentinel for "the neighbor is outside the ball".
pub const NO_VERTEX: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UndirectedEdge {
    pub u: u32,
    pub v: u32,
    /// Index of the multiset entry this edge was emitted for.
    pub entry: u32,
}

/// Adjacency core shared by Cayley and Schreier balls.
#[derive(Debug, Clone)]
pub struct BallGraph {
    radius: usize,
    entry_count: usize,
    dist: Vec<u32>,
    /// `level_starts[r]..level_starts[r+1]` indexes the distance-r vertices.
    level_starts: Vec<u32>,
    /// Flattened `vertex * entry_count + j` -> index of `s_j · v`.
    out_slots: Vec<u32>,
    /// Flattened `vertex * entry_count + j` -> index of `s_j^{-1} · v`.
    /// Empty when the construction could not certify invertibility.
    in_slots: Vec<u32>,
    /// One edge per unordered slot pair, plus one edge per loop slot.
    /// Present only when the multiset is symmetric.
    undirected: Option<Vec<UndirectedEdge>>,
}

impl BallGraph {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn vertex_count(&self) -> usize {
        self.dist.len()
    }

    pub fn dist(&self, v: u32) -> u32 {
        self.dist[v as usize]
    }

    /// Index of `s_j · v`, or `NO_VERTEX`.
    pub fn out(&self, v: u32, j: usize) -> u32 {
        self.out_slots[v as usize * self.entry_count + j]
    }

    /// Index of `s_j^{-1} · v`, or `NO_VERTEX`.
    pub fn incoming(&self, v: u32, j: usize) -> u32 {
        self.in_slots[v as usize * self.entry_count + j]
    }

    pub fn has_incoming_slots(&self) -> bool {
        !self.in_slots.is_empty()
    }

    /// Vertices at distance exactly r. Empty when the graph saturated
    /// before r; an error when r exceeds the built radius.
    pub fn sphere(&self, r: usize) -> Result<std::ops::Range<u32>> {
        if r > self.radius {
            return Err(Error::Range(format!(
                "sphere radius {r} exceeds ball radius {}",
                self.radius
            )));
        }
        let lo = self
            .level_starts
            .get(r)
            .copied()
            .unwrap_or(self.dist.len() as u32);
        let hi = self
            .level_starts
            .get(r + 1)
            .copied()
            .unwrap_or(self.dist.len() as u32);
        Ok(lo..hi)
    }

    /// A vertex is complete when every neighbor slot landed inside the ball;
    /// incomplete vertices are the truncation frontier.
    pub fn is_complete(&self, v: u32) -> bool {
        let base = v as usize * self.entry_count;
        self.out_slots[base..base + self.entry_count]
            .iter()
            .all(|&w| w != NO_VERTEX)
    }

    /// All complete vertices; the safe universe for exact boundary counts.
    pub fn complete_vertices(&self) -> Vec<u32> {
        (0..self.vertex_count() as u32)
            .filter(|&v| self.is_complete(v))
            .collect()
    }

    pub fn undirected_edges(&self) -> Result<&[UndirectedEdge]> {
        self.undirected.as_deref().ok_or_else(|| {
            Error::MethodNotApplicable(
                "undirected edge list needs a symmetric multiset (symmetrize first)".into(),
            )
        })
    }

    /// Distinct neighbor indices of v (no duplicates, no self).
    pub fn distinct_neighbors(&self, v: u32) -> Vec<u32> {
        let mut nbrs: Vec<u32> = (0..self.entry_count)
            .map(|j| self.out(v, j))
            .filter(|&w| w != NO_VERTEX && w != v)
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        nbrs
    }
}

/// Breadth-first closure of `start` under the entry maps, level-sorted.
fn grow_levels<P, F>(start: P, entry_count: usize, radius: usize, limits: &Limits, step: F) -> Result<(Vec<P>, HashMap<P, u32>, Vec<u32>)>
where
    P: Clone + Eq + Hash + Ord,
    F: Fn(usize, &P) -> Result<P>,
{
    let mut points = vec![start.clone()];
    let mut index: HashMap<P, u32> = HashMap::new();
    index.insert(start, 0);
    let mut level_starts = vec![0u32, 1];
    let mut frontier = 0usize..1;

    for _ in 0..radius {
        let mut next: Vec<P> = Vec::new();
        for i in frontier.clone() {
            let p = points[i].clone();
            for j in 0..entry_count {
                let q = step(j, &p)?;
                if !index.contains_key(&q) {
                    // Mark immediately so duplicates within the level are
                    // cheap; indices are assigned after sorting.
                    index.insert(q.clone(), u32::MAX);
                    next.push(q);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort();
        if points.len() + next.len() > limits.max_ball_vertices {
            return Err(Error::Budget {
                what: "ball vertices",
                requested: (points.len() + next.len()) as u64,
                limit: limits.max_ball_vertices as u64,
            });
        }
        let start_idx = points.len();
        for (off, q) in next.iter().enumerate() {
            *index.get_mut(q).unwrap() = (start_idx + off) as u32;
        }
        frontier = start_idx..start_idx + next.len();
        points.extend(next);
        level_starts.push(points.len() as u32);
    }
    Ok((points, index, level_starts))
}

fn dist_from_levels(level_starts: &[u32], n: usize) -> Vec<u32> {
    let mut dist = vec![0u32; n];
    for r in 0..level_starts.len() - 1 {
        for i in level_starts[r]..level_starts[r + 1] {
            dist[i as usize] = r as u32;
        }
    }
    dist
}

/// One undirected edge per unordered pair of mutually inverse slots, one
/// per loop slot. Valid only when slots pair up, i.e. symmetric multisets.
fn undirected_from_slots(out_slots: &[u32], entry_count: usize, n: usize) -> Vec<UndirectedEdge> {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for j in 0..entry_count {
            let v = out_slots[u as usize * entry_count + j];
            if v == NO_VERTEX {
                continue;
            }
            if u < v || u == v {
                edges.push(UndirectedEdge {
                    u,
                    v,
                    entry: j as u32,
                });
            }
        }
    }
    edges
}

/// Radius-R ball of the Cayley multigraph of (ctx, S) around a center.
#[derive(Debug, Clone)]
pub struct CayleyBall {
    ctx: GroupContext,
    multiset: GeneratorMultiset,
    graph: BallGraph,
    vertices: Vec<GroupElement>,
    index: HashMap<GroupElement, u32>,
    center: GroupElement,
}

impl CayleyBall {
    pub fn ctx(&self) -> &GroupContext {
        &self.ctx
    }

    pub fn multiset(&self) -> &GeneratorMultiset {
        &self.multiset
    }

    pub fn graph(&self) -> &BallGraph {
        &self.graph
    }

    pub fn center(&self) -> &GroupElement {
        &self.center
    }

    pub fn vertex_element(&self, i: u32) -> &GroupElement {
        &self.vertices[i as usize]
    }

    pub fn vertex_index(&self, g: &GroupElement) -> Option<u32> {
        self.index.get(g).copied()
    }

    /// First entry index whose element equals g, if any.
    pub fn entry_of(&self, g: &GroupElement) -> Option<usize> {
        self.multiset.entries().iter().position(|s| s == g)
    }

    /// Edge-list dump: `u v entry_index` lines under a fixed header.
    pub fn dump(&self) -> Result<String> {
        let edges = self.graph.undirected_edges()?;
        let mut out = format!(
            "# ball group={} R={} |S|={}\n",
            format_group_spec(&self.ctx),
            self.graph.radius(),
            self.multiset.size()
        );
        for e in edges {
            out.push_str(&format!("{} {} {}\n", e.u, e.v, e.entry));
        }
        Ok(out)
    }
}

/// BFS-complete ball around the identity (center = identity element).
pub fn build_ball(
    ctx: &GroupContext,
    multiset: &GeneratorMultiset,
    radius: usize,
    limits: &Limits,
) -> Result<CayleyBall> {
    let entries = multiset.entries();
    for g in entries {
        ctx.validate(g)?;
    }
    let inv_entries: Vec<GroupElement> = entries
        .iter()
        .map(|g| ctx.inv(g))
        .collect::<Result<_>>()?;

    let center = ctx.identity();
    let (vertices, index, level_starts) =
        grow_levels(center.clone(), entries.len(), radius, limits, |j, g| {
            ctx.mul(&entries[j], g)
        })?;

    let n = vertices.len();
    let e = entries.len();
    let mut out_slots = vec![NO_VERTEX; n * e];
    let mut in_slots = vec![NO_VERTEX; n * e];
    for (i, g) in vertices.iter().enumerate() {
        for j in 0..e {
            let fwd = ctx.mul(&entries[j], g)?;
            if let Some(&t) = index.get(&fwd) {
                out_slots[i * e + j] = t;
            }
            let bwd = ctx.mul(&inv_entries[j], g)?;
            if let Some(&t) = index.get(&bwd) {
                in_slots[i * e + j] = t;
            }
        }
    }

    let undirected = if multiset.is_symmetric(ctx)? {
        Some(undirected_from_slots(&out_slots, e, n))
    } else {
        None
    };

    let graph = BallGraph {
        radius,
        entry_count: e,
        dist: dist_from_levels(&level_starts, n),
        level_starts,
        out_slots,
        in_slots,
        undirected,
    };
    Ok(CayleyBall {
        ctx: ctx.clone(),
        multiset: multiset.clone(),
        graph,
        vertices,
        index,
        center,
    })
}

/// Orbit ball of a group action: vertices are action points, edges follow
/// the supplied per-entry point maps.
#[derive(Debug, Clone)]
pub struct SchreierBall<P> {
    multiset: GeneratorMultiset,
    graph: BallGraph,
    points: Vec<P>,
    index: HashMap<P, u32>,
}

impl<P: Clone + Eq + Hash + Ord> SchreierBall<P> {
    pub fn graph(&self) -> &BallGraph {
        &self.graph
    }

    pub fn multiset(&self) -> &GeneratorMultiset {
        &self.multiset
    }

    pub fn point(&self, i: u32) -> &P {
        &self.points[i as usize]
    }

    pub fn point_index(&self, p: &P) -> Option<u32> {
        self.index.get(p).copied()
    }
}

/// Builds the orbit ball of `basepoint` under `action(entry_index, point)`.
///
/// When the multiset is symmetric, each entry's action is checked against
/// its inverse entry on every visited point; a mismatch means the supplied
/// maps do not define an action by bijections.
pub fn build_schreier_ball<P, A>(
    ctx: &GroupContext,
    multiset: &GeneratorMultiset,
    action: A,
    basepoint: P,
    radius: usize,
    limits: &Limits,
) -> Result<SchreierBall<P>>
where
    P: Clone + Eq + Hash + Ord,
    A: Fn(usize, &P) -> P,
{
    let entries = multiset.entries();
    for g in entries {
        ctx.validate(g)?;
    }
    let (points, index, level_starts) =
        grow_levels(basepoint, entries.len(), radius, limits, |j, p| {
            Ok(action(j, p))
        })?;

    let n = points.len();
    let e = entries.len();
    let mut out_slots = vec![NO_VERTEX; n * e];
    for (i, p) in points.iter().enumerate() {
        for j in 0..e {
            let q = action(j, p);
            if let Some(&t) = index.get(&q) {
                out_slots[i * e + j] = t;
            }
        }
    }

    let symmetric = multiset.is_symmetric(ctx)?;
    let mut in_slots = Vec::new();
    if symmetric {
        // Pair each entry with an inverse entry and verify on every point
        // that the pair composes to the identity map.
        let mut inverse_entry = vec![usize::MAX; e];
        for j in 0..e {
            let inv = ctx.inv(&entries[j])?;
            inverse_entry[j] = entries
                .iter()
                .position(|s| *s == inv)
                .expect("symmetric multiset contains every inverse");
        }
        for (i, p) in points.iter().enumerate() {
            for j in 0..e {
                let q = action(j, p);
                if action(inverse_entry[j], &q) != *p {
                    return Err(Error::Action(format!(
                        "entry {j} is not inverted by its inverse entry on a visited point \
                         (vertex index {i})"
                    )));
                }
            }
        }
        in_slots = vec![NO_VERTEX; n * e];
        for (i, p) in points.iter().enumerate() {
            for j in 0..e {
                let q = action(inverse_entry[j], p);
                if let Some(&t) = index.get(&q) {
                    in_slots[i * e + j] = t;
                }
            }
        }
    }

    let undirected = symmetric.then(|| undirected_from_slots(&out_slots, e, n));
    let graph = BallGraph {
        radius,
        entry_count: e,
        dist: dist_from_levels(&level_starts, n),
        level_starts,
        out_slots,
        in_slots,
        undirected,
    };
    Ok(SchreierBall {
        multiset: multiset.clone(),
        graph,
        points,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free2_ball(r: usize) -> CayleyBall {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        build_ball(&ctx, &s, r, &Limits::default()).unwrap()
    }

    /// 1 + 2k((2k-1)^R - 1)/(2k-2) vertices in the free(k) ball.
    fn tree_ball_size(k: usize, r: usize) -> usize {
        let b = 2 * k - 1;
        1 + 2 * k * (b.pow(r as u32) - 1) / (2 * k - 2)
    }

    #[test]
    fn free2_ball_counts() {
        let ball = free2_ball(2);
        assert_eq!(ball.graph().vertex_count(), 17);
        assert_eq!(ball.graph().sphere(2).unwrap().len(), 12);
        assert_eq!(ball.graph().sphere(0).unwrap().len(), 1);
        assert!(ball.graph().sphere(3).is_err());

        for r in 0..=6 {
            let ball = free2_ball(r);
            assert_eq!(ball.graph().vertex_count(), tree_ball_size(2, r));
        }
        let ctx = GroupContext::free(3).unwrap();
        let s = ctx.standard_symmetric();
        for r in 0..=4 {
            let ball = build_ball(&ctx, &s, r, &Limits::default()).unwrap();
            assert_eq!(ball.graph().vertex_count(), tree_ball_size(3, r));
        }
    }

    #[test]
    fn radius_zero_ball() {
        let ball = free2_ball(0);
        assert_eq!(ball.graph().vertex_count(), 1);
        assert_eq!(ball.graph().undirected_edges().unwrap().len(), 0);
        assert!(!ball.graph().is_complete(0));
    }

    #[test]
    fn zd2_ball_counts() {
        let ctx = GroupContext::zd(2).unwrap();
        let s = ctx.standard_symmetric();
        let ball = build_ball(&ctx, &s, 1, &Limits::default()).unwrap();
        assert_eq!(ball.graph().vertex_count(), 5);
        assert_eq!(ball.graph().sphere(1).unwrap().len(), 4);
        assert_eq!(ball.graph().undirected_edges().unwrap().len(), 4);
    }

    #[test]
    fn interior_slot_invariant() {
        let ball = free2_ball(3);
        let g = ball.graph();
        for v in 0..g.vertex_count() as u32 {
            let complete = (0..4).all(|j| g.out(v, j) != NO_VERTEX);
            assert_eq!(complete, g.dist(v) < 3);
            assert_eq!(g.is_complete(v), complete);
        }
        // Tree ball edge count: vertices - 1.
        assert_eq!(
            g.undirected_edges().unwrap().len(),
            g.vertex_count() - 1
        );
    }

    #[test]
    fn out_and_incoming_agree() {
        let ball = free2_ball(3);
        let g = ball.graph();
        for v in 0..g.vertex_count() as u32 {
            for j in 0..4 {
                let w = g.out(v, j);
                if w != NO_VERTEX {
                    assert_eq!(g.incoming(w, j), v);
                }
            }
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let a = free2_ball(4);
        let b = free2_ball(4);
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.graph.out_slots, b.graph.out_slots);
        assert_eq!(
            a.graph.undirected.as_ref().unwrap(),
            b.graph.undirected.as_ref().unwrap()
        );
        assert_eq!(a.dump().unwrap(), b.dump().unwrap());
    }

    #[test]
    fn ball_budget_trips() {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        let limits = Limits {
            max_ball_vertices: 100,
            ..Limits::default()
        };
        assert!(matches!(
            build_ball(&ctx, &s, 5, &limits),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn saturated_ball_has_empty_outer_spheres() {
        let ctx = GroupContext::fpc(vec![3]).unwrap();
        let s = ctx.standard_symmetric();
        let ball = build_ball(&ctx, &s, 5, &Limits::default()).unwrap();
        assert_eq!(ball.graph().vertex_count(), 3);
        assert_eq!(ball.graph().sphere(1).unwrap().len(), 2);
        assert_eq!(ball.graph().sphere(3).unwrap().len(), 0);
        // Saturated means nothing is truncated.
        assert!((0..3).all(|v| ball.graph().is_complete(v)));
    }

    #[test]
    fn loops_from_identity_entries() {
        let ctx = GroupContext::zd(1).unwrap();
        let e = ctx.identity();
        let s = GeneratorMultiset::new(vec![
            ctx.generator(0),
            ctx.inv(&ctx.generator(0)).unwrap(),
            e.clone(),
            e,
        ]);
        let ball = build_ball(&ctx, &s, 1, &Limits::default()).unwrap();
        let loops: Vec<_> = ball
            .graph()
            .undirected_edges()
            .unwrap()
            .iter()
            .filter(|e| e.u == e.v)
            .collect();
        // Two identity entries -> two loop slots at each of 3 vertices.
        assert_eq!(loops.len(), 6);
    }

    #[test]
    fn schreier_translation_action_on_z() {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        // a shifts, b fixes: entries are (a, b, a^-1, b^-1).
        let action = |j: usize, x: &i64| match j {
            0 => x + 1,
            2 => x - 1,
            _ => *x,
        };
        let ball = build_schreier_ball(&ctx, &s, action, 0i64, 2, &Limits::default()).unwrap();
        assert_eq!(ball.graph().vertex_count(), 5);
        let mut pts: Vec<i64> = ball.points.clone();
        pts.sort();
        assert_eq!(pts, vec![-2, -1, 0, 1, 2]);
        // Interior points keep all 4 slots; frontier points lose exactly
        // the outward shift, the b-loops stay.
        for v in 0..5u32 {
            let x = *ball.point(v);
            for j in 0..4 {
                let present = ball.graph().out(v, j) != NO_VERTEX;
                let target = action(j, &x);
                assert_eq!(present, target.abs() <= 2, "slot {v}/{j}");
            }
        }
        let loops = ball
            .graph()
            .undirected_edges()
            .unwrap()
            .iter()
            .filter(|e| e.u == e.v)
            .count();
        // b and b^-1 both loop at each of 5 points.
        assert_eq!(loops, 10);
    }

    #[test]
    fn schreier_trivial_action() {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        let ball =
            build_schreier_ball(&ctx, &s, |_, _: &u8| 0u8, 0u8, 3, &Limits::default()).unwrap();
        assert_eq!(ball.graph().vertex_count(), 1);
        assert!(ball
            .graph()
            .undirected_edges()
            .unwrap()
            .iter()
            .all(|e| e.u == e.v));
    }

    #[test]
    fn schreier_rejects_non_invertible_action() {
        let ctx = GroupContext::free(1).unwrap();
        let s = ctx.standard_symmetric();
        // "Increment, saturating at 2" is not a bijection on {0,1,2}.
        let action = |j: usize, x: &u8| match j {
            0 => (*x + 1).min(2),
            _ => x.saturating_sub(1),
        };
        let err = build_schreier_ball(&ctx, &s, action, 0u8, 3, &Limits::default());
        assert!(matches!(err, Err(Error::Action(_))));
    }

    #[test]
    fn dump_format() {
        let ball = free2_ball(1);
        let dump = ball.dump().unwrap();
        let mut lines = dump.lines();
        assert_eq!(lines.next().unwrap(), "# ball group=free:2 R=1 |S|=4");
        // 4 tree edges from the center.
        assert_eq!(lines.count(), 4);
    }
}
