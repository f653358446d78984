//! Bernoulli bond percolation on finite balls.
//!
//! "Belongs to an infinite cluster" is proxied by "its cluster touches the
//! outer sphere"; a cluster enters boundary statistics only when it also
//! has at least two vertices, so the all-closed configuration reports zero
//! boundary clusters even though every rim vertex technically sits on the
//! sphere. The truncation bias of this proxy is measured against the exact
//! tree oracle rather than assumed away.
//!
//! Randomness is keyed: the variate of edge e in sample s is a pure
//! function of (seed, s, e), so results are independent of evaluation
//! order and thread count, and reusing one variate per edge across
//! different p values couples the configurations monotonically (the open
//! set at p is contained in the open set at p' >= p, edge by edge).

use num_bigint::BigInt;
use num_traits::{Pow, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::cayley::CayleyBall;
use crate::error::{Error, Result};
use crate::isoperimetry::HBounds;
use crate::rational::{self, Ratio};
use crate::rng;
use crate::Provenance;

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `samples` at level `z`.
pub fn wilson(successes: u64, samples: u64, z: f64) -> (f64, f64) {
    assert!(samples > 0 && successes <= samples);
    let n = samples as f64;
    let p_hat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let margin = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The interval must contain p_hat; pin the degenerate endpoints so
    // f64 rounding cannot pull them inside 0 or 1.
    let lo = if successes == 0 {
        0.0
    } else {
        (center - margin).max(0.0)
    };
    let hi = if successes == samples {
        1.0
    } else {
        (center + margin).min(1.0)
    };
    (lo, hi)
}

/// Sampling parameters shared by the Monte Carlo estimators.
#[derive(Debug, Clone)]
pub struct PercolationConfig {
    pub p: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Sphere treated as "infinity"; defaults to the ball radius.
    pub boundary_radius: Option<usize>,
}

impl PercolationConfig {
    pub fn new(p: f64, n_samples: u64, seed: u64) -> Self {
        PercolationConfig {
            p,
            n_samples,
            seed,
            boundary_radius: None,
        }
    }

    fn checked_boundary(&self, ball: &CayleyBall) -> Result<u32> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Range(format!("p = {} is outside [0, 1]", self.p)));
        }
        if self.n_samples == 0 {
            return Err(Error::Range("need at least one sample".into()));
        }
        let radius = self.boundary_radius.unwrap_or(ball.graph().radius());
        if radius > ball.graph().radius() {
            return Err(Error::Range(format!(
                "boundary radius {radius} exceeds ball radius {}",
                ball.graph().radius()
            )));
        }
        Ok(radius as u32)
    }
}

/// Whether edge `edge` of sample `sample` is open at parameter `p`.
///
/// All estimators share this gate, so configurations drawn at different
/// p but the same (seed, sample) are coupled: raising p only opens edges.
#[inline]
pub fn edge_open(seed: u64, sample: u64, edge: usize, p: f64) -> bool {
    rng::keyed_unit(seed, &[sample, edge as u64]) < p
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Cluster census of one sampled configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterStats {
    pub root_reaches_boundary: bool,
    /// All cluster sizes, ascending; they sum to the vertex count.
    pub cluster_sizes: Vec<u32>,
    /// Distinct clusters of size >= 2 meeting the boundary sphere.
    pub boundary_clusters: u32,
    pub open_edges: u64,
}

/// One exact draw of the configuration keyed by (seed, sample).
pub fn percolate_once(ball: &CayleyBall, p: f64, seed: u64, sample: u64) -> Result<ClusterStats> {
    let cfg = PercolationConfig::new(p, 1, seed);
    let boundary = cfg.checked_boundary(ball)?;
    let graph = ball.graph();
    graph.undirected_edges()?;
    let mut uf = DisjointSet::new(graph.vertex_count());
    sample_clusters(ball, &cfg, boundary, sample, &mut uf)
}

fn sample_clusters(
    ball: &CayleyBall,
    cfg: &PercolationConfig,
    boundary: u32,
    sample: u64,
    uf: &mut DisjointSet,
) -> Result<ClusterStats> {
    let graph = ball.graph();
    let edges = graph.undirected_edges()?;
    let mut open_edges = 0u64;
    for (e, edge) in edges.iter().enumerate() {
        if edge_open(cfg.seed, sample, e, cfg.p) {
            open_edges += 1;
            uf.union(edge.u, edge.v);
        }
    }

    let mut cluster_sizes: Vec<u32> = Vec::new();
    for v in 0..graph.vertex_count() as u32 {
        if uf.find(v) == v {
            cluster_sizes.push(uf.size[v as usize]);
        }
    }
    cluster_sizes.sort_unstable();

    let sphere = graph.sphere(boundary as usize)?;
    let mut boundary_roots: Vec<u32> = Vec::new();
    let root_cluster = uf.find(0);
    let mut root_reaches = boundary == 0;
    for v in sphere {
        let r = uf.find(v);
        if r == root_cluster {
            root_reaches = true;
        }
        if uf.size[r as usize] >= 2 {
            boundary_roots.push(r);
        }
    }
    boundary_roots.sort_unstable();
    boundary_roots.dedup();

    Ok(ClusterStats {
        root_reaches_boundary: root_reaches,
        cluster_sizes,
        boundary_clusters: boundary_roots.len() as u32,
        open_edges,
    })
}

/// Monte Carlo point estimate of theta with its confidence interval.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaEstimate {
    pub p: f64,
    pub theta: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_samples: u64,
    pub successes: u64,
    /// Mean boundary-cluster count; filled by the full-census estimator,
    /// absent from the reach-only fast path.
    pub boundary_clusters_mean: Option<f64>,
    pub provenance: Provenance,
}

/// Read-only adjacency in CSR form for the reach-only estimator; loop
/// edges are skipped (they never connect anything).
struct ReachArena<'a> {
    ball: &'a CayleyBall,
    boundary: u32,
    offsets: Vec<u32>,
    targets: Vec<(u32, u32)>,
}

struct ReachScratch {
    visited: Vec<u32>,
    queue: Vec<u32>,
    epoch: u32,
}

impl<'a> ReachArena<'a> {
    fn new(ball: &'a CayleyBall, boundary: u32) -> Result<Self> {
        let graph = ball.graph();
        let edges = graph.undirected_edges()?;
        let n = graph.vertex_count();
        let mut degree = vec![0u32; n];
        for e in edges {
            if e.u != e.v {
                degree[e.u as usize] += 1;
                degree[e.v as usize] += 1;
            }
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut targets = vec![(0u32, 0u32); offsets[n] as usize];
        let mut cursor: Vec<u32> = offsets[..n].to_vec();
        for (id, e) in edges.iter().enumerate() {
            if e.u == e.v {
                continue;
            }
            targets[cursor[e.u as usize] as usize] = (e.v, id as u32);
            cursor[e.u as usize] += 1;
            targets[cursor[e.v as usize] as usize] = (e.u, id as u32);
            cursor[e.v as usize] += 1;
        }
        Ok(ReachArena {
            ball,
            boundary,
            offsets,
            targets,
        })
    }

    fn scratch(&self) -> ReachScratch {
        ReachScratch {
            visited: vec![0u32; self.ball.graph().vertex_count()],
            queue: Vec::new(),
            epoch: 0,
        }
    }

    /// BFS over open edges from the center, stopping at the first
    /// boundary-sphere vertex; only the center's cluster is ever touched.
    fn reaches(&self, p: f64, seed: u64, sample: u64, scratch: &mut ReachScratch) -> bool {
        let graph = self.ball.graph();
        if graph.dist(0) == self.boundary {
            return true;
        }
        scratch.epoch += 1;
        let epoch = scratch.epoch;
        scratch.queue.clear();
        scratch.queue.push(0);
        scratch.visited[0] = epoch;
        let mut head = 0;
        while head < scratch.queue.len() {
            let x = scratch.queue[head];
            head += 1;
            let lo = self.offsets[x as usize] as usize;
            let hi = self.offsets[x as usize + 1] as usize;
            for &(y, e) in &self.targets[lo..hi] {
                if scratch.visited[y as usize] == epoch
                    || !edge_open(seed, sample, e as usize, p)
                {
                    continue;
                }
                if graph.dist(y) == self.boundary {
                    return true;
                }
                scratch.visited[y as usize] = epoch;
                scratch.queue.push(y);
            }
        }
        false
    }
}

/// Fraction of samples whose center cluster reaches the boundary sphere,
/// with a Wilson 95% interval. Explores only the center's cluster per
/// sample, so it stays cheap well past the radii where full censuses are
/// affordable.
pub fn theta_hat(ball: &CayleyBall, p: f64, n_samples: u64, seed: u64) -> Result<ThetaEstimate> {
    theta_hat_with(ball, &PercolationConfig::new(p, n_samples, seed))
}

/// As [`theta_hat`], honoring `boundary_radius`.
pub fn theta_hat_with(ball: &CayleyBall, cfg: &PercolationConfig) -> Result<ThetaEstimate> {
    let boundary = cfg.checked_boundary(ball)?;
    let arena = ReachArena::new(ball, boundary)?;
    let successes: u64 = (0..cfg.n_samples)
        .into_par_iter()
        .map_init(
            || arena.scratch(),
            |scratch, s| u64::from(arena.reaches(cfg.p, cfg.seed, s, scratch)),
        )
        .sum();
    Ok(theta_row(cfg.p, successes, cfg.n_samples, None))
}

fn theta_row(p: f64, successes: u64, n: u64, boundary_mean: Option<f64>) -> ThetaEstimate {
    let (ci_lo, ci_hi) = wilson(successes, n, Z95);
    ThetaEstimate {
        p,
        theta: successes as f64 / n as f64,
        ci_lo,
        ci_hi,
        n_samples: n,
        successes,
        boundary_clusters_mean: boundary_mean,
        provenance: Provenance::MonteCarloCi,
    }
}

/// Full-census theta at each grid point, sharing edge variates across the
/// grid (coupled, so the estimated curve is monotone by construction).
/// Each row also carries the mean boundary-cluster count.
pub fn theta_curve(
    ball: &CayleyBall,
    ps: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<ThetaEstimate>> {
    let graph = ball.graph();
    graph.undirected_edges()?;
    let mut rows = Vec::with_capacity(ps.len());
    for &p in ps {
        let cfg = PercolationConfig::new(p, n_samples, seed);
        let boundary = cfg.checked_boundary(ball)?;
        let per_sample: Vec<(bool, u32)> = (0..n_samples)
            .into_par_iter()
            .map_init(
                || DisjointSet::new(graph.vertex_count()),
                |uf, s| {
                    uf.reset();
                    let stats = sample_clusters(ball, &cfg, boundary, s, uf)
                        .expect("validated upfront");
                    (stats.root_reaches_boundary, stats.boundary_clusters)
                },
            )
            .collect();
        let successes = per_sample.iter().filter(|(r, _)| *r).count() as u64;
        let cluster_sum: u64 = per_sample.iter().map(|&(_, c)| c as u64).sum();
        rows.push(theta_row(
            p,
            successes,
            n_samples,
            Some(cluster_sum as f64 / n_samples as f64),
        ));
    }
    Ok(rows)
}

/// Crossing of the estimated theta curve with a target level.
#[derive(Debug, Clone, Serialize)]
pub struct PcEstimate {
    pub p_c: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub tau: f64,
    pub n_samples: u64,
    pub iterations: u32,
    /// Every (p, theta-hat) pair evaluated, sorted by p.
    pub evaluations: Vec<(f64, f64)>,
    pub provenance: Provenance,
}

/// Bisection for theta-hat(p) = tau on coupled samples.
///
/// One variate per (sample, edge) is reused across every evaluated p, so
/// theta-hat is monotone in p sample by sample and bisection is sound;
/// a non-monotone evaluation trail is impossible and reported as an
/// internal invariant violation. The interval comes from re-bisecting at
/// tau -+ z * sqrt(tau(1-tau)/N), the normal-quantile band of the
/// estimator at the crossing.
pub fn pc_estimate(
    ball: &CayleyBall,
    tau: f64,
    n_samples: u64,
    seed: u64,
    iterations: u32,
) -> Result<PcEstimate> {
    if !(0.0 < tau && tau < 1.0) {
        return Err(Error::Range(format!("tau = {tau} is outside (0, 1)")));
    }
    if iterations == 0 {
        return Err(Error::Range("need at least one bisection iteration".into()));
    }
    let probe = PercolationConfig::new(0.5, n_samples, seed);
    let boundary = probe.checked_boundary(ball)?;
    let arena = ReachArena::new(ball, boundary)?;

    let theta_at = |p: f64| -> f64 {
        let successes: u64 = (0..n_samples)
            .into_par_iter()
            .map_init(
                || arena.scratch(),
                |scratch, s| u64::from(arena.reaches(p, seed, s, scratch)),
            )
            .sum();
        successes as f64 / n_samples as f64
    };

    let mut trail: Vec<(f64, f64)> = Vec::new();
    let mut bisect = |target: f64| -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..iterations {
            let mid = (lo + hi) / 2.0;
            let th = theta_at(mid);
            trail.push((mid, th));
            if th < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / 2.0
    };

    let half_width = Z95 * (tau * (1.0 - tau) / n_samples as f64).sqrt();
    let p_c = bisect(tau);
    let ci_lo = if tau - half_width <= 0.0 {
        0.0
    } else {
        bisect(tau - half_width)
    };
    let ci_hi = if tau + half_width >= 1.0 {
        1.0
    } else {
        bisect(tau + half_width)
    };

    trail.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    trail.dedup();
    if trail.windows(2).any(|w| w[0].1 > w[1].1) {
        return Err(Error::InternalInvariant(
            "coupled theta evaluations are not monotone in p".into(),
        ));
    }

    Ok(PcEstimate {
        p_c,
        ci_lo,
        ci_hi,
        tau,
        n_samples,
        iterations,
        evaluations: trail,
        provenance: Provenance::MonteCarloCi,
    })
}

/// Sampled distribution of the boundary-cluster count.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessProbe {
    pub p: f64,
    pub n_samples: u64,
    /// (boundary-cluster count, frequency), ascending by count.
    pub histogram: Vec<(u32, u64)>,
    pub mean: f64,
    /// Fraction of samples with two or more boundary clusters.
    pub multi_fraction: f64,
    /// Heuristic: a finite-volume proxy for cluster non-uniqueness, never
    /// part of a certificate.
    pub provenance: Provenance,
}

/// Histogram of how many distinct clusters meet the boundary sphere.
pub fn uniqueness_probe(
    ball: &CayleyBall,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> Result<UniquenessProbe> {
    let cfg = PercolationConfig::new(p, n_samples, seed);
    let boundary = cfg.checked_boundary(ball)?;
    let graph = ball.graph();
    graph.undirected_edges()?;
    let counts: Vec<u32> = (0..n_samples)
        .into_par_iter()
        .map_init(
            || DisjointSet::new(graph.vertex_count()),
            |uf, s| {
                uf.reset();
                sample_clusters(ball, &cfg, boundary, s, uf)
                    .expect("validated upfront")
                    .boundary_clusters
            },
        )
        .collect();
    let mut histogram: Vec<(u32, u64)> = Vec::new();
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    for c in sorted {
        match histogram.last_mut() {
            Some((v, f)) if *v == c => *f += 1,
            _ => histogram.push((c, 1)),
        }
    }
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n_samples as f64;
    let multi = counts.iter().filter(|&&c| c >= 2).count() as f64 / n_samples as f64;
    Ok(UniquenessProbe {
        p,
        n_samples,
        histogram,
        mean,
        multi_fraction: multi,
        provenance: Provenance::Heuristic,
    })
}

/// Exact reach probability on the (b+1)-regular tree truncated at radius
/// R, root degree d: u_1 = 1-p, u_{r+1} = 1 - p(1 - u_r^b),
/// theta_R = 1 - u_R^d. Exact rational arithmetic; the denominators grow
/// with roughly b-fold exponent per level, so the radius is capped.
pub fn tree_theta_exact(b: u32, d: u32, p: &Ratio, radius: usize) -> Result<Ratio> {
    const MAX_EXACT_RADIUS: usize = 8;
    check_tree_args(b, d, radius)?;
    if p < &rational::zero() || p > &rational::one() {
        return Err(Error::Range("p must lie in [0, 1]".into()));
    }
    if radius > MAX_EXACT_RADIUS {
        return Err(Error::Budget {
            what: "exact tree oracle radius",
            requested: radius as u64,
            limit: MAX_EXACT_RADIUS as u64,
        });
    }
    let one = rational::one();
    let mut u = &one - p;
    for _ in 1..radius {
        u = &one - p * (&one - u.pow(b as i32));
    }
    Ok(&one - u.pow(d as i32))
}

/// Float variant of [`tree_theta_exact`], valid at any radius.
pub fn tree_theta_f64(b: u32, d: u32, p: f64, radius: usize) -> Result<f64> {
    check_tree_args(b, d, radius)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range(format!("p = {p} is outside [0, 1]")));
    }
    let mut u = 1.0 - p;
    for _ in 1..radius {
        u = 1.0 - p * (1.0 - u.powi(b as i32));
    }
    Ok(1.0 - u.powi(d as i32))
}

fn check_tree_args(b: u32, d: u32, radius: usize) -> Result<()> {
    if b == 0 || d == 0 {
        return Err(Error::Range("branching and root degree must be >= 1".into()));
    }
    if radius == 0 {
        return Err(Error::Range("tree oracle needs radius >= 1".into()));
    }
    Ok(())
}

/// Certified upper bound on the percolation threshold.
#[derive(Debug, Clone, Serialize)]
pub struct PcBound {
    pub value: f64,
    pub provenance: Provenance,
}

/// p_c <= 1/(|S| h + 1) from a certified lower bound on the conductance.
///
/// The map is decreasing in h, so only exact values or lower bounds
/// certify anything; upper-bound-only provenance is refused.
pub fn bs_pc_bound(size: &BigInt, h: f64, h_provenance: Provenance) -> Result<PcBound> {
    if !h_provenance.is_certified() {
        return Err(Error::Provenance(
            "the threshold bound needs an exact or certified lower bound on h".into(),
        ));
    }
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::Range(format!("h = {h} is outside [0, 1]")));
    }
    let s = size.to_f64().unwrap_or(f64::INFINITY);
    if s < 1.0 {
        return Err(Error::Range("|S| must be at least 1".into()));
    }
    Ok(PcBound {
        value: 1.0 / (s * h + 1.0),
        provenance: Provenance::CertifiedBound,
    })
}

/// Exact form of [`bs_pc_bound`] for rational h.
pub fn bs_pc_bound_exact(size: &BigInt, h: &Ratio) -> Result<Ratio> {
    if h < &rational::zero() || h > &rational::one() {
        return Err(Error::Range("h must lie in [0, 1]".into()));
    }
    let s = Ratio::from_integer(size.clone());
    Ok(rational::one() / (s * h + rational::one()))
}

/// Applies [`bs_pc_bound`] to a transfer result, refusing upper-only data.
pub fn bs_pc_bound_from(bounds: &HBounds, size: &BigInt) -> Result<PcBound> {
    match &bounds.lower {
        Some(lo) => bs_pc_bound(size, lo.value, Provenance::CertifiedBound),
        None => Err(Error::Provenance(
            "only an upper bound on h is available; the threshold bound needs a lower bound"
                .into(),
        )),
    }
}
