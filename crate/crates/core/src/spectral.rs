//! Spectral radius bounds for random walks driven by a generator multiset.
//!
//! Two routes are implemented. Exact return probabilities give certified
//! lower bounds p_{2n}^{1/(2n)} for symmetric multisets; free groups with
//! the standard symmetric set use a radial birth-death reduction so large
//! step counts stay cheap, everything else convolves sparse measures under
//! a support budget. Power iteration on a finite ball bounds the norm of
//! the compressed walk operator from below, which for symmetric multisets
//! is again a certified lower bound for the spectral radius.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::cayley::{CayleyBall, NO_VERTEX};
use crate::error::{Error, Result};
use crate::group::{Family, GeneratorMultiset, GroupContext, GroupElement, WeightedMultiset};
use crate::rational::{self, Ratio};
use crate::rng;
use crate::{Limits, Provenance};

/// A finitely supported probability measure on the group.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMeasure {
    mass: BTreeMap<GroupElement, Ratio>,
}

impl WalkMeasure {
    pub fn dirac(g: GroupElement) -> Self {
        let mut mass = BTreeMap::new();
        mass.insert(g, rational::one());
        WalkMeasure { mass }
    }

    pub fn from_weighted(w: &WeightedMultiset) -> Self {
        let mass = w
            .support()
            .iter()
            .map(|(g, r)| (g.clone(), r.clone()))
            .collect();
        WalkMeasure { mass }
    }

    pub fn mass(&self, g: &GroupElement) -> Ratio {
        self.mass.get(g).cloned().unwrap_or_else(rational::zero)
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> Ratio {
        let mut t = rational::zero();
        for v in self.mass.values() {
            t += v;
        }
        t
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &Ratio)> {
        self.mass.iter()
    }
}

/// Exact convolution (a * b)(x) = sum_g a(g) b(g^{-1} x).
pub fn convolve_step(
    ctx: &GroupContext,
    a: &WalkMeasure,
    b: &WalkMeasure,
    limits: &Limits,
) -> Result<WalkMeasure> {
    let mut out: BTreeMap<GroupElement, Ratio> = BTreeMap::new();
    for (g, wg) in a.iter() {
        for (h, wh) in b.iter() {
            let gh = ctx.mul(g, h)?;
            let w = wg * wh;
            match out.get_mut(&gh) {
                Some(acc) => *acc += w,
                None => {
                    out.insert(gh, w);
                }
            }
        }
        if out.len() > limits.max_support {
            return Err(Error::Budget {
                what: "convolution support",
                requested: out.len() as u64,
                limit: limits.max_support as u64,
            });
        }
    }
    out.retain(|_, v| !v.is_zero());
    let m = WalkMeasure { mass: out };
    debug_assert_eq!(m.total(), a.total() * b.total());
    Ok(m)
}

/// True when the weights coincide with the uniform standard symmetric set
/// of a free group, the case the radial engine handles.
fn std_free_rank(ctx: &GroupContext, w: &WeightedMultiset) -> Option<usize> {
    match ctx.family() {
        Family::Free { rank } => {
            let std = ctx
                .standard_symmetric()
                .weighted(ctx)
                .expect("standard set is weighted");
            (w.support() == std.support()).then_some(*rank)
        }
        _ => None,
    }
}

/// Distance from the identity of the standard walk on free(k) is a
/// birth-death chain: up with probability (2k-1)/2k, down with 1/2k, and
/// radius 0 always steps up. Radius never exceeds the step count, so a
/// vector of length n+1 is exact.
fn radial_returns(k: usize, n: usize) -> Vec<Ratio> {
    let up = rational::from_frac(2 * k as i64 - 1, 2 * k as i64);
    let down = rational::from_frac(1, 2 * k as i64);
    let mut radial = vec![rational::zero(); n + 2];
    radial[0] = rational::one();
    let mut out = Vec::with_capacity(n + 1);
    out.push(rational::one());
    for _ in 1..=n {
        let mut next = vec![rational::zero(); n + 2];
        for r in 0..=n {
            if radial[r].is_zero() {
                continue;
            }
            if r == 0 {
                next[1] += &radial[0];
            } else {
                next[r - 1] += &radial[r] * &down;
                next[r + 1] += &radial[r] * &up;
            }
        }
        radial = next;
        out.push(radial[0].clone());
    }
    out
}

fn generic_returns(
    ctx: &GroupContext,
    w: &WeightedMultiset,
    n: usize,
    limits: &Limits,
) -> Result<Vec<Ratio>> {
    let step = WalkMeasure::from_weighted(w);
    let e = ctx.identity();
    let mut nu = WalkMeasure::dirac(e.clone());
    let mut out = Vec::with_capacity(n + 1);
    out.push(rational::one());
    for _ in 1..=n {
        nu = convolve_step(ctx, &step, &nu, limits)?;
        out.push(nu.mass(&e));
    }
    Ok(out)
}

/// Exact return probabilities p_0..p_n of the multiset-driven walk.
///
/// The multiset must be symmetric: the certified bounds downstream rely on
/// self-adjointness. Non-symmetric inputs are directed to power iteration.
pub fn return_probabilities(
    ctx: &GroupContext,
    s: &GeneratorMultiset,
    n: usize,
    limits: &Limits,
) -> Result<Vec<Ratio>> {
    let w = s.weighted(ctx)?;
    if !w.is_symmetric(ctx)? {
        return Err(Error::MethodNotApplicable(
            "return-probability bounds need a symmetric multiset; use power iteration".into(),
        ));
    }
    if let Some(k) = std_free_rank(ctx, &w) {
        return Ok(radial_returns(k, n));
    }
    generic_returns(ctx, &w, n, limits)
}

/// Float-mode return probabilities for step counts whose exact support
/// would blow the budget. Accumulated rounding is on the order of machine
/// epsilon per step; results are not certified.
pub fn return_probabilities_f64(
    ctx: &GroupContext,
    s: &GeneratorMultiset,
    n: usize,
    limits: &Limits,
) -> Result<Vec<f64>> {
    let w = s.weighted(ctx)?;
    if !w.is_symmetric(ctx)? {
        return Err(Error::MethodNotApplicable(
            "return-probability bounds need a symmetric multiset; use power iteration".into(),
        ));
    }
    let step: Vec<(GroupElement, f64)> = w
        .support()
        .iter()
        .map(|(g, r)| (g.clone(), rational::to_f64(r)))
        .collect();
    let e = ctx.identity();
    let mut nu: BTreeMap<GroupElement, f64> = BTreeMap::new();
    nu.insert(e.clone(), 1.0);
    let mut out = vec![1.0];
    for _ in 1..=n {
        let mut next: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (g, wg) in &step {
            for (h, wh) in &nu {
                let gh = ctx.mul(g, h)?;
                *next.entry(gh).or_insert(0.0) += wg * wh;
            }
            if next.len() > limits.max_support {
                return Err(Error::Budget {
                    what: "convolution support",
                    requested: next.len() as u64,
                    limit: limits.max_support as u64,
                });
            }
        }
        nu = next;
        out.push(nu.get(&e).copied().unwrap_or(0.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMethod {
    Returns,
    PowerIteration,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExactRho {
    pub value: f64,
    pub note: String,
}

/// A sequence of lower bounds for the spectral radius plus the best one.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RhoEstimate {
    pub method: RhoMethod,
    pub lower_bounds: Vec<f64>,
    pub best: f64,
    pub exact: Option<ExactRho>,
    pub provenance: Provenance,
}

impl RhoEstimate {
    fn new(method: RhoMethod, lower_bounds: Vec<f64>, provenance: Provenance) -> Self {
        let best = lower_bounds.iter().copied().fold(0.0f64, f64::max);
        RhoEstimate {
            method,
            lower_bounds,
            best,
            exact: None,
            provenance,
        }
    }

    pub fn with_exact(mut self, value: f64, note: impl Into<String>) -> Self {
        self.exact = Some(ExactRho {
            value,
            note: note.into(),
        });
        self
    }
}

/// One row of the even-step bound ladder.
#[derive(Debug, Clone)]
pub struct ReturnBound {
    /// Half the step count: the row for p_{2n}.
    pub n: usize,
    pub p2n: Ratio,
    pub bound: f64,
}

/// The ladder p_{2n}^{1/(2n)} for all even steps present in `p`.
/// `p[i]` must be the i-step return probability, `p[0] = 1`.
pub fn even_return_bounds(p: &[Ratio]) -> Vec<ReturnBound> {
    let mut rows = Vec::new();
    let mut n = 1;
    while 2 * n < p.len() {
        let p2n = p[2 * n].clone();
        let bound = rational::to_f64(&p2n).powf(1.0 / (2.0 * n as f64));
        rows.push(ReturnBound { n, p2n, bound });
        n += 1;
    }
    rows
}

/// Certified lower bounds for rho from a return-probability sequence.
pub fn rho_lower_from_returns(p: &[Ratio]) -> Result<RhoEstimate> {
    let rows = even_return_bounds(p);
    if rows.is_empty() {
        return Err(Error::Argument(
            "need return probabilities up to step 2 at least".into(),
        ));
    }
    let bounds = rows.iter().map(|r| r.bound).collect();
    Ok(RhoEstimate::new(
        RhoMethod::Returns,
        bounds,
        Provenance::CertifiedBound,
    ))
}

/// Spectral radius of the standard walk on the free group of rank k.
pub fn tree_rho_exact(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Range("free rank must be at least 1".into()));
    }
    Ok(((2 * k - 1) as f64).sqrt() / k as f64)
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = l2_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Power iteration on the walk operator compressed to a finite ball.
///
/// Every reported quotient ||Mv||/||v|| is a lower bound for the operator
/// norm of the compression, hence for symmetric multisets a certified
/// lower bound for the spectral radius. For non-symmetric multisets the
/// iteration runs on the normal-equations operator and the result only
/// bounds the operator norm, not the spectral radius, so it is flagged
/// heuristic.
///
/// `seed = 0` starts from the center indicator; any other seed starts from
/// a strictly positive pseudo-random vector.
pub fn rho_power_iteration(
    ball: &CayleyBall,
    s: &GeneratorMultiset,
    iters: usize,
    seed: u64,
) -> Result<RhoEstimate> {
    if iters == 0 {
        return Err(Error::Argument("power iteration needs at least one step".into()));
    }
    let ctx = ball.ctx();
    let sw = s.weighted(ctx)?;
    let bw = ball.multiset().weighted(ctx)?;
    if sw.support() != bw.support() {
        return Err(Error::ContextMismatch(
            "multiset does not match the ball's build multiset".into(),
        ));
    }
    let symmetric = sw.is_symmetric(ctx)?;

    let g = ball.graph();
    let n = g.vertex_count();
    let e = g.entry_count();
    let inv_e = 1.0 / e as f64;

    let mut v = vec![0.0f64; n];
    if seed == 0 {
        v[0] = 1.0;
    } else {
        for (i, x) in v.iter_mut().enumerate() {
            *x = rng::keyed_unit(seed, &[0x7079, i as u64]) + 1e-3;
        }
    }
    normalize(&mut v);

    // (Mf)(x) averages f over s_j^{-1} x, the in-neighbors.
    let apply = |src: &[f64], dst: &mut [f64], incoming: bool| {
        for x in 0..n {
            let mut acc = 0.0;
            for j in 0..e {
                let u = if incoming {
                    g.incoming(x as u32, j)
                } else {
                    g.out(x as u32, j)
                };
                if u != NO_VERTEX {
                    acc += src[u as usize];
                }
            }
            dst[x] = acc * inv_e;
        }
    };

    let mut bounds = Vec::with_capacity(iters);
    let mut w = vec![0.0f64; n];
    let mut u = vec![0.0f64; n];
    for _ in 0..iters {
        apply(&v, &mut w, true);
        let q = l2_norm(&w);
        bounds.push(q);
        if q == 0.0 {
            break;
        }
        if symmetric {
            std::mem::swap(&mut v, &mut w);
            normalize(&mut v);
        } else {
            apply(&w, &mut u, false);
            std::mem::swap(&mut v, &mut u);
            normalize(&mut v);
        }
    }

    Ok(RhoEstimate::new(
        RhoMethod::PowerIteration,
        bounds,
        if symmetric {
            Provenance::CertifiedBound
        } else {
            Provenance::Heuristic
        },
    ))
}
