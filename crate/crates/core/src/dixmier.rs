//! Translation-difference witnesses and their Folner-averaged iterates.
//!
//! Everything here is exact. Functions take rational values, suprema are
//! computed over the whole (usually infinite) group, and every inequality is
//! checked in integer arithmetic. Two representation classes make the exact
//! sup possible:
//!
//! - prefix-classified (word families only): the value of `f(x)` depends only
//!   on the first `depth` units of the reduced word for `x`. Stored as a
//!   total table over all words of unit length at most `depth`; a word of
//!   length exactly `depth` stands for the cone of all its extensions.
//! - finitely supported (any family): explicit nonzero values, implicit zero
//!   elsewhere. Stored without zeros, so equality of maps is equality of
//!   functions.
//!
//! Both classes are closed under the left action `(g.f)(x) = f(g^-1 x)`,
//! under addition and scaling, and under averaging over a finite set, which
//! is all the witness constructions need.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::parse::{format_group_spec, parse_group_spec};
use crate::group::{GeneratorMultiset, GroupContext, GroupElement};
use crate::isoperimetry::FolnerCandidate;
use crate::rational::{format_ratio, from_frac, from_int, parse_ratio, Ratio};
use crate::Limits;

/// A bounded function on the group with exactly computable supremum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundedFunction {
    /// Value depends only on the first `depth` units of the reduced word.
    /// The table is total: every word of unit length at most `depth` has an
    /// entry, and a maximal-length word stands for all its extensions.
    Prefix {
        depth: usize,
        classes: BTreeMap<GroupElement, Ratio>,
    },
    /// Explicit values on a finite support, zero elsewhere. No stored zeros.
    FinSupp {
        values: BTreeMap<GroupElement, Ratio>,
    },
}

fn check_family(ctx: &GroupContext, f: &BoundedFunction) -> Result<()> {
    match f {
        BoundedFunction::Prefix { .. } if !ctx.is_word_family() => Err(Error::ContextMismatch(
            "prefix-classified functions are only meaningful over word families".into(),
        )),
        _ => Ok(()),
    }
}

/// Builds a total prefix table of the given depth from a value callback.
fn prefix_table<F>(
    ctx: &GroupContext,
    depth: usize,
    limits: &Limits,
    mut value: F,
) -> Result<BoundedFunction>
where
    F: FnMut(&GroupElement) -> Result<Ratio>,
{
    if depth > limits.max_depth {
        return Err(Error::Budget {
            what: "prefix depth",
            requested: depth as u64,
            limit: limits.max_depth as u64,
        });
    }
    let mut classes = BTreeMap::new();
    for level in ctx.words_by_unit_len(depth, limits.max_expanded_entries)? {
        for w in level {
            let v = value(&w)?;
            classes.insert(w, v);
        }
    }
    Ok(BoundedFunction::Prefix { depth, classes })
}

impl BoundedFunction {
    /// The zero function, represented with empty support.
    pub fn zero() -> Self {
        BoundedFunction::FinSupp {
            values: BTreeMap::new(),
        }
    }

    /// Finitely supported function from explicit (point, value) pairs.
    /// Zero values are dropped; a repeated point is an error.
    pub fn finsupp(ctx: &GroupContext, entries: Vec<(GroupElement, Ratio)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (g, v) in entries {
            ctx.validate(&g)?;
            if values.insert(g, v).is_some() {
                return Err(Error::Argument(
                    "finite-support function lists the same point twice".into(),
                ));
            }
        }
        values.retain(|_, v| !v.is_zero());
        Ok(BoundedFunction::FinSupp { values })
    }

    /// Indicator of a finite set of points.
    pub fn indicator(ctx: &GroupContext, points: &[GroupElement]) -> Result<Self> {
        Self::finsupp(
            ctx,
            points.iter().map(|g| (g.clone(), Ratio::one())).collect(),
        )
    }

    /// The constant function. Nonzero constants only exist in the prefix
    /// representation, hence only over word families.
    pub fn constant(ctx: &GroupContext, c: Ratio) -> Result<Self> {
        if ctx.is_word_family() {
            let mut classes = BTreeMap::new();
            classes.insert(ctx.identity(), c);
            Ok(BoundedFunction::Prefix { depth: 0, classes })
        } else if c.is_zero() {
            Ok(Self::zero())
        } else {
            Err(Error::MethodNotApplicable(
                "nonzero constants are only representable over word families".into(),
            ))
        }
    }

    /// Indicator of the cone of `w`: all reduced words that start with `w`,
    /// including `w` itself. The cone of the identity is the whole group.
    pub fn cone_indicator(ctx: &GroupContext, w: &GroupElement, limits: &Limits) -> Result<Self> {
        ctx.validate(w)?;
        if w.is_identity() {
            return Self::constant(ctx, Ratio::one());
        }
        let depth = ctx.unit_len(w)?;
        prefix_table(ctx, depth, limits, |x| {
            Ok(if x == w { Ratio::one() } else { Ratio::zero() })
        })
    }

    /// Indicator of the single point `g` in prefix representation. One level
    /// deeper than `g` itself, so the point is separated from its cone.
    pub fn point_indicator(ctx: &GroupContext, g: &GroupElement, limits: &Limits) -> Result<Self> {
        ctx.validate(g)?;
        let depth = ctx.unit_len(g)? + 1;
        prefix_table(ctx, depth, limits, |x| {
            Ok(if x == g { Ratio::one() } else { Ratio::zero() })
        })
    }

    pub fn is_prefix(&self) -> bool {
        matches!(self, BoundedFunction::Prefix { .. })
    }

    /// Classification depth for prefix functions, `None` for finite support.
    pub fn depth(&self) -> Option<usize> {
        match self {
            BoundedFunction::Prefix { depth, .. } => Some(*depth),
            BoundedFunction::FinSupp { .. } => None,
        }
    }

    /// Number of stored entries (classes or support points).
    pub fn table_len(&self) -> usize {
        match self {
            BoundedFunction::Prefix { classes, .. } => classes.len(),
            BoundedFunction::FinSupp { values } => values.len(),
        }
    }

    /// Exact value at a point.
    pub fn eval(&self, ctx: &GroupContext, x: &GroupElement) -> Result<Ratio> {
        ctx.validate(x)?;
        check_family(ctx, self)?;
        match self {
            BoundedFunction::FinSupp { values } => {
                Ok(values.get(x).cloned().unwrap_or_else(Ratio::zero))
            }
            BoundedFunction::Prefix { depth, classes } => {
                let units = ctx.word_units(x)?;
                let key = if units.len() <= *depth {
                    x.clone()
                } else {
                    ctx.from_units(&units[..*depth])?
                };
                classes.get(&key).cloned().ok_or_else(|| {
                    Error::InternalInvariant(format!(
                        "prefix table of depth {depth} is missing the class {}",
                        ctx.format(&key)
                    ))
                })
            }
        }
    }

    /// Largest absolute value over the whole group.
    pub fn norm_inf(&self) -> Ratio {
        let values: Vec<&Ratio> = match self {
            BoundedFunction::Prefix { classes, .. } => classes.values().collect(),
            BoundedFunction::FinSupp { values } => values.values().collect(),
        };
        values
            .into_iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(Ratio::zero)
    }

    /// Pointwise scaling. Scaling by zero collapses to the zero function.
    pub fn scale(&self, c: &Ratio) -> BoundedFunction {
        if c.is_zero() {
            return match self {
                BoundedFunction::Prefix { depth, classes } => BoundedFunction::Prefix {
                    depth: *depth,
                    classes: classes.keys().map(|g| (g.clone(), Ratio::zero())).collect(),
                },
                BoundedFunction::FinSupp { .. } => BoundedFunction::zero(),
            };
        }
        match self {
            BoundedFunction::Prefix { depth, classes } => BoundedFunction::Prefix {
                depth: *depth,
                classes: classes.iter().map(|(g, v)| (g.clone(), v * c)).collect(),
            },
            // c is nonzero, so no new zeros appear and the map stays pruned.
            BoundedFunction::FinSupp { values } => BoundedFunction::FinSupp {
                values: values.iter().map(|(g, v)| (g.clone(), v * c)).collect(),
            },
        }
    }

    /// Pointwise sum. Both operands must use the same representation; lift
    /// a finite-support operand with [`BoundedFunction::to_prefix`] first.
    pub fn add(&self, ctx: &GroupContext, other: &Self, limits: &Limits) -> Result<Self> {
        self.combine(ctx, other, limits, false)
    }

    /// Pointwise difference, with the same representation rule as `add`.
    pub fn sub(&self, ctx: &GroupContext, other: &Self, limits: &Limits) -> Result<Self> {
        self.combine(ctx, other, limits, true)
    }

    fn combine(
        &self,
        ctx: &GroupContext,
        other: &Self,
        limits: &Limits,
        subtract: bool,
    ) -> Result<Self> {
        check_family(ctx, self)?;
        check_family(ctx, other)?;
        match (self, other) {
            (BoundedFunction::FinSupp { values: a }, BoundedFunction::FinSupp { values: b }) => {
                let mut out = a.clone();
                for (g, v) in b {
                    let slot = out.entry(g.clone()).or_insert_with(Ratio::zero);
                    *slot = if subtract { &*slot - v } else { &*slot + v };
                }
                out.retain(|_, v| !v.is_zero());
                Ok(BoundedFunction::FinSupp { values: out })
            }
            (BoundedFunction::Prefix { depth: da, .. }, BoundedFunction::Prefix { depth: db, .. }) => {
                // Refine both tables to the coarser common depth.
                let depth = (*da).max(*db);
                prefix_table(ctx, depth, limits, |w| {
                    let l = self.eval(ctx, w)?;
                    let r = other.eval(ctx, w)?;
                    Ok(if subtract { l - r } else { l + r })
                })
            }
            _ => Err(Error::Coercion(
                "cannot combine a prefix-classified function with a finite-support one; \
                 lift the finite-support operand with to_prefix first"
                    .into(),
            )),
        }
    }

    /// Losslessly re-expresses a finite-support function as a prefix table,
    /// one level deeper than its longest support word so every support point
    /// is separated from its cone. Only word families admit the lift.
    pub fn to_prefix(&self, ctx: &GroupContext, limits: &Limits) -> Result<Self> {
        check_family(ctx, self)?;
        if !ctx.is_word_family() {
            return Err(Error::Coercion(
                "finite-support functions only lift to prefix tables over word families".into(),
            ));
        }
        match self {
            BoundedFunction::Prefix { .. } => Ok(self.clone()),
            BoundedFunction::FinSupp { values } => {
                let mut depth = 0;
                for g in values.keys() {
                    depth = depth.max(ctx.unit_len(g)? + 1);
                }
                prefix_table(ctx, depth, limits, |w| {
                    Ok(values.get(w).cloned().unwrap_or_else(Ratio::zero))
                })
            }
        }
    }
}

/// Exact supremum of `f` over the whole group.
///
/// Prefix tables are total, so the answer is the largest class value. A
/// finite-support function takes the value zero outside its support, which
/// on an infinite group is almost everywhere; only when the support covers a
/// whole finite group does the maximum ignore the implicit zeros.
pub fn sup_exact(ctx: &GroupContext, f: &BoundedFunction) -> Result<Ratio> {
    check_family(ctx, f)?;
    match f {
        BoundedFunction::Prefix { classes, .. } => Ok(classes
            .values()
            .max()
            .cloned()
            .expect("prefix tables are total, hence nonempty")),
        BoundedFunction::FinSupp { values } => match values.values().max() {
            None => Ok(Ratio::zero()),
            Some(m) => {
                let covers_group = ctx
                    .finite_order()
                    .is_some_and(|n| values.len() as u64 == n);
                if covers_group || !m.is_negative() {
                    Ok(m.clone())
                } else {
                    Ok(Ratio::zero())
                }
            }
        },
    }
}

/// Left translate `(gamma.f)(x) = f(gamma^-1 x)`.
///
/// Finite supports simply move. A prefix table deepens by the unit length of
/// `gamma`, because the class of `gamma^-1 x` is only determined by that many
/// extra units of `x`; the depth budget caps the growth.
pub fn translate(
    ctx: &GroupContext,
    gamma: &GroupElement,
    f: &BoundedFunction,
    limits: &Limits,
) -> Result<BoundedFunction> {
    ctx.validate(gamma)?;
    check_family(ctx, f)?;
    if gamma.is_identity() {
        return Ok(f.clone());
    }
    match f {
        BoundedFunction::FinSupp { values } => {
            let mut out = BTreeMap::new();
            for (g, v) in values {
                out.insert(ctx.mul(gamma, g)?, v.clone());
            }
            Ok(BoundedFunction::FinSupp { values: out })
        }
        BoundedFunction::Prefix { depth, .. } => {
            let new_depth = depth + ctx.unit_len(gamma)?;
            let gamma_inv = ctx.inv(gamma)?;
            prefix_table(ctx, new_depth, limits, |w| {
                f.eval(ctx, &ctx.mul(&gamma_inv, w)?)
            })
        }
    }
}

/// `(1/|F|) * sum over g in F of (g.f)`: the average of the translates of
/// `f` by a finite set. `F` must be nonempty and duplicate-free.
pub fn average_convolve(
    ctx: &GroupContext,
    f_set: &[GroupElement],
    f: &BoundedFunction,
    limits: &Limits,
) -> Result<BoundedFunction> {
    if f_set.is_empty() {
        return Err(Error::Argument("averaging set is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for g in f_set {
        ctx.validate(g)?;
        if !seen.insert(g.clone()) {
            return Err(Error::Argument(format!(
                "averaging set repeats the element {}",
                ctx.format(g)
            )));
        }
    }
    let mut acc = translate(ctx, &f_set[0], f, limits)?;
    for g in &f_set[1..] {
        let t = translate(ctx, g, f, limits)?;
        acc = acc.add(ctx, &t, limits)?;
    }
    Ok(acc.scale(&from_frac(1, f_set.len() as i64)))
}

/// True when `a` and `b` agree at every point of the group.
pub fn pointwise_eq(
    ctx: &GroupContext,
    a: &BoundedFunction,
    b: &BoundedFunction,
    limits: &Limits,
) -> Result<bool> {
    let (x, y) = if a.is_prefix() != b.is_prefix() && ctx.is_word_family() {
        (a.to_prefix(ctx, limits)?, b.to_prefix(ctx, limits)?)
    } else {
        (a.clone(), b.clone())
    };
    Ok(x.sub(ctx, &y, limits)?.norm_inf().is_zero())
}

/// `H = sum over pairs of (h - gamma.h)`: the translation-difference sum.
///
/// Pairs may mix representations over a word family; finite-support entries
/// are lifted to prefix tables before summing.
pub fn build_h(
    ctx: &GroupContext,
    pairs: &[(BoundedFunction, GroupElement)],
    limits: &Limits,
) -> Result<BoundedFunction> {
    if pairs.is_empty() {
        return Err(Error::Argument(
            "a translation-difference sum needs at least one pair".into(),
        ));
    }
    let any_prefix = pairs.iter().any(|(h, _)| h.is_prefix());
    let mut acc: Option<BoundedFunction> = None;
    for (h, gamma) in pairs {
        ctx.validate(gamma)?;
        let h = if any_prefix && !h.is_prefix() {
            h.to_prefix(ctx, limits)?
        } else {
            h.clone()
        };
        let moved = translate(ctx, gamma, &h, limits)?;
        let diff = h.sub(ctx, &moved, limits)?;
        acc = Some(match acc {
            None => diff,
            Some(a) => a.add(ctx, &diff, limits)?,
        });
    }
    Ok(acc.expect("pairs is nonempty"))
}

/// A list of (function, translator) pairs together with the exact data of
/// its translation-difference sum `H = sum (h_i - gamma_i . h_i)`.
///
/// `normalization` is `2 * (number of pairs) * max ||h_i||`; a witness with
/// `normalization <= 1` and `sup H <= -eps` certifies that no translation-
/// invariant normalized mean exists. `chain_factors` records the `(1 - k)`
/// factors of the averaging steps that produced this witness from an earlier
/// one, so the accumulated cancellation bound stays inspectable.
#[derive(Debug, Clone, PartialEq)]
pub struct DixmierWitness {
    pairs: Vec<(BoundedFunction, GroupElement)>,
    multiset: GeneratorMultiset,
    normalization: Ratio,
    h: BoundedFunction,
    sup: Ratio,
    epsilon: Option<Ratio>,
    chain_factors: Vec<Ratio>,
}

impl DixmierWitness {
    /// Assembles a witness and computes its sum, sup, and normalization.
    pub fn new(
        ctx: &GroupContext,
        pairs: Vec<(BoundedFunction, GroupElement)>,
        limits: &Limits,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Argument("a witness needs at least one pair".into()));
        }
        for (h, _) in &pairs {
            check_family(ctx, h)?;
        }
        let h = build_h(ctx, &pairs, limits)?;
        let multiset = GeneratorMultiset::new(pairs.iter().map(|(_, g)| g.clone()).collect());
        let max_norm = pairs
            .iter()
            .map(|(f, _)| f.norm_inf())
            .max()
            .expect("pairs is nonempty");
        let normalization = from_int(2 * pairs.len() as i64) * max_norm;
        let sup = sup_exact(ctx, &h)?;
        let epsilon = if sup.is_negative() {
            Some(-sup.clone())
        } else {
            None
        };
        Ok(DixmierWitness {
            pairs,
            multiset,
            normalization,
            h,
            sup,
            epsilon,
            chain_factors: Vec::new(),
        })
    }

    pub fn pairs(&self) -> &[(BoundedFunction, GroupElement)] {
        &self.pairs
    }

    /// The translators of the pairs, as a multiset (repeats preserved).
    pub fn multiset(&self) -> &GeneratorMultiset {
        &self.multiset
    }

    /// `2 * |pairs| * max ||h_i||`, the scale against which `sup` is read.
    pub fn normalization(&self) -> &Ratio {
        &self.normalization
    }

    pub fn h(&self) -> &BoundedFunction {
        &self.h
    }

    pub fn sup(&self) -> &Ratio {
        &self.sup
    }

    /// `-sup H` when that is positive, i.e. when the witness has teeth.
    pub fn epsilon(&self) -> Option<&Ratio> {
        self.epsilon.as_ref()
    }

    pub fn chain_factors(&self) -> &[Ratio] {
        &self.chain_factors
    }

    /// Product of the recorded `(1 - k)` factors.
    pub fn chain_bound(&self) -> Ratio {
        self.chain_factors
            .iter()
            .fold(Ratio::one(), |acc, f| acc * f)
    }

    /// Rescales all pair functions so that `normalization` becomes one.
    /// Degenerate witnesses (all pairs zero) cannot be normalized.
    pub fn normalize(&self, ctx: &GroupContext, limits: &Limits) -> Result<Self> {
        if self.normalization.is_zero() {
            return Err(Error::Argument(
                "a witness of all-zero functions cannot be normalized".into(),
            ));
        }
        let inv = self.normalization.recip();
        let pairs = self
            .pairs
            .iter()
            .map(|(h, g)| (h.scale(&inv), g.clone()))
            .collect();
        let mut out = Self::new(ctx, pairs, limits)?;
        out.chain_factors = self.chain_factors.clone();
        debug_assert!(out.normalization.is_one());
        Ok(out)
    }
}

/// The canonical unit-normalized starting witness for a multiset `S`: each
/// entry `s` is paired with `1/(2|S|)` times the indicator of the identity,
/// so the normalization is exactly one.
pub fn delta_start_witness(
    ctx: &GroupContext,
    s: &GeneratorMultiset,
    limits: &Limits,
) -> Result<DixmierWitness> {
    let scale = from_frac(1, 2 * s.size() as i64);
    let delta = BoundedFunction::indicator(ctx, &[ctx.identity()])?;
    let pairs = s
        .entries()
        .iter()
        .map(|g| (delta.scale(&scale), g.clone()))
        .collect();
    DixmierWitness::new(ctx, pairs, limits)
}

/// Exact record of one averaging step. `h_norm` and `sup_after` describe the
/// averaged witness before renormalization, so they compare directly against
/// `norm_bound = factor * norm_before` and `sup_before`.
#[derive(Debug, Clone)]
pub struct IterateReport {
    /// Overlap ratio `k` of the Folner candidate used.
    pub k: Ratio,
    /// `1 - k`, the guaranteed shrink factor of this step.
    pub factor: Ratio,
    /// Normalization of the incoming witness.
    pub norm_before: Ratio,
    /// `factor * norm_before`, the cancellation bound the step must meet.
    pub norm_bound: Ratio,
    /// Measured `||H||` of the averaged witness; always `<= norm_bound`.
    pub h_norm: Ratio,
    pub sup_before: Ratio,
    pub sup_after: Ratio,
    /// Normalization of the averaged witness, i.e. what the returned witness
    /// was divided by. One means the step happened to preserve scale.
    pub renormalized_by: Ratio,
}

fn iterate_raw(
    ctx: &GroupContext,
    witness: &DixmierWitness,
    folner: &FolnerCandidate,
    limits: &Limits,
) -> Result<(DixmierWitness, IterateReport)> {
    if witness.normalization.is_zero() {
        return Err(Error::Argument(
            "cannot iterate a degenerate witness of all-zero functions".into(),
        ));
    }
    let expected = witness.multiset.weighted(ctx)?;
    if folner.multiset() != &expected {
        return Err(Error::Argument(
            "the Folner candidate was scored against a different multiset than the witness's \
             translators"
                .into(),
        ));
    }
    let k = folner.overlap().clone();
    let factor = folner.phi().clone();
    let new_pairs = witness
        .pairs
        .iter()
        .map(|(h, g)| Ok((average_convolve(ctx, folner.set(), h, limits)?, g.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut next = DixmierWitness::new(ctx, new_pairs, limits)?;
    next.chain_factors = witness.chain_factors.clone();
    next.chain_factors.push(factor.clone());

    let h_norm = next.h.norm_inf();
    let norm_bound = &factor * &witness.normalization;
    // Cancellation bound: in the averaged sum, translated copies of F cover
    // all but a (1 - k) fraction of the mass, so ||H|| shrinks by factor.
    // This holds for every witness and every candidate; a violation is a bug.
    if h_norm > norm_bound {
        return Err(Error::InternalInvariant(format!(
            "averaged witness norm {} exceeds the cancellation bound {}",
            format_ratio(&h_norm),
            format_ratio(&norm_bound)
        )));
    }
    // In an abelian group the average of translates of H is a convex
    // combination of translates of H itself, so the sup cannot rise. Word
    // families can genuinely push it up (conjugation moves the difference
    // terms off each other), so no check applies there.
    if ctx.is_abelian() && next.sup > witness.sup {
        return Err(Error::InternalInvariant(format!(
            "averaging raised the sup from {} to {} in an abelian group",
            format_ratio(&witness.sup),
            format_ratio(&next.sup)
        )));
    }
    let report = IterateReport {
        k,
        factor,
        norm_before: witness.normalization.clone(),
        norm_bound,
        h_norm,
        sup_before: witness.sup.clone(),
        sup_after: next.sup.clone(),
        renormalized_by: Ratio::one(),
    };
    Ok((next, report))
}

/// One averaging step: replaces every pair function by the average of its
/// translates over the candidate set, checks the exact cancellation bound
/// `||H_new|| <= (1 - k) * normalization`, and returns the renormalized
/// witness together with the step's exact numbers.
///
/// The candidate must have been scored against the witness's own translator
/// multiset. Averaging can annihilate every pair (on a finite cyclic group a
/// full-group average of a mean-zero function is zero); that leaves nothing
/// to renormalize and is reported as an argument error.
pub fn dixmier_iterate(
    ctx: &GroupContext,
    witness: &DixmierWitness,
    folner: &FolnerCandidate,
    limits: &Limits,
) -> Result<(DixmierWitness, IterateReport)> {
    let (raw, mut report) = iterate_raw(ctx, witness, folner, limits)?;
    if raw.normalization.is_zero() {
        return Err(Error::Argument(
            "averaging annihilated every pair function; the iterate cannot be renormalized"
                .into(),
        ));
    }
    report.renormalized_by = raw.normalization.clone();
    let out = raw.normalize(ctx, limits)?;
    Ok((out, report))
}

/// Exact trace of `m` consecutive averaging steps without renormalization.
#[derive(Debug, Clone)]
pub struct ChainReport {
    /// The `(1 - k)` factor of each step.
    pub factors: Vec<Ratio>,
    /// `normalization(start) * product of factors`: what the per-step
    /// cancellation bounds compound to.
    pub bound: Ratio,
    /// Measured `||H||` after each step.
    pub norms: Vec<Ratio>,
    /// Measured `sup H` after each step.
    pub sups: Vec<Ratio>,
    /// Whether the final measured norm is within `bound`. Each individual
    /// step is a theorem and is asserted; the compounded comparison is not
    /// one in general, because a step's bound is read against the previous
    /// witness's normalization rather than its measured norm.
    pub bound_holds: bool,
    /// The final witness, unrenormalized.
    pub witness: DixmierWitness,
}

/// Runs `m >= 1` averaging steps against the same candidate, keeping the raw
/// (unrenormalized) witness throughout so the measured norms compare
/// directly against the compounded bound.
pub fn iterate_chain(
    ctx: &GroupContext,
    start: &DixmierWitness,
    folner: &FolnerCandidate,
    m: usize,
    limits: &Limits,
) -> Result<ChainReport> {
    if m == 0 {
        return Err(Error::Range("chain length must be at least one".into()));
    }
    let mut current = start.clone();
    let mut factors = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    let mut sups = Vec::with_capacity(m);
    let mut bound = start.normalization.clone();
    for _ in 0..m {
        let (next, report) = iterate_raw(ctx, &current, folner, limits)?;
        bound = &bound * &report.factor;
        factors.push(report.factor);
        norms.push(report.h_norm);
        sups.push(report.sup_after);
        current = next;
    }
    let bound_holds = norms.last().expect("m >= 1") <= &bound;
    Ok(ChainReport {
        factors,
        bound,
        norms,
        sups,
        bound_holds,
        witness: current,
    })
}

/// A paradoxical decomposition: indicator pieces `A_1..A_s`, `B_1..B_t`, and
/// a remainder `C` that partition the group, such that the translated
/// `A`-pieces alone retile the whole group, and so do the translated
/// `B`-pieces. The first translator of each family is the identity.
#[derive(Debug, Clone)]
pub struct ParadoxicalDecomposition {
    a_pieces: Vec<BoundedFunction>,
    b_pieces: Vec<BoundedFunction>,
    rest: BoundedFunction,
    a_translators: Vec<GroupElement>,
    b_translators: Vec<GroupElement>,
}

impl ParadoxicalDecomposition {
    pub fn new(
        ctx: &GroupContext,
        a_pieces: Vec<BoundedFunction>,
        a_translators: Vec<GroupElement>,
        b_pieces: Vec<BoundedFunction>,
        b_translators: Vec<GroupElement>,
        rest: BoundedFunction,
    ) -> Result<Self> {
        if a_pieces.is_empty() || b_pieces.is_empty() {
            return Err(Error::Argument(
                "a paradoxical decomposition needs at least one piece per family".into(),
            ));
        }
        if a_pieces.len() != a_translators.len() || b_pieces.len() != b_translators.len() {
            return Err(Error::Argument(
                "each piece needs exactly one translator".into(),
            ));
        }
        for g in a_translators.iter().chain(&b_translators) {
            ctx.validate(g)?;
        }
        if !a_translators[0].is_identity() || !b_translators[0].is_identity() {
            return Err(Error::Argument(
                "the first translator of each family must be the identity".into(),
            ));
        }
        for p in a_pieces.iter().chain(&b_pieces).chain([&rest]) {
            check_family(ctx, p)?;
        }
        Ok(ParadoxicalDecomposition {
            a_pieces,
            b_pieces,
            rest,
            a_translators,
            b_translators,
        })
    }

    pub fn a_pieces(&self) -> &[BoundedFunction] {
        &self.a_pieces
    }

    pub fn b_pieces(&self) -> &[BoundedFunction] {
        &self.b_pieces
    }

    pub fn rest(&self) -> &BoundedFunction {
        &self.rest
    }

    pub fn a_translators(&self) -> &[GroupElement] {
        &self.a_translators
    }

    pub fn b_translators(&self) -> &[GroupElement] {
        &self.b_translators
    }

    /// Total number of moving pieces, `s + t`.
    pub fn tarski_count(&self) -> usize {
        self.a_pieces.len() + self.b_pieces.len()
    }

    /// Checks the three exact partition identities: the pieces tile the
    /// group, the translated `A`-pieces tile it again, and likewise the
    /// translated `B`-pieces. All comparisons are pointwise over the whole
    /// group.
    pub fn verify(&self, ctx: &GroupContext, limits: &Limits) -> Result<()> {
        let all: Vec<&BoundedFunction> = self
            .a_pieces
            .iter()
            .chain(&self.b_pieces)
            .chain([&self.rest])
            .collect();
        for p in &all {
            let zero_one = match p {
                BoundedFunction::Prefix { classes, .. } => {
                    classes.values().all(|v| v.is_zero() || v.is_one())
                }
                BoundedFunction::FinSupp { values } => values.values().all(|v| v.is_one()),
            };
            if !zero_one {
                return Err(Error::Argument(
                    "every piece of a decomposition must be an indicator".into(),
                ));
            }
        }
        let one = BoundedFunction::constant(ctx, Ratio::one())?;
        let lift_if_mixed = |p: &BoundedFunction| -> Result<BoundedFunction> {
            if ctx.is_word_family() && !p.is_prefix() {
                p.to_prefix(ctx, limits)
            } else {
                Ok(p.clone())
            }
        };

        let mut total = lift_if_mixed(&self.rest)?;
        for p in self.a_pieces.iter().chain(&self.b_pieces) {
            total = total.add(ctx, &lift_if_mixed(p)?, limits)?;
        }
        if !pointwise_eq(ctx, &total, &one, limits)? {
            return Err(Error::Argument(
                "the pieces do not partition the group".into(),
            ));
        }

        for (pieces, translators, label) in [
            (&self.a_pieces, &self.a_translators, "A"),
            (&self.b_pieces, &self.b_translators, "B"),
        ] {
            let mut cover: Option<BoundedFunction> = None;
            for (p, g) in pieces.iter().zip(translators) {
                let moved = translate(ctx, g, &lift_if_mixed(p)?, limits)?;
                cover = Some(match cover {
                    None => moved,
                    Some(c) => c.add(ctx, &moved, limits)?,
                });
            }
            let cover = cover.expect("families are nonempty");
            if !pointwise_eq(ctx, &cover, &one, limits)? {
                return Err(Error::Argument(format!(
                    "the translated {label}-pieces do not retile the group exactly"
                )));
            }
        }
        Ok(())
    }

    /// The witness pairs extracted from the moving pieces: every piece whose
    /// translator is not the identity contributes `(scale * piece,
    /// translator)`. The identity-translated pieces stay put and carry no
    /// pair.
    pub fn witness_pairs(
        &self,
        ctx: &GroupContext,
        scale: &Ratio,
        limits: &Limits,
    ) -> Result<Vec<(BoundedFunction, GroupElement)>> {
        let _ = (ctx, limits);
        if self.tarski_count() < 3 {
            return Err(Error::Argument(
                "a decomposition into two single pieces has no moving part".into(),
            ));
        }
        let mut pairs = Vec::new();
        for (pieces, translators) in [
            (&self.a_pieces, &self.a_translators),
            (&self.b_pieces, &self.b_translators),
        ] {
            for (p, g) in pieces.iter().zip(translators).skip(1) {
                pairs.push((p.scale(scale), g.clone()));
            }
        }
        Ok(pairs)
    }

    /// Builds the witness with the canonical scale `1 / (2 (s + t - 2))`,
    /// which makes the normalization exactly one when the pieces are
    /// indicators.
    pub fn to_witness(&self, ctx: &GroupContext, limits: &Limits) -> Result<DixmierWitness> {
        let moving = self.tarski_count() as i64 - 2;
        if moving < 1 {
            return Err(Error::Argument(
                "a decomposition into two single pieces has no moving part".into(),
            ));
        }
        let scale = from_frac(1, 2 * moving);
        let pairs = self.witness_pairs(ctx, &scale, limits)?;
        DixmierWitness::new(ctx, pairs, limits)
    }
}

/// The four-piece paradoxical decomposition of the free group of rank two,
/// together with its witness.
///
/// The pieces are the cones of `a`, `a^-1`, `b`, `b^-1` and the singleton
/// identity remainder. Shifting the `a^-1`-cone by `a` recovers everything
/// outside the `a`-cone, and likewise for `b`, so each two-piece family
/// retiles the group. The witness pairs are `(1/4 * cone(a^-1), a)` and
/// `(1/4 * cone(b^-1), b)`; its sum has supremum exactly `-1/4` at
/// normalization one.
pub fn paradoxical_witness_f2() -> (ParadoxicalDecomposition, DixmierWitness) {
    let ctx = GroupContext::free(2).expect("rank two is a valid free group");
    let limits = Limits::default();
    let a = ctx.generator(0);
    let b = ctx.generator(1);
    let a_inv = ctx.inv(&a).expect("generators invert");
    let b_inv = ctx.inv(&b).expect("generators invert");
    let cone = |w: &GroupElement| {
        BoundedFunction::cone_indicator(&ctx, w, &limits).expect("depth one fits any budget")
    };
    let rest = BoundedFunction::point_indicator(&ctx, &ctx.identity(), &limits)
        .expect("depth one fits any budget");
    let decomposition = ParadoxicalDecomposition::new(
        &ctx,
        vec![cone(&a), cone(&a_inv)],
        vec![ctx.identity(), a],
        vec![cone(&b), cone(&b_inv)],
        vec![ctx.identity(), b],
        rest,
    )
    .expect("the standard decomposition is well formed");
    decomposition
        .verify(&ctx, &limits)
        .expect("the standard decomposition verifies");
    let witness = decomposition
        .to_witness(&ctx, &limits)
        .expect("four pieces leave two moving ones");
    (decomposition, witness)
}

fn function_to_value(ctx: &GroupContext, f: &BoundedFunction) -> Value {
    match f {
        BoundedFunction::Prefix { depth, classes } => {
            let classes: Vec<Value> = classes
                .iter()
                .map(|(g, v)| json!([ctx.format(g), format_ratio(v)]))
                .collect();
            json!({ "repr": "prefix", "depth": depth, "classes": classes })
        }
        BoundedFunction::FinSupp { values } => {
            let support: Vec<Value> = values
                .iter()
                .map(|(g, v)| json!([ctx.format(g), format_ratio(v)]))
                .collect();
            json!({ "repr": "finsupp", "support": support })
        }
    }
}

fn parse_value_pairs(
    ctx: &GroupContext,
    entries: &[Value],
    what: &str,
) -> Result<BTreeMap<GroupElement, Ratio>> {
    let mut out = BTreeMap::new();
    for entry in entries {
        let pair = entry
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Argument(format!("{what} entries must be [word, value] pairs")))?;
        let word = pair[0]
            .as_str()
            .ok_or_else(|| Error::Argument(format!("{what} entry word must be a string")))?;
        let value = pair[1]
            .as_str()
            .ok_or_else(|| Error::Argument(format!("{what} entry value must be a string")))?;
        let g = ctx.parse_element(word)?;
        let v = parse_ratio(value)?;
        if out.insert(g, v).is_some() {
            return Err(Error::Argument(format!(
                "{what} lists the word {word:?} twice"
            )));
        }
    }
    Ok(out)
}

fn function_from_value(ctx: &GroupContext, v: &Value, limits: &Limits) -> Result<BoundedFunction> {
    let repr = v
        .get("repr")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Argument("function is missing its \"repr\" tag".into()))?;
    match repr {
        "prefix" => {
            let depth = v
                .get("depth")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Argument("prefix function is missing its depth".into()))?
                as usize;
            if depth > limits.max_depth {
                return Err(Error::Budget {
                    what: "prefix depth",
                    requested: depth as u64,
                    limit: limits.max_depth as u64,
                });
            }
            let entries = v
                .get("classes")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Argument("prefix function is missing its classes".into()))?;
            let classes = parse_value_pairs(ctx, entries, "prefix table")?;
            // The table must be total: exactly the words of length <= depth.
            let mut expected = 0usize;
            for level in ctx.words_by_unit_len(depth, limits.max_expanded_entries)? {
                for w in level {
                    if !classes.contains_key(&w) {
                        return Err(Error::Argument(format!(
                            "prefix table of depth {depth} is missing the class {}",
                            ctx.format(&w)
                        )));
                    }
                    expected += 1;
                }
            }
            if classes.len() != expected {
                return Err(Error::Argument(format!(
                    "prefix table of depth {depth} has classes beyond its depth"
                )));
            }
            Ok(BoundedFunction::Prefix { depth, classes })
        }
        "finsupp" => {
            let entries = v
                .get("support")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Argument("finsupp function is missing its support".into()))?;
            let mut values = parse_value_pairs(ctx, entries, "support")?;
            values.retain(|_, v| !v.is_zero());
            Ok(BoundedFunction::FinSupp { values })
        }
        other => Err(Error::Argument(format!(
            "unknown function representation {other:?}"
        ))),
    }
}

fn ratio_field(v: &Value, name: &str) -> Result<Ratio> {
    let text = v
        .get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Argument(format!("witness JSON is missing \"{name}\"")))?;
    parse_ratio(text)
}

/// Serializes a witness to a stable JSON form: group spec, pairs with their
/// full function tables, and the computed aggregates for cross-checking on
/// load. Serialization is deterministic, so equal witnesses give equal
/// bytes.
pub fn witness_to_json(ctx: &GroupContext, w: &DixmierWitness) -> Result<String> {
    let pairs: Vec<Value> = w
        .pairs
        .iter()
        .map(|(h, g)| json!({ "h": function_to_value(ctx, h), "translator": ctx.format(g) }))
        .collect();
    let value = json!({
        "group": format_group_spec(ctx),
        "pairs": pairs,
        "normalization": format_ratio(&w.normalization),
        "sup": format_ratio(&w.sup),
        "epsilon": w.epsilon.as_ref().map(format_ratio),
        "chain_factors": w.chain_factors.iter().map(format_ratio).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&value)
        .map_err(|e| Error::InternalInvariant(format!("witness serialization failed: {e}")))
}

/// Parses a witness back, recomputing its sum, sup, and normalization from
/// the pairs and rejecting the input if the stored aggregates disagree. The
/// group spec must match the supplied context.
pub fn witness_from_json(
    ctx: &GroupContext,
    text: &str,
    limits: &Limits,
) -> Result<DixmierWitness> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::Argument(format!("witness JSON does not parse: {e}")))?;
    let group = v
        .get("group")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Argument("witness JSON is missing \"group\"".into()))?;
    let stated = parse_group_spec(group)?;
    if &stated != ctx {
        return Err(Error::ContextMismatch(format!(
            "witness was serialized for {group} but loaded under {}",
            format_group_spec(ctx)
        )));
    }
    let pair_values = v
        .get("pairs")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Argument("witness JSON is missing \"pairs\"".into()))?;
    let mut pairs = Vec::with_capacity(pair_values.len());
    for pv in pair_values {
        let h_value = pv
            .get("h")
            .ok_or_else(|| Error::Argument("pair is missing its function".into()))?;
        let word = pv
            .get("translator")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Argument("pair is missing its translator".into()))?;
        let h = function_from_value(ctx, h_value, limits)?;
        let g = ctx.parse_element(word)?;
        pairs.push((h, g));
    }
    let mut witness = DixmierWitness::new(ctx, pairs, limits)?;

    let stored_sup = ratio_field(&v, "sup")?;
    if stored_sup != witness.sup {
        return Err(Error::Argument(format!(
            "serialized sup {} disagrees with the recomputed {}",
            format_ratio(&stored_sup),
            format_ratio(&witness.sup)
        )));
    }
    let stored_norm = ratio_field(&v, "normalization")?;
    if stored_norm != witness.normalization {
        return Err(Error::Argument(format!(
            "serialized normalization {} disagrees with the recomputed {}",
            format_ratio(&stored_norm),
            format_ratio(&witness.normalization)
        )));
    }
    let stored_eps = match v.get("epsilon") {
        None => return Err(Error::Argument("witness JSON is missing \"epsilon\"".into())),
        Some(Value::Null) => None,
        Some(Value::String(s)) => Some(parse_ratio(s)?),
        Some(_) => {
            return Err(Error::Argument(
                "witness \"epsilon\" must be a string or null".into(),
            ))
        }
    };
    if stored_eps != witness.epsilon {
        return Err(Error::Argument(
            "serialized epsilon disagrees with the recomputed sup".into(),
        ));
    }
    let factors = v
        .get("chain_factors")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Argument("witness JSON is missing \"chain_factors\"".into()))?;
    witness.chain_factors = factors
        .iter()
        .map(|f| {
            f.as_str()
                .ok_or_else(|| Error::Argument("chain factors must be strings".into()))
                .and_then(parse_ratio)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(witness)
}
