//! Generating multisets and their collapsed weighted form.
//!
//! A `GeneratorMultiset` is the literal entry list (repetition allowed and
//! meaningful). A `WeightedMultiset` collapses entries to (support, weight)
//! pairs while remembering the nominal count |S|, which the conductance and
//! percolation formulas use instead of the support size. Powers S^n are only
//! ever materialized collapsed: the nominal count grows like |S|^n but the
//! support only fills a ball.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};
use crate::rational::Ratio;
use crate::Limits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMultiset {
    entries: Vec<GroupElement>,
}

impl GeneratorMultiset {
    pub fn new(entries: Vec<GroupElement>) -> Self {
        assert!(!entries.is_empty(), "multiset must have at least one entry");
        GeneratorMultiset { entries }
    }

    pub fn entries(&self) -> &[GroupElement] {
        &self.entries
    }

    /// The multiset count |S| (entries, not support).
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> Vec<GroupElement> {
        let mut s: Vec<GroupElement> = self.entries.clone();
        s.sort();
        s.dedup();
        s
    }

    /// S followed by the elementwise inverses of S; size doubles.
    pub fn symmetrized(&self, ctx: &GroupContext) -> Result<Self> {
        let mut entries = self.entries.clone();
        for g in &self.entries {
            entries.push(ctx.inv(g)?);
        }
        Ok(GeneratorMultiset { entries })
    }

    pub fn is_symmetric(&self, ctx: &GroupContext) -> Result<bool> {
        self.weighted(ctx)?.is_symmetric(ctx)
    }

    /// Collapses to (support, weight) pairs with nominal count |S|.
    pub fn weighted(&self, ctx: &GroupContext) -> Result<WeightedMultiset> {
        let mut mult: BTreeMap<GroupElement, u64> = BTreeMap::new();
        for g in &self.entries {
            ctx.validate(g)?;
            *mult.entry(g.clone()).or_insert(0) += 1;
        }
        let n = BigInt::from(self.entries.len());
        let support = mult
            .into_iter()
            .map(|(g, m)| (g, Ratio::new(BigInt::from(m), n.clone())))
            .collect();
        Ok(WeightedMultiset {
            support,
            nominal_size: n,
        })
    }

    /// The product multiset S^n in collapsed form: weight(g) = (number of
    /// ordered n-tuples from S multiplying to g) / |S|^n.
    pub fn power(&self, ctx: &GroupContext, n: u32, limits: &Limits) -> Result<WeightedMultiset> {
        if n == 0 {
            return Err(Error::Range("multiset power must be >= 1".into()));
        }
        let base = self.weighted(ctx)?;
        let mut acc = base.clone();
        for _ in 1..n {
            acc = acc.convolve(ctx, &base, limits)?;
        }
        Ok(acc)
    }
}

/// Collapsed multiset: sorted support with exact rational weights summing
/// to 1, plus the nominal count the weights are normalized by.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedMultiset {
    support: Vec<(GroupElement, Ratio)>,
    nominal_size: BigInt,
}

impl WeightedMultiset {
    pub fn support(&self) -> &[(GroupElement, Ratio)] {
        &self.support
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn nominal_size(&self) -> &BigInt {
        &self.nominal_size
    }

    pub fn nominal_size_f64(&self) -> f64 {
        self.nominal_size.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn weight_of(&self, g: &GroupElement) -> Ratio {
        match self.support.binary_search_by(|(h, _)| h.cmp(g)) {
            Ok(i) => self.support[i].1.clone(),
            Err(_) => Ratio::zero(),
        }
    }

    pub fn total_weight(&self) -> Ratio {
        self.support
            .iter()
            .fold(Ratio::zero(), |acc, (_, w)| acc + w)
    }

    /// Symmetric means weight(g) = weight(g^-1) for every g, which matches
    /// entrywise symmetry of any entry list collapsing to these weights.
    pub fn is_symmetric(&self, ctx: &GroupContext) -> Result<bool> {
        for (g, w) in &self.support {
            if self.weight_of(&ctx.inv(g)?) != *w {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Weighted product of two collapsed multisets: weights convolve, the
    /// nominal counts multiply.
    pub fn convolve(
        &self,
        ctx: &GroupContext,
        other: &WeightedMultiset,
        limits: &Limits,
    ) -> Result<WeightedMultiset> {
        let mut acc: BTreeMap<GroupElement, Ratio> = BTreeMap::new();
        for (g, wg) in &self.support {
            for (s, ws) in &other.support {
                let gs = ctx.mul(g, s)?;
                let w = acc.entry(gs).or_insert_with(Ratio::zero);
                *w += wg * ws;
                if acc.len() > limits.max_support {
                    return Err(Error::Budget {
                        what: "multiset power support",
                        requested: acc.len() as u64,
                        limit: limits.max_support as u64,
                    });
                }
            }
        }
        Ok(WeightedMultiset {
            support: acc.into_iter().collect(),
            nominal_size: &self.nominal_size * &other.nominal_size,
        })
    }

    /// Re-expands to an explicit entry list. Only possible when every
    /// weight times the nominal count is a whole number, which holds for
    /// anything built from entry lists by powers.
    pub fn expand_entries(&self, limits: &Limits) -> Result<GeneratorMultiset> {
        let total = self
            .nominal_size
            .to_u64()
            .filter(|&n| n <= limits.max_expanded_entries as u64)
            .ok_or_else(|| Error::Budget {
                what: "multiset expansion",
                requested: self.nominal_size.to_u64().unwrap_or(u64::MAX),
                limit: limits.max_expanded_entries as u64,
            })?;
        let mut entries = Vec::with_capacity(total as usize);
        for (g, w) in &self.support {
            let count = w * Ratio::from_integer(self.nominal_size.clone());
            if !count.is_integer() || count.is_negative() {
                return Err(Error::InternalInvariant(format!(
                    "non-integer multiplicity {count} during expansion"
                )));
            }
            let count = count.to_integer().to_u64().ok_or_else(|| {
                Error::InternalInvariant("multiplicity out of u64 range".into())
            })?;
            for _ in 0..count {
                entries.push(g.clone());
            }
        }
        if entries.len() as u64 != total {
            return Err(Error::InternalInvariant(
                "expanded entry count disagrees with nominal size".into(),
            ));
        }
        Ok(GeneratorMultiset::new(entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::from_frac;
    use num_traits::One;

    fn f2() -> GroupContext {
        GroupContext::free(2).unwrap()
    }

    #[test]
    fn symmetrize_appends_inverses() {
        let ctx = f2();
        let a = ctx.generator(0);
        let b = ctx.generator(1);
        let s = GeneratorMultiset::new(vec![a.clone(), b.clone()]);
        let sym = s.symmetrized(&ctx).unwrap();
        assert_eq!(sym.size(), 4);
        assert_eq!(sym.entries()[0], a);
        assert_eq!(sym.entries()[2], ctx.inv(&a).unwrap());
        assert!(sym.is_symmetric(&ctx).unwrap());
        assert!(!s.is_symmetric(&ctx).unwrap());
    }

    #[test]
    fn symmetrize_multiset_semantics() {
        let ctx = f2();
        let a = ctx.generator(0);
        let ai = ctx.inv(&a).unwrap();
        let s = GeneratorMultiset::new(vec![a.clone(), ai.clone()]);
        let sym = s.symmetrized(&ctx).unwrap();
        assert_eq!(sym.size(), 4);
        let w = sym.weighted(&ctx).unwrap();
        assert_eq!(w.weight_of(&a), from_frac(1, 2));
        assert_eq!(w.weight_of(&ai), from_frac(1, 2));

        let e = GeneratorMultiset::new(vec![ctx.identity()]);
        let esym = e.symmetrized(&ctx).unwrap();
        assert_eq!(esym.size(), 2);
        assert_eq!(
            esym.weighted(&ctx).unwrap().weight_of(&ctx.identity()),
            Ratio::one()
        );
    }

    #[test]
    fn power_free2_squared() {
        let ctx = f2();
        let s = ctx.standard_symmetric();
        let p2 = s.power(&ctx, 2, &Limits::default()).unwrap();
        assert_eq!(p2.nominal_size(), &BigInt::from(16));
        assert_eq!(p2.support_len(), 13);
        assert_eq!(p2.weight_of(&ctx.identity()), from_frac(4, 16));
        let ab = ctx.parse_element("ab").unwrap();
        let a2 = ctx.parse_element("a^2").unwrap();
        assert_eq!(p2.weight_of(&ab), from_frac(1, 16));
        assert_eq!(p2.weight_of(&a2), from_frac(1, 16));
        assert!(p2.total_weight().is_one());
    }

    #[test]
    fn power_one_is_collapse() {
        let ctx = f2();
        let s = GeneratorMultiset::new(vec![ctx.generator(0), ctx.generator(0)]);
        let p1 = s.power(&ctx, 1, &Limits::default()).unwrap();
        assert_eq!(p1, s.weighted(&ctx).unwrap());
        assert_eq!(p1.weight_of(&ctx.generator(0)), Ratio::one());
        assert_eq!(p1.nominal_size(), &BigInt::from(2));
    }

    #[test]
    fn power_zd1_binomial() {
        let ctx = GroupContext::zd(1).unwrap();
        let s = ctx.standard_symmetric();
        let p2 = s.power(&ctx, 2, &Limits::default()).unwrap();
        let at = |c: i64| p2.weight_of(&GroupElement::vector(vec![c]));
        assert_eq!(at(2), from_frac(1, 4));
        assert_eq!(at(0), from_frac(2, 4));
        assert_eq!(at(-2), from_frac(1, 4));
        assert_eq!(at(1), Ratio::zero());
    }

    #[test]
    fn power_matches_tuple_enumeration() {
        let ctx = f2();
        let a = ctx.generator(0);
        let b = ctx.generator(1);
        let s = GeneratorMultiset::new(vec![a, ctx.inv(&ctx.generator(0)).unwrap(), b]);
        let n = 3;
        let pw = s.power(&ctx, n, &Limits::default()).unwrap();

        // Independent route: walk all |S|^n ordered tuples.
        let mut counts: BTreeMap<GroupElement, u64> = BTreeMap::new();
        let k = s.size();
        for code in 0..k.pow(n) {
            let mut c = code;
            let mut g = ctx.identity();
            for _ in 0..n {
                g = ctx.mul(&g, &s.entries()[c % k]).unwrap();
                c /= k;
            }
            *counts.entry(g).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), pw.support_len());
        let denom = BigInt::from(k.pow(n));
        for (g, m) in counts {
            assert_eq!(
                pw.weight_of(&g),
                Ratio::new(BigInt::from(m), denom.clone())
            );
        }
    }

    #[test]
    fn power_budget_trips() {
        let ctx = f2();
        let s = ctx.standard_symmetric();
        let limits = Limits {
            max_support: 20,
            ..Limits::default()
        };
        assert!(matches!(
            s.power(&ctx, 4, &limits),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn expansion_round_trip_and_guard() {
        let ctx = f2();
        let s = ctx.standard_symmetric();
        let p2 = s.power(&ctx, 2, &Limits::default()).unwrap();
        let expanded = p2.expand_entries(&Limits::default()).unwrap();
        assert_eq!(expanded.size(), 16);
        assert_eq!(expanded.weighted(&ctx).unwrap(), p2);

        let tiny = Limits {
            max_expanded_entries: 8,
            ..Limits::default()
        };
        assert!(matches!(
            p2.expand_entries(&tiny),
            Err(Error::Budget { .. })
        ));
    }
}
