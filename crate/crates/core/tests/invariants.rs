//! Randomized cross-module properties, exercised through the public API.
//!
//! Everything asserted here is exact: the properties are algebraic
//! identities, not tolerances, so a single failing case is a bug.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;

use caylab::cayley::{build_ball, CayleyBall};
use caylab::dixmier::{
    average_convolve, build_h, pointwise_eq, sup_exact, translate, witness_from_json,
    witness_to_json, BoundedFunction, DixmierWitness,
};
use caylab::isoperimetry::phi;
use caylab::percolation::percolate_once;
use caylab::rational::{from_frac, from_int};
use caylab::spectral::return_probabilities;
use caylab::{GeneratorMultiset, GroupContext, GroupElement, Limits};

fn contexts() -> Vec<GroupContext> {
    vec![
        GroupContext::free(2).unwrap(),
        GroupContext::zd(2).unwrap(),
        GroupContext::fpc(vec![2, 3]).unwrap(),
    ]
}

/// Deterministic element from a recipe of generator picks, so proptest can
/// shrink inputs without knowing anything about group structure.
fn element_from(ctx: &GroupContext, recipe: &[(u8, bool)]) -> GroupElement {
    let mut acc = ctx.identity();
    for (pick, invert) in recipe {
        let mut g = ctx.generator(*pick as usize % ctx.generator_count());
        if *invert {
            g = ctx.inv(&g).unwrap();
        }
        acc = ctx.mul(&acc, &g).unwrap();
    }
    acc
}

type Recipe = Vec<(u8, bool)>;

fn recipe(max_len: usize) -> impl Strategy<Value = Recipe> {
    prop::collection::vec((any::<u8>(), any::<bool>()), 0..max_len)
}

fn small_ratio() -> impl Strategy<Value = (i64, i64)> {
    (-6i64..=6, 1i64..=5)
}

proptest! {
    #[test]
    fn group_laws(ctx_i in 0usize..3, ra in recipe(10), rb in recipe(10), rc in recipe(10)) {
        let ctx = &contexts()[ctx_i];
        let a = element_from(ctx, &ra);
        let b = element_from(ctx, &rb);
        let c = element_from(ctx, &rc);

        let ab_c = ctx.mul(&ctx.mul(&a, &b).unwrap(), &c).unwrap();
        let a_bc = ctx.mul(&a, &ctx.mul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(ab_c, a_bc);

        let inv = ctx.inv(&a).unwrap();
        prop_assert!(ctx.mul(&a, &inv).unwrap().is_identity());
        prop_assert!(ctx.mul(&inv, &a).unwrap().is_identity());
        prop_assert_eq!(ctx.mul(&a, &ctx.identity()).unwrap(), a.clone());

        prop_assert_eq!(
            ctx.inv_mul(&a, &b).unwrap(),
            ctx.mul(&inv, &b).unwrap()
        );
    }

    #[test]
    fn format_parse_round_trip(ctx_i in 0usize..3, r in recipe(10)) {
        let ctx = &contexts()[ctx_i];
        let g = element_from(ctx, &r);
        prop_assert_eq!(ctx.parse_element(&ctx.format(&g)).unwrap(), g);
    }

    /// |sF and F| + |sF minus F| = |F| for every generator, checked against
    /// the candidate's own boundary tally; phi + overlap = 1 exactly.
    #[test]
    fn boundary_partition_identity(
        ctx_i in 0usize..3,
        f_recipes in prop::collection::vec(recipe(6), 1..8),
        s_recipes in prop::collection::vec(recipe(3), 1..4),
    ) {
        let ctx = &contexts()[ctx_i];
        let f_set: Vec<GroupElement> = f_recipes
            .iter()
            .map(|r| element_from(ctx, r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let s = GeneratorMultiset::new(s_recipes.iter().map(|r| element_from(ctx, r)).collect());
        let weighted = s.weighted(ctx).unwrap();
        let cand = phi(ctx, &weighted, &f_set).unwrap();

        let f_lookup: BTreeSet<&GroupElement> = f_set.iter().collect();
        for (g, escaped) in cand.boundary_counts() {
            let mut inside = 0u64;
            let mut outside = 0u64;
            for x in &f_set {
                let moved = ctx.mul(g, x).unwrap();
                if f_lookup.contains(&moved) {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
            prop_assert_eq!(outside, *escaped);
            prop_assert_eq!(inside + outside, f_set.len() as u64);
        }
        prop_assert_eq!(cand.phi() + cand.overlap(), from_int(1));
    }

    /// The conductance functional is blind to right translation: F and Fg
    /// see the same left edges.
    #[test]
    fn phi_right_translation_invariance(
        ctx_i in 0usize..3,
        f_recipes in prop::collection::vec(recipe(5), 1..7),
        s_recipes in prop::collection::vec(recipe(3), 1..4),
        shift in recipe(5),
    ) {
        let ctx = &contexts()[ctx_i];
        let f_set: Vec<GroupElement> = f_recipes
            .iter()
            .map(|r| element_from(ctx, r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let g = element_from(ctx, &shift);
        let moved: Vec<GroupElement> = f_set
            .iter()
            .map(|x| ctx.mul(x, &g).unwrap())
            .collect();
        let s = GeneratorMultiset::new(s_recipes.iter().map(|r| element_from(ctx, r)).collect());
        let weighted = s.weighted(ctx).unwrap();

        let before = phi(ctx, &weighted, &f_set).unwrap();
        let after = phi(ctx, &weighted, &moved).unwrap();
        prop_assert_eq!(before.phi(), after.phi());
        prop_assert_eq!(before.overlap(), after.overlap());
        prop_assert_eq!(before.boundary_counts(), after.boundary_counts());
    }

    #[test]
    fn weighted_collapse_and_symmetrization(
        ctx_i in 0usize..3,
        s_recipes in prop::collection::vec(recipe(4), 1..6),
    ) {
        let ctx = &contexts()[ctx_i];
        let s = GeneratorMultiset::new(s_recipes.iter().map(|r| element_from(ctx, r)).collect());
        let weighted = s.weighted(ctx).unwrap();
        prop_assert_eq!(weighted.total_weight(), from_int(1));
        for g in s.entries() {
            prop_assert!(weighted.weight_of(g) > from_int(0));
        }
        let sym = s.symmetrized(ctx).unwrap();
        prop_assert!(sym.is_symmetric(ctx).unwrap());
    }

    /// S^n collapsed equals the brute-force census of all ordered n-fold
    /// products, including multiplicity and nominal size.
    #[test]
    fn power_matches_product_census(
        ctx_i in 0usize..3,
        s_recipes in prop::collection::vec(recipe(3), 1..4),
        n in 1u32..=3,
    ) {
        let ctx = &contexts()[ctx_i];
        let s = GeneratorMultiset::new(s_recipes.iter().map(|r| element_from(ctx, r)).collect());
        let power = s.power(ctx, n, &Limits::default()).unwrap();

        let mut products = vec![ctx.identity()];
        for _ in 0..n {
            products = products
                .iter()
                .flat_map(|acc| s.entries().iter().map(|g| ctx.mul(acc, g).unwrap()))
                .collect();
        }
        let census = GeneratorMultiset::new(products).weighted(ctx).unwrap();
        prop_assert_eq!(power, census);
    }

    /// (gh).f = g.(h.f), exactly, in both representations.
    #[test]
    fn translate_composes(
        ctx_i in 0usize..3,
        support in prop::collection::vec((recipe(4), small_ratio()), 0..5),
        rg in recipe(3),
        rh in recipe(3),
    ) {
        let ctx = &contexts()[ctx_i];
        let limits = Limits::default();
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (r, (num, den)) in &support {
            let g = element_from(ctx, r);
            if seen.insert(g.clone()) {
                entries.push((g, from_frac(*num, *den)));
            }
        }
        let f = BoundedFunction::finsupp(ctx, entries).unwrap();
        let g = element_from(ctx, &rg);
        let h = element_from(ctx, &rh);
        let gh = ctx.mul(&g, &h).unwrap();

        let direct = translate(ctx, &gh, &f, &limits).unwrap();
        let nested = translate(ctx, &g, &translate(ctx, &h, &f, &limits).unwrap(), &limits).unwrap();
        prop_assert_eq!(direct, nested);
    }

    #[test]
    fn translate_composes_on_prefix_tables(
        pick in 0usize..4,
        rg in recipe(2),
        rh in recipe(2),
    ) {
        let ctx = GroupContext::free(2).unwrap();
        let limits = Limits::default();
        let base = [
            ctx.generator(0),
            ctx.generator(1),
            ctx.inv(&ctx.generator(0)).unwrap(),
            ctx.inv(&ctx.generator(1)).unwrap(),
        ];
        let f = BoundedFunction::cone_indicator(&ctx, &base[pick], &limits).unwrap();
        let g = element_from(&ctx, &rg);
        let h = element_from(&ctx, &rh);
        let gh = ctx.mul(&g, &h).unwrap();

        let direct = translate(&ctx, &gh, &f, &limits).unwrap();
        let nested =
            translate(&ctx, &g, &translate(&ctx, &h, &f, &limits).unwrap(), &limits).unwrap();
        prop_assert!(pointwise_eq(&ctx, &direct, &nested, &limits).unwrap());
    }

    /// Averaging translates never raises the sup or the norm.
    #[test]
    fn averaging_contracts_sup_and_norm(
        ctx_i in 0usize..3,
        support in prop::collection::vec((recipe(4), small_ratio()), 1..5),
        f_recipes in prop::collection::vec(recipe(3), 1..6),
    ) {
        let ctx = &contexts()[ctx_i];
        let limits = Limits::default();
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (r, (num, den)) in &support {
            let g = element_from(ctx, r);
            if seen.insert(g.clone()) {
                entries.push((g, from_frac(*num, *den)));
            }
        }
        let f = BoundedFunction::finsupp(ctx, entries).unwrap();
        let f_set: Vec<GroupElement> = f_recipes
            .iter()
            .map(|r| element_from(ctx, r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let avg = average_convolve(ctx, &f_set, &f, &limits).unwrap();
        prop_assert!(sup_exact(ctx, &avg).unwrap() <= sup_exact(ctx, &f).unwrap());
        prop_assert!(avg.norm_inf() <= f.norm_inf());
    }

    /// The translation-difference sum is additive in its pair list.
    #[test]
    fn build_h_additive_in_pairs(
        first in prop::collection::vec(((recipe(3), small_ratio()), recipe(3)), 1..4),
        second in prop::collection::vec(((recipe(3), small_ratio()), recipe(3)), 1..4),
    ) {
        let ctx = GroupContext::zd(2).unwrap();
        let limits = Limits::default();
        let mk_pairs = |raw: &[((Recipe, (i64, i64)), Recipe)]| {
            raw.iter()
                .map(|((r, (num, den)), tr)| {
                    let point = element_from(&ctx, r);
                    let f = BoundedFunction::finsupp(
                        &ctx,
                        vec![(point, from_frac(*num, *den))],
                    )
                    .unwrap();
                    (f, element_from(&ctx, tr))
                })
                .collect::<Vec<_>>()
        };
        let pairs_a = mk_pairs(&first);
        let pairs_b = mk_pairs(&second);
        let mut joined = pairs_a.clone();
        joined.extend(pairs_b.iter().cloned());

        let whole = build_h(&ctx, &joined, &limits).unwrap();
        let parts = build_h(&ctx, &pairs_a, &limits)
            .unwrap()
            .add(&ctx, &build_h(&ctx, &pairs_b, &limits).unwrap(), &limits)
            .unwrap();
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn witness_json_round_trips(
        raw in prop::collection::vec(((recipe(3), small_ratio()), recipe(3)), 1..4),
    ) {
        let ctx = GroupContext::zd(2).unwrap();
        let limits = Limits::default();
        let pairs: Vec<(BoundedFunction, GroupElement)> = raw
            .iter()
            .map(|((r, (num, den)), tr)| {
                let point = element_from(&ctx, r);
                let f = BoundedFunction::finsupp(&ctx, vec![(point, from_frac(*num, *den))])
                    .unwrap();
                (f, element_from(&ctx, tr))
            })
            .collect();
        let witness = DixmierWitness::new(&ctx, pairs, &limits).unwrap();
        let text = witness_to_json(&ctx, &witness).unwrap();
        let back = witness_from_json(&ctx, &text, &limits).unwrap();
        prop_assert_eq!(&back, &witness);
        prop_assert_eq!(witness_to_json(&ctx, &back).unwrap(), text);
    }
}

fn shared_ball() -> &'static CayleyBall {
    static BALL: OnceLock<CayleyBall> = OnceLock::new();
    BALL.get_or_init(|| {
        let ctx = GroupContext::free(2).unwrap();
        let s = ctx.standard_symmetric();
        build_ball(&ctx, &s, 4, &Limits::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Identical keys replay the identical configuration, and opening more
    /// edges (larger p, same variates) can only help the center reach out.
    #[test]
    fn percolation_coupling_is_monotone(
        p1 in 0.0f64..=1.0,
        p2 in 0.0f64..=1.0,
        seed in any::<u64>(),
        sample in 0u64..1000,
    ) {
        let ball = shared_ball();
        let lo_p = p1.min(p2);
        let hi_p = p1.max(p2);
        let lo = percolate_once(ball, lo_p, seed, sample).unwrap();
        let hi = percolate_once(ball, hi_p, seed, sample).unwrap();
        let replay = percolate_once(ball, lo_p, seed, sample).unwrap();
        prop_assert_eq!(&lo, &replay);
        prop_assert!(lo.open_edges <= hi.open_edges);
        if lo.root_reaches_boundary {
            prop_assert!(hi.root_reaches_boundary);
        }
    }
}

/// Even-step return probabilities of a symmetric walk supermultiply:
/// p_{2(m+n)} >= p_{2m} p_{2n}, exactly.
#[test]
fn returns_supermultiply() {
    let limits = Limits::default();
    for ctx in contexts() {
        let s = ctx.standard_symmetric();
        let p = return_probabilities(&ctx, &s, 8, &limits).unwrap();
        for m in 0..=2usize {
            for n in 0..=2usize {
                assert!(
                    p[2 * (m + n)] >= &p[2 * m] * &p[2 * n],
                    "p_{} < p_{} * p_{} on {:?}",
                    2 * (m + n),
                    2 * m,
                    2 * n,
                    ctx.family()
                );
            }
        }
    }
}
