//! Monte Carlo estimates validated against independent exact oracles.
//!
//! The free-group ball is a regular tree, where the reach probability has a
//! closed recursion. The sampler knows nothing about trees, so agreement
//! here exercises the whole pipeline: ball construction, keyed variates,
//! cluster growth, and the interval arithmetic.
//!
//! Each comparison allows one reseeded retry: a two-sided 3-sigma interval
//! misses a true value about 0.3% of the time, and two independent misses
//! in a row indicate a real defect rather than sampling noise.

use std::sync::OnceLock;

use num_traits::ToPrimitive;

use caylab::cayley::{build_ball, CayleyBall};
use caylab::percolation::{theta_hat, tree_theta_exact, tree_theta_f64, wilson};
use caylab::rational::from_frac;
use caylab::{GroupContext, Limits};

const SAMPLES: u64 = 2000;
const BASE_SEED: u64 = 0x0031_C0DE;

fn tree_ball(radius: usize) -> CayleyBall {
    let ctx = GroupContext::free(2).unwrap();
    let s = ctx.standard_symmetric();
    build_ball(&ctx, &s, radius, &Limits::default()).unwrap()
}

fn shared_r12() -> &'static CayleyBall {
    static BALL: OnceLock<CayleyBall> = OnceLock::new();
    BALL.get_or_init(|| tree_ball(12))
}

fn assert_matches_oracle(ball: &CayleyBall, p: f64, n_samples: u64, oracle: f64, what: &str) {
    let mut last = (0.0, 0.0, 0.0);
    for attempt in 0..2u64 {
        let est = theta_hat(ball, p, n_samples, BASE_SEED + attempt).unwrap();
        let (lo, hi) = wilson(est.successes, n_samples, 3.0);
        if lo <= oracle && oracle <= hi {
            return;
        }
        last = (est.theta, lo, hi);
        eprintln!(
            "{what}: oracle {oracle:.7} outside 3-sigma [{lo:.7}, {hi:.7}] \
             (theta_hat {:.7}, seed {}); retrying once",
            est.theta,
            BASE_SEED + attempt
        );
    }
    panic!(
        "{what}: oracle {oracle:.7} rejected twice; last theta_hat {:.7}, interval [{:.7}, {:.7}]",
        last.0, last.1, last.2
    );
}

#[test]
fn theta_matches_tree_oracle_radius_6() {
    let ball = tree_ball(6);
    for p in [0.2, 1.0 / 3.0, 0.5] {
        let oracle = tree_theta_f64(3, 4, p, 6).unwrap();
        assert_matches_oracle(&ball, p, SAMPLES, oracle, &format!("R=6, p={p:.4}"));
    }
}

#[test]
fn theta_matches_tree_oracle_radius_12() {
    let ball = shared_r12();
    for p in [0.2, 1.0 / 3.0, 0.5] {
        let oracle = tree_theta_f64(3, 4, p, 12).unwrap();
        assert_matches_oracle(ball, p, SAMPLES, oracle, &format!("R=12, p={p:.4}"));
    }
}

/// At a radius small enough for the fully exact rational recursion, the
/// sampler is checked against that value directly.
#[test]
fn theta_matches_exact_rational_radius_2() {
    let ball = tree_ball(2);
    let exact = tree_theta_exact(3, 4, &from_frac(1, 2), 2).unwrap();
    assert_eq!(exact, from_frac(58975, 65536));
    let oracle = exact.to_f64().unwrap();
    assert_matches_oracle(&ball, 0.5, 4000, oracle, "R=2, p=1/2");
}

/// The float recursion tracks the exact one to machine precision where the
/// exact one is affordable.
#[test]
fn tree_oracle_float_agrees_with_exact() {
    for radius in 1..=4usize {
        for (num, den) in [(1i64, 5i64), (1, 3), (1, 2), (4, 5)] {
            let exact = tree_theta_exact(3, 4, &from_frac(num, den), radius)
                .unwrap()
                .to_f64()
                .unwrap();
            let float = tree_theta_f64(3, 4, num as f64 / den as f64, radius).unwrap();
            assert!(
                (exact - float).abs() < 1e-12,
                "radius {radius}, p={num}/{den}: exact {exact} vs float {float}"
            );
        }
    }
}
