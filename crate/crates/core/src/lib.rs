//! Exact and Monte Carlo machinery for non-amenability certificates on
//! finitely generated groups: conductance (edge-isoperimetry) of generating
//! multisets, spectral radius of the associated random walk, Bernoulli bond
//! percolation on Cayley/Schreier balls, and translation-difference witnesses
//! of the form `H = sum_i (h_i - gamma_i * h_i)`.
//!
//! The crate keeps two arithmetic regimes strictly apart:
//!
//! * combinatorial quantities (walk measures, boundary counts, witness
//!   functions) are exact `BigRational`s end to end;
//! * estimation layers (Monte Carlo percolation, float power iteration)
//!   are `f64` and carry an explicit [`Provenance`] tag so a heuristic
//!   number can never masquerade as a certified one.

pub mod cayley;
pub mod dixmier;
pub mod error;
pub mod group;
pub mod isoperimetry;
pub mod percolation;
pub mod rational;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use group::{Family, GeneratorMultiset, GroupContext, GroupElement, WeightedMultiset};
pub use rational::Ratio;

use serde::{Deserialize, Serialize};

/// How much trust a reported number deserves.
///
/// `Exact` values are rational arithmetic with no rounding; `CertifiedBound`
/// values are one-sided bounds whose only slack is f64 rounding;
/// `MonteCarloCi` values come with a confidence interval; `Heuristic` values
/// are best-effort and must never feed a certification decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    CertifiedBound,
    Heuristic,
    MonteCarloCi,
}

impl Provenance {
    /// Whether a value with this tag may participate in a certificate.
    pub fn is_certified(self) -> bool {
        matches!(self, Provenance::Exact | Provenance::CertifiedBound)
    }
}

/// Size guards for operations whose cost is data-dependent.
///
/// Every limit is a plain field so callers can raise one guard without
/// affecting the rest: `Limits { max_depth: 16, ..Limits::default() }`.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Vertex cap for ball construction.
    pub max_ball_vertices: usize,
    /// Support cap for exact convolution of walk measures.
    pub max_support: usize,
    /// Depth cap for prefix-represented bounded functions.
    pub max_depth: usize,
    /// Cap on `max_size` in exhaustive Folner search.
    pub max_exhaustive_size: usize,
    /// Cap on subsets visited by exhaustive search (connected or not).
    pub max_enumerated_sets: u64,
    /// Cap on expanding a collapsed multiset power back into an entry list.
    pub max_expanded_entries: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_ball_vertices: 2_000_000,
            max_support: 500_000,
            max_depth: 12,
            max_exhaustive_size: 9,
            max_enumerated_sets: 50_000_000,
            max_expanded_entries: 4096,
        }
    }
}
