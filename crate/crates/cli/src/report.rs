//! Run reports: one JSON document per invocation plus fixed-column CSV
//! views of the tabular stages.
//!
//! Wall-clock timing deliberately stays out of every report file so that
//! identical seeds produce byte-identical output; timing goes to stderr.

use std::fs;
use std::io;
use std::path::Path;

use caylab::isoperimetry::{CriterionCheck, HBound, HBounds, PowerSearch};
use caylab::percolation::{
    wilson, PcBound, PcEstimate, ThetaEstimate, UniquenessProbe,
};
use caylab::rational::{format_ratio, to_f64};
use caylab::spectral::{ReturnBound, RhoEstimate};
use caylab::{Limits, Provenance, Ratio};
use serde::Serialize;

/// Human form of an exact ratio: integers drop the unit denominator, all
/// other values keep the canonical `num/den`.
pub fn disp_ratio(r: &Ratio) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format_ratio(r)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

/// Everything a single command run reports. Stages the command did not
/// execute stay `None` and are omitted from the JSON, so each command has
/// a stable shape.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub group: String,
    pub multiset: MultisetSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub budgets: BudgetSummary,
    pub stages: Stages,
    /// Present exactly when every input of the criterion decision carries
    /// certified provenance; `passed` is then trustworthy, not advisory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct MultisetSummary {
    /// The spec text as given on the command line.
    pub spec: String,
    /// Canonical entry list after parsing (and power expansion).
    pub entries: Vec<String>,
    pub size: usize,
    pub support: usize,
    pub symmetric: bool,
}

/// Mirror of [`Limits`] so the report records the guards in force.
#[derive(Debug, Serialize)]
pub struct BudgetSummary {
    pub max_ball_vertices: usize,
    pub max_support: usize,
    pub max_depth: usize,
    pub max_exhaustive_size: usize,
    pub max_enumerated_sets: u64,
    pub max_expanded_entries: usize,
}

impl From<&Limits> for BudgetSummary {
    fn from(l: &Limits) -> Self {
        BudgetSummary {
            max_ball_vertices: l.max_ball_vertices,
            max_support: l.max_support,
            max_depth: l.max_depth,
            max_exhaustive_size: l.max_exhaustive_size,
            max_enumerated_sets: l.max_enumerated_sets,
            max_expanded_entries: l.max_expanded_entries,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Stages {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball: Option<BallSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_returns: Option<RhoEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_ladder: Option<Vec<LadderRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_power: Option<RhoEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_bounds: Option<HBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conductance_search: Option<ConductanceSearch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_search: Option<PowerSearch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc_bound: Option<PcBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc_bound_exact: Option<ExactPcBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc_bound_power: Option<PowerPcBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness_product: Option<UniquenessProduct>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_curve: Option<Vec<ThetaEstimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc_estimate: Option<PcEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness_probe: Option<UniquenessProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paradoxical: Option<ParadoxicalStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainStage>,
    /// Canonical witness document, replayable by the core library.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

#[derive(Debug, Serialize)]
pub struct BallSummary {
    pub radius: usize,
    pub vertices: usize,
    pub undirected_edges: usize,
    pub provenance: Provenance,
}

/// One even step of the return ladder: p_{2n} exactly, and the certified
/// bound p_{2n}^(1/2n) <= rho.
#[derive(Debug, Serialize)]
pub struct LadderRow {
    pub n: usize,
    pub p_2n: String,
    pub p_2n_float: f64,
    pub lower_bound: f64,
    pub provenance: Provenance,
}

impl From<&ReturnBound> for LadderRow {
    fn from(row: &ReturnBound) -> Self {
        LadderRow {
            n: row.n,
            p_2n: disp_ratio(&row.p2n),
            p_2n_float: to_f64(&row.p2n),
            lower_bound: row.bound,
            provenance: Provenance::CertifiedBound,
        }
    }
}

/// Explicit low-conductance sets: lattice boxes and/or exhaustive-search
/// minima. Every phi is exact for its set, so `best` is always a valid
/// upper bound on h.
#[derive(Debug, Serialize)]
pub struct ConductanceSearch {
    pub rows: Vec<CandidateRow>,
    pub best: HBound,
    pub best_set: Vec<String>,
    pub explored: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct CandidateRow {
    pub label: String,
    pub size: usize,
    pub phi: String,
    pub phi_float: f64,
}

/// Exact edge-threshold bound 1/(|S| h + 1) from a closed-form h.
#[derive(Debug, Serialize)]
pub struct ExactPcBound {
    pub h: String,
    pub value: String,
    pub value_float: f64,
    pub provenance: Provenance,
}

/// The edge-threshold bound evaluated at the first certifying power S^n.
#[derive(Debug, Serialize)]
pub struct PowerPcBound {
    pub n: u32,
    pub nominal_size: f64,
    pub support: usize,
    pub h_lower: f64,
    pub bound: PcBound,
}

/// Arithmetic check rho(S^n)^ * p_c-bound(S^n) * |S^n| < 1; all factors
/// certified or the flag stays false.
#[derive(Debug, Serialize)]
pub struct UniquenessProduct {
    pub n: u32,
    pub rho_upper_n: f64,
    pub pc_upper: f64,
    pub nominal_size: f64,
    pub product: f64,
    pub pc_lt_pu_certified: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct ParadoxicalStage {
    pub tarski_count: usize,
    pub pieces: Vec<String>,
    pub a_translators: Vec<String>,
    pub b_translators: Vec<String>,
    pub checks: Vec<CheckItem>,
    pub normalization: String,
    pub sup: String,
    pub sup_float: f64,
    pub epsilon: String,
    pub scaled: ScaledWitness,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
}

/// The same witness with unit-height pieces instead of unit normalization.
#[derive(Debug, Serialize)]
pub struct ScaledWitness {
    pub scale: String,
    pub sup: String,
    pub norm: String,
}

#[derive(Debug, Serialize)]
pub struct ChainStage {
    pub m: usize,
    pub averaging_set: CandidateRow,
    pub overlap: String,
    pub start_normalization: String,
    pub start_sup: String,
    pub factors: Vec<String>,
    pub norms: Vec<String>,
    pub sups: Vec<String>,
    pub bound: String,
    pub bound_float: f64,
    pub bound_holds: bool,
    pub final_sup: String,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub certified: bool,
    pub passed: bool,
    pub summary: String,
}

impl RunReport {
    pub fn new(
        command: &str,
        group: String,
        multiset: MultisetSummary,
        limits: &Limits,
    ) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            group,
            multiset,
            seed: None,
            budgets: BudgetSummary::from(limits),
            stages: Stages::default(),
            verdict: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// `n,p_2n_num,p_2n_den,lower_bound` per even ladder step.
pub fn ladder_csv(rows: &[ReturnBound]) -> String {
    let mut out = String::from("n,p_2n_num,p_2n_den,lower_bound\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.n,
            row.p2n.numer(),
            row.p2n.denom(),
            row.bound
        ));
    }
    out
}

pub const THETA_CSV_HEADER: &str = "p,theta_hat,ci_lo,ci_hi,n_samples,boundary_clusters_mean";

/// Fixed-column theta rows; the boundary mean is blank when the estimator
/// did not census clusters.
pub fn theta_csv(rows: &[ThetaEstimate]) -> String {
    let mut out = String::from(THETA_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let mean = row
            .boundary_clusters_mean
            .map(|m| m.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.p, row.theta, row.ci_lo, row.ci_hi, row.n_samples, mean
        ));
    }
    out
}

/// The bisection trail of a p_c estimate in theta-CSV form. Each evaluated
/// theta is successes/N, so the interval is reconstructed exactly.
pub fn evaluations_csv(est: &PcEstimate) -> String {
    let mut out = String::from(THETA_CSV_HEADER);
    out.push('\n');
    for &(p, theta) in &est.evaluations {
        let successes = (theta * est.n_samples as f64).round() as u64;
        let (lo, hi) = wilson(successes, est.n_samples, 1.96);
        out.push_str(&format!(
            "{},{},{},{},{},\n",
            p, theta, lo, hi, est.n_samples
        ));
    }
    out
}

/// `step,factor,h_norm,sup` per averaging step, exact values.
pub fn chain_csv(stage: &ChainStage) -> String {
    let mut out = String::from("step,factor,h_norm,sup\n");
    for (i, ((factor, norm), sup)) in stage
        .factors
        .iter()
        .zip(&stage.norms)
        .zip(&stage.sups)
        .enumerate()
    {
        out.push_str(&format!("{},{},{},{}\n", i + 1, factor, norm, sup));
    }
    out
}

/// Writes via a hidden sibling and renames, so a crash never leaves a
/// truncated report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
