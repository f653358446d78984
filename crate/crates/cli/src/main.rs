//! caylab command line: certify a non-amenability criterion, sample
//! Bernoulli bond percolation on Cayley balls, and build or iterate
//! translation-difference witnesses.
//!
//! Exit codes: 0 = success (and, for `criterion`, a certified verdict);
//! 3 = the run completed honestly but the decision is not certified or a
//! stated bound failed; 2 = usage or runtime error. Report files are
//! written atomically after all computation succeeds, so an error never
//! leaves a partial report. Wall-clock timing goes to stderr only.

mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use caylab::cayley::{build_ball, CayleyBall};
use caylab::dixmier::{
    delta_start_witness, iterate_chain, paradoxical_witness_f2, witness_to_json,
};
use caylab::group::parse::{
    format_group_spec, parse_group_spec, parse_multiset_spec, MultisetSpec,
};
use caylab::isoperimetry::{
    candidate_upper, criterion_check, folner_search, mohar_bounds, phi, tree_h_exact,
    witness_power_search, FolnerCandidate, SearchMode,
};
use caylab::percolation::{
    bs_pc_bound, bs_pc_bound_exact, bs_pc_bound_from, pc_estimate, theta_curve,
    uniqueness_probe,
};
use caylab::rational::{from_frac, to_f64};
use caylab::spectral::{
    even_return_bounds, return_probabilities, rho_lower_from_returns, rho_power_iteration,
    tree_rho_exact,
};
use caylab::{
    Family, GeneratorMultiset, GroupContext, Limits, Provenance, WeightedMultiset,
};
use clap::{Args, Parser, Subcommand};

use report::{
    chain_csv, disp_ratio, evaluations_csv, ladder_csv, theta_csv, write_atomic, BallSummary, CandidateRow,
    ChainStage, CheckItem, ConductanceSearch, ExactPcBound, LadderRow, MultisetSummary,
    ParadoxicalStage, PowerPcBound, RunReport, ScaledWitness, UniquenessProduct, Verdict,
};
use svg::{Band, Chart, Rule, Series};

/// Environment variable consulted when `--seed` is absent.
const SEED_ENV: &str = "CAYLAB_SEED";

#[derive(Parser)]
#[command(
    name = "caylab",
    version,
    about = "Conductance, spectral, percolation, and witness computations \
             on finitely generated groups"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full criterion pipeline: spectral bounds, conductance
    /// transfer, power search, and percolation corollaries.
    Criterion(CriterionArgs),
    /// Monte Carlo bond percolation on a Cayley ball.
    Percolate(PercolateArgs),
    /// Build the canonical paradoxical witness or iterate a witness
    /// through an averaging chain.
    Witness(WitnessArgs),
    /// Print a ball as an undirected edge list.
    DumpBall(DumpBallArgs),
}

#[derive(Args)]
struct TargetArgs {
    /// Group spec: free:K, zd:D, or fpc:N1,N2,...
    #[arg(long)]
    group: String,
    /// Multiset spec: `std` or a bracketed literal like [a,a^-1,b,b^-1],
    /// optionally with a power suffix `^n`.
    #[arg(long, default_value = "std")]
    set: String,
}

#[derive(Args)]
struct BudgetArgs {
    /// Vertex cap for ball construction.
    #[arg(long, default_value_t = Limits::default().max_ball_vertices)]
    max_ball_vertices: usize,
    /// Support cap for exact convolution.
    #[arg(long, default_value_t = Limits::default().max_support)]
    max_support: usize,
    /// Depth cap for prefix-represented functions.
    #[arg(long, default_value_t = Limits::default().max_depth)]
    max_depth: usize,
    /// Size cap for exhaustive conductance search.
    #[arg(long, default_value_t = Limits::default().max_exhaustive_size)]
    max_exhaustive_size: usize,
    /// Cap on sets visited by exhaustive search.
    #[arg(long, default_value_t = Limits::default().max_enumerated_sets)]
    max_enumerated_sets: u64,
    /// Cap on expanding collapsed multiset powers.
    #[arg(long, default_value_t = Limits::default().max_expanded_entries)]
    max_expanded_entries: usize,
}

impl BudgetArgs {
    fn limits(&self) -> Limits {
        Limits {
            max_ball_vertices: self.max_ball_vertices,
            max_support: self.max_support,
            max_depth: self.max_depth,
            max_exhaustive_size: self.max_exhaustive_size,
            max_enumerated_sets: self.max_enumerated_sets,
            max_expanded_entries: self.max_expanded_entries,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON run report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the tabular stage as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write an SVG chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CriterionArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Highest power S^n tried by the witness search.
    #[arg(long, default_value_t = 12)]
    nmax: u32,
    /// Walk steps computed for the return-probability ladder.
    #[arg(long, default_value_t = 12)]
    returns: usize,
    /// Ball radius for the exhaustive conductance search; 0 sizes the
    /// ball to fit --search-size.
    #[arg(long, default_value_t = 0)]
    search_radius: usize,
    /// Size cap for the exhaustive conductance search (0 skips it).
    #[arg(long, default_value_t = 6)]
    search_size: usize,
    /// Largest box side tried on lattice groups.
    #[arg(long, default_value_t = 10)]
    box_max: i64,
    /// Ball radius for power iteration when the multiset is not symmetric.
    #[arg(long, default_value_t = 6)]
    power_radius: usize,
    /// Power-iteration steps for the non-symmetric fallback.
    #[arg(long, default_value_t = 60)]
    power_iters: usize,
    /// RNG seed; defaults to $CAYLAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct PercolateArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Ball radius.
    #[arg(long)]
    radius: usize,
    /// Grid point to evaluate; repeatable.
    #[arg(long = "p", value_name = "P")]
    ps: Vec<f64>,
    /// Evenly spaced grid lo:hi:count.
    #[arg(long)]
    grid: Option<String>,
    /// Estimate p_c by coupled bisection.
    #[arg(long)]
    pc: bool,
    /// Crossing level for the p_c estimate.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Samples per evaluated p.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// Bisection iterations for the p_c estimate.
    #[arg(long, default_value_t = 20)]
    iterations: u32,
    /// p for the uniqueness probe; defaults to the p_c estimate, then the
    /// middle of the grid.
    #[arg(long)]
    probe_p: Option<f64>,
    /// RNG seed; defaults to $CAYLAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct WitnessArgs {
    /// Emit the canonical four-piece paradoxical witness on free:2.
    #[arg(long, conflicts_with_all = ["group", "iterate"])]
    paradoxical_f2: bool,
    /// Group spec for the averaging chain.
    #[arg(long)]
    group: Option<String>,
    /// Multiset spec for the averaging chain.
    #[arg(long, default_value = "std")]
    set: String,
    /// Averaging set: box:N (the lattice box [0,N)^d) or ball:R.
    #[arg(long)]
    iterate: Option<String>,
    /// Number of averaging steps.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct DumpBallArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Ball radius.
    #[arg(long)]
    radius: usize,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    budgets: BudgetArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = match cli.cmd {
        Cmd::Criterion(a) => run_criterion(a),
        Cmd::Percolate(a) => run_percolate(a),
        Cmd::Witness(a) => run_witness(a),
        Cmd::DumpBall(a) => run_dump_ball(a),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    ExitCode::from(code)
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var(SEED_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
    })
    .unwrap_or(0)
}

/// Applies the optional power suffix of a multiset spec.
fn effective_multiset(
    ctx: &GroupContext,
    spec: &MultisetSpec,
    limits: &Limits,
) -> Result<GeneratorMultiset> {
    if spec.power == 1 {
        Ok(spec.base.clone())
    } else {
        Ok(spec
            .base
            .power(ctx, spec.power, limits)?
            .expand_entries(limits)?)
    }
}

fn multiset_summary(
    ctx: &GroupContext,
    spec_text: &str,
    s: &GeneratorMultiset,
    w: &WeightedMultiset,
    symmetric: bool,
) -> MultisetSummary {
    MultisetSummary {
        spec: spec_text.to_string(),
        entries: s.entries().iter().map(|g| ctx.format(g)).collect(),
        size: s.size(),
        support: w.support_len(),
        symmetric,
    }
}

/// The rank when the context is a free group and the multiset is exactly
/// the standard symmetric one; only then do the closed-form tree oracles
/// apply.
fn standard_free_rank(ctx: &GroupContext, w: &WeightedMultiset) -> Result<Option<usize>> {
    if let Family::Free { rank } = ctx.family() {
        let std_w = ctx.standard_symmetric().weighted(ctx)?;
        if w.support() == std_w.support() {
            return Ok(Some(*rank));
        }
    }
    Ok(None)
}

fn ball_summary(ball: &CayleyBall) -> Result<BallSummary> {
    Ok(BallSummary {
        radius: ball.graph().radius(),
        vertices: ball.graph().vertex_count(),
        undirected_edges: ball.graph().undirected_edges()?.len(),
        provenance: Provenance::Exact,
    })
}

fn emit_outputs(
    out: &OutputArgs,
    report: &RunReport,
    csv: Option<String>,
    chart: Option<Chart>,
) -> Result<()> {
    // Refuse before writing anything so a failed run leaves no partial set.
    if out.csv.is_some() && csv.is_none() {
        anyhow::bail!("this command produced no CSV stage");
    }
    if out.svg.is_some() && chart.is_none() {
        anyhow::bail!("this command produced no chart stage");
    }
    if let Some(path) = &out.json {
        write_atomic(path, report.to_json()?.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &out.csv {
        write_atomic(path, csv.expect("checked above").as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &out.svg {
        write_atomic(path, chart.expect("checked above").render().as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn offer_candidate(slot: &mut Option<FolnerCandidate>, cand: FolnerCandidate) {
    let better = match slot {
        None => true,
        Some(best) => cand.phi() < best.phi(),
    };
    if better {
        *slot = Some(cand);
    }
}

/// All lattice points of [0, side)^dim in lexicographic order.
fn lattice_box(ctx: &GroupContext, dim: usize, side: i64) -> Result<Vec<caylab::GroupElement>> {
    let count = (side as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
    if count > 1_000_000 {
        bail!("box {side}^{dim} has {count} points; choose a smaller side");
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut coords = vec![0i64; dim];
    loop {
        out.push(ctx.vector_element(coords.clone())?);
        let mut i = dim;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            coords[i] += 1;
            if coords[i] < side {
                break;
            }
            coords[i] = 0;
        }
    }
}

fn run_criterion(a: CriterionArgs) -> Result<u8> {
    if a.returns < 2 {
        bail!("--returns must be at least 2, one even step");
    }
    let limits = a.budgets.limits();
    let ctx = parse_group_spec(&a.target.group)?;
    let mspec = parse_multiset_spec(&ctx, &a.target.set)?;
    let s = effective_multiset(&ctx, &mspec, &limits)?;
    let w = s.weighted(&ctx)?;
    let symmetric = w.is_symmetric(&ctx)?;

    let mut rep = RunReport::new(
        "criterion",
        format_group_spec(&ctx),
        multiset_summary(&ctx, &a.target.set, &s, &w, symmetric),
        &limits,
    );
    println!(
        "criterion on {} with {} (size {}, {})",
        rep.group,
        a.target.set,
        s.size(),
        if symmetric { "symmetric" } else { "not symmetric" }
    );

    // Certified lower bounds on rho.
    let mut rho_lower: Option<f64> = None;
    let mut ladder_rows = Vec::new();
    if symmetric {
        let probs = return_probabilities(&ctx, &s, a.returns, &limits)?;
        ladder_rows = even_return_bounds(&probs);
        let est = rho_lower_from_returns(&probs)?;
        println!(
            "  rho lower (returns, best of {} even steps): {}",
            ladder_rows.len(),
            est.best
        );
        rho_lower = Some(est.best);
        rep.stages.return_ladder = Some(ladder_rows.iter().map(LadderRow::from).collect());
        rep.stages.rho_returns = Some(est);
    } else {
        let seed = resolve_seed(a.seed);
        rep.seed = Some(seed);
        let ball = build_ball(&ctx, &s, a.power_radius, &limits)?;
        let est = rho_power_iteration(&ball, &s, a.power_iters, seed)?;
        println!(
            "  rho lower (power iteration, {}): {}",
            match est.provenance {
                Provenance::CertifiedBound => "certified",
                _ => "heuristic",
            },
            est.best
        );
        if est.provenance.is_certified() {
            rho_lower = Some(est.best);
        }
        rep.stages.rho_power = Some(est);
        rep.notes
            .push("multiset is not symmetric; return-probability bounds do not apply".into());
    }

    // Exact oracle: the standard set on a free group.
    let mut rho_upper: Option<f64> = None;
    let mut rho_upper_exact = false;
    if let Some(k) = standard_free_rank(&ctx, &w)? {
        let value = tree_rho_exact(k)?;
        println!("  rho exact (tree oracle): {value}");
        rho_upper = Some(value);
        rho_upper_exact = true;
        if let Some(est) = rep.stages.rho_returns.take() {
            rep.stages.rho_returns = Some(est.with_exact(
                value,
                format!("sqrt({})/{} on the {}-regular tree", 2 * k - 1, k, 2 * k),
            ));
        }
    }

    // Explicit low-conductance sets.
    let mut best_cand: Option<FolnerCandidate> = None;
    let mut cand_rows: Vec<CandidateRow> = Vec::new();
    let mut explored = 0u64;
    if let Family::ZPower { dim } = ctx.family() {
        for side in 1..=a.box_max.max(1) {
            let set = lattice_box(&ctx, *dim, side)?;
            let cand = phi(&ctx, &w, &set)?;
            cand_rows.push(CandidateRow {
                label: format!("box:{side}"),
                size: cand.size(),
                phi: disp_ratio(cand.phi()),
                phi_float: to_f64(cand.phi()),
            });
            explored += 1;
            offer_candidate(&mut best_cand, cand);
        }
    }
    if a.search_size > 0 {
        let radius = if a.search_radius == 0 {
            a.search_size
        } else {
            a.search_radius
        };
        let ball = build_ball(&ctx, &s, radius, &limits)?;
        let outcome = folner_search(
            &ball,
            &w,
            SearchMode::Exhaustive {
                max_size: a.search_size,
                include_disconnected: false,
            },
            &limits,
        )?;
        for row in &outcome.per_size {
            cand_rows.push(CandidateRow {
                label: format!("search:{}", row.size),
                size: row.size,
                phi: disp_ratio(&row.phi),
                phi_float: to_f64(&row.phi),
            });
        }
        explored += outcome.explored;
        offer_candidate(&mut best_cand, outcome.best);
    }
    if let Some(cand) = &best_cand {
        println!(
            "  best explicit set: phi = {} ({} vertices)",
            disp_ratio(cand.phi()),
            cand.size()
        );
        rep.stages.conductance_search = Some(ConductanceSearch {
            rows: cand_rows,
            best: candidate_upper(cand),
            best_set: cand.set().iter().map(|g| ctx.format(g)).collect(),
            explored,
            provenance: Provenance::Exact,
        });
    }

    // Spectral-to-conductance transfer.
    let h_bounds = mohar_bounds(rho_lower, rho_upper, rho_upper_exact, w.nominal_size())?;
    match (&h_bounds.lower, &h_bounds.upper) {
        (Some(lo), Some(hi)) => println!("  h bounds: {} <= h <= {}", lo.value, hi.value),
        (Some(lo), None) => println!("  h bounds: h >= {}", lo.value),
        (None, Some(hi)) => println!("  h bounds: h <= {}", hi.value),
        (None, None) => {}
    }
    rep.stages.h_bounds = Some(h_bounds.clone());

    // The decision layer needs a certified upper bound on rho.
    let mut exit = 3u8;
    if let Some(rho) = rho_upper {
        let search = witness_power_search(&ctx, &s, rho, a.nmax)?;
        let check_h = search
            .found
            .and_then(|n| search.rows.iter().find(|r| r.n == n))
            .or_else(|| {
                search
                    .rows
                    .iter()
                    .max_by(|x, y| x.h_lower.partial_cmp(&y.h_lower).expect("finite bounds"))
            })
            .map(|r| r.h_lower)
            .unwrap_or(0.0);
        let check = criterion_check(check_h, Provenance::CertifiedBound);
        match search.found {
            Some(n) => println!(
                "  power search: h(S^n) > {} first at n = {} (h lower {})",
                check.threshold, n, check.h_lower
            ),
            None => println!(
                "  power search: no power up to {} clears {} (best h lower {})",
                a.nmax, check.threshold, check.h_lower
            ),
        }

        if let Some(n) = search.found {
            let row = search
                .rows
                .iter()
                .find(|r| r.n == n)
                .expect("found index is a row");
            let wn = s.power(&ctx, n, &limits)?;
            let pcb = bs_pc_bound(wn.nominal_size(), row.h_lower, Provenance::CertifiedBound)?;
            let rho_n = rho.powi(n as i32);
            let product = rho_n * pcb.value * wn.nominal_size_f64();
            let certified_product = rho_upper_exact && pcb.provenance.is_certified();
            println!("  pc bound at S^{}: p_c <= {}", n, pcb.value);
            println!(
                "  uniqueness product at n = {}: rho^n * pc * |S^n| = {} ({}, p_c < p_u {})",
                n,
                product,
                if product < 1.0 { "< 1" } else { ">= 1" },
                if certified_product && product < 1.0 {
                    "certified"
                } else {
                    "not certified"
                }
            );
            rep.stages.pc_bound_power = Some(PowerPcBound {
                n,
                nominal_size: wn.nominal_size_f64(),
                support: wn.support_len(),
                h_lower: row.h_lower,
                bound: pcb.clone(),
            });
            rep.stages.uniqueness_product = Some(UniquenessProduct {
                n,
                rho_upper_n: rho_n,
                pc_upper: pcb.value,
                nominal_size: wn.nominal_size_f64(),
                product,
                pc_lt_pu_certified: certified_product && product < 1.0,
                provenance: Provenance::CertifiedBound,
            });
        }

        if let Ok(bound) = bs_pc_bound_from(&h_bounds, w.nominal_size()) {
            println!("  pc bound at S: p_c <= {}", bound.value);
            rep.stages.pc_bound = Some(bound);
        }
        if let Some(k) = standard_free_rank(&ctx, &w)? {
            let h = tree_h_exact(k)?;
            let exact = bs_pc_bound_exact(w.nominal_size(), &h)?;
            println!(
                "  pc bound at S (exact h = {}): p_c <= {}",
                disp_ratio(&h),
                disp_ratio(&exact)
            );
            rep.stages.pc_bound_exact = Some(ExactPcBound {
                h: disp_ratio(&h),
                value: disp_ratio(&exact),
                value_float: to_f64(&exact),
                provenance: Provenance::Exact,
            });
        }

        let verdict = Verdict {
            certified: check.certified,
            passed: check.passed,
            summary: match search.found {
                Some(n) => format!("h(S^{n}) clears sqrt(1/2) with certified provenance"),
                None => format!("no power up to {} clears sqrt(1/2)", a.nmax),
            },
        };
        if verdict.passed && verdict.certified {
            exit = 0;
        }
        println!(
            "verdict: {}",
            if exit == 0 { "CERTIFIED" } else { "NOT CERTIFIED" }
        );
        rep.stages.criterion = Some(check);
        rep.stages.power_search = Some(search);
        rep.verdict = Some(verdict);
    } else {
        rep.notes.push(
            "no certified upper bound on rho is available for this group and multiset; \
             the criterion cannot be certified"
                .into(),
        );
        println!("  no certified upper bound on rho; criterion not certifiable");
        println!("verdict: NOT CERTIFIED");
    }

    let csv = (!ladder_rows.is_empty()).then(|| ladder_csv(&ladder_rows));
    let chart = criterion_chart(&rep);
    emit_outputs(&a.out, &rep, csv, chart)?;
    Ok(exit)
}

fn criterion_chart(rep: &RunReport) -> Option<Chart> {
    if let Some(search) = &rep.stages.power_search {
        let threshold = rep
            .stages
            .criterion
            .as_ref()
            .map(|c| c.threshold)
            .unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
        return Some(Chart {
            title: format!("transferred conductance bounds on {}", rep.group),
            x_label: "power n".into(),
            y_label: "h lower bound".into(),
            series: vec![Series {
                name: "h(S^n) lower".into(),
                points: search
                    .rows
                    .iter()
                    .map(|r| (r.n as f64, r.h_lower))
                    .collect(),
            }],
            band: None,
            rules: vec![Rule {
                value: threshold,
                label: "sqrt(1/2)".into(),
                vertical: false,
            }],
        });
    }
    if let Some(rows) = &rep.stages.return_ladder {
        let mut rules = Vec::new();
        if let Some(est) = &rep.stages.rho_returns {
            if let Some(exact) = &est.exact {
                rules.push(Rule {
                    value: exact.value,
                    label: "rho exact".into(),
                    vertical: false,
                });
            }
        }
        return Some(Chart {
            title: format!("return-probability ladder on {}", rep.group),
            x_label: "walk steps 2n".into(),
            y_label: "rho lower bound".into(),
            series: vec![Series {
                name: "p_2n^(1/2n)".into(),
                points: rows
                    .iter()
                    .map(|r| (2.0 * r.n as f64, r.lower_bound))
                    .collect(),
            }],
            band: None,
            rules,
        });
    }
    None
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid spec {spec:?} must be lo:hi:count");
    }
    let lo: f64 = parts[0].parse().context("bad grid lower endpoint")?;
    let hi: f64 = parts[1].parse().context("bad grid upper endpoint")?;
    let count: usize = parts[2].parse().context("bad grid count")?;
    if count == 0 {
        bail!("grid count must be at least 1");
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        bail!("grid endpoints must be finite with lo <= hi");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn run_percolate(a: PercolateArgs) -> Result<u8> {
    let limits = a.budgets.limits();
    let ctx = parse_group_spec(&a.target.group)?;
    let mspec = parse_multiset_spec(&ctx, &a.target.set)?;
    let s = effective_multiset(&ctx, &mspec, &limits)?;
    let w = s.weighted(&ctx)?;
    let symmetric = w.is_symmetric(&ctx)?;
    let seed = resolve_seed(a.seed);
    if a.samples == 0 {
        bail!("--samples must be at least 1");
    }

    let mut ps = a.ps.clone();
    if let Some(spec) = &a.grid {
        ps.extend(parse_grid(spec)?);
    }
    if ps.is_empty() && !a.pc {
        ps = (0..=20).map(|i| i as f64 / 20.0).collect();
    }
    for p in &ps {
        if !(0.0..=1.0).contains(p) {
            bail!("p = {p} is outside [0, 1]");
        }
    }
    ps.sort_by(|x, y| x.partial_cmp(y).expect("validated finite"));
    ps.dedup();

    let mut rep = RunReport::new(
        "percolate",
        format_group_spec(&ctx),
        multiset_summary(&ctx, &a.target.set, &s, &w, symmetric),
        &limits,
    );
    rep.seed = Some(seed);

    let ball = build_ball(&ctx, &s, a.radius, &limits)?;
    let summary = ball_summary(&ball)?;
    println!(
        "percolation on {} with {}: radius {}, {} vertices, {} edges, seed {}",
        rep.group, a.target.set, summary.radius, summary.vertices, summary.undirected_edges, seed
    );
    rep.stages.ball = Some(summary);

    let curve = if ps.is_empty() {
        None
    } else {
        let rows = theta_curve(&ball, &ps, a.samples, seed)?;
        for row in &rows {
            println!(
                "  theta({}) = {} in [{}, {}] ({} samples)",
                row.p, row.theta, row.ci_lo, row.ci_hi, row.n_samples
            );
        }
        Some(rows)
    };

    let pc_est = if a.pc {
        let est = pc_estimate(&ball, a.tau, a.samples, seed, a.iterations)?;
        println!(
            "  pc estimate (tau = {}): {} in [{}, {}] after {} bisection steps",
            est.tau, est.p_c, est.ci_lo, est.ci_hi, est.iterations
        );
        Some(est)
    } else {
        None
    };

    let pc_exact = match standard_free_rank(&ctx, &w)? {
        Some(k) => {
            let h = tree_h_exact(k)?;
            let bound = bs_pc_bound_exact(w.nominal_size(), &h)?;
            println!(
                "  edge-threshold bound (exact h = {}): p_c <= {}",
                disp_ratio(&h),
                disp_ratio(&bound)
            );
            Some(ExactPcBound {
                h: disp_ratio(&h),
                value: disp_ratio(&bound),
                value_float: to_f64(&bound),
                provenance: Provenance::Exact,
            })
        }
        None => None,
    };

    let probe_p = a
        .probe_p
        .or_else(|| pc_est.as_ref().map(|e| e.p_c))
        .or_else(|| {
            let positive: Vec<f64> = ps.iter().copied().filter(|p| *p > 0.0).collect();
            positive.get(positive.len() / 2).copied()
        });
    if let Some(p) = probe_p {
        if !(0.0..=1.0).contains(&p) {
            bail!("probe p = {p} is outside [0, 1]");
        }
        let probe = uniqueness_probe(&ball, p, a.samples, seed)?;
        println!(
            "  uniqueness probe at p = {}: mean boundary clusters {}, multi fraction {}",
            probe.p, probe.mean, probe.multi_fraction
        );
        rep.stages.uniqueness_probe = Some(probe);
    }

    let csv = match (&curve, &pc_est) {
        (Some(rows), _) => Some(theta_csv(rows)),
        (None, Some(est)) => Some(evaluations_csv(est)),
        (None, None) => None,
    };

    let mut rules = Vec::new();
    if let Some(exact) = &pc_exact {
        rules.push(Rule {
            value: exact.value_float,
            label: format!("pc bound {}", exact.value),
            vertical: true,
        });
    }
    if let Some(est) = &pc_est {
        rules.push(Rule {
            value: est.p_c,
            label: "pc estimate".into(),
            vertical: true,
        });
        rules.push(Rule {
            value: est.tau,
            label: format!("tau {}", est.tau),
            vertical: false,
        });
    }
    let chart = {
        let (points, band) = match (&curve, &pc_est) {
            (Some(rows), _) => (
                rows.iter().map(|r| (r.p, r.theta)).collect::<Vec<_>>(),
                Some(Band {
                    points: rows.iter().map(|r| (r.p, r.ci_lo, r.ci_hi)).collect(),
                }),
            ),
            (None, Some(est)) => (est.evaluations.clone(), None),
            (None, None) => (Vec::new(), None),
        };
        if points.is_empty() {
            None
        } else {
            Some(Chart {
                title: format!("theta on {} (radius {})", rep.group, a.radius),
                x_label: "p".into(),
                y_label: "theta".into(),
                series: vec![Series {
                    name: "theta hat".into(),
                    points,
                }],
                band,
                rules,
            })
        }
    };

    rep.stages.theta_curve = curve;
    rep.stages.pc_estimate = pc_est;
    rep.stages.pc_bound_exact = pc_exact;
    emit_outputs(&a.out, &rep, csv, chart)?;
    Ok(0)
}

/// Averaging-set spec for the witness chain: box:N on lattices, ball:R
/// anywhere.
fn parse_averaging_set(
    ctx: &GroupContext,
    s: &GeneratorMultiset,
    spec: &str,
    limits: &Limits,
) -> Result<(String, Vec<caylab::GroupElement>)> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| anyhow::anyhow!("averaging spec {spec:?} needs kind:arg (box:N or ball:R)"))?;
    match kind {
        "box" => {
            let side: i64 = arg.parse().context("bad box side")?;
            if side < 1 {
                bail!("box side must be at least 1");
            }
            let dim = match ctx.family() {
                Family::ZPower { dim } => *dim,
                _ => bail!("box averaging sets need a lattice group (zd:D)"),
            };
            Ok((format!("box:{side}"), lattice_box(ctx, dim, side)?))
        }
        "ball" => {
            let radius: usize = arg.parse().context("bad ball radius")?;
            let ball = build_ball(ctx, s, radius, limits)?;
            let set = (0..ball.graph().vertex_count() as u32)
                .map(|i| ball.vertex_element(i).clone())
                .collect();
            Ok((format!("ball:{radius}"), set))
        }
        other => bail!("unknown averaging set kind {other:?}; use box:N or ball:R"),
    }
}

fn run_witness(a: WitnessArgs) -> Result<u8> {
    let limits = a.budgets.limits();
    if a.paradoxical_f2 {
        return run_witness_paradoxical(&a, &limits);
    }
    let group = a
        .group
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("pass --paradoxical-f2, or --group with --iterate"))?;
    let iterate = a
        .iterate
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("--iterate is required when --group is given"))?;
    if a.m == 0 {
        bail!("--m must be at least 1");
    }

    let ctx = parse_group_spec(group)?;
    let mspec = parse_multiset_spec(&ctx, &a.set)?;
    let s = effective_multiset(&ctx, &mspec, &limits)?;
    let w = s.weighted(&ctx)?;
    let symmetric = w.is_symmetric(&ctx)?;

    let mut rep = RunReport::new(
        "witness",
        format_group_spec(&ctx),
        multiset_summary(&ctx, &a.set, &s, &w, symmetric),
        &limits,
    );

    let (label, set) = parse_averaging_set(&ctx, &s, iterate, &limits)?;
    let cand = phi(&ctx, &w, &set)?;
    let start = delta_start_witness(&ctx, &s, &limits)?;
    println!(
        "witness chain on {} with {}: start nu = {}, sup = {}",
        rep.group,
        a.set,
        disp_ratio(start.normalization()),
        disp_ratio(start.sup())
    );
    println!(
        "  averaging set {}: {} elements, overlap k = {}, shrink factor = {}",
        label,
        cand.size(),
        disp_ratio(cand.overlap()),
        disp_ratio(cand.phi())
    );

    let chain = iterate_chain(&ctx, &start, &cand, a.m, &limits)?;
    for (i, (norm, sup)) in chain.norms.iter().zip(&chain.sups).enumerate() {
        println!(
            "  step {}: ||H|| = {}, sup = {}",
            i + 1,
            disp_ratio(norm),
            disp_ratio(sup)
        );
    }
    let final_norm = chain.norms.last().expect("m >= 1");
    let final_sup = chain.sups.last().expect("m >= 1");
    println!(
        "  chain bound nu * prod(1 - k) = {} ({})",
        disp_ratio(&chain.bound),
        to_f64(&chain.bound)
    );
    println!(
        "  measured ||H_{}|| = {} {} {}: bound {}",
        a.m,
        disp_ratio(final_norm),
        if chain.bound_holds { "<=" } else { ">" },
        disp_ratio(&chain.bound),
        if chain.bound_holds { "holds" } else { "FAILS" }
    );

    let stage = ChainStage {
        m: a.m,
        averaging_set: CandidateRow {
            label,
            size: cand.size(),
            phi: disp_ratio(cand.phi()),
            phi_float: to_f64(cand.phi()),
        },
        overlap: disp_ratio(cand.overlap()),
        start_normalization: disp_ratio(start.normalization()),
        start_sup: disp_ratio(start.sup()),
        factors: chain.factors.iter().map(disp_ratio).collect(),
        norms: chain.norms.iter().map(disp_ratio).collect(),
        sups: chain.sups.iter().map(disp_ratio).collect(),
        bound: disp_ratio(&chain.bound),
        bound_float: to_f64(&chain.bound),
        bound_holds: chain.bound_holds,
        final_sup: disp_ratio(final_sup),
        provenance: Provenance::Exact,
    };
    let csv = Some(chain_csv(&stage));
    let chart = Some(Chart {
        title: format!("averaging chain on {}", rep.group),
        x_label: "step".into(),
        y_label: "||H||".into(),
        series: vec![Series {
            name: "measured norm".into(),
            points: chain
                .norms
                .iter()
                .enumerate()
                .map(|(i, n)| ((i + 1) as f64, to_f64(n)))
                .collect(),
        }],
        band: None,
        rules: vec![Rule {
            value: to_f64(&chain.bound),
            label: "chain bound".into(),
            vertical: false,
        }],
    });
    let exit = if chain.bound_holds { 0 } else { 3 };
    rep.stages.chain = Some(stage);
    rep.stages.witness =
        Some(serde_json::from_str(&witness_to_json(&ctx, &chain.witness)?)?);
    emit_outputs(&a.out, &rep, csv, chart)?;
    Ok(exit)
}

fn run_witness_paradoxical(a: &WitnessArgs, limits: &Limits) -> Result<u8> {
    let (decomp, witness) = paradoxical_witness_f2();
    let ctx = GroupContext::free(2)?;
    decomp.verify(&ctx, limits)?;
    let w = ctx.standard_symmetric().weighted(&ctx)?;

    let mut rep = RunReport::new(
        "witness",
        format_group_spec(&ctx),
        multiset_summary(
            &ctx,
            "std",
            &ctx.standard_symmetric(),
            &w,
            true,
        ),
        limits,
    );

    let a_gen = ctx.generator(0);
    let b_gen = ctx.generator(1);
    let a_inv = ctx.inv(&a_gen)?;
    let b_inv = ctx.inv(&b_gen)?;
    let pieces = vec![
        format!("cone({})", ctx.format(&a_gen)),
        format!("cone({})", ctx.format(&a_inv)),
        format!("cone({})", ctx.format(&b_gen)),
        format!("cone({})", ctx.format(&b_inv)),
        format!("point({})", ctx.format(&ctx.identity())),
    ];
    let checks = vec![
        CheckItem {
            name: "pieces partition the group".into(),
            passed: true,
        },
        CheckItem {
            name: "translated A-pieces retile the group".into(),
            passed: true,
        },
        CheckItem {
            name: "translated B-pieces retile the group".into(),
            passed: true,
        },
    ];

    let half = from_frac(1, 2);
    let scaled_pairs = decomp.witness_pairs(&ctx, &half, limits)?;
    let scaled = caylab::dixmier::DixmierWitness::new(&ctx, scaled_pairs, limits)?;

    println!(
        "paradoxical decomposition of {}: {} moving pieces (Tarski count {}), identity remainder",
        rep.group,
        decomp.tarski_count(),
        decomp.tarski_count()
    );
    for check in &checks {
        println!("  check: {}: ok", check.name);
    }
    println!(
        "  witness: nu = {}, sup H = {}, epsilon = {}",
        disp_ratio(witness.normalization()),
        disp_ratio(witness.sup()),
        witness
            .epsilon()
            .map(disp_ratio)
            .unwrap_or_else(|| "none".into())
    );
    println!(
        "  unit-piece form (scale {}): sup = {}, norm = {}",
        disp_ratio(&half),
        disp_ratio(scaled.sup()),
        disp_ratio(scaled.normalization())
    );

    let stage = ParadoxicalStage {
        tarski_count: decomp.tarski_count(),
        pieces,
        a_translators: decomp.a_translators().iter().map(|g| ctx.format(g)).collect(),
        b_translators: decomp.b_translators().iter().map(|g| ctx.format(g)).collect(),
        checks,
        normalization: disp_ratio(witness.normalization()),
        sup: disp_ratio(witness.sup()),
        sup_float: to_f64(witness.sup()),
        epsilon: witness
            .epsilon()
            .map(disp_ratio)
            .unwrap_or_else(|| "0".into()),
        scaled: ScaledWitness {
            scale: disp_ratio(&half),
            sup: disp_ratio(scaled.sup()),
            norm: disp_ratio(scaled.normalization()),
        },
        provenance: Provenance::Exact,
    };

    // H over the identity and the unit sphere, a small exact picture of
    // the witness.
    let eval_points = vec![ctx.identity(), a_gen, a_inv, b_gen, b_inv];
    let mut points = Vec::new();
    for (i, g) in eval_points.iter().enumerate() {
        points.push((i as f64, to_f64(&witness.h().eval(&ctx, g)?)));
    }
    let chart = Some(Chart {
        title: "paradoxical witness H on the unit ball".into(),
        x_label: "element index (e, a, a^-1, b, b^-1)".into(),
        y_label: "H".into(),
        series: vec![Series {
            name: "H value".into(),
            points,
        }],
        band: None,
        rules: vec![Rule {
            value: to_f64(witness.sup()),
            label: "sup".into(),
            vertical: false,
        }],
    });

    let csv = {
        let mut out = String::from("element,h_value\n");
        for g in &eval_points {
            out.push_str(&format!(
                "{},{}\n",
                ctx.format(g),
                disp_ratio(&witness.h().eval(&ctx, g)?)
            ));
        }
        Some(out)
    };

    rep.stages.paradoxical = Some(stage);
    rep.stages.witness = Some(serde_json::from_str(&witness_to_json(&ctx, &witness)?)?);
    emit_outputs(&a.out, &rep, csv, chart)?;
    Ok(0)
}

fn run_dump_ball(a: DumpBallArgs) -> Result<u8> {
    let limits = a.budgets.limits();
    let ctx = parse_group_spec(&a.target.group)?;
    let mspec = parse_multiset_spec(&ctx, &a.target.set)?;
    let s = effective_multiset(&ctx, &mspec, &limits)?;
    let ball = build_ball(&ctx, &s, a.radius, &limits)?;
    let text = ball.dump()?;
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}
