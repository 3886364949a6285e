//! `chorex`: audit, construct and optimize chore divisions from the command line.
//!
//! Every command prints one JSON document on stdout. Exit status is 0 when the
//! command's primary assertion holds, 1 on a domain error or a failed
//! assertion, and 2 on a usage error.

use chorex_core::approx::{approx_optimal, exact_instance, parse_oracle_spec, ApproxMode, OracleSpec};
use chorex_core::error::{ApproxError, OptimizeError, OracleError, RwError};
use chorex_core::fairness::audit;
use chorex_core::fixtures::{reference_example, ExampleId};
use chorex_core::model::validate_allocation;
use chorex_core::optimize::{build_lp, optimal_fair_allocation, LpMode};
use chorex_core::oracle::{
    random_continuous_pwl_instance, random_pwc_instance, random_pwl_instance, search_counterexample_on, seeded_rng,
    Breaks, GridSpec, PropertySpec,
};
use chorex_core::protocols::{lower_bound_instance, run_two_agent_protocol, sandwich_allocation, uniform_allocation, zero_cut_instance};
use chorex_core::rational::{format_rational, parse_rational};
use chorex_core::roots::Root;
use chorex_core::rw::{parse_trace, run_trace, RwSession};
use chorex_core::schema::{looks_like_allocation, parse_allocation, parse_instance_with, AllocationDoc, InstanceDoc};
use chorex_core::{audit_exact, Allocation, Instance, ModelError, Normalization, Notion, ProtocolError, Rational};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::Read;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chorex", version, about = "Fair division of a divisible chore under externalities")]
struct Cli {
    /// Suppress the one-line summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Load {
    /// Rescale each agent's densities to total 1 instead of rejecting the instance.
    #[arg(long)]
    normalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Audit an allocation against an instance. The two files may come in either order.
    Check {
        first: String,
        second: String,
        #[arg(long, default_value = "0")]
        eps: String,
        /// Notions that must hold, comma separated.
        #[arg(long, default_value = "prop,swap-ef,swap-stable")]
        notions: String,
        #[command(flatten)]
        load: Load,
    },
    /// Optimal fair allocation by exact linear programming.
    Solve {
        instance: String,
        #[arg(long, default_value = "prop-swapef")]
        mode: String,
        /// Tolerance for prop-eps-swapef.
        #[arg(long)]
        eps: Option<String>,
        /// Print the LP in plain text instead of solving it.
        #[arg(long)]
        emit_lp: bool,
        #[command(flatten)]
        load: Load,
    },
    /// Run a constructive protocol.
    Protocol {
        #[arg(value_enum)]
        kind: ProtocolKind,
        instance: String,
        #[command(flatten)]
        load: Load,
    },
    /// Emit instance documents.
    Gen {
        #[command(subcommand)]
        what: Gen,
    },
    /// Approximately optimal allocation for Lipschitz densities.
    Approx {
        spec: String,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value = "prop")]
        mode: String,
    },
    /// Replay a Robertson-Webb query script.
    Rw {
        instance: String,
        #[arg(long)]
        trace: String,
        #[command(flatten)]
        load: Load,
    },
    /// Search random instances for an allocation with the given profile.
    Search {
        #[arg(long, default_value = "")]
        require: String,
        #[arg(long, default_value = "")]
        forbid: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        g: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        /// Also enumerate allocations that leave cells unallocated.
        #[arg(long)]
        partial: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolKind {
    TwoAgent,
    Uniform,
    Sandwich,
}

#[derive(Subcommand)]
enum Gen {
    /// Instance on which the contiguous allocation is proportional but not swap envy-free.
    #[command(name = "thm3")]
    ContiguousGap {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1/10")]
        eps: String,
    },
    /// Reference instance: ex1, ex2, ex3, ex4 or thm8.
    Example {
        id: String,
        /// Agent count for ex1.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Emit the whole fixture (allocation, recomputed properties, discrepancies).
        #[arg(long)]
        fixture: bool,
    },
    /// Instance with a swap-stable zero-cut allocation.
    ZeroCut {
        #[arg(long)]
        n: usize,
    },
    /// Seeded random normalized instance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "constant")]
        shape: Shape,
        /// Random breakpoints instead of k/m.
        #[arg(long)]
        random_breaks: bool,
    },
    /// Oracle spec wrapping an exact piecewise-linear instance.
    Oracle {
        instance: String,
        #[command(flatten)]
        load: Load,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Constant,
    Linear,
    Continuous,
}

struct Failure {
    kind: &'static str,
    message: String,
    details: Value,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), details: Value::Null }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let msg = e.to_string();
        match e {
            ModelError::Normalization { agent, sum } => {
                Failure::new("normalization", msg).with(json!({"agent": agent, "sum": format_rational(&sum)}))
            }
            ModelError::NegativeDensity { agent, holder, .. } => {
                Failure::new("negative_density", msg).with(json!({"agent": agent, "holder": holder}))
            }
            ModelError::Dimension { expected, found } => {
                Failure::new("dimension", msg).with(json!({"expected": expected, "found": found}))
            }
            ModelError::Number(_) => Failure::new("number", msg),
            ModelError::Schema(_) | ModelError::ReversedInterval { .. } => Failure::new("schema", msg),
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Model(m) => m.into(),
            other => Failure::new("protocol", other.to_string()),
        }
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        let msg = e.to_string();
        match e {
            OptimizeError::InfeasibleModel { certificate } => Failure::new("infeasible", msg)
                .with(json!({"certificate": certificate.iter().map(format_rational).collect::<Vec<_>>()})),
            OptimizeError::Unbounded => Failure::new("unbounded", msg),
            OptimizeError::InvalidFractions(_) => Failure::new("fractions", msg),
            OptimizeError::Model(m) => m.into(),
        }
    }
}

impl From<ApproxError> for Failure {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::Optimize(o) => o.into(),
            ApproxError::Model(m) => m.into(),
            ApproxError::OracleContract { agent, holder, .. } => {
                Failure::new("oracle_contract", e.to_string()).with(json!({"agent": agent, "holder": holder}))
            }
            other => Failure::new("approx", other.to_string()),
        }
    }
}

impl From<RwError> for Failure {
    fn from(e: RwError) -> Self {
        match e {
            RwError::Script { line, .. } => Failure::new("trace", e.to_string()).with(json!({"line": line})),
            other => Failure::new("query", other.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let msg = e.to_string();
        match e {
            OracleError::NotFound { budget } => Failure::new("not_found", msg).with(json!({"budget": budget})),
            OracleError::BudgetExceeded { .. } => Failure::new("budget", msg),
            OracleError::NoFeasible => Failure::new("no_feasible", msg),
            OracleError::BadSpec(_) => Failure::new("spec", msg),
            OracleError::Model(m) => m.into(),
        }
    }
}

/// A report and whether the command's assertion holds.
struct Report {
    doc: Value,
    holds: bool,
    summary: String,
}

fn read_input(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    let result = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    result.map_err(|e| Failure::new("io", format!("{path}: {e}")))?;
    Ok(text)
}

fn rational(text: &str, what: &str) -> Result<Rational, Failure> {
    parse_rational(text).map_err(|e| Failure::new("usage", format!("--{what}: {e}")))
}

/// Accepts a bare instance document or one wrapped as `{"instance": ...}`.
fn instance_from(text: &str, load: &Load) -> Result<(Instance, Value), Failure> {
    let mode = if load.normalize { Normalization::Rescale } else { Normalization::Require };
    let value: Value = serde_json::from_str(text).map_err(|e| Failure::new("schema", e.to_string()))?;
    let inner = match value.get("instance") {
        Some(v) if value.get("densities").is_none() => v.to_string(),
        _ => text.to_string(),
    };
    let instance = parse_instance_with(&inner, mode)?;
    let scale: Vec<String> = instance.scale_factors().iter().map(format_rational).collect();
    let meta = if load.normalize { json!({"scale_factors": scale}) } else { Value::Null };
    Ok((instance, meta))
}

fn load_instance(path: &str, load: &Load) -> Result<(Instance, Value), Failure> {
    instance_from(&read_input(path)?, load)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("documents serialize")
}

fn alloc_doc(a: &Allocation) -> Value {
    to_value(&AllocationDoc::from_allocation(a))
}

fn root_doc(root: &Root) -> Value {
    match root {
        Root::Exact(r) => json!({"exact": format_rational(r)}),
        Root::Irrational { lo, hi } => json!({"irrational": {"lo": format_rational(lo), "hi": format_rational(hi)}}),
    }
}

fn check(first: &str, second: &str, eps: &str, notions: &str, load: &Load) -> Result<Report, Failure> {
    let (a, b) = (read_input(first)?, read_input(second)?);
    let (alloc_text, inst_text) = if looks_like_allocation(&a) && !looks_like_allocation(&b) { (a, b) } else { (b, a) };
    let (instance, meta) = instance_from(&inst_text, load)?;
    let alloc = parse_allocation(&alloc_text)?;
    let eps = rational(eps, "eps")?;
    let wanted = PropertySpec::parse_list(notions)?;
    let validity = validate_allocation(&instance, &alloc);
    if !validity.valid {
        return Ok(Report {
            summary: format!(
                "invalid allocation: {} overlaps, {} out of range",
                validity.overlaps.len(),
                validity.out_of_range.len()
            ),
            doc: json!({"validity": to_value(&validity)}),
            holds: false,
        });
    }
    let report = audit(&instance, &alloc, &eps)?;
    let holds = report.all_hold(&wanted);
    let failing: Vec<Notion> = wanted.iter().copied().filter(|&n| !report.holds(n)).collect();
    Ok(Report {
        summary: if holds { "all requested notions hold".into() } else { format!("failing: {failing:?}") },
        doc: json!({
            "validity": to_value(&validity),
            "requested": wanted,
            "holds": holds,
            "report": to_value(&report),
            "normalization": meta,
        }),
        holds,
    })
}

fn solve(path: &str, mode: &str, eps: Option<&str>, emit_lp: bool, load: &Load) -> Result<Report, Failure> {
    let (instance, meta) = load_instance(path, load)?;
    let eps = eps.map(|e| rational(e, "eps")).transpose()?;
    let mode = LpMode::parse(mode, eps).map_err(|e| Failure::new("usage", e))?;
    if emit_lp {
        let problem = build_lp(&instance, mode);
        return Ok(Report {
            summary: format!("{} rows, {} variables", problem.rows.len(), problem.num_vars()),
            doc: Value::String(problem.emit_text()),
            holds: true,
        });
    }
    let opt = optimal_fair_allocation(&instance, mode.clone())?;
    let holds = mode.requirements().iter().all(|(n, _)| opt.report.holds(*n));
    Ok(Report {
        summary: format!("{} optimum {}", mode.label(), format_rational(&opt.objective)),
        doc: json!({
            "mode": mode.label(),
            "status": "optimal",
            "objective": format_rational(&opt.objective),
            "fractions": to_value(&opt.fractions),
            "allocation": alloc_doc(&opt.allocation),
            "report": to_value(&opt.report),
            "normalization": meta,
        }),
        holds,
    })
}

fn protocol(kind: ProtocolKind, path: &str, load: &Load) -> Result<Report, Failure> {
    let (instance, meta) = load_instance(path, load)?;
    let (name, alloc, extra, guarantee) = match kind {
        ProtocolKind::TwoAgent => {
            let out = run_two_agent_protocol(&instance)?;
            let extra = json!({"balance_point": root_doc(&out.balance_point), "first_took_left": out.first_took_left});
            ("two-agent", out.allocation, extra, vec![Notion::Proportional, Notion::SwapEf])
        }
        ProtocolKind::Uniform => ("uniform", uniform_allocation(&instance)?, Value::Null, vec![Notion::SwapStable]),
        ProtocolKind::Sandwich => ("sandwich", sandwich_allocation(&instance), Value::Null, vec![Notion::SwapStable]),
    };
    let report = audit_exact(&instance, &alloc)?;
    let holds = report.all_hold(&guarantee);
    Ok(Report {
        summary: format!("{name}: {} cuts, guarantee {}", report.cuts, if holds { "holds" } else { "fails" }),
        doc: json!({
            "protocol": name,
            "allocation": alloc_doc(&alloc),
            "report": to_value(&report),
            "guarantee": guarantee,
            "holds": holds,
            "details": extra,
            "normalization": meta,
        }),
        holds,
    })
}

fn gen(what: &Gen) -> Result<Report, Failure> {
    let instance_doc = |inst: &Instance| to_value(&InstanceDoc::from_instance(inst));
    let (doc, summary) = match what {
        Gen::ContiguousGap { n, eps } => {
            let inst = lower_bound_instance(*n, &rational(eps, "eps")?)?;
            (instance_doc(&inst), format!("lower-bound instance, n = {n}"))
        }
        Gen::Example { id, n, fixture } => {
            let example = ExampleId::parse(id, *n).ok_or_else(|| Failure::new("usage", format!("unknown example {id:?}")))?;
            let fx = reference_example(example);
            let doc = fx.document();
            if *fixture {
                (to_value(&doc), format!("fixture {}", fx.id))
            } else {
                (to_value(&doc.instance), format!("instance {}", fx.id))
            }
        }
        Gen::ZeroCut { n } => {
            let (inst, alloc) = zero_cut_instance(*n)?;
            (json!({"instance": instance_doc(&inst), "allocation": alloc_doc(&alloc)}), format!("zero-cut instance, n = {n}"))
        }
        Gen::Random { n, m, seed, shape, random_breaks } => {
            if *n == 0 || *m == 0 {
                return Err(Failure::new("usage", "need n >= 1 and m >= 1"));
            }
            let mut rng = seeded_rng(*seed);
            let breaks = if *random_breaks { Breaks::Random } else { Breaks::Equal };
            let inst = match shape {
                Shape::Constant => random_pwc_instance(&mut rng, *n, *m, breaks),
                Shape::Linear => random_pwl_instance(&mut rng, *n, *m, breaks),
                Shape::Continuous => random_continuous_pwl_instance(&mut rng, *n, *m, breaks),
            };
            (instance_doc(&inst), format!("random instance n = {n}, m = {m}, seed {seed}"))
        }
        Gen::Oracle { instance, load } => {
            let (inst, _) = load_instance(instance, load)?;
            let spec = OracleSpec::from_instance(&inst, &Rational::new(1.into(), 100.into()));
            (to_value(&spec), format!("oracle spec, K = {}", spec.lipschitz))
        }
    };
    Ok(Report { doc, holds: true, summary })
}

fn approx(path: &str, eps: &str, mode: &str) -> Result<Report, Failure> {
    let spec = parse_oracle_spec(&read_input(path)?)?;
    let oracles = spec.oracles()?;
    let eps = rational(eps, "eps")?;
    let mode = ApproxMode::parse(mode).ok_or_else(|| Failure::new("usage", format!("unknown mode {mode:?}")))?;
    let out = approx_optimal(&oracles, &eps, mode)?;
    let holds = match mode {
        ApproxMode::Prop => out.true_proportional(),
        ApproxMode::SwapEf => out.true_swap_ef(),
    };
    let d = &out.discretization;
    let exact = match exact_instance(&oracles) {
        Some(Ok(inst)) => {
            let lp_mode = match mode {
                ApproxMode::Prop => LpMode::Proportional,
                ApproxMode::SwapEf => LpMode::ProportionalSwapEf,
            };
            let optimum = optimal_fair_allocation(&inst, lp_mode)?;
            let report = audit_exact(&inst, &out.allocation)?;
            json!({"optimum": format_rational(&optimum.objective), "report": to_value(&report)})
        }
        _ => Value::Null,
    };
    Ok(Report {
        summary: format!(
            "{} cells, true social cost {:.6}, guarantee {}",
            d.subinterval_count,
            out.audit.social_cost,
            if holds { "holds" } else { "fails" }
        ),
        doc: json!({
            "mode": mode,
            "eps": format_rational(&eps),
            "allocation": alloc_doc(&out.allocation),
            "discrete_objective": format_rational(&out.discrete_objective),
            "discrete_report": to_value(&out.discrete_report),
            "discretization": {
                "cells": d.subinterval_count,
                "cell_width": format_rational(&d.cell_width),
                "grid_exponent": d.grid.a,
                "grid_top": format_rational(&d.grid.range_top),
                "band": format_rational(&d.band),
                "lipschitz": format_rational(&d.lipschitz),
                "oracle_evaluations": d.oracle_evaluations,
            },
            "efficiency_slack": format_rational(&out.efficiency_slack),
            "gap_note": out.gap_note(),
            "audit": to_value(&out.audit),
            "holds": holds,
            "exact": exact,
        }),
        holds,
    })
}

fn rw(path: &str, trace: &str, load: &Load) -> Result<Report, Failure> {
    let (instance, _) = load_instance(path, load)?;
    let queries = parse_trace(&read_input(trace)?)?;
    let mut session = RwSession::new(&instance);
    let answers = run_trace(&mut session, &queries);
    let errors = answers.iter().filter(|a| a.error.is_some()).count();
    let ledger = session.query_count();
    Ok(Report {
        summary: format!("{} queries, {errors} errors", answers.len()),
        doc: json!({"answers": to_value(&answers), "ledger": to_value(&ledger)}),
        holds: errors == 0,
    })
}

#[allow(clippy::too_many_arguments)]
fn search(require: &str, forbid: &str, n: usize, m: usize, g: usize, seed: u64, budget: u64, partial: bool) -> Result<Report, Failure> {
    let spec = PropertySpec::new(PropertySpec::parse_list(require)?, PropertySpec::parse_list(forbid)?)?;
    let grid = if partial { GridSpec::partial(g)? } else { GridSpec::new(g)? };
    let w = search_counterexample_on(&spec, n, m, grid, seed, budget)?;
    let report = audit_exact(&w.instance, &w.allocation)?;
    let holds = spec.accepts(|x| report.holds(x));
    Ok(Report {
        summary: format!("witness after {} allocations on {} instances", w.allocations_examined, w.instances_tried),
        doc: json!({
            "spec": to_value(&spec),
            "instance": to_value(&InstanceDoc::from_instance(&w.instance)),
            "allocation": alloc_doc(&w.allocation),
            "report": to_value(&report),
            "instances_tried": w.instances_tried,
            "allocations_examined": w.allocations_examined,
            "verified": holds,
        }),
        holds,
    })
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    match &cli.command {
        Command::Check { first, second, eps, notions, load } => check(first, second, eps, notions, load),
        Command::Solve { instance, mode, eps, emit_lp, load } => solve(instance, mode, eps.as_deref(), *emit_lp, load),
        Command::Protocol { kind, instance, load } => protocol(*kind, instance, load),
        Command::Gen { what } => gen(what),
        Command::Approx { spec, eps, mode } => approx(spec, eps, mode),
        Command::Rw { instance, trace, load } => rw(instance, trace, load),
        Command::Search { require, forbid, n, m, g, seed, budget, partial } => {
            search(require, forbid, *n, *m, *g, *seed, *budget, *partial)
        }
    }
}

/// Closed pipes (`| head`) are not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            match &report.doc {
                Value::String(text) => emit(text),
                doc => emit(&format!("{}\n", serde_json::to_string_pretty(doc).expect("json"))),
            }
            if !cli.quiet {
                eprintln!("{}", report.summary);
            }
            if report.holds {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            let code = if f.kind == "usage" { 2 } else { 1 };
            let doc = json!({"error": {"kind": f.kind, "message": f.message, "details": f.details}});
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")));
            if !cli.quiet {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(code)
        }
    }
}
