//! Optimal allocations over the refinement intervals: the greedy unconstrained
//! optimum and the fractional linear program with fairness rows.

pub mod simplex;

use crate::error::OptimizeError;
use crate::fairness::{fair_share, FairnessReport, FairnessVerdict, Notion, ValueTensor};
use crate::model::{count_cuts, Allocation, Instance, Interval, Piece};
use crate::rational::{format_rational, int, serde_str_matrix, Rational};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use simplex::{Outcome, Row, Sense};

/// `x[i][k]` is the fraction of refinement interval `k` given to agent `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionMatrix {
    #[serde(with = "serde_str_matrix")]
    pub x: Vec<Vec<Rational>>,
}

impl FractionMatrix {
    pub fn new(x: Vec<Vec<Rational>>) -> Self {
        Self { x }
    }

    /// Every agent gets `1/n` of every interval.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            x: vec![vec![fair_share(n); m]; n],
        }
    }

    /// Whole interval `k` to agent `owner[k]`.
    pub fn from_owners(n: usize, owners: &[usize]) -> Self {
        let mut x = vec![vec![Rational::zero(); owners.len()]; n];
        for (k, &i) in owners.iter().enumerate() {
            x[i][k] = Rational::one();
        }
        Self { x }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), OptimizeError> {
        if self.x.len() != n || self.x.iter().any(|r| r.len() != m) {
            return Err(OptimizeError::InvalidFractions(format!("expected a {n}x{m} matrix")));
        }
        for k in 0..m {
            let mut sum = Rational::zero();
            for i in 0..n {
                let v = &self.x[i][k];
                if v.is_negative() {
                    return Err(OptimizeError::InvalidFractions(format!(
                        "x[{i}][{k}] = {v} is negative"
                    )));
                }
                sum += v;
            }
            if !sum.is_one() {
                return Err(OptimizeError::InvalidFractions(format!(
                    "column {k} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    fn flatten(&self) -> Vec<Rational> {
        self.x.iter().flatten().cloned().collect()
    }

    fn unflatten(values: &[Rational], n: usize, m: usize) -> Self {
        Self {
            x: (0..n).map(|i| values[i * m..(i + 1) * m].to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "epsilon", rename_all = "kebab-case")]
pub enum LpMode {
    Unconstrained,
    #[serde(rename = "prop")]
    Proportional,
    #[serde(rename = "prop-swapef")]
    ProportionalSwapEf,
    /// Swap-EF rows relaxed by the given right-hand side.
    #[serde(rename = "prop-eps-swapef", with = "crate::rational::serde_str")]
    ProportionalEpsSwapEf(Rational),
    /// Proportional + swap-EF + one row per agent and unordered pair.
    SwapStable,
}

impl LpMode {
    pub fn parse(text: &str, eps: Option<Rational>) -> Result<Self, String> {
        Ok(match text {
            "unconstrained" => LpMode::Unconstrained,
            "prop" => LpMode::Proportional,
            "prop-swapef" => LpMode::ProportionalSwapEf,
            "swap-stable" => LpMode::SwapStable,
            "prop-eps-swapef" => match eps {
                Some(e) if !e.is_negative() => LpMode::ProportionalEpsSwapEf(e),
                Some(e) => return Err(format!("--eps must be non-negative, got {e}")),
                None => return Err("prop-eps-swapef needs --eps".into()),
            },
            other => return Err(format!("unknown mode {other:?}")),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            LpMode::Unconstrained => "unconstrained",
            LpMode::Proportional => "prop",
            LpMode::ProportionalSwapEf => "prop-swapef",
            LpMode::ProportionalEpsSwapEf(_) => "prop-eps-swapef",
            LpMode::SwapStable => "swap-stable",
        }
    }

    /// Notions the mode enforces, with the tolerance each is enforced at.
    pub fn requirements(&self) -> Vec<(Notion, Rational)> {
        let zero = Rational::zero;
        match self {
            LpMode::Unconstrained => vec![],
            LpMode::Proportional => vec![(Notion::Proportional, zero())],
            LpMode::ProportionalSwapEf => {
                vec![(Notion::Proportional, zero()), (Notion::SwapEf, zero())]
            }
            LpMode::ProportionalEpsSwapEf(e) => {
                vec![(Notion::Proportional, zero()), (Notion::SwapEf, e.clone())]
            }
            LpMode::SwapStable => vec![
                (Notion::Proportional, zero()),
                (Notion::SwapEf, zero()),
                (Notion::SwapStable, zero()),
            ],
        }
    }

    fn swap_rhs(&self) -> Option<Rational> {
        match self {
            LpMode::ProportionalSwapEf | LpMode::SwapStable => Some(Rational::zero()),
            LpMode::ProportionalEpsSwapEf(e) => Some(e.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowKind {
    ColumnSum { interval: usize },
    Proportional { agent: usize },
    SwapEf { agent: usize, other: usize },
    SwapStable { agent: usize, first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpRow {
    pub kind: RowKind,
    pub row: Row,
}

/// Variables are `x[i][k]`, flattened to index `i·m + k`, all bounded below by 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpProblem {
    pub mode: LpMode,
    pub n: usize,
    pub m: usize,
    pub objective: Vec<Rational>,
    pub rows: Vec<LpRow>,
    pub lower_bounds: Vec<Rational>,
}

impl LpProblem {
    pub fn var(&self, i: usize, k: usize) -> usize {
        i * self.m + k
    }

    pub fn num_vars(&self) -> usize {
        self.n * self.m
    }

    pub fn count(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn objective_value(&self, fr: &FractionMatrix) -> Rational {
        dot(&self.objective, &fr.flatten())
    }

    /// Checks every row and bound exactly.
    pub fn is_feasible(&self, fr: &FractionMatrix) -> bool {
        let x = fr.flatten();
        x.len() == self.num_vars()
            && x.iter().zip(&self.lower_bounds).all(|(v, l)| v >= l)
            && self
                .rows
                .iter()
                .all(|r| r.row.sense.holds(&dot(&r.row.coeffs, &x), &r.row.rhs))
    }

    /// Plain-text dump: objective line, one line per row
    /// (`sense coefficients... rhs`), then one line per bound.
    pub fn emit_text(&self) -> String {
        let mut out = format!("# mode {} n {} m {}\n", self.mode.label(), self.n, self.m);
        let join = |v: &[Rational]| v.iter().map(format_rational).collect::<Vec<_>>().join(" ");
        out.push_str(&format!("min {}\n", join(&self.objective)));
        for r in &self.rows {
            out.push_str(&format!(
                "{} {} {}\n",
                r.row.sense.symbol(),
                join(&r.row.coeffs),
                format_rational(&r.row.rhs)
            ));
        }
        for (j, l) in self.lower_bounds.iter().enumerate() {
            out.push_str(&format!("bound x{j} >= {}\n", format_rational(l)));
        }
        out
    }

    fn plain_rows(&self) -> Vec<Row> {
        self.rows.iter().map(|r| r.row.clone()).collect()
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

pub fn build_lp(instance: &Instance, mode: LpMode) -> LpProblem {
    let (n, m) = (instance.n(), instance.m());
    let nv = n * m;
    let var = |i: usize, k: usize| i * m + k;
    let v = |i: usize, j: usize, k: usize| instance.interval_value(i, j, k);

    let mut objective = vec![Rational::zero(); nv];
    for j in 0..n {
        for k in 0..m {
            objective[var(j, k)] = (0..n).map(|i| v(i, j, k)).sum();
        }
    }

    let mut rows = Vec::new();
    for k in 0..m {
        let mut coeffs = vec![Rational::zero(); nv];
        for i in 0..n {
            coeffs[var(i, k)] = Rational::one();
        }
        rows.push(LpRow {
            kind: RowKind::ColumnSum { interval: k },
            row: Row { coeffs, sense: Sense::Eq, rhs: Rational::one() },
        });
    }
    if mode != LpMode::Unconstrained {
        for i in 0..n {
            let mut coeffs = vec![Rational::zero(); nv];
            for j in 0..n {
                for k in 0..m {
                    coeffs[var(j, k)] = v(i, j, k).clone();
                }
            }
            rows.push(LpRow {
                kind: RowKind::Proportional { agent: i },
                row: Row { coeffs, sense: Sense::Le, rhs: fair_share(n) },
            });
        }
    }
    if let Some(rhs) = mode.swap_rhs() {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let mut coeffs = vec![Rational::zero(); nv];
                for k in 0..m {
                    // own + other's − (own swapped + other's swapped)
                    coeffs[var(i, k)] = v(i, i, k) - v(i, j, k);
                    coeffs[var(j, k)] = v(i, j, k) - v(i, i, k);
                }
                rows.push(LpRow {
                    kind: RowKind::SwapEf { agent: i, other: j },
                    row: Row { coeffs, sense: Sense::Le, rhs: rhs.clone() },
                });
            }
        }
    }
    if mode == LpMode::SwapStable {
        for i in 0..n {
            for a in 0..n {
                for b in a + 1..n {
                    let mut coeffs = vec![Rational::zero(); nv];
                    for k in 0..m {
                        coeffs[var(a, k)] = v(i, a, k) - v(i, b, k);
                        coeffs[var(b, k)] = v(i, b, k) - v(i, a, k);
                    }
                    rows.push(LpRow {
                        kind: RowKind::SwapStable { agent: i, first: a, second: b },
                        row: Row { coeffs, sense: Sense::Le, rhs: Rational::zero() },
                    });
                }
            }
        }
    }
    LpProblem {
        mode,
        n,
        m,
        objective,
        rows,
        lower_bounds: vec![Rational::zero(); nv],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub fractions: Option<FractionMatrix>,
    pub objective: Option<Rational>,
    /// Basic variables at the optimum.
    pub basis: Vec<usize>,
    /// One multiplier per row when infeasible.
    pub certificate: Option<Vec<Rational>>,
    /// Improving direction when unbounded.
    pub ray: Option<Vec<Rational>>,
}

pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    // Shift x = x' + l so the solver sees x' ≥ 0.
    let shift = &problem.lower_bounds;
    let mut rows = problem.plain_rows();
    if shift.iter().any(|l| !l.is_zero()) {
        for r in &mut rows {
            r.rhs = &r.rhs - dot(&r.coeffs, shift);
        }
    }
    match simplex::solve(&problem.objective, &rows) {
        Outcome::Optimal { x, basis, .. } => {
            let x: Vec<Rational> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
            let fr = FractionMatrix::unflatten(&x, problem.n, problem.m);
            LpSolution {
                status: LpStatus::Optimal,
                objective: Some(problem.objective_value(&fr)),
                fractions: Some(fr),
                basis,
                certificate: None,
                ray: None,
            }
        }
        Outcome::Infeasible { certificate } => LpSolution {
            status: LpStatus::Infeasible,
            fractions: None,
            objective: None,
            basis: vec![],
            certificate: Some(certificate),
            ray: None,
        },
        Outcome::Unbounded { ray } => LpSolution {
            status: LpStatus::Unbounded,
            fractions: None,
            objective: None,
            basis: vec![],
            certificate: None,
            ray: Some(ray),
        },
    }
}

/// True when `y` certifies that `problem` has no feasible point.
pub fn verify_certificate(problem: &LpProblem, y: &[Rational]) -> bool {
    let mut rows = problem.plain_rows();
    for r in &mut rows {
        r.rhs = &r.rhs - dot(&r.coeffs, &problem.lower_bounds);
    }
    simplex::verify_infeasibility(&rows, problem.num_vars(), y)
}

/// Turns fractions into pieces whose values are exactly `x[i][k]·V_{i,j}(I_k)`.
pub fn realize_fractions(instance: &Instance, fr: &FractionMatrix) -> Result<Allocation, OptimizeError> {
    let (n, m) = (instance.n(), instance.m());
    fr.validate(n, m)?;
    let symmetric = !instance.is_piecewise_constant();
    let mut parts: Vec<Vec<Interval>> = vec![Vec::new(); n];
    for (k, iv) in instance.intervals().into_iter().enumerate() {
        let w = iv.length();
        let half = &w / int(2);
        let mut used = Rational::zero();
        for (i, part) in parts.iter_mut().enumerate() {
            let x = &fr.x[i][k];
            if x.is_zero() {
                continue;
            }
            let next = &used + x;
            if symmetric {
                part.push(Interval { lo: &iv.lo + &used * &half, hi: &iv.lo + &next * &half });
                part.push(Interval { lo: &iv.hi - &next * &half, hi: &iv.hi - &used * &half });
            } else {
                part.push(Interval { lo: &iv.lo + &used * &w, hi: &iv.lo + &next * &w });
            }
            used = next;
        }
    }
    Ok(Allocation::new(parts.into_iter().map(Piece::from_intervals).collect()))
}

/// Audit with each notion at the tolerance the mode enforces it at (0 when
/// the mode does not constrain it).
pub fn mode_report(instance: &Instance, alloc: &Allocation, mode: &LpMode) -> Result<FairnessReport, OptimizeError> {
    let tensor = ValueTensor::from_allocation(instance, alloc)?;
    let reqs = mode.requirements();
    let verdicts: Vec<FairnessVerdict> = Notion::ALL
        .iter()
        .map(|&notion| {
            let eps = reqs
                .iter()
                .find(|(n, _)| *n == notion)
                .map_or_else(Rational::zero, |(_, e)| e.clone());
            tensor.verdict(notion, &eps)
        })
        .collect();
    let per_agent_values: Vec<Rational> = (0..tensor.n()).map(|i| tensor.agent_value(i)).collect();
    Ok(FairnessReport {
        social_cost: per_agent_values.iter().sum(),
        per_agent_values,
        cuts: count_cuts(alloc),
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairOptimum {
    pub allocation: Allocation,
    pub report: FairnessReport,
    pub objective: Rational,
    pub fractions: FractionMatrix,
}

pub fn optimal_fair_allocation(instance: &Instance, mode: LpMode) -> Result<FairOptimum, OptimizeError> {
    let problem = build_lp(instance, mode.clone());
    let solution = solve_lp(&problem);
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(OptimizeError::InfeasibleModel {
                certificate: solution.certificate.unwrap_or_default(),
            })
        }
        LpStatus::Unbounded => return Err(OptimizeError::Unbounded),
    }
    let fractions = solution.fractions.expect("optimal solutions carry fractions");
    let allocation = realize_fractions(instance, &fractions)?;
    let report = mode_report(instance, &allocation, &mode)?;
    Ok(FairOptimum {
        allocation,
        report,
        objective: solution.objective.expect("optimal solutions carry an objective"),
        fractions,
    })
}

/// Anything that can answer `V_{i,j}(I)` for the refinement intervals.
pub trait IntervalValues {
    fn agents(&self) -> usize;
    fn refinement(&self) -> Vec<Interval>;
    fn interval_value(&mut self, i: usize, j: usize, interval: &Interval) -> Rational;
}

impl IntervalValues for &Instance {
    fn agents(&self) -> usize {
        self.n()
    }

    fn refinement(&self) -> Vec<Interval> {
        self.intervals()
    }

    fn interval_value(&mut self, i: usize, j: usize, interval: &Interval) -> Rational {
        self.density(i, j).integrate_interval(interval)
    }
}

/// Interval `k` goes wholly to `argmin_j Σ_i V_{i,j}(I_k)`, ties to the
/// smaller index. Asks exactly `m·n²` values.
pub fn greedy_owners(source: &mut impl IntervalValues) -> Vec<usize> {
    let n = source.agents();
    source
        .refinement()
        .iter()
        .map(|iv| {
            let mut best: Option<(usize, Rational)> = None;
            for j in 0..n {
                let cost: Rational = (0..n).map(|i| source.interval_value(i, j, iv)).sum();
                if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                    best = Some((j, cost));
                }
            }
            best.expect("at least one agent").0
        })
        .collect()
}

pub fn greedy_from(source: &mut impl IntervalValues) -> Allocation {
    let n = source.agents();
    let intervals = source.refinement();
    let owners = greedy_owners(source);
    let mut parts: Vec<Vec<Interval>> = vec![Vec::new(); n];
    for (iv, j) in intervals.into_iter().zip(owners) {
        parts[j].push(iv);
    }
    Allocation::new(parts.into_iter().map(Piece::from_intervals).collect())
}

/// Minimum social cost over all allocations when the instance is piecewise
/// constant. With linear densities the cheapest holder can change inside an
/// interval, and this is only the best whole-interval assignment.
pub fn greedy_optimal(instance: &Instance) -> Allocation {
    greedy_from(&mut &*instance)
}
