//! Brute-force ground truth over grid allocations: each refinement interval is
//! split into `g` equal cells and every cell goes wholly to one agent.
//!
//! Optionally a cell may also stay unallocated (state `n`). Assignments are
//! visited in lexicographic order (first cell most significant). Values are kept as integers over a common denominator and
//! updated incrementally as the odometer ticks.

use crate::error::OracleError;
use crate::fairness::Notion;
use crate::model::{Allocation, DensitySegment, Instance, Interval, Piece, PiecewiseDensity};
use crate::rational::{common_denominator, int, ratio, Rational};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{AddAssign, ControlFlow, SubAssign};

pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    #[serde(default)]
    pub allow_unallocated: bool,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Result<Self, OracleError> {
        if resolution == 0 {
            return Err(OracleError::BadSpec("grid resolution must be at least 1".into()));
        }
        Ok(Self { resolution, allow_unallocated: false })
    }

    /// Cells may also be left out of every piece.
    pub fn partial(resolution: usize) -> Result<Self, OracleError> {
        Ok(Self { allow_unallocated: true, ..Self::new(resolution)? })
    }

    fn states(&self, n: usize) -> usize {
        n + usize::from(self.allow_unallocated)
    }

    pub fn cells(&self, instance: &Instance) -> Vec<Interval> {
        let g = int(self.resolution as i64);
        instance
            .intervals()
            .iter()
            .flat_map(|iv| {
                let step = iv.length() / &g;
                (0..self.resolution).map(move |c| Interval {
                    lo: &iv.lo + &step * int(c as i64),
                    hi: &iv.lo + &step * int(c as i64 + 1),
                })
            })
            .collect()
    }

    /// Number of assignments, `n^(g·m)` (or `(n+1)^(g·m)`), checked against `cap`.
    pub fn size_within(&self, instance: &Instance, cap: u64) -> Result<u64, OracleError> {
        let cells = (self.resolution * instance.m()) as u32;
        let size = BigInt::from(self.states(instance.n())).pow(cells);
        match size.to_u64() {
            Some(s) if s <= cap => Ok(s),
            _ => Err(OracleError::BudgetExceeded { size: size.to_string(), cap }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub require: Vec<Notion>,
    pub forbid: Vec<Notion>,
}

impl PropertySpec {
    pub fn new(require: Vec<Notion>, forbid: Vec<Notion>) -> Result<Self, OracleError> {
        if let Some(n) = require.iter().find(|n| forbid.contains(n)) {
            return Err(OracleError::BadSpec(format!("{n:?} is both required and forbidden")));
        }
        Ok(Self { require, forbid })
    }

    /// Parses a comma-separated list such as `prop,swap-ef`.
    pub fn parse_list(text: &str) -> Result<Vec<Notion>, OracleError> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Notion::parse(s).ok_or_else(|| OracleError::BadSpec(format!("unknown notion {s:?}"))))
            .collect()
    }

    pub fn accepts(&self, holds: impl Fn(Notion) -> bool) -> bool {
        self.require.iter().all(|&n| holds(n)) && self.forbid.iter().all(|&n| !holds(n))
    }
}

/// Integer type the tensor is tracked in.
pub trait Scaled: Clone + Ord + Zero + Debug + for<'a> AddAssign<&'a Self> + for<'a> SubAssign<&'a Self> {
    fn from_big(v: &BigInt) -> Option<Self>;
    fn to_big(&self) -> BigInt;
    fn times(&self, k: usize) -> Self;
}

impl Scaled for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128().filter(|x| x.unsigned_abs() < 1u128 << 100)
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn times(&self, k: usize) -> Self {
        self * k as i128
    }
}

impl Scaled for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn times(&self, k: usize) -> Self {
        self * BigInt::from(k)
    }
}

/// Current `V[i][j][p]`, scaled by `denom`.
#[derive(Debug, Clone)]
pub struct CellTensor<T> {
    n: usize,
    /// `n`, plus one slot for unallocated cells when allowed.
    slots: usize,
    denom: T,
    cells: Vec<T>,
    values: Vec<T>,
    assignment: Vec<usize>,
}

impl<T: Scaled> CellTensor<T> {
    fn build(n: usize, slots: usize, cell_values: &[Vec<Vec<Rational>>]) -> Option<Self> {
        let ncells = cell_values[0][0].len();
        let denom = common_denominator(cell_values.iter().flatten().flatten());
        let mut cells = Vec::with_capacity(n * n * ncells);
        for row in cell_values {
            for per_cell in row {
                for v in per_cell {
                    let scaled = (v * Rational::from_integer(denom.clone())).to_integer();
                    cells.push(T::from_big(&scaled)?);
                }
            }
        }
        let mut t = Self {
            n,
            slots,
            denom: T::from_big(&denom)?,
            cells,
            values: vec![T::zero(); n * n * slots],
            assignment: vec![0; ncells],
        };
        for c in 0..ncells {
            t.shift(c, None, 0);
        }
        Some(t)
    }

    fn cell(&self, i: usize, j: usize, c: usize) -> &T {
        &self.cells[(i * self.n + j) * self.assignment.len() + c]
    }

    fn shift(&mut self, c: usize, from: Option<usize>, to: usize) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let v = self.cell(i, j, c).clone();
                let base = (i * n + j) * self.slots;
                if let Some(p) = from {
                    self.values[base + p] -= &v;
                }
                self.values[base + to] += &v;
            }
        }
        self.assignment[c] = to;
    }

    /// Advances the odometer; false once every assignment has been seen.
    fn advance(&mut self) -> bool {
        for c in (0..self.assignment.len()).rev() {
            let old = self.assignment[c];
            if old + 1 < self.slots {
                self.shift(c, Some(old), old + 1);
                return true;
            }
            self.shift(c, Some(old), 0);
        }
        false
    }

    fn v(&self, i: usize, j: usize, p: usize) -> &T {
        &self.values[(i * self.n + j) * self.slots + p]
    }

    fn agent_value(&self, i: usize) -> T {
        let mut s = T::zero();
        for j in 0..self.n {
            s += self.v(i, j, j);
        }
        s
    }

    fn cost(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s += &self.agent_value(i);
        }
        s
    }

    fn pair_ok(&self, i: usize, j: usize, k: usize) -> bool {
        let mut lhs = self.v(i, j, j).clone();
        lhs += self.v(i, k, k);
        let mut rhs = self.v(i, j, k).clone();
        rhs += self.v(i, k, j);
        lhs <= rhs
    }

    fn holds(&self, notion: Notion) -> bool {
        let n = self.n;
        match notion {
            Notion::Proportional => (0..n).all(|i| self.agent_value(i).times(n) <= self.denom),
            Notion::SwapEf => (0..n).all(|i| (0..n).all(|j| j == i || self.pair_ok(i, i, j))),
            Notion::SwapStable => {
                (0..n).all(|i| (0..n).all(|j| (j + 1..n).all(|k| self.pair_ok(i, j, k))))
            }
        }
    }
}

/// Read access to the allocation currently being visited.
pub trait Visit {
    fn assignment(&self) -> &[usize];
    fn holds(&self, notion: Notion) -> bool;
    fn social_cost(&self) -> Rational;
}

impl<T: Scaled> Visit for CellTensor<T> {
    fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    fn holds(&self, notion: Notion) -> bool {
        CellTensor::holds(self, notion)
    }

    fn social_cost(&self) -> Rational {
        Rational::new(self.cost().to_big(), self.denom.to_big())
    }
}

/// Cell values `V_{i,j}(cell)` for a grid.
pub struct CellGrid {
    n: usize,
    slots: usize,
    cells: Vec<Interval>,
    values: Vec<Vec<Vec<Rational>>>,
}

impl CellGrid {
    pub fn new(instance: &Instance, grid: GridSpec) -> Self {
        let cells = grid.cells(instance);
        let n = instance.n();
        let values = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| cells.iter().map(|c| instance.density(i, j).integrate_interval(c)).collect())
                    .collect()
            })
            .collect();
        Self { n, slots: grid.states(n), cells, values }
    }

    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }

    pub fn allocation(&self, assignment: &[usize]) -> Allocation {
        let mut parts: Vec<Vec<Interval>> = vec![Vec::new(); self.n];
        for (cell, &p) in self.cells.iter().zip(assignment) {
            if p < self.n {
                parts[p].push(cell.clone());
            }
        }
        Allocation::new(parts.into_iter().map(Piece::from_intervals).collect())
    }

    fn run<R>(&self, body: impl FnOnce(&mut dyn Odometer) -> R) -> R {
        match CellTensor::<i128>::build(self.n, self.slots, &self.values) {
            Some(mut t) => body(&mut t),
            None => body(
                &mut CellTensor::<BigInt>::build(self.n, self.slots, &self.values).expect("BigInt always fits"),
            ),
        }
    }

    /// Visits every assignment in order until `f` breaks; returns the number visited.
    pub fn scan(&self, mut f: impl FnMut(&dyn Visit) -> ControlFlow<()>) -> u64 {
        self.run(|odo| {
            let mut visited = 0;
            loop {
                visited += 1;
                if f(odo.as_visit()).is_break() || !odo.step() {
                    return visited;
                }
            }
        })
    }

    /// Lexicographically first assignment of minimum social cost among those
    /// accepted by `spec`.
    pub fn min_cost(&self, spec: &PropertySpec) -> Option<(Vec<usize>, Rational)> {
        self.run(|odo| odo.min_cost(spec))
    }
}

trait Odometer {
    fn step(&mut self) -> bool;
    fn as_visit(&self) -> &dyn Visit;
    fn min_cost(&mut self, spec: &PropertySpec) -> Option<(Vec<usize>, Rational)>;
}

impl<T: Scaled> Odometer for CellTensor<T> {
    fn step(&mut self) -> bool {
        self.advance()
    }

    fn as_visit(&self) -> &dyn Visit {
        self
    }

    fn min_cost(&mut self, spec: &PropertySpec) -> Option<(Vec<usize>, Rational)> {
        let mut best: Option<(Vec<usize>, T)> = None;
        loop {
            let cost = self.cost();
            let better = best.as_ref().is_none_or(|(_, b)| cost < *b);
            if better && spec.accepts(|n| self.holds(n)) {
                best = Some((self.assignment.clone(), cost));
            }
            if !self.advance() {
                break;
            }
        }
        best.map(|(a, c)| (a, Rational::new(c.to_big(), self.denom.to_big())))
    }
}

/// Every grid allocation, in enumeration order.
pub struct AllocationIter {
    grid: CellGrid,
    assignment: Vec<usize>,
    done: bool,
}

impl Iterator for AllocationIter {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.done {
            return None;
        }
        let out = self.grid.allocation(&self.assignment);
        self.done = true;
        for c in (0..self.assignment.len()).rev() {
            if self.assignment[c] + 1 < self.grid.slots {
                self.assignment[c] += 1;
                self.done = false;
                break;
            }
            self.assignment[c] = 0;
        }
        Some(out)
    }
}

pub fn enumerate_allocations(instance: &Instance, grid: GridSpec) -> Result<AllocationIter, OracleError> {
    enumerate_allocations_capped(instance, grid, DEFAULT_CAP)
}

pub fn enumerate_allocations_capped(
    instance: &Instance,
    grid: GridSpec,
    cap: u64,
) -> Result<AllocationIter, OracleError> {
    grid.size_within(instance, cap)?;
    let grid = CellGrid::new(instance, grid);
    let assignment = vec![0; grid.cells.len()];
    Ok(AllocationIter { grid, assignment, done: false })
}

/// Minimum-cost grid allocation accepted by `spec` at ε = 0.
pub fn brute_force_optimal(
    instance: &Instance,
    grid: GridSpec,
    spec: &PropertySpec,
) -> Result<(Allocation, Rational), OracleError> {
    grid.size_within(instance, DEFAULT_CAP)?;
    let cells = CellGrid::new(instance, grid);
    let (assignment, cost) = cells.min_cost(spec).ok_or(OracleError::NoFeasible)?;
    Ok((cells.allocation(&assignment), cost))
}

/// Counts grid allocations accepted by `spec`.
pub fn count_matching(instance: &Instance, grid: GridSpec, spec: &PropertySpec) -> Result<u64, OracleError> {
    grid.size_within(instance, DEFAULT_CAP)?;
    let mut hits = 0;
    CellGrid::new(instance, grid).scan(|v| {
        if spec.accepts(|n| v.holds(n)) {
            hits += 1;
        }
        ControlFlow::Continue(())
    });
    Ok(hits)
}

/// Random piecewise-constant density values `k/16`, normalized per agent.
pub const VALUE_DENOMINATOR: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Breaks {
    /// `k/m` for `k = 0..=m`.
    Equal,
    /// Distinct random multiples of `1/(4m)`.
    Random,
}

fn random_breaks(rng: &mut ChaCha8Rng, m: usize, breaks: Breaks) -> Vec<Rational> {
    match breaks {
        Breaks::Equal => (0..=m).map(|k| ratio(k as i64, m as i64)).collect(),
        Breaks::Random => {
            let denom = 4 * m as i64;
            let mut inner: Vec<i64> = Vec::new();
            while inner.len() + 1 < m {
                let k = rng.gen_range(1..denom);
                if !inner.contains(&k) {
                    inner.push(k);
                }
            }
            inner.sort_unstable();
            std::iter::once(int(0))
                .chain(inner.into_iter().map(|k| ratio(k, denom)))
                .chain(std::iter::once(int(1)))
                .collect()
        }
    }
}

fn normalize_rows(mut rows: Vec<Vec<PiecewiseDensity>>) -> Instance {
    for row in &mut rows {
        let total: Rational = row.iter().map(PiecewiseDensity::total).sum();
        let factor = Rational::from_integer(1.into()) / total;
        for d in row.iter_mut() {
            *d = d.scaled(&factor);
        }
    }
    Instance::new(rows).expect("normalized by construction")
}

fn draw(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.gen_range(0..=VALUE_DENOMINATOR), VALUE_DENOMINATOR)
}

/// Normalized piecewise-constant instance on `m` intervals.
pub fn random_pwc_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, breaks: Breaks) -> Instance {
    let b = random_breaks(rng, m, breaks);
    loop {
        let rows: Vec<Vec<PiecewiseDensity>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let values: Vec<Rational> = (0..m).map(|_| draw(rng)).collect();
                        PiecewiseDensity::step(&b, &values).expect("valid steps")
                    })
                    .collect()
            })
            .collect();
        if rows.iter().all(|r| r.iter().any(|d| !d.total().is_zero())) {
            return normalize_rows(rows);
        }
    }
}

/// Normalized piecewise-linear instance: each segment interpolates random
/// endpoint values `k/16`, so densities are non-negative and may jump at breakpoints.
pub fn random_pwl_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, breaks: Breaks) -> Instance {
    let b = random_breaks(rng, m, breaks);
    loop {
        let rows: Vec<Vec<PiecewiseDensity>> = (0..n)
            .map(|_| (0..n).map(|_| random_linear_density(rng, &b)).collect())
            .collect();
        if rows.iter().all(|r| r.iter().any(|d| !d.total().is_zero())) {
            return normalize_rows(rows);
        }
    }
}

/// Normalized instance of continuous piecewise-linear densities: random node
/// values `k/16` at the breakpoints, joined linearly.
pub fn random_continuous_pwl_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, breaks: Breaks) -> Instance {
    let b = random_breaks(rng, m, breaks);
    loop {
        let rows: Vec<Vec<PiecewiseDensity>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let nodes: Vec<Rational> = (0..=m).map(|_| draw(rng)).collect();
                        interpolate(&b, &nodes)
                    })
                    .collect()
            })
            .collect();
        if rows.iter().all(|r| r.iter().any(|d| !d.total().is_zero())) {
            return normalize_rows(rows);
        }
    }
}

fn interpolate(breaks: &[Rational], nodes: &[Rational]) -> PiecewiseDensity {
    let segments = breaks
        .windows(2)
        .zip(nodes.windows(2))
        .map(|(w, v)| {
            let b = (&v[1] - &v[0]) / (&w[1] - &w[0]);
            let a = &v[0] - &b * &w[0];
            DensitySegment { interval: Interval { lo: w[0].clone(), hi: w[1].clone() }, a, b }
        })
        .collect();
    PiecewiseDensity::new(segments).expect("segments tile [0,1]")
}

pub fn random_linear_density(rng: &mut ChaCha8Rng, breaks: &[Rational]) -> PiecewiseDensity {
    let segments = breaks
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0].clone(), w[1].clone());
            let (fl, fh) = (draw(rng), draw(rng));
            let b = (&fh - &fl) / (&hi - &lo);
            let a = &fl - &b * &lo;
            DensitySegment { interval: Interval { lo, hi }, a, b }
        })
        .collect();
    PiecewiseDensity::new(segments).expect("segments tile [0,1]")
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub instance: Instance,
    pub allocation: Allocation,
    /// How many instances were sampled, including the witness's.
    pub instances_tried: u64,
    /// Allocations examined across all sampled instances.
    pub allocations_examined: u64,
}

/// Samples random instances (equal-width intervals) and scans their grid
/// allocations until one is accepted by `spec`. `budget` caps the number of
/// allocations examined.
pub fn search_counterexample(
    spec: &PropertySpec,
    n: usize,
    m: usize,
    g: usize,
    seed: u64,
    budget: u64,
) -> Result<Witness, OracleError> {
    search_counterexample_on(spec, n, m, GridSpec::new(g)?, seed, budget)
}

pub fn search_counterexample_on(
    spec: &PropertySpec,
    n: usize,
    m: usize,
    grid: GridSpec,
    seed: u64,
    budget: u64,
) -> Result<Witness, OracleError> {
    if budget == 0 {
        return Err(OracleError::BadSpec("budget must be positive".into()));
    }
    if n == 0 || m == 0 {
        return Err(OracleError::BadSpec("need n >= 1 and m >= 1".into()));
    }
    if grid.resolution == 0 {
        return Err(OracleError::BadSpec("grid resolution must be at least 1".into()));
    }
    let spec = PropertySpec::new(spec.require.clone(), spec.forbid.clone())?;
    let mut rng = seeded_rng(seed);
    let mut examined = 0u64;
    let mut tried = 0u64;
    while examined < budget {
        let instance = random_pwc_instance(&mut rng, n, m, Breaks::Equal);
        tried += 1;
        grid.size_within(&instance, DEFAULT_CAP)?;
        let cells = CellGrid::new(&instance, grid);
        let mut found = None;
        let remaining = budget - examined;
        examined += cells.scan(|v| {
            if spec.accepts(|notion| v.holds(notion)) {
                found = Some(v.assignment().to_vec());
                return ControlFlow::Break(());
            }
            if remaining <= 1 {
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        }).min(remaining);
        if let Some(assignment) = found {
            return Ok(Witness {
                allocation: cells.allocation(&assignment),
                instance,
                instances_tried: tried,
                allocations_examined: examined,
            });
        }
    }
    Err(OracleError::NotFound { budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::ValueTensor;
    use crate::fixtures;
    use crate::model::social_cost;
    use crate::optimize::greedy_optimal;

    fn grid(g: usize) -> GridSpec {
        GridSpec::new(g).unwrap()
    }

    #[test]
    fn enumeration_sizes() {
        let one = Instance::new(vec![
            vec![PiecewiseDensity::constant(ratio(1, 2)), PiecewiseDensity::constant(ratio(1, 2))],
            vec![PiecewiseDensity::constant(ratio(1, 2)), PiecewiseDensity::constant(ratio(1, 2))],
        ])
        .unwrap();
        assert_eq!(enumerate_allocations(&one, grid(2)).unwrap().count(), 4);
        let ex2 = fixtures::example2().instance().unwrap();
        let all: Vec<Allocation> = enumerate_allocations(&ex2, grid(1)).unwrap().collect();
        assert_eq!(all.len(), 4);
        assert!(all.contains(&greedy_optimal(&ex2)));
        let (three, _) = crate::protocols::zero_cut_instance(3).unwrap();
        assert_eq!(enumerate_allocations(&three, grid(3)).unwrap().count(), 27);
    }

    #[test]
    fn budget_cap() {
        let ex2 = fixtures::example2().instance().unwrap();
        assert!(matches!(
            enumerate_allocations_capped(&ex2, grid(3), 10),
            Err(OracleError::BudgetExceeded { .. })
        ));
        assert!(GridSpec::new(0).is_err());
    }

    #[test]
    fn brute_force_example2() {
        let ex2 = fixtures::example2().instance().unwrap();
        let (a, cost) = brute_force_optimal(&ex2, grid(1), &PropertySpec::default()).unwrap();
        assert_eq!(cost, ratio(3, 4));
        assert_eq!(a, greedy_optimal(&ex2));
        let fair = PropertySpec::new(vec![Notion::Proportional, Notion::SwapEf], vec![]).unwrap();
        let (b, cost) = brute_force_optimal(&ex2, grid(1), &fair).unwrap();
        assert_eq!((b, cost), (a, ratio(3, 4)));
    }

    #[test]
    fn brute_force_example1_two_agents() {
        let ex1 = fixtures::example1(2).instance().unwrap();
        let prop = PropertySpec::new(vec![Notion::Proportional], vec![]).unwrap();
        // Each agent only minds its own block being held by itself; swapping
        // the blocks costs nobody anything.
        let (a, cost) = brute_force_optimal(&ex1, grid(1), &prop).unwrap();
        assert_eq!(cost, int(0));
        assert_eq!(a.piece(0), &Piece::span(ratio(1, 2), int(1)).unwrap());
        let only_diagonal = PropertySpec::new(vec![], vec![Notion::Proportional]).unwrap();
        let (_, worst) = brute_force_optimal(&ex1, grid(1), &only_diagonal).unwrap();
        assert_eq!(worst, int(2));
    }

    #[test]
    fn fast_tensor_matches_exact_audit() {
        let mut rng = seeded_rng(7);
        for _ in 0..5 {
            let inst = random_pwc_instance(&mut rng, 3, 2, Breaks::Random);
            let cells = CellGrid::new(&inst, grid(1));
            cells.scan(|v| {
                let alloc = cells.allocation(v.assignment());
                let exact = ValueTensor::from_allocation(&inst, &alloc).unwrap();
                for notion in Notion::ALL {
                    assert_eq!(v.holds(notion), exact.satisfies(notion, &Rational::zero()));
                }
                assert_eq!(v.social_cost(), social_cost(&inst, &alloc).unwrap());
                ControlFlow::Continue(())
            });
        }
    }

    #[test]
    fn generators_are_normalized_and_reproducible() {
        let a = random_pwc_instance(&mut seeded_rng(3), 3, 3, Breaks::Random);
        let b = random_pwc_instance(&mut seeded_rng(3), 3, 3, Breaks::Random);
        assert_eq!(a, b);
        assert!(a.is_normalized() && a.is_piecewise_constant());
        let l = random_pwl_instance(&mut seeded_rng(4), 2, 3, Breaks::Equal);
        assert!(l.is_normalized());
        let c = random_continuous_pwl_instance(&mut seeded_rng(5), 2, 3, Breaks::Random);
        assert!(c.is_normalized());
        for d in c.densities().iter().flatten() {
            for w in d.segments().windows(2) {
                assert_eq!(w[0].value_at(&w[0].interval.hi), w[1].value_at(&w[1].interval.lo));
            }
        }
    }

    #[test]
    fn complete_two_agent_allocations_never_separate_prop_from_swap_ef() {
        let mut rng = seeded_rng(11);
        let spec = PropertySpec::new(vec![Notion::Proportional], vec![Notion::SwapEf]).unwrap();
        for _ in 0..20 {
            let inst = random_pwc_instance(&mut rng, 2, 2, Breaks::Random);
            assert_eq!(count_matching(&inst, grid(2), &spec).unwrap(), 0);
        }
    }

    #[test]
    fn partial_grid_counts() {
        let ex2 = fixtures::example2().instance().unwrap();
        let all: Vec<Allocation> =
            enumerate_allocations(&ex2, GridSpec::partial(1).unwrap()).unwrap().collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], Allocation::new(vec![Piece::single(Interval::unit()), Piece::empty()]));
        assert_eq!(all[8], Allocation::empty(2));
    }

    #[test]
    fn search_finds_proportional_not_swap_ef() {
        let spec = PropertySpec::new(vec![Notion::Proportional], vec![Notion::SwapEf]).unwrap();
        let w = search_counterexample_on(&spec, 2, 2, GridSpec::partial(1).unwrap(), 1, 100_000).unwrap();
        let t = ValueTensor::from_allocation(&w.instance, &w.allocation).unwrap();
        assert!(t.satisfies(Notion::Proportional, &Rational::zero()));
        assert!(!t.satisfies(Notion::SwapEf, &Rational::zero()));
    }

    #[test]
    fn search_respects_budget() {
        let spec = PropertySpec::new(vec![Notion::SwapEf], vec![Notion::Proportional]).unwrap();
        assert_eq!(
            search_counterexample(&spec, 2, 2, 1, 5, 200),
            Err(OracleError::NotFound { budget: 200 })
        );
        assert!(PropertySpec::new(vec![Notion::SwapEf], vec![Notion::SwapEf]).is_err());
    }
}
