//! Piecewise-constant approximation of Lipschitz densities on a uniform cell
//! grid, and the approximately optimal fair allocations it yields.
//!
//! Oracle-spec documents name a density family per `(i, j)` plus shared
//! bounds:
//!
//! ```json
//! {"n": 1, "lipschitz": "1", "lower": "0", "upper": "2",
//!  "densities": [[{"family": "polynomial", "coefficients": ["1/2", "1"]}]]}
//! ```
//!
//! Families: `constant {value}`, `polynomial {coefficients}` (lowest degree
//! first), `sinusoidal {offset, amplitude, frequency, phase}` meaning
//! `offset + amplitude·sin(2π·frequency·x + phase)`, and `pwl {segments}` with
//! segments as in instance documents.

use crate::error::ApproxError;
use crate::fairness::FairnessReport;
use crate::model::{Allocation, DensitySegment, Instance, Interval, Normalization, PiecewiseDensity};
use crate::optimize::{optimal_fair_allocation, LpMode};
use crate::rational::{
    ceil_to_int, format_rational, from_f64_exact, int, parse_rational, pow2, ratio, serde_str, to_f64, Rational,
};
use crate::schema::SegmentDoc;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

const MAX_CELLS: u64 = 1 << 20;
const SPOT_SAMPLES: usize = 1024;
/// Tolerance for checks on floating-point oracle samples.
const SAMPLE_SLACK: f64 = 1e-9;
/// Default tolerance for quadrature audits.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Constant {
        value: String,
    },
    Polynomial {
        coefficients: Vec<String>,
    },
    Sinusoidal {
        offset: String,
        amplitude: String,
        frequency: String,
        phase: String,
    },
    Pwl {
        segments: Vec<SegmentDoc>,
    },
}

/// Parsed, ready-to-evaluate form of a [`Family`].
#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Polynomial(Vec<f64>),
    Sinusoidal { offset: f64, amplitude: f64, omega: f64, phase: f64 },
    Pwl(PiecewiseDensity),
}

fn num(text: &str) -> Result<Rational, ApproxError> {
    parse_rational(text).map_err(|e| ApproxError::Spec(e.to_string()))
}

impl Family {
    fn shape(&self) -> Result<Shape, ApproxError> {
        Ok(match self {
            Family::Constant { value } => Shape::Polynomial(vec![to_f64(&num(value)?)]),
            Family::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.len() > 64 {
                    return Err(ApproxError::Spec("polynomial needs 1..=64 coefficients".into()));
                }
                Shape::Polynomial(
                    coefficients
                        .iter()
                        .map(|c| num(c).map(|r| to_f64(&r)))
                        .collect::<Result<_, _>>()?,
                )
            }
            Family::Sinusoidal { offset, amplitude, frequency, phase } => Shape::Sinusoidal {
                offset: to_f64(&num(offset)?),
                amplitude: to_f64(&num(amplitude)?),
                omega: 2.0 * std::f64::consts::PI * to_f64(&num(frequency)?),
                phase: to_f64(&num(phase)?),
            },
            Family::Pwl { segments } => Shape::Pwl(pwl_density(segments)?),
        })
    }

    pub fn from_density(density: &PiecewiseDensity) -> Self {
        Family::Pwl {
            segments: density
                .segments()
                .iter()
                .map(|s| SegmentDoc {
                    lo: format_rational(&s.interval.lo),
                    hi: format_rational(&s.interval.hi),
                    a: format_rational(&s.a),
                    b: (!s.b.is_zero()).then(|| format_rational(&s.b)),
                })
                .collect(),
        }
    }
}

fn pwl_density(segments: &[SegmentDoc]) -> Result<PiecewiseDensity, ApproxError> {
    let segs = segments
        .iter()
        .map(|s| {
            Ok(DensitySegment {
                interval: Interval::new(num(&s.lo)?, num(&s.hi)?)?,
                a: num(&s.a)?,
                b: match &s.b {
                    Some(b) => num(b)?,
                    None => Rational::zero(),
                },
            })
        })
        .collect::<Result<Vec<_>, ApproxError>>()?;
    Ok(PiecewiseDensity::new(segs)?)
}

/// A pointwise density with declared Lipschitz constant `K` and bounds
/// `M ≤ v ≤ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOracle {
    shape: Shape,
    pub lipschitz: Rational,
    pub lower: Rational,
    pub upper: Rational,
}

impl DensityOracle {
    pub fn new(family: &Family, lipschitz: Rational, lower: Rational, upper: Rational) -> Result<Self, ApproxError> {
        if !lipschitz.is_positive() {
            return Err(ApproxError::BadLipschitz(lipschitz));
        }
        if lower > upper || lower.is_negative() {
            return Err(ApproxError::Spec(format!("need 0 <= lower <= upper, got {lower} and {upper}")));
        }
        Ok(Self { shape: family.shape()?, lipschitz, lower, upper })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Shape::Sinusoidal { offset, amplitude, omega, phase } => offset + amplitude * (omega * x + phase).sin(),
            Shape::Pwl(d) => match from_f64_exact(x) {
                Some(r) => to_f64(&d.value_at(&r)),
                None => f64::NAN,
            },
        }
    }

    /// The exact density when the family is piecewise linear.
    pub fn exact(&self) -> Option<PiecewiseDensity> {
        match &self.shape {
            Shape::Pwl(d) => Some(d.clone()),
            _ => None,
        }
    }

    /// Checks the declared bounds and Lipschitz constant on a uniform sample.
    pub fn spot_check(&self, agent: usize, holder: usize) -> Result<(), ApproxError> {
        let k = to_f64(&self.lipschitz);
        let (lo, hi) = (to_f64(&self.lower), to_f64(&self.upper));
        let contract = |detail: String| ApproxError::OracleContract { agent, holder, detail };
        let step = 1.0 / SPOT_SAMPLES as f64;
        let mut prev: Option<(f64, f64)> = None;
        for t in 0..=SPOT_SAMPLES {
            let x = t as f64 * step;
            let v = self.eval(x);
            if !v.is_finite() || v < lo - SAMPLE_SLACK || v > hi + SAMPLE_SLACK {
                return Err(contract(format!("v({x}) = {v} outside [{lo}, {hi}]")));
            }
            if let Some((px, pv)) = prev {
                if (v - pv).abs() > k * (x - px) + SAMPLE_SLACK {
                    return Err(contract(format!("slope between {px} and {x} exceeds K = {k}")));
                }
            }
            prev = Some((x, v));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub n: usize,
    pub lipschitz: String,
    pub lower: String,
    pub upper: String,
    pub densities: Vec<Vec<Family>>,
}

impl OracleSpec {
    pub fn oracles(&self) -> Result<Vec<Vec<DensityOracle>>, ApproxError> {
        if self.n == 0 || self.n > 64 {
            return Err(ApproxError::Spec(format!("n must be in 1..=64, got {}", self.n)));
        }
        if self.densities.len() != self.n || self.densities.iter().any(|r| r.len() != self.n) {
            return Err(ApproxError::Spec(format!("densities must be a {0}x{0} matrix", self.n)));
        }
        let (k, lo, hi) = (num(&self.lipschitz)?, num(&self.lower)?, num(&self.upper)?);
        self.densities
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| DensityOracle::new(f, k.clone(), lo.clone(), hi.clone()))
                    .collect()
            })
            .collect()
    }

    /// Wraps an exact piecewise-linear instance, with `K` the steepest slope
    /// (at least `min_lipschitz`) and bounds from the segment endpoints.
    pub fn from_instance(instance: &Instance, min_lipschitz: &Rational) -> Self {
        let mut k = min_lipschitz.clone();
        let mut hi = Rational::zero();
        let mut lo: Option<Rational> = None;
        for d in instance.densities().iter().flatten() {
            for s in d.segments() {
                k = k.max(s.b.abs());
                for x in [&s.interval.lo, &s.interval.hi] {
                    let v = s.value_at(x);
                    hi = hi.max(v.clone());
                    lo = Some(lo.map_or(v.clone(), |l| l.min(v)));
                }
            }
        }
        Self {
            n: instance.n(),
            lipschitz: format_rational(&k),
            lower: format_rational(&lo.unwrap_or_else(Rational::zero)),
            upper: format_rational(&hi),
            densities: instance
                .densities()
                .iter()
                .map(|row| row.iter().map(Family::from_density).collect())
                .collect(),
        }
    }
}

pub fn parse_oracle_spec(text: &str) -> Result<OracleSpec, ApproxError> {
    let spec: OracleSpec = serde_json::from_str(text).map_err(|e| ApproxError::Spec(e.to_string()))?;
    spec.oracles()?;
    Ok(spec)
}

/// Exact instance behind a spec whose densities are all piecewise linear.
pub fn exact_instance(oracles: &[Vec<DensityOracle>]) -> Option<Result<Instance, ApproxError>> {
    let densities: Option<Vec<Vec<PiecewiseDensity>>> =
        oracles.iter().map(|row| row.iter().map(DensityOracle::exact).collect()).collect();
    densities.map(|d| Instance::new(d).map_err(ApproxError::from))
}

/// `S = { r / 2^a : 0 ≤ r/2^a ≤ range_top }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub a: i64,
    #[serde(with = "serde_str")]
    pub range_top: Rational,
}

impl DyadicGrid {
    /// Precision `a = ⌈2 + log₂(1/ε)⌉`, the least integer with `2^(a−2)·ε ≥ 1`.
    pub fn for_eps(eps: &Rational, range_top: Rational) -> Result<Self, ApproxError> {
        if !eps.is_positive() {
            return Err(ApproxError::BadEps(eps.clone()));
        }
        let one = Rational::one();
        let mut a: i64 = 2;
        while &pow2(a - 2) * eps < one {
            a += 1;
        }
        while &pow2(a - 3) * eps >= one {
            a -= 1;
        }
        Ok(Self { a, range_top })
    }

    pub fn step(&self) -> Rational {
        pow2(-self.a)
    }

    fn floor_exact(&self, value: &Rational) -> Rational {
        let scale = pow2(self.a);
        Rational::from_integer((value * &scale).floor().to_integer()) / scale
    }
}

/// Largest grid element `≤ value`.
pub fn dyadic_floor(value: f64, grid: &DyadicGrid) -> Result<Rational, ApproxError> {
    let out_of_range = || ApproxError::OutOfRange { value, top: grid.range_top.clone() };
    let exact = from_f64_exact(value).ok_or_else(out_of_range)?;
    if exact.is_negative() || exact > grid.range_top {
        return Err(out_of_range());
    }
    Ok(grid.floor_exact(&exact))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxMode {
    Prop,
    SwapEf,
}

impl ApproxMode {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "prop" => Some(ApproxMode::Prop),
            "swapef" => Some(ApproxMode::SwapEf),
            _ => None,
        }
    }

    /// `⌈2nK/ε⌉` or `⌈8K/ε⌉`.
    pub fn cell_count(self, n: usize, k: &Rational, eps: &Rational) -> Rational {
        let target = match self {
            ApproxMode::Prop => int(2 * n as i64) * k / eps,
            ApproxMode::SwapEf => int(8) * k / eps,
        };
        Rational::from_integer(ceil_to_int(&target))
    }

    /// Target band: `ε/n` or `ε/4`.
    pub fn band(self, n: usize, eps: &Rational) -> Rational {
        match self {
            ApproxMode::Prop => eps / int(n as i64),
            ApproxMode::SwapEf => eps / int(4),
        }
    }

    /// Allowed loss in social cost: `ε` or `nε/4`.
    pub fn efficiency_slack(self, n: usize, eps: &Rational) -> Rational {
        match self {
            ApproxMode::Prop => eps.clone(),
            ApproxMode::SwapEf => int(n as i64) * eps / int(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationResult {
    /// Piecewise-constant `v′`, not renormalized.
    pub instance: Instance,
    pub subinterval_count: usize,
    pub grid: DyadicGrid,
    pub cell_width: Rational,
    /// Estimated `v*_{i,j}(I_k)`: sampled minimum minus `K·h/2`, clamped at 0.
    pub minima: Vec<Vec<Vec<f64>>>,
    /// `p*_{i,j}(I_k)`.
    pub rounded: Vec<Vec<Vec<Rational>>>,
    pub band: Rational,
    pub lipschitz: Rational,
    pub oracle_evaluations: u64,
}

impl DiscretizationResult {
    /// Largest `v(x) − p*` over `samples` evenly spaced points per cell
    /// (cell ends included), per `(i, j, k)`, and the smallest such difference.
    pub fn sampled_gaps(&self, oracles: &[Vec<DensityOracle>], samples: usize) -> (Vec<Vec<Vec<f64>>>, f64) {
        let cells = self.subinterval_count;
        let mut min_diff = f64::INFINITY;
        let gaps = oracles
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, o)| {
                        (0..cells)
                            .map(|k| {
                                let p = to_f64(&self.rounded[i][j][k]);
                                let mut worst = f64::NEG_INFINITY;
                                for s in 0..samples {
                                    let x = (k as f64 + s as f64 / (samples - 1) as f64) / cells as f64;
                                    let d = o.eval(x) - p;
                                    worst = worst.max(d);
                                    min_diff = min_diff.min(d);
                                }
                                worst
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (gaps, min_diff)
    }
}

fn max_lipschitz(oracles: &[Vec<DensityOracle>]) -> Result<(Rational, Rational), ApproxError> {
    let first = oracles
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| ApproxError::Spec("no oracles".into()))?;
    let mut k = first.lipschitz.clone();
    let mut top = first.upper.clone();
    for o in oracles.iter().flatten() {
        k = k.max(o.lipschitz.clone());
        top = top.max(o.upper.clone());
    }
    Ok((k, top))
}

pub fn discretize(
    oracles: &[Vec<DensityOracle>],
    eps: &Rational,
    mode: ApproxMode,
) -> Result<DiscretizationResult, ApproxError> {
    if !eps.is_positive() {
        return Err(ApproxError::BadEps(eps.clone()));
    }
    let n = oracles.len();
    if n == 0 || oracles.iter().any(|r| r.len() != n) {
        return Err(ApproxError::Spec("oracles must form a square matrix".into()));
    }
    let (k, top) = max_lipschitz(oracles)?;
    let count = mode.cell_count(n, &k, eps);
    let cells = count
        .to_integer()
        .to_u64()
        .filter(|&c| c <= MAX_CELLS)
        .ok_or_else(|| ApproxError::Spec(format!("{count} cells exceeds the limit {MAX_CELLS}")))?
        as usize;
    let grid = DyadicGrid::for_eps(eps, top)?;
    let h = ratio(1, cells as i64);
    let margin = to_f64(&(&k * &h / int(2)));
    let breaks: Vec<Rational> = (0..=cells).map(|c| ratio(c as i64, cells as i64)).collect();

    let mut minima = vec![vec![Vec::with_capacity(cells); n]; n];
    let mut rounded = vec![vec![Vec::with_capacity(cells); n]; n];
    let mut densities = Vec::with_capacity(n);
    let mut evaluations = 0u64;
    for (i, row) in oracles.iter().enumerate() {
        let mut drow = Vec::with_capacity(n);
        for (j, o) in row.iter().enumerate() {
            for c in 0..cells {
                let sample = [0.0, 0.5, 1.0].map(|t| o.eval((c as f64 + t) / cells as f64));
                evaluations += 3;
                let low = sample.iter().copied().fold(f64::INFINITY, f64::min);
                if !low.is_finite() {
                    return Err(ApproxError::OracleContract {
                        agent: i,
                        holder: j,
                        detail: format!("non-finite value in cell {c}"),
                    });
                }
                let estimate = (low - margin).max(0.0);
                let p = dyadic_floor(estimate, &grid).map_err(|_| ApproxError::OracleContract {
                    agent: i,
                    holder: j,
                    detail: format!("cell {c} minimum {estimate} above the upper bound {}", grid.range_top),
                })?;
                minima[i][j].push(estimate);
                rounded[i][j].push(p);
            }
            drow.push(PiecewiseDensity::step(&breaks, &rounded[i][j])?);
        }
        densities.push(drow);
    }
    Ok(DiscretizationResult {
        instance: Instance::build(densities, Normalization::Skip)?,
        subinterval_count: cells,
        grid,
        cell_width: h,
        minima,
        rounded,
        band: mode.band(n, eps),
        lipschitz: k,
        oracle_evaluations: evaluations,
    })
}

/// Composite-midpoint estimates of `V_{i,j}(A_p)` against the true densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAudit {
    pub values: Vec<Vec<Vec<f64>>>,
    pub agent_values: Vec<f64>,
    pub social_cost: f64,
    pub quadrature_cells: usize,
    /// Bound on the quadrature error of any single agent value.
    pub error_bound: f64,
    pub tolerance: f64,
    /// `max_i V_i(A) − 1/n`.
    pub proportional_excess: f64,
    /// `max_{i≠j} [V_ii(A_i) + V_ij(A_j) − V_ii(A_j) − V_ij(A_i)]`.
    pub swap_ef_excess: f64,
}

impl QuadratureAudit {
    pub fn proportional(&self) -> bool {
        self.proportional_excess <= self.tolerance
    }

    pub fn swap_ef(&self, eps: f64) -> bool {
        self.swap_ef_excess <= eps + self.tolerance
    }
}

fn integrate(o: &DensityOracle, lo: f64, hi: f64, q: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let qf = q as f64;
    let first = ((lo * qf).floor() as usize).min(q.saturating_sub(1));
    let last = ((hi * qf).ceil() as usize).clamp(first + 1, q);
    (first..last)
        .map(|c| {
            let a = (c as f64 / qf).max(lo);
            let b = ((c + 1) as f64 / qf).min(hi);
            if b > a {
                (b - a) * o.eval(0.5 * (a + b))
            } else {
                0.0
            }
        })
        .sum()
}

pub fn quadrature_audit(oracles: &[Vec<DensityOracle>], alloc: &Allocation, quadrature_cells: usize) -> QuadratureAudit {
    let n = oracles.len();
    let pieces: Vec<Vec<(f64, f64)>> = alloc
        .pieces
        .iter()
        .map(|p| p.intervals().iter().map(|iv| (to_f64(&iv.lo), to_f64(&iv.hi))).collect())
        .collect();
    let values: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    pieces
                        .iter()
                        .map(|p| p.iter().map(|&(lo, hi)| integrate(&oracles[i][j], lo, hi, quadrature_cells)).sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    let agent_values: Vec<f64> = (0..n).map(|i| (0..n).map(|j| values[i][j][j]).sum()).collect();
    let share = 1.0 / n as f64;
    let proportional_excess = agent_values.iter().map(|v| v - share).fold(f64::NEG_INFINITY, f64::max);
    let mut swap_ef_excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let d = values[i][i][i] + values[i][j][j] - values[i][i][j] - values[i][j][i];
            swap_ef_excess = swap_ef_excess.max(d);
        }
    }
    let k = oracles.iter().flatten().map(|o| to_f64(&o.lipschitz)).fold(0.0, f64::max);
    QuadratureAudit {
        social_cost: agent_values.iter().sum(),
        agent_values,
        values,
        quadrature_cells,
        // Midpoint rule: |error| ≤ K·w²/4 per sub-interval of width w ≤ 1/Q,
        // summed over total width ≤ 1 for each of the n holders.
        error_bound: n as f64 * k / (4.0 * quadrature_cells as f64),
        tolerance: QUADRATURE_TOLERANCE,
        proportional_excess,
        swap_ef_excess,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOutcome {
    pub allocation: Allocation,
    /// Audit against the discretized instance at the enforced tolerances.
    pub discrete_report: FairnessReport,
    pub discrete_objective: Rational,
    pub discretization: DiscretizationResult,
    pub audit: QuadratureAudit,
    pub mode: ApproxMode,
    pub eps: Rational,
    /// `e(A′)` may exceed the true optimum by at most this much.
    pub efficiency_slack: Rational,
}

impl ApproxOutcome {
    pub fn gap_note(&self) -> String {
        let (what, bound) = match self.mode {
            ApproxMode::Prop => ("optimal proportional", "eps"),
            ApproxMode::SwapEf => ("optimal proportional swap envy-free", "n*eps/4"),
        };
        format!(
            "social cost is within {bound} = {} of the {what} allocation for the true densities",
            format_rational(&self.efficiency_slack)
        )
    }

    pub fn true_proportional(&self) -> bool {
        self.audit.proportional()
    }

    pub fn true_swap_ef(&self) -> bool {
        self.audit.swap_ef(to_f64(&self.eps))
    }
}

pub fn approx_optimal(
    oracles: &[Vec<DensityOracle>],
    eps: &Rational,
    mode: ApproxMode,
) -> Result<ApproxOutcome, ApproxError> {
    let disc = discretize(oracles, eps, mode)?;
    let n = disc.instance.n();
    let lp_mode = match mode {
        ApproxMode::Prop => LpMode::Proportional,
        ApproxMode::SwapEf => LpMode::ProportionalEpsSwapEf(eps / int(2)),
    };
    let best = optimal_fair_allocation(&disc.instance, lp_mode)?;
    let prop_cells = ApproxMode::Prop.cell_count(n, &disc.lipschitz, eps);
    let q = 64 * prop_cells.to_integer().to_usize().unwrap_or(usize::MAX / 64).min(MAX_CELLS as usize);
    let audit = quadrature_audit(oracles, &best.allocation, q);
    Ok(ApproxOutcome {
        allocation: best.allocation,
        discrete_report: best.report,
        discrete_objective: best.objective,
        discretization: disc,
        audit,
        mode,
        efficiency_slack: mode.efficiency_slack(n, eps),
        eps: eps.clone(),
    })
}
