//! Evaluate and cut queries against an instance, with per-pair accounting.
//!
//! Trace scripts hold one query per line, `eval i j x y` or `cut i j x alpha`,
//! with 0-based agents; blank lines and `#` comments are skipped.

use crate::error::RwError;
use crate::model::{Allocation, Instance, Interval, Piece};
use crate::optimize::IntervalValues;
use crate::rational::{format_rational, int, parse_rational, serde_str, Rational};
use crate::roots::{Quadratic, Root};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryLedger {
    evals: Vec<Vec<u64>>,
    cuts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub agent: usize,
    pub holder: usize,
    pub evaluate: u64,
    pub cut: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub evaluate: u64,
    pub cut: u64,
    pub total: u64,
    /// Pairs with at least one query.
    pub pairs: Vec<PairCount>,
}

impl QueryLedger {
    pub fn new(n: usize) -> Self {
        Self {
            evals: vec![vec![0; n]; n],
            cuts: vec![vec![0; n]; n],
        }
    }

    pub fn evaluations(&self, i: usize, j: usize) -> u64 {
        self.evals[i][j]
    }

    pub fn cuts(&self, i: usize, j: usize) -> u64 {
        self.cuts[i][j]
    }

    pub fn total_evaluations(&self) -> u64 {
        self.evals.iter().flatten().sum()
    }

    pub fn total_cuts(&self) -> u64 {
        self.cuts.iter().flatten().sum()
    }

    pub fn total(&self) -> u64 {
        self.total_evaluations() + self.total_cuts()
    }

    pub fn reset(&mut self) {
        for row in self.evals.iter_mut().chain(self.cuts.iter_mut()) {
            row.fill(0);
        }
    }

    pub fn summary(&self) -> LedgerSummary {
        let n = self.evals.len();
        let pairs = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.evals[i][j] + self.cuts[i][j] > 0)
            .map(|(i, j)| PairCount {
                agent: i,
                holder: j,
                evaluate: self.evals[i][j],
                cut: self.cuts[i][j],
            })
            .collect();
        LedgerSummary {
            evaluate: self.total_evaluations(),
            cut: self.total_cuts(),
            total: self.total(),
            pairs,
        }
    }
}

/// Answers queries from an exact instance and records them.
#[derive(Debug, Clone)]
pub struct RwSession<'a> {
    instance: &'a Instance,
    ledger: QueryLedger,
}

impl<'a> RwSession<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Self {
            instance,
            ledger: QueryLedger::new(instance.n()),
        }
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn query_count(&self) -> LedgerSummary {
        self.ledger.summary()
    }

    pub fn reset(&mut self) {
        self.ledger.reset();
    }

    fn check_agents(&self, i: usize, j: usize) -> Result<(), RwError> {
        let n = self.instance.n();
        match (i < n, j < n) {
            (true, true) => Ok(()),
            (false, _) => Err(RwError::BadAgent(i)),
            _ => Err(RwError::BadAgent(j)),
        }
    }

    /// `V_{i,j}([x, y])`.
    pub fn evaluate(&mut self, i: usize, j: usize, x: &Rational, y: &Rational) -> Result<Rational, RwError> {
        self.check_agents(i, j)?;
        if x.is_negative() || x > y || *y > Rational::one() {
            return Err(RwError::BadRange(format!("need 0 <= x <= y <= 1, got x = {x}, y = {y}")));
        }
        self.ledger.evals[i][j] += 1;
        Ok(self.instance.density(i, j).integrate_interval(&Interval {
            lo: x.clone(),
            hi: y.clone(),
        }))
    }

    /// Smallest `y ≥ x` with `V_{i,j}([x, y]) = alpha`.
    pub fn cut(&mut self, i: usize, j: usize, x: &Rational, alpha: &Rational) -> Result<Rational, RwError> {
        self.check_agents(i, j)?;
        if x.is_negative() || *x > Rational::one() {
            return Err(RwError::BadRange(format!("need 0 <= x <= 1, got {x}")));
        }
        if alpha.is_negative() {
            return Err(RwError::BadRange(format!("need alpha >= 0, got {alpha}")));
        }
        self.ledger.cuts[i][j] += 1;
        cut_point(self.instance, i, j, x, alpha)
    }
}

fn cut_point(instance: &Instance, i: usize, j: usize, x: &Rational, alpha: &Rational) -> Result<Rational, RwError> {
    let mut remaining = alpha.clone();
    if remaining.is_zero() {
        return Ok(x.clone());
    }
    let mut available = Rational::zero();
    for seg in instance.density(i, j).segments() {
        if seg.interval.hi <= *x {
            continue;
        }
        let lo = seg.interval.lo.clone().max(x.clone());
        let mass = seg.integral(&lo, &seg.interval.hi);
        if mass >= remaining {
            // a(y − lo) + b/2 (y² − lo²) = remaining
            let half_b = &seg.b / int(2);
            let q = Quadratic {
                c0: -(&seg.a * &lo + &half_b * &lo * &lo + &remaining),
                c1: seg.a.clone(),
                c2: half_b,
            };
            return match q.smallest_root_in(&lo, &seg.interval.hi) {
                Some(Root::Exact(y)) => Ok(y),
                Some(Root::Irrational { lo, hi }) => Err(RwError::Irrational { lo, hi }),
                None => unreachable!("segment mass covers the remaining target"),
            };
        }
        remaining -= &mass;
        available += mass;
    }
    Err(RwError::Unreachable {
        available,
        shortfall: remaining,
    })
}

impl IntervalValues for RwSession<'_> {
    fn agents(&self) -> usize {
        self.instance.n()
    }

    fn refinement(&self) -> Vec<Interval> {
        self.instance.intervals()
    }

    fn interval_value(&mut self, i: usize, j: usize, interval: &Interval) -> Rational {
        self.evaluate(i, j, &interval.lo, &interval.hi)
            .expect("refinement intervals are valid query ranges")
    }
}

/// The two-agent single-cut protocol driven purely by evaluate queries, for
/// piecewise-constant instances: agent 2 values every refinement interval
/// under both holders, the cut is interpolated inside the interval where the
/// balance function changes sign, and agent 1 values both sides.
pub fn two_agent_protocol_queries(session: &mut RwSession<'_>) -> Result<Allocation, RwError> {
    let inst = session.instance;
    if inst.n() != 2 {
        return Err(RwError::Unsupported(format!("needs 2 agents, got {}", inst.n())));
    }
    if !inst.is_piecewise_constant() {
        return Err(RwError::Unsupported("needs piecewise-constant densities".into()));
    }
    let intervals = inst.intervals();
    let mut other = Vec::with_capacity(intervals.len());
    let mut own = Vec::with_capacity(intervals.len());
    for iv in &intervals {
        other.push(session.evaluate(1, 0, &iv.lo, &iv.hi)?);
        own.push(session.evaluate(1, 1, &iv.lo, &iv.hi)?);
    }
    let t_other: Rational = other.iter().sum();
    let t_own: Rational = own.iter().sum();
    // F(x) = 2·P_other(x) − 2·P_own(x) + T_own − T_other, linear on each interval.
    let mut f = &t_own - &t_other;
    let mut cut = None;
    for (k, iv) in intervals.iter().enumerate() {
        if f.is_zero() {
            cut = Some(iv.lo.clone());
            break;
        }
        let step = int(2) * (&other[k] - &own[k]);
        let next = &f + &step;
        if !step.is_zero() && (f.is_negative() != next.is_negative() || next.is_zero()) {
            cut = Some(&iv.lo - &f / &step * iv.length());
            break;
        }
        f = next;
    }
    let y = cut.unwrap_or_else(Rational::one);
    let (zero, one) = (Rational::zero(), Rational::one());
    let left_cost = session.evaluate(0, 0, &zero, &y)? + session.evaluate(0, 1, &y, &one)?;
    let right_cost = session.evaluate(0, 0, &y, &one)? + session.evaluate(0, 1, &zero, &y)?;
    let left = Piece::span(zero, y.clone()).expect("0 <= y");
    let right = Piece::span(y, one).expect("y <= 1");
    Ok(if left_cost <= right_cost {
        Allocation::new(vec![left, right])
    } else {
        Allocation::new(vec![right, left])
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Query {
    Eval {
        agent: usize,
        holder: usize,
        #[serde(with = "serde_str")]
        x: Rational,
        #[serde(with = "serde_str")]
        y: Rational,
    },
    Cut {
        agent: usize,
        holder: usize,
        #[serde(with = "serde_str")]
        x: Rational,
        #[serde(with = "serde_str")]
        alpha: Rational,
    },
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Query::Eval { agent, holder, x, y } => {
                write!(f, "eval {agent} {holder} {} {}", format_rational(x), format_rational(y))
            }
            Query::Cut { agent, holder, x, alpha } => {
                write!(f, "cut {agent} {holder} {} {}", format_rational(x), format_rational(alpha))
            }
        }
    }
}

const MAX_TRACE_LINES: usize = 1_000_000;

pub fn parse_trace(text: &str) -> Result<Vec<Query>, RwError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if line > MAX_TRACE_LINES {
            return Err(RwError::Script { line, message: "trace too long".into() });
        }
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| RwError::Script { line, message };
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", words.len())));
        }
        let agent: usize = words[1].parse().map_err(|_| err(format!("bad agent {:?}", words[1])))?;
        let holder: usize = words[2].parse().map_err(|_| err(format!("bad agent {:?}", words[2])))?;
        let x = parse_rational(words[3]).map_err(|e| err(e.to_string()))?;
        let v = parse_rational(words[4]).map_err(|e| err(e.to_string()))?;
        out.push(match words[0] {
            "eval" => Query::Eval { agent, holder, x, y: v },
            "cut" => Query::Cut { agent, holder, x, alpha: v },
            other => return Err(err(format!("unknown query {other:?}"))),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub query: Query,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn run_trace(session: &mut RwSession<'_>, queries: &[Query]) -> Vec<Answer> {
    queries
        .iter()
        .map(|q| {
            let result = match q {
                Query::Eval { agent, holder, x, y } => session.evaluate(*agent, *holder, x, y),
                Query::Cut { agent, holder, x, alpha } => session.cut(*agent, *holder, x, alpha),
            };
            match result {
                Ok(v) => Answer { query: q.clone(), value: Some(format_rational(&v)), error: None },
                Err(e) => Answer { query: q.clone(), value: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::optimize::{greedy_from, greedy_optimal};
    use crate::rational::ratio;

    #[test]
    fn example_queries() {
        let ex2 = fixtures::example2().instance().unwrap();
        let mut s = RwSession::new(&ex2);
        assert_eq!(s.evaluate(0, 0, &int(0), &ratio(1, 2)).unwrap(), ratio(3, 8));
        assert_eq!(s.cut(0, 0, &int(0), &ratio(3, 8)).unwrap(), ratio(1, 2));
        assert_eq!(s.evaluate(1, 0, &ratio(1, 3), &ratio(1, 3)).unwrap(), int(0));
        assert_eq!(s.cut(1, 1, &ratio(1, 3), &int(0)).unwrap(), ratio(1, 3));
        let summary = s.query_count();
        assert_eq!((summary.evaluate, summary.cut, summary.total), (2, 2, 4));
        s.reset();
        assert_eq!(s.query_count().total, 0);

        let ex1 = fixtures::example1(3).instance().unwrap();
        let mut s = RwSession::new(&ex1);
        assert_eq!(s.evaluate(0, 1, &ratio(1, 3), &ratio(2, 3)).unwrap(), ratio(1, 3));
        assert_eq!(s.cut(0, 1, &int(0), &ratio(1, 3)).unwrap(), ratio(2, 3));
        // Zero-density plateau: the leftmost point wins.
        assert_eq!(s.cut(0, 1, &int(0), &int(0)).unwrap(), int(0));
        assert_eq!(s.cut(0, 1, &ratio(2, 3), &int(0)).unwrap(), ratio(2, 3));
    }

    #[test]
    fn query_errors() {
        let ex2 = fixtures::example2().instance().unwrap();
        let mut s = RwSession::new(&ex2);
        assert!(matches!(s.evaluate(0, 0, &ratio(1, 2), &ratio(1, 4)), Err(RwError::BadRange(_))));
        assert!(matches!(s.evaluate(0, 2, &int(0), &int(1)), Err(RwError::BadAgent(2))));
        assert_eq!(
            s.cut(0, 0, &ratio(1, 2), &int(1)),
            Err(RwError::Unreachable { available: ratio(1, 8), shortfall: ratio(7, 8) })
        );
        assert!(s.cut(0, 0, &int(0), &int(-1)).is_err());
        let lin = Instance::new(vec![vec![fixtures::linear(int(0), int(2))]]).unwrap();
        let mut s = RwSession::new(&lin);
        assert_eq!(s.cut(0, 0, &int(0), &ratio(1, 4)).unwrap(), ratio(1, 2));
        assert!(matches!(s.cut(0, 0, &int(0), &ratio(1, 2)), Err(RwError::Irrational { .. })));
    }

    #[test]
    fn greedy_through_queries() {
        let ex4 = fixtures::example4().instance().unwrap();
        let mut s = RwSession::new(&ex4);
        let a = greedy_from(&mut s);
        assert_eq!(a, greedy_optimal(&ex4));
        let (n, m) = (ex4.n() as u64, ex4.m() as u64);
        assert_eq!(s.query_count().evaluate, m * n * n);
        assert_eq!(s.query_count().cut, 0);
    }

    #[test]
    fn protocol_through_queries_matches_direct() {
        let ex2 = fixtures::example2().instance().unwrap();
        let mut s = RwSession::new(&ex2);
        let a = two_agent_protocol_queries(&mut s).unwrap();
        assert_eq!(a, crate::protocols::two_agent_protocol(&ex2).unwrap());
        assert_eq!(s.query_count().evaluate, 2 * ex2.m() as u64 + 4);
    }

    #[test]
    fn trace_scripts() {
        let q = parse_trace("# header\neval 0 0 0 1/2\n\ncut 0 0 0 0.375  # inverse\n").unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[1].to_string(), "cut 0 0 0 3/8");
        let ex2 = fixtures::example2().instance().unwrap();
        let mut s = RwSession::new(&ex2);
        let answers = run_trace(&mut s, &q);
        assert_eq!(answers[0].value.as_deref(), Some("3/8"));
        assert_eq!(answers[1].value.as_deref(), Some("1/2"));
        for bad in ["eval 0 0 0", "evl 0 0 0 1", "eval -1 0 0 1", "cut 0 0 x 1"] {
            assert!(matches!(parse_trace(bad), Err(RwError::Script { line: 1, .. })), "{bad}");
        }
    }
}
