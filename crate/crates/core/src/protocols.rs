//! Constructive allocations: the two-agent single-cut protocol, uniform and
//! sandwich allocations, and the lower-bound instance family.

use crate::error::ProtocolError;
use crate::model::{Allocation, Instance, Interval, Piece, PiecewiseDensity};
use crate::rational::{int, ratio, Rational};
use crate::roots::{Quadratic, Root};
use num_traits::{One, Zero};

/// `F(x) = V21([0,x]) + V22([x,1]) − V21([x,1]) − V22([0,x])` for a two-agent
/// instance, stored as one quadratic per refinement interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceFunction {
    pieces: Vec<(Interval, Quadratic)>,
}

impl BalanceFunction {
    pub fn new(instance: &Instance) -> Result<Self, ProtocolError> {
        if instance.n() != 2 {
            return Err(ProtocolError::NotTwoAgents(instance.n()));
        }
        let total_other = instance.density(1, 0).total();
        let total_own = instance.density(1, 1).total();
        // F(x) = 2·P_other(x) − 2·P_own(x) + T_own − T_other, with P the prefix integrals.
        let mut prefix_other = Rational::zero();
        let mut prefix_own = Rational::zero();
        let mut pieces = Vec::with_capacity(instance.m());
        for k in 0..instance.m() {
            let iv = instance.interval(k);
            let (a1, b1) = instance.coefficients(1, 0, k);
            let (a2, b2) = instance.coefficients(1, 1, k);
            let p = &iv.lo;
            let da = a1 - a2;
            let db = b1 - b2;
            let at_p = int(2) * (&prefix_other - &prefix_own) + &total_own - &total_other;
            let c1 = int(2) * &da;
            let c0 = at_p - &c1 * p - &db * p * p;
            pieces.push((iv.clone(), Quadratic { c0, c1, c2: db }));
            prefix_other += instance.interval_value(1, 0, k);
            prefix_own += instance.interval_value(1, 1, k);
        }
        Ok(Self { pieces })
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let idx = self
            .pieces
            .partition_point(|(iv, _)| &iv.hi < x)
            .min(self.pieces.len() - 1);
        self.pieces[idx].1.eval(x)
    }

    /// Smallest root in `[0, 1]`; one always exists since `F(0) = −F(1)`.
    pub fn smallest_root(&self) -> Root {
        self.pieces
            .iter()
            .find_map(|(iv, q)| q.smallest_root_in(&iv.lo, &iv.hi))
            .expect("continuous F with F(0) = -F(1) has a root in [0,1]")
    }
}

pub fn find_balance_point(instance: &Instance) -> Result<Root, ProtocolError> {
    Ok(BalanceFunction::new(instance)?.smallest_root())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAgentOutcome {
    pub allocation: Allocation,
    pub balance_point: Root,
    /// Agent 1 took `[0, ỹ]` (otherwise `[ỹ, 1]`).
    pub first_took_left: bool,
}

/// Cut at the balance point; agent 1 takes the side with the lower
/// `V11(own) + V12(other)`, ties going to the left side.
pub fn run_two_agent_protocol(instance: &Instance) -> Result<TwoAgentOutcome, ProtocolError> {
    let root = find_balance_point(instance)?;
    let y = root.point().clone();
    let left = Piece::span(Rational::zero(), y.clone())?;
    let right = Piece::span(y, Rational::one())?;
    let cost_left = instance.value(0, 0, &left) + instance.value(0, 1, &right);
    let cost_right = instance.value(0, 0, &right) + instance.value(0, 1, &left);
    let first_took_left = cost_left <= cost_right;
    let allocation = if first_took_left {
        Allocation::new(vec![left, right])
    } else {
        Allocation::new(vec![right, left])
    };
    Ok(TwoAgentOutcome {
        allocation,
        balance_point: root,
        first_took_left,
    })
}

pub fn two_agent_protocol(instance: &Instance) -> Result<Allocation, ProtocolError> {
    Ok(run_two_agent_protocol(instance)?.allocation)
}

/// Each agent gets the `i`-th of `n` equal contiguous slices of every
/// refinement interval.
pub fn uniform_allocation(instance: &Instance) -> Result<Allocation, ProtocolError> {
    if !instance.is_piecewise_constant() {
        return Err(ProtocolError::NotPiecewiseConstant);
    }
    let n = instance.n();
    let n_r = int(n as i64);
    let mut parts: Vec<Vec<Interval>> = vec![Vec::new(); n];
    for iv in instance.intervals() {
        let step = iv.length() / &n_r;
        for (i, part) in parts.iter_mut().enumerate() {
            part.push(Interval {
                lo: &iv.lo + &step * int(i as i64),
                hi: &iv.lo + &step * int(i as i64 + 1),
            });
        }
    }
    Ok(Allocation::new(parts.into_iter().map(Piece::from_intervals).collect()))
}

/// Agent `i` gets `[a + iα, a + (i+1)α] ∪ [b − (i+1)α, b − iα]` from every
/// refinement interval `[a, b]`, with `α = (b − a)/2n`.
pub fn sandwich_allocation(instance: &Instance) -> Allocation {
    let n = instance.n();
    let mut parts: Vec<Vec<Interval>> = vec![Vec::new(); n];
    for iv in instance.intervals() {
        let alpha = iv.length() / int(2 * n as i64);
        for (i, part) in parts.iter_mut().enumerate() {
            let inner = &alpha * int(i as i64);
            let outer = &alpha * int(i as i64 + 1);
            part.push(Interval {
                lo: &iv.lo + &inner,
                hi: &iv.lo + &outer,
            });
            part.push(Interval {
                lo: &iv.hi - &outer,
                hi: &iv.hi - &inner,
            });
        }
    }
    Allocation::new(parts.into_iter().map(Piece::from_intervals).collect())
}

/// Instance family on which the contiguous allocation is proportional but not
/// swap envy-free, so more than `n − 1` cuts are needed.
pub fn lower_bound_instance(n: usize, eps: &Rational) -> Result<Instance, ProtocolError> {
    if n < 3 {
        return Err(ProtocolError::BadParams(format!("need n >= 3, got {n}")));
    }
    if *eps <= Rational::zero() || *eps >= Rational::one() {
        return Err(ProtocolError::BadParams(format!("need 0 < eps < 1, got {eps}")));
    }
    let breaks: Vec<Rational> = (0..=n).map(|k| ratio(k as i64, n as i64)).collect();
    let on_block = |block: usize, inside: Rational, outside: Rational| {
        let values: Vec<Rational> = (0..n)
            .map(|k| if k == block { inside.clone() } else { outside.clone() })
            .collect();
        PiecewiseDensity::step(&breaks, &values)
    };
    let n_r = int(n as i64);
    let spread = int(1) / int(n as i64 - 1);
    let leak = eps / int(n as i64 - 1);
    let own = int(1) - eps / &n_r;
    let mut densities = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let d = match (i, j) {
                (0, 0) => on_block(0, int(1), int(0))?,
                (0, _) => on_block(j, int(0), spread.clone())?,
                _ if i == j => PiecewiseDensity::constant(own.clone()),
                _ => on_block(i, leak.clone(), int(0))?,
            };
            row.push(d);
        }
        densities.push(row);
    }
    Ok(Instance::new(densities)?)
}

/// `v_{i,1} ≡ 0` and `v_{i,j} ≡ 1/(n−1)` otherwise; giving everything to agent 1
/// is swap stable with zero cuts.
pub fn zero_cut_instance(n: usize) -> Result<(Instance, Allocation), ProtocolError> {
    if n < 2 {
        return Err(ProtocolError::BadParams(format!("need n >= 2, got {n}")));
    }
    let share = ratio(1, n as i64 - 1);
    let densities = (0..n)
        .map(|_| {
            (0..n)
                .map(|j| {
                    if j == 0 {
                        PiecewiseDensity::zero()
                    } else {
                        PiecewiseDensity::constant(share.clone())
                    }
                })
                .collect()
        })
        .collect();
    let mut pieces = vec![Piece::empty(); n];
    pieces[0] = Piece::single(Interval::unit());
    Ok((Instance::new(densities)?, Allocation::new(pieces)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{audit_exact, check_swap_stable, Notion, ValueTensor};
    use crate::fixtures::{self, linear};
    use crate::model::{agent_value, count_cuts};

    fn two_agent(v11: PiecewiseDensity, v12: PiecewiseDensity, v21: PiecewiseDensity, v22: PiecewiseDensity) -> Instance {
        Instance::new(vec![vec![v11, v12], vec![v21, v22]]).unwrap()
    }

    fn identical_pieces(inst: &Instance, alloc: &Allocation) -> bool {
        let t = ValueTensor::from_allocation(inst, alloc).unwrap();
        let n = inst.n();
        (0..n).all(|i| (0..n).all(|j| (1..n).all(|p| t.get(i, j, p) == t.get(i, j, 0))))
    }

    #[test]
    fn example2_balance_function() {
        let inst = fixtures::example2().instance().unwrap();
        let f = BalanceFunction::new(&inst).unwrap();
        assert_eq!(f.eval(&ratio(1, 4)), ratio(1, 8));
        assert_eq!(f.eval(&ratio(3, 4)), ratio(1, 8));
        assert_eq!(f.eval(&int(1)), int(0));
        assert_eq!(find_balance_point(&inst).unwrap(), Root::Exact(int(0)));
    }

    #[test]
    fn symmetric_columns_give_zero_function() {
        let half = PiecewiseDensity::constant(ratio(1, 2));
        let inst = two_agent(half.clone(), half.clone(), half.clone(), half);
        assert_eq!(find_balance_point(&inst).unwrap(), Root::Exact(int(0)));
    }

    #[test]
    fn closed_form_midpoint_root() {
        let inst = two_agent(
            PiecewiseDensity::constant(int(1)),
            PiecewiseDensity::zero(),
            PiecewiseDensity::constant(int(1)),
            PiecewiseDensity::zero(),
        );
        let f = BalanceFunction::new(&inst).unwrap();
        assert_eq!(f.eval(&int(0)), int(-1));
        assert_eq!(f.eval(&ratio(3, 4)), ratio(1, 2));
        assert_eq!(find_balance_point(&inst).unwrap(), Root::Exact(ratio(1, 2)));
        let out = run_two_agent_protocol(&inst).unwrap();
        // Both halves cost agent 1 exactly 1/2; the tie goes left.
        assert!(out.first_took_left);
        assert_eq!(agent_value(&inst, &out.allocation, 1).unwrap(), ratio(1, 2));
    }

    #[test]
    fn example2_protocol_outcome() {
        let inst = fixtures::example2().instance().unwrap();
        let out = run_two_agent_protocol(&inst).unwrap();
        assert!(out.first_took_left);
        assert!(out.allocation.piece(0).is_empty());
        assert_eq!(out.allocation.piece(1), &Piece::single(Interval::unit()));
        let report = audit_exact(&inst, &out.allocation).unwrap();
        assert!(report.holds(Notion::Proportional) && report.holds(Notion::SwapEf));
        assert_eq!(report.per_agent_values[1], ratio(1, 2));
        assert_eq!(report.cuts, 0);
    }

    #[test]
    fn balance_function_endpoints_cancel() {
        for fx in [fixtures::example2(), fixtures::symmetric()] {
            let inst = fx.instance().unwrap();
            let f = BalanceFunction::new(&inst).unwrap();
            assert_eq!(f.eval(&int(0)) + f.eval(&int(1)), int(0));
        }
    }

    #[test]
    fn linear_densities_protocol() {
        // v21 = 2x, v22 = 0 gives F(x) = 2x² − 1, root 1/√2.
        let inst = two_agent(
            PiecewiseDensity::constant(int(1)),
            PiecewiseDensity::zero(),
            linear(int(0), int(2)),
            PiecewiseDensity::zero(),
        );
        match find_balance_point(&inst).unwrap() {
            Root::Irrational { lo, hi } => assert!(lo < ratio(71, 100) && hi > ratio(70, 100)),
            other => panic!("expected bracket, got {other:?}"),
        }
        // v21 = 8x/11, v22 = 7/11 gives F(x) = (8/11)(x − 1/4)(x − 3/2).
        let inst = two_agent(
            PiecewiseDensity::constant(int(1)),
            PiecewiseDensity::zero(),
            linear(int(0), ratio(8, 11)),
            PiecewiseDensity::constant(ratio(7, 11)),
        );
        let out = run_two_agent_protocol(&inst).unwrap();
        assert_eq!(out.balance_point, Root::Exact(ratio(1, 4)));
        assert!(out.first_took_left);
        assert_eq!(agent_value(&inst, &out.allocation, 1).unwrap(), ratio(1, 2));
    }

    #[test]
    fn not_two_agents() {
        let inst = fixtures::example4().instance().unwrap();
        assert_eq!(find_balance_point(&inst), Err(ProtocolError::NotTwoAgents(3)));
        assert!(two_agent_protocol(&inst).is_err());
    }

    #[test]
    fn uniform_two_intervals() {
        let inst = fixtures::example2().instance().unwrap();
        let a = uniform_allocation(&inst).unwrap();
        let expect0 = Piece::from_intervals([
            Interval::new(int(0), ratio(1, 4)).unwrap(),
            Interval::new(ratio(1, 2), ratio(3, 4)).unwrap(),
        ]);
        assert_eq!(a.piece(0), &expect0);
        assert_eq!(count_cuts(&a), 3);
        assert!(identical_pieces(&inst, &a));
        assert!(check_swap_stable(&inst, &a, &int(0)).unwrap().holds);
    }

    #[test]
    fn uniform_single_agent() {
        let inst = Instance::new(vec![vec![PiecewiseDensity::constant(int(1))]]).unwrap();
        let a = uniform_allocation(&inst).unwrap();
        assert_eq!(a.piece(0), &Piece::single(Interval::unit()));
        assert_eq!(count_cuts(&a), 0);
    }

    #[test]
    fn uniform_rejects_linear() {
        let inst = Instance::new(vec![vec![linear(int(0), int(2))]]).unwrap();
        assert_eq!(uniform_allocation(&inst), Err(ProtocolError::NotPiecewiseConstant));
    }

    #[test]
    fn sandwich_linear_density() {
        let inst = two_agent(
            linear(int(0), int(1)),
            linear(ratio(1, 2), int(0)),
            linear(ratio(1, 2), int(0)),
            linear(ratio(1, 2), int(0)),
        );
        let a = sandwich_allocation(&inst);
        assert_eq!(
            a.piece(0),
            &Piece::from_intervals([
                Interval::new(int(0), ratio(1, 4)).unwrap(),
                Interval::new(ratio(3, 4), int(1)).unwrap(),
            ])
        );
        assert_eq!(a.piece(1), &Piece::span(ratio(1, 4), ratio(3, 4)).unwrap());
        assert_eq!(inst.value(0, 0, a.piece(0)), ratio(1, 4));
        assert_eq!(inst.value(0, 0, a.piece(1)), ratio(1, 4));
        assert!(identical_pieces(&inst, &a));
        assert_eq!(count_cuts(&a), 2);
    }

    #[test]
    fn sandwich_three_agents() {
        let d = linear(int(0), int(2));
        let z = PiecewiseDensity::zero();
        let inst = Instance::new(vec![
            vec![d.clone(), z.clone(), z.clone()],
            vec![z.clone(), d.clone(), z.clone()],
            vec![z.clone(), z, d],
        ])
        .unwrap();
        let a = sandwich_allocation(&inst);
        for p in 0..3 {
            assert_eq!(inst.value(0, 0, a.piece(p)), ratio(1, 3));
        }
        assert!(check_swap_stable(&inst, &a, &int(0)).unwrap().holds);
    }

    #[test]
    fn sandwich_single_agent() {
        let inst = Instance::new(vec![vec![PiecewiseDensity::constant(int(1))]]).unwrap();
        assert_eq!(sandwich_allocation(&inst).piece(0), &Piece::single(Interval::unit()));
    }

    #[test]
    fn lower_bound_family() {
        for (n, gap) in [(3, ratio(1, 6)), (4, ratio(1, 6))] {
            let inst = lower_bound_instance(n, &ratio(1, 10)).unwrap();
            assert!(inst.is_normalized());
            let report = audit_exact(&inst, &Allocation::contiguous(n)).unwrap();
            assert!(report.holds(Notion::Proportional));
            let ef = report.verdict(Notion::SwapEf);
            assert!(ef.witnesses.iter().any(|w| w.gap() == gap));
        }
        let inst = lower_bound_instance(3, &ratio(1, 10)).unwrap();
        assert_eq!(inst.density(1, 1).total(), ratio(29, 30));
        assert!(lower_bound_instance(2, &ratio(1, 10)).is_err());
        assert!(lower_bound_instance(3, &int(0)).is_err());
        assert!(lower_bound_instance(3, &int(1)).is_err());
    }

    #[test]
    fn zero_cut_swap_stable() {
        for n in 2..6 {
            let (inst, alloc) = zero_cut_instance(n).unwrap();
            let report = audit_exact(&inst, &alloc).unwrap();
            assert!(report.holds(Notion::SwapStable));
            assert_eq!(report.cuts, 0);
        }
    }
}
