//! Proportionality, swap envy-freeness and swap stability, with additive
//! ε-relaxations and full violation lists.
//!
//! All predicates read a [`ValueTensor`] `V[i][j][p] = V_{i,j}(A_p)`, so the
//! same code serves concrete allocations and the brute-force enumerator.

use crate::error::ModelError;
use crate::model::{count_cuts, Allocation, Instance};
use crate::rational::{serde_str, serde_str_vec, Rational};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Proportional,
    SwapEf,
    SwapStable,
}

impl Notion {
    pub const ALL: [Notion; 3] = [Notion::Proportional, Notion::SwapEf, Notion::SwapStable];

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "prop" | "proportional" => Some(Notion::Proportional),
            "swapef" | "swap-ef" | "swap_ef" => Some(Notion::SwapEf),
            "swapstable" | "swap-stable" | "swap_stable" => Some(Notion::SwapStable),
            _ => None,
        }
    }
}

/// One failed inequality. Every witness satisfies `lhs > rhs + ε` exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ProportionalExcess {
        agent: usize,
        #[serde(with = "serde_str")]
        value: Rational,
        #[serde(with = "serde_str")]
        bound: Rational,
    },
    SwapEnvy {
        agent: usize,
        other: usize,
        #[serde(with = "serde_str")]
        lhs: Rational,
        #[serde(with = "serde_str")]
        rhs: Rational,
    },
    SwapInstability {
        agent: usize,
        first: usize,
        second: usize,
        #[serde(with = "serde_str")]
        lhs: Rational,
        #[serde(with = "serde_str")]
        rhs: Rational,
    },
}

impl Violation {
    /// Amount by which the inequality fails before ε is applied.
    pub fn gap(&self) -> Rational {
        match self {
            Violation::ProportionalExcess { value, bound, .. } => value - bound,
            Violation::SwapEnvy { lhs, rhs, .. } | Violation::SwapInstability { lhs, rhs, .. } => {
                lhs - rhs
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FairnessVerdict {
    pub notion: Notion,
    #[serde(with = "serde_str")]
    pub epsilon: Rational,
    pub holds: bool,
    pub witnesses: Vec<Violation>,
}

impl FairnessVerdict {
    fn from_witnesses(notion: Notion, epsilon: &Rational, witnesses: Vec<Violation>) -> Self {
        Self {
            notion,
            epsilon: epsilon.clone(),
            holds: witnesses.is_empty(),
            witnesses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    #[serde(with = "serde_str_vec")]
    pub per_agent_values: Vec<Rational>,
    #[serde(with = "serde_str")]
    pub social_cost: Rational,
    pub cuts: usize,
    pub verdicts: Vec<FairnessVerdict>,
}

impl FairnessReport {
    pub fn verdict(&self, notion: Notion) -> &FairnessVerdict {
        self.verdicts
            .iter()
            .find(|v| v.notion == notion)
            .expect("audit produces every notion")
    }

    pub fn holds(&self, notion: Notion) -> bool {
        self.verdict(notion).holds
    }

    pub fn all_hold(&self, notions: &[Notion]) -> bool {
        notions.iter().all(|&n| self.holds(n))
    }
}

/// `V[i][j][p] = V_{i,j}(A_p)` for every evaluator `i`, holder `j`, piece `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueTensor {
    values: Vec<Vec<Vec<Rational>>>,
}

impl ValueTensor {
    pub fn from_allocation(instance: &Instance, alloc: &Allocation) -> Result<Self, ModelError> {
        let n = instance.n();
        if alloc.n() != n {
            return Err(ModelError::Dimension {
                expected: n,
                found: alloc.n(),
            });
        }
        let values = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|p| instance.value(i, j, alloc.piece(p))).collect())
                    .collect()
            })
            .collect();
        Ok(Self { values })
    }

    /// Wraps a precomputed `n × n × n` table.
    pub fn from_values(values: Vec<Vec<Vec<Rational>>>) -> Self {
        let n = values.len();
        debug_assert!(values.iter().all(|r| r.len() == n && r.iter().all(|c| c.len() == n)));
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize, p: usize) -> &Rational {
        &self.values[i][j][p]
    }

    /// `V_i(A) = Σ_j V_{i,j}(A_j)`.
    pub fn agent_value(&self, i: usize) -> Rational {
        (0..self.n()).map(|j| &self.values[i][j][j]).sum()
    }

    pub fn social_cost(&self) -> Rational {
        (0..self.n()).map(|i| self.agent_value(i)).sum()
    }

    pub fn proportional_violations(&self, epsilon: &Rational) -> Vec<Violation> {
        let bound = Rational::new(1.into(), self.n().into());
        let limit = &bound + epsilon;
        (0..self.n())
            .filter_map(|i| {
                let value = self.agent_value(i);
                (value > limit).then(|| Violation::ProportionalExcess {
                    agent: i,
                    value,
                    bound: bound.clone(),
                })
            })
            .collect()
    }

    /// Ordered pairs `i ≠ j`:
    /// `V_{i,i}(A_i) + V_{i,j}(A_j) ≤ V_{i,i}(A_j) + V_{i,j}(A_i) + ε`.
    pub fn swap_ef_violations(&self, epsilon: &Rational) -> Vec<Violation> {
        let n = self.n();
        let v = &self.values;
        let mut out = Vec::new();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let lhs = &v[i][i][i] + &v[i][j][j];
                let rhs = &v[i][i][j] + &v[i][j][i];
                if lhs > &rhs + epsilon {
                    out.push(Violation::SwapEnvy {
                        agent: i,
                        other: j,
                        lhs,
                        rhs,
                    });
                }
            }
        }
        out
    }

    /// Every evaluator `i` and unordered pair `j < k` (including `i ∈ {j, k}`):
    /// `V_{i,j}(A_j) + V_{i,k}(A_k) ≤ V_{i,j}(A_k) + V_{i,k}(A_j) + ε`.
    pub fn swap_stable_violations(&self, epsilon: &Rational) -> Vec<Violation> {
        let n = self.n();
        let v = &self.values;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in j + 1..n {
                    let lhs = &v[i][j][j] + &v[i][k][k];
                    let rhs = &v[i][j][k] + &v[i][k][j];
                    if lhs > &rhs + epsilon {
                        out.push(Violation::SwapInstability {
                            agent: i,
                            first: j,
                            second: k,
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn verdict(&self, notion: Notion, epsilon: &Rational) -> FairnessVerdict {
        let witnesses = match notion {
            Notion::Proportional => self.proportional_violations(epsilon),
            Notion::SwapEf => self.swap_ef_violations(epsilon),
            Notion::SwapStable => self.swap_stable_violations(epsilon),
        };
        FairnessVerdict::from_witnesses(notion, epsilon, witnesses)
    }

    /// Cheap yes/no check, short-circuiting on the first violation.
    pub fn satisfies(&self, notion: Notion, epsilon: &Rational) -> bool {
        let n = self.n();
        let v = &self.values;
        match notion {
            Notion::Proportional => {
                let limit = Rational::new(1.into(), n.into()) + epsilon;
                (0..n).all(|i| self.agent_value(i) <= limit)
            }
            Notion::SwapEf => (0..n).all(|i| {
                (0..n).filter(|&j| j != i).all(|j| {
                    &v[i][i][i] + &v[i][j][j] <= &v[i][i][j] + &v[i][j][i] + epsilon
                })
            }),
            Notion::SwapStable => (0..n).all(|i| {
                (0..n).all(|j| {
                    (j + 1..n).all(|k| {
                        &v[i][j][j] + &v[i][k][k] <= &v[i][j][k] + &v[i][k][j] + epsilon
                    })
                })
            }),
        }
    }
}

pub fn check_proportional(
    instance: &Instance,
    alloc: &Allocation,
    epsilon: &Rational,
) -> Result<FairnessVerdict, ModelError> {
    Ok(ValueTensor::from_allocation(instance, alloc)?.verdict(Notion::Proportional, epsilon))
}

pub fn check_swap_ef(
    instance: &Instance,
    alloc: &Allocation,
    epsilon: &Rational,
) -> Result<FairnessVerdict, ModelError> {
    Ok(ValueTensor::from_allocation(instance, alloc)?.verdict(Notion::SwapEf, epsilon))
}

pub fn check_swap_stable(
    instance: &Instance,
    alloc: &Allocation,
    epsilon: &Rational,
) -> Result<FairnessVerdict, ModelError> {
    Ok(ValueTensor::from_allocation(instance, alloc)?.verdict(Notion::SwapStable, epsilon))
}

pub fn audit(
    instance: &Instance,
    alloc: &Allocation,
    epsilon: &Rational,
) -> Result<FairnessReport, ModelError> {
    let tensor = ValueTensor::from_allocation(instance, alloc)?;
    let per_agent_values: Vec<Rational> = (0..tensor.n()).map(|i| tensor.agent_value(i)).collect();
    let social_cost = per_agent_values.iter().sum();
    Ok(FairnessReport {
        per_agent_values,
        social_cost,
        cuts: count_cuts(alloc),
        verdicts: Notion::ALL
            .iter()
            .map(|&n| tensor.verdict(n, epsilon))
            .collect(),
    })
}

/// `audit` at ε = 0.
pub fn audit_exact(instance: &Instance, alloc: &Allocation) -> Result<FairnessReport, ModelError> {
    audit(instance, alloc, &Rational::zero())
}

/// `1/n` as a rational.
pub fn fair_share(n: usize) -> Rational {
    Rational::new(1.into(), n.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::int;
    use crate::model::{Interval, Piece};
    use crate::protocols::lower_bound_instance;
    use crate::rational::ratio;

    fn halves(first_left: bool) -> Allocation {
        let l = Piece::single(Interval::new(int(0), ratio(1, 2)).unwrap());
        let r = Piece::single(Interval::new(ratio(1, 2), int(1)).unwrap());
        if first_left {
            Allocation::new(vec![l, r])
        } else {
            Allocation::new(vec![r, l])
        }
    }

    #[test]
    fn example1_diagonal_fails_proportionality_everywhere() {
        for n in 2..6 {
            let inst = fixtures::example1(n).instance().unwrap();
            let v = check_proportional(&inst, &Allocation::contiguous(n), &int(0)).unwrap();
            assert!(!v.holds);
            assert_eq!(v.witnesses.len(), n);
            for w in &v.witnesses {
                assert!(matches!(w, Violation::ProportionalExcess { value, .. } if *value == int(1)));
            }
        }
    }

    #[test]
    fn empty_allocation_is_fair() {
        let inst = fixtures::example2().instance().unwrap();
        let report = audit_exact(&inst, &Allocation::empty(2)).unwrap();
        assert!(report.all_hold(&Notion::ALL));
        assert_eq!(report.cuts, 0);
        assert_eq!(report.social_cost, int(0));
    }

    #[test]
    fn lower_bound_thirds() {
        let inst = lower_bound_instance(3, &ratio(1, 10)).unwrap();
        let alloc = Allocation::contiguous(3);
        let prop = check_proportional(&inst, &alloc, &int(0)).unwrap();
        assert!(prop.holds);
        let report = audit_exact(&inst, &alloc).unwrap();
        assert_eq!(
            report.per_agent_values,
            vec![ratio(1, 3), ratio(29, 90), ratio(29, 90)]
        );
        let ef = check_swap_ef(&inst, &alloc, &int(0)).unwrap();
        assert!(!ef.holds);
        let agent0: Vec<_> = ef
            .witnesses
            .iter()
            .filter(|w| matches!(w, Violation::SwapEnvy { agent: 0, .. }))
            .collect();
        assert_eq!(agent0.len(), 2);
        for w in agent0 {
            assert!(matches!(w, Violation::SwapEnvy { lhs, rhs, .. }
                if *lhs == ratio(1, 3) && *rhs == ratio(1, 6)));
        }
        assert!(!report.holds(Notion::SwapStable));
    }

    #[test]
    fn example2_allocation_envy_both_ways() {
        let inst = fixtures::example2().instance().unwrap();
        let v = check_swap_ef(&inst, &halves(true), &int(0)).unwrap();
        assert_eq!(v.witnesses.len(), 2);
        for w in &v.witnesses {
            assert!(matches!(w, Violation::SwapEnvy { lhs, rhs, .. }
                if *lhs == ratio(5, 8) && *rhs == ratio(3, 8)));
        }
        // Relaxing by exactly the gap makes it hold; just below does not.
        assert!(check_swap_ef(&inst, &halves(true), &ratio(1, 4)).unwrap().holds);
        assert!(!check_swap_ef(&inst, &halves(true), &ratio(1, 5)).unwrap().holds);
    }

    #[test]
    fn example2_swapped_allocation_is_fair() {
        let inst = fixtures::example2().instance().unwrap();
        let report = audit_exact(&inst, &halves(false)).unwrap();
        assert_eq!(report.per_agent_values, vec![ratio(3, 8), ratio(3, 8)]);
        assert!(report.holds(Notion::Proportional));
        assert!(report.holds(Notion::SwapEf));
        assert_eq!(report.cuts, 1);
    }

    #[test]
    fn identical_pieces_are_swap_envy_free() {
        // Every agent values every piece the same: both halves of a constant.
        let inst = fixtures::symmetric().instance().unwrap();
        let quarters = Allocation::new(vec![
            Piece::from_intervals([
                Interval::new(int(0), ratio(1, 4)).unwrap(),
                Interval::new(ratio(1, 2), ratio(3, 4)).unwrap(),
            ]),
            Piece::from_intervals([
                Interval::new(ratio(1, 4), ratio(1, 2)).unwrap(),
                Interval::new(ratio(3, 4), int(1)).unwrap(),
            ]),
        ]);
        assert!(check_swap_ef(&inst, &quarters, &int(0)).unwrap().holds);
    }

    #[test]
    fn example4_thirds_not_swap_stable() {
        let inst = fixtures::example4().instance().unwrap();
        let v = check_swap_stable(&inst, &Allocation::contiguous(3), &int(0)).unwrap();
        assert!(!v.holds);
        assert!(v.witnesses.iter().any(|w| matches!(w,
            Violation::SwapInstability { agent: 0, first: 1, second: 2, lhs, rhs }
                if *lhs == ratio(4, 9) && *rhs == int(0))));
    }

    #[test]
    fn two_agent_swap_stability_equals_swap_ef() {
        let inst = fixtures::example2().instance().unwrap();
        for alloc in [halves(true), halves(false), Allocation::empty(2)] {
            let a = check_swap_ef(&inst, &alloc, &int(0)).unwrap().holds;
            let b = check_swap_stable(&inst, &alloc, &int(0)).unwrap().holds;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let inst = fixtures::example2().instance().unwrap();
        assert!(audit_exact(&inst, &Allocation::empty(3)).is_err());
    }

    #[test]
    fn satisfies_agrees_with_verdict() {
        let inst = lower_bound_instance(4, &ratio(1, 10)).unwrap();
        let t = ValueTensor::from_allocation(&inst, &Allocation::contiguous(4)).unwrap();
        for notion in Notion::ALL {
            for eps in [int(0), ratio(1, 6), int(1)] {
                assert_eq!(t.satisfies(notion, &eps), t.verdict(notion, &eps).holds);
            }
        }
    }

    #[test]
    fn notion_names() {
        assert_eq!(Notion::parse("prop"), Some(Notion::Proportional));
        assert_eq!(Notion::parse("swap-ef"), Some(Notion::SwapEf));
        assert_eq!(Notion::parse("SwapStable"), Some(Notion::SwapStable));
        assert_eq!(Notion::parse("maximin"), None);
    }
}
