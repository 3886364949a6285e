//! Reference instances from the literature, with expected properties
//! recomputed by hand integration. Where a published claim disagrees with the
//! recomputed value, the fixture carries a [`Discrepancy`] record.

use crate::error::ModelError;
use crate::model::{Allocation, DensitySegment, Instance, Interval, Normalization, PiecewiseDensity};
use crate::rational::{int, ratio, serde_str, Rational};
use crate::schema::{AllocationDoc, InstanceDoc};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// Worst-case diagonal instance with `n` agents.
    Ex1(usize),
    /// Two agents; the listed allocation is claimed proportional.
    Ex2,
    /// Three agents; claimed swap envy-free but not proportional.
    Ex3,
    /// Three agents; claimed proportional and swap envy-free but not swap stable.
    Ex4,
    /// Symmetric two-agent instance with `V11 = 2/3`, `V12 = 1/3`.
    Symmetric,
}

impl ExampleId {
    pub fn parse(text: &str, n: usize) -> Option<Self> {
        match text {
            "ex1" => Some(ExampleId::Ex1(n)),
            "ex2" => Some(ExampleId::Ex2),
            "ex3" => Some(ExampleId::Ex3),
            "ex4" => Some(ExampleId::Ex4),
            "thm8" => Some(ExampleId::Symmetric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub claimed: String,
    pub recomputed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizationFailure {
    pub agent: usize,
    #[serde(with = "serde_str")]
    pub sum: Rational,
}

/// Recomputed expectations for the fixture's allocation (evaluated on the raw
/// densities, even when they are not normalized).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedProperties {
    pub normalization_failure: Option<NormalizationFailure>,
    #[serde(with = "crate::rational::serde_str_vec")]
    pub agent_values: Vec<Rational>,
    pub proportional: Option<bool>,
    pub swap_ef: Option<bool>,
    pub swap_stable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub id: &'static str,
    pub densities: Vec<Vec<PiecewiseDensity>>,
    pub allocation: Option<Allocation>,
    pub expected: ExpectedProperties,
    pub discrepancies: Vec<Discrepancy>,
}

impl Fixture {
    /// Strict load; fails for fixtures that are not normalized.
    pub fn instance(&self) -> Result<Instance, ModelError> {
        Instance::new(self.densities.clone())
    }

    pub fn instance_with(&self, mode: Normalization) -> Result<Instance, ModelError> {
        Instance::build(self.densities.clone(), mode)
    }

    pub fn document(&self) -> FixtureDoc {
        FixtureDoc {
            id: self.id,
            instance: InstanceDoc::from_densities(&self.densities),
            allocation: self.allocation.as_ref().map(AllocationDoc::from_allocation),
            expected: self.expected.clone(),
            discrepancies: self.discrepancies.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureDoc {
    pub id: &'static str,
    pub instance: InstanceDoc,
    pub allocation: Option<AllocationDoc>,
    pub expected: ExpectedProperties,
    pub discrepancies: Vec<Discrepancy>,
}

pub fn reference_example(id: ExampleId) -> Fixture {
    match id {
        ExampleId::Ex1(n) => example1(n),
        ExampleId::Ex2 => example2(),
        ExampleId::Ex3 => example3(),
        ExampleId::Ex4 => example4(),
        ExampleId::Symmetric => symmetric(),
    }
}

fn step(breaks: &[Rational], values: &[Rational]) -> PiecewiseDensity {
    PiecewiseDensity::step(breaks, values).expect("fixture densities tile [0,1]")
}

fn thirds() -> Vec<Rational> {
    vec![int(0), ratio(1, 3), ratio(2, 3), int(1)]
}

fn halves() -> Vec<Rational> {
    vec![int(0), ratio(1, 2), int(1)]
}

fn c(value: Rational) -> PiecewiseDensity {
    PiecewiseDensity::constant(value)
}

pub fn example1(n: usize) -> Fixture {
    assert!(n >= 1, "example 1 needs at least one agent");
    let breaks: Vec<Rational> = (0..=n).map(|k| ratio(k as i64, n as i64)).collect();
    let block = |j: usize| {
        let values: Vec<Rational> = (0..n).map(|k| if k == j { int(1) } else { int(0) }).collect();
        step(&breaks, &values)
    };
    let densities = (0..n).map(|_| (0..n).map(block).collect()).collect();
    let many = n >= 2;
    Fixture {
        id: "ex1",
        densities,
        allocation: Some(Allocation::contiguous(n)),
        expected: ExpectedProperties {
            normalization_failure: None,
            agent_values: vec![int(1); n],
            proportional: Some(!many),
            swap_ef: Some(!many),
            swap_stable: Some(!many),
        },
        discrepancies: vec![],
    }
}

pub fn example2() -> Fixture {
    let h = halves();
    let densities = vec![
        vec![step(&h, &[ratio(3, 4), ratio(1, 4)]), c(ratio(1, 2))],
        vec![c(ratio(1, 2)), step(&h, &[ratio(1, 4), ratio(3, 4)])],
    ];
    Fixture {
        id: "ex2",
        densities,
        allocation: Some(Allocation::contiguous(2)),
        expected: ExpectedProperties {
            normalization_failure: None,
            agent_values: vec![ratio(5, 8), ratio(5, 8)],
            proportional: Some(false),
            swap_ef: Some(false),
            swap_stable: Some(false),
        },
        discrepancies: vec![Discrepancy {
            claimed: "allocation A1=[0,1/2], A2=[1/2,1] is proportional".into(),
            recomputed: "V_1(A) = 3/8 + 1/4 = 5/8 > 1/2 and V_2(A) = 5/8 > 1/2; not proportional (swap-EF fails as claimed: 5/8 > 3/8)".into(),
        }],
    }
}

pub fn example3() -> Fixture {
    let t = thirds();
    let densities = vec![
        vec![
            step(&t, &[int(1), int(0), int(0)]),
            step(&t, &[int(0), int(1), int(0)]),
            step(&t, &[int(0), int(0), int(1)]),
        ],
        vec![c(ratio(1, 2)), c(int(0)), c(ratio(1, 2))],
        vec![c(int(1)), c(int(1)), c(int(1))],
    ];
    Fixture {
        id: "ex3",
        densities,
        allocation: Some(Allocation::contiguous(3)),
        expected: ExpectedProperties {
            normalization_failure: Some(NormalizationFailure {
                agent: 2,
                sum: int(3),
            }),
            agent_values: vec![int(1), ratio(1, 3), int(1)],
            proportional: Some(false),
            swap_ef: Some(false),
            swap_stable: Some(false),
        },
        discrepancies: vec![
            Discrepancy {
                claimed: "instance satisfies per-agent normalization".into(),
                recomputed: "agent 3 totals V31+V32+V33 = 1+1+1 = 3".into(),
            },
            Discrepancy {
                claimed: "thirds allocation is swap envy-free".into(),
                recomputed: "agent 1 vs agent 2: V11(A1)+V12(A2) = 2/3 > V11(A2)+V12(A1) = 0".into(),
            },
        ],
    }
}

pub fn example4() -> Fixture {
    let t = thirds();
    let densities = vec![
        vec![
            c(ratio(1, 3)),
            step(&t, &[ratio(1, 3), ratio(2, 3), int(0)]),
            step(&t, &[ratio(1, 3), int(0), ratio(2, 3)]),
        ],
        vec![c(ratio(1, 3)), c(ratio(1, 3)), c(ratio(1, 3))],
        vec![c(ratio(1, 2)), c(ratio(1, 2)), c(int(0))],
    ];
    Fixture {
        id: "ex4",
        densities,
        allocation: Some(Allocation::contiguous(3)),
        expected: ExpectedProperties {
            normalization_failure: None,
            agent_values: vec![ratio(5, 9), ratio(1, 3), ratio(1, 3)],
            proportional: Some(false),
            swap_ef: Some(false),
            swap_stable: Some(false),
        },
        discrepancies: vec![
            Discrepancy {
                claimed: "each agent's value under the thirds allocation is 1/3".into(),
                recomputed: "V_1(A) = 1/9 + 2/9 + 2/9 = 5/9; agents 2 and 3 get 1/3".into(),
            },
            Discrepancy {
                claimed: "thirds allocation is proportional and swap envy-free".into(),
                recomputed: "V_1(A) = 5/9 > 1/3; agent 1 vs 2: 1/9+2/9 = 1/3 > 1/9+1/9 = 2/9".into(),
            },
            Discrepancy {
                claimed: "not swap stable: agent 1 gains by swapping A2 and A3".into(),
                recomputed: "confirmed: V12(A2)+V13(A3) = 4/9 > V12(A3)+V13(A2) = 0; agent 1's value drops to 1/9".into(),
            },
        ],
    }
}

pub fn symmetric() -> Fixture {
    let h = halves();
    let own = step(&h, &[int(1), ratio(1, 3)]);
    let other = c(ratio(1, 3));
    let densities = vec![vec![own.clone(), other.clone()], vec![other, own]];
    Fixture {
        id: "thm8",
        densities,
        allocation: None,
        expected: ExpectedProperties {
            normalization_failure: None,
            agent_values: vec![],
            proportional: None,
            swap_ef: None,
            swap_stable: None,
        },
        discrepancies: vec![],
    }
}

/// `V_{1,1}(A_1) − V_{1,2}(A_1)`; equals 1/6 for every complete proportional
/// allocation of the symmetric [`symmetric`] instance.
pub fn symmetric_gap(instance: &Instance, alloc: &Allocation) -> Rational {
    instance.value(0, 0, alloc.piece(0)) - instance.value(0, 1, alloc.piece(0))
}

/// Density `a + b·x` on the whole unit interval.
pub fn linear(a: Rational, b: Rational) -> PiecewiseDensity {
    PiecewiseDensity::new(vec![DensitySegment {
        interval: Interval::unit(),
        a,
        b,
    }])
    .expect("single segment tiles [0,1]")
}
