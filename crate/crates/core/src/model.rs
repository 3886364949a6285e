//! Instances, pieces and allocations over the unit interval, with exact
//! integration of piecewise-linear densities.

use crate::error::ModelError;
use crate::rational::{int, serde_str, Rational};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Closed interval `[lo, hi]`. Endpoints are usually inside `[0, 1]`; callers
/// that accept foreign input check this through [`validate_allocation`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "serde_str")]
    pub lo: Rational,
    #[serde(with = "serde_str")]
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, ModelError> {
        if lo > hi {
            return Err(ModelError::ReversedInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self {
            lo: Rational::zero(),
            hi: Rational::one(),
        }
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn in_unit(&self) -> bool {
        !self.lo.is_negative() && self.hi <= Rational::one()
    }

    /// Intersection with positive length, if any.
    pub fn overlap(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo < hi).then_some(Interval { lo, hi })
    }
}

/// A finite union of intervals in canonical form: sorted, pairwise disjoint,
/// no degenerate members, touching neighbours merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl Piece {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(interval: Interval) -> Self {
        Self::from_intervals([interval])
    }

    pub fn span(lo: Rational, hi: Rational) -> Result<Self, ModelError> {
        Ok(Self::single(Interval::new(lo, hi)?))
    }

    /// Canonicalizes an arbitrary collection of intervals (their union).
    pub fn from_intervals(intervals: impl IntoIterator<Item = Interval>) -> Self {
        let mut items: Vec<Interval> = intervals
            .into_iter()
            .filter(|iv| !iv.is_degenerate())
            .collect();
        items.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(items.len());
        for iv in items {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> Rational {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn union(&self, other: &Piece) -> Piece {
        Piece::from_intervals(self.intervals.iter().chain(&other.intervals).cloned())
    }

    /// Positive-length intersection with another piece.
    pub fn intersection(&self, other: &Piece) -> Piece {
        let mut out = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                if let Some(iv) = a.overlap(b) {
                    out.push(iv);
                }
            }
        }
        Piece::from_intervals(out)
    }

    /// The part of this piece inside `window`.
    pub fn restrict(&self, window: &Interval) -> Piece {
        Piece::from_intervals(self.intervals.iter().filter_map(|iv| iv.overlap(window)))
    }
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<Interval>::deserialize(d)?;
        if let Some(bad) = raw.iter().find(|iv| iv.lo > iv.hi) {
            return Err(serde::de::Error::custom(format!(
                "interval [{}, {}] has lo > hi",
                bad.lo, bad.hi
            )));
        }
        Ok(Piece::from_intervals(raw))
    }
}

/// One piece per agent. Disjointness is checked by [`validate_allocation`],
/// not on construction, so invalid input can be reported precisely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub pieces: Vec<Piece>,
}

impl Allocation {
    pub fn new(pieces: Vec<Piece>) -> Self {
        Self { pieces }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            pieces: vec![Piece::empty(); n],
        }
    }

    /// `A_i = [i/n, (i+1)/n]`.
    pub fn contiguous(n: usize) -> Self {
        let n_r = int(n as i64);
        Self {
            pieces: (0..n)
                .map(|i| {
                    Piece::single(Interval {
                        lo: int(i as i64) / &n_r,
                        hi: int(i as i64 + 1) / &n_r,
                    })
                })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, agent: usize) -> &Piece {
        &self.pieces[agent]
    }
}

/// `v(x) = a + b·x` on `interval`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensitySegment {
    pub interval: Interval,
    pub a: Rational,
    pub b: Rational,
}

impl DensitySegment {
    pub fn constant(interval: Interval, a: Rational) -> Self {
        Self {
            interval,
            a,
            b: Rational::zero(),
        }
    }

    pub fn value_at(&self, x: &Rational) -> Rational {
        &self.a + &self.b * x
    }

    /// `∫_lo^hi (a + b x) dx` for `[lo, hi]` inside the segment.
    pub fn integral(&self, lo: &Rational, hi: &Rational) -> Rational {
        let width = hi - lo;
        let mut total = &self.a * &width;
        if !self.b.is_zero() {
            total += &self.b * (hi * hi - lo * lo) / int(2);
        }
        total
    }

    fn is_non_negative(&self) -> bool {
        !self.value_at(&self.interval.lo).is_negative()
            && !self.value_at(&self.interval.hi).is_negative()
    }
}

/// A non-negative piecewise-linear density whose segments tile `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseDensity {
    segments: Vec<DensitySegment>,
}

impl PiecewiseDensity {
    /// Sorts the segments and checks that they tile `[0, 1]` with
    /// non-degenerate intervals. Negativity is reported by [`Instance`]
    /// construction, which knows the agent indices.
    pub fn new(mut segments: Vec<DensitySegment>) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::Schema("density has no segments".into()));
        }
        segments.sort_by(|a, b| a.interval.lo.cmp(&b.interval.lo));
        let mut cursor = Rational::zero();
        for seg in &segments {
            if seg.interval.is_degenerate() {
                return Err(ModelError::Schema(format!(
                    "degenerate density segment at {}",
                    seg.interval.lo
                )));
            }
            match seg.interval.lo.cmp(&cursor) {
                Ordering::Less => {
                    return Err(ModelError::Schema(format!(
                        "density segments overlap at {}",
                        seg.interval.lo
                    )))
                }
                Ordering::Greater => {
                    return Err(ModelError::Schema(format!(
                        "density segments leave a gap [{}, {}]",
                        cursor, seg.interval.lo
                    )))
                }
                Ordering::Equal => cursor = seg.interval.hi.clone(),
            }
        }
        if cursor != Rational::one() {
            return Err(ModelError::Schema(format!(
                "density segments end at {cursor}, not 1"
            )));
        }
        Ok(Self { segments })
    }

    pub fn constant(value: Rational) -> Self {
        Self {
            segments: vec![DensitySegment::constant(Interval::unit(), value)],
        }
    }

    pub fn zero() -> Self {
        Self::constant(Rational::zero())
    }

    /// Piecewise-constant density with `values[k]` on `[breaks[k], breaks[k+1]]`.
    pub fn step(breaks: &[Rational], values: &[Rational]) -> Result<Self, ModelError> {
        if breaks.len() != values.len() + 1 {
            return Err(ModelError::Schema(
                "step density needs one more breakpoint than values".into(),
            ));
        }
        let segments = breaks
            .windows(2)
            .zip(values)
            .map(|(w, v)| {
                Ok(DensitySegment::constant(
                    Interval::new(w[0].clone(), w[1].clone())?,
                    v.clone(),
                ))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Self::new(segments)
    }

    pub fn segments(&self) -> &[DensitySegment] {
        &self.segments
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.segments.iter().all(|s| s.b.is_zero())
    }

    pub fn is_non_negative(&self) -> bool {
        self.segments.iter().all(DensitySegment::is_non_negative)
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| DensitySegment {
                    interval: s.interval.clone(),
                    a: &s.a * factor,
                    b: &s.b * factor,
                })
                .collect(),
        }
    }

    /// Density value; at a breakpoint the right-hand segment wins (the last
    /// segment at `x = 1`).
    pub fn value_at(&self, x: &Rational) -> Rational {
        let idx = self
            .segments
            .partition_point(|s| &s.interval.hi <= x)
            .min(self.segments.len() - 1);
        self.segments[idx].value_at(x)
    }

    /// Segment whose interval contains `window` (which must not straddle a
    /// breakpoint).
    pub fn segment_covering(&self, window: &Interval) -> &DensitySegment {
        let idx = self
            .segments
            .partition_point(|s| s.interval.hi <= window.lo)
            .min(self.segments.len() - 1);
        &self.segments[idx]
    }

    pub fn integrate_interval(&self, iv: &Interval) -> Rational {
        let mut total = Rational::zero();
        if iv.is_degenerate() {
            return total;
        }
        let start = self.segments.partition_point(|s| s.interval.hi <= iv.lo);
        for seg in &self.segments[start..] {
            if seg.interval.lo >= iv.hi {
                break;
            }
            if let Some(part) = seg.interval.overlap(iv) {
                total += seg.integral(&part.lo, &part.hi);
            }
        }
        total
    }

    pub fn total(&self) -> Rational {
        self.segments
            .iter()
            .map(|s| s.integral(&s.interval.lo, &s.interval.hi))
            .sum()
    }

    fn breakpoints(&self) -> impl Iterator<Item = &Rational> {
        self.segments
            .iter()
            .flat_map(|s| [&s.interval.lo, &s.interval.hi])
    }
}

/// Exact `∫_piece v(x) dx`.
pub fn eval_value(density: &PiecewiseDensity, piece: &Piece) -> Rational {
    piece
        .intervals()
        .iter()
        .map(|iv| density.integrate_interval(iv))
        .sum()
}

/// How [`Instance`] construction treats per-agent totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Reject agents whose totals differ from 1.
    Require,
    /// Rescale every agent's densities by `1 / total`.
    Rescale,
    /// Accept any totals (sub-normalized approximations).
    Skip,
}

/// `n` agents and their `n × n` density matrix; entry `(i, j)` is agent `i`'s
/// disutility density for parts held by agent `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    densities: Vec<Vec<PiecewiseDensity>>,
    breakpoints: Vec<Rational>,
    /// `interval_values[i][j][k] = V_{i,j}(I_k)`.
    interval_values: Vec<Vec<Vec<Rational>>>,
    scale_factors: Vec<Rational>,
    normalized: bool,
}

impl Instance {
    pub fn new(densities: Vec<Vec<PiecewiseDensity>>) -> Result<Self, ModelError> {
        Self::build(densities, Normalization::Require)
    }

    pub fn build(
        densities: Vec<Vec<PiecewiseDensity>>,
        mode: Normalization,
    ) -> Result<Self, ModelError> {
        let n = densities.len();
        if n == 0 {
            return Err(ModelError::Schema("instance needs at least one agent".into()));
        }
        for row in &densities {
            if row.len() != n {
                return Err(ModelError::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        for (i, row) in densities.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if let Some(seg) = d.segments().iter().find(|s| !s.is_non_negative()) {
                    return Err(ModelError::NegativeDensity {
                        agent: i,
                        holder: j,
                        lo: seg.interval.lo.clone(),
                        hi: seg.interval.hi.clone(),
                    });
                }
            }
        }

        let mut densities = densities;
        let mut scale_factors = vec![Rational::one(); n];
        for i in 0..n {
            let sum: Rational = densities[i].iter().map(PiecewiseDensity::total).sum();
            if sum.is_one() {
                continue;
            }
            match mode {
                Normalization::Require => {
                    return Err(ModelError::Normalization { agent: i, sum })
                }
                Normalization::Rescale => {
                    if sum.is_zero() {
                        return Err(ModelError::Normalization { agent: i, sum });
                    }
                    let factor = sum.recip();
                    densities[i] = densities[i].iter().map(|d| d.scaled(&factor)).collect();
                    scale_factors[i] = factor;
                }
                Normalization::Skip => {}
            }
        }
        let normalized = densities
            .iter()
            .all(|row| row.iter().map(PiecewiseDensity::total).sum::<Rational>().is_one());

        let mut breakpoints: Vec<Rational> = densities
            .iter()
            .flatten()
            .flat_map(|d| d.breakpoints().cloned())
            .collect();
        breakpoints.sort();
        breakpoints.dedup();

        let intervals: Vec<Interval> = breakpoints
            .windows(2)
            .map(|w| Interval {
                lo: w[0].clone(),
                hi: w[1].clone(),
            })
            .collect();
        let interval_values = densities
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| intervals.iter().map(|iv| d.integrate_interval(iv)).collect())
                    .collect()
            })
            .collect();

        Ok(Self {
            densities,
            breakpoints,
            interval_values,
            scale_factors,
            normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.densities.len()
    }

    /// Number of intervals in the common refinement.
    pub fn m(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn interval(&self, k: usize) -> Interval {
        Interval {
            lo: self.breakpoints[k].clone(),
            hi: self.breakpoints[k + 1].clone(),
        }
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..self.m()).map(|k| self.interval(k)).collect()
    }

    pub fn density(&self, i: usize, j: usize) -> &PiecewiseDensity {
        &self.densities[i][j]
    }

    pub fn densities(&self) -> &[Vec<PiecewiseDensity>] {
        &self.densities
    }

    /// `V_{i,j}(I_k)`.
    pub fn interval_value(&self, i: usize, j: usize, k: usize) -> &Rational {
        &self.interval_values[i][j][k]
    }

    /// Linear coefficients `(a, b)` of `v_{i,j}` on `I_k`.
    pub fn coefficients(&self, i: usize, j: usize, k: usize) -> (&Rational, &Rational) {
        let seg = self.densities[i][j].segment_covering(&self.interval(k));
        (&seg.a, &seg.b)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.densities
            .iter()
            .flatten()
            .all(PiecewiseDensity::is_piecewise_constant)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Factors applied by [`Normalization::Rescale`] (1 when untouched).
    pub fn scale_factors(&self) -> &[Rational] {
        &self.scale_factors
    }

    /// `V_{i,j}(piece)`.
    pub fn value(&self, i: usize, j: usize, piece: &Piece) -> Rational {
        eval_value(&self.densities[i][j], piece)
    }
}

fn check_dims(instance: &Instance, alloc: &Allocation) -> Result<(), ModelError> {
    if alloc.n() != instance.n() {
        return Err(ModelError::Dimension {
            expected: instance.n(),
            found: alloc.n(),
        });
    }
    Ok(())
}

/// `V_i(A) = Σ_j V_{i,j}(A_j)`.
pub fn agent_value(instance: &Instance, alloc: &Allocation, i: usize) -> Result<Rational, ModelError> {
    check_dims(instance, alloc)?;
    Ok((0..instance.n())
        .map(|j| instance.value(i, j, alloc.piece(j)))
        .sum())
}

/// Total disutility `e(A) = Σ_i V_i(A)`.
pub fn social_cost(instance: &Instance, alloc: &Allocation) -> Result<Rational, ModelError> {
    check_dims(instance, alloc)?;
    (0..instance.n())
        .map(|i| agent_value(instance, alloc, i))
        .sum()
}

/// Owner of each elementary region between consecutive endpoints of the
/// allocation, clipped to `[0, 1]`. `None` marks unallocated regions.
fn ownership_regions(alloc: &Allocation) -> Vec<(Interval, Option<usize>)> {
    let unit = Interval::unit();
    let mut points: Vec<Rational> = vec![Rational::zero(), Rational::one()];
    for piece in &alloc.pieces {
        for iv in piece.intervals() {
            if let Some(c) = iv.overlap(&unit) {
                points.push(c.lo);
                points.push(c.hi);
            }
        }
    }
    points.sort();
    points.dedup();
    points
        .windows(2)
        .map(|w| {
            let region = Interval {
                lo: w[0].clone(),
                hi: w[1].clone(),
            };
            let owner = alloc.pieces.iter().position(|p| {
                p.intervals()
                    .iter()
                    .any(|iv| iv.lo <= region.lo && region.hi <= iv.hi)
            });
            (region, owner)
        })
        .collect()
}

/// Interior points of `(0, 1)` separating maximal regions with different
/// owners (or owned versus unallocated).
pub fn count_cuts(alloc: &Allocation) -> usize {
    ownership_regions(alloc)
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Overlap {
    pub first: usize,
    pub second: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutOfRange {
    pub agent: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub complete: bool,
    pub expected_agents: usize,
    pub found_agents: usize,
    pub overlaps: Vec<Overlap>,
    pub out_of_range: Vec<OutOfRange>,
    pub gaps: Vec<Interval>,
}

pub fn validate_allocation(instance: &Instance, alloc: &Allocation) -> ValidityReport {
    let mut overlaps = Vec::new();
    for a in 0..alloc.n() {
        for b in a + 1..alloc.n() {
            for iv in alloc.piece(a).intersection(alloc.piece(b)).intervals() {
                overlaps.push(Overlap {
                    first: a,
                    second: b,
                    interval: iv.clone(),
                });
            }
        }
    }
    let out_of_range: Vec<OutOfRange> = alloc
        .pieces
        .iter()
        .enumerate()
        .flat_map(|(agent, p)| {
            p.intervals()
                .iter()
                .filter(|iv| !iv.in_unit())
                .map(move |iv| OutOfRange {
                    agent,
                    interval: iv.clone(),
                })
        })
        .collect();
    let gaps = Piece::from_intervals(
        ownership_regions(alloc)
            .into_iter()
            .filter(|(_, owner)| owner.is_none())
            .map(|(region, _)| region),
    )
    .intervals()
    .to_vec();
    let dims_ok = alloc.n() == instance.n();
    ValidityReport {
        valid: dims_ok && overlaps.is_empty() && out_of_range.is_empty(),
        complete: gaps.is_empty(),
        expected_agents: instance.n(),
        found_agents: alloc.n(),
        overlaps,
        out_of_range,
        gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn iv(lo: Rational, hi: Rational) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn piece(parts: &[(i64, i64, i64, i64)]) -> Piece {
        Piece::from_intervals(
            parts
                .iter()
                .map(|&(a, b, c, d)| iv(ratio(a, b), ratio(c, d))),
        )
    }

    fn example2() -> Instance {
        crate::fixtures::example2().instance().unwrap()
    }

    #[test]
    fn constant_segment_integral() {
        let d = PiecewiseDensity::step(
            &[int(0), ratio(1, 2), int(1)],
            &[ratio(3, 4), ratio(1, 4)],
        )
        .unwrap();
        assert_eq!(eval_value(&d, &piece(&[(0, 1, 1, 2)])), ratio(3, 8));
    }

    #[test]
    fn degenerate_piece_has_zero_value() {
        let d = PiecewiseDensity::constant(int(5));
        let p = Piece::from_intervals([iv(ratio(1, 3), ratio(1, 3))]);
        assert!(p.is_empty());
        assert_eq!(eval_value(&d, &p), int(0));
        assert_eq!(d.integrate_interval(&iv(ratio(1, 3), ratio(1, 3))), int(0));
    }

    #[test]
    fn linear_density_integral() {
        let d = PiecewiseDensity::new(vec![DensitySegment {
            interval: Interval::unit(),
            a: int(0),
            b: int(1),
        }])
        .unwrap();
        let p = piece(&[(0, 1, 1, 4), (3, 4, 1, 1)]);
        assert_eq!(eval_value(&d, &p), ratio(1, 4));
        assert_eq!(d.value_at(&ratio(1, 3)), ratio(1, 3));
    }

    #[test]
    fn canonical_form_merges_and_sorts() {
        let p = piece(&[(1, 2, 3, 4), (0, 1, 1, 4), (1, 4, 1, 2), (2, 3, 7, 8)]);
        assert_eq!(p.intervals(), &[iv(int(0), ratio(7, 8))]);
        let q = piece(&[(1, 2, 3, 4), (0, 1, 1, 4)]);
        assert_eq!(q.intervals().len(), 2);
        assert_eq!(Piece::from_intervals(q.intervals().to_vec()), q);
    }

    #[test]
    fn density_tiling_is_enforced() {
        let gap = PiecewiseDensity::step(&[int(0), ratio(1, 2), int(1)], &[int(1), int(1)]);
        assert!(gap.is_ok());
        let segs = vec![
            DensitySegment::constant(iv(int(0), ratio(1, 3)), int(1)),
            DensitySegment::constant(iv(ratio(1, 2), int(1)), int(1)),
        ];
        assert!(matches!(PiecewiseDensity::new(segs), Err(ModelError::Schema(_))));
        let short = vec![DensitySegment::constant(iv(int(0), ratio(1, 2)), int(1))];
        assert!(PiecewiseDensity::new(short).is_err());
        assert!(PiecewiseDensity::new(vec![]).is_err());
    }

    #[test]
    fn negative_density_rejected() {
        let d = PiecewiseDensity::new(vec![DensitySegment {
            interval: Interval::unit(),
            a: int(1),
            b: int(-2),
        }])
        .unwrap();
        let err = Instance::new(vec![vec![d]]).unwrap_err();
        assert!(matches!(err, ModelError::NegativeDensity { agent: 0, holder: 0, .. }));
    }

    #[test]
    fn single_agent_instance() {
        let inst = Instance::new(vec![vec![PiecewiseDensity::constant(int(1))]]).unwrap();
        assert_eq!(inst.m(), 1);
        assert_eq!(inst.n(), 1);
    }

    #[test]
    fn normalization_modes() {
        let dens = vec![vec![PiecewiseDensity::constant(int(3))]];
        assert_eq!(
            Instance::new(dens.clone()).unwrap_err(),
            ModelError::Normalization { agent: 0, sum: int(3) }
        );
        let inst = Instance::build(dens.clone(), Normalization::Rescale).unwrap();
        assert_eq!(inst.scale_factors(), &[ratio(1, 3)]);
        assert!(inst.is_normalized());
        let raw = Instance::build(dens, Normalization::Skip).unwrap();
        assert!(!raw.is_normalized());
    }

    #[test]
    fn agent_values_example2() {
        let inst = example2();
        let a = Allocation::new(vec![piece(&[(0, 1, 1, 2)]), piece(&[(1, 2, 1, 1)])]);
        assert_eq!(agent_value(&inst, &a, 0).unwrap(), ratio(5, 8));
        let swapped = Allocation::new(vec![piece(&[(1, 2, 1, 1)]), piece(&[(0, 1, 1, 2)])]);
        assert_eq!(social_cost(&inst, &swapped).unwrap(), ratio(3, 4));
        assert_eq!(social_cost(&inst, &Allocation::empty(2)).unwrap(), int(0));
        assert_eq!(agent_value(&inst, &Allocation::empty(2), 1).unwrap(), int(0));
        assert!(matches!(
            agent_value(&inst, &Allocation::empty(3), 0),
            Err(ModelError::Dimension { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn cut_counting() {
        let halves = Allocation::new(vec![piece(&[(0, 1, 1, 2)]), piece(&[(1, 2, 1, 1)])]);
        assert_eq!(count_cuts(&halves), 1);
        let whole = Allocation::new(vec![piece(&[(0, 1, 1, 1)]), Piece::empty()]);
        assert_eq!(count_cuts(&whole), 0);
        let uniform = Allocation::new(vec![
            piece(&[(0, 1, 1, 4), (1, 2, 3, 4)]),
            piece(&[(1, 4, 1, 2), (3, 4, 1, 1)]),
        ]);
        assert_eq!(count_cuts(&uniform), 3);
        // Owned-to-unallocated boundaries count too.
        let partial = Allocation::new(vec![piece(&[(1, 4, 1, 2)]), Piece::empty()]);
        assert_eq!(count_cuts(&partial), 2);
        for n in 1..7 {
            assert_eq!(count_cuts(&Allocation::contiguous(n)), n - 1);
        }
    }

    #[test]
    fn validation_reports() {
        let inst = example2();
        let overlap = Allocation::new(vec![piece(&[(0, 1, 3, 5)]), piece(&[(1, 2, 1, 1)])]);
        let r = validate_allocation(&inst, &overlap);
        assert!(!r.valid);
        assert_eq!(r.overlaps[0].interval, iv(ratio(1, 2), ratio(3, 5)));

        let ok = Allocation::new(vec![piece(&[(0, 1, 1, 2)]), piece(&[(1, 2, 1, 1)])]);
        let r = validate_allocation(&inst, &ok);
        assert!(r.valid && r.complete);

        let gappy = Allocation::new(vec![piece(&[(0, 1, 1, 4)]), piece(&[(1, 2, 1, 1)])]);
        let r = validate_allocation(&inst, &gappy);
        assert!(r.valid && !r.complete);
        assert_eq!(r.gaps, vec![iv(ratio(1, 4), ratio(1, 2))]);

        let outside = Allocation::new(vec![piece(&[(1, 2, 3, 2)]), Piece::empty()]);
        let r = validate_allocation(&inst, &outside);
        assert!(!r.valid);
        assert_eq!(r.out_of_range.len(), 1);

        let r = validate_allocation(&inst, &Allocation::empty(3));
        assert!(!r.valid);
    }
}
