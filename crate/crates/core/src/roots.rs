//! Smallest root of a quadratic on a closed interval, exact whenever the root
//! is rational.

use crate::rational::{exact_sqrt, int, pow2, Rational};
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

/// Width below which irrational roots are reported as a bracket.
pub const BRACKET_BITS: i64 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Root {
    Exact(Rational),
    /// The root is irrational and lies strictly inside `(lo, hi)`.
    Irrational { lo: Rational, hi: Rational },
}

impl Root {
    /// The exact root, or the bracket's upper end.
    pub fn point(&self) -> &Rational {
        match self {
            Root::Exact(r) => r,
            Root::Irrational { hi, .. } => hi,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Root::Exact(_))
    }
}

/// `c0 + c1·x + c2·x²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadratic {
    pub c0: Rational,
    pub c1: Rational,
    pub c2: Rational,
}

impl Quadratic {
    pub fn eval(&self, x: &Rational) -> Rational {
        &self.c0 + x * (&self.c1 + x * &self.c2)
    }

    /// Smallest `x ∈ [lo, hi]` with `f(x) = 0`.
    pub fn smallest_root_in(&self, lo: &Rational, hi: &Rational) -> Option<Root> {
        if lo > hi {
            return None;
        }
        if self.eval(lo).is_zero() {
            return Some(Root::Exact(lo.clone()));
        }
        if self.c2.is_zero() {
            if self.c1.is_zero() {
                return None;
            }
            let r = -&self.c0 / &self.c1;
            return (lo <= &r && &r <= hi).then_some(Root::Exact(r));
        }
        let vertex = -&self.c1 / (int(2) * &self.c2);
        let mut pieces = Vec::with_capacity(2);
        if lo < &vertex && &vertex < hi {
            pieces.push((lo.clone(), vertex.clone()));
            pieces.push((vertex, hi.clone()));
        } else {
            pieces.push((lo.clone(), hi.clone()));
        }
        pieces
            .into_iter()
            .find_map(|(l, r)| self.monotone_root(&l, &r))
    }

    /// Root on a stretch where `f` is monotone and `f(l) ≠ 0` unless `l` is
    /// the vertex.
    fn monotone_root(&self, l: &Rational, r: &Rational) -> Option<Root> {
        let fl = self.eval(l);
        if fl.is_zero() {
            return Some(Root::Exact(l.clone()));
        }
        let fr = self.eval(r);
        if fr.is_zero() {
            return Some(Root::Exact(r.clone()));
        }
        if fl.signum() == fr.signum() {
            return None;
        }
        let disc = &self.c1 * &self.c1 - int(4) * &self.c2 * &self.c0;
        if let Some(s) = exact_sqrt(&disc) {
            let two_a = int(2) * &self.c2;
            let candidates = [(-&self.c1 - &s) / &two_a, (-&self.c1 + &s) / &two_a];
            if let Some(x) = candidates.into_iter().find(|x| l < x && x < r) {
                return Some(Root::Exact(x));
            }
        }
        let rising = fl.is_negative();
        let (mut a, mut b) = (l.clone(), r.clone());
        let width = pow2(-BRACKET_BITS);
        while &b - &a > width {
            let mid = (&a + &b) / int(2);
            let fm = self.eval(&mid);
            match (fm.cmp(&Rational::zero()), rising) {
                (Ordering::Equal, _) => return Some(Root::Exact(mid)),
                (Ordering::Less, true) | (Ordering::Greater, false) => a = mid,
                _ => b = mid,
            }
        }
        Some(Root::Irrational { lo: a, hi: b })
    }
}
