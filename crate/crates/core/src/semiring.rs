//! The arithmetic, tropical and arctic semirings with exact arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemiringKind {
    Arithmetic,
    Tropical,
    Arctic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SemiringDescriptor {
    pub kind: SemiringKind,
    pub strictly_monotonic: bool,
}

impl From<SemiringKind> for SemiringDescriptor {
    fn from(kind: SemiringKind) -> Self {
        SemiringDescriptor { kind, strictly_monotonic: kind == SemiringKind::Arithmetic }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Weight {
    Fin(BigUint),
    PosInf,
    NegInf,
}

impl Weight {
    pub fn fin(n: u64) -> Weight {
        Weight::Fin(BigUint::from(n))
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Weight::Fin(n) => n.to_u64(),
            _ => None,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Fin(n) => write!(f, "{n}"),
            Weight::PosInf => write!(f, "inf"),
            Weight::NegInf => write!(f, "-inf"),
        }
    }
}

impl FromStr for Weight {
    type Err = String;
    fn from_str(s: &str) -> Result<Weight, String> {
        match s {
            "inf" => Ok(Weight::PosInf),
            "-inf" => Ok(Weight::NegInf),
            _ => s.parse::<BigUint>().map(Weight::Fin).map_err(|_| format!("bad weight literal `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemiringError {
    #[error("value {value} is not an element of the {kind} semiring")]
    KindMismatch { kind: SemiringKind, value: Weight },
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SemiringKind::Arithmetic => "arithmetic",
            SemiringKind::Tropical => "tropical",
            SemiringKind::Arctic => "arctic",
        })
    }
}

impl FromStr for SemiringKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arithmetic" => Ok(SemiringKind::Arithmetic),
            "tropical" => Ok(SemiringKind::Tropical),
            "arctic" => Ok(SemiringKind::Arctic),
            _ => Err(format!("unknown semiring `{s}`")),
        }
    }
}

impl SemiringKind {
    pub const ALL: [SemiringKind; 3] = [SemiringKind::Arithmetic, SemiringKind::Tropical, SemiringKind::Arctic];

    pub fn strictly_monotonic(self) -> bool {
        self == SemiringKind::Arithmetic
    }

    pub fn zero(self) -> Weight {
        match self {
            SemiringKind::Arithmetic => Weight::Fin(BigUint::zero()),
            SemiringKind::Tropical => Weight::PosInf,
            SemiringKind::Arctic => Weight::NegInf,
        }
    }

    pub fn one(self) -> Weight {
        match self {
            SemiringKind::Arithmetic => Weight::Fin(BigUint::one()),
            _ => Weight::Fin(BigUint::zero()),
        }
    }

    pub fn is_legal(self, w: &Weight) -> bool {
        matches!(
            (self, w),
            (_, Weight::Fin(_)) | (SemiringKind::Tropical, Weight::PosInf) | (SemiringKind::Arctic, Weight::NegInf)
        )
    }

    /// Admissible weight of a weighted element: `1 ≼ w ≠ 0`.
    pub fn is_element_weight(self, w: &Weight) -> bool {
        match w {
            Weight::Fin(n) => self != SemiringKind::Arithmetic || !n.is_zero(),
            _ => false,
        }
    }

    fn check(self, w: &Weight) -> Result<(), SemiringError> {
        if self.is_legal(w) {
            Ok(())
        } else {
            Err(SemiringError::KindMismatch { kind: self, value: w.clone() })
        }
    }

    pub fn add(self, a: &Weight, b: &Weight) -> Result<Weight, SemiringError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match self {
            SemiringKind::Arithmetic => match (a, b) {
                (Weight::Fin(x), Weight::Fin(y)) => Weight::Fin(x + y),
                _ => unreachable!(),
            },
            SemiringKind::Tropical => std::cmp::min_by(a, b, |x, y| self.order(x, y)).clone(),
            SemiringKind::Arctic => std::cmp::max_by(a, b, |x, y| self.order(x, y)).clone(),
        })
    }

    pub fn mul(self, a: &Weight, b: &Weight) -> Result<Weight, SemiringError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (a, b) {
            (Weight::Fin(x), Weight::Fin(y)) => match self {
                SemiringKind::Arithmetic => Weight::Fin(x * y),
                _ => Weight::Fin(x + y),
            },
            (Weight::Fin(_), z) | (z, _) => z.clone(),
        })
    }

    pub fn pow(self, a: &Weight, n: u64) -> Result<Weight, SemiringError> {
        self.check(a)?;
        if n == 0 {
            return Ok(self.one());
        }
        Ok(match a {
            Weight::Fin(x) => match self {
                SemiringKind::Arithmetic => Weight::Fin(x.pow(n as u32)),
                _ => Weight::Fin(x * BigUint::from(n)),
            },
            z => z.clone(),
        })
    }

    /// Total order of the semiring (`a ≼ b` iff not `Greater`).
    pub fn cmp(self, a: &Weight, b: &Weight) -> Result<Ordering, SemiringError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.order(a, b))
    }

    fn order(self, a: &Weight, b: &Weight) -> Ordering {
        match (a, b) {
            (Weight::Fin(x), Weight::Fin(y)) => x.cmp(y),
            (x, y) if x == y => Ordering::Equal,
            (Weight::PosInf, _) | (_, Weight::NegInf) => Ordering::Greater,
            _ => Ordering::Less,
        }
    }

    pub fn lt(self, a: &Weight, b: &Weight) -> bool {
        self.order(a, b) == Ordering::Less
    }

    pub fn le(self, a: &Weight, b: &Weight) -> bool {
        self.order(a, b) != Ordering::Greater
    }

    pub fn sum<'a>(self, xs: impl IntoIterator<Item = &'a Weight>) -> Result<Weight, SemiringError> {
        let mut acc = self.zero();
        for x in xs {
            acc = self.add(&acc, x)?;
        }
        Ok(acc)
    }

    pub fn product<'a>(self, xs: impl IntoIterator<Item = &'a Weight>) -> Result<Weight, SemiringError> {
        let mut acc = self.one();
        for x in xs {
            acc = self.mul(&acc, x)?;
        }
        Ok(acc)
    }

    /// Legal element-weight range for a bit budget, low to high.
    pub fn weight_range(self, bits: u32) -> (u64, u64) {
        match self {
            SemiringKind::Arithmetic => (1, 1u64 << bits),
            _ => (0, (1u64 << bits) - 1),
        }
    }
}

pub fn s_add(k: SemiringKind, a: &Weight, b: &Weight) -> Result<Weight, SemiringError> {
    k.add(a, b)
}

pub fn s_mul(k: SemiringKind, a: &Weight, b: &Weight) -> Result<Weight, SemiringError> {
    k.mul(a, b)
}

pub fn s_pow(k: SemiringKind, a: &Weight, n: u64) -> Result<Weight, SemiringError> {
    k.pow(a, n)
}

pub fn s_cmp(k: SemiringKind, a: &Weight, b: &Weight) -> Result<Ordering, SemiringError> {
    k.cmp(a, b)
}
