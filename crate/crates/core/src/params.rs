//! Parameter vectors, pairs, regimes and atom masses.
//!
//! A [`ParamVec`] `y ∈ [0,1]^n` parameterizes the product measure
//! `Ber(y_1) ⊗ … ⊗ Ber(y_n)` on the Hamming cube. Atoms of the cube are
//! identified with subsets `S ⊆ {0, …, n-1}` (the coordinates equal to one),
//! represented by [`SubsetIndex`].

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::compensated_sum;

/// A vector of Bernoulli parameters, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        // NaN fails the range test as well.
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::EntryOutOfRange { index, value });
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Coordinatewise `y ↦ 1 - y`.
    pub fn complement(&self) -> ParamVec {
        ParamVec(self.0.iter().map(|y| 1.0 - y).collect())
    }
}

impl TryFrom<Vec<f64>> for ParamVec {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVec::new(values)
    }
}

impl AsRef<[f64]> for ParamVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Two parameter vectors of equal length together with `x = p - q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamPair {
    p: ParamVec,
    q: ParamVec,
    #[serde(skip)]
    x: Vec<f64>,
}

impl ParamPair {
    pub fn new(p: ParamVec, q: ParamVec) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: q.len(),
            });
        }
        let x = p.values().iter().zip(q.values()).map(|(a, b)| a - b).collect();
        Ok(Self { p, q, x })
    }

    pub fn from_slices(p: &[f64], q: &[f64]) -> Result<Self> {
        Self::new(ParamVec::new(p.to_vec())?, ParamVec::new(q.to_vec())?)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &ParamVec {
        &self.p
    }

    pub fn q(&self) -> &ParamVec {
        &self.q
    }

    /// `x_i = p_i - q_i`.
    pub fn diff(&self) -> &[f64] {
        &self.x
    }

    pub fn swapped(&self) -> ParamPair {
        ParamPair::new(self.q.clone(), self.p.clone()).expect("lengths already agree")
    }

    /// Both vectors complemented, `(1 - p, 1 - q)`.
    pub fn complemented(&self) -> ParamPair {
        ParamPair::new(self.p.complement(), self.q.complement()).expect("lengths already agree")
    }

    /// Largest entry over both vectors.
    pub fn max_entry(&self) -> f64 {
        self.p.max().max(self.q.max())
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RegimeTag {
    /// All entries in `[0, 1/n²]`.
    Tiny,
    /// All entries in `[0, 1/(2n)]`, `n ≥ 2`.
    Small,
    General,
}

impl RegimeTag {
    /// Whether a pair tagged `self` satisfies the hypotheses of a check
    /// requiring `required`. Tiny pairs are Small pairs once `n ≥ 2`.
    pub fn admits(self, required: RegimeTag) -> bool {
        self <= required
    }
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeTag::Tiny => "tiny",
            RegimeTag::Small => "small",
            RegimeTag::General => "general",
        };
        f.write_str(s)
    }
}

/// Regime classification of a pair, with the small-regime constants
/// `λ_n = 1/(2n)` and `β_n = λ_n / (1 - λ_n) = 1/(2n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub n: usize,
    pub lambda_n: f64,
    pub beta_n: f64,
}

impl Regime {
    pub fn new(tag: RegimeTag, n: usize) -> Self {
        Self {
            tag,
            n,
            lambda_n: lambda_n(n),
            beta_n: beta_n(n),
        }
    }
}

/// `1/(2n)`.
pub fn lambda_n(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// `1/(2n - 1)`.
pub fn beta_n(n: usize) -> f64 {
    1.0 / (2.0 * n as f64 - 1.0)
}

/// Upper edge of the tiny box, `1/n²`.
pub fn tiny_bound(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (n * n)
}

/// A subset of `{0, …, n-1}` stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetIndex {
    mask: u64,
    n: usize,
}

impl SubsetIndex {
    pub const MAX_UNIVERSE: usize = 64;

    pub fn new(mask: u64, n: usize) -> Result<Self> {
        if n > Self::MAX_UNIVERSE {
            return Err(Error::UniverseTooLarge { n });
        }
        if n < 64 && mask >> n != 0 {
            let index = 63 - mask.leading_zeros() as usize;
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        Ok(Self { mask, n })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut mask = 0u64;
        for &i in indices {
            if i >= n || i >= Self::MAX_UNIVERSE {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            mask |= 1 << i;
        }
        Self::new(mask, n)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn cardinality(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && (self.mask >> i) & 1 == 1
    }
}

/// Mass of the atom with ones exactly on `s`:
/// `∏_{i∈S} y_i · ∏_{i∉S} (1 - y_i)`.
///
/// Factors are multiplied in coordinate order, which is the same order the
/// exhaustive traversal in [`crate::enumerate`] uses, so both agree bit for bit.
pub fn atom_mass(y: &ParamVec, s: SubsetIndex) -> Result<f64> {
    if s.universe() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: s.universe(),
        });
    }
    Ok(atom_mass_unchecked(y.values(), s.mask()))
}

#[inline]
pub(crate) fn atom_mass_unchecked(y: &[f64], mask: u64) -> f64 {
    y.iter().enumerate().fold(1.0, |acc, (i, &yi)| {
        if (mask >> i) & 1 == 1 {
            acc * yi
        } else {
            acc * (1.0 - yi)
        }
    })
}

/// Tightest regime containing the pair. Intervals are closed; `n = 1` is
/// always Tiny because `[0, 1/1²] = [0, 1]`.
pub fn classify_regime(pair: &ParamPair) -> Regime {
    let n = pair.n();
    let m = pair.max_entry();
    let tag = if m <= tiny_bound(n) {
        RegimeTag::Tiny
    } else if n >= 2 && m <= lambda_n(n) {
        RegimeTag::Small
    } else {
        RegimeTag::General
    };
    Regime::new(tag, n)
}

/// `‖p - q‖₁`, compensated.
pub fn l1_distance(pair: &ParamPair) -> f64 {
    compensated_sum(pair.diff().iter().map(|x| x.abs()))
}

/// `‖p - q‖₂`, compensated.
pub fn l2_distance(pair: &ParamPair) -> f64 {
    compensated_sum(pair.diff().iter().map(|x| x * x)).sqrt()
}
