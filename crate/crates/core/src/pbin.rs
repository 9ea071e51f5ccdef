//! Poisson–binomial distributions.
//!
//! `X = Σ X_i` with independent `X_i ~ Ber(r_i)`. The pmf is computed by the
//! convolution recurrence, one coordinate at a time, which handles `r_i ∈ {0, 1}`
//! exactly. The odds factorization `P[X = m] = P[X = 0] · e_m(a)` with
//! `a_i = r_i / (1 - r_i)` is available as an independent cross-check when
//! every `r_i < 1`.

use crate::error::{Error, Result};
use crate::params::ParamVec;
use crate::sum::compensated_sum;

/// Slack on the `Σ a_i ≤ 1` hypothesis, absorbing roundoff in the odds.
const ODDS_SUM_SLACK: f64 = 1e-12;

/// Slack used when comparing consecutive pmf entries.
const MONOTONE_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBinomial {
    r: ParamVec,
}

impl PoissonBinomial {
    pub fn new(r: ParamVec) -> Self {
        Self { r }
    }

    pub fn from_slice(r: &[f64]) -> Result<Self> {
        Ok(Self::new(ParamVec::new(r.to_vec())?))
    }

    /// Number of summands `N`.
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        self.r.values()
    }

    pub fn pmf(&self) -> Vec<f64> {
        pmf_of(self.probs())
    }

    /// `f_0 · e_m(a)` for every `m`; fails when some `r_i = 1`.
    pub fn pmf_by_factorization(&self) -> Result<Vec<f64>> {
        let odds = OddsVec::from_probs(&self.r)?;
        let f0: f64 = self.probs().iter().map(|r| 1.0 - r).product();
        Ok(elementary_symmetric_all(odds.values())
            .into_iter()
            .map(|e| f0 * e)
            .collect())
    }
}

/// Convolution DP over an arbitrary slice of probabilities; the empty
/// slice gives the point mass at zero.
pub(crate) fn pmf_of(r: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(r.len() + 1);
    f.push(1.0);
    for &ri in r {
        f.push(0.0);
        for m in (1..f.len()).rev() {
            f[m] = f[m] * (1.0 - ri) + f[m - 1] * ri;
        }
        f[0] *= 1.0 - ri;
    }
    f
}

/// Odds `a_i = r_i / (1 - r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OddsVec(Vec<f64>);

impl OddsVec {
    pub fn from_probs(r: &ParamVec) -> Result<Self> {
        r.values()
            .iter()
            .enumerate()
            .map(|(index, &ri)| {
                if ri >= 1.0 {
                    Err(Error::OddsUndefined { index })
                } else {
                    Ok(ri / (1.0 - ri))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(OddsVec)
    }

    /// Wraps raw nonnegative odds.
    pub fn from_values(a: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("odds entry {index} is {value}")));
        }
        Ok(OddsVec(a))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.0.iter().copied())
    }
}

fn elementary_symmetric_all(a: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; a.len() + 1];
    e[0] = 1.0;
    for (i, &ai) in a.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += ai * e[j - 1];
        }
    }
    e
}

/// `e_m(a_1, …, a_N)` by the triangular recurrence; `e_0 = 1`.
pub fn elementary_symmetric(a: &OddsVec, m: usize) -> Result<f64> {
    let n = a.values().len();
    if m > n {
        return Err(Error::IndexOutOfRange { index: m, len: n + 1 });
    }
    Ok(elementary_symmetric_all(a.values())[m])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PmfMonotonicity {
    pub nonincreasing: bool,
    /// Smallest `m ≥ 1` with `pmf(m) > pmf(m-1)`.
    pub first_violation: Option<usize>,
}

/// Checks `pmf(m-1) ≥ pmf(m)` for all `m ≥ 1`. The sum of odds must be at
/// most one, otherwise the property is not guaranteed and the call fails.
pub fn pmf_is_nonincreasing(pb: &PoissonBinomial) -> Result<PmfMonotonicity> {
    let odds = OddsVec::from_probs(&pb.r)?;
    let sum = odds.sum();
    if sum > 1.0 + ODDS_SUM_SLACK {
        return Err(Error::OddsConstraintViolated { sum });
    }
    let f = pb.pmf();
    let first_violation = (1..f.len()).find(|&m| f[m - 1] < f[m] - MONOTONE_SLACK);
    Ok(PmfMonotonicity {
        nonincreasing: first_violation.is_none(),
        first_violation,
    })
}

/// `C(n, k)` in floating point by the multiplicative recurrence. Exact while
/// the intermediate values stay below `2^53`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// `C(N, m) λ^m (1-λ)^(N-m)`, the largest value of `P[X = m]` over
/// `r ∈ [0, λ]^N` when `λ ≤ 1/(N+1)`.
pub fn pmf_extremal_bound(n: usize, lambda: f64, m: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::IndexOutOfRange { index: m, len: n + 1 });
    }
    let max = 1.0 / (n as f64 + 1.0);
    if !(0.0..=max).contains(&lambda) {
        return Err(Error::LambdaTooLarge { lambda, max });
    }
    Ok(binomial(n, m) * lambda.powi(m as i32) * (1.0 - lambda).powi((n - m) as i32))
}

/// `∂ P[X = m] / ∂ r_j = P[X^(-j) = m-1] - P[X^(-j) = m]`, with `j`
/// zero-based and `X^(-j)` the sum without coordinate `j`.
pub fn pmf_coordinate_derivative(pb: &PoissonBinomial, j: usize, m: usize) -> Result<f64> {
    let n = pb.len();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    if m > n {
        return Err(Error::IndexOutOfRange { index: m, len: n + 1 });
    }
    let rest: Vec<f64> = pb
        .probs()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, &r)| r)
        .collect();
    let g = pmf_of(&rest);
    let at = |i: isize| -> f64 {
        if i < 0 {
            0.0
        } else {
            g.get(i as usize).copied().unwrap_or(0.0)
        }
    };
    Ok(at(m as isize - 1) - at(m as isize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pb(r: &[f64]) -> PoissonBinomial {
        PoissonBinomial::from_slice(r).unwrap()
    }

    /// Sum over all 2^N outcomes.
    fn pmf_brute(r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut f = vec![0.0; n + 1];
        for mask in 0u32..1 << n {
            let mass: f64 = (0..n)
                .map(|i| if mask >> i & 1 == 1 { r[i] } else { 1.0 - r[i] })
                .product();
            f[mask.count_ones() as usize] += mass;
        }
        f
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(pb(&[0.5, 0.5]).pmf(), vec![0.25, 0.5, 0.25]);
        let f = pb(&[0.1, 0.2]).pmf();
        for (a, b) in f.iter().zip([0.72, 0.26, 0.02]) {
            assert!((a - b).abs() < 1e-15);
        }
        let f = pb(&[0.25; 3]).pmf();
        assert!((f[1] - 3.0 * 0.25 * 0.75 * 0.75).abs() < 1e-16);
        assert!((f[1] - 0.421875).abs() < 1e-16);
    }

    #[test]
    fn pmf_handles_degenerate_entries() {
        assert_eq!(pb(&[1.0, 0.0, 1.0]).pmf(), vec![0.0, 0.0, 1.0, 0.0]);
        assert!(pb(&[1.0, 0.3]).pmf_by_factorization().is_err());
    }

    #[test]
    fn elementary_symmetric_examples() {
        let a = OddsVec::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(elementary_symmetric(&a, 2).unwrap(), 11.0);
        assert_eq!(elementary_symmetric(&a, 0).unwrap(), 1.0);
        assert_eq!(elementary_symmetric(&a, 3).unwrap(), 6.0);
        assert!(elementary_symmetric(&a, 4).is_err());
        let single = OddsVec::from_values(vec![0.37]).unwrap();
        assert_eq!(elementary_symmetric(&single, 1).unwrap(), 0.37);
    }

    #[test]
    fn odds_require_r_below_one() {
        let r = ParamVec::new(vec![0.2, 1.0]).unwrap();
        assert_eq!(OddsVec::from_probs(&r), Err(Error::OddsUndefined { index: 1 }));
    }

    #[test]
    fn monotonicity_examples() {
        let ok = pmf_is_nonincreasing(&pb(&[0.1, 0.1, 0.1])).unwrap();
        assert!(ok.nonincreasing);
        let f = pb(&[0.1, 0.1, 0.1]).pmf();
        for (a, b) in f.iter().zip([0.729, 0.243, 0.027, 0.001]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(
            pmf_is_nonincreasing(&pb(&[0.4, 0.4])),
            Err(Error::OddsConstraintViolated { .. })
        ));
        assert!(pmf_is_nonincreasing(&pb(&[0.0, 0.0, 0.0])).unwrap().nonincreasing);
    }

    #[test]
    fn extremal_bound_examples() {
        assert!((pmf_extremal_bound(3, 0.25, 1).unwrap() - 0.421875).abs() < 1e-16);
        assert!((pmf_extremal_bound(2, 1.0 / 3.0, 2).unwrap() - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(pmf_extremal_bound(7, 0.0, 3).unwrap(), 0.0);
        assert!(matches!(
            pmf_extremal_bound(3, 0.3, 1),
            Err(Error::LambdaTooLarge { .. })
        ));
        assert!(pmf_extremal_bound(3, 0.1, 0).is_err());
        assert!(pmf_extremal_bound(3, 0.1, 4).is_err());
    }

    #[test]
    fn derivative_examples() {
        let d = pmf_coordinate_derivative(&pb(&[0.1, 0.2]), 0, 1).unwrap();
        assert!((d - 0.6).abs() < 1e-15);
        let d = pmf_coordinate_derivative(&pb(&[0.1, 0.2]), 0, 0).unwrap();
        assert!((d + 0.8).abs() < 1e-15);
        assert_eq!(pmf_coordinate_derivative(&pb(&[0.42]), 0, 1).unwrap(), 1.0);
        assert!(pmf_coordinate_derivative(&pb(&[0.42]), 1, 0).is_err());
        assert!(pmf_coordinate_derivative(&pb(&[0.42]), 0, 2).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial(52, 26), 495918532948104.0);
        let c = binomial(62, 31);
        assert!((c - 465428353255261088.0).abs() <= 1e-15 * c);
    }

    fn probs(max_n: usize, hi: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=hi, 1..=max_n)
    }

    proptest! {
        #[test]
        fn pmf_matches_brute_force(r in probs(10, 1.0)) {
            let f = pb(&r).pmf();
            let g = pmf_brute(&r);
            for (a, b) in f.iter().zip(&g) {
                prop_assert!((a - b).abs() <= 1e-14);
            }
            prop_assert!((compensated_sum(f.iter().copied()) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn factorization_agrees(r in probs(12, 0.95)) {
            let b = pb(&r);
            let f = b.pmf();
            let g = b.pmf_by_factorization().unwrap();
            for (a, c) in f.iter().zip(&g) {
                prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn ratio_bound_under_small_odds(r in probs(12, 0.07)) {
            let b = pb(&r);
            let odds = OddsVec::from_probs(&ParamVec::new(r.clone()).unwrap()).unwrap();
            let s = odds.sum();
            prop_assume!(s <= 1.0);
            let f = b.pmf();
            for m in 1..f.len() {
                if f[m - 1] > 0.0 {
                    prop_assert!(f[m] / f[m - 1] <= s / m as f64 + 1e-12);
                }
            }
        }

        #[test]
        fn derivative_matches_central_difference(r in probs(8, 0.9), j_seed in 0usize..64, m_seed in 0usize..64) {
            let n = r.len();
            let j = j_seed % n;
            let m = m_seed % (n + 1);
            let h = 1e-6;
            let mut lo = r.clone();
            let mut hi = r.clone();
            lo[j] -= h;
            hi[j] += h;
            // pmf is multilinear, so the DP is valid slightly outside [0, 1]
            let fd = (pmf_of(&hi)[m] - pmf_of(&lo)[m]) / (2.0 * h);
            let d = pmf_coordinate_derivative(&pb(&r), j, m).unwrap();
            prop_assert!((fd - d).abs() <= 1e-8);
        }
    }
}
