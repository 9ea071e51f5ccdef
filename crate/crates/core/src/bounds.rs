//! Regime bounds on TV and on the slice discrepancies, and the `B_k(n)`
//! coefficient sequence.
//!
//! Each `check_*` function turns one inequality `lhs ≤ rhs` into a
//! [`BoundEntry`] carrying the margin `rhs - lhs`. Quantities such as TV or
//! `Δ_k` are passed in by the caller (normally from the enumeration oracle)
//! so that the bound and the quantity it bounds come from different code.

use serde::Serialize;

use crate::bhatta;
use crate::enumerate::SliceReport;
use crate::error::{Error, Result};
use crate::params::{beta_n, classify_regime, l1_distance, l2_distance, lambda_n, ParamPair, Regime, RegimeTag};
use crate::pbin::binomial;
use crate::sum::{compensated_sum, CompensatedSum};

/// Relative slack for bound satisfaction: an entry passes when
/// `margin ≥ -BOUND_TOLERANCE · max(1, |rhs|)`.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// What a check does with a pair outside its hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegimePolicy {
    /// Fail with `RegimeMismatch`.
    #[default]
    Enforce,
    /// Evaluate anyway and mark the entry out-of-regime.
    Force,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
    pub in_regime: bool,
}

impl BoundEntry {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, in_regime: bool) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            satisfied: margin >= -BOUND_TOLERANCE * rhs.abs().max(1.0),
            in_regime,
        }
    }

    /// Margin divided by `max(1, |rhs|)`, the quantity compared against the
    /// tolerance.
    pub fn scaled_margin(&self) -> f64 {
        self.margin / self.rhs.abs().max(1.0)
    }
}

fn require(pair: &ParamPair, required: RegimeTag, min_n: usize, policy: RegimePolicy) -> Result<bool> {
    let n = pair.n();
    if n < min_n {
        return Err(Error::NTooSmall { n, min: min_n });
    }
    let actual = classify_regime(pair).tag;
    let ok = actual.admits(required);
    match (ok, policy) {
        (true, _) => Ok(true),
        (false, RegimePolicy::Force) => Ok(false),
        (false, RegimePolicy::Enforce) => Err(Error::RegimeMismatch { required, actual }),
    }
}

/// `∏_{j≠i} (1 - y_j)` for every `i`, from prefix and suffix products.
fn leave_one_out_products(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * (1.0 - y[i]);
    }
    let mut prefix = 1.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(prefix * suffix[i + 1]);
        prefix *= 1.0 - y[i];
    }
    out
}

/// `Δ_1 = Σ_i |p_i ∏_{j≠i}(1-p_j) - q_i ∏_{j≠i}(1-q_j)|` in `O(n)`.
pub fn delta1_closed_form(pair: &ParamPair) -> f64 {
    let p = pair.p().values();
    let q = pair.q().values();
    let lp = leave_one_out_products(p);
    let lq = leave_one_out_products(q);
    compensated_sum((0..pair.n()).map(|i| (p[i] * lp[i] - q[i] * lq[i]).abs()))
}

/// `¼‖p-q‖₁ ≤ TV ≤ ‖p-q‖₁` for pairs in `[0, 1/n²]^n`.
pub fn check_tiny_sandwich(pair: &ParamPair, tv: f64, policy: RegimePolicy) -> Result<[BoundEntry; 2]> {
    let in_regime = require(pair, RegimeTag::Tiny, 1, policy)?;
    let l1 = l1_distance(pair);
    Ok([
        BoundEntry::new("tiny_lower", 0.25 * l1, tv, in_regime),
        BoundEntry::new("tiny_upper", tv, l1, in_regime),
    ])
}

/// `(2 - 1/n)`, the small-regime TV and `Δ_0` coefficient.
pub fn small_upper_coefficient(n: usize) -> f64 {
    (2 * n - 1) as f64 / n as f64
}

/// `½Δ_1 ≤ TV ≤ (2 - 1/n)Δ_1` for pairs in `[0, 1/(2n)]^n`, `n ≥ 2`.
pub fn check_small_sandwich(pair: &ParamPair, delta1: f64, tv: f64, policy: RegimePolicy) -> Result<[BoundEntry; 2]> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    let c = small_upper_coefficient(pair.n());
    Ok([
        BoundEntry::new("small_lower", 0.5 * delta1, tv, in_regime),
        BoundEntry::new("small_upper", tv, c * delta1, in_regime),
    ])
}

/// `Δ_0 ≤ ((2n-1)/n) Δ_1`.
pub fn check_delta0_bound(pair: &ParamPair, delta0: f64, delta1: f64, policy: RegimePolicy) -> Result<BoundEntry> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    Ok(BoundEntry::new(
        "delta0",
        delta0,
        small_upper_coefficient(pair.n()) * delta1,
        in_regime,
    ))
}

/// `3(n-1) / (2(2n-1))`.
pub fn delta2_coefficient(n: usize) -> f64 {
    (3 * (n - 1)) as f64 / (2 * (2 * n - 1)) as f64
}

/// `Δ_2 ≤ 3(n-1)/(2(2n-1)) Δ_1`.
pub fn check_delta2_bound(pair: &ParamPair, delta2: f64, delta1: f64, policy: RegimePolicy) -> Result<BoundEntry> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    Ok(BoundEntry::new(
        "delta2",
        delta2,
        delta2_coefficient(pair.n()) * delta1,
        in_regime,
    ))
}

/// `K(n) = (2n-1) / (n (1-λ_n)^(n-1))`.
pub fn k_of_n(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::NTooSmall { n, min: 2 });
    }
    let base = 1.0 - lambda_n(n);
    let mut pow = 1.0;
    for _ in 1..n {
        pow *= base;
    }
    Ok(small_upper_coefficient(n) / pow)
}

/// `‖p-q‖₁ ≤ K(n) Δ_1`.
pub fn check_l1_control(pair: &ParamPair, delta1: f64, policy: RegimePolicy) -> Result<BoundEntry> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    let k = k_of_n(pair.n())?;
    Ok(BoundEntry::new("l1_control", l1_distance(pair), k * delta1, in_regime))
}

/// `B_1(n), …, B_n(n)` by the defining recurrence and, for `k ≥ 2`, by the
/// closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BkSequence {
    pub n: usize,
    /// `by_recurrence[k - 1] = B_k(n)` for `k = 1..=n`.
    pub by_recurrence: Vec<f64>,
    /// `by_closed_form[k - 2] = B_k(n)` for `k = 2..=n`.
    pub by_closed_form: Vec<f64>,
    /// `Σ_{k≥2} B_k(n)` from the recurrence values.
    pub sum_tail: f64,
}

impl BkSequence {
    /// `B_k(n)` from the recurrence, `1 ≤ k ≤ n`.
    pub fn get(&self, k: usize) -> f64 {
        self.by_recurrence[k - 1]
    }

    pub fn closed_form(&self, k: usize) -> Option<f64> {
        k.checked_sub(2).and_then(|i| self.by_closed_form.get(i)).copied()
    }

    /// `(n-1)/n`.
    pub fn sum_target(&self) -> f64 {
        (self.n - 1) as f64 / self.n as f64
    }

    /// Largest relative disagreement between the two routes.
    pub fn max_relative_gap(&self) -> f64 {
        (2..=self.n)
            .map(|k| {
                let a = self.get(k);
                let b = self.closed_form(k).unwrap();
                (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Closed form `(2k-1)/(k(k-1)) · C(n-2, k-2) · (n-1) / (2n-1)^(k-1)`.
///
/// When numerator and denominator are exactly representable integers the
/// value is a single correctly rounded division. Otherwise the binomial and
/// power are interleaved factor by factor so neither overflows.
fn bk_closed_form(n: usize, k: usize) -> f64 {
    const EXACT: f64 = 9_007_199_254_740_992.0; // 2^53
    let m = (2 * n - 1) as f64;
    let c = binomial(n - 2, k - 2);
    let mut pow = 1.0;
    for _ in 1..k {
        pow *= m;
    }
    let num = (2 * k - 1) as f64 * c * (n - 1) as f64;
    let den = (k * (k - 1)) as f64 * pow;
    if num < EXACT && den < EXACT {
        return num / den;
    }
    // C(n-2, j) / m^j accumulated one factor at a time
    let j = k - 2;
    let mut ratio = 1.0;
    for i in 0..j {
        ratio *= (n - 2 - i) as f64 / ((i + 1) as f64 * m);
    }
    (2 * k - 1) as f64 / (k * (k - 1)) as f64 * ratio * (n - 1) as f64 / m
}

/// Builds the `B_k(n)` table. The recurrence is
/// `B_1 = 1`, `B_k = (n-k+1)/(k(2n-1)) B_{k-1} + C(n-1, k-1) (2n-1)^{-(k-1)} · 2/k`,
/// evaluated over the common denominator `k(2n-1)`.
pub fn bk_sequence(n: usize) -> Result<BkSequence> {
    if n < 2 {
        return Err(Error::NTooSmall { n, min: 2 });
    }
    let m = (2 * n - 1) as f64;
    let mut by_recurrence = Vec::with_capacity(n);
    by_recurrence.push(1.0);
    // C(n-1, k-1) / m^(k-2), updated multiplicatively
    let mut binom_term = (n - 1) as f64;
    for k in 2..=n {
        if k > 2 {
            binom_term *= (n - k + 1) as f64 / ((k - 1) as f64 * m);
        }
        let prev = by_recurrence[k - 2];
        let b = ((n - k + 1) as f64 * prev + 2.0 * binom_term) / (k as f64 * m);
        by_recurrence.push(b);
    }
    let by_closed_form = (2..=n).map(|k| bk_closed_form(n, k)).collect();
    let sum_tail = compensated_sum(by_recurrence[1..].iter().copied());
    Ok(BkSequence {
        n,
        by_recurrence,
        by_closed_form,
        sum_tail,
    })
}

/// `Δ_k ≤ B_k(n) Δ_1` for `k = 2..=n`, followed by the aggregate
/// `Σ_{k≥2} Δ_k ≤ ((n-1)/n) Δ_1`.
pub fn check_universal_slice_bounds(
    pair: &ParamPair,
    report: &SliceReport,
    policy: RegimePolicy,
) -> Result<Vec<BoundEntry>> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    let n = pair.n();
    if report.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: report.n,
        });
    }
    let bk = bk_sequence(n)?;
    let d1 = report.delta[1];
    let mut entries: Vec<BoundEntry> = (2..=n)
        .map(|k| BoundEntry::new(format!("slice_{k}"), report.delta[k], bk.get(k) * d1, in_regime))
        .collect();
    entries.push(BoundEntry::new(
        "slice_tail",
        report.tail_sum(),
        bk.sum_target() * d1,
        in_regime,
    ));
    Ok(entries)
}

/// `Σ_k Δ_k ≤ (4 - 2/n) Δ_1`, the combination of the `Δ_0` and tail bounds.
pub fn check_slice_total(pair: &ParamPair, report: &SliceReport, policy: RegimePolicy) -> Result<BoundEntry> {
    let in_regime = require(pair, RegimeTag::Small, 2, policy)?;
    let n = pair.n() as f64;
    Ok(BoundEntry::new(
        "slice_total",
        report.sum_delta(),
        (4.0 - 2.0 / n) * report.delta[1],
        in_regime,
    ))
}

/// Residuals of the doubleton identity used for the `Δ_2` bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxIdentityResidual {
    /// `|β/2 (δ_a + δ_b) - δ_ab - ½(S(p) - S(q))|`.
    pub basic: f64,
    /// Residual of the odds expansion of `S(p) - S(q)`; `None` when
    /// `p_a = 1` or `q_b = 1` leaves the odds undefined.
    pub expanded: Option<f64>,
}

impl AuxIdentityResidual {
    pub fn max(&self) -> f64 {
        self.basic.max(self.expanded.unwrap_or(0.0))
    }
}

fn atom(y: &[f64], ones: &[usize]) -> f64 {
    y.iter().enumerate().fold(
        1.0,
        |acc, (i, &v)| {
            if ones.contains(&i) {
                acc * v
            } else {
                acc * (1.0 - v)
            }
        },
    )
}

/// Evaluates the identity
/// `β_n/2 (δ_a + δ_b) - δ_ab = ½ (S(p; a, b) - S(q; a, b))`
/// with `S(y; a, b) = β_n (P_a(y) + P_b(y)) - 2 P_ab(y)`, and the expansion
/// `S(p) - S(q) = (β_n - 2o_b(q)) δ_a + (β_n - 2o_a(p)) δ_b + 2 o_a(p) o_b(q) ΔP_∅`.
/// Indices are zero-based with `a < b`. No regime is required.
pub fn delta2_auxiliary_identity(pair: &ParamPair, a: usize, b: usize) -> Result<AuxIdentityResidual> {
    let n = pair.n();
    if b >= n {
        return Err(Error::IndexOutOfRange { index: b, len: n });
    }
    if a >= b {
        return Err(Error::InvalidArgument(format!("need a < b, got a = {a}, b = {b}")));
    }
    let beta = beta_n(n);
    let p = pair.p().values();
    let q = pair.q().values();

    let s_of = |y: &[f64]| beta * (atom(y, &[a]) + atom(y, &[b])) - 2.0 * atom(y, &[a, b]);
    let delta_a = atom(p, &[a]) - atom(q, &[a]);
    let delta_b = atom(p, &[b]) - atom(q, &[b]);
    let delta_ab = atom(p, &[a, b]) - atom(q, &[a, b]);
    let delta_s = s_of(p) - s_of(q);

    let lhs = 0.5 * beta * (delta_a + delta_b) - delta_ab;
    let basic = (lhs - 0.5 * delta_s).abs();

    let expanded = if p[a] < 1.0 && q[b] < 1.0 {
        let oa_p = p[a] / (1.0 - p[a]);
        let ob_q = q[b] / (1.0 - q[b]);
        let delta_empty = atom(p, &[]) - atom(q, &[]);
        let mut rhs = CompensatedSum::new();
        rhs.add((beta - 2.0 * ob_q) * delta_a);
        rhs.add((beta - 2.0 * oa_p) * delta_b);
        rhs.add(2.0 * oa_p * ob_q * delta_empty);
        Some((delta_s - rhs.value()).abs())
    } else {
        None
    };
    Ok(AuxIdentityResidual { basic, expanded })
}

/// Every applicable bound evaluated on one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub quasi_symmetric: bool,
    pub tv: f64,
    pub l1: f64,
    pub l2: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied)
    }

    pub fn out_of_regime(&self) -> bool {
        self.entries.iter().any(|e| !e.in_regime)
    }
}

/// Evaluates the classic bound, the Bhattacharyya bound and every regime
/// bound whose hypotheses hold. With [`RegimePolicy::Force`] all regime
/// bounds are evaluated and flagged when out of regime.
pub fn evaluate_bounds(pair: &ParamPair, report: &SliceReport, policy: RegimePolicy) -> Result<BoundReport> {
    let n = pair.n();
    if report.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: report.n,
        });
    }
    let regime = classify_regime(pair);
    let tv = report.tv_exact;
    let l1 = l1_distance(pair);
    let l2 = l2_distance(pair);
    let delta1 = report.delta[1];
    let delta2 = report.delta.get(2).copied().unwrap_or(0.0);
    let cert = bhatta::quasi_symmetry(pair);

    let mut entries = vec![
        BoundEntry::new("classic_l1", tv, l1, true),
        BoundEntry::new("bhattacharyya", tv, bhatta::tv_bc_bound(pair), true),
    ];

    let forced = policy == RegimePolicy::Force;
    if forced || regime.tag.admits(RegimeTag::Tiny) {
        entries.extend(check_tiny_sandwich(pair, tv, RegimePolicy::Force)?);
    }
    if n >= 2 && (forced || regime.tag.admits(RegimeTag::Small)) {
        let f = RegimePolicy::Force;
        entries.extend(check_small_sandwich(pair, delta1, tv, f)?);
        entries.push(check_delta0_bound(pair, report.delta[0], delta1, f)?);
        entries.push(check_delta2_bound(pair, delta2, delta1, f)?);
        entries.push(check_l1_control(pair, delta1, f)?);
        entries.extend(check_universal_slice_bounds(pair, report, f)?);
        entries.push(check_slice_total(pair, report, f)?);
    }
    if forced || cert.is_quasi_symmetric {
        entries.push(bhatta::check_sqrt2_bound(pair, tv, RegimePolicy::Force)?);
    }

    Ok(BoundReport {
        regime,
        quasi_symmetric: cert.is_quasi_symmetric,
        tv,
        l1,
        l2,
        delta0: report.delta[0],
        delta1,
        delta2,
        entries,
    })
}

/// Interval known to contain TV, from closed-form quantities only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_source: &'static str,
    pub upper_source: &'static str,
}

/// Brackets TV without enumeration, using whichever bounds apply to the
/// pair's regime.
pub fn tv_bracket(pair: &ParamPair) -> TvBracket {
    let n = pair.n();
    let tag = classify_regime(pair).tag;
    let l1 = l1_distance(pair);
    // a single coordinate's marginal already separates the measures by |p_i - q_i|
    let marginal = pair.diff().iter().fold(0.0, |m: f64, d| m.max(d.abs()));
    let mut lower = (marginal, "marginal");
    let hellinger = 1.0 - bhatta::bhattacharyya_coefficient(pair);
    if hellinger > lower.0 {
        lower = (hellinger, "hellinger");
    }
    let mut upper = (l1.min(1.0), "classic_l1");
    let mut offer_upper = |v: f64, src: &'static str| {
        if v < upper.0 {
            upper = (v, src);
        }
    };
    offer_upper(bhatta::tv_bc_bound(pair), "bhattacharyya");
    if bhatta::quasi_symmetry(pair).is_quasi_symmetric {
        offer_upper(std::f64::consts::SQRT_2 * l2_distance(pair), "sqrt2_l2");
    }
    if n >= 2 && tag.admits(RegimeTag::Small) {
        let d1 = delta1_closed_form(pair);
        offer_upper(small_upper_coefficient(n) * d1, "small_upper");
        if 0.5 * d1 > lower.0 {
            lower = (0.5 * d1, "small_lower");
        }
    }
    if tag.admits(RegimeTag::Tiny) && 0.25 * l1 > lower.0 {
        lower = (0.25 * l1, "tiny_lower");
    }
    TvBracket {
        lower: lower.0,
        upper: upper.0,
        lower_source: lower.1,
        upper_source: upper.1,
    }
}
