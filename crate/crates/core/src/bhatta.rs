//! Bhattacharyya coefficient of Bernoulli product measures and the
//! `√2·‖p - q‖₂` bound for quasi-symmetric pairs.
//!
//! For product measures the Bhattacharyya coefficient factorizes,
//! `BC = ∏_i b(p_i, q_i)` with `b(p, q) = √(pq) + √((1-p)(1-q))`, and
//! `TV ≤ √(1 - BC²)` holds for any pair of measures.

use serde::Serialize;

use crate::bounds::{BoundEntry, RegimePolicy};
use crate::error::{Error, Result};
use crate::params::{l2_distance, ParamPair, ParamVec};

/// One-dimensional coefficient `b(p, q)`.
pub fn bc_factor(p: f64, q: f64) -> f64 {
    (p * q).sqrt() + ((1.0 - p) * (1.0 - q)).sqrt()
}

pub fn bhattacharyya_coefficient(pair: &ParamPair) -> f64 {
    pair.p()
        .values()
        .iter()
        .zip(pair.q().values())
        .map(|(&p, &q)| bc_factor(p, q))
        .product()
}

/// `√(1 - BC²)`, with `1 - BC²` clamped to `[0, 1]`.
pub fn tv_bc_bound(pair: &ParamPair) -> f64 {
    let bc = bhattacharyya_coefficient(pair);
    (1.0 - bc * bc).clamp(0.0, 1.0).sqrt()
}

/// Both sides of `1 - b(p,q)² = (√(p(1-q)) - √(q(1-p)))²` and of the
/// fraction form `(p-q)² / (√(p(1-q)) + √(q(1-p)))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneDIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `None` when the fraction's denominator vanishes (`p = q ∈ {0, 1}`).
    pub frac_residual: Option<f64>,
}

/// Evaluates the one-dimensional identity at `p, q ∈ [0, 1]`.
pub fn one_d_identity_residual(p: f64, q: f64) -> OneDIdentity {
    let b = bc_factor(p, q);
    let lhs = 1.0 - b * b;
    let sa = (p * (1.0 - q)).sqrt();
    let sb = (q * (1.0 - p)).sqrt();
    let rhs = (sa - sb) * (sa - sb);
    let den = (sa + sb) * (sa + sb);
    let frac_residual = (den > 0.0).then(|| (lhs - (p - q) * (p - q) / den).abs());
    OneDIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        frac_residual,
    }
}

/// `√(p(1-q)) + √(q(1-p))`, the inner product of the unit vectors
/// `(√p, √(1-p))` and `(√(1-q), √q)`. At least `1/√2` when `p ≥ ½ ≥ q`.
pub fn straddle_inner_product(p: f64, q: f64) -> f64 {
    (p * (1.0 - q)).sqrt() + (q * (1.0 - p)).sqrt()
}

/// `(u, v)` straddles ½, inclusive on both sides.
pub fn straddles_half(u: f64, v: f64) -> bool {
    (u <= 0.5 && 0.5 <= v) || (v <= 0.5 && 0.5 <= u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSymmetryCertificate {
    pub is_quasi_symmetric: bool,
    /// Pair with coordinates reflected about ½ so that `p_i ≥ ½ ≥ q_i`;
    /// present only when the pair is quasi-symmetric.
    pub reflected_pair: Option<ParamPair>,
    /// Zero-based coordinates that fail to straddle ½.
    pub offending_indices: Vec<usize>,
}

pub fn quasi_symmetry(pair: &ParamPair) -> QuasiSymmetryCertificate {
    let p = pair.p().values();
    let q = pair.q().values();
    let offending_indices: Vec<usize> = (0..pair.n()).filter(|&i| !straddles_half(p[i], q[i])).collect();
    if !offending_indices.is_empty() {
        return QuasiSymmetryCertificate {
            is_quasi_symmetric: false,
            reflected_pair: None,
            offending_indices,
        };
    }
    let (rp, rq): (Vec<f64>, Vec<f64>) = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi < 0.5 || qi > 0.5 {
                (1.0 - pi, 1.0 - qi)
            } else {
                (pi, qi)
            }
        })
        .unzip();
    let reflected = ParamPair::new(
        ParamVec::new(rp).expect("reflection stays in [0,1]"),
        ParamVec::new(rq).expect("reflection stays in [0,1]"),
    )
    .expect("lengths agree");
    QuasiSymmetryCertificate {
        is_quasi_symmetric: true,
        reflected_pair: Some(reflected),
        offending_indices,
    }
}

/// `TV ≤ √2 ‖p - q‖₂` for quasi-symmetric pairs.
pub fn check_sqrt2_bound(pair: &ParamPair, tv: f64, policy: RegimePolicy) -> Result<BoundEntry> {
    let cert = quasi_symmetry(pair);
    if !cert.is_quasi_symmetric && policy == RegimePolicy::Enforce {
        return Err(Error::NotQuasiSymmetric {
            indices: cert.offending_indices,
        });
    }
    Ok(BoundEntry::new(
        "sqrt2_l2",
        tv,
        std::f64::consts::SQRT_2 * l2_distance(pair),
        cert.is_quasi_symmetric,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{bhattacharyya_by_enumeration, tv_exact, EnumConfig};
    use proptest::prelude::*;

    fn pair(p: &[f64], q: &[f64]) -> ParamPair {
        ParamPair::from_slices(p, q).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        assert!((bhattacharyya_coefficient(&pair(&[0.3, 0.7], &[0.3, 0.7])) - 1.0).abs() < 1e-15);
        assert_eq!(bhattacharyya_coefficient(&pair(&[0.0], &[1.0])), 0.0);
        let f = 0.27f64.sqrt() + 0.07f64.sqrt();
        // reference values from 30-digit arithmetic
        assert!((f - 0.784_190_373_377_122_2).abs() < 1e-15);
        let bc = bhattacharyya_coefficient(&pair(&[0.9, 0.9], &[0.3, 0.3]));
        assert!((bc - f * f).abs() < 1e-15);
        assert!((bc - 0.614_954_541_697_350_4).abs() < 1e-15);
    }

    #[test]
    fn bc_bound_examples() {
        assert_eq!(tv_bc_bound(&pair(&[0.4, 0.1], &[0.4, 0.1])), 0.0);
        assert_eq!(tv_bc_bound(&pair(&[0.0], &[1.0])), 1.0);
        let pq = pair(&[0.9, 0.9], &[0.3, 0.3]);
        let b = tv_bc_bound(&pq);
        assert!((b - 0.788_562_560_388_078_4).abs() < 1e-14);
        // atoms: 00: .01 vs .49, 01/10: .09 vs .21, 11: .81 vs .09
        let tv = tv_exact(&pq, &EnumConfig::sequential()).unwrap();
        assert!((tv - 0.72).abs() < 1e-15);
        assert!(tv <= b);
    }

    #[test]
    fn one_d_examples() {
        let r = one_d_identity_residual(0.9, 0.3);
        assert!(r.residual <= 1e-15);
        let hand = (0.63f64.sqrt() - 0.03f64.sqrt()).powi(2);
        assert!((r.rhs - hand).abs() < 1e-15);
        assert!((r.lhs - 0.385_045_458_302_649_6).abs() < 1e-15);
        assert!(r.frac_residual.unwrap() <= 1e-15);

        let r = one_d_identity_residual(0.4, 0.4);
        assert_eq!(r.rhs, 0.0);
        assert!(r.lhs.abs() <= 1e-15 && r.residual <= 1e-15);

        let r = one_d_identity_residual(1.0, 0.0);
        assert_eq!((r.lhs, r.rhs, r.residual), (1.0, 1.0, 0.0));
        assert_eq!(r.frac_residual, Some(0.0));

        assert_eq!(one_d_identity_residual(1.0, 1.0).frac_residual, None);
    }

    #[test]
    fn quasi_symmetry_examples() {
        let c = quasi_symmetry(&pair(&[0.7, 0.2], &[0.4, 0.6]));
        assert!(c.is_quasi_symmetric);
        let r = c.reflected_pair.unwrap();
        assert_eq!(r.p().values(), &[0.7, 0.8]);
        assert_eq!(r.q().values(), &[0.4, 0.4]);

        let c = quasi_symmetry(&pair(&[0.3, 0.3], &[0.4, 0.4]));
        assert!(!c.is_quasi_symmetric);
        assert_eq!(c.offending_indices, vec![0, 1]);
        assert!(c.reflected_pair.is_none());

        let c = quasi_symmetry(&pair(&[0.5, 0.5], &[0.5, 0.5]));
        assert!(c.is_quasi_symmetric);

        // q on the boundary still gets oriented
        let c = quasi_symmetry(&pair(&[0.2, 0.5], &[0.5, 0.9]));
        let r = c.reflected_pair.unwrap();
        assert_eq!(r.p().values(), &[0.8, 0.5]);
        assert!(r.q().values().iter().all(|&v| v <= 0.5));
    }

    #[test]
    fn sqrt2_witness() {
        let pq = pair(&[1.0, 1.0], &[0.5, 0.5]);
        let tv = tv_exact(&pq, &EnumConfig::sequential()).unwrap();
        assert_eq!(tv, 0.75);
        let e = check_sqrt2_bound(&pq, tv, RegimePolicy::Enforce).unwrap();
        assert!((e.rhs - 1.0).abs() < 1e-15);
        assert!(e.satisfied);
        let ratio = tv / l2_distance(&pq);
        assert!((ratio - 3.0 / 8.0f64.sqrt()).abs() < 1e-12);

        let not = pair(&[0.3], &[0.4]);
        assert_eq!(
            check_sqrt2_bound(&not, 0.1, RegimePolicy::Enforce),
            Err(Error::NotQuasiSymmetric { indices: vec![0] })
        );
        assert!(!check_sqrt2_bound(&not, 0.1, RegimePolicy::Force).unwrap().in_regime);
    }

    #[test]
    fn identity_on_grid() {
        for i in 0..=100 {
            for j in 0..=100 {
                let (p, q) = (i as f64 / 100.0, j as f64 / 100.0);
                let r = one_d_identity_residual(p, q);
                assert!(r.residual <= 1e-14, "p={p} q={q}: {}", r.residual);
                if let Some(f) = r.frac_residual {
                    assert!(f <= 1e-14, "frac p={p} q={q}: {f}");
                }
                if p >= 0.5 && q <= 0.5 {
                    assert!(straddle_inner_product(p, q) >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
                    assert!(r.lhs <= 2.0 * (p - q) * (p - q) + 1e-14);
                }
            }
        }
    }

    fn any_pair(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn tensorization_matches_atom_sum((p, q) in any_pair(12)) {
            let pq = pair(&p, &q);
            let prod = bhattacharyya_coefficient(&pq);
            let sum = bhattacharyya_by_enumeration(&pq, &EnumConfig::sequential()).unwrap();
            prop_assert!((prod - sum).abs() <= 1e-12 * prod.max(1e-300) + 1e-300);
        }

        #[test]
        fn tv_below_bc_bound((p, q) in any_pair(10)) {
            let pq = pair(&p, &q);
            let tv = tv_exact(&pq, &EnumConfig::sequential()).unwrap();
            prop_assert!(tv <= tv_bc_bound(&pq) + 1e-12);
        }

        #[test]
        fn reflection_preserves_tv_and_l2(
            (p, q) in (1usize..=10).prop_flat_map(|n| (
                prop::collection::vec(0.5f64..=1.0, n),
                prop::collection::vec(0.0f64..=0.5, n),
                prop::collection::vec(any::<bool>(), n),
            )).prop_map(|(hi, lo, flip)| {
                let mut p = Vec::new();
                let mut q = Vec::new();
                for i in 0..hi.len() {
                    let (a, b) = if flip[i] { (1.0 - hi[i], 1.0 - lo[i]) } else { (hi[i], lo[i]) };
                    p.push(a);
                    q.push(b);
                }
                (p, q)
            })
        ) {
            let pq = pair(&p, &q);
            let cert = quasi_symmetry(&pq);
            prop_assert!(cert.is_quasi_symmetric);
            let r = cert.reflected_pair.unwrap();
            prop_assert!(r.p().values().iter().all(|&v| v >= 0.5));
            prop_assert!(r.q().values().iter().all(|&v| v <= 0.5));
            let cfg = EnumConfig::sequential();
            let a = tv_exact(&pq, &cfg).unwrap();
            let b = tv_exact(&r, &cfg).unwrap();
            prop_assert!((a - b).abs() <= 1e-14);
            for (x, y) in pq.diff().iter().zip(r.diff()) {
                prop_assert!((x.abs() - y.abs()).abs() <= 1e-15);
            }
            prop_assert!((l2_distance(&pq) - l2_distance(&r)).abs() <= 1e-15);
            prop_assert!(check_sqrt2_bound(&pq, a, RegimePolicy::Enforce).unwrap().satisfied);
        }

        #[test]
        fn weakest_link(ys in prop::collection::vec(0.0f64..=1.0, 1..20)) {
            let prod: f64 = ys.iter().product();
            let sum: f64 = ys.iter().map(|y| 1.0 - y).sum();
            prop_assert!(1.0 - prod <= sum + 1e-15);
        }
    }
}
