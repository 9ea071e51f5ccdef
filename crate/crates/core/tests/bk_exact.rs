//! The B_k(n) table against exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use bernoulli_tv::bounds::{bk_sequence, delta2_coefficient};

fn int(x: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn binom(n: usize, k: usize) -> BigRational {
    let mut c = BigRational::one();
    for i in 0..k {
        c = c * int(n - i) / int(i + 1);
    }
    c
}

fn exact_recurrence(n: usize) -> Vec<BigRational> {
    let m = int(2 * n - 1);
    let mut b = vec![BigRational::one()];
    for k in 2..=n {
        let mut pow = BigRational::one();
        for _ in 1..k {
            pow *= m.clone();
        }
        let next =
            int(n - k + 1) / (int(k) * m.clone()) * b[k - 2].clone() + binom(n - 1, k - 1) / pow * int(2) / int(k);
        b.push(next);
    }
    b
}

fn exact_closed_form(n: usize, k: usize) -> BigRational {
    let m = int(2 * n - 1);
    let mut pow = BigRational::one();
    for _ in 1..k {
        pow *= m.clone();
    }
    int(2 * k - 1) / int(k * (k - 1)) * binom(n - 2, k - 2) * int(n - 1) / pow
}

#[test]
fn recurrence_and_closed_form_agree_exactly() {
    for n in 2..=64 {
        let rec = exact_recurrence(n);
        let mut tail = BigRational::zero();
        for k in 2..=n {
            assert_eq!(rec[k - 1], exact_closed_form(n, k), "n={n} k={k}");
            tail += rec[k - 1].clone();
        }
        assert_eq!(tail, int(n - 1) / int(n), "n={n}");
    }
}

#[test]
fn float_table_tracks_exact_values() {
    for n in 2..=64 {
        let exact = exact_recurrence(n);
        let seq = bk_sequence(n).unwrap();
        for k in 1..=n {
            let e = exact[k - 1].to_f64().unwrap();
            let rel = |x: f64| (x - e).abs() / e;
            assert!(
                rel(seq.get(k)) <= 1e-14,
                "recurrence n={n} k={k}: {} vs {e}",
                seq.get(k)
            );
            if let Some(c) = seq.closed_form(k) {
                assert!(rel(c) <= 1e-14, "closed form n={n} k={k}: {c} vs {e}");
            }
        }
    }
}

#[test]
fn second_coefficient_is_correctly_rounded() {
    for n in 2..=200 {
        let exact = (int(3 * (n - 1)) / int(2 * (2 * n - 1))).to_f64().unwrap();
        assert_eq!(delta2_coefficient(n), exact, "n={n}");
        if n <= 64 {
            assert_eq!(bk_sequence(n).unwrap().get(2), exact, "n={n}");
        }
    }
}
