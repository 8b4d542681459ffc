use std::collections::BTreeMap;

use actvar::optimal::TensorEigenStream;
use actvar::Spectrum;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Every (subset, multi-index) pair of `W_d`, grouped by canonical label.
fn exhaustive(d: usize, lambdas: &[BigRational]) -> BTreeMap<Vec<u32>, (BigRational, u64)> {
    let n = lambdas.len() as u32;
    let mut out: BTreeMap<Vec<u32>, (BigRational, u64)> = BTreeMap::new();
    for mask in 0u32..(1 << d) {
        let ell = mask.count_ones() as usize;
        let total = (n as u64).pow(ell as u32);
        for code in 0..total {
            let mut k = Vec::with_capacity(ell);
            let mut c = code;
            for _ in 0..ell {
                k.push((c % n as u64) as u32 + 1);
                c /= n as u64;
            }
            let mut value = BigRational::one();
            for idx in &k {
                value *= &lambdas[*idx as usize - 1] / BigInt::from(d);
            }
            k.sort_unstable();
            let entry = out.entry(k).or_insert((value, 0));
            entry.1 += 1;
        }
    }
    out
}

fn check(lambdas: &[BigRational]) {
    let floats: Vec<f64> = lambdas.iter().map(|r| r.to_f64().unwrap()).collect();
    let s = Spectrum::custom(floats).unwrap();
    for d in 1..=3 {
        let oracle = exhaustive(d, lambdas);
        let got: Vec<_> = TensorEigenStream::new(d, &s).unwrap().collect();
        assert_eq!(got.len(), oracle.len(), "label count d={d}");
        let mut total = 0.0;
        for (i, e) in got.iter().enumerate() {
            let mut key = e.label.clone();
            key.sort_unstable();
            let (value, mult) = oracle.get(&key).unwrap_or_else(|| panic!("unknown label {:?}", e.label));
            let v = value.to_f64().unwrap();
            assert!((e.value - v).abs() <= 1e-15 * v, "value of {:?}", e.label);
            assert_eq!(e.multiplicity, *mult as f64, "multiplicity of {:?}", e.label);
            total += e.multiplicity;
            if i > 0 {
                assert!(got[i - 1].value >= e.value);
            }
        }
        assert_eq!(total, (lambdas.len() as f64 + 1.0).powi(d as i32));
    }
}

#[test]
fn dyadic_spectrum() {
    check(&[rat(1, 2), rat(1, 4), rat(1, 8), rat(1, 16)]);
}

#[test]
fn harmonic_spectrum() {
    check(&[rat(1, 1), rat(1, 3), rat(1, 5), rat(1, 7)]);
}

#[test]
fn spectrum_with_repeats() {
    check(&[rat(1, 3), rat(1, 3), rat(1, 9), rat(1, 27)]);
}

#[test]
fn leading_eigenvalue_above_d() {
    check(&[rat(5, 1), rat(2, 1), rat(1, 1), rat(1, 2)]);
}

#[test]
fn distinct_values_match_for_dyadic_d2() {
    let lambdas = [rat(1, 2), rat(1, 4), rat(1, 8), rat(1, 16)];
    let oracle = exhaustive(2, &lambdas);
    let mut by_value: BTreeMap<BigRational, u64> = BTreeMap::new();
    for (v, m) in oracle.values() {
        *by_value.entry(v.clone()).or_default() += m;
    }
    let s = Spectrum::custom(lambdas.iter().map(|r| r.to_f64().unwrap()).collect()).unwrap();
    let got: Vec<_> = TensorEigenStream::new(2, &s).unwrap().distinct().collect();
    let want: Vec<(f64, f64)> = by_value
        .iter()
        .rev()
        .map(|(v, m)| (v.to_f64().unwrap(), *m as f64))
        .collect();
    let got: Vec<(f64, f64)> = got.iter().map(|e| (e.value, e.multiplicity)).collect();
    assert_eq!(got, want);
}
