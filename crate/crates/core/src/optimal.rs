//! Eigenvalues of `W_d` in the orthogonal case and the optimal algorithm `A*_{ε,d}`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::iter::Peekable;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{binomial_exact, ln_binomial, ln_factorial, NeumaierSum};
use crate::spectrum::Spectrum;
use crate::truncation;

/// One canonical eigenvalue label of `W_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorEigen {
    /// `d^{-ℓ} ∏_j λ_{1,k_j}`.
    pub value: f64,
    /// Nonincreasing univariate indices; its length is the cardinality `ℓ`.
    pub label: Vec<u32>,
    /// `C(d,ℓ) · ℓ! / ∏ m_i!`, the number of (subset, multi-index) pairs with this label.
    pub multiplicity: f64,
}

impl TensorEigen {
    pub fn cardinality(&self) -> usize {
        self.label.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: f64,
    label: Vec<u32>,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| (other.label.len(), &other.label).cmp(&(self.label.len(), &self.label)))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first enumeration of the eigenvalues of `W_d`, largest first.
///
/// Only the `N` retained univariate eigenvalues are used, so values are exact
/// and complete above [`TensorEigenStream::floor`].
pub struct TensorEigenStream<'a> {
    d: usize,
    s: &'a Spectrum,
    heap: BinaryHeap<Entry>,
    seen: HashSet<Vec<u32>>,
    emitted: u64,
    grow: bool,
}

impl<'a> TensorEigenStream<'a> {
    pub fn new(d: usize, s: &'a Spectrum) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("d must be at least 1".into()));
        }
        let grow = s.lambda11() <= d as f64;
        let mut stream = Self {
            d,
            s,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
            emitted: 0,
            grow,
        };
        let seed = if grow { Vec::new() } else { vec![1; d] };
        stream.push(seed);
        Ok(stream)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Every eigenvalue of `W_d` above this value is emitted exactly.
    pub fn floor(&self) -> f64 {
        floor_for(self.d, self.s)
    }

    fn value_of(&self, label: &[u32]) -> f64 {
        let d = self.d as f64;
        label
            .iter()
            .fold(1.0, |acc, k| acc * (self.s.eigenvalues()[*k as usize - 1] / d))
    }

    fn push(&mut self, label: Vec<u32>) {
        if self.seen.insert(label.clone()) {
            let value = self.value_of(&label);
            self.heap.push(Entry { value, label });
        }
    }

    fn multiplicity(&self, label: &[u32]) -> f64 {
        let ell = label.len();
        let mut runs = Vec::new();
        let mut i = 0;
        while i < ell {
            let mut j = i;
            while j < ell && label[j] == label[i] {
                j += 1;
            }
            runs.push((j - i) as u64);
            i = j;
        }
        if let Some(b) = binomial_exact(self.d as u64, ell as u64) {
            let mut acc: Option<u128> = Some(b);
            let mut placed = 0u64;
            for r in &runs {
                placed += r;
                acc = acc.and_then(|a| binomial_exact(placed, *r).and_then(|c| a.checked_mul(c)));
            }
            if let Some(a) = acc {
                return a as f64;
            }
        }
        let ln = ln_binomial(self.d as u64, ell as u64) + ln_factorial(ell as u64)
            - runs.iter().map(|r| ln_factorial(*r)).sum::<f64>();
        ln.exp()
    }

    fn expand(&mut self, label: &[u32]) {
        let n = self.s.len() as u32;
        let ell = label.len();
        for j in 0..ell {
            if (j == 0 || label[j - 1] != label[j]) && label[j] < n {
                let mut next = label.to_vec();
                next[j] += 1;
                self.push(next);
            }
        }
        if self.grow {
            if ell < self.d {
                let mut next = label.to_vec();
                next.push(1);
                self.push(next);
            }
        } else if ell > 0 && label[ell - 1] == 1 {
            self.push(label[..ell - 1].to_vec());
        }
    }

    /// Groups consecutive labels with bitwise-equal values.
    pub fn distinct(self) -> Distinct<Self> {
        Distinct {
            inner: self.peekable(),
        }
    }
}

/// `λ_{1,N+1} / d` scaled for the `λ_{1,1} > d` case; zero for complete spectra.
pub fn floor_for(d: usize, s: &Spectrum) -> f64 {
    if s.is_finite() {
        return 0.0;
    }
    let df = d as f64;
    let next = s.eigenvalue(s.len() + 1).unwrap_or(0.0);
    next / df * (s.lambda11() / df).max(1.0).powi(d as i32 - 1)
}

impl Iterator for TensorEigenStream<'_> {
    type Item = TensorEigen;

    fn next(&mut self) -> Option<TensorEigen> {
        let Entry { value, label } = self.heap.pop()?;
        self.expand(&label);
        self.emitted += 1;
        let multiplicity = self.multiplicity(&label);
        Some(TensorEigen {
            value,
            label,
            multiplicity,
        })
    }
}

/// A distinct eigenvalue with its total multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinctEigen {
    pub value: f64,
    pub multiplicity: f64,
    pub labels: Vec<Vec<u32>>,
}

pub struct Distinct<I: Iterator<Item = TensorEigen>> {
    inner: Peekable<I>,
}

impl<I: Iterator<Item = TensorEigen>> Iterator for Distinct<I> {
    type Item = DistinctEigen;

    fn next(&mut self) -> Option<DistinctEigen> {
        let first = self.inner.next()?;
        let mut out = DistinctEigen {
            value: first.value,
            multiplicity: first.multiplicity,
            labels: vec![first.label],
        };
        while let Some(e) = self.inner.next_if(|e| e.value == first.value) {
            out.multiplicity += e.multiplicity;
            out.labels.push(e.label);
        }
        Some(out)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Labels with value above `threshold` and the first value at or below it.
struct Cut {
    labels: Vec<TensorEigen>,
    next_value: f64,
}

fn cut_at(d: usize, s: &Spectrum, threshold: f64) -> Result<Cut> {
    let floor = floor_for(d, s);
    if threshold < floor {
        return Err(Error::CertificationExceeded {
            requested: threshold,
            floor,
        });
    }
    let mut labels = Vec::new();
    let mut next_value = 0.0;
    for e in TensorEigenStream::new(d, s)? {
        if e.value > threshold {
            labels.push(e);
        } else {
            next_value = e.value;
            break;
        }
    }
    Ok(Cut { labels, next_value })
}

/// `n(ε, d) = #{k : λ_{d,k} > ε²}`.
pub fn n_of_eps(epsilon: f64, d: usize, s: &Spectrum) -> Result<f64> {
    check_epsilon(epsilon)?;
    let cut = cut_at(d, s, epsilon * epsilon)?;
    Ok(cut.labels.iter().map(|e| e.multiplicity).sum())
}

/// Summary of `A*_{ε,d}` built from the leading eigenpairs of `W_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSummary {
    pub epsilon: f64,
    pub d: usize,
    pub c_const: f64,
    /// `ε / √C`, the accuracy demanded from the spectral truncation.
    pub eps_scaled: f64,
    pub n: f64,
    pub labels: Vec<TensorEigen>,
    /// `√λ_{d,n+1}`.
    pub worst_case_error: f64,
    pub max_act: usize,
    pub m2: usize,
    pub within_m2: bool,
}

pub fn optimal_algorithm(epsilon: f64, d: usize, s: &Spectrum, c_const: f64) -> Result<OptimalSummary> {
    check_epsilon(epsilon)?;
    if !s.is_orthogonal() {
        return Err(Error::InvalidConfiguration(
            "the optimal algorithm needs a G-orthogonal ANOVA decomposition".into(),
        ));
    }
    if !(c_const.is_finite() && c_const >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the orthogonality constant must be at least 1, got {c_const}"
        )));
    }
    let eps_scaled = epsilon / c_const.sqrt();
    let cut = cut_at(d, s, eps_scaled * eps_scaled)?;
    let n = cut.labels.iter().map(|e| e.multiplicity).sum();
    let max_act = cut.labels.iter().map(TensorEigen::cardinality).max().unwrap_or(0);
    let m2 = truncation::m2(eps_scaled, d, s.c0sq(), 1.0)?;
    Ok(OptimalSummary {
        epsilon,
        d,
        c_const,
        eps_scaled,
        n,
        worst_case_error: cut.next_value.sqrt(),
        max_act,
        m2,
        within_m2: max_act <= m2,
        labels: cut.labels,
    })
}

/// Both sides of `Σ_k λ_{d,k}^τ = (1 + L(τ)/d^τ)^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSum {
    pub lhs: f64,
    pub rhs: f64,
    /// True for complete spectra, where both sides agree exactly.
    pub exact: bool,
    /// For truncated spectra `rhs − lhs` is at most this amount.
    pub tail_gap: f64,
}

/// Label count above which full enumeration is refused.
pub const FULL_ENUMERATION_LIMIT: f64 = 2.0e6;

pub fn tau_sum_identity(d: usize, s: &Spectrum, tau: f64) -> Result<TauSum> {
    let l = s.l_tau(tau)?;
    let df = d as f64;
    let rhs = (df * (l / df.powf(tau)).ln_1p()).exp();
    let labels = (ln_binomial((s.len() + d) as u64, d as u64)).exp();
    if labels > FULL_ENUMERATION_LIMIT {
        return Err(Error::UnsupportedScale(format!(
            "full enumeration would visit about {labels:.3e} labels"
        )));
    }
    let mut lhs = NeumaierSum::new();
    for e in TensorEigenStream::new(d, s)? {
        lhs.add(e.multiplicity * e.value.powf(tau));
    }
    let lhs = lhs.value();
    let exact = s.is_finite();
    let tail_gap = if exact {
        0.0
    } else {
        let head: f64 = s.eigenvalues().iter().map(|v| v.powf(tau)).sum();
        rhs - (df * (head / df.powf(tau)).ln_1p()).exp()
    };
    Ok(TauSum {
        lhs,
        rhs,
        exact,
        tail_gap,
    })
}

/// `e^{L(τ) d^{1−τ}/τ} k^{-1/τ}`, a bound on the `k`-th eigenvalue of `W_d`.
pub fn lambda_dk_bound(d: usize, k: f64, s: &Spectrum, tau: f64) -> Result<f64> {
    let l = s.l_tau(tau)?;
    let df = d as f64;
    Ok((l * df.powf(1.0 - tau) / tau - k.ln() / tau).exp())
}

/// `⌈e^{L(τ) d^{1−τ}} ε^{-2τ}⌉ − 1`, a bound on `n(ε, d)`.
pub fn n_of_eps_bound(epsilon: f64, d: usize, s: &Spectrum, tau: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let l = s.l_tau(tau)?;
    let df = d as f64;
    Ok((l * df.powf(1.0 - tau) - 2.0 * tau * epsilon.ln()).exp().ceil() - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d2() -> Spectrum {
        Spectrum::custom(vec![0.5, 0.125]).unwrap()
    }

    #[test]
    fn d2_stream_example() {
        let s = d2();
        let got: Vec<(f64, f64)> = TensorEigenStream::new(2, &s)
            .unwrap()
            .distinct()
            .map(|e| (e.value, e.multiplicity))
            .collect();
        assert_eq!(
            got,
            vec![
                (1.0, 1.0),
                (0.25, 2.0),
                (0.0625, 3.0),
                (0.015625, 2.0),
                (0.00390625, 1.0)
            ]
        );
    }

    #[test]
    fn d1_stream_is_the_spectrum() {
        let s = Spectrum::korobov(1.0, 20).unwrap();
        let values: Vec<f64> = TensorEigenStream::new(1, &s).unwrap().map(|e| e.value).collect();
        assert_eq!(values[0], 1.0);
        assert_eq!(&values[1..], s.eigenvalues());
    }

    #[test]
    fn first_value_is_one() {
        let s = Spectrum::korobov(2.0, 50).unwrap();
        for d in [1usize, 3, 1000] {
            let first = TensorEigenStream::new(d, &s).unwrap().next().unwrap();
            assert_eq!(first.value, 1.0);
            assert!(first.label.is_empty());
            assert_eq!(first.multiplicity, 1.0);
        }
    }

    #[test]
    fn large_lambda_seeds_from_full_cardinality() {
        let s = Spectrum::custom(vec![3.0, 1.0]).unwrap();
        let values: Vec<TensorEigen> = TensorEigenStream::new(2, &s).unwrap().collect();
        assert_eq!(values[0].value, 2.25);
        assert!(values.windows(2).all(|w| w[0].value >= w[1].value));
        let total: f64 = values.iter().map(|e| e.multiplicity).sum();
        assert_eq!(total, 1.0 + 2.0 * 2.0 + 4.0);
    }

    #[test]
    fn n_of_eps_examples() {
        let s = d2();
        assert_eq!(n_of_eps(0.1f64.sqrt(), 2, &s).unwrap(), 3.0);
        assert_eq!(n_of_eps(1.0 - 1e-12, 2, &s).unwrap(), 1.0);
        assert!(n_of_eps(1.0, 2, &s).is_err());
        let k = Spectrum::korobov(1.0, 100).unwrap();
        assert!(matches!(
            n_of_eps(1e-4, 1, &k),
            Err(Error::CertificationExceeded { .. })
        ));
    }

    #[test]
    fn optimal_examples() {
        let s = d2();
        let a = optimal_algorithm(0.1f64.sqrt(), 2, &s, 1.0).unwrap();
        assert_eq!(a.n, 3.0);
        assert_relative_eq!(a.worst_case_error, 0.25, max_relative = 1e-15);
        assert_eq!(a.max_act, 1);
        let k = Spectrum::korobov(1.0, 10_000).unwrap();
        let b = optimal_algorithm(0.1, 10, &k, 1.0).unwrap();
        assert!(b.within_m2);
        assert_eq!(b.m2, truncation::m2(0.1, 10, k.c0sq(), 1.0).unwrap());
        let w = Spectrum::wiener(10, crate::spectrum::C0sqMode::Exact).unwrap();
        assert!(matches!(
            optimal_algorithm(0.1, 2, &w, 1.0),
            Err(Error::InvalidConfiguration(_))
        ));
        // scaled with C = 4 is the same as ε/2
        let c = optimal_algorithm(0.2, 10, &k, 4.0).unwrap();
        assert_eq!(c.n, n_of_eps(0.1, 10, &k).unwrap());
    }

    #[test]
    fn tau_sum_examples() {
        let s = d2();
        let t = tau_sum_identity(2, &s, 1.0).unwrap();
        assert_eq!(t.lhs, 1.72265625);
        assert_relative_eq!(t.rhs, 1.72265625, max_relative = 1e-12);
        let one = tau_sum_identity(1, &s, 1.7).unwrap();
        assert_relative_eq!(one.lhs, 1.0 + s.l_tau(1.7).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(one.rhs, one.lhs, max_relative = 1e-14);
        let k = Spectrum::korobov(1.0, 200).unwrap();
        let t = tau_sum_identity(2, &k, 1.0).unwrap();
        assert!(!t.exact);
        assert!(t.lhs <= t.rhs && t.rhs - t.lhs <= t.tail_gap * (1.0 + 1e-9));
    }

    #[test]
    fn lambda_bound_examples() {
        let s = d2();
        let values: Vec<TensorEigen> = TensorEigenStream::new(2, &s).unwrap().collect();
        let mut k = 0.0;
        for e in &values {
            k += e.multiplicity;
            assert!(e.value <= lambda_dk_bound(2, k, &s, 1.0).unwrap());
        }
        assert!(lambda_dk_bound(5, 1.0, &s, 1.3).unwrap() >= 1.0);
        let kor = Spectrum::korobov(1.0, 100).unwrap();
        let l = kor.l_tau(1.0).unwrap();
        for d in 1..=1000 {
            let b = (l * (d as f64).powf(0.0)).exp();
            assert!(b <= l.exp() * (1.0 + 1e-15));
            let b2 = (kor.l_tau(1.5).unwrap() * (d as f64).powf(-0.5)).exp();
            assert!(b2 <= kor.l_tau(1.5).unwrap().exp());
        }
    }
}
