//! Truncation levels for the ANOVA expansion: `m_1(ε, d)`, the factorial
//! majorant `M(ε)` and the level `m_2(ε, d)` of the orthogonal case.

use serde::Serialize;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::numeric::{ln_gamma_fn, NeumaierSum};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_c0sq(c0sq: f64) -> Result<()> {
    if !(c0sq.is_finite() && c0sq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C0^2 must be positive, got {c0sq}"
        )));
    }
    Ok(())
}

/// Tails `T(m) = Σ_{k=m+1}^d C(d,k) (c0sq/d)^k` for `m = 0, 1, …`; entries past
/// the end of the vector are zero in double precision.
pub fn tail_profile(d: usize, c0sq: f64) -> Vec<f64> {
    let df = d as f64;
    let ln_ratio = (c0sq / df).ln();
    let mut terms = Vec::new();
    let mut ln_t = c0sq.ln();
    let mut k = 1usize;
    while k <= d {
        let t = ln_t.exp();
        if t == 0.0 && k as f64 > c0sq {
            break;
        }
        terms.push(t);
        ln_t += ((df - k as f64) / (k as f64 + 1.0)).ln() + ln_ratio;
        k += 1;
    }
    let mut tails = vec![0.0; terms.len() + 1];
    let mut acc = NeumaierSum::new();
    for m in (0..terms.len()).rev() {
        acc.add(terms[m]);
        tails[m] = acc.value();
    }
    tails
}

/// `Σ_{k=m+1}^d C(d,k) (c0sq/d)^k`.
pub fn binomial_tail(d: usize, m: usize, c0sq: f64) -> f64 {
    if m >= d {
        return 0.0;
    }
    tail_profile(d, c0sq).get(m).copied().unwrap_or(0.0)
}

/// Truncation levels with the tail values that certify them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub epsilon: f64,
    pub d: usize,
    pub c0sq: f64,
    pub m1: usize,
    pub tail_at_m1: f64,
    /// `T(m1 − 1)`, which exceeds `ε²` when `m1 > 0`.
    pub tail_before_m1: Option<f64>,
    pub big_m: f64,
    pub ceil_big_m: i64,
    pub refined_big_m: i64,
    pub m2: Option<usize>,
    pub c_const: Option<f64>,
}

impl TruncationReport {
    pub fn with_m2(mut self, c_const: f64) -> Result<Self> {
        self.m2 = Some(m2(self.epsilon, self.d, self.c0sq, c_const)?);
        self.c_const = Some(c_const);
        Ok(self)
    }
}

/// Smallest `m` whose binomial tail does not exceed `ε²`.
pub fn m1(epsilon: f64, d: usize, c0sq: f64) -> Result<TruncationReport> {
    check_epsilon(epsilon)?;
    check_c0sq(c0sq)?;
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let eps2 = epsilon * epsilon;
    let tails = tail_profile(d, c0sq);
    let tail = |m: usize| tails.get(m).copied().unwrap_or(0.0);
    let m1 = (0..=d).find(|m| tail(*m) <= eps2).unwrap_or(d);
    let big = big_m(epsilon, c0sq, false)?;
    Ok(TruncationReport {
        epsilon,
        d,
        c0sq,
        m1,
        tail_at_m1: tail(m1),
        tail_before_m1: (m1 > 0).then(|| tail(m1 - 1)),
        big_m: big,
        ceil_big_m: big.ceil() as i64,
        refined_big_m: big_m(epsilon, c0sq, true)? as i64,
        m2: None,
        c_const: None,
    })
}

/// `M(ε)`. Unrefined: the real root of `(M+1)!/c0sq^{M+1} = e^{c0sq}/ε²` on
/// the increasing branch. Refined: the least integer `M` with `c0sq < M+1` and
/// `(M+1)!/c0sq^{M+1} ≥ 1/(ε² (1 − c0sq/(M+1)))`.
pub fn big_m(epsilon: f64, c0sq: f64, refined: bool) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_c0sq(c0sq)?;
    let ln_target = -2.0 * epsilon.ln();
    let ln_c = c0sq.ln();
    if refined {
        let mut m = 0u64;
        loop {
            let m1 = m as f64 + 1.0;
            let ratio = c0sq / m1;
            if ratio < 1.0 {
                let lhs = ln_gamma_fn(m1 + 1.0) - m1 * ln_c;
                if lhs >= ln_target - (-ratio).ln_1p() {
                    return Ok(m as f64);
                }
            }
            m += 1;
        }
    }
    let g = |m: f64| ln_gamma_fn(m + 2.0) - (m + 1.0) * ln_c - c0sq - ln_target;
    // ψ(M+2) = ln c0sq marks the minimum of g.
    let (mut a, mut b) = (1e-12_f64, 1.0_f64);
    while digamma(b) < ln_c {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if digamma(mid) < ln_c {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut lo = (0.5 * (a + b) - 2.0).max(-1.0);
    let mut hi = 400.0_f64.max(lo + 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `m_2(ε, d)` for the orthogonal case, with constant `C ≥ 1`.
pub fn m2(epsilon: f64, d: usize, c0sq: f64, c_const: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    check_c0sq(c0sq)?;
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if !(c_const.is_finite() && c_const >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the orthogonality constant must be at least 1, got {c_const}"
        )));
    }
    let df = d as f64;
    let ln_target = 2.0 * epsilon.ln() - c_const.ln();
    let ln_r = (c0sq / df).ln();
    if df < c0sq {
        return Ok(if df * ln_r <= ln_target { 0 } else { d });
    }
    if ln_r >= 0.0 {
        return Ok(d);
    }
    let holds = |k: usize| (k as f64 + 1.0) * ln_r <= ln_target;
    let guess = (ln_target / ln_r).ceil() - 1.0;
    let mut k = guess.clamp(0.0, df) as usize;
    while k > 0 && holds(k - 1) {
        k -= 1;
    }
    while k < d && !holds(k) {
        k += 1;
    }
    Ok(k)
}

/// `max(λ_{1,1} e^{1/δ}, δ ln(1/ε²))`.
pub fn m2_bound(epsilon: f64, lambda11: f64, delta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok((lambda11 * (1.0 / delta).exp()).max(-2.0 * delta * epsilon.ln()))
}
