//! The changing-dimension algorithm `A_{ε,d}`: per-cardinality parameter
//! plans, application to sparse ANOVA functions, and pricing.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::numeric::{ln_binomial, ln_factorial, LogSum, NeumaierSum};
use crate::space::{eigen_product, subset_g_norm_sq, AnovaFunction, Functional};
use crate::spectrum::Spectrum;
use crate::truncation;

/// Relative width of the band in which two eigenvalue products count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Parameters for subsets of one cardinality `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub ell: usize,
    pub eps_ell: f64,
    /// `⌊L(τ)^ℓ / ε_ℓ^{2τ}⌋`, kept as a float since it can exceed `u64`.
    pub n_ell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdaPlan {
    pub epsilon: f64,
    pub d: usize,
    pub tau: f64,
    pub m1: usize,
    pub big_r: f64,
    pub ell_star: usize,
    pub levels: Vec<Level>,
    pub l_tau_value: f64,
    pub c0sq: f64,
}

/// Plan with `m1` taken from the truncation module and `L(τ)` from the spectrum.
/// `tau = None` selects `max(1, 1/α) + 0.1`.
pub fn plan(epsilon: f64, d: usize, spectrum: &Spectrum, tau: Option<f64>) -> Result<CdaPlan> {
    let tau = tau.unwrap_or_else(|| spectrum.default_tau());
    let l = spectrum.l_tau(tau)?;
    let m1 = truncation::m1(epsilon, d, spectrum.c0sq())?.m1;
    let mut p = plan_with_m1(epsilon, d, tau, l, m1)?;
    p.c0sq = spectrum.c0sq();
    Ok(p)
}

/// Plan from explicit `τ`, `L(τ)` and truncation level.
pub fn plan_with_m1(epsilon: f64, d: usize, tau: f64, l_tau: f64, m1: usize) -> Result<CdaPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if d == 0 || m1 > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d and m1 <= d, got d = {d}, m1 = {m1}"
        )));
    }
    if !(tau.is_finite() && tau > 0.0 && l_tau.is_finite() && l_tau > 0.0) {
        return Err(Error::InvalidArgument("tau and L(tau) must be positive".into()));
    }
    let df = d as f64;
    let ln_d = df.ln();
    let mut r = NeumaierSum::new();
    for k in 1..=m1 {
        r.add((ln_binomial(d as u64, k as u64) - k as f64 * tau / (1.0 + tau) * ln_d).exp());
    }
    let big_r = r.value();
    let levels = (1..=m1)
        .map(|ell| {
            let ln_eps_ell =
                epsilon.ln() + ell as f64 * ln_d / (2.0 * (1.0 + tau)) - 0.5 * big_r.ln();
            let ln_n = ell as f64 * l_tau.ln() - 2.0 * tau * ln_eps_ell;
            Level {
                ell,
                eps_ell: ln_eps_ell.exp(),
                n_ell: snapped_floor(ln_n.exp()),
            }
        })
        .collect();
    let ell_star = m1.min(df.powf(1.0 / (1.0 + tau)).floor() as usize);
    Ok(CdaPlan {
        epsilon,
        d,
        tau,
        m1,
        big_r,
        ell_star,
        levels,
        l_tau_value: l_tau,
        c0sq: f64::NAN,
    })
}

/// Floor that treats values within `1e-12` (relative) below an integer as that integer.
fn snapped_floor(x: f64) -> f64 {
    let r = x.round();
    if r > x && (r - x) <= 1e-12 * r {
        r
    } else {
        x.floor()
    }
}

impl CdaPlan {
    pub fn level(&self, ell: usize) -> Option<&Level> {
        if ell == 0 {
            None
        } else {
            self.levels.get(ell - 1)
        }
    }

    /// `Σ_ℓ C(d,ℓ) d^{-ℓ} ε_ℓ²`, which equals `ε²` by construction.
    pub fn error_split(&self) -> f64 {
        let ln_d = (self.d as f64).ln();
        let mut acc = NeumaierSum::new();
        for lv in &self.levels {
            acc.add(
                (ln_binomial(self.d as u64, lv.ell as u64) - lv.ell as f64 * ln_d
                    + 2.0 * lv.eps_ell.ln())
                .exp(),
            );
        }
        acc.value()
    }

    /// Largest cardinality that receives at least one functional.
    pub fn max_act(&self) -> usize {
        self.levels
            .iter()
            .filter(|lv| lv.n_ell >= 1.0)
            .map(|lv| lv.ell)
            .max()
            .unwrap_or(0)
    }

    /// `1 + Σ_ℓ C(d,ℓ) n_ℓ`, the number of functionals including `⟨f, 1⟩`.
    pub fn functional_count(&self) -> f64 {
        let mut acc = LogSum::new();
        acc.add_ln(0.0);
        for lv in &self.levels {
            if lv.n_ell >= 1.0 {
                acc.add_ln(ln_binomial(self.d as u64, lv.ell as u64) + lv.n_ell.ln());
            }
        }
        acc.ln_value().exp()
    }
}

/// Regime used for the bound on `R^{1+τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RRegime {
    /// `d > m1^{1+τ}`: `R^{1+τ} ≤ d^{m1} / ((m1−1)!)^{1+τ}`.
    Factorial,
    /// otherwise: `R^{1+τ} ≤ m1 e^{m1}`.
    Exponential,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RBound {
    pub regime: RRegime,
    pub r_pow: f64,
    pub ln_r_pow: f64,
    pub bound: f64,
    pub ln_bound: f64,
    /// `R^{1+τ} ≤ bound` up to relative `1e-12`.
    pub holds: bool,
}

pub fn r_upper_bounds(plan: &CdaPlan) -> RBound {
    let m1 = plan.m1;
    let tau = plan.tau;
    if m1 == 0 {
        return RBound {
            regime: RRegime::Empty,
            r_pow: 0.0,
            ln_r_pow: f64::NEG_INFINITY,
            bound: 0.0,
            ln_bound: f64::NEG_INFINITY,
            holds: true,
        };
    }
    let df = plan.d as f64;
    let m = m1 as f64;
    let ln_r_pow = (1.0 + tau) * plan.big_r.ln();
    let (regime, ln_bound) = if (df.ln()) > (1.0 + tau) * m.ln() {
        (
            RRegime::Factorial,
            m * df.ln() - (1.0 + tau) * ln_factorial(m1 as u64 - 1),
        )
    } else {
        (RRegime::Exponential, m.ln() + m)
    };
    RBound {
        regime,
        r_pow: ln_r_pow.exp(),
        ln_r_pow,
        bound: ln_bound.exp(),
        ln_bound,
        holds: ln_r_pow <= ln_bound + 1e-12,
    }
}

/// Result of running `A_{ε,d}` on a concrete function.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyOutcome {
    pub approx: AnovaFunction,
    /// `‖f − A_{ε,d} f‖_{G_d}` for orthogonal kernels, otherwise the sum of
    /// per-subset residual norms.
    pub error: f64,
    pub is_bound: bool,
    /// One block per processed subset; each block stands for `n_{|u|}` functionals on `u`.
    pub functionals: Vec<Functional>,
    pub kept: usize,
    pub dropped: usize,
}

impl ApplyOutcome {
    pub fn max_act(&self) -> usize {
        self.functionals.iter().map(Functional::act).max().unwrap_or(0)
    }
}

/// Runs `A_{ε,d}` on `f`: every stored subset with `|u| ≤ m1` keeps the
/// coefficients ranked within the top `n_{|u|}` eigenvalues of `W_u`, the rest is dropped.
pub fn apply(plan: &CdaPlan, f: &AnovaFunction, spectrum: &Spectrum) -> Result<ApplyOutcome> {
    if f.d() != plan.d {
        return Err(Error::DimensionMismatch {
            expected: plan.d,
            found: f.d(),
        });
    }
    let orthogonal = spectrum.is_orthogonal();
    let ranks = RankCounter::new(spectrum);
    let mut approx = AnovaFunction::constant_function(f.d(), f.constant()).with_max_index(f.max_index());
    let mut functionals = Vec::new();
    let mut residual_sq = NeumaierSum::new();
    let mut residual_sum = NeumaierSum::new();
    let (mut kept, mut dropped) = (0usize, 0usize);
    for (u, coeffs) in f.terms() {
        let n = plan.level(u.len()).map(|lv| lv.n_ell).unwrap_or(0.0);
        let mut keep_block = BTreeMap::new();
        let mut drop_block = BTreeMap::new();
        if n >= 1.0 {
            functionals.push(Functional::new([u.clone()]));
            for (k, c) in coeffs {
                if ranks.within_top(k, n)? {
                    keep_block.insert(k.clone(), *c);
                } else {
                    drop_block.insert(k.clone(), *c);
                }
            }
        } else {
            drop_block = coeffs.clone();
        }
        kept += keep_block.len();
        dropped += drop_block.len();
        let r = subset_g_norm_sq(spectrum, &drop_block)?;
        residual_sq.add(r);
        residual_sum.add(r.sqrt());
        approx.insert_block(u.clone(), keep_block);
    }
    let (error, is_bound) = if orthogonal {
        (residual_sq.value().sqrt(), false)
    } else {
        (residual_sum.value(), true)
    };
    Ok(ApplyOutcome {
        approx,
        error,
        is_bound,
        functionals,
        kept,
        dropped,
    })
}

/// Counts multi-indices by eigenvalue product without enumerating them.
pub struct RankCounter<'a> {
    s: &'a Spectrum,
}

impl<'a> RankCounter<'a> {
    pub fn new(s: &'a Spectrum) -> Self {
        Self { s }
    }

    fn lambda(&self, i: u64) -> Option<f64> {
        self.s.eigenvalue(i as usize)
    }

    /// Number of `k ∈ ℕ₊^ell` with `p λ_{k_1} ⋯ λ_{k_ell} > t` (left-to-right
    /// rounding), saturating at `cap`.
    pub fn count_above(&self, ell: usize, p: f64, t: f64, cap: u64) -> u64 {
        if cap == 0 {
            return 0;
        }
        match ell {
            0 => u64::from(p > t),
            1 => self.leaf_count(p, t).min(cap),
            _ => {
                let l1 = self.s.lambda11();
                let mut total = 0u64;
                let mut i = 1u64;
                while let Some(li) = self.lambda(i) {
                    let q = p * li;
                    let mut reach = q;
                    for _ in 1..ell {
                        reach *= l1;
                    }
                    if reach <= t {
                        break;
                    }
                    total += self.count_above(ell - 1, q, t, cap - total);
                    if total >= cap {
                        return cap;
                    }
                    i += 1;
                }
                total
            }
        }
    }

    fn leaf_count(&self, p: f64, t: f64) -> u64 {
        let above = |i: u64| self.lambda(i).is_some_and(|l| p * l > t);
        if !above(1) {
            return 0;
        }
        let mut lo = 1u64;
        let mut hi = 2u64;
        while above(hi) {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return u64::MAX;
            }
        }
        // above(lo) and !above(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if above(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Whether `k` is among the first `n` eigenvalues of `W_u` (value descending,
    /// lexicographic among ties).
    pub fn within_top(&self, k: &[u32], n: f64) -> Result<bool> {
        if n < 1.0 {
            return Ok(false);
        }
        let cap = if n >= 4.0e18 { u64::MAX / 2 } else { n as u64 };
        let val = eigen_product(self.s, k)?;
        let ell = k.len();
        let hi = val * (1.0 + TIE_TOLERANCE);
        let lo = val * (1.0 - TIE_TOLERANCE);
        let a = self.count_above(ell, 1.0, hi, cap);
        if a >= cap {
            return Ok(false);
        }
        let b = self.count_above(ell, 1.0, lo, cap + 1);
        if b <= cap {
            return Ok(true);
        }
        let room = cap - a;
        let mut before = 0u64;
        let mut prefix = 1.0;
        for (j, kj) in k.iter().enumerate() {
            let rest = ell - j - 1;
            for i in 1..*kj {
                let q = prefix * self.lambda(i as u64).unwrap_or(0.0);
                let above_lo = self.count_above(rest, q, lo, u64::MAX);
                let above_hi = self.count_above(rest, q, hi, u64::MAX);
                before += above_lo - above_hi;
                if before >= room {
                    return Ok(false);
                }
            }
            prefix *= self.lambda(*kj as u64).unwrap_or(0.0);
        }
        Ok(before < room)
    }
}

/// Exact and bounded cost of a plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Price {
    pub exact: f64,
    pub ln_exact: f64,
    pub bound: f64,
    pub ln_bound: f64,
    /// True when `exact` or `bound` overflowed and only the logarithms are meaningful.
    pub overflow: bool,
    pub within_bound: bool,
}

/// `$(0) + Σ_ℓ C(d,ℓ) n_ℓ $(ℓ)` and `$(0) + $(m1) max(L, L^{m1}) R^{1+τ} / ε^{2τ}`.
pub fn price(plan: &CdaPlan, cost: &CostModel) -> Result<Price> {
    cost.validate()?;
    let d = plan.d as u64;
    let mut exact = LogSum::new();
    exact.add_ln(cost.ln_cost(0));
    for lv in &plan.levels {
        if lv.n_ell >= 1.0 {
            exact.add_ln(ln_binomial(d, lv.ell as u64) + lv.n_ell.ln() + cost.ln_cost(lv.ell));
        }
    }
    let mut bound = LogSum::new();
    bound.add_ln(cost.ln_cost(0));
    if plan.m1 > 0 {
        let ln_l = plan.l_tau_value.ln();
        bound.add_ln(
            cost.ln_cost(plan.m1)
                + ln_l.max(plan.m1 as f64 * ln_l)
                + (1.0 + plan.tau) * plan.big_r.ln()
                - 2.0 * plan.tau * plan.epsilon.ln(),
        );
    }
    let (ln_exact, ln_bound) = (exact.ln_value(), bound.ln_value());
    let (e, b) = (ln_exact.exp(), ln_bound.exp());
    Ok(Price {
        exact: e,
        ln_exact,
        bound: b,
        ln_bound,
        overflow: !e.is_finite() || !b.is_finite(),
        within_bound: ln_exact <= ln_bound + 1e-11,
    })
}
