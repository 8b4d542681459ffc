//! Cost functions `$(k)` of a functional with `k` active variables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cda;
use crate::error::{Error, Result};
use crate::numeric::{fit_line, LineFit, LogSum};
use crate::optimal::optimal_algorithm;
use crate::spectrum::Spectrum;

/// A monotone cost family with `$(0) ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostModel {
    Constant,
    /// `(k+1)^q`
    Polynomial { q: f64 },
    /// `e^{qk}`
    Exponential { q: f64 },
    /// `e^{e^{qk}}`
    DoubleExponential { q: f64 },
    /// `c (k+1)` with `c ≥ 1`
    LinearFloor { c: f64 },
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CostModel::Constant => true,
            CostModel::Polynomial { q }
            | CostModel::Exponential { q }
            | CostModel::DoubleExponential { q } => q.is_finite() && q >= 0.0,
            CostModel::LinearFloor { c } => c.is_finite() && c >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "{self} violates $(0) >= 1 or monotonicity"
            )))
        }
    }

    /// `ln $(k)`.
    pub fn ln_cost(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            CostModel::Constant => 0.0,
            CostModel::Polynomial { q } => q * (kf + 1.0).ln(),
            CostModel::Exponential { q } => q * kf,
            CostModel::DoubleExponential { q } => (q * kf).exp(),
            CostModel::LinearFloor { c } => c.ln() + (kf + 1.0).ln(),
        }
    }

    pub fn cost(&self, k: usize) -> f64 {
        self.ln_cost(k).exp()
    }
}

/// `$(k)` after validating the model.
pub fn eval_cost(model: &CostModel, k: usize) -> Result<f64> {
    model.validate()?;
    Ok(model.cost(k))
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Constant => write!(f, "constant"),
            CostModel::Polynomial { q } => write!(f, "poly:{q}"),
            CostModel::Exponential { q } => write!(f, "exp:{q}"),
            CostModel::DoubleExponential { q } => write!(f, "dexp:{q}"),
            CostModel::LinearFloor { c } => write!(f, "linear:{c}"),
        }
    }
}

impl FromStr for CostModel {
    type Err = Error;

    /// Parses `constant`, `poly:q`, `exp:q`, `dexp:q` or `linear:c`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidModel(format!("bad cost parameter in {s:?}"))),
            }
        };
        let model = match name {
            "constant" | "const" => CostModel::Constant,
            "poly" | "polynomial" => CostModel::Polynomial { q: param(1.0)? },
            "exp" | "exponential" => CostModel::Exponential { q: param(1.0)? },
            "dexp" | "double_exponential" => CostModel::DoubleExponential { q: param(1.0)? },
            "linear" | "linear_floor" => CostModel::LinearFloor { c: param(1.0)? },
            _ => return Err(Error::InvalidModel(format!("unknown cost family {name:?}"))),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Where a complexity value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexitySource {
    /// Exact: cost of the optimal algorithm `A*_{ε,d}`.
    Optimal,
    /// Upper bound: cost of the changing-dimension algorithm.
    CdaBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityPoint {
    pub epsilon: f64,
    pub d: usize,
    pub comp: Option<f64>,
    pub ln_comp: Option<f64>,
    pub bound: f64,
    pub ln_bound: f64,
    pub within_bound: Option<bool>,
    pub n: Option<f64>,
    pub max_act: Option<usize>,
    /// Set when the point could not be priced.
    pub note: Option<String>,
}

/// Slope of `ln comp` against `ln(1/ε)` at a fixed `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub d: usize,
    pub eps_used: Vec<f64>,
    pub fit: LineFit,
}

/// `ln comp ≈ ln c + t (1 + ln d)(1 + ln 1/ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QptFit {
    pub t: f64,
    pub c: f64,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub cost: CostModel,
    pub c_const: f64,
    pub tau: f64,
    pub source: ComplexitySource,
    pub eps_grid: Vec<f64>,
    pub d_grid: Vec<usize>,
    pub points: Vec<ComplexityPoint>,
    /// Exponent fit at the largest `d` over its three smallest `ε`.
    pub p_str_fit: Option<ExponentFit>,
    pub per_d_exponent: Vec<ExponentFit>,
    pub qpt_fit: Option<QptFit>,
    /// `max ln(comp)/(d + 1/ε)` over the grid.
    pub weak_max: f64,
    pub weak_by_d: Vec<(usize, f64)>,
    pub all_within_bound: bool,
    pub priced_points: usize,
}

impl ComplexityReport {
    pub fn point(&self, epsilon: f64, d: usize) -> Option<&ComplexityPoint> {
        self.points.iter().find(|p| p.epsilon == epsilon && p.d == d)
    }
}

/// Fills the `(ε, d)` grid with complexity values. Orthogonal spectra are priced
/// exactly through `A*_{ε,d}`; other spectra through the changing-dimension
/// algorithm, flagged as an upper bound.
pub fn complexity_curve(
    s: &Spectrum,
    c_const: f64,
    cost: &CostModel,
    eps_grid: &[f64],
    d_grid: &[usize],
    tau: f64,
) -> Result<ComplexityReport> {
    cost.validate()?;
    if eps_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::InsufficientData("empty epsilon or d grid".into()));
    }
    let l = s.l_tau(tau)?;
    let source = if s.is_orthogonal() {
        ComplexitySource::Optimal
    } else {
        ComplexitySource::CdaBound
    };
    let mut points = Vec::with_capacity(eps_grid.len() * d_grid.len());
    for &d in d_grid {
        for &epsilon in eps_grid {
            points.push(match source {
                ComplexitySource::Optimal => optimal_point(s, c_const, cost, epsilon, d, tau, l)?,
                ComplexitySource::CdaBound => cda_point(s, cost, epsilon, d, tau)?,
            });
        }
    }
    let priced: Vec<&ComplexityPoint> = points.iter().filter(|p| p.ln_comp.is_some()).collect();
    let mut ds: Vec<usize> = d_grid.to_vec();
    ds.sort_unstable();
    ds.dedup();
    let per_d_exponent: Vec<ExponentFit> = ds
        .iter()
        .filter_map(|d| exponent_fit(&points, *d))
        .collect();
    let p_str_fit = ds.last().and_then(|d| exponent_fit(&points, *d));
    let xs: Vec<f64> = priced.iter().map(|p| qpt_x(p.d, p.epsilon)).collect();
    let ys: Vec<f64> = priced.iter().map(|p| p.ln_comp.unwrap()).collect();
    let qpt_fit = fit_line(&xs, &ys).map(|fit| QptFit {
        t: fit.slope,
        c: fit.intercept.exp(),
        fit,
    });
    let weak = |p: &ComplexityPoint| p.ln_comp.unwrap() / (p.d as f64 + 1.0 / p.epsilon);
    let weak_max = priced.iter().map(|p| weak(p)).fold(f64::NEG_INFINITY, f64::max);
    let weak_by_d = ds
        .iter()
        .map(|d| {
            let m = priced
                .iter()
                .filter(|p| p.d == *d)
                .map(|p| weak(p))
                .fold(f64::NEG_INFINITY, f64::max);
            (*d, m)
        })
        .collect();
    Ok(ComplexityReport {
        cost: *cost,
        c_const,
        tau,
        source,
        eps_grid: eps_grid.to_vec(),
        d_grid: d_grid.to_vec(),
        all_within_bound: points.iter().all(|p| p.within_bound != Some(false)),
        priced_points: priced.len(),
        points,
        p_str_fit,
        per_d_exponent,
        qpt_fit,
        weak_max,
        weak_by_d,
    })
}

fn qpt_x(d: usize, epsilon: f64) -> f64 {
    (1.0 + (d as f64).ln()) * (1.0 - epsilon.ln())
}

fn exponent_fit(points: &[ComplexityPoint], d: usize) -> Option<ExponentFit> {
    let mut at_d: Vec<&ComplexityPoint> = points
        .iter()
        .filter(|p| p.d == d && p.ln_comp.is_some())
        .collect();
    at_d.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    at_d.dedup_by(|a, b| a.epsilon == b.epsilon);
    at_d.truncate(3);
    let xs: Vec<f64> = at_d.iter().map(|p| -p.epsilon.ln()).collect();
    let ys: Vec<f64> = at_d.iter().map(|p| p.ln_comp.unwrap()).collect();
    fit_line(&xs, &ys).map(|fit| ExponentFit {
        d,
        eps_used: at_d.iter().map(|p| p.epsilon).collect(),
        fit,
    })
}

fn optimal_point(
    s: &Spectrum,
    c_const: f64,
    cost: &CostModel,
    epsilon: f64,
    d: usize,
    tau: f64,
    l: f64,
) -> Result<ComplexityPoint> {
    let eps_scaled = epsilon / c_const.sqrt();
    let m2 = crate::truncation::m2(eps_scaled, d, s.c0sq(), 1.0)?;
    let ln_bound =
        cost.ln_cost(m2) + l * (d as f64).powf(1.0 - tau) - 2.0 * tau * eps_scaled.ln();
    let mut point = ComplexityPoint {
        epsilon,
        d,
        comp: None,
        ln_comp: None,
        bound: ln_bound.exp(),
        ln_bound,
        within_bound: None,
        n: None,
        max_act: None,
        note: None,
    };
    match optimal_algorithm(epsilon, d, s, c_const) {
        Ok(summary) => {
            let mut acc = LogSum::new();
            for e in &summary.labels {
                acc.add_ln(e.multiplicity.ln() + cost.ln_cost(e.cardinality()));
            }
            let ln_comp = acc.ln_value();
            point.comp = Some(ln_comp.exp());
            point.ln_comp = Some(ln_comp);
            point.within_bound = Some(ln_comp <= ln_bound + 1e-11);
            point.n = Some(summary.n);
            point.max_act = Some(summary.max_act);
        }
        Err(e @ Error::CertificationExceeded { .. }) => point.note = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(point)
}

fn cda_point(
    s: &Spectrum,
    cost: &CostModel,
    epsilon: f64,
    d: usize,
    tau: f64,
) -> Result<ComplexityPoint> {
    let plan = cda::plan(epsilon, d, s, Some(tau))?;
    let price = cda::price(&plan, cost)?;
    Ok(ComplexityPoint {
        epsilon,
        d,
        comp: Some(price.exact),
        ln_comp: Some(price.ln_exact),
        bound: price.bound,
        ln_bound: price.ln_bound,
        within_bound: Some(price.within_bound),
        n: Some(plan.functional_count()),
        max_act: Some(plan.max_act()),
        note: None,
    })
}

/// Evidence for one tractability notion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractabilityLabel {
    pub ok: bool,
    /// The statistic the decision was based on.
    pub statistic: f64,
    pub detail: String,
}

/// Empirical labels. A `false` means "not supported by this grid", never a
/// proof of intractability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub strong_poly: TractabilityLabel,
    pub quasi_poly: TractabilityLabel,
    pub weak: TractabilityLabel,
    pub qpt_residual_rms: Option<f64>,
    pub p_str_residual_rms: Option<f64>,
}

/// Tolerated growth of a normalised statistic from the lower to the upper half of the grid.
pub const GROWTH_TOLERANCE: f64 = 1.25;

pub fn tractability_classify(report: &ComplexityReport) -> Result<Classification> {
    let priced: Vec<&ComplexityPoint> = report.points.iter().filter(|p| p.ln_comp.is_some()).collect();
    let mut eps: Vec<f64> = priced.iter().map(|p| p.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut ds: Vec<usize> = priced.iter().map(|p| p.d).collect();
    ds.sort_unstable();
    ds.dedup();
    if eps.len() < 4 || ds.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 epsilon and 4 d values with priced points, have {} and {}",
            eps.len(),
            ds.len()
        )));
    }
    let d_max = *ds.last().unwrap();

    // Strong: for every ε the supremum over d is reached before the largest d.
    let mut saturated = true;
    let mut sup_xs = Vec::new();
    let mut sup_ys = Vec::new();
    for e in &eps {
        let row: Vec<&&ComplexityPoint> = priced.iter().filter(|p| p.epsilon == *e).collect();
        let best = row
            .iter()
            .map(|p| p.ln_comp.unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let at_max = row
            .iter()
            .find(|p| p.d == d_max)
            .map(|p| p.ln_comp.unwrap());
        let first_arg = row
            .iter()
            .filter(|p| p.ln_comp.unwrap() == best)
            .map(|p| p.d)
            .min()
            .unwrap();
        if first_arg == d_max || at_max.is_none() {
            saturated = false;
        }
        sup_xs.push(-e.ln());
        sup_ys.push(best);
    }
    let sup_fit = fit_line(&sup_xs, &sup_ys);
    let sup_exponent = sup_fit.as_ref().map(|f| f.slope).unwrap_or(0.0);
    let strong_poly = TractabilityLabel {
        ok: saturated,
        statistic: sup_exponent,
        detail: format!(
            "sup over d of comp(eps, d) {} before d = {d_max}; fitted sup exponent {sup_exponent:.4}",
            if saturated { "is attained" } else { "is not attained" }
        ),
    };

    let halves = |stat: &dyn Fn(&ComplexityPoint) -> f64, key: &dyn Fn(&ComplexityPoint) -> f64| {
        let mut v: Vec<(f64, f64)> = priced.iter().map(|p| (key(p), stat(p))).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mid = v.len() / 2;
        let lower = v[..mid].iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let upper = v[mid..].iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        (lower, upper)
    };
    let growth_ok = |lower: f64, upper: f64| upper <= GROWTH_TOLERANCE * lower.max(0.0) + 1e-12;

    let q_stat = |p: &ComplexityPoint| p.ln_comp.unwrap() / qpt_x(p.d, p.epsilon);
    let q_key = |p: &ComplexityPoint| qpt_x(p.d, p.epsilon);
    let (ql, qu) = halves(&q_stat, &q_key);
    let quasi_poly = TractabilityLabel {
        ok: growth_ok(ql, qu),
        statistic: if ql > 0.0 { qu / ql } else { 0.0 },
        detail: format!("max ln comp/((1+ln d)(1+ln 1/eps)): lower half {ql:.4e}, upper half {qu:.4e}"),
    };

    let w_stat = |p: &ComplexityPoint| p.ln_comp.unwrap() / (p.d as f64 + 1.0 / p.epsilon);
    let w_key = |p: &ComplexityPoint| p.d as f64 + 1.0 / p.epsilon;
    let (wl, wu) = halves(&w_stat, &w_key);
    let weak = TractabilityLabel {
        ok: growth_ok(wl, wu),
        statistic: if wl > 0.0 { wu / wl } else { 0.0 },
        detail: format!("max ln comp/(d + 1/eps): lower half {wl:.4e}, upper half {wu:.4e}"),
    };

    Ok(Classification {
        strong_poly,
        quasi_poly,
        weak,
        qpt_residual_rms: report.qpt_fit.as_ref().map(|q| q.fit.rms_residual),
        p_str_residual_rms: report.p_str_fit.as_ref().map(|p| p.fit.rms_residual),
    })
}
