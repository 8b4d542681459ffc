//! Univariate kernels and the eigen-decomposition of `W_1 = S_1^* S_1`.
//!
//! Analytic spectra (Wiener, Korobov) expose `λ_{1,n}` for every `n`; only
//! the first `N` values are materialised and every derived power sum carries
//! an analytic tail computed from the Hurwitz zeta function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, hurwitz_zeta, NeumaierSum};

/// Default number of retained eigenvalues for infinite spectra.
pub const DEFAULT_TRUNCATION: usize = 10_000;

/// The univariate kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `K(x, y) = min(x, y)` on `[0, 1]`.
    Wiener,
    /// `K(x, y) = Σ_{k≠0} e^{2πik(x−y)} / |2πk|^{2r}` on `[0, 1]`.
    Korobov { r: f64 },
    /// A user supplied nonincreasing eigenvalue list. `orthogonal` records
    /// whether the target norm satisfies `⟨1, f⟩_{G_1} = 0`.
    Custom {
        eigenvalues: Vec<f64>,
        #[serde(default = "default_true")]
        orthogonal: bool,
    },
}

fn default_true() -> bool {
    true
}

/// Probability density on the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Density {
    Uniform,
    /// Piecewise constant density with `values.len() + 1` breakpoints.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl Density {
    /// Total mass over its support.
    pub fn mass(&self, domain: (f64, f64)) -> Result<f64> {
        match self {
            Density::Uniform => Ok(1.0),
            Density::Piecewise { breaks, values } => {
                if breaks.len() != values.len() + 1 || values.is_empty() {
                    return Err(Error::InvalidArgument(
                        "piecewise density needs values.len() + 1 breakpoints".into(),
                    ));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument(
                        "density breakpoints must be strictly increasing".into(),
                    ));
                }
                if breaks[0] < domain.0 || breaks[breaks.len() - 1] > domain.1 {
                    return Err(Error::InvalidArgument(
                        "density support exceeds the domain".into(),
                    ));
                }
                if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "density values must be finite and nonnegative".into(),
                    ));
                }
                Ok(compensated_sum(
                    breaks.windows(2).zip(values).map(|(w, v)| (w[1] - w[0]) * v),
                ))
            }
        }
    }
}

/// Kernel, domain and density of the univariate space `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub domain: (f64, f64),
    pub density: Density,
}

impl KernelSpec {
    pub fn wiener() -> Self {
        Self {
            kind: KernelKind::Wiener,
            domain: (0.0, 1.0),
            density: Density::Uniform,
        }
    }

    pub fn korobov(r: f64) -> Self {
        Self {
            kind: KernelKind::Korobov { r },
            domain: (0.0, 1.0),
            density: Density::Uniform,
        }
    }

    pub fn custom(eigenvalues: Vec<f64>) -> Self {
        Self {
            kind: KernelKind::Custom {
                eigenvalues,
                orthogonal: true,
            },
            domain: (0.0, 1.0),
            density: Density::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mass = self.density.mass(self.domain)?;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        match &self.kind {
            KernelKind::Wiener | KernelKind::Korobov { .. } => {
                if self.domain != (0.0, 1.0) || self.density != Density::Uniform {
                    return Err(Error::InvalidConfiguration(
                        "analytic spectra require D = [0,1] with the uniform density".into(),
                    ));
                }
                if let KernelKind::Korobov { r } = self.kind {
                    if !(r.is_finite() && r > 0.5) {
                        return Err(Error::InvalidArgument(format!(
                            "korobov smoothness must satisfy r > 1/2, got {r}"
                        )));
                    }
                }
                Ok(())
            }
            KernelKind::Custom { eigenvalues, .. } => validate_custom(eigenvalues),
        }
    }

    /// Pointwise kernel value `K(x, y)`.
    ///
    /// Korobov kernels are evaluated through the Bernoulli-polynomial closed
    /// form, which exists for integer smoothness only.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        for p in [x, y] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("point {p} outside [0,1]")));
            }
        }
        match self.kind {
            KernelKind::Wiener => Ok(x.min(y)),
            KernelKind::Korobov { r } if r.fract() == 0.0 && r <= 8.0 => {
                let r = r as usize;
                let h = (x - y).rem_euclid(1.0);
                let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
                Ok(sign * bernoulli_polynomial(2 * r, h) / factorial(2 * r))
            }
            KernelKind::Korobov { .. } => Err(Error::UnsupportedOperation(
                "pointwise korobov kernel needs integer smoothness".into(),
            )),
            KernelKind::Custom { .. } => Err(Error::UnsupportedOperation(
                "custom spectra carry no kernel".into(),
            )),
        }
    }
}

fn validate_custom(eigenvalues: &[f64]) -> Result<()> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidSpectrum("empty eigenvalue list".into()));
    }
    if let Some(v) = eigenvalues.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidSpectrum(format!(
            "eigenvalues must be finite and positive, found {v}"
        )));
    }
    if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidSpectrum(format!(
            "eigenvalues must be nonincreasing: λ[{}] = {} < λ[{}] = {}",
            i + 1,
            eigenvalues[i],
            i + 2,
            eigenvalues[i + 1]
        )));
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn bernoulli_numbers(n: usize) -> Vec<f64> {
    // Akiyama–Tanigawa; exact enough in f64 for n ≤ 16.
    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    for m in 0..=n {
        a[m] = 1.0 / (m as f64 + 1.0);
        for j in (1..=m).rev() {
            a[j - 1] = j as f64 * (a[j - 1] - a[j]);
        }
        b[m] = a[0];
    }
    // Akiyama–Tanigawa yields B_1 = +1/2.
    if n >= 1 {
        b[1] = -0.5;
    }
    b
}

fn bernoulli_polynomial(n: usize, x: f64) -> f64 {
    let b = bernoulli_numbers(n);
    let mut binom = 1.0;
    let mut acc = 0.0;
    for (k, bk) in b.iter().enumerate() {
        acc += binom * bk * x.powi((n - k) as i32);
        binom = binom * (n - k) as f64 / (k as f64 + 1.0);
    }
    acc
}

/// How `C_0^2` is reported for the Wiener kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum C0sqMode {
    /// `C_0^2 = λ_{1,1}`.
    #[default]
    Exact,
    /// The Cauchy–Schwarz value `C_0^2 = 1/2` used for the published table.
    PaperBound,
}

/// Eigenvalues `λ_{1,1} ≥ λ_{1,2} ≥ … > 0` of `W_1` with derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    kind: KernelKind,
    eigenvalues: Vec<f64>,
    tail_bound: f64,
    alpha: f64,
    c0sq: f64,
    c0sq_mode: C0sqMode,
}

/// Build a spectrum retaining `n` eigenvalues.
pub fn build_spectrum(spec: &KernelSpec, n: usize, mode: C0sqMode) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "truncation length must be at least 1".into(),
        ));
    }
    spec.validate()?;
    if mode == C0sqMode::PaperBound && spec.kind != KernelKind::Wiener {
        return Err(Error::InvalidArgument(
            "paper_bound C0^2 mode is defined for the Wiener kernel only".into(),
        ));
    }
    let (kind, eigenvalues, alpha) = match &spec.kind {
        KernelKind::Custom {
            eigenvalues,
            orthogonal,
        } => {
            let keep = n.min(eigenvalues.len());
            (
                KernelKind::Custom {
                    eigenvalues: eigenvalues[..keep].to_vec(),
                    orthogonal: *orthogonal,
                },
                eigenvalues[..keep].to_vec(),
                f64::INFINITY,
            )
        }
        analytic => {
            let values = (1..=n).map(|i| analytic_eigenvalue(analytic, i)).collect();
            let alpha = match analytic {
                KernelKind::Wiener => 2.0,
                KernelKind::Korobov { r } => 2.0 * r,
                KernelKind::Custom { .. } => unreachable!(),
            };
            (analytic.clone(), values, alpha)
        }
    };
    let tail_bound = match &spec.kind {
        KernelKind::Custom { eigenvalues: all, .. } => {
            compensated_sum(all[eigenvalues.len()..].iter().copied())
        }
        _ => analytic_tail(&kind, eigenvalues.len(), 1.0),
    };
    let c0sq = match mode {
        C0sqMode::Exact => eigenvalues[0],
        C0sqMode::PaperBound => 0.5,
    };
    Ok(Spectrum {
        kind,
        eigenvalues,
        tail_bound,
        alpha,
        c0sq,
        c0sq_mode: mode,
    })
}

fn analytic_eigenvalue(kind: &KernelKind, n: usize) -> f64 {
    let n = n as f64;
    match *kind {
        KernelKind::Wiener => {
            let t = PI * (n - 0.5);
            1.0 / (t * t)
        }
        KernelKind::Korobov { r } => {
            let level = (n / 2.0).ceil();
            (2.0 * PI * level).powf(-2.0 * r)
        }
        KernelKind::Custom { .. } => unreachable!("custom spectra are not analytic"),
    }
}

/// `Σ_{n > retained} λ_{1,n}^τ` in closed form.
fn analytic_tail(kind: &KernelKind, retained: usize, tau: f64) -> f64 {
    match *kind {
        KernelKind::Wiener => PI.powf(-2.0 * tau) * hurwitz_zeta(2.0 * tau, retained as f64 + 0.5),
        KernelKind::Korobov { r } => {
            let s = 2.0 * r * tau;
            let scale = (2.0 * PI).powf(-s);
            let full_levels = retained / 2;
            if retained.is_multiple_of(2) {
                2.0 * scale * hurwitz_zeta(s, full_levels as f64 + 1.0)
            } else {
                // sine branch of level full_levels + 1 is still outstanding
                let lone = (2.0 * PI * (full_levels as f64 + 1.0)).powf(-s);
                lone + 2.0 * scale * hurwitz_zeta(s, full_levels as f64 + 2.0)
            }
        }
        KernelKind::Custom { .. } => 0.0,
    }
}

impl Spectrum {
    /// Spectrum of a finite custom list with `C_0^2 = λ_{1,1}`.
    pub fn custom(eigenvalues: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len().max(1);
        build_spectrum(&KernelSpec::custom(eigenvalues), n, C0sqMode::Exact)
    }

    pub fn wiener(n: usize, mode: C0sqMode) -> Result<Self> {
        build_spectrum(&KernelSpec::wiener(), n, mode)
    }

    pub fn korobov(r: f64, n: usize) -> Result<Self> {
        build_spectrum(&KernelSpec::korobov(r), n, C0sqMode::Exact)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// Number of retained eigenvalues `N`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_{1,n}` for 1-based `n`. Analytic spectra answer for every `n`;
    /// custom spectra return `None` past their end.
    pub fn eigenvalue(&self, n: usize) -> Option<f64> {
        if n == 0 {
            return None;
        }
        if n <= self.eigenvalues.len() {
            return Some(self.eigenvalues[n - 1]);
        }
        match self.kind {
            KernelKind::Custom { .. } => None,
            ref analytic => Some(analytic_eigenvalue(analytic, n)),
        }
    }

    pub fn lambda11(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn c0sq(&self) -> f64 {
        self.c0sq
    }

    pub fn c0sq_mode(&self) -> C0sqMode {
        self.c0sq_mode
    }

    /// Polynomial decay of the eigenvalues; infinite for finite lists.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Bound on `Σ_{n > N} λ_{1,n}`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// True when the custom list is the complete spectrum.
    pub fn is_finite(&self) -> bool {
        matches!(self.kind, KernelKind::Custom { .. })
    }

    /// Whether the `G`-norm decomposes orthogonally over ANOVA terms.
    pub fn is_orthogonal(&self) -> bool {
        match self.kind {
            KernelKind::Wiener => false,
            KernelKind::Korobov { .. } => true,
            KernelKind::Custom { orthogonal, .. } => orthogonal,
        }
    }

    /// Smallest admissible `τ` is anything above this value.
    pub fn tau_threshold(&self) -> f64 {
        1.0 / self.alpha
    }

    /// `max(1, 1/α) + 0.1`.
    pub fn default_tau(&self) -> f64 {
        self.tau_threshold().max(1.0) + 0.1
    }

    pub fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if !self.is_finite() && tau <= self.tau_threshold() {
            return Err(Error::Divergence {
                tau,
                threshold: self.tau_threshold(),
            });
        }
        Ok(())
    }

    /// `L(τ) = Σ_n λ_{1,n}^τ`, including the analytic tail past `N`.
    pub fn l_tau(&self, tau: f64) -> Result<f64> {
        self.check_tau(tau)?;
        let mut sum: NeumaierSum = self.eigenvalues.iter().map(|l| l.powf(tau)).collect();
        if !self.is_finite() {
            sum.add(analytic_tail(&self.kind, self.eigenvalues.len(), tau));
        }
        Ok(sum.value())
    }

    /// `Σ_{n > N} λ_{1,n}^τ`.
    pub fn tail_tau(&self, tau: f64) -> Result<f64> {
        self.check_tau(tau)?;
        Ok(analytic_tail(&self.kind, self.eigenvalues.len(), tau))
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(Error::InvalidArgument(format!("point {x} outside [0,1]")));
        }
        Ok(())
    }

    /// `ζ_{1,n}(x)`, normalised to unit `H`-norm.
    pub fn eval_eigenfunction(&self, n: usize, x: f64) -> Result<f64> {
        self.check_point(x)?;
        let lambda = self.index_value(n)?;
        let amp = (2.0 * lambda).sqrt();
        match self.kind {
            KernelKind::Wiener => Ok(amp * (PI * (n as f64 - 0.5) * x).sin()),
            KernelKind::Korobov { .. } => {
                let level = n.div_ceil(2) as f64;
                let arg = 2.0 * PI * level * x;
                Ok(if n % 2 == 1 { amp * arg.cos() } else { amp * arg.sin() })
            }
            KernelKind::Custom { .. } => unreachable!(),
        }
    }

    /// `ζ'_{1,n}(x)`.
    pub fn eval_eigenfunction_derivative(&self, n: usize, x: f64) -> Result<f64> {
        self.check_point(x)?;
        let lambda = self.index_value(n)?;
        let amp = (2.0 * lambda).sqrt();
        match self.kind {
            KernelKind::Wiener => {
                let w = PI * (n as f64 - 0.5);
                Ok(amp * w * (w * x).cos())
            }
            KernelKind::Korobov { .. } => {
                let w = 2.0 * PI * n.div_ceil(2) as f64;
                Ok(if n % 2 == 1 {
                    -amp * w * (w * x).sin()
                } else {
                    amp * w * (w * x).cos()
                })
            }
            KernelKind::Custom { .. } => unreachable!(),
        }
    }

    fn index_value(&self, n: usize) -> Result<f64> {
        if matches!(self.kind, KernelKind::Custom { .. }) {
            return Err(Error::UnsupportedOperation(
                "custom spectra carry no eigenfunctions".into(),
            ));
        }
        self.eigenvalue(n)
            .ok_or_else(|| Error::InvalidArgument("eigenfunction index starts at 1".into()))
    }

    pub fn to_doc(&self) -> SpectrumDoc {
        let (kind, params) = match &self.kind {
            KernelKind::Wiener => ("wiener", serde_json::json!({})),
            KernelKind::Korobov { r } => ("korobov", serde_json::json!({ "r": r })),
            KernelKind::Custom { orthogonal, .. } => {
                ("custom", serde_json::json!({ "orthogonal": orthogonal }))
            }
        };
        SpectrumDoc {
            kind: kind.to_string(),
            params,
            n: self.eigenvalues.len(),
            eigenvalues: self.eigenvalues.clone(),
            c0sq: self.c0sq,
            c0sq_mode: self.c0sq_mode,
            alpha: self.alpha.is_finite().then_some(self.alpha),
            tail_bound: self.tail_bound,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("spectrum document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpectrumDoc = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpectrum(format!("malformed spectrum document: {e}")))?;
        Spectrum::from_doc(&doc)
    }

    /// Rebuild from a document. Analytic documents are regenerated and
    /// checked against the stored eigenvalues.
    pub fn from_doc(doc: &SpectrumDoc) -> Result<Self> {
        let spec = match doc.kind.as_str() {
            "wiener" => KernelSpec::wiener(),
            "korobov" => {
                let r = doc
                    .params
                    .get("r")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| Error::InvalidSpectrum("korobov document lacks r".into()))?;
                KernelSpec::korobov(r)
            }
            "custom" => {
                let orthogonal = doc
                    .params
                    .get("orthogonal")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(true);
                KernelSpec {
                    kind: KernelKind::Custom {
                        eigenvalues: doc.eigenvalues.clone(),
                        orthogonal,
                    },
                    ..KernelSpec::wiener()
                }
            }
            other => return Err(Error::InvalidSpectrum(format!("unknown kind {other}"))),
        };
        let s = build_spectrum(&spec, doc.n, doc.c0sq_mode)?;
        let consistent = s.eigenvalues.len() == doc.eigenvalues.len()
            && s
                .eigenvalues
                .iter()
                .zip(&doc.eigenvalues)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs());
        if !consistent {
            return Err(Error::InvalidSpectrum(
                "stored eigenvalues disagree with the kernel kind".into(),
            ));
        }
        Ok(s)
    }
}

/// JSON form `{kind, params, N, eigenvalues[], c0sq, alpha, tail_bound}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(rename = "N")]
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub c0sq: f64,
    #[serde(default)]
    pub c0sq_mode: C0sqMode,
    pub alpha: Option<f64>,
    pub tail_bound: f64,
}
