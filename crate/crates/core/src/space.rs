//! The weighted space `H_d` with weights `γ_{d,u} = d^{-|u|}` and
//! ANOVA-decomposed functions stored in the tensor eigenbasis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, NeumaierSum};
use crate::spectrum::{KernelKind, Spectrum};

/// Default bound on the univariate index of a stored coefficient.
pub const DEFAULT_MAX_INDEX: u32 = 64;

/// A subset `u ⊆ [1..d]`, stored as strictly increasing 1-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetIndex {
    coords: Vec<usize>,
    d: usize,
}

impl SubsetIndex {
    pub fn new(mut coords: Vec<usize>, d: usize) -> Result<Self> {
        coords.sort_unstable();
        if coords.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "subset {coords:?} repeats a coordinate"
            )));
        }
        if let Some(c) = coords.iter().find(|c| **c == 0 || **c > d) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {c} outside [1..{d}]"
            )));
        }
        Ok(Self { coords, d })
    }

    pub fn empty(d: usize) -> Self {
        Self { coords: Vec::new(), d }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// `γ_{d,u} = d^{-|u|}`.
pub fn weight(d: usize, u: &SubsetIndex) -> f64 {
    weight_of_cardinality(d, u.len())
}

pub fn weight_of_cardinality(d: usize, cardinality: usize) -> f64 {
    ln_weight(d, cardinality).exp()
}

/// `ln γ_{d,u}` for `|u| = cardinality`.
pub fn ln_weight(d: usize, cardinality: usize) -> f64 {
    if cardinality == 0 {
        0.0
    } else {
        -(cardinality as f64) * (d as f64).ln()
    }
}

/// `(1 + C_0^2/d)^{d/2}`, the product bound on `‖S_d‖`.
pub fn embedding_norm_bound(d: usize, c0sq: f64) -> f64 {
    let d = d as f64;
    (0.5 * d * (c0sq / d).ln_1p()).exp()
}

/// `max_{0≤k≤d} (C_0^2/d)^{k/2}`, the exact norm when the `G`-norm is orthogonal.
pub fn embedding_norm_special(d: usize, c0sq: f64) -> f64 {
    let ratio = c0sq / d as f64;
    if ratio <= 1.0 {
        1.0
    } else {
        (0.5 * d as f64 * ratio.ln()).exp()
    }
}

type Coefficients = BTreeMap<Vec<u32>, f64>;

/// `f = Σ_u f_u` with `f_u = Σ_k c_{u,k} ζ_{u,k}` and `ζ_{u,k} = ∏_{j∈u} ζ_{1,k_j}(x_j)`
/// orthonormal in `H_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaFunction {
    d: usize,
    constant: f64,
    terms: BTreeMap<SubsetIndex, Coefficients>,
    max_index: u32,
}

impl AnovaFunction {
    pub fn zero(d: usize) -> Self {
        Self {
            d,
            constant: 0.0,
            terms: BTreeMap::new(),
            max_index: DEFAULT_MAX_INDEX,
        }
    }

    pub fn constant_function(d: usize, value: f64) -> Self {
        let mut f = Self::zero(d);
        f.constant = value;
        f
    }

    pub fn with_max_index(mut self, max_index: u32) -> Self {
        self.max_index = max_index;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn max_index(&self) -> u32 {
        self.max_index
    }

    pub fn set_constant(&mut self, value: f64) {
        self.constant = value;
    }

    /// Adds `c` to the coefficient of `ζ_{u,k}`. An empty `u` targets the constant.
    pub fn add_term(&mut self, u: &SubsetIndex, k: &[u32], c: f64) -> Result<()> {
        if u.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: u.d(),
            });
        }
        if k.len() != u.len() {
            return Err(Error::InvalidArgument(format!(
                "multi-index {k:?} has length {}, subset has {} coordinates",
                k.len(),
                u.len()
            )));
        }
        if let Some(bad) = k.iter().find(|i| **i == 0 || **i > self.max_index) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} outside [1..{}]",
                self.max_index
            )));
        }
        if !c.is_finite() {
            return Err(Error::InvalidArgument("coefficient must be finite".into()));
        }
        if u.is_empty() {
            self.constant += c;
            return Ok(());
        }
        *self
            .terms
            .entry(u.clone())
            .or_default()
            .entry(k.to_vec())
            .or_insert(0.0) += c;
        Ok(())
    }

    /// Convenience wrapper taking raw coordinates.
    pub fn add(&mut self, coords: &[usize], k: &[u32], c: f64) -> Result<()> {
        let u = SubsetIndex::new(coords.to_vec(), self.d)?;
        self.add_term(&u, k, c)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SubsetIndex, &BTreeMap<Vec<u32>, f64>)> {
        self.terms.iter()
    }

    pub fn subsets(&self) -> impl Iterator<Item = &SubsetIndex> {
        self.terms.keys()
    }

    pub fn coefficients(&self, u: &SubsetIndex) -> Option<&BTreeMap<Vec<u32>, f64>> {
        self.terms.get(u)
    }

    pub fn coefficient_count(&self) -> usize {
        self.terms.values().map(BTreeMap::len).sum()
    }

    pub fn max_cardinality(&self) -> usize {
        self.terms.keys().map(SubsetIndex::len).max().unwrap_or(0)
    }

    /// The ANOVA term `f_u` as a function on its own.
    pub fn restrict(&self, u: &SubsetIndex) -> AnovaFunction {
        let mut out = AnovaFunction::zero(self.d).with_max_index(self.max_index);
        if u.is_empty() {
            out.constant = self.constant;
        } else if let Some(c) = self.terms.get(u) {
            out.terms.insert(u.clone(), c.clone());
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.constant *= factor;
        for coeffs in self.terms.values_mut() {
            for c in coeffs.values_mut() {
                *c *= factor;
            }
        }
    }

    /// `self − other`.
    pub fn sub(&self, other: &AnovaFunction) -> Result<AnovaFunction> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        let mut out = self.clone();
        out.max_index = self.max_index.max(other.max_index);
        out.constant -= other.constant;
        for (u, coeffs) in &other.terms {
            let entry = out.terms.entry(u.clone()).or_default();
            for (k, c) in coeffs {
                *entry.entry(k.clone()).or_insert(0.0) -= c;
            }
        }
        Ok(out)
    }

    /// Removes coefficients that are exactly zero and empty subsets.
    pub fn prune(&mut self) {
        for coeffs in self.terms.values_mut() {
            coeffs.retain(|_, c| *c != 0.0);
        }
        self.terms.retain(|_, c| !c.is_empty());
    }

    pub(crate) fn insert_block(&mut self, u: SubsetIndex, coeffs: Coefficients) {
        if !coeffs.is_empty() {
            self.terms.insert(u, coeffs);
        }
    }

    /// `‖f‖²_{H_d} = constant² + Σ_u d^{|u|} Σ_k c_{u,k}²`.
    pub fn h_norm_sq(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        acc.add(self.constant * self.constant);
        for (u, coeffs) in &self.terms {
            let s = compensated_sum(coeffs.values().map(|c| c * c));
            if s > 0.0 {
                acc.add((s.ln() - ln_weight(self.d, u.len())).exp());
            }
        }
        acc.value()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    /// Pointwise value at `x ∈ [0,1]^d`.
    pub fn eval(&self, s: &Spectrum, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        let mut cache: BTreeMap<(usize, u32), f64> = BTreeMap::new();
        let mut acc = NeumaierSum::new();
        acc.add(self.constant);
        for (u, coeffs) in &self.terms {
            for (k, c) in coeffs {
                let mut prod = *c;
                for (coord, idx) in u.coords().iter().zip(k) {
                    let v = match cache.get(&(*coord, *idx)) {
                        Some(v) => *v,
                        None => {
                            let v = s.eval_eigenfunction(*idx as usize, x[coord - 1])?;
                            cache.insert((*coord, *idx), v);
                            v
                        }
                    };
                    prod *= v;
                }
                acc.add(prod);
            }
        }
        Ok(acc.value())
    }

    pub fn to_doc(&self) -> AnovaDoc {
        AnovaDoc {
            d: self.d,
            constant: self.constant,
            max_index: Some(self.max_index),
            terms: self
                .terms
                .iter()
                .map(|(u, coeffs)| TermDoc {
                    u: u.coords().to_vec(),
                    coeffs: coeffs
                        .iter()
                        .map(|(k, c)| CoeffDoc { k: k.clone(), c: *c })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &AnovaDoc) -> Result<Self> {
        let mut f = AnovaFunction::constant_function(doc.d, doc.constant)
            .with_max_index(doc.max_index.unwrap_or(DEFAULT_MAX_INDEX));
        for term in &doc.terms {
            let u = SubsetIndex::new(term.u.clone(), doc.d)?;
            if u.is_empty() {
                return Err(Error::InvalidArgument(
                    "the empty subset belongs in the constant field".into(),
                ));
            }
            for coeff in &term.coeffs {
                f.add_term(&u, &coeff.k, coeff.c)?;
            }
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("function document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AnovaDoc = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("malformed function document: {e}")))?;
        Self::from_doc(&doc)
    }
}

/// JSON form `{d, constant, terms: [{u, coeffs: [{k, c}]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDoc {
    pub d: usize,
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_index: Option<u32>,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub u: Vec<usize>,
    pub coeffs: Vec<CoeffDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffDoc {
    pub k: Vec<u32>,
    pub c: f64,
}

/// `∏_j λ_{1,k_j}` for a multi-index.
pub fn eigen_product(s: &Spectrum, k: &[u32]) -> Result<f64> {
    let mut p = 1.0;
    for idx in k {
        let l = s.eigenvalue(*idx as usize).ok_or_else(|| {
            Error::InvalidArgument(format!("index {idx} beyond the spectrum"))
        })?;
        p *= l;
    }
    Ok(p)
}

/// `‖f_u‖²_G = Σ_k c_{u,k}² ∏ λ_{1,k_j}`; the eigenfunctions of a subset are
/// `G`-orthogonal for every kernel.
pub fn subset_g_norm_sq(s: &Spectrum, coeffs: &BTreeMap<Vec<u32>, f64>) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for (k, c) in coeffs {
        acc.add(c * c * eigen_product(s, k)?);
    }
    Ok(acc.value())
}

/// `G`-norm of a function together with its per-subset parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GNorm {
    pub constant: f64,
    pub per_subset: Vec<(Vec<usize>, f64)>,
    pub total: f64,
    /// True when `total` is a triangle-inequality upper bound.
    pub is_bound: bool,
}

/// `‖f‖_{G_d}`. With `orthogonal` the terms add in squares; otherwise the
/// per-subset norms are exact and the total is their sum.
pub fn g_norm_exact(f: &AnovaFunction, s: &Spectrum, orthogonal: bool) -> Result<GNorm> {
    if orthogonal && !s.is_orthogonal() {
        return Err(Error::InvalidConfiguration(
            "the G-norm of this kernel does not decompose orthogonally".into(),
        ));
    }
    let mut per_subset = Vec::with_capacity(f.terms.len());
    for (u, coeffs) in &f.terms {
        per_subset.push((u.coords().to_vec(), subset_g_norm_sq(s, coeffs)?.sqrt()));
    }
    let total = if orthogonal {
        let sq = compensated_sum(
            std::iter::once(f.constant * f.constant).chain(per_subset.iter().map(|(_, n)| n * n)),
        );
        sq.sqrt()
    } else {
        compensated_sum(std::iter::once(f.constant.abs()).chain(per_subset.iter().map(|(_, n)| *n)))
    };
    Ok(GNorm {
        constant: f.constant.abs(),
        per_subset,
        total,
        is_bound: !orthogonal,
    })
}

/// Mean `∫ ζ_{1,n} ρ` of a univariate eigenfunction.
pub fn eigenfunction_mean(s: &Spectrum, n: u32) -> Result<f64> {
    match s.kind() {
        KernelKind::Wiener => Ok(2f64.sqrt() * s.eigenvalue(n as usize).unwrap_or(0.0)),
        KernelKind::Korobov { .. } => Ok(0.0),
        KernelKind::Custom { orthogonal: true, .. } => Ok(0.0),
        KernelKind::Custom { .. } => Err(Error::UnsupportedOperation(
            "eigenfunction means unknown for a non-orthogonal custom spectrum".into(),
        )),
    }
}

type Block = (Vec<usize>, Vec<(Vec<u32>, f64)>);

/// Exact `‖f‖_{L2([0,1]^d)}` including cross terms between subsets, from the
/// univariate eigenfunction means.
pub fn l2_norm_exact(f: &AnovaFunction, s: &Spectrum) -> Result<f64> {
    let g = |a: u32, b: u32| -> f64 {
        if a == b {
            s.eigenvalue(a as usize).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    // Blocks: (coords, [(k, c)]) with the constant as an empty block.
    let mut blocks: Vec<Block> =
        vec![(Vec::new(), vec![(Vec::new(), f.constant)])];
    for (u, coeffs) in &f.terms {
        blocks.push((
            u.coords().to_vec(),
            coeffs.iter().map(|(k, c)| (k.clone(), *c)).collect(),
        ));
    }
    let mut acc = NeumaierSum::new();
    for (u, cu) in &blocks {
        for (v, cv) in &blocks {
            for (ku, a) in cu {
                for (kv, b) in cv {
                    let mut prod = a * b;
                    let (mut i, mut j) = (0, 0);
                    while prod != 0.0 && (i < u.len() || j < v.len()) {
                        if j == v.len() || (i < u.len() && u[i] < v[j]) {
                            prod *= eigenfunction_mean(s, ku[i])?;
                            i += 1;
                        } else if i == u.len() || v[j] < u[i] {
                            prod *= eigenfunction_mean(s, kv[j])?;
                            j += 1;
                        } else {
                            prod *= g(ku[i], kv[j]);
                            i += 1;
                            j += 1;
                        }
                    }
                    acc.add(prod);
                }
            }
        }
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// A linear functional described by the subsets on which its generator lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Functional {
    components: BTreeSet<SubsetIndex>,
    active: usize,
}

impl Functional {
    pub fn new<I: IntoIterator<Item = SubsetIndex>>(components: I) -> Self {
        let components: BTreeSet<SubsetIndex> = components.into_iter().collect();
        let union: BTreeSet<usize> = components
            .iter()
            .flat_map(|u| u.coords().iter().copied())
            .collect();
        Self {
            active: union.len(),
            components,
        }
    }

    pub fn components(&self) -> &BTreeSet<SubsetIndex> {
        &self.components
    }

    pub fn act(&self) -> usize {
        self.active
    }
}

/// Number of active variables of `L`.
pub fn act(l: &Functional) -> usize {
    l.act()
}
