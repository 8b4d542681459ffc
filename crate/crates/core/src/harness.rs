//! Test functions, Monte Carlo and quadrature cross-checks, and the `⌈M(ε)⌉` table.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre_unit, NeumaierSum};
use crate::space::{AnovaFunction, SubsetIndex};
use crate::spectrum::{build_spectrum, C0sqMode, KernelKind, KernelSpec, Spectrum, DEFAULT_TRUNCATION};
use crate::truncation::big_m;

pub const GOLDEN_TABLE: [i64; 10] = [3, 5, 7, 8, 10, 11, 13, 14, 15, 17];
pub const TABLE_C0SQ: f64 = 0.5;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const MAX_MC_DIMENSION: usize = 12;
pub const MAX_QUADRATURE_DIMENSION: usize = 6;
pub const DEFAULT_MEAN_TERMS: u32 = 256;

const RANDOM_COEFFS_PER_SUBSET: usize = 6;
const RANDOM_INDEX_RANGE: u32 = 12;
const MAX_QUADRATURE_NODES: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub relative: f64,
    pub sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative: 1e-10,
            sigma: 3.0,
        }
    }
}

/// Everything a run depends on. Two runs with equal configs produce identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub kernel: KernelSpec,
    pub c0sq_mode: C0sqMode,
    pub truncation: usize,
    pub eps_grid: Vec<f64>,
    pub d_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    pub cost: CostModel,
    pub seed: u64,
    pub format: OutputFormat,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn new(subcommand: impl Into<String>, kernel: KernelSpec) -> Self {
        Self {
            subcommand: subcommand.into(),
            kernel,
            c0sq_mode: C0sqMode::Exact,
            truncation: DEFAULT_TRUNCATION,
            eps_grid: vec![1e-1, 1e-2, 1e-3],
            d_grid: vec![1, 10, 100],
            tau_grid: vec![],
            cost: CostModel::Constant,
            seed: 0,
            format: OutputFormat::Csv,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.cost.validate()?;
        if self.eps_grid.is_empty() || self.d_grid.is_empty() {
            return Err(Error::InvalidConfiguration("epsilon and d grids must be nonempty".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::InvalidArgument(format!("epsilon {e} outside (0,1)")));
        }
        if self.d_grid.contains(&0) {
            return Err(Error::InvalidArgument("d must be positive".into()));
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        build_spectrum(&self.kernel, self.truncation, self.c0sq_mode)
    }

    /// A generator seeded from the config seed and a stream label.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        seeded_rng(self.seed, stream)
    }
}

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionKind {
    /// `(1/d) Σ_j x_j`, expanded in the Wiener eigenbasis up to `terms` per coordinate.
    Mean { terms: u32 },
    /// `value · ζ_{u,k}`; the empty subset gives the constant `value`.
    SingleSubset { u: Vec<usize>, k: Vec<u32>, value: f64 },
    /// Gaussian coefficients on `sparsity` uniformly drawn subsets of size at most `max_card`,
    /// rescaled to unit `H_d`-norm.
    Random { sparsity: usize, max_card: usize },
}

impl TestFunctionKind {
    pub fn mean() -> Self {
        TestFunctionKind::Mean {
            terms: DEFAULT_MEAN_TERMS,
        }
    }
}

pub fn make_test_function(
    kind: &TestFunctionKind,
    d: usize,
    s: &Spectrum,
    seed: u64,
) -> Result<AnovaFunction> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    match kind {
        TestFunctionKind::Mean { terms } => {
            if !matches!(s.kind(), KernelKind::Wiener) {
                return Err(Error::InvalidConfiguration(
                    "the mean function is expanded in the wiener eigenbasis only".into(),
                ));
            }
            if *terms == 0 {
                return Err(Error::InvalidArgument("mean expansion needs at least one term".into()));
            }
            let mut f = AnovaFunction::zero(d).with_max_index((*terms).max(1));
            let coeffs: Vec<f64> = (1..=*terms)
                .map(|n| {
                    let lambda = s.eigenvalue(n as usize).unwrap_or(0.0);
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    sign * (2.0 * lambda).sqrt() / d as f64
                })
                .collect();
            for j in 1..=d {
                for (n, c) in (1..=*terms).zip(&coeffs) {
                    f.add(&[j], &[n], *c)?;
                }
            }
            Ok(f)
        }
        TestFunctionKind::SingleSubset { u, k, value } => {
            if u.is_empty() {
                return Ok(AnovaFunction::constant_function(d, *value));
            }
            let max_index = k.iter().copied().max().unwrap_or(1);
            let mut f = AnovaFunction::zero(d).with_max_index(max_index.max(crate::space::DEFAULT_MAX_INDEX));
            f.add(u, k, *value)?;
            Ok(f)
        }
        TestFunctionKind::Random { sparsity, max_card } => {
            if *max_card == 0 || *sparsity == 0 {
                return Err(Error::InvalidArgument("random functions need sparsity and max_card >= 1".into()));
            }
            let index_range = match s.kind() {
                KernelKind::Custom { .. } => RANDOM_INDEX_RANGE.min(s.len() as u32),
                _ => RANDOM_INDEX_RANGE,
            };
            let mut rng = seeded_rng(seed, 1);
            let mut f = AnovaFunction::zero(d);
            f.set_constant(rng.sample(StandardNormal));
            let top = (*max_card).min(d);
            for _ in 0..*sparsity {
                let card = rng.random_range(1..=top);
                let mut coords: Vec<usize> = sample(&mut rng, d, card).into_iter().map(|j| j + 1).collect();
                coords.sort_unstable();
                let u = SubsetIndex::new(coords, d)?;
                for _ in 0..RANDOM_COEFFS_PER_SUBSET {
                    let k: Vec<u32> = (0..card).map(|_| rng.random_range(1..=index_range)).collect();
                    let c: f64 = rng.sample(StandardNormal);
                    f.add_term(&u, &k, c)?;
                }
            }
            let norm = f.h_norm();
            if norm > 0.0 {
                f.scale(1.0 / norm);
            }
            Ok(f)
        }
    }
}

/// Squared `H_d`-norm left out by the truncated mean function; independent of `d`
/// since each coordinate carries weight `d · d^{-2}`.
pub fn mean_function_tail_sq(d: usize, s: &Spectrum, terms: u32) -> Result<f64> {
    if !matches!(s.kind(), KernelKind::Wiener) {
        return Err(Error::InvalidConfiguration("mean function tail needs the wiener kernel".into()));
    }
    // Σ_{n>N} 2λ_n = 2 ζ(2, N+½)/π²
    let per_coord = 2.0 * crate::numeric::hurwitz_zeta(2.0, terms as f64 + 0.5)
        / (std::f64::consts::PI * std::f64::consts::PI);
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    Ok(per_coord)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub q: u32,
    pub epsilon: f64,
    pub big_m: f64,
    pub value: i64,
    pub golden: i64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub c0sq: f64,
    pub rows: Vec<TableRow>,
    pub all_match: bool,
}

impl TableReport {
    /// Lines `q: expected X, got Y` for each mismatching row.
    pub fn diff(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.matches)
            .map(|r| format!("q={}: expected {}, got {}", r.q, r.golden, r.value))
            .collect()
    }
}

/// `⌈M(10^{-q})⌉` for `q = 1..10` at `C0² = 1/2`, against the published row.
pub fn reproduce_table() -> Result<TableReport> {
    let mut rows = Vec::with_capacity(GOLDEN_TABLE.len());
    for (i, golden) in GOLDEN_TABLE.iter().enumerate() {
        let q = i as u32 + 1;
        let epsilon = 10f64.powi(-(q as i32));
        let m = big_m(epsilon, TABLE_C0SQ, true)?;
        let value = m.ceil() as i64;
        rows.push(TableRow {
            q,
            epsilon,
            big_m: big_m(epsilon, TABLE_C0SQ, false)?,
            value,
            golden: *golden,
            matches: value == *golden,
        });
    }
    let all_match = rows.iter().all(|r| r.matches);
    Ok(TableReport {
        c0sq: TABLE_C0SQ,
        rows,
        all_match,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (value - self.estimate).abs() <= k * self.std_error
    }
}

/// Flattened form of a function for repeated pointwise evaluation.
struct Compiled {
    constant: f64,
    slots: Vec<(usize, usize)>,
    terms: Vec<(f64, Vec<usize>)>,
}

impl Compiled {
    fn new(f: &AnovaFunction) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut slots = Vec::new();
        let mut terms = Vec::new();
        for (u, coeffs) in f.terms() {
            for (k, c) in coeffs {
                let ids = u
                    .coords()
                    .iter()
                    .zip(k)
                    .map(|(coord, n)| {
                        let key = (coord - 1, *n as usize);
                        *index.entry(key).or_insert_with(|| {
                            slots.push(key);
                            slots.len() - 1
                        })
                    })
                    .collect();
                terms.push((*c, ids));
            }
        }
        Self {
            constant: f.constant(),
            slots,
            terms,
        }
    }

    fn eval(&self, s: &Spectrum, x: &[f64], buf: &mut Vec<f64>) -> Result<f64> {
        buf.clear();
        for (coord, n) in &self.slots {
            buf.push(s.eval_eigenfunction(*n, x[*coord])?);
        }
        let mut acc = NeumaierSum::new();
        acc.add(self.constant);
        for (c, ids) in &self.terms {
            acc.add(ids.iter().fold(*c, |p, i| p * buf[*i]));
        }
        Ok(acc.value())
    }
}

fn check_pointwise(s: &Spectrum) -> Result<()> {
    match s.kind() {
        KernelKind::Wiener | KernelKind::Korobov { .. } => Ok(()),
        KernelKind::Custom { .. } => Err(Error::UnsupportedOperation(
            "custom spectra have no pointwise eigenfunctions".into(),
        )),
    }
}

/// Monte Carlo estimate of `‖f − approx‖_{L2([0,1]^d)}` from uniform points.
/// The standard error of the root is obtained by the delta method.
pub fn mc_l2_error(
    f: &AnovaFunction,
    approx: &AnovaFunction,
    s: &Spectrum,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_pointwise(s)?;
    let d = f.d();
    if d > MAX_MC_DIMENSION {
        return Err(Error::UnsupportedScale(format!(
            "monte carlo check limited to d <= {MAX_MC_DIMENSION}, got {d}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let mut g = f.sub(approx)?;
    g.prune();
    let g = Compiled::new(&g);
    let mut buf = Vec::new();
    let mut rng = seeded_rng(seed, 2);
    let mut x = vec![0.0; d];
    let mut sum = NeumaierSum::new();
    let mut sum_sq = NeumaierSum::new();
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.random::<f64>();
        }
        let v = g.eval(s, &x, &mut buf)?;
        let v2 = v * v;
        sum.add(v2);
        sum_sq.add(v2 * v2);
    }
    let n = samples as f64;
    let mean = sum.value() / n;
    let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    let estimate = mean.max(0.0).sqrt();
    let std_error = if estimate > 0.0 {
        (var / n).sqrt() / (2.0 * estimate)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate,
        std_error,
        samples,
    })
}

/// `‖f − approx‖_{L2}` by a tensor Gauss–Legendre rule with `points` nodes per axis.
pub fn quadrature_l2_error(
    f: &AnovaFunction,
    approx: &AnovaFunction,
    s: &Spectrum,
    points: usize,
) -> Result<f64> {
    check_pointwise(s)?;
    let d = f.d();
    if d > MAX_QUADRATURE_DIMENSION {
        return Err(Error::UnsupportedScale(format!(
            "tensor quadrature limited to d <= {MAX_QUADRATURE_DIMENSION}, got {d}"
        )));
    }
    let total = (points as f64).powi(d as i32);
    if points == 0 || total > MAX_QUADRATURE_NODES as f64 {
        return Err(Error::UnsupportedScale(format!("{points}^{d} quadrature nodes")));
    }
    let mut g = f.sub(approx)?;
    g.prune();
    let g = Compiled::new(&g);
    let mut buf = Vec::new();
    let (nodes, weights) = gauss_legendre_unit(points);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut acc = NeumaierSum::new();
    loop {
        let mut w = 1.0;
        for j in 0..d {
            x[j] = nodes[idx[j]];
            w *= weights[idx[j]];
        }
        let v = g.eval(s, &x, &mut buf)?;
        acc.add(w * v * v);
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] < points {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    Ok(acc.value().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cda;
    use crate::space::{g_norm_exact, l2_norm_exact};
    use approx::assert_relative_eq;

    fn wiener() -> Spectrum {
        Spectrum::wiener(DEFAULT_TRUNCATION, C0sqMode::Exact).unwrap()
    }

    #[test]
    fn table_matches_golden_row() {
        let t = reproduce_table().unwrap();
        assert!(t.all_match, "{:?}", t.diff());
        assert_eq!(t.rows[1].value, 5);
        assert_eq!(t.rows[4].value, 10);
        assert_eq!(t.rows[7].value, 14);
        let again = serde_json::to_string(&reproduce_table().unwrap()).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), again);
    }

    #[test]
    fn mean_function_has_unit_norm() {
        let s = wiener();
        for d in [1, 2, 7, 50] {
            let f = make_test_function(&TestFunctionKind::mean(), d, &s, 0).unwrap();
            let tail = mean_function_tail_sq(d, &s, DEFAULT_MEAN_TERMS).unwrap();
            assert_relative_eq!(f.h_norm_sq() + tail, 1.0, max_relative = 1e-12);
            assert!(tail < 1e-3);
        }
        let k = Spectrum::korobov(1.0, 100).unwrap();
        assert!(matches!(
            make_test_function(&TestFunctionKind::mean(), 2, &k, 0),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn mean_function_pointwise() {
        // x_1 and x_2 recovered up to the truncation error of the sine series
        let s = wiener();
        let f = make_test_function(&TestFunctionKind::Mean { terms: 4000 }, 2, &s, 0).unwrap();
        let v = f.eval(&s, &[0.3, 0.6]).unwrap();
        assert!((v - 0.45).abs() < 1e-3, "{v}");
    }

    #[test]
    fn single_subset_cases() {
        let s = Spectrum::korobov(1.0, 100).unwrap();
        let kind = TestFunctionKind::SingleSubset {
            u: vec![],
            k: vec![],
            value: 0.5,
        };
        let f = make_test_function(&kind, 3, &s, 0).unwrap();
        assert_eq!(f, AnovaFunction::constant_function(3, 0.5));
        let kind = TestFunctionKind::SingleSubset {
            u: vec![1, 3],
            k: vec![2, 5],
            value: 2.0,
        };
        let f = make_test_function(&kind, 3, &s, 0).unwrap();
        assert_relative_eq!(f.h_norm_sq(), 4.0 * 9.0);
    }

    #[test]
    fn random_is_deterministic_and_unit() {
        let s = Spectrum::korobov(1.0, 100).unwrap();
        let kind = TestFunctionKind::Random {
            sparsity: 5,
            max_card: 3,
        };
        let a = make_test_function(&kind, 10, &s, 42).unwrap();
        let b = make_test_function(&kind, 10, &s, 42).unwrap();
        let c = make_test_function(&kind, 10, &s, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_relative_eq!(a.h_norm(), 1.0, max_relative = 1e-12);
        assert!(a.max_cardinality() <= 3);
    }

    #[test]
    fn mc_of_identical_functions_is_zero() {
        let s = Spectrum::korobov(1.0, 100).unwrap();
        let kind = TestFunctionKind::Random {
            sparsity: 3,
            max_card: 2,
        };
        let f = make_test_function(&kind, 4, &s, 1).unwrap();
        let mc = mc_l2_error(&f, &f, &s, 1000, 7).unwrap();
        assert!(mc.covers(0.0, 3.0));
        let big = AnovaFunction::zero(13);
        assert!(matches!(
            mc_l2_error(&big, &big, &s, 10, 0),
            Err(Error::UnsupportedScale(_))
        ));
    }

    #[test]
    fn mc_matches_exact_single_subset_truncation() {
        let s = Spectrum::korobov(1.0, 1000).unwrap();
        let mut f = AnovaFunction::zero(2);
        for (k, c) in [([1u32, 1u32], 1.0), ([2, 1], 0.5), ([3, 4], 0.7), ([9, 9], 0.4)] {
            f.add(&[1, 2], &k, c).unwrap();
        }
        let plan = cda::plan(0.05, 2, &s, None).unwrap();
        let out = cda::apply(&plan, &f, &s).unwrap();
        assert!(out.dropped > 0);
        let exact = g_norm_exact(&out.approx.sub(&f).unwrap(), &s, true).unwrap().total;
        assert_relative_eq!(exact, out.error, max_relative = 1e-12);
        let mc = mc_l2_error(&f, &out.approx, &s, 20_000, 11).unwrap();
        assert!(mc.covers(exact, 3.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn mean_offset_against_quadrature() {
        let s = wiener();
        let f = make_test_function(&TestFunctionKind::Mean { terms: 6 }, 4, &s, 0).unwrap();
        let half = AnovaFunction::constant_function(4, 0.5);
        let quad = quadrature_l2_error(&f, &half, &s, 24).unwrap();
        let exact = l2_norm_exact(&f.sub(&half).unwrap(), &s).unwrap();
        assert_relative_eq!(quad, exact, max_relative = 1e-8);
        let mc = mc_l2_error(&f, &half, &s, 20_000, 3).unwrap();
        assert!(mc.covers(quad, 3.0), "{mc:?} vs {quad}");
    }

    #[test]
    fn run_config_validation() {
        let mut cfg = RunConfig::new("cda", KernelSpec::korobov(1.0));
        cfg.validate().unwrap();
        cfg.eps_grid.clear();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::new("cda", KernelSpec::wiener());
        let a: Vec<u64> = (0..4).map(|_| cfg.rng(3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| cfg.rng(3).random()).collect();
        assert_eq!(a, b);
    }
}
