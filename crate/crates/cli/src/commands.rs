use std::path::{Path, PathBuf};

use actvar::cda::{self, RRegime};
use actvar::cost::{complexity_curve, tractability_classify, Classification};
use actvar::harness::{
    make_test_function, mc_l2_error, reproduce_table, seeded_rng, OutputFormat, RunConfig,
    TestFunctionKind,
};
use actvar::optimal::TensorEigenStream;
use actvar::space::l2_norm_exact;
use actvar::{optimal_algorithm, truncation, C0sqMode, CostModel, KernelSpec, Spectrum};
use anyhow::{bail, Context, Result};
use rand::Rng;
use serde::Serialize;

use crate::output::{emit, sink, write_json};
use crate::{C0sqArg, Cli, Command, Common, FormatArg, Status};

pub fn run(cli: &Cli) -> Result<Status> {
    let common = &cli.common;
    match &cli.command {
        Command::Bounds { eps, d, c_const } => {
            let cfg = config(common, "bounds", eps, d, CostModel::Constant)?;
            bounds(common, &cfg, *c_const)
        }
        Command::Spectrum { count, tau } => {
            let cfg = config(common, "spectrum", &[0.5], &[1], CostModel::Constant)?;
            spectrum(common, &cfg, *count, tau)
        }
        Command::Cda {
            eps,
            d,
            tau,
            cost,
            trials,
            sparsity,
            max_card,
        } => {
            let cfg = config(common, "cda", eps, d, parse_cost(cost)?)?;
            run_cda(common, &cfg, *tau, *trials, *sparsity, *max_card)
        }
        Command::Optimal {
            eps,
            d,
            c_const,
            list,
        } => {
            let cfg = config(common, "optimal", eps, d, CostModel::Constant)?;
            optimal(common, &cfg, *c_const, *list)
        }
        Command::Complexity {
            eps,
            d,
            tau,
            cost,
            c_const,
            summary,
        } => {
            let mut cfg = config(common, "complexity", eps, d, parse_cost(cost)?)?;
            cfg.tau_grid = vec![*tau];
            complexity(common, &cfg, *c_const, summary.as_deref())
        }
        Command::Table => table(common),
        Command::McCheck {
            d,
            eps,
            trials,
            samples,
            sparsity,
            max_card,
            min_coverage,
        } => {
            let cfg = config(common, "mc-check", &[*eps], &[*d], CostModel::Constant)?;
            mc_check(common, &cfg, *trials, *samples, *sparsity, *max_card, *min_coverage)
        }
    }
}

fn parse_cost(text: &str) -> Result<CostModel> {
    text.parse::<CostModel>().map_err(Into::into)
}

fn parse_kernel(text: &str) -> Result<KernelSpec> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    match (name, arg) {
        ("wiener", None) => Ok(KernelSpec::wiener()),
        ("korobov", r) => {
            let r: f64 = r
                .unwrap_or("1")
                .parse()
                .with_context(|| format!("bad korobov smoothness in {text:?}"))?;
            Ok(KernelSpec::korobov(r))
        }
        ("custom", Some(path)) => load_custom(Path::new(path)),
        _ => bail!("unknown kernel {text:?}; expected wiener, korobov:R or custom:FILE"),
    }
}

fn load_custom(path: &Path) -> Result<KernelSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read spectrum file {}", path.display()))?;
    if let Ok(s) = Spectrum::from_json(&text) {
        return Ok(KernelSpec {
            kind: s.kind().clone(),
            ..KernelSpec::wiener()
        });
    }
    let values: Vec<f64> = match serde_json::from_str::<Vec<f64>>(&text) {
        Ok(v) => v,
        Err(_) => text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("bad eigenvalue {t:?}")))
            .collect::<Result<_>>()?,
    };
    Ok(KernelSpec::custom(values))
}

fn config(common: &Common, name: &str, eps: &[f64], d: &[usize], cost: CostModel) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(name, parse_kernel(&common.kernel)?);
    cfg.c0sq_mode = match common.c0sq_mode {
        C0sqArg::Exact => C0sqMode::Exact,
        C0sqArg::Paper => C0sqMode::PaperBound,
    };
    cfg.truncation = common.truncation;
    cfg.eps_grid = eps.to_vec();
    cfg.d_grid = d.to_vec();
    cfg.cost = cost;
    cfg.seed = common.seed;
    cfg.format = match common.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn status(violations: Vec<String>) -> Status {
    if violations.is_empty() {
        Status::Ok
    } else {
        Status::Mismatch(violations.join("; "))
    }
}

#[derive(Serialize)]
struct BoundsRow {
    epsilon: f64,
    d: usize,
    c0sq: f64,
    m1: usize,
    tail_at_m1: f64,
    big_m: f64,
    ceil_big_m: i64,
    refined_big_m: i64,
    m2: usize,
    majorant_ok: bool,
}

fn bounds(common: &Common, cfg: &RunConfig, c_const: f64) -> Result<Status> {
    let s = cfg.spectrum()?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for &d in &cfg.d_grid {
        for &eps in &cfg.eps_grid {
            let r = truncation::m1(eps, d, s.c0sq())?.with_m2(c_const)?;
            let ok = r.m1 as i64 <= (d as i64).min(r.ceil_big_m);
            if !ok {
                bad.push(format!("m1({eps}, {d}) = {} exceeds min(d, ceil M) = {}", r.m1, (d as i64).min(r.ceil_big_m)));
            }
            rows.push(BoundsRow {
                epsilon: eps,
                d,
                c0sq: r.c0sq,
                m1: r.m1,
                tail_at_m1: r.tail_at_m1,
                big_m: r.big_m,
                ceil_big_m: r.ceil_big_m,
                refined_big_m: r.refined_big_m,
                m2: r.m2.unwrap_or(0),
                majorant_ok: ok,
            });
        }
    }
    emit::<_, ()>(common, &rows, None)?;
    Ok(status(bad))
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    eigenvalue: f64,
}

#[derive(Serialize)]
struct PowerSum {
    tau: f64,
    l_tau: f64,
}

fn spectrum(common: &Common, cfg: &RunConfig, count: usize, taus: &[f64]) -> Result<Status> {
    let s = cfg.spectrum()?;
    let sums = taus
        .iter()
        .map(|t| Ok(PowerSum { tau: *t, l_tau: s.l_tau(*t)? }))
        .collect::<Result<Vec<_>>>()?;
    match common.format {
        FormatArg::Json => {
            let mut doc = serde_json::to_value(s.to_doc())?;
            doc["lambda11"] = serde_json::json!(s.lambda11());
            doc["tau_threshold"] = serde_json::json!(s.tau_threshold());
            doc["power_sums"] = serde_json::to_value(&sums)?;
            let mut w = sink(common.out.as_deref())?;
            write_json(&mut *w, &doc)?;
        }
        FormatArg::Csv => {
            let rows: Vec<EigenRow> = s
                .eigenvalues()
                .iter()
                .take(count)
                .enumerate()
                .map(|(i, v)| EigenRow {
                    index: i + 1,
                    eigenvalue: *v,
                })
                .collect();
            emit::<_, ()>(common, &rows, None)?;
            for p in &sums {
                eprintln!("L({}) = {}", p.tau, p.l_tau);
            }
        }
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CdaRow {
    epsilon: f64,
    d: usize,
    tau: f64,
    m1: usize,
    big_r: f64,
    ell_star: usize,
    max_act: usize,
    functionals: f64,
    cost: f64,
    ln_cost: f64,
    ln_bound: f64,
    within_bound: bool,
    r_regime: &'static str,
    r_bound_holds: bool,
    error_split_rel: f64,
    trials: usize,
    max_error_ratio: f64,
    error_violations: usize,
}

#[derive(Serialize)]
struct CdaDetail {
    epsilon: f64,
    d: usize,
    plan: cda::CdaPlan,
    price: cda::Price,
    r_bound: cda::RBound,
}

fn run_cda(
    common: &Common,
    cfg: &RunConfig,
    tau: Option<f64>,
    trials: usize,
    sparsity: usize,
    max_card: usize,
) -> Result<Status> {
    let s = cfg.spectrum()?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut bad = Vec::new();
    let mut seeds = seeded_rng(cfg.seed, 10);
    for &d in &cfg.d_grid {
        for &eps in &cfg.eps_grid {
            let plan = cda::plan(eps, d, &s, tau)?;
            let price = cda::price(&plan, &cfg.cost)?;
            let rb = cda::r_upper_bounds(&plan);
            let mut max_ratio: f64 = 0.0;
            let mut violations = 0;
            for _ in 0..trials {
                let kind = TestFunctionKind::Random { sparsity, max_card };
                let f = make_test_function(&kind, d, &s, seeds.random())?;
                let out = cda::apply(&plan, &f, &s)?;
                let ratio = out.error / (eps * 2f64.sqrt() * f.h_norm());
                max_ratio = max_ratio.max(ratio);
                if ratio > 1.0 || out.max_act() > plan.m1 {
                    violations += 1;
                }
            }
            if violations > 0 {
                bad.push(format!("{violations} error or Act violations at eps={eps}, d={d}"));
            }
            if !price.within_bound {
                bad.push(format!("cost above the bound at eps={eps}, d={d}"));
            }
            let split_rel = if plan.m1 > 0 {
                (plan.error_split() - eps * eps).abs() / (eps * eps)
            } else {
                0.0
            };
            rows.push(CdaRow {
                epsilon: eps,
                d,
                tau: plan.tau,
                m1: plan.m1,
                big_r: plan.big_r,
                ell_star: plan.ell_star,
                max_act: plan.max_act(),
                functionals: plan.functional_count(),
                cost: price.exact,
                ln_cost: price.ln_exact,
                ln_bound: price.ln_bound,
                within_bound: price.within_bound,
                r_regime: match rb.regime {
                    RRegime::Factorial => "factorial",
                    RRegime::Exponential => "exponential",
                    RRegime::Empty => "empty",
                },
                r_bound_holds: rb.holds,
                error_split_rel: split_rel,
                trials,
                max_error_ratio: max_ratio,
                error_violations: violations,
            });
            details.push(CdaDetail {
                epsilon: eps,
                d,
                plan,
                price,
                r_bound: rb,
            });
        }
    }
    emit(common, &rows, Some(&details))?;
    Ok(status(bad))
}

#[derive(Serialize)]
struct OptimalRow {
    epsilon: f64,
    d: usize,
    c_const: f64,
    n: f64,
    max_act: usize,
    m2: usize,
    within_m2: bool,
    worst_case_error: f64,
}

#[derive(Serialize)]
struct TensorRow {
    rank: usize,
    value: f64,
    multiplicity: f64,
    cardinality: usize,
    label: String,
}

fn optimal(common: &Common, cfg: &RunConfig, c_const: f64, list: usize) -> Result<Status> {
    let s = cfg.spectrum()?;
    if list > 0 {
        let d = cfg.d_grid[0];
        let rows: Vec<TensorRow> = TensorEigenStream::new(d, &s)?
            .take(list)
            .enumerate()
            .map(|(i, e)| TensorRow {
                rank: i + 1,
                value: e.value,
                multiplicity: e.multiplicity,
                cardinality: e.cardinality(),
                label: e.label.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
            })
            .collect();
        emit::<_, ()>(common, &rows, None)?;
        return Ok(Status::Ok);
    }
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for &d in &cfg.d_grid {
        for &eps in &cfg.eps_grid {
            let o = optimal_algorithm(eps, d, &s, c_const)?;
            if !o.within_m2 {
                bad.push(format!("max_act {} > m2 {} at eps={eps}, d={d}", o.max_act, o.m2));
            }
            rows.push(OptimalRow {
                epsilon: eps,
                d,
                c_const,
                n: o.n,
                max_act: o.max_act,
                m2: o.m2,
                within_m2: o.within_m2,
                worst_case_error: o.worst_case_error,
            });
        }
    }
    emit::<_, ()>(common, &rows, None)?;
    Ok(status(bad))
}

#[derive(Serialize)]
struct ComplexityRow {
    epsilon: f64,
    d: usize,
    comp: Option<f64>,
    ln_comp: Option<f64>,
    bound: f64,
    ln_bound: f64,
    within_bound: Option<bool>,
    n: Option<f64>,
    max_act: Option<usize>,
    note: Option<String>,
}

#[derive(Serialize)]
struct ComplexitySummary<'a> {
    source: actvar::ComplexitySource,
    cost: String,
    tau: f64,
    c_const: f64,
    p_str_fit: Option<&'a actvar::cost::ExponentFit>,
    per_d_exponent: &'a [actvar::cost::ExponentFit],
    qpt_t_fit: Option<&'a actvar::cost::QptFit>,
    residuals: Residuals,
    weak_max: f64,
    weak_by_d: &'a [(usize, f64)],
    all_within_bound: bool,
    classification: Option<Classification>,
    classification_note: Option<String>,
}

#[derive(Serialize)]
struct Residuals {
    p_str: Option<Vec<f64>>,
    qpt: Option<Vec<f64>>,
}

fn complexity(common: &Common, cfg: &RunConfig, c_const: f64, summary_path: Option<&Path>) -> Result<Status> {
    let s = cfg.spectrum()?;
    let tau = cfg.tau_grid[0];
    let report = complexity_curve(&s, c_const, &cfg.cost, &cfg.eps_grid, &cfg.d_grid, tau)?;
    let (classification, classification_note) = match tractability_classify(&report) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rows: Vec<ComplexityRow> = report
        .points
        .iter()
        .map(|p| ComplexityRow {
            epsilon: p.epsilon,
            d: p.d,
            comp: p.comp,
            ln_comp: p.ln_comp,
            bound: p.bound,
            ln_bound: p.ln_bound,
            within_bound: p.within_bound,
            n: p.n,
            max_act: p.max_act,
            note: p.note.clone(),
        })
        .collect();
    let summary = ComplexitySummary {
        source: report.source,
        cost: report.cost.to_string(),
        tau,
        c_const,
        p_str_fit: report.p_str_fit.as_ref(),
        per_d_exponent: &report.per_d_exponent,
        qpt_t_fit: report.qpt_fit.as_ref(),
        residuals: Residuals {
            p_str: report.p_str_fit.as_ref().map(|f| f.fit.residuals.clone()),
            qpt: report.qpt_fit.as_ref().map(|f| f.fit.residuals.clone()),
        },
        weak_max: report.weak_max,
        weak_by_d: &report.weak_by_d,
        all_within_bound: report.all_within_bound,
        classification,
        classification_note,
    };
    match common.format {
        FormatArg::Json => emit(common, &rows, Some(&summary))?,
        FormatArg::Csv => {
            emit::<_, ()>(common, &rows, None)?;
            let target: Option<PathBuf> = summary_path
                .map(Path::to_path_buf)
                .or_else(|| common.out.as_ref().map(|o| o.with_extension("summary.json")));
            match target {
                Some(p) => {
                    let mut w = sink(Some(&p))?;
                    write_json(&mut *w, &summary)?;
                }
                None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
            }
        }
    }
    let mut bad = Vec::new();
    for p in &report.points {
        if p.within_bound == Some(false) {
            bad.push(format!("comp above the bound at eps={}, d={}", p.epsilon, p.d));
        }
    }
    Ok(status(bad))
}

fn table(common: &Common) -> Result<Status> {
    let t = reproduce_table()?;
    emit(common, &t.rows, Some(&t))?;
    Ok(status(t.diff()))
}

#[derive(Serialize)]
struct McRow {
    trial: usize,
    function_seed: u64,
    exact: f64,
    estimate: f64,
    std_error: f64,
    covered: bool,
}

#[derive(Serialize)]
struct McSummary {
    trials: usize,
    covered: usize,
    nonzero_errors: usize,
    coverage: f64,
    min_coverage: f64,
}

fn mc_check(
    common: &Common,
    cfg: &RunConfig,
    trials: usize,
    samples: usize,
    sparsity: usize,
    max_card: usize,
    min_coverage: f64,
) -> Result<Status> {
    let s = cfg.spectrum()?;
    let d = cfg.d_grid[0];
    let eps = cfg.eps_grid[0];
    let plan = cda::plan(eps, d, &s, None)?;
    let mut seeds = seeded_rng(cfg.seed, 20);
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let function_seed: u64 = seeds.random();
        let kind = TestFunctionKind::Random { sparsity, max_card };
        let f = make_test_function(&kind, d, &s, function_seed)?;
        let out = cda::apply(&plan, &f, &s)?;
        let exact = l2_norm_exact(&f.sub(&out.approx)?, &s)?;
        let mc = mc_l2_error(&f, &out.approx, &s, samples, function_seed ^ 0x9e37_79b9_7f4a_7c15)?;
        rows.push(McRow {
            trial,
            function_seed,
            exact,
            estimate: mc.estimate,
            std_error: mc.std_error,
            covered: mc.covers(exact, cfg.tolerances.sigma),
        });
    }
    let covered = rows.iter().filter(|r| r.covered).count();
    let summary = McSummary {
        trials,
        covered,
        nonzero_errors: rows.iter().filter(|r| r.exact > 0.0).count(),
        coverage: if trials > 0 { covered as f64 / trials as f64 } else { 1.0 },
        min_coverage,
    };
    emit(common, &rows, Some(&summary))?;
    if common.format == FormatArg::Csv {
        eprintln!("covered {covered} of {trials}");
    }
    Ok(if summary.coverage + 1e-12 >= min_coverage {
        Status::Ok
    } else {
        Status::Mismatch(format!("only {covered} of {trials} trials covered"))
    })
}
