use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use actvar::cda;
use actvar::harness::{make_test_function, mc_l2_error, seeded_rng, TestFunctionKind, DEFAULT_MC_SAMPLES};
use actvar::optimal::{tau_sum_identity, TensorEigenStream};
use actvar::space::l2_norm_exact;
use actvar::{complexity_curve, optimal_algorithm, truncation, C0sqMode, CostModel, Spectrum};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
        o.detail = format!("{} [took {:.2?}, limit {:.0?}]", o.detail, took, limit);
    } else {
        o.detail = format!("{} [{:.2?}]", o.detail, took);
    }
    o
}

fn table_reproduction() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_actvar"))
        .args(["table", "--format", "json"])
        .output()
        .expect("run actvar table");
    if !out.status.success() {
        return outcome(false, format!("exit status {:?}", out.status.code()));
    }
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).expect("table json");
    let got: Vec<i64> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_i64().unwrap())
        .collect();
    let want = vec![3, 5, 7, 8, 10, 11, 13, 14, 15, 17];
    outcome(got == want, format!("got {got:?}"))
}

fn majorant() -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for d in [1usize, 2, 5, 10, 100, 1000] {
        for q in 1..=10 {
            let eps = 10f64.powi(-q);
            let r = truncation::m1(eps, d, 0.5).unwrap();
            let cap = (d as i64).min(r.ceil_big_m);
            checked += 1;
            if r.m1 as i64 > cap {
                violations.push(format!("d={d} q={q}: {} > {cap}", r.m1));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{checked} points, {} violations {violations:?}", violations.len()),
    )
}

const C3_D: [usize; 4] = [2, 5, 10, 50];
const C3_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
const C3_TRIALS: usize = 200;

fn korobov(n: usize) -> Spectrum {
    Spectrum::korobov(1.0, n).unwrap()
}

fn cda_error_claim() -> Outcome {
    let s = korobov(10_000);
    let mut seeds = seeded_rng(2024, 3);
    let mut instances = 0;
    let mut nonzero = 0;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for d in C3_D {
        for eps in C3_EPS {
            let plan = cda::plan(eps, d, &s, None).unwrap();
            for trial in 0..C3_TRIALS {
                let kind = TestFunctionKind::Random {
                    sparsity: 1 + trial % 12,
                    max_card: 1 + trial % 4,
                };
                let f = make_test_function(&kind, d, &s, seeds.random()).unwrap();
                let out = cda::apply(&plan, &f, &s).unwrap();
                let ratio = out.error / (eps * 2f64.sqrt());
                instances += 1;
                if out.error > 0.0 {
                    nonzero += 1;
                }
                worst = worst.max(ratio);
                if out.is_bound || ratio > 1.0 {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{instances} instances, {nonzero} with nonzero error, max error/(eps*sqrt 2) = {worst:.4}, {violations} violations"
        ),
    )
}

fn error_allocation() -> Outcome {
    let s = korobov(10_000);
    let mut worst: f64 = 0.0;
    for d in C3_D {
        for eps in C3_EPS {
            let plan = cda::plan(eps, d, &s, None).unwrap();
            let rel = (plan.error_split() - eps * eps).abs() / (eps * eps);
            worst = worst.max(rel);
        }
    }
    outcome(worst <= 1e-10, format!("max relative deviation {worst:.3e}"))
}

/// All (subset, multi-index) pairs, keyed by the sorted multi-index.
fn brute_force(d: usize, lambdas: &[f64]) -> BTreeMap<Vec<u32>, (f64, u64)> {
    let n = lambdas.len() as u64;
    let mut out = BTreeMap::new();
    for mask in 0u32..(1 << d) {
        let ell = mask.count_ones();
        for code in 0..n.pow(ell) {
            let mut k = Vec::new();
            let mut c = code;
            for _ in 0..ell {
                k.push((c % n) as u32 + 1);
                c /= n;
            }
            k.sort_unstable_by(|a, b| b.cmp(a));
            let value = k.iter().fold(1.0, |p, j| p * (lambdas[*j as usize - 1] / d as f64));
            out.entry(k).or_insert((value, 0)).1 += 1;
        }
    }
    out
}

fn eigen_machinery() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for lambdas in [
        vec![0.5, 0.25, 0.125, 0.0625],
        vec![1.0, 1.0 / 3.0, 0.2, 1.0 / 7.0],
        vec![0.9, 0.9, 0.3, 0.01],
        vec![5.0, 2.0, 1.0, 0.5],
    ] {
        let s = Spectrum::custom(lambdas.clone()).unwrap();
        for d in 1..=3 {
            let oracle = brute_force(d, &lambdas);
            let got: Vec<_> = TensorEigenStream::new(d, &s).unwrap().collect();
            let sorted = got.windows(2).all(|w| w[0].value >= w[1].value);
            let same = got.len() == oracle.len()
                && got.iter().all(|e| {
                    oracle
                        .get(&e.label)
                        .is_some_and(|(v, m)| (e.value - v).abs() <= 1e-15 * v && e.multiplicity == *m as f64)
                });
            if !(sorted && same) {
                ok = false;
                notes.push(format!("stream mismatch for {lambdas:?}, d={d}"));
            }
        }
    }
    let t = tau_sum_identity(2, &Spectrum::custom(vec![0.5, 0.125]).unwrap(), 1.0).unwrap();
    let tau_ok = (t.lhs - t.rhs).abs() <= 1e-12 * t.rhs && (t.lhs - 1.72265625).abs() <= 1e-12;
    ok &= tau_ok;
    notes.push(format!("tau-sum lhs={} rhs={}", t.lhs, t.rhs));
    let w = Spectrum::wiener(100_000, C0sqMode::Exact).unwrap();
    let trace = actvar::numeric::compensated_sum(w.eigenvalues().iter().copied());
    let trace_ok = (trace - 0.5).abs() <= 2e-6;
    ok &= trace_ok;
    notes.push(format!("wiener trace at N=1e5 = {trace:.9}"));
    outcome(ok, notes.join(", "))
}

const C6_D: [usize; 4] = [1, 10, 100, 1000];
const C6_EPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

fn strong_tractability() -> Outcome {
    let s = korobov(100_000);
    let cost = CostModel::Exponential { q: 1.0 };
    let r = complexity_curve(&s, 1.0, &cost, &C6_EPS, &C6_D, 1.0).unwrap();
    let above: Vec<String> = r
        .points
        .iter()
        .filter(|p| p.within_bound != Some(true))
        .map(|p| format!("(eps={}, d={})", p.epsilon, p.d))
        .collect();
    let xs: Vec<f64> = C6_EPS.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = C6_EPS
        .iter()
        .map(|e| r.point(*e, 100).unwrap().ln_comp.unwrap())
        .collect();
    let fit = actvar::numeric::fit_line(&xs, &ys).unwrap();
    outcome(
        above.is_empty() && fit.slope <= 2.2,
        format!(
            "{} points, {} above the bound {above:?}, p_str fit at d=100: {:.4}",
            r.points.len(),
            above.len(),
            fit.slope
        ),
    )
}

fn active_variable_ceilings() -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    let small = korobov(10_000);
    let big = korobov(100_000);
    let mut grid: Vec<(usize, f64, &Spectrum)> = Vec::new();
    for d in C3_D {
        for eps in C3_EPS {
            grid.push((d, eps, &small));
        }
    }
    for d in C6_D {
        for eps in C6_EPS {
            grid.push((d, eps, &big));
        }
    }
    let mut seeds = seeded_rng(7, 4);
    for (d, eps, s) in grid {
        let opt = optimal_algorithm(eps, d, s, 1.0).unwrap();
        let m2 = truncation::m2(eps, d, s.c0sq(), 1.0).unwrap();
        checked += 1;
        if opt.max_act > m2 {
            violations.push(format!("A* d={d} eps={eps}: {} > m2 {m2}", opt.max_act));
        }
        let plan = cda::plan(eps, d, s, None).unwrap();
        let m1 = truncation::m1(eps, d, s.c0sq()).unwrap().m1;
        checked += 1;
        if plan.max_act() > m1 {
            violations.push(format!("CDA plan d={d} eps={eps}: {} > m1 {m1}", plan.max_act()));
        }
        let f = make_test_function(
            &TestFunctionKind::Random {
                sparsity: 10,
                max_card: d.min(8),
            },
            d,
            s,
            seeds.random(),
        )
        .unwrap();
        let out = cda::apply(&plan, &f, s).unwrap();
        for l in &out.functionals {
            checked += 1;
            if l.act() > m1 {
                violations.push(format!("functional d={d} eps={eps}: Act {} > m1 {m1}", l.act()));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{checked} checks, {} violations {violations:?}", violations.len()),
    )
}

fn divergence_witness() -> Outcome {
    let s = korobov(10_000);
    let tau = 0.75;
    let l = s.l_tau(tau).unwrap();
    let values: Vec<f64> = [10usize, 100, 1_000, 10_000]
        .iter()
        .map(|d| {
            let df = *d as f64;
            (df * (l / df.powf(tau)).ln_1p()).exp()
        })
        .collect();
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let exceeds = values[3] > 1e3;
    outcome(
        increasing && exceeds,
        format!(
            "L(0.75) = {l:.6}, values {values:.4?}, strictly increasing: {increasing}, exceeds 1e3 at d=1e4: {exceeds}"
        ),
    )
}

fn mc_cross_check() -> Outcome {
    let s = korobov(10_000);
    let (d, eps, trials) = (4usize, 0.3, 50);
    let plan = cda::plan(eps, d, &s, None).unwrap();
    let mut seeds = seeded_rng(99, 5);
    let mut covered = 0;
    let mut nonzero = 0;
    for _ in 0..trials {
        let seed: u64 = seeds.random();
        let kind = TestFunctionKind::Random {
            sparsity: 8,
            max_card: 3,
        };
        let f = make_test_function(&kind, d, &s, seed).unwrap();
        let out = cda::apply(&plan, &f, &s).unwrap();
        let exact = l2_norm_exact(&f.sub(&out.approx).unwrap(), &s).unwrap();
        if exact > 0.0 {
            nonzero += 1;
        }
        let mc = mc_l2_error(&f, &out.approx, &s, DEFAULT_MC_SAMPLES, seed.rotate_left(17)).unwrap();
        if mc.covers(exact, 3.0) {
            covered += 1;
        }
    }
    outcome(
        covered >= 47,
        format!("{covered} of {trials} within 3 sigma ({nonzero} with nonzero error), d={d}"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("table reproduction", Duration::from_secs(1), table_reproduction),
        ("m1 majorant", Duration::from_secs(10), majorant),
        ("cda error claim", Duration::from_secs(60), cda_error_claim),
        ("error allocation identity", Duration::from_secs(600), error_allocation),
        ("eigenvalue machinery", Duration::from_secs(600), eigen_machinery),
        ("strong tractability", Duration::from_secs(120), strong_tractability),
        ("active-variable ceilings", Duration::from_secs(600), active_variable_ceilings),
        ("divergence witness", Duration::from_secs(600), divergence_witness),
        ("monte carlo cross-check", Duration::from_secs(600), mc_cross_check),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let o = timed(limit, run);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} [{}] {name}: {}", i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
