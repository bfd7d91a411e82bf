//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sns::diagnostics::{ess, mean};
use sns::prediction::{glm_mean_response, poisson_draw};
use sns::{
    chain_rng, fit_gaussian, make_partition, predict, predict_with_rng, reldev_mean, run,
    simulate_poisson, summarize, summarize_prediction, ChainSummary, GaussianFit, LogDensity,
    MvGaussian, PoissonLog, PoissonRegression, SamplerSpec, SummaryWindow,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_ess(s: &ChainSummary) -> f64 {
    median(s.coords.iter().map(|c| c.ess).collect())
}

fn poisson_target(n: usize, k: usize, seed: u64) -> PoissonRegression {
    PoissonRegression::poisson(simulate_poisson(n, k, seed).unwrap().data).unwrap()
}

fn gaussian_exactness() -> Outcome {
    let t0 = Instant::now();
    let mut rng = chain_rng(2016);
    let (mu, prec) = example_gaussian(3, &mut rng);
    let target = MvGaussian::new(mu, prec).unwrap();
    let spec = SamplerSpec::new(500, 10, 2016).with_mh_diag(true);
    let chain = run(DVector::zeros(3), &target, &spec).map_err(|e| e.to_string())?;
    let w = SummaryWindow {
        nburnin: 10,
        end: 500,
        thin: 1,
    };
    let s = summarize(&chain, &w).map_err(|e| e.to_string())?;
    let rate = s.acceptance_rate.unwrap_or(f64::NAN);
    let reldev = reldev_mean(&chain, &target, &w)
        .map_err(|e| e.to_string())?
        .unwrap_or(f64::NAN);
    let dt = t0.elapsed();
    check(rate == 1.0, || format!("acceptance rate {rate}"))?;
    check(reldev.abs() < 1e-8, || format!("reldev {reldev:e}"))?;
    check(dt < Duration::from_secs(5), || format!("took {dt:?}"))?;
    Ok(format!(
        "acceptance 1.0, reldev {reldev:.1e}, {:.2}s",
        dt.as_secs_f64()
    ))
}

fn nr_equals_mle() -> Outcome {
    let t0 = Instant::now();
    let sim = simulate_poisson(1000, 5, 2016).unwrap();
    let oracle = irls_poisson(&sim.data.x, &sim.data.y, 100);
    let target = PoissonRegression::poisson(sim.data).unwrap();
    let chain =
        run(DVector::zeros(5), &target, &SamplerSpec::new(20, 20, 1)).map_err(|e| e.to_string())?;
    let beta = chain.row(19);
    let err = (&beta - &oracle).amax();
    let dt = t0.elapsed();
    check(err < 1e-6, || format!("max |beta - mle| = {err:e}"))?;
    check(dt < Duration::from_secs(10), || format!("took {dt:?}"))?;
    Ok(format!(
        "max |beta - mle| = {err:.1e}, {:.2}s",
        dt.as_secs_f64()
    ))
}

fn low_dimensional_mixing() -> Outcome {
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let target = poisson_target(1000, 5, seed);
        let chain = run(DVector::zeros(5), &target, &SamplerSpec::new(200, 20, seed))
            .map_err(|e| e.to_string())?;
        let s = summarize(
            &chain,
            &SummaryWindow {
                nburnin: 100,
                end: 200,
                thin: 1,
            },
        )
        .map_err(|e| e.to_string())?;
        let rate = s.acceptance_rate.unwrap_or(f64::NAN);
        let m = median_ess(&s);
        let nominal = s.nominal_sample_size as f64;
        check((0.85..=1.0).contains(&rate), || {
            format!("seed {seed}: acceptance {rate}")
        })?;
        check(m >= 0.6 * nominal, || {
            format!("seed {seed}: median ESS {m:.1} of {nominal}")
        })?;
        lines.push(format!("{rate:.2}/{m:.0}"));
    }
    Ok(format!(
        "acceptance/median ESS per seed: {}",
        lines.join(" ")
    ))
}

fn high_dimensional_partitioning() -> Outcome {
    let t0 = Instant::now();
    let seed = 1;
    let w = SummaryWindow {
        nburnin: 50,
        end: 100,
        thin: 1,
    };
    let big = poisson_target(1000, 100, seed);
    let spec = SamplerSpec::new(100, 10, seed).with_mh_diag(true);
    let full = run(DVector::zeros(100), &big, &spec).map_err(|e| e.to_string())?;
    let part_spec = spec
        .clone()
        .with_partition(make_partition(100, 10).unwrap());
    let part = run(DVector::zeros(100), &big, &part_spec).map_err(|e| e.to_string())?;
    let (sf, sp) = (
        summarize(&full, &w).map_err(|e| e.to_string())?,
        summarize(&part, &w).map_err(|e| e.to_string())?,
    );
    let (af, ap) = (sf.acceptance_rate.unwrap(), sp.acceptance_rate.unwrap());
    let (ef, ep) = (median_ess(&sf), median_ess(&sp));

    let small = poisson_target(1000, 5, seed);
    let small_chain = run(
        DVector::zeros(5),
        &small,
        &SamplerSpec::new(100, 10, seed).with_mh_diag(true),
    )
    .map_err(|e| e.to_string())?;
    let r100 = reldev_mean(&full, &big, &w)
        .map_err(|e| e.to_string())?
        .unwrap_or(f64::NAN);
    let r5 = reldev_mean(&small_chain, &small, &w)
        .map_err(|e| e.to_string())?
        .unwrap_or(f64::NAN);
    let dt = t0.elapsed();

    check(af <= 0.5, || format!("unpartitioned acceptance {af}"))?;
    check(ap >= 0.75, || format!("partitioned acceptance {ap}"))?;
    check(ep >= 3.0 * ef, || {
        format!("median ESS partitioned {ep:.1} vs unpartitioned {ef:.1}")
    })?;
    check(r100 >= 5.0 * r5, || {
        format!("reldev K=100 {r100:e} vs K=5 {r5:e}")
    })?;
    check(dt < Duration::from_secs(180), || format!("took {dt:?}"))?;
    Ok(format!(
        "acceptance {af:.2} -> {ap:.2}, median ESS {ef:.1} -> {ep:.1}, reldev K=100/K=5 = {:.1}, {:.1}s",
        r100 / r5,
        dt.as_secs_f64()
    ))
}

fn distributional_correctness() -> Outcome {
    let prec = DMatrix::from_row_slice(2, 2, &[1.5, 0.6, 0.6, 0.8]);
    let mu = DVector::from_vec(vec![1.0, -0.5]);
    let cov = prec.clone().try_inverse().unwrap();
    let target = MvGaussian::new(mu.clone(), prec).unwrap();
    let mut worst_cov = 0.0f64;
    for seed in 1..=5u64 {
        let chain = run(
            DVector::zeros(2),
            &target,
            &SamplerSpec::new(10_100, 10, seed),
        )
        .map_err(|e| e.to_string())?;
        let w = SummaryWindow {
            nburnin: 100,
            end: 10_100,
            thin: 1,
        };
        let s = summarize(&chain, &w).map_err(|e| e.to_string())?;
        for j in 0..2 {
            let c = &s.coords[j];
            let tol = 4.0 * cov[(j, j)].sqrt() / c.ess.sqrt();
            check((c.mean - mu[j]).abs() < tol, || {
                format!("seed {seed}, mean[{j}] = {} vs {}", c.mean, mu[j])
            })?;
        }
        let rows: Vec<DVector<f64>> = w.rows().map(|i| chain.row(i)).collect();
        let m = rows.iter().fold(DVector::zeros(2), |a, r| a + r) / rows.len() as f64;
        let emp = rows.iter().fold(DMatrix::zeros(2, 2), |a, r| {
            a + (r - &m) * (r - &m).transpose()
        }) / (rows.len() - 1) as f64;
        for i in 0..2 {
            for j in 0..2 {
                let rel = (emp[(i, j)] - cov[(i, j)]).abs() / cov[(i, j)].abs();
                worst_cov = worst_cov.max(rel);
                check(rel <= 0.1, || {
                    format!("seed {seed}, cov[{i},{j}] off by {:.1}%", 100.0 * rel)
                })?;
            }
        }
    }
    Ok(format!(
        "5 seeds, worst covariance error {:.1}%",
        100.0 * worst_cov
    ))
}

fn fd_check<T: LogDensity>(t: &T, x: &DVector<f64>) -> Result<(), String> {
    let ds = t.eval(x).map_err(|e| e.to_string())?;
    let g = fd_gradient(t, x);
    let h = fd_hessian(t, x);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    for i in 0..x.len() {
        check(rel(g[i], ds.grad[i]) <= 1e-4, || {
            format!("gradient[{i}]: {} vs {}", g[i], ds.grad[i])
        })?;
        for j in 0..x.len() {
            check(rel(h[(i, j)], ds.hess[(i, j)]) <= 1e-3, || {
                format!("Hessian[{i},{j}]")
            })?;
        }
    }
    Ok(())
}

fn numerical_oracles() -> Outcome {
    let mut rng = chain_rng(6);
    let (mu, prec) = example_gaussian(3, &mut rng);
    let gauss = MvGaussian::new(mu, prec).unwrap();
    let poisson = poisson_target(1000, 5, 6);
    for _ in 0..20 {
        fd_check(
            &gauss,
            &DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0)),
        )?;
        fd_check(
            &poisson,
            &DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0)),
        )?;
    }

    let mut worst_mean = 0.0f64;
    let mut worst_pdf = 0.0f64;
    for _ in 0..20 {
        let p = random_spd(4, &mut rng);
        let t = MvGaussian::new(
            DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0)),
            p.clone(),
        )
        .unwrap();
        let at = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let ds = t.eval(&at).unwrap();
        let dense = &at + ds.hess.clone().lu().solve(&-&ds.grad).unwrap();
        let fit = fit_gaussian(&at, &ds).map_err(|e| e.to_string())?;
        worst_mean = worst_mean.max((fit.mean() - dense).amax());

        let mean = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let g = GaussianFit::from_precision(mean.clone(), &p).unwrap();
        let sigma = p.clone().try_inverse().unwrap();
        let d = &x - &mean;
        let quad = (d.transpose() * sigma.clone().try_inverse().unwrap() * &d)[(0, 0)];
        let direct =
            -2.0 * (2.0 * std::f64::consts::PI).ln() - 0.5 * sigma.determinant().ln() - 0.5 * quad;
        worst_pdf = worst_pdf.max((g.log_pdf(&x) - direct).abs());
    }
    check(worst_mean < 1e-10, || {
        format!("fit mean off by {worst_mean:e}")
    })?;
    check(worst_pdf < 1e-10, || {
        format!("log_pdf off by {worst_pdf:e}")
    })?;

    let rho: f64 = 0.9;
    let n = 10_000;
    let oracle = n as f64 * (1.0 - rho) / (1.0 + rho);
    let mut v = 0.0;
    let x: Vec<f64> = (0..n)
        .map(|_| {
            v = rho * v + rng.sample::<f64, _>(StandardNormal);
            v
        })
        .collect();
    let e = ess(&x);
    check((e - oracle).abs() <= 0.25 * oracle, || {
        format!("AR(1) ESS {e:.1} vs {oracle:.1}")
    })?;
    Ok(format!(
        "FD checks ok, fit mean {worst_mean:.1e}, log_pdf {worst_pdf:.1e}, AR(1) ESS {e:.0} vs {oracle:.0}"
    ))
}

fn prediction_ordering() -> Outcome {
    let sim = simulate_poisson(1000, 5, 7).unwrap();
    let x_new = sim.data.x.clone();
    let target = PoissonRegression::poisson(sim.data).unwrap();
    let chain = run(DVector::zeros(5), &target, &SamplerSpec::new(1000, 20, 7))
        .map_err(|e| e.to_string())?;
    let w = SummaryWindow {
        nburnin: 100,
        end: 1000,
        thin: 1,
    };
    let mean_pm = predict(&chain, &w, |b| glm_mean_response(&PoissonLog, &x_new, b))
        .map_err(|e| e.to_string())?;
    let mut rng = chain_rng(8);
    let draw_pm = predict_with_rng(&chain, &w, &mut rng, |b, r| poisson_draw(&x_new, b, r))
        .map_err(|e| e.to_string())?;
    check(mean_pm.values.ncols() == 900, || {
        format!("{} retained samples", mean_pm.values.ncols())
    })?;
    let (ms, ds) = (
        summarize_prediction(&mean_pm),
        summarize_prediction(&draw_pm),
    );
    let m = ms.rows.len();
    let wider = ms
        .rows
        .iter()
        .zip(&ds.rows)
        .filter(|(a, b)| b.sd >= a.sd)
        .count();
    let frac = wider as f64 / m as f64;
    check(frac >= 0.99, || {
        format!("draw sd >= mean sd on {:.1}% of rows", 100.0 * frac)
    })?;
    for (i, (a, b)) in ms.rows.iter().zip(&ds.rows).enumerate() {
        let tol = 4.0 * b.sd / 900f64.sqrt();
        check((a.mean - b.mean).abs() <= tol, || {
            format!("row {i}: means {} vs {}", a.mean, b.mean)
        })?;
    }
    let sd_ratio = mean(&ds.rows.iter().map(|r| r.sd).collect::<Vec<_>>())
        / mean(&ms.rows.iter().map(|r| r.sd).collect::<Vec<_>>());
    Ok(format!(
        "{:.1}% of rows wider, mean sd ratio {sd_ratio:.1}",
        100.0 * frac
    ))
}

fn sns_cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_sns"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), || {
        format!(
            "sns {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn cli_pass(dir: &Path) -> Result<(), String> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let d = |s: &str| dir.join(s).to_str().unwrap().to_owned();
    sns_cli(&[
        "simulate",
        "--kind",
        "poisson",
        "--n",
        "1000",
        "--k",
        "5",
        "--seed",
        "3",
        "--out",
        &d("sim"),
    ])?;
    for c in ["example1", "example2"] {
        let cfg = configs.join(format!("{c}.toml"));
        sns_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", &d(c)])?;
    }
    let x = d("sim/X.csv");
    for p in ["poisson-mean", "poisson-draw"] {
        sns_cli(&[
            "predict",
            "--chain",
            &d("example2"),
            "--predictor",
            p,
            "--data",
            &x,
            "--out",
            &d(p),
        ])?;
    }
    Ok(())
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cli_pass(&a)?;
    cli_pass(&b)?;
    let mut files = Vec::new();
    collect_files(&a, &mut files);
    files.sort();
    for f in &files {
        let rel = f.strip_prefix(&a).unwrap();
        let other = fs::read(b.join(rel)).map_err(|e| format!("{}: {e}", rel.display()))?;
        check(fs::read(f).unwrap() == other, || {
            format!("{} differs", rel.display())
        })?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two passes",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("Gaussian exactness", gaussian_exactness),
        ("NR equals MLE", nr_equals_mle),
        ("low-dimensional mixing", low_dimensional_mixing),
        (
            "high-dimensional partitioning",
            high_dimensional_partitioning,
        ),
        ("distributional correctness", distributional_correctness),
        ("numerical oracles", numerical_oracles),
        ("prediction ordering", prediction_ordering),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
