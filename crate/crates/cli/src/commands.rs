use std::path::Path;

use nalgebra::DMatrix;
use sns::diagnostics::CoordStats;
use sns::prediction::{glm_mean_response, poisson_draw, predict_samples, predict_samples_with_rng};
use sns::{
    chain_rng, run as run_chain, simulate_poisson, summarize, summarize_prediction, ChainOutput,
    PoissonLog, PredictionKind, SummaryWindow,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{
    create_dir, fmt_f64, read_matrix, stats_header, stats_row, write_csv, write_text, JsonSummary,
};
use crate::{PredictArgs, Predictor, RunArgs, SimulateArgs, SimulateKind};

pub fn coord_names(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("x{j}")).collect()
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let p = cfg.prepare(base, args.seed, args.out.clone())?;
    let chain = run_chain(p.x_init, &*p.target, &p.spec)?;
    let summary = summarize(&chain, &p.window)?;

    create_dir(&p.out_dir)?;
    write_chain(&p.out_dir, &chain)?;
    write_text(&p.out_dir.join("summary.txt"), &summary.to_string())?;
    let json = JsonSummary::new(&summary, p.spec.seed, &coord_names(chain.dim()));
    let text = serde_json::to_string_pretty(&json).expect("summary serializes");
    write_text(&p.out_dir.join("summary.json"), &(text + "\n"))?;
    print!("{summary}");
    Ok(())
}

fn write_chain(dir: &Path, chain: &ChainOutput) -> Result<()> {
    write_csv(
        &dir.join("samples.csv"),
        &coord_names(chain.dim()),
        chain
            .samples
            .row_iter()
            .map(|r| r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()),
    )?;
    write_csv(
        &dir.join("lp.csv"),
        &["iteration".to_string(), "lp".to_string()],
        chain
            .lp
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![i.to_string(), fmt_f64(v)]),
    )?;
    let header: Vec<String> = [
        "iteration",
        "subset",
        "log_p",
        "log_p_prop",
        "log_q",
        "log_q_prop",
        "log_ratio",
        "accepted",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    if let Some(diag) = &chain.mh_diag {
        for (i, it) in diag.iter().enumerate() {
            for (s, d) in it.iter().enumerate() {
                rows.push(vec![
                    i.to_string(),
                    s.to_string(),
                    fmt_f64(d.log_p),
                    fmt_f64(d.log_p_prop),
                    fmt_f64(d.log_q),
                    fmt_f64(d.log_q_prop),
                    fmt_f64(d.log_ratio()),
                    u8::from(d.accepted).to_string(),
                ]);
            }
        }
    }
    write_csv(&dir.join("diag.csv"), &header, rows)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let SimulateKind::Poisson = args.kind;
    let sim =
        simulate_poisson(args.n, args.k, args.seed).map_err(|e| CliError::config(e.to_string()))?;
    create_dir(&args.out)?;
    let x = &sim.data.x;
    write_csv(
        &args.out.join("X.csv"),
        &coord_names(x.ncols()),
        x.row_iter()
            .map(|r| r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()),
    )?;
    write_csv(
        &args.out.join("y.csv"),
        &["y".to_string()],
        sim.data.y.iter().map(|&v| vec![(v as u64).to_string()]),
    )?;
    write_csv(
        &args.out.join("beta.csv"),
        &["beta".to_string()],
        sim.beta.iter().map(|&v| vec![fmt_f64(v)]),
    )
}

/// Reads the summary and sample matrix of a stored run.
fn load_samples(dir: &Path) -> Result<(JsonSummary, DMatrix<f64>)> {
    let summary = JsonSummary::read(&dir.join("summary.json"))?;
    let (_, samples) = read_matrix(&dir.join("samples.csv"))?;
    if samples.shape() != (summary.niter, summary.dim) {
        return Err(CliError::config(format!(
            "{}: expected {}x{} samples, found {}x{}",
            dir.join("samples.csv").display(),
            summary.niter,
            summary.dim,
            samples.nrows(),
            samples.ncols()
        )));
    }
    Ok((summary, samples))
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (stored, samples) = load_samples(&args.chain)?;
    let (_, x_new) = read_matrix(&args.data)?;
    if x_new.ncols() != stored.dim {
        return Err(CliError::config(format!(
            "{}: {} columns, but the chain has dimension {}",
            args.data.display(),
            x_new.ncols(),
            stored.dim
        )));
    }
    let window = SummaryWindow {
        nburnin: args.nburnin.unwrap_or(stored.window.nburnin),
        end: args.end.unwrap_or(stored.window.end),
        thin: args.thin.unwrap_or(stored.window.thin),
    };
    window
        .validate(samples.nrows())
        .map_err(|e| CliError::config(format!("window: {e}")))?;

    let pm = match args.predictor {
        Predictor::PoissonMean => predict_samples(&samples, &window, |b| {
            glm_mean_response(&PoissonLog, &x_new, b)
        })?,
        Predictor::PoissonDraw => {
            let mut rng = chain_rng(args.seed.unwrap_or(stored.seed));
            predict_samples_with_rng(&samples, &window, &mut rng, |b, r| {
                poisson_draw(&x_new, b, r)
            })?
        }
    };

    let out = args.out.as_deref().unwrap_or(&args.chain);
    create_dir(out)?;
    let header: Vec<String> = window.rows().map(|i| format!("s{i}")).collect();
    let fmt = |v: f64| match pm.kind {
        PredictionKind::Stochastic => format!("{}", v as i64),
        PredictionKind::Deterministic => fmt_f64(v),
    };
    write_csv(
        &out.join("prediction.csv"),
        &header,
        pm.values
            .row_iter()
            .map(|r| r.iter().map(|&v| fmt(v)).collect::<Vec<_>>()),
    )?;
    let summary = summarize_prediction(&pm);
    write_csv(
        &out.join("prediction_summary.csv"),
        &stats_header("row"),
        summary
            .rows
            .iter()
            .enumerate()
            .map(|(i, c): (usize, &CoordStats)| stats_row(i.to_string(), c)),
    )
}
