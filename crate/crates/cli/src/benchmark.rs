//! The `benchmark` subcommand: trains the latent ODE model and the
//! delay-embedding baselines on the same split and reports horizon-resolved
//! forecast RMSE plus a largest-Lyapunov estimate of each model's free run.

use crate::commands::{generate_series, infer_config_from, train_config_from, Console};
use crate::config::ExperimentConfig;
use crate::data::{build_dataset, Dataset};
use crate::rundir::{write_text, RunDirs};
use crate::svg;
use nbeddyn_core::baselines::{
    delay_embed, sparse_fit, sparse_forecast, sparse_model_to_table, AnalogCatalog,
    AnalogRegression,
};
use nbeddyn_core::dynamics::TimeSeries;
use nbeddyn_core::eval::{forecast_rmse, largest_lyapunov, mean_period, LyapunovConfig};
use nbeddyn_core::io::write_series;
use nbeddyn_core::linalg::Mat;
use nbeddyn_core::nbeddyn::{forecast, infer_initial_condition, save_model, train};
use nbeddyn_core::{Error, Result};

struct Row {
    method: String,
    params: String,
    /// Per configured horizon; `None` renders as DIVERGED.
    rmse: Vec<Option<f64>>,
    lambda: Option<f64>,
}

fn diverged_row(method: &str, params: &str, n_horizons: usize) -> Row {
    Row {
        method: method.into(),
        params: params.into(),
        rmse: vec![None; n_horizons],
        lambda: None,
    }
}

/// Largest Lyapunov exponent of a generated trajectory, or `None` when the
/// trajectory is unusable (non-finite, collapsed, or too short).
fn lambda_of(data: &Mat, dt: f64) -> Option<f64> {
    if !data.is_finite() {
        return None;
    }
    let theiler = mean_period(&data.column(0)).ok()?.round() as usize;
    let cfg = LyapunovConfig {
        theiler,
        ref_stride: 5,
        ..Default::default()
    };
    largest_lyapunov(data, dt, &cfg).ok().map(|e| e.lambda)
}

/// Delay coordinates `[x_s, x_{s-tau}, ...]` of column 0 at index `s`.
fn delay_state(obs: &TimeSeries, s: usize, tau: usize, d_e: usize) -> Vec<f64> {
    (0..d_e).map(|k| obs.values.get(s - k * tau, 0)).collect()
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6e}"),
        None => "DIVERGED".into(),
    }
}

/// Held-out start indices: each forecast window ends at the start index,
/// spaced so the trials tile the test segment.
fn start_indices(cfg: &ExperimentConfig, ds: &Dataset, lead: usize) -> Vec<usize> {
    let max_h = *cfg.evaluation.horizons.iter().max().unwrap();
    let n = cfg.evaluation.test_windows;
    let first = ds.train_len + lead;
    let last = ds.observed.len() - max_h - 2;
    let stride = if n > 1 { ((last - first) / (n - 1)).max(1) } else { 1 };
    (0..n).map(|i| first + i * stride).take_while(|&s| s <= last).collect()
}

pub fn cmd_benchmark(cfg: &ExperimentConfig, dirs: &RunDirs, console: &Console) -> Result<()> {
    cfg.validate_split()?;
    let ds = build_dataset(cfg)?;
    let obs = &ds.observed;
    let horizons = &cfg.evaluation.horizons;
    let max_h = *horizons.iter().max().unwrap();
    let gen_steps = cfg.evaluation.generation_steps;
    let window = cfg.inference.window;
    let mut rows: Vec<Row> = Vec::new();
    let mut overlays: Vec<(String, Vec<f64>)> = Vec::new();

    // --- latent ODE model ---
    let starts = start_indices(cfg, &ds, window);
    let params = format!("d_E={} lambda={}", cfg.model.d_e, cfg.model.lambda);
    console.say(format!("training latent ODE ({params}) ..."));
    let tcfg = train_config_from(cfg)?;
    match train(&ds.train(), cfg.model.d_e, &tcfg) {
        Ok(trained) => {
            save_model(&dirs.models.join("model.json"), &trained)?;
            let icfg = infer_config_from(cfg);
            let predict = |s: usize| -> Result<Mat> {
                let w = obs.window(s + 1 - window, s + 1);
                let inf = infer_initial_condition(&trained, &w, None, &icfg)?;
                Ok(forecast(&trained, &inf.state, max_h)?.values)
            };
            rows.push(score(
                "nbeddyn", &params, obs, &starts, horizons, predict,
            ));
            if let Ok(free) = generate_series(&trained, gen_steps) {
                rows.last_mut().unwrap().lambda = lambda_of(&free, obs.dt);
            }
            let w = obs.window(starts[0] + 1 - window, starts[0] + 1);
            if let Ok(inf) = infer_initial_condition(&trained, &w, None, &icfg) {
                if let Ok(fc) = forecast(&trained, &inf.state, overlay_len(obs, starts[0])) {
                    overlays.push(("nbeddyn".into(), fc.values.column(0)));
                }
            }
        }
        Err(e) => {
            console.say(format!("latent ODE training failed: {e}"));
            rows.push(diverged_row("nbeddyn", &params, horizons.len()));
        }
    }

    // --- analog forecasting ---
    if let Some(a) = &cfg.baselines.analog {
        if obs.dim() != 1 {
            return Err(Error::invalid(
                "baselines.analog needs a scalar observed series",
            ));
        }
        let regression = if a.regression == "locally-linear" {
            AnalogRegression::LocallyLinear
        } else {
            AnalogRegression::LocallyConstant
        };
        for &tau in &a.tau {
            for &d_e in &a.d_e {
                let params = format!("tau={tau} d_E={d_e} k={}", a.k);
                console.say(format!("analog forecasting ({params}) ..."));
                let lead = (d_e - 1) * tau;
                let starts = start_indices(cfg, &ds, lead.max(window));
                let row = (|| -> Result<Row> {
                    let emb = delay_embed(&ds.train(), tau, d_e)?;
                    let catalog = AnalogCatalog::from_embedding(&emb, a.k, regression)?;
                    let predict = |s: usize| {
                        nbeddyn_core::baselines::analog_forecast(
                            &catalog,
                            &delay_state(obs, s, tau, d_e),
                            max_h,
                        )
                    };
                    let mut row = score("analog", &params, obs, &starts, horizons, predict);
                    let q = delay_state(obs, ds.train_len - 1, tau, d_e);
                    if let Ok(free) =
                        nbeddyn_core::baselines::analog_forecast(&catalog, &q, gen_steps)
                    {
                        row.lambda = lambda_of(&free, obs.dt);
                    }
                    if overlays.len() < 4 {
                        if let Ok(fc) = nbeddyn_core::baselines::analog_forecast(
                            &catalog,
                            &delay_state(obs, starts[0], tau, d_e),
                            overlay_len(obs, starts[0]),
                        ) {
                            overlays.push((format!("analog tau={tau} d_E={d_e}"), fc.column(0)));
                        }
                    }
                    Ok(row)
                })();
                rows.push(row.unwrap_or_else(|e| {
                    console.say(format!("analog ({params}) failed: {e}"));
                    diverged_row("analog", &params, horizons.len())
                }));
            }
        }
    }

    // --- sparse regression ---
    if let Some(sp) = &cfg.baselines.sparse {
        let taus: Vec<Option<usize>> = if sp.tau.is_empty() {
            vec![None]
        } else {
            sp.tau.iter().map(|&t| Some(t)).collect()
        };
        for tau in taus {
            let params = match tau {
                Some(t) => format!("tau={t} d_E={} threshold={}", sp.d_e, sp.threshold),
                None => format!("raw threshold={}", sp.threshold),
            };
            console.say(format!("sparse regression ({params}) ..."));
            let row = (|| -> Result<Row> {
                let (train_series, d_e) = match tau {
                    Some(t) => {
                        let emb = delay_embed(&ds.train(), t, sp.d_e)?;
                        let start = (sp.d_e - 1) as f64 * t as f64 * obs.dt;
                        (TimeSeries::new(emb.data, obs.dt, start)?, sp.d_e)
                    }
                    None => (ds.train(), obs.dim()),
                };
                let model = sparse_fit(&train_series, sp.threshold)?;
                let tag = tau.map_or("raw".to_string(), |t| format!("tau{t}"));
                write_text(
                    &dirs.reports.join(format!("sparse_terms_{tag}.csv")),
                    &sparse_model_to_table(&model),
                )?;
                let lead = tau.map_or(0, |t| (d_e - 1) * t);
                let starts = start_indices(cfg, &ds, lead.max(window));
                let state_at = |s: usize| match tau {
                    Some(t) => delay_state(obs, s, t, d_e),
                    None => obs.values.row(s).to_vec(),
                };
                let predict =
                    |s: usize| sparse_forecast(&model, &state_at(s), obs.dt, 1, max_h);
                let mut row = score("sparse", &params, obs, &starts, horizons, predict);
                if let Ok(free) =
                    sparse_forecast(&model, &state_at(ds.train_len - 1), obs.dt, 1, gen_steps)
                {
                    row.lambda = lambda_of(&free, obs.dt);
                }
                if overlays.len() < 5 {
                    if let Ok(fc) = sparse_forecast(
                        &model,
                        &state_at(starts[0]),
                        obs.dt,
                        1,
                        overlay_len(obs, starts[0]),
                    ) {
                        overlays.push((format!("sparse {tag}"), fc.column(0)));
                    }
                }
                Ok(row)
            })();
            rows.push(row.unwrap_or_else(|e| {
                console.say(format!("sparse ({params}) failed: {e}"));
                diverged_row("sparse", &params, horizons.len())
            }));
        }
    }

    // --- report ---
    let mut csv = String::from("method,params");
    for h in horizons {
        csv.push_str(&format!(",rmse_h{h}"));
    }
    csv.push_str(",lambda1\n");
    for r in &rows {
        csv.push_str(&format!("{},{}", r.method, r.params));
        for v in &r.rmse {
            csv.push(',');
            csv.push_str(&fmt_cell(*v));
        }
        csv.push(',');
        csv.push_str(&fmt_cell(r.lambda));
        csv.push('\n');
    }
    let csv_path = dirs.reports.join("benchmark.csv");
    write_text(&csv_path, &csv)?;
    console.say(csv.trim_end().to_string());
    console.say(format!("wrote {}", csv_path.display()));

    // truth vs per-method forecast at the first shared test start
    let s0 = start_indices(cfg, &ds, window)[0];
    let n = overlay_len(obs, s0);
    let mut series = vec![svg::Series::line(
        "truth",
        (0..n)
            .map(|h| (obs.time(s0 + 1 + h), obs.values.get(s0 + 1 + h, 0)))
            .collect(),
    )];
    for (label, vals) in &overlays {
        series.push(svg::Series::line(
            label.clone(),
            vals.iter()
                .enumerate()
                .map(|(h, &v)| (obs.time(s0 + 1 + h), v))
                .collect(),
        ));
    }
    write_text(
        &dirs.figures.join("benchmark_forecasts.svg"),
        &svg::chart("held-out forecasts", "t", "x1", &series),
    )?;
    write_series(&dirs.data.join("observed.csv"), obs)?;
    Ok(())
}

fn overlay_len(obs: &TimeSeries, s0: usize) -> usize {
    200.min(obs.len() - s0 - 2)
}

fn score<F>(
    method: &str,
    params: &str,
    obs: &TimeSeries,
    starts: &[usize],
    horizons: &[usize],
    predict: F,
) -> Row
where
    F: FnMut(usize) -> Result<Mat>,
{
    let max_h = *horizons.iter().max().unwrap();
    match forecast_rmse(obs, starts, max_h, 1, predict) {
        Ok(rep) => Row {
            method: method.into(),
            params: params.into(),
            rmse: horizons.iter().map(|&h| Some(rep.rmse[h - 1])).collect(),
            lambda: None,
        },
        Err(_) => diverged_row(method, params, horizons.len()),
    }
}
