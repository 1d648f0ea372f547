//! Subcommand implementations (except `benchmark`, which lives in its own
//! module).

use crate::config::ExperimentConfig;
use crate::data::build_dataset;
use crate::rundir::{write_text, RunDirs};
use crate::svg;
use nbeddyn_core::baselines::{
    delay_embed, embedding_dim_fnn, lag_by_autocorrelation, lag_by_mutual_information,
};
use nbeddyn_core::dynamics::TimeSeries;
use nbeddyn_core::eval::{largest_lyapunov, mean_period, spectrum_over, LyapunovConfig};
use nbeddyn_core::io::{read_series, write_series};
use nbeddyn_core::linalg::Mat;
use nbeddyn_core::nbeddyn::{
    forecast, infer_initial_condition, load_model, save_model, train_with_callback, InferConfig,
    LatentInit, ModelArch, TrainConfig, TrainedModel,
};
use nbeddyn_core::num_core::{flow_trajectory, AdamConfig, IntegratorConfig, StepDecay};
use nbeddyn_core::{Error, Result};
use std::path::Path;

/// Console output gate: everything except hard errors goes through here.
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

pub fn train_config_from(cfg: &ExperimentConfig) -> Result<TrainConfig> {
    let m = &cfg.model;
    let arch = match m.architecture.as_str() {
        "bilinear" => ModelArch::bilinear(),
        "linear" => ModelArch::linear(),
        other => return Err(Error::invalid(format!("model.architecture: {other:?}"))),
    };
    let decay = match (m.decay_factor, m.decay_every) {
        (Some(factor), Some(every)) => Some(StepDecay { factor, every }),
        _ => None,
    };
    Ok(TrainConfig {
        lambda: m.lambda,
        epochs: m.epochs,
        theta_step: m.theta_step,
        latent_step: m.latent_step,
        decay,
        seed: cfg.seed,
        energy_reg: m.energy_reg,
        latent_init: match m.latent_init_tau {
            Some(tau) => LatentInit::Delay { tau },
            None => LatentInit::Random,
        },
        latent_init_scale: m.latent_init_scale,
        theta_init_scale: m.theta_init_scale,
        integrator: IntegratorConfig {
            dt: cfg.dataset.dt,
            substeps: 1,
        },
        arch,
        ..Default::default()
    })
}

pub fn infer_config_from(cfg: &ExperimentConfig) -> InferConfig {
    InferConfig {
        adam: AdamConfig {
            step: cfg.inference.step,
            iterations: cfg.inference.iterations,
            ..Default::default()
        },
        seed: cfg.seed,
        ..Default::default()
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig, dirs: &RunDirs, console: &Console) -> Result<()> {
    let ds = build_dataset(cfg)?;
    let truth_path = dirs.data.join("truth.csv");
    let obs_path = dirs.data.join("observed.csv");
    write_series(&truth_path, &ds.truth)?;
    write_series(&obs_path, &ds.observed)?;
    console.say(format!(
        "dataset {}: {} samples ({} train / {} test), dt {}, truth {}-d, observed {}-d{}",
        cfg.dataset.system,
        ds.observed.len(),
        ds.train_len,
        ds.observed.len() - ds.train_len,
        ds.observed.dt,
        ds.truth.dim(),
        ds.observed.dim(),
        if ds.norm.is_some() { ", standardized" } else { "" }
    ));
    console.say(format!("wrote {}", truth_path.display()));
    console.say(format!("wrote {}", obs_path.display()));
    Ok(())
}

/// Scatter panels of the current latent trajectory, for the training
/// snapshots.
fn latent_snapshot_svg(epoch: usize, y: &Mat, dt: f64) -> String {
    let mut panels = Vec::new();
    match y.cols() {
        0 => {}
        1 => {
            let pts = (0..y.rows())
                .map(|t| (t as f64 * dt, y.get(t, 0)))
                .collect();
            panels.push(svg::Series::line("y1(t)", pts));
        }
        cols => {
            let pts = (0..y.rows()).map(|t| (y.get(t, 0), y.get(t, 1))).collect();
            panels.push(svg::Series::scatter("y1 vs y2", pts));
            if cols >= 3 {
                let pts = (0..y.rows()).map(|t| (y.get(t, 0), y.get(t, 2))).collect();
                panels.push(svg::Series::scatter("y1 vs y3", pts));
            }
        }
    }
    svg::chart(
        &format!("latent trajectory, epoch {epoch}"),
        "y1",
        "y2 / y3",
        &panels,
    )
}

pub fn cmd_train(cfg: &ExperimentConfig, dirs: &RunDirs, console: &Console) -> Result<()> {
    let ds = build_dataset(cfg)?;
    let train_series = ds.train();
    let tcfg = train_config_from(cfg)?;
    let snapshot_every = cfg.model.snapshot_every;
    let mut snapshots: Vec<(usize, String)> = Vec::new();
    let trained = train_with_callback(&train_series, cfg.model.d_e, &tcfg, |epoch, _, y, _| {
        if snapshot_every > 0 && epoch % snapshot_every == 0 {
            snapshots.push((epoch, latent_snapshot_svg(epoch, y, train_series.dt)));
        }
    })?;

    for (epoch, svg_text) in &snapshots {
        write_text(
            &dirs.figures.join(format!("latents_epoch_{epoch:06}.svg")),
            svg_text,
        )?;
    }
    let mut loss_csv = String::from("epoch,loss\n");
    for (e, l) in trained.loss_history.iter().enumerate() {
        loss_csv.push_str(&format!("{e},{l}\n"));
    }
    write_text(&dirs.reports.join("loss_history.csv"), &loss_csv)?;
    let model_path = dirs.models.join("model.json");
    save_model(&model_path, &trained)?;
    console.say(format!("wrote {}", model_path.display()));

    let best = trained
        .loss_history
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    console.say(format!(
        "trained d_E={} for {} epochs: best loss {best:.6e}, one-step train RMSE {:.3e}",
        cfg.model.d_e,
        trained.loss_history.len(),
        trained.train_one_step_rmse()?
    ));
    if let Some(epoch) = trained.diverged_at {
        // artifacts above hold the best finite checkpoint
        return Err(Error::OptimizationDiverged { iteration: epoch });
    }
    Ok(())
}

pub struct ForecastArgs<'a> {
    pub model: &'a Path,
    pub obs: &'a Path,
    pub horizon: usize,
    pub truth: Option<&'a Path>,
}

pub fn cmd_forecast(
    cfg: &ExperimentConfig,
    dirs: &RunDirs,
    console: &Console,
    args: &ForecastArgs,
) -> Result<()> {
    if args.horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let trained = load_model(args.model)?;
    let window = read_series(args.obs)?;
    let icfg = infer_config_from(cfg);
    let inferred = infer_initial_condition(
        &trained,
        &window.series,
        window.mask.as_deref(),
        &icfg,
    )?;
    console.say(format!(
        "inference: loss {:.3e} -> {:.3e} over {} iterations",
        inferred.initial_loss, inferred.final_loss, icfg.adam.iterations
    ));
    let fc = forecast(&trained, &inferred.state, args.horizon)?;
    // forecast times continue the observation window
    let last_t = window.series.time(window.series.len() - 1);
    let fc = TimeSeries::new(fc.values.clone(), fc.dt, last_t + fc.dt)?;
    let fc_path = dirs.reports.join("forecast.csv");
    write_series(&fc_path, &fc)?;
    console.say(format!("wrote {}", fc_path.display()));

    let mut series = vec![
        svg::Series::scatter(
            "observed window",
            (0..window.series.len())
                .map(|t| (window.series.time(t), window.series.values.get(t, 0)))
                .collect(),
        ),
        svg::Series::line(
            "forecast",
            (0..fc.len()).map(|t| (fc.time(t), fc.values.get(t, 0))).collect(),
        ),
    ];
    if let Some(truth_path) = args.truth {
        let truth = read_series(truth_path)?.series;
        series.push(svg::Series::line(
            "truth",
            (0..truth.len())
                .map(|t| (truth.time(t), truth.values.get(t, 0)))
                .collect(),
        ));
        // MSE over the overlap, matching forecast times to truth samples
        let mut sq = 0.0;
        let mut count = 0usize;
        for t in 0..truth.len() {
            let k = ((truth.time(t) - fc.start_time) / fc.dt).round() as i64;
            if k >= 0 && (k as usize) < fc.len() {
                for c in 0..fc.dim().min(truth.dim()) {
                    let e = truth.values.get(t, c) - fc.values.get(k as usize, c);
                    sq += e * e;
                    count += 1;
                }
            }
        }
        if count > 0 {
            console.say(format!("forecast MSE vs truth: {:.6e}", sq / count as f64));
        }
    }
    let svg_path = dirs.figures.join("forecast.svg");
    write_text(&svg_path, &svg::chart("forecast", "t", "x1", &series))?;
    console.say(format!("wrote {}", svg_path.display()));
    Ok(())
}

pub fn cmd_spectrum(dirs: &RunDirs, console: &Console, model_path: &Path) -> Result<()> {
    let trained = load_model(model_path)?;
    let lt = &trained.train_latents;
    if lt.len() < 2 {
        return Err(Error::ModelSchema(
            "model file has no stored latent trajectory".into(),
        ));
    }
    // evenly subsampled training states
    let samples = lt.len().min(200);
    let stride = lt.len() / samples;
    let d = trained.model.n_obs() + trained.model.latent_dim();
    let mut states = Mat::zeros(samples, d);
    for (i, row) in (0..samples).map(|i| (i, i * stride)) {
        states.row_mut(i).copy_from_slice(&lt.augmented(row));
    }
    let reports = spectrum_over(&trained.model, &states)?;
    let n_ranks = reports[0].eigenvalues.len();
    let mut mean_moduli = vec![0.0; n_ranks];
    for r in &reports {
        for (k, m) in r.moduli().iter().enumerate() {
            mean_moduli[k] += m / reports.len() as f64;
        }
    }
    let mut eff: Vec<usize> = reports.iter().map(|r| r.effective_dim).collect();
    eff.sort_unstable();
    let eff_median = eff[eff.len() / 2];

    let mut csv = String::from("rank,mean_modulus\n");
    for (k, m) in mean_moduli.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", k + 1, m));
    }
    let csv_path = dirs.reports.join("spectrum.csv");
    write_text(&csv_path, &csv)?;
    let labels: Vec<String> = (1..=n_ranks).map(|k| format!("rank {k}")).collect();
    write_text(
        &dirs.figures.join("spectrum.svg"),
        &svg::bar_chart("Jacobian eigenvalue moduli", "mean modulus", &labels, &mean_moduli),
    )?;
    console.say(format!(
        "spectrum over {} states: mean moduli {:?}",
        reports.len(),
        mean_moduli.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()
    ));
    console.say(format!("effective dimension (median): {eff_median}"));
    console.say(format!("wrote {}", csv_path.display()));
    Ok(())
}

pub fn cmd_embed_params(cfg: &ExperimentConfig, dirs: &RunDirs, console: &Console) -> Result<()> {
    let ds = build_dataset(cfg)?;
    let train = ds.train();
    if train.dim() != 1 {
        return Err(Error::invalid(
            "embed-params needs a scalar observed series",
        ));
    }
    let max_lag = (train.len() / 4).min(100);
    let mi = lag_by_mutual_information(&train, max_lag, 32)?;
    let corr = lag_by_autocorrelation(&train, max_lag)?;
    // FNN is O(n^2); a prefix keeps it tractable on long series
    let fnn_input = train.window(0, train.len().min(4_000));
    let d_e = embedding_dim_fnn(&fnn_input, mi.tau, 10, 10.0, 2.0)?;
    console.say(format!(
        "tau_MI = {}{}",
        mi.tau,
        if mi.fallback { " (fallback: no local minimum)" } else { "" }
    ));
    console.say(format!(
        "tau_Corr = {}{}",
        corr.tau,
        if corr.fallback { " (fallback: no 1/e crossing)" } else { "" }
    ));
    console.say(format!("d_E(FNN) = {d_e}"));
    let csv = format!(
        "estimator,value,fallback\ntau_mi,{},{}\ntau_corr,{},{}\nd_e_fnn,{d_e},false\n",
        mi.tau, mi.fallback, corr.tau, corr.fallback
    );
    let path = dirs.reports.join("embed_params.csv");
    write_text(&path, &csv)?;
    console.say(format!("wrote {}", path.display()));
    Ok(())
}

pub struct LyapunovArgs<'a> {
    pub input: Option<&'a Path>,
    pub tau: Option<usize>,
    pub dim: Option<usize>,
}

pub fn cmd_lyapunov(
    cfg: &ExperimentConfig,
    dirs: &RunDirs,
    console: &Console,
    args: &LyapunovArgs,
) -> Result<()> {
    let series = match args.input {
        Some(path) => read_series(path)?.series,
        None => build_dataset(cfg)?.truth,
    };
    let (data, dt) = if series.dim() == 1 {
        let tau = match args.tau {
            Some(t) => t,
            None => lag_by_mutual_information(&series, (series.len() / 4).min(100), 32)?.tau,
        };
        let dim = match args.dim {
            Some(d) => d,
            None => embedding_dim_fnn(&series, tau, 10, 10.0, 2.0)?,
        };
        console.say(format!("embedding scalar series with tau={tau}, d_E={dim}"));
        (delay_embed(&series, tau, dim)?.data, series.dt)
    } else {
        (series.values.clone(), series.dt)
    };
    let theiler = mean_period(&data.column(0))?.round() as usize;
    let lcfg = LyapunovConfig {
        theiler,
        ref_stride: 5,
        ..Default::default()
    };
    let est = largest_lyapunov(&data, dt, &lcfg)?;
    console.say(format!(
        "largest Lyapunov exponent: {:.4} (theiler {theiler}, fit steps {}..{}, {} pairs)",
        est.lambda, est.fit_range.0, est.fit_range.1, est.pairs
    ));
    let mut csv = String::from("step,mean_log_divergence\n");
    for (k, v) in est.curve.iter().enumerate() {
        csv.push_str(&format!("{k},{v}\n"));
    }
    let path = dirs.reports.join("lyapunov.csv");
    write_text(&path, &csv)?;
    console.say(format!("wrote {}", path.display()));
    Ok(())
}

/// Generate a free-running series from a trained model, starting at a
/// stored training state.
pub fn generate_series(trained: &TrainedModel, steps: usize) -> Result<Mat> {
    let lt = &trained.train_latents;
    let state = lt.augmented(lt.len() - 1);
    let cfg = IntegratorConfig {
        dt: trained.train_dt,
        substeps: 1,
    };
    flow_trajectory(&trained.model, &state, &cfg, steps)
}
