//! The five commands behind the CLI verbs. Each loads what it needs,
//! computes in memory, writes its output files once, and hands back the
//! report for `report.json`.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Axis};
use rvfldl::coding::CoefficientMatrix;
use rvfldl::data::{apply_normalization, load_model, save_model};
use rvfldl::metrics::{accuracy, relative_reconstruction_error, ssim};
use rvfldl::solver::code_query;
use rvfldl::svc::{argmax_tie_lowest, svc_train};
use rvfldl::train::{
    recode_training_matrix, train_supervised, train_unsupervised, update_training_codes,
    TrainedModel,
};
use rvfldl::{Error, Result};

use crate::config::{load_features, load_labeled, load_query, require_file, RunConfig, TaskTag};
use crate::reports::{write_pgm, write_predictions_csv, write_ssim_csv, Report};

pub struct SvcOverrides {
    pub argmax: bool,
    pub degree: Option<u32>,
    pub reg_c: Option<f64>,
}

fn load_model_checked(cfg: &RunConfig) -> Result<TrainedModel> {
    let path = cfg.require_path("model_in")?;
    require_file(path)?;
    load_model(path)
}

fn provenance_means(model: &TrainedModel) -> (f64, Option<f64>) {
    let records = &model.provenance;
    let unsup = records
        .iter()
        .map(|r| r.objective_unsupervised)
        .sum::<f64>()
        / records.len() as f64;
    let joint = records
        .iter()
        .map(|r| r.objective_joint)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    (unsup, joint)
}

pub fn cmd_train(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Report> {
    let mut train_cfg = cfg.require_train()?.clone();
    if let Some(s) = seed {
        train_cfg.master_seed = s;
    }
    let images = cfg.require_path("train_images")?;
    let supervised = cfg.task == TaskTag::TrainSup;
    let (mut y, labels) = if supervised {
        let ds = load_labeled(images, cfg.train_labels.as_deref())?;
        (ds.data, Some(ds.labels))
    } else {
        (load_features(images)?, None)
    };
    apply_normalization(&mut y, train_cfg.normalize)?;
    let model = match &labels {
        Some(l) => train_supervised(&y.view(), l, &train_cfg)?,
        None => train_unsupervised(&y.view(), &train_cfg)?,
    };

    let model_name = cfg
        .model_out
        .clone()
        .unwrap_or_else(|| PathBuf::from("model.rvfldl"));
    let model_path = if model_name.is_absolute() {
        model_name.clone()
    } else {
        out.join(&model_name)
    };
    if let Some(parent) = model_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    save_model(&model_path, &model)?;

    let (unsup_mean, joint_mean) = provenance_means(&model);
    let mut report = Report::for_task(cfg.task);
    report.samples = Some(y.ncols());
    if supervised {
        report.classes = Some(model.class_count);
    }
    report.model_path = Some(model_name.display().to_string());
    report.objective_unsupervised_mean = Some(unsup_mean);
    report.objective_joint_mean = joint_mean;
    Ok(report)
}

pub fn cmd_classify(cfg: &RunConfig, out: &Path, overrides: &SvcOverrides) -> Result<Report> {
    let model = load_model_checked(cfg)?;
    let (mut queries, truth) = load_query(
        cfg.require_path("query_images")?,
        cfg.query_labels.as_deref(),
    )?;
    apply_normalization(&mut queries, model.config.normalize)?;

    let argmax = overrides.argmax || cfg.svc.argmax;
    let degree = overrides.degree.unwrap_or(cfg.svc.degree);
    let reg_c = overrides.reg_c.unwrap_or(cfg.svc.reg_c);

    let (class_ids, predicted, scores) = if argmax {
        let scores = model.decision_scores(&queries.view())?;
        let predicted = scores
            .axis_iter(Axis(1))
            .map(|col| argmax_tie_lowest(&col.to_vec()))
            .collect::<Vec<usize>>();
        (
            (0..model.class_count).collect::<Vec<usize>>(),
            predicted,
            scores,
        )
    } else {
        let train_ds = load_labeled(
            cfg.require_path("train_images")?,
            cfg.train_labels.as_deref(),
        )?;
        let mut y_train = train_ds.data;
        apply_normalization(&mut y_train, model.config.normalize)?;
        let codes = update_training_codes(&model, &y_train.view(), &train_ds.labels)?;
        let svc = svc_train(
            &codes.values.view(),
            &train_ds.labels,
            degree,
            reg_c,
            cfg.svc.tol,
        )?;
        let query_codes = model.code_queries(&queries.view())?;
        let predicted = svc.predict(&query_codes.view())?;
        let scores = svc.decision_values(&query_codes.view())?;
        (svc.class_ids().to_vec(), predicted, scores)
    };

    write_predictions_csv(
        &out.join("predictions.csv"),
        &class_ids,
        &predicted,
        &scores.view(),
    )?;

    let mut report = Report::for_task(cfg.task);
    report.samples = Some(queries.ncols());
    report.classes = Some(class_ids.len());
    report.predictions_path = Some("predictions.csv".into());
    if let Some(truth) = &truth {
        report.accuracy = Some(accuracy(&predicted, truth)?);
    }
    Ok(report)
}

pub fn cmd_reconstruct(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let model = load_model_checked(cfg)?;
    let (mut queries, _) = load_query(
        cfg.require_path("query_images")?,
        cfg.query_labels.as_deref(),
    )?;
    apply_normalization(&mut queries, model.config.normalize)?;

    let width = model.dictionary.ncols();
    let no_label_map = Array2::<f64>::zeros((0, width));
    let codes = code_query(
        &queries.view(),
        &model.dictionary.view(),
        &no_label_map.view(),
        &model.config.ridge_params(),
    )?;
    let recon = model.dictionary.dot(&codes);

    let range = queries
        .iter()
        .fold(f64::MIN_POSITIVE, |m, &v| m.max(v.abs()));
    let mut values = Vec::with_capacity(queries.ncols());
    for j in 0..queries.ncols() {
        let original = queries.column(j).insert_axis(Axis(0));
        let restored = recon.column(j).insert_axis(Axis(0));
        values.push(ssim(&original, &restored, range, false)?);
    }
    write_ssim_csv(&out.join("ssim.csv"), &values)?;

    let mut pgm_count = None;
    if cfg.write_pgm {
        let d = queries.nrows();
        let side = (d as f64).sqrt().round() as usize;
        if side * side == d {
            let dir = out.join("pgm");
            std::fs::create_dir_all(&dir)?;
            for j in 0..recon.ncols() {
                let pixels: Vec<f64> = recon.column(j).to_vec();
                write_pgm(&dir.join(format!("recon_{j:05}.pgm")), &pixels, side)?;
            }
            pgm_count = Some(recon.ncols());
        } else {
            log::warn!("pixel count {d} is not a perfect square; skipping PGM output");
        }
    }

    let mut report = Report::for_task(cfg.task);
    report.samples = Some(queries.ncols());
    report.mean_ssim = Some(values.iter().sum::<f64>() / values.len().max(1) as f64);
    report.min_ssim = values.iter().copied().reduce(f64::min);
    report.ssim_path = Some("ssim.csv".into());
    report.pgm_count = pgm_count;
    Ok(report)
}

pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let _ = out;
    let model = load_model_checked(cfg)?;
    let (mut y, _) = load_query(
        cfg.require_path("query_images")?,
        cfg.query_labels.as_deref(),
    )?;
    apply_normalization(&mut y, model.config.normalize)?;

    let recode = recode_training_matrix(&model, &y.view())?;
    let base_block = recode.values.slice(s![..model.config.k, ..]).to_owned();
    let without = CoefficientMatrix::new(base_block).effective_sparsity();
    let with = CoefficientMatrix::new(recode.values.clone()).effective_sparsity();
    let error = relative_reconstruction_error(&y.view(), &model.dictionary.view(), &recode)?;

    let mut report = Report::for_task(cfg.task);
    report.samples = Some(y.ncols());
    report.sparsity_without = Some(without);
    report.sparsity_with = Some(with);
    report.sparsity_ratio = Some(with / without);
    report.relative_reconstruction_error = Some(error);
    Ok(report)
}

fn list_or<T: Copy>(list: &Option<Vec<T>>, base: T, name: &str) -> Result<Vec<T>> {
    match list {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("sweep grid \"{name}\" is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Report> {
    let base = cfg.require_train()?.clone();
    let grid = cfg.sweep.clone().unwrap_or_default();
    let mu1s = list_or(&grid.mu1, base.mu1, "mu1")?;
    let mu2s = list_or(&grid.mu2, base.mu2, "mu2")?;
    let mu3s = list_or(&grid.mu3, base.mu3, "mu3")?;
    let degrees = list_or(&grid.degree, cfg.svc.degree, "degree")?;
    let reg_cs = list_or(&grid.reg_c, cfg.svc.reg_c, "reg_c")?;
    let seeds = match seed {
        Some(s) => vec![s],
        None => list_or(&grid.seeds, base.master_seed, "seeds")?,
    };

    let train_ds = load_labeled(
        cfg.require_path("train_images")?,
        cfg.train_labels.as_deref(),
    )?;
    let query_images = cfg.require_path("query_images")?;
    let query_ds = load_labeled(query_images, cfg.query_labels.as_deref())?;
    let mut y_train = train_ds.data;
    let mut y_query = query_ds.data;
    apply_normalization(&mut y_train, base.normalize)?;
    apply_normalization(&mut y_query, base.normalize)?;

    let mut points = Vec::new();
    let mut seen = Vec::new();
    for &mu1 in &mu1s {
        for &mu2 in &mu2s {
            for &mu3 in &mu3s {
                for &degree in &degrees {
                    for &reg_c in &reg_cs {
                        let key = (
                            mu1.to_bits(),
                            mu2.to_bits(),
                            mu3.to_bits(),
                            degree,
                            reg_c.to_bits(),
                        );
                        if seen.contains(&key) {
                            log::warn!(
                                "duplicate grid point (mu1={mu1}, mu2={mu2}, mu3={mu3}, \
                                 degree={degree}, reg_c={reg_c}) skipped"
                            );
                            continue;
                        }
                        seen.push(key);
                        points.push((mu1, mu2, mu3, degree, reg_c));
                    }
                }
            }
        }
    }

    let mut csv = String::from("mu1,mu2,mu3,degree,reg_c,accuracy_mean,accuracy_std\n");
    let mut best = f64::NEG_INFINITY;
    for &(mu1, mu2, mu3, degree, reg_c) in &points {
        let mut accs = Vec::with_capacity(seeds.len());
        for &master in &seeds {
            let mut tc = base.clone();
            tc.mu1 = mu1;
            tc.mu2 = mu2;
            tc.mu3 = mu3;
            tc.master_seed = master;
            let model = train_supervised(&y_train.view(), &train_ds.labels, &tc)?;
            let codes = update_training_codes(&model, &y_train.view(), &train_ds.labels)?;
            let svc = svc_train(
                &codes.values.view(),
                &train_ds.labels,
                degree,
                reg_c,
                cfg.svc.tol,
            )?;
            let query_codes = model.code_queries(&y_query.view())?;
            let predicted = svc.predict(&query_codes.view())?;
            accs.push(accuracy(&predicted, &query_ds.labels)?);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let std = population_std(&accs, mean);
        best = best.max(mean);
        csv.push_str(&format!(
            "{mu1},{mu2},{mu3},{degree},{reg_c},{mean},{std}\n"
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv)?;

    let mut report = Report::for_task(cfg.task);
    report.samples = Some(y_train.ncols());
    report.grid_points = Some(points.len());
    report.csv_path = Some("sweep.csv".into());
    report.best_accuracy_mean = Some(best);
    Ok(report)
}
