//! Training orchestration: fold partitioning, per-(fold, run) jobs, and
//! averaging into the final model.
//!
//! Each (fold, run) pair is an independent job with its own derived random
//! stream, so jobs can run in any order or in parallel without changing
//! the result. Job outputs are always reduced in (fold, run) order, which
//! keeps the averaged model bitwise reproducible across thread counts.

use crate::coding::{hs_sparse_code, init_dictionary, DictInit, HsParams};
use crate::data::{one_hot, NormalizeMode};
use crate::enhance::{enhance, EnhancedMatrix, EnhancementMap};
use crate::error::{Error, Result};
use crate::rng::{child_seed, partition_seed, seeded_stream};
use crate::solver::{
    code_query, objective_joint, objective_unsupervised, solve_classifier, solve_dictionary,
    update_coefficients, RidgeParams,
};
use ndarray::{Array2, ArrayView2, Axis};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything a training run needs besides the data itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of dictionary atoms.
    pub k: usize,
    /// Number of enhancement nodes; `None` means as many as atoms.
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_mu1")]
    pub mu1: f64,
    #[serde(default = "default_mu2")]
    pub mu2: f64,
    #[serde(default = "default_mu3")]
    pub mu3: f64,
    /// Independent runs per fold.
    #[serde(default = "default_runs")]
    pub runs_r: usize,
    /// Number of folds; one fold trains on the full set.
    #[serde(default = "default_folds")]
    pub folds_t: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_dict_init")]
    pub dict_init: DictInit,
    #[serde(default = "default_normalize")]
    pub normalize: NormalizeMode,
}

fn default_tau() -> f64 {
    1.0
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.01
}
fn default_mu1() -> f64 {
    0.2
}
fn default_mu2() -> f64 {
    0.2
}
fn default_mu3() -> f64 {
    0.1
}
fn default_runs() -> usize {
    5
}
fn default_folds() -> usize {
    3
}
fn default_dict_init() -> DictInit {
    DictInit::GaussianUnitColumns
}
fn default_normalize() -> NormalizeMode {
    NormalizeMode::L2
}

impl TrainConfig {
    /// A config with every hyperparameter at its default for `k` atoms.
    pub fn with_atoms(k: usize) -> Self {
        Self {
            k,
            l: None,
            tau: default_tau(),
            sigma2: default_sigma2(),
            eta: default_eta(),
            mu1: default_mu1(),
            mu2: default_mu2(),
            mu3: default_mu3(),
            runs_r: default_runs(),
            folds_t: default_folds(),
            master_seed: 0,
            dict_init: default_dict_init(),
            normalize: default_normalize(),
        }
    }

    /// Number of enhancement nodes, defaulting to the atom count.
    pub fn enhancement_nodes(&self) -> usize {
        self.l.unwrap_or(self.k)
    }

    pub fn hs_params(&self) -> HsParams {
        HsParams {
            tau: self.tau,
            sigma2: self.sigma2,
            eta: self.eta,
        }
    }

    pub fn ridge_params(&self) -> RidgeParams {
        RidgeParams {
            mu1: self.mu1,
            mu2: self.mu2,
            mu3: self.mu3,
            eta: self.eta,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument {
                name: "TrainConfig.k",
                reason: "at least one dictionary atom is required".into(),
            });
        }
        if self.enhancement_nodes() == 0 {
            return Err(Error::InvalidArgument {
                name: "TrainConfig.l",
                reason: "at least one enhancement node is required".into(),
            });
        }
        if self.runs_r == 0 {
            return Err(Error::InvalidArgument {
                name: "TrainConfig.runs_r",
                reason: "at least one run per fold is required".into(),
            });
        }
        if self.folds_t == 0 || self.folds_t > n {
            return Err(Error::InvalidArgument {
                name: "TrainConfig.folds_t",
                reason: format!(
                    "fold count must be between 1 and the sample count {n}, got {}",
                    self.folds_t
                ),
            });
        }
        if self.folds_t > u16::MAX as usize || self.runs_r > u16::MAX as usize {
            return Err(Error::InvalidArgument {
                name: "TrainConfig",
                reason: "fold and run counts must fit in 16 bits".into(),
            });
        }
        Ok(())
    }
}

/// One (fold, run) job's seed and objective values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub fold: u16,
    pub run: u16,
    pub seed: u64,
    pub objective_unsupervised: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective_joint: Option<f64>,
}

/// The averaged dictionary and label map, the first job's enhancement
/// map, and one provenance record per job.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    /// Averaged learned dictionary, `d x (k + l)`.
    pub dictionary: Array2<f64>,
    /// Averaged label map, `c x (k + l)`; `None` after unsupervised
    /// training.
    pub classifier: Option<Array2<f64>>,
    /// Enhancement map of the (fold 0, run 0) job.
    pub map: EnhancementMap,
    /// Number of classes; zero after unsupervised training.
    pub class_count: usize,
    pub config: TrainConfig,
    pub provenance: Vec<ProvenanceRecord>,
}

impl TrainedModel {
    /// Codes query columns against the averaged dictionary; the label-map
    /// term participates exactly as in the joint coefficient update.
    pub fn code_queries(&self, queries: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let width = self.dictionary.ncols();
        let empty = Array2::<f64>::zeros((0, width));
        let w = self.classifier.as_ref().map_or(empty.view(), |w| w.view());
        code_query(
            queries,
            &self.dictionary.view(),
            &w,
            &self.config.ridge_params(),
        )
    }

    /// Per-class linear scores `W x_q` for each query column.
    pub fn decision_scores(&self, queries: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let w = self.classifier.as_ref().ok_or(Error::InvalidArgument {
            name: "TrainedModel.classifier",
            reason: "an unsupervised model has no label map".into(),
        })?;
        Ok(w.dot(&self.code_queries(queries)?))
    }

    /// Largest-score class per query, lowest class id on ties.
    pub fn predict_argmax(&self, queries: &ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let scores = self.decision_scores(queries)?;
        Ok(scores
            .axis_iter(Axis(1))
            .map(|col| crate::svc::argmax_tie_lowest(&col.to_vec()))
            .collect())
    }

    /// Reconstructs query columns from their codes: `D1 x_q`.
    pub fn reconstruct(&self, queries: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.dictionary.dot(&self.code_queries(queries)?))
    }
}

/// Shuffles sample indices and deals them into `folds_t` nearly equal
/// folds; the first `n % folds_t` folds receive one extra index.
pub fn assign_folds(
    n: usize,
    folds_t: usize,
    stream: &mut crate::rng::RandomStream,
) -> Result<Vec<Vec<usize>>> {
    if folds_t == 0 || folds_t > n {
        return Err(Error::InvalidArgument {
            name: "folds_t",
            reason: format!("fold count must be between 1 and the sample count {n}, got {folds_t}"),
        });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut indices);
    let base = n / folds_t;
    let extra = n % folds_t;
    let mut folds = Vec::with_capacity(folds_t);
    let mut offset = 0;
    for fold in 0..folds_t {
        let size = base + usize::from(fold < extra);
        folds.push(indices[offset..offset + size].to_vec());
        offset += size;
    }
    Ok(folds)
}

/// The sample indices a fold trains on: the other folds' lists
/// concatenated in fold order, or the fold's own list when there is only
/// one fold.
fn training_indices(folds: &[Vec<usize>], fold: usize) -> Vec<usize> {
    if folds.len() == 1 {
        return folds[0].clone();
    }
    folds
        .iter()
        .enumerate()
        .filter(|(u, _)| *u != fold)
        .flat_map(|(_, list)| list.iter().copied())
        .collect()
}

fn select_columns(data: &ArrayView2<'_, f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((data.nrows(), indices.len()));
    for (dst, &src) in indices.iter().enumerate() {
        out.column_mut(dst).assign(&data.column(src));
    }
    out
}

struct JobOutput {
    dictionary: Array2<f64>,
    classifier: Option<Array2<f64>>,
    map: EnhancementMap,
    record: ProvenanceRecord,
}

/// Runs one (fold, run) job end to end on its training columns.
fn run_job(
    y_train: &Array2<f64>,
    labels_train: Option<(&Array2<f64>, usize)>,
    cfg: &TrainConfig,
    fold: u16,
    run: u16,
) -> Result<JobOutput> {
    let seed = child_seed(cfg.master_seed, fold, run);
    let mut stream = seeded_stream(seed);
    let k = cfg.k;
    let l = cfg.enhancement_nodes();
    let ridge = cfg.ridge_params();

    let dict0 = init_dictionary(&y_train.view(), k, cfg.dict_init, &mut stream)?;
    let codes = hs_sparse_code(
        &y_train.view(),
        &dict0.view(),
        &cfg.hs_params(),
        &mut stream,
    )?;
    let map = EnhancementMap::draw(k, l, &mut stream)?;
    let enhanced = enhance(&codes.values.view(), &map)?;

    let dictionary = solve_dictionary(&y_train.view(), &enhanced, cfg.mu1)?;

    let no_labels = Array2::<f64>::zeros((0, y_train.ncols()));
    let no_map = Array2::<f64>::zeros((0, k + l));
    let recoded = update_coefficients(
        &y_train.view(),
        &no_labels.view(),
        &dictionary.view(),
        &no_map.view(),
        &ridge,
        k,
    )?;
    let objective_unsup =
        objective_unsupervised(&y_train.view(), &dictionary.view(), &recoded, cfg.mu1);

    let (classifier, objective_jnt) = match labels_train {
        Some((h, _)) => {
            let w = solve_classifier(&h.view(), &recoded, cfg.mu2)?;
            let value = objective_joint(
                &y_train.view(),
                &h.view(),
                &dictionary.view(),
                &w.view(),
                &recoded,
                &ridge,
            );
            (Some(w), Some(value))
        }
        None => (None, None),
    };

    Ok(JobOutput {
        dictionary,
        classifier,
        map,
        record: ProvenanceRecord {
            fold,
            run,
            seed,
            objective_unsupervised: objective_unsup,
            objective_joint: objective_jnt,
        },
    })
}

fn average_jobs(
    outputs: Vec<JobOutput>,
    folds_t: usize,
    runs_r: usize,
    cfg: &TrainConfig,
    class_count: usize,
) -> TrainedModel {
    let d = outputs[0].dictionary.nrows();
    let width = outputs[0].dictionary.ncols();
    let mut dictionary = Array2::<f64>::zeros((d, width));
    let mut classifier = outputs[0]
        .classifier
        .as_ref()
        .map(|w| Array2::<f64>::zeros((w.nrows(), width)));

    for fold in 0..folds_t {
        let mut fold_dict = Array2::<f64>::zeros((d, width));
        let mut fold_cls = classifier
            .as_ref()
            .map(|w| Array2::<f64>::zeros((w.nrows(), width)));
        for run in 0..runs_r {
            let job = &outputs[fold * runs_r + run];
            fold_dict += &job.dictionary;
            if let (Some(acc), Some(w)) = (fold_cls.as_mut(), job.classifier.as_ref()) {
                *acc += w;
            }
        }
        dictionary += &(fold_dict / runs_r as f64);
        if let (Some(acc), Some(fold_avg)) = (classifier.as_mut(), fold_cls) {
            *acc += &(fold_avg / runs_r as f64);
        }
    }
    dictionary /= folds_t as f64;
    if let Some(acc) = classifier.as_mut() {
        *acc /= folds_t as f64;
    }

    let provenance: Vec<ProvenanceRecord> = outputs.iter().map(|job| job.record.clone()).collect();
    let map = outputs
        .into_iter()
        .next()
        .expect("at least one job ran")
        .map;

    TrainedModel {
        dictionary,
        classifier,
        map,
        class_count,
        config: cfg.clone(),
        provenance,
    }
}

fn run_all_jobs(
    y: &ArrayView2<'_, f64>,
    labels: Option<&[usize]>,
    cfg: &TrainConfig,
    folds: &[Vec<usize>],
) -> Result<Vec<JobOutput>> {
    let folds_t = folds.len();
    let runs_r = cfg.runs_r;
    let class_count = labels.map_or(0, |l| l.iter().max().map_or(0, |&m| m + 1));

    let mut splits: Vec<(Array2<f64>, Option<Array2<f64>>)> = Vec::with_capacity(folds_t);
    for fold in 0..folds_t {
        let indices = training_indices(folds, fold);
        let y_train = select_columns(y, &indices);
        let h_train = match labels {
            Some(all_labels) => {
                let subset: Vec<usize> = indices.iter().map(|&i| all_labels[i]).collect();
                for class in 0..class_count {
                    if !subset.contains(&class) {
                        return Err(Error::MissingClassInFold { class, fold });
                    }
                }
                Some(one_hot(&subset, class_count)?)
            }
            None => None,
        };
        splits.push((y_train, h_train));
    }

    let job_ids: Vec<(u16, u16)> = (0..folds_t)
        .flat_map(|t| (0..runs_r).map(move |r| (t as u16, r as u16)))
        .collect();
    let run_one = |&(fold, run): &(u16, u16)| -> Result<JobOutput> {
        let (y_train, h_train) = &splits[fold as usize];
        let labels_train = h_train.as_ref().map(|h| (h, class_count));
        run_job(y_train, labels_train, cfg, fold, run)
    };

    #[cfg(feature = "parallel")]
    let outputs: Result<Vec<JobOutput>> = job_ids.par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let outputs: Result<Vec<JobOutput>> = job_ids.iter().map(run_one).collect();
    outputs
}

/// Trains without labels on folds drawn from the master seed.
pub fn train_unsupervised(y: &ArrayView2<'_, f64>, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate(y.ncols())?;
    let mut partition = seeded_stream(partition_seed(cfg.master_seed));
    let folds = assign_folds(y.ncols(), cfg.folds_t, &mut partition)?;
    train_unsupervised_with_folds(y, cfg, &folds)
}

/// Trains without labels on explicitly given fold index lists.
pub fn train_unsupervised_with_folds(
    y: &ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    folds: &[Vec<usize>],
) -> Result<TrainedModel> {
    cfg.validate(y.ncols())?;
    let outputs = run_all_jobs(y, None, cfg, folds)?;
    Ok(average_jobs(outputs, folds.len(), cfg.runs_r, cfg, 0))
}

/// Trains with labels on folds drawn from the master seed.
pub fn train_supervised(
    y: &ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate(y.ncols())?;
    let mut partition = seeded_stream(partition_seed(cfg.master_seed));
    let folds = assign_folds(y.ncols(), cfg.folds_t, &mut partition)?;
    train_supervised_with_folds(y, labels, cfg, &folds)
}

/// Trains with labels on explicitly given fold index lists. Every class
/// must appear in every fold's training split.
pub fn train_supervised_with_folds(
    y: &ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &TrainConfig,
    folds: &[Vec<usize>],
) -> Result<TrainedModel> {
    cfg.validate(y.ncols())?;
    if labels.len() != y.ncols() {
        return Err(Error::ShapeMismatch {
            op: "train_supervised",
            left: (y.nrows(), y.ncols()),
            right: (labels.len(), 1),
        });
    }
    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    let outputs = run_all_jobs(y, Some(labels), cfg, folds)?;
    Ok(average_jobs(
        outputs,
        folds.len(),
        cfg.runs_r,
        cfg,
        class_count,
    ))
}

/// Joint coefficient update of a training matrix with its labels under a
/// trained supervised model: the codes a margin classifier trains on.
pub fn update_training_codes(
    model: &TrainedModel,
    y: &ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<EnhancedMatrix> {
    let w = model.classifier.as_ref().ok_or(Error::InvalidArgument {
        name: "TrainedModel.classifier",
        reason: "an unsupervised model has no label map".into(),
    })?;
    let h = one_hot(labels, model.class_count)?;
    update_coefficients(
        y,
        &h.view(),
        &model.dictionary.view(),
        &w.view(),
        &model.config.ridge_params(),
        model.config.k,
    )
}

/// Re-codes a training matrix under a trained model, exposing the
/// enhanced coefficients used for sparsity and reconstruction reports.
pub fn recode_training_matrix(
    model: &TrainedModel,
    y: &ArrayView2<'_, f64>,
) -> Result<EnhancedMatrix> {
    let codes = model.code_queries(y)?;
    EnhancedMatrix::new(codes, model.config.k)
}
