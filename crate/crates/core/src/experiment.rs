//! Seeded Monte Carlo experiments: classification accuracy sweeps and the
//! sum-rate comparison of pairing strategies.
//!
//! Every trial owns the stream `(master_seed, trial_id)`; placement, the
//! train/test split, fitness folds, the GA and pairing each draw from their
//! own derived sub-stream. Trials run in parallel and are aggregated in trial
//! order, so results do not depend on the worker count.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{place_users, Deployment, Label, UserLink};
use crate::error::{Error, Result};
use crate::ga::{self, Fitness, GaConfig, GaResult, SearchSpace};
use crate::noma::{DecodingOrder, LinkBudget, NomaPair};
use crate::pairing::{self, Matching, RoleAssignment};
use crate::rng::RngStream;
use crate::stats::mean_std;
use crate::svm::{self, Sample, SvmModel, TrainOptions};

const PLACEMENT_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;
const GA_STREAM: u64 = 3;
const PAIRING_STREAM: u64 = 4;
const RANDOM_PAIRING_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    Db,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRange {
    pub unit: PowerUnit,
    pub values: Vec<f64>,
}

impl Default for PowerRange {
    fn default() -> Self {
        Self {
            unit: PowerUnit::Db,
            values: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        }
    }
}

impl PowerRange {
    pub fn to_linear(&self, value: f64) -> f64 {
        match self.unit {
            PowerUnit::Db => 10f64.powf(value / 10.0),
            PowerUnit::Linear => value,
        }
    }
}

/// Full parameterization of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_users: usize,
    pub n_train: usize,
    pub beam_radius_km: f64,
    pub theta_range_deg: [f64; 2],
    pub l_pilots: u32,
    pub noise_var: f64,
    pub alpha: f64,
    pub power_range: PowerRange,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Fixed `C` for the untuned classifier (1 when absent).
    pub svm_c: Option<f64>,
    /// Fixed `δ` for the untuned classifier (1 when absent).
    pub svm_width: Option<f64>,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub ga: GaConfig,
    pub c_search: [f64; 2],
    pub width_search: [f64; 2],
    /// Testing-set sizes swept by the accuracy experiments.
    pub n_test_sweep: Vec<usize>,
    /// `(C, δ)` cells for the fixed-parameter accuracy sweep.
    pub fig1a_grid: Vec<[f64; 2]>,
    /// Testing users paired in the sum-rate experiment.
    pub fig2_n_test: usize,
    pub matching: Matching,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_users: 50,
            n_train: 40,
            beam_radius_km: 100.0,
            theta_range_deg: [20.0, 80.0],
            l_pilots: 7,
            noise_var: 1.0,
            alpha: 0.2,
            power_range: PowerRange::default(),
            n_trials: 100,
            master_seed: 20_210_611,
            svm_c: None,
            svm_width: None,
            svm_tol: 1e-3,
            svm_max_passes: 1000,
            ga: GaConfig::default(),
            c_search: [0.1, 15.0],
            width_search: [0.1, 30.0],
            n_test_sweep: (4..=10).collect(),
            fig1a_grid: vec![[2.0, 8.0], [2.0, 30.0], [15.0, 8.0], [15.0, 30.0]],
            fig2_n_test: 9,
            matching: Matching::Uniform,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn deployment(&self) -> Deployment {
        Deployment {
            beam_radius_km: self.beam_radius_km,
            theta_range_deg: self.theta_range_deg,
            noise_var: self.noise_var,
            pilots: self.l_pilots,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace {
            c: self.c_search,
            width: self.width_search,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            tol: self.svm_tol,
            max_passes: self.svm_max_passes,
            standardize: true,
        }
    }

    pub fn default_svm(&self) -> (f64, f64) {
        (self.svm_c.unwrap_or(1.0), self.svm_width.unwrap_or(1.0))
    }

    pub fn test_pool(&self) -> usize {
        self.n_users.saturating_sub(self.n_train)
    }

    /// Checks every invariant; returns warnings for accepted but degenerate settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.n_users < 4 {
            return Err(Error::config("n_users must be at least 4"));
        }
        if self.n_train < 2 || self.n_train + 2 > self.n_users {
            return Err(Error::config(format!(
                "n_train must satisfy 2 <= N <= M - 2, got N = {}, M = {}",
                self.n_train, self.n_users
            )));
        }
        self.deployment()
            .validate()
            .map_err(|e| Error::config(e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.alpha >= 0.5 {
            warnings.push(format!(
                "alpha = {} gives the near user at least half the power; no near/far power asymmetry",
                self.alpha
            ));
        }
        if self.power_range.values.is_empty() {
            return Err(Error::config("power_range.values is empty"));
        }
        for &p in &self.power_range.values {
            let linear = self.power_range.to_linear(p);
            if !(linear >= 0.0 && linear.is_finite()) {
                return Err(Error::config(format!(
                    "transmit power {p} is not a valid level"
                )));
            }
        }
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        for (name, v) in [("svm_c", self.svm_c), ("svm_width", self.svm_width)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.svm_tol.is_nan() || self.svm_tol <= 0.0 || self.svm_max_passes == 0 {
            return Err(Error::config("svm_tol and svm_max_passes must be positive"));
        }
        self.ga.validate()?;
        self.search_space().validate()?;
        if self.n_train / self.ga.folds.max(1) == 0 {
            return Err(Error::config("more GA folds than training users"));
        }
        let pool = self.test_pool();
        if self.n_test_sweep.is_empty() || self.n_test_sweep.iter().any(|&k| k == 0 || k > pool) {
            return Err(Error::config(format!(
                "n_test_sweep entries must lie in [1, {pool}] (users left after training)"
            )));
        }
        if self.fig1a_grid.iter().any(|[c, w]| !(*c > 0.0 && *w > 0.0)) {
            return Err(Error::config("fig1a_grid entries must be positive"));
        }
        if !self.fig1a_grid.contains(&[2.0, 8.0]) {
            return Err(Error::config(
                "fig1a_grid must include the (C = 2, width = 8) cell",
            ));
        }
        if self.fig2_n_test < 2 || self.fig2_n_test > pool {
            return Err(Error::config(format!(
                "fig2_n_test must lie in [2, {pool}]"
            )));
        }
        Ok(warnings)
    }
}

/// One trial's labeled cohort split into training and testing users.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub train: Vec<UserLink>,
    pub test: Vec<UserLink>,
}

pub fn trial_stream(config: &ExperimentConfig, trial_id: u64) -> RngStream {
    RngStream::new(config.master_seed, trial_id)
}

/// Places and labels `n_users` users, then draws the random training set.
pub fn cohort(config: &ExperimentConfig, trial_id: u64) -> Result<Cohort> {
    use rand::seq::SliceRandom;
    let stream = trial_stream(config, trial_id);
    let mut users = place_users(
        config.n_users,
        &config.deployment(),
        &stream.derive(PLACEMENT_STREAM),
    )?;
    pairing::label_users(&mut users)?;
    users.shuffle(&mut stream.derive(SPLIT_STREAM).generator());
    let test = users.split_off(config.n_train);
    Ok(Cohort { train: users, test })
}

/// GA search on the training users followed by a refit at the best `(C, δ)`.
pub fn tuned_classifier(
    config: &ExperimentConfig,
    train: &[Sample],
    stream: &RngStream,
) -> Result<(SvmModel, GaResult)> {
    let fitness = Fitness::stratified(
        train,
        config.ga.folds,
        &mut stream.derive(FOLD_STREAM).generator(),
    )?
    .with_options(config.train_options());
    let result = ga::optimize(
        &fitness,
        &config.search_space(),
        &config.ga,
        &mut stream.derive(GA_STREAM).generator(),
    )?;
    let model = svm::train_with(
        train,
        result.best_c,
        result.best_width,
        config.train_options(),
    )?;
    Ok((model, result))
}

fn prefix_accuracies(model: &SvmModel, test: &[Sample], sweep: &[usize]) -> Result<Vec<f64>> {
    sweep.iter().map(|&k| model.accuracy(&test[..k])).collect()
}

fn run_trials<T: Send>(
    config: &ExperimentConfig,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..config.n_trials as u64).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1aRow {
    pub n_test: usize,
    pub c: f64,
    pub width: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1aReport {
    pub rows: Vec<Fig1aRow>,
    /// `accuracy[trial][cell][sweep point]`.
    #[serde(skip)]
    pub accuracy: Vec<Vec<Vec<f64>>>,
}

/// Accuracy vs. number of testing users for each fixed `(C, δ)` cell.
pub fn run_fig1a(config: &ExperimentConfig) -> Result<Fig1aReport> {
    config.validate()?;
    let sweep = &config.n_test_sweep;
    let accuracy = run_trials(config, |trial| {
        let cohort = cohort(config, trial)?;
        let train = pairing::samples(&cohort.train);
        let test = pairing::samples(&cohort.test);
        config
            .fig1a_grid
            .iter()
            .map(|&[c, width]| {
                let model = svm::train_with(&train, c, width, config.train_options())?;
                prefix_accuracies(&model, &test, sweep)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    for (s, &n_test) in sweep.iter().enumerate() {
        for (cell, &[c, width]) in config.fig1a_grid.iter().enumerate() {
            let values: Vec<f64> = accuracy.iter().map(|t| t[cell][s]).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&values);
            rows.push(Fig1aRow {
                n_test,
                c,
                width,
                accuracy_mean,
                accuracy_std,
            });
        }
    }
    Ok(Fig1aReport { rows, accuracy })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DefaultSvm,
    GaSvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1bRow {
    pub n_test: usize,
    pub method: Method,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1bTrial {
    pub trial_id: u64,
    pub default_accuracy: Vec<f64>,
    pub ga_accuracy: Vec<f64>,
    pub ga_c: f64,
    pub ga_width: f64,
    pub ga_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1bReport {
    pub rows: Vec<Fig1bRow>,
    pub trials: Vec<Fig1bTrial>,
}

/// Accuracy of the fixed default classifier vs. the GA-tuned classifier.
pub fn run_fig1b(config: &ExperimentConfig) -> Result<Fig1bReport> {
    config.validate()?;
    let sweep = &config.n_test_sweep;
    let (c0, w0) = config.default_svm();
    let trials = run_trials(config, |trial| {
        let cohort = cohort(config, trial)?;
        let train = pairing::samples(&cohort.train);
        let test = pairing::samples(&cohort.test);
        let default_model = svm::train_with(&train, c0, w0, config.train_options())?;
        let (tuned, ga) = tuned_classifier(config, &train, &trial_stream(config, trial))?;
        Ok(Fig1bTrial {
            trial_id: trial,
            default_accuracy: prefix_accuracies(&default_model, &test, sweep)?,
            ga_accuracy: prefix_accuracies(&tuned, &test, sweep)?,
            ga_c: ga.best_c,
            ga_width: ga.best_width,
            ga_mse: ga.best_mse,
        })
    })?;

    let mut rows = Vec::new();
    for (s, &n_test) in sweep.iter().enumerate() {
        for method in [Method::DefaultSvm, Method::GaSvm] {
            let values: Vec<f64> = trials
                .iter()
                .map(|t| match method {
                    Method::DefaultSvm => t.default_accuracy[s],
                    Method::GaSvm => t.ga_accuracy[s],
                })
                .collect();
            let (accuracy_mean, accuracy_std) = mean_std(&values);
            rows.push(Fig1bRow {
                n_test,
                method,
                accuracy_mean,
                accuracy_std,
            });
        }
    }
    Ok(Fig1bReport { rows, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStrategy {
    /// GA-SVM classification, one near with one far user.
    Proposed,
    /// Random pairs, SIC at the stronger user.
    ScenarioA,
    /// Random pairs, SIC at the weaker user.
    ScenarioB,
    /// Random pairs served in two equal time slots.
    Tdma,
}

impl RateStrategy {
    pub const ALL: [RateStrategy; 4] =
        [Self::Proposed, Self::ScenarioA, Self::ScenarioB, Self::Tdma];
}

/// Per-trial, per-strategy outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: u64,
    pub strategy: RateStrategy,
    /// Test-set classification accuracy (proposed strategy only).
    pub accuracy: Option<f64>,
    /// Mean per-pair sum rate at each configured power level.
    pub sum_rate: Vec<f64>,
    pub pairs: usize,
    pub leftover: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub p_s: f64,
    pub strategy: RateStrategy,
    pub sum_rate_mean: f64,
    pub sum_rate_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Report {
    pub rows: Vec<Fig2Row>,
    pub trials: Vec<TrialResult>,
}

impl Fig2Report {
    /// Per-trial sum rates of `strategy` at power index `p`, in trial order.
    pub fn series(&self, strategy: RateStrategy, p: usize) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.strategy == strategy)
            .map(|t| t.sum_rate[p])
            .collect()
    }
}

fn mean_pair_rate(
    pairs: &[pairing::UserPair],
    budget: LinkBudget,
    rate: impl Fn(&NomaPair) -> f64,
) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in pairs {
        total += rate(&NomaPair::new(p.near.clone(), p.far.clone(), budget)?);
    }
    Ok(total / pairs.len() as f64)
}

/// Sum rate vs. transmit power for the proposed, random and TDMA strategies.
///
/// A trial's sum rate is the mean over its NOMA pairs; a strategy that forms
/// no pair scores zero.
pub fn run_fig2(config: &ExperimentConfig) -> Result<Fig2Report> {
    config.validate()?;
    let powers: Vec<f64> = config
        .power_range
        .values
        .iter()
        .map(|&v| config.power_range.to_linear(v))
        .collect();
    let per_trial = run_trials(config, |trial| {
        let stream = trial_stream(config, trial);
        let cohort = cohort(config, trial)?;
        let train = pairing::samples(&cohort.train);
        let (model, _) = tuned_classifier(config, &train, &stream)?;
        let testing = &cohort.test[..config.fig2_n_test];

        let (near, far): (Vec<UserLink>, Vec<UserLink>) = testing
            .iter()
            .cloned()
            .partition(|u| model.classify(&pairing::features(u)) == Label::Near);
        let accuracy = svm::accuracy(testing.iter().map(|u| {
            (
                model.classify(&pairing::features(u)),
                u.label.expect("cohort users are labeled"),
            )
        }))?;
        let proposed = pairing::propose_pairs(
            near,
            far,
            config.matching,
            &mut stream.derive(PAIRING_STREAM).generator(),
        );
        let random = pairing::random_pairs(
            testing,
            RoleAssignment::ScenarioA,
            &mut stream.derive(RANDOM_PAIRING_STREAM).generator(),
        )?;

        let mut results: Vec<TrialResult> = RateStrategy::ALL
            .iter()
            .map(|&strategy| {
                let outcome = if strategy == RateStrategy::Proposed {
                    &proposed
                } else {
                    &random
                };
                TrialResult {
                    trial_id: trial,
                    strategy,
                    accuracy: (strategy == RateStrategy::Proposed).then_some(accuracy),
                    sum_rate: Vec::with_capacity(powers.len()),
                    pairs: outcome.pairs.len(),
                    leftover: outcome.leftover.len(),
                }
            })
            .collect();
        for &p_s in &powers {
            let budget = LinkBudget {
                alpha: config.alpha,
                p_s,
                noise_var: config.noise_var,
                pilots: config.l_pilots,
            };
            let correct = |p: &NomaPair| p.noma_rates(DecodingOrder::Correct).sum_rate;
            let rates = [
                mean_pair_rate(&proposed.pairs, budget, correct)?,
                mean_pair_rate(&random.pairs, budget, correct)?,
                mean_pair_rate(&random.pairs, budget, |p| {
                    p.noma_rates(DecodingOrder::Disrupted).sum_rate
                })?,
                mean_pair_rate(&random.pairs, budget, |p| p.tdma_rates().sum_rate)?,
            ];
            for (r, rate) in results.iter_mut().zip(rates) {
                r.sum_rate.push(rate);
            }
        }
        Ok(results)
    })?;
    let trials: Vec<TrialResult> = per_trial.into_iter().flatten().collect();

    let mut report = Fig2Report {
        rows: Vec::new(),
        trials,
    };
    for (p, &value) in config.power_range.values.iter().enumerate() {
        for strategy in RateStrategy::ALL {
            let (sum_rate_mean, sum_rate_std) = mean_std(&report.series(strategy, p));
            report.rows.push(Fig2Row {
                p_s: value,
                strategy,
                sum_rate_mean,
                sum_rate_std,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: SvmModel,
    pub ga: GaResult,
    pub training_accuracy: f64,
    pub n_samples: usize,
}

#[derive(Debug, Deserialize)]
struct DataRecord {
    theta_deg: f64,
    gain_est: f64,
    label: i8,
}

/// Reads training samples from a CSV with columns `theta_deg,gain_est,label`.
pub fn load_samples(path: &Path) -> Result<Vec<Sample>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (line, record) in reader.deserialize::<DataRecord>().enumerate() {
        let record = record.map_err(|e| Error::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let label = match record.label {
            1 => Label::Near,
            -1 => Label::Far,
            other => {
                return Err(Error::Data {
                    path: path.to_path_buf(),
                    message: format!("row {}: label {other} is not -1 or 1", line + 1),
                })
            }
        };
        out.push(Sample::new([record.theta_deg, record.gain_est], label));
    }
    Ok(out)
}

/// GA-SVM training on a loaded dataset or on trial 0's training users.
pub fn cmd_train(config: &ExperimentConfig, data_path: Option<&Path>) -> Result<TrainReport> {
    config.validate()?;
    let samples = match data_path {
        Some(path) => load_samples(path)?,
        None => pairing::samples(&cohort(config, 0)?.train),
    };
    let (model, ga) = tuned_classifier(config, &samples, &trial_stream(config, 0))?;
    Ok(TrainReport {
        training_accuracy: model.accuracy(&samples)?,
        n_samples: samples.len(),
        model,
        ga,
    })
}
