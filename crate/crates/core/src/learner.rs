//! Pool-based active-learning loop.
//!
//! Each iteration trains one GP per target on the labeled cases, measures the
//! error and predicted uncertainty over the unlabeled cases, picks one case to
//! query, labels it through the oracle and moves it into the labeled set.
//!
//! Randomness is split into independent ChaCha8 streams derived from the run
//! seed: the initial sample (stream 0), random queries (stream 1) and the
//! hyperparameter restarts (one stream per iteration and target). Runs that
//! share a seed therefore share their initial sample whatever the strategy.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encode::{normalize_targets, TargetScaler};
use crate::error::{Error, Result};
use crate::gp::{
    fit_with_distances, optimize_hyper_with, GpModel, HyperSearch, KernelHyper, PairwiseSqDist,
    Prediction, TrainingSet,
};
use crate::linalg::squared_distance;
use crate::metrics::{compute_metrics, IterationMetrics};
use crate::oracle::{Oracle, Target, TargetVector, TARGET_COUNT};
use crate::pool::Pool;
use crate::CaseId;

const INIT_STREAM: u64 = 0;
const QUERY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryStrategy {
    /// Largest predicted std of one target.
    SingleTarget(Target),
    /// Largest geometric mean of the six predicted stds.
    JointGeometricMean,
    Random,
}

impl QueryStrategy {
    pub fn is_active(self) -> bool {
        !matches!(self, QueryStrategy::Random)
    }
}

impl fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryStrategy::SingleTarget(t) => write!(f, "single:{t}"),
            QueryStrategy::JointGeometricMean => f.write_str("joint"),
            QueryStrategy::Random => f.write_str("random"),
        }
    }
}

impl FromStr for QueryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "joint" => Ok(QueryStrategy::JointGeometricMean),
            "random" => Ok(QueryStrategy::Random),
            other => other
                .strip_prefix("single:")
                .and_then(Target::from_name)
                .map(QueryStrategy::SingleTarget)
                .ok_or_else(|| {
                    Error::input(format!(
                        "unknown strategy {other:?} (expected single:<target>, joint or random)"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// Number of randomly chosen cases labeled before the first query.
    pub n0: usize,
    /// Labeled-set size at which the loop stops.
    pub budget: usize,
    pub strategy: QueryStrategy,
    pub seed: u64,
    pub search: HyperSearch,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            n0: 25,
            budget: 325,
            strategy: QueryStrategy::JointGeometricMean,
            seed: 0,
            search: HyperSearch::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.n0 < 1 || self.n0 >= self.budget || self.budget > pool_size {
            return Err(Error::input(format!(
                "need 1 <= n0 < budget <= pool size (n0 {}, budget {}, pool {pool_size})",
                self.n0, self.budget
            )));
        }
        self.search.bounds.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledCase {
    pub id: CaseId,
    /// Row of the case in the pool.
    pub pos: usize,
    pub target: TargetVector,
}

/// Labeled set `D_n` and unlabeled pool `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    labeled: Vec<LabeledCase>,
    unlabeled: BTreeSet<CaseId>,
    iteration: usize,
    seed: u64,
}

impl PoolState {
    /// Labeled cases in acquisition order.
    pub fn labeled(&self) -> &[LabeledCase] {
        &self.labeled
    }

    /// Unlabeled ids in ascending order.
    pub fn unlabeled(&self) -> impl ExactSizeIterator<Item = CaseId> + '_ {
        self.unlabeled.iter().copied()
    }

    pub fn unlabeled_len(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn is_labeled(&self, id: CaseId) -> bool {
        self.labeled.iter().any(|c| c.id == id)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.labeled.len()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `cfg.n0` cases uniformly without replacement and label them.
pub fn init_state<O: Oracle + ?Sized>(pool: &Pool, cfg: &LoopConfig, oracle: &O) -> Result<PoolState> {
    if cfg.n0 > pool.len() {
        return Err(Error::input(format!(
            "initial sample of {} exceeds pool of {}",
            cfg.n0,
            pool.len()
        )));
    }
    if cfg.n0 == 0 {
        return Err(Error::input("initial sample must not be empty"));
    }
    let mut rng = stream_rng(cfg.seed, INIT_STREAM);
    let mut picked = rand::seq::index::sample(&mut rng, pool.len(), cfg.n0).into_vec();
    picked.sort_unstable();
    let labeled = picked
        .into_iter()
        .map(|pos| {
            let id = pool.ids()[pos];
            Ok(LabeledCase {
                id,
                pos,
                target: oracle.label(id, pool.row(pos))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let taken: BTreeSet<CaseId> = labeled.iter().map(|c| c.id).collect();
    let unlabeled = pool.ids().iter().copied().filter(|id| !taken.contains(id)).collect();
    Ok(PoolState {
        labeled,
        unlabeled,
        iteration: 0,
        seed: cfg.seed,
    })
}

/// Per-target models plus the maps back to original units.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub models: Vec<GpModel>,
    pub scalers: [TargetScaler; TARGET_COUNT],
}

impl TrainedModels {
    /// Predictions in each model's own (possibly normalized) scale.
    pub fn predict_model_scale(&self, x: &[f64]) -> Result<[Prediction; TARGET_COUNT]> {
        let mut out = [Prediction { mean: 0.0, std: 0.0 }; TARGET_COUNT];
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.predict(x)?;
        }
        Ok(out)
    }

    /// Predictions in original units.
    pub fn predict(&self, x: &[f64]) -> Result<[Prediction; TARGET_COUNT]> {
        let mut p = self.predict_model_scale(x)?;
        for (v, s) in p.iter_mut().zip(&self.scalers) {
            *v = to_original(*v, s);
        }
        Ok(p)
    }

    pub fn hypers(&self) -> [KernelHyper; TARGET_COUNT] {
        std::array::from_fn(|i| *self.models[i].hyper())
    }
}

fn to_original(p: Prediction, s: &TargetScaler) -> Prediction {
    Prediction {
        mean: s.denormalize(p.mean),
        std: s.std_to_original(p.std),
    }
}

/// Pick the next case to label. `sigmas[i]` are the per-target predicted stds
/// of `candidates[i]`: in original units for single-target selection and in
/// each model's own scale for the joint criterion. Ties go to the smallest id.
pub fn select_query<R: Rng + ?Sized>(
    candidates: &[CaseId],
    sigmas: &[[f64; TARGET_COUNT]],
    strategy: QueryStrategy,
    rng: &mut R,
) -> Result<CaseId> {
    if candidates.is_empty() {
        return Err(Error::State("no unlabeled cases left to query".into()));
    }
    if candidates.len() != sigmas.len() {
        return Err(Error::input("one row of uncertainties per candidate is required"));
    }
    let score: fn(&[f64; TARGET_COUNT], Target) -> f64 = match strategy {
        QueryStrategy::Random => {
            return Ok(candidates[rng.random_range(0..candidates.len())]);
        }
        QueryStrategy::SingleTarget(_) => |s, t| s[t.index()],
        // The product ranks candidates exactly as the geometric mean does and,
        // unlike a sum of logs, keeps exact ties exact.
        QueryStrategy::JointGeometricMean => |s, _| s.iter().product(),
    };
    let target = match strategy {
        QueryStrategy::SingleTarget(t) => t,
        _ => Target::DnvEmpty,
    };
    let mut best: Option<(f64, CaseId)> = None;
    for (&id, s) in candidates.iter().zip(sigmas) {
        let mut v = score(s, target);
        if v.is_nan() {
            v = f64::NEG_INFINITY;
        }
        best = match best {
            Some((bv, bid)) if bv > v || (bv == v && bid < id) => Some((bv, bid)),
            _ => Some((v, id)),
        };
    }
    Ok(best.expect("candidates is non-empty").1)
}

/// What one iteration observed, measured before its query was consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub metrics: IterationMetrics,
    pub query: CaseId,
    pub hypers: [KernelHyper; TARGET_COUNT],
}

/// A run that stopped early; the records gathered so far are kept.
#[derive(Debug, Error)]
#[error("run aborted after {} iterations: {error}", records.len())]
pub struct PartialRun {
    pub records: Vec<IterationRecord>,
    #[source]
    pub error: Error,
}

/// Drives one run of the loop over a pool.
pub struct ActiveLearner<'a, O: Oracle + ?Sized> {
    pool: &'a Pool,
    oracle: &'a O,
    cfg: LoopConfig,
    state: PoolState,
    /// Ground truth for every pool case, used only for evaluation.
    truth: Vec<TargetVector>,
    warm: [Option<f64>; TARGET_COUNT],
    query_rng: ChaCha8Rng,
}

impl<'a, O: Oracle + ?Sized> ActiveLearner<'a, O> {
    pub fn new(pool: &'a Pool, oracle: &'a O, cfg: LoopConfig) -> Result<Self> {
        cfg.validate(pool.len())?;
        let truth = pool
            .ids()
            .iter()
            .enumerate()
            .map(|(pos, &id)| oracle.label(id, pool.row(pos)))
            .collect::<Result<Vec<_>>>()?;
        let state = init_state(pool, &cfg, oracle)?;
        Ok(ActiveLearner {
            pool,
            oracle,
            cfg,
            state,
            truth,
            warm: [None; TARGET_COUNT],
            query_rng: stream_rng(cfg.seed, QUERY_STREAM),
        })
    }

    pub fn state(&self) -> &PoolState {
        &self.state
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    pub fn truth(&self, id: CaseId) -> Option<&TargetVector> {
        self.pool.position(id).map(|p| &self.truth[p])
    }

    /// Fit one GP per target on the labeled set, re-tuning hyperparameters
    /// from the previous optimum plus fresh restarts.
    pub fn train_models(&mut self) -> Result<TrainedModels> {
        let labeled = &self.state.labeled;
        if labeled.len() < 2 {
            return Err(Error::State("at least two labeled cases are needed to train".into()));
        }
        let dim = self.pool.dim();
        let mut x = Array2::zeros((labeled.len(), dim));
        for (mut row, c) in x.rows_mut().into_iter().zip(labeled) {
            row.as_slice_mut().unwrap().copy_from_slice(self.pool.row(c.pos));
        }
        let d = PairwiseSqDist::new(x.view());
        let rows: Vec<TargetVector> = labeled.iter().map(|c| c.target).collect();
        let (normed, scalers) = normalize_targets(&rows)?;
        let mut models = Vec::with_capacity(TARGET_COUNT);
        for t in Target::ALL {
            let y: Vec<f64> = normed.iter().map(|r| r[t]).collect();
            let stream = ((self.state.iteration as u64 + 1) << 8) | t.index() as u64;
            let mut rng = stream_rng(self.cfg.seed, stream);
            let opt = optimize_hyper_with(&d, &y, &self.cfg.search, self.warm[t.index()], &mut rng)?;
            self.warm[t.index()] = Some(opt.hyper.length_scale);
            let ts = TrainingSet::new(x.clone(), y)?;
            models.push(fit_with_distances(&ts, &d, opt.hyper)?);
        }
        Ok(TrainedModels { models, scalers })
    }

    /// Model-scale predictions for every unlabeled case, in id order.
    fn predict_unlabeled(&self, models: &TrainedModels) -> Vec<(CaseId, [Prediction; TARGET_COUNT])> {
        let labeled = &self.state.labeled;
        let mut d2 = vec![0.0; labeled.len()];
        let mut scratch = Vec::with_capacity(labeled.len());
        self.state
            .unlabeled()
            .map(|id| {
                let x = self.pool.row(self.pool.position(id).expect("pool id"));
                for (d, c) in d2.iter_mut().zip(labeled) {
                    *d = squared_distance(x, self.pool.row(c.pos));
                }
                let p = std::array::from_fn(|i| models.models[i].predict_from_sqdist(&d2, &mut scratch));
                (id, p)
            })
            .collect()
    }

    fn metrics_of(
        &self,
        models: &TrainedModels,
        preds: &[(CaseId, [Prediction; TARGET_COUNT])],
    ) -> Result<IterationMetrics> {
        let original: Vec<[Prediction; TARGET_COUNT]> = preds
            .iter()
            .map(|(_, p)| std::array::from_fn(|i| to_original(p[i], &models.scalers[i])))
            .collect();
        let truth: Vec<TargetVector> = preds
            .iter()
            .map(|(id, _)| self.truth(*id).copied().ok_or(Error::UnknownCase(*id)))
            .collect::<Result<_>>()?;
        compute_metrics(self.state.n(), &original, &truth)
    }

    /// Metrics of models trained on the current labeled set, without querying.
    pub fn evaluate(&mut self) -> Result<IterationMetrics> {
        if self.state.unlabeled.is_empty() {
            return Err(Error::State("nothing left to evaluate on".into()));
        }
        let models = self.train_models()?;
        let preds = self.predict_unlabeled(&models);
        self.metrics_of(&models, &preds)
    }

    pub fn step(&mut self) -> Result<IterationRecord> {
        if self.state.n() >= self.cfg.budget {
            return Err(Error::State(format!("budget of {} reached", self.cfg.budget)));
        }
        if self.state.unlabeled.is_empty() {
            return Err(Error::State("no unlabeled cases left to query".into()));
        }
        let models = self.train_models()?;
        let preds = self.predict_unlabeled(&models);
        let metrics = self.metrics_of(&models, &preds)?;

        let ids: Vec<CaseId> = preds.iter().map(|(id, _)| *id).collect();
        let sigmas: Vec<[f64; TARGET_COUNT]> = match self.cfg.strategy {
            QueryStrategy::SingleTarget(_) => preds
                .iter()
                .map(|(_, p)| std::array::from_fn(|i| models.scalers[i].std_to_original(p[i].std)))
                .collect(),
            _ => preds.iter().map(|(_, p)| p.map(|q| q.std)).collect(),
        };
        let query = select_query(&ids, &sigmas, self.cfg.strategy, &mut self.query_rng)?;

        let pos = self.pool.position(query).ok_or(Error::UnknownCase(query))?;
        let target = self.oracle.label(query, self.pool.row(pos))?;
        self.state.unlabeled.remove(&query);
        self.state.labeled.push(LabeledCase {
            id: query,
            pos,
            target,
        });
        self.state.iteration += 1;
        Ok(IterationRecord {
            metrics,
            query,
            hypers: models.hypers(),
        })
    }

    /// Iterate until the labeled set reaches the budget: `budget − n0` records.
    pub fn run(&mut self) -> std::result::Result<Vec<IterationRecord>, PartialRun> {
        let mut records = Vec::with_capacity(self.cfg.budget.saturating_sub(self.state.n()));
        while self.state.n() < self.cfg.budget {
            match self.step() {
                Ok(r) => records.push(r),
                Err(error) => return Err(PartialRun { records, error }),
            }
        }
        Ok(records)
    }
}

/// Convenience wrapper: build a learner and run it to the budget.
pub fn run<O: Oracle + ?Sized>(
    pool: &Pool,
    cfg: LoopConfig,
    oracle: &O,
) -> std::result::Result<Vec<IterationRecord>, PartialRun> {
    let mut learner = ActiveLearner::new(pool, oracle, cfg).map_err(|error| PartialRun {
        records: Vec::new(),
        error,
    })?;
    learner.run()
}
