//! Pool-based active learning for simulation portfolios.
//!
//! A portfolio of expensive simulations (riser loading cases) is treated as an
//! unlabeled pool. Gaussian-process surrogates trained on the cases simulated so
//! far predict every remaining case together with an uncertainty, and the next
//! case to simulate is the one the surrogates are least sure about.
//!
//! * [`gp`]: exact GP regression and marginal-likelihood tuning
//! * [`encode`]: current/wave feature encoding and normalization
//! * [`oracle`]: table-backed and synthetic label providers, JONSWAP, DNVUF-201
//! * [`pool`]: the candidate pool
//! * [`learner`]: the query loop and selection strategies
//! * [`metrics`]: error/uncertainty curves, confidence intervals, comparisons
//! * [`io`]: CSV formats

pub mod encode;
pub mod error;
pub mod gp;
pub mod io;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod pool;

use std::fmt;

pub use error::{Error, Result};
pub use gp::{GpModel, HyperBounds, HyperSearch, KernelHyper, Prediction, TrainingSet};
pub use learner::{ActiveLearner, IterationRecord, LoopConfig, QueryStrategy};
pub use metrics::{IterationMetrics, TargetMetrics};
pub use oracle::{LabeledTable, Oracle, SyntheticOracle, Target, TargetVector};
pub use pool::{LoadingCase, Pool};

/// Identifier of a loading case within a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaseId(pub u32);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
