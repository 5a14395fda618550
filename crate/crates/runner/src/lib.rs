//! Experiment runner: loads a pool, runs every `(configuration, strategy,
//! seed)` combination of the active-learning loop and writes CSV artifacts
//! plus a manifest of checksums.

pub mod cli;
pub mod manifest;
pub mod matrix;

use std::fmt;
use std::path::{Path, PathBuf};

use loadsel_core::encode::REFERENCE_DEPTHS;
use loadsel_core::io;
use loadsel_core::pool::{synthetic_cases, LoadingCase};
use loadsel_core::{Error, Pool, QueryStrategy, Result, Target};

pub use matrix::{run_matrix, MatrixReport, RunKey, RunStatus};

/// Where the candidate pool comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolSource {
    /// Long-format current CSV (or a directory of per-case files) plus a wave CSV.
    Raw { currents: PathBuf, waves: PathBuf },
    /// Pre-encoded raw features, one row per case.
    Features(PathBuf),
    /// Generated cases, see [`loadsel_core::pool::synthetic_cases`].
    Synthetic { size: usize, seed: u64 },
}

impl fmt::Display for PoolSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolSource::Raw { currents, waves } => {
                write!(f, "raw:{}+{}", currents.display(), waves.display())
            }
            PoolSource::Features(p) => write!(f, "features:{}", p.display()),
            PoolSource::Synthetic { size, seed } => write!(f, "synthetic:{size}:{seed}"),
        }
    }
}

/// Where labels come from; each entry is one riser configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSource {
    Tables(Vec<PathBuf>),
    Synthetic(Vec<u64>),
}

impl fmt::Display for OracleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSource::Tables(paths) => {
                let p: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
                write!(f, "table:{}", p.join(","))
            }
            OracleSource::Synthetic(seeds) => write!(f, "synthetic:{}", join(seeds)),
        }
    }
}

pub(crate) fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub pool: PoolSource,
    pub oracle: OracleSource,
    pub strategies: Vec<QueryStrategy>,
    pub seeds: Vec<u64>,
    pub n0: usize,
    pub budget: usize,
    /// Targets written to the output CSVs; models are always trained for all six.
    pub targets: Vec<Target>,
    pub out: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(pool: PoolSource, oracle: OracleSource, out: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            pool,
            oracle,
            strategies: vec![QueryStrategy::JointGeometricMean],
            seeds: (0..33).collect(),
            n0: 25,
            budget: 325,
            targets: Target::ALL.to_vec(),
            out: out.into(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Input("at least one strategy is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Input("at least one seed is required".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Input("at least one target is required".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Input("--jobs must be at least 1".into()));
        }
        let configs = match &self.oracle {
            OracleSource::Tables(p) => p.len(),
            OracleSource::Synthetic(s) => s.len(),
        };
        if configs == 0 {
            return Err(Error::Input("at least one oracle configuration is required".into()));
        }
        for (name, has_dup) in [
            ("strategy", has_duplicates(&self.strategies)),
            ("seed", has_duplicates(&self.seeds)),
        ] {
            if has_dup {
                return Err(Error::Input(format!("duplicate {name} in the experiment")));
            }
        }
        Ok(())
    }
}

fn has_duplicates<T: Ord + Clone>(v: &[T]) -> bool {
    let mut s = v.to_vec();
    s.sort();
    s.windows(2).any(|w| w[0] == w[1])
}

/// Load and encode the pool. Raw sources also return the parsed cases;
/// a pre-encoded source returns none.
pub fn load_pool(source: &PoolSource) -> Result<(Vec<LoadingCase>, Pool)> {
    match source {
        PoolSource::Raw { currents, waves } => {
            let cur = if currents.is_dir() {
                io::read_current_dir(currents)?
            } else {
                io::read_currents(currents)?
            };
            let cases = io::join_cases(cur, io::read_waves(waves)?)?;
            let grid = grid_of(&cases)?;
            let pool = Pool::from_cases(&cases, &grid)?;
            Ok((cases, pool))
        }
        PoolSource::Features(path) => Ok((Vec::new(), io::read_features(path)?)),
        PoolSource::Synthetic { size, seed } => {
            let cases = synthetic_cases(*size, *seed);
            let pool = Pool::from_cases(&cases, &REFERENCE_DEPTHS)?;
            Ok((cases, pool))
        }
    }
}

/// The depth grid shared by every case.
fn grid_of(cases: &[LoadingCase]) -> Result<Vec<f64>> {
    let first = cases.first().ok_or_else(|| Error::Input("no cases".into()))?;
    let grid: Vec<f64> = first.current.depths().collect();
    match cases.iter().find(|c| !c.current.on_grid(&grid)) {
        Some(c) => Err(Error::Input(format!(
            "case {} uses a different depth grid than case {}",
            c.id, first.id
        ))),
        None => Ok(grid),
    }
}

/// Parse `a..b` (half-open) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Input(format!("invalid seed list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

/// Parse `synthetic:SIZE:SEED` or a path to a feature CSV.
pub fn parse_pool_arg(s: &str) -> Result<PoolSource> {
    match s.strip_prefix("synthetic:") {
        Some(rest) => {
            let bad = || Error::Input(format!("expected synthetic:SIZE:SEED, got {s:?}"));
            let (size, seed) = rest.split_once(':').ok_or_else(bad)?;
            Ok(PoolSource::Synthetic {
                size: size.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            })
        }
        None => Ok(PoolSource::Features(Path::new(s).to_path_buf())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9,2").unwrap(), vec![4, 9, 2]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn pool_arguments() {
        assert_eq!(
            parse_pool_arg("synthetic:526:3").unwrap(),
            PoolSource::Synthetic { size: 526, seed: 3 }
        );
        assert!(parse_pool_arg("synthetic:526").is_err());
        assert_eq!(
            parse_pool_arg("f.csv").unwrap(),
            PoolSource::Features(PathBuf::from("f.csv"))
        );
    }

    #[test]
    fn feature_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (_, pool) = load_pool(&PoolSource::Synthetic { size: 526, seed: 0 }).unwrap();
        assert_eq!((pool.len(), pool.dim()), (526, 33));
        let path = dir.path().join("features.csv");
        io::write_features(&path, &pool).unwrap();
        let (cases, back) = load_pool(&PoolSource::Features(path)).unwrap();
        assert!(cases.is_empty());
        assert_eq!(back.ids(), pool.ids());
        for (a, b) in pool.features().iter().zip(back.features().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_feature_file_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        let err = load_pool(&PoolSource::Features(empty)).unwrap_err();
        assert!(err.is_input_error());
        assert!(err.to_string().contains("empty.csv:1"));
    }

    #[test]
    fn mixed_depth_grids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.csv");
        let w = dir.path().join("w.csv");
        std::fs::write(&c, "case_id,depth_m,speed_ms,angle_deg\n1,0,1,0\n1,50,1,0\n2,0,1,0\n2,60,1,0\n").unwrap();
        std::fs::write(
            &w,
            "case_id,height_m,period_s,azimuth_deg,alpha,gamma\n1,1,5,0,0.01,2\n2,1,5,0,0.01,2\n",
        )
        .unwrap();
        let err = load_pool(&PoolSource::Raw { currents: c, waves: w }).unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn spec_validation() {
        let ok = ExperimentSpec::new(
            PoolSource::Synthetic { size: 10, seed: 0 },
            OracleSource::Synthetic(vec![0]),
            "out",
        );
        assert!(ok.validate().is_ok());
        assert_eq!(ok.seeds.len(), 33);
        let mut s = ok.clone();
        s.strategies.clear();
        assert!(s.validate().is_err());
        let mut s = ok.clone();
        s.seeds = vec![1, 1];
        assert!(s.validate().is_err());
        let mut s = ok;
        s.oracle = OracleSource::Tables(vec![]);
        assert!(s.validate().is_err());
    }
}
