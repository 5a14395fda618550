//! Runs the experiment matrix on a bounded worker pool and writes results.
//!
//! Output layout under the experiment's `out` directory:
//!
//! ```text
//! runs/<config>/<strategy>/seed-<seed>.csv    one learning curve per run
//! aggregate/<config>/<strategy>.csv           per configuration, >= 2 seeds
//! aggregate/<strategy>.csv                    pooled over configurations
//! comparison/<config>/<strategy>.csv          random − active, paired by seed
//! comparison/<strategy>.csv                   pooled, paired by (config, seed)
//! manifest.txt
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use loadsel_core::io;
use loadsel_core::learner::{self, IterationRecord};
use loadsel_core::metrics::{aggregate, compare_strategies, AggregateRow, ComparisonRow, IterationMetrics};
use loadsel_core::{Error, LabeledTable, LoopConfig, Oracle, Pool, QueryStrategy, Result, SyntheticOracle};
use rayon::prelude::*;

use crate::manifest::{sha256_file, Manifest, SCHEMA_VERSION};
use crate::{join, load_pool, ExperimentSpec, OracleSource};

/// Identifies one run. Orders by configuration, then strategy, then seed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunKey {
    pub config: String,
    pub strategy: QueryStrategy,
    pub seed: u64,
}

/// Path-safe strategy label, e.g. `single-fx_mean`.
pub fn strategy_slug(s: QueryStrategy) -> String {
    s.to_string().replace(':', "-")
}

impl RunKey {
    pub fn relative_path(&self) -> PathBuf {
        Path::new("runs")
            .join(&self.config)
            .join(strategy_slug(self.strategy))
            .join(format!("seed-{}.csv", self.seed))
    }

    fn manifest_prefix(&self) -> String {
        format!("run.{}.{}.{}", self.config, strategy_slug(self.strategy), self.seed)
    }
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/seed-{}", self.config, self.strategy, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Complete,
    /// The run aborted; its CSV holds the iterations finished before the error.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub key: RunKey,
    pub status: RunStatus,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct MatrixReport {
    /// Sorted by key.
    pub runs: Vec<RunOutcome>,
    pub manifest: Manifest,
}

impl MatrixReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.status != RunStatus::Complete).count()
    }
}

enum ConfigOracle {
    Table(LabeledTable),
    Synthetic(SyntheticOracle),
}

impl ConfigOracle {
    fn as_oracle(&self) -> &dyn Oracle {
        match self {
            ConfigOracle::Table(t) => t,
            ConfigOracle::Synthetic(s) => s,
        }
    }
}

/// Resolve every oracle configuration up front so bad inputs fail before any run.
fn load_oracles(source: &OracleSource, pool: &Pool) -> Result<Vec<(String, ConfigOracle)>> {
    let mut out: Vec<(String, ConfigOracle)> = match source {
        OracleSource::Synthetic(seeds) => seeds
            .iter()
            .map(|&s| (format!("synthetic-{s}"), ConfigOracle::Synthetic(SyntheticOracle::new(s))))
            .collect(),
        OracleSource::Tables(paths) => paths
            .iter()
            .map(|p| {
                let t = io::read_labeled_table(p)?;
                t.check_covers(pool.ids().iter().copied())
                    .map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
                Ok((t.config_id.clone(), ConfigOracle::Table(t)))
            })
            .collect::<Result<_>>()?,
    };
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if out.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Input("two oracle configurations share a name".into()));
    }
    Ok(out)
}

/// Execute the whole matrix. `Err` means the inputs were unusable and nothing
/// ran; individual run failures are reported in the returned manifest.
pub fn run_matrix(spec: &ExperimentSpec) -> Result<MatrixReport> {
    spec.validate()?;
    let (_, pool) = load_pool(&spec.pool)?;
    let oracles = load_oracles(&spec.oracle, &pool)?;
    for s in &spec.strategies {
        LoopConfig {
            n0: spec.n0,
            budget: spec.budget,
            strategy: *s,
            ..LoopConfig::default()
        }
        .validate(pool.len())?;
    }
    std::fs::create_dir_all(&spec.out).map_err(|source| Error::Io {
        path: spec.out.clone(),
        source,
    })?;

    let mut jobs: Vec<(RunKey, usize)> = Vec::new();
    for (ci, (config, _)) in oracles.iter().enumerate() {
        for &strategy in &spec.strategies {
            for &seed in &spec.seeds {
                let key = RunKey {
                    config: config.clone(),
                    strategy,
                    seed,
                };
                jobs.push((key, ci));
            }
        }
    }
    jobs.sort();

    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunOutcome> = workers.install(|| {
        jobs.par_iter()
            .map(|(key, ci)| {
                let cfg = LoopConfig {
                    n0: spec.n0,
                    budget: spec.budget,
                    strategy: key.strategy,
                    seed: key.seed,
                    ..LoopConfig::default()
                };
                let (status, records) = match learner::run(&pool, cfg, oracles[*ci].1.as_oracle()) {
                    Ok(r) => (RunStatus::Complete, r),
                    Err(p) => (RunStatus::Failed(p.error.to_string()), p.records),
                };
                RunOutcome {
                    key: key.clone(),
                    status,
                    records,
                }
            })
            .collect()
    });

    let mut manifest = Manifest::default();
    describe(spec, &pool, &mut manifest);
    for run in &runs {
        let rel = run.key.relative_path();
        let path = spec.out.join(&rel);
        io::write_run(&path, &run.records, &spec.targets)?;
        let prefix = run.key.manifest_prefix();
        manifest.set(format!("{prefix}.file"), rel.display());
        manifest.set(format!("{prefix}.sha256"), sha256_file(&path)?);
        manifest.set(
            format!("{prefix}.status"),
            match &run.status {
                RunStatus::Complete => "ok".to_owned(),
                RunStatus::Failed(msg) => format!("failed: {msg}"),
            },
        );
    }
    write_summaries(spec, &runs, &mut manifest)?;

    let failed = runs.iter().filter(|r| r.status != RunStatus::Complete).count();
    manifest.set("runs.total", runs.len());
    manifest.set("runs.failed", failed);
    manifest.set("status", if failed == 0 { "ok" } else { "failed" });
    manifest.write(&spec.out.join("manifest.txt"))?;
    Ok(MatrixReport { runs, manifest })
}

fn describe(spec: &ExperimentSpec, pool: &Pool, m: &mut Manifest) {
    m.set("schema_version", SCHEMA_VERSION);
    m.set("tool", concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")));
    m.set("spec.pool", &spec.pool);
    m.set("spec.pool_size", pool.len());
    m.set("spec.feature_dim", pool.dim());
    m.set("spec.oracle", &spec.oracle);
    m.set("spec.strategies", join(&spec.strategies));
    m.set("spec.seeds", join(&spec.seeds));
    m.set("spec.n0", spec.n0);
    m.set("spec.budget", spec.budget);
    m.set("spec.targets", join(&spec.targets));
}

fn keep_aggregate(rows: Vec<AggregateRow>, spec: &ExperimentSpec) -> Vec<AggregateRow> {
    rows.into_iter().filter(|r| spec.targets.contains(&r.target)).collect()
}

fn keep_comparison(rows: Vec<ComparisonRow>, spec: &ExperimentSpec) -> Vec<ComparisonRow> {
    rows.into_iter().filter(|r| spec.targets.contains(&r.target)).collect()
}

type Curve<'a> = (&'a RunKey, Vec<IterationMetrics>);

fn write_summaries(spec: &ExperimentSpec, runs: &[RunOutcome], m: &mut Manifest) -> Result<()> {
    // Only complete runs share a full n grid.
    let curves: Vec<Curve<'_>> = runs
        .iter()
        .filter(|r| r.status == RunStatus::Complete)
        .map(|r| (&r.key, r.records.iter().map(|x| x.metrics.clone()).collect()))
        .collect();
    let configs: Vec<&String> = {
        let mut c: Vec<&String> = curves.iter().map(|(k, _)| &k.config).collect();
        c.dedup();
        c
    };
    let mut emit_aggregate = |rel: PathBuf, selected: Vec<&[IterationMetrics]>| -> Result<()> {
        if selected.len() < 2 {
            return Ok(());
        }
        let path = spec.out.join(&rel);
        io::write_aggregate(&path, &keep_aggregate(aggregate(&selected)?, spec))?;
        m.set(format!("{}.sha256", key_of(&rel)), sha256_file(&path)?);
        Ok(())
    };
    for &s in &spec.strategies {
        let slug = strategy_slug(s);
        for c in &configs {
            let sel = select(&curves, |k| k.strategy == s && &&k.config == c);
            emit_aggregate(Path::new("aggregate").join(c).join(format!("{slug}.csv")), sel)?;
        }
        if configs.len() > 1 {
            let sel = select(&curves, |k| k.strategy == s);
            emit_aggregate(Path::new("aggregate").join(format!("{slug}.csv")), sel)?;
        }
    }

    if !spec.strategies.contains(&QueryStrategy::Random) {
        return Ok(());
    }
    for &s in spec.strategies.iter().filter(|s| s.is_active()) {
        let slug = strategy_slug(s);
        let mut scopes: Vec<(PathBuf, Option<&String>)> = configs
            .iter()
            .map(|c| (Path::new("comparison").join(c).join(format!("{slug}.csv")), Some(*c)))
            .collect();
        if configs.len() > 1 {
            scopes.push((Path::new("comparison").join(format!("{slug}.csv")), None));
        }
        for (rel, config) in scopes {
            let in_scope = |k: &RunKey| config.map_or(true, |c| &k.config == c);
            let pairs = |strategy: QueryStrategy| -> Vec<((String, u64), &[IterationMetrics])> {
                curves
                    .iter()
                    .filter(|(k, _)| k.strategy == strategy && in_scope(k))
                    .map(|(k, c)| ((k.config.clone(), k.seed), c.as_slice()))
                    .collect()
            };
            let (active, random) = (pairs(s), pairs(QueryStrategy::Random));
            // A failed run on either side leaves its partner unpaired; skip it.
            let active: Vec<_> = active.into_iter().filter(|a| random.iter().any(|r| r.0 == a.0)).collect();
            let random: Vec<_> = random.into_iter().filter(|r| active.iter().any(|a| a.0 == r.0)).collect();
            if active.len() < 2 {
                continue;
            }
            let path = spec.out.join(&rel);
            io::write_comparison(&path, &keep_comparison(compare_strategies(&active, &random)?, spec))?;
            m.set(format!("{}.sha256", key_of(&rel)), sha256_file(&path)?);
        }
    }
    Ok(())
}

fn select<'a>(curves: &'a [Curve<'a>], pred: impl Fn(&RunKey) -> bool) -> Vec<&'a [IterationMetrics]> {
    curves.iter().filter(|(k, _)| pred(k)).map(|(_, c)| c.as_slice()).collect()
}

/// `aggregate/synthetic-0/joint.csv` → `aggregate.synthetic-0.joint`.
fn key_of(rel: &Path) -> String {
    let s = rel.with_extension("").display().to_string();
    s.replace(std::path::MAIN_SEPARATOR, ".")
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;
    use crate::PoolSource;

    fn small_spec(out: &Path) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(
            PoolSource::Synthetic { size: 40, seed: 2 },
            OracleSource::Synthetic(vec![1]),
            out,
        );
        spec.strategies = vec![QueryStrategy::JointGeometricMean, QueryStrategy::Random];
        spec.seeds = vec![0, 1];
        spec.n0 = 6;
        spec.budget = 12;
        spec.jobs = Some(2);
        spec
    }

    fn csv_files(dir: &Path) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|x| x == "csv") {
                    out.push(p.strip_prefix(dir).unwrap().display().to_string());
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn two_seeds_two_strategies_one_config() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_matrix(&small_spec(dir.path())).unwrap();
        assert_eq!(report.failures(), 0);
        assert_eq!(
            csv_files(dir.path()),
            [
                "aggregate/synthetic-1/joint.csv",
                "aggregate/synthetic-1/random.csv",
                "comparison/synthetic-1/joint.csv",
                "runs/synthetic-1/joint/seed-0.csv",
                "runs/synthetic-1/joint/seed-1.csv",
                "runs/synthetic-1/random/seed-0.csv",
                "runs/synthetic-1/random/seed-1.csv",
            ]
        );
        let run = fs::read_to_string(dir.path().join("runs/synthetic-1/joint/seed-0.csv")).unwrap();
        assert!(run.starts_with("n,target,eps_rms,eps_max,sigma_rms,sigma_max\n6,dnv_empty,"));
        assert_eq!(run.lines().count(), 1 + 6 * 6);
        let m = Manifest::read(&dir.path().join("manifest.txt")).unwrap();
        assert_eq!(m.get("status"), Some("ok"));
        assert_eq!(m.get("schema_version"), Some("1"));
        assert_eq!(m.get("run.synthetic-1.random.1.status"), Some("ok"));
    }

    #[test]
    fn rerun_reproduces_every_checksum() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut spec = small_spec(a.path());
        let first = run_matrix(&spec).unwrap().manifest;
        spec.out = b.path().to_path_buf();
        spec.jobs = Some(1);
        let second = run_matrix(&spec).unwrap().manifest;
        let sums = |m: &Manifest| -> Vec<(String, String)> {
            m.iter()
                .filter(|(k, _)| k.ends_with(".sha256"))
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect()
        };
        assert!(!sums(&first).is_empty());
        assert_eq!(sums(&first), sums(&second));
    }

    #[test]
    fn target_filter_limits_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small_spec(dir.path());
        spec.targets = vec![loadsel_core::Target::FxWater];
        run_matrix(&spec).unwrap();
        let agg = fs::read_to_string(dir.path().join("aggregate/synthetic-1/joint.csv")).unwrap();
        assert!(agg.lines().skip(1).all(|l| l.split(',').nth(1) == Some("fx_water")));
    }
}
