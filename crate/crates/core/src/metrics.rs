//! Deviation measures over the unlabeled pool and their aggregation across runs.
//!
//! All errors and standard deviations are in the targets' original units. RMS
//! values average over the pool with weight `1/|U|`. Confidence intervals are
//! two-sided 95% Student-t intervals over runs.

use std::fmt::Debug;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gp::Prediction;
use crate::oracle::{Target, TargetVector, TARGET_COUNT};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TargetMetrics {
    pub eps_rms: f64,
    pub eps_max: f64,
    pub sigma_rms: f64,
    pub sigma_max: f64,
}

impl TargetMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::EpsRms => self.eps_rms,
            Metric::EpsMax => self.eps_max,
            Metric::SigmaRms => self.sigma_rms,
            Metric::SigmaMax => self.sigma_max,
        }
    }
}

/// Metrics of the models trained on `n` labeled cases, measured over the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub n: usize,
    pub targets: [TargetMetrics; TARGET_COUNT],
}

impl IterationMetrics {
    pub fn target(&self, t: Target) -> &TargetMetrics {
        &self.targets[t.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    EpsRms,
    EpsMax,
    SigmaRms,
    SigmaMax,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::EpsRms, Metric::EpsMax, Metric::SigmaRms, Metric::SigmaMax];

    pub fn name(self) -> &'static str {
        match self {
            Metric::EpsRms => "eps_rms",
            Metric::EpsMax => "eps_max",
            Metric::SigmaRms => "sigma_rms",
            Metric::SigmaMax => "sigma_max",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        Self::ALL.into_iter().find(|m| m.name() == s.trim())
    }
}

/// RMS/max error and RMS/max predicted std for one target.
/// Each item is `(prediction, truth)`.
pub fn target_metrics(items: impl IntoIterator<Item = (Prediction, f64)>) -> Result<TargetMetrics> {
    let mut m = TargetMetrics::default();
    let (mut se, mut ss, mut count) = (0.0, 0.0, 0usize);
    for (p, truth) in items {
        let e = (p.mean - truth).abs();
        se += e * e;
        ss += p.std * p.std;
        m.eps_max = m.eps_max.max(e);
        m.sigma_max = m.sigma_max.max(p.std);
        count += 1;
    }
    if count == 0 {
        return Err(Error::input("no unlabeled cases to evaluate"));
    }
    m.eps_rms = (se / count as f64).sqrt();
    m.sigma_rms = (ss / count as f64).sqrt();
    Ok(m)
}

/// Metrics over the unlabeled pool. `predictions[i]` (original units) and
/// `truth[i]` describe the same case.
pub fn compute_metrics(
    n: usize,
    predictions: &[[Prediction; TARGET_COUNT]],
    truth: &[TargetVector],
) -> Result<IterationMetrics> {
    if predictions.len() != truth.len() {
        return Err(Error::input(format!(
            "{} predictions but {} ground-truth rows",
            predictions.len(),
            truth.len()
        )));
    }
    let mut targets = [TargetMetrics::default(); TARGET_COUNT];
    for t in Target::ALL {
        targets[t.index()] =
            target_metrics(predictions.iter().zip(truth).map(|(p, y)| (p[t.index()], y[t])))?;
    }
    Ok(IterationMetrics { n, targets })
}

/// `100 · |predicted − exact| / |exact|`.
pub fn percent_error(exact: f64, predicted: f64) -> Result<f64> {
    if exact == 0.0 {
        return Err(Error::Domain("percent error of an exact value of zero".into()));
    }
    Ok(100.0 * (predicted - exact).abs() / exact.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Two-sided 97.5% quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

pub fn sample_std(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / m;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
}

/// Mean and 95% interval `mean ± t₀.₉₇₅,ₘ₋₁ · s/√m`.
pub fn mean_ci(values: &[f64]) -> Result<ConfidenceInterval> {
    let m = values.len();
    if m < 2 {
        return Err(Error::input("a confidence interval needs at least two runs"));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let half = t_quantile_975(m - 1) * sample_std(values) / (m as f64).sqrt();
    Ok(ConfidenceInterval {
        mean,
        lo: mean - half,
        hi: mean + half,
        count: m,
    })
}

/// One point of an aggregate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub target: Target,
    pub metric: Metric,
    pub ci: ConfidenceInterval,
}

fn check_aligned(runs: &[&[IterationMetrics]]) -> Result<()> {
    let first = runs[0];
    for r in &runs[1..] {
        if r.len() != first.len() || r.iter().zip(first).any(|(a, b)| a.n != b.n) {
            return Err(Error::input("runs are not aligned on the same n grid"));
        }
    }
    Ok(())
}

/// Mean curve with 95% intervals for every `(n, target, metric)`.
/// Rows come out ordered by `n`, then target, then metric.
pub fn aggregate(runs: &[&[IterationMetrics]]) -> Result<Vec<AggregateRow>> {
    if runs.len() < 2 {
        return Err(Error::input("aggregation needs at least two runs"));
    }
    check_aligned(runs)?;
    let mut rows = Vec::with_capacity(runs[0].len() * TARGET_COUNT * Metric::ALL.len());
    let mut buf = vec![0.0; runs.len()];
    for (i, point) in runs[0].iter().enumerate() {
        for t in Target::ALL {
            for metric in Metric::ALL {
                for (b, r) in buf.iter_mut().zip(runs) {
                    *b = r[i].target(t).get(metric);
                }
                rows.push(AggregateRow {
                    n: point.n,
                    target: t,
                    metric,
                    ci: mean_ci(&buf)?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBound {
    /// Fraction of points with `ε_RMS ≤ σ_RMS + σ₀`.
    pub rms_fraction: f64,
    /// Fraction of points with `ε_Max ≤ k · σ_Max`.
    pub max_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub sigma0: f64,
    pub k_mult: f64,
    pub points: usize,
    pub targets: [TargetBound; TARGET_COUNT],
}

/// How often the affine error bounds hold, counted over every point of every curve.
pub fn check_bounds(curves: &[&[IterationMetrics]], sigma0: f64, k_mult: f64) -> BoundReport {
    let points: usize = curves.iter().map(|c| c.len()).sum();
    let mut targets = [TargetBound {
        rms_fraction: 0.0,
        max_fraction: 0.0,
    }; TARGET_COUNT];
    if points > 0 {
        for t in Target::ALL {
            let (mut rms_ok, mut max_ok) = (0usize, 0usize);
            for m in curves.iter().flat_map(|c| c.iter()) {
                let tm = m.target(t);
                rms_ok += usize::from(tm.eps_rms <= tm.sigma_rms + sigma0);
                max_ok += usize::from(tm.eps_max <= k_mult * tm.sigma_max);
            }
            targets[t.index()] = TargetBound {
                rms_fraction: rms_ok as f64 / points as f64,
                max_fraction: max_ok as f64 / points as f64,
            };
        }
    }
    BoundReport {
        sigma0,
        k_mult,
        points,
        targets,
    }
}

/// Paired difference `ε_RMS(random) − ε_RMS(active)` at one `(n, target)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub n: usize,
    pub target: Target,
    pub diff: ConfidenceInterval,
    /// Sample std of the active runs' `ε_RMS`.
    pub active_spread: f64,
    /// Sample std of the random runs' `ε_RMS`.
    pub random_spread: f64,
}

/// Pair active and random runs by key (runs sharing a key share their initial
/// sample) and summarize the per-`n` differences in `ε_RMS`.
pub fn compare_strategies<K: Ord + Debug>(
    active: &[(K, &[IterationMetrics])],
    random: &[(K, &[IterationMetrics])],
) -> Result<Vec<ComparisonRow>> {
    if active.len() != random.len() {
        return Err(Error::input(format!(
            "{} active runs but {} random runs",
            active.len(),
            random.len()
        )));
    }
    let mut a: Vec<_> = active.iter().collect();
    let mut r: Vec<_> = random.iter().collect();
    a.sort_by(|x, y| x.0.cmp(&y.0));
    r.sort_by(|x, y| x.0.cmp(&y.0));
    if let Some((x, y)) = a.iter().zip(&r).find(|(x, y)| x.0 != y.0) {
        return Err(Error::input(format!("unpaired runs: {:?} vs {:?}", x.0, y.0)));
    }
    let curves: Vec<&[IterationMetrics]> = a.iter().chain(&r).map(|x| x.1).collect();
    if curves.is_empty() {
        return Err(Error::input("no runs to compare"));
    }
    check_aligned(&curves)?;
    let mut rows = Vec::new();
    for i in 0..curves[0].len() {
        for t in Target::ALL {
            let act: Vec<f64> = a.iter().map(|x| x.1[i].target(t).eps_rms).collect();
            let rnd: Vec<f64> = r.iter().map(|x| x.1[i].target(t).eps_rms).collect();
            let diffs: Vec<f64> = rnd.iter().zip(&act).map(|(x, y)| x - y).collect();
            rows.push(ComparisonRow {
                n: curves[0][i].n,
                target: t,
                diff: mean_ci(&diffs)?,
                active_spread: sample_std(&act),
                random_spread: sample_std(&rnd),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mean: f64, std: f64) -> Prediction {
        Prediction { mean, std }
    }

    fn metrics(n: usize, eps_rms: f64) -> IterationMetrics {
        let tm = TargetMetrics {
            eps_rms,
            eps_max: 2.0 * eps_rms,
            sigma_rms: 1.0,
            sigma_max: 1.0,
        };
        IterationMetrics {
            n,
            targets: [tm; TARGET_COUNT],
        }
    }

    #[test]
    fn tabulated_single_case() {
        let m = target_metrics([(p(0.496649, 0.016616), 0.477585)]).unwrap();
        assert!((m.eps_rms - 0.019063).abs() < 5e-6);
        assert_eq!(m.eps_rms, m.eps_max);
        assert_eq!(m.sigma_rms, 0.016616);
    }

    #[test]
    fn perfect_predictions() {
        let m = target_metrics([(p(1.0, 0.0), 1.0), (p(-3.0, 0.0), -3.0)]).unwrap();
        assert_eq!((m.eps_rms, m.eps_max), (0.0, 0.0));
    }

    #[test]
    fn two_case_rms() {
        let m = target_metrics([(p(12.1212, 1.0), 0.0), (p(0.0, 2.0), 49.4048)]).unwrap();
        let expected = ((12.1212f64.powi(2) + 49.4048f64.powi(2)) / 2.0).sqrt();
        assert!((m.eps_rms - expected).abs() < 1e-12);
        assert!((m.eps_rms - 35.970528).abs() < 1e-6);
        assert_eq!(m.eps_max, 49.4048);
        assert_eq!(m.sigma_max, 2.0);
    }

    #[test]
    fn compute_metrics_checks_lengths() {
        let preds = [[p(0.0, 0.0); TARGET_COUNT]];
        assert!(compute_metrics(1, &preds, &[]).is_err());
        assert!(target_metrics(std::iter::empty()).is_err());
    }

    #[test]
    fn percent_error_cases() {
        assert_eq!(percent_error(2.0, 2.0).unwrap(), 0.0);
        assert!((percent_error(-4.0, -5.0).unwrap() - 25.0).abs() < 1e-12);
        assert!(percent_error(0.0, 1.0).is_err());
    }

    #[test]
    fn identical_runs_have_zero_width() {
        let run: Vec<_> = (0..3).map(|i| metrics(10 + i, 0.5)).collect();
        let rows = aggregate(&[&run, &run, &run]).unwrap();
        assert_eq!(rows.len(), 3 * TARGET_COUNT * 4);
        for r in rows {
            assert_eq!(r.ci.lo, r.ci.hi);
            assert_eq!(r.ci.count, 3);
        }
    }

    #[test]
    fn two_runs_use_one_degree_of_freedom() {
        let (a, b) = (1.0, 3.0);
        let rows = aggregate(&[&[metrics(5, a)], &[metrics(5, b)]]).unwrap();
        let r = rows
            .iter()
            .find(|r| r.target == Target::DnvEmpty && r.metric == Metric::EpsRms)
            .unwrap();
        assert_eq!(r.ci.mean, 2.0);
        // t(0.975, 1) = tan(0.475π) = 12.7062...; s = √2; half = t·s/√2 = t
        let t1 = (0.475 * std::f64::consts::PI).tan();
        assert!((r.ci.half_width() - t1).abs() < 1e-6, "{}", r.ci.half_width());
    }

    #[test]
    fn aggregate_rejects_bad_input() {
        let a = [metrics(5, 1.0)];
        let b = [metrics(6, 1.0)];
        assert!(aggregate(&[&a]).is_err());
        assert!(aggregate(&[&a, &b]).is_err());
        assert!(aggregate(&[&a, &[]]).is_err());
    }

    #[test]
    fn bounds_extremes() {
        let run: Vec<_> = (0..4).map(|i| metrics(i, 2.0)).collect();
        let loose = check_bounds(&[&run], 1e300, 1e300);
        assert!(loose.targets.iter().all(|t| t.rms_fraction == 1.0 && t.max_fraction == 1.0));
        let tight = check_bounds(&[&run], 0.0, 0.0);
        assert!(tight.targets.iter().all(|t| t.rms_fraction == 0.0 && t.max_fraction == 0.0));
        assert_eq!(tight.points, 4);
    }

    #[test]
    fn comparing_a_strategy_with_itself() {
        let r1: Vec<_> = (0..3).map(|i| metrics(i, 1.0 + i as f64)).collect();
        let r2: Vec<_> = (0..3).map(|i| metrics(i, 0.5 * i as f64)).collect();
        let runs = [(1u64, r1.as_slice()), (2u64, r2.as_slice())];
        let rows = compare_strategies(&runs, &runs).unwrap();
        assert!(rows.iter().all(|r| r.diff.mean == 0.0 && r.diff.lo == 0.0));
    }

    #[test]
    fn unpaired_runs_are_rejected() {
        let r: Vec<_> = (0..3).map(|i| metrics(i, 1.0)).collect();
        let a = [(1u64, r.as_slice()), (2, r.as_slice())];
        let b = [(1u64, r.as_slice()), (3, r.as_slice())];
        assert!(compare_strategies(&a, &b).is_err());
        assert!(compare_strategies(&a, &b[..1]).is_err());
    }
}
