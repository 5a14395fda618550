//! Exact Gaussian-process regression with an isotropic Gaussian kernel
//!
//! `k(a, b) = c² · exp(−‖a − b‖² / (2ℓ²))`
//!
//! The prior mean is zero. Training factors `K(X, X) + σ²_j I = L Lᵀ` and stores
//! `α = (K + σ²_j I)⁻¹ y`; prediction at `x` is then
//!
//! * mean `μ(x) = k(x, X) α`
//! * std  `σ(x) = sqrt(max(0, c² − ‖L⁻¹ k(X, x)‖²))`
//!
//! Hyperparameters are tuned by maximizing the log marginal likelihood. Since the
//! default jitter is proportional to `c²`, the covariance is `c²·(R_ℓ + ε I)` and the
//! amplitude has a closed-form maximizer `c² = yᵀ(R_ℓ + ε I)⁻¹y / n` for any fixed
//! length scale. The search therefore only walks `log ℓ` (multi-start pattern
//! search) and sets `c` exactly at every probe, clamped to its bounds.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Cholesky};

/// Jitter added to the covariance diagonal, relative to `c²`.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-10;
/// How many times a failed factorization is retried with ten times the jitter.
pub const JITTER_RETRIES: usize = 3;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelHyper {
    /// Signal amplitude `c`; the prior variance is `c²`.
    pub amplitude: f64,
    pub length_scale: f64,
    /// Absolute value added to the covariance diagonal.
    pub jitter: f64,
}

impl KernelHyper {
    /// Hyperparameters with the default jitter `1e-10 · c²`.
    pub fn new(amplitude: f64, length_scale: f64) -> Self {
        KernelHyper {
            amplitude,
            length_scale,
            jitter: DEFAULT_RELATIVE_JITTER * amplitude * amplitude,
        }
    }

    pub fn with_jitter(self, jitter: f64) -> Self {
        KernelHyper { jitter, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::input(format!("amplitude must be > 0, got {}", self.amplitude)));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::input(format!(
                "length scale must be > 0, got {}",
                self.length_scale
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::input(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }

    #[inline]
    pub fn prior_variance(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    #[inline]
    fn eval_sq(&self, d2: f64) -> f64 {
        self.prior_variance() * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

pub fn kernel_eval(a: &[f64], b: &[f64], h: &KernelHyper) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(h.eval_sq(squared_distance(a, b)))
}

/// Labeled inputs: one row of `x` per observation in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Array2<f64>,
    y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(x: Array2<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::input("training set is empty"));
        }
        if x.nrows() != y.len() {
            return Err(Error::input(format!(
                "{} input rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        Ok(TrainingSet {
            x: x.as_standard_layout().into_owned(),
            y,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::input(e.to_string()))?;
        Self::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Symmetric matrix of squared Euclidean distances between the rows of a set.
/// Shared between every kernel evaluation on the same inputs.
#[derive(Debug, Clone)]
pub struct PairwiseSqDist {
    n: usize,
    d: Vec<f64>,
}

impl PairwiseSqDist {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let xi = x.row(i);
            for j in 0..i {
                let v = xi
                    .iter()
                    .zip(x.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        PairwiseSqDist { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Lower triangle of `c²·exp(−D/2ℓ²) + jitter·I` in row-major order.
    fn covariance(&self, h: &KernelHyper, jitter: f64) -> Vec<f64> {
        let n = self.n;
        let c2 = h.prior_variance();
        let inv = -0.5 / (h.length_scale * h.length_scale);
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            let src = &self.d[i * n..i * n + i];
            let dst = &mut k[i * n..i * n + i];
            for (kv, dv) in dst.iter_mut().zip(src) {
                *kv = c2 * (dv * inv).exp();
            }
            k[i * n + i] = c2 + jitter;
        }
        k
    }

    /// Factor the covariance, escalating the jitter tenfold on failure.
    fn factor(&self, h: &KernelHyper) -> Result<(Cholesky, f64)> {
        let mut jitter = h.jitter;
        let mut last = 0;
        for attempt in 0..=JITTER_RETRIES {
            if attempt > 0 {
                jitter *= 10.0;
            }
            match Cholesky::factor(self.covariance(h, jitter), self.n) {
                Ok(c) => return Ok((c, jitter)),
                Err(e) => last = e.pivot,
            }
        }
        Err(Error::NotPositiveDefinite {
            pivot: last,
            jitter,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

/// A trained posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: KernelHyper,
    x_train: Array2<f64>,
    y_train: Vec<f64>,
    chol: Cholesky,
    alpha: Vec<f64>,
}

pub fn fit(ts: &TrainingSet, h: KernelHyper) -> Result<GpModel> {
    let d = PairwiseSqDist::new(ts.x());
    fit_with_distances(ts, &d, h)
}

/// [`fit`] with the pairwise distances of `ts.x()` already computed.
pub fn fit_with_distances(ts: &TrainingSet, d: &PairwiseSqDist, h: KernelHyper) -> Result<GpModel> {
    h.validate()?;
    if d.len() != ts.len() {
        return Err(Error::input("distance matrix does not match training set"));
    }
    let (chol, jitter) = d.factor(&h)?;
    let alpha = chol.solve(ts.y());
    Ok(GpModel {
        hyper: h.with_jitter(jitter),
        x_train: ts.x.clone(),
        y_train: ts.y.clone(),
        chol,
        alpha,
    })
}

impl GpModel {
    /// Hyperparameters actually used, including any escalated jitter.
    pub fn hyper(&self) -> &KernelHyper {
        &self.hyper
    }

    pub fn chol(&self) -> &Cholesky {
        &self.chol
    }

    /// `(K + σ²_j I)⁻¹ y`.
    pub fn solve_vec(&self) -> &[f64] {
        &self.alpha
    }

    pub fn x_train(&self) -> ArrayView2<'_, f64> {
        self.x_train.view()
    }

    pub fn y_train(&self) -> &[f64] {
        &self.y_train
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut k: Vec<f64> = self
            .x_train
            .rows()
            .into_iter()
            .map(|r| self.hyper.eval_sq(squared_distance(r.as_slice().unwrap(), x)))
            .collect();
        Ok(self.predict_from_cross(&mut k))
    }

    pub fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<Prediction>> {
        xs.rows()
            .into_iter()
            .map(|r| self.predict(&r.to_vec()))
            .collect()
    }

    /// Predict from the squared distances between a test point and every
    /// training row. `scratch` is reused across calls to avoid allocation.
    pub fn predict_from_sqdist(&self, d2: &[f64], scratch: &mut Vec<f64>) -> Prediction {
        debug_assert_eq!(d2.len(), self.alpha.len());
        scratch.clear();
        scratch.extend(d2.iter().map(|&v| self.hyper.eval_sq(v)));
        self.predict_from_cross(scratch)
    }

    /// `k` holds `k(X, x)` on entry and is overwritten with `L⁻¹ k(X, x)`.
    fn predict_from_cross(&self, k: &mut [f64]) -> Prediction {
        let mean = dot(k, &self.alpha);
        self.chol.solve_lower_in_place(k);
        let var = self.hyper.prior_variance() - dot(k, k);
        Prediction {
            mean,
            std: var.max(0.0).sqrt(),
        }
    }

    /// `−½ yᵀ(K + σ²_j I)⁻¹y − Σ log L_ii − (n/2) log 2π`.
    pub fn log_marginal_likelihood(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.alpha.len() {
            return Err(Error::Dimension {
                expected: self.alpha.len(),
                got: y.len(),
            });
        }
        let mut z = y.to_vec();
        self.chol.solve_lower_in_place(&mut z);
        let n = y.len() as f64;
        Ok(-0.5 * dot(&z, &z) - self.chol.half_log_det() - 0.5 * n * LN_2PI)
    }
}

/// Closed box for `(c, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub amplitude: (f64, f64),
    pub length_scale: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            amplitude: (1e-2, 1e3),
            length_scale: (1e-2, 1e3),
        }
    }
}

impl HyperBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("amplitude", self.amplitude), ("length scale", self.length_scale)] {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::input(format!("invalid {name} bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSearch {
    pub bounds: HyperBounds,
    /// Number of random starting points, in addition to any warm start.
    pub restarts: usize,
    pub relative_jitter: f64,
    /// Smallest step of the `log ℓ` pattern search before it stops.
    pub tolerance: f64,
}

impl Default for HyperSearch {
    fn default() -> Self {
        HyperSearch {
            bounds: HyperBounds::default(),
            restarts: 3,
            relative_jitter: DEFAULT_RELATIVE_JITTER,
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperOptimum {
    pub hyper: KernelHyper,
    pub log_likelihood: f64,
}

/// Maximize the log marginal likelihood over the bounded box.
/// Restart points are drawn from a ChaCha8 stream seeded with `seed`.
pub fn optimize_hyper(ts: &TrainingSet, search: &HyperSearch, seed: u64) -> Result<KernelHyper> {
    let d = PairwiseSqDist::new(ts.x());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    optimize_hyper_with(&d, ts.y(), search, None, &mut rng).map(|o| o.hyper)
}

/// Profile likelihood evaluator for a fixed `(distances, y)` pair.
struct Profile<'a> {
    d: &'a PairwiseSqDist,
    y: &'a [f64],
    search: &'a HyperSearch,
}

impl Profile<'_> {
    /// Best likelihood at `ln ℓ = t` with the amplitude solved in closed form.
    fn eval(&self, t: f64) -> Option<HyperOptimum> {
        let n = self.y.len() as f64;
        // Factor the unit-amplitude correlation matrix; c² rescales it afterwards.
        let unit = KernelHyper {
            amplitude: 1.0,
            length_scale: t.exp(),
            jitter: self.search.relative_jitter,
        };
        let (chol, rel_jitter) = self.d.factor(&unit).ok()?;
        let mut z = self.y.to_vec();
        chol.solve_lower_in_place(&mut z);
        let q = dot(&z, &z);
        let (c_lo, c_hi) = self.search.bounds.amplitude;
        let c2 = (q / n).clamp(c_lo * c_lo, c_hi * c_hi);
        let lml = -0.5 * q / c2 - chol.half_log_det() - 0.5 * n * c2.ln() - 0.5 * n * LN_2PI;
        if !lml.is_finite() {
            return None;
        }
        let c = c2.sqrt();
        Some(HyperOptimum {
            hyper: KernelHyper {
                amplitude: c,
                length_scale: unit.length_scale,
                jitter: rel_jitter * c2,
            },
            log_likelihood: lml,
        })
    }

    /// Pattern search on `ln ℓ` from `start`.
    fn local_search(&self, start: f64) -> Option<HyperOptimum> {
        let (lo, hi) = self.bounds_ln();
        // Very long length scales can be numerically singular even with jitter;
        // back off towards the lower bound until the start point factors.
        let mut t = start.clamp(lo, hi);
        let mut best = None;
        for _ in 0..8 {
            best = self.eval(t);
            if best.is_some() {
                break;
            }
            t = 0.5 * (t + lo);
        }
        let mut best = best?;
        let mut step = (0.25 * (hi - lo)).min(1.0);
        let mut dir = 1.0;
        while step > self.search.tolerance {
            let mut moved = false;
            for d in [dir, -dir] {
                let cand = (t + d * step).clamp(lo, hi);
                if cand == t {
                    continue;
                }
                if let Some(o) = self.eval(cand) {
                    if o.log_likelihood > best.log_likelihood {
                        best = o;
                        t = cand;
                        dir = d;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        Some(best)
    }

    fn bounds_ln(&self) -> (f64, f64) {
        let (lo, hi) = self.search.bounds.length_scale;
        (lo.ln(), hi.ln())
    }
}

/// Multi-start search over precomputed distances. `warm_start` is an extra
/// starting length scale tried before the random restarts.
pub fn optimize_hyper_with<R: Rng + ?Sized>(
    d: &PairwiseSqDist,
    y: &[f64],
    search: &HyperSearch,
    warm_start: Option<f64>,
    rng: &mut R,
) -> Result<HyperOptimum> {
    search.bounds.validate()?;
    if y.is_empty() || d.len() != y.len() {
        return Err(Error::input("training targets do not match distance matrix"));
    }
    if search.restarts == 0 && warm_start.is_none() {
        return Err(Error::input("at least one restart is required"));
    }
    let profile = Profile { d, y, search };
    let (lo, hi) = profile.bounds_ln();
    let mut starts: Vec<f64> = warm_start.map(f64::ln).into_iter().collect();
    starts.extend((0..search.restarts).map(|_| lo + (hi - lo) * rng.random::<f64>()));

    let mut best: Option<HyperOptimum> = None;
    for s in starts {
        if let Some(o) = profile.local_search(s) {
            if best.map_or(true, |b| o.log_likelihood > b.log_likelihood) {
                best = Some(o);
            }
        }
    }
    best.ok_or(Error::HyperSearch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_closed_forms() {
        let h = KernelHyper::new(1.0, 1.0);
        assert_eq!(kernel_eval(&[0.3, -2.0], &[0.3, -2.0], &h).unwrap(), 1.0);

        let ell = 0.7;
        let h = KernelHyper::new(1.0, ell);
        let v = kernel_eval(&[0.0, 0.0], &[ell * 2f64.sqrt(), 0.0], &h).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);

        let h = KernelHyper::new(2.0, 0.5);
        let v = kernel_eval(&[1.0, 2.0, 3.0], &[2.0, 2.0, 3.0], &h).unwrap();
        assert!((v - 4.0 * (-2f64).exp()).abs() < 1e-15);
        assert!((v - 0.541341).abs() < 1e-6);
    }

    #[test]
    fn kernel_rejects_mismatched_dims() {
        let h = KernelHyper::new(1.0, 1.0);
        assert!(matches!(
            kernel_eval(&[1.0], &[1.0, 2.0], &h),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn single_point_fit() {
        let ts = TrainingSet::new(array![[0.0]], vec![5.0]).unwrap();
        let m = fit(&ts, KernelHyper::new(1.0, 1.0).with_jitter(0.0)).unwrap();
        assert_eq!(m.chol().to_dense(), vec![1.0]);
        assert_eq!(m.solve_vec(), &[5.0]);
    }

    #[test]
    fn duplicated_point_without_jitter_fails() {
        let ts = TrainingSet::new(array![[1.0, 2.0], [1.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let err = fit(&ts, KernelHyper::new(1.0, 1.0).with_jitter(0.0)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
    }

    #[test]
    fn jitter_ladder_rescues_near_duplicates() {
        let ts = TrainingSet::new(array![[1.0], [1.0]], vec![1.0, 1.0]).unwrap();
        let m = fit(&ts, KernelHyper::new(1.0, 1.0).with_jitter(1e-17)).unwrap();
        assert!(m.hyper().jitter > 1e-17);
    }

    #[test]
    fn lml_closed_forms() {
        let ts = TrainingSet::new(array![[0.0]], vec![0.0]).unwrap();
        let m = fit(&ts, KernelHyper::new(1.0, 1.0).with_jitter(0.0)).unwrap();
        let v = m.log_marginal_likelihood(&[0.0]).unwrap();
        assert!((v + 0.918_938_533).abs() < 1e-9);
        let ts = TrainingSet::new(array![[0.0]], vec![1.0]).unwrap();
        let m = fit(&ts, KernelHyper::new(1.0, 1.0).with_jitter(0.0)).unwrap();
        let v = m.log_marginal_likelihood(&[1.0]).unwrap();
        assert!((v + 1.418_938_533).abs() < 1e-9);
    }

    #[test]
    fn far_point_recovers_prior() {
        let ts = TrainingSet::new(array![[0.0, 0.0], [1.0, 0.5]], vec![2.0, -1.0]).unwrap();
        let m = fit(&ts, KernelHyper::new(1.7, 0.5)).unwrap();
        let p = m.predict(&[100.0, 100.0]).unwrap();
        assert!(p.mean.abs() < 1e-6);
        assert!((p.std - 1.7).abs() < 1e-6);
    }

    #[test]
    fn constant_zero_targets_stay_in_bounds() {
        let x = Array2::from_shape_fn((12, 2), |(i, j)| (i * 3 + j) as f64 * 0.37);
        let ts = TrainingSet::new(x, vec![0.0; 12]).unwrap();
        let search = HyperSearch::default();
        let h = optimize_hyper(&ts, &search, 3).unwrap();
        let b = search.bounds;
        assert!(h.amplitude >= b.amplitude.0 && h.amplitude <= b.amplitude.1);
        assert!(h.length_scale >= b.length_scale.0 && h.length_scale <= b.length_scale.1);
        assert_eq!(h.amplitude, b.amplitude.0);
    }

    #[test]
    fn rejects_bad_search_config() {
        let ts = TrainingSet::new(array![[0.0], [1.0]], vec![0.0, 1.0]).unwrap();
        let mut s = HyperSearch::default();
        s.restarts = 0;
        assert!(optimize_hyper(&ts, &s, 0).is_err());
        let mut s = HyperSearch::default();
        s.bounds.length_scale = (0.0, 1.0);
        assert!(optimize_hyper(&ts, &s, 0).is_err());
    }
}
