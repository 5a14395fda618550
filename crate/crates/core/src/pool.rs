//! The candidate pool: every loading case that could be simulated, with its
//! encoded features and the pool-wide normalization.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::{
    encode_case, fit_pool_normalization, CurrentNode, CurrentProfile, NormalizationStats,
    WaveSpec, DEFAULT_SPECTRAL_WIDTH, REFERENCE_DEPTHS,
};
use crate::error::{Error, Result};
use crate::CaseId;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingCase {
    pub id: CaseId,
    pub current: CurrentProfile,
    pub wave: WaveSpec,
}

#[derive(Debug, Clone)]
pub struct Pool {
    ids: Vec<CaseId>,
    index: HashMap<CaseId, usize>,
    raw: Array2<f64>,
    features: Array2<f64>,
    stats: NormalizationStats,
}

impl Pool {
    /// Build from already-encoded (not yet normalized) feature rows.
    pub fn from_encoded(ids: Vec<CaseId>, raw: Array2<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::input("pool is empty"));
        }
        if ids.len() != raw.nrows() {
            return Err(Error::input(format!(
                "{} case ids for {} feature rows",
                ids.len(),
                raw.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(Error::input(format!("duplicate case id {id}")));
            }
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("pool features contain non-finite values"));
        }
        let raw = raw.as_standard_layout().into_owned();
        let stats = fit_pool_normalization(raw.view())?;
        let features = stats.normalize(raw.view())?;
        Ok(Pool {
            ids,
            index,
            raw,
            features,
            stats,
        })
    }

    /// Encode every case on `grid` and normalize over the whole pool.
    pub fn from_cases(cases: &[LoadingCase], grid: &[f64]) -> Result<Self> {
        let dim = 2 * grid.len() + crate::encode::WAVE_FEATURES;
        let mut flat = Vec::with_capacity(cases.len() * dim);
        for c in cases {
            let f = encode_case(&c.current, &c.wave, grid)
                .map_err(|e| Error::input(format!("case {}: {e}", c.id)))?;
            flat.extend(f);
        }
        let raw = Array2::from_shape_vec((cases.len(), dim), flat)
            .map_err(|e| Error::input(e.to_string()))?;
        Self::from_encoded(cases.iter().map(|c| c.id).collect(), raw)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn ids(&self) -> &[CaseId] {
        &self.ids
    }

    pub fn position(&self, id: CaseId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Normalized feature matrix, one row per case in [`Pool::ids`] order.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Normalized features of the case at `pos`.
    pub fn row(&self, pos: usize) -> &[f64] {
        self.features.row(pos).to_slice().expect("standard layout")
    }

    /// Encoded features before normalization.
    pub fn raw(&self) -> ArrayView2<'_, f64> {
        self.raw.view()
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }
}

/// Plausible random loading cases on the reference depth grid.
///
/// Currents decay with depth from a random surface speed and veer in
/// 22.5° compass steps; waves draw height, period, azimuth and peak
/// enhancement, with the base coefficient from the usual JONSWAP relation
/// `α = 5.061 H²/T_p⁴ (1 − 0.287 ln γ)`.
pub fn synthetic_cases(size: usize, seed: u64) -> Vec<LoadingCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|i| LoadingCase {
            id: CaseId(i as u32),
            current: random_current(&mut rng),
            wave: random_wave(&mut rng),
        })
        .collect()
}

fn random_current<R: Rng>(rng: &mut R) -> CurrentProfile {
    let surface = 0.2 + rng.random::<f64>();
    let floor = 0.1 + 0.3 * rng.random::<f64>();
    let decay = 150.0 + 650.0 * rng.random::<f64>();
    let mut sector = rng.random_range(0..16u32) as i32;
    let nodes = REFERENCE_DEPTHS
        .iter()
        .map(|&depth| {
            let shape = floor + (1.0 - floor) * (-depth / decay).exp();
            let noise = 1.0 + 0.1 * (2.0 * rng.random::<f64>() - 1.0);
            let speed = (100.0 * surface * shape * noise).round() / 100.0;
            if rng.random::<f64>() < 0.3 {
                sector += if rng.random::<bool>() { 1 } else { -1 };
            }
            CurrentNode {
                depth,
                speed,
                angle: sector.rem_euclid(16) as f64 * 22.5,
            }
        })
        .collect();
    CurrentProfile::new(nodes).expect("generated profile is valid")
}

fn random_wave<R: Rng>(rng: &mut R) -> WaveSpec {
    let height = 0.5 + 7.5 * rng.random::<f64>();
    let period = 4.0 + 12.0 * rng.random::<f64>();
    let azimuth = rng.random_range(0..8u32) as f64 * 45.0;
    let gamma = 1.0 + 4.0 * rng.random::<f64>();
    let alpha = 5.061 * height * height / period.powi(4) * (1.0 - 0.287 * gamma.ln());
    WaveSpec {
        height,
        period,
        azimuth,
        alpha,
        gamma,
        sigma: DEFAULT_SPECTRAL_WIDTH,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::FEATURE_DIM;

    #[test]
    fn synthetic_pool_shape() {
        let cases = synthetic_cases(526, 1);
        let pool = Pool::from_cases(&cases, &REFERENCE_DEPTHS).unwrap();
        assert_eq!(pool.len(), 526);
        assert_eq!(pool.dim(), FEATURE_DIM);
        assert_eq!(pool.position(CaseId(525)), Some(525));
        for c in &cases {
            c.wave.validate().unwrap();
        }
    }

    #[test]
    fn synthetic_pool_is_seeded() {
        assert_eq!(synthetic_cases(20, 5), synthetic_cases(20, 5));
        assert_ne!(synthetic_cases(20, 5), synthetic_cases(20, 6));
    }

    #[test]
    fn reference_wave_alpha_relation() {
        // the base coefficient of the reference wave follows the same relation
        let (h, tp, g) = (1.7f64, 4.0f64, 3.240175f64);
        let alpha = 5.061 * h * h / tp.powi(4) * (1.0 - 0.287 * g.ln());
        assert!((alpha - 0.037856).abs() < 2e-6);
    }

    #[test]
    fn rejects_bad_pools() {
        let raw = Array2::zeros((2, 3));
        assert!(Pool::from_encoded(vec![CaseId(1), CaseId(1)], raw.clone()).is_err());
        assert!(Pool::from_encoded(vec![CaseId(1)], raw).is_err());
        assert!(Pool::from_encoded(vec![], Array2::zeros((0, 3))).is_err());
    }
}
