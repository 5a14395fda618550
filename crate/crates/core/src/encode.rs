//! Feature encoding for loading cases.
//!
//! A loading case becomes a 33-component vector:
//!
//! | slots   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..14   | rescaled x-velocity `vx` at each depth     |
//! | 14..28  | rescaled y-velocity `vy` at each depth     |
//! | 28..33  | `α_x, α_y, σ, γ, ω_p` of the wave spectrum |
//!
//! The current rescaling weights each node by the square root of half the
//! width of its neighbouring depth intervals, so that the squared Euclidean
//! norm of the encoded current equals the trapezoidal estimate of
//! `∫ ‖u(z)‖² dz`. Euclidean distances between encoded currents are then
//! discrete L2 distances between velocity fields.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::oracle::{Target, TargetVector, TARGET_COUNT};

/// Depth grid (m) shared by every current in the reference data set.
pub const REFERENCE_DEPTHS: [f64; 14] = [
    0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 375.0, 800.0, 1200.0, 1600.0, 2000.0,
    2200.0,
];

pub const WAVE_FEATURES: usize = 5;
pub const FEATURE_DIM: usize = 2 * REFERENCE_DEPTHS.len() + WAVE_FEATURES;

/// Secondary spectral width used when the input omits it.
pub const DEFAULT_SPECTRAL_WIDTH: f64 = 0.07;

const COMPASS: [&str; 16] = [
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE", "S", "SSW", "SW", "WSW", "W", "WNW", "NW",
    "NNW",
];

/// Degrees for a 16-point compass label (N = 0°, clockwise in 22.5° steps).
pub fn compass_to_degrees(label: &str) -> Option<f64> {
    let label = label.trim();
    COMPASS
        .iter()
        .position(|c| c.eq_ignore_ascii_case(label))
        .map(|i| i as f64 * 22.5)
}

/// Parse an angle given either in degrees or as a compass point.
pub fn parse_angle(s: &str) -> Result<f64> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .or_else(|| compass_to_degrees(s))
        .ok_or_else(|| Error::input(format!("not an angle or compass point: {s:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentNode {
    pub depth: f64,
    /// Speed in m/s.
    pub speed: f64,
    /// Direction in degrees.
    pub angle: f64,
}

/// Discrete current velocity profile over the water column.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile {
    nodes: Vec<CurrentNode>,
}

impl CurrentProfile {
    pub fn new(nodes: Vec<CurrentNode>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::input("a current profile needs at least two depths"));
        }
        if nodes[0].depth != 0.0 {
            return Err(Error::input(format!(
                "current profile must start at depth 0, got {}",
                nodes[0].depth
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1].depth > w[0].depth) {
                return Err(Error::input(format!(
                    "depths must be strictly increasing ({} then {})",
                    w[0].depth, w[1].depth
                )));
            }
        }
        for n in &nodes {
            if !(n.speed >= 0.0 && n.speed.is_finite()) || !n.angle.is_finite() {
                return Err(Error::input(format!("invalid current node at depth {}", n.depth)));
            }
        }
        Ok(CurrentProfile { nodes })
    }

    pub fn nodes(&self) -> &[CurrentNode] {
        &self.nodes
    }

    pub fn depths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.depth)
    }

    pub fn on_grid(&self, grid: &[f64]) -> bool {
        self.nodes.len() == grid.len()
            && self.depths().zip(grid).all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0))
    }
}

/// Rescaled velocity components `[vx_0..vx_n, vy_0..vy_n]`.
pub fn encode_current(p: &CurrentProfile, grid: &[f64]) -> Result<Vec<f64>> {
    if !p.on_grid(grid) {
        return Err(Error::input("current profile depths do not match the pool grid"));
    }
    let x: Vec<f64> = p.depths().collect();
    let last = x.len() - 1;
    let mut vx = Vec::with_capacity(2 * x.len());
    let mut vy = Vec::with_capacity(x.len());
    for (i, node) in p.nodes.iter().enumerate() {
        let span = match i {
            0 => x[1] - x[0],
            i if i == last => x[last] - x[last - 1],
            i => x[i + 1] - x[i - 1],
        };
        let w = (0.5 * span).sqrt();
        let (s, c) = node.angle.to_radians().sin_cos();
        vx.push(w * node.speed * c);
        vy.push(w * node.speed * s);
    }
    vx.extend(vy);
    Ok(vx)
}

/// JONSWAP sea state as specified per loading case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpec {
    /// Significant height (m).
    pub height: f64,
    /// Peak period `T_p` (s).
    pub period: f64,
    /// Azimuth (degrees).
    pub azimuth: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl WaveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::input(format!("wave period must be > 0, got {}", self.period)));
        }
        if !(self.height >= 0.0) {
            return Err(Error::input(format!("wave height must be >= 0, got {}", self.height)));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::input(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::input("alpha and sigma must be > 0"));
        }
        if !self.azimuth.is_finite() {
            return Err(Error::input("azimuth must be finite"));
        }
        Ok(())
    }

    /// Peak angular frequency `2π / T_p`.
    pub fn peak_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }
}

/// `[α_x, α_y, σ, γ, ω_p]`.
pub fn encode_wave(w: &WaveSpec) -> Result<[f64; WAVE_FEATURES]> {
    w.validate()?;
    let (s, c) = w.azimuth.to_radians().sin_cos();
    Ok([w.alpha * c, w.alpha * s, w.sigma, w.gamma, w.peak_frequency()])
}

/// Full feature vector for one loading case on `grid`.
pub fn encode_case(current: &CurrentProfile, wave: &WaveSpec, grid: &[f64]) -> Result<Vec<f64>> {
    let mut f = encode_current(current, grid)?;
    f.extend(encode_wave(wave)?);
    Ok(f)
}

/// Column names of the encoded feature vector on a grid with `nodes` depths.
pub fn feature_names(nodes: usize) -> Vec<String> {
    (0..nodes)
        .map(|i| format!("vx{i}"))
        .chain((0..nodes).map(|i| format!("vy{i}")))
        .chain(["alpha_x", "alpha_y", "sigma", "gamma", "omega_p"].map(String::from))
        .collect()
}

/// Per-feature z-scoring fitted over the whole pool (population std).
/// Features with zero spread are only mean-subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_pool_normalization(pool: ArrayView2<'_, f64>) -> Result<NormalizationStats> {
    let m = pool.nrows();
    if m == 0 {
        return Err(Error::input("cannot normalize an empty pool"));
    }
    let inv = 1.0 / m as f64;
    let mut mean = Vec::with_capacity(pool.ncols());
    let mut std = Vec::with_capacity(pool.ncols());
    for col in pool.columns() {
        let mu = col.sum() * inv;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() * inv;
        mean.push(mu);
        std.push(var.sqrt());
    }
    Ok(NormalizationStats { mean, std })
}

impl NormalizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, mu), sd) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v -= mu;
            if *sd > 0.0 {
                *v /= sd;
            }
        }
    }

    pub fn normalize(&self, pool: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if pool.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: pool.ncols(),
            });
        }
        let mut out = pool.as_standard_layout().into_owned();
        for mut row in out.rows_mut() {
            self.apply(row.as_slice_mut().expect("standard layout"));
        }
        Ok(out)
    }
}

/// Affine map between a target's original units and the scale its model is trained on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetScaler {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaler {
    pub const IDENTITY: TargetScaler = TargetScaler {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }

    /// Convert a standard deviation from model scale to original units.
    pub fn std_to_original(&self, s: f64) -> f64 {
        s * self.scale
    }
}

/// Normalize labeled target rows: the FX columns are z-scored with the
/// statistics of these rows only; DNVUF-201 columns are left untouched.
pub fn normalize_targets(
    rows: &[TargetVector],
) -> Result<(Vec<TargetVector>, [TargetScaler; TARGET_COUNT])> {
    if rows.is_empty() {
        return Err(Error::input("no labeled rows to normalize"));
    }
    let inv = 1.0 / rows.len() as f64;
    let mut scalers = [TargetScaler::IDENTITY; TARGET_COUNT];
    for t in Target::ALL.into_iter().filter(|t| t.is_fx()) {
        let mean = rows.iter().map(|r| r[t]).sum::<f64>() * inv;
        let var = rows.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() * inv;
        let sd = var.sqrt();
        scalers[t.index()] = TargetScaler {
            offset: mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        };
    }
    let out = rows
        .iter()
        .map(|r| {
            let mut v = *r;
            for t in Target::ALL {
                v[t] = scalers[t.index()].normalize(r[t]);
            }
            v
        })
        .collect();
    Ok((out, scalers))
}
