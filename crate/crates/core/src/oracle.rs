//! Label providers and physical reference formulas.
//!
//! # Synthetic oracle recipe
//!
//! [`SyntheticOracle`] stands in for the finite-element solver. For a normalized
//! 33-component feature vector `x` and target `t` it returns
//!
//! `base_t + amp_t · logistic(w_t · x + b_t) + ripple_t · sin(c_t · x)`
//!
//! with `(base, amp, ripple)` = `(0.42, 0.26, 0.02)` for the three DNVUF-201
//! targets and `(−4450, 2000, 50)` for the three FX targets, so every output lies
//! in `[0.40, 0.70]` or `[−4500, −2400]` N respectively.
//!
//! The coefficients are drawn from `ChaCha8Rng::seed_from_u64(config_seed)`
//! (rand_chacha). Targets are visited in [`Target::ALL`] order and, for each, the
//! stream yields `w_t`, then `b_t`, then `c_t`:
//!
//! * a uniform `u` is `rng.random::<f64>()`, i.e. `(next_u64 >> 11) · 2⁻⁵³`;
//! * a unit vector takes 17 uniform pairs `(u1, u2)`, maps each through
//!   Box–Muller `r = sqrt(−2 ln(1 − u1))`, `(r cos 2πu2, r sin 2πu2)`, keeps the
//!   first 33 normals and divides by their Euclidean norm;
//! * the bias is `b_t = 2u − 1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::{WaveSpec, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::CaseId;

pub const TARGET_COUNT: usize = 6;

/// Standard gravity used by the wave spectrum unless told otherwise.
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    DnvEmpty,
    DnvMean,
    DnvWater,
    FxEmpty,
    FxMean,
    FxWater,
}

impl Target {
    pub const ALL: [Target; TARGET_COUNT] = [
        Target::DnvEmpty,
        Target::DnvMean,
        Target::DnvWater,
        Target::FxEmpty,
        Target::FxMean,
        Target::FxWater,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Target> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::DnvEmpty => "dnv_empty",
            Target::DnvMean => "dnv_mean",
            Target::DnvWater => "dnv_water",
            Target::FxEmpty => "fx_empty",
            Target::FxMean => "fx_mean",
            Target::FxWater => "fx_water",
        }
    }

    pub fn from_name(s: &str) -> Option<Target> {
        Self::ALL.into_iter().find(|t| t.name() == s.trim())
    }

    pub fn is_fx(self) -> bool {
        matches!(self, Target::FxEmpty | Target::FxMean | Target::FxWater)
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One simulation's outputs, indexed by [`Target`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVector(pub [f64; TARGET_COUNT]);

impl TargetVector {
    pub fn new(values: [f64; TARGET_COUNT]) -> Self {
        TargetVector(values)
    }
}

impl Index<Target> for TargetVector {
    type Output = f64;
    fn index(&self, t: Target) -> &f64 {
        &self.0[t.index()]
    }
}

impl IndexMut<Target> for TargetVector {
    fn index_mut(&mut self, t: Target) -> &mut f64 {
        &mut self.0[t.index()]
    }
}

/// Anything that can label a queried loading case.
pub trait Oracle: Send + Sync {
    /// `features` are the normalized features of case `id`.
    fn label(&self, id: CaseId, features: &[f64]) -> Result<TargetVector>;
}

/// Pre-computed results for one riser configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledTable {
    pub config_id: String,
    rows: BTreeMap<CaseId, TargetVector>,
}

impl LabeledTable {
    pub fn new(config_id: impl Into<String>) -> Self {
        LabeledTable {
            config_id: config_id.into(),
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: CaseId, row: TargetVector) -> Result<()> {
        if self.rows.insert(id, row).is_some() {
            return Err(Error::input(format!("case {id} appears twice in table {}", self.config_id)));
        }
        Ok(())
    }

    pub fn get(&self, id: CaseId) -> Option<&TargetVector> {
        self.rows.get(&id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CaseId, &TargetVector)> {
        self.rows.iter().map(|(k, v)| (*k, v))
    }

    /// Fails with the first id in `ids` that has no row.
    pub fn check_covers(&self, ids: impl IntoIterator<Item = CaseId>) -> Result<()> {
        match ids.into_iter().find(|id| !self.rows.contains_key(id)) {
            Some(id) => Err(Error::UnknownCase(id)),
            None => Ok(()),
        }
    }
}

pub fn table_oracle(table: &LabeledTable, id: CaseId) -> Result<TargetVector> {
    table.get(id).copied().ok_or(Error::UnknownCase(id))
}

impl Oracle for LabeledTable {
    fn label(&self, id: CaseId, _features: &[f64]) -> Result<TargetVector> {
        table_oracle(self, id)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SyntheticTarget {
    base: f64,
    amp: f64,
    ripple: f64,
    w: Vec<f64>,
    bias: f64,
    c: Vec<f64>,
}

impl SyntheticTarget {
    fn eval(&self, x: &[f64]) -> f64 {
        let s = logistic(dot(&self.w, x) + self.bias);
        self.base + self.amp * s + self.ripple * dot(&self.c, x).sin()
    }
}

/// Deterministic smooth stand-in for the simulator; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    config_seed: u64,
    targets: Vec<SyntheticTarget>,
}

/// `(base, amp, ripple)` per target kind.
const DNV_SHAPE: (f64, f64, f64) = (0.42, 0.26, 0.02);
const FX_SHAPE: (f64, f64, f64) = (-4450.0, 2000.0, 50.0);

impl SyntheticOracle {
    pub fn new(config_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config_seed);
        let targets = Target::ALL
            .iter()
            .map(|t| {
                let (base, amp, ripple) = if t.is_fx() { FX_SHAPE } else { DNV_SHAPE };
                let w = unit_vector(&mut rng, FEATURE_DIM);
                let bias = 2.0 * rng.random::<f64>() - 1.0;
                let c = unit_vector(&mut rng, FEATURE_DIM);
                SyntheticTarget {
                    base,
                    amp,
                    ripple,
                    w,
                    bias,
                    c,
                }
            })
            .collect();
        SyntheticOracle {
            config_seed,
            targets,
        }
    }

    pub fn config_seed(&self) -> u64 {
        self.config_seed
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<TargetVector> {
        if x.len() != FEATURE_DIM {
            return Err(Error::Dimension {
                expected: FEATURE_DIM,
                got: x.len(),
            });
        }
        let mut out = [0.0; TARGET_COUNT];
        for (o, t) in out.iter_mut().zip(&self.targets) {
            *o = t.eval(x);
        }
        Ok(TargetVector(out))
    }

    /// Upper bound on `|∂value_t/∂x|` along any unit direction.
    pub fn lipschitz_bound(&self, t: Target) -> f64 {
        let s = &self.targets[t.index()];
        s.amp * norm(&s.w) / 4.0 + s.ripple * norm(&s.c)
    }

    /// `base_t + amp_t · logistic(b_t)`, the value at the origin.
    pub fn value_at_origin(&self, t: Target) -> f64 {
        let s = &self.targets[t.index()];
        s.base + s.amp * logistic(s.bias)
    }
}

impl Oracle for SyntheticOracle {
    fn label(&self, _id: CaseId, features: &[f64]) -> Result<TargetVector> {
        self.evaluate(features)
    }
}

pub fn synthetic_oracle(x: &[f64], config_seed: u64) -> Result<TargetVector> {
    SyntheticOracle::new(config_seed).evaluate(x)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(dim + 1);
    while v.len() < dim {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        v.push(r * c);
        v.push(r * s);
    }
    v.truncate(dim);
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// JONSWAP power spectral density `S(ω)` of a sea state.
pub fn jonswap_spectrum(omega: f64, w: &WaveSpec, g: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::input(format!("angular frequency must be > 0, got {omega}")));
    }
    w.validate()?;
    let wp = w.peak_frequency();
    let r = (-(omega - wp).powi(2) / (2.0 * w.sigma * w.sigma * wp * wp)).exp();
    let shape = (w.alpha * g * g / omega.powi(5)) * (-1.25 * (wp / omega).powi(4)).exp();
    Ok(shape * w.gamma.powf(r))
}

/// Inputs of the DNV-ST-F201 combined loading check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnvInputs {
    /// Safety class factor `γ_SC`.
    pub gamma_sc: f64,
    /// Material resistance factor `γ_m`.
    pub gamma_m: f64,
    /// Design bending moment (N·m).
    pub moment: f64,
    /// Plastic bending moment capacity (N·m).
    pub plastic_moment: f64,
    /// Effective tension (N).
    pub tension: f64,
    /// Plastic axial force capacity (N).
    pub plastic_tension: f64,
    pub p_internal: f64,
    pub p_external: f64,
    pub p_min: f64,
    pub p_burst: f64,
    pub p_collapse: f64,
}

/// DNVUF-201 utilization factor.
///
/// Burst branch (`p_i > p_o`) and collapse branch (`p_i ≤ p_o`) as in the
/// standard. Fails with a domain error when the burst branch radicand
/// `1 − ((p_i − p_o)/p_b)²` is negative.
pub fn dnvuf201(d: &DnvInputs) -> Result<f64> {
    for (name, v) in [
        ("plastic moment", d.plastic_moment),
        ("plastic tension", d.plastic_tension),
        ("burst pressure", d.p_burst),
        ("collapse pressure", d.p_collapse),
    ] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
        }
    }
    let gamma = d.gamma_sc * d.gamma_m;
    let m = d.moment.abs() / d.plastic_moment;
    let t2 = (d.tension / d.plastic_tension).powi(2);
    if d.p_internal > d.p_external {
        let dp = (d.p_internal - d.p_external) / d.p_burst;
        let radicand = 1.0 - dp * dp;
        if radicand < 0.0 {
            return Err(Error::Domain(format!(
                "pressure difference exceeds burst pressure (radicand {radicand})"
            )));
        }
        Ok(gamma * (m * radicand.sqrt() + t2) + dp * dp)
    } else {
        let collapse = (d.p_external - d.p_min) / d.p_collapse;
        Ok(gamma * gamma * ((m + t2).powi(2) + collapse * collapse))
    }
}
