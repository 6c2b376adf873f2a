//! Iterated random maps on a bounded state interval.
//!
//! An economy is a family of monotone self-maps of `[lo, hi]` together with a
//! law for the index drawn i.i.d. each period: the state evolves as
//! `x_{t+1} = f^{(a_t)}(x_t)`. The module provides single trajectories,
//! stationary sampling from many independently seeded chains, and the two
//! distributional diagnostics used to certify convergence to a unique
//! stationary law: CDF monotonicity from the extreme starts and the
//! meet-in-the-middle probability check.

mod solow;

pub use solow::{solow_fixed_point, solow_step, SolowFixedPoint, SolowParams};

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::write_file;
use crate::{path_rng, ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state bounds must be finite with lo < hi, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("initial state {value} outside [{lo}, {hi}]")]
    BadInitial { value: f64, lo: f64, hi: f64 },
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("need at least one path/sample")]
    NoPaths,
    #[error("invalid noise law: {0}")]
    BadNoise(String),
    #[error("invalid map table: {0}")]
    BadTable(String),
    #[error("invalid threshold grid: {0}")]
    BadThresholds(String),
    #[error("subset [{0}, {1}] is not a sub-interval of the state bounds")]
    BadSubset(f64, f64),
    #[error("invalid growth parameters: {0}")]
    BadParams(String),
    #[error("fixed-point iteration did not converge within {0} iterations")]
    NoConvergence(u64),
    #[error("invalid sample weights: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

impl ClassifyError for SimError {
    fn failure_kind(&self) -> FailureKind {
        match self {
            SimError::NoConvergence(_) => FailureKind::Numerical,
            SimError::Grid(e) => e.failure_kind(),
            _ => FailureKind::Validation,
        }
    }
}

/// Law of a scalar random coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Always `value`.
    Degenerate { value: f64 },
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Normal with the given mean and standard deviation.
    Normal { mean: f64, sd: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
}

impl NoiseLaw {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadNoise(msg));
        match *self {
            NoiseLaw::Degenerate { value } => {
                if !value.is_finite() {
                    return bad(format!("degenerate value {value} is not finite"));
                }
            }
            NoiseLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform bounds [{lo}, {hi}] are invalid"));
                }
            }
            NoiseLaw::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
                    return bad(format!("normal parameters ({mean}, {sd}) are invalid"));
                }
            }
            NoiseLaw::Exponential { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return bad(format!("exponential rate {rate} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Whether every draw is non-negative (required for coefficients that must
    /// preserve monotonicity).
    fn is_non_negative(&self) -> bool {
        match *self {
            NoiseLaw::Degenerate { value } => value >= 0.0,
            NoiseLaw::Uniform { lo, .. } => lo >= 0.0,
            NoiseLaw::Normal { mean, sd } => sd == 0.0 && mean >= 0.0,
            NoiseLaw::Exponential { .. } => true,
        }
    }

    fn prepare(&self) -> PreparedNoise {
        match *self {
            NoiseLaw::Degenerate { value } => PreparedNoise::Degenerate(value),
            NoiseLaw::Uniform { lo, hi } => {
                PreparedNoise::Uniform(Uniform::new(lo, hi).expect("validated bounds"))
            }
            NoiseLaw::Normal { mean, sd } => {
                if sd == 0.0 {
                    PreparedNoise::Degenerate(mean)
                } else {
                    PreparedNoise::Normal(Normal::new(mean, sd).expect("validated parameters"))
                }
            }
            NoiseLaw::Exponential { rate } => {
                PreparedNoise::Exponential(Exp::new(rate).expect("validated rate"))
            }
        }
    }
}

enum PreparedNoise {
    Degenerate(f64),
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    Exponential(Exp<f64>),
}

impl PreparedNoise {
    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            PreparedNoise::Degenerate(v) => *v,
            PreparedNoise::Uniform(d) => d.sample(rng),
            PreparedNoise::Normal(d) => d.sample(rng),
            PreparedNoise::Exponential(d) => d.sample(rng),
        }
    }
}

/// A monotone map given by sorted nodes with linear interpolation; values are
/// held constant beyond the first/last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTable {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl MonotoneTable {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::BadTable(msg.into()));
        if self.xs.len() < 2 || self.xs.len() != self.ys.len() {
            return bad("need at least two (x, y) nodes of equal length");
        }
        if self.xs.iter().chain(&self.ys).any(|v| !v.is_finite()) {
            return bad("nodes must be finite");
        }
        if self.xs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("x nodes must be strictly increasing");
        }
        if self.ys.windows(2).any(|w| w[0] > w[1]) {
            return bad("y nodes must be non-decreasing");
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let i = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// The map family an economy draws from each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// `x ↦ A·x + B` with `A ≥ 0` (monotone non-decreasing).
    Affine { slope: NoiseLaw, intercept: NoiseLaw },
    /// `x ↦ lo + (hi−lo)·r·u·(1−u)` with `u = (x−lo)/(hi−lo)`, clipped to the
    /// bounds. Not monotone; provided as the stock nonlinear family.
    LogisticClipped { rate: NoiseLaw },
    /// A finite set of user-supplied monotone interpolation tables; the index
    /// noise picks a table with the given probabilities.
    Table {
        tables: Vec<MonotoneTable>,
        weights: Vec<f64>,
    },
}

/// A random monotone-map economy on a bounded state interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMapEconomy {
    map_kind: MapKind,
    state_bounds: (f64, f64),
    n_individuals: u32,
}

impl RandomMapEconomy {
    pub fn new(
        map_kind: MapKind,
        state_bounds: (f64, f64),
        n_individuals: u32,
    ) -> Result<Self, SimError> {
        let (lo, hi) = state_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SimError::BadBounds(lo, hi));
        }
        if n_individuals == 0 {
            return Err(SimError::NoPaths);
        }
        match &map_kind {
            MapKind::Affine { slope, intercept } => {
                slope.validate()?;
                intercept.validate()?;
                if !slope.is_non_negative() {
                    return Err(SimError::BadNoise(
                        "slope law may draw negative values, which breaks monotonicity".into(),
                    ));
                }
            }
            MapKind::LogisticClipped { rate } => {
                rate.validate()?;
                if !rate.is_non_negative() {
                    return Err(SimError::BadNoise("logistic rate must be non-negative".into()));
                }
            }
            MapKind::Table { tables, weights } => {
                if tables.is_empty() || tables.len() != weights.len() {
                    return Err(SimError::BadTable(
                        "need matching, non-empty tables and weights".into(),
                    ));
                }
                for t in tables {
                    t.validate()?;
                }
                if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                    return Err(SimError::BadWeights("weights must be non-negative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(SimError::BadWeights(format!(
                        "weights sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(RandomMapEconomy {
            map_kind,
            state_bounds,
            n_individuals,
        })
    }

    pub fn state_bounds(&self) -> (f64, f64) {
        self.state_bounds
    }

    pub fn map_kind(&self) -> &MapKind {
        &self.map_kind
    }

    pub fn n_individuals(&self) -> u32 {
        self.n_individuals
    }

    fn prepare(&self) -> PreparedEconomy<'_> {
        let prepared = match &self.map_kind {
            MapKind::Affine { slope, intercept } => {
                PreparedMap::Affine(slope.prepare(), intercept.prepare())
            }
            MapKind::LogisticClipped { rate } => PreparedMap::Logistic(rate.prepare()),
            MapKind::Table { tables, weights } => {
                let mut cum = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for w in weights {
                    acc += w;
                    cum.push(acc);
                }
                PreparedMap::Table { tables, cum }
            }
        };
        PreparedEconomy {
            map: prepared,
            lo: self.state_bounds.0,
            hi: self.state_bounds.1,
        }
    }

    fn check_initial(&self, x: f64) -> Result<(), SimError> {
        let (lo, hi) = self.state_bounds;
        if !(x >= lo && x <= hi) {
            return Err(SimError::BadInitial { value: x, lo, hi });
        }
        Ok(())
    }
}

enum PreparedMap<'a> {
    Affine(PreparedNoise, PreparedNoise),
    Logistic(PreparedNoise),
    Table {
        tables: &'a [MonotoneTable],
        cum: Vec<f64>,
    },
}

struct PreparedEconomy<'a> {
    map: PreparedMap<'a>,
    lo: f64,
    hi: f64,
}

impl PreparedEconomy<'_> {
    /// One period: apply a freshly drawn map and clip to the state interval.
    /// Returns the new state and whether clipping occurred.
    #[inline]
    fn step<R: Rng>(&self, x: f64, rng: &mut R) -> (f64, bool) {
        let raw = match &self.map {
            PreparedMap::Affine(slope, intercept) => {
                let a = slope.sample(rng);
                let b = intercept.sample(rng);
                a * x + b
            }
            PreparedMap::Logistic(rate) => {
                let r = rate.sample(rng);
                let u = (x - self.lo) / (self.hi - self.lo);
                self.lo + (self.hi - self.lo) * (r * u * (1.0 - u))
            }
            PreparedMap::Table { tables, cum } => {
                let u: f64 = rng.random::<f64>();
                let total = *cum.last().unwrap();
                let idx = cum.partition_point(|&c| c < u * total).min(tables.len() - 1);
                tables[idx].eval(x)
            }
        };
        let clipped = raw.clamp(self.lo, self.hi);
        (clipped, clipped != raw)
    }
}

/// One simulated path, including its starting point and every visited state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: f64,
    pub seed: u64,
    /// `states[t]` is the state after `t` periods; `states[0] == initial`.
    pub states: Vec<f64>,
    /// Number of periods in which the drawn map left the state interval and
    /// the state was clipped back.
    pub clips: u64,
}

impl Trajectory {
    /// Writes the path as CSV with header `t,value`.
    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut out = String::from("t,value\n");
        for (t, v) in self.states.iter().enumerate() {
            out.push_str(&format!("{t},{v}\n"));
        }
        write_file(path, out.as_bytes())?;
        Ok(())
    }
}

/// Runs a single chain of `horizon` periods from `initial`.
pub fn simulate_chain(
    econ: &RandomMapEconomy,
    initial: f64,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, SimError> {
    econ.check_initial(initial)?;
    if horizon == 0 {
        return Err(SimError::BadHorizon);
    }
    let prepared = econ.prepare();
    let mut rng = path_rng(seed, 0);
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(initial);
    let mut clips = 0u64;
    let mut x = initial;
    for _ in 0..horizon {
        let (next, clipped) = prepared.step(x, &mut rng);
        x = next;
        clips += clipped as u64;
        states.push(x);
    }
    Ok(Trajectory {
        initial,
        seed,
        states,
        clips,
    })
}

/// A weighted sample, stored sorted with cumulative weights for CDF queries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Equal-weight sample.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::NoPaths);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(SimError::BadWeights("samples must be finite".into()));
        }
        samples.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let w = 1.0 / samples.len() as f64;
        let weights = vec![w; samples.len()];
        let cumulative = (1..=samples.len()).map(|i| i as f64 * w).collect();
        Ok(EmpiricalDistribution {
            samples,
            weights,
            cumulative,
        })
    }

    /// Weighted sample; weights must be non-negative and sum to 1 within 1e-9.
    pub fn new(samples: Vec<f64>, weights: Vec<f64>) -> Result<Self, SimError> {
        if samples.is_empty() || samples.len() != weights.len() {
            return Err(SimError::BadWeights(
                "samples and weights must be non-empty and of equal length".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(SimError::BadWeights("samples must be finite".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(SimError::BadWeights("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimError::BadWeights(format!(
                "weights sum to {total}, expected 1 within 1e-9"
            )));
        }
        let mut idx: Vec<usize> = (0..samples.len()).collect();
        idx.sort_unstable_by(|&a, &b| samples[a].partial_cmp(&samples[b]).unwrap());
        let samples: Vec<f64> = idx.iter().map(|&i| samples[i]).collect();
        let weights: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(EmpiricalDistribution {
            samples,
            weights,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sorted sample values.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let i = self.samples.partition_point(|&v| v <= x);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1].min(1.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - m) * (x - m))
            .sum()
    }

    /// Writes the sample as CSV with header `value,weight`.
    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut out = String::from("value,weight\n");
        for (v, w) in self.samples.iter().zip(&self.weights) {
            out.push_str(&format!("{v},{w}\n"));
        }
        write_file(path, out.as_bytes())?;
        Ok(())
    }
}

/// Where stationary-sampling chains start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// All chains start at this state.
    Fixed(f64),
    /// Each chain draws its start uniformly on the state interval.
    UniformOnBounds,
}

/// A stationary sample plus the clip diagnostics accumulated while producing
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySample {
    pub distribution: EmpiricalDistribution,
    pub clips: u64,
}

/// Draws `n_samples` states, each taken after `burn_in` periods of its own
/// independently seeded chain started according to `start`.
pub fn estimate_stationary_from(
    econ: &RandomMapEconomy,
    start: Start,
    burn_in: usize,
    n_samples: usize,
    seed: u64,
) -> Result<StationarySample, SimError> {
    if n_samples == 0 {
        return Err(SimError::NoPaths);
    }
    if let Start::Fixed(x) = start {
        econ.check_initial(x)?;
    }
    let (lo, hi) = econ.state_bounds();
    let prepared = econ.prepare();
    let mut samples = Vec::with_capacity(n_samples);
    let mut clips = 0u64;
    for i in 0..n_samples {
        let mut rng = path_rng(seed, i as u64);
        let mut x = match start {
            Start::Fixed(x) => x,
            Start::UniformOnBounds => rng.random::<f64>() * (hi - lo) + lo,
        };
        for _ in 0..burn_in {
            let (next, clipped) = prepared.step(x, &mut rng);
            x = next;
            clips += clipped as u64;
        }
        samples.push(x);
    }
    Ok(StationarySample {
        distribution: EmpiricalDistribution::from_samples(samples)?,
        clips,
    })
}

/// Stationary sampling with uniformly drawn starts.
pub fn estimate_stationary(
    econ: &RandomMapEconomy,
    burn_in: usize,
    n_samples: usize,
    seed: u64,
) -> Result<StationarySample, SimError> {
    estimate_stationary_from(econ, Start::UniformOnBounds, burn_in, n_samples, seed)
}

/// Monte-Carlo estimates of `Pr(X_t ≤ y)` for every period `t = 0..=horizon`
/// and every threshold `y`, from a common batch of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfMatrix {
    pub thresholds: Vec<f64>,
    /// `probs[t][k] = Pr(X_t ≤ thresholds[k])`.
    pub probs: Vec<Vec<f64>>,
    pub n_paths: usize,
}

/// Direction a CDF matrix is expected to move in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    NonIncreasing,
    NonDecreasing,
}

impl CdfMatrix {
    /// Worst violation of the expected monotonicity across consecutive
    /// periods, in units of the Monte-Carlo standard error of the difference
    /// (independent-binomial pooling, which is conservative for common-path
    /// estimates). Exact violations at zero standard error return infinity.
    pub fn max_violation_sigmas(&self, direction: Monotonicity) -> f64 {
        let n = self.n_paths as f64;
        let mut worst: f64 = 0.0;
        for t in 1..self.probs.len() {
            for k in 0..self.thresholds.len() {
                let p0 = self.probs[t - 1][k];
                let p1 = self.probs[t][k];
                let delta = match direction {
                    Monotonicity::NonIncreasing => p1 - p0,
                    Monotonicity::NonDecreasing => p0 - p1,
                };
                if delta <= 0.0 {
                    continue;
                }
                let se = ((p0 * (1.0 - p0) + p1 * (1.0 - p1)) / n).sqrt();
                worst = worst.max(if se == 0.0 { f64::INFINITY } else { delta / se });
            }
        }
        worst
    }
}

/// Runs `n_paths` chains from each extreme of the state interval and tabulates
/// `Pr(X_t ≤ y)` per period and threshold. Returns the matrix for the
/// lower-start batch and the upper-start batch, in that order.
pub fn extreme_cdf_monotonicity(
    econ: &RandomMapEconomy,
    thresholds: &[f64],
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<(CdfMatrix, CdfMatrix), SimError> {
    if thresholds.is_empty() {
        return Err(SimError::BadThresholds("threshold grid is empty".into()));
    }
    if thresholds.iter().any(|v| !v.is_finite()) {
        return Err(SimError::BadThresholds("thresholds must be finite".into()));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::BadThresholds(
            "thresholds must be strictly increasing".into(),
        ));
    }
    if horizon == 0 {
        return Err(SimError::BadHorizon);
    }
    if n_paths == 0 {
        return Err(SimError::NoPaths);
    }
    let (lo, hi) = econ.state_bounds();
    let lo_matrix = cdf_matrix_from(econ, lo, thresholds, horizon, n_paths, seed, 0)?;
    let hi_matrix = cdf_matrix_from(econ, hi, thresholds, horizon, n_paths, seed, n_paths as u64)?;
    Ok((lo_matrix, hi_matrix))
}

fn cdf_matrix_from(
    econ: &RandomMapEconomy,
    initial: f64,
    thresholds: &[f64],
    horizon: usize,
    n_paths: usize,
    seed: u64,
    path_offset: u64,
) -> Result<CdfMatrix, SimError> {
    let prepared = econ.prepare();
    let mut counts = vec![vec![0u64; thresholds.len()]; horizon + 1];
    for i in 0..n_paths {
        let mut rng = path_rng(seed, path_offset + i as u64);
        let mut x = initial;
        tally(&mut counts[0], thresholds, x);
        for t in 1..=horizon {
            x = prepared.step(x, &mut rng).0;
            tally(&mut counts[t], thresholds, x);
        }
    }
    let probs = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / n_paths as f64).collect())
        .collect();
    Ok(CdfMatrix {
        thresholds: thresholds.to_vec(),
        probs,
        n_paths,
    })
}

#[inline]
fn tally(row: &mut [u64], thresholds: &[f64], x: f64) {
    // Thresholds are sorted: everything from the first one >= x counts.
    let start = thresholds.partition_point(|&y| y < x);
    for c in &mut row[start..] {
        *c += 1;
    }
}

/// The meet-in-the-middle check: after `horizon` periods, the chain from the
/// lower extreme should put mass inside the target window and the chain from
/// the upper extreme should put mass outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualityCheck {
    /// `Pr(X_horizon(lo start) ∈ [a, b])`.
    pub p_lower_start_inside: f64,
    /// `Pr(X_horizon(hi start) ∉ [a, b])`.
    pub p_upper_start_outside: f64,
}

pub fn equality_in_probability_check(
    econ: &RandomMapEconomy,
    subset: (f64, f64),
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<EqualityCheck, SimError> {
    let (a, b) = subset;
    let (lo, hi) = econ.state_bounds();
    if !(a.is_finite() && b.is_finite() && a < b && a >= lo && b <= hi) {
        return Err(SimError::BadSubset(a, b));
    }
    if horizon == 0 {
        return Err(SimError::BadHorizon);
    }
    if n_paths == 0 {
        return Err(SimError::NoPaths);
    }
    let prepared = econ.prepare();
    let run = |initial: f64, offset: u64| {
        let mut hits = 0u64;
        for i in 0..n_paths {
            let mut rng = path_rng(seed, offset + i as u64);
            let mut x = initial;
            for _ in 0..horizon {
                x = prepared.step(x, &mut rng).0;
            }
            hits += (x >= a && x <= b) as u64;
        }
        hits as f64 / n_paths as f64
    };
    let p_in = run(lo, 0);
    let p_in_from_hi = run(hi, n_paths as u64);
    Ok(EqualityCheck {
        p_lower_start_inside: p_in,
        p_upper_start_outside: 1.0 - p_in_from_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    fn affine_uniform_economy() -> RandomMapEconomy {
        RandomMapEconomy::new(
            MapKind::Affine {
                slope: NoiseLaw::Uniform { lo: 0.0, hi: 1.0 },
                intercept: NoiseLaw::Uniform { lo: 0.0, hi: 0.5 },
            },
            (0.0, 2.0),
            1,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_affine_trajectory_matches_hand_iteration() {
        let econ = RandomMapEconomy::new(
            MapKind::Affine {
                slope: NoiseLaw::Degenerate { value: 0.5 },
                intercept: NoiseLaw::Degenerate { value: 0.25 },
            },
            (0.0, 2.0),
            1,
        )
        .unwrap();
        let traj = simulate_chain(&econ, 1.0, 3, 9).unwrap();
        let expected = [1.0, 0.75, 0.625, 0.5625];
        for (got, want) in traj.states.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(traj.clips, 0);
    }

    #[test]
    fn trajectories_stay_within_bounds_and_are_seed_reproducible() {
        let econ = affine_uniform_economy();
        let a = simulate_chain(&econ, 1.0, 500, 11).unwrap();
        let b = simulate_chain(&econ, 1.0, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.states.iter().all(|&x| (0.0..=2.0).contains(&x)));
        let c = simulate_chain(&econ, 1.0, 500, 12).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn initial_outside_bounds_is_rejected() {
        let econ = affine_uniform_economy();
        assert!(matches!(
            simulate_chain(&econ, 2.5, 10, 1),
            Err(SimError::BadInitial { .. })
        ));
    }

    #[test]
    fn degenerate_noise_collapses_to_the_contraction_fixed_point() {
        let econ = RandomMapEconomy::new(
            MapKind::Affine {
                slope: NoiseLaw::Degenerate { value: 0.5 },
                intercept: NoiseLaw::Degenerate { value: 0.25 },
            },
            (0.0, 2.0),
            1,
        )
        .unwrap();
        let s = estimate_stationary(&econ, 1000, 64, 3).unwrap();
        // x* = 0.25 / (1 - 0.5) = 0.5
        assert!(s.distribution.samples().iter().all(|&x| (x - 0.5).abs() < 1e-9));
    }

    #[test]
    fn stationary_law_is_independent_of_the_start() {
        let econ = affine_uniform_economy();
        let lo = estimate_stationary_from(&econ, Start::Fixed(0.0), 300, 4000, 21).unwrap();
        let hi = estimate_stationary_from(&econ, Start::Fixed(2.0), 300, 4000, 22).unwrap();
        let d = ks_two_sample(lo.distribution.samples(), hi.distribution.samples()).unwrap();
        assert!(d < 0.05, "KS distance {d} too large for a unique stationary law");
    }

    #[test]
    fn monotone_slope_law_is_required_for_affine_maps() {
        let err = RandomMapEconomy::new(
            MapKind::Affine {
                slope: NoiseLaw::Normal { mean: 0.5, sd: 0.2 },
                intercept: NoiseLaw::Degenerate { value: 0.0 },
            },
            (0.0, 1.0),
            1,
        );
        assert!(matches!(err, Err(SimError::BadNoise(_))));
    }

    #[test]
    fn extreme_cdf_matrices_move_monotonically() {
        let econ = affine_uniform_economy();
        let thresholds: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
        let (lo, hi) = extreme_cdf_monotonicity(&econ, &thresholds, 20, 2000, 5).unwrap();
        assert!(lo.max_violation_sigmas(Monotonicity::NonIncreasing) <= 3.0);
        assert!(hi.max_violation_sigmas(Monotonicity::NonDecreasing) <= 3.0);
        // From the lower extreme the CDF starts at 1 everywhere.
        assert!(lo.probs[0].iter().all(|&p| p == 1.0));
        // From the upper extreme it starts at 0 below the top threshold.
        assert!(hi.probs[0][..9].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn equality_check_finds_mass_on_both_sides() {
        let econ = affine_uniform_economy();
        let check = equality_in_probability_check(&econ, (0.1, 0.3), 50, 10_000, 6).unwrap();
        assert!(check.p_lower_start_inside > 0.0);
        assert!(check.p_upper_start_outside > 0.0);
    }

    #[test]
    fn identity_maps_never_reach_a_subset_excluding_the_start() {
        let econ = RandomMapEconomy::new(
            MapKind::Affine {
                slope: NoiseLaw::Degenerate { value: 1.0 },
                intercept: NoiseLaw::Degenerate { value: 0.0 },
            },
            (0.0, 2.0),
            1,
        )
        .unwrap();
        let check = equality_in_probability_check(&econ, (0.1, 0.3), 50, 500, 6).unwrap();
        // The chain from the lower extreme is stuck at 0: the mixing
        // assumption fails and the check reports it as zero probability.
        assert_eq!(check.p_lower_start_inside, 0.0);
        assert_eq!(check.p_upper_start_outside, 1.0);
    }

    #[test]
    fn table_maps_interpolate_monotonically_and_respect_weights() {
        let up = MonotoneTable {
            xs: vec![0.0, 1.0],
            ys: vec![0.5, 1.0],
        };
        let econ = RandomMapEconomy::new(
            MapKind::Table {
                tables: vec![up.clone()],
                weights: vec![1.0],
            },
            (0.0, 1.0),
            1,
        )
        .unwrap();
        let traj = simulate_chain(&econ, 0.0, 2, 4).unwrap();
        assert!((traj.states[1] - 0.5).abs() < 1e-15);
        assert!((traj.states[2] - 0.75).abs() < 1e-15);

        let bad = MonotoneTable {
            xs: vec![0.0, 1.0],
            ys: vec![1.0, 0.5],
        };
        assert!(matches!(
            RandomMapEconomy::new(
                MapKind::Table {
                    tables: vec![bad],
                    weights: vec![1.0]
                },
                (0.0, 1.0),
                1
            ),
            Err(SimError::BadTable(_))
        ));
    }

    #[test]
    fn logistic_maps_stay_inside_bounds_for_large_rates() {
        let econ = RandomMapEconomy::new(
            MapKind::LogisticClipped {
                rate: NoiseLaw::Uniform { lo: 3.5, hi: 4.5 },
            },
            (0.0, 1.0),
            1,
        )
        .unwrap();
        let traj = simulate_chain(&econ, 0.3, 2000, 8).unwrap();
        assert!(traj.states.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(traj.clips > 0, "rates above 4 must trigger clipping");
    }

    #[test]
    fn weighted_empirical_distribution_validates_and_queries() {
        let d = EmpiricalDistribution::new(vec![2.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(d.samples(), &[1.0, 2.0]);
        assert!((d.cdf(1.0) - 0.75).abs() < 1e-15);
        assert!((d.cdf(5.0) - 1.0).abs() < 1e-15);
        assert_eq!(d.cdf(0.5), 0.0);
        assert!((d.mean() - 1.25).abs() < 1e-15);
        assert!(EmpiricalDistribution::new(vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn stationary_sample_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stationary.csv");
        let econ = affine_uniform_economy();
        let s = estimate_stationary(&econ, 50, 100, 17).unwrap();
        s.distribution.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("value,weight"));
        assert_eq!(lines.count(), 100);
    }
}
