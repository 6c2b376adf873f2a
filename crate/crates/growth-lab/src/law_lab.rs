//! Closed-form law algebra for the Gamma family plus the auxiliary laws the
//! aggregation results produce: order-statistic maxima, power-law densities
//! from the first-order growth ODE, and the discrete zeta law. The module also
//! hosts the first-order differential residual used to test Gaussian-type
//! densities on a grid.
//!
//! Conventions: `GammaLaw { alpha, beta }` is shape `alpha` and **rate**
//! `beta` (mean `alpha/beta`, variance `alpha/beta²`).

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridDensity;
use crate::special;
use crate::{ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum LawError {
    #[error("shape must be positive and finite, got {0}")]
    BadShape(f64),
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("law {index} has rate {got}, which differs from {expected} by more than 1e-12")]
    RateMismatch { expected: f64, got: f64, index: usize },
    #[error("need at least one law to aggregate")]
    EmptyLawList,
    #[error("scale factor must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("divisor must be at least 1")]
    BadDivisor,
    #[error("boundary value must be positive and finite, got {0}")]
    BadBoundaryValue(f64),
    #[error("growth exponent must be finite, got {0}")]
    BadExponent(f64),
    #[error("zeta exponent must exceed 1 for a normalizable law, got {0}")]
    BadZetaExponent(f64),
    #[error("zeta support starts at 1, got {0}")]
    BadZetaSupport(u64),
    #[error("zeta truncation must be at least 10 terms, got {0}")]
    BadTruncation(usize),
}

impl ClassifyError for LawError {
    fn failure_kind(&self) -> FailureKind {
        FailureKind::Validation
    }
}

/// Gamma law with shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, LawError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(LawError::BadShape(alpha));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(LawError::BadRate(beta));
        }
        Ok(GammaLaw { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    /// Density at `x`; zero for negative `x`. At `x = 0` the density is 0,
    /// `beta`, or +inf according to whether the shape is above, at, or below 1.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return if self.alpha > 1.0 {
                0.0
            } else if self.alpha == 1.0 {
                self.beta
            } else {
                f64::INFINITY
            };
        }
        (self.alpha * self.beta.ln() + (self.alpha - 1.0) * x.ln()
            - self.beta * x
            - special::ln_gamma(self.alpha))
            .exp()
    }

    /// CDF at `x` via the regularized lower incomplete gamma.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        special::regularized_lower_gamma(self.alpha, self.beta * x)
    }

    /// Draws `n` samples. Sampling goes through the stock Gamma sampler, so
    /// Monte-Carlo checks against [`GammaLaw::cdf`] exercise two independent
    /// routes to the same law.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let dist = rand_distr::Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("constructor-validated parameters");
        (0..n).map(|_| dist.sample(rng)).collect()
    }

    /// Tabulates the density on `[0, x_max]` with step `dx`.
    pub fn density_grid(&self, dx: f64, x_max: f64) -> Result<GridDensity, crate::grid::GridError> {
        let n = (x_max / dx).round() as usize + 1;
        GridDensity::from_fn(0.0, dx, n, |x| self.pdf(x))
    }
}

/// Sum of independent Gamma variables with a common rate: shapes add.
pub fn gamma_sum(laws: &[GammaLaw]) -> Result<GammaLaw, LawError> {
    let first = laws.first().ok_or(LawError::EmptyLawList)?;
    let mut alpha = 0.0;
    for (index, law) in laws.iter().enumerate() {
        if (law.beta - first.beta).abs() > 1e-12 {
            return Err(LawError::RateMismatch {
                expected: first.beta,
                got: law.beta,
                index,
            });
        }
        alpha += law.alpha;
    }
    GammaLaw::new(alpha, first.beta)
}

/// Law of `c·X`: the rate rescales, `Gamma(alpha, beta/c)`.
pub fn gamma_scale(law: &GammaLaw, c: f64) -> Result<GammaLaw, LawError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(LawError::BadScale(c));
    }
    GammaLaw::new(law.alpha, law.beta / c)
}

/// The n-th convolution root: the law whose n-fold sum recovers `law`
/// (infinite divisibility of the Gamma family).
pub fn gamma_divide(law: &GammaLaw, n: u32) -> Result<GammaLaw, LawError> {
    if n == 0 {
        return Err(LawError::BadDivisor);
    }
    GammaLaw::new(law.alpha / n as f64, law.beta)
}

/// `Pr(max of n i.i.d. draws ≤ x) = cdf(x)^n`.
pub fn max_statistic_prob(law: &GammaLaw, x: f64, n: u64) -> f64 {
    law.cdf(x).powi(n.min(i32::MAX as u64) as i32)
}

/// Solution of the first-order growth ODE `x·P′(x) = a·P(x)` on `x ≥ 1` with
/// boundary value `P(1) = p1`: the pure power `P(x) = p1·x^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSolution {
    pub p1: f64,
    /// The exponent equals the growth-rate parameter `a` of the ODE itself;
    /// callers wanting a decaying tail must pass a negative rate.
    pub exponent: f64,
}

impl PowerLawSolution {
    pub fn eval(&self, x: f64) -> f64 {
        self.p1 * x.powf(self.exponent)
    }
}

pub fn power_law_solve(growth_rate: f64, p1: f64) -> Result<PowerLawSolution, LawError> {
    if !growth_rate.is_finite() {
        return Err(LawError::BadExponent(growth_rate));
    }
    if !(p1.is_finite() && p1 > 0.0) {
        return Err(LawError::BadBoundaryValue(p1));
    }
    Ok(PowerLawSolution {
        p1,
        exponent: growth_rate,
    })
}

/// Discrete zeta law on x = 1, 2, 3, …: `pmf(x) = x^(−gamma) / ζ(gamma)`,
/// with the normalizer summed to `truncation` terms plus an Euler–Maclaurin
/// tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaLaw {
    gamma: f64,
    truncation: usize,
    normalizer: f64,
}

pub const ZETA_DEFAULT_TRUNCATION: usize = 1_000_000;

impl ZetaLaw {
    pub fn new(gamma: f64, truncation: usize) -> Result<Self, LawError> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(LawError::BadZetaExponent(gamma));
        }
        if truncation < 10 {
            return Err(LawError::BadTruncation(truncation));
        }
        Ok(ZetaLaw {
            gamma,
            truncation,
            normalizer: special::zeta(gamma, truncation),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn pmf(&self, x: u64) -> Result<f64, LawError> {
        if x == 0 {
            return Err(LawError::BadZetaSupport(x));
        }
        Ok((x as f64).powf(-self.gamma) / self.normalizer)
    }

    /// Probability mass above `from` (exclusive), by Euler–Maclaurin from the
    /// cut point; used to close partial sums of the pmf.
    pub fn tail_mass(&self, from: u64) -> f64 {
        let n = (from + 1) as f64;
        let s = self.gamma;
        (n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0)
            / self.normalizer
    }
}

/// One-off zeta pmf evaluation; prefer [`ZetaLaw`] when evaluating many points
/// with the same exponent.
pub fn zeta_pmf(gamma: f64, x: u64, truncation: usize) -> Result<f64, LawError> {
    ZetaLaw::new(gamma, truncation)?.pmf(x)
}

/// Pointwise first-order differential residual `P′(x) − x·P(x)` on the grid:
/// central differences inside, one-sided at the two edges. Densities
/// proportional to `exp(x²/2)` sit in its kernel; the standard normal density
/// returns `−2xφ(x)`.
pub fn first_order_residual(p: &GridDensity) -> Vec<f64> {
    let v = p.values();
    let n = v.len();
    let dx = p.dx();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let dp = if i == 0 {
            (v[1] - v[0]) / dx
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / dx
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * dx)
        };
        out.push(dp - p.x(i) * v[i]);
    }
    out
}
