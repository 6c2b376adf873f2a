//! The deterministic growth map `x ↦ β₁·x^exponent − (β₂ − 1)·x`, its fixed
//! point, and the tangent of the production term at that point. The tangent
//! coefficients are what the affine random-map family calibrates to.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Parameters of the deterministic growth map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolowParams {
    /// Multiplier on the production term (β₁ > 0).
    pub beta1: f64,
    /// Retention/depreciation parameter (β₂ ∈ (0, 1]).
    pub beta2: f64,
    /// Curvature of the production term (exponent ∈ (0, 1)).
    pub exponent: f64,
}

impl SolowParams {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.beta1.is_finite() && self.beta1 > 0.0) {
            return Err(SimError::BadParams(format!("beta1 = {} must be > 0", self.beta1)));
        }
        if !(self.beta2.is_finite() && self.beta2 > 0.0 && self.beta2 <= 1.0) {
            return Err(SimError::BadParams(format!(
                "beta2 = {} must lie in (0, 1]",
                self.beta2
            )));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(SimError::BadParams(format!(
                "exponent = {} must lie in (0, 1)",
                self.exponent
            )));
        }
        Ok(())
    }
}

/// One period of the deterministic growth map:
/// `β₁·x^exponent − (β₂ − 1)·x`.
pub fn solow_step(params: &SolowParams, x: f64) -> Result<f64, SimError> {
    params.validate()?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SimError::BadParams(format!("state x = {x} must be finite and >= 0")));
    }
    Ok(params.beta1 * x.powf(params.exponent) - (params.beta2 - 1.0) * x)
}

/// The fixed point of the growth map together with the tangent of the
/// production term `x^exponent` at that point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolowFixedPoint {
    pub x_star: f64,
    /// Marginal product at the fixed point: `exponent · x*^(exponent−1)`.
    pub slope: f64,
    /// Intercept of the tangent line: `x*^exponent − slope · x*`.
    pub intercept: f64,
    pub iterations: u64,
}

const MAX_FIXED_POINT_ITERATIONS: u64 = 1_000_000;

/// Finds the positive fixed point by iterating the map from x = 1 until the
/// relative update falls below 1e-12.
pub fn solow_fixed_point(params: &SolowParams) -> Result<SolowFixedPoint, SimError> {
    params.validate()?;
    let mut x = 1.0f64;
    let mut iterations = 0u64;
    loop {
        let next = params.beta1 * x.powf(params.exponent) - (params.beta2 - 1.0) * x;
        iterations += 1;
        let done = (next - x).abs() <= 1e-12 * next.abs().max(1.0);
        x = next;
        if done {
            break;
        }
        if iterations >= MAX_FIXED_POINT_ITERATIONS {
            return Err(SimError::NoConvergence(iterations));
        }
    }
    // The map contracts slowly when its slope at the fixed point is close to
    // one, so the loop alone can stall ~1e-10 away. A few Newton steps on
    // g(x) = β₁·x^e − β₂·x land on the root to machine precision.
    for _ in 0..4 {
        let g = params.beta1 * x.powf(params.exponent) - params.beta2 * x;
        let dg = params.beta1 * params.exponent * x.powf(params.exponent - 1.0) - params.beta2;
        let step = g / dg;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    let slope = params.exponent * x.powf(params.exponent - 1.0);
    let intercept = x.powf(params.exponent) - slope * x;
    Ok(SolowFixedPoint {
        x_star: x,
        slope,
        intercept,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: SolowParams = SolowParams {
        beta1: 0.3,
        beta2: 0.1,
        exponent: 0.5,
    };

    #[test]
    fn step_matches_hand_values() {
        // 0.3·1 + 0.9·1 = 1.2 and the fixed point maps to itself.
        assert!((solow_step(&PARAMS, 1.0).unwrap() - 1.2).abs() < 1e-15);
        assert!((solow_step(&PARAMS, 9.0).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_and_tangent_match_the_closed_form() {
        // x* = (beta1/beta2)^(1/(1-exponent)) = 3² = 9,
        // slope = 0.5·9^(−0.5) = 1/6, intercept = 3 − 9/6 = 1.5.
        let fp = solow_fixed_point(&PARAMS).unwrap();
        assert!((fp.x_star - 9.0).abs() < 1e-10);
        assert!((fp.slope - 1.0 / 6.0).abs() < 1e-11);
        assert!((fp.intercept - 1.5).abs() < 1e-10);
        // The tangent reproduces the production value at the fixed point.
        assert!((fp.intercept + fp.slope * fp.x_star - fp.x_star.powf(0.5)).abs() < 1e-10);
    }

    #[test]
    fn closed_form_holds_across_parameter_grid() {
        for &beta1 in &[0.2, 0.5, 1.3] {
            for &beta2 in &[0.05, 0.3, 1.0] {
                for &e in &[0.2, 0.5, 0.8] {
                    let p = SolowParams {
                        beta1,
                        beta2,
                        exponent: e,
                    };
                    let fp = solow_fixed_point(&p).unwrap();
                    let closed = (beta1 / beta2).powf(1.0 / (1.0 - e));
                    assert!(
                        (fp.x_star - closed).abs() < 1e-9 * closed.max(1.0),
                        "params {p:?}: {} vs {closed}",
                        fp.x_star
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = PARAMS;
        p.beta1 = 0.0;
        assert!(matches!(solow_fixed_point(&p), Err(SimError::BadParams(_))));
        let mut p = PARAMS;
        p.beta2 = 1.5;
        assert!(matches!(solow_fixed_point(&p), Err(SimError::BadParams(_))));
        let mut p = PARAMS;
        p.exponent = 1.0;
        assert!(matches!(solow_fixed_point(&p), Err(SimError::BadParams(_))));
        assert!(matches!(
            solow_step(&PARAMS, -1.0),
            Err(SimError::BadParams(_))
        ));
    }
}
