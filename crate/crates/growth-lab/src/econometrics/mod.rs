//! Estimation toolkit: ordinary least squares with classical diagnostics,
//! the Ljung–Box whiteness test, grouped-data Gamma maximum likelihood for
//! binned income tables, a recursive Gaussian forward filter for a
//! time-varying growth rate, and the two pipelines that wire those pieces to
//! GDP series — a reduced-form regression system on mean/variance increments
//! and a structural system linking yearly Gamma parameters to log growth.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::dataio::{GdpSeries, IncomeHistogram};
use crate::grid::{write_file, GridError};
use crate::law_lab::{GammaLaw, LawError};
use crate::special;
use crate::stats::{autocorrelations, sample_variance, StatsError};
use crate::{ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum EconError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("design matrix is rank deficient: rank {rank} of {cols} columns")]
    Collinear { rank: usize, cols: usize },
    #[error("lag count {lags} must be in [1, n/4) for n = {n}")]
    BadLags { lags: usize, n: usize },
    #[error("degenerate series: {0}")]
    DegenerateSeries(&'static str),
    #[error("window must be at least 2, got {0}")]
    BadWindow(usize),
    #[error("need at least 3 bins with positive counts, got {positive}: variance is unidentifiable")]
    TooFewBins { positive: usize },
    #[error("observation variance must be positive and finite, got {value} at index {index}")]
    BadVariance { index: usize, value: f64 },
    #[error("bad prior: {0}")]
    BadPrior(&'static str),
    #[error(
        "likelihood maximization did not converge after {iterations} iterations \
         (gradient norm {gradient_norm:.3e} at alpha = {alpha:.6}, beta = {beta:.6})"
    )]
    NoConvergence {
        iterations: u64,
        gradient_norm: f64,
        alpha: f64,
        beta: f64,
    },
    #[error("no Gamma law supplied for year {0}")]
    MisalignedYear(i32),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl ClassifyError for EconError {
    fn failure_kind(&self) -> FailureKind {
        match self {
            EconError::NoConvergence { .. } => FailureKind::Numerical,
            EconError::Grid(e) => e.failure_kind(),
            EconError::Law(e) => e.failure_kind(),
            EconError::Stats(e) => e.failure_kind(),
            _ => FailureKind::Validation,
        }
    }
}

// ---------------------------------------------------------------------------
// Ordinary least squares
// ---------------------------------------------------------------------------

/// Least-squares fit with classical (homoskedastic) inference. `degenerate`
/// marks fits whose response had no variation, where R² and the F statistic
/// are undefined and reported as NaN.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub f_statistic: f64,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub degenerate: bool,
}

impl RegressionResult {
    /// Significance stars at the 1% / 5% / 10% two-sided levels.
    pub fn stars(&self, index: usize) -> &'static str {
        let p = self.p_values[index];
        if p < 0.01 {
            "***"
        } else if p < 0.05 {
            "**"
        } else if p < 0.1 {
            "*"
        } else {
            ""
        }
    }

    /// All-zero placeholder for fits on degenerate inputs (zero-slope
    /// coefficients, NaN fit statistics).
    pub fn degenerate(names: &[&str], n_obs: usize) -> Self {
        let k = names.len();
        RegressionResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            coefficients: vec![0.0; k],
            standard_errors: vec![f64::NAN; k],
            t_values: vec![f64::NAN; k],
            p_values: vec![f64::NAN; k],
            r_squared: f64::NAN,
            adjusted_r_squared: f64::NAN,
            f_statistic: f64::NAN,
            residuals: Vec::new(),
            n_obs,
            degenerate: true,
        }
    }

    /// Writes the coefficient table as CSV `coefficient,estimate,std_error,stars`.
    pub fn write_table_csv(&self, path: &Path) -> Result<(), EconError> {
        let mut out = String::new();
        out.push_str("coefficient,estimate,std_error,stars\n");
        for i in 0..self.names.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.names[i], self.coefficients[i], self.standard_errors[i], self.stars(i)
            );
        }
        write_file(path, out.as_bytes())?;
        Ok(())
    }
}

/// Ordinary least squares of `response` on the given columns (the caller
/// supplies the intercept column). Rank is checked with a column-pivoted QR
/// before solving; standard errors are classical.
pub fn ols(
    names: &[&str],
    columns: &[Vec<f64>],
    response: &[f64],
) -> Result<RegressionResult, EconError> {
    let p = columns.len();
    let n = response.len();
    if p == 0 || n == 0 {
        return Err(EconError::TooFewObservations { need: 1, got: 0 });
    }
    if names.len() != p {
        return Err(EconError::LengthMismatch {
            left: names.len(),
            right: p,
        });
    }
    for col in columns {
        if col.len() != n {
            return Err(EconError::LengthMismatch {
                left: col.len(),
                right: n,
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(EconError::NonFinite("design column"));
        }
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(EconError::NonFinite("response"));
    }
    if n <= p {
        return Err(EconError::TooFewObservations { need: p + 1, got: n });
    }

    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let y = DVector::from_column_slice(response);

    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let tol = r[(0, 0)].abs().max(1.0) * (n.max(p) as f64) * f64::EPSILON;
    let rank = (0..p).filter(|&i| r[(i, i)].abs() > tol).count();
    if rank < p {
        return Err(EconError::Collinear { rank, cols: p });
    }

    let xtx = x.transpose() * &x;
    let chol = Cholesky::new(xtx).ok_or(EconError::Collinear { rank, cols: p })?;
    let beta = chol.solve(&(x.transpose() * &y));
    let fitted = &x * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();

    let y_bar = y.sum() / n as f64;
    let tss: f64 = (0..n).map(|i| (y[i] - y_bar).powi(2)).sum();
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let cov = chol.inverse() * sigma2;

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let standard_errors: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_values: Vec<f64> = (0..p)
        .map(|i| {
            if standard_errors[i] > 0.0 {
                coefficients[i] / standard_errors[i]
            } else if coefficients[i] == 0.0 {
                0.0
            } else {
                f64::INFINITY * coefficients[i].signum()
            }
        })
        .collect();
    let p_values: Vec<f64> = t_values
        .iter()
        .map(|t| special::student_t_p_two_sided(*t, df as usize))
        .collect();

    let degenerate = tss <= 1e-12 * n as f64 * y_bar.powi(2).max(1e-300);
    let (r_squared, adjusted_r_squared, f_statistic) = if degenerate {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let r2 = 1.0 - rss / tss;
        let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
        let f = if p > 1 {
            ((tss - rss) / (p as f64 - 1.0)) / (rss / df)
        } else {
            f64::NAN
        };
        (r2, adj, f)
    };

    Ok(RegressionResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        coefficients,
        standard_errors,
        t_values,
        p_values,
        r_squared,
        adjusted_r_squared,
        f_statistic,
        residuals,
        n_obs: n,
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// Ljung–Box whiteness test
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LjungBoxReport {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub n_obs: usize,
}

impl LjungBoxReport {
    pub fn is_white(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Ljung–Box portmanteau statistic `n(n+2)·Σ ρ̂²_k/(n−k)` over `lags`
/// autocorrelations, with the χ²(lags) upper-tail p-value.
pub fn ljung_box(residuals: &[f64], lags: usize) -> Result<LjungBoxReport, EconError> {
    let n = residuals.len();
    if lags == 0 || 4 * lags >= n {
        return Err(EconError::BadLags { lags, n });
    }
    let rho = match autocorrelations(residuals, lags) {
        Ok(rho) if rho.iter().all(|r| r.is_finite()) => rho,
        _ => {
            return Err(EconError::DegenerateSeries(
                "autocorrelations undefined (zero variance)",
            ))
        }
    };
    let nf = n as f64;
    let statistic = nf
        * (nf + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(k, r)| r * r / (nf - (k + 1) as f64))
            .sum::<f64>();
    Ok(LjungBoxReport {
        statistic,
        p_value: special::chi_square_sf(statistic, lags),
        lags,
        n_obs: n,
    })
}

// ---------------------------------------------------------------------------
// Rolling variance construction
// ---------------------------------------------------------------------------

/// Rolling mean of squared residuals over a trailing window (inclusive of
/// the current entry); the first `window − 1` entries use the expanding mean
/// over everything seen so far.
pub fn construct_sigma2(residuals: &[f64], window: usize) -> Result<Vec<f64>, EconError> {
    if window < 2 {
        return Err(EconError::BadWindow(window));
    }
    if residuals.len() < window {
        return Err(EconError::TooFewObservations {
            need: window,
            got: residuals.len(),
        });
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(EconError::NonFinite("residuals"));
    }
    let mut out = Vec::with_capacity(residuals.len());
    for t in 0..residuals.len() {
        let lo = t + 1 - window.min(t + 1);
        let span = &residuals[lo..=t];
        out.push(span.iter().map(|r| r * r).sum::<f64>() / span.len() as f64);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Grouped Gamma maximum likelihood
// ---------------------------------------------------------------------------

/// Fitted Gamma law with optimizer diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaFit {
    pub law: GammaLaw,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: u64,
}

/// Total grouped-data log-likelihood `Σ count_b · ln(F(u_b) − F(l_b))`, with
/// the open top bin contributing survival mass.
pub fn grouped_log_likelihood(h: &IncomeHistogram, law: &GammaLaw) -> f64 {
    let mut ll = 0.0;
    for bin in h.bins() {
        if bin.count == 0.0 {
            continue;
        }
        let mass = match bin.upper {
            Some(u) => law.cdf(u) - law.cdf(bin.lower),
            None => 1.0 - law.cdf(bin.lower),
        };
        if mass > 0.0 {
            ll += bin.count * mass.ln();
        } else {
            return f64::NEG_INFINITY;
        }
    }
    ll
}

/// Maximizes the grouped likelihood over `(ln α, ln β)` with a safeguarded
/// Newton iteration (finite-difference curvature, halving line search,
/// positivity by construction). Convergence is declared when the gradient of
/// the **mean** log-likelihood drops below 1e-8 in the sup norm, so the
/// criterion does not scale with the raw counts.
pub fn fit_gamma_mle(h: &IncomeHistogram) -> Result<GammaFit, EconError> {
    let positive = h.bins().iter().filter(|b| b.count > 0.0).count();
    if positive < 3 {
        return Err(EconError::TooFewBins { positive });
    }
    let total: f64 = h.bins().iter().map(|b| b.count).sum();

    // Moment-matching start from bin midpoints (open bin: 1.5x its lower edge).
    let mut mean = 0.0;
    for b in h.bins() {
        let mid = match b.upper {
            Some(u) => 0.5 * (b.lower + u),
            None => 1.5 * b.lower,
        };
        mean += b.count * mid;
    }
    mean /= total;
    let mut var = 0.0;
    for b in h.bins() {
        let mid = match b.upper {
            Some(u) => 0.5 * (b.lower + u),
            None => 1.5 * b.lower,
        };
        var += b.count * (mid - mean) * (mid - mean);
    }
    var /= total;
    if !(mean > 0.0 && var > 0.0) {
        return Err(EconError::DegenerateSeries("histogram has no spread"));
    }

    // Mean log-likelihood and its gradient in (ln α, ln β). The β component
    // uses the exact derivative d/dβ F(α, βx) = x·(βx)^{α−1}e^{−βx}/Γ(α); the
    // α component uses a central difference in ln α.
    let objective = |la: f64, lb: f64| -> f64 {
        match GammaLaw::new(la.exp(), lb.exp()) {
            Ok(law) => grouped_log_likelihood(h, &law) / total,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let gradient = |la: f64, lb: f64| -> (f64, f64) {
        let (alpha, beta) = (la.exp(), lb.exp());
        let law = GammaLaw::new(alpha, beta).expect("positive by construction");
        // d mass / d ln β per bin, exact.
        let dcdf_dlnb = |x: f64| -> f64 {
            if x <= 0.0 {
                return 0.0;
            }
            let z = beta * x;
            (alpha * z.ln() - z - special::ln_gamma(alpha)).exp()
        };
        let mut g_beta = 0.0;
        for b in h.bins() {
            if b.count == 0.0 {
                continue;
            }
            let mass = match b.upper {
                Some(u) => law.cdf(u) - law.cdf(b.lower),
                None => 1.0 - law.cdf(b.lower),
            };
            let dmass = match b.upper {
                Some(u) => dcdf_dlnb(u) - dcdf_dlnb(b.lower),
                None => -dcdf_dlnb(b.lower),
            };
            g_beta += b.count * dmass / mass;
        }
        g_beta /= total;
        // Step size balances truncation against cancellation noise in the
        // incomplete-gamma evaluations (~1e-14 per likelihood call).
        let h_a = 3e-5;
        let g_alpha = (objective(la + h_a, lb) - objective(la - h_a, lb)) / (2.0 * h_a);
        (g_alpha, g_beta)
    };

    let mut la = (mean * mean / var).ln();
    let mut lb = (mean / var).ln();
    let mut value = objective(la, lb);
    if !value.is_finite() {
        return Err(EconError::DegenerateSeries(
            "likelihood undefined at the moment-matching start",
        ));
    }

    const MAX_ITER: u64 = 200;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..MAX_ITER {
        let (ga, gb) = gradient(la, lb);
        grad_norm = ga.abs().max(gb.abs());
        if grad_norm < 1e-8 {
            let law = GammaLaw::new(la.exp(), lb.exp())?;
            return Ok(GammaFit {
                law,
                log_likelihood: grouped_log_likelihood(h, &law),
                gradient_norm: grad_norm,
                iterations: iter,
            });
        }
        // Finite-difference Hessian of the mean log-likelihood.
        let hs = 1e-5;
        let (ga_pa, gb_pa) = gradient(la + hs, lb);
        let (ga_ma, gb_ma) = gradient(la - hs, lb);
        let (ga_pb, gb_pb) = gradient(la, lb + hs);
        let (ga_mb, gb_mb) = gradient(la, lb - hs);
        let haa = (ga_pa - ga_ma) / (2.0 * hs);
        let hbb = (gb_pb - gb_mb) / (2.0 * hs);
        let hab = 0.5 * ((gb_pa - gb_ma) + (ga_pb - ga_mb)) / (2.0 * hs);
        let det = haa * hbb - hab * hab;
        // Newton step on a negative-definite Hessian, else steepest ascent.
        let (mut sa, mut sb) = if det > 0.0 && haa < 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut improved = false;
        for _ in 0..40 {
            let candidate = objective(la + sa, lb + sb);
            if candidate > value {
                la += sa;
                lb += sb;
                value = candidate;
                improved = true;
                break;
            }
            sa *= 0.5;
            sb *= 0.5;
        }
        if !improved {
            // The likelihood cannot be improved at working precision. Accept
            // the point if the gradient sits at the finite-difference noise
            // floor; the reported gradient_norm keeps the caller honest.
            if grad_norm < 1e-7 {
                let law = GammaLaw::new(la.exp(), lb.exp())?;
                return Ok(GammaFit {
                    law,
                    log_likelihood: grouped_log_likelihood(h, &law),
                    gradient_norm: grad_norm,
                    iterations: iter,
                });
            }
            break;
        }
    }
    Err(EconError::NoConvergence {
        iterations: MAX_ITER,
        gradient_norm: grad_norm,
        alpha: la.exp(),
        beta: lb.exp(),
    })
}

// ---------------------------------------------------------------------------
// Forward filter
// ---------------------------------------------------------------------------

/// Posterior of the growth-rate parameter after `t` observations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FilterState {
    pub t: usize,
    pub theta: f64,
    pub c: f64,
}

/// Filter trajectory: `states[0]` is the prior, `states[t]` the posterior
/// after observation `t`; `residuals[t-1]` is the pre-update innovation
/// `L_t − θ_{t−1}`.
#[derive(Debug, Clone, Serialize)]
pub struct FilterPath {
    pub states: Vec<FilterState>,
    pub residuals: Vec<f64>,
}

impl FilterPath {
    pub fn final_state(&self) -> FilterState {
        *self.states.last().expect("prior state always present")
    }
}

/// Recursive Gaussian posterior update for a constant latent rate observed
/// with per-period variance `sigma2_x[t]`:
///
/// ```text
/// θ_t = θ_{t−1} + [C_{t−1}/(C_{t−1} + σ²_t)]·(L_t − θ_{t−1})
/// C_t = (1/σ²_t + 1/C_{t−1})⁻¹
/// ```
pub fn forward_filter(
    observations: &[f64],
    sigma2_x: &[f64],
    theta0: f64,
    c0: f64,
) -> Result<FilterPath, EconError> {
    if observations.len() != sigma2_x.len() {
        return Err(EconError::LengthMismatch {
            left: observations.len(),
            right: sigma2_x.len(),
        });
    }
    if observations.is_empty() {
        return Err(EconError::TooFewObservations { need: 1, got: 0 });
    }
    if !theta0.is_finite() {
        return Err(EconError::BadPrior("prior mean must be finite"));
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(EconError::BadPrior("prior variance must be positive and finite"));
    }
    if let Some(bad) = observations.iter().position(|v| !v.is_finite()) {
        return Err(EconError::BadVariance {
            index: bad,
            value: observations[bad],
        });
    }
    for (index, &value) in sigma2_x.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(EconError::BadVariance { index, value });
        }
    }

    let mut states = Vec::with_capacity(observations.len() + 1);
    states.push(FilterState {
        t: 0,
        theta: theta0,
        c: c0,
    });
    let mut residuals = Vec::with_capacity(observations.len());
    let (mut theta, mut c) = (theta0, c0);
    for (t, (&l, &s2)) in observations.iter().zip(sigma2_x).enumerate() {
        let innovation = l - theta;
        residuals.push(innovation);
        theta += c / (c + s2) * innovation;
        c = 1.0 / (1.0 / s2 + 1.0 / c);
        states.push(FilterState {
            t: t + 1,
            theta,
            c,
        });
    }
    Ok(FilterPath { states, residuals })
}

// ---------------------------------------------------------------------------
// Reduced-form pipeline
// ---------------------------------------------------------------------------

/// Scale on which the GDP series enters the regressions: raw level or
/// natural log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesScale {
    Level,
    Log,
}

/// Output of the increment-regression system on a GDP series.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedFormReport {
    pub scale: SeriesScale,
    /// Δm_t on (intercept, m_t, σ²_t).
    pub eq1: RegressionResult,
    /// Δσ²_t on (intercept, m_t², σ²_t).
    pub eq2: RegressionResult,
    pub sigma2: Vec<f64>,
    pub white_noise: Option<LjungBoxReport>,
    pub white_noise_iterations: usize,
    /// Set when the whiteness loop exhausted its iteration budget without a
    /// passing Ljung–Box test.
    pub white_noise_warning: bool,
    /// Whiteness test on squared mean-equation residuals (reported only).
    pub heteroskedasticity: Option<LjungBoxReport>,
    pub degenerate: bool,
}

const WHITE_NOISE_LAGS: usize = 8;
const WHITE_NOISE_LEVEL: f64 = 0.05;
const WHITE_NOISE_MAX_ITER: usize = 5;
const SIGMA2_WINDOW: usize = 4;

/// Runs the reduced-form scheme on a GDP series: pre-regress increments on
/// the level, build a rolling variance from the residuals, then estimate the
/// mean and variance increment equations. The variance construction is
/// repeated from the latest mean-equation residuals until those residuals
/// pass a Ljung–Box whiteness test at 8 lags (at most 5 rebuilds, then the
/// report carries a warning instead of an error).
pub fn reduced_form_pipeline(
    g: &GdpSeries,
    scale: SeriesScale,
) -> Result<ReducedFormReport, EconError> {
    let raw = g.values();
    if raw.len() < 20 {
        return Err(EconError::TooFewObservations {
            need: 20,
            got: raw.len(),
        });
    }
    let m: Vec<f64> = match scale {
        SeriesScale::Level => raw.to_vec(),
        SeriesScale::Log => raw.iter().map(|v| v.ln()).collect(),
    };
    let n = m.len() - 1;
    let dm: Vec<f64> = (0..n).map(|t| m[t + 1] - m[t]).collect();
    let m_t: Vec<f64> = m[..n].to_vec();
    let ones = vec![1.0; n];

    let eq1_names = ["intercept", "m", "sigma2"];
    let eq2_names = ["intercept", "m_squared", "sigma2"];
    if sample_variance(&dm)? < 1e-24 || sample_variance(&m_t)? < 1e-24 {
        return Ok(ReducedFormReport {
            scale,
            eq1: RegressionResult::degenerate(&eq1_names, n),
            eq2: RegressionResult::degenerate(&eq2_names, n.saturating_sub(1)),
            sigma2: vec![0.0; n],
            white_noise: None,
            white_noise_iterations: 0,
            white_noise_warning: false,
            heteroskedasticity: None,
            degenerate: true,
        });
    }

    let pre = ols(&["intercept", "m"], &[ones.clone(), m_t.clone()], &dm)?;
    let mut residuals = pre.residuals.clone();
    let mut sigma2 = construct_sigma2(&residuals, SIGMA2_WINDOW)?;
    let mut eq1 = ols(&eq1_names, &[ones.clone(), m_t.clone(), sigma2.clone()], &dm)?;
    let mut report = ljung_box(&eq1.residuals, WHITE_NOISE_LAGS)?;
    let mut iterations = 0;
    while !report.is_white(WHITE_NOISE_LEVEL) && iterations < WHITE_NOISE_MAX_ITER {
        iterations += 1;
        residuals = eq1.residuals.clone();
        sigma2 = construct_sigma2(&residuals, SIGMA2_WINDOW)?;
        eq1 = ols(&eq1_names, &[ones.clone(), m_t.clone(), sigma2.clone()], &dm)?;
        report = ljung_box(&eq1.residuals, WHITE_NOISE_LAGS)?;
    }
    let warning = !report.is_white(WHITE_NOISE_LEVEL);

    let d_sigma2: Vec<f64> = (0..n - 1).map(|t| sigma2[t + 1] - sigma2[t]).collect();
    let m_sq: Vec<f64> = m_t[..n - 1].iter().map(|v| v * v).collect();
    let eq2 = ols(
        &eq2_names,
        &[
            vec![1.0; n - 1],
            m_sq,
            sigma2[..n - 1].to_vec(),
        ],
        &d_sigma2,
    )?;

    let squared: Vec<f64> = eq1.residuals.iter().map(|e| e * e).collect();
    let heteroskedasticity = ljung_box(&squared, WHITE_NOISE_LAGS).ok();

    Ok(ReducedFormReport {
        scale,
        eq1,
        eq2,
        sigma2,
        white_noise: Some(report),
        white_noise_iterations: iterations,
        white_noise_warning: warning,
        heteroskedasticity,
        degenerate: false,
    })
}

// ---------------------------------------------------------------------------
// Structural pipeline
// ---------------------------------------------------------------------------

/// Output of the structural estimation chain on an annual GDP series with
/// yearly fitted Gamma laws.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub years: Vec<i32>,
    /// α_t/β_t on (intercept, ln m_t).
    pub sf1: RegressionResult,
    /// α_t/β_t on (intercept, sf1 residuals): the endogeneity check. The
    /// slope equals 1 by construction; its t statistic carries the
    /// information.
    pub endogeneity: RegressionResult,
    pub filter: FilterPath,
    /// Filter innovations on (intercept, α_t/β_t), dropping the first
    /// innovation (identically zero because the prior mean is the first
    /// observation). An insignificant slope means the filter removed the
    /// endogeneity that sf1 exhibits.
    pub filter_residual_check: RegressionResult,
    pub theta0: f64,
    /// Sample variance of log growth, used as the idiosyncratic floor of the
    /// observation variance.
    pub s1_squared: f64,
    pub degenerate: bool,
}

/// Runs the structural chain: regress the yearly Gamma mean `α_t/β_t` on log
/// GDP, check its residual correlation with `α_t/β_t`, then filter log
/// growth with observation variance `s₁² + β²_t/α_t` (idiosyncratic floor
/// plus the law-implied variance of the year's aggregate shock) and verify
/// the filter innovations are uncorrelated with `α_t/β_t`.
pub fn structural_pipeline(
    g: &GdpSeries,
    laws: &BTreeMap<i32, GammaLaw>,
) -> Result<StructuralReport, EconError> {
    let pairs = g.year_values();
    if pairs.len() < 10 {
        return Err(EconError::TooFewObservations {
            need: 10,
            got: pairs.len(),
        });
    }
    let years: Vec<i32> = pairs.iter().map(|(y, _)| *y).collect();
    for w in years.windows(2) {
        if w[1] <= w[0] {
            return Err(EconError::MisalignedYear(w[1]));
        }
    }
    let mut ab = Vec::with_capacity(years.len());
    for &y in &years {
        let law = laws.get(&y).ok_or(EconError::MisalignedYear(y))?;
        ab.push(law.mean());
    }
    let ln_m: Vec<f64> = pairs.iter().map(|(_, v)| v.ln()).collect();
    let t = years.len();

    let sf1_names = ["intercept", "ln_m"];
    let mut degenerate = false;
    let (sf1, endogeneity) = if sample_variance(&ab)? < 1e-24 {
        degenerate = true;
        (
            RegressionResult::degenerate(&sf1_names, t),
            RegressionResult::degenerate(&["intercept", "sf1_residual"], t),
        )
    } else {
        let sf1 = ols(&sf1_names, &[vec![1.0; t], ln_m.clone()], &ab)?;
        // Mean income on its own first-stage residuals: the slope is 1 by
        // construction; its t-statistic carries the endogeneity signal.
        let endo = ols(
            &["intercept", "sf1_residual"],
            &[vec![1.0; t], sf1.residuals.clone()],
            &ab,
        )?;
        (sf1, endo)
    };

    // Log growth L_t = ln m(t+1) − ln m(t) carries year-(t+1)'s shock, so the
    // observation variance aligns with the destination year's law.
    let growth: Vec<f64> = (0..t - 1).map(|i| ln_m[i + 1] - ln_m[i]).collect();
    let s1_squared = sample_variance(&growth)?;
    let mut sigma2 = Vec::with_capacity(growth.len());
    for &y in &years[1..] {
        let law = laws.get(&y).ok_or(EconError::MisalignedYear(y))?;
        sigma2.push(s1_squared + law.beta * law.beta / law.alpha);
    }
    let theta0 = growth[0];
    let filter = forward_filter(&growth, &sigma2, theta0, 1.0)?;

    let ab_dest: Vec<f64> = years[1..]
        .iter()
        .map(|y| laws[y].mean())
        .collect();
    let filter_residual_check = if degenerate {
        RegressionResult::degenerate(&["intercept", "ab_mean"], growth.len() - 1)
    } else {
        ols(
            &["intercept", "ab_mean"],
            &[
                vec![1.0; growth.len() - 1],
                ab_dest[1..].to_vec(),
            ],
            &filter.residuals[1..],
        )?
    };

    Ok(StructuralReport {
        years,
        sf1,
        endogeneity,
        filter,
        filter_residual_check,
        theta0,
        s1_squared,
        degenerate,
    })
}
