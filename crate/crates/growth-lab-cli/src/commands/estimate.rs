//! `estimate`: full estimation chain. Fits a Gamma law per income year,
//! runs the reduced-form (level and log) pipelines on the GDP series when it
//! is long enough for the whiteness test, runs the structural pipeline on
//! annual means, and writes table-style CSVs plus one results JSON.

use growth_lab::dataio::{
    fetch_series, parse_income_csv, FetchOptions, GdpSeries, HttpTransport, SeriesSource,
    Transport,
};
use growth_lab::econometrics::{
    fit_gamma_mle, reduced_form_pipeline, structural_pipeline, ReducedFormReport, SeriesScale,
    StructuralReport,
};
use growth_lab::law_lab::GammaLaw;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::EstimateConfig;
use crate::error::{create_dir, write_file, CliError};
use crate::manifest::{ManifestBuilder, RunManifest};

/// Minimum GDP length for the reduced form: the whiteness test needs
/// strictly more than 4 x 8 growth observations.
const MIN_REDUCED_FORM_LEN: usize = 34;

#[derive(Serialize)]
struct FittedLaw {
    year: i32,
    alpha: f64,
    beta: f64,
    mean: f64,
    log_likelihood: f64,
    gradient_norm: f64,
}

#[derive(Serialize)]
struct EstimateResults {
    gdp_observations: usize,
    /// None when the series is too short for the 8-lag whiteness loop.
    reduced_form_level: Option<ReducedFormReport>,
    reduced_form_log: Option<ReducedFormReport>,
    reduced_form_skipped_reason: Option<String>,
    structural: StructuralReport,
    laws: Vec<FittedLaw>,
    /// Counts are treated as scale-free (persons or thousands both work);
    /// incomes are read in thousands of currency units.
    count_scale_assumption: String,
}

struct ResolvedSources {
    gdp: SeriesSource,
    income: SeriesSource,
}

fn resolve_sources(
    config: &EstimateConfig,
    gdp_flag: Option<&Path>,
    income_flag: Option<&Path>,
) -> Result<ResolvedSources, CliError> {
    let gdp = match (gdp_flag, &config.gdp) {
        (Some(path), _) => SeriesSource::LocalFile {
            path: path.to_path_buf(),
        },
        (None, Some(src)) => src.clone(),
        (None, None) => {
            return Err(CliError::validation(
                "no GDP source: pass --gdp <path> or set estimate.gdp in the config",
            ))
        }
    };
    let income = match (income_flag, &config.income) {
        (Some(path), _) => SeriesSource::LocalFile {
            path: path.to_path_buf(),
        },
        (None, Some(src)) => src.clone(),
        (None, None) => {
            return Err(CliError::validation(
                "no income source: pass --income <path> or set estimate.income in the config",
            ))
        }
    };
    Ok(ResolvedSources { gdp, income })
}

fn fetch_text(
    src: &SeriesSource,
    transport: &dyn Transport,
    opts: &FetchOptions,
) -> Result<String, CliError> {
    let bytes = fetch_series(src, transport, opts)?;
    String::from_utf8(bytes)
        .map_err(|e| CliError::validation(format!("source is not valid UTF-8: {e}")))
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    config: &EstimateConfig,
    gdp_flag: Option<&Path>,
    income_flag: Option<&Path>,
    out_dir: &Path,
    seed: u64,
    offline: bool,
) -> Result<RunManifest, CliError> {
    let sources = resolve_sources(config, gdp_flag, income_flag)?;
    let mut manifest = ManifestBuilder::new("estimate", config, seed)?;

    let cache_dir: PathBuf = config
        .cache_dir
        .clone()
        .unwrap_or_else(|| out_dir.join("cache"));
    create_dir(&cache_dir)?;
    let mut opts = FetchOptions::new(cache_dir);
    opts.timeout = Duration::from_secs(config.timeout_secs);
    opts.offline = offline;
    let transport = HttpTransport::new()?;

    let gdp = GdpSeries::parse_csv(&fetch_text(&sources.gdp, &transport, &opts)?)?;
    let histograms = parse_income_csv(&fetch_text(&sources.income, &transport, &opts)?)?;

    // Gamma law per income year, plus the year-path CSV.
    let mut laws: BTreeMap<i32, GammaLaw> = BTreeMap::new();
    let mut fitted = Vec::with_capacity(histograms.len());
    let mut ab_csv = String::from("year,alpha,beta\n");
    for h in &histograms {
        let fit = fit_gamma_mle(h)?;
        let _ = writeln!(ab_csv, "{},{},{}", h.year(), fit.law.alpha, fit.law.beta);
        fitted.push(FittedLaw {
            year: h.year(),
            alpha: fit.law.alpha,
            beta: fit.law.beta,
            mean: fit.law.mean(),
            log_likelihood: fit.log_likelihood,
            gradient_norm: fit.gradient_norm,
        });
        laws.insert(h.year(), fit.law);
    }
    write_file(&out_dir.join("ab_path.csv"), ab_csv.as_bytes())?;
    manifest.add_output("ab_path.csv");

    // Reduced form on the raw (typically quarterly) series, both scales.
    let (rf_level, rf_log, skip_reason) = if gdp.len() >= MIN_REDUCED_FORM_LEN {
        let level = reduced_form_pipeline(&gdp, SeriesScale::Level)?;
        let log = reduced_form_pipeline(&gdp, SeriesScale::Log)?;
        level
            .eq1
            .write_table_csv(&out_dir.join("rf_level_eq1.csv"))?;
        level
            .eq2
            .write_table_csv(&out_dir.join("rf_level_eq2.csv"))?;
        log.eq1.write_table_csv(&out_dir.join("rf_log_eq1.csv"))?;
        log.eq2.write_table_csv(&out_dir.join("rf_log_eq2.csv"))?;
        for name in [
            "rf_level_eq1.csv",
            "rf_level_eq2.csv",
            "rf_log_eq1.csv",
            "rf_log_eq2.csv",
        ] {
            manifest.add_output(name);
        }
        (Some(level), Some(log), None)
    } else {
        let reason = format!(
            "{} observations < {MIN_REDUCED_FORM_LEN}: too short for the 8-lag whiteness loop",
            gdp.len()
        );
        log::warn!("estimate: skipping reduced form ({reason})");
        (None, None, Some(reason))
    };

    // Structural chain on annual means.
    let annual = gdp.annual_means();
    let structural = structural_pipeline(&annual, &laws)?;
    structural.sf1.write_table_csv(&out_dir.join("sf1.csv"))?;
    structural
        .endogeneity
        .write_table_csv(&out_dir.join("endogeneity.csv"))?;
    structural
        .filter_residual_check
        .write_table_csv(&out_dir.join("filter_check.csv"))?;
    for name in ["sf1.csv", "endogeneity.csv", "filter_check.csv"] {
        manifest.add_output(name);
    }

    // Filter path: posterior after each destination year's growth.
    let mut filter_csv = String::from("year,theta,c\n");
    for (year, state) in structural
        .years
        .iter()
        .skip(1)
        .zip(structural.filter.states.iter().skip(1))
    {
        let _ = writeln!(filter_csv, "{year},{},{}", state.theta, state.c);
    }
    write_file(&out_dir.join("filter_path.csv"), filter_csv.as_bytes())?;
    manifest.add_output("filter_path.csv");

    let results = EstimateResults {
        gdp_observations: gdp.len(),
        reduced_form_level: rf_level,
        reduced_form_log: rf_log,
        reduced_form_skipped_reason: skip_reason,
        structural,
        laws: fitted,
        count_scale_assumption:
            "bin counts are scale-free; incomes in thousands of currency units".to_string(),
    };
    let bytes = serde_json::to_vec_pretty(&results)
        .map_err(|e| CliError::io(format!("could not serialize results: {e}")))?;
    write_file(&out_dir.join("results.json"), &bytes)?;
    manifest.add_output("results.json");

    manifest.finish(out_dir)
}
