//! Data ingestion and generation: CSV parsers for GDP series and binned
//! income tables, a cached HTTPS fetch client with pluggable transport, and
//! a synthetic-economy generator that emits datasets together with their
//! ground truth so every downstream estimate has an oracle.

use chrono::{Datelike, NaiveDate};
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

use crate::law_lab::{GammaLaw, LawError};
use crate::path_rng;
use crate::{ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what} line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Validation(String),
    #[error("year {year}: {message}")]
    BadBins { year: i32, message: String },
    #[error("remote sources must use https, got {url}")]
    HttpsRequired { url: String },
    #[error("offline mode and no cached copy of {url}")]
    OfflineMiss { url: String },
    #[error("fetching {url} failed after {attempts} attempts: {last_error}")]
    FetchFailed {
        url: String,
        attempts: u32,
        last_error: String,
    },
    #[error("could not {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Law(#[from] LawError),
}

impl ClassifyError for DataError {
    fn failure_kind(&self) -> FailureKind {
        match self {
            DataError::Io { .. }
            | DataError::Json { .. }
            | DataError::FetchFailed { .. }
            | DataError::OfflineMiss { .. } => FailureKind::Io,
            _ => FailureKind::Validation,
        }
    }
}

// ---------------------------------------------------------------------------
// GDP series
// ---------------------------------------------------------------------------

/// Positive-valued time series on strictly increasing dates (quarterly or
/// annual GDP per capita).
#[derive(Debug, Clone, PartialEq)]
pub struct GdpSeries {
    periods: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl GdpSeries {
    pub fn new(periods: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, DataError> {
        if periods.len() != values.len() {
            return Err(DataError::Validation(format!(
                "{} dates but {} values",
                periods.len(),
                values.len()
            )));
        }
        if periods.is_empty() {
            return Err(DataError::Validation("empty series".to_string()));
        }
        for w in periods.windows(2) {
            if w[1] <= w[0] {
                return Err(DataError::Validation(format!(
                    "dates must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(DataError::Validation(format!(
                "values must be positive and finite, got {bad}"
            )));
        }
        Ok(GdpSeries { periods, values })
    }

    pub fn periods(&self) -> &[NaiveDate] {
        &self.periods
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// (calendar year, value) per period, in order.
    pub fn year_values(&self) -> Vec<(i32, f64)> {
        self.periods
            .iter()
            .zip(&self.values)
            .map(|(d, v)| (d.year(), *v))
            .collect()
    }

    /// Collapses the series to one value per calendar year (mean of that
    /// year's periods, stamped January 1).
    pub fn annual_means(&self) -> GdpSeries {
        let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
        for (d, v) in self.periods.iter().zip(&self.values) {
            let e = sums.entry(d.year()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        let mut periods = Vec::with_capacity(sums.len());
        let mut values = Vec::with_capacity(sums.len());
        for (year, (sum, n)) in sums {
            periods.push(NaiveDate::from_ymd_opt(year, 1, 1).expect("January 1 exists"));
            values.push(sum / n as f64);
        }
        GdpSeries { periods, values }
    }

    /// Parses CSV with header `date,value`. Dates are ISO (`YYYY-MM-DD`) or
    /// quarter form (`YYYY-Qn`, mapped to the quarter's first day). Rows may
    /// arrive in any order; the result is sorted. Duplicate dates and
    /// non-positive values are rejected.
    pub fn parse_csv(text: &str) -> Result<Self, DataError> {
        let err = |line: usize, message: String| DataError::Parse {
            what: "gdp csv",
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next().map(|(i, l)| (i, l.trim_end_matches('\r'))) {
            Some((_, "date,value")) => {}
            Some((_, other)) => {
                return Err(err(1, format!("expected header 'date,value', got '{other}'")))
            }
            None => return Err(err(1, "empty file".to_string())),
        }
        let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (date_str, value_str) = line
                .split_once(',')
                .ok_or_else(|| err(idx + 1, "expected 'date,value' row".to_string()))?;
            let date = parse_period(date_str.trim())
                .map_err(|message| err(idx + 1, message))?;
            let value: f64 = value_str
                .trim()
                .parse()
                .map_err(|e| err(idx + 1, format!("bad value '{}': {e}", value_str.trim())))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(err(idx + 1, format!("value must be positive, got {value}")));
            }
            rows.push((date, value));
        }
        rows.sort_by_key(|r| r.0);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::Validation(format!("duplicate date {}", w[0].0)));
            }
        }
        GdpSeries::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
        )
    }

    /// Serializes as `date,value` CSV with ISO dates; inverse of
    /// [`GdpSeries::parse_csv`] field-for-field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,value\n");
        for (d, v) in self.periods.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), v);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        write_bytes(path, self.to_csv().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            action: "read",
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text)
    }
}

/// `YYYY-MM-DD` or `YYYY-Qn` (first day of the quarter).
fn parse_period(s: &str) -> Result<NaiveDate, String> {
    if let Some((year_str, q_str)) = s.split_once("-Q") {
        let year: i32 = year_str
            .parse()
            .map_err(|_| format!("bad year in '{s}'"))?;
        let quarter: u32 = q_str.parse().map_err(|_| format!("bad quarter in '{s}'"))?;
        if !(1..=4).contains(&quarter) {
            return Err(format!("quarter must be 1-4 in '{s}'"));
        }
        return NaiveDate::from_ymd_opt(year, 3 * (quarter - 1) + 1, 1)
            .ok_or_else(|| format!("invalid date '{s}'"));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date '{s}': {e}"))
}

// ---------------------------------------------------------------------------
// Income histograms
// ---------------------------------------------------------------------------

/// One income bracket: `[lower, upper)` in thousands of currency units, or
/// `[lower, ∞)` when `upper` is `None` (the open top bracket). Counts may be
/// persons or thousands of persons — the Gamma fit is invariant to count
/// scale, so the parser accepts either.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncomeBin {
    pub lower: f64,
    pub upper: Option<f64>,
    pub count: f64,
}

/// One year's binned income table: ordered, non-overlapping brackets with a
/// positive total count.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeHistogram {
    year: i32,
    bins: Vec<IncomeBin>,
}

impl IncomeHistogram {
    pub fn new(year: i32, bins: Vec<IncomeBin>) -> Result<Self, DataError> {
        let fail = |message: String| DataError::BadBins { year, message };
        if bins.is_empty() {
            return Err(fail("no bins".to_string()));
        }
        let mut total = 0.0;
        for (i, b) in bins.iter().enumerate() {
            if !b.lower.is_finite() || b.lower < 0.0 {
                return Err(fail(format!("bad lower edge {}", b.lower)));
            }
            if !(b.count.is_finite() && b.count >= 0.0) {
                return Err(fail(format!("bad count {}", b.count)));
            }
            match b.upper {
                Some(u) if !(u.is_finite() && u > b.lower) => {
                    return Err(fail(format!("bin [{}, {u}) is empty or inverted", b.lower)))
                }
                None if i + 1 != bins.len() => {
                    return Err(fail("open bin must be the last bin".to_string()))
                }
                _ => {}
            }
            if i > 0 {
                let prev = &bins[i - 1];
                let prev_upper = prev
                    .upper
                    .ok_or_else(|| fail("open bin must be the last bin".to_string()))?;
                if b.lower < prev_upper {
                    return Err(fail(format!(
                        "bins overlap: [{}, {:?}) then [{}, {:?})",
                        prev.lower, prev.upper, b.lower, b.upper
                    )));
                }
            }
            total += b.count;
        }
        if !(total > 0.0) {
            return Err(fail("total count must be positive".to_string()));
        }
        Ok(IncomeHistogram { year, bins })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn bins(&self) -> &[IncomeBin] {
        &self.bins
    }

    pub fn total_count(&self) -> f64 {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// True when the histograms cover consecutive calendar years.
pub fn years_are_contiguous(hists: &[IncomeHistogram]) -> bool {
    hists
        .windows(2)
        .all(|w| w[1].year() == w[0].year() + 1)
}

/// Parses CSV with header `year,bin_lower,bin_upper,count`; an empty
/// `bin_upper` field denotes the open top bracket. Rows are grouped by year;
/// each year's bins are sorted by lower edge and validated.
pub fn parse_income_csv(text: &str) -> Result<Vec<IncomeHistogram>, DataError> {
    let err = |line: usize, message: String| DataError::Parse {
        what: "income csv",
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next().map(|(i, l)| (i, l.trim_end_matches('\r'))) {
        Some((_, "year,bin_lower,bin_upper,count")) => {}
        Some((_, other)) => {
            return Err(err(
                1,
                format!("expected header 'year,bin_lower,bin_upper,count', got '{other}'"),
            ))
        }
        None => return Err(err(1, "empty file".to_string())),
    }
    let mut by_year: BTreeMap<i32, Vec<IncomeBin>> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(idx + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        let year: i32 = fields[0]
            .trim()
            .parse()
            .map_err(|e| err(idx + 1, format!("bad year '{}': {e}", fields[0])))?;
        let lower: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| err(idx + 1, format!("bad bin_lower '{}': {e}", fields[1])))?;
        let upper = if fields[2].trim().is_empty() {
            None
        } else {
            Some(fields[2].trim().parse::<f64>().map_err(|e| {
                err(idx + 1, format!("bad bin_upper '{}': {e}", fields[2]))
            })?)
        };
        let count: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| err(idx + 1, format!("bad count '{}': {e}", fields[3])))?;
        by_year
            .entry(year)
            .or_default()
            .push(IncomeBin { lower, upper, count });
    }
    let mut out = Vec::with_capacity(by_year.len());
    for (year, mut bins) in by_year {
        bins.sort_by(|a, b| a.lower.partial_cmp(&b.lower).expect("finite edges"));
        out.push(IncomeHistogram::new(year, bins)?);
    }
    Ok(out)
}

/// Serializes histograms as `year,bin_lower,bin_upper,count` CSV (empty
/// upper field for the open bracket); inverse of [`parse_income_csv`].
pub fn income_to_csv(hists: &[IncomeHistogram]) -> String {
    let mut out = String::from("year,bin_lower,bin_upper,count\n");
    for h in hists {
        for b in h.bins() {
            match b.upper {
                Some(u) => {
                    let _ = writeln!(out, "{},{},{},{}", h.year(), b.lower, u, b.count);
                }
                None => {
                    let _ = writeln!(out, "{},{},,{}", h.year(), b.lower, b.count);
                }
            }
        }
    }
    out
}

pub fn write_income_csv(hists: &[IncomeHistogram], path: &Path) -> Result<(), DataError> {
    write_bytes(path, income_to_csv(hists).as_bytes())
}

pub fn read_income_csv(path: &Path) -> Result<Vec<IncomeHistogram>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        action: "read",
        path: path.display().to_string(),
        source,
    })?;
    parse_income_csv(&text)
}

// ---------------------------------------------------------------------------
// Fetching with cache
// ---------------------------------------------------------------------------

/// Where a dataset comes from and how to parse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesSource {
    LocalFile { path: PathBuf },
    RemoteUrl { url: String },
}

/// Which parser a fetched payload feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatHint {
    GdpCsv,
    IncomeCsv,
}

/// Read-only byte transport; swap in a stub to test the cache and retry
/// behaviour without a network.
pub trait Transport {
    fn get(&self, url: &str, timeout: Duration) -> Result<Vec<u8>, String>;
}

/// HTTPS transport over a blocking client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, DataError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| DataError::Validation(format!("building http client: {e}")))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, timeout: Duration) -> Result<Vec<u8>, String> {
        let response = self
            .client
            .get(url)
            .timeout(timeout)
            .send()
            .map_err(|e| e.to_string())?;
        let response = response.error_for_status().map_err(|e| e.to_string())?;
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub timeout: Duration,
    pub cache_dir: PathBuf,
    pub offline: bool,
    /// First retry delay; doubles per attempt. Tests set this to zero.
    pub backoff_base: Duration,
}

impl FetchOptions {
    pub fn new(cache_dir: PathBuf) -> Self {
        FetchOptions {
            timeout: Duration::from_secs(30),
            cache_dir,
            offline: false,
            backoff_base: Duration::from_millis(250),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    url: String,
    fetched_at: String,
}

fn url_digest(url: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(url.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

const MAX_FETCH_ATTEMPTS: u32 = 3;

/// Returns a source's bytes. Local files are read verbatim. Remote URLs must
/// be https and are served cache-first from `cache_dir` (`<digest>.bin` plus
/// a `<digest>.meta` JSON with the URL and fetch time); on a cache miss the
/// transport is tried up to 3 times with exponential backoff, and the cache
/// write is atomic (temp file, then rename). Offline mode never touches the
/// transport.
pub fn fetch_series(
    src: &SeriesSource,
    transport: &dyn Transport,
    opts: &FetchOptions,
) -> Result<Vec<u8>, DataError> {
    match src {
        SeriesSource::LocalFile { path } => {
            std::fs::read(path).map_err(|source| DataError::Io {
                action: "read",
                path: path.display().to_string(),
                source,
            })
        }
        SeriesSource::RemoteUrl { url } => {
            if !url.starts_with("https://") {
                return Err(DataError::HttpsRequired { url: url.clone() });
            }
            let digest = url_digest(url);
            let bin_path = opts.cache_dir.join(format!("{digest}.bin"));
            if bin_path.exists() {
                return std::fs::read(&bin_path).map_err(|source| DataError::Io {
                    action: "read",
                    path: bin_path.display().to_string(),
                    source,
                });
            }
            if opts.offline {
                return Err(DataError::OfflineMiss { url: url.clone() });
            }
            let mut last_error = String::new();
            for attempt in 1..=MAX_FETCH_ATTEMPTS {
                match transport.get(url, opts.timeout) {
                    Ok(bytes) => {
                        std::fs::create_dir_all(&opts.cache_dir).map_err(|source| {
                            DataError::Io {
                                action: "create",
                                path: opts.cache_dir.display().to_string(),
                                source,
                            }
                        })?;
                        write_atomic(&bin_path, &bytes)?;
                        let meta = CacheMeta {
                            url: url.clone(),
                            fetched_at: chrono::Utc::now().to_rfc3339(),
                        };
                        let meta_bytes =
                            serde_json::to_vec_pretty(&meta).map_err(|source| DataError::Json {
                                what: "cache metadata",
                                source,
                            })?;
                        write_atomic(&opts.cache_dir.join(format!("{digest}.meta")), &meta_bytes)?;
                        return Ok(bytes);
                    }
                    Err(e) => {
                        last_error = e;
                        if attempt < MAX_FETCH_ATTEMPTS {
                            std::thread::sleep(opts.backoff_base * 2u32.pow(attempt - 1));
                        }
                    }
                }
            }
            Err(DataError::FetchFailed {
                url: url.clone(),
                attempts: MAX_FETCH_ATTEMPTS,
                last_error,
            })
        }
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        action: "write",
        path: path.display().to_string(),
        source,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    write_bytes(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|source| DataError::Io {
        action: "rename",
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Synthetic economy generator
// ---------------------------------------------------------------------------

/// Ground-truth plan for a synthetic economy. The yearly income law means
/// follow `initial_mean·exp(Σθ)` exactly, with the rate parameter shrinking
/// linearly from `beta_start` to `beta_end`; log GDP cumulates the same θ
/// path plus an idiosyncratic Gaussian noise (sd `epsilon1_sd`) and an
/// aggregate-sampling noise with the law-implied variance `β²_t/α_t`.
/// `noise_scale` multiplies both noise standard deviations (0 = noiseless).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start_year: i32,
    pub years: usize,
    /// Mean income α/β in the first year, thousands of currency units.
    pub initial_mean: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Per-transition growth rates; length `years − 1`.
    pub theta: Vec<f64>,
    pub epsilon1_sd: f64,
    pub noise_scale: f64,
    /// GDP per capita level in the first year (currency units).
    pub initial_gdp: f64,
    pub draws_per_year: usize,
    pub bin_width: f64,
    pub n_bins: usize,
}

impl SynthConfig {
    /// The shrinking-β economy used throughout the recovery tests: 22 years,
    /// β from 0.17 to 0.12, constant growth 0.02.
    pub fn default_economy() -> Self {
        SynthConfig {
            start_year: 1994,
            years: 22,
            initial_mean: 12.0,
            beta_start: 0.17,
            beta_end: 0.12,
            theta: vec![0.02; 21],
            epsilon1_sd: 0.005,
            noise_scale: 1.0,
            initial_gdp: 28_000.0,
            draws_per_year: 100_000,
            bin_width: 5.0,
            n_bins: 40,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Validation(m));
        if self.years < 2 {
            return bad(format!("need at least 2 years, got {}", self.years));
        }
        if self.theta.len() != self.years - 1 {
            return bad(format!(
                "theta has {} entries for {} years (need years − 1)",
                self.theta.len(),
                self.years
            ));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return bad("theta must be finite".to_string());
        }
        if !(self.initial_mean.is_finite() && self.initial_mean > 0.0) {
            return bad(format!("initial_mean must be positive, got {}", self.initial_mean));
        }
        if !(self.beta_start.is_finite() && self.beta_start > 0.0)
            || !(self.beta_end.is_finite() && self.beta_end > 0.0)
        {
            return bad("beta_start and beta_end must be positive".to_string());
        }
        if !(self.epsilon1_sd.is_finite() && self.epsilon1_sd >= 0.0)
            || !(self.noise_scale.is_finite() && self.noise_scale >= 0.0)
        {
            return bad("noise levels must be nonnegative".to_string());
        }
        if !(self.initial_gdp.is_finite() && self.initial_gdp > 0.0) {
            return bad(format!("initial_gdp must be positive, got {}", self.initial_gdp));
        }
        if self.draws_per_year == 0 {
            return bad("draws_per_year must be positive".to_string());
        }
        if self.n_bins < 3 || !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return bad("need at least 3 bins of positive width".to_string());
        }
        Ok(())
    }
}

/// Planted parameters echoed alongside generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub years: Vec<i32>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub theta: Vec<f64>,
    pub epsilon1_sd: f64,
    pub noise_scale: f64,
    pub ln_gdp: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub gdp: GdpSeries,
    pub incomes: Vec<IncomeHistogram>,
    pub truth: SynthTruth,
}

/// Generates the synthetic economy. RNG streams are split per artifact
/// (stream 0 for the GDP noises, stream 1+t for year t's income draws), so
/// a fixed seed reproduces every output byte-for-byte.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SynthOutput, DataError> {
    config.validate()?;
    let n = config.years;

    let mut years = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let mut cum_theta = 0.0;
    for t in 0..n {
        if t > 0 {
            cum_theta += config.theta[t - 1];
        }
        let mean = config.initial_mean * cum_theta.exp();
        let beta = config.beta_start
            + (config.beta_end - config.beta_start) * t as f64 / (n - 1) as f64;
        years.push(config.start_year + t as i32);
        alphas.push(mean * beta);
        betas.push(beta);
    }

    // Log GDP: cumulate θ plus the two noises; the aggregate-sampling noise
    // variance comes from the destination year's law.
    let mut noise_rng = path_rng(seed, 0);
    let mut ln_gdp = Vec::with_capacity(n);
    ln_gdp.push(config.initial_gdp.ln());
    for t in 1..n {
        let mut increment = config.theta[t - 1];
        let s1 = config.epsilon1_sd * config.noise_scale;
        if s1 > 0.0 {
            let z: f64 = rand_distr::StandardNormal.sample(&mut noise_rng);
            increment += s1 * z;
        }
        let s2 = (betas[t] * betas[t] / alphas[t]).sqrt() * config.noise_scale;
        if s2 > 0.0 {
            let z: f64 = rand_distr::StandardNormal.sample(&mut noise_rng);
            increment += s2 * z;
        }
        ln_gdp.push(ln_gdp[t - 1] + increment);
    }
    let dates: Vec<NaiveDate> = years
        .iter()
        .map(|y| NaiveDate::from_ymd_opt(*y, 1, 1).expect("January 1 exists"))
        .collect();
    let gdp = GdpSeries::new(dates, ln_gdp.iter().map(|l| l.exp()).collect())?;

    let mut incomes = Vec::with_capacity(n);
    for t in 0..n {
        let law = GammaLaw::new(alphas[t], betas[t])?;
        let mut rng = path_rng(seed, 1 + t as u64);
        let mut counts = vec![0.0; config.n_bins];
        for _ in 0..config.draws_per_year {
            let draw: f64 = law.sample(&mut rng, 1)[0];
            let idx = ((draw / config.bin_width) as usize).min(config.n_bins - 1);
            counts[idx] += 1.0;
        }
        let bins: Vec<IncomeBin> = (0..config.n_bins)
            .map(|i| IncomeBin {
                lower: i as f64 * config.bin_width,
                upper: if i + 1 == config.n_bins {
                    None
                } else {
                    Some((i + 1) as f64 * config.bin_width)
                },
                count: counts[i],
            })
            .collect();
        incomes.push(IncomeHistogram::new(years[t], bins)?);
    }

    Ok(SynthOutput {
        gdp,
        incomes,
        truth: SynthTruth {
            years,
            alphas,
            betas,
            theta: config.theta.clone(),
            epsilon1_sd: config.epsilon1_sd,
            noise_scale: config.noise_scale,
            ln_gdp,
            seed,
        },
    })
}
