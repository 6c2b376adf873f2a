//! `synth`: synthetic economy generation. Writes gdp.csv, income.csv, and
//! truth.json (the planted parameters), so every estimate run on the bundle
//! has an oracle to compare against.

use growth_lab::dataio::{synth_generate, write_income_csv, SynthConfig};
use std::path::Path;

use crate::error::{write_file, CliError};
use crate::manifest::{ManifestBuilder, RunManifest};

pub fn run(config: &SynthConfig, out_dir: &Path, seed: u64) -> Result<RunManifest, CliError> {
    let mut manifest = ManifestBuilder::new("synth", config, seed)?;
    let out = synth_generate(config, seed)?;

    out.gdp.write_csv(&out_dir.join("gdp.csv"))?;
    manifest.add_output("gdp.csv");

    write_income_csv(&out.incomes, &out_dir.join("income.csv"))?;
    manifest.add_output("income.csv");

    let bytes = serde_json::to_vec_pretty(&out.truth)
        .map_err(|e| CliError::io(format!("could not serialize truth: {e}")))?;
    write_file(&out_dir.join("truth.json"), &bytes)?;
    manifest.add_output("truth.json");

    log::info!(
        "synth: {} years, beta {} -> {}, {} draws/year",
        config.years,
        config.beta_start,
        config.beta_end,
        config.draws_per_year
    );
    manifest.finish(out_dir)
}
