//! Experiment runner: load a JSON config, run the attack trials, write
//! aggregated CSV and per-trial JSONL.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;

use fpdel_core::adversary::{
    attack_consistent_lut, monte_carlo, AttackStrategy, DetectionStats, Outcome, TrialReport,
    WordScenario,
};
use fpdel_core::blind_ops::ClearLUT;
use fpdel_core::fingerprint::WordLayout;

use crate::circuit_file::LayoutSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub strategy: String,
    pub layout: LayoutSpec,
    #[serde(default = "default_num_inputs")]
    pub num_inputs: usize,
    pub trials: u64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: ExperimentParams,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// overflow-clear: how many copies of the input to sum.
    pub reps: Option<u64>,
    /// overflow-clear: run the defended blackbox (default) or the weakened one.
    pub defended: Option<bool>,
    /// blind-subset-sum: maximum multiplicity per addend.
    pub bound: Option<u64>,
    /// consistent-lut: table input width.
    pub input_bits: Option<usize>,
    /// consistent-lut: number of independent keys.
    pub keys: Option<usize>,
}

fn default_num_inputs() -> usize {
    4
}

pub struct ExperimentOutcome {
    pub stats: DetectionStats,
    pub csv_path: PathBuf,
    pub jsonl_path: PathBuf,
    pub csv_row: String,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).context("config file is not valid")?;
    if config.trials == 0 {
        return Err(anyhow!("trials must be at least 1"));
    }
    if config.scenario.is_empty()
        || !config.scenario.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        return Err(anyhow!("scenario must be a non-empty [a-zA-Z0-9_-] name"));
    }
    Ok(config)
}

/// Run the configured experiment. Randomized strategies require a seed.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let layout = WordLayout::new(config.layout.n, config.layout.m)?;
    let scenario = WordScenario { layout, num_inputs: config.num_inputs };

    let (stats, reports): (DetectionStats, Vec<TrialReport>) = match config.strategy.as_str() {
        "omit-and-mask" => {
            let seed = require_seed(config)?;
            monte_carlo(&AttackStrategy::OmitAndMask, &scenario, config.trials, seed)?
        }
        "overflow-clear" => {
            let seed = require_seed(config)?;
            let reps = config.params.reps.unwrap_or(layout.fp_mask() + 2);
            let defended = config.params.defended.unwrap_or(true);
            monte_carlo(
                &AttackStrategy::OverflowClear { reps, defended },
                &scenario,
                config.trials,
                seed,
            )?
        }
        "blind-subset-sum" => {
            let seed = require_seed(config)?;
            let bound = config.params.bound.unwrap_or(3);
            monte_carlo(
                &AttackStrategy::BlindSubsetSum { bound },
                &scenario,
                config.trials,
                seed,
            )?
        }
        "consistent-lut" => {
            let input_bits = config.params.input_bits.unwrap_or(3);
            if !(1..=8).contains(&input_bits) {
                return Err(anyhow!(
                    "blind table evaluation is O(2^n); input_bits is capped at 8"
                ));
            }
            let keys = config.params.keys.unwrap_or(2);
            let lut = ClearLUT::alternating(input_bits);
            let (_, reports) = attack_consistent_lut(&lut, keys)?;
            let successes =
                reports.iter().filter(|r| r.outcome == Outcome::AcceptedWrong).count() as u64;
            (DetectionStats::from_counts(successes, reports.len() as u64), reports)
        }
        other => return Err(anyhow!("unknown strategy {other:?}")),
    };

    log::info!(
        "experiment {}: {} trials, {} successes",
        config.scenario,
        stats.trials,
        stats.successes
    );

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let csv_path = out_dir.join(format!("{}.csv", config.scenario));
    let jsonl_path = out_dir.join(format!("{}.jsonl", config.scenario));

    let mut writer = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    writer.write_record([
        "scenario", "m", "n", "i", "strategy", "trials", "successes", "rate", "ci_low", "ci_high",
    ])?;
    let row = [
        config.scenario.clone(),
        layout.m.to_string(),
        layout.n.to_string(),
        config.num_inputs.to_string(),
        config.strategy.clone(),
        stats.trials.to_string(),
        stats.successes.to_string(),
        format!("{:.6}", stats.success_rate),
        format!("{:.6}", stats.ci_low),
        format!("{:.6}", stats.ci_high),
    ];
    writer.write_record(&row)?;
    writer.flush()?;

    let mut jsonl = fs::File::create(&jsonl_path)
        .with_context(|| format!("cannot write {}", jsonl_path.display()))?;
    for report in &reports {
        serde_json::to_writer(&mut jsonl, report)?;
        jsonl.write_all(b"\n")?;
    }

    Ok(ExperimentOutcome { stats, csv_path, jsonl_path, csv_row: row.join(",") })
}

fn require_seed(config: &ExperimentConfig) -> Result<u64> {
    config
        .seed
        .ok_or_else(|| anyhow!("strategy {} is randomized; a seed is required", config.strategy))
}
