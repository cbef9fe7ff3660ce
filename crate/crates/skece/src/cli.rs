//! Command-line interface.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, ValueEnum};
use serde::Serialize;
use skece_core::channel::{simulate, PairedTraceSet, ScenarioConfig};
use skece_core::protocol::{eve_attempt, run_key_agreement, AgreementParams, MatchedVia};
use skece_core::recombine::DEFAULT_THETA;
use skece_core::Party;

use crate::experiments::{self, CompareSetup};
use crate::output::{self, Format};
use crate::{presets, trace_io, transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Write Alice, Bob and Eve traces as CSV files into the output directory.
    Simulate,
    /// Sweep alpha and count ignored, mismatched and matched bits.
    Extract,
    /// Message counts of SKECE and Cascade on streams with injected errors.
    Compare,
    /// Randomness tests on validated key material.
    Randomness,
    /// Periodic line-of-sight blocking, single-stream RSS emulation vs CSI.
    Attack,
    /// One key agreement; writes a summary and the transcript as JSON lines.
    Agree,
}

/// Everything needed to reproduce a run; echoed into every output file.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "skece",
    version,
    about = "Secret key extraction experiments over simulated CSI traces"
)]
pub struct ExperimentSpec {
    #[arg(value_enum)]
    pub command: Command,
    /// Preset letter A-F or a scenario TOML file.
    #[arg(long, default_value = "C")]
    pub scenario: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantizer spread; defaults to the scenario's mobility class.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.98)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: u8,
    /// Key length in bits.
    #[arg(long, default_value_t = 128)]
    pub key_length: usize,
    #[arg(long, default_value_t = 10)]
    pub max_rounds: u32,
    /// Attack square-wave period in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub attack_period: f64,
    /// Directory with alice.csv, bob.csv and eve.csv to use instead of
    /// simulating (agree only).
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Output file, or directory for simulate. Tables go to stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

pub type Cli = ExperimentSpec;

/// One-line JSON error record for stderr.
pub fn error_record(kind: &str, err: &anyhow::Error) -> String {
    let chain: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    serde_json::json!({
        "error": kind,
        "message": err.to_string().trim_end(),
        "causes": chain,
    })
    .to_string()
}

impl ExperimentSpec {
    fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = presets::load_scenario(&self.scenario)?;
        cfg.rng_seed = self.seed;
        Ok(cfg)
    }

    fn params(&self, cfg: &ScenarioConfig) -> AgreementParams {
        AgreementParams {
            alpha: self.alpha.unwrap_or_else(|| cfg.mobility.default_alpha()),
            gamma: self.gamma,
            theta: self.theta,
            key_length: self.key_length,
            max_rounds: self.max_rounds,
            seed: self.seed,
            ..AgreementParams::default()
        }
    }

    fn trials(&self) -> usize {
        self.trials as usize
    }

    fn table<T: Serialize>(&self, rows: &[T]) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => write_file(path, |w| output::write_table(w, self, rows, self.format)),
            None => output::write_table(io::stdout().lock(), self, rows, self.format),
        }
    }

    /// `out` with `suffix` added to its file stem, for companion files.
    fn sibling(&self, suffix: &str, ext: &str) -> Option<PathBuf> {
        let out = self.out.as_ref()?;
        let stem = out.file_stem()?.to_string_lossy();
        Some(out.with_file_name(format!("{stem}{suffix}.{ext}")))
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn load_traces(dir: &Path) -> anyhow::Result<PairedTraceSet> {
    let load = |name: &str, party| {
        let path = dir.join(name);
        trace_io::load_trace(&path, party).with_context(|| format!("loading {}", path.display()))
    };
    Ok(PairedTraceSet {
        alice: load("alice.csv", Party::Alice)?,
        bob: load("bob.csv", Party::Bob)?,
        eve: load("eve.csv", Party::Eve)?,
    })
}

#[derive(Serialize)]
struct AgreeRow {
    succeeded: bool,
    matched_via: String,
    rounds_used: u32,
    key_length: usize,
    key_hex: String,
    matched_streams: usize,
    secret_bits: usize,
    reconciliation_messages: usize,
    total_messages: usize,
    total_bytes: usize,
    eve_max_abs_correlation: Option<f64>,
}

pub fn run(spec: &ExperimentSpec) -> anyhow::Result<()> {
    match spec.command {
        Command::Simulate => {
            let cfg = spec.scenario()?;
            let traces = simulate(&cfg)?;
            let dir = spec.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let header = output::comment_header(spec)?;
            for (name, trace) in [("alice", &traces.alice), ("bob", &traces.bob), ("eve", &traces.eve)] {
                write_file(&dir.join(format!("{name}.csv")), |w| {
                    w.write_all(header.as_bytes())?;
                    trace_io::write_trace(w, trace)?;
                    Ok(())
                })?;
            }
            Ok(())
        }
        Command::Extract => {
            let cfg = spec.scenario()?;
            let alphas = match spec.alpha {
                Some(a) => vec![a],
                None => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            };
            spec.table(&experiments::alpha_sweep(&cfg, &alphas, spec.trials(), spec.seed)?)
        }
        Command::Compare => {
            let cfg = spec.scenario()?;
            let trials = experiments::compare(&CompareSetup::default(), &spec.params(&cfg), spec.trials(), spec.seed)?;
            spec.table(&trials)?;
            if let Some(path) = spec.sibling("_cdf", spec.format.extension()) {
                let cdf = experiments::message_cdf(&trials);
                write_file(&path, |w| output::write_table(w, spec, &cdf, spec.format))?;
            }
            Ok(())
        }
        Command::Randomness => {
            let cfg = spec.scenario()?;
            let runs = experiments::randomness_runs(&cfg, &spec.params(&cfg), spec.trials(), spec.seed)?;
            spec.table(&runs.into_iter().flatten().collect::<Vec<_>>())
        }
        Command::Attack => {
            let mut csi = spec.scenario()?;
            csi.attack_period_s = Some(spec.attack_period);
            let alpha = spec.params(&csi).alpha;
            let rows = vec![
                experiments::attack_mode("rss", &experiments::rss_emulation(&csi), alpha)?,
                experiments::attack_mode("csi", &csi, alpha)?,
            ];
            spec.table(&rows)
        }
        Command::Agree => {
            let cfg = spec.scenario()?;
            let traces = match &spec.traces {
                Some(dir) => load_traces(dir)?,
                None => simulate(&cfg)?,
            };
            let (result, view) = run_key_agreement(&traces, &spec.params(&cfg))?;
            let eve = eve_attempt(&view, &result.matched_streams);
            let row = AgreeRow {
                succeeded: result.succeeded(),
                matched_via: match result.matched_via {
                    Some(MatchedVia::Direct(i)) => format!("direct:{i}"),
                    Some(MatchedVia::Recombination) => "recombination".into(),
                    None => "none".into(),
                },
                rounds_used: result.rounds_used,
                key_length: result.key.as_ref().map_or(0, |k| k.len()),
                key_hex: result
                    .key
                    .as_ref()
                    .map(|k| hex::encode(k.to_packed()))
                    .unwrap_or_default(),
                matched_streams: result.matched_streams.len(),
                secret_bits: result.secret_bits(),
                reconciliation_messages: result.counters.reconciliation_messages(),
                total_messages: result.counters.total().messages,
                total_bytes: result.counters.total().bytes,
                eve_max_abs_correlation: eve.max_abs_correlation(),
            };
            spec.table(&[row])?;
            if let Some(path) = spec.sibling("_transcript", "jsonl") {
                write_file(&path, |w| Ok(transcript::write_jsonl(w, &result.transcript)?))?;
            }
            Ok(())
        }
    }
}
