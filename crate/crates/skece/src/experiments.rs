//! Experiment drivers behind the command line. Each returns plain rows so the
//! acceptance tests can call them directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use skece_core::analysis;
use skece_core::cascade::{cascade_reconcile, CascadeConfig};
use skece_core::channel::{simulate, ScenarioConfig};
use skece_core::protocol::{reconcile_streams, run_key_agreement, AgreementParams, KeyAgreementResult};
use skece_core::quantizer;
use skece_core::BitStream;

use crate::randomness::{self, TestReport};

/// Seed of trial `t` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn config_for(base: &ScenarioConfig, seed: u64, t: usize) -> ScenarioConfig {
    ScenarioConfig {
        rng_seed: trial_seed(seed, t),
        ..base.clone()
    }
}

/// Per-run averages of the three bit classes over all subcarriers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub ignored: f64,
    pub mismatched: f64,
    pub matched: f64,
}

/// Bit classes of one run: a probe instant is ignored if either side drops
/// it, otherwise matched or mismatched.
pub fn classify_bits(cfg: &ScenarioConfig, alpha: f64) -> anyhow::Result<(usize, usize, usize)> {
    let traces = simulate(cfg)?;
    let (mut ignored, mut mismatched, mut matched) = (0, 0, 0);
    for i in 0..cfg.subcarriers {
        let a = traces.alice.amplitudes(i);
        let b = traces.bob.amplitudes(i);
        let la = quantizer::quantize_local(a, alpha)?;
        let lb = quantizer::quantize_local(b, alpha)?;
        let kept = quantizer::merge_kept(&la.drops, &lb.drops, a.len())?;
        let ba = quantizer::extract_bits(a, &la.thresholds, &kept)?;
        let bb = quantizer::extract_bits(b, &lb.thresholds, &kept)?;
        let diff = ba.bits().iter().zip(bb.bits()).filter(|(x, y)| x != y).count();
        ignored += a.len() - kept.len();
        mismatched += diff;
        matched += kept.len() - diff;
    }
    Ok((ignored, mismatched, matched))
}

pub fn alpha_sweep(base: &ScenarioConfig, alphas: &[f64], trials: usize, seed: u64) -> anyhow::Result<Vec<AlphaRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut sums = [0usize; 3];
            for t in 0..trials {
                let (i, mm, m) = classify_bits(&config_for(base, seed, t), alpha)?;
                sums[0] += i;
                sums[1] += mm;
                sums[2] += m;
            }
            let mean = |x: usize| x as f64 / trials as f64;
            Ok(AlphaRow {
                alpha,
                ignored: mean(sums[0]),
                mismatched: mean(sums[1]),
                matched: mean(sums[2]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSetup {
    pub streams: usize,
    pub length: usize,
    /// Inclusive range of differing bits injected into every stream pair.
    pub min_errors: usize,
    pub max_errors: usize,
}

impl Default for CompareSetup {
    fn default() -> Self {
        Self {
            streams: 30,
            length: 300,
            min_errors: 1,
            max_errors: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTrial {
    pub trial: usize,
    pub skece_messages: usize,
    /// Both sides hold the same key.
    pub skece_agreed: bool,
    pub skece_rounds: u32,
    pub cascade_messages: usize,
    pub cascade_agreed: bool,
}

fn flip_distinct(rng: &mut ChaCha8Rng, s: &mut BitStream, count: usize) {
    let mut done: Vec<usize> = Vec::with_capacity(count);
    while done.len() < count.min(s.len()) {
        let j = rng.random_range(0..s.len());
        if !done.contains(&j) {
            done.push(j);
            s.bits_mut()[j] ^= true;
        }
    }
}

/// SKECE over `setup.streams` stream pairs against Cascade on the first
/// pair. Reconciliation messages only; no probing.
pub fn compare(
    setup: &CompareSetup,
    params: &AgreementParams,
    trials: usize,
    seed: u64,
) -> anyhow::Result<Vec<CompareTrial>> {
    (0..trials)
        .map(|t| {
            let ts = trial_seed(seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(ts);
            let alice: Vec<BitStream> = (0..setup.streams)
                .map(|_| (0..setup.length).map(|_| rng.random::<bool>()).collect())
                .collect();
            let bob: Vec<BitStream> = alice
                .iter()
                .map(|s| {
                    let mut b = s.clone();
                    let k = rng.random_range(setup.min_errors..=setup.max_errors);
                    flip_distinct(&mut rng, &mut b, k);
                    b
                })
                .collect();
            let p = AgreementParams {
                seed: ts,
                ..params.clone()
            };
            let r = reconcile_streams(alice.clone(), bob.clone(), &p)?;
            let c = cascade_reconcile(
                &alice[0],
                &bob[0],
                &CascadeConfig {
                    rng_seed: ts,
                    ..CascadeConfig::default()
                },
            )?;
            Ok(CompareTrial {
                trial: t,
                skece_messages: r.transcript.len(),
                skece_agreed: r.succeeded(),
                skece_rounds: r.rounds_used,
                cascade_messages: c.messages_sent(),
                cascade_agreed: c.corrected.bits() == alice[0].bits(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfRow {
    pub messages: usize,
    pub skece: f64,
    pub cascade: f64,
}

/// Empirical CDFs of the message counts; a SKECE trial only counts as done
/// once the keys agree.
pub fn message_cdf(trials: &[CompareTrial]) -> Vec<CdfRow> {
    let n = trials.len().max(1) as f64;
    let max = trials
        .iter()
        .map(|t| t.skece_messages.max(t.cascade_messages))
        .max()
        .unwrap_or(0);
    (0..=max)
        .map(|k| CdfRow {
            messages: k,
            skece: trials
                .iter()
                .filter(|t| t.skece_agreed && t.skece_messages <= k)
                .count() as f64
                / n,
            cascade: trials
                .iter()
                .filter(|t| t.cascade_agreed && t.cascade_messages <= k)
                .count() as f64
                / n,
        })
        .collect()
}

pub fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2] as f64,
        _ => (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0,
    }
}

/// Alice's copies of every stream that validated, concatenated.
pub fn key_material(result: &KeyAgreementResult) -> BitStream {
    result
        .matched_streams
        .iter()
        .flat_map(|s| s.bits().iter().copied())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedReport {
    pub test: &'static str,
    pub name: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl NamedReport {
    fn new(name: String, r: TestReport) -> Self {
        Self {
            test: r.test,
            name,
            n: r.n,
            statistic: r.statistic,
            p_value: r.p_value,
            pass: r.pass,
        }
    }
}

/// Runs a full agreement per trial and tests the validated key material.
pub fn randomness_runs(
    base: &ScenarioConfig,
    params: &AgreementParams,
    trials: usize,
    seed: u64,
) -> anyhow::Result<Vec<Vec<NamedReport>>> {
    (0..trials)
        .map(|t| {
            let cfg = config_for(base, seed, t);
            let (result, _) = run_key_agreement(&simulate(&cfg)?, params)?;
            let bits = key_material(&result);
            let name = format!("{}/{t}", base.preset.letter());
            Ok(randomness::run_all(bits.bits())?
                .into_iter()
                .map(|r| NamedReport::new(name.clone(), r))
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackMode {
    pub mode: &'static str,
    pub subcarriers: usize,
    pub period_samples: usize,
    /// Lag of the strongest autocorrelation near the attack period.
    pub peak_lag: usize,
    /// That autocorrelation in white-noise standard errors.
    pub peak_score: f64,
    pub key_bits: usize,
    pub frequency_p: f64,
    pub frequency_pass: bool,
}

/// Alice's bits on subcarrier `i` laid out on the probe grid: +1 or -1 where
/// both sides kept the instant, 0 where it was dropped.
fn aligned_bits(cfg: &ScenarioConfig, alpha: f64) -> anyhow::Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let traces = simulate(cfg)?;
    let n = cfg.probe_count;
    let mut series = Vec::with_capacity(cfg.subcarriers);
    let mut key = Vec::new();
    for i in 0..cfg.subcarriers {
        let a = traces.alice.amplitudes(i);
        let la = quantizer::quantize_local(a, alpha)?;
        let lb = quantizer::quantize_local(traces.bob.amplitudes(i), alpha)?;
        let kept = quantizer::merge_kept(&la.drops, &lb.drops, n)?;
        let bits = quantizer::extract_bits(a, &la.thresholds, &kept)?;
        let mut s = vec![0.0; n];
        for (&j, &b) in kept.iter().zip(bits.bits()) {
            s[j] = if b { 1.0 } else { -1.0 };
        }
        series.push(s);
        key.extend_from_slice(bits.bits());
    }
    Ok((series, key))
}

/// Runs one attack mode and scores the periodicity of subcarrier 0.
pub fn attack_mode(mode: &'static str, cfg: &ScenarioConfig, alpha: f64) -> anyhow::Result<AttackMode> {
    let period_s = cfg
        .attack_period_s
        .ok_or_else(|| anyhow::anyhow!("attack experiment needs attack_period_s"))?;
    let period = (period_s / cfg.probe_interval_s).round() as usize;
    let (series, key) = aligned_bits(cfg, alpha)?;
    let (peak_lag, peak_score) = analysis::periodicity_score(&series[0], period / 2 + 1, period + period / 2)?;
    let freq = randomness::frequency(&key)?;
    Ok(AttackMode {
        mode,
        subcarriers: cfg.subcarriers,
        period_samples: period,
        peak_lag,
        peak_score,
        key_bits: key.len(),
        frequency_p: freq.p_value,
        frequency_pass: freq.pass,
    })
}

/// The single-stream RSS emulation of a scenario: one coarse, noisy reading
/// per probe whose own variation is small next to the attack depth.
pub fn rss_emulation(csi: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        subcarriers: 1,
        innovation_std_db: csi.innovation_std_db / 3.0,
        noise_std_db: 1.0,
        ..csi.clone()
    }
}
