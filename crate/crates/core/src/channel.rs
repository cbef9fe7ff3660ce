//! Seeded multi-subcarrier fading simulator.
//!
//! Each subcarrier carries a latent dB-domain AR(1) process sampled on the
//! probe grid. A slow AR(1) drift is shared by all subcarriers. Alice samples
//! the latent process at the grid instants; Bob samples it
//! `half_duplex_offset_s` later, linearly interpolated between grid points,
//! so a zero offset reproduces Alice's latent values exactly. Both add
//! independent Gaussian measurement noise. Eve observes
//! `rho * latent + sqrt(1 - rho^2) * independent_latent`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::bits::Party;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("subcarrier count must be at least 1")]
    NoSubcarriers,
    #[error("probe count must be at least 1")]
    NoProbes,
    #[error("{field} must be finite and {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("half-duplex offset {offset}s must be smaller than the probe interval {interval}s")]
    OffsetTooLarge { offset: f64, interval: f64 },
    #[error("subcarrier {subcarrier} has {found} samples, expected {expected}")]
    RaggedTrace {
        subcarrier: usize,
        found: usize,
        expected: usize,
    },
    #[error("timestamp at sample {index} is not strictly increasing")]
    NonMonotoneTime { index: usize },
    #[error("non-finite amplitude on subcarrier {subcarrier} at sample {index}")]
    NonFiniteAmplitude { subcarrier: usize, index: usize },
}

/// Table of scenario presets (A to F) or a hand-built configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Preset {
    A,
    B,
    C,
    D,
    E,
    F,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::A, Preset::B, Preset::C, Preset::D, Preset::E, Preset::F];

    pub fn letter(self) -> char {
        match self {
            Preset::A => 'A',
            Preset::B => 'B',
            Preset::C => 'C',
            Preset::D => 'D',
            Preset::E => 'E',
            Preset::F => 'F',
            Preset::Custom => '*',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mobility {
    Static,
    Mobile,
}

impl Mobility {
    /// Default per-step innovation standard deviation of the latent process.
    pub fn innovation_std_db(self) -> f64 {
        match self {
            Mobility::Static => 1.5,
            Mobility::Mobile => 4.0,
        }
    }

    /// Quantizer spread used for this kind of scenario.
    pub fn default_alpha(self) -> f64 {
        match self {
            Mobility::Static => 0.7,
            Mobility::Mobile => 0.4,
        }
    }
}

/// Simulator parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioConfig {
    pub preset: Preset,
    /// Number of subcarriers `m`.
    pub subcarriers: usize,
    /// Number of probe instants `n`.
    pub probe_count: usize,
    pub probe_interval_s: f64,
    /// Delay between Alice's and Bob's measurement of the same probe.
    pub half_duplex_offset_s: f64,
    pub mobility: Mobility,
    /// Lag-one coefficient of each subcarrier's latent process.
    pub ar_coefficient: f64,
    pub innovation_std_db: f64,
    /// Stationary standard deviation of the drift shared by all subcarriers.
    pub drift_std_db: f64,
    pub drift_coefficient: f64,
    pub mean_amplitude_db: f64,
    /// Standard deviation of the fixed per-subcarrier level offsets.
    pub subcarrier_spread_db: f64,
    pub noise_std_db: f64,
    pub eve_correlation: f64,
    /// Period of the line-of-sight blocking square wave, if any.
    pub attack_period_s: Option<f64>,
    pub attack_depth_db: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// A configuration with the defaults for the given mobility class.
    pub fn new(mobility: Mobility, rng_seed: u64) -> Self {
        Self {
            preset: Preset::Custom,
            subcarriers: 30,
            probe_count: 300,
            probe_interval_s: 0.1,
            half_duplex_offset_s: 0.003,
            mobility,
            ar_coefficient: 0.01,
            innovation_std_db: mobility.innovation_std_db(),
            drift_std_db: 0.1,
            drift_coefficient: 0.995,
            mean_amplitude_db: 23.0,
            subcarrier_spread_db: 2.0,
            noise_std_db: match mobility {
                Mobility::Static => 0.15,
                Mobility::Mobile => 0.3,
            },
            eve_correlation: 0.0,
            attack_period_s: None,
            attack_depth_db: 6.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        fn check(field: &'static str, value: f64, requirement: &'static str, ok: bool) -> Result<(), ChannelError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(ChannelError::OutOfRange {
                    field,
                    requirement,
                    value,
                })
            }
        }
        if self.subcarriers == 0 {
            return Err(ChannelError::NoSubcarriers);
        }
        if self.probe_count == 0 {
            return Err(ChannelError::NoProbes);
        }
        check(
            "probe_interval_s",
            self.probe_interval_s,
            "> 0",
            self.probe_interval_s > 0.0,
        )?;
        check(
            "half_duplex_offset_s",
            self.half_duplex_offset_s,
            ">= 0",
            self.half_duplex_offset_s >= 0.0,
        )?;
        if self.half_duplex_offset_s >= self.probe_interval_s {
            return Err(ChannelError::OffsetTooLarge {
                offset: self.half_duplex_offset_s,
                interval: self.probe_interval_s,
            });
        }
        check(
            "ar_coefficient",
            self.ar_coefficient,
            "in (-1, 1)",
            self.ar_coefficient.abs() < 1.0,
        )?;
        check(
            "drift_coefficient",
            self.drift_coefficient,
            "in (-1, 1)",
            self.drift_coefficient.abs() < 1.0,
        )?;
        check(
            "innovation_std_db",
            self.innovation_std_db,
            ">= 0",
            self.innovation_std_db >= 0.0,
        )?;
        check("drift_std_db", self.drift_std_db, ">= 0", self.drift_std_db >= 0.0)?;
        check("noise_std_db", self.noise_std_db, ">= 0", self.noise_std_db >= 0.0)?;
        check(
            "subcarrier_spread_db",
            self.subcarrier_spread_db,
            ">= 0",
            self.subcarrier_spread_db >= 0.0,
        )?;
        check("mean_amplitude_db", self.mean_amplitude_db, "finite", true)?;
        check(
            "eve_correlation",
            self.eve_correlation,
            "in [-1, 1]",
            self.eve_correlation.abs() <= 1.0,
        )?;
        check(
            "attack_depth_db",
            self.attack_depth_db,
            ">= 0",
            self.attack_depth_db >= 0.0,
        )?;
        if let Some(p) = self.attack_period_s {
            check("attack_period_s", p, "> 0", p > 0.0)?;
        }
        Ok(())
    }

    /// Stationary standard deviation of one subcarrier's latent process.
    pub fn latent_std_db(&self) -> f64 {
        self.innovation_std_db / libm::sqrt(1.0 - self.ar_coefficient * self.ar_coefficient)
    }

    /// Additive attack term at time `t`: `-depth` during the first half of
    /// each period, zero otherwise.
    pub fn attack_offset_db(&self, t: f64) -> f64 {
        match self.attack_period_s {
            Some(period) => {
                let phase = t - libm::floor(t / period) * period;
                if phase < period / 2.0 {
                    -self.attack_depth_db
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }
}

/// One CSI estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub time: f64,
    pub subcarrier: usize,
    pub amplitude_db: f64,
    pub phase_rad: f64,
}

/// Time-indexed amplitude/phase samples of one party, all subcarriers sharing
/// the same timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    party: Party,
    times: Vec<f64>,
    amplitude: Vec<Vec<f64>>,
    phase: Vec<Vec<f64>>,
}

impl CsiTrace {
    /// `amplitude[i][k]` is subcarrier `i` at `times[k]`.
    pub fn new(
        party: Party,
        times: Vec<f64>,
        amplitude: Vec<Vec<f64>>,
        phase: Vec<Vec<f64>>,
    ) -> Result<Self, ChannelError> {
        if amplitude.is_empty() {
            return Err(ChannelError::NoSubcarriers);
        }
        let n = times.len();
        for (i, (amp, ph)) in amplitude.iter().zip(&phase).enumerate() {
            for found in [amp.len(), ph.len()] {
                if found != n {
                    return Err(ChannelError::RaggedTrace {
                        subcarrier: i,
                        found,
                        expected: n,
                    });
                }
            }
            if let Some(index) = amp.iter().position(|a| !a.is_finite()) {
                return Err(ChannelError::NonFiniteAmplitude { subcarrier: i, index });
            }
        }
        if phase.len() != amplitude.len() {
            return Err(ChannelError::RaggedTrace {
                subcarrier: phase.len().min(amplitude.len()),
                found: 0,
                expected: n,
            });
        }
        if let Some(k) = times
            .windows(2)
            .position(|w| w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater))
        {
            return Err(ChannelError::NonMonotoneTime { index: k + 1 });
        }
        Ok(Self {
            party,
            times,
            amplitude,
            phase,
        })
    }

    pub fn party(&self) -> Party {
        self.party
    }

    /// Subcarrier count `m`.
    pub fn subcarriers(&self) -> usize {
        self.amplitude.len()
    }

    /// Samples per subcarrier `n`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitudes(&self, subcarrier: usize) -> &[f64] {
        &self.amplitude[subcarrier]
    }

    pub fn phases(&self, subcarrier: usize) -> &[f64] {
        &self.phase[subcarrier]
    }

    pub fn sample(&self, subcarrier: usize, k: usize) -> ChannelSample {
        ChannelSample {
            time: self.times[k],
            subcarrier,
            amplitude_db: self.amplitude[subcarrier][k],
            phase_rad: self.phase[subcarrier][k],
        }
    }

    /// All samples in `(time, subcarrier)` order.
    pub fn samples(&self) -> impl Iterator<Item = ChannelSample> + '_ {
        (0..self.len()).flat_map(move |k| (0..self.subcarriers()).map(move |i| self.sample(i, k)))
    }

    /// Same trace attributed to another party. Used for degenerate
    /// eavesdropper checks.
    pub fn relabeled(&self, party: Party) -> Self {
        Self { party, ..self.clone() }
    }
}

/// Alice, Bob and Eve traces of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTraceSet {
    pub alice: CsiTrace,
    pub bob: CsiTrace,
    pub eve: CsiTrace,
}

impl PairedTraceSet {
    pub fn subcarriers(&self) -> usize {
        self.alice.subcarriers()
    }

    pub fn probe_count(&self) -> usize {
        self.alice.len()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * libm::floor((x + PI) / (2.0 * PI))
}

/// Stationary AR(1) path of `len` points.
fn ar1_path(rng: &mut ChaCha8Rng, len: usize, coefficient: f64, stationary_std: f64) -> Vec<f64> {
    let innovation = stationary_std * libm::sqrt(1.0 - coefficient * coefficient);
    let mut path = Vec::with_capacity(len);
    let mut x = stationary_std * normal(rng);
    for _ in 0..len {
        path.push(x);
        x = coefficient * x + innovation * normal(rng);
    }
    path
}

/// Generates paired traces for `config`. Deterministic in `config.rng_seed`.
pub fn simulate(config: &ScenarioConfig) -> Result<PairedTraceSet, ChannelError> {
    config.validate()?;
    let m = config.subcarriers;
    let n = config.probe_count;
    let dt = config.probe_interval_s;
    let offset = config.half_duplex_offset_s;
    let weight = offset / dt;
    let rho = config.eve_correlation;
    let rho_c = libm::sqrt((1.0 - rho * rho).max(0.0));
    let latent_std = config.latent_std_db();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    // One extra grid point so Bob's last sample can interpolate.
    let grid = n + 1;
    let drift = ar1_path(&mut rng, grid, config.drift_coefficient, config.drift_std_db);
    let eve_drift = ar1_path(&mut rng, grid, config.drift_coefficient, config.drift_std_db);

    let alice_times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let bob_times: Vec<f64> = alice_times.iter().map(|t| t + offset).collect();

    let noise = Normal::new(0.0, config.noise_std_db).expect("validated noise std");
    let phase_step = Normal::new(0.0, 0.2).expect("constant");

    let mut amp = [vec![Vec::new(); m], vec![Vec::new(); m], vec![Vec::new(); m]];
    let mut phase = [vec![Vec::new(); m], vec![Vec::new(); m], vec![Vec::new(); m]];

    for i in 0..m {
        let level = config.mean_amplitude_db + config.subcarrier_spread_db * normal(&mut rng);
        let eve_level = config.mean_amplitude_db + config.subcarrier_spread_db * normal(&mut rng);
        let latent = ar1_path(&mut rng, grid, config.ar_coefficient, latent_std);
        let eve_latent = ar1_path(&mut rng, grid, config.ar_coefficient, latent_std);

        let (mut a_amp, mut b_amp, mut e_amp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut a_ph, mut b_ph, mut e_ph) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let mut shared_phase = rng.random_range(-PI..PI);
        let mut eve_phase = rng.random_range(-PI..PI);

        for k in 0..n {
            let t_a = alice_times[k];
            let t_b = bob_times[k];
            let at_alice = latent[k] + drift[k] + config.attack_offset_db(t_a);
            let at_bob = latent[k]
                + weight * (latent[k + 1] - latent[k])
                + drift[k]
                + weight * (drift[k + 1] - drift[k])
                + config.attack_offset_db(t_b);
            let own = eve_latent[k] + eve_drift[k];

            a_amp.push(level + at_alice + noise.sample(&mut rng));
            b_amp.push(level + at_bob + noise.sample(&mut rng));
            e_amp.push(eve_level + rho * at_alice + rho_c * own + noise.sample(&mut rng));

            a_ph.push(shared_phase);
            b_ph.push(shared_phase);
            e_ph.push(eve_phase);
            shared_phase = wrap_phase(0.9 * shared_phase + phase_step.sample(&mut rng));
            eve_phase = wrap_phase(0.9 * eve_phase + phase_step.sample(&mut rng));
        }
        amp[0][i] = a_amp;
        amp[1][i] = b_amp;
        amp[2][i] = e_amp;
        phase[0][i] = a_ph;
        phase[1][i] = b_ph;
        phase[2][i] = e_ph;
    }

    let [a_amp, b_amp, e_amp] = amp;
    let [a_ph, b_ph, e_ph] = phase;
    Ok(PairedTraceSet {
        alice: CsiTrace::new(Party::Alice, alice_times.clone(), a_amp, a_ph)?,
        bob: CsiTrace::new(Party::Bob, bob_times, b_amp, b_ph)?,
        eve: CsiTrace::new(Party::Eve, alice_times, e_amp, e_ph)?,
    })
}
