//! Eve's view against closed-form Gaussian results.

use skece_core::analysis::pearson;
use skece_core::channel::{simulate, Mobility, ScenarioConfig};
use skece_core::protocol::{eve_attempt, run_session, AgreementParams, Endpoint, EveView};
use skece_core::Party;

fn config(rho: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        subcarriers: 8,
        probe_count: 10_000,
        eve_correlation: rho,
        ..ScenarioConfig::new(Mobility::Mobile, seed)
    }
}

/// Amplitude correlation Alice/Eve: both see the shared part with variance
/// `s`, Eve scaled by `rho`, plus independent noise.
fn amplitude_oracle(cfg: &ScenarioConfig) -> f64 {
    let s = cfg.latent_std_db().powi(2) + cfg.drift_std_db.powi(2);
    cfg.eve_correlation * s / (s + cfg.noise_std_db.powi(2))
}

fn mean(x: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = x.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn amplitude_correlation_follows_the_mixing_weight() {
    for rho in [0.0, 0.3, 0.6, 0.9] {
        let cfg = config(rho, 40);
        let t = simulate(&cfg).unwrap();
        let r = mean((0..8).map(|i| pearson(t.alice.amplitudes(i), t.eve.amplitudes(i)).unwrap()));
        let want = amplitude_oracle(&cfg);
        assert!((r - want).abs() < 0.03, "rho {rho}: {r} vs {want}");
    }
}

#[test]
fn independent_eve_stays_inside_the_band() {
    let t = simulate(&config(0.0, 41)).unwrap();
    for i in 0..8 {
        let r = pearson(t.alice.amplitudes(i), t.eve.amplitudes(i)).unwrap();
        assert!(r.abs() <= 0.05, "subcarrier {i}: {r}");
    }
}

#[test]
fn bit_correlation_follows_the_arcsine_law() {
    // Without a guard band both sides slice at the mean, and the sign
    // correlation of two Gaussians with correlation r is 2/pi * asin(r).
    let params = AgreementParams {
        alpha: 0.0,
        ..AgreementParams::default()
    };
    for rho in [0.0, 0.5, 0.8] {
        let cfg = config(rho, 42);
        let traces = simulate(&cfg).unwrap();
        let mut alice = Endpoint::from_trace(Party::Alice, &traces.alice, &params).unwrap();
        let mut bob = Endpoint::from_trace(Party::Bob, &traces.bob, &params).unwrap();
        let rec = run_session(&mut alice, &mut bob).unwrap();
        let view = EveView {
            transcript: rec.transcript,
            trace: traces.eve,
        };
        let report = eve_attempt(&view, &rec.alice.streams);
        let got = mean(report.correlations.iter().map(|c| c.unwrap()));
        let want = 2.0 / std::f64::consts::PI * amplitude_oracle(&cfg).asin();
        assert!((got - want).abs() < 0.03, "rho {rho}: {got} vs {want}");
    }
}
