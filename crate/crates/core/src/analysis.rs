//! Stream metrics: mismatch ratio, correlation, secret-bit rate and a
//! periodicity score for spotting injected square-wave patterns.

use alloc::vec::Vec;

use thiserror::Error;

use crate::protocol::KeyAgreementResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined: a sequence has zero variance")]
    ZeroVariance,
    #[error("duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("stream count must be at least 1")]
    NoStreams,
}

/// Hamming distance divided by length.
pub fn mismatch_ratio(a: &[bool], b: &[bool]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AnalysisError::TooShort { needed: 1, got: 0 });
    }
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// [`pearson`] on bits read as 0/1.
pub fn pearson_bits(x: &[bool], y: &[bool]) -> Result<f64, AnalysisError> {
    let f = |s: &[bool]| s.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<_>>();
    pearson(&f(x), &f(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecretBitRate {
    /// Matched bits over all streams per second.
    pub aggregate: f64,
    /// Mean rate of a single stream.
    pub per_stream_mean: f64,
}

/// Rate from the matched bit count of every stream.
pub fn bit_rate(matched_bits: &[usize], duration_s: f64, streams: usize) -> Result<SecretBitRate, AnalysisError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(AnalysisError::InvalidDuration(duration_s));
    }
    if streams == 0 {
        return Err(AnalysisError::NoStreams);
    }
    let aggregate = matched_bits.iter().sum::<usize>() as f64 / duration_s;
    Ok(SecretBitRate {
        aggregate,
        per_stream_mean: aggregate / streams as f64,
    })
}

/// Rate over the streams that validated in a session.
pub fn secret_bit_rate(
    result: &KeyAgreementResult,
    duration_s: f64,
    streams: usize,
) -> Result<SecretBitRate, AnalysisError> {
    let counts: Vec<usize> = result.matched_streams.iter().map(|s| s.len()).collect();
    bit_rate(&counts, duration_s, streams)
}

/// Sample autocorrelation at lags `1..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>, AnalysisError> {
    if x.len() < 2 || max_lag >= x.len() {
        return Err(AnalysisError::TooShort {
            needed: (max_lag + 1).max(2),
            got: x.len(),
        });
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if var == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|k| (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum::<f64>() / var)
        .collect())
}

/// Largest autocorrelation at lags `min_lag..=max_lag`, in units of the
/// white-noise standard error `1/sqrt(n)`. A periodic component with period
/// in that range pushes the score well above 3.
pub fn periodicity_score(x: &[f64], min_lag: usize, max_lag: usize) -> Result<(usize, f64), AnalysisError> {
    let acf = autocorrelation(x, max_lag)?;
    let se = 1.0 / libm::sqrt(x.len() as f64);
    Ok((min_lag.max(1)..=max_lag)
        .map(|k| (k, acf[k - 1] / se))
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best }))
}
