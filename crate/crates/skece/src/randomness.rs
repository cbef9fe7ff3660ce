//! Four tests from the NIST SP 800-22 battery: frequency (monobit), longest
//! run of ones in a block, discrete Fourier transform and approximate
//! entropy.

use std::f64::consts::{LN_2, SQRT_2};
use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomnessError {
    #[error("{test} needs at least {needed} bits, got {got}")]
    TooShort {
        test: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("approximate entropy block length {m} too large for {n} bits (needs m <= log2(n) - 5)")]
    BlockTooLarge { m: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: &'static str,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl TestReport {
    fn new(test: &'static str, n: usize, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test,
            n,
            statistic,
            p_value,
            pass: p_value > SIGNIFICANCE,
        }
    }
}

fn need(test: &'static str, bits: &[bool], needed: usize) -> Result<(), RandomnessError> {
    if bits.len() < needed {
        return Err(RandomnessError::TooShort {
            test,
            needed,
            got: bits.len(),
        });
    }
    Ok(())
}

/// Upper regularized incomplete gamma, tolerant of a zero statistic.
fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(a, x)
    }
}

pub fn frequency(bits: &[bool]) -> Result<TestReport, RandomnessError> {
    need("frequency", bits, 100)?;
    let n = bits.len() as f64;
    let s: i64 = bits.iter().map(|&b| if b { 1 } else { -1 }).sum();
    let s_obs = s.unsigned_abs() as f64 / n.sqrt();
    Ok(TestReport::new("frequency", bits.len(), s_obs, erfc(s_obs / SQRT_2)))
}

/// (block length, category bounds, category probabilities).
fn longest_run_table(n: usize) -> (usize, usize, &'static [f64]) {
    if n < 6272 {
        (8, 1, &[0.2148, 0.3672, 0.2305, 0.1875])
    } else if n < 750_000 {
        (128, 4, &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124])
    } else {
        (10_000, 10, &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727])
    }
}

pub fn longest_run(bits: &[bool]) -> Result<TestReport, RandomnessError> {
    need("longest_run", bits, 128)?;
    let (m, lowest, pi) = longest_run_table(bits.len());
    let k = pi.len() - 1;
    let blocks = bits.len() / m;
    let mut counts = vec![0usize; pi.len()];
    for block in bits.chunks_exact(m) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in block {
            run = if b { run + 1 } else { 0 };
            best = best.max(run);
        }
        counts[best.clamp(lowest, lowest + k) - lowest] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(pi)
        .map(|(&v, &p)| {
            let e = blocks as f64 * p;
            (v as f64 - e).powi(2) / e
        })
        .sum();
    Ok(TestReport::new(
        "longest_run",
        bits.len(),
        chi2,
        igamc(k as f64 / 2.0, chi2 / 2.0),
    ))
}

/// Discrete Fourier transform (spectral) test.
pub fn fft(bits: &[bool]) -> Result<TestReport, RandomnessError> {
    need("fft", bits, 1000)?;
    Ok(fft_unchecked(bits))
}

/// [`fft`] without the minimum-length rule, for short reference vectors.
pub fn fft_unchecked(bits: &[bool]) -> TestReport {
    let n = bits.len();
    let mut buf: Vec<Complex<f64>> = bits
        .iter()
        .map(|&b| Complex::new(if b { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let threshold = ((1.0f64 / 0.05).ln() * n as f64).sqrt();
    let n0 = 0.95 * n as f64 / 2.0;
    let n1 = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let d = (n1 - n0) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    TestReport::new("fft", n, d, erfc(d.abs() / SQRT_2))
}

/// `sum_i C_i ln C_i` over overlapping `m`-bit patterns of the cyclically
/// extended sequence.
fn phi(bits: &[bool], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0usize; 1 << m];
    for i in 0..n {
        let idx = (0..m).fold(0usize, |acc, j| (acc << 1) | usize::from(bits[(i + j) % n]));
        counts[idx] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * p.ln()
        })
        .sum()
}

pub fn approximate_entropy(bits: &[bool], m: usize) -> Result<TestReport, RandomnessError> {
    let n = bits.len();
    if n == 0 || (m as f64) > (n as f64).log2() - 5.0 {
        return Err(RandomnessError::BlockTooLarge { m, n });
    }
    Ok(approximate_entropy_unchecked(bits, m))
}

/// [`approximate_entropy`] without the block-length rule; the standard's own
/// worked example runs `m = 2` on 100 bits.
pub fn approximate_entropy_unchecked(bits: &[bool], m: usize) -> TestReport {
    let n = bits.len();
    let ap_en = phi(bits, m) - phi(bits, m + 1);
    let chi2 = 2.0 * n as f64 * (LN_2 - ap_en);
    let p = igamc(2f64.powi(m as i32 - 1), chi2 / 2.0);
    TestReport::new("approximate_entropy", n, chi2, p)
}

/// Block length used for approximate entropy on keys.
pub const APEN_BLOCK: usize = 2;

/// All four tests on one sequence.
pub fn run_all(bits: &[bool]) -> Result<[TestReport; 4], RandomnessError> {
    Ok([
        frequency(bits)?,
        longest_run(bits)?,
        fft(bits)?,
        approximate_entropy(bits, APEN_BLOCK)?,
    ])
}

pub fn write_csv<W: Write>(out: W, name: &str, reports: &[TestReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["test", "name", "n", "statistic", "p_value", "pass"])?;
    for r in reports {
        w.write_record([
            r.test,
            name,
            &r.n.to_string(),
            &r.statistic.to_string(),
            &r.p_value.to_string(),
            &r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
