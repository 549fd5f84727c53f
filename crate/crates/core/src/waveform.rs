//! Transmit-side signal construction: the constant-modulus training
//! sequence, OFDM modulation, cyclic prefixing, and frame assembly.

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

/// A sequence of complex baseband samples.
pub type ComplexVec = Vec<Complex64>;

/// One transmit stream of three prefixed symbols, with the training symbol
/// in the middle.
#[derive(Debug, Clone)]
pub struct TxFrame {
    /// `3 * n_u` samples: data symbol, training symbol, data symbol.
    pub samples: ComplexVec,
    /// Index of the training symbol's first prefix sample.
    pub train_start: usize,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Zadoff-Chu sequence for even length `n`: `d_k = exp(-j pi u k^2 / n)`.
///
/// The exponent is reduced modulo `2n` in integer arithmetic before the
/// trigonometric evaluation, so the samples stay exact for any `k`.
pub fn zc_sequence(n: usize, root: usize) -> Result<ComplexVec> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::config(format!("sequence length {n} must be even")));
    }
    if gcd(root, n) != 1 {
        return Err(Error::config(format!(
            "root {root} is not coprime with length {n}"
        )));
    }
    let modulus = 2 * n as u128;
    Ok((0..n)
        .map(|k| {
            let q = (root as u128 * (k as u128 * k as u128)) % modulus;
            let phase = -PI * q as f64 / n as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect())
}

/// Inverse DFT with `1/n` normalization: `s_n = (1/n) sum_k d_k e^{j2pi kn/n}`.
pub fn ofdm_modulate(symbols: &ComplexVec) -> Result<ComplexVec> {
    let n = symbols.len();
    if n == 0 {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let mut buf = symbols.clone();
    PLANNER.with(|planner| {
        let fft = planner.borrow_mut().plan_fft_inverse(n);
        fft.process(&mut buf);
    });
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

/// Prepends the last `cp_len` samples of `symbol` as a cyclic prefix.
pub fn add_cp(symbol: &ComplexVec, cp_len: usize) -> Result<ComplexVec> {
    let n = symbol.len();
    if cp_len != 0 && cp_len >= n {
        return Err(Error::config(format!(
            "cyclic prefix {cp_len} must be shorter than the symbol {n}"
        )));
    }
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&symbol[n - cp_len..]);
    out.extend_from_slice(symbol);
    Ok(out)
}

/// The prefixed training symbol, scaled so the mean sample power is
/// `sigma_d2`. This is also the receiver-side replica for the correlation
/// and sparse-recovery baselines.
pub fn training_symbol(cfg: &OfdmConfig) -> Result<ComplexVec> {
    let freq = zc_sequence(cfg.n, cfg.zc_root)?;
    let time = ofdm_modulate(&freq)?;
    let mut prefixed = add_cp(&time, cfg.cp_len)?;
    // Unit-modulus subcarriers through the 1/n IDFT leave a mean sample
    // power of 1/n; restore sigma_d2 here.
    let scale = (cfg.n as f64 * cfg.sigma_d2).sqrt();
    for v in &mut prefixed {
        *v *= scale;
    }
    Ok(prefixed)
}

/// One prefixed OFDM symbol of independent unit-power QPSK subcarriers.
fn qpsk_data_symbol<R: Rng>(cfg: &OfdmConfig, rng: &mut R) -> Result<ComplexVec> {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let freq: ComplexVec = (0..cfg.n)
        .map(|_| {
            let re = if rng.random::<bool>() { half } else { -half };
            let im = if rng.random::<bool>() { half } else { -half };
            Complex64::new(re, im)
        })
        .collect();
    let time = ofdm_modulate(&freq)?;
    let mut prefixed = add_cp(&time, cfg.cp_len)?;
    let scale = (cfg.n as f64 * cfg.sigma_d2).sqrt();
    for v in &mut prefixed {
        *v *= scale;
    }
    Ok(prefixed)
}

/// Assembles `[data | training | data]`, each `n_u` samples long.
///
/// The data symbols give the observation window realistic non-training
/// content on both sides of the training symbol. Pure function of
/// `(cfg, rng state)`.
pub fn build_frame<R: Rng>(cfg: &OfdmConfig, rng: &mut R) -> Result<TxFrame> {
    let n_u = cfg.n_u();
    let mut samples = Vec::with_capacity(3 * n_u);
    samples.extend(qpsk_data_symbol(cfg, rng)?);
    samples.extend(training_symbol(cfg)?);
    samples.extend(qpsk_data_symbol(cfg, rng)?);
    Ok(TxFrame {
        samples,
        train_start: n_u,
    })
}

/// Like [`build_frame`] with silence instead of data symbols: the
/// zero-padded construction used by the baseline oracle scenarios.
pub fn build_silent_frame(cfg: &OfdmConfig) -> Result<TxFrame> {
    let n_u = cfg.n_u();
    let mut samples = vec![Complex64::new(0.0, 0.0); n_u];
    samples.extend(training_symbol(cfg)?);
    samples.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(n_u));
    Ok(TxFrame {
        samples,
        train_start: n_u,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
