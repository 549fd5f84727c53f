//! Multipath channel models: power delay profiles, per-trial Rayleigh
//! realizations, and application of delay, frequency offset, and noise to a
//! transmit frame.

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::waveform::{ComplexVec, TxFrame};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Integer-delay tap powers of a multipath channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpProfile {
    /// Tap delays in sample periods, strictly increasing, first tap at 0.
    pub delays: Vec<usize>,
    /// Linear per-tap powers, all positive, summing to 1.
    pub powers: Vec<f64>,
}

impl PdpProfile {
    pub fn num_taps(&self) -> usize {
        self.delays.len()
    }

    pub fn max_delay(&self) -> usize {
        *self.delays.last().expect("profile has at least one tap")
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() || self.delays.len() != self.powers.len() {
            return Err(Error::config("profile needs matching, nonempty taps"));
        }
        if self.delays[0] != 0 {
            return Err(Error::config("first tap delay must be 0"));
        }
        if self.delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("tap delays must be strictly increasing"));
        }
        if self.powers.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::config("tap powers must be positive"));
        }
        let sum: f64 = self.powers.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("tap powers sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// One channel draw for a single trial.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Complex gain per profile tap.
    pub taps: Vec<Complex64>,
    /// Timing offset of the first arriving path, in `[0, n-1]`.
    pub to: usize,
    /// Carrier frequency offset as a fraction of the subcarrier spacing.
    pub cfo: f64,
    /// Per-trial SNR; `f64::INFINITY` means noiseless.
    pub snr_db: f64,
}

/// Exponentially decaying profile over delays `0..num_taps`:
/// `powers[p] ~ exp(-eta * p)`, normalized to unit sum.
pub fn exp_pdp(num_taps: usize, eta: f64) -> Result<PdpProfile> {
    if num_taps == 0 {
        return Err(Error::config("profile needs at least one tap"));
    }
    if !(eta > 0.0) {
        return Err(Error::config(format!("decay exponent {eta} must be positive")));
    }
    let raw: Vec<f64> = (0..num_taps).map(|p| (-eta * p as f64).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(PdpProfile {
        delays: (0..num_taps).collect(),
        powers: raw.into_iter().map(|p| p / sum).collect(),
    })
}

/// Standardized tapped-delay-line profile identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TdlProfile {
    A,
    B,
    C,
}

impl TdlProfile {
    pub fn table(&self) -> &'static str {
        match self {
            TdlProfile::A => include_str!("../data/tdl_a.txt"),
            TdlProfile::B => include_str!("../data/tdl_b.txt"),
            TdlProfile::C => include_str!("../data/tdl_c.txt"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TdlProfile::A => "tdl_a",
            TdlProfile::B => "tdl_b",
            TdlProfile::C => "tdl_c",
        }
    }
}

impl std::str::FromStr for TdlProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "tdl_a" | "tdl-a" => Ok(TdlProfile::A),
            "b" | "tdl_b" | "tdl-b" => Ok(TdlProfile::B),
            "c" | "tdl_c" | "tdl-c" => Ok(TdlProfile::C),
            other => Err(Error::config(format!("unknown TDL profile `{other}`"))),
        }
    }
}

/// Parses a `normalized_delay power_db` table; `#` starts a comment.
pub fn parse_tdl_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(d), Some(p)) = (it.next(), it.next()) else {
            return Err(Error::format(format!("tdl table line {}: needs two columns", lineno + 1)));
        };
        let delay: f64 = d
            .parse()
            .map_err(|_| Error::format(format!("tdl table line {}: bad delay", lineno + 1)))?;
        let power_db: f64 = p
            .parse()
            .map_err(|_| Error::format(format!("tdl table line {}: bad power", lineno + 1)))?;
        rows.push((delay, power_db));
    }
    if rows.is_empty() {
        return Err(Error::format("tdl table has no rows"));
    }
    Ok(rows)
}

/// Quantizes a standardized profile onto the sample grid.
///
/// Normalized delays are scaled so the largest lands exactly on `tau_p`
/// samples, rounded to the nearest integer sample; taps sharing a sample are
/// merged by summing linear powers; powers are renormalized and the first
/// delay is shifted to 0.
pub fn tdl_pdp(profile: TdlProfile, tau_p: usize) -> Result<PdpProfile> {
    if tau_p == 0 {
        return Err(Error::config("target max delay must be positive"));
    }
    let rows = parse_tdl_table(profile.table())?;
    let max_norm = rows.iter().map(|r| r.0).fold(f64::MIN, f64::max);
    if !(max_norm > 0.0) {
        return Err(Error::format("tdl table has no positive delay"));
    }
    let scale = tau_p as f64 / max_norm;

    let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (norm_delay, power_db) in rows {
        let sample = (norm_delay * scale).round() as usize;
        *merged.entry(sample).or_insert(0.0) += 10f64.powf(power_db / 10.0);
    }

    let first = *merged.keys().next().expect("nonempty");
    let total: f64 = merged.values().sum();
    let (delays, powers): (Vec<usize>, Vec<f64>) =
        merged.into_iter().map(|(d, p)| (d - first, p / total)).unzip();
    let pdp = PdpProfile { delays, powers };
    pdp.validate()?;
    Ok(pdp)
}

/// Draws one complex gain per tap: `h_p = sqrt(powers[p]) * g_p` with `g_p`
/// circularly symmetric complex Gaussian of unit variance.
pub fn realize_channel<R: Rng>(pdp: &PdpProfile, rng: &mut R) -> Vec<Complex64> {
    pdp.powers
        .iter()
        .map(|&p| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (p / 2.0).sqrt()
        })
        .collect()
}

/// Gains with the profile taken as the per-trial magnitude law:
/// `h_p = sqrt(powers[p]) * e^{j theta_p}` with uniform phases. Under this
/// law the first arriving path never fades below its profile power.
pub fn realize_channel_phase_only<R: Rng>(pdp: &PdpProfile, rng: &mut R) -> Vec<Complex64> {
    pdp.powers
        .iter()
        .map(|&p| Complex64::from_polar(p.sqrt(), rng.random::<f64>() * std::f64::consts::TAU))
        .collect()
}

/// Applies the multipath channel without noise; see [`apply_channel`].
pub fn apply_channel_clean(
    frame: &TxFrame,
    pdp: &PdpProfile,
    real: &ChannelRealization,
    cfg: &OfdmConfig,
) -> Result<ComplexVec> {
    if real.to >= cfg.n {
        return Err(Error::usage(format!(
            "timing offset {} outside [0, {})",
            real.to, cfg.n
        )));
    }
    if real.taps.len() != pdp.num_taps() {
        return Err(Error::Dimension {
            expected: pdp.num_taps(),
            got: real.taps.len(),
        });
    }
    let m = cfg.m();
    let len = frame.samples.len() as isize;
    let origin = frame.train_start as isize - real.to as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (n, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (h, &d) in real.taps.iter().zip(&pdp.delays) {
            let idx = origin + n as isize - d as isize;
            if (0..len).contains(&idx) {
                acc += h * frame.samples[idx as usize];
            }
        }
        if real.cfo != 0.0 {
            let phase = 2.0 * PI * real.cfo * (n as f64 - real.to as f64) / cfg.n as f64;
            acc *= Complex64::from_polar(1.0, phase);
        }
        *slot = acc;
    }
    Ok(out)
}

/// Produces the `m`-sample observation window seen by the receiver.
///
/// The window is positioned so the first-path arrival of the training
/// symbol's prefix lands at index `real.to`. White complex Gaussian noise of
/// power `sigma_d2 * 10^(-snr_db/10)` is added unless `snr_db` is infinite.
pub fn apply_channel<R: Rng>(
    frame: &TxFrame,
    pdp: &PdpProfile,
    real: &ChannelRealization,
    cfg: &OfdmConfig,
    rng: &mut R,
) -> Result<ComplexVec> {
    let mut out = apply_channel_clean(frame, pdp, real, cfg)?;
    if real.snr_db.is_finite() {
        let sigma_n2 = cfg.sigma_d2 * 10f64.powf(-real.snr_db / 10.0);
        let std = (sigma_n2 / 2.0).sqrt();
        for v in &mut out {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * std, im * std);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, stream};
    use crate::waveform::build_frame;

    #[test]
    fn exp_pdp_single_tap() {
        let pdp = exp_pdp(1, 0.3).unwrap();
        assert_eq!(pdp.delays, vec![0]);
        assert_eq!(pdp.powers, vec![1.0]);
    }

    #[test]
    fn exp_pdp_three_taps_eta_one() {
        let pdp = exp_pdp(3, 1.0).unwrap();
        // exp(0), exp(-1), exp(-2) normalized.
        let expected = [0.6652409557748219, 0.24472847105479764, 0.09003057317038046];
        for (got, want) in pdp.powers.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_pdp_test_channel_shape() {
        let pdp = exp_pdp(23, 1.0 / 23.0).unwrap();
        assert_eq!(pdp.num_taps(), 23);
        assert_eq!(pdp.max_delay(), 22);
        assert!((pdp.powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        pdp.validate().unwrap();
    }

    #[test]
    fn exp_pdp_rejects_bad_eta() {
        assert!(exp_pdp(4, 0.0).is_err());
        assert!(exp_pdp(4, -1.0).is_err());
        assert!(exp_pdp(0, 1.0).is_err());
    }

    #[test]
    fn tdl_profiles_quantize_to_target() {
        for (profile, tau_p) in [(TdlProfile::A, 22), (TdlProfile::B, 22), (TdlProfile::C, 23)] {
            let pdp = tdl_pdp(profile, tau_p).unwrap();
            assert_eq!(pdp.max_delay(), tau_p, "{profile:?}");
            pdp.validate().unwrap();
        }
    }

    #[test]
    fn tdl_merging_only_reduces_taps() {
        for profile in [TdlProfile::A, TdlProfile::B, TdlProfile::C] {
            let rows = parse_tdl_table(profile.table()).unwrap();
            let pdp = tdl_pdp(profile, 22).unwrap();
            assert!(pdp.num_taps() <= rows.len());

            // Brute-force quantizer: count distinct rounded samples.
            let max_norm = rows.iter().map(|r| r.0).fold(f64::MIN, f64::max);
            let mut samples: Vec<usize> = rows
                .iter()
                .map(|r| (r.0 * 22.0 / max_norm).round() as usize)
                .collect();
            samples.sort_unstable();
            samples.dedup();
            assert_eq!(pdp.num_taps(), samples.len());
        }
    }

    #[test]
    fn tdl_rejects_unknown_id() {
        assert!("tdl_x".parse::<TdlProfile>().is_err());
        assert!("a".parse::<TdlProfile>().is_ok());
    }

    #[test]
    fn realization_matches_tap_powers() {
        let pdp = exp_pdp(8, 0.4).unwrap();
        let draws = 100_000;
        let mut acc = vec![0.0f64; 8];
        for i in 0..draws {
            let mut rng = derive_rng(21, stream::EVAL, i);
            for (a, h) in acc.iter_mut().zip(realize_channel(&pdp, &mut rng)) {
                *a += h.norm_sqr();
            }
        }
        for (a, &p) in acc.iter().zip(&pdp.powers) {
            let mean = a / draws as f64;
            assert!(
                (mean - p).abs() / p < 0.05,
                "tap power {mean} vs expected {p}"
            );
        }
    }

    #[test]
    fn realization_is_seed_deterministic() {
        let pdp = exp_pdp(5, 0.2).unwrap();
        let a = realize_channel(&pdp, &mut derive_rng(5, stream::EVAL, 7));
        let b = realize_channel(&pdp, &mut derive_rng(5, stream::EVAL, 7));
        assert_eq!(a, b);
    }

    #[test]
    fn phase_only_gains_keep_profile_magnitudes() {
        let pdp = exp_pdp(6, 0.3).unwrap();
        let gains = realize_channel_phase_only(&pdp, &mut derive_rng(6, stream::EVAL, 0));
        for (g, &p) in gains.iter().zip(&pdp.powers) {
            assert!((g.norm_sqr() - p).abs() < 1e-12);
        }
    }

    fn identity_realization(to: usize) -> (PdpProfile, ChannelRealization) {
        let pdp = exp_pdp(1, 1.0).unwrap();
        let real = ChannelRealization {
            taps: vec![Complex64::new(1.0, 0.0)],
            to,
            cfo: 0.0,
            snr_db: f64::INFINITY,
        };
        (pdp, real)
    }

    #[test]
    fn identity_channel_reproduces_stream_segment() {
        let cfg = OfdmConfig::default_128();
        let frame = build_frame(&cfg, &mut derive_rng(1, stream::FRAME, 0)).unwrap();
        let (pdp, real) = identity_realization(0);
        let win = apply_channel_clean(&frame, &pdp, &real, &cfg).unwrap();
        assert_eq!(win.len(), cfg.m());
        // to = 0: the window starts at the training prefix.
        for (w, s) in win.iter().zip(&frame.samples[cfg.n_u()..]) {
            assert!((w - s).norm() < 1e-12);
        }
    }

    #[test]
    fn cfo_preserves_magnitudes() {
        let cfg = OfdmConfig::default_128();
        let frame = build_frame(&cfg, &mut derive_rng(2, stream::FRAME, 0)).unwrap();
        let (pdp, mut real) = identity_realization(17);
        let plain = apply_channel_clean(&frame, &pdp, &real, &cfg).unwrap();
        real.cfo = 0.31;
        let rotated = apply_channel_clean(&frame, &pdp, &real, &cfg).unwrap();
        for (a, b) in plain.iter().zip(&rotated) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_tap_channel_matches_convolution_oracle() {
        let cfg = OfdmConfig::default_128();
        let frame = build_frame(&cfg, &mut derive_rng(3, stream::FRAME, 1)).unwrap();
        let pdp = PdpProfile {
            delays: vec![0, 4],
            powers: vec![0.5, 0.5],
        };
        let real = ChannelRealization {
            taps: vec![Complex64::new(0.4, -0.2), Complex64::new(-0.1, 0.7)],
            to: 33,
            cfo: 0.0,
            snr_db: f64::INFINITY,
        };
        let win = apply_channel_clean(&frame, &pdp, &real, &cfg).unwrap();

        // Oracle: full convolution of the padded stream with the impulse
        // response, then slice the window.
        let pad = cfg.n + cfg.cp_len; // larger than any shift in play
        let mut padded = vec![Complex64::new(0.0, 0.0); frame.samples.len() + 2 * pad];
        padded[pad..pad + frame.samples.len()].copy_from_slice(&frame.samples);
        let mut convolved = vec![Complex64::new(0.0, 0.0); padded.len()];
        for (h, &d) in real.taps.iter().zip(&pdp.delays) {
            for i in 0..padded.len() {
                if i >= d {
                    convolved[i] += h * padded[i - d];
                }
            }
        }
        let start = pad + frame.train_start - real.to;
        for (a, b) in win.iter().zip(&convolved[start..start + cfg.m()]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn channel_is_linear_in_the_stream() {
        let cfg = OfdmConfig::default_128();
        let f1 = build_frame(&cfg, &mut derive_rng(4, stream::FRAME, 0)).unwrap();
        let f2 = build_frame(&cfg, &mut derive_rng(4, stream::FRAME, 1)).unwrap();
        let pdp = exp_pdp(6, 0.5).unwrap();
        let real = ChannelRealization {
            taps: realize_channel(&pdp, &mut derive_rng(4, stream::EVAL, 0)),
            to: 90,
            cfo: 0.05,
            snr_db: f64::INFINITY,
        };
        let (alpha, beta) = (Complex64::new(1.5, -0.25), Complex64::new(-0.3, 0.8));
        let mixed = TxFrame {
            samples: f1
                .samples
                .iter()
                .zip(&f2.samples)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            train_start: f1.train_start,
        };
        let y1 = apply_channel_clean(&f1, &pdp, &real, &cfg).unwrap();
        let y2 = apply_channel_clean(&f2, &pdp, &real, &cfg).unwrap();
        let ym = apply_channel_clean(&mixed, &pdp, &real, &cfg).unwrap();
        for ((a, b), m) in y1.iter().zip(&y2).zip(&ym) {
            assert!((alpha * a + beta * b - m).norm() < 1e-9);
        }
    }

    #[test]
    fn to_out_of_range_is_rejected() {
        let cfg = OfdmConfig::default_128();
        let frame = build_frame(&cfg, &mut derive_rng(5, stream::FRAME, 0)).unwrap();
        let (pdp, mut real) = identity_realization(0);
        real.to = cfg.n;
        assert!(apply_channel_clean(&frame, &pdp, &real, &cfg).is_err());
    }

    #[test]
    fn measured_snr_tracks_requested_snr() {
        let cfg = OfdmConfig::default_128();
        let pdp = exp_pdp(23, 1.0 / 23.0).unwrap();
        let snr_db = 4.0;
        let mut signal_power = 0.0;
        let mut noise_power = 0.0;
        let windows = 10_000;
        for i in 0..windows {
            let mut rng = derive_rng(77, stream::EVAL, i);
            let frame = build_frame(&cfg, &mut rng).unwrap();
            let real = ChannelRealization {
                taps: realize_channel(&pdp, &mut rng),
                to: (i as usize * 37) % cfg.n,
                cfo: 0.0,
                snr_db,
            };
            let clean = apply_channel_clean(&frame, &pdp, &real, &cfg).unwrap();
            let noisy = apply_channel(&frame, &pdp, &real, &cfg, &mut rng).unwrap();
            signal_power += clean.iter().map(|v| v.norm_sqr()).sum::<f64>();
            noise_power += clean
                .iter()
                .zip(&noisy)
                .map(|(c, n)| (n - c).norm_sqr())
                .sum::<f64>();
        }
        let measured_db = 10.0 * (signal_power / noise_power).log10();
        assert!(
            (measured_db - snr_db).abs() < 0.2,
            "measured {measured_db} dB vs requested {snr_db} dB"
        );
    }
}
