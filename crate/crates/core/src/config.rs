//! Frame-level constants for the OFDM system under test.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// All frame constants in one validated record.
///
/// `n` subcarriers, a cyclic prefix of `cp_len` samples, and an observation
/// window of `m() = n_u() + n` samples centered on the training symbol. The
/// propagation-delay bound used when generating training channels is
/// `tau_relax = tau_p + delta_tau`, where `delta_tau = ceil((cp_len - tau_p)/2)`
/// in the default relaxed mode and `0` when relaxation is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Subcarrier count (power of two, >= 16).
    pub n: usize,
    /// Cyclic prefix length in samples, `n / 4` unless overridden.
    pub cp_len: usize,
    /// Root index of the constant-modulus training sequence; coprime with `n`.
    pub zc_root: usize,
    /// Nominal maximum propagation delay in sample periods.
    pub tau_p: usize,
    /// Delay fluctuation added on top of `tau_p` for training channels.
    pub delta_tau: usize,
    /// Relaxed maximum delay: `tau_p + delta_tau`, strictly below `cp_len`.
    pub tau_relax: usize,
    /// Transmit signal power (linear).
    pub sigma_d2: f64,
}

impl OfdmConfig {
    /// Builds a config with the default derivations: `cp_len = n/4`, root 25,
    /// unit transmit power, relaxation enabled.
    pub fn new(n: usize, tau_p: usize) -> Result<Self> {
        Self::with_cp_len(n, n / 4, tau_p)
    }

    /// Builds a config with an explicit cyclic prefix length.
    pub fn with_cp_len(n: usize, cp_len: usize, tau_p: usize) -> Result<Self> {
        if cp_len < tau_p {
            return Err(Error::config(format!(
                "cp_len {cp_len} must be >= tau_p {tau_p}"
            )));
        }
        let delta_tau = (cp_len - tau_p).div_ceil(2);
        let cfg = OfdmConfig {
            n,
            cp_len,
            zc_root: 25,
            tau_p,
            delta_tau,
            tau_relax: tau_p + delta_tau,
            sigma_d2: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The headline dimensions: 128 subcarriers, 32-sample prefix,
    /// nominal delay bound 22 (so `tau_relax = 27`).
    pub fn default_128() -> Self {
        Self::new(128, 22).expect("default config is valid")
    }

    /// Disables the relaxed delay restriction: `tau_relax = tau_p`.
    ///
    /// Label offsets and the correctness window re-derive from the new
    /// `tau_relax`.
    pub fn without_relaxation(mut self) -> Result<Self> {
        self.delta_tau = 0;
        self.tau_relax = self.tau_p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_zc_root(mut self, root: usize) -> Result<Self> {
        self.zc_root = root;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma_d2(mut self, sigma_d2: f64) -> Result<Self> {
        self.sigma_d2 = sigma_d2;
        self.validate()?;
        Ok(self)
    }

    /// Useful-symbol-plus-prefix length `N_u = n + cp_len`.
    pub fn n_u(&self) -> usize {
        self.n + self.cp_len
    }

    /// Observation window length `M = n_u + n`.
    pub fn m(&self) -> usize {
        self.n_u() + self.n
    }

    /// Shift applied when mapping a timing offset to a class label:
    /// `ceil((cp_len + tau_relax) / 2)`.
    pub fn label_offset(&self) -> usize {
        (self.cp_len + self.tau_relax).div_ceil(2)
    }

    /// Width bound of the correctness window: an estimate is correct when
    /// `0 <= true_to - est <= isi_margin()`.
    pub fn isi_margin(&self) -> usize {
        self.cp_len - self.tau_relax
    }

    /// Checks every invariant; called by consumers that accept an
    /// externally supplied config.
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(Error::config(format!(
                "subcarrier count {} must be a power of two >= 16",
                self.n
            )));
        }
        if self.cp_len == 0 || self.cp_len >= self.n {
            return Err(Error::config(format!(
                "cp_len {} must be in [1, {})",
                self.cp_len, self.n
            )));
        }
        if gcd(self.zc_root, self.n) != 1 {
            return Err(Error::config(format!(
                "zc_root {} is not coprime with n {}",
                self.zc_root, self.n
            )));
        }
        let relaxed_delta = (self.cp_len.saturating_sub(self.tau_p)).div_ceil(2);
        if self.delta_tau != 0 && self.delta_tau != relaxed_delta {
            return Err(Error::config(format!(
                "delta_tau {} is neither 0 nor ceil((cp_len - tau_p)/2) = {}",
                self.delta_tau, relaxed_delta
            )));
        }
        if self.tau_relax != self.tau_p + self.delta_tau {
            return Err(Error::config(format!(
                "tau_relax {} != tau_p {} + delta_tau {}",
                self.tau_relax, self.tau_p, self.delta_tau
            )));
        }
        if self.tau_relax >= self.cp_len {
            return Err(Error::config(format!(
                "tau_relax {} must stay below cp_len {}",
                self.tau_relax, self.cp_len
            )));
        }
        if !(self.sigma_d2 > 0.0) || !self.sigma_d2.is_finite() {
            return Err(Error::config(format!(
                "sigma_d2 {} must be positive and finite",
                self.sigma_d2
            )));
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
