//! Test and training channel scenarios, including the named presets used
//! by the sweep command.

use crate::channel::{
    exp_pdp, realize_channel, realize_channel_phase_only, tdl_pdp, PdpProfile, TdlProfile,
};
use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bounds of the random decay exponent used for training channels.
pub const ETA_RANGE: (f64, f64) = (0.01, 0.5);

/// Per-trial gain statistics for the fading channel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GainLaw {
    /// Rayleigh per tap: `sqrt(power) * CN(0, 1)`.
    #[default]
    Rayleigh,
    /// Deterministic magnitudes with uniform phases: `sqrt(power) * e^{j t}`.
    PhaseOnly,
}

/// How the channel taps of one trial are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    /// One unit-gain tap at delay 0.
    SinglePath,
    /// Two fixed-magnitude taps at delays {0, 3} with powers {0.4, 0.6} and
    /// random phases: the first arriving path is not the strongest.
    TwoPathFirstWeak,
    /// Exponentially decaying profile with fixed tap count and exponent,
    /// Rayleigh fading per tap.
    ExpFixed { taps: usize, eta: f64 },
    /// The training family: delays `0..=tau_relax`, exponent drawn
    /// uniformly from [`ETA_RANGE`] per trial, Rayleigh fading per tap.
    ExpRandom,
    /// Standardized tapped-delay-line profile quantized so its maximum
    /// delay lands at `tau_p` samples.
    Tdl { profile: TdlProfile, tau_p: usize },
}

impl ChannelModel {
    /// Short tag used in report rows and file names.
    pub fn tag(&self) -> String {
        match self {
            ChannelModel::SinglePath => "single_path".into(),
            ChannelModel::TwoPathFirstWeak => "two_path".into(),
            ChannelModel::ExpFixed { taps, eta } => format!("exp_p{taps}_eta{eta:.4}"),
            ChannelModel::ExpRandom => "exp_random".into(),
            ChannelModel::Tdl { profile, tau_p } => format!("{}_tau{tau_p}", profile.name()),
        }
    }

    /// Resolves fixed profiles once so per-trial draws stay cheap.
    pub fn sampler(&self, cfg: &OfdmConfig) -> Result<ChannelSampler> {
        self.sampler_with_law(cfg, GainLaw::Rayleigh)
    }

    /// [`ChannelModel::sampler`] with an explicit gain law for the fading
    /// families; the single-path and two-path constructions keep their
    /// inherent deterministic magnitudes.
    pub fn sampler_with_law(&self, cfg: &OfdmConfig, law: GainLaw) -> Result<ChannelSampler> {
        let fixed = match self {
            ChannelModel::SinglePath => Some(exp_pdp(1, 1.0)?),
            ChannelModel::TwoPathFirstWeak => Some(PdpProfile {
                delays: vec![0, 3],
                powers: vec![0.4, 0.6],
            }),
            ChannelModel::ExpFixed { taps, eta } => Some(exp_pdp(*taps, *eta)?),
            ChannelModel::ExpRandom => None,
            ChannelModel::Tdl { profile, tau_p } => Some(tdl_pdp(*profile, *tau_p)?),
        };
        if let Some(pdp) = &fixed {
            if pdp.max_delay() >= cfg.cp_len {
                return Err(Error::config(format!(
                    "channel max delay {} does not fit the {}-sample prefix",
                    pdp.max_delay(),
                    cfg.cp_len
                )));
            }
        }
        Ok(ChannelSampler {
            model: self.clone(),
            fixed,
            relax_taps: cfg.tau_relax + 1,
            law,
        })
    }
}

/// Per-trial generator of `(profile, tap gains)` for one [`ChannelModel`].
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    model: ChannelModel,
    fixed: Option<PdpProfile>,
    relax_taps: usize,
    law: GainLaw,
}

impl ChannelSampler {
    fn fade<R: Rng>(&self, pdp: &PdpProfile, rng: &mut R) -> Vec<Complex64> {
        match self.law {
            GainLaw::Rayleigh => realize_channel(pdp, rng),
            GainLaw::PhaseOnly => realize_channel_phase_only(pdp, rng),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> (PdpProfile, Vec<Complex64>) {
        match &self.model {
            ChannelModel::SinglePath => {
                let pdp = self.fixed.clone().expect("fixed profile");
                (pdp, vec![Complex64::new(1.0, 0.0)])
            }
            ChannelModel::TwoPathFirstWeak => {
                let pdp = self.fixed.clone().expect("fixed profile");
                let gains = realize_channel_phase_only(&pdp, rng);
                (pdp, gains)
            }
            ChannelModel::ExpFixed { .. } | ChannelModel::Tdl { .. } => {
                let pdp = self.fixed.clone().expect("fixed profile");
                let gains = self.fade(&pdp, rng);
                (pdp, gains)
            }
            ChannelModel::ExpRandom => {
                let eta = ETA_RANGE.0 + rng.random::<f64>() * (ETA_RANGE.1 - ETA_RANGE.0);
                let pdp = exp_pdp(self.relax_taps, eta).expect("positive eta");
                let gains = self.fade(&pdp, rng);
                (pdp, gains)
            }
        }
    }
}

/// How the per-trial timing offset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauPolicy {
    /// Uniform over `[0, n-1]`.
    UniformRandom,
    /// `trial mod n`; guarantees every offset is visited.
    Cycle,
}

impl TauPolicy {
    pub fn draw<R: Rng>(&self, trial: u64, n: usize, rng: &mut R) -> usize {
        match self {
            TauPolicy::UniformRandom => rng.random_range(0..n),
            TauPolicy::Cycle => (trial % n as u64) as usize,
        }
    }
}

/// One evaluation scenario: a channel family plus offset and CFO policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub channel: ChannelModel,
    /// Per-trial CFO drawn uniformly from `[-cfo_max, cfo_max]`; 0 disables.
    pub cfo_max: f64,
    pub tau_policy: TauPolicy,
    /// When set, the symbols around the training symbol are silent instead
    /// of QPSK data: the zero-padded construction the oracle checks assume.
    pub silent_data: bool,
    /// Gain statistics for the fading channel families.
    #[serde(default)]
    pub gain_law: GainLaw,
}

impl Scenario {
    pub fn new(name: impl Into<String>, channel: ChannelModel) -> Self {
        Scenario {
            name: name.into(),
            channel,
            cfo_max: 0.0,
            tau_policy: TauPolicy::UniformRandom,
            silent_data: false,
            gain_law: GainLaw::default(),
        }
    }

    /// The per-trial channel generator for this scenario.
    pub fn sampler(&self, cfg: &OfdmConfig) -> Result<ChannelSampler> {
        self.channel.sampler_with_law(cfg, self.gain_law)
    }

    /// Exponential-profile test channel: 23 taps, eta = 1/23.
    pub fn fig2a() -> Self {
        Scenario::new("fig2a", ChannelModel::ExpFixed { taps: 23, eta: 1.0 / 23.0 })
    }

    /// Exponential test channel for an arbitrary maximum delay:
    /// `taps = tau_p + 1`, `eta = 1/taps`.
    pub fn exp_test(tau_p: usize) -> Self {
        let taps = tau_p + 1;
        Scenario::new(
            format!("exp_tau{tau_p}"),
            ChannelModel::ExpFixed { taps, eta: 1.0 / taps as f64 },
        )
    }

    /// Oracle scenario: identity channel, every offset visited, training
    /// symbol alone in the window.
    pub fn single_path() -> Self {
        let mut s = Scenario::new("single_path", ChannelModel::SinglePath);
        s.tau_policy = TauPolicy::Cycle;
        s.silent_data = true;
        s
    }

    /// Oracle scenario for the first-path-not-strongest case.
    pub fn two_path() -> Self {
        let mut s = Scenario::new("two_path", ChannelModel::TwoPathFirstWeak);
        s.tau_policy = TauPolicy::Cycle;
        s.silent_data = true;
        s
    }

    /// Standardized-profile generalization scenarios with the quantization
    /// targets 22/22/23 for profiles A/B/C.
    pub fn tdl(profile: TdlProfile) -> Self {
        let tau_p = match profile {
            TdlProfile::A | TdlProfile::B => 22,
            TdlProfile::C => 23,
        };
        Scenario::new(profile.name(), ChannelModel::Tdl { profile, tau_p })
    }

    /// Looks a preset up by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig2a" => Ok(Self::fig2a()),
            "single_path" => Ok(Self::single_path()),
            "two_path" => Ok(Self::two_path()),
            "tdl_a" => Ok(Self::tdl(TdlProfile::A)),
            "tdl_b" => Ok(Self::tdl(TdlProfile::B)),
            "tdl_c" => Ok(Self::tdl(TdlProfile::C)),
            other => Err(Error::usage(format!(
                "unknown scenario `{other}` (expected fig2a, single_path, two_path, tdl_a, tdl_b, or tdl_c)"
            ))),
        }
    }
}

/// One point of a dimension sweep: a re-derived config plus its matching
/// test scenario.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub cfg: OfdmConfig,
    pub scenario: Scenario,
}

fn proportional_tau_p(cp_len: usize) -> usize {
    // Scale the nominal delay bound with the prefix, anchored at 22/32.
    (cp_len * 22 + 16) / 32
}

/// Subcarrier-count sweep; the prefix and delay bound re-derive
/// proportionally.
pub fn sweep_subcarriers(values: &[usize]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&n| {
            let cfg = OfdmConfig::new(n, proportional_tau_p(n / 4))?;
            Ok(SweepPoint {
                label: format!("n{n}"),
                scenario: Scenario::exp_test(cfg.tau_p),
                cfg,
            })
        })
        .collect()
}

/// Prefix-length sweep at fixed subcarrier count.
pub fn sweep_prefix(n: usize, values: &[usize]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&cp| {
            let cfg = OfdmConfig::with_cp_len(n, cp, proportional_tau_p(cp))?;
            Ok(SweepPoint {
                label: format!("cp{cp}"),
                scenario: Scenario::exp_test(cfg.tau_p),
                cfg,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, stream};

    #[test]
    fn presets_resolve() {
        for name in ["fig2a", "single_path", "two_path", "tdl_a", "tdl_b", "tdl_c"] {
            assert_eq!(Scenario::preset(name).unwrap().name, name);
        }
        assert!(Scenario::preset("fig2z").is_err());
    }

    #[test]
    fn fig2a_channel_dimensions() {
        let cfg = OfdmConfig::default_128();
        let sampler = Scenario::fig2a().channel.sampler(&cfg).unwrap();
        let (pdp, gains) = sampler.draw(&mut derive_rng(0, stream::EVAL, 0));
        assert_eq!(pdp.num_taps(), 23);
        assert_eq!(pdp.max_delay(), 22);
        assert_eq!(gains.len(), 23);
    }

    #[test]
    fn training_family_spans_relaxed_delays() {
        let cfg = OfdmConfig::default_128();
        let sampler = ChannelModel::ExpRandom.sampler(&cfg).unwrap();
        let (pdp, _) = sampler.draw(&mut derive_rng(1, stream::EVAL, 0));
        assert_eq!(pdp.num_taps(), 28);
        assert_eq!(pdp.max_delay(), cfg.tau_relax);
    }

    #[test]
    fn two_path_draw_has_fixed_magnitudes() {
        let cfg = OfdmConfig::default_128();
        let sampler = Scenario::two_path().channel.sampler(&cfg).unwrap();
        let (pdp, gains) = sampler.draw(&mut derive_rng(2, stream::EVAL, 5));
        assert_eq!(pdp.delays, vec![0, 3]);
        assert!((gains[0].norm() - 0.4f64.sqrt()).abs() < 1e-12);
        assert!((gains[1].norm() - 0.6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sweeps_produce_valid_configs() {
        for point in sweep_subcarriers(&[64, 128, 256]).unwrap() {
            point.cfg.validate().unwrap();
            point.scenario.channel.sampler(&point.cfg).unwrap();
        }
        for point in sweep_prefix(128, &[24, 32, 48]).unwrap() {
            point.cfg.validate().unwrap();
            point.scenario.channel.sampler(&point.cfg).unwrap();
        }
    }

    #[test]
    fn cycle_policy_visits_every_offset() {
        let mut rng = derive_rng(3, stream::EVAL, 0);
        let seen: std::collections::HashSet<usize> =
            (0..256u64).map(|t| TauPolicy::Cycle.draw(t, 128, &mut rng)).collect();
        assert_eq!(seen.len(), 128);
    }
}
