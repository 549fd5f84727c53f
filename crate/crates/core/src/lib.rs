//! Timing synchronization lab for OFDM: training-sequence waveforms,
//! multipath channel simulation, a lightweight 1-D convolutional timing
//! classifier with classic correlation and sparse-recovery baselines, and a
//! Monte Carlo evaluation harness.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod network;
pub mod rng;
pub mod scenario;
pub mod trainer;
pub mod waveform;

pub use channel::{ChannelRealization, PdpProfile, TdlProfile};
pub use config::OfdmConfig;
pub use dataset::{Dataset, DatasetSpec, TrainingSample};
pub use error::{Error, Result};
pub use evaluator::{CmMethod, EvalReport, Method};
pub use network::{GraphKind, Network};
pub use scenario::{ChannelModel, Scenario, TauPolicy};
pub use trainer::{TrainConfig, TrainOutcome};
pub use waveform::{ComplexVec, TxFrame};
