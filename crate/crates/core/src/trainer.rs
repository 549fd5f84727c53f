//! Mini-batch gradient training with adaptive moments and window-error
//! model selection.

use crate::config::OfdmConfig;
use crate::dataset::{Dataset, TrainingSample};
use crate::error::{Error, Result};
use crate::evaluator::{estimate_to, timing_error};
use crate::network::Network;
use crate::rng::{derive_rng, stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Optimizer and schedule settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Step size.
    pub alpha: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator stabilizer.
    pub eps_hat: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping early.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            batch_size: 128,
            max_epochs: 100,
            patience: 15,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::config("step size must be positive"));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::config("moment decays must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch size and epochs must be positive"));
        }
        Ok(())
    }
}

/// First/second moment estimates, shape-congruent with the parameters.
pub struct AdamState {
    m: Network,
    v: Network,
    t: u64,
}

impl AdamState {
    pub fn new(params: &Network) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected moment update:
/// `theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps_hat)`.
pub fn adam_step(
    params: &mut Network,
    grads: &Network,
    state: &mut AdamState,
    tcfg: &TrainConfig,
) -> Result<()> {
    state.t += 1;
    let bc1 = 1.0 - tcfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - tcfg.beta2.powi(state.t as i32);
    let grad_tensors: Vec<&Vec<f64>> = grads.tensors().into_iter().map(|(_, _, d)| d).collect();
    let mut m_tensors = state.m.tensors_mut();
    let mut v_tensors = state.v.tensors_mut();
    let mut p_tensors = params.tensors_mut();
    if grad_tensors.len() != p_tensors.len() {
        return Err(Error::Dimension { expected: p_tensors.len(), got: grad_tensors.len() });
    }
    for ti in 0..p_tensors.len() {
        let g = grad_tensors[ti];
        let m = &mut *m_tensors[ti];
        let v = &mut *v_tensors[ti];
        let p = &mut *p_tensors[ti];
        if g.len() != p.len() {
            return Err(Error::Dimension { expected: p.len(), got: g.len() });
        }
        for i in 0..p.len() {
            m[i] = tcfg.beta1 * m[i] + (1.0 - tcfg.beta1) * g[i];
            v[i] = tcfg.beta2 * v[i] + (1.0 - tcfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= tcfg.alpha * m_hat / (v_hat.sqrt() + tcfg.eps_hat);
        }
    }
    Ok(())
}

/// Window-error rate of an arbitrary predictor over a sample set.
pub fn error_rate_over<F>(samples: &[TrainingSample], cfg: &OfdmConfig, predict: F) -> f64
where
    F: Fn(&TrainingSample) -> isize + Sync,
{
    let errors: u32 = samples
        .par_iter()
        .map(|s| {
            let hat = predict(s);
            timing_error(hat, s.true_to as isize, cfg)
        })
        .sum();
    errors as f64 / samples.len() as f64
}

/// Fraction of validation windows whose decoded estimate misses the
/// ISI-free region.
pub fn epoch_error_rate(net: &Network, valset: &Dataset) -> Result<f64> {
    if valset.samples.is_empty() {
        return Err(Error::usage("validation set is empty"));
    }
    let cfg = valset.cfg;
    Ok(error_rate_over(&valset.samples, &cfg, |s| {
        let y: Vec<f64> = s.y.iter().map(|&v| v as f64).collect();
        let probs = net.forward(&y).expect("dimension-checked dataset");
        estimate_to(&probs, &cfg)
    }))
}

/// One epoch row of the training log.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_r_err: f64,
    pub elapsed_sec: f64,
}

/// Result of a training run: the parameters with the lowest validation
/// error across epochs, plus the full log.
pub struct TrainOutcome {
    pub network: Network,
    pub best_epoch: usize,
    pub best_r_err: f64,
    pub log: Vec<EpochLog>,
}

/// Writes the log as `epoch,mean_loss,val_R_err,elapsed_sec`.
pub fn write_log_csv(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "epoch,mean_loss,val_R_err,elapsed_sec")?;
    for row in log {
        writeln!(
            file,
            "{},{},{},{}",
            row.epoch, row.mean_loss, row.val_r_err, row.elapsed_sec
        )?;
    }
    Ok(())
}

fn check_dims(net: &Network, ds: &Dataset) -> Result<()> {
    let want_in = 2 * ds.cfg.m();
    if net.input_dim() != want_in {
        return Err(Error::Dimension { expected: want_in, got: net.input_dim() });
    }
    if net.output_dim() != ds.cfg.n_u() {
        return Err(Error::Dimension { expected: ds.cfg.n_u(), got: net.output_dim() });
    }
    Ok(())
}

/// Shuffled mini-batch epochs with per-epoch validation; keeps the
/// parameters that minimize the validation window-error rate.
///
/// Per-sample gradients within a batch fan out across workers; the batch
/// mean is a serial reduction in index order, so runs are bit-identical
/// for a fixed seed at any worker count. A non-finite batch loss aborts.
pub fn train(
    initial: Network,
    train_set: &Dataset,
    val_set: &Dataset,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(initial, train_set, val_set, tcfg, |_| {})
}

/// [`train`] with a per-epoch observer, for progress reporting.
pub fn train_with_progress(
    initial: Network,
    train_set: &Dataset,
    val_set: &Dataset,
    tcfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    check_dims(&initial, train_set)?;
    check_dims(&initial, val_set)?;
    if train_set.samples.is_empty() {
        return Err(Error::usage("training set is empty"));
    }
    let started = Instant::now();
    let mut net = initial;
    let mut state = AdamState::new(&net);
    let mut best: Option<(Network, usize, f64)> = None;
    let mut log = Vec::with_capacity(tcfg.max_epochs);
    let mut stale_epochs = 0usize;

    let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
    for epoch in 1..=tcfg.max_epochs {
        let mut rng = derive_rng(tcfg.seed, stream::SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let per_sample: Vec<(Network, f64)> = batch
                .par_iter()
                .map(|&idx| {
                    let s = &train_set.samples[idx];
                    let y: Vec<f64> = s.y.iter().map(|&v| v as f64).collect();
                    let (_, cache) = net.forward_cached(&y).expect("dimension-checked");
                    net.backward(&cache, s.label as usize).expect("same graph")
                })
                .collect();

            let mut grads = net.zeros_like();
            let mut batch_loss = 0.0;
            for (g, loss) in &per_sample {
                batch_loss += loss;
                let mut acc = grads.tensors_mut();
                for (ti, (_, _, src)) in g.tensors().into_iter().enumerate() {
                    let dst = &mut *acc[ti];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for t in grads.tensors_mut() {
                for v in t.iter_mut() {
                    *v *= scale;
                }
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "batch loss {batch_loss} at epoch {epoch}"
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;
            adam_step(&mut net, &grads, &mut state, tcfg)?;
        }

        let mean_loss = loss_sum / train_set.samples.len() as f64;
        let val_r_err = epoch_error_rate(&net, val_set)?;
        let entry = EpochLog {
            epoch,
            mean_loss,
            val_r_err,
            elapsed_sec: started.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        log.push(entry);

        let improved = best.as_ref().map_or(true, |(_, _, b)| val_r_err < *b);
        if improved {
            best = Some((net.clone(), epoch, val_r_err));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= tcfg.patience {
                break;
            }
        }
    }

    let (network, best_epoch, best_r_err) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { network, best_epoch, best_r_err, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, generate_dataset_stream, DatasetSpec};
    use crate::scenario::ChannelModel;

    fn small_cfg() -> OfdmConfig {
        OfdmConfig::new(16, 2).unwrap()
    }

    fn small_sets(cfg: &OfdmConfig, n: usize, seed: u64) -> (Dataset, Dataset) {
        let spec = DatasetSpec::new(n, (0.0, 10.0), seed);
        let train = generate_dataset(cfg, &ChannelModel::ExpRandom, &spec).unwrap();
        let val = generate_dataset_stream(
            cfg,
            &ChannelModel::ExpRandom,
            &DatasetSpec::new((n / 4).max(1), (0.0, 10.0), seed),
            crate::rng::stream::VALIDATION,
        )
        .unwrap();
        (train, val)
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let cfg = small_cfg();
        let mut net = Network::new_cnn(&cfg, 1).unwrap();
        let before = net.clone();
        let grads = net.zeros_like();
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_is_normalized_gradient() {
        let cfg = small_cfg();
        let mut net = Network::new_cnn(&cfg, 2).unwrap();
        let before = net.clone();
        let mut grads = net.zeros_like();
        for t in grads.tensors_mut() {
            for (i, v) in t.iter_mut().enumerate() {
                *v = 0.25 * ((i % 7) as f64 - 3.0);
            }
        }
        let tcfg = TrainConfig::default();
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state, &tcfg).unwrap();
        let g_tensors: Vec<&Vec<f64>> = grads.tensors().into_iter().map(|(_, _, d)| d).collect();
        for ((after, before), g) in net
            .tensors()
            .into_iter()
            .zip(before.tensors())
            .zip(g_tensors)
        {
            for i in 0..after.2.len() {
                let expect = before.2[i] - tcfg.alpha * g[i] / (g[i].abs() + tcfg.eps_hat);
                assert!((after.2[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adam_constant_gradient_steps_at_alpha() {
        // With a constant gradient the bias corrections cancel and every
        // update has magnitude alpha * |g| / (|g| + eps).
        let cfg = small_cfg();
        let mut net = Network::new_cnn(&cfg, 3).unwrap();
        let mut grads = net.zeros_like();
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.5);
        }
        let tcfg = TrainConfig::default();
        let mut state = AdamState::new(&net);
        for _ in 0..10 {
            let before = net.clone();
            adam_step(&mut net, &grads, &mut state, &tcfg).unwrap();
            for (after, before) in net.tensors().into_iter().zip(before.tensors()) {
                for i in 0..after.2.len() {
                    let step = (before.2[i] - after.2[i]).abs();
                    assert!((step - tcfg.alpha).abs() < 1e-6, "step {step}");
                }
            }
        }
    }

    #[test]
    fn error_rate_oracles() {
        let cfg = OfdmConfig::default_128();
        let spec = DatasetSpec::new(2000, (0.0, 10.0), 4);
        let ds = generate_dataset(&cfg, &ChannelModel::ExpRandom, &spec).unwrap();

        // Perfect predictor.
        let perfect = error_rate_over(&ds.samples, &cfg, |s| s.true_to as isize);
        assert_eq!(perfect, 0.0);

        // Constant positive offset always misses the window.
        let off = error_rate_over(&ds.samples, &cfg, |s| s.true_to as isize + 10);
        assert_eq!(off, 1.0);

        // A uniform-random class guess is right with probability 6/160.
        let spec = DatasetSpec::new(10_000, (0.0, 10.0), 5);
        let ds = generate_dataset(&cfg, &ChannelModel::ExpRandom, &spec).unwrap();
        let r_err = {
            let hits = std::sync::atomic::AtomicU64::new(0);
            let rate = error_rate_over(&ds.samples, &cfg, |s| {
                let mut rng = derive_rng(9, 0x77, s.true_to as u64 ^ (s.snr_db.to_bits() as u64));
                use rand::Rng as _;
                hits.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                rng.random_range(0..cfg.n_u()) as isize - cfg.label_offset() as isize
            });
            assert_eq!(hits.load(std::sync::atomic::Ordering::Relaxed), 10_000);
            rate
        };
        let expect = 1.0 - 6.0 / 160.0;
        assert!((r_err - expect).abs() < 0.01, "r_err {r_err} vs {expect}");
    }

    #[test]
    fn empty_validation_set_is_a_usage_error() {
        let cfg = small_cfg();
        let (train, mut val) = small_sets(&cfg, 4, 0);
        val.samples.clear();
        let net = Network::new_cnn(&cfg, 0).unwrap();
        assert!(matches!(epoch_error_rate(&net, &val), Err(Error::Usage(_))));
        assert!(train.samples.len() == 4);
    }

    #[test]
    fn single_sample_memorization() {
        let cfg = small_cfg();
        let spec = DatasetSpec::new(1, (10.0, 10.0), 11);
        let ds = generate_dataset(&cfg, &ChannelModel::ExpRandom, &spec).unwrap();
        let tcfg = TrainConfig {
            alpha: 0.01,
            batch_size: 1,
            max_epochs: 400,
            patience: 400,
            seed: 1,
            ..TrainConfig::default()
        };
        let net = Network::new_cnn(&cfg, 1).unwrap();
        let out = train(net, &ds, &ds, &tcfg).unwrap();
        let min_loss = out.log.iter().map(|e| e.mean_loss).fold(f64::MAX, f64::min);
        assert!(min_loss < 1e-3, "memorization stalled at loss {min_loss}");
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_cfg();
        let (train_set, val_set) = small_sets(&cfg, 32, 7);
        let tcfg = TrainConfig { max_epochs: 3, batch_size: 8, seed: 5, ..TrainConfig::default() };
        let run = || {
            let net = Network::new_cnn(&cfg, 2).unwrap();
            train(net, &train_set, &val_set, &tcfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.network, b.network);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn selection_returns_epoch_minimum() {
        let cfg = small_cfg();
        let (train_set, val_set) = small_sets(&cfg, 48, 3);
        let tcfg = TrainConfig { max_epochs: 5, batch_size: 16, seed: 2, ..TrainConfig::default() };
        let net = Network::new_cnn(&cfg, 4).unwrap();
        let out = train(net, &train_set, &val_set, &tcfg).unwrap();
        let min_logged = out.log.iter().map(|e| e.val_r_err).fold(f64::MAX, f64::min);
        assert_eq!(out.best_r_err, min_logged);
        assert!(out.best_r_err <= out.log[0].val_r_err);
        assert_eq!(out.log.len(), 5);
    }

    #[test]
    fn loss_trend_decreases_across_thirds() {
        let cfg = small_cfg();
        let (train_set, val_set) = small_sets(&cfg, 64, 13);
        let tcfg = TrainConfig {
            alpha: 0.003,
            max_epochs: 30,
            patience: 30,
            batch_size: 16,
            seed: 6,
            ..TrainConfig::default()
        };
        let net = Network::new_cnn(&cfg, 5).unwrap();
        let out = train(net, &train_set, &val_set, &tcfg).unwrap();
        let losses: Vec<f64> = out.log.iter().map(|e| e.mean_loss).collect();
        let median = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let third = losses.len() / 3;
        let first = median(&losses[..third]);
        let last = median(&losses[2 * third..]);
        assert!(last < first, "no long-run trend: first {first}, last {last}");
    }

    #[test]
    fn divergence_aborts_with_diagnostic() {
        let cfg = small_cfg();
        let (train_set, val_set) = small_sets(&cfg, 8, 1);
        // A step size large enough to overflow the convolution chain turns
        // the loss into NaN within a couple of steps.
        let tcfg = TrainConfig {
            alpha: 1e200,
            batch_size: 2,
            max_epochs: 50,
            patience: 50,
            seed: 1,
            ..TrainConfig::default()
        };
        let net = Network::new_cnn(&cfg, 1).unwrap();
        match train(net, &train_set, &val_set, &tcfg) {
            Err(Error::Diverged(msg)) => assert!(msg.contains("epoch")),
            other => panic!("expected divergence, got {:?}", other.map(|_| "ok")),
        }
    }

    #[test]
    fn log_csv_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = vec![EpochLog { epoch: 1, mean_loss: 2.0, val_r_err: 0.5, elapsed_sec: 1.5 }];
        write_log_csv(&log, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,mean_loss,val_R_err,elapsed_sec\n1,2,0.5,1.5\n"));
    }
}
