//! `osl`: dataset generation, training, Monte Carlo evaluation, preset
//! sweeps, and complexity counting for the OFDM timing synchronization lab.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 runtime error.

mod runcfg;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osl_core::baselines::OmpConfig;
use osl_core::dataset::{generate_dataset_stream, read_dataset, write_dataset, DatasetSpec};
use osl_core::error::{Error, Result};
use osl_core::evaluator::{count_cm, expect_graph, monte_carlo, CmMethod, EvalReport, Method};
use osl_core::network::FCNN_DEFAULT_HIDDEN;
use osl_core::rng::stream;
use osl_core::scenario::{sweep_prefix, sweep_subcarriers, ChannelModel, GainLaw, Scenario, SweepPoint};
use osl_core::trainer::{train_with_progress, write_log_csv, TrainConfig};
use osl_core::{GraphKind, Network, OfdmConfig};
use runcfg::FileConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "osl",
    version,
    about = "OFDM timing synchronization lab: generate data, train the 1-D CNN synchronizer, evaluate against classic baselines, and count complexity"
)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (flag > config file > OSL_SEED env > 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled training dataset plus a validation sibling.
    GenData(GenDataArgs),
    /// Fit a synchronizer on a generated dataset.
    Train(TrainArgs),
    /// Monte Carlo error probability of one method on one scenario.
    Eval(EvalArgs),
    /// Run a named experiment preset end to end.
    Sweep(SweepArgs),
    /// Print complex-multiplication counts per synchronized window.
    Complexity(ComplexityArgs),
}

#[derive(Args, Clone)]
struct OfdmArgs {
    /// Subcarrier count.
    #[arg(long)]
    n: Option<usize>,
    /// Cyclic prefix length (default n/4).
    #[arg(long)]
    cp_len: Option<usize>,
    /// Training sequence root index.
    #[arg(long)]
    zc_root: Option<usize>,
    /// Nominal maximum propagation delay in samples.
    #[arg(long)]
    tau_p: Option<usize>,
    /// Disable the relaxed delay restriction (tau_relax = tau_p).
    #[arg(long)]
    no_relax: bool,
}

impl OfdmArgs {
    fn resolve(&self, file: &FileConfig) -> Result<OfdmConfig> {
        runcfg::resolve_ofdm(
            &file.ofdm,
            self.n,
            self.cp_len,
            self.zc_root,
            self.tau_p,
            self.no_relax,
        )
    }
}

#[derive(Args)]
struct GenDataArgs {
    /// Output dataset path; the validation set lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Number of training samples.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Validation samples as a fraction of the training count.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Lower edge of the per-sample SNR draw (dB).
    #[arg(long)]
    snr_min: Option<f64>,
    /// Upper edge of the per-sample SNR draw (dB).
    #[arg(long)]
    snr_max: Option<f64>,
    /// Per-sample CFO bound (fraction of subcarrier spacing).
    #[arg(long)]
    cfo_max: Option<f64>,
    #[command(flatten)]
    ofdm: OfdmArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GraphArg {
    Cnn,
    Fcnn,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset written by gen-data.
    #[arg(long)]
    dataset: PathBuf,
    /// Validation dataset (default: the gen-data sibling).
    #[arg(long)]
    val_dataset: Option<PathBuf>,
    /// Output model path.
    #[arg(long)]
    model: PathBuf,
    /// Training log CSV (default: `<model>.log.csv`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Which graph to fit.
    #[arg(long, value_enum, default_value_t = GraphArg::Cnn)]
    graph: GraphArg,
    /// Hidden widths for the fcnn graph, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Cnn,
    Fcnn,
    #[value(name = "cross_corr")]
    CrossCorr,
    #[value(name = "auto_corr")]
    AutoCorr,
    Omp,
    Oracle,
}

impl MethodArg {
    fn name(&self) -> &'static str {
        match self {
            MethodArg::Cnn => "cnn",
            MethodArg::Fcnn => "fcnn",
            MethodArg::CrossCorr => "cross_corr",
            MethodArg::AutoCorr => "auto_corr",
            MethodArg::Omp => "omp",
            MethodArg::Oracle => "oracle",
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Synchronizer to evaluate.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Trained model file (required for cnn/fcnn).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scenario preset: fig2a, single_path, two_path, tdl_a, tdl_b, tdl_c.
    #[arg(long)]
    scenario: Option<String>,
    /// SNR points: `start:step:stop`, a comma list, or `inf`.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Greedy iterations for omp (default 3).
    #[arg(long)]
    omp_iterations: Option<usize>,
    /// Run omp with one iteration per channel path.
    #[arg(long)]
    omp_full: bool,
    /// Path count assumed by --omp-full (default 28).
    #[arg(long)]
    paths: Option<usize>,
    /// Per-trial CFO bound for the scenario.
    #[arg(long)]
    cfo_max: Option<f64>,
    /// Draw test-channel taps with deterministic magnitudes and random
    /// phases instead of Rayleigh fading.
    #[arg(long)]
    phase_only_taps: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    ofdm: OfdmArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment preset to reproduce.
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Directory for datasets, models, and report CSVs.
    #[arg(long)]
    out_dir: PathBuf,
    /// Reuse a trained cnn model (fig2a/fig2d only; otherwise one is
    /// trained into the output directory).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Trials per SNR point (default 2000).
    #[arg(long)]
    trials: Option<u64>,
    /// SNR points (default -4:2:10).
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Training samples when a model has to be trained (default 20000).
    #[arg(long)]
    train_samples: Option<usize>,
    /// Training epochs when a model has to be trained (default 30).
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated methods (default cnn,cross_corr,auto_corr,omp).
    #[arg(long)]
    methods: Option<String>,
    /// Draw test-channel taps with deterministic magnitudes and random
    /// phases instead of Rayleigh fading.
    #[arg(long)]
    phase_only_taps: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CmArg {
    Cs,
    Elm,
    Proposed,
    Fcnn,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Print only one method's count.
    #[arg(long, value_enum)]
    method: Option<CmArg>,
    /// Path count of the sparse-recovery method (default 28).
    #[arg(long)]
    paths: Option<usize>,
    /// Baseline hidden widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    #[command(flatten)]
    ofdm: OfdmArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) | Error::Diverged(_) => 3u8,
                _ => 2u8,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = runcfg::resolve_seed(cli.seed, &file)?;
    if let Some(threads) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenData(args) => cmd_gen_data(args, &file, seed),
        Command::Train(args) => cmd_train(args, &file, seed),
        Command::Eval(args) => cmd_eval(args, &file, seed),
        Command::Sweep(args) => cmd_sweep(args, &file, seed),
        Command::Complexity(args) => cmd_complexity(args, &file),
    }
}

#[derive(Serialize)]
struct GenDataRun {
    command: &'static str,
    seed: u64,
    cfg: OfdmConfig,
    n_samples: usize,
    val_samples: usize,
    snr_range: (f64, f64),
    cfo_max: f64,
    channel: String,
    out: PathBuf,
    val_out: PathBuf,
}

fn cmd_gen_data(args: GenDataArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let cfg = args.ofdm.resolve(file)?;
    let count = args.n_samples.or(file.data.n_samples).unwrap_or(100_000);
    let val_fraction = args.val_fraction.or(file.data.val_fraction).unwrap_or(0.1);
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(Error::usage(format!("val fraction {val_fraction} outside [0, 1]")));
    }
    let snr_range = (
        args.snr_min.or(file.data.snr_min).unwrap_or(-4.0),
        args.snr_max.or(file.data.snr_max).unwrap_or(10.0),
    );
    let cfo_max = args.cfo_max.or(file.data.cfo_max).unwrap_or(0.0);
    let channel = ChannelModel::ExpRandom;

    let mut spec = DatasetSpec::new(count, snr_range, seed);
    spec.cfo_max = cfo_max;
    eprintln!("generating {count} samples (n={}, tau_relax={})...", cfg.n, cfg.tau_relax);
    let ds = generate_dataset_stream(&cfg, &channel, &spec, stream::DATASET)?;
    write_dataset(&ds, &args.out)?;

    let val_out = runcfg::val_path(&args.out);
    let val_count = ((count as f64 * val_fraction).round() as usize).max(1);
    let val_spec = DatasetSpec { count: val_count, ..spec.clone() };
    eprintln!("generating {val_count} validation samples...");
    let val = generate_dataset_stream(&cfg, &channel, &val_spec, stream::VALIDATION)?;
    write_dataset(&val, &val_out)?;

    runcfg::write_sidecar(
        &args.out,
        &GenDataRun {
            command: "gen-data",
            seed,
            cfg,
            n_samples: count,
            val_samples: val_count,
            snr_range,
            cfo_max,
            channel: channel.tag(),
            out: args.out.clone(),
            val_out: val_out.clone(),
        },
    )?;

    let (lo, hi) = ds
        .samples
        .iter()
        .fold((u16::MAX, 0u16), |(lo, hi), s| (lo.min(s.label), hi.max(s.label)));
    println!(
        "wrote {} samples to {} (labels in [{lo}, {hi}]), {} validation samples to {}",
        ds.samples.len(),
        args.out.display(),
        val.samples.len(),
        val_out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainRun {
    command: &'static str,
    seed: u64,
    cfg: OfdmConfig,
    graph: String,
    hidden: Option<Vec<usize>>,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps_hat: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    dataset: PathBuf,
    val_dataset: PathBuf,
    model: PathBuf,
    log: PathBuf,
    best_epoch: usize,
    best_r_err: f64,
}

fn resolve_train_config(args: &TrainArgs, file: &FileConfig, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        alpha: args.alpha.or(file.train.alpha).unwrap_or(d.alpha),
        beta1: file.train.beta1.unwrap_or(d.beta1),
        beta2: file.train.beta2.unwrap_or(d.beta2),
        eps_hat: file.train.eps_hat.unwrap_or(d.eps_hat),
        batch_size: args.batch_size.or(file.train.batch_size).unwrap_or(d.batch_size),
        max_epochs: args.epochs.or(file.train.max_epochs).unwrap_or(d.max_epochs),
        patience: args.patience.or(file.train.patience).unwrap_or(d.patience),
        seed,
    }
}

fn cmd_train(args: TrainArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let train_set = read_dataset(&args.dataset)?;
    let val_path = args
        .val_dataset
        .clone()
        .unwrap_or_else(|| runcfg::val_path(&args.dataset));
    if !val_path.exists() {
        return Err(Error::usage(format!(
            "validation dataset {} not found; pass --val-dataset",
            val_path.display()
        )));
    }
    let val_set = read_dataset(&val_path)?;
    let cfg = train_set.cfg;
    let tcfg = resolve_train_config(&args, file, seed);

    let hidden = match &args.hidden {
        Some(spec) => Some(runcfg::parse_hidden(spec)?),
        None => None,
    };
    let initial = match args.graph {
        GraphArg::Cnn => Network::new_cnn(&cfg, seed)?,
        GraphArg::Fcnn => {
            Network::new_fcnn(&cfg, hidden.as_deref().unwrap_or(&FCNN_DEFAULT_HIDDEN), seed)?
        }
    };
    let graph_name = initial.kind().name().to_string();
    eprintln!(
        "training {graph_name} on {} samples ({} validation), up to {} epochs...",
        train_set.samples.len(),
        val_set.samples.len(),
        tcfg.max_epochs
    );
    let outcome = train_with_progress(initial, &train_set, &val_set, &tcfg, |e| {
        eprintln!(
            "epoch {:>3}: loss {:.4}, val R_err {:.4} ({:.1}s)",
            e.epoch, e.mean_loss, e.val_r_err, e.elapsed_sec
        );
    })?;

    outcome.network.save(&cfg, &args.model)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut name = args.model.file_name().unwrap_or_default().to_os_string();
        name.push(".log.csv");
        args.model.with_file_name(name)
    });
    write_log_csv(&outcome.log, &log_path)?;
    runcfg::write_sidecar(
        &args.model,
        &TrainRun {
            command: "train",
            seed,
            cfg,
            graph: graph_name,
            hidden,
            alpha: tcfg.alpha,
            beta1: tcfg.beta1,
            beta2: tcfg.beta2,
            eps_hat: tcfg.eps_hat,
            batch_size: tcfg.batch_size,
            max_epochs: tcfg.max_epochs,
            patience: tcfg.patience,
            dataset: args.dataset.clone(),
            val_dataset: val_path,
            model: args.model.clone(),
            log: log_path,
            best_epoch: outcome.best_epoch,
            best_r_err: outcome.best_r_err,
        },
    )?;
    println!(
        "saved {} (best epoch {}, val R_err {:.4}); log rows: {}",
        args.model.display(),
        outcome.best_epoch,
        outcome.best_r_err,
        outcome.log.len()
    );
    Ok(())
}

struct LoadedMethod {
    cfg: OfdmConfig,
    network: Option<Network>,
}

/// Learned methods carry their config in the model file; classic ones use
/// flags and the config file.
fn load_method(
    method: MethodArg,
    model: Option<&Path>,
    ofdm: &OfdmArgs,
    file: &FileConfig,
) -> Result<LoadedMethod> {
    match method {
        MethodArg::Cnn | MethodArg::Fcnn => {
            let path = model.ok_or_else(|| {
                Error::usage(format!("--method {} needs --model", method.name()))
            })?;
            let (net, cfg) = Network::load(path)?;
            let want = if method == MethodArg::Cnn { GraphKind::Cnn } else { GraphKind::Fcnn };
            expect_graph(&net, want)?;
            Ok(LoadedMethod { cfg, network: Some(net) })
        }
        _ => Ok(LoadedMethod { cfg: ofdm.resolve(file)?, network: None }),
    }
}

fn method_for<'a>(
    method: MethodArg,
    network: Option<&'a Network>,
    cfg: &OfdmConfig,
    omp_iterations: Option<usize>,
    omp_full: bool,
    paths: usize,
) -> Method<'a> {
    match method {
        MethodArg::Cnn | MethodArg::Fcnn => Method::Network(network.expect("loaded")),
        MethodArg::CrossCorr => Method::CrossCorr,
        MethodArg::AutoCorr => Method::AutoCorr,
        MethodArg::Omp => {
            let mut ocfg =
                if omp_full { OmpConfig::full(cfg, paths) } else { OmpConfig::unfolded(cfg) };
            if let Some(iters) = omp_iterations {
                ocfg.num_iterations = iters;
            }
            Method::Omp(ocfg)
        }
        MethodArg::Oracle => Method::Oracle,
    }
}

#[derive(Serialize)]
struct EvalRun {
    command: &'static str,
    seed: u64,
    cfg: OfdmConfig,
    method: String,
    scenario: Scenario,
    snr: Vec<f64>,
    trials: u64,
    omp_iterations: Option<usize>,
    omp_full: bool,
    paths: usize,
    model: Option<PathBuf>,
    out: PathBuf,
}

/// Runs one SNR point at a time so progress lands on stderr; per-point
/// streams are keyed by the SNR value, so the union equals a single sweep.
fn run_sweep_points(
    method: &Method,
    scenario: &Scenario,
    cfg: &OfdmConfig,
    snr_list: &[f64],
    trials: u64,
    seed: u64,
) -> Result<EvalReport> {
    let mut merged: Option<EvalReport> = None;
    for &snr in snr_list {
        let point = monte_carlo(method, scenario, cfg, &[snr], trials, seed)?;
        eprintln!(
            "{} on {} @ {snr} dB: {} / {trials} errors (p = {})",
            point.method, scenario.name, point.rows[0].errors, point.rows[0].error_prob
        );
        match &mut merged {
            None => merged = Some(point),
            Some(m) => m.rows.extend(point.rows),
        }
    }
    Ok(merged.expect("at least one SNR point"))
}

fn cmd_eval(args: EvalArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let loaded = load_method(args.method, args.model.as_deref(), &args.ofdm, file)?;
    let cfg = loaded.cfg;
    let scenario_name = args
        .scenario
        .clone()
        .or_else(|| file.eval.scenario.clone())
        .ok_or_else(|| Error::usage("--scenario is required (or set eval.scenario in the config)"))?;
    let mut scenario = Scenario::preset(&scenario_name)?;
    if let Some(cfo) = args.cfo_max.or(file.eval.cfo_max) {
        scenario.cfo_max = cfo;
    }
    if args.phase_only_taps {
        scenario.gain_law = GainLaw::PhaseOnly;
    }
    let snr_spec = args
        .snr
        .clone()
        .or_else(|| file.eval.snr.clone())
        .unwrap_or_else(|| "-4:2:10".to_string());
    let snr_list = runcfg::parse_snr_list(&snr_spec)?;
    let trials = args.trials.or(file.eval.trials).unwrap_or(10_000);
    let paths = args.paths.unwrap_or(28);
    let method = method_for(
        args.method,
        loaded.network.as_ref(),
        &cfg,
        args.omp_iterations,
        args.omp_full,
        paths,
    );

    let report = run_sweep_points(&method, &scenario, &cfg, &snr_list, trials, seed)?;
    report.write(&args.out)?;
    runcfg::write_sidecar(
        &args.out,
        &EvalRun {
            command: "eval",
            seed,
            cfg,
            method: args.method.name().to_string(),
            scenario,
            snr: snr_list,
            trials,
            omp_iterations: args.omp_iterations,
            omp_full: args.omp_full,
            paths,
            model: args.model.clone(),
            out: args.out.clone(),
        },
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn parse_methods(spec: &str) -> Result<Vec<MethodArg>> {
    spec.split(',')
        .map(|s| match s.trim() {
            "cnn" => Ok(MethodArg::Cnn),
            "fcnn" => Ok(MethodArg::Fcnn),
            "cross_corr" => Ok(MethodArg::CrossCorr),
            "auto_corr" => Ok(MethodArg::AutoCorr),
            "omp" => Ok(MethodArg::Omp),
            "oracle" => Ok(MethodArg::Oracle),
            other => Err(Error::usage(format!("unknown method `{other}`"))),
        })
        .collect()
}

/// Generates data and trains one synchronizer for a sweep point.
fn train_point(
    cfg: &OfdmConfig,
    graph: GraphArg,
    samples: usize,
    epochs: usize,
    seed: u64,
    out_dir: &Path,
    label: &str,
) -> Result<Network> {
    let spec = DatasetSpec::new(samples, (-4.0, 10.0), seed);
    eprintln!("[{label}] generating {samples} training samples...");
    let train_set =
        generate_dataset_stream(cfg, &ChannelModel::ExpRandom, &spec, stream::DATASET)?;
    let val_spec = DatasetSpec { count: (samples / 10).max(1), ..spec };
    let val_set =
        generate_dataset_stream(cfg, &ChannelModel::ExpRandom, &val_spec, stream::VALIDATION)?;
    let tcfg = TrainConfig { max_epochs: epochs, seed, ..TrainConfig::default() };
    let initial = match graph {
        GraphArg::Cnn => Network::new_cnn(cfg, seed)?,
        GraphArg::Fcnn => Network::new_fcnn(cfg, &FCNN_DEFAULT_HIDDEN, seed)?,
    };
    let graph_name = initial.kind().name();
    let outcome = train_with_progress(initial, &train_set, &val_set, &tcfg, |e| {
        eprintln!(
            "[{label}] epoch {:>3}: loss {:.4}, val R_err {:.4}",
            e.epoch, e.mean_loss, e.val_r_err
        );
    })?;
    let model_path = out_dir.join(format!("{label}_{graph_name}.model"));
    outcome.network.save(cfg, &model_path)?;
    write_log_csv(&outcome.log, &out_dir.join(format!("{label}_{graph_name}.log.csv")))?;
    eprintln!(
        "[{label}] best epoch {} (val R_err {:.4}), saved {}",
        outcome.best_epoch,
        outcome.best_r_err,
        model_path.display()
    );
    Ok(outcome.network)
}

/// Evaluates the requested methods and writes one merged CSV.
#[allow(clippy::too_many_arguments)]
fn eval_into_csv(
    methods: &[MethodArg],
    cnn: Option<&Network>,
    fcnn: Option<&Network>,
    scenario: &Scenario,
    cfg: &OfdmConfig,
    snr_list: &[f64],
    trials: u64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut csv = String::from("method,channel,snr_db,trials,errors,error_prob\n");
    let mut reports = Vec::new();
    for &m in methods {
        let net = match m {
            MethodArg::Cnn => cnn,
            MethodArg::Fcnn => fcnn,
            _ => None,
        };
        if matches!(m, MethodArg::Cnn | MethodArg::Fcnn) && net.is_none() {
            return Err(Error::usage(format!("no trained model available for {}", m.name())));
        }
        let method = method_for(m, net, cfg, None, false, 28);
        let report = run_sweep_points(&method, scenario, cfg, snr_list, trials, seed)?;
        for line in report.to_csv().lines().skip(1) {
            csv.push_str(line);
            csv.push('\n');
        }
        reports.push(report);
    }
    std::fs::write(out, csv)?;
    runcfg::write_sidecar(out, &reports)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, file: &FileConfig, seed: u64) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let trials = args.trials.or(file.eval.trials).unwrap_or(2_000);
    let snr_spec = args
        .snr
        .clone()
        .or_else(|| file.eval.snr.clone())
        .unwrap_or_else(|| "-4:2:10".to_string());
    let snr_list = runcfg::parse_snr_list(&snr_spec)?;
    let methods =
        parse_methods(args.methods.as_deref().unwrap_or("cnn,cross_corr,auto_corr,omp"))?;
    let train_samples = args.train_samples.unwrap_or(20_000);
    let epochs = args.epochs.unwrap_or(30);
    let wants_cnn = methods.contains(&MethodArg::Cnn);
    let wants_fcnn = methods.contains(&MethodArg::Fcnn);

    match args.preset {
        PresetArg::Fig2a | PresetArg::Fig2d => {
            let cfg = runcfg::resolve_ofdm(&file.ofdm, None, None, None, None, false)?;
            let cnn = match (&args.model, wants_cnn) {
                (Some(path), _) => {
                    let (net, model_cfg) = Network::load(path)?;
                    expect_graph(&net, GraphKind::Cnn)?;
                    osl_core::network::ensure_cfg_matches(&model_cfg, &cfg)?;
                    Some(net)
                }
                (None, true) => Some(train_point(
                    &cfg,
                    GraphArg::Cnn,
                    train_samples,
                    epochs,
                    seed,
                    &args.out_dir,
                    "base",
                )?),
                (None, false) => None,
            };
            let fcnn = if wants_fcnn {
                Some(train_point(
                    &cfg,
                    GraphArg::Fcnn,
                    train_samples,
                    epochs,
                    seed,
                    &args.out_dir,
                    "base",
                )?)
            } else {
                None
            };
            let (prefix, scenarios) = match args.preset {
                PresetArg::Fig2a => ("fig2a", vec![Scenario::fig2a()]),
                _ => (
                    "fig2d",
                    vec![
                        Scenario::preset("tdl_a")?,
                        Scenario::preset("tdl_b")?,
                        Scenario::preset("tdl_c")?,
                    ],
                ),
            };
            for mut scenario in scenarios {
                if args.phase_only_taps {
                    scenario.gain_law = GainLaw::PhaseOnly;
                }
                let out = args.out_dir.join(format!("{prefix}_{}.csv", scenario.name));
                eval_into_csv(
                    &methods,
                    cnn.as_ref(),
                    fcnn.as_ref(),
                    &scenario,
                    &cfg,
                    &snr_list,
                    trials,
                    seed,
                    &out,
                )?;
            }
        }
        PresetArg::Fig2b | PresetArg::Fig2c => {
            let (prefix, points): (&str, Vec<SweepPoint>) = match args.preset {
                PresetArg::Fig2b => ("fig2b", sweep_subcarriers(&[64, 128, 256])?),
                _ => ("fig2c", sweep_prefix(128, &[24, 32, 48])?),
            };
            for (pi, point) in points.iter().enumerate() {
                let point_seed = seed.wrapping_add(pi as u64);
                let cnn = if wants_cnn {
                    Some(train_point(
                        &point.cfg,
                        GraphArg::Cnn,
                        train_samples,
                        epochs,
                        point_seed,
                        &args.out_dir,
                        &point.label,
                    )?)
                } else {
                    None
                };
                let fcnn = if wants_fcnn {
                    Some(train_point(
                        &point.cfg,
                        GraphArg::Fcnn,
                        train_samples,
                        epochs,
                        point_seed,
                        &args.out_dir,
                        &point.label,
                    )?)
                } else {
                    None
                };
                let out = args.out_dir.join(format!("{prefix}_{}.csv", point.label));
                let mut scenario = point.scenario.clone();
                if args.phase_only_taps {
                    scenario.gain_law = GainLaw::PhaseOnly;
                }
                eval_into_csv(
                    &methods,
                    cnn.as_ref(),
                    fcnn.as_ref(),
                    &scenario,
                    &point.cfg,
                    &snr_list,
                    trials,
                    point_seed,
                    &out,
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_complexity(args: ComplexityArgs, file: &FileConfig) -> Result<()> {
    let cfg = args.ofdm.resolve(file)?;
    let paths = args.paths.unwrap_or(28);
    let hidden = match &args.hidden {
        Some(spec) => runcfg::parse_hidden(spec)?,
        None => FCNN_DEFAULT_HIDDEN.to_vec(),
    };
    let rows: Vec<(&str, CmMethod)> = vec![
        ("cs", CmMethod::Cs { paths }),
        ("elm", CmMethod::Elm),
        ("proposed", CmMethod::Proposed),
        ("fcnn", CmMethod::Fcnn { hidden }),
    ];
    println!(
        "# complex multiplications per window (n={}, cp_len={}, n_u={}, paths={paths})",
        cfg.n,
        cfg.cp_len,
        cfg.n_u()
    );
    println!("method,cm");
    for (name, method) in rows {
        let selected = match args.method {
            None => true,
            Some(CmArg::Cs) => name == "cs",
            Some(CmArg::Elm) => name == "elm",
            Some(CmArg::Proposed) => name == "proposed",
            Some(CmArg::Fcnn) => name == "fcnn",
        };
        if selected {
            println!("{name},{}", count_cm(&method, &cfg));
        }
    }
    Ok(())
}
