//! JSON run configuration and flag/file/default resolution.
//!
//! Precedence for every knob: command-line flag, then config file, then
//! (for the seed) the `OSL_SEED` environment variable, then the built-in
//! default. Each command echoes its fully resolved settings into a
//! `<output>.run.json` sidecar so no default stays hidden.

use osl_core::error::{Error, Result};
use osl_core::OfdmConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub ofdm: OfdmSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub n: Option<usize>,
    pub cp_len: Option<usize>,
    pub zc_root: Option<usize>,
    pub tau_p: Option<usize>,
    pub relaxed: Option<bool>,
    pub sigma_d2: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps_hat: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_samples: Option<usize>,
    pub val_fraction: Option<f64>,
    pub snr_min: Option<f64>,
    pub snr_max: Option<f64>,
    pub cfo_max: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub scenario: Option<String>,
    pub snr: Option<String>,
    pub trials: Option<u64>,
    pub cfo_max: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::usage(format!("bad config {}: {e}", p.display())))
            }
        }
    }
}

/// Builds the validated frame config from flag overrides and the file.
pub fn resolve_ofdm(
    file: &OfdmSection,
    n: Option<usize>,
    cp_len: Option<usize>,
    zc_root: Option<usize>,
    tau_p: Option<usize>,
    no_relax: bool,
) -> Result<OfdmConfig> {
    let n = n.or(file.n).unwrap_or(128);
    let tau_p = tau_p.or(file.tau_p).unwrap_or(22);
    let cp_len = cp_len.or(file.cp_len).unwrap_or(n / 4);
    let mut cfg = OfdmConfig::with_cp_len(n, cp_len, tau_p)?;
    if let Some(root) = zc_root.or(file.zc_root) {
        cfg = cfg.with_zc_root(root)?;
    }
    if let Some(s) = file.sigma_d2 {
        cfg = cfg.with_sigma_d2(s)?;
    }
    let relaxed = if no_relax { false } else { file.relaxed.unwrap_or(true) };
    if !relaxed {
        cfg = cfg.without_relaxation()?;
    }
    Ok(cfg)
}

/// Seed precedence: flag, config file, `OSL_SEED`, 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file.seed {
        return Ok(s);
    }
    match std::env::var("OSL_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|_| Error::usage(format!("OSL_SEED `{text}` is not an integer"))),
        Err(_) => Ok(0),
    }
}

/// Parses an SNR specification: `start:step:stop`, a comma list, or `inf`.
pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>> {
    let parse_one = |s: &str| -> Result<f64> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "noiseless" => Ok(f64::INFINITY),
            _ => t
                .parse()
                .map_err(|_| Error::usage(format!("bad SNR value `{t}`"))),
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let (start, step, stop) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::usage(format!("bad SNR range `{spec}`")));
        }
        let mut out = Vec::new();
        let mut v = start;
        while v <= stop + 1e-9 {
            out.push(v);
            v += step;
        }
        return Ok(out);
    }
    let list: Result<Vec<f64>> = spec.split(',').map(parse_one).collect();
    let list = list?;
    if list.is_empty() {
        return Err(Error::usage(format!("empty SNR list `{spec}`")));
    }
    Ok(list)
}

/// Parses comma-separated hidden-layer widths.
pub fn parse_hidden(spec: &str) -> Result<Vec<usize>> {
    let sizes: Result<Vec<usize>> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::usage(format!("bad hidden width `{s}`")))
        })
        .collect();
    let sizes = sizes?;
    if sizes.is_empty() || sizes.iter().any(|&v| v == 0) {
        return Err(Error::usage(format!("bad hidden layout `{spec}`")));
    }
    Ok(sizes)
}

/// Sibling validation-set path: `data.bin` becomes `data.val.bin`.
pub fn val_path(data: &Path) -> PathBuf {
    match data.extension().and_then(|e| e.to_str()) {
        Some(ext) => data.with_extension(format!("val.{ext}")),
        None => {
            let mut name = data.as_os_str().to_os_string();
            name.push(".val");
            PathBuf::from(name)
        }
    }
}

/// Writes the resolved settings of one run next to its primary output.
pub fn write_sidecar<T: Serialize>(primary_output: &Path, resolved: &T) -> Result<()> {
    let mut name = primary_output
        .file_name()
        .unwrap_or_default()
        .to_os_string();
    name.push(".run.json");
    let path = primary_output.with_file_name(name);
    std::fs::write(&path, serde_json::to_string_pretty(resolved)?)?;
    Ok(())
}
