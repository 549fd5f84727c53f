//! Labeled sample generation and the on-disk dataset container.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic "OSL1" | u32 version=1 | u32 n | u32 cp_len | u32 tau_relax | u64 count
//! per record: 2m * f32 (interleaved re/im) | u16 label | u16 true_to | f32 snr_db
//! ```
//!
//! A sibling `<path>.json` manifest records the full config, seed, channel
//! family, and draw ranges.

use crate::channel::{apply_channel, ChannelRealization};
use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};
use crate::scenario::{ChannelModel, ETA_RANGE};
use crate::waveform::build_frame;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"OSL1";
const VERSION: u32 = 1;

/// One labeled observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Interleaved re/im of the window, length `2m`.
    pub y: Vec<f32>,
    /// Class index `true_to + label_offset`, below `n_u`.
    pub label: u16,
    /// Ground-truth timing offset.
    pub true_to: u16,
    /// SNR the window was drawn at.
    pub snr_db: f32,
}

/// Generator provenance stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub channel: String,
    pub snr_range: (f64, f64),
    pub eta_range: (f64, f64),
}

impl Default for DatasetMeta {
    fn default() -> Self {
        DatasetMeta {
            seed: 0,
            channel: "unknown".into(),
            snr_range: (0.0, 0.0),
            eta_range: ETA_RANGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cfg: OfdmConfig,
    pub samples: Vec<TrainingSample>,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    cfg: OfdmConfig,
    count: usize,
    #[serde(flatten)]
    meta: DatasetMeta,
}

/// Interleaves a complex window into `[re0, im0, re1, im1, ...]`.
///
/// `expected_len` is the observation length `m`; anything else is a
/// dimension error.
pub fn vectorize(r: &[Complex64], expected_len: usize) -> Result<Vec<f64>> {
    if r.len() != expected_len {
        return Err(Error::Dimension { expected: expected_len, got: r.len() });
    }
    let mut out = Vec::with_capacity(2 * r.len());
    for v in r {
        out.push(v.re);
        out.push(v.im);
    }
    Ok(out)
}

/// Inverse of [`vectorize`].
pub fn de_interleave(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Maps a timing offset to its one-hot class index.
pub fn make_label(to: usize, cfg: &OfdmConfig) -> usize {
    assert!(to < cfg.n, "timing offset {to} outside [0, {})", cfg.n);
    let label = to + cfg.label_offset();
    // Guaranteed by tau_relax < cp_len; a violation means the config
    // bypassed validation.
    assert!(label < cfg.n_u(), "label {label} escapes the class range");
    label
}

/// Knobs for one generation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub count: usize,
    pub snr_range: (f64, f64),
    pub cfo_max: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(count: usize, snr_range: (f64, f64), seed: u64) -> Self {
        DatasetSpec { count, snr_range, cfo_max: 0.0, seed }
    }
}

/// Draws one labeled sample from its own derived generator.
fn generate_sample(
    cfg: &OfdmConfig,
    sampler: &crate::scenario::ChannelSampler,
    spec: &DatasetSpec,
    stream_id: u64,
    index: u64,
) -> Result<TrainingSample> {
    let mut rng = derive_rng(spec.seed, stream_id, index);
    let to = rng.random_range(0..cfg.n);
    let (pdp, taps) = sampler.draw(&mut rng);
    let (lo, hi) = spec.snr_range;
    let snr_db = if hi > lo { lo + rng.random::<f64>() * (hi - lo) } else { lo };
    let cfo = if spec.cfo_max > 0.0 {
        (rng.random::<f64>() * 2.0 - 1.0) * spec.cfo_max
    } else {
        0.0
    };
    let frame = build_frame(cfg, &mut rng)?;
    let real = ChannelRealization { taps, to, cfo, snr_db };
    let window = apply_channel(&frame, &pdp, &real, cfg, &mut rng)?;
    let y = vectorize(&window, cfg.m())?;
    Ok(TrainingSample {
        y: y.into_iter().map(|v| v as f32).collect(),
        label: make_label(to, cfg) as u16,
        true_to: to as u16,
        snr_db: snr_db as f32,
    })
}

/// Generates `spec.count` samples in parallel, deterministically for a
/// fixed seed regardless of worker count.
pub fn generate_dataset(
    cfg: &OfdmConfig,
    channel: &ChannelModel,
    spec: &DatasetSpec,
) -> Result<Dataset> {
    generate_dataset_stream(cfg, channel, spec, stream::DATASET)
}

/// Like [`generate_dataset`] with an explicit stream id, so validation sets
/// can share a master seed without overlapping the training stream.
pub fn generate_dataset_stream(
    cfg: &OfdmConfig,
    channel: &ChannelModel,
    spec: &DatasetSpec,
    stream_id: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    if spec.count == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    if !(spec.snr_range.0 <= spec.snr_range.1) {
        return Err(Error::config(format!(
            "snr range [{}, {}] is empty",
            spec.snr_range.0, spec.snr_range.1
        )));
    }
    let sampler = channel.sampler(cfg)?;
    let samples: Result<Vec<TrainingSample>> = (0..spec.count as u64)
        .into_par_iter()
        .map(|i| generate_sample(cfg, &sampler, spec, stream_id, i))
        .collect();
    Ok(Dataset {
        cfg: *cfg,
        samples: samples?,
        meta: DatasetMeta {
            seed: spec.seed,
            channel: channel.tag(),
            snr_range: spec.snr_range,
            eta_range: ETA_RANGE,
        },
    })
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Writes the binary container and its sibling manifest.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.cfg.n as u32).to_le_bytes())?;
    w.write_all(&(ds.cfg.cp_len as u32).to_le_bytes())?;
    w.write_all(&(ds.cfg.tau_relax as u32).to_le_bytes())?;
    w.write_all(&(ds.samples.len() as u64).to_le_bytes())?;
    let dim = 2 * ds.cfg.m();
    for s in &ds.samples {
        if s.y.len() != dim {
            return Err(Error::Dimension { expected: dim, got: s.y.len() });
        }
        for v in &s.y {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&s.label.to_le_bytes())?;
        w.write_all(&s.true_to.to_le_bytes())?;
        w.write_all(&s.snr_db.to_le_bytes())?;
    }
    w.flush()?;

    let manifest = Manifest {
        cfg: ds.cfg,
        count: ds.samples.len(),
        meta: ds.meta.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path(path), json)?;
    Ok(())
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("dataset file truncated")
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a dataset written by [`write_dataset`], byte-exactly.
///
/// The manifest restores the full config when present; otherwise the config
/// is rebuilt from the header fields, which carry everything label and
/// window arithmetic needs.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_or_format(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(format!("bad magic {magic:02x?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let cp_len = read_u32(&mut r)? as usize;
    let tau_relax = read_u32(&mut r)? as usize;
    let mut count_bytes = [0u8; 8];
    read_exact_or_format(&mut r, &mut count_bytes)?;
    let count = u64::from_le_bytes(count_bytes) as usize;

    let (cfg, meta) = match std::fs::read_to_string(manifest_path(path))
        .ok()
        .and_then(|text| serde_json::from_str::<Manifest>(&text).ok())
    {
        Some(man) => (man.cfg, man.meta),
        // No manifest: tau_p := tau_relax reproduces the same label offset
        // and correctness window.
        None => {
            let cfg = OfdmConfig {
                n,
                cp_len,
                zc_root: 25,
                tau_p: tau_relax,
                delta_tau: 0,
                tau_relax,
                sigma_d2: 1.0,
            };
            (cfg, DatasetMeta::default())
        }
    };
    cfg.validate()
        .map_err(|e| Error::format(format!("header config invalid: {e}")))?;
    if cfg.n != n || cfg.cp_len != cp_len || cfg.tau_relax != tau_relax {
        return Err(Error::format(
            "manifest config disagrees with binary header",
        ));
    }

    let dim = 2 * cfg.m();
    let mut samples = Vec::with_capacity(count);
    let mut payload = vec![0u8; 4 * dim];
    for _ in 0..count {
        read_exact_or_format(&mut r, &mut payload)?;
        let y: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut b2 = [0u8; 2];
        read_exact_or_format(&mut r, &mut b2)?;
        let label = u16::from_le_bytes(b2);
        read_exact_or_format(&mut r, &mut b2)?;
        let true_to = u16::from_le_bytes(b2);
        let mut b4 = [0u8; 4];
        read_exact_or_format(&mut r, &mut b4)?;
        let snr_db = f32::from_le_bytes(b4);
        if label as usize >= cfg.n_u() {
            return Err(Error::format(format!("label {label} out of range")));
        }
        samples.push(TrainingSample { y, label, true_to, snr_db });
    }
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(Error::format("trailing bytes after last record"));
    }
    Ok(Dataset { cfg, samples, meta })
}
