//! Classic timing synchronizers used for comparison: replica
//! cross-correlation, prefix auto-correlation, and greedy sparse recovery
//! over a shifted-replica dictionary.

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::waveform::{training_symbol, ComplexVec};
use num_complex::Complex64;

/// Common estimator surface: observation window in, timing estimate out.
///
/// Estimates are signed because the learned synchronizer de-offsets its
/// class index and may land below zero on garbage input.
pub trait TimingEstimator {
    fn estimate(&self, window: &[Complex64]) -> isize;
    fn name(&self) -> &'static str;
}

/// Matched-filter peak over candidate offsets `[0, n-1]`.
///
/// `c_j = sum_m window[j+m] * conj(replica[m])`, estimate = argmax |c_j|,
/// lowest index on ties.
pub fn cross_corr_ts(window: &[Complex64], replica: &[Complex64]) -> usize {
    let span = window.len().saturating_sub(replica.len());
    let mut best = 0usize;
    let mut best_mag = f64::MIN;
    for j in 0..span.max(1) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, r) in replica.iter().enumerate() {
            acc += window[j + m] * r.conj();
        }
        let mag = acc.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best = j;
        }
    }
    best
}

/// Prefix correlation metric `|A_j|^2 / E_j^2` with
/// `A_j = sum_{m<cp} window[j+m] conj(window[j+m+n])` and
/// `E_j = sum_{m<cp} |window[j+m+n]|^2`, maximized over `[0, n-1]`.
pub fn auto_corr_ts(window: &[Complex64], cfg: &OfdmConfig) -> usize {
    let n = cfg.n;
    let cp = cfg.cp_len;
    let mut best = 0usize;
    let mut best_metric = f64::MIN;
    for j in 0..n {
        let mut corr = Complex64::new(0.0, 0.0);
        let mut energy = 0.0;
        for m in 0..cp {
            corr += window[j + m] * window[j + m + n].conj();
            energy += window[j + m + n].norm_sqr();
        }
        let metric = if energy > 0.0 {
            corr.norm_sqr() / (energy * energy)
        } else {
            0.0
        };
        if metric > best_metric {
            best_metric = metric;
            best = j;
        }
    }
    best
}

/// Sparse-recovery settings.
#[derive(Debug, Clone)]
pub struct OmpConfig {
    /// Greedy iterations; 3 mirrors the unfolded synchronizer, the full
    /// variant uses the channel's path count.
    pub num_iterations: usize,
    /// Fraction of the largest recovered |gain| below which atoms are
    /// ignored when picking the first arriving path.
    pub gain_floor: f64,
    /// Candidate delays `0..=search_max`.
    pub search_max: usize,
}

impl OmpConfig {
    pub fn unfolded(cfg: &OfdmConfig) -> Self {
        OmpConfig { num_iterations: 3, gain_floor: 0.1, search_max: cfg.n_u() - 1 }
    }

    /// Full-complexity variant with one iteration per resolvable path.
    pub fn full(cfg: &OfdmConfig, paths: usize) -> Self {
        OmpConfig { num_iterations: paths.max(1), gain_floor: 0.1, search_max: cfg.n_u() - 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_iterations == 0 {
            return Err(Error::config("need at least one iteration"));
        }
        if !(0.0..1.0).contains(&self.gain_floor) {
            return Err(Error::config(format!(
                "gain floor {} must be in [0, 1)",
                self.gain_floor
            )));
        }
        Ok(())
    }
}

/// Shifted, unit-normalized copies of the known training waveform, one per
/// candidate delay.
pub struct OmpDictionary {
    /// `columns[j]` = replica placed at offset `j`, truncated to the window
    /// and scaled to unit norm.
    columns: Vec<ComplexVec>,
    window_len: usize,
}

impl OmpDictionary {
    pub fn build(cfg: &OfdmConfig, search_max: usize) -> Result<Self> {
        let replica = training_symbol(cfg)?;
        let window_len = cfg.m();
        if search_max >= window_len {
            return Err(Error::config(format!(
                "search range {search_max} exceeds the window {window_len}"
            )));
        }
        let columns = (0..=search_max)
            .map(|j| {
                let take = replica.len().min(window_len - j);
                let norm: f64 = replica[..take].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                replica[..take].iter().map(|v| v / norm).collect()
            })
            .collect();
        Ok(OmpDictionary { columns, window_len })
    }

    pub fn num_delays(&self) -> usize {
        self.columns.len()
    }

    fn correlate(&self, j: usize, residual: &[Complex64]) -> Complex64 {
        self.columns[j]
            .iter()
            .zip(&residual[j..])
            .map(|(c, r)| c.conj() * r)
            .sum()
    }

    fn subtract_scaled(&self, j: usize, gain: Complex64, target: &mut [Complex64]) {
        for (t, c) in target[j..].iter_mut().zip(&self.columns[j]) {
            *t -= gain * c;
        }
    }

    /// Gram entry `col_a^H col_b` accounting for the column offsets.
    fn gram(&self, a: usize, b: usize) -> Complex64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let shift = hi - lo;
        let lo_col = &self.columns[lo];
        let hi_col = &self.columns[hi];
        let overlap = lo_col.len().saturating_sub(shift).min(hi_col.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..overlap {
            acc += lo_col[shift + k].conj() * hi_col[k];
        }
        if a <= b {
            acc
        } else {
            acc.conj()
        }
    }
}

/// Solves the support least-squares through the normal equations with
/// partial pivoting; a vanishing pivot reports rank deficiency.
fn solve_support_ls(
    dict: &OmpDictionary,
    support: &[usize],
    window: &[Complex64],
) -> Result<Vec<Complex64>> {
    let s = support.len();
    let mut a = vec![Complex64::new(0.0, 0.0); s * s];
    let mut b = vec![Complex64::new(0.0, 0.0); s];
    for (i, &ji) in support.iter().enumerate() {
        for (k, &jk) in support.iter().enumerate() {
            a[i * s + k] = dict.gram(ji, jk);
        }
        b[i] = dict.correlate(ji, window);
    }
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for col in 0..s {
        let (pivot_row, pivot_mag) = (col..s)
            .map(|r| (r, a[r * s + col].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if pivot_mag < 1e-12 * scale {
            return Err(Error::usage("rank-deficient support"));
        }
        if pivot_row != col {
            for k in 0..s {
                a.swap(pivot_row * s + k, col * s + k);
            }
            b.swap(pivot_row, col);
        }
        let pivot = a[col * s + col];
        for r in col + 1..s {
            let factor = a[r * s + col] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for k in col..s {
                let sub = factor * a[col * s + k];
                a[r * s + k] -= sub;
            }
            let sub = factor * b[col];
            b[r] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); s];
    for row in (0..s).rev() {
        let mut acc = b[row];
        for k in row + 1..s {
            acc -= a[row * s + k] * x[k];
        }
        x[row] = acc / a[row * s + row];
    }
    Ok(x)
}

/// Greedy first-path search: select atoms by residual correlation, refit on
/// the support, then report the smallest delay whose |gain| clears the
/// floor.
pub fn omp_ts(window: &[Complex64], dict: &OmpDictionary, ocfg: &OmpConfig) -> usize {
    debug_assert_eq!(window.len(), dict.window_len);
    let mut residual = window.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut gains: Vec<Complex64> = Vec::new();
    let mut rejected = vec![false; dict.num_delays()];

    for _ in 0..ocfg.num_iterations {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..dict.num_delays() {
            if rejected[j] || support.contains(&j) {
                continue;
            }
            let score = dict.correlate(j, &residual).norm_sqr();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        match solve_support_ls(dict, &support, window) {
            Ok(g) => gains = g,
            Err(_) => {
                support.pop();
                rejected[j] = true;
                continue;
            }
        }
        residual.copy_from_slice(window);
        for (&atom, &gain) in support.iter().zip(&gains) {
            dict.subtract_scaled(atom, gain, &mut residual);
        }
    }

    let max_gain = gains.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let floor = ocfg.gain_floor * max_gain;
    support
        .iter()
        .zip(&gains)
        .filter(|(_, g)| g.norm() >= floor)
        .map(|(&j, _)| j)
        .min()
        .unwrap_or(0)
}

/// Residual energy after each refit; exposed for the monotonicity check.
#[cfg(test)]
fn omp_residual_energies(
    window: &[Complex64],
    dict: &OmpDictionary,
    ocfg: &OmpConfig,
) -> Vec<f64> {
    let mut residual = window.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut energies = vec![residual.iter().map(|v| v.norm_sqr()).sum::<f64>()];
    for _ in 0..ocfg.num_iterations {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..dict.num_delays() {
            if support.contains(&j) {
                continue;
            }
            let score = dict.correlate(j, &residual).norm_sqr();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        let Ok(gains) = solve_support_ls(dict, &support, window) else {
            support.pop();
            continue;
        };
        residual.copy_from_slice(window);
        for (&atom, &gain) in support.iter().zip(&gains) {
            dict.subtract_scaled(atom, gain, &mut residual);
        }
        energies.push(residual.iter().map(|v| v.norm_sqr()).sum::<f64>());
    }
    energies
}

/// Replica matched filter as a reusable estimator.
pub struct CrossCorrelator {
    replica: ComplexVec,
}

impl CrossCorrelator {
    pub fn new(cfg: &OfdmConfig) -> Result<Self> {
        Ok(CrossCorrelator { replica: training_symbol(cfg)? })
    }
}

impl TimingEstimator for CrossCorrelator {
    fn estimate(&self, window: &[Complex64]) -> isize {
        cross_corr_ts(window, &self.replica) as isize
    }

    fn name(&self) -> &'static str {
        "cross_corr"
    }
}

/// Prefix auto-correlation as a reusable estimator.
pub struct AutoCorrelator {
    cfg: OfdmConfig,
}

impl AutoCorrelator {
    pub fn new(cfg: &OfdmConfig) -> Self {
        AutoCorrelator { cfg: *cfg }
    }
}

impl TimingEstimator for AutoCorrelator {
    fn estimate(&self, window: &[Complex64]) -> isize {
        auto_corr_ts(window, &self.cfg) as isize
    }

    fn name(&self) -> &'static str {
        "auto_corr"
    }
}

/// Greedy sparse recovery as a reusable estimator.
pub struct OmpEstimator {
    dict: OmpDictionary,
    ocfg: OmpConfig,
}

impl OmpEstimator {
    pub fn new(cfg: &OfdmConfig, ocfg: OmpConfig) -> Result<Self> {
        ocfg.validate()?;
        Ok(OmpEstimator { dict: OmpDictionary::build(cfg, ocfg.search_max)?, ocfg })
    }
}

impl TimingEstimator for OmpEstimator {
    fn estimate(&self, window: &[Complex64]) -> isize {
        omp_ts(window, &self.dict, &self.ocfg) as isize
    }

    fn name(&self) -> &'static str {
        "omp"
    }
}
