//! Capacity bounds for GSM-MIMO with Gaussian symbols.
//!
//! Given `H`, the output `y` is an equal-weight mixture of zero-mean complex
//! Gaussians, one per activation pattern. Its differential entropy has no
//! closed form; it is bracketed by two lower bounds (Jensen on `-log p`,
//! concavity of entropy) and two upper bounds (`h(y, A)`, and the Gaussian
//! with matching covariance). Capacity bounds are these minus `h(w)`,
//! averaged over Rayleigh channels.

mod mixture;
mod structured;

pub use mixture::{
    bound_l1, bound_l2, bound_u1, bound_u2, log_sum_exp, mixture_covariances, LogSumExp,
    MixtureParams,
};
pub use structured::{BoundsSample, GsmMixture, LogdetRoute, PairSum};

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{complex_normal, sample_channel, RngStream};
use crate::combinadics::Combination;
use crate::error::{GsmError, Result};
use crate::linalg::HermitianFactor;
use crate::signal::{full_pattern_set, pattern_set, GsmConfig};

/// Stream tags layered on top of the per-channel stream.
const PAIR_SAMPLING_DOMAIN: u64 = 1;
const MC_SAMPLING_DOMAIN: u64 = 2;

/// Which activation patterns make up the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatternChoice {
    /// The `L = 2^eta_a` patterns the transmitter actually uses.
    #[default]
    Restricted,
    /// All `C(N, R)` subsets.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub patterns: PatternChoice,
    /// Largest number of ordered pattern pairs summed exactly for `L1`.
    pub pair_budget: u64,
    /// Above the budget: subsample `pair_budget` pairs instead of failing.
    pub subsample_pairs: bool,
    /// Largest mixture evaluated per sample by the Monte Carlo estimator.
    pub max_components: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            patterns: PatternChoice::Restricted,
            pair_budget: 1 << 22,
            subsample_pairs: false,
            max_components: 1 << 12,
        }
    }
}

/// The pattern supports selected by `choice`.
pub fn mixture_patterns(cfg: &GsmConfig, choice: PatternChoice) -> Result<Vec<Combination>> {
    match choice {
        PatternChoice::Restricted => Ok(pattern_set(cfg)?
            .into_iter()
            .map(|p| p.combination().clone())
            .collect()),
        PatternChoice::Full => full_pattern_set(cfg.n(), cfg.r()),
    }
}

fn pair_sum(num_patterns: usize, opts: &BoundOptions) -> Result<PairSum> {
    let pairs = (num_patterns as u128).pow(2);
    if pairs <= opts.pair_budget as u128 {
        Ok(PairSum::Exact)
    } else if opts.subsample_pairs {
        Ok(PairSum::Subsampled(opts.pair_budget))
    } else {
        Err(GsmError::Infeasible(format!(
            "L1 needs {pairs} pattern pairs, above the budget of {}",
            opts.pair_budget
        )))
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean and standard error of `values`, accumulated in the given order.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Estimate { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = compensated_sum(values.iter().copied()) / n;
        if values.len() < 2 {
            return Estimate { mean, stderr: 0.0 };
        }
        let var = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Channel-averaged capacity bounds at one SNR, in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityBounds {
    pub snr_db: f64,
    pub l1: Estimate,
    pub l2: Estimate,
    pub u1: Estimate,
    pub u2: Estimate,
    pub num_channels: usize,
    pub l1_subsampled: bool,
}

impl CapacityBounds {
    /// `max(L1, L2)`.
    pub fn lower(&self) -> f64 {
        self.l1.mean.max(self.l2.mean)
    }

    /// `min(U1, U2)`.
    pub fn upper(&self) -> f64 {
        self.u1.mean.min(self.u2.mean)
    }

    pub fn lower_stderr(&self) -> f64 {
        if self.l1.mean >= self.l2.mean { self.l1.stderr } else { self.l2.stderr }
    }

    pub fn upper_stderr(&self) -> f64 {
        if self.u1.mean <= self.u2.mean { self.u1.stderr } else { self.u2.stderr }
    }

    fn from_samples(snr_db: f64, samples: &[BoundsSample], subsampled: bool) -> Self {
        let column = |k: usize| {
            let v: Vec<f64> = samples.iter().map(|s| s.capacity()[k]).collect();
            Estimate::from_samples(&v)
        };
        CapacityBounds {
            snr_db,
            l1: column(0),
            l2: column(1),
            u1: column(2),
            u2: column(3),
            num_channels: samples.len(),
            l1_subsampled: subsampled,
        }
    }
}

/// Draws channel `index` of a run; the same index always gives the same `H`.
pub fn channel_for(cfg: &GsmConfig, seed: u64, index: u64) -> DMatrix<Complex64> {
    sample_channel(cfg.m(), cfg.n(), &mut RngStream::new(seed, index).rng()).h
}

/// Per-realization bounds for channel `index` at every SNR in `snr_grid_db`.
pub fn bounds_for_channel(
    cfg: &GsmConfig,
    patterns: &[Combination],
    snr_grid_db: &[f64],
    seed: u64,
    index: u64,
    sum: PairSum,
) -> Result<Vec<BoundsSample>> {
    let h = channel_for(cfg, seed, index);
    snr_grid_db
        .iter()
        .map(|&snr| {
            let cfg = cfg.clone().with_snr_db(snr);
            let gm = GsmMixture::new(&h, patterns, cfg.sigma2_x(), cfg.sigma2())?;
            let mut rng = RngStream::new(seed, index).domain(PAIR_SAMPLING_DOMAIN).rng();
            gm.sample(sum, &mut rng)
        })
        .collect()
}

/// Bounds averaged over `num_channels` realizations for each SNR.
///
/// Channels are shared across SNR points. Realizations run on the current
/// rayon pool; results are reduced in channel order so the output does not
/// depend on the number of threads.
pub fn capacity_sweep(
    cfg: &GsmConfig,
    snr_grid_db: &[f64],
    num_channels: usize,
    opts: &BoundOptions,
    seed: u64,
) -> Result<Vec<CapacityBounds>> {
    if num_channels == 0 {
        return Err(GsmError::InvalidConfig("need at least one channel".into()));
    }
    let patterns = mixture_patterns(cfg, opts.patterns)?;
    let sum = pair_sum(patterns.len(), opts)?;
    let per_channel: Vec<Vec<BoundsSample>> = (0..num_channels as u64)
        .into_par_iter()
        .map(|c| bounds_for_channel(cfg, &patterns, snr_grid_db, seed, c, sum))
        .collect::<Result<_>>()?;
    Ok(snr_grid_db
        .iter()
        .enumerate()
        .map(|(k, &snr)| {
            let samples: Vec<BoundsSample> = per_channel.iter().map(|v| v[k]).collect();
            CapacityBounds::from_samples(snr, &samples, matches!(sum, PairSum::Subsampled(_)))
        })
        .collect())
}

/// Bounds at a single SNR.
pub fn capacity_bounds(
    cfg: &GsmConfig,
    snr_db: f64,
    num_channels: usize,
    opts: &BoundOptions,
    seed: u64,
) -> Result<CapacityBounds> {
    Ok(capacity_sweep(cfg, &[snr_db], num_channels, opts, seed)?.remove(0))
}

/// Monte Carlo estimate of `h(y)` in bits for a fixed channel.
///
/// Draws a pattern uniformly, Gaussian symbols of variance `sigma2_x / R` and
/// noise, then averages `-log2 p(y)` with the exact mixture density.
pub fn mc_entropy<R: Rng + ?Sized>(
    h: &DMatrix<Complex64>,
    patterns: &[Combination],
    sigma2_x: f64,
    sigma2: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let m = h.nrows();
    let mix = mixture_covariances(h, patterns, sigma2_x, sigma2);
    let factors = mix
        .covariances
        .iter()
        .map(HermitianFactor::new)
        .collect::<Result<Vec<_>>>()?;
    let l = patterns.len();
    let log_norm: Vec<f64> = factors
        .iter()
        .map(|f| -(l as f64).ln() - m as f64 * PI.ln() - f.logdet())
        .collect();
    let symbol_sd = (sigma2_x / patterns[0].len() as f64).sqrt();
    let noise_sd = sigma2.sqrt();

    let mut y = vec![Complex64::default(); m];
    let mut scratch = vec![Complex64::default(); m];
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let k = rng.random_range(0..l);
        for yj in y.iter_mut() {
            *yj = complex_normal(rng) * noise_sd;
        }
        for &col in patterns[k].as_slice() {
            let s = complex_normal(rng) * symbol_sd;
            for (yj, hj) in y.iter_mut().zip(h.column(col).iter()) {
                *yj += hj * s;
            }
        }
        let mut acc = LogSumExp::default();
        for (f, &c) in factors.iter().zip(&log_norm) {
            acc.push(c - f.quad_form(&y, &mut scratch), 1.0);
        }
        values.push(-acc.value() / LN_2);
    }
    Ok(Estimate::from_samples(&values))
}

/// Monte Carlo estimate of the GSM capacity with standard error.
///
/// Uses the same channels as [`capacity_sweep`] for the same seed.
pub fn mc_mutual_information(
    cfg: &GsmConfig,
    snr_db: f64,
    num_channels: usize,
    samples_per_channel: usize,
    opts: &BoundOptions,
    seed: u64,
) -> Result<Estimate> {
    if num_channels == 0 || samples_per_channel == 0 {
        return Err(GsmError::InvalidConfig("need channels and samples".into()));
    }
    let patterns = mixture_patterns(cfg, opts.patterns)?;
    if patterns.len() > opts.max_components {
        return Err(GsmError::Infeasible(format!(
            "Monte Carlo entropy needs {} mixture components per sample, above {}",
            patterns.len(),
            opts.max_components
        )));
    }
    let cfg = cfg.clone().with_snr_db(snr_db);
    let noise_entropy = cfg.m() as f64 * (PI * std::f64::consts::E * cfg.sigma2()).log2();
    let per_channel: Vec<Estimate> = (0..num_channels as u64)
        .into_par_iter()
        .map(|c| {
            let h = channel_for(&cfg, seed, c);
            let mut rng = RngStream::new(seed, c).domain(MC_SAMPLING_DOMAIN).rng();
            mc_entropy(&h, &patterns, cfg.sigma2_x(), cfg.sigma2(), samples_per_channel, &mut rng)
        })
        .collect::<Result<_>>()?;
    if num_channels == 1 {
        let e = per_channel[0];
        return Ok(Estimate {
            mean: e.mean - noise_entropy,
            stderr: e.stderr,
        });
    }
    let values: Vec<f64> = per_channel.iter().map(|e| e.mean - noise_entropy).collect();
    Ok(Estimate::from_samples(&values))
}
