//! Experiment engine: BER and capacity sweeps, required-SNR search, CSV output.
//!
//! Every frame (one channel use with its own channel, bits and noise) draws
//! from `RngStream(seed, frame)`, and frames are tallied in index order, so
//! results do not depend on the number of worker threads.

mod config;
mod output;

pub use config::{
    parse_m_grid, resolve_threads, with_threads, ConfigFile, ExperimentConfig, SnrGrid, StopRule,
    THREADS_ENV,
};
pub use output::{write_ber_csv, write_capacity_csv, write_required_snr_csv};

use rand::Rng;
use rayon::prelude::*;

use crate::capacity::{capacity_sweep, mc_mutual_information, CapacityBounds, Estimate};
use crate::channel::{sample_channel, transmit, RngStream};
use crate::combinadics::BitBlock;
use crate::detect::Detector;
use crate::error::{GsmError, Result};
use crate::signal::{encode, GsmConfig};

/// Frames simulated per parallel batch.
const BATCH: u64 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub bounds: CapacityBounds,
    pub mc: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequiredSnrRow {
    pub m: usize,
    /// `None` when the target is not met anywhere in the search range.
    pub snr_db: Option<f64>,
    /// BER measured at `snr_db`.
    pub ber: Option<f64>,
}

/// Bit and frame errors of frame `index`.
fn simulate_frame(
    system: &GsmConfig,
    detector: &Detector,
    seed: u64,
    index: u64,
) -> Result<(u64, bool)> {
    let mut rng = RngStream::new(seed, index).rng();
    let bits = BitBlock::new((0..system.eta()).map(|_| rng.random::<bool>()).collect());
    let x = encode(&bits, system)?;
    let channel = sample_channel(system.m(), system.n(), &mut rng);
    let y = transmit(&channel, &x, system.sigma2(), &mut rng);
    let decided = detector.detect(&y, &channel.h, system.sigma2())?;
    let errors = bits.hamming(&decided.bits) as u64;
    Ok((errors, errors > 0))
}

/// BER at one SNR under the stop rule.
pub fn ber_point(cfg: &ExperimentConfig, snr_db: f64) -> Result<BerRow> {
    let system = cfg.system.clone().with_snr_db(snr_db);
    let detector = Detector::new(cfg.detector, &system)?;
    let eta = system.eta() as u64;
    let (mut frames, mut bit_errors, mut frame_errors) = (0u64, 0u64, 0u64);
    'outer: while frames < cfg.stop.max_frames {
        let end = (frames + BATCH).min(cfg.stop.max_frames);
        let batch: Vec<(u64, bool)> = (frames..end)
            .into_par_iter()
            .map(|f| simulate_frame(&system, &detector, cfg.seed, f))
            .collect::<Result<_>>()?;
        for (errors, frame_error) in batch {
            frames += 1;
            bit_errors += errors;
            frame_errors += frame_error as u64;
            if bit_errors >= cfg.stop.min_bit_errors {
                break 'outer;
            }
        }
    }
    Ok(BerRow {
        snr_db,
        frames,
        bit_errors,
        frame_errors,
        ber: bit_errors as f64 / (frames * eta) as f64,
    })
}

/// One [`BerRow`] per grid point. Infeasible detector/size combinations fail
/// before any frame is simulated.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<BerRow>> {
    Detector::new(cfg.detector, &cfg.system)?;
    cfg.snr_grid
        .points()
        .iter()
        .map(|&snr| ber_point(cfg, snr))
        .collect()
}

/// Channel-averaged capacity bounds (and optionally the Monte Carlo estimate)
/// on the grid, with channels shared across SNR points.
pub fn run_capacity(cfg: &ExperimentConfig) -> Result<Vec<CapacityRow>> {
    let grid = cfg.snr_grid.points();
    let bounds = capacity_sweep(&cfg.system, grid, cfg.channels, &cfg.bounds, cfg.seed)?;
    bounds
        .into_iter()
        .map(|b| {
            let mc = if cfg.mc_samples > 0 {
                Some(mc_mutual_information(
                    &cfg.system,
                    b.snr_db,
                    cfg.channels,
                    cfg.mc_samples,
                    &cfg.bounds,
                    cfg.seed,
                )?)
            } else {
                None
            };
            Ok(CapacityRow { bounds: b, mc })
        })
        .collect()
}

/// Smallest SNR (to within `cfg.resolution_db`) in `cfg.snr_range` where the
/// BER is at or below `target`, found by bisection. Returns the range
/// minimum when the target already holds there.
pub fn required_snr(cfg: &ExperimentConfig, target: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = cfg.snr_range;
    let at_lo = ber_point(cfg, lo)?;
    if at_lo.ber <= target {
        return Ok((lo, at_lo.ber));
    }
    let mut at_hi = ber_point(cfg, hi)?;
    if at_hi.ber > target {
        return Err(GsmError::TargetUnreachable {
            target,
            lo,
            hi,
        });
    }
    while hi - lo > cfg.resolution_db {
        let mid = snap(0.5 * (lo + hi), cfg.resolution_db);
        if mid <= lo || mid >= hi {
            break;
        }
        let row = ber_point(cfg, mid)?;
        if row.ber <= target {
            hi = mid;
            at_hi = row;
        } else {
            lo = mid;
        }
    }
    Ok((hi, at_hi.ber))
}

fn snap(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Required SNR for each receive-antenna count in `cfg.m_grid`.
pub fn find_required_snr(cfg: &ExperimentConfig) -> Result<Vec<RequiredSnrRow>> {
    cfg.m_grid
        .iter()
        .map(|&m| {
            let system = GsmConfig::new(cfg.system.n(), m, cfg.system.r(), cfg.system.alphabet().clone())?
                .with_powers(cfg.system.sigma2_x(), cfg.system.sigma2())?;
            let per_m = ExperimentConfig {
                system,
                ..cfg.clone()
            };
            match required_snr(&per_m, cfg.target_ber) {
                Ok((snr, ber)) => Ok(RequiredSnrRow {
                    m,
                    snr_db: Some(snr),
                    ber: Some(ber),
                }),
                Err(GsmError::TargetUnreachable { .. }) => {
                    log::warn!("M={m}: target BER {} unreachable in range", cfg.target_ber);
                    Ok(RequiredSnrRow {
                        m,
                        snr_db: None,
                        ber: None,
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{DetectorKind, LampConfig};
    use crate::signal::Alphabet;

    fn experiment(detector: DetectorKind, grid: &str) -> ExperimentConfig {
        let system = GsmConfig::new(4, 4, 2, Alphabet::bpsk()).unwrap();
        let mut cfg = ExperimentConfig::new(system, grid.parse().unwrap(), detector);
        cfg.stop = StopRule {
            min_bit_errors: 100,
            max_frames: 20_000,
        };
        cfg
    }

    #[test]
    fn high_snr_ml_is_error_free() {
        let mut cfg = experiment(DetectorKind::Ml, "200");
        cfg.stop.max_frames = 10_000;
        let rows = run_ber(&cfg).unwrap();
        assert_eq!(rows[0].bit_errors, 0);
        assert_eq!(rows[0].frames, 10_000);
    }

    #[test]
    fn stop_rule_is_honoured() {
        let cfg = experiment(DetectorKind::Mmse, "0:5:10");
        for row in run_ber(&cfg).unwrap() {
            assert!(row.bit_errors >= cfg.stop.min_bit_errors || row.frames == cfg.stop.max_frames);
            assert!((0.0..=1.0).contains(&row.ber));
        }
    }

    #[test]
    fn ber_independent_of_thread_count() {
        let cfg = experiment(DetectorKind::Lamp(LampConfig::default()), "0,6");
        let one = with_threads(Some(1), || run_ber(&cfg)).unwrap().unwrap();
        let three = with_threads(Some(3), || run_ber(&cfg)).unwrap().unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn infeasible_ml_fails_up_front() {
        let system = GsmConfig::new(32, 32, 16, "4qam".parse().unwrap()).unwrap();
        let cfg = ExperimentConfig::new(system, "0".parse().unwrap(), DetectorKind::Ml);
        assert!(matches!(run_ber(&cfg), Err(GsmError::Infeasible(_))));
    }

    #[test]
    fn ber_matches_standalone_simulator() {
        // A separate loop with its own streams and a dense brute-force detector.
        let snr = 4.0;
        let cfg = experiment(DetectorKind::Ml, "4");
        let ours = run_ber(&cfg).unwrap()[0].clone();

        let system = cfg.system.clone().with_snr_db(snr);
        let set = crate::signal::enumerate_signal_set(&system, 1 << 10).unwrap();
        let mut rng = RngStream::new(999, 0).rng();
        let (mut errors, mut bits_sent) = (0u64, 0u64);
        for _ in 0..20_000 {
            let k = rng.random_range(0..set.len());
            let x = &set[k];
            let ch = sample_channel(4, 4, &mut rng);
            let y = transmit(&ch, x, system.sigma2(), &mut rng);
            let best = (0..set.len())
                .min_by(|&a, &b| {
                    let da = (&y - &ch.h * set[a].to_dvector()).norm_squared();
                    let db = (&y - &ch.h * set[b].to_dvector()).norm_squared();
                    da.total_cmp(&db)
                })
                .unwrap();
            let sent = crate::signal::decode(x, &system).unwrap();
            let got = crate::signal::decode(&set[best], &system).unwrap();
            errors += sent.hamming(&got) as u64;
            bits_sent += system.eta() as u64;
        }
        let p = errors as f64 / bits_sent as f64;
        let q = ours.ber;
        let se = (p * (1.0 - p) / bits_sent as f64 + q * (1.0 - q) / (ours.frames * 4) as f64).sqrt();
        assert!((p - q).abs() < 3.0 * se, "{p} vs {q} (se {se})");
    }

    #[test]
    fn required_snr_degenerate_target() {
        let mut cfg = experiment(DetectorKind::Mmse, "0");
        cfg.snr_range = (-5.0, 30.0);
        cfg.target_ber = 1.0;
        let rows = find_required_snr(&cfg).unwrap();
        assert_eq!(rows[0].snr_db, Some(-5.0));
    }

    #[test]
    fn required_snr_unreachable() {
        let mut cfg = experiment(DetectorKind::Mmse, "0");
        cfg.snr_range = (-5.0, 0.0);
        cfg.target_ber = 1e-6;
        cfg.stop.max_frames = 2_000;
        assert!(matches!(
            required_snr(&cfg, 1e-6),
            Err(GsmError::TargetUnreachable { .. })
        ));
        assert_eq!(find_required_snr(&cfg).unwrap()[0].snr_db, None);
    }

    #[test]
    fn required_snr_bisection_brackets_target() {
        let mut cfg = experiment(DetectorKind::Ml, "0");
        cfg.snr_range = (0.0, 30.0);
        cfg.target_ber = 1e-2;
        let (snr, ber) = required_snr(&cfg, 1e-2).unwrap();
        assert!(ber <= 1e-2);
        assert!(ber_point(&cfg, snr - cfg.resolution_db).unwrap().ber > 1e-2 * 0.7);
        assert!((snr / cfg.resolution_db - (snr / cfg.resolution_db).round()).abs() < 1e-9);
    }

    #[test]
    fn capacity_rows_with_mc() {
        let system = GsmConfig::new(4, 2, 2, Alphabet::bpsk()).unwrap();
        let mut cfg = ExperimentConfig::new(system, "0,10".parse().unwrap(), DetectorKind::Ml);
        cfg.channels = 10;
        cfg.mc_samples = 200;
        let rows = run_capacity(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.mc.is_some()));
        assert!(rows[1].bounds.lower() > rows[0].bounds.lower());
    }
}
