//! GSM detectors: exhaustive ML, MMSE with projection onto the signal set,
//! and layered message passing (LaMP).

mod lamp;
mod ml;
mod mmse;
pub mod phi;

pub use lamp::{interference_stats, LampConfig, LampDetector, LampState};
pub use ml::MlDetector;
pub use mmse::{mmse_filter, MmseDetector};
pub use phi::PhiMethod;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::combinadics::{rank_slice, BitBlock, Combination};
use crate::error::Result;
use crate::signal::{parts_to_bits, ActivationPattern, GsmConfig, GsmVector};

/// A hard decision: a valid pattern, one label per active antenna, and the bits.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub pattern: ActivationPattern,
    /// Alphabet labels in ascending antenna order.
    pub labels: Vec<usize>,
    /// Unit-energy alphabet points for `labels`.
    pub symbols: Vec<Complex64>,
    pub bits: BitBlock,
    /// The raw support was not an allowed pattern and had to be replaced.
    pub repaired: bool,
}

impl DetectionResult {
    pub fn new(pattern: ActivationPattern, labels: Vec<usize>, repaired: bool, cfg: &GsmConfig) -> Self {
        let symbols = labels.iter().map(|&l| cfg.alphabet().point(l)).collect();
        let bits = parts_to_bits(&pattern, &labels, cfg);
        DetectionResult {
            pattern,
            labels,
            symbols,
            bits,
            repaired,
        }
    }

    /// The detected transmit vector, with the transmit scaling applied.
    pub fn to_vector(&self, cfg: &GsmConfig) -> GsmVector {
        let scale = cfg.symbol_scale();
        let values: Vec<Complex64> = self.symbols.iter().map(|s| s * scale).collect();
        GsmVector::from_parts(&self.pattern, &values, cfg.n())
    }
}

/// Picks the `R` highest-scoring antennas and, if their rank is not an
/// allowed pattern, repairs the support.
///
/// Repair swaps the lowest-scoring selected antenna for the best unselected
/// antenna not yet tried, up to `N` times; if nothing valid turns up the
/// result is pattern 0. Ties in score go to the lower antenna index.
pub fn select_support(scores: &[f64], cfg: &GsmConfig) -> (ActivationPattern, bool) {
    let n = cfg.n();
    let r = cfg.r();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order[..r].to_vec();
    let allowed = cfg.num_patterns();
    let valid = |sel: &[usize]| {
        let mut s = sel.to_vec();
        s.sort_unstable();
        match rank_slice(&s) {
            Ok(rank) if rank < allowed => Some(s),
            _ => None,
        }
    };
    if let Some(s) = valid(&selected) {
        return (pattern_from(s, cfg), false);
    }
    let mut candidates = order[r..].iter().copied();
    for _ in 0..n {
        let Some(incoming) = candidates.next() else { break };
        let weakest = (0..r)
            .min_by(|&a, &b| {
                scores[selected[a]]
                    .total_cmp(&scores[selected[b]])
                    .then(selected[b].cmp(&selected[a]))
            })
            .expect("R >= 1");
        selected[weakest] = incoming;
        if let Some(s) = valid(&selected) {
            return (pattern_from(s, cfg), true);
        }
    }
    (
        ActivationPattern::from_rank(0, cfg).expect("rank 0 is always allowed"),
        true,
    )
}

fn pattern_from(sorted: Vec<usize>, cfg: &GsmConfig) -> ActivationPattern {
    let c = Combination::new(sorted).expect("distinct antennas");
    ActivationPattern::from_indices(c, cfg).expect("rank checked")
}

/// Which detector a run uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    Ml,
    Mmse,
    Lamp(LampConfig),
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Lamp(_) => "lamp",
        }
    }
}

/// A detector prepared for one system configuration.
#[derive(Debug, Clone)]
pub enum Detector {
    Ml(MlDetector),
    Mmse(MmseDetector),
    Lamp(LampDetector),
}

impl Detector {
    /// Fails up front when the configuration is infeasible for the detector.
    pub fn new(kind: DetectorKind, cfg: &GsmConfig) -> Result<Self> {
        Ok(match kind {
            DetectorKind::Ml => Detector::Ml(MlDetector::new(cfg)?),
            DetectorKind::Mmse => Detector::Mmse(MmseDetector::new(cfg)),
            DetectorKind::Lamp(lc) => Detector::Lamp(LampDetector::new(cfg, lc)?),
        })
    }

    /// Detects with noise variance `sigma2`, which may differ from the one in
    /// the configuration the detector was built with.
    pub fn detect(
        &self,
        y: &DVector<Complex64>,
        h: &DMatrix<Complex64>,
        sigma2: f64,
    ) -> Result<DetectionResult> {
        match self {
            Detector::Ml(d) => Ok(d.detect(y, h)),
            Detector::Mmse(d) => Ok(d.detect(y, h, sigma2)),
            Detector::Lamp(d) => Ok(d.detect(y, h, sigma2)),
        }
    }
}
