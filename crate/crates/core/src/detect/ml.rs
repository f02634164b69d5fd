use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DetectionResult;
use crate::error::{GsmError, Result};
use crate::signal::{pattern_set, ActivationPattern, GsmConfig, DEFAULT_ENUMERATION_CAP};

/// Exhaustive minimum-distance detection over the signal set.
///
/// Candidates are visited in signal-set order (pattern-major, then symbol
/// labels with the lowest active antenna most significant), sharing partial
/// residuals along a depth-first walk. The first minimum wins ties.
#[derive(Debug, Clone)]
pub struct MlDetector {
    cfg: GsmConfig,
    patterns: Vec<ActivationPattern>,
}

impl MlDetector {
    pub fn new(cfg: &GsmConfig) -> Result<Self> {
        Self::with_cap(cfg, DEFAULT_ENUMERATION_CAP)
    }

    /// Fails when `|G|` exceeds `cap`.
    pub fn with_cap(cfg: &GsmConfig, cap: u64) -> Result<Self> {
        match cfg.signal_set_size() {
            Some(s) if s <= cap => {}
            _ => {
                return Err(GsmError::Infeasible(format!(
                    "ML detection infeasible: signal set exceeds cap {cap}"
                )))
            }
        }
        Ok(MlDetector {
            cfg: cfg.clone(),
            patterns: pattern_set(cfg)?,
        })
    }

    pub fn detect(&self, y: &DVector<Complex64>, h: &DMatrix<Complex64>) -> DetectionResult {
        let cfg = &self.cfg;
        let (m, n) = (cfg.m(), cfg.n());
        let r = cfg.r();
        let alphabet = cfg.alphabet();
        let q = alphabet.size();
        assert_eq!(h.shape(), (m, n), "channel shape");
        assert_eq!(y.len(), m, "observation length");
        let scale = cfg.symbol_scale();

        // contrib[(i * q + label) * m + j] = H_ji * scale * point(label)
        let mut contrib = vec![Complex64::default(); n * q * m];
        for i in 0..n {
            for label in 0..q {
                let s = alphabet.point(label) * scale;
                for j in 0..m {
                    contrib[(i * q + label) * m + j] = h[(j, i)] * s;
                }
            }
        }

        // residuals[d] = y - sum of the first d chosen contributions
        let mut residuals = vec![Complex64::default(); (r + 1) * m];
        residuals[..m].copy_from_slice(y.as_slice());
        let mut labels = vec![0usize; r];
        let mut best = f64::INFINITY;
        let mut best_pattern = 0usize;
        let mut best_labels = vec![0usize; r];

        for (pi, pattern) in self.patterns.iter().enumerate() {
            let idx = pattern.indices();
            // Iterative depth-first walk in lexicographic label order.
            let mut depth = 0usize;
            labels[0] = 0;
            loop {
                let i = idx[depth];
                let c = &contrib[(i * q + labels[depth]) * m..(i * q + labels[depth] + 1) * m];
                let (head, tail) = residuals.split_at_mut((depth + 1) * m);
                let parent = &head[depth * m..];
                let child = &mut tail[..m];
                for j in 0..m {
                    child[j] = parent[j] - c[j];
                }
                if depth + 1 < r {
                    depth += 1;
                    labels[depth] = 0;
                    continue;
                }
                let metric: f64 = child.iter().map(|v| v.norm_sqr()).sum();
                if metric < best {
                    best = metric;
                    best_pattern = pi;
                    best_labels.copy_from_slice(&labels);
                }
                // Advance to the next label sequence.
                loop {
                    labels[depth] += 1;
                    if labels[depth] < q {
                        break;
                    }
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                if labels[0] >= q {
                    break;
                }
            }
        }
        DetectionResult::new(self.patterns[best_pattern].clone(), best_labels, false, cfg)
    }
}
