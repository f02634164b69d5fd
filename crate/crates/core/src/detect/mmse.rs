use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{select_support, DetectionResult};
use crate::error::Result;
use crate::linalg::HermitianFactor;
use crate::signal::GsmConfig;

/// `z = (H^H H + I / snr)^-1 H^H y`.
///
/// With `inv_snr = 0` and a rank-deficient `H` the system is singular; the
/// minimum-norm least-squares solution is returned instead.
pub fn mmse_filter(y: &DVector<Complex64>, h: &DMatrix<Complex64>, inv_snr: f64) -> Result<DVector<Complex64>> {
    let n = h.ncols();
    let gram = h.adjoint() * h + DMatrix::<Complex64>::identity(n, n) * Complex64::new(inv_snr, 0.0);
    let rhs = h.adjoint() * y;
    match HermitianFactor::new(&gram) {
        Ok(f) => Ok(DVector::from_vec(f.solve(rhs.as_slice()))),
        Err(_) => {
            let svd = h.clone().svd(true, true);
            Ok(svd
                .solve(y, 1e-12)
                .map_err(|e| crate::error::GsmError::InvalidConfig(e.to_string()))?)
        }
    }
}

/// MMSE filter followed by projection onto the signal set: the `R` largest
/// `|z_i|` form the support (repaired if not allowed), and each kept entry is
/// rounded to the nearest alphabet point.
#[derive(Debug, Clone)]
pub struct MmseDetector {
    cfg: GsmConfig,
}

impl MmseDetector {
    pub fn new(cfg: &GsmConfig) -> Self {
        MmseDetector { cfg: cfg.clone() }
    }

    pub fn detect(&self, y: &DVector<Complex64>, h: &DMatrix<Complex64>, sigma2: f64) -> DetectionResult {
        let cfg = &self.cfg;
        let inv_snr = sigma2 / cfg.sigma2_x();
        let z = mmse_filter(y, h, inv_snr).expect("least-squares fallback cannot fail");
        let scores: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        let (pattern, repaired) = select_support(&scores, cfg);
        let scale = cfg.symbol_scale();
        let labels = pattern
            .indices()
            .iter()
            .map(|&i| cfg.alphabet().nearest(z[i] / scale))
            .collect();
        DetectionResult::new(pattern, labels, repaired, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal, sample_channel, transmit, RngStream};
    use crate::combinadics::BitBlock;
    use crate::signal::{encode, Alphabet};
    use rand::Rng;

    #[test]
    fn filter_matches_lu_solve() {
        for t in 0..50u64 {
            let mut rng = RngStream::new(31, t).rng();
            let h = sample_channel(8, 8, &mut rng).h;
            let y = DVector::from_fn(8, |_, _| complex_normal(&mut rng));
            let inv_snr = 10f64.powf(-(t as f64) / 10.0);
            let z = mmse_filter(&y, &h, inv_snr).unwrap();
            let a = h.adjoint() * &h + DMatrix::identity(8, 8) * Complex64::new(inv_snr, 0.0);
            let want = a.lu().solve(&(h.adjoint() * &y)).unwrap();
            assert!((&z - &want).norm() <= 1e-10 * want.norm().max(1.0), "trial {t}");
        }
    }

    #[test]
    fn noiseless_recovery_when_overdetermined() {
        for (n, m, r, a) in [(4, 4, 2, "bpsk"), (6, 8, 3, "4qam"), (8, 8, 4, "qam16")] {
            let cfg = GsmConfig::new(n, m, r, a.parse().unwrap()).unwrap();
            let det = MmseDetector::new(&cfg);
            for t in 0..200u64 {
                let mut rng = RngStream::new(6, t).rng();
                let ch = sample_channel(m, n, &mut rng);
                let bits = BitBlock::new((0..cfg.eta()).map(|_| rng.random()).collect());
                let x = encode(&bits, &cfg).unwrap();
                let y = transmit(&ch, &x, 0.0, &mut rng);
                assert_eq!(det.detect(&y, &ch.h, 0.0).bits, bits);
            }
        }
    }

    #[test]
    fn singular_noiseless_system_still_decides() {
        let cfg = GsmConfig::new(4, 2, 2, Alphabet::bpsk()).unwrap();
        let h = sample_channel(2, 4, &mut RngStream::new(1, 0).rng()).h;
        let y = DVector::from_element(2, Complex64::new(0.3, 0.1));
        let got = MmseDetector::new(&cfg).detect(&y, &h, 0.0);
        assert!(got.pattern.rank() < cfg.num_patterns());
        assert_eq!(got.bits.len(), cfg.eta());
    }
}
