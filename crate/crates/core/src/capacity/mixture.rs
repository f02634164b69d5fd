use std::f64::consts::{E, LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::combinadics::Combination;
use crate::error::{GsmError, Result};
use crate::linalg::hermitian_logdet;

/// Zero-mean Gaussian mixture describing `y` for one channel realization.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    pub covariances: Vec<DMatrix<Complex64>>,
    pub weights: Vec<f64>,
}

impl MixtureParams {
    /// Equal-weight mixture.
    pub fn uniform(covariances: Vec<DMatrix<Complex64>>) -> Self {
        let l = covariances.len();
        MixtureParams {
            covariances,
            weights: vec![1.0 / l as f64; l],
        }
    }

    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariances[0].nrows()
    }

    fn check(&self) -> Result<()> {
        if self.covariances.is_empty() || self.covariances.len() != self.weights.len() {
            return Err(GsmError::InvalidConfig(
                "mixture needs one weight per component".into(),
            ));
        }
        Ok(())
    }

    /// `-sum p_i log2 p_i`.
    pub fn weight_entropy(&self) -> f64 {
        self.weights
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }
}

/// `Phi_i = (sigma2_x / R) H_S H_S^H + sigma2 I` for each pattern support `S`.
pub fn mixture_covariances(
    h: &DMatrix<Complex64>,
    patterns: &[Combination],
    sigma2_x: f64,
    sigma2: f64,
) -> MixtureParams {
    let m = h.nrows();
    let covs = patterns
        .iter()
        .map(|p| {
            let r = p.len();
            let hs = h.select_columns(p.as_slice());
            let scale = Complex64::new(sigma2_x / r as f64, 0.0);
            &hs * hs.adjoint() * scale + DMatrix::identity(m, m) * Complex64::new(sigma2, 0.0)
        })
        .collect();
    MixtureParams::uniform(covs)
}

/// `ln(sum exp(x))` without overflow.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSumExp::default();
    for x in xs {
        acc.push(x, 1.0);
    }
    acc.value()
}

/// Streaming `ln(sum w_k exp(x_k))`.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub fn push(&mut self, x: f64, weight: f64) {
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + weight;
            self.max = x;
        } else {
            self.scaled += weight * (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.push(other.max, other.scaled);
    }

    pub fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// Jensen lower bound on `h(y)` in bits: `-log2 sum_ij p_i p_j / (pi^M det(Phi_i + Phi_j))`.
pub fn bound_l1(mix: &MixtureParams) -> Result<f64> {
    mix.check()?;
    let m = mix.dim() as f64;
    let mut acc = LogSumExp::default();
    for (i, (phi_i, &p_i)) in mix.covariances.iter().zip(&mix.weights).enumerate() {
        for (phi_j, &p_j) in mix.covariances[i..].iter().zip(&mix.weights[i..]) {
            let logdet = hermitian_logdet(&(phi_i + phi_j))?;
            let w = if std::ptr::eq(phi_i, phi_j) { 1.0 } else { 2.0 };
            acc.push((p_i * p_j).ln() - logdet, w);
        }
    }
    Ok(-(acc.value() - m * PI.ln()) / LN_2)
}

/// Concavity lower bound on `h(y)` in bits: `sum_i p_i log2 det(pi e Phi_i)`.
pub fn bound_l2(mix: &MixtureParams) -> Result<f64> {
    mix.check()?;
    let m = mix.dim() as f64;
    let mut total = 0.0;
    for (phi, &p) in mix.covariances.iter().zip(&mix.weights) {
        total += p * (hermitian_logdet(phi)? / LN_2 + m * (PI * E).log2());
    }
    Ok(total)
}

/// `h(y | A) + H(A)` upper bound on `h(y)` in bits.
pub fn bound_u1(mix: &MixtureParams) -> Result<f64> {
    Ok(bound_l2(mix)? + mix.weight_entropy())
}

/// Gaussian maximum-entropy upper bound on `h(y)` in bits, from the patterns
/// actually used: `log2 det(pi e Phi')` with
/// `Phi' = sigma2_x / (R L) H (sum_i D_i) H^H + sigma2 I`.
pub fn bound_u2(
    h: &DMatrix<Complex64>,
    patterns: &[Combination],
    sigma2_x: f64,
    sigma2: f64,
) -> Result<f64> {
    if patterns.is_empty() {
        return Err(GsmError::InvalidConfig("empty pattern set".into()));
    }
    let (m, n) = h.shape();
    let r = patterns[0].len() as f64;
    let l = patterns.len() as f64;
    let mut counts = vec![0.0; n];
    for p in patterns {
        for &i in p.as_slice() {
            counts[i] += 1.0;
        }
    }
    let mut scaled = h.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new((sigma2_x * counts[j] / (r * l)).sqrt(), 0.0);
    }
    let phi = &scaled * scaled.adjoint() + DMatrix::identity(m, m) * Complex64::new(sigma2, 0.0);
    Ok(hermitian_logdet(&phi)? / LN_2 + m as f64 * (PI * E).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, Complex64::new(v, 0.0))
    }

    #[test]
    fn single_component_closed_forms() {
        let s2 = 0.7;
        let mix = MixtureParams::uniform(vec![scalar(s2)]);
        let l2 = bound_l2(&mix).unwrap();
        assert!((l2 - (PI * E * s2).log2()).abs() < 1e-12);
        assert_eq!(bound_u1(&mix).unwrap(), l2);
        // L = 1: l1 = M log2(2 pi) + log2 det Phi
        let l1 = bound_l1(&mix).unwrap();
        assert!((l1 - ((2.0 * PI).log2() + s2.log2())).abs() < 1e-12);
    }

    #[test]
    fn two_scalar_components() {
        let (a, b) = (0.5, 3.0);
        let mix = MixtureParams::uniform(vec![scalar(a), scalar(b)]);
        let want = -((1.0 / (4.0 * PI)) * (1.0 / (2.0 * a) + 2.0 / (a + b) + 1.0 / (2.0 * b))).log2();
        assert!((bound_l1(&mix).unwrap() - want).abs() < 1e-12);
        let l2 = bound_l2(&mix).unwrap();
        assert!((bound_u1(&mix).unwrap() - l2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + LN_2)).abs() < 1e-12);
        let w = log_sum_exp([-1000.0, -1001.0, -1002.0]);
        let direct = -1000.0 + (1.0 + (-1.0f64).exp() + (-2.0f64).exp()).ln();
        assert!((w - direct).abs() < 1e-12);
        let mut a = LogSumExp::default();
        a.push(0.5, 1.0);
        let mut b = LogSumExp::default();
        b.push(2.0, 3.0);
        a.merge(b);
        assert!((a.value() - (0.5f64.exp() + 3.0 * 2.0f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_pd() {
        let mix = MixtureParams::uniform(vec![scalar(-1.0)]);
        assert!(matches!(bound_l2(&mix), Err(GsmError::NotPositiveDefinite { .. })));
    }
}
