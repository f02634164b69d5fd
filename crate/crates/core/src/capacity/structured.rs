//! Bounds for one channel realization that exploit the GSM covariance structure.
//!
//! Every covariance that appears in the bounds has the form
//! `Sigma(d) = sigma2 I + c H diag(d) H^H` with `c = sigma2_x / R` and
//! `d` in `[0, 1]^N`: `Phi_i = Sigma(1_S)`, `Phi_i + Phi_j = 2 Sigma((1_Si + 1_Sj) / 2)`,
//! and the moment-matched Gaussian uses `d = counts / L`.
//! `ln det Sigma(d)` is evaluated through whichever of three equivalent
//! Hermitian systems is smallest:
//!
//! - `Direct`: the `M x M` matrix itself;
//! - `Support`: `det(I + c/sigma2 D^1/2 G D^1/2)` on `supp(d)` with `G = H^H H`;
//! - `Complement`: `det Sigma(1) det(I - c E^1/2 K E^1/2)` on `supp(1 - d)` with
//!   `E = I - D` and `K = H^H Sigma(1)^-1 H`.

use std::f64::consts::{E, LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::mixture::LogSumExp;
use crate::combinadics::Combination;
use crate::error::{GsmError, Result};
use crate::linalg::{cholesky_in_place, forward_substitute, hermitian_logdet_in_place, logdet_from_factor};

/// Which linear system evaluates a log-determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogdetRoute {
    Direct,
    Support,
    Complement,
}

/// How the `L^2` pair sum in the Jensen bound is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSum {
    Exact,
    /// Mean over this many pairs drawn uniformly with replacement.
    Subsampled(u64),
}

/// Per-realization bounds on the output entropy `h(y)`, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsSample {
    pub l1: f64,
    pub l2: f64,
    pub u1: f64,
    pub u2: f64,
    /// `h(w) = M log2(pi e sigma2)`, subtracted to obtain capacity bounds.
    pub noise_entropy: f64,
}

impl BoundsSample {
    /// Capacity-scale values `(l1, l2, u1, u2)` with the noise entropy removed.
    pub fn capacity(&self) -> [f64; 4] {
        [self.l1, self.l2, self.u1, self.u2].map(|v| v - self.noise_entropy)
    }
}

/// Precomputed state for one `H` and one pattern set.
pub struct GsmMixture<'a> {
    h: &'a DMatrix<Complex64>,
    masks: Vec<u64>,
    r: usize,
    c: f64,
    sigma2: f64,
    gram: Vec<Complex64>,
    k_full: Vec<Complex64>,
    logdet_full: f64,
    forced: Option<LogdetRoute>,
}

impl<'a> GsmMixture<'a> {
    pub fn new(
        h: &'a DMatrix<Complex64>,
        patterns: &[Combination],
        sigma2_x: f64,
        sigma2: f64,
    ) -> Result<Self> {
        let (m, n) = h.shape();
        if n > 64 {
            return Err(GsmError::InvalidConfig("at most 64 transmit antennas".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(GsmError::InvalidConfig("capacity bounds need sigma2 > 0".into()));
        }
        if patterns.is_empty() {
            return Err(GsmError::InvalidConfig("empty pattern set".into()));
        }
        let r = patterns[0].len();
        let c = sigma2_x / r as f64;
        let masks = patterns
            .iter()
            .map(|p| p.as_slice().iter().fold(0u64, |acc, &i| acc | 1 << i))
            .collect();

        // G = H^H H, row-major N x N.
        let hh = h.adjoint() * h;
        let gram = crate::linalg::to_row_major(&hh);

        // Sigma(1) = sigma2 I + c H H^H, factor L; K = (L^-1 H)^H (L^-1 H).
        let mut full = crate::linalg::to_row_major(&(h * h.adjoint() * Complex64::new(c, 0.0)));
        for j in 0..m {
            full[j * m + j] += sigma2;
        }
        cholesky_in_place(&mut full, m)?;
        let logdet_full = logdet_from_factor(&full, m);
        let mut w = DMatrix::<Complex64>::zeros(m, n);
        let mut col = vec![Complex64::default(); m];
        for j in 0..n {
            col.copy_from_slice(h.column(j).as_slice());
            forward_substitute(&full, m, &mut col);
            w.column_mut(j).copy_from_slice(&col);
        }
        let k_full = crate::linalg::to_row_major(&(w.adjoint() * &w));

        Ok(GsmMixture {
            h,
            masks,
            r,
            c,
            sigma2,
            gram,
            k_full,
            logdet_full,
            forced: None,
        })
    }

    /// Pins every log-determinant to one route (for cross-checking routes).
    pub fn force_route(mut self, route: LogdetRoute) -> Self {
        self.forced = Some(route);
        self
    }

    pub fn num_patterns(&self) -> usize {
        self.masks.len()
    }

    fn m(&self) -> usize {
        self.h.nrows()
    }

    fn n(&self) -> usize {
        self.h.ncols()
    }

    /// `h(w)` in bits.
    pub fn noise_entropy(&self) -> f64 {
        self.m() as f64 * (PI * E * self.sigma2).log2()
    }

    /// `ln det Sigma(d)`, `d` given as per-antenna weights in `[0, 1]`.
    pub fn logdet(&self, d: &[f64], scratch: &mut Vec<Complex64>) -> Result<f64> {
        let n = self.n();
        let mut support = [0usize; 64];
        let mut support_w = [0f64; 64];
        let mut ns = 0;
        let mut complement = [0usize; 64];
        let mut complement_w = [0f64; 64];
        let mut nc = 0;
        for (i, &di) in d.iter().enumerate().take(n) {
            if di > 0.0 {
                support[ns] = i;
                support_w[ns] = di.sqrt();
                ns += 1;
            }
            if di < 1.0 {
                complement[nc] = i;
                complement_w[nc] = (1.0 - di).sqrt();
                nc += 1;
            }
        }
        let route = self.forced.unwrap_or_else(|| {
            let m = self.m();
            if nc <= ns && nc < m {
                LogdetRoute::Complement
            } else if ns < m {
                LogdetRoute::Support
            } else {
                LogdetRoute::Direct
            }
        });
        match route {
            LogdetRoute::Direct => self.logdet_direct(d, scratch),
            LogdetRoute::Support => self.logdet_support(&support[..ns], &support_w[..ns], scratch),
            LogdetRoute::Complement => {
                self.logdet_complement(&complement[..nc], &complement_w[..nc], scratch)
            }
        }
    }

    fn logdet_direct(&self, d: &[f64], scratch: &mut Vec<Complex64>) -> Result<f64> {
        let m = self.m();
        scratch.clear();
        scratch.resize(m * m, Complex64::default());
        for a in 0..m {
            for b in 0..=a {
                let mut s = Complex64::default();
                for (k, &dk) in d.iter().enumerate() {
                    if dk > 0.0 {
                        s += self.h[(a, k)] * self.h[(b, k)].conj() * dk;
                    }
                }
                scratch[a * m + b] = s * self.c;
            }
            scratch[a * m + a] += self.sigma2;
        }
        hermitian_logdet_in_place(scratch, m)
    }

    fn logdet_support(&self, idx: &[usize], sqrt_w: &[f64], scratch: &mut Vec<Complex64>) -> Result<f64> {
        let k = idx.len();
        let n = self.n();
        let ratio = self.c / self.sigma2;
        scratch.clear();
        scratch.resize(k * k, Complex64::default());
        for a in 0..k {
            for b in 0..=a {
                let g = self.gram[idx[a] * n + idx[b]];
                scratch[a * k + b] = g * (ratio * sqrt_w[a] * sqrt_w[b]);
            }
            scratch[a * k + a] += 1.0;
        }
        let base = self.m() as f64 * self.sigma2.ln();
        Ok(base + hermitian_logdet_in_place(scratch, k)?)
    }

    fn logdet_complement(&self, idx: &[usize], sqrt_w: &[f64], scratch: &mut Vec<Complex64>) -> Result<f64> {
        let k = idx.len();
        let n = self.n();
        scratch.clear();
        scratch.resize(k * k, Complex64::default());
        for a in 0..k {
            for b in 0..=a {
                let kk = self.k_full[idx[a] * n + idx[b]];
                scratch[a * k + b] = -kk * (self.c * sqrt_w[a] * sqrt_w[b]);
            }
            scratch[a * k + a] += 1.0;
        }
        Ok(self.logdet_full + hermitian_logdet_in_place(scratch, k)?)
    }

    fn weights_single(&self, mask: u64) -> [f64; 64] {
        let mut d = [0.0; 64];
        for (i, di) in d.iter_mut().enumerate().take(self.n()) {
            *di = ((mask >> i) & 1) as f64;
        }
        d
    }

    fn weights_pair(&self, a: u64, b: u64) -> [f64; 64] {
        let mut d = [0.0; 64];
        for (i, di) in d.iter_mut().enumerate().take(self.n()) {
            *di = (((a >> i) & 1) + ((b >> i) & 1)) as f64 * 0.5;
        }
        d
    }

    /// `ln det Phi_i` for every pattern.
    pub fn component_logdets(&self) -> Result<Vec<f64>> {
        let mut scratch = Vec::new();
        self.masks
            .iter()
            .map(|&mask| self.logdet(&self.weights_single(mask)[..self.n()], &mut scratch))
            .collect()
    }

    /// Concavity lower bound on `h(y)`, bits.
    pub fn l2(&self) -> Result<f64> {
        let logdets = self.component_logdets()?;
        Ok(self.l2_from(&logdets))
    }

    fn l2_from(&self, logdets: &[f64]) -> f64 {
        let m = self.m() as f64;
        let mean = logdets.iter().sum::<f64>() / logdets.len() as f64;
        mean / LN_2 + m * (PI * E).log2()
    }

    /// `l2 + log2 L`.
    pub fn u1(&self) -> Result<f64> {
        Ok(self.l2()? + (self.num_patterns() as f64).log2())
    }

    /// Moment-matched Gaussian upper bound on `h(y)`, bits.
    pub fn u2(&self) -> Result<f64> {
        let n = self.n();
        let l = self.num_patterns() as f64;
        let mut d = vec![0.0; n];
        for &mask in &self.masks {
            for (i, di) in d.iter_mut().enumerate() {
                *di += ((mask >> i) & 1) as f64;
            }
        }
        for di in &mut d {
            *di /= l;
        }
        let logdet = self.logdet(&d, &mut Vec::new())?;
        Ok(logdet / LN_2 + self.m() as f64 * (PI * E).log2())
    }

    /// Jensen lower bound on `h(y)`, bits.
    pub fn l1<R: Rng + ?Sized>(&self, sum: PairSum, rng: &mut R) -> Result<f64> {
        let l = self.num_patterns();
        let m = self.m() as f64;
        let pair_base = m * LN_2;
        let mut scratch = Vec::new();
        // ln sum_ij exp(-ln det(Phi_i + Phi_j)) - 2 ln L
        let log_mean = match sum {
            PairSum::Exact => {
                let mut acc = LogSumExp::default();
                for i in 0..l {
                    for j in i..l {
                        let d = self.weights_pair(self.masks[i], self.masks[j]);
                        let t = -(pair_base + self.logdet(&d[..self.n()], &mut scratch)?);
                        acc.push(t, if i == j { 1.0 } else { 2.0 });
                    }
                }
                acc.value() - 2.0 * (l as f64).ln()
            }
            PairSum::Subsampled(count) => {
                let mut acc = LogSumExp::default();
                for _ in 0..count {
                    let i = rng.random_range(0..l);
                    let j = rng.random_range(0..l);
                    let d = self.weights_pair(self.masks[i], self.masks[j]);
                    acc.push(-(pair_base + self.logdet(&d[..self.n()], &mut scratch)?), 1.0);
                }
                acc.value() - (count as f64).ln()
            }
        };
        Ok(-(log_mean - m * PI.ln()) / LN_2)
    }

    /// All four bounds for this realization.
    pub fn sample<R: Rng + ?Sized>(&self, sum: PairSum, rng: &mut R) -> Result<BoundsSample> {
        let logdets = self.component_logdets()?;
        let l2 = self.l2_from(&logdets);
        Ok(BoundsSample {
            l1: self.l1(sum, rng)?,
            l2,
            u1: l2 + (self.num_patterns() as f64).log2(),
            u2: self.u2()?,
            noise_entropy: self.noise_entropy(),
        })
    }

    pub fn pattern_size(&self) -> usize {
        self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::mixture::{bound_l1, bound_l2, bound_u1, bound_u2, mixture_covariances};
    use crate::channel::{sample_channel, RngStream};
    use crate::signal::full_pattern_set;

    fn setup(m: usize, n: usize, r: usize, seed: u64) -> (DMatrix<Complex64>, Vec<Combination>) {
        let h = sample_channel(m, n, &mut RngStream::new(seed, 0).rng()).h;
        let pats = full_pattern_set(n, r).unwrap();
        let l = 1usize << (63 - (pats.len() as u64).leading_zeros());
        (h, pats[..l].to_vec())
    }

    #[test]
    fn routes_agree_with_direct_matrices() {
        let mut rng = RngStream::new(1, 1).rng();
        for (m, n, r) in [(1, 4, 2), (3, 6, 2), (4, 6, 5), (6, 5, 3), (2, 8, 7)] {
            let (h, pats) = setup(m, n, r, (m * 100 + n * 10 + r) as u64);
            for sigma2 in [1.0, 0.01] {
                let mix = mixture_covariances(&h, &pats, 1.0, sigma2);
                let l1 = bound_l1(&mix).unwrap();
                let l2 = bound_l2(&mix).unwrap();
                let u1 = bound_u1(&mix).unwrap();
                let u2 = bound_u2(&h, &pats, 1.0, sigma2).unwrap();
                for route in [None, Some(LogdetRoute::Direct), Some(LogdetRoute::Support), Some(LogdetRoute::Complement)] {
                    let mut gm = GsmMixture::new(&h, &pats, 1.0, sigma2).unwrap();
                    if let Some(route) = route {
                        gm = gm.force_route(route);
                    }
                    let s = gm.sample(PairSum::Exact, &mut rng).unwrap();
                    for (got, want) in [(s.l1, l1), (s.l2, l2), (s.u1, u1), (s.u2, u2)] {
                        assert!(
                            (got - want).abs() < 1e-9 * want.abs().max(1.0),
                            "({m},{n},{r}) {route:?}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn per_realization_ordering() {
        let mut rng = RngStream::new(2, 0).rng();
        for seed in 0..30u64 {
            let m = 1 + (seed as usize % 3);
            let n = 3 + (seed as usize % 5);
            let r = 1 + (seed as usize % n);
            let (h, pats) = setup(m, n, r, seed);
            let gm = GsmMixture::new(&h, &pats, 1.0, 10f64.powf(-(seed as f64) / 3.0)).unwrap();
            let s = gm.sample(PairSum::Exact, &mut rng).unwrap();
            let log_l = (pats.len() as f64).log2();
            assert!((s.u1 - s.l2 - log_l).abs() < 1e-12 * s.u1.abs().max(1.0));
            let lower = s.l1.max(s.l2);
            let upper = s.u1.min(s.u2);
            assert!(lower <= upper + 1e-9, "seed {seed}: {s:?}");
            assert!(s.l1 <= s.u1 + 1e-9 && s.l1 <= s.u2 + 1e-9 && s.l2 <= s.u2 + 1e-9);
        }
    }

    #[test]
    fn subsampled_pairs_approximate_exact() {
        let (h, pats) = setup(2, 8, 4, 5);
        let gm = GsmMixture::new(&h, &pats, 1.0, 0.1).unwrap();
        let mut rng = RngStream::new(5, 1).rng();
        let exact = gm.l1(PairSum::Exact, &mut rng).unwrap();
        let approx = gm.l1(PairSum::Subsampled(20_000), &mut rng).unwrap();
        assert!((exact - approx).abs() < 0.02, "{exact} vs {approx}");
    }

    #[test]
    fn requires_positive_noise() {
        let (h, pats) = setup(2, 4, 2, 1);
        assert!(GsmMixture::new(&h, &pats, 1.0, 0.0).is_err());
    }
}
