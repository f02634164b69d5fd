//! Distribution of the number of other active antennas.
//!
//! `q[i] = [P(a_i = 0), P(a_i = 1)]`. `phi_i` is the pmf of `sum_{l != i} a_l`
//! on `0..N`, the convolution of every Bernoulli factor except the `i`-th.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Method used for the leave-one-out convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PhiMethod {
    /// Full product once, then polynomial deflation per antenna.
    #[default]
    Deconvolution,
    /// Spectral product, divided by each factor's spectrum.
    Fft,
    /// Normal approximation of the sum; only the two needed masses.
    Gaussian,
}

impl std::str::FromStr for PhiMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "deconv" | "deconvolution" => Ok(PhiMethod::Deconvolution),
            "fft" => Ok(PhiMethod::Fft),
            "gauss" | "gaussian" => Ok(PhiMethod::Gaussian),
            other => Err(format!("unknown phi method '{other}' (expected deconv, fft or gauss)")),
        }
    }
}

impl std::fmt::Display for PhiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhiMethod::Deconvolution => "deconv",
            PhiMethod::Fft => "fft",
            PhiMethod::Gaussian => "gauss",
        })
    }
}

const MASS_TOLERANCE: f64 = 1e-6;
const SPECTRUM_GUARD: f64 = 1e-12;

/// Leave-one-out pmfs, plus whether any antenna needed a fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSet {
    pub phi: Vec<Vec<f64>>,
    pub fallback: bool,
}

/// Convolution of all factors: pmf of the total on `0..=N`.
pub fn full_convolution(q: &[[f64; 2]]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(q.len() + 1);
    acc.push(1.0);
    for qi in q {
        multiply_factor(&mut acc, *qi);
    }
    acc
}

fn multiply_factor(acc: &mut Vec<f64>, [q0, q1]: [f64; 2]) {
    acc.push(0.0);
    for k in (1..acc.len()).rev() {
        acc[k] = acc[k] * q0 + acc[k - 1] * q1;
    }
    acc[0] *= q0;
}

/// Direct `O(N^2)` convolution of every factor but `skip`.
pub fn leave_one_out_direct(q: &[[f64; 2]], skip: usize) -> Vec<f64> {
    let mut acc = Vec::with_capacity(q.len());
    acc.push(1.0);
    for (l, ql) in q.iter().enumerate() {
        if l != skip {
            multiply_factor(&mut acc, *ql);
        }
    }
    acc
}

/// Reference result by direct convolution for every antenna, `O(N^3)`.
pub fn phi_direct(q: &[[f64; 2]]) -> Vec<Vec<f64>> {
    (0..q.len()).map(|i| leave_one_out_direct(q, i)).collect()
}

fn clamp_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Divides `(q0 + q1 z)` out of `full` (degree `N`), giving degree `N - 1`.
///
/// Runs the recurrence from the low end when `q0 >= q1` and from the high end
/// otherwise, so each step multiplies the carried error by at most one.
fn deflate(full: &[f64], [q0, q1]: [f64; 2]) -> Vec<f64> {
    let n = full.len() - 1;
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if q0 >= q1 {
        out[0] = full[0] / q0;
        for k in 1..n {
            out[k] = (full[k] - q1 * out[k - 1]) / q0;
        }
    } else {
        out[n - 1] = full[n] / q1;
        for k in (1..n).rev() {
            out[k - 1] = (full[k] - q0 * out[k]) / q1;
        }
    }
    out
}

fn mass_ok(v: &[f64]) -> bool {
    v.iter()
        .all(|&x| x.is_finite() && x >= -MASS_TOLERANCE && x <= 1.0 + MASS_TOLERANCE)
}

/// Leave-one-out pmfs by deconvolving each factor from the full product.
///
/// Antennas whose deflated pmf leaves `[-1e-6, 1 + 1e-6]` are redone with the
/// FFT method.
pub fn phi_deconvolution(q: &[[f64; 2]]) -> PhiSet {
    let full = full_convolution(q);
    let mut fallback = false;
    let mut spectral: Option<PhiSet> = None;
    let phi = q
        .iter()
        .enumerate()
        .map(|(i, &qi)| {
            let mut v = deflate(&full, qi);
            if !mass_ok(&v) {
                log::warn!("deconvolution unstable for antenna {i}; using fft");
                fallback = true;
                let s = spectral.get_or_insert_with(|| phi_fft(q));
                v = s.phi[i].clone();
            } else {
                clamp_normalize(&mut v);
            }
            v
        })
        .collect();
    PhiSet { phi, fallback }
}

/// Leave-one-out pmfs through the DFT.
///
/// Uses a transform length of the next power of two `>= N + 1` so the full
/// product is not aliased. Bins where `|Q_i| < 1e-12` cannot be divided; that
/// antenna is convolved directly instead.
pub fn phi_fft(q: &[[f64; 2]]) -> PhiSet {
    let n = q.len();
    let size = (n + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let inverse = planner.plan_fft_inverse(size);

    // The DFT of q0 + q1 z is known in closed form.
    let twiddle: Vec<Complex64> = (0..size)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / size as f64))
        .collect();
    let spectrum = |[q0, q1]: [f64; 2], k: usize| Complex64::new(q0, 0.0) + twiddle[k] * q1;
    let mut total = vec![Complex64::new(1.0, 0.0); size];
    for &qi in q {
        for (k, t) in total.iter_mut().enumerate() {
            *t *= spectrum(qi, k);
        }
    }

    let mut fallback = false;
    let mut buf = vec![Complex64::default(); size];
    let phi = q
        .iter()
        .enumerate()
        .map(|(i, &qi)| {
            let mut divisible = true;
            for (k, b) in buf.iter_mut().enumerate() {
                let qk = spectrum(qi, k);
                if qk.norm() < SPECTRUM_GUARD {
                    divisible = false;
                    break;
                }
                *b = total[k] / qk;
            }
            if !divisible {
                fallback = true;
                return leave_one_out_direct(q, i);
            }
            inverse.process(&mut buf);
            let mut v: Vec<f64> = buf[..n].iter().map(|c| c.re / size as f64).collect();
            clamp_normalize(&mut v);
            v
        })
        .collect();
    PhiSet { phi, fallback }
}

/// `phi_i(R - 1)` and `phi_i(R)` under the normal approximation, unnormalized
/// log-densities `[ln g_i(R), ln g_i(R - 1)]` so that index `b` matches `u_i(b)`.
pub fn phi_gaussian_log(q: &[[f64; 2]], r: usize) -> Vec<[f64; 2]> {
    let m_total: f64 = q.iter().map(|v| v[1]).sum();
    let c_total: f64 = q.iter().map(|v| v[0] * v[1]).sum();
    q.iter()
        .map(|&[q0, q1]| {
            let m = m_total - q1;
            let c = (c_total - q0 * q1).max(1e-12);
            let log_density = |x: f64| -0.5 * (x - m).powi(2) / c;
            [log_density(r as f64), log_density(r as f64 - 1.0)]
        })
        .collect()
}

/// Activity messages `u_i = [u_i(0), u_i(1)]` from `phi_i(R)` and `phi_i(R - 1)`.
pub fn activity_messages(q: &[[f64; 2]], r: usize, method: PhiMethod) -> Vec<[f64; 2]> {
    let pick = |phi: &[f64]| {
        let at = |k: usize| phi.get(k).copied().unwrap_or(0.0);
        normalize_pair([at(r), if r >= 1 { at(r - 1) } else { 0.0 }])
    };
    match method {
        PhiMethod::Deconvolution => phi_deconvolution(q).phi.iter().map(|p| pick(p)).collect(),
        PhiMethod::Fft => phi_fft(q).phi.iter().map(|p| pick(p)).collect(),
        PhiMethod::Gaussian => phi_gaussian_log(q, r)
            .into_iter()
            .map(|[l0, l1]| {
                let top = l0.max(l1);
                normalize_pair([(l0 - top).exp(), (l1 - top).exp()])
            })
            .collect(),
    }
}

/// Scales a pair to unit sum; an all-zero pair becomes uniform.
pub fn normalize_pair([a, b]: [f64; 2]) -> [f64; 2] {
    let s = a + b;
    if s > 0.0 && s.is_finite() {
        [a / s, b / s]
    } else {
        [0.5, 0.5]
    }
}
