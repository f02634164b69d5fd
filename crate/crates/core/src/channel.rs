//! Rayleigh fading channel and reproducible random streams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::signal::GsmVector;

/// Identifies an independent random stream: `(master_seed, stream_id)`.
///
/// Streams are ChaCha8 keyed by the master seed with the stream id selecting
/// the ChaCha stream, so draws never depend on which thread evaluates which
/// trial or in which order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A stream for a separate purpose sharing the same trial index.
    pub fn domain(&self, tag: u64) -> RngStream {
        RngStream {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag)),
            stream_id: self.stream_id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from `CN(0, 1)`: independent real and imaginary parts of variance 1/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// An `M x N` channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DMatrix<Complex64>,
}

impl ChannelRealization {
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }
}

/// Draws `H` with i.i.d. `CN(0, 1)` entries, column-major draw order.
pub fn sample_channel<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> ChannelRealization {
    assert!(m >= 1 && n >= 1);
    ChannelRealization {
        h: DMatrix::from_fn(m, n, |_, _| complex_normal(rng)),
    }
}

/// `y = H x + w` with `w ~ CN(0, sigma2 I)`.
///
/// The noise is drawn as unit-variance samples and then scaled, so the same
/// stream yields the same noise direction at every SNR.
pub fn transmit<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    x: &GsmVector,
    sigma2: f64,
    rng: &mut R,
) -> DVector<Complex64> {
    assert_eq!(channel.n(), x.len());
    let mut y = noiseless(channel, x);
    let sigma = sigma2.sqrt();
    for yj in y.iter_mut() {
        *yj += complex_normal(rng) * sigma;
    }
    y
}

/// `H x` restricted to the support of `x`.
pub fn noiseless(channel: &ChannelRealization, x: &GsmVector) -> DVector<Complex64> {
    let mut y = DVector::zeros(channel.m());
    for (i, &xi) in x.as_slice().iter().enumerate() {
        if xi.norm_sqr() > 0.0 {
            y.axpy(xi, &channel.h.column(i), Complex64::new(1.0, 0.0));
        }
    }
    y
}
