use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{GsmError, Result};

/// A unit-energy constellation whose points are indexed by their bit label.
///
/// `points()[label]` is the point carrying the `bits_per_symbol()`-bit word
/// `label` (most significant bit first).
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    name: String,
    points: Vec<Complex64>,
    bits: usize,
}

fn gray(j: usize) -> usize {
    j ^ (j >> 1)
}

impl Alphabet {
    /// `{+1, -1}` with label 0 on `+1`.
    pub fn bpsk() -> Self {
        Alphabet {
            name: "bpsk".into(),
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            bits: 1,
        }
    }

    /// Gray-labelled QAM of the given order.
    ///
    /// Even bit counts give a square grid. Odd bit counts give a rectangular
    /// grid with one more bit on the in-phase axis (32-QAM is 8x4).
    /// The in-phase bits are the leading bits of each label.
    pub fn qam(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(GsmError::InvalidConfig(format!(
                "QAM order must be a power of two >= 2, got {order}"
            )));
        }
        if order == 2 {
            return Ok(Self::bpsk());
        }
        let bits = order.trailing_zeros() as usize;
        let bits_i = bits.div_ceil(2);
        let bits_q = bits / 2;
        let (levels_i, levels_q) = (1usize << bits_i, 1usize << bits_q);

        let mut points = vec![Complex64::new(0.0, 0.0); order];
        for ji in 0..levels_i {
            for jq in 0..levels_q {
                let re = (2 * ji) as f64 - (levels_i - 1) as f64;
                let im = (2 * jq) as f64 - (levels_q - 1) as f64;
                let label = (gray(ji) << bits_q) | gray(jq);
                points[label] = Complex64::new(re, im);
            }
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let scale = energy.sqrt().recip();
        for p in &mut points {
            *p *= scale;
        }
        Ok(Alphabet {
            name: format!("{order}qam"),
            points,
            bits,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.size() as f64
    }

    /// Label of the closest point (first one on ties).
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    /// Label of a point equal to `z` up to `tol` in modulus.
    pub fn label_of(&self, z: Complex64, tol: f64) -> Option<usize> {
        let label = self.nearest(z);
        ((z - self.points[label]).norm() <= tol).then_some(label)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for Alphabet {
    type Err = GsmError;

    /// Accepts `bpsk`, `qpsk`, and `<order>qam` / `qam<order>` (e.g. `4qam`, `qam16`).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace('-', "");
        match lower.as_str() {
            "bpsk" => return Ok(Alphabet::bpsk()),
            "qpsk" => return Alphabet::qam(4),
            _ => {}
        }
        let digits = lower
            .strip_suffix("qam")
            .or_else(|| lower.strip_prefix("qam"))
            .ok_or_else(|| GsmError::InvalidConfig(format!("unknown modulation {s:?}")))?;
        let order: usize = digits
            .parse()
            .map_err(|_| GsmError::InvalidConfig(format!("unknown modulation {s:?}")))?;
        Alphabet::qam(order)
    }
}
