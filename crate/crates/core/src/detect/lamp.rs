//! Layered message passing over the symbol layer (observations and antenna
//! symbols) and the activity layer (activity indicators and the cardinality
//! constraint `sum a_i = R`).
//!
//! Symbols take values in `A ∪ {0}`; index 0 of every distribution is the
//! zero symbol and index `1 + l` is alphabet label `l`, scaled to transmit
//! power. Interference at each observation is treated as complex Gaussian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::phi::{activity_messages, normalize_pair, PhiMethod};
use super::{select_support, DetectionResult};
use crate::error::{GsmError, Result};
use crate::signal::GsmConfig;

const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LampConfig {
    pub iterations: usize,
    /// Weight of the new message when damping: `new <- d * new + (1 - d) * old`.
    pub damping: f64,
    pub phi_method: PhiMethod,
}

impl Default for LampConfig {
    fn default() -> Self {
        LampConfig {
            iterations: 15,
            damping: 0.5,
            phi_method: PhiMethod::Deconvolution,
        }
    }
}

impl LampConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(GsmError::InvalidConfig("LaMP needs at least one iteration".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(GsmError::InvalidConfig(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

fn log_normalize(values: &mut [f64]) {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    for v in values.iter_mut() {
        *v -= lse;
    }
}

fn exp_normalize(log_values: &[f64], out: &mut [f64]) {
    let top = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        out.fill(1.0 / out.len() as f64);
        return;
    }
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(log_values) {
        *o = (l - top).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// All messages of one detection.
#[derive(Debug, Clone)]
pub struct LampState {
    m: usize,
    n: usize,
    r: usize,
    /// Domain values, zero first.
    domain: Vec<Complex64>,
    /// `ln v_ji(x)` at `(j * n + i) * k + x`.
    log_v: Vec<f64>,
    /// `p_ij(x)` at `(i * m + j) * k + x`.
    p: Vec<f64>,
    /// `[q_i(0), q_i(1)]`.
    q: Vec<[f64; 2]>,
    /// `[u_i(0), u_i(1)]`.
    u: Vec<[f64; 2]>,
    layer1_evaluations: u64,
}

impl LampState {
    /// Initial messages: `p` uniform over `A ∪ {0}`, `q_i(1) = R / N`.
    pub fn new(cfg: &GsmConfig) -> Self {
        let (m, n, r) = (cfg.m(), cfg.n(), cfg.r());
        let scale = cfg.symbol_scale();
        let mut domain = vec![Complex64::new(0.0, 0.0)];
        domain.extend(cfg.alphabet().points().iter().map(|p| p * scale));
        let k = domain.len();
        let prior = r as f64 / n as f64;
        LampState {
            m,
            n,
            r,
            domain,
            log_v: vec![-(k as f64).ln(); m * n * k],
            p: vec![1.0 / k as f64; n * m * k],
            q: vec![[1.0 - prior, prior]; n],
            u: vec![[0.5, 0.5]; n],
            layer1_evaluations: 0,
        }
    }

    fn k(&self) -> usize {
        self.domain.len()
    }

    /// `v_ji` as probabilities over `A ∪ {0}`.
    pub fn v(&self, j: usize, i: usize) -> Vec<f64> {
        let k = self.k();
        self.log_v[(j * self.n + i) * k..(j * self.n + i + 1) * k]
            .iter()
            .map(|l| l.exp())
            .collect()
    }

    pub fn p(&self, i: usize, j: usize) -> &[f64] {
        let k = self.k();
        &self.p[(i * self.m + j) * k..(i * self.m + j + 1) * k]
    }

    pub fn q(&self, i: usize) -> [f64; 2] {
        self.q[i]
    }

    pub fn u(&self, i: usize) -> [f64; 2] {
        self.u[i]
    }

    /// Number of `v_ji(x)` values computed so far.
    pub fn layer1_evaluations(&self) -> u64 {
        self.layer1_evaluations
    }

    /// Overrides the `p` messages (each row is normalized on entry).
    pub fn set_p(&mut self, i: usize, j: usize, dist: &[f64]) {
        let k = self.k();
        let s: f64 = dist.iter().sum();
        let base = (i * self.m + j) * k;
        for (slot, &d) in self.p[base..base + k].iter_mut().zip(dist) {
            *slot = d / s;
        }
    }

    pub fn set_u(&mut self, i: usize, u: [f64; 2]) {
        self.u[i] = normalize_pair(u);
    }

    /// `sum_k ln v_ki(x)` for antenna `i`.
    fn log_evidence(&self, i: usize, out: &mut [f64]) {
        let k = self.k();
        out.fill(0.0);
        for j in 0..self.m {
            let row = &self.log_v[(j * self.n + i) * k..(j * self.n + i + 1) * k];
            for (o, l) in out.iter_mut().zip(row) {
                *o += l;
            }
        }
    }

    /// Symbol-layer observation messages `v_ji`.
    pub fn update_v(&mut self, h: &DMatrix<Complex64>, y: &DVector<Complex64>, sigma2: f64) {
        let (mu, var) = interference_stats(self, h, y, sigma2);
        let k = self.k();
        let mut logits = vec![0.0; k];
        for j in 0..self.m {
            for i in 0..self.n {
                let hji = h[(j, i)];
                let centre = y[j] - mu[(j, i)];
                let s2 = var[(j, i)];
                for (l, d) in logits.iter_mut().zip(&self.domain) {
                    *l = -(centre - hji * d).norm_sqr() / s2;
                }
                log_normalize(&mut logits);
                self.log_v[(j * self.n + i) * k..(j * self.n + i + 1) * k].copy_from_slice(&logits);
            }
        }
        self.layer1_evaluations += (self.m * self.n * k) as u64;
    }

    /// Activity-layer messages `u_i` from the current `q`.
    pub fn update_u(&mut self, method: PhiMethod) {
        self.u = activity_messages(&self.q, self.r, method);
    }

    /// Symbol messages `p_ij(x) ∝ u_i(x != 0) prod_{k != j} v_ki(x)`.
    pub fn update_p(&mut self) {
        let k = self.k();
        let mut evidence = vec![0.0; k];
        let mut logits = vec![0.0; k];
        for i in 0..self.n {
            self.log_evidence(i, &mut evidence);
            let prior = [self.u[i][0].ln(), self.u[i][1].ln()];
            for j in 0..self.m {
                let own = &self.log_v[(j * self.n + i) * k..(j * self.n + i + 1) * k];
                for (x, l) in logits.iter_mut().enumerate() {
                    *l = prior[(x != 0) as usize] + evidence[x] - own[x];
                }
                let base = (i * self.m + j) * k;
                exp_normalize(&logits, &mut self.p[base..base + k]);
            }
        }
    }

    /// Activity estimates `q_i(1) ∝ sum_{x in A} prod_k v_ki(x)`, `q_i(0) ∝ prod_k v_ki(0)`.
    pub fn update_q(&mut self) {
        let k = self.k();
        let mut evidence = vec![0.0; k];
        for i in 0..self.n {
            self.log_evidence(i, &mut evidence);
            let active = &evidence[1..];
            let top = active.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_active = top + active.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
            let mut q = [0.0; 2];
            exp_normalize(&[evidence[0], log_active], &mut q);
            self.q[i] = q;
        }
    }

    /// One pass of the schedule: `v`, `u`, `p`, `q`, then damping of `p` and `q`.
    pub fn iterate(&mut self, h: &DMatrix<Complex64>, y: &DVector<Complex64>, sigma2: f64, lamp: &LampConfig) {
        let old_p = self.p.clone();
        let old_q = self.q.clone();
        self.update_v(h, y, sigma2);
        self.update_u(lamp.phi_method);
        self.update_p();
        self.update_q();
        let d = lamp.damping;
        if d < 1.0 {
            for (new, old) in self.p.iter_mut().zip(&old_p) {
                *new = d * *new + (1.0 - d) * old;
            }
            for (new, old) in self.q.iter_mut().zip(&old_q) {
                new[0] = d * new[0] + (1.0 - d) * old[0];
                new[1] = d * new[1] + (1.0 - d) * old[1];
            }
        }
    }

    /// Final belief `∝ u_i(x != 0) prod_k v_ki(x)` for antenna `i`.
    pub fn belief(&self, i: usize) -> Vec<f64> {
        let k = self.k();
        let mut evidence = vec![0.0; k];
        self.log_evidence(i, &mut evidence);
        let prior = [self.u[i][0].ln(), self.u[i][1].ln()];
        for (x, e) in evidence.iter_mut().enumerate() {
            *e += prior[(x != 0) as usize];
        }
        let mut out = vec![0.0; k];
        exp_normalize(&evidence, &mut out);
        out
    }

    /// Activity scores `q_i(1) u_i(1)`, normalized against `q_i(0) u_i(0)`.
    pub fn activity_scores(&self) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.u)
            .map(|(q, u)| normalize_pair([q[0] * u[0], q[1] * u[1]])[1])
            .collect()
    }

    /// Hard decision: top-`R` activity scores (repaired if needed), then the
    /// best alphabet point per active antenna under the final belief.
    pub fn harden(&self, cfg: &GsmConfig) -> DetectionResult {
        let (pattern, repaired) = select_support(&self.activity_scores(), cfg);
        let k = self.k();
        let mut evidence = vec![0.0; k];
        let labels = pattern
            .indices()
            .iter()
            .map(|&i| {
                self.log_evidence(i, &mut evidence);
                let mut best = 1;
                for x in 2..k {
                    if evidence[x] > evidence[best] {
                        best = x;
                    }
                }
                best - 1
            })
            .collect();
        DetectionResult::new(pattern, labels, repaired, cfg)
    }
}

/// Gaussian interference statistics `(mu_ji, sigma2_ji)` seen by antenna `i`
/// at observation `j`, from the symbol messages `p_lj`:
/// `mu_ji = sum_{l != i} H_jl E[x_l]` and
/// `sigma2_ji = sigma2 + sum_{l != i} |H_jl|^2 Var[x_l]`, floored at 1e-12.
pub fn interference_stats(
    state: &LampState,
    h: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    sigma2: f64,
) -> (DMatrix<Complex64>, DMatrix<f64>) {
    let (m, n) = (state.m, state.n);
    assert_eq!(h.shape(), (m, n));
    assert_eq!(y.len(), m);
    let mut mean = DMatrix::<Complex64>::zeros(m, n);
    let mut var = DMatrix::<f64>::zeros(m, n);
    let mut moments = vec![(Complex64::default(), 0.0); n];
    for j in 0..m {
        let mut total_mean = Complex64::default();
        let mut total_var = 0.0;
        for (l, slot) in moments.iter_mut().enumerate() {
            let p = state.p(l, j);
            let mut e = Complex64::default();
            let mut e2 = 0.0;
            for (pk, d) in p.iter().zip(&state.domain) {
                e += d * pk;
                e2 += d.norm_sqr() * pk;
            }
            let v = (e2 - e.norm_sqr()).max(0.0);
            let hjl = h[(j, l)];
            *slot = (hjl * e, hjl.norm_sqr() * v);
            total_mean += slot.0;
            total_var += slot.1;
        }
        for (i, &(own_mean, own_var)) in moments.iter().enumerate() {
            mean[(j, i)] = total_mean - own_mean;
            var[(j, i)] = (sigma2 + total_var - own_var).max(VARIANCE_FLOOR);
        }
    }
    (mean, var)
}

/// LaMP detection for one configuration.
#[derive(Debug, Clone)]
pub struct LampDetector {
    cfg: GsmConfig,
    lamp: LampConfig,
}

impl LampDetector {
    pub fn new(cfg: &GsmConfig, lamp: LampConfig) -> Result<Self> {
        lamp.validate()?;
        Ok(LampDetector {
            cfg: cfg.clone(),
            lamp,
        })
    }

    /// Runs every iteration and returns the final messages.
    pub fn run(&self, y: &DVector<Complex64>, h: &DMatrix<Complex64>, sigma2: f64) -> LampState {
        let mut state = LampState::new(&self.cfg);
        for _ in 0..self.lamp.iterations {
            state.iterate(h, y, sigma2, &self.lamp);
        }
        state
    }

    pub fn detect(&self, y: &DVector<Complex64>, h: &DMatrix<Complex64>, sigma2: f64) -> DetectionResult {
        self.run(y, h, sigma2).harden(&self.cfg)
    }
}
