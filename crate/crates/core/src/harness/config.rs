use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::capacity::{BoundOptions, PatternChoice};
use crate::detect::{DetectorKind, LampConfig, PhiMethod};
use crate::error::{GsmError, Result};
use crate::signal::{Alphabet, GsmConfig};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "GSM_THREADS";

/// An SNR grid in dB, kept in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrGrid(Vec<f64>);

impl SnrGrid {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(GsmError::InvalidConfig("SNR grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GsmError::InvalidConfig("SNR grid has non-finite points".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(SnrGrid(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

/// Accepts `start:step:stop` (inclusive) or a comma-separated list.
impl FromStr for SnrGrid {
    type Err = GsmError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| GsmError::InvalidConfig(format!("bad SNR grid '{s}': {what}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [start, step, stop] = parts[..] else {
                return Err(bad("expected start:step:stop"));
            };
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(bad("too many points"));
            }
            SnrGrid::new((0..count).map(|k| start + k as f64 * step).collect())
        } else {
            SnrGrid::new(s.split(',').map(num).collect::<Result<_>>()?)
        }
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses a comma-separated list of receive-antenna counts.
pub fn parse_m_grid(s: &str) -> Result<Vec<usize>> {
    let out: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| GsmError::InvalidConfig(format!("bad M value '{t}'")))
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(GsmError::InvalidConfig("M grid is empty".into()));
    }
    Ok(out)
}

/// When to stop simulating one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_bit_errors: 200,
            max_frames: 10_000_000,
        }
    }
}

/// Grid values as written in a config file: a string or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridValue {
    Text(String),
    Numbers(Vec<f64>),
}

impl GridValue {
    fn into_text(self) -> String {
        match self {
            GridValue::Text(s) => s,
            GridValue::Numbers(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        }
    }
}

/// The flat key/value schema of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub r: Option<usize>,
    pub alphabet: Option<String>,
    pub sigma2_x: Option<f64>,
    snr_db: Option<GridValue>,
    pub detector: Option<String>,
    pub iterations: Option<usize>,
    pub damping: Option<f64>,
    pub phi: Option<String>,
    pub min_bit_errors: Option<u64>,
    pub max_frames: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub channels: Option<usize>,
    pub mc_samples: Option<usize>,
    pub patterns: Option<String>,
    pub pair_budget: Option<u64>,
    pub subsample_pairs: Option<bool>,
    pub target_ber: Option<f64>,
    m_grid: Option<GridValue>,
    pub snr_min: Option<f64>,
    pub snr_max: Option<f64>,
    pub resolution_db: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GsmError::ConfigFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn snr_db_text(&self) -> Option<String> {
        self.snr_db.clone().map(GridValue::into_text)
    }

    pub fn m_grid_text(&self) -> Option<String> {
        self.m_grid.clone().map(GridValue::into_text)
    }

    pub fn set_snr_db(&mut self, text: String) {
        self.snr_db = Some(GridValue::Text(text));
    }

    pub fn set_m_grid(&mut self, text: String) {
        self.m_grid = Some(GridValue::Text(text));
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: GsmConfig,
    pub snr_grid: SnrGrid,
    pub detector: DetectorKind,
    pub stop: StopRule,
    pub seed: u64,
    pub threads: Option<usize>,
    pub channels: usize,
    pub mc_samples: usize,
    pub bounds: BoundOptions,
    pub target_ber: f64,
    pub m_grid: Vec<usize>,
    pub snr_range: (f64, f64),
    pub resolution_db: f64,
}

impl ExperimentConfig {
    /// Builds the system with defaults for the experiment fields.
    pub fn new(system: GsmConfig, snr_grid: SnrGrid, detector: DetectorKind) -> Self {
        ExperimentConfig {
            m_grid: vec![system.m()],
            system,
            snr_grid,
            detector,
            stop: StopRule::default(),
            seed: 1,
            threads: None,
            channels: 1000,
            mc_samples: 0,
            bounds: BoundOptions::default(),
            target_ber: 1e-3,
            snr_range: (-10.0, 40.0),
            resolution_db: 0.25,
        }
    }

    /// Resolves a parsed file, applying defaults for missing keys.
    pub fn from_file(f: &ConfigFile) -> Result<Self> {
        let need = |v: Option<usize>, key: &str| {
            v.ok_or_else(|| GsmError::InvalidConfig(format!("missing required key '{key}'")))
        };
        let alphabet: Alphabet = f.alphabet.as_deref().unwrap_or("bpsk").parse()?;
        let m_grid = f.m_grid_text().map(|t| parse_m_grid(&t)).transpose()?;
        // A required-SNR run may give only the M grid.
        let m = f.m.or_else(|| m_grid.as_ref().and_then(|g| g.first().copied()));
        let system = GsmConfig::new(need(f.n, "n")?, need(m, "m")?, need(f.r, "r")?, alphabet)?
            .with_powers(f.sigma2_x.unwrap_or(1.0), 1.0)?;
        if system.sigma2_x() <= 0.0 {
            return Err(GsmError::InvalidConfig("sigma2_x must be positive".into()));
        }
        let snr_grid: SnrGrid = f.snr_db_text().as_deref().unwrap_or("0:2:20").parse()?;

        let mut lamp = LampConfig::default();
        if let Some(it) = f.iterations {
            lamp.iterations = it;
        }
        if let Some(d) = f.damping {
            lamp.damping = d;
        }
        if let Some(phi) = &f.phi {
            lamp.phi_method = phi.parse::<PhiMethod>().map_err(GsmError::InvalidConfig)?;
        }
        lamp.validate()?;
        let detector = match f.detector.as_deref().unwrap_or("lamp") {
            "ml" => DetectorKind::Ml,
            "mmse" => DetectorKind::Mmse,
            "lamp" => DetectorKind::Lamp(lamp),
            other => {
                return Err(GsmError::InvalidConfig(format!(
                    "unknown detector '{other}' (expected ml, mmse or lamp)"
                )))
            }
        };

        let mut cfg = ExperimentConfig::new(system, snr_grid, detector);
        cfg.stop = StopRule {
            min_bit_errors: f.min_bit_errors.unwrap_or(cfg.stop.min_bit_errors),
            max_frames: f.max_frames.unwrap_or(cfg.stop.max_frames),
        };
        if cfg.stop.min_bit_errors == 0 || cfg.stop.max_frames == 0 {
            return Err(GsmError::InvalidConfig("stop-rule values must be positive".into()));
        }
        cfg.seed = f.seed.unwrap_or(cfg.seed);
        cfg.threads = f.threads;
        if cfg.threads == Some(0) {
            return Err(GsmError::InvalidConfig("threads must be positive".into()));
        }
        cfg.channels = f.channels.unwrap_or(cfg.channels);
        if cfg.channels == 0 {
            return Err(GsmError::InvalidConfig("channels must be positive".into()));
        }
        cfg.mc_samples = f.mc_samples.unwrap_or(0);
        cfg.bounds.patterns = match f.patterns.as_deref().unwrap_or("restricted") {
            "restricted" => PatternChoice::Restricted,
            "full" => PatternChoice::Full,
            other => {
                return Err(GsmError::InvalidConfig(format!(
                    "unknown pattern set '{other}' (expected restricted or full)"
                )))
            }
        };
        cfg.bounds.pair_budget = f.pair_budget.unwrap_or(cfg.bounds.pair_budget);
        cfg.bounds.subsample_pairs = f.subsample_pairs.unwrap_or(false);
        cfg.target_ber = f.target_ber.unwrap_or(cfg.target_ber);
        if !(cfg.target_ber > 0.0 && cfg.target_ber <= 1.0) {
            return Err(GsmError::InvalidConfig("target_ber must lie in (0, 1]".into()));
        }
        if let Some(g) = m_grid {
            cfg.m_grid = g;
        }
        cfg.snr_range = (f.snr_min.unwrap_or(cfg.snr_range.0), f.snr_max.unwrap_or(cfg.snr_range.1));
        if !(cfg.snr_range.0 < cfg.snr_range.1) {
            return Err(GsmError::InvalidConfig("need snr_min < snr_max".into()));
        }
        cfg.resolution_db = f.resolution_db.unwrap_or(cfg.resolution_db);
        if !(cfg.resolution_db > 0.0) {
            return Err(GsmError::InvalidConfig("resolution_db must be positive".into()));
        }
        Ok(cfg)
    }

    /// Key/value pairs echoed at the top of every CSV file.
    pub fn describe(&self) -> Vec<(String, String)> {
        let s = &self.system;
        let mut out = vec![
            ("n".into(), s.n().to_string()),
            ("m".into(), s.m().to_string()),
            ("r".into(), s.r().to_string()),
            ("alphabet".into(), s.alphabet().name().to_string()),
            ("eta".into(), s.eta().to_string()),
            ("sigma2_x".into(), s.sigma2_x().to_string()),
            ("snr_db".into(), self.snr_grid.to_string()),
            ("detector".into(), self.detector.name().to_string()),
        ];
        if let DetectorKind::Lamp(l) = self.detector {
            out.push(("iterations".into(), l.iterations.to_string()));
            out.push(("damping".into(), l.damping.to_string()));
            out.push(("phi".into(), l.phi_method.to_string()));
        }
        out.extend([
            ("min_bit_errors".into(), self.stop.min_bit_errors.to_string()),
            ("max_frames".into(), self.stop.max_frames.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]);
        out
    }
}

/// Worker threads from an explicit value, else [`THREADS_ENV`], else rayon's default.
pub fn resolve_threads(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
    })
}

/// Runs `f` on a pool with the requested number of threads.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = resolve_threads(threads) {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| GsmError::InvalidConfig(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}
