use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsm_core::combinadics::{bits_to_int, int_to_bits, rank, unrank_bounded, BitBlock, Combination};
use gsm_core::harness::{
    find_required_snr, run_ber, run_capacity, with_threads, write_ber_csv, write_capacity_csv,
    write_required_snr_csv, ConfigFile, ExperimentConfig, THREADS_ENV,
};
use gsm_core::signal::{bits_to_parts, parts_to_bits, ActivationPattern, Alphabet, GsmConfig};
use gsm_core::{ErrorClass, GsmError};

#[derive(Parser, Debug)]
#[command(name = "gsm", version, about = "Generalized spatial modulation MIMO simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Map antenna-index bits (or a full frame with --alphabet) to active antennas.
    Encode(EncodeArgs),
    /// Map 1-based active antennas (and labels with --alphabet) back to bits.
    Decode(DecodeArgs),
    /// Bit error rate versus SNR.
    Ber(RunArgs),
    /// Capacity bounds (and optional Monte Carlo estimate) versus SNR.
    Capacity(RunArgs),
    /// SNR needed to reach a target BER, per receive-antenna count.
    RequiredSnr(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    /// Bit string, most significant first.
    #[arg(long)]
    bits: String,
    /// Treat the bits as a full frame: antenna bits, then symbol labels.
    #[arg(long)]
    alphabet: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    /// Comma-separated 1-based antenna indices.
    #[arg(long)]
    antennas: String,
    /// Comma-separated symbol labels, one per antenna (requires --alphabet).
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    alphabet: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// bpsk, 4qam, 16qam, 32qam, ...
    #[arg(long)]
    alphabet: Option<String>,
    #[arg(long)]
    sigma2_x: Option<f64>,
    /// SNR grid in dB: start:step:stop or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// ml, mmse or lamp.
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    /// deconv, fft or gauss.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    min_bit_errors: Option<u64>,
    #[arg(long)]
    max_frames: Option<u64>,
    /// Channel realizations for capacity runs.
    #[arg(long)]
    channels: Option<usize>,
    /// Monte Carlo samples per channel for the capacity estimate (0 = off).
    #[arg(long)]
    mc_samples: Option<usize>,
    /// restricted or full.
    #[arg(long)]
    patterns: Option<String>,
    #[arg(long)]
    pair_budget: Option<u64>,
    /// Subsample pattern pairs for L1 when above the pair budget.
    #[arg(long)]
    subsample_pairs: bool,
    #[arg(long)]
    target_ber: Option<f64>,
    /// Receive-antenna counts, comma separated.
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_max: Option<f64>,
    #[arg(long)]
    resolution_db: Option<f64>,
    #[command(flatten)]
    common: Common,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, GsmError> {
        let mut f = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    f.$field = Some(v);
                }
            )*};
        }
        set!(n, m, r, alphabet, sigma2_x, detector, iterations, damping, phi, min_bit_errors, max_frames);
        set!(channels, mc_samples, patterns, pair_budget, target_ber, snr_min, snr_max, resolution_db);
        if let Some(v) = self.common.seed {
            f.seed = Some(v);
        }
        if let Some(v) = self.common.threads {
            f.threads = Some(v);
        }
        if self.subsample_pairs {
            f.subsample_pairs = Some(true);
        }
        if let Some(s) = &self.snr {
            f.set_snr_db(s.clone());
        }
        if let Some(s) = &self.m_grid {
            f.set_m_grid(s.clone());
        }
        ExperimentConfig::from_file(&f)
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, GsmError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, GsmError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| GsmError::InvalidConfig(format!("bad {what} '{}'", t.trim())))
        })
        .collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn encode(args: &EncodeArgs) -> Result<String, GsmError> {
    let bits: BitBlock = args.bits.parse()?;
    match &args.alphabet {
        None => {
            let cfg = GsmConfig::new(args.n, 1, args.r, Alphabet::bpsk())?;
            if bits.len() != cfg.eta_a() {
                return Err(GsmError::WrongLength {
                    expected: cfg.eta_a(),
                    got: bits.len(),
                });
            }
            let combo = unrank_bounded(bits_to_int(&bits)?, args.r, args.n)?;
            Ok(format!("antennas: {}\n", join(&combo.one_based())))
        }
        Some(a) => {
            let cfg = GsmConfig::new(args.n, 1, args.r, a.parse()?)?;
            let (pattern, labels) = bits_to_parts(&bits, &cfg)?;
            Ok(format!(
                "antennas: {}\nlabels: {}\n",
                join(&pattern.one_based()),
                join(&labels)
            ))
        }
    }
}

fn decode(args: &DecodeArgs) -> Result<String, GsmError> {
    let combo = Combination::from_one_based(&parse_list(&args.antennas, "antenna")?)?;
    if combo.len() != args.r || combo.last() >= args.n {
        return Err(GsmError::InvalidConfig(format!(
            "need {} distinct antennas in 1..={}",
            args.r, args.n
        )));
    }
    match (&args.alphabet, &args.labels) {
        (None, None) => {
            let cfg = GsmConfig::new(args.n, 1, args.r, Alphabet::bpsk())?;
            let index = rank(&combo)?;
            if index >= cfg.num_patterns() {
                return Err(GsmError::PatternNotAllowed {
                    rank: index,
                    allowed: cfg.num_patterns(),
                });
            }
            Ok(format!("bits: {}\n", int_to_bits(index, cfg.eta_a())?))
        }
        (Some(a), Some(l)) => {
            let alphabet: Alphabet = a.parse()?;
            let labels = parse_list(l, "label")?;
            if labels.len() != args.r || labels.iter().any(|&x| x >= alphabet.size()) {
                return Err(GsmError::InvalidConfig(format!(
                    "need {} labels below {}",
                    args.r,
                    alphabet.size()
                )));
            }
            let cfg = GsmConfig::new(args.n, 1, args.r, alphabet)?;
            let pattern = ActivationPattern::from_indices(combo, &cfg)?;
            Ok(format!("bits: {}\n", parts_to_bits(&pattern, &labels, &cfg)))
        }
        _ => Err(GsmError::InvalidConfig(
            "--labels and --alphabet go together".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), GsmError> {
    match cli.command {
        Command::Encode(args) => {
            let text = encode(&args)?;
            let mut out = open_output(&args.common.out)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Decode(args) => {
            let text = decode(&args)?;
            let mut out = open_output(&args.common.out)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Ber(args) => {
            let cfg = args.resolve()?;
            let rows = with_threads(cfg.threads, || run_ber(&cfg))??;
            let mut out = open_output(&args.common.out)?;
            write_ber_csv(&mut out, &cfg, &rows)?;
        }
        Command::Capacity(args) => {
            let cfg = args.resolve()?;
            let rows = with_threads(cfg.threads, || run_capacity(&cfg))??;
            let mut out = open_output(&args.common.out)?;
            write_capacity_csv(&mut out, &cfg, &rows)?;
        }
        Command::RequiredSnr(args) => {
            let cfg = args.resolve()?;
            let rows = with_threads(cfg.threads, || find_required_snr(&cfg))??;
            let mut out = open_output(&args.common.out)?;
            write_required_snr_csv(&mut out, &cfg, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Infeasible => 2,
                ErrorClass::Runtime => 3,
            })
        }
    }
}
