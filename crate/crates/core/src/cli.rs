//! Command-line front end: config parsing, the five subcommands and exit
//! codes. Each `cmd_*` function is usable as a library call; [`run`] wraps
//! them behind clap for the `laser-trng` binary.
//!
//! Exit codes: 0 pass, 1 test failure, 2 usage or config error, 3 I/O error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::battery::{run_battery, BatteryReport, Criteria, Mode};
use crate::bitstream::BitStream;
use crate::conditioning::{condition, repack, DEFAULT_LSB};
use crate::entropy::{block_entropy, EntropyReport, Histogram256};
use crate::error::{Error, Result};
use crate::ingest;
use crate::phase_sim::{simulate, SampleBlock, SimConfig};
use crate::spectral::{autocorr_wk, psd_welch, Window};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum BatteryMode {
    /// Multi-sequence when the stream holds `k × L` bits, single otherwise.
    #[default]
    Auto,
    Single,
    Multi,
}

/// Everything `cmd_pipeline` needs; the simulation part is shared with
/// `cmd_simulate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub sim: SimConfig,
    pub xor: bool,
    pub lsb: u32,
    pub autocorr_max_lag: usize,
    pub psd_segment: usize,
    pub block_entropy_max: u32,
    pub battery_mode: BatteryMode,
    pub battery_k: usize,
    pub battery_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            xor: true,
            lsb: DEFAULT_LSB,
            autocorr_max_lag: 100,
            psd_segment: 1024,
            block_entropy_max: 16,
            battery_mode: BatteryMode::Auto,
            battery_k: 100,
            battery_len: 1_000_000,
        }
    }
}

fn parse_f64(v: &str) -> Option<f64> {
    v.parse().ok()
}

fn parse_usize(v: &str) -> Option<usize> {
    if let Ok(n) = v.parse() {
        return Some(n);
    }
    let f: f64 = v.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f <= 9_007_199_254_740_992.0).then_some(f as usize)
}

fn parse_u64(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => v.replace('_', "").parse().ok(),
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

/// Parses flat `key = value` text. `#` starts a comment; unknown keys and
/// malformed values are reported with their line number.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || Error::Config {
            line: line_no,
            message: format!("{key}: cannot parse {value:?}"),
        };
        match key {
            "linewidth_hz" => c.sim.linewidth_hz = parse_f64(value).ok_or_else(bad)?,
            "delay_s" => c.sim.delay_s = parse_f64(value).ok_or_else(bad)?,
            "sample_rate_hz" => c.sim.sample_rate_hz = parse_f64(value).ok_or_else(bad)?,
            "n_samples" => c.sim.n_samples = parse_usize(value).ok_or_else(bad)?,
            "detection_noise_rel" => c.sim.detection_noise_rel = parse_f64(value).ok_or_else(bad)?,
            "adc_fullscale_sigma" => c.sim.adc_fullscale_sigma = parse_f64(value).ok_or_else(bad)?,
            "oversample_factor" => c.sim.oversample_factor = parse_usize(value).ok_or_else(bad)?,
            "seed" => c.sim.seed = parse_u64(value).ok_or_else(bad)?,
            "highpass_hz" => c.sim.highpass_hz = parse_f64(value).ok_or_else(bad)?,
            "lowpass_hz" => c.sim.lowpass_hz = parse_f64(value).ok_or_else(bad)?,
            "xor" => c.xor = parse_bool(value).ok_or_else(bad)?,
            "lsb" => c.lsb = parse_usize(value).and_then(|v| u32::try_from(v).ok()).ok_or_else(bad)?,
            "autocorr_max_lag" => c.autocorr_max_lag = parse_usize(value).ok_or_else(bad)?,
            "psd_segment" => c.psd_segment = parse_usize(value).ok_or_else(bad)?,
            "block_entropy_max" => {
                c.block_entropy_max = parse_usize(value).and_then(|v| u32::try_from(v).ok()).ok_or_else(bad)?
            }
            "battery_mode" => {
                c.battery_mode = BatteryMode::from_str(value, true).map_err(|_| bad())?
            }
            "battery_k" => c.battery_k = parse_usize(value).ok_or_else(bad)?,
            "battery_len" => c.battery_len = parse_usize(value).ok_or_else(bad)?,
            _ => {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
    }
    c.sim.validate()?;
    if !(1..=8).contains(&c.lsb) {
        return Err(Error::invalid(format!("lsb must be in 1..=8, got {}", c.lsb)));
    }
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Effective simulation parameters, one `key = value` per line, including
/// the derived coherence time.
pub fn describe_config(cfg: &SimConfig) -> Result<String> {
    let tau = cfg.coherence_time_s()?;
    let mut s = String::new();
    let _ = writeln!(s, "linewidth_hz = {}", cfg.linewidth_hz);
    let _ = writeln!(s, "delay_s = {}", cfg.delay_s);
    let _ = writeln!(s, "sample_rate_hz = {}", cfg.sample_rate_hz);
    let _ = writeln!(s, "n_samples = {}", cfg.n_samples);
    let _ = writeln!(s, "detection_noise_rel = {}", cfg.detection_noise_rel);
    let _ = writeln!(s, "adc_fullscale_sigma = {}", cfg.adc_fullscale_sigma);
    let _ = writeln!(s, "oversample_factor = {}", cfg.oversample_factor);
    let _ = writeln!(s, "seed = {:#x}", cfg.seed);
    let _ = writeln!(s, "highpass_hz = {}", cfg.highpass_hz);
    let _ = writeln!(s, "lowpass_hz = {}", cfg.lowpass_hz);
    let _ = writeln!(s, "coherence_time_ns = {:.2}", tau * 1e9);
    let _ = writeln!(s, "delay_steps = {}", cfg.delay_steps()?);
    Ok(s)
}

pub fn cmd_simulate(cfg: &SimConfig, out: &Path) -> Result<SampleBlock> {
    let block = simulate(cfg)?;
    ingest::write_samples(&block, out)?;
    Ok(block)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub input_bytes: usize,
    pub output_bits: usize,
    pub seconds: f64,
}

pub fn cmd_condition(input: &Path, output: &Path, xor: bool, lsb: u32) -> Result<ConditionSummary> {
    let raw = ingest::read_bytes(input)?;
    if raw.is_empty() {
        return Err(Error::EmptyInput(format!("{} holds no samples", input.display())));
    }
    let t0 = Instant::now();
    let out = condition(&raw, xor, lsb)?;
    let seconds = t0.elapsed().as_secs_f64();
    let bits = BitStream::from_bytes(out);
    ingest::write_bits(&bits, output)?;
    Ok(ConditionSummary {
        input_bytes: raw.len(),
        output_bits: bits.len(),
        seconds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum InputKind {
    /// Bitstream when a `.meta` sidecar exists, raw samples otherwise.
    #[default]
    Auto,
    Samples,
    Bits,
}

/// Data handed to the analyses.
#[derive(Debug, Clone)]
pub enum AnalyzeInput {
    /// Signed ADC codes.
    Samples(Vec<i8>),
    /// Conditioned bits; byte-level analyses use the whole bytes.
    Bits(BitStream),
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub entropy: bool,
    pub autocorr: Option<usize>,
    pub psd: Option<usize>,
    pub block_entropy: Option<u32>,
    pub sample_rate_hz: Option<f64>,
    pub plot_dir: Option<PathBuf>,
    pub plot_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Section<T> {
    Ok(T),
    Insufficient(String),
}

impl<T> Section<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::Insufficient(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Section::Ok(v) => Some(v),
            Section::Insufficient(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocorrSummary {
    pub sample_period_s: f64,
    pub values: Vec<f64>,
    pub max_abs_off_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdSummary {
    pub segment_length: usize,
    pub segments: usize,
    pub resolution_hz: f64,
    pub total_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEntropyRow {
    pub m: u32,
    pub entropy: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub kind: String,
    pub n_bytes: usize,
    pub n_bits: usize,
    pub entropy: Option<Section<EntropyReport>>,
    pub autocorr: Option<Section<AutocorrSummary>>,
    pub psd: Option<Section<PsdSummary>>,
    pub block_entropy: Option<Section<Vec<BlockEntropyRow>>>,
    pub plots: Vec<String>,
}

impl AnalyzeReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} input: {} bytes, {} bits", self.kind, self.n_bytes, self.n_bits);
        if let Some(e) = &self.entropy {
            match e {
                Section::Ok(e) => {
                    let _ = writeln!(
                        s,
                        "shannon {:.5} bits/byte, min-entropy {:.5} bits/byte, gaussian fit sigma {:.3} -> {:.4} bits",
                        e.shannon_bits_per_byte,
                        e.min_entropy_bits_per_byte,
                        e.gaussian_fit_sigma,
                        e.gaussian_fit_entropy
                    );
                }
                Section::Insufficient(m) => {
                    let _ = writeln!(s, "entropy: {m}");
                }
            }
        }
        if let Some(a) = &self.autocorr {
            match a {
                Section::Ok(a) => {
                    let _ = writeln!(
                        s,
                        "autocorrelation: max |R| over lags 1..={} is {:.3e}",
                        a.values.len() - 1,
                        a.max_abs_off_zero
                    );
                }
                Section::Insufficient(m) => {
                    let _ = writeln!(s, "autocorrelation: {m}");
                }
            }
        }
        if let Some(p) = &self.psd {
            match p {
                Section::Ok(p) => {
                    let _ = writeln!(
                        s,
                        "psd: {} segments of {}, resolution {:.3e} Hz",
                        p.segments, p.segment_length, p.resolution_hz
                    );
                }
                Section::Insufficient(m) => {
                    let _ = writeln!(s, "psd: {m}");
                }
            }
        }
        if let Some(b) = &self.block_entropy {
            match b {
                Section::Ok(rows) => {
                    for r in rows {
                        let _ = writeln!(s, "H({})/{} = {:.6}", r.m, r.m, r.normalized);
                    }
                }
                Section::Insufficient(m) => {
                    let _ = writeln!(s, "block entropy: {m}");
                }
            }
        }
        s
    }
}

fn write_plot(opts: &AnalyzeOptions, name: &str, body: &str, plots: &mut Vec<String>) -> Result<()> {
    if let Some(dir) = &opts.plot_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}{name}", opts.plot_prefix));
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        plots.push(path.display().to_string());
    }
    Ok(())
}

pub fn analyze_data(input: &AnalyzeInput, opts: &AnalyzeOptions) -> Result<AnalyzeReport> {
    let (kind, bytes): (&str, Vec<u8>) = match input {
        AnalyzeInput::Samples(s) => ("samples", s.iter().map(|&v| v as u8).collect()),
        AnalyzeInput::Bits(b) => ("bits", repack(b)),
    };
    let values = || -> Vec<f64> {
        match input {
            AnalyzeInput::Samples(s) => s.iter().map(|&v| v as f64).collect(),
            AnalyzeInput::Bits(_) => bytes.iter().map(|&v| v as f64).collect(),
        }
    };
    let rate = opts.sample_rate_hz.unwrap_or(ingest::DEFAULT_INGEST_RATE_HZ);
    let mut plots = Vec::new();

    let entropy = if opts.entropy {
        let hist = match input {
            AnalyzeInput::Samples(s) => Histogram256::from_samples(s),
            AnalyzeInput::Bits(_) => Histogram256::from_bytes(&bytes),
        };
        if let Ok(h) = &hist {
            let mut body = String::new();
            for (i, c) in h.counts().iter().enumerate() {
                let _ = writeln!(body, "{} {c}", h.bin_value(i));
            }
            write_plot(opts, "histogram.dat", &body, &mut plots)?;
        }
        Some(Section::from(hist.and_then(|h| EntropyReport::from_histogram(&h))))
    } else {
        None
    };

    let autocorr = match opts.autocorr {
        Some(max_lag) => {
            let r = autocorr_wk(&values(), max_lag);
            if let Ok(r) = &r {
                write_plot(opts, "autocorr.dat", &r.to_two_column(1.0 / rate), &mut plots)?;
            }
            Some(Section::from(r.map(|r| AutocorrSummary {
                sample_period_s: 1.0 / rate,
                max_abs_off_zero: r.max_abs_off_zero(),
                values: r.values,
            })))
        }
        None => None,
    };

    let psd = match opts.psd {
        Some(seg) => {
            let r = psd_welch(&values(), seg, Window::Hann, rate);
            if let Ok(p) = &r {
                write_plot(opts, "psd.dat", &p.to_two_column(), &mut plots)?;
            }
            Some(Section::from(r.map(|p| PsdSummary {
                segment_length: p.segment_length,
                segments: p.segments,
                resolution_hz: p.resolution_hz(),
                total_power: p.total_power(),
            })))
        }
        None => None,
    };

    let block = match opts.block_entropy {
        Some(m_max) => {
            let owned;
            let bits = match input {
                AnalyzeInput::Bits(b) => b,
                AnalyzeInput::Samples(_) => {
                    owned = BitStream::from_bytes(bytes.clone());
                    &owned
                }
            };
            let rows: Result<Vec<BlockEntropyRow>> = (1..=m_max)
                .map(|m| {
                    block_entropy(bits, m).map(|(h, n)| BlockEntropyRow {
                        m,
                        entropy: h,
                        normalized: n,
                    })
                })
                .collect();
            if let Ok(rows) = &rows {
                let mut body = String::new();
                for r in rows {
                    let _ = writeln!(body, "{} {:.9}", r.m, r.normalized);
                }
                write_plot(opts, "block_entropy.dat", &body, &mut plots)?;
            }
            Some(Section::from(rows))
        }
        None => None,
    };

    Ok(AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        n_bits: match input {
            AnalyzeInput::Bits(b) => b.len(),
            AnalyzeInput::Samples(_) => bytes.len() * 8,
        },
        n_bytes: bytes.len(),
        entropy,
        autocorr,
        psd,
        block_entropy: block,
        plots,
    })
}

pub fn load_input(path: &Path, kind: InputKind) -> Result<AnalyzeInput> {
    let as_bits = match kind {
        InputKind::Auto => ingest::meta_path(path).exists(),
        InputKind::Samples => false,
        InputKind::Bits => true,
    };
    if as_bits {
        let bits = ingest::read_bits(path, None)?;
        if bits.is_empty() {
            return Err(Error::EmptyInput(format!("{} holds no bits", path.display())));
        }
        Ok(AnalyzeInput::Bits(bits))
    } else {
        Ok(AnalyzeInput::Samples(ingest::read_samples(path, None)?.samples))
    }
}

pub fn cmd_analyze(input: &Path, kind: InputKind, opts: &AnalyzeOptions) -> Result<AnalyzeReport> {
    analyze_data(&load_input(input, kind)?, opts)
}

pub fn cmd_test(
    input: &Path,
    length_bits: Option<usize>,
    mode: Mode,
    criteria: &Criteria,
) -> Result<BatteryReport> {
    let bits = ingest::read_bits(input, length_bits)?;
    run_battery(&bits, mode, criteria)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub stage: String,
    pub shannon_bits_per_byte: f64,
    pub min_entropy_bits_per_byte: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Throughput {
    pub input_bytes: usize,
    pub seconds: f64,
    pub input_mb_per_s: f64,
    pub output_mbit_per_s: f64,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub coherence_time_ns: f64,
    pub raw_samples: usize,
    pub conditioned_bits: usize,
    pub entropy_table: Vec<EntropyRow>,
    pub pre: AnalyzeReport,
    pub post: AnalyzeReport,
    pub battery: BatteryReport,
    pub throughput: Throughput,
}

impl PipelineReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "coherence time {:.2} ns", self.coherence_time_ns);
        let _ = writeln!(
            s,
            "{} raw samples -> {} conditioned bits",
            self.raw_samples, self.conditioned_bits
        );
        let _ = writeln!(s, "{:<14} {:>10} {:>12}", "stage", "shannon", "min-entropy");
        for r in &self.entropy_table {
            let _ = writeln!(
                s,
                "{:<14} {:>10.5} {:>12.5}",
                r.stage, r.shannon_bits_per_byte, r.min_entropy_bits_per_byte
            );
        }
        let t = &self.throughput;
        let _ = writeln!(
            s,
            "throughput: {:.1} MB/s of input bytes ({:.0} Mbit/s output)",
            t.input_mb_per_s, t.output_mbit_per_s
        );
        s.push('\n');
        s += &self.battery.to_table();
        s
    }
}

fn entropy_row(stage: &str, r: &AnalyzeReport) -> Option<EntropyRow> {
    let e = r.entropy.as_ref()?.ok()?;
    Some(EntropyRow {
        stage: stage.to_string(),
        shannon_bits_per_byte: e.shannon_bits_per_byte,
        min_entropy_bits_per_byte: e.min_entropy_bits_per_byte,
    })
}

/// Battery mode the pipeline uses for a stream of `n_bits`.
pub fn resolve_mode(cfg: &PipelineConfig, n_bits: usize) -> Mode {
    let multi = Mode::Multi {
        k: cfg.battery_k,
        len: cfg.battery_len,
    };
    match cfg.battery_mode {
        BatteryMode::Single => Mode::Single,
        BatteryMode::Multi => multi,
        BatteryMode::Auto => {
            if cfg.battery_k.saturating_mul(cfg.battery_len) <= n_bits {
                multi
            } else {
                Mode::Single
            }
        }
    }
}

/// Simulate → condition → analyze → test. With `out_dir` the intermediate
/// files (`samples.raw`, `conditioned.bin` + sidecar), plot data and
/// `report.json` are written there.
pub fn cmd_pipeline(cfg: &PipelineConfig, out_dir: Option<&Path>) -> Result<PipelineReport> {
    let block = simulate(&cfg.sim)?;
    let t0 = Instant::now();
    let conditioned = condition(block.as_bytes(), cfg.xor, cfg.lsb)?;
    let seconds = t0.elapsed().as_secs_f64();
    let bits = BitStream::from_bytes(conditioned);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        ingest::write_samples(&block, dir.join("samples.raw"))?;
        ingest::write_bits(&bits, dir.join("conditioned.bin"))?;
    }

    let plot_dir = out_dir.map(|d| d.join("plots"));
    let n_in = block.len();
    let raw_input = AnalyzeInput::Samples(block.samples);
    let pre = analyze_data(
        &raw_input,
        &AnalyzeOptions {
            entropy: true,
            autocorr: Some(cfg.autocorr_max_lag),
            psd: Some(cfg.psd_segment),
            block_entropy: Some(cfg.block_entropy_max),
            sample_rate_hz: Some(cfg.sim.sample_rate_hz),
            plot_dir: plot_dir.clone(),
            plot_prefix: "raw_".into(),
        },
    )?;
    let post_input = AnalyzeInput::Bits(bits);
    let post = analyze_data(
        &post_input,
        &AnalyzeOptions {
            entropy: true,
            autocorr: Some(cfg.autocorr_max_lag),
            psd: None,
            block_entropy: Some(cfg.block_entropy_max),
            sample_rate_hz: None,
            plot_dir,
            plot_prefix: "conditioned_".into(),
        },
    )?;
    let AnalyzeInput::Bits(bits) = post_input else {
        unreachable!()
    };
    let battery = run_battery(&bits, resolve_mode(cfg, bits.len()), &Criteria::default())?;

    let entropy_table = [entropy_row("raw", &pre), entropy_row("conditioned", &post)]
        .into_iter()
        .flatten()
        .collect();
    drop(raw_input);
    let report = PipelineReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        coherence_time_ns: cfg.sim.coherence_time_s()? * 1e9,
        raw_samples: n_in,
        conditioned_bits: bits.len(),
        entropy_table,
        pre,
        post,
        battery,
        throughput: Throughput {
            input_bytes: n_in,
            seconds,
            input_mb_per_s: n_in as f64 / seconds.max(1e-12) / 1e6,
            output_mbit_per_s: bits.len() as f64 / seconds.max(1e-12) / 1e6,
            parallel: crate::par::is_parallel(),
        },
    };
    if let Some(dir) = out_dir {
        write_json(&report, Some(&dir.join("report.json")))?;
    }
    Ok(report)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        _ => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "laser-trng", version, about = "Laser phase-noise TRNG toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate ADC samples and write them as raw signed bytes.
    Simulate {
        /// key = value config file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// XOR pairs, keep the m lowest bits, repack.
    Condition {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pairwise XOR (on by default).
        #[arg(long, overrides_with = "no_xor")]
        xor: bool,
        #[arg(long)]
        no_xor: bool,
        #[arg(long, default_value_t = DEFAULT_LSB)]
        lsb: u32,
    },
    /// Entropy, autocorrelation, PSD and block-entropy analyses.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputKind::Auto)]
        kind: InputKind,
        #[arg(long)]
        entropy: bool,
        /// Maximum lag in samples.
        #[arg(long, value_name = "MAX_LAG")]
        autocorr: Option<usize>,
        /// Welch segment length (power of two).
        #[arg(long, value_name = "SEGMENT")]
        psd: Option<usize>,
        /// Sweep block sizes 1..=M_MAX.
        #[arg(long, value_name = "M_MAX")]
        block_entropy: Option<u32>,
        #[arg(long)]
        sample_rate: Option<f64>,
        /// Directory for two-column plot data.
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Write the JSON report here ("-" for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the ENT + STS battery on a bitstream file.
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TestMode::Single)]
        mode: TestMode,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long = "L", alias = "len", default_value_t = 1_000_000)]
        len: usize,
        /// Pass-proportion band for multi mode, or P interval for single mode.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        band: Option<Vec<f64>>,
        /// Override the sidecar bit length.
        #[arg(long)]
        length_bits: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Simulate, condition, analyze and test in one go.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestMode {
    Single,
    Multi,
}

fn config_or_default(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate { config, out } => {
            let cfg = config_or_default(config.as_deref())?;
            print!("{}", describe_config(&cfg.sim)?);
            let block = cmd_simulate(&cfg.sim, &out)?;
            println!("wrote {} samples to {}", block.len(), out.display());
            Ok(EXIT_PASS)
        }
        Command::Condition {
            input,
            out,
            no_xor,
            lsb,
            ..
        } => {
            let s = cmd_condition(&input, &out, !no_xor, lsb)?;
            println!(
                "{} input bytes -> {} bits in {} ({:.1} MB/s)",
                s.input_bytes,
                s.output_bits,
                out.display(),
                s.input_bytes as f64 / s.seconds.max(1e-12) / 1e6
            );
            Ok(EXIT_PASS)
        }
        Command::Analyze {
            input,
            kind,
            entropy,
            autocorr,
            psd,
            block_entropy,
            sample_rate,
            plots,
            json,
        } => {
            let opts = AnalyzeOptions {
                entropy,
                autocorr,
                psd,
                block_entropy,
                sample_rate_hz: sample_rate,
                plot_dir: plots,
                plot_prefix: String::new(),
            };
            let report = cmd_analyze(&input, kind, &opts)?;
            match json {
                Some(p) if p == Path::new("-") => write_json(&report, None)?,
                Some(p) => {
                    write_json(&report, Some(&p))?;
                    print!("{}", report.summary());
                }
                None => print!("{}", report.summary()),
            }
            Ok(EXIT_PASS)
        }
        Command::Test {
            input,
            mode,
            k,
            len,
            band,
            length_bits,
            json,
        } => {
            let mut criteria = Criteria::default();
            let mode = match mode {
                TestMode::Single => {
                    if let Some(b) = &band {
                        criteria.single_band = (b[0], b[1]);
                    }
                    Mode::Single
                }
                TestMode::Multi => {
                    if let Some(b) = &band {
                        criteria.proportion_band = Some((b[0], b[1]));
                    }
                    Mode::Multi { k, len }
                }
            };
            if let Some(b) = &band {
                if !(b[0] < b[1]) {
                    return Err(Error::invalid(format!("band {} {} is empty", b[0], b[1])));
                }
            }
            let report = cmd_test(&input, length_bits, mode, &criteria)?;
            match json {
                Some(p) if p == Path::new("-") => write_json(&report, None)?,
                Some(p) => {
                    write_json(&report, Some(&p))?;
                    print!("{}", report.to_table());
                }
                None => print!("{}", report.to_table()),
            }
            if !report.failing.is_empty() {
                println!("failing: {}", report.failing.join(", "));
            }
            Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Pipeline { config, out_dir } => {
            let cfg = config_or_default(config.as_deref())?;
            let report = cmd_pipeline(&cfg, out_dir.as_deref())?;
            print!("{}", report.summary());
            Ok(if report.battery.pass { EXIT_PASS } else { EXIT_FAIL })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let c = parse_config("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        let text = "# reference run\nlinewidth_hz = 120e6\nseed = 0x10  # hex\nn_samples = 2e5\nxor = off\nlsb=5\nbattery_mode = single\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.sim.seed, 16);
        assert_eq!(c.sim.n_samples, 200_000);
        assert!(!c.xor);
        assert_eq!(c.lsb, 5);
        assert_eq!(c.battery_mode, BatteryMode::Single);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        match parse_config("seed = 1\n\nbogus = 3\n") {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        match parse_config("delay_s = fast\n") {
            Err(Error::Config { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("no equals sign"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("n_samples = 0"), Err(Error::InvalidParameter(_))));
        assert!(matches!(parse_config("n_samples = 1.5"), Err(Error::Config { .. })));
    }

    #[test]
    fn coherence_time_is_echoed() {
        let d = describe_config(&SimConfig::default()).unwrap();
        assert!(d.contains("coherence_time_ns = 2.65"), "{d}");
        assert!(d.contains("delay_steps = 1"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::io("p", std::io::Error::other("x"))),
            EXIT_IO
        );
        assert_eq!(run(["laser-trng", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["laser-trng", "test", "--input", "/nonexistent/x.bin"]), EXIT_IO);
    }

    #[test]
    fn auto_mode_resolution() {
        let cfg = PipelineConfig {
            battery_k: 10,
            battery_len: 1000,
            ..PipelineConfig::default()
        };
        assert_eq!(resolve_mode(&cfg, 9_999), Mode::Single);
        assert_eq!(resolve_mode(&cfg, 10_000), Mode::Multi { k: 10, len: 1000 });
    }

    #[test]
    fn analyze_uniform_vector() {
        let bytes: Vec<u8> = (0..=255).collect();
        let r = analyze_data(
            &AnalyzeInput::Bits(BitStream::from_bytes(bytes)),
            &AnalyzeOptions {
                entropy: true,
                autocorr: Some(1000),
                ..AnalyzeOptions::default()
            },
        )
        .unwrap();
        let e = r.entropy.as_ref().unwrap().ok().unwrap();
        assert_eq!(e.shannon_bits_per_byte, 8.0);
        assert_eq!(e.min_entropy_bits_per_byte, 8.0);
        assert!(matches!(r.autocorr, Some(Section::Insufficient(_))));
    }
}
