//! Synthetic delayed self-homodyne measurement of laser phase noise.
//!
//! The laser phase performs a Wiener walk whose per-step variance
//! `2Δ/τ_coh` reproduces the exponential field autocorrelation
//! `|<e^{i(φ(t+s)-φ(t))}>| = e^{-s/τ_coh}`. Beating the field with a copy
//! delayed by `d` internal steps gives `cos(φ[k+d] - φ[k])`, which is
//! optionally band-limited, mean-subtracted, corrupted by Gaussian detector
//! noise and digitized by a mid-tread 8-bit ADC.
//!
//! Two routes produce identical samples:
//!
//! * the step-by-step functions ([`simulate_phase`], [`beat_signal`],
//!   [`add_detection_noise`], [`quantize`]) hold whole traces in memory;
//! * [`simulate`] streams fixed-size blocks through the same arithmetic,
//!   regenerating random numbers from per-block ChaCha streams, so it scales
//!   to 10^8+ samples and parallelizes across blocks.
//!
//! All statistics (means, standard deviations) are accumulated per
//! [`BLOCK`]-sized block and folded in block order on both routes, which is
//! what makes them bit-identical.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Granularity of random streams and partial sums.
pub const BLOCK: usize = 1 << 16;

const STREAM_PHASE: u64 = 1 << 48;
const STREAM_NOISE: u64 = 2 << 48;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Full width of the Lorentzian laser line, Hz.
    pub linewidth_hz: f64,
    /// Interferometer delay, s.
    pub delay_s: f64,
    /// ADC sample rate, Hz.
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    /// Detector noise std relative to the beat-signal std.
    pub detection_noise_rel: f64,
    /// ADC full scale (code +127) in units of analog std.
    pub adc_fullscale_sigma: f64,
    /// Internal time steps per ADC sample.
    pub oversample_factor: usize,
    pub seed: u64,
    /// First-order high-pass corner, Hz (0 disables).
    pub highpass_hz: f64,
    /// First-order low-pass corner, Hz (0 disables).
    pub lowpass_hz: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            linewidth_hz: 120e6,
            delay_s: 5e-9,
            sample_rate_hz: 100e6,
            n_samples: 1_000_000,
            detection_noise_rel: 1.5,
            adc_fullscale_sigma: 3.4,
            oversample_factor: 2,
            seed: 0x5EED_2010,
            highpass_hz: 0.0,
            lowpass_hz: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.linewidth_hz,
            self.delay_s,
            self.sample_rate_hz,
            self.detection_noise_rel,
            self.adc_fullscale_sigma,
            self.highpass_hz,
            self.lowpass_hz,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("simulation parameters must be finite"));
        }
        if self.linewidth_hz <= 0.0 {
            return Err(Error::invalid("linewidth_hz must be > 0"));
        }
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::invalid("sample_rate_hz must be > 0"));
        }
        if self.delay_s < 0.0 {
            return Err(Error::invalid("delay_s must be >= 0"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be > 0"));
        }
        if self.oversample_factor == 0 {
            return Err(Error::invalid("oversample_factor must be >= 1"));
        }
        if self.adc_fullscale_sigma <= 0.0 {
            return Err(Error::invalid("adc_fullscale_sigma must be > 0"));
        }
        if self.detection_noise_rel < 0.0 {
            return Err(Error::invalid("detection_noise_rel must be >= 0"));
        }
        if self.highpass_hz < 0.0 || self.lowpass_hz < 0.0 {
            return Err(Error::invalid("filter corners must be >= 0"));
        }
        self.delay_steps().map(|_| ())
    }

    /// Internal time step Δ = 1 / (f_s · oversample_factor).
    pub fn internal_step_s(&self) -> f64 {
        1.0 / (self.sample_rate_hz * self.oversample_factor as f64)
    }

    /// The delay as a whole number of internal steps (0.1 % tolerance).
    pub fn delay_steps(&self) -> Result<usize> {
        let exact = self.delay_s / self.internal_step_s();
        let d = exact.round();
        if self.delay_s > 0.0 && (d < 1.0 || ((d - exact) / exact).abs() > 1e-3) {
            return Err(Error::invalid(format!(
                "delay {} s is {exact:.4} internal steps; pick oversample_factor so it is an integer",
                self.delay_s
            )));
        }
        Ok(d as usize)
    }

    pub fn coherence_time_s(&self) -> Result<f64> {
        coherence_time(self.linewidth_hz)
    }

    /// Per-step phase increment variance 2Δ/τ_coh.
    pub fn increment_variance(&self) -> Result<f64> {
        Ok(2.0 * self.internal_step_s() / self.coherence_time_s()?)
    }

    /// Length of the analog trace before decimation.
    pub fn trace_len(&self) -> usize {
        self.n_samples * self.oversample_factor
    }
}

/// τ_coh = 1 / (π Δν).
pub fn coherence_time(linewidth_hz: f64) -> Result<f64> {
    if !(linewidth_hz > 0.0) || !linewidth_hz.is_finite() {
        return Err(Error::invalid(format!("linewidth must be > 0, got {linewidth_hz}")));
    }
    Ok(1.0 / (PI * linewidth_hz))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogTrace {
    pub values: Vec<f64>,
    pub step_s: f64,
}

impl AnalogTrace {
    pub fn new(values: Vec<f64>, step_s: f64) -> Result<Self> {
        if !(step_s > 0.0) {
            return Err(Error::invalid("trace step must be > 0"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trace values must be finite"));
        }
        Ok(Self { values, step_s })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Population standard deviation, accumulated block-wise.
    pub fn std(&self) -> f64 {
        Moments::of(&self.values).std()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Ingested,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBlock {
    pub samples: Vec<i8>,
    pub sample_rate_hz: f64,
    pub provenance: Provenance,
}

impl SampleBlock {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The samples as raw two's-complement bytes.
    pub fn as_bytes(&self) -> &[u8] {
        // SAFETY: i8 and u8 have identical size, alignment and validity.
        unsafe { std::slice::from_raw_parts(self.samples.as_ptr().cast::<u8>(), self.samples.len()) }
    }
}

/// Running sum / sum of squares folded in block order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl Moments {
    fn of_block(values: &[f64]) -> Self {
        let mut m = Moments {
            n: values.len(),
            ..Default::default()
        };
        for &v in values {
            m.sum += v;
            m.sumsq += v * v;
        }
        m
    }

    fn merge(self, other: Moments) -> Moments {
        Moments {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sumsq: self.sumsq + other.sumsq,
        }
    }

    fn fold(parts: impl IntoIterator<Item = Moments>) -> Moments {
        parts.into_iter().fold(Moments::default(), Moments::merge)
    }

    /// Block-wise moments of a whole slice.
    pub fn of(values: &[f64]) -> Self {
        Self::fold(par::map_chunks(values, BLOCK, |_, c| Moments::of_block(c)))
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn std(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mean = self.mean();
        (self.sumsq / self.n as f64 - mean * mean).max(0.0).sqrt()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Running phase sum of the first `len` increments of increment block `c`,
/// starting from zero.
fn local_phase(cfg: &SimConfig, sigma: f64, c: usize, len: usize) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, STREAM_PHASE | c as u64);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let z: f64 = rng.sample(StandardNormal);
        acc += sigma * z;
        out.push(acc);
    }
    out
}

/// Phase values of a configuration, addressable by range without holding the
/// whole walk in memory.
struct PhaseWalk<'a> {
    cfg: &'a SimConfig,
    sigma: f64,
    n_increments: usize,
    /// `offsets[c]` is φ at the first index of increment block `c`.
    offsets: Vec<f64>,
}

impl<'a> PhaseWalk<'a> {
    fn new(cfg: &'a SimConfig, phase_len: usize) -> Result<Self> {
        let sigma = cfg.increment_variance()?.sqrt();
        let n_increments = phase_len.saturating_sub(1);
        let n_blocks = n_increments.div_ceil(BLOCK);
        let totals = par::map_indexed(n_blocks, |c| {
            let len = BLOCK.min(n_increments - c * BLOCK);
            *local_phase(cfg, sigma, c, len).last().unwrap()
        });
        let mut offsets = Vec::with_capacity(n_blocks + 1);
        let mut acc = 0.0;
        offsets.push(acc);
        for t in totals {
            acc += t;
            offsets.push(acc);
        }
        Ok(Self {
            cfg,
            sigma,
            n_increments,
            offsets,
        })
    }

    /// φ[start..end].
    fn range(&self, start: usize, end: usize) -> Vec<f64> {
        debug_assert!(end <= self.n_increments + 1);
        let mut out = Vec::with_capacity(end - start);
        let mut p = start;
        if p == 0 && end > 0 {
            out.push(0.0);
            p = 1;
        }
        while p < end {
            // φ[p] lives in increment block (p - 1) / BLOCK
            let c = (p - 1) / BLOCK;
            let j0 = (p - 1) % BLOCK;
            let block_end = ((c + 1) * BLOCK + 1).min(end);
            let need = block_end - 1 - c * BLOCK;
            let local = local_phase(self.cfg, self.sigma, c, need);
            let off = self.offsets[c];
            out.extend(local[j0..need].iter().map(|l| off + l));
            p = block_end;
        }
        out
    }
}

/// The Wiener phase walk: `φ[0] = 0` followed by the cumulative sum of
/// `trace_len + d - 1` Gaussian increments of variance `2Δ/τ_coh`.
///
/// The sum is accumulated per [`BLOCK`] of increments and offset by the
/// preceding block totals.
pub fn simulate_phase(cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let len = cfg.trace_len() + cfg.delay_steps()?;
    let walk = PhaseWalk::new(cfg, len)?;
    let n_blocks = walk.offsets.len() - 1;
    let parts = par::map_indexed(n_blocks, |c| {
        let start = c * BLOCK + 1;
        walk.range(start, (start + BLOCK).min(len))
    });
    let mut phase = Vec::with_capacity(len);
    phase.push(0.0);
    for p in parts {
        phase.extend(p);
    }
    Ok(phase)
}

/// `cos(φ[k+d] - φ[k])` with no filtering or mean removal. Always in [-1, 1].
pub fn raw_beat(phase: &[f64], delay_steps: usize) -> Result<Vec<f64>> {
    if phase.len() < delay_steps + 1 {
        return Err(Error::insufficient(format!(
            "phase has {} values, delay needs at least {}",
            phase.len(),
            delay_steps + 1
        )));
    }
    Ok(phase
        .iter()
        .zip(&phase[delay_steps..])
        .map(|(a, b)| (b - a).cos())
        .collect())
}

/// First-order high-pass followed by first-order low-pass; state carries
/// across calls so a trace can be filtered block by block.
#[derive(Clone, Copy, Debug)]
struct BandFilter {
    hp_a: Option<f64>,
    lp_alpha: Option<f64>,
    primed: bool,
    hp_prev_x: f64,
    hp_prev_y: f64,
    lp_prev_y: f64,
}

impl BandFilter {
    fn new(cfg: &SimConfig) -> Self {
        let dt = cfg.internal_step_s();
        let rc = |fc: f64| 1.0 / (2.0 * PI * fc);
        Self {
            hp_a: (cfg.highpass_hz > 0.0).then(|| rc(cfg.highpass_hz) / (rc(cfg.highpass_hz) + dt)),
            lp_alpha: (cfg.lowpass_hz > 0.0).then(|| dt / (rc(cfg.lowpass_hz) + dt)),
            primed: false,
            hp_prev_x: 0.0,
            hp_prev_y: 0.0,
            lp_prev_y: 0.0,
        }
    }

    fn is_active(&self) -> bool {
        self.hp_a.is_some() || self.lp_alpha.is_some()
    }

    fn apply(&mut self, values: &mut [f64]) {
        if !self.is_active() {
            return;
        }
        for v in values.iter_mut() {
            let x = *v;
            if !self.primed {
                self.hp_prev_x = x;
                self.hp_prev_y = 0.0;
                self.primed = true;
                self.lp_prev_y = if self.hp_a.is_some() { 0.0 } else { x };
            }
            let mut y = x;
            if let Some(a) = self.hp_a {
                y = a * (self.hp_prev_y + x - self.hp_prev_x);
                self.hp_prev_x = x;
                self.hp_prev_y = y;
            }
            if let Some(alpha) = self.lp_alpha {
                y = self.lp_prev_y + alpha * (y - self.lp_prev_y);
                self.lp_prev_y = y;
            }
            *v = y;
        }
    }
}

/// Delayed self-homodyne beat: `cos(φ[k+d] - φ[k])`, optional band
/// limiting, then mean subtraction. The output is `d` shorter than `phase`.
pub fn beat_signal(phase: &[f64], cfg: &SimConfig) -> Result<AnalogTrace> {
    let d = cfg.delay_steps()?;
    let mut values = raw_beat(phase, d)?;
    BandFilter::new(cfg).apply(&mut values);
    let mean = Moments::of(&values).mean();
    for v in &mut values {
        *v -= mean;
    }
    AnalogTrace::new(values, cfg.internal_step_s())
}

fn noise_block(seed: u64, block: usize, len: usize, scale: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_NOISE | block as u64);
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Adds i.i.d. Gaussian noise with std `detection_noise_rel × std(trace)`.
pub fn add_detection_noise(trace: &AnalogTrace, cfg: &SimConfig) -> AnalogTrace {
    let scale = cfg.detection_noise_rel * trace.std();
    if scale == 0.0 {
        return trace.clone();
    }
    let blocks = par::map_chunks(&trace.values, BLOCK, |b, chunk| {
        let noise = noise_block(cfg.seed, b, chunk.len(), scale);
        chunk.iter().zip(noise).map(|(v, n)| v + n).collect::<Vec<_>>()
    });
    AnalogTrace {
        values: blocks.concat(),
        step_s: trace.step_s,
    }
}

#[inline]
fn adc_code(v: f64, scale: f64) -> i8 {
    (v * scale).round().clamp(-128.0, 127.0) as i8
}

fn adc_scale(std: f64, cfg: &SimConfig) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::ZeroVariance("analog trace has zero variance".into()));
    }
    Ok(127.0 / (cfg.adc_fullscale_sigma * std))
}

/// Decimates by `oversample_factor`, maps `adc_fullscale_sigma × std` to
/// code +127, rounds to nearest and clips to [-128, 127].
pub fn quantize(trace: &AnalogTrace, cfg: &SimConfig) -> Result<SampleBlock> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("cannot quantize an empty trace".into()));
    }
    let scale = adc_scale(trace.std(), cfg)?;
    let samples = trace
        .values
        .iter()
        .step_by(cfg.oversample_factor.max(1))
        .map(|&v| adc_code(v, scale))
        .collect();
    Ok(SampleBlock {
        samples,
        sample_rate_hz: cfg.sample_rate_hz,
        provenance: Provenance::Simulated,
    })
}

/// Streams the whole chain (phase → beat → noise → ADC) block by block.
///
/// Produces exactly the same samples as
/// `quantize(add_detection_noise(beat_signal(simulate_phase(cfg))))`
/// without materializing the oversampled traces.
pub fn simulate(cfg: &SimConfig) -> Result<SampleBlock> {
    cfg.validate()?;
    let d = cfg.delay_steps()?;
    let trace_len = cfg.trace_len();
    let walk = PhaseWalk::new(cfg, trace_len + d)?;
    let n_blocks = trace_len.div_ceil(BLOCK);
    let block_range = |b: usize| (b * BLOCK, ((b + 1) * BLOCK).min(trace_len));

    let raw_block = |b: usize| {
        let (s, e) = block_range(b);
        let phase = walk.range(s, e + d);
        raw_beat(&phase, d).expect("range covers the delay")
    };

    // pass 1: filter state at each block start and moments of the filtered beat
    let mut filter = BandFilter::new(cfg);
    let mut filter_states = Vec::new();
    let beat_moments = if filter.is_active() {
        let mut parts = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            filter_states.push(filter);
            let mut x = raw_block(b);
            filter.apply(&mut x);
            parts.push(Moments::of_block(&x));
        }
        Moments::fold(parts)
    } else {
        Moments::fold(par::map_indexed(n_blocks, |b| Moments::of_block(&raw_block(b))))
    };
    let mean = beat_moments.mean();

    let centered = |b: usize| {
        let mut x = raw_block(b);
        if let Some(state) = filter_states.get(b) {
            let mut f = *state;
            f.apply(&mut x);
        }
        for v in &mut x {
            *v -= mean;
        }
        x
    };

    // pass 2: std of the centered beat sets the detector noise level
    let noise_scale = if cfg.detection_noise_rel > 0.0 {
        let m = Moments::fold(par::map_indexed(n_blocks, |b| Moments::of_block(&centered(b))));
        cfg.detection_noise_rel * m.std()
    } else {
        0.0
    };
    let noisy = |b: usize| {
        let mut x = centered(b);
        if noise_scale != 0.0 {
            let noise = noise_block(cfg.seed, b, x.len(), noise_scale);
            for (v, n) in x.iter_mut().zip(noise) {
                *v += n;
            }
        }
        x
    };

    // pass 3: std of the noisy trace sets the ADC scale
    let std = Moments::fold(par::map_indexed(n_blocks, |b| Moments::of_block(&noisy(b)))).std();
    let scale = adc_scale(std, cfg)?;

    // pass 4: digitize
    let os = cfg.oversample_factor;
    let parts = par::map_indexed(n_blocks, |b| {
        let (s, _) = block_range(b);
        let x = noisy(b);
        let first = (os - s % os) % os;
        x[first.min(x.len())..]
            .iter()
            .step_by(os)
            .map(|&v| adc_code(v, scale))
            .collect::<Vec<i8>>()
    });
    Ok(SampleBlock {
        samples: parts.concat(),
        sample_rate_hz: cfg.sample_rate_hz,
        provenance: Provenance::Simulated,
    })
}

/// `|mean_t e^{i(φ[t+lag] - φ[t])}|`, the empirical field autocorrelation
/// magnitude at `lag` internal steps.
pub fn field_autocorrelation(phase: &[f64], lag: usize) -> Result<f64> {
    if phase.len() <= lag {
        return Err(Error::insufficient("phase shorter than lag"));
    }
    let n = phase.len() - lag;
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in phase.iter().zip(&phase[lag..]) {
        let (s, c) = (b - a).sin_cos();
        re += c;
        im += s;
    }
    Ok((re / n as f64).hypot(im / n as f64))
}
