//! Byte histograms and the entropy measures used to size the extractor:
//! Shannon entropy (upper estimate of extractable bits), min-entropy (lower,
//! worst-case estimate), the differential entropy of a fitted Gaussian, and
//! normalized block entropy `H(m)/m` of a bit stream.

use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::error::{Error, Result};
use crate::par;

const COUNT_CHUNK: usize = 1 << 20;

/// Occurrence counts over the 256 byte values.
///
/// `signed` records the bin labelling: index `i` stands for value `i - 128`
/// when signed, `i` otherwise. Only [`fit_gaussian_sigma`] cares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
    signed: bool,
}

impl Histogram256 {
    pub fn empty(signed: bool) -> Self {
        Self {
            counts: [0; 256],
            total: 0,
            signed,
        }
    }

    pub fn from_counts(counts: [u64; 256], signed: bool) -> Self {
        let total = counts.iter().sum();
        Self {
            counts,
            total,
            signed,
        }
    }

    /// Unsigned histogram of raw bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::EmptyInput("histogram of no bytes".into()));
        }
        let parts = par::map_chunks(bytes, COUNT_CHUNK, |_, c| {
            let mut h = Histogram256::empty(false);
            h.add_bytes(c);
            h
        });
        Ok(parts.into_iter().fold(Histogram256::empty(false), |a, b| a.merge(&b)))
    }

    /// Signed histogram of ADC codes, bins labelled -128..=127.
    pub fn from_samples(samples: &[i8]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("histogram of no samples".into()));
        }
        let parts = par::map_chunks(samples, COUNT_CHUNK, |_, c| {
            let mut h = Histogram256::empty(true);
            for &s in c {
                h.counts[(s as i16 + 128) as usize] += 1;
            }
            h.total += c.len() as u64;
            h
        });
        Ok(parts.into_iter().fold(Histogram256::empty(true), |a, b| a.merge(&b)))
    }

    pub fn add_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            let idx = if self.signed { (b as i8 as i16 + 128) as usize } else { b as usize };
            self.counts[idx] += 1;
        }
        self.total += bytes.len() as u64;
    }

    pub fn merge(mut self, other: &Histogram256) -> Histogram256 {
        assert_eq!(self.signed, other.signed, "merging differently labelled histograms");
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Value represented by bin `i`.
    pub fn bin_value(&self, i: usize) -> i32 {
        if self.signed {
            i as i32 - 128
        } else {
            i as i32
        }
    }

    fn require_data(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::EmptyInput("histogram total is zero".into()));
        }
        Ok(())
    }
}

fn shannon_of_counts(counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// `-Σ p_i log2 p_i` over non-empty bins, in bits per byte.
pub fn shannon_entropy(h: &Histogram256) -> Result<f64> {
    h.require_data()?;
    Ok(shannon_of_counts(&h.counts, h.total))
}

/// `-log2 max_i p_i`, in bits per byte.
pub fn min_entropy(h: &Histogram256) -> Result<f64> {
    h.require_data()?;
    let max = *h.counts.iter().max().unwrap();
    Ok(-(max as f64 / h.total as f64).log2())
}

/// Population standard deviation of the histogram (moment estimator), in
/// code units.
pub fn fit_gaussian_sigma(h: &Histogram256) -> Result<f64> {
    h.require_data()?;
    if h.counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::ZeroVariance("all mass in a single bin".into()));
    }
    let (mut s1, mut s2) = (0i128, 0i128);
    for (i, &c) in h.counts.iter().enumerate() {
        let v = h.bin_value(i) as i128;
        s1 += c as i128 * v;
        s2 += c as i128 * v * v;
    }
    let n = h.total as i128;
    // n²·var exactly in integers
    let scaled = n * s2 - s1 * s1;
    Ok((scaled as f64).sqrt() / n as f64)
}

/// Differential entropy of a Gaussian, `½ log2(2πeσ²)`.
pub fn gaussian_entropy(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).log2())
}

pub const MAX_BLOCK_BITS: u32 = 20;

/// Shannon entropy `H(m)` of non-overlapping `m`-bit blocks (MSB-first block
/// values) and the normalized entropy `H(m)/m`.
pub fn block_entropy(bits: &BitStream, m: u32) -> Result<(f64, f64)> {
    if !(1..=MAX_BLOCK_BITS).contains(&m) {
        return Err(Error::invalid(format!("block size must be in 1..={MAX_BLOCK_BITS}, got {m}")));
    }
    let w = m as usize;
    let n_blocks = bits.len() / w;
    if n_blocks == 0 {
        return Err(Error::insufficient(format!(
            "{} bits cannot form a {m}-bit block",
            bits.len()
        )));
    }
    let per_chunk = 1usize << 22;
    let n_chunks = n_blocks.div_ceil(per_chunk);
    let parts = par::map_indexed(n_chunks, |c| {
        let mut counts = vec![0u64; 1 << m];
        let start = c * per_chunk;
        let end = (start + per_chunk).min(n_blocks);
        for b in start..end {
            counts[bits.read_bits(b * w, m) as usize] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; 1 << m];
    for p in parts {
        for (a, b) in counts.iter_mut().zip(p) {
            *a += b;
        }
    }
    let h = shannon_of_counts(&counts, n_blocks as u64);
    Ok((h, h / m as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub shannon_bits_per_byte: f64,
    pub min_entropy_bits_per_byte: f64,
    pub gaussian_fit_sigma: f64,
    pub gaussian_fit_entropy: f64,
    pub sample_count: u64,
}

impl EntropyReport {
    pub fn from_histogram(h: &Histogram256) -> Result<Self> {
        let sigma = fit_gaussian_sigma(h)?;
        Ok(Self {
            shannon_bits_per_byte: shannon_entropy(h)?,
            min_entropy_bits_per_byte: min_entropy(h)?,
            gaussian_fit_sigma: sigma,
            gaussian_fit_entropy: gaussian_entropy(sigma)?,
            sample_count: h.total(),
        })
    }
}
