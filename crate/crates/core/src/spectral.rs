//! Welch power spectral density, Wiener-Khinchin autocorrelation (with a
//! direct time-domain twin used as its oracle) and the ENT serial
//! correlation coefficient.

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    #[default]
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided PSD on the grid `k · f_s / N`, `k = 0..=N/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub segment_length: usize,
    pub window: Window,
    pub segments: usize,
}

impl Psd {
    /// Frequency spacing of the grid.
    pub fn resolution_hz(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }

    /// `∫ PSD df` as a Riemann sum over the grid.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution_hz()
    }

    pub fn to_two_column(&self) -> String {
        two_column(self.frequencies.iter().copied(), self.power.iter().copied())
    }
}

fn two_column(x: impl Iterator<Item = f64>, y: impl Iterator<Item = f64>) -> String {
    let mut s = String::new();
    for (a, b) in x.zip(y) {
        let _ = writeln!(s, "{a:.9e} {b:.9e}");
    }
    s
}

/// Averaged windowed periodogram over non-overlapping segments.
pub fn psd_welch(
    samples: &[f64],
    segment_length: usize,
    window: Window,
    sample_rate_hz: f64,
) -> Result<Psd> {
    if segment_length < 2 || !segment_length.is_power_of_two() {
        return Err(Error::invalid(format!(
            "segment length must be a power of two >= 2, got {segment_length}"
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid("sample rate must be > 0"));
    }
    let segments = samples.len() / segment_length;
    if segments == 0 {
        return Err(Error::insufficient(format!(
            "{} samples cannot fill a {segment_length}-sample segment",
            samples.len()
        )));
    }
    let n = segment_length;
    let w = window.coefficients(n);
    let wpow: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;

    let periodograms = par::map_indexed(segments, |s| {
        let seg = &samples[s * n..(s + 1) * n];
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .zip(&w)
            .map(|(x, wi)| Complex::new(x * wi, 0.0))
            .collect();
        fft.process(&mut buf);
        buf[..=half].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
    });

    let mut power = vec![0.0; half + 1];
    for p in &periodograms {
        for (acc, v) in power.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let norm = 1.0 / (segments as f64 * sample_rate_hz * wpow);
    for (k, v) in power.iter_mut().enumerate() {
        *v *= norm;
        if k != 0 && k != half {
            *v *= 2.0;
        }
    }
    let df = sample_rate_hz / n as f64;
    Ok(Psd {
        frequencies: (0..=half).map(|k| k as f64 * df).collect(),
        power,
        segment_length: n,
        window,
        segments,
    })
}

/// Normalized autocorrelation; `values[0] == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

impl AutocorrResult {
    /// Two-column text with lags converted to seconds.
    pub fn to_two_column(&self, sample_period_s: f64) -> String {
        two_column(
            self.lags.iter().map(|&l| l as f64 * sample_period_s),
            self.values.iter().copied(),
        )
    }

    /// Largest |R| over lags >= 1.
    pub fn max_abs_off_zero(&self) -> f64 {
        self.values.iter().skip(1).fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn centered(samples: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 2 || max_lag * 2 >= n {
        return Err(Error::insufficient(format!(
            "max_lag {max_lag} must be below half of {n} samples"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = samples.iter().map(|v| v - mean).collect();
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance("constant input has no autocorrelation".into()));
    }
    Ok(x)
}

fn normalize(raw: impl Iterator<Item = f64>, n: usize, max_lag: usize) -> AutocorrResult {
    let unbiased: Vec<f64> = raw
        .take(max_lag + 1)
        .enumerate()
        .map(|(k, c)| c / (n - k) as f64)
        .collect();
    let r0 = unbiased[0];
    let mut values: Vec<f64> = unbiased.iter().map(|c| c / r0).collect();
    values[0] = 1.0;
    AutocorrResult {
        lags: (0..=max_lag).collect(),
        values,
    }
}

/// Minimum samples per FFT segment of [`autocorr_wk`].
const WK_SEGMENT: usize = 1 << 16;

/// Linear autocorrelation through the spectrum: mean removal, then the lag
/// sums are accumulated segment by segment as `IFFT(conj(A)·C)`, where `A`
/// is a segment and `C` the same segment extended by `max_lag` samples,
/// both zero-padded so no circular wrap reaches lags `0..=max_lag`. Finally
/// division by the overlap count `n - k` and by the lag-0 value. Memory stays
/// proportional to the segment, not to the input.
pub fn autocorr_wk(samples: &[f64], max_lag: usize) -> Result<AutocorrResult> {
    let x = centered(samples, max_lag)?;
    let n = x.len();
    let seg = WK_SEGMENT.max(max_lag + 1);
    let len = (seg + max_lag).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let zero = Complex::new(0.0, 0.0);
    let parts = par::map_indexed(n.div_ceil(seg), |b| {
        let start = b * seg;
        let a_end = (start + seg).min(n);
        let c_end = (a_end + max_lag).min(n);
        let mut a: Vec<Complex<f64>> = x[start..a_end].iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut c: Vec<Complex<f64>> = x[start..c_end].iter().map(|&v| Complex::new(v, 0.0)).collect();
        a.resize(len, zero);
        c.resize(len, zero);
        fwd.process(&mut a);
        fwd.process(&mut c);
        for (ai, ci) in a.iter_mut().zip(&c) {
            *ai = ai.conj() * ci;
        }
        inv.process(&mut a);
        a.truncate(max_lag + 1);
        a
    });
    let scale = 1.0 / len as f64;
    let mut sums = vec![0.0; max_lag + 1];
    for part in parts {
        for (s, v) in sums.iter_mut().zip(part) {
            *s += v.re * scale;
        }
    }
    Ok(normalize(sums.into_iter(), n, max_lag))
}

/// Time-domain sums with the same normalization as [`autocorr_wk`].
pub fn autocorr_direct(samples: &[f64], max_lag: usize) -> Result<AutocorrResult> {
    let x = centered(samples, max_lag)?;
    let n = x.len();
    let raw = par::map_indexed(max_lag + 1, |k| {
        x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>()
    });
    Ok(normalize(raw.into_iter(), n, max_lag))
}

/// Pearson correlation of a byte sequence with its cyclic shift by one
/// (ENT convention: the last byte pairs with the first).
pub fn serial_correlation(bytes: &[u8]) -> Result<f64> {
    let n = bytes.len();
    if n < 2 {
        return Err(Error::insufficient("serial correlation needs at least 2 values"));
    }
    const CHUNK: usize = 1 << 20;
    let parts = par::map_indexed(n.div_ceil(CHUNK), |c| {
        let (s, e) = (c * CHUNK, ((c + 1) * CHUNK).min(n));
        let (mut s1, mut s2, mut cross) = (0u64, 0u64, 0u64);
        for i in s..e {
            let a = bytes[i] as u64;
            let b = bytes[(i + 1) % n] as u64;
            s1 += a;
            s2 += a * a;
            cross += a * b;
        }
        (s1, s2, cross)
    });
    let (s1, s2, cross) = parts
        .into_iter()
        .fold((0u128, 0u128, 0u128), |acc, p| {
            (acc.0 + p.0 as u128, acc.1 + p.1 as u128, acc.2 + p.2 as u128)
        });
    let nn = n as u128;
    let den = nn * s2 - s1 * s1;
    if den == 0 {
        return Err(Error::ZeroVariance("constant sequence".into()));
    }
    let num = nn as i128 * cross as i128 - (s1 * s1) as i128;
    Ok(num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn white_noise_is_flat() {
        let fs = 100e6;
        let x = gaussian(256 * 1024, 1);
        let psd = psd_welch(&x, 1024, Window::Hann, fs).unwrap();
        assert_eq!(psd.segments, 256);
        // unit-variance white noise: one-sided level 2/fs
        let interior = &psd.power[1..psd.power.len() - 1];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean / (2.0 / fs) - 1.0).abs() < 0.05, "{}", mean * fs / 2.0);
    }

    #[test]
    fn sinusoid_concentrates_in_its_bin() {
        let n = 1024;
        let bin = 37;
        let x: Vec<f64> = (0..n * 8)
            .map(|i| (2.0 * std::f64::consts::PI * bin as f64 * i as f64 / n as f64).sin())
            .collect();
        let psd = psd_welch(&x, n, Window::Hann, 1.0).unwrap();
        let peak = psd.power[bin];
        for (k, &p) in psd.power.iter().enumerate() {
            if (k as i64 - bin as i64).abs() > 1 {
                assert!(peak >= 100.0 * p, "bin {k}");
            }
        }
    }

    #[test]
    fn constant_goes_to_dc() {
        let psd = psd_welch(&[3.0; 4096], 256, Window::Rect, 1.0).unwrap();
        assert!(psd.power[0] > 0.0);
        assert!(psd.power[1..].iter().all(|&p| p < 1e-20));
    }

    #[test]
    fn parseval_rect() {
        let x = gaussian(1 << 18, 2);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let psd = psd_welch(&x, 4096, Window::Rect, 50.0).unwrap();
        assert!((psd.total_power() / var - 1.0).abs() < 0.01);
    }

    #[test]
    fn psd_argument_errors() {
        assert!(psd_welch(&[0.0; 100], 100, Window::Rect, 1.0).is_err());
        assert!(matches!(
            psd_welch(&[0.0; 100], 128, Window::Rect, 1.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn autocorr_basics() {
        let x = gaussian(4096, 3);
        let r = autocorr_wk(&x, 50).unwrap();
        assert_eq!(r.values[0], 1.0);
        assert_eq!(r.lags.len(), 51);
        assert!(matches!(autocorr_wk(&[2.0; 100], 5), Err(Error::ZeroVariance(_))));
        assert!(autocorr_wk(&x, 4096).is_err());
    }

    #[test]
    fn wk_matches_direct() {
        let x = gaussian(4096, 4);
        let a = autocorr_wk(&x, 2000).unwrap();
        let b = autocorr_direct(&x, 2000).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn segmented_wk_matches_direct() {
        // several segments, the last one short, lags crossing segment edges
        for (n, lag) in [(3 * WK_SEGMENT + 777, 300), (WK_SEGMENT + 1, 0), (150_000, 20_000)] {
            let x = gaussian(n, n as u64);
            let a = autocorr_wk(&x, lag).unwrap();
            let b = autocorr_direct(&x, lag).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                assert!((u - v).abs() < 1e-9, "n={n} lag={lag}");
            }
        }
    }

    #[test]
    fn periodic_input_peaks_at_period() {
        let period = 16;
        let x: Vec<f64> = (0..4096).map(|i| ((i % period) as f64 - 7.5).powi(3)).collect();
        let r = autocorr_direct(&x, 100).unwrap();
        assert!((r.values[period] - 1.0).abs() <= 2.0 / x.len() as f64);
        assert!((r.values[2 * period] - 1.0).abs() <= 2.0 / x.len() as f64);
    }

    #[test]
    fn white_noise_autocorr_small() {
        let x = gaussian(1_000_000, 5);
        let r = autocorr_wk(&x, 100).unwrap();
        assert!(r.max_abs_off_zero() < 0.01);
    }

    #[test]
    fn serial_correlation_cases() {
        let alt: Vec<u8> = (0..1000).map(|i| 1 + (i % 2) as u8).collect();
        assert!((serial_correlation(&alt).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(serial_correlation(&[7; 50]), Err(Error::ZeroVariance(_))));
        assert!(serial_correlation(&[1]).is_err());
        // [1,2,1]: cyclic pairs (1,2),(2,1),(1,1)
        assert!((serial_correlation(&[1, 2, 1]).unwrap() + 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn wk_direct_equivalence(seed in any::<u64>(), n in 8usize..(1 << 14)) {
            let x = gaussian(n, seed);
            let max_lag = (n / 2).saturating_sub(1).min(300);
            let a = autocorr_wk(&x, max_lag).unwrap();
            let b = autocorr_direct(&x, max_lag).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn affine_invariance(seed in any::<u64>(), a in 0.01f64..100.0, b in -50.0f64..50.0) {
            let x = gaussian(512, seed);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let rx = autocorr_wk(&x, 40).unwrap();
            let ry = autocorr_wk(&y, 40).unwrap();
            for (u, v) in rx.values.iter().zip(&ry.values) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn bounded_by_overlap(seed in any::<u64>()) {
            let x = gaussian(300, seed);
            let r = autocorr_direct(&x, 149).unwrap();
            for (k, v) in r.values.iter().enumerate() {
                prop_assert!(v.abs() <= 300.0 / (300 - k) as f64 + 1e-12);
            }
        }
    }
}
