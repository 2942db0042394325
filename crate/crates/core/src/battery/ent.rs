//! ENT-style metrics over a byte stream.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::Serialize;

use super::TestResult;
use crate::entropy::{shannon_entropy, Histogram256};
use crate::error::{Error, Result};
use crate::par;
use crate::special::{chi2_sf, erfc};
use crate::spectral::serial_correlation;

const MC_GROUP: usize = 6;
const MC_CHUNK: usize = MC_GROUP << 18;

/// Raw ENT table values plus derived test results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntSummary {
    pub n_bytes: usize,
    pub entropy_per_byte: f64,
    pub entropy_per_bit: f64,
    pub compression_percent: f64,
    pub chi_square: f64,
    pub chi_square_p: f64,
    pub chi_square_bits: f64,
    pub chi_square_bits_p: f64,
    pub mean_byte: f64,
    pub mean_bit: f64,
    pub monte_carlo_pi: Option<f64>,
    pub serial_correlation: Option<f64>,
    pub results: Vec<TestResult>,
    /// Sub-metrics that could not be computed, with the reason.
    pub insufficient: Vec<(String, String)>,
}

impl EntSummary {
    pub fn result(&self, name: &str) -> Option<&TestResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// Human-readable block in the layout of ENT's report.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s += &format!(
            "Entropy = {:.6} bits per byte ({:.6} bits per bit).\n",
            self.entropy_per_byte, self.entropy_per_bit
        );
        s += &format!(
            "Optimum compression would reduce the size of this {} byte file by {:.0} percent.\n",
            self.n_bytes, self.compression_percent
        );
        s += &format!(
            "Chi square distribution for {} samples is {:.2}, and randomly would exceed this value {:.2} percent of the times.\n",
            self.n_bytes,
            self.chi_square,
            100.0 * self.chi_square_p
        );
        s += &format!(
            "Arithmetic mean value of data bytes is {:.4} (127.5 = random); bit mean {:.6}.\n",
            self.mean_byte, self.mean_bit
        );
        match self.monte_carlo_pi {
            Some(pi) => {
                s += &format!(
                    "Monte Carlo value for Pi is {:.9} (error {:.2} percent).\n",
                    pi,
                    100.0 * (pi - PI).abs() / PI
                )
            }
            None => s += "Monte Carlo value for Pi: insufficient data.\n",
        }
        match self.serial_correlation {
            Some(r) => s += &format!("Serial correlation coefficient is {r:.6} (totally uncorrelated = 0.0).\n"),
            None => s += "Serial correlation coefficient: insufficient data.\n",
        }
        s
    }
}

fn two_sided(z: f64) -> f64 {
    erfc(z.abs() / SQRT_2)
}

/// Returns `(inside, groups)` for the 6-byte Monte-Carlo π estimate.
pub fn monte_carlo_counts(bytes: &[u8]) -> (u64, u64) {
    let parts = par::map_chunks(bytes, MC_CHUNK, |_, chunk| {
        let mut inside = 0u64;
        let mut groups = 0u64;
        for g in chunk.chunks_exact(MC_GROUP) {
            let x = u64::from_be_bytes([0, 0, 0, 0, 0, g[0], g[1], g[2]]);
            let y = u64::from_be_bytes([0, 0, 0, 0, 0, g[3], g[4], g[5]]);
            if x * x + y * y < 1u64 << 48 {
                inside += 1;
            }
            groups += 1;
        }
        (inside, groups)
    });
    parts
        .into_iter()
        .fold((0, 0), |a, p| (a.0 + p.0, a.1 + p.1))
}

pub fn ent_suite(bytes: &[u8]) -> Result<EntSummary> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput("ENT metrics need at least one byte".into()));
    }
    let n = bytes.len();
    let nf = n as f64;
    let hist = Histogram256::from_bytes(bytes)?;
    let counts = hist.counts();

    let h_byte = shannon_entropy(&hist)?;
    let ones: u64 = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| c * (b as u8).count_ones() as u64)
        .sum();
    let n_bits = 8 * n as u64;
    let p1 = ones as f64 / n_bits as f64;
    let h_bit = [p1, 1.0 - p1]
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>();

    let expected = nf / 256.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let chi2_p = chi2_sf(chi2, 255.0);
    let half = n_bits as f64 / 2.0;
    let zeros = n_bits - ones;
    let chi2_bits = ((ones as f64 - half).powi(2) + (zeros as f64 - half).powi(2)) / half;
    let chi2_bits_p = chi2_sf(chi2_bits, 1.0);

    let mean_byte = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| b as f64 * c as f64)
        .sum::<f64>()
        / nf;

    let mut results = Vec::new();
    let mut insufficient = Vec::new();

    // likelihood-ratio statistic for the byte entropy deficit
    let g = 2.0 * nf * LN_2 * (8.0 - h_byte);
    results.push(
        TestResult::new("ent_entropy", h_byte, vec![chi2_sf(g.max(0.0), 255.0)], n * 8)
            .param("bits_per_bit", h_bit)
            .param("compression_percent", 100.0 * (8.0 - h_byte) / 8.0),
    );
    results.push(
        TestResult::new("ent_chi_square", chi2, vec![chi2_p], n * 8)
            .param("chi_square_bits", chi2_bits)
            .param("p_bits", chi2_bits_p),
    );
    let z_mean = (ones as f64 - half) / (n_bits as f64 / 4.0).sqrt();
    results.push(
        TestResult::new("ent_mean", p1, vec![two_sided(z_mean)], n * 8).param("mean_byte", mean_byte),
    );

    let mut pi_hat = None;
    if n >= MC_GROUP {
        let (inside, groups) = monte_carlo_counts(bytes);
        let est = 4.0 * inside as f64 / groups as f64;
        let q = PI / 4.0;
        let gf = groups as f64;
        let z = (inside as f64 - gf * q) / (gf * q * (1.0 - q)).sqrt();
        pi_hat = Some(est);
        results.push(
            TestResult::new("ent_monte_carlo_pi", est, vec![two_sided(z)], n * 8)
                .param("groups", gf)
                .param("inside", inside as f64),
        );
    } else {
        insufficient.push((
            "ent_monte_carlo_pi".to_string(),
            format!("needs at least {MC_GROUP} bytes, got {n}"),
        ));
    }

    let mut serial = None;
    match serial_correlation(bytes) {
        Ok(r) => {
            serial = Some(r);
            results.push(TestResult::new(
                "ent_serial_correlation",
                r,
                vec![two_sided(r * nf.sqrt())],
                n * 8,
            ));
        }
        Err(e) => insufficient.push(("ent_serial_correlation".to_string(), e.to_string())),
    }

    Ok(EntSummary {
        n_bytes: n,
        entropy_per_byte: h_byte,
        entropy_per_bit: h_bit,
        compression_percent: 100.0 * (8.0 - h_byte) / 8.0,
        chi_square: chi2,
        chi_square_p: chi2_p,
        chi_square_bits: chi2_bits,
        chi_square_bits_p: chi2_bits_p,
        mean_byte,
        mean_bit: p1,
        monte_carlo_pi: pi_hat,
        serial_correlation: serial,
        results,
        insufficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    #[test]
    fn exhaustive_bytes() {
        let bytes: Vec<u8> = (0..4).flat_map(|_| 0..=255u8).collect();
        let s = ent_suite(&bytes).unwrap();
        assert_eq!(s.chi_square, 0.0);
        assert_eq!(s.chi_square_p, 1.0);
        assert_eq!(s.mean_bit, 0.5);
        assert_eq!(s.mean_byte, 127.5);
        assert!((s.entropy_per_byte - 8.0).abs() < 1e-12);
        assert_eq!(s.entropy_per_bit, 1.0);
        assert_eq!(s.results.len(), 5);
    }

    #[test]
    fn all_zero_monte_carlo() {
        let s = ent_suite(&[0u8; 60]).unwrap();
        assert_eq!(s.monte_carlo_pi, Some(4.0));
        assert!(s.serial_correlation.is_none());
        assert_eq!(s.insufficient.len(), 1);
        assert_eq!(s.insufficient[0].0, "ent_serial_correlation");
    }

    #[test]
    fn short_input_markers() {
        let s = ent_suite(&[1, 2, 3]).unwrap();
        assert!(s.monte_carlo_pi.is_none());
        assert!(s.result("ent_monte_carlo_pi").is_none());
        assert!(s.result("ent_chi_square").is_some());
        assert!(matches!(ent_suite(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn corner_group_is_outside() {
        // X = Y = 2^24 - 1 lies outside the unit circle; X = 0, Y = max inside
        let s = ent_suite(&[0xFF; 6]).unwrap();
        assert_eq!(s.monte_carlo_pi, Some(0.0));
        let s = ent_suite(&[0, 0, 0, 0xFF, 0xFF, 0xFF]).unwrap();
        assert_eq!(s.monte_carlo_pi, Some(4.0));
    }

    #[test]
    fn random_bytes_look_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut bytes = vec![0u8; 1 << 20];
        rng.fill_bytes(&mut bytes);
        let s = ent_suite(&bytes).unwrap();
        assert!(s.entropy_per_byte > 7.999);
        assert!((s.monte_carlo_pi.unwrap() - PI).abs() < 0.02);
        assert!(s.serial_correlation.unwrap().abs() < 0.005);
        for r in &s.results {
            assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        let table = s.to_table();
        assert!(table.contains("Monte Carlo value for Pi"));
    }

    #[test]
    fn chunked_monte_carlo_matches_sequential() {
        let bytes: Vec<u8> = (0..(MC_CHUNK * 2 + 17)).map(|i| (i * 131 % 256) as u8).collect();
        let (inside, groups) = monte_carlo_counts(&bytes);
        let mut expect = 0;
        for g in bytes.chunks_exact(6) {
            let x = (g[0] as u64) << 16 | (g[1] as u64) << 8 | g[2] as u64;
            let y = (g[3] as u64) << 16 | (g[4] as u64) << 8 | g[5] as u64;
            let (xf, yf) = (x as f64 / 16_777_216.0, y as f64 / 16_777_216.0);
            if xf * xf + yf * yf < 1.0 {
                expect += 1;
            }
        }
        assert_eq!(groups, (bytes.len() / 6) as u64);
        assert_eq!(inside, expect);
    }
}
