//! NIST SP 800-22 statistical tests (eight-test subset).
//!
//! All tests take unpacked bits (`0` or `1` per element). Hard minimum
//! lengths are errors; parameter recommendations that are not met are
//! recorded as warnings on the result.

use std::f64::consts::{LN_2, SQRT_2};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::TestResult;
use crate::error::{Error, Result};
use crate::special::{erfc, igamc, normal_cdf};

pub const MIN_BITS: usize = 100;
pub const MIN_BITS_LONGEST_RUN: usize = 128;

fn require(name: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::insufficient(format!(
            "{name} needs at least {min} bits, got {n}"
        )));
    }
    Ok(())
}

fn ones(eps: &[u8]) -> usize {
    eps.iter().map(|&b| b as usize).sum()
}

pub fn monobit(eps: &[u8]) -> Result<TestResult> {
    require("monobit", eps.len(), MIN_BITS)?;
    Ok(monobit_core(eps))
}

pub(crate) fn monobit_core(eps: &[u8]) -> TestResult {
    let n = eps.len();
    let s = 2 * ones(eps) as i64 - n as i64;
    let s_obs = s.unsigned_abs() as f64 / (n as f64).sqrt();
    TestResult::new("monobit", s as f64, vec![erfc(s_obs / SQRT_2)], n)
}

pub fn block_frequency(eps: &[u8], m: usize) -> Result<TestResult> {
    require("block_frequency", eps.len(), MIN_BITS)?;
    if m == 0 || m > eps.len() {
        return Err(Error::invalid(format!(
            "block length {m} must be in 1..={}",
            eps.len()
        )));
    }
    let mut r = block_frequency_core(eps, m);
    let n = eps.len();
    if m < 20 || (m as f64) <= 0.01 * n as f64 {
        r.warn(format!("block length {m} outside the recommended M >= 20, M > 0.01n"));
    }
    if n / m >= 100 {
        r.warn(format!("{} blocks exceeds the recommended N < 100", n / m));
    }
    Ok(r)
}

pub(crate) fn block_frequency_core(eps: &[u8], m: usize) -> TestResult {
    let blocks = eps.len() / m;
    let chi2: f64 = 4.0
        * m as f64
        * eps
            .chunks_exact(m)
            .map(|b| {
                let pi = ones(b) as f64 / m as f64 - 0.5;
                pi * pi
            })
            .sum::<f64>();
    let p = igamc(blocks as f64 / 2.0, chi2 / 2.0);
    TestResult::new("block_frequency", chi2, vec![p], eps.len())
        .param("M", m as f64)
        .param("N", blocks as f64)
}

pub fn runs(eps: &[u8]) -> Result<TestResult> {
    require("runs", eps.len(), MIN_BITS)?;
    Ok(runs_core(eps))
}

pub(crate) fn runs_core(eps: &[u8]) -> TestResult {
    let n = eps.len();
    let nf = n as f64;
    let pi = ones(eps) as f64 / nf;
    let v = 1 + eps.windows(2).filter(|w| w[0] != w[1]).count();
    let tau = 2.0 / nf.sqrt();
    let mut r = if (pi - 0.5).abs() >= tau {
        let mut r = TestResult::new("runs", v as f64, vec![0.0], n);
        r.warn("frequency prerequisite failed".to_string());
        r
    } else {
        let q = pi * (1.0 - pi);
        let p = erfc((v as f64 - 2.0 * nf * q).abs() / (2.0 * (2.0 * nf).sqrt() * q));
        TestResult::new("runs", v as f64, vec![p], n)
    };
    r = r.param("pi", pi);
    r
}

struct LongestRunTable {
    m: usize,
    v_min: usize,
    pi: &'static [f64],
}

const LONGEST_8: LongestRunTable = LongestRunTable {
    m: 8,
    v_min: 1,
    pi: &[0.21484375, 0.3671875, 0.23046875, 0.1875],
};

const LONGEST_128: LongestRunTable = LongestRunTable {
    m: 128,
    v_min: 4,
    pi: &[
        0.1174035788,
        0.242955959,
        0.249363483,
        0.17517706,
        0.102701071,
        0.112398847,
    ],
};

const LONGEST_10K: LongestRunTable = LongestRunTable {
    m: 10_000,
    v_min: 10,
    pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

pub fn longest_run(eps: &[u8]) -> Result<TestResult> {
    let n = eps.len();
    require("longest_run", n, MIN_BITS_LONGEST_RUN)?;
    let table = if n < 6272 {
        &LONGEST_8
    } else if n < 750_000 {
        &LONGEST_128
    } else {
        &LONGEST_10K
    };
    Ok(longest_run_core(eps, table))
}

fn longest_run_core(eps: &[u8], t: &LongestRunTable) -> TestResult {
    let k = t.pi.len() - 1;
    let blocks = eps.len() / t.m;
    let mut nu = vec![0u64; k + 1];
    for block in eps.chunks_exact(t.m) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in block {
            run = if b == 1 { run + 1 } else { 0 };
            best = best.max(run);
        }
        nu[best.clamp(t.v_min, t.v_min + k) - t.v_min] += 1;
    }
    let nb = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(t.pi)
        .map(|(&v, &p)| (v as f64 - nb * p).powi(2) / (nb * p))
        .sum();
    let p = igamc(k as f64 / 2.0, chi2 / 2.0);
    TestResult::new("longest_run", chi2, vec![p], eps.len())
        .param("M", t.m as f64)
        .param("N", nb)
        .param("K", k as f64)
}

pub fn cusum(eps: &[u8]) -> Result<TestResult> {
    require("cusum", eps.len(), MIN_BITS)?;
    Ok(cusum_core(eps))
}

fn max_excursion(steps: impl Iterator<Item = u8>) -> i64 {
    let mut s = 0i64;
    let mut z = 0i64;
    for b in steps {
        s += 2 * b as i64 - 1;
        z = z.max(s.abs());
    }
    z
}

fn cusum_p(n: usize, z: i64) -> f64 {
    // integer bounds as in the reference implementation (truncating division)
    let nz = n as i64 / z;
    let (start1, start2, end) = ((-nz + 1) / 4, (-nz - 3) / 4, (nz - 1) / 4);
    let zf = z as f64;
    let sq = (n as f64).sqrt();
    let mut s1 = 0.0;
    for k in start1..=end {
        let k = k as f64;
        s1 += normal_cdf((4.0 * k + 1.0) * zf / sq) - normal_cdf((4.0 * k - 1.0) * zf / sq);
    }
    let mut s2 = 0.0;
    for k in start2..=end {
        let k = k as f64;
        s2 += normal_cdf((4.0 * k + 3.0) * zf / sq) - normal_cdf((4.0 * k + 1.0) * zf / sq);
    }
    (1.0 - s1 + s2).clamp(0.0, 1.0)
}

pub(crate) fn cusum_core(eps: &[u8]) -> TestResult {
    let n = eps.len();
    let z_fwd = max_excursion(eps.iter().copied());
    let z_rev = max_excursion(eps.iter().rev().copied());
    TestResult::new(
        "cusum",
        z_fwd as f64,
        vec![cusum_p(n, z_fwd), cusum_p(n, z_rev)],
        n,
    )
    .param("z_forward", z_fwd as f64)
    .param("z_reverse", z_rev as f64)
}

/// Counts of every overlapping `m`-bit pattern with `m - 1` bits of
/// wraparound, so exactly `n` windows are counted.
fn pattern_counts(eps: &[u8], m: u32) -> Vec<u32> {
    let mut counts = vec![0u32; 1usize << m];
    if m == 0 {
        counts[0] = eps.len() as u32;
        return counts;
    }
    let mask = (1usize << m) - 1;
    let mut v = 0usize;
    for &b in &eps[..m as usize - 1] {
        v = (v << 1) | b as usize;
    }
    for &b in eps[m as usize - 1..].iter().chain(&eps[..m as usize - 1]) {
        v = ((v << 1) | b as usize) & mask;
        counts[v] += 1;
    }
    counts
}

fn check_m(name: &str, n: usize, m: u32, max: u32) -> Result<()> {
    if m == 0 || m > max || m as usize > n {
        return Err(Error::invalid(format!(
            "{name} block length {m} must be in 1..={}",
            max.min(n as u32)
        )));
    }
    Ok(())
}

fn floor_log2(n: usize) -> u32 {
    usize::BITS - 1 - n.leading_zeros()
}

pub fn approx_entropy(eps: &[u8], m: u32) -> Result<TestResult> {
    let n = eps.len();
    require("approximate_entropy", n, MIN_BITS)?;
    check_m("approximate_entropy", n, m, 24)?;
    let mut r = approx_entropy_core(eps, m);
    if (m as i64) >= floor_log2(n) as i64 - 5 {
        r.warn(format!("m = {m} exceeds the recommended m < log2(n) - 5"));
    }
    Ok(r)
}

pub(crate) fn approx_entropy_core(eps: &[u8], m: u32) -> TestResult {
    let n = eps.len() as f64;
    let phi = |m: u32| -> f64 {
        pattern_counts(eps, m)
            .into_iter()
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi(m) - phi(m + 1);
    let chi2 = 2.0 * n * (LN_2 - apen);
    let p = igamc(2f64.powi(m as i32 - 1), chi2 / 2.0);
    TestResult::new("approximate_entropy", chi2, vec![p], eps.len())
        .param("m", m as f64)
        .param("ApEn", apen)
}

fn psi2(eps: &[u8], m: i32) -> f64 {
    if m <= 0 {
        return 0.0;
    }
    let n = eps.len() as f64;
    let sum: f64 = pattern_counts(eps, m as u32)
        .into_iter()
        .map(|c| (c as f64) * (c as f64))
        .sum();
    2f64.powi(m) / n * sum - n
}

pub fn serial(eps: &[u8], m: u32) -> Result<TestResult> {
    let n = eps.len();
    require("serial", n, MIN_BITS)?;
    check_m("serial", n, m, 24)?;
    if m < 2 {
        return Err(Error::invalid("serial block length must be at least 2"));
    }
    let mut r = serial_core(eps, m);
    if (m as i64) >= floor_log2(n) as i64 - 2 {
        r.warn(format!("m = {m} exceeds the recommended m < log2(n) - 2"));
    }
    Ok(r)
}

pub(crate) fn serial_core(eps: &[u8], m: u32) -> TestResult {
    let m = m as i32;
    let (a, b, c) = (psi2(eps, m), psi2(eps, m - 1), psi2(eps, m - 2));
    let d1 = a - b;
    let d2 = a - 2.0 * b + c;
    let p1 = igamc(2f64.powi(m - 2), d1 / 2.0);
    let p2 = igamc(2f64.powi(m - 3), d2 / 2.0);
    TestResult::new("serial", d1, vec![p1, p2], eps.len())
        .param("m", m as f64)
        .param("del2_psi2", d2)
}

pub fn dft(eps: &[u8]) -> Result<TestResult> {
    let n = eps.len();
    require("dft", n, MIN_BITS)?;
    let mut r = dft_core(eps);
    if n < 1000 {
        r.warn(format!("n = {n} is below the recommended 1000 bits"));
    }
    Ok(r)
}

pub(crate) fn dft_core(eps: &[u8]) -> TestResult {
    let n = eps.len();
    let nf = n as f64;
    let mut buf: Vec<Complex<f64>> = eps
        .iter()
        .map(|&b| Complex::new(2.0 * b as f64 - 1.0, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let threshold = (20f64.ln() * nf).sqrt();
    let t2 = threshold * threshold;
    let n1 = buf[..n / 2].iter().filter(|c| c.norm_sqr() < t2).count();
    let n0 = 0.95 * nf / 2.0;
    let d = (n1 as f64 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    TestResult::new("dft", d, vec![erfc(d.abs() / SQRT_2)], n)
        .param("N1", n1 as f64)
        .param("N0", n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstream::BitStream;

    const E100: &str = "1100100100001111110110101010001000100001011010001100001000110100\
                        110001001100011001100010100010111000";

    fn bits(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn monobit_known_answers() {
        close(monobit_core(&bits("1011010101")).p_values[0], 0.527089);
        close(monobit(&bits(E100)).unwrap().p_values[0], 0.109599);
    }

    #[test]
    fn monobit_edges() {
        let alt: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
        assert_eq!(monobit(&alt).unwrap().p_values[0], 1.0);
        let zeros = vec![0u8; 100];
        let r = monobit(&zeros).unwrap();
        let expect = statrs::function::erf::erfc(10.0 / SQRT_2);
        assert!((r.p_values[0] - expect).abs() / expect < 1e-9);
        assert!(!r.pass);
        assert!(matches!(monobit(&zeros[..99]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn block_frequency_known_answers() {
        close(block_frequency_core(&bits("0110011010"), 3).p_values[0], 0.801252);
        close(block_frequency(&bits(E100), 10).unwrap().p_values[0], 0.706438);
    }

    #[test]
    fn runs_known_answers() {
        close(runs_core(&bits("1001101011")).p_values[0], 0.147232);
        close(runs(&bits(E100)).unwrap().p_values[0], 0.500798);
    }

    #[test]
    fn runs_alternating_closed_form() {
        let n = 200usize;
        let alt: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let r = runs(&alt).unwrap();
        assert_eq!(r.statistic, n as f64);
        let expect = erfc((n as f64 - n as f64 / 2.0) / (2.0 * (2.0 * n as f64).sqrt() * 0.25));
        assert_eq!(r.p_values[0], expect);
    }

    #[test]
    fn longest_run_known_answer() {
        let s = "11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100111001101101100010110010";
        let r = longest_run(&bits(s)).unwrap();
        close(r.p_values[0], 0.180609);
        assert_eq!(r.params["M"], 8.0);
    }

    #[test]
    fn cusum_known_answers() {
        close(cusum_core(&bits("1011010111")).p_values[0], 0.411659);
        let r = cusum(&bits(E100)).unwrap();
        close(r.p_values[0], 0.219194);
        close(r.p_values[1], 0.114866);
    }

    #[test]
    fn approx_entropy_known_answers() {
        close(approx_entropy_core(&bits("0100110101"), 3).p_values[0], 0.261961);
        let r = approx_entropy(&bits(E100), 2).unwrap();
        close(r.p_values[0], 0.235301);
        close(r.params["ApEn"], 0.665393);
    }

    #[test]
    fn serial_known_answers() {
        let r = serial_core(&bits("0011011101"), 3);
        close(r.p_values[0], 0.808792);
        close(r.p_values[1], 0.670320);
    }

    #[test]
    fn dft_known_answers() {
        let r = dft(&bits(E100)).unwrap();
        close(r.p_values[0], 0.646355);
        assert_eq!(r.params["N1"], 48.0);
        close(dft_core(&bits("1001010011")).p_values[0], 0.468160);
    }

    #[test]
    fn pattern_counts_wrap() {
        // 0011 with wrap for m=2: 00 01 11 10
        assert_eq!(pattern_counts(&[0, 0, 1, 1], 2), vec![1, 1, 1, 1]);
        assert_eq!(pattern_counts(&[1, 0, 1], 1), vec![1, 2]);
        assert_eq!(pattern_counts(&[1, 0, 1], 0), vec![3]);
    }

    #[test]
    fn parameter_errors() {
        let e = bits(E100);
        assert!(block_frequency(&e, 0).is_err());
        assert!(block_frequency(&e, 101).is_err());
        assert!(serial(&e, 1).is_err());
        assert!(approx_entropy(&e, 0).is_err());
        assert!(longest_run(&e).is_err());
    }

    #[test]
    fn recommendations_become_warnings() {
        let long: Vec<u8> = (0..65_536u32).map(|i| (i.count_ones() % 2) as u8).collect();
        assert!(approx_entropy(&long, 10).unwrap().warnings.is_empty());
        assert_eq!(approx_entropy(&long, 11).unwrap().warnings.len(), 1);
        assert!(serial(&long, 13).unwrap().warnings.is_empty());
        assert_eq!(serial(&long, 14).unwrap().warnings.len(), 1);
        assert!(!dft(&bits(E100)).unwrap().warnings.is_empty());
    }
}
