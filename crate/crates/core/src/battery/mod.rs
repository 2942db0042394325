//! Statistical test battery: ENT metrics, an eight-test NIST STS subset and
//! the single/multi-sequence pass criteria.
//!
//! Single mode runs every test once over the whole stream and requires each
//! P-value to fall inside an open interval (default `(0.01, 0.99)`), the
//! convention used when judging Diehard and ENT output.
//!
//! Multi mode splits the stream into `k` sequences of `L` bits, runs the STS
//! tests on each sequence in parallel and checks, per P-value series, the
//! proportion of sequences with `P >= alpha` against a binomial band and the
//! uniformity of the P-values over ten bins. ENT metrics are computed once
//! over the partitioned bits; only the byte chi-square enters the verdict,
//! the other ENT rows are informational.

pub mod ent;
pub mod sts;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::bitstream::BitStream;
use crate::conditioning::repack;
use crate::error::{Error, Result};
use crate::par;
use crate::special::igamc;

pub use ent::{ent_suite, EntSummary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_values: Vec<f64>,
    /// Every P-value at or above the default alpha of 0.01 unless
    /// re-evaluated by [`apply_single`] or [`run_battery`].
    pub pass: bool,
    pub n_bits: usize,
    pub params: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl TestResult {
    pub fn new(name: &str, statistic: f64, p_values: Vec<f64>, n_bits: usize) -> Self {
        let p_values: Vec<f64> = p_values
            .into_iter()
            .map(|p| if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) })
            .collect();
        let pass = p_values.iter().all(|&p| p >= Criteria::default().alpha);
        Self {
            name: name.to_string(),
            statistic,
            p_values,
            pass,
            n_bits,
            params: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Criteria {
    /// Per-sequence significance level in multi mode.
    pub alpha: f64,
    /// Open interval every P-value must fall in, single mode.
    pub single_band: (f64, f64),
    /// Pass-proportion band; `None` selects the 3-sigma binomial band.
    pub proportion_band: Option<(f64, f64)>,
    /// Minimum P-value of the ten-bin uniformity check.
    pub uniformity_threshold: f64,
}

impl Default for Criteria {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            single_band: (0.01, 0.99),
            proportion_band: None,
            uniformity_threshold: 1e-4,
        }
    }
}

impl Criteria {
    pub fn in_single_band(&self, p: f64) -> bool {
        p > self.single_band.0 && p < self.single_band.1
    }

    /// Band on the pass proportion for `k` sequences.
    pub fn band_for(&self, k: usize) -> (f64, f64) {
        if let Some(b) = self.proportion_band {
            return b;
        }
        let p = 1.0 - self.alpha;
        let half = 3.0 * (p * (1.0 - p) / k as f64).sqrt();
        (p - half, (p + half).min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Mode {
    Single,
    Multi { k: usize, len: usize },
}

/// Block parameters for the parameterized STS tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StsParams {
    pub block_frequency_m: usize,
    pub approx_entropy_m: u32,
    pub serial_m: u32,
}

impl StsParams {
    /// STS defaults (128, 10, 16) at 10^6 bits, shrunk for shorter
    /// sequences to stay within the recommended ranges.
    pub fn for_length(n: usize) -> Self {
        let log2 = if n == 0 { 0 } else { (usize::BITS - 1 - n.leading_zeros()) as i64 };
        Self {
            block_frequency_m: if n >= 12_800 { 128 } else { 20.max(n / 100 + 1) },
            approx_entropy_m: (log2 - 6).clamp(2, 10) as u32,
            serial_m: (log2 - 3).clamp(2, 16) as u32,
        }
    }
}

pub const STS_TESTS: [&str; 8] = [
    "monobit",
    "block_frequency",
    "runs",
    "longest_run",
    "cusum",
    "approximate_entropy",
    "serial",
    "dft",
];

fn p_labels(test: &str) -> Vec<String> {
    match test {
        "cusum" => vec!["cusum_forward".into(), "cusum_reverse".into()],
        "serial" => vec!["serial_1".into(), "serial_2".into()],
        t => vec![t.to_string()],
    }
}

pub fn sts_monobit(bits: &BitStream) -> Result<TestResult> {
    sts::monobit(&bits.to_unpacked())
}

pub fn sts_block_frequency(bits: &BitStream, m: usize) -> Result<TestResult> {
    sts::block_frequency(&bits.to_unpacked(), m)
}

pub fn sts_runs(bits: &BitStream) -> Result<TestResult> {
    sts::runs(&bits.to_unpacked())
}

pub fn sts_longest_run(bits: &BitStream) -> Result<TestResult> {
    sts::longest_run(&bits.to_unpacked())
}

pub fn sts_cusum(bits: &BitStream) -> Result<TestResult> {
    sts::cusum(&bits.to_unpacked())
}

pub fn sts_approx_entropy(bits: &BitStream, m: u32) -> Result<TestResult> {
    sts::approx_entropy(&bits.to_unpacked(), m)
}

pub fn sts_serial(bits: &BitStream, m: u32) -> Result<TestResult> {
    sts::serial(&bits.to_unpacked(), m)
}

pub fn sts_dft(bits: &BitStream) -> Result<TestResult> {
    sts::dft(&bits.to_unpacked())
}

/// Runs all eight STS tests on one unpacked sequence, in [`STS_TESTS`] order.
pub fn run_sts(eps: &[u8], params: &StsParams) -> Vec<Result<TestResult>> {
    vec![
        sts::monobit(eps),
        sts::block_frequency(eps, params.block_frequency_m),
        sts::runs(eps),
        sts::longest_run(eps),
        sts::cusum(eps),
        sts::approx_entropy(eps, params.approx_entropy_m),
        sts::serial(eps, params.serial_m),
        sts::dft(eps),
    ]
}

/// Re-evaluates results against the single-mode interval and returns the
/// names of failing tests.
pub fn apply_single(results: &mut [TestResult], criteria: &Criteria) -> Vec<String> {
    let mut failing = Vec::new();
    for r in results.iter_mut() {
        r.pass = r.p_values.iter().all(|&p| criteria.in_single_band(p));
        if !r.pass {
            failing.push(r.name.clone());
        }
    }
    failing
}

/// STS-style uniformity P-value of a P-value sample over ten equal bins.
pub fn uniformity_p(p_values: &[f64]) -> f64 {
    let mut bins = [0u64; 10];
    for &p in p_values {
        bins[((p * 10.0) as usize).min(9)] += 1;
    }
    let expected = p_values.len() as f64 / 10.0;
    let chi2: f64 = bins
        .iter()
        .map(|&f| (f as f64 - expected).powi(2) / expected)
        .sum();
    igamc(4.5, chi2 / 2.0)
}

/// Sequences needed before the uniformity check is applied.
pub const MIN_UNIFORMITY_SEQUENCES: usize = 55;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionRow {
    pub test: String,
    pub label: String,
    pub passed: usize,
    pub total: usize,
    pub proportion: f64,
    pub band: (f64, f64),
    pub uniformity_p: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestError {
    pub test: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub n_bits: usize,
    pub criteria: Criteria,
    pub sts_params: StsParams,
    pub ent: Option<EntSummary>,
    /// Single mode: every ENT and STS result. Multi mode: ENT results only.
    pub results: Vec<TestResult>,
    pub proportions: Vec<ProportionRow>,
    pub errors: Vec<TestError>,
    pub failing: Vec<String>,
    pub pass: bool,
}

impl BatteryReport {
    pub fn result(&self, name: &str) -> Option<&TestResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn proportion(&self, label: &str) -> Option<&ProportionRow> {
        self.proportions.iter().find(|r| r.label == label)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(ent) = &self.ent {
            s += &ent.to_table();
            s.push('\n');
        }
        let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
        if !self.results.is_empty() {
            let _ = writeln!(s, "{:<26} {:>14}  {:<28} result", "test", "statistic", "P-value(s)");
            for r in &self.results {
                let ps: Vec<String> = r.p_values.iter().map(|p| format!("{p:.6}")).collect();
                let _ = writeln!(
                    s,
                    "{:<26} {:>14.6}  {:<28} {}",
                    r.name,
                    r.statistic,
                    ps.join(" "),
                    verdict(r.pass)
                );
            }
        }
        if !self.proportions.is_empty() {
            let _ = writeln!(
                s,
                "{:<22} {:>10} {:>19} {:>12}  result",
                "test", "proportion", "band", "uniformity"
            );
            for r in &self.proportions {
                let u = r.uniformity_p.map_or("-".to_string(), |u| format!("{u:.6}"));
                let _ = writeln!(
                    s,
                    "{:<22} {:>4}/{:<5} [{:.4}, {:.4}] {:>12}  {}",
                    r.label,
                    r.passed,
                    r.total,
                    r.band.0,
                    r.band.1,
                    u,
                    verdict(r.pass)
                );
            }
        }
        for e in &self.errors {
            let _ = writeln!(s, "{:<26} ERROR {}", e.test, e.message);
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }
}

pub fn run_battery(bits: &BitStream, mode: Mode, criteria: &Criteria) -> Result<BatteryReport> {
    let seq_len = match mode {
        Mode::Single => bits.len(),
        Mode::Multi { len, .. } => len,
    };
    run_battery_with(bits, mode, criteria, &StsParams::for_length(seq_len))
}

pub fn run_battery_with(
    bits: &BitStream,
    mode: Mode,
    criteria: &Criteria,
    params: &StsParams,
) -> Result<BatteryReport> {
    if bits.is_empty() {
        return Err(Error::EmptyInput("battery needs a non-empty bitstream".into()));
    }
    match mode {
        Mode::Single => run_single(bits, criteria, params),
        Mode::Multi { k, len } => run_multi(bits, k, len, criteria, params),
    }
}

fn ent_part(bytes: &[u8], errors: &mut Vec<TestError>) -> Option<EntSummary> {
    match ent_suite(bytes) {
        Ok(s) => {
            for (test, message) in &s.insufficient {
                errors.push(TestError {
                    test: test.clone(),
                    message: message.clone(),
                });
            }
            Some(s)
        }
        Err(e) => {
            errors.push(TestError {
                test: "ent".into(),
                message: e.to_string(),
            });
            None
        }
    }
}

fn run_single(bits: &BitStream, criteria: &Criteria, params: &StsParams) -> Result<BatteryReport> {
    let mut errors = Vec::new();
    let ent = ent_part(&repack(bits), &mut errors);
    let mut results: Vec<TestResult> = ent.as_ref().map(|e| e.results.clone()).unwrap_or_default();
    let eps = bits.to_unpacked();
    for (name, r) in STS_TESTS.iter().zip(run_sts(&eps, params)) {
        match r {
            Ok(r) => results.push(r),
            Err(e) => errors.push(TestError {
                test: name.to_string(),
                message: e.to_string(),
            }),
        }
    }
    let mut failing = apply_single(&mut results, criteria);
    failing.extend(errors.iter().map(|e| e.test.clone()));
    Ok(BatteryReport {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Single,
        n_bits: bits.len(),
        criteria: *criteria,
        sts_params: *params,
        ent,
        results,
        proportions: Vec::new(),
        pass: failing.is_empty(),
        errors,
        failing,
    })
}

fn run_multi(
    bits: &BitStream,
    k: usize,
    len: usize,
    criteria: &Criteria,
    params: &StsParams,
) -> Result<BatteryReport> {
    if k == 0 || len == 0 {
        return Err(Error::Partition("k and L must both be positive".into()));
    }
    let needed = k.saturating_mul(len);
    if needed > bits.len() {
        return Err(Error::Partition(format!(
            "{k} sequences of {len} bits need {needed} bits, stream has {}",
            bits.len()
        )));
    }
    let used = bits.slice(0, needed);
    let mut errors = Vec::new();
    let ent = ent_part(&repack(&used), &mut errors);
    let mut results: Vec<TestResult> = ent.as_ref().map(|e| e.results.clone()).unwrap_or_default();
    apply_single(&mut results, criteria);
    let mut failing: Vec<String> = results
        .iter()
        .filter(|r| r.name == "ent_chi_square" && !r.pass)
        .map(|r| r.name.clone())
        .collect();

    let per_seq: Vec<Vec<Result<TestResult>>> =
        par::map_indexed(k, |i| run_sts(&bits.slice(i * len, len).to_unpacked(), params));

    let band = criteria.band_for(k);
    let mut proportions = Vec::new();
    for (t, name) in STS_TESTS.iter().enumerate() {
        if let Some(err) = per_seq.iter().find_map(|s| s[t].as_ref().err()) {
            errors.push(TestError {
                test: name.to_string(),
                message: err.to_string(),
            });
            failing.push(name.to_string());
            continue;
        }
        for (j, label) in p_labels(name).into_iter().enumerate() {
            let ps: Vec<f64> = per_seq
                .iter()
                .map(|s| s[t].as_ref().unwrap().p_values[j])
                .collect();
            let passed = ps.iter().filter(|&&p| p >= criteria.alpha).count();
            let proportion = passed as f64 / k as f64;
            let uniformity_p = (k >= MIN_UNIFORMITY_SEQUENCES).then(|| uniformity_p(&ps));
            let pass = proportion >= band.0
                && proportion <= band.1
                && uniformity_p.is_none_or(|u| u >= criteria.uniformity_threshold);
            if !pass {
                failing.push(label.clone());
            }
            proportions.push(ProportionRow {
                test: name.to_string(),
                label,
                passed,
                total: k,
                proportion,
                band,
                uniformity_p,
                pass,
                p_values: ps,
            });
        }
    }
    Ok(BatteryReport {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Multi { k, len },
        n_bits: needed,
        criteria: *criteria,
        sts_params: *params,
        ent,
        results,
        proportions,
        pass: failing.is_empty(),
        errors,
        failing,
    })
}
