//! Interchange files.
//!
//! * Sample files are headerless dumps, one two's-complement byte per sample.
//! * Bitstream files hold MSB-first packed bits, zero-padded to a whole byte,
//!   with the true length in a sidecar `<file>.meta` containing
//!   `length_bits=<N>`.
//!
//! Both formats can be fed directly to external ENT / Diehard / STS builds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::bitstream::BitStream;
use crate::error::{Error, Result};
use crate::phase_sim::{Provenance, SampleBlock};

/// Nominal rate assigned to ingested captures, which carry no header.
pub const DEFAULT_INGEST_RATE_HZ: f64 = 100e6;

pub fn read_samples(path: impl AsRef<Path>, max: Option<usize>) -> Result<SampleBlock> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let limit = max.map(|m| m as u64).unwrap_or(u64::MAX);
    file.take(limit)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyInput(format!("{} holds no samples", path.display())));
    }
    Ok(SampleBlock {
        samples: bytes.into_iter().map(|b| b as i8).collect(),
        sample_rate_hz: DEFAULT_INGEST_RATE_HZ,
        provenance: Provenance::Ingested,
    })
}

/// Chunked reader over a sample file; concatenated chunks equal
/// [`read_samples`] on the same file.
pub struct SampleReader {
    inner: BufReader<File>,
    path: PathBuf,
    chunk: usize,
}

impl SampleReader {
    pub fn open(path: impl AsRef<Path>, chunk: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            inner: BufReader::new(file),
            path,
            chunk: chunk.max(1),
        })
    }
}

impl Iterator for SampleReader {
    type Item = Result<Vec<i8>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = Vec::with_capacity(self.chunk);
        match (&mut self.inner).take(self.chunk as u64).read_to_end(&mut buf) {
            Ok(0) => None,
            Ok(_) => Some(Ok(buf.into_iter().map(|b| b as i8).collect())),
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

pub fn write_samples(block: &SampleBlock, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(block.as_bytes(), path)
}

pub fn write_bytes(bytes: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// `<file>.meta` next to a bitstream file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_bits(bits: &BitStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_bytes(bits.as_bytes(), path)?;
    let meta = meta_path(path);
    std::fs::write(&meta, format!("length_bits={}\n", bits.len())).map_err(|e| Error::io(&meta, e))
}

/// Reads `length_bits` from a sidecar file.
pub fn read_meta(path: impl AsRef<Path>) -> Result<usize> {
    let meta = meta_path(path.as_ref());
    let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("length_bits=") {
            return v.trim().parse().map_err(|_| Error::Config {
                line: i + 1,
                message: format!("bad length_bits value {v:?} in {}", meta.display()),
            });
        }
    }
    Err(Error::Config {
        line: 0,
        message: format!("{} has no length_bits entry", meta.display()),
    })
}

/// Reads a packed bitstream. Without an explicit length the sidecar is used,
/// and if that is missing too every bit of the file is taken.
pub fn read_bits(path: impl AsRef<Path>, length_bits: Option<usize>) -> Result<BitStream> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let len = match length_bits {
        Some(n) => n,
        None if meta_path(path).exists() => read_meta(path)?,
        None => bytes.len() * 8,
    };
    BitStream::from_packed(bytes, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twos_complement_decoding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.raw");
        std::fs::write(&p, [0x00, 0xFF, 0x80]).unwrap();
        let b = read_samples(&p, None).unwrap();
        assert_eq!(b.samples, vec![0, -1, -128]);
        assert_eq!(b.provenance, Provenance::Ingested);
        assert_eq!(read_samples(&p, Some(2)).unwrap().len(), 2);
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.raw");
        std::fs::write(&p, []).unwrap();
        assert!(matches!(read_samples(&p, None), Err(Error::EmptyInput(_))));
        let missing = dir.path().join("nope.raw");
        let err = read_samples(&missing, None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nope.raw"));
    }

    #[test]
    fn sample_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.raw");
        let block = SampleBlock {
            samples: (-128..=127).collect(),
            sample_rate_hz: DEFAULT_INGEST_RATE_HZ,
            provenance: Provenance::Ingested,
        };
        write_samples(&block, &p).unwrap();
        assert_eq!(read_samples(&p, None).unwrap(), block);
    }

    #[test]
    fn chunked_reader_matches_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.raw");
        let data: Vec<u8> = (0..10_007u32).map(|i| (i * 31 % 251) as u8).collect();
        std::fs::write(&p, &data).unwrap();
        let whole = read_samples(&p, None).unwrap().samples;
        for chunk in [1, 7, 4096, 20_000] {
            let joined: Vec<i8> = SampleReader::open(&p, chunk)
                .unwrap()
                .flat_map(|c| c.unwrap())
                .collect();
            assert_eq!(joined, whole);
        }
    }

    #[test]
    fn bit_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.bin");
        let bits: BitStream = [true, true, true].into_iter().collect();
        write_bits(&bits, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), vec![0xE0]);
        assert_eq!(std::fs::read_to_string(meta_path(&p)).unwrap(), "length_bits=3\n");
        assert_eq!(read_bits(&p, None).unwrap(), bits);
        assert_eq!(read_bits(&p, Some(3)).unwrap(), bits);
    }

    #[test]
    fn large_bit_roundtrip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bits: BitStream = (0..1_000_003).map(|_| rng.random::<bool>()).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.bin");
        write_bits(&bits, &p).unwrap();
        assert_eq!(read_bits(&p, None).unwrap(), bits);
    }

    proptest! {
        #[test]
        fn bit_roundtrip(bits in proptest::collection::vec(0u8..2, 0..100)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.bin");
            let s = BitStream::from_unpacked(&bits);
            write_bits(&s, &p).unwrap();
            prop_assert_eq!(read_bits(&p, None).unwrap(), s);
        }
    }
}
