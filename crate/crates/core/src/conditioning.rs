//! Post-processing of raw ADC bytes: pairwise XOR debiasing followed by
//! m-least-significant-bit extraction and regrouping into bytes.

use crate::bitstream::BitStream;
use crate::error::{Error, Result};
use crate::par;

/// Retained bits per byte in the default chain.
pub const DEFAULT_LSB: u32 = 6;

/// Input bytes per parallel work unit. A multiple of 16, so every chunk
/// yields whole output bytes for any `m` after pairing.
const CHUNK: usize = 1 << 20;

/// `out[k] = input[2k] ^ input[2k+1]`; a trailing odd byte is dropped.
pub fn xor_pairs(input: &[u8]) -> Result<Vec<u8>> {
    if input.len() < 2 {
        return Err(Error::insufficient(format!(
            "xor pairing needs at least 2 bytes, got {}",
            input.len()
        )));
    }
    Ok(input.chunks_exact(2).map(|p| p[0] ^ p[1]).collect())
}

fn check_m(m: u32) -> Result<()> {
    if !(1..=8).contains(&m) {
        return Err(Error::invalid(format!("m must be in 1..=8, got {m}")));
    }
    Ok(())
}

/// Emits the `m` lowest bits of every byte, bit `m-1` first.
pub fn lsb_extract(input: &[u8], m: u32) -> Result<BitStream> {
    check_m(m)?;
    let total = input.len() * m as usize;
    let mut packed = Vec::with_capacity(total.div_ceil(8));
    pack_lsb(input, m, &mut packed, true);
    BitStream::from_packed(packed, total)
}

/// MSB-first regrouping into bytes; a trailing partial byte is dropped.
pub fn repack(bits: &BitStream) -> Vec<u8> {
    bits.as_bytes()[..bits.len() / 8].to_vec()
}

/// Packs the low `m` bits of each input byte into `out`. With `flush_partial`
/// the final partial byte is zero-padded and written.
fn pack_lsb(input: &[u8], m: u32, out: &mut Vec<u8>, flush_partial: bool) {
    let mask = ((1u16 << m) - 1) as u64;
    let mut acc: u64 = 0;
    let mut nbits: u32 = 0;
    for &b in input {
        acc = (acc << m) | (b as u64 & mask);
        nbits += m;
        if nbits >= 8 {
            nbits -= 8;
            out.push((acc >> nbits) as u8);
        }
    }
    if flush_partial && nbits > 0 {
        out.push((acc << (8 - nbits)) as u8);
    }
}

fn condition_chunk(chunk: &[u8], xor: bool, m: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(chunk.len() * m as usize / 8 + 1);
    if xor {
        let mask = ((1u16 << m) - 1) as u64;
        let mut acc: u64 = 0;
        let mut nbits: u32 = 0;
        for p in chunk.chunks_exact(2) {
            acc = (acc << m) | ((p[0] ^ p[1]) as u64 & mask);
            nbits += m;
            if nbits >= 8 {
                nbits -= 8;
                out.push((acc >> nbits) as u8);
            }
        }
    } else {
        pack_lsb(chunk, m, &mut out, false);
    }
    out
}

/// XOR (optional) → m-LSB → repack in one pass.
///
/// Equivalent to `repack(&lsb_extract(&xor_pairs(input)?, m)?)` (or without
/// the XOR stage), but never materializes the intermediate bit stream.
pub fn condition(input: &[u8], xor: bool, m: u32) -> Result<Vec<u8>> {
    check_m(m)?;
    if xor && input.len() < 2 {
        return Err(Error::insufficient("xor pairing needs at least 2 bytes"));
    }
    let usable = if xor { input.len() & !1 } else { input.len() };
    let input = &input[..usable];
    // whole chunks produce whole bytes; only the tail can leave a partial byte
    let parts = par::map_chunks(input, CHUNK, |_, c| condition_chunk(c, xor, m));
    Ok(parts.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xor_examples() {
        assert_eq!(xor_pairs(&[0xA5, 0xA5]).unwrap(), vec![0x00]);
        assert_eq!(xor_pairs(&[0xF0, 0x0F, 0x11]).unwrap(), vec![0xFF]);
        assert!(matches!(xor_pairs(&[1]), Err(Error::InsufficientData(_))));
        assert!(xor_pairs(&[]).is_err());
    }

    #[test]
    fn lsb_examples() {
        let bits = lsb_extract(&[0b1011_0101], 6).unwrap();
        assert_eq!(bits.to_unpacked(), vec![1, 1, 0, 1, 0, 1]);
        let full = lsb_extract(&[0b1011_0101], 8).unwrap();
        assert_eq!(full.to_unpacked(), vec![1, 0, 1, 1, 0, 1, 0, 1]);
        let parity = lsb_extract(&[3, 2, 5, 8], 1).unwrap();
        assert_eq!(parity.to_unpacked(), vec![1, 0, 1, 0]);
        assert!(lsb_extract(&[1], 0).is_err());
        assert!(lsb_extract(&[1], 9).is_err());
    }

    #[test]
    fn repack_examples() {
        let b16 = BitStream::from_bytes(vec![0xAB, 0xCD]);
        assert_eq!(repack(&b16), vec![0xAB, 0xCD]);
        let b12 = b16.slice(0, 12);
        assert_eq!(repack(&b12), vec![0xAB]);
        let bytes = vec![1, 2, 250, 77];
        assert_eq!(repack(&lsb_extract(&bytes, 8).unwrap()), bytes);
    }

    #[test]
    fn xor_output_uniform_over_all_pairs() {
        let mut counts = [0u32; 256];
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                counts[xor_pairs(&[a, b]).unwrap()[0] as usize] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 256));
    }

    #[test]
    fn rate_accounting() {
        // 100 MS/s × 8 bit raw → 50 M pairs/s → × 6 bits = 300 Mbit/s
        let raw_rate = 100e6;
        let bits_out = raw_rate / 2.0 * DEFAULT_LSB as f64;
        assert_eq!(bits_out, 300e6);
        let out = condition(&[0u8; 100], true, 6).unwrap();
        assert_eq!(out.len(), 37);
    }

    proptest! {
        #[test]
        fn fused_matches_composition(input in proptest::collection::vec(any::<u8>(), 2..400), m in 1u32..=8, xor in any::<bool>()) {
            let staged = if xor {
                repack(&lsb_extract(&xor_pairs(&input).unwrap(), m).unwrap())
            } else {
                repack(&lsb_extract(&input, m).unwrap())
            };
            prop_assert_eq!(condition(&input, xor, m).unwrap(), staged);
        }

        #[test]
        fn lengths_follow_formulas(n in 0usize..500, m in 1u32..=8) {
            let input = vec![0x5Au8; n];
            prop_assert_eq!(lsb_extract(&input, m).unwrap().len(), n * m as usize);
            if n >= 2 {
                prop_assert_eq!(xor_pairs(&input).unwrap().len(), n / 2);
            }
        }

        #[test]
        fn xor_invariant_under_common_mask(a in any::<u8>(), b in any::<u8>(), k in any::<u8>()) {
            prop_assert_eq!(xor_pairs(&[a, b]).unwrap(), xor_pairs(&[a ^ k, b ^ k]).unwrap());
        }
    }

    #[test]
    fn chunked_conditioning_matches_single_pass() {
        let input: Vec<u8> = (0..(3 * CHUNK + 1234)).map(|i| ((i * 2654435761usize) >> 7) as u8).collect();
        for m in [5, 6, 7] {
            let staged = repack(&lsb_extract(&xor_pairs(&input).unwrap(), m).unwrap());
            assert_eq!(condition(&input, true, m).unwrap(), staged);
        }
    }
}
