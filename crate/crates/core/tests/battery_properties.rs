use laser_trng::battery::{run_battery, sts, Criteria, Mode, StsParams, run_sts};
use laser_trng::BitStream;
use proptest::prelude::*;

fn complement(bits: &[u8]) -> Vec<u8> {
    bits.iter().map(|b| 1 - b).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_values_in_unit_interval(bits in proptest::collection::vec(0u8..2, 128..2048)) {
        let params = StsParams::for_length(bits.len());
        for r in run_sts(&bits, &params).into_iter().flatten() {
            for p in &r.p_values {
                prop_assert!((0.0..=1.0).contains(p), "{} gave {}", r.name, p);
            }
        }
    }

    #[test]
    fn biased_inputs_keep_p_values_valid(bias in 0u32..=100, seed in any::<u64>(), n in 128usize..1500) {
        let mut x = seed | 1;
        let bits: Vec<u8> = (0..n)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                ((x % 100) < bias as u64) as u8
            })
            .collect();
        for r in run_sts(&bits, &StsParams::for_length(n)).into_iter().flatten() {
            prop_assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn monobit_complement_invariant(bits in proptest::collection::vec(0u8..2, 100..3000)) {
        let a = sts::monobit(&bits).unwrap();
        let b = sts::monobit(&complement(&bits)).unwrap();
        prop_assert_eq!(a.p_values, b.p_values);
    }

    #[test]
    fn runs_statistic_complement_invariant(bits in proptest::collection::vec(0u8..2, 100..3000)) {
        let a = sts::runs(&bits).unwrap();
        let b = sts::runs(&complement(&bits)).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn battery_is_deterministic(bytes in proptest::collection::vec(any::<u8>(), 16..300)) {
        let bits = BitStream::from_bytes(bytes);
        let c = Criteria::default();
        prop_assert_eq!(run_battery(&bits, Mode::Single, &c).unwrap(), run_battery(&bits, Mode::Single, &c).unwrap());
    }

    #[test]
    fn proportions_in_unit_interval(bytes in proptest::collection::vec(any::<u8>(), 64..200), k in 1usize..5) {
        let bits = BitStream::from_bytes(bytes);
        let len = bits.len() / k;
        if let Ok(r) = run_battery(&bits, Mode::Multi { k, len }, &Criteria::default()) {
            for row in &r.proportions {
                prop_assert!((0.0..=1.0).contains(&row.proportion));
            }
        }
    }
}
