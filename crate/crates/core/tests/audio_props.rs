use dialect_lab::audio::{normalize_peak, segment, trim_silence, AudioClip, NORMALIZED_PEAK};
use proptest::prelude::*;

const SR: u32 = 16_000;

/// Random noise burst surrounded by silence.
fn padded() -> impl Strategy<Value = Vec<f64>> {
    (0usize..4000, prop::collection::vec(-1.0f64..1.0, 1..6000), 0usize..4000).prop_map(|(a, body, b)| {
        let mut v = vec![0.0; a];
        v.extend(body);
        v.extend(std::iter::repeat_n(0.0, b));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trimming_is_idempotent(x in padded(), db in 10.0f64..60.0) {
        let once = trim_silence(&AudioClip::new(x, SR, "t"), db).unwrap();
        prop_assume!(!once.is_empty());
        let twice = trim_silence(&once, db).unwrap();
        prop_assert_eq!(once.samples, twice.samples);
    }

    #[test]
    fn trimming_keeps_a_contiguous_slice(x in padded()) {
        let clip = AudioClip::new(x.clone(), SR, "t");
        let t = trim_silence(&clip, 30.0).unwrap();
        let found = x.windows(t.len().max(1)).any(|w| t.is_empty() || w == &t.samples[..]);
        prop_assert!(found);
        prop_assert!(t.len() <= x.len());
    }

    #[test]
    fn segments_concatenate_to_the_input(
        x in prop::collection::vec(-1.0f64..1.0, 1..60_000),
        max_s in 0.3f64..2.0,
    ) {
        let clip = AudioClip::new(x.clone(), SR, "s");
        let parts = segment(&clip, max_s).unwrap();
        let limit = (max_s * SR as f64).floor() as usize;
        prop_assert!(parts.iter().all(|p| !p.is_empty() && p.len() <= limit));
        let joined: Vec<f64> = parts.iter().flat_map(|p| p.samples.clone()).collect();
        prop_assert_eq!(joined, x);
    }

    #[test]
    fn normalization_sets_the_peak(x in prop::collection::vec(-3.0f64..3.0, 1..3000)) {
        let clip = AudioClip::new(x.clone(), SR, "n");
        let n = normalize_peak(&clip);
        if clip.peak() == 0.0 {
            prop_assert_eq!(n.samples, x);
        } else {
            prop_assert!((n.peak() - NORMALIZED_PEAK).abs() < 1e-12);
            let ratio = n.peak() / clip.peak();
            for (a, b) in x.iter().zip(&n.samples) {
                prop_assert!((a * ratio - b).abs() < 1e-12);
            }
        }
    }
}
