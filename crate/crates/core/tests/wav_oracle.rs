//! WAV I/O cross-checked against the `hound` reader and writer.

use dialect_lab::audio::{read_wav, write_wav, AudioClip};
use proptest::prelude::*;

fn hound_spec(channels: u16, sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

#[test]
fn hound_reads_our_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ours.wav");
    let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.25, -1.0], 22_050, "c");
    write_wav(&clip, &path).unwrap();
    let mut reader = hound::WavReader::open(&path).unwrap();
    assert_eq!(reader.spec(), hound_spec(1, 22_050));
    let codes: Vec<i16> = reader.samples::<i16>().map(Result::unwrap).collect();
    assert_eq!(codes, [0, 16384, -16384, 8192, -32768]);
}

#[test]
fn we_read_hound_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hound.wav");
    let mut w = hound::WavWriter::create(&path, hound_spec(1, 16_000)).unwrap();
    for v in [16384i16, -32768, 1, 0, 32767] {
        w.write_sample(v).unwrap();
    }
    w.finalize().unwrap();
    let clip = read_wav(&path).unwrap();
    assert_eq!(clip.sample_rate, 16_000);
    assert_eq!(clip.samples, [0.5, -1.0, 1.0 / 32768.0, 0.0, 32767.0 / 32768.0]);
}

#[test]
fn stereo_hound_file_is_averaged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    let mut w = hound::WavWriter::create(&path, hound_spec(2, 8000)).unwrap();
    for v in [16384i16, 0, -8192, -8192] {
        w.write_sample(v).unwrap();
    }
    w.finalize().unwrap();
    let clip = read_wav(&path).unwrap();
    assert_eq!(clip.samples, [0.25, -0.25]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_within_one_code(x in prop::collection::vec(-1.0f64..1.0, 1..2000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        write_wav(&AudioClip::new(x.clone(), 16_000, "rt"), &path).unwrap();
        let back = read_wav(&path).unwrap();
        prop_assert_eq!(back.len(), x.len());
        for (a, b) in x.iter().zip(&back.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
        let codes: Vec<i16> = hound::WavReader::open(&path).unwrap().samples::<i16>().map(Result::unwrap).collect();
        for (c, b) in codes.iter().zip(&back.samples) {
            prop_assert_eq!(*c as f64 / 32768.0, *b);
        }
    }
}
