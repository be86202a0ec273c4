//! Stable-toolchain stand-in for the fuzz targets: replays the checked-in
//! corpus and random mutations of it through every decoder.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use soilradar::capture;
use soilradar::moisture::{fit_calibration, read_pairs_csv, CalibrationCurve};
use soilradar::scenario::{build_scene, Scenario};
use soilradar::sweep::SweepSpec;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn capture_decode(data: &[u8]) -> bool {
    match capture::decode(data) {
        Ok(cap) => {
            let again = capture::decode(&capture::encode(&cap).unwrap()).unwrap();
            assert_eq!(again.samples, cap.samples);
            true
        }
        Err(_) => false,
    }
}

fn scenario_json(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match Scenario::from_json(text) {
        Ok(s) => {
            s.digest().unwrap();
            build_scene(&s).unwrap();
            true
        }
        Err(_) => false,
    }
}

fn sweep_json(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match SweepSpec::from_json(text) {
        Ok(spec) => {
            for &v in &spec.values {
                spec.scenario_for(v, 0).unwrap();
            }
            true
        }
        Err(_) => false,
    }
}

fn calibration_csv(data: &[u8]) -> bool {
    match read_pairs_csv(data).and_then(|p| fit_calibration(&p)) {
        Ok(curve) => {
            curve.validate().unwrap();
            true
        }
        Err(_) => false,
    }
}

fn calibration_json(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match CalibrationCurve::from_json(text) {
        Ok(curve) => {
            assert_eq!(
                CalibrationCurve::from_json(&curve.to_json().unwrap()).unwrap(),
                curve
            );
            true
        }
        Err(_) => false,
    }
}

#[test]
fn corpus_seeds_behave() {
    let accepted =
        |target: &str, f: fn(&[u8]) -> bool| corpus(target).iter().filter(|d| f(d)).count();
    assert_eq!(accepted("capture_decode", capture_decode), 2);
    assert_eq!(accepted("scenario_json", scenario_json), 2);
    assert_eq!(accepted("sweep_json", sweep_json), 2);
    assert_eq!(accepted("calibration_csv", calibration_csv), 1);
    assert_eq!(accepted("calibration_json", calibration_json), 1);
}

fn mutate(seed: &[u8], edits: &[(usize, u8)], cut: usize) -> Vec<u8> {
    let mut d = seed.to_vec();
    for &(i, b) in edits {
        if !d.is_empty() {
            let n = d.len();
            d[i % n] = b;
        }
    }
    d.truncate(d.len().saturating_sub(cut % 4 * (cut % 7)));
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mutated_inputs_never_panic(
        which in 0usize..5,
        pick in any::<usize>(),
        edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..8),
        cut in any::<usize>(),
    ) {
        let (target, f): (&str, fn(&[u8]) -> bool) = match which {
            0 => ("capture_decode", capture_decode),
            1 => ("scenario_json", scenario_json),
            2 => ("sweep_json", sweep_json),
            3 => ("calibration_csv", calibration_csv),
            _ => ("calibration_json", calibration_json),
        };
        let seeds = corpus(target);
        let data = mutate(&seeds[pick % seeds.len()], &edits, cut);
        f(&data);
    }

    #[test]
    fn arbitrary_bytes_never_panic(data in prop::collection::vec(any::<u8>(), 0..256)) {
        capture_decode(&data);
        scenario_json(&data);
        sweep_json(&data);
        calibration_csv(&data);
        calibration_json(&data);
    }
}
