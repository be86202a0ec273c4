#![no_main]

use libfuzzer_sys::fuzz_target;
use soilradar::moisture::CalibrationCurve;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(curve) = CalibrationCurve::from_json(text) {
        let back =
            CalibrationCurve::from_json(&curve.to_json().expect("serialize")).expect("round trip");
        assert_eq!(back, curve);
    }
});
