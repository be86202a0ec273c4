#![no_main]

use libfuzzer_sys::fuzz_target;
use soilradar::moisture::{fit_calibration, read_pairs_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(pairs) = read_pairs_csv(data) {
        if let Ok(curve) = fit_calibration(&pairs) {
            curve.validate().expect("fitted curve must validate");
            let _ = curve.predict(10.0);
        }
    }
});
