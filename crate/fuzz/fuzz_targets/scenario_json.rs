#![no_main]

use libfuzzer_sys::fuzz_target;
use soilradar::scenario::{build_scene, Scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = Scenario::from_json(text) {
        let _ = s.digest();
        let _ = s.effective_ka();
        // scene building is cheap; synthesis is not, so stop here
        let _ = build_scene(&s);
    }
});
