#![no_main]

use libfuzzer_sys::fuzz_target;
use soilradar::sweep::SweepSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = SweepSpec::from_json(text) {
        for &v in spec.values.iter().take(4) {
            let _ = spec.scenario_for(v, 0);
        }
    }
});
