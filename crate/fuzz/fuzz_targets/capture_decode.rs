#![no_main]

use libfuzzer_sys::fuzz_target;
use soilradar::capture;

fuzz_target!(|data: &[u8]| {
    if let Ok(cap) = capture::decode(data) {
        // anything accepted must survive a re-encode unchanged
        let bytes = capture::encode(&cap).expect("re-encode");
        let again = capture::decode(&bytes).expect("decode re-encoded");
        assert_eq!(again.frames, cap.frames);
        assert_eq!(again.bins, cap.bins);
        assert_eq!(again.samples, cap.samples);
    }
});
