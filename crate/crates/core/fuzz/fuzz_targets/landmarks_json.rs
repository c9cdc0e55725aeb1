#![no_main]

use libfuzzer_sys::fuzz_target;
use warpkit::io::landmarks::{landmarks_to_json, parse_landmarks};

fuzz_target!(|data: &[u8]| {
    if let Ok(lm) = parse_landmarks(data) {
        assert_eq!(parse_landmarks(landmarks_to_json(&lm).as_bytes()).unwrap(), lm);
    }
});
