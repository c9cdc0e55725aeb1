#![no_main]

use libfuzzer_sys::fuzz_target;
use warpkit::io::points::{parse_points, points_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(control) = parse_points(data) {
        let again = parse_points(points_to_json(&control).as_bytes()).expect("own output parses");
        assert_eq!(again, control);
    }
});
