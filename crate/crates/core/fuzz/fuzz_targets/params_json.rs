#![no_main]

use libfuzzer_sys::fuzz_target;
use warpkit::io::params::{dense_grid_to_json, parse_dense_grid, parse_projective, projective_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = parse_projective(data) {
        assert_eq!(parse_projective(projective_to_json(&h).as_bytes()).unwrap(), h);
    }
    if let Ok(grid) = parse_dense_grid(data) {
        assert_eq!(parse_dense_grid(dense_grid_to_json(&grid).as_bytes()).unwrap(), grid);
    }
});
