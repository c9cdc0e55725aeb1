#![no_main]

use libfuzzer_sys::fuzz_target;
use warpkit::io::wfld::{decode_wfld, encode_wfld};

fuzz_target!(|data: &[u8]| {
    // a valid file has exactly one encoding
    if let Ok(flow) = decode_wfld(data) {
        assert_eq!(encode_wfld(&flow), data);
    }
});
