#![no_main]

use libfuzzer_sys::fuzz_target;
use warpkit::io::png::{decode_png, encode_png};

fuzz_target!(|data: &[u8]| {
    // decoded samples are multiples of 1/255, so re-encoding must be lossless
    if let Ok(image) = decode_png(data) {
        let bytes = encode_png(&image).expect("decoded images re-encode");
        assert_eq!(decode_png(&bytes).expect("own output decodes"), image);
    }
});
