//! Feed arbitrary UTF-8 through the dataset manifest parser: it must
//! return a clean error on malformed input, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use omvc::dataset::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Manifest::parse_str(text);
    }
});
