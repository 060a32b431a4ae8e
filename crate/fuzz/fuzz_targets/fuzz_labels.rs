//! Fuzz the cluster-label file parser. The first input byte picks the
//! expected label count (0..=15); the rest is the file body. Any input
//! must parse or fail cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use omvc::dataset::manifest::parse_labels;

fuzz_target!(|data: &[u8]| {
    let [n_byte, body @ ..] = data else { return };
    let n = (*n_byte % 16) as usize;
    if let Ok(text) = std::str::from_utf8(body) {
        let _ = parse_labels(text, n);
    }
});
