//! Fuzz the presence-indicator parser. The first two input bytes pick the
//! instance count (0..=15) and view count (1..=4); the rest is the
//! indicator text. Any input must parse or fail cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use omvc::dataset::IndicatorMatrix;

fuzz_target!(|data: &[u8]| {
    let [n_byte, views_byte, body @ ..] = data else { return };
    let n = (*n_byte % 16) as usize;
    let n_views = (*views_byte % 4) as usize + 1;
    if let Ok(text) = std::str::from_utf8(body) {
        let _ = IndicatorMatrix::parse_str(text, n, n_views);
    }
});
