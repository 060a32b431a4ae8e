//! Fuzz the binary checkpoint decoder: arbitrary bytes must decode or be
//! rejected with an error, never panic or over-allocate.

#![no_main]

use libfuzzer_sys::fuzz_target;
use omvc::pipeline::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let _ = Checkpoint::decode(data);
});
