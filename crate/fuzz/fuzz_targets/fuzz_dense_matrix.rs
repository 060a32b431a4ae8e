//! Fuzz the dense view-matrix validator. The first two input bytes pick
//! the expected dimension (1..=8) and instance count (0..=7); the rest is
//! the file body. Any input must parse or fail cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use omvc::dataset::matrix_io::validate_dense_bytes;

fuzz_target!(|data: &[u8]| {
    let [dim_byte, n_byte, body @ ..] = data else { return };
    let dim = (*dim_byte % 8) as usize + 1;
    let n = (*n_byte % 8) as usize;
    let _ = validate_dense_bytes(body, dim, n, 1.0);
});
