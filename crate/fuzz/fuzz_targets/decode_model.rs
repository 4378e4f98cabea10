#![no_main]

use eyespot::classifier::{decode_model, encode_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_model(data) {
        // accepted input must survive a re-encode unchanged
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }
});
