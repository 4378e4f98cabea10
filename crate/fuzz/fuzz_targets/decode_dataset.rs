#![no_main]

use eyespot::dataset::{decode_dataset, encode_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = decode_dataset(data) {
        assert_eq!(encode_dataset(&samples).unwrap(), data);
    }
});
