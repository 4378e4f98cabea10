#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = eyespot::imaging::decode_image(data) {
        assert_eq!(img.data().len(), img.width() * img.height() * 3);
    }
});
