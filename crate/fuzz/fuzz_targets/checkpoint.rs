#![no_main]

use libfuzzer_sys::fuzz_target;
use uda_core::model::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok((theta, fp)) = decode_checkpoint(data) {
        assert_eq!(encode_checkpoint(&theta, fp), data);
    }
});
