#![no_main]

use libfuzzer_sys::fuzz_target;
use uda_core::corpus::{is_valid_bio, parse_conll, TagSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut tags = TagSet::new();
    if let Ok(examples) = parse_conll(text, &mut tags) {
        for ex in &examples {
            let ids = ex.tags.as_ref().expect("conll examples carry tags");
            assert_eq!(ids.len(), ex.tokens.len());
            let parsed: Vec<_> = ids.iter().map(|&i| tags.tag(i).clone()).collect();
            assert!(is_valid_bio(&parsed));
        }
    }
});
