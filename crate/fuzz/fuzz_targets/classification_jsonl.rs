#![no_main]

use libfuzzer_sys::fuzz_target;
use uda_core::corpus::{parse_classification_jsonl, write_classification_jsonl, LabelSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut labels = LabelSet::new();
    if let Ok(examples) = parse_classification_jsonl(text, &mut labels) {
        let written = write_classification_jsonl(&examples, &labels);
        let mut again = LabelSet::new();
        let back = parse_classification_jsonl(&written, &mut again).expect("written corpus parses");
        assert_eq!(back.len(), examples.len());
    }
});
