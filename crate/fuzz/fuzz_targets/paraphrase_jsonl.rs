#![no_main]

use libfuzzer_sys::fuzz_target;
use uda_core::augment::parse_paraphrase_jsonl;
use uda_core::corpus::build_vocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let sentences = [vec!["a", "b", "c"], vec!["b", "d"]];
    let vocab = build_vocabulary(sentences.iter().map(|s| s.as_slice()), 1).expect("vocabulary");
    if let Ok(table) = parse_paraphrase_jsonl(text, 4, &vocab) {
        for (id, seq) in table.iter() {
            assert!(id < 4);
            assert!(!seq.is_empty());
            assert!(seq.ids().iter().all(|&t| t < vocab.len()));
        }
    }
});
