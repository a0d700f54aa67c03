#![no_main]

use libfuzzer_sys::fuzz_target;
use tree_itp::io::{parse_vector, vector_to_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_vector(text) {
        assert_eq!(parse_vector(&vector_to_text(&v)).unwrap(), v);
    }
});
