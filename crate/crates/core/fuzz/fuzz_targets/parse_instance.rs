#![no_main]

use libfuzzer_sys::fuzz_target;
use tree_itp::io::{instance_to_json, parse_instance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = parse_instance(text) {
        assert_eq!(inst.b.len(), inst.n());
        let _ = parse_instance(&instance_to_json(&inst));
    }
});
