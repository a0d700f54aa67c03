// cargo fuzz run parse_topology corpus/parse_topology

#![no_main]

use libfuzzer_sys::fuzz_target;
use tree_itp::io::{parse_topology, topology_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_topology(text) {
        // Whatever parses must survive a round trip unchanged.
        let again = parse_topology(&topology_to_json(&t)).expect("round trip");
        assert_eq!(again, t);
        let _ = t.postorder();
    }
});
