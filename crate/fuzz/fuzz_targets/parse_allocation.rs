#![no_main]
use chorex_core::schema::{allocation_to_json, parse_allocation};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(alloc) = parse_allocation(text) {
        assert_eq!(parse_allocation(&allocation_to_json(&alloc)).unwrap(), alloc);
    }
});
