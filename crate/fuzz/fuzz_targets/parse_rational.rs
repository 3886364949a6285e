#![no_main]
use chorex_core::rational::{format_rational, parse_rational};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_rational(text) {
        assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }
});
