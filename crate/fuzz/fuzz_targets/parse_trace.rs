#![no_main]
use chorex_core::rw::parse_trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(queries) = parse_trace(text) {
        let printed: String = queries.iter().map(|q| format!("{q}\n")).collect();
        assert_eq!(parse_trace(&printed).unwrap(), queries);
    }
});
