#![no_main]
use chorex_core::schema::{instance_to_json, parse_instance_with};
use chorex_core::Normalization;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for mode in [Normalization::Require, Normalization::Rescale] {
        if let Ok(inst) = parse_instance_with(text, mode) {
            // Emitted documents re-parse to the same instance.
            let again = parse_instance_with(&instance_to_json(&inst), Normalization::Skip).unwrap();
            assert_eq!(again.densities(), inst.densities());
        }
    }
});
