#![no_main]
use chorex_core::approx::parse_oracle_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_oracle_spec(text) {
        let oracles = spec.oracles().unwrap();
        for o in oracles.iter().flatten() {
            let _ = o.eval(0.5);
        }
    }
});
