#![no_main]

use dnas_core::NasConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = NasConfig::parse_kv(text) {
        cfg.validate().expect("parsed configs are valid");
        assert_eq!(NasConfig::parse_kv(&cfg.to_kv()).expect("round trip"), cfg);
    }
});
