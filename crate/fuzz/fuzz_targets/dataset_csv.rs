#![no_main]

use dnas_core::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = Dataset::from_csv_str(text, "fuzz") {
        d.validate().expect("parsed data sets are valid");
        let again = Dataset::from_csv_str(&d.to_csv_string(), "fuzz").expect("round trip");
        assert_eq!(d, again);
    }
});
