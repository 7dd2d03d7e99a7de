#![no_main]

use dnas_core::plant::Schedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Schedule::parse(text, "fuzz") {
        s.validate().expect("parsed schedules are valid");
        let end = s.steps.last().unwrap().at;
        let _ = s.position_at(end + 1.0);
    }
});
