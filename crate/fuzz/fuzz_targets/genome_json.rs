#![no_main]

use dnas_core::genome::{simulate_closed_loop, Nominal};
use dnas_core::Genome;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = Genome::from_json(text) {
        g.validate().expect("decoded genomes are valid");
        if g.regressor_len() <= 256 && g.weight_count() <= 4096 {
            let _ = simulate_closed_loop(&g, &[0.1, -0.2, 0.3], Nominal { input: 0.0, output: 1.0 });
        }
    }
});
