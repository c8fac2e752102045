#![no_main]

use dsest_core::sim::InputSignal;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(u) = InputSignal::parse(text) {
        for t in [0.0, 0.5, 1.0, 7.25] {
            let _ = u.value(t);
            for k in 0..3 {
                let _ = u.derivative(t, k);
            }
        }
    }
});
