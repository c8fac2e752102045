#![no_main]

use dsest_core::io::Report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = Report::parse(text) {
        let _ = Report::parse(&r.to_json()).expect("serialized report parses");
    }
});
