#![no_main]

use dsest_core::io::SystemFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = SystemFile::parse(text) {
        let again = SystemFile::parse(&file.to_json()).expect("serialized system parses");
        assert_eq!(again.system, file.system);
    }
});
