#![no_main]

use dsest_core::io::EstimatorFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = EstimatorFile::parse(text) {
        let again = EstimatorFile::parse(&file.to_json()).expect("serialized estimator parses");
        assert_eq!(again.estimator, file.estimator);
    }
});
