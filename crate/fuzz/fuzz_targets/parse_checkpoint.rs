#![no_main]

use kitaev_thermal::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ck) = Checkpoint::from_json_str(text) {
            let again = Checkpoint::from_json_str(&ck.to_json_string()).expect("re-parse");
            assert_eq!(again.len(), ck.len());
        }
    }
});
