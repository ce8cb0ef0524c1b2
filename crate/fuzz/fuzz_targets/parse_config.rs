#![no_main]

use kitaev_thermal::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = RunConfig::from_toml_str(text) {
            // Accepted configs must survive a round trip.
            let again = RunConfig::from_toml_str(&config.to_toml_string()).expect("re-parse");
            assert_eq!(again, config);
        }
    }
});
