#![no_main]

use fcm_wave::harness::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json(text) {
            let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(again, cfg);
        }
        let _ = RunConfig::set_from_json(text);
    }
});
