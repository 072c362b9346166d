#![no_main]

use fcm_wave::harness::SignalMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = SignalMatrix::read_csv(data) {
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(SignalMatrix::read_csv(buf.as_slice()).unwrap(), s);
    }
});
