#![no_main]

use fcm_wave::linalg::mm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(a) = mm::read_matrix(data) {
        let mut buf = Vec::new();
        mm::write_matrix(&mut buf, &a).unwrap();
        let b = mm::read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a.dim(), b.dim());
    }
});
