//! Every checked-in fuzz seed must parse.

use std::path::PathBuf;

use fcm_wave::harness::{RunConfig, SignalMatrix};
use fcm_wave::linalg::mm;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds_parse() {
    for (p, b) in seeds("config_json") {
        let text = String::from_utf8(b).unwrap();
        let set = RunConfig::set_from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!set.is_empty());
    }
}

#[test]
fn matrix_market_seeds_parse() {
    for (p, b) in seeds("matrix_market") {
        let a = mm::read_matrix(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(a.dim() > 0);
    }
}

#[test]
fn signal_seeds_parse() {
    for (p, b) in seeds("signals_csv") {
        SignalMatrix::read_csv(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
