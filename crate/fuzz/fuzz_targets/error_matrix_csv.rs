#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::perf::{combination_curve, effectiveness_profile, ErrorMatrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = ErrorMatrix::from_csv("errors.csv", text) {
        let p = effectiveness_profile(&e);
        let curve = combination_curve(&e, &p).expect("valid matrix");
        assert!(curve.windows(2).all(|w| w[1].oracle_mae <= w[0].oracle_mae + 1e-9));
        let back = ErrorMatrix::from_csv("round-trip", &e.to_csv()).expect("own output parses");
        assert_eq!(back.n_instances(), e.n_instances());
    }
});
