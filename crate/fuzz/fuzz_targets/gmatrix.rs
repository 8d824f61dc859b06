#![no_main]
use efpsa_core::field::GMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = GMatrix::from_csv(text) {
        let again = GMatrix::from_csv(&g.to_csv()).expect("re-parse of written matrix");
        assert_eq!(g.to_csv(), again.to_csv());
    }
});
