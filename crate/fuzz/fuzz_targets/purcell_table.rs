#![no_main]
use efpsa_core::photonic::PurcellProfile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = PurcellProfile::from_csv(text) {
        if let PurcellProfile::Tabulated(rows) = &p {
            // Every tabulated node is in-domain and returns its own value.
            for &(x, f) in rows {
                assert_eq!(p.purcell_at(x).ok(), Some(f));
            }
        }
    }
});
