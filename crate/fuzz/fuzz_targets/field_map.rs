#![no_main]
use efpsa_core::field::FieldMap;
use libfuzzer_sys::fuzz_target;

// Anything that parses must survive a write/read round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = FieldMap::parse(text) {
        let again = FieldMap::parse(&map.to_text()).expect("re-parse of written map");
        assert_eq!(map.to_text(), again.to_text());
    }
});
