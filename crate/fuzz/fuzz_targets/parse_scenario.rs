#![no_main]

use libfuzzer_sys::fuzz_target;
use lossy_anneal::scenario::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = Scenario::parse(text) {
        // Accepted scenarios serialize back to themselves.
        let again = Scenario::parse(&s.to_toml()).expect("re-parse");
        assert_eq!(again, s);
        let _ = s.points();
    }
});
