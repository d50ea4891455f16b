#![no_main]

use libfuzzer_sys::fuzz_target;
use lossy_anneal::network::{neighbor_sets, SinrTopology};

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(t) = SinrTopology::from_toml(text) {
        let _ = neighbor_sets(&t, 250.0);
        let _ = SinrTopology::from_toml(&t.to_toml()).expect("re-parse");
    }
});
