#![no_main]

use libfuzzer_sys::fuzz_target;
use lossy_anneal::objective::BoundTable;

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(table) = BoundTable::from_toml(text) {
        let _ = BoundTable::from_toml(&table.to_toml()).expect("re-parse");
    }
});
