#![no_main]

use libfuzzer_sys::fuzz_target;
use lossy_anneal::scenario::{AxisSpec, MAX_AXIS_VALUES};

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(spec) = text.parse::<AxisSpec>() {
        assert!(!spec.values.is_empty() && spec.values.len() <= MAX_AXIS_VALUES);
        assert!(spec.values.iter().all(|v| v.is_finite()));
    }
});
