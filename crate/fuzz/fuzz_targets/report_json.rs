#![no_main]

use libfuzzer_sys::fuzz_target;
use reqsel_core::report::to_json;
use reqsel_core::PipelineReport;

fuzz_target!(|data: &[u8]| {
    let Ok(report) = serde_json::from_slice::<PipelineReport>(data) else {
        return;
    };
    let text = to_json(&report);
    let back: PipelineReport = serde_json::from_str(&text).expect("own output parses");
    assert_eq!(to_json(&back), text);
});
