#![no_main]

use libfuzzer_sys::fuzz_target;
use reqsel_core::{load_problem, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(loaded) = load_problem(data, Format::CsvBundle) else {
        return;
    };
    let again = load_problem(loaded.problem.to_json().as_bytes(), Format::Json).expect("canonical JSON reloads");
    assert_eq!(again.problem, loaded.problem);
});
