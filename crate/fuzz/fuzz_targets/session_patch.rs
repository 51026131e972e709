#![no_main]

use std::sync::{Arc, OnceLock};

use libfuzzer_sys::fuzz_target;
use reqsel_core::selection::{id_set, plan_for_core};
use reqsel_core::{load_problem, Change, Format, NegotiationSession, ProblemInstance, ReleasePlan};

fn base() -> &'static (Arc<ProblemInstance>, ReleasePlan) {
    static BASE: OnceLock<(Arc<ProblemInstance>, ReleasePlan)> = OnceLock::new();
    BASE.get_or_init(|| {
        let json = include_bytes!("../../crates/core/tests/fixtures/problem20.json");
        let problem = load_problem(json, Format::Json).unwrap().problem;
        let plan = plan_for_core(
            &problem,
            id_set(["r1", "r4", "r8", "r9", "r10", "r11", "r14", "r15"]),
            None,
        )
        .unwrap();
        (Arc::new(problem), plan)
    })
}

// one PATCH body per line, applied in order to a fresh session
fuzz_target!(|data: &[u8]| {
    let (problem, plan) = base();
    let mut session = NegotiationSession::new(problem.clone(), plan.clone()).unwrap();
    for line in data.split(|b| *b == b'\n') {
        let Ok(change) = serde_json::from_slice::<Change>(line) else {
            continue;
        };
        let before = session.revision();
        match session.apply(&change) {
            Ok(_) => assert_eq!(session.revision(), before + 1),
            Err(_) => assert_eq!(session.revision(), before),
        }
        let rebuilt = NegotiationSession::restore(problem.clone(), session.view()).unwrap();
        assert_eq!(rebuilt.plan(), session.plan());
    }
});
