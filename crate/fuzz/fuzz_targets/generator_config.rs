#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsereg::data::{simulate_cohort, GeneratorSpec};

// Generator configurations are user input. Any byte sequence must either
// parse into a valid spec or fail with an error — no panics, no unbounded
// allocation. Small accepted specs also exercise the simulator itself.
fuzz_target!(|data: &[u8]| {
    let spec = match GeneratorSpec::parse_json(data) {
        Ok(spec) => spec,
        Err(_) => return,
    };
    let small = spec.n <= 48
        && spec.p_genes <= 48
        && spec.p_clinical_extra <= 8
        && spec.fa_region_counts.iter().sum::<usize>() <= 24;
    if small {
        let _ = simulate_cohort(&spec, 1);
    }
});
