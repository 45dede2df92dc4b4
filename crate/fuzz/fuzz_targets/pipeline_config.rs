#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsereg::pipeline::PipelineConfig;

// Pipeline configurations are user input; parsing plus validation must
// never panic.
fuzz_target!(|data: &[u8]| {
    let _ = PipelineConfig::parse_json(data);
});
