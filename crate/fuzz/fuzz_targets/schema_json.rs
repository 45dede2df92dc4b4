#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsereg::data::Schema;

// Schema documents come from users; arbitrary bytes must produce a clean
// error, never a panic.
fuzz_target!(|data: &[u8]| {
    let _ = Schema::parse_json(data);
});
