#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsereg::pipeline::RegionPartition;

// Region partition files are user input; both the strict reference-count
// mode and the custom-layout mode must reject malformed bytes cleanly.
fuzz_target!(|data: &[u8]| {
    let _ = RegionPartition::parse_csv(data, false);
    if let Ok(p) = RegionPartition::parse_csv(data, true) {
        let csv = p.to_csv();
        let again = RegionPartition::parse_csv(csv.as_bytes(), true)
            .expect("serialized partition must reparse");
        assert_eq!(again.to_csv(), csv, "partition round-trip must be stable");
    }
});
