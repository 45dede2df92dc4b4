#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsereg::data::{Dataset, Role, Schema};

// The cohort CSV reader must reject malformed input with an error, never a
// panic. Parsing twice — once role-free, once with a schema that names
// columns commonly present in cohorts — also drives the role-validation
// paths.
fuzz_target!(|data: &[u8]| {
    if let Ok(d) = Dataset::from_csv_reader(data, &Schema::empty()) {
        let _ = d.n_rows();
        let _ = d.names_with_prefix("gene_");
    }
    let schema = Schema::empty()
        .with_role("subject", Role::Id)
        .with_role("dx", Role::Stratum)
        .with_role("mmse", Role::Outcome);
    let _ = Dataset::from_csv_reader(data, &schema);
});
